use nalgebra::{DMatrix, Matrix3, Vector3, Vector6};
use proptest::prelude::*;
use sdre_attitude::attitude::{
    euler_from_mrp, kinematics_matrix, mrp_from_euler, mrp_from_quaternion, quaternion_from_euler,
    quaternion_from_mrp, rotation_from_mrp, skew, EulerAngles, Mrp, UnitQuaternion,
};
use sdre_attitude::dynamics::{reduced_error_dynamics, sdc_factorize, ErrorState, InertiaMatrix};
use sdre_attitude::riccati::{gain_from_solution, is_hurwitz, solve_care, WeightPair};

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-range..range).prop_map(Vector3::from)
}

fn mrp() -> impl Strategy<Value = Mrp> {
    // Inside the unit ball: principal angles up to 180°.
    vec3(1.0)
        .prop_filter("inside unit ball", |v| v.norm() < 0.999)
        .prop_map(|v| Mrp::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn skew_is_antisymmetric_cross_product(a in vec3(10.0), b in vec3(10.0)) {
        let s = skew(&a);
        prop_assert_eq!(s.transpose(), -s);
        prop_assert!((s * b - a.cross(&b)).amax() <= 1e-12);
    }

    #[test]
    fn kinematics_matrix_scaled_orthogonality(s in mrp()) {
        let g = kinematics_matrix(&s);
        let k = (1.0 + s.norm_squared()) / 4.0;
        prop_assert!((g * g.transpose() - Matrix3::identity() * k * k).amax() <= 1e-14);
        prop_assert!((g.determinant() - k.powi(3)).abs() <= 1e-14);
    }

    #[test]
    fn rotation_is_proper_orthogonal(s in vec3(3.0)) {
        let r = rotation_from_mrp(&Mrp::new(s).unwrap());
        prop_assert!((r.transpose() * r - Matrix3::identity()).amax() <= 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rotation_matches_quaternion_oracle(s in mrp()) {
        let q = quaternion_from_mrp(&s);
        prop_assert!((q.to_rotation_matrix() - rotation_from_mrp(&s)).amax() <= 1e-12);
        let back = mrp_from_quaternion(&q).unwrap();
        prop_assert!((back.as_vector() - s.as_vector()).amax() <= 1e-12);
    }

    #[test]
    fn quaternion_sign_is_irrelevant(w in -1.0f64..1.0, v in vec3(1.0)) {
        let q = UnitQuaternion::new(w, v).unwrap();
        prop_assume!(q.w().abs() < 1.0 - 1e-6);
        let neg = UnitQuaternion::new(-q.w(), -q.v()).unwrap();
        let a = mrp_from_quaternion(&q).unwrap();
        let b = mrp_from_quaternion(&neg).unwrap();
        prop_assert!((rotation_from_mrp(&a) - rotation_from_mrp(&b)).amax() <= 1e-8);
    }

    #[test]
    fn euler_round_trip(
        roll in -3.1f64..3.1,
        pitch in -1.5f64..1.5,
        yaw in -3.1f64..3.1,
    ) {
        let e = EulerAngles::new(roll, pitch, yaw);
        let s = mrp_from_euler(&e).unwrap();
        let back = euler_from_mrp(&s).unwrap();
        let r1 = quaternion_from_euler(&e).to_rotation_matrix();
        let r2 = quaternion_from_euler(&back).to_rotation_matrix();
        prop_assert!((r1 - r2).amax() <= 1e-10);
        prop_assert!((back.roll - roll).abs() <= 1e-9);
        prop_assert!((back.pitch - pitch).abs() <= 1e-9);
        prop_assert!((back.yaw - yaw).abs() <= 1e-9);
    }

    #[test]
    fn sdc_factorization_reproduces_reduced_field(
        s in vec3(1.5),
        w in vec3(0.2),
        u in vec3(0.1),
    ) {
        let j = InertiaMatrix::paper();
        let x = ErrorState::new(Mrp::new(s).unwrap(), w);
        let sdc = sdc_factorize(&x, &j);
        let f = sdc.a * x.to_vector() + sdc.b * u;
        let reference: Vector6<f64> = reduced_error_dynamics(&x, &u, &j);
        prop_assert!((f - reference).amax() <= 1e-13 * reference.amax().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scalar_care_matches_closed_form(
        a in -5.0f64..5.0,
        b in prop_oneof![0.1f64..10.0, -10.0f64..-0.1],
        q in 1e-3f64..1e3,
        r in 1e-3f64..1e3,
    ) {
        let d = (a * a + b * b * q / r).sqrt();
        // Cancellation-free branch of r(a + d)/b².
        let p_exact = if a >= 0.0 { r * (a + d) / (b * b) } else { q / (d - a) };
        let am = DMatrix::from_element(1, 1, a);
        let bm = DMatrix::from_element(1, 1, b);
        let w = WeightPair::new(DMatrix::from_element(1, 1, q), DMatrix::from_element(1, 1, r)).unwrap();
        let sol = solve_care(&am, &bm, &w, 1e-12).unwrap();
        prop_assert!((sol.p[(0, 0)] - p_exact).abs() <= 1e-10 * p_exact);
        let k = gain_from_solution(&sol, &bm, w.r());
        prop_assert!(is_hurwitz(&(&am - &bm * &k)));
    }
}
