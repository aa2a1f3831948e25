use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use nalgebra::Vector3;
use sdre_attitude::dynamics::{ErrorState, InertiaMatrix};
use sdre_attitude::gaintable::{build_table, save_table, BreakpointGrid, Gain, GainTable};
use sdre_attitude::riccati::{WeightCase, TABLE1_CASES};
use sdre_attitude::sim::{compute_metrics, run_closed_loop, Scenario};
use sdre_cli::config::RunConfig;
use sdre_cli::output::{read_trajectory_csv, real, trajectory_rows};
use tempfile::TempDir;

fn sdre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdre"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, text: &str) -> String {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p.display().to_string()
    }

    fn out(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    fn run(&self, cmd: &str, config: Option<&str>, out: &str, extra: &[&str]) -> Output {
        let mut args = vec![cmd, "--out", out];
        if let Some(c) = config {
            args.extend(["--config", c]);
        }
        args.extend(extra);
        sdre(&args)
    }
}

fn csv_body(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

fn assert_provenance(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# sdre {}", env!("CARGO_PKG_VERSION")));
    assert!(lines.next().unwrap().starts_with("# config sha256 "));
    assert!(lines.next().unwrap().starts_with("# seed "));
    assert!(lines.next().unwrap().starts_with("# inertia "));
    assert!(lines.next().unwrap().starts_with("# weights "));
}

fn paper_table(case: usize) -> GainTable {
    build_table(&BreakpointGrid::paper(), &InertiaMatrix::paper(), &TABLE1_CASES[case], 1e-8).unwrap()
}

#[test]
fn gains_builds_full_table_deterministically() {
    let ws = Workspace::new();
    let a = ws.run("gains", None, &ws.out("a"), &[]);
    assert_eq!(a.status.code(), Some(0));
    assert!(stdout(&a).contains("vertices: 729"));
    let b = ws.run("gains", None, &ws.out("b"), &[]);
    assert_eq!(b.status.code(), Some(0));
    let fa = fs::read(ws.path("a/gains.txt")).unwrap();
    let fb = fs::read(ws.path("b/gains.txt")).unwrap();
    assert_eq!(fa, fb);
    assert_provenance(&ws.path("a/gains.txt"));
}

#[test]
fn gains_honours_tight_tolerance() {
    let ws = Workspace::new();
    let cfg = ws.config("tight.ini", "[weights]\ntolerance = 1e-10\n");
    let o = ws.run("gains", Some(&cfg), &ws.out("o"), &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("max residual/‖Q‖:")).unwrap();
    let value: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(value <= 1e-10, "{line}");
}

#[test]
fn gains_writes_to_table_path() {
    let ws = Workspace::new();
    let table = ws.out("custom.txt");
    let o = ws.run("gains", None, &ws.out("o"), &["--table", &table]);
    assert_eq!(o.status.code(), Some(0));
    assert!(Path::new(&table).exists());
}

#[test]
fn simulate_verdicts_follow_weights() {
    let ws = Workspace::new();
    let o = ws.run("simulate", None, &ws.out("case2"), &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: peak torque below 0.02 N·m"));

    let cfg = ws.config("case1.ini", "[weights]\nq1 = 0.1\nq2 = 1e-6\nr = 1\n");
    let o = ws.run("simulate", Some(&cfg), &ws.out("case1"), &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: exceeds 0.02 N·m"));
    assert_provenance(&ws.path("case1/trajectory.csv"));
    assert_provenance(&ws.path("case1/metrics.txt"));
}

#[test]
fn zero_initial_state_gives_zero_body() {
    let ws = Workspace::new();
    let cfg = ws.config("zero.ini", "[scenario]\nsigma0 = 0 0 0\nduration = 2\n");
    let o = ws.run("simulate", Some(&cfg), &ws.out("o"), &[]);
    assert_eq!(o.status.code(), Some(0));
    let rows = read_trajectory_csv(&ws.path("o/trajectory.csv")).unwrap();
    assert_eq!(rows.len(), 41);
    for row in rows {
        assert!(row[1..].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn trajectory_csv_round_trip_is_bit_exact() {
    let ws = Workspace::new();
    let cfg = ws.config(
        "short.ini",
        "[scenario]\nduration = 30\nomega0_dps = 0.5 -0.2 0.1\norbit_rate_dps = 0 -0.06 0\n",
    );
    let o = ws.run("simulate", Some(&cfg), &ws.out("o"), &[]);
    assert_eq!(o.status.code(), Some(0));
    let body = csv_body(&ws.path("o/trajectory.csv"));
    assert_eq!(body[0], "t,sig1,sig2,sig3,w1_dps,w2_dps,w3_dps,tau1,tau2,tau3");

    // Same run through the library.
    let table = Arc::new(paper_table(1));
    let s = Scenario {
        initial_state: ErrorState::new(
            RunConfig::default().sigma0,
            Vector3::new(0.5, -0.2, 0.1).map(f64::to_radians),
        ),
        omega_io: sdre_attitude::dynamics::OrbitRate(Vector3::new(0.0, -0.06, 0.0).map(f64::to_radians)),
        duration: 30.0,
        ..Scenario::nominal(ErrorState::zero(), table)
    };
    let traj = run_closed_loop(&s).unwrap();
    let rows = read_trajectory_csv(&ws.path("o/trajectory.csv")).unwrap();
    assert_eq!(rows.len(), traj.samples().len());
    for (row, sample) in rows.iter().zip(traj.samples()) {
        assert_eq!(row[0], sample.t);
        for i in 0..3 {
            assert_eq!(row[1 + i], sample.sigma[i]);
            assert_eq!(row[4 + i], sample.omega[i].to_degrees());
            assert_eq!(row[7 + i], sample.tau[i]);
        }
    }
    let expected: Vec<String> = trajectory_rows(&traj).iter().map(|r| r.join(",")).collect();
    assert_eq!(&body[1..], &expected[..]);
}

#[test]
fn simulate_reports_divergence() {
    let ws = Workspace::new();
    let grid = BreakpointGrid::new(std::array::from_fn(|_| vec![0.0])).unwrap();
    let k = Gain::from_fn(|r, c| if c == r { -50.0 } else { 0.0 });
    let table = GainTable::from_parts(grid, vec![k], InertiaMatrix::paper(), WeightCase::new(1.0, 1.0, 1.0), 1e-8)
        .unwrap();
    let table_path = ws.path("bad.txt");
    save_table(&table, &[], &table_path).unwrap();
    let cfg = ws.config("long.ini", "[scenario]\nduration = 10000\ndt = 0.1\n");
    let o = ws.run("simulate", Some(&cfg), &ws.out("o"), &["--table", table_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged at t ="));
}

#[test]
fn cases_reproduce_reference_comments() {
    let ws = Workspace::new();
    let a = ws.run("cases", None, &ws.out("a"), &[]);
    assert_eq!(a.status.code(), Some(0));
    let body = csv_body(&ws.path("a/cases.csv"));
    assert_eq!(body[0], "case,q1,q2,r,peak_torque_Nm,settling_time_s,verdict,comment");
    let rows: Vec<Vec<&str>> = body[1..].iter().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let weights: Vec<[&str; 3]> = rows.iter().map(|r| [r[1], r[2], r[3]]).collect();
    assert_eq!(
        weights,
        [
            ["0.1", "0.000001", "1"],
            ["0.1", "0.000001", "1000"],
            ["0.001", "0.000001", "1"],
            ["0.001", "0.000001", "1000"],
        ]
    );
    assert_eq!(rows[0][6], "exceeds 0.02 N·m");
    assert!(rows[0][7].contains("high torque"));
    assert_eq!(rows[1][6], "peak torque below 0.02 N·m");
    assert!(rows[3][7].contains("slowest"));
    for r in &rows[..3] {
        assert!(!r[7].contains("slowest"));
    }
    assert_provenance(&ws.path("a/cases.csv"));

    let b = ws.run("cases", None, &ws.out("b"), &[]);
    assert_eq!(fs::read(ws.path("a/cases.csv")).unwrap(), fs::read(ws.path("b/cases.csv")).unwrap());
    for n in 1..=4 {
        let name = format!("case{n}_trajectory.csv");
        assert_eq!(
            fs::read(ws.path("a").join(&name)).unwrap(),
            fs::read(ws.path("b").join(&name)).unwrap()
        );
    }
    assert_eq!(
        stdout(&a).replace(&ws.out("a"), ""),
        stdout(&b).replace(&ws.out("b"), "")
    );
}

#[test]
fn montecarlo_default_campaign_settles() {
    let ws = Workspace::new();
    let o = ws.run("montecarlo", None, &ws.out("o"), &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("settled: 100/100"));
    let body = csv_body(&ws.path("o/montecarlo.csv"));
    assert_eq!(body.len(), 101);
    assert_provenance(&ws.path("o/montecarlo.csv"));
    assert_provenance(&ws.path("o/montecarlo_summary.txt"));
}

#[test]
fn montecarlo_is_seed_deterministic() {
    let ws = Workspace::new();
    let cfg = ws.config("mc.ini", "[montecarlo]\nruns = 6\n[scenario]\nduration = 120\n");
    let run = |dir: &str, seed: &str| {
        let o = ws.run("montecarlo", Some(&cfg), &ws.out(dir), &["--seed", seed]);
        assert!(matches!(o.status.code(), Some(0) | Some(7)));
        fs::read(ws.path(dir).join("montecarlo.csv")).unwrap()
    };
    let a = run("a", "7");
    let b = run("b", "7");
    let c = run("c", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn single_unperturbed_run_matches_simulate() {
    let ws = Workspace::new();
    let cfg = ws.config("one.ini", "[montecarlo]\nruns = 1\nlevel = 0\n");
    let o = ws.run("montecarlo", Some(&cfg), &ws.out("o"), &[]);
    assert_eq!(o.status.code(), Some(0));
    let body = csv_body(&ws.path("o/montecarlo.csv"));
    let fields: Vec<&str> = body[1].split(',').collect();

    let sigma0 = RunConfig::default().sigma0;
    let traj = run_closed_loop(&Scenario::nominal(
        ErrorState::new(sigma0, Vector3::zeros()),
        Arc::new(paper_table(1)),
    ))
    .unwrap();
    let m = compute_metrics(&traj, 0.01);
    assert_eq!(fields[7], real(m.peak_torque_inf));
    assert_eq!(fields[8], real(m.settling_time.unwrap()));
    assert_eq!(fields[9], real(m.final_attitude_error));
    assert_eq!(fields[10], "settled");

    // The simulate subcommand agrees to its printed precision.
    let s = ws.run("simulate", Some(&cfg), &ws.out("s"), &[]);
    assert!(stdout(&s).contains(&format!("peak torque: {:.6e} N·m", m.peak_torque_inf)));
}

#[test]
fn unsettled_campaign_exits_seven() {
    let ws = Workspace::new();
    let cfg = ws.config("short.ini", "[montecarlo]\nruns = 3\n[scenario]\nduration = 10\n");
    let o = ws.run("montecarlo", Some(&cfg), &ws.out("o"), &[]);
    assert_eq!(o.status.code(), Some(7));
    assert!(stdout(&o).contains("settled: 0/3"));
}

#[test]
fn plot_flag_writes_png() {
    let ws = Workspace::new();
    let cfg = ws.config("short.ini", "[scenario]\nduration = 20\n");
    let o = ws.run("simulate", Some(&cfg), &ws.out("o"), &["--plot"]);
    assert_eq!(o.status.code(), Some(0));
    let bytes = fs::read(ws.path("o/trajectory.png")).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
}

#[test]
fn error_exit_codes() {
    let ws = Workspace::new();
    let out = ws.out("o");

    let missing = ws.path("missing.ini").display().to_string();
    assert_eq!(ws.run("simulate", Some(&missing), &out, &[]).status.code(), Some(1));

    let parse = ws.config("parse.ini", "[weights]\nq7 = 1\n");
    let o = ws.run("gains", Some(&parse), &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let invalid = ws.config("invalid.ini", "[weights]\nq1 = -1\n");
    let o = ws.run("gains", Some(&invalid), &out, &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("weights.q1"));

    let garbage = ws.config("garbage.txt", "not a table\n");
    assert_eq!(ws.run("simulate", None, &out, &["--table", &garbage]).status.code(), Some(3));

    assert_eq!(sdre(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(sdre(&["simulate", "--seed", "abc"]).status.code(), Some(2));
}
