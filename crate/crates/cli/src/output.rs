//! Provenance headers, trajectory CSV and plot emission.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use image::{Rgb, RgbImage};
use thiserror::Error;

use sdre_attitude::dynamics::InertiaMatrix;
use sdre_attitude::riccati::WeightCase;
use sdre_attitude::sim::{Metrics, Trajectory};

pub const TRAJECTORY_HEADER: [&str; 10] = [
    "t", "sig1", "sig2", "sig3", "w1_dps", "w2_dps", "w3_dps", "tau1", "tau2", "tau3",
];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("CSV error on {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("plot error on {path}: {source}")]
    Image {
        path: String,
        source: image::ImageError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv {
        path: path.display().to_string(),
        source,
    }
}

/// Full-precision decimal text: 17 significant digits.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Provenance lines shared by every output file.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub config_digest: String,
    pub seed: u64,
    pub inertia: InertiaMatrix,
    pub weights: Option<WeightCase>,
    pub extra: Vec<String>,
}

impl Provenance {
    pub fn lines(&self) -> Vec<String> {
        let entries: Vec<String> = self.inertia.entries().iter().map(|&v| real(v)).collect();
        let mut out = vec![
            format!("sdre {}", env!("CARGO_PKG_VERSION")),
            format!("config sha256 {}", self.config_digest),
            format!("seed {}", self.seed),
            format!("inertia ixx iyy izz ixy ixz iyz {}", entries.join(" ")),
        ];
        match &self.weights {
            Some(w) => out.push(format!("weights q1 q2 r {} {} {}", real(w.q1), real(w.q2), real(w.r))),
            None => out.push("weights table-1 cases 1-4".into()),
        }
        out.extend(self.extra.iter().cloned());
        out
    }

    pub fn write_comment_header<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for line in self.lines() {
            writeln!(w, "# {line}")?;
        }
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, OutputError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Writes a CSV file preceded by `#` provenance lines.
pub fn write_csv(
    path: &Path,
    provenance: &Provenance,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), OutputError> {
    let mut file = create(path)?;
    provenance
        .write_comment_header(&mut file)
        .map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn trajectory_rows(traj: &Trajectory) -> Vec<Vec<String>> {
    traj.samples()
        .iter()
        .map(|s| {
            let mut row = vec![real(s.t)];
            row.extend(s.sigma.iter().map(|&v| real(v)));
            row.extend(s.omega.iter().map(|&v| real(v.to_degrees())));
            row.extend(s.tau.iter().map(|&v| real(v)));
            row
        })
        .collect()
}

pub fn write_trajectory_csv(
    path: &Path,
    provenance: &Provenance,
    traj: &Trajectory,
) -> Result<(), OutputError> {
    write_csv(path, provenance, &TRAJECTORY_HEADER, &trajectory_rows(traj))
}

/// Reads a trajectory CSV back into rows of ten values.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<[f64; 10]>, OutputError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file);
    let header = r.headers().map_err(csv_err(path))?;
    if header.iter().ne(TRAJECTORY_HEADER.iter().copied()) {
        return Err(OutputError::Format {
            path: path.display().to_string(),
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let mut row = [0.0; 10];
        for (slot, field) in row.iter_mut().zip(record.iter()) {
            *slot = field.parse().map_err(|_| OutputError::Format {
                path: path.display().to_string(),
                message: format!("row {}: invalid number '{field}'", i + 1),
            })?;
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn settling_text(m: &Metrics) -> String {
    match m.settling_time {
        Some(t) => real(t),
        None => "inf".into(),
    }
}

pub fn verdict(m: &Metrics) -> &'static str {
    if m.exceeds_torque_guideline() {
        "exceeds 0.02 N·m"
    } else {
        "peak torque below 0.02 N·m"
    }
}

/// Human-readable metrics block.
pub fn metrics_summary(m: &Metrics) -> String {
    let p = m.peak_torque_per_axis;
    let settle = match m.settling_time {
        Some(t) => format!("{t:.2} s"),
        None => "not settled".into(),
    };
    format!(
        "peak torque per axis: {:.6e} {:.6e} {:.6e} N·m\n\
         peak torque: {:.6e} N·m\n\
         settling time: {settle}\n\
         final attitude error: {:.6e}\n\
         verdict: {}\n",
        p.x,
        p.y,
        p.z,
        m.peak_torque_inf,
        m.final_attitude_error,
        verdict(m)
    )
}

pub fn write_text(path: &Path, provenance: &Provenance, body: &str) -> Result<(), OutputError> {
    let mut file = create(path)?;
    provenance
        .write_comment_header(&mut file)
        .map_err(io_err(path))?;
    file.write_all(body.as_bytes()).map_err(io_err(path))?;
    file.flush().map_err(io_err(path))
}

const PLOT_W: u32 = 900;
const PLOT_H: u32 = 300;
const COLORS: [Rgb<u8>; 3] = [Rgb([200, 40, 40]), Rgb([40, 150, 40]), Rgb([40, 60, 200])];

fn draw_panel(img: &mut RgbImage, top: u32, t: &[f64], series: [Vec<f64>; 3]) {
    let margin = 20.0;
    let (w, h) = (PLOT_W as f64 - 2.0 * margin, PLOT_H as f64 - 2.0 * margin);
    let t_max = t.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let y_max = series
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let to_px = |ti: f64, v: f64| {
        let x = margin + ti / t_max * w;
        let y = top as f64 + margin + (0.5 - 0.5 * v / y_max) * h;
        (x, y)
    };
    for x in margin as u32..(margin + w) as u32 {
        let (_, y0) = to_px(0.0, 0.0);
        img.put_pixel(x, y0 as u32, Rgb([180, 180, 180]));
    }
    for (k, s) in series.iter().enumerate() {
        for i in 1..t.len() {
            let (x0, y0) = to_px(t[i - 1], s[i - 1]);
            let (x1, y1) = to_px(t[i], s[i]);
            let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
            for j in 0..=steps {
                let f = j as f64 / steps as f64;
                let (x, y) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
                if x >= 0.0 && y >= 0.0 && (x as u32) < PLOT_W && (y as u32) < top + PLOT_H {
                    img.put_pixel(x as u32, y as u32, COLORS[k]);
                }
            }
        }
    }
}

/// Two stacked panels: attitude error components and actuator torques,
/// each scaled symmetrically to its largest magnitude.
pub fn plot_trajectory(path: &Path, traj: &Trajectory) -> Result<(), OutputError> {
    let mut img = RgbImage::from_pixel(PLOT_W, 2 * PLOT_H, Rgb([255, 255, 255]));
    let t: Vec<f64> = traj.samples().iter().map(|s| s.t).collect();
    let pick = |f: &dyn Fn(usize) -> Vec<f64>| [f(0), f(1), f(2)];
    let sigma = pick(&|i| traj.samples().iter().map(|s| s.sigma[i]).collect());
    let tau = pick(&|i| traj.samples().iter().map(|s| s.tau[i]).collect());
    draw_panel(&mut img, 0, &t, sigma);
    draw_panel(&mut img, PLOT_H, &t, tau);
    img.save(path).map_err(|source| OutputError::Image {
        path: path.display().to_string(),
        source,
    })
}
