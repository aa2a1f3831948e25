//! Run configuration: `[section]` headers, `key = value` lines, `#` comments,
//! vectors as space-separated numbers.
//!
//! | section      | key              | default                 |
//! |--------------|------------------|-------------------------|
//! | `inertia`    | `ixx iyy izz`    | 9.8194 9.7030 9.7309    |
//! |              | `ixy ixz iyz`    | −0.0721 −0.2893 −0.1011 |
//! | `weights`    | `q1 q2 r`        | 0.1 1e−6 1000           |
//! |              | `tolerance`      | 1e−8                    |
//! | `grid`       | `sigma`          | −1 0 1                  |
//! |              | `omega_dps`      | −5 0 5                  |
//! | `scenario`   | `sigma0`         | 1/3 −1/3 −1/3           |
//! |              | `euler0_deg`     | (alternative to sigma0) |
//! |              | `omega0_dps`     | 0 0 0                   |
//! |              | `orbit_rate_dps` | 0 0 0                   |
//! |              | `dt` `duration`  | 0.05 600                |
//! |              | `settle_threshold` | 0.01                  |
//! | `montecarlo` | `runs level seed`| 100 0.1 1               |
//! | `output`     | `dir`            | `out`                   |
//! |              | `table`          | `gains.txt`             |
//! |              | `plot`           | false                   |

use std::collections::BTreeSet;
use std::path::PathBuf;

use nalgebra::{Matrix3, Vector3};
use sha2::{Digest, Sha256};
use thiserror::Error;

use sdre_attitude::attitude::{mrp_from_euler, EulerAngles, Mrp};
use sdre_attitude::dynamics::InertiaMatrix;
use sdre_attitude::gaintable::BreakpointGrid;
use sdre_attitude::riccati::{WeightCase, DEFAULT_TOLERANCE, TABLE1_CASES};
use sdre_attitude::sim::{DEFAULT_DT, DEFAULT_DURATION, DEFAULT_SETTLE_THRESHOLD, DEFAULT_UNCERTAINTY_LEVEL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for '{key}': {message}")]
    Validation { key: String, message: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        message: message.into(),
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inertia: InertiaMatrix,
    pub weights: WeightCase,
    pub tolerance: f64,
    pub grid: BreakpointGrid,
    pub sigma0: Mrp,
    pub omega0_dps: Vector3<f64>,
    pub orbit_rate_dps: Vector3<f64>,
    pub dt: f64,
    pub duration: f64,
    pub settle_threshold: f64,
    pub mc_runs: usize,
    pub mc_level: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub table_file: String,
    pub plot: bool,
    /// SHA-256 of the configuration text, hex encoded.
    pub digest: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("inertia", &["ixx", "iyy", "izz", "ixy", "ixz", "iyz"]),
    ("weights", &["q1", "q2", "r", "tolerance"]),
    ("grid", &["sigma", "omega_dps"]),
    (
        "scenario",
        &[
            "sigma0",
            "euler0_deg",
            "omega0_dps",
            "orbit_rate_dps",
            "dt",
            "duration",
            "settle_threshold",
        ],
    ),
    ("montecarlo", &["runs", "level", "seed"]),
    ("output", &["dir", "table", "plot"]),
];

enum Value {
    Reals(Vec<f64>),
    Text(String),
}

struct Entry {
    key: String,
    line: usize,
    value: Value,
}

/// Raw `section.key` entries in file order.
fn tokenize(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut section: Option<&str> = None;
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line, "unterminated section header"))?
                .trim();
            let known = KEYS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| parse_err(line, format!("unknown section '{name}'")))?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, "expected 'key = value'"))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.ok_or_else(|| parse_err(line, "key outside of any section"))?;
        let allowed = KEYS.iter().find(|(s, _)| *s == sec).unwrap().1;
        if !allowed.contains(&key) {
            return Err(parse_err(line, format!("unknown key '{key}' in [{sec}]")));
        }
        let full = format!("{sec}.{key}");
        if !seen.insert(full.clone()) {
            return Err(parse_err(line, format!("duplicate key '{full}'")));
        }
        if value.is_empty() {
            return Err(parse_err(line, format!("missing value for '{full}'")));
        }
        let value = match full.as_str() {
            "output.dir" | "output.table" | "output.plot" | "montecarlo.runs" | "montecarlo.seed" => {
                Value::Text(value.to_string())
            }
            _ => Value::Reals(
                value
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| parse_err(line, format!("invalid number '{t}'")))
                    })
                    .collect::<Result<_, _>>()?,
            ),
        };
        entries.push(Entry {
            key: full,
            line,
            value,
        });
    }
    Ok(entries)
}

fn scalar(e: &Entry) -> Result<f64, ConfigError> {
    match &e.value {
        Value::Reals(v) if v.len() == 1 => Ok(v[0]),
        _ => Err(parse_err(e.line, format!("'{}' takes one number", e.key))),
    }
}

fn triple(e: &Entry) -> Result<Vector3<f64>, ConfigError> {
    match &e.value {
        Value::Reals(v) if v.len() == 3 => Ok(Vector3::new(v[0], v[1], v[2])),
        _ => Err(parse_err(e.line, format!("'{}' takes three numbers", e.key))),
    }
}

fn list(e: &Entry) -> Vec<f64> {
    match &e.value {
        Value::Reals(v) => v.clone(),
        Value::Text(_) => Vec::new(),
    }
}

fn text(e: &Entry) -> String {
    match &e.value {
        Value::Text(t) => t.clone(),
        Value::Reals(_) => String::new(),
    }
}

fn unsigned(e: &Entry) -> Result<u64, ConfigError> {
    text(e)
        .parse()
        .map_err(|_| parse_err(e.line, format!("'{}' takes a non-negative integer", e.key)))
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, format!("{v} is not positive")))
    }
}

/// Parses and validates a configuration. Unset keys take their defaults.
pub fn parse_config(source: &str) -> Result<RunConfig, ConfigError> {
    let entries = tokenize(source)?;

    let [mut ixx, mut iyy, mut izz, mut ixy, mut ixz, mut iyz] = InertiaMatrix::paper().entries();
    let default_case = TABLE1_CASES[1];
    let (mut q1, mut q2, mut r) = (default_case.q1, default_case.q2, default_case.r);
    let mut tolerance = DEFAULT_TOLERANCE;
    let mut sigma_axis = vec![-1.0, 0.0, 1.0];
    let mut omega_axis = vec![-5.0, 0.0, 5.0];
    let mut sigma0 = None;
    let mut euler0 = None;
    let mut omega0_dps = Vector3::zeros();
    let mut orbit_rate_dps = Vector3::zeros();
    let mut dt = DEFAULT_DT;
    let mut duration = DEFAULT_DURATION;
    let mut settle_threshold = DEFAULT_SETTLE_THRESHOLD;
    let mut mc_runs = 100u64;
    let mut mc_level = DEFAULT_UNCERTAINTY_LEVEL;
    let mut seed = 1u64;
    let mut out_dir = PathBuf::from("out");
    let mut table_file = "gains.txt".to_string();
    let mut plot = false;

    for e in &entries {
        match e.key.as_str() {
            "inertia.ixx" => ixx = scalar(e)?,
            "inertia.iyy" => iyy = scalar(e)?,
            "inertia.izz" => izz = scalar(e)?,
            "inertia.ixy" => ixy = scalar(e)?,
            "inertia.ixz" => ixz = scalar(e)?,
            "inertia.iyz" => iyz = scalar(e)?,
            "weights.q1" => q1 = scalar(e)?,
            "weights.q2" => q2 = scalar(e)?,
            "weights.r" => r = scalar(e)?,
            "weights.tolerance" => tolerance = scalar(e)?,
            "grid.sigma" => sigma_axis = list(e),
            "grid.omega_dps" => omega_axis = list(e),
            "scenario.sigma0" => sigma0 = Some(triple(e)?),
            "scenario.euler0_deg" => euler0 = Some(triple(e)?),
            "scenario.omega0_dps" => omega0_dps = triple(e)?,
            "scenario.orbit_rate_dps" => orbit_rate_dps = triple(e)?,
            "scenario.dt" => dt = scalar(e)?,
            "scenario.duration" => duration = scalar(e)?,
            "scenario.settle_threshold" => settle_threshold = scalar(e)?,
            "montecarlo.runs" => mc_runs = unsigned(e)?,
            "montecarlo.level" => mc_level = scalar(e)?,
            "montecarlo.seed" => seed = unsigned(e)?,
            "output.dir" => out_dir = PathBuf::from(text(e)),
            "output.table" => table_file = text(e),
            "output.plot" => {
                plot = match text(e).as_str() {
                    "true" => true,
                    "false" => false,
                    other => return Err(parse_err(e.line, format!("expected true or false, found '{other}'"))),
                }
            }
            _ => unreachable!("keys are checked while tokenizing"),
        }
    }

    let inertia = InertiaMatrix::new(Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz))
        .map_err(|e| invalid("inertia", e.to_string()))?;
    positive("weights.q1", q1)?;
    positive("weights.q2", q2)?;
    positive("weights.r", r)?;
    positive("weights.tolerance", tolerance)?;
    let grid = BreakpointGrid::uniform(&sigma_axis, &omega_axis).map_err(|e| {
        let key = match e {
            sdre_attitude::gaintable::GridError::EmptyAxis { axis }
            | sdre_attitude::gaintable::GridError::NotIncreasing { axis } if axis < 3 => "grid.sigma",
            _ => "grid.omega_dps",
        };
        invalid(key, "breakpoints must be finite and strictly increasing")
    })?;

    let sigma0 = match (sigma0, euler0) {
        (Some(_), Some(_)) => {
            return Err(invalid("scenario.euler0_deg", "give either sigma0 or euler0_deg, not both"))
        }
        (Some(s), None) => Mrp::new(s).map_err(|e| invalid("scenario.sigma0", e.to_string()))?,
        (None, Some(d)) => mrp_from_euler(&EulerAngles::from_degrees(d.x, d.y, d.z))
            .map_err(|e| invalid("scenario.euler0_deg", e.to_string()))?,
        (None, None) => mrp_from_euler(&EulerAngles::from_degrees(90.0, 0.0, -90.0))
            .expect("default attitude is regular"),
    };
    if !omega0_dps.iter().all(|v| v.is_finite()) {
        return Err(invalid("scenario.omega0_dps", "non-finite rate"));
    }
    if !orbit_rate_dps.iter().all(|v| v.is_finite()) {
        return Err(invalid("scenario.orbit_rate_dps", "non-finite rate"));
    }
    positive("scenario.dt", dt)?;
    positive("scenario.duration", duration)?;
    if duration < dt {
        return Err(invalid("scenario.duration", "shorter than dt"));
    }
    positive("scenario.settle_threshold", settle_threshold)?;
    if mc_runs == 0 {
        return Err(invalid("montecarlo.runs", "at least one run is required"));
    }
    if !(0.0..1.0).contains(&mc_level) {
        return Err(invalid("montecarlo.level", format!("{mc_level} is outside [0, 1)")));
    }
    if table_file.is_empty() {
        return Err(invalid("output.table", "empty file name"));
    }

    Ok(RunConfig {
        inertia,
        weights: WeightCase::new(q1, q2, r),
        tolerance,
        grid,
        sigma0,
        omega0_dps,
        orbit_rate_dps,
        dt,
        duration,
        settle_threshold,
        mc_runs: mc_runs as usize,
        mc_level,
        seed,
        out_dir,
        table_file,
        plot,
        digest: hex::encode(Sha256::digest(source.as_bytes())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.inertia, InertiaMatrix::paper());
        assert_eq!(c.weights, TABLE1_CASES[1]);
        assert_eq!(c.grid, BreakpointGrid::paper());
        let s = c.sigma0.as_vector();
        assert!((s - Vector3::new(1.0, -1.0, -1.0) / 3.0).amax() < 1e-12);
        assert_eq!(c.dt, 0.05);
        assert_eq!(c.duration, 600.0);
        assert_eq!(c.mc_runs, 100);
        assert_eq!(
            c.digest,
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn negative_weight_names_the_key() {
        let err = parse_config("[weights]\nq1 = -1\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Validation {
                key: "weights.q1".into(),
                message: "-1 is not positive".into()
            }
        );
    }

    #[test]
    fn euler_initial_attitude() {
        let c = parse_config("[scenario]\neuler0_deg = 90 0 -90  # paper attitude\n").unwrap();
        let s = c.sigma0.as_vector();
        assert!((s - Vector3::new(1.0, -1.0, -1.0) / 3.0).amax() < 1e-12);
    }

    #[test]
    fn full_config() {
        let text = "\
# comment
[inertia]
ixx = 10
iyy = 11
izz = 12
ixy = 0
ixz = 0
iyz = 0
[weights]
q1 = 0.001
q2 = 1e-6
r = 1
tolerance = 1e-10
[grid]
sigma = -1 -0.5 0 0.5 1
omega_dps = -5 5
[scenario]
sigma0 = 0.1 0.2 -0.3
omega0_dps = 1 0 0
orbit_rate_dps = 0 -0.06 0
dt = 0.1
duration = 100
settle_threshold = 0.02
[montecarlo]
runs = 10
level = 0.05
seed = 99
[output]
dir = results
table = case3.txt
plot = true
";
        let c = parse_config(text).unwrap();
        assert_eq!(c.inertia.entries(), [10.0, 11.0, 12.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.weights, TABLE1_CASES[2]);
        assert_eq!(c.tolerance, 1e-10);
        assert_eq!(c.grid.shape(), [5, 5, 5, 2, 2, 2]);
        assert_eq!(c.sigma0.as_vector(), &Vector3::new(0.1, 0.2, -0.3));
        assert_eq!(c.orbit_rate_dps, Vector3::new(0.0, -0.06, 0.0));
        assert_eq!((c.dt, c.duration, c.settle_threshold), (0.1, 100.0, 0.02));
        assert_eq!((c.mc_runs, c.mc_level, c.seed), (10, 0.05, 99));
        assert_eq!(c.out_dir, PathBuf::from("results"));
        assert_eq!(c.table_file, "case3.txt");
        assert!(c.plot);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("[weights]\nfoo = 1\n", 2),
            ("[nope]\n", 1),
            ("q1 = 1\n", 1),
            ("[weights]\n\nq1 = abc\n", 3),
            ("[weights]\nq1 = 1\nq1 = 2\n", 3),
            ("[scenario]\nsigma0 = 1 2\n", 2),
            ("[weights]\nq1\n", 2),
            ("[output]\nplot = yes\n", 2),
            ("[montecarlo]\nruns = 2.5\n", 2),
        ];
        for (text, line) in cases {
            match parse_config(text) {
                Err(ConfigError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn validation_errors_name_keys() {
        let cases = [
            ("[inertia]\nixx = -1\n", "inertia"),
            ("[grid]\nsigma = 1 0\n", "grid.sigma"),
            ("[grid]\nomega_dps = 0 0\n", "grid.omega_dps"),
            ("[scenario]\ndt = 0\n", "scenario.dt"),
            ("[scenario]\nduration = 0.01\n", "scenario.duration"),
            ("[scenario]\nsigma0 = 0 0 0\neuler0_deg = 0 0 0\n", "scenario.euler0_deg"),
            ("[scenario]\neuler0_deg = 360 0 0\n", "scenario.euler0_deg"),
            ("[montecarlo]\nruns = 0\n", "montecarlo.runs"),
            ("[montecarlo]\nlevel = 1.5\n", "montecarlo.level"),
        ];
        for (text, key) in cases {
            match parse_config(text) {
                Err(ConfigError::Validation { key: k, .. }) => assert_eq!(k, key, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }
}
