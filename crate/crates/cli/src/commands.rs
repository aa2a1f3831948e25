//! Subcommand implementations. Each returns the text for standard output
//! and an exit code; hard failures are [`CliError`]s.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use sdre_attitude::dynamics::{ErrorState, OrbitRate};
use sdre_attitude::gaintable::{
    build_table_with_report, load_table, save_table, BuildError, BuildReport, GainTable,
    TableIoError,
};
use sdre_attitude::riccati::{WeightCase, TABLE1_CASES};
use sdre_attitude::sim::{
    compute_metrics, monte_carlo, run_closed_loop, Metrics, PerturbError, Scenario, SimError,
};

use crate::config::{parse_config, ConfigError, RunConfig};
use crate::output::{
    metrics_summary, plot_trajectory, real, settling_text, verdict, write_csv, write_text,
    write_trajectory_csv, OutputError, Provenance,
};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const IO: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const PARSE: u8 = 3;
    pub const VALIDATION: u8 = 4;
    pub const SOLVER: u8 = 5;
    pub const DIVERGENCE: u8 = 6;
    pub const UNSETTLED: u8 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    ReadConfig {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot create output directory {path}: {source}")]
    CreateDir {
        path: String,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("gain table: {0}")]
    Table(#[from] TableIoError),
    #[error("gain synthesis failed: {0}")]
    Build(#[from] BuildError),
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("inertia perturbation: {0}")]
    Perturb(#[from] PerturbError),
    #[error("{0}")]
    Output(#[from] OutputError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::ReadConfig { .. } | Self::CreateDir { .. } | Self::Output(_) => exit::IO,
            Self::Table(TableIoError::Io(_)) => exit::IO,
            Self::Table(_) => exit::PARSE,
            Self::Config(ConfigError::Parse { .. }) => exit::PARSE,
            Self::Config(ConfigError::Validation { .. }) => exit::VALIDATION,
            Self::Build(_) => exit::SOLVER,
            Self::Sim(SimError::Diverged { .. }) => exit::DIVERGENCE,
            Self::Sim(SimError::InvalidScenario(_)) | Self::Perturb(_) => exit::VALIDATION,
        }
    }
}

/// Command-line overrides shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub plot: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub code: u8,
}

pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub table: Option<PathBuf>,
    pub seed: u64,
    pub plot: bool,
}

impl Context {
    pub fn new(o: &Overrides) -> Result<Self, CliError> {
        let text = match &o.config {
            Some(path) => fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
                path: path.display().to_string(),
                source,
            })?,
            None => String::new(),
        };
        let config = parse_config(&text)?;
        let out_dir = o.out.clone().unwrap_or_else(|| config.out_dir.clone());
        fs::create_dir_all(&out_dir).map_err(|source| CliError::CreateDir {
            path: out_dir.display().to_string(),
            source,
        })?;
        Ok(Self {
            seed: o.seed.unwrap_or(config.seed),
            plot: o.plot || config.plot,
            table: o.table.clone(),
            out_dir,
            config,
        })
    }

    fn provenance(&self, weights: Option<WeightCase>, extra: Vec<String>) -> Provenance {
        Provenance {
            config_digest: self.config.digest.clone(),
            seed: self.seed,
            inertia: self.config.inertia,
            weights,
            extra,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn build(&self, weights: &WeightCase) -> Result<(GainTable, BuildReport), CliError> {
        let c = &self.config;
        Ok(build_table_with_report(&c.grid, &c.inertia, weights, c.tolerance)?)
    }

    /// The table named by `--table`, or a fresh build from the config.
    fn table(&self) -> Result<Arc<GainTable>, CliError> {
        match &self.table {
            Some(path) => Ok(Arc::new(load_table(path)?)),
            None => Ok(Arc::new(self.build(&self.config.weights)?.0)),
        }
    }

    fn scenario(&self, table: Arc<GainTable>) -> Scenario {
        let c = &self.config;
        Scenario {
            initial_state: ErrorState::new(c.sigma0, c.omega0_dps.map(f64::to_radians)),
            omega_io: OrbitRate(c.orbit_rate_dps.map(f64::to_radians)),
            plant_inertia: c.inertia,
            controller_inertia: *table.inertia(),
            table,
            dt: c.dt,
            duration: c.duration,
        }
    }

    fn scenario_lines(&self) -> Vec<String> {
        let c = &self.config;
        let v = |x: &nalgebra::Vector3<f64>| format!("{} {} {}", real(x.x), real(x.y), real(x.z));
        vec![
            format!("sigma0 {}", v(c.sigma0.as_vector())),
            format!("omega0_dps {}", v(&c.omega0_dps)),
            format!("orbit_rate_dps {}", v(&c.orbit_rate_dps)),
            format!(
                "dt {} duration {} settle_threshold {}",
                real(c.dt),
                real(c.duration),
                real(c.settle_threshold)
            ),
        ]
    }
}

fn report_text(r: &BuildReport) -> String {
    format!(
        "vertices: {}\nnewton iterations: max {} mean {:.2}\nmax residual/‖Q‖: {:.3e}\n",
        r.vertices, r.max_iterations, r.mean_iterations, r.max_relative_residual
    )
}

pub fn cmd_gains(ctx: &Context) -> Result<Outcome, CliError> {
    let (table, report) = ctx.build(&ctx.config.weights)?;
    let path = ctx
        .table
        .clone()
        .unwrap_or_else(|| ctx.path(&ctx.config.table_file));
    let prov = ctx.provenance(
        Some(ctx.config.weights),
        vec![format!("tolerance {}", real(ctx.config.tolerance))],
    );
    save_table(&table, &prov.lines(), &path)?;
    Ok(Outcome {
        stdout: format!("{}table: {}\n", report_text(&report), path.display()),
        code: exit::SUCCESS,
    })
}

fn write_plot(ctx: &Context, name: &str, traj: &sdre_attitude::sim::Trajectory) -> Result<Option<PathBuf>, CliError> {
    if !ctx.plot {
        return Ok(None);
    }
    let path = ctx.path(name);
    plot_trajectory(&path, traj)?;
    Ok(Some(path))
}

pub fn cmd_simulate(ctx: &Context) -> Result<Outcome, CliError> {
    let table = ctx.table()?;
    let weights = *table.weights();
    let traj = run_closed_loop(&ctx.scenario(table))?;
    let metrics = compute_metrics(&traj, ctx.config.settle_threshold);
    let prov = ctx.provenance(Some(weights), ctx.scenario_lines());
    let csv_path = ctx.path("trajectory.csv");
    write_trajectory_csv(&csv_path, &prov, &traj)?;
    let summary = metrics_summary(&metrics);
    write_text(&ctx.path("metrics.txt"), &prov, &summary)?;
    let mut stdout = summary;
    stdout.push_str(&format!("trajectory: {}\n", csv_path.display()));
    if let Some(p) = write_plot(ctx, "trajectory.png", &traj)? {
        stdout.push_str(&format!("plot: {}\n", p.display()));
    }
    Ok(Outcome {
        stdout,
        code: exit::SUCCESS,
    })
}

fn settle_key(m: &Metrics) -> f64 {
    m.settling_time.unwrap_or(f64::INFINITY)
}

pub fn cmd_cases(ctx: &Context) -> Result<Outcome, CliError> {
    let mut results = Vec::new();
    for (i, case) in TABLE1_CASES.iter().enumerate() {
        let (table, _) = ctx.build(case)?;
        let traj = run_closed_loop(&ctx.scenario(Arc::new(table)))?;
        let prov = ctx.provenance(Some(*case), ctx.scenario_lines());
        write_trajectory_csv(&ctx.path(&format!("case{}_trajectory.csv", i + 1)), &prov, &traj)?;
        write_plot(ctx, &format!("case{}_trajectory.png", i + 1), &traj)?;
        results.push(compute_metrics(&traj, ctx.config.settle_threshold));
    }
    let slowest = (0..results.len())
        .max_by(|&a, &b| settle_key(&results[a]).total_cmp(&settle_key(&results[b])))
        .expect("four cases");

    let header = [
        "case",
        "q1",
        "q2",
        "r",
        "peak_torque_Nm",
        "settling_time_s",
        "verdict",
        "comment",
    ];
    let mut rows = Vec::new();
    let mut stdout = format!(
        "{:<5} {:>8} {:>8} {:>6} {:>12} {:>12}  verdict\n",
        "case", "q1", "q2", "r", "peak τ N·m", "settle s"
    );
    for (i, (case, m)) in TABLE1_CASES.iter().zip(&results).enumerate() {
        let mut comments = Vec::new();
        if m.exceeds_torque_guideline() {
            comments.push("high torque");
        }
        if i == slowest {
            comments.push("slowest");
        }
        let comment = comments.join("; ");
        rows.push(vec![
            (i + 1).to_string(),
            case.q1.to_string(),
            case.q2.to_string(),
            case.r.to_string(),
            real(m.peak_torque_inf),
            settling_text(m),
            verdict(m).to_string(),
            comment.clone(),
        ]);
        let settle = m
            .settling_time
            .map_or("not settled".to_string(), |t| format!("{t:.2}"));
        stdout.push_str(&format!(
            "{:<5} {:>8} {:>8} {:>6} {:>12.4e} {:>12}  {}{}\n",
            i + 1,
            case.q1,
            case.q2,
            case.r,
            m.peak_torque_inf,
            settle,
            verdict(m),
            if comment.is_empty() { String::new() } else { format!(" ({comment})") }
        ));
    }
    let prov = ctx.provenance(None, ctx.scenario_lines());
    let path = ctx.path("cases.csv");
    write_csv(&path, &prov, &header, &rows)?;
    stdout.push_str(&format!("table: {}\n", path.display()));
    Ok(Outcome {
        stdout,
        code: exit::SUCCESS,
    })
}

pub fn cmd_montecarlo(ctx: &Context) -> Result<Outcome, CliError> {
    let c = &ctx.config;
    let table = ctx.table()?;
    let weights = *table.weights();
    let report = monte_carlo(
        &ctx.scenario(table),
        c.mc_runs,
        c.mc_level,
        ctx.seed,
        c.settle_threshold,
    )?;

    let header = [
        "run",
        "ixx",
        "iyy",
        "izz",
        "ixy",
        "ixz",
        "iyz",
        "peak_torque_Nm",
        "settling_time_s",
        "final_error",
        "status",
    ];
    let mut rows = Vec::new();
    let mut diverged = Vec::new();
    for r in &report.records {
        let mut row = vec![r.index.to_string()];
        row.extend(r.plant_inertia.entries().iter().map(|&v| real(v)));
        match &r.outcome {
            Ok(m) => {
                row.push(real(m.peak_torque_inf));
                row.push(settling_text(m));
                row.push(real(m.final_attitude_error));
                row.push(if m.settled() { "settled" } else { "unsettled" }.into());
            }
            Err(e) => {
                let time = match e {
                    SimError::Diverged { time } => real(*time),
                    SimError::InvalidScenario(_) => "nan".into(),
                };
                diverged.push(format!("run {}: {e}", r.index));
                row.extend(["inf".into(), "inf".into(), "inf".into(), format!("diverged at {time}")]);
            }
        }
        rows.push(row);
    }
    let extra = {
        let mut lines = ctx.scenario_lines();
        lines.push(format!("runs {} level {}", report.runs, real(report.level)));
        lines.push(format!("rng {}", report.rng_algorithm));
        lines
    };
    let prov = ctx.provenance(Some(weights), extra);
    write_csv(&ctx.path("montecarlo.csv"), &prov, &header, &rows)?;

    let agg = report.aggregate;
    let worst_settle = agg
        .worst_settling_time
        .map_or("not settled".to_string(), |t| format!("{t:.2} s"));
    let mut summary = format!(
        "runs: {}\nseed: {}\nlevel: {}\nrng: {}\nsettled: {}/{}\ndiverged: {}\n\
         worst peak torque: {:.6e} N·m\nworst settling time: {worst_settle}\n\
         worst final attitude error: {:.6e}\n",
        report.runs,
        report.seed,
        report.level,
        report.rng_algorithm,
        agg.settled,
        report.runs,
        agg.diverged,
        agg.worst_peak_torque,
        agg.worst_final_error,
    );
    for d in &diverged {
        summary.push_str(&format!("{d}\n"));
    }
    write_text(&ctx.path("montecarlo_summary.txt"), &prov, &summary)?;

    let code = if agg.diverged > 0 {
        exit::DIVERGENCE
    } else if agg.settled < report.runs {
        exit::UNSETTLED
    } else {
        exit::SUCCESS
    };
    Ok(Outcome {
        stdout: summary,
        code,
    })
}

