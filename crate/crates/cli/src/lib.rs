//! Command-line front end: `simulate`, `sufficiency`, `richness`,
//! `lyapunov`, `survey` and `ansatz`.
//!
//! Exit codes: 0 on success, 1 for usage, configuration and I/O problems,
//! 2 when the computation itself fails (conservation drift, singular
//! segments, rejection overflow and the like).

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use hardballs::dynamics::{simulate, Stop};
use hardballs::neutral::{both_branches_sufficient, neutral_space};
use hardballs::probe::{ansatz_probe, sample_phase_point, sample_rng, sufficiency_survey, SurveyConfig, SurveyReport};
use hardballs::symbolic::{ceil_count, find_witness, threshold_c, SymbolicSequence};
use hardballs::tangent::lyapunov_spectrum;
use hardballs::{io, Params, State, Traj};

pub use config::{load_config, save_config, write_report, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {}: {reason}", path.display())]
    Missing { path: PathBuf, reason: String },
    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot write {}: {reason}", path.display())]
    Io { path: PathBuf, reason: String },
    #[error(transparent)]
    Core(#[from] hardballs::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hardballs", version, about = "Hard-ball dynamics on the flat torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Collisions to simulate.
    #[arg(long, global = true)]
    events: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Dimension ν of the torus.
    #[arg(long, global = true)]
    nu: Option<usize>,
    #[arg(long = "n-balls", global = true)]
    n_balls: Option<usize>,
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Side length L of the torus.
    #[arg(long = "box", global = true)]
    box_len: Option<f64>,
    /// Comma-separated masses, one per ball.
    #[arg(long, global = true, value_parser = parse_masses)]
    masses: Option<MassList>,
    #[arg(long = "rank-tol", global = true)]
    rank_tol: Option<f64>,
    /// Event search window (default L / (2 v_max)).
    #[arg(long, global = true)]
    horizon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
struct MassList(Vec<f64>);

fn parse_masses(s: &str) -> Result<MassList, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map(MassList)
        .map_err(|_| format!("`{s}` is not a list of numbers; write e.g. --masses 1,2.5,3"))
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the flow and export the trajectory.
    Simulate {
        /// Initial condition file (parameters and state); otherwise drawn from the seed.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Stop after this much flow time instead of a collision count.
        #[arg(long)]
        time: Option<f64>,
    },
    /// Neutral space and sufficiency of a trajectory file or a fresh run.
    Sufficiency {
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Richness, C(N) and a witness for a symbolic sequence file.
    Richness { sequence: Option<PathBuf> },
    /// Lyapunov spectrum with bootstrap error bars.
    Lyapunov {
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long = "renorm-every")]
        renorm_every: Option<usize>,
    },
    /// Sufficiency survey over sampled masses and box sizes.
    Survey {
        /// Summary block path (default: `<out>.summary`).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Forward sufficiency of sampled tangential reflections.
    Ansatz {
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let _ = write!(err, "{}", e.render());
            return 1;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn resolve_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let s = &mut cfg.system;
    if let Some(x) = common.nu {
        s.nu = x;
    }
    if let Some(x) = common.radius {
        s.radius = x;
    }
    if let Some(x) = common.box_len {
        s.box_len = x;
    }
    if let Some(x) = common.rank_tol {
        s.rank_tol = Some(x);
    }
    if let Some(x) = common.horizon {
        s.horizon = Some(x);
    }
    match (common.masses.as_ref().map(|m| &m.0), common.n_balls) {
        (Some(m), Some(n)) if m.len() != n => {
            return Err(CliError::Usage(format!(
                "--masses lists {} values but --n-balls is {n}; give one mass per ball",
                m.len()
            )))
        }
        (Some(m), _) => {
            s.n_balls = m.len();
            s.masses = Some(m.clone());
        }
        (None, Some(n)) => {
            if s.masses.as_ref().is_some_and(|m| m.len() != n) {
                s.masses = None;
            }
            s.n_balls = n;
        }
        (None, None) => {}
    }
    if let Some(x) = common.seed {
        cfg.run.seed = x;
    }
    if let Some(x) = common.events {
        cfg.run.events = x;
        cfg.run.time = None;
    }
    if let Some(x) = &common.out {
        cfg.run.out = Some(x.clone());
    }
    if let Some(x) = common.samples {
        cfg.survey.samples = x;
    }
    cfg.params()?;
    Ok(cfg)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Missing {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => write_report(text, p),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::Io {
            path: PathBuf::from("<stdout>"),
            reason: e.to_string(),
        }),
    }
}

/// Explicit state file, or a seeded Liouville draw.
fn initial_state(cfg: &RunConfig, state: Option<&Path>) -> Result<(Params, State), CliError> {
    match state.or(cfg.run.state_file.as_deref()) {
        Some(path) => Ok(io::state_from_text(&read(path)?)?),
        None => {
            let params = cfg.params()?;
            let s = sample_phase_point(&params, &mut sample_rng(cfg.run.seed, 0))?;
            Ok((params, s))
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.common)?;
    let dest = cfg.run.out.clone();
    match cli.command {
        Command::Simulate { state, time } => {
            let (params, s) = initial_state(&cfg, state.as_deref())?;
            let stop = match time.or(cfg.run.time) {
                Some(t) => Stop::Time(t),
                None => Stop::Events(cfg.run.events),
            };
            let traj = simulate(&s, stop, &params)?;
            emit(&io::trajectory_to_text(&params, &traj), dest.as_deref(), out)?;
            if dest.is_some() {
                let _ = writeln!(
                    out,
                    "events {}\nfinal_time {:.16e}\nsingular_flags {}\nmin_gap {:.16e}",
                    traj.events.len(),
                    traj.final_state.time,
                    traj.singular_flags.len(),
                    traj.min_gap
                );
            }
        }
        Command::Sufficiency { trajectory, state } => {
            let (params, traj): (Params, Traj) = match trajectory.or(cfg.run.trajectory_file.clone()) {
                Some(path) => io::trajectory_from_text(&read(&path)?)?,
                None => {
                    let (params, s) = initial_state(&cfg, state.as_deref())?;
                    let traj = simulate(&s, Stop::Events(cfg.run.events), &params)?;
                    (params, traj)
                }
            };
            let mut text = format!("events {}\nrichness {}\n", traj.events.len(), traj.sequence.richness());
            if traj.pending_double.is_some() {
                let verdict = both_branches_sufficient(&traj, cfg.run.branch_events, &params)?;
                for (k, b) in verdict.branches.iter().enumerate() {
                    text.push_str(&format!("branch {}\n{}", k + 1, b.to_text()));
                }
                text.push_str(&format!("sufficient {}\n", verdict.sufficient));
            } else {
                let res = neutral_space(&traj, &params)?;
                let gap = res.distance_from_span(&traj.initial.velocities, &params.masses, params.dim);
                text.push_str(&res.to_text());
                text.push_str(&format!(
                    "velocity_distance {gap:.16e}\nsufficient {}\n",
                    res.is_sufficient()
                ));
            }
            emit(&text, dest.as_deref(), out)?;
        }
        Command::Richness { sequence } => {
            let path = sequence
                .or(cfg.run.sequence_file.clone())
                .ok_or_else(|| CliError::Usage("no sequence file; pass it as `richness <FILE>`".into()))?;
            let seq = SymbolicSequence::from_text(&read(&path)?)?;
            let n = seq.n_balls;
            let c = threshold_c(n)?;
            let approx = c.numer().to_string().parse::<f64>().unwrap_or(f64::NAN)
                / c.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
            let mut text = format!(
                "n_balls {n}\nlength {}\nC({n}) = {approx} ({c})\ntarget {}\nrichness {}\nrich {}\n",
                seq.len(),
                ceil_count(&c),
                seq.richness(),
                seq.is_rich(&c)
            );
            match find_witness(&seq) {
                Some(w) => text.push_str(&format!("witness ({},{},{})\n", w.ball + 1, w.p + 1, w.q + 1)),
                None => text.push_str("witness none\n"),
            }
            emit(&text, dest.as_deref(), out)?;
        }
        Command::Lyapunov { state, renorm_every } => {
            let (params, s) = initial_state(&cfg, state.as_deref())?;
            let mut lc = cfg.lyapunov_config();
            if let Some(k) = renorm_every {
                lc.renorm_every = k;
            }
            if cli.common.events.is_some() {
                lc.n_events = cfg.run.events;
            }
            let spectrum = lyapunov_spectrum(&s, &params, &lc)?;
            emit(&spectrum.to_text(&params, cfg.run.seed), dest.as_deref(), out)?;
        }
        Command::Survey { summary } => {
            let config = SurveyConfig {
                samples: cfg.survey.samples,
                master_seed: cfg.run.seed,
                ranges: cfg.ranges(),
                template: cfg.params()?,
                policy: cfg.policy()?,
                lyapunov_events: cfg.survey.lyapunov_events,
            };
            let report = sufficiency_survey(&config);
            write_survey(&report, dest.as_deref(), summary.as_deref(), out)?;
        }
        Command::Ansatz { summary } => {
            let params = cfg.params()?;
            let report = ansatz_probe(&params, cfg.survey.samples, cfg.run.seed, &cfg.policy()?);
            write_survey(&report, dest.as_deref(), summary.as_deref(), out)?;
        }
    }
    Ok(())
}

fn write_survey(
    report: &SurveyReport,
    csv: Option<&Path>,
    summary: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let text = report.summary_text();
    match csv {
        Some(path) => {
            write_report(&report.to_csv(), path)?;
            let default = PathBuf::from(format!("{}.summary", path.display()));
            write_report(&text, summary.unwrap_or(&default))?;
        }
        None => {
            emit(&report.to_csv(), None, out)?;
            if let Some(path) = summary {
                write_report(&text, path)?;
            }
        }
    }
    emit(&text, None, out)
}
