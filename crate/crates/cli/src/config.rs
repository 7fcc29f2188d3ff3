//! Run configuration: a TOML file whose tables mirror the system parameters
//! and the per-subcommand options. Unknown keys are rejected.
//!
//! ```toml
//! [system]
//! nu = 3
//! n_balls = 3
//! radius = 0.3
//! box = 5.0
//! masses = [1.0, 2.0, 3.0]
//! rank_tol = 1e-8          # optional tolerances
//! horizon = 0.5            # optional event-search window
//!
//! [run]
//! seed = 1
//! events = 1000            # or: time = 25.0
//! state_file = "x.state"   # explicit initial condition instead of a seeded draw
//! out = "traj.txt"
//!
//! [survey]
//! samples = 200
//! mass_range = [0.5, 2.0]
//! box_range = [4.0, 8.0]
//!
//! [lyapunov]
//! events = 10000
//! renorm_every = 1
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hardballs::probe::{ParamRanges, SegmentPolicy};
use hardballs::tangent::LyapunovConfig;
use hardballs::Params;

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub survey: SurveySection,
    #[serde(default)]
    pub lyapunov: LyapunovSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub nu: usize,
    pub n_balls: usize,
    pub radius: f64,
    #[serde(rename = "box")]
    pub box_len: f64,
    /// Defaults to unit masses.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tangency_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simultaneity_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accumulation_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            nu: 3,
            n_balls: 3,
            radius: 0.3,
            box_len: 5.0,
            masses: None,
            rank_tol: None,
            tangency_tol: None,
            simultaneity_tol: None,
            accumulation_floor: None,
            horizon: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Stop after this many collisions (ignored when `time` is set).
    pub events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequence_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Collisions simulated past a double collision on each branch.
    pub branch_events: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            events: 1000,
            time: None,
            state_file: None,
            trajectory_file: None,
            sequence_file: None,
            out: None,
            branch_events: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveySection {
    pub samples: usize,
    pub mass_range: [f64; 2],
    pub box_range: [f64; 2],
    /// Defaults to `⌈C(N)⌉`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub richness_target: Option<usize>,
    pub max_events: usize,
    /// Collisions for a per-sample `λ_max` estimate; zero skips it.
    pub lyapunov_events: usize,
}

impl Default for SurveySection {
    fn default() -> Self {
        SurveySection {
            samples: 200,
            mass_range: [0.5, 2.0],
            box_range: [4.0, 8.0],
            richness_target: None,
            max_events: 10_000,
            lyapunov_events: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSection {
    pub events: usize,
    pub renorm_every: usize,
    pub blocks: usize,
    pub resamples: usize,
}

impl Default for LyapunovSection {
    fn default() -> Self {
        let d = LyapunovConfig::default();
        LyapunovSection {
            events: d.n_events,
            renorm_every: d.renorm_every,
            blocks: d.blocks,
            resamples: d.resamples,
        }
    }
}

impl RunConfig {
    /// Validated system parameters.
    pub fn params(&self) -> Result<Params, CliError> {
        let s = &self.system;
        let masses = s.masses.clone().unwrap_or_else(|| vec![1.0; s.n_balls]);
        if masses.len() != s.n_balls {
            return Err(CliError::Usage(format!(
                "{} masses given for n_balls = {}; pass one mass per ball",
                masses.len(),
                s.n_balls
            )));
        }
        let mut p = Params::new(s.nu, s.radius, s.box_len, masses)?;
        if let Some(x) = s.rank_tol {
            p.rank_tol = x;
        }
        if let Some(x) = s.tangency_tol {
            p.tangency_tol = x;
        }
        if let Some(x) = s.simultaneity_tol {
            p.simultaneity_tol = x;
        }
        if let Some(x) = s.accumulation_floor {
            p.accumulation_floor = x;
        }
        p.horizon = s.horizon;
        Ok(p)
    }

    pub fn ranges(&self) -> ParamRanges {
        ParamRanges {
            mass: (self.survey.mass_range[0], self.survey.mass_range[1]),
            box_len: (self.survey.box_range[0], self.survey.box_range[1]),
        }
    }

    pub fn policy(&self) -> Result<SegmentPolicy, CliError> {
        let mut policy = SegmentPolicy::for_balls(self.system.n_balls)?;
        if let Some(t) = self.survey.richness_target {
            policy.richness_target = t;
        }
        policy.max_events = self.survey.max_events;
        Ok(policy)
    }

    pub fn lyapunov_config(&self) -> LyapunovConfig {
        LyapunovConfig {
            n_events: self.lyapunov.events,
            renorm_every: self.lyapunov.renorm_every,
            blocks: self.lyapunov.blocks,
            resamples: self.lyapunov.resamples,
            seed: self.run.seed,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Parses and validates a configuration.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_column(text, s.start)).unwrap_or((0, 0));
            CliError::Config {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        config.params()?;
        Ok(config)
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |k| k + 1) + 1;
    (line, column)
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Missing {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    RunConfig::from_toml(&text).map_err(|e| match e {
        CliError::Config { line, column, message } => CliError::Config {
            line,
            column,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_report(text: &str, path: &Path) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn save_config(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    write_report(&config.to_toml(), path)
}
