use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use slowproj::Method;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "slowproj", version, about = "Slow-manifold projections of stable linear systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Write the primary output here instead of stdout. A run report is then
    /// printed on stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of the model, optionally swept over a geometric k grid.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        /// `start:end:count`, geometric spacing (grad3 only).
        #[arg(long)]
        k_range: Option<GridRange>,
    },
    /// Project an initial condition onto the slow manifold (JSON output).
    Project {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        x0: InitialCondition,
        #[arg(long, default_value = "dop")]
        method: Method,
    },
    /// Full and reduced trajectories on a uniform time grid (CSV output).
    Trajectories {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        x0: InitialCondition,
        /// Comma-separated subset of dop, orth, riesz.
        #[arg(long, value_delimiter = ',', default_value = "dop,orth,riesz")]
        methods: Vec<Method>,
        /// Final time; defaults to the time over which the slowest mode
        /// squared decays by 1e-8.
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value_t = 501)]
        samples: usize,
    },
    /// The closed-form error over a grid of slow coordinates (CSV output).
    ErrorSurface {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        x0: InitialCondition,
        /// Real-part grid `start:end:count`, linear spacing.
        #[arg(long, allow_hyphen_values = true)]
        xi_range: GridRange,
        /// Imaginary-part grid `start:end:count`; defaults to zero.
        #[arg(long, allow_hyphen_values = true)]
        xi_im_range: Option<GridRange>,
    },
    /// Run the invariant suite on a seeded random ensemble (JSON report).
    Validate {
        #[arg(long, env = "SLOWPROJ_SEED", default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        /// Also feed a deliberately unstable system through the pipeline.
        #[arg(long)]
        self_test: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BuiltinModel {
    Shear2d,
    Grad3,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, required_unless_present = "model_file", conflicts_with = "model_file")]
    pub model: Option<BuiltinModel>,
    /// JSON file `{"dimension": d, "matrix": [[[re, im], ...], ...], "slow_count": n}`.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Overrides the model's default number of slow modes.
    #[arg(long)]
    pub slow_count: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct InitialCondition {
    /// Interleaved `re,im,re,im,...`, or `slow-orthogonal` for grad3.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: String,
}

/// `start:end:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRange {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl GridRange {
    pub fn linear(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.end } else { self.start + step * i as f64 })
            .collect()
    }

    pub fn geometric(&self) -> Result<Vec<f64>, CliError> {
        if !(self.start > 0.0 && self.end > 0.0) {
            return Err(CliError::BadRange(format!(
                "geometric range needs positive bounds, got {}:{}",
                self.start, self.end
            )));
        }
        if self.count == 1 {
            return Ok(vec![self.start]);
        }
        let ratio = (self.end / self.start).ln() / (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.end
                } else {
                    self.start * (ratio * i as f64).exp()
                }
            })
            .collect())
    }
}

impl FromStr for GridRange {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::BadRange(format!("expected start:end:count, got '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let end: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if count == 0 || !start.is_finite() || !end.is_finite() {
            return Err(bad());
        }
        Ok(Self { start, end, count })
    }
}
