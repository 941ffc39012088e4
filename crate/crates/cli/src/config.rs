//! Run configuration: a TOML file whose keys mirror the command-line flags.
//! Flags override file values; anything still unset takes the command's
//! default.

use std::path::{Path, PathBuf};

use asep2d_core::io::parse_kernel;
use asep2d_core::{JumpKernel, Rate, TorusGeometry};
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Context};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Kernel file of `z1 z2 rate` lines.
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// Inline kernel, one `z1 z2 rate` string per jump (config file only).
    #[arg(skip)]
    pub jumps: Option<Vec<String>>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Fixed particle number instead of a Bernoulli product measure.
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub l1: Option<usize>,
    #[arg(long)]
    pub l2: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample spacing on [0, 1].
    #[arg(long)]
    pub time_step: Option<f64>,
    /// Geometric growth of the sample grid beyond t = 1; 1 keeps the spacing uniform.
    #[arg(long)]
    pub time_ratio: Option<f64>,
    /// Times at which the kernel-identity variance is evaluated.
    #[arg(long, value_delimiter = ',')]
    pub eval_times: Option<Vec<f64>>,
    /// `uniformized` or `marginal`.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub lambda_points: Option<usize>,
    #[arg(long)]
    pub tol_outer: Option<f64>,
    #[arg(long)]
    pub tol_inner: Option<f64>,
    /// CSV to fit.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub x_column: Option<String>,
    #[arg(long)]
    pub y_column: Option<String>,
    #[arg(long)]
    pub se_column: Option<String>,
    /// A scaling model tag (`power`, `t_log_t`, ...) or `divergence`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub window_lo: Option<f64>,
    #[arg(long)]
    pub window_hi: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        Settings { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Settings {
    /// Values in `top` win over values in `self`.
    pub fn overlay(self, top: Settings) -> Settings {
        overlay!(
            self, top, kernel, jumps, rho, particles, l1, l2, horizon, replicas, seed, time_step, time_ratio,
            eval_times, scheme, lambda_min, lambda_max, lambda_points, tol_outer, tol_inner, input, x_column,
            y_column, se_column, model, window_lo, window_hi, out
        )
    }

    pub fn load(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))
    }

    /// Hex SHA-256 of the merged settings in JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("settings serialize");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::ConfigInvalid(message.into())
}

pub fn default_bounds_kernel() -> JumpKernel {
    let r = Rate::ratio;
    JumpKernel::nearest_neighbor(r(3, 4), r(1, 4), r(1, 4), r(1, 4)).expect("valid kernel")
}

/// Typed accessors with validation.
impl Settings {
    pub fn kernel_or(&self, default: JumpKernel) -> Result<JumpKernel, CliError> {
        match (&self.kernel, &self.jumps) {
            (Some(_), Some(_)) => Err(invalid("give either `kernel` or `jumps`, not both")),
            (Some(path), None) => {
                if !path.exists() {
                    return Err(invalid(format!("kernel file {} does not exist", path.display())));
                }
                let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
                parse_kernel(&text).context("kernel file")
            }
            (None, Some(lines)) => parse_kernel(&lines.join("\n")).context("inline kernel"),
            (None, None) => Ok(default),
        }
    }

    pub fn rho(&self) -> Result<f64, CliError> {
        let rho = self.rho.unwrap_or(0.5);
        if !(0.0..=1.0).contains(&rho) {
            return Err(invalid(format!("rho = {rho} must lie in [0, 1]")));
        }
        Ok(rho)
    }

    pub fn replicas(&self) -> Result<u64, CliError> {
        match self.replicas.unwrap_or(1000) {
            0 => Err(invalid("replicas must be at least 1")),
            n => Ok(n),
        }
    }

    pub fn horizon(&self) -> Result<f64, CliError> {
        let h = self.horizon.unwrap_or(10.0);
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid(format!("horizon = {h} must be positive")));
        }
        Ok(h)
    }

    pub fn geometry(&self, default_side: usize, kernel: &JumpKernel) -> Result<TorusGeometry, CliError> {
        let l1 = self.l1.unwrap_or(default_side);
        let l2 = self.l2.unwrap_or(default_side);
        TorusGeometry::for_kernel(l1, l2, kernel).context("geometry")
    }

    pub fn sample_times(&self, horizon: f64) -> Result<Vec<f64>, CliError> {
        let step = self.time_step.unwrap_or(0.01);
        let ratio = self.time_ratio.unwrap_or(1.02);
        if !(step > 0.0 && step <= 1.0) {
            return Err(invalid(format!("time_step = {step} must lie in (0, 1]")));
        }
        if !(ratio >= 1.0 && ratio.is_finite()) {
            return Err(invalid(format!("time_ratio = {ratio} must be at least 1")));
        }
        let eval = self.eval_times.clone().unwrap_or_default();
        if ratio > 1.0 {
            return Ok(asep2d_core::observables::time_grid(step, horizon, ratio, &eval));
        }
        let n = (horizon / step).ceil() as usize;
        let mut grid: Vec<f64> = (0..=n).map(|k| (k as f64 * step).min(horizon)).collect();
        grid.extend(eval.iter().copied().filter(|t| (0.0..=horizon).contains(t)));
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        Ok(grid)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Worker threads from `ASEP2D_THREADS`; unset means the pool default.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("ASEP2D_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(invalid(format!("ASEP2D_THREADS = {v:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}
