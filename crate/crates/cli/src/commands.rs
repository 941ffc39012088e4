use std::path::Path;

use asep2d_core::campaign::{run_coupled_campaign, run_exclusion_campaign, CampaignConfig, InitialLaw};
use asep2d_core::dynamics::{CouplingScheme, Dynamics, SimWarning};
use asep2d_core::exact::duality::degree_preserving_antisymmetric_block;
use asep2d_core::exact::operators::identity_report;
use asep2d_core::exact::state_space::k_subsets;
use asep2d_core::exact::{
    build_operators, resolvent_form, verify_duality_reconstruction, verify_variational_identity, Coeffs,
    DualityBasis, Ensemble, DEFAULT_STATE_CAP,
};
use asep2d_core::fourier::{bound_curve, fit_divergence, log_grid, OuterTolerance, SymbolParams};
use asep2d_core::io::{csv_table, format_kernel};
use asep2d_core::model::comparison_kernel;
use asep2d_core::observables::{fit_scaling, ScalingModel, TimeSeries};
use asep2d_core::{JumpKernel, TorusGeometry};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{default_bounds_kernel, hex, threads_from_env, Settings};
use crate::error::{CliError, Context};
use crate::output::Run;

fn kernel_hash(kernel: &JumpKernel) -> String {
    hex(&Sha256::digest(format_kernel(kernel).as_bytes()))
}

fn start(command: &str, s: &Settings, kernel: Option<&JumpKernel>) -> Run {
    let mut run = Run::new(s.out_dir(), command);
    run.set("config", serde_json::to_value(s).expect("settings serialize"));
    run.set("config_hash", json!(s.hash()));
    run.set("seed", json!(s.seed.unwrap_or(DEFAULT_SEED)));
    if let Some(k) = kernel {
        run.set("kernel_hash", json!(kernel_hash(k)));
    }
    run
}

fn geometry_json(g: &TorusGeometry) -> serde_json::Value {
    let (l1, l2) = g.sides();
    json!([l1, l2])
}

fn series_columns(s: &TimeSeries) -> [&[f64]; 3] {
    [&s.times, &s.mean, &s.se]
}

/// Validates a kernel and prints its derived table.
pub fn kernel(s: &Settings) -> Result<String, CliError> {
    if s.kernel.is_none() && s.jumps.is_none() {
        return Err(CliError::ConfigInvalid("`kernel` needs a kernel file or inline jumps".into()));
    }
    let k = s.kernel_or(JumpKernel::symmetric_nn())?;
    let mut out = k.summary();
    match comparison_kernel(&k) {
        Ok(p0) => {
            out.push_str(&format!("comparison kernel{}:\n", if p0.axes_swapped { " (axes swapped)" } else { "" }));
            out.push_str(&format_kernel(&p0.kernel));
        }
        Err(e) => out.push_str(&format!("comparison kernel: none ({e})\n")),
    }
    out.push_str(&format!("hash = {}\n", kernel_hash(&k)));
    Ok(out)
}

fn campaign(s: &Settings, horizon: f64) -> Result<CampaignConfig, CliError> {
    Ok(CampaignConfig {
        seed: s.seed.unwrap_or(DEFAULT_SEED),
        replicas: s.replicas()?,
        horizon,
        sample_times: s.sample_times(horizon)?,
        threads: threads_from_env()?,
    })
}

pub fn simulate(s: &Settings) -> Result<Run, CliError> {
    let kernel = s.kernel_or(JumpKernel::symmetric_nn())?;
    let g = s.geometry(64, &kernel)?;
    let law = match s.particles {
        Some(k) => InitialLaw::Canonical(k),
        None => InitialLaw::Bernoulli(s.rho()?),
    };
    let cfg = campaign(s, s.horizon()?)?;
    let dynamics = Dynamics::new(&kernel, &g);
    let summary = run_exclusion_campaign(&dynamics, law, &cfg).context("exclusion campaign")?;

    let mut run = start("simulate", s, Some(&kernel));
    run.set("geometry", geometry_json(&g));
    run.set("horizon", json!(cfg.horizon));
    run.set("attempts", json!(summary.stats.attempts));
    let v = &summary.variance.sigma2;
    run.csv(
        "sigma2.csv",
        &csv_table(&["t", "sigma2", "se", "occupation"], &[&v.times, &v.mean, &v.se, &summary.variance.occupation.mean]),
    );
    Ok(run)
}

pub fn coupled(s: &Settings) -> Result<Run, CliError> {
    let kernel = s.kernel_or(JumpKernel::symmetric_nn())?;
    let horizon = s.horizon()?;
    let safe = TorusGeometry::wrap_safe_side(&kernel, horizon).ceil().max(8.0) as usize;
    let g = s.geometry(safe, &kernel)?;
    let scheme = match s.scheme.as_deref().unwrap_or("uniformized") {
        "uniformized" => CouplingScheme::Uniformized,
        "marginal" => CouplingScheme::MarginalWalk,
        other => return Err(CliError::ConfigInvalid(format!("unknown scheme {other:?}"))),
    };
    let cfg = campaign(s, horizon)?;
    let dynamics = Dynamics::new(&kernel, &g);
    let summary = run_coupled_campaign(&dynamics, s.rho()?, scheme, &cfg, s.eval_times.as_deref())
        .context("coupled campaign")?;

    let mut run = start("coupled", s, Some(&kernel));
    run.set("geometry", geometry_json(&g));
    run.set("horizon", json!(horizon));
    let warnings: Vec<String> = summary
        .warnings
        .iter()
        .map(|w| match w {
            SimWarning::HorizonTooLargeForTorus { horizon, side_needed, side } => format!(
                "horizon {horizon} needs side {side_needed:.0} to rule out wrapping, torus side is {side}"
            ),
        })
        .collect();
    run.set("warnings", json!(warnings));
    run.csv(
        "return_probability.csv",
        &csv_table(&["t", "p", "se"], &series_columns(&summary.return_probability)),
    );
    let [r1, r2] = &summary.displacement;
    run.csv(
        "displacement.csv",
        &csv_table(&["t", "mean_r1", "se_r1", "mean_r2", "se_r2"], &[&r1.times, &r1.mean, &r1.se, &r2.mean, &r2.se]),
    );
    if let Some(kv) = &summary.kernel_variance {
        run.csv("kernel_variance.csv", &csv_table(&["t", "sigma2", "se"], &series_columns(kv)));
    }
    Ok(run)
}

const DEFAULT_SEED: u64 = 1;

const EXACT_LAMBDAS: [f64; 3] = [0.01, 0.1, 1.0];

pub fn exact_check(s: &Settings) -> Result<Run, CliError> {
    let kernel = s.kernel_or(JumpKernel::symmetric_nn())?;
    // Small tori may alias kernel vectors; the operators sum the aliased rates.
    let g = TorusGeometry::new(s.l1.unwrap_or(3), s.l2.unwrap_or(2)).context("geometry")?;
    let k = s.particles.unwrap_or(3);
    let rho = s.rho()?;
    let ops = build_operators(&g, &kernel, Ensemble::Sector(k), DEFAULT_STATE_CAP).context("operators")?;
    let f = ops.space.centered_occupation(g.origin());

    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    for lambda in EXACT_LAMBDAS {
        let r = resolvent_form(&ops, &f, lambda).context("resolvent")?;
        rows.push((format!("symmetric_bound_violation@{lambda}"), (r.full - r.symmetric).max(0.0), 1e-10));
        let v = verify_variational_identity(&ops, &f, lambda).context("variational identity")?;
        rows.push((format!("factorization@{lambda}"), v.factorization_residual, 1e-10));
    }
    let basis = DualityBasis::new(&g, &kernel, rho, k, true).context("duality basis")?;
    let mut coeffs = Coeffs::new();
    let mut i = 0.0f64;
    for d in 0..=2.min(k) {
        for b in k_subsets(g.sites(), d) {
            i += 1.0;
            coeffs.insert(b, (0.7548776662466927 * i).fract() - 0.5);
        }
    }
    let dual = verify_duality_reconstruction(&basis, &ops.l, &ops.space, &coeffs).context("duality")?;
    rows.push(("duality_reconstruction".into(), dual, 1e-12));
    if rho == 0.5 {
        let product = build_operators(&g, &kernel, Ensemble::Product(0.5), DEFAULT_STATE_CAP).context("operators")?;
        let block = degree_preserving_antisymmetric_block(&basis, &product.a, &product.space, g.sites())
            .context("antisymmetric block")?;
        rows.push(("degree_preserving_antisymmetric_block".into(), block, 1e-14));
    }

    let mut run = start("exact-check", s, Some(&kernel));
    run.set("geometry", geometry_json(&g));
    run.set("states", json!(ops.space.len()));
    run.csv("identities.csv", &identity_report(&rows));
    let failed: Vec<&str> = rows.iter().filter(|(_, r, t)| r > t).map(|(n, _, _)| n.as_str()).collect();
    if !failed.is_empty() {
        run.finish()?;
        return Err(CliError::CheckFailed(failed.join(", ")));
    }
    Ok(run)
}

pub fn bounds(s: &Settings) -> Result<Run, CliError> {
    let kernel = s.kernel_or(default_bounds_kernel())?;
    let p = SymbolParams::from_kernel(&kernel).context("symbol parameters")?;
    let (lo, hi) = (s.lambda_min.unwrap_or(1e-8), s.lambda_max.unwrap_or(1e-2));
    let n = s.lambda_points.unwrap_or(13);
    if !(lo > 0.0 && lo < hi && n >= 2) {
        return Err(CliError::ConfigInvalid(format!("lambda grid [{lo}, {hi}] with {n} points")));
    }
    let defaults = OuterTolerance::default();
    let tol = OuterTolerance {
        outer: s.tol_outer.unwrap_or(defaults.outer),
        inner: s.tol_inner.unwrap_or(defaults.inner),
    };
    let curve = bound_curve(&log_grid(lo, hi, n), &p, tol).context("bound curve")?;

    let mut run = start("bounds", s, Some(&kernel));
    let swapped = comparison_kernel(&kernel).map(|c| c.axes_swapped).unwrap_or(false);
    run.set("axes_swapped", json!(swapped));
    run.set("symbol", json!({ "b1": p.b1, "b2": p.b2, "a1": p.a1, "a2": p.a2 }));
    run.set("max_relative_error", json!(curve.max_relative_error()));
    run.csv("bounds.csv", &curve.to_csv());
    let mut report = String::new();
    for (name, fit) in [("general", &curve.general_fit), ("axis", &curve.axis_fit)] {
        match fit {
            Some(f) => report.push_str(&format!("[{name}]\n{}", f.report())),
            None if name == "axis" && curve.axis.is_none() => {}
            None => report.push_str(&format!("[{name}]\ngrid too short for a rate fit\n")),
        }
    }
    run.text("fit_report.txt", &report);
    Ok(run)
}

/// Reads named numeric columns from a CSV, skipping `#` lines.
fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| CliError::ConfigInvalid(format!("column {n:?} not in {}", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        for (c, &i) in idx.iter().enumerate() {
            let v = fields.get(i).map(|f| f.trim()).unwrap_or("");
            if v.is_empty() {
                continue;
            }
            let v = v.parse().map_err(|_| CliError::ConfigInvalid(format!("row {} column {:?}: {v:?}", row + 2, names[c])))?;
            cols[c].push(v);
        }
    }
    if cols.iter().any(|c| c.len() != cols[0].len()) {
        return Err(CliError::ConfigInvalid("selected columns have missing values".into()));
    }
    Ok(cols)
}

pub fn fit(s: &Settings) -> Result<Run, CliError> {
    let input = s.input.as_deref().ok_or_else(|| CliError::ConfigInvalid("`fit` needs an input CSV".into()))?;
    if !input.exists() {
        return Err(CliError::ConfigInvalid(format!("input {} does not exist", input.display())));
    }
    let model = s.model.as_deref().unwrap_or("power");
    let report = if model == "divergence" {
        let x = s.x_column.as_deref().unwrap_or("lambda");
        let y = s.y_column.as_deref().unwrap_or("bound_general");
        let cols = read_columns(input, &[x, y])?;
        fit_divergence(&cols[0], &cols[1]).context("divergence fit")?.report()
    } else {
        let m = ScalingModel::from_tag(model)
            .ok_or_else(|| CliError::ConfigInvalid(format!("unknown model {model:?}")))?;
        let x = s.x_column.as_deref().unwrap_or("t");
        let y = s.y_column.as_deref().unwrap_or("sigma2");
        let mut names = vec![x, y];
        if let Some(se) = s.se_column.as_deref() {
            names.push(se);
        }
        let mut cols = read_columns(input, &names)?;
        let se = if cols.len() == 3 { cols.pop().expect("three columns") } else { vec![0.0; cols[0].len()] };
        let series = TimeSeries {
            variance: vec![0.0; se.len()],
            se,
            mean: cols.pop().expect("y column"),
            times: cols.pop().expect("x column"),
            replicas: 0,
        };
        let lo = s.window_lo.unwrap_or(f64::MIN_POSITIVE);
        let hi = s.window_hi.unwrap_or(f64::INFINITY);
        fit_scaling(&series, m, (lo, hi)).context("scaling fit")?.report()
    };
    let mut run = start("fit", s, None);
    run.set("input", json!(input.display().to_string()));
    run.text("fit_report.txt", &report);
    Ok(run)
}
