//! WebAssembly bindings for a single static page. Every export returns plain
//! numbers or CSV text; the page does its own drawing.

use asep2d_core::campaign::{run_coupled_campaign, CampaignConfig};
use asep2d_core::dynamics::{CouplingScheme, Dynamics};
use asep2d_core::fourier::{self, FMethod, OuterTolerance, SymbolParams};
use asep2d_core::io::{csv_table, parse_kernel};
use asep2d_core::observables::time_grid;
use asep2d_core::TorusGeometry;
use wasm_bindgen::prelude::*;

/// `[F¹, F², err¹, err²]` at one point of the torus.
pub fn field_values(u: f64, w: f64, lambda: f64, p: [f64; 4]) -> Result<Vec<f64>, String> {
    let params = SymbolParams::new(p[0], p[1], p[2], p[3]).map_err(|e| e.to_string())?;
    let f = fourier::f_lambda(u, w, lambda, &params, FMethod::Reduced, 1e-8).map_err(|e| e.to_string())?;
    Ok(vec![f.f1, f.f2, f.err1, f.err2])
}

pub fn bound_csv(kernel: &str, lambda_min: f64, lambda_max: f64, points: usize) -> Result<String, String> {
    if !(lambda_min > 0.0 && lambda_min < lambda_max && (2..=40).contains(&points)) {
        return Err(format!("need 0 < lambda_min < lambda_max and 2..=40 points, got {points}"));
    }
    let k = parse_kernel(kernel).map_err(|e| e.to_string())?;
    let p = SymbolParams::from_kernel(&k).map_err(|e| e.to_string())?;
    let grid = fourier::log_grid(lambda_min, lambda_max, points);
    let curve = fourier::bound_curve(&grid, &p, OuterTolerance::default()).map_err(|e| e.to_string())?;
    Ok(curve.to_csv())
}

/// Coupled campaign on an `side × side` torus. Columns: `t, p, se_p, mean_r1, mean_r2`.
pub fn coupled_csv(kernel: &str, side: usize, rho: f64, horizon: f64, replicas: u32, seed: u32) -> Result<String, String> {
    if !(horizon > 0.0 && horizon <= 200.0) {
        return Err(format!("horizon {horizon} outside (0, 200]"));
    }
    let k = parse_kernel(kernel).map_err(|e| e.to_string())?;
    let g = TorusGeometry::for_kernel(side, side, &k).map_err(|e| e.to_string())?;
    let dynamics = Dynamics::new(&k, &g);
    let cfg = CampaignConfig {
        seed: seed as u64,
        replicas: replicas as u64,
        horizon,
        sample_times: time_grid(0.05, horizon, 1.05, &[]),
        threads: None,
    };
    let s = run_coupled_campaign(&dynamics, rho, CouplingScheme::Uniformized, &cfg, None).map_err(|e| e.to_string())?;
    let p = &s.return_probability;
    Ok(csv_table(
        &["t", "p", "se_p", "mean_r1", "mean_r2"],
        &[&p.times, &p.mean, &p.se, &s.displacement[0].mean, &s.displacement[1].mean],
    ))
}

#[wasm_bindgen]
pub fn f_field(u: f64, w: f64, lambda: f64, b1: f64, b2: f64, a1: f64, a2: f64) -> Result<Vec<f64>, JsError> {
    field_values(u, w, lambda, [b1, b2, a1, a2]).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bound_curve(kernel: &str, lambda_min: f64, lambda_max: f64, points: usize) -> Result<String, JsError> {
    bound_csv(kernel, lambda_min, lambda_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn coupled_run(kernel: &str, side: usize, rho: f64, horizon: f64, replicas: u32, seed: u32) -> Result<String, JsError> {
    coupled_csv(kernel, side, rho, horizon, replicas, seed).map_err(|e| JsError::new(&e))
}
