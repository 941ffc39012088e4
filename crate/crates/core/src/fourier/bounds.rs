use std::cell::Cell;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::divergence::{fit_divergence, DivergenceReport};
use super::field::f1_reduced;
use super::SymbolParams;
use crate::error::FourierError;
use crate::quadrature::{integrate, integrate_breaks, Tolerance};

/// Relative tolerances of the nested bound quadrature: `outer` for the
/// angular and radial panels, `inner` for each `F` evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuterTolerance {
    pub outer: f64,
    pub inner: f64,
}

impl Default for OuterTolerance {
    fn default() -> Self {
        OuterTolerance { outer: 1e-5, inner: 1e-7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundValue {
    pub lambda: f64,
    pub value: f64,
    pub error: f64,
}

impl BoundValue {
    pub fn relative_error(&self) -> f64 {
        self.error / self.value
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Denominator {
    General,
    Axis,
}

fn sin2(x: f64) -> f64 {
    let s = x.sin();
    s * s
}

/// `¼ ∫_{[0,1]²} du dw / D(u, w)`, computed as `∫_{[0,1/2]²}` (the
/// integrand is even and 1-periodic in each variable) in polar coordinates
/// about the singular corner with a logarithmic radius.
fn bound(lambda: f64, p: &SymbolParams, kind: Denominator, tol: OuterTolerance) -> Result<BoundValue, FourierError> {
    if !(lambda > 0.0) {
        return Err(FourierError::NonPositiveLambda(lambda));
    }
    let c7 = p.c7();
    let q = p.swapped();
    let inner_rel = Cell::new(0.0f64);
    let all_converged = Cell::new(true);
    let note = |rel: f64, ok: bool| {
        inner_rel.set(inner_rel.get().max(rel));
        all_converged.set(all_converged.get() && ok);
    };
    let integrand = |u: f64, w: f64| -> f64 {
        let su = sin2(PI * u);
        let sw = sin2(PI * w);
        let f1 = f1_reduced(u, w, lambda, p, tol.inner);
        note(f1.error / f1.value, f1.converged);
        let denom = match kind {
            Denominator::Axis => lambda + c7 * (su + sw) + c7 * su * f1.value,
            Denominator::General => {
                let f2 = f1_reduced(w, u, lambda, &q, tol.inner);
                note(f2.error / f2.value, f2.converged);
                lambda + c7 * (su + sw) * (1.0 + f1.value + f2.value)
            }
        };
        1.0 / denom
    };

    let r0 = 1e-4 * lambda.sqrt().min(1.0);
    let x0 = r0.ln();
    let mut radial_rel = 0.0f64;
    let angular = integrate_breaks(
        |alpha: f64| {
            let (s, c) = alpha.sin_cos();
            let rmax = 0.5 / c.max(s);
            let head = integrate(
                |r: f64| r * integrand(r * c, r * s),
                0.0,
                r0,
                Tolerance::new(0.0, tol.outer * 0.1),
            );
            let body = integrate(
                |x: f64| {
                    let r = x.exp();
                    r * r * integrand(r * c, r * s)
                },
                x0,
                rmax.ln(),
                Tolerance::new(0.0, tol.outer * 0.1).with_max_intervals(4000),
            );
            all_converged.set(all_converged.get() && head.converged && body.converged);
            let v = head.value + body.value;
            radial_rel = radial_rel.max((head.error + body.error) / v);
            v
        },
        &[0.0, FRAC_PI_4, FRAC_PI_2],
        Tolerance::new(0.0, tol.outer).with_max_intervals(4000),
    );
    let value = angular.value;
    let error = angular.error + (radial_rel + inner_rel.get()) * value;
    if !all_converged.get() || !angular.converged || !value.is_finite() {
        return Err(FourierError::QuadratureNonConvergent { value, error });
    }
    Ok(BoundValue { lambda, value, error })
}

/// `¼∫₀¹∫₀¹ du dw / (λ + C₇(sin²πu + sin²πw)(1 + F¹_λ + F²_λ))`.
pub fn lower_bound_general(lambda: f64, p: &SymbolParams, tol: OuterTolerance) -> Result<BoundValue, FourierError> {
    bound(lambda, p, Denominator::General, tol)
}

/// `¼∫₀¹∫₀¹ du dw / (λ + C₇(sin²πu + sin²πw) + C₇ sin²(πu) F¹_λ)`, for
/// comparison kernels with `a2 = 0`.
pub fn lower_bound_axis(lambda: f64, p: &SymbolParams, tol: OuterTolerance) -> Result<BoundValue, FourierError> {
    if !p.is_axis_case() {
        return Err(FourierError::NotAxisCase);
    }
    bound(lambda, p, Denominator::Axis, tol)
}

/// `n` points log-spaced from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Thirteen points log-spaced over `[1e-8, 1e-2]`.
pub fn standard_lambda_grid() -> Vec<f64> {
    log_grid(1e-8, 1e-2, 13)
}

/// Bound values on a `λ` grid, with divergence fits when the grid allows.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCurve {
    pub lambdas: Vec<f64>,
    pub general: Vec<BoundValue>,
    /// Present only when the parameters have `a2 = 0`.
    pub axis: Option<Vec<BoundValue>>,
    pub general_fit: Option<DivergenceReport>,
    pub axis_fit: Option<DivergenceReport>,
}

fn map_lambdas<F>(lambdas: &[f64], f: F) -> Result<Vec<BoundValue>, FourierError>
where
    F: Fn(f64) -> Result<BoundValue, FourierError> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        lambdas.par_iter().map(|&l| f(l)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        lambdas.iter().map(|&l| f(l)).collect()
    }
}

pub fn bound_curve(lambdas: &[f64], p: &SymbolParams, tol: OuterTolerance) -> Result<BoundCurve, FourierError> {
    let general = map_lambdas(lambdas, |l| lower_bound_general(l, p, tol))?;
    let axis = if p.is_axis_case() {
        Some(map_lambdas(lambdas, |l| lower_bound_axis(l, p, tol))?)
    } else {
        None
    };
    let fit = |vals: &[BoundValue]| {
        let v: Vec<f64> = vals.iter().map(|b| b.value).collect();
        fit_divergence(lambdas, &v).ok()
    };
    Ok(BoundCurve {
        lambdas: lambdas.to_vec(),
        general_fit: fit(&general),
        axis_fit: axis.as_deref().and_then(fit),
        general,
        axis,
    })
}

impl BoundCurve {
    /// Largest relative quadrature error over every computed point.
    pub fn max_relative_error(&self) -> f64 {
        self.general
            .iter()
            .chain(self.axis.iter().flatten())
            .map(BoundValue::relative_error)
            .fold(0.0, f64::max)
    }

    /// Columns `lambda,bound_general,err_general,bound_axis,err_axis`; the
    /// axis columns are empty when the axis bound does not apply.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,bound_general,err_general,bound_axis,err_axis\n");
        for (i, g) in self.general.iter().enumerate() {
            let axis = match &self.axis {
                Some(a) => format!("{:.12e},{:.6e}", a[i].value, a[i].error),
                None => ",".to_string(),
            };
            out.push_str(&format!("{:.12e},{:.12e},{:.6e},{}\n", g.lambda, g.value, g.error, axis));
        }
        out
    }
}

/// Numerically admissible envelope constant: the largest
/// `F¹ + F² − (π/(2b̄))|log(λ + b̄(u² + w²))|` over [`envelope_nodes`]² and
/// the calibration `λ` values.
#[derive(Clone, Debug, PartialEq)]
pub struct C9Calibration {
    pub c9: f64,
    /// `λ` and `(u, w)` where the maximum was attained.
    pub lambda: f64,
    pub argmax: (f64, f64),
}

/// Sample points in `[0, 1/2]`, dense near `0` on a geometric scale.
pub fn envelope_nodes() -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..14).map(|k| 0.5 * 0.25f64.powi(k)).collect();
    nodes.extend((1..10).map(|j| 0.05 * j as f64));
    nodes.push(0.0);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    nodes
}

fn envelope_gap(u: f64, w: f64, lambda: f64, p: &SymbolParams, rel: f64) -> Result<f64, FourierError> {
    let f1 = f1_reduced(u, w, lambda, p, rel);
    let f2 = f1_reduced(w, u, lambda, &p.swapped(), rel);
    if !(f1.converged && f2.converged) {
        return Err(FourierError::QuadratureNonConvergent {
            value: f1.value + f2.value,
            error: f1.error + f2.error,
        });
    }
    let bb = p.b_bar();
    Ok(f1.value + f2.value - PI / (2.0 * bb) * (lambda + bb * (u * u + w * w)).ln().abs())
}

fn max_gap(lambda: f64, p: &SymbolParams) -> Result<(f64, (f64, f64)), FourierError> {
    if !(lambda > 0.0) {
        return Err(FourierError::NonPositiveLambda(lambda));
    }
    let nodes = envelope_nodes();
    let mut best = (f64::NEG_INFINITY, (0.0, 0.0));
    for &u in &nodes {
        for &w in &nodes {
            let g = envelope_gap(u, w, lambda, p, 1e-9)?;
            if g > best.0 {
                best = (g, (u, w));
            }
        }
    }
    Ok(best)
}

/// Calibrates `C₉` over the sample grid at each of `lambdas`. The gap is
/// largest at `(1/2, 1/2)` and grows with `λ`, so the range end points are
/// the natural calibration set.
pub fn calibrate_c9(lambdas: &[f64], p: &SymbolParams) -> Result<C9Calibration, FourierError> {
    let mut best = C9Calibration {
        c9: f64::NEG_INFINITY,
        lambda: f64::NAN,
        argmax: (0.0, 0.0),
    };
    for &lambda in lambdas {
        let (c9, argmax) = max_gap(lambda, p)?;
        if c9 > best.c9 {
            best = C9Calibration { c9, lambda, argmax };
        }
    }
    Ok(best)
}

/// Largest amount by which `F¹ + F²` exceeds the envelope with constant
/// `c9` at `λ`; nonpositive when the envelope holds on the sample grid.
pub fn envelope_excess(lambda: f64, p: &SymbolParams, c9: f64) -> Result<f64, FourierError> {
    Ok(max_gap(lambda, p)?.0 - c9)
}
