use std::f64::consts::PI;

use super::{gamma_half_angle, SymbolParams};
use crate::error::FourierError;
use crate::quadrature::{integrate_breaks, QuadResult, Tolerance};

/// How `F¹, F²` are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FMethod {
    /// The `z` (resp. `v`) integral done in closed form, leaving one
    /// adaptive integral.
    Reduced,
    /// Nested adaptive quadrature of the two-dimensional integrand.
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FValues {
    pub f1: f64,
    pub f2: f64,
    pub err1: f64,
    pub err2: f64,
}

impl FValues {
    pub fn sum(&self) -> f64 {
        self.f1 + self.f2
    }

    pub fn max_relative_error(&self) -> f64 {
        (self.err1 / self.f1).max(self.err2 / self.f2)
    }
}

/// Representative of `x` in `[0, 1/2]` under `x → x + 1` and `x → -x`, both
/// of which leave `F¹` and `F²` unchanged.
pub(crate) fn fold(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    r.min(1.0 - r)
}

fn sin2(x: f64) -> f64 {
    let s = x.sin();
    s * s
}

/// Break points on `[0, 1]` graded geometrically towards both ends, where
/// the integrand may peak with width of order `scale`.
fn graded_breaks(scale: f64) -> Vec<f64> {
    let mut left = vec![0.0];
    let mut x = scale.max(1e-12);
    while x < 0.25 {
        left.push(x);
        x *= 4.0;
    }
    let mut breaks = left.clone();
    breaks.push(0.5);
    breaks.extend(left.iter().rev().map(|x| 1.0 - x));
    breaks
}

fn peak_scale(lambda: f64, u: f64, w: f64, p: &SymbolParams) -> f64 {
    (lambda / (p.b1 + p.b2) + u * u + w * w).sqrt()
}

/// `F¹` with `u, w` already folded into `[0, 1/2]`.
pub(crate) fn f1_reduced(u: f64, w: f64, lambda: f64, p: &SymbolParams, rel: f64) -> QuadResult {
    // ∫₀¹ dz / (P − Q cos πz) = 1/√(P² − Q²), with P − |Q| written as a sum
    // of squares so it keeps full relative accuracy near the singularity.
    let cw = (PI * w).cos();
    let gap_w = 4.0 * p.b2 * sin2(PI * w / 2.0);
    let h = PI / 2.0;
    let integrand = |v: f64| {
        let c = (PI * v).cos();
        let sym = 2.0 * p.b1 * (sin2(h * (u + v)) + sin2(h * (u - v)));
        let minus = lambda + sym + gap_w;
        let plus = lambda + sym + 2.0 * p.b2 * (1.0 + cw);
        c * c / (minus * plus).sqrt()
    };
    let breaks = graded_breaks(peak_scale(lambda, u, w, p));
    integrate_breaks(integrand, &breaks, Tolerance::new(0.0, rel).with_max_intervals(4000))
}

/// `F¹` by nested quadrature; `u, w` are used as given, without folding.
fn f1_direct(u: f64, w: f64, lambda: f64, p: &SymbolParams, rel: f64) -> QuadResult {
    let breaks = graded_breaks(peak_scale(lambda, fold(u), fold(w), p));
    let mut inner_error = 0.0f64;
    let mut inner_ok = true;
    let outer = integrate_breaks(
        |v: f64| {
            let c = (PI * v).cos();
            let r = integrate_breaks(
                |z| 1.0 / (lambda + gamma_half_angle(u, v, w, z, p)),
                &breaks,
                Tolerance::new(0.0, rel * 0.1).with_max_intervals(4000),
            );
            inner_ok &= r.converged;
            inner_error = inner_error.max(r.error / r.value.abs());
            c * c * r.value
        },
        &breaks,
        Tolerance::new(0.0, rel * 0.5).with_max_intervals(4000),
    );
    QuadResult {
        error: outer.error + inner_error * outer.value.abs(),
        converged: outer.converged && inner_ok,
        ..outer
    }
}

fn checked(r: QuadResult, rel: f64) -> Result<QuadResult, FourierError> {
    if !r.converged || !(r.value.is_finite()) || r.error > rel * r.value.abs() {
        return Err(FourierError::QuadratureNonConvergent {
            value: r.value,
            error: r.error,
        });
    }
    Ok(r)
}

/// `F¹_λ(u, w) = ∫∫ cos²(πv) / (λ + γ) dv dz` and `F²_λ` with `cos²(πz)`,
/// each to relative tolerance `rel`.
pub fn f_lambda(u: f64, w: f64, lambda: f64, p: &SymbolParams, method: FMethod, rel: f64) -> Result<FValues, FourierError> {
    if !(lambda > 0.0) {
        return Err(FourierError::NonPositiveLambda(lambda));
    }
    let q = p.swapped();
    let (r1, r2) = match method {
        FMethod::Reduced => {
            let (u, w) = (fold(u), fold(w));
            (f1_reduced(u, w, lambda, p, rel), f1_reduced(w, u, lambda, &q, rel))
        }
        FMethod::Direct => (f1_direct(u, w, lambda, p, rel), f1_direct(w, u, lambda, &q, rel)),
    };
    let (r1, r2) = (checked(r1, rel)?, checked(r2, rel)?);
    Ok(FValues {
        f1: r1.value,
        f2: r2.value,
        err1: r1.error,
        err2: r2.error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn general() -> SymbolParams {
        SymbolParams::new(0.25, 0.125, 0.25, 0.125).unwrap()
    }

    #[test]
    fn large_lambda_limit() {
        let lambda = 1e6;
        for method in [FMethod::Reduced, FMethod::Direct] {
            let f = f_lambda(0.2, 0.7, lambda, &general(), method, 1e-4).unwrap();
            assert!((f.f1 * 2.0 * lambda - 1.0).abs() < 0.01);
            assert!((f.f2 * 2.0 * lambda - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn reduced_matches_direct() {
        let p = general();
        for &(u, w, lambda) in &[(0.1, 0.3, 0.1), (0.02, 0.01, 1e-3), (0.37, 0.0, 1e-4), (0.5, 0.5, 1e-2)] {
            let a = f_lambda(u, w, lambda, &p, FMethod::Reduced, 1e-8).unwrap();
            let b = f_lambda(u, w, lambda, &p, FMethod::Direct, 1e-6).unwrap();
            assert!((a.f1 - b.f1).abs() < 2e-6 * a.f1, "{u} {w} {lambda}: {a:?} {b:?}");
            assert!((a.f2 - b.f2).abs() < 2e-6 * a.f2, "{u} {w} {lambda}: {a:?} {b:?}");
        }
    }

    #[test]
    fn reflection_symmetry() {
        let p = general();
        let rel = 1e-4;
        for &(u, w) in &[(0.13, 0.42), (0.3, 0.9), (0.05, 0.6)] {
            let a = f_lambda(u, w, 1e-3, &p, FMethod::Direct, rel).unwrap();
            let b = f_lambda(1.0 - u, 1.0 - w, 1e-3, &p, FMethod::Direct, rel).unwrap();
            assert!((a.f1 - b.f1).abs() <= 2.0 * rel * a.f1);
            assert!((a.f2 - b.f2).abs() <= 2.0 * rel * a.f2);
        }
    }

    #[test]
    fn singular_corner_is_resolved() {
        let p = general();
        let f = f_lambda(0.0, 0.0, 1e-10, &p, FMethod::Reduced, 1e-8).unwrap();
        let g = f_lambda(0.0, 0.0, 1e-9, &p, FMethod::Reduced, 1e-8).unwrap();
        // Logarithmic growth: one decade of λ adds a bounded amount.
        let step = f.sum() - g.sum();
        assert!(step > 0.0 && step < 10.0, "{step}");
        assert!(f_lambda(0.1, 0.1, 0.0, &p, FMethod::Reduced, 1e-4).is_err());
    }

    #[test]
    fn fold_representative() {
        for (x, r) in [(0.3, 0.3), (0.7, 0.3), (-0.2, 0.2), (1.25, 0.25), (1.0, 0.0)] {
            assert!((fold(x) - r).abs() < 1e-15);
        }
    }
}
