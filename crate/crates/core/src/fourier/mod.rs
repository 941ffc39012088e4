//! Fourier-space lower bounds for the resolvent of the second-class
//! particle: symbols, the `F¹, F²` fields, the optimized degree-one bound
//! integrals, and the divergence-rate fits.

mod bounds;
mod divergence;
mod field;
mod transform;

pub use bounds::{
    bound_curve, calibrate_c9, envelope_excess, log_grid, lower_bound_axis, lower_bound_general, standard_lambda_grid,
    BoundCurve, BoundValue, C9Calibration, OuterTolerance,
};
pub use divergence::{fit_divergence, DivergenceFit, DivergenceReport, GrowthModel};
pub use field::{f_lambda, FMethod, FValues};
pub use transform::{diamond_check, optimizer, verify_a12_transform, DiamondCheck, TestFunction};

use std::f64::consts::PI;

use crate::error::FourierError;
use crate::model::{comparison_kernel, JumpKernel};

/// Nearest-neighbour rates of a comparison kernel: `s(±e_i) = b_i`,
/// `a(±e_i) = ±a_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolParams {
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl SymbolParams {
    pub fn new(b1: f64, b2: f64, a1: f64, a2: f64) -> Result<Self, FourierError> {
        if !(b1 > 0.0 && b2 > 0.0 && b1.is_finite() && b2.is_finite()) {
            return Err(FourierError::InvalidParams(format!("b1 = {b1}, b2 = {b2} must be positive")));
        }
        if a1 == 0.0 || !a1.is_finite() || !a2.is_finite() {
            return Err(FourierError::InvalidParams(format!("a1 = {a1} must be nonzero, a2 = {a2} finite")));
        }
        Ok(SymbolParams { b1, b2, a1, a2 })
    }

    /// Parameters of the comparison kernel `p₀` built from the drift of
    /// `kernel`. When the drift points along `e2` only, the axes are
    /// relabelled so that `a1 ≠ 0`.
    pub fn from_kernel(kernel: &JumpKernel) -> Result<Self, FourierError> {
        let p0 = comparison_kernel(kernel).map_err(|e| FourierError::InvalidParams(e.to_string()))?;
        let k = if p0.axes_swapped { p0.kernel.axes_swapped() } else { p0.kernel };
        SymbolParams::new(k.b1(), k.b2(), k.a1(), k.a2())
    }

    /// `C₇ = 2(b1² + b2²) + 16(a1² + a2²)`.
    pub fn c7(&self) -> f64 {
        2.0 * (self.b1 * self.b1 + self.b2 * self.b2) + 16.0 * (self.a1 * self.a1 + self.a2 * self.a2)
    }

    /// `b̄ = 2 min{b1, b2}`.
    pub fn b_bar(&self) -> f64 {
        2.0 * self.b1.min(self.b2)
    }

    pub fn is_axis_case(&self) -> bool {
        self.a2 == 0.0
    }

    /// Roles of the two axes exchanged.
    pub fn swapped(&self) -> SymbolParams {
        SymbolParams {
            b1: self.b2,
            b2: self.b1,
            a1: self.a2,
            a2: self.a1,
        }
    }
}

fn sin2(x: f64) -> f64 {
    let s = x.sin();
    s * s
}

fn cos2(x: f64) -> f64 {
    let c = x.cos();
    c * c
}

/// `θ₂(u) = 2 Σ_z s(z) sin²(π u·z)` for the symmetric part of `kernel`.
pub fn theta2(u: [f64; 2], kernel: &JumpKernel) -> f64 {
    2.0 * kernel
        .symmetric_part()
        .iter()
        .map(|(z, s)| s.value() * sin2(PI * (u[0] * z.x as f64 + u[1] * z.y as f64)))
        .sum::<f64>()
}

/// `γ` as the sum of four half-angle squares.
pub fn gamma_half_angle(u: f64, v: f64, w: f64, z: f64, p: &SymbolParams) -> f64 {
    let h = PI / 2.0;
    2.0 * p.b1 * (sin2(h * (u + v)) + sin2(h * (u - v))) + 2.0 * p.b2 * (sin2(h * (w + z)) + sin2(h * (w - z)))
}

/// `γ` in the product form `4b sin²(πx/2) cos²(πy/2) + ...`.
pub fn gamma_product(u: f64, v: f64, w: f64, z: f64, p: &SymbolParams) -> f64 {
    let h = PI / 2.0;
    let pair = |x: f64, y: f64| sin2(h * x) * cos2(h * y) + sin2(h * y) * cos2(h * x);
    4.0 * p.b1 * pair(u, v) + 4.0 * p.b2 * pair(w, z)
}

/// `υ = (2a1 sin πu cos πv + 2a2 sin πw cos πz)²`, expanded.
pub fn upsilon(u: f64, v: f64, w: f64, z: f64, p: &SymbolParams) -> f64 {
    let x = (PI * u).sin() * (PI * v).cos();
    let y = (PI * w).sin() * (PI * z).cos();
    4.0 * p.a1 * p.a1 * x * x + 4.0 * p.a2 * p.a2 * y * y + 8.0 * p.a1 * p.a2 * x * y
}

/// The pointwise majorant `8a1² sin²πu cos²πv + 8a2² sin²πw cos²πz` of `υ`.
pub fn upsilon_majorant(u: f64, v: f64, w: f64, z: f64, p: &SymbolParams) -> f64 {
    8.0 * p.a1 * p.a1 * sin2(PI * u) * cos2(PI * v) + 8.0 * p.a2 * p.a2 * sin2(PI * w) * cos2(PI * z)
}

/// Tolerance used when comparing the two forms of `γ`.
pub const GAMMA_TOLERANCE: f64 = 1e-12;

/// Both forms of `γ` (returned is the half-angle one) and `υ`. Fails when
/// the forms disagree beyond [`GAMMA_TOLERANCE`]; panics if `υ` exceeds its
/// majorant, which cannot happen for real arguments.
pub fn gamma_upsilon(u: f64, v: f64, w: f64, z: f64, p: &SymbolParams) -> Result<(f64, f64), FourierError> {
    let g1 = gamma_half_angle(u, v, w, z, p);
    let g2 = gamma_product(u, v, w, z, p);
    let diff = (g1 - g2).abs();
    if diff > GAMMA_TOLERANCE {
        return Err(FourierError::RepresentationMismatch(diff));
    }
    let ups = upsilon(u, v, w, z, p);
    let major = upsilon_majorant(u, v, w, z, p);
    assert!(ups <= major + 1e-12 * (1.0 + major), "upsilon {ups} above majorant {major}");
    Ok((g1, ups))
}
