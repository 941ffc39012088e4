use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;

use super::field::{f_lambda, FMethod};
use super::{gamma_half_angle, upsilon, SymbolParams};
use crate::error::FourierError;
use crate::model::Vec2;
use crate::quadrature::gauss_legendre_on;
use crate::rng::replica_rng;

/// A finitely supported real function on `Z²`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    values: BTreeMap<Vec2, f64>,
}

impl TestFunction {
    pub fn new(points: impl IntoIterator<Item = (Vec2, f64)>) -> Self {
        let mut values = BTreeMap::new();
        for (x, v) in points {
            *values.entry(x).or_insert(0.0) += v;
        }
        values.retain(|_, v| *v != 0.0);
        TestFunction { values }
    }

    pub fn delta(x: Vec2) -> Self {
        Self::new([(x, 1.0)])
    }

    /// Random values in `[-1, 1]` on `count` sites of the box `[-radius, radius]²`.
    pub fn random(seed: u64, count: usize, radius: i32) -> Self {
        let mut rng = replica_rng(seed, 0);
        Self::new((0..count).map(|_| {
            let x = Vec2::new(rng.random_range(-radius..=radius), rng.random_range(-radius..=radius));
            (x, rng.random_range(-1.0..1.0))
        }))
    }

    pub fn get(&self, x: Vec2) -> f64 {
        self.values.get(&x).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = (Vec2, f64)> + '_ {
        self.values.iter().map(|(&x, &v)| (x, v))
    }

    pub fn shifted(&self, by: Vec2) -> Self {
        Self::new(self.support().map(|(x, v)| (x + by, v)))
    }

    /// `φ̂(k) = Σ_x φ(x) e^{2πi x·k}`.
    pub fn transform(&self, k: [f64; 2]) -> Complex64 {
        self.support()
            .map(|(x, v)| Complex64::from_polar(v, 2.0 * PI * (x.x as f64 * k[0] + x.y as f64 * k[1])))
            .sum()
    }
}

fn phase(x: Vec2, y: Vec2, s: [f64; 4]) -> Complex64 {
    let arg = x.x as f64 * s[0] + x.y as f64 * s[1] + y.x as f64 * s[2] + y.y as f64 * s[3];
    Complex64::from_polar(1.0, 2.0 * PI * arg)
}

/// `G(x, y) = a(y − x)(φ(x) − φ(y))` on ordered nearest-neighbour pairs.
fn pair_function(phi: &TestFunction, p: &SymbolParams) -> Vec<(Vec2, Vec2, f64)> {
    let steps = [
        (Vec2::E1, p.a1),
        (-Vec2::E1, -p.a1),
        (Vec2::E2, p.a2),
        (-Vec2::E2, -p.a2),
    ];
    let mut sites: Vec<Vec2> = phi
        .support()
        .flat_map(|(x, _)| std::iter::once(x).chain(steps.iter().map(move |&(e, _)| x + e)))
        .collect();
    sites.sort();
    sites.dedup();
    let mut out = Vec::new();
    for &x in &sites {
        for &(e, a) in &steps {
            let g = a * (phi.get(x) - phi.get(x + e));
            if g != 0.0 {
                out.push((x, x + e, g));
            }
        }
    }
    out
}

/// Largest `|direct − closed form|` over an `n⁴` grid of `(s, t)`, where the
/// direct side sums `(1/√2) Σ e^{2πi(x·s + y·t)} G(x, y)` over the lattice
/// pair function and the closed form is
/// `(i/√2) φ̂(s+t) Σ_j 2a_j (sin 2πs_j + sin 2πt_j)`.
pub fn verify_a12_transform(phi: &TestFunction, p: &SymbolParams, n: usize) -> f64 {
    let g = pair_function(phi, p);
    let nodes: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
    let mut worst = 0.0f64;
    for &s1 in &nodes {
        for &s2 in &nodes {
            for &t1 in &nodes {
                for &t2 in &nodes {
                    let st = [s1, s2, t1, t2];
                    let direct: Complex64 = g.iter().map(|&(x, y, v)| phase(x, y, st) * v).sum::<Complex64>() / SQRT_2;
                    let bracket = 2.0 * p.a1 * ((2.0 * PI * s1).sin() + (2.0 * PI * t1).sin())
                        + 2.0 * p.a2 * ((2.0 * PI * s2).sin() + (2.0 * PI * t2).sin());
                    let closed = Complex64::i() / SQRT_2 * phi.transform([s1 + t1, s2 + t2]) * bracket;
                    worst = worst.max((direct - closed).norm());
                }
            }
        }
    }
    worst
}

/// The maximizer `½ / (λ + C₇(sin²πu + sin²πw)(1 + F¹ + F²))` of the
/// degree-one variational problem. `F` is computed by direct quadrature
/// at the given point, so reflections are not built in.
pub fn optimizer(u: f64, w: f64, lambda: f64, p: &SymbolParams, rel: f64) -> Result<f64, FourierError> {
    let f = f_lambda(u, w, lambda, p, FMethod::Direct, rel)?;
    let s = (PI * u).sin().powi(2) + (PI * w).sin().powi(2);
    Ok(0.5 / (lambda + p.c7() * s * (1.0 + f.sum())))
}

/// Monte Carlo over the diamond domain against tensor Gauss–Legendre on the
/// reduced unit cube.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiamondCheck {
    pub monte_carlo: f64,
    pub standard_error: f64,
    pub reduced: f64,
    pub samples: usize,
}

impl DiamondCheck {
    pub fn z_score(&self) -> f64 {
        (self.monte_carlo - self.reduced).abs() / self.standard_error
    }
}

/// Estimates `∫_{[0,1]⁴} (bracket)² / (λ + γ) |φ̂(s+t)|² ds dt` by sampling
/// `(s, t)` uniformly, which is uniform sampling of the diamond square
/// `D²` in `(u, v, w, z) = (s1+t1, s1−t1, s2+t2, s2−t2)`, and compares it
/// with `4 ∫_{[0,1]⁴} υ / (λ + γ) |φ̂(u, w)|²` by an `nodes⁴` product rule.
pub fn diamond_check(
    phi: &TestFunction,
    p: &SymbolParams,
    lambda: f64,
    samples: usize,
    nodes: usize,
    seed: u64,
) -> DiamondCheck {
    let mut rng = replica_rng(seed, 0);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let [s1, s2, t1, t2]: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
        let bracket = 2.0 * p.a1 * ((2.0 * PI * s1).sin() + (2.0 * PI * t1).sin())
            + 2.0 * p.a2 * ((2.0 * PI * s2).sin() + (2.0 * PI * t2).sin());
        let sym = 2.0 * p.b1 * ((PI * s1).sin().powi(2) + (PI * t1).sin().powi(2))
            + 2.0 * p.b2 * ((PI * s2).sin().powi(2) + (PI * t2).sin().powi(2));
        let h = bracket * bracket / (lambda + sym) * phi.transform([s1 + t1, s2 + t2]).norm_sqr();
        sum += h;
        sum2 += h * h;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0) * n / (n - 1.0);

    let (x, wts) = gauss_legendre_on(nodes, 0.0, 1.0);
    let mut reduced = 0.0;
    for (i, &u) in x.iter().enumerate() {
        for (j, &w) in x.iter().enumerate() {
            let weight_uw = wts[i] * wts[j] * phi.transform([u, w]).norm_sqr();
            let mut inner = 0.0;
            for (k, &v) in x.iter().enumerate() {
                for (l, &z) in x.iter().enumerate() {
                    inner += wts[k] * wts[l] * upsilon(u, v, w, z, p) / (lambda + gamma_half_angle(u, v, w, z, p));
                }
            }
            reduced += weight_uw * inner;
        }
    }
    DiamondCheck {
        monte_carlo: mean,
        standard_error: (var / n).sqrt(),
        reduced: 4.0 * reduced,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SymbolParams {
        SymbolParams::new(0.25, 0.125, 0.25, 0.125).unwrap()
    }

    #[test]
    fn delta_at_origin() {
        let p = SymbolParams::new(0.25, 0.25, 0.25, 0.0).unwrap();
        assert!(verify_a12_transform(&TestFunction::delta(Vec2::ZERO), &p, 8) < 1e-10);
    }

    #[test]
    fn shift_covariance() {
        let p = params();
        let phi = TestFunction::random(3, 5, 2);
        let a = verify_a12_transform(&phi, &p, 4);
        let b = verify_a12_transform(&phi.shifted(Vec2::new(3, -2)), &p, 4);
        assert!(a < 1e-10 && b < 1e-10);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn zero_antisymmetric_part_gives_zero() {
        let p = SymbolParams { a1: 0.0, a2: 0.0, ..params() };
        let phi = TestFunction::random(9, 4, 1);
        assert!(pair_function(&phi, &p).is_empty());
        assert_eq!(verify_a12_transform(&phi, &p, 3), 0.0);
    }

    #[test]
    fn one_orientation_alone_does_not_match() {
        // Keeping only the pairs y = x + e_i loses half of the closed form.
        let p = params();
        let phi = TestFunction::delta(Vec2::ZERO);
        let half: Vec<_> = pair_function(&phi, &p)
            .into_iter()
            .filter(|(x, y, _)| *y - *x == Vec2::E1 || *y - *x == Vec2::E2)
            .collect();
        let st = [0.1, 0.2, 0.3, 0.15];
        let direct: Complex64 = half.iter().map(|&(x, y, v)| phase(x, y, st) * v).sum::<Complex64>() / SQRT_2;
        let bracket = 2.0 * p.a1 * ((2.0 * PI * st[0]).sin() + (2.0 * PI * st[2]).sin())
            + 2.0 * p.a2 * ((2.0 * PI * st[1]).sin() + (2.0 * PI * st[3]).sin());
        let closed = Complex64::i() / SQRT_2 * phi.transform([st[0] + st[2], st[1] + st[3]]) * bracket;
        assert!((direct - closed).norm() > 1e-3);
    }

    #[test]
    fn optimizer_is_reflection_symmetric() {
        let p = params();
        for &(u, w) in &[(0.2, 0.35), (0.1, 0.8)] {
            let a = optimizer(u, w, 1e-2, &p, 1e-7).unwrap();
            let b = optimizer(1.0 - u, 1.0 - w, 1e-2, &p, 1e-7).unwrap();
            assert!((a - b).abs() < 1e-6 * a);
        }
    }

    #[test]
    fn diamond_reduction_agrees() {
        let phi = TestFunction::new([(Vec2::ZERO, 1.0), (Vec2::E1, 0.5), (Vec2::E2, -0.3), (Vec2::new(1, 1), 0.2)]);
        let c = diamond_check(&phi, &params(), 0.5, 200_000, 12, 17);
        assert!(c.z_score() < 3.0, "{c:?}");
        assert!(c.standard_error < 0.01 * c.reduced);
    }
}
