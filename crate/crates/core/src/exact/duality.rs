//! Coefficient-side operators in the orthonormal basis
//! `Ψ_B(η) = Π_{x∈B} (η_x − ρ)/√(ρ(1−ρ))`.
//!
//! A function `f = Σ_B 𝔣(B) Ψ_B` is stored as a sparse map from subset
//! bitmask to coefficient. The generator acts as
//! `𝔏 = 𝔖 + (1−2ρ)𝔄₀ + 2√(ρ(1−ρ)) (𝔄⁺ − 𝔄⁻)` with `𝔖` and `𝔄₀`
//! degree-preserving, `𝔄⁺` raising and `𝔄⁻` lowering the degree by one.
//! Each operator is applied in push form: every input subset `C` scatters
//! its coefficient to the subsets it reaches.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::state_space::{k_subsets, Ensemble, StateSpace};
use crate::error::ExactError;
use crate::model::{JumpKernel, TorusGeometry};

pub type Coeffs = BTreeMap<u64, f64>;

/// Default degree cap for coefficient maps.
pub const DEFAULT_DEGREE_CAP: usize = 3;

/// The four coefficient images of one input.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DualityParts {
    pub s: Coeffs,
    pub a0: Coeffs,
    pub a_plus: Coeffs,
    pub a_minus: Coeffs,
}

/// Pair rates `s(x,y)`, `a(x,y)` of a kernel on a torus, with the density
/// and degree cap of the basis.
#[derive(Clone, Debug)]
pub struct DualityBasis {
    geometry: TorusGeometry,
    rho: f64,
    degree_cap: usize,
    // neighbours[x] = (y, s(x→y), a(x→y)), y ≠ x
    neighbours: Vec<Vec<(usize, f64, f64)>>,
}

fn add(map: &mut Coeffs, key: u64, v: f64) {
    *map.entry(key).or_insert(0.0) += v;
}

impl DualityBasis {
    /// With `allow_wrap = false`, kernels whose vectors alias on the torus
    /// are rejected, so the coefficient operators coincide with the
    /// infinite-lattice ones. With `allow_wrap = true`, aliased vectors add
    /// their rates, matching the torus generator.
    pub fn new(
        geometry: &TorusGeometry,
        kernel: &JumpKernel,
        rho: f64,
        degree_cap: usize,
        allow_wrap: bool,
    ) -> Result<Self, ExactError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(ExactError::DegenerateDensity(rho));
        }
        let n = geometry.sites();
        if n > 64 {
            return Err(ExactError::TooManySites(n));
        }
        if !allow_wrap && geometry.aliases(kernel) {
            return Err(ExactError::WrapViolation);
        }
        let mut p = vec![BTreeMap::<usize, f64>::new(); n];
        for (x, row) in p.iter_mut().enumerate() {
            for &(z, rate) in kernel.rates() {
                let y = geometry.shift(x, z);
                if y != x {
                    *row.entry(y).or_insert(0.0) += rate.value();
                }
            }
        }
        let neighbours = (0..n)
            .map(|x| {
                let mut ys: Vec<usize> = p[x].keys().copied().collect();
                for (y, row) in p.iter().enumerate() {
                    if row.contains_key(&x) && !ys.contains(&y) {
                        ys.push(y);
                    }
                }
                ys.sort_unstable();
                ys.into_iter()
                    .map(|y| {
                        let fwd = p[x].get(&y).copied().unwrap_or(0.0);
                        let bwd = p[y].get(&x).copied().unwrap_or(0.0);
                        (y, 0.5 * (fwd + bwd), 0.5 * (fwd - bwd))
                    })
                    .collect()
            })
            .collect();
        Ok(DualityBasis {
            geometry: *geometry,
            rho,
            degree_cap,
            neighbours,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    fn sigma(&self) -> f64 {
        (self.rho * (1.0 - self.rho)).sqrt()
    }

    fn check_degree(&self, f: &Coeffs, headroom: usize) -> Result<(), ExactError> {
        let cap = self.degree_cap.saturating_sub(headroom);
        if let Some(d) = f.keys().map(|b| b.count_ones() as usize).max() {
            if d > cap {
                return Err(ExactError::DegreeCapExceeded {
                    degree: d,
                    cap: self.degree_cap,
                });
            }
        }
        Ok(())
    }

    /// `(𝔖𝔣, 𝔄₀𝔣, 𝔄⁺𝔣, 𝔄⁻𝔣)`. The input degree must leave room for
    /// `𝔄⁺` under the cap.
    pub fn apply(&self, f: &Coeffs) -> Result<DualityParts, ExactError> {
        self.check_degree(f, 1)?;
        let mut out = DualityParts::default();
        for (&c, &v) in f {
            if v == 0.0 {
                continue;
            }
            let mut a0_diag = 0.0;
            for x in (0..self.geometry.sites()).filter(|x| c >> x & 1 == 1) {
                let mut lower = 0.0;
                for &(y, s, a) in &self.neighbours[x] {
                    if c >> y & 1 == 1 {
                        continue;
                    }
                    let moved = c & !(1u64 << x) | (1u64 << y);
                    if s != 0.0 {
                        add(&mut out.s, moved, s * v);
                        add(&mut out.s, c, -s * v);
                    }
                    if a != 0.0 {
                        a0_diag -= a * v;
                        // The reversed pair y → x moves an element of C from x to y.
                        add(&mut out.a0, moved, -a * v);
                        add(&mut out.a_plus, c | (1u64 << y), a * v);
                        lower += a;
                    }
                }
                if lower != 0.0 {
                    add(&mut out.a_minus, c & !(1u64 << x), lower * v);
                }
            }
            if a0_diag != 0.0 {
                add(&mut out.a0, c, a0_diag);
            }
        }
        Ok(out)
    }

    /// `𝔏𝔣 = 𝔖𝔣 + (1−2ρ)𝔄₀𝔣 + 2√(ρ(1−ρ))(𝔄⁺𝔣 − 𝔄⁻𝔣)`.
    pub fn generator(&self, f: &Coeffs) -> Result<Coeffs, ExactError> {
        let parts = self.apply(f)?;
        Ok(self.combine(&parts))
    }

    pub fn combine(&self, parts: &DualityParts) -> Coeffs {
        let mut out = parts.s.clone();
        let c0 = 1.0 - 2.0 * self.rho;
        let c1 = 2.0 * self.sigma();
        for (&b, &v) in &parts.a0 {
            add(&mut out, b, c0 * v);
        }
        for (&b, &v) in &parts.a_plus {
            add(&mut out, b, c1 * v);
        }
        for (&b, &v) in &parts.a_minus {
            add(&mut out, b, -c1 * v);
        }
        out
    }

    /// `Ψ_B(η)`.
    pub fn psi(&self, b: u64, state: u64) -> f64 {
        let up = (1.0 - self.rho) / self.sigma();
        let down = -self.rho / self.sigma();
        let ones = (b & state).count_ones() as i32;
        let zeros = (b & !state).count_ones() as i32;
        up.powi(ones) * down.powi(zeros)
    }

    /// `Σ_B 𝔣(B) Ψ_B` tabulated on a state space.
    pub fn synthesize(&self, f: &Coeffs, space: &StateSpace) -> Vec<f64> {
        space.tabulate(|state| f.iter().map(|(&b, &v)| v * self.psi(b, state)).sum())
    }

    /// Coefficients `𝔣(B) = ⟨f, Ψ_B⟩` of a function on the product space at
    /// the basis density, over all subsets of degree at most `max_degree`.
    pub fn expand(&self, f: &[f64], space: &StateSpace, max_degree: usize) -> Result<Coeffs, ExactError> {
        self.require_product(space)?;
        space.check_len(f)?;
        let n = self.geometry.sites();
        let mut out = Coeffs::new();
        for d in 0..=max_degree.min(n) {
            for b in k_subsets(n, d) {
                let psi = space.tabulate(|s| self.psi(b, s));
                let c = space.inner(f, &psi);
                if c.abs() > 1e-15 {
                    out.insert(b, c);
                }
            }
        }
        Ok(out)
    }

    fn require_product(&self, space: &StateSpace) -> Result<(), ExactError> {
        match space.ensemble() {
            Ensemble::Product(r) if (r - self.rho).abs() < 1e-15 => Ok(()),
            _ => Err(ExactError::NeedsProductEnsemble),
        }
    }

    /// Gram matrix `⟨Ψ_B, Ψ_C⟩` over all subsets of degree at most
    /// `max_degree`, by exact enumeration of the product space.
    pub fn gram(&self, space: &StateSpace, max_degree: usize) -> Result<DMatrix<f64>, ExactError> {
        self.require_product(space)?;
        let n = self.geometry.sites();
        let subsets: Vec<u64> = (0..=max_degree.min(n)).flat_map(|d| k_subsets(n, d)).collect();
        let tables: Vec<Vec<f64>> = subsets
            .iter()
            .map(|&b| space.tabulate(|s| self.psi(b, s)))
            .collect();
        let m = subsets.len();
        Ok(DMatrix::from_fn(m, m, |i, j| space.inner(&tables[i], &tables[j])))
    }

    /// `⟨𝔣, (λ − 𝔖)⁻¹ 𝔣⟩` for `𝔣` supported on subsets of one degree `d`;
    /// `𝔖` preserves degree, so the solve runs on the `C(N, d)` subsets.
    pub fn h_minus1_coefficients(&self, f: &Coeffs, lambda: f64) -> Result<f64, ExactError> {
        if !(lambda > 0.0) {
            return Err(ExactError::NonPositiveLambda(lambda));
        }
        let Some(d) = f.keys().next().map(|b| b.count_ones() as usize) else {
            return Ok(0.0);
        };
        if f.keys().any(|b| b.count_ones() as usize != d) {
            return Err(ExactError::DegreeCapExceeded { degree: d + 1, cap: d });
        }
        let subsets = k_subsets(self.geometry.sites(), d);
        let index: BTreeMap<u64, usize> = subsets.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let m = subsets.len();
        let mut mat = DMatrix::<f64>::identity(m, m) * lambda;
        for (col, &b) in subsets.iter().enumerate() {
            let mut unit = Coeffs::new();
            unit.insert(b, 1.0);
            for (key, v) in self.apply_symmetric(&unit) {
                mat[(index[&key], col)] -= v;
            }
        }
        let rhs = DVector::from_iterator(m, subsets.iter().map(|b| f.get(b).copied().unwrap_or(0.0)));
        let x = mat
            .lu()
            .solve(&rhs)
            .ok_or(ExactError::SolverFailure { residual: f64::INFINITY, iterations: 0 })?;
        Ok(rhs.dot(&x))
    }

    fn apply_symmetric(&self, f: &Coeffs) -> Coeffs {
        let mut out = Coeffs::new();
        for (&c, &v) in f {
            for x in (0..self.geometry.sites()).filter(|x| c >> x & 1 == 1) {
                for &(y, s, _) in &self.neighbours[x] {
                    if s != 0.0 && c >> y & 1 == 0 {
                        add(&mut out, c & !(1u64 << x) | (1u64 << y), s * v);
                        add(&mut out, c, -s * v);
                    }
                }
            }
        }
        out
    }
}

/// `max |L f − Σ_B (𝔏𝔣)(B) Ψ_B|` over the states of `space`, where
/// `f = Σ 𝔣(B)Ψ_B` and `generator` is the configuration-side matrix on the
/// same space.
pub fn verify_duality_reconstruction(
    basis: &DualityBasis,
    generator: &super::linalg::Csr,
    space: &StateSpace,
    f: &Coeffs,
) -> Result<f64, ExactError> {
    let values = basis.synthesize(f, space);
    let lf = generator.matvec(&values);
    let coeff_side = basis.synthesize(&basis.generator(f)?, space);
    Ok(lf
        .iter()
        .zip(&coeff_side)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

/// `max |⟨Ψ_C, A Ψ_B⟩|` over pairs of equal degree `|B| = |C| ≤ max_degree`
/// on the product space: the degree-preserving block of the antisymmetric
/// part.
pub fn degree_preserving_antisymmetric_block(
    basis: &DualityBasis,
    a: &super::linalg::Csr,
    space: &StateSpace,
    max_degree: usize,
) -> Result<f64, ExactError> {
    basis.require_product(space)?;
    let n = space.geometry().sites();
    let mut worst = 0.0f64;
    for d in 0..=max_degree.min(n) {
        let subsets = k_subsets(n, d);
        let tables: Vec<Vec<f64>> = subsets
            .iter()
            .map(|&b| space.tabulate(|s| basis.psi(b, s)))
            .collect();
        let images: Vec<Vec<f64>> = tables.iter().map(|t| a.matvec(t)).collect();
        for t in &tables {
            for img in &images {
                worst = worst.max(space.inner(t, img).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::operators::build_operators;
    use crate::exact::state_space::DEFAULT_STATE_CAP;
    use crate::model::Rate;
    use rand::Rng;

    fn drift() -> JumpKernel {
        JumpKernel::nearest_neighbor(Rate::ratio(3, 4), Rate::ratio(1, 4), Rate::ratio(1, 2), Rate::ratio(1, 4)).unwrap()
    }

    fn single(b: u64) -> Coeffs {
        Coeffs::from([(b, 1.0)])
    }

    #[test]
    fn psi_is_orthonormal() {
        let g = TorusGeometry::new(3, 2).unwrap();
        for rho in [0.5, 0.3] {
            let space = StateSpace::new(&g, Ensemble::Product(rho), DEFAULT_STATE_CAP).unwrap();
            let basis = DualityBasis::new(&g, &drift(), rho, 3, true).unwrap();
            let gram = basis.gram(&space, 6).unwrap();
            let id = DMatrix::<f64>::identity(gram.nrows(), gram.ncols());
            assert!((gram - id).amax() < 1e-12);
        }
    }

    #[test]
    fn singleton_symmetric_part_is_walk_laplacian() {
        let g = TorusGeometry::new(5, 5).unwrap();
        let basis = DualityBasis::new(&g, &JumpKernel::symmetric_nn(), 0.3, 3, false).unwrap();
        let parts = basis.apply(&single(1)).unwrap();
        assert!((parts.s[&1] + 1.0).abs() < 1e-15);
        for z in [crate::Vec2::E1, -crate::Vec2::E1, crate::Vec2::E2, -crate::Vec2::E2] {
            let y = g.index(z);
            assert!((parts.s[&(1u64 << y)] - 0.25).abs() < 1e-15);
        }
        assert!(parts.a0.is_empty() && parts.a_plus.is_empty() && parts.a_minus.is_empty());
    }

    #[test]
    fn empty_set_is_annihilated() {
        let g = TorusGeometry::new(5, 5).unwrap();
        let basis = DualityBasis::new(&g, &drift(), 0.4, 3, false).unwrap();
        let parts = basis.apply(&single(0)).unwrap();
        assert_eq!(parts, DualityParts::default());
    }

    #[test]
    fn grading() {
        let g = TorusGeometry::new(5, 5).unwrap();
        let basis = DualityBasis::new(&g, &drift(), 0.4, 3, false).unwrap();
        let f = Coeffs::from([(0b11, 0.7), (1 << 7 | 1 << 12, -1.1), (1 << 3, 0.4)]);
        let parts = basis.apply(&f).unwrap();
        let deg = |m: &Coeffs| m.keys().map(|b| b.count_ones()).collect::<std::collections::BTreeSet<_>>();
        assert!(deg(&parts.s).is_subset(&[1, 2].into()));
        assert!(deg(&parts.a0).is_subset(&[1, 2].into()));
        assert_eq!(deg(&parts.a_plus), [2, 3].into());
        // Singletons lose their degree-0 image: Σ_y a(x→y) = 0.
        assert_eq!(deg(&parts.a_minus), [1].into());
    }

    #[test]
    fn caps_and_wrap() {
        let g = TorusGeometry::new(3, 2).unwrap();
        assert_eq!(
            DualityBasis::new(&g, &drift(), 0.5, 3, false).unwrap_err(),
            ExactError::WrapViolation
        );
        let g = TorusGeometry::new(5, 5).unwrap();
        let basis = DualityBasis::new(&g, &drift(), 0.5, 3, false).unwrap();
        assert!(matches!(
            basis.apply(&single(0b111)),
            Err(ExactError::DegreeCapExceeded { degree: 3, cap: 3 })
        ));
    }

    #[test]
    fn reconstruction_on_product_space() {
        let g = TorusGeometry::new(3, 3).unwrap();
        let mut rng = crate::rng::replica_rng(8, 0);
        for rho in [0.5, 0.3] {
            let ops = build_operators(&g, &drift(), Ensemble::Product(rho), DEFAULT_STATE_CAP).unwrap();
            let basis = DualityBasis::new(&g, &drift(), rho, 3, true).unwrap();
            let mut f = Coeffs::new();
            for d in 0..=2 {
                for b in k_subsets(9, d) {
                    f.insert(b, rng.random::<f64>() - 0.5);
                }
            }
            let r = verify_duality_reconstruction(&basis, &ops.l, &ops.space, &f).unwrap();
            assert!(r < 1e-12, "rho {rho}: {r}");
        }
    }

    #[test]
    fn constants_are_invariant() {
        let g = TorusGeometry::new(3, 3).unwrap();
        let basis = DualityBasis::new(&g, &drift(), 0.3, 3, true).unwrap();
        let out = basis.generator(&Coeffs::from([(0, 2.5)])).unwrap();
        assert!(out.values().all(|v| *v == 0.0));
    }

    #[test]
    fn expansion_round_trip() {
        let g = TorusGeometry::new(3, 2).unwrap();
        let space = StateSpace::new(&g, Ensemble::Product(0.3), DEFAULT_STATE_CAP).unwrap();
        let basis = DualityBasis::new(&g, &drift(), 0.3, 3, true).unwrap();
        let f = Coeffs::from([(0b1, 0.3), (0b101, -2.0), (0, 1.0)]);
        let back = basis.expand(&basis.synthesize(&f, &space), &space, 6).unwrap();
        for (b, v) in &f {
            assert!((back[b] - v).abs() < 1e-13);
        }
        assert_eq!(back.len(), f.len());
    }

    #[test]
    fn half_density_kills_degree_preserving_part() {
        let g = TorusGeometry::new(3, 2).unwrap();
        let ops = build_operators(&g, &drift(), Ensemble::Product(0.5), DEFAULT_STATE_CAP).unwrap();
        let basis = DualityBasis::new(&g, &drift(), 0.5, 3, true).unwrap();
        let block = degree_preserving_antisymmetric_block(&basis, &ops.a, &ops.space, 6).unwrap();
        assert!(block < 1e-14);
        let off = DualityBasis::new(&g, &drift(), 0.3, 3, true).unwrap();
        let ops3 = build_operators(&g, &drift(), Ensemble::Product(0.3), DEFAULT_STATE_CAP).unwrap();
        assert!(degree_preserving_antisymmetric_block(&off, &ops3.a, &ops3.space, 6).unwrap() > 1e-3);
    }

    #[test]
    fn h_minus1_duality_pairing() {
        let g = TorusGeometry::new(3, 3).unwrap();
        let rho = 0.3;
        let ops = build_operators(&g, &drift(), Ensemble::Product(rho), DEFAULT_STATE_CAP).unwrap();
        let basis = DualityBasis::new(&g, &drift(), rho, 3, true).unwrap();
        let f = Coeffs::from([(1 << 0, 1.0), (1 << 4, -0.5), (1 << 7, 0.25)]);
        let values = basis.synthesize(&f, &ops.space);
        for lambda in [0.05, 1.0] {
            let (_, config) = crate::exact::operators::h_norms(&ops, &values, lambda).unwrap();
            let coeff = basis.h_minus1_coefficients(&f, lambda).unwrap();
            assert!((config - coeff).abs() < 1e-10, "{config} {coeff}");
        }
    }
}
