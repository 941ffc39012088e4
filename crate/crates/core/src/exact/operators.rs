use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::linalg::{bicgstab, conjugate_gradient, dense_solve, Csr, Solve};
use super::state_space::{Ensemble, StateSpace};
use crate::error::ExactError;
use crate::model::{JumpKernel, TorusGeometry};
use crate::quadrature::{integrate_breaks, Tolerance};

/// Largest space solved with dense LU.
pub const DENSE_LIMIT: usize = 2_000;
const KRYLOV_TOL: f64 = 1e-13;

/// Generator `L`, its adjoint `L*` in the stationary inner product, and the
/// parts `S = (L + L*)/2`, `A = (L − L*)/2`.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub space: StateSpace,
    pub l: Csr,
    pub l_adj: Csr,
    pub s: Csr,
    pub a: Csr,
}

/// Builds the exclusion generator on an enumerated state space. Kernel
/// vectors that alias on the torus contribute to the same exchange.
pub fn build_operators(
    geometry: &TorusGeometry,
    kernel: &JumpKernel,
    ensemble: Ensemble,
    cap: usize,
) -> Result<OperatorSet, ExactError> {
    let space = StateSpace::new(geometry, ensemble, cap)?;
    let n = geometry.sites();
    let mut triplets = Vec::new();
    for (row, &state) in space.states().iter().enumerate() {
        for i in 0..n {
            if (state >> i) & 1 == 0 {
                continue;
            }
            for &(z, rate) in kernel.rates() {
                let j = geometry.shift(i, z);
                if j == i || (state >> j) & 1 == 1 {
                    continue;
                }
                let target = state & !(1u64 << i) | (1u64 << j);
                let col = space.index_of(target).expect("exchange preserves the space");
                let p = rate.value();
                triplets.push((row, col, p));
                triplets.push((row, row, -p));
            }
        }
    }
    let l = Csr::from_triplets(space.len(), triplets);
    let w = space.weights();
    let l_adj = Csr::from_triplets(
        space.len(),
        l.triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v * (w[r] / w[c])))
            .collect(),
    );
    let s = l.combine(0.5, &l_adj, 0.5);
    let a = l.combine(0.5, &l_adj, -0.5);
    Ok(OperatorSet { space, l, l_adj, s, a })
}

/// Structural checks of an [`OperatorSet`], as maximal deviations.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureReport {
    /// `max |Σ_j L_ij|`.
    pub row_sum: f64,
    /// `max |⟨g, S h⟩ − ⟨S g, h⟩|` over basis vectors.
    pub s_self_adjoint: f64,
    /// `max |⟨g, A h⟩ + ⟨A g, h⟩|` over basis vectors.
    pub a_antisymmetric: f64,
    /// Largest eigenvalue of the symmetrized `S` (should be ≤ 0).
    pub s_max_eigenvalue: f64,
}

impl OperatorSet {
    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// `Π^{1/2} M Π^{−1/2}`: turns π-self-adjointness into matrix symmetry.
    fn weighted_dense(&self, m: &Csr) -> DMatrix<f64> {
        let w = self.space.weights();
        let mut d = m.to_dense();
        for r in 0..d.nrows() {
            for c in 0..d.ncols() {
                d[(r, c)] *= (w[r] / w[c]).sqrt();
            }
        }
        d
    }

    pub fn structure(&self) -> StructureReport {
        let row_sum = (0..self.len())
            .map(|r| self.l.row(r).map(|(_, v)| v).sum::<f64>().abs())
            .fold(0.0, f64::max);
        let s = self.weighted_dense(&self.s);
        let a = self.weighted_dense(&self.a);
        let s_self_adjoint = (&s - s.transpose()).amax();
        let a_antisymmetric = (&a + a.transpose()).amax();
        let sym = (&s + s.transpose()) * 0.5;
        let s_max_eigenvalue = SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        StructureReport {
            row_sum,
            s_self_adjoint,
            a_antisymmetric,
            s_max_eigenvalue,
        }
    }

    fn solve(&self, m: &Csr, b: &[f64], symmetric: bool) -> Result<Solve, ExactError> {
        if self.len() <= DENSE_LIMIT {
            let sol = dense_solve(m, b)?;
            if !(sol.residual < 1e-8) {
                return Err(ExactError::SolverFailure {
                    residual: sol.residual,
                    iterations: 1,
                });
            }
            Ok(sol)
        } else if symmetric {
            conjugate_gradient(m, b, KRYLOV_TOL, 20 * self.len())
        } else {
            bicgstab(m, b, KRYLOV_TOL, 20 * self.len())
        }
    }

    /// Solves `(λ − L) x = f`.
    pub fn solve_resolvent(&self, f: &[f64], lambda: f64) -> Result<Solve, ExactError> {
        check_lambda(lambda)?;
        self.space.check_len(f)?;
        self.solve(&self.l.shifted_negative(lambda), f, false)
    }

    /// Solves `(λ − S) x = f`.
    pub fn solve_symmetric(&self, f: &[f64], lambda: f64) -> Result<Solve, ExactError> {
        check_lambda(lambda)?;
        self.space.check_len(f)?;
        let symmetric_matrix = matches!(self.space.ensemble(), Ensemble::Sector(_) | Ensemble::Product(_));
        self.solve(&self.s.shifted_negative(lambda), f, symmetric_matrix)
    }

    fn check_mean_zero(&self, f: &[f64]) -> Result<(), ExactError> {
        let m = self.space.mean(f);
        let scale = self.space.inner(f, f).sqrt().max(1.0);
        if m.abs() > 1e-10 * scale {
            return Err(ExactError::NotMeanZero(m));
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<(), ExactError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ExactError::NonPositiveLambda(lambda));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolventValues {
    /// `⟨f, (λ − L)⁻¹ f⟩`.
    pub full: f64,
    /// `⟨f, (λ − S)⁻¹ f⟩`.
    pub symmetric: f64,
    pub residual_full: f64,
    pub residual_symmetric: f64,
}

/// `⟨f,(λ−L)⁻¹f⟩` and `⟨f,(λ−S)⁻¹f⟩` for a mean-zero `f`.
pub fn resolvent_form(ops: &OperatorSet, f: &[f64], lambda: f64) -> Result<ResolventValues, ExactError> {
    ops.space.check_len(f)?;
    ops.check_mean_zero(f)?;
    let full = ops.solve_resolvent(f, lambda)?;
    let sym = ops.solve_symmetric(f, lambda)?;
    Ok(ResolventValues {
        full: ops.space.inner(f, &full.x),
        symmetric: ops.space.inner(f, &sym.x),
        residual_full: full.residual,
        residual_symmetric: sym.residual,
    })
}

/// Outcome of the variational-identity check.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalReport {
    /// `max |sym((λ−L)⁻¹) · K − I|` with `K = (λ−S) + A*(λ−S)⁻¹A`.
    pub factorization_residual: f64,
    /// `⟨f,(λ−L)⁻¹f⟩`.
    pub resolvent: f64,
    /// Variational functional `2⟨f,φ⟩ − ⟨φ,(λ−S)φ⟩ − ⟨Aφ,(λ−S)⁻¹Aφ⟩` at its
    /// maximizer `φ = K⁻¹ f`.
    pub supremum: f64,
    /// The same functional at perturbed trial functions never exceeds the
    /// supremum; this is the largest excess found (should be ≤ 0).
    pub trial_excess: f64,
}

/// Checks that `sym((λ−L)⁻¹)` and `(λ−S) + A*(λ−S)⁻¹A` are mutually inverse
/// and that the variational supremum reproduces `⟨f,(λ−L)⁻¹f⟩`. Works in
/// the weighted frame `Π^{1/2}·Π^{−1/2}` where adjoints are transposes.
pub fn verify_variational_identity(
    ops: &OperatorSet,
    f: &[f64],
    lambda: f64,
) -> Result<VariationalReport, ExactError> {
    check_lambda(lambda)?;
    ops.space.check_len(f)?;
    let n = ops.len();
    if n > DENSE_LIMIT {
        return Err(ExactError::StateSpaceTooLarge { size: n, cap: DENSE_LIMIT });
    }
    let failure = || ExactError::SolverFailure { residual: f64::INFINITY, iterations: 0 };
    let id = DMatrix::<f64>::identity(n, n);
    let l = ops.weighted_dense(&ops.l);
    let s = ops.weighted_dense(&ops.s);
    let a = ops.weighted_dense(&ops.a);
    let m = &id * lambda - &l;
    let b = &id * lambda - &s;
    let m_inv = m.clone().try_inverse().ok_or_else(failure)?;
    let b_inv = b.clone().try_inverse().ok_or_else(failure)?;
    let sym_inv = (&m_inv + m_inv.transpose()) * 0.5;
    let k = &b + a.transpose() * &b_inv * &a;
    let factorization_residual = (&sym_inv * &k - &id).amax();

    let sqrt_w: Vec<f64> = ops.space.weights().iter().map(|w| w.sqrt()).collect();
    let fw = DVector::from_iterator(n, f.iter().zip(&sqrt_w).map(|(v, s)| v * s));
    let resolvent = fw.dot(&(&m_inv * &fw));
    let functional = |phi: &DVector<f64>| {
        let aphi = &a * phi;
        2.0 * fw.dot(phi) - phi.dot(&(&b * phi)) - aphi.dot(&(&b_inv * &aphi))
    };
    let phi = k.clone().lu().solve(&fw).ok_or_else(failure)?;
    let supremum = functional(&phi);
    let mut trial_excess = f64::NEG_INFINITY;
    for j in 0..n.min(16) {
        for eps in [1e-3, -1e-2] {
            let mut trial = phi.clone();
            trial[j] += eps;
            trial_excess = trial_excess.max(functional(&trial) - supremum);
        }
    }
    Ok(VariationalReport {
        factorization_residual,
        resolvent,
        supremum,
        trial_excess,
    })
}

/// `(‖g‖²_{1,λ}, ‖g‖²_{−1,λ}) = (⟨g,(λ−S)g⟩, ⟨g,(λ−S)⁻¹g⟩)`.
pub fn h_norms(ops: &OperatorSet, g: &[f64], lambda: f64) -> Result<(f64, f64), ExactError> {
    ops.space.check_len(g)?;
    check_lambda(lambda)?;
    let sg = ops.s.matvec(g);
    let h1 = lambda * ops.space.inner(g, g) - ops.space.inner(g, &sg);
    let sol = ops.solve_symmetric(g, lambda)?;
    Ok((h1, ops.space.inner(g, &sol.x)))
}

/// `σ²_t = 2 ∫₀ᵗ (t−s) ⟨f, e^{sL} f⟩ ds` for a symmetric generator by
/// eigendecomposition: `2 Σ_k |⟨f,v_k⟩|² (t/μ_k + (e^{−μ_k t} − 1)/μ_k²)`
/// with `−μ_k` the eigenvalues of `L`.
pub fn sigma2_spectral(ops: &OperatorSet, f: &[f64], t: f64) -> Result<f64, ExactError> {
    ops.space.check_len(f)?;
    let l = ops.weighted_dense(&ops.l);
    if (&l - l.transpose()).amax() > 1e-12 {
        return Err(ExactError::NotSymmetric);
    }
    let eig = SymmetricEigen::new((&l + l.transpose()) * 0.5);
    let n = ops.len();
    let fw = DVector::from_iterator(n, f.iter().zip(ops.space.weights()).map(|(v, w)| v * w.sqrt()));
    let mut total = 0.0;
    for k in 0..n {
        let c = eig.eigenvectors.column(k).dot(&fw).powi(2);
        let mu = -eig.eigenvalues[k];
        total += if mu.abs() < 1e-12 {
            c * t * t
        } else {
            2.0 * c * (t / mu + ((-mu * t).exp() - 1.0) / (mu * mu))
        };
    }
    Ok(total)
}

/// `σ²_t` for a general generator from the block exponential
/// `exp(t [[L, I, 0], [0, 0, I], [0, 0, 0]])`, whose upper right block is
/// `∫₀ᵗ (t−s) e^{sL} ds`.
pub fn sigma2_block_exponential(ops: &OperatorSet, f: &[f64], t: f64) -> Result<f64, ExactError> {
    ops.space.check_len(f)?;
    let n = ops.len();
    if n > DENSE_LIMIT / 4 {
        return Err(ExactError::StateSpaceTooLarge { size: n, cap: DENSE_LIMIT / 4 });
    }
    let l = ops.l.to_dense();
    let mut big = DMatrix::<f64>::zeros(3 * n, 3 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(l * t));
    for i in 0..n {
        big[(i, n + i)] = t;
        big[(n + i, 2 * n + i)] = t;
    }
    let e = big.exp();
    let g = e.view((0, 2 * n), (n, n)).into_owned();
    let gf = g * DVector::from_column_slice(f);
    Ok(2.0 * ops.space.inner(f, gf.as_slice()))
}

/// Autocorrelation `⟨f, e^{sL} f⟩` by a dense matrix exponential.
pub fn autocorrelation(ops: &OperatorSet, f: &[f64], s: f64) -> f64 {
    let e = (ops.l.to_dense() * s).exp();
    let ef = e * DVector::from_column_slice(f);
    ops.space.inner(f, ef.as_slice())
}

/// `σ²_t` straight from its definition: adaptive quadrature of
/// `2 (t−s) ⟨f, e^{sL} f⟩` over `[0, t]`.
pub fn sigma2_quadrature(ops: &OperatorSet, f: &[f64], t: f64) -> Result<f64, ExactError> {
    ops.space.check_len(f)?;
    let r = integrate_breaks(
        |s| 2.0 * (t - s) * autocorrelation(ops, f, s),
        &[0.0, t],
        Tolerance::new(1e-13, 1e-12),
    );
    Ok(r.value)
}

/// Generator of one walker with jump law `p` on the torus sites.
pub fn walker_generator(geometry: &TorusGeometry, kernel: &JumpKernel) -> DMatrix<f64> {
    let n = geometry.sites();
    let mut w = DMatrix::zeros(n, n);
    for x in 0..n {
        for &(z, rate) in kernel.rates() {
            let y = geometry.shift(x, z);
            w[(x, y)] += rate.value();
            w[(x, x)] -= rate.value();
        }
    }
    w
}

/// `P(walker at origin at time t | started at origin)` from `exp(tW)`.
pub fn walker_return_probability(geometry: &TorusGeometry, kernel: &JumpKernel, t: f64) -> f64 {
    (walker_generator(geometry, kernel) * t).exp()[(0, 0)]
}

/// `⟨δ₀, (λ − W)⁻¹ δ₀⟩` by a direct solve.
pub fn walker_resolvent(geometry: &TorusGeometry, kernel: &JumpKernel, lambda: f64) -> Result<f64, ExactError> {
    check_lambda(lambda)?;
    let n = geometry.sites();
    let m = DMatrix::<f64>::identity(n, n) * lambda - walker_generator(geometry, kernel);
    let mut e0 = DVector::zeros(n);
    e0[0] = 1.0;
    let x = m
        .lu()
        .solve(&e0)
        .ok_or(ExactError::SolverFailure { residual: f64::INFINITY, iterations: 0 })?;
    Ok(x[0])
}

/// Return probability of the walker on the torus by the Fourier sum
/// `N⁻¹ Σ_k Re exp(t Σ_z p(z)(e^{2πi k·z/L} − 1))`, usable on large tori.
pub fn walker_return_probability_fourier(geometry: &TorusGeometry, kernel: &JumpKernel, t: f64) -> f64 {
    let (l1, l2) = geometry.sides();
    let mut total = 0.0;
    for k1 in 0..l1 {
        for k2 in 0..l2 {
            let (mut re, mut im) = (0.0, 0.0);
            for &(z, rate) in kernel.rates() {
                let angle = std::f64::consts::TAU
                    * (k1 as f64 * z.x as f64 / l1 as f64 + k2 as f64 * z.y as f64 / l2 as f64);
                re += rate.value() * (angle.cos() - 1.0);
                im += rate.value() * angle.sin();
            }
            total += (t * re).exp() * (t * im).cos();
        }
    }
    total / geometry.sites() as f64
}

/// Residual table of the operator identity checks, as text.
pub fn identity_report(rows: &[(String, f64, f64)]) -> String {
    let mut out = String::from("check,residual,tolerance,status\n");
    for (name, residual, tol) in rows {
        let status = if residual <= tol { "ok" } else { "FAIL" };
        out.push_str(&format!("{name},{residual:.3e},{tol:.1e},{status}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::state_space::DEFAULT_STATE_CAP;
    use crate::model::Rate;

    fn drift() -> JumpKernel {
        JumpKernel::nearest_neighbor(Rate::ratio(3, 4), Rate::ratio(1, 4), Rate::ratio(1, 2), Rate::ratio(1, 4)).unwrap()
    }

    fn small(kernel: &JumpKernel) -> OperatorSet {
        let g = TorusGeometry::new(3, 2).unwrap();
        build_operators(&g, kernel, Ensemble::Sector(3), DEFAULT_STATE_CAP).unwrap()
    }

    #[test]
    fn symmetric_kernel_has_zero_antisymmetric_part() {
        let ops = small(&JumpKernel::symmetric_nn());
        assert_eq!(ops.a.nnz(), 0);
    }

    #[test]
    fn generator_structure() {
        for k in [JumpKernel::symmetric_nn(), drift()] {
            let ops = small(&k);
            let rep = ops.structure();
            assert!(rep.row_sum < 1e-14);
            assert!(rep.s_self_adjoint < 1e-13);
            assert!(rep.a_antisymmetric < 1e-13);
            assert!(rep.s_max_eigenvalue < 1e-12);
        }
    }

    #[test]
    fn resolvent_limits_and_bound() {
        let ops = small(&drift());
        let f = ops.space.centered_occupation(0);
        let big = resolvent_form(&ops, &f, 1e6).unwrap();
        let ff = ops.space.inner(&f, &f);
        assert!((1e6 * big.full - ff).abs() < 1e-4 * ff);
        let v = resolvent_form(&ops, &f, 0.1).unwrap();
        assert!(v.full <= v.symmetric + 1e-12);
        let sym = small(&JumpKernel::symmetric_nn());
        let v = resolvent_form(&sym, &f, 0.1).unwrap();
        assert!((v.full - v.symmetric).abs() < 1e-12);
    }

    #[test]
    fn mean_nonzero_is_rejected() {
        let ops = small(&drift());
        let f = vec![1.0; ops.len()];
        assert!(matches!(resolvent_form(&ops, &f, 1.0), Err(ExactError::NotMeanZero(_))));
        assert!(matches!(resolvent_form(&ops, &[0.0], 1.0), Err(ExactError::LengthMismatch { .. })));
        let f = ops.space.centered_occupation(0);
        assert!(matches!(resolvent_form(&ops, &f, 0.0), Err(ExactError::NonPositiveLambda(_))));
    }

    #[test]
    fn variational_identity() {
        let f_site = 2;
        for k in [JumpKernel::symmetric_nn(), drift()] {
            let ops = small(&k);
            let f = ops.space.centered_occupation(f_site);
            for lambda in [0.01, 0.1, 1.0] {
                let rep = verify_variational_identity(&ops, &f, lambda).unwrap();
                assert!(rep.factorization_residual < 1e-10, "{rep:?}");
                assert!((rep.supremum - rep.resolvent).abs() < 1e-10 * rep.resolvent.abs().max(1.0));
                assert!(rep.trial_excess <= 1e-12);
            }
        }
    }

    #[test]
    fn spectral_resolvent_consistency() {
        // ∫₀^∞ e^{−λs} ⟨f, e^{sL} f⟩ ds = Σ c_k / (λ + μ_k)
        let ops = small(&JumpKernel::symmetric_nn());
        let f = ops.space.centered_occupation(0);
        let lambda = 0.3;
        let l = ops.l.to_dense();
        let eig = SymmetricEigen::new(l.clone());
        let fv = DVector::from_column_slice(&f);
        let w = ops.space.weights()[0];
        let spectral: f64 = (0..ops.len())
            .map(|k| w * eig.eigenvectors.column(k).dot(&fv).powi(2) / (lambda - eig.eigenvalues[k]))
            .sum();
        let v = resolvent_form(&ops, &f, lambda).unwrap();
        assert!((spectral - v.full).abs() < 1e-8);
    }

    #[test]
    fn sigma2_oracles_agree() {
        let sym = small(&JumpKernel::symmetric_nn());
        let f = sym.space.centered_occupation(0);
        for t in [0.5, 1.0, 5.0] {
            let a = sigma2_spectral(&sym, &f, t).unwrap();
            let b = sigma2_block_exponential(&sym, &f, t).unwrap();
            let c = sigma2_quadrature(&sym, &f, t).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} {b}");
            assert!((a - c).abs() < 1e-8, "{a} {c}");
        }
        let dr = small(&drift());
        assert_eq!(sigma2_spectral(&dr, &f, 1.0).unwrap_err(), ExactError::NotSymmetric);
        let b = sigma2_block_exponential(&dr, &f, 2.0).unwrap();
        let c = sigma2_quadrature(&dr, &f, 2.0).unwrap();
        assert!((b - c).abs() < 1e-8);
    }

    #[test]
    fn h_norm_properties() {
        let ops = small(&drift());
        let f = ops.space.centered_occupation(0);
        let g = ops.space.centered_occupation(3);
        let (_, hm1) = h_norms(&ops, &f, 0.5).unwrap();
        let (h1, _) = h_norms(&ops, &g, 0.5).unwrap();
        assert!(2.0 * ops.space.inner(&f, &g) <= hm1 + h1 + 1e-12);
        // Constants lie in the kernel of S.
        let one = vec![1.0; ops.len()];
        let (_, v) = h_norms(&ops, &one, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn walker_oracles_agree() {
        let g = TorusGeometry::new(5, 4).unwrap();
        for k in [JumpKernel::symmetric_nn(), drift()] {
            for t in [0.3, 2.0, 7.0] {
                let a = walker_return_probability(&g, &k, t);
                let b = walker_return_probability_fourier(&g, &k, t);
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!((walker_return_probability(&g, &drift(), 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn krylov_path_matches_dense() {
        let g = TorusGeometry::new(4, 4).unwrap();
        let k = drift();
        let ops = build_operators(&g, &k, Ensemble::Sector(5), DEFAULT_STATE_CAP).unwrap();
        assert!(ops.len() > DENSE_LIMIT);
        let f = ops.space.centered_occupation(0);
        let v = resolvent_form(&ops, &f, 0.5).unwrap();
        assert!(v.residual_full < 1e-10 && v.residual_symmetric < 1e-10);
        assert!(v.full <= v.symmetric + 1e-10);
        let big = build_operators(&g, &k, Ensemble::Sector(5), 1000);
        assert!(matches!(big, Err(ExactError::StateSpaceTooLarge { size: 4368, cap: 1000 })));
    }
}
