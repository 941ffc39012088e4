//! Estimators built on replica trajectories: the occupation-time variance,
//! the second-class return probability, the kernel identity linking them,
//! Laplace transforms and scaling fits.

use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::dynamics::Trajectory;
use crate::error::ObservableError;
use crate::fit::fit_line;

/// Fewest replicas for which a standard error is reported.
pub const MIN_REPLICAS: usize = 100;

/// Per-time Monte Carlo estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Variance of the estimator, `se²`.
    pub variance: Vec<f64>,
    pub se: Vec<f64>,
    pub replicas: usize,
}

impl TimeSeries {
    /// A series with no sampling error, for synthetic or exact inputs.
    pub fn exact(times: Vec<f64>, values: Vec<f64>) -> Self {
        let n = times.len();
        TimeSeries {
            times,
            mean: values,
            variance: vec![0.0; n],
            se: vec![0.0; n],
            replicas: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of grid time `t` (relative tolerance `1e-9`).
    pub fn position(&self, t: f64) -> Result<usize, ObservableError> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or(ObservableError::NotOnGrid(t))
    }
}

/// Sums `Σ xᵏ`, `k = 1..4`, per grid time. Merging two accumulators in a
/// fixed order gives a deterministic result.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PowerSums {
    pub n: usize,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub s3: Vec<f64>,
    pub s4: Vec<f64>,
}

impl PowerSums {
    pub fn new(len: usize) -> Self {
        PowerSums {
            n: 0,
            s1: vec![0.0; len],
            s2: vec![0.0; len],
            s3: vec![0.0; len],
            s4: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.s1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s1.is_empty()
    }

    pub fn push(&mut self, xs: &[f64]) -> Result<(), ObservableError> {
        if xs.len() != self.len() {
            return Err(ObservableError::GridMismatch);
        }
        for (k, &x) in xs.iter().enumerate() {
            let x2 = x * x;
            self.s1[k] += x;
            self.s2[k] += x2;
            self.s3[k] += x2 * x;
            self.s4[k] += x2 * x2;
        }
        self.n += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &PowerSums) -> Result<(), ObservableError> {
        if self.n == 0 && self.is_empty() {
            *self = other.clone();
            return Ok(());
        }
        if other.len() != self.len() {
            return Err(ObservableError::GridMismatch);
        }
        for k in 0..self.len() {
            self.s1[k] += other.s1[k];
            self.s2[k] += other.s2[k];
            self.s3[k] += other.s3[k];
            self.s4[k] += other.s4[k];
        }
        self.n += other.n;
        Ok(())
    }

    fn check(&self) -> Result<f64, ObservableError> {
        if self.n < MIN_REPLICAS {
            return Err(ObservableError::TooFewReplicas {
                got: self.n,
                min: MIN_REPLICAS,
            });
        }
        Ok(self.n as f64)
    }

    /// Mean of `x` with the sample-std standard error.
    pub fn mean_series(&self, times: &[f64]) -> Result<TimeSeries, ObservableError> {
        let n = self.check()?;
        let mean: Vec<f64> = self.s1.iter().map(|s| s / n).collect();
        let variance: Vec<f64> = (0..self.len())
            .map(|k| ((self.s2[k] - n * mean[k] * mean[k]) / (n - 1.0)).max(0.0) / n)
            .collect();
        Ok(series(times, mean, variance, self.n))
    }

    /// Mean of `x²` with a standard error from the fourth moment.
    pub fn second_moment_series(&self, times: &[f64]) -> Result<TimeSeries, ObservableError> {
        let n = self.check()?;
        let mean: Vec<f64> = self.s2.iter().map(|s| s / n).collect();
        let variance: Vec<f64> = (0..self.len())
            .map(|k| ((self.s4[k] - n * mean[k] * mean[k]) / (n - 1.0)).max(0.0) / n)
            .collect();
        Ok(series(times, mean, variance, self.n))
    }

    /// `mean(x²) − mean(x)²`.
    pub fn centered_second_moment(&self) -> Vec<f64> {
        let n = self.n.max(1) as f64;
        (0..self.len())
            .map(|k| self.s2[k] / n - (self.s1[k] / n).powi(2))
            .collect()
    }
}

fn series(times: &[f64], mean: Vec<f64>, variance: Vec<f64>, replicas: usize) -> TimeSeries {
    let se = variance.iter().map(|v| v.sqrt()).collect();
    TimeSeries {
        times: times.to_vec(),
        mean,
        variance,
        se,
        replicas,
    }
}

/// Result of [`estimate_variance`].
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceEstimate {
    /// `σ̂²_t = mean(A(t)²)`.
    pub sigma2: TimeSeries,
    /// `mean(A²) − mean(A)²`.
    pub centered: Vec<f64>,
    /// Mean of `η₀(t)`; its spread at `t = 0` checks the covariance endpoint.
    pub occupation: TimeSeries,
}

fn common_grid(trajs: &[Trajectory]) -> Result<&[f64], ObservableError> {
    let first = trajs.first().ok_or(ObservableError::TooFewReplicas {
        got: 0,
        min: MIN_REPLICAS,
    })?;
    if trajs.iter().any(|t| t.times != first.times) {
        return Err(ObservableError::GridMismatch);
    }
    Ok(&first.times)
}

/// `σ̂²_t` from replicas started in the unconditioned equilibrium.
pub fn estimate_variance(trajs: &[Trajectory], _rho: f64) -> Result<VarianceEstimate, ObservableError> {
    let times = common_grid(trajs)?;
    let mut a = PowerSums::new(times.len());
    let mut eta = PowerSums::new(times.len());
    for t in trajs {
        if t.occupation_time.len() != times.len() {
            return Err(ObservableError::InvalidSeries("trajectory lacks occupation times".into()));
        }
        a.push(&t.occupation_time)?;
        let e: Vec<f64> = t.eta0.iter().map(|&v| v as f64).collect();
        eta.push(&e)?;
    }
    Ok(VarianceEstimate {
        sigma2: a.second_moment_series(times)?,
        centered: a.centered_second_moment(),
        occupation: eta.mean_series(times)?,
    })
}

/// Return-probability counts per grid time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReturnCounts {
    pub n: usize,
    pub hits: Vec<u64>,
}

impl ReturnCounts {
    pub fn new(len: usize) -> Self {
        ReturnCounts {
            n: 0,
            hits: vec![0; len],
        }
    }

    pub fn push(&mut self, at_origin: &[bool]) -> Result<(), ObservableError> {
        if at_origin.len() != self.hits.len() {
            return Err(ObservableError::GridMismatch);
        }
        for (h, &b) in self.hits.iter_mut().zip(at_origin) {
            *h += b as u64;
        }
        self.n += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ReturnCounts) -> Result<(), ObservableError> {
        if other.hits.len() != self.hits.len() {
            return Err(ObservableError::GridMismatch);
        }
        for (h, o) in self.hits.iter_mut().zip(&other.hits) {
            *h += o;
        }
        self.n += other.n;
        Ok(())
    }

    /// Fraction of replicas at the origin with the binomial standard error.
    pub fn series(&self, times: &[f64]) -> Result<TimeSeries, ObservableError> {
        if self.n < MIN_REPLICAS {
            return Err(ObservableError::TooFewReplicas {
                got: self.n,
                min: MIN_REPLICAS,
            });
        }
        let n = self.n as f64;
        let mean: Vec<f64> = self.hits.iter().map(|&h| h as f64 / n).collect();
        let variance = mean.iter().map(|p| p * (1.0 - p) / n).collect();
        Ok(series(times, mean, variance, self.n))
    }
}

/// `p̂_t(0,0)` from coupled replicas.
pub fn estimate_return_probability(trajs: &[Trajectory]) -> Result<TimeSeries, ObservableError> {
    let times = common_grid(trajs)?;
    let mut counts = ReturnCounts::new(times.len());
    for t in trajs {
        counts.push(&t.at_origin)?;
    }
    counts.series(times)
}

/// Trapezoid weights `w` with `∫₀ᵗ (t − s) y(s) ds ≈ Σ wₖ yₖ` on the grid up
/// to `t`. The grid must start at 0, contain `t`, and have spacing at most
/// `t/100` on `[0, min(t, 1)]`.
pub fn kernel_weights(times: &[f64], t: f64) -> Result<Vec<f64>, ObservableError> {
    if times.first() != Some(&0.0) {
        return Err(ObservableError::InvalidSeries("grid must start at t = 0".into()));
    }
    let series = TimeSeries::exact(times.to_vec(), vec![0.0; times.len()]);
    let end = series.position(t)?;
    let limit = t / 100.0;
    let near = t.min(1.0);
    let mut w = vec![0.0; times.len()];
    for k in 0..end {
        let (a, b) = (times[k], times[k + 1]);
        let h = b - a;
        if a < near && h > limit * (1.0 + 1e-9) {
            return Err(ObservableError::GridTooCoarse { t, width: h, limit });
        }
        w[k] += 0.5 * h * (t - a);
        w[k + 1] += 0.5 * h * (t - b);
    }
    Ok(w)
}

/// `σ²_t = 2ρ(1−ρ) ∫₀ᵗ (t − s) p̂_s ds` by trapezoid quadrature.
pub fn variance_via_kernel(series: &TimeSeries, rho: f64, t: f64) -> Result<f64, ObservableError> {
    let w = kernel_weights(&series.times, t)?;
    let integral: f64 = w.iter().zip(&series.mean).map(|(w, p)| w * p).sum();
    Ok(2.0 * rho * (1.0 - rho) * integral)
}

/// Per-replica kernel-identity values `2ρ(1−ρ) Σ wₖ 1{R(sₖ)=0}` at several
/// evaluation times, so the reconstruction gets an exact standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelVarianceAccumulator {
    weights: Vec<Vec<f64>>,
    factor: f64,
    sums: PowerSums,
}

impl KernelVarianceAccumulator {
    pub fn new(times: &[f64], rho: f64, eval_times: &[f64]) -> Result<Self, ObservableError> {
        let weights = eval_times
            .iter()
            .map(|&t| kernel_weights(times, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(KernelVarianceAccumulator {
            weights,
            factor: 2.0 * rho * (1.0 - rho),
            sums: PowerSums::new(eval_times.len()),
        })
    }

    pub fn push(&mut self, at_origin: &[bool]) -> Result<(), ObservableError> {
        let values: Vec<f64> = self
            .weights
            .iter()
            .map(|w| {
                self.factor
                    * w.iter()
                        .zip(at_origin)
                        .map(|(w, &b)| if b { *w } else { 0.0 })
                        .sum::<f64>()
            })
            .collect();
        self.sums.push(&values)
    }

    pub fn merge(&mut self, other: &KernelVarianceAccumulator) -> Result<(), ObservableError> {
        self.sums.merge(&other.sums)
    }

    pub fn series(&self, eval_times: &[f64]) -> Result<TimeSeries, ObservableError> {
        self.sums.mean_series(eval_times)
    }
}

/// One row of a Laplace-transform table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaplacePoint {
    pub lambda: f64,
    /// `∫₀ᵀ e^{−λt} y(t) dt` for the piecewise-linear interpolant of `y`.
    pub transform: f64,
    /// Bound on `∫_T^∞ e^{−λt} y(t) dt` when `|y(t)| ≤ |y(T)| (t/T)^k`.
    pub tail_bound: f64,
}

// (1 − e^{−x})/x and (1 − e^{−x}(1+x))/x²
fn phi12(x: f64) -> (f64, f64) {
    if x < 1e-3 {
        let p1 = 1.0 - x / 2.0 + x * x / 6.0 - x.powi(3) / 24.0 + x.powi(4) / 120.0;
        let p2 = 0.5 - x / 3.0 + x * x / 8.0 - x.powi(3) / 30.0 + x.powi(4) / 144.0;
        (p1, p2)
    } else {
        let e = (-x).exp();
        ((1.0 - e) / x, (1.0 - e * (1.0 + x)) / (x * x))
    }
}

/// Laplace transform of a sampled series on `[0, T]`, `T` the last grid
/// time, with a tail bound for growth exponent `k` (0 for bounded series,
/// 1 for linear growth).
pub fn laplace_transform(
    times: &[f64],
    values: &[f64],
    lambdas: &[f64],
    growth: f64,
) -> Result<Vec<LaplacePoint>, ObservableError> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(ObservableError::InvalidSeries("need matching times and values".into()));
    }
    if !times.windows(2).all(|w| w[0] < w[1]) {
        return Err(ObservableError::InvalidSeries("times must increase".into()));
    }
    let horizon = *times.last().expect("nonempty");
    let y_end = values.last().expect("nonempty").abs();
    lambdas
        .iter()
        .map(|&lambda| {
            if !(lambda * horizon >= 5.0) {
                return Err(ObservableError::TruncationTooSevere { lambda, horizon });
            }
            let mut transform = 0.0;
            for k in 0..times.len() - 1 {
                let (a, b) = (times[k], times[k + 1]);
                let h = b - a;
                let (p1, p2) = phi12(lambda * h);
                transform += (-lambda * a).exp() * h * (values[k] * (p1 - p2) + values[k + 1] * p2);
            }
            let x = lambda * horizon;
            let a = growth + 1.0;
            let upper = (gamma_ur(a, x).ln() + ln_gamma(a)).exp();
            let tail_bound = y_end * upper / (lambda.powf(a) * horizon.powf(growth));
            Ok(LaplacePoint {
                lambda,
                transform,
                tail_bound,
            })
        })
        .collect()
}

/// Growth model for [`fit_scaling`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScalingModel {
    /// `y = c t^α`
    Power,
    /// `y = t (c₀ + c log t)`
    TLogT,
    /// `y = t (c₀ + c log log t)`
    TLogLogT,
    /// `y = c t (log t)^β`
    TLogPower,
}

impl ScalingModel {
    pub const ALL: [ScalingModel; 4] = [
        ScalingModel::Power,
        ScalingModel::TLogT,
        ScalingModel::TLogLogT,
        ScalingModel::TLogPower,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ScalingModel::Power => "power",
            ScalingModel::TLogT => "t_log_t",
            ScalingModel::TLogLogT => "t_loglog_t",
            ScalingModel::TLogPower => "t_log_power",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.tag() == tag)
    }

    // (x, y, weight) in the linearized coordinates, or None if undefined.
    fn transform(self, t: f64, y: f64, se: Option<f64>) -> Option<(f64, f64, Option<f64>)> {
        let w = |scale: f64| se.filter(|s| *s > 0.0).map(|s| (scale / s).powi(2));
        match self {
            ScalingModel::Power => (t > 0.0 && y > 0.0).then(|| (t.ln(), y.ln(), w(y))),
            ScalingModel::TLogT => (t > 0.0).then(|| (t.ln(), y / t, w(t))),
            ScalingModel::TLogLogT => (t > 1.0 && t.ln() > 1.0).then(|| (t.ln().ln(), y / t, w(t))),
            ScalingModel::TLogPower => {
                (t.ln() > 1.0 && y > 0.0).then(|| (t.ln().ln(), (y / t).ln(), w(y)))
            }
        }
    }

    fn predict(self, t: f64, c0: f64, c1: f64) -> f64 {
        match self {
            ScalingModel::Power => (c0 + c1 * t.ln()).exp(),
            ScalingModel::TLogT => t * (c0 + c1 * t.ln()),
            ScalingModel::TLogLogT => t * (c0 + c1 * t.ln().ln()),
            ScalingModel::TLogPower => t * (c0 + c1 * t.ln().ln()).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitParam {
    pub name: &'static str,
    pub value: f64,
    pub ci: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    pub model: ScalingModel,
    pub params: Vec<FitParam>,
    pub window: (f64, f64),
    pub points: usize,
    /// Relative residuals `(y − ŷ)/y` at the fitted points.
    pub residuals: Vec<f64>,
    /// Root mean square of `residuals`; comparable across models.
    pub residual_norm: f64,
}

impl ScalingFit {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Key-value text block.
    pub fn report(&self) -> String {
        let mut out = format!(
            "model = {}\nwindow = [{}, {}]\npoints = {}\n",
            self.model.tag(),
            self.window.0,
            self.window.1,
            self.points
        );
        for p in &self.params {
            out.push_str(&format!(
                "{} = {:.6e}\n{}_ci95 = [{:.6e}, {:.6e}]\n",
                p.name, p.value, p.name, p.ci.0, p.ci.1
            ));
        }
        out.push_str(&format!("residual_norm = {:.6e}\n", self.residual_norm));
        out
    }
}

pub const MIN_FIT_POINTS: usize = 8;

/// Least-squares fit of `model` on grid points with `t ∈ window`.
pub fn fit_scaling(
    series: &TimeSeries,
    model: ScalingModel,
    window: (f64, f64),
) -> Result<ScalingFit, ObservableError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    let mut used = Vec::new();
    for k in 0..series.len() {
        let t = series.times[k];
        if t < window.0 || t > window.1 {
            continue;
        }
        let se = series.se.get(k).copied();
        if let Some((x, y, w)) = model.transform(t, series.mean[k], se) {
            xs.push(x);
            ys.push(y);
            ws.push(w);
            used.push(k);
        }
    }
    let points = xs.len();
    if points < MIN_FIT_POINTS {
        return Err(ObservableError::DegenerateWindow {
            points,
            min: MIN_FIT_POINTS,
        });
    }
    let weights: Option<Vec<f64>> = ws.iter().copied().collect();
    let line = fit_line(&xs, &ys, weights.as_deref()).ok_or(ObservableError::DegenerateWindow {
        points,
        min: MIN_FIT_POINTS,
    })?;
    let (c0, c1) = (line.intercept, line.slope);
    let residuals: Vec<f64> = used
        .iter()
        .map(|&k| {
            let y = series.mean[k];
            (y - model.predict(series.times[k], c0, c1)) / y
        })
        .collect();
    let residual_norm = (residuals.iter().map(|r| r * r).sum::<f64>() / points as f64).sqrt();
    let ci0 = line.intercept_ci(0.95);
    let ci1 = line.slope_ci(0.95);
    let exp_ci = |(a, b): (f64, f64)| (a.exp(), b.exp());
    let params = match model {
        ScalingModel::Power => vec![
            FitParam { name: "c", value: c0.exp(), ci: exp_ci(ci0) },
            FitParam { name: "alpha", value: c1, ci: ci1 },
        ],
        ScalingModel::TLogT | ScalingModel::TLogLogT => vec![
            FitParam { name: "c0", value: c0, ci: ci0 },
            FitParam { name: "c", value: c1, ci: ci1 },
        ],
        ScalingModel::TLogPower => vec![
            FitParam { name: "c", value: c0.exp(), ci: exp_ci(ci0) },
            FitParam { name: "beta", value: c1, ci: ci1 },
        ],
    };
    Ok(ScalingFit {
        model,
        params,
        window,
        points,
        residuals,
        residual_norm,
    })
}

/// Linear prefix `0, step, 2·step, …, 1` followed by a geometric grid with
/// ratio `ratio` up to `horizon`, merged with `extra` times. All times lie
/// in `[0, horizon]` and the horizon is included.
pub fn time_grid(step: f64, horizon: f64, ratio: f64, extra: &[f64]) -> Vec<f64> {
    let mut grid = Vec::new();
    let prefix_end = horizon.min(1.0);
    let n = (prefix_end / step).round() as usize;
    for k in 0..=n {
        grid.push((k as f64 * step).min(prefix_end));
    }
    let mut t = 1.0;
    while t < horizon {
        t *= ratio;
        grid.push(t.min(horizon));
    }
    grid.push(horizon);
    grid.extend(extra.iter().copied().filter(|&t| (0.0..=horizon).contains(&t)));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn traj(a: Vec<f64>, eta: Vec<u8>, at: Vec<bool>, times: &[f64]) -> Trajectory {
        Trajectory {
            times: times.to_vec(),
            eta0: eta,
            occupation_time: a,
            at_origin: at,
            ..Default::default()
        }
    }

    #[test]
    fn frozen_full_lattice_gives_zero_variance() {
        let times = [0.0, 1.0, 2.0];
        let trajs: Vec<_> = (0..150)
            .map(|_| traj(vec![0.0; 3], vec![1; 3], vec![], &times))
            .collect();
        let est = estimate_variance(&trajs, 1.0).unwrap();
        assert!(est.sigma2.mean.iter().all(|&v| v == 0.0));
        assert!(est.sigma2.se.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_few_replicas() {
        let times = [0.0];
        let trajs: Vec<_> = (0..99).map(|_| traj(vec![0.0], vec![0], vec![true], &times)).collect();
        assert!(matches!(
            estimate_variance(&trajs, 0.5),
            Err(ObservableError::TooFewReplicas { got: 99, .. })
        ));
        assert!(matches!(
            estimate_return_probability(&trajs),
            Err(ObservableError::TooFewReplicas { .. })
        ));
    }

    #[test]
    fn second_moment_standard_error_uses_fourth_moment() {
        // A ∈ {−1, +1, −3, +3} cyclically: A² ∈ {1, 9}; sample std of A² is
        // 4·sqrt(n/(n−1)).
        let times = [1.0];
        let vals = [-1.0, 1.0, -3.0, 3.0];
        let trajs: Vec<_> = (0..400)
            .map(|i| traj(vec![vals[i % 4]], vec![0], vec![false], &times))
            .collect();
        let est = estimate_variance(&trajs, 0.5).unwrap();
        assert_relative_eq!(est.sigma2.mean[0], 5.0);
        let expected = 4.0 * (400.0f64 / 399.0).sqrt() / 20.0;
        assert_relative_eq!(est.sigma2.se[0], expected, max_relative = 1e-12);
        assert_relative_eq!(est.centered[0], 5.0);
    }

    #[test]
    fn return_probability_at_time_zero_is_one() {
        let times = [0.0, 1.0];
        let trajs: Vec<_> = (0..200)
            .map(|i| traj(vec![], vec![], vec![true, i % 4 == 0], &times))
            .collect();
        let p = estimate_return_probability(&trajs).unwrap();
        assert_eq!(p.mean[0], 1.0);
        assert_eq!(p.se[0], 0.0);
        assert_relative_eq!(p.mean[1], 0.25);
        assert_relative_eq!(p.se[1], (0.25 * 0.75 / 200.0f64).sqrt());
    }

    #[test]
    fn kernel_identity_with_frozen_discrepancy() {
        let t = 3.0;
        let times = time_grid(0.01, t, 1.25, &[]);
        let s = TimeSeries::exact(times.clone(), vec![1.0; times.len()]);
        for rho in [0.2, 0.5] {
            let v = variance_via_kernel(&s, rho, t).unwrap();
            assert_relative_eq!(v, rho * (1.0 - rho) * t * t, max_relative = 1e-12);
        }
        assert_eq!(variance_via_kernel(&s, 1.0, t).unwrap(), 0.0);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let s = TimeSeries::exact(times, vec![1.0; 11]);
        assert!(matches!(
            variance_via_kernel(&s, 0.5, 1.0),
            Err(ObservableError::GridTooCoarse { .. })
        ));
        assert!(matches!(variance_via_kernel(&s, 0.5, 0.55), Err(ObservableError::NotOnGrid(_))));
    }

    #[test]
    fn kernel_accumulator_matches_series_formula() {
        let times = time_grid(0.01, 2.0, 1.25, &[]);
        let eval = [1.0, 2.0];
        let mut acc = KernelVarianceAccumulator::new(&times, 0.5, &eval).unwrap();
        let mut counts = ReturnCounts::new(times.len());
        for r in 0..300usize {
            let at: Vec<bool> = (0..times.len()).map(|k| (k * 7 + r * 3) % 5 < 2).collect();
            acc.push(&at).unwrap();
            counts.push(&at).unwrap();
        }
        let p = counts.series(&times).unwrap();
        let s = acc.series(&eval).unwrap();
        for (k, &t) in eval.iter().enumerate() {
            assert_relative_eq!(s.mean[k], variance_via_kernel(&p, 0.5, t).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn laplace_of_constant() {
        let times = time_grid(0.01, 50.0, 1.1, &[]);
        let c = 0.7;
        let vals = vec![c; times.len()];
        let pts = laplace_transform(&times, &vals, &[0.2, 1.0], 0.0).unwrap();
        for p in pts {
            let lam = p.lambda;
            assert_relative_eq!(p.transform, c / lam * (1.0 - (-lam * 50.0).exp()), max_relative = 1e-12);
            assert_relative_eq!(p.tail_bound, c * (-lam * 50.0).exp() / lam, max_relative = 1e-10);
        }
    }

    #[test]
    fn laplace_of_linear_growth() {
        let times = time_grid(0.01, 100.0, 1.2, &[]);
        let pts = laplace_transform(&times, &times, &[0.1, 0.5, 2.0], 1.0).unwrap();
        for p in pts {
            let total = p.lambda * p.lambda * (p.transform + p.tail_bound);
            assert_relative_eq!(total, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn laplace_truncation_guard() {
        let times = [0.0, 1.0, 2.0];
        assert!(matches!(
            laplace_transform(&times, &[1.0; 3], &[1.0], 0.0),
            Err(ObservableError::TruncationTooSevere { .. })
        ));
    }

    #[test]
    fn power_fit_exact() {
        let times: Vec<f64> = (0..20).map(|k| 10f64.powf(1.0 + k as f64 * 0.15)).collect();
        let vals: Vec<f64> = times.iter().map(|t| 3.0 * t.powf(1.5)).collect();
        let fit = fit_scaling(&TimeSeries::exact(times, vals), ScalingModel::Power, (1.0, 1e6)).unwrap();
        assert!((fit.param("alpha").unwrap().value - 1.5).abs() < 1e-10);
        assert!((fit.param("c").unwrap().value - 3.0).abs() < 1e-8);
        assert!(fit.residual_norm < 1e-10);
    }

    #[test]
    fn t_log_t_fit_with_noise() {
        use rand::Rng;
        let mut rng = crate::rng::replica_rng(3, 0);
        let times: Vec<f64> = (0..30).map(|k| 10f64.powf(1.0 + k as f64 * 0.1)).collect();
        let vals: Vec<f64> = times
            .iter()
            .map(|t| t * t.ln() * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0)))
            .collect();
        let s = TimeSeries::exact(times, vals);
        let fit = fit_scaling(&s, ScalingModel::TLogT, (1.0, 1e5)).unwrap();
        assert!((fit.param("c").unwrap().value - 1.0).abs() < 0.05);
        let power = fit_scaling(&s, ScalingModel::Power, (1.0, 1e5)).unwrap();
        assert!(fit.residual_norm < power.residual_norm);
    }

    #[test]
    fn degenerate_window() {
        let times: Vec<f64> = (1..20).map(|k| k as f64).collect();
        let s = TimeSeries::exact(times.clone(), times);
        assert!(matches!(
            fit_scaling(&s, ScalingModel::Power, (1.0, 5.0)),
            Err(ObservableError::DegenerateWindow { points: 5, .. })
        ));
    }

    #[test]
    fn grid_shape() {
        let g = time_grid(0.01, 1000.0, 1.25, &[10.0, 100.0]);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 1000.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.iter().any(|&t| t == 10.0));
        assert_eq!(g.iter().filter(|&&t| t <= 1.0).count(), 101);
        let g = time_grid(0.01, 0.5, 1.25, &[]);
        assert_eq!(*g.last().unwrap(), 0.5);
        assert_eq!(g.len(), 51);
    }

    proptest! {
        #[test]
        fn laplace_is_nonincreasing_in_lambda(vals in prop::collection::vec(0.0f64..5.0, 30)) {
            let times: Vec<f64> = (0..30).map(|k| k as f64).collect();
            let lambdas = [0.2, 0.3, 0.5, 1.0, 3.0];
            let pts = laplace_transform(&times, &vals, &lambdas, 0.0).unwrap();
            for w in pts.windows(2) {
                prop_assert!(w[1].transform <= w[0].transform + 1e-12);
            }
        }
    }
}
