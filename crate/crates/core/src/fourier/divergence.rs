use crate::error::FourierError;
use crate::fit::fit_line;

/// Growth rates compared against a bound curve as `λ ↓ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GrowthModel {
    LogLog,
    SqrtLog,
    TwoThirdsLog,
    Log,
}

impl GrowthModel {
    pub const ALL: [GrowthModel; 4] = [
        GrowthModel::LogLog,
        GrowthModel::SqrtLog,
        GrowthModel::TwoThirdsLog,
        GrowthModel::Log,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            GrowthModel::LogLog => "log|log l|",
            GrowthModel::SqrtLog => "|log l|^(1/2)",
            GrowthModel::TwoThirdsLog => "|log l|^(2/3)",
            GrowthModel::Log => "|log l|",
        }
    }

    pub fn eval(self, lambda: f64) -> f64 {
        let l = lambda.ln().abs();
        match self {
            GrowthModel::LogLog => l.ln().abs(),
            GrowthModel::SqrtLog => l.sqrt(),
            GrowthModel::TwoThirdsLog => l.powf(2.0 / 3.0),
            GrowthModel::Log => l,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DivergenceFit {
    pub model: GrowthModel,
    pub c0: f64,
    pub c1: f64,
    /// 95% confidence interval of `c1`.
    pub c1_ci: (f64, f64),
    pub rss: f64,
    /// `c1 > 0` with a confidence interval excluding zero.
    pub growth_supported: bool,
    /// `min value/g(λ)` over the small-`λ` half of the grid.
    pub tail_min_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DivergenceReport {
    pub fits: Vec<DivergenceFit>,
    /// Index into `fits` of the smallest residual.
    pub best: usize,
}

impl DivergenceReport {
    pub fn best_fit(&self) -> &DivergenceFit {
        &self.fits[self.best]
    }

    pub fn fit(&self, model: GrowthModel) -> &DivergenceFit {
        self.fits.iter().find(|f| f.model == model).expect("every model is fitted")
    }

    pub fn report(&self) -> String {
        let mut out = String::from("model c0 c1 c1_lo c1_hi rss growth tail_min_ratio\n");
        for f in &self.fits {
            out.push_str(&format!(
                "{} {:.6e} {:.6e} {:.6e} {:.6e} {:.6e} {} {:.6e}\n",
                f.model.tag().replace(' ', ""),
                f.c0,
                f.c1,
                f.c1_ci.0,
                f.c1_ci.1,
                f.rss,
                f.growth_supported,
                f.tail_min_ratio
            ));
        }
        out.push_str(&format!("best {}\n", self.best_fit().model.tag()));
        out
    }
}

pub const MIN_POINTS: usize = 6;
pub const MIN_DECADES: f64 = 4.0;

/// Least-squares fits of `value ≈ c0 + c1 g(λ)` for every [`GrowthModel`].
pub fn fit_divergence(lambdas: &[f64], values: &[f64]) -> Result<DivergenceReport, FourierError> {
    let insufficient = FourierError::InsufficientGrid {
        min_points: MIN_POINTS,
        min_decades: MIN_DECADES,
    };
    if lambdas.len() != values.len() || lambdas.len() < MIN_POINTS || lambdas.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
        return Err(insufficient);
    }
    let (lo, hi) = lambdas
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &l| (a.min(l), b.max(l)));
    if (hi / lo).log10() < MIN_DECADES - 1e-9 {
        return Err(insufficient);
    }
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&i, &j| lambdas[i].total_cmp(&lambdas[j]));
    let tail = &order[..lambdas.len().div_ceil(2)];

    let fits: Vec<DivergenceFit> = GrowthModel::ALL
        .iter()
        .map(|&model| {
            let g: Vec<f64> = lambdas.iter().map(|&l| model.eval(l)).collect();
            let line = fit_line(&g, values, None).expect("distinct abscissae");
            let c1_ci = line.slope_ci(0.95);
            DivergenceFit {
                model,
                c0: line.intercept,
                c1: line.slope,
                c1_ci,
                rss: line.rss,
                growth_supported: c1_ci.0 > 0.0,
                tail_min_ratio: tail.iter().map(|&i| values[i] / g[i]).fold(f64::INFINITY, f64::min),
            }
        })
        .collect();
    let best = (0..fits.len())
        .min_by(|&a, &b| fits[a].rss.total_cmp(&fits[b].rss))
        .expect("nonempty");
    Ok(DivergenceReport { fits, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::standard_lambda_grid;
    use rand::Rng;

    #[test]
    fn recovers_synthetic_sqrt_log() {
        let l = standard_lambda_grid();
        let v: Vec<f64> = l.iter().map(|&x| 2.0 + 3.0 * GrowthModel::SqrtLog.eval(x)).collect();
        let r = fit_divergence(&l, &v).unwrap();
        let f = r.fit(GrowthModel::SqrtLog);
        assert!((f.c1 - 3.0).abs() < 0.03 && (f.c0 - 2.0).abs() < 0.02);
        assert_eq!(r.best_fit().model, GrowthModel::SqrtLog);
        assert!(f.growth_supported && f.tail_min_ratio > 0.0);
    }

    #[test]
    fn selects_log_log_under_noise() {
        let l = standard_lambda_grid();
        let mut rng = crate::rng::replica_rng(5, 0);
        let v: Vec<f64> = l
            .iter()
            .map(|&x| GrowthModel::LogLog.eval(x) * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))
            .collect();
        let r = fit_divergence(&l, &v).unwrap();
        assert_eq!(r.best_fit().model, GrowthModel::LogLog, "{}", r.report());
    }

    #[test]
    fn constant_curve_rejects_growth() {
        let l = standard_lambda_grid();
        let mut rng = crate::rng::replica_rng(8, 0);
        let v: Vec<f64> = l.iter().map(|_| 1.0 + 0.01 * rng.random_range(-1.0..1.0)).collect();
        let r = fit_divergence(&l, &v).unwrap();
        for f in &r.fits {
            assert!(!f.growth_supported, "{}", r.report());
            assert!(f.c1_ci.0 < 0.0 && f.c1_ci.1 > 0.0);
        }
    }

    #[test]
    fn grid_requirements() {
        let short = [1e-4, 1e-3, 1e-2];
        assert!(matches!(fit_divergence(&short, &[1.0; 3]), Err(FourierError::InsufficientGrid { .. })));
        let narrow: Vec<f64> = (0..8).map(|i| 1e-3 * 1.5f64.powi(i)).collect();
        assert!(fit_divergence(&narrow, &[1.0; 8]).is_err());
    }
}
