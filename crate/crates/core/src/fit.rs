//! Straight-line least squares with Student-t confidence intervals.

use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Clone, Debug, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub se_intercept: f64,
    pub se_slope: f64,
    /// Residual degrees of freedom `n − 2`.
    pub dof: usize,
    /// Weighted residual sum of squares.
    pub rss: f64,
}

impl LineFit {
    /// Two-sided Student-t quantile for `level` (e.g. 0.95).
    pub fn t_quantile(&self, level: f64) -> f64 {
        let dof = self.dof.max(1) as f64;
        StudentsT::new(0.0, 1.0, dof)
            .expect("positive dof")
            .inverse_cdf(0.5 + 0.5 * level)
    }

    pub fn slope_ci(&self, level: f64) -> (f64, f64) {
        let q = self.t_quantile(level) * self.se_slope;
        (self.slope - q, self.slope + q)
    }

    pub fn intercept_ci(&self, level: f64) -> (f64, f64) {
        let q = self.t_quantile(level) * self.se_intercept;
        (self.intercept - q, self.intercept + q)
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Fits `y ≈ c₀ + c₁ x`. With `weights`, minimizes `Σ wᵢ (yᵢ − c₀ − c₁ xᵢ)²`;
/// standard errors use the residual variance in both cases, so they stay
/// meaningful when the weights are only relative. Returns `None` for fewer
/// than three points or a degenerate design.
pub fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Option<LineFit> {
    let n = x.len();
    if n < 3 || y.len() != n || weights.is_some_and(|w| w.len() != n) {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(w).sum();
    let xm = (0..n).map(|i| w(i) * x[i]).sum::<f64>() / sw;
    let ym = (0..n).map(|i| w(i) * y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| w(i) * (x[i] - xm).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| w(i) * (x[i] - xm) * (y[i] - ym)).sum();
    if !(sxx > 0.0) || !sw.is_finite() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = (0..n)
        .map(|i| w(i) * (y[i] - intercept - slope * x[i]).powi(2))
        .sum();
    let dof = n - 2;
    let s2 = rss / dof as f64;
    let se_slope = (s2 / sxx).sqrt();
    let se_intercept = (s2 * (1.0 / sw + xm * xm / sxx)).sqrt();
    Some(LineFit {
        intercept,
        slope,
        se_intercept,
        se_slope,
        dof,
        rss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_line_is_recovered() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&x, &y, None).unwrap();
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-14);
        assert_relative_eq!(f.intercept, 1.0, epsilon = 1e-14);
        assert!(f.se_slope < 1e-12);
    }

    #[test]
    fn standard_errors_match_textbook_values() {
        // Hand-checked: x = 1..5, y = (2, 4, 5, 4, 5); slope 0.6, intercept 2.2,
        // rss 2.4, s² = 0.8, se(slope) = sqrt(0.8/10).
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 5.0, 4.0, 5.0];
        let f = fit_line(&x, &y, None).unwrap();
        assert_relative_eq!(f.slope, 0.6, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 2.2, epsilon = 1e-12);
        assert_relative_eq!(f.se_slope, (0.08f64).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(f.se_intercept, (0.8 * (0.2 + 9.0 / 10.0f64)).sqrt(), epsilon = 1e-12);
        // t_{0.975, 3} = 3.182446305...
        assert_relative_eq!(f.t_quantile(0.95), 3.182_446_305_284_263, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_line(&[1.0, 2.0], &[1.0, 2.0], None).is_none());
        assert!(fit_line(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], None).is_none());
    }

    proptest! {
        #[test]
        fn weighting_by_constant_changes_nothing(c in 0.1f64..10.0, ys in prop::collection::vec(-5.0f64..5.0, 6)) {
            let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
            let w = vec![c; 6];
            let a = fit_line(&x, &ys, None).unwrap();
            let b = fit_line(&x, &ys, Some(&w)).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-10);
            prop_assert!((a.se_slope - b.se_slope).abs() < 1e-8 * (1.0 + b.se_slope));
        }
    }
}
