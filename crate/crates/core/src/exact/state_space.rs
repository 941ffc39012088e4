use std::collections::HashMap;

use crate::error::ExactError;
use crate::model::TorusGeometry;

/// Default cap on enumerated states.
pub const DEFAULT_STATE_CAP: usize = 50_000;

/// Which stationary measure the finite space carries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ensemble {
    /// All configurations with exactly `k` particles, uniform weights.
    Sector(usize),
    /// All `2^N` configurations with Bernoulli(`ρ`) product weights.
    Product(f64),
}

/// Enumerated configurations as bitmasks (bit `i` = site `i` occupied),
/// in increasing order, with their stationary weights.
#[derive(Clone, Debug)]
pub struct StateSpace {
    geometry: TorusGeometry,
    ensemble: Ensemble,
    states: Vec<u64>,
    index: HashMap<u64, usize>,
    weights: Vec<f64>,
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k.min(n));
    (0..k).try_fold(1usize, |acc, i| acc.checked_mul(n - i).map(|v| v / (i + 1)))
}

impl StateSpace {
    pub fn new(geometry: &TorusGeometry, ensemble: Ensemble, cap: usize) -> Result<Self, ExactError> {
        let n = geometry.sites();
        if n > 63 {
            return Err(ExactError::TooManySites(n));
        }
        let (states, weights) = match ensemble {
            Ensemble::Sector(k) => {
                let size = if k > n { 0 } else { binomial(n, k).unwrap_or(usize::MAX) };
                if size > cap {
                    return Err(ExactError::StateSpaceTooLarge { size, cap });
                }
                let states = k_subsets(n, k);
                let w = 1.0 / states.len().max(1) as f64;
                let weights = vec![w; states.len()];
                (states, weights)
            }
            Ensemble::Product(rho) => {
                if !(rho > 0.0 && rho < 1.0) {
                    return Err(ExactError::DegenerateDensity(rho));
                }
                let size = 1usize << n;
                if size > cap {
                    return Err(ExactError::StateSpaceTooLarge { size, cap });
                }
                let states: Vec<u64> = (0..size as u64).collect();
                let weights = states
                    .iter()
                    .map(|s| {
                        let k = s.count_ones() as i32;
                        rho.powi(k) * (1.0 - rho).powi(n as i32 - k)
                    })
                    .collect();
                (states, weights)
            }
        };
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(StateSpace {
            geometry: *geometry,
            ensemble,
            states,
            index,
            weights,
        })
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.index.get(&state).copied()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Density used to center occupation functions: `k/N` in a sector, `ρ`
    /// in the product space.
    pub fn density(&self) -> f64 {
        match self.ensemble {
            Ensemble::Sector(k) => k as f64 / self.geometry.sites() as f64,
            Ensemble::Product(rho) => rho,
        }
    }

    /// `⟨f, g⟩` in the stationary measure.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, a)| w * a).sum()
    }

    /// Tabulates `f` on the enumerated states.
    pub fn tabulate(&self, f: impl Fn(u64) -> f64) -> Vec<f64> {
        self.states.iter().map(|&s| f(s)).collect()
    }

    /// `η_site − density`.
    pub fn centered_occupation(&self, site: usize) -> Vec<f64> {
        let rho = self.density();
        self.tabulate(|s| ((s >> site) & 1) as f64 - rho)
    }

    pub fn check_len(&self, f: &[f64]) -> Result<(), ExactError> {
        if f.len() != self.len() {
            return Err(ExactError::LengthMismatch {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }
}

/// All `k`-subsets of `0..n` as bitmasks in increasing order (Gosper's hack).
pub fn k_subsets(n: usize, k: usize) -> Vec<u64> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![0];
    }
    let limit = 1u64 << n;
    let mut out = Vec::new();
    let mut s: u64 = (1u64 << k) - 1;
    while s < limit {
        out.push(s);
        let c = s & s.wrapping_neg();
        let r = s + c;
        s = (((r ^ s) >> 2) / c) | r;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_enumeration() {
        let g = TorusGeometry::new(3, 2).unwrap();
        let sp = StateSpace::new(&g, Ensemble::Sector(3), DEFAULT_STATE_CAP).unwrap();
        assert_eq!(sp.len(), 20);
        assert!(sp.states().iter().all(|s| s.count_ones() == 3));
        assert!(sp.states().windows(2).all(|w| w[0] < w[1]));
        for (i, &s) in sp.states().iter().enumerate() {
            assert_eq!(sp.index_of(s), Some(i));
        }
        assert!((sp.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(sp.density(), 0.5);
    }

    #[test]
    fn product_weights_sum_to_one() {
        let g = TorusGeometry::new(3, 2).unwrap();
        let sp = StateSpace::new(&g, Ensemble::Product(0.3), DEFAULT_STATE_CAP).unwrap();
        assert_eq!(sp.len(), 64);
        assert!((sp.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let f = sp.centered_occupation(4);
        assert!(sp.mean(&f).abs() < 1e-15);
        assert!((sp.inner(&f, &f) - 0.21).abs() < 1e-14);
    }

    #[test]
    fn caps_and_limits() {
        let g = TorusGeometry::new(8, 8).unwrap();
        assert_eq!(
            StateSpace::new(&g, Ensemble::Sector(32), DEFAULT_STATE_CAP).unwrap_err(),
            ExactError::TooManySites(64)
        );
        let g = TorusGeometry::new(6, 4).unwrap();
        assert!(matches!(
            StateSpace::new(&g, Ensemble::Sector(12), DEFAULT_STATE_CAP),
            Err(ExactError::StateSpaceTooLarge { size: 2_704_156, .. })
        ));
        assert!(matches!(
            StateSpace::new(&g, Ensemble::Product(0.0), DEFAULT_STATE_CAP),
            Err(ExactError::DegenerateDensity(_))
        ));
    }

    #[test]
    fn subset_counts() {
        for (n, k, c) in [(6, 0, 1), (6, 6, 1), (10, 3, 120), (12, 6, 924)] {
            assert_eq!(k_subsets(n, k).len(), c);
        }
    }
}
