//! Exact-law continuous-time simulation of the exclusion process and of the
//! basic coupling that carries a second-class particle.
//!
//! Both engines use one uniformized clock of total rate `N · Σ_z p(z)`. At
//! each ring a site `i` and a vector `z` are drawn with probability
//! `p(z) / Σ p` and the exchange `i → i + z` is attempted; ineffective
//! attempts are no-ops, which leaves the law of the process unchanged.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::SimError;
use crate::model::{Configuration, EnsembleSpec, JumpKernel, TorusGeometry, Vec2};
use crate::model::{sample_equilibrium_with, Conditioning};

/// Precomputed jump tables for one `(kernel, geometry)` pair. Immutable and
/// shared by all replicas.
#[derive(Clone, Debug)]
pub struct Dynamics {
    geometry: TorusGeometry,
    vectors: Vec<Vec2>,
    cumulative: Vec<f64>,
    rate_per_site: f64,
    targets: Vec<u32>,
    symmetric: bool,
    wrap_safe_side: f64,
}

/// How the coupled process is realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CouplingScheme {
    /// Full basic coupling on the uniformized clock; tracks `ξ` and `R`.
    Uniformized,
    /// Symmetric kernels only. In the stirring construction the second-class
    /// particle moves by `z` at rate `p(z)` whatever `ξ` is, so its path is
    /// drawn directly and `ξ` is not tracked.
    MarginalWalk,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimWarning {
    HorizonTooLargeForTorus { horizon: f64, side_needed: f64, side: usize },
}

/// Attempted and effective jumps per kernel vector (same order as
/// [`Dynamics::vectors`]).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventStats {
    pub attempts: Vec<u64>,
    pub effective: Vec<u64>,
}

impl EventStats {
    fn new(k: usize) -> Self {
        EventStats {
            attempts: vec![0; k],
            effective: vec![0; k],
        }
    }

    pub fn merge(&mut self, other: &EventStats) {
        if self.attempts.is_empty() {
            *self = other.clone();
            return;
        }
        for (a, b) in self.attempts.iter_mut().zip(&other.attempts) {
            *a += b;
        }
        for (a, b) in self.effective.iter_mut().zip(&other.effective) {
            *a += b;
        }
    }
}

/// Observations of one replica at the requested sample times.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Origin occupation (of `ξ` for coupled runs). Empty for marginal walks.
    pub eta0: Vec<u8>,
    /// `A(t) = ∫₀ᵗ (η₀(s) − ρ) ds`. Empty for marginal walks.
    pub occupation_time: Vec<f64>,
    /// Unwrapped second-class position. Empty for plain exclusion runs.
    pub second_class: Vec<Vec2>,
    /// Whether the second-class particle sits on the origin of the torus.
    pub at_origin: Vec<bool>,
    pub stats: EventStats,
    pub warnings: Vec<SimWarning>,
}

impl Trajectory {
    /// CSV dump with columns `t, eta0, R1, R2, A`; missing fields are blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,eta0,R1,R2,A\n");
        for (k, t) in self.times.iter().enumerate() {
            let eta = self.eta0.get(k).map(|v| v.to_string()).unwrap_or_default();
            let (r1, r2) = self
                .second_class
                .get(k)
                .map(|r| (r.x.to_string(), r.y.to_string()))
                .unwrap_or_default();
            let a = self
                .occupation_time
                .get(k)
                .map(|v| format!("{v:.12e}"))
                .unwrap_or_default();
            out.push_str(&format!("{t},{eta},{r1},{r2},{a}\n"));
        }
        out
    }
}

fn check_samples(sample_times: &[f64], horizon: f64) -> Result<(), SimError> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(SimError::InvalidHorizon(horizon));
    }
    let sorted = sample_times.windows(2).all(|w| w[0] < w[1]);
    let inside = sample_times.iter().all(|&t| (0.0..=horizon).contains(&t));
    if !(sorted && inside) {
        return Err(SimError::InvalidSampleTimes { horizon });
    }
    Ok(())
}

impl Dynamics {
    pub fn new(kernel: &JumpKernel, geometry: &TorusGeometry) -> Self {
        let vectors: Vec<Vec2> = kernel.rates().iter().map(|(z, _)| *z).collect();
        let total = kernel.total_rate();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = kernel
            .rates()
            .iter()
            .map(|(_, r)| {
                acc += r.value();
                acc / total
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        let n = geometry.sites();
        let mut targets = Vec::with_capacity(n * vectors.len());
        for site in 0..n {
            for &z in &vectors {
                targets.push(geometry.shift(site, z) as u32);
            }
        }
        Dynamics {
            geometry: *geometry,
            vectors,
            cumulative,
            rate_per_site: total,
            targets,
            symmetric: kernel.is_symmetric(),
            wrap_safe_side: TorusGeometry::wrap_safe_side(kernel, 1.0),
        }
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn vectors(&self) -> &[Vec2] {
        &self.vectors
    }

    /// Total clock rate `N · Σ p`.
    pub fn total_rate(&self) -> f64 {
        self.rate_per_site * self.geometry.sites() as f64
    }

    #[inline]
    fn draw_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.cumulative.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1)
    }

    #[inline]
    fn draw_event<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize, usize) {
        let site = rng.random_range(0..self.geometry.sites());
        let k = self.draw_vector(rng);
        let target = self.targets[site * self.vectors.len() + k] as usize;
        (site, k, target)
    }

    #[inline]
    fn waiting_time<R: Rng + ?Sized>(&self, rng: &mut R, rate: f64) -> f64 {
        let e: f64 = Exp1.sample(rng);
        e / rate
    }

    fn wrap_warning(&self, horizon: f64) -> Option<SimWarning> {
        let (l1, l2) = self.geometry.sides();
        let needed = self.wrap_safe_side * horizon;
        ((l1.min(l2) as f64) < needed).then_some(SimWarning::HorizonTooLargeForTorus {
            horizon,
            side_needed: needed,
            side: l1.min(l2),
        })
    }

    /// One replica of the exclusion process from `config`, observed at
    /// `sample_times`.
    pub fn run_exclusion<R: Rng + ?Sized>(
        &self,
        config: Configuration,
        rho: f64,
        horizon: f64,
        sample_times: &[f64],
        rng: &mut R,
    ) -> Result<Trajectory, SimError> {
        check_samples(sample_times, horizon)?;
        let mut process = ExclusionProcess::new(self, config, rho)?;
        let mut traj = Trajectory {
            times: sample_times.to_vec(),
            eta0: Vec::with_capacity(sample_times.len()),
            occupation_time: Vec::with_capacity(sample_times.len()),
            ..Default::default()
        };
        for &t in sample_times {
            process.advance(t, rng);
            traj.eta0.push(process.origin_occupation());
            traj.occupation_time.push(process.occupation_time());
        }
        process.advance(horizon, rng);
        traj.stats = process.stats;
        Ok(traj)
    }

    /// One replica of the coupled process from `(xi, R = origin)`.
    pub fn run_coupled<R: Rng + ?Sized>(
        &self,
        xi: Configuration,
        rho: f64,
        horizon: f64,
        sample_times: &[f64],
        rng: &mut R,
    ) -> Result<Trajectory, SimError> {
        check_samples(sample_times, horizon)?;
        let mut process = CoupledProcess::new(self, xi, rho)?;
        let m = sample_times.len();
        let mut traj = Trajectory {
            times: sample_times.to_vec(),
            eta0: Vec::with_capacity(m),
            occupation_time: Vec::with_capacity(m),
            second_class: Vec::with_capacity(m),
            at_origin: Vec::with_capacity(m),
            ..Default::default()
        };
        for &t in sample_times {
            process.advance(t, rng);
            traj.eta0.push(process.origin_occupation());
            traj.occupation_time.push(process.occupation_time());
            traj.second_class.push(process.second_class());
            traj.at_origin.push(process.second_class_site() == self.geometry.origin());
        }
        process.advance(horizon, rng);
        traj.stats = process.stats;
        traj.warnings.extend(self.wrap_warning(horizon));
        Ok(traj)
    }

    /// Second-class path under the stirring representation (symmetric
    /// kernels only).
    pub fn run_marginal_walk<R: Rng + ?Sized>(
        &self,
        horizon: f64,
        sample_times: &[f64],
        rng: &mut R,
    ) -> Result<Trajectory, SimError> {
        if !self.symmetric {
            return Err(SimError::NotSymmetric);
        }
        check_samples(sample_times, horizon)?;
        let k = self.vectors.len();
        let mut stats = EventStats::new(k);
        let mut site = self.geometry.origin();
        let mut pos = Vec2::ZERO;
        let mut time = 0.0;
        let mut traj = Trajectory {
            times: sample_times.to_vec(),
            ..Default::default()
        };
        let mut next = self.waiting_time(rng, self.rate_per_site);
        for &t in sample_times.iter().chain(std::iter::once(&horizon)) {
            while time + next <= t {
                time += next;
                let j = self.draw_vector(rng);
                stats.attempts[j] += 1;
                stats.effective[j] += 1;
                site = self.targets[site * k + j] as usize;
                pos = pos + self.vectors[j];
                next = self.waiting_time(rng, self.rate_per_site);
            }
            next -= t - time;
            time = t;
            if traj.second_class.len() < sample_times.len() {
                traj.second_class.push(pos);
                traj.at_origin.push(site == self.geometry.origin());
            }
        }
        traj.stats = stats;
        traj.warnings.extend(self.wrap_warning(horizon));
        Ok(traj)
    }
}

/// Exclusion process state advanced by the uniformized clock.
#[derive(Clone, Debug)]
pub struct ExclusionProcess<'d> {
    dynamics: &'d Dynamics,
    occ: Vec<u8>,
    rho: f64,
    time: f64,
    // A(t) = marked + (η₀ − ρ)(t − mark_time)
    marked: f64,
    mark_time: f64,
    stats: EventStats,
}

impl<'d> ExclusionProcess<'d> {
    pub fn new(dynamics: &'d Dynamics, config: Configuration, rho: f64) -> Result<Self, SimError> {
        let expected = dynamics.geometry.sites();
        if config.sites() != expected {
            return Err(SimError::GeometryMismatch {
                expected,
                got: config.sites(),
            });
        }
        Ok(ExclusionProcess {
            dynamics,
            occ: config.occupations().to_vec(),
            rho,
            time: 0.0,
            marked: 0.0,
            mark_time: 0.0,
            stats: EventStats::new(dynamics.vectors.len()),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn origin_occupation(&self) -> u8 {
        self.occ[0]
    }

    pub fn occupation_time(&self) -> f64 {
        self.marked + (self.occ[0] as f64 - self.rho) * (self.time - self.mark_time)
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::from_occupations(self.occ.clone())
    }

    pub fn stats(&self) -> &EventStats {
        &self.stats
    }

    /// Runs events up to time `until`. The clock is memoryless, so the draw
    /// that overshoots `until` is discarded without bias.
    pub fn advance<R: Rng + ?Sized>(&mut self, until: f64, rng: &mut R) {
        let d = self.dynamics;
        let rate = d.total_rate();
        loop {
            let dt = d.waiting_time(rng, rate);
            if self.time + dt > until {
                self.time = until.max(self.time);
                return;
            }
            self.time += dt;
            let (i, k, j) = d.draw_event(rng);
            self.stats.attempts[k] += 1;
            if self.occ[i] == 1 && self.occ[j] == 0 {
                self.stats.effective[k] += 1;
                if i == 0 || j == 0 {
                    self.marked = self.occupation_time();
                    self.mark_time = self.time;
                }
                self.occ[i] = 0;
                self.occ[j] = 1;
            }
        }
    }
}

/// Coupled state `(ξ, R)` with `ξ_R = 0`, advanced by the uniformized clock.
#[derive(Clone, Debug)]
pub struct CoupledProcess<'d> {
    dynamics: &'d Dynamics,
    occ: Vec<u8>,
    site: usize,
    pos: Vec2,
    rho: f64,
    time: f64,
    marked: f64,
    mark_time: f64,
    stats: EventStats,
}

/// What one clock ring did to the coupled state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoupledMove {
    None,
    Background,
    /// A first-class particle jumped onto `R` and pushed it to the vacated site.
    Displaced,
    /// The second-class particle jumped to an empty site.
    SecondClassJump,
}

impl<'d> CoupledProcess<'d> {
    pub fn new(dynamics: &'d Dynamics, xi: Configuration, rho: f64) -> Result<Self, SimError> {
        let expected = dynamics.geometry.sites();
        if xi.sites() != expected {
            return Err(SimError::GeometryMismatch {
                expected,
                got: xi.sites(),
            });
        }
        if xi.is_occupied(dynamics.geometry.origin()) {
            return Err(SimError::OriginOccupied);
        }
        Ok(CoupledProcess {
            dynamics,
            occ: xi.occupations().to_vec(),
            site: dynamics.geometry.origin(),
            pos: Vec2::ZERO,
            rho,
            time: 0.0,
            marked: 0.0,
            mark_time: 0.0,
            stats: EventStats::new(dynamics.vectors.len()),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn background(&self) -> &[u8] {
        &self.occ
    }

    pub fn second_class(&self) -> Vec2 {
        self.pos
    }

    pub fn second_class_site(&self) -> usize {
        self.site
    }

    pub fn origin_occupation(&self) -> u8 {
        self.occ[0]
    }

    pub fn occupation_time(&self) -> f64 {
        self.marked + (self.occ[0] as f64 - self.rho) * (self.time - self.mark_time)
    }

    #[inline]
    fn apply(&mut self, i: usize, k: usize, j: usize) -> CoupledMove {
        let r = self.site;
        let z = self.dynamics.vectors[k];
        if i == j {
            return CoupledMove::None;
        }
        let mv = if j == r {
            if self.occ[i] == 1 {
                self.occ[i] = 0;
                self.occ[r] = 1;
                self.site = i;
                self.pos = self.pos - z;
                CoupledMove::Displaced
            } else {
                CoupledMove::None
            }
        } else if i == r {
            if self.occ[j] == 0 {
                self.site = j;
                self.pos = self.pos + z;
                CoupledMove::SecondClassJump
            } else {
                CoupledMove::None
            }
        } else if self.occ[i] == 1 && self.occ[j] == 0 {
            self.occ[i] = 0;
            self.occ[j] = 1;
            CoupledMove::Background
        } else {
            CoupledMove::None
        };
        if mv != CoupledMove::None {
            self.stats.effective[k] += 1;
        }
        mv
    }

    /// Runs events up to time `until` (see [`ExclusionProcess::advance`]).
    pub fn advance<R: Rng + ?Sized>(&mut self, until: f64, rng: &mut R) {
        let d = self.dynamics;
        let rate = d.total_rate();
        loop {
            let dt = d.waiting_time(rng, rate);
            if self.time + dt > until {
                self.time = until.max(self.time);
                return;
            }
            self.time += dt;
            let (i, k, j) = d.draw_event(rng);
            self.stats.attempts[k] += 1;
            let before = self.occ[0];
            let a_now = self.occupation_time();
            self.apply(i, k, j);
            if self.occ[0] != before {
                self.marked = a_now;
                self.mark_time = self.time;
            }
        }
    }

    /// Applies one explicit attempt `(site, vector index)`; used to replay a
    /// shared event stream.
    pub fn attempt(&mut self, site: usize, k: usize) -> CoupledMove {
        let j = self.dynamics.targets[site * self.dynamics.vectors.len() + k] as usize;
        self.stats.attempts[k] += 1;
        self.apply(site, k, j)
    }
}

/// `simulate_exclusion`: one replica from `config` with a fresh table build.
pub fn simulate_exclusion<R: Rng + ?Sized>(
    config: Configuration,
    kernel: &JumpKernel,
    geometry: &TorusGeometry,
    rho: f64,
    horizon: f64,
    sample_times: &[f64],
    rng: &mut R,
) -> Result<Trajectory, SimError> {
    Dynamics::new(kernel, geometry).run_exclusion(config, rho, horizon, sample_times, rng)
}

/// `simulate_coupled`: samples `ξ ~ P_ρ(· | η₀ = 0)`, inserts the
/// second-class particle at the origin and runs the coupling.
pub fn simulate_coupled<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    dynamics: &Dynamics,
    horizon: f64,
    sample_times: &[f64],
    scheme: CouplingScheme,
    rng: &mut R,
) -> Result<Trajectory, SimError> {
    match scheme {
        CouplingScheme::Uniformized => {
            let spec = EnsembleSpec::new(spec.rho(), Conditioning::OriginEmpty)
                .expect("density already validated");
            let xi = sample_equilibrium_with(&spec, dynamics.geometry(), rng);
            dynamics.run_coupled(xi, spec.rho(), horizon, sample_times, rng)
        }
        CouplingScheme::MarginalWalk => dynamics.run_marginal_walk(horizon, sample_times, rng),
    }
}

/// Runs the two first-class systems `η = ξ` and `η' = ξ + δ₀` of the basic
/// coupling next to the coupled state `(ξ, R)`, all driven by one event
/// stream, and checks after every event that `η' − η = δ_R` and `η = ξ`.
/// Returns the number of events checked.
pub fn verify_coupling_representation<R: Rng + ?Sized>(
    dynamics: &Dynamics,
    xi: Configuration,
    events: u64,
    rng: &mut R,
) -> Result<u64, SimError> {
    let mut coupled = CoupledProcess::new(dynamics, xi.clone(), 0.5)?;
    let mut eta = xi.occupations().to_vec();
    let mut eta_prime = eta.clone();
    eta_prime[dynamics.geometry.origin()] = 1;
    let exchange = |occ: &mut [u8], i: usize, j: usize| {
        if occ[i] == 1 && occ[j] == 0 {
            occ[i] = 0;
            occ[j] = 1;
        }
    };
    for event in 0..events {
        let (i, k, j) = dynamics.draw_event(rng);
        exchange(&mut eta, i, j);
        exchange(&mut eta_prime, i, j);
        coupled.attempt(i, k);
        let r = coupled.second_class_site();
        let mut diff_sites = eta
            .iter()
            .zip(&eta_prime)
            .enumerate()
            .filter(|(_, (a, b))| a != b);
        let first = diff_sites.next();
        let ok = match (first, diff_sites.next()) {
            (Some((site, (&0, &1))), None) => site == r,
            _ => false,
        };
        if !ok {
            return Err(SimError::CouplingMismatch {
                event,
                message: "η' − η is not δ_R".into(),
            });
        }
        if eta != coupled.background() {
            return Err(SimError::CouplingMismatch {
                event,
                message: "η differs from ξ".into(),
            });
        }
    }
    Ok(events)
}
