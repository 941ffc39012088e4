//! Replica campaigns with a deterministic reduction.
//!
//! Replicas are grouped into fixed-size chunks by index. Each chunk is
//! reduced sequentially into its own accumulator, and the chunk accumulators
//! are folded in chunk order. The floating-point summation order therefore
//! depends only on the chunk size, never on the number of threads.

use crate::dynamics::{CouplingScheme, Dynamics, EventStats, SimWarning};
use crate::error::Error;
use crate::model::{sample_canonical, sample_equilibrium_with, Conditioning, EnsembleSpec};
use crate::observables::{
    KernelVarianceAccumulator, PowerSums, ReturnCounts, TimeSeries, VarianceEstimate,
};
use crate::rng::replica_rng;

/// Replicas per reduction chunk.
pub const CHUNK_SIZE: u64 = 256;

/// Environment variable that fixes the worker thread count.
pub const THREADS_ENV: &str = "ASEP2D_THREADS";

/// Reduces replicas `0..replicas` chunk by chunk. `step` folds replica `r`
/// into an accumulator created by `init`; `merge` folds chunk results in
/// chunk order. `threads = None` reads [`THREADS_ENV`] and falls back to
/// the rayon default.
pub fn reduce_replicas<A, E, I, S, M>(
    replicas: u64,
    threads: Option<usize>,
    init: I,
    step: S,
    mut merge: M,
) -> Result<A, E>
where
    A: Send,
    E: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64) -> Result<(), E> + Sync,
    M: FnMut(&mut A, A) -> Result<(), E>,
{
    let chunks = replicas.div_ceil(CHUNK_SIZE);
    let run_chunk = |c: u64| -> Result<A, E> {
        let mut acc = init();
        for r in c * CHUNK_SIZE..((c + 1) * CHUNK_SIZE).min(replicas) {
            step(&mut acc, r)?;
        }
        Ok(acc)
    };
    let parts = map_chunks(chunks, threads, &run_chunk);
    let mut total = init();
    for part in parts {
        merge(&mut total, part?)?;
    }
    Ok(total)
}

#[cfg(feature = "parallel")]
fn map_chunks<A: Send, F: Fn(u64) -> A + Sync>(chunks: u64, threads: Option<usize>, f: &F) -> Vec<A> {
    use rayon::prelude::*;
    let threads = threads.or_else(|| std::env::var(THREADS_ENV).ok()?.parse().ok());
    let work = || (0..chunks).into_par_iter().map(f).collect();
    match threads {
        Some(1) => (0..chunks).map(f).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(work))
            .unwrap_or_else(|_| (0..chunks).map(f).collect()),
        None => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<A, F: Fn(u64) -> A>(chunks: u64, _threads: Option<usize>, f: &F) -> Vec<A> {
    (0..chunks).map(f).collect()
}

/// Initial law for exclusion campaigns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialLaw {
    /// Product Bernoulli measure.
    Bernoulli(f64),
    /// Uniform over configurations with exactly `k` particles; `A` is
    /// centered at `k / N`.
    Canonical(usize),
}

impl InitialLaw {
    pub fn density(self, sites: usize) -> f64 {
        match self {
            InitialLaw::Bernoulli(rho) => rho,
            InitialLaw::Canonical(k) => k as f64 / sites as f64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CampaignConfig {
    pub seed: u64,
    pub replicas: u64,
    pub horizon: f64,
    pub sample_times: Vec<f64>,
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExclusionSummary {
    pub variance: VarianceEstimate,
    pub stats: EventStats,
}

#[derive(Clone, Debug, Default)]
struct ExclusionAcc {
    a: PowerSums,
    eta: PowerSums,
    stats: EventStats,
}

/// Runs `replicas` exclusion trajectories and estimates `σ²_t`.
pub fn run_exclusion_campaign(
    dynamics: &Dynamics,
    law: InitialLaw,
    cfg: &CampaignConfig,
) -> Result<ExclusionSummary, Error> {
    let geometry = dynamics.geometry();
    let rho = law.density(geometry.sites());
    let spec = match law {
        InitialLaw::Bernoulli(rho) => Some(EnsembleSpec::bernoulli(rho)?),
        InitialLaw::Canonical(_) => None,
    };
    let m = cfg.sample_times.len();
    let acc = reduce_replicas(
        cfg.replicas,
        cfg.threads,
        || ExclusionAcc {
            a: PowerSums::new(m),
            eta: PowerSums::new(m),
            stats: EventStats::default(),
        },
        |acc, r| -> Result<(), Error> {
            let mut rng = replica_rng(cfg.seed, r);
            let config = match (law, &spec) {
                (InitialLaw::Canonical(k), _) => sample_canonical(geometry, k, &mut rng)?,
                (_, Some(spec)) => sample_equilibrium_with(spec, geometry, &mut rng),
                _ => unreachable!(),
            };
            let tr = dynamics.run_exclusion(config, rho, cfg.horizon, &cfg.sample_times, &mut rng)?;
            acc.a.push(&tr.occupation_time)?;
            let eta: Vec<f64> = tr.eta0.iter().map(|&e| e as f64).collect();
            acc.eta.push(&eta)?;
            acc.stats.merge(&tr.stats);
            Ok(())
        },
        |total, part| -> Result<(), Error> {
            total.a.merge(&part.a)?;
            total.eta.merge(&part.eta)?;
            total.stats.merge(&part.stats);
            Ok(())
        },
    )?;
    Ok(ExclusionSummary {
        variance: VarianceEstimate {
            sigma2: acc.a.second_moment_series(&cfg.sample_times)?,
            centered: acc.a.centered_second_moment(),
            occupation: acc.eta.mean_series(&cfg.sample_times)?,
        },
        stats: acc.stats,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSummary {
    pub return_probability: TimeSeries,
    /// Mean of the unwrapped second-class position, per axis.
    pub displacement: [TimeSeries; 2],
    /// Kernel-identity `σ²_t` at the requested evaluation times.
    pub kernel_variance: Option<TimeSeries>,
    pub stats: EventStats,
    pub warnings: Vec<SimWarning>,
}

#[derive(Clone, Debug)]
struct CoupledAcc {
    returns: ReturnCounts,
    r1: PowerSums,
    r2: PowerSums,
    kernel: Option<KernelVarianceAccumulator>,
    stats: EventStats,
    warnings: Vec<SimWarning>,
}

/// Runs `replicas` coupled trajectories from `P_ρ(· | η₀ = 0)` with the
/// second-class particle at the origin. With `kernel_eval_times`, also
/// accumulates the kernel-identity reconstruction of `σ²_t` at those times.
pub fn run_coupled_campaign(
    dynamics: &Dynamics,
    rho: f64,
    scheme: CouplingScheme,
    cfg: &CampaignConfig,
    kernel_eval_times: Option<&[f64]>,
) -> Result<CoupledSummary, Error> {
    let spec = EnsembleSpec::new(rho, Conditioning::OriginEmpty)?;
    let m = cfg.sample_times.len();
    let kernel_template = kernel_eval_times
        .map(|ev| KernelVarianceAccumulator::new(&cfg.sample_times, rho, ev))
        .transpose()?;
    let acc = reduce_replicas(
        cfg.replicas,
        cfg.threads,
        || CoupledAcc {
            returns: ReturnCounts::new(m),
            r1: PowerSums::new(m),
            r2: PowerSums::new(m),
            kernel: kernel_template.clone(),
            stats: EventStats::default(),
            warnings: Vec::new(),
        },
        |acc, r| -> Result<(), Error> {
            let mut rng = replica_rng(cfg.seed, r);
            let tr = crate::dynamics::simulate_coupled(
                &spec,
                dynamics,
                cfg.horizon,
                &cfg.sample_times,
                scheme,
                &mut rng,
            )?;
            acc.returns.push(&tr.at_origin)?;
            let x: Vec<f64> = tr.second_class.iter().map(|v| v.x as f64).collect();
            let y: Vec<f64> = tr.second_class.iter().map(|v| v.y as f64).collect();
            acc.r1.push(&x)?;
            acc.r2.push(&y)?;
            if let Some(k) = acc.kernel.as_mut() {
                k.push(&tr.at_origin)?;
            }
            acc.stats.merge(&tr.stats);
            if acc.warnings.is_empty() {
                acc.warnings = tr.warnings;
            }
            Ok(())
        },
        |total, part| -> Result<(), Error> {
            total.returns.merge(&part.returns)?;
            total.r1.merge(&part.r1)?;
            total.r2.merge(&part.r2)?;
            if let (Some(a), Some(b)) = (total.kernel.as_mut(), part.kernel.as_ref()) {
                a.merge(b)?;
            }
            total.stats.merge(&part.stats);
            if total.warnings.is_empty() {
                total.warnings = part.warnings;
            }
            Ok(())
        },
    )?;
    let kernel_variance = match (&acc.kernel, kernel_eval_times) {
        (Some(k), Some(ev)) => Some(k.series(ev)?),
        _ => None,
    };
    Ok(CoupledSummary {
        return_probability: acc.returns.series(&cfg.sample_times)?,
        displacement: [
            acc.r1.mean_series(&cfg.sample_times)?,
            acc.r2.mean_series(&cfg.sample_times)?,
        ],
        kernel_variance,
        stats: acc.stats,
        warnings: acc.warnings,
    })
}
