use asep2d_core::campaign::{run_coupled_campaign, run_exclusion_campaign, CampaignConfig, InitialLaw};
use asep2d_core::dynamics::{simulate_exclusion, verify_coupling_representation, CouplingScheme, Dynamics};
use asep2d_core::model::{sample_equilibrium, Configuration, EnsembleSpec};
use asep2d_core::observables::{fit_scaling, laplace_transform, time_grid, variance_via_kernel, ScalingModel, TimeSeries};
use asep2d_core::rng::replica_rng;
use asep2d_core::{JumpKernel, Rate, TorusGeometry};

fn drift() -> JumpKernel {
    JumpKernel::nearest_neighbor(Rate::ratio(3, 4), Rate::ratio(1, 4), Rate::ratio(1, 2), Rate::ratio(1, 4)).unwrap()
}

fn cfg(seed: u64, replicas: u64, horizon: f64, sample_times: Vec<f64>) -> CampaignConfig {
    CampaignConfig { seed, replicas, horizon, sample_times, threads: None }
}

#[test]
fn full_torus_never_moves() {
    let g = TorusGeometry::square(8).unwrap();
    let mut rng = replica_rng(1, 0);
    let times = [0.0, 1.0, 2.5];
    let tr = simulate_exclusion(Configuration::full(64), &drift(), &g, 0.25, 2.5, &times, &mut rng).unwrap();
    assert!(tr.eta0.iter().all(|&e| e == 1));
    for (a, t) in tr.occupation_time.iter().zip(times) {
        assert!((a - 0.75 * t).abs() < 1e-12);
    }
}

#[test]
fn stationary_origin_density() {
    let g = TorusGeometry::square(16).unwrap();
    let dynamics = Dynamics::new(&drift(), &g);
    let s = run_exclusion_campaign(&dynamics, InitialLaw::Bernoulli(0.3), &cfg(3, 20_000, 2.0, vec![0.0, 2.0])).unwrap();
    let occ = &s.variance.occupation;
    let z = (occ.mean[1] - 0.3) / occ.se[1];
    assert!(z.abs() < 4.0, "z = {z}");
    assert_eq!(s.variance.sigma2.mean[0], 0.0);
}

#[test]
fn free_second_class_particle_drifts() {
    // ρ = 0: R is a free p-walk with mean t·Σ z p(z).
    let g = TorusGeometry::square(64).unwrap();
    let dynamics = Dynamics::new(&drift(), &g);
    let s = run_coupled_campaign(&dynamics, 0.0, CouplingScheme::Uniformized, &cfg(4, 5_000, 4.0, vec![0.0, 4.0]), None)
        .unwrap();
    for (axis, m) in s.displacement.iter().zip([0.5, 0.25]) {
        let z = (axis.mean[1] - 4.0 * m) / axis.se[1];
        assert!(z.abs() < 4.0, "z = {z}");
    }
    assert_eq!(s.return_probability.mean[0], 1.0);
}

#[test]
fn coupling_representation_holds_event_by_event() {
    let g = TorusGeometry::new(5, 4).unwrap();
    let dynamics = Dynamics::new(&drift(), &g);
    let spec = EnsembleSpec::origin_empty(0.5).unwrap();
    let mut rng = replica_rng(5, 0);
    let xi = sample_equilibrium(&spec, &g, 11);
    assert_eq!(verify_coupling_representation(&dynamics, xi, 20_000, &mut rng).unwrap(), 20_000);
}

#[test]
fn campaigns_are_thread_count_independent() {
    let g = TorusGeometry::square(12).unwrap();
    let dynamics = Dynamics::new(&drift(), &g);
    let times = time_grid(0.01, 5.0, 1.1, &[]);
    let mut a = cfg(6, 300, 5.0, times);
    let one = run_coupled_campaign(&dynamics, 0.5, CouplingScheme::Uniformized, &a, Some(&[1.0, 5.0])).unwrap();
    a.threads = Some(3);
    let three = run_coupled_campaign(&dynamics, 0.5, CouplingScheme::Uniformized, &a, Some(&[1.0, 5.0])).unwrap();
    assert_eq!(one, three);
}

#[test]
fn kernel_identity_limits() {
    let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
    let frozen = TimeSeries::exact(times.clone(), vec![1.0; times.len()]);
    let v = variance_via_kernel(&frozen, 0.3, 10.0).unwrap();
    assert!((v - 0.21 * 100.0).abs() < 1e-9);
    assert_eq!(variance_via_kernel(&frozen, 1.0, 10.0).unwrap(), 0.0);
}

#[test]
fn laplace_of_linear_series() {
    let times: Vec<f64> = (0..=20_000).map(|k| k as f64 * 0.01).collect();
    let points = laplace_transform(&times, &times, &[0.5, 1.0], 1.0).unwrap();
    for p in points {
        let scaled = p.lambda * p.lambda * p.transform;
        assert!((scaled - 1.0).abs() < 1e-6 + p.lambda * p.lambda * p.tail_bound, "{p:?}");
    }
}

#[test]
fn synthetic_power_fit() {
    let times = time_grid(0.1, 1000.0, 1.05, &[]);
    let y: Vec<f64> = times.iter().map(|t| 3.0 * t.powf(1.5)).collect();
    let fit = fit_scaling(&TimeSeries::exact(times, y), ScalingModel::Power, (1.0, 1000.0)).unwrap();
    assert!((fit.param("alpha").unwrap().value - 1.5).abs() < 0.01);
}

#[test]
fn symmetric_return_probability_matches_walker() {
    let g = TorusGeometry::new(3, 2).unwrap();
    let k = JumpKernel::symmetric_nn();
    let dynamics = Dynamics::new(&k, &g);
    let s = run_coupled_campaign(&dynamics, 0.3, CouplingScheme::Uniformized, &cfg(9, 20_000, 2.0, vec![0.0, 1.0, 2.0]), None)
        .unwrap();
    for (i, t) in [(1, 1.0), (2, 2.0)] {
        let exact = asep2d_core::exact::operators::walker_return_probability(&g, &k, t);
        let z = (s.return_probability.mean[i] - exact) / s.return_probability.se[i];
        assert!(z.abs() < 4.0, "t = {t}: z = {z}");
    }
}
