use flockmf::coupling::{observable_error, Observable};
use flockmf::rng::NoisePath;
use flockmf::stochastic::{
    coupled_run, coupled_sweep, em_step, exponential_moment_c0, mv_characteristics_step, strength, CouplingConfig,
    TorusEnsemble,
};
use flockmf::{AgentEnsemble, Domain, InitialSampler, KernelSpec, ModelParams, NoiseSpec};
use proptest::prelude::*;

fn torus_params(p: f64, alpha: f64, d: usize, sigma2: f64) -> ModelParams {
    ModelParams::new(p, alpha, d).with_noise(NoiseSpec::linear(sigma2)).with_domain(Domain::unit_torus())
}

fn config(n_list: Vec<usize>, replicas: usize, t_end: f64) -> CouplingConfig {
    CouplingConfig {
        n_list,
        replicas,
        agent_budget: None,
        reference_size: 256,
        tracked: None,
        k: 1,
        dt: 0.01,
        t_end,
        sample_every: 10,
        observables: vec![Observable::VelocityComponent { axis: 0 }],
        positivity_floor: 1e-6,
        sampler: InitialSampler::boxed(0.0, 1.0, 1.0),
        seed: 99,
    }
}

#[test]
fn lone_agent_diffuses_at_the_predicted_rate() {
    // one agent sees only itself: s = φ(0) = 1, no drift, Var v(t) = 2 h(1) t
    let sigma2 = 0.5;
    let params = torus_params(2.5, 0.3, 1, sigma2);
    let (paths, steps, dt) = (10_000u64, 50u64, 0.02);
    let mut sum = 0.0;
    let mut sq = 0.0;
    for seed in 0..paths {
        let path = NoisePath::new(seed, 1, dt);
        let mut e = TorusEnsemble::new(AgentEnsemble::uniform(1, vec![0.5], vec![0.0]).unwrap(), 1.0).unwrap();
        for k in 0..steps {
            e = em_step(&e, &params, &path, k).unwrap();
        }
        let v = e.ensemble.velocities[0];
        sum += v;
        sq += v * v;
    }
    let mean = sum / paths as f64;
    let var = sq / paths as f64 - mean * mean;
    let want = 2.0 * sigma2 * steps as f64 * dt;
    assert!((var - want).abs() < 0.05 * want, "variance {var}, expected {want}");
}

#[test]
fn observable_error_at_time_zero_is_variance_over_n() {
    let params = torus_params(2.5, 0.3, 1, 0.1);
    let mut cfg = config(vec![8, 32], 4000, 0.0);
    cfg.reference_size = 20_000;
    cfg.tracked = Some(1);
    for run in coupled_sweep(&params, &cfg).unwrap() {
        let err = observable_error(&run, "velocity:0").unwrap();
        let var = run.observables[0].reference_variance[0];
        let want = var / run.n as f64;
        assert_eq!(run.times, vec![0.0]);
        assert!((err.mean[0] - want).abs() < 3.0 * err.se[0], "N {}: {} vs {want} (se {})", run.n, err.mean[0], err.se[0]);
    }
}

#[test]
fn coupling_starts_at_zero_and_repeats_exactly() {
    let params = torus_params(2.5, 0.3, 2, 0.1);
    let cfg = config(vec![16], 4, 0.2);
    let a = coupled_run(&params, &cfg).unwrap();
    assert!(a.replica_ex.iter().all(|r| r[0] == 0.0));
    assert!(a.replica_ev.iter().all(|r| r[0] == 0.0));
    assert_eq!(a.times, vec![0.0, 0.1, 0.2]);
    let b = coupled_run(&params, &cfg).unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let c = pool.install(|| coupled_run(&params, &cfg).unwrap());
    assert_eq!(a, c);
}

#[test]
fn characteristics_driven_by_the_ensemble_itself_reproduce_the_particles() {
    let params = torus_params(3.0, 0.5, 2, 0.2);
    let e = TorusEnsemble::new(InitialSampler::boxed(0.0, 1.0, 1.0).sample(12, 2, 3, &[1]), 1.0).unwrap();
    let path = NoisePath::new(5, 2, 0.01);
    let mut a = e.clone();
    let mut b = e.clone();
    for k in 0..20 {
        a = em_step(&a, &params, &path, k).unwrap();
        b = mv_characteristics_step(&b, &b, &params, &path, k).unwrap();
    }
    assert_eq!(a, b);
}

#[test]
fn noise_mismatch_martingale_has_zero_mean() {
    let params = torus_params(2.5, 0.3, 1, 0.1);
    let mut cfg = config(vec![16], 400, 0.5);
    cfg.reference_size = 128;
    let run = coupled_run(&params, &cfg).unwrap();
    let m = run.martingale().unwrap();
    for (mean, se) in m.mean.iter().zip(&m.se) {
        assert!(mean.abs() <= 3.0 * se + 1e-15, "{mean} ± {se}");
    }
    let pos = run.positivity.unwrap();
    assert_eq!(pos.violations, 0);
    assert!(pos.min_strength > 0.5);
}

#[test]
fn deterministic_sweep_has_no_martingale() {
    let params = torus_params(2.5, 0.3, 1, 0.0);
    let run = coupled_run(&params, &config(vec![8], 2, 0.1)).unwrap();
    assert!(run.martingale().is_none());
}

#[test]
fn invalid_config_names_every_field() {
    let params = ModelParams::new(2.5, 0.3, 1).with_noise(NoiseSpec::linear(0.1));
    let mut cfg = config(vec![8], 0, 1.0);
    cfg.dt = -1.0;
    let msg = coupled_sweep(&params, &cfg).unwrap_err().to_string();
    for field in ["model.domain", "run.replicas", "run.dt"] {
        assert!(msg.contains(field), "{msg}");
    }
}

#[test]
fn torus_geometry() {
    let d = Domain::unit_torus();
    assert!((d.displacement(0.9, 0.1) + 0.2).abs() < 1e-15);
    assert!((d.displacement(0.1, 0.9) - 0.2).abs() < 1e-15);
    assert!((d.wrap(-0.25) - 0.75).abs() < 1e-15);
    assert_eq!(d.wrap(1.0), 0.0);
    assert!((d.distance(&[0.95, 0.05], &[0.05, 0.95]) - 0.1f64.hypot(0.1)).abs() < 1e-14);
    let e = AgentEnsemble::uniform(1, vec![1.25], vec![0.0]).unwrap();
    assert!((TorusEnsemble::new(e, 1.0).unwrap().ensemble.positions[0] - 0.25).abs() < 1e-15);
}

#[test]
fn exponential_moment_share_is_respected() {
    let e = InitialSampler::boxed(0.0, 1.0, 2.0).sample(200, 2, 4, &[2]);
    let c0 = exponential_moment_c0(&e, 3.0, 0.1);
    assert!(c0 > 0.0 && c0.is_finite());
    let u: Vec<f64> = (0..e.n()).map(|i| e.v(i).iter().map(|c| c * c).sum::<f64>()).collect();
    let share = |c: f64| {
        let w: Vec<f64> = u.iter().map(|x| (c * x).exp()).collect();
        w.iter().copied().fold(0.0, f64::max) / w.iter().sum::<f64>()
    };
    assert!(share(c0) <= 0.1 + 1e-9);
    assert!(share(c0 * 1.01) > 0.1);
    assert_eq!(exponential_moment_c0(&e.head(5), 3.0, 0.1), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn strengths_stay_between_kernel_bounds(seed in any::<u64>(), n in 1usize..40, d in 1usize..=3, alpha in 0.0f64..1.0) {
        let k = KernelSpec::power_law(alpha);
        let e = TorusEnsemble::new(InitialSampler::boxed(0.0, 1.0, 1.0).sample(n, d, seed, &[7]), 1.0).unwrap();
        let lo = k.eval((d as f64).sqrt() / 2.0);
        for s in strength(&e, &k) {
            prop_assert!(s <= 1.0 + 1e-12 && s >= lo - 1e-12);
        }
    }

    #[test]
    fn em_keeps_positions_on_the_torus(seed in any::<u64>(), n in 1usize..10) {
        let params = torus_params(2.5, 0.3, 2, 1.0);
        let mut e = TorusEnsemble::new(InitialSampler::boxed(0.0, 1.0, 5.0).sample(n, 2, seed, &[8]), 1.0).unwrap();
        let path = NoisePath::new(seed, 2, 0.05);
        for k in 0..10 {
            e = em_step(&e, &params, &path, k).unwrap();
            prop_assert!(e.validate().is_ok());
        }
    }
}
