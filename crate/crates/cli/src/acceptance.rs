//! Acceptance criteria AC1–AC13 and the `verify` suites built from them.

use std::path::Path;

use flockmf::dynamics::{simulate, OutputPolicy, SimOptions};
use flockmf::kernels::{alignment_eval, monotonicity_gap, pair_monotonicity_gap, AlignmentSpec};
use flockmf::metrics::{wasserstein1, wasserstein2, PointCloud};
use flockmf::ode::StepControl;
use flockmf::rng::{stream, NoisePath};
use flockmf::stochastic::{em_step, TorusEnsemble};
use flockmf::{AgentEnsemble, Domain, InitialSampler, ModelParams, NoiseSpec};
use rand::Rng;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiments::execute;
use crate::run::Check;
use crate::{run_experiment, RunOptions};

/// Deliberate defects for checking that the suite notices them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
pub enum Mutation {
    None,
    /// Replace `A(v)` by `−A(v)` in the inequality checks.
    FlipAlignmentSign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
pub enum Suite {
    Fast,
    Full,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        let tail = if failed.is_empty() { String::new() } else { format!(" [failed: {}]", failed.join(", ")) };
        format!("{} {}: {} ({} checks, {:.1}s){tail}", self.id, if self.passed { "PASS" } else { "FAIL" }, self.title, self.checks.len(), self.seconds)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub mutation: Mutation,
    pub results: Vec<CriterionResult>,
    pub passed: bool,
}

pub struct Criterion {
    pub id: &'static str,
    pub title: &'static str,
    run: fn(Mutation) -> Vec<Check>,
}

impl Criterion {
    pub fn evaluate(&self, m: Mutation) -> CriterionResult {
        let t0 = std::time::Instant::now();
        let checks = (self.run)(m);
        CriterionResult {
            id: self.id.into(),
            title: self.title.into(),
            passed: !checks.is_empty() && checks.iter().all(|c| c.passed),
            seconds: t0.elapsed().as_secs_f64(),
            checks,
        }
    }
}

/// All thirteen criteria at their stated tolerances.
pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: "AC1", title: "two-particle closed form", run: ac1 },
        Criterion { id: "AC2", title: "alignment rate table", run: ac2 },
        Criterion { id: "AC3", title: "flocking plateau for 2 < p < 3", run: ac3 },
        Criterion { id: "AC4", title: "velocity-diameter maximum principle", run: ac4 },
        Criterion { id: "AC5", title: "vector inequality suite", run: ac5 },
        Criterion { id: "AC6", title: "exact transport oracle", run: ac6 },
        Criterion { id: "AC7", title: "propagation-of-chaos scaling", run: ac7 },
        Criterion { id: "AC8", title: "potential and kinetic envelopes", run: ac8 },
        Criterion { id: "AC9", title: "comparison-lemma grid", run: ac9 },
        Criterion { id: "AC10", title: "stochastic baseline", run: ac10 },
        Criterion { id: "AC11", title: "stochastic coupling decay", run: ac11 },
        Criterion { id: "AC12", title: "stability regimes", run: ac12 },
        Criterion { id: "AC13", title: "reproducibility", run: ac13 },
    ]
}

/// Minutes-scale subset: inequalities, transport, two particles, a lemma
/// grid slice and a quick reproducibility check.
fn fast_criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: "AC1", title: "two-particle closed form", run: ac1 },
        Criterion { id: "AC5", title: "vector inequality suite", run: ac5 },
        Criterion { id: "AC6", title: "exact transport oracle", run: ac6 },
        Criterion { id: "AC9-slice", title: "comparison-lemma grid (short horizon)", run: ac9_slice },
        Criterion { id: "AC13", title: "reproducibility", run: ac13 },
    ]
}

pub fn verify_all(suite: Suite, mutation: Mutation, mut progress: impl FnMut(&CriterionResult)) -> VerifyReport {
    let list = match suite {
        Suite::Fast => fast_criteria(),
        Suite::Full => criteria(),
    };
    let results: Vec<CriterionResult> = list
        .iter()
        .map(|c| {
            let r = c.evaluate(mutation);
            progress(&r);
            r
        })
        .collect();
    let passed = results.iter().all(|r| r.passed);
    VerifyReport { suite, mutation, results, passed }
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap_or_else(|e| panic!("built-in config is invalid: {e}"))
}

fn run_checks(cfg: &ExperimentConfig) -> Vec<Check> {
    match execute(cfg) {
        Ok(out) => out.checks,
        Err(e) => vec![Check::new("run", false, f64::NAN, "completes", e.to_string())],
    }
}

fn select(checks: Vec<Check>, names: &[&str]) -> Vec<Check> {
    let mut out: Vec<Check> = checks.into_iter().filter(|c| names.iter().any(|n| c.name.starts_with(n))).collect();
    for n in names {
        if !out.iter().any(|c| c.name.starts_with(n)) {
            out.push(Check::new(n, false, f64::NAN, "present", "check was not produced"));
        }
    }
    out
}

fn prefixed(p: &str, checks: Vec<Check>) -> Vec<Check> {
    checks.into_iter().map(|mut c| {
        c.name = format!("{p}/{}", c.name);
        c
    }).collect()
}

fn ac1(_: Mutation) -> Vec<Check> {
    let mut out = Vec::new();
    for p in [2.5, 3.0, 4.0] {
        let cfg = config(&format!(
            r#"experiment = "simulate"
seed = 1
[model]
p = {p}
alpha = 0.0
d = 2
[run]
n = 2
t_end = 100.0
[output]
sampling = {{ kind = "times", times = [1.0, 10.0, 100.0] }}
"#
        ));
        out.extend(prefixed(&format!("p={p}"), select(run_checks(&cfg), &["two_particle_closed_form"])));
    }
    out
}

fn rates_config(p: f64, alpha: f64, tol: f64, lo: f64, hi: f64, seed: u64) -> ExperimentConfig {
    config(&format!(
        r#"experiment = "flocking_rates"
seed = {seed}
[model]
p = {p}
alpha = {alpha}
d = 2
[initial]
positions = {{ kind = "uniform_box", lo = {lo}, hi = {hi} }}
velocities = {{ kind = "uniform_ball", radius = 1.0 }}
center_velocities = true
[run]
n = 64
t_end = 1000.0
rate_tolerance = {tol}
"#
    ))
}

fn ac2(_: Mutation) -> Vec<Check> {
    let mut out = prefixed("p=2.5,alpha=0.25", select(run_checks(&rates_config(2.5, 0.25, 0.10, 0.0, 1.0, 11)), &["v_exponent"]));
    out.extend(prefixed("p=4,alpha=0", select(run_checks(&rates_config(4.0, 0.0, 0.15, 0.0, 1.0, 11)), &["v_exponent"])));
    out.extend(prefixed("p=3,alpha=0", select(run_checks(&rates_config(3.0, 0.0, 0.10, 0.0, 1.0, 11)), &["compensated_slope"])));
    out
}

fn ac3(_: Mutation) -> Vec<Check> {
    select(run_checks(&rates_config(2.5, 0.25, 0.10, 0.0, 50.0, 13)), &["spatial_plateau"])
}

fn ac4(_: Mutation) -> Vec<Check> {
    let mut rng = stream(4, &[]);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for run in 0..50u64 {
        let p = rng.random_range(2.0..5.0);
        let alpha = rng.random_range(0.0..0.95);
        let d = rng.random_range(1..=3usize);
        let n = rng.random_range(2..=40usize);
        let init = InitialSampler::boxed(0.0, rng.random_range(0.5..5.0), rng.random_range(0.1..2.0)).sample(n, d, 4, &[run]);
        let rec = simulate(
            &init,
            &ModelParams::new(p, alpha, d),
            50.0,
            &OutputPolicy::Log { samples: 100, t_min: 0.01 },
            &SimOptions::with_control(StepControl::adaptive(1e-10, 1e-14)),
        );
        match rec {
            Ok(r) => worst = worst.max(r.velocity().windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)),
            Err(_) => failures += 1,
        }
    }
    vec![
        Check::at_most("max_velocity_diameter_increase", worst, 1e-9, "V(t) <= V(0), 50 random runs"),
        Check::at_most("failed_runs", failures as f64, 0.0, "every run completes"),
    ]
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `monotonicity_gap`, or its value with `A` negated under the mutation.
fn gap(a: &[f64], b: &[f64], c: &[f64], p: f64, m: Mutation) -> f64 {
    match m {
        Mutation::None => monotonicity_gap(a, b, c, p).unwrap(),
        Mutation::FlipAlignmentSign => {
            let spec = AlignmentSpec::new(p).unwrap();
            let ac = alignment_eval(&spec, &sub(a, c)).unwrap();
            let bc = alignment_eval(&spec, &sub(b, c)).unwrap();
            let ab = sub(a, b);
            -ab.iter().zip(ac.iter().zip(&bc)).map(|(d, (x, y))| d * (x - y)).sum::<f64>() - spec.c_p() * norm(&ab).powf(p)
        }
    }
}

fn pair_gap(x: &[f64], y: &[f64], p: f64, m: Mutation) -> f64 {
    match m {
        Mutation::None => pair_monotonicity_gap(x, y, p).unwrap(),
        _ => gap(x, y, &vec![0.0; x.len()], p, m),
    }
}

fn ac5(m: Mutation) -> Vec<Check> {
    let mut rng = stream(5, &[]);
    let samples = 100_000;
    let (mut worst3, mut worst2, mut eq_same, mut eq_mid) = (f64::INFINITY, f64::INFINITY, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let d = rng.random_range(1..=3usize);
        let p = rng.random_range(2.0..6.0);
        let mut v = || (0..d).map(|_| rng.random_range(-5.0..5.0)).collect::<Vec<f64>>();
        let (a, b, c) = (v(), v(), v());
        let scale = 1.0 + norm(&sub(&a, &b)).powf(p);
        worst3 = worst3.min(gap(&a, &b, &c, p, m) / scale);
        worst2 = worst2.min(pair_gap(&a, &b, p, m) / scale);
        eq_same = eq_same.max(gap(&a, &a, &c, p, m).abs());
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        eq_mid = eq_mid.max(gap(&a, &b, &mid, p, m).abs() / scale);
    }
    vec![
        Check::new("monotonicity_gap", worst3 >= -1e-9, worst3, ">= -1e-9 (1 + |a-b|^p)", "1e5 samples, p in [2, 6]"),
        Check::new("pair_monotonicity_gap", worst2 >= -1e-9, worst2, ">= -1e-9 (1 + |x-y|^p)", "1e5 samples, p in [2, 6]"),
        Check::at_most("equality_a_equals_b", eq_same, 1e-10, "gap = 0 when a = b"),
        Check::at_most("equality_c_midpoint", eq_mid, 1e-10, "gap = 0 when c = (a+b)/2"),
    ]
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for slot in 0..n {
            let mut q = p.clone();
            q.insert(slot, n - 1);
            out.push(q);
        }
    }
    out
}

fn ac6(_: Mutation) -> Vec<Check> {
    let mut rng = stream(6, &[]);
    let mut cloud = |n: usize, d: usize| PointCloud::uniform(d, (0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
    let mut oracle_err: f64 = 0.0;
    for k in 0..200 {
        let (n, d) = (1 + k % 7, 1 + k % 3);
        let (a, b) = (cloud(n, d), cloud(n, d));
        let (mut best1, mut best2) = (f64::INFINITY, f64::INFINITY);
        for perm in permutations(n) {
            let dist: Vec<f64> = (0..n).map(|i| norm(&sub(a.point(i), b.point(perm[i])))).collect();
            best1 = best1.min(dist.iter().sum::<f64>() / n as f64);
            best2 = best2.min(dist.iter().map(|x| x * x).sum::<f64>() / n as f64);
        }
        oracle_err = oracle_err.max((wasserstein1(&a, &b).unwrap() - best1).abs());
        oracle_err = oracle_err.max((wasserstein2(&a, &b).unwrap().powi(2) - best2).abs());
    }
    let mut axiom: f64 = 0.0;
    for k in 0..1000 {
        let (n, d) = (1 + k % 6, 1 + k % 3);
        let (a, b, c) = (cloud(n, d), cloud(n, d), cloud(n, d));
        for w in [wasserstein1, wasserstein2] {
            let (ab, ba, ac, cb) = (w(&a, &b).unwrap(), w(&b, &a).unwrap(), w(&a, &c).unwrap(), w(&c, &b).unwrap());
            axiom = axiom.max(w(&a, &a).unwrap().abs()).max((ab - ba).abs()).max(ab - ac - cb).max(-ab);
        }
    }
    vec![
        Check::at_most("permutation_oracle", oracle_err, 1e-10, "200 instances, n <= 7"),
        Check::at_most("metric_axioms", axiom, 1e-10, "identity, symmetry, triangle on 1000 triples"),
    ]
}

fn ac7(_: Mutation) -> Vec<Check> {
    let times: Vec<String> = (1..=20).map(|k| format!("{}", k as f64 * 0.05)).collect();
    let cfg = config(&format!(
        r#"experiment = "poc"
seed = 7
[model]
p = 2.5
alpha = 0.25
d = 1
[run]
n_list = [64, 128, 256, 512]
replicas = 32
reference_size = 4096
t_end = 1.0
scheme = "rk4"
dt = 0.05
times = [{}]
fit_times = [1.0]
"#,
        times.join(", ")
    ));
    select(run_checks(&cfg), &["proxy_slope", "initial_coupling_zero"])
}

fn ac8(_: Mutation) -> Vec<Check> {
    let mut times: Vec<String> = (0..60).map(|k| format!("{:e}", 10f64.powf(-1.0 + 4.0 * k as f64 / 60.0))).collect();
    times.push("1000.0".into());
    let cfg = config(&format!(
        r#"experiment = "poc"
seed = 8
[model]
p = 2.5
alpha = 0.25
d = 1
[run]
n_list = [64]
replicas = 8
reference_size = 512
t_end = 1000.0
rtol = 1e-8
atol = 1e-10
times = [{}]
fit_times = [1000.0]
"#,
        times.join(", ")
    ));
    select(run_checks(&cfg), &["potential_growth", "kinetic_bounded"])
}

fn lemma_config(t_end: f64, samples: usize) -> ExperimentConfig {
    config(&format!(
        r#"experiment = "lemma_lab"
seed = 9
[model]
p = 2.5
alpha = 0.25
d = 1
[run]
t_end = {t_end}
grid_samples = {samples}
"#
    ))
}

fn ac9(_: Mutation) -> Vec<Check> {
    run_checks(&lemma_config(50.0, 201))
}

fn ac9_slice(_: Mutation) -> Vec<Check> {
    run_checks(&lemma_config(10.0, 41))
}

fn ac10(_: Mutation) -> Vec<Check> {
    let cfg = config(
        r#"experiment = "stochastic_coupling"
seed = 10
[model]
p = 2.5
alpha = 0.25
d = 1
sigma2 = 0.1
domain = { kind = "torus", period = 1.0 }
[run]
n_list = [16, 64]
replicas = 10000
reference_size = 20000
tracked = 1
t_end = 0.01
dt = 0.01
sample_every = 1
fit_times = [0.0]
observables = ["velocity:0", "position_cos:0", "bump:0.5"]
"#,
    );
    let mut out = select(run_checks(&cfg), &["variance_identity"]);
    let sigma2 = 0.5;
    let params = ModelParams::new(2.5, 0.3, 1).with_noise(NoiseSpec::linear(sigma2)).with_domain(Domain::unit_torus());
    let (paths, steps, dt) = (10_000u64, 50u64, 0.02);
    let (mut s1, mut s2) = (0.0, 0.0);
    for seed in 0..paths {
        let path = NoisePath::new(flockmf::rng::split(10, &[seed]), 1, dt);
        let mut e = TorusEnsemble::new(AgentEnsemble::uniform(1, vec![0.5], vec![0.0]).unwrap(), 1.0).unwrap();
        for k in 0..steps {
            e = em_step(&e, &params, &path, k).unwrap();
        }
        let v = e.ensemble.velocities[0];
        s1 += v;
        s2 += v * v;
    }
    let var = s2 / paths as f64 - (s1 / paths as f64).powi(2);
    let want = 2.0 * sigma2 * steps as f64 * dt;
    out.push(Check::at_most("single_agent_diffusion", (var - want).abs() / want, 0.05, "Var v(t) = 2 h(1) t"));
    out
}

fn ac11(_: Mutation) -> Vec<Check> {
    let cfg = config(
        r#"experiment = "stochastic_coupling"
seed = 11
[model]
p = 2.5
alpha = 0.25
d = 1
sigma2 = 0.1
domain = { kind = "torus", period = 1.0 }
[run]
n_list = [64, 256, 1024]
replicas = 4
agent_budget = 8192
reference_size = 4096
tracked = 256
t_end = 4.0
dt = 0.01
sample_every = 20
fit_times = [1.0, 4.0]
"#,
    );
    select(run_checks(&cfg), &["decreasing_in_n_t1", "exponent_degrades"])
}

fn ac12(_: Mutation) -> Vec<Check> {
    let fat = config(
        r#"experiment = "stability"
seed = 3
[model]
p = 2.5
alpha = 0.25
d = 2
[run]
n = 64
t_end = 100.0
window = [1.0, 100.0]
pairing = { kind = "velocity_shift", shift = 0.1 }
[output]
sampling = { kind = "log", samples = 60, t_min = 0.1 }
"#,
    );
    let general = config(
        r#"experiment = "stability"
seed = 4
[model]
p = 2.5
alpha = 0.0
d = 2
kernel = { kind = "custom_table", radii = [0.0, 0.5, 1.0], values = [1.0, 1.0, 0.0] }
[run]
n = 64
t_end = 20.0
pairing = { kind = "independent" }
[output]
sampling = { kind = "linear", samples = 41 }
"#,
    );
    let mut out = prefixed("fat_tail", select(run_checks(&fat), &["stability_envelope"]));
    out.extend(prefixed("general_kernel", select(run_checks(&general), &["stability_envelope"])));
    out
}

fn digest_with_threads(cfg: &ExperimentConfig, threads: usize, root: &Path) -> Result<String, String> {
    let mut c = cfg.clone();
    c.threads = Some(threads);
    let dir = root.join(format!("t{threads}-{}", std::process::id()));
    run_experiment(&c, &dir, &RunOptions { force: true }).map(|(m, _)| m.output_digest()).map_err(|e| e.to_string())
}

fn ac13(_: Mutation) -> Vec<Check> {
    let sim = config(
        r#"experiment = "simulate"
seed = 13
[model]
p = 3.0
alpha = 0.5
d = 2
[run]
n = 48
t_end = 10.0
[output]
sampling = { kind = "linear", samples = 21 }
snapshots = true
"#,
    );
    let poc = config(
        r#"experiment = "poc"
seed = 13
[model]
p = 2.5
alpha = 0.25
d = 2
[run]
n_list = [8, 16, 32]
replicas = 6
reference_size = 128
t_end = 1.0
scheme = "rk4"
dt = 0.05
times = [0.5, 1.0]
fit_times = [1.0]
"#,
    );
    let root = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return vec![Check::new("tempdir", false, f64::NAN, "created", e.to_string())],
    };
    let mut out = Vec::new();
    for (name, cfg) in [("simulate", &sim), ("poc", &poc)] {
        let runs: Vec<Result<String, String>> =
            [1, 4, 1].iter().enumerate().map(|(k, t)| digest_with_threads(cfg, *t, &root.path().join(k.to_string()))).collect();
        let ok = runs.iter().all(|r| r.is_ok()) && runs.windows(2).all(|w| w[0] == w[1]);
        let detail = runs.iter().map(|r| match r {
            Ok(h) => h[..12].to_string(),
            Err(e) => e.clone(),
        });
        out.push(Check::new(
            &format!("{name}_output_hash"),
            ok,
            if ok { 0.0 } else { 1.0 },
            "identical across reruns and 1 vs 4 threads",
            detail.collect::<Vec<_>>().join(" "),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flipped_alignment_is_caught() {
        let checks = ac5(Mutation::FlipAlignmentSign);
        assert!(!checks.iter().find(|c| c.name == "monotonicity_gap").unwrap().passed);
        assert!(!checks.iter().find(|c| c.name == "pair_monotonicity_gap").unwrap().passed);
    }

    #[test]
    fn two_particle_criterion_passes() {
        let r = criteria()[0].evaluate(Mutation::None);
        assert!(r.passed, "{}", r.line());
        assert_eq!(r.checks.len(), 3);
    }

    #[test]
    fn missing_checks_fail() {
        let c = select(Vec::new(), &["x"]);
        assert_eq!(c.len(), 1);
        assert!(!c[0].passed);
    }
}
