//! Euler–Maruyama integration of the noisy alignment system on the torus,
//!
//! `dx_i = v_i dt`, `dv_i = Σ_j w_j φ(|x_i − x_j|) A(v_j − v_i) dt + √(2 h(s_i)) dW_i`,
//!
//! with strength `s_i = Σ_j w_j φ(|x_i − x_j|)`, and of the McKean–Vlasov
//! characteristics driven by a reference ensemble standing in for the law.
//!
//! [`coupled_sweep`] runs the reference, every finite-`N` replica and its
//! characteristic copies in lockstep on one time grid. Particle `i` and
//! characteristic `i` of a replica read the same Brownian increments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingRun, MarginalClouds, Observable, ObservableSeries, PositivityMonitor};
use crate::ensemble::{AgentEnsemble, InitialSampler};
use crate::error::{param, Error, Result};
use crate::interact::{Interaction, Source};
use crate::kernels::{KernelSpec, NoiseSpec};
use crate::metrics::PointCloud;
use crate::model::{Domain, ModelParams};
use crate::rng::{self, NoisePath};

/// Ensemble with positions on `[0, period)^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusEnsemble {
    pub period: f64,
    pub ensemble: AgentEnsemble,
}

impl TorusEnsemble {
    /// Wraps positions into the fundamental cell.
    pub fn new(mut ensemble: AgentEnsemble, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(param(format!("period = {period} must be positive")));
        }
        ensemble.validate()?;
        ensemble.wrap_into(&Domain::Torus { period });
        Ok(TorusEnsemble { period, ensemble })
    }

    pub fn domain(&self) -> Domain {
        Domain::Torus { period: self.period }
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        if self.ensemble.positions.iter().any(|x| !(0.0..self.period).contains(x)) {
            return Err(param("torus positions must lie in [0, period)"));
        }
        Ok(())
    }
}

fn torus_params(params: &ModelParams, period: f64) -> ModelParams {
    params.clone().with_domain(Domain::Torus { period })
}

/// `s_i = Σ_j w_j φ(dist(x_i, x_j))`.
pub fn strength(ens: &TorusEnsemble, kernel: &KernelSpec) -> Vec<f64> {
    let e = &ens.ensemble;
    let params = ModelParams::new(2.0, kernel.alpha, e.dim).with_kernel(kernel.clone()).with_domain(ens.domain());
    let inter = Interaction::new(&params);
    let mut s = vec![0.0; e.n()];
    inter.strengths(&e.positions, Source { x: &e.positions, v: &e.velocities, w: &e.weights }, &mut s);
    s
}

/// One Euler–Maruyama update in place. Agent `i` reads stream `agent0 + i`.
#[allow(clippy::too_many_arguments)]
fn em_update(
    dim: usize,
    x: &mut [f64],
    v: &mut [f64],
    acc: &[f64],
    s: &[f64],
    noise: &NoiseSpec,
    path: &NoisePath,
    step: u64,
    domain: &Domain,
) {
    let dt = path.dt;
    let noisy = noise.sigma2 > 0.0;
    let mut dw = [0.0; 3];
    for i in 0..s.len() {
        let amp = if noisy { noise.diffusion(s[i]) } else { 0.0 };
        if noisy {
            path.increment(step, i as u64, &mut dw[..dim]);
        }
        for k in 0..dim {
            let j = i * dim + k;
            x[j] = domain.wrap(x[j] + v[j] * dt);
            v[j] += acc[j] * dt;
            if noisy {
                v[j] += amp * dw[k];
            }
        }
    }
}

fn check_finite(t: f64, xs: &[&[f64]]) -> Result<()> {
    if xs.iter().any(|a| a.iter().any(|x| !x.is_finite())) {
        return Err(Error::IntegrationFailure { t, reason: "non-finite state".into() });
    }
    Ok(())
}

/// Euler–Maruyama step `step` of the interacting system; `dt` is the path's.
pub fn em_step(ens: &TorusEnsemble, params: &ModelParams, path: &NoisePath, step: u64) -> Result<TorusEnsemble> {
    ens.validate()?;
    let tp = torus_params(params, ens.period);
    tp.validate()?;
    let e = &ens.ensemble;
    let inter = Interaction::new(&tp);
    let (mut acc, mut s) = (vec![0.0; e.positions.len()], vec![0.0; e.n()]);
    let src = Source { x: &e.positions, v: &e.velocities, w: &e.weights };
    inter.accelerations_and_strengths(&e.positions, &e.velocities, src, &mut acc, &mut s);
    let mut out = e.clone();
    em_update(e.dim, &mut out.positions, &mut out.velocities, &acc, &s, &tp.noise, path, step, &tp.domain);
    check_finite((step + 1) as f64 * path.dt, &[&out.positions, &out.velocities])?;
    Ok(TorusEnsemble { period: ens.period, ensemble: out })
}

/// Euler–Maruyama step of independent characteristics driven by `reference`:
/// drift `Σ_k ŵ_k φ(dist(y_k, x̄_i)) A(w_k − v̄_i)` and diffusion
/// `√(2 h(Σ_k ŵ_k φ(dist(y_k, x̄_i))))`.
pub fn mv_characteristics_step(
    ens: &TorusEnsemble,
    reference: &TorusEnsemble,
    params: &ModelParams,
    path: &NoisePath,
    step: u64,
) -> Result<TorusEnsemble> {
    ens.validate()?;
    if reference.ensemble.n() == 0 {
        return Err(param("reference ensemble is empty"));
    }
    reference.validate()?;
    if reference.ensemble.dim != ens.ensemble.dim || reference.period != ens.period {
        return Err(param("reference must share dimension and period with the tracked ensemble"));
    }
    let tp = torus_params(params, ens.period);
    tp.validate()?;
    let (e, r) = (&ens.ensemble, &reference.ensemble);
    let inter = Interaction::new(&tp);
    let (mut acc, mut s) = (vec![0.0; e.positions.len()], vec![0.0; e.n()]);
    let src = Source { x: &r.positions, v: &r.velocities, w: &r.weights };
    inter.accelerations_and_strengths(&e.positions, &e.velocities, src, &mut acc, &mut s);
    let mut out = e.clone();
    em_update(e.dim, &mut out.positions, &mut out.velocities, &acc, &s, &tp.noise, path, step, &tp.domain);
    check_finite((step + 1) as f64 * path.dt, &[&out.positions, &out.velocities])?;
    Ok(TorusEnsemble { period: ens.period, ensemble: out })
}

/// Settings of a lockstep coupling sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub n_list: Vec<usize>,
    /// Replicas per `N` (a minimum when `agent_budget` is set).
    pub replicas: usize,
    /// When set, `N` gets `max(replicas, agent_budget / N)` replicas.
    #[serde(default)]
    pub agent_budget: Option<usize>,
    pub reference_size: usize,
    /// Characteristic copies per replica (first agents); all when unset.
    #[serde(default)]
    pub tracked: Option<usize>,
    /// Marginal size for the stored phase-space clouds.
    #[serde(default = "one")]
    pub k: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Steps between recorded samples.
    pub sample_every: usize,
    #[serde(default)]
    pub observables: Vec<Observable>,
    #[serde(default = "floor_default")]
    pub positivity_floor: f64,
    pub sampler: InitialSampler,
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn floor_default() -> f64 {
    1e-6
}

impl CouplingConfig {
    pub fn replicas_for(&self, n: usize) -> usize {
        match self.agent_budget {
            Some(b) => (b / n.max(1)).max(self.replicas),
            None => self.replicas,
        }
    }

    pub fn tracked_for(&self, n: usize) -> usize {
        self.tracked.map_or(n, |m| m.min(n)).max(self.k.min(n))
    }

    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        params.validate()?;
        let mut bad = Vec::new();
        if !params.domain.is_torus() {
            bad.push("model.domain must be a torus for stochastic runs".to_string());
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            bad.push("run.n_list must hold positive sizes".into());
        }
        if self.replicas == 0 {
            bad.push("run.replicas must be >= 1".into());
        }
        if self.reference_size == 0 {
            bad.push("run.reference_size must be >= 1".into());
        }
        if !(self.dt > 0.0) {
            bad.push(format!("run.dt = {} must be positive", self.dt));
        }
        if !(self.t_end >= 0.0) {
            bad.push(format!("run.t_end = {} must be >= 0", self.t_end));
        } else if self.dt > 0.0 && ((self.t_end / self.dt).round() * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(1.0) {
            bad.push("run.t_end must be a whole number of steps".into());
        }
        if self.sample_every == 0 {
            bad.push("run.sample_every must be >= 1".into());
        }
        if self.k == 0 || self.n_list.iter().any(|n| self.k > *n) {
            bad.push("run.k must satisfy 1 <= k <= N".into());
        }
        for o in &self.observables {
            if let Err(e) = o.validate(params.d) {
                bad.push(e.to_string());
            }
        }
        if let Err(e) = self.sampler.validate() {
            bad.push(e.to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(param(bad.join("; ")))
        }
    }
}

struct Job {
    n_index: usize,
    replica: usize,
    n: usize,
    m: usize,
    px: Vec<f64>,
    pv: Vec<f64>,
    cx: Vec<f64>,
    cv: Vec<f64>,
    path: NoisePath,
    mart: f64,
    ex: Vec<f64>,
    ev: Vec<f64>,
    ms: Vec<f64>,
    obs: Vec<Vec<f64>>,
    min_s: f64,
    violations: u64,
}

struct Reference {
    x: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
    path: NoisePath,
}

fn sq_gap(domain: &Domain, dim: usize, a: &[f64], b: &[f64], m: usize, torus: bool) -> f64 {
    let mut s = 0.0;
    for i in 0..m * dim {
        let d = if torus { domain.displacement(a[i], b[i]) } else { a[i] - b[i] };
        s += d * d;
    }
    s / m as f64
}

fn observable_mean(o: &Observable, dim: usize, x: &[f64], v: &[f64], w: &[f64], period: f64) -> f64 {
    (0..w.len()).map(|i| w[i] * o.eval(&x[i * dim..(i + 1) * dim], &v[i * dim..(i + 1) * dim], period)).sum()
}

fn observable_var(o: &Observable, dim: usize, x: &[f64], v: &[f64], w: &[f64], period: f64) -> f64 {
    let m = observable_mean(o, dim, x, v, w, period);
    (0..w.len())
        .map(|i| w[i] * (o.eval(&x[i * dim..(i + 1) * dim], &v[i * dim..(i + 1) * dim], period) - m).powi(2))
        .sum()
}

impl Job {
    fn record(&mut self, dim: usize, domain: &Domain, period: f64, observables: &[Observable], reference: &Reference) {
        self.ex.push(sq_gap(domain, dim, &self.px, &self.cx, self.m, true));
        self.ev.push(sq_gap(domain, dim, &self.pv, &self.cv, self.m, false));
        self.ms.push(self.mart);
        let w = vec![1.0 / self.n as f64; self.n];
        for (k, o) in observables.iter().enumerate() {
            let emp = observable_mean(o, dim, &self.px, &self.pv, &w, period);
            let law = observable_mean(o, dim, &reference.x, &reference.v, &reference.w, period);
            self.obs[k].push(emp - law);
        }
    }
}

/// Runs every `(N, replica)` job of `cfg` in lockstep with one reference
/// ensemble and returns one [`CouplingRun`] per `N`.
pub fn coupled_sweep(params: &ModelParams, cfg: &CouplingConfig) -> Result<Vec<CouplingRun>> {
    cfg.validate(params)?;
    let Domain::Torus { period } = params.domain else { unreachable!() };
    let domain = params.domain;
    let dim = params.d;
    let inter = Interaction::new(params);
    let noise = params.noise.clone();
    let wrap = |mut e: AgentEnsemble| {
        e.wrap_into(&domain);
        e
    };
    let r0 = wrap(cfg.sampler.sample(cfg.reference_size, dim, cfg.seed, &[rng::TAG_REFERENCE]));
    let mut reference = Reference {
        x: r0.positions,
        v: r0.velocities,
        w: r0.weights,
        path: NoisePath::new(rng::split(cfg.seed, &[rng::TAG_REFERENCE, rng::TAG_NOISE]), dim, cfg.dt),
    };
    let mut jobs = Vec::new();
    for (ni, &n) in cfg.n_list.iter().enumerate() {
        let m = cfg.tracked_for(n);
        for r in 0..cfg.replicas_for(n) {
            let e = wrap(cfg.sampler.sample(n, dim, cfg.seed, &[rng::TAG_REPLICA, n as u64, r as u64]));
            let path = NoisePath::new(rng::split(cfg.seed, &[rng::TAG_JOB, n as u64, r as u64, rng::TAG_NOISE]), dim, cfg.dt);
            jobs.push(Job {
                n_index: ni,
                replica: r,
                n,
                m,
                cx: e.positions[..m * dim].to_vec(),
                cv: e.velocities[..m * dim].to_vec(),
                px: e.positions,
                pv: e.velocities,
                path,
                mart: 0.0,
                ex: Vec::new(),
                ev: Vec::new(),
                ms: Vec::new(),
                obs: vec![Vec::new(); cfg.observables.len()],
                min_s: f64::INFINITY,
                violations: 0,
            });
        }
    }
    let mut times = vec![0.0];
    let mut ref_var: Vec<Vec<f64>> = cfg
        .observables
        .iter()
        .map(|o| vec![observable_var(o, dim, &reference.x, &reference.v, &reference.w, period)])
        .collect();
    jobs.par_iter_mut().for_each(|j| j.record(dim, &domain, period, &cfg.observables, &reference));
    let steps = cfg.steps();
    let mut ref_acc = vec![0.0; reference.x.len()];
    let mut ref_s = vec![0.0; cfg.reference_size];
    let ref_min = std::sync::Mutex::new(f64::INFINITY);
    for step in 0..steps {
        let rsrc = Source { x: &reference.x, v: &reference.v, w: &reference.w };
        inter.accelerations_and_strengths(&reference.x, &reference.v, rsrc, &mut ref_acc, &mut ref_s);
        jobs.par_iter_mut().try_for_each(|j| -> Result<()> {
            let (n, m) = (j.n, j.m);
            let w = vec![1.0 / n as f64; n];
            let (mut pa, mut ps) = (vec![0.0; n * dim], vec![0.0; n]);
            let psrc = Source { x: &j.px, v: &j.pv, w: &w };
            inter.accelerations_and_strengths(&j.px, &j.pv, psrc, &mut pa, &mut ps);
            let (mut ca, mut cs) = (vec![0.0; m * dim], vec![0.0; m]);
            inter.accelerations_and_strengths(&j.cx, &j.cv, rsrc, &mut ca, &mut cs);
            if noise.sigma2 > 0.0 {
                let mut dw = [0.0; 3];
                for i in 0..m {
                    j.path.increment(step, i as u64, &mut dw[..dim]);
                    let diff = noise.diffusion(ps[i]) - noise.diffusion(cs[i]);
                    for k in 0..dim {
                        let q = i * dim + k;
                        j.mart += (j.pv[q] - j.cv[q]) * diff * dw[k];
                    }
                }
            }
            for s in ps.iter().chain(&cs) {
                j.min_s = j.min_s.min(*s);
                if *s <= cfg.positivity_floor {
                    j.violations += 1;
                }
            }
            em_update(dim, &mut j.px, &mut j.pv, &pa, &ps, &noise, &j.path, step, &domain);
            em_update(dim, &mut j.cx, &mut j.cv, &ca, &cs, &noise, &j.path, step, &domain);
            check_finite((step + 1) as f64 * cfg.dt, &[&j.pv, &j.cv])
        })?;
        {
            let mut g = ref_min.lock().unwrap();
            *g = ref_s.iter().copied().fold(*g, f64::min);
        }
        em_update(dim, &mut reference.x, &mut reference.v, &ref_acc, &ref_s, &noise, &reference.path, step, &domain);
        check_finite((step + 1) as f64 * cfg.dt, &[&reference.v])?;
        if (step + 1) as usize % cfg.sample_every == 0 || step + 1 == steps {
            times.push((step + 1) as f64 * cfg.dt);
            for (k, o) in cfg.observables.iter().enumerate() {
                ref_var[k].push(observable_var(o, dim, &reference.x, &reference.v, &reference.w, period));
            }
            jobs.par_iter_mut().for_each(|j| j.record(dim, &domain, period, &cfg.observables, &reference));
        }
    }
    let ref_min = ref_min.into_inner().unwrap();
    let mut out = Vec::new();
    for (ni, &n) in cfg.n_list.iter().enumerate() {
        let mine: Vec<&Job> = jobs.iter().filter(|j| j.n_index == ni).collect();
        let min_strength = mine.iter().map(|j| j.min_s).fold(ref_min, f64::min);
        let violations = mine.iter().map(|j| j.violations).sum();
        let k = cfg.k.min(n);
        let pick = |x: &[f64], v: &[f64]| -> Vec<f64> {
            (0..k).flat_map(|i| x[i * dim..(i + 1) * dim].iter().chain(&v[i * dim..(i + 1) * dim]).copied()).collect::<Vec<_>>()
        };
        let (mut pp, mut mp) = (Vec::new(), Vec::new());
        for j in &mine {
            pp.extend(pick(&j.px, &j.pv));
            // unwrap the characteristic next to its particle so the cloud
            // distance uses the minimum-image gap
            let cx: Vec<f64> = (0..k * dim).map(|q| j.px[q] - domain.displacement(j.px[q], j.cx[q])).collect();
            mp.extend(pick(&cx, &j.cv));
        }
        let marginals = Some(MarginalClouds {
            k,
            particles: PointCloud::uniform(2 * dim * k, pp)?,
            mean_field: PointCloud::uniform(2 * dim * k, mp)?,
        });
        out.push(CouplingRun {
            params: params.clone(),
            n,
            tracked: cfg.tracked_for(n),
            replica_count: mine.len(),
            reference_size: cfg.reference_size,
            seed: cfg.seed,
            times: times.clone(),
            replica_ex: mine.iter().map(|j| j.ex.clone()).collect(),
            replica_ev: mine.iter().map(|j| j.ev.clone()).collect(),
            replica_martingale: if noise.sigma2 > 0.0 { mine.iter().map(|j| j.ms.clone()).collect() } else { Vec::new() },
            observables: cfg
                .observables
                .iter()
                .enumerate()
                .map(|(k, o)| ObservableSeries {
                    observable: o.clone(),
                    replica_gap: mine.iter().map(|j| j.obs[k].clone()).collect(),
                    reference_variance: ref_var[k].clone(),
                })
                .collect(),
            positivity: Some(PositivityMonitor { floor: cfg.positivity_floor, min_strength, violations }),
            marginals,
        });
        debug_assert!(mine.iter().enumerate().all(|(r, j)| j.replica == r));
    }
    Ok(out)
}

/// Single-`N` coupling run.
pub fn coupled_run(params: &ModelParams, cfg: &CouplingConfig) -> Result<CouplingRun> {
    if cfg.n_list.len() != 1 {
        return Err(param("coupled_run takes exactly one N; use coupled_sweep for several"));
    }
    Ok(coupled_sweep(params, cfg)?.remove(0))
}

/// Largest `c0` such that no single agent carries more than `share` of the
/// empirical sum `Σ_i exp(c0 |v_i|^{p−1})`; `0` when even `c0 = 0` fails.
pub fn exponential_moment_c0(ens: &AgentEnsemble, p: f64, share: f64) -> f64 {
    let u: Vec<f64> = (0..ens.n()).map(|i| ens.v(i).iter().map(|c| c * c).sum::<f64>().sqrt().powf(p - 1.0)).collect();
    let n = u.len();
    if n == 0 || 1.0 / n as f64 > share {
        return 0.0;
    }
    let umax = u.iter().copied().fold(0.0, f64::max);
    if umax == 0.0 {
        return f64::INFINITY;
    }
    let max_share = |c: f64| {
        let s: f64 = u.iter().map(|x| (c * (x - umax)).exp()).sum();
        1.0 / s
    };
    let (mut lo, mut hi) = (0.0, 1.0 / umax);
    while max_share(hi) <= share {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 / umax {
            return f64::INFINITY;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if max_share(mid) <= share {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(x: Vec<f64>, v: Vec<f64>, d: usize) -> TorusEnsemble {
        TorusEnsemble::new(AgentEnsemble::uniform(d, x, v).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn strength_examples() {
        let k = KernelSpec::power_law(0.5);
        assert_eq!(strength(&torus(vec![0.3, 0.3], vec![0.0; 2], 2), &k), vec![1.0]);
        let s = strength(&torus(vec![0.1, 0.1, 0.9, 0.1], vec![0.0; 4], 2), &k);
        let want = 0.5 * (1.0 + 1.2f64.powf(-0.5));
        assert!(s.iter().all(|x| (x - want).abs() < 1e-15));
    }

    #[test]
    fn noiseless_step_is_deterministic_euler() {
        let e = torus(vec![0.1, 0.5, 0.8], vec![0.3, -0.2, 0.05], 1);
        let params = ModelParams::new(2.5, 0.25, 1).with_domain(Domain::unit_torus());
        let path = NoisePath::new(3, 1, 0.01);
        let got = em_step(&e, &params, &path, 0).unwrap();
        let det = crate::dynamics::step(&e.ensemble, &params, 0.01, crate::ode::Scheme::Euler).unwrap();
        let mut want = det.ensemble;
        want.wrap_into(&params.domain);
        assert_eq!(got.ensemble, want);
    }

    #[test]
    fn dirac_reference_drift() {
        let params = ModelParams::new(3.0, 0.5, 1).with_domain(Domain::unit_torus());
        let e = torus(vec![0.2], vec![0.0], 1);
        let r = torus(vec![0.7], vec![2.0], 1);
        let dt = 1e-3;
        let out = mv_characteristics_step(&e, &r, &params, &NoisePath::new(0, 1, dt), 0).unwrap();
        let drift = 1.5f64.powf(-0.5) * 4.0;
        assert!((out.ensemble.velocities[0] - drift * dt).abs() < 1e-15);
    }

    #[test]
    fn c0_heuristic() {
        let e = AgentEnsemble::uniform(1, vec![0.0; 100], (0..100).map(|i| i as f64 / 100.0).collect()).unwrap();
        let c = exponential_moment_c0(&e, 3.0, 0.05);
        assert!(c > 0.0 && c.is_finite());
        let u: Vec<f64> = (0..100).map(|i| (i as f64 / 100.0).powi(2)).collect();
        let s: f64 = u.iter().map(|x| (c * x).exp()).sum();
        assert!(((c * u[99]).exp() / s - 0.05).abs() < 1e-6);
    }
}
