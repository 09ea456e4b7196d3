//! Deterministic mean-field experiments: weighted characteristic flows,
//! empirical Cauchy and stability tests in `W1`, particle/characteristic
//! couplings and kinetic diameter rates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingRun, MarginalClouds, MeanSe};
use crate::dynamics::{simulate, OutputPolicy, SimOptions, TrajectoryRecord};
use crate::ensemble::{AgentEnsemble, InitialSampler};
use crate::error::{param, Error, Result};
use crate::interact::{Interaction, Source};
use crate::metrics::{
    calibrate_envelope, fit_power_law, japanese, linear_fit, wasserstein1, wasserstein2, EnvelopeCheck, PointCloud,
    RateFit,
};
use crate::model::{Domain, ModelParams, RateTable, Regime};
use crate::ode::{OdeSystem, StepControl, Stepper};
use crate::rng;

/// Push-forward of a weighted ensemble along the self-consistent flow.
/// With uniform weights this is [`simulate`] itself.
pub fn characteristics_flow(
    init: &AgentEnsemble,
    params: &ModelParams,
    t_end: f64,
    policy: &OutputPolicy,
    opts: &SimOptions,
) -> Result<TrajectoryRecord> {
    let total: f64 = init.weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(param(format!("weights sum to {total}, expected 1")));
    }
    simulate(init, params, t_end, policy, opts)
}

/// Pairwise `W1` between nested empirical measures over time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyReport {
    pub n_list: Vec<usize>,
    pub times: Vec<f64>,
    /// `distances[t][i][j] = W1(μ_t^{N_i}, μ_t^{N_j})`.
    pub distances: Vec<Vec<Vec<f64>>>,
    /// Rate `c` fitted through the origin to the worst `log(W1(t)/W1(0))`.
    pub fitted_rate: f64,
    pub slack: f64,
    /// Largest `W1(t) / (W1(0) e^{ct})` over all pairs and times.
    pub worst_ratio: f64,
    pub passed: bool,
}

impl CauchyReport {
    pub fn at(&self, t_index: usize, i: usize, j: usize) -> f64 {
        self.distances[t_index][i][j]
    }
}

/// Evolves the heads of one `N_max` sample (so the measures are nested)
/// and records all pairwise phase-space `W1` at the sample times.
pub fn empirical_cauchy_experiment(
    sampler: &InitialSampler,
    params: &ModelParams,
    n_list: &[usize],
    times: &[f64],
    opts: &SimOptions,
    seed: u64,
) -> Result<CauchyReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(param("n_list must be nonempty, positive and strictly increasing"));
    }
    let t_end = *times.last().ok_or_else(|| param("times must not be empty"))?;
    let policy = OutputPolicy::Times { times: times.to_vec() };
    let times = policy.times(t_end)?;
    let full = sampler.sample(*n_list.last().unwrap(), params.d, seed, &[rng::TAG_INITIAL]);
    let opts = opts.snapshots();
    let runs = n_list
        .par_iter()
        .map(|&n| simulate(&full.head(n), params, t_end, &policy, &opts))
        .collect::<Result<Vec<_>>>()?;
    let k = n_list.len();
    let mut distances = vec![vec![vec![0.0; k]; k]; times.len()];
    for (ti, row) in distances.iter_mut().enumerate() {
        let clouds: Vec<PointCloud> =
            runs.iter().map(|r| PointCloud::phase_space(&r.snapshots.as_ref().unwrap()[ti])).collect();
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
        let vals = pairs.par_iter().map(|&(i, j)| wasserstein1(&clouds[i], &clouds[j])).collect::<Result<Vec<_>>>()?;
        for ((i, j), d) in pairs.into_iter().zip(vals) {
            row[i][j] = d;
            row[j][i] = d;
        }
    }
    let slack = 1.2;
    let mut worst = vec![f64::NEG_INFINITY; times.len()];
    for i in 0..k {
        for j in i + 1..k {
            let d0 = distances[0][i][j];
            if d0 > 0.0 {
                for (ti, w) in worst.iter_mut().enumerate() {
                    *w = w.max((distances[ti][i][j] / d0).ln());
                }
            }
        }
    }
    let (num, den) = times.iter().zip(&worst).filter(|(t, w)| **t > 0.0 && w.is_finite()).fold((0.0, 0.0), |a, (t, w)| (a.0 + t * w, a.1 + t * t));
    let fitted_rate = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
    let worst_ratio = times
        .iter()
        .zip(&worst)
        .filter(|(_, w)| w.is_finite())
        .map(|(t, w)| (w - fitted_rate * t).exp())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CauchyReport {
        n_list: n_list.to_vec(),
        times,
        distances,
        fitted_rate,
        slack,
        worst_ratio,
        passed: worst_ratio <= slack,
    })
}

/// Envelope shape `pre(t) · exp(C̄ g(t))` of a stability regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StabilityShape {
    /// `⟨t⟩ log⟨t⟩`.
    TLogT,
    /// `(log⟨t⟩)^θ exp(C̄ (log⟨t⟩)^θ)`.
    LogExp { theta: f64 },
    /// `⟨t⟩^γ exp(C̄ ⟨t⟩^γ)`.
    PowExp { gamma: f64 },
    /// `exp(C̄ t)`.
    Exp,
}

impl StabilityShape {
    pub fn for_params(p: f64, alpha: f64, regime: Regime) -> StabilityShape {
        match regime {
            Regime::General => StabilityShape::Exp,
            Regime::FatPLt3 => StabilityShape::TLogT,
            Regime::FatPEq3 => StabilityShape::LogExp { theta: 1.0 / (1.0 - alpha) },
            Regime::FatPGt3 => StabilityShape::PowExp { gamma: (1.0 + alpha) * (p - 3.0) / (2.0 * (p - alpha - 2.0)) },
        }
    }

    /// `(pre(t), g(t))`; `g` is absent for the pure power shape.
    pub fn parts(&self, t: f64) -> (f64, Option<f64>) {
        let b = japanese(t);
        match *self {
            StabilityShape::TLogT => (b * b.ln(), None),
            StabilityShape::LogExp { theta } => {
                let g = b.ln().powf(theta);
                (g, Some(g))
            }
            StabilityShape::PowExp { gamma } => {
                let g = b.powf(gamma);
                (g, Some(g))
            }
            StabilityShape::Exp => (1.0, Some(t)),
        }
    }
}

/// Regime envelope evaluated with fitted constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityEnvelope {
    pub shape: StabilityShape,
    pub window: (f64, f64),
    /// Fitted exponential rate (zero for the pure power shape).
    pub c_bar: f64,
    pub check: EnvelopeCheck,
}

/// `W1` between two evolved ensembles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRun {
    pub mu0_spec: String,
    pub nu0_spec: String,
    pub params: ModelParams,
    pub regime: Regime,
    pub times: Vec<f64>,
    pub w1_series: Vec<f64>,
    /// `W1(t)/W1(0)`; empty when the initial distance vanishes.
    pub ratio: Vec<f64>,
    pub envelope: Option<StabilityEnvelope>,
}

/// Options of [`stability_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub sim: SimOptions,
    /// Envelope window; defaults to `[1, t_end]`.
    pub window: Option<(f64, f64)>,
    /// Support box `(lo, hi, velocity radius)` both ensembles must lie in.
    pub support: Option<(f64, f64, f64)>,
    pub slack: f64,
    pub mu0_spec: String,
    pub nu0_spec: String,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            sim: SimOptions::default(),
            window: None,
            support: None,
            slack: 1.2,
            mu0_spec: "mu0".into(),
            nu0_spec: "nu0".into(),
        }
    }
}

fn check_support(e: &AgentEnsemble, (lo, hi, vr): (f64, f64, f64), name: &str) -> Result<()> {
    if e.positions.iter().any(|x| *x < lo || *x > hi) {
        return Err(Error::Precondition(format!("{name} has positions outside [{lo}, {hi}]^d")));
    }
    if (0..e.n()).any(|i| e.v(i).iter().map(|c| c * c).sum::<f64>().sqrt() > vr) {
        return Err(Error::Precondition(format!("{name} has speeds above {vr}")));
    }
    Ok(())
}

/// Fits `C̄` on the second half of the window (LS of `log(ratio/pre)`
/// against `g`), then calibrates `C` on the first half.
pub fn fit_stability_envelope(
    times: &[f64],
    ratio: &[f64],
    shape: StabilityShape,
    window: (f64, f64),
    slack: f64,
) -> Result<StabilityEnvelope> {
    let pts: Vec<(f64, f64)> =
        times.iter().zip(ratio).filter(|(t, _)| **t >= window.0 && **t <= window.1).map(|(a, b)| (*a, *b)).collect();
    if pts.len() < 4 {
        return Err(Error::Fit(format!("stability window [{}, {}] holds {} samples", window.0, window.1, pts.len())));
    }
    let mid = 0.5 * (window.0 + window.1);
    let c_bar = match shape.parts(mid).1 {
        None => 0.0,
        Some(_) => {
            let (g, y): (Vec<f64>, Vec<f64>) = pts
                .iter()
                .filter(|(t, _)| *t >= mid)
                .map(|(t, r)| {
                    let (pre, g) = shape.parts(*t);
                    (g.unwrap(), (r / pre).ln())
                })
                .unzip();
            linear_fit(&g, &y)?.0.max(0.0)
        }
    };
    let (ts, scaled): (Vec<f64>, Vec<f64>) = pts
        .iter()
        .map(|(t, r)| {
            let (pre, g) = shape.parts(*t);
            (*t, r / (pre * (c_bar * g.unwrap_or(0.0)).exp()))
        })
        .unzip();
    let check = calibrate_envelope(&ts, &scaled, mid, slack)?;
    Ok(StabilityEnvelope { shape, window, c_bar, check })
}

/// Evolves both ensembles and compares them in phase-space `W1`.
pub fn stability_experiment(
    mu0: &AgentEnsemble,
    nu0: &AgentEnsemble,
    params: &ModelParams,
    t_end: f64,
    policy: &OutputPolicy,
    opts: &StabilityOptions,
) -> Result<StabilityRun> {
    if let Some(b) = opts.support {
        check_support(mu0, b, "mu0")?;
        check_support(nu0, b, "nu0")?;
    }
    let sim = opts.sim.snapshots();
    let (a, b) = rayon::join(|| simulate(mu0, params, t_end, policy, &sim), || simulate(nu0, params, t_end, policy, &sim));
    let (a, b) = (a?, b?);
    let (sa, sb) = (a.snapshots.unwrap(), b.snapshots.unwrap());
    let w1_series = sa
        .par_iter()
        .zip(&sb)
        .map(|(x, y)| wasserstein1(&PointCloud::phase_space(x), &PointCloud::phase_space(y)))
        .collect::<Result<Vec<_>>>()?;
    let regime = params.regime();
    let w0 = w1_series[0];
    let (ratio, envelope) = if w0 > 0.0 {
        let ratio: Vec<f64> = w1_series.iter().map(|w| w / w0).collect();
        let shape = StabilityShape::for_params(params.p, params.alpha(), regime);
        let window = opts.window.unwrap_or((1.0, t_end));
        let env = fit_stability_envelope(&a.times, &ratio, shape, window, opts.slack)?;
        (ratio, Some(env))
    } else {
        (Vec::new(), None)
    };
    Ok(StabilityRun {
        mu0_spec: opts.mu0_spec.clone(),
        nu0_spec: opts.nu0_spec.clone(),
        params: params.clone(),
        regime,
        times: a.times,
        w1_series,
        ratio,
        envelope,
    })
}

/// Settings of a deterministic coupling sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PocConfig {
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub reference_size: usize,
    /// Characteristic copies per replica; all agents when unset.
    #[serde(default)]
    pub tracked: Option<usize>,
    pub k: usize,
    /// Sample times (0 is prepended when missing).
    pub times: Vec<f64>,
    /// Time at which the proxy is fitted against `N`.
    pub fit_time: f64,
    pub control: StepControl,
    pub sampler: InitialSampler,
    pub seed: u64,
}

impl PocConfig {
    pub fn tracked_for(&self, n: usize) -> usize {
        self.tracked.map_or(n, |m| m.min(n)).max(self.k.min(n))
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        params.validate()?;
        self.control.validate()?;
        self.sampler.validate()?;
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(param("run.n_list must hold positive sizes"));
        }
        if self.replicas == 0 || self.reference_size == 0 {
            return Err(param("run.replicas and run.reference_size must be >= 1"));
        }
        if self.k == 0 || self.n_list.iter().any(|n| self.k > *n) {
            return Err(param("run.k must satisfy 1 <= k <= N"));
        }
        if !self.times.iter().any(|t| (t - self.fit_time).abs() < 1e-12) {
            return Err(param(format!("run.fit_time = {} is not one of run.times", self.fit_time)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Block {
    off: usize,
    n: usize,
    m: usize,
}

impl Block {
    fn len(&self, dim: usize) -> usize {
        2 * (self.n + self.m) * dim
    }
}

/// Reference ensemble, every replica's particles and their characteristics
/// as one ODE state.
struct CoupledSystem {
    inter: Interaction,
    dim: usize,
    ref_w: Vec<f64>,
    ref_n: usize,
    blocks: Vec<Block>,
}

impl OdeSystem for CoupledSystem {
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.dim;
        let rn = self.ref_n * d;
        let (ry, jy) = y.split_at(2 * rn);
        let (rdy, mut jdy) = dy.split_at_mut(2 * rn);
        let (rx, rv) = ry.split_at(rn);
        let rsrc = Source { x: rx, v: rv, w: &self.ref_w };
        {
            let (dx, dv) = rdy.split_at_mut(rn);
            dx.copy_from_slice(rv);
            self.inter.accelerations(rx, rv, rsrc, dv);
        }
        let mut chunks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (head, tail) = std::mem::take(&mut jdy).split_at_mut(b.len(d));
            chunks.push((b, head));
            jdy = tail;
        }
        chunks.into_par_iter().for_each(|(b, out)| {
            let yb = &jy[b.off..b.off + b.len(d)];
            let (nd, md) = (b.n * d, b.m * d);
            let (px, rest) = yb.split_at(nd);
            let (pv, rest) = rest.split_at(nd);
            let (cx, cv) = rest.split_at(md);
            let (dpx, rest) = out.split_at_mut(nd);
            let (dpv, rest) = rest.split_at_mut(nd);
            let (dcx, dcv) = rest.split_at_mut(md);
            let w = vec![1.0 / b.n as f64; b.n];
            dpx.copy_from_slice(pv);
            dcx.copy_from_slice(cv);
            // particle rows are independent; the inner loop stays serial
            // so the work splits across replicas
            for i in 0..b.n {
                let (xi, vi) = (&px[i * d..(i + 1) * d], &pv[i * d..(i + 1) * d]);
                self.inter.row_into(xi, vi, Source { x: px, v: pv, w: &w }, &mut dpv[i * d..(i + 1) * d], false);
            }
            for i in 0..b.m {
                let (xi, vi) = (&cx[i * d..(i + 1) * d], &cv[i * d..(i + 1) * d]);
                self.inter.row_into(xi, vi, rsrc, &mut dcv[i * d..(i + 1) * d], false);
            }
        });
    }
}

/// One `N` of a deterministic coupling sweep at the fit time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyPoint {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

/// `W2` between the `k`-marginal clouds against the proxy bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheck {
    pub n: usize,
    pub w2: f64,
    pub proxy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Outcome of [`poc_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PocReport {
    pub runs: Vec<CouplingRun>,
    pub k: usize,
    pub fit_time: f64,
    pub proxy_at_fit: Vec<ProxyPoint>,
    /// `(slope, intercept, r²)` of `log proxy` against `log N`; absent for a
    /// single `N`.
    pub slope_fit: Option<(f64, f64, f64)>,
    pub marginal_checks: Vec<MarginalCheck>,
    /// Largest `√P_{k+1} − √P_k − Δt·max √K` over replicas and intervals.
    pub potential_rate_excess: f64,
}

fn sq_gap(domain: &Domain, a: &[f64], b: &[f64], count: usize, dim: usize) -> f64 {
    (0..count * dim)
        .map(|q| {
            let g = domain.displacement(a[q], b[q]);
            g * g
        })
        .sum::<f64>()
        / count as f64
}

fn block_view<'a>(y: &'a [f64], base: usize, b: &Block, dim: usize) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
    let s = &y[base + b.off..base + b.off + b.len(dim)];
    let (nd, md) = (b.n * dim, b.m * dim);
    (&s[..nd], &s[nd..2 * nd], &s[2 * nd..2 * nd + md], &s[2 * nd + md..])
}

/// Couples `N`-agent systems with characteristics of a size-`M` reference
/// sharing their initial data and reports the proxy scaling in `N`.
pub fn poc_experiment(params: &ModelParams, cfg: &PocConfig) -> Result<PocReport> {
    cfg.validate(params)?;
    let dim = params.d;
    let domain = params.domain;
    let t_end = cfg.times.iter().copied().fold(0.0, f64::max);
    let times = OutputPolicy::Times { times: cfg.times.clone() }.times(t_end)?;
    let reference = cfg.sampler.sample(cfg.reference_size, dim, cfg.seed, &[rng::TAG_REFERENCE]);
    let mut y = crate::dynamics::pack(&reference);
    let mut blocks = Vec::new();
    let mut job_keys = Vec::new();
    for &n in &cfg.n_list {
        let m = cfg.tracked_for(n);
        for r in 0..cfg.replicas {
            let e = cfg.sampler.sample(n, dim, cfg.seed, &[rng::TAG_REPLICA, n as u64, r as u64]);
            blocks.push(Block { off: y.len() - 2 * reference.positions.len(), n, m });
            y.extend_from_slice(&e.positions);
            y.extend_from_slice(&e.velocities);
            y.extend_from_slice(&e.positions[..m * dim]);
            y.extend_from_slice(&e.velocities[..m * dim]);
            job_keys.push(n);
        }
    }
    let sys = CoupledSystem {
        inter: Interaction::new(params),
        dim,
        ref_w: reference.weights.clone(),
        ref_n: reference.n(),
        blocks: blocks.clone(),
    };
    let base = 2 * reference.positions.len();
    let nb = blocks.len();
    let (mut ex, mut ev) = (vec![Vec::new(); nb], vec![Vec::new(); nb]);
    let mut st = Stepper::new(cfg.control, y.len());
    let mut t = 0.0;
    for &tk in &times {
        if tk > t {
            st.advance(&sys, &mut t, &mut y, tk)?;
        }
        for (j, b) in blocks.iter().enumerate() {
            let (px, pv, cx, cv) = block_view(&y, base, b, dim);
            ex[j].push(sq_gap(&domain, px, cx, b.m, dim));
            ev[j].push(sq_gap(&Domain::FreeSpace, pv, cv, b.m, dim));
        }
    }
    let mut runs = Vec::new();
    let mut marginal_checks = Vec::new();
    let mut proxy_at_fit = Vec::new();
    let fit_idx = times.iter().position(|s| (s - cfg.fit_time).abs() < 1e-12).unwrap();
    let mut excess = f64::NEG_INFINITY;
    for &n in &cfg.n_list {
        let idx: Vec<usize> = (0..nb).filter(|j| job_keys[*j] == n).collect();
        let k = cfg.k;
        let (mut pp, mut mp, mut first_k) = (Vec::new(), Vec::new(), Vec::new());
        for &j in &idx {
            let (px, pv, cx, cv) = block_view(&y, base, &blocks[j], dim);
            let mut gap = 0.0;
            for i in 0..k {
                let s = i * dim..(i + 1) * dim;
                pp.extend(px[s.clone()].iter().chain(&pv[s.clone()]));
                let cxu: Vec<f64> = s.clone().map(|q| px[q] - domain.displacement(px[q], cx[q])).collect();
                mp.extend(cxu.iter().chain(&cv[s.clone()]));
                gap += sq_gap(&domain, &px[s.clone()], &cx[s.clone()], 1, dim) + sq_gap(&Domain::FreeSpace, &pv[s.clone()], &cv[s], 1, dim);
            }
            first_k.push(vec![gap]);
        }
        let run = CouplingRun {
            params: params.clone(),
            n,
            tracked: cfg.tracked_for(n),
            replica_count: idx.len(),
            reference_size: cfg.reference_size,
            seed: cfg.seed,
            times: times.clone(),
            replica_ex: idx.iter().map(|j| ex[*j].clone()).collect(),
            replica_ev: idx.iter().map(|j| ev[*j].clone()).collect(),
            replica_martingale: Vec::new(),
            observables: Vec::new(),
            positivity: None,
            marginals: Some(MarginalClouds {
                k,
                particles: PointCloud::uniform(2 * dim * k, pp)?,
                mean_field: PointCloud::uniform(2 * dim * k, mp)?,
            }),
        };
        let proxy = run.proxy(k);
        proxy_at_fit.push(ProxyPoint { n, mean: proxy.mean[fit_idx], se: proxy.se[fit_idx] });
        let last = times.len() - 1;
        let mc = run.marginals.as_ref().unwrap();
        let w2 = wasserstein2(&mc.particles, &mc.mean_field)?;
        let fk = MeanSe::of(&first_k);
        let fk_se = if fk.mean[0] > 0.0 { 0.5 * fk.se[0] / fk.mean[0].sqrt() } else { 0.0 };
        let tolerance = proxy.mean[last] + 3.0 * (proxy.se[last] + fk_se);
        marginal_checks.push(MarginalCheck { n, w2, proxy: proxy.mean[last], tolerance, passed: w2 <= tolerance + 1e-12 });
        for r in 0..run.replica_count {
            let p: Vec<f64> = run.replica_ex[r].iter().map(|e| (0.5 * n as f64 * e).sqrt()).collect();
            let kk: Vec<f64> = run.replica_ev[r].iter().map(|e| (0.5 * n as f64 * e).sqrt()).collect();
            for s in 0..times.len() - 1 {
                let dt = times[s + 1] - times[s];
                excess = excess.max(p[s + 1] - p[s] - 1.05 * dt * kk[s].max(kk[s + 1]) - 1e-12);
            }
        }
        runs.push(run);
    }
    let slope_fit = if cfg.n_list.len() >= 2 {
        let lx: Vec<f64> = proxy_at_fit.iter().map(|q| (q.n as f64).ln()).collect();
        let ly: Vec<f64> = proxy_at_fit.iter().map(|q| q.mean.ln()).collect();
        Some(linear_fit(&lx, &ly)?)
    } else {
        None
    };
    Ok(PocReport {
        runs,
        k: cfg.k,
        fit_time: cfg.fit_time,
        proxy_at_fit,
        slope_fit,
        marginal_checks,
        potential_rate_excess: excess,
    })
}

/// Decay report for the kinetic diameters `(D, V)` of a weighted ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticReport {
    pub record: TrajectoryRecord,
    pub table: RateTable,
    /// Fit of `V` against `⟨t⟩`.
    pub v_fit: RateFit,
    /// Relative error of the fitted `V` exponent (absent for `p = 2`).
    pub v_exponent_error: Option<f64>,
    /// Fit of `⟨t⟩ V / (log⟨t⟩)^{v_log_power}` for `p = 3`.
    pub compensated_fit: Option<RateFit>,
    /// `(D(t_end) − D(t_end/10)) / D(t_end)`.
    pub d_final_decade_growth: f64,
}

pub fn kinetic_diameter_experiment(
    init: &AgentEnsemble,
    params: &ModelParams,
    t_end: f64,
    policy: &OutputPolicy,
    opts: &SimOptions,
    window: Option<(f64, f64)>,
) -> Result<KineticReport> {
    let record = characteristics_flow(init, params, t_end, policy, opts)?;
    let table = RateTable::for_params(params.p, params.alpha());
    let t = &record.times;
    let v = record.velocity();
    let v_fit = fit_power_law(t, &v, window)?;
    let v_exponent_error = table.v_exponent.map(|e| (v_fit.exponent - e).abs() / e.abs());
    let compensated_fit = if params.p == 3.0 {
        let y: Vec<f64> = t.iter().zip(&v).map(|(s, x)| x * japanese(*s) / japanese(*s).ln().max(f64::MIN_POSITIVE).powf(table.v_log_power)).collect();
        Some(fit_power_law(t, &y, window)?)
    } else {
        None
    };
    let dsp = record.spatial();
    let d_end = *dsp.last().unwrap();
    let t10 = t_end / 10.0;
    let i10 = t.iter().position(|s| *s >= t10).unwrap_or(0);
    let d_final_decade_growth = if d_end > 0.0 { (d_end - dsp[i10]) / d_end } else { 0.0 };
    Ok(KineticReport { record, table, v_fit, v_exponent_error, compensated_fit, d_final_decade_growth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::Scheme;

    #[test]
    fn single_node_moves_straight() {
        let e = AgentEnsemble::new(2, vec![0.0, 1.0], vec![1.0, -0.5], vec![1.0]).unwrap();
        let params = ModelParams::new(2.5, 0.3, 2);
        let opts = SimOptions::with_control(StepControl::fixed(Scheme::Rk4, 0.1)).snapshots();
        let r = characteristics_flow(&e, &params, 2.0, &OutputPolicy::Linear { samples: 3 }, &opts).unwrap();
        let last = r.last_snapshot().unwrap();
        assert!((last.positions[0] - 2.0).abs() < 1e-14 && (last.positions[1] - 0.0).abs() < 1e-14);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let e = AgentEnsemble { dim: 1, positions: vec![0.0, 1.0], velocities: vec![0.0, 1.0], weights: vec![0.5, 0.6] };
        let r = characteristics_flow(&e, &ModelParams::new(3.0, 0.0, 1), 1.0, &OutputPolicy::Linear { samples: 2 }, &SimOptions::default());
        assert!(r.is_err());
    }

    #[test]
    fn shapes_by_regime() {
        assert_eq!(StabilityShape::for_params(2.5, 0.2, Regime::FatPLt3), StabilityShape::TLogT);
        let StabilityShape::PowExp { gamma } = StabilityShape::for_params(4.0, 0.0, Regime::FatPGt3) else { panic!() };
        assert!((gamma - 0.25).abs() < 1e-15);
    }

    #[test]
    fn coupling_starts_at_zero() {
        let params = ModelParams::new(2.5, 0.25, 1);
        let cfg = PocConfig {
            n_list: vec![4, 8],
            replicas: 3,
            reference_size: 32,
            tracked: None,
            k: 1,
            times: vec![0.5, 1.0],
            fit_time: 1.0,
            control: StepControl::fixed(Scheme::Rk4, 0.05),
            sampler: InitialSampler::boxed(0.0, 1.0, 1.0),
            seed: 5,
        };
        let rep = poc_experiment(&params, &cfg).unwrap();
        for run in &rep.runs {
            assert!(run.replica_ex.iter().chain(&run.replica_ev).all(|r| r[0] == 0.0));
            assert!(run.replica_ex.iter().all(|r| r[2] > 0.0));
        }
        assert!(rep.potential_rate_excess <= 0.0);
        assert!(rep.marginal_checks.iter().all(|c| c.passed));
    }
}
