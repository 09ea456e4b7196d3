//! Deterministic agent system
//! `x_i' = v_i`, `v_i' = Σ_j w_j φ(|x_i − x_j|) A(v_j − v_i)`
//! and its diameter bookkeeping.

use serde::{Deserialize, Serialize};

use crate::ensemble::{diameters_in, AgentEnsemble, DiameterStats};
use crate::error::{param, shape, Result};
use crate::interact::{Interaction, Source};
use crate::kernels::{AlignmentSpec, KernelSpec};
use crate::model::ModelParams;
use crate::ode::{OdeSystem, Scheme, StepControl, Stepper};

/// `[x; v]` state of a weighted ensemble as an ODE system.
pub(crate) struct ParticleSystem {
    pub inter: Interaction,
    pub weights: Vec<f64>,
    pub frozen: bool,
}

impl ParticleSystem {
    pub fn new(params: &ModelParams, weights: Vec<f64>) -> Self {
        ParticleSystem { inter: Interaction::new(params), weights, frozen: false }
    }
}

impl OdeSystem for ParticleSystem {
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let nd = y.len() / 2;
        let (x, v) = y.split_at(nd);
        let (dx, dv) = dy.split_at_mut(nd);
        dx.copy_from_slice(v);
        if self.frozen {
            dv.fill(0.0);
        } else {
            self.inter.accelerations(x, v, Source { x, v, w: &self.weights }, dv);
        }
    }
}

pub(crate) fn pack(ens: &AgentEnsemble) -> Vec<f64> {
    let mut y = Vec::with_capacity(2 * ens.positions.len());
    y.extend_from_slice(&ens.positions);
    y.extend_from_slice(&ens.velocities);
    y
}

pub(crate) fn unpack(y: &[f64], dim: usize, weights: &[f64]) -> AgentEnsemble {
    let nd = y.len() / 2;
    AgentEnsemble { dim, positions: y[..nd].to_vec(), velocities: y[nd..].to_vec(), weights: weights.to_vec() }
}

fn check(ens: &AgentEnsemble, params: &ModelParams) -> Result<()> {
    ens.validate()?;
    if ens.dim != params.d {
        return Err(shape(format!("ensemble dimension {} differs from model dimension {}", ens.dim, params.d)));
    }
    params.validate()
}

/// Accelerations of a free-space ensemble.
pub fn force_deterministic(ens: &AgentEnsemble, kernel: &KernelSpec, align: &AlignmentSpec) -> Result<Vec<f64>> {
    let mut params = ModelParams::new(align.p, kernel.alpha, ens.dim);
    params.kernel = kernel.clone();
    if !(1..=3).contains(&ens.dim) {
        return Err(shape(format!("dimension {} is not supported (1, 2 or 3)", ens.dim)));
    }
    force_in(ens, &params)
}

/// Accelerations under the model's domain and kernel.
pub fn force_in(ens: &AgentEnsemble, params: &ModelParams) -> Result<Vec<f64>> {
    check(ens, params)?;
    let inter = Interaction::new(params);
    let mut out = vec![0.0; ens.positions.len()];
    let src = Source { x: &ens.positions, v: &ens.velocities, w: &ens.weights };
    inter.accelerations(&ens.positions, &ens.velocities, src, &mut out);
    Ok(out)
}

/// One accepted integration step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub ensemble: AgentEnsemble,
    pub dt_taken: f64,
    pub error_estimate: Option<f64>,
}

/// Single step; for `adaptive_rk45` `dt` is the trial step and the default
/// tolerances apply.
pub fn step(ens: &AgentEnsemble, params: &ModelParams, dt: f64, scheme: Scheme) -> Result<StepResult> {
    let ctl = match scheme {
        Scheme::AdaptiveRk45 => StepControl { dt, ..StepControl::default() },
        s => StepControl::fixed(s, dt),
    };
    step_with(ens, params, &ctl)
}

pub fn step_with(ens: &AgentEnsemble, params: &ModelParams, ctl: &StepControl) -> Result<StepResult> {
    check(ens, params)?;
    ctl.validate()?;
    let sys = ParticleSystem::new(params, ens.weights.clone());
    let mut y = pack(ens);
    let mut st = Stepper::new(*ctl, y.len());
    let out = st.step(&sys, 0.0, &mut y, f64::INFINITY)?;
    Ok(StepResult { ensemble: unpack(&y, ens.dim, &ens.weights), dt_taken: out.dt_taken, error_estimate: out.error_estimate })
}

/// Sample times of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputPolicy {
    /// `samples` equispaced times on `[0, t_end]`.
    Linear { samples: usize },
    /// `0` followed by `samples` log-spaced times on `[t_min, t_end]`.
    Log { samples: usize, t_min: f64 },
    /// Explicit times (0 is prepended when missing).
    Times { times: Vec<f64> },
}

impl OutputPolicy {
    pub fn times(&self, t_end: f64) -> Result<Vec<f64>> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(param(format!("t_end = {t_end} must be positive")));
        }
        let ts = match self {
            OutputPolicy::Linear { samples } => {
                let n = (*samples).max(2);
                (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
            }
            OutputPolicy::Log { samples, t_min } => {
                if !(*t_min > 0.0 && *t_min < t_end) {
                    return Err(param("log sampling needs 0 < t_min < t_end"));
                }
                let n = (*samples).max(2);
                let (a, b) = (t_min.ln(), t_end.ln());
                let mut v = vec![0.0];
                v.extend((0..n).map(|k| if k + 1 == n { t_end } else { (a + (b - a) * k as f64 / (n - 1) as f64).exp() }));
                v
            }
            OutputPolicy::Times { times } => {
                let mut v = times.clone();
                if v.first() != Some(&0.0) {
                    v.insert(0, 0.0);
                }
                v
            }
        };
        if ts.windows(2).any(|w| !(w[1] > w[0])) || ts.iter().any(|t| *t > t_end) {
            return Err(param("sample times must be strictly increasing within [0, t_end]"));
        }
        Ok(ts)
    }
}

/// Integration options for [`simulate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub control: StepControl,
    #[serde(default)]
    pub store_snapshots: bool,
    /// Velocities are frozen once `V` falls below this value.
    #[serde(default = "freeze_default")]
    pub freeze_below: f64,
}

fn freeze_default() -> f64 {
    1e-12
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { control: StepControl::default(), store_snapshots: false, freeze_below: freeze_default() }
    }
}

impl SimOptions {
    pub fn with_control(control: StepControl) -> Self {
        SimOptions { control, ..Self::default() }
    }

    pub fn snapshots(mut self) -> Self {
        self.store_snapshots = true;
        self
    }
}

/// Time series of diameters (and optionally states) of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub params: ModelParams,
    pub times: Vec<f64>,
    pub snapshots: Option<Vec<AgentEnsemble>>,
    pub diameters: Vec<DiameterStats>,
    pub seed: Option<u64>,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub frozen_at: Option<f64>,
}

impl TrajectoryRecord {
    pub fn spatial(&self) -> Vec<f64> {
        self.diameters.iter().map(|d| d.spatial).collect()
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.diameters.iter().map(|d| d.velocity).collect()
    }

    pub fn last_snapshot(&self) -> Option<&AgentEnsemble> {
        self.snapshots.as_ref().and_then(|s| s.last())
    }
}

/// Integrates the agent system to `t_end`, recording diameters at the sample times.
pub fn simulate(
    init: &AgentEnsemble,
    params: &ModelParams,
    t_end: f64,
    policy: &OutputPolicy,
    opts: &SimOptions,
) -> Result<TrajectoryRecord> {
    check(init, params)?;
    opts.control.validate()?;
    let times = policy.times(t_end)?;
    let mut sys = ParticleSystem::new(params, init.weights.clone());
    let mut y = pack(init);
    let nd = init.positions.len();
    let mut st = Stepper::new(opts.control, y.len());
    let mut t = 0.0;
    let mut diam = Vec::with_capacity(times.len());
    let mut snaps = opts.store_snapshots.then(Vec::new);
    let mut frozen_at = None;
    for &tk in &times {
        if tk > t {
            if sys.frozen {
                let (x, v) = y.split_at_mut(nd);
                x.iter_mut().zip(v.iter()).for_each(|(xi, vi)| *xi += vi * (tk - t));
                t = tk;
            } else {
                st.advance(&sys, &mut t, &mut y, tk)?;
            }
        }
        let mut ens = unpack(&y, init.dim, &init.weights);
        let mut s = diameters_in(&ens, &params.domain);
        s.t = tk;
        diam.push(s);
        if !sys.frozen && s.velocity < opts.freeze_below {
            sys.frozen = true;
            frozen_at = Some(tk);
        }
        if let Some(v) = snaps.as_mut() {
            ens.wrap_into(&params.domain);
            v.push(ens);
        }
    }
    Ok(TrajectoryRecord {
        params: params.clone(),
        times,
        snapshots: snaps,
        diameters: diam,
        seed: None,
        accepted_steps: st.accepted,
        rejected_steps: st.rejected,
        frozen_at,
    })
}

/// `(V_{k+1} − V_k)/Δt + c_p φ(D_k + V_k Δt) V_{k+1}^{p−1}` per sample interval;
/// the paired diameter inequality makes every entry `≤ 0` up to
/// discretization error.
pub fn paired_inequality_residuals(rec: &TrajectoryRecord) -> Vec<f64> {
    let align = rec.params.align();
    let c = align.c_p();
    rec.diameters
        .windows(2)
        .map(|w| {
            let dt = w[1].t - w[0].t;
            let phi = rec.params.kernel.eval(w[0].spatial + w[0].velocity * dt);
            (w[1].velocity - w[0].velocity) / dt + c * phi * w[1].velocity.powf(align.p - 1.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lone_agent_feels_nothing() {
        let e = AgentEnsemble::uniform(2, vec![0.3, 0.1], vec![1.0, -2.0]).unwrap();
        let f = force_deterministic(&e, &KernelSpec::power_law(0.5), &AlignmentSpec { p: 3.0 }).unwrap();
        assert_eq!(f, vec![0.0, 0.0]);
    }

    #[test]
    fn two_agent_linear_example() {
        let e = AgentEnsemble::uniform(2, vec![0.0, 5.0, -2.0, 1.0], vec![1.0, 0.0, -1.0, 0.0]).unwrap();
        let f = force_deterministic(&e, &KernelSpec::power_law(0.0), &AlignmentSpec { p: 2.0 }).unwrap();
        assert_eq!(f, vec![-1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let e = AgentEnsemble::uniform(1, vec![0.0], vec![0.0]).unwrap();
        let r = step(&e, &ModelParams::new(3.0, 0.0, 2), 0.1, Scheme::Rk4);
        assert!(matches!(r, Err(crate::error::Error::Shape(_))));
    }

    #[test]
    fn fixed_point_is_unchanged() {
        let e = AgentEnsemble::uniform(1, vec![0.0, 1.0, 4.0], vec![0.0; 3]).unwrap();
        for s in [Scheme::Euler, Scheme::Rk4, Scheme::AdaptiveRk45] {
            let r = step(&e, &ModelParams::new(2.5, 0.5, 1), 0.1, s).unwrap();
            assert_eq!(r.ensemble, e);
        }
    }

    #[test]
    fn log_policy_is_increasing() {
        let ts = OutputPolicy::Log { samples: 50, t_min: 0.1 }.times(1e3).unwrap();
        assert_eq!(ts[0], 0.0);
        assert_eq!(*ts.last().unwrap(), 1e3);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert!(OutputPolicy::Times { times: vec![2.0, 1.0] }.times(3.0).is_err());
    }
}
