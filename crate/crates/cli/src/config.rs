//! Experiment configuration: TOML in, validated and normalized out.

use std::fmt;

use flockmf::dynamics::OutputPolicy;
use flockmf::kernels::{KernelForm, KernelSpec, NoiseSpec};
use flockmf::ode::{Scheme, StepControl};
use flockmf::{Domain, InitialSampler, ModelParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    FlockingRates,
    Stability,
    Cauchy,
    Poc,
    StochasticCoupling,
    LemmaLab,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::FlockingRates => "flocking_rates",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Cauchy => "cauchy",
            ExperimentKind::Poc => "poc",
            ExperimentKind::StochasticCoupling => "stochastic_coupling",
            ExperimentKind::LemmaLab => "lemma_lab",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub p: f64,
    pub alpha: f64,
    pub d: usize,
    #[serde(default = "power_law")]
    pub kernel: KernelForm,
    #[serde(default)]
    pub sigma2: f64,
    #[serde(default = "free_space")]
    pub domain: Domain,
}

fn power_law() -> KernelForm {
    KernelForm::PowerLaw
}

fn free_space() -> Domain {
    Domain::FreeSpace
}

/// How the second initial ensemble of a stability run is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pairing {
    /// Same agents, every velocity shifted by `shift` along the first axis.
    VelocityShift { shift: f64 },
    /// A second independent sample.
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
    #[serde(default)]
    pub reference_size: Option<usize>,
    #[serde(default)]
    pub replicas: Option<usize>,
    /// Replicas become `max(replicas, agent_budget / N)` when set.
    #[serde(default)]
    pub agent_budget: Option<usize>,
    #[serde(default)]
    pub tracked: Option<usize>,
    #[serde(default = "one")]
    pub k: usize,
    pub t_end: f64,
    #[serde(default = "adaptive")]
    pub scheme: Scheme,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "rtol")]
    pub rtol: f64,
    #[serde(default = "atol")]
    pub atol: f64,
    /// Explicit sample times for coupling and Cauchy sweeps.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// Times at which `N`-scaling is fitted.
    #[serde(default)]
    pub fit_times: Option<Vec<f64>>,
    #[serde(default)]
    pub sample_every: Option<usize>,
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default)]
    pub pairing: Option<Pairing>,
    /// Fit window `[t0, t1]` for rate and envelope fits.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default = "slack")]
    pub slack: f64,
    /// Relative tolerance on fitted decay exponents.
    #[serde(default = "rate_tolerance")]
    pub rate_tolerance: f64,
    /// Accepted range of the propagation-of-chaos slope.
    #[serde(default = "slope_range")]
    pub slope_range: [f64; 2],
    #[serde(default = "grid_samples")]
    pub grid_samples: usize,
}

fn one() -> usize {
    1
}
fn adaptive() -> Scheme {
    Scheme::AdaptiveRk45
}
fn rtol() -> f64 {
    1e-10
}
fn atol() -> f64 {
    1e-14
}
fn slack() -> f64 {
    1.2
}
fn rate_tolerance() -> f64 {
    0.1
}
fn slope_range() -> [f64; 2] {
    [-0.6, -0.4]
}
fn grid_samples() -> usize {
    201
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_policy")]
    pub sampling: OutputPolicy,
    #[serde(default)]
    pub snapshots: bool,
}

fn default_policy() -> OutputPolicy {
    OutputPolicy::Log { samples: 200, t_min: 0.01 }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { sampling: default_policy(), snapshots: false }
    }
}

fn default_initial() -> InitialSampler {
    InitialSampler::boxed(0.0, 1.0, 1.0)
}

/// One experiment: model, initial law, run parameters and output policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[serde(default)]
    pub threads: Option<usize>,
    pub model: ModelSection,
    #[serde(default = "default_initial")]
    pub initial: InitialSampler,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// One violated constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config:{}", list(.0))]
    Invalid(Vec<FieldError>),
}

fn list(v: &[FieldError]) -> String {
    v.iter().map(|e| format!("\n  {}: {}", e.field, e.message)).collect()
}

impl ConfigError {
    pub fn fields(&self) -> Vec<&str> {
        match self {
            ConfigError::Parse(_) => Vec::new(),
            ConfigError::Invalid(v) => v.iter().map(|e| e.field.as_str()).collect(),
        }
    }
}

struct Violations(Vec<FieldError>);

impl Violations {
    fn push(&mut self, field: &str, message: impl fmt::Display) {
        self.0.push(FieldError { field: field.into(), message: message.to_string() });
    }

    fn require(&mut self, ok: bool, field: &str, message: impl fmt::Display) {
        if !ok {
            self.push(field, message);
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Like [`from_toml`](Self::from_toml), and also requires the
    /// `experiment` field to be `kind`.
    pub fn from_toml_as(text: &str, kind: ExperimentKind) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut errors = match cfg.validate() {
            Ok(()) => Vec::new(),
            Err(ConfigError::Invalid(v)) => v,
            Err(e) => return Err(e),
        };
        if cfg.experiment != kind {
            errors.insert(
                0,
                FieldError {
                    field: "experiment".into(),
                    message: format!("is {}, but this command runs {}", cfg.experiment.name(), kind.name()),
                },
            );
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    pub fn model_params(&self) -> ModelParams {
        let m = &self.model;
        let kernel = KernelSpec { form: m.kernel.clone(), ..KernelSpec::power_law(m.alpha) };
        ModelParams::new(m.p, m.alpha, m.d)
            .with_kernel(kernel)
            .with_noise(NoiseSpec::linear(m.sigma2))
            .with_domain(m.domain)
    }

    pub fn step_control(&self) -> StepControl {
        let r = &self.run;
        match r.scheme {
            Scheme::AdaptiveRk45 => StepControl::adaptive(r.rtol, r.atol),
            s => StepControl::fixed(s, r.dt.unwrap_or(f64::NAN)),
        }
    }

    /// Every violated constraint, each tagged with its dotted field path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Violations(Vec::new());
        let m = &self.model;
        v.require(m.p.is_finite() && m.p >= 2.0, "model.p", format!("must be >= 2, got {}", m.p));
        v.require(m.alpha >= 0.0 && m.alpha < 1.0, "model.alpha", format!("must lie in [0, 1), got {}", m.alpha));
        v.require((1..=3).contains(&m.d), "model.d", format!("must be 1, 2 or 3, got {}", m.d));
        v.require(m.sigma2.is_finite() && m.sigma2 >= 0.0, "model.sigma2", format!("must be finite and >= 0, got {}", m.sigma2));
        if let Domain::Torus { period } = m.domain {
            v.require(period > 0.0 && period.is_finite(), "model.domain", format!("period must be positive, got {period}"));
        }
        if let KernelForm::CustomTable { .. } = m.kernel {
            if m.alpha >= 0.0 && m.alpha < 1.0 {
                if let Err(e) = self.model_params().kernel.validate() {
                    v.push("model.kernel", e);
                }
            }
        }
        if let Err(e) = self.initial.validate() {
            v.push("initial", e);
        }
        if let Some(t) = self.threads {
            v.require(t >= 1, "threads", "must be >= 1");
        }
        let r = &self.run;
        v.require(r.t_end > 0.0 && r.t_end.is_finite(), "run.t_end", format!("must be positive, got {}", r.t_end));
        match r.scheme {
            Scheme::AdaptiveRk45 => {
                v.require(r.rtol > 0.0, "run.rtol", "must be positive");
                v.require(r.atol > 0.0, "run.atol", "must be positive");
            }
            _ => v.require(r.dt.is_some_and(|d| d > 0.0 && d.is_finite()), "run.dt", "fixed-step schemes need dt > 0"),
        }
        v.require(r.slack >= 1.0, "run.slack", "must be >= 1");
        v.require(r.rate_tolerance > 0.0, "run.rate_tolerance", "must be positive");
        let kind = self.experiment;
        let single = matches!(kind, ExperimentKind::Simulate | ExperimentKind::FlockingRates | ExperimentKind::Stability);
        let sweep = matches!(kind, ExperimentKind::Cauchy | ExperimentKind::Poc | ExperimentKind::StochasticCoupling);
        if single {
            v.require(r.n.is_some_and(|n| n >= 1), "run.n", "must be >= 1");
        }
        if sweep {
            match &r.n_list {
                Some(l) if !l.is_empty() && l.iter().all(|n| *n >= 1) => {
                    v.require(l.windows(2).all(|w| w[1] > w[0]), "run.n_list", "must be strictly increasing");
                    v.require(r.k >= 1 && l.iter().all(|n| r.k <= *n), "run.k", "must satisfy 1 <= k <= min N");
                }
                _ => v.push("run.n_list", "must be a nonempty list of sizes >= 1"),
            }
            v.require(
                r.times.as_ref().is_some_and(|t| !t.is_empty() && t.iter().all(|s| *s >= 0.0 && *s <= r.t_end))
                    || kind == ExperimentKind::StochasticCoupling,
                "run.times",
                "must list sample times within [0, t_end]",
            );
        }
        if matches!(kind, ExperimentKind::Poc | ExperimentKind::StochasticCoupling) {
            v.require(r.replicas.is_some_and(|n| n >= 1), "run.replicas", "must be >= 1");
            v.require(r.reference_size.is_some_and(|n| n >= 1), "run.reference_size", "must be >= 1");
            if let Some(f) = &r.fit_times {
                let grid = self.sample_times();
                v.require(
                    !f.is_empty() && f.iter().all(|t| grid.iter().any(|s| (s - t).abs() < 1e-9)),
                    "run.fit_times",
                    "every fit time must be a sample time",
                );
            } else {
                v.push("run.fit_times", "must list at least one sample time");
            }
        }
        if kind == ExperimentKind::StochasticCoupling {
            v.require(m.domain.is_torus(), "model.domain", "stochastic runs need a torus");
            let dt = r.dt.unwrap_or(f64::NAN);
            v.require(dt > 0.0, "run.dt", "stochastic runs need dt > 0");
            v.require(r.sample_every.is_some_and(|s| s >= 1), "run.sample_every", "must be >= 1");
            if dt > 0.0 {
                let steps = (r.t_end / dt).round();
                v.require((steps * dt - r.t_end).abs() <= 1e-9 * r.t_end.max(1.0), "run.t_end", "must be a whole number of steps");
            }
            for o in &r.observables {
                if let Err(e) = flockmf::coupling::Observable::parse(o).and_then(|ob| ob.validate(m.d)) {
                    v.push("run.observables", e);
                }
            }
        }
        if kind == ExperimentKind::Stability {
            if let Some(Pairing::VelocityShift { shift }) = r.pairing {
                v.require(shift.is_finite() && shift != 0.0, "run.pairing", "shift must be finite and nonzero");
            }
        }
        if let Some([a, b]) = r.window {
            v.require(a >= 0.0 && b > a && b <= r.t_end, "run.window", "needs 0 <= t0 < t1 <= t_end");
        }
        if single {
            if let Err(e) = self.output.sampling.times(r.t_end.max(f64::MIN_POSITIVE)) {
                v.push("output.sampling", e);
            }
        }
        if kind == ExperimentKind::LemmaLab {
            v.require(r.grid_samples >= 3, "run.grid_samples", "must be >= 3");
        }
        if v.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v.0))
        }
    }

    /// Recorded times of a sweep (stochastic runs sample every `sample_every` steps).
    pub fn sample_times(&self) -> Vec<f64> {
        let r = &self.run;
        if self.experiment == ExperimentKind::StochasticCoupling {
            let (dt, every) = (r.dt.unwrap_or(1.0), r.sample_every.unwrap_or(1).max(1));
            let steps = (r.t_end / dt).round() as usize;
            let mut t: Vec<f64> = (0..=steps).step_by(every).map(|k| k as f64 * dt).collect();
            if steps % every != 0 {
                t.push(steps as f64 * dt);
            }
            t
        } else {
            let mut t = r.times.clone().unwrap_or_default();
            if t.first() != Some(&0.0) {
                t.insert(0, 0.0);
            }
            t
        }
    }

    /// Canonical TOML with every default filled in, excluding the thread
    /// count (outputs do not depend on it).
    pub fn normalized(&self) -> String {
        let mut c = self.clone();
        c.threads = None;
        toml::to_string(&c).expect("config serializes")
    }

    /// SHA-256 of [`normalized`](Self::normalized), hex encoded.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.normalized().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Annotated example config printed by `--print-schema`.
pub const SCHEMA: &str = r#"# flockmf experiment config (TOML)
#
# experiment = simulate | flocking_rates | stability | cauchy | poc
#              | stochastic_coupling | lemma_lab
experiment = "flocking_rates"
seed = 1                      # required; every random stream derives from it
# threads = 4                 # worker threads; outputs do not depend on it

[model]
p = 2.5                       # alignment exponent, >= 2
alpha = 0.25                  # kernel decay (1+r)^-alpha, in [0, 1)
d = 2                         # 1, 2 or 3
# sigma2 = 0.1                # noise level, h(s) = sigma2 * s
# kernel = { kind = "custom_table", radii = [0.0, 1.0], values = [1.0, 0.5] }
# domain = { kind = "torus", period = 1.0 }   # default: free_space

[initial]                     # i.i.d. compact initial law
positions = { kind = "uniform_box", lo = 0.0, hi = 1.0 }
velocities = { kind = "uniform_ball", radius = 1.0 }
# velocities = { kind = "truncated_gaussian", std = 0.5, radius = 1.0 }
center_velocities = false

[run]
n = 64                        # simulate, flocking_rates, stability
# n_list = [64, 128, 256]     # cauchy, poc, stochastic_coupling (increasing)
# reference_size = 4096       # poc, stochastic_coupling
# replicas = 32               # poc, stochastic_coupling
# agent_budget = 65536        # stochastic_coupling: replicas >= budget / N
# tracked = 64                # characteristic copies per replica
# k = 1                       # marginal size
t_end = 1000.0
scheme = "adaptive_rk45"      # euler | rk4 | adaptive_rk45
# dt = 0.05                   # fixed-step schemes and stochastic runs
rtol = 1e-10
atol = 1e-14
# times = [0.5, 1.0]          # sample times of sweeps
# fit_times = [1.0]           # N-scaling fit times (subset of the samples)
# sample_every = 20           # stochastic: steps between samples
# observables = ["velocity:0", "position_cos:0", "bump:0.25", "constant"]
# pairing = { kind = "velocity_shift", shift = 0.1 }   # stability
# window = [1.0, 100.0]       # fit window
slack = 1.2                   # envelope slack factor
rate_tolerance = 0.1          # relative tolerance on decay exponents
slope_range = [-0.6, -0.4]    # poc: accepted slope of log proxy vs log N
grid_samples = 201            # lemma_lab: samples per system

[output]
sampling = { kind = "log", samples = 200, t_min = 0.01 }
# sampling = { kind = "linear", samples = 101 }
# sampling = { kind = "times", times = [1.0, 10.0, 100.0] }
snapshots = false             # store binary FMF1 snapshots of the final state
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_parses() {
        let c = ExperimentConfig::from_toml(SCHEMA).unwrap();
        assert_eq!(c.experiment, ExperimentKind::FlockingRates);
        assert_eq!(c.run.n, Some(64));
    }

    #[test]
    fn hash_ignores_threads() {
        let mut c = ExperimentConfig::from_toml(SCHEMA).unwrap();
        let h = c.hash();
        c.threads = Some(8);
        assert_eq!(c.hash(), h);
        c.seed = 2;
        assert_ne!(c.hash(), h);
        assert_eq!(h.len(), 64);
    }

    #[test]
    fn normalized_form_reparses_to_the_same_hash() {
        let c = ExperimentConfig::from_toml(SCHEMA).unwrap();
        let back = ExperimentConfig::from_toml(&c.normalized()).unwrap();
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn every_violation_is_named() {
        let text = SCHEMA.replace("p = 2.5", "p = 1.5").replace("alpha = 0.25", "alpha = 1.5").replace("t_end = 1000.0", "t_end = -1.0");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        let fields = err.fields();
        for f in ["model.p", "model.alpha", "run.t_end"] {
            assert!(fields.contains(&f), "{err}");
        }
        assert!(err.to_string().contains("model.p: must be >= 2, got 1.5"));
    }

    #[test]
    fn unknown_and_missing_fields_fail_to_parse() {
        assert!(matches!(ExperimentConfig::from_toml(&SCHEMA.replace("seed = 1", "")), Err(ConfigError::Parse(_))));
        let typo = SCHEMA.replace("rtol =", "rtoll =");
        let err = ExperimentConfig::from_toml(&typo).unwrap_err().to_string();
        assert!(err.contains("rtoll"), "{err}");
    }
}
