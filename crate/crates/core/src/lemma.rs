//! Comparison systems `a' = b`, `b' = K(t) a + g(t)` and their closed-form
//! envelopes.
//!
//! The saturated (equality) system dominates every nonnegative solution of
//! the corresponding inequality system, so checking the envelopes on the
//! saturated solution checks them for the whole class.
//!
//! The time bracket is `B(t) = 1 + t` by default. The Lyapunov arguments
//! behind the envelopes use `B' = 1`, which the smooth bracket `√(1 + t²)`
//! does not satisfy; [`Bracket::Japanese`] is kept for comparison runs.
//! In the logarithmic variant the slowly growing factor is
//! `ℓ(t) = 1 + log B(t)`, so that `ℓ(0) = 1` and the envelope constants stay
//! finite at the origin.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::ode::{OdeSystem, StepControl, Stepper};
use crate::quad;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bracket {
    /// `1 + t`.
    #[default]
    Affine,
    /// `√(1 + t²)`.
    Japanese,
}

impl Bracket {
    #[inline]
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Bracket::Affine => 1.0 + t,
            Bracket::Japanese => t.hypot(1.0),
        }
    }

    /// `ℓ(t) = 1 + log B(t)`.
    #[inline]
    pub fn log(self, t: f64) -> f64 {
        1.0 + self.eval(t).ln()
    }
}

/// Coefficient `K(t)` of `a` in the `b` equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    /// `C B^{-β}`.
    Power { beta: f64 },
    /// `C B^{-2} ℓ^{2α/(1-α)}`.
    LogCorrected { alpha: f64 },
}

/// Nonnegative source `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceTerm {
    Zero,
    /// `coeff · B^{exponent}`.
    Power { coeff: f64, exponent: f64 },
    /// Piecewise linear through `(times, values)`, held constant past the end.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl SourceTerm {
    pub fn eval(&self, t: f64, bracket: Bracket) -> f64 {
        match self {
            SourceTerm::Zero => 0.0,
            SourceTerm::Power { coeff, exponent } => coeff * bracket.eval(t).powf(*exponent),
            SourceTerm::Tabulated { times, values } => {
                let k = times.partition_point(|s| *s <= t);
                if k == 0 {
                    values[0]
                } else if k == times.len() {
                    values[k - 1]
                } else {
                    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    values[k - 1] + w * (values[k] - values[k - 1])
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SourceTerm::Zero => true,
            SourceTerm::Power { coeff, .. } => *coeff == 0.0,
            SourceTerm::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSystem {
    pub drift: Drift,
    pub c: f64,
    pub a0: f64,
    pub b0: f64,
    pub g: SourceTerm,
    #[serde(default)]
    pub bracket: Bracket,
}

/// Which envelope family applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaCase {
    /// `β > 2`: bounded `b`, at most linear `a`.
    Integrable,
    /// `β < 2`: stretched-exponential growth.
    SubCritical,
    /// `β = 2`: polynomial growth.
    Critical,
    /// Logarithmically corrected critical drift.
    LogCorrected,
}

impl ComparisonSystem {
    pub fn power(beta: f64, c: f64, a0: f64, b0: f64, g: SourceTerm) -> Self {
        ComparisonSystem { drift: Drift::Power { beta }, c, a0, b0, g, bracket: Bracket::Affine }
    }

    pub fn log_corrected(alpha: f64, c: f64, a0: f64, b0: f64, g: SourceTerm) -> Self {
        ComparisonSystem { drift: Drift::LogCorrected { alpha }, c, a0, b0, g, bracket: Bracket::Affine }
    }

    pub fn with_bracket(mut self, bracket: Bracket) -> Self {
        self.bracket = bracket;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(param(format!("C = {} must be positive", self.c)));
        }
        if !(self.a0 >= 0.0 && self.b0 >= 0.0) {
            return Err(param("a0 and b0 must be nonnegative"));
        }
        match self.drift {
            Drift::Power { beta } if !(beta >= 0.0 && beta.is_finite()) => {
                return Err(param(format!("beta = {beta} must be finite and >= 0")))
            }
            Drift::LogCorrected { alpha } if !(0.0..1.0).contains(&alpha) => {
                return Err(param(format!("alpha = {alpha} must lie in [0, 1)")))
            }
            _ => {}
        }
        match &self.g {
            SourceTerm::Power { coeff, exponent } if !(*coeff >= 0.0 && exponent.is_finite()) => {
                Err(param("source coefficient must be nonnegative"))
            }
            SourceTerm::Tabulated { times, values }
                if times.is_empty()
                    || times.len() != values.len()
                    || times.windows(2).any(|w| !(w[1] > w[0]))
                    || values.iter().any(|v| !(*v >= 0.0)) =>
            {
                Err(param("tabulated source needs increasing times and nonnegative values"))
            }
            _ => Ok(()),
        }
    }

    pub fn case(&self) -> LemmaCase {
        match self.drift {
            Drift::Power { beta } if beta > 2.0 => LemmaCase::Integrable,
            Drift::Power { beta } if beta < 2.0 => LemmaCase::SubCritical,
            Drift::Power { .. } => LemmaCase::Critical,
            Drift::LogCorrected { .. } => LemmaCase::LogCorrected,
        }
    }

    /// `K(t)`.
    pub fn drift_at(&self, t: f64) -> f64 {
        let b = self.bracket.eval(t);
        match self.drift {
            Drift::Power { beta } => self.c * b.powf(-beta),
            Drift::LogCorrected { alpha } => {
                self.c * b.powi(-2) * self.bracket.log(t).powf(2.0 * alpha / (1.0 - alpha))
            }
        }
    }

    pub fn source_at(&self, t: f64) -> f64 {
        self.g.eval(t, self.bracket)
    }
}

struct Saturated<'a>(&'a ComparisonSystem);

impl OdeSystem for Saturated<'_> {
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = self.0.drift_at(t) * y[0] + self.0.source_at(t);
    }
}

/// Saturated solution sampled on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturatedSolution {
    pub times: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Integration tolerances of the saturated solve.
pub const SATURATED_RTOL: f64 = 1e-12;
pub const SATURATED_ATOL: f64 = 1e-14;

/// `samples` equispaced points on `[0, t_end]`.
pub fn sample_grid(t_end: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

/// Integrates the equality system on `times` (which must start at 0).
pub fn solve_saturated_on(sys: &ComparisonSystem, times: &[f64]) -> Result<SaturatedSolution> {
    sys.validate()?;
    if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(param("sample times must start at 0 and increase"));
    }
    let mut st = Stepper::new(StepControl { dt: 1e-4, ..StepControl::adaptive(SATURATED_RTOL, SATURATED_ATOL) }, 2);
    let mut y = [sys.a0, sys.b0];
    let mut t = 0.0;
    let (mut a, mut b) = (Vec::with_capacity(times.len()), Vec::with_capacity(times.len()));
    for &tk in times {
        st.advance(&Saturated(sys), &mut t, &mut y, tk)?;
        a.push(y[0]);
        b.push(y[1]);
    }
    Ok(SaturatedSolution { times: times.to_vec(), a, b })
}

pub fn solve_saturated(sys: &ComparisonSystem, t_end: f64, samples: usize) -> Result<SaturatedSolution> {
    if !(t_end > 0.0) {
        return Err(param("t_end must be positive"));
    }
    solve_saturated_on(sys, &sample_grid(t_end, samples))
}

/// Exponents and constants of the envelope family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum EnvelopeConstants {
    Integrable { c1: f64, c2: f64 },
    SubCritical { gamma: f64, c_bar: f64, c3: f64, c4: f64 },
    Critical { zeta: f64, c5: f64, c6: f64 },
    LogCorrected { theta: f64, c_bar: f64, c7: f64, c8: f64 },
}

impl EnvelopeConstants {
    pub fn gamma(&self) -> Result<(f64, f64)> {
        match *self {
            EnvelopeConstants::SubCritical { gamma, c_bar, .. } => Ok((gamma, c_bar)),
            _ => Err(Error::Precondition("gamma and C-bar exist only for beta < 2".into())),
        }
    }

    pub fn zeta(&self) -> Result<f64> {
        match *self {
            EnvelopeConstants::Critical { zeta, .. } => Ok(zeta),
            _ => Err(Error::Precondition("zeta exists only for beta = 2".into())),
        }
    }

    pub fn theta(&self) -> Result<(f64, f64)> {
        match *self {
            EnvelopeConstants::LogCorrected { theta, c_bar, .. } => Ok((theta, c_bar)),
            _ => Err(Error::Precondition("theta exists only for the log-corrected drift".into())),
        }
    }
}

pub fn envelope_constants(sys: &ComparisonSystem) -> Result<EnvelopeConstants> {
    sys.validate()?;
    let (c, a0, b0) = (sys.c, sys.a0, sys.b0);
    Ok(match (sys.case(), sys.drift) {
        (LemmaCase::Integrable, Drift::Power { beta }) => {
            let c2 = (c / ((beta - 1.0) * (beta - 2.0))).exp();
            EnvelopeConstants::Integrable { c1: (c * a0 / (beta - 1.0) + b0) * c2, c2 }
        }
        (LemmaCase::SubCritical, Drift::Power { beta }) => {
            let gamma = 1.0 - beta / 2.0;
            let c_bar = (1.0 - gamma + ((1.0 - gamma).powi(2) + 4.0 * c).sqrt()) / (2.0 * gamma);
            let e = (-c_bar).exp();
            EnvelopeConstants::SubCritical {
                gamma,
                c_bar,
                c3: (a0 + c_bar * gamma * b0 / c) * e,
                c4: (c * a0 / (c_bar * gamma) + b0) * e,
            }
        }
        (LemmaCase::Critical, _) => {
            let zeta = (1.0 + (1.0 + 4.0 * c).sqrt()) / 2.0;
            EnvelopeConstants::Critical { zeta, c5: a0 + zeta * b0 / c, c6: c * a0 / zeta + b0 }
        }
        (_, Drift::LogCorrected { alpha }) => {
            let theta = 1.0 / (1.0 - alpha);
            let c_bar = (1.0 + (1.0 + 4.0 * c).sqrt()) / (2.0 * theta);
            let e = (-c_bar).exp();
            EnvelopeConstants::LogCorrected {
                theta,
                c_bar,
                c7: (a0 + c_bar * theta * b0 / c) * e,
                c8: (c * a0 / (c_bar * theta) + b0) * e,
            }
        }
        _ => unreachable!(),
    })
}

/// `x^q − 1` without cancellation near `x = 1`.
#[inline]
fn pow_m1(x: f64, q: f64) -> f64 {
    (q * x.ln()).exp_m1()
}

/// Absolute tolerance of the source-integral quadrature per sample interval.
pub const QUAD_TOL: f64 = 1e-10;

/// Envelope tolerance: `bound − numeric ≥ −(REL · |bound| + ABS)`.
pub const ENVELOPE_REL_TOL: f64 = 1e-6;
pub const ENVELOPE_ABS_TOL: f64 = 1e-9;

/// Envelopes `(a_bound, b_bound)` on `times`.
pub fn envelopes(sys: &ComparisonSystem, times: &[f64]) -> Result<(EnvelopeConstants, Vec<f64>, Vec<f64>)> {
    let k = envelope_constants(sys)?;
    let br = sys.bracket;
    let g = |s: f64| sys.source_at(s);
    let zero = sys.g.is_zero();
    let integral = |f: &dyn Fn(f64) -> f64| if zero { vec![0.0; times.len()] } else { quad::cumulative(f, times, QUAD_TOL) };
    let c = sys.c;
    let (ab, bb): (Vec<f64>, Vec<f64>) = match k {
        EnvelopeConstants::Integrable { c1, c2 } => {
            let g1 = integral(&g);
            let s1 = integral(&|s| s * g(s));
            times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let h1 = t * g1[i] - s1[i];
                    (sys.a0 + c1 * t + c2 * h1, c1 + c2 * g1[i])
                })
                .unzip()
        }
        EnvelopeConstants::SubCritical { gamma, c_bar, .. } => {
            // everything carries the factor e^{C̄} to keep e^{±C̄B^γ} in range
            let g2 = integral(&|s| {
                let b = br.eval(s);
                b.powf(1.0 - gamma) * (-c_bar * pow_m1(b, gamma)).exp() * g(s)
            });
            let (c3, c4) = (sys.a0 + c_bar * gamma * sys.b0 / c, c * sys.a0 / (c_bar * gamma) + sys.b0);
            times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let b = br.eval(t);
                    let e = (c_bar * pow_m1(b, gamma)).exp();
                    ((c3 + c_bar * gamma * g2[i] / c) * e, (c4 + g2[i]) * b.powf(-(1.0 - gamma)) * e)
                })
                .unzip()
        }
        EnvelopeConstants::Critical { zeta, c5, c6 } => {
            let g3 = integral(&|s| br.eval(s).powf(-(zeta - 1.0)) * g(s));
            times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let b = br.eval(t);
                    ((c5 + zeta * g3[i] / c) * b.powf(zeta), (c6 + g3[i]) * b.powf(zeta - 1.0))
                })
                .unzip()
        }
        EnvelopeConstants::LogCorrected { theta, c_bar, .. } => {
            let g4 = integral(&|s| {
                let l = br.log(s);
                br.eval(s) * l.powf(-(theta - 1.0)) * (-c_bar * pow_m1(l, theta)).exp() * g(s)
            });
            let (c7, c8) = (sys.a0 + c_bar * theta * sys.b0 / c, c * sys.a0 / (c_bar * theta) + sys.b0);
            times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let l = br.log(t);
                    let e = (c_bar * pow_m1(l, theta)).exp();
                    (
                        (c7 + c_bar * theta * g4[i] / c) * e,
                        (c8 + g4[i]) * l.powf(theta - 1.0) * e / br.eval(t),
                    )
                })
                .unzip()
        }
    };
    Ok((k, ab, bb))
}

/// Saturated solution next to its envelopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub system: ComparisonSystem,
    pub times: Vec<f64>,
    pub a_numeric: Vec<f64>,
    pub b_numeric: Vec<f64>,
    pub a_bound: Vec<f64>,
    pub b_bound: Vec<f64>,
    pub a_margin: Vec<f64>,
    pub b_margin: Vec<f64>,
    pub constants: EnvelopeConstants,
    /// First sample where a margin falls below tolerance: `(t, margin, "a" | "b")`.
    pub first_violation: Option<(f64, f64, String)>,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.first_violation {
            Some((t, margin, which)) => Err(Error::EnvelopeViolation { t, margin, which }),
            None => Ok(self),
        }
    }

    /// Smallest margin relative to the bound.
    pub fn worst_relative_margin(&self) -> f64 {
        let rel = |m: &[f64], b: &[f64]| {
            m.iter().zip(b).map(|(m, b)| if *b > 0.0 { m / b } else { *m }).fold(f64::INFINITY, f64::min)
        };
        rel(&self.a_margin, &self.a_bound).min(rel(&self.b_margin, &self.b_bound))
    }
}

fn tolerance(bound: f64) -> f64 {
    ENVELOPE_REL_TOL * bound.abs() + ENVELOPE_ABS_TOL
}

/// Builds the report on an explicit grid; never fails on a violation.
pub fn envelope_report_on(sys: &ComparisonSystem, times: &[f64]) -> Result<EnvelopeReport> {
    let sol = solve_saturated_on(sys, times)?;
    let (constants, a_bound, b_bound) = envelopes(sys, times)?;
    let a_margin: Vec<f64> = a_bound.iter().zip(&sol.a).map(|(u, x)| u - x).collect();
    let b_margin: Vec<f64> = b_bound.iter().zip(&sol.b).map(|(u, x)| u - x).collect();
    let mut first_violation = None;
    for i in 0..times.len() {
        if !(a_margin[i] >= -tolerance(a_bound[i])) {
            first_violation = Some((times[i], a_margin[i], "a".to_string()));
            break;
        }
        if !(b_margin[i] >= -tolerance(b_bound[i])) {
            first_violation = Some((times[i], b_margin[i], "b".to_string()));
            break;
        }
    }
    Ok(EnvelopeReport {
        system: sys.clone(),
        times: times.to_vec(),
        a_numeric: sol.a,
        b_numeric: sol.b,
        a_bound,
        b_bound,
        a_margin,
        b_margin,
        constants,
        first_violation,
    })
}

/// Envelope check; a violation is returned as [`Error::EnvelopeViolation`].
pub fn check_envelope(sys: &ComparisonSystem, t_end: f64, samples: usize) -> Result<EnvelopeReport> {
    if !(t_end > 0.0) {
        return Err(param("t_end must be positive"));
    }
    envelope_report_on(sys, &sample_grid(t_end, samples))?.into_result()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Functional {
    L1,
    L2,
    L3,
    L4,
}

/// Functional values along the saturated solution and their a-priori
/// ceiling: `L(0) + source budget` for `L2`–`L4` and the Grönwall envelope
/// for `L1`. `L2` and `L4` are reported times `e^{C̄}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSeries {
    pub which: Functional,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub ceiling: Vec<f64>,
}

impl LyapunovSeries {
    /// Largest forward difference `L(t_{k+1}) − L(t_k)`.
    pub fn max_increase(&self) -> f64 {
        self.values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `L(t) − ceiling(t)`.
    pub fn max_excess(&self) -> f64 {
        self.values.iter().zip(&self.ceiling).map(|(v, c)| v - c).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn lyapunov_series(sys: &ComparisonSystem, times: &[f64], which: Functional) -> Result<LyapunovSeries> {
    let k = envelope_constants(sys)?;
    let wanted = match k {
        EnvelopeConstants::Integrable { .. } => Functional::L1,
        EnvelopeConstants::SubCritical { .. } => Functional::L2,
        EnvelopeConstants::Critical { .. } => Functional::L3,
        EnvelopeConstants::LogCorrected { .. } => Functional::L4,
    };
    if which != wanted {
        return Err(Error::Precondition(format!("{which:?} does not apply to this system; use {wanted:?}")));
    }
    let sol = solve_saturated_on(sys, times)?;
    let br = sys.bracket;
    let c = sys.c;
    let g = |s: f64| sys.source_at(s);
    let (values, ceiling): (Vec<f64>, Vec<f64>) = match k {
        EnvelopeConstants::Integrable { .. } => {
            let Drift::Power { beta } = sys.drift else { unreachable!() };
            let q = c / (beta - 1.0);
            let g1 = quad::cumulative(&g, times, QUAD_TOL);
            let l0 = q * sys.a0 + sys.b0;
            times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let b = br.eval(t);
                    let l = q * b.powf(1.0 - beta) * sol.a[i] + sol.b[i];
                    let gron = (q / (beta - 2.0) * (1.0 - b.powf(2.0 - beta))).exp();
                    (l, (l0 + g1[i]) * gron)
                })
                .unzip()
        }
        EnvelopeConstants::SubCritical { gamma, c_bar, .. } => {
            let w = c_bar * gamma;
            let f = |i: usize, t: f64| {
                let b = br.eval(t);
                let e = (-c_bar * pow_m1(b, gamma)).exp();
                c * w * e * sol.a[i] + w * w * b.powf(1.0 - gamma) * e * sol.b[i]
            };
            let budget = quad::cumulative(
                |s| {
                    let b = br.eval(s);
                    w * w * b.powf(1.0 - gamma) * (-c_bar * pow_m1(b, gamma)).exp() * g(s)
                },
                times,
                QUAD_TOL,
            );
            let l0 = f(0, times[0]);
            times.iter().enumerate().map(|(i, &t)| (f(i, t), l0 + budget[i])).unzip()
        }
        EnvelopeConstants::Critical { zeta, .. } => {
            let f = |i: usize, t: f64| {
                let b = br.eval(t);
                c * b.powf(-zeta) * sol.a[i] + zeta * b.powf(-(zeta - 1.0)) * sol.b[i]
            };
            let budget = quad::cumulative(|s| zeta * br.eval(s).powf(-(zeta - 1.0)) * g(s), times, QUAD_TOL);
            let l0 = f(0, times[0]);
            times.iter().enumerate().map(|(i, &t)| (f(i, t), l0 + budget[i])).unzip()
        }
        EnvelopeConstants::LogCorrected { theta, c_bar, .. } => {
            let w = c_bar * theta;
            let f = |i: usize, t: f64| {
                let l = br.log(t);
                let e = (-c_bar * pow_m1(l, theta)).exp();
                c * w * e * sol.a[i] + w * w * br.eval(t) * l.powf(-(theta - 1.0)) * e * sol.b[i]
            };
            let budget = quad::cumulative(
                |s| {
                    let l = br.log(s);
                    w * w * br.eval(s) * l.powf(-(theta - 1.0)) * (-c_bar * pow_m1(l, theta)).exp() * g(s)
                },
                times,
                QUAD_TOL,
            );
            let l0 = f(0, times[0]);
            times.iter().enumerate().map(|(i, &t)| (f(i, t), l0 + budget[i])).unzip()
        }
    };
    Ok(LyapunovSeries { which, times: times.to_vec(), values, ceiling })
}

/// The functional matching a system's case.
pub fn functional_for(sys: &ComparisonSystem) -> Functional {
    match sys.case() {
        LemmaCase::Integrable => Functional::L1,
        LemmaCase::SubCritical => Functional::L2,
        LemmaCase::Critical => Functional::L3,
        LemmaCase::LogCorrected => Functional::L4,
    }
}

/// Full factorial grid: `β ∈ {0, 0.5, …, 3}`, `C ∈ {0.1, 1, 10}`,
/// `a0, b0 ∈ {0, 1, 5}`, `g ∈ {0, B^{-1}, B^{-2}}` (567 systems).
pub fn standard_grid() -> Vec<ComparisonSystem> {
    let mut out = Vec::new();
    for beta in [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
        for c in [0.1, 1.0, 10.0] {
            for a0 in [0.0, 1.0, 5.0] {
                for b0 in [0.0, 1.0, 5.0] {
                    for g in [
                        SourceTerm::Zero,
                        SourceTerm::Power { coeff: 1.0, exponent: -1.0 },
                        SourceTerm::Power { coeff: 1.0, exponent: -2.0 },
                    ] {
                        out.push(ComparisonSystem::power(beta, c, a0, b0, g));
                    }
                }
            }
        }
    }
    out
}

/// Outcome of a grid sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub configurations: usize,
    pub violations: Vec<(ComparisonSystem, f64, f64, String)>,
    pub worst_relative_margin: f64,
}

/// Envelope reports for many systems in parallel.
pub fn run_grid(systems: &[ComparisonSystem], times: &[f64]) -> Result<GridSummary> {
    let reports: Vec<EnvelopeReport> =
        systems.par_iter().map(|s| envelope_report_on(s, times)).collect::<Result<Vec<_>>>()?;
    let violations = reports
        .iter()
        .filter_map(|r| r.first_violation.clone().map(|(t, m, w)| (r.system.clone(), t, m, w)))
        .collect();
    let worst_relative_margin = reports.iter().map(|r| r.worst_relative_margin()).fold(f64::INFINITY, f64::min);
    Ok(GridSummary { configurations: systems.len(), violations, worst_relative_margin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_arithmetic() {
        let k = envelope_constants(&ComparisonSystem::power(1.0, 2.0, 1.0, 1.0, SourceTerm::Zero)).unwrap();
        let (g, cb) = k.gamma().unwrap();
        assert_eq!(g, 0.5);
        assert!((cb - (0.5 + 8.25f64.sqrt())).abs() < 1e-14);
        assert!(k.zeta().is_err());
        let z = envelope_constants(&ComparisonSystem::power(2.0, 2.0, 1.0, 1.0, SourceTerm::Zero)).unwrap();
        assert_eq!(z.zeta().unwrap(), 2.0);
        let l = envelope_constants(&ComparisonSystem::log_corrected(0.0, 2.0, 1.0, 1.0, SourceTerm::Zero)).unwrap();
        assert_eq!(l.theta().unwrap(), (1.0, 2.0));
    }

    #[test]
    fn tiny_coupling_is_nearly_free() {
        let sys = ComparisonSystem::power(1.0, 1e-12, 2.0, 0.5, SourceTerm::Zero);
        let s = solve_saturated(&sys, 10.0, 11).unwrap();
        for (i, t) in s.times.iter().enumerate() {
            assert!((s.a[i] - (2.0 + 0.5 * t)).abs() < 1e-9);
            assert!((s.b[i] - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn validation() {
        assert!(ComparisonSystem::power(1.0, 0.0, 1.0, 1.0, SourceTerm::Zero).validate().is_err());
        assert!(ComparisonSystem::log_corrected(1.0, 1.0, 1.0, 1.0, SourceTerm::Zero).validate().is_err());
        let s = ComparisonSystem::power(3.0, 1.0, 1.0, 1.0, SourceTerm::Zero);
        assert!(lyapunov_series(&s, &[0.0, 1.0], Functional::L2).is_err());
    }
}
