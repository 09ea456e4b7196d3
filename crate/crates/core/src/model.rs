use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::kernels::{AlignmentSpec, KernelSpec, NoiseSpec};

/// Where positions live.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    FreeSpace,
    /// `[0, period)^d` with the minimum-image metric.
    Torus { period: f64 },
}

/// `d − L·round(d/L)` through an integer cast instead of a libm call; near
/// ties may land on either image.
#[inline(always)]
pub(crate) fn nearest_image(d: f64, period: f64) -> f64 {
    let q = d / period;
    if q.abs() < 4.5e15 {
        d - period * ((q + 0.5f64.copysign(q)) as i64 as f64)
    } else {
        d - period * q.round()
    }
}

impl Domain {
    pub fn unit_torus() -> Self {
        Domain::Torus { period: 1.0 }
    }

    #[inline(always)]
    pub fn displacement(&self, a: f64, b: f64) -> f64 {
        match *self {
            Domain::FreeSpace => a - b,
            Domain::Torus { period } => nearest_image(a - b, period),
        }
    }

    /// Canonical representative of a coordinate.
    #[inline(always)]
    pub fn wrap(&self, x: f64) -> f64 {
        match *self {
            Domain::FreeSpace => x,
            Domain::Torus { period } => {
                let y = x - period * (x / period).floor();
                if y >= period || y < 0.0 {
                    0.0
                } else {
                    y
                }
            }
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| self.displacement(*x, *y).powi(2)).sum::<f64>().sqrt()
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Domain::Torus { .. })
    }
}

/// Model constants shared by every experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: f64,
    pub d: usize,
    pub kernel: KernelSpec,
    pub noise: NoiseSpec,
    pub domain: Domain,
}

impl ModelParams {
    /// Free-space, noiseless model with the canonical power-law kernel.
    pub fn new(p: f64, alpha: f64, d: usize) -> Self {
        ModelParams { p, d, kernel: KernelSpec::power_law(alpha), noise: NoiseSpec::none(), domain: Domain::FreeSpace }
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.kernel.alpha
    }

    pub fn align(&self) -> AlignmentSpec {
        AlignmentSpec { p: self.p }
    }

    /// Every violated constraint, one message per field.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.align().validate() {
            out.push(e.to_string());
        }
        if !(1..=3).contains(&self.d) {
            out.push(format!("parameter error: d = {} must be 1, 2 or 3", self.d));
        }
        if let Err(e) = self.kernel.validate() {
            out.push(e.to_string());
        }
        if let Err(e) = self.noise.validate() {
            out.push(e.to_string());
        }
        if self.noise.table_end() < self.kernel.at_zero() {
            out.push("parameter error: noise table must cover [0, phi(0)]".into());
        }
        if let Domain::Torus { period } = self.domain {
            if !(period > 0.0 && period.is_finite()) {
                out.push(format!("parameter error: domain.period = {period} must be positive"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(param(v.join("; ")))
        }
    }

    pub fn regime(&self) -> Regime {
        Regime::classify(self.p, &self.kernel)
    }
}

/// Rate class of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    General,
    /// `2 ≤ p < 3`; `p = 2` shares the stability rate of this class.
    FatPLt3,
    FatPEq3,
    FatPGt3,
}

impl Regime {
    pub fn classify(p: f64, kernel: &KernelSpec) -> Regime {
        if !kernel.is_fat_tailed() {
            Regime::General
        } else if p < 3.0 {
            Regime::FatPLt3
        } else if p == 3.0 {
            Regime::FatPEq3
        } else {
            Regime::FatPGt3
        }
    }
}

/// Decay exponents of `V(t) ~ ⟨t⟩^{-r}` and growth of `D(t)` from the rate table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    /// `V` exponent on `⟨t⟩` (negative); `None` for exponential decay.
    pub v_exponent: Option<f64>,
    /// Power of `log⟨t⟩` multiplying `V` (nonzero only for `p = 3`).
    pub v_log_power: f64,
    /// `D` exponent on `⟨t⟩` (zero when `D` plateaus).
    pub d_exponent: f64,
    /// Power of `log⟨t⟩` bounding `D` (only for `p = 3`).
    pub d_log_power: f64,
}

impl RateTable {
    pub fn for_params(p: f64, alpha: f64) -> RateTable {
        if p == 2.0 {
            RateTable { v_exponent: None, v_log_power: 0.0, d_exponent: 0.0, d_log_power: 0.0 }
        } else if p < 3.0 {
            RateTable { v_exponent: Some(-1.0 / (p - 2.0)), v_log_power: 0.0, d_exponent: 0.0, d_log_power: 0.0 }
        } else if p == 3.0 {
            RateTable {
                v_exponent: Some(-1.0),
                v_log_power: alpha / (1.0 - alpha),
                d_exponent: 0.0,
                d_log_power: 1.0 / (1.0 - alpha),
            }
        } else {
            let r = (1.0 - alpha) / (p - alpha - 2.0);
            RateTable { v_exponent: Some(-r), v_log_power: 0.0, d_exponent: 1.0 - r, d_log_power: 0.0 }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_shift_is_zero_distance() {
        let t = Domain::Torus { period: 1.0 };
        for k in 0..3 {
            let a = [0.1, 0.7, 0.35];
            let mut b = a;
            b[k] += 1.0;
            assert_eq!(t.distance(&a, &b), 0.0);
        }
        assert!((t.distance(&[0.05], &[0.95]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn wrap_stays_in_range() {
        let t = Domain::Torus { period: 1.0 };
        for x in [-1e-18, -0.3, 0.0, 0.999999999, 1.0, 7.25, -3.0] {
            let y = t.wrap(x);
            assert!((0.0..1.0).contains(&y), "{x} -> {y}");
        }
    }

    #[test]
    fn violations_name_fields() {
        let mut m = ModelParams::new(1.5, 1.2, 4);
        m.noise.sigma2 = -1.0;
        let v = m.violations().join("\n");
        assert!(v.contains("p = 1.5"));
        assert!(v.contains("d = 4"));
        assert!(v.contains("alpha"));
        assert!(v.contains("sigma2"));
    }

    #[test]
    fn rate_table_values() {
        assert_eq!(RateTable::for_params(2.5, 0.25).v_exponent, Some(-2.0));
        assert_eq!(RateTable::for_params(4.0, 0.0).v_exponent, Some(-0.5));
        assert_eq!(RateTable::for_params(3.0, 0.5).v_log_power, 1.0);
        assert_eq!(Regime::classify(2.5, &KernelSpec::power_law(0.25)), Regime::FatPLt3);
    }
}
