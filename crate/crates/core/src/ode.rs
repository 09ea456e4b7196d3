//! Explicit one-step integrators: forward Euler, classical RK4 and the
//! Dormand–Prince 5(4) pair with step-size control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side `y' = f(t, y)`.
pub trait OdeSystem: Sync {
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    Rk4,
    AdaptiveRk45,
}

/// Step policy. `dt` is the fixed step for `euler`/`rk4` and the first trial
/// step for `adaptive_rk45`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub scheme: Scheme,
    pub dt: f64,
    pub rtol: f64,
    pub atol: f64,
    #[serde(default = "inf")]
    pub dt_max: f64,
    #[serde(default = "max_steps")]
    pub max_steps: u64,
}

fn inf() -> f64 {
    f64::INFINITY
}

fn max_steps() -> u64 {
    100_000_000
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::adaptive(1e-8, 1e-10)
    }
}

impl StepControl {
    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        StepControl { scheme: Scheme::AdaptiveRk45, dt: 1e-3, rtol, atol, dt_max: inf(), max_steps: max_steps() }
    }

    pub fn fixed(scheme: Scheme, dt: f64) -> Self {
        StepControl { scheme, dt, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!("dt = {} must be positive", self.dt)));
        }
        if self.scheme == Scheme::AdaptiveRk45 && !(self.rtol > 0.0 && self.atol >= 0.0) {
            return Err(Error::Parameter("adaptive stepping needs rtol > 0 and atol >= 0".into()));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::Parameter("dt_max must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one accepted step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub dt_taken: f64,
    /// Scaled RMS error of the accepted step (adaptive scheme only).
    pub error_estimate: Option<f64>,
    pub rejected: u32,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Reusable integrator state (stage buffers, FSAL cache, next step size).
pub struct Stepper {
    ctl: StepControl,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    fsal: bool,
    h_next: f64,
    pub accepted: u64,
    pub rejected: u64,
}

impl Stepper {
    pub fn new(ctl: StepControl, n: usize) -> Self {
        Stepper {
            ctl,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            fsal: false,
            h_next: ctl.dt,
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn control(&self) -> &StepControl {
        &self.ctl
    }

    /// Drops the cached first stage; call after editing `y` or `t` by hand.
    pub fn invalidate(&mut self) {
        self.fsal = false;
    }

    /// One accepted step of at most `h_cap`.
    pub fn step<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, y: &mut [f64], h_cap: f64) -> Result<StepOutcome> {
        let out = match self.ctl.scheme {
            Scheme::Euler => {
                let h = self.ctl.dt.min(h_cap);
                sys.rhs(t, y, &mut self.k[0]);
                y.iter_mut().zip(&self.k[0]).for_each(|(yi, k)| *yi += h * k);
                StepOutcome { dt_taken: h, error_estimate: None, rejected: 0 }
            }
            Scheme::Rk4 => {
                let h = self.ctl.dt.min(h_cap);
                self.rk4(sys, t, y, h);
                StepOutcome { dt_taken: h, error_estimate: None, rejected: 0 }
            }
            Scheme::AdaptiveRk45 => self.dopri(sys, t, y, h_cap)?,
        };
        self.accepted += 1;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure { t: t + out.dt_taken, reason: "non-finite state".into() });
        }
        Ok(out)
    }

    fn rk4<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, y: &mut [f64], h: f64) {
        let [k1, k2, k3, k4, ..] = &mut self.k;
        let tmp = &mut self.tmp;
        sys.rhs(t, y, k1);
        stage(tmp, y, &[(0.5 * h, &k1[..])]);
        sys.rhs(t + 0.5 * h, tmp, k2);
        stage(tmp, y, &[(0.5 * h, &k2[..])]);
        sys.rhs(t + 0.5 * h, tmp, k3);
        stage(tmp, y, &[(h, &k3[..])]);
        sys.rhs(t + h, tmp, k4);
        let h6 = h / 6.0;
        for i in 0..y.len() {
            y[i] += h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    fn dopri<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, y: &mut [f64], h_cap: f64) -> Result<StepOutcome> {
        let StepControl { rtol, atol, dt_max, .. } = self.ctl;
        let mut h = self.h_next.min(dt_max);
        let capped = h >= h_cap;
        if capped {
            h = h_cap;
        }
        let mut rejected = 0u32;
        loop {
            if !(h > 1e-15 * t.abs().max(1.0)) {
                return Err(Error::IntegrationFailure { t, reason: format!("step size underflow (h = {h:e})") });
            }
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let tmp = &mut self.tmp;
            if !self.fsal {
                sys.rhs(t, y, k1);
                self.fsal = true;
            }
            stage(tmp, y, &[(h * A21, &k1[..])]);
            sys.rhs(t + h / 5.0, tmp, k2);
            stage(tmp, y, &[(h * A31, &k1[..]), (h * A32, &k2[..])]);
            sys.rhs(t + 0.3 * h, tmp, k3);
            stage(tmp, y, &[(h * A41, &k1[..]), (h * A42, &k2[..]), (h * A43, &k3[..])]);
            sys.rhs(t + 0.8 * h, tmp, k4);
            stage(tmp, y, &[(h * A51, &k1[..]), (h * A52, &k2[..]), (h * A53, &k3[..]), (h * A54, &k4[..])]);
            sys.rhs(t + h * 8.0 / 9.0, tmp, k5);
            stage(tmp, y, &[(h * A61, &k1[..]), (h * A62, &k2[..]), (h * A63, &k3[..]), (h * A64, &k4[..]), (h * A65, &k5[..])]);
            sys.rhs(t + h, tmp, k6);
            stage(tmp, y, &[(h * B1, &k1[..]), (h * B3, &k3[..]), (h * B4, &k4[..]), (h * B5, &k5[..]), (h * B6, &k6[..])]);
            sys.rhs(t + h, tmp, k7);
            let mut acc = 0.0;
            for i in 0..y.len() {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = atol + rtol * y[i].abs().max(tmp[i].abs());
                acc += (e / sc).powi(2);
            }
            let err = (acc / y.len().max(1) as f64).sqrt();
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 && err.is_finite() {
                y.copy_from_slice(tmp);
                std::mem::swap(k1, k7);
                let proposal = h * fac;
                self.h_next = if capped && rejected == 0 { proposal.max(self.h_next) } else { proposal };
                return Ok(StepOutcome { dt_taken: h, error_estimate: Some(err), rejected });
            }
            rejected += 1;
            self.rejected += 1;
            h *= if err.is_finite() { fac.min(0.5) } else { 0.1 };
        }
    }

    /// Steps from `*t` to exactly `t_target`.
    pub fn advance<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: &mut f64, y: &mut [f64], t_target: f64) -> Result<()> {
        let tiny = 1e-13 * t_target.abs().max(1.0);
        while t_target - *t > tiny {
            if self.accepted >= self.ctl.max_steps {
                return Err(Error::IntegrationFailure { t: *t, reason: "step budget exhausted".into() });
            }
            let out = self.step(sys, *t, y, t_target - *t)?;
            *t += out.dt_taken;
        }
        *t = t_target;
        Ok(())
    }
}

#[inline]
fn stage(out: &mut [f64], y: &[f64], terms: &[(f64, &[f64])]) {
    out.copy_from_slice(y);
    for (c, k) in terms {
        for (o, ki) in out.iter_mut().zip(k.iter()) {
            *o += c * ki;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl OdeSystem for Decay {
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -y[0];
        }
    }

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    fn run(ctl: StepControl, t1: f64) -> f64 {
        let mut s = Stepper::new(ctl, 1);
        let (mut t, mut y) = (0.0, [1.0]);
        s.advance(&Decay, &mut t, &mut y, t1).unwrap();
        assert_eq!(t, t1);
        y[0]
    }

    #[test]
    fn fixed_step_orders() {
        let exact = (-1.0f64).exp();
        let e1 = (run(StepControl::fixed(Scheme::Euler, 0.01), 1.0) - exact).abs();
        let e2 = (run(StepControl::fixed(Scheme::Euler, 0.005), 1.0) - exact).abs();
        assert!((e1 / e2 - 2.0).abs() < 0.05);
        let r1 = (run(StepControl::fixed(Scheme::Rk4, 0.1), 1.0) - exact).abs();
        let r2 = (run(StepControl::fixed(Scheme::Rk4, 0.05), 1.0) - exact).abs();
        assert!((r1 / r2 - 16.0).abs() < 1.0, "{}", r1 / r2);
    }

    #[test]
    fn adaptive_meets_tolerance() {
        let mut s = Stepper::new(StepControl::adaptive(1e-10, 1e-12), 2);
        let (mut t, mut y) = (0.0, [1.0, 0.0]);
        for k in 1..=20 {
            s.advance(&Oscillator, &mut t, &mut y, k as f64).unwrap();
            assert!((y[0] - t.cos()).abs() < 1e-8);
            assert!((y[1] + t.sin()).abs() < 1e-8);
        }
        assert!(s.accepted < 2000);
    }

    #[test]
    fn adaptive_reports_step() {
        let mut s = Stepper::new(StepControl::adaptive(1e-6, 1e-9), 1);
        let mut y = [1.0];
        let o = s.step(&Decay, 0.0, &mut y, 10.0).unwrap();
        assert!(o.dt_taken > 0.0 && o.error_estimate.unwrap() <= 1.0);
    }

    struct Blowup;
    impl OdeSystem for Blowup {
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[0] * y[0];
        }
    }

    #[test]
    fn blowup_is_reported_with_time() {
        let mut s = Stepper::new(StepControl::fixed(Scheme::Euler, 0.5), 1);
        let (mut t, mut y) = (0.0, [1e10]);
        match s.advance(&Blowup, &mut t, &mut y, 100.0) {
            Err(Error::IntegrationFailure { t, .. }) => assert!(t > 0.0),
            other => panic!("{other:?}"),
        }
    }
}
