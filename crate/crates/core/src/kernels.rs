//! Communication protocol `φ`, alignment map `A`, noise map `h`, and the
//! elementary vector inequalities satisfied by `A`.
//!
//! Everything here is pure and allocation-light, so it can be called from any
//! number of threads.

use serde::{Deserialize, Serialize};

use crate::error::{param, shape, Error, Result};

/// `x^e` for `x >= 0`, with sqrt-based fast paths for the exponents that
/// show up in practice (`α ∈ {¼, ½, ¾}`, `(p-2)/2` for `p ∈ {2.5, 3, 3.5, 4, 5, 6}`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Pow {
    Zero,
    Quarter,
    Half,
    ThreeQuarters,
    One,
    ThreeHalves,
    Two,
    General(f64),
}

impl Pow {
    pub(crate) fn new(e: f64) -> Self {
        match e {
            x if x == 0.0 => Pow::Zero,
            x if x == 0.25 => Pow::Quarter,
            x if x == 0.5 => Pow::Half,
            x if x == 0.75 => Pow::ThreeQuarters,
            x if x == 1.0 => Pow::One,
            x if x == 1.5 => Pow::ThreeHalves,
            x if x == 2.0 => Pow::Two,
            x => Pow::General(x),
        }
    }

    #[inline(always)]
    pub(crate) fn eval(self, x: f64) -> f64 {
        match self {
            Pow::Zero => 1.0,
            Pow::Quarter => x.sqrt().sqrt(),
            Pow::Half => x.sqrt(),
            Pow::ThreeQuarters => {
                let s = x.sqrt();
                s * s.sqrt()
            }
            Pow::One => x,
            Pow::ThreeHalves => x * x.sqrt(),
            Pow::Two => x * x,
            Pow::General(e) => {
                if x == 0.0 {
                    0.0
                } else {
                    x.powf(e)
                }
            }
        }
    }
}

/// Shape of the radial profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelForm {
    /// `φ(r) = (1+r)^{-α}`.
    PowerLaw,
    /// Sampled profile, linearly interpolated; the last value is held beyond
    /// the last radius. `radii[0]` must be `0`.
    CustomTable { radii: Vec<f64>, values: Vec<f64> },
}

/// Radial communication weight together with its fat-tail constants
/// `λ r^{-α} ≤ φ(r) ≤ Λ r^{-α}` for `r > r0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub alpha: f64,
    pub form: KernelForm,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub r0: f64,
}

impl KernelSpec {
    /// Canonical `(1+r)^{-α}` with `λ = 2^{-α}`, `Λ = 1`, `r0 = 1`, for which
    /// the sandwich is elementary.
    pub fn power_law(alpha: f64) -> Self {
        KernelSpec {
            alpha,
            form: KernelForm::PowerLaw,
            lambda_lower: 2f64.powf(-alpha),
            lambda_upper: 1.0,
            r0: 1.0,
        }
    }

    /// Tabulated profile. The fat-tail constants default to those of the
    /// power law with the same `alpha`; override the fields if needed.
    pub fn table(alpha: f64, radii: Vec<f64>, values: Vec<f64>) -> Self {
        KernelSpec { form: KernelForm::CustomTable { radii, values }, ..Self::power_law(alpha) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(param(format!("kernel.alpha = {} must lie in [0, 1)", self.alpha)));
        }
        if !(self.lambda_lower > 0.0 && self.lambda_upper > 0.0 && self.r0 > 0.0) {
            return Err(param("kernel.lambda_lower, kernel.lambda_upper and kernel.r0 must be positive"));
        }
        if self.lambda_lower > self.lambda_upper {
            return Err(param("kernel.lambda_lower exceeds kernel.lambda_upper"));
        }
        if let KernelForm::CustomTable { radii, values } = &self.form {
            if radii.len() < 2 || radii.len() != values.len() {
                return Err(param("kernel table needs >= 2 radii and one value per radius"));
            }
            if radii[0] != 0.0 {
                return Err(param("kernel table must start at radius 0"));
            }
            if radii.windows(2).any(|w| !(w[1] > w[0])) || radii.iter().any(|r| !r.is_finite()) {
                return Err(param("kernel table radii must be finite and strictly increasing"));
            }
            if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(param("kernel table values must be finite and nonnegative"));
            }
            if values.windows(2).any(|w| w[1] > w[0]) {
                return Err(param("kernel table values must be non-increasing in r"));
            }
            if values[0] <= 0.0 {
                return Err(param("kernel table needs phi(0) > 0"));
            }
        }
        Ok(())
    }

    /// `φ(r)` without argument checks.
    pub fn eval(&self, r: f64) -> f64 {
        PhiEval::new(self).eval(r)
    }

    /// `φ(0)`, the upper bound of the kernel.
    pub fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// `(φ(r) − λ r^{-α}, Λ r^{-α} − φ(r))`; both are nonnegative for
    /// `r > r0` when the sandwich holds.
    pub fn sandwich_gaps(&self, r: f64) -> (f64, f64) {
        let phi = self.eval(r);
        let base = r.powf(-self.alpha);
        (phi - self.lambda_lower * base, self.lambda_upper * base - phi)
    }

    /// Probes the sandwich on a log-spaced grid over `(r0, 1e6]`.
    pub fn is_fat_tailed(&self) -> bool {
        let n = 256;
        let (lo, hi) = (self.r0.ln(), 1e6f64.ln());
        (1..=n).all(|k| {
            let r = (lo + (hi - lo) * k as f64 / n as f64).exp();
            let (a, b) = self.sandwich_gaps(r);
            a >= -1e-12 && b >= -1e-12
        })
    }
}

/// Compiled `φ` used inside interaction loops.
#[derive(Clone, Debug)]
pub(crate) enum PhiEval {
    Power(Pow),
    Table { radii: Vec<f64>, values: Vec<f64> },
}

impl PhiEval {
    pub(crate) fn new(spec: &KernelSpec) -> Self {
        match &spec.form {
            KernelForm::PowerLaw => PhiEval::Power(Pow::new(spec.alpha)),
            KernelForm::CustomTable { radii, values } => {
                PhiEval::Table { radii: radii.clone(), values: values.clone() }
            }
        }
    }

    #[inline(always)]
    pub(crate) fn eval(&self, r: f64) -> f64 {
        match self {
            PhiEval::Power(Pow::Zero) => 1.0,
            PhiEval::Power(pw) => 1.0 / pw.eval(1.0 + r),
            PhiEval::Table { radii, values } => interp(radii, values, r),
        }
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    if x <= xs[0] {
        return ys[0];
    }
    let k = xs.partition_point(|&r| r <= x) - 1;
    let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + w * (ys[k + 1] - ys[k])
}

/// Checked `φ(r)`.
pub fn phi_eval(spec: &KernelSpec, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("phi_eval needs r >= 0, got {r}")));
    }
    Ok(spec.eval(r))
}

/// Alignment exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSpec {
    pub p: f64,
}

impl AlignmentSpec {
    pub fn new(p: f64) -> Result<Self> {
        let s = AlignmentSpec { p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 2.0 && self.p.is_finite()) {
            return Err(param(format!("p = {} must be a finite exponent >= 2", self.p)));
        }
        Ok(())
    }

    /// `c_p = 2^{2-p}`.
    pub fn c_p(&self) -> f64 {
        2f64.powf(2.0 - self.p)
    }

    pub(crate) fn pow(&self) -> Pow {
        Pow::new(0.5 * (self.p - 2.0))
    }
}

/// `A(v) = |v|^{p-2} v`, with `A(0) = 0`.
pub fn alignment_eval(spec: &AlignmentSpec, v: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut out = v.to_vec();
    apply_alignment(spec.pow(), &mut out);
    Ok(out)
}

#[inline]
fn apply_alignment(pw: Pow, v: &mut [f64]) {
    let s2: f64 = v.iter().map(|x| x * x).sum();
    if s2 == 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let m = pw.eval(s2);
    v.iter_mut().for_each(|x| *x *= m);
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn same_len(vs: &[&[f64]]) -> Result<()> {
    let n = vs[0].len();
    if vs.iter().any(|v| v.len() != n) {
        return Err(shape("vector arguments must share one dimension"));
    }
    Ok(())
}

/// `(a−b)·(A(a−c) − A(b−c)) − 2^{2-p}|a−b|^p`, nonnegative for `p ≥ 2`.
pub fn monotonicity_gap(a: &[f64], b: &[f64], c: &[f64], p: f64) -> Result<f64> {
    same_len(&[a, b, c])?;
    let spec = AlignmentSpec::new(p)?;
    let ac = alignment_eval(&spec, &sub(a, c))?;
    let bc = alignment_eval(&spec, &sub(b, c))?;
    let ab = sub(a, b);
    Ok(dot(&ab, &sub(&ac, &bc)) - spec.c_p() * norm(&ab).powf(p))
}

/// `(x−y)·(A(x) − A(y)) − 2^{2-p}|x−y|^p`, nonnegative for `p ≥ 2`.
pub fn pair_monotonicity_gap(x: &[f64], y: &[f64], p: f64) -> Result<f64> {
    same_len(&[x, y])?;
    let zero = vec![0.0; x.len()];
    monotonicity_gap(x, y, &zero, p)
}

/// Shape of the noise map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseForm {
    /// `h(s) = σ² s`.
    Linear,
    /// `h(s) = σ² · table(s)`, piecewise linear through `(s[k], h[k])`,
    /// held constant past the last node.
    Custom { s: Vec<f64>, h: Vec<f64> },
}

/// Strength-dependent diffusion coefficient `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub form: NoiseForm,
    pub sigma2: f64,
}

impl NoiseSpec {
    pub fn linear(sigma2: f64) -> Self {
        NoiseSpec { form: NoiseForm::Linear, sigma2 }
    }

    pub fn none() -> Self {
        Self::linear(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(param(format!("noise.sigma2 = {} must be finite and >= 0", self.sigma2)));
        }
        if let NoiseForm::Custom { s, h } = &self.form {
            if s.len() < 2 || s.len() != h.len() {
                return Err(param("noise table needs >= 2 nodes and one value per node"));
            }
            if s[0] != 0.0 || h[0] != 0.0 {
                return Err(param("noise table must start at (0, 0)"));
            }
            if s.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(param("noise table nodes must be strictly increasing"));
            }
            if h[1..].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(param("noise table values must be positive away from s = 0"));
            }
        }
        Ok(())
    }

    /// Largest strength covered by an explicit table node (infinite for the
    /// linear form).
    pub fn table_end(&self) -> f64 {
        match &self.form {
            NoiseForm::Linear => f64::INFINITY,
            NoiseForm::Custom { s, .. } => *s.last().unwrap(),
        }
    }

    /// `h(s)` without argument checks; negative inputs clamp to `0`.
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match &self.form {
            NoiseForm::Linear => self.sigma2 * s,
            NoiseForm::Custom { s: xs, h } => self.sigma2 * interp(xs, h, s),
        }
    }

    /// `√(2 h(s))`, equal to `0` at `s = 0`.
    pub fn diffusion(&self, s: f64) -> f64 {
        (2.0 * self.eval(s)).max(0.0).sqrt()
    }
}

/// Checked `h(s)`.
pub fn noise_eval(spec: &NoiseSpec, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("noise_eval needs s >= 0, got {s}")));
    }
    Ok(spec.eval(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn phi_examples() {
        let k = KernelSpec::power_law(0.5);
        assert_eq!(phi_eval(&k, 0.0).unwrap(), 1.0);
        assert_eq!(phi_eval(&KernelSpec::power_law(0.0), 7.3).unwrap(), 1.0);
        assert_relative_eq!(phi_eval(&k, 3.0).unwrap(), 0.5, max_relative = 1e-15);
        assert!(matches!(phi_eval(&k, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn fast_pow_matches_powf() {
        for e in [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 0.3, 1.7] {
            let pw = Pow::new(e);
            for x in [0.0f64, 1e-300, 1e-9, 0.3, 1.0, 2.5, 1e7] {
                let want = if x == 0.0 && e > 0.0 { 0.0 } else { x.powf(e) };
                assert_relative_eq!(pw.eval(x), want, max_relative = 4e-16);
            }
        }
    }

    #[test]
    fn alignment_examples() {
        let a = |p, v: &[f64]| alignment_eval(&AlignmentSpec { p }, v).unwrap();
        assert_eq!(a(2.0, &[3.0, 4.0]), vec![3.0, 4.0]);
        let v = a(3.0, &[3.0, 4.0]);
        assert_relative_eq!(v[0], 15.0, max_relative = 1e-15);
        assert_relative_eq!(v[1], 20.0, max_relative = 1e-15);
        assert_eq!(a(4.0, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(a(2.5, &[0.0]), vec![0.0]);
        assert!(alignment_eval(&AlignmentSpec { p: 1.5 }, &[1.0]).is_err());
    }

    #[test]
    fn gap_examples() {
        let g = monotonicity_gap(&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], 3.0).unwrap();
        // a−c = (1,−1), b−c = (−1,−1), |·| = √2; A = √2·(·); (a−b)·(ΔA) = 2·2√2; c_3 |a−b|^3 = 8/2
        assert_relative_eq!(g, 4.0 * 2f64.sqrt() - 4.0, max_relative = 1e-14);
        assert_eq!(pair_monotonicity_gap(&[1.0, 0.0], &[-1.0, 0.0], 2.0).unwrap(), 0.0);
        assert_eq!(pair_monotonicity_gap(&[0.3, 0.2], &[0.3, 0.2], 3.5).unwrap(), 0.0);
        assert!(monotonicity_gap(&[1.0], &[1.0, 2.0], &[0.0], 3.0).is_err());
    }

    #[test]
    fn noise_examples() {
        let n = NoiseSpec::linear(2.0);
        assert_eq!(noise_eval(&n, 0.0).unwrap(), 0.0);
        assert_eq!(noise_eval(&n, 0.5).unwrap(), 1.0);
        assert_eq!(noise_eval(&NoiseSpec::linear(0.0), 1.0).unwrap(), 0.0);
        assert!(noise_eval(&n, -0.1).is_err());
        assert_eq!(n.diffusion(0.0), 0.0);
    }

    #[test]
    fn custom_noise_table() {
        let n = NoiseSpec { form: NoiseForm::Custom { s: vec![0.0, 0.5, 1.0], h: vec![0.0, 1.0, 1.5] }, sigma2: 2.0 };
        n.validate().unwrap();
        assert_eq!(n.eval(0.25), 1.0);
        assert_eq!(n.eval(0.75), 2.5);
        assert_eq!(n.eval(3.0), 3.0);
        let bad = NoiseSpec { form: NoiseForm::Custom { s: vec![0.0, 1.0], h: vec![0.0, 0.0] }, sigma2: 1.0 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn table_kernel_interpolates_and_validates() {
        let k = KernelSpec::table(0.0, vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.0]);
        k.validate().unwrap();
        assert_eq!(k.eval(0.5), 0.75);
        assert_eq!(k.eval(10.0), 0.0);
        assert!(!k.is_fat_tailed());
        let rising = KernelSpec::table(0.0, vec![0.0, 1.0], vec![0.5, 1.0]);
        assert!(rising.validate().is_err());
        assert!(KernelSpec::power_law(0.25).is_fat_tailed());
    }
}
