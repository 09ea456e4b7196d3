use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, shape, Result};
use crate::model::Domain;
use crate::rng;

/// Positions and velocities of `n` agents in `dim` dimensions, row-major,
/// with nonnegative weights summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentEnsemble {
    pub dim: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AgentEnsemble {
    pub fn new(dim: usize, positions: Vec<f64>, velocities: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let e = AgentEnsemble { dim, positions, velocities, weights };
        e.validate()?;
        Ok(e)
    }

    /// Empirical-measure weights `1/n`.
    pub fn uniform(dim: usize, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        let n = if dim == 0 { 0 } else { positions.len() / dim };
        Self::new(dim, positions, velocities, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(shape("dimension must be positive"));
        }
        if self.positions.len() % self.dim != 0 || self.positions.len() != self.velocities.len() {
            return Err(shape("positions and velocities must both be n x dim"));
        }
        if self.weights.len() != self.n() {
            return Err(shape(format!("expected {} weights, got {}", self.n(), self.weights.len())));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(param("weights must be nonnegative"));
        }
        let s: f64 = self.weights.iter().sum();
        if self.n() > 0 && (s - 1.0).abs() > 1e-12 {
            return Err(param(format!("weights sum to {s}, not 1")));
        }
        if self.positions.iter().chain(&self.velocities).any(|x| !x.is_finite()) {
            return Err(param("non-finite state"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.positions.len() / self.dim.max(1)
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn v(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    /// `Σ w_i v_i`.
    pub fn momentum(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for i in 0..self.n() {
            for k in 0..self.dim {
                m[k] += self.weights[i] * self.v(i)[k];
            }
        }
        m
    }

    /// First `k` agents with renormalized weights.
    pub fn head(&self, k: usize) -> AgentEnsemble {
        let k = k.min(self.n());
        let d = self.dim;
        let w: f64 = self.weights[..k].iter().sum();
        AgentEnsemble {
            dim: d,
            positions: self.positions[..k * d].to_vec(),
            velocities: self.velocities[..k * d].to_vec(),
            weights: self.weights[..k].iter().map(|x| x / w).collect(),
        }
    }

    /// Phase-space points `(x, v)` of each agent.
    pub fn phase_points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.positions.len());
        for i in 0..self.n() {
            out.extend_from_slice(self.x(i));
            out.extend_from_slice(self.v(i));
        }
        out
    }

    /// Wraps every coordinate into the fundamental cell.
    pub fn wrap_into(&mut self, domain: &Domain) {
        self.positions.iter_mut().for_each(|x| *x = domain.wrap(*x));
    }
}

/// `D` (spatial diameter) and `V` (velocity diameter) at time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiameterStats {
    pub t: f64,
    pub spatial: f64,
    pub velocity: f64,
}

/// Exact `O(N²)` diameters in free space (`t` is left at zero).
pub fn diameters(ens: &AgentEnsemble) -> DiameterStats {
    diameters_in(ens, &Domain::FreeSpace)
}

/// Exact `O(N²)` diameters with the domain's metric.
pub fn diameters_in(ens: &AgentEnsemble, domain: &Domain) -> DiameterStats {
    let (n, d) = (ens.n(), ens.dim);
    let (mut dx, mut dv) = (0.0f64, 0.0f64);
    for i in 0..n {
        let (xi, vi) = (ens.x(i), ens.v(i));
        for j in i + 1..n {
            let (xj, vj) = (ens.x(j), ens.v(j));
            let (mut sx, mut sv) = (0.0, 0.0);
            for k in 0..d {
                sx += domain.displacement(xi[k], xj[k]).powi(2);
                sv += (vi[k] - vj[k]).powi(2);
            }
            dx = dx.max(sx);
            dv = dv.max(sv);
        }
    }
    DiameterStats { t: 0.0, spatial: dx.sqrt(), velocity: dv.sqrt() }
}

/// Position law of the initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PositionLaw {
    /// Uniform on `[lo, hi]^d`.
    UniformBox { lo: f64, hi: f64 },
}

/// Velocity law of the initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityLaw {
    /// Uniform on the centered ball of the given radius.
    UniformBall { radius: f64 },
    /// Centered Gaussian conditioned on `|v| ≤ radius`.
    TruncatedGaussian { std: f64, radius: f64 },
}

/// Compactly supported i.i.d. initial law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialSampler {
    pub positions: PositionLaw,
    pub velocities: VelocityLaw,
    /// Subtract the empirical mean velocity after sampling. Harmless for
    /// deterministic runs (the dynamics are Galilean invariant) but breaks
    /// independence, so leave it off for Monte Carlo experiments.
    #[serde(default)]
    pub center_velocities: bool,
}

impl InitialSampler {
    pub fn boxed(lo: f64, hi: f64, v_radius: f64) -> Self {
        InitialSampler {
            positions: PositionLaw::UniformBox { lo, hi },
            velocities: VelocityLaw::UniformBall { radius: v_radius },
            center_velocities: false,
        }
    }

    pub fn centered(mut self) -> Self {
        self.center_velocities = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let PositionLaw::UniformBox { lo, hi } = self.positions;
        if !(hi > lo && lo.is_finite() && hi.is_finite()) {
            return Err(param("initial.positions needs finite lo < hi"));
        }
        match self.velocities {
            VelocityLaw::UniformBall { radius } if !(radius >= 0.0 && radius.is_finite()) => {
                Err(param("initial.velocities.radius must be finite and >= 0"))
            }
            VelocityLaw::TruncatedGaussian { std, radius } if !(std > 0.0 && radius > 0.0 && radius.is_finite()) => {
                Err(param("initial.velocities needs std > 0 and a finite radius > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Support bound `(position box, velocity radius)`.
    pub fn support(&self) -> (f64, f64, f64) {
        let PositionLaw::UniformBox { lo, hi } = self.positions;
        let r = match self.velocities {
            VelocityLaw::UniformBall { radius } | VelocityLaw::TruncatedGaussian { radius, .. } => radius,
        };
        (lo, hi, r)
    }

    fn draw_velocity<R: Rng>(&self, dim: usize, rng: &mut R, out: &mut [f64]) {
        match self.velocities {
            VelocityLaw::UniformBall { radius } => loop {
                let mut s = 0.0;
                for o in out.iter_mut() {
                    *o = StandardNormal.sample(rng);
                    s += *o * *o;
                }
                if s == 0.0 {
                    continue;
                }
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / dim as f64) / s.sqrt();
                out.iter_mut().for_each(|o| *o *= r);
                break;
            },
            VelocityLaw::TruncatedGaussian { std, radius } => loop {
                let mut s = 0.0;
                for o in out.iter_mut() {
                    *o = std * Distribution::<f64>::sample(&StandardNormal, rng);
                    s += *o * *o;
                }
                if s <= radius * radius {
                    break;
                }
            },
        }
    }

    /// `n` i.i.d. agents with uniform weights.
    pub fn sample_with<R: Rng>(&self, n: usize, dim: usize, rng: &mut R) -> AgentEnsemble {
        let PositionLaw::UniformBox { lo, hi } = self.positions;
        let mut x = vec![0.0; n * dim];
        let mut v = vec![0.0; n * dim];
        for i in 0..n {
            for k in 0..dim {
                x[i * dim + k] = lo + (hi - lo) * rng.random::<f64>();
            }
            self.draw_velocity(dim, rng, &mut v[i * dim..(i + 1) * dim]);
        }
        if self.center_velocities && n > 0 {
            for k in 0..dim {
                let m = (0..n).map(|i| v[i * dim + k]).sum::<f64>() / n as f64;
                (0..n).for_each(|i| v[i * dim + k] -= m);
            }
        }
        AgentEnsemble { dim, positions: x, velocities: v, weights: vec![1.0 / n.max(1) as f64; n] }
    }

    /// `n` agents from the stream `split(seed, tags)`.
    pub fn sample(&self, n: usize, dim: usize, seed: u64, tags: &[u64]) -> AgentEnsemble {
        self.sample_with(n, dim, &mut rng::stream(seed, tags))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diameter_examples() {
        let one = AgentEnsemble::uniform(2, vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        let s = diameters(&one);
        assert_eq!((s.spatial, s.velocity), (0.0, 0.0));
        let two = AgentEnsemble::uniform(2, vec![0.0, 0.0, 3.0, 0.0], vec![0.0, 0.0, 0.0, 4.0]).unwrap();
        let s = diameters(&two);
        assert_eq!((s.spatial, s.velocity), (3.0, 4.0));
    }

    #[test]
    fn diameters_dominate_random_pairs() {
        let e = InitialSampler::boxed(0.0, 3.0, 1.0).sample(100, 3, 9, &[1]);
        let s = diameters(&e);
        let mut r = rng::stream(10, &[]);
        let mut best = (0.0f64, 0.0f64);
        for _ in 0..2000 {
            let (i, j) = (r.random_range(0..100), r.random_range(0..100));
            let dx: f64 = (0..3).map(|k| (e.x(i)[k] - e.x(j)[k]).powi(2)).sum::<f64>().sqrt();
            let dv: f64 = (0..3).map(|k| (e.v(i)[k] - e.v(j)[k]).powi(2)).sum::<f64>().sqrt();
            best = (best.0.max(dx), best.1.max(dv));
        }
        assert!(best.0 <= s.spatial && best.1 <= s.velocity);
        assert!(best.0 > 0.8 * s.spatial && best.1 > 0.8 * s.velocity);
    }

    #[test]
    fn sampler_respects_support_and_seed() {
        let smp = InitialSampler::boxed(-1.0, 2.0, 0.5);
        let a = smp.sample(500, 2, 5, &[rng::TAG_INITIAL]);
        let b = smp.sample(500, 2, 5, &[rng::TAG_INITIAL]);
        assert_eq!(a, b);
        a.validate().unwrap();
        assert!(a.positions.iter().all(|x| (-1.0..=2.0).contains(x)));
        assert!((0..500).all(|i| a.v(i).iter().map(|x| x * x).sum::<f64>() <= 0.25 + 1e-15));
        let g = InitialSampler {
            velocities: VelocityLaw::TruncatedGaussian { std: 1.0, radius: 1.5 },
            ..smp.clone()
        }
        .centered()
        .sample(300, 3, 1, &[]);
        assert!(g.momentum().iter().all(|m| m.abs() < 1e-14));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(AgentEnsemble::new(2, vec![0.0; 4], vec![0.0; 2], vec![0.5, 0.5]).is_err());
        assert!(AgentEnsemble::new(1, vec![0.0; 2], vec![0.0; 2], vec![0.7, 0.7]).is_err());
        assert!(AgentEnsemble::new(1, vec![0.0; 2], vec![0.0; 2], vec![1.5, -0.5]).is_err());
    }
}
