//! Exact Wasserstein distances between weighted point clouds, a sliced
//! surrogate, and the rate-fitting helpers every experiment reports with.
//!
//! Equal-size clouds with uniform weights go through the assignment
//! solver, where the optimal coupling is a permutation; anything else goes
//! through the transportation solver.

mod assignment;
mod fit;
mod transport;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::AgentEnsemble;
use crate::error::{param, shape, Result};
use crate::rng;

pub use assignment::solve as solve_assignment;
pub use fit::{
    calibrate_envelope, fit_log_corrected, fit_power_law, japanese, last_decade, linear_fit, EnvelopeCheck, RateFit,
    MIN_FIT_POINTS,
};
pub use transport::solve as solve_transport;

/// Weighted empirical measure on `R^dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let c = PointCloud { dim, points, weights };
        c.validate()?;
        Ok(c)
    }

    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        let n = if dim == 0 { 0 } else { points.len() / dim };
        Self::new(dim, points, vec![1.0 / n.max(1) as f64; n])
    }

    /// Phase-space cloud `(x_i, v_i)` with the ensemble's weights.
    pub fn phase_space(ens: &AgentEnsemble) -> Self {
        PointCloud { dim: 2 * ens.dim, points: ens.phase_points(), weights: ens.weights.clone() }
    }

    /// Position marginal of an ensemble.
    pub fn positions(ens: &AgentEnsemble) -> Self {
        PointCloud { dim: ens.dim, points: ens.positions.clone(), weights: ens.weights.clone() }
    }

    pub fn n(&self) -> usize {
        self.points.len() / self.dim.max(1)
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.points.len() % self.dim != 0 {
            return Err(shape("points must be an n x dim array with dim > 0"));
        }
        if self.n() == 0 {
            return Err(shape("point cloud is empty"));
        }
        if self.weights.len() != self.n() {
            return Err(shape(format!("expected {} weights, got {}", self.n(), self.weights.len())));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || self.points.iter().any(|x| !x.is_finite()) {
            return Err(param("weights must be nonnegative and points finite"));
        }
        let s: f64 = self.weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(param(format!("weights sum to {s}, not 1")));
        }
        Ok(())
    }

    fn is_uniform(&self) -> bool {
        let w0 = 1.0 / self.n() as f64;
        self.weights.iter().all(|w| (w - w0).abs() <= 1e-15)
    }
}

fn check_pair(a: &PointCloud, b: &PointCloud) -> Result<()> {
    a.validate()?;
    b.validate()?;
    if a.dim != b.dim {
        return Err(shape(format!("cloud dimensions differ: {} vs {}", a.dim, b.dim)));
    }
    Ok(())
}

fn cost_matrix(a: &PointCloud, b: &PointCloud, squared: bool) -> Vec<f64> {
    let (n, m) = (a.n(), b.n());
    let mut c = vec![0.0; n * m];
    c.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let x = a.point(i);
        for (j, r) in row.iter_mut().enumerate() {
            let s: f64 = x.iter().zip(b.point(j)).map(|(p, q)| (p - q) * (p - q)).sum();
            *r = if squared { s } else { s.sqrt() };
        }
    });
    c
}

fn optimal_cost(a: &PointCloud, b: &PointCloud, squared: bool) -> f64 {
    let c = cost_matrix(a, b, squared);
    if a.n() == b.n() && a.is_uniform() && b.is_uniform() {
        assignment::solve(&c, a.n()).0 / a.n() as f64
    } else {
        transport::solve(&c, &a.weights, &b.weights)
    }
}

/// Exact `W1` with Euclidean ground cost.
pub fn wasserstein1(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_pair(a, b)?;
    Ok(optimal_cost(a, b, false).max(0.0))
}

/// Exact `W2` with Euclidean ground cost.
pub fn wasserstein2(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_pair(a, b)?;
    Ok(optimal_cost(a, b, true).max(0.0).sqrt())
}

/// Squared `W2` between weighted samples on the line.
pub fn w2_squared_1d(xa: &[f64], wa: &[f64], xb: &[f64], wb: &[f64]) -> f64 {
    let order = |x: &[f64]| {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|i, j| x[*i].total_cmp(&x[*j]));
        idx
    };
    let (ia, ib) = (order(xa), order(xb));
    let (mut p, mut q) = (0, 0);
    let (mut ra, mut rb) = (wa[ia[0]], wb[ib[0]]);
    let mut acc = 0.0;
    while p < ia.len() && q < ib.len() {
        let m = ra.min(rb);
        acc += m * (xa[ia[p]] - xb[ib[q]]).powi(2);
        ra -= m;
        rb -= m;
        if ra <= 0.0 {
            p += 1;
            if p < ia.len() {
                ra = wa[ia[p]];
            }
        }
        if rb <= 0.0 {
            q += 1;
            if q < ib.len() {
                rb = wb[ib[q]];
            }
        }
    }
    acc
}

/// Approximate `W2`: root mean square of one-dimensional `W2` over random
/// unit directions drawn from `split(seed, [projections tag])`.
pub fn sliced_wasserstein2(a: &PointCloud, b: &PointCloud, projections: usize, seed: u64) -> Result<f64> {
    check_pair(a, b)?;
    if projections == 0 {
        return Err(param("projections must be >= 1"));
    }
    let mut r = rng::stream(seed, &[rng::TAG_PROJECTIONS]);
    let d = a.dim;
    let mut acc = 0.0;
    let mut u = vec![0.0; d];
    for _ in 0..projections {
        loop {
            u.iter_mut().for_each(|c| *c = Distribution::<f64>::sample(&StandardNormal, &mut r));
            let s = u.iter().map(|c| c * c).sum::<f64>().sqrt();
            if s > 0.0 {
                u.iter_mut().for_each(|c| *c /= s);
                break;
            }
        }
        let proj = |c: &PointCloud| -> Vec<f64> {
            (0..c.n()).map(|i| c.point(i).iter().zip(&u).map(|(x, y)| x * y).sum()).collect()
        };
        acc += w2_squared_1d(&proj(a), &a.weights, &proj(b), &b.weights);
    }
    Ok((acc / projections as f64).sqrt())
}

/// Test functions with Lipschitz constant at most one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LipschitzFn {
    /// `u · x` for a unit vector `u`.
    Linear { dir: Vec<f64> },
    /// `|x − c|`.
    Distance { center: Vec<f64> },
    /// `min(|x − c|, r)`.
    Clipped { center: Vec<f64>, radius: f64 },
    /// `max(r − |x − c|, 0)`.
    Tent { center: Vec<f64>, radius: f64 },
    /// `sin(k u·x + φ) / k`.
    Wave { dir: Vec<f64>, freq: f64, phase: f64 },
}

impl LipschitzFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let dist = |c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let dot = |u: &[f64]| x.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        match self {
            LipschitzFn::Linear { dir } => dot(dir),
            LipschitzFn::Distance { center } => dist(center),
            LipschitzFn::Clipped { center, radius } => dist(center).min(*radius),
            LipschitzFn::Tent { center, radius } => (radius - dist(center)).max(0.0),
            LipschitzFn::Wave { dir, freq, phase } => (freq * dot(dir) + phase).sin() / freq,
        }
    }

    /// `∫ f dμ` against a cloud.
    pub fn integrate(&self, c: &PointCloud) -> f64 {
        (0..c.n()).map(|i| c.weights[i] * self.eval(c.point(i))).sum()
    }
}

/// `count` random catalog members in `dim` dimensions, centers drawn from
/// `[-scale, scale]^dim`.
pub fn lipschitz_catalog(dim: usize, count: usize, scale: f64, seed: u64) -> Vec<LipschitzFn> {
    let mut r = rng::stream(seed, &[rng::TAG_PROJECTIONS, 1]);
    let unit = |r: &mut rand_chacha::ChaCha8Rng| loop {
        let u: Vec<f64> = (0..dim).map(|_| Distribution::<f64>::sample(&StandardNormal, r)).collect();
        let s = u.iter().map(|c| c * c).sum::<f64>().sqrt();
        if s > 0.0 {
            break u.into_iter().map(|c| c / s).collect::<Vec<f64>>();
        }
    };
    (0..count)
        .map(|k| {
            let center: Vec<f64> = (0..dim).map(|_| r.random_range(-scale..=scale)).collect();
            let radius = r.random_range(0.1..=1.0) * scale.max(1e-3);
            match k % 5 {
                0 => LipschitzFn::Linear { dir: unit(&mut r) },
                1 => LipschitzFn::Distance { center },
                2 => LipschitzFn::Clipped { center, radius },
                3 => LipschitzFn::Tent { center, radius },
                _ => {
                    let dir = unit(&mut r);
                    LipschitzFn::Wave { dir, freq: r.random_range(0.5..=5.0), phase: r.random_range(0.0..6.3) }
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_points_and_translates() {
        let a = PointCloud::uniform(2, vec![0.0, 0.0]).unwrap();
        let b = PointCloud::uniform(2, vec![3.0, 4.0]).unwrap();
        assert_eq!(wasserstein1(&a, &b).unwrap(), 5.0);
        let pts = vec![0.0, 1.0, 2.0, -1.0, 0.5, 0.5];
        let c = PointCloud::uniform(2, pts.clone()).unwrap();
        let s = PointCloud::uniform(2, pts.chunks(2).flat_map(|p| [p[0] + 0.3, p[1] - 0.4]).collect()).unwrap();
        assert!((wasserstein2(&c, &s).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(wasserstein2(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let a = PointCloud::uniform(2, vec![0.0, 0.0]).unwrap();
        let b = PointCloud::uniform(1, vec![0.0]).unwrap();
        assert!(wasserstein1(&a, &b).is_err());
        assert!(PointCloud::uniform(1, vec![]).is_err());
        assert!(sliced_wasserstein2(&a, &a, 0, 1).is_err());
    }

    #[test]
    fn sliced_is_exact_on_the_line() {
        let a = PointCloud::uniform(1, vec![0.0, 2.0, 5.0]).unwrap();
        let b = PointCloud::uniform(1, vec![1.0, 1.5, -2.0]).unwrap();
        let w = wasserstein2(&a, &b).unwrap();
        for k in [1, 3, 17] {
            assert!((sliced_wasserstein2(&a, &b, k, 9).unwrap() - w).abs() < 1e-12);
        }
    }

    #[test]
    fn unequal_sizes_use_transport() {
        let a = PointCloud::uniform(1, vec![0.0]).unwrap();
        let b = PointCloud::uniform(1, vec![-1.0, 1.0]).unwrap();
        assert!((wasserstein1(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!((wasserstein2(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }
}
