//! Paired finite-`N` / mean-field runs and their Monte Carlo summaries.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::metrics::PointCloud;
use crate::model::ModelParams;

/// Replica mean and its standard error at each sample time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

impl MeanSe {
    /// Column statistics of a `replica × time` table.
    pub fn of(table: &[Vec<f64>]) -> MeanSe {
        let r = table.len();
        let nt = table.first().map_or(0, |t| t.len());
        let mut mean = vec![0.0; nt];
        let mut se = vec![0.0; nt];
        for k in 0..nt {
            let m = table.iter().map(|row| row[k]).sum::<f64>() / r as f64;
            let var = if r > 1 { table.iter().map(|row| (row[k] - m).powi(2)).sum::<f64>() / (r - 1) as f64 } else { 0.0 };
            mean[k] = m;
            se[k] = (var / r as f64).sqrt();
        }
        MeanSe { mean, se }
    }

    pub fn scaled(mut self, c: f64) -> MeanSe {
        self.mean.iter_mut().for_each(|m| *m *= c);
        self.se.iter_mut().for_each(|s| *s *= c.abs());
        self
    }
}

/// Test functions `φ(x, v)` whose empirical averages are compared with
/// the reference law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    /// `1`.
    Constant,
    /// `v_axis`.
    VelocityComponent { axis: usize },
    /// `cos(2π x_axis / L)` (`L = 1` off the torus).
    PositionCos { axis: usize },
    /// `exp(−|v|² / (2 width²))`.
    Bump { width: f64 },
}

impl Observable {
    pub fn eval(&self, x: &[f64], v: &[f64], period: f64) -> f64 {
        match *self {
            Observable::Constant => 1.0,
            Observable::VelocityComponent { axis } => v[axis],
            Observable::PositionCos { axis } => (std::f64::consts::TAU * x[axis] / period).cos(),
            Observable::Bump { width } => (-v.iter().map(|c| c * c).sum::<f64>() / (2.0 * width * width)).exp(),
        }
    }

    /// Catalog identifier, e.g. `velocity:0` or `bump:0.5`.
    pub fn id(&self) -> String {
        match self {
            Observable::Constant => "constant".into(),
            Observable::VelocityComponent { axis } => format!("velocity:{axis}"),
            Observable::PositionCos { axis } => format!("position_cos:{axis}"),
            Observable::Bump { width } => format!("bump:{width}"),
        }
    }

    pub fn parse(id: &str) -> Result<Observable> {
        let (name, arg) = id.split_once(':').unwrap_or((id, ""));
        let bad = || param(format!("unknown observable `{id}`"));
        match name {
            "constant" if arg.is_empty() => Ok(Observable::Constant),
            "velocity" => Ok(Observable::VelocityComponent { axis: arg.parse().map_err(|_| bad())? }),
            "position_cos" => Ok(Observable::PositionCos { axis: arg.parse().map_err(|_| bad())? }),
            "bump" => {
                let width: f64 = arg.parse().map_err(|_| bad())?;
                if width > 0.0 {
                    Ok(Observable::Bump { width })
                } else {
                    Err(bad())
                }
            }
            _ => Err(bad()),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            Observable::VelocityComponent { axis } | Observable::PositionCos { axis } if axis >= dim => {
                Err(param(format!("observable axis {axis} out of range for d = {dim}")))
            }
            Observable::Bump { width } if !(width > 0.0) => Err(param("bump width must be positive")),
            _ => Ok(()),
        }
    }
}

/// Per-replica gaps `(1/N) Σ φ(x_i, v_i) − ∫ φ df` over time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub observable: Observable,
    pub replica_gap: Vec<Vec<f64>>,
    /// Variance of the observable under the reference ensemble at each sample.
    pub reference_variance: Vec<f64>,
}

/// Noise-strength positivity monitor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityMonitor {
    pub floor: f64,
    pub min_strength: f64,
    pub violations: u64,
}

/// `k`-agent phase-space marginals at the last sample, one point per replica.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalClouds {
    pub k: usize,
    pub particles: PointCloud,
    pub mean_field: PointCloud,
}

/// Finite-`N` system coupled to mean-field characteristics sharing initial
/// data (and noise, for stochastic runs).
///
/// The per-agent squared gaps are averaged over the first `tracked` agents
/// of each replica; by exchangeability they estimate the average over all
/// `n` agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingRun {
    pub params: ModelParams,
    pub n: usize,
    pub tracked: usize,
    pub replica_count: usize,
    pub reference_size: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    /// `replica × time` per-agent `|x_i − x̄_i|²`.
    pub replica_ex: Vec<Vec<f64>>,
    /// `replica × time` per-agent `|v_i − v̄_i|²`.
    pub replica_ev: Vec<Vec<f64>>,
    /// `replica × time` accumulated noise-mismatch martingale.
    #[serde(default)]
    pub replica_martingale: Vec<Vec<f64>>,
    #[serde(default)]
    pub observables: Vec<ObservableSeries>,
    pub positivity: Option<PositivityMonitor>,
    pub marginals: Option<MarginalClouds>,
}

impl CouplingRun {
    pub fn e_x(&self) -> MeanSe {
        MeanSe::of(&self.replica_ex)
    }

    pub fn e_v(&self) -> MeanSe {
        MeanSe::of(&self.replica_ev)
    }

    /// `E = E_x + E_v` per agent.
    pub fn e(&self) -> MeanSe {
        MeanSe::of(&self.replica_sum())
    }

    fn replica_sum(&self) -> Vec<Vec<f64>> {
        self.replica_ex.iter().zip(&self.replica_ev).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect()
    }

    /// `P = ½ Σ_i E|x_i − x̄_i|²` summed over all `n` agents.
    pub fn p_series(&self) -> MeanSe {
        self.e_x().scaled(0.5 * self.n as f64)
    }

    /// `K = ½ Σ_i E|v_i − v̄_i|²`.
    pub fn k_series(&self) -> MeanSe {
        self.e_v().scaled(0.5 * self.n as f64)
    }

    /// `√((k/N)·2(P + K))` with a delta-method standard error.
    pub fn proxy(&self, k: usize) -> MeanSe {
        let s = self.e();
        let mean: Vec<f64> = s.mean.iter().map(|e| (k as f64 * e).sqrt()).collect();
        let se = s
            .se
            .iter()
            .zip(&mean)
            .map(|(se, m)| if *m > 0.0 { 0.5 * k as f64 * se / m } else { 0.0 })
            .collect();
        MeanSe { mean, se }
    }

    pub fn martingale(&self) -> Option<MeanSe> {
        (!self.replica_martingale.is_empty()).then(|| MeanSe::of(&self.replica_martingale))
    }
}

/// Squared observable error `E|gap|²` over time (mean and standard error).
pub fn observable_error(run: &CouplingRun, id: &str) -> Result<MeanSe> {
    let o = Observable::parse(id)?;
    let s = run
        .observables
        .iter()
        .find(|s| s.observable == o)
        .ok_or_else(|| param(format!("observable `{id}` was not recorded in this run")))?;
    let sq: Vec<Vec<f64>> = s.replica_gap.iter().map(|r| r.iter().map(|g| g * g).collect()).collect();
    Ok(MeanSe::of(&sq))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_columns() {
        let m = MeanSe::of(&[vec![1.0, 2.0], vec![3.0, 2.0]]);
        assert_eq!(m.mean, vec![2.0, 2.0]);
        assert!((m.se[0] - 1.0).abs() < 1e-15 && m.se[1] == 0.0);
    }

    #[test]
    fn observable_ids_roundtrip() {
        for o in [
            Observable::Constant,
            Observable::VelocityComponent { axis: 1 },
            Observable::PositionCos { axis: 0 },
            Observable::Bump { width: 0.5 },
        ] {
            assert_eq!(Observable::parse(&o.id()).unwrap(), o);
        }
        assert!(Observable::parse("nope").is_err());
        assert!(Observable::parse("bump:-1").is_err());
    }
}
