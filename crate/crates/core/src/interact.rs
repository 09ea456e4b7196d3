//! Row kernels for `Σ_j w_j φ(|x_i − x_j|) A(v_j − v_i)` and the strength
//! `Σ_j w_j φ(|x_i − x_j|)`.
//!
//! Each row is summed in index order through a [`Cascade`], and rows are
//! distributed over the rayon pool, so results do not depend on the number
//! of worker threads.

use rayon::prelude::*;

use crate::kernels::{PhiEval, Pow};
use crate::model::{nearest_image, Domain, ModelParams};
use crate::sum::Cascade;

/// Interacting partners: flat `n × d` positions and velocities plus weights.
#[derive(Clone, Copy)]
pub(crate) struct Source<'a> {
    pub x: &'a [f64],
    pub v: &'a [f64],
    pub w: &'a [f64],
}

#[derive(Clone, Debug)]
pub(crate) struct Interaction {
    phi: PhiEval,
    align: Pow,
    domain: Domain,
    pub dim: usize,
}

const MIN_ROWS: usize = 8;

impl Interaction {
    pub fn new(params: &ModelParams) -> Self {
        Interaction {
            phi: PhiEval::new(&params.kernel),
            align: params.align().pow(),
            domain: params.domain,
            dim: params.d,
        }
    }

    #[inline(always)]
    fn row<const D: usize, const TORUS: bool, const STRENGTH: bool>(
        &self,
        xi: &[f64],
        vi: &[f64],
        src: Source<'_>,
    ) -> ([f64; D], f64) {
        let period = match self.domain {
            Domain::Torus { period } => period,
            Domain::FreeSpace => 1.0,
        };
        let xi: [f64; D] = xi.try_into().unwrap();
        let vi: [f64; D] = vi.try_into().unwrap();
        let mut acc = Cascade::<D>::new();
        let mut sacc = Cascade::<1>::new();
        for (j, &wj) in src.w.iter().enumerate() {
            let xj = &src.x[j * D..j * D + D];
            let vj = &src.v[j * D..j * D + D];
            let mut r2 = 0.0;
            for k in 0..D {
                let mut dx = xi[k] - xj[k];
                if TORUS {
                    dx = nearest_image(dx, period);
                }
                r2 += dx * dx;
            }
            let phi = self.phi.eval(r2.sqrt());
            if STRENGTH {
                sacc.push([wj * phi]);
            }
            let mut dv = [0.0; D];
            let mut s2 = 0.0;
            for k in 0..D {
                dv[k] = vj[k] - vi[k];
                s2 += dv[k] * dv[k];
            }
            let c = if s2 > 0.0 { wj * phi * self.align.eval(s2) } else { 0.0 };
            let mut t = [0.0; D];
            for k in 0..D {
                t[k] = c * dv[k];
            }
            acc.push(t);
        }
        (acc.finish(), sacc.finish()[0])
    }

    /// Force (and optionally strength) on one target row.
    #[inline]
    pub fn row_into(&self, xi: &[f64], vi: &[f64], src: Source<'_>, out: &mut [f64], strength: bool) -> f64 {
        macro_rules! go {
            ($d:literal) => {{
                let torus = matches!(self.domain, Domain::Torus { .. });
                let (f, s) = match (torus, strength) {
                    (false, false) => self.row::<$d, false, false>(xi, vi, src),
                    (false, true) => self.row::<$d, false, true>(xi, vi, src),
                    (true, false) => self.row::<$d, true, false>(xi, vi, src),
                    (true, true) => self.row::<$d, true, true>(xi, vi, src),
                };
                out.copy_from_slice(&f);
                s
            }};
        }
        match self.dim {
            1 => go!(1),
            2 => go!(2),
            3 => go!(3),
            d => unreachable!("unsupported dimension {d}"),
        }
    }

    /// Strength of one target position.
    #[inline]
    pub fn strength_at(&self, xi: &[f64], src: Source<'_>) -> f64 {
        let d = self.dim;
        let mut acc = Cascade::<1>::new();
        for (j, &wj) in src.w.iter().enumerate() {
            let mut r2 = 0.0;
            for k in 0..d {
                let dx = self.domain.displacement(xi[k], src.x[j * d + k]);
                r2 += dx * dx;
            }
            acc.push([wj * self.phi.eval(r2.sqrt())]);
        }
        acc.finish()[0]
    }

    /// Accelerations of the targets `(x, v)` driven by `src`.
    pub fn accelerations(&self, x: &[f64], v: &[f64], src: Source<'_>, out: &mut [f64]) {
        let d = self.dim;
        out.par_chunks_mut(d).with_min_len(MIN_ROWS).enumerate().for_each(|(i, o)| {
            self.row_into(&x[i * d..(i + 1) * d], &v[i * d..(i + 1) * d], src, o, false);
        });
    }

    /// Accelerations and strengths of the targets driven by `src`.
    pub fn accelerations_and_strengths(
        &self,
        x: &[f64],
        v: &[f64],
        src: Source<'_>,
        out: &mut [f64],
        strengths: &mut [f64],
    ) {
        let d = self.dim;
        out.par_chunks_mut(d).zip(strengths.par_iter_mut()).with_min_len(MIN_ROWS).enumerate().for_each(
            |(i, (o, s))| {
                *s = self.row_into(&x[i * d..(i + 1) * d], &v[i * d..(i + 1) * d], src, o, true);
            },
        );
    }

    pub fn strengths(&self, x: &[f64], src: Source<'_>, out: &mut [f64]) {
        let d = self.dim;
        out.par_iter_mut().with_min_len(MIN_ROWS).enumerate().for_each(|(i, s)| {
            *s = self.strength_at(&x[i * d..(i + 1) * d], src);
        });
    }
}
