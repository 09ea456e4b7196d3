//! Order-fixed pairwise summation.
//!
//! Terms are summed naively in blocks of [`BLOCK`], and block sums are merged
//! along a binary-counter tree, so the rounding pattern depends only on the
//! number of terms and their order, never on the thread that runs the loop.

pub(crate) const BLOCK: u32 = 8;
const LEVELS: usize = 48;

#[derive(Clone, Copy)]
pub struct Cascade<const D: usize> {
    block: [f64; D],
    filled: u32,
    levels: [[f64; D]; LEVELS],
    occupied: u64,
}

impl<const D: usize> Default for Cascade<D> {
    fn default() -> Self {
        Self::new()
    }
}

impl<const D: usize> Cascade<D> {
    #[inline]
    pub fn new() -> Self {
        Cascade { block: [0.0; D], filled: 0, levels: [[0.0; D]; LEVELS], occupied: 0 }
    }

    #[inline(always)]
    pub fn push(&mut self, term: [f64; D]) {
        for k in 0..D {
            self.block[k] += term[k];
        }
        self.filled += 1;
        if self.filled == BLOCK {
            let b = std::mem::replace(&mut self.block, [0.0; D]);
            self.filled = 0;
            self.carry(b);
        }
    }

    #[inline]
    fn carry(&mut self, mut x: [f64; D]) {
        let mut level = 0;
        while self.occupied & (1 << level) != 0 {
            for k in 0..D {
                x[k] += self.levels[level][k];
            }
            self.occupied &= !(1 << level);
            level += 1;
        }
        self.levels[level] = x;
        self.occupied |= 1 << level;
    }

    #[inline]
    pub fn finish(&self) -> [f64; D] {
        let mut total = self.block;
        for level in 0..LEVELS {
            if self.occupied & (1 << level) != 0 {
                for k in 0..D {
                    total[k] += self.levels[level][k];
                }
            }
        }
        total
    }
}

/// Pairwise sum of a slice with the same tree as [`Cascade`].
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    let mut c = Cascade::<1>::new();
    for &x in xs {
        c.push([x]);
    }
    c.finish()[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_exact_integer_sums() {
        for n in [0usize, 1, 7, 8, 9, 64, 1000, 4097] {
            let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            assert_eq!(pairwise_sum(&xs), (n * n.saturating_sub(1) / 2) as f64);
        }
    }

    #[test]
    fn beats_naive_on_ill_conditioned_input() {
        let xs = vec![0.1; 1 << 20];
        let naive: f64 = xs.iter().sum();
        let exact = 0.1 * (1 << 20) as f64;
        assert!((pairwise_sum(&xs) - exact).abs() <= (naive - exact).abs());
        assert!((pairwise_sum(&xs) - exact).abs() < 1e-9);
    }
}
