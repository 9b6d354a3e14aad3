//! Symmetric banded LDLᵀ factorization.
//!
//! The reduced bending Hessians in this crate are narrow-banded: bandwidth 2
//! for a single layer (a pentadiagonal operator) and `3K-1` for a stack of
//! `K` layers in gap coordinates. One in-place factor/solve covers both.

/// Symmetric positive definite banded matrix in lower-band storage:
/// `entry(r, r - d)` for `d in 0..=bandwidth` lives at `band[r][d]`.
pub(crate) struct BandedSystem {
    bandwidth: usize,
    rows: usize,
    band: Vec<f64>,
}

impl BandedSystem {
    pub fn zeros(rows: usize, bandwidth: usize) -> Self {
        Self {
            bandwidth,
            rows,
            band: vec![0.0; rows * (bandwidth + 1)],
        }
    }

    #[inline]
    fn idx(&self, r: usize, d: usize) -> usize {
        r * (self.bandwidth + 1) + d
    }

    /// Add `v` to the entry `(r, c)` with `c <= r`, `r - c <= bandwidth`.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let d = r - c;
        debug_assert!(d <= self.bandwidth);
        let i = self.idx(r, d);
        self.band[i] += v;
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        if r < c {
            return self.get(c, r);
        }
        let d = r - c;
        if d > self.bandwidth {
            0.0
        } else {
            self.band[self.idx(r, d)]
        }
    }

    /// Add `shift` to every diagonal entry.
    pub fn regularize(&mut self, shift: f64) {
        for r in 0..self.rows {
            let i = self.idx(r, 0);
            self.band[i] += shift;
        }
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.band[self.idx(r, 0)])
            .fold(0.0, f64::max)
    }

    /// In-place LDLᵀ factorization; false when a pivot is not positive.
    pub fn factorize(&mut self) -> bool {
        let w = self.bandwidth;
        for r in 0..self.rows {
            let lo = r.saturating_sub(w);
            // L[r][k] for k in lo..r
            for k in lo..r {
                let mut v = self.get(r, k);
                let plo = lo.max(k.saturating_sub(w));
                for p in plo..k {
                    v -= self.get(r, p) * self.get(k, p) * self.band[self.idx(p, 0)];
                }
                let dk = self.band[self.idx(k, 0)];
                let i = self.idx(r, r - k);
                self.band[i] = v / dk;
            }
            let mut d = self.get(r, r);
            for p in lo..r {
                let l = self.get(r, p);
                d -= l * l * self.band[self.idx(p, 0)];
            }
            // negated form also rejects NaN pivots
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(d > 0.0) {
                return false;
            }
            let i = self.idx(r, 0);
            self.band[i] = d;
        }
        true
    }

    /// Solve `A x = b` in place after [`Self::factorize`].
    pub fn solve(&self, b: &mut [f64]) {
        let w = self.bandwidth;
        let m = self.rows;
        for r in 0..m {
            let lo = r.saturating_sub(w);
            let mut v = b[r];
            for p in lo..r {
                v -= self.get(r, p) * b[p];
            }
            b[r] = v;
        }
        for r in 0..m {
            b[r] /= self.band[self.idx(r, 0)];
        }
        for r in (0..m).rev() {
            let hi = (r + w).min(m - 1);
            let mut v = b[r];
            for p in r + 1..=hi {
                v -= self.get(p, r) * b[p];
            }
            b[r] = v;
        }
    }
}
