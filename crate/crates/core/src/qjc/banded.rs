// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Complex banded LU with partial pivoting, laid out like LAPACK's `gbtrf`.
//!
//! Element `(i, j)` lives at `kv + i + j * (ldab - 1)` where `kv = kl + ku`
//! and `ldab = 2 kl + ku + 1`; the extra `kl` rows hold pivoting fill-in.

use num_complex::Complex64;

pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<Complex64>,
}

pub struct BandLu {
    band: BandMatrix,
    pivots: Vec<usize>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self { n, kl, ku, ldab, data: vec![Complex64::new(0.0, 0.0); ldab * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        self.kl + self.ku + i + j * (self.ldab - 1)
    }

    /// Adds `v` to entry `(i, j)`. Panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(i <= j + self.kl && j <= i + self.ku, "entry ({i}, {j}) outside band");
        let o = self.offset(i, j);
        self.data[o] += v;
    }

    /// Clears row `i` within the band.
    pub fn clear_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        for j in lo..=hi {
            let o = self.offset(i, j);
            self.data[o] = Complex64::new(0.0, 0.0);
        }
    }

    /// In-place factorization. Returns `None` on an exactly zero pivot.
    pub fn factor(mut self) -> Option<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        let stride = self.ldab - 1;
        let mut pivots = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let base = self.offset(j, j);
            let mut jp = 0;
            let mut best = self.data[base].norm_sqr();
            for r in 1..=km {
                let v = self.data[base + r].norm_sqr();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            pivots[j] = j + jp;
            if best == 0.0 {
                return None;
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in 0..=(ju - j) {
                    let o = base + c * stride;
                    self.data.swap(o, o + jp);
                }
            }
            if km > 0 {
                let inv = self.data[base].inv();
                for r in 1..=km {
                    self.data[base + r] *= inv;
                }
                for c in 1..=(ju - j) {
                    let col = base + c * stride;
                    let t = self.data[col];
                    if t.re == 0.0 && t.im == 0.0 {
                        continue;
                    }
                    for r in 1..=km {
                        let l = self.data[base + r];
                        self.data[col + r] -= l * t;
                    }
                }
            }
        }
        debug_assert!(kv < self.ldab);
        Some(BandLu { band: self, pivots })
    }
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let a = &self.band;
        let n = a.n;
        assert_eq!(b.len(), n);
        for j in 0..n.saturating_sub(1) {
            let km = a.kl.min(n - 1 - j);
            let l = self.pivots[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            if bj.re == 0.0 && bj.im == 0.0 {
                continue;
            }
            let base = a.offset(j, j);
            for r in 1..=km {
                b[j + r] -= a.data[base + r] * bj;
            }
        }
        let kv = a.kl + a.ku;
        for j in (0..n).rev() {
            let base = a.offset(j, j);
            b[j] /= a.data[base];
            let bj = b[j];
            let lo = j.saturating_sub(kv);
            for i in lo..j {
                b[i] -= a.data[base - (j - i)] * bj;
            }
        }
    }

    /// Ratio of smallest to largest `|u_jj|`, a cheap conditioning proxy.
    pub fn pivot_ratio(&self) -> f64 {
        let a = &self.band;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for j in 0..a.n {
            let v = a.data[a.offset(j, j)].norm();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi == 0.0 {
            0.0
        } else {
            lo / hi
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn matches_dense_solve_with_pivoting() {
        let n = 23;
        let (kl, ku) = (3, 5);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::<Complex64>::zeros(n, n);
        // Deterministic entries with small diagonal to force row swaps.
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j {
                    c(0.01 * (i as f64 + 1.0), 0.0)
                } else {
                    c(((i * 7 + j * 3) % 11) as f64 - 5.0, ((i + 2 * j) % 5) as f64 - 2.0)
                };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<Complex64> = (0..n).map(|i| c(i as f64, 1.0 - i as f64 * 0.5)).collect();
        let lu = band.factor().expect("nonsingular");
        let mut x = rhs.clone();
        lu.solve_in_place(&mut x);
        let expect = dense.lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..n {
            assert!((x[i] - expect[i]).norm() < 1e-9 * (1.0 + expect[i].norm()), "row {i}");
        }
    }

    #[test]
    fn zero_matrix_is_reported_singular() {
        assert!(BandMatrix::zeros(4, 1, 1).factor().is_none());
    }
}
