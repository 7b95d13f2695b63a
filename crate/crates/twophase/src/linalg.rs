//! Complex banded LU with partial pivoting, used by the finite-difference solvers.

use crate::{Error, Result, C64};

/// Square matrix with `kl` sub- and `ku` super-diagonals; room for pivoting fill.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
}

impl BandedMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![C64::new(0.0, 0.0); n * width] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        // row i stores columns i-kl ..= i+ku+kl
        i * self.width + (j + self.kl - i)
    }

    fn get(&self, i: usize, j: usize) -> C64 {
        self.data[self.idx(i, j)]
    }

    /// Adds `v` to entry `(i, j)`; panics if the entry is outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside band kl={} ku={}", self.kl, self.ku);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Matrix-vector product with the unfactored matrix.
    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Solves `A x = rhs`, consuming the matrix. Returns the solution and the
    /// ratio of smallest to largest pivot magnitude as a conditioning estimate.
    pub fn solve(mut self, rhs: &[C64]) -> Result<(Vec<C64>, f64)> {
        let n = self.n;
        if rhs.len() != n {
            return Err(Error::Dimension(format!("rhs length {} for matrix of size {n}", rhs.len())));
        }
        let mut b = rhs.to_vec();
        let reach = self.kl + self.ku;
        let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let last_row = (i + self.kl).min(n - 1);
            let last_col = (i + reach).min(n - 1);
            let mut p = i;
            let mut best = self.get(i, i).norm();
            for r in i + 1..=last_row {
                let v = self.get(r, i).norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(0.0));
            }
            if p != i {
                for j in i..=last_col {
                    let (a, c) = (self.idx(i, j), self.idx(p, j));
                    self.data.swap(a, c);
                }
                b.swap(i, p);
            }
            pmin = pmin.min(best);
            pmax = pmax.max(best);
            let piv = self.get(i, i);
            for r in i + 1..=last_row {
                let f = self.get(r, i) / piv;
                if f == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in i..=last_col {
                    let v = self.get(i, j);
                    let k = self.idx(r, j);
                    self.data[k] -= f * v;
                }
                let bi = b[i];
                b[r] -= f * bi;
            }
        }
        let ratio = pmin / pmax;
        if ratio < 1e-15 {
            return Err(Error::Singular(ratio));
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let last_col = (i + reach).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=last_col {
                s -= self.get(i, j) * x[j];
            }
            x[i] = s / self.get(i, i);
        }
        Ok((x, ratio))
    }
}
