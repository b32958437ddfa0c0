//! Symmetric positive definite band solver used by the Newton iterations.
//!
//! A half-bandwidth of `n - 1` gives an ordinary dense Cholesky factorisation.

use crate::error::{domain, Result};

/// Lower triangle of a symmetric band matrix, row-major, `m + 1` slots per row.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        let m = half_bandwidth.min(n.saturating_sub(1));
        Self { n, m, data: vec![0.0; n * (m + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.m
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.m);
        i * (self.m + 1) + (j + self.m - i)
    }

    /// Adds `v` at `(i, j)` with `j <= i`; entries outside the band are dropped.
    #[inline]
    pub fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        if i - j <= self.m {
            let k = self.idx(i, j);
            self.data[k] += v;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.m {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// In-place Cholesky factorisation `A = L L^T`.
    pub fn factor(mut self) -> Result<BandedCholesky> {
        let (n, m) = (self.n, self.m);
        for i in 0..n {
            let lo = i.saturating_sub(m);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(m));
                let mut s = self.data[self.idx(i, j)];
                for k in klo..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                let slot = self.idx(i, j);
                if i == j {
                    if !(s > 0.0) {
                        return Err(domain(format!("matrix not positive definite at pivot {i}")));
                    }
                    self.data[slot] = s.sqrt();
                } else {
                    self.data[slot] = s / self.data[self.idx(j, j)];
                }
            }
        }
        Ok(BandedCholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    l: BandedSpd,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let (n, m) = (l.n, l.m);
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(m)..i {
                s -= l.data[l.idx(i, k)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + m + 1).min(n) {
                s -= l.data[l.idx(k, i)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, m: usize) -> BandedSpd {
        let mut a = BandedSpd::zeros(n, m);
        for i in 0..n {
            a.add_lower(i, i, 2.0);
            if i > 0 {
                a.add_lower(i, i - 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn solves_laplacian() {
        let n = 7;
        let a = tridiag(n, 1);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = 2.0 * x[i];
                if i > 0 {
                    s -= x[i - 1];
                }
                if i + 1 < n {
                    s -= x[i + 1];
                }
                s
            })
            .collect();
        let sol = a.factor().unwrap().solve(&b);
        for (u, v) in sol.iter().zip(&x) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn wide_band_equals_dense() {
        let n = 6;
        let mut a = BandedSpd::zeros(n, 10);
        assert_eq!(a.half_bandwidth(), n - 1);
        for i in 0..n {
            for j in 0..=i {
                let v = if i == j { n as f64 + 1.0 } else { 1.0 / (1.0 + (i - j) as f64) };
                a.add_lower(i, j, v);
            }
        }
        let b = vec![1.0; n];
        let x = a.clone().factor().unwrap().solve(&b);
        for i in 0..n {
            let r: f64 = (0..n).map(|j| a.get(i, j) * x[j]).sum();
            assert!((r - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = BandedSpd::zeros(2, 1);
        a.add_lower(0, 0, 1.0);
        a.add_lower(1, 0, 2.0);
        a.add_lower(1, 1, 1.0);
        assert!(a.factor().is_err());
    }
}
