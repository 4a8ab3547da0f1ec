//! Symmetric tridiagonal matrices and their LDLᵀ factorization.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag<T> {
    pub diag: Vec<T>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<T>,
    /// Row sums, kept separately so products can be formed from
    /// differences of neighbouring entries instead of cancelling sums.
    pub row_sum: Vec<T>,
}

/// `L D Lᵀ` with unit lower bidiagonal `L`.
#[derive(Debug, Clone)]
pub struct Ldl<T> {
    d: Vec<T>,
    l: Vec<T>,
}

impl<T: Real> SymTridiag<T> {
    pub fn new(diag: Vec<T>, off: Vec<T>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1), "off-diagonal length");
        let row_sum = (0..diag.len())
            .map(|i| {
                let left = if i > 0 { off[i - 1] } else { T::zero() };
                let right = off.get(i).copied().unwrap_or(T::zero());
                diag[i] + left + right
            })
            .collect();
        Self { diag, off, row_sum }
    }

    /// Matrix given by its off-diagonal and exact row sums.
    pub fn from_row_sums(row_sum: Vec<T>, off: Vec<T>) -> Self {
        assert_eq!(off.len() + 1, row_sum.len().max(1), "off-diagonal length");
        let diag = (0..row_sum.len())
            .map(|i| {
                let left = if i > 0 { off[i - 1] } else { T::zero() };
                let right = off.get(i).copied().unwrap_or(T::zero());
                row_sum[i] - left - right
            })
            .collect();
        Self { diag, off, row_sum }
    }

    /// `scale · A + diag(add)`.
    pub fn affine(&self, scale: T, add: &[T]) -> Self {
        let row_sum = self.row_sum.iter().zip(add).map(|(&s, &a)| scale * s + a).collect();
        Self::from_row_sums(row_sum, self.off.iter().map(|&o| scale * o).collect())
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut y: Vec<T> = (0..n).map(|i| self.row_sum[i] * x[i]).collect();
        for i in 0..n.saturating_sub(1) {
            let flux = self.off[i] * (x[i] - x[i + 1]);
            y[i] -= flux;
            y[i + 1] += flux;
        }
        y
    }

    /// `xᵀ A x = Σ sᵢ xᵢ² − Σ off_i (x_i − x_{i+1})²`.
    pub fn form(&self, x: &[T]) -> T {
        let mut s = T::zero();
        for i in 0..self.dim() {
            s += self.row_sum[i] * x[i] * x[i];
        }
        for i in 0..self.off.len() {
            let d = x[i] - x[i + 1];
            s -= self.off[i] * d * d;
        }
        s
    }

    /// `A - shift · diag(m)`.
    pub fn shifted(&self, shift: T, m: &[T]) -> Self {
        let add: Vec<T> = m.iter().map(|&w| -shift * w).collect();
        self.affine(T::one(), &add)
    }

    /// Factorization that fails on the first nonpositive pivot, so success
    /// certifies positive definiteness (Sylvester).
    pub fn ldl_positive(&self) -> Result<Ldl<T>> {
        let n = self.dim();
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let mut di = self.diag[i];
            if i > 0 {
                let li = self.off[i - 1] / d[i - 1];
                di -= li * self.off[i - 1];
                l.push(li);
            }
            if !(di > T::zero()) {
                return Err(Error::NotPositiveDefinite { row: i, pivot: di.as_f64() });
            }
            d.push(di);
        }
        Ok(Ldl { d, l })
    }

    /// Factorization without a definiteness requirement; fails only on a
    /// vanishing or non-finite pivot.
    pub fn ldl(&self) -> Result<Ldl<T>> {
        let n = self.dim();
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let mut di = self.diag[i];
            if i > 0 {
                let li = self.off[i - 1] / d[i - 1];
                di -= li * self.off[i - 1];
                l.push(li);
            }
            if di == T::zero() || !di.is_finite() {
                return Err(Error::NotPositiveDefinite { row: i, pivot: di.as_f64() });
            }
            d.push(di);
        }
        Ok(Ldl { d, l })
    }

    /// Number of eigenvalues below `x`, for the pencil `(A, diag(m))`.
    pub fn count_below(&self, x: T, m: &[T]) -> usize {
        let mut count = 0;
        let mut prev = T::one();
        for i in 0..self.dim() {
            let mut d = self.diag[i] - x * m[i];
            if i > 0 {
                let o = self.off[i - 1];
                d -= o * o / prev;
            }
            if d == T::zero() {
                d = -T::epsilon() * (self.diag[i].abs() + T::one());
            }
            if d < T::zero() {
                count += 1;
            }
            prev = d;
        }
        count
    }
}

impl<T: Real> Ldl<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.d.len();
        let mut x = b.to_vec();
        for i in 1..n {
            let prev = x[i - 1];
            x[i] -= self.l[i - 1] * prev;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let next = x[i + 1];
            x[i] -= self.l[i] * next;
        }
        x
    }

    pub fn pivots(&self) -> &[T] {
        &self.d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace(n: usize) -> SymTridiag<f64> {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn solve_recovers_rhs() {
        let a = laplace(7);
        let x: Vec<f64> = (0..7).map(|i| (i as f64).sin() + 0.5).collect();
        let b = a.matvec(&x);
        let y = a.ldl_positive().unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
        assert!((a.form(&x) - x.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>()).abs() < 1e-13);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = laplace(5).shifted(4.0, &[1.0; 5]);
        assert!(matches!(a.ldl_positive(), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn sturm_count_matches_known_spectrum() {
        // eigenvalues 2 - 2cos(kπ/(n+1))
        let n = 9;
        let a = laplace(n);
        let eig: Vec<f64> = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        let m = vec![1.0; n];
        for (j, &e) in eig.iter().enumerate() {
            assert_eq!(a.count_below(e - 1e-9, &m), j);
            assert_eq!(a.count_below(e + 1e-9, &m), j + 1);
        }
    }
}
