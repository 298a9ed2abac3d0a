//! Symmetric tridiagonal matrices: Sturm counts, bisection, Thomas solves.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix; `off[i]` couples rows `i` and `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1));
        SymTridiag { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x` (LDLᵀ inertia of `A − xI`).
    pub fn sturm_count(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.diag.len() {
            let e2 = if i == 0 {
                0.0
            } else {
                self.off[i - 1] * self.off[i - 1]
            };
            d = self.diag[i] - x - if i == 0 { 0.0 } else { e2 / d };
            if d == 0.0 {
                d = -f64::EPSILON * (self.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut rad = 0.0;
            if i > 0 {
                rad += self.off[i - 1].abs();
            }
            if i + 1 < n {
                rad += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - rad);
            hi = hi.max(self.diag[i] + rad);
        }
        (lo, hi)
    }

    /// `k`-th smallest eigenvalue (0-based) by Sturm bisection.
    pub fn eigenvalue_bisection(&self, k: usize, max_iter: usize) -> Result<f64> {
        if k >= self.len() {
            return Err(Error::OutOfRange(format!(
                "eigenvalue index {k} ≥ order {}",
                self.len()
            )));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        for _ in 0..max_iter {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 4.0 * f64::EPSILON * scale || mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if hi - lo <= 1e-12 * scale {
            Ok(0.5 * (lo + hi))
        } else {
            Err(Error::Numerical(format!(
                "bisection did not converge in {max_iter} iterations (bracket [{lo}, {hi}])"
            )))
        }
    }

    /// Solve `(A − shift·I) x = rhs` by Gaussian elimination without pivoting.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut denom = self.diag[0] - shift;
        for i in 0..n {
            if i > 0 {
                denom = self.diag[i] - shift - self.off[i - 1] * c[i - 1];
            }
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::Numerical(format!("zero pivot at row {i}")));
            }
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            let prev = if i > 0 {
                self.off[i - 1] * x[i - 1]
            } else {
                0.0
            };
            x[i] = (rhs[i] - prev) / denom;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Ok(x)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn dirichlet_laplacian_spectrum() {
        let n = 20;
        let a = laplacian(n);
        for k in 0..n {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            let got = a.eigenvalue_bisection(k, 200).unwrap();
            assert!((got - exact).abs() < 1e-13, "k={k}: {got} vs {exact}");
        }
        assert_eq!(a.sturm_count(-1.0), 0);
        assert_eq!(a.sturm_count(5.0), n);
    }

    #[test]
    fn thomas_solves() {
        let a = laplacian(7);
        let x: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let rhs = a.matvec(&x);
        let y = a.solve_shifted(0.0, &rhs).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }
}
