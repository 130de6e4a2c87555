//! Small dense linear algebra kernels.
//!
//! Matrices are stored row major in flat slices. Problem sizes stay modest
//! (m <= 1024 rows in the normal equations), so plain triple loops with good
//! locality beat any blocking cleverness here.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("pivot {index} fell to {value:.3e}; matrix is rank deficient or badly scaled")]
    PivotTooSmall { index: usize, value: f64 },
}

/// Inner product with a fixed left-to-right summation order.
///
/// Every residual check in the crate goes through this function, so a vector
/// computed as `A x` here compares bit-for-bit against a stored `b` that was
/// produced the same way.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Cholesky factorization `M = L L^T` of a symmetric positive definite matrix.
pub struct Cholesky {
    dim: usize,
    // Lower triangle of L in the full dim x dim row-major layout.
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors the full row-major symmetric matrix `m`.
    ///
    /// Fails when an updated pivot drops to or below `1e-13 * max_ii m[i][i]`,
    /// which covers both rank deficiency and scaling so extreme that the
    /// factorization would be meaningless in doubles.
    pub fn factor(dim: usize, m: &[f64]) -> Result<Self, FactorError> {
        assert_eq!(m.len(), dim * dim, "matrix storage does not match dim");
        let mut l = m.to_vec();
        let mut max_diag: f64 = 0.0;
        for i in 0..dim {
            max_diag = max_diag.max(l[i * dim + i]);
        }
        let floor = (1e-13 * max_diag).max(f64::MIN_POSITIVE);
        for j in 0..dim {
            let mut d = l[j * dim + j];
            for k in 0..j {
                let v = l[j * dim + k];
                d -= v * v;
            }
            if d <= floor {
                return Err(FactorError::PivotTooSmall { index: j, value: d });
            }
            let d = d.sqrt();
            l[j * dim + j] = d;
            let inv = 1.0 / d;
            for i in (j + 1)..dim {
                let mut v = l[i * dim + j];
                for k in 0..j {
                    v -= l[i * dim + k] * l[j * dim + k];
                }
                l[i * dim + j] = v * inv;
            }
        }
        // Zero the strict upper triangle so the storage is unambiguous.
        for i in 0..dim {
            for j in (i + 1)..dim {
                l[i * dim + j] = 0.0;
            }
        }
        Ok(Self { dim, l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `L L^T x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim;
        assert_eq!(x.len(), n);
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.l[i * n + k] * x[k];
            }
            x[i] = v / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in (i + 1)..n {
                v -= self.l[k * n + i] * x[k];
            }
            x[i] = v / self.l[i * n + i];
        }
    }
}

/// LU factorization with partial pivoting, `P M = L U`.
pub struct Lu {
    dim: usize,
    lu: Vec<f64>,
    // swaps[k] = r means rows k and r were exchanged at elimination step k.
    swaps: Vec<usize>,
}

impl Lu {
    /// Factors the full row-major matrix `m`. A pivot whose magnitude does
    /// not exceed `pivot_floor` stops the factorization; pass
    /// `1e-12 * ||M||_inf` for the basis-candidate tests.
    pub fn factor(dim: usize, m: &[f64], pivot_floor: f64) -> Result<Self, FactorError> {
        assert_eq!(m.len(), dim * dim, "matrix storage does not match dim");
        let mut lu = m.to_vec();
        let mut swaps = vec![0usize; dim];
        for k in 0..dim {
            let mut best = k;
            let mut best_val = lu[k * dim + k].abs();
            for r in (k + 1)..dim {
                let v = lu[r * dim + k].abs();
                if v > best_val {
                    best = r;
                    best_val = v;
                }
            }
            if best_val <= pivot_floor {
                return Err(FactorError::PivotTooSmall {
                    index: k,
                    value: best_val,
                });
            }
            swaps[k] = best;
            if best != k {
                for j in 0..dim {
                    lu.swap(k * dim + j, best * dim + j);
                }
            }
            let piv = lu[k * dim + k];
            for r in (k + 1)..dim {
                let f = lu[r * dim + k] / piv;
                lu[r * dim + k] = f;
                for j in (k + 1)..dim {
                    lu[r * dim + j] -= f * lu[k * dim + j];
                }
            }
        }
        Ok(Self { dim, lu, swaps })
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.swaps[k]);
        }
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.lu[i * n + k] * x[k];
            }
            x[i] = v;
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in (i + 1)..n {
                v -= self.lu[i * n + k] * x[k];
            }
            x[i] = v / self.lu[i * n + i];
        }
        x
    }

    /// Solves `M^T x = b` using the same factorization:
    /// M^T = U^T L^T P, so x = P^T (L^T \ (U^T \ b)).
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // U^T z = b, forward substitution on the transposed upper factor.
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.lu[k * n + i] * x[k];
            }
            x[i] = v / self.lu[i * n + i];
        }
        // L^T w = z, back substitution; L has a unit diagonal.
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in (i + 1)..n {
                v -= self.lu[k * n + i] * x[k];
            }
            x[i] = v;
        }
        // Undo the row exchanges in reverse to apply P^T.
        for k in (0..n).rev() {
            x.swap(k, self.swaps[k]);
        }
        x
    }
}
