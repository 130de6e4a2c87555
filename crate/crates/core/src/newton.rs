//! Normal-equations kernel. Factors Sigma = A X S^-1 A^T once per iterate,
//! then solves the universal tangent direction system
//!     X ds + S dx = d,   A dx = 0,   ds + A^T dy = 0
//! for arbitrary right-hand sides d against that single factorization.

use crate::linalg::{dot, Cholesky, FactorError};
use crate::lp::{LpInstance, PrimalDualPoint};

/// Solution of the tangent-direction system for one right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub dx: Vec<f64>,
    pub ds: Vec<f64>,
    pub dy: Vec<f64>,
}

/// Diagonal scalings of one iterate plus the Cholesky factor of
/// Sigma = A X S^-1 A^T. Immutable once built; any number of right-hand
/// sides can be solved against it.
pub struct ScalingState<'a> {
    inst: &'a LpInstance,
    x: Vec<f64>,
    s: Vec<f64>,
    chol: Cholesky,
}

impl<'a> ScalingState<'a> {
    /// Builds Sigma by symmetric accumulation and factors it. With `ridge`
    /// set, 1e-12*trace/m is added to the diagonal before factoring; this is
    /// a diagnostic escape hatch, off by default, since silent regularization
    /// would distort step sizes.
    pub fn factorize(
        inst: &'a LpInstance,
        u: &PrimalDualPoint,
        ridge: bool,
    ) -> Result<Self, FactorError> {
        let (m, n) = (inst.m(), inst.n());
        let weights: Vec<f64> = (0..n).map(|j| u.x[j] / u.s[j]).collect();
        let mut sigma = vec![0.0; m * m];
        let mut scaled = vec![0.0; n];
        for i in 0..m {
            let row_i = inst.row(i);
            for j in 0..n {
                scaled[j] = row_i[j] * weights[j];
            }
            for k in i..m {
                let val = dot(&scaled, inst.row(k));
                sigma[i * m + k] = val;
                sigma[k * m + i] = val;
            }
        }
        if ridge {
            let trace: f64 = (0..m).map(|i| sigma[i * m + i]).sum();
            let bump = 1e-12 * trace / m as f64;
            for i in 0..m {
                sigma[i * m + i] += bump;
            }
        }
        let chol = Cholesky::factor(m, &sigma)?;
        Ok(Self {
            inst,
            x: u.x.clone(),
            s: u.s.clone(),
            chol,
        })
    }

    /// Solves the tangent system: dy from Sigma dy = -A S^-1 d, then
    /// ds = -A^T dy, and dx = S^-1 (d - X ds) so the first equation holds to
    /// rounding regardless of the accuracy of dy.
    pub fn solve_utd(&self, d: &[f64]) -> Direction {
        let (m, n) = (self.inst.m(), self.inst.n());
        let scaled: Vec<f64> = (0..n).map(|j| d[j] / self.s[j]).collect();
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            rhs[i] = -dot(self.inst.row(i), &scaled);
        }
        let dy = self.chol.solve(&rhs);
        let at_dy = self.inst.mat_t_vec(&dy);
        let ds: Vec<f64> = at_dy.iter().map(|v| -v).collect();
        let dx: Vec<f64> = (0..n)
            .map(|j| (d[j] - self.x[j] * ds[j]) / self.s[j])
            .collect();
        Direction { dx, ds, dy }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }
}

/// Residuals of the three defining equations plus <dx, ds>, in order:
/// |X ds + S dx - d|_inf, |A dx|_inf, |ds + A^T dy|_inf, <dx, ds>.
pub fn utd_residuals(
    inst: &LpInstance,
    u: &PrimalDualPoint,
    d: &[f64],
    dir: &Direction,
) -> [f64; 4] {
    let n = inst.n();
    let mut eq = 0.0f64;
    for j in 0..n {
        let lhs = u.x[j] * dir.ds[j] + u.s[j] * dir.dx[j];
        eq = eq.max((lhs - d[j]).abs());
    }
    let adx = inst.mat_vec(&dir.dx);
    let null = adx.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let at_dy = inst.mat_t_vec(&dir.dy);
    let mut dual = 0.0f64;
    for j in 0..n {
        dual = dual.max((dir.ds[j] + at_dy[j]).abs());
    }
    [eq, null, dual, dot(&dir.dx, &dir.ds)]
}
