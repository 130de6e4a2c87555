//! Parabolic target space: control variables w = (v0, v), residual vectors,
//! the proximity measures chi_k and delta, the barrier F, and the functional
//! proximity psi.

use crate::linalg::dot;
use crate::lp::{LpInstance, PrimalDualPoint};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("target not parabolic: v0 = {v0:.6e} <= |v|^2 = {norm_sq:.6e}")]
    TargetNotParabolic { v0: f64, norm_sq: f64 },
    #[error("residual r[{index}] = {value:.6e} is negative beyond roundoff")]
    OutsideFeasible { index: usize, value: f64 },
    #[error("residual r[{index}] vanishes; proximity is undefined on the boundary")]
    BoundaryResidual { index: usize },
    #[error("omega_star requires tau < 1, got {tau}")]
    OmegaDomain { tau: f64 },
}

/// Control variable w = (v0, v) with v0 > |v|^2.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPoint {
    pub v0: f64,
    pub v: Vec<f64>,
}

impl TargetPoint {
    pub fn norm_sq(&self) -> f64 {
        dot(&self.v, &self.v)
    }

    pub fn is_interior(&self) -> bool {
        self.v0 > self.norm_sq()
    }

    pub fn validate(&self) -> Result<(), StateError> {
        let norm_sq = self.norm_sq();
        if !(self.v0 > norm_sq) || !self.v0.is_finite() {
            return Err(StateError::TargetNotParabolic {
                v0: self.v0,
                norm_sq,
            });
        }
        Ok(())
    }

    /// rho(w) = (v0 - |v|^2)/(n+1), the common residual value at the center.
    pub fn rho(&self) -> f64 {
        (self.v0 - self.norm_sq()) / (self.v.len() as f64 + 1.0)
    }

    /// mu_star(w) = v0^2/(v0 - |v|^2), the quantity whose contraction rate
    /// the autocorrective methods guarantee.
    pub fn mu_star(&self) -> f64 {
        self.v0 * self.v0 / (self.v0 - self.norm_sq())
    }

    /// Greedy update w <- (1-alpha)w. Keeps v0 > |v|^2 for alpha in (0,1):
    /// v0 scales linearly, |v|^2 quadratically.
    pub fn shrink(&self, alpha: f64) -> TargetPoint {
        let t = 1.0 - alpha;
        TargetPoint {
            v0: t * self.v0,
            v: self.v.iter().map(|vi| t * vi).collect(),
        }
    }
}

/// A primal-dual iterate together with its current target.
#[derive(Debug, Clone)]
pub struct FullState {
    pub u: PrimalDualPoint,
    pub w: TargetPoint,
}

/// All proximity data of a state, computed in one pass.
#[derive(Debug, Clone)]
pub struct ProximitySnapshot {
    pub rho: f64,
    /// r[0] = v0 - <s,x>, r[i] = x_i s_i - v_i^2 for i = 1..=n.
    pub r: Vec<f64>,
    pub chi0: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub delta: f64,
    pub psi: f64,
    pub mu_star: f64,
}

/// omega_star(tau) = -tau - ln(1 - tau), the conjugate barrier growth bound.
pub fn omega_star(tau: f64) -> Result<f64, StateError> {
    if !(tau < 1.0) {
        return Err(StateError::OmegaDomain { tau });
    }
    Ok(-tau - (-tau).ln_1p())
}

/// The starting target w_*(u): sigma = min_i x_i s_i, v0 = <s,x> + sigma,
/// v_i = sqrt(x_i s_i - sigma). By construction r(z) = sigma e exactly, so
/// the pair (u, w_*(u)) is perfectly centered: psi = 0, delta = 0.
pub fn starting_target(u: &PrimalDualPoint) -> TargetPoint {
    let prods: Vec<f64> = u.x.iter().zip(&u.s).map(|(x, s)| x * s).collect();
    let sigma = prods.iter().cloned().fold(f64::INFINITY, f64::min);
    let v0 = u.duality_gap() + sigma;
    let v = prods.iter().map(|p| (p - sigma).max(0.0).sqrt()).collect();
    TargetPoint { v0, v }
}

/// Residual vector of length n+1. Components in [-tol, 0] with
/// tol = 1e-12*(1+v0) are snapped to 0 to absorb roundoff near the center;
/// anything more negative is an error.
pub fn residuals(z: &FullState) -> Result<Vec<f64>, StateError> {
    let n = z.u.x.len();
    let tol = 1e-12 * (1.0 + z.w.v0.abs());
    let mut r = Vec::with_capacity(n + 1);
    r.push(z.w.v0 - z.u.duality_gap());
    for i in 0..n {
        r.push(z.u.x[i] * z.u.s[i] - z.w.v[i] * z.w.v[i]);
    }
    for (index, value) in r.iter_mut().enumerate() {
        if *value < 0.0 {
            if *value < -tol {
                return Err(StateError::OutsideFeasible {
                    index,
                    value: *value,
                });
            }
            *value = 0.0;
        }
    }
    Ok(r)
}

/// chi_k, delta, and psi of a raw residual vector against a given rho.
/// Requires every component strictly positive.
pub fn measures_from_residuals(
    r: &[f64],
    rho: f64,
) -> Result<(f64, f64, f64, f64, f64), StateError> {
    for (index, &value) in r.iter().enumerate() {
        if !(value > 0.0) {
            return Err(StateError::BoundaryResidual { index });
        }
    }
    let mut q0 = 0.0;
    let mut q1 = 0.0;
    let mut q2 = 0.0;
    let mut psi = 0.0;
    for &ri in r {
        let d = ri - rho;
        let d2 = d * d;
        q0 += d2 / (rho * rho);
        q1 += d2 / (ri * rho);
        q2 += d2 / (ri * ri);
        // -ln(ri/rho) via ln_1p keeps psi accurate when ri is close to rho.
        psi -= (d / rho).ln_1p();
    }
    let chi0 = q0.sqrt();
    let chi1 = q1.sqrt();
    let chi2 = q2.sqrt();
    let delta = if chi2 > 0.0 { q1 / chi2 } else { 0.0 };
    Ok((chi0, chi1, chi2, delta, psi))
}

/// Full proximity snapshot of a state.
pub fn proximity(z: &FullState) -> Result<ProximitySnapshot, StateError> {
    z.w.validate()?;
    let r = residuals(z)?;
    let rho = z.w.rho();
    let (chi0, chi1, chi2, delta, psi) = measures_from_residuals(&r, rho)?;
    Ok(ProximitySnapshot {
        rho,
        r,
        chi0,
        chi1,
        chi2,
        delta,
        psi,
        mu_star: z.w.mu_star(),
    })
}

/// The barrier F(z) = -sum ln(x_i s_i - v_i^2) - ln(v0 - <c,x> + <b,y>).
/// The last slot uses the cost gap, which equals <s,x> on the dual-feasible
/// set up to roundoff.
pub fn barrier_f(inst: &LpInstance, z: &FullState) -> Result<f64, StateError> {
    let n = inst.n();
    let mut f = 0.0;
    let gap_arg = z.w.v0 - inst.primal_objective(&z.u.x) + inst.dual_objective(&z.u.y);
    if !(gap_arg > 0.0) {
        return Err(StateError::BoundaryResidual { index: 0 });
    }
    f -= gap_arg.ln();
    for i in 0..n {
        let arg = z.u.x[i] * z.u.s[i] - z.w.v[i] * z.w.v[i];
        if !(arg > 0.0) {
            return Err(StateError::BoundaryResidual { index: i + 1 });
        }
        f -= arg.ln();
    }
    Ok(f)
}

/// phi(w) = -(n+1) ln rho(w), the barrier value at the center u(w).
pub fn phi(w: &TargetPoint) -> f64 {
    -(w.v.len() as f64 + 1.0) * w.rho().ln()
}

/// psi via F - phi. Subject to cancellation between two large logs; the
/// explicit sum in `measures_from_residuals` is the accurate route, and the
/// two agree within 1e-9*(1 + |F| + |phi|).
pub fn psi_via_barrier(inst: &LpInstance, z: &FullState) -> Result<f64, StateError> {
    Ok(barrier_f(inst, z)? - phi(&z.w))
}
