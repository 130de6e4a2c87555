//! The three target-following methods. All share one loop skeleton: take a
//! proximity snapshot, stop if the target is small and the state centered,
//! otherwise factor the normal equations once and do either a predictor step
//! (method-specific right-hand side, closed-form proximity along the ray,
//! root search, greedy target shrink) or a corrector step (barrier
//! minimization at fixed target). They differ only in the predictor.

use crate::finite::{self, ActivationPolicy, BasisCandidate};
use crate::lp::{LpInstance, PrimalDualPoint};
use crate::newton::{Direction, ScalingState};
use crate::target::{omega_star, proximity, starting_target, FullState, TargetPoint};
use serde::Serialize;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

/// Relative interval width at which the corrector's golden-section search
/// stops (a Newton polish follows).
const CORRECTOR_REL_TOL: f64 = 1e-4;

/// Largest admissible predictor step; alpha = 1 collapses the target.
const ALPHA_CAP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Tangential predictor: shifts along the affine direction of the
    /// current target.
    Tptfm,
    /// Auto-correcting predictor: absorbs the centering residual into the
    /// predictor right-hand side.
    Acptfm,
    /// Auto-correcting predictor plus a second-order correction direction.
    Ptfm2,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Tptfm, Method::Acptfm, Method::Ptfm2];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tptfm => "tptfm",
            Method::Acptfm => "acptfm",
            Method::Ptfm2 => "ptfm2",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "tptfm" => Ok(Method::Tptfm),
            "acptfm" => Ok(Method::Acptfm),
            "ptfm2" => Ok(Method::Ptfm2),
            other => Err(ConfigError::UnknownMethod(other.to_string())),
        }
    }
}

/// How the per-iteration acceptance level beta_k is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaPolicy {
    /// beta_k = 0.99*beta for the tangential method, beta otherwise.
    Constant,
    /// beta_k = min(0.99*beta, scale*v0_k/v0_0); drives the tangential
    /// method's superlinear tail. Tangential method only.
    Proportional { scale: f64 },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown method {0:?} (expected tptfm, acptfm, or ptfm2)")]
    UnknownMethod(String),
    #[error("{name} = {value} out of range; expected {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("proportional beta policy applies to tptfm only, not {0}")]
    ProportionalUnsupported(Method),
}

#[derive(Debug, Clone)]
pub struct MethodConfig {
    pub method: Method,
    /// Rate parameter in (0,1); beta = r/(2+r) and A_psi = omega_star(r).
    pub r: f64,
    /// Stop once v0 <= eps at a centered state.
    pub eps: f64,
    pub max_outer: usize,
    /// Predictor bisection stops when the bracket is this narrow relative to
    /// the remaining headroom 1 - alpha.
    pub ls_rel_tol: f64,
    pub beta_policy: BetaPolicy,
    pub finite_termination: bool,
    pub activation: ActivationPolicy,
    /// Adds 1e-12*trace/m to the normal-equations diagonal (diagnostic only).
    pub diag_ridge: bool,
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            r: 6.0 / 7.0,
            eps: 1e-8,
            max_outer: 500,
            ls_rel_tol: 1e-3,
            beta_policy: BetaPolicy::Constant,
            finite_termination: false,
            activation: ActivationPolicy::AwakeTests,
            diag_ridge: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(ConfigError::OutOfRange {
                name: "r",
                value: self.r,
                expected: "0 < r < 1",
            });
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(ConfigError::OutOfRange {
                name: "eps",
                value: self.eps,
                expected: "a positive finite threshold",
            });
        }
        if self.max_outer == 0 {
            return Err(ConfigError::OutOfRange {
                name: "max_outer",
                value: 0.0,
                expected: "at least 1",
            });
        }
        if !(self.ls_rel_tol > 0.0 && self.ls_rel_tol <= 0.5) {
            return Err(ConfigError::OutOfRange {
                name: "ls_rel_tol",
                value: self.ls_rel_tol,
                expected: "0 < tol <= 0.5",
            });
        }
        if let BetaPolicy::Proportional { scale } = self.beta_policy {
            if self.method != Method::Tptfm {
                return Err(ConfigError::ProportionalUnsupported(self.method));
            }
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(ConfigError::OutOfRange {
                    name: "beta_scale",
                    value: scale,
                    expected: "a positive finite factor",
                });
            }
        }
        Ok(())
    }

    /// Maximal proximity level beta = r/(2+r) (< 1/3).
    pub fn beta(&self) -> f64 {
        self.r / (2.0 + self.r)
    }

    /// Predictor acceptance level A_psi = omega_star(r).
    pub fn a_psi(&self) -> f64 {
        omega_star(self.r).expect("r < 1 by validation")
    }

    /// Acceptance level for iteration k, given the current and initial v0.
    pub fn beta_k(&self, v0: f64, v0_init: f64) -> f64 {
        let beta = self.beta();
        match (self.method, self.beta_policy) {
            (Method::Tptfm, BetaPolicy::Constant) => 0.99 * beta,
            (Method::Tptfm, BetaPolicy::Proportional { scale }) => {
                (scale * v0 / v0_init).min(0.99 * beta)
            }
            _ => beta,
        }
    }
}

/// Theoretical per-predictor contraction constant of the target merit
/// mu_star. Doubles as the initial probe scale of the predictor search.
pub fn gamma_monitor(n: usize, r: f64, method: Method) -> f64 {
    let beta = r / (2.0 + r);
    let nf = n as f64;
    let n_r = 25.0 / 6.0 + nf / (1.0 - beta);
    match method {
        Method::Tptfm | Method::Acptfm => {
            let n_tilde = (nf + 1.0) / 2.0 + n_r;
            1.0 / (1.0 + (n_tilde / r).sqrt())
        }
        Method::Ptfm2 => {
            let kappa1 = ((r / 2.0) * (1.0 - beta).sqrt()).cbrt();
            let kappa2 = 1.0 + (r / (2.0 * (1.0 - beta))).cbrt() / 6.0;
            let n_hat = (16.0 * (nf + 1.0) / 27.0 + n_r * n_r / 2.0).sqrt();
            let n_bar = n_hat.max(n_r);
            kappa1 / (n_bar.sqrt() * kappa2 + kappa1)
        }
    }
}

/// Corrector right-hand side d_c = rho*e - r(1..); zero exactly at the
/// center. `r` is the full residual vector including the gap slot.
pub fn rhs_corrector(r: &[f64], rho: f64) -> Vec<f64> {
    r[1..].iter().map(|ri| rho - ri).collect()
}

/// Tangential predictor right-hand side
/// d_a = (|v|^2/(n+1) - rho)e - 2v^2.
pub fn rhs_predictor_tptfm(w: &TargetPoint) -> Vec<f64> {
    let shift = w.norm_sq() / (w.v.len() as f64 + 1.0) - w.rho();
    w.v.iter().map(|vi| shift - 2.0 * vi * vi).collect()
}

/// Auto-correcting predictor right-hand side
/// d~ = |v|^2/(n+1)e - v^2 - x*s, which equals d_a + d_c.
pub fn rhs_predictor_acptfm(w: &TargetPoint, u: &PrimalDualPoint) -> Vec<f64> {
    let shift = w.norm_sq() / (w.v.len() as f64 + 1.0);
    (0..w.v.len())
        .map(|i| shift - w.v[i] * w.v[i] - u.x[i] * u.s[i])
        .collect()
}

/// Second-order correction right-hand side
/// d^ = v^2 - |v|^2/(n+1)e - dx~*ds~, built from the first direction.
pub fn rhs_predictor2_hat(w: &TargetPoint, tilde: &Direction) -> Vec<f64> {
    let shift = w.norm_sq() / (w.v.len() as f64 + 1.0);
    (0..w.v.len())
        .map(|i| w.v[i] * w.v[i] - shift - tilde.dx[i] * tilde.ds[i])
        .collect()
}

/// Coefficients of the residual deviation polynomial along a predictor ray:
/// V(alpha) = s(alpha)*base + alpha^2 g + alpha^3 g1 + alpha^4 g2 with
/// s(alpha) = 1-alpha when `scale_base` is set and 1 otherwise. The shifted
/// state's residuals are exactly rho(alpha) + V_i(alpha), so psi along the
/// ray has a closed form needing no linear algebra.
#[derive(Debug, Clone)]
pub struct PredictorCoeffs {
    pub base: Vec<f64>,
    pub g: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub scale_base: bool,
    pub v0: f64,
    pub v_norm_sq: f64,
    pub rho0: f64,
}

impl PredictorCoeffs {
    pub fn n(&self) -> usize {
        self.base.len() - 1
    }

    /// rho of the shrunk target (1-alpha)w.
    pub fn rho_at(&self, alpha: f64) -> f64 {
        let t = 1.0 - alpha;
        (t * self.v0 - t * t * self.v_norm_sq) / self.base.len() as f64
    }

    fn term(&self, alpha: f64, i: usize) -> f64 {
        let b = if self.scale_base {
            (1.0 - alpha) * self.base[i]
        } else {
            self.base[i]
        };
        let a2 = alpha * alpha;
        b + a2 * self.g[i] + a2 * alpha * self.g1[i] + a2 * a2 * self.g2[i]
    }

    /// Psi of the shifted state in closed form; +inf when the step leaves
    /// the feasible region (any log argument nonpositive).
    pub fn psi_along(&self, alpha: f64) -> f64 {
        let rho = self.rho_at(alpha);
        if !(rho > 0.0) {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for i in 0..self.base.len() {
            let t = self.term(alpha, i) / rho;
            if t <= -1.0 {
                return f64::INFINITY;
            }
            acc -= t.ln_1p();
        }
        acc
    }

    /// <e, V(alpha)>; zero for all alpha up to roundoff.
    pub fn e_sum_at(&self, alpha: f64) -> f64 {
        (0..self.base.len()).map(|i| self.term(alpha, i)).sum()
    }
}

/// Builds the deviation polynomial for one predictor step. `r` is the
/// current full residual vector; `hat` is required for the second-order
/// method only.
pub fn predictor_coeffs(
    r: &[f64],
    w: &TargetPoint,
    method: Method,
    tilde: &Direction,
    hat: Option<&Direction>,
) -> PredictorCoeffs {
    let n = w.v.len();
    let n1 = n as f64 + 1.0;
    let rho0 = w.rho();
    let v_norm_sq = w.norm_sq();
    let base: Vec<f64> = r.iter().map(|ri| ri - rho0).collect();
    let mut g = vec![0.0; n + 1];
    let mut g1 = vec![0.0; n + 1];
    let mut g2 = vec![0.0; n + 1];
    match method {
        Method::Tptfm | Method::Acptfm => {
            g[0] = v_norm_sq / n1;
            for i in 0..n {
                g[i + 1] = tilde.dx[i] * tilde.ds[i] - w.v[i] * w.v[i] + v_norm_sq / n1;
            }
        }
        Method::Ptfm2 => {
            let hat = hat.expect("second-order method needs the correction direction");
            for i in 0..n {
                g1[i + 1] = hat.dx[i] * tilde.ds[i] + hat.ds[i] * tilde.dx[i];
                g2[i + 1] = hat.dx[i] * hat.ds[i];
            }
        }
    }
    PredictorCoeffs {
        base,
        g,
        g1,
        g2,
        scale_base: method != Method::Tptfm,
        v0: w.v0,
        v_norm_sq,
        rho0,
    }
}

/// One predictor ray: the polynomial model plus the concrete step data
/// needed to evaluate candidate points.
pub struct PredictorStep<'a> {
    pub coeffs: PredictorCoeffs,
    u: &'a PrimalDualPoint,
    tilde: &'a Direction,
    hat: Option<&'a Direction>,
}

impl<'a> PredictorStep<'a> {
    pub fn new(
        coeffs: PredictorCoeffs,
        u: &'a PrimalDualPoint,
        tilde: &'a Direction,
        hat: Option<&'a Direction>,
    ) -> Self {
        Self {
            coeffs,
            u,
            tilde,
            hat,
        }
    }

    /// u + alpha*tilde (+ alpha^2*hat for the second-order method).
    pub fn point_at(&self, alpha: f64) -> PrimalDualPoint {
        let n = self.u.x.len();
        let m = self.u.y.len();
        let a2 = alpha * alpha;
        let mut x = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(m);
        match self.hat {
            Some(hat) => {
                for j in 0..n {
                    x.push(self.u.x[j] + alpha * self.tilde.dx[j] + a2 * hat.dx[j]);
                    s.push(self.u.s[j] + alpha * self.tilde.ds[j] + a2 * hat.ds[j]);
                }
                for i in 0..m {
                    y.push(self.u.y[i] + alpha * self.tilde.dy[i] + a2 * hat.dy[i]);
                }
            }
            None => {
                for j in 0..n {
                    x.push(self.u.x[j] + alpha * self.tilde.dx[j]);
                    s.push(self.u.s[j] + alpha * self.tilde.ds[j]);
                }
                for i in 0..m {
                    y.push(self.u.y[i] + alpha * self.tilde.dy[i]);
                }
            }
        }
        PrimalDualPoint { x, s, y }
    }

    fn state_strictly_positive(&self, alpha: f64) -> bool {
        let a2 = alpha * alpha;
        for j in 0..self.u.x.len() {
            let (mut xj, mut sj) = (
                self.u.x[j] + alpha * self.tilde.dx[j],
                self.u.s[j] + alpha * self.tilde.ds[j],
            );
            if let Some(hat) = self.hat {
                xj += a2 * hat.dx[j];
                sj += a2 * hat.ds[j];
            }
            if !(xj > 0.0 && sj > 0.0) {
                return false;
            }
        }
        true
    }

    /// The search's acceptance predicate: the modeled psi stays below the
    /// level and the actual shifted point is strictly positive. The model
    /// already rejects any alpha whose residuals leave the feasible region.
    pub fn accept(&self, alpha: f64, a_psi: f64) -> bool {
        self.coeffs.psi_along(alpha) <= a_psi && self.state_strictly_positive(alpha)
    }
}

#[derive(Debug, Error)]
#[error("no feasible predictor step: bracket collapsed below 1e-14")]
pub struct StallError;

/// Largest acceptable step along a predictor ray: geometric expansion from
/// `alpha_init` (factor 2, capped at `alpha_cap`), then bisection until the
/// bracket is narrower than ls_rel_tol relative to the remaining headroom
/// 1-alpha. The lower end of the bracket is always acceptable, so the
/// returned alpha satisfies the predicate even when psi is not monotone.
pub fn predictor_search(
    step: &PredictorStep,
    a_psi: f64,
    ls_rel_tol: f64,
    alpha_init: f64,
    alpha_cap: f64,
) -> Result<f64, StallError> {
    let cap = alpha_cap.min(ALPHA_CAP);
    let mut probe = alpha_init.clamp(1e-12, 0.5).min(cap);
    while !step.accept(probe, a_psi) {
        probe *= 0.5;
        if probe < 1e-14 {
            return Err(StallError);
        }
    }
    let mut lo = probe;
    let mut hi = loop {
        let next = (2.0 * lo).min(cap);
        if step.accept(next, a_psi) {
            lo = next;
            if next >= cap {
                return Ok(cap);
            }
        } else {
            break next;
        }
    };
    while hi - lo > ls_rel_tol * (1.0 - hi) && hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if step.accept(mid, a_psi) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Result of one corrector pass.
#[derive(Debug, Clone)]
pub struct CorrectorOutcome {
    pub alpha: f64,
    pub point: PrimalDualPoint,
    /// f(0) - f(alpha), the achieved barrier decrease (0 for a no-op).
    pub barrier_drop: f64,
    pub no_op: bool,
}

/// Smallest alpha > 0 with a*alpha^2 + b*alpha + c = 0, given c > 0;
/// +inf when the polynomial stays positive on (0, inf).
fn first_positive_root(a: f64, b: f64, c: f64) -> f64 {
    if a == 0.0 {
        return if b < 0.0 { -c / b } else { f64::INFINITY };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let mut best = f64::INFINITY;
    for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
        if root > 0.0 && root < best {
            best = root;
        }
    }
    best
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let tol = rel_tol * (b - a);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Re-centering step at fixed target: minimizes the barrier restriction
/// f(alpha) = -sum ln q_i(alpha) along the corrector direction, where the
/// q_i are the (exactly quadratic) residuals of the moved point. Returns a
/// no-op when the state is already centered or no decrease is found; the
/// accepted point always has a strictly smaller barrier value.
pub fn corrector_step(
    z: &FullState,
    r: &[f64],
    rho: f64,
    state: &ScalingState,
    rel_tol: f64,
) -> CorrectorOutcome {
    let n = z.u.x.len();
    let no_op = |point: PrimalDualPoint| CorrectorOutcome {
        alpha: 0.0,
        point,
        barrier_drop: 0.0,
        no_op: true,
    };
    let d_c = rhs_corrector(r, rho);
    let d_norm = d_c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if d_norm <= 1e-14 * (1.0 + rho) {
        return no_op(z.u.clone());
    }
    let dir = state.solve_utd(&d_c);

    // q_0 is linear (the direction components are UTD-orthogonal), the rest
    // quadratic: q_i(alpha) = r_i + alpha*d_i + alpha^2*(dx*ds)_i.
    let mut quad = vec![0.0; n + 1];
    let mut lin = vec![0.0; n + 1];
    let cons = r;
    lin[0] = rho - r[0];
    for i in 0..n {
        lin[i + 1] = d_c[i];
        quad[i + 1] = dir.dx[i] * dir.ds[i];
    }

    let mut alpha_hi = f64::INFINITY;
    for i in 0..=n {
        alpha_hi = alpha_hi.min(first_positive_root(quad[i], lin[i], cons[i]));
    }
    let alpha_hi = if alpha_hi.is_finite() {
        alpha_hi * (1.0 - 1e-9)
    } else {
        1e6
    };

    let f = |alpha: f64| -> f64 {
        let mut acc = 0.0;
        for i in 0..=n {
            let q = cons[i] + alpha * (lin[i] + alpha * quad[i]);
            if !(q > 0.0) {
                return f64::INFINITY;
            }
            acc -= q.ln();
        }
        acc
    };
    let f0 = f(0.0);
    let mut best = golden_min(f, 0.0, alpha_hi, rel_tol);
    let mut f_best = f(best);

    // One Newton polish on f': sharpens the golden-section estimate to near
    // machine accuracy when the minimum is interior.
    let mut fp = 0.0;
    let mut fpp = 0.0;
    for i in 0..=n {
        let q = cons[i] + best * (lin[i] + best * quad[i]);
        let qp = lin[i] + 2.0 * best * quad[i];
        fp -= qp / q;
        fpp += (qp / q) * (qp / q) - 2.0 * quad[i] / q;
    }
    if fpp > 0.0 {
        let polished = (best - fp / fpp).clamp(0.0, alpha_hi);
        if f(polished) < f_best {
            f_best = f(polished);
            best = polished;
        }
    }

    if !(f_best < f0) {
        return no_op(z.u.clone());
    }
    let point = PrimalDualPoint {
        x: (0..n).map(|j| z.u.x[j] + best * dir.dx[j]).collect(),
        s: (0..n).map(|j| z.u.s[j] + best * dir.ds[j]).collect(),
        y: (0..z.u.y.len()).map(|i| z.u.y[i] + best * dir.dy[i]).collect(),
    };
    CorrectorOutcome {
        alpha: best,
        point,
        barrier_drop: f0 - f_best,
        no_op: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Predictor,
    Corrector,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepKind::Predictor => "predictor",
            StepKind::Corrector => "corrector",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    EpsReached,
    FiniteTermSuccess,
    MaxIter,
    Stall,
    NumericalFailure,
}

impl Termination {
    pub fn is_success(self) -> bool {
        matches!(self, Termination::EpsReached | Termination::FiniteTermSuccess)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::EpsReached => "eps_reached",
            Termination::FiniteTermSuccess => "finite_term_success",
            Termination::MaxIter => "max_iter",
            Termination::Stall => "stall",
            Termination::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

/// Post-step measurements of one outer iteration (k is 1-based).
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub kind: StepKind,
    pub alpha: f64,
    pub v0_after: f64,
    pub gap_after: f64,
    pub delta_after: f64,
    pub psi_after: f64,
    pub mu_star_after: f64,
    /// Seconds spent in this iteration (factorization through snapshot).
    pub wall_time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub records: Vec<IterationRecord>,
    pub predictor_count: usize,
    pub corrector_count: usize,
    pub termination: Termination,
    pub final_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_basis: Option<BasisCandidate>,
    pub warnings: Vec<String>,
}

/// Final state alongside the report.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub report: SolveReport,
    pub point: PrimalDualPoint,
    pub target: TargetPoint,
}

/// Runs the configured method from a strictly feasible u0. The starting
/// target centers the initial state exactly, so the first iteration always
/// takes the predictor branch.
pub fn run(
    inst: &LpInstance,
    u0: &PrimalDualPoint,
    config: &MethodConfig,
) -> Result<SolveOutcome, ConfigError> {
    config.validate()?;
    let n = inst.n();
    let n1 = n as f64 + 1.0;
    let beta = config.beta();
    let a_psi = config.a_psi();
    let gamma = gamma_monitor(n, config.r, config.method);

    let mut z = FullState {
        u: u0.clone(),
        w: starting_target(u0),
    };
    let v0_init = z.w.v0;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut exact_basis: Option<BasisCandidate> = None;
    let mut strikes = 0u32;
    // Previous predictor's (1-alpha, pre-step gap) for the tail-rate monitor.
    let mut prev_tail: Option<(f64, f64)> = None;

    let mut snap = match proximity(&z) {
        Ok(s) => s,
        Err(e) => {
            warnings.push(format!("initial state rejected: {e}"));
            return Ok(finish(
                records,
                warnings,
                Termination::NumericalFailure,
                exact_basis,
                z,
            ));
        }
    };

    let termination = loop {
        let k = records.len() + 1;
        let sum: f64 = snap.r.iter().sum();
        if (sum - n1 * snap.rho).abs() > 1e-10 * (1.0 + z.w.v0) {
            warnings.push(format!(
                "iter {k}: residual sum {sum:.12e} drifts from (n+1)rho {:.12e}",
                n1 * snap.rho
            ));
        }
        let beta_k = config.beta_k(z.w.v0, v0_init);
        let centered = snap.delta <= beta_k;
        if z.w.v0 <= config.eps && centered {
            break Termination::EpsReached;
        }
        if config.finite_termination && centered && records.len() >= 3 {
            if let Some(candidate) =
                finite::try_finite_termination(inst, &z.u, config.eps, config.activation)
            {
                exact_basis = Some(candidate);
                break Termination::FiniteTermSuccess;
            }
        }
        if records.len() >= config.max_outer {
            break Termination::MaxIter;
        }

        let iter_started = Instant::now();
        let state = match ScalingState::factorize(inst, &z.u, config.diag_ridge) {
            Ok(s) => s,
            Err(e) => {
                warnings.push(format!("iter {k}: normal equations failed: {e}"));
                break Termination::NumericalFailure;
            }
        };

        let mut kind = StepKind::Corrector;
        let mut alpha = 0.0;
        let mut model_psi: Option<f64> = None;
        let mut cap_limited = false;
        let pre_gap = z.u.duality_gap();
        let pre_mu = snap.mu_star;

        if centered {
            let tilde_rhs = match config.method {
                Method::Tptfm => rhs_predictor_tptfm(&z.w),
                Method::Acptfm | Method::Ptfm2 => rhs_predictor_acptfm(&z.w, &z.u),
            };
            let tilde = state.solve_utd(&tilde_rhs);
            let hat = (config.method == Method::Ptfm2)
                .then(|| state.solve_utd(&rhs_predictor2_hat(&z.w, &tilde)));
            let coeffs = predictor_coeffs(&snap.r, &z.w, config.method, &tilde, hat.as_ref());
            if coeffs.psi_along(0.0) <= a_psi {
                let rho0 = coeffs.rho0;
                let step = PredictorStep::new(coeffs, &z.u, &tilde, hat.as_ref());
                // Never shrink the target more than two decades past eps:
                // the stop test fires at eps anyway, and a deep overshoot
                // leaves x/s too graded for the closing corrector.
                let alpha_cap = 1.0 - 0.01 * config.eps / z.w.v0;
                match predictor_search(&step, a_psi, config.ls_rel_tol, gamma, alpha_cap) {
                    Ok(a) => {
                        let mut e_sum_bad = None;
                        for t in [0.3, 0.6, 1.0] {
                            let e_sum = step.coeffs.e_sum_at(t * a);
                            if e_sum.abs() > 1e-10 * n1 * rho0 {
                                e_sum_bad = Some((t * a, e_sum));
                            }
                        }
                        model_psi = Some(step.coeffs.psi_along(a));
                        let new_u = step.point_at(a);
                        if let Some((at, e_sum)) = e_sum_bad {
                            warnings.push(format!(
                                "iter {k}: <e, V({at:.3e})> = {e_sum:.3e} off zero"
                            ));
                        }
                        z.u = new_u;
                        z.w = z.w.shrink(a);
                        alpha = a;
                        cap_limited = a >= alpha_cap - 1e-15;
                        kind = StepKind::Predictor;
                        strikes = 0;
                    }
                    Err(e) => {
                        warnings.push(format!("iter {k}: {e}; corrector fallback"));
                    }
                }
            } else {
                warnings.push(format!(
                    "iter {k}: psi(0) = {:.6e} above A_psi; corrector fallback",
                    snap.psi
                ));
            }
        }

        if kind == StepKind::Corrector {
            let outcome = corrector_step(&z, &snap.r, snap.rho, &state, CORRECTOR_REL_TOL);
            alpha = outcome.alpha;
            if outcome.no_op {
                strikes += 1;
            } else {
                strikes = 0;
                z.u = outcome.point;
            }
        }

        let new_snap = match proximity(&z) {
            Ok(s) => s,
            Err(e) => {
                warnings.push(format!("iter {k}: post-step state rejected: {e}"));
                break Termination::NumericalFailure;
            }
        };
        if let Some(model) = model_psi {
            if (model - new_snap.psi).abs() > 1e-8 * (1.0 + new_snap.psi.abs()) {
                warnings.push(format!(
                    "iter {k}: closed-form psi {model:.12e} vs direct {:.12e}",
                    new_snap.psi
                ));
            }
        }
        if kind == StepKind::Predictor
            && config.method != Method::Tptfm
            && new_snap.mu_star > pre_mu / (1.0 + gamma) * (1.0 + 1e-9)
        {
            warnings.push(format!(
                "iter {k}: mu_star contraction {:.6e} -> {:.6e} misses rate 1/(1+{gamma:.4e})",
                pre_mu, new_snap.mu_star
            ));
        }
        if kind == StepKind::Predictor && config.method == Method::Ptfm2 {
            if let Some((prev_om, prev_gap)) = prev_tail {
                // A step truncated by the eps cap says nothing about the rate.
                if !cap_limited
                    && prev_gap <= 1e-3
                    && pre_gap <= 1e-3
                    && (1.0 - alpha) > prev_om.powf(1.5) * (1.0 + 1e-9)
                {
                    warnings.push(format!(
                        "iter {k}: tail step 1-alpha = {:.3e} above previous^1.5 = {:.3e}",
                        1.0 - alpha,
                        prev_om.powf(1.5)
                    ));
                }
            }
            prev_tail = Some((1.0 - alpha, pre_gap));
        }
        if kind == StepKind::Corrector && new_snap.delta <= beta_k {
            let lo = (1.0 - beta) * new_snap.rho * (1.0 - 1e-9);
            let hi = new_snap.rho / (1.0 - beta) * (1.0 + 1e-9);
            if new_snap.r.iter().any(|ri| *ri < lo || *ri > hi) {
                warnings.push(format!("iter {k}: centered residuals leave the sandwich band"));
            }
            if new_snap.chi1 > beta / (1.0 - beta).sqrt() + 1e-12
                || new_snap.chi0 > beta / (1.0 - beta) + 1e-12
            {
                warnings.push(format!(
                    "iter {k}: chi bounds exceeded (chi0 {:.6e}, chi1 {:.6e})",
                    new_snap.chi0, new_snap.chi1
                ));
            }
        }

        records.push(IterationRecord {
            k,
            kind,
            alpha,
            v0_after: z.w.v0,
            gap_after: z.u.duality_gap(),
            delta_after: new_snap.delta,
            psi_after: new_snap.psi,
            mu_star_after: new_snap.mu_star,
            wall_time: iter_started.elapsed().as_secs_f64(),
        });
        snap = new_snap;
        if strikes >= 3 {
            break Termination::Stall;
        }
    };

    Ok(finish(records, warnings, termination, exact_basis, z))
}

fn finish(
    records: Vec<IterationRecord>,
    warnings: Vec<String>,
    termination: Termination,
    exact_basis: Option<BasisCandidate>,
    z: FullState,
) -> SolveOutcome {
    let predictor_count = records
        .iter()
        .filter(|rec| rec.kind == StepKind::Predictor)
        .count();
    let corrector_count = records.len() - predictor_count;
    let final_gap = z.u.duality_gap();
    SolveOutcome {
        report: SolveReport {
            records,
            predictor_count,
            corrector_count,
            termination,
            final_gap,
            exact_basis,
            warnings,
        },
        point: z.u,
        target: z.w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::fixtures;
    use crate::target::{measures_from_residuals, residuals};
    use proptest::prelude::*;

    fn r1_state() -> (LpInstance, FullState) {
        let (inst, u) = fixtures::r1();
        let w = starting_target(&u);
        (inst, FullState { u, w })
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rhs_builders_match_hand_values_on_r1() {
        let (inst, z) = r1_state();
        let r = residuals(&z).unwrap();
        let rho = z.w.rho();

        assert_eq!(rhs_corrector(&r, rho), vec![0.0, 0.0]);
        assert_eq!(rhs_corrector(&[1.0, 2.0, 0.5], 1.0), vec![-1.0, 0.5]);

        let d_a = rhs_predictor_tptfm(&z.w);
        assert!(close(d_a[0], -2.0 / 3.0, 1e-15));
        assert!(close(d_a[1], -8.0 / 3.0, 1e-15));

        let d_tilde = rhs_predictor_acptfm(&z.w, &z.u);
        assert_eq!(d_a, d_tilde);

        let state = ScalingState::factorize(&inst, &z.u, false).unwrap();
        let tilde = state.solve_utd(&d_tilde);
        let d_hat = rhs_predictor2_hat(&z.w, &tilde);
        assert!(close(d_hat[0], 5.0 / 9.0, 1e-13));
        assert!(close(d_hat[1], -2.0 / 9.0, 1e-13));
    }

    #[test]
    fn rhs_tptfm_degenerate_cases() {
        let flat = TargetPoint {
            v0: 3.0,
            v: vec![0.0, 0.0],
        };
        assert_eq!(rhs_predictor_tptfm(&flat), vec![-1.0, -1.0]);

        let one = TargetPoint {
            v0: 2.0,
            v: vec![1.0],
        };
        assert_eq!(rhs_predictor_tptfm(&one), vec![-2.0]);
    }

    #[test]
    fn predictor_coeffs_match_hand_values_on_r1() {
        let (inst, z) = r1_state();
        let r = residuals(&z).unwrap();
        let state = ScalingState::factorize(&inst, &z.u, false).unwrap();

        let tilde = state.solve_utd(&rhs_predictor_tptfm(&z.w));
        let coeffs = predictor_coeffs(&r, &z.w, Method::Tptfm, &tilde, None);
        assert_eq!(coeffs.base, vec![0.0, 0.0, 0.0]);
        assert!(close(coeffs.g[0], 1.0 / 3.0, 1e-14));
        assert!(close(coeffs.g[1], -5.0 / 9.0, 1e-14));
        assert!(close(coeffs.g[2], 2.0 / 9.0, 1e-14));
        assert!(!coeffs.scale_base);
        assert!(coeffs.e_sum_at(0.7).abs() <= 1e-14);

        let auto = predictor_coeffs(&r, &z.w, Method::Acptfm, &tilde, None);
        assert!(auto.scale_base);
        assert_eq!(auto.g, coeffs.g);

        let d_tilde = rhs_predictor_acptfm(&z.w, &z.u);
        let tilde2 = state.solve_utd(&d_tilde);
        let hat = state.solve_utd(&rhs_predictor2_hat(&z.w, &tilde2));
        let second = predictor_coeffs(&r, &z.w, Method::Ptfm2, &tilde2, Some(&hat));
        assert_eq!(second.g, vec![0.0, 0.0, 0.0]);
        assert_eq!(second.g1[0], 0.0);
        assert!(close(second.g1[1], -4.0 / 27.0, 1e-13));
        assert!(close(second.g1[2], 4.0 / 27.0, 1e-13));
        assert_eq!(second.g2[0], 0.0);
        assert!(close(second.g2[1], 56.0 / 729.0, 1e-13));
        assert!(close(second.g2[2], -56.0 / 729.0, 1e-13));
        for alpha in [0.2, 0.5, 0.9] {
            assert!(second.e_sum_at(alpha).abs() <= 1e-13);
        }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn psi_along_matches_oracle_and_direct_route() {
        let (inst, z) = r1_state();
        let r = residuals(&z).unwrap();
        let state = ScalingState::factorize(&inst, &z.u, false).unwrap();
        let tilde = state.solve_utd(&rhs_predictor_tptfm(&z.w));
        let coeffs = predictor_coeffs(&r, &z.w, Method::Tptfm, &tilde, None);

        assert_eq!(coeffs.psi_along(0.0), 0.0);
        assert!(close(coeffs.rho_at(0.5), 7.0 / 12.0, 1e-15));
        let psi_half = coeffs.psi_along(0.5);
        assert!(close(psi_half, 0.047430544653392441, 1e-13));

        // Direct evaluation at the shifted state agrees with the model.
        let step = PredictorStep::new(coeffs, &z.u, &tilde, None);
        for alpha in [0.2, 0.5, 0.7] {
            let shifted = FullState {
                u: step.point_at(alpha),
                w: z.w.shrink(alpha),
            };
            let direct = proximity(&shifted).unwrap().psi;
            let model = step.coeffs.psi_along(alpha);
            assert!(
                (model - direct).abs() <= 1e-8 * (1.0 + direct.abs()),
                "alpha={alpha}: {model} vs {direct}"
            );
        }
        // Beyond the feasibility bound the model reports +inf.
        assert_eq!(step.coeffs.psi_along(0.76), f64::INFINITY);
    }

    #[test]
    fn predictor_search_hits_the_level_on_r1() {
        let (inst, z) = r1_state();
        let r = residuals(&z).unwrap();
        let state = ScalingState::factorize(&inst, &z.u, false).unwrap();
        let tilde = state.solve_utd(&rhs_predictor_tptfm(&z.w));
        let coeffs = predictor_coeffs(&r, &z.w, Method::Tptfm, &tilde, None);
        let step = PredictorStep::new(coeffs, &z.u, &tilde, None);
        let config = MethodConfig::new(Method::Tptfm);
        let a_psi = config.a_psi();
        let gamma = gamma_monitor(2, config.r, Method::Tptfm);
        assert!(close(gamma, 0.24076188686505281, 1e-12));

        let alpha =
            predictor_search(&step, a_psi, config.ls_rel_tol, gamma, ALPHA_CAP).unwrap();
        // Exact root of psi(alpha) = A_psi is 0.720390180687838; feasibility
        // caps the ray at 0.75.
        assert!(alpha > 0.70 && alpha <= 0.7204, "alpha = {alpha}");
        let psi = step.coeffs.psi_along(alpha);
        assert!(psi <= a_psi && psi >= a_psi - 0.05, "psi = {psi}");
    }

    #[test]
    fn predictor_search_with_zero_coefficients_returns_the_cap() {
        let (_, z) = r1_state();
        let zero_dir = Direction {
            dx: vec![0.0; 2],
            ds: vec![0.0; 2],
            dy: vec![0.0; 1],
        };
        let coeffs = PredictorCoeffs {
            base: vec![0.0; 3],
            g: vec![0.0; 3],
            g1: vec![0.0; 3],
            g2: vec![0.0; 3],
            scale_base: false,
            v0: z.w.v0,
            v_norm_sq: z.w.norm_sq(),
            rho0: z.w.rho(),
        };
        let step = PredictorStep::new(coeffs, &z.u, &zero_dir, None);
        let alpha = predictor_search(&step, 1.0, 1e-3, 0.1, ALPHA_CAP).unwrap();
        assert_eq!(alpha, ALPHA_CAP);
        // A tighter external cap truncates the expansion instead.
        let alpha = predictor_search(&step, 1.0, 1e-3, 0.1, 0.9).unwrap();
        assert_eq!(alpha, 0.9);
    }

    #[test]
    fn predictor_search_returns_acceptable_alpha_on_nonmonotone_psi() {
        // Synthetic coefficients with an infeasible pocket: the deviation
        // grows sharply near alpha ~ 0.5 and relaxes after. The search must
        // return an alpha whose psi is below the level regardless.
        let (_, z) = r1_state();
        let zero_dir = Direction {
            dx: vec![0.0; 2],
            ds: vec![0.0; 2],
            dy: vec![0.0; 1],
        };
        let coeffs = PredictorCoeffs {
            base: vec![0.0, 0.4, -0.4],
            g: vec![0.0, -3.0, 3.0],
            g1: vec![0.0, 3.2, -3.2],
            g2: vec![0.0, -0.9, 0.9],
            scale_base: true,
            v0: z.w.v0,
            v_norm_sq: z.w.norm_sq(),
            rho0: z.w.rho(),
        };
        let step = PredictorStep::new(coeffs, &z.u, &zero_dir, None);
        let a_psi = 1.0887672919124562;
        if let Ok(alpha) = predictor_search(&step, a_psi, 1e-3, 0.1, ALPHA_CAP) {
            assert!(step.coeffs.psi_along(alpha) <= a_psi);
            assert!(alpha > 0.0);
        }
    }

    #[test]
    fn corrector_recenters_the_perturbed_state_exactly() {
        let (inst, mut z) = r1_state();
        z.u.x = vec![1.2, 0.8];
        let r = residuals(&z).unwrap();
        for (got, want) in r.iter().zip([1.2, 1.2, 0.6]) {
            assert!((got - want).abs() <= 2e-15, "residual {got} vs {want}");
        }
        let rho = z.w.rho();
        let state = ScalingState::factorize(&inst, &z.u, false).unwrap();
        let outcome = corrector_step(&z, &r, rho, &state, CORRECTOR_REL_TOL);
        assert!(!outcome.no_op);
        assert!(close(outcome.alpha, 1.0, 1e-6), "alpha = {}", outcome.alpha);
        assert!(outcome.barrier_drop > 0.14);

        let moved = FullState {
            u: outcome.point,
            w: z.w.clone(),
        };
        let r_after = residuals(&moved).unwrap();
        for ri in &r_after {
            assert!(close(*ri, 1.0, 1e-8), "residual {ri}");
        }
        let snap = proximity(&moved).unwrap();
        assert!(snap.psi <= 1e-10);
    }

    #[test]
    fn corrector_is_a_no_op_at_the_center() {
        let (inst, z) = r1_state();
        let r = residuals(&z).unwrap();
        let state = ScalingState::factorize(&inst, &z.u, false).unwrap();
        let outcome = corrector_step(&z, &r, z.w.rho(), &state, CORRECTOR_REL_TOL);
        assert!(outcome.no_op);
        assert_eq!(outcome.alpha, 0.0);
        assert_eq!(outcome.point, z.u);
    }

    #[test]
    fn corrector_rarely_increases_delta_from_moderate_states() {
        // Sweep perturbed states with delta in (beta, ~0.47]; the corrector
        // should not increase delta. The guarantee is only empirical, so a
        // handful of violations is tolerated.
        let (inst, _) = fixtures::r1();
        let w = TargetPoint {
            v0: 4.0,
            v: vec![0.0, 1.0],
        };
        let beta = MethodConfig::new(Method::Tptfm).beta();
        let mut tested = 0;
        let mut violations = 0;
        for step in 0..100 {
            let t = 0.13 + 0.0007 * step as f64;
            let u = PrimalDualPoint {
                x: vec![1.0 + t, 1.0 - t],
                s: vec![1.0, 2.0],
                y: vec![0.0],
            };
            let z = FullState { u, w: w.clone() };
            let snap = proximity(&z).unwrap();
            if snap.delta <= beta || snap.delta > 0.55 {
                continue;
            }
            tested += 1;
            let state = ScalingState::factorize(&inst, &z.u, false).unwrap();
            let outcome = corrector_step(&z, &snap.r, snap.rho, &state, CORRECTOR_REL_TOL);
            assert!(!outcome.no_op);
            let moved = FullState {
                u: outcome.point,
                w: w.clone(),
            };
            let after = proximity(&moved).unwrap();
            if after.delta > snap.delta + 1e-9 {
                violations += 1;
            }
        }
        assert!(tested >= 50, "only {tested} states qualified");
        assert!(violations <= 5, "{violations} of {tested} increased delta");
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn gamma_monitor_matches_frozen_formula_values() {
        let r = 6.0 / 7.0;
        let cases = [
            (64, Method::Tptfm, 0.075615812069875366),
            (64, Method::Ptfm2, 0.059844128134702399),
            (1024, Method::Acptfm, 0.020384583918398335),
            (1024, Method::Ptfm2, 0.015988995671709838),
        ];
        for (n, method, want) in cases {
            let got = gamma_monitor(n, r, method);
            assert!(
                (got - want).abs() <= 1e-12 * want,
                "gamma({n}, {method}) = {got}, want {want}"
            );
        }
        // Asymptotics: gamma1 ~ 2/(3 sqrt(n)), gamma2 ~ 0.52/sqrt(n).
        let g1 = gamma_monitor(99, r, Method::Acptfm);
        let target1 = 2.0 / (3.0 * 99.0f64.sqrt());
        assert!((g1 - target1).abs() <= 0.2 * target1);
        let g2 = gamma_monitor(1024, r, Method::Ptfm2);
        assert!((g2 * 32.0 - 0.52).abs() <= 0.02);
    }

    #[test]
    fn beta_policies_and_validation() {
        let mut config = MethodConfig::new(Method::Tptfm);
        let beta = config.beta();
        assert!(close(beta, 0.3, 1e-15));
        assert!(close(config.a_psi(), 1.0887672919124562, 1e-14));
        assert_eq!(config.beta_k(4.0, 4.0), 0.99 * beta);

        config.beta_policy = BetaPolicy::Proportional { scale: 0.5 };
        config.validate().unwrap();
        assert_eq!(config.beta_k(4.0, 4.0), 0.5f64.min(0.99 * beta));
        assert!(close(config.beta_k(0.04, 4.0), 0.005, 1e-15));

        let auto = MethodConfig::new(Method::Acptfm);
        assert_eq!(auto.beta_k(1.0, 4.0), beta);

        let mut bad = MethodConfig::new(Method::Acptfm);
        bad.beta_policy = BetaPolicy::Proportional { scale: 0.5 };
        assert!(matches!(
            bad.validate(),
            Err(ConfigError::ProportionalUnsupported(Method::Acptfm))
        ));

        let mut bad = MethodConfig::new(Method::Ptfm2);
        bad.r = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = MethodConfig::new(Method::Ptfm2);
        bad.eps = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = MethodConfig::new(Method::Ptfm2);
        bad.ls_rel_tol = 0.0;
        assert!(bad.validate().is_err());

        assert_eq!("ptfm2".parse::<Method>().unwrap(), Method::Ptfm2);
        assert!("newton".parse::<Method>().is_err());
    }

    #[test]
    fn run_solves_r1_with_every_method() {
        let (inst, u0) = fixtures::r1();
        for method in Method::ALL {
            let config = MethodConfig::new(method);
            let outcome = run(&inst, &u0, &config).unwrap();
            let report = &outcome.report;
            assert_eq!(report.termination, Termination::EpsReached, "{method}");
            assert!(report.final_gap <= config.eps, "{method}");
            assert_eq!(
                report.predictor_count + report.corrector_count,
                report.records.len()
            );

            // v0 strictly decreases across predictor records and obeys the
            // product identity v0_k = prod(1 - alpha_j) * v0_0.
            let mut v0_prev = 4.0;
            let mut product = 4.0;
            for rec in &report.records {
                if rec.kind == StepKind::Predictor {
                    assert!(rec.v0_after < v0_prev);
                    product *= 1.0 - rec.alpha;
                    assert!(close(rec.v0_after, product, 1e-9 * (1.0 + product)));
                    v0_prev = rec.v0_after;
                } else {
                    assert_eq!(rec.v0_after, v0_prev);
                }
                assert!(rec.psi_after.is_finite());
            }
        }
    }

    #[test]
    fn run_with_finite_termination_reports_the_exact_basis() {
        let (inst, u0) = fixtures::r1();
        let mut config = MethodConfig::new(Method::Ptfm2);
        config.finite_termination = true;
        config.activation = ActivationPolicy::AwakeTests;
        let outcome = run(&inst, &u0, &config).unwrap();
        assert_eq!(outcome.report.termination, Termination::FiniteTermSuccess);
        let basis = outcome.report.exact_basis.unwrap();
        assert_eq!(basis.basis, vec![1]);
        // The candidate is read off the evolved iterate's scaling, so the
        // solved values carry ordinary roundoff.
        for (got, want) in basis.x_star.iter().zip([2.0, 0.0]) {
            assert!((got - want).abs() <= 1e-9, "x* {got} vs {want}");
        }
        for (got, want) in basis.y_star.iter().zip([1.0]) {
            assert!((got - want).abs() <= 1e-9, "y* {got} vs {want}");
        }
        for (got, want) in basis.s_star.iter().zip([0.0, 1.0]) {
            assert!((got - want).abs() <= 1e-9, "s* {got} vs {want}");
        }
    }

    #[test]
    fn run_respects_max_outer() {
        let (inst, u0) = fixtures::r1();
        let mut config = MethodConfig::new(Method::Tptfm);
        config.max_outer = 2;
        config.eps = 1e-300;
        let outcome = run(&inst, &u0, &config).unwrap();
        assert_eq!(outcome.report.termination, Termination::MaxIter);
        assert_eq!(outcome.report.records.len(), 2);
    }

    #[test]
    fn report_serializes_with_snake_case_termination() {
        let json = serde_json::to_string(&Termination::EpsReached).unwrap();
        assert_eq!(json, "\"eps_reached\"");
        let json = serde_json::to_string(&StepKind::Predictor).unwrap();
        assert_eq!(json, "\"predictor\"");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// The auto-correcting right-hand side is the sum of the tangential
        /// and corrector right-hand sides at any state.
        #[test]
        fn acptfm_rhs_is_sum_of_parts(
            x1 in 0.25f64..1.75,
            scale in 1.0f64..4.0,
            shrink in 0.1f64..1.0,
        ) {
            let (_, u0) = fixtures::r1();
            let u = PrimalDualPoint {
                x: vec![x1, 2.0 - x1],
                s: u0.s.clone(),
                y: u0.y.clone(),
            };
            let mut w = starting_target(&u);
            w.v0 *= scale;
            for vi in &mut w.v {
                *vi *= shrink;
            }
            let z = FullState { u: u.clone(), w: w.clone() };
            let r = residuals(&z).unwrap();
            let rho = w.rho();
            let d_a = rhs_predictor_tptfm(&w);
            let d_c = rhs_corrector(&r, rho);
            let d_tilde = rhs_predictor_acptfm(&w, &u);
            for i in 0..2 {
                let sum = d_a[i] + d_c[i];
                prop_assert!((d_tilde[i] - sum).abs() <= 1e-12 * (1.0 + sum.abs()));
            }
            // <e, d_c> = r0 - rho by the sum identity.
            let e_dc: f64 = d_c.iter().sum();
            let want = r[0] - rho;
            prop_assert!((e_dc - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }

        /// chi measures of the residual vector after a corrector never leave
        /// the centered band when delta was small before the step.
        #[test]
        fn corrector_keeps_small_delta_states_centered(t in 0.01f64..0.08) {
            let (inst, _) = fixtures::r1();
            let u = PrimalDualPoint {
                x: vec![1.0 + t, 1.0 - t],
                s: vec![1.0, 2.0],
                y: vec![0.0],
            };
            let w = TargetPoint { v0: 4.0, v: vec![0.0, 1.0] };
            let z = FullState { u, w };
            let snap = proximity(&z).unwrap();
            prop_assume!(snap.delta <= 0.3);
            let state = ScalingState::factorize(&inst, &z.u, false).unwrap();
            let outcome = corrector_step(&z, &snap.r, snap.rho, &state, CORRECTOR_REL_TOL);
            if !outcome.no_op {
                let moved = FullState { u: outcome.point, w: z.w.clone() };
                let after = proximity(&moved).unwrap();
                let (chi0, chi1, _, _, _) =
                    measures_from_residuals(&after.r, after.rho).unwrap();
                prop_assert!(chi1 <= 0.3 / (0.7f64).sqrt() + 1e-9);
                prop_assert!(chi0 <= 0.3 / 0.7 + 1e-9);
            }
        }
    }
}
