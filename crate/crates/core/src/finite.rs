//! Exact-basis detection. Ranks variables by an indicator vector, extracts a
//! trial basis, solves the basis system for a candidate optimal pair, and
//! accepts only candidates that verify feasibility, sign, and gap conditions.
//! Cheap activation inequalities keep the test dormant until an iterate looks
//! close enough to make the attempt worthwhile.

use crate::linalg::{Cholesky, Lu};
use crate::lp::{LpInstance, PrimalDualPoint};
use serde::Serialize;

/// Which ranking drives the trial basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    PrimalX,
    DualInvS,
    RatioXs,
}

/// Attempt order: the ratio test first (it reuses the iterate's scaling and
/// activates earliest in practice), then the primal and dual rankings.
pub const TEST_ORDER: [Indicator; 3] = [Indicator::RatioXs, Indicator::PrimalX, Indicator::DualInvS];

/// Outcome of the cheap activation inequalities.
#[derive(Debug, Clone, Copy)]
pub struct Activation {
    /// On-basis x mass dominates off-basis by m^2.
    pub awake_x: bool,
    /// Off-basis s mass dominates on-basis by (n-m)^2.
    pub awake_s: bool,
    /// On-basis x/s mass dominates off-basis by m^3.
    pub awake_xs: bool,
    /// (1/m^3) * (on-basis ratio sum)/(off-basis ratio sum); +inf when the
    /// off-basis sum is zero. awake_xs is equivalent to beta_xs >= 1.
    pub beta_xs: f64,
}

/// Residuals of an accepted candidate, kept for the report.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationResiduals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub min_component: f64,
}

/// A trial basis with its candidate optimal pair. `basis` holds 1-based
/// column indices in ascending order (the reporting convention); builder
/// functions take 0-based indices.
#[derive(Debug, Clone, Serialize)]
pub struct BasisCandidate {
    pub indicator: Indicator,
    pub basis: Vec<usize>,
    pub x_star: Vec<f64>,
    pub s_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<VerificationResiduals>,
}

/// The ranking vector: x, 1/s, or x/s componentwise.
pub fn indicator_vector(u: &PrimalDualPoint, kind: Indicator) -> Vec<f64> {
    match kind {
        Indicator::PrimalX => u.x.clone(),
        Indicator::DualInvS => u.s.iter().map(|s| 1.0 / s).collect(),
        Indicator::RatioXs => u.x.iter().zip(&u.s).map(|(x, s)| x / s).collect(),
    }
}

/// Indices (0-based, ascending) of the m largest components; ties go to the
/// smaller index.
pub fn trial_basis(a: &[f64], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[j].total_cmp(&a[i]).then(i.cmp(&j)));
    let mut basis = order[..m].to_vec();
    basis.sort_unstable();
    basis
}

fn rejected(indicator: Indicator, basis: &[usize], n: usize, m: usize, reason: String) -> BasisCandidate {
    BasisCandidate {
        indicator,
        basis: basis.iter().map(|j| j + 1).collect(),
        x_star: vec![0.0; n],
        s_star: vec![0.0; n],
        y_star: vec![0.0; m],
        accepted: false,
        reason: Some(reason),
        residuals: None,
    }
}

/// Assembles x*, s*, y* from solved basis components and runs the acceptance
/// checks shared by both routes: signs >= -eps/100, primal and dual residuals
/// <= 1e-8 relative, cost gap <= 1e-8 relative.
fn verify(
    inst: &LpInstance,
    indicator: Indicator,
    basis: &[usize],
    x_basis: &[f64],
    y_star: Vec<f64>,
) -> BasisCandidate {
    let (m, n) = (inst.m(), inst.n());
    let mut on_basis = vec![false; n];
    for &j in basis {
        on_basis[j] = true;
    }
    let mut x_star = vec![0.0; n];
    for (slot, &j) in basis.iter().enumerate() {
        x_star[j] = x_basis[slot];
    }
    let at_y = inst.mat_t_vec(&y_star);
    let mut s_star = vec![0.0; n];
    let mut min_component = f64::INFINITY;
    for j in 0..n {
        if on_basis[j] {
            min_component = min_component.min(x_star[j]);
        } else {
            s_star[j] = inst.c()[j] - at_y[j];
            min_component = min_component.min(s_star[j]);
        }
    }
    let mut candidate = BasisCandidate {
        indicator,
        basis: basis.iter().map(|j| j + 1).collect(),
        x_star,
        s_star,
        y_star,
        accepted: false,
        reason: None,
        residuals: None,
    };

    let ax = inst.mat_vec(&candidate.x_star);
    let mut primal = 0.0f64;
    let mut b_norm = 0.0f64;
    for i in 0..m {
        primal = primal.max((ax[i] - inst.b()[i]).abs());
        b_norm = b_norm.max(inst.b()[i].abs());
    }
    // Off-basis dual rows are exact by construction; the basis rows carry the
    // whole transpose-solve error.
    let mut dual = 0.0f64;
    let mut c_norm = 0.0f64;
    for j in 0..n {
        dual = dual.max((candidate.s_star[j] + at_y[j] - inst.c()[j]).abs());
        c_norm = c_norm.max(inst.c()[j].abs());
    }
    let cost = inst.primal_objective(&candidate.x_star);
    let gap = (cost - inst.dual_objective(&candidate.y_star)).abs();
    candidate.residuals = Some(VerificationResiduals {
        primal,
        dual,
        gap,
        min_component,
    });
    candidate.accepted = true;
    candidate.reason = None;
    if primal > 1e-8 * (1.0 + b_norm) {
        candidate.accepted = false;
        candidate.reason = Some(format!("primal residual {primal:.3e} too large"));
    } else if dual > 1e-8 * (1.0 + c_norm) {
        candidate.accepted = false;
        candidate.reason = Some(format!("dual residual {dual:.3e} too large"));
    } else if gap > 1e-8 * (1.0 + cost.abs()) {
        candidate.accepted = false;
        candidate.reason = Some(format!("cost gap {gap:.3e} too large"));
    }
    candidate
}

fn sign_floor(eps: f64) -> f64 {
    -eps / 100.0
}

fn check_signs(candidate: &mut BasisCandidate, eps: f64) {
    if !candidate.accepted {
        return;
    }
    let floor = sign_floor(eps);
    if let Some(res) = &candidate.residuals {
        if res.min_component < floor {
            candidate.accepted = false;
            candidate.reason = Some(format!(
                "component {:.3e} below sign floor {floor:.3e}",
                res.min_component
            ));
        }
    }
}

/// Direct route: LU of the m x m basis matrix A_B with partial pivoting,
/// pivot floor 1e-12 * |A_B|_inf. x*_B = A_B^-1 b, y* = A_B^-T c_B,
/// s*_N = c_N - A_N^T y*.
pub fn candidate_point(inst: &LpInstance, basis: &[usize], eps: f64) -> BasisCandidate {
    let (m, n) = (inst.m(), inst.n());
    debug_assert_eq!(basis.len(), m);
    let mut ab = vec![0.0; m * m];
    for i in 0..m {
        let row = inst.row(i);
        for (slot, &j) in basis.iter().enumerate() {
            ab[i * m + slot] = row[j];
        }
    }
    let norm_inf = (0..m)
        .map(|i| ab[i * m..(i + 1) * m].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let lu = match Lu::factor(m, &ab, 1e-12 * norm_inf) {
        Ok(lu) => lu,
        Err(e) => {
            return rejected(
                Indicator::PrimalX,
                basis,
                n,
                m,
                format!("basis matrix is singular: {e}"),
            )
        }
    };
    let x_basis = lu.solve(inst.b());
    let c_basis: Vec<f64> = basis.iter().map(|&j| inst.c()[j]).collect();
    let y_star = lu.solve_transpose(&c_basis);
    let mut candidate = verify(inst, Indicator::PrimalX, basis, &x_basis, y_star);
    check_signs(&mut candidate, eps);
    candidate
}

/// Scaling-reusing route for the ratio indicator: factors the small matrix
/// Sigma_B = A_B X_B S_B^-1 A_B^T and reads the candidate from it:
/// x*_B = X_B S_B^-1 A_B^T Sigma_B^-1 b, y* = Sigma_B^-1 A_B X_B S_B^-1 c_B.
/// Falls back to the direct route when the factorization fails.
pub fn candidate_point_via_sigma(
    inst: &LpInstance,
    u: &PrimalDualPoint,
    basis: &[usize],
    eps: f64,
) -> BasisCandidate {
    let m = inst.m();
    debug_assert_eq!(basis.len(), m);
    let weights: Vec<f64> = basis.iter().map(|&j| u.x[j] / u.s[j]).collect();
    let mut sigma = vec![0.0; m * m];
    let mut scaled = vec![0.0; m];
    for i in 0..m {
        let row_i = inst.row(i);
        for (slot, &j) in basis.iter().enumerate() {
            scaled[slot] = row_i[j] * weights[slot];
        }
        for k in i..m {
            let row_k = inst.row(k);
            let mut acc = 0.0;
            for (slot, &j) in basis.iter().enumerate() {
                acc += scaled[slot] * row_k[j];
            }
            sigma[i * m + k] = acc;
            sigma[k * m + i] = acc;
        }
    }
    let chol = match Cholesky::factor(m, &sigma) {
        Ok(c) => c,
        Err(_) => {
            let mut fallback = candidate_point(inst, basis, eps);
            fallback.indicator = Indicator::RatioXs;
            let note = "scaled basis matrix not positive definite; used direct route";
            fallback.reason = Some(match fallback.reason.take() {
                Some(prior) => format!("{note}; {prior}"),
                None => note.to_string(),
            });
            return fallback;
        }
    };
    let t = chol.solve(inst.b());
    let mut x_basis = vec![0.0; m];
    for (slot, &j) in basis.iter().enumerate() {
        let mut acc = 0.0;
        for i in 0..m {
            acc += inst.entry(i, j) * t[i];
        }
        x_basis[slot] = weights[slot] * acc;
    }
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        let row = inst.row(i);
        let mut acc = 0.0;
        for (slot, &j) in basis.iter().enumerate() {
            acc += row[j] * weights[slot] * inst.c()[j];
        }
        rhs[i] = acc;
    }
    let y_star = chol.solve(&rhs);
    let mut candidate = verify(inst, Indicator::RatioXs, basis, &x_basis, y_star);
    check_signs(&mut candidate, eps);
    candidate
}

/// The three dominance inequalities plus the beta ratio for x/s.
pub fn activation_tests(u: &PrimalDualPoint, m: usize) -> Activation {
    let n = u.x.len();
    let split_sums = |values: &[f64], basis: &[usize]| -> (f64, f64) {
        let mut on_basis = vec![false; n];
        for &j in basis {
            on_basis[j] = true;
        }
        let mut on = 0.0;
        let mut off = 0.0;
        for j in 0..n {
            if on_basis[j] {
                on += values[j];
            } else {
                off += values[j];
            }
        }
        (on, off)
    };

    let x_ind = indicator_vector(u, Indicator::PrimalX);
    let (x_on, x_off) = split_sums(&x_ind, &trial_basis(&x_ind, m));
    let awake_x = x_on >= (m * m) as f64 * x_off;

    let s_ind = indicator_vector(u, Indicator::DualInvS);
    let (s_on, s_off) = split_sums(&u.s, &trial_basis(&s_ind, m));
    let awake_s = s_off >= ((n - m) * (n - m)) as f64 * s_on;

    let ratio = indicator_vector(u, Indicator::RatioXs);
    let (r_on, r_off) = split_sums(&ratio, &trial_basis(&ratio, m));
    let m3 = (m * m * m) as f64;
    let awake_xs = r_on >= m3 * r_off;
    let beta_xs = if r_off == 0.0 {
        f64::INFINITY
    } else {
        r_on / (m3 * r_off)
    };

    Activation {
        awake_x,
        awake_s,
        awake_xs,
        beta_xs,
    }
}

/// Gate policy for `try_finite_termination`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationPolicy {
    /// Attempt every indicator unconditionally.
    Always,
    /// Attempt an indicator only when its activation inequality holds.
    AwakeTests,
}

/// Runs the indicator tests in `TEST_ORDER` and returns the first accepted
/// candidate. The ratio test goes through the scaling-reusing route; the
/// other two use the direct LU route.
pub fn try_finite_termination(
    inst: &LpInstance,
    u: &PrimalDualPoint,
    eps: f64,
    policy: ActivationPolicy,
) -> Option<BasisCandidate> {
    let m = inst.m();
    let activation = match policy {
        ActivationPolicy::Always => None,
        ActivationPolicy::AwakeTests => Some(activation_tests(u, m)),
    };
    for kind in TEST_ORDER {
        if let Some(act) = &activation {
            let awake = match kind {
                Indicator::RatioXs => act.awake_xs,
                Indicator::PrimalX => act.awake_x,
                Indicator::DualInvS => act.awake_s,
            };
            if !awake {
                continue;
            }
        }
        let basis = trial_basis(&indicator_vector(u, kind), m);
        let mut candidate = match kind {
            Indicator::RatioXs => candidate_point_via_sigma(inst, u, &basis, eps),
            _ => candidate_point(inst, &basis, eps),
        };
        candidate.indicator = kind;
        if candidate.accepted {
            return Some(candidate);
        }
    }
    None
}
