//! Problem data, primal-dual points, feasibility checks, and problem files.

use crate::linalg::dot;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use thiserror::Error;

/// Relative tolerance for the linear feasibility residuals.
pub const FEAS_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid dimensions m={m}, n={n}: need 1 <= m <= n")]
    BadDims { m: usize, n: usize },
    #[error("{name} has length {got}, expected {want}")]
    BadLength {
        name: &'static str,
        got: usize,
        want: usize,
    },
    #[error("{name}[{index}] is not finite")]
    NotFinite { name: &'static str, index: usize },
}

#[derive(Debug, Error)]
pub enum FeasibilityError {
    #[error("x[{index}] = {value:.3e} is not strictly positive")]
    PrimalNotInterior { index: usize, value: f64 },
    #[error("s[{index}] = {value:.3e} is not strictly positive")]
    DualNotInterior { index: usize, value: f64 },
    #[error("primal residual |Ax - b|_inf = {value:.3e} exceeds {tol:.3e}")]
    PrimalResidual { value: f64, tol: f64 },
    #[error("dual residual |s + A^T y - c|_inf = {value:.3e} exceeds {tol:.3e}")]
    DualResidual { value: f64, tol: f64 },
}

/// File-level failures, split so callers can distinguish an unreadable path
/// from readable-but-malformed content.
#[derive(Debug, Error)]
pub enum FileError {
    #[error("cannot read {path}: {source}")]
    Unreadable { path: String, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Unwritable { path: String, source: io::Error },
    #[error("malformed problem file {path}: {detail}")]
    Malformed { path: String, detail: String },
}

/// A dense linear program in standard form.
#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    m: usize,
    n: usize,
    // Row-major m x n constraint matrix.
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl LpInstance {
    pub fn new(
        m: usize,
        n: usize,
        a: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
    ) -> Result<Self, DataError> {
        if m == 0 || n == 0 || m > n {
            return Err(DataError::BadDims { m, n });
        }
        check_len("A", &a, m * n)?;
        check_len("b", &b, m)?;
        check_len("c", &c, n)?;
        check_finite("A", &a)?;
        check_finite("b", &b)?;
        check_finite("c", &c)?;
        Ok(Self { m, n, a, b, c })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// A x.
    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m).map(|i| dot(self.row(i), x)).collect()
    }

    /// A^T y.
    pub fn mat_t_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.m {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            let row = self.row(i);
            for j in 0..self.n {
                out[j] += row[j] * yi;
            }
        }
        out
    }

    pub fn primal_objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    pub fn dual_objective(&self, y: &[f64]) -> f64 {
        dot(&self.b, y)
    }
}

fn check_len(name: &'static str, v: &[f64], want: usize) -> Result<(), DataError> {
    if v.len() != want {
        return Err(DataError::BadLength {
            name,
            got: v.len(),
            want,
        });
    }
    Ok(())
}

fn check_finite(name: &'static str, v: &[f64]) -> Result<(), DataError> {
    for (index, value) in v.iter().enumerate() {
        if !value.is_finite() {
            return Err(DataError::NotFinite { name, index });
        }
    }
    Ok(())
}

/// A primal-dual iterate (x, s, y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualPoint {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
}

impl PrimalDualPoint {
    /// <s, x>, which equals <c,x> - <b,y> on the feasible affine set.
    pub fn duality_gap(&self) -> f64 {
        dot(&self.s, &self.x)
    }
}

impl fmt::Display for PrimalDualPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "point(n={}, m={})", self.x.len(), self.y.len())
    }
}

/// Verifies that `u` lies strictly inside the primal-dual feasible set:
/// x > 0, s > 0, |Ax - b|_inf <= tol*(1 + |b|_inf), and
/// |s + A^T y - c|_inf <= tol*(1 + |c|_inf), with tol = `FEAS_REL_TOL`.
pub fn check_feasibility(inst: &LpInstance, u: &PrimalDualPoint) -> Result<(), FeasibilityError> {
    for (index, &value) in u.x.iter().enumerate() {
        if !(value > 0.0) {
            return Err(FeasibilityError::PrimalNotInterior { index, value });
        }
    }
    for (index, &value) in u.s.iter().enumerate() {
        if !(value > 0.0) {
            return Err(FeasibilityError::DualNotInterior { index, value });
        }
    }
    let ax = inst.mat_vec(&u.x);
    let mut pres: f64 = 0.0;
    let mut bnorm: f64 = 0.0;
    for i in 0..inst.m {
        pres = pres.max((ax[i] - inst.b[i]).abs());
        bnorm = bnorm.max(inst.b[i].abs());
    }
    let ptol = FEAS_REL_TOL * (1.0 + bnorm);
    if pres > ptol {
        return Err(FeasibilityError::PrimalResidual {
            value: pres,
            tol: ptol,
        });
    }
    let aty = inst.mat_t_vec(&u.y);
    let mut dres: f64 = 0.0;
    let mut cnorm: f64 = 0.0;
    for j in 0..inst.n {
        dres = dres.max((u.s[j] + aty[j] - inst.c[j]).abs());
        cnorm = cnorm.max(inst.c[j].abs());
    }
    let dtol = FEAS_REL_TOL * (1.0 + cnorm);
    if dres > dtol {
        return Err(FeasibilityError::DualResidual {
            value: dres,
            tol: dtol,
        });
    }
    Ok(())
}

/// On-disk problem format: dimensions, flat row-major `A`, `b`, `c`, and an
/// optional strictly feasible starting point.
#[derive(Serialize, Deserialize)]
struct ProblemFile {
    m: usize,
    n: usize,
    #[serde(rename = "A")]
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y0: Option<Vec<f64>>,
}

/// Loads a problem file; the starting point is returned when all of
/// x0, s0, y0 are present.
pub fn load_problem(
    path: impl AsRef<Path>,
) -> Result<(LpInstance, Option<PrimalDualPoint>), FileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FileError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    let malformed = |detail: String| FileError::Malformed {
        path: path.display().to_string(),
        detail,
    };
    let file: ProblemFile = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    let inst = LpInstance::new(file.m, file.n, file.a, file.b, file.c)
        .map_err(|e| malformed(e.to_string()))?;
    let start = match (file.x0, file.s0, file.y0) {
        (Some(x), Some(s), Some(y)) => {
            if x.len() != inst.n || s.len() != inst.n || y.len() != inst.m {
                return Err(malformed("starting point has wrong dimensions".into()));
            }
            for (name, v) in [("x0", &x), ("s0", &s), ("y0", &y)] {
                if v.iter().any(|t| !t.is_finite()) {
                    return Err(malformed(format!("{name} contains non-finite entries")));
                }
            }
            Some(PrimalDualPoint { x, s, y })
        }
        (None, None, None) => None,
        _ => {
            return Err(malformed(
                "starting point must supply all of x0, s0, y0 or none".into(),
            ))
        }
    };
    Ok((inst, start))
}

/// Writes a problem file. Numbers are emitted as shortest decimal strings
/// that round-trip doubles exactly, so `load_problem` recovers every bit.
pub fn save_problem(
    path: impl AsRef<Path>,
    inst: &LpInstance,
    start: Option<&PrimalDualPoint>,
) -> Result<(), FileError> {
    let path = path.as_ref();
    let file = ProblemFile {
        m: inst.m,
        n: inst.n,
        a: inst.a.clone(),
        b: inst.b.clone(),
        c: inst.c.clone(),
        x0: start.map(|u| u.x.clone()),
        s0: start.map(|u| u.s.clone()),
        y0: start.map(|u| u.y.clone()),
    };
    let text = serde_json::to_string(&file).expect("problem serialization cannot fail");
    fs::write(path, text).map_err(|source| FileError::Unwritable {
        path: path.display().to_string(),
        source,
    })
}
