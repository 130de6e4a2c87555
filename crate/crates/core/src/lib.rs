//! Dense primal-dual solver for linear programs in standard form,
//!
//! ```text
//!     min <c,x>  s.t.  A x = b, x >= 0        (primal)
//!     max <b,y>  s.t.  s + A^T y = c, s >= 0  (dual)
//! ```
//!
//! built around *parabolic target following*: iterates chase a shrinking
//! target w = (v0, v) with v0 > ||v||^2, where v0 majorizes the duality gap
//! and v^2 tracks the complementarity products. Three methods are provided,
//! differing only in the predictor right-hand side:
//!
//! * `tptfm`  - affine predictor plus separate centering correctors,
//! * `acptfm` - predictor with the corrector folded into one right-hand side,
//! * `ptfm2`  - the auto-correcting predictor plus a second-order term.
//!
//! All three share the iteration skeleton: one Cholesky factorization of
//! A diag(x/s) A^T per outer iteration, a closed-form proximity function
//! along the predictor ray, a greedy target update w <- (1 - alpha) w, and
//! an optional finite-termination test that guesses the optimal basis from
//! indicator orderings and verifies the guess exactly.

// Guards are written `!(x > 0.0)` on purpose: the negation also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Kernels index several arrays by one triangular loop variable; zips obscure that.
#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod finite;
pub mod linalg;
pub mod lp;
pub mod methods;
pub mod newton;
pub mod rng;
pub mod target;
