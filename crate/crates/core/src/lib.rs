//! Petrov-Galerkin spectral element solver for the one-dimensional
//! fractional Helmholtz problem
//!
//! ```text
//! ₀D_x^{1+μ} u(x) − λ u(x) = f(x),  x ∈ [0, L],  u(0) = u(L) = 0,  μ ∈ (0, 1),
//! ```
//!
//! with C⁰ hierarchic modal bases and fractional (poly-fractonomial) test
//! functions. The non-local history of each element is carried by explicit
//! history blocks that are computed once and can be cached on disk.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod element_ops;
pub mod error;
pub mod forcing;
pub mod fractional_core;
pub mod grids;
pub mod history;
pub mod problems;
pub mod solve_postproc;
pub mod special_functions;

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
mod test_oracle;

pub use error::{Error, Result};
pub use forcing::{Force, ForcePart, ScalarFn};
pub use grids::{Grid, GridKind};
