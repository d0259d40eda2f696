//! Generalized principal eigenvalues of linear parabolic Dirichlet operators
//! `P = ∂t − a(t,x)∂xx − b(t,x)∂x − c(t,x)` on a bounded interval.
//!
//! The eigenvalues are computed through the principal Floquet bundle: the
//! log-norm `β(t) = ln‖u_P(t,·)‖∞` of the unique positive entire solution
//! encodes all six notions through window-extremal growth rates and Cesàro
//! rates at `±∞`.
//!
//! Pipeline: [`coeffield`] → [`discretize`] → [`stepper`] → [`floquet`] →
//! [`growthrate`], with independent oracles in [`eigensolve`] and the
//! semilinear applications in [`kpp`]. The [`cli`] module runs scenarios and
//! the verification suite.

pub mod cli;
pub mod coeffield;
pub mod discretize;
pub mod eigensolve;
pub mod error;
pub mod floquet;
pub mod growthrate;
pub mod kpp;
pub mod stats;
pub mod stepper;

pub use error::{GpeError, Result};
