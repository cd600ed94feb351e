//! Numerical laboratory for the Gaussian logarithmic Sobolev inequality.
//!
//! Everything is integrated against the standard Gaussian measure `dγ` on
//! `R^d`, `1 <= d <= 3`, using tensor Gauss–Hermite rules (or ball-adapted
//! Gauss–Legendre rules for compactly supported functions). Densities are
//! always expressed relative to `γ`.
//!
//! The crate is organised bottom-up:
//!
//! * [`measure`]: quadrature rules and integration.
//! * [`functions`]: parametric test functions with analytic derivatives.
//! * [`functionals`]: entropy, Fisher information, deficit and the
//!   Ornstein–Uhlenbeck operator identities.
//! * [`ou_flow`]: exact Ornstein–Uhlenbeck evolution via the Mehler formula.
//! * [`stability`]: explicit constants and inequality verifiers.
//! * [`logconcavity`]: probe-based log-concavity certificates.
//! * [`search`]: derivative-free constrained searches over families.
//! * [`suite`]: the built-in corpus and the verification suite.
//!
//! Inner loops over quadrature nodes run on rayon when the `parallel`
//! feature is enabled (the default). Reductions are chunked in a fixed
//! order, so results are bit-identical with and without the feature.

// Index loops mirror the tensor notation; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod functionals;
pub mod functions;
pub mod linalg;
pub mod logconcavity;
pub mod measure;
pub mod ou_flow;
pub mod par;
pub mod search;
pub mod stability;
pub mod suite;

pub use error::{Error, Result};
pub use functions::{Field, FunctionSpec, Jet, TestFunction};
pub use measure::{GaussianMeasureSpec, Point, QuadratureGrid, MAX_DIM};
