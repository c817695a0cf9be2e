//! Class-contrastive subspaces of the tangent space of the unit hypersphere.
//!
//! Given unit-norm embeddings grouped into labeled classes, a subspace for a
//! target class keeps the variance of that class while suppressing the
//! variance of all other classes. It is the top eigenspace of
//!
//! ```text
//! C = (1 − λ)/n_t · Y_t Y_tᵀ − Σ_{j≠t} λ/n_j · Y_j Y_jᵀ
//! ```
//!
//! where the columns of `Y` are either the (centered) embeddings themselves or
//! their Log maps at the pooled intrinsic mean. Fitted subspaces project
//! embeddings onto the subspace or its complement, measure how much of each
//! class lives in a subspace, and restrict zero-shot classification to a
//! subspace.
//!
//! The heavy loops (moment accumulation, Log-mapping, classification) run on
//! rayon when the `parallel` feature is enabled (default) and give the same
//! bits either way.

pub mod dataset;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod projection;
pub mod solver;
pub mod sphere;
pub mod synth;

pub use dataset::LabeledEmbeddingSet;
pub use error::{Error, ErrorKind, Result};
pub use par::Exec;
pub use solver::{FitParams, Geometry, Subspace, Weighting};
pub use sphere::{TangentVector, UnitVector};
