//! Streaming covariance maintenance.
//!
//! Keeps the sample mean, the covariance matrix, and its LDL factorization of
//! an m-dimensional observation set consistent while observations are added,
//! removed, or both at once. Each edit of k observations is a rank-k
//! modification costing Θ((k+1)m²) instead of the Θ((n+k+1)m²) of a full
//! recomputation, and the factor upkeep avoids the Θ(m³) refactorization.
//!
//! ```
//! use covstream::{CovarianceState, DataMatrix};
//!
//! let batch = DataMatrix::from_observations(1, &[&[0.0], &[2.0], &[4.0]])?;
//! let state = CovarianceState::from_columns(&batch);
//!
//! let newcomer = DataMatrix::from_observations(1, &[&[6.0]])?;
//! let updated = state.update(&newcomer)?;
//! assert!((updated.covariance()?[(0, 0)] - 20.0 / 3.0).abs() < 1e-12);
//! # Ok::<(), covstream::Error>(())
//! ```
//!
//! ## Examples
//!
//! One runnable example per capability, under `examples/`:
//!
//! - **`streaming_update`** — rank-k updates/downdates of a
//!   [`CovarianceState`], the K factor, and both ± branches
//! - **`mixed_edit`** — simultaneous add/remove in one pass, both roots of
//!   the mixed coefficient, and the two-mean cross-check
//! - **`ldl_maintenance`** — keeping an [`LdlState`] factorization current
//!   through edits instead of refactoring
//! - **`sliding_window`** — the windowed engine with its refactorization
//!   safety net
//! - **`anomaly_scores`** — Mahalanobis scoring of a stream against a
//!   sliding background window
//! - **`operation_counts`** — instrumented flop counts beside the
//!   closed-form costs
//!
//! ```bash
//! cargo run --release --example streaming_update
//! cargo run --release --example sliding_window
//! ```
//!
//! The `covstream` binary wraps the same functionality for files:
//! `fit`, `update`, `downdate`, `mixed`, `ldl`, `solve`, `window`, `verify`,
//! and `bench`.
//!
//! ## Conventions
//!
//! Observations are matrix **columns** internally; CSV files carry one
//! observation per **row** and are transposed on load. States store the
//! unnormalized scatter `(n-1)·S`; Bessel's correction is applied only when
//! reading the covariance out.

pub mod counts;
pub mod error;
pub mod io;
pub mod ldl;
mod matrix;
pub mod moments;
pub mod oracle;
pub mod scalar;
pub mod timing;
pub mod verify;
pub mod window;

pub use error::{Error, Result};
pub use ldl::{ldl_factor, ldl_mixed_modify, ldl_rank_k_modify, rank1_modify, LdlState, Phi};
pub use matrix::{rel_frobenius_diff, rel_l2_diff, DataMatrix, Matrix};
pub use moments::{
    apply_rank_k, downdate_asymmetric, make_k_downdate, make_k_update, mean_downdate, mean_update,
    mixed_coefficient, mixed_two_mean, mixed_update_downdate, Branch, CovarianceState, KFactor,
    KForm, MeanState, MixedCoefficient, Root, RootKind,
};
pub use scalar::{count_ops, Counted, OpCounter, Scalar};
pub use window::{window_init, Backend, WindowConfig, WindowReport, WindowState};
