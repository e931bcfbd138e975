//! Sign-perturbed-sums confidence regions for ridge regression.
//!
//! The crate builds exact, distribution-free confidence regions for the
//! parameter of a linear regression model under ridge regularisation, their
//! ellipsoidal outer approximations, finite-sample size bounds, and a
//! Monte Carlo harness around a finite-impulse-response system.
//!
//! ```
//! use sps_ridge::{extend, sps_init, build_eoa, Confidence, RegressionData};
//!
//! let rows: Vec<Vec<f64>> = (0..40).map(|t| vec![(t as f64).sin(), (t as f64 * 0.7).cos()]).collect();
//! let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] - r[1]).collect();
//! let data = RegressionData::from_rows(&rows, &y).unwrap();
//! let ep = extend(&data, 1.0).unwrap();
//! let state = sps_init(Confidence::from_mq(10, 1).unwrap(), data.n(), 7).unwrap();
//! let region = build_eoa(&ep, &state).unwrap();
//! assert!(region.radius_sq >= 0.0);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod eoa;
pub mod error;
pub mod linalg;
pub mod par;
pub mod problem;
pub mod rng;
pub mod search;
pub mod sim;
pub mod sps;

pub use bounds::{
    coherence, compute_k, f_delta, g_delta, lemma1_bound, lemma2_ratio_bound, lemma3_bound,
    min_sample_size, theorem2_bound, BoundReport, PacBoundInputs,
};
pub use eoa::{
    build_eoa, ellipsoid_contains, ellipsoid_geometry, eoa_radius, solve_sdp, Ellipsoid,
    EllipsoidRecord,
};
pub use error::{Result, SpsError};
pub use par::ExecMode;
pub use problem::{extend, ls_estimate, ridge_estimate, ExtendedProblem, RegressionData};
pub use sps::{compute_s, indicator, sps_init, Confidence, IndicatorEvaluator, SpsState};
