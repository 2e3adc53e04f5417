// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod error;
pub mod lognormal;
pub mod montecarlo;
pub mod nakagami;
pub mod numerics;

pub use approx::{ApproximantModel, MomentSequence};
pub use error::{Error, Result};
pub use lognormal::{LognormalParams, NormalizationFactor, OrthoPolynomial};
pub use montecarlo::{AccuracyReport, SampleBatch};
pub use nakagami::{FitResult, NakagamiProductSpec};
pub use numerics::{PrecisionConfig, Sign, SignedLogReal};
