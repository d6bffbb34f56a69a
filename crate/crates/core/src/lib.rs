//! Point-set matching for cell detection: exact assignment solvers, the
//! hybrid one-to-one / one-to-many training matcher with its losses, and the
//! point-detection evaluation protocols.

pub mod anchors;
pub mod assignment;
pub mod error;
pub mod evaluation;
pub mod points;
pub mod synth;
pub mod train_match;

pub use assignment::{Assignment, BoolMatrix, CostMatrix};
pub use error::{Error, Result};
pub use evaluation::{ClassCounts, EvalConfig, EvalReport, Protocol};
pub use points::{LabeledPoint, PredictedPoint};
pub use train_match::{LossBreakdown, MatchConfig, MatchOutcome};
