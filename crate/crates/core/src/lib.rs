//! Extraction of complete and concise bug-fixing patches from pairs of
//! consecutive program versions.
//!
//! The pipeline: detect refactorings between the old and new version,
//! reapply them to the old version, diff what remains, enumerate
//! subsequences of the difference, validate each against the old test
//! suite and the commit's triggering tests, and emit a patch only when
//! exactly one candidate survives.

pub mod change;
pub mod corpus;
pub mod external;
pub mod metrics;
pub mod pipeline;
pub mod refactor;
pub mod search;
pub mod validate;
