//! Embedding-based mind-map metrics and the statistics used to compare them.

mod metrics;
pub mod report;
pub mod stats;

use thiserror::Error;

pub use metrics::{
    concept_distinctness, map_diversity, suggestion_source_distance, Distinctness, Diversity, SourceDistance,
    SourceDistances,
};
pub use report::{corpus_report, CorpusMap, Report};
pub use stats::{chi_square_2x2, cohens_d_pooled, welch_t_test, welch_t_test_samples, SampleSummary, TestResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("insufficient data: need at least {needed}, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("undefined statistic: {0}")]
    Undefined(String),
}
