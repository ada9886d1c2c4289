//! Diversification evaluation: entry sequences, rank percentiles of newly
//! entered classes, cumulative capture curves, explanatory-power AUC, and
//! optimal-measure selection per agent and in aggregate.
//!
//! The procedure per agent: order the agent's first entries into classes by
//! filing date; for each entry after the first batch, sum the candidate's
//! proximity to every class already in the portfolio, and rank that sum
//! against all not-yet-entered classes (ascending mid-rank, normalized to a
//! percentile in (0, 1]). The mean percentile equals the area under the
//! cumulative capture curve; 0.5 means entries ignore proximity.

mod export;
mod pooled;
mod rank;
mod sequence;

pub use export::{auc_table_csv, curves_csv, optima_csv};
pub use pooled::{
    pooled_evaluation, AgentOptimum, ComboEvaluation, EvaluationReport, MeasureShare,
    PooledOptions,
};
pub use rank::{
    cumulative_curve, evaluate_agent, explanatory_power, portfolio_proximity, rank_percentile,
    AgentEvaluation, EvaluatedEvent,
};
pub use sequence::{entry_sequence, EntrySequence, SequenceEvent};

use thiserror::Error;

use crate::corpus::{AgentId, CorpusError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("candidate class {0} is already in the portfolio")]
    CandidateInPortfolio(String),
    #[error("portfolio is empty")]
    EmptyPortfolio,
    #[error("class {0} not present in the proximity matrix")]
    UnknownClass(String),
    #[error("agent {0} has no scorable entry events")]
    NoScorableEvents(AgentId),
    #[error("no agents with at least {min_classes} entered classes")]
    NoQualifyingAgents { min_classes: usize },
    #[error("qualifying agents produced no scorable entry events")]
    NoScoredEvents,
    #[error("matrix vocabulary does not match the corpus vocabulary")]
    VocabularyMismatch,
}
