//! Pooled evaluation across agents and measure combinations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AgentId, AgentKind, Corpus};
use crate::measures::{DataChoice, MeasureKind, ProximityMatrix};

use super::rank::{cumulative_curve, evaluate_agent};
use super::sequence::entry_sequence;
use super::EvalError;

#[derive(Debug, Clone, Copy)]
pub struct PooledOptions {
    /// Agents with fewer entered classes are excluded.
    pub min_classes: usize,
    /// Number of q samples (inclusive of both endpoints) on exported curves.
    pub curve_points: usize,
}

impl Default for PooledOptions {
    fn default() -> Self {
        PooledOptions {
            min_classes: 10,
            curve_points: 101,
        }
    }
}

/// Pooled results for one (data choice, measure) combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComboEvaluation {
    pub id: String,
    pub data_choice: DataChoice,
    pub measure: MeasureKind,
    /// Mean percentile over all events of all included agents.
    pub pooled_auc: f64,
    /// Capture curve over pooled events.
    pub pooled_curve: Vec<(f64, f64)>,
    /// Unweighted mean of per-agent capture curves.
    pub agent_mean_curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentOptimum {
    pub agent: AgentId,
    pub combo_id: String,
    pub auc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureShare {
    pub combo_id: String,
    pub share: f64,
}

/// Evaluation of one agent kind under every supplied matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub agent_kind: AgentKind,
    pub min_classes: usize,
    pub vocabulary_size: usize,
    pub agents_total: usize,
    pub agents_included: usize,
    pub agents_below_min_classes: usize,
    pub agents_zero_scorable: usize,
    pub skipped_first_batch_events: usize,
    pub scored_events: usize,
    pub combos: Vec<ComboEvaluation>,
    pub optima: Vec<AgentOptimum>,
    pub proportions: Vec<MeasureShare>,
}

/// Evaluate every agent of one kind against every matrix and aggregate.
///
/// Agents are processed in sorted id order and reduced in that order, so the
/// report is identical for any worker count. The per-agent optimal
/// combination is the AUC argmax with lexicographic combo-id tie-break.
pub fn pooled_evaluation(
    corpus: &Corpus,
    matrices: &[ProximityMatrix],
    kind: AgentKind,
    opts: &PooledOptions,
) -> Result<EvaluationReport, EvalError> {
    assert!(!matrices.is_empty(), "need at least one matrix");
    assert!(opts.curve_points >= 2, "curve grid needs both endpoints");
    for m in matrices {
        if m.classes() != corpus.vocabulary() {
            return Err(EvalError::VocabularyMismatch);
        }
    }
    // Fixed combo order: sorted by id.
    let mut order: Vec<usize> = (0..matrices.len()).collect();
    order.sort_by_key(|&i| matrices[i].combo().id());
    let combos: Vec<&ProximityMatrix> = order.iter().map(|&i| &matrices[i]).collect();
    let combo_ids: Vec<String> = combos.iter().map(|m| m.combo().id()).collect();

    let agents: Vec<&AgentId> = corpus.agents(kind).collect();
    let agents_total = agents.len();

    struct AgentOutcome {
        agent: AgentId,
        skipped_first_batch: usize,
        /// Percentiles per combo (same event order in every combo).
        percentiles: Vec<Vec<f64>>,
        aucs: Vec<f64>,
    }

    enum Outcome {
        BelowThreshold,
        ZeroScorable,
        Included(Box<AgentOutcome>),
    }

    let outcomes: Vec<Outcome> = agents
        .par_iter()
        .map(|agent| {
            let seq = entry_sequence(corpus, agent).expect("agent drawn from corpus");
            if seq.breadth() < opts.min_classes {
                return Outcome::BelowThreshold;
            }
            if seq.events.is_empty() {
                return Outcome::ZeroScorable;
            }
            let mut percentiles = Vec::with_capacity(combos.len());
            let mut aucs = Vec::with_capacity(combos.len());
            for matrix in &combos {
                let eval = evaluate_agent(matrix, &seq).expect("sequence has scorable events");
                percentiles.push(eval.events.iter().map(|e| e.percentile).collect());
                aucs.push(eval.auc);
            }
            Outcome::Included(Box::new(AgentOutcome {
                agent: (*agent).clone(),
                skipped_first_batch: seq.skipped_first_batch,
                percentiles,
                aucs,
            }))
        })
        .collect();

    let mut agents_below = 0usize;
    let mut agents_zero = 0usize;
    let mut skipped_events = 0usize;
    let mut included: Vec<Box<AgentOutcome>> = Vec::new();
    for outcome in outcomes {
        match outcome {
            Outcome::BelowThreshold => agents_below += 1,
            Outcome::ZeroScorable => agents_zero += 1,
            Outcome::Included(a) => {
                skipped_events += a.skipped_first_batch;
                included.push(a);
            }
        }
    }
    if included.is_empty() {
        if agents_total == agents_below || agents_total == 0 {
            return Err(EvalError::NoQualifyingAgents {
                min_classes: opts.min_classes,
            });
        }
        return Err(EvalError::NoScoredEvents);
    }

    let grid: Vec<f64> = (0..opts.curve_points)
        .map(|i| i as f64 / (opts.curve_points - 1) as f64)
        .collect();

    // Pool percentiles per combo, in agent order.
    let scored_events: usize = included.iter().map(|a| a.percentiles[0].len()).sum();
    let mut combo_reports = Vec::with_capacity(combos.len());
    for (k, matrix) in combos.iter().enumerate() {
        let mut pooled: Vec<f64> = Vec::with_capacity(scored_events);
        let mut curve_sum = vec![0.0f64; grid.len()];
        for agent in &included {
            pooled.extend_from_slice(&agent.percentiles[k]);
            for (slot, (_, frac)) in curve_sum
                .iter_mut()
                .zip(cumulative_curve(&agent.percentiles[k], &grid))
            {
                *slot += frac;
            }
        }
        let pooled_auc = pooled.iter().sum::<f64>() / pooled.len() as f64;
        let pooled_curve = cumulative_curve(&pooled, &grid);
        let agent_mean_curve: Vec<(f64, f64)> = grid
            .iter()
            .zip(&curve_sum)
            .map(|(&q, &sum)| (q, sum / included.len() as f64))
            .collect();
        combo_reports.push(ComboEvaluation {
            id: combo_ids[k].clone(),
            data_choice: matrix.data_choice(),
            measure: matrix.measure(),
            pooled_auc,
            pooled_curve,
            agent_mean_curve,
        });
    }

    // Per-agent optimum: AUC argmax, ties to the lexicographically smallest
    // combo id. combos are already sorted by id, so the first strict
    // improvement wins.
    let mut optima = Vec::with_capacity(included.len());
    let mut optimum_counts = vec![0usize; combos.len()];
    for agent in &included {
        let mut best = 0usize;
        for k in 1..combos.len() {
            if agent.aucs[k] > agent.aucs[best] {
                best = k;
            }
        }
        optimum_counts[best] += 1;
        optima.push(AgentOptimum {
            agent: agent.agent.clone(),
            combo_id: combo_ids[best].clone(),
            auc: agent.aucs[best],
        });
    }
    let proportions: Vec<MeasureShare> = combo_ids
        .iter()
        .zip(&optimum_counts)
        .map(|(id, &count)| MeasureShare {
            combo_id: id.clone(),
            share: count as f64 / included.len() as f64,
        })
        .collect();

    Ok(EvaluationReport {
        agent_kind: kind,
        min_classes: opts.min_classes,
        vocabulary_size: corpus.class_count(),
        agents_total,
        agents_included: included.len(),
        agents_below_min_classes: agents_below,
        agents_zero_scorable: agents_zero,
        skipped_first_batch_events: skipped_events,
        scored_events,
        combos: combo_reports,
        optima,
        proportions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{truncate_cpc, ClassId, CorpusBuilder, CpcLevel};
    use crate::measures::MeasureKind;
    use chrono::NaiveDate;

    fn class(code: &str) -> ClassId {
        truncate_cpc(code, CpcLevel::Cpc3).unwrap()
    }

    fn date(y: i32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, 1, 1).unwrap() + chrono::Duration::days(d as i64)
    }

    /// Two agents entering 4 classes each over a 5-class vocabulary.
    fn small_corpus() -> Corpus {
        let mut b = CorpusBuilder::new(CpcLevel::Cpc3);
        for (i, code) in ["A01", "B02", "C03", "D04", "E05"].iter().enumerate() {
            b.add_patent(format!("V{i}"), date(1970, 0), [class(code)])
                .unwrap();
        }
        let agents = [
            ("i1", ["A01", "B02", "C03", "D04"]),
            ("i2", ["E05", "D04", "C03", "B02"]),
        ];
        for (name, codes) in agents {
            let agent = AgentId::new(AgentKind::Inventor, name);
            for (k, code) in codes.iter().enumerate() {
                let pid = format!("P{name}{k}");
                b.add_patent(&pid, date(1990, k as u32), [class(code)])
                    .unwrap();
                b.add_agent_link(agent.clone(), &pid).unwrap();
            }
        }
        b.build().unwrap()
    }

    fn matrix_with(
        corpus: &Corpus,
        data_choice: DataChoice,
        measure: MeasureKind,
        f: impl FnMut(usize, usize) -> f64,
    ) -> ProximityMatrix {
        ProximityMatrix::from_pair_scores(corpus.vocabulary().to_vec(), data_choice, measure, f)
    }

    #[test]
    fn single_agent_single_measure_pools_to_agent_auc() {
        let mut b = CorpusBuilder::new(CpcLevel::Cpc3);
        for (i, code) in ["A01", "B02", "C03"].iter().enumerate() {
            b.add_patent(format!("V{i}"), date(1970, 0), [class(code)])
                .unwrap();
        }
        let agent = AgentId::new(AgentKind::Inventor, "only");
        for (k, code) in ["A01", "B02", "C03"].iter().enumerate() {
            let pid = format!("P{k}");
            b.add_patent(&pid, date(1990, k as u32), [class(code)])
                .unwrap();
            b.add_agent_link(agent.clone(), &pid).unwrap();
        }
        let corpus = b.build().unwrap();
        let matrix = matrix_with(&corpus, DataChoice::RefPat, MeasureKind::Jaccard, |i, j| {
            ((i + 1) * (j + 2)) as f64 / 100.0
        });
        let opts = PooledOptions {
            min_classes: 3,
            curve_points: 11,
        };
        let report =
            pooled_evaluation(&corpus, std::slice::from_ref(&matrix), AgentKind::Inventor, &opts)
                .unwrap();
        assert_eq!(report.agents_included, 1);

        let seq = entry_sequence(&corpus, &agent).unwrap();
        let eval = evaluate_agent(&matrix, &seq).unwrap();
        assert_eq!(report.combos[0].pooled_auc, eval.auc);
        assert_eq!(report.optima[0].auc, eval.auc);
    }

    #[test]
    fn dominant_measure_wins_every_agent() {
        // Both agents walk contiguous paths on a ring where m1 scores
        // neighbours closest, so every event tops m1's ranking; m2 reverses
        // m1's order and strictly ranks every target lower.
        let corpus = small_corpus();
        let m1 = matrix_with(&corpus, DataChoice::RefPat, MeasureKind::Jaccard, |i, j| {
            1.0 / (1.0 + (j - i) as f64)
        });
        let m2 = ProximityMatrix::from_pair_scores(
            corpus.vocabulary().to_vec(),
            DataChoice::CoPat,
            MeasureKind::Cosine,
            |i, j| 2.0 - 1.0 / (1.0 + (j - i) as f64),
        );
        let opts = PooledOptions {
            min_classes: 4,
            curve_points: 11,
        };
        let report = pooled_evaluation(
            &corpus,
            &[m2.clone(), m1.clone()],
            AgentKind::Inventor,
            &opts,
        )
        .unwrap();
        assert_eq!(report.agents_included, 2);
        for optimum in &report.optima {
            assert_eq!(optimum.combo_id, "ref_pat_jaccard");
            assert!((optimum.auc - 1.0).abs() < 1e-12);
        }
        let m1_share = report
            .proportions
            .iter()
            .find(|p| p.combo_id == "ref_pat_jaccard")
            .unwrap();
        assert_eq!(m1_share.share, 1.0);
        let share_sum: f64 = report.proportions.iter().map(|p| p.share).sum();
        assert!((share_sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn optimum_tie_breaks_lexicographically() {
        // Identical matrices under two combo ids: every agent ties, and the
        // lexicographically smaller id wins.
        let corpus = small_corpus();
        let base = matrix_with(&corpus, DataChoice::RefPat, MeasureKind::Jaccard, |i, j| {
            1.0 / (1.0 + (j - i) as f64)
        });
        let twin = ProximityMatrix::from_pair_scores(
            corpus.vocabulary().to_vec(),
            DataChoice::RefPat,
            MeasureKind::Cosine,
            |i, j| 1.0 / (1.0 + (j - i) as f64),
        );
        let report = pooled_evaluation(
            &corpus,
            &[base, twin],
            AgentKind::Inventor,
            &PooledOptions {
                min_classes: 4,
                curve_points: 11,
            },
        )
        .unwrap();
        // "ref_pat_cosine" < "ref_pat_jaccard".
        for optimum in &report.optima {
            assert_eq!(optimum.combo_id, "ref_pat_cosine");
        }
    }

    #[test]
    fn below_threshold_errors_with_threshold() {
        let corpus = small_corpus();
        let matrix = matrix_with(&corpus, DataChoice::RefPat, MeasureKind::Jaccard, |_, _| 0.1);
        let opts = PooledOptions {
            min_classes: 10,
            curve_points: 11,
        };
        match pooled_evaluation(&corpus, std::slice::from_ref(&matrix), AgentKind::Inventor, &opts)
        {
            Err(EvalError::NoQualifyingAgents { min_classes }) => {
                assert_eq!(min_classes, 10)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vocabulary_mismatch_rejected() {
        let corpus = small_corpus();
        let foreign = ProximityMatrix::from_pair_scores(
            vec![class("X01"), class("Y02")],
            DataChoice::RefPat,
            MeasureKind::Jaccard,
            |_, _| 0.3,
        );
        assert!(matches!(
            pooled_evaluation(
                &corpus,
                std::slice::from_ref(&foreign),
                AgentKind::Inventor,
                &PooledOptions::default()
            ),
            Err(EvalError::VocabularyMismatch)
        ));
    }

    #[test]
    fn report_is_identical_across_worker_counts() {
        let corpus = small_corpus();
        let matrices: Vec<ProximityMatrix> = [MeasureKind::Jaccard, MeasureKind::Cosine]
            .into_iter()
            .map(|m| {
                matrix_with(&corpus, DataChoice::RefPat, m, |i, j| {
                    ((i * 13 + j * 29) % 17) as f64 / 17.0
                })
            })
            .collect();
        let opts = PooledOptions {
            min_classes: 4,
            curve_points: 21,
        };
        let runs: Vec<String> = [1usize, 4, 8]
            .into_iter()
            .map(|workers| {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .unwrap();
                let report = pool
                    .install(|| {
                        pooled_evaluation(&corpus, &matrices, AgentKind::Inventor, &opts)
                    })
                    .unwrap();
                serde_json::to_string(&report).unwrap()
            })
            .collect();
        assert!(runs.windows(2).all(|w| w[0] == w[1]));
    }
}
