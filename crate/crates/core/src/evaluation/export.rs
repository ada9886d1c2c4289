//! CSV renderings of an evaluation report. All output is byte-deterministic:
//! fixed row order, shortest round-trip float formatting.

use crate::measures::{DataChoice, MeasureKind};

use super::pooled::EvaluationReport;

/// `measure,data_choice,q,captured_fraction` rows, combos sorted by id, grid
/// ascending. `agent_mean` selects the per-agent mean curve instead of the
/// pooled-event curve.
pub fn curves_csv(report: &EvaluationReport, agent_mean: bool) -> String {
    let mut out = String::from("measure,data_choice,q,captured_fraction\n");
    for combo in &report.combos {
        let curve = if agent_mean {
            &combo.agent_mean_curve
        } else {
            &combo.pooled_curve
        };
        for &(q, frac) in curve {
            out.push_str(&format!(
                "{},{},{},{}\n",
                combo.measure.id(),
                combo.data_choice.id(),
                q,
                frac
            ));
        }
    }
    out
}

/// Pooled AUC table: rows are data choices in the summary-table order,
/// columns are measures. Cells for combinations that were not evaluated are
/// left empty.
pub fn auc_table_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("data_choice");
    for measure in MeasureKind::ALL {
        out.push(',');
        out.push_str(measure.id());
    }
    out.push('\n');
    for data_choice in DataChoice::TABLE_ORDER {
        out.push_str(data_choice.id());
        for measure in MeasureKind::ALL {
            out.push(',');
            if let Some(combo) = report
                .combos
                .iter()
                .find(|c| c.data_choice == data_choice && c.measure == measure)
            {
                out.push_str(&format!("{}", combo.pooled_auc));
            }
        }
        out.push('\n');
    }
    out
}

/// `agent_id,agent_kind,optimal_measure,auc` rows in agent order.
pub fn optima_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("agent_id,agent_kind,optimal_measure,auc\n");
    for optimum in &report.optima {
        out.push_str(&format!(
            "{},{},{},{}\n",
            optimum.agent.id,
            optimum.agent.kind.id(),
            optimum.combo_id,
            optimum.auc
        ));
    }
    out
}
