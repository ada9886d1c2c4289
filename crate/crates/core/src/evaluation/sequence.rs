//! Time-ordered first-entry sequences.

use chrono::NaiveDate;

use crate::corpus::{AgentId, Corpus};

use super::EvalError;

/// One scorable entry event: the position of the entered class in the
/// agent's entry order, and how much of that order strictly precedes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceEvent {
    /// Index into [`EntrySequence::entered`] of the class being entered.
    pub entry_index: usize,
    /// Entries with a strictly earlier date: `entered[..prior_len]` is the
    /// portfolio this event is scored against.
    pub prior_len: usize,
}

/// An agent's full entry order plus the subset of events that can be scored.
///
/// Portfolio membership uses strict date precedence: entries sharing a date
/// are scored against the same earlier portfolio and appear in each other's
/// candidate sets. Events with an empty prior portfolio (the first batch)
/// are excluded from scoring and only counted.
#[derive(Debug, Clone)]
pub struct EntrySequence {
    pub agent: AgentId,
    /// First entry per class, ordered by (date, class code).
    pub entered: Vec<(u32, NaiveDate)>,
    pub events: Vec<SequenceEvent>,
    pub skipped_first_batch: usize,
}

impl EntrySequence {
    /// Number of distinct classes the agent ever entered.
    pub fn breadth(&self) -> usize {
        self.entered.len()
    }

    pub fn event_class(&self, event: SequenceEvent) -> u32 {
        self.entered[event.entry_index].0
    }

    pub fn event_date(&self, event: SequenceEvent) -> NaiveDate {
        self.entered[event.entry_index].1
    }

    /// Class indices entered strictly before the event.
    pub fn portfolio_before(&self, event: SequenceEvent) -> impl Iterator<Item = u32> + '_ {
        self.entered[..event.prior_len].iter().map(|&(c, _)| c)
    }
}

/// Build the entry sequence skeleton for one agent.
pub fn entry_sequence(corpus: &Corpus, agent: &AgentId) -> Result<EntrySequence, EvalError> {
    let entered = corpus.portfolio_indices(agent)?;
    let mut events = Vec::new();
    let mut skipped = 0usize;
    let mut prior_len = 0usize;
    for (idx, &(_, date)) in entered.iter().enumerate() {
        while entered[prior_len].1 < date {
            prior_len += 1;
        }
        if prior_len == 0 {
            skipped += 1;
        } else {
            events.push(SequenceEvent {
                entry_index: idx,
                prior_len,
            });
        }
    }
    Ok(EntrySequence {
        agent: agent.clone(),
        entered,
        events,
        skipped_first_batch: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{truncate_cpc, AgentKind, ClassId, CorpusBuilder, CpcLevel};

    fn class(code: &str) -> ClassId {
        truncate_cpc(code, CpcLevel::Cpc3).unwrap()
    }

    fn date(y: i32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, 1, 1).unwrap()
    }

    /// One single-class patent per (class, year) pair, all linked to one agent.
    fn corpus_with_entries(entries: &[(&str, i32)]) -> (Corpus, AgentId) {
        let agent = AgentId::new(AgentKind::Inventor, "i1");
        let mut b = CorpusBuilder::new(CpcLevel::Cpc3);
        for (k, &(code, year)) in entries.iter().enumerate() {
            let pid = format!("P{k}");
            b.add_patent(&pid, date(year), [class(code)]).unwrap();
            b.add_agent_link(agent.clone(), &pid).unwrap();
        }
        (b.build().unwrap(), agent)
    }

    #[test]
    fn first_event_skipped_rest_scored() {
        let (corpus, agent) =
            corpus_with_entries(&[("A01", 1980), ("B02", 1985), ("C03", 1990)]);
        let seq = entry_sequence(&corpus, &agent).unwrap();
        assert_eq!(seq.skipped_first_batch, 1);
        assert_eq!(seq.events.len(), 2);

        let b_event = seq.events[0];
        assert_eq!(corpus.class(seq.event_class(b_event)).as_str(), "B02");
        let portfolio: Vec<u32> = seq.portfolio_before(b_event).collect();
        assert_eq!(portfolio.len(), 1);
        assert_eq!(corpus.class(portfolio[0]).as_str(), "A01");

        let c_event = seq.events[1];
        assert_eq!(seq.portfolio_before(c_event).count(), 2);
    }

    #[test]
    fn same_day_first_batch_all_skipped() {
        let (corpus, agent) =
            corpus_with_entries(&[("A01", 1980), ("B02", 1980), ("C03", 1990)]);
        let seq = entry_sequence(&corpus, &agent).unwrap();
        assert_eq!(seq.skipped_first_batch, 2);
        assert_eq!(seq.events.len(), 1);
        let c_event = seq.events[0];
        assert_eq!(corpus.class(seq.event_class(c_event)).as_str(), "C03");
        assert_eq!(seq.portfolio_before(c_event).count(), 2);
    }

    #[test]
    fn same_day_later_entries_share_portfolio_and_stay_mutual_candidates() {
        // Oracle: enumerate candidates under the strict-precedence rule.
        let (corpus, agent) =
            corpus_with_entries(&[("A01", 1980), ("B02", 1985), ("C03", 1985)]);
        let seq = entry_sequence(&corpus, &agent).unwrap();
        assert_eq!(seq.skipped_first_batch, 1);
        assert_eq!(seq.events.len(), 2);
        for &event in &seq.events {
            // Both 1985 entries are scored against {A01} only.
            let portfolio: Vec<u32> = seq.portfolio_before(event).collect();
            assert_eq!(portfolio.len(), 1);
            assert_eq!(corpus.class(portfolio[0]).as_str(), "A01");
        }
        // Neither 1985 class is in the other's portfolio, so each remains in
        // the other's candidate set (candidates = vocabulary - portfolio).
        let classes: Vec<&str> = seq
            .events
            .iter()
            .map(|&e| corpus.class(seq.event_class(e)).as_str())
            .collect();
        assert_eq!(classes, ["B02", "C03"]);
    }

    #[test]
    fn breadth_counts_all_entries_including_skipped() {
        let (corpus, agent) = corpus_with_entries(&[("A01", 1980), ("B02", 1980)]);
        let seq = entry_sequence(&corpus, &agent).unwrap();
        assert_eq!(seq.breadth(), 2);
        assert_eq!(seq.events.len(), 0);
    }
}
