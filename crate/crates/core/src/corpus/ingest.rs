//! Tab-separated bulk ingestion.
//!
//! Four files with header rows feed one corpus:
//!
//! - `patents.tsv`:        `patent_id\tfiling_date` (ISO 8601 date)
//! - `patent_classes.tsv`: `patent_id\tcpc_code`
//! - `citations.tsv`:      `citing_patent_id\tcited_patent_id`
//! - `patent_agents.tsv`:  `patent_id\tagent_id\tagent_kind`
//!
//! Structural problems (unreadable file, wrong header, wrong field count,
//! non-empty but unparsable date, unknown agent kind) are hard errors naming
//! file and line. Data-level noise is dropped and counted: duplicate rows,
//! rows referencing unknown patents, malformed CPC codes, and patents left
//! without a filing date or without any parsable class. Cited patent ids are
//! the one exception to the unknown-id rule: they are kept verbatim as
//! opaque reference tokens because references to patents outside the corpus
//! are real signal.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{truncate_cpc, AgentId, AgentKind, ClassId, Corpus, CorpusBuilder, CorpusError, CpcLevel};

/// Locations of the four input files.
#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub patents: PathBuf,
    pub classes: PathBuf,
    pub citations: PathBuf,
    pub agents: PathBuf,
}

impl CorpusPaths {
    /// Conventional file names under one directory.
    pub fn in_dir(dir: &Path) -> CorpusPaths {
        CorpusPaths {
            patents: dir.join("patents.tsv"),
            classes: dir.join("patent_classes.tsv"),
            citations: dir.join("citations.tsv"),
            agents: dir.join("patent_agents.tsv"),
        }
    }

    /// (role tag, path) pairs in canonical order, for source digests.
    pub fn tagged(&self) -> [(&'static str, &Path); 4] {
        [
            ("patents", self.patents.as_path()),
            ("classes", self.classes.as_path()),
            ("citations", self.citations.as_path()),
            ("agents", self.agents.as_path()),
        ]
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// When non-zero, classes assigned to fewer than this many patents are
    /// removed from the vocabulary (counts taken once, before removal), and
    /// patents left classless are dropped.
    pub min_patents_per_class: usize,
}

/// Raw data-row counts per input file (header excluded).
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RowCounts {
    pub patents: usize,
    pub classes: usize,
    pub citations: usize,
    pub agents: usize,
}

/// Per-rule drop counters.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct DropCounts {
    pub patents_missing_date: usize,
    pub patents_duplicate_rows: usize,
    pub patents_without_class: usize,
    pub patents_below_class_filter: usize,
    pub classes_unknown_patent: usize,
    pub classes_malformed_code: usize,
    pub classes_duplicate_rows: usize,
    pub classes_filtered_low_support: usize,
    pub citations_unknown_citing: usize,
    pub citations_duplicate_rows: usize,
    pub agents_unknown_patent: usize,
    pub agents_duplicate_rows: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestSummary {
    pub level: CpcLevel,
    pub rows: RowCounts,
    pub drops: DropCounts,
    pub patents_loaded: usize,
    pub vocabulary_size: usize,
    pub cited_keys: usize,
    pub inventors: usize,
    pub assignees: usize,
    pub corpus_digest: String,
}

const PATENTS_HEADER: &str = "patent_id\tfiling_date";
const CLASSES_HEADER: &str = "patent_id\tcpc_code";
const CITATIONS_HEADER: &str = "citing_patent_id\tcited_patent_id";
const AGENTS_HEADER: &str = "patent_id\tagent_id\tagent_kind";

/// Load and validate a corpus from the four TSV files.
pub fn load_corpus(
    paths: &CorpusPaths,
    level: CpcLevel,
    opts: &IngestOptions,
) -> Result<(Corpus, IngestSummary), CorpusError> {
    let open = |path: &Path| -> Result<BufReader<File>, CorpusError> {
        File::open(path)
            .map(BufReader::new)
            .map_err(|source| CorpusError::Io {
                path: path.to_path_buf(),
                source,
            })
    };
    load_corpus_from_readers(
        open(&paths.patents)?,
        open(&paths.classes)?,
        open(&paths.citations)?,
        open(&paths.agents)?,
        paths,
        level,
        opts,
    )
}

/// Same as [`load_corpus`] but over already-open readers; `paths` only
/// labels diagnostics.
#[allow(clippy::too_many_arguments)]
pub fn load_corpus_from_readers(
    patents: impl BufRead,
    classes: impl BufRead,
    citations: impl BufRead,
    agents: impl BufRead,
    paths: &CorpusPaths,
    level: CpcLevel,
    opts: &IngestOptions,
) -> Result<(Corpus, IngestSummary), CorpusError> {
    let mut rows = RowCounts::default();
    let mut drops = DropCounts::default();

    // patents.tsv
    let mut filing: BTreeMap<String, NaiveDate> = BTreeMap::new();
    for row in RowReader::new(patents, &paths.patents, PATENTS_HEADER) {
        let (line, fields) = row?;
        rows.patents += 1;
        let [id, date_str] = expect_fields::<2>(&paths.patents, line, &fields)?;
        if id.is_empty() {
            return Err(row_error(&paths.patents, line, "empty patent_id"));
        }
        if date_str.is_empty() {
            drops.patents_missing_date += 1;
            continue;
        }
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|_| {
            CorpusError::Date {
                path: paths.patents.clone(),
                line,
                value: date_str.to_string(),
            }
        })?;
        match filing.get(id) {
            None => {
                filing.insert(id.to_string(), date);
            }
            Some(existing) if *existing == date => drops.patents_duplicate_rows += 1,
            Some(_) => {
                return Err(row_error(
                    &paths.patents,
                    line,
                    &format!("conflicting duplicate rows for patent_id {id:?}"),
                ));
            }
        }
    }

    // patent_classes.tsv
    let mut class_sets: BTreeMap<String, BTreeSet<ClassId>> = BTreeMap::new();
    for row in RowReader::new(classes, &paths.classes, CLASSES_HEADER) {
        let (line, fields) = row?;
        rows.classes += 1;
        let [id, raw_code] = expect_fields::<2>(&paths.classes, line, &fields)?;
        if !filing.contains_key(id) {
            drops.classes_unknown_patent += 1;
            continue;
        }
        let class = match truncate_cpc(raw_code, level) {
            Ok(class) => class,
            Err(_) => {
                drops.classes_malformed_code += 1;
                continue;
            }
        };
        if !class_sets.entry(id.to_string()).or_default().insert(class) {
            drops.classes_duplicate_rows += 1;
        }
    }

    // Patents with no parsable class are dropped.
    drops.patents_without_class = filing.len() - class_sets.len();
    let mut patents: BTreeMap<String, (NaiveDate, BTreeSet<ClassId>)> = class_sets
        .into_iter()
        .map(|(id, classes)| {
            let date = filing[&id];
            (id, (date, classes))
        })
        .collect();

    // Optional low-support class filter; support counted once, pre-removal.
    if opts.min_patents_per_class > 0 {
        let mut support: BTreeMap<&ClassId, usize> = BTreeMap::new();
        for (_, classes) in patents.values() {
            for class in classes {
                *support.entry(class).or_default() += 1;
            }
        }
        let removed: BTreeSet<ClassId> = support
            .into_iter()
            .filter(|(_, n)| *n < opts.min_patents_per_class)
            .map(|(c, _)| c.clone())
            .collect();
        drops.classes_filtered_low_support = removed.len();
        if !removed.is_empty() {
            for (_, classes) in patents.values_mut() {
                classes.retain(|c| !removed.contains(c));
            }
            let before = patents.len();
            patents.retain(|_, (_, classes)| !classes.is_empty());
            drops.patents_below_class_filter = before - patents.len();
        }
    }

    // citations.tsv
    let mut references: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for row in RowReader::new(citations, &paths.citations, CITATIONS_HEADER) {
        let (line, fields) = row?;
        rows.citations += 1;
        let [citing, cited] = expect_fields::<2>(&paths.citations, line, &fields)?;
        if cited.is_empty() {
            return Err(row_error(&paths.citations, line, "empty cited_patent_id"));
        }
        if !patents.contains_key(citing) {
            drops.citations_unknown_citing += 1;
            continue;
        }
        if !references
            .entry(citing.to_string())
            .or_default()
            .insert(cited.to_string())
        {
            drops.citations_duplicate_rows += 1;
        }
    }

    // patent_agents.tsv
    let mut links: BTreeMap<AgentId, BTreeSet<String>> = BTreeMap::new();
    for row in RowReader::new(agents, &paths.agents, AGENTS_HEADER) {
        let (line, fields) = row?;
        rows.agents += 1;
        let [id, agent_id, kind_str] = expect_fields::<3>(&paths.agents, line, &fields)?;
        if agent_id.is_empty() {
            return Err(row_error(&paths.agents, line, "empty agent_id"));
        }
        let kind: AgentKind = kind_str
            .parse()
            .map_err(|e: String| row_error(&paths.agents, line, &e))?;
        if !patents.contains_key(id) {
            drops.agents_unknown_patent += 1;
            continue;
        }
        if !links
            .entry(AgentId::new(kind, agent_id))
            .or_default()
            .insert(id.to_string())
        {
            drops.agents_duplicate_rows += 1;
        }
    }

    let mut builder = CorpusBuilder::new(level);
    for (id, (date, classes)) in &patents {
        builder.add_patent(id.clone(), *date, classes.iter().cloned())?;
    }
    for (citing, cited_set) in &references {
        for cited in cited_set {
            builder.add_reference(citing, cited.clone())?;
        }
    }
    for (agent, patent_ids) in links {
        for pid in patent_ids {
            builder.add_agent_link(agent.clone(), &pid)?;
        }
    }
    let corpus = builder.build()?;

    let summary = IngestSummary {
        level,
        rows,
        drops,
        patents_loaded: corpus.patent_count(),
        vocabulary_size: corpus.class_count(),
        cited_keys: corpus.cited_keys().len(),
        inventors: corpus.agent_count(AgentKind::Inventor),
        assignees: corpus.agent_count(AgentKind::Assignee),
        corpus_digest: corpus.digest_hex(),
    };
    Ok((corpus, summary))
}

fn row_error(path: &Path, line: usize, reason: &str) -> CorpusError {
    CorpusError::Row {
        path: path.to_path_buf(),
        line,
        reason: reason.to_string(),
    }
}

fn expect_fields<'a, const N: usize>(
    path: &Path,
    line: usize,
    fields: &'a [String],
) -> Result<[&'a str; N], CorpusError> {
    if fields.len() != N {
        return Err(row_error(
            path,
            line,
            &format!(
                "expected {N} tab-separated fields, found {}",
                fields.len()
            ),
        ));
    }
    let mut out = [""; N];
    for (slot, field) in out.iter_mut().zip(fields) {
        *slot = field.as_str();
    }
    Ok(out)
}

/// Line-oriented TSV reader: validates the header eagerly, strips trailing
/// `\r`, skips blank lines, and yields (line number, fields).
struct RowReader<R> {
    reader: R,
    path: PathBuf,
    line: usize,
    header_error: Option<CorpusError>,
}

impl<R: BufRead> RowReader<R> {
    fn new(mut reader: R, path: &Path, expected_header: &'static str) -> Self {
        let mut header = String::new();
        let header_error = match reader.read_line(&mut header) {
            Err(source) => Some(CorpusError::Io {
                path: path.to_path_buf(),
                source,
            }),
            Ok(_) => {
                let found = header.trim_end_matches(['\n', '\r']);
                if found == expected_header {
                    None
                } else {
                    Some(CorpusError::Header {
                        path: path.to_path_buf(),
                        expected: expected_header,
                        found: found.to_string(),
                    })
                }
            }
        };
        RowReader {
            reader,
            path: path.to_path_buf(),
            line: 1,
            header_error,
        }
    }
}

impl<R: BufRead> Iterator for RowReader<R> {
    type Item = Result<(usize, Vec<String>), CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(err) = self.header_error.take() {
            return Some(Err(err));
        }
        loop {
            let mut buf = String::new();
            match self.reader.read_line(&mut buf) {
                Err(source) => {
                    return Some(Err(CorpusError::Io {
                        path: self.path.clone(),
                        source,
                    }))
                }
                Ok(0) => return None,
                Ok(_) => {
                    self.line += 1;
                    let trimmed = buf.trim_end_matches(['\n', '\r']);
                    if trimmed.is_empty() {
                        continue;
                    }
                    let fields: Vec<String> =
                        trimmed.split('\t').map(str::to_string).collect();
                    return Some(Ok((self.line, fields)));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn paths() -> CorpusPaths {
        CorpusPaths::in_dir(Path::new("mem"))
    }

    fn load(
        patents: &str,
        classes: &str,
        citations: &str,
        agents: &str,
        level: CpcLevel,
    ) -> Result<(Corpus, IngestSummary), CorpusError> {
        load_corpus_from_readers(
            Cursor::new(patents.to_string()),
            Cursor::new(classes.to_string()),
            Cursor::new(citations.to_string()),
            Cursor::new(agents.to_string()),
            &paths(),
            level,
            &IngestOptions::default(),
        )
    }

    const PATENTS: &str = "patent_id\tfiling_date\nP1\t1990-01-31\nP2\t1985-06-01\nP3\t2001-12-24\n";
    const CLASSES: &str =
        "patent_id\tcpc_code\nP1\tH04L 12/28\nP2\tH04L 9/00\nP2\tA01B 3/42\nP3\tA01B 1/00\n";
    const CITATIONS: &str = "citing_patent_id\tcited_patent_id\nP1\tP2\nP1\tP0\n";
    const AGENTS: &str =
        "patent_id\tagent_id\tagent_kind\nP1\ti1\tinventor\nP2\ti1\tinventor\nP3\ta1\tassignee\n";

    #[test]
    fn loads_well_formed_files() {
        let (corpus, summary) = load(PATENTS, CLASSES, CITATIONS, AGENTS, CpcLevel::Cpc4).unwrap();
        assert_eq!(corpus.patent_count(), 3);
        assert_eq!(corpus.class_count(), 2); // H04L, A01B
        assert_eq!(summary.patents_loaded, 3);
        assert_eq!(summary.vocabulary_size, 2);
        assert_eq!(summary.inventors, 1);
        assert_eq!(summary.assignees, 1);
    }

    #[test]
    fn class_row_for_unknown_patent_dropped() {
        let classes = format!("{CLASSES}X9\tH04L 1/00\n");
        let (_, summary) = load(PATENTS, &classes, CITATIONS, AGENTS, CpcLevel::Cpc4).unwrap();
        assert_eq!(summary.drops.classes_unknown_patent, 1);
    }

    #[test]
    fn out_of_corpus_citation_kept_as_reference_token() {
        let (corpus, summary) = load(PATENTS, CLASSES, CITATIONS, AGENTS, CpcLevel::Cpc4).unwrap();
        let p1 = &corpus.patents()[corpus.patent_index("P1").unwrap() as usize];
        let tokens: Vec<&str> = p1
            .reference_keys()
            .iter()
            .map(|&k| corpus.cited_token(k))
            .collect();
        assert_eq!(tokens, ["P0", "P2"]);
        assert_eq!(summary.drops.citations_unknown_citing, 0);
        assert!(corpus
            .resolve_cited(p1.reference_keys()[0])
            .is_none()); // P0 opaque
    }

    #[test]
    fn citation_from_unknown_patent_dropped() {
        let citations = format!("{CITATIONS}X9\tP1\n");
        let (_, summary) = load(PATENTS, CLASSES, &citations, AGENTS, CpcLevel::Cpc4).unwrap();
        assert_eq!(summary.drops.citations_unknown_citing, 1);
    }

    #[test]
    fn missing_filing_date_drops_patent() {
        let patents = "patent_id\tfiling_date\nP1\t1990-01-31\nP2\t\n";
        let classes = "patent_id\tcpc_code\nP1\tH04L 1/00\nP2\tH04L 1/00\n";
        let (corpus, summary) = load(
            patents,
            classes,
            "citing_patent_id\tcited_patent_id\n",
            "patent_id\tagent_id\tagent_kind\n",
            CpcLevel::Cpc4,
        )
        .unwrap();
        assert_eq!(corpus.patent_count(), 1);
        assert_eq!(summary.drops.patents_missing_date, 1);
        assert_eq!(summary.drops.classes_unknown_patent, 1);
    }

    #[test]
    fn unparsable_date_is_hard_error_naming_file_and_line() {
        let patents = "patent_id\tfiling_date\nP1\t1990-01-31\nP2\t31/01/1990\n";
        let err = load(
            patents,
            CLASSES,
            CITATIONS,
            AGENTS,
            CpcLevel::Cpc4,
        )
        .unwrap_err();
        match err {
            CorpusError::Date { line, value, .. } => {
                assert_eq!(line, 3);
                assert_eq!(value, "31/01/1990");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_header_is_hard_error() {
        let err = load(
            "id\tdate\nP1\t1990-01-01\n",
            CLASSES,
            CITATIONS,
            AGENTS,
            CpcLevel::Cpc4,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::Header { .. }));
    }

    #[test]
    fn malformed_cpc_code_dropped_with_count() {
        let classes = format!("{CLASSES}P1\t7A04\n");
        let (_, summary) = load(PATENTS, &classes, CITATIONS, AGENTS, CpcLevel::Cpc4).unwrap();
        assert_eq!(summary.drops.classes_malformed_code, 1);
    }

    #[test]
    fn patents_without_any_class_dropped() {
        let classes = "patent_id\tcpc_code\nP1\tH04L 1/00\nP2\tH04L 1/00\n";
        let (corpus, summary) = load(PATENTS, classes, CITATIONS, AGENTS, CpcLevel::Cpc4).unwrap();
        assert_eq!(corpus.patent_count(), 2);
        assert_eq!(summary.drops.patents_without_class, 1);
        // P3's agent row now references a missing patent.
        assert_eq!(summary.drops.agents_unknown_patent, 1);
    }

    #[test]
    fn duplicate_rows_deduplicated_with_counts() {
        let patents = "patent_id\tfiling_date\nP1\t1990-01-31\nP1\t1990-01-31\n";
        let classes = "patent_id\tcpc_code\nP1\tH04L 1/00\nP1\tH04L 9/99\n";
        let citations = "citing_patent_id\tcited_patent_id\nP1\tQ1\nP1\tQ1\n";
        let agents =
            "patent_id\tagent_id\tagent_kind\nP1\ti1\tinventor\nP1\ti1\tinventor\n";
        let (corpus, summary) = load(patents, classes, citations, agents, CpcLevel::Cpc4).unwrap();
        assert_eq!(corpus.patent_count(), 1);
        assert_eq!(summary.drops.patents_duplicate_rows, 1);
        // Two raw codes truncate to the same subclass.
        assert_eq!(summary.drops.classes_duplicate_rows, 1);
        assert_eq!(summary.drops.citations_duplicate_rows, 1);
        assert_eq!(summary.drops.agents_duplicate_rows, 1);
    }

    #[test]
    fn conflicting_duplicate_patent_rows_error() {
        let patents = "patent_id\tfiling_date\nP1\t1990-01-31\nP1\t1991-01-31\n";
        let err = load(patents, CLASSES, CITATIONS, AGENTS, CpcLevel::Cpc4).unwrap_err();
        assert!(matches!(err, CorpusError::Row { line: 3, .. }));
    }

    #[test]
    fn unknown_agent_kind_is_hard_error() {
        let agents = "patent_id\tagent_id\tagent_kind\nP1\ti1\towner\n";
        let err = load(PATENTS, CLASSES, CITATIONS, agents, CpcLevel::Cpc4).unwrap_err();
        assert!(matches!(err, CorpusError::Row { line: 2, .. }));
    }

    #[test]
    fn min_patents_per_class_filter() {
        // A01B appears on two patents, H04L on one.
        let classes = "patent_id\tcpc_code\nP1\tH04L 1/00\nP2\tA01B 1/00\nP3\tA01B 2/00\n";
        let opts = IngestOptions {
            min_patents_per_class: 2,
        };
        let (corpus, summary) = load_corpus_from_readers(
            Cursor::new(PATENTS.to_string()),
            Cursor::new(classes.to_string()),
            Cursor::new(CITATIONS.to_string()),
            Cursor::new(AGENTS.to_string()),
            &paths(),
            CpcLevel::Cpc4,
            &opts,
        )
        .unwrap();
        assert_eq!(corpus.class_count(), 1);
        assert_eq!(corpus.vocabulary()[0].as_str(), "A01B");
        assert_eq!(summary.drops.classes_filtered_low_support, 1);
        assert_eq!(summary.drops.patents_below_class_filter, 1); // P1
    }

    #[test]
    fn cpc3_vocabulary_is_prefix_closure_of_cpc4() {
        let (c3, _) = load(PATENTS, CLASSES, CITATIONS, AGENTS, CpcLevel::Cpc3).unwrap();
        let (c4, _) = load(PATENTS, CLASSES, CITATIONS, AGENTS, CpcLevel::Cpc4).unwrap();
        assert!(c3.class_count() <= c4.class_count());
        for class in c4.vocabulary() {
            let prefix = ClassId::new_unchecked(class.as_str()[..3].to_string());
            assert!(c3.class_index(&prefix).is_some());
        }
    }

    #[test]
    fn reload_is_deterministic() {
        let (a, _) = load(PATENTS, CLASSES, CITATIONS, AGENTS, CpcLevel::Cpc4).unwrap();
        let (b, _) = load(PATENTS, CLASSES, CITATIONS, AGENTS, CpcLevel::Cpc4).unwrap();
        assert_eq!(a.digest_hex(), b.digest_hex());
        assert_eq!(a.canonical_payload(), b.canonical_payload());
    }
}
