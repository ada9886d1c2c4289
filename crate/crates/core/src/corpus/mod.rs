//! Normalized patent corpus: patent records, CPC class vocabulary, citation
//! reference keys, and agent-to-patent links.
//!
//! A [`Corpus`] is immutable after construction and safe to share read-only
//! across threads. Construction canonicalizes everything (patents sorted by
//! id, vocabulary and reference keys sorted and deduplicated), so the same
//! input rows always produce the same corpus and the same content digest.

mod cache;
mod ingest;

pub use cache::{read_cache, write_cache, CacheMeta};
pub use ingest::{
    load_corpus, load_corpus_from_readers, CorpusPaths, IngestOptions, IngestSummary, RowCounts,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed header: expected {expected:?}, found {found:?}")]
    Header {
        path: PathBuf,
        expected: &'static str,
        found: String,
    },
    #[error("{path}:{line}: {reason}")]
    Row {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: unparsable filing date {value:?} (expected YYYY-MM-DD)")]
    Date {
        path: PathBuf,
        line: usize,
        value: String,
    },
    #[error("malformed CPC code {code:?} for level {level}")]
    MalformedCpc { code: String, level: CpcLevel },
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("corpus construction failed: {0}")]
    Build(String),
    #[error("corpus cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },
}

/// CPC truncation level: 3-character classes ("H04") or 4-character
/// subclasses ("H04L").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CpcLevel {
    Cpc3,
    Cpc4,
}

impl CpcLevel {
    pub fn prefix_len(self) -> usize {
        match self {
            CpcLevel::Cpc3 => 3,
            CpcLevel::Cpc4 => 4,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            CpcLevel::Cpc3 => "cpc3",
            CpcLevel::Cpc4 => "cpc4",
        }
    }
}

impl fmt::Display for CpcLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CpcLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cpc3" => Ok(CpcLevel::Cpc3),
            "cpc4" => Ok(CpcLevel::Cpc4),
            other => Err(format!("unknown CPC level {other:?} (expected cpc3 or cpc4)")),
        }
    }
}

/// A truncated, uppercased CPC prefix at a fixed level.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(String);

impl ClassId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub(crate) fn new_unchecked(code: String) -> Self {
        ClassId(code)
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Truncate a raw CPC symbol to its class (CPC3) or subclass (CPC4) prefix.
///
/// Whitespace inside the symbol is ignored, the prefix is uppercased, and the
/// result must match the level's pattern: a section letter, two digits, and
/// (for CPC4) a subclass letter.
pub fn truncate_cpc(raw: &str, level: CpcLevel) -> Result<ClassId, CorpusError> {
    let take = level.prefix_len();
    let mut code = String::with_capacity(take);
    for ch in raw.chars().filter(|c| !c.is_whitespace()).take(take) {
        code.extend(ch.to_uppercase());
    }
    let bytes = code.as_bytes();
    let well_formed = bytes.len() == take
        && bytes[0].is_ascii_uppercase()
        && bytes[1].is_ascii_digit()
        && bytes[2].is_ascii_digit()
        && (take == 3 || bytes[3].is_ascii_uppercase());
    if !well_formed {
        return Err(CorpusError::MalformedCpc {
            code: raw.to_string(),
            level,
        });
    }
    Ok(ClassId(code))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Inventor,
    Assignee,
}

impl AgentKind {
    pub const ALL: [AgentKind; 2] = [AgentKind::Inventor, AgentKind::Assignee];

    pub fn id(self) -> &'static str {
        match self {
            AgentKind::Inventor => "inventor",
            AgentKind::Assignee => "assignee",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inventor" => Ok(AgentKind::Inventor),
            "assignee" => Ok(AgentKind::Assignee),
            other => Err(format!(
                "unknown agent kind {other:?} (expected inventor or assignee)"
            )),
        }
    }
}

/// A disambiguated inventor or assignee identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId {
    pub kind: AgentKind,
    pub id: String,
}

impl AgentId {
    pub fn new(kind: AgentKind, id: impl Into<String>) -> Self {
        AgentId {
            kind,
            id: id.into(),
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.id)
    }
}

/// One patent: filing date, class assignments (as vocabulary indices) and
/// backward references (as cited-key indices into the owning corpus).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatentRecord {
    id: String,
    filing_date: NaiveDate,
    classes: Vec<u32>,
    references: Vec<u32>,
}

impl PatentRecord {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn filing_date(&self) -> NaiveDate {
        self.filing_date
    }

    /// Sorted indices into [`Corpus::vocabulary`].
    pub fn class_indices(&self) -> &[u32] {
        &self.classes
    }

    /// Sorted indices into the corpus cited-key table.
    pub fn reference_keys(&self) -> &[u32] {
        &self.references
    }
}

/// Immutable, canonicalized patent corpus.
#[derive(Debug, Clone)]
pub struct Corpus {
    level: CpcLevel,
    patents: Vec<PatentRecord>,
    id_index: HashMap<String, u32>,
    vocabulary: Vec<ClassId>,
    cited_keys: Vec<String>,
    cited_resolution: Vec<Option<u32>>,
    agent_links: BTreeMap<AgentId, Vec<u32>>,
    digest: [u8; 32],
}

impl Corpus {
    pub fn level(&self) -> CpcLevel {
        self.level
    }

    pub fn patents(&self) -> &[PatentRecord] {
        &self.patents
    }

    pub fn patent_count(&self) -> usize {
        self.patents.len()
    }

    pub fn patent_index(&self, id: &str) -> Option<u32> {
        self.id_index.get(id).copied()
    }

    /// Sorted, duplicate-free class vocabulary observed in the corpus.
    pub fn vocabulary(&self) -> &[ClassId] {
        &self.vocabulary
    }

    pub fn class_count(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn class(&self, idx: u32) -> &ClassId {
        &self.vocabulary[idx as usize]
    }

    pub fn class_index(&self, class: &ClassId) -> Option<u32> {
        self.vocabulary
            .binary_search(class)
            .ok()
            .map(|i| i as u32)
    }

    /// Distinct cited patent-id tokens observed across all reference lists,
    /// sorted. Tokens may or may not resolve to corpus patents.
    pub fn cited_keys(&self) -> &[String] {
        &self.cited_keys
    }

    pub fn cited_token(&self, key: u32) -> &str {
        &self.cited_keys[key as usize]
    }

    /// Patent index for a cited key when the cited patent is in the corpus.
    pub fn resolve_cited(&self, key: u32) -> Option<u32> {
        self.cited_resolution[key as usize]
    }

    pub fn agents(&self, kind: AgentKind) -> impl Iterator<Item = &AgentId> {
        self.agent_links
            .keys()
            .filter(move |agent| agent.kind == kind)
    }

    pub fn agent_count(&self, kind: AgentKind) -> usize {
        self.agents(kind).count()
    }

    /// Sorted patent indices linked to an agent.
    pub fn agent_patents(&self, agent: &AgentId) -> Result<&[u32], CorpusError> {
        self.agent_links
            .get(agent)
            .map(Vec::as_slice)
            .ok_or_else(|| CorpusError::UnknownAgent(agent.clone()))
    }

    /// Number of patents carrying each class, indexed like the vocabulary.
    pub fn class_patent_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.vocabulary.len()];
        for patent in &self.patents {
            for &class in &patent.classes {
                counts[class as usize] += 1;
            }
        }
        counts
    }

    pub fn digest_hex(&self) -> String {
        crate::digest::hex(&self.digest)
    }

    /// First-entry date per class over an agent's patents, sorted ascending
    /// by date with ties broken by class code.
    pub fn build_agent_portfolio(
        &self,
        agent: &AgentId,
    ) -> Result<Vec<(ClassId, NaiveDate)>, CorpusError> {
        Ok(self
            .portfolio_indices(agent)?
            .into_iter()
            .map(|(class, date)| (self.vocabulary[class as usize].clone(), date))
            .collect())
    }

    /// Index-valued variant of [`Corpus::build_agent_portfolio`]. Class
    /// indices follow vocabulary order, so date ties sort by class code.
    pub(crate) fn portfolio_indices(
        &self,
        agent: &AgentId,
    ) -> Result<Vec<(u32, NaiveDate)>, CorpusError> {
        let patents = self.agent_patents(agent)?;
        let mut first_entry: BTreeMap<u32, NaiveDate> = BTreeMap::new();
        for &pi in patents {
            let patent = &self.patents[pi as usize];
            for &class in &patent.classes {
                first_entry
                    .entry(class)
                    .and_modify(|d| {
                        if patent.filing_date < *d {
                            *d = patent.filing_date;
                        }
                    })
                    .or_insert(patent.filing_date);
            }
        }
        let mut entries: Vec<(u32, NaiveDate)> = first_entry.into_iter().collect();
        entries.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
        Ok(entries)
    }

    /// Canonical byte serialization. Equal corpora produce equal bytes; the
    /// content digest and the binary cache payload are both derived from it.
    pub(crate) fn canonical_payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(self.level.prefix_len() as u8);
        write_u32(&mut out, self.patents.len() as u32);
        for patent in &self.patents {
            write_str(&mut out, &patent.id);
            write_i32(&mut out, days_from_epoch(patent.filing_date));
            write_u32(&mut out, patent.classes.len() as u32);
            for &c in &patent.classes {
                write_u32(&mut out, c);
            }
            write_u32(&mut out, patent.references.len() as u32);
            for &r in &patent.references {
                write_u32(&mut out, r);
            }
        }
        write_u32(&mut out, self.vocabulary.len() as u32);
        for class in &self.vocabulary {
            write_str(&mut out, class.as_str());
        }
        write_u32(&mut out, self.cited_keys.len() as u32);
        for token in &self.cited_keys {
            write_str(&mut out, token);
        }
        write_u32(&mut out, self.agent_links.len() as u32);
        for (agent, patents) in &self.agent_links {
            out.push(match agent.kind {
                AgentKind::Inventor => 0,
                AgentKind::Assignee => 1,
            });
            write_str(&mut out, &agent.id);
            write_u32(&mut out, patents.len() as u32);
            for &pi in patents {
                write_u32(&mut out, pi);
            }
        }
        out
    }

    pub(crate) fn from_parts(
        level: CpcLevel,
        patents: Vec<PatentRecord>,
        vocabulary: Vec<ClassId>,
        cited_keys: Vec<String>,
        agent_links: BTreeMap<AgentId, Vec<u32>>,
    ) -> Corpus {
        let id_index = patents
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.clone(), i as u32))
            .collect::<HashMap<_, _>>();
        let cited_resolution = cited_keys
            .iter()
            .map(|token| id_index.get(token).copied())
            .collect();
        let mut corpus = Corpus {
            level,
            patents,
            id_index,
            vocabulary,
            cited_keys,
            cited_resolution,
            agent_links,
            digest: [0; 32],
        };
        let digest = Sha256::digest(corpus.canonical_payload());
        corpus.digest.copy_from_slice(&digest);
        corpus
    }
}

fn days_from_epoch(date: NaiveDate) -> i32 {
    (date - NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()).num_days() as i32
}

pub(crate) fn date_from_epoch_days(days: i32) -> Option<NaiveDate> {
    NaiveDate::from_ymd_opt(1970, 1, 1).unwrap().checked_add_signed(chrono::Duration::days(days as i64))
}

fn write_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn write_i32(out: &mut Vec<u8>, v: i32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    write_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

/// Assembles a validated [`Corpus`] from already-normalized parts. The TSV
/// loader and the synthetic generators both feed this.
#[derive(Debug)]
pub struct CorpusBuilder {
    level: CpcLevel,
    patents: BTreeMap<String, PendingPatent>,
    agents: BTreeMap<AgentId, BTreeSet<String>>,
}

#[derive(Debug)]
struct PendingPatent {
    filing_date: NaiveDate,
    classes: BTreeSet<ClassId>,
    references: BTreeSet<String>,
}

impl CorpusBuilder {
    pub fn new(level: CpcLevel) -> Self {
        CorpusBuilder {
            level,
            patents: BTreeMap::new(),
            agents: BTreeMap::new(),
        }
    }

    pub fn level(&self) -> CpcLevel {
        self.level
    }

    pub fn contains_patent(&self, id: &str) -> bool {
        self.patents.contains_key(id)
    }

    /// Register a patent with its full class set. Classes must already be
    /// truncated to the builder's level.
    pub fn add_patent(
        &mut self,
        id: impl Into<String>,
        filing_date: NaiveDate,
        classes: impl IntoIterator<Item = ClassId>,
    ) -> Result<&mut Self, CorpusError> {
        let id = id.into();
        if id.is_empty() {
            return Err(CorpusError::Build("empty patent id".into()));
        }
        let classes: BTreeSet<ClassId> = classes.into_iter().collect();
        if classes.is_empty() {
            return Err(CorpusError::Build(format!("patent {id:?} has no classes")));
        }
        for class in &classes {
            if class.as_str().len() != self.level.prefix_len() {
                return Err(CorpusError::Build(format!(
                    "patent {id:?}: class {class} does not match level {}",
                    self.level
                )));
            }
        }
        let prior = self.patents.insert(
            id.clone(),
            PendingPatent {
                filing_date,
                classes,
                references: BTreeSet::new(),
            },
        );
        if prior.is_some() {
            return Err(CorpusError::Build(format!("duplicate patent id {id:?}")));
        }
        Ok(self)
    }

    /// Record a backward reference. The cited token is kept verbatim whether
    /// or not it names a corpus patent.
    pub fn add_reference(
        &mut self,
        citing: &str,
        cited: impl Into<String>,
    ) -> Result<&mut Self, CorpusError> {
        let cited = cited.into();
        if cited.is_empty() {
            return Err(CorpusError::Build(format!(
                "patent {citing:?}: empty cited id"
            )));
        }
        let patent = self.patents.get_mut(citing).ok_or_else(|| {
            CorpusError::Build(format!("reference from unknown patent {citing:?}"))
        })?;
        patent.references.insert(cited);
        Ok(self)
    }

    pub fn add_agent_link(
        &mut self,
        agent: AgentId,
        patent_id: &str,
    ) -> Result<&mut Self, CorpusError> {
        if agent.id.is_empty() {
            return Err(CorpusError::Build("empty agent id".into()));
        }
        if !self.patents.contains_key(patent_id) {
            return Err(CorpusError::Build(format!(
                "agent {agent} linked to unknown patent {patent_id:?}"
            )));
        }
        self.agents
            .entry(agent)
            .or_default()
            .insert(patent_id.to_string());
        Ok(self)
    }

    pub fn build(self) -> Result<Corpus, CorpusError> {
        let mut vocabulary: Vec<ClassId> = self
            .patents
            .values()
            .flat_map(|p| p.classes.iter().cloned())
            .collect();
        vocabulary.sort();
        vocabulary.dedup();

        let mut cited_keys: Vec<String> = self
            .patents
            .values()
            .flat_map(|p| p.references.iter().cloned())
            .collect();
        cited_keys.sort();
        cited_keys.dedup();

        let class_index: HashMap<&str, u32> = vocabulary
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i as u32))
            .collect();
        let cited_index: HashMap<&str, u32> = cited_keys
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
            .collect();

        // BTreeMap iteration gives patents sorted by id.
        let patents: Vec<PatentRecord> = self
            .patents
            .iter()
            .map(|(id, pending)| {
                let classes: Vec<u32> = pending
                    .classes
                    .iter()
                    .map(|c| class_index[c.as_str()])
                    .collect();
                let references: Vec<u32> = pending
                    .references
                    .iter()
                    .map(|t| cited_index[t.as_str()])
                    .collect();
                PatentRecord {
                    id: id.clone(),
                    filing_date: pending.filing_date,
                    classes,
                    references,
                }
            })
            .collect();

        let patent_index: HashMap<&str, u32> = patents
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.as_str(), i as u32))
            .collect();
        let agent_links: BTreeMap<AgentId, Vec<u32>> = self
            .agents
            .into_iter()
            .map(|(agent, ids)| {
                let mut indices: Vec<u32> =
                    ids.iter().map(|id| patent_index[id.as_str()]).collect();
                indices.sort_unstable();
                (agent, indices)
            })
            .collect();

        Ok(Corpus::from_parts(
            self.level,
            patents,
            vocabulary,
            cited_keys,
            agent_links,
        ))
    }
}
