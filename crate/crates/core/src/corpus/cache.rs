//! Binary corpus cache.
//!
//! Layout: magic, source-files digest (hex string), payload length, the
//! canonical corpus payload, and a SHA-256 of the payload. The payload is
//! the same byte stream the corpus digest is computed from, so a cache file
//! written twice from the same inputs is byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest as _, Sha256};

use super::{
    date_from_epoch_days, AgentId, AgentKind, ClassId, Corpus, CorpusError, CpcLevel,
    PatentRecord,
};

const MAGIC: &[u8; 8] = b"TSPCCH01";

#[derive(Debug, Clone)]
pub struct CacheMeta {
    pub source_digest: String,
    pub corpus_digest: String,
}

pub fn write_cache(
    corpus: &Corpus,
    source_digest: &str,
    path: &Path,
) -> Result<CacheMeta, CorpusError> {
    let payload = corpus.canonical_payload();
    let mut out = Vec::with_capacity(payload.len() + 128);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(source_digest.len() as u32).to_le_bytes());
    out.extend_from_slice(source_digest.as_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&Sha256::digest(&payload));
    fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(CacheMeta {
        source_digest: source_digest.to_string(),
        corpus_digest: corpus.digest_hex(),
    })
}

pub fn read_cache(path: &Path) -> Result<(Corpus, CacheMeta), CorpusError> {
    let data = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let corrupt = |reason: &str| CorpusError::Cache {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };

    let mut r = Reader { data: &data, pos: 0 };
    if r.take(8).ok_or_else(|| corrupt("truncated magic"))? != MAGIC {
        return Err(corrupt("bad magic (not a corpus cache)"));
    }
    let source_digest = {
        let len = r.u32().ok_or_else(|| corrupt("truncated source digest"))? as usize;
        let bytes = r.take(len).ok_or_else(|| corrupt("truncated source digest"))?;
        String::from_utf8(bytes.to_vec()).map_err(|_| corrupt("source digest not utf-8"))?
    };
    let payload_len = r.u64().ok_or_else(|| corrupt("truncated payload length"))? as usize;
    let payload = r
        .take(payload_len)
        .ok_or_else(|| corrupt("truncated payload"))?;
    let stored_hash = r.take(32).ok_or_else(|| corrupt("truncated checksum"))?;
    if Sha256::digest(payload).as_slice() != stored_hash {
        return Err(corrupt("payload checksum mismatch"));
    }

    let corpus = parse_payload(payload).map_err(|reason| corrupt(&reason))?;
    let meta = CacheMeta {
        source_digest,
        corpus_digest: corpus.digest_hex(),
    };
    Ok((corpus, meta))
}

fn parse_payload(payload: &[u8]) -> Result<Corpus, String> {
    let mut r = Reader {
        data: payload,
        pos: 0,
    };
    let level = match r.u8().ok_or("truncated level")? {
        3 => CpcLevel::Cpc3,
        4 => CpcLevel::Cpc4,
        other => return Err(format!("unknown level byte {other}")),
    };

    let n_patents = r.u32().ok_or("truncated patent count")? as usize;
    let mut patents = Vec::with_capacity(n_patents);
    for _ in 0..n_patents {
        let id = r.string().ok_or("truncated patent id")?;
        let days = r.i32().ok_or("truncated filing date")?;
        let filing_date = date_from_epoch_days(days).ok_or("filing date out of range")?;
        let classes = r.u32_vec().ok_or("truncated class list")?;
        let references = r.u32_vec().ok_or("truncated reference list")?;
        patents.push(PatentRecord {
            id,
            filing_date,
            classes,
            references,
        });
    }

    let n_classes = r.u32().ok_or("truncated vocabulary count")? as usize;
    let mut vocabulary = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        vocabulary.push(ClassId::new_unchecked(
            r.string().ok_or("truncated class code")?,
        ));
    }

    let n_cited = r.u32().ok_or("truncated cited-key count")? as usize;
    let mut cited_keys = Vec::with_capacity(n_cited);
    for _ in 0..n_cited {
        cited_keys.push(r.string().ok_or("truncated cited key")?);
    }

    let n_agents = r.u32().ok_or("truncated agent count")? as usize;
    let mut agent_links = BTreeMap::new();
    for _ in 0..n_agents {
        let kind = match r.u8().ok_or("truncated agent kind")? {
            0 => AgentKind::Inventor,
            1 => AgentKind::Assignee,
            other => return Err(format!("unknown agent kind byte {other}")),
        };
        let id = r.string().ok_or("truncated agent id")?;
        let indices = r.u32_vec().ok_or("truncated agent patent list")?;
        agent_links.insert(AgentId::new(kind, id), indices);
    }

    if !r.at_end() {
        return Err("trailing bytes after payload".to_string());
    }

    if !vocabulary.windows(2).all(|w| w[0] < w[1]) {
        return Err("vocabulary not sorted".to_string());
    }
    if !cited_keys.windows(2).all(|w| w[0] < w[1]) {
        return Err("cited keys not sorted".to_string());
    }
    if !patents.windows(2).all(|w| w[0].id < w[1].id) {
        return Err("patents not sorted by id".to_string());
    }
    for p in &patents {
        if p.classes.is_empty() {
            return Err(format!("patent {:?} has no classes", p.id));
        }
        if p.classes.iter().any(|&c| c as usize >= vocabulary.len()) {
            return Err(format!("patent {:?} has out-of-range class index", p.id));
        }
        if p.references.iter().any(|&k| k as usize >= cited_keys.len()) {
            return Err(format!("patent {:?} has out-of-range reference key", p.id));
        }
    }
    for (agent, indices) in &agent_links {
        if indices.iter().any(|&i| i as usize >= patents.len()) {
            return Err(format!("agent {agent} links out-of-range patent index"));
        }
    }

    Ok(Corpus::from_parts(
        level,
        patents,
        vocabulary,
        cited_keys,
        agent_links,
    ))
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        if end > self.data.len() {
            return None;
        }
        let slice = &self.data[self.pos..end];
        self.pos = end;
        Some(slice)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn i32(&mut self) -> Option<i32> {
        self.take(4).map(|b| i32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self) -> Option<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).ok()
    }

    fn u32_vec(&mut self) -> Option<Vec<u32>> {
        let len = self.u32()? as usize;
        let mut out = Vec::with_capacity(len.min(1 << 20));
        for _ in 0..len {
            out.push(self.u32()?);
        }
        Some(out)
    }

    fn at_end(&self) -> bool {
        self.pos == self.data.len()
    }
}
