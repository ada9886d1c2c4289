//! Deterministic synthetic corpora for calibration, recovery and scale
//! testing. Everything is seeded ChaCha8, so a given seed reproduces the
//! same rows on any platform.

use std::fmt::Write as _;
use std::fs;
use std::io::Cursor;
use std::path::Path;

use chrono::NaiveDate;
use rand::Rng;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    load_corpus_from_readers, ClassId, Corpus, CorpusError, CorpusPaths, CpcLevel, IngestOptions,
    IngestSummary,
};
use crate::measures::{
    build_features, DataChoice, MeasureCombo, MeasureKind, ProximityMatrix,
};

/// Valid CPC3-shaped code for a dense class index ("A00", "A01", ...).
pub fn class_code3(i: usize) -> String {
    assert!(i < 2600, "class index out of range");
    format!("{}{:02}", (b'A' + (i / 100) as u8) as char, i % 100)
}

/// Valid CPC4-shaped code for a dense class index ("A00Z", "A01Z", ...).
pub fn class_code4(i: usize) -> String {
    assert!(i < 2600, "class index out of range");
    format!("{}{:02}Z", (b'A' + (i / 100) as u8) as char, i % 100)
}

/// Raw TSV rows for the four corpus input files.
#[derive(Debug, Clone)]
pub struct TsvBundle {
    pub level: CpcLevel,
    /// (patent_id, filing_date)
    pub patents: Vec<(String, String)>,
    /// (patent_id, cpc_code)
    pub classes: Vec<(String, String)>,
    /// (citing_patent_id, cited_patent_id)
    pub citations: Vec<(String, String)>,
    /// (patent_id, agent_id, agent_kind)
    pub agents: Vec<(String, String, String)>,
}

impl TsvBundle {
    pub fn empty(level: CpcLevel) -> Self {
        TsvBundle {
            level,
            patents: Vec::new(),
            classes: Vec::new(),
            citations: Vec::new(),
            agents: Vec::new(),
        }
    }

    pub fn patents_tsv(&self) -> String {
        let mut out = String::from("patent_id\tfiling_date\n");
        for (id, date) in &self.patents {
            let _ = writeln!(out, "{id}\t{date}");
        }
        out
    }

    pub fn classes_tsv(&self) -> String {
        let mut out = String::from("patent_id\tcpc_code\n");
        for (id, code) in &self.classes {
            let _ = writeln!(out, "{id}\t{code}");
        }
        out
    }

    pub fn citations_tsv(&self) -> String {
        let mut out = String::from("citing_patent_id\tcited_patent_id\n");
        for (citing, cited) in &self.citations {
            let _ = writeln!(out, "{citing}\t{cited}");
        }
        out
    }

    pub fn agents_tsv(&self) -> String {
        let mut out = String::from("patent_id\tagent_id\tagent_kind\n");
        for (id, agent, kind) in &self.agents {
            let _ = writeln!(out, "{id}\t{agent}\t{kind}");
        }
        out
    }

    /// Write the four files under `dir` with their conventional names.
    pub fn write(&self, dir: &Path) -> std::io::Result<CorpusPaths> {
        let paths = CorpusPaths::in_dir(dir);
        fs::write(&paths.patents, self.patents_tsv())?;
        fs::write(&paths.classes, self.classes_tsv())?;
        fs::write(&paths.citations, self.citations_tsv())?;
        fs::write(&paths.agents, self.agents_tsv())?;
        Ok(paths)
    }

    /// Run the regular ingestion over the in-memory rows.
    pub fn build_corpus(&self) -> Result<(Corpus, IngestSummary), CorpusError> {
        load_corpus_from_readers(
            Cursor::new(self.patents_tsv()),
            Cursor::new(self.classes_tsv()),
            Cursor::new(self.citations_tsv()),
            Cursor::new(self.agents_tsv()),
            &CorpusPaths::in_dir(Path::new("synthetic")),
            self.level,
            &IngestOptions::default(),
        )
    }
}

fn date_string(base: NaiveDate, offset_days: i64) -> String {
    (base + chrono::Duration::days(offset_days))
        .format("%Y-%m-%d")
        .to_string()
}

/// Corpus whose agents enter uniformly random classes: the null model for
/// calibration. Every class gets one anchor patent (fixing the vocabulary);
/// each agent enters `min_entries..=max_entries` distinct classes on
/// consecutive dates through single-class carrier patents.
pub fn uniform_entry_bundle(
    n_classes: usize,
    n_agents: usize,
    min_entries: usize,
    max_entries: usize,
    seed: u64,
) -> TsvBundle {
    assert!(min_entries <= max_entries && max_entries <= n_classes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bundle = TsvBundle::empty(CpcLevel::Cpc3);
    let anchor_date = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap();
    for c in 0..n_classes {
        let pid = format!("V{c:04}");
        bundle.patents.push((pid.clone(), date_string(anchor_date, 0)));
        bundle.classes.push((pid, class_code3(c)));
    }
    let entry_base = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    for a in 0..n_agents {
        let agent = format!("agent{a:05}");
        let entries = rng.random_range(min_entries..=max_entries);
        let mut picked: Vec<usize> = Vec::with_capacity(entries);
        while picked.len() < entries {
            let c = rng.random_range(0..n_classes);
            if !picked.contains(&c) {
                picked.push(c);
            }
        }
        for (step, &c) in picked.iter().enumerate() {
            let pid = format!("A{a:05}E{step:02}");
            bundle
                .patents
                .push((pid.clone(), date_string(entry_base, step as i64)));
            bundle.classes.push((pid.clone(), class_code3(c)));
            bundle
                .agents
                .push((pid, agent.clone(), "inventor".to_string()));
        }
    }
    bundle
}

/// Uniformly random symmetric score matrix over valid CPC3 class codes.
pub fn random_matrix(n_classes: usize, seed: u64) -> ProximityMatrix {
    let classes: Vec<ClassId> = (0..n_classes)
        .map(|i| crate::corpus::truncate_cpc(&class_code3(i), CpcLevel::Cpc3).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = vec![0.0f64; n_classes * n_classes];
    for i in 0..n_classes {
        for j in (i + 1)..n_classes {
            scores[i * n_classes + j] = rng.random();
        }
    }
    ProximityMatrix::from_pair_scores(
        classes,
        DataChoice::RefPat,
        MeasureKind::Jaccard,
        |i, j| scores[i * n_classes + j],
    )
}

/// Parameters for [`planted_bundle`].
#[derive(Debug, Clone, Copy)]
pub struct PlantedParams {
    pub n_classes: usize,
    /// Prior-art token stride between neighbouring classes on the ring.
    pub stride: usize,
    /// Base window length; per-class jitter keeps the measures from tying.
    pub window: usize,
    /// Background patents per class.
    pub background_per_class: usize,
    /// Two-class noise patents feeding the co-classification choices.
    pub noise_patents: usize,
    pub n_agents: usize,
    pub entries_per_agent: usize,
    /// Preference sharpness: entry probability ∝ (summed proximity)^beta.
    pub beta: f64,
    pub seed: u64,
}

impl Default for PlantedParams {
    fn default() -> Self {
        PlantedParams {
            n_classes: 60,
            stride: 16,
            window: 120,
            background_per_class: 8,
            noise_patents: 250,
            n_agents: 150,
            entries_per_agent: 12,
            beta: 3.0,
            seed: 20170,
        }
    }
}

/// Synthetic corpus whose agents diversify along the class-to-patent
/// reference Jaccard gradient.
///
/// Classes sit on a ring; each class's background patents cite an
/// overlapping window of out-of-corpus prior-art tokens, so reference-based
/// proximity decays with ring distance while co-classification signal stays
/// random noise. Agent entries are then sampled with probability
/// proportional to (summed planted proximity)^beta through reference-free
/// carrier patents, which leaves the planted matrix untouched.
///
/// Returns the bundle and the planted combination (`ref_pat_jaccard`).
pub fn planted_bundle(params: &PlantedParams) -> (TsvBundle, MeasureCombo) {
    let planted = MeasureCombo::new(DataChoice::RefPat, MeasureKind::Jaccard);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut bundle = TsvBundle::empty(CpcLevel::Cpc3);
    let n = params.n_classes;
    let token_space = n * params.stride;
    let background_date = NaiveDate::from_ymd_opt(1976, 1, 1).unwrap();

    for class in 0..n {
        let window_len = params.window + (class % 4) * (params.stride / 4);
        // Every third class is "count-heavy": five times the patents, each
        // additionally citing a 12-token private set. That concentrates a
        // large share of citation counts (and probability mass) on a tiny
        // support, which pushes the count-based measures (cosine, pearson,
        // entropy) away from the support-overlap ranking Jaccard sees — the
        // union only grows by 12, so the planted Jaccard gradient itself is
        // barely touched.
        let heavy = class % 3 == 0;
        let patents = if heavy {
            params.background_per_class * 5
        } else {
            params.background_per_class
        };
        // Rotating chunks; coverage per window token stays ~5 either way.
        let chunk_len = if heavy {
            window_len / 8
        } else {
            (window_len * 5) / 8
        };
        for b in 0..patents {
            let pid = format!("B{class:03}P{b:02}");
            bundle
                .patents
                .push((pid.clone(), date_string(background_date, class as i64)));
            bundle.classes.push((pid.clone(), class_code3(class)));
            let offset = b * window_len / patents;
            for t in 0..chunk_len {
                let pos = (class * params.stride + (offset + t) % window_len) % token_space;
                bundle.citations.push((pid.clone(), format!("X{pos:06}")));
            }
            if heavy {
                for t in 0..12 {
                    bundle.citations.push((pid.clone(), format!("Y{class:03}T{t:02}")));
                }
            }
        }
    }

    let noise_date = NaiveDate::from_ymd_opt(1977, 1, 1).unwrap();
    for k in 0..params.noise_patents {
        let pid = format!("N{k:05}");
        let c1 = rng.random_range(0..n);
        let mut c2 = rng.random_range(0..n);
        while c2 == c1 {
            c2 = rng.random_range(0..n);
        }
        bundle
            .patents
            .push((pid.clone(), date_string(noise_date, k as i64 % 300)));
        bundle.classes.push((pid.clone(), class_code3(c1)));
        bundle.classes.push((pid, class_code3(c2)));
    }

    // Plant entries against the matrix of the background corpus. Carrier
    // patents have no references and are never cited, so the reference-based
    // matrices of the final corpus are identical to the planted one.
    let (background, _) = bundle.build_corpus().expect("background corpus is valid");
    let features = build_features(&background, planted.data_choice);
    let matrix = ProximityMatrix::compute(&features, planted.measure, 1e-9)
        .expect("planted matrix computes");

    let entry_base = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    for a in 0..params.n_agents {
        let agent = format!("agent{a:04}");
        let mut entered: Vec<usize> = vec![rng.random_range(0..n)];
        while entered.len() < params.entries_per_agent {
            let mut weights = Vec::with_capacity(n);
            let mut total = 0.0f64;
            for c in 0..n {
                if entered.contains(&c) {
                    weights.push(0.0);
                    continue;
                }
                let summed: f64 = entered.iter().map(|&p| matrix.score(c, p)).sum();
                let w = (summed + 1e-12).powf(params.beta);
                weights.push(w);
                total += w;
            }
            let mut draw = rng.random::<f64>() * total;
            let mut chosen = usize::MAX;
            for (c, &w) in weights.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                draw -= w;
                if draw <= 0.0 {
                    chosen = c;
                    break;
                }
            }
            if chosen == usize::MAX {
                chosen = (0..n).rev().find(|c| !entered.contains(c)).unwrap();
            }
            entered.push(chosen);
        }
        for (step, &c) in entered.iter().enumerate() {
            let pid = format!("C{a:04}E{step:02}");
            bundle
                .patents
                .push((pid.clone(), date_string(entry_base, step as i64)));
            bundle.classes.push((pid.clone(), class_code3(c)));
            bundle
                .agents
                .push((pid, agent.clone(), "inventor".to_string()));
        }
    }

    (bundle, planted)
}

/// Parameters for [`perf_bundle`].
#[derive(Debug, Clone, Copy)]
pub struct PerfParams {
    pub n_patents: usize,
    pub n_classes: usize,
    pub refs_per_patent: usize,
    /// Probability that a reference points outside the corpus.
    pub external_ref_share: f64,
    pub n_agents: usize,
    pub patents_per_agent: usize,
    pub seed: u64,
}

impl Default for PerfParams {
    fn default() -> Self {
        PerfParams {
            n_patents: 100_000,
            n_classes: 650,
            refs_per_patent: 8,
            external_ref_share: 0.15,
            n_agents: 1000,
            patents_per_agent: 30,
            seed: 9,
        }
    }
}

/// Large uniform corpus at CPC4-sized vocabulary for scale testing: random
/// multi-class assignments, citations to earlier patents mixed with
/// out-of-corpus tokens, and inventors linked to random patents.
pub fn perf_bundle(params: &PerfParams) -> TsvBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut bundle = TsvBundle::empty(CpcLevel::Cpc4);
    let base = NaiveDate::from_ymd_opt(1976, 1, 1).unwrap();
    let span_days = 15_000usize;

    let pid = |i: usize| format!("P{i:07}");
    for i in 0..params.n_patents {
        bundle.patents.push((
            pid(i),
            date_string(base, (i % span_days) as i64),
        ));
        let n_classes = 1 + rng.random_range(0..3);
        let mut assigned: Vec<usize> = Vec::with_capacity(n_classes);
        while assigned.len() < n_classes {
            let c = rng.random_range(0..params.n_classes);
            if !assigned.contains(&c) {
                assigned.push(c);
            }
        }
        for c in assigned {
            bundle.classes.push((pid(i), class_code4(c)));
        }
        if i > 0 {
            for _ in 0..params.refs_per_patent {
                if rng.random::<f64>() < params.external_ref_share {
                    let token = format!("X{:07}", rng.random_range(0..params.n_patents));
                    bundle.citations.push((pid(i), token));
                } else {
                    let target = rng.random_range(0..i);
                    bundle.citations.push((pid(i), pid(target)));
                }
            }
        }
    }
    for a in 0..params.n_agents {
        let agent = format!("inv{a:05}");
        for _ in 0..params.patents_per_agent {
            let p = rng.random_range(0..params.n_patents);
            bundle
                .agents
                .push((pid(p), agent.clone(), "inventor".to_string()));
        }
    }
    bundle
}
