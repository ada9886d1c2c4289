//! The five pipeline subcommands. Each one writes its artifacts under the
//! output directory, embeds the config digest and corpus digest in a JSON
//! summary or sidecar, and prints one summary JSON to stdout.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use techspace::corpus::{read_cache, write_cache, Corpus};
use techspace::digest::files_digest_hex;
use techspace::evaluation::{
    auc_table_csv, curves_csv, optima_csv, pooled_evaluation, EvaluationReport, PooledOptions,
};
use techspace::mapping::{export_graph, extract_backbone};
use techspace::measures::{build_features, MatrixSidecar, MeasureCombo, ProximityMatrix};

use crate::config::RunConfig;
use crate::{CliError, ErrorKind};

fn input_err(err: anyhow::Error) -> CliError {
    CliError::new(ErrorKind::Input, err)
}

fn compute_err(err: anyhow::Error) -> CliError {
    CliError::new(ErrorKind::Compute, err)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))
            .map_err(input_err)?;
    }
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(input_err)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, &text)
}

fn cache_path(config: &RunConfig) -> PathBuf {
    config.out_dir.join("cache").join("corpus.bin")
}

fn matrix_paths(config: &RunConfig, combo: MeasureCombo) -> (PathBuf, PathBuf) {
    let dir = config.out_dir.join("proximity");
    (
        dir.join(format!("matrix_{}.csv", combo.id())),
        dir.join(format!("matrix_{}.json", combo.id())),
    )
}

fn source_digest(config: &RunConfig) -> Result<String, CliError> {
    files_digest_hex(&config.paths.tagged())
        .context("cannot digest input files")
        .map_err(input_err)
}

/// Load the corpus cache and verify it still matches the configured input
/// files.
fn load_verified_cache(config: &RunConfig) -> Result<(Corpus, String), CliError> {
    let path = cache_path(config);
    if !path.exists() {
        return Err(input_err(anyhow!(
            "corpus cache {} not found; run `techspace ingest` first",
            path.display()
        )));
    }
    let (corpus, meta) = read_cache(&path).map_err(|e| input_err(e.into()))?;
    let current = source_digest(config)?;
    if current != meta.source_digest {
        return Err(input_err(anyhow!(
            "corpus cache {} is stale (input files changed since ingest); re-run `techspace ingest`",
            path.display()
        )));
    }
    Ok((corpus, meta.corpus_digest))
}

fn print_stdout<T: Serialize>(value: &T) {
    use std::io::Write as _;
    let text = serde_json::to_string_pretty(value).expect("serializable");
    // Tolerate a closed pipe downstream (`techspace report | head`).
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Run `f` on a dedicated pool of `workers` threads (0 = default pool).
fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot build worker pool")
        .map_err(compute_err)?;
    Ok(pool.install(f))
}

pub fn cmd_ingest(config: &RunConfig) -> Result<(), CliError> {
    let opts = techspace::IngestOptions {
        min_patents_per_class: config.min_patents_per_class,
    };
    let (corpus, summary) = techspace::load_corpus(&config.paths, config.level, &opts)
        .map_err(|e| input_err(e.into()))?;
    let source = source_digest(config)?;

    let cache = cache_path(config);
    if let Some(parent) = cache.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))
            .map_err(input_err)?;
    }
    write_cache(&corpus, &source, &cache).map_err(|e| input_err(e.into()))?;

    let out = json!({
        "config_digest": config.digest(),
        "source_digest": source,
        "seed": config.seed,
        "cache": cache.display().to_string(),
        "summary": summary,
    });
    write_json(&config.out_dir.join("ingest").join("summary.json"), &out)?;
    print_stdout(&out);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ProximitySummary {
    config_digest: String,
    corpus_digest: String,
    seed: u64,
    epsilon: f64,
    written: Vec<String>,
    skipped_up_to_date: Vec<String>,
}

/// A matrix file is up to date when its sidecar matches the current corpus,
/// combination, and epsilon.
fn matrix_up_to_date(
    csv_path: &Path,
    sidecar_path: &Path,
    combo: MeasureCombo,
    corpus_digest: &str,
    epsilon: f64,
) -> bool {
    if !csv_path.exists() || !sidecar_path.exists() {
        return false;
    }
    let Ok(text) = fs::read_to_string(sidecar_path) else {
        return false;
    };
    let Ok(sidecar) = serde_json::from_str::<MatrixSidecar>(&text) else {
        return false;
    };
    sidecar.corpus_digest == corpus_digest
        && sidecar.data_choice == combo.data_choice
        && sidecar.measure == combo.measure
        && sidecar.epsilon == epsilon
}

pub fn cmd_proximity(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let (corpus, corpus_digest) = load_verified_cache(config)?;
    let combos = config.combos();

    let mut pending: Vec<MeasureCombo> = Vec::new();
    let mut skipped: Vec<String> = Vec::new();
    for &combo in &combos {
        let (csv_path, sidecar_path) = matrix_paths(config, combo);
        if !force
            && matrix_up_to_date(&csv_path, &sidecar_path, combo, &corpus_digest, config.epsilon)
        {
            skipped.push(combo.id());
        } else {
            pending.push(combo);
        }
    }

    let epsilon = config.epsilon;
    let computed: Vec<(MeasureCombo, ProximityMatrix)> = with_workers(config.workers, || {
        let mut out = Vec::with_capacity(pending.len());
        // One feature build per data choice serves all its measures.
        for &data_choice in &techspace::measures::DataChoice::ALL {
            let wanted: Vec<MeasureCombo> = pending
                .iter()
                .copied()
                .filter(|c| c.data_choice == data_choice)
                .collect();
            if wanted.is_empty() {
                continue;
            }
            let features = build_features(&corpus, data_choice);
            for combo in wanted {
                let matrix = ProximityMatrix::compute(&features, combo.measure, epsilon)
                    .expect("epsilon validated at config resolution");
                out.push((combo, matrix));
            }
        }
        out
    })?;

    let mut written = Vec::with_capacity(computed.len());
    for (combo, matrix) in &computed {
        let (csv_path, sidecar_path) = matrix_paths(config, *combo);
        write_file(&csv_path, &matrix.to_csv())?;
        write_json(
            &sidecar_path,
            &matrix.sidecar(corpus_digest.clone(), Some(config.digest())),
        )?;
        written.push(combo.id());
    }

    let summary = ProximitySummary {
        config_digest: config.digest(),
        corpus_digest,
        seed: config.seed,
        epsilon: config.epsilon,
        written,
        skipped_up_to_date: skipped,
    };
    write_json(
        &config.out_dir.join("proximity").join("summary.json"),
        &summary,
    )?;
    print_stdout(&summary);
    Ok(())
}

fn read_matrix(config: &RunConfig, combo: MeasureCombo, corpus_digest: &str) -> Result<ProximityMatrix, CliError> {
    let (csv_path, sidecar_path) = matrix_paths(config, combo);
    if !csv_path.exists() || !sidecar_path.exists() {
        return Err(input_err(anyhow!(
            "matrix {} not found under {}; run `techspace proximity` first",
            combo.id(),
            config.out_dir.join("proximity").display()
        )));
    }
    let sidecar_text = fs::read_to_string(&sidecar_path)
        .with_context(|| format!("cannot read {}", sidecar_path.display()))
        .map_err(input_err)?;
    let sidecar: MatrixSidecar = serde_json::from_str(&sidecar_text)
        .with_context(|| format!("cannot parse {}", sidecar_path.display()))
        .map_err(input_err)?;
    if sidecar.corpus_digest != corpus_digest {
        return Err(input_err(anyhow!(
            "matrix {} was computed for a different corpus (digest {} vs {}); re-run `techspace proximity`",
            combo.id(),
            sidecar.corpus_digest,
            corpus_digest
        )));
    }
    let csv = fs::read_to_string(&csv_path)
        .with_context(|| format!("cannot read {}", csv_path.display()))
        .map_err(input_err)?;
    ProximityMatrix::from_csv(&sidecar, &csv)
        .with_context(|| format!("cannot parse {}", csv_path.display()))
        .map_err(input_err)
}

#[derive(Debug, Serialize)]
struct EvaluateRunReport {
    config_digest: String,
    /// Canonical key=value rendering of the resolved configuration; a run
    /// is reproducible from this file alone.
    config: String,
    corpus_digest: String,
    seed: u64,
    level: String,
    min_classes: usize,
    epsilon: f64,
    curve_points: usize,
    combos: Vec<String>,
    /// Configured kinds the corpus has no agents of at all.
    kinds_absent: Vec<String>,
    kinds: Vec<EvaluationReport>,
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<(), CliError> {
    let (corpus, corpus_digest) = load_verified_cache(config)?;
    let combos = config.combos();
    let matrices: Vec<ProximityMatrix> = combos
        .iter()
        .map(|&combo| read_matrix(config, combo, &corpus_digest))
        .collect::<Result<_, _>>()?;

    let opts = PooledOptions {
        min_classes: config.min_classes,
        curve_points: config.curve_points,
    };
    let mut kind_reports = Vec::new();
    let mut kinds_absent = Vec::new();
    for &kind in &config.agent_kinds {
        if corpus.agent_count(kind) == 0 {
            kinds_absent.push(kind.id().to_string());
            continue;
        }
        let report = with_workers(config.workers, || {
            pooled_evaluation(&corpus, &matrices, kind, &opts)
        })?
        .map_err(|e| compute_err(e.into()))?;

        let dir = config.out_dir.join("evaluate").join(kind.id());
        write_file(&dir.join("curves.csv"), &curves_csv(&report, false))?;
        write_file(
            &dir.join("curves_agent_mean.csv"),
            &curves_csv(&report, true),
        )?;
        write_file(&dir.join("auc_table.csv"), &auc_table_csv(&report))?;
        write_file(&dir.join("optima.csv"), &optima_csv(&report))?;
        kind_reports.push(report);
    }
    if kind_reports.is_empty() {
        return Err(compute_err(anyhow!(
            "the corpus has no agents of any configured kind ({})",
            kinds_absent.join(", ")
        )));
    }

    let run_report = EvaluateRunReport {
        config_digest: config.digest(),
        config: config.canonical(),
        corpus_digest,
        seed: config.seed,
        level: config.level.id().to_string(),
        min_classes: config.min_classes,
        epsilon: config.epsilon,
        curve_points: config.curve_points,
        combos: combos.iter().map(|c| c.id()).collect(),
        kinds_absent,
        kinds: kind_reports,
    };
    write_json(
        &config.out_dir.join("evaluate").join("report.json"),
        &run_report,
    )?;

    // Stdout: the full report minus the curve samples (those live in the
    // CSV files).
    let mut brief = serde_json::to_value(&run_report).expect("serializable");
    if let Some(kinds) = brief.get_mut("kinds").and_then(|k| k.as_array_mut()) {
        for kind in kinds {
            if let Some(combos) = kind.get_mut("combos").and_then(|c| c.as_array_mut()) {
                for combo in combos {
                    if let Some(obj) = combo.as_object_mut() {
                        obj.remove("pooled_curve");
                        obj.remove("agent_mean_curve");
                    }
                }
            }
            if let Some(obj) = kind.as_object_mut() {
                obj.remove("optima");
            }
        }
    }
    print_stdout(&brief);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct MapRunReport {
    config_digest: String,
    corpus_digest: String,
    seed: u64,
    data_choice: String,
    measure: String,
    nodes: usize,
    tree_edges: usize,
    extra_edges_requested: usize,
    extra_edges_written: usize,
    extra_shortfall: usize,
    files: Vec<String>,
}

pub fn cmd_map(config: &RunConfig) -> Result<(), CliError> {
    let (_, corpus_digest) = load_verified_cache(config)?;
    let combo = MeasureCombo::new(config.map_data_choice, config.map_measure);
    let matrix = read_matrix(config, combo, &corpus_digest)?;
    let network = extract_backbone(&matrix, config.extra_edges)
        .map_err(|e| compute_err(e.into()))?;

    let dir = config.out_dir.join("map");
    let mut files = Vec::new();
    for &format in &config.map_formats {
        let path = dir.join(format!("backbone.{}", format.extension()));
        write_file(&path, &export_graph(&network, format))?;
        files.push(path.display().to_string());
    }
    let report = MapRunReport {
        config_digest: config.digest(),
        corpus_digest,
        seed: config.seed,
        data_choice: combo.data_choice.id().to_string(),
        measure: combo.measure.id().to_string(),
        nodes: network.nodes.len(),
        tree_edges: network.tree_edges.len(),
        extra_edges_requested: network.requested_extra,
        extra_edges_written: network.extra_edges.len(),
        extra_shortfall: network.extra_shortfall,
        files,
    };
    write_json(&dir.join("report.json"), &report)?;
    print_stdout(&report);
    Ok(())
}

pub fn cmd_report(config: &RunConfig) -> Result<(), CliError> {
    let read_json = |path: PathBuf| -> Result<Option<serde_json::Value>, CliError> {
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)
            .with_context(|| format!("cannot read {}", path.display()))
            .map_err(input_err)?;
        serde_json::from_str(&text)
            .map(Some)
            .with_context(|| format!("cannot parse {}", path.display()))
            .map_err(input_err)
    };

    let ingest = read_json(config.out_dir.join("ingest").join("summary.json"))?;
    let proximity = read_json(config.out_dir.join("proximity").join("summary.json"))?;
    let evaluate = read_json(config.out_dir.join("evaluate").join("report.json"))?;
    let map = read_json(config.out_dir.join("map").join("report.json"))?;
    if ingest.is_none() && proximity.is_none() && evaluate.is_none() && map.is_none() {
        return Err(input_err(anyhow!(
            "no pipeline outputs found under {}",
            config.out_dir.display()
        )));
    }

    // Every stage must refer to the same corpus.
    let mut digests: Vec<(&str, String)> = Vec::new();
    if let Some(v) = &ingest {
        if let Some(d) = v.pointer("/summary/corpus_digest").and_then(|d| d.as_str()) {
            digests.push(("ingest", d.to_string()));
        }
    }
    for (stage, value) in [
        ("proximity", &proximity),
        ("evaluate", &evaluate),
        ("map", &map),
    ] {
        if let Some(d) = value
            .as_ref()
            .and_then(|v| v.get("corpus_digest"))
            .and_then(|d| d.as_str())
        {
            digests.push((stage, d.to_string()));
        }
    }
    if let Some((_, first)) = digests.first() {
        for (stage, digest) in &digests {
            if digest != first {
                return Err(input_err(anyhow!(
                    "corpus digest mismatch across outputs: {} stage has {digest}, expected {first}; re-run the pipeline",
                    stage
                )));
            }
        }
    }

    let out = json!({
        "out_dir": config.out_dir.display().to_string(),
        "config_digest": config.digest(),
        "corpus_digest": digests.first().map(|(_, d)| d.clone()),
        "stages": {
            "ingest": ingest,
            "proximity": proximity,
            "evaluate": evaluate,
            "map": map,
        },
    });
    print_stdout(&out);
    Ok(())
}
