//! End-to-end tests of the `techspace` binary: every subcommand, exit codes,
//! cache staleness, resume behaviour, and byte determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use techspace::synth::{planted_bundle, uniform_entry_bundle, PlantedParams, TsvBundle};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_techspace"));
    // Keep the ambient environment from leaking a default output dir.
    cmd.env_remove("TECHSPACE_OUT_DIR");
    cmd
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    out: PathBuf,
}

impl Workspace {
    fn new(bundle: &TsvBundle) -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        bundle.write(&root).unwrap();
        let out = root.join("out");
        Workspace {
            _dir: dir,
            root,
            out,
        }
    }

    fn common_args(&self) -> Vec<String> {
        vec![
            "--patents".into(),
            self.root.join("patents.tsv").display().to_string(),
            "--classes".into(),
            self.root.join("patent_classes.tsv").display().to_string(),
            "--citations".into(),
            self.root.join("citations.tsv").display().to_string(),
            "--agents".into(),
            self.root.join("patent_agents.tsv").display().to_string(),
            "--out-dir".into(),
            self.out.display().to_string(),
        ]
    }

    fn run(&self, subcommand: &str, extra: &[&str]) -> Output {
        let mut args: Vec<String> = vec![subcommand.to_string()];
        args.extend(self.common_args());
        args.extend(extra.iter().map(|s| s.to_string()));
        bin().args(&args).output().expect("binary runs")
    }
}

fn small_bundle() -> TsvBundle {
    uniform_entry_bundle(12, 6, 4, 8, 31)
}

#[test]
fn ingest_writes_cache_and_summary() {
    let ws = Workspace::new(&small_bundle());
    let out = ws.run("ingest", &[]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let summary = stdout_json(&out);
    assert_eq!(summary["summary"]["vocabulary_size"], 12);
    assert_eq!(summary["summary"]["inventors"], 6);
    assert!(ws.out.join("cache/corpus.bin").exists());
    assert!(ws.out.join("ingest/summary.json").exists());
}

#[test]
fn ingest_rerun_reproduces_cache_bytes() {
    let ws = Workspace::new(&small_bundle());
    assert!(ws.run("ingest", &[]).status.success());
    let first = fs::read(ws.out.join("cache/corpus.bin")).unwrap();
    assert!(ws.run("ingest", &[]).status.success());
    let second = fs::read(ws.out.join("cache/corpus.bin")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn missing_input_file_names_it_and_exits_2() {
    let ws = Workspace::new(&small_bundle());
    fs::remove_file(ws.root.join("citations.tsv")).unwrap();
    let out = ws.run("ingest", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("citations.tsv"),
        "stderr should name the missing file: {}",
        stderr_of(&out)
    );
}

#[test]
fn proximity_single_combo_writes_one_matrix() {
    let ws = Workspace::new(&small_bundle());
    assert!(ws.run("ingest", &[]).status.success());
    let out = ws.run(
        "proximity",
        &["--data-choices", "ref_pat", "--measures", "jaccard"],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let dir = ws.out.join("proximity");
    let csvs: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    assert_eq!(csvs, ["matrix_ref_pat_jaccard.csv"]);
    assert!(dir.join("matrix_ref_pat_jaccard.json").exists());
}

#[test]
fn proximity_file_reproduces_library_matrix_exactly() {
    let bundle = small_bundle();
    let ws = Workspace::new(&bundle);
    assert!(ws.run("ingest", &[]).status.success());
    assert!(ws
        .run(
            "proximity",
            &["--data-choices", "ref_pat", "--measures", "jaccard"]
        )
        .status
        .success());

    let dir = ws.out.join("proximity");
    let sidecar: techspace::measures::MatrixSidecar = serde_json::from_str(
        &fs::read_to_string(dir.join("matrix_ref_pat_jaccard.json")).unwrap(),
    )
    .unwrap();
    let csv = fs::read_to_string(dir.join("matrix_ref_pat_jaccard.csv")).unwrap();
    let from_file =
        techspace::measures::ProximityMatrix::from_csv(&sidecar, &csv).unwrap();

    let (corpus, _) = bundle.build_corpus().unwrap();
    assert_eq!(sidecar.corpus_digest, corpus.digest_hex());
    let recomputed = techspace::measures::build_proximity_matrix(
        &corpus,
        techspace::measures::DataChoice::RefPat,
        techspace::measures::MeasureKind::Jaccard,
        1e-9,
    )
    .unwrap();
    assert_eq!(from_file.to_csv(), recomputed.to_csv());
    for i in 0..recomputed.len() {
        for j in 0..recomputed.len() {
            if i != j {
                assert_eq!(
                    from_file.score(i, j).to_bits(),
                    recomputed.score(i, j).to_bits()
                );
            }
        }
    }
}

#[test]
fn null_fixture_pooled_aucs_stay_near_half_end_to_end() {
    // Uniformly random entries are unexplainable by construction, so every
    // combination's pooled AUC must sit at the tie-centered null value.
    let ws = Workspace::new(&uniform_entry_bundle(40, 250, 10, 13, 505));
    assert!(ws.run("ingest", &[]).status.success());
    assert!(ws.run("proximity", &[]).status.success());
    let out = ws.run("evaluate", &["--agent-kinds", "inventor"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.out.join("evaluate/report.json")).unwrap())
            .unwrap();
    let combos = report["kinds"][0]["combos"].as_array().unwrap();
    assert_eq!(combos.len(), 16);
    for combo in combos {
        let auc = combo["pooled_auc"].as_f64().unwrap();
        assert!(
            (auc - 0.5).abs() <= 0.02,
            "{} pooled AUC {auc} outside null band",
            combo["id"]
        );
    }
}

#[test]
fn proximity_without_ingest_advises_ingest() {
    let ws = Workspace::new(&small_bundle());
    let out = ws.run("proximity", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("ingest"));
}

#[test]
fn unknown_measure_lists_valid_names() {
    let ws = Workspace::new(&small_bundle());
    let out = ws.run("proximity", &["--measures", "jacard"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    for name in ["jaccard", "cosine", "pearson", "entropy"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn proximity_resumes_and_force_recomputes() {
    let ws = Workspace::new(&small_bundle());
    assert!(ws.run("ingest", &[]).status.success());
    let first = stdout_json(&ws.run("proximity", &[]));
    assert_eq!(first["written"].as_array().unwrap().len(), 16);
    assert_eq!(first["skipped_up_to_date"].as_array().unwrap().len(), 0);

    let second = stdout_json(&ws.run("proximity", &[]));
    assert_eq!(second["written"].as_array().unwrap().len(), 0);
    assert_eq!(second["skipped_up_to_date"].as_array().unwrap().len(), 16);

    let forced = stdout_json(&ws.run("proximity", &["--force"]));
    assert_eq!(forced["written"].as_array().unwrap().len(), 16);
}

#[test]
fn stale_cache_is_rejected_with_advice() {
    let ws = Workspace::new(&small_bundle());
    assert!(ws.run("ingest", &[]).status.success());
    // Touch the patents file: append a valid row.
    let patents = ws.root.join("patents.tsv");
    let mut text = fs::read_to_string(&patents).unwrap();
    text.push_str("ZZZZ\t2001-01-01\n");
    fs::write(&patents, text).unwrap();

    let out = ws.run("proximity", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("stale"), "{err}");
    assert!(err.contains("ingest"), "{err}");
}

#[test]
fn evaluate_writes_reports_per_kind() {
    let ws = Workspace::new(&small_bundle());
    assert!(ws.run("ingest", &[]).status.success());
    assert!(ws.run("proximity", &[]).status.success());
    let out = ws.run("evaluate", &["--min-classes", "4"]);
    assert!(out.status.success(), "{}", stderr_of(&out));

    let dir = ws.out.join("evaluate/inventor");
    for file in [
        "curves.csv",
        "curves_agent_mean.csv",
        "auc_table.csv",
        "optima.csv",
    ] {
        assert!(dir.join(file).exists(), "missing {file}");
    }
    let curves = fs::read_to_string(dir.join("curves.csv")).unwrap();
    assert!(curves.starts_with("measure,data_choice,q,captured_fraction\n"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.out.join("evaluate/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["min_classes"], 4);
    assert_eq!(report["combos"].as_array().unwrap().len(), 16);
}

#[test]
fn evaluate_threshold_too_high_exits_3_with_threshold() {
    let ws = Workspace::new(&small_bundle());
    assert!(ws.run("ingest", &[]).status.success());
    assert!(ws.run("proximity", &[]).status.success());
    let out = ws.run("evaluate", &["--min-classes", "99"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_of(&out).contains("99"), "{}", stderr_of(&out));
}

#[test]
fn evaluate_dominant_fixture_lists_planted_measure_for_every_agent() {
    let params = PlantedParams {
        n_classes: 18,
        background_per_class: 4,
        noise_patents: 60,
        n_agents: 12,
        entries_per_agent: 8,
        ..PlantedParams::default()
    };
    let (bundle, planted) = planted_bundle(&params);
    let ws = Workspace::new(&bundle);
    assert!(ws.run("ingest", &[]).status.success());
    // The planted reference-Jaccard gradient against an uninformative
    // co-classification measure: the planted one dominates every agent.
    assert!(ws
        .run(
            "proximity",
            &["--data-choices", "ref_pat,co_class", "--measures", "jaccard"]
        )
        .status
        .success());
    let out = ws.run(
        "evaluate",
        &[
            "--data-choices",
            "ref_pat,co_class",
            "--measures",
            "jaccard",
            "--min-classes",
            "8",
            "--agent-kinds",
            "inventor",
        ],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let optima = fs::read_to_string(ws.out.join("evaluate/inventor/optima.csv")).unwrap();
    let mut lines = optima.lines();
    assert_eq!(lines.next(), Some("agent_id,agent_kind,optimal_measure,auc"));
    let mut rows = 0;
    for line in lines {
        assert!(
            line.contains(&planted.id()),
            "agent row without planted optimum: {line}"
        );
        rows += 1;
    }
    assert_eq!(rows, params.n_agents);
}

#[test]
fn map_forest_only_and_shortfall() {
    let ws = Workspace::new(&small_bundle());
    assert!(ws.run("ingest", &[]).status.success());
    assert!(ws
        .run("proximity", &["--data-choices", "co_pat", "--measures", "jaccard"])
        .status
        .success());

    let out = ws.run(
        "map",
        &["--map-data-choice", "co_pat", "--map-measure", "jaccard"],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report = stdout_json(&out);
    assert_eq!(report["extra_edges_requested"], 0);
    assert_eq!(report["extra_edges_written"], 0);
    let graphml = fs::read_to_string(ws.out.join("map/backbone.graphml")).unwrap();
    let tree_edges = report["tree_edges"].as_u64().unwrap() as usize;
    assert_eq!(graphml.matches("<edge ").count(), tree_edges);

    // Request far more extra edges than exist: shortfall reported.
    let out = ws.run(
        "map",
        &[
            "--map-data-choice",
            "co_pat",
            "--map-measure",
            "jaccard",
            "--extra-edges",
            "100000",
        ],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report = stdout_json(&out);
    assert!(report["extra_shortfall"].as_u64().unwrap() > 0);
}

#[test]
fn map_outputs_are_byte_identical_across_runs() {
    let ws = Workspace::new(&small_bundle());
    assert!(ws.run("ingest", &[]).status.success());
    assert!(ws.run("proximity", &[]).status.success());
    let args = ["--extra-edges", "5"];
    assert!(ws.run("map", &args).status.success());
    let read_all = || -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(ws.out.join("map"))
            .unwrap()
            .filter_map(|e| e.ok())
            .map(|e| {
                (
                    e.file_name().into_string().unwrap(),
                    fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };
    let first = read_all();
    assert!(ws.run("map", &args).status.success());
    assert_eq!(first, read_all());
    assert_eq!(first.len(), 5); // 4 formats + report.json
}

#[test]
fn config_file_applies_and_flags_override() {
    let ws = Workspace::new(&small_bundle());
    let config_path = ws.root.join("run.conf");
    fs::write(
        &config_path,
        format!(
            "patents = {}\nclasses = {}\ncitations = {}\nagents = {}\nout_dir = {}\nlevel = cpc3\nmin_classes = 4\n",
            ws.root.join("patents.tsv").display(),
            ws.root.join("patent_classes.tsv").display(),
            ws.root.join("citations.tsv").display(),
            ws.root.join("patent_agents.tsv").display(),
            ws.out.display(),
        ),
    )
    .unwrap();

    let out = bin()
        .args(["ingest", "--config", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert_eq!(stdout_json(&out)["summary"]["level"], "cpc3");

    // Flag overrides the config file's level.
    let out = bin()
        .args([
            "ingest",
            "--config",
            config_path.to_str().unwrap(),
            "--level",
            "cpc4",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert_eq!(stdout_json(&out)["summary"]["level"], "cpc4");
}

#[test]
fn env_var_provides_default_out_dir() {
    let bundle = small_bundle();
    let dir = tempfile::tempdir().unwrap();
    bundle.write(dir.path()).unwrap();
    let out_dir = dir.path().join("env-out");
    let output = bin()
        .env("TECHSPACE_OUT_DIR", out_dir.as_os_str())
        .current_dir(dir.path())
        .args([
            "ingest",
            "--patents",
            "patents.tsv",
            "--classes",
            "patent_classes.tsv",
            "--citations",
            "citations.tsv",
            "--agents",
            "patent_agents.tsv",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    assert!(out_dir.join("cache/corpus.bin").exists());
}

#[test]
fn report_consolidates_and_checks_digests() {
    let ws = Workspace::new(&small_bundle());
    assert!(ws.run("ingest", &[]).status.success());
    assert!(ws.run("proximity", &[]).status.success());
    assert!(ws.run("evaluate", &["--min-classes", "4"]).status.success());
    assert!(ws.run("map", &[]).status.success());

    let out = ws.run("report", &[]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report = stdout_json(&out);
    assert!(report["stages"]["ingest"].is_object());
    assert!(report["stages"]["evaluate"].is_object());
    assert!(report["corpus_digest"].is_string());

    // Tamper with one stage's digest: report must refuse.
    let map_report_path = ws.out.join("map/report.json");
    let tampered = fs::read_to_string(&map_report_path)
        .unwrap()
        .replacen("\"corpus_digest\": \"", "\"corpus_digest\": \"dead", 1);
    fs::write(&map_report_path, tampered).unwrap();
    let out = ws.run("report", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("mismatch"), "{}", stderr_of(&out));
}

#[test]
fn evaluate_outputs_identical_across_worker_counts() {
    let ws = Workspace::new(&small_bundle());
    assert!(ws.run("ingest", &[]).status.success());
    assert!(ws.run("proximity", &[]).status.success());
    let mut snapshots = Vec::new();
    for workers in ["1", "4", "8"] {
        let out = ws.run("evaluate", &["--min-classes", "4", "--workers", workers]);
        assert!(out.status.success(), "{}", stderr_of(&out));
        let dir = ws.out.join("evaluate");
        let mut files = Vec::new();
        for entry in walk(&dir) {
            files.push((entry.clone(), fs::read(&entry).unwrap()));
        }
        files.sort();
        // report.json embeds the resolved configuration (which includes the
        // worker flag) and its digest; compare everything else byte for
        // byte plus the evaluation payloads with those two fields stripped.
        let comparable: Vec<(String, Vec<u8>)> = files
            .into_iter()
            .map(|(path, bytes)| {
                let name = path.display().to_string();
                if name.ends_with("report.json") {
                    let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                    v.as_object_mut().unwrap().remove("config_digest");
                    v.as_object_mut().unwrap().remove("config");
                    (name, serde_json::to_vec(&v).unwrap())
                } else {
                    (name, bytes)
                }
            })
            .collect();
        snapshots.push(comparable);
    }
    assert!(snapshots.windows(2).all(|w| w[0] == w[1]));
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(entries) = fs::read_dir(dir) {
        for entry in entries.filter_map(|e| e.ok()) {
            let path = entry.path();
            if path.is_dir() {
                out.extend(walk(&path));
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    out
}
