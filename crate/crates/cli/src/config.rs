//! Run configuration: defaults, environment, config file, then command-line
//! flags, later layers winning. Every enumeration value is validated before
//! any computation starts, and the resolved configuration has a canonical
//! rendering whose digest is embedded in every output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;

use techspace::corpus::{AgentKind, CorpusPaths, CpcLevel};
use techspace::mapping::GraphFormat;
use techspace::measures::{DataChoice, MeasureKind};

/// Environment variable providing the default output directory.
pub const OUT_DIR_ENV: &str = "TECHSPACE_OUT_DIR";

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Plain-text `key = value` config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// patents.tsv (patent_id, filing_date)
    #[arg(long)]
    pub patents: Option<PathBuf>,
    /// patent_classes.tsv (patent_id, cpc_code)
    #[arg(long)]
    pub classes: Option<PathBuf>,
    /// citations.tsv (citing_patent_id, cited_patent_id)
    #[arg(long)]
    pub citations: Option<PathBuf>,
    /// patent_agents.tsv (patent_id, agent_id, agent_kind)
    #[arg(long)]
    pub agents: Option<PathBuf>,

    /// CPC truncation level: cpc3 or cpc4.
    #[arg(long)]
    pub level: Option<String>,
    /// Data choices to compute (comma-separated subset of
    /// ref_pat,ref_class,co_pat,co_class).
    #[arg(long, value_delimiter = ',')]
    pub data_choices: Option<Vec<String>>,
    /// Measures to compute (comma-separated subset of
    /// jaccard,cosine,pearson,entropy).
    #[arg(long, value_delimiter = ',')]
    pub measures: Option<Vec<String>>,
    /// Minimum number of entered classes for an agent to be evaluated.
    #[arg(long)]
    pub min_classes: Option<usize>,
    /// Agent kinds to evaluate (comma-separated subset of
    /// inventor,assignee).
    #[arg(long, value_delimiter = ',')]
    pub agent_kinds: Option<Vec<String>>,
    /// Additive smoothing for the entropy measure.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of strongest non-tree edges added to the backbone.
    #[arg(long)]
    pub extra_edges: Option<usize>,
    /// Data choice of the matrix to map.
    #[arg(long)]
    pub map_data_choice: Option<String>,
    /// Measure of the matrix to map.
    #[arg(long)]
    pub map_measure: Option<String>,
    /// Graph formats to export (comma-separated subset of
    /// graphml,dot,edge-csv,json).
    #[arg(long, value_delimiter = ',')]
    pub map_formats: Option<Vec<String>>,
    /// Output directory (also via TECHSPACE_OUT_DIR; default "out").
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Recorded in all outputs for provenance; the pipeline itself is
    /// deterministic and consumes no randomness.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = library default). Outputs are identical for any
    /// worker count.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Number of q samples on exported cumulative curves.
    #[arg(long)]
    pub curve_points: Option<usize>,
    /// Drop classes carried by fewer than this many patents (0 = off).
    #[arg(long)]
    pub min_patents_per_class: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub paths: CorpusPaths,
    pub level: CpcLevel,
    pub data_choices: Vec<DataChoice>,
    pub measures: Vec<MeasureKind>,
    pub min_classes: usize,
    pub agent_kinds: Vec<AgentKind>,
    pub epsilon: f64,
    pub extra_edges: usize,
    pub map_data_choice: DataChoice,
    pub map_measure: MeasureKind,
    pub map_formats: Vec<GraphFormat>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub curve_points: usize,
    pub min_patents_per_class: usize,
}

/// String-valued layer of settings; later layers override earlier ones.
#[derive(Debug, Default)]
struct Layer {
    values: BTreeMap<&'static str, String>,
}

const ALL_KEYS: [&str; 19] = [
    "patents",
    "classes",
    "citations",
    "agents",
    "level",
    "data_choices",
    "measures",
    "min_classes",
    "agent_kinds",
    "epsilon",
    "extra_edges",
    "map_data_choice",
    "map_measure",
    "map_formats",
    "out_dir",
    "seed",
    "workers",
    "curve_points",
    "min_patents_per_class",
];

fn parse_config_file(path: &Path) -> Result<Layer> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut layer = Layer::default();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| {
                anyhow!(
                    "{}:{}: expected `key = value`, found {line:?}",
                    path.display(),
                    idx + 1
                )
            })?;
        let key = key.trim();
        let value = value.trim();
        let canonical = ALL_KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| {
                anyhow!(
                    "{}:{}: unknown config key {key:?} (expected one of {})",
                    path.display(),
                    idx + 1,
                    ALL_KEYS.join(", ")
                )
            })?;
        layer.values.insert(canonical, value.to_string());
    }
    Ok(layer)
}

fn flags_layer(args: &CommonArgs) -> Layer {
    let mut layer = Layer::default();
    let mut put = |key: &'static str, value: Option<String>| {
        if let Some(v) = value {
            layer.values.insert(key, v);
        }
    };
    let path_str = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    put("patents", path_str(&args.patents));
    put("classes", path_str(&args.classes));
    put("citations", path_str(&args.citations));
    put("agents", path_str(&args.agents));
    put("level", args.level.clone());
    put("data_choices", args.data_choices.as_ref().map(|v| v.join(",")));
    put("measures", args.measures.as_ref().map(|v| v.join(",")));
    put("min_classes", args.min_classes.map(|v| v.to_string()));
    put("agent_kinds", args.agent_kinds.as_ref().map(|v| v.join(",")));
    put("epsilon", args.epsilon.map(|v| v.to_string()));
    put("extra_edges", args.extra_edges.map(|v| v.to_string()));
    put("map_data_choice", args.map_data_choice.clone());
    put("map_measure", args.map_measure.clone());
    put("map_formats", args.map_formats.as_ref().map(|v| v.join(",")));
    put("out_dir", path_str(&args.out_dir));
    put("seed", args.seed.map(|v| v.to_string()));
    put("workers", args.workers.map(|v| v.to_string()));
    put("curve_points", args.curve_points.map(|v| v.to_string()));
    put(
        "min_patents_per_class",
        args.min_patents_per_class.map(|v| v.to_string()),
    );
    layer
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<RunConfig> {
        let mut merged: BTreeMap<&'static str, String> = BTreeMap::new();
        if let Ok(out_dir) = std::env::var(OUT_DIR_ENV) {
            if !out_dir.is_empty() {
                merged.insert("out_dir", out_dir);
            }
        }
        if let Some(config_path) = &args.config {
            for (k, v) in parse_config_file(config_path)?.values {
                merged.insert(k, v);
            }
        }
        for (k, v) in flags_layer(args).values {
            merged.insert(k, v);
        }

        let get = |key: &str| merged.get(key).map(String::as_str);
        let require_path = |key: &'static str| -> Result<PathBuf> {
            get(key)
                .map(PathBuf::from)
                .ok_or_else(|| anyhow!("missing required input path {key:?} (flag --{key} or config key)"))
        };

        let parse_list = |key: &'static str, raw: Option<&str>| -> Result<Option<Vec<String>>> {
            Ok(raw.map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(str::to_string)
                    .collect()
            }))
            .and_then(|opt: Option<Vec<String>>| match opt {
                Some(v) if v.is_empty() => bail!("config key {key:?} lists no values"),
                other => Ok(other),
            })
        };

        let level: CpcLevel = match get("level") {
            Some(raw) => raw.parse().map_err(|e: String| anyhow!(e))?,
            None => CpcLevel::Cpc3,
        };
        let data_choices: Vec<DataChoice> = match parse_list("data_choices", get("data_choices"))? {
            Some(raw) => dedup_sorted(
                raw.iter()
                    .map(|s| s.parse().map_err(|e: String| anyhow!(e)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => DataChoice::ALL.to_vec(),
        };
        let measures: Vec<MeasureKind> = match parse_list("measures", get("measures"))? {
            Some(raw) => dedup_sorted(
                raw.iter()
                    .map(|s| s.parse().map_err(|e: String| anyhow!(e)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => MeasureKind::ALL.to_vec(),
        };
        let agent_kinds: Vec<AgentKind> = match parse_list("agent_kinds", get("agent_kinds"))? {
            Some(raw) => dedup_sorted(
                raw.iter()
                    .map(|s| s.parse().map_err(|e: String| anyhow!(e)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => AgentKind::ALL.to_vec(),
        };
        let map_formats: Vec<GraphFormat> = match parse_list("map_formats", get("map_formats"))? {
            Some(raw) => {
                let mut parsed = raw
                    .iter()
                    .map(|s| s.parse().map_err(|e| anyhow!("{e}")))
                    .collect::<Result<Vec<GraphFormat>>>()?;
                parsed.sort_by_key(|f| f.id());
                parsed.dedup();
                parsed
            }
            None => GraphFormat::ALL.to_vec(),
        };
        let map_data_choice: DataChoice = match get("map_data_choice") {
            Some(raw) => raw.parse().map_err(|e: String| anyhow!(e))?,
            None => DataChoice::RefPat,
        };
        let map_measure: MeasureKind = match get("map_measure") {
            Some(raw) => raw.parse().map_err(|e: String| anyhow!(e))?,
            None => MeasureKind::Jaccard,
        };

        let parse_num = |key: &'static str, default: usize| -> Result<usize> {
            match get(key) {
                Some(raw) => raw
                    .parse()
                    .with_context(|| format!("config key {key:?}: invalid integer {raw:?}")),
                None => Ok(default),
            }
        };
        let epsilon: f64 = match get("epsilon") {
            Some(raw) => raw
                .parse()
                .with_context(|| format!("config key \"epsilon\": invalid number {raw:?}"))?,
            None => techspace::measures::DEFAULT_EPSILON,
        };
        let epsilon_valid = epsilon.is_finite() && epsilon > 0.0;
        if !epsilon_valid {
            bail!("epsilon must be positive, got {epsilon}");
        }
        let seed: u64 = match get("seed") {
            Some(raw) => raw
                .parse()
                .with_context(|| format!("config key \"seed\": invalid integer {raw:?}"))?,
            None => 0,
        };
        let curve_points = parse_num("curve_points", 101)?;
        if curve_points < 2 {
            bail!("curve_points must be at least 2, got {curve_points}");
        }

        Ok(RunConfig {
            paths: CorpusPaths {
                patents: require_path("patents")?,
                classes: require_path("classes")?,
                citations: require_path("citations")?,
                agents: require_path("agents")?,
            },
            level,
            data_choices,
            measures,
            min_classes: parse_num("min_classes", 10)?,
            agent_kinds,
            epsilon,
            extra_edges: parse_num("extra_edges", 0)?,
            map_data_choice,
            map_measure,
            map_formats,
            out_dir: get("out_dir").map(PathBuf::from).unwrap_or_else(|| "out".into()),
            seed,
            workers: parse_num("workers", 0)?,
            curve_points,
            min_patents_per_class: parse_num("min_patents_per_class", 0)?,
        })
    }

    /// Canonical `key=value` rendering of the resolved configuration.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key}={value}");
        };
        put("agent_kinds", ids(&self.agent_kinds, |k| k.id()));
        put("agents", self.paths.agents.display().to_string());
        put("citations", self.paths.citations.display().to_string());
        put("classes", self.paths.classes.display().to_string());
        put("curve_points", self.curve_points.to_string());
        put("data_choices", ids(&self.data_choices, |d| d.id()));
        put("epsilon", self.epsilon.to_string());
        put("extra_edges", self.extra_edges.to_string());
        put("level", self.level.id().to_string());
        put("map_data_choice", self.map_data_choice.id().to_string());
        put("map_formats", ids(&self.map_formats, |f| f.id()));
        put("map_measure", self.map_measure.id().to_string());
        put("measures", ids(&self.measures, |m| m.id()));
        put("min_classes", self.min_classes.to_string());
        put("min_patents_per_class", self.min_patents_per_class.to_string());
        put("out_dir", self.out_dir.display().to_string());
        put("patents", self.paths.patents.display().to_string());
        put("seed", self.seed.to_string());
        put("workers", self.workers.to_string());
        out
    }

    pub fn digest(&self) -> String {
        techspace::digest::sha256_hex(self.canonical().as_bytes())
    }

    /// Requested (data choice, measure) pairs in id order.
    pub fn combos(&self) -> Vec<techspace::measures::MeasureCombo> {
        let mut combos: Vec<_> = self
            .data_choices
            .iter()
            .flat_map(|&d| {
                self.measures
                    .iter()
                    .map(move |&m| techspace::measures::MeasureCombo::new(d, m))
            })
            .collect();
        combos.sort_by_key(|c| c.id());
        combos
    }
}

fn dedup_sorted<T: Ord + Copy>(mut values: Vec<T>) -> Vec<T> {
    values.sort();
    values.dedup();
    values
}

fn ids<T: Copy>(values: &[T], id: impl Fn(T) -> &'static str) -> String {
    values
        .iter()
        .map(|&v| id(v))
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare_args() -> CommonArgs {
        CommonArgs {
            config: None,
            patents: Some("p.tsv".into()),
            classes: Some("c.tsv".into()),
            citations: Some("ci.tsv".into()),
            agents: Some("a.tsv".into()),
            level: None,
            data_choices: None,
            measures: None,
            min_classes: None,
            agent_kinds: None,
            epsilon: None,
            extra_edges: None,
            map_data_choice: None,
            map_measure: None,
            map_formats: None,
            out_dir: None,
            seed: None,
            workers: None,
            curve_points: None,
            min_patents_per_class: None,
        }
    }

    #[test]
    fn defaults_cover_all_combinations() {
        let config = RunConfig::resolve(&bare_args()).unwrap();
        assert_eq!(config.combos().len(), 16);
        assert_eq!(config.min_classes, 10);
        assert_eq!(config.level, CpcLevel::Cpc3);
    }

    #[test]
    fn config_file_then_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(
            &path,
            "level = cpc3\nmin_classes = 5 # comment\nmeasures = jaccard,cosine\n",
        )
        .unwrap();
        let mut args = bare_args();
        args.config = Some(path);
        args.level = Some("cpc4".into());
        let config = RunConfig::resolve(&args).unwrap();
        assert_eq!(config.level, CpcLevel::Cpc4); // flag beat file
        assert_eq!(config.min_classes, 5); // file beat default
        assert_eq!(config.measures.len(), 2);
    }

    #[test]
    fn unknown_values_are_rejected_with_names() {
        let mut args = bare_args();
        args.measures = Some(vec!["jacard".into()]);
        let err = RunConfig::resolve(&args).unwrap_err().to_string();
        assert!(err.contains("jaccard"), "error should list valid names: {err}");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "not_a_key = 1\n").unwrap();
        let mut args = bare_args();
        args.config = Some(path);
        assert!(RunConfig::resolve(&args).is_err());
    }

    #[test]
    fn digest_is_stable_and_order_insensitive() {
        let mut a = bare_args();
        a.measures = Some(vec!["cosine".into(), "jaccard".into()]);
        let mut b = bare_args();
        b.measures = Some(vec!["jaccard".into(), "cosine".into()]);
        let (ca, cb) = (
            RunConfig::resolve(&a).unwrap(),
            RunConfig::resolve(&b).unwrap(),
        );
        assert_eq!(ca.digest(), cb.digest());
    }
}
