//! Technology-space backbones: maximum-weight spanning forest plus the
//! strongest non-tree edges, exported as GraphML, DOT, edge CSV, or JSON.
//!
//! Backbone selection only consumes score order, but exported edge weights
//! must be positive, so entropy matrices (scores stored as -D ≤ 0) are
//! mapped through the strictly monotone transform 1/(1+D) before anything
//! else happens. Edges with non-positive transformed weight and the
//! diagonal sentinel are excluded.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ClassId;
use crate::measures::{MeasureKind, ProximityMatrix};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("matrix has an empty class vocabulary")]
    EmptyVocabulary,
    #[error("unknown graph format {0:?} (expected graphml, dot, edge-csv, or json)")]
    UnknownFormat(String),
    #[error("edge csv malformed: {0}")]
    EdgeCsv(String),
}

/// Weighted undirected edge between two classes, `a < b` in vocabulary
/// order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackboneEdge {
    pub a: u32,
    pub b: u32,
    pub weight: f64,
}

/// Spanning forest plus the `k` strongest non-tree edges.
#[derive(Debug, Clone)]
pub struct BackboneNetwork {
    pub nodes: Vec<ClassId>,
    /// Forest edges, lexicographic by (a, b).
    pub tree_edges: Vec<BackboneEdge>,
    /// The k heaviest non-tree edges (ties broken lexicographically),
    /// re-sorted lexicographic by (a, b).
    pub extra_edges: Vec<BackboneEdge>,
    /// Extra edges requested.
    pub requested_extra: usize,
    /// Requested minus available: non-zero when fewer than `k` positive
    /// non-tree edges exist.
    pub extra_shortfall: usize,
}

impl BackboneNetwork {
    pub fn edge_count(&self) -> usize {
        self.tree_edges.len() + self.extra_edges.len()
    }
}

/// Positive export weight for one matrix cell: identity for similarity
/// scores, 1/(1+D) for entropy scores stored as -D. Strictly monotone in
/// the stored score either way, so selection order is unchanged.
fn export_weight(measure: MeasureKind, score: f64) -> f64 {
    match measure {
        MeasureKind::Entropy => 1.0 / (1.0 - score),
        _ => score,
    }
}

/// All positive-weight edges of the matrix, sorted heaviest first with
/// lexicographic (a, b) tie-break.
fn positive_edges_by_weight(matrix: &ProximityMatrix) -> Vec<BackboneEdge> {
    let n = matrix.len();
    let measure = matrix.measure();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let weight = export_weight(measure, matrix.score(i, j));
            if weight > 0.0 && weight.is_finite() {
                edges.push(BackboneEdge {
                    a: i as u32,
                    b: j as u32,
                    weight,
                });
            }
        }
    }
    edges.sort_by(|x, y| {
        y.weight
            .total_cmp(&x.weight)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    edges
}

/// Maximum-weight spanning forest of the positive-weight graph (Kruskal).
/// Deterministic under ties via lexicographic edge order; spans every node
/// reachable through positive-weight edges, so it holds
/// `nodes - components` edges.
pub fn maximum_spanning_forest(
    matrix: &ProximityMatrix,
) -> Result<Vec<BackboneEdge>, MapError> {
    if matrix.is_empty() {
        return Err(MapError::EmptyVocabulary);
    }
    let mut dsu = DisjointSet::new(matrix.len());
    let mut forest = Vec::new();
    for edge in positive_edges_by_weight(matrix) {
        if dsu.union(edge.a as usize, edge.b as usize) {
            forest.push(edge);
        }
    }
    forest.sort_by(|x, y| x.a.cmp(&y.a).then(x.b.cmp(&y.b)));
    Ok(forest)
}

/// Forest plus the `k` strongest non-tree edges. When fewer than `k`
/// positive non-tree edges exist, all of them are taken and the shortfall
/// reported.
pub fn extract_backbone(
    matrix: &ProximityMatrix,
    k: usize,
) -> Result<BackboneNetwork, MapError> {
    if matrix.is_empty() {
        return Err(MapError::EmptyVocabulary);
    }
    let all_edges = positive_edges_by_weight(matrix);
    let mut dsu = DisjointSet::new(matrix.len());
    let mut tree_edges = Vec::new();
    let mut extra_edges = Vec::new();
    for edge in all_edges {
        if dsu.union(edge.a as usize, edge.b as usize) {
            tree_edges.push(edge);
        } else if extra_edges.len() < k {
            // Non-tree edges stream past in weight order, so the first k
            // rejected by the forest are exactly the k strongest extras.
            extra_edges.push(edge);
        }
    }
    let extra_shortfall = k - extra_edges.len();
    tree_edges.sort_by(|x, y| x.a.cmp(&y.a).then(x.b.cmp(&y.b)));
    extra_edges.sort_by(|x, y| x.a.cmp(&y.a).then(x.b.cmp(&y.b)));
    Ok(BackboneNetwork {
        nodes: matrix.classes().to_vec(),
        tree_edges,
        extra_edges,
        requested_extra: k,
        extra_shortfall,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    GraphMl,
    Dot,
    EdgeCsv,
    Json,
}

impl GraphFormat {
    pub const ALL: [GraphFormat; 4] = [
        GraphFormat::GraphMl,
        GraphFormat::Dot,
        GraphFormat::EdgeCsv,
        GraphFormat::Json,
    ];

    pub fn id(self) -> &'static str {
        match self {
            GraphFormat::GraphMl => "graphml",
            GraphFormat::Dot => "dot",
            GraphFormat::EdgeCsv => "edge-csv",
            GraphFormat::Json => "json",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::GraphMl => "graphml",
            GraphFormat::Dot => "dot",
            GraphFormat::EdgeCsv => "csv",
            GraphFormat::Json => "json",
        }
    }
}

impl fmt::Display for GraphFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for GraphFormat {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GraphFormat::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| MapError::UnknownFormat(s.to_string()))
    }
}

/// Render the backbone in the requested format. Output is byte-deterministic:
/// nodes in vocabulary order, tree edges then extra edges, each tier
/// lexicographic.
pub fn export_graph(network: &BackboneNetwork, format: GraphFormat) -> String {
    match format {
        GraphFormat::GraphMl => export_graphml(network),
        GraphFormat::Dot => export_dot(network),
        GraphFormat::EdgeCsv => export_edge_csv(network),
        GraphFormat::Json => export_json(network),
    }
}

fn tiers(network: &BackboneNetwork) -> impl Iterator<Item = (&BackboneEdge, &'static str)> {
    network
        .tree_edges
        .iter()
        .map(|e| (e, "tree"))
        .chain(network.extra_edges.iter().map(|e| (e, "extra")))
}

fn export_graphml(network: &BackboneNetwork) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str(
        "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n",
    );
    out.push_str("  <key id=\"tier\" for=\"edge\" attr.name=\"tier\" attr.type=\"string\"/>\n");
    out.push_str("  <graph id=\"backbone\" edgedefault=\"undirected\">\n");
    for node in &network.nodes {
        out.push_str(&format!("    <node id=\"{node}\"/>\n"));
    }
    for (edge, tier) in tiers(network) {
        out.push_str(&format!(
            "    <edge source=\"{}\" target=\"{}\"><data key=\"weight\">{}</data><data key=\"tier\">{}</data></edge>\n",
            network.nodes[edge.a as usize], network.nodes[edge.b as usize], edge.weight, tier
        ));
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

fn export_dot(network: &BackboneNetwork) -> String {
    let mut out = String::from("graph backbone {\n");
    for node in &network.nodes {
        out.push_str(&format!("  \"{node}\";\n"));
    }
    for (edge, tier) in tiers(network) {
        out.push_str(&format!(
            "  \"{}\" -- \"{}\" [weight={}, tier=\"{}\"];\n",
            network.nodes[edge.a as usize], network.nodes[edge.b as usize], edge.weight, tier
        ));
    }
    out.push_str("}\n");
    out
}

fn export_edge_csv(network: &BackboneNetwork) -> String {
    let mut out = String::from("class_i,class_j,weight,tier\n");
    for (edge, tier) in tiers(network) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            network.nodes[edge.a as usize], network.nodes[edge.b as usize], edge.weight, tier
        ));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonGraph {
    nodes: Vec<String>,
    edges: Vec<JsonEdge>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonEdge {
    source: String,
    target: String,
    weight: f64,
    tier: String,
}

fn export_json(network: &BackboneNetwork) -> String {
    let graph = JsonGraph {
        nodes: network.nodes.iter().map(|c| c.to_string()).collect(),
        edges: tiers(network)
            .map(|(edge, tier)| JsonEdge {
                source: network.nodes[edge.a as usize].to_string(),
                target: network.nodes[edge.b as usize].to_string(),
                weight: edge.weight,
                tier: tier.to_string(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&graph).expect("graph serializes");
    out.push('\n');
    out
}

/// Parse an edge CSV produced by [`export_graph`] back into
/// (class_i, class_j, weight, tier) rows.
pub fn read_edge_csv(text: &str) -> Result<Vec<(String, String, f64, String)>, MapError> {
    let mut lines = text.lines();
    match lines.next() {
        Some("class_i,class_j,weight,tier") => {}
        other => return Err(MapError::EdgeCsv(format!("bad header {other:?}"))),
    }
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(MapError::EdgeCsv(format!(
                "row {}: expected 4 fields, found {}",
                idx + 2,
                fields.len()
            )));
        }
        let weight: f64 = fields[2]
            .parse()
            .map_err(|_| MapError::EdgeCsv(format!("row {}: bad weight", idx + 2)))?;
        out.push((
            fields[0].to_string(),
            fields[1].to_string(),
            weight,
            fields[3].to_string(),
        ));
    }
    Ok(out)
}

struct DisjointSet {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        let mut cur = x;
        while self.parent[cur] as usize != root {
            let next = self.parent[cur] as usize;
            self.parent[cur] = root as u32;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb as u32,
            std::cmp::Ordering::Greater => self.parent[rb] = ra as u32,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra as u32;
                self.rank[ra] += 1;
            }
        }
        true
    }
}
