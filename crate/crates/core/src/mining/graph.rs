use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{Sequence, SequenceDb};

/// Directed page graph; each edge counts how often the link was followed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "GraphRepr", try_from = "GraphRepr")]
pub struct NavigationGraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub count: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRepr {
    nodes: Vec<String>,
    edges: Vec<Edge>,
}

impl From<NavigationGraph> for GraphRepr {
    fn from(g: NavigationGraph) -> Self {
        GraphRepr {
            nodes: g.nodes.into_iter().collect(),
            edges: g
                .edges
                .into_iter()
                .map(|((from, to), count)| Edge { from, to, count })
                .collect(),
        }
    }
}

impl TryFrom<GraphRepr> for NavigationGraph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        let nodes: BTreeSet<String> = r.nodes.into_iter().collect();
        let mut edges = BTreeMap::new();
        for e in r.edges {
            if e.count == 0 || !nodes.contains(&e.from) || !nodes.contains(&e.to) {
                return Err(Error::Usage(format!("invalid edge {} -> {}", e.from, e.to)));
            }
            edges.insert((e.from, e.to), e.count);
        }
        Ok(NavigationGraph { nodes, edges })
    }
}

impl NavigationGraph {
    fn add_sequence(&mut self, items: &[String]) {
        for page in items {
            if !self.nodes.contains(page) {
                self.nodes.insert(page.clone());
            }
        }
        for pair in items.windows(2) {
            *self.edges.entry((pair[0].clone(), pair[1].clone())).or_insert(0) += 1;
        }
    }

    fn merge(mut self, other: NavigationGraph) -> NavigationGraph {
        self.nodes.extend(other.nodes);
        for (k, c) in other.edges {
            *self.edges.entry(k).or_insert(0) += c;
        }
        self
    }

    pub fn total_traversals(&self) -> u64 {
        self.edges.values().sum()
    }

    pub fn edge_count(&self, from: &str, to: &str) -> u64 {
        self.edges
            .get(&(from.to_string(), to.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// Graphviz rendering. Nodes, then edges, each in lexicographic order.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph {\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  {};", dot_id(n));
        }
        for ((a, b), c) in &self.edges {
            let _ = writeln!(out, "  {} -> {} [label={}];", dot_id(a), dot_id(b), c);
        }
        out.push_str("}\n");
        out
    }
}

fn dot_id(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Counts every adjacent page pair across all sequences.
pub fn build_path_graph(db: &SequenceDb) -> NavigationGraph {
    let mut g = NavigationGraph::default();
    for s in &db.sequences {
        g.add_sequence(&s.items);
    }
    g
}

/// Same result as [`build_path_graph`], counted over `workers` shards.
pub fn build_path_graph_parallel(db: &SequenceDb, workers: usize) -> Result<NavigationGraph> {
    let workers = workers.max(1);
    if workers == 1 || db.sequences.len() < 2 {
        return Ok(build_path_graph(db));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    let shard = db.sequences.len().div_ceil(workers);
    Ok(pool.install(|| {
        db.sequences
            .par_chunks(shard)
            .map(|chunk: &[Sequence]| {
                let mut g = NavigationGraph::default();
                for s in chunk {
                    g.add_sequence(&s.items);
                }
                g
            })
            .reduce(NavigationGraph::default, NavigationGraph::merge)
    }))
}
