//! Pattern discovery over preprocessed sessions.
//!
//! Support is always a fraction of the database size, computed as
//! `count / n` in floating point; a pattern is frequent when that fraction is
//! at least the requested minimum. The raw counts travel alongside.

mod apriori;
mod cluster;
mod graph;
mod prefixspan;
mod waptree;

use serde::{Deserialize, Serialize};

pub use apriori::{frequent_itemsets, mine_association_rules, AssociationRule, FrequentItemset};
pub use cluster::{cluster_sessions, jaccard, SessionCluster};
pub use graph::{build_path_graph, build_path_graph_parallel, Edge, NavigationGraph};
pub use prefixspan::mine_sequences_projection;
pub use waptree::{build_waptree, mine_sequences_waptree, PositionCode, WapNode, WapTree};

use crate::error::{Error, Result};

/// Default cap on sequential pattern length used by the CLI.
pub const DEFAULT_MAX_LENGTH: usize = 10;

/// An ordered list of pages found as a (not necessarily contiguous)
/// subsequence of enough sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialPattern {
    pub items: Vec<String>,
    pub support: f64,
    pub count: u64,
}

/// Which sequential-pattern engine to run. Both return identical output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceEngine {
    #[default]
    Projection,
    Waptree,
}

impl std::str::FromStr for SequenceEngine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projection" | "prefixspan" => Ok(SequenceEngine::Projection),
            "waptree" | "wap" => Ok(SequenceEngine::Waptree),
            other => Err(Error::Usage(format!("unknown engine `{other}`"))),
        }
    }
}

pub fn mine_sequences(
    engine: SequenceEngine,
    db: &crate::preprocess::SequenceDb,
    min_support: f64,
    max_length: Option<usize>,
) -> Result<Vec<SequentialPattern>> {
    match engine {
        SequenceEngine::Projection => mine_sequences_projection(db, min_support, max_length),
        SequenceEngine::Waptree => mine_sequences_waptree(db, min_support, max_length),
    }
}

/// Highest support first, then lexicographic by item list.
pub(crate) fn sort_patterns(patterns: &mut [SequentialPattern]) {
    patterns.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.items.cmp(&b.items)));
}

pub(crate) fn is_frequent(count: u64, n: usize, min_support: f64) -> bool {
    n > 0 && count as f64 / n as f64 >= min_support
}

pub(crate) fn check_max_length(max_length: Option<usize>) -> Result<usize> {
    match max_length {
        Some(0) => Err(Error::param("max_length", "must be at least 1")),
        Some(m) => Ok(m),
        None => Ok(usize::MAX),
    }
}

/// Dense ids for item names, assigned in lexicographic order so that
/// comparing ids compares names.
#[derive(Debug, Clone)]
pub(crate) struct Alphabet {
    names: Vec<String>,
}

impl Alphabet {
    pub(crate) fn new<'a>(items: impl Iterator<Item = &'a str>) -> Self {
        let mut names: Vec<String> = items.map(str::to_string).collect();
        names.sort_unstable();
        names.dedup();
        Alphabet { names }
    }

    pub(crate) fn id(&self, name: &str) -> u32 {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .expect("name interned") as u32
    }

    pub(crate) fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub(crate) fn len(&self) -> usize {
        self.names.len()
    }

    pub(crate) fn names(&self, ids: &[u32]) -> Vec<String> {
        ids.iter().map(|&i| self.name(i).to_string()).collect()
    }
}

/// Interns a sequence database.
pub(crate) fn encode_sequences(db: &crate::preprocess::SequenceDb) -> (Alphabet, Vec<Vec<u32>>) {
    let alphabet = Alphabet::new(db.sequences.iter().flat_map(|s| s.items.iter().map(String::as_str)));
    let encoded = db
        .sequences
        .iter()
        .map(|s| s.items.iter().map(|i| alphabet.id(i)).collect())
        .collect();
    (alphabet, encoded)
}
