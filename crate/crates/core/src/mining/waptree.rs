//! Web access pattern tree with binary position codes.
//!
//! The tree is built once. Every node carries a position code spelling the
//! path from the root, so "is `a` an ancestor of `b`" is a prefix test and
//! pre-order is plain lexicographic order of codes. Mining walks the header
//! lists of node occurrences with those tests instead of building
//! conditional trees.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{check_max_length, encode_sequences, is_frequent, sort_patterns, Alphabet, SequentialPattern};
use crate::error::{check_fraction, Result};
use crate::preprocess::SequenceDb;

/// Bit string locating a node. The root's code is empty; child `i` of a
/// node with `c` children appends `i` written in `max(1, ceil(log2 c))` bits.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PositionCode(Vec<bool>);

impl PositionCode {
    fn child(&self, index: usize, siblings: usize) -> PositionCode {
        let width = code_width(siblings);
        let mut bits = self.0.clone();
        bits.extend((0..width).rev().map(|b| (index >> b) & 1 == 1));
        PositionCode(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when `self` is a strict prefix of `other`, i.e. the node coded
    /// `self` is a proper ancestor of the node coded `other`.
    pub fn is_ancestor_of(&self, other: &PositionCode) -> bool {
        self.0.len() < other.0.len() && other.0.starts_with(&self.0)
    }
}

impl fmt::Display for PositionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn code_width(siblings: usize) -> u32 {
    if siblings <= 2 {
        1
    } else {
        usize::BITS - (siblings - 1).leading_zeros()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WapNode {
    /// `None` only for the root.
    symbol: Option<u32>,
    pub count: u64,
    pub code: PositionCode,
    /// Child node indices, ordered by symbol.
    pub children: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct WapTree {
    alphabet: Alphabet,
    nodes: Vec<WapNode>,
    /// Per symbol id, the nodes carrying it in pre-order.
    header: Vec<Vec<usize>>,
    frequent: Vec<u32>,
    sequences: usize,
}

const ROOT: usize = WapTree::ROOT;

impl WapTree {
    /// Index of the root in [`nodes`](Self::nodes).
    pub const ROOT: usize = 0;

    pub fn root(&self) -> &WapNode {
        &self.nodes[ROOT]
    }

    pub fn node(&self, id: usize) -> &WapNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[WapNode] {
        &self.nodes
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.nodes[id].symbol.map(|s| self.alphabet.name(s))
    }

    /// Number of sequences in the source database, empty ones included.
    pub fn sequence_count(&self) -> usize {
        self.sequences
    }

    /// Node indices carrying `symbol`, in pre-order.
    pub fn header(&self, symbol: &str) -> &[usize] {
        match self.frequent.iter().find(|&&s| self.alphabet.name(s) == symbol) {
            Some(&s) => &self.header[s as usize],
            None => &[],
        }
    }

    /// The child of `parent` labelled `symbol`.
    pub fn child(&self, parent: usize, symbol: &str) -> Option<usize> {
        self.nodes[parent]
            .children
            .iter()
            .copied()
            .find(|&c| self.symbol(c) == Some(symbol))
    }

    fn insert(&mut self, seq: &[u32]) {
        let mut at = ROOT;
        self.nodes[ROOT].count += 1;
        for &sym in seq {
            let children = &self.nodes[at].children;
            let found = children.binary_search_by(|&c| self.nodes[c].symbol.cmp(&Some(sym)));
            at = match found {
                Ok(i) => children[i],
                Err(i) => {
                    let id = self.nodes.len();
                    self.nodes.push(WapNode {
                        symbol: Some(sym),
                        count: 0,
                        code: PositionCode::default(),
                        children: Vec::new(),
                    });
                    self.nodes[at].children.insert(i, id);
                    id
                }
            };
            self.nodes[at].count += 1;
        }
    }

    /// Assigns position codes and fills the header lists, both in pre-order.
    fn index(&mut self) {
        let mut stack = vec![ROOT];
        while let Some(id) = stack.pop() {
            if let Some(sym) = self.nodes[id].symbol {
                self.header[sym as usize].push(id);
            }
            let children = self.nodes[id].children.clone();
            for (i, &c) in children.iter().enumerate() {
                self.nodes[c].code = self.nodes[id].code.child(i, children.len());
            }
            stack.extend(children.iter().rev());
        }
    }

    /// Nodes labelled `sym` lying below one of `roots` with no other
    /// `sym` node between; `roots` must be pairwise unrelated and in
    /// pre-order, and so is the result.
    fn first_occurrences(&self, roots: &[usize], sym: u32) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        let mut r = 0;
        for &n in &self.header[sym as usize] {
            let code = &self.nodes[n].code;
            while r < roots.len() {
                let root = &self.nodes[roots[r]].code;
                // stop at the first root whose subtree does not end before `n`
                if code.0.starts_with(&root.0) || root > code {
                    break;
                }
                r += 1;
            }
            if r == roots.len() {
                break;
            }
            if !self.nodes[roots[r]].code.is_ancestor_of(code) {
                continue;
            }
            if let Some(&last) = out.last() {
                if self.nodes[last].code.is_ancestor_of(code) {
                    continue;
                }
            }
            out.push(n);
        }
        out
    }

    fn grow(
        &self,
        prefix: &mut Vec<u32>,
        roots: &[usize],
        max_length: usize,
        min_support: f64,
        out: &mut Vec<(Vec<u32>, u64)>,
    ) {
        if prefix.len() >= max_length {
            return;
        }
        for &sym in &self.frequent {
            let occ = self.first_occurrences(roots, sym);
            let count: u64 = occ.iter().map(|&n| self.nodes[n].count).sum();
            if !is_frequent(count, self.sequences, min_support) {
                continue;
            }
            prefix.push(sym);
            out.push((prefix.clone(), count));
            self.grow(prefix, &occ, max_length, min_support, out);
            prefix.pop();
        }
    }
}

/// Builds the tree from the frequent events of each sequence.
pub fn build_waptree(db: &SequenceDb, min_support: f64) -> Result<WapTree> {
    check_fraction("min_support", min_support)?;
    let (alphabet, seqs) = encode_sequences(db);
    let n = seqs.len();
    let mut counts = vec![0u64; alphabet.len()];
    let mut seen = vec![usize::MAX; alphabet.len()];
    for (i, s) in seqs.iter().enumerate() {
        for &x in s {
            if seen[x as usize] != i {
                seen[x as usize] = i;
                counts[x as usize] += 1;
            }
        }
    }
    let keep: Vec<bool> = counts.iter().map(|&c| is_frequent(c, n, min_support)).collect();
    let frequent = (0..alphabet.len() as u32).filter(|&s| keep[s as usize]).collect();
    let mut tree = WapTree {
        header: vec![Vec::new(); alphabet.len()],
        alphabet,
        nodes: vec![WapNode {
            symbol: None,
            count: 0,
            code: PositionCode::default(),
            children: Vec::new(),
        }],
        frequent,
        sequences: n,
    };
    for s in &seqs {
        let filtered: Vec<u32> = s.iter().copied().filter(|&x| keep[x as usize]).collect();
        if !filtered.is_empty() {
            tree.insert(&filtered);
        }
    }
    tree.index();
    Ok(tree)
}

/// Same contract and output as
/// [`mine_sequences_projection`](super::mine_sequences_projection).
pub fn mine_sequences_waptree(
    db: &SequenceDb,
    min_support: f64,
    max_length: Option<usize>,
) -> Result<Vec<SequentialPattern>> {
    let max_length = check_max_length(max_length)?;
    let tree = build_waptree(db, min_support)?;
    let mut found = Vec::new();
    tree.grow(&mut Vec::new(), &[ROOT], max_length, min_support, &mut found);
    let n = tree.sequences;
    let mut patterns: Vec<SequentialPattern> = found
        .into_iter()
        .map(|(ids, count)| SequentialPattern {
            items: tree.alphabet.names(&ids),
            support: count as f64 / n as f64,
            count,
        })
        .collect();
    sort_patterns(&mut patterns);
    Ok(patterns)
}
