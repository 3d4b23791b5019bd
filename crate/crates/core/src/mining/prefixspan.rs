//! Prefix-projection sequential pattern mining over pseudo-projected
//! databases: a projection is a list of `(sequence, offset)` pairs, never a
//! copy of the suffixes.

use rayon::prelude::*;

use super::{check_max_length, encode_sequences, is_frequent, sort_patterns, Alphabet, SequentialPattern};
use crate::error::{check_fraction, Result};
use crate::preprocess::SequenceDb;

struct Miner<'a> {
    seqs: &'a [Vec<u32>],
    n: usize,
    min_support: f64,
    max_length: usize,
    alphabet_len: usize,
}

impl Miner<'_> {
    /// Per-item count of projected suffixes containing the item.
    fn count(&self, projection: &[(u32, u32)]) -> Vec<u64> {
        let mut counts = vec![0u64; self.alphabet_len];
        let mut seen = vec![u32::MAX; self.alphabet_len];
        for &(s, off) in projection {
            for &item in &self.seqs[s as usize][off as usize..] {
                if seen[item as usize] != s {
                    seen[item as usize] = s;
                    counts[item as usize] += 1;
                }
            }
        }
        counts
    }

    fn project(&self, projection: &[(u32, u32)], item: u32) -> Vec<(u32, u32)> {
        projection
            .iter()
            .filter_map(|&(s, off)| {
                let seq = &self.seqs[s as usize];
                seq[off as usize..]
                    .iter()
                    .position(|&x| x == item)
                    .map(|p| (s, off + p as u32 + 1))
            })
            .collect()
    }

    fn frequent_items(&self, projection: &[(u32, u32)]) -> Vec<(u32, u64)> {
        self.count(projection)
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| is_frequent(c, self.n, self.min_support))
            .map(|(i, c)| (i as u32, c))
            .collect()
    }

    /// Depth-first growth of `prefix`; output is in lexicographic order.
    fn grow(&self, prefix: &mut Vec<u32>, projection: &[(u32, u32)], out: &mut Vec<(Vec<u32>, u64)>) {
        if prefix.len() >= self.max_length {
            return;
        }
        for (item, count) in self.frequent_items(projection) {
            prefix.push(item);
            out.push((prefix.clone(), count));
            let next = self.project(projection, item);
            self.grow(prefix, &next, out);
            prefix.pop();
        }
    }
}

/// Mines every pattern contained (as a subsequence, once per sequence) in
/// at least `min_support` of the sequences, up to `max_length` items.
/// Results come highest support first, ties in lexicographic order.
pub fn mine_sequences_projection(
    db: &SequenceDb,
    min_support: f64,
    max_length: Option<usize>,
) -> Result<Vec<SequentialPattern>> {
    check_fraction("min_support", min_support)?;
    let max_length = check_max_length(max_length)?;
    let (alphabet, seqs) = encode_sequences(db);
    let miner = Miner {
        seqs: &seqs,
        n: seqs.len(),
        min_support,
        max_length,
        alphabet_len: alphabet.len(),
    };
    let root: Vec<(u32, u32)> = (0..seqs.len() as u32).map(|s| (s, 0)).collect();
    // independent first-level prefixes mined in parallel, concatenated in order
    let branches: Vec<Vec<(Vec<u32>, u64)>> = miner
        .frequent_items(&root)
        .into_par_iter()
        .map(|(item, count)| {
            let mut out = vec![(vec![item], count)];
            let mut prefix = vec![item];
            miner.grow(&mut prefix, &miner.project(&root, item), &mut out);
            out
        })
        .collect();
    let mut patterns = decode(&alphabet, branches.into_iter().flatten(), seqs.len());
    sort_patterns(&mut patterns);
    Ok(patterns)
}

fn decode(alphabet: &Alphabet, found: impl Iterator<Item = (Vec<u32>, u64)>, n: usize) -> Vec<SequentialPattern> {
    found
        .map(|(ids, count)| SequentialPattern {
            items: alphabet.names(&ids),
            support: count as f64 / n as f64,
            count,
        })
        .collect()
}
