use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{is_frequent, Alphabet};
use crate::error::{check_fraction, Result};
use crate::preprocess::TransactionDb;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentItemset {
    pub items: Vec<String>,
    pub count: u64,
    pub support: f64,
}

/// `antecedent -> consequent`, both sides sorted and disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule {
    pub antecedent: Vec<String>,
    pub consequent: Vec<String>,
    pub support: f64,
    pub confidence: f64,
    /// Transactions containing both sides.
    pub count: u64,
    /// Transactions containing the antecedent.
    pub antecedent_count: u64,
}

impl AssociationRule {
    pub fn len(&self) -> usize {
        self.antecedent.len() + self.consequent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct Level {
    sets: Vec<Vec<u32>>,
    counts: Vec<u64>,
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

/// Level-wise Apriori. Candidates of size k+1 join two frequent k-sets
/// sharing their first k-1 items and survive only if every k-subset is
/// frequent.
fn apriori_levels(alphabet: &Alphabet, txs: &[Vec<u32>], min_support: f64) -> Vec<Level> {
    let n = txs.len();
    let mut singles = vec![0u64; alphabet.len()];
    for t in txs {
        for &i in t {
            singles[i as usize] += 1;
        }
    }
    let mut current = Level {
        sets: Vec::new(),
        counts: Vec::new(),
    };
    for (i, &c) in singles.iter().enumerate() {
        if is_frequent(c, n, min_support) {
            current.sets.push(vec![i as u32]);
            current.counts.push(c);
        }
    }
    let mut levels = Vec::new();
    while !current.sets.is_empty() {
        let known: HashSet<&[u32]> = current.sets.iter().map(Vec::as_slice).collect();
        let mut candidates = Vec::new();
        for (a_idx, a) in current.sets.iter().enumerate() {
            let k = a.len();
            for b in &current.sets[a_idx + 1..] {
                if a[..k - 1] != b[..k - 1] {
                    // sets are sorted, so no later b shares the prefix
                    break;
                }
                let mut cand = a.clone();
                cand.push(b[k - 1]);
                let closed = (0..cand.len()).all(|skip| {
                    let sub: Vec<u32> = cand
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != skip)
                        .map(|(_, &x)| x)
                        .collect();
                    known.contains(sub.as_slice())
                });
                if closed {
                    candidates.push(cand);
                }
            }
        }
        let mut next = Level {
            sets: Vec::new(),
            counts: Vec::new(),
        };
        for cand in candidates {
            let c = txs.iter().filter(|t| is_subset(&cand, t)).count() as u64;
            if is_frequent(c, n, min_support) {
                next.sets.push(cand);
                next.counts.push(c);
            }
        }
        levels.push(current);
        current = next;
    }
    levels
}

fn encode(db: &TransactionDb) -> (Alphabet, Vec<Vec<u32>>) {
    let alphabet = Alphabet::new(db.transactions.iter().flat_map(|t| t.items.iter().map(String::as_str)));
    let txs = db
        .transactions
        .iter()
        .map(|t| t.items.iter().map(|i| alphabet.id(i)).collect())
        .collect();
    (alphabet, txs)
}

/// All itemsets whose support reaches `min_support`, by size then
/// lexicographically.
pub fn frequent_itemsets(db: &TransactionDb, min_support: f64) -> Result<Vec<FrequentItemset>> {
    check_fraction("min_support", min_support)?;
    let n = db.len();
    let (alphabet, txs) = encode(db);
    let levels = apriori_levels(&alphabet, &txs, min_support);
    Ok(levels
        .iter()
        .flat_map(|l| l.sets.iter().zip(&l.counts))
        .map(|(set, &count)| FrequentItemset {
            items: alphabet.names(set),
            count,
            support: count as f64 / n as f64,
        })
        .collect())
}

pub fn mine_association_rules(
    db: &TransactionDb,
    min_support: f64,
    min_confidence: f64,
) -> Result<Vec<AssociationRule>> {
    check_fraction("min_support", min_support)?;
    check_fraction("min_confidence", min_confidence)?;
    let n = db.len();
    let (alphabet, txs) = encode(db);
    let levels = apriori_levels(&alphabet, &txs, min_support);
    let count_of = |set: &[u32]| -> u64 {
        let level = &levels[set.len() - 1];
        let idx = level
            .sets
            .binary_search_by(|s| s.as_slice().cmp(set))
            .expect("subsets of frequent itemsets are frequent");
        level.counts[idx]
    };

    let mut rules = Vec::new();
    for level in levels.iter().skip(1) {
        for (set, &count) in level.sets.iter().zip(&level.counts) {
            let k = set.len();
            // every non-empty proper subset as antecedent
            for mask in 1..(1u64 << k) - 1 {
                let (ante, cons): (Vec<u32>, Vec<u32>) = {
                    let mut a = Vec::new();
                    let mut c = Vec::new();
                    for (j, &x) in set.iter().enumerate() {
                        if mask & (1 << j) != 0 {
                            a.push(x);
                        } else {
                            c.push(x);
                        }
                    }
                    (a, c)
                };
                let antecedent_count = count_of(&ante);
                let confidence = count as f64 / antecedent_count as f64;
                if confidence >= min_confidence {
                    rules.push(AssociationRule {
                        antecedent: alphabet.names(&ante),
                        consequent: alphabet.names(&cons),
                        support: count as f64 / n as f64,
                        confidence,
                        count,
                        antecedent_count,
                    });
                }
            }
        }
    }
    rules.sort_by(rule_order);
    Ok(rules)
}

/// Support desc, confidence desc, then antecedent and consequent
/// lexicographically. Compares exact counts, not the rounded fractions.
fn rule_order(a: &AssociationRule, b: &AssociationRule) -> Ordering {
    b.count
        .cmp(&a.count)
        .then_with(|| {
            // a.count/a.ante vs b.count/b.ante, cross-multiplied
            let lhs = u128::from(b.count) * u128::from(a.antecedent_count);
            let rhs = u128::from(a.count) * u128::from(b.antecedent_count);
            lhs.cmp(&rhs)
        })
        .then_with(|| a.antecedent.cmp(&b.antecedent))
        .then_with(|| a.consequent.cmp(&b.consequent))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig6_pages() -> TransactionDb {
        TransactionDb::from_sets([
            (123, vec!["Condition_home.htm", "See_doctor.htm"]),
            (134, vec!["Side_effects.htm", "See_doctor.htm", "Screening.htm"]),
            (245, vec!["See_doctor.htm", "Condition_home.htm"]),
        ])
    }

    #[test]
    fn fig6_page_rule() {
        let rules = mine_association_rules(&fig6_pages(), 0.6, 0.75).unwrap();
        assert_eq!(rules.len(), 1);
        let r = &rules[0];
        assert_eq!(r.antecedent, ["Condition_home.htm"]);
        assert_eq!(r.consequent, ["See_doctor.htm"]);
        assert!((r.support - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.confidence, 1.0);
    }

    #[test]
    fn fig6_baskets() {
        let db = TransactionDb::from_sets([
            (123, vec!["Cola", "Pretzels", "Chips"]),
            (134, vec!["Diapers", "Cola", "Band aids", "Apples"]),
            (245, vec!["Cola", "Pretzels"]),
        ]);
        let rules = mine_association_rules(&db, 0.6, 0.75).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(
            (rules[0].antecedent.as_slice(), rules[0].consequent.as_slice()),
            (&["Pretzels".to_string()][..], &["Cola".to_string()][..])
        );
        assert_eq!(rules[0].confidence, 1.0);
    }

    #[test]
    fn empty_db() {
        assert!(mine_association_rules(&TransactionDb::default(), 0.5, 0.5)
            .unwrap()
            .is_empty());
        assert!(frequent_itemsets(&TransactionDb::default(), 0.5).unwrap().is_empty());
    }

    #[test]
    fn bad_thresholds() {
        let db = fig6_pages();
        assert!(mine_association_rules(&db, 0.0, 0.5).is_err());
        assert!(mine_association_rules(&db, 0.5, 1.5).is_err());
        assert!(mine_association_rules(&db, f64::NAN, 0.5).is_err());
    }

    #[test]
    fn three_item_rules_and_order() {
        let db = TransactionDb::from_sets([
            (1, vec!["a", "b", "c"]),
            (2, vec!["a", "b", "c"]),
            (3, vec!["a", "b"]),
            (4, vec!["c"]),
        ]);
        let rules = mine_association_rules(&db, 0.5, 0.1).unwrap();
        // {a,b,c} has count 2: 6 splits; {a,b} count 3: 2 splits; {a,c},{b,c} count 2: 4 splits
        assert_eq!(rules.len(), 12);
        assert_eq!(rules[0].count, 3);
        for w in rules.windows(2) {
            assert_ne!(rule_order(&w[0], &w[1]), Ordering::Greater);
        }
    }
}
