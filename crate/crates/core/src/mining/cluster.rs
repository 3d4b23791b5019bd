use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::Session;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCluster {
    pub members: BTreeSet<u64>,
    pub medoid: u64,
}

pub fn jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Single-link clustering: sessions whose page sets have Jaccard similarity
/// at least `threshold` are linked, and clusters are the connected
/// components. The medoid maximises summed similarity to the other members,
/// ties going to the lowest session id. Clusters are ordered by their
/// smallest member id.
pub fn cluster_sessions(sessions: &[Session], threshold: f64) -> Result<Vec<SessionCluster>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::param(
            "similarity_threshold",
            format!("{threshold} is not in [0, 1]"),
        ));
    }
    let sets: Vec<BTreeSet<&str>> = sessions.iter().map(|s| s.pages().collect()).collect();
    let n = sessions.len();
    let mut sim = vec![vec![0.0; n]; n];
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        sim[i][i] = 1.0;
        for j in i + 1..n {
            let s = jaccard(&sets[i], &sets[j]);
            sim[i][j] = s;
            sim[j][i] = s;
            if s >= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut clusters: Vec<SessionCluster> = groups
        .into_values()
        .map(|members| {
            let medoid = members
                .iter()
                .map(|&m| {
                    let total: f64 = members.iter().filter(|&&o| o != m).map(|&o| sim[m][o]).sum();
                    (m, total)
                })
                .max_by(|a, b| {
                    a.1.total_cmp(&b.1)
                        .then_with(|| sessions[b.0].id.cmp(&sessions[a.0].id))
                })
                .map(|(m, _)| sessions[m].id)
                .expect("components are non-empty");
            SessionCluster {
                members: members.iter().map(|&m| sessions[m].id).collect(),
                medoid,
            }
        })
        .collect();
    clusters.sort_by_key(|c| *c.members.first().expect("non-empty"));
    Ok(clusters)
}
