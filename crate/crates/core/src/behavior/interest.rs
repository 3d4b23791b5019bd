use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{resource_path, Session};

pub const DEFAULT_FIRST_PAGE_BOOST: f64 = 2.0;

/// Token weights learned from one user's visits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterestProfile {
    pub weights: BTreeMap<String, f64>,
    pub first_page_boost: f64,
}

impl Default for InterestProfile {
    fn default() -> Self {
        InterestProfile {
            weights: BTreeMap::new(),
            first_page_boost: DEFAULT_FIRST_PAGE_BOOST,
        }
    }
}

impl InterestProfile {
    pub fn score(&self, resource: &str) -> f64 {
        path_tokens(resource)
            .iter()
            .map(|t| self.weights.get(t).copied().unwrap_or(0.0))
            .sum()
    }
}

/// Lowercased path segments with any extension removed:
/// `/Sports/cricket.html?x=1` gives `["sports", "cricket"]`.
pub fn path_tokens(resource: &str) -> Vec<String> {
    resource_path(resource)
        .split('/')
        .filter_map(|seg| {
            let stem = match seg.rfind('.') {
                Some(i) if i > 0 => &seg[..i],
                _ => seg,
            };
            (!stem.is_empty()).then(|| stem.to_lowercase())
        })
        .collect()
}

pub fn build_interest_profile(sessions: &[Session]) -> InterestProfile {
    build_interest_profile_with_boost(sessions, DEFAULT_FIRST_PAGE_BOOST).expect("default boost is valid")
}

/// Every token of every visited page adds 1, or `first_page_boost` when the
/// page opened its session.
pub fn build_interest_profile_with_boost(sessions: &[Session], first_page_boost: f64) -> Result<InterestProfile> {
    if !(first_page_boost >= 1.0 && first_page_boost.is_finite()) {
        return Err(Error::param(
            "first_page_boost",
            format!("{first_page_boost} must be at least 1"),
        ));
    }
    let mut weights: BTreeMap<String, f64> = BTreeMap::new();
    for s in sessions {
        for (i, v) in s.visits.iter().enumerate() {
            let w = if i == 0 { first_page_boost } else { 1.0 };
            for token in path_tokens(&v.resource) {
                *weights.entry(token).or_insert(0.0) += w;
            }
        }
    }
    Ok(InterestProfile {
        weights,
        first_page_boost,
    })
}

/// Stable sort by descending profile score.
pub fn rerank(profile: &InterestProfile, candidates: &[String]) -> Vec<String> {
    let mut scored: Vec<(f64, &String)> = candidates.iter().map(|c| (profile.score(c), c)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.into_iter().map(|(_, c)| c.clone()).collect()
}
