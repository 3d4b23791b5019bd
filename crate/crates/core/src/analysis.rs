//! Post-processing of mined results: dropping patterns that only restate the
//! site's own hyperlinks, predicate filtering, and report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logfile::LogEntry;
use crate::mining::{AssociationRule, NavigationGraph, SequentialPattern, SessionCluster};

/// Version written into, and required from, JSON reports.
pub const REPORT_VERSION: u32 = 1;

/// The site's directed hyperlinks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteTopology {
    pub links: BTreeSet<(String, String)>,
    /// Where the links came from, e.g. `csv:site.csv` or `referrers`.
    pub source: String,
}

impl SiteTopology {
    pub fn from_links<I, A, B>(links: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        SiteTopology {
            links: links.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
            source: "inline".into(),
        }
    }

    pub fn contains(&self, from: &str, to: &str) -> bool {
        // BTreeSet<(String, String)> can't be probed with borrowed strs
        self.links.contains(&(from.to_string(), to.to_string()))
    }

    /// Reads a two-column `from,to` CSV. A first row of exactly `from,to`
    /// is treated as a header.
    pub fn read_csv<R: Read>(input: R, source: impl Into<String>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut links = BTreeSet::new();
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            if row.len() != 2 {
                return Err(Error::Usage(format!(
                    "topology row {} has {} columns, expected 2",
                    i + 1,
                    row.len()
                )));
            }
            if i == 0 && &row[0] == "from" && &row[1] == "to" {
                continue;
            }
            links.insert((row[0].to_string(), row[1].to_string()));
        }
        Ok(SiteTopology {
            links,
            source: source.into(),
        })
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, format!("csv:{}", path.display()))
    }

    /// Links observed as referrer -> resource in Combined-format entries.
    /// Absolute referrer URLs are reduced to their path.
    pub fn from_referrers(entries: &[LogEntry]) -> Self {
        let links = entries
            .iter()
            .filter_map(|e| {
                let referrer = e.referrer.as_deref()?;
                Some((referrer_path(referrer).to_string(), e.resource.clone()))
            })
            .collect();
        SiteTopology {
            links,
            source: "referrers".into(),
        }
    }
}

fn referrer_path(referrer: &str) -> &str {
    let after_scheme = match referrer.find("://") {
        Some(i) => &referrer[i + 3..],
        None => return referrer,
    };
    match after_scheme.find('/') {
        Some(i) => &after_scheme[i..],
        None => "/",
    }
}

/// Something the site filter can judge against the topology.
pub trait LinkConfirming {
    /// True when the item says nothing beyond the site's direct links.
    fn confirms_links(&self, topology: &SiteTopology) -> bool;
}

impl LinkConfirming for SequentialPattern {
    /// Patterns of one page never confirm a link.
    fn confirms_links(&self, topology: &SiteTopology) -> bool {
        self.items.len() >= 2 && self.items.windows(2).all(|w| topology.contains(&w[0], &w[1]))
    }
}

impl LinkConfirming for AssociationRule {
    /// Only `{a} -> {b}` rules can confirm a link.
    fn confirms_links(&self, topology: &SiteTopology) -> bool {
        match (self.antecedent.as_slice(), self.consequent.as_slice()) {
            ([a], [b]) => topology.contains(a, b),
            _ => false,
        }
    }
}

/// Removes the items that merely confirm direct hyperlinks; order kept.
pub fn site_filter<T: LinkConfirming + Clone>(items: &[T], topology: &SiteTopology) -> Vec<T> {
    items.iter().filter(|p| !p.confirms_links(topology)).cloned().collect()
}

/// Conjunction of optional constraints on mined results.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternPredicate {
    pub min_support: Option<f64>,
    /// Ignored for sequential patterns, which have no confidence.
    pub min_confidence: Option<f64>,
    pub min_length: Option<usize>,
    pub max_length: Option<usize>,
    /// Every listed page must occur in the result.
    pub must_contain: Option<BTreeSet<String>>,
}

impl PatternPredicate {
    pub fn validate(&self) -> Result<()> {
        if let (Some(lo), Some(hi)) = (self.min_length, self.max_length) {
            if lo > hi {
                return Err(Error::param("min_length", format!("{lo} exceeds max_length {hi}")));
            }
        }
        for (name, v) in [
            ("min_support", self.min_support),
            ("min_confidence", self.min_confidence),
        ] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::param(name, format!("{v} is not in [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// The fields a [`PatternPredicate`] inspects.
pub trait Filterable {
    fn support(&self) -> f64;
    fn confidence(&self) -> Option<f64>;
    fn length(&self) -> usize;
    fn contains_page(&self, page: &str) -> bool;
}

impl Filterable for SequentialPattern {
    fn support(&self) -> f64 {
        self.support
    }
    fn confidence(&self) -> Option<f64> {
        None
    }
    fn length(&self) -> usize {
        self.items.len()
    }
    fn contains_page(&self, page: &str) -> bool {
        self.items.iter().any(|i| i == page)
    }
}

impl Filterable for AssociationRule {
    fn support(&self) -> f64 {
        self.support
    }
    fn confidence(&self) -> Option<f64> {
        Some(self.confidence)
    }
    fn length(&self) -> usize {
        self.len()
    }
    fn contains_page(&self, page: &str) -> bool {
        self.antecedent.iter().chain(&self.consequent).any(|i| i == page)
    }
}

impl PatternPredicate {
    pub fn matches<T: Filterable>(&self, p: &T) -> bool {
        self.min_support.is_none_or(|m| p.support() >= m)
            && match (self.min_confidence, p.confidence()) {
                (Some(m), Some(c)) => c >= m,
                _ => true,
            }
            && self.min_length.is_none_or(|m| p.length() >= m)
            && self.max_length.is_none_or(|m| p.length() <= m)
            && self
                .must_contain
                .as_ref()
                .is_none_or(|pages| pages.iter().all(|page| p.contains_page(page)))
    }
}

pub fn filter_patterns<T: Filterable + Clone>(items: &[T], predicate: &PatternPredicate) -> Vec<T> {
    items.iter().filter(|p| predicate.matches(*p)).cloned().collect()
}

/// A result set that can be rendered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "items", rename_all = "lowercase")]
pub enum Results {
    Graph(NavigationGraph),
    Rules(Vec<AssociationRule>),
    Patterns(Vec<SequentialPattern>),
    Clusters(Vec<SessionCluster>),
}

impl Results {
    pub fn kind(&self) -> &'static str {
        match self {
            Results::Graph(_) => "graph",
            Results::Rules(_) => "rules",
            Results::Patterns(_) => "patterns",
            Results::Clusters(_) => "clusters",
        }
    }
}

/// JSON envelope of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    /// Free-form provenance such as the topology source.
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    #[serde(flatten)]
    pub results: Results,
}

impl Report {
    pub fn new(results: Results) -> Self {
        Report {
            version: REPORT_VERSION,
            meta: BTreeMap::new(),
            results,
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Dot,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "dot" => Ok(OutputFormat::Dot),
            other => Err(Error::Usage(format!("unknown output format `{other}`"))),
        }
    }
}

/// Multi-page CSV cells join their pages with this separator.
pub const CSV_ITEM_SEPARATOR: &str = " ";

pub fn render_report(report: &Report, format: OutputFormat) -> Result<Vec<u8>> {
    match format {
        OutputFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report)?;
            out.push(b'\n');
            Ok(out)
        }
        OutputFormat::Dot => match &report.results {
            Results::Graph(g) => Ok(g.to_dot().into_bytes()),
            other => Err(Error::Usage(format!("DOT output needs a graph, not {}", other.kind()))),
        },
        OutputFormat::Csv => render_csv(&report.results),
    }
}

fn render_csv(results: &Results) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match results {
        Results::Graph(g) => {
            w.write_record(["from", "to", "count"])?;
            for ((a, b), c) in &g.edges {
                w.write_record([a.as_str(), b.as_str(), &c.to_string()])?;
            }
        }
        Results::Rules(rules) => {
            w.write_record([
                "antecedent",
                "consequent",
                "support",
                "confidence",
                "count",
                "antecedent_count",
            ])?;
            for r in rules {
                w.write_record([
                    r.antecedent.join(CSV_ITEM_SEPARATOR),
                    r.consequent.join(CSV_ITEM_SEPARATOR),
                    r.support.to_string(),
                    r.confidence.to_string(),
                    r.count.to_string(),
                    r.antecedent_count.to_string(),
                ])?;
            }
        }
        Results::Patterns(patterns) => {
            w.write_record(["pattern", "length", "support", "count"])?;
            for p in patterns {
                w.write_record([
                    p.items.join(CSV_ITEM_SEPARATOR),
                    p.items.len().to_string(),
                    p.support.to_string(),
                    p.count.to_string(),
                ])?;
            }
        }
        Results::Clusters(clusters) => {
            w.write_record(["cluster", "medoid", "size", "members"])?;
            for (i, c) in clusters.iter().enumerate() {
                let members: Vec<String> = c.members.iter().map(u64::to_string).collect();
                w.write_record([
                    i.to_string(),
                    c.medoid.to_string(),
                    c.members.len().to_string(),
                    members.join(CSV_ITEM_SEPARATOR),
                ])?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Reads a JSON report written by [`render_report`].
pub fn read_report(bytes: &[u8]) -> Result<Report> {
    let report: Report = serde_json::from_slice(bytes)?;
    if report.version != REPORT_VERSION {
        return Err(Error::Usage(format!(
            "report version {} is not supported (expected {REPORT_VERSION})",
            report.version
        )));
    }
    Ok(report)
}
