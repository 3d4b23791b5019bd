//! Turning raw access-log entries into mining input: cleaning, user
//! identification, sessionization, and conversion into transaction and
//! sequence databases.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logfile::LogEntry;

pub const DEFAULT_SESSION_TIMEOUT: i64 = 1800;

pub const DEFAULT_ASSET_EXTENSIONS: [&str; 12] = [
    ".gif", ".jpg", ".jpeg", ".png", ".bmp", ".ico", ".css", ".js", ".swf", ".mp3", ".mp4", ".avi",
];

/// Rules for dropping entries that are not page views.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanConfig {
    /// Lowercase suffixes, each starting with `.`.
    pub asset_extensions: BTreeSet<String>,
    /// Drop responses with status >= 400.
    pub drop_error_statuses: bool,
    pub drop_non_get: bool,
    /// Case-insensitive user-agent substrings to drop. Empty by default.
    pub agent_blocklist: Vec<String>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            asset_extensions: DEFAULT_ASSET_EXTENSIONS.iter().map(|s| s.to_string()).collect(),
            drop_error_statuses: true,
            drop_non_get: false,
            agent_blocklist: Vec::new(),
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<()> {
        for ext in &self.asset_extensions {
            if !ext.starts_with('.') || ext.len() < 2 {
                return Err(Error::config(
                    "clean.asset_extensions",
                    format!("`{ext}` must start with '.'"),
                ));
            }
            if ext.chars().any(|c| c.is_uppercase()) {
                return Err(Error::config(
                    "clean.asset_extensions",
                    format!("`{ext}` must be lowercase"),
                ));
            }
        }
        Ok(())
    }

    pub fn is_asset(&self, resource: &str) -> bool {
        let path = resource_path(resource).to_lowercase();
        self.asset_extensions.iter().any(|ext| path.ends_with(ext.as_str()))
    }

    /// True when `entry` matches at least one drop rule.
    pub fn rejects(&self, entry: &LogEntry) -> bool {
        if self.drop_error_statuses && entry.status >= 400 {
            return true;
        }
        if self.drop_non_get && entry.method != "GET" {
            return true;
        }
        if self.is_asset(&entry.resource) {
            return true;
        }
        if let Some(agent) = &entry.user_agent {
            let agent = agent.to_lowercase();
            if self.agent_blocklist.iter().any(|b| agent.contains(&b.to_lowercase())) {
                return true;
            }
        }
        false
    }
}

/// The path part of a request target, without query string or fragment.
pub fn resource_path(resource: &str) -> &str {
    let end = resource.find(['?', '#']).unwrap_or(resource.len());
    &resource[..end]
}

/// Keeps the entries that match no drop rule, in their original order.
pub fn clean(entries: &[LogEntry], config: &CleanConfig) -> Vec<LogEntry> {
    entries.iter().filter(|e| !config.rejects(e)).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UserKind {
    AuthUser,
    IpAgent,
}

/// How a visitor is told apart: the authenticated name when the server has
/// one, otherwise client address plus user agent. Serialized in its text
/// form, e.g. `"user:frank"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct UserKey {
    pub kind: UserKind,
    pub value: String,
}

impl UserKey {
    pub fn auth(name: impl Into<String>) -> Self {
        UserKey {
            kind: UserKind::AuthUser,
            value: name.into(),
        }
    }

    pub fn ip_agent(host: &str, agent: Option<&str>) -> Self {
        UserKey {
            kind: UserKind::IpAgent,
            value: format!("{}|{}", host, agent.unwrap_or("-")),
        }
    }

    pub fn of(entry: &LogEntry) -> Self {
        match &entry.auth_user {
            Some(name) => UserKey::auth(name.clone()),
            None => UserKey::ip_agent(&entry.host, entry.user_agent.as_deref()),
        }
    }
}

/// Text form used in CSV files: `user:<name>` or `ip:<host>|<agent>`.
impl fmt::Display for UserKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            UserKind::AuthUser => write!(f, "user:{}", self.value),
            UserKind::IpAgent => write!(f, "ip:{}", self.value),
        }
    }
}

impl FromStr for UserKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(name) = s.strip_prefix("user:") {
            Ok(UserKey::auth(name))
        } else if let Some(rest) = s.strip_prefix("ip:") {
            Ok(UserKey {
                kind: UserKind::IpAgent,
                value: rest.to_string(),
            })
        } else {
            Err(Error::Usage(format!("user key `{s}` must start with `user:` or `ip:`")))
        }
    }
}

impl From<UserKey> for String {
    fn from(k: UserKey) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for UserKey {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Groups entries by visitor; each list keeps input order.
pub fn identify_users(entries: &[LogEntry]) -> BTreeMap<UserKey, Vec<LogEntry>> {
    let mut users: BTreeMap<UserKey, Vec<LogEntry>> = BTreeMap::new();
    for e in entries {
        users.entry(UserKey::of(e)).or_default().push(e.clone());
    }
    users
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub resource: String,
    pub timestamp: DateTime<FixedOffset>,
    /// Seconds until the next visit of the same session; `None` for the last.
    pub dwell: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: u64,
    pub user: UserKey,
    pub visits: Vec<Visit>,
    pub start: DateTime<FixedOffset>,
    pub end: DateTime<FixedOffset>,
}

impl Session {
    fn from_visits(id: u64, user: UserKey, stamps: Vec<(String, DateTime<FixedOffset>)>) -> Session {
        let start = stamps[0].1;
        let end = stamps[stamps.len() - 1].1;
        let mut visits: Vec<Visit> = Vec::with_capacity(stamps.len());
        for (i, (resource, timestamp)) in stamps.iter().enumerate() {
            let dwell = stamps.get(i + 1).map(|(_, next)| (*next - *timestamp).num_seconds());
            visits.push(Visit {
                resource: resource.clone(),
                timestamp: *timestamp,
                dwell,
            });
        }
        Session {
            id,
            user,
            visits,
            start,
            end,
        }
    }

    pub fn elapsed_seconds(&self) -> i64 {
        (self.end - self.start).num_seconds()
    }

    pub fn pages(&self) -> impl Iterator<Item = &str> {
        self.visits.iter().map(|v| v.resource.as_str())
    }
}

/// Splits one visitor's entries into sessions.
///
/// Entries are stably sorted by instant first. A gap longer than `timeout`
/// seconds starts a new session; a gap of exactly `timeout` does not.
/// Session ids count up from 0.
pub fn sessionize(user_entries: &[LogEntry], timeout: i64) -> Result<Vec<Session>> {
    if timeout <= 0 {
        return Err(Error::param("timeout", format!("{timeout} must be positive")));
    }
    let mut order: Vec<&LogEntry> = user_entries.iter().collect();
    order.sort_by_key(|e| e.timestamp);

    let mut sessions = Vec::new();
    let mut current: Vec<(String, DateTime<FixedOffset>)> = Vec::new();
    let mut user: Option<UserKey> = None;
    for e in order {
        let key = user.get_or_insert_with(|| UserKey::of(e));
        if let Some((_, last)) = current.last() {
            if (e.timestamp - *last).num_seconds() > timeout {
                let visits = std::mem::take(&mut current);
                sessions.push(Session::from_visits(sessions.len() as u64, key.clone(), visits));
            }
        }
        current.push((e.resource.clone(), e.timestamp));
    }
    if let Some(key) = user {
        if !current.is_empty() {
            sessions.push(Session::from_visits(sessions.len() as u64, key, current));
        }
    }
    Ok(sessions)
}

/// Sessionizes every visitor and numbers sessions globally, in user-key
/// order and then time order.
pub fn sessionize_users(users: &BTreeMap<UserKey, Vec<LogEntry>>, timeout: i64) -> Result<Vec<Session>> {
    let mut all = Vec::new();
    for entries in users.values() {
        for mut s in sessionize(entries, timeout)? {
            s.id = all.len() as u64;
            all.push(s);
        }
    }
    Ok(all)
}

/// Clean, identify users and sessionize in one step.
pub fn sessions_from_entries(entries: &[LogEntry], config: &CleanConfig, timeout: i64) -> Result<Vec<Session>> {
    let cleaned = clean(entries, config);
    sessionize_users(&identify_users(&cleaned), timeout)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub session_id: u64,
    pub items: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionDb {
    pub transactions: Vec<Transaction>,
}

impl TransactionDb {
    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Builds a database from `(session_id, items)` pairs.
    pub fn from_sets<I, S, T>(sets: I) -> Self
    where
        I: IntoIterator<Item = (u64, S)>,
        S: IntoIterator<Item = T>,
        T: Into<String>,
    {
        TransactionDb {
            transactions: sets
                .into_iter()
                .map(|(session_id, items)| Transaction {
                    session_id,
                    items: items.into_iter().map(Into::into).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequence {
    pub session_id: u64,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceDb {
    pub sequences: Vec<Sequence>,
}

impl SequenceDb {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Builds a database with session ids `0..n`.
    pub fn from_lists<I, S, T>(lists: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = T>,
        T: Into<String>,
    {
        SequenceDb {
            sequences: lists
                .into_iter()
                .enumerate()
                .map(|(i, items)| Sequence {
                    session_id: i as u64,
                    items: items.into_iter().map(Into::into).collect(),
                })
                .collect(),
        }
    }
}

pub fn to_transactions(sessions: &[Session]) -> TransactionDb {
    TransactionDb {
        transactions: sessions
            .iter()
            .map(|s| Transaction {
                session_id: s.id,
                items: s.pages().map(str::to_string).collect(),
            })
            .collect(),
    }
}

pub fn to_sequences(sessions: &[Session]) -> SequenceDb {
    SequenceDb {
        sequences: sessions
            .iter()
            .map(|s| Sequence {
                session_id: s.id,
                items: s.pages().map(str::to_string).collect(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logfile::parse_combined;

    fn entry(host: &str, user: Option<&str>, agent: &str, secs: i64, resource: &str, status: u16) -> LogEntry {
        let line = format!(
            r#"{host} - {} [10/Oct/2000:13:55:36 -0700] "GET {resource} HTTP/1.0" {status} 100 "-" "{agent}""#,
            user.unwrap_or("-")
        );
        let mut e = parse_combined(&line).unwrap();
        e.timestamp += chrono::Duration::seconds(secs);
        e
    }

    #[test]
    fn clean_defaults() {
        let cfg = CleanConfig::default();
        let gif = entry("h", None, "a", 0, "/apache_pb.gif", 200);
        let page = entry("h", None, "a", 0, "/index.html", 200);
        let missing = entry("h", None, "a", 0, "/gone.html", 404);
        let upper = entry("h", None, "a", 0, "/IMG/Logo.PNG?v=2", 200);
        let out = clean(&[gif, page.clone(), missing, upper], &cfg);
        assert_eq!(out, vec![page]);
    }

    #[test]
    fn clean_options() {
        let mut post = entry("h", None, "a", 0, "/form.html", 200);
        post.method = "POST".into();
        let bot = entry("h", None, "Googlebot/2.1", 0, "/a.html", 200);
        let err = entry("h", None, "a", 0, "/e.html", 500);
        let all = vec![post.clone(), bot.clone(), err.clone()];

        let keep_errors = CleanConfig {
            drop_error_statuses: false,
            ..CleanConfig::default()
        };
        assert_eq!(clean(&all, &keep_errors).len(), 3);

        let strict = CleanConfig {
            drop_non_get: true,
            agent_blocklist: vec!["googlebot".into()],
            ..CleanConfig::default()
        };
        assert!(clean(&all, &strict).is_empty());
    }

    #[test]
    fn config_validation() {
        let mut cfg = CleanConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.asset_extensions.insert("gif".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn user_keys() {
        let a = entry("10.0.0.1", None, "A", 0, "/x.html", 200);
        let b = entry("10.0.0.1", None, "B", 0, "/x.html", 200);
        let f = entry("10.9.9.9", Some("frank"), "A", 0, "/x.html", 200);
        let users = identify_users(&[a, b, f]);
        assert_eq!(users.len(), 3);
        assert!(users.contains_key(&UserKey::auth("frank")));
        assert!(users.contains_key(&UserKey::ip_agent("10.0.0.1", Some("A"))));
    }

    #[test]
    fn user_key_text_form() {
        for key in [
            UserKey::auth("frank"),
            UserKey::ip_agent("1.2.3.4", Some("Mozilla/4.08 [en]")),
        ] {
            assert_eq!(key.to_string().parse::<UserKey>().unwrap(), key);
        }
        assert!("frank".parse::<UserKey>().is_err());
    }

    #[test]
    fn session_boundaries() {
        let at = |s| entry("h", None, "a", s, "/p.html", 200);
        assert_eq!(sessionize(&[at(0), at(600), at(1200)], 1800).unwrap().len(), 1);
        assert_eq!(sessionize(&[at(0), at(1860)], 1800).unwrap().len(), 2);
        assert_eq!(sessionize(&[at(0), at(1800)], 1800).unwrap().len(), 1);
        assert!(sessionize(&[at(0)], 0).is_err());
        assert!(sessionize(&[at(0)], -5).is_err());
        assert!(sessionize(&[], 1800).unwrap().is_empty());
    }

    #[test]
    fn unsorted_input_and_dwell() {
        let e = |s, r: &str| entry("h", None, "a", s, r, 200);
        let s = sessionize(&[e(100, "/b"), e(0, "/a"), e(250, "/c")], 1800).unwrap();
        assert_eq!(s.len(), 1);
        let s = &s[0];
        assert_eq!(s.pages().collect::<Vec<_>>(), ["/a", "/b", "/c"]);
        assert_eq!(
            s.visits.iter().map(|v| v.dwell).collect::<Vec<_>>(),
            [Some(100), Some(150), None]
        );
        assert_eq!(s.elapsed_seconds(), 250);
    }

    #[test]
    fn equal_timestamps_keep_line_order() {
        let e = |r: &str| entry("h", None, "a", 5, r, 200);
        let s = sessionize(&[e("/z"), e("/a"), e("/m")], 60).unwrap();
        assert_eq!(s[0].pages().collect::<Vec<_>>(), ["/z", "/a", "/m"]);
    }

    #[test]
    fn fig6_projections() {
        let e = |s, r: &str| entry("h", None, "a", s, r, 200);
        let mut s123 = sessionize(&[e(0, "Condition_home.htm"), e(10, "See_doctor.htm")], 1800).unwrap();
        s123[0].id = 123;
        let mut s134 = sessionize(
            &[
                e(0, "Side_effects.htm"),
                e(10, "See_doctor.htm"),
                e(20, "Screening.htm"),
            ],
            1800,
        )
        .unwrap();
        s134[0].id = 134;
        let sessions = [s123.remove(0), s134.remove(0)];

        let tx = to_transactions(&sessions);
        assert_eq!(tx.transactions[0].session_id, 123);
        assert_eq!(
            tx.transactions[0].items,
            ["Condition_home.htm", "See_doctor.htm"]
                .iter()
                .map(|s| s.to_string())
                .collect()
        );
        let seq = to_sequences(&sessions);
        assert_eq!(
            seq.sequences[1].items,
            ["Side_effects.htm", "See_doctor.htm", "Screening.htm"]
        );
    }

    #[test]
    fn repeated_pages() {
        let e = |s| entry("h", None, "a", s, "A", 200);
        let s = sessionize(&[e(0), e(1), e(2)], 60).unwrap();
        assert_eq!(to_transactions(&s).transactions[0].items.len(), 1);
        assert_eq!(to_sequences(&s).sequences[0].items, ["A", "A", "A"]);
    }
}
