//! Brute-force oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, FixedOffset, TimeZone};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use weblog_miner::behavior::{ClientEvent, EventKind};
use weblog_miner::logfile::{AccessFormat, LogEntry};
use weblog_miner::preprocess::{
    clean, identify_users, sessionize, CleanConfig, SequenceDb, Session, TransactionDb, UserKey, Visit,
};

pub fn base_time() -> DateTime<FixedOffset> {
    DateTime::parse_from_rfc3339("2000-10-10T13:55:36-07:00").unwrap()
}

pub fn frequent(count: u64, n: usize, min_support: f64) -> bool {
    n > 0 && count as f64 / n as f64 >= min_support
}

// ---- itemsets and rules -------------------------------------------------

/// Every itemset meeting `min_support`, found by counting every subset of
/// every transaction.
pub fn brute_itemsets(db: &TransactionDb, min_support: f64) -> BTreeMap<Vec<String>, u64> {
    let mut counts: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    for t in &db.transactions {
        let items: Vec<&String> = t.items.iter().collect();
        assert!(items.len() < 20, "oracle only handles small transactions");
        for mask in 1u32..(1 << items.len()) {
            let set: Vec<String> = (0..items.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| items[i].clone())
                .collect();
            *counts.entry(set).or_insert(0) += 1;
        }
    }
    counts.retain(|_, c| frequent(*c, db.len(), min_support));
    counts
}

/// `(antecedent, consequent) -> (count, antecedent_count)`.
pub type RuleKey = (Vec<String>, Vec<String>);

pub fn brute_rules(db: &TransactionDb, min_support: f64, min_confidence: f64) -> BTreeMap<RuleKey, (u64, u64)> {
    let sets = brute_itemsets(db, min_support);
    let containing = |s: &[String]| {
        db.transactions
            .iter()
            .filter(|t| s.iter().all(|i| t.items.contains(i)))
            .count() as u64
    };
    let mut rules = BTreeMap::new();
    for (set, &count) in &sets {
        if set.len() < 2 {
            continue;
        }
        for mask in 1u32..(1 << set.len()) - 1 {
            let (a, c): (Vec<_>, Vec<_>) = set.iter().enumerate().partition(|(i, _)| mask & (1 << i) != 0);
            let a: Vec<String> = a.into_iter().map(|(_, s)| s.clone()).collect();
            let c: Vec<String> = c.into_iter().map(|(_, s)| s.clone()).collect();
            let ac = containing(&a);
            if count as f64 / ac as f64 >= min_confidence {
                rules.insert((a, c), (count, ac));
            }
        }
    }
    rules
}

// ---- sequences ----------------------------------------------------------

/// Every distinct subsequence of `seq` up to `max_len` items.
pub fn subsequences(seq: &[String], max_len: usize) -> BTreeSet<Vec<String>> {
    assert!(seq.len() <= 16, "oracle only handles short sequences");
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << seq.len()) {
        if mask.count_ones() as usize > max_len {
            continue;
        }
        out.insert(
            (0..seq.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| seq[i].clone())
                .collect(),
        );
    }
    out
}

pub fn brute_sequences(db: &SequenceDb, min_support: f64, max_len: usize) -> BTreeMap<Vec<String>, u64> {
    let mut counts: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    for s in &db.sequences {
        for sub in subsequences(&s.items, max_len) {
            *counts.entry(sub).or_insert(0) += 1;
        }
    }
    counts.retain(|_, c| frequent(*c, db.len(), min_support));
    counts
}

pub fn contains_subsequence(seq: &[String], pat: &[String]) -> bool {
    let mut it = seq.iter();
    pat.iter().all(|p| it.any(|s| s == p))
}

pub fn random_sequence_db(rng: &mut ChaCha8Rng, max_seqs: usize, max_alphabet: usize, max_len: usize) -> SequenceDb {
    let alphabet = rng.gen_range(1..=max_alphabet);
    let n = rng.gen_range(1..=max_seqs);
    SequenceDb::from_lists((0..n).map(|_| {
        let len = rng.gen_range(0..=max_len);
        (0..len)
            .map(|_| ((b'A' + rng.gen_range(0..alphabet) as u8) as char).to_string())
            .collect::<Vec<_>>()
    }))
}

// ---- log entries --------------------------------------------------------

const HOSTS: [&str; 3] = ["10.0.0.1", "10.0.0.2", "192.168.1.7"];
const USERS: [&str; 2] = ["alice", "bob"];
const RESOURCES: [&str; 10] = [
    "/index.html",
    "/a.html",
    "/b.html?q=1",
    "/docs/c.htm#top",
    "/",
    "/img/logo.gif",
    "/css/site.CSS",
    "/js/app.js?v=2",
    "/favicon.ico",
    "/cgi-bin/search",
];
const AGENTS: [&str; 3] = ["Mozilla/4.08 [en] (Win98; I;Nav)", "curl/7.1", "Googlebot/2.1"];

prop_compose! {
    fn arb_offset()(i in 0usize..3) -> FixedOffset {
        [FixedOffset::west_opt(7 * 3600), FixedOffset::east_opt(0), FixedOffset::east_opt(5 * 3600 + 1800)][i].unwrap()
    }
}

/// Instants within a few hours of each other, so timeouts of a few minutes
/// produce both kinds of gaps.
pub fn arb_time(span_secs: i64) -> impl Strategy<Value = DateTime<FixedOffset>> {
    (0..span_secs, arb_offset()).prop_map(|(s, off)| (base_time() + Duration::seconds(s)).with_timezone(&off))
}

pub fn arb_entry() -> impl Strategy<Value = LogEntry> {
    (
        (
            any::<bool>(),
            0..HOSTS.len(),
            prop::option::of(Just("ident".to_string())),
            prop::option::of(0..USERS.len()),
        ),
        (
            arb_time(20_000),
            prop::sample::select(vec!["GET", "POST", "HEAD"]),
            0..RESOURCES.len(),
        ),
        (
            prop::sample::select(vec!["HTTP/1.0", "HTTP/1.1"]),
            prop::sample::select(vec![200u16, 206, 301, 304, 404, 500]),
            prop::option::of(0u64..100_000),
        ),
        (prop::option::of(0..RESOURCES.len()), prop::option::of(0..AGENTS.len())),
    )
        .prop_map(
            |((combined, h, identity, user), (timestamp, method, r), (protocol, status, bytes), (rf, ag))| {
                let format = if combined {
                    AccessFormat::Combined
                } else {
                    AccessFormat::Common
                };
                LogEntry {
                    format,
                    host: HOSTS[h].into(),
                    identity,
                    auth_user: user.map(|u| USERS[u].into()),
                    timestamp,
                    method: method.into(),
                    resource: RESOURCES[r].into(),
                    protocol: protocol.into(),
                    status,
                    bytes,
                    referrer: rf
                        .filter(|_| combined)
                        .map(|i| format!("http://www.example.com{}", RESOURCES[i])),
                    user_agent: ag.filter(|_| combined).map(|i| AGENTS[i].into()),
                }
            },
        )
}

pub fn arb_clean_config() -> impl Strategy<Value = CleanConfig> {
    (any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(errors, non_get, block)| CleanConfig {
        drop_error_statuses: errors,
        drop_non_get: non_get,
        agent_blocklist: if block { vec!["bot".into()] } else { Vec::new() },
        ..CleanConfig::default()
    })
}

// ---- preprocessing properties ------------------------------------------
// Each returns Err with a description on the first violation.

pub type Check = Result<(), String>;

fn is_subsequence<T: PartialEq>(sub: &[T], of: &[T]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|x| it.any(|y| y == x))
}

pub fn check_clean(entries: &[LogEntry], config: &CleanConfig) -> Check {
    let once = clean(entries, config);
    if clean(&once, config) != once {
        return Err("clean is not idempotent".into());
    }
    if once.len() > entries.len() || !is_subsequence(&once, entries) {
        return Err("clean output is not an ordered subset of its input".into());
    }
    // monotone: cleaning a prefix gives a prefix of the cleaned whole
    let half = clean(&entries[..entries.len() / 2], config);
    if !once.starts_with(&half) {
        return Err("clean of a prefix is not a prefix".into());
    }
    Ok(())
}

pub fn check_partition(entries: &[LogEntry], config: &CleanConfig) -> Check {
    let cleaned = clean(entries, config);
    let users = identify_users(&cleaned);
    let total: usize = users.values().map(Vec::len).sum();
    if total != cleaned.len() {
        return Err(format!("partition holds {total} of {} entries", cleaned.len()));
    }
    for (key, list) in &users {
        if list.is_empty() || list.iter().any(|e| &UserKey::of(e) != key) {
            return Err(format!("group {key} holds a foreign or no entry"));
        }
        if !is_subsequence(list, &cleaned) {
            return Err(format!("group {key} reorders entries"));
        }
        if key.value.is_empty() {
            return Err("empty user key".into());
        }
    }
    Ok(())
}

pub fn check_sessions(entries: &[LogEntry], timeout: i64) -> Check {
    let sessions = sessionize(entries, timeout).map_err(|e| e.to_string())?;
    let visits: usize = sessions.iter().map(|s| s.visits.len()).sum();
    if visits != entries.len() {
        return Err(format!("{visits} visits from {} entries", entries.len()));
    }
    for (i, s) in sessions.iter().enumerate() {
        if s.visits.is_empty() {
            return Err("empty session".into());
        }
        for w in s.visits.windows(2) {
            let gap = (w[1].timestamp - w[0].timestamp).num_seconds();
            if !(0..=timeout).contains(&gap) {
                return Err(format!("gap {gap}s inside a session (timeout {timeout})"));
            }
        }
        if let Some(next) = sessions.get(i + 1) {
            let gap = (next.start - s.end).num_seconds();
            if gap <= timeout {
                return Err(format!("sessions split at a gap of {gap}s (timeout {timeout})"));
            }
        }
        // re-sessionizing a session's own visits reproduces it
        let own: Vec<LogEntry> = entries
            .iter()
            .filter(|e| e.timestamp >= s.start && e.timestamp <= s.end)
            .cloned()
            .collect();
        let again = sessionize(&own, timeout).map_err(|e| e.to_string())?;
        if again.len() != 1 || again[0].visits != s.visits {
            return Err("re-sessionizing a session changed it".into());
        }
    }
    Ok(())
}

pub fn check_dwell(entries: &[LogEntry], timeout: i64) -> Check {
    for s in sessionize(entries, timeout).map_err(|e| e.to_string())? {
        let n = s.visits.len();
        for (i, v) in s.visits.iter().enumerate() {
            let want = (i + 1 < n).then(|| (s.visits[i + 1].timestamp - v.timestamp).num_seconds());
            if v.dwell != want {
                return Err(format!("dwell {:?} where {:?} expected", v.dwell, want));
            }
        }
        let total: i64 = s.visits.iter().filter_map(|v| v.dwell).sum();
        if total != s.elapsed_seconds() || s.start != s.visits[0].timestamp || s.end != s.visits[n - 1].timestamp {
            return Err("session span disagrees with dwell times".into());
        }
    }
    Ok(())
}

// ---- extended log --------------------------------------------------------

pub fn session_at(user: &UserKey, start: DateTime<FixedOffset>, offsets: &[i64]) -> Session {
    let visits: Vec<Visit> = offsets
        .iter()
        .enumerate()
        .map(|(i, &o)| Visit {
            resource: format!("/p{i}.html"),
            timestamp: start + Duration::seconds(o),
            dwell: offsets.get(i + 1).map(|n| n - o),
        })
        .collect();
    Session {
        id: 0,
        user: user.clone(),
        start: visits[0].timestamp,
        end: visits[visits.len() - 1].timestamp,
        visits,
    }
}

pub fn event(user: &UserKey, window: &str, at: DateTime<FixedOffset>) -> ClientEvent {
    ClientEvent {
        user: user.clone(),
        window_id: window.into(),
        resource: "/x.html".into(),
        timestamp: at,
        kind: EventKind::Scroll,
    }
}

/// Steps through the session one second at a time. A second counts as
/// active for the window of the latest event at or before it, when that
/// event is less than `idle` seconds old. Among events at the same instant
/// the one listed last wins.
pub fn simulate_active(session: &Session, events: &[ClientEvent], idle: i64) -> BTreeMap<String, i64> {
    let start = session.start.timestamp();
    let end = session.end.timestamp();
    let attached: Vec<&ClientEvent> = events
        .iter()
        .filter(|e| (start..=end + idle).contains(&e.timestamp.timestamp()))
        .collect();
    let mut per_window: BTreeMap<String, i64> = BTreeMap::new();
    for sec in start..end {
        let latest = attached
            .iter()
            .filter(|e| e.timestamp.timestamp() <= sec)
            .max_by_key(|e| e.timestamp.timestamp());
        // max_by_key keeps the last maximum
        if let Some(e) = latest {
            if sec - e.timestamp.timestamp() < idle {
                *per_window.entry(e.window_id.clone()).or_insert(0) += 1;
            }
        }
    }
    per_window
}

pub fn random_trace(rng: &mut ChaCha8Rng) -> (Session, Vec<ClientEvent>) {
    let user = UserKey::ip_agent("10.0.0.9", Some("agent"));
    let start = base_time();
    let mut offsets: Vec<i64> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..900)).collect();
    offsets.push(0);
    offsets.sort_unstable();
    let session = session_at(&user, start, &offsets);
    let span = *offsets.last().unwrap();
    let windows = rng.gen_range(1..=3);
    let events = (0..rng.gen_range(0..25))
        .map(|_| {
            let w = format!("w{}", rng.gen_range(0..windows));
            let at = rng.gen_range(-60..span + 200);
            event(&user, &w, start + Duration::seconds(at))
        })
        .collect();
    (session, events)
}

pub fn fixed(secs: i64) -> DateTime<FixedOffset> {
    FixedOffset::east_opt(0).unwrap().timestamp_opt(secs, 0).unwrap()
}
