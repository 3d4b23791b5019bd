//! Deterministic synthetic traffic: Combined-format access lines, a client
//! event CSV, and the ground truth needed to check every later stage.
//!
//! Sessions are Markov walks over the page list. Planted patterns are
//! inserted (in order, possibly with gaps) into exactly
//! `round(support * sessions)` sessions and removed from all others, so
//! their support is known exactly.

use chrono::{DateTime, Duration, FixedOffset};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::extended::{ClientEvent, EventKind};
use crate::error::{Error, Result};
use crate::logfile::{AccessFormat, LogEntry};
use crate::preprocess::UserKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedPattern {
    pub pages: Vec<String>,
    pub support: f64,
}

/// Generator configuration, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub users: usize,
    pub pages: Vec<String>,
    /// Row-wise transition weights between `pages`; uniform when absent.
    pub transitions: Option<Vec<Vec<f64>>>,
    pub sessions: usize,
    pub min_session_length: usize,
    pub max_session_length: usize,
    /// Chance of an asset request after each page view.
    pub asset_rate: f64,
    pub assets: Vec<String>,
    /// Fraction of output lines that are corrupted copies of real lines.
    pub corruption_rate: f64,
    pub planted: Vec<PlantedPattern>,
    pub host: String,
    /// RFC 3339 time of the first request.
    pub start: String,
    /// Seconds between a user's sessions, on top of a random 0..600.
    pub session_gap: i64,
    /// Extra scroll/keypress events per visit, besides the opening click.
    pub events_per_visit: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            users: 10,
            pages: (1..=8).map(|i| format!("/page{i}.html")).collect(),
            transitions: None,
            sessions: 100,
            min_session_length: 2,
            max_session_length: 8,
            asset_rate: 0.2,
            assets: vec!["/images/logo.gif".into(), "/css/site.css".into(), "/js/app.js".into()],
            corruption_rate: 0.0,
            planted: Vec::new(),
            host: "www.example.com".into(),
            start: "2000-10-10T13:55:36-07:00".into(),
            session_gap: 3600,
            events_per_visit: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub pages: Vec<String>,
    pub target_count: usize,
    /// Sessions that actually contain the pattern after generation.
    pub count: usize,
    pub support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub total_lines: usize,
    /// 1-based line numbers of the corrupted lines.
    pub corrupted_lines: Vec<u64>,
    /// 1-based line numbers of asset requests.
    pub asset_lines: Vec<u64>,
    /// Page sequence of every generated session.
    pub sessions: Vec<Vec<String>>,
    pub planted: Vec<PlantedTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub access_lines: Vec<String>,
    /// Event CSV, header first.
    pub event_lines: Vec<String>,
    pub truth: GroundTruth,
}

fn is_subsequence(needle: &[String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Positions of the earliest embedding of `needle` in `hay`.
fn earliest_match(needle: &[String], hay: &[String]) -> Option<Vec<usize>> {
    let mut at = 0;
    let mut out = Vec::with_capacity(needle.len());
    for n in needle {
        let p = hay[at..].iter().position(|h| h == n)? + at;
        out.push(p);
        at = p + 1;
    }
    Some(out)
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: String| Err(Error::config(format!("generator.{key}"), why));
        if self.users == 0 {
            return bad("users", "must be at least 1".into());
        }
        if self.pages.is_empty() {
            return bad("pages", "must not be empty".into());
        }
        if self
            .pages
            .iter()
            .any(|p| p.is_empty() || p.contains(char::is_whitespace) || p.contains('"'))
        {
            return bad("pages", "page names must be non-empty without spaces or quotes".into());
        }
        if self.min_session_length == 0 || self.min_session_length > self.max_session_length {
            return bad(
                "min_session_length",
                "need 1 <= min_session_length <= max_session_length".into(),
            );
        }
        for (key, rate) in [
            ("asset_rate", self.asset_rate),
            ("corruption_rate", self.corruption_rate),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return bad(key, format!("{rate} is not in [0, 1)"));
            }
        }
        if self.asset_rate > 0.0 && self.assets.is_empty() {
            return bad("assets", "needed when asset_rate > 0".into());
        }
        if self.session_gap < 0 {
            return bad("session_gap", "must not be negative".into());
        }
        if DateTime::parse_from_rfc3339(&self.start).is_err() {
            return bad("start", format!("`{}` is not an RFC 3339 time", self.start));
        }
        if let Some(t) = &self.transitions {
            let square = t.len() == self.pages.len() && t.iter().all(|row| row.len() == self.pages.len());
            if !square {
                return bad("transitions", "must be a pages x pages matrix".into());
            }
            for row in t {
                if row.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || row.iter().sum::<f64>() <= 0.0 {
                    return bad(
                        "transitions",
                        "rows need non-negative weights with a positive sum".into(),
                    );
                }
            }
        }
        let mut planted_total = 0;
        for (i, p) in self.planted.iter().enumerate() {
            if p.pages.len() < 2 {
                return bad("planted", format!("pattern {i} needs at least 2 pages"));
            }
            if !(0.0..=1.0).contains(&p.support) {
                return bad("planted", format!("pattern {i} support {} is not in [0, 1]", p.support));
            }
            if p.pages
                .iter()
                .any(|pg| pg.contains(char::is_whitespace) || pg.contains('"'))
            {
                return bad("planted", format!("pattern {i} has a page with spaces or quotes"));
            }
            for (j, q) in self.planted.iter().enumerate() {
                if i != j && is_subsequence(&p.pages, &q.pages) {
                    return bad("planted", format!("pattern {i} is contained in pattern {j}"));
                }
            }
            planted_total += (p.support * self.sessions as f64).round() as usize;
        }
        if planted_total > self.sessions {
            return bad("planted", "planted supports add up to more than all sessions".into());
        }
        Ok(())
    }
}

struct Visit {
    page: String,
    at: DateTime<FixedOffset>,
}

fn user_host(u: usize) -> String {
    format!("10.{}.{}.{}", (u >> 16) & 255, (u >> 8) & 255, u & 255)
}

fn user_agent(u: usize) -> String {
    format!("Mozilla/5.0 (compatible; synthetic/{u})")
}

fn corrupt(line: &str, rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..3) {
        0 => {
            let open = line.find('[').expect("access line has a timestamp");
            let close = line.find(']').expect("access line has a timestamp");
            format!("{}[not a date{}", &line[..open], &line[close..])
        }
        1 => {
            // cut just before the request's closing quote
            let open = line.find('"').expect("access line has a request");
            let close = open + 1 + line[open + 1..].find('"').expect("closed request");
            line[..close].to_string()
        }
        _ => {
            let open = line.find('"').expect("access line has a request");
            let close = open + 1 + line[open + 1..].find('"').expect("closed request");
            format!("{}\" OK{}", &line[..close], &line[close + 5..])
        }
    }
}

/// Generates a corpus. The output depends only on `(spec, seed)`.
pub fn generate_synthetic(spec: &GeneratorSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pages = spec.pages.len();
    let rows: Vec<WeightedIndex<f64>> = match &spec.transitions {
        Some(t) => t
            .iter()
            .map(|row| WeightedIndex::new(row).expect("validated weights"))
            .collect(),
        None => (0..n_pages)
            .map(|_| WeightedIndex::new(vec![1.0; n_pages]).expect("uniform weights"))
            .collect(),
    };

    // page sequences
    let mut walks: Vec<Vec<String>> = Vec::with_capacity(spec.sessions);
    for _ in 0..spec.sessions {
        let len = rng.gen_range(spec.min_session_length..=spec.max_session_length);
        let mut at = rng.gen_range(0..n_pages);
        let mut walk = vec![spec.pages[at].clone()];
        while walk.len() < len {
            at = rows[at].sample(&mut rng);
            walk.push(spec.pages[at].clone());
        }
        walks.push(walk);
    }

    let mut order: Vec<usize> = (0..spec.sessions).collect();
    order.shuffle(&mut rng);
    let mut assigned: Vec<Option<usize>> = vec![None; spec.sessions];
    let mut protected: Vec<Vec<bool>> = walks.iter().map(|w| vec![false; w.len()]).collect();
    let mut next = 0;
    let mut targets = Vec::new();
    for (pi, p) in spec.planted.iter().enumerate() {
        let target = (p.support * spec.sessions as f64).round() as usize;
        targets.push(target);
        for &s in &order[next..next + target] {
            assigned[s] = Some(pi);
            let total = walks[s].len() + p.pages.len();
            let mut slots = rand::seq::index::sample(&mut rng, total, p.pages.len()).into_vec();
            slots.sort_unstable();
            let mut merged = Vec::with_capacity(total);
            let mut mask = Vec::with_capacity(total);
            let mut rest = walks[s].drain(..);
            let mut planted = p.pages.iter();
            for i in 0..total {
                if slots.binary_search(&i).is_ok() {
                    merged.push(planted.next().expect("one page per slot").clone());
                    mask.push(true);
                } else {
                    merged.push(rest.next().expect("walk long enough"));
                    mask.push(false);
                }
            }
            drop(rest);
            walks[s] = merged;
            protected[s] = mask;
        }
        next += target;
    }

    // break accidental occurrences of patterns a session was not given
    for s in 0..spec.sessions {
        for (pi, p) in spec.planted.iter().enumerate() {
            if assigned[s] == Some(pi) {
                continue;
            }
            while let Some(hit) = earliest_match(&p.pages, &walks[s]) {
                let victim = *hit
                    .iter()
                    .rev()
                    .find(|&&i| !protected[s][i])
                    .expect("a pattern not contained in another has an unprotected match");
                walks[s].remove(victim);
                protected[s].remove(victim);
            }
        }
    }

    let planted_truth: Vec<PlantedTruth> = spec
        .planted
        .iter()
        .zip(&targets)
        .map(|(p, &target)| {
            let count = walks.iter().filter(|w| is_subsequence(&p.pages, w)).count();
            PlantedTruth {
                pages: p.pages.clone(),
                target_count: target,
                count,
                support: if spec.sessions == 0 {
                    0.0
                } else {
                    count as f64 / spec.sessions as f64
                },
            }
        })
        .collect();

    // timestamps: user u owns sessions u, u + users, ...; a user's sessions
    // are separated by session_gap plus up to 10 minutes
    let base = DateTime::parse_from_rfc3339(&spec.start).expect("validated start");
    let mut user_clock: Vec<DateTime<FixedOffset>> = (0..spec.users)
        .map(|u| base + Duration::seconds(u as i64 * 7))
        .collect();
    let mut timed: Vec<(usize, Vec<Visit>)> = Vec::with_capacity(spec.sessions);
    for (s, walk) in walks.iter().enumerate() {
        let u = s % spec.users;
        let mut t = user_clock[u];
        let mut visits = Vec::with_capacity(walk.len());
        for (i, page) in walk.iter().enumerate() {
            if i > 0 {
                t += Duration::seconds(rng.gen_range(5..=300));
            }
            visits.push(Visit {
                page: page.clone(),
                at: t,
            });
        }
        user_clock[u] = t + Duration::seconds(spec.session_gap + rng.gen_range(0..=600));
        timed.push((u, visits));
    }

    // access lines, tagged (time, generation order, is_asset)
    let mut lines: Vec<(DateTime<FixedOffset>, usize, bool, String)> = Vec::new();
    let mut events: Vec<(DateTime<FixedOffset>, usize, ClientEvent)> = Vec::new();
    for (s, (u, visits)) in timed.iter().enumerate() {
        let host = user_host(*u);
        let agent = user_agent(*u);
        let user_key = UserKey::ip_agent(&host, Some(&agent));
        let window = format!("w{s}");
        for (i, v) in visits.iter().enumerate() {
            let referrer = (i > 0).then(|| format!("http://{}{}", spec.host, visits[i - 1].page));
            let entry = LogEntry {
                format: AccessFormat::Combined,
                host: host.clone(),
                identity: None,
                auth_user: None,
                timestamp: v.at,
                method: "GET".into(),
                resource: v.page.clone(),
                protocol: "HTTP/1.1".into(),
                status: 200,
                bytes: Some(rng.gen_range(200..20_000)),
                referrer,
                user_agent: Some(agent.clone()),
            };
            lines.push((v.at, lines.len(), false, entry.to_line()));
            if rng.gen_bool(spec.asset_rate) {
                let asset = spec.assets.choose(&mut rng).expect("validated assets").clone();
                let at = v.at + Duration::seconds(1);
                let asset_entry = LogEntry {
                    timestamp: at,
                    resource: asset,
                    bytes: Some(rng.gen_range(100..5_000)),
                    referrer: Some(format!("http://{}{}", spec.host, v.page)),
                    ..entry.clone()
                };
                lines.push((at, lines.len(), true, asset_entry.to_line()));
            }

            let event = |at, kind| ClientEvent {
                user: user_key.clone(),
                window_id: window.clone(),
                resource: v.page.clone(),
                timestamp: at,
                kind,
            };
            events.push((v.at, events.len(), event(v.at, EventKind::Click)));
            if let Some(next) = visits.get(i + 1) {
                let span = (next.at - v.at).num_seconds();
                for _ in 0..spec.events_per_visit {
                    let at = v.at + Duration::seconds(rng.gen_range(1..span.max(2)));
                    let kind = if rng.gen_bool(0.7) {
                        EventKind::Scroll
                    } else {
                        EventKind::Keypress
                    };
                    events.push((at, events.len(), event(at, kind)));
                }
            }
        }
    }
    lines.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

    let good = lines.len();
    let corrupted = if good == 0 {
        0
    } else {
        (spec.corruption_rate * good as f64 / (1.0 - spec.corruption_rate)).round() as usize
    };
    let total = good + corrupted;
    let mut bad_slots = rand::seq::index::sample(&mut rng, total, corrupted).into_vec();
    bad_slots.sort_unstable();
    let mut access_lines = Vec::with_capacity(total);
    let mut asset_lines = Vec::new();
    let mut good_iter = lines.into_iter();
    let mut last_good: Option<String> = None;
    for i in 0..total {
        if bad_slots.binary_search(&i).is_ok() {
            let source = good_iter.as_slice().first().map(|l| l.3.clone());
            let source = source.unwrap_or_else(|| last_good.clone().expect("some good line exists"));
            access_lines.push(corrupt(&source, &mut rng));
        } else {
            let (_, _, is_asset, line) = good_iter.next().expect("slots add up");
            if is_asset {
                asset_lines.push(i as u64 + 1);
            }
            last_good = Some(line.clone());
            access_lines.push(line);
        }
    }

    let mut event_lines = vec!["user,window_id,resource,timestamp,kind".to_string()];
    for (_, _, e) in &events {
        let mut buf = Vec::new();
        super::extended::write_events(&mut buf, std::slice::from_ref(e))?;
        let text = String::from_utf8(buf).expect("CSV output is UTF-8");
        event_lines.push(text.lines().nth(1).expect("one data row").to_string());
    }

    Ok(SyntheticCorpus {
        access_lines,
        event_lines,
        truth: GroundTruth {
            seed,
            total_lines: total,
            corrupted_lines: bad_slots.iter().map(|&i| i as u64 + 1).collect(),
            asset_lines,
            sessions: walks,
            planted: planted_truth,
        },
    })
}
