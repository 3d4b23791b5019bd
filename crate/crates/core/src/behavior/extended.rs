use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{Session, UserKey};

pub const DEFAULT_IDLE_THRESHOLD: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Click,
    Scroll,
    Keypress,
    Focus,
}

/// A client-side interaction reported next to the server log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientEvent {
    pub user: UserKey,
    pub window_id: String,
    pub resource: String,
    pub timestamp: DateTime<FixedOffset>,
    pub kind: EventKind,
}

/// A session with the client events that fall inside it.
///
/// `active_seconds` never exceeds `elapsed_seconds`; `window_seconds`
/// splits the active time by browser window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedSession {
    pub base: Session,
    pub events: Vec<ClientEvent>,
    pub active_seconds: f64,
    pub elapsed_seconds: f64,
    pub window_seconds: BTreeMap<String, f64>,
}

/// Attaches `events` to `session` and measures active time.
///
/// Each event credits the window it came from until the next event from
/// any window, for at most `idle_threshold` seconds, and never past the
/// session end. So when windows interleave, time goes to whichever window
/// saw the latest event, and a session with no events has no active time.
/// Events outside `[start, end + idle_threshold]` are not attached.
pub fn merge_client_events(session: &Session, events: &[ClientEvent], idle_threshold: f64) -> Result<ExtendedSession> {
    if !(idle_threshold > 0.0 && idle_threshold.is_finite()) {
        return Err(Error::param(
            "idle_threshold",
            format!("{idle_threshold} must be positive"),
        ));
    }
    if let Some(e) = events.iter().find(|e| e.user != session.user) {
        return Err(Error::param(
            "events",
            format!("event for {} does not belong to session user {}", e.user, session.user),
        ));
    }
    let idle_ms = (idle_threshold * 1000.0).round() as i64;
    let start = session.start.timestamp_millis();
    let end = session.end.timestamp_millis();

    let mut attached: Vec<ClientEvent> = events
        .iter()
        .filter(|e| {
            let t = e.timestamp.timestamp_millis();
            t >= start && t <= end + idle_ms
        })
        .cloned()
        .collect();
    attached.sort_by_key(|e| e.timestamp);

    let mut window_ms: BTreeMap<String, i64> = BTreeMap::new();
    for (i, e) in attached.iter().enumerate() {
        let t = e.timestamp.timestamp_millis();
        let next = attached.get(i + 1).map_or(end, |n| n.timestamp.timestamp_millis());
        let until = next.min(t + idle_ms).min(end);
        let credit = (until - t).max(0);
        *window_ms.entry(e.window_id.clone()).or_insert(0) += credit;
    }
    let active_ms: i64 = window_ms.values().sum();
    Ok(ExtendedSession {
        base: session.clone(),
        events: attached,
        active_seconds: active_ms as f64 / 1000.0,
        elapsed_seconds: (end - start) as f64 / 1000.0,
        window_seconds: window_ms.into_iter().map(|(w, ms)| (w, ms as f64 / 1000.0)).collect(),
    })
}

pub fn active_time(ext: &ExtendedSession) -> f64 {
    ext.active_seconds
}

#[derive(Serialize, Deserialize)]
struct EventRow {
    user: String,
    window_id: String,
    resource: String,
    timestamp: String,
    kind: EventKind,
}

/// Reads the event CSV: `user,window_id,resource,timestamp,kind` with a
/// header row, RFC 3339 timestamps and users in [`UserKey`] text form.
pub fn read_events<R: Read>(input: R) -> Result<Vec<ClientEvent>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut events = Vec::new();
    for (i, row) in reader.deserialize::<EventRow>().enumerate() {
        let row = row?;
        let timestamp = DateTime::parse_from_rfc3339(&row.timestamp)
            .map_err(|e| Error::Usage(format!("event row {}: bad timestamp `{}`: {e}", i + 1, row.timestamp)))?;
        events.push(ClientEvent {
            user: row.user.parse()?,
            window_id: row.window_id,
            resource: row.resource,
            timestamp,
            kind: row.kind,
        });
    }
    Ok(events)
}

pub fn write_events<W: Write>(out: W, events: &[ClientEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in events {
        w.serialize(EventRow {
            user: e.user.to_string(),
            window_id: e.window_id.clone(),
            resource: e.resource.clone(),
            timestamp: e.timestamp.to_rfc3339(),
            kind: e.kind,
        })?;
    }
    w.flush()?;
    Ok(())
}
