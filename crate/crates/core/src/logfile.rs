//! Apache 1.3 log records: access log (Common and Combined), error log,
//! referer log and agent log.
//!
//! Every parser is strict enough that a well-formed line survives
//! `parse` followed by `to_line` byte for byte. Quoted fields keep the raw
//! logged text, escapes included, so nothing is lost in between.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, NaiveDateTime, TimeZone, Timelike, Weekday};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};

/// Maximum number of line errors kept in a [`ParseReport`].
pub const MAX_REPORTED_ERRORS: usize = 100;

const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];
const WEEKDAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

/// Coarse class of an HTTP status code, decided by its hundreds digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatusClass {
    Informational,
    Success,
    Redirect,
    ClientError,
    ServerError,
}

pub fn classify_status(code: i64) -> Result<StatusClass> {
    if !(100..=599).contains(&code) {
        return Err(Error::StatusOutOfRange(code));
    }
    Ok(match code / 100 {
        1 => StatusClass::Informational,
        2 => StatusClass::Success,
        3 => StatusClass::Redirect,
        4 => StatusClass::ClientError,
        _ => StatusClass::ServerError,
    })
}

/// Which access-log layout an entry was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessFormat {
    Common,
    Combined,
}

/// One access-log record.
///
/// `referrer` and `user_agent` are always `None` for [`AccessFormat::Common`]
/// entries. For Combined entries a logged `"-"` also reads as `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub format: AccessFormat,
    pub host: String,
    pub identity: Option<String>,
    pub auth_user: Option<String>,
    pub timestamp: DateTime<FixedOffset>,
    pub method: String,
    pub resource: String,
    pub protocol: String,
    pub status: u16,
    pub bytes: Option<u64>,
    pub referrer: Option<String>,
    pub user_agent: Option<String>,
}

impl LogEntry {
    pub fn status_class(&self) -> StatusClass {
        classify_status(i64::from(self.status)).expect("status validated at construction")
    }

    /// Renders the entry back into its log grammar.
    pub fn to_line(&self) -> String {
        let mut out = String::with_capacity(128);
        out.push_str(&self.host);
        out.push(' ');
        out.push_str(dash(&self.identity));
        out.push(' ');
        out.push_str(dash(&self.auth_user));
        out.push_str(" [");
        out.push_str(&format_access_time(&self.timestamp));
        out.push_str("] \"");
        out.push_str(&self.method);
        out.push(' ');
        out.push_str(&self.resource);
        out.push(' ');
        out.push_str(&self.protocol);
        out.push_str("\" ");
        out.push_str(&self.status.to_string());
        out.push(' ');
        match self.bytes {
            Some(b) => out.push_str(&b.to_string()),
            None => out.push('-'),
        }
        if self.format == AccessFormat::Combined {
            out.push_str(" \"");
            out.push_str(dash(&self.referrer));
            out.push_str("\" \"");
            out.push_str(dash(&self.user_agent));
            out.push('"');
        }
        out
    }
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

/// One error-log record. The timestamp carries no zone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub timestamp: NaiveDateTime,
    pub severity: String,
    pub client: Option<String>,
    pub message: String,
}

impl ErrorEntry {
    pub fn to_line(&self) -> String {
        let mut out = format!("[{}] [{}] ", format_error_time(&self.timestamp), self.severity);
        if let Some(client) = &self.client {
            out.push_str("[client ");
            out.push_str(client);
            out.push_str("] ");
        }
        out.push_str(&self.message);
        out
    }
}

impl fmt::Display for ErrorEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

/// A `%{Referer}i -> %U` line. The `-` placeholder is kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefererPair {
    pub referrer: String,
    pub target: String,
}

impl RefererPair {
    pub fn to_line(&self) -> String {
        format!("{} -> {}", self.referrer, self.target)
    }
}

/// A bare `%{User-agent}i` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentLine {
    pub user_agent: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Clf,
    Combined,
    Error,
    Referer,
    Agent,
}

impl LogFormat {
    pub fn name(self) -> &'static str {
        match self {
            LogFormat::Clf => "clf",
            LogFormat::Combined => "combined",
            LogFormat::Error => "error",
            LogFormat::Referer => "referer",
            LogFormat::Agent => "agent",
        }
    }

    pub fn parse_line(self, line: &str) -> Result<Record, ParseError> {
        Ok(match self {
            LogFormat::Clf => Record::Access(parse_clf(line)?),
            LogFormat::Combined => Record::Access(parse_combined(line)?),
            LogFormat::Error => Record::Error(parse_error_line(line)?),
            LogFormat::Referer => {
                let (referrer, target) = parse_referer_pair(line)?;
                Record::Referer(RefererPair { referrer, target })
            }
            LogFormat::Agent => Record::Agent(parse_agent_line(line)?),
        })
    }
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clf" | "common" => Ok(LogFormat::Clf),
            "combined" => Ok(LogFormat::Combined),
            "error" | "errorlog" => Ok(LogFormat::Error),
            "referer" | "referrer" | "refererlog" => Ok(LogFormat::Referer),
            "agent" | "agentlog" => Ok(LogFormat::Agent),
            other => Err(Error::Usage(format!("unknown log format `{other}`"))),
        }
    }
}

impl fmt::Display for LogFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A parsed line of any supported format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Record {
    Access(LogEntry),
    Error(ErrorEntry),
    Referer(RefererPair),
    Agent(AgentLine),
}

impl Record {
    pub fn to_line(&self) -> String {
        match self {
            Record::Access(e) => e.to_line(),
            Record::Error(e) => e.to_line(),
            Record::Referer(p) => p.to_line(),
            Record::Agent(a) => a.user_agent.clone(),
        }
    }

    pub fn into_access(self) -> Option<LogEntry> {
        match self {
            Record::Access(e) => Some(e),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    pub line: u64,
    pub reason: String,
}

/// Line accounting for one parse run. `total_lines == parsed + malformed`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub total_lines: u64,
    pub parsed: u64,
    pub malformed: u64,
    pub first_errors: Vec<LineError>,
}

impl ParseReport {
    fn record_error(&mut self, line: u64, reason: String) {
        self.malformed += 1;
        if self.first_errors.len() < MAX_REPORTED_ERRORS {
            self.first_errors.push(LineError { line, reason });
        }
    }

    /// Appends the report of a later shard.
    pub fn merge(&mut self, later: ParseReport) {
        self.total_lines += later.total_lines;
        self.parsed += later.parsed;
        self.malformed += later.malformed;
        let room = MAX_REPORTED_ERRORS.saturating_sub(self.first_errors.len());
        self.first_errors.extend(later.first_errors.into_iter().take(room));
    }

    pub fn malformed_fraction(&self) -> f64 {
        if self.total_lines == 0 {
            0.0
        } else {
            self.malformed as f64 / self.total_lines as f64
        }
    }
}

fn dash(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or("-")
}

fn undash(token: &str) -> Option<String> {
    if token == "-" {
        None
    } else {
        Some(token.to_string())
    }
}

struct Scanner<'a> {
    line: &'a str,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn new(line: &'a str) -> Self {
        Scanner { line, pos: 0 }
    }

    fn err(&self, reason: impl Into<String>) -> ParseError {
        ParseError::new(self.pos, reason)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.line.len()
    }

    fn rest(&self) -> &'a str {
        &self.line[self.pos..]
    }

    fn expect(&mut self, c: u8, what: &str) -> Result<(), ParseError> {
        if self.line.as_bytes().get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else if self.at_end() {
            Err(self.err(format!("line ends before {what}")))
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    /// A non-empty run of non-space bytes.
    fn token(&mut self, what: &str) -> Result<&'a str, ParseError> {
        let start = self.pos;
        let len = self.rest().find(' ').unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.err(format!("missing {what}")));
        }
        self.pos += len;
        Ok(&self.line[start..self.pos])
    }

    /// Content between `open` and the next `close`.
    fn delimited(&mut self, open: u8, close: char, what: &str) -> Result<&'a str, ParseError> {
        self.expect(open, what)?;
        let start = self.pos;
        match self.rest().find(close) {
            Some(len) => {
                self.pos += len + 1;
                Ok(&self.line[start..start + len])
            }
            None => Err(self.err(format!("unterminated {what}"))),
        }
    }

    /// Raw content of a double-quoted field; `\"` and `\\` do not terminate it.
    fn quoted(&mut self, what: &str) -> Result<&'a str, ParseError> {
        self.expect(b'"', what)?;
        let start = self.pos;
        let bytes = self.line.as_bytes();
        let mut i = start;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 2,
                b'"' => {
                    self.pos = i + 1;
                    return Ok(&self.line[start..i]);
                }
                _ => i += 1,
            }
        }
        Err(ParseError::new(start - 1, format!("unterminated quote in {what}")))
    }
}

fn two_digits(s: &str, at: usize, col: usize, what: &str) -> Result<u32, ParseError> {
    digits(s, at, 2, col, what)
}

fn digits(s: &str, at: usize, width: usize, col: usize, what: &str) -> Result<u32, ParseError> {
    let part = s
        .get(at..at + width)
        .filter(|p| p.bytes().all(|b| b.is_ascii_digit()))
        .ok_or_else(|| ParseError::new(col + at, format!("bad {what}")))?;
    Ok(part.parse().expect("ascii digits"))
}

fn month_number(s: &str, col: usize) -> Result<u32, ParseError> {
    MONTHS
        .iter()
        .position(|m| *m == s)
        .map(|i| i as u32 + 1)
        .ok_or_else(|| ParseError::new(col, format!("unknown month `{s}`")))
}

fn expect_sep(s: &str, at: usize, sep: u8, col: usize) -> Result<(), ParseError> {
    if s.as_bytes().get(at) == Some(&sep) {
        Ok(())
    } else {
        Err(ParseError::new(
            col + at,
            format!("expected `{}` in timestamp", sep as char),
        ))
    }
}

/// Parses `10/Oct/2000:13:55:36 -0700`. `col` is the field's offset in the line.
pub fn parse_access_time(s: &str, col: usize) -> Result<DateTime<FixedOffset>, ParseError> {
    if s.len() != 26 || !s.is_ascii() {
        return Err(ParseError::new(col, "timestamp is not dd/Mon/yyyy:HH:MM:SS +zzzz"));
    }
    let day = two_digits(s, 0, col, "day")?;
    expect_sep(s, 2, b'/', col)?;
    let month = month_number(&s[3..6], col + 3)?;
    expect_sep(s, 6, b'/', col)?;
    let year = digits(s, 7, 4, col, "year")?;
    expect_sep(s, 11, b':', col)?;
    let hour = two_digits(s, 12, col, "hour")?;
    expect_sep(s, 14, b':', col)?;
    let minute = two_digits(s, 15, col, "minute")?;
    expect_sep(s, 17, b':', col)?;
    let second = two_digits(s, 18, col, "second")?;
    expect_sep(s, 20, b' ', col)?;
    let sign = match s.as_bytes()[21] {
        b'+' => 1,
        b'-' => -1,
        _ => return Err(ParseError::new(col + 21, "zone must start with + or -")),
    };
    let zh = two_digits(s, 22, col, "zone hours")?;
    let zm = two_digits(s, 24, col, "zone minutes")?;
    if zm >= 60 || zh * 60 + zm > 14 * 60 {
        return Err(ParseError::new(col + 21, "zone offset outside -14:00..+14:00"));
    }
    let offset = FixedOffset::east_opt(sign * (zh as i32 * 3600 + zm as i32 * 60))
        .ok_or_else(|| ParseError::new(col + 21, "bad zone offset"))?;
    let naive = NaiveDate::from_ymd_opt(year as i32, month, day)
        .and_then(|d| d.and_hms_opt(hour, minute, second))
        .ok_or_else(|| ParseError::new(col, "no such date or time"))?;
    offset
        .from_local_datetime(&naive)
        .single()
        .ok_or_else(|| ParseError::new(col, "no such date or time"))
}

pub fn format_access_time(ts: &DateTime<FixedOffset>) -> String {
    let secs = ts.offset().local_minus_utc();
    let sign = if secs < 0 { '-' } else { '+' };
    let mins = secs.abs() / 60;
    format!(
        "{:02}/{}/{:04}:{:02}:{:02}:{:02} {}{:02}{:02}",
        ts.day(),
        MONTHS[ts.month0() as usize],
        ts.year(),
        ts.hour(),
        ts.minute(),
        ts.second(),
        sign,
        mins / 60,
        mins % 60
    )
}

/// Parses the ctime-style `Wed Oct 11 14:32:52 2000` used by the error log.
/// Single-digit days are space padded (`Oct  1`), as ctime prints them.
pub fn parse_error_time(s: &str, col: usize) -> Result<NaiveDateTime, ParseError> {
    if s.len() != 24 || !s.is_ascii() {
        return Err(ParseError::new(col, "timestamp is not `Www Mmm dd HH:MM:SS yyyy`"));
    }
    let weekday = WEEKDAYS
        .iter()
        .position(|w| *w == &s[0..3])
        .ok_or_else(|| ParseError::new(col, format!("unknown weekday `{}`", &s[0..3])))?;
    expect_sep(s, 3, b' ', col)?;
    let month = month_number(&s[4..7], col + 4)?;
    expect_sep(s, 7, b' ', col)?;
    let day = match &s.as_bytes()[8..10] {
        [b' ', d] if d.is_ascii_digit() && *d != b'0' => u32::from(d - b'0'),
        [a, _] if *a != b' ' && *a != b'0' => two_digits(s, 8, col, "day")?,
        _ => return Err(ParseError::new(col + 8, "bad day")),
    };
    expect_sep(s, 10, b' ', col)?;
    let hour = two_digits(s, 11, col, "hour")?;
    expect_sep(s, 13, b':', col)?;
    let minute = two_digits(s, 14, col, "minute")?;
    expect_sep(s, 16, b':', col)?;
    let second = two_digits(s, 17, col, "second")?;
    expect_sep(s, 19, b' ', col)?;
    let year = digits(s, 20, 4, col, "year")?;
    let ts = NaiveDate::from_ymd_opt(year as i32, month, day)
        .and_then(|d| d.and_hms_opt(hour, minute, second))
        .ok_or_else(|| ParseError::new(col, "no such date or time"))?;
    if ts.weekday() != Weekday::try_from(weekday as u8).expect("index < 7") {
        return Err(ParseError::new(col, "weekday does not match date"));
    }
    Ok(ts)
}

pub fn format_error_time(ts: &NaiveDateTime) -> String {
    format!(
        "{} {} {:>2} {:02}:{:02}:{:02} {:04}",
        WEEKDAYS[ts.weekday().num_days_from_monday() as usize],
        MONTHS[ts.month0() as usize],
        ts.day(),
        ts.hour(),
        ts.minute(),
        ts.second(),
        ts.year()
    )
}

fn parse_status(token: &str, col: usize) -> Result<u16, ParseError> {
    if token.len() != 3 || !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseError::new(col, format!("status `{token}` is not a 3-digit code")));
    }
    let code: u16 = token.parse().expect("ascii digits");
    if !(100..=599).contains(&code) {
        return Err(ParseError::new(col, format!("status {code} outside 100..=599")));
    }
    Ok(code)
}

fn parse_bytes(token: &str, col: usize) -> Result<Option<u64>, ParseError> {
    if token == "-" {
        return Ok(None);
    }
    let canonical = token.bytes().all(|b| b.is_ascii_digit()) && (token == "0" || !token.starts_with('0'));
    if !canonical {
        return Err(ParseError::new(col, format!("size `{token}` is not a byte count")));
    }
    token
        .parse()
        .map(Some)
        .map_err(|_| ParseError::new(col, "byte count overflows"))
}

fn split_request(request: &str, col: usize) -> Result<(String, String, String), ParseError> {
    let malformed = || ParseError::new(col, format!("request `{request}` is not `METHOD resource PROTOCOL`"));
    let (method, rest) = request.split_once(' ').ok_or_else(malformed)?;
    let (resource, protocol) = rest.rsplit_once(' ').ok_or_else(malformed)?;
    if method.is_empty() || resource.is_empty() || protocol.is_empty() {
        return Err(malformed());
    }
    Ok((method.to_string(), resource.to_string(), protocol.to_string()))
}

fn parse_access(line: &str, format: AccessFormat) -> Result<LogEntry, ParseError> {
    let mut sc = Scanner::new(line);
    let host = sc.token("host")?.to_string();
    sc.expect(b' ', "space after host")?;
    let identity = undash(sc.token("identity")?);
    sc.expect(b' ', "space after identity")?;
    let auth_user = undash(sc.token("user")?);
    sc.expect(b' ', "space after user")?;
    let ts_col = sc.pos + 1;
    let ts = sc.delimited(b'[', ']', "timestamp")?;
    let timestamp = parse_access_time(ts, ts_col)?;
    sc.expect(b' ', "space after timestamp")?;
    let req_col = sc.pos + 1;
    let request = sc.quoted("request")?;
    let (method, resource, protocol) = split_request(request, req_col)?;
    sc.expect(b' ', "space after request")?;
    let status_col = sc.pos;
    let status = parse_status(sc.token("status")?, status_col)?;
    sc.expect(b' ', "space after status")?;
    let bytes_col = sc.pos;
    let bytes = parse_bytes(sc.token("size")?, bytes_col)?;
    let (referrer, user_agent) = match format {
        AccessFormat::Common => (None, None),
        AccessFormat::Combined => {
            sc.expect(b' ', "space before referrer")?;
            let referrer = undash(sc.quoted("referrer")?);
            sc.expect(b' ', "space before user agent")?;
            let agent = undash(sc.quoted("user agent")?);
            (referrer, agent)
        }
    };
    if !sc.at_end() {
        return Err(sc.err(format!("{} trailing bytes", sc.rest().len())));
    }
    Ok(LogEntry {
        format,
        host,
        identity,
        auth_user,
        timestamp,
        method,
        resource,
        protocol,
        status,
        bytes,
        referrer,
        user_agent,
    })
}

/// Parses `%h %l %u %t "%r" %>s %b`.
pub fn parse_clf(line: &str) -> Result<LogEntry, ParseError> {
    parse_access(line, AccessFormat::Common)
}

/// Parses `%h %l %u %t "%r" %>s %b "%{Referer}i" "%{User-agent}i"`.
pub fn parse_combined(line: &str) -> Result<LogEntry, ParseError> {
    parse_access(line, AccessFormat::Combined)
}

pub fn parse_error_line(line: &str) -> Result<ErrorEntry, ParseError> {
    let mut sc = Scanner::new(line);
    let ts = sc.delimited(b'[', ']', "timestamp")?;
    let timestamp = parse_error_time(ts, 1)?;
    sc.expect(b' ', "space after timestamp")?;
    let sev_col = sc.pos + 1;
    let severity = sc.delimited(b'[', ']', "severity")?;
    if severity.is_empty() || severity.contains(' ') {
        return Err(ParseError::new(sev_col, "bad severity"));
    }
    sc.expect(b' ', "space after severity")?;
    let client = if sc.rest().starts_with("[client ") {
        sc.pos += "[client".len();
        let addr = sc.delimited(b' ', ']', "client")?;
        if addr.is_empty() {
            return Err(sc.err("empty client address"));
        }
        sc.expect(b' ', "space after client")?;
        Some(addr.to_string())
    } else {
        None
    };
    if sc.at_end() {
        return Err(sc.err("empty message"));
    }
    Ok(ErrorEntry {
        timestamp,
        severity: severity.to_string(),
        client,
        message: sc.rest().to_string(),
    })
}

/// Splits a referer-log line at its first ` -> `.
pub fn parse_referer_pair(line: &str) -> Result<(String, String), ParseError> {
    let at = line
        .find(" -> ")
        .ok_or_else(|| ParseError::new(0, "missing ` -> ` separator"))?;
    let (referrer, target) = (&line[..at], &line[at + 4..]);
    if referrer.is_empty() {
        return Err(ParseError::new(0, "empty referrer"));
    }
    if target.is_empty() {
        return Err(ParseError::new(at + 4, "empty target"));
    }
    Ok((referrer.to_string(), target.to_string()))
}

pub fn parse_agent_line(line: &str) -> Result<AgentLine, ParseError> {
    if line.is_empty() {
        return Err(ParseError::new(0, "empty user agent line"));
    }
    Ok(AgentLine {
        user_agent: line.to_string(),
    })
}

fn trim_eol(line: &[u8]) -> &[u8] {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    line.strip_suffix(b"\r").unwrap_or(line)
}

/// Parses raw lines (terminators optional) numbered from `first_line`.
pub fn parse_chunk<L: AsRef<[u8]>>(lines: &[L], first_line: u64, format: LogFormat) -> (Vec<Record>, ParseReport) {
    let mut records = Vec::with_capacity(lines.len());
    let mut report = ParseReport::default();
    for (i, raw) in lines.iter().enumerate() {
        let number = first_line + i as u64;
        report.total_lines += 1;
        let outcome = std::str::from_utf8(trim_eol(raw.as_ref()))
            .map_err(|e| format!("invalid UTF-8 at column {}", e.valid_up_to()))
            .and_then(|line| format.parse_line(line).map_err(|e| e.to_string()));
        match outcome {
            Ok(record) => {
                report.parsed += 1;
                records.push(record);
            }
            Err(reason) => report.record_error(number, reason),
        }
    }
    (records, report)
}

/// Reads every line of `input`. Malformed lines are counted and skipped.
pub fn parse_log<R: BufRead>(input: R, format: LogFormat) -> Result<(Vec<Record>, ParseReport)> {
    let mut records = Vec::new();
    let report = stream_log(input, format, 1, |r| {
        records.push(r);
        Ok(())
    })?;
    Ok((records, report))
}

const BATCH_BYTES: usize = 1 << 20;

/// Streams `input` through the parser in line-aligned batches.
///
/// Each batch is split into `workers` shards parsed in parallel. Records
/// reach `sink` in line order whatever the worker count; memory held at
/// once is roughly `workers` batches.
pub fn stream_log<R, F>(mut input: R, format: LogFormat, workers: usize, mut sink: F) -> Result<ParseReport>
where
    R: BufRead,
    F: FnMut(Record) -> Result<()>,
{
    let workers = workers.max(1);
    let pool = if workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?,
        )
    } else {
        None
    };
    let mut report = ParseReport::default();
    let mut next_line = 1u64;
    loop {
        let mut batch: Vec<Vec<u8>> = Vec::new();
        let mut held = 0usize;
        while held < BATCH_BYTES * workers {
            let mut buf = Vec::new();
            if input.read_until(b'\n', &mut buf)? == 0 {
                break;
            }
            held += buf.len();
            batch.push(buf);
        }
        if batch.is_empty() {
            break;
        }
        let first = next_line;
        next_line += batch.len() as u64;
        let shard_len = batch.len().div_ceil(workers);
        let shards: Vec<(Vec<Record>, ParseReport)> = match &pool {
            Some(pool) => pool.install(|| {
                batch
                    .par_chunks(shard_len)
                    .enumerate()
                    .map(|(i, chunk)| parse_chunk(chunk, first + (i * shard_len) as u64, format))
                    .collect()
            }),
            None => vec![parse_chunk(&batch, first, format)],
        };
        for (records, shard_report) in shards {
            report.merge(shard_report);
            for r in records {
                sink(r)?;
            }
        }
    }
    Ok(report)
}
