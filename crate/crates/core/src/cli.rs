//! The `weblog-miner` command line.
//!
//! Stages exchange newline-delimited JSON so they can be chained through
//! files or pipes. Exit codes: 0 success, 1 usage or configuration error,
//! 2 unparseable input, 3 I/O error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    filter_patterns, read_report, render_report, site_filter, OutputFormat, PatternPredicate, Report, Results,
    SiteTopology,
};
use crate::behavior::{
    build_interest_profile_with_boost, generate_synthetic, merge_client_events, read_events, rerank, GeneratorSpec,
    InterestProfile, DEFAULT_FIRST_PAGE_BOOST,
};
use crate::config::{resolve, Overrides, RunConfig, CONFIG_ENV};
use crate::error::{Error, Result};
use crate::logfile::{parse_log, stream_log, LogEntry, LogFormat};
use crate::mining::{
    build_path_graph_parallel, cluster_sessions, mine_association_rules, mine_sequences, SequenceEngine,
};
use crate::preprocess::{
    clean, identify_users, sessionize_users, to_sequences, Sequence, SequenceDb, Session, Transaction, TransactionDb,
    UserKey,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "weblog-miner",
    version,
    about = "Parse web server logs, rebuild sessions and mine navigation patterns"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    /// JSON configuration file (falls back to $WEBLOG_MINER_CONFIG)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Io {
    /// Input file; standard input when absent or `-`
    input: Option<PathBuf>,
    /// Output file; standard output when absent
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a raw log into JSON records, one per line
    Parse {
        #[arg(long)]
        format: Option<LogFormat>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        max_malformed_fraction: Option<f64>,
        /// Also write the parse report as JSON to this file
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        io: Io,
    },
    /// Drop asset, error and filtered requests from parsed entries
    Clean {
        /// Keep responses with status >= 400
        #[arg(long)]
        keep_errors: bool,
        #[arg(long)]
        drop_non_get: bool,
        #[command(flatten)]
        io: Io,
    },
    /// Group cleaned entries into per-user sessions
    Sessionize {
        #[arg(long)]
        timeout: Option<i64>,
        #[command(flatten)]
        io: Io,
    },
    /// Mine sessions (or transaction / sequence records)
    Mine {
        #[command(subcommand)]
        what: MineCommand,
    },
    /// Filter a mined report by predicate and optional site topology
    Filter {
        #[command(flatten)]
        predicate: PredicateArgs,
        /// Site topology as a `from,to` CSV
        #[arg(long)]
        topology: Option<PathBuf>,
        /// Derive the topology from referrers in a Combined log
        #[arg(long, conflicts_with = "topology")]
        topology_from_log: Option<PathBuf>,
        #[arg(long)]
        output_format: Option<OutputFormat>,
        #[command(flatten)]
        io: Io,
    },
    /// Attach client events to sessions and measure active time
    Extend {
        /// Event CSV: user,window_id,resource,timestamp,kind
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        idle_threshold: Option<f64>,
        #[command(flatten)]
        io: Io,
    },
    /// Build one interest profile per user from sessions
    Profile {
        #[arg(long, default_value_t = DEFAULT_FIRST_PAGE_BOOST)]
        boost: f64,
        #[command(flatten)]
        io: Io,
    },
    /// Re-rank candidate pages (one per line) by a user's interest profile
    Rerank {
        /// Profile file written by `profile`
        #[arg(long)]
        profile: PathBuf,
        /// User key (`user:<name>` or `ip:<host>|<agent>`); needed when the
        /// file holds several profiles
        #[arg(long)]
        user: Option<String>,
        #[command(flatten)]
        io: Io,
    },
    /// Generate a synthetic corpus
    Gen {
        /// Generator spec (JSON); defaults when absent
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write access.log, events.csv and truth.json here instead of
        /// printing the access log
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct MineArgs {
    #[arg(long)]
    min_support: Option<f64>,
    #[arg(long)]
    min_confidence: Option<f64>,
    #[arg(long)]
    max_length: Option<usize>,
    #[arg(long)]
    engine: Option<SequenceEngine>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output_format: Option<OutputFormat>,
    #[command(flatten)]
    io: Io,
}

#[derive(Debug, Subcommand)]
enum MineCommand {
    /// Navigation graph with link traversal counts
    Paths(MineArgs),
    /// Association rules over session page sets
    Rules(MineArgs),
    /// Sequential patterns over session page sequences
    Seq(MineArgs),
    /// Single-link clusters of sessions by page-set similarity
    Clusters(MineArgs),
}

#[derive(Debug, Args)]
struct PredicateArgs {
    #[arg(long)]
    min_support: Option<f64>,
    #[arg(long)]
    min_confidence: Option<f64>,
    #[arg(long)]
    min_length: Option<usize>,
    #[arg(long)]
    max_length: Option<usize>,
    /// Page that must occur in every kept result (repeatable)
    #[arg(long)]
    must_contain: Vec<String>,
}

/// What `mine` accepts per input line.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MineInput {
    Session(Session),
    Items { session_id: u64, items: Vec<String> },
}

#[derive(Debug, Serialize, Deserialize)]
struct UserProfile {
    user: UserKey,
    profile: InterestProfile,
}

struct Streams<'a> {
    stdin: &'a mut dyn BufRead,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Streams<'_> {
    fn reader<'s>(&'s mut self, input: &Option<PathBuf>) -> Result<Box<dyn BufRead + 's>> {
        match input {
            Some(p) if p.as_os_str() != "-" => Ok(Box::new(BufReader::new(File::open(p)?))),
            _ => Ok(Box::new(&mut *self.stdin)),
        }
    }

    fn writer<'s>(&'s mut self, output: &Option<PathBuf>) -> Result<Box<dyn Write + 's>> {
        match output {
            Some(p) => Ok(Box::new(BufWriter::new(File::create(p)?))),
            None => Ok(Box::new(BufWriter::new(&mut *self.stdout))),
        }
    }
}

/// Runs the CLI on the process's standard streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdin = io::stdin();
    let mut stdin = stdin.lock();
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    let stderr = io::stderr();
    let mut stderr = stderr.lock();
    run_with(argv, &mut stdin, &mut stdout, &mut stderr)
}

/// Runs the CLI against the given streams and returns the exit code.
pub fn run_with<I, T>(argv: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let mut streams = Streams { stdin, stdout, stderr };
    match execute(cli, &mut streams) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(streams.stderr, "error: {e}");
            match e {
                Error::Io(_) => EXIT_IO,
                Error::Json(_) | Error::Csv(_) | Error::Parse(_) => EXIT_INPUT,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn read_ndjson<T: for<'de> Deserialize<'de>>(input: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| {
            Error::Json(serde_json::Error::io(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("line {}: {e}", i + 1),
            )))
        })?;
        out.push(value);
    }
    Ok(out)
}

fn write_ndjson<T: Serialize>(out: &mut dyn Write, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut *out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn env_config() -> Option<PathBuf> {
    std::env::var_os(CONFIG_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn config_for(cli_config: &Option<PathBuf>, overrides: &Overrides) -> Result<RunConfig> {
    resolve(cli_config.as_deref(), env_config().as_deref(), overrides)
}

fn execute(cli: Cli, s: &mut Streams<'_>) -> Result<i32> {
    match cli.command {
        Command::Parse {
            format,
            workers,
            max_malformed_fraction,
            report,
            io,
        } => {
            let config = config_for(
                &cli.config,
                &Overrides {
                    format,
                    workers,
                    max_malformed_fraction,
                    ..Default::default()
                },
            )?;
            cmd_parse(&config, report.as_deref(), &io, s)
        }
        Command::Clean {
            keep_errors,
            drop_non_get,
            io,
        } => {
            let mut config = config_for(&cli.config, &Overrides::default())?;
            if keep_errors {
                config.clean.drop_error_statuses = false;
            }
            if drop_non_get {
                config.clean.drop_non_get = true;
            }
            let entries: Vec<LogEntry> = read_ndjson(s.reader(&io.input)?)?;
            let kept = clean(&entries, &config.clean);
            let _ = writeln!(s.stderr, "kept {} of {} entries", kept.len(), entries.len());
            let mut out = s.writer(&io.output)?;
            write_ndjson(&mut out, &kept)?;
            out.flush()?;
            Ok(EXIT_OK)
        }
        Command::Sessionize { timeout, io } => {
            let config = config_for(
                &cli.config,
                &Overrides {
                    timeout_seconds: timeout,
                    ..Default::default()
                },
            )?;
            let entries: Vec<LogEntry> = read_ndjson(s.reader(&io.input)?)?;
            let sessions = sessionize_users(&identify_users(&entries), config.timeout_seconds)?;
            let mut out = s.writer(&io.output)?;
            write_ndjson(&mut out, &sessions)?;
            out.flush()?;
            Ok(EXIT_OK)
        }
        Command::Mine { what } => cmd_mine(&cli.config, what, s),
        Command::Filter {
            predicate,
            topology,
            topology_from_log,
            output_format,
            io,
        } => {
            let config = config_for(
                &cli.config,
                &Overrides {
                    output_format,
                    topology_path: topology,
                    ..Default::default()
                },
            )?;
            cmd_filter(&config, predicate, topology_from_log.as_deref(), &io, s)
        }
        Command::Extend {
            events,
            idle_threshold,
            io,
        } => {
            let config = config_for(
                &cli.config,
                &Overrides {
                    idle_threshold,
                    ..Default::default()
                },
            )?;
            let events = read_events(File::open(&events)?)?;
            let sessions: Vec<Session> = read_ndjson(s.reader(&io.input)?)?;
            let mut by_user: BTreeMap<&UserKey, Vec<_>> = BTreeMap::new();
            for e in &events {
                by_user.entry(&e.user).or_default().push(e.clone());
            }
            let mut extended = Vec::with_capacity(sessions.len());
            for session in &sessions {
                let mine = by_user.get(&session.user).map(Vec::as_slice).unwrap_or(&[]);
                extended.push(merge_client_events(session, mine, config.idle_threshold)?);
            }
            let mut out = s.writer(&io.output)?;
            write_ndjson(&mut out, &extended)?;
            out.flush()?;
            Ok(EXIT_OK)
        }
        Command::Profile { boost, io } => {
            let sessions: Vec<Session> = read_ndjson(s.reader(&io.input)?)?;
            let mut by_user: BTreeMap<UserKey, Vec<Session>> = BTreeMap::new();
            for session in sessions {
                by_user.entry(session.user.clone()).or_default().push(session);
            }
            let mut profiles = Vec::new();
            for (user, sessions) in by_user {
                profiles.push(UserProfile {
                    user,
                    profile: build_interest_profile_with_boost(&sessions, boost)?,
                });
            }
            let mut out = s.writer(&io.output)?;
            write_ndjson(&mut out, &profiles)?;
            out.flush()?;
            Ok(EXIT_OK)
        }
        Command::Rerank { profile, user, io } => {
            let profiles: Vec<UserProfile> = read_ndjson(BufReader::new(File::open(&profile)?))?;
            let chosen = match &user {
                Some(key) => {
                    let key: UserKey = key.parse()?;
                    profiles
                        .into_iter()
                        .find(|p| p.user == key)
                        .ok_or_else(|| Error::Usage(format!("no profile for {key}")))?
                }
                None if profiles.len() == 1 => profiles.into_iter().next().expect("one profile"),
                None => {
                    return Err(Error::Usage(format!(
                        "{} profiles in file; pick one with --user",
                        profiles.len()
                    )))
                }
            };
            let candidates: Vec<String> = s
                .reader(&io.input)?
                .lines()
                .collect::<io::Result<Vec<_>>>()?
                .into_iter()
                .filter(|l| !l.trim().is_empty())
                .collect();
            let ranked = rerank(&chosen.profile, &candidates);
            let mut out = s.writer(&io.output)?;
            for c in ranked {
                writeln!(out, "{c}")?;
            }
            out.flush()?;
            Ok(EXIT_OK)
        }
        Command::Gen {
            spec,
            seed,
            out_dir,
            output,
        } => {
            let spec: GeneratorSpec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)?;
                    serde_json::from_str(&text).map_err(|e| Error::config("generator", e.to_string()))?
                }
                None => GeneratorSpec::default(),
            };
            let corpus = generate_synthetic(&spec, seed)?;
            match out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    write_lines(&dir.join("access.log"), &corpus.access_lines)?;
                    write_lines(&dir.join("events.csv"), &corpus.event_lines)?;
                    let truth = serde_json::to_vec_pretty(&corpus.truth)?;
                    std::fs::write(dir.join("truth.json"), truth)?;
                }
                None => {
                    let mut out = s.writer(&output)?;
                    for line in &corpus.access_lines {
                        writeln!(out, "{line}")?;
                    }
                    out.flush()?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_parse(config: &RunConfig, report_path: Option<&Path>, io: &Io, s: &mut Streams<'_>) -> Result<i32> {
    let report = {
        let input: Box<dyn BufRead> = match &io.input {
            Some(p) if p.as_os_str() != "-" => Box::new(BufReader::with_capacity(1 << 16, File::open(p)?)),
            _ => Box::new(&mut *s.stdin),
        };
        let mut out: Box<dyn Write> = match &io.output {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(&mut *s.stdout)),
        };
        let report = stream_log(input, config.format, config.workers, |record| {
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
            Ok(())
        })?;
        out.flush()?;
        report
    };
    let _ = writeln!(
        s.stderr,
        "parsed {} of {} lines ({} malformed)",
        report.parsed, report.total_lines, report.malformed
    );
    for e in report.first_errors.iter().take(5) {
        let _ = writeln!(s.stderr, "  line {}: {}", e.line, e.reason);
    }
    if let Some(p) = report_path {
        std::fs::write(p, serde_json::to_vec_pretty(&report)?)?;
    }
    if report.malformed_fraction() > config.max_malformed_fraction {
        let _ = writeln!(
            s.stderr,
            "error: {:.1}% of lines are malformed (limit {:.1}%); is --format {} right?",
            100.0 * report.malformed_fraction(),
            100.0 * config.max_malformed_fraction,
            config.format
        );
        return Ok(EXIT_INPUT);
    }
    Ok(EXIT_OK)
}

fn mine_inputs(inputs: Vec<MineInput>) -> (Vec<Session>, TransactionDb, SequenceDb) {
    let mut sessions = Vec::new();
    let mut seqs = Vec::new();
    for input in inputs {
        match input {
            MineInput::Session(s) => {
                seqs.push(Sequence {
                    session_id: s.id,
                    items: s.pages().map(str::to_string).collect(),
                });
                sessions.push(s);
            }
            MineInput::Items { session_id, items } => seqs.push(Sequence { session_id, items }),
        }
    }
    let sequences = SequenceDb { sequences: seqs };
    let transactions = TransactionDb {
        transactions: sequences
            .sequences
            .iter()
            .map(|s| Transaction {
                session_id: s.session_id,
                items: s.items.iter().cloned().collect(),
            })
            .collect(),
    };
    (sessions, transactions, sequences)
}

fn cmd_mine(cli_config: &Option<PathBuf>, what: MineCommand, s: &mut Streams<'_>) -> Result<i32> {
    let (kind, args) = match what {
        MineCommand::Paths(a) => ("paths", a),
        MineCommand::Rules(a) => ("rules", a),
        MineCommand::Seq(a) => ("seq", a),
        MineCommand::Clusters(a) => ("clusters", a),
    };
    let config = config_for(
        cli_config,
        &Overrides {
            min_support: args.min_support,
            min_confidence: args.min_confidence,
            max_length: args.max_length,
            cluster_threshold: args.threshold,
            engine: args.engine,
            output_format: args.output_format,
            workers: args.workers,
            ..Default::default()
        },
    )?;
    let inputs: Vec<MineInput> = read_ndjson(s.reader(&args.io.input)?)?;
    let (sessions, transactions, sequences) = mine_inputs(inputs);
    let m = &config.mining;
    let report = match kind {
        "paths" => Report::new(Results::Graph(build_path_graph_parallel(&sequences, config.workers)?)),
        "rules" => Report::new(Results::Rules(mine_association_rules(
            &transactions,
            m.min_support,
            m.min_confidence,
        )?))
        .with_meta("min_support", m.min_support.to_string())
        .with_meta("min_confidence", m.min_confidence.to_string())
        .with_meta("transactions", transactions.len().to_string()),
        "seq" => Report::new(Results::Patterns(mine_sequences(
            config.engine,
            &sequences,
            m.min_support,
            Some(m.max_length),
        )?))
        .with_meta("min_support", m.min_support.to_string())
        .with_meta("max_length", m.max_length.to_string())
        .with_meta("sequences", sequences.len().to_string()),
        _ => {
            if sessions.len() != sequences.len() {
                return Err(Error::Usage("clustering needs session records as input".into()));
            }
            Report::new(Results::Clusters(cluster_sessions(&sessions, m.cluster_threshold)?))
                .with_meta("threshold", m.cluster_threshold.to_string())
        }
    };
    let bytes = render_report(&report, config.output_format)?;
    let mut out = s.writer(&args.io.output)?;
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(EXIT_OK)
}

fn cmd_filter(
    config: &RunConfig,
    p: PredicateArgs,
    topology_log: Option<&Path>,
    io: &Io,
    s: &mut Streams<'_>,
) -> Result<i32> {
    let predicate = PatternPredicate {
        min_support: p.min_support,
        min_confidence: p.min_confidence,
        min_length: p.min_length,
        max_length: p.max_length,
        must_contain: (!p.must_contain.is_empty()).then(|| p.must_contain.into_iter().collect()),
    };
    predicate.validate()?;
    let topology = match (&config.topology_path, topology_log) {
        (_, Some(log)) => {
            let (records, _) = parse_log(BufReader::new(File::open(log)?), LogFormat::Combined)?;
            let entries: Vec<LogEntry> = records.into_iter().filter_map(|r| r.into_access()).collect();
            Some(SiteTopology::from_referrers(&entries))
        }
        (Some(path), None) => Some(SiteTopology::load_csv(path)?),
        (None, None) => None,
    };
    let mut bytes = Vec::new();
    s.reader(&io.input)?.read_to_end(&mut bytes)?;
    let mut report = read_report(&bytes)?;
    report.results = match report.results {
        Results::Rules(rules) => {
            let rules = filter_patterns(&rules, &predicate);
            Results::Rules(match &topology {
                Some(t) => site_filter(&rules, t),
                None => rules,
            })
        }
        Results::Patterns(patterns) => {
            let patterns = filter_patterns(&patterns, &predicate);
            Results::Patterns(match &topology {
                Some(t) => site_filter(&patterns, t),
                None => patterns,
            })
        }
        other => return Err(Error::Usage(format!("cannot filter a {} report", other.kind()))),
    };
    if let Some(t) = &topology {
        report.meta.insert("topology".into(), t.source.clone());
    }
    let bytes = render_report(&report, config.output_format)?;
    let mut out = s.writer(&io.output)?;
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(EXIT_OK)
}

/// The whole `parse | clean | sessionize` chain in one process.
pub fn pipeline_sessions(raw_log: &[u8], config: &RunConfig) -> Result<Vec<Session>> {
    let (records, _) = parse_log(raw_log, config.format)?;
    let entries: Vec<LogEntry> = records.into_iter().filter_map(|r| r.into_access()).collect();
    let cleaned = clean(&entries, &config.clean);
    sessionize_users(&identify_users(&cleaned), config.timeout_seconds)
}

/// `pipeline_sessions` followed by sequence mining, as `mine seq` would
/// render it.
pub fn pipeline_patterns(raw_log: &[u8], config: &RunConfig) -> Result<Vec<u8>> {
    let sessions = pipeline_sessions(raw_log, config)?;
    let sequences = to_sequences(&sessions);
    let patterns = mine_sequences(
        config.engine,
        &sequences,
        config.mining.min_support,
        Some(config.mining.max_length),
    )?;
    let report = Report::new(Results::Patterns(patterns))
        .with_meta("min_support", config.mining.min_support.to_string())
        .with_meta("max_length", config.mining.max_length.to_string())
        .with_meta("sequences", sequences.len().to_string());
    render_report(&report, config.output_format)
}
