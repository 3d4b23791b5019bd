//! Web server log mining.
//!
//! The crate follows a log from raw bytes to patterns:
//!
//! 1. [`logfile`] parses Apache Common, Combined, error, referer and agent
//!    logs, and writes entries back out byte for byte.
//! 2. [`preprocess`] cleans entries, tells users apart, cuts sessions and
//!    converts them into transaction and sequence databases.
//! 3. [`mining`] builds the navigation graph and mines association rules,
//!    sequential patterns (two interchangeable engines) and session clusters.
//! 4. [`analysis`] removes results that only restate the site's links,
//!    applies predicate filters and renders JSON, CSV or DOT.
//! 5. [`behavior`] measures active time from client events, learns interest
//!    profiles and generates synthetic corpora.
//!
//! ```
//! use weblog_miner::logfile::parse_clf;
//!
//! let line = r#"127.0.0.1 - frank [10/Oct/2000:13:55:36 -0700] "GET /apache_pb.gif HTTP/1.0" 200 2326"#;
//! let entry = parse_clf(line).unwrap();
//! assert_eq!(entry.auth_user.as_deref(), Some("frank"));
//! assert_eq!(entry.to_line(), line);
//! ```
//!
//! The guide under `book/` walks through each stage; its code blocks are
//! compiled and run as doc-tests of this crate.

pub mod analysis;
pub mod behavior;
pub mod cli;
pub mod config;
pub mod error;
pub mod logfile;
pub mod mining;
pub mod preprocess;

pub use error::{Error, ParseError, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/parsing.md")]
    mod parsing {}
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/path-analysis.md")]
    mod path_analysis {}
    #[doc = include_str!("../../../book/src/association-rules.md")]
    mod association_rules {}
    #[doc = include_str!("../../../book/src/sequential-patterns.md")]
    mod sequential_patterns {}
    #[doc = include_str!("../../../book/src/pattern-analysis.md")]
    mod pattern_analysis {}
    #[doc = include_str!("../../../book/src/extended-log.md")]
    mod extended_log {}
    #[doc = include_str!("../../../book/src/interest.md")]
    mod interest {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
