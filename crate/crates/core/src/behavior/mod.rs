//! Client-side behaviour on top of server sessions: active time from
//! client events, interest profiles for re-ranking, and a synthetic corpus
//! generator.

mod extended;
mod generator;
mod interest;

pub use extended::{
    active_time, merge_client_events, read_events, write_events, ClientEvent, EventKind, ExtendedSession,
    DEFAULT_IDLE_THRESHOLD,
};
pub use generator::{generate_synthetic, GeneratorSpec, GroundTruth, PlantedPattern, PlantedTruth, SyntheticCorpus};
pub use interest::{
    build_interest_profile, build_interest_profile_with_boost, path_tokens, rerank, InterestProfile,
    DEFAULT_FIRST_PAGE_BOOST,
};
