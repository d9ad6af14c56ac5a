//! Long-video question answering built from two halves: an ingestion
//! pipeline that turns a video into timestamped scene captions inside a
//! searchable knowledge store, and a recursive divide-and-conquer agent that
//! answers questions against that store with tool support (most notably the
//! rewinder, which re-reads original frames inside a time window).
//!
//! Every model dependency sits behind a provider trait in [`providers`].
//! Deterministic mocks live next to the live HTTP adapters so the whole
//! system runs offline.

pub mod engine;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod prompts;
pub mod providers;
pub mod query;
pub mod store;
pub mod task_tree;
pub mod text;
pub mod timecode;
pub mod toolbox;
pub mod trace;
pub mod video;
pub mod workspace;

pub use error::{Error, Result};
