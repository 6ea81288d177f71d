//! Single-pass online story discovery for timestamped article streams.
//!
//! Articles arrive one slide at a time. Each slide the engine identifies the
//! temporal theme of every live story as a weighted keyword set, embeds
//! candidate article/story pairs with theme- and time-aware pooling over
//! sentence vectors, assigns articles to stories by a temperature-scaled
//! confidence score, and seeds new stories from whatever stays unassigned.
//!
//! Stories are kept only as pane-based summaries ([`summary::Pss`]): per slide,
//! the article count, the term frequencies and the sum of frozen article
//! representations. Once an article is assigned, its text and sentence vectors
//! are never touched again.

pub mod cluster;
pub mod config;
pub mod embed;
pub mod encoder;
pub mod engine;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod summary;
pub mod synthetic;
pub mod theme;
pub mod tokenize;

pub use config::{EngineOptions, RunConfig, WindowConfig};
pub use encoder::{EncoderKind, EncoderSpec, SentenceEncoder};
pub use engine::{Engine, SlideReport};
pub use error::{Error, Result};
pub use model::{Article, PaneIndex, StoryId, Timestamp, Vector};
