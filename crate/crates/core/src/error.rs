use crate::model::PaneIndex;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("vector dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("input lists differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("article has no sentences")]
    EmptyArticle,

    #[error("story summary {story} has no in-window articles")]
    EmptyStory { story: u64 },

    #[error("keyword distributions cover different keyword sets ({left} vs {right} entries)")]
    KeywordLengthMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Encoder(#[from] crate::encoder::EncoderError),

    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),

    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),

    #[error("slide {pane} failed: {source}")]
    Slide {
        pane: PaneIndex,
        #[source]
        source: Box<Error>,
    },
}
