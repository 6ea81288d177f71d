//! Shared domain types: time discretization, articles, story ids and vectors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::TermCounts;

/// Index of a slide-sized pane. All decay arithmetic works in pane units.
pub type PaneIndex = i64;

pub const SECONDS_PER_DAY: u64 = 86_400;

/// Floor division of Unix-epoch seconds (UTC) by the slide duration.
pub fn pane_index(epoch_seconds: i64, slide_seconds: u64) -> Result<PaneIndex> {
    if slide_seconds == 0 {
        return Err(Error::Config("slide duration must be positive".into()));
    }
    let slide = i64::try_from(slide_seconds)
        .map_err(|_| Error::Config(format!("slide duration {slide_seconds}s is too large")))?;
    Ok(epoch_seconds.div_euclid(slide))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    /// Seconds since the Unix epoch.
    pub raw: i64,
    pub pane: PaneIndex,
}

impl Timestamp {
    pub fn new(epoch_seconds: i64, slide_seconds: u64) -> Result<Self> {
        Ok(Self {
            raw: epoch_seconds,
            pane: pane_index(epoch_seconds, slide_seconds)?,
        })
    }

    /// A timestamp positioned at the start of `pane`.
    pub fn at_pane(pane: PaneIndex, slide_seconds: u64) -> Self {
        Self {
            raw: pane.saturating_mul(slide_seconds as i64),
            pane,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StoryId(pub u64);

impl fmt::Display for StoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A tokenized, timestamped article.
///
/// `sentence_terms[i]` holds the term counts of `sentences[i]`; ingestion
/// guarantees both are non-empty and of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct Article {
    pub id: String,
    pub time: Timestamp,
    pub sentences: Vec<String>,
    pub sentence_terms: Vec<TermCounts>,
    pub label: Option<String>,
}

impl Article {
    pub fn pane(&self) -> PaneIndex {
        self.time.pane
    }
}

/// Dense real embedding.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn from_vec(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Cosine similarity; zero when either side has zero norm.
    pub fn cosine(&self, other: &Vector) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            (self.dot(other) / denom).clamp(-1.0, 1.0)
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Vector, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.0 {
            *a *= factor;
        }
    }

    /// Unit-norm copy, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Vector> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        let mut out = self.clone();
        out.scale(1.0 / norm);
        Some(out)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn ensure_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                actual: self.dim(),
            })
        }
    }
}

impl std::ops::AddAssign<&Vector> for Vector {
    fn add_assign(&mut self, rhs: &Vector) {
        self.add_scaled(rhs, 1.0);
    }
}
