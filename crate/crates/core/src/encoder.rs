//! Sentence encoders.
//!
//! [`HashedEncoder`] is a deterministic feature-hashing stand-in for a
//! pretrained sentence encoder: every non-stopword unigram is hashed into one
//! of `dim` buckets with a seeded ±1 sign, counts are accumulated and the
//! result is L2-normalized. [`BridgeEncoder`] talks to an external embedding
//! service over HTTP:
//!
//! ```text
//! GET  {endpoint}/healthz  -> {"dim": <int>, "model": "<name>"}
//! POST {endpoint}/embed    {"sentences": [...]} -> {"dim": <int>, "vectors": [[f64, ...], ...]}
//! ```

use std::sync::LazyLock;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::Vector;
use crate::tokenize::{content_tokens, Stopwords};

const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum EncoderError {
    #[error("sentence {index} is empty")]
    EmptySentence { index: usize },

    #[error("sentence {index} has no content tokens to hash")]
    NoTokens { index: usize },

    #[error("encoder dimension must be positive")]
    ZeroDimension,

    #[error("bridge encoder requires an endpoint")]
    MissingEndpoint,

    #[error("encoder endpoint {endpoint}{path} unreachable: {message}")]
    Unreachable {
        endpoint: String,
        path: &'static str,
        message: String,
    },

    #[error("encoder at {endpoint} reports dim {actual}, expected {expected}")]
    DimMismatch {
        endpoint: String,
        expected: usize,
        actual: usize,
    },

    #[error("encoder at {endpoint} violated the protocol: {message}")]
    Protocol { endpoint: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Hashed,
    Bridge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub dim: usize,
    /// Hash seed (hashed kind only).
    pub seed: u64,
    /// Base URL (bridge kind only).
    pub endpoint: Option<String>,
    pub batch_size: usize,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            kind: EncoderKind::Hashed,
            dim: 256,
            seed: 42,
            endpoint: None,
            batch_size: 64,
            timeout_secs: 30,
            retries: 2,
        }
    }
}

/// Maps sentences to unit vectors, preserving input order and length.
pub trait SentenceEncoder: Send + Sync {
    fn dim(&self) -> usize;

    fn encode_batch(&self, sentences: &[String]) -> Result<Vec<Vector>, EncoderError>;
}

/// Builds the encoder described by `spec`. Bridge encoders are health-checked
/// before they are returned.
pub fn build_encoder(
    spec: &EncoderSpec,
    stopwords: Stopwords,
) -> Result<Box<dyn SentenceEncoder>, EncoderError> {
    if spec.dim == 0 {
        return Err(EncoderError::ZeroDimension);
    }
    match spec.kind {
        EncoderKind::Hashed => Ok(Box::new(
            HashedEncoder::new(spec.dim, spec.seed)
                .with_stopwords(stopwords)
                .with_batch_size(spec.batch_size),
        )),
        EncoderKind::Bridge => {
            let endpoint = spec.endpoint.clone().ok_or(EncoderError::MissingEndpoint)?;
            let bridge = BridgeEncoder::connect(
                &endpoint,
                spec.dim,
                spec.batch_size,
                Duration::from_secs(spec.timeout_secs),
                spec.retries,
            )?;
            Ok(Box::new(bridge))
        }
    }
}

fn check_non_empty(sentences: &[String]) -> Result<(), EncoderError> {
    match sentences.iter().position(|s| s.trim().is_empty()) {
        Some(index) => Err(EncoderError::EmptySentence { index }),
        None => Ok(()),
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seeded 64-bit FNV-1a with a splitmix finalizer; stable across platforms
/// and toolchains.
fn seeded_hash(token: &str, seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ splitmix64(seed);
    for &b in token.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h)
}

/// Signed feature hashing. If the signed counts cancel out exactly (colliding
/// buckets with opposite signs), the unsigned counts are used instead, so any
/// sentence with at least one token gets a vector.
fn hash_tokens<S: AsRef<str>>(tokens: &[S], dim: usize, seed: u64) -> Option<Vector> {
    let mut signed = vec![0.0; dim];
    let mut unsigned = vec![0.0; dim];
    for tok in tokens {
        let h = seeded_hash(tok.as_ref(), seed);
        let bucket = (h % dim as u64) as usize;
        signed[bucket] += if splitmix64(h ^ seed) >> 63 == 0 { 1.0 } else { -1.0 };
        unsigned[bucket] += 1.0;
    }
    Vector::from_vec(signed)
        .normalized()
        .or_else(|| Vector::from_vec(unsigned).normalized())
}

static DEFAULT_STOPWORDS: LazyLock<Stopwords> = LazyLock::new(Stopwords::english);

/// Feature-hashed unit vector of the sentence's non-stopword unigrams, using
/// the built-in stopword list.
pub fn hashed_encode(sentence: &str, dim: usize, seed: u64) -> Result<Vector, EncoderError> {
    if dim == 0 {
        return Err(EncoderError::ZeroDimension);
    }
    let tokens = content_tokens(sentence, &DEFAULT_STOPWORDS);
    hash_tokens(&tokens, dim, seed).ok_or(EncoderError::NoTokens { index: 0 })
}

#[derive(Clone, Debug)]
pub struct HashedEncoder {
    dim: usize,
    seed: u64,
    batch_size: usize,
    stopwords: Stopwords,
}

impl HashedEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim: dim.max(1),
            seed,
            batch_size: 64,
            stopwords: Stopwords::english(),
        }
    }

    pub fn with_stopwords(mut self, stopwords: Stopwords) -> Self {
        self.stopwords = stopwords;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn encode(&self, sentence: &str) -> Option<Vector> {
        let tokens = content_tokens(sentence, &self.stopwords);
        hash_tokens(&tokens, self.dim, self.seed)
    }
}

impl SentenceEncoder for HashedEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_batch(&self, sentences: &[String]) -> Result<Vec<Vector>, EncoderError> {
        check_non_empty(sentences)?;
        let chunks: Vec<Result<Vec<Vector>, EncoderError>> = sentences
            .par_chunks(self.batch_size)
            .enumerate()
            .map(|(c, chunk)| {
                chunk
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        self.encode(s).ok_or(EncoderError::NoTokens {
                            index: c * self.batch_size + i,
                        })
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(sentences.len());
        for chunk in chunks {
            out.extend(chunk?);
        }
        Ok(out)
    }
}

#[derive(Deserialize)]
struct HealthResponse {
    dim: usize,
    #[serde(default)]
    model: String,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    sentences: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

/// HTTP client for an external sentence-embedding service.
pub struct BridgeEncoder {
    endpoint: String,
    dim: usize,
    model: String,
    batch_size: usize,
    retries: u32,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for BridgeEncoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeEncoder")
            .field("endpoint", &self.endpoint)
            .field("dim", &self.dim)
            .field("model", &self.model)
            .finish()
    }
}

impl BridgeEncoder {
    /// Connects and checks `/healthz`; a dimension other than `expected_dim`
    /// is an error.
    pub fn connect(
        endpoint: &str,
        expected_dim: usize,
        batch_size: usize,
        timeout: Duration,
        retries: u32,
    ) -> Result<Self, EncoderError> {
        let endpoint = endpoint.trim_end_matches('/').to_string();
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EncoderError::Unreachable {
                endpoint: endpoint.clone(),
                path: "/healthz",
                message: e.to_string(),
            })?;
        let mut bridge = Self {
            endpoint,
            dim: expected_dim,
            model: String::new(),
            batch_size: batch_size.max(1),
            retries,
            client,
        };
        let health: HealthResponse = bridge.with_retries("/healthz", |b| {
            b.client
                .get(format!("{}/healthz", b.endpoint))
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.json())
        })?;
        if health.dim != expected_dim {
            return Err(EncoderError::DimMismatch {
                endpoint: bridge.endpoint,
                expected: expected_dim,
                actual: health.dim,
            });
        }
        bridge.model = health.model;
        Ok(bridge)
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn with_retries<T>(
        &self,
        path: &'static str,
        call: impl Fn(&Self) -> reqwest::Result<T>,
    ) -> Result<T, EncoderError> {
        let mut last = None;
        for attempt in 0..=self.retries {
            match call(self) {
                Ok(v) => return Ok(v),
                Err(e) => {
                    log::warn!("{}{path} attempt {} failed: {e}", self.endpoint, attempt + 1);
                    last = Some(e);
                }
            }
        }
        Err(EncoderError::Unreachable {
            endpoint: self.endpoint.clone(),
            path,
            message: last.map(|e| e.to_string()).unwrap_or_default(),
        })
    }

    fn protocol(&self, message: String) -> EncoderError {
        EncoderError::Protocol {
            endpoint: self.endpoint.clone(),
            message,
        }
    }

    fn embed_chunk(&self, chunk: &[String], offset: usize) -> Result<Vec<Vector>, EncoderError> {
        let response: EmbedResponse = self.with_retries("/embed", |b| {
            b.client
                .post(format!("{}/embed", b.endpoint))
                .json(&EmbedRequest { sentences: chunk })
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.json())
        })?;
        if response.dim != self.dim {
            return Err(EncoderError::DimMismatch {
                endpoint: self.endpoint.clone(),
                expected: self.dim,
                actual: response.dim,
            });
        }
        if response.vectors.len() != chunk.len() {
            return Err(self.protocol(format!(
                "sent {} sentences, received {} vectors",
                chunk.len(),
                response.vectors.len()
            )));
        }
        response
            .vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                if v.len() != self.dim {
                    return Err(EncoderError::DimMismatch {
                        endpoint: self.endpoint.clone(),
                        expected: self.dim,
                        actual: v.len(),
                    });
                }
                let v = Vector::from_vec(v);
                let norm = v.norm();
                if !norm.is_finite() || norm == 0.0 {
                    return Err(self.protocol(format!("vector {} is not normalizable", offset + i)));
                }
                if (norm - 1.0).abs() > NORM_TOLERANCE {
                    log::warn!("{}: vector {} has norm {norm}, renormalizing", self.endpoint, offset + i);
                    return Ok(v.normalized().expect("norm checked above"));
                }
                Ok(v)
            })
            .collect()
    }
}

impl SentenceEncoder for BridgeEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_batch(&self, sentences: &[String]) -> Result<Vec<Vector>, EncoderError> {
        check_non_empty(sentences)?;
        let mut out = Vec::with_capacity(sentences.len());
        for (c, chunk) in sentences.chunks(self.batch_size).enumerate() {
            out.extend(self.embed_chunk(chunk, c * self.batch_size)?);
        }
        Ok(out)
    }
}
