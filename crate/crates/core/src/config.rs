//! Run configuration. The file format is TOML with one section per concern:
//!
//! ```toml
//! [window]
//! window_slides = 7
//! slide_seconds = 86400
//! min_story_size = 8
//! keywords_n = 10
//! temperature = 2.0
//! encoder_dim = 256
//! rng_seed = 0
//!
//! [encoder]
//! kind = "hashed"      # or "bridge"
//! dim = 256
//! seed = 42
//! endpoint = "http://127.0.0.1:8080"
//! batch_size = 64
//! timeout_secs = 30
//! retries = 2
//!
//! [sim]
//! strategy = "them_sent_mean"   # or "ind_sent_mean"
//! jsd_mode = "similarity"       # or "divergence"
//!
//! [tokenize]
//! stopwords_path = "stopwords.txt"
//! ```
//!
//! Every key is optional; missing keys take the defaults shown above.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::JsdMode;
use crate::embed::EmbeddingStrategy;
use crate::encoder::EncoderSpec;
use crate::error::{Error, Result};
use crate::model::SECONDS_PER_DAY;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Window length in slides.
    pub window_slides: u32,
    pub slide_seconds: u64,
    /// Minimum number of articles to start a story.
    pub min_story_size: usize,
    /// Thematic keywords per theme.
    pub keywords_n: usize,
    pub temperature: f64,
    pub encoder_dim: usize,
    pub rng_seed: u64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_slides: 7,
            slide_seconds: SECONDS_PER_DAY,
            min_story_size: 8,
            keywords_n: 10,
            temperature: 2.0,
            encoder_dim: 256,
            rng_seed: 0,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.window_slides == 0 {
            return fail("window_slides must be at least 1");
        }
        if self.slide_seconds == 0 {
            return fail("slide_seconds must be positive");
        }
        if self.min_story_size == 0 {
            return fail("min_story_size must be at least 1");
        }
        if self.keywords_n == 0 {
            return fail("keywords_n must be at least 1");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return fail("temperature must be a positive number");
        }
        if self.encoder_dim == 0 {
            return fail("encoder_dim must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub strategy: EmbeddingStrategy,
    pub jsd_mode: JsdMode,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizeOptions {
    /// Replaces the built-in English stopword list.
    pub stopwords_path: Option<PathBuf>,
}

/// Options that shape the engine beyond the window parameters.
pub type EngineOptions = SimOptions;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub window: WindowConfig,
    pub encoder: EncoderSpec,
    pub sim: SimOptions,
    pub tokenize: TokenizeOptions,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if self.encoder.dim != self.window.encoder_dim {
            return Err(Error::Config(format!(
                "encoder.dim ({}) differs from window.encoder_dim ({})",
                self.encoder.dim, self.window.encoder_dim
            )));
        }
        if self.encoder.batch_size == 0 {
            return Err(Error::Config("encoder.batch_size must be positive".into()));
        }
        Ok(())
    }
}
