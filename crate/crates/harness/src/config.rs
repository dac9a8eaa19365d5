//! Run configuration, read from one TOML file.
//!
//! ```toml
//! environment = "household"
//! output = "runs/oracle"
//! parallelism = 4
//! variants = ["stateact", "react", { slug = "stateact-json" }]
//!
//! [backend]
//! kind = "oracle"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stateact_core::backend::RequestTemplate;
use stateact_core::codec::TruncationPolicy;
use stateact_core::{AgentVariant, Dialect};

use crate::http::HttpConfig;
use crate::replay::ReplayMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Household,
    Textcraft,
}

impl EnvKind {
    pub fn dialect(self) -> Dialect {
        match self {
            EnvKind::Household => Dialect::Household,
            EnvKind::Textcraft => Dialect::Textcraft,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.dialect().as_str()
    }
}

/// A variant given as a bare slug, or as a table that may name a dialect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VariantSpec {
    Slug(String),
    Table {
        slug: String,
        #[serde(default)]
        dialect: Option<Dialect>,
        #[serde(default)]
        track_visited: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Oracle,
    Http(HttpConfig),
    Replay {
        store: PathBuf,
        #[serde(default)]
        mode: ReplayMode,
    },
}

fn default_d_max() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_d_max")]
    pub d_max: usize,
}

fn one() -> usize {
    1
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub environment: EnvKind,
    /// Directory of world files; the bundled set when absent.
    #[serde(default)]
    pub worlds: Option<PathBuf>,
    /// Recipe book for crafting tasks; the bundled book when absent.
    #[serde(default)]
    pub recipes: Option<PathBuf>,
    pub variants: Vec<VariantSpec>,
    pub backend: BackendConfig,
    /// Step budget; the environment's default when absent.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub adapt: Option<AdaptConfig>,
    pub output: PathBuf,
    #[serde(default = "one")]
    pub parallelism: usize,
    #[serde(default)]
    pub request: RequestTemplate,
    /// Prompt length cap in characters.
    #[serde(default)]
    pub max_prompt_chars: Option<usize>,
    #[serde(default)]
    pub truncation: TruncationPolicy,
    /// Household only: accept and emit `move X to Y` for placing objects.
    #[serde(default)]
    pub move_to_syntax: bool,
    #[serde(default = "ten")]
    pub bucket_width: usize,
    /// Replay store written by `replay-record`.
    #[serde(default)]
    pub record_to: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("no variants configured")]
    NoVariants,
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error("variant {variant} is listed twice")]
    DuplicateVariant { variant: String },
    #[error("variant {variant} uses the {dialect} dialect but the environment is {environment}")]
    DialectMismatch { variant: String, dialect: Dialect, environment: String },
    #[error("parallelism must be at least 1")]
    ZeroParallelism,
    #[error("max_steps must be at least 1")]
    ZeroSteps,
    #[error("adapt.d_max must be at least 1")]
    ZeroDepth,
    #[error("this command needs {0}")]
    Missing(&'static str),
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads and validates a config file, resolving relative paths.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output);
        self.worlds.as_mut().map(fix);
        self.recipes.as_mut().map(fix);
        self.record_to.as_mut().map(fix);
        if let BackendConfig::Replay { store, .. } = &mut self.backend {
            fix(store);
        }
    }

    /// The concrete variants, checked against the environment's dialect.
    pub fn resolved_variants(&self) -> Result<Vec<AgentVariant>, ConfigError> {
        let env_dialect = self.environment.dialect();
        let mut out: Vec<AgentVariant> = Vec::new();
        for spec in &self.variants {
            let (slug, dialect, track_visited) = match spec {
                VariantSpec::Slug(s) => (s, env_dialect, false),
                VariantSpec::Table { slug, dialect, track_visited } => (slug, dialect.unwrap_or(env_dialect), *track_visited),
            };
            let mut v = AgentVariant::from_slug(slug, dialect).ok_or_else(|| ConfigError::UnknownVariant(slug.clone()))?;
            v.track_visited = (v.track_visited || track_visited) && dialect == Dialect::Household;
            if dialect != env_dialect {
                return Err(ConfigError::DialectMismatch {
                    variant: slug.clone(),
                    dialect,
                    environment: self.environment.as_str().to_string(),
                });
            }
            if out.iter().any(|o| o.slug() == v.slug()) {
                return Err(ConfigError::DuplicateVariant { variant: v.slug() });
            }
            out.push(v);
        }
        if out.is_empty() {
            return Err(ConfigError::NoVariants);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.resolved_variants()?;
        if self.parallelism == 0 {
            return Err(ConfigError::ZeroParallelism);
        }
        if self.max_steps == Some(0) {
            return Err(ConfigError::ZeroSteps);
        }
        if self.adapt.is_some_and(|a| a.enabled && a.d_max == 0) {
            return Err(ConfigError::ZeroDepth);
        }
        Ok(())
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps.unwrap_or_else(|| self.environment.dialect().default_max_steps())
    }

    /// `Some(d_max)` when decomposition is on.
    pub fn d_max(&self) -> Option<usize> {
        self.adapt.filter(|a| a.enabled).map(|a| a.d_max)
    }
}
