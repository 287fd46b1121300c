//! Settings shared by every subcommand.
//!
//! Precedence, lowest first: built-in defaults, the TOML file, `FRAMEFILL_*`
//! environment variables, command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

pub const ENV_PREFIX: &str = "FRAMEFILL_";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    pub scorer: ScorerConfig,
    pub decode: DecodeConfig,
    pub serve: ServeConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory the relative file names below resolve against.
    pub dir: PathBuf,
    pub lexicon: PathBuf,
    pub vocab: PathBuf,
    pub merges: PathBuf,
    pub specials: PathBuf,
    pub embeddings: PathBuf,
    pub corpus: PathBuf,
    /// Extra annotated stories for frame lookup (suggest/counterfactual).
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    /// Binary n-gram model written by `train-lm`.
    pub model: PathBuf,
    /// Base URL of a remote scorer; takes precedence over `model`.
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub beam: usize,
    pub max_new_tokens: usize,
    pub num_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub addr: String,
    pub sessions: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dir: PathBuf::from("data"),
            lexicon: "lexicon.json".into(),
            vocab: "vocab.json".into(),
            merges: "merges.txt".into(),
            specials: "specials.json".into(),
            embeddings: "embeddings.txt".into(),
            corpus: "stories.jsonl".into(),
            annotations: Some("demo_stories.jsonl".into()),
        }
    }
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            model: "model.ngram".into(),
            url: None,
        }
    }
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam: framefill_core::decoder::DEFAULT_BEAM_SIZE,
            max_new_tokens: framefill_core::decoder::DEFAULT_MAX_NEW_TOKENS,
            num_candidates: 5,
        }
    }
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            addr: "127.0.0.1:8080".into(),
            sessions: "sessions".into(),
        }
    }
}

impl DataConfig {
    pub fn path(&self, file: &Path) -> PathBuf {
        self.dir.join(file)
    }
}

impl Config {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Applies `FRAMEFILL_*` variables from `vars`; unknown names are ignored.
    pub fn apply_env(
        &mut self,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> anyhow::Result<()> {
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let num = |v: &str| {
                v.parse::<usize>()
                    .with_context(|| format!("{key}={v:?} is not a number"))
            };
            match name {
                "DATA_DIR" => self.data.dir = value.into(),
                "LEXICON" => self.data.lexicon = value.into(),
                "CORPUS" => self.data.corpus = value.into(),
                "EMBEDDINGS" => self.data.embeddings = value.into(),
                "MODEL" => self.scorer.model = value.into(),
                "SCORER_URL" => self.scorer.url = Some(value),
                "BEAM" => self.decode.beam = num(&value)?,
                "MAX_NEW_TOKENS" => self.decode.max_new_tokens = num(&value)?,
                "ADDR" => self.serve.addr = value,
                "SESSIONS" => self.serve.sessions = value.into(),
                "SEED" => {
                    self.seed = value
                        .parse()
                        .with_context(|| format!("{key}={value:?} is not a number"))?
                }
                "LOG" => {}
                _ => log::warn!("ignoring unknown setting {key}"),
            }
        }
        Ok(())
    }

    /// Defaults, then `file` (if any), then the process environment.
    pub fn resolve(file: Option<&Path>) -> anyhow::Result<Self> {
        let mut config = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        if config.decode.beam == 0 {
            bail!("beam must be at least 1");
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_then_env() {
        let mut c =
            Config::from_toml("seed = 4\n[decode]\nbeam = 8\n[data]\ndir = \"/x\"").unwrap();
        assert_eq!((c.seed, c.decode.beam, c.decode.max_new_tokens), (4, 8, 40));
        assert_eq!(
            c.data.path(&c.data.lexicon.clone()),
            PathBuf::from("/x/lexicon.json")
        );
        c.apply_env([
            ("FRAMEFILL_BEAM".to_string(), "3".to_string()),
            ("HOME".into(), "/".into()),
        ])
        .unwrap();
        assert_eq!(c.decode.beam, 3);
        assert!(c
            .apply_env([("FRAMEFILL_SEED".to_string(), "x".to_string())])
            .is_err());
        assert!(Config::from_toml("bogus = 1").is_err());
    }
}
