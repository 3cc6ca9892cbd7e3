use std::path::{Path, PathBuf};
use std::time::Duration;

use qgbench_core::generation::{ApiStyle, GenParams, HttpAdapterConfig};
use serde::{Deserialize, Serialize};

pub const DEFAULT_API_KEY_ENV: &str = "QGBENCH_API_KEY";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub server: ServerConfig,
    pub generation: GenerationConfig,
    pub models: Vec<ModelConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    pub page_size: usize,
    /// Corpus holding contexts and gold questions for the rated records.
    pub corpus: PathBuf,
    /// Directory of generation runs, one subdirectory per run.
    pub runs_dir: PathBuf,
    /// Append-only ratings log.
    pub ratings_file: PathBuf,
    /// Include the gold question in batch items.
    pub show_gold: bool,
    /// Include the generating model in batch items.
    pub show_model: bool,
    pub shuffle_seed: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            page_size: 20,
            corpus: PathBuf::from("data/test.ndjson"),
            runs_dir: PathBuf::from("runs"),
            ratings_file: PathBuf::from("ratings.ndjson"),
            show_gold: false,
            show_model: false,
            shuffle_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub parallelism: usize,
    pub cache_dir: Option<PathBuf>,
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            parallelism: 4,
            cache_dir: None,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_secs: 60,
        }
    }
}

/// A remote generation endpoint. `params` defaults to the chat sampling
/// settings, or the completion ones for `style = "completions"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    pub base_url: String,
    #[serde(default)]
    pub style: ApiStyle,
    #[serde(default)]
    pub params: Option<GenParams>,
}

impl ModelConfig {
    pub fn params(&self) -> GenParams {
        self.params.clone().unwrap_or_else(|| match self.style {
            ApiStyle::Chat => GenParams::chat(),
            ApiStyle::Completions => GenParams::completion(),
        })
    }

    pub fn adapter_config(&self, timeout: Duration) -> HttpAdapterConfig {
        HttpAdapterConfig {
            base_url: self.base_url.clone(),
            model_id: self.id.clone(),
            style: self.style,
            api_key: None,
            timeout,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("parsing {0}: {1}")]
    Parse(PathBuf, toml::de::Error),
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.into(), e))?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse(path.into(), e))
    }

    pub fn model(&self, id: &str) -> Option<&ModelConfig> {
        self.models.iter().find(|m| m.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let text = r#"
            [server]
            port = 9000
            show_gold = true

            [generation]
            parallelism = 8

            [[models]]
            id = "gpt-3.5-turbo"
            base_url = "https://api.openai.com/v1"

            [[models]]
            id = "text-davinci-003"
            base_url = "https://api.openai.com/v1"
            style = "completions"
        "#;
        let config: Config = toml::from_str(text).unwrap();
        assert_eq!(config.server.port, 9000);
        assert_eq!(config.server.page_size, 20);
        assert!(config.server.show_gold && !config.server.show_model);
        assert_eq!(config.generation.parallelism, 8);
        assert_eq!(config.model("gpt-3.5-turbo").unwrap().params(), GenParams::chat());
        assert_eq!(config.model("text-davinci-003").unwrap().params(), GenParams::completion());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<Config>("[server]\nprot = 1\n").is_err());
        assert_eq!(toml::from_str::<Config>("").unwrap(), Config::default());
    }
}
