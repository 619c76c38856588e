//! Run configuration file and its merge with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bloomlo::analysis::LintConfig;
use bloomlo::llm::ProviderConfig;
use bloomlo::GenerationParams;
use serde::Deserialize;

/// TOML file with optional `[provider]`, `[generation]` and `[lint]` tables.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub provider: Option<ProviderConfig>,
    #[serde(default)]
    pub generation: GenerationParams,
    #[serde(default)]
    pub lint: LintConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.generation.validate()?;
        Ok(config)
    }
}

/// Provider selection: `--replay` wins, then `--live`, then the file.
pub fn resolve_provider(
    file: Option<&ProviderConfig>,
    replay: Option<&PathBuf>,
    live: bool,
    lenient_replay: bool,
    model: Option<&str>,
) -> Result<ProviderConfig> {
    let mut provider = match (replay, live) {
        (Some(_), true) => bail!("--replay and --live are mutually exclusive"),
        (Some(store), false) => ProviderConfig::replay(store, !lenient_replay),
        (None, true) => match file {
            Some(live @ ProviderConfig::Live { .. }) => live.clone(),
            _ => ProviderConfig::live_default(),
        },
        (None, false) => match file {
            Some(provider) => provider.clone(),
            None => bail!("no provider configured: pass --replay <store> or --live"),
        },
    };
    match &mut provider {
        ProviderConfig::Live { model_name, .. } => {
            if let Some(model) = model {
                *model_name = model.to_string();
            }
        }
        ProviderConfig::Replay { strict, .. } => {
            if lenient_replay {
                *strict = false;
            }
        }
    }
    Ok(provider)
}

/// Generation parameters from the file, with the model taken from `--model`
/// or, in live mode, from the provider.
pub fn resolve_params(
    file: &GenerationParams,
    provider: &ProviderConfig,
    model: Option<&str>,
) -> Result<GenerationParams> {
    let mut params = file.clone();
    if let Some(model) = model {
        params.model_name = model.to_string();
    } else if let ProviderConfig::Live { model_name, .. } = provider {
        params.model_name = model_name.clone();
    }
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_sections() {
        let text = r#"
[provider]
mode = "live"
model_name = "gpt-4o"

[generation]
temperature = 0.2

[lint]
max_chars = 200
"#;
        let config: FileConfig = toml::from_str(text).unwrap();
        assert_eq!(config.generation.temperature, 0.2);
        assert_eq!(config.generation.max_completion_tokens, 2000);
        assert_eq!(config.lint.max_chars, 200);
        let provider = resolve_provider(config.provider.as_ref(), None, false, false, None).unwrap();
        let params = resolve_params(&config.generation, &provider, None).unwrap();
        assert_eq!(params.model_name, "gpt-4o");
    }

    #[test]
    fn flag_precedence() {
        let store = PathBuf::from("s.json");
        let live_file = ProviderConfig::live_default();
        let p = resolve_provider(Some(&live_file), Some(&store), false, true, None).unwrap();
        assert_eq!(p, ProviderConfig::replay("s.json", false));
        assert!(resolve_provider(None, Some(&store), true, false, None).is_err());
        assert!(resolve_provider(None, None, false, false, None).is_err());
        let p = resolve_provider(None, None, true, false, Some("m2")).unwrap();
        assert!(matches!(p, ProviderConfig::Live { ref model_name, .. } if model_name == "m2"));
        let params = resolve_params(&GenerationParams::default(), &p, None).unwrap();
        assert_eq!(params.model_name, "m2");
    }

    #[test]
    fn credential_is_not_a_config_key() {
        assert!(toml::from_str::<FileConfig>("[provider]\nmode = \"live\"\napi_key = \"sk\"\n").is_err());
    }
}
