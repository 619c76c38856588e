//! Chat-completion client with a live HTTP mode and a replay mode backed by
//! a JSON store of recorded completions.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::GenerationParams;

pub const DEFAULT_ENDPOINT_URL: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_CREDENTIAL_ENV_VAR: &str = "OPENAI_API_KEY";
pub const REPLAY_PROVIDER_LABEL: &str = "replay";

/// Hex sha256 over the length-prefixed model name, system text and user
/// text.
pub fn request_key(model_name: &str, system_text: &str, user_text: &str) -> String {
    let mut hasher = Sha256::new();
    for part in [model_name, system_text, user_text] {
        hasher.update((part.len() as u64).to_be_bytes());
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    pub params: GenerationParams,
    pub request_key: String,
}

impl ChatRequest {
    pub fn new(system_text: impl Into<String>, user_text: impl Into<String>, params: GenerationParams) -> Self {
        let system_text = system_text.into();
        let user_text = user_text.into();
        let request_key = request_key(&params.model_name, &system_text, &user_text);
        ChatRequest {
            system_text,
            user_text,
            params,
            request_key,
        }
    }

    /// Wire body in the common chat-completion shape.
    pub fn payload(&self) -> serde_json::Value {
        let p = &self.params;
        json!({
            "model": p.model_name,
            "messages": [
                {"role": "system", "content": self.system_text},
                {"role": "user", "content": self.user_text},
            ],
            "temperature": p.temperature,
            "top_p": p.top_p,
            "max_tokens": p.max_completion_tokens,
            "frequency_penalty": p.frequency_penalty,
            "presence_penalty": p.presence_penalty,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinishReason {
    Stop,
    LengthCapped,
    Other(String),
}

impl FinishReason {
    fn from_wire(reason: Option<&str>) -> Self {
        match reason {
            Some("stop") => FinishReason::Stop,
            Some("length") => FinishReason::LengthCapped,
            Some(other) => FinishReason::Other(other.to_string()),
            None => FinishReason::Other("unspecified".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub completion_text: String,
    pub provider_label: String,
    pub finish_reason: FinishReason,
}

fn default_endpoint() -> String {
    DEFAULT_ENDPOINT_URL.into()
}
fn default_model() -> String {
    GenerationParams::default().model_name
}
fn default_credential_env_var() -> String {
    DEFAULT_CREDENTIAL_ENV_VAR.into()
}
fn default_timeout() -> u64 {
    120
}
fn default_retries() -> u32 {
    3
}
fn default_strict() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProviderConfig {
    Live {
        #[serde(default = "default_endpoint")]
        endpoint_url: String,
        #[serde(default = "default_model")]
        model_name: String,
        /// Name of the environment variable holding the bearer token.
        #[serde(default = "default_credential_env_var")]
        credential_env_var: String,
        #[serde(default = "default_timeout")]
        timeout_seconds: u64,
        #[serde(default = "default_retries")]
        max_retries: u32,
    },
    Replay {
        store_path: PathBuf,
        #[serde(default = "default_strict")]
        strict: bool,
    },
}

impl ProviderConfig {
    pub fn live_default() -> Self {
        ProviderConfig::Live {
            endpoint_url: default_endpoint(),
            model_name: default_model(),
            credential_env_var: default_credential_env_var(),
            timeout_seconds: default_timeout(),
            max_retries: default_retries(),
        }
    }

    pub fn replay(store_path: impl Into<PathBuf>, strict: bool) -> Self {
        ProviderConfig::Replay {
            store_path: store_path.into(),
            strict,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredCompletion {
    pub completion_text: String,
    pub provider_label: String,
    pub recorded_at: String,
}

/// On-disk replay store, keyed by request key.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStore {
    pub entries: BTreeMap<String, StoredCompletion>,
}

impl ReplayStore {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingStore(path.display().to_string()));
        }
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Writes through a sibling temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let fail = |e: std::io::Error| Error::StoreWriteFailure(format!("{}: {e}", path.display()));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        let mut file = fs::File::create(&tmp).map_err(fail)?;
        file.write_all(text.as_bytes()).map_err(fail)?;
        file.sync_all().map_err(fail)?;
        fs::rename(&tmp, path).map_err(fail)
    }
}

/// Adds the response under the request's key. Re-recording an identical
/// completion leaves the store, including its timestamp, untouched.
pub fn record(request: &ChatRequest, response: &ChatResponse, store_path: &Path) -> Result<()> {
    let mut store = if store_path.exists() {
        ReplayStore::load(store_path)?
    } else {
        ReplayStore::default()
    };
    if let Some(existing) = store.entries.get(&request.request_key) {
        if existing.completion_text == response.completion_text
            && existing.provider_label == response.provider_label
        {
            return Ok(());
        }
    }
    store.entries.insert(
        request.request_key.clone(),
        StoredCompletion {
            completion_text: response.completion_text.clone(),
            provider_label: response.provider_label.clone(),
            recorded_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        },
    );
    store.save(store_path)
}

enum Backend {
    Live {
        agent: ureq::Agent,
        endpoint_url: String,
        model_name: String,
        credential_env_var: String,
        max_retries: u32,
    },
    Replay {
        store: ReplayStore,
        strict: bool,
    },
}

/// A configured provider. Safe to share across threads; `complete` may be
/// called concurrently for distinct requests.
pub struct Client {
    backend: Backend,
    backoff_base: Duration,
}

const BODY_EXCERPT_CHARS: usize = 500;

impl Client {
    /// Validates the configuration. Replay loads the store up front.
    pub fn new(config: &ProviderConfig) -> Result<Self> {
        let backend = match config {
            ProviderConfig::Live {
                endpoint_url,
                model_name,
                credential_env_var,
                timeout_seconds,
                max_retries,
            } => {
                let agent = ureq::Agent::config_builder()
                    .timeout_global(Some(Duration::from_secs(*timeout_seconds)))
                    .http_status_as_error(false)
                    .build()
                    .into();
                Backend::Live {
                    agent,
                    endpoint_url: endpoint_url.clone(),
                    model_name: model_name.clone(),
                    credential_env_var: credential_env_var.clone(),
                    max_retries: *max_retries,
                }
            }
            ProviderConfig::Replay { store_path, strict } => Backend::Replay {
                store: ReplayStore::load(store_path)?,
                strict: *strict,
            },
        };
        Ok(Client {
            backend,
            backoff_base: Duration::from_secs(1),
        })
    }

    /// Delay before the first retry; each later retry doubles it.
    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    pub fn is_live(&self) -> bool {
        matches!(self.backend, Backend::Live { .. })
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        match &self.backend {
            Backend::Replay { store, strict } => match store.entries.get(&request.request_key) {
                Some(entry) => Ok(ChatResponse {
                    completion_text: entry.completion_text.clone(),
                    provider_label: entry.provider_label.clone(),
                    finish_reason: FinishReason::Stop,
                }),
                None if *strict => Err(Error::ReplayMiss(request.request_key.clone())),
                None => {
                    log::warn!("no recorded completion for {}; using an empty one", request.request_key);
                    Ok(ChatResponse {
                        completion_text: String::new(),
                        provider_label: REPLAY_PROVIDER_LABEL.into(),
                        finish_reason: FinishReason::Other("replay_miss".into()),
                    })
                }
            },
            Backend::Live {
                agent,
                endpoint_url,
                model_name,
                credential_env_var,
                max_retries,
            } => {
                let token = std::env::var(credential_env_var)
                    .ok()
                    .filter(|t| !t.trim().is_empty())
                    .ok_or_else(|| Error::MissingCredential(credential_env_var.clone()))?;
                if request.params.model_name != *model_name {
                    return Err(Error::InvalidParams(format!(
                        "request model `{}` differs from provider model `{model_name}`",
                        request.params.model_name
                    )));
                }
                self.live_call(agent, endpoint_url, &token, *max_retries, request)
            }
        }
    }

    fn live_call(
        &self,
        agent: &ureq::Agent,
        endpoint_url: &str,
        token: &str,
        max_retries: u32,
        request: &ChatRequest,
    ) -> Result<ChatResponse> {
        let payload = request.payload();
        let mut attempt = 0;
        loop {
            let failure = match agent
                .post(endpoint_url)
                .header("Authorization", format!("Bearer {token}"))
                .send_json(&payload)
            {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    let body = response
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| Error::NetworkFailure(e.to_string()));
                    match (status, body) {
                        (200..=299, Ok(body)) => return parse_completion_body(&body, &request.params.model_name),
                        (500..=599, Ok(body)) => Error::ProviderError {
                            status,
                            body: excerpt(&body),
                        },
                        (_, Ok(body)) => {
                            return Err(Error::ProviderError {
                                status,
                                body: excerpt(&body),
                            })
                        }
                        (_, Err(e)) => e,
                    }
                }
                Err(e) => Error::NetworkFailure(e.to_string()),
            };
            if attempt >= max_retries {
                return Err(failure);
            }
            let delay = self.backoff_base * 2u32.pow(attempt);
            log::warn!("attempt {} failed ({failure}); retrying in {delay:?}", attempt + 1);
            std::thread::sleep(delay);
            attempt += 1;
        }
    }
}

fn excerpt(body: &str) -> String {
    body.chars().take(BODY_EXCERPT_CHARS).collect()
}

fn parse_completion_body(body: &str, model_name: &str) -> Result<ChatResponse> {
    #[derive(Deserialize)]
    struct Wire {
        model: Option<String>,
        choices: Vec<Choice>,
    }
    #[derive(Deserialize)]
    struct Choice {
        message: Message,
        finish_reason: Option<String>,
    }
    #[derive(Deserialize)]
    struct Message {
        content: Option<String>,
    }
    let wire: Wire = serde_json::from_str(body).map_err(|e| Error::ProviderError {
        status: 200,
        body: format!("unreadable completion ({e}): {}", excerpt(body)),
    })?;
    let choice = wire.choices.into_iter().next().ok_or_else(|| Error::ProviderError {
        status: 200,
        body: "completion has no choices".into(),
    })?;
    let completion_text = choice.message.content.unwrap_or_default();
    let mut finish_reason = FinishReason::from_wire(choice.finish_reason.as_deref());
    if completion_text.is_empty() && finish_reason == FinishReason::Stop {
        finish_reason = FinishReason::Other("empty".into());
    }
    Ok(ChatResponse {
        completion_text,
        provider_label: wire.model.unwrap_or_else(|| model_name.to_string()),
        finish_reason,
    })
}

/// One-shot convenience over [`Client`].
pub fn complete(request: &ChatRequest, config: &ProviderConfig) -> Result<ChatResponse> {
    Client::new(config)?.complete(request)
}
