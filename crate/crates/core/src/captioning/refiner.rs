//! Caption refinement through an OpenAI-style chat completion endpoint.
//!
//! Request: `POST <endpoint>` with
//! `{"model", "messages": [{"role": "system", "content": <prompt>},
//! {"role": "user", "content": [{"type": "image_url", "image_url": {"url": "data:image/png;base64,..."}},
//! {"type": "text", "text": <raw caption>}]}]}`.
//! Response: `choices[0].message.content`, either a string or a list of
//! `{"type": "text", "text": ...}` parts.

use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::CaptionDraft;
use crate::error::{Error, Result};
use crate::imaging::RgbaImage;

pub const ENV_ENDPOINT: &str = "LAYERFORGE_VLM_ENDPOINT";
pub const ENV_API_KEY: &str = "LAYERFORGE_VLM_API_KEY";

pub const DEFAULT_SYSTEM_PROMPT: &str = include_str!("../../resources/refine_system_prompt.txt");

#[derive(Debug, Clone)]
pub struct RefinerConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub system_prompt: String,
    pub timeout: Duration,
    /// Extra attempts after the first one.
    pub max_retries: u32,
    pub retry_backoff: Duration,
    pub word_range: (usize, usize),
    /// Return the raw draft instead of failing once retries are exhausted.
    pub fallback: bool,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            api_key: None,
            model: "default".into(),
            system_prompt: DEFAULT_SYSTEM_PROMPT.trim().to_string(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            retry_backoff: Duration::from_millis(500),
            word_range: (100, 140),
            fallback: true,
        }
    }
}

impl RefinerConfig {
    /// Defaults, with endpoint and key taken from the environment when set.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Ok(e) = std::env::var(ENV_ENDPOINT) {
            cfg.endpoint = e;
        }
        cfg.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.word_range.0 >= self.word_range.1 {
            return Err(Error::Config(format!(
                "word_range lower bound {} must be below upper bound {}",
                self.word_range.0, self.word_range.1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryRecord {
    pub attempt: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refinement {
    pub text: String,
    pub retries: Vec<RetryRecord>,
    pub fallback_used: bool,
    pub warnings: Vec<String>,
}

pub trait CaptionRefiner: Sync {
    fn refine(&self, image: &RgbaImage, draft: &CaptionDraft) -> Result<Refinement>;
}

/// Returns the raw draft unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRefiner;

impl CaptionRefiner for IdentityRefiner {
    fn refine(&self, _image: &RgbaImage, draft: &CaptionDraft) -> Result<Refinement> {
        Ok(Refinement {
            text: draft.raw.clone(),
            retries: Vec::new(),
            fallback_used: true,
            warnings: Vec::new(),
        })
    }
}

pub struct HttpRefiner {
    cfg: RefinerConfig,
    agent: ureq::Agent,
}

impl HttpRefiner {
    pub fn new(cfg: RefinerConfig) -> Result<Self> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { cfg, agent })
    }

    pub fn config(&self) -> &RefinerConfig {
        &self.cfg
    }

    fn request_body(&self, image: &RgbaImage, raw: &str) -> Result<Value> {
        let png = image.encode_png()?;
        let data_url = format!(
            "data:image/png;base64,{}",
            base64::engine::general_purpose::STANDARD.encode(png)
        );
        Ok(json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": self.cfg.system_prompt},
                {"role": "user", "content": [
                    {"type": "image_url", "image_url": {"url": data_url}},
                    {"type": "text", "text": raw},
                ]},
            ],
        }))
    }

    fn attempt(&self, body: &Value) -> std::result::Result<String, String> {
        let mut req = self.agent.post(&self.cfg.endpoint);
        if let Some(key) = &self.cfg.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
        let status = resp.status();
        let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        if !status.is_success() {
            let snippet: String = text.chars().take(200).collect();
            return Err(format!("HTTP {}: {snippet}", status.as_u16()));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| format!("invalid JSON response: {e}"))?;
        let content = completion_text(&v).ok_or("response has no choices[0].message.content")?;
        let content = content.trim();
        if content.is_empty() {
            return Err("empty completion".into());
        }
        Ok(content.to_string())
    }
}

fn completion_text(v: &Value) -> Option<String> {
    let content = v.get("choices")?.get(0)?.get("message")?.get("content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => {
            let texts: Vec<&str> = parts.iter().filter_map(|p| p.get("text")?.as_str()).collect();
            (!texts.is_empty()).then(|| texts.join(""))
        }
        _ => None,
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

impl CaptionRefiner for HttpRefiner {
    fn refine(&self, image: &RgbaImage, draft: &CaptionDraft) -> Result<Refinement> {
        let body = self.request_body(image, &draft.raw)?;
        let attempts = self.cfg.max_retries + 1;
        let mut retries = Vec::new();
        for attempt in 1..=attempts {
            match self.attempt(&body) {
                Ok(text) => {
                    let mut warnings = Vec::new();
                    let words = word_count(&text);
                    if words > 2 * self.cfg.word_range.1 {
                        log::warn!("refined caption has {words} words (target {:?})", self.cfg.word_range);
                        warnings.push(format!("refined caption has {words} words"));
                    }
                    return Ok(Refinement {
                        text,
                        retries,
                        fallback_used: false,
                        warnings,
                    });
                }
                Err(error) => {
                    log::warn!("refiner attempt {attempt}/{attempts} to {} failed: {error}", self.cfg.endpoint);
                    retries.push(RetryRecord { attempt, error });
                    if attempt < attempts && !self.cfg.retry_backoff.is_zero() {
                        std::thread::sleep(self.cfg.retry_backoff * attempt);
                    }
                }
            }
        }
        let last_error = retries.last().map(|r| r.error.clone()).unwrap_or_default();
        if self.cfg.fallback {
            return Ok(Refinement {
                text: draft.raw.clone(),
                warnings: vec![format!("refiner unavailable, kept raw caption: {last_error}")],
                retries,
                fallback_used: true,
            });
        }
        Err(Error::Refiner {
            endpoint: self.cfg.endpoint.clone(),
            attempts,
            last_error,
        })
    }
}

/// Refines `draft` with the configured endpoint, or returns it unchanged
/// when no endpoint is configured and fallback is allowed.
pub fn refine_caption(cfg: &RefinerConfig, image: &RgbaImage, draft: &CaptionDraft) -> Result<Refinement> {
    if cfg.endpoint.is_empty() {
        if cfg.fallback {
            return IdentityRefiner.refine(image, draft);
        }
        return Err(Error::Refiner {
            endpoint: String::new(),
            attempts: 0,
            last_error: "no endpoint configured".into(),
        });
    }
    HttpRefiner::new(cfg.clone())?.refine(image, draft)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completion_text_shapes() {
        let s = json!({"choices": [{"message": {"content": "hello"}}]});
        assert_eq!(completion_text(&s).as_deref(), Some("hello"));
        let parts = json!({"choices": [{"message": {"content": [{"type": "text", "text": "a"}, {"type": "text", "text": "b"}]}}]});
        assert_eq!(completion_text(&parts).as_deref(), Some("ab"));
        assert_eq!(completion_text(&json!({"choices": []})), None);
    }

    #[test]
    fn identity_fallback_without_endpoint() {
        let draft = CaptionDraft {
            raw: "In the center, a cat.".into(),
            region_phrases: vec![],
            refined: None,
        };
        let img = RgbaImage::new(2, 2).unwrap();
        let r = refine_caption(&RefinerConfig::default(), &img, &draft).unwrap();
        assert_eq!(r.text, draft.raw);
        assert!(r.fallback_used);

        let strict = RefinerConfig {
            fallback: false,
            ..Default::default()
        };
        assert!(matches!(refine_caption(&strict, &img, &draft), Err(Error::Refiner { .. })));
    }

    #[test]
    fn word_range_must_be_ordered() {
        let cfg = RefinerConfig {
            word_range: (140, 100),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_prompt_asks_for_word_budget() {
        assert!(DEFAULT_SYSTEM_PROMPT.contains("100 to 140 words"));
    }
}
