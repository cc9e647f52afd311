//! Completion clients: a deterministic mock, a failure-injecting wrapper, and
//! an HTTP chat-completion client.

use std::time::Duration;

use serde_json::{json, Value};

use super::keywords::keywords;
use super::template::Prompt;
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &Prompt) -> Result<String>;
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn prompt_rng(seed: u64, prompt: &Prompt, salt: u64) -> SeededRng {
    let h = fnv1a(prompt.system.as_bytes()) ^ fnv1a(prompt.user.as_bytes()).rotate_left(17);
    SeededRng::new(seed ^ h).derive(salt)
}

fn between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = text[start..].find(close)? + start;
    Some(text[start..end].trim())
}

const EXPANSIONS: [&str; 6] = [
    "Responsibilities include owning deliverables end to end and reporting progress to the team lead each week.",
    "Candidates should show a track record of shipping measurable results in a similar role.",
    "The position requires clear written communication and close work with cross-functional partners.",
    "Required qualifications: at least two years of relevant experience and strong analytical skills.",
    "Success in the first six months means independently running core workflows and improving their quality.",
    "The team expects careful documentation, reliable delivery and thoughtful peer review.",
];

/// Template-echo completion: the original JD plus canned expansions and
/// keywords from the reference resumes. A seeded share of responses drift,
/// dropping most original wording. Same prompt and seed, same completion.
#[derive(Debug, Clone)]
pub struct MockClient {
    pub seed: u64,
    pub drift_rate: f64,
}

impl MockClient {
    pub fn new(seed: u64) -> Self {
        Self { seed, drift_rate: 0.15 }
    }
}

impl CompletionClient for MockClient {
    fn complete(&self, prompt: &Prompt) -> Result<String> {
        let mut rng = prompt_rng(self.seed, prompt, 0);
        let jd = between(&prompt.user, "<jd>", "</jd>")
            .ok_or_else(|| Error::Client("mock client: prompt has no <jd> block".into()))?;
        let mut resume_words: Vec<String> = Vec::new();
        let mut rest = prompt.user.as_str();
        while let Some(r) = between(rest, "<resume", "</resume>") {
            let body = r.split_once('>').map(|(_, b)| b).unwrap_or(r);
            for k in keywords(body) {
                if !resume_words.contains(&k) && k.chars().any(char::is_alphabetic) {
                    resume_words.push(k);
                }
            }
            rest = &rest[rest.find("</resume>").expect("found") + 9..];
        }
        let n_exp = 2 + rng.below(2);
        let start = rng.below(EXPANSIONS.len());
        let expansion: Vec<&str> = (0..n_exp).map(|i| EXPANSIONS[(start + i) % EXPANSIONS.len()]).collect();
        let body = if rng.chance(self.drift_rate) {
            // Keep only every third word of the original.
            jd.split_whitespace().step_by(3).collect::<Vec<_>>().join(" ")
        } else {
            jd.to_string()
        };
        let mut out = format!("{body} {}", expansion.join(" "));
        if !resume_words.is_empty() {
            resume_words.truncate(6);
            out.push_str(&format!(" Preferred background: {}.", resume_words.join(", ")));
        }
        Ok(out)
    }
}

/// Fails a seeded share of prompts, otherwise defers to `inner`.
#[derive(Debug, Clone)]
pub struct FailingClient<C> {
    pub inner: C,
    pub failure_rate: f64,
    pub seed: u64,
}

impl<C: CompletionClient> CompletionClient for FailingClient<C> {
    fn complete(&self, prompt: &Prompt) -> Result<String> {
        if prompt_rng(self.seed, prompt, 1).chance(self.failure_rate) {
            return Err(Error::Client("injected failure".into()));
        }
        self.inner.complete(prompt)
    }
}

pub const ENV_ENDPOINT: &str = "PJF_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "PJF_LLM_MODEL";
pub const ENV_API_KEY: &str = "PJF_LLM_API_KEY";

/// OpenAI-style chat-completion client with bounded retries.
#[derive(Debug, Clone)]
pub struct HttpClient {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub max_attempts: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl HttpClient {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            max_attempts: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads `PJF_LLM_ENDPOINT`, `PJF_LLM_MODEL` and optional `PJF_LLM_API_KEY`.
    pub fn from_env() -> Result<Self> {
        let get = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let endpoint = get(ENV_ENDPOINT).ok_or_else(|| Error::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let model = get(ENV_MODEL).ok_or_else(|| Error::Config(format!("{ENV_MODEL} is not set")))?;
        Ok(Self::new(endpoint, model, get(ENV_API_KEY)))
    }

    pub fn request_body(&self, prompt: &Prompt) -> Value {
        json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": 0,
        })
    }

    fn attempt(&self, agent: &ureq::Agent, body: &Value) -> std::result::Result<String, (bool, String)> {
        let mut req = agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| (true, e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err((true, format!("http status {status}")));
        }
        if status >= 400 {
            return Err((false, format!("http status {status}")));
        }
        let v: Value = resp.body_mut().read_json().map_err(|e| (false, format!("bad response body: {e}")))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| (false, "response has no choices[0].message.content".to_string()))
    }
}

impl CompletionClient for HttpClient {
    fn complete(&self, prompt: &Prompt) -> Result<String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let body = self.request_body(prompt);
        let mut last = String::new();
        for attempt in 0..self.max_attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.attempt(&agent, &body) {
                Ok(text) => return Ok(text),
                Err((retry, msg)) => {
                    log::warn!("completion attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                    if !retry {
                        break;
                    }
                }
            }
        }
        Err(Error::Client(last))
    }
}
