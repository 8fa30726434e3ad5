//! Text and code generation clients: the trait, a deterministic stub, and an
//! HTTP client for OpenAI-compatible chat endpoints.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompts::{is_program_prompt, ChatMessage, PROGRAM_HEADER};
use crate::digest;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("request timed out after {0} attempt(s)")]
    Timeout(u32),
    #[error("http status {0}")]
    Status(u16),
    #[error("malformed response: {0}")]
    Format(String),
}

/// One question as returned by the question generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionDraft {
    pub q: String,
    pub ans: String,
    pub dist1: String,
    pub dist2: String,
    pub dist3: String,
    pub dist4: String,
}

impl QuestionDraft {
    pub fn distractors(&self) -> [&str; 4] {
        [&self.dist1, &self.dist2, &self.dist3, &self.dist4]
    }

    fn is_complete(&self) -> bool {
        !self.q.trim().is_empty()
            && !self.ans.trim().is_empty()
            && self.distractors().iter().all(|d| !d.trim().is_empty())
    }
}

pub trait GenerationClient: Sync {
    /// Stable identifier written into candidate provenance.
    fn id(&self) -> String;

    /// Raw completion text for a chat prompt.
    fn complete(&self, prompt: &[ChatMessage]) -> Result<String, ClientError>;

    fn generate_questions(&self, prompt: &[ChatMessage]) -> Result<Vec<QuestionDraft>, ClientError> {
        parse_question_drafts(&self.complete(prompt)?)
    }

    fn generate_program(&self, prompt: &[ChatMessage]) -> Result<String, ClientError> {
        Ok(extract_program(&self.complete(prompt)?))
    }
}

/// Pulls every complete `{q, ans, dist1..dist4}` object out of a completion,
/// whether it is a JSON array, a numbered list of objects, or fenced.
pub fn parse_question_drafts(text: &str) -> Result<Vec<QuestionDraft>, ClientError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let (mut depth, mut start, mut in_str, mut escaped) = (0usize, 0usize, false, false);
    for (i, &b) in bytes.iter().enumerate() {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' if depth > 0 => in_str = true,
            b'{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    if let Ok(d) = serde_json::from_str::<QuestionDraft>(&text[start..=i]) {
                        if d.is_complete() {
                            out.push(d);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    if out.is_empty() {
        return Err(ClientError::Format("no complete question object".into()));
    }
    Ok(out)
}

/// Normalizes a code completion into a full `execute_command` definition.
/// Markdown fences are dropped; a bare body gets the header prepended.
pub fn extract_program(text: &str) -> String {
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect();
    let body = lines.join("\n");
    if let Some(at) = body.find("def execute_command") {
        return format!("{}\n", body[at..].trim_end());
    }
    let indented = body
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_none_or(|l| l.starts_with(' ') || l.starts_with('\t'));
    let mut out = format!("{PROGRAM_HEADER}\n");
    for line in body.lines() {
        if !indented && !line.trim().is_empty() {
            out.push_str("    ");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Fixture file for [`StubClient`]: completions keyed by prompt hash.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubFixture {
    #[serde(default)]
    pub responses: BTreeMap<String, String>,
}

/// Deterministic client. Prompts found in the fixture get the recorded
/// completion (a completion starting with `!error ` fails with that
/// message); all other prompts get a synthetic completion derived from the
/// prompt hash.
#[derive(Debug, Clone)]
pub struct StubClient {
    pub fixture: StubFixture,
    pub questions_per_script: usize,
}

impl Default for StubClient {
    fn default() -> Self {
        StubClient {
            fixture: StubFixture::default(),
            questions_per_script: 2,
        }
    }
}

const SUBJECTS: &[&str] = &["person", "dog", "child", "waiter", "player", "cyclist", "cook", "dancer"];
const ACTIONS: &[&str] = &["jumping", "holding a cup", "sitting down", "waving", "running", "opening a door", "eating", "talking"];

impl StubClient {
    pub fn with_fixture(fixture: StubFixture) -> Self {
        StubClient {
            fixture,
            ..StubClient::default()
        }
    }

    fn synthetic_questions(&self, seed: u64) -> String {
        let pick = |list: &[&'static str], salt: u64| list[(seed.rotate_left(salt as u32 * 7) % list.len() as u64) as usize];
        let drafts: Vec<QuestionDraft> = (0..self.questions_per_script as u64)
            .map(|i| {
                let subject = pick(SUBJECTS, 2 * i + 1);
                let action = pick(ACTIONS, 2 * i + 2);
                QuestionDraft {
                    q: format!("What does the {subject} do after {action} (scene {:04x}, #{i})?", seed & 0xffff),
                    ans: format!("keeps {action}"),
                    dist1: "stands still".into(),
                    dist2: "leaves the room".into(),
                    dist3: "picks up a bag".into(),
                    dist4: "starts laughing".into(),
                }
            })
            .collect();
        let items: Vec<String> = drafts
            .iter()
            .enumerate()
            .map(|(i, d)| format!("{}. {}", i + 1, serde_json::to_string(d).unwrap()))
            .collect();
        items.join("\n")
    }
}

/// Program body assembled from optional blocks chosen by `seed` bits, so that
/// different questions get structurally different programs.
fn synthetic_program(seed: u64) -> String {
    if seed.is_multiple_of(23) {
        // outside the supported language: exercises the parse-failure route
        return "    with video as clip:\n        return clip\n".into();
    }
    let mut body = String::from("    info = []\n");
    if seed & 1 != 0 {
        body.push_str(
            "    for frame in video.frame_iterator():\n        if frame.exists('person'):\n            info.append(frame.simple_query(question))\n",
        );
    }
    if seed & 2 != 0 {
        body.push_str(
            "    count = 0\n    index = 0\n    while index < video.num_frames:\n        if video.frame_from_index(index).verify_property('person', 'moving'):\n            count += 1\n        index += 2\n    info.append(str(count))\n",
        );
    }
    if seed & 4 != 0 {
        body.push_str(
            "    patches = [p for p in video.frame_from_index(0).find('object') if p.compute_depth() < 5]\n    if len(patches) > 1:\n        info.append('many')\n    elif len(patches) == 1:\n        info.append('one')\n    else:\n        info.append('none')\n",
        );
    }
    if seed & 8 != 0 {
        body.push_str(
            "    for frame in video.frame_iterator():\n        for patch in frame.find('person'):\n            if patch.exists('cup') and not patch.exists('hat'):\n                info.append(patch.simple_query('What is happening?'))\n                break\n",
        );
    }
    if seed & 16 != 0 {
        body.push_str(
            "    middle = video.frame_from_index(video.num_frames // 2)\n    info.append(middle.simple_query(question))\n",
        );
    }
    body.push_str("    return video.select_answer(info, question, possible_answers)\n");
    body
}

impl GenerationClient for StubClient {
    fn id(&self) -> String {
        "stub".into()
    }

    fn complete(&self, prompt: &[ChatMessage]) -> Result<String, ClientError> {
        let hash = super::prompts::prompt_hash(prompt);
        if let Some(text) = self.fixture.responses.get(&hash) {
            return match text.strip_prefix("!error ") {
                Some(msg) => Err(ClientError::Transport(msg.to_string())),
                None => Ok(text.clone()),
            };
        }
        let user = prompt.last().map(|m| m.content.as_str()).unwrap_or_default();
        let seed = digest::short(user);
        if is_program_prompt(prompt) {
            Ok(synthetic_program(seed))
        } else {
            Ok(self.synthetic_questions(seed))
        }
    }
}

/// Settings for an OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpClientConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    pub timeout_secs: f64,
    pub retries: u32,
    #[serde(default)]
    pub temperature: f64,
}

impl Default for HttpClientConfig {
    fn default() -> Self {
        HttpClientConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "gpt-4".into(),
            token_env: Some("CODEPLEXITY_API_TOKEN".into()),
            timeout_secs: 60.0,
            retries: 2,
            temperature: 0.0,
        }
    }
}

pub struct HttpClient {
    config: HttpClientConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(config: HttpClientConfig) -> Result<Self, ClientError> {
        if !(config.timeout_secs > 0.0 && config.timeout_secs.is_finite()) {
            return Err(ClientError::Transport("timeout must be positive".into()));
        }
        let token = config.token_env.as_deref().and_then(|v| std::env::var(v).ok());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(true)
            .build()
            .into();
        Ok(HttpClient { config, token, agent })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, (ClientError, bool)> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.send_json(body).map_err(|e| match e {
            ureq::Error::StatusCode(code) => (ClientError::Status(code), code == 429 || code >= 500),
            ureq::Error::Timeout(_) => (ClientError::Timeout(1), true),
            other => (ClientError::Transport(other.to_string()), true),
        })?;
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| (ClientError::Format(e.to_string()), false))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| (ClientError::Format("missing choices[0].message.content".into()), false))
    }
}

impl GenerationClient for HttpClient {
    fn id(&self) -> String {
        format!("http:{}", self.config.model)
    }

    /// Retries timeouts, transport failures, 429 and 5xx responses.
    fn complete(&self, prompt: &[ChatMessage]) -> Result<String, ClientError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": prompt,
            "temperature": self.config.temperature,
        });
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((_, true)) if attempts <= self.config.retries => {
                    std::thread::sleep(Duration::from_millis(50 * attempts as u64));
                }
                Err((ClientError::Timeout(_), _)) => return Err(ClientError::Timeout(attempts)),
                Err((err, _)) => return Err(err),
            }
        }
    }
}
