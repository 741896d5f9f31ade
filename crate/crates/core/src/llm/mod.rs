//! Chat-completion client: the two turn-point extractors and the turn checker
//! as structured function calls, plus free-text queries for the implicit
//! baseline.

mod transport;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use reqwest::Url;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::canonical::NodeName;
use crate::instruction::{BackendError, ExtractorBackend, TurnPoints, TurnSide};

pub use transport::{
    load_transcript, save_transcript, ChatTransport, Exchange, HttpTransport, RawResponse,
    RecordingTransport, ReplayTransport,
};

pub const ENV_API_KEY: &str = "OPENAI_API_KEY";
pub const ENV_BASE_URL: &str = "OPENAI_BASE_URL";
pub const ENV_MODEL: &str = "OPENAI_MODEL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4";

const EXTRACT_TOOL: &str = "report_turn_points";
const CHECK_TOOL: &str = "report_turn_direction";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("service returned HTTP {status}: {}", transport::truncate(body, 300))]
    Status { status: u16, body: String },
    #[error("response does not match the expected schema ({reason}): {}", transport::truncate(raw, 300))]
    Schema { reason: String, raw: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("replay error: {0}")]
    Replay(String),
}

impl LlmError {
    fn schema(reason: impl Into<String>, raw: &str) -> Self {
        LlmError::Schema { reason: reason.into(), raw: raw.to_string() }
    }
}

#[derive(Debug, Clone)]
pub struct LlmConfig {
    pub base_url: Url,
    pub model: String,
    pub api_key: String,
    pub timeout: Duration,
    pub temperature: f64,
    /// Maximum number of requests in flight at once through one client.
    pub max_in_flight: usize,
}

impl LlmConfig {
    pub fn new(base_url: &str, model: &str, api_key: &str) -> Result<Self, LlmError> {
        let base_url = Url::parse(base_url)
            .map_err(|e| LlmError::Config(format!("invalid base URL {base_url:?}: {e}")))?;
        if !matches!(base_url.scheme(), "http" | "https") {
            return Err(LlmError::Config(format!("base URL must be http or https, got {base_url}")));
        }
        if model.trim().is_empty() {
            return Err(LlmError::Config("model name is empty".into()));
        }
        Ok(LlmConfig {
            base_url,
            model: model.to_string(),
            api_key: api_key.to_string(),
            timeout: Duration::from_secs(60),
            temperature: 0.0,
            max_in_flight: 4,
        })
    }

    /// Reads `OPENAI_API_KEY` (required), `OPENAI_BASE_URL` and `OPENAI_MODEL`.
    pub fn from_env() -> Result<Self, LlmError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, LlmError> {
        let key = get(ENV_API_KEY)
            .filter(|k| !k.is_empty())
            .ok_or_else(|| LlmError::Config(format!("{ENV_API_KEY} is not set")))?;
        let base = get(ENV_BASE_URL).unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
        let model = get(ENV_MODEL).unwrap_or_else(|| DEFAULT_MODEL.to_string());
        Self::new(&base, &model, &key)
    }

    /// Settings used when answering from a transcript; nothing is contacted.
    pub fn offline() -> Self {
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_string());
        Self::new(DEFAULT_BASE_URL, &model, "").expect("default URL parses")
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Result<Self, LlmError> {
        if timeout.is_zero() {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        self.timeout = timeout;
        Ok(self)
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self, LlmError> {
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(LlmError::Config(format!("temperature must be >= 0, got {temperature}")));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn with_max_in_flight(mut self, limit: usize) -> Result<Self, LlmError> {
        if limit == 0 {
            return Err(LlmError::Config("in-flight limit must be at least 1".into()));
        }
        self.max_in_flight = limit;
        Ok(self)
    }
}

/// System prompts. In `turn_points_extractor` the text `{side}` is replaced
/// by `left` or `right`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSet {
    pub turn_points_extractor: String,
    pub turn_points_checker: String,
    pub implicit_reverse: String,
    pub implicit_combined: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            turn_points_extractor: "Extract waypoints in the description of the navigation path. \
                                    Then, extract the points which turn {side}."
                .into(),
            turn_points_checker: "For the following path, answer the action at specified point \
                                  is turn right or left."
                .into(),
            implicit_reverse: "Show the reverse path, reversing the start and goal of the \
                               following path."
                .into(),
            implicit_combined: "Understand the spatial structure of path1-9 below and create \
                                the shortest path from the specified start to goal. However, be \
                                sure to indicate the action to be taken at each passing point."
                .into(),
        }
    }
}

impl PromptSet {
    /// Loads overrides from a JSON file; missing fields keep their defaults.
    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("cannot read prompts {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| LlmError::Config(format!("invalid prompts {}: {e}", path.display())))
    }

    pub fn extractor(&self, side: TurnSide) -> String {
        self.turn_points_extractor.replace("{side}", side.word())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImplicitMode {
    Reverse,
    Combined,
}

/// A model that answers route questions directly from instruction text.
pub trait ImplicitModel {
    /// `query` is required for `Combined` and ignored for `Reverse`.
    fn implicit_query(
        &self,
        mode: ImplicitMode,
        instructions: &[String],
        query: Option<(&NodeName, &NodeName)>,
    ) -> Result<String, LlmError>;
}

struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock().unwrap();
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap();
        }
        *active += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

/// Shareable across threads. Each call sends exactly one request.
pub struct LlmClient {
    model: String,
    temperature: f64,
    prompts: PromptSet,
    transport: Box<dyn ChatTransport>,
    in_flight: InFlight,
}

#[derive(Deserialize)]
struct ExtractArgs {
    waypoints: Vec<String>,
    turn_points: Vec<String>,
}

#[derive(Deserialize)]
struct CheckArgs {
    direction: String,
}

impl LlmClient {
    pub fn new(config: &LlmConfig, prompts: PromptSet, transport: Box<dyn ChatTransport>) -> Self {
        LlmClient {
            model: config.model.clone(),
            temperature: config.temperature,
            prompts,
            transport,
            in_flight: InFlight {
                limit: config.max_in_flight,
                active: Mutex::new(0),
                freed: Condvar::new(),
            },
        }
    }

    /// A client that talks HTTP to `config.base_url`.
    pub fn http(config: &LlmConfig, prompts: PromptSet) -> Result<Self, LlmError> {
        let transport = HttpTransport::new(&config.base_url, &config.api_key, config.timeout)?;
        Ok(Self::new(config, prompts, Box::new(transport)))
    }

    pub fn prompts(&self) -> &PromptSet {
        &self.prompts
    }

    pub fn extract_request(&self, side: TurnSide, instruction: &str) -> Value {
        let tool = json!({
            "type": "function",
            "function": {
                "name": EXTRACT_TOOL,
                "description": format!(
                    "Report the waypoints of the path in order and the waypoints where the path turns {}.",
                    side.word()
                ),
                "parameters": {
                    "type": "object",
                    "properties": {
                        "waypoints": {
                            "type": "array",
                            "items": {"type": "string"},
                            "description": "Every place the path passes, from start to goal."
                        },
                        "turn_points": {
                            "type": "array",
                            "items": {"type": "string"},
                            "description": format!("Waypoints where the path turns {}.", side.word())
                        }
                    },
                    "required": ["waypoints", "turn_points"]
                }
            }
        });
        self.request(&self.prompts.extractor(side), instruction, Some((tool, EXTRACT_TOOL)))
    }

    pub fn check_request(&self, instruction: &str, waypoint: &NodeName) -> Value {
        let tool = json!({
            "type": "function",
            "function": {
                "name": CHECK_TOOL,
                "description": "Report whether the path turns left or right at the specified point.",
                "parameters": {
                    "type": "object",
                    "properties": {
                        "direction": {"type": "string", "enum": ["left", "right"]}
                    },
                    "required": ["direction"]
                }
            }
        });
        let user = format!("Path: {instruction}\nPoint: {waypoint}");
        self.request(&self.prompts.turn_points_checker, &user, Some((tool, CHECK_TOOL)))
    }

    pub fn implicit_request(
        &self,
        mode: ImplicitMode,
        instructions: &[String],
        query: Option<(&NodeName, &NodeName)>,
    ) -> Result<Value, LlmError> {
        if instructions.is_empty() {
            return Err(LlmError::Precondition("no instructions given".into()));
        }
        let (system, user) = match mode {
            ImplicitMode::Reverse => {
                if instructions.len() != 1 {
                    return Err(LlmError::Precondition(format!(
                        "reverse takes one instruction, got {}",
                        instructions.len()
                    )));
                }
                (&self.prompts.implicit_reverse, instructions[0].clone())
            }
            ImplicitMode::Combined => {
                let (start, goal) = query.ok_or_else(|| {
                    LlmError::Precondition("combined query needs a start and a goal".into())
                })?;
                let mut user = String::new();
                for (i, text) in instructions.iter().enumerate() {
                    user.push_str(&format!("path{}: {}\n", i + 1, text));
                }
                user.push_str(&format!("start: {start}\ngoal: {goal}"));
                (&self.prompts.implicit_combined, user)
            }
        };
        Ok(self.request(system, &user, None))
    }

    fn request(&self, system: &str, user: &str, tool: Option<(Value, &str)>) -> Value {
        let mut body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user}
            ]
        });
        if let Some((tool, name)) = tool {
            body["tools"] = json!([tool]);
            body["tool_choice"] = json!({"type": "function", "function": {"name": name}});
        }
        body
    }

    fn send(&self, request: &Value) -> Result<Value, LlmError> {
        let response = {
            let _permit = self.in_flight.acquire();
            self.transport.post(request)?
        };
        if !(200..300).contains(&response.status) {
            return Err(LlmError::Status { status: response.status, body: response.body });
        }
        let value: Value = serde_json::from_str(&response.body)
            .map_err(|e| LlmError::schema(format!("body is not JSON: {e}"), &response.body))?;
        value
            .pointer("/choices/0/message")
            .cloned()
            .ok_or_else(|| LlmError::schema("no choices[0].message", &response.body))
    }

    fn tool_arguments<T: serde::de::DeserializeOwned>(&self, request: &Value, tool: &str) -> Result<T, LlmError> {
        let message = self.send(request)?;
        let raw = message.to_string();
        let call = message
            .pointer("/tool_calls/0/function")
            .ok_or_else(|| LlmError::schema("no tool call in message", &raw))?;
        if call.get("name").and_then(Value::as_str) != Some(tool) {
            return Err(LlmError::schema(format!("expected a call to {tool}"), &raw));
        }
        let args = match call.get("arguments") {
            Some(Value::String(s)) => serde_json::from_str(s)
                .map_err(|e| LlmError::schema(format!("arguments are not JSON: {e}"), &raw))?,
            Some(v @ Value::Object(_)) => v.clone(),
            _ => return Err(LlmError::schema("tool call has no arguments", &raw)),
        };
        serde_json::from_value(args).map_err(|e| LlmError::schema(e.to_string(), &raw))
    }

    pub fn llm_extract(&self, side: TurnSide, instruction: &str) -> Result<TurnPoints, LlmError> {
        let request = self.extract_request(side, instruction);
        let args: ExtractArgs = self.tool_arguments(&request, EXTRACT_TOOL)?;
        let name = |s: &String| {
            NodeName::new(s).map_err(|e| {
                LlmError::schema(format!("bad place name {s:?}: {e}"), &json!(args.waypoints).to_string())
            })
        };
        let waypoints = args.waypoints.iter().map(name).collect::<Result<Vec<_>, _>>()?;
        let turn_points = args.turn_points.iter().map(name).collect::<Result<BTreeSet<_>, _>>()?;
        Ok(TurnPoints { waypoints, turn_points })
    }

    pub fn llm_check_turn(&self, instruction: &str, waypoint: &NodeName) -> Result<TurnSide, LlmError> {
        let request = self.check_request(instruction, waypoint);
        let args: CheckArgs = self.tool_arguments(&request, CHECK_TOOL)?;
        match args.direction.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(TurnSide::Left),
            "right" => Ok(TurnSide::Right),
            other => Err(LlmError::schema(
                format!("direction must be left or right, got {other:?}"),
                &args.direction,
            )),
        }
    }

    pub fn llm_implicit_query(
        &self,
        mode: ImplicitMode,
        instructions: &[String],
        query: Option<(&NodeName, &NodeName)>,
    ) -> Result<String, LlmError> {
        let request = self.implicit_request(mode, instructions, query)?;
        let message = self.send(&request)?;
        match message.get("content").and_then(Value::as_str) {
            Some(text) if !text.trim().is_empty() => Ok(text.to_string()),
            _ => Err(LlmError::schema("message has no text content", &message.to_string())),
        }
    }
}

impl ExtractorBackend for LlmClient {
    fn extract_turn_points(&self, instruction: &str, side: TurnSide) -> Result<TurnPoints, BackendError> {
        self.llm_extract(side, instruction).map_err(BackendError::wrap)
    }

    fn check_turn(&self, instruction: &str, waypoint: &NodeName) -> Result<TurnSide, BackendError> {
        self.llm_check_turn(instruction, waypoint).map_err(BackendError::wrap)
    }
}

impl ImplicitModel for LlmClient {
    fn implicit_query(
        &self,
        mode: ImplicitMode,
        instructions: &[String],
        query: Option<(&NodeName, &NodeName)>,
    ) -> Result<String, LlmError> {
        self.llm_implicit_query(mode, instructions, query)
    }
}

/// Wraps a tool-call answer in a chat-completion response body.
pub fn tool_call_response(tool: &str, arguments: &Value) -> Value {
    json!({
        "id": "chatcmpl-local",
        "object": "chat.completion",
        "choices": [{
            "index": 0,
            "finish_reason": "tool_calls",
            "message": {
                "role": "assistant",
                "content": null,
                "tool_calls": [{
                    "id": "call_0",
                    "type": "function",
                    "function": {"name": tool, "arguments": arguments.to_string()}
                }]
            }
        }]
    })
}

/// Wraps free text in a chat-completion response body.
pub fn text_response(text: &str) -> Value {
    json!({
        "id": "chatcmpl-local",
        "object": "chat.completion",
        "choices": [{
            "index": 0,
            "finish_reason": "stop",
            "message": {"role": "assistant", "content": text}
        }]
    })
}

pub fn extract_tool_name() -> &'static str {
    EXTRACT_TOOL
}

pub fn check_tool_name() -> &'static str {
    CHECK_TOOL
}
