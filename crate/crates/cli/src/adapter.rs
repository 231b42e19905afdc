//! External language-model adapter: the only seam that touches a
//! network.
//!
//! The wire shape is a chat-completions JSON body (model, messages,
//! logprobs flag, top_logprobs count). Scoring requests ask for one
//! token with per-token log-probabilities; the option letters'
//! log-probabilities are read off the first response position. Every
//! exchange goes through a [`WireTransport`], so runs can be recorded
//! to JSON transcripts and replayed without a network.
//!
//! Extraction rule (documented, not inferred from any provider): take
//! the top-logprobs list at the FIRST generated token position; a
//! candidate token matches an option iff it equals the single letter
//! after trimming surrounding whitespace; the first (highest-ranked)
//! match per letter wins; letters never seen get a floor logit of
//! (minimum observed option logit - 10); the softmax runs over option
//! letters only.

use calpath_core::{
    build_generation_prompt, parse_generated_paths, CandidateSet, GeneratorConfig, McqaInstance,
    OptionLabel, OptionScores, ParseError, Role, Scene, ScoreError, Scorer,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error, Clone)]
pub enum TransportError {
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport failure: {0}")]
    Io(String),
}

impl TransportError {
    /// Worth retrying: network failures, rate limits, server errors.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportError::Io(_) => true,
            TransportError::Http { status, .. } => *status == 429 || *status >= 500,
        }
    }
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("transport failed after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: TransportError },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("no option letter found in top logprobs; raw tokens: {raw}")]
    NoOptionTokens { raw: String },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("backend text did not parse into paths: {0}")]
    Paths(#[from] ParseError),
}

/// One HTTP-shaped exchange. Implementations must be safe to call from
/// multiple workers.
pub trait WireTransport: Send + Sync {
    fn post(&self, body: &Value) -> Result<Value, TransportError>;
}

/// Live HTTP transport. The credential comes from the environment and
/// is attached as a bearer header; it is never logged or persisted.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint_url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(
        endpoint_url: impl Into<String>,
        timeout: std::time::Duration,
        api_key: Option<String>,
    ) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Io(e.to_string()))?;
        Ok(HttpTransport {
            client,
            endpoint_url: endpoint_url.into(),
            api_key,
        })
    }
}

impl WireTransport for HttpTransport {
    fn post(&self, body: &Value) -> Result<Value, TransportError> {
        let mut request = self.client.post(&self.endpoint_url).json(body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| TransportError::Io(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| TransportError::Io(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Http {
                status: status.as_u16(),
                body: text.chars().take(400).collect(),
            });
        }
        serde_json::from_str(&text).map_err(|e| TransportError::Io(format!("bad json: {e}")))
    }
}

/// Scripted transport: pops one result per call, in order. Used for
/// replaying recorded transcripts and for failure-path tests.
pub struct ReplayTransport {
    responses: Mutex<std::collections::VecDeque<Result<Value, TransportError>>>,
}

impl ReplayTransport {
    pub fn new(responses: Vec<Result<Value, TransportError>>) -> Self {
        ReplayTransport {
            responses: Mutex::new(responses.into_iter().collect()),
        }
    }

    pub fn single(response: Value) -> Self {
        Self::new(vec![Ok(response)])
    }
}

impl WireTransport for ReplayTransport {
    fn post(&self, _body: &Value) -> Result<Value, TransportError> {
        self.responses
            .lock()
            .expect("replay transport lock")
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Io("replay transcript exhausted".into())))
    }
}

/// One recorded exchange.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireRecord {
    pub request: Value,
    pub response: Value,
}

/// Wraps another transport and records every exchange, so a live run
/// can be replayed offline later.
pub struct RecordingTransport<T: WireTransport> {
    inner: T,
    records: Mutex<Vec<WireRecord>>,
}

impl<T: WireTransport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport {
            inner,
            records: Mutex::new(Vec::new()),
        }
    }

    pub fn take_records(&self) -> Vec<WireRecord> {
        std::mem::take(&mut self.records.lock().expect("recording lock"))
    }
}

impl<T: WireTransport> WireTransport for RecordingTransport<T> {
    fn post(&self, body: &Value) -> Result<Value, TransportError> {
        let response = self.inner.post(body)?;
        self.records
            .lock()
            .expect("recording lock")
            .push(WireRecord {
                request: body.clone(),
                response: response.clone(),
            });
        Ok(response)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterConfig {
    pub model_name: String,
    pub top_logprobs: usize,
    pub max_retries: u32,
    /// Base backoff between retries; doubles per attempt.
    pub backoff: std::time::Duration,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            model_name: "scorer".to_string(),
            top_logprobs: 8,
            max_retries: 3,
            backoff: std::time::Duration::from_millis(100),
        }
    }
}

fn post_with_retries(
    transport: &dyn WireTransport,
    cfg: &AdapterConfig,
    body: &Value,
) -> Result<Value, AdapterError> {
    let mut attempts = 0;
    loop {
        attempts += 1;
        match transport.post(body) {
            Ok(v) => return Ok(v),
            Err(e) if e.is_transient() && attempts <= cfg.max_retries => {
                std::thread::sleep(cfg.backoff * 2u32.pow(attempts - 1));
            }
            Err(e) => return Err(AdapterError::Transport { attempts, last: e }),
        }
    }
}

/// Score an MCQA instance over the wire: request one token with
/// top-logprob reporting and softmax the option-letter logits.
pub fn llm_adapter_score(
    instance: &McqaInstance,
    transport: &dyn WireTransport,
    cfg: &AdapterConfig,
) -> Result<OptionScores, AdapterError> {
    let labels = instance.labels();
    let body = json!({
        "model": cfg.model_name,
        "messages": [{"role": "user", "content": instance.prompt}],
        "max_tokens": 1,
        "logprobs": true,
        "top_logprobs": cfg.top_logprobs.max(labels.len() + 2),
    });
    let response = post_with_retries(transport, cfg, &body)?;
    extract_option_scores(&response, &labels)
}

/// Pull per-letter logits out of a chat-completions response body.
pub fn extract_option_scores(
    response: &Value,
    labels: &[OptionLabel],
) -> Result<OptionScores, AdapterError> {
    let top = response
        .pointer("/choices/0/logprobs/content/0/top_logprobs")
        .and_then(Value::as_array)
        .ok_or_else(|| {
            AdapterError::Malformed("missing choices[0].logprobs.content[0].top_logprobs".into())
        })?;

    let mut found: BTreeMap<OptionLabel, f64> = BTreeMap::new();
    for entry in top {
        let token = entry.get("token").and_then(Value::as_str).unwrap_or("");
        let logprob = match entry.get("logprob").and_then(Value::as_f64) {
            Some(v) if v.is_finite() => v,
            _ => continue,
        };
        let trimmed = token.trim();
        let mut chars = trimmed.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if let Some(label) = OptionLabel::from_char(c) {
                if labels.contains(&label) {
                    // First (highest-ranked) occurrence wins.
                    found.entry(label).or_insert(logprob);
                }
            }
        }
    }
    if found.is_empty() {
        return Err(AdapterError::NoOptionTokens {
            raw: serde_json::to_string(top).unwrap_or_default(),
        });
    }
    let floor = found.values().fold(f64::INFINITY, |a, &b| a.min(b)) - 10.0;
    let logits: BTreeMap<OptionLabel, f64> = labels
        .iter()
        .map(|l| (*l, found.get(l).copied().unwrap_or(floor)))
        .collect();
    Ok(OptionScores::from_logits(logits)?)
}

/// [`Scorer`] backed by the wire adapter; the drop-in external
/// counterpart of the mock scorer.
pub struct ExternalScorer<T: WireTransport> {
    pub transport: T,
    pub cfg: AdapterConfig,
}

impl<T: WireTransport> Scorer for ExternalScorer<T> {
    fn score(&self, instance: &McqaInstance) -> Result<OptionScores, ScoreError> {
        llm_adapter_score(instance, &self.transport, &self.cfg)
            .map_err(|e| ScoreError::Backend(e.to_string()))
    }
}

/// Drive candidate generation through the external backend: render the
/// prompt bundle, post it, parse the returned path blocks.
pub fn generate_external(
    scene: &Scene,
    generator: &GeneratorConfig,
    transport: &dyn WireTransport,
    cfg: &AdapterConfig,
) -> Result<CandidateSet, AdapterError> {
    let bundle = build_generation_prompt(scene, generator);
    let messages: Vec<Value> = bundle
        .messages()
        .into_iter()
        .map(|m| {
            json!({
                "role": match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                },
                "content": m.content,
            })
        })
        .collect();
    let body = json!({
        "model": cfg.model_name,
        "messages": messages,
        "max_tokens": 1536,
    });
    let response = post_with_retries(transport, cfg, &body)?;
    let text = response
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| AdapterError::Malformed("missing choices[0].message.content".into()))?;
    let parsed = parse_generated_paths(text)?;
    Ok(CandidateSet::new(scene.clone(), parsed.paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use calpath_core::{build_mcqa, generate_candidates, Goal};

    fn two_option_instance() -> McqaInstance {
        let scene = Scene::open_road(5.0, Goal::GoStraight);
        let set = generate_candidates(
            &scene,
            &GeneratorConfig {
                k: 2,
                ..Default::default()
            },
        )
        .unwrap();
        build_mcqa(&set)
    }

    fn response_with_tokens(tokens: &[(&str, f64)]) -> Value {
        let top: Vec<Value> = tokens
            .iter()
            .map(|(t, lp)| json!({"token": t, "logprob": lp}))
            .collect();
        json!({
            "choices": [{
                "logprobs": {"content": [{"token": tokens[0].0, "logprob": tokens[0].1, "top_logprobs": top}]}
            }]
        })
    }

    #[test]
    fn extracts_two_option_probabilities() {
        let instance = two_option_instance();
        let transport = ReplayTransport::single(response_with_tokens(&[
            ("A", -0.2),
            ("B", -1.8),
            (".", -3.0),
        ]));
        let scores = llm_adapter_score(&instance, &transport, &AdapterConfig::default()).unwrap();
        let a = OptionLabel::from_char('A').unwrap();
        let b = OptionLabel::from_char('B').unwrap();
        assert!((scores.probabilities[&a] - 0.832).abs() < 1e-3);
        assert!((scores.probabilities[&b] - 0.168).abs() < 1e-3);
    }

    #[test]
    fn whitespace_tokens_match_and_punctuated_do_not() {
        let instance = two_option_instance();
        let transport = ReplayTransport::single(response_with_tokens(&[
            (" A", -0.5),
            ("A.", -0.1), // not a bare letter; must be ignored
            ("B\n", -1.5),
        ]));
        let scores = llm_adapter_score(&instance, &transport, &AdapterConfig::default()).unwrap();
        let a = OptionLabel::from_char('A').unwrap();
        assert!((scores.logits[&a] - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn missing_letter_takes_the_floor_and_still_normalizes() {
        let scene = Scene::open_road(5.0, Goal::GoStraight);
        let set = generate_candidates(
            &scene,
            &GeneratorConfig {
                k: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let instance = build_mcqa(&set);
        let transport = ReplayTransport::single(response_with_tokens(&[("A", -0.3), ("B", -1.2)]));
        let scores = llm_adapter_score(&instance, &transport, &AdapterConfig::default()).unwrap();
        let c = OptionLabel::from_char('C').unwrap();
        assert!((scores.logits[&c] - (-11.2)).abs() < 1e-12);
        let sum: f64 = scores.probabilities.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_option_tokens_is_an_error_with_the_raw_dump() {
        let instance = two_option_instance();
        let transport =
            ReplayTransport::single(response_with_tokens(&[("yes", -0.1), ("no", -2.0)]));
        let err = llm_adapter_score(&instance, &transport, &AdapterConfig::default()).unwrap_err();
        match err {
            AdapterError::NoOptionTokens { raw } => assert!(raw.contains("yes")),
            other => panic!("expected NoOptionTokens, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_tokens_keep_the_first_occurrence() {
        let instance = two_option_instance();
        let transport = ReplayTransport::single(response_with_tokens(&[
            ("A", -0.4),
            ("A", -2.9),
            ("B", -1.0),
        ]));
        let scores = llm_adapter_score(&instance, &transport, &AdapterConfig::default()).unwrap();
        let a = OptionLabel::from_char('A').unwrap();
        assert!((scores.logits[&a] - (-0.4)).abs() < 1e-12);
    }

    #[test]
    fn transient_failures_retry_then_succeed() {
        let instance = two_option_instance();
        let transport = ReplayTransport::new(vec![
            Err(TransportError::Io("connection reset".into())),
            Err(TransportError::Http {
                status: 503,
                body: "unavailable".into(),
            }),
            Ok(response_with_tokens(&[("A", -0.2), ("B", -1.8)])),
        ]);
        let cfg = AdapterConfig {
            backoff: std::time::Duration::from_millis(1),
            ..Default::default()
        };
        assert!(llm_adapter_score(&instance, &transport, &cfg).is_ok());
    }

    #[test]
    fn retries_exhaust_into_a_transport_error() {
        let instance = two_option_instance();
        let transport = ReplayTransport::new(vec![]);
        let cfg = AdapterConfig {
            max_retries: 2,
            backoff: std::time::Duration::from_millis(1),
            ..Default::default()
        };
        let err = llm_adapter_score(&instance, &transport, &cfg).unwrap_err();
        match err {
            AdapterError::Transport { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("expected Transport, got {other:?}"),
        }
    }

    #[test]
    fn non_transient_http_errors_fail_fast() {
        let instance = two_option_instance();
        let transport = ReplayTransport::new(vec![Err(TransportError::Http {
            status: 401,
            body: "unauthorized".into(),
        })]);
        let cfg = AdapterConfig {
            backoff: std::time::Duration::from_millis(1),
            ..Default::default()
        };
        let err = llm_adapter_score(&instance, &transport, &cfg).unwrap_err();
        match err {
            AdapterError::Transport { attempts, .. } => assert_eq!(attempts, 1),
            other => panic!("expected Transport, got {other:?}"),
        }
    }

    #[test]
    fn replayed_transcripts_are_pure() {
        let instance = two_option_instance();
        let response = response_with_tokens(&[("A", -0.7), ("B", -0.9)]);
        let score = |response: Value| {
            let transport = ReplayTransport::single(response);
            llm_adapter_score(&instance, &transport, &AdapterConfig::default()).unwrap()
        };
        assert_eq!(score(response.clone()), score(response));
    }

    #[test]
    fn recording_transport_captures_exchanges() {
        let inner = ReplayTransport::single(response_with_tokens(&[("A", -0.2), ("B", -1.0)]));
        let recorder = RecordingTransport::new(inner);
        let instance = two_option_instance();
        llm_adapter_score(&instance, &recorder, &AdapterConfig::default()).unwrap();
        let records = recorder.take_records();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].request["max_tokens"], json!(1));
        assert!(records[0].request["top_logprobs"].as_u64().unwrap() >= 4);
    }

    #[test]
    fn mock_and_external_scorers_are_interchangeable() {
        // The same logits, delivered through either backend, produce
        // the same probabilities behind the shared contract.
        use calpath_core::{mock_score, MockScorerConfig, SafetyOracle};
        let instance = two_option_instance();
        let mocked = mock_score(
            &instance,
            &SafetyOracle::default(),
            &MockScorerConfig::default(),
            31,
        )
        .unwrap();
        let tokens: Vec<(String, f64)> = mocked
            .logits
            .iter()
            .map(|(l, v)| (l.to_string(), *v))
            .collect();
        let token_refs: Vec<(&str, f64)> = tokens.iter().map(|(t, v)| (t.as_str(), *v)).collect();
        let external = ExternalScorer {
            transport: ReplayTransport::single(response_with_tokens(&token_refs)),
            cfg: AdapterConfig::default(),
        };
        use calpath_core::Scorer;
        let scored = external.score(&instance).unwrap();
        assert_eq!(scored.probabilities, mocked.probabilities);
    }

    #[test]
    fn external_generation_parses_backend_paths() {
        let scene = Scene::open_road(5.0, Goal::GoStraight);
        let content = calpath_core::generation::FEW_SHOT_ASSISTANT;
        let response = json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        });
        let transport = ReplayTransport::single(response);
        let set = generate_external(
            &scene,
            &GeneratorConfig::default(),
            &transport,
            &AdapterConfig::default(),
        )
        .unwrap();
        assert_eq!(set.candidates.len(), 4);
        assert_eq!(set.candidates[0].label, OptionLabel::from_char('A'));
    }

    #[test]
    fn external_generation_surfaces_transport_cause() {
        let scene = Scene::open_road(5.0, Goal::GoStraight);
        let transport = ReplayTransport::new(vec![Err(TransportError::Http {
            status: 400,
            body: "bad request".into(),
        })]);
        let err = generate_external(
            &scene,
            &GeneratorConfig::default(),
            &transport,
            &AdapterConfig::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("400"));
    }
}
