//! Line-delimited JSON scoring protocol.
//!
//! Requests, one per line:
//!
//! ```text
//! {"request_id": 7, "instance_id": "img1#0", "completion": "<think>...</think> <answer>...</answer>"}
//! ```
//!
//! Responses echo `request_id` and appear in request order:
//!
//! ```text
//! {"request_id": 7, "r_fmt": 0.6, "r_ent": 1.375, "r_rel": 0.3, "r_total": 2.275}
//! {"request_id": 8, "error": "unknown_instance"}
//! {"request_id": null, "error": "malformed_request"}
//! ```
//!
//! The line `{"shutdown": true}` ends the session; so does end of input.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{GroundingInstance, RewardBreakdown, RewardConfig};
use crate::reward::total_reward;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub request_id: Value,
    pub instance_id: String,
    pub completion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreResponse {
    pub request_id: Value,
    pub r_fmt: f64,
    pub r_ent: f64,
    pub r_rel: f64,
    pub r_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorResponse {
    pub request_id: Value,
    pub error: &'static str,
}

pub const UNKNOWN_INSTANCE: &str = "unknown_instance";
pub const MALFORMED_REQUEST: &str = "malformed_request";

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Line(String),
    Shutdown,
    /// Blank input line; nothing is written.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ServeStats {
    pub requests: usize,
    pub errors: usize,
    pub shutdown_requested: bool,
}

/// Reward scoring over a fixed, id-indexed set of instances.
#[derive(Debug, Clone)]
pub struct ScoringService {
    instances: HashMap<String, GroundingInstance>,
    config: RewardConfig,
}

impl ScoringService {
    pub fn new(instances: impl IntoIterator<Item = GroundingInstance>, config: RewardConfig) -> Self {
        Self {
            instances: instances
                .into_iter()
                .map(|i| (i.id().to_string(), i))
                .collect(),
            config,
        }
    }

    pub fn config(&self) -> &RewardConfig {
        &self.config
    }

    pub fn instance(&self, id: &str) -> Option<&GroundingInstance> {
        self.instances.get(id)
    }

    pub fn score(&self, instance_id: &str, completion: &str) -> Option<RewardBreakdown> {
        self.instance(instance_id)
            .map(|inst| total_reward(completion, inst, &self.config))
    }

    fn is_shutdown(value: &Value) -> bool {
        value
            .as_object()
            .is_some_and(|o| o.len() == 1 && o.get("shutdown") == Some(&Value::Bool(true)))
    }

    pub fn handle_line(&self, line: &str) -> Reply {
        if line.trim().is_empty() {
            return Reply::Skip;
        }
        let error = |request_id: Value, error| {
            Reply::Line(serde_json::to_string(&ErrorResponse { request_id, error }).expect("serializable"))
        };
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(_) => return error(Value::Null, MALFORMED_REQUEST),
        };
        if Self::is_shutdown(&value) {
            return Reply::Shutdown;
        }
        let request: ScoreRequest = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(_) => return error(Value::Null, MALFORMED_REQUEST),
        };
        match self.score(&request.instance_id, &request.completion) {
            Some(b) => Reply::Line(
                serde_json::to_string(&ScoreResponse {
                    request_id: request.request_id,
                    r_fmt: b.r_fmt,
                    r_ent: b.r_ent,
                    r_rel: b.r_rel,
                    r_total: b.r_total,
                })
                .expect("serializable"),
            ),
            None => error(request.request_id, UNKNOWN_INSTANCE),
        }
    }

    /// Answers requests until shutdown or end of input, flushing after every
    /// response so callers can pipeline.
    pub fn serve<R: BufRead, W: Write>(&self, input: R, mut output: W) -> io::Result<ServeStats> {
        let mut stats = ServeStats::default();
        for line in input.lines() {
            match self.handle_line(&line?) {
                Reply::Skip => {}
                Reply::Shutdown => {
                    stats.shutdown_requested = true;
                    break;
                }
                Reply::Line(out) => {
                    stats.requests += 1;
                    if out.contains("\"error\"") {
                        stats.errors += 1;
                    }
                    writeln!(output, "{out}")?;
                    output.flush()?;
                }
            }
        }
        Ok(stats)
    }
}
