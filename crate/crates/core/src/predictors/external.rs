//! Bridge to out-of-process predictors.
//!
//! Protocol: newline-delimited JSON over the child's stdin/stdout, one
//! request per scenario, one response per request, in order. The request
//! carries the full world-frame scenario; normalization is the external
//! model's own business.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::PredictError;
use crate::geometry::Point2;
use crate::metrics::PredictionSet;
use crate::scene::{Scenario, Trajectory, FUTURE_LEN};

/// Default per-request timeout.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictRequest {
    pub id: String,
    pub dt: f64,
    pub history: Vec<Point2>,
    pub agents: Vec<Vec<Point2>>,
    pub lanes: Vec<Vec<Point2>>,
    pub drivable: Vec<Vec<Point2>>,
}

impl PredictRequest {
    pub fn from_scenario(scn: &Scenario) -> Self {
        Self {
            id: scn.id.clone(),
            dt: scn.dt(),
            history: scn.history.points.clone(),
            agents: scn.agents.iter().map(|t| t.points.clone()).collect(),
            lanes: scn
                .scene
                .lanes
                .iter()
                .map(|l| l.points().to_vec())
                .collect(),
            drivable: scn
                .scene
                .drivable
                .iter()
                .map(|d| d.points.clone())
                .collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictResponse {
    pub id: String,
    pub modes: Vec<Vec<Point2>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

/// One child process; requests are serialized through an internal lock, so a
/// shared reference can be used from several threads.
pub struct ExternalPredictor {
    process: Mutex<Process>,
    timeout: Duration,
}

impl ExternalPredictor {
    pub fn spawn(command: &str) -> Result<Self, PredictError> {
        Self::spawn_with_timeout(command, DEFAULT_TIMEOUT)
    }

    pub fn spawn_with_timeout(command: &str, timeout: Duration) -> Result<Self, PredictError> {
        let mut parts = command.split_whitespace();
        let program = parts.next().ok_or(PredictError::MissingCommand)?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(PredictError::Spawn)?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        Ok(Self {
            process: Mutex::new(Process {
                child,
                stdin,
                lines: rx,
            }),
            timeout,
        })
    }

    pub fn predict(&self, scn: &Scenario) -> Result<PredictionSet, PredictError> {
        let request = PredictRequest::from_scenario(scn);
        let line = serde_json::to_string(&request)
            .map_err(|e| PredictError::Protocol(format!("request encoding: {e}")))?;

        let mut proc = self.process.lock().expect("predictor lock");
        if proc.stdin.write_all(line.as_bytes()).is_err()
            || proc.stdin.write_all(b"\n").is_err()
            || proc.stdin.flush().is_err()
        {
            return Err(PredictError::ProcessExited);
        }

        let reply = match proc.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(PredictError::Protocol(format!("read failure: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(PredictError::Timeout(self.timeout.as_secs_f64()))
            }
            Err(RecvTimeoutError::Disconnected) => return Err(PredictError::ProcessExited),
        };
        drop(proc);

        let response: PredictResponse = serde_json::from_str(&reply)
            .map_err(|e| PredictError::Protocol(format!("malformed response: {e}")))?;
        if response.id != request.id {
            return Err(PredictError::Protocol(format!(
                "response id {:?} does not match request id {:?}",
                response.id, request.id
            )));
        }
        if response.modes.is_empty() {
            return Err(PredictError::Protocol("response has no modes".into()));
        }
        for (i, mode) in response.modes.iter().enumerate() {
            if mode.len() != FUTURE_LEN {
                return Err(PredictError::Protocol(format!(
                    "mode {i} has {} points, expected {FUTURE_LEN}",
                    mode.len()
                )));
            }
        }
        let ps = PredictionSet {
            modes: response
                .modes
                .into_iter()
                .map(|pts| Trajectory::new(pts, scn.dt()))
                .collect(),
            probabilities: response.probabilities,
        };
        ps.validate()?;
        Ok(ps)
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        if let Ok(mut proc) = self.process.lock() {
            let _ = proc.child.kill();
            let _ = proc.child.wait();
        }
    }
}
