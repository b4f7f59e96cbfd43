//! Out-of-process strategies: one JSON document per line on the plugin's
//! stdin (requests) and stdout (responses). Stderr is passed through.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{RegistryError, StrategyKind, CONTRACT_VERSION};

pub const PAYLOAD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginRequest {
    pub request_id: String,
    pub operation: String,
    pub payload: Value,
    pub payload_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginResponse {
    pub request_id: String,
    pub ok: bool,
    #[serde(default)]
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub kind: StrategyKind,
    pub contract_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

pub struct PluginProcess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    pub handshake: Handshake,
}

impl PluginProcess {
    /// Starts `path` and performs the handshake.
    pub fn spawn(path: &Path, timeout: Duration) -> Result<Self, RegistryError> {
        let failed = |m: String| RegistryError::HandshakeFailed(m);
        let mut child = Command::new(path)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| failed(format!("cannot start {}: {e}", path.display())))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut process = Self {
            child,
            stdin,
            lines: rx,
            next_id: 0,
            handshake: Handshake {
                kind: StrategyKind::Clustering,
                contract_version: 0,
                dim: None,
            },
        };
        let payload = serde_json::json!({ "contract_version": CONTRACT_VERSION });
        let reply = process.call("handshake", payload, timeout).map_err(|e| match e {
            RegistryError::PluginTimeout(_) => failed("no handshake reply before timeout".into()),
            e => failed(e.to_string()),
        })?;
        process.handshake =
            serde_json::from_value(reply).map_err(|e| failed(format!("malformed handshake payload: {e}")))?;
        Ok(process)
    }

    /// Sends one request and waits for its response.
    pub fn call(&mut self, operation: &str, payload: Value, timeout: Duration) -> Result<Value, RegistryError> {
        self.next_id += 1;
        let request = PluginRequest {
            request_id: self.next_id.to_string(),
            operation: operation.to_string(),
            payload,
            payload_version: PAYLOAD_VERSION,
        };
        let mut line = serde_json::to_vec(&request).expect("request serializes");
        line.push(b'\n');
        self.stdin
            .write_all(&line)
            .and_then(|_| self.stdin.flush())
            .map_err(|e| RegistryError::PluginExited(format!("write failed: {e}")))?;

        let deadline = Instant::now() + timeout;
        let raw = loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(Ok(l)) if l.trim().is_empty() => continue,
                Ok(Ok(l)) => break l,
                Ok(Err(e)) => return Err(RegistryError::PluginExited(format!("read failed: {e}"))),
                Err(RecvTimeoutError::Timeout) => {
                    self.kill();
                    return Err(RegistryError::PluginTimeout(timeout));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(RegistryError::PluginExited("stdout closed".into()));
                }
            }
        };
        let response: PluginResponse = serde_json::from_str(&raw)
            .map_err(|e| RegistryError::Protocol(format!("malformed response line: {e}")))?;
        if response.request_id != request.request_id {
            return Err(RegistryError::Protocol(format!(
                "response id {} does not match request id {}",
                response.request_id, request.request_id
            )));
        }
        if !response.ok {
            return Err(RegistryError::StrategyFailed(response.error.unwrap_or_else(|| "unspecified error".into())));
        }
        Ok(response.payload)
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for PluginProcess {
    fn drop(&mut self) {
        self.kill();
    }
}

/// Runs a plugin main loop over stdin/stdout. `handler` gets
/// `(operation, payload)` for every non-handshake request.
pub fn serve_plugin<F>(handshake: Handshake, mut handler: F) -> std::io::Result<()>
where
    F: FnMut(&str, Value) -> Result<Value, String>,
{
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<PluginRequest>(&line) {
            Err(e) => PluginResponse {
                request_id: String::new(),
                ok: false,
                payload: Value::Null,
                error: Some(format!("malformed request: {e}")),
            },
            Ok(req) => {
                let result = if req.operation == "handshake" {
                    Ok(serde_json::to_value(&handshake).expect("handshake serializes"))
                } else {
                    handler(&req.operation, req.payload)
                };
                match result {
                    Ok(payload) => PluginResponse {
                        request_id: req.request_id,
                        ok: true,
                        payload,
                        error: None,
                    },
                    Err(e) => PluginResponse {
                        request_id: req.request_id,
                        ok: false,
                        payload: Value::Null,
                        error: Some(e),
                    },
                }
            }
        };
        serde_json::to_writer(&mut stdout, &response)?;
        stdout.write_all(b"\n")?;
        stdout.flush()?;
    }
    Ok(())
}
