use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use super::{
    ExecRequest, ExecResponse, Handshake, Sandbox, SandboxError, PROTOCOL_VERSION,
};

/// Runs each batch in a fresh runner subprocess, so a crashed or hung guest
/// cannot leak into later batches. The wall-clock budget is enforced here by
/// killing the process.
#[derive(Debug, Clone)]
pub struct ProcessSandbox {
    program: PathBuf,
    args: Vec<String>,
    handshake_timeout: Duration,
    /// Added to the batch budget to cover process start-up and I/O.
    grace: Duration,
}

impl ProcessSandbox {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
            args: Vec::new(),
            handshake_timeout: Duration::from_secs(30),
            grace: Duration::from_millis(500),
        }
    }

    /// Extra arguments, e.g. the script path when `program` is an interpreter.
    pub fn with_args<S: Into<String>>(mut self, args: impl IntoIterator<Item = S>) -> Self {
        self.args = args.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_grace(mut self, grace: Duration) -> Self {
        self.grace = grace;
        self
    }

    fn spawn(&self) -> Result<Child, SandboxError> {
        Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(SandboxError::Spawn)
    }
}

struct Killer(Child);

impl Drop for Killer {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

impl Sandbox for ProcessSandbox {
    fn execute(&self, request: &ExecRequest) -> Result<ExecResponse, SandboxError> {
        let mut child = Killer(self.spawn()?);
        let stdout = child.0.stdout.take().expect("piped stdout");
        let mut stdin = child.0.stdin.take().expect("piped stdin");

        let (tx, rx) = mpsc::channel::<std::io::Result<String>>();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });

        let line = match rx.recv_timeout(self.handshake_timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(SandboxError::Protocol(format!("reading handshake: {e}"))),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                return Err(SandboxError::Protocol("no handshake from runner".into()))
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(SandboxError::Protocol("runner exited before handshake".into()))
            }
        };
        let hs: Handshake = serde_json::from_str(line.trim())
            .map_err(|e| SandboxError::Protocol(format!("bad handshake `{}`: {e}", line.trim())))?;
        if hs.protocol_version != PROTOCOL_VERSION {
            return Err(SandboxError::Protocol(format!(
                "runner speaks protocol {}, engine speaks {PROTOCOL_VERSION}",
                hs.protocol_version
            )));
        }

        let start = Instant::now();
        let mut payload = serde_json::to_string(request)?;
        payload.push('\n');
        if let Err(e) = stdin.write_all(payload.as_bytes()).and_then(|_| stdin.flush()) {
            return Ok(ExecResponse::crashed(&request.id, format!("writing request: {e}")));
        }
        drop(stdin);

        let budget = Duration::from_secs_f64(request.timeout_seconds) + self.grace;
        let answer = rx.recv_timeout(budget);
        let wall = start.elapsed().as_secs_f64();
        match answer {
            Ok(Ok(line)) => match serde_json::from_str::<ExecResponse>(line.trim()) {
                Ok(mut resp) => {
                    if resp.id != request.id {
                        return Err(SandboxError::Protocol(format!(
                            "response id {} does not match request {}",
                            resp.id, request.id
                        )));
                    }
                    if wall > request.timeout_seconds {
                        resp = ExecResponse::timeout(&request.id, wall);
                    }
                    Ok(resp)
                }
                Err(e) => Ok(ExecResponse::crashed(
                    &request.id,
                    format!("unreadable response: {e}"),
                )),
            },
            Ok(Err(e)) => Ok(ExecResponse::crashed(&request.id, format!("reading response: {e}"))),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                // dropping the guard kills the runner
                Ok(ExecResponse::timeout(&request.id, wall))
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => Ok(ExecResponse::crashed(
                &request.id,
                "runner exited without a response",
            )),
        }
    }
}
