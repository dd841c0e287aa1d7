//! Encoder running in a child process, spoken to over stdin/stdout.

use std::io::{BufReader, BufWriter};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::protocol::{read_response, write_request, EncodeRequest};

/// How concurrent encode calls map onto child processes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChildMode {
    /// One child; requests are serialized.
    #[default]
    Shared,
    /// Idle children are reused; a new one is spawned when all are busy.
    PerWorker,
}

struct ChildProc {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl ChildProc {
    fn spawn(argv: &[String]) -> Result<Self> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| Error::Config("external encoder command is empty".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Backend(format!("cannot start external encoder '{program}': {e}")))?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ChildProc { child, stdin, stdout })
    }

    fn roundtrip(&mut self, req: &EncodeRequest) -> Result<(usize, Vec<f32>)> {
        write_request(&mut self.stdin, req)
            .map_err(|e| Error::Backend(format!("writing request to external encoder: {e}")))?;
        let resp = read_response(&mut self.stdout)
            .map_err(|e| Error::Backend(format!("reading response from external encoder: {e}")))?;
        if resp.frames != req.frames {
            return Err(Error::Contract(format!(
                "external encoder returned {} rows for {} frames",
                resp.frames, req.frames
            )));
        }
        Ok((resp.dim, resp.features))
    }
}

impl Drop for ChildProc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalEncoder {
    argv: Vec<String>,
    mode: ChildMode,
    idle: Mutex<Vec<ChildProc>>,
}

impl ExternalEncoder {
    pub fn new(argv: Vec<String>, mode: ChildMode) -> Result<Self> {
        if argv.is_empty() {
            return Err(Error::Config("external encoder command is empty".into()));
        }
        Ok(ExternalEncoder { argv, mode, idle: Mutex::new(Vec::new()) })
    }

    /// Sends one request and returns `(D, L·D features)`.
    pub fn encode(&self, req: &EncodeRequest) -> Result<(usize, Vec<f32>)> {
        match self.mode {
            ChildMode::Shared => {
                let mut guard = self.idle.lock().unwrap_or_else(|p| p.into_inner());
                if guard.is_empty() {
                    guard.push(ChildProc::spawn(&self.argv)?);
                }
                let result = guard[0].roundtrip(req);
                if result.is_err() {
                    // A failed exchange leaves the stream in an unknown state.
                    guard.clear();
                }
                result
            }
            ChildMode::PerWorker => {
                let taken = self.idle.lock().unwrap_or_else(|p| p.into_inner()).pop();
                let mut proc = match taken {
                    Some(p) => p,
                    None => ChildProc::spawn(&self.argv)?,
                };
                let result = proc.roundtrip(req);
                if result.is_ok() {
                    self.idle.lock().unwrap_or_else(|p| p.into_inner()).push(proc);
                }
                result
            }
        }
    }

    pub fn live_children(&self) -> usize {
        self.idle.lock().map(|g| g.len()).unwrap_or(0)
    }
}
