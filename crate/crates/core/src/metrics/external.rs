//! Adapter for metrics computed by an external program.
//!
//! The command is an argument vector in which the tokens `{ref}`, `{deg}` and
//! `{sr}` are replaced by the reference WAV path, the degraded WAV path and
//! the sample rate. No shell is involved. The last non-empty line of standard
//! output must parse as a real number. A non-zero exit status, a timeout or
//! unparseable output all surface as [`ExternalError`].

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{wav, AudioSignal};

#[derive(Error, Debug)]
pub enum ExternalError {
    #[error("empty command")]
    EmptyCommand,
    #[error("failed to spawn `{program}`: {source}")]
    Spawn {
        program: String,
        source: std::io::Error,
    },
    #[error("`{program}` timed out after {timeout:?}")]
    Timeout { program: String, timeout: Duration },
    #[error("`{program}` exited with {status}: {stderr}")]
    Failed {
        program: String,
        status: String,
        stderr: String,
    },
    #[error("could not parse a number from output {0:?}")]
    Unparseable(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("wav: {0}")]
    Wav(#[from] crate::signal::SignalError),
}

fn default_timeout() -> f64 {
    60.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalCommand {
    pub command: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

impl ExternalCommand {
    pub fn new<S: Into<String>>(command: impl IntoIterator<Item = S>) -> Self {
        Self {
            command: command.into_iter().map(Into::into).collect(),
            timeout_secs: default_timeout(),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout_secs = timeout.as_secs_f64();
        self
    }

    fn expand(&self, reference: &Path, deg: &Path, rate: u32) -> Vec<String> {
        self.command
            .iter()
            .map(|tok| {
                tok.replace("{ref}", &reference.to_string_lossy())
                    .replace("{deg}", &deg.to_string_lossy())
                    .replace("{sr}", &rate.to_string())
            })
            .collect()
    }

    /// Runs the command on two existing WAV files.
    pub fn run_on_files(&self, reference: &Path, deg: &Path, rate: u32) -> Result<f64, ExternalError> {
        let args = self.expand(reference, deg, rate);
        let (program, rest) = args.split_first().ok_or(ExternalError::EmptyCommand)?;
        let mut child = Command::new(program)
            .args(rest)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| ExternalError::Spawn {
                program: program.clone(),
                source,
            })?;

        // drain pipes on threads so a chatty tool cannot block on a full pipe
        let mut stdout = child.stdout.take().expect("piped");
        let mut stderr = child.stderr.take().expect("piped");
        let out_thread = std::thread::spawn(move || {
            let mut s = String::new();
            stdout.read_to_string(&mut s).map(|_| s)
        });
        let err_thread = std::thread::spawn(move || {
            let mut s = String::new();
            stderr.read_to_string(&mut s).map(|_| s)
        });

        let timeout = Duration::from_secs_f64(self.timeout_secs);
        let deadline = Instant::now() + timeout;
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                return Err(ExternalError::Timeout {
                    program: program.clone(),
                    timeout,
                });
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        let out = out_thread.join().expect("reader thread")?;
        let err = err_thread.join().expect("reader thread")?;
        if !status.success() {
            return Err(ExternalError::Failed {
                program: program.clone(),
                status: status.to_string(),
                stderr: err.trim().to_string(),
            });
        }
        parse_score(&out)
    }

    /// Writes the pair to temporary WAV files and runs the command on them.
    pub fn run(&self, deg: &AudioSignal, reference: &AudioSignal) -> Result<f64, ExternalError> {
        let dir = tempfile::tempdir()?;
        let ref_path = dir.path().join("ref.wav");
        let deg_path = dir.path().join("deg.wav");
        wav::write(&ref_path, reference)?;
        wav::write(&deg_path, deg)?;
        self.run_on_files(&ref_path, &deg_path, reference.sample_rate())
    }
}

/// Parses the last non-empty line of `output` as a real number.
pub fn parse_score(output: &str) -> Result<f64, ExternalError> {
    output
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .and_then(|l| l.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .ok_or_else(|| ExternalError::Unparseable(output.to_string()))
}
