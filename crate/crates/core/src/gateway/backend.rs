use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::types::InferenceRequest;

/// One manifest line: an image reference and where to read it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_ref: String,
    pub path: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("backend could not start: {0}")]
    Spawn(String),
    #[error("backend exited with {status}: {stderr}")]
    Exit { status: String, stderr: String },
    #[error("backend failed: {0}")]
    Failed(String),
}

/// Anything that turns a shard manifest into a bundle directory.
pub trait InferenceBackend: Send + Sync {
    fn name(&self) -> String;

    /// Process the manifest at `manifest`, writing a bundle into `out`.
    /// On error the caller discards whatever is in `out`.
    fn run_shard(&self, manifest: &Path, request: &InferenceRequest, out: &Path) -> Result<(), BackendError>;
}

/// External process speaking the sidecar contract:
/// `<cmd> --manifest <path> --tasks <list> --ethnicity-model four|seven --out <dir>`.
#[derive(Debug, Clone)]
pub struct SidecarBackend {
    program: PathBuf,
    args: Vec<String>,
}

impl SidecarBackend {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        SidecarBackend {
            program: program.into(),
            args: Vec::new(),
        }
    }

    /// Parse a whitespace-separated command line such as `python -m sidecar --device cpu`.
    pub fn from_command_line(cmd: &str) -> Option<Self> {
        let mut parts = cmd.split_whitespace();
        let program = parts.next()?;
        Some(SidecarBackend {
            program: program.into(),
            args: parts.map(str::to_string).collect(),
        })
    }

    pub fn arg(mut self, arg: impl Into<String>) -> Self {
        self.args.push(arg.into());
        self
    }
}

impl InferenceBackend for SidecarBackend {
    fn name(&self) -> String {
        format!("sidecar:{}", self.program.display())
    }

    fn run_shard(&self, manifest: &Path, request: &InferenceRequest, out: &Path) -> Result<(), BackendError> {
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg("--manifest")
            .arg(manifest)
            .arg("--tasks")
            .arg(request.tasks.to_string())
            .arg("--ethnicity-model")
            .arg(request.ethnicity_model.cli_name())
            .arg("--out")
            .arg(out)
            .output()
            .map_err(|e| BackendError::Spawn(format!("{}: {e}", self.program.display())))?;
        if output.status.success() {
            Ok(())
        } else {
            Err(BackendError::Exit {
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            })
        }
    }
}
