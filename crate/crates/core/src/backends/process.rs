//! Sidecar process runner.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::protocol::{read_response, write_request};
use super::{Backend, BackendError, BackendKind, BackendRequest, BackendResponse};

pub const DEFAULT_TIMEOUT_S: u64 = 600;
pub const TIMEOUT_ENV: &str = "EVAL3D_BACKEND_TIMEOUT_S";

/// Timeout from `EVAL3D_BACKEND_TIMEOUT_S`, falling back to 600 s.
pub fn timeout_from_env() -> Duration {
    let secs = std::env::var(TIMEOUT_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok())
        .unwrap_or(DEFAULT_TIMEOUT_S);
    Duration::from_secs(secs)
}

/// How to launch a backend: the job directory is appended as the final
/// argument of `command`.
#[derive(Debug, Clone)]
pub struct ProcessSpec {
    pub command: Vec<String>,
    pub workdir: PathBuf,
    pub timeout: Duration,
}

fn stderr_tail(path: &Path) -> String {
    const TAIL: usize = 2048;
    let bytes = std::fs::read(path).unwrap_or_default();
    let start = bytes.len().saturating_sub(TAIL);
    String::from_utf8_lossy(&bytes[start..]).into_owned()
}

/// Creates a fresh `job-<uuid>` directory under `workdir`.
pub fn create_job_dir(workdir: &Path) -> Result<PathBuf, BackendError> {
    std::fs::create_dir_all(workdir)?;
    loop {
        let dir = workdir.join(format!("job-{}", uuid::Uuid::new_v4()));
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
}

/// Runs one job end to end and returns the parsed (unvalidated) response
/// along with the job directory that was used.
pub fn invoke_backend(
    spec: &ProcessSpec,
    req: &BackendRequest,
) -> Result<(BackendResponse, PathBuf), BackendError> {
    let program = spec
        .command
        .first()
        .ok_or_else(|| BackendError::Contract("empty backend command".into()))?;
    let dir = create_job_dir(&spec.workdir)?;
    write_request(&dir, req)?;

    let stderr_path = dir.join("stderr.log");
    let stderr = File::create(&stderr_path)?;
    let mut child = Command::new(program)
        .args(&spec.command[1..])
        .arg(&dir)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(stderr)
        .spawn()
        .map_err(|source| BackendError::Spawn {
            command: spec.command.join(" "),
            source,
        })?;

    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() >= spec.timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(BackendError::Timeout {
                secs: spec.timeout.as_secs(),
                stderr: stderr_tail(&stderr_path),
            });
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    if !status.success() {
        // prefer the backend's own error message when it wrote one
        if let Err(BackendError::Remote(msg)) = read_response(&dir, req.kind()) {
            return Err(BackendError::Remote(msg));
        }
        return Err(BackendError::Exit {
            status: status.to_string(),
            stderr: stderr_tail(&stderr_path),
        });
    }
    let (resp, _manifest) = read_response(&dir, req.kind())?;
    Ok((resp, dir))
}

/// A [`Backend`] backed by a sidecar executable. Jobs are serialized: at most
/// one is in flight per instance.
pub struct ProcessBackend {
    kind: BackendKind,
    spec: ProcessSpec,
    lock: Mutex<()>,
}

impl ProcessBackend {
    pub fn new(kind: BackendKind, spec: ProcessSpec) -> Self {
        Self {
            kind,
            spec,
            lock: Mutex::new(()),
        }
    }
}

impl Backend for ProcessBackend {
    fn kind(&self) -> BackendKind {
        self.kind
    }

    fn identity(&self) -> String {
        format!("process:{}", self.spec.command.join(" "))
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        invoke_backend(&self.spec, req).map(|(resp, _)| resp)
    }
}
