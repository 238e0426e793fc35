//! File-based bridge to an external segmenter process.
//!
//! For every call a fresh workspace directory is created (under
//! `PARTPROMPT_TMPDIR` when set) holding `request.json`:
//!
//! ```json
//! {"feature_map": "...", "image": null, "prompts": {...}, "respond_to": "response.pgm"}
//! ```
//!
//! The command is run with the request path appended as its last argument and
//! the workspace as working directory. Relative paths in the request resolve
//! against the workspace. The sidecar must write a grid-resolution P5 mask to
//! `respond_to` and exit 0. Successful workspaces are removed; failed ones are
//! kept and their location is reported in the diagnostics.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::Segmenter;
use crate::error::{Error, Result};
use crate::feature::{BinaryMask, FeatureMap};
use crate::io;
use crate::prompt::PromptSet;

pub const TMPDIR_ENV: &str = "PARTPROMPT_TMPDIR";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
const RESPONSE_FILE: &str = "response.pgm";
const REQUEST_FILE: &str = "request.json";
const FEATURE_FILE: &str = "target.npy";
const DIAGNOSTIC_LIMIT: usize = 8 * 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRequest {
    pub feature_map: PathBuf,
    pub image: Option<PathBuf>,
    pub prompts: PromptSet,
    /// Expected mask size (grid height, width).
    pub grid: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentResponse {
    pub mask: BinaryMask,
    pub status: i32,
    pub diagnostics: String,
}

#[derive(Serialize)]
struct RequestDoc<'a> {
    feature_map: String,
    image: Option<String>,
    prompts: &'a PromptSet,
    respond_to: &'a str,
}

/// Serialized `request.json` payload (pretty, newline-terminated).
pub fn request_payload(request: &SegmentRequest) -> String {
    let doc = RequestDoc {
        feature_map: request.feature_map.to_string_lossy().into_owned(),
        image: request
            .image
            .as_ref()
            .map(|p| p.to_string_lossy().into_owned()),
        prompts: &request.prompts,
        respond_to: RESPONSE_FILE,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("request serializes");
    out.push('\n');
    out
}

fn workspace() -> Result<tempfile::TempDir> {
    let mut builder = tempfile::Builder::new();
    builder.prefix("partprompt-");
    match std::env::var_os(TMPDIR_ENV) {
        Some(dir) => builder.tempdir_in(dir),
        None => builder.tempdir(),
    }
    .map_err(|e| Error::io("creating sidecar workspace", e))
}

fn truncate(mut text: String) -> String {
    if text.len() > DIAGNOSTIC_LIMIT {
        let mut cut = DIAGNOSTIC_LIMIT;
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        text.truncate(cut);
        text.push_str("\n[truncated]");
    }
    text
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

fn run(
    dir: &Path,
    request: &SegmentRequest,
    command: &[String],
    timeout: Duration,
) -> Result<SegmentResponse> {
    let (program, args) = command
        .split_first()
        .ok_or_else(|| Error::InvalidInput("empty sidecar command".into()))?;
    let request_path = dir.join(REQUEST_FILE);
    std::fs::write(&request_path, request_payload(request))
        .map_err(|e| Error::io(format!("writing {}", request_path.display()), e))?;

    let mut child = Command::new(program)
        .args(args)
        .arg(&request_path)
        .current_dir(dir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::io(format!("spawning sidecar {program:?}"), e))?;
    let stdout = drain(child.stdout.take());
    let stderr = drain(child.stderr.take());

    let started = Instant::now();
    let status = loop {
        match child
            .try_wait()
            .map_err(|e| Error::io("waiting for sidecar", e))?
        {
            Some(status) => break Some(status),
            None if started.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            None => thread::sleep(Duration::from_millis(5)),
        }
    };
    let diagnostics = {
        let out = stdout.join().unwrap_or_default();
        let err = stderr.join().unwrap_or_default();
        truncate(format!("{}{}", err, out).trim_end().to_string())
    };

    let Some(status) = status else {
        return Err(Error::Timeout {
            seconds: timeout.as_secs_f64(),
            diagnostics,
        });
    };
    if !status.success() {
        return Err(Error::SidecarFailure {
            status: status.to_string(),
            diagnostics,
        });
    }
    let response_path = dir.join(RESPONSE_FILE);
    let bytes = std::fs::read(&response_path).map_err(|e| Error::Protocol {
        message: format!("no response mask at {}: {e}", response_path.display()),
        diagnostics: diagnostics.clone(),
    })?;
    let mask = io::decode_mask(&bytes).map_err(|e| Error::Protocol {
        message: format!("malformed response mask: {e}"),
        diagnostics: diagnostics.clone(),
    })?;
    if (mask.height(), mask.width()) != request.grid {
        return Err(Error::Protocol {
            message: format!(
                "response mask is {}x{}, expected {}x{}",
                mask.height(),
                mask.width(),
                request.grid.0,
                request.grid.1
            ),
            diagnostics,
        });
    }
    Ok(SegmentResponse {
        mask,
        status: status.code().unwrap_or(0),
        diagnostics,
    })
}

fn with_kept_workspace(err: Error, dir: tempfile::TempDir) -> Error {
    let kept = dir.keep();
    let note = format!("[workspace kept at {}]", kept.display());
    match err {
        Error::Protocol {
            message,
            diagnostics,
        } => Error::Protocol {
            message,
            diagnostics: format!("{diagnostics}\n{note}"),
        },
        Error::Timeout {
            seconds,
            diagnostics,
        } => Error::Timeout {
            seconds,
            diagnostics: format!("{diagnostics}\n{note}"),
        },
        Error::SidecarFailure {
            status,
            diagnostics,
        } => Error::SidecarFailure {
            status,
            diagnostics: format!("{diagnostics}\n{note}"),
        },
        other => other,
    }
}

/// Runs one request through the sidecar `command`.
pub fn external_segment(
    request: &SegmentRequest,
    command: &[String],
    timeout: Duration,
) -> Result<SegmentResponse> {
    let dir = workspace()?;
    match run(dir.path(), request, command, timeout) {
        Ok(resp) => Ok(resp),
        Err(e) => Err(with_kept_workspace(e, dir)),
    }
}

/// [`Segmenter`] backed by a sidecar process. The target feature map is
/// written into each workspace as `target.npy`.
#[derive(Debug, Clone)]
pub struct SidecarSegmenter {
    pub command: Vec<String>,
    pub timeout: Duration,
    pub image: Option<PathBuf>,
}

impl SidecarSegmenter {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            timeout: DEFAULT_TIMEOUT,
            image: None,
        }
    }
}

impl Segmenter for SidecarSegmenter {
    fn segment(&self, target: &FeatureMap, prompts: &PromptSet) -> Result<BinaryMask> {
        let dir = workspace()?;
        let result = io::write_feature_map(target, dir.path().join(FEATURE_FILE)).and_then(|_| {
            let request = SegmentRequest {
                feature_map: PathBuf::from(FEATURE_FILE),
                image: self.image.clone(),
                prompts: prompts.clone(),
                grid: (target.height(), target.width()),
            };
            run(dir.path(), &request, &self.command, self.timeout)
        });
        match result {
            Ok(resp) => Ok(resp.mask),
            Err(e) => Err(with_kept_workspace(e, dir)),
        }
    }
}
