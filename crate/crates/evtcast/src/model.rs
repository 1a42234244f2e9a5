//! Versioned JSON model file.
//!
//! The file holds the trained pipeline: threshold `u`, the forecast horizon
//! (the response lag), the fixed shape or exponential flag, both coefficient
//! maps and the covariate transforms. Floats are written in shortest
//! round-trip form, so a loaded model reproduces predictions bit for bit.

use std::path::Path;

use evtcast_core::forecast::Pipeline;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: not a model file: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("{path}: model schema version {found}, this build reads version {SCHEMA_VERSION}")]
    Version { path: String, found: u32 },
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema_version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    generator: String,
    pipeline: Pipeline,
}

pub fn to_json(pipeline: &Pipeline) -> String {
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        generator: format!("evtcast {}", env!("CARGO_PKG_VERSION")),
        pipeline: pipeline.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("pipeline serialises");
    s.push('\n');
    s
}

pub fn from_json(text: &str, path: &str) -> Result<Pipeline, ModelError> {
    let header: Header = serde_json::from_str(text).map_err(|source| ModelError::Parse { path: path.into(), source })?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(ModelError::Version { path: path.into(), found: header.schema_version });
    }
    let file: ModelFile = serde_json::from_str(text).map_err(|source| ModelError::Parse { path: path.into(), source })?;
    Ok(file.pipeline)
}

pub fn save(path: &Path, pipeline: &Pipeline) -> Result<(), ModelError> {
    let io = |source| ModelError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, to_json(pipeline)).map_err(io)
}

pub fn load(path: &Path) -> Result<Pipeline, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    from_json(&text, &path.display().to_string())
}
