//! Versioned JSON records for trained models.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! save/load cycle reproduces every parameter bit for bit.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    body: T,
}

pub fn save<T: Serialize>(format: &str, version: u32, body: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let env = Envelope {
        format: format.to_string(),
        version,
        body,
    };
    let text = serde_json::to_string(&env)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load<T: DeserializeOwned>(format: &str, version: u32, path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let env: Envelope<T> = serde_json::from_str(&text)?;
    if env.format != format {
        return Err(Error::Checkpoint(format!("expected a '{format}' record, found '{}'", env.format)));
    }
    if env.version != version {
        return Err(Error::Checkpoint(format!(
            "'{format}' version {} is not supported (expected {version})",
            env.version
        )));
    }
    Ok(env.body)
}
