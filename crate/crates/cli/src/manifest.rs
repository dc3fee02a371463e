//! `manifest.json`: per command, the inputs, flags and outputs of the last
//! run in an output directory, with SHA-256 content hashes. No timestamps,
//! so identical runs produce identical manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommandEntry {
    pub inputs: Vec<FileEntry>,
    pub flags: BTreeMap<String, serde_json::Value>,
    /// Relative to the output directory.
    pub outputs: Vec<FileEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub commands: BTreeMap<String, CommandEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Collects what one command read and wrote, then merges it into the
/// directory's manifest.
pub struct Recorder {
    out_dir: PathBuf,
    entry: CommandEntry,
}

impl Recorder {
    pub fn new(out_dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        Ok(Recorder {
            out_dir: out_dir.to_path_buf(),
            entry: CommandEntry::default(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.entry.inputs.push(FileEntry {
            path: path.display().to_string(),
            sha256: hash_file(path)?,
        });
        Ok(())
    }

    pub fn flag(&mut self, name: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.entry.flags.insert(name.to_string(), value);
    }

    /// Writes `contents` to `name` under the output directory.
    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let bytes = contents.as_ref();
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.entry.outputs.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    /// Records a file some other component wrote under the output directory.
    pub fn output(&mut self, name: &str) -> Result<(), CliError> {
        let sha256 = hash_file(&self.out_dir.join(name))?;
        self.entry.outputs.push(FileEntry {
            path: name.to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn finish(self, command: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(FILE_NAME);
        let mut manifest: Manifest = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(CliError::io(&path, e)),
        };
        manifest.commands.insert(command.to_string(), self.entry);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
