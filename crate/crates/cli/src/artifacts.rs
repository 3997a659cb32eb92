//! All-or-nothing artifact output: files are staged under temporary names in
//! the target directory and renamed only once every artifact is written.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Default)]
pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Run(format!("{}: {e}", path.display()))
}

fn temp_name(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".tmp-{name}"))
}

impl Staged {
    pub fn add(&mut self, path: PathBuf, bytes: impl Into<Vec<u8>>) {
        self.files.push((path, bytes.into()));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Writes every file; on failure, removes whatever was staged.
    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut temps = Vec::new();
        let result = (|| {
            for (path, bytes) in &self.files {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
                }
                let tmp = temp_name(path);
                temps.push(tmp.clone());
                fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
            }
            for (path, _) in &self.files {
                fs::rename(temp_name(path), path).map_err(|e| io_err(path, e))?;
            }
            Ok(())
        })();
        if result.is_err() {
            for t in &temps {
                let _ = fs::remove_file(t);
            }
        }
        result.map(|_| self.files.into_iter().map(|(p, _)| p).collect())
    }
}

/// A staged path for a file that a library routine must write itself
/// (for example a gzip corpus); call [`finish_external`] once it is complete.
pub fn external_temp(path: &Path) -> PathBuf {
    temp_name(path)
}

pub fn finish_external(path: &Path) -> Result<(), CliError> {
    fs::rename(temp_name(path), path).map_err(|e| io_err(path, e))
}

pub fn discard_external(path: &Path) {
    let _ = fs::remove_file(temp_name(path));
}
