//! Staged output: files are written to a hidden directory under the output
//! root and moved into place only when the command succeeds.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

pub struct Staging {
    root: PathBuf,
    dir: PathBuf,
    committed: bool,
}

impl Staging {
    pub fn new(root: &Path, name: &str) -> Result<Self, CliError> {
        let dir = root.join(format!(".staging-{name}-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err)?;
        }
        fs::create_dir_all(&dir).map_err(io_err)?;
        Ok(Staging {
            root: root.to_path_buf(),
            dir,
            committed: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&self, file: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        fs::write(self.dir.join(file), contents).map_err(io_err)
    }

    /// Replace `<root>/<name>` with the staged directory.
    pub fn commit_dir(mut self, name: &str) -> Result<PathBuf, CliError> {
        let target = self.root.join(name);
        if target.exists() {
            fs::remove_dir_all(&target).map_err(io_err)?;
        }
        fs::rename(&self.dir, &target).map_err(io_err)?;
        self.committed = true;
        Ok(target)
    }

    /// Move every staged file directly into the output root.
    pub fn commit_files(mut self) -> Result<(), CliError> {
        let mut entries: Vec<PathBuf> = fs::read_dir(&self.dir)
            .map_err(io_err)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io_err)?;
        entries.sort();
        for path in entries {
            let name = path.file_name().expect("file entry");
            fs::rename(&path, self.root.join(name)).map_err(io_err)?;
        }
        fs::remove_dir(&self.dir).map_err(io_err)?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Core(e.into())
}
