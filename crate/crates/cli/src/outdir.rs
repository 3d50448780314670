use std::fs::{File, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use sincfront::{Error, Result};

pub const LOCK_FILE: &str = ".sincfront.lock";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    lock: PathBuf,
}

impl OutDir {
    pub fn claim(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| io(root, e))?;
        let lock = root.join(LOCK_FILE);
        let mut f: File = match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(f) => f,
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                return Err(Error::Locked(format!(
                    "{} is in use by another run; delete {} if that run is gone",
                    root.display(),
                    lock.display()
                )))
            }
            Err(e) => return Err(io(&lock, e)),
        };
        let _ = writeln!(f, "{}", std::process::id());
        Ok(Self {
            root: root.to_path_buf(),
            lock,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, contents).map_err(|e| io(&p, e))?;
        Ok(p)
    }
}

impl Drop for OutDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.lock);
    }
}

pub fn io(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
