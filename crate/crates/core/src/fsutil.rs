//! Filesystem helpers for content-addressed caches.
//!
//! Cache writers claim a key by writing a temp file and hard-linking it to
//! the final path. If the link fails because the key already exists, the
//! existing entry wins; concurrent writers of the same key converge on one
//! file and nobody observes a partial write.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::Result;

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn temp_path_for(final_path: &Path) -> PathBuf {
    let n = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let pid = process::id();
    let name = final_path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| "entry".into());
    final_path.with_file_name(format!(".tmp.{pid}.{n}.{name}"))
}

/// Atomically publish `bytes` at `path`. Returns true if this call created
/// the entry, false if another writer got there first (the existing bytes
/// are kept untouched).
pub fn publish_atomic(path: &Path, bytes: &[u8]) -> Result<bool> {
    if path.exists() {
        return Ok(false);
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = temp_path_for(path);
    fs::write(&tmp, bytes)?;
    match fs::hard_link(&tmp, path) {
        Ok(()) => {
            let _ = fs::remove_file(&tmp);
            Ok(true)
        }
        Err(err) if err.kind() == io::ErrorKind::AlreadyExists => {
            let _ = fs::remove_file(&tmp);
            Ok(false)
        }
        Err(err) => {
            let _ = fs::remove_file(&tmp);
            Err(err.into())
        }
    }
}

/// Write `bytes` to `path` via a temp file and rename, replacing any
/// previous content. Used for derived artifacts where last-writer-wins
/// is the intended behavior.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = temp_path_for(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
