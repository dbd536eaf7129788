//! Content-addressed text cache for backend responses.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::backend::content_hash;
use crate::error::{Error, Result};

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// One file per entry under `<root>/<namespace>/<sha256 of key>.txt`.
/// Writes go through a temp file and rename so readers never see a partial entry.
#[derive(Debug, Clone)]
pub struct DiskCache {
    root: PathBuf,
}

impl DiskCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_path(&self, namespace: &str, key: &[String]) -> PathBuf {
        self.root.join(namespace).join(format!("{}.txt", content_hash(key)))
    }

    pub fn get(&self, namespace: &str, key: &[String]) -> Option<String> {
        std::fs::read_to_string(self.entry_path(namespace, key)).ok()
    }

    pub fn put(&self, namespace: &str, key: &[String], value: &str) -> Result<()> {
        let path = self.entry_path(namespace, key);
        let dir = path.parent().expect("entry has a parent");
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tmp = dir.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&tmp, value).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}
