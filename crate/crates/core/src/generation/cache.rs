use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{GenParams, GenerationResult};
use crate::digest::sha256_parts;

/// Content-addressed store of successful generations.
///
/// Entries live at `<root>/<first two hex chars>/<key>.json` and are written
/// to a temporary file then renamed into place, so readers never observe a
/// partial entry. Writes go through one lock.
#[derive(Debug)]
pub struct ResponseCache {
    root: PathBuf,
    write_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            write_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Key over model, canonical parameter JSON and input digest.
    pub fn key(model_id: &str, params: &GenParams, input_digest: &str) -> String {
        let params_json = serde_json::to_string(params).expect("params serialize");
        sha256_parts([
            model_id.as_bytes(),
            params_json.as_bytes(),
            input_digest.as_bytes(),
        ])
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<GenerationResult> {
        let bytes = fs::read(self.path_for(key)).ok()?;
        match serde_json::from_slice(&bytes) {
            Ok(result) => Some(result),
            Err(err) => {
                tracing::warn!(key, %err, "ignoring unreadable cache entry");
                None
            }
        }
    }

    pub fn put(&self, key: &str, result: &GenerationResult) -> std::io::Result<()> {
        let path = self.path_for(key);
        let dir = path.parent().expect("entry has a parent");
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{key}.tmp"));
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(&serde_json::to_vec(result).expect("result serializes"))?;
            file.sync_all()?;
        }
        fs::rename(&tmp, &path)
    }

    pub fn len(&self) -> usize {
        walk_json(&self.root)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn walk_json(dir: &Path) -> usize {
    let Ok(entries) = fs::read_dir(dir) else {
        return 0;
    };
    entries
        .flatten()
        .map(|e| {
            let p = e.path();
            if p.is_dir() {
                walk_json(&p)
            } else if p.extension().is_some_and(|x| x == "json") {
                1
            } else {
                0
            }
        })
        .sum()
}
