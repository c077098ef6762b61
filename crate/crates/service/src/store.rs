//! Embedded document storage. Documents are JSON values in named
//! collections; every write is atomic per document.
//!
//! `FileStore` keeps one file per document. A write is first appended to a
//! write-ahead log and synced, then the document file is replaced by rename,
//! then the log is cleared. Opening a store replays whatever the log still
//! holds, so a crash between the two steps loses nothing. Other backends
//! implement `DocumentStore`; `MemoryStore` is the in-process one.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store io at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt document {path}: {source}")]
    Corrupt {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid document id `{0}`")]
    InvalidId(String),
}

pub trait DocumentStore: Send + Sync {
    fn put(&self, collection: &str, id: &str, doc: &Value) -> Result<(), StoreError>;
    fn get(&self, collection: &str, id: &str) -> Result<Option<Value>, StoreError>;
    fn delete(&self, collection: &str, id: &str) -> Result<(), StoreError>;
    /// Every document of a collection, ordered by id.
    fn list(&self, collection: &str) -> Result<Vec<(String, Value)>, StoreError>;
    /// Appends one entry to the audit log.
    fn audit(&self, entry: &Value) -> Result<(), StoreError>;
    fn audit_log(&self) -> Result<Vec<Value>, StoreError>;
}

fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

#[derive(Default)]
pub struct MemoryStore {
    docs: Mutex<BTreeMap<String, BTreeMap<String, Value>>>,
    audit: Mutex<Vec<Value>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl DocumentStore for MemoryStore {
    fn put(&self, collection: &str, id: &str, doc: &Value) -> Result<(), StoreError> {
        check_id(collection)?;
        check_id(id)?;
        self.docs
            .lock()
            .expect("store poisoned")
            .entry(collection.to_string())
            .or_default()
            .insert(id.to_string(), doc.clone());
        Ok(())
    }

    fn get(&self, collection: &str, id: &str) -> Result<Option<Value>, StoreError> {
        Ok(self
            .docs
            .lock()
            .expect("store poisoned")
            .get(collection)
            .and_then(|c| c.get(id))
            .cloned())
    }

    fn delete(&self, collection: &str, id: &str) -> Result<(), StoreError> {
        if let Some(c) = self.docs.lock().expect("store poisoned").get_mut(collection) {
            c.remove(id);
        }
        Ok(())
    }

    fn list(&self, collection: &str) -> Result<Vec<(String, Value)>, StoreError> {
        Ok(self
            .docs
            .lock()
            .expect("store poisoned")
            .get(collection)
            .map(|c| c.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
            .unwrap_or_default())
    }

    fn audit(&self, entry: &Value) -> Result<(), StoreError> {
        self.audit.lock().expect("store poisoned").push(entry.clone());
        Ok(())
    }

    fn audit_log(&self) -> Result<Vec<Value>, StoreError> {
        Ok(self.audit.lock().expect("store poisoned").clone())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum WalEntry {
    Put { collection: String, id: String, doc: Value },
    Delete { collection: String, id: String },
}

pub struct FileStore {
    root: PathBuf,
    /// Serializes writers; the log holds at most one pending entry per writer.
    wal: Mutex<File>,
}

const WAL: &str = "wal.jsonl";
const AUDIT: &str = "audit.jsonl";

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl FileStore {
    /// Opens or creates a store under `root` and replays its log.
    pub fn open(root: &Path) -> Result<FileStore, StoreError> {
        fs::create_dir_all(root).map_err(io(root))?;
        let wal_path = root.join(WAL);
        let pending = Self::read_wal(&wal_path)?;
        for entry in &pending {
            Self::apply(root, entry)?;
        }
        let wal = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&wal_path)
            .map_err(io(&wal_path))?;
        wal.set_len(0).map_err(io(&wal_path))?;
        Ok(FileStore {
            root: root.to_path_buf(),
            wal: Mutex::new(wal),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn read_wal(path: &Path) -> Result<Vec<WalEntry>, StoreError> {
        let Ok(f) = File::open(path) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line.map_err(io(path))?;
            // A torn final line is a write that never completed.
            match serde_json::from_str(&line) {
                Ok(e) => out.push(e),
                Err(_) => break,
            }
        }
        Ok(out)
    }

    fn doc_path(root: &Path, collection: &str, id: &str) -> PathBuf {
        root.join(collection).join(format!("{id}.json"))
    }

    fn apply(root: &Path, entry: &WalEntry) -> Result<(), StoreError> {
        match entry {
            WalEntry::Put { collection, id, doc } => {
                let dir = root.join(collection);
                fs::create_dir_all(&dir).map_err(io(&dir))?;
                let path = Self::doc_path(root, collection, id);
                let tmp = dir.join(format!(".{id}.json.tmp"));
                let bytes = serde_json::to_vec_pretty(doc).expect("json value serializes");
                let mut f = File::create(&tmp).map_err(io(&tmp))?;
                f.write_all(&bytes).map_err(io(&tmp))?;
                f.sync_all().map_err(io(&tmp))?;
                fs::rename(&tmp, &path).map_err(io(&path))?;
            }
            WalEntry::Delete { collection, id } => {
                let path = Self::doc_path(root, collection, id);
                match fs::remove_file(&path) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(io(&path)(e)),
                }
            }
        }
        Ok(())
    }

    fn write(&self, entry: WalEntry) -> Result<(), StoreError> {
        let wal_path = self.root.join(WAL);
        let mut wal = self.wal.lock().expect("wal poisoned");
        let mut line = serde_json::to_vec(&entry).expect("wal entry serializes");
        line.push(b'\n');
        wal.write_all(&line).map_err(io(&wal_path))?;
        wal.sync_data().map_err(io(&wal_path))?;
        Self::apply(&self.root, &entry)?;
        wal.set_len(0).map_err(io(&wal_path))?;
        Ok(())
    }

    /// Appends an entry to the log without applying it, as a crash right
    /// after the log write would leave it.
    #[doc(hidden)]
    pub fn log_only(&self, collection: &str, id: &str, doc: &Value) -> Result<(), StoreError> {
        let wal_path = self.root.join(WAL);
        let entry = WalEntry::Put {
            collection: collection.to_string(),
            id: id.to_string(),
            doc: doc.clone(),
        };
        let mut line = serde_json::to_vec(&entry).expect("wal entry serializes");
        line.push(b'\n');
        let mut wal = self.wal.lock().expect("wal poisoned");
        wal.write_all(&line).map_err(io(&wal_path))?;
        wal.sync_data().map_err(io(&wal_path))
    }
}

impl DocumentStore for FileStore {
    fn put(&self, collection: &str, id: &str, doc: &Value) -> Result<(), StoreError> {
        check_id(collection)?;
        check_id(id)?;
        self.write(WalEntry::Put {
            collection: collection.to_string(),
            id: id.to_string(),
            doc: doc.clone(),
        })
    }

    fn get(&self, collection: &str, id: &str) -> Result<Option<Value>, StoreError> {
        check_id(collection)?;
        check_id(id)?;
        let path = Self::doc_path(&self.root, collection, id);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|source| StoreError::Corrupt { path, source }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io(&path)(e)),
        }
    }

    fn delete(&self, collection: &str, id: &str) -> Result<(), StoreError> {
        check_id(collection)?;
        check_id(id)?;
        self.write(WalEntry::Delete {
            collection: collection.to_string(),
            id: id.to_string(),
        })
    }

    fn list(&self, collection: &str) -> Result<Vec<(String, Value)>, StoreError> {
        check_id(collection)?;
        let dir = self.root.join(collection);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io(&dir)(e)),
        };
        let mut ids = Vec::new();
        for e in entries {
            let name = e.map_err(io(&dir))?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".json") {
                if !name.starts_with('.') {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            if let Some(doc) = self.get(collection, &id)? {
                out.push((id, doc));
            }
        }
        Ok(out)
    }

    fn audit(&self, entry: &Value) -> Result<(), StoreError> {
        let path = self.root.join(AUDIT);
        let _guard = self.wal.lock().expect("wal poisoned");
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io(&path))?;
        let mut line = serde_json::to_vec(entry).expect("json value serializes");
        line.push(b'\n');
        f.write_all(&line).map_err(io(&path))
    }

    fn audit_log(&self) -> Result<Vec<Value>, StoreError> {
        let path = self.root.join(AUDIT);
        let Ok(f) = File::open(&path) else {
            return Ok(Vec::new());
        };
        BufReader::new(f)
            .lines()
            .map(|l| {
                let l = l.map_err(io(&path))?;
                serde_json::from_str(&l).map_err(|source| StoreError::Corrupt {
                    path: path.clone(),
                    source,
                })
            })
            .collect()
    }
}
