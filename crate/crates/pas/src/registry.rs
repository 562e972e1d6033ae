//! The Camera ID Register: photo ID to camera identity, persisted as one JSON
//! file that is only ever replaced by rename.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, SubsecRound, Utc};
use photostamp::cipherstream::{photo_id, CameraIdentity, PhotoId};
use serde::{Deserialize, Serialize};

use crate::error::{PasError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CidrRecord {
    pub photo_id: PhotoId,
    pub camera_id: CameraIdentity,
    pub registered_at: DateTime<Utc>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterFile {
    pub records: Vec<CidrRecord>,
}

/// Parse and validate register file contents.
pub fn parse_register(bytes: &[u8]) -> Result<RegisterFile> {
    let file: RegisterFile =
        serde_json::from_slice(bytes).map_err(|e| PasError::CorruptRegister(e.to_string()))?;
    let mut seen = HashMap::with_capacity(file.records.len());
    for r in &file.records {
        if photo_id(&r.camera_id) != r.photo_id {
            return Err(PasError::CorruptRegister(format!(
                "record {} does not match its camera id",
                r.photo_id
            )));
        }
        if seen.insert(r.photo_id.clone(), ()).is_some() {
            return Err(PasError::CorruptRegister(format!("duplicate photo id {}", r.photo_id)));
        }
    }
    Ok(file)
}

#[derive(Default)]
struct Table {
    records: Vec<CidrRecord>,
    index: HashMap<PhotoId, usize>,
}

impl Table {
    fn from_records(records: Vec<CidrRecord>) -> Self {
        let index = records.iter().enumerate().map(|(i, r)| (r.photo_id.clone(), i)).collect();
        Self { records, index }
    }

    fn get(&self, id: &PhotoId) -> Option<&CidrRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }
}

/// Outcome of a registration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Registration {
    Created(CidrRecord),
    Existing(CidrRecord),
}

impl Registration {
    pub fn record(&self) -> &CidrRecord {
        match self {
            Registration::Created(r) | Registration::Existing(r) => r,
        }
    }
}

/// File-backed register. Lookups share a read lock; registrations are
/// serialized and become visible only after the new file is in place.
pub struct Registry {
    path: PathBuf,
    table: RwLock<Table>,
    writer: Mutex<()>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry").field("path", &self.path).field("records", &self.len()).finish()
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

impl Registry {
    /// Open the register at `path`, creating an empty one if absent. A
    /// leftover temp file from an interrupted write is discarded.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let tmp = temp_path(&path);
        if tmp.exists() {
            tracing::warn!(path = %tmp.display(), "discarding incomplete register write");
            fs::remove_file(&tmp)?;
        }
        let records = match fs::read(&path) {
            Ok(bytes) => parse_register(&bytes)?.records,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                persist(&path, &[])?;
                Vec::new()
            }
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            path,
            table: RwLock::new(Table::from_records(records)),
            writer: Mutex::new(()),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.table.read().expect("register lock poisoned").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, id: &PhotoId) -> Result<CameraIdentity> {
        self.table
            .read()
            .expect("register lock poisoned")
            .get(id)
            .map(|r| r.camera_id.clone())
            .ok_or_else(|| PasError::NotFound(id.clone()))
    }

    pub fn record(&self, id: &PhotoId) -> Option<CidrRecord> {
        self.table.read().expect("register lock poisoned").get(id).cloned()
    }

    pub fn records(&self) -> Vec<CidrRecord> {
        self.table.read().expect("register lock poisoned").records.clone()
    }

    /// Register a camera. Registering the same camera again returns the
    /// existing record unchanged.
    pub fn register(&self, camera_id: &str) -> Result<Registration> {
        let cam = CameraIdentity::new(camera_id).map_err(PasError::InvalidCamera)?;
        let id = photo_id(&cam);
        let _guard = self.writer.lock().expect("register writer poisoned");
        let mut records = {
            let table = self.table.read().expect("register lock poisoned");
            if let Some(existing) = table.get(&id) {
                return if existing.camera_id == cam {
                    Ok(Registration::Existing(existing.clone()))
                } else {
                    Err(PasError::PhotoIdCollision(id))
                };
            }
            table.records.clone()
        };
        let record = CidrRecord {
            photo_id: id,
            camera_id: cam,
            registered_at: Utc::now().trunc_subsecs(3),
        };
        records.push(record.clone());
        persist(&self.path, &records)?;
        *self.table.write().expect("register lock poisoned") = Table::from_records(records);
        Ok(Registration::Created(record))
    }
}

/// Write `records` to a temp file, flush it to disk and rename it over `path`.
fn persist(path: &Path, records: &[CidrRecord]) -> Result<()> {
    #[derive(Serialize)]
    struct Out<'a> {
        records: &'a [CidrRecord],
    }
    let bytes = serde_json::to_vec_pretty(&Out { records }).map_err(std::io::Error::other)?;
    let tmp = temp_path(path);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        // Directory fsync is not supported everywhere; the rename is already atomic.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}
