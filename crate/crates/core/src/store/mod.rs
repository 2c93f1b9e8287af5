//! Versioned on-disk persistence for directions and cached inversions.
//!
//! Layout under the store root:
//!
//! ```text
//! <root>/<backend fingerprint>/<id>.dir
//! <root>/<backend fingerprint>/.lock
//! <root>/inversions/<backend fingerprint>/<image hash>.style
//! ```
//!
//! Records become visible only through an atomic rename of a fully written
//! and synced temporary file. Writers to one directory are serialized by an
//! in-process mutex plus an advisory file lock; readers never lock.

mod container;

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::OptimizeReport;
use crate::style_space::{Direction, PromptSpec, StyleVector};

pub use container::{
    content_checksum, decode_direction, decode_direction_header, decode_style, encode_direction,
    encode_style, DirectionHeader, DirectionRecord, ReportSummary, DIRECTION_MAGIC,
    STORE_FORMAT_VERSION, STYLE_MAGIC,
};

/// Environment variable naming the default store root.
pub const STORE_ENV: &str = "STYLESTEER_STORE";
pub const DIRECTION_EXT: &str = "dir";
pub const STYLE_EXT: &str = "style";
const TMP_SUFFIX: &str = ".tmp";
const INVERSIONS_DIR: &str = "inversions";

/// Points at which a save can be interrupted by a [`FaultHook`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultPoint {
    /// The temporary file is complete and synced but not yet renamed.
    BeforeCommit { tmp_path: PathBuf },
}

/// Called at each [`FaultPoint`]; an error aborts the save as a crash
/// would, leaving the temporary file behind.
pub type FaultHook = Arc<dyn Fn(&FaultPoint) -> std::io::Result<()> + Send + Sync>;

/// Listing metadata; no payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub id: String,
    pub checksum: String,
    pub created_at: String,
    pub prompt: PromptSpec,
    pub backend_fingerprint: String,
    pub lambda_id: f64,
    pub opt_resolution: u32,
    pub direction_norm: f64,
    pub active_channels: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub failed: bool,
    #[serde(skip)]
    sequence: u64,
}

impl From<&DirectionHeader> for RecordMeta {
    fn from(h: &DirectionHeader) -> Self {
        RecordMeta {
            id: h.id.clone(),
            checksum: h.checksum.clone(),
            created_at: h.created_at.clone(),
            prompt: h.prompt.clone(),
            backend_fingerprint: h.backend_fingerprint.clone(),
            lambda_id: h.hyperparams.lambda_id,
            opt_resolution: h.hyperparams.opt_resolution,
            direction_norm: h.direction_norm,
            active_channels: h.active_channels,
            initial_loss: h.report.initial_loss,
            final_loss: h.report.final_loss,
            failed: h.report.failed,
            sequence: h.sequence,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ListFilter {
    /// Case-insensitive substring of either prompt.
    pub prompt: Option<String>,
    pub fingerprint: Option<String>,
}

pub struct DirectionStore {
    root: PathBuf,
    write_lock: Mutex<()>,
    fault_hook: Option<FaultHook>,
}

/// Ids and fingerprints become path components; keep them to a safe alphabet.
fn check_component(kind: &str, s: &str) -> Result<()> {
    let ok = !s.is_empty()
        && s.len() <= 128
        && !s.starts_with('.')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("invalid {kind} {s:?}")))
    }
}

fn sync_dir(dir: &Path) -> Result<()> {
    // Directory fsync is best effort; not every platform allows opening one.
    if let Ok(f) = File::open(dir) {
        let _ = f.sync_all();
    }
    Ok(())
}

/// Writes `bytes` to `path` via a synced temporary file and a rename.
fn write_atomic(path: &Path, bytes: &[u8], hook: Option<&FaultHook>) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::InvalidInput(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{name}.{}{TMP_SUFFIX}", std::process::id()));
    let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    if let Some(hook) = hook {
        hook(&FaultPoint::BeforeCommit { tmp_path: tmp.clone() }).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    sync_dir(dir)
}

/// Writes a standalone `.dir` file atomically.
pub fn write_direction_file(path: &Path, id: &str, direction: &Direction, report: &ReportSummary) -> Result<()> {
    write_atomic(path, &encode_direction(id, direction, report, 0), None)
}

pub fn read_direction_file(path: &Path) -> Result<DirectionRecord> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_direction(&bytes)
}

pub fn write_style_file(path: &Path, s: &StyleVector) -> Result<()> {
    write_atomic(path, &encode_style(s), None)
}

pub fn read_style_file(path: &Path) -> Result<StyleVector> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_style(&bytes)
}

/// Deterministic id for standalone exports: the content checksum prefix.
pub fn export_id(direction: &Direction) -> String {
    content_checksum(direction)[..32].to_string()
}

impl DirectionStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(DirectionStore {
            root,
            write_lock: Mutex::new(()),
            fault_hook: None,
        })
    }

    /// Opens the store named by `STYLESTEER_STORE`, else `./stylesteer-store`.
    pub fn open_default() -> Result<Self> {
        let root = std::env::var_os(STORE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("stylesteer-store"));
        Self::open(root)
    }

    pub fn with_fault_hook(mut self, hook: FaultHook) -> Self {
        self.fault_hook = Some(hook);
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn backend_dir(&self, fingerprint: &str) -> Result<PathBuf> {
        check_component("backend fingerprint", fingerprint)?;
        Ok(self.root.join(fingerprint))
    }

    /// Where the record `id` of backend `fingerprint` lives.
    pub fn record_path(&self, fingerprint: &str, id: &str) -> Result<PathBuf> {
        check_component("direction id", id)?;
        Ok(self.backend_dir(fingerprint)?.join(format!("{id}.{DIRECTION_EXT}")))
    }

    fn backend_dirs(&self) -> Result<Vec<PathBuf>> {
        let mut dirs = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(|e| Error::io(&self.root, e))? {
            let entry = entry.map_err(|e| Error::io(&self.root, e))?;
            let name = entry.file_name();
            if name == INVERSIONS_DIR || name.to_string_lossy().starts_with('.') {
                continue;
            }
            if entry.file_type().map(|t| t.is_dir()).unwrap_or(false) {
                dirs.push(entry.path());
            }
        }
        dirs.sort();
        Ok(dirs)
    }

    fn record_paths(dir: &Path) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let hidden = path
                .file_name()
                .map(|n| n.to_string_lossy().starts_with('.'))
                .unwrap_or(true);
            if !hidden && path.extension().is_some_and(|e| e == DIRECTION_EXT) {
                out.push(path);
            }
        }
        out.sort();
        Ok(out)
    }

    /// Runs `f` holding the writer lock of `dir`.
    fn with_writer_lock<T>(&self, dir: &Path, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let _guard = self.write_lock.lock().map_err(|_| Error::Integrity("store lock poisoned".into()))?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let lock_path = dir.join(".lock");
        let lock_file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| Error::io(&lock_path, e))?;
        lock_file.lock().map_err(|e| Error::io(&lock_path, e))?;
        let result = f();
        let _ = lock_file.unlock();
        result
    }

    /// Removes temporary files left by interrupted saves. Caller holds the
    /// writer lock, so no live save owns them.
    fn sweep_stale(dir: &Path) -> Result<usize> {
        let mut removed = 0;
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.to_string_lossy().ends_with(TMP_SUFFIX) {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
                removed += 1;
            }
        }
        Ok(removed)
    }

    /// Persists a direction and its report; returns the new record id.
    pub fn save_direction(&self, direction: &Direction, report: &OptimizeReport) -> Result<String> {
        self.save_with_summary(direction, &ReportSummary::from(report))
    }

    pub fn save_with_summary(&self, direction: &Direction, summary: &ReportSummary) -> Result<String> {
        let dir = self.backend_dir(&direction.backend_fingerprint)?;
        self.with_writer_lock(&dir, || {
            let stale = Self::sweep_stale(&dir)?;
            if stale > 0 {
                tracing::info!(stale, dir = %dir.display(), "removed interrupted writes");
            }
            let checksum = content_checksum(direction);
            let mut sequence = 0;
            for path in Self::record_paths(&dir)? {
                let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
                let Ok(header) = decode_direction_header(&bytes) else {
                    continue;
                };
                sequence = sequence.max(header.sequence + 1);
                if header.checksum == checksum {
                    let existing = decode_direction(&bytes)?;
                    let same = existing.direction.delta() == direction.delta()
                        && existing.direction.mask() == direction.mask()
                        && existing.direction.hyperparams == direction.hyperparams;
                    if !same {
                        return Err(Error::Integrity(format!(
                            "checksum {checksum} collides with record {} of different content",
                            existing.id
                        )));
                    }
                }
            }
            let id = uuid::Uuid::new_v4().simple().to_string();
            let path = dir.join(format!("{id}.{DIRECTION_EXT}"));
            let bytes = encode_direction(&id, direction, summary, sequence);
            write_atomic(&path, &bytes, self.fault_hook.as_ref())?;
            Ok(id)
        })
    }

    fn find_record(&self, id: &str) -> Result<PathBuf> {
        check_component("direction id", id)?;
        for dir in self.backend_dirs()? {
            let path = dir.join(format!("{id}.{DIRECTION_EXT}"));
            if path.is_file() {
                return Ok(path);
            }
        }
        Err(Error::NotFound(format!("direction {id}")))
    }

    /// Loads and verifies a record.
    pub fn load_direction(&self, id: &str) -> Result<DirectionRecord> {
        let path = self.find_record(id)?;
        let record = read_direction_file(&path)?;
        if record.id != id {
            return Err(Error::Integrity(format!(
                "file {} holds record {}",
                path.display(),
                record.id
            )));
        }
        Ok(record)
    }

    /// Header metadata of one record.
    pub fn describe(&self, id: &str) -> Result<RecordMeta> {
        let path = self.find_record(id)?;
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(RecordMeta::from(&decode_direction_header(&bytes)?))
    }

    /// Metadata of matching records, newest first. Unreadable records are
    /// skipped with a warning.
    pub fn list_directions(&self, filter: &ListFilter) -> Result<Vec<RecordMeta>> {
        let dirs = match &filter.fingerprint {
            Some(fp) => {
                let dir = self.backend_dir(fp)?;
                if dir.is_dir() {
                    vec![dir]
                } else {
                    Vec::new()
                }
            }
            None => self.backend_dirs()?,
        };
        let mut out = Vec::new();
        for dir in dirs {
            for path in Self::record_paths(&dir)? {
                let header = match fs::read(&path)
                    .map_err(|e| Error::io(&path, e))
                    .and_then(|b| decode_direction_header(&b))
                {
                    Ok(h) => h,
                    Err(e) => {
                        tracing::warn!(path = %path.display(), error = %e, "skipping unreadable record");
                        continue;
                    }
                };
                if let Some(n) = &filter.prompt {
                    if !header.prompt.matches(n) {
                        continue;
                    }
                }
                if let Some(fp) = &filter.fingerprint {
                    if &header.backend_fingerprint != fp {
                        continue;
                    }
                }
                out.push(RecordMeta::from(&header));
            }
        }
        out.sort_by(|a, b| {
            b.created_at
                .cmp(&a.created_at)
                .then(b.sequence.cmp(&a.sequence))
                .then(a.id.cmp(&b.id))
        });
        Ok(out)
    }

    fn inversion_path(&self, fingerprint: &str, image_hash: &str) -> Result<PathBuf> {
        check_component("backend fingerprint", fingerprint)?;
        check_component("image hash", image_hash)?;
        Ok(self
            .root
            .join(INVERSIONS_DIR)
            .join(fingerprint)
            .join(format!("{image_hash}.{STYLE_EXT}")))
    }

    pub fn save_inversion(&self, fingerprint: &str, image_hash: &str, s: &StyleVector) -> Result<()> {
        let path = self.inversion_path(fingerprint, image_hash)?;
        let dir = path.parent().expect("inversion path has a parent").to_path_buf();
        self.with_writer_lock(&dir, || write_atomic(&path, &encode_style(s), self.fault_hook.as_ref()))
    }

    /// A cached inversion, if one exists and verifies.
    pub fn load_inversion(&self, fingerprint: &str, image_hash: &str) -> Result<Option<StyleVector>> {
        let path = self.inversion_path(fingerprint, image_hash)?;
        if !path.is_file() {
            return Ok(None);
        }
        read_style_file(&path).map(Some)
    }
}
