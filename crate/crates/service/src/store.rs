//! Append-only plan store on the local file system.
//!
//! ```text
//! <root>/plans/<plan id>/v000001.json
//!                        v000002.json
//!                        .tmp-<uuid>      (only while a write is in flight)
//! ```
//!
//! A version file is written under a temporary name, flushed to disk, then
//! hard-linked to its final name. Linking fails if the name is taken, so two
//! writers racing for the same version cannot overwrite each other, and a
//! version file is never visible half-written. Leftover temporary files from a
//! crashed writer are removed when the store is opened.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use milestone_core::{Plan, PlanReport};
use serde::Serialize;

pub type Version = u64;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage failure: {0}")]
    Storage(#[from] io::Error),
    #[error("version {version} of plan {plan} is unreadable: {reason}")]
    Corrupt { plan: String, version: Version, reason: String },
    #[error("plan rejected by validation")]
    ValidationRejected(Box<PlanReport>),
    #[error("unknown plan {0}")]
    UnknownPlan(String),
    #[error("plan {plan} has no version {version}")]
    UnknownVersion { plan: String, version: Version },
    #[error("plan {plan} is at version {current}, not {expected}")]
    Conflict { plan: String, expected: Version, current: Version },
    #[error("invalid plan id {0:?}")]
    BadId(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanSummary {
    pub id: String,
    pub name: String,
    pub version: Version,
}

/// Handle to a store directory. Cheap to clone; clones share the per-plan
/// write locks.
#[derive(Debug, Clone)]
pub struct PlanStore {
    root: PathBuf,
    locks: Arc<Mutex<HashMap<String, Arc<Mutex<()>>>>>,
}

/// Refuses plans that are inconsistent, as opposed to unfinished (see
/// [`PlanReport::has_errors`]).
pub fn check_persistable(plan: &Plan) -> Result<(), StoreError> {
    let report = plan.validate();
    if report.has_errors() {
        return Err(StoreError::ValidationRejected(Box::new(report)));
    }
    Ok(())
}

fn version_file(v: Version) -> String {
    format!("v{v:06}.json")
}

fn parse_version_file(name: &str) -> Option<Version> {
    let digits = name.strip_prefix('v')?.strip_suffix(".json")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    File::open(dir)?.sync_all()
}

impl PlanStore {
    /// Opens (creating if needed) a store rooted at `root` and clears out
    /// temporary files left by interrupted writes.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("plans"))?;
        let store = PlanStore { root, locks: Arc::default() };
        for entry in fs::read_dir(store.plans_dir())? {
            let dir = entry?.path();
            if !dir.is_dir() {
                continue;
            }
            for f in fs::read_dir(&dir)? {
                let f = f?;
                if f.file_name().to_string_lossy().starts_with(".tmp-") {
                    fs::remove_file(f.path())?;
                }
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn plans_dir(&self) -> PathBuf {
        self.root.join("plans")
    }

    fn plan_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::BadId(id.to_string()));
        }
        Ok(self.plans_dir().join(id))
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table poisoned");
        locks.entry(id.to_string()).or_default().clone()
    }

    /// Stores a new plan as version 1 under a fresh id.
    pub fn create(&self, plan: &Plan) -> Result<(String, Version), StoreError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.create_with_id(&id, plan)?;
        Ok((id, 1))
    }

    /// Stores a new plan as version 1 under `id`, which must not exist yet.
    pub fn create_with_id(&self, id: &str, plan: &Plan) -> Result<Version, StoreError> {
        check_persistable(plan)?;
        let dir = self.plan_dir(id)?;
        let lock = self.lock_for(id);
        let _guard = lock.lock().expect("plan lock poisoned");
        match fs::create_dir(&dir) {
            Ok(()) => sync_dir(&self.plans_dir())?,
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                let current = self.latest_version(id)?;
                if current > 0 {
                    return Err(StoreError::Conflict { plan: id.to_string(), expected: 0, current });
                }
            }
            Err(e) => return Err(e.into()),
        }
        self.write_version(id, &dir, 1, plan)?;
        Ok(1)
    }

    /// Appends `plan` as the version after `expected`. Fails with
    /// [`StoreError::Conflict`] if someone else got there first.
    pub fn save(&self, id: &str, expected: Version, plan: &Plan) -> Result<Version, StoreError> {
        check_persistable(plan)?;
        let dir = self.plan_dir(id)?;
        let lock = self.lock_for(id);
        let _guard = lock.lock().expect("plan lock poisoned");
        let current = self.latest_version(id)?;
        if current == 0 {
            return Err(StoreError::UnknownPlan(id.to_string()));
        }
        if current != expected {
            return Err(StoreError::Conflict { plan: id.to_string(), expected, current });
        }
        self.write_version(id, &dir, expected + 1, plan)?;
        Ok(expected + 1)
    }

    fn write_version(&self, id: &str, dir: &Path, v: Version, plan: &Plan) -> Result<(), StoreError> {
        let tmp = dir.join(format!(".tmp-{}", uuid::Uuid::new_v4().simple()));
        let result = (|| {
            let mut f = File::create(&tmp)?;
            f.write_all(plan.to_json().as_bytes())?;
            f.sync_all()?;
            drop(f);
            fs::hard_link(&tmp, dir.join(version_file(v)))
        })();
        let _ = fs::remove_file(&tmp);
        match result {
            Ok(()) => {
                sync_dir(dir)?;
                Ok(())
            }
            // another process holding a different lock table won the race
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                Err(StoreError::Conflict { plan: id.to_string(), expected: v - 1, current: self.latest_version(id)? })
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Every committed version of a plan, oldest first. Empty for unknown ids.
    pub fn versions(&self, id: &str) -> Result<Vec<Version>, StoreError> {
        let dir = self.plan_dir(id)?;
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        for entry in entries {
            if let Some(v) = parse_version_file(&entry?.file_name().to_string_lossy()) {
                out.push(v);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Highest committed version, 0 when the plan does not exist.
    pub fn latest_version(&self, id: &str) -> Result<Version, StoreError> {
        Ok(self.versions(id)?.last().copied().unwrap_or(0))
    }

    pub fn load(&self, id: &str, version: Version) -> Result<Plan, StoreError> {
        let path = self.plan_dir(id)?.join(version_file(version));
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(if self.latest_version(id)? == 0 {
                    StoreError::UnknownPlan(id.to_string())
                } else {
                    StoreError::UnknownVersion { plan: id.to_string(), version }
                });
            }
            Err(e) => return Err(e.into()),
        };
        Plan::from_json(&text).map_err(|e| StoreError::Corrupt { plan: id.to_string(), version, reason: e.to_string() })
    }

    /// The newest version and its number.
    pub fn load_latest(&self, id: &str) -> Result<(Plan, Version), StoreError> {
        let v = self.latest_version(id)?;
        if v == 0 {
            return Err(StoreError::UnknownPlan(id.to_string()));
        }
        Ok((self.load(id, v)?, v))
    }

    /// Every plan at its latest version, ordered by id.
    pub fn list(&self) -> Result<Vec<PlanSummary>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.plans_dir())? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if entry.path().is_dir() && valid_id(&name) {
                ids.push(name);
            }
        }
        ids.sort();
        let mut out = Vec::new();
        for id in ids {
            let v = self.latest_version(&id)?;
            if v == 0 {
                continue;
            }
            let plan = self.load(&id, v)?;
            out.push(PlanSummary { id, name: plan.name, version: v });
        }
        Ok(out)
    }
}
