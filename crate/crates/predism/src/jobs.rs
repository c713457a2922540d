//! Sweep job records. All mutation goes through one lock.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub inputs_digest: String,
    pub status: JobStatus,
    /// Artifact paths relative to the artifacts root.
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Default)]
struct Inner {
    records: HashMap<String, JobRecord>,
    running: HashMap<String, Arc<Mutex<()>>>,
}

#[derive(Debug)]
pub struct JobStore {
    root: PathBuf,
    inner: Mutex<Inner>,
}

impl JobStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        JobStore {
            root: root.into(),
            inner: Mutex::new(Inner::default()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn job_dir(&self, job_id: &str) -> PathBuf {
        self.root.join(job_id)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn get(&self, job_id: &str) -> Option<JobRecord> {
        self.lock().records.get(job_id).cloned()
    }

    fn artifacts_present(&self, rec: &JobRecord) -> bool {
        rec.artifacts.iter().all(|a| self.root.join(a).is_file())
    }

    /// Runs `work` for the job identified by `inputs_digest`, or returns the
    /// finished record if an identical job is already done and its files are
    /// intact. Identical jobs never run concurrently. `work` receives the job
    /// directory and returns the file names it wrote there.
    pub fn run<T>(
        &self,
        inputs_digest: &str,
        work: impl FnOnce(&Path) -> Result<(Vec<String>, T), crate::error::AppError>,
    ) -> Result<(JobRecord, Option<T>), crate::error::AppError> {
        let job_id = inputs_digest[..16.min(inputs_digest.len())].to_string();
        let gate = {
            let mut inner = self.lock();
            inner.running.entry(job_id.clone()).or_default().clone()
        };
        let _turn = gate.lock().unwrap_or_else(|p| p.into_inner());

        if let Some(rec) = self.get(&job_id) {
            if rec.status == JobStatus::Done && self.artifacts_present(&rec) {
                return Ok((rec, None));
            }
        }
        self.put(JobRecord {
            job_id: job_id.clone(),
            inputs_digest: inputs_digest.to_string(),
            status: JobStatus::Running,
            artifacts: Vec::new(),
            error: None,
        });
        let dir = self.job_dir(&job_id);
        match work(&dir) {
            Ok((files, value)) => {
                let mut rec = JobRecord {
                    job_id: job_id.clone(),
                    inputs_digest: inputs_digest.to_string(),
                    status: JobStatus::Done,
                    artifacts: files.iter().map(|f| format!("{job_id}/{f}")).collect(),
                    error: None,
                };
                if !self.artifacts_present(&rec) {
                    rec.status = JobStatus::Failed;
                    rec.error = Some("artifacts missing after write".into());
                    self.put(rec.clone());
                    return Err(crate::error::AppError::internal("artifacts missing after write"));
                }
                self.put(rec.clone());
                Ok((rec, Some(value)))
            }
            Err(e) => {
                self.put(JobRecord {
                    job_id,
                    inputs_digest: inputs_digest.to_string(),
                    status: JobStatus::Failed,
                    artifacts: Vec::new(),
                    error: Some(e.to_string()),
                });
                Err(e)
            }
        }
    }

    fn put(&self, rec: JobRecord) {
        self.lock().records.insert(rec.job_id.clone(), rec);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::AppError;

    #[test]
    fn done_means_files_exist_and_reuse() {
        let tmp = tempfile::tempdir().unwrap();
        let store = JobStore::new(tmp.path());
        let d = digest_hex(b"inputs");
        assert_eq!(d.len(), 64);
        let calls = std::cell::Cell::new(0);
        let work = |dir: &Path| {
            calls.set(calls.get() + 1);
            std::fs::create_dir_all(dir).unwrap();
            std::fs::write(dir.join("a.txt"), "x").unwrap();
            Ok((vec!["a.txt".to_string()], ()))
        };
        let (rec, fresh) = store.run(&d, work).unwrap();
        assert_eq!(rec.status, JobStatus::Done);
        assert!(fresh.is_some());
        assert!(tmp.path().join(&rec.artifacts[0]).is_file());
        let (again, fresh) = store.run(&d, work).unwrap();
        assert!(fresh.is_none());
        assert_eq!(again, rec);
        assert_eq!(calls.get(), 1);

        // Deleting an artifact forces a rerun.
        std::fs::remove_file(tmp.path().join(&rec.artifacts[0])).unwrap();
        store.run(&d, work).unwrap();
        assert_eq!(calls.get(), 2);
    }

    #[test]
    fn failures_and_missing_files_are_recorded() {
        let tmp = tempfile::tempdir().unwrap();
        let store = JobStore::new(tmp.path());
        let d = digest_hex(b"bad");
        let r = store.run(&d, |_| -> Result<(Vec<String>, ()), AppError> { Err(AppError::malformed("nope")) });
        assert!(r.is_err());
        assert_eq!(store.get(&d[..16]).unwrap().status, JobStatus::Failed);
        let d2 = digest_hex(b"ghost");
        let r = store.run(&d2, |_| Ok((vec!["never-written".to_string()], ())));
        assert!(r.is_err());
        assert_eq!(store.get(&d2[..16]).unwrap().status, JobStatus::Failed);
    }
}
