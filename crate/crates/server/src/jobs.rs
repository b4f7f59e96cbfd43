//! Build jobs and their on-disk records.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use lakescope_core::hierarchy::{CatalogNode, HierarchyConfig, FIRST_CATEGORY_LEVEL};
use lakescope_core::jsonl;

use crate::error::ServiceError;
use crate::store::write_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Running,
    Failed,
    Done,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Failed | JobState::Done)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildJob {
    pub job_id: String,
    pub state: JobState,
    /// Level of the last completed category layer (1 = only tables so far).
    pub current_layer: u32,
    pub frontier_size: usize,
    /// Frontier size after each layer, starting with the table count.
    pub frontier_sizes: Vec<usize>,
    pub created_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
    pub error: Option<String>,
    pub error_code: Option<String>,
    pub pid: u32,
    pub resumed_from: Option<String>,
    /// Category layers taken from the resumed job instead of recomputed.
    pub layers_reused: usize,
    pub forest_version: Option<u64>,
    pub config: HierarchyConfig,
}

impl BuildJob {
    pub fn transition(&mut self, to: JobState) -> Result<(), ServiceError> {
        let ok = matches!(
            (self.state, to),
            (JobState::Pending, JobState::Running)
                | (JobState::Pending, JobState::Failed)
                | (JobState::Running, JobState::Done)
                | (JobState::Running, JobState::Failed)
        );
        if !ok {
            return Err(ServiceError::Internal(format!(
                "job {} cannot move from {:?} to {:?}",
                self.job_id, self.state, to
            )));
        }
        self.state = to;
        match to {
            JobState::Running => self.started_at = Some(Utc::now()),
            JobState::Done | JobState::Failed => self.finished_at = Some(Utc::now()),
            JobState::Pending => {}
        }
        Ok(())
    }

    pub fn is_resumable(&self) -> bool {
        self.state == JobState::Failed
    }
}

#[derive(Debug, Clone)]
pub struct Jobs {
    dir: PathBuf,
}

/// Whether `pid` names a live (non-zombie) process.
pub fn pid_alive(pid: u32) -> bool {
    if pid == 0 {
        return false;
    }
    match fs::read_to_string(format!("/proc/{pid}/stat")) {
        // state is the first field after the parenthesized command name
        Ok(stat) => stat
            .rsplit_once(')')
            .and_then(|(_, rest)| rest.split_whitespace().next())
            .is_some_and(|state| state != "Z" && state != "X"),
        Err(_) => false,
    }
}

impl Jobs {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    fn job_dir(&self, id: &str) -> PathBuf {
        self.dir.join(id)
    }

    fn next_id(&self) -> Result<String, ServiceError> {
        let mut max = 0u64;
        for entry in fs::read_dir(&self.dir).map_err(|e| ServiceError::io("jobs", e))?.flatten() {
            if let Some(n) = entry.file_name().to_string_lossy().strip_prefix("job-").and_then(|n| n.parse().ok()) {
                max = max.max(n);
            }
        }
        Ok(format!("job-{:06}", max + 1))
    }

    pub fn create(&self, config: HierarchyConfig, resumed_from: Option<String>) -> Result<BuildJob, ServiceError> {
        let job = BuildJob {
            job_id: self.next_id()?,
            state: JobState::Pending,
            current_layer: 1,
            frontier_size: 0,
            frontier_sizes: Vec::new(),
            created_at: Utc::now(),
            started_at: None,
            finished_at: None,
            error: None,
            error_code: None,
            pid: std::process::id(),
            resumed_from,
            layers_reused: 0,
            forest_version: None,
            config,
        };
        fs::create_dir_all(self.job_dir(&job.job_id)).map_err(|e| ServiceError::io("jobs", e))?;
        self.save(&job)?;
        Ok(job)
    }

    pub fn save(&self, job: &BuildJob) -> Result<(), ServiceError> {
        write_json(&self.job_dir(&job.job_id).join("job.json"), job).map_err(|e| ServiceError::io("job record", e))
    }

    pub fn load(&self, id: &str) -> Result<BuildJob, ServiceError> {
        let valid = id.starts_with("job-") && id[4..].chars().all(|c| c.is_ascii_digit());
        let path = self.job_dir(id).join("job.json");
        if !valid || !path.exists() {
            return Err(ServiceError::NotFound(format!("job {id}")));
        }
        let bytes = fs::read(&path).map_err(|e| ServiceError::io("job record", e))?;
        serde_json::from_slice(&bytes).map_err(|e| ServiceError::CorruptStore(format!("job {id}: {e}")))
    }

    pub fn list(&self) -> Result<Vec<BuildJob>, ServiceError> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)
            .map_err(|e| ServiceError::io("jobs", e))?
            .flatten()
            .map(|e| e.file_name().to_string_lossy().to_string())
            .filter(|n| n.starts_with("job-"))
            .collect();
        ids.sort();
        ids.iter().filter(|id| self.job_dir(id).join("job.json").exists()).map(|id| self.load(id)).collect()
    }

    pub fn write_layer(&self, id: &str, level: u32, nodes: &[CatalogNode]) -> Result<(), ServiceError> {
        jsonl::write_atomic(&self.job_dir(id).join(format!("layer-{level}.jsonl")), nodes)
            .map_err(|e| ServiceError::io("layer record", e))
    }

    /// Consecutive persisted category layers of job `id`, lowest first.
    pub fn read_layers(&self, id: &str) -> Result<Vec<Vec<CatalogNode>>, ServiceError> {
        let mut layers = Vec::new();
        for level in FIRST_CATEGORY_LEVEL.. {
            let path = self.job_dir(id).join(format!("layer-{level}.jsonl"));
            if !path.exists() {
                break;
            }
            let nodes: Vec<CatalogNode> =
                jsonl::read(&path).map_err(|e| ServiceError::CorruptStore(format!("{}: {e}", path.display())))?;
            layers.push(nodes);
        }
        Ok(layers)
    }

    /// Marks pending or running jobs whose process is gone as failed.
    pub fn recover_stale(&self) -> Result<Vec<String>, ServiceError> {
        let me = std::process::id();
        let mut recovered = Vec::new();
        for mut job in self.list()? {
            if job.state.is_terminal() || (job.pid != me && pid_alive(job.pid)) {
                continue;
            }
            job.transition(JobState::Failed)?;
            job.error = Some(format!("interrupted: process {} exited before the build finished", job.pid));
            job.error_code = Some("interrupted".into());
            self.save(&job)?;
            tracing::warn!(job = %job.job_id, "marked interrupted build as failed; it can be resumed");
            recovered.push(job.job_id);
        }
        Ok(recovered)
    }

    /// A live job owned by another process, if any.
    pub fn running_elsewhere(&self) -> Result<Option<BuildJob>, ServiceError> {
        let me = std::process::id();
        Ok(self
            .list()?
            .into_iter()
            .find(|j| !j.state.is_terminal() && j.pid != me && pid_alive(j.pid)))
    }
}
