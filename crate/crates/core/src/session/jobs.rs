use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::settings::Panel;
use crate::control::JobControl;
use crate::nldr::EmbeddingDocument;
use crate::tour::TourPathDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Embedding,
    Tour,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn is_finished(self) -> bool {
        self != JobState::Running
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum JobOutput {
    Embedding(EmbeddingDocument),
    Tour(TourPathDocument),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobStatus {
    pub id: String,
    pub kind: JobKind,
    pub panel: Panel,
    pub state: JobState,
    pub progress: f64,
    /// The result came from the cache without recomputation.
    pub cached: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<JobOutput>,
}

#[derive(Debug)]
struct Outcome {
    state: JobState,
    cached: bool,
    error: Option<String>,
    result: Option<JobOutput>,
}

#[derive(Debug)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub panel: Panel,
    pub control: Arc<JobControl>,
    outcome: Mutex<Outcome>,
    finished: Condvar,
}

impl Job {
    fn new(kind: JobKind, panel: Panel) -> Self {
        Self {
            id: uuid::Uuid::new_v4().to_string(),
            kind,
            panel,
            control: Arc::new(JobControl::new()),
            outcome: Mutex::new(Outcome {
                state: JobState::Running,
                cached: false,
                error: None,
                result: None,
            }),
            finished: Condvar::new(),
        }
    }

    pub fn status(&self) -> JobStatus {
        let o = self.outcome.lock().expect("job lock");
        JobStatus {
            id: self.id.clone(),
            kind: self.kind,
            panel: self.panel,
            state: o.state,
            progress: if o.state == JobState::Done { 1.0 } else { self.control.progress() },
            cached: o.cached,
            error: o.error.clone(),
            result: o.result.clone(),
        }
    }

    pub fn state(&self) -> JobState {
        self.outcome.lock().expect("job lock").state
    }

    /// Records the final state. Returns false when the job had already
    /// finished.
    pub(crate) fn finish(&self, state: JobState, result: Option<JobOutput>, error: Option<String>, cached: bool) -> bool {
        let mut o = self.outcome.lock().expect("job lock");
        if o.state.is_finished() {
            return false;
        }
        *o = Outcome {
            state,
            cached,
            error,
            result,
        };
        self.finished.notify_all();
        true
    }

    /// Blocks until the job finishes or `timeout` elapses.
    pub fn wait(&self, timeout: Duration) -> JobStatus {
        let guard = self.outcome.lock().expect("job lock");
        let (guard, _) = self
            .finished
            .wait_timeout_while(guard, timeout, |o| !o.state.is_finished())
            .expect("job lock");
        drop(guard);
        self.status()
    }
}

/// All jobs of a session, with at most one running job per kind and panel.
#[derive(Debug, Default)]
pub struct JobTable {
    jobs: Mutex<HashMap<String, Arc<Job>>>,
    active: Mutex<HashMap<(JobKind, Panel), Arc<Job>>>,
}

impl JobTable {
    /// Registers a new job and cancels the one it supersedes, returning the
    /// superseded job if it was still running.
    pub fn start(&self, kind: JobKind, panel: Panel) -> (Arc<Job>, Option<Arc<Job>>) {
        let job = Arc::new(Job::new(kind, panel));
        self.jobs.lock().expect("jobs lock").insert(job.id.clone(), job.clone());
        let old = self.active.lock().expect("jobs lock").insert((kind, panel), job.clone());
        let superseded = old.filter(|old| {
            old.control.cancel();
            old.finish(JobState::Cancelled, None, None, false)
        });
        (job, superseded)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Job>> {
        self.jobs.lock().expect("jobs lock").get(id).cloned()
    }

    /// True while `job` is the latest one for its kind and panel.
    pub fn is_current(&self, job: &Job) -> bool {
        self.active
            .lock()
            .expect("jobs lock")
            .get(&(job.kind, job.panel))
            .is_some_and(|j| j.id == job.id)
    }

    pub fn cancel(&self, id: &str) -> Option<JobStatus> {
        let job = self.get(id)?;
        job.control.cancel();
        job.finish(JobState::Cancelled, None, None, false);
        Some(job.status())
    }

    pub fn cancel_all(&self) {
        for job in self.jobs.lock().expect("jobs lock").values() {
            job.control.cancel();
            job.finish(JobState::Cancelled, None, None, false);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_job_supersedes_old() {
        let table = JobTable::default();
        let (a, none) = table.start(JobKind::Embedding, Panel::Left);
        assert!(none.is_none());
        let (other, _) = table.start(JobKind::Embedding, Panel::Right);
        let (b, superseded) = table.start(JobKind::Embedding, Panel::Left);
        assert_eq!(superseded.unwrap().id, a.id);
        assert!(a.control.is_cancelled());
        assert_eq!(a.state(), JobState::Cancelled);
        assert!(!other.control.is_cancelled());
        assert!(table.is_current(&b));
        assert!(!table.is_current(&a));
        assert!(!a.finish(JobState::Done, None, None, false));
        assert!(b.finish(JobState::Done, None, None, true));
        let s = b.wait(Duration::from_millis(1));
        assert_eq!(s.state, JobState::Done);
        assert!(s.cached);
        assert_eq!(s.progress, 1.0);
    }

    #[test]
    fn cancel_by_id() {
        let table = JobTable::default();
        let (a, _) = table.start(JobKind::Tour, Panel::Left);
        assert_eq!(table.cancel(&a.id).unwrap().state, JobState::Cancelled);
        assert!(table.cancel("missing").is_none());
    }
}
