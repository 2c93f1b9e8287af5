//! Job records and their registry. A job moves queued -> running ->
//! {done, failed} and nowhere else; its iteration counter never decreases.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use stylesteer::backends::LossTerms;
use stylesteer::clock;
use stylesteer::optimizer::OptimizeConfig;
use stylesteer::style_space::PromptSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    FindDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JobProgress {
    /// Completed optimizer iterations.
    pub iteration: usize,
    pub iterations: usize,
    /// Loss after the latest completed iteration.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOutcome {
    /// Stored direction; absent when the search failed.
    pub direction_id: Option<String>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub trace: Vec<LossTerms>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobError {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub prompt: PromptSpec,
    pub config: OptimizeConfig,
    pub progress: JobProgress,
    pub created_at: String,
    pub started_at: Option<String>,
    pub finished_at: Option<String>,
    pub outcome: Option<JobOutcome>,
    pub error: Option<JobError>,
}

fn timestamp() -> String {
    clock::format(&clock::now())
}

#[derive(Default)]
pub struct JobRegistry {
    jobs: Mutex<HashMap<String, Job>>,
}

impl JobRegistry {
    fn with<T>(&self, f: impl FnOnce(&mut HashMap<String, Job>) -> T) -> T {
        f(&mut self.jobs.lock().expect("job registry poisoned"))
    }

    /// Registers a queued job and returns its id.
    pub fn create(&self, prompt: PromptSpec, config: OptimizeConfig) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let job = Job {
            id: id.clone(),
            kind: JobKind::FindDirection,
            state: JobState::Queued,
            progress: JobProgress {
                iteration: 0,
                iterations: config.iterations,
                loss: None,
            },
            prompt,
            config,
            created_at: timestamp(),
            started_at: None,
            finished_at: None,
            outcome: None,
            error: None,
        };
        self.with(|jobs| jobs.insert(id.clone(), job));
        id
    }

    /// Drops a job that never made it into the queue.
    pub fn discard(&self, id: &str) {
        self.with(|jobs| jobs.remove(id));
    }

    pub fn get(&self, id: &str) -> Option<Job> {
        self.with(|jobs| jobs.get(id).cloned())
    }

    /// All jobs, oldest first.
    pub fn all(&self) -> Vec<Job> {
        let mut out: Vec<Job> = self.with(|jobs| jobs.values().cloned().collect());
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then(a.id.cmp(&b.id)));
        out
    }

    /// queued -> running. Returns the job's inputs, or `None` if the job is
    /// unknown or not queued.
    pub fn start(&self, id: &str) -> Option<(PromptSpec, OptimizeConfig)> {
        self.with(|jobs| {
            let job = jobs.get_mut(id)?;
            if job.state != JobState::Queued {
                return None;
            }
            job.state = JobState::Running;
            job.started_at = Some(timestamp());
            Some((job.prompt.clone(), job.config.clone()))
        })
    }

    /// Records progress of a running job; stale updates are ignored.
    pub fn progress(&self, id: &str, iteration: usize, loss: f64) {
        self.with(|jobs| {
            if let Some(job) = jobs.get_mut(id) {
                if job.state == JobState::Running && iteration >= job.progress.iteration {
                    job.progress.iteration = iteration;
                    job.progress.loss = Some(loss);
                }
            }
        })
    }

    /// running -> done or failed.
    pub fn finish(&self, id: &str, outcome: Option<JobOutcome>, error: Option<JobError>) {
        self.with(|jobs| {
            if let Some(job) = jobs.get_mut(id) {
                if job.state != JobState::Running {
                    return;
                }
                job.state = if error.is_none() { JobState::Done } else { JobState::Failed };
                job.finished_at = Some(timestamp());
                if let Some(o) = &outcome {
                    job.progress.iteration = job.progress.iteration.max(o.trace.len());
                    job.progress.loss = Some(o.final_loss);
                }
                job.outcome = outcome;
                job.error = error;
            }
        })
    }

    pub fn counts(&self) -> JobCounts {
        self.with(|jobs| {
            let mut c = JobCounts::default();
            for j in jobs.values() {
                match j.state {
                    JobState::Queued => c.queued += 1,
                    JobState::Running => c.running += 1,
                    JobState::Done => c.done += 1,
                    JobState::Failed => c.failed += 1,
                }
            }
            c
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobCounts {
    pub queued: usize,
    pub running: usize,
    pub done: usize,
    pub failed: usize,
}
