//! Rewriting short job descriptions with a completion model.
//!
//! Short JDs are selected by length, a prompt is assembled from the JD and the
//! resumes of candidates who passed its interviews, and the completion
//! replaces the JD only if it passes [`validate_rewrite`].

mod client;
mod keywords;
mod template;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use client::{fnv1a, CompletionClient, FailingClient, HttpClient, MockClient, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
pub use keywords::{keywords, validate_rewrite, RewriteCheck, MIN_RETENTION};
pub use template::{Prompt, PromptTemplate, TemplateSet, DEFAULT_TEMPLATE, MAX_RESUMES, TEMPLATE_FILE};

use crate::domain::{write_jsonl, Dataset, EntityRecord, Stage};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: usize = 200;

/// Jobs whose text is strictly shorter than `threshold` characters, in dataset order.
pub fn select_low_quality<'a>(jobs: impl IntoIterator<Item = &'a EntityRecord>, threshold: usize) -> Vec<&'a EntityRecord> {
    jobs.into_iter().filter(|j| j.text.chars().count() < threshold).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub job_id: String,
    pub original_text: String,
    pub prompt: String,
    /// Absent when the client failed.
    pub completion: Option<String>,
    pub accepted: bool,
    pub retention: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct AugmentOptions {
    pub threshold: usize,
    pub parallelism: usize,
    pub max_resumes: usize,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, parallelism: 4, max_resumes: MAX_RESUMES }
    }
}

#[derive(Debug, Clone)]
pub struct AugmentOutcome {
    pub dataset: Dataset,
    /// One record per selected job, sorted by job id.
    pub records: Vec<AugmentationRecord>,
}

impl AugmentOutcome {
    pub fn accepted(&self) -> usize {
        self.records.iter().filter(|r| r.accepted).count()
    }
}

struct Task {
    job_id: String,
    original: String,
    prompt: Prompt,
}

/// Augments every short, not yet augmented JD. Client failures become
/// rejected records; the original text is kept for them.
pub fn augment_batch(
    dataset: &Dataset,
    client: &dyn CompletionClient,
    templates: &TemplateSet,
    options: &AugmentOptions,
) -> Result<AugmentOutcome> {
    if options.threshold == 0 {
        return Err(Error::Augment("threshold must be positive".into()));
    }
    let tasks: Vec<Task> = select_low_quality(dataset.jobs(), options.threshold)
        .into_iter()
        .filter(|j| !j.augmented)
        .map(|job| {
            let resumes: Vec<&str> = job
                .history(Stage::PassedInterview)
                .iter()
                .rev()
                .filter_map(|id| dataset.candidate(id).map(|c| c.text.as_str()))
                .collect();
            let prompt = templates.for_category(job.category).build(&job.text, &resumes, options.max_resumes);
            Task { job_id: job.id.clone(), original: job.text.clone(), prompt }
        })
        .collect();

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<AugmentationRecord>> = Mutex::new(Vec::with_capacity(tasks.len()));
    let workers = options.parallelism.max(1).min(tasks.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(i) else { break };
                let record = run_task(client, task);
                results.lock().expect("no worker panics while holding the lock").push(record);
            });
        }
    });
    let mut records = results.into_inner().expect("workers finished");
    records.sort_by(|a, b| a.job_id.cmp(&b.job_id));

    let mut out = dataset.clone();
    for r in records.iter().filter(|r| r.accepted) {
        let job = out.job_mut(&r.job_id).expect("selected from this dataset");
        job.original_text = Some(r.original_text.clone());
        job.text = r.completion.clone().expect("accepted records have a completion");
        job.augmented = true;
    }
    Ok(AugmentOutcome { dataset: out, records })
}

fn run_task(client: &dyn CompletionClient, task: &Task) -> AugmentationRecord {
    let base = |completion, accepted, retention, reason| AugmentationRecord {
        job_id: task.job_id.clone(),
        original_text: task.original.clone(),
        prompt: task.prompt.text(),
        completion,
        accepted,
        retention,
        reason,
    };
    match client.complete(&task.prompt) {
        Ok(text) => {
            let check = validate_rewrite(&task.original, &text);
            base(Some(text), check.accepted, check.retention, check.reason)
        }
        Err(e) => {
            log::warn!("augmentation of job `{}` failed: {e}", task.job_id);
            base(None, false, 0.0, format!("client error: {e}"))
        }
    }
}

/// Puts back the pre-augmentation text of every augmented job.
pub fn restore_original_texts(dataset: &Dataset) -> Dataset {
    let mut out = dataset.clone();
    let ids: Vec<String> = dataset.jobs().filter(|j| j.augmented).map(|j| j.id.clone()).collect();
    for id in ids {
        let job = out.job_mut(&id).expect("present");
        if let Some(orig) = job.original_text.take() {
            job.text = orig;
        }
        job.augmented = false;
    }
    out
}

/// Writes the records as JSON lines.
pub fn write_log(path: &Path, records: &[AugmentationRecord]) -> Result<()> {
    write_jsonl(path, records.iter())
}
