use std::path::Path;
use std::time::Instant;

use pjfit_core::augment::{
    augment_batch, restore_original_texts, write_log, AugmentOptions, CompletionClient, FailingClient, HttpClient,
    MockClient, TemplateSet,
};
use pjfit_core::checkpoint::{load_checkpoint, save_checkpoint};
use pjfit_core::domain::{validate_records, CategoryVocab, DataDir, Dataset, Pair};
use pjfit_core::error::{Error, Result};
use pjfit_core::model::{Ablation, ModelConfig};
use pjfit_core::ranking::rank_candidates;
use pjfit_core::synth::{generate_dataset, write_synth, SynthConfig};
use pjfit_core::training::{evaluate, train as train_model, RunConfig};

use crate::report::{version, write_json, RunReport, TrainingSummary};

pub const AUGMENT_LOG: &str = "augment_log.jsonl";

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_data(dir: &Path) -> Result<(Dataset, Vec<Pair>)> {
    let vocab = CategoryVocab::default();
    DataDir::new(dir).load(&vocab, None)
}

pub fn synth(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg: SynthConfig = match config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let generated = generate_dataset(&cfg)?;
    write_synth(&generated, out)?;
    let m = &generated.metadata;
    log::info!(
        "wrote {} candidates, {} jobs, {} train / {} test pairs to {} (cosine baseline AUC {:.4})",
        m.n_candidates,
        m.n_jobs,
        m.n_train_pairs,
        m.n_test_pairs,
        out.display(),
        m.cosine_baseline_auc
    );
    Ok(())
}

pub enum ClientChoice {
    Mock { seed: u64, failure_rate: f64 },
    Http,
}

/// Writes `bytes` next to `path` and renames over it.
fn replace_file(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    write(&tmp)?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn augment(
    data: &Path,
    template_dir: Option<&Path>,
    threshold: usize,
    client: ClientChoice,
    parallelism: usize,
    out: &Path,
) -> Result<()> {
    if threshold == 0 || parallelism == 0 {
        return Err(Error::Config("--threshold and --parallelism must be positive".into()));
    }
    let (dataset, test) = load_data(data)?;
    let templates = match template_dir {
        Some(d) => TemplateSet::load_dir(d, &dataset.vocab)?,
        None => TemplateSet::builtin(),
    };
    let client: Box<dyn CompletionClient> = match client {
        ClientChoice::Mock { seed, failure_rate } if failure_rate > 0.0 => {
            Box::new(FailingClient { inner: MockClient::new(seed), failure_rate, seed })
        }
        ClientChoice::Mock { seed, .. } => Box::new(MockClient::new(seed)),
        ClientChoice::Http => Box::new(HttpClient::from_env()?),
    };
    let started = Instant::now();
    let options = AugmentOptions { threshold, parallelism, ..AugmentOptions::default() };
    let outcome = augment_batch(&dataset, client.as_ref(), &templates, &options)?;
    let failed = outcome.records.iter().filter(|r| r.completion.is_none()).count();
    log::info!(
        "{} JDs selected, {} accepted, {} rejected, {} failed in {:.2}s",
        outcome.records.len(),
        outcome.accepted(),
        outcome.records.len() - outcome.accepted() - failed,
        failed,
        started.elapsed().as_secs_f64()
    );

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let src = DataDir::new(data);
    let dst = DataDir::new(out);
    replace_file(&dst.entities(), |p| outcome.dataset.write_entities(p))?;
    replace_file(&dst.train(), |p| pjfit_core::domain::write_pairs(p, &outcome.dataset.pairs))?;
    if src.test().exists() {
        replace_file(&dst.test(), |p| pjfit_core::domain::write_pairs(p, &test))?;
    }
    if src.metadata().exists() && src.metadata() != dst.metadata() {
        replace_file(&dst.metadata(), |p| std::fs::copy(src.metadata(), p).map(|_| ()).map_err(|e| Error::io(p, e)))?;
    }
    replace_file(&out.join(AUGMENT_LOG), |p| write_log(p, &outcome.records))
}

fn run_config(path: Option<&Path>, dataset: &Dataset) -> Result<RunConfig> {
    let cfg = match path {
        Some(p) => read_json(p)?,
        None => RunConfig { model: ModelConfig::for_embedding_dim(dataset.embedding_dim), ..RunConfig::default() },
    };
    if cfg.model.embedding_dim != dataset.embedding_dim {
        return Err(Error::Config(format!(
            "config embedding_dim {} does not match the dataset's {}",
            cfg.model.embedding_dim, dataset.embedding_dim
        )));
    }
    if dataset.vocab.len() != cfg.model.n_categories {
        return Err(Error::Config(format!(
            "config n_categories {} does not match the vocabulary size {}",
            cfg.model.n_categories,
            dataset.vocab.len()
        )));
    }
    Ok(cfg)
}

/// The dataset view a model variant trains and evaluates on.
fn view_for(ablation: Ablation, dataset: Dataset) -> Dataset {
    if ablation == Ablation::NoJdAug {
        restore_original_texts(&dataset)
    } else {
        dataset
    }
}

pub fn train(
    data: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    ablation: Option<Ablation>,
    checkpoint_out: &Path,
    report_out: &Path,
) -> Result<()> {
    let (dataset, test) = load_data(data)?;
    let mut cfg = run_config(config, &dataset)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let Some(a) = ablation {
        cfg.model.ablation = a;
    }
    let dataset = view_for(cfg.model.ablation, dataset);
    let started = Instant::now();
    let mut outcome = train_model(&dataset, &cfg.model, &cfg.train)?;
    log::info!("trained {} batches in {:.2}s", outcome.loss_trace.len(), started.elapsed().as_secs_f64());
    // Evaluate exactly what the checkpoint stores.
    outcome.model.store.round_to_f32();
    save_checkpoint(&outcome.model, checkpoint_out)?;
    let metrics = if test.is_empty() { None } else { Some(evaluate(&outcome.model, &dataset, &test)?) };
    if let Some(m) = &metrics {
        log::info!("test AUC {:.4} GAUC {:.4} NDCG {:.4} AP {:.4}", m.auc, m.gauc, m.ndcg, m.ap);
    }
    let trace = outcome.loss_trace;
    let report = RunReport {
        version: version(),
        command: "train",
        seed: Some(cfg.train.seed),
        model: cfg.model,
        train: Some(cfg.train.clone()),
        metrics,
        training: Some(TrainingSummary {
            batches: trace.len(),
            initial_batch_loss: trace.first().copied().unwrap_or(f64::NAN),
            final_batch_loss: trace.last().copied().unwrap_or(f64::NAN),
            probe_loss_before: outcome.probe_loss_before,
            probe_loss_after: outcome.probe_loss_after,
            skipped_positives: outcome.skipped_positives,
            loss_trace: trace,
        }),
        dataset: validate_records(&dataset, cfg.train.short_jd_threshold),
    };
    write_json(report_out, &report)
}

pub fn eval(data: &Path, checkpoint: &Path, report_out: &Path) -> Result<()> {
    let model = load_checkpoint(checkpoint)?;
    let (dataset, test) = load_data(data)?;
    if dataset.embedding_dim != model.config.embedding_dim {
        return Err(Error::Config(format!(
            "checkpoint embedding_dim {} does not match the dataset's {}",
            model.config.embedding_dim, dataset.embedding_dim
        )));
    }
    let dataset = view_for(model.config.ablation, dataset);
    let started = Instant::now();
    let metrics = evaluate(&model, &dataset, &test)?;
    eprintln!("scored {} pairs in {:.3}s", test.len(), started.elapsed().as_secs_f64());
    log::info!("test AUC {:.4} GAUC {:.4} NDCG {:.4} AP {:.4}", metrics.auc, metrics.gauc, metrics.ndcg, metrics.ap);
    let report = RunReport {
        version: version(),
        command: "eval",
        seed: None,
        model: model.config.clone(),
        train: None,
        metrics: Some(metrics),
        training: None,
        dataset: validate_records(&dataset, 200),
    };
    write_json(report_out, &report)
}

pub fn rank(job: &str, checkpoint: &Path, data: &Path, candidates: &[String], out: &Path) -> Result<()> {
    let model = load_checkpoint(checkpoint)?;
    let (dataset, _) = load_data(data)?;
    let ids: Vec<String> = if candidates.is_empty() {
        dataset.candidates().map(|c| c.id.clone()).collect()
    } else {
        candidates.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    };
    let started = Instant::now();
    let ranking = rank_candidates(&model, &dataset, job, &ids)?;
    let elapsed = started.elapsed();
    eprintln!(
        "ranked {} candidates for {job} in {:.3} ms ({:.3} ms per candidate)",
        ranking.entries.len(),
        elapsed.as_secs_f64() * 1e3,
        elapsed.as_secs_f64() * 1e3 / ranking.entries.len().max(1) as f64
    );
    ranking.write_tsv(out)
}
