//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the libtest
//! harness so the report prints as-is. Failures only change the exit status when
//! `PJFIT_ACCEPTANCE_STRICT` is set; criteria can be selected by number or name.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use common::oracles;
use pjfit_core::augment::{
    augment_batch, select_low_quality, validate_rewrite, AugmentOptions, FailingClient, MockClient, TemplateSet,
};
use pjfit_core::checkpoint::{load_checkpoint, load_checkpoint_with, save_checkpoint};
use pjfit_core::domain::{CategoryVocab, Dataset, EntityKind, Pair};
use pjfit_core::error::{CheckpointError, Error};
use pjfit_core::metrics::{self, RankedPrediction};
use pjfit_core::model::{score_pair, Ablation, ModelConfig, PjfModel};
use pjfit_core::numerics::{Matrix, SeededRng};
use pjfit_core::ranking::rank_candidates;
use pjfit_core::synth::{generate_dataset, SynthConfig};
use pjfit_core::training::{bpr_loss, evaluate, train, RunConfig};

type Check = Result<String, String>;
/// Checkpoint, train report and eval report bytes.
type Artifacts = (Vec<u8>, Vec<u8>, Vec<u8>);
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn c1_gradients() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failing = Vec::new();
    for seed in 0..20 {
        let r = common::end_to_end_gradcheck(seed, Ablation::None, 0.1);
        worst = worst.max(r.max_rel_error);
        if r.max_rel_error >= 1e-4 {
            failing.push(format!("seed {seed}: {:.2e} at {:?}", r.max_rel_error, r.worst));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(failing.is_empty(), || format!("{} of 20 seeds over 1e-4 ({})", failing.len(), failing.join("; ")))?;
    ensure(secs < 120.0, || format!("took {secs:.1}s (limit 120s)"))?;
    Ok(format!("max relative error {worst:.2e} over 20 seeds, all parameter groups ({secs:.1}s)"))
}

fn c2_metrics() -> Check {
    let mut rng = SeededRng::new(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = 2 + rng.below(199);
        let (s, l, g) = common::metric_instance(&mut rng, n);
        let preds: Vec<RankedPrediction> = s
            .iter()
            .zip(&l)
            .zip(&g)
            .map(|((&score, &label), g)| RankedPrediction { candidate_id: String::new(), job_id: g.clone(), score, label })
            .collect();
        let pairs = [
            (metrics::auc(&s, &l).ok(), oracles::auc(&s, &l)),
            (metrics::gauc(&preds).ok().map(|r| r.value), oracles::gauc(&s, &l, &g)),
            (metrics::average_precision(&s, &l).ok(), oracles::average_precision(&s, &l)),
            (metrics::ndcg(&s, &l).ok(), oracles::ndcg(&s, &l)),
        ];
        for (got, want) in pairs {
            match (got, want) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                other => return Err(format!("definedness differs: {other:?}")),
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation from oracles {worst:.3e}"))?;
    let hand = metrics::ndcg(&[3.0, 2.0, 1.0], &[1, 0, 1]).map_err(|e| e.to_string())?;
    ensure((hand - 0.91972).abs() <= 1e-4, || format!("ndcg hand example {hand}"))?;
    Ok(format!("100 instances, max deviation {worst:.1e}; ndcg example {hand:.5}"))
}

fn c3_loss() -> Check {
    let a = bpr_loss(&[0.37], &[0.37], 0.0).map_err(|e| e.to_string())?.loss;
    let b = bpr_loss(&[1.0], &[0.5], 0.1).map_err(|e| e.to_string())?.loss;
    // Oracle: the formula evaluated directly.
    let want_b = (1.0 + (-0.5f64).exp()).ln() + 0.1 * (1.0 + 0.25);
    ensure((a - std::f64::consts::LN_2).abs() <= 1e-6, || format!("equal scores gave {a}"))?;
    ensure((b - 0.599077).abs() <= 1e-6 && (b - want_b).abs() <= 1e-12, || format!("anchor gave {b}"))?;
    Ok(format!("{a:.6} and {b:.6}"))
}

fn c4_ablation() -> Check {
    let start = Instant::now();
    let run: RunConfig = serde_json::from_str(&std::fs::read_to_string(workspace().join("configs/desk.json")).unwrap())
        .map_err(|e| e.to_string())?;
    let data = generate_dataset(&SynthConfig { seed: 0, ..SynthConfig::default() }).map_err(|e| e.to_string())?;
    let n_pairs = data.metadata.n_train_pairs + data.metadata.n_test_pairs;
    let mut gaps = Vec::new();
    let mut detail = Vec::new();
    for seed in 0..3 {
        let mut aucs = [0.0; 2];
        for (k, ablation) in [Ablation::None, Ablation::NoMoe].into_iter().enumerate() {
            let cfg = run.model.clone().with_ablation(ablation);
            let tc = pjfit_core::training::TrainConfig { seed, ..run.train.clone() };
            let out = train(&data.dataset, &cfg, &tc).map_err(|e| e.to_string())?;
            aucs[k] = evaluate(&out.model, &data.dataset, &data.test).map_err(|e| e.to_string())?.auc;
        }
        gaps.push(aucs[0] - aucs[1]);
        detail.push(format!("seed {seed}: {:.4} vs {:.4}", aucs[0], aucs[1]));
    }
    gaps.sort_by(f64::total_cmp);
    let median = gaps[1];
    let secs = start.elapsed().as_secs_f64();
    ensure(median >= 0.02, || format!("median gap {median:.4} < 0.02 ({})", detail.join("; ")))?;
    ensure(secs < 600.0, || format!("took {secs:.0}s (limit 600s)"))?;
    Ok(format!(
        "{n_pairs} pairs, cosine baseline {:.3}; median AUC gap {median:.4} ({}) in {secs:.0}s",
        data.metadata.cosine_baseline_auc,
        detail.join("; ")
    ))
}

fn c5_gate() -> Check {
    let mut rng = SeededRng::new(5);
    let mut worst_sum: f64 = 0.0;
    for i in 0..10_000u64 {
        let (store, head) = common::random_moe(i % 50);
        let e_c = Matrix::row_vector(&(0..16).map(|_| rng.uniform(-3.0, 3.0)).collect::<Vec<_>>());
        let g = head.gate_weights(&store, &e_c).map_err(|e| e.to_string())?;
        ensure(g.data().iter().all(|&w| w >= 0.0), || format!("negative gate weight at draw {i}"))?;
        worst_sum = worst_sum.max((g.data().iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst_sum <= 1e-9, || format!("gate sum off by {worst_sum:.3e}"))?;
    let mut worst_perm: f64 = 0.0;
    for i in 0..1000u64 {
        let (mut store, head) = common::random_moe(i);
        let x = Matrix::row_vector(&(0..12).map(|_| rng.uniform(-1.0, 1.0)).collect::<Vec<_>>());
        let (cc, jc) = (rng.below(16), rng.below(16));
        let before = head.predict(&store, &x, cc, jc).map_err(|e| e.to_string())?;
        let (a, b) = (rng.below(5), rng.below(5));
        common::swap_experts(&mut store, &head, a, b);
        worst_perm = worst_perm.max((head.predict(&store, &x, cc, jc).map_err(|e| e.to_string())? - before).abs());
    }
    ensure(worst_perm <= 1e-10, || format!("permutation changed output by {worst_perm:.3e}"))?;
    Ok(format!("10000 draws, max |sum-1| {worst_sum:.1e}; 1000 expert swaps, max change {worst_perm:.1e}"))
}

fn c6_augment() -> Check {
    let cfg = SynthConfig { n_candidates: 200, n_jobs: 50, short_jd_fraction: 1.0, applications_per_job: 20, ..SynthConfig::default() };
    let ds = generate_dataset(&cfg).map_err(|e| e.to_string())?.dataset;
    ensure(select_low_quality(ds.jobs(), 200).len() == 50, || "fixture does not have 50 short JDs".into())?;
    let templates = TemplateSet::builtin();
    let opts = AugmentOptions::default();
    let mut summary = Vec::new();
    for (label, failure_rate) in [("mock", 0.0), ("mock+30% failures", 0.3)] {
        let client = FailingClient { inner: MockClient::new(0), failure_rate, seed: 1 };
        let out = augment_batch(&ds, &client, &templates, &opts).map_err(|e| e.to_string())?;
        for r in &out.records {
            let now = &out.dataset.job(&r.job_id).unwrap().text;
            if r.accepted {
                ensure(r.retention >= 0.7 && validate_rewrite(&r.original_text, now).accepted, || {
                    format!("{}: accepted with retention {}", r.job_id, r.retention)
                })?;
            } else {
                ensure(*now == ds.job(&r.job_id).unwrap().text, || format!("{}: rejected record changed text", r.job_id))?;
            }
        }
        let again = augment_batch(&out.dataset, &client, &templates, &opts).map_err(|e| e.to_string())?;
        ensure(again.dataset == out.dataset, || format!("{label}: rerun changed the dataset"))?;
        let failed = out.records.iter().filter(|r| r.completion.is_none()).count();
        summary.push(format!("{label}: {} accepted, {} rejected, {failed} failed", out.accepted(), out.records.len() - out.accepted() - failed));
    }
    Ok(summary.join("; ") + "; reruns idempotent")
}

fn c7_threshold() -> Check {
    let mut entities: Vec<_> = [199, 200, 201]
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut e = common::entity(EntityKind::Job, &format!("j{n}"), 0, vec![0.0], Default::default());
            e.text = if i == 0 { "ü".repeat(n) } else { "a".repeat(n) };
            e
        })
        .collect();
    entities.push(common::entity(EntityKind::Candidate, "c", 0, vec![0.0], Default::default()));
    let ds = Dataset::from_parts(CategoryVocab::default(), 1, entities, vec![]).map_err(|e| e.to_string())?;
    let picked: Vec<&str> = select_low_quality(ds.jobs(), 200).iter().map(|j| j.id.as_str()).collect();
    ensure(picked == ["j199"], || format!("selected {picked:?}"))?;
    Ok("199 selected, 200 and 201 not".into())
}

fn pjfit(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pjfit")).args(args).env("RUST_LOG", "warn").output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("pjfit {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(())
}

fn full_run(dir: &Path) -> Result<Artifacts, String> {
    let ws = workspace();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (raw, aug) = (dir.join("raw"), dir.join("aug"));
    let (ckpt, train_report, eval_report) = (dir.join("model.ckpt"), dir.join("train.json"), dir.join("eval.json"));
    pjfit(&["synth", "--config", &s(&ws.join("configs/synth.json")), "--seed", "0", "--out", &s(&raw)])?;
    pjfit(&["augment", "--data", &s(&raw), "--client", "mock", "--out", &s(&aug)])?;
    pjfit(&[
        "train", "--data", &s(&aug), "--config", &s(&ws.join("configs/desk.json")), "--seed", "0",
        "--checkpoint-out", &s(&ckpt), "--report-out", &s(&train_report),
    ])?;
    pjfit(&["eval", "--data", &s(&aug), "--checkpoint", &s(&ckpt), "--report-out", &s(&eval_report)])?;
    let read = |p: &Path| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    Ok((read(&ckpt)?, read(&train_report)?, read(&eval_report)?))
}

fn c8_determinism() -> Check {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = full_run(a.path())?;
    let second = full_run(b.path())?;
    ensure(first.0 == second.0, || "checkpoints differ".into())?;
    ensure(first.1 == second.1, || "train reports differ".into())?;
    ensure(first.2 == second.2, || "eval reports differ".into())?;
    let train: serde_json::Value = serde_json::from_slice(&first.1).unwrap();
    let eval: serde_json::Value = serde_json::from_slice(&first.2).unwrap();
    ensure(train["metrics"] == eval["metrics"], || "eval does not reproduce the train metrics".into())?;
    Ok(format!(
        "checkpoints ({} bytes) and reports identical; eval reproduces train AUC {:.4} ({:.0}s)",
        first.0.len(),
        train["metrics"]["auc"].as_f64().unwrap_or(f64::NAN),
        start.elapsed().as_secs_f64()
    ))
}

fn c9_checkpoint() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let mut model = PjfModel::new(common::toy_config(Ablation::None), 9).map_err(|e| e.to_string())?;
    common::randomize(&mut model, 9, 1.0);
    save_checkpoint(&model, &path).map_err(|e| e.to_string())?;
    let back = load_checkpoint(&path).map_err(|e| e.to_string())?;
    let mut n = 0;
    for ((_, a), (_, b)) in model.store.iter().zip(back.store.iter()) {
        let same = a.name == b.name
            && a.value.shape() == b.value.shape()
            && a.value.data().iter().zip(b.value.data()).all(|(x, y)| (*x as f32).to_bits() == (*y as f32).to_bits());
        ensure(same, || format!("tensor {} differs", a.name))?;
        n += 1;
    }
    let good = std::fs::read(&path).unwrap();
    let classify = |bytes: &[u8], cfg: Option<&ModelConfig>| -> String {
        std::fs::write(&path, bytes).unwrap();
        let r = match cfg {
            Some(c) => load_checkpoint_with(&path, c),
            None => load_checkpoint(&path),
        };
        match r {
            Err(Error::Checkpoint(CheckpointError::BadMagic { .. })) => "bad-magic".into(),
            Err(Error::Checkpoint(CheckpointError::UnsupportedVersion(_))) => "version".into(),
            Err(Error::Checkpoint(CheckpointError::Truncated { what })) => format!("truncated:{what}"),
            Err(Error::Checkpoint(CheckpointError::ShapeMismatch { .. })) => "shape".into(),
            other => format!("unexpected:{:?}", other.map(|m| m.config)),
        }
    };
    let mut magic = good.clone();
    magic[..4].copy_from_slice(b"NOPE");
    let mut version = good.clone();
    version[4..8].copy_from_slice(&7u32.to_le_bytes());
    let cases = [
        classify(&magic, None),
        classify(&version, None),
        classify(&good[..good.len() - 3], None),
        classify(&good, Some(&ModelConfig::for_embedding_dim(1024))),
    ];
    ensure(cases[0] == "bad-magic" && cases[1] == "version" && cases[3] == "shape", || format!("{cases:?}"))?;
    let last = model.store.iter().last().unwrap().1.name.clone();
    ensure(cases[2].starts_with("truncated") && cases[2].contains(&last), || format!("{cases:?}"))?;
    Ok(format!("{n} tensors bitwise identical at 32 bits; bad magic, version, truncation ({last}) and shape errors distinct"))
}

fn c10_cold_start() -> Check {
    let mut entities: Vec<_> = (0..5)
        .map(|i| common::entity(EntityKind::Candidate, &format!("c{i}"), i, vec![0.1 * i as f64; 8], Default::default()))
        .collect();
    entities.push(common::entity(EntityKind::Job, "j", 2, vec![0.5; 8], Default::default()));
    let pairs = vec![Pair { candidate_id: "c0".into(), job_id: "j".into(), label: 1, ts: 0 }];
    let ds = Dataset::from_parts(CategoryVocab::default(), 8, entities, pairs).map_err(|e| e.to_string())?;
    let ids: Vec<String> = (0..5).map(|i| format!("c{i}")).collect();
    for ablation in Ablation::ALL {
        let model = PjfModel::new(common::toy_config(ablation), 0).map_err(|e| e.to_string())?;
        let s = score_pair(&model, &ds, ds.candidate("c3").unwrap(), ds.job("j").unwrap()).map_err(|e| e.to_string())?;
        ensure(s.is_finite(), || format!("{ablation}: non-finite score"))?;
        let r = rank_candidates(&model, &ds, "j", &ids).map_err(|e| e.to_string())?;
        ensure(r.entries.len() == 5, || format!("{ablation}: ranked {}", r.entries.len()))?;
    }
    Ok("empty-history entities scored and ranked under every model variant".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("gradient integrity", c1_gradients),
        ("metric oracle equivalence", c2_metrics),
        ("loss anchors", c3_loss),
        ("MoE ablation direction", c4_ablation),
        ("gate invariants", c5_gate),
        ("augmentation soundness", c6_augment),
        ("threshold behavior", c7_threshold),
        ("end-to-end determinism", c8_determinism),
        ("checkpoint round trip", c9_checkpoint),
        ("cold start", c10_cold_start),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|x| *x == id || name.contains(x.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {id:>2}. {name}: {detail} [{took:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {id:>2}. {name}: {detail} [{took:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        if std::env::var_os("PJFIT_ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
