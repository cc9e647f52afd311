mod common;

use pjfit_core::checkpoint::{
    decode_raw, encode_checkpoint, load_checkpoint, load_checkpoint_with, save_checkpoint, FORMAT_VERSION, MAGIC,
};
use pjfit_core::domain::{CategoryVocab, Dataset, EntityKind, Pair};
use pjfit_core::error::{CheckpointError, DataError, Error};
use pjfit_core::metrics;
use pjfit_core::model::{score_pair, Ablation, ModelConfig, PjfModel};
use pjfit_core::ranking::rank_candidates;
use pjfit_core::synth::{generate_dataset, SynthConfig, SynthOutput};
use pjfit_core::training::{evaluate, predict, train, TrainConfig};

fn small_synth(seed: u64) -> SynthOutput {
    generate_dataset(&SynthConfig {
        n_candidates: 240,
        n_jobs: 48,
        embedding_dim: 16,
        applications_per_job: 24,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn small_model(ablation: Ablation) -> ModelConfig {
    ModelConfig::for_embedding_dim(16).with_ablation(ablation)
}

fn fast(seed: u64) -> TrainConfig {
    TrainConfig { batch_size: 32, learning_rate: 1e-3, epochs: 1, seed, ..TrainConfig::default() }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = small_synth(0);
    let cfg = small_model(Ablation::None);
    let out = train(&data.dataset, &cfg, &TrainConfig { learning_rate: 0.0, ..fast(0) }).unwrap();
    let fresh = PjfModel::new(cfg, 0).unwrap();
    assert!(!out.loss_trace.is_empty());
    for ((_, a), (_, b)) in out.model.store.iter().zip(fresh.store.iter()) {
        assert_eq!(a.value, b.value, "{}", a.name);
    }
}

#[test]
fn same_seed_is_bitwise_reproducible() {
    let data = small_synth(1);
    let a = train(&data.dataset, &small_model(Ablation::None), &fast(5)).unwrap();
    let b = train(&data.dataset, &small_model(Ablation::None), &fast(5)).unwrap();
    assert_eq!(a.loss_trace.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.loss_trace.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    assert_eq!(encode_checkpoint(&a.model.store, &a.model.config), encode_checkpoint(&b.model.store, &b.model.config));
    for ((_, p), (_, q)) in a.model.store.iter().zip(b.model.store.iter()) {
        assert!(p.value.data().iter().zip(q.value.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn training_reduces_loss_on_seed_zero() {
    let data = small_synth(0);
    let out = train(&data.dataset, &small_model(Ablation::None), &TrainConfig { epochs: 2, ..fast(0) }).unwrap();
    assert!(out.probe_loss_after < out.probe_loss_before, "{} -> {}", out.probe_loss_before, out.probe_loss_after);
    let n = out.loss_trace.len();
    let head: f64 = out.loss_trace[..5].iter().sum::<f64>() / 5.0;
    let tail: f64 = out.loss_trace[n - 5..].iter().sum::<f64>() / 5.0;
    assert!(tail < head);
}

#[test]
fn every_ablation_trains_and_reports_finite_metrics() {
    let data = small_synth(2);
    for ablation in Ablation::ALL {
        let out = train(&data.dataset, &small_model(ablation), &fast(0)).unwrap();
        let r = evaluate(&out.model, &data.dataset, &data.test).unwrap();
        for v in [r.auc, r.gauc, r.ndcg, r.ap] {
            assert!(v.is_finite() && (0.0..=1.0).contains(&v), "{ablation}: {r:?}");
        }
        assert_eq!(r.n_predictions, data.test.len());
    }
}

#[test]
fn identical_scores_give_half_auc() {
    let labels = [1, 0, 1, 0, 0, 1];
    assert_eq!(metrics::auc(&[0.3; 6], &labels).unwrap(), 0.5);
}

#[test]
fn predictions_follow_input_order_and_reject_unknown_ids() {
    let data = small_synth(3);
    let model = PjfModel::new(small_model(Ablation::None), 0).unwrap();
    let preds = predict(&model, &data.dataset, &data.test[..20]).unwrap();
    for (p, q) in preds.iter().zip(&data.test) {
        assert_eq!((&p.candidate_id, &p.job_id, p.label), (&q.candidate_id, &q.job_id, q.label));
        let s = score_pair(&model, &data.dataset, data.dataset.candidate(&q.candidate_id).unwrap(), data.dataset.job(&q.job_id).unwrap()).unwrap();
        assert_eq!(s, p.score);
    }
    let bad = [Pair { candidate_id: "ghost".into(), job_id: data.test[0].job_id.clone(), label: 1, ts: 0 }];
    assert!(predict(&model, &data.dataset, &bad).is_err());
    assert!(evaluate(&model, &data.dataset, &[]).is_err());
}

/// Two categories with fixed, opposite embeddings; positives are same-category.
fn separable() -> (Dataset, Vec<Pair>) {
    let (a, b) = (8, 0);
    let emb = |cat: usize| if cat == a { vec![1.0, 0.0, 0.5, 0.0] } else { vec![0.0, 1.0, 0.0, 0.5] };
    let mut entities = Vec::new();
    for i in 0..12 {
        let cat = if i % 2 == 0 { a } else { b };
        entities.push(common::entity(EntityKind::Candidate, &format!("c{i:02}"), cat, emb(cat), Default::default()));
    }
    for j in 0..4 {
        let cat = if j % 2 == 0 { a } else { b };
        entities.push(common::entity(EntityKind::Job, &format!("j{j}"), cat, emb(cat), Default::default()));
    }
    let mut train_pairs = Vec::new();
    let mut test = Vec::new();
    let mut ts = 0;
    for j in 0..4usize {
        for i in 0..12usize {
            let label = u8::from(i % 2 == j % 2);
            let p = Pair { candidate_id: format!("c{i:02}"), job_id: format!("j{j}"), label, ts };
            ts += 1;
            if i < 8 {
                train_pairs.push(p);
            } else {
                test.push(p);
            }
        }
    }
    for p in &mut test {
        p.ts += 1000;
    }
    let ds = Dataset::from_parts(CategoryVocab::default(), 4, entities, train_pairs).unwrap();
    (ds, test)
}

fn separable_config() -> ModelConfig {
    ModelConfig { embedding_dim: 4, fusion_hidden: 8, fusion_out: 4, expert_hidden: [8, 4], ..common::toy_config(Ablation::None) }
}

fn train_separable() -> (Dataset, Vec<Pair>, PjfModel) {
    let (ds, test) = separable();
    let cfg = TrainConfig { batch_size: 8, learning_rate: 1e-2, epochs: 40, lambda_reg: 0.01, ..TrainConfig::default() };
    let out = train(&ds, &separable_config(), &cfg).unwrap();
    (ds, test, out.model)
}

#[test]
fn separable_fixture_reaches_perfect_auc_and_ranks_match_first() {
    let (ds, test, model) = train_separable();
    let r = evaluate(&model, &ds, &test).unwrap();
    assert_eq!(r.auc, 1.0, "{r:?}");
    assert_eq!(r.gauc, 1.0);

    // j0 is category A: even candidates match.
    let ids: Vec<String> = ["c09", "c08", "c11"].map(String::from).to_vec();
    let ranking = rank_candidates(&model, &ds, "j0", &ids).unwrap();
    assert_eq!(ranking.entries[0].candidate_id, "c08");
    let single = rank_candidates(&model, &ds, "j0", &ids[..1]).unwrap();
    assert_eq!(single.entries.len(), 1);
}

#[test]
fn ranking_dedupes_and_lists_unknown_ids() {
    let data = small_synth(4);
    let model = PjfModel::new(small_model(Ablation::None), 0).unwrap();
    let job = data.dataset.job_at(0).id.clone();
    let c0 = data.dataset.candidate_at(0).id.clone();
    let c1 = data.dataset.candidate_at(1).id.clone();
    let r = rank_candidates(&model, &data.dataset, &job, &[c0.clone(), c1.clone(), c0.clone()]).unwrap();
    assert_eq!(r.entries.len(), 2);
    assert_eq!(r.duplicates, vec![c0.clone()]);
    assert!(r.entries[0].score >= r.entries[1].score);
    let tsv = r.to_tsv();
    assert!(tsv.starts_with("rank\tcandidate_id\tscore\n1\t"));
    assert_eq!(tsv.lines().count(), 3);

    let err = rank_candidates(&model, &data.dataset, "nojob", &[c0, "x1".into(), "x2".into()]).unwrap_err();
    match err {
        Error::Data(DataError::UnknownIds { ids }) => assert_eq!(ids, ["job:nojob", "candidate:x1", "candidate:x2"]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn cold_start_entities_are_scorable() {
    let mut entities = vec![
        common::entity(EntityKind::Candidate, "new_c", 3, vec![0.2; 8], Default::default()),
        common::entity(EntityKind::Candidate, "old_c", 3, vec![0.1; 8], [vec!["old_j".into()], vec![], vec![]]),
        common::entity(EntityKind::Job, "new_j", 3, vec![0.3; 8], Default::default()),
        common::entity(EntityKind::Job, "old_j", 3, vec![-0.3; 8], [vec!["old_c".into()], vec![], vec![]]),
    ];
    entities[0].text = "fresh graduate".into();
    let ds = Dataset::from_parts(CategoryVocab::default(), 8, entities, vec![]).unwrap();
    for ablation in Ablation::ALL {
        let model = PjfModel::new(common::toy_config(ablation), 1).unwrap();
        let s = score_pair(&model, &ds, ds.candidate("new_c").unwrap(), ds.job("new_j").unwrap()).unwrap();
        assert!(s.is_finite());
        let r = rank_candidates(&model, &ds, "new_j", &["new_c".into(), "old_c".into()]).unwrap();
        assert_eq!(r.entries.len(), 2);
    }
}

#[test]
fn checkpoint_round_trip_through_files() {
    let (ds, test, mut model) = train_separable();
    model.store.round_to_f32();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&model, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.config, model.config);
    for ((_, a), (_, b)) in model.store.iter().zip(back.store.iter()) {
        assert_eq!(a.name, b.name);
        assert!(a.value.data().iter().zip(b.value.data()).all(|(x, y)| (*x as f32).to_bits() == (*y as f32).to_bits()));
    }
    assert_eq!(evaluate(&model, &ds, &test).unwrap(), evaluate(&back, &ds, &test).unwrap());

    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), FORMAT_VERSION);
    let (_, tensors) = decode_raw(&bytes).unwrap();
    assert_eq!(tensors.len(), model.store.len());
}

fn ckpt_err(r: Result<PjfModel, Error>) -> CheckpointError {
    match r {
        Err(Error::Checkpoint(e)) => e,
        other => panic!("expected a checkpoint error, got {:?}", other.map(|m| m.config)),
    }
}

#[test]
fn corrupted_checkpoints_raise_distinct_errors() {
    let model = PjfModel::new(common::toy_config(Ablation::None), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&model, &path).unwrap();
    let good = std::fs::read(&path).unwrap();

    let mut bad = good.clone();
    bad[0] = b'X';
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(ckpt_err(load_checkpoint(&path)), CheckpointError::BadMagic { .. }));

    let mut bad = good.clone();
    bad[4..8].copy_from_slice(&99u32.to_le_bytes());
    std::fs::write(&path, &bad).unwrap();
    assert_eq!(ckpt_err(load_checkpoint(&path)), CheckpointError::UnsupportedVersion(99));

    std::fs::write(&path, &good[..good.len() - 10]).unwrap();
    match ckpt_err(load_checkpoint(&path)) {
        CheckpointError::Truncated { what } => {
            let last = model.store.iter().last().unwrap().1.name.clone();
            assert!(what.contains(&last), "{what}");
        }
        other => panic!("{other:?}"),
    }

    std::fs::write(&path, &good).unwrap();
    let big = ModelConfig::for_embedding_dim(1024);
    assert!(matches!(ckpt_err(load_checkpoint_with(&path, &big)), CheckpointError::ShapeMismatch { .. }));

    let other_head = common::toy_config(Ablation::NoMoe);
    assert!(matches!(
        ckpt_err(load_checkpoint_with(&path, &other_head)),
        CheckpointError::UnexpectedTensor(_) | CheckpointError::MissingTensor(_)
    ));

    assert!(matches!(load_checkpoint(&dir.path().join("absent")), Err(Error::Io { .. })));
}
