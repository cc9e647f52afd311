#![allow(dead_code)]

pub mod oracles;

use pjfit_core::domain::{CategoryVocab, Dataset, EntityKind, EntityRecord, Pair, PairEntry};
use pjfit_core::model::{Ablation, FeatureCache, ModelConfig, PjfModel};
use pjfit_core::moe::{MoeHead, MoeShape};
use pjfit_core::numerics::{finite_diff_check, GradCheckOptions, GradCheckReport, ParamStore, SeededRng};
use pjfit_core::training::batch_loss;

/// d_model = 8, two heads, sequences of 4, three experts.
pub fn toy_config(ablation: Ablation) -> ModelConfig {
    ModelConfig {
        embedding_dim: 8,
        heads: 2,
        seq_len: 4,
        fusion_hidden: 12,
        fusion_out: 6,
        n_categories: 16,
        category_dim: 8,
        gate_hidden: 10,
        n_experts: 3,
        expert_hidden: [10, 6],
        ablation,
    }
}

pub fn entity(kind: EntityKind, id: &str, category: usize, embedding: Vec<f64>, history: [Vec<String>; 3]) -> EntityRecord {
    EntityRecord {
        id: id.to_string(),
        kind,
        text: format!("{} {id}", kind.as_str()),
        category,
        embedding,
        history,
        augmented: false,
        original_text: None,
    }
}

/// Random entities with non-empty histories (some longer than the toy sequence length).
pub fn toy_dataset(seed: u64, dim: usize) -> Dataset {
    let mut rng = SeededRng::new(seed);
    let (nc, nj) = (7, 5);
    let cids: Vec<String> = (0..nc).map(|i| format!("c{i}")).collect();
    let jids: Vec<String> = (0..nj).map(|i| format!("j{i}")).collect();
    let hist = |rng: &mut SeededRng, pool: &[String]| -> [Vec<String>; 3] {
        std::array::from_fn(|_| (0..1 + rng.below(6)).map(|_| pool[rng.below(pool.len())].clone()).collect())
    };
    let mut entities = Vec::new();
    for id in &cids {
        let h = hist(&mut rng, &jids);
        let e = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        entities.push(entity(EntityKind::Candidate, id, rng.below(16), e, h));
    }
    for id in &jids {
        let h = hist(&mut rng, &cids);
        let e = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        entities.push(entity(EntityKind::Job, id, rng.below(16), e, h));
    }
    let pairs = (0..nj)
        .map(|j| Pair { candidate_id: cids[j].clone(), job_id: jids[j].clone(), label: 1, ts: j as i64 })
        .collect();
    Dataset::from_parts(CategoryVocab::default(), dim, entities, pairs).unwrap()
}

pub fn toy_entries(ds: &Dataset) -> Vec<PairEntry> {
    let n = ds.num_candidates();
    ds.pairs
        .iter()
        .enumerate()
        .map(|(i, p)| PairEntry {
            positive: p.clone(),
            negative: Pair {
                candidate_id: ds.candidate_at((i + 3) % n).id.clone(),
                job_id: p.job_id.clone(),
                label: 0,
                ts: p.ts,
            },
        })
        .collect()
}

/// Replaces every parameter (biases included) with uniform noise so that no
/// unit sits at a ReLU kink by construction.
pub fn randomize(model: &mut PjfModel, seed: u64, scale: f64) {
    let mut rng = SeededRng::new(seed ^ 0x5eed);
    for p in model.store.params_mut() {
        for v in p.value.data_mut() {
            *v = rng.uniform(-scale, scale);
        }
    }
}

/// Analytic gradient of the batch BPR loss against central differences.
pub fn end_to_end_gradcheck(seed: u64, ablation: Ablation, lambda: f64) -> GradCheckReport {
    let cfg = toy_config(ablation);
    let ds = toy_dataset(seed, cfg.embedding_dim);
    let entries = toy_entries(&ds);
    let mut model = PjfModel::new(cfg.clone(), seed).unwrap();
    randomize(&mut model, seed, 0.5);
    let cache = FeatureCache::build(&ds, cfg.seq_len).unwrap();
    let layout = model.layout.clone();
    let mut grads = model.store.grad_buffer();
    batch_loss(&layout, &model.store, &ds, &cache, &entries, lambda, Some(&mut grads)).unwrap();
    model.store.zero_grads();
    model.store.accumulate(&grads).unwrap();
    finite_diff_check(
        &mut model.store,
        |s| batch_loss(&layout, s, &ds, &cache, &entries, lambda, None).unwrap(),
        &GradCheckOptions { step: 1e-5, max_coords_per_param: None, seed },
    )
}

/// Scores on a coarse grid (so ties occur), labels with both classes, and up to five groups.
pub fn metric_instance(rng: &mut SeededRng, n: usize) -> (Vec<f64>, Vec<u8>, Vec<String>) {
    let n = n.max(2);
    let grid = 1 + rng.below(40);
    let scores: Vec<f64> = (0..n).map(|_| rng.below(grid) as f64 / grid as f64).collect();
    let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.chance(0.3))).collect();
    labels[0] = 1;
    labels[1] = 0;
    let n_groups = 1 + rng.below(5);
    let groups = (0..n).map(|_| format!("j{}", rng.below(n_groups))).collect();
    (scores, labels, groups)
}

pub fn moe_shape() -> MoeShape {
    MoeShape { n_categories: 16, category_dim: 8, gate_hidden: 32, n_experts: 5, input_dim: 12, expert_hidden: [16, 8] }
}

/// A MoE head whose biases are random too, so no parameter is trivially zero.
pub fn random_moe(seed: u64) -> (ParamStore, MoeHead) {
    let mut rng = SeededRng::new(seed);
    let mut store = ParamStore::new();
    let head = MoeHead::new(&mut store, "moe", moe_shape(), false, &mut rng);
    for p in store.params_mut() {
        for v in p.value.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
    }
    (store, head)
}

/// Swaps experts `a` and `b` together with their gate output columns.
pub fn swap_experts(store: &mut ParamStore, head: &MoeHead, a: usize, b: usize) {
    for (la, lb) in head.experts[a].layers.iter().zip(&head.experts[b].layers) {
        for (pa, pb) in [(la.w, lb.w), (la.b, lb.b)] {
            let va = store.value(pa).clone();
            let vb = std::mem::replace(store.value_mut(pb), va);
            *store.value_mut(pa) = vb;
        }
    }
    let last = head.gate.layers.last().unwrap();
    for id in [last.w, last.b] {
        let m = store.value_mut(id);
        for r in 0..m.rows() {
            let row = m.row_mut(r);
            row.swap(a, b);
        }
    }
}
