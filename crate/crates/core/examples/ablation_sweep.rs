//! Trains every model variant on one synthetic dataset and prints test metrics.
//!
//! ```text
//! cargo run --release -p pjfit-core --example ablation_sweep -- configs/desk.json [dataset-seed] [train-seeds]
//! ```

use pjfit_core::model::Ablation;
use pjfit_core::synth::{generate_dataset, SynthConfig};
use pjfit_core::training::{evaluate, train, RunConfig, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let config = args.get(1).ok_or("usage: ablation_sweep <run-config.json> [dataset-seed] [train-seeds]")?;
    let data_seed: u64 = args.get(2).map_or(Ok(0), |s| s.parse())?;
    let train_seeds: u64 = args.get(3).map_or(Ok(3), |s| s.parse())?;
    let run: RunConfig = serde_json::from_str(&std::fs::read_to_string(config)?)?;

    let synth = SynthConfig { seed: data_seed, embedding_dim: run.model.embedding_dim, ..SynthConfig::default() };
    let data = generate_dataset(&synth)?;
    println!("cosine baseline AUC {:.4}", data.metadata.cosine_baseline_auc);
    for ablation in Ablation::ALL {
        let model = run.model.clone().with_ablation(ablation);
        let dataset = if ablation == Ablation::NoJdAug {
            pjfit_core::augment::restore_original_texts(&data.dataset)
        } else {
            data.dataset.clone()
        };
        for seed in 0..train_seeds {
            let out = train(&dataset, &model, &TrainConfig { seed, ..run.train.clone() })?;
            let m = evaluate(&out.model, &dataset, &data.test)?;
            println!("{ablation:>20} seed {seed}: auc {:.4} gauc {:.4} ndcg {:.4} ap {:.4}", m.auc, m.gauc, m.ndcg, m.ap);
        }
    }
    Ok(())
}
