//! Matrix attention against the BiAtt head, each with and without attention
//! supervision, on the same synthetic split.
//!
//! cargo run --release --example compare_heads

use biatt::data::{self, PrepareOptions, ResolvedPost, Split};
use biatt::models::HeadKind;
use biatt::synthetic::{self, SynthConfig};
use biatt::training::{self, TrainConfig};

fn main() -> biatt::Result<()> {
    let raw = synthetic::generate(&SynthConfig {
        posts: 500,
        seed: 3,
        ..SynthConfig::default()
    })?;
    let dir = std::env::temp_dir().join("biatt_compare_heads");
    std::fs::create_dir_all(&dir).map_err(|e| biatt::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let path = dir.join("dataset.json");
    data::write_dataset(&path, &raw)?;
    let opts = PrepareOptions {
        embedding_dim: 32,
        ..PrepareOptions::default()
    };
    let vectors = dir.join("vectors.txt");
    synthetic::write_embeddings(&vectors, 32, 0.95, 1)?;
    let (prepared, _) = data::prepare(data::parse_dataset(&path)?, Some(&vectors), &opts)?;
    let (train, val) = (prepared.split(Split::Train), prepared.split(Split::Val));
    let test = prepared.split(Split::Test);

    println!(
        "{:<8} {:>6} {:>10} {:>12} {:>10}",
        "head", "lambda", "test F1", "val att CE", "flat TV"
    );
    for head in [HeadKind::Matrix, HeadKind::BiAtt] {
        for lambda in [0.0, 100.0] {
            let mut config = TrainConfig {
                head_kind: head,
                lambda,
                epochs: 8,
                learning_rate: 0.005,
                seed: 1,
                ..TrainConfig::default()
            };
            config.encoder.hidden_units = 32;
            config.encoder.embedding_dim = 32;
            let out = training::train(&config, &train, &val, prepared.vocab.len(), Some(&prepared.embeddings))?;
            let scores = training::validate(&out.model, &val)?;
            let f1 = training::validate(&out.model, &test)?.macro_f1;
            let tv = mean_flat_tv(&out.model, &val)?;
            println!(
                "{head:<8?} {lambda:>6} {f1:>10.4} {:>12.4} {tv:>10.4}",
                scores.attention_loss
            );
        }
    }
    Ok(())
}

/// Total variation of predicted attention over runs of equal ground truth,
/// averaged over posts. Lower means smoother attention where the target is flat.
fn mean_flat_tv(model: &biatt::models::Model<f32>, posts: &[&ResolvedPost]) -> biatt::Result<f64> {
    let mut total = 0.0;
    for p in posts {
        let att = model.forward(&p.token_ids)?.attention;
        total += (1..att.len())
            .filter(|&i| p.gt_attention[i] == p.gt_attention[i - 1])
            .map(|i| (att[i] - att[i - 1]).abs())
            .sum::<f64>();
    }
    Ok(total / posts.len() as f64)
}
