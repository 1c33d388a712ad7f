//! Train the BiAtt-BiRNN on a synthetic corpus with attention supervision
//! and save a checkpoint.
//!
//! cargo run --release --example train_biatt [-- <checkpoint dir>]

use biatt::data::{self, PrepareOptions, Split};
use biatt::models::checkpoint;
use biatt::synthetic::{self, SynthConfig};
use biatt::training::{self, TrainConfig};

fn main() -> biatt::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("biatt_train_example"));
    let raw = synthetic::generate(&SynthConfig {
        posts: 400,
        ..SynthConfig::default()
    })?;
    let report =
        data::parse_dataset_str(&serde_json::to_string(&raw_map(&raw)).expect("posts serialize")).expect("valid");
    let opts = PrepareOptions {
        embedding_dim: 32,
        ..PrepareOptions::default()
    };
    let vectors = std::env::temp_dir().join("biatt_train_example_vectors.txt");
    synthetic::write_embeddings(&vectors, 32, 0.95, 1)?;
    let (prepared, _) = data::prepare(report, Some(&vectors), &opts)?;

    let mut config = TrainConfig {
        lambda: 100.0,
        epochs: 8,
        learning_rate: 0.005,
        ..TrainConfig::default()
    };
    config.encoder.hidden_units = 32;
    config.encoder.embedding_dim = 32;
    let outcome = training::train(
        &config,
        &prepared.split(Split::Train),
        &prepared.split(Split::Val),
        prepared.vocab.len(),
        Some(&prepared.embeddings),
    )?;
    for e in &outcome.epochs {
        println!(
            "epoch {:>2}  E_pred {:.4}  E_att {:.4}  val macro-F1 {:.4}",
            e.epoch, e.e_pred, e.e_att, e.val_macro_f1
        );
    }
    let test = training::validate(&outcome.model, &prepared.split(Split::Test))?;
    println!("best epoch {}; test macro-F1 {:.4}", outcome.best_epoch, test.macro_f1);
    checkpoint::save(&out, &outcome.model, config.seed, &prepared.vocab.content_hash())?;
    println!("checkpoint written to {}", out.display());
    Ok(())
}

fn raw_map(posts: &[data::RawPost]) -> serde_json::Map<String, serde_json::Value> {
    posts
        .iter()
        .map(|p| (p.post_id.clone(), serde_json::to_value(p).expect("post serializes")))
        .collect()
}
