//! LIME and exact SHAP side by side for one short post, plus the
//! faithfulness of their top-k selections.
//!
//! cargo run --release --example explain_lime_shap

use biatt::data::{self, Label, PrepareOptions, Split};
use biatt::explainers::{self, LimeConfig};
use biatt::metrics;
use biatt::synthetic::{self, SynthConfig};
use biatt::training::{self, TrainConfig};

fn main() -> biatt::Result<()> {
    let raw = synthetic::generate(&SynthConfig {
        posts: 300,
        max_len: 12,
        ..SynthConfig::default()
    })?;
    let dir = std::env::temp_dir().join("biatt_explain_example");
    std::fs::create_dir_all(&dir).map_err(|e| biatt::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let path = dir.join("dataset.json");
    data::write_dataset(&path, &raw)?;
    let opts = PrepareOptions {
        embedding_dim: 24,
        ..PrepareOptions::default()
    };
    let vectors = dir.join("vectors.txt");
    synthetic::write_embeddings(&vectors, 24, 0.95, 1)?;
    let (prepared, _) = data::prepare(data::parse_dataset(&path)?, Some(&vectors), &opts)?;
    let mut config = TrainConfig {
        epochs: 8,
        learning_rate: 0.005,
        ..TrainConfig::default()
    };
    config.encoder.hidden_units = 24;
    config.encoder.embedding_dim = 24;
    let model = training::train(
        &config,
        &prepared.split(Split::Train),
        &prepared.split(Split::Val),
        prepared.vocab.len(),
        Some(&prepared.embeddings),
    )?
    .model;

    let post = prepared
        .split(Split::Test)
        .into_iter()
        .find(|p| p.label == Label::Hateful && p.len() <= 12)
        .expect("a short hateful test post");
    let class = model.forward(&post.token_ids)?.predicted();
    let lime =
        explainers::lime_explain_class(&model, &post.token_ids, class, &LimeConfig::default())?.with_selection(3)?;
    let shap = explainers::shap_exact(&model, &post.token_ids, class)?.with_selection(3)?;

    println!(
        "post {} explained for class {}",
        post.post_id,
        Label::from_index(class).expect("class").name()
    );
    println!("{:<12} {:>8} {:>8} {:>6}", "token", "LIME", "SHAP", "gt");
    for i in 0..post.len() {
        println!(
            "{:<12} {:>8.4} {:>8.4} {:>6}",
            post.tokens[i],
            lime.token_scores[i],
            shap.token_scores[i],
            if post.gt_rationale[i] { "*" } else { "" }
        );
    }
    println!("SHAP base value {:.4}", shap.base_value.expect("base value"));
    for e in [&lime, &shap] {
        let f = metrics::faithfulness(&model, &post.token_ids, e.selected.as_ref().expect("selection"))?;
        println!(
            "{:<5} comprehensiveness {:+.4}  sufficiency {:+.4}",
            e.method.name(),
            f.comprehensiveness,
            f.sufficiency
        );
    }
    Ok(())
}
