//! Ground-truth attention against a supervised BiAtt model and an
//! unsupervised matrix-attention model for one hateful post, written as SVG
//! and CSV.
//!
//! cargo run --release --example attention_plot

use biatt::data::{self, Label, PrepareOptions, Split};
use biatt::models::HeadKind;
use biatt::plot::AttentionChart;
use biatt::synthetic::{self, SynthConfig};
use biatt::training::{self, TrainConfig};

fn main() -> biatt::Result<()> {
    let raw = synthetic::generate(&SynthConfig {
        posts: 400,
        seed: 5,
        ..SynthConfig::default()
    })?;
    let dir = std::env::temp_dir().join("biatt_plot_example");
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
    let fit = |head: HeadKind, lambda: f64| {
        let mut config = TrainConfig {
            head_kind: head,
            lambda,
            epochs: 8,
            learning_rate: 0.005,
            ..TrainConfig::default()
        };
        config.encoder.hidden_units = 32;
        config.encoder.embedding_dim = 32;
        training::train(
            &config,
            &prepared.split(Split::Train),
            &prepared.split(Split::Val),
            prepared.vocab.len(),
            Some(&prepared.embeddings),
        )
        .map(|o| o.model)
    };
    let biatt = fit(HeadKind::BiAtt, 100.0)?;
    let matrix = fit(HeadKind::Matrix, 0.0)?;

    let post = prepared
        .split(Split::Test)
        .into_iter()
        .find(|p| p.label == Label::Hateful)
        .expect("a hateful test post");
    let chart = AttentionChart {
        post_id: post.post_id.clone(),
        tokens: post.tokens.clone(),
        gt: post.gt_attention.clone(),
        model_a: biatt.forward(&post.token_ids)?.attention,
        model_b: matrix.forward(&post.token_ids)?.attention,
        label_a: "BiAtt-BiRNN".into(),
        label_b: "BiRNN-Attn".into(),
    };
    let svg = dir.join(format!("{}.svg", post.post_id));
    chart.write_svg(&svg)?;
    chart.write_csv(&dir.join(format!("{}.csv", post.post_id)))?;
    print!("{}", chart.to_csv()?);
    println!("chart written to {}", svg.display());
    Ok(())
}
