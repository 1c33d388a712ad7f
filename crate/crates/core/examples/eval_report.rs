//! Full metric battery for attention explanations on a held-out split:
//! performance, per-community bias AUCs, plausibility and faithfulness.
//!
//! cargo run --release --example eval_report

use biatt::cli::evaluate_post;
use biatt::data::{self, PrepareOptions, Split};
use biatt::explainers::{LimeConfig, Method, DEFAULT_TOP_K};
use biatt::metrics::{self, ReportOptions, TABLE_COLUMNS};
use biatt::synthetic::{self, SynthConfig};
use biatt::training::{self, TrainConfig};

fn main() -> biatt::Result<()> {
    let raw = synthetic::generate(&SynthConfig {
        posts: 600,
        seed: 21,
        ..SynthConfig::default()
    })?;
    let dir = std::env::temp_dir().join("biatt_eval_example");
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
    let mut config = TrainConfig {
        epochs: 8,
        learning_rate: 0.005,
        ..TrainConfig::default()
    };
    config.encoder.hidden_units = 32;
    config.encoder.embedding_dim = 32;
    let model = training::train(
        &config,
        &prepared.split(Split::Train),
        &prepared.split(Split::Val),
        prepared.vocab.len(),
        Some(&prepared.embeddings),
    )?
    .model;

    let mut records = Vec::new();
    for post in prepared.split(Split::Test) {
        if let Some((record, _)) = evaluate_post(&model, post, Method::Attn, DEFAULT_TOP_K, &LimeConfig::default())? {
            records.push(record);
        }
    }
    let report = metrics::evaluate("BiAtt[Attn]", &records, &ReportOptions::default())?;
    for (name, value) in TABLE_COLUMNS.iter().zip(report.table_row()) {
        match value {
            Some(v) => println!("{name:<10} {v:.4}"),
            None => println!("{name:<10} n/a"),
        }
    }
    println!(
        "\n{:<12} {:>5} {:>9} {:>7} {:>7}",
        "community", "posts", "subgroup", "BPSN", "BNSP"
    );
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    for row in &report.communities {
        println!(
            "{:<12} {:>5} {:>9} {:>7} {:>7}",
            row.community,
            row.posts,
            show(row.aucs.subgroup),
            show(row.aucs.bpsn),
            show(row.aucs.bnsp)
        );
    }
    report.save_json(&dir.join("report.json"))?;
    report.save_table(&dir.join("report.csv"))?;
    println!("\nreport written to {}", dir.display());
    Ok(())
}
