//! Generate a small annotated corpus, prepare it and print what came out.
//!
//! cargo run --release --example synthetic_corpus

use biatt::data::{self, PrepareOptions, Split};
use biatt::synthetic::{self, SynthConfig};

fn main() -> biatt::Result<()> {
    let dir = std::env::temp_dir().join("biatt_synthetic_corpus");
    std::fs::create_dir_all(&dir).map_err(|e| biatt::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let raw = synthetic::generate(&SynthConfig {
        posts: 300,
        ..SynthConfig::default()
    })?;
    let dataset = dir.join("dataset.json");
    data::write_dataset(&dataset, &raw)?;
    let vectors = dir.join("vectors.txt");
    synthetic::write_embeddings(&vectors, 25, 0.9, 1)?;

    let opts = PrepareOptions {
        embedding_dim: 25,
        ..PrepareOptions::default()
    };
    let (prepared, summary) = data::prepare(data::parse_dataset(&dataset)?, Some(&vectors), &opts)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    let post = prepared.split(Split::Train)[0];
    println!("\n{} ({:?}, targets {:?})", post.post_id, post.label, post.communities);
    for (tok, a) in post.tokens.iter().zip(&post.gt_attention) {
        println!("  {tok:<12} {a:.3}");
    }
    Ok(())
}
