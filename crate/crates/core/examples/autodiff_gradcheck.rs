//! Tape gradients of a small BiAtt model against central differences.
//!
//! cargo run --release --example autodiff_gradcheck

use std::collections::BTreeSet;

use biatt::data::{Label, ResolvedPost};
use biatt::models::{CellKind, EncoderConfig, HeadConfig, HeadKind, Model, ModelConfig, Phase};
use biatt::training::{batch_gradients, Batch};

fn main() -> biatt::Result<()> {
    let config = ModelConfig {
        vocab_size: 8,
        encoder: EncoderConfig {
            cell: CellKind::Lstm,
            hidden_units: 3,
            embedding_dim: 4,
            train_embeddings: true,
            dropout_embed: 0.0,
            dropout_fc: 0.0,
        },
        head: HeadConfig {
            kind: HeadKind::BiAtt,
            dropout_pre: 0.0,
            attention_hidden: Some(3),
        },
    };
    let mut model = Model::<f64>::init(config, 1, None)?;
    let post = ResolvedPost {
        post_id: "demo".into(),
        tokens: vec!["a".into(), "b".into(), "c".into()],
        token_ids: vec![2, 5, 7],
        label: Label::Offensive,
        communities: BTreeSet::new(),
        gt_attention: vec![0.2, 0.6, 0.2],
        gt_rationale: vec![false, true, false],
    };
    let batch = Batch::pad(&[&post]);
    let loss = |m: &Model<f64>| batch_gradients(m, &batch, 100.0, true, &mut Phase::Eval);

    let analytic = loss(&model)?.grads;
    let h = 1e-5;
    let names: Vec<String> = analytic.keys().cloned().collect();
    for name in names {
        let mut worst: f64 = 0.0;
        for i in 0..analytic[&name].len() {
            let orig = model.params()[&name].data()[i];
            let mut at = |v: f64| -> biatt::Result<f64> {
                model.param_mut(&name).expect("param").data_mut()[i] = v;
                Ok(loss(&model)?.losses.e_total)
            };
            let numeric = (at(orig + h)? - at(orig - h)?) / (2.0 * h);
            at(orig)?;
            let a = analytic[&name].data()[i];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
        println!("{name:<24} max relative error {worst:.2e}");
    }
    Ok(())
}
