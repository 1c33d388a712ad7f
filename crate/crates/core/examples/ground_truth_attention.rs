//! Annotator rationales to ground-truth attention and discrete rationale.
//!
//! cargo run --example ground_truth_attention

use biatt::data::{build_gt_attention, majority_rationale, Label};

fn main() -> biatt::Result<()> {
    let tokens = ["those", "people", "are", "vermin"];
    let rationales = vec![
        vec![false, true, false, true],
        vec![false, false, false, true],
        vec![false, true, false, true],
    ];
    for label in [Label::Hateful, Label::Normal] {
        let gt = build_gt_attention(&rationales, label, tokens.len())?;
        let keep = majority_rationale(&rationales, label, tokens.len());
        println!("{label:?}");
        for ((tok, a), k) in tokens.iter().zip(&gt).zip(&keep) {
            println!("  {tok:<8} {a:.4} {}", if *k { "*" } else { "" });
        }
    }
    Ok(())
}
