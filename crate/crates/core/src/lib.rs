//! Hate-speech classification with a BiRNN encoder whose attention can be
//! supervised by human rationales, plus post-hoc explainers and a bias and
//! explainability metric battery.
//!
//! Pipeline: [`data`] parses annotated posts and builds ground-truth
//! attention, [`training`] fits a [`models::Model`] on the combined
//! prediction and attention loss, [`explainers`] produces token attributions
//! (attention, LIME, exact SHAP) and [`metrics`] scores them. [`cli`] wires
//! the same steps into the `biatt` binary.
//!
//! Gradients come from the small reverse-mode tape in [`autodiff`] over the
//! dense [`tensor::Tensor`] type. [`synthetic`] generates a corpus in the
//! dataset's JSON layout for runs without the real data.
//!
//! Examples (`cargo run --release --example <name>`): `autodiff_gradcheck`,
//! `ground_truth_attention`, `synthetic_corpus`, `train_biatt`,
//! `compare_heads`, `explain_lime_shap`, `eval_report`, `attention_plot`.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
pub mod explainers;
pub mod metrics;
pub mod models;
pub mod plot;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
