//! Joint optimisation of classification and attention:
//! `E_total = E_pred + λ·E_att`, Adam, global-norm clipping, early stopping
//! on validation macro-F1, and the hyper-parameter grid.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::data::{EmbeddingMatrix, ResolvedPost, PAD_ID};
use crate::error::{Error, Result};
use crate::metrics;
use crate::models::{CellKind, EncoderConfig, HeadConfig, HeadKind, Model, ModelConfig, Phase};
use crate::tensor::{Real, Tensor};

/// Added inside the logarithm of the attention loss.
pub const ATTENTION_LOG_EPS: f64 = 1e-10;

/// Attention weights explored by the hyper-parameter grid.
pub const LAMBDA_GRID: [f64; 6] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0];
pub const LEARNING_RATE_GRID: [f64; 3] = [0.1, 0.01, 0.001];
pub const DROPOUT_GRID: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub head_kind: HeadKind,
    pub dropout_pre: f64,
    pub attention_hidden: Option<usize>,
    pub supervise_attention: bool,
    pub patience: usize,
    pub clip_norm: f64,
    pub encoder: EncoderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 100.0,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 20,
            batch_size: 32,
            seed: 42,
            head_kind: HeadKind::BiAtt,
            dropout_pre: 0.2,
            attention_hidden: None,
            supervise_attention: true,
            patience: 5,
            clip_norm: 5.0,
            encoder: EncoderConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda {} must be a non-negative number",
                self.lambda
            )));
        }
        if !(self.learning_rate >= 0.0) || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "learning rate, batch size and epochs must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(Error::Config(
                "Adam betas must lie in [0, 1) and epsilon be positive".into(),
            ));
        }
        Ok(())
    }

    /// Weight actually applied to the attention term.
    pub fn effective_lambda(&self) -> f64 {
        if self.supervise_attention {
            self.lambda
        } else {
            0.0
        }
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            encoder: self.encoder.clone(),
            head: HeadConfig {
                kind: self.head_kind,
                dropout_pre: self.dropout_pre,
                attention_hidden: self.attention_hidden,
            },
        }
    }
}

/// Loss terms of one step or epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub e_pred: f64,
    pub e_att: f64,
    pub e_total: f64,
}

/// `e_total = e_pred + λ·e_att`; the attention term vanishes when
/// supervision is off.
pub fn total_loss(e_pred: f64, e_att: f64, lambda: f64, supervise_attention: bool) -> LossBreakdown {
    let lambda = if supervise_attention { lambda } else { 0.0 };
    LossBreakdown {
        e_pred,
        e_att,
        e_total: e_pred + lambda * e_att,
    }
}

/// Cross-entropy `-log softmax(logits)[label]` on the tape.
pub fn prediction_loss<T: Real>(tape: &mut Tape<T>, logits: Var, label: usize) -> Result<Var> {
    let logp = tape.log_softmax(logits)?;
    let picked = tape.pick(logp, label)?;
    Ok(tape.scale(picked, -T::one()))
}

/// `-Σ_t gt[t]·log(pred[t] + 1e-10)` over unmasked positions.
pub fn attention_loss<T: Real>(tape: &mut Tape<T>, pred: Var, gt: &[f64], mask: &[bool]) -> Result<Var> {
    if gt.len() != tape.value(pred).len() || mask.len() != gt.len() {
        return Err(Error::shape(
            "attention_loss",
            format!("{} targets for {} tokens", gt.len(), tape.value(pred).len()),
        ));
    }
    let target: Vec<T> = gt
        .iter()
        .zip(mask)
        .map(|(&g, &m)| if m { T::of(g) } else { T::zero() })
        .collect();
    let target = tape.constant(Tensor::vector(target)?);
    let shifted = tape.add_scalar(pred, T::of(ATTENTION_LOG_EPS));
    let logs = tape.log(shifted);
    let prod = tape.mul(target, logs)?;
    let s = tape.sum(prod);
    Ok(tape.scale(s, -T::one()))
}

/// Scalar twin of [`prediction_loss`].
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Scalar twin of [`attention_loss`].
pub fn attention_cross_entropy(pred: &[f64], gt: &[f64], mask: &[bool]) -> f64 {
    -pred
        .iter()
        .zip(gt)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((&p, &g), _)| g * (p + ATTENTION_LOG_EPS).ln())
        .sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are keyed by parameter name.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub first: BTreeMap<String, Vec<T>>,
    pub second: BTreeMap<String, Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    /// Applies one update to every parameter that has a gradient.
    pub fn step(
        &mut self,
        params: &mut BTreeMap<String, Tensor<T>>,
        grads: &BTreeMap<String, Tensor<T>>,
        lr: f64,
    ) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let b1 = T::of(self.config.beta1);
        let b2 = T::of(self.config.beta2);
        let c1 = T::of(1.0 - self.config.beta1.powi(t));
        let c2 = T::of(1.0 - self.config.beta2.powi(t));
        let eps = T::of(self.config.epsilon);
        let lr = T::of(lr);
        let one = T::one();
        for (name, grad) in grads {
            let param = params
                .get_mut(name)
                .ok_or_else(|| Error::Lookup(format!("parameter {name}")))?;
            if param.shape() != grad.shape() {
                return Err(Error::shape(
                    "adam",
                    format!("{name}: {:?} vs {:?}", param.shape(), grad.shape()),
                ));
            }
            let n = grad.len();
            let m = self.first.entry(name.clone()).or_insert_with(|| vec![T::zero(); n]);
            let v = self.second.entry(name.clone()).or_insert_with(|| vec![T::zero(); n]);
            let p = param.data_mut();
            for i in 0..n {
                let g = grad.data()[i];
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Scales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut BTreeMap<String, Tensor<T>>, max_norm: f64) -> f64 {
    let norm = grads
        .values()
        .flat_map(|g| g.data().iter())
        .map(|v| {
            let x = v.as_f64();
            x * x
        })
        .sum::<f64>()
        .sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = T::of(max_norm / norm);
        for g in grads.values_mut() {
            for v in g.data_mut() {
                *v = *v * s;
            }
        }
    }
    norm
}

/// Posts padded to the longest sequence in the batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub ids: Vec<Vec<usize>>,
    pub masks: Vec<Vec<bool>>,
    pub gt_attention: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn pad(posts: &[&ResolvedPost]) -> Batch {
        let width = posts.iter().map(|p| p.token_ids.len()).max().unwrap_or(0);
        let mut b = Batch {
            ids: Vec::with_capacity(posts.len()),
            masks: Vec::with_capacity(posts.len()),
            gt_attention: Vec::with_capacity(posts.len()),
            labels: Vec::with_capacity(posts.len()),
        };
        for p in posts {
            let n = p.token_ids.len();
            let mut ids = p.token_ids.clone();
            ids.resize(width, PAD_ID);
            let mut gt = p.gt_attention.clone();
            gt.resize(width, 0.0);
            let mut mask = vec![true; n];
            mask.resize(width, false);
            b.ids.push(ids);
            b.masks.push(mask);
            b.gt_attention.push(gt);
            b.labels.push(p.label.index());
        }
        b
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Result of one forward/backward pass over a batch.
#[derive(Clone, Debug)]
pub struct StepOutput<T> {
    /// Mean losses over the batch.
    pub losses: LossBreakdown,
    pub grads: BTreeMap<String, Tensor<T>>,
    /// Whether an attention-loss node was placed on the tape.
    pub attention_supervised: bool,
}

/// Mean batch loss and gradients of every trainable parameter.
pub fn batch_gradients<T: Real>(
    model: &Model<T>,
    batch: &Batch,
    lambda: f64,
    supervise_attention: bool,
    phase: &mut Phase<'_>,
) -> Result<StepOutput<T>> {
    if batch.is_empty() {
        return Err(Error::EmptySequence("empty batch"));
    }
    let lambda = if supervise_attention { lambda } else { 0.0 };
    let supervised = lambda > 0.0;
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape);
    let mut terms = Vec::with_capacity(batch.len());
    let (mut sum_pred, mut sum_att) = (0.0, 0.0);
    for i in 0..batch.len() {
        let fwd = model.forward_on_tape(&mut tape, &bound, &batch.ids[i], &batch.masks[i], phase)?;
        let pred = prediction_loss(&mut tape, fwd.logits, batch.labels[i])?;
        sum_pred += tape.value(pred).item()?.as_f64();
        let att_values = tape.value(fwd.attention).to_f64_vec();
        sum_att += attention_cross_entropy(&att_values, &batch.gt_attention[i], &batch.masks[i]);
        let term = if supervised {
            let att = attention_loss(&mut tape, fwd.attention, &batch.gt_attention[i], &batch.masks[i])?;
            let weighted = tape.scale(att, T::of(lambda));
            tape.add(pred, weighted)?
        } else {
            pred
        };
        terms.push(term);
    }
    let stacked = tape.concat(&terms, 0)?;
    let loss = tape.mean(stacked);
    tape.backward(loss)?;
    let mut grads = BTreeMap::new();
    for (name, var) in bound.iter() {
        if !tape.requires_grad(var) {
            continue;
        }
        let g = tape.grad(var).unwrap_or_else(|| Tensor::zeros(tape.value(var).shape()));
        grads.insert(name.to_string(), g);
    }
    let n = batch.len() as f64;
    Ok(StepOutput {
        losses: total_loss(sum_pred / n, sum_att / n, lambda, true),
        grads,
        attention_supervised: supervised,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub e_pred: f64,
    pub e_att: f64,
    pub e_total: f64,
    pub val_macro_f1: f64,
    pub val_att_loss: f64,
}

pub fn write_epoch_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in log {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation macro-F1.
    pub model: Model<f32>,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub epochs: Vec<EpochLog>,
    /// Loss breakdown of every optimisation step.
    pub steps: Vec<LossBreakdown>,
}

/// Validation scores of a model in evaluation mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationScores {
    pub macro_f1: f64,
    pub attention_loss: f64,
}

pub fn validate<T: Real>(model: &Model<T>, posts: &[&ResolvedPost]) -> Result<ValidationScores> {
    if posts.is_empty() {
        return Ok(ValidationScores {
            macro_f1: 0.0,
            attention_loss: 0.0,
        });
    }
    let mut gold = Vec::with_capacity(posts.len());
    let mut pred = Vec::with_capacity(posts.len());
    let mut att = 0.0;
    for p in posts {
        let out = model.forward(&p.token_ids)?;
        gold.push(p.label.index());
        pred.push(out.predicted());
        att += attention_cross_entropy(&out.attention, &p.gt_attention, &vec![true; p.len()]);
    }
    Ok(ValidationScores {
        macro_f1: metrics::macro_f1_labels(&gold, &pred),
        attention_loss: att / posts.len() as f64,
    })
}

/// Trains from a seeded initialisation. One generator drives initialisation,
/// shuffling and dropout, so a fixed seed reproduces the run bit for bit.
pub fn train(
    config: &TrainConfig,
    train_posts: &[&ResolvedPost],
    val_posts: &[&ResolvedPost],
    vocab_size: usize,
    embeddings: Option<&EmbeddingMatrix>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_posts.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::<f32>::init_with_rng(config.model_config(vocab_size), &mut rng, embeddings)?;
    let mut adam = Adam::new(AdamConfig {
        beta1: config.beta1,
        beta2: config.beta2,
        epsilon: config.epsilon,
    });
    let lambda = config.effective_lambda();
    let mut order: Vec<usize> = (0..train_posts.len()).collect();
    let mut epochs = Vec::new();
    let mut steps = Vec::new();
    let mut best: Option<(f64, usize, Model<f32>)> = None;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut sum_pred, mut sum_att, mut seen) = (0.0, 0.0, 0usize);
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let posts: Vec<&ResolvedPost> = chunk.iter().map(|&i| train_posts[i]).collect();
            let batch = Batch::pad(&posts);
            let mut out = batch_gradients(&model, &batch, lambda, true, &mut Phase::Train(&mut rng))?;
            if !out.losses.e_total.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step: step + 1,
                    detail: format!("non-finite loss {:?}", out.losses),
                });
            }
            clip_global_norm(&mut out.grads, config.clip_norm);
            adam.step(model.params_mut(), &out.grads, config.learning_rate)?;
            sum_pred += out.losses.e_pred * batch.len() as f64;
            sum_att += out.losses.e_att * batch.len() as f64;
            seen += batch.len();
            steps.push(out.losses);
        }
        let losses = total_loss(sum_pred / seen as f64, sum_att / seen as f64, lambda, true);
        let val = validate(&model, val_posts)?;
        epochs.push(EpochLog {
            epoch,
            e_pred: losses.e_pred,
            e_att: losses.e_att,
            e_total: losses.e_total,
            val_macro_f1: val.macro_f1,
            val_att_loss: val.attention_loss,
        });
        if best.as_ref().map_or(true, |(f1, _, _)| val.macro_f1 > *f1) {
            best = Some((val.macro_f1, epoch, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let (best_val_macro_f1, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_val_macro_f1,
        epochs,
        steps,
    })
}

/// Value lists swept by [`grid_search`]. Defaults reproduce the grid used
/// for the bidirectional-attention model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperGrid {
    pub hidden_units: Vec<usize>,
    pub cells: Vec<CellKind>,
    pub train_embeddings: Vec<bool>,
    pub dropout_embed: Vec<f64>,
    pub dropout_fc: Vec<f64>,
    pub dropout_pre: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Evaluate at most this many configurations, sampled with the base seed.
    pub max_configs: Option<usize>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            hidden_units: vec![64, 128],
            cells: vec![CellKind::Lstm, CellKind::Gru],
            train_embeddings: vec![true, false],
            dropout_embed: DROPOUT_GRID.to_vec(),
            dropout_fc: DROPOUT_GRID.to_vec(),
            dropout_pre: DROPOUT_GRID.to_vec(),
            learning_rate: LEARNING_RATE_GRID.to_vec(),
            lambda: LAMBDA_GRID.to_vec(),
            max_configs: None,
        }
    }
}

impl HyperGrid {
    pub fn size(&self) -> usize {
        self.hidden_units.len()
            * self.cells.len()
            * self.train_embeddings.len()
            * self.dropout_embed.len()
            * self.dropout_fc.len()
            * self.dropout_pre.len()
            * self.learning_rate.len()
            * self.lambda.len()
    }

    /// Cartesian product applied on top of `base`, optionally subsampled.
    pub fn expand(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::with_capacity(self.size());
        for &h in &self.hidden_units {
            for &cell in &self.cells {
                for &te in &self.train_embeddings {
                    for &de in &self.dropout_embed {
                        for &df in &self.dropout_fc {
                            for &dp in &self.dropout_pre {
                                for &lr in &self.learning_rate {
                                    for &lambda in &self.lambda {
                                        let mut c = base.clone();
                                        c.encoder.hidden_units = h;
                                        c.encoder.cell = cell;
                                        c.encoder.train_embeddings = te;
                                        c.encoder.dropout_embed = de;
                                        c.encoder.dropout_fc = df;
                                        c.dropout_pre = dp;
                                        c.learning_rate = lr;
                                        c.lambda = lambda;
                                        out.push(c);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        if let Some(budget) = self.max_configs.filter(|&b| b < out.len()) {
            let mut idx: Vec<usize> = (0..out.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(base.seed));
            let mut keep: Vec<usize> = idx.into_iter().take(budget).collect();
            keep.sort_unstable();
            out = keep.into_iter().map(|i| out[i].clone()).collect();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub rank: usize,
    pub val_macro_f1: f64,
    pub best_epoch: usize,
    pub config: TrainConfig,
}

/// Trains every grid point and returns rows sorted by validation macro-F1
/// (descending; enumeration order breaks ties).
pub fn grid_search(
    grid: &HyperGrid,
    base: &TrainConfig,
    train_posts: &[&ResolvedPost],
    val_posts: &[&ResolvedPost],
    vocab_size: usize,
    embeddings: Option<&EmbeddingMatrix>,
) -> Result<Vec<GridRow>> {
    let mut rows = Vec::new();
    for config in grid.expand(base) {
        let outcome = train(&config, train_posts, val_posts, vocab_size, embeddings)?;
        rows.push(GridRow {
            rank: 0,
            val_macro_f1: outcome.best_val_macro_f1,
            best_epoch: outcome.best_epoch,
            config,
        });
    }
    rows.sort_by(|a, b| {
        b.val_macro_f1
            .partial_cmp(&a.val_macro_f1)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_loss_reference_points() {
        let mut tape = Tape::<f64>::new();
        let l = tape.constant(Tensor::vector(vec![0.0, 0.0, 0.0]).unwrap());
        let loss = prediction_loss(&mut tape, l, 2).unwrap();
        assert!((tape.value(loss).item().unwrap() - 3f64.ln()).abs() < 1e-12);
        let l = tape.constant(Tensor::vector(vec![10.0, -10.0, -10.0]).unwrap());
        let loss = prediction_loss(&mut tape, l, 0).unwrap();
        assert!(tape.value(loss).item().unwrap() < 1e-8);
    }

    #[test]
    fn attention_loss_reference_points() {
        let mut tape = Tape::<f64>::new();
        let p = tape.constant(Tensor::vector(vec![0.25; 4]).unwrap());
        let loss = attention_loss(&mut tape, p, &[0.25; 4], &[true; 4]).unwrap();
        assert!((tape.value(loss).item().unwrap() - 4f64.ln()).abs() < 1e-9);
        let p = tape.constant(Tensor::vector(vec![0.0, 1.0, 0.0]).unwrap());
        let loss = attention_loss(&mut tape, p, &[0.0, 1.0, 0.0], &[true; 3]).unwrap();
        assert!(tape.value(loss).item().unwrap().abs() < 1e-9);
    }

    #[test]
    fn total_loss_arithmetic() {
        assert_eq!(total_loss(1.0, 0.5, 100.0, true).e_total, 51.0);
        assert_eq!(total_loss(1.3, 0.5, 0.0, true).e_total, 1.3);
        assert_eq!(total_loss(1.3, 0.5, 100.0, false).e_total, 1.3);
    }

    #[test]
    fn adam_zero_gradient_and_step_count() {
        let mut params = BTreeMap::from([("p".to_string(), Tensor::vector(vec![1.5f64]).unwrap())]);
        let zero = BTreeMap::from([("p".to_string(), Tensor::vector(vec![0.0f64]).unwrap())]);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut params, &zero, 0.1).unwrap();
        assert_eq!(params["p"].data(), &[1.5]);
        assert_eq!(adam.step, 1);

        let one = BTreeMap::from([("p".to_string(), Tensor::vector(vec![1.0f64]).unwrap())]);
        adam.step(&mut params, &one, 0.1).unwrap();
        let m_before = adam.first["p"][0];
        adam.step(&mut params, &zero, 0.1).unwrap();
        assert_eq!(adam.first["p"][0], 0.9 * m_before);
        assert_eq!(adam.step, 3);
    }

    #[test]
    fn adam_matches_hand_trace() {
        // Constant gradient g = 0.5, lr = 0.01 on a scalar starting at 1.0.
        let g = 0.5f64;
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8f64, 0.01f64);
        let mut p = 1.0;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            p -= lr * mh / (vh.sqrt() + eps);
        }
        // Both bias-corrected moments equal g and g^2, so each step moves by lr·g/(|g|+eps).
        let expected = 1.0 - 2.0 * lr * g / (g + eps);
        assert!((p - expected).abs() < 1e-15);

        let mut params = BTreeMap::from([("p".to_string(), Tensor::vector(vec![1.0f64]).unwrap())]);
        let grads = BTreeMap::from([("p".to_string(), Tensor::vector(vec![g]).unwrap())]);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut params, &grads, lr).unwrap();
        adam.step(&mut params, &grads, lr).unwrap();
        assert!((params["p"].data()[0] - expected).abs() < 1e-8);
    }

    #[test]
    fn adam_zero_learning_rate_is_a_no_op() {
        let mut params = BTreeMap::from([("p".to_string(), Tensor::vector(vec![0.3f32, -2.0]).unwrap())]);
        let grads = BTreeMap::from([("p".to_string(), Tensor::vector(vec![4.0f32, -1.0]).unwrap())]);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut params, &grads, 0.0).unwrap();
        assert_eq!(params["p"].data(), &[0.3, -2.0]);
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = BTreeMap::from([("a".to_string(), Tensor::vector(vec![3.0f64, 4.0]).unwrap())]);
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        let n: f64 = g["a"].data().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_defaults_and_budget() {
        let grid = HyperGrid::default();
        assert_eq!(grid.dropout_pre, vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(grid.size(), 2 * 2 * 2 * 5 * 5 * 5 * 3 * 6);
        let one = HyperGrid {
            hidden_units: vec![8],
            cells: vec![CellKind::Gru],
            train_embeddings: vec![true],
            dropout_embed: vec![0.1],
            dropout_fc: vec![0.1],
            dropout_pre: vec![0.2],
            learning_rate: vec![0.01],
            lambda: vec![100.0],
            max_configs: None,
        };
        let configs = one.expand(&TrainConfig::default());
        assert_eq!(configs.len(), 1);
        assert_eq!(configs[0].encoder.hidden_units, 8);
        let budgeted = HyperGrid {
            max_configs: Some(10),
            ..HyperGrid::default()
        };
        let a = budgeted.expand(&TrainConfig::default());
        assert_eq!(a.len(), 10);
        assert_eq!(a, budgeted.expand(&TrainConfig::default()));
    }

    #[test]
    fn default_config_matches_tuned_operating_point() {
        let c = TrainConfig::default();
        assert_eq!(c.lambda, 100.0);
        assert_eq!(c.learning_rate, 0.001);
        assert_eq!(c.dropout_pre, 0.2);
        assert_eq!(c.encoder.cell, CellKind::Gru);
        assert_eq!(c.encoder.hidden_units, 128);
        assert_eq!(c.head_kind, HeadKind::BiAtt);
    }
}
