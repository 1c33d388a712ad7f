//! BiRNN classifiers with supervised attention.
//!
//! Both architectures share the same trunk:
//!
//! ```text
//! token ids -> embedding -> dropout -> BiRNN encoder -> H [L x 2h]
//!           -> attention head -> a [L]
//!           -> a_t * H_t -> max over tokens -> dropout -> tanh FC -> logits [3]
//! ```
//!
//! They differ only in how attention scores are produced. The matrix head
//! scores each token independently with a learned vector (`s = H·w`); the
//! bidirectional attention head runs a second BiRNN over `H` so that each
//! score depends on its left and right neighbours (`s_t = A_t·u`).

pub mod checkpoint;
pub mod rnn;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::data::{EmbeddingMatrix, PAD_ID};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub use rnn::{birnn, cell_step, rnn_pass, CellKind, CellVars, RnnState};

pub const NUM_CLASSES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeadKind {
    /// Per-token dot-product scores.
    #[serde(rename = "matrix")]
    Matrix,
    /// Scores from a bidirectional recurrent layer over the encoder states.
    #[serde(rename = "biatt")]
    BiAtt,
}

impl std::str::FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "matrix" | "birnn-attn" => Ok(HeadKind::Matrix),
            "biatt" | "biatt-birnn" => Ok(HeadKind::BiAtt),
            other => Err(Error::Config(format!("unknown head kind {other:?}"))),
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::Config(format!("unknown cell kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub cell: CellKind,
    pub hidden_units: usize,
    pub embedding_dim: usize,
    pub train_embeddings: bool,
    pub dropout_embed: f64,
    pub dropout_fc: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            cell: CellKind::Gru,
            hidden_units: 128,
            embedding_dim: 300,
            train_embeddings: true,
            dropout_embed: 0.2,
            dropout_fc: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadConfig {
    pub kind: HeadKind,
    /// Dropout applied to `H` before the attention BiRNN.
    pub dropout_pre: f64,
    /// Hidden size of the attention BiRNN; defaults to the encoder's.
    pub attention_hidden: Option<usize>,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            kind: HeadKind::BiAtt,
            dropout_pre: 0.2,
            attention_hidden: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub encoder: EncoderConfig,
    pub head: HeadConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let e = &self.encoder;
        for (name, p) in [
            ("dropout_embed", e.dropout_embed),
            ("dropout_fc", e.dropout_fc),
            ("dropout_pre", self.head.dropout_pre),
        ] {
            if !(0.0..=0.5).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} outside [0, 0.5]")));
            }
        }
        if self.vocab_size < 2 || e.hidden_units == 0 || e.embedding_dim == 0 || self.attention_hidden() == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn attention_hidden(&self) -> usize {
        self.head.attention_hidden.unwrap_or(self.encoder.hidden_units)
    }

    /// Name and shape of every parameter, in initialisation order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let h = self.encoder.hidden_units;
        let d = self.encoder.embedding_dim;
        let g = self.encoder.cell.gates();
        let mut out = vec![("embedding".to_string(), vec![self.vocab_size, d])];
        let mut rnn = |prefix: &str, input: usize, hidden: usize| {
            for dir in ["fwd", "bwd"] {
                out.push((format!("{prefix}.{dir}.w_ih"), vec![input, g * hidden]));
                out.push((format!("{prefix}.{dir}.w_hh"), vec![hidden, g * hidden]));
                out.push((format!("{prefix}.{dir}.b_ih"), vec![1, g * hidden]));
                out.push((format!("{prefix}.{dir}.b_hh"), vec![1, g * hidden]));
            }
        };
        rnn("encoder", d, h);
        match self.head.kind {
            HeadKind::Matrix => {}
            HeadKind::BiAtt => rnn("head.rnn", 2 * h, self.attention_hidden()),
        }
        match self.head.kind {
            HeadKind::Matrix => out.push(("head.w".into(), vec![2 * h, 1])),
            HeadKind::BiAtt => out.push(("head.u".into(), vec![2 * self.attention_hidden(), 1])),
        }
        out.push(("fc1.w".into(), vec![2 * h, 2 * h]));
        out.push(("fc1.b".into(), vec![1, 2 * h]));
        out.push(("fc2.w".into(), vec![2 * h, NUM_CLASSES]));
        out.push(("fc2.b".into(), vec![1, NUM_CLASSES]));
        out
    }
}

/// Dropout switch for a forward pass. Training carries the run's generator.
pub enum Phase<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

impl Phase<'_> {
    fn rng(&mut self) -> Option<&mut ChaCha8Rng> {
        match self {
            Phase::Eval => None,
            Phase::Train(r) => Some(&mut **r),
        }
    }
}

/// Per-class logits and the attention distribution over tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub logits: Vec<f64>,
    pub attention: Vec<f64>,
}

impl ModelOutput {
    pub fn probs(&self) -> [f64; NUM_CLASSES] {
        softmax3(&self.logits)
    }

    pub fn predicted(&self) -> usize {
        argmax(&self.logits)
    }
}

pub fn softmax3(logits: &[f64]) -> [f64; NUM_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; NUM_CLASSES];
    for (o, &l) in p.iter_mut().zip(logits) {
        *o = (l - max).exp();
    }
    let z: f64 = p.iter().sum();
    p.map(|v| v / z)
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Tape handles of a model's parameters for one forward computation.
#[derive(Clone, Debug, Default)]
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("parameter {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }

    fn cell(&self, prefix: &str) -> Result<CellVars> {
        Ok(CellVars {
            w_ih: self.get(&format!("{prefix}.w_ih"))?,
            w_hh: self.get(&format!("{prefix}.w_hh"))?,
            b_ih: self.get(&format!("{prefix}.b_ih"))?,
            b_hh: self.get(&format!("{prefix}.b_hh"))?,
        })
    }
}

/// Handles produced by [`Model::forward_on_tape`].
#[derive(Clone, Copy, Debug)]
pub struct ForwardVars {
    pub logits: Var,
    pub attention: Var,
    pub encoded: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    config: ModelConfig,
    params: BTreeMap<String, Tensor<T>>,
}

impl<T: Real> Model<T> {
    /// Seeded initialisation: uniform `±1/sqrt(fan_in)` for every weight,
    /// embeddings copied from `embeddings` when supplied.
    pub fn init(config: ModelConfig, seed: u64, embeddings: Option<&EmbeddingMatrix>) -> Result<Self> {
        Self::init_with_rng(config, &mut ChaCha8Rng::seed_from_u64(seed), embeddings)
    }

    pub fn init_with_rng(
        config: ModelConfig,
        rng: &mut ChaCha8Rng,
        embeddings: Option<&EmbeddingMatrix>,
    ) -> Result<Self> {
        config.validate()?;
        let mut params = BTreeMap::new();
        for (name, shape) in config.parameter_shapes() {
            let n: usize = shape.iter().product();
            let tensor = if name == "embedding" {
                match embeddings {
                    Some(e) => {
                        if e.rows != shape[0] || e.dim != shape[1] {
                            return Err(Error::shape(
                                "embedding",
                                format!("matrix {}x{} for model {:?}", e.rows, e.dim, shape),
                            ));
                        }
                        Tensor::new(shape, e.data.iter().map(|&v| T::of(v as f64)).collect())?
                    }
                    None => {
                        let mut data: Vec<T> = (0..n).map(|_| T::of(rng.gen_range(-0.05..=0.05))).collect();
                        data[PAD_ID * shape[1]..(PAD_ID + 1) * shape[1]].fill(T::zero());
                        Tensor::new(shape, data)?
                    }
                }
            } else {
                let fan_in = match name.rsplit('.').next() {
                    Some("w_ih" | "w_hh" | "b_ih" | "b_hh") => shape[1] / config.encoder.cell.gates(),
                    Some("b") => 2 * config.encoder.hidden_units,
                    _ => shape[0],
                };
                let bound = 1.0 / (fan_in as f64).sqrt();
                Tensor::new(shape, (0..n).map(|_| T::of(rng.gen_range(-bound..=bound))).collect())?
            };
            params.insert(name, tensor);
        }
        Ok(Model { config, params })
    }

    pub fn from_parts(config: ModelConfig, params: BTreeMap<String, Tensor<T>>) -> Result<Self> {
        config.validate()?;
        for (name, shape) in config.parameter_shapes() {
            let p = params
                .get(&name)
                .ok_or_else(|| Error::Lookup(format!("parameter {name}")))?;
            if p.shape() != shape.as_slice() {
                return Err(Error::shape(
                    "from_parts",
                    format!("{name}: {:?} != {shape:?}", p.shape()),
                ));
            }
        }
        Ok(Model { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn head_kind(&self) -> HeadKind {
        self.config.head.kind
    }

    pub fn params(&self) -> &BTreeMap<String, Tensor<T>> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.params.get_mut(name)
    }

    pub(crate) fn params_mut(&mut self) -> &mut BTreeMap<String, Tensor<T>> {
        &mut self.params
    }

    /// Names of parameters that receive gradient updates.
    pub fn trainable(&self) -> Vec<String> {
        self.params
            .keys()
            .filter(|k| self.config.encoder.train_embeddings || k.as_str() != "embedding")
            .cloned()
            .collect()
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            params: self.params.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    /// Registers every parameter on `tape`; frozen embeddings become constants.
    pub fn bind(&self, tape: &mut Tape<T>) -> BoundParams {
        let mut vars = BTreeMap::new();
        for (name, t) in &self.params {
            let trainable = self.config.encoder.train_embeddings || name != "embedding";
            vars.insert(name.clone(), tape.leaf(t.clone(), trainable));
        }
        BoundParams { vars }
    }

    pub fn matrix_attention(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundParams,
        encoded: Var,
        mask: &[bool],
    ) -> Result<Var> {
        let w = bound.get("head.w")?;
        scores_to_attention(tape, encoded, w, mask)
    }

    pub fn biatt_attention(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundParams,
        encoded: Var,
        mask: &[bool],
        phase: &mut Phase<'_>,
    ) -> Result<Var> {
        let dropped = tape.dropout(encoded, self.config.head.dropout_pre, phase.rng())?;
        let inner = birnn(
            tape,
            self.config.encoder.cell,
            &bound.cell("head.rnn.fwd")?,
            &bound.cell("head.rnn.bwd")?,
            dropped,
            mask,
            self.config.attention_hidden(),
        )?;
        let u = bound.get("head.u")?;
        scores_to_attention(tape, inner, u, mask)
    }

    /// Attention-weighted max pooling followed by the FCN classifier.
    pub fn classify(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundParams,
        encoded: Var,
        attention: Var,
        mask: &[bool],
        phase: &mut Phase<'_>,
    ) -> Result<Var> {
        let weighted = tape.scale_rows(encoded, attention)?;
        let pooled = tape.max_over_tokens(weighted, mask)?;
        let width = tape.value(pooled).len();
        let pooled = tape.reshape(pooled, vec![1, width])?;
        let pooled = tape.dropout(pooled, self.config.encoder.dropout_fc, phase.rng())?;
        let z1 = tape.matmul(pooled, bound.get("fc1.w")?)?;
        let z1 = tape.add(z1, bound.get("fc1.b")?)?;
        let hidden = tape.tanh(z1);
        let z2 = tape.matmul(hidden, bound.get("fc2.w")?)?;
        let z2 = tape.add(z2, bound.get("fc2.b")?)?;
        tape.reshape(z2, vec![NUM_CLASSES])
    }

    /// Full forward pass for one (possibly padded) sequence.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundParams,
        token_ids: &[usize],
        mask: &[bool],
        phase: &mut Phase<'_>,
    ) -> Result<ForwardVars> {
        if token_ids.len() != mask.len() {
            return Err(Error::shape(
                "forward",
                format!("{} ids, {} mask", token_ids.len(), mask.len()),
            ));
        }
        let emb = tape.gather_rows(bound.get("embedding")?, token_ids)?;
        let emb = tape.dropout(emb, self.config.encoder.dropout_embed, phase.rng())?;
        let encoded = birnn(
            tape,
            self.config.encoder.cell,
            &bound.cell("encoder.fwd")?,
            &bound.cell("encoder.bwd")?,
            emb,
            mask,
            self.config.encoder.hidden_units,
        )?;
        let attention = match self.config.head.kind {
            HeadKind::Matrix => self.matrix_attention(tape, bound, encoded, mask)?,
            HeadKind::BiAtt => self.biatt_attention(tape, bound, encoded, mask, phase)?,
        };
        let logits = self.classify(tape, bound, encoded, attention, mask, phase)?;
        Ok(ForwardVars {
            logits,
            attention,
            encoded,
        })
    }

    /// Evaluation-mode forward over an unpadded sequence.
    pub fn forward(&self, token_ids: &[usize]) -> Result<ModelOutput> {
        self.forward_masked(token_ids, &vec![true; token_ids.len()], &mut Phase::Eval)
    }

    pub fn forward_masked(&self, token_ids: &[usize], mask: &[bool], phase: &mut Phase<'_>) -> Result<ModelOutput> {
        if token_ids.is_empty() {
            return Err(Error::EmptySequence("forward on a post without tokens"));
        }
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let out = self.forward_on_tape(&mut tape, &bound, token_ids, mask, phase)?;
        Ok(ModelOutput {
            logits: tape.value(out.logits).to_f64_vec(),
            attention: tape.value(out.attention).to_f64_vec(),
        })
    }
}

fn scores_to_attention<T: Real>(tape: &mut Tape<T>, features: Var, vector: Var, mask: &[bool]) -> Result<Var> {
    let scores = tape.matmul(features, vector)?;
    let len = tape.value(scores).len();
    let scores = tape.reshape(scores, vec![len])?;
    tape.masked_softmax(scores, mask)
}

/// Anything that maps token ids to class probabilities. Explainers and
/// faithfulness metrics only need this view of a model.
pub trait Classifier {
    fn class_probs(&self, token_ids: &[usize]) -> Result<[f64; NUM_CLASSES]>;
}

impl<T: Real> Classifier for Model<T> {
    fn class_probs(&self, token_ids: &[usize]) -> Result<[f64; NUM_CLASSES]> {
        Ok(self.forward(token_ids)?.probs())
    }
}

impl<F> Classifier for F
where
    F: Fn(&[usize]) -> [f64; NUM_CLASSES],
{
    fn class_probs(&self, token_ids: &[usize]) -> Result<[f64; NUM_CLASSES]> {
        Ok(self(token_ids))
    }
}
