//! Token attributions: the model's own attention, LIME surrogates and exact
//! Shapley values.
//!
//! Removing a token always means replacing its id with [`PAD_ID`], whose
//! embedding row is zero.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::PAD_ID;
use crate::error::{Error, Result};
use crate::metrics::mask_tokens;
use crate::models::{Classifier, Model};
use crate::tensor::Real;

/// Largest post accepted by [`shap_exact`].
pub const MAX_SHAP_TOKENS: usize = 20;
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Attn,
    #[serde(rename = "LIME")]
    Lime,
    #[serde(rename = "SHAP")]
    Shap,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Attn => "Attn",
            Method::Lime => "LIME",
            Method::Shap => "SHAP",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "attn" => Ok(Method::Attn),
            "lime" => Ok(Method::Lime),
            "shap" => Ok(Method::Shap),
            other => Err(Error::Config(format!(
                "unknown token method {other:?} (attn, lime, shap)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub method: Method,
    pub token_scores: Vec<f64>,
    pub selected: Option<Vec<bool>>,
    /// Class whose probability is explained.
    pub class_explained: usize,
    /// Model output with every token removed (Shapley base value), or the
    /// surrogate intercept for LIME.
    pub base_value: Option<f64>,
}

impl Explanation {
    pub fn with_selection(mut self, k: usize) -> Result<Self> {
        self.selected = Some(to_discrete(&self.token_scores, k)?);
        Ok(self)
    }
}

/// Attention weights of the model in evaluation mode, explaining the
/// predicted class.
pub fn attention_explain<T: Real>(model: &Model<T>, token_ids: &[usize]) -> Result<Explanation> {
    let out = model.forward(token_ids)?;
    Ok(Explanation {
        method: Method::Attn,
        class_explained: out.predicted(),
        token_scores: out.attention,
        selected: None,
        base_value: None,
    })
}

/// Top-`k` tokens by score, ties going to the lower index; `k` is clamped to
/// the post length.
pub fn to_discrete(scores: &[f64], k: usize) -> Result<Vec<bool>> {
    if k == 0 {
        return Err(Error::Config("top-k selection needs k >= 1".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut sel = vec![false; scores.len()];
    for &i in order.iter().take(k) {
        sel[i] = true;
    }
    Ok(sel)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub kernel_width: f64,
    pub ridge_alpha: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_samples: 500,
            kernel_width: 0.25,
            ridge_alpha: 1.0,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSample {
    pub keep_mask: Vec<bool>,
    pub model_prob: f64,
    pub proximity_weight: f64,
}

/// Draws `n` keep-masks with each token kept with probability one half; the
/// first mask keeps every token.
pub fn perturbation_masks(len: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<bool>> {
    let mut masks = Vec::with_capacity(n);
    masks.push(vec![true; len]);
    while masks.len() < n {
        masks.push((0..len).map(|_| rng.gen_bool(0.5)).collect());
    }
    masks
}

/// `exp(-D²/σ²)` with `D` the fraction of removed tokens.
pub fn proximity_weight(mask: &[bool], kernel_width: f64) -> f64 {
    let removed = mask.iter().filter(|&&k| !k).count() as f64 / mask.len() as f64;
    (-(removed * removed) / (kernel_width * kernel_width)).exp()
}

/// Weighted ridge regression with an unpenalised intercept. Weights are
/// rescaled to mean one before the fit, so `alpha` is measured against an
/// average sample. Returns `(intercept, coefficients)` or `None` when the
/// normal equations are not positive definite.
pub fn weighted_ridge(samples: &[PerturbationSample], alpha: f64) -> Option<(f64, Vec<f64>)> {
    let m = samples.first()?.keep_mask.len();
    let mean_w = samples.iter().map(|s| s.proximity_weight).sum::<f64>() / samples.len() as f64;
    if !(mean_w > 0.0) {
        return None;
    }
    let dim = m + 1;
    let mut xtwx = DMatrix::<f64>::zeros(dim, dim);
    let mut xtwy = DVector::<f64>::zeros(dim);
    let mut row = vec![0.0; dim];
    for s in samples {
        row[0] = 1.0;
        for (r, &k) in row[1..].iter_mut().zip(&s.keep_mask) {
            *r = if k { 1.0 } else { 0.0 };
        }
        for i in 0..dim {
            if row[i] == 0.0 {
                continue;
            }
            let wi = s.proximity_weight / mean_w * row[i];
            xtwy[i] += wi * s.model_prob;
            for j in 0..dim {
                xtwx[(i, j)] += wi * row[j];
            }
        }
    }
    for i in 1..dim {
        xtwx[(i, i)] += alpha;
    }
    let beta = xtwx.cholesky()?.solve(&xtwy);
    Some((beta[0], beta.iter().skip(1).copied().collect()))
}

/// LIME for the model's predicted class.
pub fn lime_explain<M: Classifier + ?Sized>(
    model: &M,
    token_ids: &[usize],
    config: &LimeConfig,
) -> Result<Explanation> {
    let class = crate::models::argmax(&model.class_probs(token_ids)?);
    lime_explain_class(model, token_ids, class, config)
}

pub fn lime_explain_class<M: Classifier + ?Sized>(
    model: &M,
    token_ids: &[usize],
    class: usize,
    config: &LimeConfig,
) -> Result<Explanation> {
    if token_ids.is_empty() {
        return Err(Error::EmptySequence("LIME input"));
    }
    if config.n_samples < 10 {
        return Err(Error::Config(format!(
            "LIME needs at least 10 samples, got {}",
            config.n_samples
        )));
    }
    if !(config.kernel_width > 0.0) || !(config.ridge_alpha >= 0.0) {
        return Err(Error::Config(
            "LIME kernel width must be positive and ridge alpha non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let masks = perturbation_masks(token_ids.len(), config.n_samples, &mut rng);
    let mut samples = Vec::with_capacity(masks.len());
    for keep_mask in masks {
        let probs = model.class_probs(&mask_tokens(token_ids, &keep_mask))?;
        samples.push(PerturbationSample {
            proximity_weight: proximity_weight(&keep_mask, config.kernel_width),
            model_prob: probs[class],
            keep_mask,
        });
    }
    let retry_alpha = if config.ridge_alpha > 0.0 {
        config.ridge_alpha * 10.0
    } else {
        1.0
    };
    let (intercept, coef) = weighted_ridge(&samples, config.ridge_alpha)
        .or_else(|| weighted_ridge(&samples, retry_alpha))
        .ok_or(Error::Conditioning { alpha: retry_alpha })?;
    Ok(Explanation {
        method: Method::Lime,
        token_scores: coef,
        selected: None,
        class_explained: class,
        base_value: Some(intercept),
    })
}

/// `|S|! (M-|S|-1)! / M!` for every subset size `s` in `0..M`.
fn shapley_weights(m: usize) -> Vec<f64> {
    let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
    (0..m).map(|s| fact(s) * fact(m - s - 1) / fact(m)).collect()
}

/// Exact Shapley values of `f_c` over the tokens of the post, by enumerating
/// all `2^M` coalitions once and caching their outputs.
pub fn shap_exact<M: Classifier + ?Sized>(model: &M, token_ids: &[usize], class: usize) -> Result<Explanation> {
    let m = token_ids.len();
    if m == 0 {
        return Err(Error::EmptySequence("Shapley input"));
    }
    if m > MAX_SHAP_TOKENS {
        return Err(Error::TooManyTokens {
            tokens: m,
            max: MAX_SHAP_TOKENS,
        });
    }
    let mut values = vec![0.0; 1 << m];
    let mut ids = vec![PAD_ID; m];
    for (s, v) in values.iter_mut().enumerate() {
        for (t, id) in ids.iter_mut().enumerate() {
            *id = if s >> t & 1 == 1 { token_ids[t] } else { PAD_ID };
        }
        *v = model.class_probs(&ids)?[class];
    }
    let weights = shapley_weights(m);
    let mut phi = vec![0.0; m];
    for (t, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << t;
        for s in 0..(1usize << m) {
            if s & bit == 0 {
                *p += weights[s.count_ones() as usize] * (values[s | bit] - values[s]);
            }
        }
    }
    Ok(Explanation {
        method: Method::Shap,
        token_scores: phi,
        selected: None,
        class_explained: class,
        base_value: Some(values[0]),
    })
}

/// Shapley values of an arbitrary set function over `m` players, with the
/// same enumeration as [`shap_exact`]. Returns `(φ_0, φ)`.
pub fn shapley_values(m: usize, mut f: impl FnMut(&[bool]) -> f64) -> Result<(f64, Vec<f64>)> {
    if m > MAX_SHAP_TOKENS {
        return Err(Error::TooManyTokens {
            tokens: m,
            max: MAX_SHAP_TOKENS,
        });
    }
    let mut cache: HashMap<usize, f64> = HashMap::with_capacity(1 << m);
    let mut eval = |s: usize| -> f64 {
        *cache.entry(s).or_insert_with(|| {
            let mask: Vec<bool> = (0..m).map(|t| s >> t & 1 == 1).collect();
            f(&mask)
        })
    };
    let weights = shapley_weights(m);
    let mut phi = vec![0.0; m];
    for (t, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << t;
        for s in 0..(1usize << m) {
            if s & bit == 0 {
                *p += weights[s.count_ones() as usize] * (eval(s | bit) - eval(s));
            }
        }
    }
    Ok((eval(0), phi))
}

/// One line of an explanation JSONL file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub post_id: String,
    pub method: Method,
    pub token_scores: Vec<f64>,
    pub selected: Option<Vec<bool>>,
    pub class_explained: usize,
}

impl ExplanationRecord {
    pub fn new(post_id: &str, e: &Explanation) -> Self {
        ExplanationRecord {
            post_id: post_id.to_string(),
            method: e.method,
            token_scores: e.token_scores.clone(),
            selected: e.selected.clone(),
            class_explained: e.class_explained,
        }
    }
}
