//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use biatt::data::{self, Label, PrepareOptions, PreparedDataset, ResolvedPost};
use biatt::synthetic::{self, SynthConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Synthetic corpus run through the full preparation step with text vectors.
pub fn prepared_corpus(posts: usize, dim: usize, seed: u64) -> PreparedDataset {
    let dir = tempfile::tempdir().unwrap();
    let vectors = dir.path().join("vectors.txt");
    synthetic::write_embeddings(&vectors, dim, 0.95, seed).unwrap();
    let raw = synthetic::generate(&SynthConfig {
        posts,
        seed,
        ..SynthConfig::default()
    })
    .unwrap();
    let report = data::parse_dataset_str(&serde_json::to_string(&as_object(&raw)).unwrap()).unwrap();
    let opts = PrepareOptions {
        seed,
        embedding_dim: dim,
        ..PrepareOptions::default()
    };
    data::prepare(report, Some(&vectors), &opts).unwrap().0
}

fn as_object(posts: &[data::RawPost]) -> serde_json::Map<String, serde_json::Value> {
    posts
        .iter()
        .map(|p| (p.post_id.clone(), serde_json::to_value(p).unwrap()))
        .collect()
}

/// `n` posts drawn per label in proportion to label frequency (largest
/// remainder), each label's posts shuffled with `seed`.
pub fn stratified_subset<'a>(posts: &[&'a ResolvedPost], n: usize, seed: u64) -> Vec<&'a ResolvedPost> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<&ResolvedPost>> = Label::ALL
        .iter()
        .map(|&l| posts.iter().copied().filter(|p| p.label == l).collect())
        .collect();
    let total = posts.len() as f64;
    let quotas: Vec<f64> = groups.iter().map(|g| g.len() as f64 * n as f64 / total).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())));
    let mut left = n - sizes.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    let mut out = Vec::with_capacity(n);
    for (mut g, k) in groups.into_iter().zip(sizes) {
        g.shuffle(&mut rng);
        out.extend(g.into_iter().take(k));
    }
    out
}

/// AUROC by explicit enumeration of positive/negative pairs, ties as 1/2.
pub fn pair_auroc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut twice = 0u64;
    let mut pairs = 0u64;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1;
                if scores[i] > scores[j] {
                    twice += 2;
                } else if scores[i] == scores[j] {
                    twice += 1;
                }
            }
        }
    }
    (pairs > 0).then(|| twice as f64 / (2 * pairs) as f64)
}

/// Average precision by sweeping every distinct score as a threshold
/// (predict positive when score >= threshold), summing precision times the
/// recall gained.
pub fn sweep_average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 {
        return None;
    }
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut ap, mut prev_recall) = (0.0, 0.0);
    for th in thresholds {
        let predicted: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= th).collect();
        let tp = predicted.iter().filter(|&&i| labels[i]).count();
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / predicted.len() as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(ap)
}

pub fn set_of(flags: &[bool]) -> BTreeSet<usize> {
    flags.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

/// Total variation of `a` over adjacent pairs whose ground truth is equal.
pub fn constant_region_tv(a: &[f64], gt: &[f64]) -> f64 {
    (0..a.len().saturating_sub(1))
        .filter(|&t| gt[t] == gt[t + 1])
        .map(|t| (a[t] - a[t + 1]).abs())
        .sum()
}
