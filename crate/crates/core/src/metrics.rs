//! Evaluation battery: performance, bias, plausibility and faithfulness.
//!
//! Every metric is a pure function of its inputs. Metrics that are undefined
//! on the given data (a single-class AUROC, a community with no posts) return
//! `None` rather than a placeholder number.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Label, PAD_ID};
use crate::error::{Error, Result};
use crate::models::{argmax, Classifier, NUM_CLASSES};

/// Power used by the generalised mean of bias AUCs.
pub const GMB_POWER: f64 = -5.0;

/// One evaluated post.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub post_id: String,
    pub class_probs: [f64; NUM_CLASSES],
    pub predicted_label: Label,
    pub gt_label: Label,
    pub communities: BTreeSet<String>,
    pub token_scores: Vec<f64>,
    /// Discrete token selection derived from `token_scores`.
    pub selected: Vec<bool>,
    pub gt_rationale: Vec<bool>,
    pub gt_attention: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comprehensiveness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sufficiency: Option<f64>,
}

impl PredictionRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::Validation {
                post_id: self.post_id.clone(),
                reason,
            })
        };
        let sum: f64 = self.class_probs.iter().sum();
        if self.class_probs.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return bad(format!(
                "class probabilities {:?} are not a distribution",
                self.class_probs
            ));
        }
        let n = self.token_scores.len();
        if self.selected.len() != n || self.gt_rationale.len() != n || self.gt_attention.len() != n {
            return bad("token vectors have different lengths".into());
        }
        Ok(())
    }

    /// Summed probability of the two toxic classes.
    pub fn toxicity(&self) -> f64 {
        self.class_probs[Label::Hateful.index()] + self.class_probs[Label::Offensive.index()]
    }
}

// ---------------------------------------------------------------------------
// Performance

pub fn accuracy(records: &[PredictionRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let hits = records.iter().filter(|r| r.predicted_label == r.gt_label).count();
    hits as f64 / records.len() as f64
}

/// `counts[gold][pred]`.
pub fn confusion_matrix(gold: &[usize], pred: &[usize]) -> [[usize; NUM_CLASSES]; NUM_CLASSES] {
    let mut m = [[0; NUM_CLASSES]; NUM_CLASSES];
    for (&g, &p) in gold.iter().zip(pred) {
        m[g][p] += 1;
    }
    m
}

/// Unweighted mean of per-class F1 over all three classes. A class with no
/// true and no predicted instances contributes 0.
pub fn macro_f1_labels(gold: &[usize], pred: &[usize]) -> f64 {
    let m = confusion_matrix(gold, pred);
    let mut total = 0.0;
    for c in 0..NUM_CLASSES {
        let tp = m[c][c];
        let fp: usize = (0..NUM_CLASSES).filter(|&g| g != c).map(|g| m[g][c]).sum();
        let fneg: usize = (0..NUM_CLASSES).filter(|&p| p != c).map(|p| m[c][p]).sum();
        let denom = 2 * tp + fp + fneg;
        if denom > 0 {
            total += 2.0 * tp as f64 / denom as f64;
        }
    }
    total / NUM_CLASSES as f64
}

pub fn macro_f1(records: &[PredictionRecord]) -> f64 {
    let gold: Vec<usize> = records.iter().map(|r| r.gt_label.index()).collect();
    let pred: Vec<usize> = records.iter().map(|r| r.predicted_label.index()).collect();
    macro_f1_labels(&gold, &pred)
}

/// Mann–Whitney AUROC with ties counted as one half. `None` unless both a
/// positive and a negative are present.
///
/// Pair counts are kept in integers (doubled to absorb the halves), so the
/// result is a single division and matches explicit pair counting exactly.
pub fn binary_auroc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "binary_auroc: length mismatch");
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut twice_wins: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p_g, mut n_g) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                p_g += 1;
            } else {
                n_g += 1;
            }
            j += 1;
        }
        twice_wins += 2 * p_g * neg_below + p_g * n_g;
        neg_below += n_g;
        i = j;
    }
    Some(twice_wins as f64 / (2 * pos * neg) as f64)
}

/// One-vs-rest AUROC per class, macro-averaged over the classes for which it
/// is defined.
pub fn multiclass_auroc(records: &[PredictionRecord]) -> Option<f64> {
    let per_class: Vec<f64> = (0..NUM_CLASSES)
        .filter_map(|c| {
            let scores: Vec<f64> = records.iter().map(|r| r.class_probs[c]).collect();
            let labels: Vec<bool> = records.iter().map(|r| r.gt_label.index() == c).collect();
            binary_auroc(&scores, &labels)
        })
        .collect();
    if per_class.is_empty() {
        None
    } else {
        Some(per_class.iter().sum::<f64>() / per_class.len() as f64)
    }
}

// ---------------------------------------------------------------------------
// Bias

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BiasAucs {
    pub subgroup: Option<f64>,
    pub bpsn: Option<f64>,
    pub bnsp: Option<f64>,
}

fn auroc_where(records: &[PredictionRecord], keep: impl Fn(&PredictionRecord) -> bool) -> Option<f64> {
    let (scores, labels): (Vec<f64>, Vec<bool>) = records
        .iter()
        .filter(|r| keep(r))
        .map(|r| (r.toxicity(), r.gt_label.is_toxic()))
        .unzip();
    binary_auroc(&scores, &labels)
}

/// Subgroup, BPSN and BNSP AUCs for one community, with toxic meaning
/// hateful or offensive and the score being the summed toxic probability.
pub fn bias_aucs(records: &[PredictionRecord], community: &str) -> BiasAucs {
    let mentions = |r: &PredictionRecord| r.communities.contains(community);
    BiasAucs {
        subgroup: auroc_where(records, |r| mentions(r)),
        bpsn: auroc_where(records, |r| r.gt_label.is_toxic() != mentions(r)),
        bnsp: auroc_where(records, |r| r.gt_label.is_toxic() == mentions(r)),
    }
}

/// Power mean `(Σ v^p / n)^(1/p)`; `p = 0` is the geometric mean.
pub fn power_mean(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    if p == 0.0 {
        return Some((values.iter().map(|v| v.ln()).sum::<f64>() / n).exp());
    }
    Some((values.iter().map(|v| v.powf(p)).sum::<f64>() / n).powf(1.0 / p))
}

/// Every community mentioned by at least `min_posts` records.
pub fn communities(records: &[PredictionRecord], min_posts: usize) -> Vec<String> {
    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    for r in records {
        for c in &r.communities {
            *counts.entry(c).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .filter(|&(_, n)| n >= min_posts.max(1))
        .map(|(c, _)| c.to_string())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityRow {
    pub community: String,
    pub posts: usize,
    #[serde(flatten)]
    pub aucs: BiasAucs,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Gmb {
    pub subgroup: Option<f64>,
    pub bpsn: Option<f64>,
    pub bnsp: Option<f64>,
}

/// Per-community AUCs and their generalised means. Absent AUCs are left out
/// of the mean.
pub fn bias_report(records: &[PredictionRecord], community_list: &[String], p: f64) -> (Vec<CommunityRow>, Gmb) {
    let rows: Vec<CommunityRow> = community_list
        .iter()
        .map(|c| CommunityRow {
            community: c.clone(),
            posts: records.iter().filter(|r| r.communities.contains(c)).count(),
            aucs: bias_aucs(records, c),
        })
        .collect();
    let gather = |f: fn(&BiasAucs) -> Option<f64>| {
        let vals: Vec<f64> = rows.iter().filter_map(|r| f(&r.aucs)).collect();
        power_mean(&vals, p)
    };
    let gmb = Gmb {
        subgroup: gather(|a| a.subgroup),
        bpsn: gather(|a| a.bpsn),
        bnsp: gather(|a| a.bnsp),
    };
    (rows, gmb)
}

// ---------------------------------------------------------------------------
// Plausibility

/// Intersection over union of two token selections; two empty selections
/// agree perfectly.
pub fn iou(pred: &[bool], gt: &[bool]) -> f64 {
    let inter = pred.iter().zip(gt).filter(|(&p, &g)| p && g).count();
    let union = pred.iter().zip(gt).filter(|(&p, &g)| p || g).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Match counts behind [`iou_f1`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IouCounts {
    pub matches: usize,
    pub predicted: usize,
    pub gold: usize,
}

/// Each post contributes at most one predicted and one gold rationale: a
/// non-empty selection, or the empty pair when both sides are empty. A post
/// matches when the IOU of its selections exceeds 0.5.
pub fn iou_counts(preds: &[Vec<bool>], gts: &[Vec<bool>]) -> IouCounts {
    let mut c = IouCounts::default();
    for (p, g) in preds.iter().zip(gts) {
        let p_any = p.iter().any(|&b| b);
        let g_any = g.iter().any(|&b| b);
        let both_empty = !p_any && !g_any;
        c.predicted += usize::from(p_any || both_empty);
        c.gold += usize::from(g_any || both_empty);
        c.matches += usize::from(iou(p, g) > 0.5);
    }
    c
}

pub fn iou_f1(preds: &[Vec<bool>], gts: &[Vec<bool>]) -> Option<f64> {
    let c = iou_counts(preds, gts);
    if c.predicted == 0 && c.gold == 0 {
        return None;
    }
    let precision = if c.predicted == 0 {
        0.0
    } else {
        c.matches as f64 / c.predicted as f64
    };
    let recall = if c.gold == 0 {
        0.0
    } else {
        c.matches as f64 / c.gold as f64
    };
    Some(if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    })
}

/// Micro-averaged token F1 over the corpus; `None` when no token is
/// positive on either side.
pub fn token_f1(preds: &[Vec<bool>], gts: &[Vec<bool>]) -> Option<f64> {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (p, g) in preds.iter().zip(gts) {
        for (&pi, &gi) in p.iter().zip(g) {
            match (pi, gi) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => {}
            }
        }
    }
    let denom = 2 * tp + fp + fneg;
    (denom > 0).then(|| 2.0 * tp as f64 / denom as f64)
}

/// Step-wise average precision: thresholds at each distinct score, from the
/// highest down, with precision weighted by the recall gained at that step.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let total_pos = labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut gained = 0;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            gained += usize::from(labels[order[j]]);
            j += 1;
        }
        tp += gained;
        seen += j - i;
        if gained > 0 {
            ap += (gained as f64 / total_pos as f64) * (tp as f64 / seen as f64);
        }
        i = j;
    }
    Some(ap)
}

/// AUPRC over all tokens pooled corpus-wide.
pub fn token_auprc(scores: &[Vec<f64>], gts: &[Vec<bool>]) -> Option<f64> {
    let s: Vec<f64> = scores.iter().flatten().copied().collect();
    let g: Vec<bool> = gts.iter().flatten().copied().collect();
    average_precision(&s, &g)
}

/// AUPRC computed per post and averaged over posts that have a positive token.
pub fn token_auprc_per_post(scores: &[Vec<f64>], gts: &[Vec<bool>]) -> Option<f64> {
    let per: Vec<f64> = scores
        .iter()
        .zip(gts)
        .filter_map(|(s, g)| average_precision(s, g))
        .collect();
    (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64)
}

// ---------------------------------------------------------------------------
// Faithfulness

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Faithfulness {
    pub comprehensiveness: f64,
    pub sufficiency: f64,
}

/// Replaces unselected (`keep = false`) positions with the padding id.
pub fn mask_tokens(ids: &[usize], keep: &[bool]) -> Vec<usize> {
    ids.iter()
        .zip(keep)
        .map(|(&id, &k)| if k { id } else { PAD_ID })
        .collect()
}

/// Probability drops for the predicted class when the selection is removed
/// (comprehensiveness) and when only the selection is kept (sufficiency).
pub fn faithfulness<M: Classifier + ?Sized>(model: &M, ids: &[usize], selected: &[bool]) -> Result<Faithfulness> {
    if ids.len() != selected.len() {
        return Err(Error::shape(
            "faithfulness",
            format!("{} ids, {} selection flags", ids.len(), selected.len()),
        ));
    }
    let full = model.class_probs(ids)?;
    let c = argmax(&full);
    let removed: Vec<bool> = selected.iter().map(|&s| !s).collect();
    let without = model.class_probs(&mask_tokens(ids, &removed))?;
    let only = model.class_probs(&mask_tokens(ids, selected))?;
    Ok(Faithfulness {
        comprehensiveness: full[c] - without[c],
        sufficiency: full[c] - only[c],
    })
}

pub fn comprehensiveness<M: Classifier + ?Sized>(model: &M, ids: &[usize], selected: &[bool]) -> Result<f64> {
    Ok(faithfulness(model, ids, selected)?.comprehensiveness)
}

pub fn sufficiency<M: Classifier + ?Sized>(model: &M, ids: &[usize], selected: &[bool]) -> Result<f64> {
    Ok(faithfulness(model, ids, selected)?.sufficiency)
}

// ---------------------------------------------------------------------------
// Report

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub records: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub auroc: Option<f64>,
    pub gmb_subgroup: Option<f64>,
    pub gmb_bpsn: Option<f64>,
    pub gmb_bnsp: Option<f64>,
    pub iou_f1: Option<f64>,
    pub token_f1: Option<f64>,
    pub auprc: Option<f64>,
    pub comprehensiveness: Option<f64>,
    pub sufficiency: Option<f64>,
    pub communities: Vec<CommunityRow>,
    /// Posts the token method could not explain.
    #[serde(default)]
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportOptions {
    pub gmb_power: f64,
    /// Communities mentioned by fewer records are left out of the bias means.
    pub min_community_posts: usize,
    pub auprc_per_post: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            gmb_power: GMB_POWER,
            min_community_posts: 1,
            auprc_per_post: false,
        }
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn evaluate(method: &str, records: &[PredictionRecord], opts: &ReportOptions) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::EmptySequence("evaluation records"));
    }
    for r in records {
        r.validate()?;
    }
    let list = communities(records, opts.min_community_posts);
    let (rows, gmb) = bias_report(records, &list, opts.gmb_power);
    let preds: Vec<Vec<bool>> = records.iter().map(|r| r.selected.clone()).collect();
    let gts: Vec<Vec<bool>> = records.iter().map(|r| r.gt_rationale.clone()).collect();
    let scores: Vec<Vec<f64>> = records.iter().map(|r| r.token_scores.clone()).collect();
    let auprc = if opts.auprc_per_post {
        token_auprc_per_post(&scores, &gts)
    } else {
        token_auprc(&scores, &gts)
    };
    Ok(EvalReport {
        method: method.to_string(),
        records: records.len(),
        accuracy: accuracy(records),
        macro_f1: macro_f1(records),
        auroc: multiclass_auroc(records),
        gmb_subgroup: gmb.subgroup,
        gmb_bpsn: gmb.bpsn,
        gmb_bnsp: gmb.bnsp,
        iou_f1: iou_f1(&preds, &gts),
        token_f1: token_f1(&preds, &gts),
        auprc,
        comprehensiveness: mean_of(records.iter().filter_map(|r| r.comprehensiveness)),
        sufficiency: mean_of(records.iter().filter_map(|r| r.sufficiency)),
        communities: rows,
        skipped: 0,
    })
}

/// Column headers of the summary table, in display order.
pub const TABLE_COLUMNS: [&str; 11] = [
    "Acc.", "Macro F1", "AUROC", "GMB-Sub", "GMB-BPSN", "GMB-BNSP", "IOU F1", "Token F1", "AUPRC", "Comp.", "Suff.",
];

impl EvalReport {
    pub fn table_row(&self) -> [Option<f64>; 11] {
        [
            Some(self.accuracy),
            Some(self.macro_f1),
            self.auroc,
            self.gmb_subgroup,
            self.gmb_bpsn,
            self.gmb_bnsp,
            self.iou_f1,
            self.token_f1,
            self.auprc,
            self.comprehensiveness,
            self.sufficiency,
        ]
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// One header row and one value row; absent metrics are left blank.
    pub fn save_table(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["Model"];
        header.extend(TABLE_COLUMNS);
        w.write_record(&header)?;
        let mut row = vec![self.method.clone()];
        row.extend(
            self.table_row()
                .iter()
                .map(|v| v.map(|x| format!("{x:.3}")).unwrap_or_default()),
        );
        w.write_record(&row)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_oracle(scores: &[f64], labels: &[bool]) -> Option<f64> {
        let mut twice = 0u64;
        let mut pairs = 0u64;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    pairs += 1;
                    twice += if scores[i] > scores[j] {
                        2
                    } else if scores[i] == scores[j] {
                        1
                    } else {
                        0
                    };
                }
            }
        }
        (pairs > 0).then(|| twice as f64 / (2 * pairs) as f64)
    }

    #[test]
    fn macro_f1_hand_confusion() {
        // rows are gold, columns predicted: [[2,0,0],[0,1,1],[0,0,2]]
        let gold = [0, 0, 1, 1, 2, 2];
        let pred = [0, 0, 1, 2, 2, 2];
        // class 0: 1.0; class 1: 2/3; class 2: 2*2/(4+1) = 0.8
        let expected = (1.0 + 2.0 / 3.0 + 0.8) / 3.0;
        assert!((macro_f1_labels(&gold, &pred) - expected).abs() < 1e-12);
    }

    #[test]
    fn macro_f1_absent_class_counts_zero() {
        assert!((macro_f1_labels(&[0, 1], &[0, 1]) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn auroc_edge_cases() {
        assert_eq!(binary_auroc(&[0.1, 0.9], &[false, true]), Some(1.0));
        assert_eq!(binary_auroc(&[0.5; 4], &[true, false, true, false]), Some(0.5));
        assert_eq!(binary_auroc(&[0.1, 0.2], &[true, true]), None);
    }

    #[test]
    fn auroc_six_items_matches_pairs() {
        let s = [0.3, 0.7, 0.3, 0.9, 0.1, 0.7];
        let l = [true, false, false, true, false, true];
        assert_eq!(binary_auroc(&s, &l), pair_oracle(&s, &l));
    }

    #[test]
    fn gmb_hand_value() {
        let v = power_mean(&[1.0, 0.5], -5.0).unwrap();
        let expected = ((1.0 + 32.0) / 2.0f64).powf(-0.2);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.570_825).abs() < 1e-6);
        assert!((power_mean(&[0.3, 0.5], 1.0).unwrap() - 0.4).abs() < 1e-12);
        assert!((power_mean(&[0.7; 3], -5.0).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(power_mean(&[], -5.0), None);
    }

    #[test]
    fn iou_cases() {
        let p = vec![false, true, true, false];
        let g = vec![false, false, true, true];
        assert!((iou(&p, &g) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(iou(&[false; 3], &[false; 3]), 1.0);
        assert_eq!(iou_f1(&[p.clone()], &[p.clone()]), Some(1.0));
        assert_eq!(iou_f1(&[p], &[g]), Some(0.0));
    }

    #[test]
    fn iou_f1_half_matching() {
        let t = |v: &[u8]| v.iter().map(|&b| b == 1).collect::<Vec<bool>>();
        let preds = vec![t(&[1, 1, 0]), t(&[1, 0, 0]), t(&[0, 0, 1]), t(&[0, 0, 0])];
        let gts = vec![t(&[1, 1, 0]), t(&[0, 1, 1]), t(&[0, 0, 1]), t(&[1, 0, 0])];
        // matches: posts 0 and 2; predicted instances 3; gold instances 4
        let c = iou_counts(&preds, &gts);
        assert_eq!(
            c,
            IouCounts {
                matches: 2,
                predicted: 3,
                gold: 4
            }
        );
        let (p, r) = (2.0 / 3.0, 0.5);
        assert!((iou_f1(&preds, &gts).unwrap() - 2.0 * p * r / (p + r)).abs() < 1e-12);
    }

    #[test]
    fn token_f1_cases() {
        let g = vec![vec![true, false, true, false]];
        assert_eq!(token_f1(&g, &g), Some(1.0));
        let all = vec![vec![true; 4]];
        assert!((token_f1(&all, &g).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let dis = vec![vec![false, true, false, true]];
        assert_eq!(token_f1(&dis, &g), Some(0.0));
        assert_eq!(token_f1(&[vec![false; 2]], &[vec![false; 2]]), None);
    }

    #[test]
    fn auprc_perfect_and_hand() {
        let s = vec![vec![0.9, 0.8, 0.1, 0.2]];
        let g = vec![vec![true, true, false, false]];
        assert_eq!(token_auprc(&s, &g), Some(1.0));
        // ranks: 0.9 (+), 0.5 (-), 0.4 (+), 0.3 (-), 0.2 (+)
        let s = [0.9, 0.5, 0.4, 0.3, 0.2];
        let l = [true, false, true, false, true];
        let expected = (1.0 + 2.0 / 3.0 + 3.0 / 5.0) / 3.0;
        assert!((average_precision(&s, &l).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn auprc_ties_form_one_step() {
        // all tied: one threshold, precision = positive rate
        let ap = average_precision(&[0.5; 4], &[true, false, false, true]).unwrap();
        assert!((ap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn faithfulness_constant_model_is_zero() {
        let model = |_: &[usize]| [0.2, 0.3, 0.5];
        let f = faithfulness(&model, &[4, 5, 6], &[true, false, true]).unwrap();
        assert_eq!(f.comprehensiveness, 0.0);
        assert_eq!(f.sufficiency, 0.0);
    }

    #[test]
    fn faithfulness_single_token_reader() {
        // reads only whether position 1 holds a real token
        let model = |ids: &[usize]| {
            let p = if ids[1] != PAD_ID { 0.9 } else { 0.2 };
            [p, 1.0 - p, 0.0]
        };
        let sel = [false, true, false];
        let f = faithfulness(&model, &[4, 5, 6], &sel).unwrap();
        assert!((f.comprehensiveness - 0.7).abs() < 1e-12);
        assert!(f.sufficiency.abs() < 1e-12);
        let none = faithfulness(&model, &[4, 5, 6], &[false; 3]).unwrap();
        assert_eq!(none.comprehensiveness, 0.0);
        let all = faithfulness(&model, &[4, 5, 6], &[true; 3]).unwrap();
        assert_eq!(all.sufficiency, 0.0);
    }

    #[test]
    fn community_without_posts_is_absent() {
        let r = PredictionRecord {
            post_id: "a".into(),
            class_probs: [0.1, 0.1, 0.8],
            predicted_label: Label::Normal,
            gt_label: Label::Normal,
            communities: BTreeSet::new(),
            token_scores: vec![1.0],
            selected: vec![true],
            gt_rationale: vec![false],
            gt_attention: vec![1.0],
            comprehensiveness: None,
            sufficiency: None,
        };
        assert_eq!(bias_aucs(&[r], "Women"), BiasAucs::default());
    }
}
