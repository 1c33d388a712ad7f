//! Synthetic corpus in the raw annotated-post format, plus matching
//! word vectors.
//!
//! Posts are assembled from a small lexicon: neutral filler, offensive and
//! dehumanising words, and community mentions. Toxic posts carry one toxic
//! span. Three simulated annotators label each post with independent noise
//! and mark the span as their rationale with jittered boundaries, so label
//! disagreements, undecided posts and imperfect rationales all occur.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Annotation, Label, RawLabel, RawPost};
use crate::error::{Error, Result};

const NEUTRAL: &[&str] = &[
    "the", "a", "and", "to", "of", "in", "is", "it", "that", "this", "for", "on", "with", "was", "they", "you", "we",
    "all", "just", "about", "people", "today", "time", "day", "going", "think", "know", "really", "new", "good",
    "some", "more", "here", "there", "what", "when", "would", "could", "like", "see", "still", "back", "again", "news",
    "city", "work", "game", "music", "weekend", "morning", "coffee", "team", "video", "school", "story", "post",
    "read", "said", "watch", "year", "night", "home", "friends", "world", "country", "vote", "street",
];
const OFFENSIVE: &[&str] = &[
    "idiot", "idiots", "stupid", "moron", "morons", "dumb", "trash", "clown", "clowns", "pathetic", "losers", "shut",
];
const HATEFUL: &[&str] = &[
    "vermin",
    "subhuman",
    "parasites",
    "invaders",
    "filth",
    "plague",
    "savages",
    "infest",
    "exterminate",
    "deport",
];
const COMMUNITIES: &[(&str, &[&str])] = &[
    ("African", &["africans", "blacks"]),
    ("Islam", &["muslims", "islam"]),
    ("Jewish", &["jews", "jewish"]),
    ("Women", &["women", "girls"]),
    ("Refugee", &["refugees", "migrants"]),
    ("Homosexual", &["gays", "lesbians"]),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub posts: usize,
    pub seed: u64,
    pub min_len: usize,
    pub max_len: usize,
    /// Sampling weights of hateful, offensive and normal posts.
    pub class_weights: [f64; 3],
    /// Probability that an annotator reports the true class.
    pub annotator_accuracy: f64,
    /// Probability that a normal post mentions a community.
    pub normal_mention_rate: f64,
    /// Probability of moving each rationale boundary by one token.
    pub rationale_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            posts: 1000,
            seed: 7,
            min_len: 6,
            max_len: 18,
            class_weights: [0.3, 0.3, 0.4],
            annotator_accuracy: 0.8,
            normal_mention_rate: 0.35,
            rationale_jitter: 0.3,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_len < 4 || self.max_len < self.min_len {
            return Err(Error::Config(format!(
                "post lengths must satisfy 4 <= min_len <= max_len, got {}..{}",
                self.min_len, self.max_len
            )));
        }
        let probs = [self.annotator_accuracy, self.normal_mention_rate, self.rationale_jitter];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || self.class_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("synthetic probabilities must lie in [0, 1]".into()));
        }
        if self.class_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("class weights sum to zero".into()));
        }
        Ok(())
    }
}

/// Every word the generator can emit, in a fixed order.
pub fn lexicon() -> Vec<&'static str> {
    let mut words: Vec<&str> = NEUTRAL.iter().chain(OFFENSIVE).chain(HATEFUL).copied().collect();
    words.extend(COMMUNITIES.iter().flat_map(|(_, m)| m.iter().copied()));
    words
}

fn pick_weighted(rng: &mut ChaCha8Rng, weights: &[f64; 3]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn annotate(rng: &mut ChaCha8Rng, truth: Label, accuracy: f64) -> RawLabel {
    let label = if rng.gen_bool(accuracy) {
        truth
    } else {
        *Label::ALL
            .iter()
            .filter(|&&l| l != truth)
            .collect::<Vec<_>>()
            .choose(rng)
            .copied()
            .expect("two other labels")
    };
    match label {
        Label::Hateful => RawLabel::HateSpeech,
        Label::Offensive => RawLabel::Offensive,
        Label::Normal => RawLabel::Normal,
    }
}

fn jitter(rng: &mut ChaCha8Rng, (start, end): (usize, usize), len: usize, p: f64) -> (usize, usize) {
    let mut s = start as isize;
    let mut e = end as isize;
    if rng.gen_bool(p) {
        s += if rng.gen_bool(0.5) { 1 } else { -1 };
    }
    if rng.gen_bool(p) {
        e += if rng.gen_bool(0.5) { 1 } else { -1 };
    }
    let s = s.clamp(0, len as isize - 1) as usize;
    let e = e.clamp(s as isize + 1, len as isize) as usize;
    (s, e)
}

/// One post: tokens, true class, communities mentioned, toxic span `[start, end)`.
struct Draft {
    tokens: Vec<String>,
    label: Label,
    community: Option<&'static str>,
    span: Option<(usize, usize)>,
}

fn draft(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Draft {
    let label = Label::ALL[pick_weighted(rng, &cfg.class_weights)];
    let len = rng.gen_range(cfg.min_len..=cfg.max_len);
    let mut tokens: Vec<String> = (0..len)
        .map(|_| NEUTRAL.choose(rng).expect("non-empty").to_string())
        .collect();
    let (name, mentions) = *COMMUNITIES.choose(rng).expect("non-empty");
    let mention = mentions.choose(rng).expect("non-empty").to_string();
    let (core, community): (Vec<String>, Option<&str>) = match label {
        Label::Normal => {
            if rng.gen_bool(cfg.normal_mention_rate) {
                let at = rng.gen_range(0..len);
                tokens[at] = mention;
                return Draft {
                    tokens,
                    label,
                    community: Some(name),
                    span: None,
                };
            }
            return Draft {
                tokens,
                label,
                community: None,
                span: None,
            };
        }
        Label::Offensive => {
            let n = rng.gen_range(1..=2);
            let mut core: Vec<String> = (0..n)
                .map(|_| OFFENSIVE.choose(rng).expect("non-empty").to_string())
                .collect();
            if rng.gen_bool(0.4) {
                core.insert(0, mention);
                (core, Some(name))
            } else {
                (core, None)
            }
        }
        Label::Hateful => {
            let n = rng.gen_range(1..=2);
            let mut core: Vec<String> = vec![mention];
            core.extend((0..n).map(|_| HATEFUL.choose(rng).expect("non-empty").to_string()));
            (core, Some(name))
        }
    };
    let start = rng.gen_range(0..=len - core.len());
    let end = start + core.len();
    tokens.splice(start..end, core);
    Draft {
        tokens,
        label,
        community,
        span: Some((start, end)),
    }
}

/// Generates `cfg.posts` posts with ids `synth_00000` upward.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<RawPost>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut posts = Vec::with_capacity(cfg.posts);
    for i in 0..cfg.posts {
        let d = draft(&mut rng, cfg);
        let len = d.tokens.len();
        let mut annotators = Vec::with_capacity(3);
        let mut rationales = Vec::new();
        for _ in 0..3 {
            let label = annotate(&mut rng, d.label, cfg.annotator_accuracy);
            let toxic = label != RawLabel::Normal;
            let target = match (toxic, d.community) {
                (true, Some(c)) => vec![c.to_string()],
                (false, Some(c)) if rng.gen_bool(0.5) => vec![c.to_string()],
                _ => vec!["None".to_string()],
            };
            if toxic {
                let span = match d.span {
                    Some(span) => jitter(&mut rng, span, len, cfg.rationale_jitter),
                    None => {
                        let s = rng.gen_range(0..len);
                        (s, (s + rng.gen_range(1..=2)).min(len))
                    }
                };
                rationales.push((0..len).map(|t| (span.0..span.1).contains(&t)).collect());
            }
            annotators.push(Annotation {
                label,
                annotator_id: Some(rng.gen_range(1..=250)),
                target,
            });
        }
        posts.push(RawPost {
            post_id: format!("synth_{i:05}"),
            annotators,
            rationales,
            post_tokens: d.tokens,
        });
    }
    Ok(posts)
}

/// Word vectors in `token v1 ... vD` text form. Words in the same lexical
/// group share a random direction, plus per-word noise; a `coverage` fraction
/// of the lexicon is written so that some words fall back to random rows.
pub fn embedding_text(dim: usize, coverage: f64, seed: u64) -> Result<String> {
    if dim == 0 || !(0.0..=1.0).contains(&coverage) {
        return Err(Error::Config(
            "embedding dim must be positive and coverage in [0, 1]".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut direction = || -> Vec<f64> { (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect() };
    let groups: Vec<(Vec<f64>, Vec<&str>)> = vec![
        (vec![0.0; dim], NEUTRAL.to_vec()),
        (direction(), OFFENSIVE.to_vec()),
        (direction(), HATEFUL.to_vec()),
        (
            direction(),
            COMMUNITIES.iter().flat_map(|(_, m)| m.iter().copied()).collect(),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = String::new();
    let mut seen = BTreeSet::new();
    for (dir, words) in groups {
        for w in words {
            if !seen.insert(w) || !rng.gen_bool(coverage) {
                continue;
            }
            out.push_str(w);
            for d in &dir {
                let _ = write!(out, " {:.5}", d + rng.gen_range(-0.25..0.25));
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn write_embeddings(path: &Path, dim: usize, coverage: f64, seed: u64) -> Result<()> {
    let text = embedding_text(dim, coverage, seed)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{resolve_post, LabelVote};

    #[test]
    fn generation_is_seeded() {
        let cfg = SynthConfig {
            posts: 50,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 8, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn posts_are_well_formed() {
        let cfg = SynthConfig {
            posts: 300,
            ..SynthConfig::default()
        };
        let posts = generate(&cfg).unwrap();
        let mut undecided = 0;
        for p in &posts {
            assert!((cfg.min_len..=cfg.max_len).contains(&p.post_tokens.len()));
            assert_eq!(p.annotators.len(), 3);
            assert!(p
                .rationales
                .iter()
                .all(|r| r.len() == p.post_tokens.len() && r.iter().any(|&b| b)));
            let labels: Vec<RawLabel> = p.annotators.iter().map(|a| a.label).collect();
            if crate::data::resolve_label(&labels) == LabelVote::Undecided {
                undecided += 1;
            }
            let _ = resolve_post(p, 128).unwrap();
        }
        assert!(undecided > 0 && undecided < posts.len() / 5);
    }

    #[test]
    fn embeddings_cover_the_lexicon() {
        let text = embedding_text(8, 1.0, 3).unwrap();
        assert_eq!(text.lines().count(), lexicon().len());
        assert!(text.lines().all(|l| l.split(' ').count() == 9));
    }
}
