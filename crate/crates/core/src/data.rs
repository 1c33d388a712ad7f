//! Dataset ingestion: majority-vote resolution, ground-truth attention,
//! vocabulary, embeddings and stratified splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const DEFAULT_MAX_LEN: usize = 128;

/// Label as written by one annotator in the raw dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RawLabel {
    #[serde(rename = "hatespeech")]
    HateSpeech,
    #[serde(rename = "offensive")]
    Offensive,
    #[serde(rename = "normal")]
    Normal,
}

/// Resolved class of a post.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Hateful,
    Offensive,
    Normal,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Hateful, Label::Offensive, Label::Normal];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn is_toxic(self) -> bool {
        self != Label::Normal
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Hateful => "hateful",
            Label::Offensive => "offensive",
            Label::Normal => "normal",
        }
    }
}

impl From<RawLabel> for Label {
    fn from(raw: RawLabel) -> Self {
        match raw {
            RawLabel::HateSpeech => Label::Hateful,
            RawLabel::Offensive => Label::Offensive,
            RawLabel::Normal => Label::Normal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub label: RawLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_id: Option<i64>,
    #[serde(default)]
    pub target: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPost {
    pub post_id: String,
    pub annotators: Vec<Annotation>,
    #[serde(default, deserialize_with = "de_rationales", serialize_with = "ser_rationales")]
    pub rationales: Vec<Vec<bool>>,
    pub post_tokens: Vec<String>,
}

// The dataset stores rationales as 0/1 integers; booleans are accepted too.
fn de_rationales<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<bool>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Bool(bool),
        Int(i64),
        Float(f64),
    }
    let raw: Vec<Vec<Flag>> = Vec::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|f| match f {
                    Flag::Bool(b) => b,
                    Flag::Int(i) => i != 0,
                    Flag::Float(x) => x != 0.0,
                })
                .collect()
        })
        .collect())
}

fn ser_rationales<S: Serializer>(r: &[Vec<bool>], s: S) -> Result<S::Ok, S::Error> {
    let ints: Vec<Vec<u8>> = r.iter().map(|v| v.iter().map(|&b| b as u8).collect()).collect();
    ints.serialize(s)
}

impl RawPost {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.post_tokens.is_empty() {
            return Err("post has no tokens".into());
        }
        if self.annotators.is_empty() || self.annotators.len() > 3 {
            return Err(format!("expected 1-3 annotators, found {}", self.annotators.len()));
        }
        for (i, r) in self.rationales.iter().enumerate() {
            if r.len() != self.post_tokens.len() {
                return Err(format!(
                    "rationale {i} has length {} but the post has {} tokens",
                    r.len(),
                    self.post_tokens.len()
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub post_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParseReport {
    pub posts: Vec<RawPost>,
    pub rejected: Vec<Rejection>,
}

/// Reads the dataset JSON object keyed by post id. Malformed posts are
/// reported and skipped; an unreadable or non-object file is an error.
pub fn parse_dataset(path: &Path) -> Result<ParseReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_str(&text).map_err(|e| Error::json(path, e))
}

pub fn parse_dataset_str(text: &str) -> std::result::Result<ParseReport, serde_json::Error> {
    let object: BTreeMap<String, serde_json::Value> = serde_json::from_str(text)?;
    let mut report = ParseReport::default();
    for (key, value) in object {
        match serde_json::from_value::<RawPost>(value) {
            Ok(post) => match post.validate() {
                Ok(()) => report.posts.push(post),
                Err(reason) => report.rejected.push(Rejection {
                    post_id: post.post_id,
                    reason,
                }),
            },
            Err(e) => report.rejected.push(Rejection {
                post_id: key,
                reason: e.to_string(),
            }),
        }
    }
    Ok(report)
}

pub fn write_dataset(path: &Path, posts: &[RawPost]) -> Result<()> {
    let object: BTreeMap<&str, &RawPost> = posts.iter().map(|p| (p.post_id.as_str(), p)).collect();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &object).map_err(|e| Error::json(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelVote {
    Decided(Label),
    Undecided,
}

/// Strict-majority label; no majority yields `Undecided`.
pub fn resolve_label(labels: &[RawLabel]) -> LabelVote {
    let mut counts = [0usize; 3];
    for &l in labels {
        counts[Label::from(l).index()] += 1;
    }
    Label::ALL
        .into_iter()
        .find(|l| 2 * counts[l.index()] > labels.len())
        .map_or(LabelVote::Undecided, LabelVote::Decided)
}

/// Communities named by at least two annotators. The literal "None" marker
/// used by the dataset is not a community.
pub fn resolve_targets(targets: &[Vec<String>]) -> BTreeSet<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for annotator in targets {
        let distinct: BTreeSet<&str> = annotator.iter().map(String::as_str).collect();
        for c in distinct {
            *counts.entry(c).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .filter(|&(c, n)| n >= 2 && c != "None")
        .map(|(c, _)| c.to_string())
        .collect()
}

/// Ground-truth attention: uniform `1/L` for normal posts (or toxic posts
/// without rationales), otherwise softmax of the mean rationale vector.
pub fn build_gt_attention(rationales: &[Vec<bool>], label: Label, len: usize) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::EmptySequence("ground-truth attention for a post without tokens"));
    }
    if let Some(r) = rationales.iter().find(|r| r.len() != len) {
        return Err(Error::shape(
            "build_gt_attention",
            format!("rationale of {} for {len} tokens", r.len()),
        ));
    }
    if label == Label::Normal || rationales.is_empty() {
        return Ok(vec![1.0 / len as f64; len]);
    }
    let n = rationales.len() as f64;
    let mean: Vec<f64> = (0..len)
        .map(|t| rationales.iter().filter(|r| r[t]).count() as f64 / n)
        .collect();
    crate::autodiff::masked_softmax_values(&mean, &vec![true; len])
}

/// Discrete human rationale: tokens marked by at least half of the rationale vectors.
pub fn majority_rationale(rationales: &[Vec<bool>], label: Label, len: usize) -> Vec<bool> {
    if label == Label::Normal || rationales.is_empty() {
        return vec![false; len];
    }
    (0..len)
        .map(|t| 2 * rationales.iter().filter(|r| r[t]).count() >= rationales.len())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPost {
    pub post_id: String,
    pub tokens: Vec<String>,
    pub token_ids: Vec<usize>,
    pub label: Label,
    pub communities: BTreeSet<String>,
    pub gt_attention: Vec<f64>,
    pub gt_rationale: Vec<bool>,
}

impl ResolvedPost {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Resolves one raw post. `Ok(None)` means the annotators did not agree.
/// Token ids are left empty until a vocabulary encodes them.
pub fn resolve_post(raw: &RawPost, max_len: usize) -> Result<Option<ResolvedPost>> {
    let labels: Vec<RawLabel> = raw.annotators.iter().map(|a| a.label).collect();
    let label = match resolve_label(&labels) {
        LabelVote::Decided(l) => l,
        LabelVote::Undecided => return Ok(None),
    };
    let targets: Vec<Vec<String>> = raw.annotators.iter().map(|a| a.target.clone()).collect();
    let len = raw.post_tokens.len();
    let gt_attention = build_gt_attention(&raw.rationales, label, len)?;
    let gt_rationale = majority_rationale(&raw.rationales, label, len);
    let post = ResolvedPost {
        post_id: raw.post_id.clone(),
        tokens: raw.post_tokens.clone(),
        token_ids: Vec::new(),
        label,
        communities: resolve_targets(&targets),
        gt_attention,
        gt_rationale,
    };
    Ok(Some(truncate_post(post, max_len)))
}

/// Keeps the first `max_len` tokens and renormalises the attention target.
pub fn truncate_post(mut post: ResolvedPost, max_len: usize) -> ResolvedPost {
    if post.tokens.len() <= max_len || max_len == 0 {
        return post;
    }
    post.tokens.truncate(max_len);
    post.gt_rationale.truncate(max_len);
    if !post.token_ids.is_empty() {
        post.token_ids.truncate(max_len);
    }
    post.gt_attention.truncate(max_len);
    let uniform = post.gt_attention.windows(2).all(|w| w[0] == w[1]);
    if uniform {
        post.gt_attention = vec![1.0 / max_len as f64; max_len];
    } else {
        let total: f64 = post.gt_attention.iter().sum();
        for v in &mut post.gt_attention {
            *v /= total;
        }
    }
    post
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD_ID] != PAD_TOKEN || tokens[UNK_ID] != UNK_TOKEN {
            return Err(Error::Config(
                "vocabulary must start with the padding and unknown tokens".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// SHA-256 over the ordered token list.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.tokens).map_err(|e| Error::json(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tokens: Vec<String> = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Vocabulary::from_tokens(tokens)
    }
}

/// Indexes tokens seen at least `min_freq` times, most frequent first
/// (ties in lexicographic order) after the two reserved entries.
pub fn build_vocab<'a, I, S>(posts: I, min_freq: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a [S]>,
    S: AsRef<str> + 'a,
{
    if min_freq == 0 {
        return Err(Error::Config("min_freq must be at least 1".into()));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for post in posts {
        for t in post {
            *freq.entry(t.as_ref()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|&(t, n)| n >= min_freq && t != PAD_TOKEN && t != UNK_TOKEN)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let tokens = [PAD_TOKEN, UNK_TOKEN]
        .into_iter()
        .chain(kept.into_iter().map(|(t, _)| t))
        .map(str::to_string)
        .collect();
    Vocabulary::from_tokens(tokens)
}

/// `V×D` word-embedding table; row [`PAD_ID`] is all zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl EmbeddingMatrix {
    /// Every row drawn uniformly from `[-0.05, 0.05]`, padding row zeroed.
    pub fn random(rows: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data: Vec<f32> = (0..rows * dim).map(|_| rng.gen_range(-0.05f32..=0.05)).collect();
        data[PAD_ID * dim..(PAD_ID + 1) * dim].fill(0.0);
        EmbeddingMatrix { rows, dim, data }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::matrix(self.rows, self.dim, self.data.clone()).expect("consistent dims")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(16 + self.data.len() * 4);
        bytes.extend_from_slice(&(self.rows as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: &str| Error::Format {
            path: path.to_path_buf(),
            line: 0,
            reason: reason.to_string(),
        };
        if bytes.len() < 16 {
            return Err(bad("truncated header"));
        }
        let rows = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes")) as usize;
        let dim = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        if bytes.len() != 16 + rows * dim * 4 {
            return Err(bad("payload size does not match header"));
        }
        let data = bytes[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(EmbeddingMatrix { rows, dim, data })
    }
}

/// Loads `token v1 ... vD` lines; vocabulary rows not found in the file are
/// initialised from `seed`. Returns the matrix and the number of matched rows.
pub fn load_embeddings(path: &Path, vocab: &Vocabulary, dim: usize, seed: u64) -> Result<(EmbeddingMatrix, usize)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut matrix = EmbeddingMatrix::random(vocab.len(), dim, seed);
    let mut matched = vec![false; vocab.len()];
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split(' ');
        let Some(token) = fields.next().filter(|t| !t.is_empty()) else {
            continue;
        };
        let values: Vec<&str> = fields.filter(|f| !f.is_empty()).collect();
        let fmt_err = |reason: String| Error::Format {
            path: path.to_path_buf(),
            line: n + 1,
            reason,
        };
        if values.len() != dim {
            return Err(fmt_err(format!("expected {dim} values, found {}", values.len())));
        }
        let Some(&id) = vocab.index.get(token) else { continue };
        if id == PAD_ID || matched[id] {
            continue;
        }
        for (j, v) in values.iter().enumerate() {
            matrix.data[id * dim + j] = v.parse::<f32>().map_err(|e| fmt_err(format!("value {}: {e}", j + 1)))?;
        }
        matched[id] = true;
    }
    Ok((matrix, matched.iter().filter(|&&m| m).count()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Label-stratified train/val/test partition. Each label stratum is sorted by
/// post id, shuffled with `seed`, and cut by largest-remainder quotas.
pub fn split_dataset(posts: &[ResolvedPost], ratios: [f64; 3], seed: u64) -> Result<SplitManifest> {
    if ratios.iter().any(|&r| r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = SplitManifest {
        seed,
        ratios,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for label in Label::ALL {
        let mut ids: Vec<&str> = posts
            .iter()
            .filter(|p| p.label == label)
            .map(|p| p.post_id.as_str())
            .collect();
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let sizes = largest_remainder(ids.len(), &ratios);
        let (train, rest) = ids.split_at(sizes[0]);
        let (val, test) = rest.split_at(sizes[1]);
        manifest.train.extend(train.iter().map(|s| s.to_string()));
        manifest.val.extend(val.iter().map(|s| s.to_string()));
        manifest.test.extend(test.iter().map(|s| s.to_string()));
    }
    Ok(manifest)
}

fn largest_remainder(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, q) in sizes.iter_mut().zip(&quotas) {
        *s = q.floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).expect("finite").then(a.cmp(&b))
    });
    let mut left = n - sizes.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::json(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            line: n + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Output of the preparation step, stored as a directory:
/// `posts.jsonl`, `splits.json`, `vocab.json`, `embeddings.bin`.
#[derive(Clone, Debug)]
pub struct PreparedDataset {
    pub posts: Vec<ResolvedPost>,
    pub splits: SplitManifest,
    pub vocab: Vocabulary,
    pub embeddings: EmbeddingMatrix,
}

impl PreparedDataset {
    pub const POSTS: &'static str = "posts.jsonl";
    pub const SPLITS: &'static str = "splits.json";
    pub const VOCAB: &'static str = "vocab.json";
    pub const EMBEDDINGS: &'static str = "embeddings.bin";

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join(Self::POSTS), &self.posts)?;
        let splits = dir.join(Self::SPLITS);
        let text = serde_json::to_string_pretty(&self.splits).map_err(|e| Error::json(&splits, e))?;
        fs::write(&splits, text).map_err(|e| Error::io(&splits, e))?;
        self.vocab.save(&dir.join(Self::VOCAB))?;
        self.embeddings.save(&dir.join(Self::EMBEDDINGS))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let posts = read_jsonl(&dir.join(Self::POSTS))?;
        let splits_path = dir.join(Self::SPLITS);
        let text = fs::read_to_string(&splits_path).map_err(|e| Error::io(&splits_path, e))?;
        let splits = serde_json::from_str(&text).map_err(|e| Error::json(&splits_path, e))?;
        Ok(PreparedDataset {
            posts,
            splits,
            vocab: Vocabulary::load(&dir.join(Self::VOCAB))?,
            embeddings: EmbeddingMatrix::load(&dir.join(Self::EMBEDDINGS))?,
        })
    }

    pub fn get(&self, post_id: &str) -> Option<&ResolvedPost> {
        self.posts.iter().find(|p| p.post_id == post_id)
    }

    /// Posts of one split, in manifest order.
    pub fn split(&self, which: Split) -> Vec<&ResolvedPost> {
        let by_id: HashMap<&str, &ResolvedPost> = self.posts.iter().map(|p| (p.post_id.as_str(), p)).collect();
        let ids = match which {
            Split::Train => &self.splits.train,
            Split::Val => &self.splits.val,
            Split::Test => &self.splits.test,
        };
        ids.iter().filter_map(|id| by_id.get(id.as_str()).copied()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug)]
pub struct PrepareOptions {
    pub seed: u64,
    pub min_freq: usize,
    pub max_len: usize,
    pub embedding_dim: usize,
    pub ratios: [f64; 3],
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            seed: 42,
            min_freq: 1,
            max_len: DEFAULT_MAX_LEN,
            embedding_dim: 300,
            ratios: [0.8, 0.1, 0.1],
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PrepareSummary {
    pub parsed: usize,
    pub rejected: Vec<Rejection>,
    pub undecided: usize,
    pub class_counts: BTreeMap<String, usize>,
    pub community_counts: BTreeMap<String, usize>,
    pub matched_embeddings: usize,
}

/// Full preparation: resolve, split, build the vocabulary from the training
/// split, encode every post and attach embeddings (from `embeddings` when given).
pub fn prepare(
    report: ParseReport,
    embeddings: Option<&Path>,
    opts: &PrepareOptions,
) -> Result<(PreparedDataset, PrepareSummary)> {
    let mut summary = PrepareSummary {
        parsed: report.posts.len(),
        rejected: report.rejected,
        ..Default::default()
    };
    let mut posts = Vec::with_capacity(report.posts.len());
    for raw in &report.posts {
        match resolve_post(raw, opts.max_len)? {
            Some(p) => posts.push(p),
            None => summary.undecided += 1,
        }
    }
    let splits = split_dataset(&posts, opts.ratios, opts.seed)?;
    let train_ids: BTreeSet<&str> = splits.train.iter().map(String::as_str).collect();
    let vocab = build_vocab(
        posts
            .iter()
            .filter(|p| train_ids.contains(p.post_id.as_str()))
            .map(|p| p.tokens.as_slice()),
        opts.min_freq,
    )?;
    for p in &mut posts {
        p.token_ids = vocab.encode(&p.tokens);
        *summary.class_counts.entry(p.label.name().to_string()).or_default() += 1;
        for c in &p.communities {
            *summary.community_counts.entry(c.clone()).or_default() += 1;
        }
    }
    let embeddings = match embeddings {
        Some(path) => {
            let (m, matched) = load_embeddings(path, &vocab, opts.embedding_dim, opts.seed)?;
            summary.matched_embeddings = matched;
            m
        }
        None => EmbeddingMatrix::random(vocab.len(), opts.embedding_dim, opts.seed),
    };
    Ok((
        PreparedDataset {
            posts,
            splits,
            vocab,
            embeddings,
        },
        summary,
    ))
}
