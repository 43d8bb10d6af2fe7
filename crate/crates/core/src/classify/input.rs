//! Turns labeled documents into fixed-size input matrices.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::LabeledDocument;
use crate::corpus::VocabKey;
use crate::embedspace::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::svd::{center_columns, randomized_svd, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS};

/// How the channel vectors at one position are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fusion {
    Average,
    Concat,
    SvdReduce { target_dim: usize },
}

impl Fusion {
    pub fn label(self) -> &'static str {
        match self {
            Fusion::Average => "average",
            Fusion::Concat => "concat",
            Fusion::SvdReduce { .. } => "svd_reduce",
        }
    }
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fusion::SvdReduce { target_dim } => write!(f, "svd_reduce:{target_dim}"),
            other => f.write_str(other.label()),
        }
    }
}

impl FromStr for Fusion {
    type Err = Error;

    /// `average`, `concat`, `svd_reduce:<dim>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" | "avg" => Ok(Fusion::Average),
            "concat" => Ok(Fusion::Concat),
            other => {
                let dim = other
                    .strip_prefix("svd_reduce:")
                    .or_else(|| other.strip_prefix("svd:"))
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| Error::Config(format!("unknown fusion {other:?}")))?;
                Ok(Fusion::SvdReduce { target_dim: dim })
            }
        }
    }
}

/// Treatment of positions where some channel has no embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MissingPolicy {
    /// Missing channels contribute a zero vector.
    #[default]
    Zero,
    /// Positions with any missing channel are dropped before truncation.
    SkipPosition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EmbeddingMode {
    #[default]
    FrozenPretrained,
    /// Same key coverage as the pretrained spaces, but the vectors are drawn
    /// from a normal distribution matching their RMS scale.
    RandomNormalFrozen,
    /// Initialized from the pretrained spaces and updated with the network.
    Trainable,
}

impl FromStr for EmbeddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frozen" | "frozen_pretrained" => Ok(EmbeddingMode::FrozenPretrained),
            "random" | "random_normal" | "random_normal_frozen" => Ok(EmbeddingMode::RandomNormalFrozen),
            "trainable" => Ok(EmbeddingMode::Trainable),
            other => Err(Error::Config(format!("unknown embedding mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_top_k: usize,
    pub max_seq: usize,
    pub fusion: Fusion,
    pub missing: MissingPolicy,
    pub mode: EmbeddingMode,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Channel {
    index: HashMap<VocabKey, usize>,
    dim: usize,
    offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum FusionState {
    Average,
    Concat,
    /// Row-major `concat_dim × k` components and the centering mean.
    Svd { mean: Vec<f64>, components: Vec<f64>, k: usize },
}

/// Per-position channel row ids after top-k filtering and truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDoc {
    rows: Vec<Vec<Option<usize>>>,
    /// Channel slots without an embedding among the kept positions.
    pub missing: usize,
}

impl EncodedDoc {
    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(Option::is_none))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSequence {
    /// `max_seq × dim`, position-major.
    pub matrix: Vec<f64>,
    pub dim: usize,
    pub missing: usize,
    pub empty: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceEncoder {
    channels: Vec<Channel>,
    table: Vec<f64>,
    fusion: FusionState,
    max_seq: usize,
    missing: MissingPolicy,
    dim: usize,
}

impl SequenceEncoder {
    /// Builds per-channel lookup tables over the `vocab_top_k` most frequent
    /// keys of `docs`, one channel per space.
    pub fn fit(docs: &[&LabeledDocument], spaces: &[&EmbeddingSpace], cfg: &EncoderConfig) -> Result<Self> {
        if spaces.is_empty() {
            return Err(Error::Config("at least one embedding space is required".into()));
        }
        if cfg.vocab_top_k == 0 || cfg.max_seq == 0 {
            return Err(Error::Config("vocab_top_k and max_seq must be positive".into()));
        }
        let n_ch = spaces.len();
        for doc in docs {
            if let Some(bad) = doc.positions.iter().find(|p| p.len() != n_ch) {
                return Err(Error::Dimension {
                    expected: n_ch,
                    got: bad.len(),
                });
            }
        }
        if cfg.fusion == Fusion::Average {
            if let Some(bad) = spaces.iter().find(|s| s.dim() != spaces[0].dim()) {
                return Err(Error::Dimension {
                    expected: spaces[0].dim(),
                    got: bad.dim(),
                });
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_7ab1e);
        let mut channels = Vec::with_capacity(n_ch);
        let mut table = Vec::new();
        for (ch, space) in spaces.iter().enumerate() {
            let mut counts: HashMap<&str, u64> = HashMap::new();
            for doc in docs {
                for pos in &doc.positions {
                    if let Some(k) = &pos[ch] {
                        *counts.entry(k.as_str()).or_default() += 1;
                    }
                }
            }
            let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            ranked.truncate(cfg.vocab_top_k);
            let keys: Vec<&str> = match cfg.mode {
                EmbeddingMode::Trainable => ranked.iter().map(|r| r.0).collect(),
                _ => ranked.iter().map(|r| r.0).filter(|k| space.contains(k)).collect(),
            };
            let dim = space.dim();
            let offset = table.len();
            let rms = rms_scale(space, &keys);
            let normal = Normal::new(0.0, rms).expect("finite positive scale");
            let mut index = HashMap::with_capacity(keys.len());
            for (row, key) in keys.iter().enumerate() {
                index.insert(key.to_string(), row);
                match (cfg.mode, space.get(key)) {
                    (EmbeddingMode::RandomNormalFrozen, _) | (EmbeddingMode::Trainable, None) => {
                        table.extend((0..dim).map(|_| normal.sample(&mut rng)));
                    }
                    (_, Some(v)) => table.extend(v.iter().map(|&x| x as f64)),
                    (EmbeddingMode::FrozenPretrained, None) => unreachable!("filtered above"),
                }
            }
            channels.push(Channel { index, dim, offset });
        }

        let concat_dim: usize = channels.iter().map(|c| c.dim).sum();
        let (fusion, dim) = match cfg.fusion {
            Fusion::Average => (FusionState::Average, channels[0].dim),
            Fusion::Concat => (FusionState::Concat, concat_dim),
            Fusion::SvdReduce { target_dim } => {
                if target_dim == 0 || target_dim > concat_dim {
                    return Err(Error::Dimension {
                        expected: concat_dim,
                        got: target_dim,
                    });
                }
                (FusionState::Concat, target_dim)
            }
        };
        let mut enc = SequenceEncoder {
            channels,
            table,
            fusion,
            max_seq: cfg.max_seq,
            missing: cfg.missing,
            dim,
        };
        if let Fusion::SvdReduce { target_dim } = cfg.fusion {
            enc.fit_svd(docs, target_dim, cfg.seed)?;
        }
        Ok(enc)
    }

    /// Principal axes of the distinct concatenated position vectors.
    fn fit_svd(&mut self, docs: &[&LabeledDocument], k: usize, seed: u64) -> Result<()> {
        let concat_dim: usize = self.channels.iter().map(|c| c.dim).sum();
        let mut seen = std::collections::HashSet::new();
        let mut rows: Vec<Vec<Option<usize>>> = Vec::new();
        for doc in docs {
            for pos in &doc.positions {
                let ids = self.lookup(pos);
                if ids.iter().any(Option::is_some) && seen.insert(ids.clone()) {
                    rows.push(ids);
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::Config("no embedded positions to fit the SVD projection".into()));
        }
        let mut a = DMatrix::zeros(rows.len(), concat_dim);
        for (r, ids) in rows.iter().enumerate() {
            let v = self.concat(ids);
            for (c, x) in v.into_iter().enumerate() {
                a[(r, c)] = x;
            }
        }
        let mean = center_columns(&mut a);
        let svd = randomized_svd(&a, k, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS, seed)?;
        let components = (0..concat_dim)
            .flat_map(|r| (0..k).map(move |c| (r, c)))
            .map(|(r, c)| svd.components[(r, c)])
            .collect();
        self.fusion = FusionState::Svd {
            mean: mean.iter().copied().collect(),
            components,
            k,
        };
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_seq(&self) -> usize {
        self.max_seq
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Number of keys with a table row in channel `ch`.
    pub fn channel_vocab(&self, ch: usize) -> usize {
        self.channels[ch].index.len()
    }

    pub(crate) fn table(&self) -> &[f64] {
        &self.table
    }

    pub(crate) fn table_mut(&mut self) -> &mut [f64] {
        &mut self.table
    }

    fn lookup(&self, pos: &[Option<VocabKey>]) -> Vec<Option<usize>> {
        self.channels
            .iter()
            .zip(pos)
            .map(|(ch, key)| key.as_ref().and_then(|k| ch.index.get(k).copied()))
            .collect()
    }

    fn channel_row(&self, ch: usize, row: usize) -> &[f64] {
        let c = &self.channels[ch];
        &self.table[c.offset + row * c.dim..c.offset + (row + 1) * c.dim]
    }

    fn concat(&self, ids: &[Option<usize>]) -> Vec<f64> {
        let mut v = Vec::new();
        for (ch, id) in ids.iter().enumerate() {
            match id {
                Some(r) => v.extend_from_slice(self.channel_row(ch, *r)),
                None => v.resize(v.len() + self.channels[ch].dim, 0.0),
            }
        }
        v
    }

    pub fn encode(&self, doc: &LabeledDocument) -> Result<EncodedDoc> {
        let mut rows = Vec::with_capacity(self.max_seq.min(doc.positions.len()));
        let mut missing = 0;
        for pos in &doc.positions {
            if rows.len() == self.max_seq {
                break;
            }
            if pos.len() != self.channels.len() {
                return Err(Error::Dimension {
                    expected: self.channels.len(),
                    got: pos.len(),
                });
            }
            let ids = self.lookup(pos);
            let absent = ids.iter().filter(|i| i.is_none()).count();
            if absent > 0 && self.missing == MissingPolicy::SkipPosition {
                continue;
            }
            missing += absent;
            rows.push(ids);
        }
        Ok(EncodedDoc { rows, missing })
    }

    /// Fused `max_seq × dim` matrix. Padding rows and positions with no
    /// embedded channel are zero.
    pub fn embed(&self, enc: &EncodedDoc) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; self.max_seq * d];
        for (t, ids) in enc.rows.iter().enumerate() {
            if ids.iter().all(Option::is_none) {
                continue;
            }
            let row = &mut out[t * d..(t + 1) * d];
            match &self.fusion {
                FusionState::Average => {
                    let scale = 1.0 / ids.len() as f64;
                    for (ch, id) in ids.iter().enumerate() {
                        if let Some(r) = id {
                            let v = self.channel_row(ch, *r);
                            super::layers::axpy(scale, v, row);
                        }
                    }
                }
                FusionState::Concat => row.copy_from_slice(&self.concat(ids)),
                FusionState::Svd { mean, components, k } => {
                    let centered: Vec<f64> = self.concat(ids).iter().zip(mean).map(|(x, m)| x - m).collect();
                    for (i, x) in centered.iter().enumerate() {
                        super::layers::axpy(*x, &components[i * k..(i + 1) * k], row);
                    }
                }
            }
        }
        out
    }

    pub fn embed_doc(&self, doc: &LabeledDocument) -> Result<EmbeddedSequence> {
        let enc = self.encode(doc)?;
        let empty = enc.is_empty();
        if empty {
            log::warn!("document {:?} has no embedded positions; using an all-zero input", doc.id);
        }
        Ok(EmbeddedSequence {
            matrix: self.embed(&enc),
            dim: self.dim,
            missing: enc.missing,
            empty,
        })
    }

    /// Scatters the input-matrix gradient back onto the lookup table.
    pub(crate) fn backward(&self, enc: &EncodedDoc, dmatrix: &[f64], grads: &mut HashMap<usize, Vec<f64>>) {
        let d = self.dim;
        for (t, ids) in enc.rows.iter().enumerate() {
            if ids.iter().all(Option::is_none) {
                continue;
            }
            let g = &dmatrix[t * d..(t + 1) * d];
            let dconcat: Vec<f64> = match &self.fusion {
                FusionState::Average => {
                    let scale = 1.0 / ids.len() as f64;
                    let gs: Vec<f64> = g.iter().map(|x| x * scale).collect();
                    ids.iter().flat_map(|_| gs.iter().copied()).collect()
                }
                FusionState::Concat => g.to_vec(),
                FusionState::Svd { components, k, .. } => components
                    .chunks_exact(*k)
                    .map(|c| super::layers::dot(c, g))
                    .collect(),
            };
            let mut at = 0;
            for (ch, id) in ids.iter().enumerate() {
                let c = &self.channels[ch];
                if let Some(r) = id {
                    let entry = grads.entry(c.offset + r * c.dim).or_insert_with(|| vec![0.0; c.dim]);
                    super::layers::axpy(1.0, &dconcat[at..at + c.dim], entry);
                }
                at += c.dim;
            }
        }
    }
}

fn rms_scale(space: &EmbeddingSpace, keys: &[&str]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in keys.iter().filter_map(|k| space.get(k)) {
        sum += v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>();
        n += v.len();
    }
    let rms = if n > 0 { (sum / n as f64).sqrt() } else { 0.0 };
    if rms > 0.0 && rms.is_finite() {
        rms
    } else {
        0.05
    }
}
