//! Multi-label document classification on fused annotation embeddings.
//!
//! Each document position carries one optional key per channel (for example
//! its surface form and lemma). Channel vectors are fused per position, the
//! sequence is truncated or zero-padded to `max_seq`, and a small
//! convolutional network with sigmoid outputs predicts the label set.

pub mod input;
pub mod layers;
pub mod model;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use input::{EmbeddedSequence, EmbeddingMode, EncodedDoc, EncoderConfig, Fusion, MissingPolicy, SequenceEncoder};
pub use model::{Adam, AdamParams, Cnn, CnnShape};

use crate::corpus::{AnnotatedDocument, AnnotationKind, KindSet, VocabKey};
use crate::embedspace::EmbeddingSpace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub id: String,
    /// One entry per position, one optional key per channel.
    pub positions: Vec<Vec<Option<VocabKey>>>,
    /// Sorted, distinct category indices.
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDataset {
    pub categories: Vec<String>,
    pub n_channels: usize,
    pub docs: Vec<LabeledDocument>,
}

impl ClassDataset {
    /// Builds a dataset, mapping category names to indices in sorted order.
    pub fn from_named(docs: Vec<(String, Vec<Vec<Option<VocabKey>>>, Vec<String>)>) -> Result<Self> {
        let categories: Vec<String> = docs
            .iter()
            .flat_map(|d| d.2.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<&str, usize> = categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut n_channels = None;
        let mut out = Vec::with_capacity(docs.len());
        for (id, positions, labels) in &docs {
            for p in positions {
                match n_channels {
                    None => n_channels = Some(p.len()),
                    Some(n) if n != p.len() => {
                        return Err(Error::Dimension {
                            expected: n,
                            got: p.len(),
                        })
                    }
                    _ => {}
                }
            }
            let labels: BTreeSet<usize> = labels.iter().map(|l| index[l.as_str()]).collect();
            out.push(LabeledDocument {
                id: id.clone(),
                positions: positions.clone(),
                labels: labels.into_iter().collect(),
            });
        }
        Ok(ClassDataset {
            categories,
            n_channels: n_channels.unwrap_or(1),
            docs: out,
        })
    }

    /// JSON Lines with `{"id": .., "keys": [..], "labels": [..]}`. A key is
    /// a string (single channel) or an array of strings/nulls (one per
    /// channel). Labels may be strings or integers.
    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut docs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            let v: Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            let id = match &v["id"] {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                Value::Null => format!("doc{line_no}"),
                other => return Err(err(format!("bad id {other}"))),
            };
            let keys = v["keys"].as_array().ok_or_else(|| err("missing \"keys\" array".into()))?;
            let mut positions = Vec::with_capacity(keys.len());
            for k in keys {
                positions.push(match k {
                    Value::String(s) => vec![Some(s.clone())],
                    Value::Array(chs) => chs
                        .iter()
                        .map(|c| match c {
                            Value::String(s) => Ok(Some(s.clone())),
                            Value::Null => Ok(None),
                            other => Err(err(format!("bad channel key {other}"))),
                        })
                        .collect::<Result<Vec<_>>>()?,
                    other => return Err(err(format!("bad key {other}"))),
                });
            }
            let labels = v["labels"]
                .as_array()
                .ok_or_else(|| err("missing \"labels\" array".into()))?
                .iter()
                .map(|l| match l {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    other => Err(err(format!("bad label {other}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            docs.push((id, positions, labels));
        }
        Self::from_named(docs)
    }

    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_jsonl(&text)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.docs {
            let keys: Vec<Value> = d
                .positions
                .iter()
                .map(|p| Value::Array(p.iter().map(|k| k.clone().map_or(Value::Null, Value::String)).collect()))
                .collect();
            let labels: Vec<&str> = d.labels.iter().map(|&l| self.categories[l].as_str()).collect();
            let v = serde_json::json!({"id": d.id, "keys": keys, "labels": labels});
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }

    /// Projects annotated documents onto one channel per kind. Documents
    /// without an entry in `labels` are skipped. The token kind splits raw
    /// tokens into separate positions, so it cannot share a dataset with
    /// other kinds.
    pub fn from_annotated<'a>(
        docs: impl IntoIterator<Item = &'a AnnotatedDocument>,
        kinds: KindSet,
        labels: &HashMap<String, Vec<String>>,
    ) -> Result<Self> {
        let token_only = kinds.contains(AnnotationKind::Token);
        if token_only && kinds.len() > 1 {
            return Err(Error::Config(
                "the token kind cannot be combined with other kinds for classification".into(),
            ));
        }
        let mut rows = Vec::new();
        let mut unlabeled = 0usize;
        for doc in docs {
            let Some(doc_labels) = labels.get(&doc.id) else {
                unlabeled += 1;
                continue;
            };
            let positions: Vec<Vec<Option<VocabKey>>> = if token_only {
                doc.tokens
                    .iter()
                    .flat_map(|t| t.keys_for(AnnotationKind::Token))
                    .map(|k| vec![Some(k)])
                    .collect()
            } else {
                doc.tokens
                    .iter()
                    .map(|t| kinds.iter().map(|k| t.keys_for(k).into_iter().next()).collect())
                    .collect()
            };
            rows.push((doc.id.clone(), positions, doc_labels.clone()));
        }
        if unlabeled > 0 {
            log::warn!("{unlabeled} documents have no labels and were skipped");
        }
        let mut ds = Self::from_named(rows)?;
        ds.n_channels = if token_only { 1 } else { kinds.len() };
        Ok(ds)
    }
}

/// Label file: `doc-id<TAB>cat1,cat2,...`; `#` starts a comment line.
pub fn parse_label_tsv(text: &str) -> Result<HashMap<String, Vec<String>>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, cats) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected doc-id<TAB>categories".into(),
        })?;
        let cats: Vec<String> = cats.split(',').map(str::trim).filter(|c| !c.is_empty()).map(String::from).collect();
        if cats.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "document has no categories".into(),
            });
        }
        out.insert(id.to_string(), cats);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub vocab_top_k: usize,
    pub max_seq: usize,
    pub conv_layers: usize,
    pub filters: usize,
    pub kernel_width: usize,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub dense_units: usize,
    pub embedding_mode: EmbeddingMode,
    pub fusion: Fusion,
    pub missing: MissingPolicy,
    pub threshold: f64,
    pub adam: AdamParams,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            vocab_top_k: 20_000,
            max_seq: 1000,
            conv_layers: 3,
            filters: 128,
            kernel_width: 5,
            pool_size: 2,
            pool_stride: 2,
            dense_units: 128,
            embedding_mode: EmbeddingMode::FrozenPretrained,
            fusion: Fusion::Concat,
            missing: MissingPolicy::Zero,
            threshold: 0.5,
            adam: AdamParams::default(),
            epochs: 10,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.vocab_top_k,
            self.max_seq,
            self.conv_layers,
            self.filters,
            self.kernel_width,
            self.pool_size,
            self.pool_stride,
            self.dense_units,
            self.batch_size,
        ];
        if sizes.contains(&0) {
            return Err(Error::Config("classifier sizes must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if !(self.adam.learning_rate > 0.0 && self.adam.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            vocab_top_k: self.vocab_top_k,
            max_seq: self.max_seq,
            fusion: self.fusion,
            missing: self.missing,
            mode: self.embedding_mode,
            seed: self.seed,
        }
    }
}

/// Embeds one document with an encoder fitted on that document alone.
pub fn embed_sequence(doc: &LabeledDocument, spaces: &[&EmbeddingSpace], cfg: &ClassifierConfig) -> Result<EmbeddedSequence> {
    let enc = SequenceEncoder::fit(&[doc], spaces, &cfg.encoder_config())?;
    enc.embed_doc(doc)
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub encoder: SequenceEncoder,
    pub cnn: Cnn,
    pub n_labels: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
}

impl TrainedClassifier {
    pub fn predict_doc(&self, doc: &LabeledDocument, threshold: f64) -> Result<Vec<usize>> {
        let enc = self.encoder.encode(doc)?;
        predict(&self.cnn, &self.encoder.embed(&enc), threshold)
    }
}

/// Labels whose sigmoid output reaches `threshold`.
pub fn predict(cnn: &Cnn, matrix: &[f64], threshold: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(cnn
        .logits(matrix)?
        .iter()
        .enumerate()
        .filter(|(_, &z)| layers::sigmoid(z) >= threshold)
        .map(|(i, _)| i)
        .collect())
}

fn targets(labels: &[usize], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n];
    for &l in labels {
        t[l] = 1.0;
    }
    t
}

/// Batches are cut into this many contiguous chunks whose gradients are
/// summed in order, so results do not depend on the thread count.
const GRAD_CHUNKS: usize = 8;

struct BatchGrad {
    loss: f64,
    grad: Vec<f64>,
    table: HashMap<usize, Vec<f64>>,
}

fn batch_gradient(
    cnn: &Cnn,
    encoder: &SequenceEncoder,
    encoded: &[EncodedDoc],
    targets: &[Vec<f64>],
    batch: &[usize],
    trainable: bool,
) -> BatchGrad {
    let chunk = batch.len().div_ceil(GRAD_CHUNKS).max(1);
    let parts: Vec<BatchGrad> = batch
        .par_chunks(chunk)
        .map(|idx| {
            let mut part = BatchGrad {
                loss: 0.0,
                grad: vec![0.0; cnn.n_params()],
                table: HashMap::new(),
            };
            for &i in idx {
                let x = encoder.embed(&encoded[i]);
                let trace = cnn.forward(&x).expect("encoder output matches network input");
                let (loss, dl) = layers::sigmoid_bce(&trace.logits, &targets[i]);
                part.loss += loss;
                if let Some(dx) = cnn.backward(&trace, &dl, &mut part.grad, trainable) {
                    encoder.backward(&encoded[i], &dx, &mut part.table);
                }
            }
            part
        })
        .collect();
    let mut total = BatchGrad {
        loss: 0.0,
        grad: vec![0.0; cnn.n_params()],
        table: HashMap::new(),
    };
    for p in parts {
        total.loss += p.loss;
        layers::axpy(1.0, &p.grad, &mut total.grad);
        for (k, v) in p.table {
            match total.table.get_mut(&k) {
                Some(acc) => layers::axpy(1.0, &v, acc),
                None => {
                    total.table.insert(k, v);
                }
            }
        }
    }
    total
}

fn mean_loss(cnn: &Cnn, encoder: &SequenceEncoder, encoded: &[EncodedDoc], targets: &[Vec<f64>]) -> f64 {
    let losses: Vec<f64> = encoded
        .par_iter()
        .zip(targets)
        .map(|(e, t)| {
            let logits = cnn.logits(&encoder.embed(e)).expect("encoder output matches network input");
            layers::sigmoid_bce(&logits, t).0
        })
        .collect();
    losses.iter().sum::<f64>() / losses.len() as f64
}

/// Mini-batch Adam on binary cross-entropy summed over categories and
/// averaged over the batch.
pub fn train_classifier(
    train: &[&LabeledDocument],
    n_labels: usize,
    spaces: &[&EmbeddingSpace],
    cfg: &ClassifierConfig,
) -> Result<TrainedClassifier> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    for d in train {
        if d.labels.is_empty() {
            return Err(Error::Config(format!("training document {:?} has no labels", d.id)));
        }
        if let Some(&bad) = d.labels.iter().find(|&&l| l >= n_labels) {
            return Err(Error::Config(format!(
                "document {:?} has label {bad} but only {n_labels} categories exist",
                d.id
            )));
        }
    }
    let mut encoder = SequenceEncoder::fit(train, spaces, &cfg.encoder_config())?;
    let shape = CnnShape {
        input_len: cfg.max_seq,
        input_dim: encoder.dim(),
        conv_layers: cfg.conv_layers,
        filters: cfg.filters,
        kernel_width: cfg.kernel_width,
        pool_size: cfg.pool_size,
        pool_stride: cfg.pool_stride,
        dense_units: cfg.dense_units,
        n_labels,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cnn = Cnn::new(shape, &mut rng)?;
    let encoded: Vec<EncodedDoc> = train.iter().map(|d| encoder.encode(d)).collect::<Result<_>>()?;
    let empty = encoded.iter().filter(|e| e.is_empty()).count();
    if empty > 0 {
        log::warn!("{empty} training documents have no embedded positions");
    }
    let tgts: Vec<Vec<f64>> = train.iter().map(|d| targets(&d.labels, n_labels)).collect();
    let trainable = cfg.embedding_mode == EmbeddingMode::Trainable;

    let initial_loss = mean_loss(&cnn, &encoder, &encoded, &tgts);
    let mut adam = Adam::new(cfg.adam, cnn.n_params());
    let mut table_adam = trainable.then(|| Adam::new(cfg.adam, encoder.table().len()));
    let mut table_grad = vec![0.0; if trainable { encoder.table().len() } else { 0 }];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut g = batch_gradient(&cnn, &encoder, &encoded, &tgts, batch, trainable);
            step += 1;
            if !g.loss.is_finite() || g.grad.iter().any(|x| !x.is_finite()) {
                return Err(Error::Diverged { step });
            }
            epoch_loss += g.loss;
            let scale = 1.0 / batch.len() as f64;
            g.grad.iter_mut().for_each(|x| *x *= scale);
            adam.step(cnn.params_mut(), &g.grad);
            if let Some(ta) = table_adam.as_mut() {
                table_grad.iter_mut().for_each(|x| *x = 0.0);
                for (at, v) in g.table {
                    for (slot, x) in table_grad[at..at + v.len()].iter_mut().zip(v) {
                        *slot = x * scale;
                    }
                }
                ta.step(encoder.table_mut(), &table_grad);
            }
        }
        epoch_losses.push(epoch_loss / train.len() as f64);
    }
    let final_loss = if cfg.epochs == 0 {
        initial_loss
    } else {
        mean_loss(&cnn, &encoder, &encoded, &tgts)
    };
    if !final_loss.is_finite() {
        return Err(Error::Diverged { step });
    }
    Ok(TrainedClassifier {
        encoder,
        cnn,
        n_labels,
        initial_loss,
        final_loss,
        epoch_losses,
    })
}

/// Micro-averaged precision, recall and F-measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    /// No positive predictions, so precision is reported as 0.
    pub no_predictions: bool,
    /// No gold labels, so recall is reported as 0.
    pub no_gold: bool,
}

impl Prf {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Prf {
            precision,
            recall,
            f_measure: harmonic(precision, recall),
            tp,
            fp,
            fn_,
            no_predictions: tp + fp == 0,
            no_gold: tp + fn_ == 0,
        }
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

pub fn micro_prf(gold: &[Vec<usize>], pred: &[Vec<usize>]) -> Result<Prf> {
    if gold.len() != pred.len() {
        return Err(Error::Dimension {
            expected: gold.len(),
            got: pred.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        let g: BTreeSet<usize> = g.iter().copied().collect();
        let p: BTreeSet<usize> = p.iter().copied().collect();
        tp += g.intersection(&p).count() as u64;
        fp += p.difference(&g).count() as u64;
        fn_ += g.difference(&p).count() as u64;
    }
    Ok(Prf::from_counts(tp, fp, fn_))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub folds: Vec<Prf>,
    /// Mean fold precision.
    pub precision: f64,
    /// Mean fold recall.
    pub recall: f64,
    /// Harmonic mean of the mean precision and mean recall.
    pub f_measure: f64,
}

impl ClassReport {
    pub fn from_folds(folds: Vec<Prf>) -> Self {
        let n = folds.len().max(1) as f64;
        let precision = folds.iter().map(|f| f.precision).sum::<f64>() / n;
        let recall = folds.iter().map(|f| f.recall).sum::<f64>() / n;
        ClassReport {
            folds,
            precision,
            recall,
            f_measure: harmonic(precision, recall),
        }
    }

    pub fn mean_fold_f(&self) -> f64 {
        self.folds.iter().map(|f| f.f_measure).sum::<f64>() / self.folds.len().max(1) as f64
    }
}

/// Shuffled partition of `0..n` into `k` folds whose sizes differ by at most
/// one (the first `n % k` folds get the extra item).
pub fn kfold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::Config(format!("{n} documents cannot fill {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(idx[at..at + size].to_vec());
        at += size;
    }
    Ok(folds)
}

pub fn kfold_eval(ds: &ClassDataset, spaces: &[&EmbeddingSpace], cfg: &ClassifierConfig, k: usize) -> Result<ClassReport> {
    let folds = kfold_partition(ds.docs.len(), k, cfg.seed)?;
    let mut results = Vec::with_capacity(k);
    for (f, test) in folds.iter().enumerate() {
        let test_set: BTreeSet<usize> = test.iter().copied().collect();
        let train: Vec<&LabeledDocument> = (0..ds.docs.len())
            .filter(|i| !test_set.contains(i))
            .map(|i| &ds.docs[i])
            .collect();
        let model = train_classifier(&train, ds.categories.len(), spaces, cfg)?;
        let pred: Vec<Vec<usize>> = test
            .par_iter()
            .map(|&i| model.predict_doc(&ds.docs[i], cfg.threshold))
            .collect::<Result<_>>()?;
        let gold: Vec<Vec<usize>> = test.iter().map(|&i| ds.docs[i].labels.clone()).collect();
        let prf = micro_prf(&gold, &pred)?;
        log::info!(
            "fold {}/{k}: P={:.4} R={:.4} F={:.4} (train loss {:.4})",
            f + 1,
            prf.precision,
            prf.recall,
            prf.f_measure,
            model.final_loss
        );
        results.push(prf);
    }
    Ok(ClassReport::from_folds(results))
}

/// All subsets of `kinds` whose size is in `sizes`, in lexicographic order
/// of kind positions.
pub fn kind_combinations(kinds: &[AnnotationKind], sizes: &[usize]) -> Result<Vec<KindSet>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << kinds.len()) {
        if sizes.contains(&(mask.count_ones() as usize)) {
            let chosen = kinds.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &k)| k);
            out.push(KindSet::new(chosen)?);
        }
    }
    out.sort_by_key(|s| s.iter().map(|k| k as usize).collect::<Vec<_>>());
    Ok(out)
}

pub struct SweepInput<'a> {
    pub types: String,
    pub dataset: &'a ClassDataset,
    /// One space per dataset channel.
    pub spaces: Vec<&'a EmbeddingSpace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub types: String,
    pub fusion: String,
    pub report: ClassReport,
}

/// k-fold evaluation of every input under every fusion.
pub fn sweep(inputs: &[SweepInput<'_>], fusions: &[Fusion], cfg: &ClassifierConfig, k: usize) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(inputs.len() * fusions.len());
    for input in inputs {
        for &fusion in fusions {
            let run_cfg = ClassifierConfig { fusion, ..*cfg };
            let report = kfold_eval(input.dataset, &input.spaces, &run_cfg, k)?;
            log::info!("{} / {}: F={:.4}", input.types, fusion.label(), report.f_measure);
            rows.push(SweepRow {
                types: input.types.clone(),
                fusion: fusion.label().to_string(),
                report,
            });
        }
    }
    Ok(rows)
}

/// One row per embedding: `embedding,types,precision,recall,f_measure`.
pub fn baseline_csv(rows: &[(String, String, ClassReport)]) -> String {
    let mut out = String::from("embedding,types,precision,recall,f_measure\n");
    for (emb, types, r) in rows {
        let _ = writeln!(out, "{emb},{types},{:.4},{:.4},{:.4}", r.precision, r.recall, r.f_measure);
    }
    out
}

/// Per-fold and mean metrics of one k-fold run.
pub fn fold_csv(report: &ClassReport) -> String {
    let mut out = String::from("fold,precision,recall,f_measure,tp,fp,fn\n");
    for (i, f) in report.folds.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{},{},{}",
            i + 1,
            f.precision,
            f.recall,
            f.f_measure,
            f.tp,
            f.fp,
            f.fn_
        );
    }
    let _ = writeln!(out, "mean,{:.4},{:.4},{:.4},,,", report.precision, report.recall, report.f_measure);
    out
}

/// Long format: one row per (types, fusion).
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("types,fusion,precision,recall,f_measure\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4}",
            r.types, r.fusion, r.report.precision, r.report.recall, r.report.f_measure
        );
    }
    out
}

/// Metrics averaged over fusions per annotation combination, as three
/// independently sorted (types, value) column pairs.
pub fn sweep_summary_csv(rows: &[SweepRow]) -> String {
    let mut acc: BTreeMap<&str, ([f64; 3], usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry(r.types.as_str()).or_insert(([0.0; 3], 0));
        e.0[0] += r.report.precision;
        e.0[1] += r.report.recall;
        e.0[2] += r.report.f_measure;
        e.1 += 1;
    }
    let means: Vec<(&str, [f64; 3])> = acc
        .into_iter()
        .map(|(t, (s, n))| (t, s.map(|v| v / n as f64)))
        .collect();
    let sorted: Vec<Vec<(&str, f64)>> = (0..3)
        .map(|m| {
            let mut col: Vec<(&str, f64)> = means.iter().map(|(t, v)| (*t, v[m])).collect();
            col.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            col
        })
        .collect();
    let mut out = String::from("precision_types,precision,recall_types,recall,f_measure_types,f_measure\n");
    for i in 0..means.len() {
        let cells: Vec<String> = sorted.iter().map(|c| format!("{},{:.4}", c[i].0, c[i].1)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
