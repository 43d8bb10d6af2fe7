//! Run configuration: a TOML file with one table per pipeline stage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lingvec::classify::{AdamParams, ClassifierConfig, EmbeddingMode, Fusion, MissingPolicy};
use lingvec::cooc::{CoocParams, SamePositionPolicy, Weighting};
use lingvec::corpus::{CorpusFormat, FilterConfig, KindSet};
use lingvec::swivel::{Combine, ExecutionMode, PmiParams, Schedule, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// Annotation-kind combination, e.g. `sf_l_c`.
    pub kinds: String,
    pub corpus: CorpusSection,
    pub filters: FilterSection,
    pub vocab: VocabSection,
    pub cooc: CoocSection,
    pub train: TrainSection,
    pub merge: MergeSection,
    pub eval: EvalSection,
    pub classify: ClassifySection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            threads: None,
            out: None,
            kinds: "sf_l_c".into(),
            corpus: CorpusSection::default(),
            filters: FilterSection::default(),
            vocab: VocabSection::default(),
            cooc: CoocSection::default(),
            train: TrainSection::default(),
            merge: MergeSection::default(),
            eval: EvalSection::default(),
            classify: ClassifySection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub paths: Vec<PathBuf>,
    /// `jsonl` or `text`.
    pub format: String,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            paths: Vec::new(),
            format: "jsonl".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub enabled: bool,
    pub drop_grammar: Vec<String>,
    pub generalize: BTreeMap<String, String>,
}

impl Default for FilterSection {
    fn default() -> Self {
        let d = FilterConfig::default();
        FilterSection {
            enabled: true,
            drop_grammar: d.drop_grammar.into_iter().collect(),
            generalize: d.generalize,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSection {
    pub min_count: u64,
    pub shard_dim: usize,
}

impl Default for VocabSection {
    fn default() -> Self {
        VocabSection {
            min_count: lingvec::vocab::DEFAULT_MIN_COUNT,
            shard_dim: lingvec::vocab::DEFAULT_SHARD_DIM,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoocSection {
    pub window: usize,
    pub weighting: String,
    pub same_position: String,
}

impl Default for CoocSection {
    fn default() -> Self {
        CoocSection {
            window: 3,
            weighting: "harmonic".into(),
            same_position: "exclude".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub dim: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub confidence_exponent: f64,
    pub confidence_scale: f64,
    pub init_scale: Option<f64>,
    pub combine: String,
    pub schedule: String,
    /// Update disjoint shards concurrently.
    pub parallel: bool,
    pub smoothing: f64,
    pub clamp_min: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            dim: d.dim,
            steps: d.steps,
            learning_rate: d.learning_rate,
            confidence_exponent: d.confidence_exponent,
            confidence_scale: d.confidence_scale,
            init_scale: d.init_scale,
            combine: d.combine.to_string(),
            schedule: d.schedule.to_string(),
            parallel: false,
            smoothing: d.pmi.smoothing,
            clamp_min: d.pmi.clamp_min,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeSection {
    pub inputs: Vec<PathBuf>,
    /// `average`, `add`, `concat` or `svd_reduce`.
    pub op: String,
    pub target_dim: Option<usize>,
    pub name: String,
}

impl Default for MergeSection {
    fn default() -> Self {
        MergeSection {
            inputs: Vec::new(),
            op: "concat".into(),
            target_dim: None,
            name: "merged".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimEntry {
    pub path: PathBuf,
    /// `sim`, `rel` or `mixed`.
    #[serde(default = "default_relation")]
    pub relation: String,
    pub name: Option<String>,
}

fn default_relation() -> String {
    "sim".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Defaults to the trained embedding of the selected kinds.
    pub embedding: Option<PathBuf>,
    pub similarity: Vec<SimEntry>,
    /// `direct` or `concept`.
    pub sim_mode: String,
    pub analogy: Option<PathBuf>,
    /// `cosadd` or `cosmul`.
    pub analogy_method: String,
    pub predict_corpus: Option<PathBuf>,
    pub predict_format: String,
    /// Defaults to the co-occurrence window.
    pub predict_window: Option<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            embedding: None,
            similarity: Vec::new(),
            sim_mode: "direct".into(),
            analogy: None,
            analogy_method: "cosadd".into(),
            predict_corpus: None,
            predict_format: "jsonl".into(),
            predict_window: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySection {
    /// JSON Lines dataset with keys and labels. When absent, the dataset is
    /// built from the ingested corpus and `labels`.
    pub dataset: Option<PathBuf>,
    /// TSV: doc-id, comma-separated categories.
    pub labels: Option<PathBuf>,
    pub embedding: Option<PathBuf>,
    pub folds: usize,
    /// `frozen`, `random_normal` or `trainable`.
    pub embedding_mode: String,
    /// `average`, `concat` or `svd_reduce:<dim>`.
    pub fusion: String,
    /// `zero` or `skip`.
    pub missing: String,
    pub vocab_top_k: usize,
    pub max_seq: usize,
    pub conv_layers: usize,
    pub filters: usize,
    pub kernel_width: usize,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub dense_units: usize,
    pub threshold: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for ClassifySection {
    fn default() -> Self {
        let d = ClassifierConfig::default();
        ClassifySection {
            dataset: None,
            labels: None,
            embedding: None,
            folds: 10,
            embedding_mode: "frozen".into(),
            fusion: d.fusion.to_string(),
            missing: "zero".into(),
            vocab_top_k: d.vocab_top_k,
            max_seq: d.max_seq,
            conv_layers: d.conv_layers,
            filters: d.filters,
            kernel_width: d.kernel_width,
            pool_size: d.pool_size,
            pool_stride: d.pool_stride,
            dense_units: d.dense_units,
            threshold: d.threshold,
            learning_rate: d.adam.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub kinds: Vec<String>,
    pub sizes: Vec<usize>,
    pub fusions: Vec<String>,
    /// Target dimension for `svd_reduce`; defaults to the smallest channel
    /// dimension.
    pub svd_dim: Option<usize>,
    /// One jointly trained space for every channel. When absent, each kind
    /// uses its own single-kind embedding.
    pub joint_embedding: Option<PathBuf>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            kinds: ["sf", "l", "g", "c"].map(String::from).to_vec(),
            sizes: vec![2, 3],
            fusions: ["average", "concat", "svd_reduce"].map(String::from).to_vec(),
            svd_dim: None,
            joint_embedding: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg.rebased(path.parent().unwrap_or(Path::new("."))))
    }

    /// Resolves relative input paths against the config file's directory.
    fn rebased(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.corpus.paths.iter_mut().for_each(fix);
        self.merge.inputs.iter_mut().for_each(fix);
        self.eval.similarity.iter_mut().for_each(|s| fix(&mut s.path));
        for p in [
            &mut self.eval.embedding,
            &mut self.eval.analogy,
            &mut self.eval.predict_corpus,
            &mut self.classify.dataset,
            &mut self.classify.labels,
            &mut self.classify.embedding,
            &mut self.sweep.joint_embedding,
            &mut self.out,
        ] {
            if let Some(p) = p.as_mut() {
                fix(p);
            }
        }
        self
    }

    pub fn kind_set(&self) -> Result<KindSet> {
        self.kinds
            .parse()
            .with_context(|| format!("invalid annotation-kind combination {:?}", self.kinds))
    }

    pub fn corpus_format(&self) -> Result<CorpusFormat> {
        Ok(self.corpus.format.parse()?)
    }

    pub fn filter_config(&self) -> Result<FilterConfig> {
        if !self.filters.enabled {
            return Ok(FilterConfig::none());
        }
        let f = FilterConfig {
            drop_grammar: self.filters.drop_grammar.iter().cloned().collect(),
            generalize: self.filters.generalize.clone(),
        };
        f.validate()?;
        Ok(f)
    }

    pub fn cooc_params(&self) -> Result<CoocParams> {
        let p = CoocParams {
            window: self.cooc.window,
            weighting: self.cooc.weighting.parse::<Weighting>()?,
            same_position: self.cooc.same_position.parse::<SamePositionPolicy>()?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            dim: t.dim,
            steps: t.steps,
            learning_rate: t.learning_rate,
            confidence_exponent: t.confidence_exponent,
            confidence_scale: t.confidence_scale,
            seed: self.seed,
            init_scale: t.init_scale,
            combine: t.combine.parse::<Combine>()?,
            schedule: t.schedule.parse::<Schedule>()?,
            mode: if t.parallel {
                ExecutionMode::Parallel
            } else {
                ExecutionMode::Deterministic
            },
            pmi: PmiParams {
                smoothing: t.smoothing,
                clamp_min: t.clamp_min,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn classifier_config(&self) -> Result<ClassifierConfig> {
        let c = &self.classify;
        let cfg = ClassifierConfig {
            vocab_top_k: c.vocab_top_k,
            max_seq: c.max_seq,
            conv_layers: c.conv_layers,
            filters: c.filters,
            kernel_width: c.kernel_width,
            pool_size: c.pool_size,
            pool_stride: c.pool_stride,
            dense_units: c.dense_units,
            embedding_mode: c.embedding_mode.parse::<EmbeddingMode>()?,
            fusion: c.fusion.parse::<Fusion>()?,
            missing: match c.missing.as_str() {
                "zero" => MissingPolicy::Zero,
                "skip" | "skip_position" => MissingPolicy::SkipPosition,
                other => bail!("unknown missing-key policy {other:?}"),
            },
            threshold: c.threshold,
            adam: AdamParams {
                learning_rate: c.learning_rate,
                ..AdamParams::default()
            },
            epochs: c.epochs,
            batch_size: c.batch_size,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every section that can be checked without touching the disk.
    pub fn validate(&self) -> Result<()> {
        self.kind_set()?;
        self.corpus_format()?;
        self.filter_config()?;
        self.cooc_params()?;
        self.train_config()?;
        self.classifier_config()?;
        if self.vocab.shard_dim == 0 {
            bail!("vocab.shard_dim must be positive");
        }
        if self.classify.folds < 2 {
            bail!("classify.folds must be at least 2");
        }
        Ok(())
    }

    /// Hash of the configuration that determines the artifact of `stage`,
    /// including everything upstream of it.
    pub fn stage_hash(&self, stage: Stage) -> String {
        let mut parts: Vec<serde_json::Value> = Vec::new();
        fn v<T: Serialize>(x: &T) -> serde_json::Value {
            serde_json::to_value(x).expect("config sections serialize")
        }
        parts.push(v(&self.corpus));
        parts.push(v(&self.filters));
        if stage >= Stage::Vocab {
            parts.push(serde_json::Value::String(self.kinds.clone()));
            parts.push(v(&self.vocab));
        }
        if stage >= Stage::Cooc {
            parts.push(v(&self.cooc));
        }
        if stage >= Stage::Train {
            parts.push(v(&self.train));
            parts.push(serde_json::Value::from(self.seed));
        }
        let text = serde_json::Value::Array(parts).to_string();
        lingvec::vocab::hex_digest(text.as_bytes())[..16].to_string()
    }
}

/// Pipeline stages whose artifacts feed later stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Vocab,
    Cooc,
    Train,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Vocab => "vocab",
            Stage::Cooc => "cooc",
            Stage::Train => "train",
        }
    }
}
