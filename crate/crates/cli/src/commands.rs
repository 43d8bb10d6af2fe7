//! One function per subcommand. Each returns the fields of its summary line.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use lingvec::classify::{
    baseline_csv, fold_csv, kfold_eval, kind_combinations, parse_label_tsv, sweep, sweep_csv,
    sweep_summary_csv, ClassDataset, Fusion, SweepInput,
};
use lingvec::cooc::{count_cooc_par, read_shards, shard_matrix, write_shards};
use lingvec::corpus::{
    apply_filters, project, read_corpus, AnnotatedDocument, AnnotationKind, CorpusFormat, KindSet,
    PositionGroup,
};
use lingvec::embedspace::{merge, EmbeddingSpace, MergeOp, SpaceMeta};
use lingvec::evalanalogy::{eval_analogy, AnalogyDataset, AnalogyMethod, AnalogyReport};
use lingvec::evalpredict::{emit_prediction_csv, eval_predict, PredictReport};
use lingvec::evalsim::{build_concept_map, eval_similarity, RelationType, Resolver, SimMode, SimReport, SimilarityDataset};
use lingvec::swivel::train;
use lingvec::vocab::{build_vocab_par, Vocabulary};

use crate::artifacts::{check_upstream, ensure_dir, require, write_meta, write_timing, Layout, Meta};
use crate::config::{RunConfig, Stage};

pub type Summary = Vec<(String, String)>;

macro_rules! summary {
    ($($k:expr => $v:expr),* $(,)?) => {
        vec![$(($k.to_string(), $v.to_string())),*]
    };
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub layout: Layout,
}

impl Ctx {
    fn kinds(&self) -> Result<KindSet> {
        self.cfg.kind_set()
    }

    fn meta(&self, stage: Stage, upstream: BTreeMap<String, String>) -> Meta {
        Meta {
            stage: stage.name().into(),
            config_hash: self.cfg.stage_hash(stage),
            kinds: (stage >= Stage::Vocab).then(|| self.cfg.kinds.clone()),
            upstream,
        }
    }

    /// The ingested corpus, checked against the current ingest config.
    fn ingested(&self) -> Result<(Vec<AnnotatedDocument>, String)> {
        let path = self.layout.corpus();
        require(&path, "ingest")?;
        let hash = check_upstream(&path, &self.cfg.stage_hash(Stage::Ingest));
        let docs = read_corpus(&path, CorpusFormat::JsonLines)?.collect::<lingvec::Result<Vec<_>>>()?;
        Ok((docs, hash))
    }

    fn projected(&self, kinds: KindSet) -> Result<(Vec<Vec<PositionGroup>>, String)> {
        let (docs, hash) = self.ingested()?;
        Ok((docs.iter().map(|d| project(d, kinds)).collect(), hash))
    }

    /// Explicit path, or the trained space of the selected kinds.
    fn embedding_path(&self, explicit: Option<&Path>) -> PathBuf {
        explicit
            .map(Path::to_path_buf)
            .unwrap_or_else(|| self.layout.embedding(&self.cfg.kinds))
    }

    fn load_space(&self, path: &Path) -> Result<(EmbeddingSpace, String)> {
        require(path, &format!("train --kinds {}", self.cfg.kinds))?;
        let hash = if *path == self.layout.embedding(&self.cfg.kinds) {
            check_upstream(path, &self.cfg.stage_hash(Stage::Train))
        } else {
            crate::artifacts::read_meta(path)
                .map(|m| m.config_hash)
                .unwrap_or_else(|| "external".into())
        };
        let space = EmbeddingSpace::load(path).with_context(|| format!("loading {}", path.display()))?;
        Ok((space, hash))
    }

    fn eval_dir(&self, embedding: &Path) -> Result<PathBuf> {
        let dir = if *embedding == self.layout.embedding(&self.cfg.kinds) {
            self.layout.kinds_dir(&self.cfg.kinds)
        } else {
            self.layout.root.join("eval").join(space_label(embedding))
        };
        ensure_dir(&dir)?;
        Ok(dir)
    }
}

fn space_label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if stem == "embeddings" {
        if let Some(parent) = path.parent().and_then(Path::file_name) {
            return parent.to_string_lossy().into_owned();
        }
    }
    stem
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn ingest(ctx: &Ctx) -> Result<Summary> {
    let start = Instant::now();
    let cfg = &ctx.cfg;
    if cfg.corpus.paths.is_empty() {
        bail!("no corpus files given (corpus.paths or `ingest <FILES>`)");
    }
    let format = cfg.corpus_format()?;
    let filters = cfg.filter_config()?;
    ensure_dir(&ctx.layout.root)?;
    let out_path = ctx.layout.corpus();
    let mut out = BufWriter::new(File::create(&out_path).with_context(|| format!("creating {}", out_path.display()))?);
    let (mut docs, mut units_in, mut units_out) = (0usize, 0usize, 0usize);
    for path in &cfg.corpus.paths {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for doc in read_corpus(path, format)? {
            let mut doc = doc.with_context(|| format!("reading {}", path.display()))?;
            if format == CorpusFormat::PlainText {
                doc.id = format!("{stem}:{}", doc.id);
            }
            let filtered = apply_filters(&doc, &filters);
            units_in += doc.tokens.len();
            units_out += filtered.tokens.len();
            writeln!(out, "{}", filtered.to_json_line())?;
            docs += 1;
        }
    }
    out.flush()?;
    write_meta(&out_path, &ctx.meta(Stage::Ingest, BTreeMap::new()))?;
    write_timing(&ctx.layout.root, "ingest", start.elapsed())?;
    Ok(summary!("stage" => "ingest", "docs" => docs, "units_in" => units_in, "units_out" => units_out,
        "output" => out_path.display()))
}

pub fn vocab(ctx: &Ctx) -> Result<Summary> {
    let start = Instant::now();
    let kinds = ctx.kinds()?;
    let (seqs, ingest_hash) = ctx.projected(kinds)?;
    let v = build_vocab_par(&seqs, ctx.cfg.vocab.min_count, ctx.cfg.vocab.shard_dim)?;
    let dir = ctx.layout.kinds_dir(&ctx.cfg.kinds);
    ensure_dir(&dir)?;
    let path = ctx.layout.vocab(&ctx.cfg.kinds);
    v.save(&path)?;
    write_meta(&path, &ctx.meta(Stage::Vocab, BTreeMap::from([("ingest".into(), ingest_hash)])))?;
    write_timing(&dir, "vocab", start.elapsed())?;
    Ok(summary!("stage" => "vocab", "kinds" => ctx.cfg.kinds, "terms" => v.len(),
        "vocab_hash" => &v.content_hash()[..16], "output" => path.display()))
}

fn load_vocab(ctx: &Ctx) -> Result<(Vocabulary, String)> {
    let path = ctx.layout.vocab(&ctx.cfg.kinds);
    require(&path, &format!("vocab --kinds {}", ctx.cfg.kinds))?;
    let hash = check_upstream(&path, &ctx.cfg.stage_hash(Stage::Vocab));
    Ok((Vocabulary::load(&path, ctx.cfg.vocab.shard_dim)?, hash))
}

pub fn cooc(ctx: &Ctx) -> Result<Summary> {
    let start = Instant::now();
    let kinds = ctx.kinds()?;
    let (v, vocab_hash) = load_vocab(ctx)?;
    let (seqs, _) = ctx.projected(kinds)?;
    let params = ctx.cfg.cooc_params()?;
    let m = count_cooc_par(&seqs, &v, params)?;
    let set = shard_matrix(&m, &v)?;
    let dir = ctx.layout.shards(&ctx.cfg.kinds);
    let manifest = write_shards(&dir, &set, &v.content_hash(), &ctx.cfg.stage_hash(Stage::Cooc))?;
    write_meta(&manifest, &ctx.meta(Stage::Cooc, BTreeMap::from([("vocab".into(), vocab_hash)])))?;
    write_timing(&ctx.layout.kinds_dir(&ctx.cfg.kinds), "cooc", start.elapsed())?;
    Ok(summary!("stage" => "cooc", "kinds" => ctx.cfg.kinds, "nnz_upper" => m.nnz_upper(),
        "total" => format!("{:.6}", m.total()), "shards" => set.shards.len(), "output" => dir.display()))
}

pub fn train_cmd(ctx: &Ctx) -> Result<Summary> {
    let start = Instant::now();
    let tc = ctx.cfg.train_config()?;
    let (v, _) = load_vocab(ctx)?;
    let dir = ctx.layout.shards(&ctx.cfg.kinds);
    let manifest_path = dir.join("manifest.txt");
    require(&manifest_path, &format!("cooc --kinds {}", ctx.cfg.kinds))?;
    let (set, manifest) = read_shards(&dir)?;
    let expected = ctx.cfg.stage_hash(Stage::Cooc);
    if manifest.config_hash != expected {
        log::warn!(
            "shards in {} were counted with config {} but the current config hashes to {expected}",
            dir.display(),
            manifest.config_hash
        );
    }
    if manifest.vocab_hash != v.content_hash() {
        bail!("shards in {} do not match the current vocabulary; rerun `lingvec cooc`", dir.display());
    }
    let outcome = train(&set, &v, &tc)?;
    let config_hash = ctx.cfg.stage_hash(Stage::Train);
    let space = outcome.space.with_meta(SpaceMeta {
        kinds: ctx.cfg.kinds.clone(),
        source: "train".into(),
        config_hash: config_hash.clone(),
    });
    let path = ctx.layout.embedding(&ctx.cfg.kinds);
    space.save(&path)?;
    write_meta(&path, &ctx.meta(Stage::Train, BTreeMap::from([("cooc".into(), manifest.config_hash)])))?;
    write_timing(&ctx.layout.kinds_dir(&ctx.cfg.kinds), "train", start.elapsed())?;
    Ok(summary!("stage" => "train", "kinds" => ctx.cfg.kinds, "terms" => space.len(), "dim" => space.dim(),
        "steps" => tc.steps, "initial_loss" => format!("{:.6}", outcome.initial_mean_loss),
        "final_loss" => format!("{:.6}", outcome.final_mean_loss), "config_hash" => config_hash,
        "output" => path.display()))
}

pub fn merge_cmd(ctx: &Ctx) -> Result<Summary> {
    let start = Instant::now();
    let m = &ctx.cfg.merge;
    if m.inputs.len() < 2 {
        bail!("merge needs at least two input embeddings");
    }
    let op = match m.op.as_str() {
        "average" | "avg" => MergeOp::Average,
        "add" => MergeOp::Add,
        "concat" => MergeOp::Concat,
        "svd_reduce" | "svd" => MergeOp::SvdReduce {
            target_dim: m.target_dim.context("svd_reduce needs merge.target_dim")?,
            seed: ctx.cfg.seed,
        },
        other => bail!("unknown merge operation {other:?}"),
    };
    let mut spaces = Vec::new();
    let mut upstream = BTreeMap::new();
    for p in &m.inputs {
        require(p, "train")?;
        let hash = crate::artifacts::read_meta(p).map(|x| x.config_hash).unwrap_or_else(|| "external".into());
        upstream.insert(p.display().to_string(), hash);
        spaces.push(EmbeddingSpace::load(p).with_context(|| format!("loading {}", p.display()))?);
    }
    let refs: Vec<&EmbeddingSpace> = spaces.iter().collect();
    let outcome = merge(&refs, op)?;
    if outcome.dropped_keys > 0 {
        log::warn!("{} keys are missing from at least one input and were dropped", outcome.dropped_keys);
    }
    let path = ctx.layout.merged(&m.name);
    ensure_dir(path.parent().expect("merged path has a parent"))?;
    outcome.space.save(&path)?;
    let op_label = match op {
        MergeOp::SvdReduce { target_dim, .. } => format!("svd_reduce:{target_dim}"),
        _ => m.op.clone(),
    };
    let hash_input = serde_json::json!({ "op": op_label, "seed": ctx.cfg.seed, "inputs": upstream });
    let meta = Meta {
        stage: "merge".into(),
        config_hash: lingvec::vocab::hex_digest(hash_input.to_string().as_bytes())[..16].to_string(),
        kinds: None,
        upstream,
    };
    write_meta(&path, &meta)?;
    write_timing(path.parent().unwrap(), &format!("merge_{}", m.name), start.elapsed())?;
    Ok(summary!("stage" => "merge", "op" => op_label, "terms" => outcome.space.len(),
        "dim" => outcome.space.dim(), "dropped_keys" => outcome.dropped_keys, "output" => path.display()))
}

pub fn eval_sim(ctx: &Ctx, embedding: Option<&Path>) -> Result<Summary> {
    let start = Instant::now();
    let e = &ctx.cfg.eval;
    let emb_path = ctx.embedding_path(embedding.or(e.embedding.as_deref()));
    let (space, hash) = ctx.load_space(&emb_path)?;
    if e.similarity.is_empty() {
        bail!("no similarity datasets configured (eval.similarity)");
    }
    let mode: SimMode = e.sim_mode.parse()?;
    let cmap = match mode {
        SimMode::Concept => {
            let (docs, _) = ctx.ingested()?;
            Some(build_concept_map(docs.iter()))
        }
        SimMode::Direct => None,
    };
    let resolver = Resolver::default();
    let mut rows = Vec::new();
    for entry in &e.similarity {
        let relation: RelationType = entry.relation.parse()?;
        let mut ds = SimilarityDataset::load(&entry.path, relation)?;
        if let Some(name) = &entry.name {
            ds.name = name.clone();
        }
        match eval_similarity(&space, &ds, mode, cmap.as_ref(), &resolver) {
            Ok(row) => rows.push(row),
            Err(lingvec::Error::InsufficientCoverage { scored, total }) => {
                log::warn!("{}: only {scored} of {total} pairs resolved; dataset skipped", ds.name);
            }
            Err(err) => return Err(err.into()),
        }
    }
    if rows.is_empty() {
        bail!("no similarity dataset had enough resolvable pairs");
    }
    let label = space_label(&emb_path);
    let report = SimReport { embedding: label.clone(), rows };
    let dir = ctx.eval_dir(&emb_path)?;
    let path = dir.join("eval_sim.csv");
    write_text(&path, &report.to_csv())?;
    write_meta(&path, &eval_meta("eval-sim", &hash, &format!("{mode:?}")))?;
    write_timing(&dir, "eval_sim", start.elapsed())?;
    let fmt_opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "none".into());
    Ok(summary!("stage" => "eval-sim", "embedding" => label, "datasets" => report.rows.len(),
        "avg_spearman" => format!("{:.6}", report.avg_spearman()),
        "avg_pearson" => format!("{:.6}", report.avg_pearson()),
        "harmonic_mean" => fmt_opt(report.harmonic_mean()), "output" => path.display()))
}

fn eval_meta(stage: &str, embedding_hash: &str, settings: &str) -> Meta {
    let text = format!("{stage}|{settings}|{embedding_hash}");
    Meta {
        stage: stage.into(),
        config_hash: lingvec::vocab::hex_digest(text.as_bytes())[..16].to_string(),
        kinds: None,
        upstream: BTreeMap::from([("embedding".into(), embedding_hash.to_string())]),
    }
}

fn parse_analogy_method(s: &str) -> Result<AnalogyMethod> {
    match s {
        "cosadd" | "3cosadd" => Ok(AnalogyMethod::CosAdd),
        "cosmul" | "3cosmul" => Ok(AnalogyMethod::CosMul),
        other => bail!("unknown analogy method {other:?}"),
    }
}

pub fn eval_analogy_cmd(ctx: &Ctx, embedding: Option<&Path>) -> Result<Summary> {
    let start = Instant::now();
    let e = &ctx.cfg.eval;
    let emb_path = ctx.embedding_path(embedding.or(e.embedding.as_deref()));
    let (space, hash) = ctx.load_space(&emb_path)?;
    let ds_path = e.analogy.as_ref().context("no analogy dataset configured (eval.analogy)")?;
    let method = parse_analogy_method(&e.analogy_method)?;
    let ds = AnalogyDataset::load(ds_path, &HashMap::new())?;
    let report = eval_analogy(&space, &ds, &Resolver::default(), method)?;
    let label = space_label(&emb_path);
    let dir = ctx.eval_dir(&emb_path)?;
    let path = dir.join("eval_analogy.csv");
    write_text(&path, &format!("{}\n{}\n", AnalogyReport::csv_header(), report.csv_row(&label)))?;
    write_meta(&path, &eval_meta("eval-analogy", &hash, &e.analogy_method))?;
    write_timing(&dir, "eval_analogy", start.elapsed())?;
    let overall = report.overall();
    Ok(summary!("stage" => "eval-analogy", "embedding" => label,
        "accuracy" => overall.accuracy().map(|a| format!("{a:.6}")).unwrap_or_else(|| "none".into()),
        "attempted" => overall.attempted, "output" => path.display()))
}

pub fn eval_predict_cmd(ctx: &Ctx, embedding: Option<&Path>) -> Result<Summary> {
    let start = Instant::now();
    let e = &ctx.cfg.eval;
    let emb_path = ctx.embedding_path(embedding.or(e.embedding.as_deref()));
    let (space, hash) = ctx.load_space(&emb_path)?;
    let corpus_path = e.predict_corpus.as_ref().context("no held-out corpus configured (eval.predict_corpus)")?;
    let format: CorpusFormat = e.predict_format.parse()?;
    let filters = ctx.cfg.filter_config()?;
    let kinds = ctx.kinds()?;
    let mut seqs = Vec::new();
    for doc in read_corpus(corpus_path, format)? {
        let doc = doc.with_context(|| format!("reading {}", corpus_path.display()))?;
        seqs.push(project(&apply_filters(&doc, &filters), kinds));
    }
    let window = e.predict_window.unwrap_or(ctx.cfg.cooc.window);
    let weighting = ctx.cfg.cooc_params()?.weighting;
    let report: PredictReport = eval_predict(&space, &seqs, window, weighting)?;
    let label = space_label(&emb_path);
    let dir = ctx.eval_dir(&emb_path)?;
    let path = dir.join("predict.csv");
    emit_prediction_csv(&report, &path)?;
    let settings = format!("{}|{window}|{weighting}|{}", corpus_path.display(), ctx.cfg.kinds);
    write_meta(&path, &eval_meta("eval-predict", &hash, &settings))?;
    let table = dir.join("predict_table.txt");
    let corpus_name = space_label(corpus_path);
    write_text(
        &table,
        &format!("{}\n{}\n", PredictReport::table_header(), report.table_row(&corpus_name, &label, &ctx.cfg.kinds)),
    )?;
    write_timing(&dir, "eval_predict", start.elapsed())?;
    let s = &report.summary;
    Ok(summary!("stage" => "eval-predict", "embedding" => label,
        "mean_cosine" => format!("{:.6}", s.mean_cosine), "tokens" => s.tokens, "oov" => s.oov,
        "oov_percent" => format!("{:.3}", s.oov_percent()), "output" => path.display()))
}

/// Dataset from `classify.dataset`, or from the ingested corpus and labels.
fn class_dataset(ctx: &Ctx, kinds: KindSet) -> Result<ClassDataset> {
    let c = &ctx.cfg.classify;
    if let Some(path) = &c.dataset {
        require(path, "a dataset export")?;
        return Ok(ClassDataset::load_jsonl(path)?);
    }
    let labels_path = c.labels.as_ref().context("classification needs classify.dataset or classify.labels")?;
    let text = std::fs::read_to_string(labels_path).with_context(|| format!("reading {}", labels_path.display()))?;
    let labels = parse_label_tsv(&text)?;
    let (docs, _) = ctx.ingested()?;
    Ok(ClassDataset::from_annotated(docs.iter(), kinds, &labels)?)
}

pub fn classify(ctx: &Ctx, embedding: Option<&Path>) -> Result<Summary> {
    let start = Instant::now();
    let c = &ctx.cfg.classify;
    let ccfg = ctx.cfg.classifier_config()?;
    let kinds = ctx.kinds()?;
    let emb_path = ctx.embedding_path(embedding.or(c.embedding.as_deref()));
    let (space, hash) = ctx.load_space(&emb_path)?;
    let ds = class_dataset(ctx, kinds)?;
    let spaces = vec![&space; ds.n_channels];
    let report = kfold_eval(&ds, &spaces, &ccfg, c.folds)?;
    let label = space_label(&emb_path);
    let dir = ctx.eval_dir(&emb_path)?;
    let mode = c.embedding_mode.replace(' ', "_");
    let path = dir.join(format!("classify_{mode}.csv"));
    write_text(&path, &baseline_csv(&[(label.clone(), ctx.cfg.kinds.clone(), report.clone())]))?;
    let folds_path = dir.join(format!("classify_{mode}_folds.csv"));
    write_text(&folds_path, &fold_csv(&report))?;
    let settings = serde_json::to_string(c)?;
    write_meta(&path, &eval_meta("classify", &hash, &format!("{settings}|{}|{}", ctx.cfg.kinds, ctx.cfg.seed)))?;
    write_timing(&dir, &format!("classify_{mode}"), start.elapsed())?;
    Ok(summary!("stage" => "classify", "embedding" => label, "mode" => mode, "docs" => ds.docs.len(),
        "categories" => ds.categories.len(), "precision" => format!("{:.6}", report.precision),
        "recall" => format!("{:.6}", report.recall), "f_measure" => format!("{:.6}", report.f_measure),
        "output" => path.display()))
}

pub fn sweep_cmd(ctx: &Ctx) -> Result<Summary> {
    let start = Instant::now();
    let s = &ctx.cfg.sweep;
    let ccfg = ctx.cfg.classifier_config()?;
    let kinds: Vec<AnnotationKind> = s
        .kinds
        .iter()
        .map(|k| k.parse::<AnnotationKind>().with_context(|| format!("invalid sweep kind {k:?}")))
        .collect::<Result<_>>()?;
    let combos = kind_combinations(&kinds, &s.sizes)?;

    let mut loaded: BTreeMap<String, EmbeddingSpace> = BTreeMap::new();
    let mut upstream = BTreeMap::new();
    let channel_source = |k: AnnotationKind| -> PathBuf {
        s.joint_embedding.clone().unwrap_or_else(|| ctx.layout.embedding(k.label()))
    };
    for &k in &kinds {
        let p = channel_source(k);
        let key = p.display().to_string();
        if loaded.contains_key(&key) {
            continue;
        }
        require(&p, &format!("train --kinds {}", k.label()))?;
        let hash = crate::artifacts::read_meta(&p).map(|m| m.config_hash).unwrap_or_else(|| "external".into());
        upstream.insert(key.clone(), hash);
        loaded.insert(key, EmbeddingSpace::load(&p).with_context(|| format!("loading {}", p.display()))?);
    }
    let svd_dim = s.svd_dim.unwrap_or_else(|| loaded.values().map(EmbeddingSpace::dim).min().unwrap_or(1));
    let fusions: Vec<Fusion> = s
        .fusions
        .iter()
        .map(|f| match f.as_str() {
            "svd_reduce" | "svd" => Ok(Fusion::SvdReduce { target_dim: svd_dim }),
            other => other.parse::<Fusion>().map_err(anyhow::Error::from),
        })
        .collect::<Result<_>>()?;

    let datasets: Vec<ClassDataset> = combos.iter().map(|&ks| class_dataset(ctx, ks)).collect::<Result<_>>()?;
    let inputs: Vec<SweepInput<'_>> = combos
        .iter()
        .zip(&datasets)
        .map(|(ks, ds)| SweepInput {
            types: ks.label(),
            dataset: ds,
            spaces: ks.iter().map(|k| &loaded[&channel_source(k).display().to_string()]).collect(),
        })
        .collect();
    let rows = sweep(&inputs, &fusions, &ccfg, ctx.cfg.classify.folds)?;
    ensure_dir(&ctx.layout.root)?;
    let path = ctx.layout.root.join("sweep.csv");
    write_text(&path, &sweep_csv(&rows))?;
    write_text(&ctx.layout.root.join("sweep_summary.csv"), &sweep_summary_csv(&rows))?;
    let settings = serde_json::to_string(&(s, &ctx.cfg.classify, ctx.cfg.seed))?;
    let meta = Meta {
        stage: "sweep".into(),
        config_hash: lingvec::vocab::hex_digest(settings.as_bytes())[..16].to_string(),
        kinds: None,
        upstream,
    };
    write_meta(&path, &meta)?;
    write_timing(&ctx.layout.root, "sweep", start.elapsed())?;
    let best = rows
        .iter()
        .max_by(|a, b| a.report.f_measure.total_cmp(&b.report.f_measure))
        .expect("sweep produces at least one row");
    Ok(summary!("stage" => "sweep", "rows" => rows.len(), "best_types" => best.types,
        "best_fusion" => best.fusion, "best_f" => format!("{:.6}", best.report.f_measure),
        "output" => path.display()))
}
