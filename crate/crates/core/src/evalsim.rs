//! Word similarity and relatedness evaluation.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{AnnotatedDocument, AnnotationKind, GRAMMAR_PREFIX, LEMMA_PREFIX};
use crate::embedspace::{cosine_value, EmbeddingSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationType {
    Similarity,
    Relatedness,
    Mixed,
}

impl FromStr for RelationType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim" => Ok(RelationType::Similarity),
            "rel" => Ok(RelationType::Relatedness),
            "mixed" => Ok(RelationType::Mixed),
            o => Err(Error::Config(format!("unknown relation type '{o}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimilarityDataset {
    pub name: String,
    pub relation: RelationType,
    pub pairs: Vec<(String, String, f64)>,
}

impl SimilarityDataset {
    /// Parses `word1<TAB>word2<TAB>score` lines; `#` starts a comment line.
    pub fn parse(name: &str, relation: RelationType, text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = if line.contains('\t') {
                line.split('\t').collect()
            } else {
                line.split_whitespace().collect()
            };
            let bad = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", fields.len())));
            }
            let score: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad score '{}'", fields[2])))?;
            if !score.is_finite() {
                return Err(bad("score must be finite".into()));
            }
            pairs.push((fields[0].trim().to_owned(), fields[1].trim().to_owned(), score));
        }
        if pairs.is_empty() {
            return Err(Error::Config(format!("dataset '{name}' has no pairs")));
        }
        Ok(SimilarityDataset {
            name: name.to_owned(),
            relation,
            pairs,
        })
    }

    pub fn load(path: &Path, relation: RelationType) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&name, relation, &text)
    }
}

/// Fractional ranks (1-based); tied values share the mean of their ranks.
pub fn fractional_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two observations"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input vector"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    pearson(&fractional_ranks(xs), &fractional_ranks(ys))
}

/// Most frequent concept co-annotated with each lemma key and surface form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConceptMap {
    map: HashMap<String, String>,
}

impl ConceptMap {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

pub fn build_concept_map<'a, I>(corpus: I) -> ConceptMap
where
    I: IntoIterator<Item = &'a AnnotatedDocument>,
{
    let mut counts: HashMap<String, HashMap<String, u64>> = HashMap::new();
    for doc in corpus {
        for tok in &doc.tokens {
            let Some(concept) = tok.c.as_deref() else {
                continue;
            };
            if concept.is_empty() || concept.starts_with(GRAMMAR_PREFIX) {
                continue;
            }
            for kind in [AnnotationKind::Lemma, AnnotationKind::SurfaceForm] {
                for key in tok.keys_for(kind) {
                    if key.starts_with(GRAMMAR_PREFIX) {
                        continue;
                    }
                    *counts
                        .entry(key)
                        .or_default()
                        .entry(concept.to_owned())
                        .or_insert(0) += 1;
                }
            }
        }
    }
    let map = counts
        .into_iter()
        .map(|(key, cs)| {
            let best = cs
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                .expect("non-empty concept counts")
                .0;
            (key, best)
        })
        .collect();
    ConceptMap { map }
}

/// One way of turning a plain benchmark word into a candidate key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolveStep {
    Exact,
    Lowercase,
    LemmaPrefix,
    LemmaPrefixLowercase,
}

impl ResolveStep {
    fn apply(self, word: &str) -> String {
        match self {
            ResolveStep::Exact => word.to_owned(),
            ResolveStep::Lowercase => word.to_lowercase(),
            ResolveStep::LemmaPrefix => format!("{LEMMA_PREFIX}{word}"),
            ResolveStep::LemmaPrefixLowercase => format!("{LEMMA_PREFIX}{}", word.to_lowercase()),
        }
    }
}

/// Ordered candidate keys tried for each benchmark word; the first key found
/// wins. Multi-word entries use the `+` joiner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolver {
    pub steps: Vec<ResolveStep>,
}

impl Default for Resolver {
    fn default() -> Self {
        Resolver {
            steps: vec![
                ResolveStep::Exact,
                ResolveStep::Lowercase,
                ResolveStep::LemmaPrefix,
                ResolveStep::LemmaPrefixLowercase,
            ],
        }
    }
}

impl Resolver {
    pub fn candidates(&self, word: &str) -> impl Iterator<Item = String> + '_ {
        let joined = word.split_whitespace().collect::<Vec<_>>().join("+");
        self.steps.iter().map(move |s| s.apply(&joined))
    }

    pub fn resolve(&self, space: &EmbeddingSpace, word: &str) -> Option<String> {
        self.candidates(word).find(|k| space.contains(k))
    }

    /// Maps a word to a concept key through the concept map; the concept must
    /// be present in `space`.
    pub fn resolve_concept(
        &self,
        space: &EmbeddingSpace,
        cmap: &ConceptMap,
        word: &str,
    ) -> Option<String> {
        self.candidates(word)
            .find_map(|k| cmap.get(&k))
            .filter(|c| space.contains(c))
            .map(str::to_owned)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    Direct,
    Concept,
}

impl FromStr for SimMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SimMode::Direct),
            "concept" => Ok(SimMode::Concept),
            o => Err(Error::Config(format!("unknown similarity mode '{o}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    pub word1: String,
    pub word2: String,
    pub keys: Option<(String, String)>,
    pub cosine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub dataset: String,
    pub spearman: f64,
    pub pearson: f64,
    pub scored: usize,
    pub total: usize,
    pub pairs: Vec<PairOutcome>,
}

impl SimRow {
    pub fn coverage(&self) -> f64 {
        self.scored as f64 / self.total as f64
    }

    pub fn harmonic_mean(&self) -> Option<f64> {
        harmonic(self.spearman, self.pearson)
    }
}

fn harmonic(a: f64, b: f64) -> Option<f64> {
    (a > 0.0 && b > 0.0).then(|| 2.0 * a * b / (a + b))
}

pub fn eval_similarity(
    space: &EmbeddingSpace,
    dataset: &SimilarityDataset,
    mode: SimMode,
    cmap: Option<&ConceptMap>,
    resolver: &Resolver,
) -> Result<SimRow> {
    let cmap = match (mode, cmap) {
        (SimMode::Concept, None) => {
            return Err(Error::Config("concept mode requires a concept map".into()))
        }
        (_, c) => c,
    };
    let resolve = |w: &str| match mode {
        SimMode::Direct => resolver.resolve(space, w),
        SimMode::Concept => resolver.resolve_concept(space, cmap.expect("checked above"), w),
    };
    let mut pairs = Vec::with_capacity(dataset.pairs.len());
    let mut cosines = Vec::new();
    let mut human = Vec::new();
    for (w1, w2, score) in &dataset.pairs {
        let keys = resolve(w1).zip(resolve(w2));
        let cos = keys.as_ref().map(|(k1, k2)| {
            cosine_value(space.get(k1).unwrap(), space.get(k2).unwrap())
        });
        log::debug!("{}: {w1} / {w2} -> {keys:?} cos={cos:?}", dataset.name);
        if let Some(c) = cos {
            cosines.push(c);
            human.push(*score);
        }
        pairs.push(PairOutcome {
            word1: w1.clone(),
            word2: w2.clone(),
            keys,
            cosine: cos,
        });
    }
    let scored = cosines.len();
    let total = dataset.pairs.len();
    if scored < 2 {
        return Err(Error::InsufficientCoverage { scored, total });
    }
    Ok(SimRow {
        dataset: dataset.name.clone(),
        spearman: spearman(&cosines, &human)?,
        pearson: pearson(&cosines, &human)?,
        scored,
        total,
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub embedding: String,
    pub rows: Vec<SimRow>,
}

impl SimReport {
    pub fn avg_spearman(&self) -> f64 {
        self.rows.iter().map(|r| r.spearman).sum::<f64>() / self.rows.len().max(1) as f64
    }

    pub fn avg_pearson(&self) -> f64 {
        self.rows.iter().map(|r| r.pearson).sum::<f64>() / self.rows.len().max(1) as f64
    }

    /// Harmonic mean of the two averages; absent unless both are positive.
    pub fn harmonic_mean(&self) -> Option<f64> {
        harmonic(self.avg_spearman(), self.avg_pearson())
    }

    /// One row per dataset plus an `AVERAGE` row.
    pub fn to_csv(&self) -> String {
        let fmt_opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        let mut out = String::from("embedding,dataset,spearman,pearson,harmonic_mean,scored,total,coverage\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{},{},{},{:.6}",
                self.embedding,
                r.dataset,
                r.spearman,
                r.pearson,
                fmt_opt(r.harmonic_mean()),
                r.scored,
                r.total,
                r.coverage()
            );
        }
        let scored: usize = self.rows.iter().map(|r| r.scored).sum();
        let total: usize = self.rows.iter().map(|r| r.total).sum();
        let _ = writeln!(
            out,
            "{},AVERAGE,{:.6},{:.6},{},{},{},{:.6}",
            self.embedding,
            self.avg_spearman(),
            self.avg_pearson(),
            fmt_opt(self.harmonic_mean()),
            scored,
            total,
            scored as f64 / total.max(1) as f64
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AnnotatedToken;

    #[test]
    fn spearman_fixtures() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
        let rev = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&xs, &rev).unwrap() + 1.0).abs() < 1e-12);
        let ys = [2.0, 1.0, 4.0, 3.0, 5.0];
        // no ties: 1 - 6 sum(d^2) / (n (n^2 - 1)) with d = (-1, 1, -1, 1, 0)
        let d2: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - y) * (x - y)).sum();
        let closed_form = 1.0 - 6.0 * d2 / (5.0 * 24.0);
        assert_eq!(d2, 4.0);
        assert!((spearman(&xs, &ys).unwrap() - closed_form).abs() < 1e-12);
        assert!((spearman(&xs, &ys).unwrap() - 0.8).abs() < 1e-12);
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn pearson_fixtures() {
        let xs = [1.0, 2.0, 3.0, 7.5];
        let affine: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &affine).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        // cov 1.5 (x2), var 2 and 14/3 (x2): 3 / sqrt(2 * 14/3)
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 3.0 / (2.0f64 * 14.0 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r - 0.981_980_506_061_965_7).abs() < 1e-9);
    }

    #[test]
    fn tied_ranks_are_averaged() {
        assert_eq!(fractional_ranks(&[10.0, 20.0, 10.0, 30.0]), [1.5, 3.0, 1.5, 4.0]);
    }

    fn concept_doc(lemma: &str, concept: &str, n: usize) -> AnnotatedDocument {
        AnnotatedDocument {
            id: "d".into(),
            tokens: (0..n)
                .map(|_| AnnotatedToken::raw(lemma).with(Some(lemma), Some(lemma), Some("NOU"), Some(concept)))
                .collect(),
        }
    }

    #[test]
    fn concept_map_majority_and_ties() {
        let docs = [concept_doc("boy", "en%2346011", 10)];
        let cmap = build_concept_map(&docs);
        assert_eq!(cmap.get("lem_boy"), Some("en%2346011"));
        assert_eq!(cmap.get("boy"), Some("en%2346011"));

        let docs = [concept_doc("bank", "cB", 5), concept_doc("bank", "cA", 5)];
        assert_eq!(build_concept_map(&docs).get("lem_bank"), Some("cA"));

        let plain = crate::corpus::plain_annotate("p", "no concepts here");
        assert!(build_concept_map([&plain]).is_empty());
    }

    fn fixture_space() -> EmbeddingSpace {
        // angles chosen so cosine with "a" decreases along b, c, d, e, f
        let rows = (0..6).map(|i| {
            let theta = i as f32 * 0.25;
            (
                ["a", "lem_b", "c", "d", "e", "f"][i].to_owned(),
                vec![theta.cos(), theta.sin()],
            )
        });
        EmbeddingSpace::from_rows(2, rows).unwrap()
    }

    #[test]
    fn perfect_order_gives_unit_spearman() {
        let ds = SimilarityDataset::parse(
            "toy",
            RelationType::Similarity,
            "# comment\na\tB\t9\na\tc\t8\na\td\t7\na\te\t6\na\tf\t5\na\tzzz\t1\n",
        )
        .unwrap();
        let row = eval_similarity(&fixture_space(), &ds, SimMode::Direct, None, &Resolver::default()).unwrap();
        assert_eq!((row.scored, row.total), (5, 6));
        assert!((row.spearman - 1.0).abs() < 1e-12);
        // "B" resolved through lowercase + lemma prefix
        assert_eq!(row.pairs[0].keys.as_ref().unwrap().1, "lem_b");
        let skipped = row.pairs.iter().filter(|p| p.cosine.is_none()).count();
        assert_eq!(row.scored + skipped, row.total);
    }

    #[test]
    fn all_oov_is_insufficient() {
        let ds = SimilarityDataset::parse("oov", RelationType::Mixed, "x\ty\t1\nq\tr\t2\n").unwrap();
        let err = eval_similarity(&fixture_space(), &ds, SimMode::Direct, None, &Resolver::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientCoverage { scored: 0, total: 2 }));
    }

    #[test]
    fn concept_mode_never_falls_back_to_lemmas() {
        let space = EmbeddingSpace::from_rows(
            2,
            [
                ("en#1", vec![1.0, 0.0]),
                ("en#2", vec![0.9, 0.1]),
                ("en#3", vec![0.0, 1.0]),
                ("lem_zeta", vec![1.0, 1.0]),
            ],
        )
        .unwrap();
        let docs = [
            concept_doc("alpha", "en#1", 1),
            concept_doc("beta", "en#2", 1),
            concept_doc("gamma", "en#3", 1),
        ];
        let cmap = build_concept_map(&docs);
        let ds = SimilarityDataset::parse(
            "c",
            RelationType::Similarity,
            "alpha\tbeta\t9\nalpha\tgamma\t1\nbeta\tgamma\t2\nalpha\tzeta\t5\n",
        )
        .unwrap();
        let row = eval_similarity(&space, &ds, SimMode::Concept, Some(&cmap), &Resolver::default()).unwrap();
        assert_eq!(row.scored, 3);
        assert!(row.pairs[3].keys.is_none());
        assert!(eval_similarity(&space, &ds, SimMode::Concept, None, &Resolver::default()).is_err());
    }

    #[test]
    fn report_averages_and_harmonic() {
        let row = |s, p| SimRow {
            dataset: "d".into(),
            spearman: s,
            pearson: p,
            scored: 2,
            total: 2,
            pairs: vec![],
        };
        let rep = SimReport {
            embedding: "l_c".into(),
            rows: vec![row(0.4, 0.6), row(0.6, 0.2)],
        };
        assert!((rep.avg_spearman() - 0.5).abs() < 1e-12);
        assert!((rep.avg_pearson() - 0.4).abs() < 1e-12);
        assert!((rep.harmonic_mean().unwrap() - 0.4 / 0.9).abs() < 1e-12);
        let neg = SimReport {
            embedding: "x".into(),
            rows: vec![row(-0.1, 0.3)],
        };
        assert!(neg.harmonic_mean().is_none());
        assert_eq!(rep.to_csv().lines().count(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn spearman_invariant_under_increasing_transform(
                pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            ) {
                let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                if let Ok(rho) = spearman(&xs, &ys) {
                    let t: Vec<f64> = ys.iter().map(|y| (y / 50.0).exp() + y.powi(3)).collect();
                    prop_assert!((spearman(&xs, &t).unwrap() - rho).abs() < 1e-9);
                    prop_assert!((-1.0..=1.0).contains(&rho));
                }
            }
        }
    }
}
