//! Word prediction: how well the weighted average of the context embeddings
//! around a position reconstructs the embedding of the key at the center.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::cooc::Weighting;
use crate::corpus::PositionGroup;
use crate::embedspace::{cosine_value, EmbeddingSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TermRecord {
    pub rank: usize,
    pub term: String,
    pub count: u64,
    pub mean_cosine: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictSummary {
    pub mean_cosine: f64,
    pub predictions: u64,
    /// Every center key seen, including OOV and no-context ones.
    pub tokens: u64,
    pub oov: u64,
    pub no_context: u64,
}

impl PredictSummary {
    pub fn oov_percent(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.oov as f64 / self.tokens as f64 * 100.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictReport {
    /// Sorted by rank (the term's index in the space).
    pub terms: Vec<TermRecord>,
    pub summary: PredictSummary,
}

impl PredictReport {
    pub fn table_header() -> &'static str {
        "corpus | embed. | pred | cosine sim. | #tokens | oov | oov %"
    }

    /// One row in the column order `corpus | embed. | pred | cosine | #tokens | oov | oov %`.
    pub fn table_row(&self, corpus: &str, embedding: &str, predicted: &str) -> String {
        let s = &self.summary;
        format!(
            "{corpus} | {embedding} | {predicted} | {:.3} | {} | {} | {:.3}",
            s.mean_cosine,
            s.tokens,
            s.oov,
            s.oov_percent()
        )
    }
}

#[derive(Default)]
struct Accumulator {
    per_term: HashMap<usize, (f64, u64)>,
    cos_sum: f64,
    predictions: u64,
    tokens: u64,
    oov: u64,
    no_context: u64,
}

impl Accumulator {
    fn merge(&mut self, other: Accumulator) {
        for (k, (s, c)) in other.per_term {
            let e = self.per_term.entry(k).or_insert((0.0, 0));
            e.0 += s;
            e.1 += c;
        }
        self.cos_sum += other.cos_sum;
        self.predictions += other.predictions;
        self.tokens += other.tokens;
        self.oov += other.oov;
        self.no_context += other.no_context;
    }
}

fn predict_document(
    space: &EmbeddingSpace,
    seq: &[PositionGroup],
    window: usize,
    weighting: Weighting,
) -> Accumulator {
    let dim = space.dim();
    let ids: Vec<Vec<Option<usize>>> = seq
        .iter()
        .map(|g| g.iter().map(|k| space.index_of(k)).collect())
        .collect();
    let mut acc = Accumulator::default();
    let mut ctx = vec![0.0f64; dim];
    for p in 0..ids.len() {
        for &center in &ids[p] {
            acc.tokens += 1;
            let Some(center) = center else {
                acc.oov += 1;
                continue;
            };
            ctx.iter_mut().for_each(|x| *x = 0.0);
            let mut weight_sum = 0.0;
            let lo = p.saturating_sub(window);
            let hi = (p + window).min(ids.len() - 1);
            for q in lo..=hi {
                if q == p {
                    continue;
                }
                let w = weighting.weight(p.abs_diff(q));
                for id in ids[q].iter().flatten() {
                    for (c, &x) in ctx.iter_mut().zip(space.row(*id)) {
                        *c += w * x as f64;
                    }
                    weight_sum += w;
                }
            }
            if weight_sum == 0.0 {
                acc.no_context += 1;
                continue;
            }
            ctx.iter_mut().for_each(|x| *x /= weight_sum);
            let cos = cosine_value(space.row(center), &ctx);
            let e = acc.per_term.entry(center).or_insert((0.0, 0));
            e.0 += cos;
            e.1 += 1;
            acc.cos_sum += cos;
            acc.predictions += 1;
        }
    }
    acc
}

/// Scores every center key of `test_corpus` against the weighted average of
/// its in-space context keys within `window` positions.
pub fn eval_predict(
    space: &EmbeddingSpace,
    test_corpus: &[Vec<PositionGroup>],
    window: usize,
    weighting: Weighting,
) -> Result<PredictReport> {
    if window == 0 {
        return Err(Error::Config("window must be at least 1".into()));
    }
    let partials: Vec<Accumulator> = test_corpus
        .par_iter()
        .map(|seq| predict_document(space, seq, window, weighting))
        .collect();
    // merge in document order so sums are independent of thread count
    let mut acc = Accumulator::default();
    for p in partials {
        acc.merge(p);
    }
    if acc.tokens == 0 || acc.predictions == 0 {
        return Err(Error::InsufficientCoverage {
            scored: acc.predictions as usize,
            total: acc.tokens as usize,
        });
    }
    let mut terms: Vec<TermRecord> = acc
        .per_term
        .into_iter()
        .map(|(rank, (sum, count))| TermRecord {
            rank,
            term: space.keys()[rank].clone(),
            count,
            mean_cosine: sum / count as f64,
        })
        .collect();
    terms.sort_unstable_by_key(|t| t.rank);
    Ok(PredictReport {
        terms,
        summary: PredictSummary {
            mean_cosine: acc.cos_sum / acc.predictions as f64,
            predictions: acc.predictions,
            tokens: acc.tokens,
            oov: acc.oov,
            no_context: acc.no_context,
        },
    })
}

const SUMMARY_TAG: &str = "#summary";

pub fn prediction_csv(report: &PredictReport) -> String {
    let mut out = String::from("rank,term,count,mean_cosine\n");
    for t in &report.terms {
        let _ = writeln!(out, "{},{},{},{:.9}", t.rank, csv_field(&t.term), t.count, t.mean_cosine);
    }
    let s = &report.summary;
    let _ = writeln!(
        out,
        "{SUMMARY_TAG},mean_cosine={:.9},predictions={},tokens={},oov={},oov_pct={:.6},no_context={}",
        s.mean_cosine,
        s.predictions,
        s.tokens,
        s.oov,
        s.oov_percent(),
        s.no_context
    );
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Writes the per-term CSV (ranks ascending) followed by a summary line.
pub fn emit_prediction_csv(report: &PredictReport, path: &Path) -> Result<()> {
    if report.terms.is_empty() {
        return Err(Error::InsufficientCoverage {
            scored: 0,
            total: report.summary.tokens as usize,
        });
    }
    fs::write(path, prediction_csv(report)).map_err(|e| Error::io(path, e))
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(ch) = chars.next() {
        match (ch, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(std::mem::take(&mut cur)),
            (c, _) => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

pub fn parse_prediction_csv(text: &str) -> Result<PredictReport> {
    let mut terms = Vec::new();
    let mut summary = None;
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = |m: &str| Error::Parse {
            line: i + 1,
            message: m.to_owned(),
        };
        if let Some(rest) = line.strip_prefix(SUMMARY_TAG) {
            let kv: HashMap<&str, &str> = rest
                .split(',')
                .filter_map(|f| f.split_once('='))
                .collect();
            let num = |k: &str| -> Result<f64> {
                kv.get(k)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad(&format!("summary missing {k}")))
            };
            summary = Some(PredictSummary {
                mean_cosine: num("mean_cosine")?,
                predictions: num("predictions")? as u64,
                tokens: num("tokens")? as u64,
                oov: num("oov")? as u64,
                no_context: num("no_context")? as u64,
            });
            continue;
        }
        let f = split_csv_line(line);
        if f.len() != 4 {
            return Err(bad("expected rank,term,count,mean_cosine"));
        }
        terms.push(TermRecord {
            rank: f[0].parse().map_err(|_| bad("bad rank"))?,
            term: f[1].clone(),
            count: f[2].parse().map_err(|_| bad("bad count"))?,
            mean_cosine: f[3].parse().map_err(|_| bad("bad cosine"))?,
        });
    }
    let summary = summary.ok_or_else(|| Error::Parse {
        line: text.lines().count(),
        message: "missing summary footer".into(),
    })?;
    Ok(PredictReport { terms, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(words: &str) -> Vec<PositionGroup> {
        words.split_whitespace().map(|w| vec![w.to_owned()]).collect()
    }

    #[test]
    fn identical_vectors_predict_perfectly() {
        let space = EmbeddingSpace::from_rows(
            3,
            ["a", "b", "c"].map(|k| (k, vec![0.3, -0.2, 0.9])),
        )
        .unwrap();
        let corpus = vec![seq("a b c a b"), seq("c c a")];
        let r = eval_predict(&space, &corpus, 2, Weighting::Harmonic).unwrap();
        assert_eq!(r.summary.mean_cosine, 1.0);
        assert!(r.terms.iter().all(|t| t.mean_cosine == 1.0));
    }

    #[test]
    fn oov_centers_are_counted_not_scored() {
        let space = EmbeddingSpace::from_rows(2, [("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]).unwrap();
        let corpus = vec![seq("a b x x"), seq("y"), seq("x a x")];
        let r = eval_predict(&space, &corpus, 1, Weighting::Uniform).unwrap();
        assert_eq!(r.summary.tokens, 8);
        assert_eq!(r.summary.oov, 5);
        assert!((r.summary.oov_percent() - 62.5).abs() < 1e-12);
        // the second "a" only sees x on both sides
        assert_eq!(r.summary.no_context, 1);
        assert_eq!(r.summary.predictions, 2);
        assert_eq!(r.summary.predictions, r.terms.iter().map(|t| t.count).sum::<u64>());
    }

    #[test]
    fn context_average_uses_distance_weights() {
        // center "c" between "a" (distance 1) and "b" (distance 2)
        let space = EmbeddingSpace::from_rows(
            2,
            [("c", vec![1.0, 0.0]), ("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])],
        )
        .unwrap();
        let corpus = vec![seq("a c z b")];
        let r = eval_predict(&space, &corpus, 2, Weighting::Harmonic).unwrap();
        let c = r.terms.iter().find(|t| t.term == "c").unwrap();
        // average = (1 * (1,0) + 0.5 * (0,1)) / 1.5 -> cos = 1 / sqrt(1.25)
        assert!((c.mean_cosine - 1.0 / 1.25f64.sqrt()).abs() < 1e-12);
        let r = eval_predict(&space, &corpus, 2, Weighting::Uniform).unwrap();
        let c = r.terms.iter().find(|t| t.term == "c").unwrap();
        assert!((c.mean_cosine - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_is_insufficient() {
        let space = EmbeddingSpace::from_rows(1, [("a", vec![1.0])]).unwrap();
        assert!(matches!(
            eval_predict(&space, &[], 1, Weighting::Uniform),
            Err(Error::InsufficientCoverage { .. })
        ));
    }

    #[test]
    fn csv_is_rank_sorted_and_round_trips() {
        let space = EmbeddingSpace::from_rows(
            2,
            [
                ("a", vec![1.0, 0.1]),
                ("b,x", vec![0.2, 1.0]),
                ("c", vec![0.7, 0.7]),
            ],
        )
        .unwrap();
        let corpus = vec![seq("c a b,x c a c b,x")];
        let r = eval_predict(&space, &corpus, 2, Weighting::Harmonic).unwrap();
        assert_eq!(r.terms.len(), 3);
        let csv = prediction_csv(&r);
        assert_eq!(csv.lines().count(), 1 + 3 + 1);
        let ranks: Vec<usize> = r.terms.iter().map(|t| t.rank).collect();
        assert!(ranks.windows(2).all(|w| w[0] < w[1]));

        let back = parse_prediction_csv(&csv).unwrap();
        assert_eq!(back.terms.len(), 3);
        for (a, b) in back.terms.iter().zip(&r.terms) {
            assert_eq!((a.rank, &a.term, a.count), (b.rank, &b.term, b.count));
            assert!((a.mean_cosine - b.mean_cosine).abs() <= 1e-6 * b.mean_cosine.abs());
        }
        assert_eq!(back.summary.tokens, r.summary.tokens);
        assert!((back.summary.mean_cosine - r.summary.mean_cosine).abs() < 1e-8);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pred.csv");
        emit_prediction_csv(&r, &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), csv);
        assert!(emit_prediction_csv(&r, &dir.path().join("missing/pred.csv")).is_err());
    }

    #[test]
    fn summary_is_count_weighted_term_mean() {
        let space = EmbeddingSpace::from_rows(
            2,
            [("a", vec![1.0, 0.3]), ("b", vec![-0.2, 1.0]), ("c", vec![0.5, -0.5])],
        )
        .unwrap();
        let corpus = vec![seq("a b c a a b c b a c c"), seq("b a")];
        let r = eval_predict(&space, &corpus, 3, Weighting::Harmonic).unwrap();
        let n: u64 = r.terms.iter().map(|t| t.count).sum();
        let weighted: f64 = r.terms.iter().map(|t| t.count as f64 * t.mean_cosine).sum::<f64>() / n as f64;
        assert!((weighted - r.summary.mean_cosine).abs() < 1e-9);
        assert_eq!(r, eval_predict(&space, &corpus, 3, Weighting::Harmonic).unwrap());
    }
}
