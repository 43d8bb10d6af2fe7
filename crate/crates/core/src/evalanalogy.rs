//! Analogy evaluation by vector offset over Google-style question files.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::embedspace::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::evalsim::Resolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SectionKind {
    Semantic,
    Syntactic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogySection {
    pub name: String,
    pub kind: SectionKind,
    /// `(a, b, x, y)`: a is to b as x is to y.
    pub questions: Vec<[String; 4]>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalogyDataset {
    pub sections: Vec<AnalogySection>,
}

impl AnalogyDataset {
    /// Parses `: section-name` headers followed by four words per line.
    /// Sections named `gram*` are syntactic unless `overrides` says otherwise.
    pub fn parse(text: &str, overrides: &HashMap<String, SectionKind>) -> Result<Self> {
        let mut sections: Vec<AnalogySection> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix(':') {
                let name = name.trim().to_owned();
                let kind = overrides.get(&name).copied().unwrap_or(if name.starts_with("gram") {
                    SectionKind::Syntactic
                } else {
                    SectionKind::Semantic
                });
                sections.push(AnalogySection {
                    name,
                    kind,
                    questions: Vec::new(),
                });
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            if words.len() != 4 {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected 4 words, found {}", words.len()),
                });
            }
            let section = sections.last_mut().ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "question before any ': section' header".into(),
            })?;
            section
                .questions
                .push([0, 1, 2, 3].map(|k| words[k].to_owned()));
        }
        Ok(AnalogyDataset { sections })
    }

    pub fn load(path: &Path, overrides: &HashMap<String, SectionKind>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, overrides)
    }

    pub fn len(&self) -> usize {
        self.sections.iter().map(|s| s.questions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalogyMethod {
    /// argmax cos(v, b - a + x)
    CosAdd,
    /// argmax cos'(v,b) cos'(v,x) / (cos'(v,a) + eps), with cos' = (cos + 1) / 2
    CosMul,
}

const COSMUL_EPS: f64 = 1e-3;

/// Precomputed unit vectors for repeated nearest-neighbour queries.
pub struct AnalogySolver<'a> {
    space: &'a EmbeddingSpace,
    unit: Vec<f64>,
}

impl<'a> AnalogySolver<'a> {
    pub fn new(space: &'a EmbeddingSpace) -> Self {
        let dim = space.dim();
        let mut unit = Vec::with_capacity(space.len() * dim);
        for (_, v) in space.iter() {
            let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
            let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            unit.extend(v.iter().map(|&x| x as f64 * inv));
        }
        AnalogySolver { space, unit }
    }

    fn unit_row(&self, i: usize) -> &[f64] {
        let d = self.space.dim();
        &self.unit[i * d..(i + 1) * d]
    }

    fn dot_unit(&self, i: usize, q: &[f64]) -> f64 {
        self.unit_row(i).iter().zip(q).map(|(a, b)| a * b).sum()
    }

    /// Best candidate for `a : b :: x : ?`, never one of the three inputs.
    /// `candidates` restricts the search to the given key indices.
    pub fn solve(
        &self,
        a: &str,
        b: &str,
        x: &str,
        candidates: Option<&[usize]>,
        method: AnalogyMethod,
    ) -> Result<String> {
        let idx = |w: &str| {
            self.space
                .index_of(w)
                .ok_or_else(|| Error::OutOfVocabulary(w.to_owned()))
        };
        let (ia, ib, ix) = (idx(a)?, idx(b)?, idx(x)?);
        let scorer: Box<dyn Fn(usize) -> f64 + Sync + '_> = match method {
            AnalogyMethod::CosAdd => {
                let (ea, eb, ex) = (self.space.row(ia), self.space.row(ib), self.space.row(ix));
                let mut target: Vec<f64> = (0..self.space.dim())
                    .map(|k| eb[k] as f64 - ea[k] as f64 + ex[k] as f64)
                    .collect();
                let norm = target.iter().map(|t| t * t).sum::<f64>().sqrt();
                if norm > 0.0 {
                    target.iter_mut().for_each(|t| *t /= norm);
                }
                Box::new(move |i| self.dot_unit(i, &target))
            }
            AnalogyMethod::CosMul => {
                let (ua, ub, ux) = (
                    self.unit_row(ia).to_vec(),
                    self.unit_row(ib).to_vec(),
                    self.unit_row(ix).to_vec(),
                );
                Box::new(move |i| {
                    let c = |q: &[f64]| (self.dot_unit(i, q) + 1.0) / 2.0;
                    c(&ub) * c(&ux) / (c(&ua) + COSMUL_EPS)
                })
            }
        };
        let all: Vec<usize>;
        let pool = match candidates {
            Some(c) => c,
            None => {
                all = (0..self.space.len()).collect();
                &all
            }
        };
        let keys = self.space.keys();
        let mut best: Option<(f64, usize)> = None;
        for &i in pool {
            if i == ia || i == ib || i == ix {
                continue;
            }
            let s = scorer(i);
            best = match best {
                None => Some((s, i)),
                Some((bs, bi)) if s > bs || (s == bs && keys[i] < keys[bi]) => Some((s, i)),
                keep => keep,
            };
        }
        best.map(|(_, i)| keys[i].clone())
            .ok_or(Error::InsufficientCoverage { scored: 0, total: 1 })
    }
}

/// Convenience wrapper over [`AnalogySolver`] for a single question.
pub fn solve_analogy(
    space: &EmbeddingSpace,
    a: &str,
    b: &str,
    x: &str,
    candidates: Option<&[usize]>,
) -> Result<String> {
    AnalogySolver::new(space).solve(a, b, x, candidates, AnalogyMethod::CosAdd)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub correct: usize,
    pub attempted: usize,
}

impl Tally {
    pub fn accuracy(&self) -> Option<f64> {
        (self.attempted > 0).then(|| self.correct as f64 / self.attempted as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogyReport {
    pub semantic: Tally,
    pub syntactic: Tally,
    pub skipped: usize,
}

impl AnalogyReport {
    pub fn overall(&self) -> Tally {
        Tally {
            correct: self.semantic.correct + self.syntactic.correct,
            attempted: self.semantic.attempted + self.syntactic.attempted,
        }
    }

    pub fn csv_header() -> &'static str {
        "embedding,semantic,syntactic,overall,attempted,skipped"
    }

    /// Accuracies as percentages.
    pub fn csv_row(&self, embedding: &str) -> String {
        let pct = |t: Tally| {
            t.accuracy()
                .map(|a| format!("{:.2}", a * 100.0))
                .unwrap_or_default()
        };
        format!(
            "{embedding},{},{},{},{},{}",
            pct(self.semantic),
            pct(self.syntactic),
            pct(self.overall()),
            self.overall().attempted,
            self.skipped
        )
    }
}

/// Questions whose `a`, `b` or `x` do not resolve are skipped. An
/// unresolvable expected answer still counts as attempted (and wrong).
pub fn eval_analogy(
    space: &EmbeddingSpace,
    dataset: &AnalogyDataset,
    resolver: &Resolver,
    method: AnalogyMethod,
) -> Result<AnalogyReport> {
    let solver = AnalogySolver::new(space);
    let questions: Vec<(SectionKind, &[String; 4])> = dataset
        .sections
        .iter()
        .flat_map(|s| s.questions.iter().map(move |q| (s.kind, q)))
        .collect();
    let outcomes: Vec<(SectionKind, Option<bool>)> = questions
        .par_iter()
        .map(|(kind, q)| {
            let keys: Vec<Option<String>> = q.iter().map(|w| resolver.resolve(space, w)).collect();
            let (Some(a), Some(b), Some(x)) = (&keys[0], &keys[1], &keys[2]) else {
                return (*kind, None);
            };
            let correct = match solver.solve(a, b, x, None, method) {
                Ok(pred) => keys[3].as_deref() == Some(pred.as_str()),
                Err(_) => false,
            };
            (*kind, Some(correct))
        })
        .collect();
    let mut report = AnalogyReport {
        semantic: Tally::default(),
        syntactic: Tally::default(),
        skipped: 0,
    };
    for (kind, outcome) in outcomes {
        let tally = match kind {
            SectionKind::Semantic => &mut report.semantic,
            SectionKind::Syntactic => &mut report.syntactic,
        };
        match outcome {
            None => report.skipped += 1,
            Some(ok) => {
                tally.attempted += 1;
                tally.correct += ok as usize;
            }
        }
    }
    if report.overall().attempted == 0 {
        return Err(Error::InsufficientCoverage {
            scored: 0,
            total: dataset.len(),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// queen = king - man + woman exactly, plus distractors.
    pub(crate) fn royal_space() -> EmbeddingSpace {
        EmbeddingSpace::from_rows(
            3,
            [
                ("king", vec![1.0, 1.0, 0.0]),
                ("man", vec![1.0, 0.0, 0.0]),
                ("woman", vec![0.0, 0.0, 1.0]),
                ("queen", vec![0.0, 1.0, 1.0]),
                ("apple", vec![0.3, -1.0, 0.2]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn planted_offset_is_found() {
        let s = royal_space();
        assert_eq!(solve_analogy(&s, "man", "king", "woman", None).unwrap(), "queen");
        let solver = AnalogySolver::new(&s);
        assert_eq!(
            solver.solve("man", "king", "woman", None, AnalogyMethod::CosMul).unwrap(),
            "queen"
        );
    }

    #[test]
    fn inputs_are_never_returned() {
        // b - a + x == x when a == b
        let s = royal_space();
        let pred = solve_analogy(&s, "man", "man", "woman", None).unwrap();
        assert_ne!(pred, "woman");
        assert_ne!(pred, "man");
    }

    #[test]
    fn unresolved_input_is_oov() {
        let s = royal_space();
        assert!(matches!(
            solve_analogy(&s, "man", "king", "nobody", None),
            Err(Error::OutOfVocabulary(_))
        ));
    }

    #[test]
    fn parse_google_format() {
        let text = ": capital-common-countries\nAthens Greece Baghdad Iraq\n: gram1-adjective-to-adverb\namazing amazingly apparent apparently\n";
        let ds = AnalogyDataset::parse(text, &HashMap::new()).unwrap();
        assert_eq!(ds.sections.len(), 2);
        assert_eq!(ds.sections[0].kind, SectionKind::Semantic);
        assert_eq!(ds.sections[1].kind, SectionKind::Syntactic);
        let overrides = HashMap::from([("capital-common-countries".to_owned(), SectionKind::Syntactic)]);
        let ds = AnalogyDataset::parse(text, &overrides).unwrap();
        assert_eq!(ds.sections[0].kind, SectionKind::Syntactic);
        assert!(AnalogyDataset::parse("a b c d\n", &HashMap::new()).is_err());
        assert!(AnalogyDataset::parse(": s\na b c\n", &HashMap::new()).is_err());
    }

    #[test]
    fn tally_by_section() {
        let s = royal_space();
        let text = ": family\nman king woman queen\nman king woman apple\n: gram-x\nman king woman queen\nman woman king queen\n";
        let ds = AnalogyDataset::parse(text, &HashMap::new()).unwrap();
        let r = eval_analogy(&s, &ds, &Resolver::default(), AnalogyMethod::CosAdd).unwrap();
        // woman - man + king = (0,1,1) = queen again
        assert_eq!(r.semantic, Tally { correct: 1, attempted: 2 });
        assert_eq!(r.syntactic, Tally { correct: 2, attempted: 2 });
        assert_eq!(r.overall().accuracy(), Some(0.75));
        assert_eq!(r.csv_row("x"), "x,50.00,100.00,75.00,4,0");
    }

    #[test]
    fn nothing_attempted_is_insufficient() {
        let s = royal_space();
        let ds = AnalogyDataset::parse(": s\nfoo bar baz qux\n", &HashMap::new()).unwrap();
        let err = eval_analogy(&s, &ds, &Resolver::default(), AnalogyMethod::CosAdd).unwrap_err();
        assert!(matches!(err, Error::InsufficientCoverage { .. }));
    }
}
