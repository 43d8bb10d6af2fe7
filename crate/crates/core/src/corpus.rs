//! Annotated documents, corpus ingestion, filtering and projection onto
//! vocabulary keys.
//!
//! A document is a sequence of annotator units. Each unit carries its raw
//! text `t` and, optionally, a surface form, lemma, grammar tag and concept
//! identifier. Multi-word surface forms and lemmas are joined with `+`; the
//! annotator is expected to have merged them already, so one unit is one
//! position in the projected sequence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEMMA_PREFIX: &str = "lem_";
pub const GRAMMAR_PREFIX: &str = "grammar#";
pub const MULTIWORD_JOINER: char = '+';

/// A namespaced vocabulary key such as `lem_breathe` or `grammar#NOU`.
pub type VocabKey = String;

/// One position of a projected sequence: the keys of the requested kinds
/// present at that position, in kind order, without duplicates.
pub type PositionGroup = Vec<VocabKey>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnnotationKind {
    Token,
    SurfaceForm,
    Lemma,
    Grammar,
    Concept,
}

impl AnnotationKind {
    pub const ALL: [AnnotationKind; 5] = [
        AnnotationKind::Token,
        AnnotationKind::SurfaceForm,
        AnnotationKind::Lemma,
        AnnotationKind::Grammar,
        AnnotationKind::Concept,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AnnotationKind::Token => "t",
            AnnotationKind::SurfaceForm => "sf",
            AnnotationKind::Lemma => "l",
            AnnotationKind::Grammar => "g",
            AnnotationKind::Concept => "c",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl FromStr for AnnotationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" => Ok(AnnotationKind::Token),
            "sf" => Ok(AnnotationKind::SurfaceForm),
            "l" => Ok(AnnotationKind::Lemma),
            "g" => Ok(AnnotationKind::Grammar),
            "c" => Ok(AnnotationKind::Concept),
            other => Err(Error::Config(format!("unknown annotation kind '{other}'"))),
        }
    }
}

/// A non-empty subset of annotation kinds, written as an underscore-joined
/// combination string such as `sf_l_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KindSet(u8);

impl KindSet {
    pub fn new(kinds: impl IntoIterator<Item = AnnotationKind>) -> Result<Self> {
        let bits = kinds.into_iter().fold(0u8, |acc, k| acc | k.bit());
        if bits == 0 {
            return Err(Error::Config("annotation kind set must be non-empty".into()));
        }
        Ok(KindSet(bits))
    }

    pub fn single(kind: AnnotationKind) -> Self {
        KindSet(kind.bit())
    }

    pub fn contains(self, kind: AnnotationKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn iter(self) -> impl Iterator<Item = AnnotationKind> {
        AnnotationKind::ALL
            .into_iter()
            .filter(move |k| self.contains(*k))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn label(self) -> String {
        self.iter().map(|k| k.label()).collect::<Vec<_>>().join("_")
    }
}

impl FromStr for KindSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Config("empty annotation combination".into()));
        }
        let kinds = s
            .split('_')
            .map(AnnotationKind::from_str)
            .collect::<Result<Vec<_>>>()?;
        let set = KindSet::new(kinds.iter().copied())?;
        if set.len() != kinds.len() {
            return Err(Error::Config(format!("repeated kind in combination '{s}'")));
        }
        Ok(set)
    }
}

impl fmt::Display for KindSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedToken {
    pub t: String,
    #[serde(default)]
    pub sf: Option<String>,
    #[serde(default)]
    pub l: Option<String>,
    #[serde(default)]
    pub g: Option<String>,
    #[serde(default)]
    pub c: Option<String>,
}

impl AnnotatedToken {
    pub fn raw(t: impl Into<String>) -> Self {
        AnnotatedToken {
            t: t.into(),
            sf: None,
            l: None,
            g: None,
            c: None,
        }
    }

    /// Builder used mostly by fixtures: `AnnotatedToken::raw("gene mutation").with(sf, l, g, c)`.
    pub fn with(
        mut self,
        sf: Option<&str>,
        l: Option<&str>,
        g: Option<&str>,
        c: Option<&str>,
    ) -> Self {
        self.sf = sf.map(str::to_owned);
        self.l = l.map(str::to_owned);
        self.g = g.map(str::to_owned);
        self.c = c.map(str::to_owned);
        self
    }

    /// Keys this unit contributes for one annotation kind.
    ///
    /// Raw text can span several whitespace-separated tokens for a merged
    /// unit; each of those is its own key. Values already in the grammar
    /// namespace (generalized units) are emitted verbatim for every kind.
    pub fn keys_for(&self, kind: AnnotationKind) -> Vec<VocabKey> {
        fn annotated(value: &Option<String>, prefix: &str) -> Vec<VocabKey> {
            match value {
                Some(v) if v.starts_with(GRAMMAR_PREFIX) => vec![v.clone()],
                Some(v) if !v.is_empty() => vec![format!("{prefix}{v}")],
                _ => Vec::new(),
            }
        }
        match kind {
            AnnotationKind::Token => self.t.split_whitespace().map(str::to_owned).collect(),
            AnnotationKind::SurfaceForm => annotated(&self.sf, ""),
            AnnotationKind::Lemma => annotated(&self.l, LEMMA_PREFIX),
            AnnotationKind::Grammar => annotated(&self.g, GRAMMAR_PREFIX),
            AnnotationKind::Concept => annotated(&self.c, ""),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub id: String,
    pub tokens: Vec<AnnotatedToken>,
}

impl AnnotatedDocument {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("document serialization cannot fail")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterConfig {
    pub drop_grammar: BTreeSet<String>,
    pub generalize: BTreeMap<String, String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            drop_grammar: ["ART", "PNT", "AUX"].iter().map(|s| s.to_string()).collect(),
            generalize: [("ENT", "grammar#ENT"), ("NPH", "grammar#NPH")]
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl FilterConfig {
    /// A configuration that leaves every document untouched.
    pub fn none() -> Self {
        FilterConfig {
            drop_grammar: BTreeSet::new(),
            generalize: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(tag) = self
            .drop_grammar
            .iter()
            .find(|t| self.generalize.contains_key(*t))
        {
            return Err(Error::Config(format!(
                "grammar tag '{tag}' is both dropped and generalized"
            )));
        }
        Ok(())
    }
}

/// Drops units whose grammar tag is in the drop set and replaces the
/// surface form, lemma and concept of generalized units with their
/// replacement key.
pub fn apply_filters(doc: &AnnotatedDocument, cfg: &FilterConfig) -> AnnotatedDocument {
    let tokens = doc
        .tokens
        .iter()
        .filter(|tok| match &tok.g {
            Some(g) => !cfg.drop_grammar.contains(g),
            None => true,
        })
        .map(|tok| {
            let replacement = tok.g.as_ref().and_then(|g| cfg.generalize.get(g));
            match replacement {
                Some(rep) => AnnotatedToken {
                    t: tok.t.clone(),
                    sf: Some(rep.clone()),
                    l: Some(rep.clone()),
                    g: tok.g.clone(),
                    c: Some(rep.clone()),
                },
                None => tok.clone(),
            }
        })
        .collect();
    AnnotatedDocument {
        id: doc.id.clone(),
        tokens,
    }
}

/// Projects a document onto sequences of vocabulary keys for the requested
/// kinds. Units where none of the kinds is present are dropped.
///
/// When the projection is token-only, each whitespace-separated raw token
/// becomes its own position; otherwise a unit is a single position.
pub fn project(doc: &AnnotatedDocument, kinds: KindSet) -> Vec<PositionGroup> {
    let token_only = kinds == KindSet::single(AnnotationKind::Token);
    let mut out = Vec::with_capacity(doc.tokens.len());
    for tok in &doc.tokens {
        if token_only {
            out.extend(tok.t.split_whitespace().map(|t| vec![t.to_owned()]));
            continue;
        }
        let mut group: PositionGroup = Vec::new();
        for kind in kinds.iter() {
            for key in tok.keys_for(kind) {
                if !group.contains(&key) {
                    group.push(key);
                }
            }
        }
        if !group.is_empty() {
            out.push(group);
        }
    }
    out
}

/// Fallback annotator: whitespace tokenization with only `t` set.
pub fn plain_annotate(id: impl Into<String>, text: &str) -> AnnotatedDocument {
    AnnotatedDocument {
        id: id.into(),
        tokens: text.split_whitespace().map(AnnotatedToken::raw).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One JSON document per line.
    JsonLines,
    /// One raw-text document per line, annotated by [`plain_annotate`].
    PlainText,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" | "json-lines" => Ok(CorpusFormat::JsonLines),
            "text" | "plain" => Ok(CorpusFormat::PlainText),
            other => Err(Error::Config(format!("unknown corpus format '{other}'"))),
        }
    }
}

/// Streaming reader over a corpus; yields one document per non-blank line.
pub struct CorpusReader<R> {
    lines: std::io::Lines<R>,
    format: CorpusFormat,
    line_no: usize,
    failed: bool,
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, format: CorpusFormat) -> Self {
        CorpusReader {
            lines: reader.lines(),
            format,
            line_no: 0,
            failed: false,
        }
    }

    fn parse_line(&self, line: &str) -> Result<AnnotatedDocument> {
        match self.format {
            CorpusFormat::PlainText => Ok(plain_annotate(self.line_no.to_string(), line)),
            CorpusFormat::JsonLines => {
                let doc: AnnotatedDocument =
                    serde_json::from_str(line).map_err(|e| Error::Parse {
                        line: self.line_no,
                        message: e.to_string(),
                    })?;
                if let Some(pos) = doc.tokens.iter().position(|t| t.t.is_empty()) {
                    return Err(Error::Parse {
                        line: self.line_no,
                        message: format!("token {pos} has an empty raw text"),
                    });
                }
                Ok(doc)
            }
        }
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<AnnotatedDocument>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(Error::Parse {
                        line: self.line_no,
                        message: e.to_string(),
                    }));
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let res = self.parse_line(&line);
            if res.is_err() {
                self.failed = true;
            }
            return Some(res);
        }
    }
}

pub fn read_corpus(path: &Path, format: CorpusFormat) -> Result<CorpusReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(CorpusReader::new(BufReader::new(file), format))
}

/// Writes documents as JSON Lines in the same layout [`read_corpus`] accepts.
pub fn write_corpus<'a, W: Write>(
    mut out: W,
    docs: impl IntoIterator<Item = &'a AnnotatedDocument>,
) -> std::io::Result<()> {
    for doc in docs {
        writeln!(out, "{}", doc.to_json_line())?;
    }
    Ok(())
}
