//! Synthetic annotated corpora with planted synonym structure.
//!
//! Every concept has two synonym lemmas ("a" and "b" variants) tagged with
//! the same concept id. Each document is written in one register: it uses
//! only the matching synonym variant and the matching variant of its topical
//! context words. The two context families differ in lemma and surface form
//! but share concept ids, so synonyms share contexts only at the concept
//! level. Lemmas have several inflected surface forms, and articles and
//! punctuation are interleaved as noise.
#![allow(dead_code)]

use lingvec::corpus::{AnnotatedDocument, AnnotatedToken};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INFLECTIONS: [&str; 4] = ["", "s", "ed", "ing"];

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub tokens: usize,
    pub concepts: usize,
    pub topics: usize,
    pub context_per_topic: usize,
    pub general_words: usize,
    pub doc_units: usize,
    pub synonym_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            tokens: 100_000,
            concepts: 20,
            topics: 10,
            context_per_topic: 12,
            general_words: 40,
            doc_units: 40,
            synonym_rate: 0.3,
            seed: 7,
        }
    }
}

/// Lemma of synonym `variant` (0 or 1) of concept `k`.
pub fn synonym_lemma(k: usize, variant: usize) -> String {
    format!("syn{k}{}", ["a", "b"][variant])
}

pub fn context_lemma(topic: usize, i: usize, variant: usize) -> String {
    format!("ctx{topic}x{i}{}", ["a", "b"][variant])
}

pub fn general_lemma(i: usize) -> String {
    format!("gen{i}")
}

pub fn topic_of_concept(spec: &SynthSpec, k: usize) -> usize {
    k % spec.topics
}

fn unit(lemma: &str, infl: &str, g: &str, concept: Option<String>) -> AnnotatedToken {
    let surface = format!("{lemma}{infl}");
    AnnotatedToken::raw(surface.clone()).with(Some(&surface), Some(lemma), Some(g), concept.as_deref())
}

fn noise(rng: &mut ChaCha8Rng, out: &mut Vec<AnnotatedToken>) {
    if rng.random_bool(0.5) {
        let art = ["the", "a"].choose(rng).unwrap();
        out.push(AnnotatedToken::raw(*art).with(Some(art), Some(art), Some("ART"), None));
    }
    if rng.random_bool(0.15) {
        let p = [",", ".", ";"].choose(rng).unwrap();
        out.push(AnnotatedToken::raw(*p).with(Some(p), Some(p), Some("PNT"), None));
    }
}

/// One document on one topic. Returns the document and its topic.
pub fn document(spec: &SynthSpec, id: String, rng: &mut ChaCha8Rng) -> (AnnotatedDocument, usize) {
    let topic = rng.random_range(0..spec.topics);
    let register = rng.random_range(0..2);
    let own: Vec<usize> = (0..spec.concepts).filter(|&k| topic_of_concept(spec, k) == topic).collect();
    let mut tokens = Vec::new();
    for _ in 0..spec.doc_units {
        noise(rng, &mut tokens);
        let r: f64 = rng.random();
        let infl = *INFLECTIONS.choose(rng).unwrap();
        if r < spec.synonym_rate && !own.is_empty() {
            let k = *own.choose(rng).unwrap();
            tokens.push(unit(&synonym_lemma(k, register), infl, "NOU", Some(format!("en#{k}"))));
        } else if r < spec.synonym_rate + (1.0 - spec.synonym_rate) * 0.7 {
            let i = rng.random_range(0..spec.context_per_topic);
            let c = format!("en#{}", 1000 + topic * spec.context_per_topic + i);
            tokens.push(unit(&context_lemma(topic, i, register), &infl[..infl.len().min(1)], "VER", Some(c)));
        } else {
            let i = rng.random_range(0..spec.general_words);
            tokens.push(unit(&general_lemma(i), "", "ADJ", Some(format!("en#{}", 5000 + i))));
        }
    }
    (AnnotatedDocument { id, tokens }, topic)
}

/// Documents totalling at least `spec.tokens` raw tokens, with their topics.
pub fn corpus(spec: &SynthSpec) -> Vec<(AnnotatedDocument, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut docs = Vec::new();
    let mut n = 0;
    while n < spec.tokens {
        let (d, t) = document(spec, format!("doc{}", docs.len()), &mut rng);
        n += d.tokens.len();
        docs.push((d, t));
    }
    docs
}

/// Synonym pairs `(A, B)` as keys of the given prefix (`""` for tokens,
/// `"lem_"` for lemmas).
pub fn synonym_pairs(spec: &SynthSpec, prefix: &str) -> Vec<(String, String)> {
    (0..spec.concepts)
        .map(|k| (format!("{prefix}{}", synonym_lemma(k, 0)), format!("{prefix}{}", synonym_lemma(k, 1))))
        .collect()
}

/// Pairs of synonym lemmas from different concepts, drawn with a fixed seed.
pub fn random_pairs(spec: &SynthSpec, prefix: &str, n: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (k1, k2) = (rng.random_range(0..spec.concepts), rng.random_range(0..spec.concepts));
        if k1 == k2 {
            continue;
        }
        let (v1, v2) = (rng.random_range(0..2), rng.random_range(0..2));
        out.push((
            format!("{prefix}{}", synonym_lemma(k1, v1)),
            format!("{prefix}{}", synonym_lemma(k2, v2)),
        ));
    }
    out
}

pub struct Pipeline {
    pub kinds: lingvec::corpus::KindSet,
    pub filters: lingvec::corpus::FilterConfig,
    pub min_count: u64,
    pub shard_dim: usize,
    pub cooc: lingvec::cooc::CoocParams,
    pub train: lingvec::swivel::TrainConfig,
}

/// Filter, project, count and factorize in memory.
pub fn train_space(
    docs: &[AnnotatedDocument],
    p: &Pipeline,
) -> (lingvec::embedspace::EmbeddingSpace, lingvec::swivel::TrainOutcome) {
    use lingvec::corpus::{apply_filters, project};
    let seqs: Vec<Vec<Vec<String>>> = docs.iter().map(|d| project(&apply_filters(d, &p.filters), p.kinds)).collect();
    let vocab = lingvec::vocab::build_vocab(seqs.iter(), p.min_count, p.shard_dim).unwrap();
    let m = lingvec::cooc::count_cooc(seqs.iter(), &vocab, p.cooc).unwrap();
    let set = lingvec::cooc::shard_matrix(&m, &vocab).unwrap();
    let out = lingvec::swivel::train(&set, &vocab, &p.train).unwrap();
    (out.space.clone(), out)
}

pub fn mean_cosine(space: &lingvec::embedspace::EmbeddingSpace, pairs: &[(String, String)]) -> f64 {
    let vals: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| {
            let (va, vb) = (space.get(a).unwrap_or_else(|| panic!("{a} missing")), space.get(b).unwrap_or_else(|| panic!("{b} missing")));
            lingvec::embedspace::cosine(va, vb).unwrap().value
        })
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Multi-label categories for a topic: four base labels, with topics 4..10
/// carrying two of them.
pub fn labels_for(topic: usize) -> Vec<String> {
    let l: Vec<usize> = match topic {
        0..=3 => vec![topic],
        4..=7 => vec![topic - 4, (topic - 3) % 4],
        8 => vec![0, 2],
        _ => vec![1, 3],
    };
    l.iter().map(|x| format!("L{x}")).collect()
}

/// Writes the corpus as JSON Lines and its labels as TSV.
pub fn write_corpus_files(docs: &[(AnnotatedDocument, usize)], corpus: &std::path::Path, labels: &std::path::Path) {
    let mut c = String::new();
    let mut l = String::new();
    for (d, t) in docs {
        c.push_str(&d.to_json_line());
        c.push('\n');
        l.push_str(&format!("{}\t{}\n", d.id, labels_for(*t).join(",")));
    }
    std::fs::write(corpus, c).unwrap();
    std::fs::write(labels, l).unwrap();
}
