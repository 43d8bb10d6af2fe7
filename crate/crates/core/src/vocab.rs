//! Frequency-sorted vocabularies whose size is a multiple of the shard
//! dimension used by co-occurrence sharding.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::corpus::{PositionGroup, VocabKey};
use crate::error::{Error, Result};

pub const DEFAULT_SHARD_DIM: usize = 4096;
pub const DEFAULT_MIN_COUNT: u64 = 5;

/// Occurrence counter over projected sequences. Partial counters merge by
/// addition, so any split of the corpus yields the same totals.
#[derive(Debug, Default, Clone)]
pub struct VocabCounter {
    counts: HashMap<VocabKey, u64>,
}

impl VocabCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sequence(&mut self, seq: &[PositionGroup]) {
        for key in seq.iter().flatten() {
            *self.counts.entry(key.clone()).or_insert(0) += 1;
        }
    }

    pub fn merge(mut self, other: VocabCounter) -> VocabCounter {
        let (mut big, small) = if self.counts.len() >= other.counts.len() {
            (std::mem::take(&mut self.counts), other.counts)
        } else {
            (other.counts, std::mem::take(&mut self.counts))
        };
        for (k, c) in small {
            *big.entry(k).or_insert(0) += c;
        }
        VocabCounter { counts: big }
    }

    pub fn build(self, min_count: u64, shard_dim: usize) -> Result<Vocabulary> {
        if shard_dim == 0 {
            return Err(Error::Config("shard_dim must be at least 1".into()));
        }
        let mut entries: Vec<(VocabKey, u64)> = self
            .counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .collect();
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.truncate(entries.len() / shard_dim * shard_dim);
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let (terms, counts) = entries.into_iter().unzip();
        Ok(Vocabulary::from_parts(terms, counts, shard_dim))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<VocabKey>,
    counts: Vec<u64>,
    index: HashMap<VocabKey, u32>,
    shard_dim: usize,
}

impl Vocabulary {
    fn from_parts(terms: Vec<VocabKey>, counts: Vec<u64>, shard_dim: usize) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            terms,
            counts,
            index,
            shard_dim,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn shard_dim(&self) -> usize {
        self.shard_dim
    }

    pub fn n_shards_per_side(&self) -> usize {
        self.terms.len() / self.shard_dim
    }

    pub fn terms(&self) -> &[VocabKey] {
        &self.terms
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (t, c) in self.terms.iter().zip(&self.counts) {
            out.push_str(t);
            out.push('\t');
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }

    /// Hex SHA-256 of the TSV serialization; identifies the id mapping.
    pub fn content_hash(&self) -> String {
        hex_digest(self.to_tsv().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_tsv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    /// Loads a `term<TAB>count` file. The shard dimension is not stored in
    /// the file and must be supplied.
    pub fn load(path: &Path, shard_dim: usize) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text, shard_dim)
    }

    pub fn parse_tsv(text: &str, shard_dim: usize) -> Result<Self> {
        let mut terms = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (term, count) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected term<TAB>count".into(),
            })?;
            let count: u64 = count.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad count '{count}'"),
            })?;
            if counts.last().is_some_and(|&prev| prev < count) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "counts must be non-increasing".into(),
                });
            }
            terms.push(term.to_owned());
            counts.push(count);
        }
        if terms.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        if shard_dim == 0 || terms.len() % shard_dim != 0 {
            return Err(Error::Alignment {
                len: terms.len(),
                shard_dim,
            });
        }
        Ok(Self::from_parts(terms, counts, shard_dim))
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Counts keys over a stream of projected sequences.
pub fn build_vocab<I, S>(corpus: I, min_count: u64, shard_dim: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[PositionGroup]>,
{
    let mut counter = VocabCounter::new();
    for seq in corpus {
        counter.add_sequence(seq.as_ref());
    }
    counter.build(min_count, shard_dim)
}

/// Parallel variant over an in-memory corpus; produces the same vocabulary
/// as [`build_vocab`] for any thread count.
pub fn build_vocab_par(
    corpus: &[Vec<PositionGroup>],
    min_count: u64,
    shard_dim: usize,
) -> Result<Vocabulary> {
    corpus
        .par_iter()
        .fold(VocabCounter::new, |mut c, seq| {
            c.add_sequence(seq);
            c
        })
        .reduce(VocabCounter::new, VocabCounter::merge)
        .build(min_count, shard_dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(words: &str) -> Vec<PositionGroup> {
        words.split_whitespace().map(|w| vec![w.to_owned()]).collect()
    }

    #[test]
    fn counts_and_orders_by_frequency() {
        let v = build_vocab([seq("a a a b b c")], 1, 1).unwrap();
        assert_eq!(v.terms(), ["a", "b", "c"]);
        assert_eq!(v.counts(), [3, 2, 1]);
        assert_eq!(v.id("b"), Some(1));
    }

    #[test]
    fn truncates_to_shard_multiple() {
        let v = build_vocab([seq("a a a b b c")], 1, 2).unwrap();
        assert_eq!(v.terms(), ["a", "b"]);
        assert_eq!(v.n_shards_per_side(), 1);
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = build_vocab([seq("z y x z y x w")], 1, 1).unwrap();
        assert_eq!(v.terms(), ["x", "y", "z", "w"]);
    }

    #[test]
    fn min_count_prunes() {
        let v = build_vocab([seq("a a a b b c")], 2, 1).unwrap();
        assert_eq!(v.terms(), ["a", "b"]);
        assert!(matches!(
            build_vocab([seq("a b")], 5, 1),
            Err(Error::EmptyVocabulary)
        ));
        assert!(matches!(
            build_vocab([seq("a")], 1, 2),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn large_sizes_are_shard_aligned() {
        // token and concept embedding counts reported for the full corpus
        assert_eq!(1_486_848 % DEFAULT_SHARD_DIM, 0);
        assert_eq!(1_486_848 / DEFAULT_SHARD_DIM, 363);
        assert_eq!(147_456 / DEFAULT_SHARD_DIM, 36);
        assert_eq!(147_456 % DEFAULT_SHARD_DIM, 0);
    }

    #[test]
    fn tsv_round_trip() {
        let v = build_vocab([seq("a a a b b c d")], 1, 2).unwrap();
        let back = Vocabulary::parse_tsv(&v.to_tsv(), 2).unwrap();
        assert_eq!(back, v);
        assert!(matches!(
            Vocabulary::parse_tsv(&v.to_tsv(), 3),
            Err(Error::Alignment { .. })
        ));
        assert!(Vocabulary::parse_tsv("a\t1\nb\t2\n", 1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn parallel_and_sequential_agree(
                docs in prop::collection::vec(prop::collection::vec(0u8..20, 0..40), 1..20),
                shard_dim in 1usize..4,
            ) {
                let corpus: Vec<Vec<PositionGroup>> = docs
                    .iter()
                    .map(|d| d.iter().map(|x| vec![format!("k{x}")]).collect())
                    .collect();
                let a = build_vocab(&corpus, 1, shard_dim);
                let b = build_vocab_par(&corpus, 1, shard_dim);
                match (a, b) {
                    (Ok(a), Ok(b)) => {
                        prop_assert_eq!(&a, &b);
                        for i in 1..a.len() {
                            let (c0, c1) = (a.counts()[i - 1], a.counts()[i]);
                            prop_assert!(c0 > c1 || (c0 == c1 && a.terms()[i - 1] < a.terms()[i]));
                        }
                        prop_assert_eq!(a.len() % shard_dim, 0);
                    }
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "sequential and parallel disagree"),
                }
            }
        }
    }
}
