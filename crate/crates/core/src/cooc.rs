//! Windowed co-occurrence counting between projected keys and square
//! sharding of the resulting symmetric matrix.
//!
//! Counting keeps integer tallies per (pair, distance) and only converts to
//! weighted mass when the matrix is finalized. Partial counts therefore merge
//! exactly, and the result is bit-identical for any document order or
//! degree of parallelism.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::PositionGroup;
use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// 1/d for a pair at distance d.
    Harmonic,
    Uniform,
}

impl Weighting {
    pub fn weight(self, distance: usize) -> f64 {
        match self {
            Weighting::Harmonic if distance > 0 => 1.0 / distance as f64,
            _ => 1.0,
        }
    }
}

impl FromStr for Weighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" => Ok(Weighting::Harmonic),
            "uniform" => Ok(Weighting::Uniform),
            o => Err(Error::Config(format!("unknown weighting '{o}'"))),
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Harmonic => "harmonic",
            Weighting::Uniform => "uniform",
        })
    }
}

/// Whether distinct keys sharing a position (e.g. a surface form and its
/// concept) co-occur with each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamePositionPolicy {
    Exclude,
    /// Weight 1 per co-located pair.
    Include,
}

impl FromStr for SamePositionPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exclude" => Ok(SamePositionPolicy::Exclude),
            "include" => Ok(SamePositionPolicy::Include),
            o => Err(Error::Config(format!("unknown same-position policy '{o}'"))),
        }
    }
}

impl fmt::Display for SamePositionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamePositionPolicy::Exclude => "exclude",
            SamePositionPolicy::Include => "include",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoocParams {
    pub window: usize,
    pub weighting: Weighting,
    pub same_position: SamePositionPolicy,
}

impl Default for CoocParams {
    fn default() -> Self {
        CoocParams {
            window: 3,
            weighting: Weighting::Harmonic,
            same_position: SamePositionPolicy::Exclude,
        }
    }
}

impl CoocParams {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Integer pair tallies, one map per distance (index 0 is same-position).
/// Keys are stored with `i <= j`; a diagonal hit counts twice because both
/// ordered pairs land on the same cell.
#[derive(Debug, Clone)]
pub struct CoocCounter {
    params: CoocParams,
    by_distance: Vec<HashMap<(u32, u32), u64>>,
}

impl CoocCounter {
    pub fn new(params: CoocParams) -> Self {
        CoocCounter {
            params,
            by_distance: vec![HashMap::new(); params.window + 1],
        }
    }

    fn record(&mut self, a: u32, b: u32, distance: usize) {
        let (key, inc) = if a == b {
            ((a, a), 2)
        } else {
            ((a.min(b), a.max(b)), 1)
        };
        *self.by_distance[distance].entry(key).or_insert(0) += inc;
    }

    pub fn add_sequence(&mut self, seq: &[PositionGroup], vocab: &Vocabulary) {
        let ids: Vec<Vec<u32>> = seq
            .iter()
            .map(|g| g.iter().filter_map(|k| vocab.id(k)).collect())
            .collect();
        let window = self.params.window;
        for p in 0..ids.len() {
            if self.params.same_position == SamePositionPolicy::Include {
                let here = &ids[p];
                for x in 0..here.len() {
                    for y in x + 1..here.len() {
                        self.record(here[x], here[y], 0);
                    }
                }
            }
            for d in 1..=window {
                let q = p + d;
                if q >= ids.len() {
                    break;
                }
                for &a in &ids[p] {
                    for &b in &ids[q] {
                        self.record(a, b, d);
                    }
                }
            }
        }
    }

    pub fn merge(mut self, other: CoocCounter) -> CoocCounter {
        for (mine, theirs) in self.by_distance.iter_mut().zip(other.by_distance) {
            for (k, c) in theirs {
                *mine.entry(k).or_insert(0) += c;
            }
        }
        self
    }

    pub fn finish(self, vocab_size: usize) -> CoocMatrix {
        let mut tallies: BTreeMap<(u32, u32), Vec<u64>> = BTreeMap::new();
        let n_dist = self.by_distance.len();
        for (d, map) in self.by_distance.into_iter().enumerate() {
            for (k, c) in map {
                tallies.entry(k).or_insert_with(|| vec![0; n_dist])[d] = c;
            }
        }
        let weighting = self.params.weighting;
        let cells = tallies
            .into_iter()
            .map(|(k, per_d)| {
                let mass = per_d
                    .iter()
                    .enumerate()
                    .map(|(d, &c)| c as f64 * weighting.weight(d))
                    .sum::<f64>();
                (k, mass)
            })
            .filter(|(_, m)| *m > 0.0)
            .collect();
        CoocMatrix::from_cells(vocab_size, cells, self.params)
    }
}

/// Symmetric weighted co-occurrence matrix, stored as the upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct CoocMatrix {
    size: usize,
    cells: BTreeMap<(u32, u32), f64>,
    row_marginals: Vec<f64>,
    total: f64,
    params: CoocParams,
}

impl CoocMatrix {
    pub fn from_cells(size: usize, cells: BTreeMap<(u32, u32), f64>, params: CoocParams) -> Self {
        let mut row_marginals = vec![0.0; size];
        for (&(i, j), &f) in &cells {
            debug_assert!(i <= j);
            row_marginals[i as usize] += f;
            if i != j {
                row_marginals[j as usize] += f;
            }
        }
        let total = row_marginals.iter().sum();
        CoocMatrix {
            size,
            cells,
            row_marginals,
            total,
            params,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn params(&self) -> CoocParams {
        self.params
    }

    pub fn get(&self, i: u32, j: u32) -> f64 {
        let key = (i.min(j), i.max(j));
        self.cells.get(&key).copied().unwrap_or(0.0)
    }

    /// Upper-triangle cells `(i, j, f_ij)` with `i <= j`.
    pub fn upper_cells(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.cells.iter().map(|(&(i, j), &f)| (i, j, f))
    }

    pub fn nnz_upper(&self) -> usize {
        self.cells.len()
    }

    pub fn row_marginals(&self) -> &[f64] {
        &self.row_marginals
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

pub fn count_cooc<I, S>(corpus: I, vocab: &Vocabulary, params: CoocParams) -> Result<CoocMatrix>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[PositionGroup]>,
{
    params.validate()?;
    let mut counter = CoocCounter::new(params);
    for seq in corpus {
        counter.add_sequence(seq.as_ref(), vocab);
    }
    Ok(counter.finish(vocab.len()))
}

/// Parallel counting over documents; identical output to [`count_cooc`].
pub fn count_cooc_par(
    corpus: &[Vec<PositionGroup>],
    vocab: &Vocabulary,
    params: CoocParams,
) -> Result<CoocMatrix> {
    params.validate()?;
    let counter = corpus
        .par_iter()
        .fold(
            || CoocCounter::new(params),
            |mut c, seq| {
                c.add_sequence(seq, vocab);
                c
            },
        )
        .reduce(|| CoocCounter::new(params), CoocCounter::merge);
    Ok(counter.finish(vocab.len()))
}

/// One square block of the full (mirrored) matrix, in local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoocShard {
    pub row_block: u32,
    pub col_block: u32,
    pub shard_dim: u32,
    /// `(local_i, local_j, f)` sorted by `(local_i, local_j)`.
    pub entries: Vec<(u32, u32, f64)>,
}

impl CoocShard {
    pub fn row_offset(&self) -> usize {
        self.row_block as usize * self.shard_dim as usize
    }

    pub fn col_offset(&self) -> usize {
        self.col_block as usize * self.shard_dim as usize
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.entries.len() * 16);
        out.extend_from_slice(&self.row_block.to_le_bytes());
        out.extend_from_slice(&self.col_block.to_le_bytes());
        out.extend_from_slice(&self.shard_dim.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for &(i, j, f) in &self.entries {
            out.extend_from_slice(&i.to_le_bytes());
            out.extend_from_slice(&j.to_le_bytes());
            out.extend_from_slice(&f.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        let row_block = r.u32()?;
        let col_block = r.u32()?;
        let shard_dim = r.u32()?;
        let nnz = r.u64()?;
        let mut entries = Vec::with_capacity(nnz.min(1 << 24) as usize);
        for _ in 0..nnz {
            let i = r.u32()?;
            let j = r.u32()?;
            let f = r.f64()?;
            if i >= shard_dim || j >= shard_dim {
                return Err(Error::ParseOffset {
                    offset: r.pos as u64,
                    message: format!("local index ({i}, {j}) outside shard of size {shard_dim}"),
                });
            }
            entries.push((i, j, f));
        }
        if r.pos != bytes.len() {
            return Err(Error::ParseOffset {
                offset: r.pos as u64,
                message: "trailing bytes after shard entries".into(),
            });
        }
        Ok(CoocShard {
            row_block,
            col_block,
            shard_dim,
            entries,
        })
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl ByteReader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self.bytes.get(self.pos..end).ok_or(Error::ParseOffset {
            offset: self.pos as u64,
            message: "unexpected end of data".into(),
        })?;
        self.pos = end;
        Ok(slice.try_into().expect("slice length checked"))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

/// A full tiling of the matrix plus the marginals the PMI needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ShardSet {
    pub shard_dim: usize,
    pub blocks_per_side: usize,
    /// Row-major: shard `(r, c)` is at `r * blocks_per_side + c`.
    pub shards: Vec<CoocShard>,
    pub row_marginals: Vec<f64>,
    pub total: f64,
    pub params: CoocParams,
}

impl ShardSet {
    pub fn shard(&self, row_block: usize, col_block: usize) -> &CoocShard {
        &self.shards[row_block * self.blocks_per_side + col_block]
    }

    pub fn vocab_size(&self) -> usize {
        self.shard_dim * self.blocks_per_side
    }

    /// Rebuilds the co-occurrence matrix from its shards.
    pub fn to_matrix(&self) -> CoocMatrix {
        let mut cells = BTreeMap::new();
        for s in &self.shards {
            for &(li, lj, f) in &s.entries {
                let i = (s.row_offset() + li as usize) as u32;
                let j = (s.col_offset() + lj as usize) as u32;
                if i <= j {
                    cells.insert((i, j), f);
                }
            }
        }
        CoocMatrix::from_cells(self.vocab_size(), cells, self.params)
    }
}

pub fn shard_matrix(m: &CoocMatrix, vocab: &Vocabulary) -> Result<ShardSet> {
    let dim = vocab.shard_dim();
    if dim == 0 || !vocab.len().is_multiple_of(dim) {
        return Err(Error::Alignment {
            len: vocab.len(),
            shard_dim: dim,
        });
    }
    if m.size() != vocab.len() {
        return Err(Error::Dimension {
            expected: vocab.len(),
            got: m.size(),
        });
    }
    let blocks = vocab.len() / dim;
    let mut shards: Vec<CoocShard> = (0..blocks * blocks)
        .map(|k| CoocShard {
            row_block: (k / blocks) as u32,
            col_block: (k % blocks) as u32,
            shard_dim: dim as u32,
            entries: Vec::new(),
        })
        .collect();
    let mut place = |i: u32, j: u32, f: f64| {
        let (i, j) = (i as usize, j as usize);
        let k = (i / dim) * blocks + j / dim;
        shards[k].entries.push(((i % dim) as u32, (j % dim) as u32, f));
    };
    for (i, j, f) in m.upper_cells() {
        place(i, j, f);
        if i != j {
            place(j, i, f);
        }
    }
    for s in &mut shards {
        s.entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
    }
    Ok(ShardSet {
        shard_dim: dim,
        blocks_per_side: blocks,
        shards,
        row_marginals: m.row_marginals().to_vec(),
        total: m.total(),
        params: m.params(),
    })
}

fn shard_file_name(r: u32, c: u32) -> String {
    format!("shard-{r:04}-{c:04}.bin")
}

/// Writes each shard as its own binary file, the marginals as
/// `marginals.bin`, and a text `manifest.txt` tying them together.
pub fn write_shards(
    dir: &Path,
    set: &ShardSet,
    vocab_hash: &str,
    config_hash: &str,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    manifest.push_str(&format!("window {}\n", set.params.window));
    manifest.push_str(&format!("weighting {}\n", set.params.weighting));
    manifest.push_str(&format!("same_position {}\n", set.params.same_position));
    manifest.push_str(&format!("shard_dim {}\n", set.shard_dim));
    manifest.push_str(&format!("blocks_per_side {}\n", set.blocks_per_side));
    manifest.push_str(&format!("vocab_hash {vocab_hash}\n"));
    manifest.push_str(&format!("config_hash {config_hash}\n"));
    manifest.push_str("marginals marginals.bin\n");

    let mpath = dir.join("marginals.bin");
    let mut buf = Vec::with_capacity(8 + set.row_marginals.len() * 8);
    buf.extend_from_slice(&(set.row_marginals.len() as u64).to_le_bytes());
    for m in &set.row_marginals {
        buf.extend_from_slice(&m.to_le_bytes());
    }
    fs::write(&mpath, buf).map_err(|e| Error::io(&mpath, e))?;

    for s in &set.shards {
        let name = shard_file_name(s.row_block, s.col_block);
        let path = dir.join(&name);
        let mut w = BufWriter::new(fs::File::create(&path).map_err(|e| Error::io(&path, e))?);
        w.write_all(&s.to_bytes()).map_err(|e| Error::io(&path, e))?;
        manifest.push_str(&format!("shard {} {} {name}\n", s.row_block, s.col_block));
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct ShardManifest {
    pub vocab_hash: String,
    pub config_hash: String,
}

pub fn read_shards(dir: &Path) -> Result<(ShardSet, ShardManifest)> {
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut fields: HashMap<&str, &str> = HashMap::new();
    let mut shard_files = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let (key, rest) = line.split_once(' ').ok_or_else(|| Error::Parse {
            line: n + 1,
            message: "expected '<key> <value>'".into(),
        })?;
        if key == "shard" {
            let name = rest.rsplit(' ').next().unwrap_or(rest);
            shard_files.push(name.to_owned());
        } else {
            fields.insert(key, rest);
        }
    }
    let field = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::Config(format!("manifest missing '{k}'")))
    };
    let num = |k: &str| -> Result<usize> {
        field(k)?
            .parse()
            .map_err(|_| Error::Config(format!("manifest field '{k}' is not a number")))
    };
    let params = CoocParams {
        window: num("window")?,
        weighting: field("weighting")?.parse()?,
        same_position: field("same_position")?.parse()?,
    };
    let shard_dim = num("shard_dim")?;
    let blocks = num("blocks_per_side")?;

    let mpath = dir.join(field("marginals")?);
    let mut bytes = Vec::new();
    fs::File::open(&mpath)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(&mpath, e))?;
    let mut r = ByteReader {
        bytes: &bytes,
        pos: 0,
    };
    let n = r.u64()? as usize;
    let row_marginals = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if n != shard_dim * blocks {
        return Err(Error::Alignment {
            len: n,
            shard_dim,
        });
    }

    let mut shards = Vec::with_capacity(shard_files.len());
    for name in &shard_files {
        let p = dir.join(name);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        shards.push(CoocShard::from_bytes(&bytes)?);
    }
    shards.sort_by_key(|s| (s.row_block, s.col_block));
    if shards.len() != blocks * blocks {
        return Err(Error::Config(format!(
            "expected {} shards, manifest lists {}",
            blocks * blocks,
            shards.len()
        )));
    }
    let total = row_marginals.iter().sum();
    Ok((
        ShardSet {
            shard_dim,
            blocks_per_side: blocks,
            shards,
            row_marginals,
            total,
            params,
        },
        ShardManifest {
            vocab_hash: field("vocab_hash")?.to_owned(),
            config_hash: field("config_hash")?.to_owned(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::build_vocab;

    fn seq(words: &str) -> Vec<PositionGroup> {
        words.split_whitespace().map(|w| vec![w.to_owned()]).collect()
    }

    fn params(window: usize, weighting: Weighting) -> CoocParams {
        CoocParams {
            window,
            weighting,
            same_position: SamePositionPolicy::Exclude,
        }
    }

    fn f(m: &CoocMatrix, v: &Vocabulary, a: &str, b: &str) -> f64 {
        m.get(v.id(a).unwrap(), v.id(b).unwrap())
    }

    #[test]
    fn uniform_window_one() {
        let corpus = [seq("a b a")];
        let v = build_vocab(&corpus, 1, 1).unwrap();
        let m = count_cooc(&corpus, &v, params(1, Weighting::Uniform)).unwrap();
        assert_eq!(f(&m, &v, "a", "b"), 2.0);
        assert_eq!(f(&m, &v, "b", "a"), 2.0);
        assert_eq!(f(&m, &v, "a", "a"), 0.0);
        assert_eq!(m.total(), 4.0);
    }

    #[test]
    fn harmonic_weights() {
        let corpus = [seq("a b")];
        let v = build_vocab(&corpus, 1, 1).unwrap();
        let m = count_cooc(&corpus, &v, params(2, Weighting::Harmonic)).unwrap();
        assert_eq!(f(&m, &v, "a", "b"), 1.0);

        let corpus = [seq("a b c")];
        let v = build_vocab(&corpus, 1, 1).unwrap();
        let m = count_cooc(&corpus, &v, params(2, Weighting::Harmonic)).unwrap();
        assert_eq!(f(&m, &v, "a", "b"), 1.0);
        assert_eq!(f(&m, &v, "b", "c"), 1.0);
        assert_eq!(f(&m, &v, "a", "c"), 0.5);
    }

    #[test]
    fn same_position_policy() {
        let corpus = vec![vec![
            vec!["x".to_owned(), "lem_x".to_owned()],
            vec!["y".to_owned()],
        ]];
        let v = build_vocab(&corpus, 1, 1).unwrap();
        let mut p = params(1, Weighting::Harmonic);
        let m = count_cooc(&corpus, &v, p).unwrap();
        assert_eq!(f(&m, &v, "x", "lem_x"), 0.0);
        assert_eq!(f(&m, &v, "x", "y"), 1.0);
        p.same_position = SamePositionPolicy::Include;
        let m = count_cooc(&corpus, &v, p).unwrap();
        assert_eq!(f(&m, &v, "x", "lem_x"), 1.0);
        assert_eq!(f(&m, &v, "lem_x", "y"), 1.0);
    }

    #[test]
    fn out_of_vocab_keys_keep_their_position() {
        let corpus = [seq("a a a b z b")];
        let v = build_vocab(&corpus, 2, 1).unwrap();
        assert!(v.id("z").is_none());
        let m = count_cooc(&corpus, &v, params(1, Weighting::Uniform)).unwrap();
        // b _ b: not adjacent once z is only ignored, not removed
        assert_eq!(f(&m, &v, "b", "b"), 0.0);
    }

    #[test]
    fn zero_window_rejected() {
        let corpus = [seq("a b")];
        let v = build_vocab(&corpus, 1, 1).unwrap();
        assert!(count_cooc(&corpus, &v, params(0, Weighting::Uniform)).is_err());
    }

    fn eight_term_fixture() -> (Vocabulary, CoocMatrix) {
        let corpus = [seq("a b c d e f g h a c e g b d f h a h b g c f d e")];
        let v = crate::vocab::VocabCounter::new();
        let mut v = v;
        for s in &corpus {
            v.add_sequence(s);
        }
        let v = v.build(1, 4).unwrap();
        let m = count_cooc(&corpus, &v, params(2, Weighting::Harmonic)).unwrap();
        (v, m)
    }

    #[test]
    fn shards_tile_and_reassemble() {
        let (v, m) = eight_term_fixture();
        assert_eq!(v.len(), 8);
        let set = shard_matrix(&m, &v).unwrap();
        assert_eq!(set.shards.len(), 4);
        assert_eq!(set.to_matrix(), m);

        let s10 = set.shard(1, 0);
        assert_eq!((s10.row_block, s10.col_block), (1, 0));
        let mut expected = Vec::new();
        for i in 4..8u32 {
            for j in 0..4u32 {
                let f = m.get(i, j);
                if f > 0.0 {
                    expected.push((i - 4, j, f));
                }
            }
        }
        assert_eq!(s10.entries, expected);
    }

    #[test]
    fn misaligned_vocab_rejected() {
        let corpus = [seq("a b c")];
        let v = build_vocab(&corpus, 1, 1).unwrap();
        let m = count_cooc(&corpus, &v, params(1, Weighting::Uniform)).unwrap();
        let bad = Vocabulary::parse_tsv(&v.to_tsv(), 1).unwrap();
        assert!(shard_matrix(&m, &bad).is_ok());
        assert!(matches!(
            Vocabulary::parse_tsv(&v.to_tsv(), 2),
            Err(Error::Alignment { .. })
        ));
    }

    #[test]
    fn shard_bytes_round_trip_and_reject_truncation() {
        let (v, m) = eight_term_fixture();
        let set = shard_matrix(&m, &v).unwrap();
        let s = set.shard(0, 1);
        let bytes = s.to_bytes();
        assert_eq!(&CoocShard::from_bytes(&bytes).unwrap(), s);
        assert!(matches!(
            CoocShard::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::ParseOffset { .. })
        ));
    }

    #[test]
    fn shard_directory_round_trip() {
        let (v, m) = eight_term_fixture();
        let set = shard_matrix(&m, &v).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_shards(dir.path(), &set, &v.content_hash(), "cfg").unwrap();
        let (back, manifest) = read_shards(dir.path()).unwrap();
        assert_eq!(back, set);
        assert_eq!(manifest.vocab_hash, v.content_hash());
    }

    #[test]
    fn symmetric_total_identity() {
        let (_, m) = eight_term_fixture();
        let off: f64 = m.upper_cells().filter(|c| c.0 < c.1).map(|c| c.2).sum();
        let diag: f64 = m.upper_cells().filter(|c| c.0 == c.1).map(|c| c.2).sum();
        assert!((m.total() - (2.0 * off + diag)).abs() < 1e-12);
    }
}
