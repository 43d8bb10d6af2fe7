//! Embedding spaces: lookup, cosine similarity, merging and persistence.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::corpus::VocabKey;
use crate::error::{Error, Result};
use crate::svd::{center_columns, randomized_svd, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpaceMeta {
    /// Annotation combination the space covers, e.g. `l_c`.
    pub kinds: String,
    pub source: String,
    pub config_hash: String,
}

/// An immutable map from keys to equal-length `f32` vectors. Keys keep the
/// order they were inserted in (frequency order for trained spaces).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    dim: usize,
    keys: Vec<VocabKey>,
    data: Vec<f32>,
    index: HashMap<VocabKey, usize>,
    pub meta: SpaceMeta,
}

impl EmbeddingSpace {
    pub fn new(dim: usize, keys: Vec<VocabKey>, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        if data.len() != keys.len() * dim {
            return Err(Error::Dimension {
                expected: keys.len() * dim,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        let mut index = HashMap::with_capacity(keys.len());
        for (i, k) in keys.iter().enumerate() {
            if index.insert(k.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate key '{k}'")));
            }
        }
        Ok(EmbeddingSpace {
            dim,
            keys,
            data,
            index,
            meta: SpaceMeta::default(),
        })
    }

    pub fn from_rows<I, K>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, Vec<f32>)>,
        K: Into<VocabKey>,
    {
        let mut keys = Vec::new();
        let mut data = Vec::new();
        for (k, v) in rows {
            if v.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: v.len(),
                });
            }
            keys.push(k.into());
            data.extend(v);
        }
        Self::new(dim, keys, data)
    }

    pub fn with_meta(mut self, meta: SpaceMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[VocabKey] {
        &self.keys
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.index_of(key).map(|i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.keys
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(k, v)| (k.as_str(), v))
    }

    /// Multiplies every vector by `factor`.
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        let data = self.data.iter().map(|x| x * factor).collect();
        Ok(Self::new(self.dim, self.keys.clone(), data)?.with_meta(self.meta.clone()))
    }

    /// Keeps only the keys accepted by `keep`, preserving order.
    pub fn filter_keys(&self, mut keep: impl FnMut(&str) -> bool) -> Self {
        let mut keys = Vec::new();
        let mut data = Vec::new();
        for (k, v) in self.iter() {
            if keep(k) {
                keys.push(k.to_owned());
                data.extend_from_slice(v);
            }
        }
        Self::new(self.dim, keys, data)
            .expect("subset of a valid space is valid")
            .with_meta(self.meta.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine {
    pub value: f64,
    /// One of the vectors had zero norm; `value` is then 0.
    pub zero_vector: bool,
}

pub fn cosine<A, B>(a: &[A], b: &[B]) -> Result<Cosine>
where
    A: Copy + Into<f64>,
    B: Copy + Into<f64>,
{
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x.into(), y.into());
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(Cosine {
            value: 0.0,
            zero_vector: true,
        });
    }
    Ok(Cosine {
        value: (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0),
        zero_vector: false,
    })
}

/// Cosine for vectors already known to have equal length; zero vectors give 0.
pub(crate) fn cosine_value<A, B>(a: &[A], b: &[B]) -> f64
where
    A: Copy + Into<f64>,
    B: Copy + Into<f64>,
{
    cosine(a, b).map(|c| c.value).unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MergeOp {
    Average,
    Add,
    Concat,
    /// Concatenate, mean-center, and project onto the top principal axes.
    SvdReduce { target_dim: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub space: EmbeddingSpace,
    /// Keys present in some input but not in all of them.
    pub dropped_keys: usize,
}

/// Merges spaces over the intersection of their key sets. Result keys follow
/// the order of the first space.
pub fn merge(spaces: &[&EmbeddingSpace], op: MergeOp) -> Result<MergeOutcome> {
    let first = *spaces
        .first()
        .ok_or_else(|| Error::Merge("no spaces to merge".into()))?;
    if matches!(op, MergeOp::Average | MergeOp::Add) {
        if let Some(bad) = spaces.iter().find(|s| s.dim() != first.dim()) {
            return Err(Error::Dimension {
                expected: first.dim(),
                got: bad.dim(),
            });
        }
    }
    let shared: Vec<&str> = first
        .keys()
        .iter()
        .map(String::as_str)
        .filter(|k| spaces[1..].iter().all(|s| s.contains(k)))
        .collect();
    let union: HashSet<&str> = spaces
        .iter()
        .flat_map(|s| s.keys().iter().map(String::as_str))
        .collect();
    let dropped_keys = union.len() - shared.len();
    if shared.is_empty() {
        return Err(Error::Merge("input spaces share no keys".into()));
    }
    let keys: Vec<VocabKey> = shared.iter().map(|k| k.to_string()).collect();

    let space = match op {
        MergeOp::Average | MergeOp::Add => {
            let dim = first.dim();
            let scale = match op {
                MergeOp::Average => 1.0 / spaces.len() as f64,
                _ => 1.0,
            };
            let mut data = Vec::with_capacity(keys.len() * dim);
            for k in &shared {
                for c in 0..dim {
                    let sum: f64 = spaces.iter().map(|s| s.get(k).unwrap()[c] as f64).sum();
                    data.push((sum * scale) as f32);
                }
            }
            EmbeddingSpace::new(dim, keys, data)?
        }
        MergeOp::Concat => {
            let dim = spaces.iter().map(|s| s.dim()).sum();
            let mut data = Vec::with_capacity(keys.len() * dim);
            for k in &shared {
                for s in spaces {
                    data.extend_from_slice(s.get(k).unwrap());
                }
            }
            EmbeddingSpace::new(dim, keys, data)?
        }
        MergeOp::SvdReduce { target_dim, seed } => {
            let concat_dim: usize = spaces.iter().map(|s| s.dim()).sum();
            if target_dim == 0 || target_dim > concat_dim {
                return Err(Error::Dimension {
                    expected: concat_dim,
                    got: target_dim,
                });
            }
            let mut a = DMatrix::zeros(shared.len(), concat_dim);
            for (r, k) in shared.iter().enumerate() {
                let mut c = 0;
                for s in spaces {
                    for &x in s.get(k).unwrap() {
                        a[(r, c)] = x as f64;
                        c += 1;
                    }
                }
            }
            let projected = svd_project(a, target_dim, seed)?.1;
            let data = (0..projected.nrows())
                .flat_map(|r| (0..target_dim).map(move |c| (r, c)))
                .map(|(r, c)| projected[(r, c)] as f32)
                .collect();
            EmbeddingSpace::new(target_dim, keys, data)?
        }
    };
    Ok(MergeOutcome {
        space,
        dropped_keys,
    })
}

/// Mean-centers `a` and projects it onto its top `k` principal axes.
/// Returns `(components, projected rows)`.
pub fn svd_project(mut a: DMatrix<f64>, k: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    center_columns(&mut a);
    let svd = randomized_svd(&a, k, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS, seed)?;
    let projected = svd.project(&a);
    Ok((svd.components, projected))
}

fn format_sig6(x: f32) -> String {
    let rounded: f32 = format!("{x:.5e}").parse().expect("formatted float parses");
    let mag = rounded.abs();
    if rounded == 0.0 || (1e-4..1e7).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

impl EmbeddingSpace {
    /// Text layout: `<count> <dim>` header, then `<key> <v1> ... <vn>` per row,
    /// values at six significant digits.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (k, v) in self.iter() {
            w.write_all(k.as_bytes())?;
            for x in v {
                w.write_all(b" ")?;
                w.write_all(format_sig6(*x).as_bytes())?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?;
        let header = header.map_err(|e| parse_err(1, e.to_string()))?;
        let mut parts = header.split_whitespace();
        let count: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(1, "bad count in header".into()))?;
        let dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(1, "bad dimension in header".into()))?;
        if parts.next().is_some() {
            return Err(parse_err(1, "header must be '<count> <dim>'".into()));
        }
        let mut keys = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_ascii_whitespace();
            let key = fields.next().expect("non-blank line has a field");
            let before = data.len();
            for f in fields {
                let x: f32 = f
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad value '{f}'")))?;
                data.push(x);
            }
            if data.len() - before != dim {
                return Err(parse_err(
                    line_no,
                    format!("expected {dim} values, found {}", data.len() - before),
                ));
            }
            keys.push(key.to_owned());
        }
        if keys.len() != count {
            return Err(parse_err(
                keys.len() + 1,
                format!("header declares {count} rows, found {}", keys.len()),
            ));
        }
        Self::new(dim, keys, data)
    }

    /// Binary layout, little-endian: `count: u64`, `dim: u32`, then per row a
    /// `u32` byte length, the UTF-8 key, and `dim` `f32` values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for (k, v) in self.iter() {
            w.write_all(&(k.len() as u32).to_le_bytes())?;
            w.write_all(k.as_bytes())?;
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let slice = bytes.get(pos..pos + n).ok_or(Error::ParseOffset {
                offset: pos as u64,
                message: "unexpected end of data".into(),
            })?;
            pos += n;
            Ok(slice)
        };
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut keys = Vec::with_capacity(count.min(1 << 20));
        let mut data = Vec::with_capacity(count.min(1 << 20) * dim);
        for _ in 0..count {
            let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let raw = take(len)?;
            let key = std::str::from_utf8(raw).map_err(|e| Error::ParseOffset {
                offset: e.valid_up_to() as u64,
                message: "key is not valid UTF-8".into(),
            })?;
            keys.push(key.to_owned());
            for _ in 0..dim {
                data.push(f32::from_le_bytes(take(4)?.try_into().unwrap()));
            }
        }
        if pos != bytes.len() {
            return Err(Error::ParseOffset {
                offset: pos as u64,
                message: "trailing bytes after last row".into(),
            });
        }
        Self::new(dim, keys, data)
    }

    /// Saves in the format implied by the extension: `.bin` is binary,
    /// anything else is text.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let res = if is_binary_path(path) {
            self.write_binary(&mut w)
        } else {
            self.write_text(&mut w)
        };
        res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if is_binary_path(path) {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            Self::read_binary(&bytes)
        } else {
            let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            Self::read_text(BufReader::new(f))
        }
    }
}

fn is_binary_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}
