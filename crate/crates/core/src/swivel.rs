//! PMI targets and shard-wise factorization so that `<u_i, v_j>` predicts
//! the PMI of terms `i` and `j`.
//!
//! Observed cells (`f_ij > 0`) are fit by confidence-weighted least squares
//! against their PMI. Unobserved cells only get a soft hinge pushing the dot
//! product below the PMI the pair would have with a single co-occurrence.
//! Parameters are updated with Adagrad, one shard at a time.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cooc::ShardSet;
use crate::embedspace::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

const ADAGRAD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmiParams {
    /// Count substituted for `f_ij` on unobserved cells.
    pub smoothing: f64,
    /// Optional lower clamp applied to the PMI of observed cells.
    pub clamp_min: Option<f64>,
}

impl Default for PmiParams {
    fn default() -> Self {
        PmiParams {
            smoothing: 1.0,
            clamp_min: None,
        }
    }
}

impl PmiParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing > 0.0) {
            return Err(Error::Config("PMI smoothing must be positive".into()));
        }
        Ok(())
    }
}

/// `ln(f_ij F / (f_i f_j))`, or the smoothed surrogate when `f_ij = 0`.
pub fn pmi(f_ij: f64, f_i: f64, f_j: f64, total: f64, params: &PmiParams) -> Result<f64> {
    if !(f_i > 0.0 && f_j > 0.0 && total > 0.0) {
        return Err(Error::Domain(format!(
            "PMI needs positive marginals and total (f_i={f_i}, f_j={f_j}, F={total})"
        )));
    }
    if f_ij < 0.0 {
        return Err(Error::Domain(format!("negative co-occurrence count {f_ij}")));
    }
    if f_ij == 0.0 {
        return Ok((params.smoothing * total / (f_i * f_j)).ln());
    }
    let value = (f_ij * total / (f_i * f_j)).ln();
    Ok(match params.clamp_min {
        Some(lo) => value.max(lo),
        None => value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    /// `(u + v) / 2`
    Average,
    Sum,
    FocalOnly,
}

impl FromStr for Combine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Combine::Average),
            "sum" => Ok(Combine::Sum),
            "focal" | "focal_only" => Ok(Combine::FocalOnly),
            o => Err(Error::Config(format!("unknown combine mode '{o}'"))),
        }
    }
}

impl fmt::Display for Combine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Combine::Average => "average",
            Combine::Sum => "sum",
            Combine::FocalOnly => "focal_only",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    RoundRobin,
    /// Uniformly random shard per step, drawn from the training seed.
    Random,
}

impl FromStr for Schedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round_robin" | "round-robin" => Ok(Schedule::RoundRobin),
            "random" => Ok(Schedule::Random),
            o => Err(Error::Config(format!("unknown shard schedule '{o}'"))),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::RoundRobin => "round_robin",
            Schedule::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    /// One shard at a time in schedule order.
    Deterministic,
    /// Rounds of shards with pairwise disjoint row and column blocks,
    /// updated concurrently.
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub confidence_exponent: f64,
    pub confidence_scale: f64,
    pub seed: u64,
    /// Half-width of the uniform initialization; `None` means `0.1 / sqrt(dim)`.
    pub init_scale: Option<f64>,
    pub combine: Combine,
    pub schedule: Schedule,
    pub mode: ExecutionMode,
    pub pmi: PmiParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 300,
            steps: 10_000,
            learning_rate: 0.1,
            confidence_exponent: 0.5,
            confidence_scale: 1.0,
            seed: 0,
            init_scale: None,
            combine: Combine::Average,
            schedule: Schedule::RoundRobin,
            mode: ExecutionMode::Deterministic,
            pmi: PmiParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn init_half_width(&self) -> f64 {
        self.init_scale
            .unwrap_or_else(|| 0.1 / (self.dim.max(1) as f64).sqrt())
    }

    pub fn confidence(&self, f: f64) -> f64 {
        self.confidence_scale * f.powf(self.confidence_exponent)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.init_half_width() > 0.0) {
            return Err(Error::Config("init_scale must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        self.pmi.validate()
    }
}

/// Fitting target for one matrix cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellTarget {
    Observed { pmi: f64, weight: f64 },
    Unobserved { pmi: f64 },
    /// No gradient (a term without any co-occurrence mass).
    Skip,
}

/// Dense, row-major targets for one shard.
#[derive(Debug, Clone)]
pub struct TargetBlock {
    pub row_offset: usize,
    pub col_offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<CellTarget>,
}

/// Anything that can hand out square target blocks over a tiled matrix.
pub trait TargetSource: Sync {
    fn block_dim(&self) -> usize;
    fn blocks_per_side(&self) -> usize;
    fn target_block(&self, row_block: usize, col_block: usize) -> Result<TargetBlock>;

    fn size(&self) -> usize {
        self.block_dim() * self.blocks_per_side()
    }
}

/// PMI targets derived from co-occurrence shards and their marginals.
pub struct ShardTargets<'a> {
    set: &'a ShardSet,
    pmi: PmiParams,
    confidence_exponent: f64,
    confidence_scale: f64,
}

impl<'a> ShardTargets<'a> {
    pub fn new(set: &'a ShardSet, cfg: &TrainConfig) -> Self {
        ShardTargets {
            set,
            pmi: cfg.pmi,
            confidence_exponent: cfg.confidence_exponent,
            confidence_scale: cfg.confidence_scale,
        }
    }
}

impl TargetSource for ShardTargets<'_> {
    fn block_dim(&self) -> usize {
        self.set.shard_dim
    }

    fn blocks_per_side(&self) -> usize {
        self.set.blocks_per_side
    }

    fn target_block(&self, row_block: usize, col_block: usize) -> Result<TargetBlock> {
        let shard = self.set.shard(row_block, col_block);
        let d = self.set.shard_dim;
        let (r0, c0) = (shard.row_offset(), shard.col_offset());
        let marg = &self.set.row_marginals;
        let total = self.set.total;
        let mut cells = Vec::with_capacity(d * d);
        for li in 0..d {
            let fi = marg[r0 + li];
            for lj in 0..d {
                let fj = marg[c0 + lj];
                cells.push(if fi > 0.0 && fj > 0.0 {
                    CellTarget::Unobserved {
                        pmi: pmi(0.0, fi, fj, total, &self.pmi)?,
                    }
                } else {
                    CellTarget::Skip
                });
            }
        }
        for &(li, lj, f) in &shard.entries {
            let (li, lj) = (li as usize, lj as usize);
            let value = pmi(f, marg[r0 + li], marg[c0 + lj], total, &self.pmi)?;
            cells[li * d + lj] = CellTarget::Observed {
                pmi: value,
                weight: self.confidence_scale * f.powf(self.confidence_exponent),
            };
        }
        Ok(TargetBlock {
            row_offset: r0,
            col_offset: c0,
            rows: d,
            cols: d,
            cells,
        })
    }
}

/// A dense, fully observed target matrix, tiled into square blocks.
#[derive(Debug, Clone)]
pub struct DenseTargets {
    size: usize,
    block_dim: usize,
    pmi: Vec<f64>,
    weight: Vec<f64>,
}

impl DenseTargets {
    pub fn new(size: usize, block_dim: usize, pmi: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        if block_dim == 0 || !size.is_multiple_of(block_dim) {
            return Err(Error::Alignment {
                len: size,
                shard_dim: block_dim,
            });
        }
        if pmi.len() != size * size || weight.len() != size * size {
            return Err(Error::Dimension {
                expected: size * size,
                got: pmi.len().min(weight.len()),
            });
        }
        Ok(DenseTargets {
            size,
            block_dim,
            pmi,
            weight,
        })
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.pmi[i * self.size + j]
    }
}

impl TargetSource for DenseTargets {
    fn block_dim(&self) -> usize {
        self.block_dim
    }

    fn blocks_per_side(&self) -> usize {
        self.size / self.block_dim
    }

    fn target_block(&self, row_block: usize, col_block: usize) -> Result<TargetBlock> {
        let d = self.block_dim;
        let (r0, c0) = (row_block * d, col_block * d);
        let cells = (0..d * d)
            .map(|k| {
                let idx = (r0 + k / d) * self.size + c0 + k % d;
                CellTarget::Observed {
                    pmi: self.pmi[idx],
                    weight: self.weight[idx],
                }
            })
            .collect();
        Ok(TargetBlock {
            row_offset: r0,
            col_offset: c0,
            rows: d,
            cols: d,
            cells,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LossAndGrad {
    pub loss: f64,
    /// rows × dim, row-major.
    pub grad_u: Vec<f64>,
    /// cols × dim, row-major.
    pub grad_v: Vec<f64>,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss and its exact gradient for one block, given the focal rows `u`
/// (`rows × dim`) and context rows `v` (`cols × dim`).
pub fn block_loss(block: &TargetBlock, u: &[f64], v: &[f64], dim: usize) -> Result<LossAndGrad> {
    if u.len() != block.rows * dim {
        return Err(Error::Dimension {
            expected: block.rows * dim,
            got: u.len(),
        });
    }
    if v.len() != block.cols * dim {
        return Err(Error::Dimension {
            expected: block.cols * dim,
            got: v.len(),
        });
    }
    let mut loss = 0.0;
    let mut grad_u = vec![0.0; u.len()];
    let mut grad_v = vec![0.0; v.len()];
    for i in 0..block.rows {
        let ui = &u[i * dim..(i + 1) * dim];
        for j in 0..block.cols {
            let target = block.cells[i * block.cols + j];
            if let CellTarget::Skip = target {
                continue;
            }
            let vj = &v[j * dim..(j + 1) * dim];
            let dot: f64 = ui.iter().zip(vj).map(|(a, b)| a * b).sum();
            let (cell_loss, d_dot) = match target {
                CellTarget::Observed { pmi, weight } => {
                    let r = dot - pmi;
                    (0.5 * weight * r * r, weight * r)
                }
                CellTarget::Unobserved { pmi } => {
                    let x = dot - pmi;
                    (softplus(x), sigmoid(x))
                }
                CellTarget::Skip => unreachable!(),
            };
            if !cell_loss.is_finite() || !d_dot.is_finite() {
                return Err(Error::NonFinite {
                    row: block.row_offset + i,
                    col: block.col_offset + j,
                });
            }
            loss += cell_loss;
            if d_dot != 0.0 {
                for k in 0..dim {
                    grad_u[i * dim + k] += d_dot * vj[k];
                    grad_v[j * dim + k] += d_dot * ui[k];
                }
            }
        }
    }
    Ok(LossAndGrad {
        loss,
        grad_u,
        grad_v,
    })
}

/// Loss and gradient for one co-occurrence shard.
pub fn shard_loss(
    set: &ShardSet,
    row_block: usize,
    col_block: usize,
    u_block: &[f64],
    v_block: &[f64],
    cfg: &TrainConfig,
) -> Result<LossAndGrad> {
    let block = ShardTargets::new(set, cfg).target_block(row_block, col_block)?;
    block_loss(&block, u_block, v_block, cfg.dim)
}

/// Focal and context factors with their Adagrad accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorState {
    pub dim: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub acc_u: Vec<f64>,
    pub acc_v: Vec<f64>,
}

impl FactorState {
    pub fn init(size: usize, cfg: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let w = cfg.init_half_width();
        let n = size * cfg.dim;
        let u = (0..n).map(|_| rng.random_range(-w..=w)).collect();
        let v = (0..n).map(|_| rng.random_range(-w..=w)).collect();
        FactorState {
            dim: cfg.dim,
            u,
            v,
            acc_u: vec![0.0; n],
            acc_v: vec![0.0; n],
        }
    }

    pub fn u_row(&self, i: usize) -> &[f64] {
        &self.u[i * self.dim..(i + 1) * self.dim]
    }

    pub fn v_row(&self, j: usize) -> &[f64] {
        &self.v[j * self.dim..(j + 1) * self.dim]
    }

    pub fn dot(&self, i: usize, j: usize) -> f64 {
        self.u_row(i).iter().zip(self.v_row(j)).map(|(a, b)| a * b).sum()
    }

    /// Sum of block losses over every shard, without updating.
    pub fn mean_block_loss(&self, source: &dyn TargetSource) -> Result<f64> {
        let b = source.blocks_per_side();
        let span = source.block_dim() * self.dim;
        let mut total = 0.0;
        for r in 0..b {
            for c in 0..b {
                let block = source.target_block(r, c)?;
                let lg = block_loss(
                    &block,
                    &self.u[r * span..(r + 1) * span],
                    &self.v[c * span..(c + 1) * span],
                    self.dim,
                )?;
                total += lg.loss;
            }
        }
        Ok(total / (b * b) as f64)
    }

    pub fn combined(&self, combine: Combine) -> Vec<f64> {
        match combine {
            Combine::Average => self.u.iter().zip(&self.v).map(|(a, b)| 0.5 * (a + b)).collect(),
            Combine::Sum => self.u.iter().zip(&self.v).map(|(a, b)| a + b).collect(),
            Combine::FocalOnly => self.u.clone(),
        }
    }
}

fn adagrad(params: &mut [f64], acc: &mut [f64], grad: &[f64], lr: f64) {
    for ((p, a), g) in params.iter_mut().zip(acc.iter_mut()).zip(grad) {
        *a += g * g;
        *p -= lr * g / (a.sqrt() + ADAGRAD_EPS);
    }
}

fn update_block(
    source: &dyn TargetSource,
    r: usize,
    c: usize,
    u: &mut [f64],
    acc_u: &mut [f64],
    v: &mut [f64],
    acc_v: &mut [f64],
    dim: usize,
    lr: f64,
) -> Result<f64> {
    let block = source.target_block(r, c)?;
    let lg = block_loss(&block, u, v, dim)?;
    adagrad(u, acc_u, &lg.grad_u, lr);
    adagrad(v, acc_v, &lg.grad_v, lr);
    Ok(lg.loss)
}

fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// Drives Adagrad updates over the shards of a target source.
pub struct Factorizer<'a> {
    source: &'a dyn TargetSource,
    cfg: TrainConfig,
    state: FactorState,
    rng: ChaCha8Rng,
    steps_done: usize,
    /// Mean step loss of each completed sweep (one sweep = all shards once).
    pub sweep_losses: Vec<f64>,
    sweep_acc: (f64, usize),
}

impl<'a> Factorizer<'a> {
    pub fn new(source: &'a dyn TargetSource, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let state = FactorState::init(source.size(), &cfg);
        // separate stream from initialization
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5c4e_d01e_0000);
        Ok(Factorizer {
            source,
            cfg,
            state,
            rng,
            steps_done: 0,
            sweep_losses: Vec::new(),
            sweep_acc: (0.0, 0),
        })
    }

    pub fn state(&self) -> &FactorState {
        &self.state
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    fn n_shards(&self) -> usize {
        let b = self.source.blocks_per_side();
        b * b
    }

    fn record(&mut self, loss: f64) {
        self.sweep_acc.0 += loss;
        self.sweep_acc.1 += 1;
        if self.sweep_acc.1 == self.n_shards() {
            self.sweep_losses.push(self.sweep_acc.0 / self.sweep_acc.1 as f64);
            self.sweep_acc = (0.0, 0);
        }
    }

    fn next_shard(&mut self) -> (usize, usize) {
        let b = self.source.blocks_per_side();
        let k = match self.cfg.schedule {
            Schedule::RoundRobin => self.steps_done % (b * b),
            Schedule::Random => self.rng.random_range(0..b * b),
        };
        (k / b, k % b)
    }

    /// One Adagrad update on shard `(r, c)`. Returns the pre-update loss.
    pub fn step_on(&mut self, r: usize, c: usize) -> Result<f64> {
        let span = self.source.block_dim() * self.state.dim;
        let st = &mut self.state;
        let (ur, vr) = (r * span..(r + 1) * span, c * span..(c + 1) * span);
        let loss = update_block(
            self.source,
            r,
            c,
            &mut st.u[ur.clone()],
            &mut st.acc_u[ur.clone()],
            &mut st.v[vr.clone()],
            &mut st.acc_v[vr.clone()],
            st.dim,
            self.cfg.learning_rate,
        )?;
        if !all_finite(&st.u[ur]) || !all_finite(&st.v[vr]) {
            return Err(Error::Diverged {
                step: self.steps_done,
            });
        }
        self.steps_done += 1;
        self.record(loss);
        Ok(loss)
    }

    pub fn step(&mut self) -> Result<f64> {
        let (r, c) = self.next_shard();
        self.step_on(r, c)
    }

    /// One round of shards `(r, (r + offset) % B)` for `r < count`, updated
    /// concurrently. Row blocks and column blocks are pairwise disjoint, so
    /// the result does not depend on thread scheduling.
    fn parallel_round(&mut self, offset: usize, count: usize) -> Result<()> {
        let b = self.source.blocks_per_side();
        let span = self.source.block_dim() * self.state.dim;
        let dim = self.state.dim;
        let lr = self.cfg.learning_rate;
        let source = self.source;
        let st = &mut self.state;
        let mut v_parts: Vec<Option<(&mut [f64], &mut [f64])>> = st
            .v
            .chunks_mut(span)
            .zip(st.acc_v.chunks_mut(span))
            .map(Some)
            .collect();
        let tasks: Vec<_> = st
            .u
            .chunks_mut(span)
            .zip(st.acc_u.chunks_mut(span))
            .enumerate()
            .take(count)
            .map(|(r, (u, au))| {
                let c = (r + offset) % b;
                let (v, av) = v_parts[c].take().expect("columns are disjoint within a round");
                (r, c, u, au, v, av)
            })
            .collect();
        let losses: Vec<f64> = tasks
            .into_par_iter()
            .map(|(r, c, u, au, v, av)| {
                let loss = update_block(source, r, c, u, au, v, av, dim, lr)?;
                if !all_finite(u) || !all_finite(v) {
                    return Err(Error::Diverged { step: 0 });
                }
                Ok(loss)
            })
            .collect::<Result<_>>()
            .map_err(|e| match e {
                Error::Diverged { .. } => Error::Diverged {
                    step: self.steps_done,
                },
                other => other,
            })?;
        for loss in losses {
            self.steps_done += 1;
            self.record(loss);
        }
        Ok(())
    }

    pub fn run(&mut self, steps: usize) -> Result<()> {
        match self.cfg.mode {
            ExecutionMode::Deterministic => {
                for _ in 0..steps {
                    self.step()?;
                }
            }
            ExecutionMode::Parallel => {
                let b = self.source.blocks_per_side();
                let mut remaining = steps;
                let mut round = 0usize;
                while remaining > 0 {
                    let offset = match self.cfg.schedule {
                        Schedule::RoundRobin => round % b,
                        Schedule::Random => self.rng.random_range(0..b),
                    };
                    let count = remaining.min(b);
                    self.parallel_round(offset, count)?;
                    remaining -= count;
                    round += 1;
                }
            }
        }
        Ok(())
    }

    pub fn into_state(self) -> FactorState {
        self.state
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub space: EmbeddingSpace,
    pub initial_mean_loss: f64,
    pub final_mean_loss: f64,
    pub sweep_losses: Vec<f64>,
}

/// Factorizes the PMI of a sharded co-occurrence matrix and returns one
/// embedding per vocabulary term, in vocabulary order.
pub fn train(set: &ShardSet, vocab: &Vocabulary, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if set.vocab_size() != vocab.len() || set.shard_dim != vocab.shard_dim() {
        return Err(Error::Alignment {
            len: vocab.len(),
            shard_dim: set.shard_dim,
        });
    }
    let targets = ShardTargets::new(set, cfg);
    let (state, initial, final_loss, sweeps) = train_on(&targets, cfg)?;
    let data = state.combined(cfg.combine).into_iter().map(|x| x as f32).collect();
    let space = EmbeddingSpace::new(cfg.dim, vocab.terms().to_vec(), data)?;
    Ok(TrainOutcome {
        space,
        initial_mean_loss: initial,
        final_mean_loss: final_loss,
        sweep_losses: sweeps,
    })
}

/// Trains on any target source. Returns the final state, the mean block loss
/// at initialization and after training, and the per-sweep step losses.
pub fn train_on(
    source: &dyn TargetSource,
    cfg: &TrainConfig,
) -> Result<(FactorState, f64, f64, Vec<f64>)> {
    let mut fz = Factorizer::new(source, cfg.clone())?;
    let initial = fz.state().mean_block_loss(source)?;
    fz.run(cfg.steps)?;
    let final_loss = fz.state().mean_block_loss(source)?;
    let sweeps = std::mem::take(&mut fz.sweep_losses);
    Ok((fz.into_state(), initial, final_loss, sweeps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_cell(target: CellTarget) -> TargetBlock {
        TargetBlock {
            row_offset: 0,
            col_offset: 0,
            rows: 1,
            cols: 1,
            cells: vec![target],
        }
    }

    #[test]
    fn pmi_fixtures() {
        let p = PmiParams::default();
        assert_eq!(pmi(4.0, 4.0, 4.0, 4.0, &p).unwrap(), 0.0);
        assert!((pmi(2.0, 2.0, 4.0, 8.0, &p).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(pmi(0.0, 10.0, 10.0, 100.0, &p).unwrap(), 0.0);
        assert!(matches!(pmi(1.0, 0.0, 1.0, 1.0, &p), Err(Error::Domain(_))));
        let clamped = PmiParams {
            smoothing: 1.0,
            clamp_min: Some(0.0),
        };
        assert_eq!(pmi(1.0, 10.0, 10.0, 10.0, &clamped).unwrap(), 0.0);
    }

    #[test]
    fn observed_cell_loss_by_hand() {
        // f = 1, alpha = 0.5 -> weight 1; dot 1 against pmi 0
        let block = one_cell(CellTarget::Observed { pmi: 0.0, weight: 1.0 });
        let lg = block_loss(&block, &[1.0], &[1.0], 1).unwrap();
        assert!((lg.loss - 0.5).abs() < 1e-15);
        // d loss / d dot = 1; d dot / d u = v = 1
        assert!((lg.grad_u[0] - 1.0).abs() < 1e-15);
        assert!((lg.grad_v[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unobserved_cell_loss_by_hand() {
        let block = one_cell(CellTarget::Unobserved { pmi: 0.0 });
        let lg = block_loss(&block, &[0.0], &[1.0], 1).unwrap();
        assert!((lg.loss - 2f64.ln()).abs() < 1e-15);
        assert!((lg.grad_u[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_has_zero_observed_loss() {
        let block = one_cell(CellTarget::Observed { pmi: 0.75, weight: 3.0 });
        let lg = block_loss(&block, &[0.5, 1.0], &[0.5, 0.5], 2).unwrap();
        assert_eq!(lg.loss, 0.0);
        let block = one_cell(CellTarget::Unobserved { pmi: 0.0 });
        let lg = block_loss(&block, &[40.0], &[-40.0], 1).unwrap();
        assert!(lg.loss < 1e-300);
    }

    #[test]
    fn non_finite_reports_cell() {
        let block = TargetBlock {
            row_offset: 4,
            col_offset: 8,
            rows: 1,
            cols: 1,
            cells: vec![CellTarget::Observed { pmi: f64::NAN, weight: 1.0 }],
        };
        let err = block_loss(&block, &[1.0], &[1.0], 1).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 4, col: 8 }));
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        assert!((cfg.init_half_width() - 0.1 / 300f64.sqrt()).abs() < 1e-15);
        cfg.steps = 0;
        assert!(cfg.validate().is_err());
        cfg.steps = 1;
        cfg.dim = 0;
        assert!(cfg.validate().is_err());
        cfg.dim = 4;
        cfg.pmi.smoothing = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }
}
