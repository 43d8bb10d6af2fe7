use lingvec::cooc::{count_cooc, shard_matrix, CoocParams, Weighting};
use lingvec::swivel::{
    block_loss, pmi, shard_loss, train, train_on, CellTarget, DenseTargets, ExecutionMode, FactorState, PmiParams,
    Schedule, TargetBlock, TargetSource, TrainConfig,
};
use lingvec::vocab::build_vocab;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn rank_r_targets(size: usize, rank: usize, block: usize, seed: u64) -> DenseTargets {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (rank as f64).sqrt();
    let a: Vec<f64> = (0..size * rank)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale.sqrt() * 1.2
        })
        .collect();
    let b: Vec<f64> = (0..size * rank)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale.sqrt() * 1.2
        })
        .collect();
    let mut pmi = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            pmi[i * size + j] = (0..rank).map(|k| a[i * rank + k] * b[j * rank + k]).sum();
        }
    }
    DenseTargets::new(size, block, pmi, vec![1.0; size * size]).unwrap()
}

fn rmse(state: &FactorState, t: &DenseTargets) -> f64 {
    let n = t.size();
    let sq: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (state.dot(i, j) - t.value(i, j)).powi(2))
        .sum();
    (sq / (n * n) as f64).sqrt()
}

fn recovery_cfg() -> TrainConfig {
    TrainConfig {
        dim: 8,
        steps: 20_000,
        learning_rate: 0.05,
        seed: 11,
        init_scale: Some(0.3),
        schedule: Schedule::Random,
        ..TrainConfig::default()
    }
}

#[test]
fn rank_eight_matrix_is_recovered() {
    let t = rank_r_targets(64, 8, 16, 3);
    let (state, initial, fin, sweeps) = train_on(&t, &recovery_cfg()).unwrap();
    let err = rmse(&state, &t);
    assert!(err < 0.1, "rmse {err}");
    assert!(fin < initial);
    assert_eq!(sweeps.len(), 20_000 / 16);
}

#[test]
fn deterministic_runs_are_bit_identical() {
    let t = rank_r_targets(32, 4, 8, 5);
    let cfg = TrainConfig {
        steps: 500,
        ..recovery_cfg()
    };
    let (a, ..) = train_on(&t, &cfg).unwrap();
    let (b, ..) = train_on(&t, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn parallel_mode_is_independent_of_thread_count() {
    let t = rank_r_targets(32, 4, 8, 5);
    let cfg = TrainConfig {
        steps: 400,
        mode: ExecutionMode::Parallel,
        ..recovery_cfg()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train_on(&t, &cfg).unwrap().0)
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn loss_decreases_on_a_real_corpus() {
    let corpus: Vec<Vec<Vec<String>>> = (0..200)
        .map(|i| {
            (0..20)
                .map(|j| vec![format!("w{}", (i * 7 + j * 3) % 16)])
                .collect()
        })
        .collect();
    let vocab = build_vocab(corpus.iter(), 1, 8).unwrap();
    let params = CoocParams {
        window: 2,
        weighting: Weighting::Harmonic,
        ..CoocParams::default()
    };
    let m = count_cooc(corpus.iter(), &vocab, params).unwrap();
    let set = shard_matrix(&m, &vocab).unwrap();
    let cfg = TrainConfig {
        dim: 4,
        steps: 400,
        seed: 2,
        ..TrainConfig::default()
    };
    let out = train(&set, &vocab, &cfg).unwrap();
    assert!(out.final_mean_loss < out.initial_mean_loss);
    assert_eq!(out.space.len(), vocab.len());
    assert_eq!(out.space.dim(), 4);
}

fn random_block(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> TargetBlock {
    let cells = (0..rows * cols)
        .map(|_| match rng.random_range(0..3u8) {
            0 => CellTarget::Observed {
                pmi: rng.random_range(-2.0..2.0),
                weight: rng.random_range(0.1..3.0),
            },
            1 => CellTarget::Unobserved {
                pmi: rng.random_range(-2.0..2.0),
            },
            _ => CellTarget::Skip,
        })
        .collect();
    TargetBlock {
        row_offset: 0,
        col_offset: 0,
        rows,
        cols,
        cells,
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn block_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let h = 1e-5;
    for _ in 0..25 {
        let (rows, cols, dim) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..4));
        let block = random_block(&mut rng, rows, cols);
        let u: Vec<f64> = (0..rows * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..cols * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lg = block_loss(&block, &u, &v, dim).unwrap();
        for i in 0..u.len() {
            let mut p = u.clone();
            p[i] += h;
            let mut m = u.clone();
            m[i] -= h;
            let num = (block_loss(&block, &p, &v, dim).unwrap().loss - block_loss(&block, &m, &v, dim).unwrap().loss)
                / (2.0 * h);
            assert!(rel_err(num, lg.grad_u[i]) < 1e-4 || (num - lg.grad_u[i]).abs() < 1e-9);
        }
        for i in 0..v.len() {
            let mut p = v.clone();
            p[i] += h;
            let mut m = v.clone();
            m[i] -= h;
            let num = (block_loss(&block, &u, &p, dim).unwrap().loss - block_loss(&block, &u, &m, dim).unwrap().loss)
                / (2.0 * h);
            assert!(rel_err(num, lg.grad_v[i]) < 1e-4 || (num - lg.grad_v[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn shard_loss_gradient_on_counted_shards() {
    let corpus: Vec<Vec<Vec<String>>> = (0..40)
        .map(|i| (0..12).map(|j| vec![format!("w{}", (i * 5 + j * j) % 8)]).collect())
        .collect();
    let vocab = build_vocab(corpus.iter(), 1, 4).unwrap();
    let m = count_cooc(corpus.iter(), &vocab, CoocParams::default()).unwrap();
    let set = shard_matrix(&m, &vocab).unwrap();
    let cfg = TrainConfig {
        dim: 3,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    for r in 0..set.blocks_per_side {
        for c in 0..set.blocks_per_side {
            let u: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lg = shard_loss(&set, r, c, &u, &v, &cfg).unwrap();
            for i in 0..u.len() {
                let mut p = u.clone();
                p[i] += h;
                let mut mm = u.clone();
                mm[i] -= h;
                let num = (shard_loss(&set, r, c, &p, &v, &cfg).unwrap().loss
                    - shard_loss(&set, r, c, &mm, &v, &cfg).unwrap().loss)
                    / (2.0 * h);
                assert!(rel_err(num, lg.grad_u[i]) < 1e-4 || (num - lg.grad_u[i]).abs() < 1e-9);
            }
        }
    }
}

proptest! {
    #[test]
    fn pmi_matches_formula(f_ij in 1e-3f64..1e6, f_i in 1e-3f64..1e6, f_j in 1e-3f64..1e6, total in 1.0f64..1e9) {
        let got = pmi(f_ij, f_i, f_j, total, &PmiParams::default()).unwrap();
        let want = (f_ij * total / (f_i * f_j)).ln();
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn independence_gives_zero_pmi(p in 1u32..1000, q in 1u32..1000, r in 1u32..1000) {
        // f_ij * F = (p r) q = f_i f_j with f_i = p q, f_j = r
        let (p, q, r) = (p as f64, q as f64, r as f64);
        prop_assert_eq!(pmi(p * r, p * q, r, q, &PmiParams::default()).unwrap(), 0.0);
    }
}
