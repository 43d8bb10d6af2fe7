use lingvec::embedspace::{merge, svd_project, EmbeddingSpace, MergeOp};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_space(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingSpace {
    let rows = (0..n).map(|i| {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        (format!("w{i}"), v)
    });
    EmbeddingSpace::from_rows(dim, rows).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

#[test]
fn average_of_a_space_with_itself_is_the_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let s = random_space(&mut rng, 30, 7);
        let out = merge(&[&s, &s, &s], MergeOp::Average).unwrap();
        assert_eq!(out.dropped_keys, 0);
        for (k, v) in s.iter() {
            let m = out.space.get(k).unwrap();
            for (a, b) in v.iter().zip(m) {
                assert!((a - b).abs() <= 1e-6);
            }
        }
        let twice = merge(&[&s, &s], MergeOp::Average).unwrap();
        assert_eq!(twice.space.keys(), s.keys());
        for (k, v) in s.iter() {
            assert_eq!(twice.space.get(k).unwrap(), v);
        }
    }
}

#[test]
fn concat_dimension_is_additive() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for dims in [[3, 5, 2], [1, 1, 1], [8, 4, 16]] {
        let spaces: Vec<EmbeddingSpace> = dims.iter().map(|&d| random_space(&mut rng, 10, d)).collect();
        let refs: Vec<&EmbeddingSpace> = spaces.iter().collect();
        let out = merge(&refs, MergeOp::Concat).unwrap();
        assert_eq!(out.space.dim(), dims.iter().sum::<usize>());
        let row = out.space.get("w3").unwrap();
        assert_eq!(&row[..dims[0]], spaces[0].get("w3").unwrap());
    }
}

#[test]
fn svd_reduce_reconstructs_dot_products_of_rank_r_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..20 {
        let (n, d, r) = (rng.random_range(20..60), rng.random_range(8..24), rng.random_range(1..6));
        let low = gaussian(&mut rng, n, r) * gaussian(&mut rng, r, d);
        let offset = gaussian(&mut rng, 1, d);
        let x = DMatrix::from_fn(n, d, |i, j| low[(i, j)] + offset[(0, j)]);
        let (components, y) = svd_project(x.clone(), r, case).unwrap();

        let gram = components.transpose() * &components;
        let eye = DMatrix::<f64>::identity(r, r);
        assert!((gram - eye).abs().max() < 1e-8, "case {case}: components not orthonormal");

        let mut xc = x.clone();
        lingvec::svd::center_columns(&mut xc);
        let want = &xc * xc.transpose();
        let got = &y * y.transpose();
        let err = (want - got).abs().max();
        assert!(err < 1e-6, "case {case}: dot-product error {err}");
    }
}

#[test]
fn svd_reduce_merge_on_spaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_space(&mut rng, 40, 6);
    let b = random_space(&mut rng, 40, 6);
    let out = merge(&[&a, &b], MergeOp::SvdReduce { target_dim: 5, seed: 9 }).unwrap();
    assert_eq!(out.space.dim(), 5);
    assert_eq!(out.space.len(), 40);
    let again = merge(&[&a, &b], MergeOp::SvdReduce { target_dim: 5, seed: 9 }).unwrap();
    assert_eq!(out.space.keys(), again.space.keys());
    for (k, v) in out.space.iter() {
        assert_eq!(again.space.get(k).unwrap(), v);
    }
    assert!(merge(&[&a, &b], MergeOp::SvdReduce { target_dim: 13, seed: 9 }).is_err());
}

#[test]
fn merge_keeps_only_shared_keys() {
    let a = EmbeddingSpace::from_rows(1, [("x", vec![1.0]), ("y", vec![2.0])]).unwrap();
    let b = EmbeddingSpace::from_rows(1, [("y", vec![4.0]), ("z", vec![8.0])]).unwrap();
    let out = merge(&[&a, &b], MergeOp::Add).unwrap();
    assert_eq!(out.space.keys(), ["y".to_string()]);
    assert_eq!(out.space.get("y").unwrap(), &[6.0]);
    assert_eq!(out.dropped_keys, 2);
}

proptest! {
    #[test]
    fn text_and_binary_formats_round_trip(seed in any::<u64>(), n in 1usize..20, dim in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_space(&mut rng, n, dim);
        let mut bin = Vec::new();
        s.write_binary(&mut bin).unwrap();
        let back = EmbeddingSpace::read_binary(&bin).unwrap();
        prop_assert_eq!(back.keys(), s.keys());
        for (k, v) in s.iter() {
            prop_assert_eq!(back.get(k).unwrap(), v);
        }
        let mut text = Vec::new();
        s.write_text(&mut text).unwrap();
        let back = EmbeddingSpace::read_text(text.as_slice()).unwrap();
        for (k, v) in s.iter() {
            for (a, b) in v.iter().zip(back.get(k).unwrap()) {
                prop_assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-3));
            }
        }
    }
}
