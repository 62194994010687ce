mod common;

use proptest::prelude::*;
use symkit::tensor::{self, AttentionWeights};
use symkit::Tensor;

fn mat(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-4.0f64..4.0, rows * cols).prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..6, 1usize..6)
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions((r, c) in dims(), shift in -50.0f64..50.0, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let a = common::uniform(&mut rng, &[r, c], -20.0, 20.0);
        let s = tensor::softmax_rows(&a).unwrap();
        for row in s.data().chunks(c) {
            prop_assert!(row.iter().all(|&p| p > 0.0 && p <= 1.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // shift invariance
        let shifted = tensor::softmax_rows(&a.map(|v| v + shift)).unwrap();
        prop_assert!(s.max_abs_diff(&shifted).unwrap() < 1e-12);
    }

    #[test]
    fn layer_norm_standardises(rows in 1usize..5, cols in 2usize..9, seed in any::<u64>(), g in 0.5f64..2.0, b in -1.0f64..1.0) {
        let mut rng = common::rng(seed);
        let x = common::uniform(&mut rng, &[rows, cols], -10.0, 10.0);
        let y = tensor::layer_norm(&x, &Tensor::full(&[cols], g), &Tensor::full(&[cols], b), 1e-9).unwrap();
        let stats = |row: &[f64]| {
            let mean = row.iter().sum::<f64>() / cols as f64;
            (mean, row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cols as f64)
        };
        for (row, input) in y.data().chunks(cols).zip(x.data().chunks(cols)) {
            let (mean, var) = stats(row);
            // eps shrinks the variance of nearly flat rows
            let in_var = stats(input).1;
            let want = g * g * in_var / (in_var + 1e-9);
            prop_assert!((mean - b).abs() < 1e-9);
            prop_assert!((var - want).abs() < 1e-9 * g * g);
        }
    }

    #[test]
    fn sigmoid_is_bounded_and_symmetric(x in -700.0f64..700.0) {
        let s = tensor::sigmoid_scalar(x);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((s + tensor::sigmoid_scalar(-x) - 1.0).abs() < 1e-15);
        prop_assert!(s.is_finite());
    }

    #[test]
    fn matmul_is_associative(a in mat(3, 4), b in mat(4, 2), c in mat(2, 5)) {
        let left = tensor::matmul(&tensor::matmul(&a, &b).unwrap(), &c).unwrap();
        let right = tensor::matmul(&a, &tensor::matmul(&b, &c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right).unwrap() < 1e-9);
    }

    #[test]
    fn attention_matches_loops(heads in 1usize..=2, dh in 1usize..=4, nq in 1usize..=6, nk in 1usize..=6, seed in any::<u64>()) {
        let d = heads * dh;
        let mut rng = common::rng(seed);
        let mut m = |shape: &[usize]| common::uniform(&mut rng, shape, -1.5, 1.5);
        let w = AttentionWeights { heads, wq: m(&[d, d]), wk: m(&[d, d]), wv: m(&[d, d]), wo: m(&[d, d]) };
        let (q, k, v) = (m(&[nq, d]), m(&[nk, d]), m(&[nk, d]));
        let got = tensor::multi_head_cross_attention(&q, &k, &v, &w).unwrap();
        let want = common::naive_attention(&q, &k, &v, &w);
        for (i, row) in want.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                prop_assert!((got.at(&[i, j]) - x).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn attention_is_key_permutation_invariant(nk in 2usize..6, seed in any::<u64>()) {
        let d = 4;
        let mut rng = common::rng(seed);
        let mut m = |shape: &[usize]| common::uniform(&mut rng, shape, -1.0, 1.0);
        let w = AttentionWeights { heads: 2, wq: m(&[d, d]), wk: m(&[d, d]), wv: m(&[d, d]), wo: m(&[d, d]) };
        let (q, k, v) = (m(&[3, d]), m(&[nk, d]), m(&[nk, d]));
        let rev = |t: &Tensor| {
            let rows: Vec<Vec<f64>> = t.data().chunks(d).rev().map(<[f64]>::to_vec).collect();
            Tensor::from_rows(&rows).unwrap()
        };
        let a = tensor::multi_head_cross_attention(&q, &k, &v, &w).unwrap();
        let b = tensor::multi_head_cross_attention(&q, &rev(&k), &rev(&v), &w).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn depthwise_identity_kernel_adds_bias(c in 1usize..4, h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let f = common::uniform(&mut rng, &[c, h, w], -3.0, 3.0);
        let bias = common::uniform(&mut rng, &[c], -1.0, 1.0);
        let mut kernels = Tensor::zeros(&[c, 3, 3]);
        for ch in 0..c {
            kernels.set(&[ch, 1, 1], 1.0);
        }
        let out = tensor::depthwise_conv(&f, &kernels, &bias).unwrap();
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    prop_assert_eq!(out.at(&[ch, y, x]), f.at(&[ch, y, x]) + bias.data()[ch]);
                }
            }
        }
    }

    #[test]
    fn text_format_round_trips(r in 1usize..4, c in 1usize..4, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let t = common::uniform(&mut rng, &[r, c], -1e6, 1e6);
        prop_assert_eq!(Tensor::from_text(&t.to_text()).unwrap(), t);
    }
}
