//! The linear-time scans against the quadratic and cubic references.

use proptest::prelude::*;
use rand::Rng;
use treescan::gen::{random_scan_inputs, random_tree, rng};
use treescan::oracle::{explicit_path_scan, path_product};
use treescan::scan::{chain_child_keyed, naive_causal_scan};
use treescan::*;

#[test]
fn vision_forward_matches_naive_all_roots() {
    for seed in 0..200u64 {
        let mut r = rng(seed);
        let (l, c, n) = (r.gen_range(1..=128), r.gen_range(1..=4), r.gen_range(1..=4));
        let t = random_tree(&mut r, l, None);
        let (x, p) = random_scan_inputs(&mut r, l, c, n);
        let fast = tree_scan_vision_forward(&x, &p, &t).unwrap().hidden;
        let slow = naive_tree_scan(&x, &p, &t, Roots::All, false).unwrap();
        assert!(fast.max_abs_diff(&slow) < 1e-9, "seed {seed}");
    }
}

#[test]
fn three_routes_agree_on_small_trees() {
    for seed in 0..60u64 {
        let mut r = rng(1000 + seed);
        let l = r.gen_range(1..=16);
        let t = random_tree(&mut r, l, None);
        let (x, p) = random_scan_inputs(&mut r, l, 2, 2);
        let explicit = explicit_path_scan(&x, &p, &t).unwrap();
        let naive = naive_tree_scan(&x, &p, &t, Roots::All, false).unwrap();
        let fast = tree_scan_vision_forward(&x, &p, &t).unwrap().hidden;
        assert!(explicit.max_abs_diff(&naive) < 1e-12, "seed {seed}");
        assert!(explicit.max_abs_diff(&fast) < 1e-12, "seed {seed}");
    }
}

#[test]
fn single_root_matches_row_of_all_roots() {
    let mut r = rng(9);
    let t = random_tree(&mut r, 40, None);
    let (x, p) = random_scan_inputs(&mut r, 40, 2, 1);
    let all = naive_tree_scan(&x, &p, &t, Roots::All, false).unwrap();
    for i in [0, 17, 39] {
        let one = naive_tree_scan(&x, &p, &t, Roots::Single(i), false).unwrap();
        assert_eq!(one.row(i), all.row(i));
    }
}

#[test]
fn language_forward_matches_naive_causal() {
    for seed in 0..100u64 {
        let mut r = rng(2000 + seed);
        let l = r.gen_range(2..=96);
        let t = random_tree(&mut r, l, Some(l - 1));
        let (x, p) = random_scan_inputs(&mut r, l, 2, 3);
        let fast = tree_scan_language_forward(&x, &p, &t).unwrap();
        let slow = naive_causal_scan(&x, &p, &t).unwrap();
        assert!(fast.max_abs_diff(&slow) < 1e-12, "seed {seed}");
    }
}

#[test]
fn language_root_equals_vision_root() {
    // At the root the causal subtree is the whole tree.
    let mut r = rng(4);
    let l = 50;
    let t = random_tree(&mut r, l, Some(l - 1));
    let (x, p) = random_scan_inputs(&mut r, l, 3, 2);
    let lang = tree_scan_language_forward(&x, &p, &t).unwrap();
    let vis = tree_scan_vision_forward(&x, &p, &t).unwrap().hidden;
    assert_eq!(lang.row(l - 1), vis.row(l - 1));
}

#[test]
fn chain_reduces_to_sequential_scan() {
    for seed in 0..100u64 {
        let mut r = rng(3000 + seed);
        let l = r.gen_range(1..=200);
        let (c, n) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let (x, p) = random_scan_inputs(&mut r, l, c, n);
        let chain = SpanningTree::path(l, l - 1).unwrap();
        let seq = sequential_selective_scan(&x, &p).unwrap();
        let lang = tree_scan_language_forward(&x, &chain_child_keyed(&p), &chain).unwrap();
        assert!(seq.max_abs_diff(&lang) <= 1e-12, "seed {seed}");
    }
}

#[test]
fn two_traversal_identity_and_root_gradient() {
    for seed in 0..100u64 {
        let mut r = rng(4000 + seed);
        let l = r.gen_range(2..=128);
        let t = random_tree(&mut r, l, None);
        let (x, p) = random_scan_inputs(&mut r, l, 2, 2);
        let f = tree_scan_vision_forward(&x, &p, &t).unwrap();
        assert_eq!(f.hidden.row(t.root()), f.aggregates.row(t.root()));
        for v in (0..l).filter(|&v| v != t.root()) {
            let q = t.parent()[v];
            for k in 0..4 {
                let a = p.a_bar.row(v)[k];
                let rhs = a * f.hidden.row(q)[k] + (1.0 - a * a) * f.aggregates.row(v)[k];
                assert!((f.hidden.row(v)[k] - rhs).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn hidden_states_bounded_by_total_input() {
    for seed in 0..50u64 {
        let mut r = rng(5000 + seed);
        let l = r.gen_range(1..=100);
        let t = random_tree(&mut r, l, None);
        let (x, p) = random_scan_inputs(&mut r, l, 1, 2);
        let h = tree_scan_vision_forward(&x, &p, &t).unwrap().hidden;
        for k in 0..2 {
            let bound: f64 = (0..l)
                .map(|j| (p.b_bar.row(j)[k] * x.get(j, 0)).abs())
                .sum();
            for i in 0..l {
                assert!(h.row(i)[k].abs() <= bound * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn affinity_agrees_with_path_products() {
    let mut r = rng(6);
    let l = 30;
    let t = random_tree(&mut r, l, None);
    let (_, p) = random_scan_inputs(&mut r, l, 2, 2);
    for anchor in [0, 11, 29] {
        let map = affinity_map(&t, &p, anchor).unwrap();
        assert_eq!(map[anchor], 1.0);
        for (j, &got) in map.iter().enumerate() {
            let expect: f64 = Lane::all(2, 2)
                .map(|lane| path_product(&t, &p, anchor, j, lane).unwrap())
                .sum::<f64>()
                / 4.0;
            assert!((got - expect).abs() < 1e-14);
        }
        // Non-increasing moving away from the anchor.
        for v in 0..l {
            let path = treescan::oracle::tree_path(&t, anchor, v);
            for w in path.windows(2) {
                assert!(map[w[1]] <= map[w[0]]);
            }
        }
    }
}

fn instance() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 1usize..64, 1usize..4, 1usize..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_is_linear_in_x((seed, l, c, n) in instance(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut r = rng(seed);
        let t = random_tree(&mut r, l, None);
        let (x1, p) = random_scan_inputs(&mut r, l, c, n);
        let (x2, _) = random_scan_inputs(&mut r, l, c, n);
        let mix = FeatureMap::new(
            x1.as_slice().iter().zip(x2.as_slice()).map(|(a, b)| alpha * a + beta * b).collect(),
            l,
            c,
        )
        .unwrap();
        let h = |x: &FeatureMap| tree_scan_vision_forward(x, &p, &t).unwrap().hidden;
        let (h1, h2, hm) = (h(&x1), h(&x2), h(&mix));
        for k in 0..hm.as_slice().len() {
            let expect = alpha * h1.as_slice()[k] + beta * h2.as_slice()[k];
            prop_assert!((hm.as_slice()[k] - expect).abs() < 1e-12 * (1.0 + expect.abs()) * l as f64);
        }
    }

    #[test]
    fn zero_transitions_give_injected_input((seed, l, c, n) in instance()) {
        let mut r = rng(seed);
        let t = random_tree(&mut r, l, None);
        let (x, mut p) = random_scan_inputs(&mut r, l, c, n);
        p.a_bar = LaneTensor::zeros(l, c, n);
        let h = tree_scan_vision_forward(&x, &p, &t).unwrap().hidden;
        for i in 0..l {
            for ch in 0..c {
                for s in 0..n {
                    prop_assert_eq!(h.get(i, ch, s), p.b_bar.get(i, ch, s) * x.get(i, ch));
                }
            }
        }
    }

    #[test]
    fn path_product_symmetric((seed, l, _c, _n) in instance(), i in 0usize..64, j in 0usize..64) {
        let mut r = rng(seed);
        let t = random_tree(&mut r, l, None);
        let (_, p) = random_scan_inputs(&mut r, l, 1, 1);
        let (i, j) = (i % l, j % l);
        let lane = Lane::new(0, 0);
        let (ij, ji) = (path_product(&t, &p, i, j, lane).unwrap(), path_product(&t, &p, j, i, lane).unwrap());
        // Same factors, reversed multiplication order.
        prop_assert!((ij - ji).abs() <= 1e-14 * ij.abs());
    }
}
