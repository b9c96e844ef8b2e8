use rand::Rng;
use treescan::gen::{
    random_continuous_params, random_scan_inputs, random_tree, random_weights, rng,
};
use treescan::oracle::{
    central_difference, finite_diff_gradients, max_relative_errors, path_product, relative_error,
    FiniteDifferenceConfig,
};
use treescan::scan::{
    block_backward, block_forward, chain_child_keyed, sequential_selective_scan_backward, ScanMode,
};
use treescan::*;

fn vision_h(x: &FeatureMap, p: &DiscreteScanParams, t: &SpanningTree) -> Result<LaneTensor> {
    Ok(tree_scan_vision_forward(x, p, t)?.hidden)
}

fn assert_within(errs: [f64; 3], tol: f64, ctx: &str) {
    for (name, e) in ["d_x", "d_a_bar", "d_b_bar"].iter().zip(errs) {
        assert!(e < tol, "{ctx}: {name} relative error {e:e} >= {tol:e}");
    }
}

#[test]
fn chain_example_first_vertex_loss() {
    // h_0 = u_0 + a_1 u_1 + a_1 a_2 u_2 on the path 0 - 1 - 2 rooted at 0.
    let t = SpanningTree::path(3, 0).unwrap();
    let x = FeatureMap::new(vec![1.0; 3], 3, 1).unwrap();
    let p = DiscreteScanParams::new(
        LaneTensor::from_vec(3, 1, 1, vec![0.3, 0.5, 0.5]).unwrap(),
        LaneTensor::filled(3, 1, 1, 1.0),
    )
    .unwrap();
    let d_h = LaneTensor::from_vec(3, 1, 1, vec![1.0, 0.0, 0.0]).unwrap();
    let fwd = tree_scan_vision_forward(&x, &p, &t).unwrap();
    let g = tree_scan_vision_backward(&x, &p, &t, &fwd, &d_h).unwrap();
    // Hand values: dh0/dx = (1, a1, a1 a2), dh0/da1 = u1 + a2 u2, dh0/da2 = a1 u2.
    assert_eq!(g.d_x.as_slice(), &[1.0, 0.5, 0.25]);
    assert_eq!(g.d_b_bar.as_slice(), &[1.0, 0.5, 0.25]);
    assert!((g.d_a_bar.get(1, 0, 0) - 1.5).abs() < 1e-15);
    assert!((g.d_a_bar.get(2, 0, 0) - 0.5).abs() < 1e-15);
    assert_eq!(g.d_a_bar.get(0, 0, 0), 0.0);

    let fd = finite_diff_gradients(|x, p| vision_h(x, p, &t), &x, &p, &d_h, &Default::default())
        .unwrap();
    assert_within(max_relative_errors(&g, &fd), 1e-6, "chain example");
}

#[test]
fn single_vertex_fd_matches_exactly_linear() {
    let t = SpanningTree::from_parents(0, vec![0], vec![0.0]).unwrap();
    let (x, p) = random_scan_inputs(&mut rng(5), 1, 2, 3);
    let w = random_weights(&mut rng(6), 1, 2, 3);
    let fd =
        finite_diff_gradients(|x, p| vision_h(x, p, &t), &x, &p, &w, &Default::default()).unwrap();
    for c in 0..2 {
        let expect: f64 = (0..3).map(|n| p.b_bar.get(0, c, n) * w.get(0, c, n)).sum();
        assert!((fd.d_x.get(0, c, 0) - expect).abs() < 1e-9);
    }
}

#[test]
fn vision_backward_matches_finite_differences() {
    let cfg = FiniteDifferenceConfig::default();
    for seed in 0..40u64 {
        let mut r = rng(seed);
        let (l, c, n) = (r.gen_range(1..=32), r.gen_range(1..=3), r.gen_range(1..=3));
        let t = random_tree(&mut r, l, None);
        let (x, p) = random_scan_inputs(&mut r, l, c, n);
        let w = random_weights(&mut r, l, c, n);
        let fwd = tree_scan_vision_forward(&x, &p, &t).unwrap();
        let g = tree_scan_vision_backward(&x, &p, &t, &fwd, &w).unwrap();
        let fd = finite_diff_gradients(|x, p| vision_h(x, p, &t), &x, &p, &w, &cfg).unwrap();
        assert_within(
            max_relative_errors(&g, &fd),
            cfg.relative_tolerance,
            &format!("seed {seed}"),
        );
        assert!(g.d_a_bar.row(t.root()).iter().all(|&v| v == 0.0));
    }
}

#[test]
fn language_backward_matches_finite_differences() {
    let cfg = FiniteDifferenceConfig::default();
    for seed in 100..140u64 {
        let mut r = rng(seed);
        let (l, c, n) = (r.gen_range(2..=32), r.gen_range(1..=3), r.gen_range(1..=3));
        let t = random_tree(&mut r, l, Some(l - 1));
        let (x, p) = random_scan_inputs(&mut r, l, c, n);
        let w = random_weights(&mut r, l, c, n);
        let h = tree_scan_language_forward(&x, &p, &t).unwrap();
        let g = tree_scan_language_backward(&x, &p, &t, &h, &w).unwrap();
        let fd = finite_diff_gradients(
            |x, p| tree_scan_language_forward(x, p, &t),
            &x,
            &p,
            &w,
            &cfg,
        )
        .unwrap();
        assert_within(
            max_relative_errors(&g, &fd),
            cfg.relative_tolerance,
            &format!("seed {seed}"),
        );
    }
}

#[test]
fn language_root_only_gradient_is_path_product() {
    let mut r = rng(77);
    let l = 20;
    let t = random_tree(&mut r, l, Some(l - 1));
    let (x, p) = random_scan_inputs(&mut r, l, 1, 2);
    let mut d_h = LaneTensor::zeros(l, 1, 2);
    d_h.set(l - 1, 0, 0, 1.0);
    d_h.set(l - 1, 0, 1, -0.5);
    let h = tree_scan_language_forward(&x, &p, &t).unwrap();
    let g = tree_scan_language_backward(&x, &p, &t, &h, &d_h).unwrap();
    for j in 0..l {
        let expect: f64 = (0..2)
            .map(|n| {
                let s = path_product(&t, &p, l - 1, j, Lane::new(0, n)).unwrap();
                s * p.b_bar.get(j, 0, n) * d_h.get(l - 1, 0, n)
            })
            .sum();
        assert!((g.d_x.get(j, 0, 0) - expect).abs() < 1e-12, "vertex {j}");
    }
}

#[test]
fn chain_language_gradients_equal_sequential() {
    let cfg = FiniteDifferenceConfig::default();
    for seed in 0..10u64 {
        let mut r = rng(500 + seed);
        let l = r.gen_range(2..=24);
        let (x, p) = random_scan_inputs(&mut r, l, 2, 2);
        let w = random_weights(&mut r, l, 2, 2);
        let chain = SpanningTree::path(l, l - 1).unwrap();
        let keyed = chain_child_keyed(&p);

        let hs = sequential_selective_scan(&x, &p).unwrap();
        let gs = sequential_selective_scan_backward(&x, &p, &hs, &w).unwrap();
        let fd = finite_diff_gradients(sequential_selective_scan, &x, &p, &w, &cfg).unwrap();
        assert_within(
            max_relative_errors(&gs, &fd),
            cfg.relative_tolerance,
            "sequential",
        );

        let hl = tree_scan_language_forward(&x, &keyed, &chain).unwrap();
        let gl = tree_scan_language_backward(&x, &keyed, &chain, &hl, &w).unwrap();
        assert!(gl.d_x.max_abs_diff(&gs.d_x) < 1e-12);
        assert!(gl.d_b_bar.max_abs_diff(&gs.d_b_bar) < 1e-12);
        // Transition of token i+1 sits on chain edge (i, i+1), owned by i.
        for i in 0..l - 1 {
            for k in 0..4 {
                let a = gl.d_a_bar.row(i)[k];
                let b = gs.d_a_bar.row(i + 1)[k];
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn quadratic_differencer() {
    assert!((central_difference(|t| t * t, 3.0, 1e-5) - 6.0).abs() < 1e-8);
}

/// Gradients of the continuous parameters through discretization and the
/// output projection, checked coordinate by coordinate.
#[test]
fn block_gradients_match_finite_differences() {
    for (seed, mode, norm) in [
        (1u64, ScanMode::Vision, NormMode::default()),
        (2, ScanMode::Vision, NormMode::Identity),
        (3, ScanMode::Language, NormMode::default()),
        (4, ScanMode::Language, NormMode::Identity),
    ] {
        let mut r = rng(seed);
        let (l, c, n) = (r.gen_range(2..=10), 2, 3);
        let root = (mode == ScanMode::Language).then_some(l - 1);
        let t = random_tree(&mut r, l, root);
        let x = FeatureMap::from_fn(l, c, |_, _| r.gen_range(-1.0..1.0)).unwrap();
        let params = random_continuous_params(&mut r, l, c, n);
        let d_y: Vec<f64> = (0..l * c).map(|_| r.gen_range(-1.0..1.0)).collect();
        let grads = block_backward(&x, &params, &t, mode, norm, &d_y).unwrap();

        let loss = |x: &FeatureMap, q: &ContinuousScanParams| -> f64 {
            let y = block_forward(x, q, &t, mode, norm).unwrap();
            y.as_slice().iter().zip(&d_y).map(|(a, b)| a * b).sum()
        };
        let eps = 1e-5;
        let check = |name: &str,
                     analytic: &[f64],
                     field: fn(&mut ContinuousScanParams) -> &mut Vec<f64>| {
            for (k, &a) in analytic.iter().enumerate() {
                let f = |v: f64| {
                    let mut q = params.clone();
                    field(&mut q)[k] = v;
                    loss(&x, &q)
                };
                let mut q = params.clone();
                let theta = field(&mut q)[k];
                let numeric = central_difference(f, theta, eps);
                let e = relative_error(a, numeric);
                assert!(
                    e < 1e-4,
                    "seed {seed} {name}[{k}]: analytic {a} numeric {numeric}"
                );
            }
        };
        check("A", &grads.params.d_a, |q| &mut q.a);
        check("B", &grads.params.d_b, |q| &mut q.b);
        check("C", &grads.params.d_c_out, |q| &mut q.c_out);
        check("D", &grads.params.d_d, |q| &mut q.d);
        check("delta", &grads.params.d_delta, |q| &mut q.delta);

        for k in 0..l * c {
            let f = |v: f64| {
                let mut data = x.as_slice().to_vec();
                data[k] = v;
                loss(&FeatureMap::new(data, l, c).unwrap(), &params)
            };
            let numeric = central_difference(f, x.as_slice()[k], eps);
            assert!(
                relative_error(grads.d_x[k], numeric) < 1e-4,
                "seed {seed} x[{k}]"
            );
        }
    }
}

/// The transition gradient must pair the subtree adjoint with the parent's
/// full-tree quantities. Using the vertex's own `h_k` and `rho_k` instead
/// gives a different (wrong) value; this pins the distinction.
#[test]
fn transition_gradient_uses_parent_side_quantities() {
    let t = SpanningTree::path(3, 0).unwrap();
    let x = FeatureMap::new(vec![1.0; 3], 3, 1).unwrap();
    let p = DiscreteScanParams::new(
        LaneTensor::from_vec(3, 1, 1, vec![0.3, 0.5, 0.5]).unwrap(),
        LaneTensor::filled(3, 1, 1, 1.0),
    )
    .unwrap();
    let d_h = LaneTensor::from_vec(3, 1, 1, vec![1.0, 0.0, 0.0]).unwrap();
    let fwd = tree_scan_vision_forward(&x, &p, &t).unwrap();
    let g = tree_scan_vision_backward(&x, &p, &t, &fwd, &d_h).unwrap();

    // Adjoint aggregates for d_h = (1, 0, 0): eta = (1, 0, 0), rho = (1, 0.5, 0.25).
    let (eta1, rho1, xi1, h1, a1) = (0.0, 0.5, 1.5, 2.0, 0.5);
    let own_vertex_form = eta1 * h1 + xi1 * rho1 - 2.0 * a1 * eta1 * xi1;
    assert_eq!(own_vertex_form, 0.75);
    assert!((g.d_a_bar.get(1, 0, 0) - 1.5).abs() < 1e-15);
}
