//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use treescan::gen::{random_scan_inputs, random_tree, random_weights, rng};
use treescan::oracle::{
    finite_diff_gradients, max_relative_errors, two_traversal_residual, FiniteDifferenceConfig,
};
use treescan::DistanceMetric;
use treescan::{
    discretize, naive_tree_scan, tree_scan_language_backward, tree_scan_language_forward,
    tree_scan_vision_backward, tree_scan_vision_forward, ContinuousScanParams, Roots,
};
use treescan_cli::bench::{self, BenchConfig};
use treescan_cli::commands::{self, AffinitySource};
use treescan_cli::io::{self, Dtype, Tensor};
use treescan_cli::selfcheck::{chain_instance, discretization_instance, mst_instance};

struct Verdict {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn verdict(name: &'static str, passed: bool, detail: String) -> Verdict {
    Verdict {
        name,
        passed,
        detail,
    }
}

/// Forward against the quadratic reference, and the two-traversal identity on
/// the same instances.
fn oracle_suite() -> (Verdict, Verdict) {
    let start = Instant::now();
    let (mut worst_diff, mut worst_identity): (f64, f64) = (0.0, 0.0);
    let instances = 1000;
    for seed in 0..instances {
        let mut r = rng(10_000 + seed);
        let (l, c, n) = (r.gen_range(1..=256), r.gen_range(1..=4), r.gen_range(1..=4));
        let tree = random_tree(&mut r, l, None);
        let (x, p) = random_scan_inputs(&mut r, l, c, n);
        let fwd = tree_scan_vision_forward(&x, &p, &tree).unwrap();
        let naive = naive_tree_scan(&x, &p, &tree, Roots::All, false).unwrap();
        worst_diff = worst_diff.max(fwd.hidden.max_abs_diff(&naive));
        worst_identity = worst_identity.max(two_traversal_residual(&p, &tree, &fwd));
    }
    let elapsed = start.elapsed();
    (
        verdict(
            "oracle equivalence",
            worst_diff < 1e-9 && elapsed < Duration::from_secs(60),
            format!(
                "{instances} instances (L<=256, C<=4, N<=4): max |fast - naive| = {worst_diff:.2e} (< 1e-9), {:.1} s (< 60 s)",
                elapsed.as_secs_f64()
            ),
        ),
        verdict(
            "two-traversal identity",
            worst_identity < 1e-12,
            format!("{instances} instances: max residual at non-root vertices = {worst_identity:.2e} (< 1e-12)"),
        ),
    )
}

fn gradient_suite() -> Verdict {
    let start = Instant::now();
    let cfg = FiniteDifferenceConfig::default();
    let instances = 200;
    let mut worst = [[0.0f64; 3]; 2];
    for seed in 0..instances {
        for (mode, worst) in worst.iter_mut().enumerate() {
            let mut r = rng(20_000 + 2 * seed + mode as u64);
            let (l, c, n) = (r.gen_range(1..=64), r.gen_range(1..=4), r.gen_range(1..=4));
            let root = (mode == 1).then_some(l - 1);
            let tree = random_tree(&mut r, l, root);
            let (x, p) = random_scan_inputs(&mut r, l, c, n);
            let w = random_weights(&mut r, l, c, n);
            let (analytic, numeric) = if mode == 0 {
                let fwd = tree_scan_vision_forward(&x, &p, &tree).unwrap();
                let g = tree_scan_vision_backward(&x, &p, &tree, &fwd, &w).unwrap();
                let fd = finite_diff_gradients(
                    |x, p| Ok(tree_scan_vision_forward(x, p, &tree)?.hidden),
                    &x,
                    &p,
                    &w,
                    &cfg,
                );
                (g, fd.unwrap())
            } else {
                let h = tree_scan_language_forward(&x, &p, &tree).unwrap();
                let g = tree_scan_language_backward(&x, &p, &tree, &h, &w).unwrap();
                let fd = finite_diff_gradients(
                    |x, p| tree_scan_language_forward(x, p, &tree),
                    &x,
                    &p,
                    &w,
                    &cfg,
                );
                (g, fd.unwrap())
            };
            for (acc, e) in worst
                .iter_mut()
                .zip(max_relative_errors(&analytic, &numeric))
            {
                *acc = acc.max(e);
            }
        }
    }
    let elapsed = start.elapsed();
    let max = worst.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    verdict(
        "gradient correctness",
        max < cfg.relative_tolerance && elapsed < Duration::from_secs(120),
        format!(
            "{instances} instances per mode (L<=64), eps = {:.0e}: vision [d_x, d_a, d_b] = [{:.1e}, {:.1e}, {:.1e}], \
             language = [{:.1e}, {:.1e}, {:.1e}] (< {:.0e}), {:.1} s (< 120 s)",
            cfg.epsilon,
            worst[0][0],
            worst[0][1],
            worst[0][2],
            worst[1][0],
            worst[1][1],
            worst[1][2],
            cfg.relative_tolerance,
            elapsed.as_secs_f64()
        ),
    )
}

fn chain_suite() -> Verdict {
    let instances = 100;
    let worst = (0..instances)
        .map(|s| chain_instance(30_000 + s, 256).unwrap())
        .fold(0.0f64, f64::max);
    verdict(
        "causal chain reduction",
        worst <= 1e-12,
        format!("{instances} path graphs rooted at the last token: max |tree - sequential| = {worst:.2e} (<= 1e-12)"),
    )
}

fn mst_suite() -> Verdict {
    let instances = 510;
    // Seeds cycle through uniform, distinct and coarse (tied) weights; a
    // distinct-weight edge-set mismatch reports an infinite deviation.
    let worst = (0..instances)
        .map(|s| mst_instance(40_000 + s, 1024).unwrap())
        .fold(0.0f64, f64::max);
    verdict(
        "mst optimality",
        worst <= 1e-9,
        format!(
            "{instances} graphs up to 1024 vertices ({} with distinct weights): max |boruvka - kruskal| total = {worst:.2e}, \
             distinct-weight edge sets identical",
            instances / 3
        ),
    )
}

fn complexity_suite() -> Verdict {
    let dp = bench::run(&BenchConfig {
        sizes: vec![1 << 14, 1 << 15, 1 << 16],
        repeat: 10,
        naive_limit: 0,
        ..Default::default()
    })
    .unwrap();
    let naive = bench::run(&BenchConfig {
        sizes: vec![256, 512],
        repeat: 10,
        ..Default::default()
    })
    .unwrap();
    let dp_ratios: Vec<f64> = dp.dp_ratios.iter().map(|r| r.ratio).collect();
    let naive_ratio = naive.naive_ratios[0].ratio;
    let passed = dp_ratios.iter().all(|&r| r < 2.5) && naive_ratio > 3.4;
    verdict(
        "linear complexity",
        passed,
        format!(
            "median of 10, C = N = 1: dp t(2L)/t(L) for L = 2^14, 2^15 -> {:.2}, {:.2} (< 2.5); naive 256 -> 512: {:.2} (> 3.4)",
            dp_ratios[0], dp_ratios[1], naive_ratio
        ),
    )
}

fn affinity_suite() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let (h, w) = (16, 16);
    // Left half (1, 0), right half (0, 1): cosine dissimilarity 1 across.
    let mut data = Vec::with_capacity(h * w * 2);
    for _ in 0..h {
        for col in 0..w {
            data.extend_from_slice(if col < w / 2 {
                &[1.0, 0.0]
            } else {
                &[0.0, 1.0]
            });
        }
    }
    let input = dir.path().join("img");
    io::write_tensor(
        &input,
        &Tensor::new(vec![h * w, 2], data).unwrap(),
        Dtype::F64,
    )
    .unwrap();
    let tree_path = dir.path().join("tree.json");
    commands::tree(&input, h, w, DistanceMetric::Cosine, 0, &tree_path).unwrap();
    let anchor = 8 * w + 3;
    let values = commands::affinity(
        &tree_path,
        AffinitySource::EdgeWeights { scale: 1.0 },
        anchor,
        h,
        w,
        &dir.path().join("a.pgm"),
    )
    .unwrap();
    let mean = |left: bool| {
        let vals: Vec<f64> = (0..h * w)
            .filter(|i| (i % w < w / 2) == left)
            .map(|i| values[i])
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let (own, other) = (mean(true), mean(false));
    verdict(
        "affinity-map structure",
        own >= 2.0 * other,
        format!(
            "16x16 two-region image, --from-weights: mean affinity own region {own:.3}, other {other:.3}, ratio {:.2} (>= 2)",
            own / other
        ),
    )
}

fn discretization_suite() -> Verdict {
    let instances = 1000;
    let worst = (0..instances)
        .map(|s| discretization_instance(50_000 + s).unwrap())
        .fold(0.0f64, f64::max);
    // Shrinking delta drives a_bar to 1 and b_bar to 0.
    let mut limit_ok = true;
    let (mut last_a, mut last_b) = (f64::INFINITY, f64::INFINITY);
    for k in 1..=14 {
        let delta = 10f64.powi(-k);
        let p = discretize(&ContinuousScanParams {
            tokens: 1,
            channels: 1,
            states: 1,
            a: vec![-3.0],
            b: vec![2.0],
            c_out: vec![0.0],
            d: vec![0.0],
            delta: vec![delta],
        })
        .unwrap();
        let (da, db) = (
            (1.0 - p.a_bar.get(0, 0, 0)).abs(),
            p.b_bar.get(0, 0, 0).abs(),
        );
        limit_ok &=
            da <= last_a && db < last_b && da <= 3.0 * delta + f64::EPSILON && db <= 2.0 * delta;
        (last_a, last_b) = (da, db);
    }
    limit_ok &= last_a < 1e-12 && last_b < 1e-12;
    verdict(
        "discretization identities",
        worst <= 1e-12 && limit_ok,
        format!(
            "{instances} (A, B, delta) triples: max deviation from exp(delta A), delta B = {worst:.2e} (<= 1e-12); \
             delta -> 1e-14 gives |1 - a_bar| = {last_a:.1e}, |b_bar| = {last_b:.1e}"
        ),
    )
}

fn selfcheck_suite() -> Verdict {
    let run = |fault: bool| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_treescan"));
        cmd.arg("selfcheck");
        if fault {
            cmd.arg("--inject-fault");
        }
        cmd.output().expect("binary runs").status.code()
    };
    let (clean, faulty) = (run(false), run(true));
    verdict(
        "selfcheck",
        clean == Some(0) && faulty == Some(1),
        format!("clean build exit {clean:?} (want 0), perturbed kernel exit {faulty:?} (want 1)"),
    )
}

fn main() -> ExitCode {
    let (oracle, identity) = oracle_suite();
    let verdicts = [
        oracle,
        gradient_suite(),
        identity,
        chain_suite(),
        mst_suite(),
        complexity_suite(),
        affinity_suite(),
        discretization_suite(),
        selfcheck_suite(),
    ];
    println!();
    for v in &verdicts {
        println!(
            "{} {:<26} {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
    }
    let failed = verdicts.iter().filter(|v| !v.passed).count();
    println!(
        "\nacceptance: {} passed, {failed} failed\n",
        verdicts.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
