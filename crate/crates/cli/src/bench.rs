//! Wall-clock scaling of the linear scan and the quadratic reference.
//!
//! Each timed run repeats the kernel enough times to last at least
//! [`BenchConfig::min_run`] and records time per call; the report keeps the
//! median over `repeat` runs. Sizes are interleaved within each round.

use std::fmt::Write as _;
use std::fs;
use std::hint::black_box;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use treescan::gen::{grid_shape, grid_tree, random_scan_inputs, rng};
use treescan::{naive_tree_scan, tree_scan_vision_forward, DistanceMetric, Roots};

use crate::UsageError;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub repeat: usize,
    pub naive_limit: usize,
    pub channels: usize,
    pub states: usize,
    pub seed: u64,
    pub min_run: Duration,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: Vec::new(),
            repeat: 10,
            naive_limit: treescan::scan::NAIVE_MAX_VERTICES,
            channels: 1,
            states: 1,
            seed: 0,
            min_run: Duration::from_millis(5),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), UsageError> {
        if self.sizes.len() < 2 {
            return Err(UsageError(format!(
                "--sizes needs at least two entries, got {}",
                self.sizes.len()
            )));
        }
        if let Some(s) = self.sizes.iter().find(|&&s| s < 2) {
            return Err(UsageError(format!(
                "--sizes entries must be at least 2, got {s}"
            )));
        }
        if self.repeat == 0 {
            return Err(UsageError("--repeat must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub size: usize,
    pub grid: (usize, usize),
    pub dp_median_seconds: f64,
    pub naive_median_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRatio {
    pub from: usize,
    pub to: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repeat: usize,
    pub channels: usize,
    pub states: usize,
    pub entries: Vec<BenchEntry>,
    /// `t(next) / t(prev)` for consecutive sizes.
    pub dp_ratios: Vec<GrowthRatio>,
    pub naive_ratios: Vec<GrowthRatio>,
}

impl BenchReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let naive = e
                .naive_median_seconds
                .map_or("-".to_string(), |t| format!("{:.3e} s", t));
            let _ = writeln!(
                s,
                "L={:<8} dp {:.3e} s  naive {naive}",
                e.size, e.dp_median_seconds
            );
        }
        for r in &self.dp_ratios {
            let _ = writeln!(s, "dp    {} -> {}: x{:.3}", r.from, r.to, r.ratio);
        }
        for r in &self.naive_ratios {
            let _ = writeln!(s, "naive {} -> {}: x{:.3}", r.from, r.to, r.ratio);
        }
        s
    }
}

/// Calls per timed run so that one run lasts at least `min_run`.
fn calibrate(min_run: Duration, f: &mut dyn FnMut()) -> usize {
    f();
    let mut batch = 1usize;
    loop {
        let start = Instant::now();
        for _ in 0..batch {
            f();
        }
        if start.elapsed() >= min_run || batch >= 1 << 20 {
            return batch;
        }
        batch *= 2;
    }
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        0.5 * (samples[mid - 1] + samples[mid])
    }
}

/// Median seconds per call for each kernel. Each round times every kernel
/// once, so slow drift in machine load hits all sizes alike.
fn median_times(
    repeat: usize,
    min_run: Duration,
    kernels: &mut [Box<dyn FnMut() + '_>],
) -> Vec<f64> {
    let batches: Vec<usize> = kernels
        .iter_mut()
        .map(|f| calibrate(min_run, f.as_mut()))
        .collect();
    let mut samples = vec![Vec::with_capacity(repeat); kernels.len()];
    for _ in 0..repeat {
        for ((f, &batch), out) in kernels.iter_mut().zip(&batches).zip(&mut samples) {
            let start = Instant::now();
            for _ in 0..batch {
                f();
            }
            out.push(start.elapsed().as_secs_f64() / batch as f64);
        }
    }
    samples.into_iter().map(median).collect()
}

fn ratios(points: &[(usize, f64)]) -> Vec<GrowthRatio> {
    points
        .windows(2)
        .map(|w| GrowthRatio {
            from: w[0].0,
            to: w[1].0,
            ratio: w[1].1 / w[0].1,
        })
        .collect()
}

pub fn run(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let instances: Vec<_> = config
        .sizes
        .iter()
        .enumerate()
        .map(|(k, &size)| {
            let (h, w) = grid_shape(size);
            let seed = config.seed.wrapping_add(k as u64);
            let tree = grid_tree(seed, h, w, DistanceMetric::Cosine);
            let (x, p) = random_scan_inputs(&mut rng(seed), size, config.channels, config.states);
            (size, (h, w), tree, x, p)
        })
        .collect();

    let mut dp_kernels: Vec<Box<dyn FnMut() + '_>> = Vec::new();
    let mut naive_kernels: Vec<Box<dyn FnMut() + '_>> = Vec::new();
    for (size, _, tree, x, p) in &instances {
        dp_kernels.push(Box::new(move || {
            black_box(tree_scan_vision_forward(black_box(x), p, tree).expect("consistent shapes"));
        }));
        if *size <= config.naive_limit {
            naive_kernels.push(Box::new(move || {
                black_box(
                    naive_tree_scan(black_box(x), p, tree, Roots::All, true)
                        .expect("consistent shapes"),
                );
            }));
        }
    }
    let dp_times = median_times(config.repeat, config.min_run, &mut dp_kernels);
    let mut naive_times =
        median_times(config.repeat, config.min_run, &mut naive_kernels).into_iter();

    let entries: Vec<BenchEntry> = instances
        .iter()
        .zip(dp_times)
        .map(|((size, grid, ..), dp)| BenchEntry {
            size: *size,
            grid: *grid,
            dp_median_seconds: dp,
            naive_median_seconds: if *size <= config.naive_limit {
                naive_times.next()
            } else {
                None
            },
        })
        .collect();
    let dp: Vec<_> = entries
        .iter()
        .map(|e| (e.size, e.dp_median_seconds))
        .collect();
    let naive: Vec<_> = entries
        .iter()
        .filter_map(|e| e.naive_median_seconds.map(|t| (e.size, t)))
        .collect();
    Ok(BenchReport {
        repeat: config.repeat,
        channels: config.channels,
        states: config.states,
        entries,
        dp_ratios: ratios(&dp),
        naive_ratios: ratios(&naive),
    })
}

pub fn write_report(path: &Path, report: &BenchReport) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(report)?)
        .with_context(|| format!("writing {}", path.display()))
}
