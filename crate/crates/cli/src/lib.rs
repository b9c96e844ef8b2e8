//! Command-line front end for the `treescan` kernels.
//!
//! Exit codes: 0 on success, 1 when a command or check fails, 2 on a usage
//! error. Diagnostics go to standard error.

pub mod bench;
pub mod commands;
pub mod io;
pub mod selfcheck;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use treescan::DistanceMetric;

#[derive(Debug, Parser)]
#[command(
    name = "treescan",
    version,
    about = "Tree state-space scanning over image and token graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Vision,
    Language,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the minimum spanning tree of a 4-connected pixel grid.
    Tree {
        /// Feature tensor of shape (H*W, C).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long, default_value_t = DistanceMetric::Cosine, value_parser = parse_metric)]
        metric: DistanceMetric,
        #[arg(long, default_value_t = 0)]
        root: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the tree scan and write hidden states of shape (L, C, N).
    Scan {
        /// Feature tensor of shape (L, C).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        tree: PathBuf,
        /// Continuous parameters (JSON); discretized before scanning.
        #[arg(long)]
        params: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Vision)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the affinity of every pixel to an anchor pixel as a PGM image.
    Affinity {
        #[arg(long)]
        tree: PathBuf,
        #[arg(
            long,
            required_unless_present = "from_weights",
            conflicts_with = "from_weights"
        )]
        params: Option<PathBuf>,
        /// Derive transitions as exp(-scale * edge weight) instead of reading params.
        #[arg(long)]
        from_weights: bool,
        #[arg(long, default_value_t = 1.0, requires = "from_weights")]
        scale: f64,
        #[arg(long)]
        anchor: usize,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the linear scan against the quadratic reference.
    Bench {
        /// Comma-separated token counts, at least two.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
        repeat: u32,
        /// Largest size at which the quadratic scan is also timed.
        #[arg(long, default_value_t = treescan::scan::NAIVE_MAX_VERTICES)]
        naive_limit: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every kernel against its reference on seeded random instances.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Swap in a deliberately wrong forward kernel.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn parse_metric(s: &str) -> Result<DistanceMetric, String> {
    s.parse::<DistanceMetric>().map_err(|e| e.to_string())
}

/// A flag combination that parses but makes no sense; reported with exit 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Runs one command. `Ok(false)` means a check ran and failed.
pub fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Tree {
            input,
            height,
            width,
            metric,
            root,
            out,
        } => {
            commands::tree(&input, height, width, metric, root, &out)?;
        }
        Command::Scan {
            input,
            tree,
            params,
            mode,
            out,
        } => {
            commands::scan(&input, &tree, &params, mode, &out)?;
        }
        Command::Affinity {
            tree,
            params,
            from_weights,
            scale,
            anchor,
            height,
            width,
            out,
        } => {
            let source = match (params, from_weights) {
                (Some(path), false) => commands::AffinitySource::Params(path),
                _ => commands::AffinitySource::EdgeWeights { scale },
            };
            commands::affinity(&tree, source, anchor, height, width, &out)?;
        }
        Command::Bench {
            sizes,
            repeat,
            naive_limit,
            seed,
            out,
        } => {
            let config = bench::BenchConfig {
                sizes,
                repeat: repeat as usize,
                naive_limit,
                seed,
                ..Default::default()
            };
            config.validate()?;
            let report = bench::run(&config)?;
            bench::write_report(&out, &report)?;
            eprint!("{}", report.summary());
        }
        Command::Selfcheck { seed, inject_fault } => {
            let kernels = if inject_fault {
                selfcheck::Kernels::perturbed()
            } else {
                selfcheck::Kernels::reference()
            };
            let rows = selfcheck::run(&kernels, seed, &selfcheck::Budget::default());
            print!("{}", selfcheck::render(&rows));
            let mut ok = true;
            for row in rows.iter().filter(|r| !r.passed()) {
                ok = false;
                eprintln!(
                    "selfcheck: {} failed on seed {} (error {:e}, tolerance {:e})",
                    row.name,
                    row.failing_seed.unwrap_or(row.first_seed),
                    row.max_error,
                    row.tolerance
                );
            }
            return Ok(ok);
        }
    }
    Ok(true)
}
