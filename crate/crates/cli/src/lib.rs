// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end: stage-by-stage subcommands, the full pipeline and
//! the synthetic data generator.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use censeg_core::anomaly::RankOptions;
use censeg_core::changepoint::{SegmentOptions, SegmentationReport};
use censeg_core::ingest::active_stations;
use clap::{Args, Parser, Subcommand};

pub mod config;
pub mod pipeline;
pub mod simulate;
pub mod svg;

use config::{PipelineConfig, SEED_ENV};
use pipeline::{stage, ClusteringReport, MissingInput};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_MISSING_INPUT: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "censeg", version, about = "Spatio-temporal anomaly detection in censored monitoring data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Bounds {
    #[arg(long, default_value_t = 1e-6)]
    rate_min: f64,
    #[arg(long, default_value_t = 1e6)]
    rate_max: f64,
    #[arg(long, default_value_t = 0.05)]
    shape_min: f64,
    #[arg(long, default_value_t = 20.0)]
    shape_max: f64,
}

impl Bounds {
    fn feasible(&self) -> Result<censeg_core::FeasibleBox64> {
        let b = pipeline::feasible_box((self.rate_min, self.rate_max), (self.shape_min, self.shape_max));
        stage("cli", b.validate())?;
        Ok(b)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read measurements and write the daily-maximum series.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Input is a Naïades analysis export.
        #[arg(long)]
        naiade: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Segment a daily-maximum series into stationary intervals.
    Segment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        penalty_min_factor: f64,
        #[arg(long, default_value_t = 5.0)]
        penalty_max_factor: f64,
        #[arg(long, default_value_t = 2)]
        min_seg_len: usize,
        #[command(flatten)]
        bounds: Bounds,
    },
    /// Cluster stations along the river network.
    Cluster {
        #[arg(long)]
        stations: PathBuf,
        #[arg(long)]
        river_nodes: PathBuf,
        #[arg(long)]
        river_sections: PathBuf,
        /// Restrict to stations active in a segment; needs --segmentation.
        #[arg(long)]
        measurements: Option<PathBuf>,
        #[arg(long)]
        segmentation: Option<PathBuf>,
        /// 1-based segment; defaults to the least intense one.
        #[arg(long)]
        interval: Option<usize>,
        #[arg(long, requires = "cluster_max")]
        cluster_min: Option<usize>,
        #[arg(long, requires = "cluster_min")]
        cluster_max: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Score and rank clusters on one segment.
    Rank {
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long)]
        segmentation: PathBuf,
        #[arg(long)]
        clustering: PathBuf,
        /// 1-based segment; defaults to the clustering's, then the least intense one.
        #[arg(long)]
        interval: Option<usize>,
        #[arg(long)]
        include_degenerate: bool,
        #[command(flatten)]
        bounds: Bounds,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate synthetic measurements with known ground truth.
    Simulate {
        /// JSON simulation spec.
        #[arg(long, conflicts_with = "toy", required_unless_present = "toy")]
        spec: Option<PathBuf>,
        /// Write the bundled toy fixture instead.
        #[arg(long)]
        toy: bool,
        #[arg(long, env = SEED_ENV, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run every stage from a config file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        all_intervals: bool,
        #[arg(long)]
        interval: Option<usize>,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest { input, naiade, out } => {
            let ms = pipeline::read_measurements(&input, naiade)?;
            let series = pipeline::coarse_series(&ms)?;
            mkdir(&out)?;
            simulate::write_measurements_csv(&out.join("measurements.csv"), &ms)?;
            pipeline::write_coarse(&out.join("coarse.csv"), &series)?;
            println!("{} measurements, {} days -> {}", ms.len(), series.len(), out.display());
        }
        Command::Segment { input, out, penalty_min_factor, penalty_max_factor, min_seg_len, bounds } => {
            let cfg = PipelineConfig {
                penalty_factors: (penalty_min_factor, penalty_max_factor),
                min_seg_len,
                ..PipelineConfig::default()
            };
            stage("cli", cfg.validate())?;
            let series = pipeline::read_coarse(&input)?;
            let opts = SegmentOptions { min_seg_len, penalty_factors: cfg.penalty_factors, bounds: bounds.feasible()? };
            let seg = pipeline::segment(&series, &opts)?;
            mkdir(&out)?;
            pipeline::write_segmentation(&out, &series, &seg)?;
            println!("sigma_hat {:.4}, {} breaks -> {}", seg.report.sigma_hat, seg.report.breaks.len(), out.display());
        }
        Command::Cluster { stations, river_nodes, river_sections, measurements, segmentation, interval, cluster_min, cluster_max, out } => {
            let range = cluster_min.zip(cluster_max);
            if let Some((lo, hi)) = range {
                if lo == 0 || hi < lo {
                    return Err(anyhow!("cluster range must satisfy 1 <= min <= max")).context("cli");
                }
            }
            let graph = pipeline::read_graph(&stations, &river_nodes, &river_sections)?;
            let (active, chosen) = match (measurements, segmentation) {
                (Some(m), Some(s)) => {
                    let ms = pipeline::read_measurements(&m, false)?;
                    let report: SegmentationReport<f64> = pipeline::read_json(&s).context("changepoint")?;
                    let iv = stage("cli", pipeline::choose_interval(&report, interval))?;
                    (active_stations(&ms, iv.start, iv.end), Some(iv))
                }
                (None, None) => (graph.stations.iter().map(|s| s.id.clone()).collect::<BTreeSet<_>>(), None),
                _ => return Err(anyhow!("--measurements and --segmentation go together")).context("cli"),
            };
            let clustered = pipeline::cluster(&graph, &active, range)?;
            for id in &clustered.dropped {
                eprintln!("warning: station {id} has measurements but no coordinates; skipped");
            }
            let report = ClusteringReport::new(&clustered, chosen);
            mkdir(&out)?;
            pipeline::write_clustering(&out, &clustered, &report)?;
            println!("{} clusters of {} stations -> {}", report.clusters.len(), report.stations.len(), out.display());
        }
        Command::Rank { measurements, segmentation, clustering, interval, include_degenerate, bounds, out } => {
            let ms = pipeline::read_measurements(&measurements, false)?;
            let seg: SegmentationReport<f64> = pipeline::read_json(&segmentation).context("changepoint")?;
            let creport: ClusteringReport = pipeline::read_json(&clustering).context("spatial_cluster")?;
            let requested = interval.or(creport.interval.map(|iv| iv.index));
            let iv = stage("cli", pipeline::choose_interval(&seg, requested))?;
            let opts = RankOptions { include_degenerate, bounds: bounds.feasible()? };
            let report = pipeline::rank(&creport.clusters, &ms, iv, seg.sigma_hat, &opts)?;
            mkdir(&out)?;
            pipeline::write_anomaly(&out, &report, &creport)?;
            let top = report.clusters.iter().filter(|c| c.pareto_level == Some(1)).count();
            println!("interval {}: {} clusters, {} at level 1 -> {}", iv.index, report.clusters.len(), top, out.display());
        }
        Command::Simulate { spec, toy, seed, out } => {
            let truth = if toy {
                stage("simulate", simulate::write_toy(&out, seed))?
            } else {
                let path = spec.ok_or_else(|| anyhow!("--spec or --toy is required"))?;
                if !path.exists() {
                    return Err(MissingInput(path).into());
                }
                let spec = stage("simulate", simulate::read_spec(&path))?;
                stage("simulate", simulate::write_simulation(&out, &spec, seed))?
            };
            println!(
                "{} measurements, {:.1}% censored, {} breaks -> {}",
                truth.n_measurements,
                100.0 * truth.censored_fraction,
                truth.breaks.len(),
                out.display()
            );
        }
        Command::Pipeline { config, all_intervals, interval, out } => {
            if !config.exists() {
                return Err(MissingInput(config).into());
            }
            let mut cfg = stage("cli", PipelineConfig::load(&config).and_then(PipelineConfig::with_env_seed))?;
            cfg.all_intervals |= all_intervals;
            if interval.is_some() {
                cfg.interval = interval;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            let summary = pipeline::run_pipeline(&cfg)?;
            println!("sigma_hat {:.4}, {} breaks", summary.sigma_hat, summary.breaks.len());
            for s in &summary.intervals {
                println!(
                    "interval {} ({} to {}): {} clusters, level 1: {:?} -> {}",
                    s.interval.index,
                    s.interval.start,
                    s.interval.end,
                    s.n_clusters,
                    s.level_one,
                    s.dir.display()
                );
            }
        }
    }
    Ok(())
}

/// Exit status for an error: 2 for a missing input file, 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    if e.chain().any(|c| c.is::<MissingInput>()) {
        EXIT_MISSING_INPUT
    } else {
        EXIT_FAILURE
    }
}

/// Parse `args` (program name first), run, and return the exit status.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("censeg: {e:#}");
            exit_code(&e)
        }
    }
}
