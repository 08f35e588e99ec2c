// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pipeline stages and the artifacts they write.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use censeg_core::anomaly::{rank_clusters, ClusterScore, RankOptions};
use censeg_core::censored_weibull::FeasibleBox;
use censeg_core::changepoint::{segment_pipeline, SegmentOptions, SegmentResult, SegmentationReport};
use censeg_core::ingest::{active_stations, build_coarse_series, parse_measurements, parse_naiades, CoarseSeries, Measurement};
use censeg_core::spatial_cluster::{default_cluster_range, greedy_global_hierarchy, select_clustering, ClusterError, ClusterHierarchy};
use censeg_core::station_graph::{build_station_graph, read_stations, ExportStation, RiverNetwork, StationGraph};
use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, Source};
use crate::simulate::write_toy;
use crate::svg;

/// An input file that does not exist.
#[derive(Debug)]
pub struct MissingInput(pub PathBuf);

impl fmt::Display for MissingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "missing input file {}", self.0.display())
    }
}

impl std::error::Error for MissingInput {}

/// Tag an error with the module it came from.
pub fn stage<T, E: Into<anyhow::Error>>(module: &'static str, r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| e.into().context(module))
}

pub fn open_input(path: &Path) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == ErrorKind::NotFound => Err(MissingInput(path.to_path_buf()).into()),
        Err(e) => Err(e).with_context(|| format!("opening {}", path.display())),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let reader = open_input(path)?;
    serde_json::from_reader(reader).with_context(|| format!("parsing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn feasible_box(rate: (f64, f64), shape: (f64, f64)) -> FeasibleBox<f64> {
    FeasibleBox {
        rate_min: rate.0,
        rate_max: rate.1,
        shape_min: shape.0,
        shape_max: shape.1,
    }
}

// ---- ingest ----

pub fn read_measurements(path: &Path, naiades: bool) -> Result<Vec<Measurement<f64>>> {
    let reader = open_input(path).context("ingest")?;
    let ms = if naiades { parse_naiades(reader) } else { parse_measurements(reader) };
    stage("ingest", ms.with_context(|| format!("reading {}", path.display())))
}

pub fn coarse_series(ms: &[Measurement<f64>]) -> Result<CoarseSeries<f64>> {
    stage("ingest", build_coarse_series(ms))
}

pub fn read_coarse(path: &Path) -> Result<CoarseSeries<f64>> {
    let reader = open_input(path).context("ingest")?;
    stage("ingest", CoarseSeries::read_csv(reader).with_context(|| format!("reading {}", path.display())))
}

pub fn write_coarse(path: &Path, series: &CoarseSeries<f64>) -> Result<()> {
    let mut out = create(path)?;
    stage("ingest", series.write_csv(&mut out))?;
    out.flush()?;
    Ok(())
}

// ---- segmentation ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub penalty: f64,
    pub change_points: usize,
    pub raw_cost: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPathReport {
    /// Entries by increasing change-point count.
    pub entries: Vec<PathPoint>,
    /// Index into `entries` chosen by the elbow rule, if it applied.
    pub selected: Option<usize>,
}

pub struct Segmented {
    pub result: SegmentResult<f64>,
    pub report: SegmentationReport<f64>,
    pub path: PenaltyPathReport,
}

pub fn segment(series: &CoarseSeries<f64>, opts: &SegmentOptions<f64>) -> Result<Segmented> {
    let result = stage("changepoint", segment_pipeline(series, opts))?;
    let report = SegmentationReport::new(series, result.shape, &result.selected);
    let n = result.path.entries.len();
    let path = PenaltyPathReport {
        entries: result
            .path
            .entries
            .iter()
            .rev()
            .map(|e| PathPoint {
                penalty: e.penalty,
                change_points: e.segmentation.change_points(),
                raw_cost: e.segmentation.raw_cost,
                cost: e.segmentation.cost,
            })
            .collect(),
        selected: result.elbow_index.map(|i| n - 1 - i),
    };
    Ok(Segmented { result, report, path })
}

pub fn write_segmentation(dir: &Path, series: &CoarseSeries<f64>, seg: &Segmented) -> Result<()> {
    write_json(&dir.join("segmentation.json"), &seg.report)?;
    write_json(&dir.join("penalty_path.json"), &seg.path)?;
    let points: Vec<svg::SeriesPoint> = series
        .entries
        .iter()
        .enumerate()
        .map(|(index, e)| svg::SeriesPoint { index, value: e.y_bar, censored: e.censored })
        .collect();
    let spans: Vec<(usize, usize, f64)> = seg
        .result
        .selected
        .segments()
        .into_iter()
        .zip(&seg.result.selected.rates)
        .map(|((a, b), &r)| (a, b, r))
        .collect();
    write_text(&dir.join("segmentation.svg"), &svg::series_plot("Daily maxima and segment scales", &points, &spans))?;
    let curve: Vec<(f64, f64)> = seg.path.entries.iter().map(|p| (p.change_points as f64, p.raw_cost)).collect();
    write_text(
        &dir.join("penalty_elbow.svg"),
        &svg::elbow_plot("Unpenalised cost along the penalty path", "change points", "cost", &curve, seg.path.selected),
    )?;
    Ok(())
}

/// A chosen stationary segment; `index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalRef {
    pub index: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

/// Resolve a 1-based segment request, or by default the least intense
/// segment: the non-degenerate one with the largest rate, longest first on
/// ties.
pub fn choose_interval(report: &SegmentationReport<f64>, requested: Option<usize>) -> Result<IntervalRef> {
    let n = report.segments.len();
    let idx = match requested {
        Some(l) if (1..=n).contains(&l) => l - 1,
        Some(l) => return Err(anyhow!("interval {l} out of range: the segmentation has {n} segments")),
        None => {
            let pool: Vec<usize> = if report.segments.iter().all(|s| s.degenerate) {
                (0..n).collect()
            } else {
                (0..n).filter(|&i| !report.segments[i].degenerate).collect()
            };
            pool.into_iter()
                .reduce(|best, i| {
                    let (a, b) = (&report.segments[best], &report.segments[i]);
                    if b.lambda > a.lambda || (b.lambda == a.lambda && b.entries > a.entries) {
                        i
                    } else {
                        best
                    }
                })
                .ok_or_else(|| anyhow!("the segmentation is empty"))?
        }
    };
    let s = &report.segments[idx];
    Ok(IntervalRef { index: idx + 1, start: s.start, end: s.end })
}

// ---- station graph and clustering ----

pub fn read_graph(stations: &Path, nodes: &Path, sections: &Path) -> Result<StationGraph<f64>> {
    let st = stage("station_graph", read_stations(open_input(stations).context("station_graph")?))
        .with_context(|| format!("reading {}", stations.display()))?;
    let river = stage(
        "station_graph",
        RiverNetwork::read_csv(open_input(nodes).context("station_graph")?, open_input(sections).context("station_graph")?),
    )
    .with_context(|| format!("reading {} and {}", nodes.display(), sections.display()))?;
    stage("station_graph", build_station_graph(&st, &river))
}

pub struct Clustered {
    pub graph: StationGraph<f64>,
    pub hierarchy: ClusterHierarchy<f64>,
    pub level: usize,
    pub range: (usize, usize),
    pub fallback: Option<String>,
    /// Active stations missing from the station file.
    pub dropped: Vec<String>,
}

impl Clustered {
    pub fn clusters(&self) -> Vec<Vec<String>> {
        self.hierarchy.levels[self.level]
            .clusters
            .iter()
            .map(|c| c.iter().map(|&s| self.graph.stations[s].id.clone()).collect())
            .collect()
    }
}

/// Cluster the stations of `active` on the graph they induce.
///
/// When fewer than five levels fall in the range, every level is tried; when
/// even that is too few, the one-cluster-per-component level is kept.
pub fn cluster(full: &StationGraph<f64>, active: &BTreeSet<String>, range: Option<(usize, usize)>) -> Result<Clustered> {
    let (keep, dropped): (BTreeSet<String>, Vec<String>) = {
        let mut keep = BTreeSet::new();
        let mut dropped = Vec::new();
        for id in active {
            if full.index_of(id).is_some() {
                keep.insert(id.clone());
            } else {
                dropped.push(id.clone());
            }
        }
        (keep, dropped)
    };
    let graph = stage("station_graph", full.induced_subgraph(&keep))?;
    let hierarchy = stage("spatial_cluster", greedy_global_hierarchy(&graph))?;
    let range = range.unwrap_or_else(|| default_cluster_range(&hierarchy));
    let (level, fallback) = match select_clustering(&hierarchy, range) {
        Ok(l) => (l, None),
        Err(ClusterError::TooFewLevels { .. }) => {
            let all = (1, graph.len());
            match select_clustering(&hierarchy, all) {
                Ok(l) => (l, Some(format!("fewer than 5 levels in {range:?}; used every level"))),
                Err(ClusterError::TooFewLevels { .. }) => (0, Some("fewer than 5 levels; one cluster per component".to_string())),
                Err(e) => return Err(anyhow::Error::from(e).context("spatial_cluster")),
            }
        }
        Err(e) => return Err(anyhow::Error::from(e).context("spatial_cluster")),
    };
    Ok(Clustered { graph, hierarchy, level, range, fallback, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n_clusters: usize,
    pub inertia: f64,
    pub split_component: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub interval: Option<IntervalRef>,
    pub stations: Vec<ExportStation<f64>>,
    pub cluster_range: (usize, usize),
    pub selected_level: usize,
    pub inertia: f64,
    /// Station ids per cluster; the cluster id is the position.
    pub clusters: Vec<Vec<String>>,
    pub levels: Vec<LevelSummary>,
    pub fallback: Option<String>,
    pub dropped_stations: Vec<String>,
}

impl ClusteringReport {
    pub fn new(c: &Clustered, interval: Option<IntervalRef>) -> Self {
        let h = &c.hierarchy;
        Self {
            interval,
            stations: c.graph.export().stations,
            cluster_range: c.range,
            selected_level: c.level,
            inertia: h.levels[c.level].inertia,
            clusters: c.clusters(),
            levels: h
                .levels
                .iter()
                .zip(&h.split_component)
                .map(|(l, &s)| LevelSummary { n_clusters: l.len(), inertia: l.inertia, split_component: s })
                .collect(),
            fallback: c.fallback.clone(),
            dropped_stations: c.dropped.clone(),
        }
    }
}

pub fn write_clustering(dir: &Path, c: &Clustered, report: &ClusteringReport) -> Result<()> {
    let mut out = create(&dir.join("clustering.csv"))?;
    stage("spatial_cluster", c.hierarchy.levels[c.level].write_csv(&c.graph, &mut out))?;
    out.flush()?;
    write_json(&dir.join("clustering.json"), report)?;
    write_json(&dir.join("station_graph.json"), &c.graph.export())?;
    let curve: Vec<(f64, f64)> = report.levels.iter().map(|l| (l.n_clusters as f64, l.inertia)).collect();
    write_text(
        &dir.join("inertia_elbow.svg"),
        &svg::elbow_plot("Inertia against cluster count", "clusters", "inertia", &curve, Some(report.selected_level)),
    )
}

// ---- anomaly ranking ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub interval: IntervalRef,
    pub sigma_hat: f64,
    pub clusters: Vec<ClusterScore<f64>>,
}

pub fn rank(
    clusters: &[Vec<String>],
    ms: &[Measurement<f64>],
    interval: IntervalRef,
    shape: f64,
    opts: &RankOptions<f64>,
) -> Result<AnomalyReport> {
    let scores = stage("anomaly", rank_clusters(clusters, ms, (interval.start, interval.end), shape, opts))?;
    Ok(AnomalyReport { interval, sigma_hat: shape, clusters: scores })
}

pub fn anomaly_csv(report: &AnomalyReport) -> String {
    let mut out = String::from("cluster_id,n_stations,n_measurements,n_quantified,W_bar,I_bar,lambda,pareto_level,flags,stations\n");
    for c in &report.clusters {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            c.id,
            c.stations.len(),
            c.n_measurements,
            c.n_quantified,
            c.w_bar,
            c.i_bar,
            c.lambda,
            c.pareto_level.map(|l| l.to_string()).unwrap_or_default(),
            c.flags.join(";"),
            c.stations.join(";"),
        ));
    }
    out
}

pub fn write_anomaly(dir: &Path, report: &AnomalyReport, clustering: &ClusteringReport) -> Result<()> {
    write_json(&dir.join("anomaly_report.json"), report)?;
    write_text(&dir.join("anomaly_report.csv"), &anomaly_csv(report))?;
    let points: Vec<svg::ScorePoint> = report
        .clusters
        .iter()
        .map(|c| svg::ScorePoint { id: c.id, w: c.w_bar, i: c.i_bar, level: c.pareto_level })
        .collect();
    write_text(&dir.join("pareto.svg"), &svg::pareto_plot("Cluster heterogeneity and intensity", &points))?;
    let stations: Vec<svg::MapStation> = clustering
        .stations
        .iter()
        .map(|s| {
            let score = report.clusters.iter().find(|c| c.stations.contains(&s.id));
            svg::MapStation {
                id: s.id.clone(),
                x: s.x,
                y: s.y,
                level: score.and_then(|c| c.pareto_level),
                cluster: score.map(|c| c.id),
            }
        })
        .collect();
    write_text(&dir.join("station_map.svg"), &svg::station_map("Stations by Pareto level", &stations))
}

// ---- full pipeline ----

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSummary {
    pub interval: IntervalRef,
    pub dir: PathBuf,
    pub n_clusters: usize,
    /// Station ids of every level-1 cluster.
    pub level_one: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub sigma_hat: f64,
    pub breaks: Vec<NaiveDate>,
    pub intervals: Vec<IntervalSummary>,
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    let (measurements, naiades, nodes, sections, stations) = match &cfg.source {
        Source::Files { measurements, naiades, river_nodes, river_sections, stations } => {
            (measurements.clone(), *naiades, river_nodes.clone(), river_sections.clone(), stations.clone())
        }
        Source::Toy => {
            let dir = cfg.output.join("input");
            stage("simulate", write_toy(&dir, cfg.seed))?;
            (
                dir.join("measurements.csv"),
                false,
                dir.join("river_nodes.csv"),
                dir.join("river_sections.csv"),
                dir.join("stations.csv"),
            )
        }
    };
    let bounds = feasible_box(cfg.rate_bounds, cfg.shape_bounds);
    stage("cli", bounds.validate())?;

    let ms = read_measurements(&measurements, naiades)?;
    let series = coarse_series(&ms)?;
    write_coarse(&cfg.output.join("coarse.csv"), &series)?;

    let opts = SegmentOptions { min_seg_len: cfg.min_seg_len, penalty_factors: cfg.penalty_factors, bounds };
    let seg = segment(&series, &opts)?;
    write_segmentation(&cfg.output, &series, &seg)?;

    let graph = read_graph(&stations, &nodes, &sections)?;
    let intervals: Vec<IntervalRef> = if cfg.all_intervals {
        (1..=seg.report.segments.len()).map(|l| choose_interval(&seg.report, Some(l))).collect::<Result<_>>()?
    } else {
        vec![stage("cli", choose_interval(&seg.report, cfg.interval))?]
    };

    let rank_opts = RankOptions { include_degenerate: cfg.include_degenerate, bounds };
    let mut summaries = Vec::new();
    for interval in intervals {
        let dir = if cfg.all_intervals { cfg.output.join(format!("interval_{:02}", interval.index)) } else { cfg.output.clone() };
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let active = active_stations(&ms, interval.start, interval.end);
        let clustered = cluster(&graph, &active, cfg.cluster_range)
            .with_context(|| format!("interval {} ({} to {})", interval.index, interval.start, interval.end))?;
        for id in &clustered.dropped {
            eprintln!("warning: station {id} has measurements but no coordinates; skipped");
        }
        let creport = ClusteringReport::new(&clustered, Some(interval));
        write_clustering(&dir, &clustered, &creport)?;
        let areport = rank(&creport.clusters, &ms, interval, seg.result.shape, &rank_opts)?;
        write_anomaly(&dir, &areport, &creport)?;
        summaries.push(IntervalSummary {
            interval,
            dir,
            n_clusters: creport.clusters.len(),
            level_one: areport
                .clusters
                .iter()
                .filter(|c| c.pareto_level == Some(1))
                .map(|c| c.stations.clone())
                .collect(),
        });
    }
    Ok(PipelineSummary { sigma_hat: seg.result.shape, breaks: seg.report.breaks.clone(), intervals: summaries })
}
