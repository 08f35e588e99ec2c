// SPDX-License-Identifier: MIT OR Apache-2.0

//! Flat `key = value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` or `;` are ignored, as are
//! `[section]` headers. Relative paths resolve against the config file's
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

/// Where the measurements come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Files on disk.
    Files {
        measurements: PathBuf,
        naiades: bool,
        river_nodes: PathBuf,
        river_sections: PathBuf,
        stations: PathBuf,
    },
    /// Generate the toy fixture from the seed into `<output>/input`.
    Toy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub source: Source,
    pub output: PathBuf,
    pub penalty_factors: (f64, f64),
    /// Cluster-count range; `None` uses the component count up to 35.
    pub cluster_range: Option<(usize, usize)>,
    pub min_seg_len: usize,
    pub rate_bounds: (f64, f64),
    pub shape_bounds: (f64, f64),
    pub seed: u64,
    /// 1-based segment for the spatial stage.
    pub interval: Option<usize>,
    pub all_intervals: bool,
    pub include_degenerate: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            source: Source::Toy,
            output: PathBuf::from("out"),
            penalty_factors: (0.2, 5.0),
            cluster_range: None,
            min_seg_len: 2,
            rate_bounds: (1e-6, 1e6),
            shape_bounds: (0.05, 20.0),
            seed: 1,
            interval: None,
            all_intervals: false,
            include_degenerate: false,
        }
    }
}

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "CENSEG_SEED";

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
        let key = k.trim().to_ascii_lowercase();
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            bail!("line {}: duplicate key {key:?}", n + 1);
        }
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    map.remove(key)
        .map(|v| v.parse::<T>().map_err(|e| anyhow!("{key} = {v:?}: {e}")))
        .transpose()
}

fn flag(map: &mut BTreeMap<String, String>, key: &str) -> Result<Option<bool>> {
    map.remove(key)
        .map(|v| match v.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" | "on" => Ok(true),
            "false" | "no" | "0" | "off" => Ok(false),
            _ => Err(anyhow!("{key} = {v:?}: expected a boolean")),
        })
        .transpose()
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut map = parse_pairs(text)?;
        let mut cfg = Self::default();
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };

        let source = map.remove("source").unwrap_or_else(|| "files".into());
        cfg.source = match source.as_str() {
            "toy" => Source::Toy,
            "files" => {
                let mut need = |k: &str| map.remove(k).map(resolve).ok_or_else(|| anyhow!("missing key {k:?}"));
                let measurements = need("measurements")?;
                let river_nodes = need("river_nodes")?;
                let river_sections = need("river_sections")?;
                let stations = need("stations")?;
                Source::Files {
                    measurements,
                    naiades: flag(&mut map, "naiades")?.unwrap_or(false),
                    river_nodes,
                    river_sections,
                    stations,
                }
            }
            other => bail!("source = {other:?}: expected files or toy"),
        };
        cfg.output = resolve(map.remove("output").unwrap_or_else(|| "out".into()));
        let pmin = num(&mut map, "penalty_min_factor")?.unwrap_or(cfg.penalty_factors.0);
        let pmax = num(&mut map, "penalty_max_factor")?.unwrap_or(cfg.penalty_factors.1);
        cfg.penalty_factors = (pmin, pmax);
        let cmin: Option<usize> = num(&mut map, "cluster_min")?;
        let cmax: Option<usize> = num(&mut map, "cluster_max")?;
        cfg.cluster_range = match (cmin, cmax) {
            (None, None) => None,
            (Some(a), Some(b)) => Some((a, b)),
            _ => bail!("cluster_min and cluster_max go together"),
        };
        cfg.min_seg_len = num(&mut map, "min_seg_len")?.unwrap_or(cfg.min_seg_len);
        cfg.rate_bounds = (
            num(&mut map, "rate_min")?.unwrap_or(cfg.rate_bounds.0),
            num(&mut map, "rate_max")?.unwrap_or(cfg.rate_bounds.1),
        );
        cfg.shape_bounds = (
            num(&mut map, "shape_min")?.unwrap_or(cfg.shape_bounds.0),
            num(&mut map, "shape_max")?.unwrap_or(cfg.shape_bounds.1),
        );
        cfg.seed = num(&mut map, "seed")?.unwrap_or(cfg.seed);
        cfg.interval = num(&mut map, "interval")?;
        cfg.all_intervals = flag(&mut map, "all_intervals")?.unwrap_or(false);
        cfg.include_degenerate = flag(&mut map, "include_degenerate")?.unwrap_or(false);
        if let Some(k) = map.keys().next() {
            bail!("unknown key {k:?}");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply the `CENSEG_SEED` override, if set.
    pub fn with_env_seed(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?}"))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.penalty_factors;
        if !(a >= 0.0 && b > a && b.is_finite()) {
            bail!("penalty factors must satisfy 0 <= min < max, got ({a}, {b})");
        }
        if let Some((lo, hi)) = self.cluster_range {
            if lo == 0 || hi < lo {
                bail!("cluster range must satisfy 1 <= min <= max, got ({lo}, {hi})");
            }
        }
        if self.min_seg_len == 0 {
            bail!("min_seg_len must be positive");
        }
        if self.interval == Some(0) {
            bail!("interval is 1-based");
        }
        Ok(())
    }
}
