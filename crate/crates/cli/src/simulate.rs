// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic monitoring data with known regimes, clusters and planted
//! anomalies.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use censeg_core::ingest::{write_measurements, Measurement};
use censeg_core::station_graph::{RiverNetwork, Station};
use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub start: NaiveDate,
    /// Weibull rate of concentrations in this regime.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStation {
    pub id: String,
    pub x_m: f64,
    pub y_m: f64,
    pub loq: f64,
    /// Mean number of days between two samples.
    pub mean_gap_days: f64,
    /// Ground-truth spatial group.
    pub group: String,
    /// Concentration multiplier per regime index; absent means 1.
    #[serde(default)]
    pub boost: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Weibull shape shared by every regime.
    pub shape: f64,
    pub regimes: Vec<RegimeSpec>,
    pub stations: Vec<SimStation>,
    /// Mean days between network-wide sampling campaigns. When set, stations
    /// only sample on campaign days, each attending with probability
    /// `campaign_gap_days / mean_gap_days` (capped at 1).
    #[serde(default)]
    pub campaign_gap_days: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedAnomaly {
    pub group: String,
    pub regime: usize,
    pub factor: f64,
    pub stations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    /// First day of every regime after the first.
    pub breaks: Vec<NaiveDate>,
    pub regimes: Vec<RegimeSpec>,
    pub groups: BTreeMap<String, Vec<String>>,
    pub planted: Vec<PlantedAnomaly>,
    pub n_measurements: usize,
    pub censored_fraction: f64,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.end >= self.start, "end {} precedes start {}", self.end, self.start);
        ensure!(self.shape > 0.0 && self.shape.is_finite(), "shape must be positive");
        ensure!(!self.regimes.is_empty(), "at least one regime is required");
        ensure!(self.regimes[0].start == self.start, "the first regime must begin on the start date");
        for w in self.regimes.windows(2) {
            ensure!(w[1].start > w[0].start, "regime starts must increase ({} then {})", w[0].start, w[1].start);
        }
        ensure!(self.regimes.last().is_none_or(|r| r.start <= self.end), "a regime starts after the end date");
        for r in &self.regimes {
            ensure!(r.rate > 0.0 && r.rate.is_finite(), "regime rate {} is not positive", r.rate);
        }
        ensure!(!self.stations.is_empty(), "at least one station is required");
        if let Some(g) = self.campaign_gap_days {
            ensure!(g >= 1.0 && g.is_finite(), "campaign gap must be at least one day");
        }
        let mut ids = BTreeSet::new();
        for s in &self.stations {
            ensure!(ids.insert(&s.id), "duplicate station id {:?}", s.id);
            ensure!(s.loq > 0.0 && s.loq.is_finite(), "station {}: LOQ must be positive", s.id);
            ensure!(s.mean_gap_days >= 1.0, "station {}: mean gap must be at least one day", s.id);
            for (&r, &f) in &s.boost {
                ensure!(r < self.regimes.len(), "station {}: boost for missing regime {r}", s.id);
                ensure!(f > 0.0 && f.is_finite(), "station {}: boost factor must be positive", s.id);
            }
        }
        Ok(())
    }

    fn regime_at(&self, day: NaiveDate) -> usize {
        self.regimes.iter().rposition(|r| r.start <= day).unwrap_or(0)
    }
}

/// Day offsets in `[0, days]` with a random start and gaps of one day plus
/// a rounded-down exponential, so the mean gap is close to `mean_gap`.
fn gap_process<R: Rng>(rng: &mut R, mean_gap: f64, days: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut t = (rng.gen::<f64>() * mean_gap).floor() as u64;
    while t <= days {
        out.push(t);
        let g: f64 = rng.gen();
        t += 1 + (-(mean_gap - 1.0) * (1.0 - g).ln()).floor() as u64;
    }
    out
}

/// Draw measurements from `spec`. Each station samples at irregular dates
/// (or on shared campaign days), values are Weibull draws scaled by the
/// station's boost, and values below the LOQ are censored.
pub fn simulate(spec: &SimulationSpec, seed: u64) -> Result<(Vec<Measurement<f64>>, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let days = (spec.end - spec.start).num_days() as u64;
    let mut out = Vec::new();
    let campaigns: Option<Vec<u64>> = spec.campaign_gap_days.map(|g| gap_process(&mut rng, g, days));
    for s in &spec.stations {
        let sampled = match &campaigns {
            Some(days_on) => {
                let p = (spec.campaign_gap_days.unwrap_or(1.0) / s.mean_gap_days).min(1.0);
                days_on.iter().copied().filter(|_| rng.gen::<f64>() < p).collect()
            }
            None => gap_process(&mut rng, s.mean_gap_days, days),
        };
        for t in sampled {
            let date = spec.start + Days::new(t);
            let r = spec.regime_at(date);
            let u: f64 = rng.gen();
            let base = (-(1.0 - u).ln()).powf(1.0 / spec.shape) / spec.regimes[r].rate;
            let y = base * s.boost.get(&r).copied().unwrap_or(1.0);
            let value = (y >= s.loq).then_some(y);
            out.push(Measurement::new(s.id.clone(), date, s.loq, value).map_err(anyhow::Error::msg)?);
        }
    }
    out.sort_by(|a, b| (a.date, &a.station_id).cmp(&(b.date, &b.station_id)));

    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for s in &spec.stations {
        groups.entry(s.group.clone()).or_default().push(s.id.clone());
    }
    let mut planted: BTreeMap<(String, usize, u64), Vec<String>> = BTreeMap::new();
    for s in &spec.stations {
        for (&r, &f) in &s.boost {
            if f != 1.0 {
                planted.entry((s.group.clone(), r, f.to_bits())).or_default().push(s.id.clone());
            }
        }
    }
    let censored = out.iter().filter(|m| m.value.is_none()).count();
    let truth = GroundTruth {
        seed,
        breaks: spec.regimes.iter().skip(1).map(|r| r.start).collect(),
        regimes: spec.regimes.clone(),
        groups,
        planted: planted
            .into_iter()
            .map(|((group, regime, bits), stations)| PlantedAnomaly {
                group,
                regime,
                factor: f64::from_bits(bits),
                stations,
            })
            .collect(),
        n_measurements: out.len(),
        censored_fraction: if out.is_empty() { 0.0 } else { censored as f64 / out.len() as f64 },
    };
    Ok((out, truth))
}

/// Toy fixture: three disjoint rivers, each with two tight groups of two
/// stations at opposite ends, over two years alternating an off-peak regime
/// with an autumn peak thirty times more intense. One group, picked by the
/// seed, is ten times more concentrated during the off-peak regimes.
pub struct ToyFixture {
    pub spec: SimulationSpec,
    pub river: RiverNetwork<f64>,
    pub stations: Vec<Station<f64>>,
}

pub const TOY_SHAPE: f64 = 0.7;
pub const TOY_OFF_PEAK_RATE: f64 = 50.0;
pub const TOY_PEAK_RATIO: f64 = 30.0;
pub const TOY_PLANTED_FACTOR: f64 = 10.0;
pub const TOY_CAMPAIGN_GAP: f64 = 4.0;

pub fn toy_fixture(seed: u64) -> ToyFixture {
    // separate stream from the measurement draws
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_70F1);
    let day = |y, m, d| NaiveDate::from_ymd_opt(y, m, d).expect("valid date");
    let off = TOY_OFF_PEAK_RATE;
    let peak = TOY_OFF_PEAK_RATE / TOY_PEAK_RATIO;
    let regimes = vec![
        RegimeSpec { start: day(2018, 1, 1), rate: off },
        RegimeSpec { start: day(2018, 10, 1), rate: peak },
        RegimeSpec { start: day(2019, 1, 1), rate: off },
        RegimeSpec { start: day(2019, 10, 1), rate: peak },
    ];
    let off_peak: Vec<usize> = vec![0, 2];

    let spacing = 100.0;
    let per_river = 31;
    let mut nodes = Vec::new();
    let mut sections = Vec::new();
    for r in 0..3 {
        let first = nodes.len();
        for k in 0..per_river {
            nodes.push([k as f64 * spacing, r as f64 * 10_000.0]);
            if k > 0 {
                sections.push((first + k - 1, first + k, spacing));
            }
        }
    }
    let river = RiverNetwork::new(nodes, sections).expect("toy river is valid");

    let planted_group = rng.gen_range(0..6);
    let loqs = [0.02, 0.03, 0.05];
    let mut sim_stations = Vec::new();
    for r in 0..3 {
        for end in 0..2 {
            let g = r * 2 + end;
            let lo = if end == 0 { 100.0 } else { 2500.0 };
            for k in 0..2 {
                let x = lo + rng.gen_range(0.0..300.0);
                let y = r as f64 * 10_000.0 + rng.gen_range(-40.0..40.0);
                let boost = if g == planted_group {
                    off_peak.iter().map(|&i| (i, TOY_PLANTED_FACTOR)).collect()
                } else {
                    BTreeMap::new()
                };
                sim_stations.push(SimStation {
                    id: format!("{}{:02}", (b'A' + r as u8) as char, end * 2 + k + 1),
                    x_m: x,
                    y_m: y,
                    loq: loqs[rng.gen_range(0..loqs.len())],
                    mean_gap_days: rng.gen_range(4.0..4.8),
                    group: format!("G{}", g + 1),
                    boost,
                });
            }
        }
    }
    let stations = sim_stations.iter().map(|s| Station::new(s.id.clone(), s.x_m, s.y_m)).collect();
    ToyFixture {
        spec: SimulationSpec {
            start: day(2018, 1, 1),
            end: day(2019, 12, 31),
            shape: TOY_SHAPE,
            regimes,
            stations: sim_stations,
            campaign_gap_days: Some(TOY_CAMPAIGN_GAP),
        },
        river,
        stations,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_river(dir: &Path, river: &RiverNetwork<f64>) -> Result<()> {
    let mut nodes = String::from("node_id,x_m,y_m\n");
    for (i, n) in river.nodes.iter().enumerate() {
        nodes.push_str(&format!("n{i},{},{}\n", n[0], n[1]));
    }
    let mut secs = String::from("node_a,node_b,length_m\n");
    for &(a, b, l) in &river.sections {
        secs.push_str(&format!("n{a},n{b},{l}\n"));
    }
    fs::write(dir.join("river_nodes.csv"), nodes)?;
    fs::write(dir.join("river_sections.csv"), secs)?;
    Ok(())
}

pub fn write_stations(path: &Path, stations: &[Station<f64>]) -> Result<()> {
    let mut text = String::from("station_id,x_m,y_m\n");
    for s in stations {
        text.push_str(&format!("{},{},{}\n", s.id, s.x, s.y));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_measurements_csv(path: &Path, ms: &[Measurement<f64>]) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_measurements(ms, file)?;
    Ok(())
}

/// Write the simulated measurements and ground truth for `spec`.
pub fn write_simulation(dir: &Path, spec: &SimulationSpec, seed: u64) -> Result<GroundTruth> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let (ms, truth) = simulate(spec, seed)?;
    write_measurements_csv(&dir.join("measurements.csv"), &ms)?;
    write_json(&dir.join("truth.json"), &truth)?;
    Ok(truth)
}

/// Write the complete toy fixture, including a `toy.cfg` pointing at it.
pub fn write_toy(dir: &Path, seed: u64) -> Result<GroundTruth> {
    let toy = toy_fixture(seed);
    let truth = write_simulation(dir, &toy.spec, seed)?;
    write_json(&dir.join("spec.json"), &toy.spec)?;
    write_river(dir, &toy.river)?;
    write_stations(&dir.join("stations.csv"), &toy.stations)?;
    let cfg = format!(
        "# toy fixture, seed {seed}\nmeasurements = measurements.csv\nriver_nodes = river_nodes.csv\nriver_sections = river_sections.csv\nstations = stations.csv\noutput = out\nseed = {seed}\n"
    );
    fs::write(dir.join("toy.cfg"), cfg)?;
    Ok(truth)
}

pub fn read_spec(path: &Path) -> Result<SimulationSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: SimulationSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Err(e) = spec.validate() {
        bail!("invalid simulation spec {}: {e}", path.display());
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_regime() -> SimulationSpec {
        let d = |m| NaiveDate::from_ymd_opt(2020, m, 1).unwrap();
        SimulationSpec {
            start: d(1),
            end: d(12),
            shape: 0.8,
            regimes: vec![RegimeSpec { start: d(1), rate: 10.0 }, RegimeSpec { start: d(6), rate: 1.0 }],
            stations: (0..5)
                .map(|i| SimStation {
                    id: format!("S{i}"),
                    x_m: i as f64,
                    y_m: 0.0,
                    loq: 0.1,
                    mean_gap_days: 1.0,
                    group: "g".into(),
                    boost: BTreeMap::new(),
                })
                .collect(),
            campaign_gap_days: None,
        }
    }

    #[test]
    fn two_regimes_one_break() {
        let (ms, truth) = simulate(&two_regime(), 3).unwrap();
        assert_eq!(truth.breaks, vec![NaiveDate::from_ymd_opt(2020, 6, 1).unwrap()]);
        assert!(truth.planted.is_empty());
        assert_eq!(ms.len(), truth.n_measurements);
        // a one-day gap samples every day of the 336
        assert_eq!(ms.len(), 5 * 336);
    }

    #[test]
    fn censoring_matches_theory() {
        let spec = two_regime();
        let (ms, _) = simulate(&spec, 11).unwrap();
        for (r, regime) in spec.regimes.iter().enumerate() {
            let here: Vec<_> = ms.iter().filter(|m| spec.regime_at(m.date) == r).collect();
            let n = here.len() as f64;
            let p = 1.0 - (-(regime.rate * 0.1f64).powf(spec.shape)).exp();
            let observed = here.iter().filter(|m| m.value.is_none()).count() as f64 / n;
            let se = (p * (1.0 - p) / n).sqrt();
            assert!((observed - p).abs() < 3.0 * se, "regime {r}: {observed} vs {p}");
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = two_regime();
        s.regimes[1].start = s.start;
        assert!(simulate(&s, 1).is_err());
        let mut s = two_regime();
        s.stations[0].boost.insert(5, 2.0);
        assert!(simulate(&s, 1).is_err());
        let mut s = two_regime();
        s.stations[1].id = "S0".into();
        assert!(simulate(&s, 1).is_err());
        let mut s = two_regime();
        s.regimes[0].rate = 0.0;
        assert!(simulate(&s, 1).is_err());
    }

    #[test]
    fn toy_layout() {
        let toy = toy_fixture(4);
        assert_eq!(toy.stations.len(), 12);
        let (ms, truth) = simulate(&toy.spec, 4).unwrap();
        assert_eq!(truth.breaks.len(), 3);
        assert_eq!(truth.groups.len(), 6);
        assert_eq!(truth.planted.len(), 2);
        assert!(truth.planted.iter().all(|p| p.stations.len() == 2 && p.factor == TOY_PLANTED_FACTOR));
        assert!(ms.windows(2).all(|w| (w[0].date, &w[0].station_id) <= (w[1].date, &w[1].station_id)));
        assert_eq!(simulate(&toy.spec, 4).unwrap().0, ms);
    }
}
