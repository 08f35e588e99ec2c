// SPDX-License-Identifier: MIT OR Apache-2.0

//! Cluster scoring and Pareto ranking.
//!
//! A cluster is anomalous when its stations disagree with each other
//! (heterogeneity: mean pairwise 1-Wasserstein distance between station
//! samples) or when its pooled concentrations are high (intensity: `1/λ̂`
//! under the shared-shape censored Weibull). Clusters are ranked by Pareto
//! level over the two scores, both maximised.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::censored_weibull::{fit_rate_fixed_shape, CensoredPoint, CensoredSample, FeasibleBox, WeibullError};
use crate::ingest::Measurement;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum AnomalyError {
    #[error("empty sample")]
    Empty,
    #[error("invalid value {0}: station samples must be positive and finite")]
    Invalid(String),
    #[error("cluster {0} has no measurement in the interval")]
    NoData(usize),
    #[error("intensity fit failed: {0}")]
    Fit(String),
}

impl<T: Scalar> From<WeibullError<T>> for AnomalyError {
    fn from(e: WeibullError<T>) -> Self {
        AnomalyError::Fit(e.to_string())
    }
}

/// Values of one station over an interval; censored measurements enter at
/// their LOQ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationEmpirical<T> {
    pub station_id: String,
    pub values: Vec<T>,
}

impl<T: Scalar> StationEmpirical<T> {
    pub fn new(station_id: impl Into<String>, values: Vec<T>) -> Result<Self, AnomalyError> {
        if values.is_empty() {
            return Err(AnomalyError::Empty);
        }
        if let Some(v) = values.iter().find(|v| !(**v > T::zero()) || !v.is_finite()) {
            return Err(AnomalyError::Invalid(v.to_string()));
        }
        Ok(Self {
            station_id: station_id.into(),
            values,
        })
    }
}

fn sorted<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    s
}

/// `∫ |F_a − F_b|` between the empirical CDFs of two samples, evaluated
/// exactly on the merged support.
pub fn wasserstein1<T: Scalar>(a: &[T], b: &[T]) -> Result<T, AnomalyError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnomalyError::Empty);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(AnomalyError::Invalid("non-finite".into()));
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut x = if a[0] < b[0] { a[0] } else { b[0] };
    let mut acc = T::zero();
    // CDF gap as |i·nb − j·na| / (na·nb), kept integral until the end
    while i < na || j < nb {
        let next = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => if u < v { u } else { v },
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        let gap = (i * nb).abs_diff(j * na);
        acc += T::from_usize_lossy(gap) * (next - x);
        x = next;
        while i < na && a[i] == x {
            i += 1;
        }
        while j < nb && b[j] == x {
            j += 1;
        }
    }
    Ok(acc / (T::from_usize_lossy(na) * T::from_usize_lossy(nb)))
}

/// Mean within-cluster 1-Wasserstein distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heterogeneity<T> {
    pub value: T,
    /// One station only: the mean is undefined and reported as 0.
    pub singleton: bool,
}

/// Average of `w1` over ordered station pairs.
pub fn cluster_heterogeneity<T: Scalar>(stations: &[StationEmpirical<T>]) -> Result<Heterogeneity<T>, AnomalyError> {
    match stations.len() {
        0 => Err(AnomalyError::Empty),
        1 => Ok(Heterogeneity {
            value: T::zero(),
            singleton: true,
        }),
        n => {
            let mut sum = T::zero();
            for i in 0..n {
                for j in i + 1..n {
                    sum += wasserstein1(&stations[i].values, &stations[j].values)?;
                }
            }
            let pairs = T::from_usize_lossy(n * (n - 1));
            Ok(Heterogeneity {
                value: T::lit(2.0) * sum / pairs,
                singleton: false,
            })
        }
    }
}

/// Pooled intensity `1/λ̂` of a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intensity<T> {
    pub value: T,
    pub lambda: T,
    /// The rate sits on a bound of the feasible box.
    pub degenerate: bool,
}

pub fn cluster_intensity<T: Scalar>(pool: &CensoredSample<T>, shape: T, bounds: &FeasibleBox<T>) -> Result<Intensity<T>, AnomalyError> {
    let fit = fit_rate_fixed_shape(pool, shape, bounds)?;
    Ok(Intensity {
        value: fit.rate.recip(),
        lambda: fit.rate,
        degenerate: fit.degenerate,
    })
}

/// `x` is dominated by `y` when `y` is at least as good on both axes and
/// strictly better on one. Both axes are maximised.
pub fn dominates<T: PartialOrd>(y: &(T, T), x: &(T, T)) -> bool {
    (x.0 < y.0 && x.1 <= y.1) || (x.0 <= y.0 && x.1 < y.1)
}

/// Indices of the non-dominated points among `idx`, by a sort-and-sweep
/// skyline.
fn skyline<T: Scalar>(points: &[(T, T)], idx: &[usize]) -> Vec<usize> {
    let mut order = idx.to_vec();
    order.sort_by(|&p, &q| {
        points[q]
            .0
            .partial_cmp(&points[p].0)
            .unwrap_or(Ordering::Equal)
            .then(points[q].1.partial_cmp(&points[p].1).unwrap_or(Ordering::Equal))
    });
    let mut front = Vec::new();
    // best second coordinate among strictly larger first coordinates
    let mut best_before = T::neg_infinity();
    let mut g = 0;
    while g < order.len() {
        let w = points[order[g]].0;
        let mut end = g;
        while end < order.len() && points[order[end]].0 == w {
            end += 1;
        }
        let top = points[order[g]].1;
        for &p in &order[g..end] {
            let i = points[p].1;
            if i == top && i > best_before {
                front.push(p);
            }
        }
        if top > best_before {
            best_before = top;
        }
        g = end;
    }
    front.sort_unstable();
    front
}

/// Pareto level of every point: level 1 is the skyline, level `b` the
/// skyline once levels `< b` are removed.
///
/// # Panics
///
/// If a coordinate is NaN.
pub fn pareto_levels<T: Scalar>(points: &[(T, T)]) -> Vec<usize> {
    assert!(points.iter().all(|p| !p.0.is_nan() && !p.1.is_nan()), "NaN score");
    let mut level = vec![0; points.len()];
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut b = 1;
    while !left.is_empty() {
        let front = skyline(points, &left);
        for &p in &front {
            level[p] = b;
        }
        left.retain(|p| level[*p] == 0);
        b += 1;
    }
    level
}

/// Score and rank of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore<T> {
    pub id: usize,
    pub stations: Vec<String>,
    pub n_measurements: usize,
    pub n_quantified: usize,
    #[serde(rename = "W_bar")]
    pub w_bar: T,
    #[serde(rename = "I_bar")]
    pub i_bar: T,
    pub lambda: T,
    /// `None` when the cluster is left out of the ranking.
    pub pareto_level: Option<usize>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct RankOptions<T> {
    /// Rank clusters whose intensity fit is degenerate.
    pub include_degenerate: bool,
    pub bounds: FeasibleBox<T>,
}

impl<T: Scalar> Default for RankOptions<T> {
    fn default() -> Self {
        Self {
            include_degenerate: false,
            bounds: FeasibleBox::default(),
        }
    }
}

/// Score every cluster on the measurements of `[start, end]` and rank them.
///
/// `clusters` lists station ids per cluster; the cluster id is its position.
/// The result is sorted by level, then intensity descending, then id; clusters
/// left out of the ranking come last.
pub fn rank_clusters<T: Scalar>(
    clusters: &[Vec<String>],
    measurements: &[Measurement<T>],
    interval: (NaiveDate, NaiveDate),
    shape: T,
    opts: &RankOptions<T>,
) -> Result<Vec<ClusterScore<T>>, AnomalyError> {
    let mut by_station: BTreeMap<&str, Vec<&Measurement<T>>> = BTreeMap::new();
    for m in measurements.iter().filter(|m| m.date >= interval.0 && m.date <= interval.1) {
        by_station.entry(m.station_id.as_str()).or_default().push(m);
    }

    let mut scores = Vec::with_capacity(clusters.len());
    for (id, members) in clusters.iter().enumerate() {
        let mut empiricals = Vec::new();
        let mut pool = Vec::new();
        for s in members {
            let Some(ms) = by_station.get(s.as_str()) else { continue };
            empiricals.push(StationEmpirical::new(s.clone(), ms.iter().map(|m| m.value_or_loq()).collect())?);
            pool.extend(ms.iter().map(|m| match m.value {
                Some(v) => CensoredPoint::quantified(v, m.loq),
                None => CensoredPoint::censored(m.loq),
            }));
        }
        if pool.is_empty() {
            return Err(AnomalyError::NoData(id));
        }
        let het = cluster_heterogeneity(&empiricals)?;
        let pool = CensoredSample::new(pool)?;
        let intensity = cluster_intensity(&pool, shape, &opts.bounds)?;
        let mut flags = Vec::new();
        if het.singleton {
            flags.push("singleton".to_string());
        }
        if intensity.degenerate {
            flags.push("degenerate_intensity".to_string());
            if !opts.include_degenerate {
                flags.push("excluded".to_string());
            }
        }
        scores.push(ClusterScore {
            id,
            stations: members.clone(),
            n_measurements: pool.len(),
            n_quantified: pool.quantified_count(),
            w_bar: het.value,
            i_bar: intensity.value,
            lambda: intensity.lambda,
            pareto_level: None,
            flags,
        });
    }

    let ranked: Vec<usize> = (0..scores.len()).filter(|&i| !scores[i].flags.iter().any(|f| f == "excluded")).collect();
    let points: Vec<(T, T)> = ranked.iter().map(|&i| (scores[i].w_bar, scores[i].i_bar)).collect();
    for (&i, level) in ranked.iter().zip(pareto_levels(&points)) {
        scores[i].pareto_level = Some(level);
    }
    scores.sort_by(|a, b| {
        let la = a.pareto_level.unwrap_or(usize::MAX);
        let lb = b.pareto_level.unwrap_or(usize::MAX);
        la.cmp(&lb)
            .then(b.i_bar.partial_cmp(&a.i_bar).unwrap_or(Ordering::Equal))
            .then(a.id.cmp(&b.id))
    });
    Ok(scores)
}
