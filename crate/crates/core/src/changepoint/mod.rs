// SPDX-License-Identifier: MIT OR Apache-2.0

//! Penalised change-point detection on the coarse series.
//!
//! The per-segment model is the censored Weibull with a shape shared by the
//! whole series and a free rate per segment. [`pelt`] solves one penalty
//! exactly, [`crops`] enumerates the solutions over a penalty range and
//! [`elbow_select`] picks one of them.

mod cost;
mod crops;
mod elbow;
mod pelt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::censored_weibull::{fit_mle, CensoredSample, FeasibleBox, WeibullError};
use crate::ingest::CoarseSeries;
use crate::Scalar;

pub use cost::{SegmentCost, SegmentFit};
pub use crops::crops;
pub use elbow::elbow_select;
pub use pelt::{optimal_partitioning, pelt};

#[derive(Debug, Error)]
pub enum ChangepointError {
    #[error("elbow selection needs at least 5 points, got {0}")]
    TooFewPoints(usize),
    #[error("{0}")]
    Invalid(String),
    #[error("series has no quantified value")]
    NoQuantified,
    #[error("shape estimation failed: {0}")]
    Shape(String),
}

impl<T: Scalar> From<WeibullError<T>> for ChangepointError {
    fn from(e: WeibullError<T>) -> Self {
        ChangepointError::Shape(e.to_string())
    }
}

/// A partition of the series into stationary segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation<T> {
    /// Start index of every segment but the first, strictly increasing in `(0, K)`.
    pub breaks: Vec<usize>,
    /// One fitted rate per segment.
    pub rates: Vec<T>,
    /// Whether each segment's rate sits on a bound of the feasible box.
    pub degenerate: Vec<bool>,
    /// Total penalised cost, `Σ cost + β (L + 1)`.
    pub cost: T,
    /// Total cost without the penalty.
    pub raw_cost: T,
    pub penalty: T,
    /// Series length `K`.
    pub len: usize,
}

impl<T: Scalar> Segmentation<T> {
    /// Evaluate a partition given by its break indices.
    pub fn from_breaks(cost: &mut SegmentCost<T>, breaks: Vec<usize>, penalty: T) -> Self {
        let k = cost.len();
        let mut rates = Vec::with_capacity(breaks.len() + 1);
        let mut degenerate = Vec::with_capacity(breaks.len() + 1);
        let mut total = T::zero();
        let mut raw = T::zero();
        if k > 0 {
            let mut start = 0;
            for end in breaks.iter().copied().chain([k]) {
                let fit = cost.fit(start, end);
                // same association order as the dynamic programme
                total = total + fit.cost + penalty;
                raw += fit.cost;
                rates.push(fit.rate);
                degenerate.push(fit.degenerate);
                start = end;
            }
        }
        Self {
            breaks,
            rates,
            degenerate,
            cost: total,
            raw_cost: raw,
            penalty,
            len: k,
        }
    }

    /// Number of change-points `L`.
    #[inline]
    pub fn change_points(&self) -> usize {
        self.breaks.len()
    }

    /// Half-open index ranges of the segments.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.breaks.len() + 1);
        let mut start = 0;
        for end in self.breaks.iter().copied().chain([self.len]) {
            out.push((start, end));
            start = end;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry<T> {
    /// Smallest explored penalty at which this segmentation was optimal.
    pub penalty: T,
    pub segmentation: Segmentation<T>,
}

/// Distinct optimal segmentations, by increasing penalty and strictly
/// decreasing change-point count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPath<T> {
    pub entries: Vec<PathEntry<T>>,
}

/// Tuning of [`segment_pipeline`].
#[derive(Debug, Clone, Copy)]
pub struct SegmentOptions<T> {
    pub min_seg_len: usize,
    /// Penalty range as multiples of `log K`.
    pub penalty_factors: (T, T),
    pub bounds: FeasibleBox<T>,
}

impl<T: Scalar> Default for SegmentOptions<T> {
    fn default() -> Self {
        Self {
            min_seg_len: 2,
            penalty_factors: (T::lit(0.2), T::lit(5.0)),
            bounds: FeasibleBox::default(),
        }
    }
}

/// Outcome of [`segment_pipeline`].
#[derive(Debug, Clone)]
pub struct SegmentResult<T> {
    pub shape: T,
    pub selected: Segmentation<T>,
    pub path: PenaltyPath<T>,
    /// Index of `selected` in `path`, if the elbow rule was applicable.
    pub elbow_index: Option<usize>,
}

/// Fit the global shape, explore penalties with CROPS and pick the
/// segmentation at the elbow of unpenalised cost against `L`.
///
/// When the path holds fewer than five segmentations the elbow is undefined
/// and the BIC-like penalty `log(K) / 2` is used instead.
pub fn segment_pipeline<T: Scalar>(
    series: &CoarseSeries<T>,
    opts: &SegmentOptions<T>,
) -> Result<SegmentResult<T>, ChangepointError> {
    if series.is_empty() || series.entries.iter().all(|e| e.censored) {
        return Err(ChangepointError::NoQuantified);
    }
    let sample = CensoredSample::from_coarse(series);
    let shape = match fit_mle(&sample, &opts.bounds) {
        Ok(fit) => fit.params.shape,
        Err(WeibullError::NoConvergence { best }) => best.params.shape,
        Err(e) => return Err(e.into()),
    };

    let mut cost = SegmentCost::new(series, shape, opts.bounds);
    let log_k = T::from_usize_lossy(series.len()).ln().max(T::zero());
    let path = crops(
        &mut cost,
        opts.penalty_factors.0 * log_k,
        opts.penalty_factors.1 * log_k,
        opts.min_seg_len,
    )?;

    if path.entries.len() >= 5 {
        // increasing L
        let points: Vec<(T, T)> = path
            .entries
            .iter()
            .rev()
            .map(|e| (T::from_usize_lossy(e.segmentation.change_points()), e.segmentation.raw_cost))
            .collect();
        let j = elbow_select(&points)?;
        let idx = path.entries.len() - 1 - j;
        return Ok(SegmentResult {
            shape,
            selected: path.entries[idx].segmentation.clone(),
            path,
            elbow_index: Some(idx),
        });
    }
    let selected = pelt(&mut cost, log_k * T::lit(0.5), opts.min_seg_len);
    Ok(SegmentResult {
        shape,
        selected,
        path,
        elbow_index: None,
    })
}

/// JSON form of a selected segmentation, with breaks as dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationReport<T> {
    pub sigma_hat: T,
    pub penalty: T,
    /// First day of each new segment.
    pub breaks: Vec<NaiveDate>,
    pub rates: Vec<T>,
    pub cost: T,
    pub segments: Vec<SegmentSpan<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpan<T> {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub entries: usize,
    pub lambda: T,
    pub degenerate: bool,
}

impl<T: Scalar> SegmentationReport<T> {
    pub fn new(series: &CoarseSeries<T>, shape: T, seg: &Segmentation<T>) -> Self {
        let segments = seg
            .segments()
            .into_iter()
            .zip(seg.rates.iter().zip(&seg.degenerate))
            .map(|((a, b), (&lambda, &degenerate))| SegmentSpan {
                start: series.entries[a].day,
                end: series.entries[b - 1].day,
                entries: b - a,
                lambda,
                degenerate,
            })
            .collect();
        Self {
            sigma_hat: shape,
            penalty: seg.penalty,
            breaks: seg.breaks.iter().map(|&b| series.entries[b].day).collect(),
            rates: seg.rates.clone(),
            cost: seg.cost,
            segments,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::pelt::tests::series_from_rates;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_censored_series_is_an_error() {
        let s = CoarseSeries::from_values(NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(), &[(0.1, 0.1, true); 10]);
        assert!(matches!(segment_pipeline(&s, &SegmentOptions::default()), Err(ChangepointError::NoQuantified)));
    }

    #[test]
    fn pipeline_is_deterministic_and_reports_dates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rates: Vec<f64> = (0..120).map(|i| if (i / 20) % 2 == 0 { 4.0 } else { 0.4 }).collect();
        let series = series_from_rates(&mut rng, &rates, 0.7, 0.1);
        let a = segment_pipeline(&series, &SegmentOptions::default()).unwrap();
        let b = segment_pipeline(&series, &SegmentOptions::default()).unwrap();
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.path, b.path);
        let report = SegmentationReport::new(&series, a.shape, &a.selected);
        assert_eq!(report.breaks.len(), a.selected.change_points());
        assert_eq!(report.segments.iter().map(|s| s.entries).sum::<usize>(), 120);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"sigma_hat\""));
        assert!(a.selected.change_points() >= 3, "{:?}", a.selected.breaks);
    }

    #[test]
    fn from_breaks_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let series = series_from_rates(&mut rng, &[1.0; 10], 1.0, 0.01);
        let mut cost = SegmentCost::new(&series, 1.0, FeasibleBox::default());
        let seg = Segmentation::from_breaks(&mut cost, vec![3, 7], 0.5);
        assert_eq!(seg.segments(), vec![(0, 3), (3, 7), (7, 10)]);
        assert_eq!(seg.rates.len(), 3);
        assert!((seg.cost - seg.raw_cost - 1.5).abs() < 1e-12);
    }
}
