// SPDX-License-Identifier: MIT OR Apache-2.0

use super::cost::SegmentCost;
use super::pelt::pelt;
use super::{ChangepointError, PathEntry, PenaltyPath, Segmentation};
use crate::Scalar;

const MIN_WIDTH: f64 = 1e-6;

/// Every distinct optimal segmentation for penalties in `[beta_min, beta_max]`.
///
/// PELT runs at both ends of an interval; when the change-point counts differ
/// by more than one, it runs again at the penalty where the two solutions
/// have equal penalised cost, and both halves are explored in turn.
pub fn crops<T: Scalar>(
    cost: &mut SegmentCost<T>,
    beta_min: T,
    beta_max: T,
    min_seg_len: usize,
) -> Result<PenaltyPath<T>, ChangepointError> {
    if !(beta_min >= T::zero()) || !(beta_max >= beta_min) || !beta_max.is_finite() {
        return Err(ChangepointError::Invalid(format!("penalty range [{beta_min}, {beta_max}]")));
    }
    let low = pelt(cost, beta_min, min_seg_len);
    if beta_max == beta_min {
        return Ok(PenaltyPath::from_runs(vec![low]));
    }
    let high = pelt(cost, beta_max, min_seg_len);
    let mut found = vec![low.clone(), high.clone()];
    let mut stack = vec![(low, high)];
    let min_width = T::lit(MIN_WIDTH);

    while let Some((lo, hi)) = stack.pop() {
        // lo has more change-points than hi
        if lo.change_points() <= hi.change_points() + 1 || hi.penalty - lo.penalty < min_width {
            continue;
        }
        let extra = T::from_usize_lossy(lo.change_points() - hi.change_points());
        let beta = (hi.raw_cost - lo.raw_cost) / extra;
        if !(beta > lo.penalty && beta < hi.penalty) {
            continue;
        }
        let mid = pelt(cost, beta, min_seg_len);
        let m = mid.change_points();
        found.push(mid.clone());
        if m == lo.change_points() || m == hi.change_points() {
            continue;
        }
        stack.push((mid.clone(), hi));
        stack.push((lo, mid));
    }
    Ok(PenaltyPath::from_runs(found))
}

impl<T: Scalar> PenaltyPath<T> {
    /// Sort runs by penalty and keep the first run per change-point count.
    fn from_runs(mut runs: Vec<Segmentation<T>>) -> Self {
        runs.sort_by(|a, b| a.penalty.partial_cmp(&b.penalty).expect("finite penalties"));
        let mut entries: Vec<PathEntry<T>> = Vec::with_capacity(runs.len());
        for seg in runs {
            if entries.iter().any(|e| e.segmentation.change_points() == seg.change_points()) {
                continue;
            }
            entries.push(PathEntry {
                penalty: seg.penalty,
                segmentation: seg,
            });
        }
        Self { entries }
    }
}
