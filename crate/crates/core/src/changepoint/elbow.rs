// SPDX-License-Identifier: MIT OR Apache-2.0

use super::ChangepointError;
use crate::Scalar;

/// Residual sum of squares of the least-squares line through `pts`.
fn line_sse<T: Scalar>(pts: &[(T, T)]) -> T {
    let n = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for &(x, y) in pts {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= T::zero() {
        return syy;
    }
    (syy - sxy * sxy / sxx).max(T::zero())
}

/// Knee of a curve: the index `j` minimising the summed residuals of two
/// straight lines, one through `points[..=j]` and one through `points[j..]`.
///
/// Both sides need two points, so `j` ranges over `1..=n-2`. Ties go to the
/// smaller `x`. Points must have strictly increasing `x`.
pub fn elbow_select<T: Scalar>(points: &[(T, T)]) -> Result<usize, ChangepointError> {
    if points.len() < 5 {
        return Err(ChangepointError::TooFewPoints(points.len()));
    }
    if points.windows(2).any(|w| !(w[0].0 < w[1].0)) || points.iter().any(|p| !p.1.is_finite()) {
        return Err(ChangepointError::Invalid("elbow points need finite y and strictly increasing x".into()));
    }
    let n = points.len();
    let mut best = 1;
    let mut best_sse = T::infinity();
    for j in 1..=n - 2 {
        let sse = line_sse(&points[..=j]) + line_sse(&points[j..]);
        if sse < best_sse {
            best_sse = sse;
            best = j;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn knee_curve(n: usize, knee: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let x = i as f64;
                let y = if i <= knee { 100.0 - 9.0 * x } else { 100.0 - 9.0 * knee as f64 - 0.5 * (x - knee as f64) };
                (x, y)
            })
            .collect()
    }

    #[test]
    fn exact_knee_at_seven() {
        let pts = knee_curve(15, 7);
        assert_eq!(elbow_select(&pts).unwrap(), 7);
    }

    #[test]
    fn every_feasible_knee() {
        for n in 5..20 {
            for knee in 1..n - 1 {
                assert_eq!(elbow_select(&knee_curve(n, knee)).unwrap(), knee, "n={n} knee={knee}");
            }
        }
    }

    #[test]
    fn too_few_points() {
        let pts: Vec<(f64, f64)> = (0..4).map(|i| (i as f64, 0.0)).collect();
        assert!(matches!(elbow_select(&pts), Err(ChangepointError::TooFewPoints(4))));
    }

    #[test]
    fn flat_curve_ties_to_smallest() {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| (i as f64, 3.0)).collect();
        assert_eq!(elbow_select(&pts).unwrap(), 1);
    }

    #[test]
    fn works_in_f32() {
        let pts: Vec<(f32, f32)> = knee_curve(10, 4).into_iter().map(|(x, y)| (x as f32, y as f32)).collect();
        assert_eq!(elbow_select(&pts).unwrap(), 4);
    }

    proptest! {
        #[test]
        fn noisy_knee_near_truth(noise in prop::collection::vec(-1.0f64..1.0, 12), scale in 0.1f64..10.0) {
            let pts = knee_curve(12, 5);
            let range = 100.0 - pts[11].1;
            let noisy: Vec<(f64, f64)> = pts.iter().zip(&noise).map(|(&(x, y), e)| (x, scale * (y + 0.01 * range * e))).collect();
            let j = elbow_select(&noisy).unwrap();
            prop_assert!((4..=6).contains(&j));
        }
    }
}
