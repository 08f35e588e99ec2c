// SPDX-License-Identifier: MIT OR Apache-2.0

use super::cost::SegmentCost;
use super::Segmentation;
use crate::Scalar;

/// Optimal penalised partition of the whole series by PELT.
///
/// Minimises `Σ cost(segment) + β (L + 1)` over partitions whose segments
/// all hold at least `min_seg_len` entries. Candidates are pruned with the
/// zero pruning constant, which is valid because fitting two free rates is
/// never worse than fitting one. A candidate proven dominated at time `s` is
/// only discarded from `s + min_seg_len` on, since shorter tails cannot yet
/// be closed by a segment starting at `s`.
pub fn pelt<T: Scalar>(cost: &mut SegmentCost<T>, penalty: T, min_seg_len: usize) -> Segmentation<T> {
    let k = cost.len();
    let m = min_seg_len.max(1);
    if k < 2 * m {
        return Segmentation::from_breaks(cost, Vec::new(), penalty);
    }

    let inf = T::infinity();
    let mut best = vec![inf; k + 1];
    let mut last = vec![usize::MAX; k + 1];
    best[0] = T::zero();

    let mut candidates: Vec<usize> = vec![0];
    // removals[s] lists candidates to drop before evaluating position s
    let mut removals: Vec<Vec<usize>> = vec![Vec::new(); k + 1];
    let mut doomed = vec![false; k + 1];
    let mut scratch: Vec<(usize, T)> = Vec::new();

    for s in m..=k {
        if !removals[s].is_empty() {
            let drop = std::mem::take(&mut removals[s]);
            let mut gone = vec![false; k + 1];
            for t in drop {
                gone[t] = true;
            }
            candidates.retain(|&t| !gone[t]);
        }

        scratch.clear();
        let mut f_s = inf;
        let mut arg = usize::MAX;
        for &t in &candidates {
            if t + m > s {
                continue;
            }
            let v = best[t] + cost.cost(t, s);
            scratch.push((t, v));
            let total = v + penalty;
            if total < f_s {
                f_s = total;
                arg = t;
            }
        }
        best[s] = f_s;
        last[s] = arg;

        let slack = T::lit(1e-9) * (T::one() + f_s.abs());
        for &(t, v) in &scratch {
            if !doomed[t] && v > f_s + slack {
                doomed[t] = true;
                if s + m <= k {
                    removals[s + m].push(t);
                }
            }
        }
        if s + m <= k {
            candidates.push(s);
        }
    }

    let mut breaks = Vec::new();
    let mut cursor = last[k];
    while cursor != 0 && cursor != usize::MAX {
        breaks.push(cursor);
        cursor = last[cursor];
    }
    breaks.reverse();
    Segmentation::from_breaks(cost, breaks, penalty)
}

/// Exhaustive `O(K²)` optimal partitioning, the reference PELT must match.
pub fn optimal_partitioning<T: Scalar>(cost: &mut SegmentCost<T>, penalty: T, min_seg_len: usize) -> Segmentation<T> {
    let k = cost.len();
    let m = min_seg_len.max(1);
    if k < 2 * m {
        return Segmentation::from_breaks(cost, Vec::new(), penalty);
    }
    let mut f = vec![T::infinity(); k + 1];
    let mut arg = vec![0usize; k + 1];
    f[0] = T::zero();
    for s in m..=k {
        for t in 0..=s - m {
            if !f[t].is_finite() {
                continue;
            }
            let v = f[t] + cost.cost(t, s) + penalty;
            if v < f[s] {
                f[s] = v;
                arg[s] = t;
            }
        }
    }
    let mut breaks = vec![];
    let mut c = arg[k];
    while c != 0 {
        breaks.push(c);
        c = arg[c];
    }
    breaks.reverse();
    Segmentation::from_breaks(cost, breaks, penalty)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::censored_weibull::FeasibleBox;
    use crate::ingest::CoarseSeries;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn weibull_draw(rng: &mut ChaCha8Rng, rate: f64, shape: f64) -> f64 {
        (-(1.0 - rng.gen::<f64>()).ln()).powf(1.0 / shape) / rate
    }

    pub(crate) fn series_from_rates(rng: &mut ChaCha8Rng, rates: &[f64], shape: f64, q: f64) -> CoarseSeries<f64> {
        let values: Vec<(f64, f64, bool)> = rates
            .iter()
            .map(|&rate| {
                let y = weibull_draw(rng, rate, shape);
                if y < q {
                    (q, q, true)
                } else {
                    (y, q, false)
                }
            })
            .collect();
        CoarseSeries::from_values(NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(), &values)
    }

    fn two_regime(seed: u64) -> CoarseSeries<f64> {
        // rates 5 then 0.2 from index 20, σ = 0.7
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rates: Vec<f64> = (0..40).map(|i| if i < 20 { 5.0 } else { 0.2 }).collect();
        // q = 0.13 censors about 30% overall
        series_from_rates(&mut rng, &rates, 0.7, 0.13)
    }

    #[test]
    fn large_penalty_gives_single_segment() {
        let series = two_regime(1);
        let mut cost = SegmentCost::new(&series, 0.7, FeasibleBox::default());
        let seg = pelt(&mut cost, 1e6, 2);
        assert!(seg.breaks.is_empty());
        assert_eq!(seg.rates.len(), 1);
    }

    #[test]
    fn two_regime_break_located() {
        let mut hits = 0;
        for seed in 0..100 {
            let series = two_regime(seed);
            let mut cost = SegmentCost::new(&series, 0.7, FeasibleBox::default());
            let beta = 40f64.ln() / 2.0;
            let seg = pelt(&mut cost, beta, 2);
            let oracle = optimal_partitioning(&mut cost, beta, 2);
            assert_eq!(seg.cost, oracle.cost);
            assert_eq!(seg.breaks, oracle.breaks);
            if seg.breaks.iter().any(|&b| (18..=22).contains(&b)) {
                hits += 1;
            }
        }
        eprintln!("two-regime hits {hits}/100");
        assert!(hits >= 90, "{hits}/100");
    }

    #[test]
    fn matches_optimal_partitioning_on_random_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..60 {
            let k = rng.gen_range(1..=60);
            let shape = rng.gen_range(0.3..2.0);
            let n_regimes = rng.gen_range(1..5);
            let levels: Vec<f64> = (0..n_regimes).map(|_| rng.gen_range(0.1..20.0f64)).collect();
            let rates: Vec<f64> = (0..k).map(|i| levels[i * n_regimes / k]).collect();
            let series = series_from_rates(&mut rng, &rates, shape, [0.02, 0.05, 0.1][case % 3]);
            let m = rng.gen_range(1..=3);
            let beta = rng.gen_range(0.0..8.0);
            let mut cost = SegmentCost::new(&series, shape, FeasibleBox::default());
            let seg = pelt(&mut cost, beta, m);
            let oracle = optimal_partitioning(&mut cost, beta, m);
            assert_eq!(seg.cost, oracle.cost, "case {case}");
            assert_eq!(seg.breaks, oracle.breaks, "case {case}");
            let bounds: Vec<usize> = std::iter::once(0).chain(seg.breaks.iter().copied()).chain([k]).collect();
            for w in bounds.windows(2) {
                assert!(w[1] - w[0] >= m.min(k));
            }
        }
    }

    #[test]
    fn rescaling_values_rescales_rates() {
        let series = two_regime(3);
        let c = 7.5;
        let scaled = CoarseSeries::from_values(
            series.entries[0].day,
            &series.entries.iter().map(|e| (e.y_bar * c, e.q_bar * c, e.censored)).collect::<Vec<_>>(),
        );
        let beta = 2.0;
        let a = pelt(&mut SegmentCost::new(&series, 0.7, FeasibleBox::default()), beta, 2);
        let b = pelt(&mut SegmentCost::new(&scaled, 0.7, FeasibleBox::default()), beta, 2);
        assert_eq!(a.breaks, b.breaks);
        assert_eq!(a.degenerate, b.degenerate);
        for ((ra, rb), &d) in a.rates.iter().zip(&b.rates).zip(&a.degenerate) {
            if d {
                continue;
            }
            assert!((ra / c - rb).abs() < 1e-8 * rb.abs(), "{:?} {:?}", a, b);
        }
    }
}
