// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashMap;

use crate::censored_weibull::{solve_rate, FeasibleBox, RateObjective};
use crate::ingest::CoarseSeries;
use crate::Scalar;

/// Above this many distinct censoring thresholds, censored terms are summed
/// entry by entry instead of through per-threshold prefix counts.
const MAX_GROUPED_THRESHOLDS: usize = 64;

/// Fitted cost of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentFit<T> {
    /// Negative log-likelihood at the fitted rate, without penalty.
    pub cost: T,
    pub rate: T,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
enum CensoredIndex<T> {
    Grouped {
        /// `q^σ` per distinct threshold.
        q_pow: Vec<T>,
        /// Row-major `(K + 1) × q_pow.len()` prefix counts.
        prefix: Vec<u32>,
    },
    Direct {
        q_pow: Vec<Option<T>>,
    },
}

/// Segment cost under the fixed-shape censored Weibull model, memoised per
/// segment.
///
/// Segment `(a, b]` covers zero-based entries `a..b`. Quantified entries are
/// reduced to prefix sums of `1`, `y^σ` and `log y`, so one likelihood
/// evaluation costs `O(#distinct thresholds)`.
#[derive(Debug, Clone)]
pub struct SegmentCost<T> {
    shape: T,
    bounds: FeasibleBox<T>,
    len: usize,
    prefix_n: Vec<T>,
    prefix_pow: Vec<T>,
    prefix_log: Vec<T>,
    censored: CensoredIndex<T>,
    memo: HashMap<(usize, usize), SegmentFit<T>>,
}

impl<T: Scalar> SegmentCost<T> {
    pub fn new(series: &CoarseSeries<T>, shape: T, bounds: FeasibleBox<T>) -> Self {
        let k = series.len();
        let mut prefix_n = Vec::with_capacity(k + 1);
        let mut prefix_pow = Vec::with_capacity(k + 1);
        let mut prefix_log = Vec::with_capacity(k + 1);
        let (mut n, mut pw, mut lg) = (T::zero(), T::zero(), T::zero());
        prefix_n.push(n);
        prefix_pow.push(pw);
        prefix_log.push(lg);
        for e in &series.entries {
            if !e.censored {
                n += T::one();
                pw += e.y_bar.powf(shape);
                lg += e.y_bar.ln();
            }
            prefix_n.push(n);
            prefix_pow.push(pw);
            prefix_log.push(lg);
        }

        let mut thresholds: Vec<T> = series
            .entries
            .iter()
            .filter(|e| e.censored)
            .map(|e| e.q_bar)
            .collect();
        thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
        thresholds.dedup();

        let censored = if thresholds.len() <= MAX_GROUPED_THRESHOLDS {
            let d = thresholds.len();
            let mut prefix = vec![0u32; (k + 1) * d];
            for (i, e) in series.entries.iter().enumerate() {
                let (row, next) = prefix.split_at_mut((i + 1) * d);
                next[..d].copy_from_slice(&row[i * d..]);
                if e.censored {
                    let g = thresholds
                        .binary_search_by(|t| t.partial_cmp(&e.q_bar).expect("finite"))
                        .expect("threshold indexed");
                    next[g] += 1;
                }
            }
            CensoredIndex::Grouped {
                q_pow: thresholds.iter().map(|q| q.powf(shape)).collect(),
                prefix,
            }
        } else {
            CensoredIndex::Direct {
                q_pow: series
                    .entries
                    .iter()
                    .map(|e| e.censored.then(|| e.q_bar.powf(shape)))
                    .collect(),
            }
        };

        Self {
            shape,
            bounds,
            len: k,
            prefix_n,
            prefix_pow,
            prefix_log,
            censored,
            memo: HashMap::new(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn shape(&self) -> T {
        self.shape
    }

    pub fn bounds(&self) -> &FeasibleBox<T> {
        &self.bounds
    }

    /// Number of memoised segments.
    pub fn cached(&self) -> usize {
        self.memo.len()
    }

    /// Fit the rate on entries `a..b` and return the unpenalised cost.
    ///
    /// # Panics
    ///
    /// If `a >= b` or `b > len`.
    pub fn fit(&mut self, a: usize, b: usize) -> SegmentFit<T> {
        assert!(a < b && b <= self.len, "invalid segment ({a}, {b}] for K={}", self.len);
        if let Some(hit) = self.memo.get(&(a, b)) {
            return *hit;
        }
        let fit = self.compute(a, b);
        self.memo.insert((a, b), fit);
        fit
    }

    #[inline]
    pub fn cost(&mut self, a: usize, b: usize) -> T {
        self.fit(a, b).cost
    }

    fn compute(&self, a: usize, b: usize) -> SegmentFit<T> {
        let groups: Vec<(T, T)> = match &self.censored {
            CensoredIndex::Grouped { q_pow, prefix } => {
                let d = q_pow.len();
                q_pow
                    .iter()
                    .enumerate()
                    .filter_map(|(g, &qp)| {
                        let c = prefix[b * d + g] - prefix[a * d + g];
                        (c > 0).then(|| (qp, T::from_usize_lossy(c as usize)))
                    })
                    .collect()
            }
            CensoredIndex::Direct { q_pow } => q_pow[a..b]
                .iter()
                .flatten()
                .map(|&qp| (qp, T::one()))
                .collect(),
        };
        let obj = RateObjective::from_parts(
            self.shape,
            self.prefix_n[b] - self.prefix_n[a],
            self.prefix_pow[b] - self.prefix_pow[a],
            self.prefix_log[b] - self.prefix_log[a],
            groups,
        );
        let fit = solve_rate(&obj, &self.bounds);
        SegmentFit {
            cost: fit.nll,
            rate: fit.rate,
            degenerate: fit.degenerate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::censored_weibull::{neg_log_likelihood, CensoredSample, WeibullParams};
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2017, 1, 1).unwrap()
    }

    fn random_series(rng: &mut ChaCha8Rng, k: usize, n_thresholds: usize) -> CoarseSeries<f64> {
        let qs: Vec<f64> = (0..n_thresholds).map(|i| 0.02 + 0.01 * i as f64).collect();
        let values: Vec<(f64, f64, bool)> = (0..k)
            .map(|_| {
                let q = qs[rng.gen_range(0..qs.len())];
                let y: f64 = (-(1.0 - rng.gen::<f64>()).ln()).powf(1.0 / 0.7) / 20.0;
                if y < q {
                    (q, q, true)
                } else {
                    (y, q, false)
                }
            })
            .collect();
        CoarseSeries::from_values(start(), &values)
    }

    #[test]
    fn single_uncensored_point_exponential() {
        let y = 2.5f64;
        let series = CoarseSeries::from_values(start(), &[(y, 0.1, false)]);
        let mut cost = SegmentCost::new(&series, 1.0, FeasibleBox::default());
        let fit = cost.fit(0, 1);
        assert!((fit.rate - 1.0 / y).abs() < 1e-15);
        assert!((fit.cost - (1.0 + f64::ln(y))).abs() < 1e-14);
    }

    #[test]
    fn matches_pointwise_likelihood_and_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for thresholds in [3, 100] {
            let series = random_series(&mut rng, 150, thresholds);
            let shape = 0.7;
            let mut cost = SegmentCost::new(&series, shape, FeasibleBox::default());
            for _ in 0..10 {
                let a = rng.gen_range(0..140);
                let b = rng.gen_range(a + 1..=150);
                let fit = cost.fit(a, b);
                let sample = CensoredSample::from_coarse_range(&series, a, b);
                let at_fit = neg_log_likelihood(&WeibullParams { rate: fit.rate, shape }, &sample);
                assert!((at_fit - fit.cost).abs() < 1e-8 * at_fit.abs().max(1.0));
                // 1-D grid oracle over log λ
                let (lo, hi) = (1e-6f64.ln(), 1e6f64.ln());
                let grid_min = (0..=20_000)
                    .map(|i| (lo + (hi - lo) * i as f64 / 20_000.0).exp())
                    .map(|r| neg_log_likelihood(&WeibullParams { rate: r, shape }, &sample))
                    .fold(f64::INFINITY, f64::min);
                assert!((grid_min - fit.cost).abs() < 1e-3, "{grid_min} vs {}", fit.cost);
                assert!(fit.cost <= grid_min + 1e-12);
            }
        }
    }

    #[test]
    fn splitting_never_costs_more() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let series = random_series(&mut rng, 80, 4);
        let mut cost = SegmentCost::new(&series, 0.7, FeasibleBox::default());
        for _ in 0..200 {
            let a = rng.gen_range(0..78);
            let c = rng.gen_range(a + 2..=80);
            let b = rng.gen_range(a + 1..c);
            let whole = cost.cost(a, c);
            let split = cost.cost(a, b) + cost.cost(b, c);
            assert!(split <= whole + 1e-9 * whole.abs().max(1.0), "({a},{b},{c}) {split} > {whole}");
        }
    }

    #[test]
    fn all_censored_segment_is_finite_and_degenerate() {
        let series = CoarseSeries::<f64>::from_values(start(), &[(0.02, 0.02, true), (0.05, 0.05, true)]);
        let mut cost = SegmentCost::new(&series, 0.5, FeasibleBox::default());
        let fit = cost.fit(0, 2);
        assert!(fit.degenerate);
        assert!(fit.cost.is_finite() && fit.cost >= 0.0);
        assert_eq!(cost.cached(), 1);
    }
}
