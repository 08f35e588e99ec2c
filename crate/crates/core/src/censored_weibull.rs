// SPDX-License-Identifier: MIT OR Apache-2.0

//! Left-censored Weibull model.
//!
//! Parameterised by a rate `λ` and a shape `σ`:
//!
//! ```text
//! f(y) = σλ (λy)^(σ-1) exp(-(λy)^σ)        F(q) = 1 - exp(-(λq)^σ)
//! ```
//!
//! A censored observation contributes `log F(q)` to the log-likelihood, a
//! quantified one `log f(y)`. Estimates are constrained to a [`FeasibleBox`];
//! fits that end on its boundary are flagged `degenerate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::CoarseSeries;
use crate::optimize;
use crate::scalar::{log1mexp, z_over_expm1};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum WeibullError<T: Scalar> {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty sample")]
    EmptySample,
    #[error("optimizer did not converge; best iterate lambda={} sigma={}", .best.params.rate, .best.params.shape)]
    NoConvergence { best: WeibullFit<T> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams<T> {
    #[serde(rename = "lambda")]
    pub rate: T,
    #[serde(rename = "sigma")]
    pub shape: T,
}

impl<T: Scalar> WeibullParams<T> {
    pub fn new(rate: T, shape: T) -> Result<Self, WeibullError<T>> {
        if !(rate > T::zero() && rate.is_finite() && shape > T::zero() && shape.is_finite()) {
            return Err(WeibullError::Domain(format!(
                "rate and shape must be positive and finite, got lambda={rate} sigma={shape}"
            )));
        }
        Ok(Self { rate, shape })
    }

    /// Quantile function; `u` is the survival probability `exp(-(λy)^σ)`.
    pub fn inverse_survival(&self, u: T) -> T {
        (-u.ln()).powf(self.shape.recip()) / self.rate
    }

    pub fn cdf(&self, q: T) -> T {
        -(-(self.rate * q).powf(self.shape)).exp_m1()
    }
}

/// Box constraints on the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleBox<T> {
    pub rate_min: T,
    pub rate_max: T,
    pub shape_min: T,
    pub shape_max: T,
}

impl<T: Scalar> Default for FeasibleBox<T> {
    fn default() -> Self {
        Self {
            rate_min: T::lit(1e-6),
            rate_max: T::lit(1e6),
            shape_min: T::lit(0.05),
            shape_max: T::lit(20.0),
        }
    }
}

impl<T: Scalar> FeasibleBox<T> {
    pub fn validate(&self) -> Result<(), WeibullError<T>> {
        let ok = T::zero() < self.rate_min
            && self.rate_min < self.rate_max
            && self.rate_max.is_finite()
            && T::zero() < self.shape_min
            && self.shape_min < self.shape_max
            && self.shape_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(WeibullError::Domain(format!("invalid feasibility box {self:?}")))
        }
    }

    pub fn contains(&self, p: &WeibullParams<T>) -> bool {
        (self.rate_min..=self.rate_max).contains(&p.rate)
            && (self.shape_min..=self.shape_max).contains(&p.shape)
    }
}

/// One observation: a quantified value `x` above its threshold, or a censored
/// one stored as `x == q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredPoint<T> {
    pub x: T,
    pub q: T,
    pub censored: bool,
}

impl<T: Scalar> CensoredPoint<T> {
    pub fn quantified(x: T, q: T) -> Self {
        Self { x, q, censored: false }
    }

    pub fn censored(q: T) -> Self {
        Self { x: q, q, censored: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CensoredSample<T> {
    pub points: Vec<CensoredPoint<T>>,
}

impl<T: Scalar> CensoredSample<T> {
    pub fn new(points: Vec<CensoredPoint<T>>) -> Result<Self, WeibullError<T>> {
        for p in &points {
            let valid = if p.censored {
                p.q > T::zero() && p.x == p.q
            } else {
                p.x > T::zero() && p.x.is_finite()
            };
            if !valid {
                return Err(WeibullError::Domain(format!("invalid sample point {p:?}")));
            }
        }
        Ok(Self { points })
    }

    pub fn from_coarse(series: &CoarseSeries<T>) -> Self {
        Self::from_coarse_range(series, 0, series.len())
    }

    /// Entries `start..end` (zero-based, half open) of a coarse series.
    pub fn from_coarse_range(series: &CoarseSeries<T>, start: usize, end: usize) -> Self {
        let points = series.entries[start..end]
            .iter()
            .map(|e| {
                if e.censored {
                    CensoredPoint::censored(e.q_bar)
                } else {
                    CensoredPoint::quantified(e.y_bar, e.q_bar)
                }
            })
            .collect();
        Self { points }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn quantified_count(&self) -> usize {
        self.points.iter().filter(|p| !p.censored).count()
    }
}

pub fn log_pdf<T: Scalar>(p: &WeibullParams<T>, y: T) -> Result<T, WeibullError<T>> {
    if !(y > T::zero()) {
        return Err(WeibullError::Domain(format!("log_pdf needs y > 0, got {y}")));
    }
    let ly = p.rate * y;
    Ok((p.shape * p.rate).ln() + (p.shape - T::one()) * ly.ln() - ly.powf(p.shape))
}

pub fn log_cdf<T: Scalar>(p: &WeibullParams<T>, q: T) -> Result<T, WeibullError<T>> {
    if !(q > T::zero()) {
        return Err(WeibullError::Domain(format!("log_cdf needs q > 0, got {q}")));
    }
    Ok(log1mexp((p.rate * q).powf(p.shape)))
}

#[inline]
fn point_nll<T: Scalar>(p: &WeibullParams<T>, pt: &CensoredPoint<T>) -> T {
    if pt.censored {
        -log1mexp((p.rate * pt.q).powf(p.shape))
    } else {
        let ly = p.rate * pt.x;
        ly.powf(p.shape) - (p.shape * p.rate).ln() - (p.shape - T::one()) * ly.ln()
    }
}

/// Negative log-likelihood of a censored sample, evaluated point by point.
pub fn neg_log_likelihood<T: Scalar>(p: &WeibullParams<T>, s: &CensoredSample<T>) -> T {
    s.points.iter().map(|pt| point_nll(p, pt)).sum()
}

/// Analytic `∂NLL/∂λ`.
pub fn nll_rate_derivative<T: Scalar>(p: &WeibullParams<T>, s: &CensoredSample<T>) -> T {
    let (rate, shape) = (p.rate, p.shape);
    s.points
        .iter()
        .map(|pt| {
            if pt.censored {
                let z = (rate * pt.q).powf(shape);
                -shape * z_over_expm1(z) / rate
            } else {
                shape * ((rate * pt.x).powf(shape) - T::one()) / rate
            }
        })
        .sum()
}

/// NLL of a sample as a function of the rate alone, shape held fixed.
///
/// Quantified points reduce to the sufficient statistics `Σ y^σ` and
/// `Σ log y`; censored points are grouped by distinct threshold.
#[derive(Debug, Clone)]
pub(crate) struct RateObjective<T> {
    shape: T,
    n_quantified: T,
    sum_pow: T,
    sum_log: T,
    /// `(q^σ, multiplicity)` per distinct censoring threshold.
    censored: Vec<(T, T)>,
}

impl<T: Scalar> RateObjective<T> {
    pub(crate) fn from_parts(shape: T, n_quantified: T, sum_pow: T, sum_log: T, censored: Vec<(T, T)>) -> Self {
        Self {
            shape,
            n_quantified,
            sum_pow,
            sum_log,
            censored,
        }
    }

    pub(crate) fn from_sample(s: &CensoredSample<T>, shape: T) -> Self {
        let mut n_quantified = T::zero();
        let mut sum_pow = T::zero();
        let mut sum_log = T::zero();
        let mut thresholds = Vec::new();
        for pt in &s.points {
            if pt.censored {
                thresholds.push(pt.q);
            } else {
                n_quantified += T::one();
                sum_pow += pt.x.powf(shape);
                sum_log += pt.x.ln();
            }
        }
        thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
        let mut censored: Vec<(T, T)> = Vec::new();
        let mut last: Option<T> = None;
        for q in thresholds {
            match (last, censored.last_mut()) {
                (Some(prev), Some(slot)) if prev == q => slot.1 += T::one(),
                _ => censored.push((q.powf(shape), T::one())),
            }
            last = Some(q);
        }
        Self::from_parts(shape, n_quantified, sum_pow, sum_log, censored)
    }

    fn is_empty(&self) -> bool {
        self.n_quantified == T::zero() && self.censored.is_empty()
    }

    pub(crate) fn value(&self, rate: T) -> T {
        let sigma = self.shape;
        let rate_pow = rate.powf(sigma);
        let mut total = T::zero();
        if self.n_quantified > T::zero() {
            total += rate_pow * self.sum_pow
                - self.n_quantified * (sigma.ln() + sigma * rate.ln())
                - (sigma - T::one()) * self.sum_log;
        }
        for &(q_pow, count) in &self.censored {
            total -= count * log1mexp(rate_pow * q_pow);
        }
        total
    }

    /// `dNLL/du` with `u = log λ`; nondecreasing in `u`.
    fn slope_log_rate(&self, u: T) -> T {
        let sigma = self.shape;
        let rate_pow = (sigma * u).exp();
        let mut g = T::zero();
        if self.n_quantified > T::zero() {
            g += sigma * (rate_pow * self.sum_pow - self.n_quantified);
        }
        for &(q_pow, count) in &self.censored {
            g -= count * sigma * z_over_expm1(rate_pow * q_pow);
        }
        g
    }
}

/// Rate estimate under a fixed shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit<T> {
    #[serde(rename = "lambda")]
    pub rate: T,
    pub degenerate: bool,
    pub nll: T,
}

fn rate_tolerance<T: Scalar>() -> T {
    T::lit(1e-13).max(T::epsilon() * T::lit(8.0))
}

pub(crate) fn solve_rate<T: Scalar>(obj: &RateObjective<T>, bounds: &FeasibleBox<T>) -> RateFit<T> {
    let at = |rate: T, degenerate: bool| RateFit {
        rate,
        degenerate,
        nll: obj.value(rate),
    };
    if obj.censored.is_empty() && obj.n_quantified > T::zero() {
        // Exact: (λ^σ) Σ y^σ = n.
        let rate = (obj.n_quantified / obj.sum_pow).powf(obj.shape.recip());
        return if rate < bounds.rate_min {
            at(bounds.rate_min, true)
        } else if rate > bounds.rate_max || !rate.is_finite() {
            at(bounds.rate_max, true)
        } else {
            at(rate, false)
        };
    }
    let (u_lo, u_hi) = (bounds.rate_min.ln(), bounds.rate_max.ln());
    let g_lo = obj.slope_log_rate(u_lo);
    if g_lo >= T::zero() {
        return at(bounds.rate_min, true);
    }
    let g_hi = obj.slope_log_rate(u_hi);
    if !(g_hi > T::zero()) {
        return at(bounds.rate_max, true);
    }
    let out = optimize::zeroin(|u| obj.slope_log_rate(u), u_lo, u_hi, g_lo, g_hi, rate_tolerance(), 200);
    at(out.x.exp(), false)
}

/// Maximum-likelihood rate with the shape fixed, by bracketed root finding on
/// the (monotone) derivative in `log λ`.
///
/// With no quantified point the likelihood keeps increasing with `λ`, so the
/// estimate sits on the upper rate bound and is flagged degenerate.
pub fn fit_rate_fixed_shape<T: Scalar>(
    s: &CensoredSample<T>,
    shape: T,
    bounds: &FeasibleBox<T>,
) -> Result<RateFit<T>, WeibullError<T>> {
    bounds.validate()?;
    if !(shape >= bounds.shape_min && shape <= bounds.shape_max) {
        return Err(WeibullError::Domain(format!(
            "shape {shape} outside [{}, {}]",
            bounds.shape_min, bounds.shape_max
        )));
    }
    let obj = RateObjective::from_sample(s, shape);
    if obj.is_empty() {
        return Err(WeibullError::EmptySample);
    }
    Ok(solve_rate(&obj, bounds))
}

/// Joint estimate of rate and shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullFit<T> {
    #[serde(flatten)]
    pub params: WeibullParams<T>,
    pub degenerate: bool,
    #[serde(skip)]
    pub nll: T,
}

const SHAPE_GRID: usize = 40;

/// Joint maximum-likelihood fit over the feasibility box.
///
/// The rate is profiled out exactly for every candidate shape; the profile
/// likelihood is then minimised in `log σ` by a coarse scan followed by Brent
/// minimisation on the bracketing cell, stopping once the shape moves by less
/// than `1e-8` relative.
pub fn fit_mle<T: Scalar>(s: &CensoredSample<T>, bounds: &FeasibleBox<T>) -> Result<WeibullFit<T>, WeibullError<T>> {
    bounds.validate()?;
    if s.is_empty() {
        return Err(WeibullError::EmptySample);
    }
    if s.quantified_count() == 0 {
        let shape = T::one().max(bounds.shape_min).min(bounds.shape_max);
        let rate = solve_rate(&RateObjective::from_sample(s, shape), bounds);
        return Ok(WeibullFit {
            params: WeibullParams { rate: rate.rate, shape },
            degenerate: true,
            nll: rate.nll,
        });
    }

    let profile = |log_shape: T| {
        let shape = log_shape.exp();
        solve_rate(&RateObjective::from_sample(s, shape), bounds)
    };
    let (v_lo, v_hi) = (bounds.shape_min.ln(), bounds.shape_max.ln());
    let step = (v_hi - v_lo) / T::from_usize_lossy(SHAPE_GRID - 1);
    let grid_v = |i: usize| if i + 1 == SHAPE_GRID { v_hi } else { v_lo + step * T::from_usize_lossy(i) };
    let mut best_i = 0;
    let mut best_nll = T::infinity();
    for i in 0..SHAPE_GRID {
        let nll = profile(grid_v(i)).nll;
        if nll < best_nll {
            best_nll = nll;
            best_i = i;
        }
    }
    let lo = grid_v(best_i.saturating_sub(1));
    let hi = grid_v((best_i + 1).min(SHAPE_GRID - 1));
    let tol = T::lit(1e-8).max(T::epsilon() * T::lit(4.0));
    let (out, _) = optimize::minimize(|v| profile(v).nll, lo, hi, T::zero(), tol, 500);

    // The scan point can beat the refined one when the optimum is on a bound.
    let refined = profile(out.x);
    let (log_shape, rate) = if refined.nll <= best_nll {
        (out.x, refined)
    } else {
        (grid_v(best_i), profile(grid_v(best_i)))
    };
    let shape = log_shape.exp().max(bounds.shape_min).min(bounds.shape_max);
    let on_shape_bound = (log_shape - v_lo).abs() <= tol * T::lit(2.0) || (v_hi - log_shape).abs() <= tol * T::lit(2.0);
    let fit = WeibullFit {
        params: WeibullParams { rate: rate.rate, shape },
        degenerate: rate.degenerate || on_shape_bound,
        nll: rate.nll,
    };
    if !out.converged {
        return Err(WeibullError::NoConvergence { best: fit });
    }
    Ok(fit)
}

/// Draw `q_schedule.len()` observations by inverse-CDF sampling; the `i`-th
/// is censored when it falls below `q_schedule[i]`.
pub fn sample<T: Scalar>(p: &WeibullParams<T>, q_schedule: &[T], seed: u64) -> CensoredSample<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(p, q_schedule, &mut rng)
}

pub fn sample_with<T: Scalar, R: Rng + ?Sized>(p: &WeibullParams<T>, q_schedule: &[T], rng: &mut R) -> CensoredSample<T> {
    let points = q_schedule
        .iter()
        .map(|&q| {
            let u = T::lit(1.0 - rng.gen::<f64>());
            let y = p.inverse_survival(u);
            if y < q {
                CensoredPoint::censored(q)
            } else {
                CensoredPoint::quantified(y, q)
            }
        })
        .collect();
    CensoredSample { points }
}
