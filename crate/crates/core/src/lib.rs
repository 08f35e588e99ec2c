// SPDX-License-Identifier: MIT OR Apache-2.0

//! Spatio-temporal collective anomaly detection for left-censored
//! concentration monitoring data.
//!
//! The pipeline has three stages:
//!
//! 1. [`changepoint`]: the daily-maximum series built by [`ingest`] is
//!    segmented with PELT under a left-censored Weibull model
//!    ([`censored_weibull`]) whose shape is fitted once and held fixed; the
//!    penalty is explored with CROPS and picked with an elbow rule.
//! 2. [`spatial_cluster`]: inside one stationary interval, active stations are
//!    clustered with Ward linkage on river shortest-path distances
//!    ([`station_graph`]), one hierarchy per connected component, combined
//!    greedily by inertia reduction.
//! 3. [`anomaly`]: every cluster is scored by heterogeneity (mean pairwise
//!    1-Wasserstein) and intensity (`1/λ̂`), then ranked by Pareto level.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common `f64` instantiation.

#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anomaly;
pub mod censored_weibull;
pub mod changepoint;
pub mod ingest;
mod optimize;
mod scalar;
pub mod spatial_cluster;
pub mod station_graph;

pub use scalar::Scalar;

pub type Measurement64 = ingest::Measurement<f64>;
pub type CoarseSeries64 = ingest::CoarseSeries<f64>;
pub type WeibullParams64 = censored_weibull::WeibullParams<f64>;
pub type WeibullFit64 = censored_weibull::WeibullFit<f64>;
pub type CensoredSample64 = censored_weibull::CensoredSample<f64>;
pub type FeasibleBox64 = censored_weibull::FeasibleBox<f64>;
pub type Segmentation64 = changepoint::Segmentation<f64>;
pub type PenaltyPath64 = changepoint::PenaltyPath<f64>;
pub type RiverNetwork64 = station_graph::RiverNetwork<f64>;
pub type StationGraph64 = station_graph::StationGraph<f64>;
pub type ClusterHierarchy64 = spatial_cluster::ClusterHierarchy<f64>;
pub type Clustering64 = spatial_cluster::Clustering<f64>;
pub type ClusterScore64 = anomaly::ClusterScore<f64>;
