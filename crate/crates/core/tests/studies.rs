// SPDX-License-Identifier: MIT OR Apache-2.0

//! Simulation studies on planted structure.

use censeg_core::changepoint::{segment_pipeline, SegmentOptions};
use censeg_core::ingest::CoarseSeries;
use censeg_core::spatial_cluster::{default_cluster_range, greedy_global_hierarchy, select_clustering};
use censeg_core::station_graph::{build_station_graph, RiverNetwork, Station};
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A three-branch river meeting at a fork, with a group of stations near
/// the tip of each branch.
fn three_blob_layout(seed: u64) -> (Vec<Station<f64>>, RiverNetwork<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = 50.0;
    let mut nodes = vec![[0.0, 0.0]];
    let mut sections = Vec::new();
    let mut stations = Vec::new();
    let mut truth = Vec::new();
    for branch in 0..3 {
        let angle = std::f64::consts::TAU * branch as f64 / 3.0;
        let (dx, dy) = (angle.cos(), angle.sin());
        let steps = rng.gen_range(36..=48);
        let mut prev = 0;
        for k in 1..=steps {
            let r = k as f64 * spacing;
            nodes.push([r * dx, r * dy]);
            sections.push((prev, nodes.len() - 1, spacing));
            prev = nodes.len() - 1;
        }
        let tip = steps as f64 * spacing;
        for _ in 0..rng.gen_range(3..=6) {
            let r = tip - rng.gen_range(0.0..300.0);
            let jitter = rng.gen_range(-20.0..20.0);
            stations.push(Station::new(format!("s{:02}", stations.len()), r * dx - jitter * dy, r * dy + jitter * dx));
            truth.push(branch);
        }
    }
    (stations, RiverNetwork::new(nodes, sections).unwrap(), truth)
}

#[test]
fn three_blob_layout_selects_three_clusters() {
    let mut three = 0;
    let mut recovered = 0;
    for seed in 0..50 {
        let (stations, river, truth) = three_blob_layout(seed);
        let g = build_station_graph(&stations, &river).unwrap();
        let h = greedy_global_hierarchy(&g).unwrap();
        let level = select_clustering(&h, default_cluster_range(&h)).unwrap();
        let chosen = &h.levels[level];
        if chosen.len() == 3 {
            three += 1;
            // station ids sort in creation order, so graph index = creation index
            if chosen.clusters.iter().all(|c| c.iter().all(|&s| truth[s] == truth[c[0]])) {
                recovered += 1;
            }
        }
    }
    assert!(three >= 40, "three clusters chosen in {three}/50 fixtures");
    assert_eq!(recovered, three, "a three-cluster choice split a blob");
}

/// Under the null the elbow rule has no knee to find; measured 0/100 with
/// the elbow landing at 15 to 25 change points.
#[test]
#[ignore = "known to fail: the elbow of a knee-free cost curve sits mid-path"]
fn stationary_series_mostly_unsegmented() {
    let start = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap();
    let mut quiet = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<(f64, f64, bool)> = (0..500)
            .map(|_| {
                let y = (-(1.0 - rng.gen::<f64>()).ln()).powf(1.0 / 0.7) / 2.0;
                if y < 0.2 {
                    (0.2, 0.2, true)
                } else {
                    (y, 0.2, false)
                }
            })
            .collect();
        let series = CoarseSeries::from_values(start, &values);
        let seg = segment_pipeline(&series, &SegmentOptions::default()).unwrap();
        if seg.selected.change_points() <= 1 {
            quiet += 1;
        }
    }
    assert!(quiet >= 90, "L <= 1 in {quiet}/100 stationary series");
}
