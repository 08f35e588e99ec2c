// SPDX-License-Identifier: MIT OR Apache-2.0

//! Graph-constrained hierarchical clustering of stations.
//!
//! Each connected component gets its own Ward dendrogram on river distances.
//! A global hierarchy then starts from one cluster per component and, at each
//! level, undoes the next merge of whichever component loses the most
//! inertia by it.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::changepoint::{elbow_select, ChangepointError};
use crate::station_graph::{DistanceMatrix, GraphError, StationGraph};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("invalid distance matrix: {0}")]
    Matrix(String),
    #[error("cluster mixes stations of different components")]
    CrossComponent,
    #[error("{0}")]
    Graph(#[from] GraphError),
    #[error("need at least 5 hierarchy levels in range [{min}, {max}], found {found}")]
    TooFewLevels { min: usize, max: usize, found: usize },
    #[error("{0}")]
    Elbow(#[from] ChangepointError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One agglomeration step. Ids below `n` are leaves; the cluster formed by
/// merge `k` has id `n + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge<T> {
    pub a: usize,
    pub b: usize,
    /// Square root of the Ward merge criterion on squared distances.
    pub height: T,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram<T> {
    pub leaves: usize,
    pub merges: Vec<Merge<T>>,
}

impl<T: Scalar> Dendrogram<T> {
    /// Partition into `k` clusters obtained by applying the first
    /// `leaves - k` merges. Clusters hold leaf indices, sorted, and are
    /// ordered by their smallest leaf.
    pub fn cut(&self, k: usize) -> Vec<Vec<usize>> {
        assert!(k >= 1 && k <= self.leaves.max(1), "cut into {k} clusters of {} leaves", self.leaves);
        let mut members: Vec<Vec<usize>> = (0..self.leaves).map(|i| vec![i]).collect();
        let mut alive = vec![true; self.leaves];
        for m in &self.merges[..self.leaves - k] {
            let mut joined = std::mem::take(&mut members[m.a]);
            joined.append(&mut std::mem::take(&mut members[m.b]));
            joined.sort_unstable();
            alive[m.a] = false;
            alive[m.b] = false;
            members.push(joined);
            alive.push(true);
        }
        let mut out: Vec<Vec<usize>> = members.into_iter().zip(alive).filter(|(_, a)| *a).map(|(m, _)| m).collect();
        out.sort_by_key(|c| c[0]);
        out
    }
}

fn check_matrix<T: Scalar>(d: &DistanceMatrix<T>) -> Result<(), ClusterError> {
    let n = d.len();
    for i in 0..n {
        if d.get(i, i) != T::zero() {
            return Err(ClusterError::Matrix(format!("nonzero diagonal at {i}")));
        }
        for j in i + 1..n {
            let v = d.get(i, j);
            if v != d.get(j, i) {
                return Err(ClusterError::Matrix(format!("asymmetric at ({i}, {j})")));
            }
            if !(v > T::zero()) || !v.is_finite() {
                return Err(ClusterError::Matrix(format!("off-diagonal entry ({i}, {j}) = {v}")));
            }
        }
    }
    Ok(())
}

/// Ward agglomeration with the Lance–Williams update on squared distances.
///
/// At each step the active pair with the smallest squared criterion merges
/// (ties: lowest pair of cluster ids). Merge heights are nondecreasing.
pub fn ward_hierarchy<T: Scalar>(d: &DistanceMatrix<T>) -> Result<Dendrogram<T>, ClusterError> {
    check_matrix(d)?;
    let n = d.len();
    // squared criterion between active clusters, indexed by slot
    let mut d2: Vec<Vec<T>> = (0..n).map(|i| (0..n).map(|j| d.get(i, j) * d.get(i, j)).collect()).collect();
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    while active.len() > 1 {
        let mut best = (T::infinity(), usize::MAX, usize::MAX);
        for (x, &i) in active.iter().enumerate() {
            for &j in &active[x + 1..] {
                let v = d2[i][j];
                let (lo, hi) = if id[i] < id[j] { (id[i], id[j]) } else { (id[j], id[i]) };
                let better = v < best.0
                    || (v == best.0 && {
                        let (bl, bh) = if id[best.1] < id[best.2] { (id[best.1], id[best.2]) } else { (id[best.2], id[best.1]) };
                        (lo, hi) < (bl, bh)
                    });
                if better {
                    best = (v, i, j);
                }
            }
        }
        let (crit, i, j) = best;
        let (ni, nj) = (T::from_usize_lossy(size[i]), T::from_usize_lossy(size[j]));
        for &k in &active {
            if k == i || k == j {
                continue;
            }
            let nk = T::from_usize_lossy(size[k]);
            let v = ((ni + nk) * d2[k][i] + (nj + nk) * d2[k][j] - nk * crit) / (ni + nj + nk);
            d2[k][i] = v;
            d2[i][k] = v;
        }
        let (a, b) = if id[i] < id[j] { (id[i], id[j]) } else { (id[j], id[i]) };
        size[i] += size[j];
        merges.push(Merge {
            a,
            b,
            height: crit.max(T::zero()).sqrt(),
            size: size[i],
        });
        id[i] = n + merges.len() - 1;
        active.retain(|&k| k != j);
    }
    Ok(Dendrogram { leaves: n, merges })
}

/// Shortest-path distances among the stations of one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDistances<T> {
    /// Graph station indices, in matrix order.
    pub members: Vec<usize>,
    pub matrix: DistanceMatrix<T>,
}

/// Per-component distance matrices of a station graph.
pub fn component_distances<T: Scalar>(g: &StationGraph<T>) -> Result<Vec<ComponentDistances<T>>, ClusterError> {
    g.components
        .iter()
        .map(|c| {
            Ok(ComponentDistances {
                members: c.clone(),
                matrix: g.shortest_path_matrix(c)?,
            })
        })
        .collect()
}

fn locate<T>(dists: &[ComponentDistances<T>]) -> BTreeMap<usize, (usize, usize)> {
    let mut at = BTreeMap::new();
    for (c, cd) in dists.iter().enumerate() {
        for (local, &s) in cd.members.iter().enumerate() {
            at.insert(s, (c, local));
        }
    }
    at
}

fn cluster_inertia<T: Scalar>(members: &[usize], at: &BTreeMap<usize, (usize, usize)>, dists: &[ComponentDistances<T>]) -> Result<T, ClusterError> {
    let mut comp = None;
    let mut local = Vec::with_capacity(members.len());
    for s in members {
        let &(c, l) = at.get(s).ok_or(ClusterError::CrossComponent)?;
        if *comp.get_or_insert(c) != c {
            return Err(ClusterError::CrossComponent);
        }
        local.push(l);
    }
    let Some(c) = comp else { return Ok(T::zero()) };
    let m = &dists[c].matrix;
    let mut sum = T::zero();
    for &i in &local {
        for &j in &local {
            let d = m.get(i, j);
            sum += d * d;
        }
    }
    Ok(sum / T::from_usize_lossy(local.len()))
}

/// `W = Σ_m (1/|C_m|) Σ_{i,j ∈ C_m} d²_ij` over ordered pairs.
pub fn inertia<T: Scalar>(clusters: &[Vec<usize>], dists: &[ComponentDistances<T>]) -> Result<T, ClusterError> {
    let at = locate(dists);
    clusters.iter().try_fold(T::zero(), |acc, c| Ok(acc + cluster_inertia(c, &at, dists)?))
}

/// A partition of the graph's stations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering<T> {
    /// Station indices per cluster, sorted, clusters ordered by first station.
    pub clusters: Vec<Vec<usize>>,
    pub inertia: T,
}

impl<T: Scalar> Clustering<T> {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Cluster index of every station.
    pub fn labels(&self, n_stations: usize) -> Vec<usize> {
        let mut labels = vec![usize::MAX; n_stations];
        for (c, members) in self.clusters.iter().enumerate() {
            for &s in members {
                labels[s] = c;
            }
        }
        labels
    }

    /// CSV `station_id,cluster_id` in station order.
    pub fn write_csv<W: Write>(&self, g: &StationGraph<T>, mut out: W) -> Result<(), ClusterError> {
        writeln!(out, "station_id,cluster_id")?;
        for (s, label) in self.labels(g.len()).into_iter().enumerate() {
            writeln!(out, "{},{}", g.stations[s].id, label)?;
        }
        Ok(())
    }
}

/// Chain of clusterings from one cluster per component down to singletons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterHierarchy<T> {
    pub levels: Vec<Clustering<T>>,
    /// Component whose cluster was split to reach each level (none at level 0).
    pub split_component: Vec<Option<usize>>,
    pub dendrograms: Vec<Dendrogram<T>>,
}

impl<T: Scalar> ClusterHierarchy<T> {
    pub fn inertias(&self) -> Vec<T> {
        self.levels.iter().map(|l| l.inertia).collect()
    }
}

/// Combine per-component Ward dendrograms into one hierarchy, always taking
/// the split that lowers global inertia the most (ties: lowest component).
pub fn greedy_global_hierarchy<T: Scalar>(g: &StationGraph<T>) -> Result<ClusterHierarchy<T>, ClusterError> {
    let dists = component_distances(g)?;
    greedy_from_distances(&dists)
}

/// [`greedy_global_hierarchy`] on precomputed component distances.
pub fn greedy_from_distances<T: Scalar>(dists: &[ComponentDistances<T>]) -> Result<ClusterHierarchy<T>, ClusterError> {
    let at = locate(dists);
    let dendrograms = dists.iter().map(|cd| ward_hierarchy(&cd.matrix)).collect::<Result<Vec<_>, _>>()?;
    let to_global = |c: usize, local: Vec<Vec<usize>>| -> Vec<Vec<usize>> {
        local
            .into_iter()
            .map(|cl| {
                let mut v: Vec<usize> = cl.into_iter().map(|l| dists[c].members[l]).collect();
                v.sort_unstable();
                v
            })
            .collect()
    };

    let mut cuts: Vec<usize> = vec![1; dists.len()];
    let mut parts: Vec<Vec<Vec<usize>>> = (0..dists.len()).map(|c| to_global(c, dendrograms[c].cut(1))).collect();
    let mut part_inertia: Vec<T> = parts
        .iter()
        .map(|p| p.iter().try_fold(T::zero(), |acc, cl| Ok::<T, ClusterError>(acc + cluster_inertia(cl, &at, dists)?)))
        .collect::<Result<_, _>>()?;

    let assemble = |parts: &[Vec<Vec<usize>>], part_inertia: &[T]| {
        let mut clusters: Vec<Vec<usize>> = parts.iter().flatten().cloned().collect();
        clusters.sort_by_key(|c| c[0]);
        Clustering {
            clusters,
            inertia: part_inertia.iter().copied().sum(),
        }
    };
    let mut levels = vec![assemble(&parts, &part_inertia)];
    let mut split_component = vec![None];

    loop {
        let mut best: Option<(T, usize, Vec<Vec<usize>>, T)> = None;
        for c in 0..dists.len() {
            if cuts[c] >= dendrograms[c].leaves {
                continue;
            }
            let next = to_global(c, dendrograms[c].cut(cuts[c] + 1));
            let w = next.iter().try_fold(T::zero(), |acc, cl| Ok::<T, ClusterError>(acc + cluster_inertia(cl, &at, dists)?))?;
            let drop = part_inertia[c] - w;
            if best.as_ref().is_none_or(|b| drop > b.0) {
                best = Some((drop, c, next, w));
            }
        }
        let Some((_, c, next, w)) = best else { break };
        cuts[c] += 1;
        parts[c] = next;
        part_inertia[c] = w;
        levels.push(assemble(&parts, &part_inertia));
        split_component.push(Some(c));
    }
    Ok(ClusterHierarchy {
        levels,
        split_component,
        dendrograms,
    })
}

/// Default cluster-count range: from the component count to `min(35, n - 1)`.
pub fn default_cluster_range<T: Scalar>(h: &ClusterHierarchy<T>) -> (usize, usize) {
    let first = h.levels.first().map_or(0, Clustering::len);
    let n = h.levels.last().map_or(0, Clustering::len);
    (first, 35.min(n.saturating_sub(1)).max(first))
}

/// Pick the level at the elbow of inertia against cluster count, among
/// levels whose count lies in `range`. Returns the level index.
pub fn select_clustering<T: Scalar>(h: &ClusterHierarchy<T>, range: (usize, usize)) -> Result<usize, ClusterError> {
    let idx: Vec<usize> = (0..h.levels.len()).filter(|&i| (range.0..=range.1).contains(&h.levels[i].len())).collect();
    if idx.len() < 5 {
        return Err(ClusterError::TooFewLevels {
            min: range.0,
            max: range.1,
            found: idx.len(),
        });
    }
    let points: Vec<(T, T)> = idx
        .iter()
        .map(|&i| (T::from_usize_lossy(h.levels[i].len()), h.levels[i].inertia))
        .collect();
    Ok(idx[elbow_select(&points)?])
}
