// SPDX-License-Identifier: MIT OR Apache-2.0

//! Station graph over a river network.
//!
//! Stations are snapped to their nearest river node; two stations are joined
//! whenever the river connects their nodes, weighted by the river
//! shortest-path length. Coordinates are planar, in meters.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

/// Weight given to two stations snapped onto the same river node.
pub const COINCIDENT_WEIGHT_M: f64 = 1.0;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("river network has no node")]
    EmptyNetwork,
    #[error("empty station selection")]
    EmptySelection,
    #[error("unknown station {0:?}")]
    UnknownStation(String),
    #[error("stations are not all connected")]
    Disconnected,
    #[error("parse error: {0}")]
    Parse(String),
}

fn parse_err(e: impl std::fmt::Display) -> GraphError {
    GraphError::Parse(e.to_string())
}

/// Hydrographic network: nodes with planar coordinates and weighted sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiverNetwork<T> {
    pub nodes: Vec<[T; 2]>,
    /// `(node_a, node_b, length_m)`, undirected.
    pub sections: Vec<(usize, usize, T)>,
}

#[derive(Deserialize)]
struct NodeRow<T> {
    node_id: String,
    x_m: T,
    y_m: T,
}

#[derive(Deserialize)]
struct SectionRow<T> {
    node_a: String,
    node_b: String,
    length_m: T,
}

impl<T: Scalar> RiverNetwork<T> {
    pub fn new(nodes: Vec<[T; 2]>, sections: Vec<(usize, usize, T)>) -> Result<Self, GraphError> {
        if nodes.iter().flatten().any(|c| !c.is_finite()) {
            return Err(GraphError::Invalid("non-finite node coordinate".into()));
        }
        for &(a, b, len) in &sections {
            if a >= nodes.len() || b >= nodes.len() {
                return Err(GraphError::Invalid(format!("section ({a}, {b}) references a missing node")));
            }
            if !(len > T::zero()) || !len.is_finite() {
                return Err(GraphError::Invalid(format!("section ({a}, {b}) has length {len}")));
            }
        }
        Ok(Self { nodes, sections })
    }

    /// Read a node table `node_id,x_m,y_m` and a section table
    /// `node_a,node_b,length_m`. Node ids are arbitrary strings.
    pub fn read_csv<R1: Read, R2: Read>(nodes: R1, sections: R2) -> Result<Self, GraphError> {
        let mut ids = BTreeMap::new();
        let mut coords = Vec::new();
        for row in csv::Reader::from_reader(nodes).deserialize::<NodeRow<T>>() {
            let row = row.map_err(parse_err)?;
            if ids.insert(row.node_id.clone(), coords.len()).is_some() {
                return Err(GraphError::Parse(format!("duplicate node id {:?}", row.node_id)));
            }
            coords.push([row.x_m, row.y_m]);
        }
        let lookup = |id: &str| ids.get(id).copied().ok_or_else(|| GraphError::Parse(format!("unknown node id {id:?}")));
        let mut edges = Vec::new();
        for row in csv::Reader::from_reader(sections).deserialize::<SectionRow<T>>() {
            let row = row.map_err(parse_err)?;
            edges.push((lookup(&row.node_a)?, lookup(&row.node_b)?, row.length_m));
        }
        Self::new(coords, edges)
    }

    /// Build a network from a GeoJSON `FeatureCollection` of `LineString` or
    /// `MultiLineString` geometries. Vertices with identical coordinates are
    /// merged; each consecutive vertex pair becomes a section whose length is
    /// the planar distance.
    pub fn from_geojson(text: &str) -> Result<Self, GraphError> {
        let doc: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
        let features = doc["features"]
            .as_array()
            .ok_or_else(|| GraphError::Parse("expected a FeatureCollection".into()))?;
        let mut index: BTreeMap<(u64, u64), usize> = BTreeMap::new();
        let mut nodes: Vec<[T; 2]> = Vec::new();
        let mut sections = Vec::new();
        for f in features {
            let geom = &f["geometry"];
            let lines: Vec<&serde_json::Value> = match geom["type"].as_str() {
                Some("LineString") => vec![&geom["coordinates"]],
                Some("MultiLineString") => geom["coordinates"].as_array().map(|v| v.iter().collect()).unwrap_or_default(),
                _ => continue,
            };
            for line in lines {
                let pts = line.as_array().ok_or_else(|| GraphError::Parse("bad coordinates".into()))?;
                let mut prev: Option<usize> = None;
                for p in pts {
                    let x = p[0].as_f64().ok_or_else(|| GraphError::Parse("bad coordinate".into()))?;
                    let y = p[1].as_f64().ok_or_else(|| GraphError::Parse("bad coordinate".into()))?;
                    let id = *index.entry((x.to_bits(), y.to_bits())).or_insert_with(|| {
                        nodes.push([T::lit(x), T::lit(y)]);
                        nodes.len() - 1
                    });
                    if let Some(a) = prev {
                        if a != id {
                            sections.push((a, id, euclid(&nodes[a], &nodes[id])));
                        }
                    }
                    prev = Some(id);
                }
            }
        }
        Self::new(nodes, sections)
    }

    fn adjacency(&self) -> Vec<Vec<(usize, T)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b, w) in &self.sections {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        adj
    }
}

fn euclid<T: Scalar>(a: &[T; 2], b: &[T; 2]) -> T {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// A monitoring station with planar coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station<T> {
    #[serde(rename = "station_id")]
    pub id: String,
    #[serde(rename = "x_m")]
    pub x: T,
    #[serde(rename = "y_m")]
    pub y: T,
}

impl<T: Scalar> Station<T> {
    pub fn new(id: impl Into<String>, x: T, y: T) -> Self {
        Self { id: id.into(), x, y }
    }
}

/// Read `station_id,x_m,y_m`.
pub fn read_stations<T: Scalar, R: Read>(input: R) -> Result<Vec<Station<T>>, GraphError> {
    csv::Reader::from_reader(input)
        .deserialize::<Station<T>>()
        .map(|r| r.map_err(parse_err))
        .collect()
}

/// Nearest river node of every station; ties go to the lower node index.
pub fn snap_stations<T: Scalar>(stations: &[Station<T>], river: &RiverNetwork<T>) -> Result<BTreeMap<String, usize>, GraphError> {
    if river.nodes.is_empty() {
        return Err(GraphError::EmptyNetwork);
    }
    Ok(stations
        .iter()
        .map(|s| {
            let p = [s.x, s.y];
            let mut best = 0;
            let mut best_d = T::infinity();
            for (i, n) in river.nodes.iter().enumerate() {
                let d = euclid(&p, n);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            (s.id.clone(), best)
        })
        .collect())
}

#[derive(Clone, Copy)]
struct Frontier<T> {
    dist: T,
    node: usize,
}

impl<T: PartialOrd> PartialEq for Frontier<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: PartialOrd> Eq for Frontier<T> {}

impl<T: PartialOrd> PartialOrd for Frontier<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: PartialOrd> Ord for Frontier<T> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Single-source shortest paths; unreachable nodes get `+∞`.
fn dijkstra<T: Scalar>(adj: &[Vec<(usize, T)>], source: usize) -> Vec<T> {
    let mut dist = vec![T::infinity(); adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = T::zero();
    heap.push(Frontier { dist: T::zero(), node: source });
    while let Some(Frontier { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(Frontier { dist: nd, node: next });
            }
        }
    }
    dist
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index as root keeps labels deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Symmetric dense matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DistanceMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    /// From nested rows; the input must be square.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.n.max(1)).take(self.n).map(<[T]>::to_vec).collect()
    }
}

/// Undirected weighted graph over stations, with its connected components.
#[derive(Debug, Clone, PartialEq)]
pub struct StationGraph<T> {
    pub stations: Vec<Station<T>>,
    adjacency: Vec<Vec<(usize, T)>>,
    /// Station indices per component, each sorted; components ordered by
    /// their first station.
    pub components: Vec<Vec<usize>>,
}

impl<T: Scalar> StationGraph<T> {
    /// Graph from an explicit edge list `(i, j, weight)` over `stations`.
    pub fn from_edges(stations: Vec<Station<T>>, edges: &[(usize, usize, T)]) -> Result<Self, GraphError> {
        let n = stations.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            if a >= n || b >= n || a == b {
                return Err(GraphError::Invalid(format!("edge ({a}, {b})")));
            }
            if !(w > T::zero()) || !w.is_finite() {
                return Err(GraphError::Invalid(format!("edge ({a}, {b}) has weight {w}")));
            }
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for row in &mut adjacency {
            row.sort_by_key(|e| e.0);
        }
        let components = components_of(&adjacency);
        Ok(Self {
            stations,
            adjacency,
            components,
        })
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }

    /// Neighbours of station `i` with edge weights, by increasing index.
    pub fn neighbors(&self, i: usize) -> &[(usize, T)] {
        &self.adjacency[i]
    }

    /// All edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, T)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |(j, _)| *j > i).map(move |&(j, w)| (i, j, w)))
            .collect()
    }

    pub fn edge_weight(&self, i: usize, j: usize) -> Option<T> {
        self.adjacency[i].iter().find(|(k, _)| *k == j).map(|&(_, w)| w)
    }

    /// Component label per station.
    pub fn component_labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.len()];
        for (c, members) in self.components.iter().enumerate() {
            for &i in members {
                labels[i] = c;
            }
        }
        labels
    }

    /// Subgraph on the stations in `keep`, with weights and station order
    /// preserved and components recomputed.
    pub fn induced_subgraph(&self, keep: &BTreeSet<String>) -> Result<Self, GraphError> {
        if keep.is_empty() {
            return Err(GraphError::EmptySelection);
        }
        if let Some(missing) = keep.iter().find(|id| self.index_of(id).is_none()) {
            return Err(GraphError::UnknownStation(missing.clone()));
        }
        let old: Vec<usize> = (0..self.len()).filter(|&i| keep.contains(&self.stations[i].id)).collect();
        let mut new_of = vec![usize::MAX; self.len()];
        for (k, &i) in old.iter().enumerate() {
            new_of[i] = k;
        }
        let edges: Vec<(usize, usize, T)> = self
            .edges()
            .into_iter()
            .filter(|&(a, b, _)| new_of[a] != usize::MAX && new_of[b] != usize::MAX)
            .map(|(a, b, w)| (new_of[a], new_of[b], w))
            .collect();
        Self::from_edges(old.iter().map(|&i| self.stations[i].clone()).collect(), &edges)
    }

    /// All-pairs shortest-path distances among `members`, in the given order.
    pub fn shortest_path_matrix(&self, members: &[usize]) -> Result<DistanceMatrix<T>, GraphError> {
        if members.is_empty() {
            return Err(GraphError::EmptySelection);
        }
        if let Some(&bad) = members.iter().find(|&&i| i >= self.len()) {
            return Err(GraphError::Invalid(format!("station index {bad}")));
        }
        let mut m = DistanceMatrix::zeros(members.len());
        for (a, &i) in members.iter().enumerate() {
            let dist = dijkstra(&self.adjacency, i);
            for (b, &j) in members.iter().enumerate().skip(a + 1) {
                if !dist[j].is_finite() {
                    return Err(GraphError::Disconnected);
                }
                m.set_sym(a, b, dist[j]);
            }
        }
        Ok(m)
    }

    /// JSON-friendly adjacency view.
    pub fn export(&self) -> GraphExport<T> {
        let labels = self.component_labels();
        GraphExport {
            stations: self
                .stations
                .iter()
                .zip(labels)
                .map(|(s, component)| ExportStation {
                    id: s.id.clone(),
                    x: s.x,
                    y: s.y,
                    component,
                })
                .collect(),
            edges: self
                .edges()
                .into_iter()
                .map(|(a, b, weight)| ExportEdge {
                    a: self.stations[a].id.clone(),
                    b: self.stations[b].id.clone(),
                    weight,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport<T> {
    pub stations: Vec<ExportStation<T>>,
    pub edges: Vec<ExportEdge<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportStation<T> {
    pub id: String,
    pub x: T,
    pub y: T,
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportEdge<T> {
    pub a: String,
    pub b: String,
    pub weight: T,
}

fn components_of<T>(adj: &[Vec<(usize, T)>]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(adj.len());
    for (i, row) in adj.iter().enumerate() {
        for &(j, _) in row {
            uf.union(i, j);
        }
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..adj.len() {
        let r = uf.find(i);
        by_root.entry(r).or_default().push(i);
    }
    by_root.into_values().collect()
}

/// Build the station graph: stations (sorted by id) are snapped to the river,
/// and every river-connected pair is joined by an edge weighted with the
/// river shortest-path length.
pub fn build_station_graph<T: Scalar>(stations: &[Station<T>], river: &RiverNetwork<T>) -> Result<StationGraph<T>, GraphError> {
    let mut stations = stations.to_vec();
    stations.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = stations.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(GraphError::Invalid(format!("duplicate station id {:?}", w[0].id)));
    }
    let snapped = snap_stations(&stations, river)?;
    let nodes: Vec<usize> = stations.iter().map(|s| snapped[&s.id]).collect();
    let adj = river.adjacency();

    let eps = T::lit(COINCIDENT_WEIGHT_M);
    let mut from_node: BTreeMap<usize, Vec<T>> = BTreeMap::new();
    let mut edges = Vec::new();
    for i in 0..stations.len() {
        let dist = from_node.entry(nodes[i]).or_insert_with(|| dijkstra(&adj, nodes[i]));
        for j in i + 1..stations.len() {
            let d = dist[nodes[j]];
            if d.is_finite() {
                edges.push((i, j, if d > T::zero() { d } else { eps }));
            }
        }
    }
    StationGraph::from_edges(stations, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn y_river() -> RiverNetwork<f64> {
        // fork at node 0, three 100 m branches
        RiverNetwork::new(
            vec![[0.0, 0.0], [100.0, 0.0], [-50.0, 86.6], [-50.0, -86.6]],
            vec![(0, 1, 100.0), (0, 2, 100.0), (0, 3, 100.0)],
        )
        .unwrap()
    }

    fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(a, b, w) in edges {
            d[a][b] = d[a][b].min(w);
            d[b][a] = d[b][a].min(w);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    fn numbered(n: usize) -> Vec<Station<f64>> {
        (0..n).map(|i| Station::new(format!("s{i:02}"), i as f64, 0.0)).collect()
    }

    #[test]
    fn snapping_exact_and_ties() {
        let river = RiverNetwork::new(vec![[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]], vec![]).unwrap();
        let st = vec![Station::new("on", 10.0, 0.0), Station::new("mid", 5.0, 0.0), Station::new("far", 30.0, 1.0)];
        let snap = snap_stations(&st, &river).unwrap();
        assert_eq!(snap["on"], 1);
        assert_eq!(snap["mid"], 0);
        assert_eq!(snap["far"], 2);
        let empty = RiverNetwork::<f64>::new(vec![], vec![]).unwrap();
        assert!(matches!(snap_stations(&st, &empty), Err(GraphError::EmptyNetwork)));
    }

    #[test]
    fn snapping_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nodes: Vec<[f64; 2]> = (0..40).map(|_| [rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)]).collect();
        let river = RiverNetwork::new(nodes.clone(), vec![]).unwrap();
        let st: Vec<Station<f64>> = (0..30).map(|i| Station::new(i.to_string(), rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0))).collect();
        let snap = snap_stations(&st, &river).unwrap();
        for s in &st {
            let d2 = |n: &[f64; 2]| (n[0] - s.x).powi(2) + (n[1] - s.y).powi(2);
            let best = (0..nodes.len()).min_by(|&a, &b| d2(&nodes[a]).partial_cmp(&d2(&nodes[b])).unwrap()).unwrap();
            assert_eq!(snap[&s.id], best);
        }
    }

    #[test]
    fn y_shaped_river_tips() {
        let st = vec![Station::new("a", 100.0, 0.0), Station::new("b", -50.0, 86.6), Station::new("c", -50.0, -86.6)];
        let g = build_station_graph(&st, &y_river()).unwrap();
        let e = g.edges();
        assert_eq!(e.len(), 3);
        assert!(e.iter().all(|&(_, _, w)| w == 200.0));
        assert_eq!(g.components, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn disjoint_rivers_and_isolated_node() {
        let river = RiverNetwork::new(
            vec![[0.0, 0.0], [10.0, 0.0], [1000.0, 0.0], [1010.0, 0.0], [5000.0, 5000.0]],
            vec![(0, 1, 10.0), (2, 3, 10.0)],
        )
        .unwrap();
        let st = vec![
            Station::new("a", 0.0, 0.0),
            Station::new("b", 10.0, 0.0),
            Station::new("c", 1000.0, 0.0),
            Station::new("d", 1010.0, 1.0),
            Station::new("e", 4990.0, 5000.0),
        ];
        let g = build_station_graph(&st, &river).unwrap();
        assert_eq!(g.components, vec![vec![0, 1], vec![2, 3], vec![4]]);
        assert_eq!(g.edges().len(), 2);
        for (i, j, _) in g.edges() {
            assert_eq!(g.component_labels()[i], g.component_labels()[j]);
        }
    }

    #[test]
    fn coincident_stations_get_unit_weight() {
        let st = vec![Station::new("a", 100.0, 0.0), Station::new("b", 101.0, 0.0)];
        let g = build_station_graph(&st, &y_river()).unwrap();
        assert_eq!(g.edge_weight(0, 1), Some(COINCIDENT_WEIGHT_M));
    }

    #[test]
    fn reordering_inputs_is_harmless() {
        let river = y_river();
        let st = vec![Station::new("c", -50.0, -86.6), Station::new("a", 100.0, 0.0), Station::new("b", -50.0, 86.6)];
        let mut rev = st.clone();
        rev.reverse();
        let river_rev = RiverNetwork::new(river.nodes.clone(), river.sections.iter().rev().copied().collect()).unwrap();
        assert_eq!(build_station_graph(&st, &river).unwrap(), build_station_graph(&rev, &river_rev).unwrap());
    }

    #[test]
    fn induced_subgraph_cases() {
        let st = vec![Station::new("a", 100.0, 0.0), Station::new("b", -50.0, 86.6), Station::new("c", -50.0, -86.6), Station::new("d", 0.0, 0.0)];
        let g = build_station_graph(&st, &y_river()).unwrap();
        let all: BTreeSet<String> = st.iter().map(|s| s.id.clone()).collect();
        assert_eq!(g.induced_subgraph(&all).unwrap(), g);
        let one = g.induced_subgraph(&["b".to_string()].into()).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one.edges().is_empty());
        let three = g.induced_subgraph(&["a", "b", "c"].map(String::from).into()).unwrap();
        for (i, j, w) in three.edges() {
            let (oi, oj) = (g.index_of(&three.stations[i].id).unwrap(), g.index_of(&three.stations[j].id).unwrap());
            assert_eq!(g.edge_weight(oi, oj), Some(w));
        }
        assert!(matches!(g.induced_subgraph(&BTreeSet::new()), Err(GraphError::EmptySelection)));
        assert!(matches!(g.induced_subgraph(&["zz".to_string()].into()), Err(GraphError::UnknownStation(_))));
    }

    #[test]
    fn small_matrices() {
        let g = StationGraph::from_edges(numbered(2), &[(0, 1, 4.5)]).unwrap();
        assert_eq!(g.shortest_path_matrix(&[0, 1]).unwrap().rows(), vec![vec![0.0, 4.5], vec![4.5, 0.0]]);
        let g = StationGraph::from_edges(numbered(3), &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        assert_eq!(g.shortest_path_matrix(&[0, 1, 2]).unwrap().get(0, 2), 3.0);
        let g = StationGraph::from_edges(numbered(3), &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(g.shortest_path_matrix(&[0, 1, 2]), Err(GraphError::Disconnected)));
    }

    #[test]
    fn river_csv_and_geojson() {
        let nodes = "node_id,x_m,y_m\nfork,0,0\ntip,100,0\nup,0,50\n";
        let secs = "node_a,node_b,length_m\nfork,tip,120\nfork,up,50\n";
        let r = RiverNetwork::<f64>::read_csv(nodes.as_bytes(), secs.as_bytes()).unwrap();
        assert_eq!(r.sections, vec![(0, 1, 120.0), (0, 2, 50.0)]);
        assert!(RiverNetwork::<f64>::read_csv(nodes.as_bytes(), "node_a,node_b,length_m\nfork,x,1\n".as_bytes()).is_err());
        assert!(RiverNetwork::<f64>::read_csv(nodes.as_bytes(), "node_a,node_b,length_m\nfork,tip,0\n".as_bytes()).is_err());

        let gj = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","geometry":{"type":"LineString","coordinates":[[0,0],[3,4],[3,10]]}},
            {"type":"Feature","geometry":{"type":"MultiLineString","coordinates":[[[3,4],[6,8]]]}}]}"#;
        let r = RiverNetwork::<f64>::from_geojson(gj).unwrap();
        assert_eq!(r.nodes.len(), 4);
        assert_eq!(r.sections, vec![(0, 1, 5.0), (1, 2, 6.0), (1, 3, 5.0)]);

        let st = read_stations::<f64, _>("station_id,x_m,y_m\nA,1,2\n".as_bytes()).unwrap();
        assert_eq!(st, vec![Station::new("A", 1.0, 2.0)]);
    }

    #[test]
    fn export_labels_components() {
        let g = StationGraph::from_edges(numbered(3), &[(1, 2, 2.0)]).unwrap();
        let ex = g.export();
        assert_eq!(ex.stations.iter().map(|s| s.component).collect::<Vec<_>>(), vec![0, 1, 1]);
        assert_eq!(ex.edges.len(), 1);
        assert!(serde_json::to_string(&ex).unwrap().contains("\"weight\":2.0"));
    }

    proptest! {
        #[test]
        fn matches_floyd_warshall(n in 2usize..=12, raw in prop::collection::vec((0usize..12, 0usize..12, 1u32..1000), 0..40)) {
            let edges: Vec<(usize, usize, f64)> = raw.into_iter().filter(|(a, b, _)| a < &n && b < &n && a != b).map(|(a, b, w)| (a, b, w as f64)).collect();
            let g = StationGraph::from_edges(numbered(n), &edges).unwrap();
            let fw = floyd_warshall(n, &edges);
            for comp in &g.components {
                let m = g.shortest_path_matrix(comp).unwrap();
                for (a, &i) in comp.iter().enumerate() {
                    for (b, &j) in comp.iter().enumerate() {
                        prop_assert_eq!(m.get(a, b), fw[i][j]);
                        for c in 0..comp.len() {
                            prop_assert!(m.get(a, b) <= m.get(a, c) + m.get(c, b));
                        }
                    }
                }
            }
            // components partition the stations
            let mut seen: Vec<usize> = g.components.iter().flatten().copied().collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
    }
}
