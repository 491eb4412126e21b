//! Place graphs for the selection net.
//!
//! Places are antennas; an edge lets a token hop between its endpoints.
//! Every directed edge `from -> to` carries the neighbourhood whose capacity
//! decides whether a token at `from` may move to `to`.
//!
//! [`build_toroid`] lays `rows x cols` places out row-major (place
//! `r * cols + c`), wraps both axes, links Von Neumann neighbours and gives
//! each place two overlapping neighbourhoods: its own column plus the column
//! to the left governs its LEFT and DOWN edges, its own column plus the
//! column to the right governs its RIGHT and UP edges. On the 4 x 16 layout
//! place 0 neighbours places 1, 15, 16 and 48.

mod io;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub use io::{read_topology, write_topology};

use crate::channel::Point;
use crate::error::{Error, Result};

pub type PlaceId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RpnTopology {
    pub n_places: usize,
    /// Undirected edges, stored as `(low, high)`.
    pub edges: BTreeSet<(PlaceId, PlaceId)>,
    /// Neighbourhood governing a token move `from -> to`.
    pub edge_neighbourhood: BTreeMap<(PlaceId, PlaceId), Vec<PlaceId>>,
    /// Antenna index of every place.
    pub place_to_antenna: Vec<usize>,
}

impl RpnTopology {
    /// Places adjacent to `place`, ascending.
    pub fn neighbours(&self, place: PlaceId) -> Vec<PlaceId> {
        let mut out: Vec<PlaceId> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == place {
                    Some(b)
                } else if b == place {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Adjacency list for every place, ascending.
    pub fn adjacency(&self) -> Vec<Vec<PlaceId>> {
        let mut adj = vec![Vec::new(); self.n_places];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj.iter_mut().for_each(|v| v.sort_unstable());
        adj
    }

    pub fn neighbourhood(&self, from: PlaceId, to: PlaceId) -> Option<&[PlaceId]> {
        self.edge_neighbourhood.get(&(from, to)).map(Vec::as_slice)
    }

    pub fn antenna(&self, place: PlaceId) -> usize {
        self.place_to_antenna[place]
    }

    pub fn is_connected(&self) -> bool {
        if self.n_places == 0 {
            return false;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n_places];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(p) = queue.pop_front() {
            for &q in &adj[p] {
                if !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Replaces the place-to-antenna assignment; `mapping` must be a
    /// permutation of `0..n_places`.
    pub fn with_mapping(mut self, mapping: Vec<usize>) -> Result<Self> {
        self.place_to_antenna = mapping;
        let problems = validate(&self);
        if problems.is_empty() {
            Ok(self)
        } else {
            Err(Error::Topology(problems))
        }
    }
}

/// Lists every broken invariant; empty when the topology is sound.
pub fn validate(t: &RpnTopology) -> Vec<String> {
    let mut problems = Vec::new();
    if t.n_places == 0 {
        problems.push("topology has no places".to_string());
        return problems;
    }
    for &(a, b) in &t.edges {
        if a == b {
            problems.push(format!("edge ({a}, {b}) is a self loop"));
            continue;
        }
        if a > b {
            problems.push(format!("edge ({a}, {b}) is not stored as (low, high)"));
        }
        if a >= t.n_places || b >= t.n_places {
            problems.push(format!("edge ({a}, {b}) references a missing place"));
            continue;
        }
        for (from, to) in [(a, b), (b, a)] {
            match t.edge_neighbourhood.get(&(from, to)) {
                None => problems.push(format!("edge ({from}, {to}) has no neighbourhood")),
                Some(n) => {
                    if !n.contains(&from) || !n.contains(&to) {
                        problems.push(format!("neighbourhood of edge ({from}, {to}) misses an endpoint"));
                    }
                    if n.iter().any(|&p| p >= t.n_places) {
                        problems.push(format!(
                            "neighbourhood of edge ({from}, {to}) references a missing place"
                        ));
                    }
                    let distinct: BTreeSet<_> = n.iter().collect();
                    if distinct.len() != n.len() {
                        problems.push(format!("neighbourhood of edge ({from}, {to}) repeats a place"));
                    }
                }
            }
        }
    }
    for &(from, to) in t.edge_neighbourhood.keys() {
        let key = (from.min(to), from.max(to));
        if !t.edges.contains(&key) {
            problems.push(format!("neighbourhood given for ({from}, {to}) which is not an edge"));
        }
    }
    let mut mapped = t.place_to_antenna.clone();
    mapped.sort_unstable();
    if mapped != (0..t.n_places).collect::<Vec<_>>() {
        problems.push("place_to_antenna is not a bijection onto 0..n_places".to_string());
    }
    if !t.is_connected() {
        problems.push("graph not connected".to_string());
    }
    problems
}

/// Builds and validates an arbitrary topology.
pub fn build_custom(
    n_places: usize,
    edges: &[(PlaceId, PlaceId)],
    neighbourhoods: BTreeMap<(PlaceId, PlaceId), Vec<PlaceId>>,
) -> Result<RpnTopology> {
    let t = RpnTopology {
        n_places,
        edges: edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect(),
        edge_neighbourhood: neighbourhoods,
        place_to_antenna: (0..n_places).collect(),
    };
    let problems = validate(&t);
    if problems.is_empty() {
        Ok(t)
    } else {
        Err(Error::Topology(problems))
    }
}

/// Gives both directions of every edge the same neighbourhood.
pub fn symmetric_neighbourhoods(
    assignments: &[((PlaceId, PlaceId), Vec<PlaceId>)],
) -> BTreeMap<(PlaceId, PlaceId), Vec<PlaceId>> {
    let mut map = BTreeMap::new();
    for ((a, b), n) in assignments {
        map.insert((*a, *b), n.clone());
        map.insert((*b, *a), n.clone());
    }
    map
}

/// How a toroid edge's two directions pick their neighbourhoods.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRule {
    /// Both directions use the neighbourhood the lower-numbered endpoint
    /// assigns to the edge, so a move and its reverse share one guard.
    #[default]
    LowerEndpoint,
    /// Each direction uses the neighbourhood of the place the token leaves.
    /// Vertical moves and their reverses are then judged in different
    /// neighbourhoods and can cycle.
    Directed,
}

/// Wrapped `rows x cols` grid with the two-column neighbourhood scheme.
pub fn build_toroid(rows: usize, cols: usize) -> Result<RpnTopology> {
    build_toroid_with(rows, cols, EdgeRule::default())
}

pub fn build_toroid_with(rows: usize, cols: usize, rule: EdgeRule) -> Result<RpnTopology> {
    if rows < 2 || cols < 2 {
        return Err(Error::Domain(format!(
            "toroid needs at least 2 rows and 2 columns, got {rows}x{cols}"
        )));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let column = |c: usize| (0..rows).map(move |r| id(r, c));
    let mut edges = BTreeSet::new();
    let mut neighbourhoods = BTreeMap::<(PlaceId, PlaceId), Vec<PlaceId>>::new();
    for r in 0..rows {
        for c in 0..cols {
            let p = id(r, c);
            let left_col = (c + cols - 1) % cols;
            let right_col = (c + 1) % cols;
            let left_nbhd: Vec<_> = if left_col == c {
                column(c).collect()
            } else {
                column(left_col).chain(column(c)).collect()
            };
            let right_nbhd: Vec<_> = if right_col == c {
                column(c).collect()
            } else {
                column(c).chain(column(right_col)).collect()
            };
            let left = id(r, left_col);
            let down = id((r + 1) % rows, c);
            let right = id(r, right_col);
            let up = id((r + rows - 1) % rows, c);
            let candidates = [
                (left, &left_nbhd),
                (down, &left_nbhd),
                (right, &right_nbhd),
                (up, &right_nbhd),
            ];
            for (q, nbhd) in candidates {
                edges.insert((p.min(q), p.max(q)));
                // A neighbour reached twice through the wrap keeps the
                // lexicographically smaller neighbourhood.
                let keep = match neighbourhoods.get(&(p, q)) {
                    Some(existing) => sorted(nbhd) < sorted(existing),
                    None => true,
                };
                if keep {
                    neighbourhoods.insert((p, q), nbhd.clone());
                }
            }
        }
    }
    if rule == EdgeRule::LowerEndpoint {
        for &(a, b) in &edges {
            let n = neighbourhoods[&(a, b)].clone();
            neighbourhoods.insert((b, a), n);
        }
    }
    let t = RpnTopology {
        n_places: rows * cols,
        edges,
        edge_neighbourhood: neighbourhoods,
        place_to_antenna: (0..rows * cols).collect(),
    };
    debug_assert!(validate(&t).is_empty());
    Ok(t)
}

fn sorted(v: &[PlaceId]) -> Vec<PlaceId> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s
}

/// Place-to-antenna assignment that keeps the toroid spatially coherent:
/// antennas are split into `rows` bands by `y`, each band ordered by `x`.
pub fn spatial_toroid_mapping(positions: &[Point], rows: usize, cols: usize) -> Result<Vec<usize>> {
    if positions.len() != rows * cols {
        return Err(Error::Contract(format!(
            "{} positions cannot fill a {rows}x{cols} toroid",
            positions.len()
        )));
    }
    let mut by_y: Vec<usize> = (0..positions.len()).collect();
    by_y.sort_by(|&a, &b| positions[a].y.total_cmp(&positions[b].y).then(a.cmp(&b)));
    let mut mapping = Vec::with_capacity(positions.len());
    for band in by_y.chunks(cols) {
        let mut band = band.to_vec();
        band.sort_by(|&a, &b| positions[a].x.total_cmp(&positions[b].x).then(a.cmp(&b)));
        mapping.extend(band);
    }
    Ok(mapping)
}
