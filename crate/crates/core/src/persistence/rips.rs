//! Vietoris–Rips persistence in dimensions 0 and 1.
//!
//! Dimension 0 comes from Kruskal's algorithm over the edge order. Dimension
//! 1 is computed by reducing edge coboundaries (columns in reverse
//! filtration order, pivot = earliest cofacet triangle), with the MST edges
//! cleared. The complex is truncated at the cone radius
//! `min_i max_j d(i, j)`: at that scale it is a cone, so every 1-cycle is
//! already dead and no pair is lost.

use std::collections::HashMap;

use super::{FiltrationKind, PersistenceDiagram, PersistencePair, PointCloud};
use crate::error::{Error, Result};
use crate::union_find::UnionFind;

pub const DEFAULT_RIPS_CAP: usize = 256;

struct Distances {
    n: usize,
    d: Vec<f64>,
}

impl Distances {
    fn new(pc: &PointCloud) -> Self {
        let n = pc.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = pc.distance(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// Largest pairwise distance; zero for fewer than two points.
pub fn diameter(pc: &PointCloud) -> f64 {
    let n = pc.len();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            best = best.max(pc.distance(i, j));
        }
    }
    best
}

/// `min_i max_j d(i, j)`: the scale at which the Rips complex becomes a cone.
pub fn cone_radius(pc: &PointCloud) -> f64 {
    let n = pc.len();
    (0..n)
        .map(|i| (0..n).map(|j| pc.distance(i, j)).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    value: f64,
    a: u32,
    b: u32,
}

/// A triangle keyed by its filtration order: value, then vertex triple.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Cofacet {
    value: f64,
    key: u64,
}

impl Cofacet {
    fn cmp_order(&self, other: &Self) -> std::cmp::Ordering {
        self.value.total_cmp(&other.value).then(self.key.cmp(&other.key))
    }
}

fn triangle_key(n: usize, mut v: [usize; 3]) -> u64 {
    v.sort_unstable();
    let n = n as u64;
    (v[0] as u64 * n + v[1] as u64) * n + v[2] as u64
}

fn sorted_edges(dist: &Distances, threshold: f64) -> Vec<Edge> {
    let n = dist.n;
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            let value = dist.get(a, b);
            if value <= threshold {
                edges.push(Edge {
                    value,
                    a: a as u32,
                    b: b as u32,
                });
            }
        }
    }
    edges.sort_by(|x, y| {
        x.value
            .total_cmp(&y.value)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    edges
}

fn coboundary(dist: &Distances, e: &Edge, threshold: f64) -> Vec<Cofacet> {
    let (a, b) = (e.a as usize, e.b as usize);
    let mut col: Vec<Cofacet> = (0..dist.n)
        .filter(|&k| k != a && k != b)
        .filter_map(|k| {
            let value = e.value.max(dist.get(a, k)).max(dist.get(b, k));
            (value <= threshold).then(|| Cofacet {
                value,
                key: triangle_key(dist.n, [a, b, k]),
            })
        })
        .collect();
    col.sort_by(Cofacet::cmp_order);
    col
}

/// Z/2 sum of two columns sorted in filtration order.
fn add_columns(x: &[Cofacet], y: &[Cofacet]) -> Vec<Cofacet> {
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() && j < y.len() {
        match x[i].cmp_order(&y[j]) {
            std::cmp::Ordering::Less => {
                out.push(x[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(y[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&x[i..]);
    out.extend_from_slice(&y[j..]);
    out
}

/// Rips persistence with the default point cap.
pub fn rips_pd(pc: &PointCloud, max_dim: usize) -> Result<Vec<PersistenceDiagram>> {
    rips_pd_with_cap(pc, max_dim, DEFAULT_RIPS_CAP)
}

/// Diagrams for dimensions `0..=max_dim` (`max_dim` ≤ 1). Zero-persistence
/// pairs are omitted.
pub fn rips_pd_with_cap(
    pc: &PointCloud,
    max_dim: usize,
    n_cap: usize,
) -> Result<Vec<PersistenceDiagram>> {
    let n = pc.len();
    if n == 0 {
        return Err(Error::invalid("Rips persistence of an empty point cloud"));
    }
    if n > n_cap {
        return Err(Error::TooLarge { n, cap: n_cap });
    }
    if max_dim > 1 {
        return Err(Error::invalid(format!("homology dimension {max_dim} not supported")));
    }
    let dist = Distances::new(pc);

    let all_edges = sorted_edges(&dist, f64::INFINITY);
    let mut uf = UnionFind::new(n);
    let mut h0 = Vec::with_capacity(n);
    let mut is_tree_edge = vec![false; n * n];
    for e in &all_edges {
        if uf.union(e.a as usize, e.b as usize).is_some() {
            is_tree_edge[e.a as usize * n + e.b as usize] = true;
            if e.value > 0.0 {
                h0.push(PersistencePair::new(0.0, e.value));
            }
        }
    }
    h0.push(PersistencePair::new(0.0, f64::INFINITY));
    let mut diagrams = vec![PersistenceDiagram::new(0, FiltrationKind::Rips, h0)];
    if max_dim == 0 {
        return Ok(diagrams);
    }

    let threshold = cone_radius(pc);
    let edges: Vec<&Edge> = all_edges.iter().take_while(|e| e.value <= threshold).collect();
    let mut pivots: HashMap<u64, usize> = HashMap::new();
    let mut reduced: Vec<Vec<Cofacet>> = Vec::new();
    let mut h1 = Vec::new();
    let mut truncated = false;
    for e in edges.iter().rev() {
        if is_tree_edge[e.a as usize * n + e.b as usize] {
            continue;
        }
        let mut col = coboundary(&dist, e, threshold);
        loop {
            let Some(pivot) = col.first().copied() else { break };
            match pivots.get(&pivot.key) {
                Some(&other) => col = add_columns(&col, &reduced[other]),
                None => break,
            }
        }
        match col.first() {
            Some(pivot) => {
                if pivot.value > e.value {
                    h1.push(PersistencePair::new(e.value, pivot.value));
                }
                pivots.insert(pivot.key, reduced.len());
                reduced.push(col);
            }
            None => {
                if threshold > e.value {
                    h1.push(PersistencePair::new(e.value, threshold));
                    truncated = true;
                }
            }
        }
    }
    let mut d1 = PersistenceDiagram::new(1, FiltrationKind::Rips, h1);
    d1.truncated = truncated;
    diagrams.push(d1);
    Ok(diagrams)
}
