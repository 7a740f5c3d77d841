//! Combinatorics of the comb graph: a horizontal spine `{(k, 0)}` with a
//! vertical tooth `{(k, l) : l >= 0}` hanging off every spine vertex.
//!
//! Vertices are graded by their distance `k + l` to the root `(0, 0)`. Level
//! `n` is enumerated spine-first, `(n, 0), (n - 1, 1), ..., (0, n)`, and the
//! volume of level `n` is the concatenation of levels `0..=n`. Every site
//! ordering used elsewhere in the crate derives from these two orders.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A vertex `(k, l)` of the comb: `k` along the spine, `l` up the tooth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Vertex {
    pub k: usize,
    pub l: usize,
}

impl Vertex {
    pub const ROOT: Vertex = Vertex { k: 0, l: 0 };

    pub const fn new(k: usize, l: usize) -> Self {
        Self { k, l }
    }

    /// Graph distance to the root.
    pub const fn level(self) -> usize {
        self.k + self.l
    }

    pub const fn is_spine(self) -> bool {
        self.l == 0
    }

    pub fn successors(self) -> Vec<Vertex> {
        successors(self)
    }

    pub fn class(self) -> VertexClass {
        classify(self)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k, self.l)
    }
}

impl From<[usize; 2]> for Vertex {
    fn from([k, l]: [usize; 2]) -> Self {
        Self { k, l }
    }
}

impl From<Vertex> for [usize; 2] {
    fn from(v: Vertex) -> Self {
        [v.k, v.l]
    }
}

impl From<(usize, usize)> for Vertex {
    fn from((k, l): (usize, usize)) -> Self {
        Self { k, l }
    }
}

/// Number of direct successors: tooth vertices have one, spine vertices two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexClass {
    L1,
    L2,
}

/// The vertices at distance `n` from the root, in spine-first order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Level {
    pub n: usize,
    pub vertices: Vec<Vertex>,
}

impl Level {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vertex> {
        self.vertices.iter()
    }
}

/// Direct successors. Spine vertices yield `[v + e1, v + e2]` in that order.
pub fn successors(v: Vertex) -> Vec<Vertex> {
    if v.is_spine() {
        vec![Vertex::new(v.k + 1, 0), Vertex::new(v.k, 1)]
    } else {
        vec![Vertex::new(v.k, v.l + 1)]
    }
}

pub fn classify(v: Vertex) -> VertexClass {
    if v.is_spine() {
        VertexClass::L2
    } else {
        VertexClass::L1
    }
}

pub fn level(n: usize) -> Level {
    let vertices = (0..=n).map(|l| Vertex::new(n - l, l)).collect();
    Level { n, vertices }
}

/// Levels `0..=n` concatenated; `(n + 1)(n + 2) / 2` vertices.
pub fn volume(n: usize) -> Vec<Vertex> {
    (0..=n).flat_map(|m| level(m).vertices).collect()
}

pub const fn volume_size(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

/// Shift along the spine by `n` steps.
pub const fn translate(v: Vertex, n: usize) -> Vertex {
    Vertex::new(v.k + n, v.l)
}

/// Levels `n` and `n + 1` as one site list (the support of a layer kernel,
/// up to ordering).
pub fn layer_sites(n: usize) -> Vec<Vertex> {
    let mut sites = level(n).vertices;
    sites.extend(level(n + 1).vertices);
    sites
}
