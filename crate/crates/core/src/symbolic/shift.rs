use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite directed graph whose edges are the symbols of a subshift of finite
/// type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawShift", into = "RawShift")]
pub struct MarkovShift {
    vertex_count: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    out_edges: Vec<Vec<usize>>,
    period: usize,
}

#[derive(Serialize, Deserialize)]
struct RawShift {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<RawShift> for MarkovShift {
    type Error = Error;
    fn try_from(raw: RawShift) -> Result<Self> {
        MarkovShift::new(raw.vertex_count, &raw.edges)
    }
}

impl From<MarkovShift> for RawShift {
    fn from(s: MarkovShift) -> Self {
        RawShift {
            vertex_count: s.vertex_count,
            edges: s.source.iter().copied().zip(s.target.iter().copied()).collect(),
        }
    }
}

impl MarkovShift {
    /// Builds a shift from `(source, target)` pairs.
    ///
    /// Rejects graphs that are not strongly connected; every vertex then has
    /// incoming and outgoing edges automatically.
    pub fn new(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if vertex_count == 0 || edges.is_empty() {
            return Err(Error::InvalidInput("shift needs at least one vertex and one edge".into()));
        }
        let mut out_edges = vec![Vec::new(); vertex_count];
        let mut in_edges = vec![Vec::new(); vertex_count];
        for (i, &(s, t)) in edges.iter().enumerate() {
            if s >= vertex_count || t >= vertex_count {
                return Err(Error::InvalidInput(format!(
                    "edge {i} ({s} -> {t}) references a vertex outside 0..{vertex_count}"
                )));
            }
            out_edges[s].push(i);
            in_edges[t].push(i);
        }
        let source: Vec<usize> = edges.iter().map(|e| e.0).collect();
        let target: Vec<usize> = edges.iter().map(|e| e.1).collect();

        let forward = reach(vertex_count, &out_edges, &target);
        let backward = reach(vertex_count, &in_edges, &source);
        let reached = forward.iter().zip(&backward).filter(|(a, b)| **a && **b).count();
        if reached != vertex_count {
            return Err(Error::NotConnected { reached, total: vertex_count });
        }

        let period = graph_period(vertex_count, &out_edges, &source, &target);
        Ok(Self { vertex_count, source, target, out_edges, period })
    }

    /// Full shift on `n` symbols: one vertex with `n` loops.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(1, &vec![(0, 0); n])
    }

    /// Golden-mean shift: edges `0→0`, `0→1`, `1→0`.
    pub fn golden_mean() -> Self {
        Self::new(2, &[(0, 0), (0, 1), (1, 0)]).expect("golden-mean graph is strongly connected")
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.source.len()
    }

    pub fn source(&self, e: usize) -> usize {
        self.source[e]
    }

    pub fn target(&self, e: usize) -> usize {
        self.target[e]
    }

    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.source.iter().copied().zip(self.target.iter().copied()).collect()
    }

    /// Whether `f` may follow `e`.
    pub fn follows(&self, e: usize, f: usize) -> bool {
        self.target[e] == self.source[f]
    }

    /// Gcd of all cycle lengths (in edges).
    pub fn period(&self) -> usize {
        self.period
    }

    /// Whether the shift is mixing (period one).
    pub fn is_aperiodic(&self) -> bool {
        self.period == 1
    }

    /// Vertex adjacency counts `A[u][v] = #{e : u → v}`.
    pub fn adjacency(&self) -> Vec<Vec<u64>> {
        let mut a = vec![vec![0u64; self.vertex_count]; self.vertex_count];
        for (s, t) in self.source.iter().zip(&self.target) {
            a[*s][*t] += 1;
        }
        a
    }

    /// Checks that `word` is a closed path.
    pub fn is_closed_path(&self, word: &[usize]) -> bool {
        !word.is_empty()
            && word.iter().all(|&e| e < self.edge_count())
            && (0..word.len()).all(|i| self.follows(word[i], word[(i + 1) % word.len()]))
    }
}

fn reach(n: usize, adj: &[Vec<usize>], other_end: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &e in &adj[v] {
            let w = other_end[e];
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

fn graph_period(n: usize, out_edges: &[Vec<usize>], source: &[usize], target: &[usize]) -> usize {
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        for &e in &out_edges[v] {
            let w = target[e];
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let mut g = 0usize;
    for (s, t) in source.iter().zip(target) {
        let d = (level[*s] as i64 + 1 - level[*t] as i64).unsigned_abs() as usize;
        g = gcd(g, d);
    }
    g.max(1)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// One real value per edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeFunction(Vec<f64>);

impl EdgeFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("edge function value {v} at edge {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn constant(edges: usize, c: f64) -> Self {
        Self(vec![c; edges])
    }

    pub fn zeros(edges: usize) -> Self {
        Self::constant(edges, 0.0)
    }

    /// Indicator of a single edge.
    pub fn indicator(edges: usize, e: usize) -> Self {
        let mut v = vec![0.0; edges];
        v[e] = 1.0;
        Self(v)
    }

    /// Validates use as a roof: strictly positive.
    pub fn check_roof(&self) -> Result<()> {
        match self.0.iter().enumerate().find(|(_, v)| **v <= 0.0) {
            Some((i, v)) => Err(Error::InvalidInput(format!("roof value {v} at edge {i} is not positive"))),
            None => Ok(()),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, e: usize) -> f64 {
        self.0[e]
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `self + c·other`, edgewise.
    pub fn add_scaled(&self, other: &EdgeFunction, c: f64) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + c * b).collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.iter().map(|a| a * c).collect())
    }

    /// Edgewise product, e.g. a density times the roof.
    pub fn mul(&self, other: &EdgeFunction) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    /// Sum of the values along a word.
    pub fn sum_over(&self, word: &[usize]) -> f64 {
        word.iter().map(|&e| self.0[e]).sum()
    }
}

impl std::ops::Index<usize> for EdgeFunction {
    type Output = f64;
    fn index(&self, e: usize) -> &f64 {
        &self.0[e]
    }
}
