use serde::{Deserialize, Serialize};

use super::shift::{EdgeFunction, MarkovShift};
use crate::error::{Error, Result};

/// Whether all closed-orbit lengths lie in a discrete subgroup `δℤ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lattice {
    Discrete { spacing: f64 },
    NonLattice,
}

/// Largest denominator accepted when recognising a ratio of cycle lengths as
/// rational, and the relative tolerance for that recognition. Roof values are
/// usually given to about twelve digits, so ratios such as √2 rounded to
/// twelve digits are (correctly) classified as irrational.
const LATTICE_MAX_DENOMINATOR: i64 = 10_000;
const LATTICE_TOLERANCE: f64 = 1e-9;

/// Suspension flow over an edge shift, with potential and homology labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SuspensionSystem {
    shift: MarkovShift,
    roof: EdgeFunction,
    potential: EdgeFunction,
    labels: Vec<Vec<i64>>,
    betti: usize,
    lattice: Lattice,
}

impl SuspensionSystem {
    pub fn new(shift: MarkovShift, roof: EdgeFunction, potential: EdgeFunction, labels: Vec<Vec<i64>>) -> Result<Self> {
        let m = shift.edge_count();
        if roof.len() != m || potential.len() != m || labels.len() != m {
            return Err(Error::InvalidInput(format!(
                "{m} edges but roof/potential/labels have lengths {}/{}/{}",
                roof.len(),
                potential.len(),
                labels.len()
            )));
        }
        roof.check_roof()?;
        let betti = labels[0].len();
        if let Some(i) = labels.iter().position(|l| l.len() != betti) {
            return Err(Error::InvalidInput(format!(
                "label of edge {i} has dimension {} but edge 0 has {betti}",
                labels[i].len()
            )));
        }
        let lattice = lattice_check(&shift, &roof);
        Ok(Self { shift, roof, potential, labels, betti, lattice })
    }

    /// System without homology (b = 0).
    pub fn unlabelled(shift: MarkovShift, roof: EdgeFunction, potential: EdgeFunction) -> Result<Self> {
        let m = shift.edge_count();
        Self::new(shift, roof, potential, vec![Vec::new(); m])
    }

    pub fn shift(&self) -> &MarkovShift {
        &self.shift
    }

    pub fn roof(&self) -> &EdgeFunction {
        &self.roof
    }

    pub fn potential(&self) -> &EdgeFunction {
        &self.potential
    }

    pub fn labels(&self) -> &[Vec<i64>] {
        &self.labels
    }

    pub fn label(&self, e: usize) -> &[i64] {
        &self.labels[e]
    }

    pub fn betti(&self) -> usize {
        self.betti
    }

    pub fn edge_count(&self) -> usize {
        self.shift.edge_count()
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    /// Weak mixing holds for a mixing base exactly when the roof is non-lattice.
    pub fn is_weak_mixing(&self) -> bool {
        self.lattice == Lattice::NonLattice
    }

    /// Same system with symbolic potential `q`.
    pub fn with_potential(&self, q: EdgeFunction) -> Result<Self> {
        if q.len() != self.edge_count() {
            return Err(Error::InvalidInput("potential length does not match edge count".into()));
        }
        Ok(Self { potential: q, ..self.clone() })
    }

    /// Same system whose flow potential is the time density `phi`, i.e.
    /// `q(e) = phi(e)·r(e)`.
    pub fn with_density_potential(&self, phi: &EdgeFunction) -> Result<Self> {
        self.with_potential(phi.mul(&self.roof))
    }

    /// Adds the constant flow potential `c`: `q += c·r`.
    pub fn add_constant_potential(&self, c: f64) -> Self {
        Self { potential: self.potential.add_scaled(&self.roof, c), ..self.clone() }
    }

    /// The `i`-th homology label component as an edge function.
    pub fn label_function(&self, i: usize) -> EdgeFunction {
        EdgeFunction::new(self.labels.iter().map(|l| l[i] as f64).collect()).expect("labels are finite")
    }

    /// `q + Σ t_i h_i`: the symbolic potential twisted by a cohomology class.
    pub fn twisted_potential(&self, t: &[f64]) -> EdgeFunction {
        let v = (0..self.edge_count())
            .map(|e| self.potential[e] + self.labels[e].iter().zip(t).map(|(h, ti)| *h as f64 * ti).sum::<f64>())
            .collect();
        EdgeFunction::new(v).expect("finite twist")
    }

    /// Homology class of a closed word.
    pub fn homology_of(&self, word: &[usize]) -> Vec<i64> {
        let mut h = vec![0i64; self.betti];
        for &e in word {
            for (a, b) in h.iter_mut().zip(&self.labels[e]) {
                *a += b;
            }
        }
        h
    }
}

/// Lattice check through the cycle space.
///
/// The additive group generated by closed-path lengths equals the image of
/// the integer cycle space under `r` (directed cycles span the cycle space
/// of a strongly connected graph). A basis is given by the fundamental
/// cycles of an undirected spanning tree; their signed lengths are compared
/// for commensurability.
fn lattice_check(shift: &MarkovShift, roof: &EdgeFunction) -> Lattice {
    let n = shift.vertex_count();
    let edges = shift.edges();
    let mut potential = vec![f64::NAN; n];
    let mut tree_edge = vec![false; edges.len()];
    potential[0] = 0.0;
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        for (i, &(s, t)) in edges.iter().enumerate() {
            if s == v && potential[t].is_nan() {
                potential[t] = potential[v] + roof[i];
                tree_edge[i] = true;
                stack.push(t);
            } else if t == v && potential[s].is_nan() {
                potential[s] = potential[v] - roof[i];
                tree_edge[i] = true;
                stack.push(s);
            }
        }
    }
    let cycles: Vec<f64> = edges
        .iter()
        .enumerate()
        .filter(|(i, _)| !tree_edge[*i])
        .map(|(i, &(s, t))| (potential[s] + roof[i] - potential[t]).abs())
        .filter(|x| *x > 1e-12)
        .collect();
    let Some(&base) = cycles.first() else {
        return Lattice::NonLattice;
    };
    let mut fractions = Vec::with_capacity(cycles.len());
    for &c in &cycles {
        match rational_approx(c / base) {
            Some(f) => fractions.push(f),
            None => return Lattice::NonLattice,
        }
    }
    let denom = fractions.iter().fold(1i64, |acc, &(_, q)| lcm(acc, q));
    let g = fractions.iter().fold(0i64, |acc, &(p, q)| gcd(acc, p * (denom / q)));
    Lattice::Discrete { spacing: base * g as f64 / denom as f64 }
}

fn rational_approx(x: f64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut y = x;
    for _ in 0..64 {
        let a = y.floor();
        if a.abs() > 1e12 {
            return None;
        }
        let a = a as i64;
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > LATTICE_MAX_DENOMINATOR {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - x).abs() <= LATTICE_TOLERANCE * x.abs().max(1.0) {
            return Some((h1, k1));
        }
        let frac = y - a as f64;
        if frac < 1e-15 {
            return None;
        }
        y = 1.0 / frac;
    }
    None
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

/// Recodes a system on `k`-blocks so that a potential depending on `k`
/// consecutive edges becomes an edge function.
///
/// New vertices are paths of `k - 1` edges, new edges are paths of `k`
/// edges. A new edge carries the roof and label of its last original edge,
/// so closed orbits correspond bijectively with equal lengths and classes;
/// its potential is `potential(block)`. Returns the recoded system together
/// with the block of original edges behind every new edge.
pub fn block_recode<F>(sys: &SuspensionSystem, k: usize, potential: F) -> Result<(SuspensionSystem, Vec<Vec<usize>>)>
where
    F: Fn(&[usize]) -> f64,
{
    if k < 2 {
        return Err(Error::InvalidInput("block length must be at least 2".into()));
    }
    let shift = sys.shift();
    let paths = |len: usize| -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = (0..shift.edge_count()).map(|e| vec![e]).collect();
        for _ in 1..len {
            out = out
                .into_iter()
                .flat_map(|p| {
                    let last = *p.last().expect("non-empty path");
                    shift.out_edges(shift.target(last)).iter().map(move |&f| {
                        let mut q = p.clone();
                        q.push(f);
                        q
                    })
                })
                .collect();
        }
        out
    };
    let vertices = paths(k - 1);
    let index: std::collections::HashMap<&[usize], usize> =
        vertices.iter().enumerate().map(|(i, v)| (v.as_slice(), i)).collect();
    let blocks = paths(k);
    let mut edges = Vec::with_capacity(blocks.len());
    let mut roof = Vec::with_capacity(blocks.len());
    let mut q = Vec::with_capacity(blocks.len());
    let mut labels = Vec::with_capacity(blocks.len());
    for b in &blocks {
        edges.push((index[&b[..k - 1]], index[&b[1..]]));
        let last = b[k - 1];
        roof.push(sys.roof()[last]);
        q.push(potential(b));
        labels.push(sys.label(last).to_vec());
    }
    let recoded = SuspensionSystem::new(
        MarkovShift::new(vertices.len(), &edges)?,
        EdgeFunction::new(roof)?,
        EdgeFunction::new(q)?,
        labels,
    )?;
    Ok((recoded, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full2(roofs: [f64; 2]) -> SuspensionSystem {
        SuspensionSystem::unlabelled(
            MarkovShift::full(2).unwrap(),
            EdgeFunction::new(roofs.to_vec()).unwrap(),
            EdgeFunction::zeros(2),
        )
        .unwrap()
    }

    #[test]
    fn unit_roof_is_lattice() {
        assert_eq!(full2([1.0, 1.0]).lattice(), Lattice::Discrete { spacing: 1.0 });
        match full2([0.5, 0.75]).lattice() {
            Lattice::Discrete { spacing } => assert!((spacing - 0.25).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn irrational_ratio_is_non_lattice() {
        let sqrt2 = (2f64.sqrt() * 1e12).round() / 1e12;
        let sys = full2([1.0, sqrt2]);
        assert_eq!(sys.lattice(), Lattice::NonLattice);
        assert!(sys.is_weak_mixing());
    }

    #[test]
    fn golden_mean_lattice_uses_cycle_space() {
        // cycles: loop (length a) and 2-cycle (b + c); commensurable here.
        let sys = SuspensionSystem::unlabelled(
            MarkovShift::golden_mean(),
            EdgeFunction::new(vec![1.0, 0.25, 0.75]).unwrap(),
            EdgeFunction::zeros(3),
        )
        .unwrap();
        assert_eq!(sys.lattice(), Lattice::Discrete { spacing: 1.0 });
    }

    #[test]
    fn rejects_ragged_labels() {
        let r = SuspensionSystem::new(
            MarkovShift::full(2).unwrap(),
            EdgeFunction::constant(2, 1.0),
            EdgeFunction::zeros(2),
            vec![vec![1], vec![]],
        );
        assert!(r.is_err());
    }

    #[test]
    fn block_recoding_preserves_orbit_data() {
        let sys = SuspensionSystem::new(
            MarkovShift::full(2).unwrap(),
            EdgeFunction::new(vec![1.0, 2.0]).unwrap(),
            EdgeFunction::zeros(2),
            vec![vec![1], vec![-1]],
        )
        .unwrap();
        let (rec, blocks) = block_recode(&sys, 2, |b| if b == [0, 1] { 0.5 } else { 0.0 }).unwrap();
        assert_eq!(rec.shift().vertex_count(), 2);
        assert_eq!(rec.edge_count(), 4);
        for (e, b) in blocks.iter().enumerate() {
            assert_eq!(rec.roof()[e], sys.roof()[b[1]]);
            assert_eq!(rec.label(e), sys.label(b[1]));
        }
    }

    #[test]
    fn twisted_potential_adds_labels() {
        let sys = SuspensionSystem::new(
            MarkovShift::full(2).unwrap(),
            EdgeFunction::constant(2, 1.0),
            EdgeFunction::new(vec![0.1, 0.2]).unwrap(),
            vec![vec![1], vec![-1]],
        )
        .unwrap();
        let q = sys.twisted_potential(&[0.5]);
        assert_eq!(q.values(), &[0.6, 0.2 - 0.5]);
        assert_eq!(sys.homology_of(&[0, 0, 1]), vec![1]);
    }
}
