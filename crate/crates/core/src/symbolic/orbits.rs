//! Prime periodic orbits by iterative deepening over word length.
//!
//! For each word length `n` a depth-first search generates, in lexicographic
//! order, the Lyndon words (aperiodic, minimal among their rotations) that
//! are closed paths in the shift graph. The search follows the FKM
//! prenecklace rule — position `t` may hold any symbol `x ≥ word[t - p]`,
//! keeping `p` on equality and setting `p = t + 1` otherwise — so every
//! prefix visited is a prenecklace and a complete word is Lyndon exactly when
//! `p == n`. Branches are pruned whenever no completion can land in the
//! length window.
//!
//! The search at each length is split into subtrees rooted at all valid
//! prefixes of a fixed depth; subtrees run in parallel and their partial
//! results are merged in prefix order, then in length order. The split does
//! not depend on the execution strategy, so folds are bit-identical between
//! serial and parallel runs.

use serde::{Deserialize, Serialize};

use super::shift::MarkovShift;
use super::system::SuspensionSystem;
use crate::error::{Error, Result};
use crate::exec::Exec;
use super::counting::mobius;

/// Half-open length window `(lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(Error::InvalidInput(format!("window ({lo}, {hi}] is not well ordered")));
        }
        Ok(Self { lo, hi })
    }

    /// `(T - 1, T]`.
    pub fn trailing(t: f64) -> Self {
        Self { lo: t - 1.0, hi: t }
    }

    /// `(T, T + 1]`, the partner family.
    pub fn leading(t: f64) -> Self {
        Self { lo: t, hi: t + 1.0 }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x <= self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

/// A prime periodic orbit in canonical (Lyndon) form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub word: Vec<usize>,
    /// Least period `ℓ(γ)`: sum of the roof over the word.
    pub length: f64,
    /// `∫_γ φ`: sum of the symbolic potential over the word.
    pub weight: f64,
    pub homology: Vec<i64>,
}

impl PeriodicOrbit {
    /// Builds the orbit of an arbitrary closed word, rotating it to
    /// canonical form. Rejects non-closed words and proper powers.
    pub fn from_word(sys: &SuspensionSystem, word: &[usize]) -> Result<Self> {
        if !sys.shift().is_closed_path(word) {
            return Err(Error::InvalidInput(format!("word {word:?} is not a closed path")));
        }
        if primitive_period(word) != word.len() {
            return Err(Error::InvalidInput(format!("word {word:?} is a proper power")));
        }
        let word = minimal_rotation(word);
        Ok(Self {
            length: sys.roof().sum_over(&word),
            weight: sys.potential().sum_over(&word),
            homology: sys.homology_of(&word),
            word,
        })
    }

    pub fn view(&self) -> OrbitView<'_> {
        OrbitView { word: &self.word, length: self.length, weight: self.weight, homology: &self.homology }
    }

    /// Word as text: digits when every edge index is a single digit,
    /// otherwise dot-separated indices.
    pub fn word_string(&self) -> String {
        format_word(&self.word)
    }
}

/// Edge word as digits when every index is below 10,
/// otherwise as dot-separated indices.
pub fn format_word(word: &[usize]) -> String {
    if word.iter().all(|&e| e < 10) {
        word.iter().map(|e| char::from(b'0' + *e as u8)).collect()
    } else {
        word.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(".")
    }
}

/// Inverse of [`format_word`].
pub fn parse_word(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidInput(format!("cannot parse word {s:?}"));
    if s.contains('.') {
        s.split('.').map(|t| t.parse().map_err(|_| bad())).collect()
    } else {
        s.chars().map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(bad)).collect()
    }
}

/// Borrowed view handed to fold visitors.
#[derive(Clone, Copy, Debug)]
pub struct OrbitView<'a> {
    pub word: &'a [usize],
    pub length: f64,
    pub weight: f64,
    pub homology: &'a [i64],
}

impl OrbitView<'_> {
    pub fn to_orbit(&self) -> PeriodicOrbit {
        PeriodicOrbit {
            word: self.word.to_vec(),
            length: self.length,
            weight: self.weight,
            homology: self.homology.to_vec(),
        }
    }
}

/// Streaming reduction over enumerated orbits.
///
/// `visit` is called for every orbit of one subtree in lexicographic order;
/// subtree accumulators are combined left to right with `merge`.
pub trait OrbitFold: Sync {
    type Acc: Send;
    fn init(&self) -> Self::Acc;
    fn visit(&self, acc: &mut Self::Acc, orbit: &OrbitView<'_>);
    fn merge(&self, left: Self::Acc, right: Self::Acc) -> Self::Acc;
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnumerationOptions {
    pub exec: Exec,
    /// Maximum number of orbits materialised by [`enumerate_orbits_with`].
    pub budget: usize,
    /// Optional cap on the word length searched.
    pub max_word_length: Option<usize>,
    /// Depth of the prefixes that root independent subtrees.
    pub split_depth: usize,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self { exec: Exec::Parallel, budget: 20_000_000, max_word_length: None, split_depth: 6 }
    }
}

impl EnumerationOptions {
    pub fn with_exec(exec: Exec) -> Self {
        Self { exec, ..Self::default() }
    }
}

struct Search<'a> {
    shift: &'a MarkovShift,
    roof: &'a [f64],
    q: &'a [f64],
    labels: &'a [Vec<i64>],
    n: usize,
    window: Window,
    tol: f64,
    rmin: f64,
    rmax: f64,
}

#[derive(Clone)]
struct Frontier {
    word: Vec<usize>,
    p: usize,
    length: f64,
    weight: f64,
}

struct State {
    word: Vec<usize>,
    homology: Vec<i64>,
}

impl Search<'_> {
    /// Whether a prefix of `t` edges with accumulated `length` can still be
    /// completed to a word whose length lies in the window.
    fn feasible(&self, t: usize, length: f64) -> bool {
        let rem = (self.n - t) as f64;
        length + rem * self.rmin <= self.window.hi + self.tol && length + rem * self.rmax > self.window.lo - self.tol
    }

    fn candidates(&self, word: &[usize], t: usize, p: usize) -> impl Iterator<Item = usize> + '_ {
        let min_sym = word[t - p];
        let first = word[0];
        let closing = t + 1 == self.n;
        let shift = self.shift;
        shift
            .out_edges(shift.target(word[t - 1]))
            .iter()
            .copied()
            .filter(move |&x| x >= min_sym && (!closing || shift.follows(x, first)))
    }

    /// Valid prefixes of depth `min(depth, n)`, in lexicographic order.
    fn frontier(&self, depth: usize) -> Vec<Frontier> {
        let depth = depth.clamp(1, self.n);
        let mut out = Vec::new();
        let mut word = vec![0usize; self.n];
        for a in 0..self.shift.edge_count() {
            let len = self.roof[a];
            if self.n == 1 && !self.shift.follows(a, a) {
                continue;
            }
            if !self.feasible(1, len) {
                continue;
            }
            word[0] = a;
            self.collect(&mut word, 1, 1, len, self.q[a], depth, &mut out);
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn collect(&self, word: &mut [usize], t: usize, p: usize, len: f64, w: f64, depth: usize, out: &mut Vec<Frontier>) {
        if t == depth {
            out.push(Frontier { word: word[..t].to_vec(), p, length: len, weight: w });
            return;
        }
        let cands: Vec<usize> = self.candidates(word, t, p).collect();
        for x in cands {
            let len2 = len + self.roof[x];
            if !self.feasible(t + 1, len2) {
                continue;
            }
            let p2 = if x == word[t - p] { p } else { t + 1 };
            word[t] = x;
            self.collect(word, t + 1, p2, len2, w + self.q[x], depth, out);
        }
    }

    /// Runs the subtree below `root`; `visit` returns `false` to abort.
    fn run<V: FnMut(&OrbitView<'_>) -> bool>(&self, root: &Frontier, visit: &mut V) -> bool {
        let mut state = State { word: vec![0; self.n], homology: vec![0; self.labels[0].len()] };
        state.word[..root.word.len()].copy_from_slice(&root.word);
        for &e in &root.word {
            for (h, l) in state.homology.iter_mut().zip(&self.labels[e]) {
                *h += l;
            }
        }
        self.extend(&mut state, root.word.len(), root.p, root.length, root.weight, visit)
    }

    fn extend<V: FnMut(&OrbitView<'_>) -> bool>(
        &self,
        state: &mut State,
        t: usize,
        p: usize,
        len: f64,
        w: f64,
        visit: &mut V,
    ) -> bool {
        if t == self.n {
            if p == self.n && self.shift.follows(state.word[t - 1], state.word[0]) && self.window.contains(len) {
                return visit(&OrbitView { word: &state.word, length: len, weight: w, homology: &state.homology });
            }
            return true;
        }
        let min_sym = state.word[t - p];
        let closing = t + 1 == self.n;
        let first = state.word[0];
        for &x in self.shift.out_edges(self.shift.target(state.word[t - 1])) {
            if x < min_sym || (closing && !self.shift.follows(x, first)) {
                continue;
            }
            let len2 = len + self.roof[x];
            if !self.feasible(t + 1, len2) {
                continue;
            }
            let p2 = if x == min_sym { p } else { t + 1 };
            state.word[t] = x;
            for (h, l) in state.homology.iter_mut().zip(&self.labels[x]) {
                *h += l;
            }
            let keep_going = self.extend(state, t + 1, p2, len2, w + self.q[x], visit);
            for (h, l) in state.homology.iter_mut().zip(&self.labels[x]) {
                *h -= l;
            }
            if !keep_going {
                return false;
            }
        }
        true
    }
}

/// Largest word length that can have `ℓ ≤ hi`.
fn max_word_length(sys: &SuspensionSystem, window: &Window, opts: &EnumerationOptions) -> usize {
    let by_roof = ((window.hi / sys.roof().min()) * (1.0 + 1e-12)).floor().max(0.0) as usize;
    opts.max_word_length.map_or(by_roof, |m| m.min(by_roof))
}

fn searches<'a>(sys: &'a SuspensionSystem, window: Window, n: usize) -> Search<'a> {
    let (rmin, rmax) = (sys.roof().min(), sys.roof().max());
    Search {
        shift: sys.shift(),
        roof: sys.roof().values(),
        q: sys.potential().values(),
        labels: sys.labels(),
        n,
        window,
        tol: 1e-9 * window.hi.abs().max(1.0),
        rmin,
        rmax,
    }
}

/// Folds over every prime orbit with `ℓ` in `window`, without materialising
/// them.
pub fn fold_orbits<F: OrbitFold>(
    sys: &SuspensionSystem,
    window: Window,
    opts: &EnumerationOptions,
    fold: &F,
) -> Result<F::Acc> {
    let mut acc = fold.init();
    if window.is_empty() {
        return Ok(acc);
    }
    for n in 1..=max_word_length(sys, &window, opts) {
        let search = searches(sys, window, n);
        let roots = search.frontier(opts.split_depth);
        let parts = opts.exec.map(&roots, |root| {
            let mut a = fold.init();
            search.run(root, &mut |o| {
                fold.visit(&mut a, o);
                true
            });
            a
        });
        for part in parts {
            acc = fold.merge(acc, part);
        }
    }
    Ok(acc)
}

/// Materialises the prime orbits with `ℓ` in `window`, sorted by word length
/// and then lexicographically.
pub fn enumerate_orbits_with(
    sys: &SuspensionSystem,
    window: Window,
    opts: &EnumerationOptions,
) -> Result<Vec<PeriodicOrbit>> {
    let mut all = Vec::new();
    if window.is_empty() {
        return Ok(all);
    }
    let budget = opts.budget;
    for n in 1..=max_word_length(sys, &window, opts) {
        let search = searches(sys, window, n);
        let roots = search.frontier(opts.split_depth);
        let parts = opts.exec.map(&roots, |root| {
            let mut found = Vec::new();
            let complete = search.run(root, &mut |o| {
                found.push(o.to_orbit());
                found.len() <= budget
            });
            (found, complete)
        });
        let mut level_complete = true;
        for (found, complete) in parts {
            level_complete &= complete;
            all.extend(found);
        }
        if !level_complete || all.len() > budget {
            return Err(Error::BudgetExceeded { budget, completed_word_length: n - 1, found: all.len() });
        }
    }
    Ok(all)
}

/// [`enumerate_orbits_with`] using default options.
pub fn enumerate_orbits(sys: &SuspensionSystem, window: Window) -> Result<Vec<PeriodicOrbit>> {
    enumerate_orbits_with(sys, window, &EnumerationOptions::default())
}

struct CountByLength(usize);

impl OrbitFold for CountByLength {
    type Acc = Vec<u64>;
    fn init(&self) -> Vec<u64> {
        vec![0; self.0 + 1]
    }
    fn visit(&self, acc: &mut Vec<u64>, o: &OrbitView<'_>) {
        acc[o.word.len()] += 1;
    }
    fn merge(&self, mut l: Vec<u64>, r: Vec<u64>) -> Vec<u64> {
        for (a, b) in l.iter_mut().zip(r) {
            *a += b;
        }
        l
    }
}

/// Number of prime closed paths of each word length `0..=max_n` (entry 0 is
/// zero), counted by the enumerator on a unit-roof copy of the shift.
pub fn prime_counts_by_word_length(shift: &MarkovShift, max_n: usize, exec: Exec) -> Result<Vec<u64>> {
    let m = shift.edge_count();
    let unit = SuspensionSystem::unlabelled(
        shift.clone(),
        super::shift::EdgeFunction::constant(m, 1.0),
        super::shift::EdgeFunction::zeros(m),
    )?;
    let opts = EnumerationOptions { exec, ..EnumerationOptions::default() };
    fold_orbits(&unit, Window { lo: 0.0, hi: max_n as f64 }, &opts, &CountByLength(max_n))
}

/// Exact traces `tr(A^n)` of the vertex adjacency matrix for `n = 0..=max_n`.
pub fn trace_counts(shift: &MarkovShift, max_n: usize) -> Vec<u128> {
    let a: Vec<Vec<u128>> = shift.adjacency().into_iter().map(|r| r.into_iter().map(u128::from).collect()).collect();
    let v = a.len();
    let mut power: Vec<Vec<u128>> = (0..v).map(|i| (0..v).map(|j| u128::from(i == j)).collect()).collect();
    let mut out = Vec::with_capacity(max_n + 1);
    for _ in 0..=max_n {
        out.push((0..v).map(|i| power[i][i]).sum());
        let mut next = vec![vec![0u128; v]; v];
        for i in 0..v {
            for k in 0..v {
                if power[i][k] == 0 {
                    continue;
                }
                for j in 0..v {
                    next[i][j] += power[i][k] * a[k][j];
                }
            }
        }
        power = next;
    }
    out
}

/// Prime cycle counts predicted by Möbius inversion of the traces:
/// `P(n) = (1/n) Σ_{d|n} μ(n/d) tr(A^d)`.
pub fn necklace_counts(shift: &MarkovShift, max_n: usize) -> Vec<u128> {
    let traces = trace_counts(shift, max_n);
    let mut out = vec![0u128; max_n + 1];
    for (n, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc: i128 = 0;
        for d in (1..=n).filter(|d| n % d == 0) {
            acc += mobius(n / d) as i128 * traces[d] as i128;
        }
        *slot = (acc / n as i128) as u128;
    }
    out
}

/// Smallest period of a cyclic word.
pub(crate) fn primitive_period(word: &[usize]) -> usize {
    let n = word.len();
    (1..=n).find(|&d| n.is_multiple_of(d) && (d..n).all(|i| word[i] == word[i - d])).unwrap_or(n)
}

pub(crate) fn minimal_rotation(word: &[usize]) -> Vec<usize> {
    let n = word.len();
    (0..n)
        .map(|k| word[k..].iter().chain(&word[..k]).copied().collect::<Vec<_>>())
        .min()
        .unwrap_or_default()
}
