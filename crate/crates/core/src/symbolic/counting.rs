//! Exact weighted orbit counts without listing orbits.
//!
//! Besides the enumerator, two exact shortcuts are available:
//!
//! * **Content counting** (one-vertex shifts). Every word is a closed path, so
//!   the number of prime orbits with a given edge content `c` is the number
//!   of primitive necklaces, `(1/n) Σ_{d | gcd(c)} μ(d) · multinomial(n/d; c/d)`.
//!   Length, weight, homology class and every time average are functions of
//!   the content alone.
//! * **Trace recursion** (unit roof, any graph). With `f(n, k)` the sum of
//!   `exp(k·w(γ))` over prime orbits of word length `n`,
//!   `tr(M_{kq}^n) = Σ_{d | n} d · f(d, k·n/d)`, which is solved for
//!   `f(n, 1)` recursively.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::orbits::{fold_orbits, EnumerationOptions, OrbitFold, OrbitView, Window};
use super::shift::{EdgeFunction, MarkovShift};
use super::spectral::scaled_matrix;
use super::stats::LogSum;
use super::system::SuspensionSystem;
use crate::error::{Error, Result};

/// How weighted orbit sums are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMethod {
    /// Content counting on one-vertex shifts, enumeration otherwise.
    #[default]
    Auto,
    Enumerate,
    Content,
}

/// A set of prime orbits sharing the same edge content (a single orbit when
/// enumerating).
#[derive(Clone, Copy, Debug)]
pub struct OrbitGroup<'a> {
    /// Number of orbits in the group.
    pub multiplicity: f64,
    /// `ln multiplicity`, accurate even when `multiplicity` overflows.
    pub ln_multiplicity: f64,
    pub length: f64,
    pub weight: f64,
    pub homology: &'a [i64],
    /// Number of traversals of each edge.
    pub content: &'a [u32],
}

impl OrbitGroup<'_> {
    /// `ln(multiplicity · exp(weight))`.
    pub fn ln_total_weight(&self) -> f64 {
        self.ln_multiplicity + self.weight
    }

    /// Time average `(1/ℓ) Σ ψ(e) r(e)` of a density, per orbit of the group.
    pub fn average_density(&self, psi: &EdgeFunction, roof: &EdgeFunction) -> f64 {
        self.content.iter().enumerate().map(|(e, &c)| c as f64 * psi[e] * roof[e]).sum::<f64>() / self.length
    }
}

/// Streaming reduction over orbit groups; see [`OrbitFold`].
pub trait GroupFold: Sync {
    type Acc: Send;
    fn init(&self) -> Self::Acc;
    fn visit(&self, acc: &mut Self::Acc, group: &OrbitGroup<'_>);
    fn merge(&self, left: Self::Acc, right: Self::Acc) -> Self::Acc;
}

struct Adapter<'f, F> {
    inner: &'f F,
    edges: usize,
}

impl<F: GroupFold> OrbitFold for Adapter<'_, F> {
    type Acc = (F::Acc, Vec<u32>);
    fn init(&self) -> Self::Acc {
        (self.inner.init(), vec![0; self.edges])
    }
    fn visit(&self, acc: &mut Self::Acc, o: &OrbitView<'_>) {
        acc.1.iter_mut().for_each(|c| *c = 0);
        for &e in o.word {
            acc.1[e] += 1;
        }
        let g = OrbitGroup {
            multiplicity: 1.0,
            ln_multiplicity: 0.0,
            length: o.length,
            weight: o.weight,
            homology: o.homology,
            content: &acc.1,
        };
        self.inner.visit(&mut acc.0, &g);
    }
    fn merge(&self, l: Self::Acc, r: Self::Acc) -> Self::Acc {
        (self.inner.merge(l.0, r.0), l.1)
    }
}

/// Folds over all prime orbits with length in `window`, grouped by content
/// when the method allows it.
pub fn fold_orbit_groups<F: GroupFold>(
    sys: &SuspensionSystem,
    window: Window,
    opts: &EnumerationOptions,
    method: CountMethod,
    fold: &F,
) -> Result<F::Acc> {
    let one_vertex = sys.shift().vertex_count() == 1;
    match method {
        CountMethod::Content if !one_vertex => Err(Error::InvalidInput(
            "content counting needs a one-vertex shift".into(),
        )),
        CountMethod::Content | CountMethod::Auto if one_vertex => fold_contents(sys, window, opts, fold),
        _ => Ok(fold_orbits(sys, window, opts, &Adapter { inner: fold, edges: sys.edge_count() })?.0),
    }
}

fn fold_contents<F: GroupFold>(
    sys: &SuspensionSystem,
    window: Window,
    opts: &EnumerationOptions,
    fold: &F,
) -> Result<F::Acc> {
    let mut acc = fold.init();
    if window.is_empty() {
        return Ok(acc);
    }
    let m = sys.edge_count();
    let roof = sys.roof().values();
    let max_n = opts.max_word_length.unwrap_or(usize::MAX);
    let tol = 1e-9 * window.hi.abs().max(1.0);
    let mut content = vec![0u32; m];
    let mut homology = vec![0i64; sys.betti()];
    let mut table = LnFactorials::default();
    // Odometer over contents in lexicographic order, pruned by length.
    #[allow(clippy::too_many_arguments)]
    fn walk<F: GroupFold>(
        e: usize,
        len: f64,
        n: usize,
        sys: &SuspensionSystem,
        window: &Window,
        tol: f64,
        max_n: usize,
        content: &mut Vec<u32>,
        homology: &mut Vec<i64>,
        table: &mut LnFactorials,
        fold: &F,
        acc: &mut F::Acc,
    ) {
        let m = content.len();
        if e == m {
            if n == 0 || !window.contains(len) {
                return;
            }
            let Some((count, ln_count)) = table.primitive_necklaces(content) else {
                return;
            };
            for h in homology.iter_mut() {
                *h = 0;
            }
            let mut weight = 0.0;
            for (edge, &c) in content.iter().enumerate() {
                weight += c as f64 * sys.potential()[edge];
                for (h, l) in homology.iter_mut().zip(sys.label(edge)) {
                    *h += c as i64 * l;
                }
            }
            let g = OrbitGroup {
                multiplicity: count,
                ln_multiplicity: ln_count,
                length: len,
                weight,
                homology,
                content,
            };
            fold.visit(acc, &g);
            return;
        }
        let r = sys.roof()[e];
        let mut c = 0u32;
        loop {
            let l = len + c as f64 * r;
            if l > window.hi + tol || n + c as usize > max_n {
                break;
            }
            content[e] = c;
            walk(e + 1, l, n + c as usize, sys, window, tol, max_n, content, homology, table, fold, acc);
            c += 1;
        }
        content[e] = 0;
    }
    debug_assert!(roof.iter().all(|r| *r > 0.0));
    walk(0, 0.0, 0, sys, &window, tol, max_n, &mut content, &mut homology, &mut table, fold, &mut acc);
    Ok(acc)
}

#[derive(Default)]
struct LnFactorials(Vec<f64>);

impl LnFactorials {
    fn get(&mut self, n: usize) -> f64 {
        if self.0.is_empty() {
            self.0.push(0.0);
        }
        while self.0.len() <= n {
            let k = self.0.len();
            let prev = self.0[k - 1];
            self.0.push(prev + (k as f64).ln());
        }
        self.0[n]
    }

    fn ln_multinomial(&mut self, content: &[u32], d: u32) -> f64 {
        let n: u32 = content.iter().sum::<u32>() / d;
        self.get(n as usize) - content.iter().map(|&c| self.get((c / d) as usize)).sum::<f64>()
    }

    /// Number of primitive necklaces with the given content and its `ln`,
    /// or `None` when there are none.
    fn primitive_necklaces(&mut self, content: &[u32]) -> Option<(f64, f64)> {
        if let Some(exact) = primitive_necklaces_exact(content) {
            return (exact > 0).then(|| (exact as f64, (exact as f64).ln()));
        }
        let n: u32 = content.iter().sum();
        let g = content.iter().fold(0u32, |a, &c| gcd(a, c));
        let lead = self.ln_multinomial(content, 1);
        let mut total = 0.0;
        for d in (1..=g).filter(|d| g % d == 0) {
            let mu = mobius(d as usize);
            if mu != 0 {
                total += mu as f64 * (self.ln_multinomial(content, d) - lead).exp();
            }
        }
        // Beyond the exact range the leading term dominates by a factor of at
        // least 2^(n/2), so `total` is close to 1 and never cancels.
        (total > 0.5).then(|| {
            let ln = lead + total.ln() - (n as f64).ln();
            (ln.exp(), ln)
        })
    }
}

fn multinomial_exact(content: &[u32], d: u32) -> Option<u128> {
    let mut acc: u128 = 1;
    let mut n: u128 = 0;
    for &c in content {
        for i in 1..=(c / d) as u128 {
            n += 1;
            // acc · n / i stays integral: acc · C(n, i) after each step.
            acc = acc.checked_mul(n)? / i;
        }
    }
    Some(acc)
}

/// Exact number of primitive necklaces with the given content, when all
/// intermediate values fit in 128 bits.
pub fn primitive_necklaces_exact(content: &[u32]) -> Option<u128> {
    let n: u32 = content.iter().sum();
    if n == 0 {
        return Some(0);
    }
    let g = content.iter().fold(0u32, |a, &c| gcd(a, c));
    let mut total: i128 = 0;
    for d in (1..=g).filter(|d| g % d == 0) {
        let mu = mobius(d as usize) as i128;
        if mu != 0 {
            total += mu * i128::try_from(multinomial_exact(content, d)?).ok()?;
        }
    }
    Some((total / n as i128) as u128)
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn mobius(mut n: usize) -> i64 {
    let mut result = 1;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

/// `ln Σ exp(w(γ))` over prime orbits of word length `n`, for every `n` in
/// `lengths`, by the trace recursion. Valid for any roof (word length is
/// what is counted).
pub fn ln_prime_sums_by_word_length(shift: &MarkovShift, q: &EdgeFunction, lengths: &[usize]) -> Result<Vec<f64>> {
    let mut memo = HashMap::new();
    lengths
        .iter()
        .map(|&n| {
            let s = ln_prime_sum(shift, q, n, 1, &mut memo);
            // Only the requested sums need relative accuracy; intermediate
            // ones enter through their absolute error.
            if s.ln_value.is_finite() && s.ln_err - s.ln_value > RECURSION_TOLERANCE.ln() {
                return Err(Error::InvalidInput(format!(
                    "trace recursion loses precision at word length {n}: relative error bound {:e}",
                    (s.ln_err - s.ln_value).exp()
                )));
            }
            Ok(s.ln_value)
        })
        .collect()
}

/// Largest relative error bound accepted for a requested prime sum.
const RECURSION_TOLERANCE: f64 = 1e-9;

/// A prime sum with an absolute error bound, both as logarithms.
#[derive(Clone, Copy, Debug)]
struct PrimeSum {
    ln_value: f64,
    ln_err: f64,
}

fn ln_trace_power(shift: &MarkovShift, q: &EdgeFunction, n: usize) -> f64 {
    let (m, offset) = scaled_matrix(shift, q);
    let v = m.len();
    let mut result: Vec<Vec<f64>> = (0..v).map(|i| (0..v).map(|j| f64::from(i == j)).collect()).collect();
    let mut ln_scale = 0.0;
    let mut base = m;
    let mut base_scale = offset;
    let mut k = n;
    let mul = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..v).map(|i| (0..v).map(|j| (0..v).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
    };
    let normalise = |a: &mut Vec<Vec<f64>>| -> f64 {
        let s = a.iter().flatten().fold(0.0f64, |x, y| x.max(*y));
        a.iter_mut().flatten().for_each(|x| *x /= s);
        s.ln()
    };
    while k > 0 {
        if k & 1 == 1 {
            result = mul(&result, &base);
            ln_scale += base_scale + normalise(&mut result);
        }
        k >>= 1;
        if k > 0 {
            base = mul(&base, &base);
            base_scale = 2.0 * base_scale + normalise(&mut base);
        }
    }
    let tr: f64 = (0..v).map(|i| result[i][i]).sum();
    ln_scale + tr.ln()
}

fn ln_prime_sum(
    shift: &MarkovShift,
    q: &EdgeFunction,
    n: usize,
    k: usize,
    memo: &mut HashMap<(usize, usize), PrimeSum>,
) -> PrimeSum {
    if let Some(v) = memo.get(&(n, k)) {
        return *v;
    }
    let ln_tr = ln_trace_power(shift, &q.scale(k as f64), n);
    if ln_tr == f64::NEG_INFINITY {
        let zero = PrimeSum { ln_value: f64::NEG_INFINITY, ln_err: f64::NEG_INFINITY };
        memo.insert((n, k), zero);
        return zero;
    }
    // Error of the trace (repeated squaring of a nonnegative matrix), then
    // the propagated errors of the subtracted powers, relative to the trace.
    let v = shift.vertex_count() as f64;
    let mut rel_err = 4.0 * v * (n as f64).log2().max(1.0) * f64::EPSILON;
    let mut powers = 0.0;
    for d in (1..n).filter(|&d| n.is_multiple_of(d)) {
        let f = ln_prime_sum(shift, q, d, k * n / d, memo);
        let ln_d = (d as f64).ln();
        powers += (f.ln_value + ln_d - ln_tr).exp();
        rel_err += (f.ln_err + ln_d - ln_tr).exp();
    }
    let rest = 1.0 - powers;
    rel_err += 2.0 * f64::EPSILON * powers;
    let ln_n = (n as f64).ln();
    let value = PrimeSum {
        ln_value: if rest <= 0.0 { f64::NEG_INFINITY } else { ln_tr + rest.ln() - ln_n },
        ln_err: ln_tr + rel_err.ln() - ln_n,
    };
    memo.insert((n, k), value);
    value
}

/// Weighted log-sums `ln π` over a window, using the fastest exact method:
/// content counting (one vertex), trace recursion (unit roof) or enumeration.
pub fn ln_weighted_count(sys: &SuspensionSystem, window: Window, opts: &EnumerationOptions) -> Result<(f64, f64)> {
    struct Sum;
    impl GroupFold for Sum {
        type Acc = (LogSum, f64);
        fn init(&self) -> Self::Acc {
            (LogSum::default(), 0.0)
        }
        fn visit(&self, acc: &mut Self::Acc, g: &OrbitGroup<'_>) {
            acc.0.add(g.ln_total_weight());
            acc.1 += g.multiplicity;
        }
        fn merge(&self, l: Self::Acc, r: Self::Acc) -> Self::Acc {
            (l.0.merge(r.0), l.1 + r.1)
        }
    }
    let unit_roof = sys.roof().values().iter().all(|r| *r == 1.0);
    if sys.shift().vertex_count() > 1 && unit_roof {
        let lo = window.lo.floor() as i64 + 1;
        let hi = window.hi.floor() as i64;
        let lengths: Vec<usize> = (lo.max(1)..=hi).map(|n| n as usize).collect();
        let sums = ln_prime_sums_by_word_length(sys.shift(), sys.potential(), &lengths)?;
        let mut total = LogSum::default();
        for s in sums {
            total.add(s);
        }
        // Orbit counts are not tracked by the recursion.
        return Ok((total.ln(), f64::NAN));
    }
    let (ls, count) = fold_orbit_groups(sys, window, opts, CountMethod::Auto, &Sum)?;
    Ok((ls.ln(), count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{enumerate_orbits, fixture};

    #[test]
    fn necklace_counts_by_content() {
        // binary necklaces of length 6 with three ones: 20 words, 4 necklaces,
        // one of which (010101 ~ (01)^3) is a power → 3 primitive.
        assert_eq!(primitive_necklaces_exact(&[3, 3]), Some(3));
        assert_eq!(primitive_necklaces_exact(&[2, 0]), Some(0));
        assert_eq!(primitive_necklaces_exact(&[1, 0]), Some(1));
        assert_eq!(primitive_necklaces_exact(&[2, 2, 2]), Some(14));
    }

    #[test]
    fn float_path_matches_exact() {
        let mut t = LnFactorials::default();
        for c in [[5u32, 7, 2], [6, 6, 6], [10, 0, 10], [1, 1, 1]] {
            let exact = primitive_necklaces_exact(&c).unwrap() as f64;
            let n: u32 = c.iter().sum();
            let g = c.iter().fold(0, |a, &x| gcd(a, x));
            let lead = t.ln_multinomial(&c, 1);
            let mut total = 0.0;
            for d in (1..=g).filter(|d| g % d == 0) {
                total += mobius(d as usize) as f64 * (t.ln_multinomial(&c, d) - lead).exp();
            }
            let approx = (lead + total.ln() - (n as f64).ln()).exp();
            assert!((approx - exact).abs() / exact < 1e-12, "{c:?}");
        }
        assert!(primitive_necklaces_exact(&[60, 60, 60]).is_none());
        assert!(t.primitive_necklaces(&[60, 60, 60]).unwrap().1 > 100.0);
    }

    struct Collect;
    impl GroupFold for Collect {
        type Acc = std::collections::BTreeMap<Vec<i64>, (f64, f64)>;
        fn init(&self) -> Self::Acc {
            Default::default()
        }
        fn visit(&self, acc: &mut Self::Acc, g: &OrbitGroup<'_>) {
            let e = acc.entry(g.homology.to_vec()).or_default();
            e.0 += g.multiplicity;
            e.1 += g.multiplicity * g.weight.exp() * g.length;
        }
        fn merge(&self, mut l: Self::Acc, r: Self::Acc) -> Self::Acc {
            for (k, v) in r {
                let e = l.entry(k).or_default();
                e.0 += v.0;
                e.1 += v.1;
            }
            l
        }
    }

    #[test]
    fn content_counting_matches_enumeration() {
        let sys = fixture("sym4")
            .unwrap()
            .with_potential(EdgeFunction::new(vec![0.1, -0.3, 0.2, 0.05]).unwrap())
            .unwrap();
        let opts = EnumerationOptions::default();
        for t in [3.0, 5.5, 8.0] {
            let w = Window::trailing(t);
            let a = fold_orbit_groups(&sys, w, &opts, CountMethod::Content, &Collect).unwrap();
            let b = fold_orbit_groups(&sys, w, &opts, CountMethod::Enumerate, &Collect).unwrap();
            assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
            for (k, va) in &a {
                let vb = b[k];
                assert_eq!(va.0, vb.0, "class {k:?} at T={t}");
                assert!((va.1 - vb.1).abs() < 1e-10 * vb.1.abs().max(1.0));
            }
        }
    }

    #[test]
    fn trace_recursion_matches_enumeration() {
        let golden = fixture("golden")
            .unwrap()
            .with_potential(EdgeFunction::new(vec![0.3, -0.2, 0.7]).unwrap())
            .unwrap();
        let lens: Vec<usize> = (1..=14).collect();
        let fast = ln_prime_sums_by_word_length(golden.shift(), golden.potential(), &lens).unwrap();
        for (n, f) in lens.iter().zip(&fast) {
            let orbits = enumerate_orbits(&golden, Window::trailing(*n as f64)).unwrap();
            let mut ls = LogSum::default();
            for o in &orbits {
                ls.add(o.weight);
            }
            assert!((ls.ln() - f).abs() < 1e-11, "n={n}: {} vs {f}", ls.ln());
        }
    }

    #[test]
    fn weighted_count_dispatch_agrees() {
        let opts = EnumerationOptions::default();
        let w = Window::trailing(12.0);
        for name in ["full2", "golden", "full2-wm"] {
            let sys = fixture(name).unwrap().add_constant_potential(-0.5);
            let (fast, _) = ln_weighted_count(&sys, w, &opts).unwrap();
            let mut ls = LogSum::default();
            for o in enumerate_orbits(&sys, w).unwrap() {
                ls.add(o.weight);
            }
            assert!((fast - ls.ln()).abs() < 1e-11, "{name}");
        }
    }
}
