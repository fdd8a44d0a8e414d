use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::stable_sum;
use crate::symbolic::PeriodicOrbit;

/// One entry of the weighted average linking series at window end `T`.
///
/// The numerator and denominator are stored relative to the largest pair
/// log-weight `log_scale`, i.e. the true sums are `e^{log_scale}` times the
/// stored values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageLinkingEntry {
    pub t: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub log_scale: f64,
    pub pairs: usize,
    /// `numerator / denominator`; `None` when a family is empty.
    pub value: Option<f64>,
    /// Smallest and largest `lk/(ℓℓ')` over contributing pairs.
    pub term_range: Option<(f64, f64)>,
}

impl AverageLinkingEntry {
    pub fn is_empty(&self) -> bool {
        self.value.is_none()
    }
}

/// A grid of [`AverageLinkingEntry`] values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AverageLinkingSeries {
    pub entries: Vec<AverageLinkingEntry>,
}

impl AverageLinkingSeries {
    pub fn values(&self) -> Vec<Option<f64>> {
        self.entries.iter().map(|e| e.value).collect()
    }

    /// Window ends at which one of the families was empty.
    pub fn gaps(&self) -> Vec<f64> {
        self.entries.iter().filter(|e| e.is_empty()).map(|e| e.t).collect()
    }
}

/// `Σ lk(γ,γ')/(ℓℓ') e^{w+w'} / Σ e^{w+w'}` over `γ ∈ first`, `γ' ∈ second`,
/// where `w = ∫_γ φ` is carried by [`PeriodicOrbit::weight`] and
/// `table[i][j]` is the linking number of `first[i]` and `second[j]`.
///
/// Weights enter only through `e^{w + w' − max}`, and both sums are
/// accumulated in order of increasing magnitude, so adding the same constant
/// to every weight leaves the result unchanged whenever the shifted weights
/// are computed exactly.
pub fn average_linking(
    t: f64,
    first: &[PeriodicOrbit],
    second: &[PeriodicOrbit],
    table: &[Vec<i64>],
) -> Result<AverageLinkingEntry> {
    if table.len() != first.len() {
        return Err(Error::MissingPair(table.len().min(first.len()), 0));
    }
    if let Some(i) = table.iter().position(|row| row.len() != second.len()) {
        return Err(Error::MissingPair(i, table[i].len().min(second.len())));
    }
    if first.is_empty() || second.is_empty() {
        return Ok(AverageLinkingEntry {
            t,
            numerator: 0.0,
            denominator: 0.0,
            log_scale: f64::NEG_INFINITY,
            pairs: 0,
            value: None,
            term_range: None,
        });
    }
    let max_first = first.iter().map(|o| o.weight).fold(f64::NEG_INFINITY, f64::max);
    let max_second = second.iter().map(|o| o.weight).fold(f64::NEG_INFINITY, f64::max);
    let n = first.len() * second.len();
    let mut num = Vec::with_capacity(n);
    let mut den = Vec::with_capacity(n);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (g, row) in first.iter().zip(table) {
        for (h, &lk) in second.iter().zip(row) {
            let term = lk as f64 / (g.length * h.length);
            let w = ((g.weight - max_first) + (h.weight - max_second)).exp();
            lo = lo.min(term);
            hi = hi.max(term);
            num.push(term * w);
            den.push(w);
        }
    }
    let numerator = stable_sum(&num);
    let denominator = stable_sum(&den);
    Ok(AverageLinkingEntry {
        t,
        numerator,
        denominator,
        log_scale: max_first + max_second,
        pairs: n,
        value: Some(numerator / denominator),
        term_range: Some((lo, hi)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn orbit(length: f64, weight: f64) -> PeriodicOrbit {
        PeriodicOrbit { word: vec![0], length, weight, homology: vec![] }
    }

    #[test]
    fn single_pair_and_zero_table() {
        let e = average_linking(2.0, &[orbit(2.0, 0.0)], &[orbit(2.0, 0.0)], &[vec![1]]).unwrap();
        assert_eq!(e.value, Some(0.25));
        let fam = [orbit(1.0, 0.3), orbit(2.0, -1.0)];
        let e = average_linking(2.0, &fam, &fam, &[vec![0, 0], vec![0, 0]]).unwrap();
        assert_eq!(e.value, Some(0.0));
        assert_eq!(e.pairs, 4);
    }

    #[test]
    fn empty_family_is_flagged_and_missing_entries_rejected() {
        let e = average_linking(3.0, &[], &[orbit(2.0, 0.0)], &[]).unwrap();
        assert!(e.is_empty());
        let series = AverageLinkingSeries { entries: vec![e] };
        assert_eq!(series.gaps(), vec![3.0]);
        let fam = [orbit(1.0, 0.0), orbit(2.0, 0.0)];
        assert!(matches!(average_linking(2.0, &fam, &fam, &[vec![1, 0], vec![1]]), Err(Error::MissingPair(1, 1))));
        assert!(matches!(average_linking(2.0, &fam, &fam, &[vec![1, 0]]), Err(Error::MissingPair(..))));
    }

    #[test]
    fn weights_shift_is_bit_identical() {
        let a: Vec<PeriodicOrbit> = (0..7).map(|k| orbit(3.0 + k as f64 * 0.125, k as f64 / 8.0)).collect();
        let b: Vec<PeriodicOrbit> = (0..5).map(|k| orbit(4.0 + k as f64 * 0.25, -(k as f64) / 4.0)).collect();
        let table: Vec<Vec<i64>> = (0..7).map(|i| (0..5).map(|j| (i as i64 * 3 - j as i64 * 2) % 5).collect()).collect();
        let base = average_linking(4.0, &a, &b, &table).unwrap();
        let shift = |f: &[PeriodicOrbit]| f.iter().map(|o| orbit(o.length, o.weight + 5.25)).collect::<Vec<_>>();
        let moved = average_linking(4.0, &shift(&a), &shift(&b), &table).unwrap();
        assert_eq!(base.value.unwrap().to_bits(), moved.value.unwrap().to_bits());
        assert_eq!(moved.log_scale - base.log_scale, 10.5);
    }

    proptest! {
        #[test]
        fn value_is_a_weighted_mean(
            lens in prop::collection::vec(1.0f64..5.0, 1..6),
            weights in prop::collection::vec(-3.0f64..3.0, 6),
            lks in prop::collection::vec(-4i64..5, 36),
        ) {
            let a: Vec<_> = lens.iter().zip(&weights).map(|(l, w)| orbit(*l, *w)).collect();
            let b: Vec<_> = lens.iter().rev().zip(&weights).map(|(l, w)| orbit(l + 1.0, -w)).collect();
            let table: Vec<Vec<i64>> = (0..a.len()).map(|i| (0..b.len()).map(|j| lks[i * 6 + j]).collect()).collect();
            let e = average_linking(1.0, &a, &b, &table).unwrap();
            let (lo, hi) = e.term_range.unwrap();
            let v = e.value.unwrap();
            prop_assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
        }
    }
}
