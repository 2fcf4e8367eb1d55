//! Finite disjoint unions of half-open intervals `[a, b)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bounded Borel set given as a sorted list of disjoint half-open
/// intervals. The representation is canonical: intervals are non-empty,
/// sorted, and touching neighbours are merged, so structural equality is set
/// equality.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct MeasurableSet {
    intervals: Vec<(f64, f64)>,
}

impl MeasurableSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The interval `[a, b)`; empty when `b <= a`.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::from_intervals([(a, b)])
    }

    /// Builds the canonical union of arbitrary (possibly overlapping)
    /// intervals. Endpoints must be finite.
    pub fn from_intervals<I: IntoIterator<Item = (f64, f64)>>(iter: I) -> Result<Self> {
        let mut raw: Vec<(f64, f64)> = Vec::new();
        for (a, b) in iter {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "interval endpoints must be finite, got [{a}, {b})"
                )));
            }
            if a < b {
                raw.push((a, b));
            }
        }
        raw.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (a, b) in raw {
            match intervals.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => intervals.push((a, b)),
            }
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Sum of interval lengths (Lebesgue measure).
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Infimum and supremum, `None` for the empty set.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        Some((self.intervals.first()?.0, self.intervals.last()?.1))
    }

    pub fn contains(&self, x: f64) -> bool {
        // intervals are sorted, so binary search on the left endpoints
        let idx = self.intervals.partition_point(|&(a, _)| a <= x);
        idx > 0 && x < self.intervals[idx - 1].1
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a1, b1) = self.intervals[i];
            let (a2, b2) = other.intervals[j];
            let lo = a1.max(a2);
            let hi = b1.min(b2);
            if lo < hi {
                out.push((lo, hi));
            }
            if b1 < b2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        // pieces of a canonical set stay separated, so no merge is needed
        Self { intervals: out }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::from_intervals(self.intervals.iter().chain(&other.intervals).copied())
            .expect("canonical sets have finite endpoints")
    }

    /// `self \ other`.
    pub fn difference(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for &(a, b) in &self.intervals {
            let mut start = a;
            for &(c, d) in &other.intervals {
                if d <= start || c >= b {
                    continue;
                }
                if c > start {
                    out.push((start, c));
                }
                start = start.max(d);
                if start >= b {
                    break;
                }
            }
            if start < b {
                out.push((start, b));
            }
        }
        Self::from_intervals(out).expect("finite endpoints")
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.intersect(other).is_empty()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    /// The reflected set `-A`. Half-open `[a, b)` maps to `(-b, -a]`, which
    /// differs from `[-b, -a)` only at endpoints; we store the latter.
    pub fn reflect(&self) -> Self {
        Self::from_intervals(self.intervals.iter().map(|&(a, b)| (-b, -a))).expect("finite")
    }

    /// Intersection with `[lo, hi)`.
    pub fn clip(&self, lo: f64, hi: f64) -> Self {
        match Self::interval(lo, hi) {
            Ok(window) => self.intersect(&window),
            Err(_) => Self::empty(),
        }
    }
}

impl fmt::Display for MeasurableSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "∅");
        }
        for (k, (a, b)) in self.intervals.iter().enumerate() {
            if k > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "[{a}, {b})")?;
        }
        Ok(())
    }
}

impl TryFrom<Vec<[f64; 2]>> for MeasurableSet {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        for [a, b] in &v {
            if a > b {
                return Err(Error::InvalidInput(format!("reversed interval [{a}, {b})")));
            }
        }
        Self::from_intervals(v.into_iter().map(|[a, b]| (a, b)))
    }
}

impl From<MeasurableSet> for Vec<[f64; 2]> {
    fn from(s: MeasurableSet) -> Self {
        s.intervals.into_iter().map(|(a, b)| [a, b]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(iv: &[(f64, f64)]) -> MeasurableSet {
        MeasurableSet::from_intervals(iv.iter().copied()).unwrap()
    }

    #[test]
    fn canonical_form_merges_touching_intervals() {
        let s = set(&[(0.5, 1.0), (0.0, 0.5), (2.0, 3.0), (2.5, 2.7)]);
        assert_eq!(s.intervals(), &[(0.0, 1.0), (2.0, 3.0)]);
    }

    #[test]
    fn intersection_examples() {
        let a = set(&[(0.0, 1.0)]);
        assert_eq!(a.intersect(&set(&[(0.5, 2.0)])), set(&[(0.5, 1.0)]));
        assert_eq!(a.intersect(&a), a);
        assert!(a.intersect(&set(&[(2.0, 3.0)])).is_empty());
    }

    #[test]
    fn contains_respects_half_open_ends() {
        let a = set(&[(0.0, 1.0), (2.0, 3.0)]);
        assert!(a.contains(0.0));
        assert!(!a.contains(1.0));
        assert!(a.contains(2.5));
        assert!(!a.contains(-0.1));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(MeasurableSet::interval(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn difference_and_subset() {
        let a = set(&[(0.0, 4.0)]);
        let b = set(&[(1.0, 2.0), (3.0, 5.0)]);
        assert_eq!(a.difference(&b), set(&[(0.0, 1.0), (2.0, 3.0)]));
        assert!(set(&[(1.0, 1.5)]).is_subset(&b));
        assert!(!a.is_subset(&b));
    }

    fn arb_set() -> impl Strategy<Value = MeasurableSet> {
        prop::collection::vec((-10.0f64..10.0, 0.0f64..3.0), 0..5)
            .prop_map(|v| MeasurableSet::from_intervals(v.into_iter().map(|(a, l)| (a, a + l))).unwrap())
    }

    proptest! {
        #[test]
        fn intersection_is_symmetric_and_canonical(a in arb_set(), b in arb_set()) {
            let ab = a.intersect(&b);
            prop_assert_eq!(&ab, &b.intersect(&a));
            let recanon = MeasurableSet::from_intervals(ab.intervals().iter().copied()).unwrap();
            prop_assert_eq!(&ab, &recanon);
            prop_assert!(ab.length() <= a.length().min(b.length()) + 1e-12);
        }

        #[test]
        fn union_splits_into_difference_and_intersection(a in arb_set(), b in arb_set()) {
            let lhs = a.union(&b).length();
            let rhs = a.difference(&b).length() + b.length();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
