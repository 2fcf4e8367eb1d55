//! Sigma-finite tempered measures on the real line, partitions of finite
//! measure sets, refinability and the lower variation functional.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadratureConfig};
use crate::set::MeasurableSet;

/// Absolutely continuous part of a measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    /// No density: the measure is purely atomic.
    Zero,
    /// `scale` times Lebesgue measure.
    Lebesgue { scale: f64 },
    /// `scale * |u|^alpha`.
    Power { alpha: f64, scale: f64 },
    /// `scale / (1 + u^2)^p`.
    CauchyLike { p: f64, scale: f64 },
    /// Polynomial pieces `sum_i coeffs[i] u^i` on `[a, b)`, zero elsewhere.
    Piecewise(Vec<PolySegment>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolySegment {
    pub a: f64,
    pub b: f64,
    pub coeffs: Vec<f64>,
}

impl Density {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Density::Zero => 0.0,
            Density::Lebesgue { scale } => *scale,
            Density::Power { alpha, scale } => {
                if u == 0.0 {
                    if *alpha == 0.0 {
                        *scale
                    } else {
                        0.0
                    }
                } else {
                    scale * u.abs().powf(*alpha)
                }
            }
            Density::CauchyLike { p, scale } => scale / (1.0 + u * u).powf(*p),
            Density::Piecewise(segs) => segs
                .iter()
                .find(|s| s.a <= u && u < s.b)
                .map(|s| s.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c))
                .unwrap_or(0.0),
        }
    }

    /// Points where the density may fail to be smooth.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Density::Power { .. } => vec![0.0],
            Density::Piecewise(segs) => segs.iter().flat_map(|s| [s.a, s.b]).collect(),
            _ => Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        match self {
            Density::Zero => Ok(()),
            Density::Lebesgue { scale } | Density::Power { scale, .. } | Density::CauchyLike { scale, .. }
                if !(scale.is_finite() && *scale >= 0.0) =>
            {
                bad(format!("density scale must be finite and >= 0, got {scale}"))
            }
            Density::Power { alpha, .. } if !(alpha.is_finite() && *alpha > -1.0) => {
                bad(format!("power density needs alpha > -1 to be locally integrable, got {alpha}"))
            }
            Density::CauchyLike { p, .. } if !p.is_finite() => bad(format!("non-finite exponent {p}")),
            Density::Piecewise(segs) => {
                for s in segs {
                    if !(s.a.is_finite() && s.b.is_finite() && s.a < s.b) {
                        return bad(format!("bad segment [{}, {})", s.a, s.b));
                    }
                    // nonnegativity probed on a fine grid of each segment
                    for k in 0..=64 {
                        let u = s.a + (s.b - s.a) * k as f64 / 64.0;
                        let v = s.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c);
                        if v < -1e-12 {
                            return bad(format!("density negative ({v}) at {u}"));
                        }
                    }
                }
                let mut sorted: Vec<_> = segs.iter().map(|s| (s.a, s.b)).collect();
                sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
                if sorted.windows(2).any(|w| w[1].0 < w[0].1) {
                    return bad("overlapping density segments".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// A measure `density(u) du + sum of atoms` on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpace {
    density: Density,
    atoms: Vec<Atom>,
    quadrature: QuadratureConfig,
}

impl MeasureSpace {
    pub fn new(density: Density, atoms: Vec<Atom>, quadrature: QuadratureConfig) -> Result<Self> {
        density.validate()?;
        for atom in &atoms {
            if !(atom.location.is_finite() && atom.mass.is_finite() && atom.mass >= 0.0) {
                return Err(Error::InvalidInput(format!("bad atom {atom:?}")));
            }
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        Ok(Self {
            density,
            atoms,
            quadrature,
        })
    }

    pub fn lebesgue() -> Self {
        Self::with_density(Density::Lebesgue { scale: 1.0 })
    }

    /// `du / (2 pi)`, the spectral measure of standard Brownian motion.
    pub fn normalized_lebesgue() -> Self {
        Self::with_density(Density::Lebesgue { scale: 1.0 / (2.0 * PI) })
    }

    pub fn with_density(density: Density) -> Self {
        Self::new(density, Vec::new(), QuadratureConfig::default()).expect("builtin density is valid")
    }

    /// A single unit point mass at `location`.
    pub fn dirac(location: f64) -> Self {
        Self::new(Density::Zero, vec![Atom { location, mass: 1.0 }], QuadratureConfig::default())
            .expect("valid atom")
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.quadrature
    }

    pub fn with_quadrature(mut self, cfg: QuadratureConfig) -> Self {
        self.quadrature = cfg;
        self
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        self.atoms.iter().all(|a| a.mass == 0.0)
    }

    /// Atoms of positive mass lying in `set`.
    pub fn atoms_in<'a>(&'a self, set: &'a MeasurableSet) -> impl Iterator<Item = &'a Atom> + 'a {
        self.atoms
            .iter()
            .filter(move |a| a.mass > 0.0 && set.contains(a.location))
    }

    /// `int_a^b f(u) density(u) du`, without atoms.
    pub fn integrate_density<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        if b <= a || matches!(self.density, Density::Zero) {
            return Ok(0.0);
        }
        let mut points = vec![a, b];
        points.extend(self.density.breakpoints().into_iter().filter(|&x| x > a && x < b));
        points.sort_by(f64::total_cmp);
        points.dedup();
        if let Density::Piecewise(segs) = &self.density {
            // skip the parts where the density vanishes identically
            let mut total = 0.0;
            for w in points.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                if segs.iter().any(|s| s.a <= mid && mid < s.b) {
                    total += integrate_with_breaks(|u| f(u) * self.density.eval(u), w, &self.quadrature)?.value;
                }
            }
            return Ok(total);
        }
        Ok(integrate_with_breaks(|u| f(u) * self.density.eval(u), &points, &self.quadrature)?.value)
    }

    /// `int_A f dsigma`, including atoms.
    pub fn integrate_over<F: Fn(f64) -> f64>(&self, f: F, set: &MeasurableSet) -> Result<f64> {
        let mut total = 0.0;
        for &(a, b) in set.intervals() {
            total += self.integrate_density(&f, a, b)?;
        }
        total += self.atoms_in(set).map(|atom| atom.mass * f(atom.location)).sum::<f64>();
        if !total.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integral over {set}")));
        }
        Ok(total)
    }

    /// `sigma(A)`.
    pub fn measure_of(&self, set: &MeasurableSet) -> Result<f64> {
        let mut total = 0.0;
        for &(a, b) in set.intervals() {
            total += self.interval_density_mass(a, b)?;
        }
        total += self.atoms_in(set).map(|a| a.mass).sum::<f64>();
        if !total.is_finite() {
            return Err(Error::Quadrature(format!("non-finite measure of {set}")));
        }
        Ok(total)
    }

    fn interval_density_mass(&self, a: f64, b: f64) -> Result<f64> {
        match self.density {
            Density::Zero => Ok(0.0),
            Density::Lebesgue { scale } => Ok(scale * (b - a)),
            _ => self.integrate_density(|_| 1.0, a, b),
        }
    }

    /// `int_{|u| <= truncation} dsigma(u) / (u^2 + 1)^p`.
    pub fn temperedness_check(&self, p: u32, truncation: f64) -> Result<f64> {
        if !(truncation > 0.0 && truncation.is_finite()) {
            return Err(Error::InvalidInput(format!("truncation must be positive, got {truncation}")));
        }
        let window = MeasurableSet::interval(-truncation, truncation)?;
        let weight = |u: f64| (u * u + 1.0).powi(-(p as i32));
        let mut total = self.integrate_over(weight, &window)?;
        // the half-open window misses an atom sitting exactly at +truncation
        total += self
            .atoms
            .iter()
            .filter(|a| a.location == truncation)
            .map(|a| a.mass * weight(a.location))
            .sum::<f64>();
        Ok(total)
    }

    /// Doubling sweep of [`Self::temperedness_check`] from truncation 1 up
    /// to `2^20`, extrapolating the geometric tail of the increments.
    pub fn temperedness_limit(&self, p: u32) -> Result<TemperednessReport> {
        let weight = |u: f64| (u * u + 1.0).powi(-(p as i32));
        let mut truncation = 1.0;
        let mut value = self.temperedness_check(p, truncation)?;
        let mut prev_inc: Option<f64> = None;
        let mut last_ratio = 0.0;
        let cap = (1u64 << 20) as f64;
        while truncation < cap {
            let next = 2.0 * truncation;
            let shell = MeasurableSet::from_intervals([(-next, -truncation), (truncation, next)])?;
            let mut inc = self.integrate_over(weight, &shell)?;
            // atoms at the old right end moved inside the window
            inc += self
                .atoms
                .iter()
                .filter(|a| a.location == next)
                .map(|a| a.mass * weight(a.location))
                .sum::<f64>();
            inc -= self
                .atoms
                .iter()
                .filter(|a| a.location == truncation)
                .map(|a| a.mass * weight(a.location))
                .sum::<f64>();
            value += inc;
            truncation = next;
            if inc.abs() <= 1e-8 * value.abs() {
                return Ok(TemperednessReport {
                    value,
                    truncation,
                    last_increment: inc,
                    converged: true,
                });
            }
            let mut ratio = 0.0;
            if let Some(prev) = prev_inc {
                ratio = if prev != 0.0 { inc / prev } else { f64::INFINITY };
                if truncation >= 64.0 && !(ratio < 0.9) {
                    return Err(Error::Divergent(format!(
                        "increments of the p = {p} temperedness integral stopped shrinking \
                         (ratio {ratio:.3} at truncation {truncation})"
                    )));
                }
            }
            prev_inc = Some(inc);
            last_ratio = ratio;
        }
        let inc = prev_inc.unwrap_or(0.0);
        // geometric tail estimate from the last two shells
        let ratio = last_ratio.clamp(0.0, 0.9);
        let extrapolated = value + inc * ratio / (1.0 - ratio);
        if inc.abs() > 1e-3 * value.abs() {
            return Err(Error::Divergent(format!(
                "temperedness integral still moving by {inc:e} at truncation {truncation}"
            )));
        }
        Ok(TemperednessReport {
            value: extrapolated,
            truncation,
            last_increment: inc,
            converged: false,
        })
    }

    /// Splits `set` into `n` cells of equal measure by bisection on the
    /// cumulative measure (absolute tolerance `1e-12` on split points).
    pub fn equal_measure_partition(&self, set: &MeasurableSet, n: usize) -> Result<Partition> {
        if n == 0 {
            return Err(Error::InvalidInput("partition needs at least one cell".into()));
        }
        if let Some(atom) = self.atoms_in(set).next() {
            return Err(Error::NotRefinable {
                location: atom.location,
                mass: atom.mass,
            });
        }
        let pieces: Vec<f64> = set
            .intervals()
            .iter()
            .map(|&(a, b)| self.interval_density_mass(a, b))
            .collect::<Result<_>>()?;
        let total: f64 = pieces.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "equal-measure partition needs 0 < sigma(A) < inf, got {total} for {set}"
            )));
        }
        let Some((lo, hi)) = set.bounds() else {
            unreachable!("positive measure implies non-empty set")
        };
        let mut cuts = Vec::with_capacity(n + 1);
        cuts.push(lo);
        let mut interval_idx = 0;
        let mut before = 0.0;
        for k in 1..n {
            let target = total * k as f64 / n as f64;
            while interval_idx + 1 < pieces.len() && before + pieces[interval_idx] < target {
                before += pieces[interval_idx];
                interval_idx += 1;
            }
            let (a, b) = set.intervals()[interval_idx];
            let x = self.bisect_cumulative(a, b, target - before)?;
            cuts.push(x.max(*cuts.last().expect("non-empty")));
        }
        cuts.push(hi);
        let cells: Vec<MeasurableSet> = cuts.windows(2).map(|w| set.clip(w[0], w[1])).collect();
        Partition::new(self, set.clone(), cells)
    }

    // Smallest x in [a, b] with sigma_density([a, x)) >= mass.
    fn bisect_cumulative(&self, a: f64, b: f64, mass: f64) -> Result<f64> {
        if let Density::Lebesgue { scale } = self.density {
            if scale > 0.0 {
                return Ok((a + mass / scale).clamp(a, b));
            }
        }
        let (mut lo, mut hi) = (a, b);
        let mut mass_lo = 0.0;
        let mut iterations = 0;
        while hi - lo > 1e-12 && iterations < 200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let mass_mid = mass_lo + self.interval_density_mass(lo, mid)?;
            if mass_mid < mass {
                lo = mid;
                mass_lo = mass_mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        Ok(0.5 * (lo + hi))
    }

    /// Equal-measure partition fine enough that every cell has measure at
    /// most `eps` (strictly less unless a single cell already suffices).
    pub fn refine_to_mesh(&self, set: &MeasurableSet, eps: f64) -> Result<Partition> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!("mesh bound must be positive, got {eps}")));
        }
        if let Some(atom) = self.atoms_in(set).next() {
            return Err(Error::NotRefinable {
                location: atom.location,
                mass: atom.mass,
            });
        }
        let total = self.measure_of(set)?;
        let n = if eps >= total {
            1
        } else {
            (total / eps).floor() as usize + 1
        };
        let partition = self.equal_measure_partition(set, n)?;
        if partition.mesh() > eps * (1.0 + 1e-9) {
            return Err(Error::Quadrature(format!(
                "refinement to mesh {eps} produced mesh {}",
                partition.mesh()
            )));
        }
        Ok(partition)
    }

    /// Dyadic level `level` of the equal-measure tree: `2^level` cells.
    pub fn dyadic_partition(&self, set: &MeasurableSet, level: u32) -> Result<Partition> {
        self.equal_measure_partition(set, 1usize << level)
    }

    /// `2^level` cells of equal Lebesgue length. Works for atomic measures,
    /// where equal-measure splits are impossible.
    pub fn equal_length_partition(&self, set: &MeasurableSet, level: u32) -> Result<Partition> {
        let Some((lo, hi)) = set.bounds() else {
            return Err(Error::InvalidInput("cannot partition the empty set".into()));
        };
        let n = 1usize << level;
        let cells = (0..n)
            .map(|k| {
                let a = lo + (hi - lo) * k as f64 / n as f64;
                let b = if k + 1 == n { hi } else { lo + (hi - lo) * (k + 1) as f64 / n as f64 };
                set.clip(a, b)
            })
            .collect();
        Partition::new(self, set.clone(), cells)
    }

    /// Largest `|sigma([a,b)) - sigma([-b,-a))|` over a probe grid.
    pub fn symmetry_defect(&self, probes: &[(f64, f64)]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &(a, b) in probes {
            let s = MeasurableSet::interval(a, b)?;
            let d = (self.measure_of(&s)? - self.measure_of(&s.reflect())?).abs();
            worst = worst.max(d);
        }
        Ok(worst)
    }
}

/// Result of a temperedness sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperednessReport {
    pub value: f64,
    pub truncation: f64,
    pub last_increment: f64,
    pub converged: bool,
}

/// A finite partition of a measurable set with cached cell measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    parent: MeasurableSet,
    cells: Vec<MeasurableSet>,
    measures: Vec<f64>,
}

impl Partition {
    /// Validates that the cells are pairwise disjoint subsets of `parent`
    /// whose measures add up to `sigma(parent)`.
    pub fn new(space: &MeasureSpace, parent: MeasurableSet, cells: Vec<MeasurableSet>) -> Result<Self> {
        let mut covered = MeasurableSet::empty();
        for cell in &cells {
            if !cell.is_subset(&parent) {
                return Err(Error::InvalidInput(format!("cell {cell} escapes {parent}")));
            }
            if !covered.is_disjoint(cell) {
                return Err(Error::InvalidInput(format!("cell {cell} overlaps an earlier cell")));
            }
            covered = covered.union(cell);
        }
        let measures: Vec<f64> = cells.iter().map(|c| space.measure_of(c)).collect::<Result<_>>()?;
        let total = space.measure_of(&parent)?;
        let sum: f64 = measures.iter().sum();
        let tol = 1e-9 * total.max(1.0);
        if (sum - total).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "cells carry measure {sum}, parent has {total}"
            )));
        }
        Ok(Self {
            parent,
            cells,
            measures,
        })
    }

    pub fn parent(&self) -> &MeasurableSet {
        &self.parent
    }

    pub fn cells(&self) -> &[MeasurableSet] {
        &self.cells
    }

    pub fn cell_measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `max_k sigma(A_k)`.
    pub fn mesh(&self) -> f64 {
        self.measures.iter().copied().fold(0.0, f64::max)
    }

    /// `sum_k sigma(A_k)^2`.
    pub fn lower_variation(&self) -> f64 {
        self.measures.iter().map(|m| m * m).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_u() -> MeasureSpace {
        MeasureSpace::with_density(Density::Piecewise(vec![PolySegment {
            a: 0.0,
            b: 1.0,
            coeffs: vec![0.0, 2.0],
        }]))
    }

    fn iv(a: f64, b: f64) -> MeasurableSet {
        MeasurableSet::interval(a, b).unwrap()
    }

    #[test]
    fn measure_examples() {
        let leb = MeasureSpace::lebesgue();
        assert_eq!(leb.measure_of(&iv(0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(leb.measure_of(&MeasurableSet::empty()).unwrap(), 0.0);
        // antiderivative u^2
        assert_abs_diff_eq!(two_u().measure_of(&iv(0.0, 0.5)).unwrap(), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn atoms_are_counted_on_half_open_sets() {
        let d = MeasureSpace::dirac(0.5);
        assert_eq!(d.measure_of(&iv(0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(d.measure_of(&iv(0.0, 0.5)).unwrap(), 0.0);
        assert_eq!(d.measure_of(&iv(0.5, 0.6)).unwrap(), 1.0);
    }

    #[test]
    fn temperedness_examples() {
        let leb = MeasureSpace::lebesgue();
        let report = leb.temperedness_limit(1).unwrap();
        assert_abs_diff_eq!(report.value, PI, epsilon = 1e-6);
        // at a fixed truncation: 2 arctan(T)
        assert_abs_diff_eq!(leb.temperedness_check(1, 10.0).unwrap(), 2.0 * 10f64.atan(), epsilon = 1e-10);

        let finite = MeasureSpace::with_density(Density::Piecewise(vec![PolySegment {
            a: 0.0,
            b: 1.0,
            coeffs: vec![1.0],
        }]));
        assert_abs_diff_eq!(finite.temperedness_check(0, 5.0).unwrap(), 1.0, epsilon = 1e-12);

        let quadratic = MeasureSpace::with_density(Density::Power { alpha: 2.0, scale: 1.0 });
        assert!(matches!(quadratic.temperedness_limit(1), Err(Error::Divergent(_))));
    }

    #[test]
    fn equal_measure_partition_examples() {
        let leb = MeasureSpace::lebesgue();
        let p = leb.equal_measure_partition(&iv(0.0, 1.0), 4).unwrap();
        let expected = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (k, cell) in p.cells().iter().enumerate() {
            let (a, b) = cell.bounds().unwrap();
            assert_abs_diff_eq!(a, expected[k], epsilon = 1e-12);
            assert_abs_diff_eq!(b, expected[k + 1], epsilon = 1e-12);
        }

        let p = two_u().equal_measure_partition(&iv(0.0, 1.0), 2).unwrap();
        let split = p.cells()[0].bounds().unwrap().1;
        assert_abs_diff_eq!(split, 0.5f64.sqrt(), epsilon = 1e-11);

        let atomic = MeasureSpace::new(
            Density::Lebesgue { scale: 1.0 },
            vec![Atom { location: 0.5, mass: 1.0 }],
            QuadratureConfig::default(),
        )
        .unwrap();
        match atomic.equal_measure_partition(&iv(0.0, 1.0), 2) {
            Err(Error::NotRefinable { location, .. }) => assert_eq!(location, 0.5),
            other => panic!("expected NotRefinable, got {other:?}"),
        }
    }

    #[test]
    fn partition_over_multi_interval_set() {
        let leb = MeasureSpace::lebesgue();
        let set = MeasurableSet::from_intervals([(0.0, 1.0), (2.0, 3.0)]).unwrap();
        let p = leb.equal_measure_partition(&set, 4).unwrap();
        for m in p.cell_measures() {
            assert_abs_diff_eq!(*m, 0.5, epsilon = 1e-12);
        }
        let p3 = leb.equal_measure_partition(&set, 3).unwrap();
        // the middle cell straddles the gap
        assert_eq!(p3.cells()[1].intervals().len(), 2);
    }

    #[test]
    fn refine_to_mesh_examples() {
        let leb = MeasureSpace::lebesgue();
        let p = leb.refine_to_mesh(&iv(0.0, 1.0), 0.3).unwrap();
        assert_eq!(p.len(), 4);
        assert_abs_diff_eq!(p.mesh(), 0.25, epsilon = 1e-12);
        assert_eq!(leb.refine_to_mesh(&iv(0.0, 1.0), 1.5).unwrap().len(), 1);
        assert!(leb.refine_to_mesh(&iv(0.0, 1.0), 0.25).unwrap().mesh() < 0.25);
        assert!(matches!(
            MeasureSpace::dirac(0.3).refine_to_mesh(&iv(0.0, 1.0), 0.1),
            Err(Error::NotRefinable { .. })
        ));
    }

    #[test]
    fn lower_variation_examples() {
        let leb = MeasureSpace::lebesgue();
        let unit = iv(0.0, 1.0);
        assert_abs_diff_eq!(leb.dyadic_partition(&unit, 3).unwrap().lower_variation(), 0.125, epsilon = 1e-14);
        let single = Partition::new(&leb, iv(0.0, 2.0), vec![iv(0.0, 2.0)]).unwrap();
        assert_eq!(single.lower_variation(), 4.0);
        let p = two_u().equal_measure_partition(&unit, 7).unwrap();
        assert_abs_diff_eq!(p.lower_variation(), 1.0 / 7.0, epsilon = 1e-9);
    }

    #[test]
    fn equal_split_invariants_over_refinement() {
        let space = two_u();
        let set = iv(0.0, 1.0);
        let total = space.measure_of(&set).unwrap();
        let mut previous = f64::INFINITY;
        for level in 1..=10 {
            let n = 1usize << level;
            let p = space.equal_measure_partition(&set, n).unwrap();
            for m in p.cell_measures() {
                assert!((m - total / n as f64).abs() / total <= 1e-8);
            }
            let lv = p.lower_variation();
            let expected = total * total / n as f64;
            assert!((lv - expected).abs() / expected <= 1e-7);
            assert!(lv <= previous);
            previous = lv;
        }
    }

    #[test]
    fn partition_rejects_overlaps() {
        let leb = MeasureSpace::lebesgue();
        let r = Partition::new(&leb, iv(0.0, 1.0), vec![iv(0.0, 0.6), iv(0.5, 1.0)]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn symmetry_defect_detects_asymmetry() {
        let probes = [(0.0, 1.0), (0.5, 2.0), (1.0, 3.0)];
        assert!(MeasureSpace::normalized_lebesgue().symmetry_defect(&probes).unwrap() < 1e-12);
        assert!(two_u().symmetry_defect(&probes).unwrap() > 0.5);
    }
}
