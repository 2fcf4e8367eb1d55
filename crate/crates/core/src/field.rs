//! Set-indexed Gaussian field `W_A` and Wiener integrals `W(f)` simulated
//! through the truncated Karhunen-Loève expansion
//! `W_A = sum_k (int_A phi_k dsigma) Z_k`.
//!
//! Each replica owns one vector of i.i.d. standard normal coordinates
//! `Z_0..Z_{N-1}` drawn from its own stream, so every functional of the
//! same replica is evaluated on the same sample point. Functionals are
//! evaluated through the leaf values `v = sum_k phi_k Z_k`, which turns a
//! query into a sparse dot product over leaves.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::OrthoBasis;
use crate::error::{Error, Result};
use crate::exec::{fold_chunks, Parallelism};
use crate::measure::MeasureSpace;
use crate::rng::replica_rng;
use crate::set::MeasurableSet;
use crate::stats;

/// A linear functional `f -> W(f)` prepared for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    weights: Vec<(usize, f64)>,
    coefficients: Vec<f64>,
    norm_sq: f64,
}

impl Query {
    /// `||f||^2_sigma`, the exact variance of `W(f)`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// Basis coefficients `<f, phi_k>_sigma`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Variance realized by the truncated expansion, `sum_k c_k^2`.
    pub fn captured_variance(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    /// `||f||^2 - sum_k c_k^2`, clamped at zero.
    pub fn truncation_residual(&self) -> f64 {
        (self.norm_sq - self.captured_variance()).max(0.0)
    }

    fn eval(&self, leaf_values: &[f64]) -> f64 {
        self.weights.iter().map(|&(leaf, w)| w * leaf_values[leaf]).sum()
    }

    /// Linear combination `sum_i c_i q_i` of queries on the same basis.
    pub fn combine(terms: &[(f64, &Query)], space_norm_sq: f64) -> Query {
        let n = terms.first().map(|(_, q)| q.coefficients.len()).unwrap_or(0);
        let mut coefficients = vec![0.0; n];
        let mut weights: Vec<(usize, f64)> = Vec::new();
        for (c, q) in terms {
            for (acc, x) in coefficients.iter_mut().zip(&q.coefficients) {
                *acc += c * x;
            }
            weights.extend(q.weights.iter().map(|&(leaf, w)| (leaf, c * w)));
        }
        weights.sort_by_key(|&(leaf, _)| leaf);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(weights.len());
        for (leaf, w) in weights {
            match merged.last_mut() {
                Some(last) if last.0 == leaf => last.1 += w,
                _ => merged.push((leaf, w)),
            }
        }
        Query {
            weights: merged,
            coefficients,
            norm_sq: space_norm_sq,
        }
    }
}

/// Per-replica view handed to fold and map callbacks.
pub struct ReplicaView<'a> {
    pub index: usize,
    /// The i.i.d. coordinates `Z_k` (equivalently `X_k = W(phi_k)`).
    pub coordinates: &'a [f64],
    /// Query values in the order the queries were given.
    pub values: &'a [f64],
}

struct Buffers {
    z: Vec<f64>,
    leaves: Vec<f64>,
    scratch: Vec<f64>,
    values: Vec<f64>,
}

impl Buffers {
    fn new(n: usize, queries: usize) -> Self {
        Self {
            z: vec![0.0; n],
            leaves: vec![0.0; n],
            scratch: Vec::with_capacity(n),
            values: vec![0.0; queries],
        }
    }
}

/// Seeded truncated Karhunen-Loève engine.
#[derive(Debug, Clone)]
pub struct FieldSimulator {
    space: MeasureSpace,
    basis: OrthoBasis,
    seed: u64,
    replicas: usize,
    parallelism: Parallelism,
}

impl FieldSimulator {
    pub fn new(space: MeasureSpace, basis: OrthoBasis, seed: u64, replicas: usize) -> Result<Self> {
        if replicas == 0 {
            return Err(Error::InvalidInput("replica count must be positive".into()));
        }
        Ok(Self {
            space,
            basis,
            seed,
            replicas,
            parallelism: Parallelism::default(),
        })
    }

    /// Builds the Haar basis of depth `depth` on `domain` and wraps it.
    pub fn build(space: MeasureSpace, domain: &MeasurableSet, depth: u32, seed: u64, replicas: usize) -> Result<Self> {
        let basis = OrthoBasis::build_haar(&space, domain, depth)?;
        Self::new(space, basis, seed, replicas)
    }

    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas.max(1);
        self
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn basis(&self) -> &OrthoBasis {
        &self.basis
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn parallelism(&self) -> Parallelism {
        self.parallelism
    }

    /// `W_A`.
    pub fn query_set(&self, set: &MeasurableSet) -> Result<Query> {
        let weights = self.basis.leaf_weights_of_set(&self.space, set)?;
        let coefficients = self.basis.coefficients_from_leaf_weights(&weights);
        Ok(Query {
            weights,
            coefficients,
            norm_sq: self.space.measure_of(set)?,
        })
    }

    /// `W(f)` for a step function `sum_i c_i chi_{A_i}` (cells may overlap).
    pub fn query_step(&self, cells: &[(MeasurableSet, f64)]) -> Result<Query> {
        let weights = self.basis.leaf_weights_of_step(&self.space, cells)?;
        let coefficients = self.basis.coefficients_from_leaf_weights(&weights);
        let mut norm_sq = 0.0;
        for (a, ca) in cells {
            for (b, cb) in cells {
                norm_sq += ca * cb * self.space.measure_of(&a.intersect(b))?;
            }
        }
        Ok(Query {
            weights,
            coefficients,
            norm_sq,
        })
    }

    /// `W(f)` for a callable `f` on the basis domain.
    pub fn query_fn<F: Fn(f64) -> f64>(&self, f: F) -> Result<Query> {
        let dense = self.basis.leaf_weights_of_fn(&self.space, &f)?;
        let coefficients = self.basis.coefficients_from_dense(&dense);
        let norm_sq = self.space.integrate_over(|u| f(u) * f(u), self.basis.domain())?;
        Ok(Query {
            weights: dense.into_iter().enumerate().filter(|(_, w)| *w != 0.0).collect(),
            coefficients,
            norm_sq,
        })
    }

    /// `W(phi_k)`.
    pub fn query_basis_function(&self, k: usize) -> Result<Query> {
        let f = self
            .basis
            .functions()
            .get(k)
            .ok_or_else(|| Error::InvalidInput(format!("basis has no function {k}")))?;
        self.query_step(f.pieces())
    }

    fn fill(&self, r: usize, queries: &[Query], buf: &mut Buffers) {
        let mut rng = replica_rng(self.seed, r as u64);
        for z in buf.z.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        self.basis.synthesize(&buf.z, &mut buf.leaves, &mut buf.scratch);
        for (v, q) in buf.values.iter_mut().zip(queries) {
            *v = q.eval(&buf.leaves);
        }
    }

    /// Deterministic fold over replicas. `step` sees one replica at a time;
    /// `merge` combines chunk states in replica order.
    pub fn fold<S, I, F, M>(&self, queries: &[Query], init: I, step: F, merge: M) -> Result<S>
    where
        S: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, ReplicaView<'_>) + Sync + Send,
        M: Fn(&mut S, S) + Sync + Send,
    {
        let n = self.basis.len();
        self.parallelism.install(|| {
            let (state, _) = fold_chunks(
                self.replicas,
                || (init(), Some(Buffers::new(n, queries.len()))),
                |(state, buf), r| {
                    let buf = buf.as_mut().expect("chunk buffers");
                    self.fill(r, queries, buf);
                    step(
                        state,
                        ReplicaView {
                            index: r,
                            coordinates: &buf.z,
                            values: &buf.values,
                        },
                    );
                },
                |(acc, _), (part, _)| merge(acc, part),
            );
            state
        })
    }

    /// Per-replica map, results in replica order.
    pub fn map<T, F>(&self, queries: &[Query], f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(ReplicaView<'_>) -> T + Sync + Send,
    {
        let n = self.basis.len();
        self.parallelism.install(|| {
            (0..self.replicas)
                .into_par_iter()
                .map_init(
                    || Buffers::new(n, queries.len()),
                    |buf, r| {
                        self.fill(r, queries, buf);
                        f(ReplicaView {
                            index: r,
                            coordinates: &buf.z,
                            values: &buf.values,
                        })
                    },
                )
                .collect()
        })
    }

    /// Per-query columns of replica values.
    pub fn sample_queries(&self, queries: &[Query]) -> Result<Vec<Vec<f64>>> {
        let rows = self.map(queries, |view| view.values.to_vec())?;
        let mut columns = vec![Vec::with_capacity(self.replicas); queries.len()];
        for row in rows {
            for (col, v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Ok(columns)
    }

    /// Replica values of `W_A` for every set.
    pub fn sample_field(&self, sets: &[MeasurableSet]) -> Result<FieldSample> {
        let queries: Vec<Query> = sets.iter().map(|s| self.query_set(s)).collect::<Result<_>>()?;
        let values = self.sample_queries(&queries)?;
        Ok(FieldSample {
            labels: sets.iter().map(|s| s.to_string()).collect(),
            norms: queries.iter().map(Query::norm_sq).collect(),
            residuals: queries.iter().map(Query::truncation_residual).collect(),
            values,
        })
    }

    /// Replica values of `W(f)` for a prepared query.
    pub fn wiener_integral(&self, query: &Query) -> Result<Vec<f64>> {
        Ok(self.sample_queries(std::slice::from_ref(query))?.remove(0))
    }

    /// The first `m` coordinates `X_k = W(phi_k)` of every replica.
    pub fn coordinate_map(&self, m: usize) -> Result<GaussianVector> {
        let m = m.min(self.basis.len());
        let rows = self.map(&[], |view| view.coordinates[..m].to_vec())?;
        let mut coordinates = vec![Vec::with_capacity(self.replicas); m];
        for row in rows {
            for (col, v) in coordinates.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Ok(GaussianVector { coordinates })
    }

    /// Sample raw moments of `W_A` next to `(2k-1)!! sigma(A)^k` (even
    /// orders) and 0 (odd orders).
    pub fn moment_check(&self, set: &MeasurableSet, max_order: u32) -> Result<Vec<MomentRow>> {
        let q = self.query_set(set)?;
        let sigma = q.norm_sq();
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("moment check needs 0 < sigma(A) < inf, got {sigma}")));
        }
        let orders = max_order as usize;
        let sums = self.fold(
            std::slice::from_ref(&q),
            || vec![0.0; 2 * orders],
            |acc, view| {
                let w = view.values[0];
                let mut p = 1.0;
                for k in 0..orders {
                    p *= w;
                    acc[k] += p;
                    acc[orders + k] += p * p;
                }
            },
            |acc, part| acc.iter_mut().zip(part).for_each(|(a, b)| *a += b),
        )?;
        let n = self.replicas as f64;
        Ok((1..=max_order)
            .map(|order| {
                let k = order as usize - 1;
                let m = sums[k] / n;
                let m2 = sums[orders + k] / n;
                let exact = if order % 2 == 1 {
                    0.0
                } else {
                    stats::double_factorial_odd(order / 2) * sigma.powi(order as i32 / 2)
                };
                MomentRow {
                    order,
                    sample: m,
                    exact,
                    se: ((m2 - m * m).max(0.0) / n).sqrt(),
                }
            })
            .collect())
    }

    /// Monte Carlo `E[exp(i W(f))]` against `exp(-||f||^2 / 2)`.
    pub fn char_functional_check(&self, query: &Query) -> Result<CharFunctionalCheck> {
        let values = self.map(std::slice::from_ref(query), |view| Complex64::new(0.0, view.values[0]).exp())?;
        let (estimate, se) = stats::complex_mean_se(&values);
        Ok(CharFunctionalCheck {
            estimate,
            exact: (-0.5 * query.norm_sq()).exp(),
            truncated_exact: (-0.5 * query.captured_variance()).exp(),
            se,
        })
    }
}

/// One row of [`FieldSimulator::moment_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRow {
    pub order: u32,
    pub sample: f64,
    pub exact: f64,
    pub se: f64,
}

/// Output of [`FieldSimulator::char_functional_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharFunctionalCheck {
    pub estimate: Complex64,
    pub exact: f64,
    /// `exp(-sum c_k^2 / 2)`, the value the truncated expansion targets.
    pub truncated_exact: f64,
    pub se: f64,
}

impl CharFunctionalCheck {
    /// `|estimate - exact|`.
    pub fn error(&self) -> f64 {
        (self.estimate - Complex64::new(self.exact, 0.0)).norm()
    }
}

/// Replica values of a list of field queries.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub labels: Vec<String>,
    /// Exact variances `sigma(A)` of the queries.
    pub norms: Vec<f64>,
    /// Truncation residuals of the queries.
    pub residuals: Vec<f64>,
    /// `values[q][r]`: query `q`, replica `r`.
    pub values: Vec<Vec<f64>>,
}

/// Aggregate statistics of one query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub query: String,
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub m3: f64,
    pub m4: f64,
}

impl FieldSample {
    pub fn replicas(&self) -> usize {
        self.values.first().map(Vec::len).unwrap_or(0)
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        stats::covariance(&self.values[i], &self.values[j])
    }

    pub fn aggregate(&self) -> Vec<AggregateRow> {
        self.labels
            .iter()
            .zip(&self.values)
            .map(|(label, v)| AggregateRow {
                query: label.clone(),
                n: v.len(),
                mean: stats::mean(v),
                var: stats::variance(v),
                m3: stats::raw_moment(v, 3),
                m4: stats::raw_moment(v, 4),
            })
            .collect()
    }

    /// One row per `(replica, query)`.
    pub fn write_long_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replica", "query", "value"]).map_err(csv_err)?;
        for r in 0..self.replicas() {
            for (label, v) in self.labels.iter().zip(&self.values) {
                w.write_record([r.to_string(), label.clone(), format!("{:e}", v[r])])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Aggregated rows `{query, n, mean, var, m3, m4}`.
    pub fn write_aggregate_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.aggregate() {
            w.serialize(row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Coordinates `X_k` per replica: `coordinates[k][r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVector {
    pub coordinates: Vec<Vec<f64>>,
}

impl GaussianVector {
    pub fn replicas(&self) -> usize {
        self.coordinates.first().map(Vec::len).unwrap_or(0)
    }

    /// Largest `|mean_k|` and `|cov_nm - delta_nm|` over the coordinates.
    pub fn moment_deviation(&self) -> (f64, f64) {
        let mean_dev = self.coordinates.iter().map(|c| stats::mean(c).abs()).fold(0.0, f64::max);
        let mut cov_dev: f64 = 0.0;
        for (n, a) in self.coordinates.iter().enumerate() {
            for (m, b) in self.coordinates.iter().enumerate() {
                let target = if n == m { 1.0 } else { 0.0 };
                cov_dev = cov_dev.max((stats::covariance(a, b) - target).abs());
            }
        }
        (mean_dev, cov_dev)
    }

    /// Fraction of replicas whose first `intervals.len()` coordinates fall
    /// in the product of half-open intervals `(a_k, b_k]`.
    pub fn cylinder_frequency(&self, intervals: &[(f64, f64)]) -> f64 {
        let n = self.replicas();
        let hits = (0..n)
            .filter(|&r| {
                intervals
                    .iter()
                    .zip(&self.coordinates)
                    .all(|(&(a, b), c)| a < c[r] && c[r] <= b)
            })
            .count();
        hits as f64 / n.max(1) as f64
    }

    /// KS distance of each coordinate to `N(0, 1)`.
    pub fn ks_statistics(&self) -> Vec<f64> {
        self.coordinates.iter().map(|c| stats::ks_statistic_normal(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn iv(a: f64, b: f64) -> MeasurableSet {
        MeasurableSet::interval(a, b).unwrap()
    }

    fn sim(depth: u32, replicas: usize) -> FieldSimulator {
        FieldSimulator::build(MeasureSpace::lebesgue(), &iv(0.0, 1.0), depth, 11, replicas).unwrap()
    }

    #[test]
    fn empty_set_is_identically_zero() {
        let s = sim(3, 100).sample_field(&[MeasurableSet::empty()]).unwrap();
        assert!(s.values[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unit_variance_and_disjoint_covariance() {
        let r = 40_000;
        let s = sim(3, r).sample_field(&[iv(0.0, 1.0), iv(0.0, 0.5), iv(0.5, 1.0)]).unwrap();
        let bound = 3.0 * (2.0 / r as f64).sqrt();
        assert!((stats::variance(&s.values[0]) - 1.0).abs() <= bound);
        assert!(s.covariance(1, 2).abs() <= 4.0 * (0.25 / r as f64).sqrt());
    }

    #[test]
    fn linearity_over_disjoint_union() {
        let s = sim(4, 500).sample_field(&[iv(0.0, 0.3), iv(0.3, 0.8), iv(0.0, 0.8)]).unwrap();
        for r in 0..500 {
            assert_abs_diff_eq!(s.values[0][r] + s.values[1][r], s.values[2][r], epsilon = 1e-12);
        }
    }

    #[test]
    fn determinism_and_worker_independence() {
        let a = sim(5, 3000).sample_field(&[iv(0.1, 0.6)]).unwrap();
        let b = sim(5, 3000)
            .with_parallelism(Parallelism::workers(3))
            .sample_field(&[iv(0.1, 0.6)])
            .unwrap();
        assert_eq!(a, b);
        let c = sim(5, 3000).with_seed(12).sample_field(&[iv(0.1, 0.6)]).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn wiener_integral_of_indicator_matches_field() {
        let s = sim(4, 200);
        let a = iv(0.25, 0.75);
        let by_set = s.sample_field(std::slice::from_ref(&a)).unwrap().values.remove(0);
        let by_fn = s.wiener_integral(&s.query_fn(|u| if a.contains(u) { 1.0 } else { 0.0 }).unwrap()).unwrap();
        let by_step = s.wiener_integral(&s.query_step(&[(a, 1.0)]).unwrap()).unwrap();
        for r in 0..200 {
            assert_abs_diff_eq!(by_set[r], by_fn[r], epsilon = 1e-9);
            assert_abs_diff_eq!(by_set[r], by_step[r], epsilon = 1e-12);
        }
        let zero = s.wiener_integral(&s.query_fn(|_| 0.0).unwrap()).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn coordinates_equal_wiener_integrals_of_basis() {
        let s = sim(3, 300);
        let coords = s.coordinate_map(8).unwrap();
        for k in 0..8 {
            let w = s.wiener_integral(&s.query_basis_function(k).unwrap()).unwrap();
            for (c, x) in coords.coordinates[k].iter().zip(&w) {
                assert_abs_diff_eq!(*c, *x, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn moment_table_exact_column() {
        let space = MeasureSpace::lebesgue();
        let s = FieldSimulator::build(space, &iv(0.0, 2.0), 2, 3, 1000).unwrap();
        let rows = s.moment_check(&iv(0.0, 2.0), 4).unwrap();
        let exact: Vec<f64> = rows.iter().map(|r| r.exact).collect();
        assert_eq!(exact, vec![0.0, 2.0, 0.0, 12.0]);
    }

    #[test]
    fn char_functional_symmetry_and_zero() {
        let s = sim(3, 2000);
        let f = s.query_step(&[(iv(0.0, 0.5), 1.0), (iv(0.5, 1.0), -0.5)]).unwrap();
        let g = Query::combine(&[(-1.0, &f)], f.norm_sq());
        let a = s.char_functional_check(&f).unwrap();
        let b = s.char_functional_check(&g).unwrap();
        assert_abs_diff_eq!(a.estimate.re, b.estimate.re, epsilon = 1e-12);
        let zero = s.char_functional_check(&s.query_fn(|_| 0.0).unwrap()).unwrap();
        assert_eq!(zero.estimate, Complex64::new(1.0, 0.0));
        assert_eq!(zero.exact, 1.0);
    }

    #[test]
    fn set_outside_domain_errors() {
        assert!(matches!(sim(2, 10).sample_field(&[iv(0.5, 2.0)]), Err(Error::Domain(_))));
    }
}
