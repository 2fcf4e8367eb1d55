//! Stochastic integration against the field: simple (Wiener) integrals,
//! adapted Ito integrals on an ordered cell grid, quadratic variation and
//! the Ito formula residual.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{fold_chunks, Parallelism};
use crate::field::{csv_err, FieldSimulator, Query};
use crate::measure::{MeasureSpace, Partition};
use crate::rng::replica_rng;
use crate::set::MeasurableSet;
use crate::stats;

/// `sum_k c_k chi_{A_k}` with pairwise disjoint cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepFunction {
    cells: Vec<(MeasurableSet, f64)>,
}

impl StepFunction {
    pub fn new(cells: Vec<(MeasurableSet, f64)>) -> Result<Self> {
        for (i, (a, _)) in cells.iter().enumerate() {
            for (b, _) in &cells[..i] {
                if !a.is_disjoint(b) {
                    return Err(Error::InvalidInput(format!("step function cells {b} and {a} overlap")));
                }
            }
        }
        Ok(Self { cells })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn cells(&self) -> &[(MeasurableSet, f64)] {
        &self.cells
    }

    /// `sum_k c_k^2 sigma(A_k)`.
    pub fn norm_sq(&self, space: &MeasureSpace) -> Result<f64> {
        self.cells
            .iter()
            .map(|(a, c)| Ok(c * c * space.measure_of(a)?))
            .sum()
    }

    /// `<f, g>_sigma = sum_{j,k} c_j d_k sigma(A_j ∩ B_k)`.
    pub fn inner(&self, other: &Self, space: &MeasureSpace) -> Result<f64> {
        let mut total = 0.0;
        for (a, c) in &self.cells {
            for (b, d) in &other.cells {
                total += c * d * space.measure_of(&a.intersect(b))?;
            }
        }
        Ok(total)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.cells
            .iter()
            .find(|(a, _)| a.contains(x))
            .map(|(_, c)| *c)
            .unwrap_or(0.0)
    }
}

/// `sum_k c_k W_{A_k}` per replica.
pub fn simple_integral(sim: &FieldSimulator, f: &StepFunction) -> Result<Vec<f64>> {
    let queries: Vec<Query> = f
        .cells()
        .iter()
        .map(|(a, _)| sim.query_set(a))
        .collect::<Result<_>>()?;
    let coeffs: Vec<f64> = f.cells().iter().map(|(_, c)| *c).collect();
    sim.map(&queries, |view| view.values.iter().zip(&coeffs).map(|(w, c)| c * w).sum())
}

/// Read access to the field values of the cells preceding the current one.
pub struct History<'a> {
    current: usize,
    values: &'a [f64],
    prefix: &'a [f64],
}

impl History<'_> {
    /// Index of the cell being evaluated.
    pub fn cell(&self) -> usize {
        self.current
    }

    /// `W_{C_j}`; only cells `j < cell()` are readable.
    pub fn field(&self, j: usize) -> Result<f64> {
        if j >= self.current {
            return Err(Error::Adaptedness {
                cell: self.current,
                read: j,
            });
        }
        Ok(self.values[j])
    }

    /// `W_{C_1 ∪ ... ∪ C_{k-1}}` for the current cell `k`.
    pub fn running_field(&self) -> f64 {
        self.prefix[self.current]
    }
}

type Rule = dyn Fn(&History<'_>) -> Result<f64> + Send + Sync;

/// An integrand on an ordered grid of disjoint cells whose value on cell
/// `k` may only depend on `W_{C_j}`, `j < k`.
#[derive(Clone)]
pub struct AdaptedProcess {
    cells: Vec<MeasurableSet>,
    rule: Arc<Rule>,
}

impl fmt::Debug for AdaptedProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdaptedProcess").field("cells", &self.cells).finish_non_exhaustive()
    }
}

impl AdaptedProcess {
    pub fn new<F>(cells: Vec<MeasurableSet>, rule: F) -> Result<Self>
    where
        F: Fn(&History<'_>) -> Result<f64> + Send + Sync + 'static,
    {
        for (i, a) in cells.iter().enumerate() {
            if cells[..i].iter().any(|b| !a.is_disjoint(b)) {
                return Err(Error::InvalidInput(format!("adapted grid cell {a} overlaps an earlier cell")));
            }
        }
        Ok(Self {
            cells,
            rule: Arc::new(rule),
        })
    }

    pub fn constant(cells: Vec<MeasurableSet>, value: f64) -> Result<Self> {
        Self::new(cells, move |_| Ok(value))
    }

    /// Deterministic values, one per cell.
    pub fn deterministic(cells: Vec<MeasurableSet>, values: Vec<f64>) -> Result<Self> {
        if values.len() != cells.len() {
            return Err(Error::InvalidInput("one value per cell required".into()));
        }
        Self::new(cells, move |h| Ok(values[h.cell()]))
    }

    /// `Y_k = W_{C_1 ∪ ... ∪ C_{k-1}}` (left-point running field).
    pub fn running_field(cells: Vec<MeasurableSet>) -> Result<Self> {
        Self::new(cells, |h| Ok(h.running_field()))
    }

    /// `Y_k = g(W_{C_1 ∪ ... ∪ C_{k-1}})`.
    pub fn running_fn<G>(cells: Vec<MeasurableSet>, g: G) -> Result<Self>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(cells, move |h| Ok(g(h.running_field())))
    }

    pub fn cells(&self) -> &[MeasurableSet] {
        &self.cells
    }

    /// Integrand values `Y_k` and the Ito sum `sum_k Y_k W_{C_k}` for one
    /// replica's cell values.
    fn evaluate(&self, values: &[f64], prefix: &mut Vec<f64>, integrand: &mut Vec<f64>) -> Result<f64> {
        prefix.clear();
        prefix.push(0.0);
        for w in values {
            let last = *prefix.last().expect("non-empty");
            prefix.push(last + w);
        }
        integrand.clear();
        let mut sum = 0.0;
        for (k, w) in values.iter().enumerate() {
            let y = (self.rule)(&History {
                current: k,
                values,
                prefix,
            })?;
            integrand.push(y);
            sum += y * w;
        }
        Ok(sum)
    }
}

/// Output of [`ito_integral`].
#[derive(Debug, Clone, PartialEq)]
pub struct ItoIntegralSample {
    pub values: Vec<f64>,
    /// `sum_k E^[Y_k^2] sigma(C_k)`, the right side of the Ito isometry.
    pub isometry_prediction: f64,
    /// Sample second moment of the integral.
    pub second_moment: f64,
    /// Standard error of `second_moment`.
    pub second_moment_se: f64,
}

/// `sum_k Y_k W_{C_k}` per replica with the left-point rule.
pub fn ito_integral(sim: &FieldSimulator, process: &AdaptedProcess) -> Result<ItoIntegralSample> {
    let queries: Vec<Query> = process
        .cells()
        .iter()
        .map(|c| sim.query_set(c))
        .collect::<Result<_>>()?;
    let sigmas: Vec<f64> = queries.iter().map(Query::norm_sq).collect();
    let p = sigmas.len();
    let rows: Vec<Result<(f64, f64)>> = sim.map(&queries, |view| {
        let mut prefix = Vec::with_capacity(p + 1);
        let mut integrand = Vec::with_capacity(p);
        let value = process.evaluate(view.values, &mut prefix, &mut integrand)?;
        let weighted: f64 = integrand.iter().zip(&sigmas).map(|(y, s)| y * y * s).sum();
        Ok((value, weighted))
    })?;
    let mut values = Vec::with_capacity(rows.len());
    let mut weighted = Vec::with_capacity(rows.len());
    for row in rows {
        let (v, w) = row?;
        values.push(v);
        weighted.push(w);
    }
    let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
    let (second_moment, second_moment_se) = stats::mean_se(&squares);
    Ok(ItoIntegralSample {
        values,
        isometry_prediction: stats::mean(&weighted),
        second_moment,
        second_moment_se,
    })
}

/// One refinement level of a quadratic variation experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadVarRow {
    pub level: u32,
    pub cells: usize,
    pub mesh: f64,
    /// `2 sum_k sigma(A_k)^2`.
    pub predicted_2nd_moment: f64,
    /// Sample mean of `|sigma(A) - sum_k W_{A_k}^2|^2`.
    pub empirical_2nd_moment: f64,
    pub se: f64,
    pub ratio: f64,
    /// Sample mean of `sum_k W_{A_k}^2`.
    pub mean_sum_squares: f64,
    /// `sqrt(empirical_2nd_moment)`.
    pub l2_distance: f64,
}

/// Quadratic variation of `W` over refining partitions of one set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadVarReport {
    pub set: String,
    pub sigma: f64,
    pub replicas: usize,
    pub rows: Vec<QuadVarRow>,
}

impl QuadVarReport {
    /// CSV `{level, mesh, predicted_2nd_moment, empirical_2nd_moment, ratio}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "mesh", "predicted_2nd_moment", "empirical_2nd_moment", "ratio"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.level.to_string(),
                format!("{:e}", r.mesh),
                format!("{:e}", r.predicted_2nd_moment),
                format!("{:e}", r.empirical_2nd_moment),
                format!("{:e}", r.ratio),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn quad_var_rows(
    replicas: usize,
    partitions: &[(u32, Partition)],
    sums: &[(f64, f64, f64)],
) -> Vec<QuadVarRow> {
    let n = replicas as f64;
    partitions
        .iter()
        .zip(sums)
        .map(|((level, p), &(sum_s, sum_d2, sum_d4))| {
            let empirical = sum_d2 / n;
            let var_d2 = (sum_d4 / n - empirical * empirical).max(0.0);
            let predicted = 2.0 * p.lower_variation();
            QuadVarRow {
                level: *level,
                cells: p.len(),
                mesh: p.mesh(),
                predicted_2nd_moment: predicted,
                empirical_2nd_moment: empirical,
                se: (var_d2 / n).sqrt(),
                ratio: if predicted > 0.0 { empirical / predicted } else { f64::NAN },
                mean_sum_squares: sum_s / n,
                l2_distance: empirical.sqrt(),
            }
        })
        .collect()
}

/// For each dyadic level `n`, compares the sample mean of
/// `|sigma(A) - sum_k W_{A_k}^2|^2` over the `2^n`-cell equal-measure
/// partition with `2 sum_k sigma(A_k)^2`.
pub fn quad_variation_experiment(sim: &FieldSimulator, set: &MeasurableSet, levels: &[u32]) -> Result<QuadVarReport> {
    let space = sim.space();
    let partitions: Vec<(u32, Partition)> = levels
        .iter()
        .map(|&l| Ok((l, space.dyadic_partition(set, l)?)))
        .collect::<Result<_>>()?;
    quad_variation_for_partitions(sim, set, partitions)
}

/// Quadratic variation over caller-supplied partitions of `set`.
pub fn quad_variation_for_partitions(
    sim: &FieldSimulator,
    set: &MeasurableSet,
    partitions: Vec<(u32, Partition)>,
) -> Result<QuadVarReport> {
    let sigma = sim.space().measure_of(set)?;
    let mut queries = Vec::new();
    let mut offsets = vec![0];
    for (_, p) in &partitions {
        for cell in p.cells() {
            queries.push(sim.query_set(cell)?);
        }
        offsets.push(queries.len());
    }
    let levels = partitions.len();
    let sums = sim.fold(
        &queries,
        || vec![(0.0, 0.0, 0.0); levels],
        |acc, view| {
            for (l, slot) in acc.iter_mut().enumerate() {
                let s: f64 = view.values[offsets[l]..offsets[l + 1]].iter().map(|w| w * w).sum();
                let d2 = (sigma - s) * (sigma - s);
                slot.0 += s;
                slot.1 += d2;
                slot.2 += d2 * d2;
            }
        },
        |acc, part| {
            for (a, b) in acc.iter_mut().zip(part) {
                a.0 += b.0;
                a.1 += b.1;
                a.2 += b.2;
            }
        },
    )?;
    Ok(QuadVarReport {
        set: set.to_string(),
        sigma,
        replicas: sim.replicas(),
        rows: quad_var_rows(sim.replicas(), &partitions, &sums),
    })
}

/// Quadratic variation for measures that may carry atoms, where the
/// equal-measure tree (and hence the Haar basis) does not exist.
///
/// Uses `2^n` equal-length cells and samples the cell values directly as
/// independent `N(0, sigma(A_k))` variables, which is the exact joint law of
/// the field on disjoint cells. For an atom of mass `m` the sum of squares
/// keeps variance at least `2 m^2` at every level.
pub fn quad_variation_equal_length(
    space: &MeasureSpace,
    set: &MeasurableSet,
    levels: &[u32],
    replicas: usize,
    seed: u64,
    parallelism: Parallelism,
) -> Result<QuadVarReport> {
    let sigma = space.measure_of(set)?;
    let partitions: Vec<(u32, Partition)> = levels
        .iter()
        .map(|&l| Ok((l, space.equal_length_partition(set, l)?)))
        .collect::<Result<_>>()?;
    let scales: Vec<Vec<f64>> = partitions
        .iter()
        .map(|(_, p)| p.cell_measures().iter().map(|m| m.sqrt()).collect())
        .collect();
    let count = partitions.len();
    let sums = parallelism.install(|| {
        fold_chunks(
            replicas,
            || vec![(0.0, 0.0, 0.0); count],
            |acc, r| {
                let mut rng = replica_rng(seed, r as u64);
                for (slot, sc) in acc.iter_mut().zip(&scales) {
                    let s: f64 = sc
                        .iter()
                        .map(|sd| {
                            let w = sd * rng.sample::<f64, _>(StandardNormal);
                            w * w
                        })
                        .sum();
                    let d2 = (sigma - s) * (sigma - s);
                    slot.0 += s;
                    slot.1 += d2;
                    slot.2 += d2 * d2;
                }
            },
            |acc, part| {
                for (a, b) in acc.iter_mut().zip(part) {
                    a.0 += b.0;
                    a.1 += b.1;
                    a.2 += b.2;
                }
            },
        )
    })?;
    Ok(QuadVarReport {
        set: set.to_string(),
        sigma,
        replicas,
        rows: quad_var_rows(replicas, &partitions, &sums),
    })
}

/// A `C^2` scalar function with its first two derivatives.
#[derive(Clone)]
pub struct C2Function {
    pub name: String,
    pub value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub d1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub d2: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for C2Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C2Function({})", self.name)
    }
}

impl C2Function {
    pub fn new<F, D1, D2>(name: &str, value: F, d1: D1, d2: D2) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            value: Arc::new(value),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
        }
    }

    pub fn identity() -> Self {
        Self::new("x", |x| x, |_| 1.0, |_| 0.0)
    }

    pub fn square() -> Self {
        Self::new("x^2", |x| x * x, |x| 2.0 * x, |_| 2.0)
    }

    pub fn cos() -> Self {
        Self::new("cos", f64::cos, |x| -x.sin(), |x| -x.cos())
    }

    /// Builtins by name: `x`, `x^2`, `cos`.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "x" | "identity" => Some(Self::identity()),
            "x^2" | "square" => Some(Self::square()),
            "cos" => Some(Self::cos()),
            _ => None,
        }
    }
}

/// Residual statistics of the discretized Ito formula at one depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItoFormulaReport {
    pub function: String,
    pub depth: u32,
    pub cells: usize,
    /// `sqrt(E[residual^2])`.
    pub residual_l2: f64,
    pub residual_mean: f64,
    /// Mean of `f(W_A) - f(0)`.
    pub lhs_mean: f64,
    pub lhs_se: f64,
    /// Mean of the Ito term plus the trace term.
    pub rhs_mean: f64,
    pub rhs_se: f64,
}

/// Discretizes `f(W_A) - f(0) = int_A f'(W_x) dW_x + 1/2 int_A f''(W_x) dsigma`
/// on the `2^depth`-cell equal-measure partition of `A`. The Ito term uses
/// the left-point adapted rule and the trace term evaluates `f''` at the
/// running field of the preceding cells.
pub fn ito_formula_residual(sim: &FieldSimulator, f: &C2Function, set: &MeasurableSet, depth: u32) -> Result<ItoFormulaReport> {
    let partition = sim.space().dyadic_partition(set, depth)?;
    let d1 = f.d1.clone();
    let integrand = AdaptedProcess::running_fn(partition.cells().to_vec(), move |x| d1(x))?;
    let queries: Vec<Query> = partition
        .cells()
        .iter()
        .map(|c| sim.query_set(c))
        .collect::<Result<_>>()?;
    let sigmas = partition.cell_measures().to_vec();
    let p = sigmas.len();
    let rows: Vec<Result<(f64, f64)>> = sim.map(&queries, |view| {
        let mut prefix = Vec::with_capacity(p + 1);
        let mut ys = Vec::with_capacity(p);
        let ito = integrand.evaluate(view.values, &mut prefix, &mut ys)?;
        let trace: f64 = prefix[..p]
            .iter()
            .zip(&sigmas)
            .map(|(w, s)| 0.5 * (f.d2)(*w) * s)
            .sum();
        let lhs = (f.value)(prefix[p]) - (f.value)(0.0);
        Ok((lhs, ito + trace))
    })?;
    let mut lhs = Vec::with_capacity(rows.len());
    let mut rhs = Vec::with_capacity(rows.len());
    for row in rows {
        let (l, r) = row?;
        lhs.push(l);
        rhs.push(r);
    }
    let residual: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect();
    let squares: Vec<f64> = residual.iter().map(|x| x * x).collect();
    let (lhs_mean, lhs_se) = stats::mean_se(&lhs);
    let (rhs_mean, rhs_se) = stats::mean_se(&rhs);
    Ok(ItoFormulaReport {
        function: f.name.clone(),
        depth,
        cells: p,
        residual_l2: stats::mean(&squares).sqrt(),
        residual_mean: stats::mean(&residual),
        lhs_mean,
        lhs_se,
        rhs_mean,
        rhs_se,
    })
}
