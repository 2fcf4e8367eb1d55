//! Stationary-increment processes generated by a symmetric tempered
//! spectral measure: the variance function
//! `r(t) = 4 int sin^2(ut/2) / u^2 dsigma(u)`, the covariance
//! `(r(t) + r(s) - r(t - s)) / 2`, two path samplers, and Wiener integrals
//! taken on the spectral side.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_replicas, Parallelism};
use crate::field::{csv_err, FieldSimulator, Query};
use crate::measure::MeasureSpace;
use crate::quadrature::{integrate, QuadratureConfig};
use crate::rng::{derive_seed, replica_rng};
use crate::set::MeasurableSet;
use crate::stats;

/// Relative change at which truncation sweeps stop.
pub const SWEEP_TOL: f64 = 1e-8;
/// Largest truncation of a sweep.
pub const SWEEP_CAP: f64 = (1u64 << 20) as f64;

/// A measure on the spectral axis checked for symmetry and temperedness.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    space: MeasureSpace,
    symmetry_defect: f64,
    order: u32,
}

impl SpectralMeasure {
    /// Compares the density mass of `[a,b)` and `[-b,-a)` on a probe grid,
    /// pairs every atom with its mirror image, and finds the smallest
    /// temperedness order `p <= 4`.
    pub fn new(space: MeasureSpace) -> Result<Self> {
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for &a in &[0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            for &w in &[0.25, 1.0, 3.0] {
                let right = space.integrate_density(|_| 1.0, a, a + w)?;
                let left = space.integrate_density(|_| 1.0, -a - w, -a)?;
                defect = defect.max((right - left).abs());
                scale = scale.max(right.abs());
            }
        }
        // atoms must come in mirrored pairs of equal mass
        for atom in space.atoms() {
            let mirrored: f64 = space
                .atoms()
                .iter()
                .filter(|b| b.location == -atom.location)
                .map(|b| b.mass)
                .sum();
            let own: f64 = space.atoms().iter().filter(|b| b.location == atom.location).map(|b| b.mass).sum();
            defect = defect.max((own - mirrored).abs());
            scale = scale.max(own);
        }
        if defect > 1e-9 * scale.max(1.0) {
            return Err(Error::InvalidInput(format!("spectral measure is not symmetric (defect {defect:e})")));
        }
        let mut order = None;
        for p in 1..=4 {
            if space.temperedness_limit(p).is_ok() {
                order = Some(p);
                break;
            }
        }
        let order = order.ok_or_else(|| Error::Divergent("measure is not tempered with p <= 4".into()))?;
        Ok(Self {
            space,
            symmetry_defect: defect,
            order,
        })
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn symmetry_defect(&self) -> f64 {
        self.symmetry_defect
    }

    /// Smallest `p` with `int dsigma / (1 + u^2)^p < inf`.
    pub fn order(&self) -> u32 {
        self.order
    }
}

/// `sin(x) / x` with its Taylor series near zero.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `4 sin^2(ut/2) / u^2`, equal to `t^2` at `u = 0`.
pub fn increment_kernel(u: f64, t: f64) -> f64 {
    let s = t * sinc(0.5 * u * t);
    s * s
}

/// One evaluation of `r` with its sweep metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RValue {
    pub t: f64,
    pub value: f64,
    pub truncation: f64,
    pub relative_change: f64,
    pub converged: bool,
}

/// Density part of `r(t)` over `|u| > l`, except for the oscillatory
/// remainder: `2 int m(u) / u^2` plus the leading integration-by-parts term
/// of `-2 int cos(ut) m(u) / u^2`.
fn density_tail(space: &MeasureSpace, t: f64, l: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let d = space.density();
    let flat = integrate(|v: f64| 2.0 * (d.eval(1.0 / v) + d.eval(-1.0 / v)), 0.0, 1.0 / l, cfg)?;
    if !flat.converged || !flat.value.is_finite() {
        return Err(Error::Divergent(format!(
            "int dsigma / u^2 does not converge beyond |u| = {l}; the measure is not a spectral measure"
        )));
    }
    let osc = if t == 0.0 {
        0.0
    } else {
        2.0 * (l * t).sin() / t * (d.eval(l) + d.eval(-l)) / (l * l)
    };
    Ok(flat.value + osc)
}

/// `int_{a <= |u| < b} 4 sin^2(ut/2)/u^2 m(u) du` on half-period panels.
fn density_shell(space: &MeasureSpace, t: f64, a: f64, b: f64) -> Result<f64> {
    let width = if t == 0.0 { b - a } else { (std::f64::consts::PI / t.abs()).min(b - a) };
    let panels = ((b - a) / width).ceil().max(1.0) as usize;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + (b - a) * k as f64 / panels as f64;
        let hi = if k + 1 == panels { b } else { a + (b - a) * (k + 1) as f64 / panels as f64 };
        total += space.integrate_density(|u| increment_kernel(u, t), lo, hi)?;
        total += space.integrate_density(|u| increment_kernel(u, t), -hi, -lo)?;
    }
    Ok(total)
}

/// `r(t) = 4 int sin^2(ut/2) / u^2 dsigma(u)` with a doubling truncation
/// sweep of the density part and exact atom contributions.
pub fn variance_r_detailed(spec: &SpectralMeasure, t: f64) -> Result<RValue> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite, got {t}")));
    }
    let t = t.abs();
    if t == 0.0 {
        return Ok(RValue {
            t,
            value: 0.0,
            truncation: 0.0,
            relative_change: 0.0,
            converged: true,
        });
    }
    let space = spec.space();
    let cfg = *space.quadrature();
    let atoms: f64 = space.atoms().iter().map(|a| a.mass * increment_kernel(a.location, t)).sum();
    let mut l = (16.0 * std::f64::consts::PI / t).max(4.0);
    let mut core = density_shell(space, t, 0.0, l)?;
    let mut total = core + density_tail(space, t, l, &cfg)?;
    let mut change = f64::INFINITY;
    while l < SWEEP_CAP {
        let next = 2.0 * l;
        core += density_shell(space, t, l, next)?;
        let updated = core + density_tail(space, t, next, &cfg)?;
        change = (updated - total).abs() / (updated.abs() + atoms.abs()).max(f64::MIN_POSITIVE);
        total = updated;
        l = next;
        if change < SWEEP_TOL || updated == 0.0 {
            return Ok(RValue {
                t,
                value: total + atoms,
                truncation: l,
                relative_change: change,
                converged: true,
            });
        }
    }
    if change > 1e-6 {
        return Err(Error::Quadrature(format!(
            "r({t}) truncation sweep stalled at relative change {change:e}"
        )));
    }
    Ok(RValue {
        t,
        value: total + atoms,
        truncation: l,
        relative_change: change,
        converged: false,
    })
}

/// `r(t)`; even in `t`, `r(0) = 0`.
pub fn variance_r(spec: &SpectralMeasure, t: f64) -> Result<f64> {
    Ok(variance_r_detailed(spec, t)?.value.max(0.0))
}

/// `(r(t) + r(s) - r(t - s)) / 2`.
pub fn covariance(spec: &SpectralMeasure, t: f64, s: f64) -> Result<f64> {
    Ok(0.5 * (variance_r(spec, t)? + variance_r(spec, s)? - variance_r(spec, t - s)?))
}

/// Memoized `r` for one spectral measure.
#[derive(Debug)]
pub struct VarianceFunction {
    spec: SpectralMeasure,
    cache: RwLock<BTreeMap<u64, RValue>>,
}

impl VarianceFunction {
    pub fn new(spec: SpectralMeasure) -> Self {
        Self {
            spec,
            cache: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn spec(&self) -> &SpectralMeasure {
        &self.spec
    }

    pub fn detailed(&self, t: f64) -> Result<RValue> {
        let key = t.abs().to_bits();
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = variance_r_detailed(&self.spec, t)?;
        self.cache.write().expect("cache lock").insert(key, v);
        Ok(v)
    }

    pub fn r(&self, t: f64) -> Result<f64> {
        Ok(self.detailed(t)?.value.max(0.0))
    }

    pub fn covariance(&self, t: f64, s: f64) -> Result<f64> {
        Ok(0.5 * (self.r(t)? + self.r(s)? - self.r(t - s)?))
    }

    /// `[cov(t_i, t_j)]`.
    pub fn covariance_matrix(&self, times: &[f64]) -> Result<DMatrix<f64>> {
        let n = times.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let c = self.covariance(times[i], times[j])?;
                m[(i, j)] = c;
                m[(j, i)] = c;
            }
        }
        Ok(m)
    }

    /// Cached evaluations sorted by `t`.
    pub fn table(&self) -> Vec<RValue> {
        self.cache.read().expect("cache lock").values().copied().collect()
    }
}

/// Smallest eigenvalue of the covariance matrix on `times`.
pub fn covariance_min_eigenvalue(vf: &VarianceFunction, times: &[f64]) -> Result<f64> {
    let m = vf.covariance_matrix(times)?;
    Ok(SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// How a path ensemble was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    /// Independent Gaussian increments with variance `r(t_k - t_{k-1})`.
    KolmogorovMarkov,
    /// Joint Gaussian law with the stationary-increment covariance.
    CovarianceCholesky,
}

/// Sampled paths on `0 = t_0 < t_1 < ... < t_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    grid: Vec<f64>,
    paths: Vec<Vec<f64>>,
    construction: Construction,
}

impl PathEnsemble {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn paths(&self) -> &[Vec<f64>] {
        &self.paths
    }

    pub fn path(&self, replica: usize) -> &[f64] {
        &self.paths[replica]
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn replicas(&self) -> usize {
        self.paths.len()
    }

    /// Values at grid index `k` across replicas.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[k]).collect()
    }

    /// Sample `E[X_{t_i} X_{t_j}]` for the nonzero grid points.
    pub fn empirical_covariance(&self) -> DMatrix<f64> {
        let n = self.grid.len() - 1;
        let r = self.replicas().max(1) as f64;
        let mut m = DMatrix::zeros(n, n);
        for p in &self.paths {
            for i in 0..n {
                for j in 0..=i {
                    m[(i, j)] += p[i + 1] * p[j + 1];
                }
            }
        }
        for i in 0..n {
            for j in 0..=i {
                let v = m[(i, j)] / r;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Sample `E|X_{t_j} - X_{t_i}|^2` for grid indices `i`, `j`.
    pub fn increment_second_moment(&self, i: usize, j: usize) -> f64 {
        let d: Vec<f64> = self.paths.iter().map(|p| (p[j] - p[i]).powi(2)).collect();
        stats::mean(&d)
    }

    /// CSV `{t, s, empirical, exact}` over the nonzero grid points.
    pub fn write_covariance_csv<W: Write>(&self, vf: &VarianceFunction, out: W) -> Result<()> {
        let emp = self.empirical_covariance();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "s", "empirical", "exact"]).map_err(csv_err)?;
        let ts = &self.grid[1..];
        for (i, t) in ts.iter().enumerate() {
            for (j, s) in ts.iter().enumerate() {
                w.write_record([
                    format!("{t}"),
                    format!("{s}"),
                    format!("{:e}", emp[(i, j)]),
                    format!("{:e}", vf.covariance(*t, *s)?),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Validates a time grid and pins `t_0 = 0` in front of it.
pub fn normalize_grid(times: &[f64]) -> Result<Vec<f64>> {
    let mut grid = vec![0.0];
    for &t in times {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidInput(format!("grid times must be finite and >= 0, got {t}")));
        }
        if t == 0.0 && grid.len() == 1 {
            continue;
        }
        if t <= *grid.last().expect("non-empty") {
            return Err(Error::InvalidInput("grid must be strictly increasing".into()));
        }
        grid.push(t);
    }
    if grid.len() < 2 {
        return Err(Error::InvalidInput("grid needs a positive time".into()));
    }
    Ok(grid)
}

/// Paths with independent increments `X_{t_k} - X_{t_{k-1}} ~ N(0, r(t_k - t_{k-1}))`.
pub fn sample_paths_kolmogorov(
    vf: &VarianceFunction,
    times: &[f64],
    replicas: usize,
    seed: u64,
    parallelism: Parallelism,
) -> Result<PathEnsemble> {
    let grid = normalize_grid(times)?;
    let mut sd = Vec::with_capacity(grid.len() - 1);
    for w in grid.windows(2) {
        let dt = w[1] - w[0];
        let r = vf.r(dt)?;
        if r <= 0.0 {
            return Err(Error::DegenerateStep { dt });
        }
        sd.push(r.sqrt());
    }
    let paths = parallelism.install(|| {
        map_replicas(replicas, |rep| {
            let mut rng = replica_rng(seed, rep as u64);
            let mut path = Vec::with_capacity(sd.len() + 1);
            let mut x = 0.0;
            path.push(x);
            for s in &sd {
                x += s * rng.sample::<f64, _>(StandardNormal);
                path.push(x);
            }
            path
        })
    })?;
    Ok(PathEnsemble {
        grid,
        paths,
        construction: Construction::KolmogorovMarkov,
    })
}

/// Lower-triangular factor of a covariance matrix, with a diagonal shift of
/// `1e-12 * trace` when the plain factorization fails.
pub fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = m.clone().cholesky() {
        return Ok(c.l());
    }
    let eps = 1e-12 * m.trace().abs().max(f64::MIN_POSITIVE);
    let shifted = m + DMatrix::identity(m.nrows(), m.ncols()) * eps;
    shifted
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Spectral(format!("covariance matrix is not positive semidefinite within {eps:e}")))
}

/// Paths drawn from the joint Gaussian law with covariance
/// `(r(t) + r(s) - r(t - s)) / 2`.
pub fn sample_paths_covariance(
    vf: &VarianceFunction,
    times: &[f64],
    replicas: usize,
    seed: u64,
    parallelism: Parallelism,
) -> Result<PathEnsemble> {
    let grid = normalize_grid(times)?;
    let l = psd_factor(&vf.covariance_matrix(&grid[1..])?)?;
    let n = grid.len() - 1;
    let paths = parallelism.install(|| {
        map_replicas(replicas, |rep| {
            let mut rng = replica_rng(seed, rep as u64);
            let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let mut path = Vec::with_capacity(n + 1);
            path.push(0.0);
            for i in 0..n {
                path.push((0..=i).map(|j| l[(i, j)] * z[j]).sum());
            }
            path
        })
    })?;
    Ok(PathEnsemble {
        grid,
        paths,
        construction: Construction::CovarianceCholesky,
    })
}

type HatFn = dyn Fn(f64) -> Complex64 + Send + Sync;

/// A real test function described by its Fourier transform
/// `phi^(u) = int phi(x) e^{iux} dx`.
#[derive(Clone)]
pub struct FourierTest {
    label: String,
    hat: Arc<HatFn>,
    support: Option<(f64, f64)>,
    indicator: Option<f64>,
}

impl std::fmt::Debug for FourierTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FourierTest({})", self.label)
    }
}

impl FourierTest {
    /// `phi^` given in closed form and vanishing outside `support`.
    pub fn new<F>(label: &str, hat: F, support: (f64, f64)) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            label: label.to_string(),
            hat: Arc::new(hat),
            support: Some(support),
            indicator: None,
        }
    }

    /// `phi = chi_[0,t]`, `phi^(u) = (e^{iut} - 1) / (iu) = e^{iut/2} t sinc(ut/2)`.
    pub fn indicator(t: f64) -> Self {
        Self {
            label: format!("chi[0,{t}]"),
            hat: Arc::new(move |u| Complex64::from_polar(1.0, 0.5 * u * t) * (t * sinc(0.5 * u * t))),
            support: None,
            indicator: Some(t),
        }
    }

    /// `phi^ = chi_[a,b]` on the spectral axis.
    pub fn spectral_window(a: f64, b: f64) -> Self {
        Self::new(
            &format!("window[{a},{b}]"),
            move |u| if a <= u && u <= b { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) },
            (a, b),
        )
    }

    pub fn zero() -> Self {
        Self::new("0", |_| Complex64::new(0.0, 0.0), (0.0, 0.0))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn hat(&self, u: f64) -> Complex64 {
        (self.hat)(u)
    }

    /// Real integrand on the spectral axis with
    /// `int g_phi g_psi dsigma = int Re(phi^ conj(psi^)) dsigma` for symmetric sigma.
    pub fn real_integrand(&self, u: f64) -> f64 {
        let s = std::f64::consts::SQRT_2;
        if u >= 0.0 {
            s * self.hat(u).re
        } else {
            s * self.hat(-u).im
        }
    }
}

/// `int Re(phi^ conj(psi^)) dsigma` over the whole axis.
pub fn spectral_inner(vf: &VarianceFunction, a: &FourierTest, b: &FourierTest) -> Result<f64> {
    if let (Some(t), Some(s)) = (a.indicator, b.indicator) {
        return vf.covariance(t, s);
    }
    let space = vf.spec().space();
    let f = |u: f64| (a.hat(u) * b.hat(u).conj()).re;
    let bounded = match (a.support, b.support) {
        (Some((a0, a1)), Some((b0, b1))) => Some((a0.max(b0), a1.min(b1))),
        (Some(s), None) | (None, Some(s)) => Some(s),
        (None, None) => None,
    };
    if let Some((lo, hi)) = bounded {
        if hi <= lo {
            return Ok(0.0);
        }
        // closed window: include an atom at the right end
        let set = MeasurableSet::interval(lo, hi)?;
        let right: f64 = space.atoms().iter().filter(|x| x.location == hi).map(|x| x.mass * f(hi)).sum();
        return Ok(space.integrate_over(f, &set)? + right);
    }
    Err(Error::InvalidInput(format!(
        "spectral norm of {} x {} needs an indicator transform or a bounded support",
        a.label, b.label
    )))
}

/// The spectral-side field restricted to `[-cutoff, cutoff)`.
#[derive(Debug)]
pub struct SpectralField {
    vf: Arc<VarianceFunction>,
    sim: FieldSimulator,
    complete: bool,
}

/// Per-test replica values of `X_phi` with the exact variances.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierIntegralSample {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// `int |phi^|^2 dsigma`.
    pub exact_variance: Vec<f64>,
    /// Variance carried by the truncated field alone.
    pub captured_variance: Vec<f64>,
}

impl FourierIntegralSample {
    /// Empirical `E[e^{i X_phi}]` next to `e^{-1/2 int |phi^|^2 dsigma}`.
    pub fn char_function(&self, k: usize) -> (Complex64, f64, f64) {
        let z: Vec<Complex64> = self.values[k].iter().map(|x| Complex64::from_polar(1.0, *x)).collect();
        let (m, se) = stats::complex_mean_se(&z);
        (m, se, (-0.5 * self.exact_variance[k]).exp())
    }
}

impl SpectralField {
    /// Haar field of depth `depth` on `[-cutoff, cutoff)`. With `complete`
    /// set, the part of each integrand not captured by the truncated field
    /// is added back as an independent Gaussian vector with the missing
    /// covariance.
    pub fn new(
        vf: Arc<VarianceFunction>,
        cutoff: f64,
        depth: u32,
        seed: u64,
        replicas: usize,
        complete: bool,
    ) -> Result<Self> {
        let space = vf.spec().space().clone();
        if let Some(a) = space.atoms().iter().find(|a| a.mass > 0.0) {
            return Err(Error::UnsupportedMeasure(format!(
                "spectral field needs an absolutely continuous measure (atom at {})",
                a.location
            )));
        }
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::InvalidInput(format!("cutoff must be positive, got {cutoff}")));
        }
        let domain = MeasurableSet::interval(-cutoff, cutoff)?;
        let sim = FieldSimulator::build(space, &domain, depth, seed, replicas)?;
        Ok(Self { vf, sim, complete })
    }

    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Self {
        self.sim = self.sim.with_parallelism(parallelism);
        self
    }

    pub fn simulator(&self) -> &FieldSimulator {
        &self.sim
    }

    /// `X_phi = int g_phi dW` for every test, jointly per replica.
    pub fn fourier_wiener_integral(&self, tests: &[FourierTest]) -> Result<FourierIntegralSample> {
        let n = tests.len();
        let queries: Vec<Query> = tests
            .iter()
            .map(|t| self.sim.query_fn(|u| t.real_integrand(u)))
            .collect::<Result<_>>()?;
        let mut gram = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let g = spectral_inner(&self.vf, &tests[i], &tests[j])?;
                gram[(i, j)] = g;
                gram[(j, i)] = g;
            }
        }
        let mut projected = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                projected[(i, j)] = queries[i]
                    .coefficients()
                    .iter()
                    .zip(queries[j].coefficients())
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
        let factor = if self.complete {
            Some(residual_factor(&(&gram - &projected)))
        } else {
            None
        };
        let residual_seed = derive_seed(self.sim.seed(), "spectral-residual");
        let rows = self.sim.map(&queries, |view| {
            let mut v = view.values.to_vec();
            if let Some(l) = &factor {
                let mut rng = replica_rng(residual_seed, view.index as u64);
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                for (i, x) in v.iter_mut().enumerate() {
                    *x += (0..n).map(|j| l[(i, j)] * z[j]).sum::<f64>();
                }
            }
            v
        })?;
        let mut values = vec![Vec::with_capacity(rows.len()); n];
        for row in rows {
            for (col, x) in values.iter_mut().zip(row) {
                col.push(x);
            }
        }
        Ok(FourierIntegralSample {
            labels: tests.iter().map(|t| t.label.clone()).collect(),
            values,
            exact_variance: (0..n).map(|i| gram[(i, i)]).collect(),
            captured_variance: (0..n).map(|i| projected[(i, i)]).collect(),
        })
    }
}

/// `V sqrt(max(Lambda, 0))` for a symmetric matrix `V Lambda V^T`.
fn residual_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut v = eig.eigenvectors;
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        v.column_mut(k).scale_mut(s);
    }
    v
}

/// `u -> phi^(u) sqrt(m(u))` for an absolutely continuous spectral measure.
#[derive(Clone)]
pub struct SpectralFactor {
    space: MeasureSpace,
    test: FourierTest,
}

impl std::fmt::Debug for SpectralFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SpectralFactor({})", self.test.label)
    }
}

impl SpectralFactor {
    pub fn eval(&self, u: f64) -> Complex64 {
        self.test.hat(u) * self.space.density().eval(u).max(0.0).sqrt()
    }

    /// `int_a^b |phi^ sqrt(m)|^2 du` by plain quadrature.
    pub fn norm_sq(&self, a: f64, b: f64) -> Result<f64> {
        let lebesgue = MeasureSpace::lebesgue().with_quadrature(*self.space.quadrature());
        let mut points = vec![a, b];
        if a < 0.0 && b > 0.0 {
            points.insert(1, 0.0);
        }
        let mut total = 0.0;
        for w in points.windows(2) {
            total += lebesgue.integrate_density(|u| self.eval(u).norm_sqr(), w[0], w[1])?;
        }
        Ok(total)
    }

    /// `int_a^b |phi^|^2 dsigma` on the measure side.
    pub fn measure_norm_sq(&self, a: f64, b: f64) -> Result<f64> {
        self.space.integrate_over(|u| self.test.hat(u).norm_sqr(), &MeasurableSet::interval(a, b)?)
    }
}

/// The factorization `phi^ -> phi^ sqrt(m)` carrying `L^2(sigma)` into `L^2(du)`.
pub fn spectral_factor_map(spec: &SpectralMeasure, test: &FourierTest) -> Result<SpectralFactor> {
    if let Some(a) = spec.space().atoms().iter().find(|a| a.mass > 0.0) {
        return Err(Error::UnsupportedMeasure(format!(
            "spectral factor needs a density; atom of mass {} at {}",
            a.mass, a.location
        )));
    }
    Ok(SpectralFactor {
        space: spec.space().clone(),
        test: test.clone(),
    })
}
