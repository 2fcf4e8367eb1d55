//! Kolmogorov (path) and Gelfand (distribution) realizations of a
//! stationary-increment process and the comparison of their cylinder
//! probabilities.
//!
//! Distributions are never materialized: the derivative `omega'` of a path
//! is only observed through `<omega', phi> = -int omega phi' dx`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::quadrature::{fixed_legendre, gauss_legendre};
use crate::rng::derive_seed;
use crate::spectral::{sample_paths_kolmogorov, FourierTest, PathEnsemble, SpectralField, VarianceFunction};
use crate::stats;

fn interpolate(grid: &[f64], path: &[f64], t: f64) -> Result<f64> {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if !(t >= lo && t <= hi) {
        return Err(Error::Range {
            what: "time",
            value: t,
            lo,
            hi,
        });
    }
    let k = grid.partition_point(|&g| g <= t);
    if k == 0 {
        return Ok(path[0]);
    }
    let i = k - 1;
    if grid[i] == t || i + 1 == grid.len() {
        return Ok(path[i]);
    }
    let w = (t - grid[i]) / (grid[i + 1] - grid[i]);
    Ok(path[i] + w * (path[i + 1] - path[i]))
}

/// `omega(t)` for replica `replica`, linear between grid points.
pub fn kolm_process_value(ensemble: &PathEnsemble, replica: usize, t: f64) -> Result<f64> {
    if replica >= ensemble.replicas() {
        return Err(Error::InvalidInput(format!("no replica {replica}")));
    }
    interpolate(ensemble.grid(), ensemble.path(replica), t)
}

type RealFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A `C^1` test function with its derivative.
#[derive(Clone)]
pub struct SmoothTest {
    label: String,
    value: Arc<RealFn>,
    derivative: Arc<RealFn>,
    /// Closed interval outside which `phi' = 0`; empty when `lo >= hi`.
    support: (f64, f64),
    /// Points where `phi'` may have kinks.
    breaks: Vec<f64>,
}

impl std::fmt::Debug for SmoothTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SmoothTest({})", self.label)
    }
}

/// `3z^2 - 2z^3` on `[0, 1]`.
fn smoothstep(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    z * z * (3.0 - 2.0 * z)
}

fn smoothstep_d(z: f64) -> f64 {
    if (0.0..=1.0).contains(&z) {
        6.0 * z * (1.0 - z)
    } else {
        0.0
    }
}

impl SmoothTest {
    pub fn new<F, D>(label: &str, value: F, derivative: D, support: (f64, f64), breaks: Vec<f64>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.to_string(),
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            support,
            breaks,
        }
    }

    /// `chi_[0,t]` smoothed by cubic ramps: up on `[0, h]`, down on
    /// `[t - h/2, t + h/2]`.
    pub fn mollified_indicator(t: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && t.is_finite() && 1.5 * h <= t) {
            return Err(Error::InvalidInput(format!(
                "mollified indicator needs 0 < h <= 2t/3, got t = {t}, h = {h}"
            )));
        }
        let down = t - 0.5 * h;
        Ok(Self::new(
            &format!("chi[0,{t}]*h{h}"),
            move |x| smoothstep(x / h) - smoothstep((x - down) / h),
            move |x| (smoothstep_d(x / h) - smoothstep_d((x - down) / h)) / h,
            (0.0, t + 0.5 * h),
            vec![0.0, h, down, t + 0.5 * h],
        ))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(&format!("const {c}"), move |_| c, |_| 0.0, (0.0, 0.0), Vec::new())
    }

    /// `a phi + b psi`.
    pub fn linear_combination(a: f64, phi: &SmoothTest, b: f64, psi: &SmoothTest) -> Self {
        let (p, q) = (phi.clone(), psi.clone());
        let (pd, qd) = (phi.clone(), psi.clone());
        let support = match (phi.support_is_empty(), psi.support_is_empty()) {
            (true, _) => psi.support,
            (_, true) => phi.support,
            _ => (phi.support.0.min(psi.support.0), phi.support.1.max(psi.support.1)),
        };
        let mut breaks = phi.breaks.clone();
        breaks.extend(&psi.breaks);
        Self::new(
            &format!("{a}*{} + {b}*{}", phi.label, psi.label),
            move |x| a * (p.value)(x) + b * (q.value)(x),
            move |x| a * (pd.derivative)(x) + b * (qd.derivative)(x),
            support,
            breaks,
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    fn support_is_empty(&self) -> bool {
        self.support.0 >= self.support.1
    }
}

/// One sampled path with linear interpolation between grid points.
#[derive(Debug, Clone, Copy)]
pub struct PairingEvaluator<'a> {
    grid: &'a [f64],
    path: &'a [f64],
}

impl<'a> PairingEvaluator<'a> {
    pub fn new(grid: &'a [f64], path: &'a [f64]) -> Result<Self> {
        if grid.len() != path.len() || grid.len() < 2 {
            return Err(Error::InvalidInput("path and grid lengths differ or grid too short".into()));
        }
        Ok(Self { grid, path })
    }

    pub fn from_ensemble(ensemble: &'a PathEnsemble, replica: usize) -> Result<Self> {
        Self::new(ensemble.grid(), ensemble.path(replica))
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        interpolate(self.grid, self.path, t)
    }

    /// `max omega - min omega` over `[a, b]`.
    pub fn oscillation(&self, a: f64, b: f64) -> Result<f64> {
        let mut lo = self.value(a)?;
        let mut hi = lo;
        let end = self.value(b)?;
        lo = lo.min(end);
        hi = hi.max(end);
        for (g, w) in self.grid.iter().zip(self.path) {
            if *g > a && *g < b {
                lo = lo.min(*w);
                hi = hi.max(*w);
            }
        }
        Ok(hi - lo)
    }
}

/// `<omega', phi> = -int omega phi' dx`, Gauss-Legendre on every grid cell
/// split at the kinks of `phi'`.
pub fn gelfand_pairing(evaluator: &PairingEvaluator<'_>, phi: &SmoothTest) -> Result<f64> {
    if phi.support_is_empty() {
        return Ok(0.0);
    }
    let (grid, path) = (evaluator.grid, evaluator.path);
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let (a, b) = phi.support;
    if a < lo || b > hi {
        return Err(Error::Range {
            what: "test function support end",
            value: if a < lo { a } else { b },
            lo,
            hi,
        });
    }
    let rule = gauss_legendre(4);
    let mut total = 0.0;
    for i in 0..grid.len() - 1 {
        let (x0, x1) = (grid[i], grid[i + 1]);
        if x1 <= a || x0 >= b {
            continue;
        }
        let (w0, w1) = (path[i], path[i + 1]);
        let omega = |x: f64| w0 + (w1 - w0) * (x - x0) / (x1 - x0);
        let (c0, c1) = (x0.max(a), x1.min(b));
        let mut cuts = vec![c0, c1];
        cuts.extend(phi.breaks.iter().copied().filter(|&p| p > c0 && p < c1));
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            total += fixed_legendre(|x| omega(x) * phi.derivative(x), w[0], w[1], &rule);
        }
    }
    Ok(-total)
}

/// Bound on `|<omega', phi_h> - omega(t)|` for the mollified indicator: the
/// oscillation of the path over both ramps.
pub fn pairing_tolerance(evaluator: &PairingEvaluator<'_>, t: f64, h: f64) -> Result<f64> {
    let scale = evaluator.path.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    Ok(evaluator.oscillation(0.0, h)? + evaluator.oscillation(t - 0.5 * h, t + 0.5 * h)? + 1e-12 * scale.max(1.0))
}

/// Replica-wise comparison of the mollified pairing with `omega(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairingCheck {
    pub t: f64,
    pub h: f64,
    pub replicas: usize,
    pub within_tolerance: f64,
    pub mean_abs_error: f64,
    pub mean_tolerance: f64,
}

pub fn pairing_identity_check(ensemble: &PathEnsemble, t: f64, h: f64) -> Result<PairingCheck> {
    let phi = SmoothTest::mollified_indicator(t, h)?;
    let mut inside = 0usize;
    let mut err = Vec::with_capacity(ensemble.replicas());
    let mut tol = Vec::with_capacity(ensemble.replicas());
    for r in 0..ensemble.replicas() {
        let ev = PairingEvaluator::from_ensemble(ensemble, r)?;
        let e = (gelfand_pairing(&ev, &phi)? - kolm_process_value(ensemble, r, t)?).abs();
        let bound = pairing_tolerance(&ev, t, h)?;
        if e <= bound {
            inside += 1;
        }
        err.push(e);
        tol.push(bound);
    }
    Ok(PairingCheck {
        t,
        h,
        replicas: ensemble.replicas(),
        within_tolerance: inside as f64 / ensemble.replicas().max(1) as f64,
        mean_abs_error: stats::mean(&err),
        mean_tolerance: stats::mean(&tol),
    })
}

/// One coordinate of a cylinder set.
#[derive(Debug, Clone)]
pub enum CylinderTest {
    /// `<omega', chi_[0,t]> = omega(t)`.
    Indicator(f64),
    /// A smooth test function, paired on paths and integrated spectrally.
    Smooth { pairing: SmoothTest, fourier: FourierTest },
}

impl CylinderTest {
    fn label(&self) -> String {
        match self {
            CylinderTest::Indicator(t) => format!("X({t})"),
            CylinderTest::Smooth { pairing, .. } => pairing.label.clone(),
        }
    }

    fn fourier(&self) -> FourierTest {
        match self {
            CylinderTest::Indicator(t) => FourierTest::indicator(*t),
            CylinderTest::Smooth { fourier, .. } => fourier.clone(),
        }
    }
}

/// `{omega : (<omega', phi_1>, ..., <omega', phi_n>) in (a_1,b_1] x ... x (a_n,b_n]}`.
#[derive(Debug, Clone)]
pub struct CylinderSpec {
    pub label: String,
    pub tests: Vec<CylinderTest>,
    pub region: Vec<(f64, f64)>,
}

impl CylinderSpec {
    pub fn new(label: &str, tests: Vec<CylinderTest>, region: Vec<(f64, f64)>) -> Result<Self> {
        if tests.is_empty() || tests.len() != region.len() {
            return Err(Error::InvalidInput("cylinder needs one interval per test function".into()));
        }
        for &(a, b) in &region {
            if a.is_nan() || b.is_nan() || a >= b {
                return Err(Error::InvalidInput(format!("bad cylinder interval ({a}, {b}]")));
            }
        }
        for t in &tests {
            if let CylinderTest::Indicator(t) = t {
                if !(t.is_finite() && *t > 0.0) {
                    return Err(Error::InvalidInput(format!("indicator time must be positive, got {t}")));
                }
            }
        }
        Ok(Self {
            label: label.to_string(),
            tests,
            region,
        })
    }

    /// Cylinder over indicator times.
    pub fn indicators(label: &str, times: &[f64], region: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(label, times.iter().map(|&t| CylinderTest::Indicator(t)).collect(), region)
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.iter().zip(&self.region).all(|(v, (a, b))| v > a && v <= b)
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .tests
            .iter()
            .zip(&self.region)
            .map(|(t, (a, b))| format!("{} in ({a}, {b}]", t.label()))
            .collect();
        format!("{}: {}", self.label, parts.join(", "))
    }
}

/// Five cylinders over indicator times with intervals scaled by `sqrt(r(t))`.
pub fn standard_cylinders(vf: &VarianceFunction) -> Result<Vec<CylinderSpec>> {
    let sd = |t: f64| vf.r(t).map(f64::sqrt);
    let inf = f64::INFINITY;
    Ok(vec![
        CylinderSpec::indicators("central-95", &[1.0], vec![(-1.96 * sd(1.0)?, 1.96 * sd(1.0)?)])?,
        CylinderSpec::indicators("positive-half", &[0.5], vec![(0.0, inf)])?,
        CylinderSpec::indicators(
            "rectangle-2",
            &[0.5, 1.0],
            vec![(-sd(0.5)?, sd(0.5)?), (-inf, 0.3 * sd(1.0)?)],
        )?,
        CylinderSpec::indicators(
            "box-3",
            &[0.25, 0.75, 1.5],
            vec![(0.0, inf), (-0.5 * sd(0.75)?, 1.5 * sd(0.75)?), (-inf, sd(1.5)?)],
        )?,
        CylinderSpec::indicators("upper-quadrant", &[1.0, 2.0], vec![(0.5 * sd(1.0)?, inf), (0.5 * sd(2.0)?, inf)])?,
    ])
}

/// Settings of [`pushforward_test`].
#[derive(Debug, Clone, PartialEq)]
pub struct PushforwardOptions {
    pub replicas: usize,
    pub seed: u64,
    /// Half width of the spectral window of the Gelfand field.
    pub cutoff: f64,
    /// Haar depth of the Gelfand field.
    pub depth: u32,
    /// Path grid step when smooth tests are present.
    pub grid_step: f64,
    /// Run even when the two path laws differ.
    pub allow_disagreement: bool,
    pub parallelism: Parallelism,
}

impl Default for PushforwardOptions {
    fn default() -> Self {
        Self {
            replicas: 100_000,
            seed: 0,
            cutoff: 32.0,
            depth: 10,
            grid_step: 1.0 / 256.0,
            allow_disagreement: false,
            parallelism: Parallelism::default(),
        }
    }
}

/// Both estimates of one cylinder probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushforwardReport {
    pub cylinder: String,
    pub p_kolm: f64,
    pub p_gelfand: f64,
    pub z: Option<f64>,
    pub replicas: usize,
    pub seed: u64,
    /// False when both frequencies are 0 or both are 1.
    pub informative: bool,
    /// Largest gap between the independent-increment covariance and the
    /// stationary-increment covariance on the cylinder times.
    pub sampler_gap: f64,
    pub pass: bool,
}

/// `max |sum_{k <= min(i,j)} r(t_k - t_{k-1}) - cov(t_i, t_j)|` on `times`.
pub fn sampler_gap(vf: &VarianceFunction, times: &[f64]) -> Result<f64> {
    let mut ts: Vec<f64> = times.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut markov = Vec::with_capacity(ts.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &t in &ts {
        acc += vf.r(t - prev)?;
        markov.push(acc);
        prev = t;
    }
    let mut gap: f64 = 0.0;
    for i in 0..ts.len() {
        for j in 0..=i {
            gap = gap.max((markov[j] - vf.covariance(ts[i], ts[j])?).abs());
        }
    }
    Ok(gap)
}

/// Estimates the probability of `cyl` from Kolmogorov paths and from the
/// spectrally realized Gelfand field, on independent streams.
pub fn pushforward_test(
    vf: Arc<VarianceFunction>,
    cyl: &CylinderSpec,
    opts: &PushforwardOptions,
) -> Result<PushforwardReport> {
    let mut times: Vec<f64> = Vec::new();
    let mut smooth_end: f64 = 0.0;
    for t in &cyl.tests {
        match t {
            CylinderTest::Indicator(t) => times.push(*t),
            CylinderTest::Smooth { pairing, .. } => smooth_end = smooth_end.max(pairing.support.1),
        }
    }
    let gap = sampler_gap(&vf, &times)?;
    let scale = times.iter().map(|t| vf.r(*t)).collect::<Result<Vec<_>>>()?.into_iter().fold(1.0, f64::max);
    if gap > 1e-6 * scale && !opts.allow_disagreement {
        return Err(Error::Spectral(format!(
            "independent-increment and stationary-increment laws differ by {gap:e} on {}; \
             the cylinder comparison is only certified where they agree",
            cyl.label
        )));
    }

    let mut grid = times.clone();
    if smooth_end > 0.0 {
        let end = smooth_end.max(times.iter().copied().fold(0.0, f64::max));
        let steps = (end / opts.grid_step).ceil() as usize;
        grid.extend((1..=steps).map(|k| k as f64 * opts.grid_step));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let paths = sample_paths_kolmogorov(
        &vf,
        &grid,
        opts.replicas,
        derive_seed(opts.seed, "kolmogorov"),
        opts.parallelism,
    )?;
    let mut hits_kolm = 0usize;
    let mut values = vec![0.0; cyl.tests.len()];
    for r in 0..paths.replicas() {
        let ev = PairingEvaluator::from_ensemble(&paths, r)?;
        for (v, t) in values.iter_mut().zip(&cyl.tests) {
            *v = match t {
                CylinderTest::Indicator(t) => ev.value(*t)?,
                CylinderTest::Smooth { pairing, .. } => gelfand_pairing(&ev, pairing)?,
            };
        }
        if cyl.contains(&values) {
            hits_kolm += 1;
        }
    }

    let field = SpectralField::new(
        vf.clone(),
        opts.cutoff,
        opts.depth,
        derive_seed(opts.seed, "gelfand"),
        opts.replicas,
        true,
    )?
    .with_parallelism(opts.parallelism);
    let tests: Vec<FourierTest> = cyl.tests.iter().map(CylinderTest::fourier).collect();
    let sample = field.fourier_wiener_integral(&tests)?;
    let hits_gel = (0..opts.replicas)
        .filter(|&r| {
            for (v, col) in values.iter_mut().zip(&sample.values) {
                *v = col[r];
            }
            cyl.contains(&values)
        })
        .count();

    let n = opts.replicas.max(1) as f64;
    let (p_kolm, p_gelfand) = (hits_kolm as f64 / n, hits_gel as f64 / n);
    let z = stats::two_proportion_z(p_kolm, opts.replicas, p_gelfand, opts.replicas);
    Ok(PushforwardReport {
        cylinder: cyl.describe(),
        p_kolm,
        p_gelfand,
        z,
        replicas: opts.replicas,
        seed: opts.seed,
        informative: z.is_some(),
        sampler_gap: gap,
        pass: z.is_none_or(|z| z.abs() <= 3.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Density, MeasureSpace};
    use crate::spectral::{sample_paths_covariance, SpectralMeasure};
    use approx::assert_abs_diff_eq;

    fn brownian() -> Arc<VarianceFunction> {
        Arc::new(VarianceFunction::new(SpectralMeasure::new(MeasureSpace::normalized_lebesgue()).unwrap()))
    }

    fn fine_grid(end: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|k| end * k as f64 / n as f64).collect()
    }

    #[test]
    fn interpolation_contract() {
        let vf = brownian();
        let e = sample_paths_kolmogorov(&vf, &[0.5, 1.0], 3, 1, Parallelism::default()).unwrap();
        for r in 0..3 {
            assert_eq!(kolm_process_value(&e, r, 0.0).unwrap(), 0.0);
            assert_eq!(kolm_process_value(&e, r, 0.5).unwrap(), e.path(r)[1]);
            let mid = kolm_process_value(&e, r, 0.75).unwrap();
            assert_abs_diff_eq!(mid, 0.5 * (e.path(r)[1] + e.path(r)[2]), epsilon = 1e-15);
        }
        assert!(matches!(kolm_process_value(&e, 0, 1.5), Err(Error::Range { .. })));
    }

    #[test]
    fn pairing_is_linear_and_kills_constants() {
        let vf = brownian();
        let e = sample_paths_kolmogorov(&vf, &fine_grid(2.0, 200), 5, 2, Parallelism::default()).unwrap();
        let a = SmoothTest::mollified_indicator(1.0, 0.1).unwrap();
        let b = SmoothTest::mollified_indicator(1.5, 0.2).unwrap();
        let c = SmoothTest::linear_combination(2.0, &a, -3.0, &b);
        for r in 0..5 {
            let ev = PairingEvaluator::from_ensemble(&e, r).unwrap();
            let lhs = gelfand_pairing(&ev, &c).unwrap();
            let rhs = 2.0 * gelfand_pairing(&ev, &a).unwrap() - 3.0 * gelfand_pairing(&ev, &b).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
            assert_eq!(gelfand_pairing(&ev, &SmoothTest::constant(4.0)).unwrap(), 0.0);
        }
    }

    #[test]
    fn pairing_on_linear_path_is_exact() {
        // omega(x) = x gives <omega', phi> = int phi dx = t - h/2
        let grid = fine_grid(2.0, 40);
        let mut g = vec![0.0];
        g.extend(&grid);
        let path = g.clone();
        let ev = PairingEvaluator::new(&g, &path).unwrap();
        let phi = SmoothTest::mollified_indicator(1.0, 0.2).unwrap();
        let expected = 1.0 - 0.5 * 0.2;
        assert_abs_diff_eq!(gelfand_pairing(&ev, &phi).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn support_outside_grid_is_rejected() {
        let g = vec![0.0, 0.5, 1.0];
        let p = vec![0.0, 0.1, 0.2];
        let ev = PairingEvaluator::new(&g, &p).unwrap();
        let phi = SmoothTest::mollified_indicator(1.0, 0.2).unwrap();
        assert!(matches!(gelfand_pairing(&ev, &phi), Err(Error::Range { .. })));
    }

    #[test]
    fn mollified_pairing_tracks_path_value() {
        let vf = brownian();
        let e = sample_paths_kolmogorov(&vf, &fine_grid(2.0, 512), 1000, 3, Parallelism::default()).unwrap();
        let coarse = pairing_identity_check(&e, 1.0, 16.0 / 256.0).unwrap();
        let fine = pairing_identity_check(&e, 1.0, 4.0 / 256.0).unwrap();
        assert!(coarse.within_tolerance >= 0.95 && fine.within_tolerance >= 0.95);
        assert!(fine.mean_tolerance < coarse.mean_tolerance);
        assert!(fine.mean_abs_error < coarse.mean_abs_error);
    }

    #[test]
    fn sampler_gap_vanishes_only_for_additive_r() {
        let vf = brownian();
        assert!(sampler_gap(&vf, &[0.5, 1.0, 2.0]).unwrap() < 1e-6);
        let cauchy = VarianceFunction::new(
            SpectralMeasure::new(MeasureSpace::with_density(Density::CauchyLike { p: 1.0, scale: 1.0 })).unwrap(),
        );
        assert!(sampler_gap(&cauchy, &[0.5, 1.0, 2.0]).unwrap() > 1e-3);
    }

    #[test]
    fn disagreement_regime_is_refused() {
        let cauchy = Arc::new(VarianceFunction::new(
            SpectralMeasure::new(MeasureSpace::with_density(Density::CauchyLike { p: 1.0, scale: 1.0 })).unwrap(),
        ));
        let cyl = CylinderSpec::indicators("two", &[0.5, 1.0], vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let opts = PushforwardOptions {
            replicas: 100,
            ..Default::default()
        };
        assert!(matches!(pushforward_test(cauchy, &cyl, &opts), Err(Error::Spectral(_))));
    }

    #[test]
    fn full_space_is_uninformative() {
        let inf = f64::INFINITY;
        let cyl = CylinderSpec::indicators("all", &[1.0], vec![(-inf, inf)]).unwrap();
        let opts = PushforwardOptions {
            replicas: 500,
            depth: 6,
            ..Default::default()
        };
        let r = pushforward_test(brownian(), &cyl, &opts).unwrap();
        assert_eq!((r.p_kolm, r.p_gelfand), (1.0, 1.0));
        assert!(!r.informative && r.pass);
    }

    #[test]
    fn central_interval_near_95_percent() {
        let vf = brownian();
        let cyl = &standard_cylinders(&vf).unwrap()[0];
        let opts = PushforwardOptions {
            replicas: 20_000,
            depth: 8,
            seed: 4,
            ..Default::default()
        };
        let r = pushforward_test(vf, cyl, &opts).unwrap();
        let se = (0.95f64 * 0.05 / 20_000.0).sqrt();
        assert!((r.p_kolm - 0.95).abs() < 4.0 * se && (r.p_gelfand - 0.95).abs() < 4.0 * se, "{r:?}");
        assert!(r.pass);
    }

    #[test]
    fn cholesky_and_markov_agree_for_brownian() {
        let vf = brownian();
        let grid = [0.5, 1.0, 2.0];
        let a = sample_paths_kolmogorov(&vf, &grid, 20_000, 1, Parallelism::default()).unwrap();
        let b = sample_paths_covariance(&vf, &grid, 20_000, 2, Parallelism::default()).unwrap();
        let (ca, cb) = (a.empirical_covariance(), b.empirical_covariance());
        let bound = 5.0 * 2.0 * (2.0f64 / 20_000.0).sqrt();
        assert!((ca - cb).abs().max() < bound);
    }
}
