//! Batch experiment driver: dispatches a validated config to the library and
//! writes CSV tables plus a JSON pass/fail summary.
//!
//! Reports contain no timestamps or worker counts, so the same config and
//! seed always give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::calculus::{
    ito_formula_residual, ito_integral, quad_variation_equal_length, quad_variation_experiment, AdaptedProcess,
    C2Function,
};
use crate::config::{
    set_from_config, CylinderParams, EquivalenceParams, ExperimentConfig, ExperimentKind, FieldMomentsParams,
    FourierParams, HermiteParams, ItoParams, Params, QuadvarParams, SamplerChoice, ShiftParams, SpectralParams,
};
use crate::equivalence::{pairing_identity_check, pushforward_test, standard_cylinders, CylinderSpec, PushforwardOptions};
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::field::FieldSimulator;
use crate::hermite::{
    cameron_martin_shift_check, generalized_fourier, mehler_moment, psi_covariance_check, rkhs_kernel_eval,
    write_identity_csv, CoordinateFunctional, Functional, HermiteSeries, IdentityRow, RkhsKernel,
};
use crate::measure::MeasureSpace;
use crate::rng::{derive_seed, replica_rng};
use crate::set::MeasurableSet;
use crate::spectral::{
    covariance_min_eigenvalue, sample_paths_covariance, sample_paths_kolmogorov, PathEnsemble, SpectralMeasure,
    VarianceFunction,
};
use crate::stats;

/// Process exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// One assertion of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// `|observed - expected| <= tolerance`.
    pub fn close(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            expected,
            tolerance,
            pass: (observed - expected).abs() <= tolerance,
        }
    }

    /// `observed >= bound`.
    pub fn at_least(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            expected: bound,
            tolerance: 0.0,
            pass: observed >= bound,
        }
    }

    /// `observed <= bound`.
    pub fn at_most(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            expected: bound,
            tolerance: 0.0,
            pass: observed <= bound,
        }
    }
}

/// Contents of `<kind>-summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replicas: usize,
    pub measure: String,
    pub pass: bool,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Summary {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_ASSERTION
        }
    }
}

/// Exit code for a failed run.
pub fn error_exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

struct Reporter {
    dir: PathBuf,
    prefix: &'static str,
    files: Vec<String>,
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Reporter {
    fn new(dir: &Path, kind: ExperimentKind) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: kind.name(),
            files: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        })
    }

    fn write(&mut self, suffix: &str, bytes: &[u8]) -> Result<()> {
        let name = format!("{}-{suffix}", self.prefix);
        fs::write(self.dir.join(&name), bytes)?;
        self.files.push(name);
        Ok(())
    }

    /// Writes a CSV table built by `fill`.
    fn table<F>(&mut self, suffix: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> std::result::Result<(), csv::Error>,
    {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            fill(&mut w).map_err(|e| Error::Io(e.to_string()))?;
            w.flush()?;
        }
        self.write(suffix, &buf)
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn finish(mut self, cfg: &ExperimentConfig) -> Result<Summary> {
        let name = format!("{}-summary.json", self.prefix);
        self.files.push(name.clone());
        let summary = Summary {
            kind: cfg.kind,
            seed: cfg.seed,
            replicas: cfg.replicas,
            measure: cfg.measure_label.clone(),
            pass: self.checks.iter().all(|c| c.pass),
            files: self.files,
            checks: self.checks,
            notes: self.notes,
        };
        let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        fs::write(self.dir.join(name), text)?;
        Ok(summary)
    }
}

/// Runs one experiment and writes its reports under `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<Summary> {
    let mut rep = Reporter::new(&cfg.out, cfg.kind)?;
    let par = Parallelism { workers: cfg.workers };
    match &cfg.params {
        Params::FieldMoments(p) => field_moments(cfg, p, par, &mut rep)?,
        Params::Quadvar(p) => quadvar(cfg, p, par, &mut rep)?,
        Params::Ito(p) => ito(cfg, p, par, &mut rep)?,
        Params::Spectral(p) => spectral(cfg, p, par, &mut rep)?,
        Params::Equivalence(p) => equivalence(cfg, p, par, &mut rep)?,
        Params::Hermite(p) => hermite(cfg, p, par, &mut rep)?,
        Params::Fourier(p) => fourier(cfg, p, par, &mut rep)?,
        Params::Shift(p) => shift(cfg, p, par, &mut rep)?,
    }
    rep.finish(cfg)
}

fn simulator(cfg: &ExperimentConfig, domain: &MeasurableSet, depth: u32, label: &str, par: Parallelism) -> Result<FieldSimulator> {
    Ok(
        FieldSimulator::build(cfg.measure.clone(), domain, depth, derive_seed(cfg.seed, label), cfg.replicas)?
            .with_parallelism(par),
    )
}

fn field_moments(cfg: &ExperimentConfig, p: &FieldMomentsParams, par: Parallelism, rep: &mut Reporter) -> Result<()> {
    let domain = set_from_config(&p.domain)?;
    let sim = simulator(cfg, &domain, p.depth, "field-moments", par)?;
    let set = set_from_config(&p.set)?;
    let rows = sim.moment_check(&set, p.max_order)?;
    let mut checks = Vec::new();
    for r in &rows {
        checks.push(Check::close(format!("moment {}", r.order), r.sample, r.exact, 4.0 * r.se));
    }
    rep.table("moments.csv", |w| {
        w.write_record(["order", "sample", "exact", "se", "pass"])?;
        for (r, c) in rows.iter().zip(&checks) {
            w.serialize((r.order, r.sample, r.exact, r.se, c.pass))?;
        }
        Ok(())
    })?;
    rep.checks.extend(checks);

    if p.covariance_sets.is_empty() {
        return Ok(());
    }
    let sets: Vec<MeasurableSet> = p.covariance_sets.iter().map(|s| set_from_config(s)).collect::<Result<_>>()?;
    let sample = sim.sample_field(&sets)?;
    let r = cfg.replicas as f64;
    let mut rows = Vec::new();
    for i in 0..sets.len() {
        for j in i..sets.len() {
            let exact = cfg.measure.measure_of(&sets[i].intersect(&sets[j]))?;
            let (si, sj) = (cfg.measure.measure_of(&sets[i])?, cfg.measure.measure_of(&sets[j])?);
            let bound = 4.0 * ((si * sj + exact * exact) / r).sqrt() + (sample.residuals[i] * sample.residuals[j]).sqrt();
            let c = Check::close(format!("cov({},{})", sets[i], sets[j]), sample.covariance(i, j), exact, bound);
            rows.push((i, j, c.observed, exact, bound, c.pass));
            rep.check(c);
        }
    }
    rep.table("covariance.csv", |w| {
        w.write_record(["i", "j", "sample", "exact", "bound", "pass"])?;
        for row in &rows {
            w.serialize(row)?;
        }
        Ok(())
    })
}

fn quadvar(cfg: &ExperimentConfig, p: &QuadvarParams, par: Parallelism, rep: &mut Reporter) -> Result<()> {
    let set = set_from_config(&p.set)?;
    let atom_mass: Vec<f64> = cfg.measure.atoms_in(&set).map(|a| a.mass).collect();
    let report = if atom_mass.is_empty() {
        let depth = *p.levels.iter().max().expect("validated non-empty");
        let sim = simulator(cfg, &set, depth, "quadvar", par)?;
        quad_variation_experiment(&sim, &set, &p.levels)?
    } else {
        rep.notes.push(
            "measure has atoms: equal-length cells sampled directly; the second moment must stay bounded below".into(),
        );
        quad_variation_equal_length(
            &cfg.measure,
            &set,
            &p.levels,
            cfg.replicas,
            derive_seed(cfg.seed, "quadvar"),
            par,
        )?
    };
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    rep.write("table.csv", &buf)?;
    if atom_mass.is_empty() {
        for row in &report.rows {
            rep.check(Check::close(format!("ratio level {}", row.level), row.ratio, 1.0, p.tolerance));
        }
    } else {
        let floor = 0.75 * 2.0 * atom_mass.iter().map(|m| m * m).sum::<f64>();
        for row in &report.rows {
            rep.check(Check::at_least(
                format!("second moment level {}", row.level),
                row.empirical_2nd_moment,
                floor,
            ));
        }
    }
    Ok(())
}

fn integrand(spec: &str, cells: Vec<MeasurableSet>) -> Result<AdaptedProcess> {
    if spec == "running-field" {
        return AdaptedProcess::running_field(cells);
    }
    if let Some(c) = spec.strip_prefix("constant:") {
        let c: f64 = c
            .parse()
            .map_err(|_| Error::Config(format!("bad constant integrand {spec:?}")))?;
        return AdaptedProcess::constant(cells, c);
    }
    if let Some(name) = spec.strip_prefix("running-fn:") {
        let f = C2Function::builtin(name).ok_or_else(|| Error::Config(format!("unknown function {name:?}")))?;
        let v = f.value.clone();
        return AdaptedProcess::running_fn(cells, move |x| v(x));
    }
    Err(Error::Config(format!("unknown integrand {spec:?}")))
}

fn ito(cfg: &ExperimentConfig, p: &ItoParams, par: Parallelism, rep: &mut Reporter) -> Result<()> {
    let set = set_from_config(&p.set)?;
    let level = p.cells.trailing_zeros();
    let depth = p.formula_depths.iter().copied().fold(level, u32::max);
    let sim = simulator(cfg, &set, depth, "ito", par)?;
    let partition = cfg.measure.dyadic_partition(&set, level)?;
    let cells = partition.cells().to_vec();
    let sigmas = partition.cell_measures().to_vec();
    let sigma = cfg.measure.measure_of(&set)?;
    let process = integrand(&p.integrand, cells)?;
    let sample = ito_integral(&sim, &process)?;

    let exact = if p.integrand == "running-field" {
        let mut acc = 0.0;
        let mut total = 0.0;
        for s in &sigmas {
            total += acc * s;
            acc += s;
        }
        Some(total)
    } else if let Some(c) = p.integrand.strip_prefix("constant:") {
        let c: f64 = c.parse().expect("parsed above");
        Some(c * c * sigma)
    } else {
        None
    };
    let (expected, tol) = match exact {
        Some(e) => (e, 4.0 * sample.second_moment_se),
        None => (sample.isometry_prediction, 5.0 * sample.second_moment_se),
    };
    rep.check(Check::close("isometry", sample.second_moment, expected, tol));

    let mut residual_row = None;
    if p.integrand == "running-field" {
        let w = sim.wiener_integral(&sim.query_set(&set)?)?;
        let sq: Vec<f64> = sample
            .values
            .iter()
            .zip(&w)
            .map(|(i, w)| {
                let d = i - 0.5 * (w * w - sigma);
                d * d
            })
            .collect();
        let l2 = stats::mean(&sq).sqrt();
        let predicted = 0.5 * (2.0 * sigmas.iter().map(|s| s * s).sum::<f64>()).sqrt();
        rep.check(Check::close("running-field residual l2", l2, predicted, 0.2 * predicted));
        residual_row = Some((l2, predicted));
    }
    rep.table("isometry.csv", |w| {
        w.write_record(["integrand", "cells", "second_moment", "se", "prediction", "residual_l2", "residual_predicted"])?;
        let (l2, pr) = residual_row.map_or((None, None), |(a, b)| (Some(a), Some(b)));
        w.serialize((&p.integrand, p.cells, sample.second_moment, sample.second_moment_se, expected, l2, pr))
    })?;

    if let Some(name) = &p.formula {
        let f = C2Function::builtin(name).ok_or_else(|| Error::Config(format!("unknown function {name:?}")))?;
        let mut reports = Vec::new();
        for &d in &p.formula_depths {
            reports.push(ito_formula_residual(&sim, &f, &set, d)?);
        }
        let square = f.name == C2Function::square().name;
        let mut predicted = Vec::new();
        for r in &reports {
            let part = cfg.measure.dyadic_partition(&set, r.depth)?;
            let pr = (2.0 * part.cell_measures().iter().map(|s| s * s).sum::<f64>()).sqrt();
            if square {
                rep.check(Check::close(format!("formula residual depth {}", r.depth), r.residual_l2, pr, 0.2 * pr));
            }
            predicted.push(pr);
        }
        for w in reports.windows(2) {
            rep.check(Check::at_least(
                format!("formula rate {}->{}", w[0].depth, w[1].depth),
                w[0].residual_l2 / w[1].residual_l2,
                1.3,
            ));
        }
        rep.table("formula.csv", |w| {
            w.write_record(["function", "depth", "cells", "residual_l2", "predicted_l2", "lhs_mean", "rhs_mean"])?;
            for (r, pr) in reports.iter().zip(&predicted) {
                w.serialize((&r.function, r.depth, r.cells, r.residual_l2, pr, r.lhs_mean, r.rhs_mean))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn variance_function(space: &MeasureSpace) -> Result<Arc<VarianceFunction>> {
    Ok(Arc::new(VarianceFunction::new(SpectralMeasure::new(space.clone())?)))
}

fn write_ensemble(rep: &mut Reporter, vf: &VarianceFunction, ens: &PathEnsemble, suffix: &str) -> Result<()> {
    let mut buf = Vec::new();
    ens.write_covariance_csv(vf, &mut buf)?;
    rep.write(suffix, &buf)
}

/// Entrywise comparison of an empirical path covariance with the exact one.
fn covariance_agreement(rep: &mut Reporter, vf: &VarianceFunction, ens: &PathEnsemble, label: &str) -> Result<()> {
    let grid = ens.grid();
    let tmax = grid.iter().copied().fold(0.0, f64::max);
    let bound = 4.0 * tmax / (ens.replicas() as f64).sqrt();
    let emp = ens.empirical_covariance();
    let mut worst: f64 = 0.0;
    for i in 1..grid.len() {
        for j in 1..grid.len() {
            worst = worst.max((emp[(i - 1, j - 1)] - vf.covariance(grid[i], grid[j])?).abs());
        }
    }
    rep.check(Check::at_most(format!("{label} covariance max deviation"), worst, bound));
    Ok(())
}

fn spectral(cfg: &ExperimentConfig, p: &SpectralParams, par: Parallelism, rep: &mut Reporter) -> Result<()> {
    let vf = variance_function(&cfg.measure)?;
    let mut rows = Vec::new();
    for &t in &p.r_table {
        let r = vf.detailed(t)?;
        rep.check(Check::at_most(format!("r({t}) sweep change"), r.relative_change, crate::spectral::SWEEP_TOL));
        rows.push(r);
    }
    rep.table("r.csv", |w| {
        w.write_record(["t", "r", "truncation", "relative_change", "converged"])?;
        for r in &rows {
            w.serialize((r.t, r.value, r.truncation, r.relative_change, r.converged))?;
        }
        Ok(())
    })?;
    let scale = p.grid.iter().map(|t| vf.r(*t)).collect::<Result<Vec<_>>>()?.into_iter().fold(1.0, f64::max);
    rep.check(Check::at_least(
        "covariance min eigenvalue",
        covariance_min_eigenvalue(&vf, &p.grid)?,
        -1e-10 * scale,
    ));
    if matches!(p.sampler, SamplerChoice::Markov | SamplerChoice::Both) {
        let gap = crate::equivalence::sampler_gap(&vf, &p.grid)?;
        if gap > 1e-6 * scale {
            rep.notes.push(format!(
                "independent-increment sampler differs from the stationary-increment covariance by {gap:e}"
            ));
        }
        let ens = sample_paths_kolmogorov(&vf, &p.grid, cfg.replicas, derive_seed(cfg.seed, "markov"), par)?;
        write_ensemble(rep, &vf, &ens, "covariance-markov.csv")?;
        covariance_agreement(rep, &vf, &ens, "markov")?;
    }
    if matches!(p.sampler, SamplerChoice::Cholesky | SamplerChoice::Both) {
        let ens = sample_paths_covariance(&vf, &p.grid, cfg.replicas, derive_seed(cfg.seed, "cholesky"), par)?;
        write_ensemble(rep, &vf, &ens, "covariance-cholesky.csv")?;
        covariance_agreement(rep, &vf, &ens, "cholesky")?;
    }
    Ok(())
}

fn custom_cylinder(c: &CylinderParams) -> Result<CylinderSpec> {
    let region = c
        .region
        .iter()
        .map(|[a, b]| (a.unwrap_or(f64::NEG_INFINITY), b.unwrap_or(f64::INFINITY)))
        .collect();
    CylinderSpec::indicators(&c.label, &c.times, region).map_err(|e| Error::Config(e.to_string()))
}

fn equivalence(cfg: &ExperimentConfig, p: &EquivalenceParams, par: Parallelism, rep: &mut Reporter) -> Result<()> {
    let vf = variance_function(&cfg.measure)?;
    let cylinders = if p.cylinders.is_empty() {
        standard_cylinders(&vf)?
    } else {
        p.cylinders.iter().map(custom_cylinder).collect::<Result<_>>()?
    };
    let opts = PushforwardOptions {
        replicas: cfg.replicas,
        seed: derive_seed(cfg.seed, "equivalence"),
        cutoff: p.cutoff,
        depth: p.depth,
        grid_step: p.pairing.grid_step,
        allow_disagreement: p.allow_disagreement,
        parallelism: par,
    };
    let mut reports = Vec::new();
    for cyl in &cylinders {
        let r = pushforward_test(vf.clone(), cyl, &opts)?;
        rep.check(Check::at_most(format!("cylinder {} |z|", r.cylinder), r.z.map_or(0.0, f64::abs), 3.0));
        reports.push(r);
    }
    rep.table("cylinders.csv", |w| {
        w.write_record(["cylinder", "p_kolm", "p_gelfand", "z", "sampler_gap", "pass"])?;
        for r in &reports {
            w.serialize((&r.cylinder, r.p_kolm, r.p_gelfand, r.z, r.sampler_gap, r.pass))?;
        }
        Ok(())
    })?;

    let pp = &p.pairing;
    if pp.widths.is_empty() {
        return Ok(());
    }
    let hmax = pp.widths.iter().copied().max().unwrap_or(0) as f64 * pp.grid_step;
    let steps = ((pp.t + hmax) / pp.grid_step).ceil() as usize;
    let grid: Vec<f64> = (1..=steps).map(|k| k as f64 * pp.grid_step).collect();
    let ens = sample_paths_kolmogorov(&vf, &grid, pp.replicas, derive_seed(cfg.seed, "pairing"), par)?;
    let mut checks = Vec::new();
    for &wdt in &pp.widths {
        let h = wdt as f64 * pp.grid_step;
        let c = pairing_identity_check(&ens, pp.t, h)?;
        rep.check(Check::at_least(format!("pairing h={h}"), c.within_tolerance, 0.95));
        checks.push(c);
    }
    rep.table("pairing.csv", |w| {
        w.write_record(["t", "h", "replicas", "within_tolerance", "mean_abs_error", "mean_tolerance"])?;
        for c in &checks {
            w.serialize((c.t, c.h, c.replicas, c.within_tolerance, c.mean_abs_error, c.mean_tolerance))?;
        }
        Ok(())
    })
}

/// Random union of grid cells of `domain` at resolution `2^-depth` in
/// measure, aligned with the leaves of the simulator.
fn random_leaf_set<R: Rng>(sim: &FieldSimulator, rng: &mut R) -> MeasurableSet {
    let leaves = sim.basis().leaves();
    loop {
        let picked: Vec<(f64, f64)> = leaves
            .iter()
            .filter(|_| rng.random_bool(0.5))
            .flat_map(|l| l.intervals().to_vec())
            .collect();
        if !picked.is_empty() {
            return MeasurableSet::from_intervals(picked).expect("leaves are valid");
        }
    }
}

fn hermite(cfg: &ExperimentConfig, p: &HermiteParams, par: Parallelism, rep: &mut Reporter) -> Result<()> {
    let mut mehler = Vec::new();
    for &c in &p.correlations {
        for n in 0..=p.max_degree {
            for k in 0..=p.max_degree {
                let value = mehler_moment(n, k, c)?;
                let exact = if n == k {
                    stats::factorial(n as u32) * c.powi(n as i32)
                } else {
                    0.0
                };
                mehler.push((n, k, c, value, exact, (value - exact).abs() <= 1e-8));
            }
        }
    }
    let worst = mehler.iter().map(|m| (m.3 - m.4).abs()).fold(0.0, f64::max);
    rep.check(Check::at_most("mehler max abs error", worst, 1e-8));
    rep.table("mehler.csv", |w| {
        w.write_record(["n", "k", "c", "value", "exact", "pass"])?;
        for row in &mehler {
            w.serialize(row)?;
        }
        Ok(())
    })?;

    if p.psi_cases == 0 {
        return Ok(());
    }
    let domain = set_from_config(&p.domain)?;
    let sim = simulator(cfg, &domain, p.depth, "hermite", par)?;
    let mut rng = replica_rng(derive_seed(cfg.seed, "psi-cases"), 0);
    let mut rows = Vec::new();
    for case in 0..p.psi_cases {
        let coeffs: Vec<f64> = (0..=p.psi_degree).map(|_| rng.random_range(-1.0..1.0)).collect();
        let psi = HermiteSeries::new(coeffs)?;
        let a = random_leaf_set(&sim, &mut rng);
        let b = random_leaf_set(&sim, &mut rng);
        let c = psi_covariance_check(&sim, &psi, &a, &b)?;
        let pass = (c.monte_carlo - c.prediction).abs() <= 4.0 * c.se;
        rep.check(Check::close(format!("psi case {case}"), c.monte_carlo, c.prediction, 4.0 * c.se));
        rows.push(IdentityRow {
            identity: format!("psi{case} rho={:.6}", c.correlation),
            lhs: c.monte_carlo,
            rhs: c.prediction,
            se: c.se,
            pass,
        });
    }
    let mut buf = Vec::new();
    write_identity_csv(&rows, &mut buf)?;
    rep.write("psi.csv", &buf)
}

fn fourier(cfg: &ExperimentConfig, p: &FourierParams, par: Parallelism, rep: &mut Reporter) -> Result<()> {
    let domain = set_from_config(&p.domain)?;
    let sim = simulator(cfg, &domain, p.depth, "fourier", par)?;
    let sets: Vec<MeasurableSet> = p.sets.iter().map(|s| set_from_config(s)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut push = |rep: &mut Reporter, identity: String, est: crate::hermite::FourierEstimate, rhs: f64| {
        let err = (est.value - num_complex::Complex64::new(rhs, 0.0)).norm();
        let tol = (4.0 * est.se).max(1e-12);
        rep.check(Check::at_most(identity.clone(), err, tol));
        rows.push(IdentityRow {
            identity,
            lhs: est.value.re,
            rhs,
            se: est.se,
            pass: err <= tol,
        });
    };
    let one = generalized_fourier(&sim, &Functional::one(), &sets)?;
    for (s, est) in sets.iter().zip(one) {
        push(rep, format!("1^({s})"), est, (-0.5 * cfg.measure.measure_of(s)?).exp());
    }
    for b in &sets {
        let f = Functional::exp_i_set(&sim, b, -1.0)?;
        let est = generalized_fourier(&sim, &f, &sets)?;
        for (a, e) in sets.iter().zip(est) {
            push(rep, format!("exp(-iW_{b})^({a})"), e, rkhs_kernel_eval(&cfg.measure, a, b)?);
        }
    }
    let mut buf = Vec::new();
    write_identity_csv(&rows, &mut buf)?;
    rep.write("identities.csv", &buf)?;

    if p.gram_sets > 0 {
        let mut rng = replica_rng(derive_seed(cfg.seed, "gram-sets"), 0);
        let gram: Vec<MeasurableSet> = (0..p.gram_sets).map(|_| random_leaf_set(&sim, &mut rng)).collect();
        let min = RkhsKernel::new(cfg.measure.clone()).min_eigenvalue(&gram)?;
        rep.check(Check::at_least("kernel gram min eigenvalue", min, -1e-10));
    }
    Ok(())
}

fn shift(cfg: &ExperimentConfig, p: &ShiftParams, par: Parallelism, rep: &mut Reporter) -> Result<()> {
    let domain = set_from_config(&p.domain)?;
    let sim = simulator(cfg, &domain, p.depth, "shift", par)?;
    let mut results = Vec::new();
    for (i, f) in p.shifts.iter().enumerate() {
        for func in CoordinateFunctional::standard_suite() {
            let c = cameron_martin_shift_check(&sim, &func, f)?;
            if let Some(w) = &c.warning {
                rep.notes.push(format!("shift {i}, {}: {w}", c.functional));
            }
            rep.check(Check::at_most(
                format!("shift {i} {}", c.functional),
                (c.lhs() - c.rhs()).norm(),
                4.0 * c.combined_se,
            ));
            results.push((i, c));
        }
    }
    rep.table("shift.csv", |w| {
        w.write_record([
            "shift",
            "functional",
            "shift_norm_sq",
            "lhs_re",
            "lhs_im",
            "rhs_re",
            "rhs_im",
            "combined_se",
            "ess_fraction",
            "pass",
        ])?;
        for (i, c) in &results {
            w.serialize((
                i,
                &c.functional,
                c.shift_norm_sq,
                c.lhs_re,
                c.lhs_im,
                c.rhs_re,
                c.rhs_im,
                c.combined_se,
                c.ess_fraction,
                c.pass,
            ))?;
        }
        Ok(())
    })
}

/// The catalog printed by `list-builtins`.
#[derive(Debug, Clone, Serialize)]
pub struct Catalog {
    pub measures: Vec<crate::config::BuiltinMeasure>,
    pub psi_presets: Vec<(String, Vec<f64>)>,
    pub cylinder_suites: Vec<(String, Vec<String>)>,
}

/// Builtin measures, Hermite presets and cylinder suites.
pub fn list_builtins() -> Result<Catalog> {
    let psi_presets = HermiteSeries::PRESETS
        .iter()
        .map(|n| (n.to_string(), HermiteSeries::preset(n).expect("preset exists").coeffs().to_vec()))
        .collect();
    let vf = VarianceFunction::new(SpectralMeasure::new(MeasureSpace::normalized_lebesgue())?);
    let standard = standard_cylinders(&vf)?.iter().map(CylinderSpec::describe).collect();
    Ok(Catalog {
        measures: crate::config::BUILTIN_MEASURES.to_vec(),
        psi_presets,
        cylinder_suites: vec![("standard".into(), standard)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str, out: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::from_str(text, false, Path::new(".")).unwrap();
        c.out = out.to_path_buf();
        c
    }

    #[test]
    fn catalog_lists_builtins() {
        let cat = list_builtins().unwrap();
        assert!(cat.measures.iter().any(|m| m.name == "normalized-lebesgue"));
        assert!(!cat.measures.iter().find(|m| m.name == "dirac").unwrap().refinable);
        assert_eq!(cat.cylinder_suites[0].1.len(), 5);
        assert_eq!(cat.psi_presets.len(), HermiteSeries::PRESETS.len());
    }

    #[test]
    fn field_moments_small_run() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(
            "kind = \"field-moments\"\nreplicas = 20000\n[params]\ndepth = 3\ncovariance_sets = [[[0.0, 0.5]], [[0.25, 1.0]]]\n",
            dir.path(),
        );
        let s = run(&c).unwrap();
        assert!(s.pass, "{s:?}");
        assert_eq!(s.checks.len(), 4 + 3);
        assert!(dir.path().join("field-moments-moments.csv").exists());
        assert!(dir.path().join("field-moments-summary.json").exists());
    }

    #[test]
    fn atomic_quadvar_uses_control() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(
            "kind = \"quadvar\"\nmeasure = \"dirac\"\nreplicas = 4000\n[params]\nlevels = [1, 4, 8]\n",
            dir.path(),
        );
        let s = run(&c).unwrap();
        assert!(s.pass, "{s:?}");
        assert_eq!(s.notes.len(), 1);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(error_exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(error_exit_code(&Error::Spectral("x".into())), EXIT_NUMERICAL);
    }
}
