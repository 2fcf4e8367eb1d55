//! Hermite analysis of the field, the reproducing kernel
//! `K(A, B) = exp(-||chi_A - chi_B||^2 / 2)`, the generalized Fourier
//! transform `F^(A) = E[F e^{i W_A}]`, and the Cameron-Martin shift.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{csv_err, FieldSimulator, Query};
use crate::measure::MeasureSpace;
use crate::quadrature::gauss_hermite_probabilists;
use crate::set::MeasurableSet;
use crate::stats;

/// Highest degree accepted by the Hermite identity checks.
pub const MAX_DEGREE: usize = 8;

/// Probabilists' Hermite polynomial `He_n(x)`, generating function
/// `exp(zx - z^2/2)`.
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `psi = sum_n c_n He_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteSeries {
    coeffs: Vec<f64>,
}

impl HermiteSeries {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("Hermite coefficients must be finite".into()));
        }
        Ok(Self { coeffs })
    }

    /// `He_n` itself.
    pub fn basis(n: usize) -> Self {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Evaluates all terms with one pass of the recurrence.
    pub fn eval(&self, x: f64) -> f64 {
        let (mut prev, mut cur) = (0.0, 1.0);
        let mut total = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            total += c * cur;
            let next = x * cur - k as f64 * prev;
            prev = cur;
            cur = next;
        }
        total
    }

    /// `E[psi(Z)^2] = sum n! c_n^2`.
    pub fn norm_sq(&self) -> f64 {
        bracket_transform(self).eval(1.0)
    }

    /// Named presets.
    pub fn preset(name: &str) -> Option<Self> {
        let c = match name {
            "h1" => vec![0.0, 1.0],
            "h2" => vec![0.0, 0.0, 1.0],
            "h0+h1" => vec![1.0, 1.0],
            "mixed4" => vec![0.5, -1.0, 0.25, 0.1, -0.05],
            "cubic" => vec![0.0, 0.0, 0.0, 1.0],
            _ => return None,
        };
        Some(Self { coeffs: c })
    }

    pub const PRESETS: [&'static str; 5] = ["h1", "h2", "h0+h1", "mixed4", "cubic"];
}

/// `[psi](x) = sum_n a_n x^n` with `a_n = n! c_n^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketSeries {
    coeffs: Vec<f64>,
}

impl BracketSeries {
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, a| acc * x + a)
    }
}

/// `c_n -> n! c_n^2`.
pub fn bracket_transform(psi: &HermiteSeries) -> BracketSeries {
    BracketSeries {
        coeffs: psi
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| stats::factorial(n as u32) * c * c)
            .collect(),
    }
}

/// `iint He_n(x) He_k(y) dgamma_2^(c)(x, y)` for the standard bivariate
/// normal with correlation `c`, by tensor Gauss-Hermite quadrature of
/// `y = c x + sqrt(1 - c^2) z`.
pub fn mehler_moment(n: usize, k: usize, c: f64) -> Result<f64> {
    if !(c.abs() < 1.0) {
        return Err(Error::Range {
            what: "correlation",
            value: c,
            lo: -1.0,
            hi: 1.0,
        });
    }
    // exact for total degree n + k < 2m in each variable
    let m = ((n + k) / 2 + 2).max(20);
    let (x, w) = gauss_hermite_probabilists(m);
    let s = (1.0 - c * c).sqrt();
    let mut total = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let hn = hermite_eval(n, *xi);
        let inner: f64 = x
            .iter()
            .zip(&w)
            .map(|(zj, wj)| wj * hermite_eval(k, c * xi + s * zj))
            .sum();
        total += wi * hn * inner;
    }
    Ok(total)
}

/// Output of [`psi_covariance_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiCovarianceCheck {
    pub correlation: f64,
    pub monte_carlo: f64,
    pub se: f64,
    pub prediction: f64,
}

impl PsiCovarianceCheck {
    pub fn z(&self) -> f64 {
        if self.se > 0.0 {
            (self.monte_carlo - self.prediction) / self.se
        } else if self.monte_carlo == self.prediction {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `E[psi(W_A / sqrt(sigma(A))) psi(W_B / sqrt(sigma(B)))]` against
/// `[psi](sigma(A ∩ B) / sqrt(sigma(A) sigma(B)))`.
pub fn psi_covariance_check(
    sim: &FieldSimulator,
    psi: &HermiteSeries,
    a: &MeasurableSet,
    b: &MeasurableSet,
) -> Result<PsiCovarianceCheck> {
    if psi.degree() > MAX_DEGREE {
        return Err(Error::InvalidInput(format!("degree {} exceeds {MAX_DEGREE}", psi.degree())));
    }
    let space = sim.space();
    let (sa, sb) = (space.measure_of(a)?, space.measure_of(b)?);
    if !(sa > 0.0 && sb > 0.0 && sa.is_finite() && sb.is_finite()) {
        return Err(Error::InvalidInput(format!("sets need 0 < sigma < inf, got {sa} and {sb}")));
    }
    let correlation = space.measure_of(&a.intersect(b))? / (sa * sb).sqrt();
    let queries = [sim.query_set(a)?, sim.query_set(b)?];
    let (na, nb) = (sa.sqrt(), sb.sqrt());
    let products = sim.map(&queries, |v| psi.eval(v.values[0] / na) * psi.eval(v.values[1] / nb))?;
    let (monte_carlo, se) = stats::mean_se(&products);
    Ok(PsiCovarianceCheck {
        correlation,
        monte_carlo,
        se,
        prediction: bracket_transform(psi).eval(correlation),
    })
}

/// `K(A, B) = exp(-(sigma(A) + sigma(B) - 2 sigma(A ∩ B)) / 2)`.
pub fn rkhs_kernel_eval(space: &MeasureSpace, a: &MeasurableSet, b: &MeasurableSet) -> Result<f64> {
    let d = space.measure_of(a)? + space.measure_of(b)? - 2.0 * space.measure_of(&a.intersect(b))?;
    Ok((-0.5 * d.max(0.0)).exp())
}

/// The kernel `K` on one measure space.
#[derive(Debug, Clone, PartialEq)]
pub struct RkhsKernel {
    space: MeasureSpace,
}

impl RkhsKernel {
    pub fn new(space: MeasureSpace) -> Self {
        Self { space }
    }

    pub fn eval(&self, a: &MeasurableSet, b: &MeasurableSet) -> Result<f64> {
        rkhs_kernel_eval(&self.space, a, b)
    }

    /// `[K(A_i, A_j)]`.
    pub fn gram(&self, sets: &[MeasurableSet]) -> Result<DMatrix<f64>> {
        let n = sets.len();
        let measures: Vec<f64> = sets.iter().map(|s| self.space.measure_of(s)).collect::<Result<_>>()?;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
            for j in 0..i {
                let d = measures[i] + measures[j] - 2.0 * self.space.measure_of(&sets[i].intersect(&sets[j]))?;
                let k = (-0.5 * d.max(0.0)).exp();
                m[(i, j)] = k;
                m[(j, i)] = k;
            }
        }
        Ok(m)
    }

    /// Smallest eigenvalue of the Gram matrix, a witness of positive
    /// semidefiniteness.
    pub fn min_eigenvalue(&self, sets: &[MeasurableSet]) -> Result<f64> {
        Ok(SymmetricEigen::new(self.gram(sets)?)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min))
    }
}

/// `k(t, s) = sigma([0, min(t, s)))`.
pub fn rk_sigma_kernel(space: &MeasureSpace, t: f64, s: f64) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(Error::InvalidInput(format!("kernel arguments must be >= 0, got ({t}, {s})")));
    }
    space.measure_of(&MeasurableSet::interval(0.0, t.min(s))?)
}

type FunctionalFn = dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync;

/// A functional of one replica, evaluated from the values of a fixed list
/// of Wiener integrals and the basis coordinates.
#[derive(Clone)]
pub struct Functional {
    label: String,
    queries: Vec<Query>,
    f: Arc<FunctionalFn>,
}

impl std::fmt::Debug for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Functional({})", self.label)
    }
}

impl Functional {
    /// `f(query values, coordinates)`.
    pub fn new<F>(label: &str, queries: Vec<Query>, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            label: label.to_string(),
            queries,
            f: Arc::new(f),
        }
    }

    pub fn one() -> Self {
        Self::new("1", Vec::new(), |_, _| Complex64::new(1.0, 0.0))
    }

    /// `exp(i sign W_B)`.
    pub fn exp_i_set(sim: &FieldSimulator, b: &MeasurableSet, sign: f64) -> Result<Self> {
        Ok(Self::new(&format!("exp({sign}i W_{b})"), vec![sim.query_set(b)?], move |v, _| {
            Complex64::from_polar(1.0, sign * v[0])
        }))
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// One estimate of `F^(A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierEstimate {
    pub value: Complex64,
    pub se: f64,
}

/// `F^(A) = E[F e^{i W_A}]` for every set.
pub fn generalized_fourier(sim: &FieldSimulator, f: &Functional, sets: &[MeasurableSet]) -> Result<Vec<FourierEstimate>> {
    let mut queries = f.queries.clone();
    let offset = queries.len();
    for s in sets {
        queries.push(sim.query_set(s)?);
    }
    let n = sets.len();
    let sums = sim.fold(
        &queries,
        || vec![[0.0f64; 4]; n],
        |acc, view| {
            let base = (f.f)(&view.values[..offset], view.coordinates);
            for (slot, w) in acc.iter_mut().zip(&view.values[offset..]) {
                let z = base * Complex64::from_polar(1.0, *w);
                slot[0] += z.re;
                slot[1] += z.im;
                slot[2] += z.re * z.re;
                slot[3] += z.im * z.im;
            }
        },
        |acc, part| {
            for (a, b) in acc.iter_mut().zip(part) {
                for k in 0..4 {
                    a[k] += b[k];
                }
            }
        },
    )?;
    let r = sim.replicas().max(1) as f64;
    Ok(sums
        .into_iter()
        .map(|s| {
            let (mr, mi) = (s[0] / r, s[1] / r);
            let var = (s[2] / r - mr * mr).max(0.0) + (s[3] / r - mi * mi).max(0.0);
            FourierEstimate {
                value: Complex64::new(mr, mi),
                se: (var / r).sqrt(),
            }
        })
        .collect())
}

type CoordinateFn = dyn Fn(&[f64]) -> Complex64 + Send + Sync;

/// A cylinder function `F(X_0, ..., X_{m-1})` of the basis coordinates.
#[derive(Clone)]
pub struct CoordinateFunctional {
    label: String,
    arity: usize,
    f: Arc<CoordinateFn>,
}

impl std::fmt::Debug for CoordinateFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CoordinateFunctional({})", self.label)
    }
}

impl CoordinateFunctional {
    pub fn new<F>(label: &str, arity: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            label: label.to_string(),
            arity,
            f: Arc::new(f),
        }
    }

    pub fn one() -> Self {
        Self::new("1", 0, |_| Complex64::new(1.0, 0.0))
    }

    pub fn coordinate(k: usize) -> Self {
        Self::new(&format!("X_{k}"), k + 1, move |x| Complex64::new(x[k], 0.0))
    }

    pub fn coordinate_sq(k: usize) -> Self {
        Self::new(&format!("X_{k}^2"), k + 1, move |x| Complex64::new(x[k] * x[k], 0.0))
    }

    pub fn exp_i_coordinate(k: usize) -> Self {
        Self::new(&format!("exp(i X_{k})"), k + 1, move |x| Complex64::from_polar(1.0, x[k]))
    }

    /// `{1, X_1, X_1^2, exp(i X_2)}`.
    pub fn standard_suite() -> Vec<Self> {
        vec![
            Self::one(),
            Self::coordinate(1),
            Self::coordinate_sq(1),
            Self::exp_i_coordinate(2),
        ]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn arity(&self) -> usize {
        self.arity
    }
}

/// Output of [`cameron_martin_shift_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftCheck {
    pub functional: String,
    pub shift_norm_sq: f64,
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    pub lhs_se: f64,
    pub rhs_se: f64,
    /// `sqrt(lhs_se^2 + rhs_se^2)`.
    pub combined_se: f64,
    /// Effective sample size of the exponential weights over the replica count.
    pub ess_fraction: f64,
    pub warning: Option<String>,
    pub pass: bool,
}

impl ShiftCheck {
    pub fn lhs(&self) -> Complex64 {
        Complex64::new(self.lhs_re, self.lhs_im)
    }

    pub fn rhs(&self) -> Complex64 {
        Complex64::new(self.rhs_re, self.rhs_im)
    }
}

/// Compares `E[F(X + a)]` with `E[F(X) exp(-|a|^2/2 + sum a_k X_k)]` where
/// `a_k = <f, phi_k>` are the basis coefficients of the shift.
pub fn cameron_martin_shift_check(sim: &FieldSimulator, f: &CoordinateFunctional, shift: &[f64]) -> Result<ShiftCheck> {
    let n = sim.basis().len();
    if shift.len() > n || f.arity > n {
        return Err(Error::InvalidInput(format!(
            "shift or functional uses more than the {n} available coordinates"
        )));
    }
    let norm_sq: f64 = shift.iter().map(|a| a * a).sum();
    let m = f.arity.max(shift.len());
    // lhs re, im, re^2, im^2 | rhs re, im, re^2, im^2 | w, w^2
    let sums = sim.fold(
        &[],
        || (vec![0.0; m], [0.0f64; 10]),
        |(buf, acc), view| {
            let x = &view.coordinates[..m];
            for (k, b) in buf.iter_mut().enumerate() {
                *b = x[k] + shift.get(k).copied().unwrap_or(0.0);
            }
            let lhs = (f.f)(buf);
            let exponent: f64 = shift.iter().zip(x).map(|(a, xk)| a * xk).sum::<f64>() - 0.5 * norm_sq;
            let w = exponent.exp();
            let rhs = (f.f)(x) * w;
            for (k, v) in [lhs.re, lhs.im, lhs.re * lhs.re, lhs.im * lhs.im, rhs.re, rhs.im, rhs.re * rhs.re, rhs.im * rhs.im, w, w * w]
                .into_iter()
                .enumerate()
            {
                acc[k] += v;
            }
        },
        |(_, acc), (_, part)| {
            for (a, b) in acc.iter_mut().zip(part) {
                *a += b;
            }
        },
    )?
    .1;
    let r = sim.replicas().max(1) as f64;
    let mean = |k: usize| sums[k] / r;
    let se = |k: usize| {
        let var = (mean(k + 2) - mean(k).powi(2)).max(0.0) + (mean(k + 3) - mean(k + 1).powi(2)).max(0.0);
        (var / r).sqrt()
    };
    let (lhs_se, rhs_se) = (se(0), se(4));
    let combined_se = (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
    let ess_fraction = if sums[9] > 0.0 { sums[8] * sums[8] / sums[9] / r } else { 0.0 };
    let warning = (ess_fraction < 0.1).then(|| {
        format!("importance weights degenerate: effective sample size {:.1}% of replicas", 100.0 * ess_fraction)
    });
    let diff = Complex64::new(mean(0) - mean(4), mean(1) - mean(5)).norm();
    Ok(ShiftCheck {
        functional: f.label.clone(),
        shift_norm_sq: norm_sq,
        lhs_re: mean(0),
        lhs_im: mean(1),
        rhs_re: mean(4),
        rhs_im: mean(5),
        lhs_se,
        rhs_se,
        combined_se,
        ess_fraction,
        warning,
        pass: diff <= 4.0 * combined_se || diff <= 1e-12,
    })
}

/// One line of the identity results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRow {
    pub identity: String,
    pub lhs: f64,
    pub rhs: f64,
    pub se: f64,
    pub pass: bool,
}

/// CSV `{identity, lhs, rhs, se, pass}`.
pub fn write_identity_csv<W: Write>(rows: &[IdentityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["identity", "lhs", "rhs", "se", "pass"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.identity.clone(),
            format!("{:e}", r.lhs),
            format!("{:e}", r.rhs),
            format!("{:e}", r.se),
            r.pass.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
