//! Experiment configuration files and the catalog of builtin measures.
//!
//! A config is TOML or JSON with a handful of common keys and a
//! kind-specific `params` table. Unknown keys are rejected at every level.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Atom, Density, MeasureSpace, PolySegment};
use crate::quadrature::QuadratureConfig;
use crate::set::MeasurableSet;

/// A builtin measure of the catalog.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuiltinMeasure {
    pub name: &'static str,
    pub description: &'static str,
    pub refinable: bool,
}

pub const BUILTIN_MEASURES: [BuiltinMeasure; 6] = [
    BuiltinMeasure {
        name: "lebesgue",
        description: "du",
        refinable: true,
    },
    BuiltinMeasure {
        name: "normalized-lebesgue",
        description: "du / (2 pi); spectral measure with r(t) = |t|",
        refinable: true,
    },
    BuiltinMeasure {
        name: "power:<alpha>",
        description: "|u|^alpha du, alpha > -1",
        refinable: true,
    },
    BuiltinMeasure {
        name: "cauchy-like:<p>",
        description: "du / (1 + u^2)^p",
        refinable: true,
    },
    BuiltinMeasure {
        name: "dirac",
        description: "unit point mass at 0.5 (demo of a non-refinable space)",
        refinable: false,
    },
    BuiltinMeasure {
        name: "lebesgue+dirac",
        description: "du plus a unit atom at 0.5 (non-refinable)",
        refinable: false,
    },
];

fn parse_param(name: &str, text: &str) -> Result<f64> {
    text.parse::<f64>()
        .map_err(|_| Error::Config(format!("bad parameter {text:?} in builtin measure {name:?}")))
}

/// Resolves a builtin name such as `power:0.5`.
pub fn builtin_density(name: &str) -> Result<(Density, Vec<Atom>)> {
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    let atom = Atom {
        location: 0.5,
        mass: 1.0,
    };
    match (head, arg) {
        ("lebesgue", None) => Ok((Density::Lebesgue { scale: 1.0 }, vec![])),
        ("lebesgue", Some(s)) => Ok((Density::Lebesgue { scale: parse_param(name, s)? }, vec![])),
        ("normalized-lebesgue", None) => Ok((Density::Lebesgue { scale: 1.0 / (2.0 * PI) }, vec![])),
        ("power", Some(a)) => Ok((
            Density::Power {
                alpha: parse_param(name, a)?,
                scale: 1.0,
            },
            vec![],
        )),
        ("cauchy-like", Some(p)) => Ok((
            Density::CauchyLike {
                p: parse_param(name, p)?,
                scale: 1.0,
            },
            vec![],
        )),
        ("dirac", None) => Ok((Density::Zero, vec![atom])),
        ("lebesgue+dirac", None) => Ok((Density::Lebesgue { scale: 1.0 }, vec![atom])),
        ("zero", None) => Ok((Density::Zero, vec![])),
        _ => Err(Error::Config(format!("unknown builtin measure {name:?}"))),
    }
}

/// `density` entry of a measure file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DensitySpec {
    /// A builtin name (its atoms, if any, are kept).
    Name(String),
    Table(DensityTable),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityTable {
    pub piecewise: Vec<PolySegment>,
}

/// A measure written out in a config or a standalone file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub density: DensitySpec,
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

impl MeasureFile {
    pub fn build(&self) -> Result<MeasureSpace> {
        let (density, mut atoms) = match &self.density {
            DensitySpec::Name(n) => builtin_density(n)?,
            DensitySpec::Table(t) => (Density::Piecewise(t.piecewise.clone()), vec![]),
        };
        atoms.extend(self.atoms.iter().map(|[location, mass]| Atom {
            location: *location,
            mass: *mass,
        }));
        MeasureSpace::new(density, atoms, self.quadrature).map_err(|e| Error::Config(e.to_string()))
    }
}

/// How a config names its measure.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MeasureRef {
    Builtin(String),
    File { file: PathBuf },
    Inline(MeasureFile),
}

impl Default for MeasureRef {
    fn default() -> Self {
        MeasureRef::Builtin("lebesgue".into())
    }
}

impl MeasureRef {
    /// `base` resolves relative file paths.
    pub fn resolve(&self, base: &Path) -> Result<MeasureSpace> {
        match self {
            MeasureRef::Builtin(name) => {
                let (d, atoms) = builtin_density(name)?;
                MeasureSpace::new(d, atoms, QuadratureConfig::default()).map_err(|e| Error::Config(e.to_string()))
            }
            MeasureRef::File { file } => {
                let path = if file.is_absolute() { file.clone() } else { base.join(file) };
                let mf: MeasureFile = parse_document(&path)?;
                mf.build()
            }
            MeasureRef::Inline(mf) => mf.build(),
        }
    }
}

/// Reads a TOML or JSON document, chosen by extension (`.json` is JSON,
/// anything else TOML).
pub fn parse_document<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_str(&text, is_json(path)).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn parse_str<T: for<'de> Deserialize<'de>>(text: &str, json: bool) -> Result<T> {
    if json {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Experiment kinds understood by the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FieldMoments,
    Quadvar,
    Ito,
    Spectral,
    Equivalence,
    Hermite,
    Fourier,
    Shift,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FieldMoments => "field-moments",
            ExperimentKind::Quadvar => "quadvar",
            ExperimentKind::Ito => "ito",
            ExperimentKind::Spectral => "spectral",
            ExperimentKind::Equivalence => "equivalence",
            ExperimentKind::Hermite => "hermite",
            ExperimentKind::Fourier => "fourier",
            ExperimentKind::Shift => "shift",
        }
    }

    fn default_replicas(self) -> usize {
        match self {
            ExperimentKind::FieldMoments | ExperimentKind::Fourier | ExperimentKind::Shift => 200_000,
            _ => 100_000,
        }
    }
}

/// Top level of a config document.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: ExperimentKind,
    #[serde(default)]
    seed: u64,
    replicas: Option<usize>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    #[serde(default)]
    measure: MeasureRef,
    #[serde(default)]
    params: Option<serde_json::Value>,
}

fn unit() -> Vec<[f64; 2]> {
    vec![[0.0, 1.0]]
}

fn to_set(raw: &[[f64; 2]]) -> Result<MeasurableSet> {
    MeasurableSet::from_intervals(raw.iter().map(|[a, b]| (*a, *b))).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldMomentsParams {
    pub domain: Vec<[f64; 2]>,
    pub depth: u32,
    pub set: Vec<[f64; 2]>,
    pub max_order: u32,
    /// Sets whose pairwise covariances are checked.
    pub covariance_sets: Vec<Vec<[f64; 2]>>,
}

impl Default for FieldMomentsParams {
    fn default() -> Self {
        Self {
            domain: unit(),
            depth: 6,
            set: unit(),
            max_order: 4,
            covariance_sets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadvarParams {
    pub set: Vec<[f64; 2]>,
    pub levels: Vec<u32>,
    /// Allowed relative deviation of the ratio column from 1.
    pub tolerance: f64,
}

impl Default for QuadvarParams {
    fn default() -> Self {
        Self {
            set: unit(),
            levels: (1..=8).collect(),
            tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ItoParams {
    pub set: Vec<[f64; 2]>,
    /// Cells of the adapted grid, a power of two.
    pub cells: usize,
    /// `running-field`, `constant:<c>`, or `running-fn:<x|x^2|cos>`.
    pub integrand: String,
    /// Function for the Ito formula residual, if any.
    pub formula: Option<String>,
    pub formula_depths: Vec<u32>,
}

impl Default for ItoParams {
    fn default() -> Self {
        Self {
            set: unit(),
            cells: 256,
            integrand: "running-field".into(),
            formula: Some("x^2".into()),
            formula_depths: vec![4, 6, 8],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerChoice {
    Markov,
    Cholesky,
    Both,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralParams {
    pub grid: Vec<f64>,
    pub sampler: SamplerChoice,
    /// Times for the `r` table.
    pub r_table: Vec<f64>,
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self {
            grid: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            sampler: SamplerChoice::Both,
            r_table: vec![0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderParams {
    pub label: String,
    pub times: Vec<f64>,
    /// `(a, b]` per time; `null` stands for an infinite end in JSON, and
    /// `inf`/`-inf` work in TOML.
    pub region: Vec<[Option<f64>; 2]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairingParams {
    pub t: f64,
    /// Mollification widths in grid steps.
    pub widths: Vec<u32>,
    pub grid_step: f64,
    pub replicas: usize,
}

impl Default for PairingParams {
    fn default() -> Self {
        Self {
            t: 1.0,
            widths: vec![16, 8, 4],
            grid_step: 1.0 / 256.0,
            replicas: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceParams {
    /// Explicit cylinders; the standard suite when empty.
    pub cylinders: Vec<CylinderParams>,
    pub cutoff: f64,
    pub depth: u32,
    pub allow_disagreement: bool,
    pub pairing: PairingParams,
}

impl Default for EquivalenceParams {
    fn default() -> Self {
        Self {
            cylinders: Vec::new(),
            cutoff: 32.0,
            depth: 10,
            allow_disagreement: false,
            pairing: PairingParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HermiteParams {
    pub max_degree: usize,
    pub correlations: Vec<f64>,
    /// Random `(psi, A, B)` cases for the bracket identity.
    pub psi_cases: usize,
    pub psi_degree: usize,
    pub domain: Vec<[f64; 2]>,
    pub depth: u32,
}

impl Default for HermiteParams {
    fn default() -> Self {
        Self {
            max_degree: 8,
            correlations: vec![0.0, 0.3, -0.3, 0.9, -0.9],
            psi_cases: 10,
            psi_degree: 4,
            domain: unit(),
            depth: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FourierParams {
    pub domain: Vec<[f64; 2]>,
    pub depth: u32,
    /// Sets for the transform identities.
    pub sets: Vec<Vec<[f64; 2]>>,
    /// Random sets for the kernel Gram witness.
    pub gram_sets: usize,
}

impl Default for FourierParams {
    fn default() -> Self {
        Self {
            domain: vec![[0.0, 2.0]],
            depth: 5,
            sets: vec![vec![[0.0, 1.0]], vec![[1.0, 2.0]], vec![[0.5, 1.5]]],
            gram_sets: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftParams {
    pub domain: Vec<[f64; 2]>,
    pub depth: u32,
    /// Basis coefficients of each shift.
    pub shifts: Vec<Vec<f64>>,
}

impl Default for ShiftParams {
    fn default() -> Self {
        Self {
            domain: unit(),
            depth: 3,
            shifts: vec![vec![0.0, 1.0], vec![0.3, 0.5, -0.4], vec![0.0, 0.0, 0.6, 0.0, 0.5]],
        }
    }
}

/// Kind-specific parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    FieldMoments(FieldMomentsParams),
    Quadvar(QuadvarParams),
    Ito(ItoParams),
    Spectral(SpectralParams),
    Equivalence(EquivalenceParams),
    Hermite(HermiteParams),
    Fourier(FourierParams),
    Shift(ShiftParams),
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replicas: usize,
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub measure: MeasureSpace,
    pub measure_label: String,
    pub params: Params,
}

fn params_of<T: for<'de> Deserialize<'de> + Default>(value: Option<serde_json::Value>) -> Result<T> {
    match value {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v).map_err(|e| Error::Config(format!("params: {e}"))),
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str(&text, is_json(path), base)
    }

    /// Parses and validates a config document.
    pub fn from_str(text: &str, json: bool, base: &Path) -> Result<Self> {
        let raw: RawConfig = parse_str(text, json)?;
        let measure = raw.measure.resolve(base)?;
        let measure_label = match &raw.measure {
            MeasureRef::Builtin(n) => n.clone(),
            MeasureRef::File { file } => file.display().to_string(),
            MeasureRef::Inline(_) => "inline".into(),
        };
        let params = match raw.kind {
            ExperimentKind::FieldMoments => Params::FieldMoments(params_of(raw.params)?),
            ExperimentKind::Quadvar => Params::Quadvar(params_of(raw.params)?),
            ExperimentKind::Ito => Params::Ito(params_of(raw.params)?),
            ExperimentKind::Spectral => Params::Spectral(params_of(raw.params)?),
            ExperimentKind::Equivalence => Params::Equivalence(params_of(raw.params)?),
            ExperimentKind::Hermite => Params::Hermite(params_of(raw.params)?),
            ExperimentKind::Fourier => Params::Fourier(params_of(raw.params)?),
            ExperimentKind::Shift => Params::Shift(params_of(raw.params)?),
        };
        let config = Self {
            kind: raw.kind,
            seed: raw.seed,
            replicas: raw.replicas.unwrap_or(raw.kind.default_replicas()),
            workers: raw.workers,
            out: raw.out.unwrap_or_else(|| PathBuf::from("reports")),
            measure,
            measure_label,
            params,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replicas < 2 {
            return bad(format!("replicas must be at least 2, got {}", self.replicas));
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        match &self.params {
            Params::FieldMoments(p) => {
                to_set(&p.domain)?;
                to_set(&p.set)?;
                for s in &p.covariance_sets {
                    to_set(s)?;
                }
                if p.depth > 20 || p.max_order == 0 || p.max_order > 12 {
                    return bad("field-moments needs depth <= 20 and 1 <= max_order <= 12".into());
                }
            }
            Params::Quadvar(p) => {
                to_set(&p.set)?;
                if p.levels.is_empty() || p.levels.iter().any(|l| *l > 20) {
                    return bad("quadvar levels must be non-empty and <= 20".into());
                }
                if !(p.tolerance > 0.0) {
                    return bad("quadvar tolerance must be positive".into());
                }
            }
            Params::Ito(p) => {
                to_set(&p.set)?;
                if !p.cells.is_power_of_two() || p.cells > 1 << 16 {
                    return bad(format!("ito cells must be a power of two <= 65536, got {}", p.cells));
                }
                if p.formula_depths.iter().any(|d| *d > 16) {
                    return bad("ito formula depths must be <= 16".into());
                }
            }
            Params::Spectral(p) => {
                if p.grid.is_empty() {
                    return bad("spectral grid must be non-empty".into());
                }
            }
            Params::Equivalence(p) => {
                for c in &p.cylinders {
                    if c.times.len() != c.region.len() || c.times.is_empty() {
                        return bad(format!("cylinder {} needs one interval per time", c.label));
                    }
                }
                if !(p.cutoff > 0.0) || p.depth > 16 {
                    return bad("equivalence needs cutoff > 0 and depth <= 16".into());
                }
            }
            Params::Hermite(p) => {
                to_set(&p.domain)?;
                if p.max_degree > 12 || p.psi_degree > crate::hermite::MAX_DEGREE {
                    return bad("hermite degrees too large".into());
                }
                if p.correlations.iter().any(|c| !(c.abs() < 1.0)) {
                    return bad("hermite correlations must lie in (-1, 1)".into());
                }
            }
            Params::Fourier(p) => {
                to_set(&p.domain)?;
                for s in &p.sets {
                    to_set(s)?;
                }
            }
            Params::Shift(p) => {
                to_set(&p.domain)?;
                if p.shifts.iter().any(|s| s.len() > 1usize << p.depth) {
                    return bad("shift has more coefficients than basis functions".into());
                }
            }
        }
        Ok(())
    }
}

/// Converts a config set literal.
pub fn set_from_config(raw: &[[f64; 2]]) -> Result<MeasurableSet> {
    to_set(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve() {
        for name in ["lebesgue", "normalized-lebesgue", "power:0.5", "cauchy-like:1", "dirac", "lebesgue+dirac"] {
            let (d, a) = builtin_density(name).unwrap();
            MeasureSpace::new(d, a, QuadratureConfig::default()).unwrap();
        }
        assert!(builtin_density("power").is_err());
        assert!(builtin_density("nope").is_err());
    }

    #[test]
    fn minimal_toml() {
        let c = ExperimentConfig::from_str("kind = \"quadvar\"\nseed = 3\n", false, Path::new(".")).unwrap();
        assert_eq!(c.kind, ExperimentKind::Quadvar);
        assert_eq!(c.replicas, 100_000);
        assert_eq!(c.params, Params::Quadvar(QuadvarParams::default()));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_str("kind = \"quadvar\"\nbogus = 1\n", false, Path::new(".")).is_err());
        let with_bad_param = "kind = \"quadvar\"\n[params]\nlevels = [1]\nextra = 2\n";
        assert!(ExperimentConfig::from_str(with_bad_param, false, Path::new(".")).is_err());
        assert!(ExperimentConfig::from_str("kind = \"nope\"\n", false, Path::new(".")).is_err());
    }

    #[test]
    fn inline_measure_json() {
        let text = r#"{"kind": "field-moments", "measure": {"density": {"piecewise": [{"a": 0, "b": 1, "coeffs": [0, 2]}]}, "atoms": []}}"#;
        let c = ExperimentConfig::from_str(text, true, Path::new(".")).unwrap();
        let s = MeasurableSet::interval(0.0, 1.0).unwrap();
        assert!((c.measure.measure_of(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measure_file_with_atoms() {
        let mf: MeasureFile = parse_str("density = \"lebesgue\"\natoms = [[0.25, 2.0]]\n", false).unwrap();
        let m = mf.build().unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert!(!m.is_absolutely_continuous());
    }

    #[test]
    fn invalid_ito_cells() {
        let text = "kind = \"ito\"\n[params]\ncells = 100\n";
        assert!(matches!(ExperimentConfig::from_str(text, false, Path::new(".")), Err(Error::Config(_))));
    }
}
