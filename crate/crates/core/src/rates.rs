//! Speed-change rate specs, the gradient condition and transport coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::tilde_derivative_via_fourier;
use crate::lattice::{LocalFunction, Offset};
use crate::measures::{chi, tilde_eval, tilde_poly, Polynomial};

/// Tolerance for the pointwise gradient identity.
pub const GRADIENT_TOL: f64 = 1e-12;
/// Tolerance for the Einstein relation and diagonality.
pub const EINSTEIN_TOL: f64 = 1e-10;
/// Tolerance for a common critical density across directions.
pub const ALPHA0_TOL: f64 = 1e-12;

/// Finitely supported signed measure `scale * sum_k w_k delta_{y_k}` with integer weights,
/// so that a vanishing total mass is checked exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedMeasure {
    pub scale: f64,
    pub weights: Vec<(Offset, i64)>,
}

impl SignedMeasure {
    /// `scale (delta_0 - delta_{e_j})`.
    pub fn bond(d: usize, j: usize, scale: f64) -> Self {
        SignedMeasure { scale, weights: vec![(Offset::zero(d), 1), (Offset::unit(d, j), -1)] }
    }

    pub fn total_weight(&self) -> i64 {
        self.weights.iter().map(|(_, w)| w).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Offset, f64)> + '_ {
        self.weights.iter().map(move |(y, w)| (y, self.scale * *w as f64))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientTerm {
    pub measure: SignedMeasure,
    pub g: LocalFunction,
}

/// Rates, drift and gradient decomposition for one direction.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSpec {
    pub rate: LocalFunction,
    pub drift: f64,
    pub decomposition: Vec<GradientTerm>,
}

impl DirectionSpec {
    /// `c_j(eta) (eta_0 - eta_{e_j})` minus the gradient form, on the joint support.
    fn gradient_defect(&self, d: usize, j: usize) -> LocalFunction {
        let current = LocalFunction::occupation(Offset::zero(d)).sub(&LocalFunction::occupation(Offset::unit(d, j)));
        let mut defect = self.rate.mul(&current);
        for term in &self.decomposition {
            for (y, w) in term.measure.iter() {
                defect = defect.sub(&term.g.translate(y).scale(w));
            }
        }
        defect
    }

    /// Offsets read by `c_j`, `g_{j,p}` and `tau_y g_{j,p}`, together with `0` and `e_j`.
    pub fn footprint(&self, d: usize, j: usize) -> Vec<Offset> {
        let mut out = vec![Offset::zero(d), Offset::unit(d, j)];
        let mut push = |o: Offset| {
            if !out.contains(&o) {
                out.push(o);
            }
        };
        for o in self.rate.support() {
            push(o.clone());
        }
        for term in &self.decomposition {
            for o in term.g.support() {
                push(o.clone());
                for (y, _) in &term.measure.weights {
                    push(o.add(y));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateSpec {
    pub name: String,
    d: usize,
    directions: Vec<DirectionSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clause {
    /// A signed measure has nonzero total mass.
    MeanZero,
    /// The rate reads the exchanged pair.
    PairIndependence,
    /// The gradient identity fails.
    GradientIdentity,
    /// The rate is negative.
    Nonnegative,
    /// Dimensions or supports are inconsistent.
    Shape,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub direction: usize,
    pub clause: Clause,
    pub detail: String,
    /// Occupations at the offending offsets.
    pub witness: Vec<(Offset, u8)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub failures: Vec<Failure>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn failed(&self, clause: Clause) -> bool {
        self.failures.iter().any(|f| f.clause == clause)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            return writeln!(f, "PASS all clauses");
        }
        for fail in &self.failures {
            write!(f, "FAIL direction {} {:?}: {}", fail.direction + 1, fail.clause, fail.detail)?;
            if !fail.witness.is_empty() {
                write!(f, " at")?;
                for (o, b) in &fail.witness {
                    write!(f, " eta{o}={b}")?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn witness(f: &LocalFunction, pattern: usize) -> Vec<(Offset, u8)> {
    f.support().iter().enumerate().map(|(i, o)| (o.clone(), ((pattern >> i) & 1) as u8)).collect()
}

pub fn validate_rate_spec(spec: &RateSpec) -> ValidationReport {
    let d = spec.d;
    let mut failures = Vec::new();
    for (j, dir) in spec.directions.iter().enumerate() {
        let mut fail = |clause, detail: String, witness| failures.push(Failure { direction: j, clause, detail, witness });
        if dir.rate.dim() != d || dir.decomposition.iter().any(|t| t.g.dim() != d) {
            fail(Clause::Shape, "local functions have the wrong dimension".into(), Vec::new());
            continue;
        }
        for (p, term) in dir.decomposition.iter().enumerate() {
            let total = term.measure.total_weight();
            if total != 0 && term.measure.scale != 0.0 {
                fail(Clause::MeanZero, format!("term {} has total mass {}", p + 1, total as f64 * term.measure.scale), Vec::new());
            }
        }
        for o in [Offset::zero(d), Offset::unit(d, j)] {
            if dir.rate.depends_on(&o) {
                let i = dir.rate.support().iter().position(|s| *s == o).expect("depends implies support");
                let p = (0..dir.rate.table().len())
                    .find(|&p| p >> i & 1 == 0 && dir.rate.value(p) != dir.rate.value(p | (1 << i)))
                    .expect("some pattern differs");
                fail(Clause::PairIndependence, format!("rate depends on eta{o}"), witness(&dir.rate, p));
            }
        }
        if let Some(p) = (0..dir.rate.table().len()).find(|&p| dir.rate.value(p) < 0.0) {
            fail(Clause::Nonnegative, format!("rate {} < 0", dir.rate.value(p)), witness(&dir.rate, p));
        }
        let defect = dir.gradient_defect(d, j);
        if let Some(p) = (0..defect.table().len()).find(|&p| defect.value(p).abs() > GRADIENT_TOL) {
            fail(Clause::GradientIdentity, format!("identity off by {:e}", defect.value(p)), witness(&defect, p));
        }
    }
    ValidationReport { failures }
}

impl RateSpec {
    pub fn new(name: impl Into<String>, d: usize, directions: Vec<DirectionSpec>) -> Result<Self> {
        if directions.len() != d {
            return Err(Error::RateSpec(format!("{} directions given for d = {d}", directions.len())));
        }
        Ok(RateSpec { name: name.into(), d, directions })
    }

    /// Builds and validates, reporting the first failed clause.
    pub fn validated(name: impl Into<String>, d: usize, directions: Vec<DirectionSpec>) -> Result<Self> {
        let spec = RateSpec::new(name, d, directions)?;
        spec.ensure_valid()?;
        Ok(spec)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_rate_spec(self);
        if report.passed() {
            Ok(())
        } else {
            Err(Error::RateSpec(format!("{}: {}", self.name, report.to_string().trim_end())))
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn directions(&self) -> &[DirectionSpec] {
        &self.directions
    }

    pub fn direction(&self, j: usize) -> &DirectionSpec {
        &self.directions[j]
    }

    pub fn drift(&self) -> Vec<f64> {
        self.directions.iter().map(|dir| dir.drift).collect()
    }

    /// Same rates with every drift replaced.
    pub fn with_drift(&self, drift: &[f64]) -> RateSpec {
        let mut out = self.clone();
        for (dir, &m) in out.directions.iter_mut().zip(drift) {
            dir.drift = m;
        }
        out
    }

    /// Largest sup-norm radius of any rate support.
    pub fn rate_radius(&self) -> u32 {
        self.directions.iter().map(|dir| dir.rate.radius().max(1)).max().unwrap_or(1)
    }

    /// Largest radius of the offsets involved in any gradient identity.
    pub fn footprint_radius(&self) -> u32 {
        (0..self.d)
            .flat_map(|j| self.directions[j].footprint(self.d, j))
            .map(|o| o.linf())
            .max()
            .unwrap_or(1)
    }

    /// Simple exclusion: `c_j = 1`, `m_j = 1`, `g = eta_0`.
    pub fn ssep(d: usize) -> Self {
        let directions = (0..d).map(|j| ssep_direction(d, j, 1.0)).collect();
        RateSpec::validated("ssep", d, directions).expect("preset is valid")
    }

    /// One-dimensional environment model `c = 1 + beta (eta_{-1} + eta_2)`.
    pub fn beta_environment(beta: f64) -> Self {
        RateSpec::validated(format!("beta:{beta}"), 1, vec![beta_direction(1, 0, beta, 1.0)]).expect("preset is valid")
    }

    /// Presets by name: `ssep` or `beta:<value>` (the latter only for `d = 1`).
    pub fn preset(name: &str, d: usize) -> Result<Self> {
        if name == "ssep" {
            return Ok(RateSpec::ssep(d));
        }
        if let Some(b) = name.strip_prefix("beta:") {
            let beta: f64 = b.parse().map_err(|_| Error::RateSpec(format!("bad beta in {name:?}")))?;
            if d != 1 {
                return Err(Error::RateSpec("the beta preset is one-dimensional".into()));
            }
            if beta < 0.0 {
                return Err(Error::RateSpec("beta must be nonnegative".into()));
            }
            return Ok(RateSpec::beta_environment(beta));
        }
        Err(Error::RateSpec(format!("unknown preset {name:?}")))
    }
}

/// Simple exclusion rates along `e_j`.
pub fn ssep_direction(d: usize, j: usize, drift: f64) -> DirectionSpec {
    DirectionSpec {
        rate: LocalFunction::constant(d, 1.0),
        drift,
        decomposition: vec![GradientTerm { measure: SignedMeasure::bond(d, j, 1.0), g: LocalFunction::occupation(Offset::zero(d)) }],
    }
}

/// `c = 1 + beta (eta_{-e_j} + eta_{2 e_j})` with its two-term decomposition.
pub fn beta_direction(d: usize, j: usize, beta: f64, drift: f64) -> DirectionSpec {
    let at = |k| Offset::along(d, j, k);
    let rate = LocalFunction::from_fn(d, vec![at(-1), at(2)], |q| 1.0 + beta * (q[0] + q[1]) as f64).expect("two sites");
    let g2 = LocalFunction::from_fn(d, vec![at(-1), at(0), at(1)], |q| {
        (q[0] * q[1] + q[1] * q[2]) as f64 - (q[0] * q[2]) as f64
    })
    .expect("three sites");
    DirectionSpec {
        rate,
        drift,
        decomposition: vec![
            GradientTerm { measure: SignedMeasure::bond(d, j, 1.0), g: LocalFunction::occupation(Offset::zero(d)) },
            GradientTerm { measure: SignedMeasure::bond(d, j, beta), g: g2 },
        ],
    }
}

/// `g~_{j,p}` as exact polynomials, computed once.
fn g_polys(spec: &RateSpec, j: usize) -> Vec<Polynomial> {
    spec.directions[j].decomposition.iter().map(|t| tilde_poly(&t.g)).collect()
}

/// `D_p(j,k) = -sum_y y_k m_{j,p}(y)`.
fn d_p(term: &GradientTerm, k: usize) -> f64 {
    -term.measure.iter().map(|(y, w)| y.0[k] as f64 * w).sum::<f64>()
}

/// `D_{jk}` as a polynomial in the density.
pub fn diffusivity_poly(spec: &RateSpec, j: usize, k: usize) -> Polynomial {
    spec.directions[j]
        .decomposition
        .iter()
        .zip(g_polys(spec, j))
        .fold(Polynomial::new(vec![0.0]), |acc, (term, g)| acc.add(&g.derivative().scale(d_p(term, k))))
}

/// Diffusivity matrix `D(rho)`.
pub fn diffusivity(spec: &RateSpec, rho: f64) -> Vec<Vec<f64>> {
    (0..spec.d).map(|j| (0..spec.d).map(|k| diffusivity_poly(spec, j, k).eval(rho)).collect()).collect()
}

/// Same matrix with `g~'` computed from first Fourier coefficients instead of polynomials.
pub fn diffusivity_via_fourier(spec: &RateSpec, rho: f64) -> Vec<Vec<f64>> {
    (0..spec.d)
        .map(|j| {
            (0..spec.d)
                .map(|k| {
                    spec.directions[j]
                        .decomposition
                        .iter()
                        .map(|t| d_p(t, k) * tilde_derivative_via_fourier(&t.g, rho))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// `sigma_{jj}` as a polynomial: `rho (1 - rho) c~_j(rho)`.
pub fn mobility_poly(spec: &RateSpec, j: usize) -> Polynomial {
    Polynomial::new(vec![0.0, 1.0, -1.0]).mul(&tilde_poly(&spec.directions[j].rate))
}

/// Diagonal of the mobility matrix.
pub fn mobility(spec: &RateSpec, rho: f64) -> Vec<f64> {
    spec.directions.iter().map(|dir| chi(rho) * tilde_eval(&dir.rate, rho)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EinsteinViolation {
    pub j: usize,
    pub k: usize,
    pub rho: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EinsteinReport {
    pub max_deviation: f64,
    pub max_off_diagonal: f64,
    pub violations: Vec<EinsteinViolation>,
}

impl EinsteinReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `sigma_jj / chi = D_jj` and `D_jk = 0` for `j != k` on the grid.
/// At `rho` in `{0, 1}` the ratio is replaced by its limit `c~_j(rho)`.
pub fn einstein_check(spec: &RateSpec, grid: &[f64]) -> EinsteinReport {
    let mut report = EinsteinReport::default();
    for &rho in grid {
        let dm = diffusivity(spec, rho);
        for j in 0..spec.d {
            let ratio = if rho > 0.0 && rho < 1.0 {
                mobility(spec, rho)[j] / chi(rho)
            } else {
                tilde_eval(&spec.directions[j].rate, rho)
            };
            for k in 0..spec.d {
                let dev = if j == k { (ratio - dm[j][j]).abs() } else { dm[j][k].abs() };
                if j == k {
                    report.max_deviation = report.max_deviation.max(dev);
                } else {
                    report.max_off_diagonal = report.max_off_diagonal.max(dev);
                }
                if dev > EINSTEIN_TOL {
                    report.violations.push(EinsteinViolation { j, k, rho, deviation: dev });
                }
            }
        }
    }
    report
}

/// Uniform grid of `points` densities on `[0, 1]`.
pub fn density_grid(points: usize) -> Vec<f64> {
    (0..points).map(|k| k as f64 / (points - 1) as f64).collect()
}

/// Roots of `sigma'_{jj}` in `(0,1)`, per direction.
pub fn critical_roots(spec: &RateSpec) -> Vec<Vec<f64>> {
    (0..spec.d).map(|j| mobility_poly(spec, j).derivative().roots_in(0.0, 1.0, 4096)).collect()
}

/// Density where every `sigma'_{jj}` vanishes.
pub fn find_alpha0(spec: &RateSpec) -> Result<f64> {
    let roots = critical_roots(spec);
    if roots.iter().any(Vec::is_empty) {
        return Err(Error::NoCommonCriticalDensity { roots });
    }
    for &r in &roots[0] {
        if roots[1..].iter().all(|rs| rs.iter().any(|s| (s - r).abs() <= ALPHA0_TOL)) {
            return Ok(r);
        }
    }
    Err(Error::NoCommonCriticalDensity { roots })
}

/// Coefficients of the limiting Burgers equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportCoefficients {
    pub alpha0: f64,
    /// Diagonal of `D(alpha0)`.
    pub diffusivity: Vec<f64>,
    /// Diagonal of `sigma(alpha0)`.
    pub mobility: Vec<f64>,
    /// Diagonal of `sigma''(alpha0)`.
    pub mobility_second: Vec<f64>,
    pub drift: Vec<f64>,
    pub chi: f64,
}

impl TransportCoefficients {
    pub fn at_critical(spec: &RateSpec) -> Result<Self> {
        let alpha0 = find_alpha0(spec)?;
        Ok(TransportCoefficients::at(spec, alpha0))
    }

    pub fn at(spec: &RateSpec, alpha0: f64) -> Self {
        let dm = diffusivity(spec, alpha0);
        TransportCoefficients {
            alpha0,
            diffusivity: (0..spec.d).map(|j| dm[j][j]).collect(),
            mobility: mobility(spec, alpha0),
            mobility_second: (0..spec.d).map(|j| mobility_poly(spec, j).derivative().derivative().eval(alpha0)).collect(),
            drift: spec.drift(),
            chi: chi(alpha0),
        }
    }
}

/// File form of a local function: offsets and a truth table over their occupation patterns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalTable {
    pub support: Vec<Vec<i32>>,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightFile {
    offset: Vec<i32>,
    weight: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermFile {
    #[serde(default = "one")]
    scale: f64,
    measure: Vec<WeightFile>,
    g: LocalTable,
}

fn one() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectionFile {
    drift: f64,
    rate: LocalTable,
    decomposition: Vec<TermFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    name: String,
    d: usize,
    direction: Vec<DirectionFile>,
}

impl LocalTable {
    pub fn from_fn(f: &LocalFunction) -> Self {
        LocalTable { support: f.support().iter().map(|o| o.0.clone()).collect(), values: f.table().to_vec() }
    }

    pub fn build(self, d: usize) -> Result<LocalFunction> {
        LocalFunction::new(d, self.support.into_iter().map(Offset).collect(), self.values)
            .map_err(|e| Error::RateSpec(e.to_string()))
    }
}

impl RateSpec {
    /// Parses a spec document without validating it.
    pub fn parse_toml(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text)?;
        let d = file.d;
        let directions = file
            .direction
            .into_iter()
            .map(|dir| {
                Ok(DirectionSpec {
                    rate: dir.rate.build(d)?,
                    drift: dir.drift,
                    decomposition: dir
                        .decomposition
                        .into_iter()
                        .map(|t| {
                            if t.measure.iter().any(|w| w.offset.len() != d) {
                                return Err(Error::RateSpec("measure offset has the wrong dimension".into()));
                            }
                            Ok(GradientTerm {
                                measure: SignedMeasure {
                                    scale: t.scale,
                                    weights: t.measure.into_iter().map(|w| (Offset(w.offset), w.weight)).collect(),
                                },
                                g: t.g.build(d)?,
                            })
                        })
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        RateSpec::new(file.name, d, directions)
    }

    /// Parses and validates.
    pub fn load_toml(text: &str) -> Result<Self> {
        let spec = RateSpec::parse_toml(text)?;
        spec.ensure_valid()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        let file = SpecFile {
            name: self.name.clone(),
            d: self.d,
            direction: self
                .directions
                .iter()
                .map(|dir| DirectionFile {
                    drift: dir.drift,
                    rate: LocalTable::from_fn(&dir.rate),
                    decomposition: dir
                        .decomposition
                        .iter()
                        .map(|t| TermFile {
                            scale: t.measure.scale,
                            measure: t.measure.weights.iter().map(|(o, w)| WeightFile { offset: o.0.clone(), weight: *w }).collect(),
                            g: LocalTable::from_fn(&t.g),
                        })
                        .collect(),
                })
                .collect(),
        };
        Ok(toml::to_string(&file)?)
    }
}
