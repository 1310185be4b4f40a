//! Experiment orchestration: configuration, ensemble runs, empirical defect fields against
//! two centerings, the Burgers reference, output files, and the numerical studies shared by
//! the command line and the acceptance run.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adjoint::{adjoint_one, psi_time_derivative, residual, DegreeOneOperator, ResidualReport};
use crate::error::{Error, Result};
use crate::exact::{adjoint_apply_one, build_generator, Parts};
use crate::kmc::{run_ensemble, scaling_check, ScalingPlan, ScalingReport, ScalingRule};
use crate::lattice::{Configuration, LocalFunction, Offset, SiteFunction, Torus};
use crate::measures::{sample_product_with, tilde_eval, DensityProfile, InitialProfile};
use crate::pde::{
    burgers_solve, burgers_time_derivative, loglog_slope, sup_distance, write_trajectory_csv, BurgersCoefficients,
    ContinuumField, SemidiscreteFlow, SemidiscretePath,
};
use crate::rates::{find_alpha0, LocalTable, RateSpec, TransportCoefficients};

/// Resolves `ssep`, `beta:<b>` or a path to a spec document ending in `.toml`.
pub fn resolve_spec(name: &str, d: usize) -> Result<RateSpec> {
    if name.ends_with(".toml") {
        let spec = RateSpec::load_toml(&fs::read_to_string(name)?)?;
        if spec.dim() != d {
            return Err(Error::Dimension { expected: d, got: spec.dim() });
        }
        Ok(spec)
    } else {
        RateSpec::preset(name, d)
    }
}

/// Macroscopic test functions `H(theta)`, depending on `theta_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    Const,
    CosK { k: u32 },
    SinK { k: u32 },
}

impl TestFunction {
    pub fn eval(&self, theta: &[f64]) -> f64 {
        use std::f64::consts::TAU;
        match *self {
            TestFunction::Const => 1.0,
            TestFunction::CosK { k } => (TAU * k as f64 * theta[0]).cos(),
            TestFunction::SinK { k } => (TAU * k as f64 * theta[0]).sin(),
        }
    }

    pub fn sample(&self, torus: &Torus) -> Vec<f64> {
        torus.sites().map(|x| self.eval(&torus.position(x))).collect()
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Const => write!(f, "const"),
            TestFunction::CosK { k } => write!(f, "cos_{k}"),
            TestFunction::SinK { k } => write!(f, "sin_{k}"),
        }
    }
}

fn default_c0() -> f64 {
    1.0
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run_id: String,
    /// `ssep`, `beta:<b>` or a spec file.
    pub spec: String,
    pub d: usize,
    pub n: usize,
    pub scaling: ScalingRule,
    /// Runs even when the regime check fails; the manifest records it.
    #[serde(default)]
    pub override_scaling: bool,
    #[serde(default = "default_c0")]
    pub c0: f64,
    /// Base density; the critical density of the rate spec when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    pub initial: InitialProfile,
    /// `Psi`; the occupation `eta_0` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<LocalTable>,
    pub test_functions: Vec<TestFunction>,
    pub times: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Mesh side of the Burgers reference; a multiple of `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burgers_mesh: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_toml(&fs::read_to_string(path)?)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn observable(&self) -> Result<LocalFunction> {
        match &self.observable {
            Some(t) => t.clone().build(self.d),
            None => Ok(LocalFunction::occupation(Offset::zero(self.d))),
        }
    }

    pub fn plan(&self) -> Result<ScalingPlan> {
        ScalingPlan::from_rule(self.d, self.n, self.scaling)
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }

    fn mesh_side(&self) -> usize {
        self.burgers_mesh.unwrap_or_else(|| self.n * (256 / self.n).max(1).next_power_of_two())
    }
}

/// `local_equilibrium` centers at `E_{nu^n_t}[tau_x Psi]`; `constant_alpha0` at `tilde Psi(alpha0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    LocalEquilibrium,
    ConstantAlpha0,
}

impl fmt::Display for Centering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Centering::LocalEquilibrium => "local_equilibrium",
            Centering::ConstantAlpha0 => "constant_alpha0",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectRow {
    pub t: f64,
    pub test_function: String,
    pub centering: Centering,
    pub mean: f64,
    pub std_error: f64,
    /// `0` for the local-equilibrium centering, `int H v(t)` for the constant one.
    pub reference: f64,
    pub z_score: f64,
}

impl DefectRow {
    pub fn within(&self, bands: f64) -> bool {
        (self.mean - self.reference).abs() <= bands * self.std_error
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub run_id: String,
    pub replicas: usize,
    pub n: usize,
    pub eps: f64,
    pub alpha0: f64,
    pub scaling: ScalingReport,
    pub scaling_overridden: bool,
    pub events: u64,
    pub rows: Vec<DefectRow>,
}

impl EnsembleResult {
    pub fn all_within(&self, bands: f64) -> bool {
        self.rows.iter().all(|r| r.within(bands))
    }
}

/// Ensemble mean and standard error of
/// `(1 / (n^d eps)) sum_x H(x/n) [(tau_x Psi)(eta) - centering(x)]`.
pub fn empirical_defect_field(
    snapshots: &[&Configuration],
    psi: &[SiteFunction],
    centering: &[f64],
    h: &[f64],
    eps: f64,
) -> Result<(f64, f64)> {
    if snapshots.is_empty() {
        return Err(Error::Config("no snapshots at the requested time".into()));
    }
    let values: Vec<f64> = snapshots
        .iter()
        .map(|eta| {
            let size = eta.torus().size() as f64;
            psi.iter().zip(centering).zip(h).map(|((f, c), h)| h * (f.eval(eta) - c)).sum::<f64>() / (size * eps)
        })
        .collect();
    Ok(mean_and_error(&values))
}

/// Sample mean and `s / sqrt(M)`, summed in input order.
pub fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// `int H v dtheta` by the rectangle rule on the mesh.
pub fn burgers_projection(field: &ContinuumField, h: &TestFunction) -> f64 {
    let hs = h.sample(&field.mesh);
    hs.iter().zip(&field.values).map(|(a, b)| a * b).sum::<f64>() / field.values.len() as f64
}

struct RunOutputs {
    dir: PathBuf,
}

impl RunOutputs {
    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    run_id: &'a str,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    config_sha256: String,
    seed: u64,
    replicas: usize,
    scaling_overridden: bool,
    package: &'static str,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaling: Option<ScalingReport>,
}

/// Runs the ensemble and writes `<output_dir>/<run_id>/`. Output files depend only on the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<EnsembleResult> {
    let out = RunOutputs { dir: config.run_dir() };
    fs::create_dir_all(&out.dir)?;
    let _ = fs::remove_file(out.dir.join("FAILED"));
    out.write("config.toml", config.to_toml()?.as_bytes())?;
    let manifest = |status: &str, error: Option<String>, scaling: Option<ScalingReport>| -> Result<Vec<u8>> {
        Ok(toml::to_string(&Manifest {
            run_id: &config.run_id,
            status,
            error,
            config_sha256: config.hash()?,
            seed: config.seed,
            replicas: config.replicas,
            scaling_overridden: config.override_scaling,
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            scaling,
        })?
        .into_bytes())
    };
    match execute(config, &out) {
        Ok(result) => {
            out.write("manifest.toml", &manifest("complete", None, Some(result.scaling.clone()))?)?;
            Ok(result)
        }
        Err(e) => {
            out.write("FAILED", format!("{e}\n").as_bytes())?;
            out.write("manifest.toml", &manifest("failed", Some(e.to_string()), None)?)?;
            Err(e)
        }
    }
}

fn execute(config: &ExperimentConfig, out: &RunOutputs) -> Result<EnsembleResult> {
    if config.replicas < 2 {
        return Err(Error::Config("at least two replicas are needed for a standard error".into()));
    }
    let spec = resolve_spec(&config.spec, config.d)?;
    let plan = config.plan()?;
    let report = scaling_check(&plan, config.c0);
    if !report.passed() {
        if !config.override_scaling {
            return Err(Error::Config(format!(
                "scaling check failed (lower margin {:.3}, upper margin {:.3}); set override_scaling to run anyway",
                report.lower_margin, report.upper_margin
            )));
        }
        log::warn!("scaling check failed for {}; continuing because override_scaling is set", config.run_id);
    }
    let alpha0 = match config.alpha0 {
        Some(a) => a,
        None => find_alpha0(&spec)?,
    };
    let torus = Torus::new(config.d, config.n)?;
    let v0 = config.initial.sample(&torus);
    let start = DensityProfile::perturbed(torus, alpha0, plan.eps, v0.clone())?;
    let psi = config.observable()?;
    let psi_sites: Vec<SiteFunction> = torus.sites().map(|x| psi.anchor(&torus, x)).collect();

    let flow = SemidiscreteFlow::new(&spec, &torus, alpha0, &plan)?;
    let discrete = flow.solve(&v0, &config.times, None)?;
    let mesh = Torus::new(config.d, config.mesh_side())?;
    let tc = TransportCoefficients::at(&spec, alpha0);
    let coeffs = BurgersCoefficients::from_transport(&tc);
    let continuum = burgers_solve(&ContinuumField::from_initial(mesh, &config.initial), &coeffs, &config.times, None)?;
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, discrete.iter().map(|f| (f.t, f.values.as_slice())))?;
    out.write("semidiscrete.csv", &buf)?;
    let lattice_burgers: Vec<Vec<f64>> = continuum.iter().map(|f| f.restrict(&torus)).collect::<Result<_>>()?;
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, config.times.iter().zip(&lattice_burgers).map(|(t, v)| (*t, v.as_slice())))?;
    out.write("burgers.csv", &buf)?;

    let ensemble = run_ensemble(&spec, &plan, &config.times, config.replicas, config.seed, |rng| {
        sample_product_with(&start, rng)
    })?;
    let mut buf = Vec::new();
    ensemble.write_mean_csv(&mut buf)?;
    out.write("mean_occupancy.csv", &buf)?;

    let psi_alpha0 = tilde_eval(&psi, alpha0);
    let mut rows = Vec::new();
    for (k, &t) in config.times.iter().enumerate() {
        let snaps: Vec<&Configuration> = ensemble.snapshots.iter().map(|r| &r[k]).collect();
        let w: Vec<f64> = discrete[k].values.iter().map(|v| alpha0 + plan.eps * v).collect();
        let local: Vec<f64> = psi_sites.iter().map(|f| f.expectation(&w)).collect();
        let constant = vec![psi_alpha0; torus.size()];
        for h in &config.test_functions {
            let hs = h.sample(&torus);
            for (centering, center, reference) in [
                (Centering::LocalEquilibrium, &local, 0.0),
                (Centering::ConstantAlpha0, &constant, burgers_projection(&continuum[k], h)),
            ] {
                let (mean, std_error) = empirical_defect_field(&snaps, &psi_sites, center, &hs, plan.eps)?;
                rows.push(DefectRow {
                    t,
                    test_function: h.to_string(),
                    centering,
                    mean,
                    std_error,
                    reference,
                    z_score: (mean - reference) / std_error,
                });
            }
        }
    }
    out.write("defect.csv", &defect_csv(&rows)?)?;
    Ok(EnsembleResult {
        run_id: config.run_id.clone(),
        replicas: config.replicas,
        n: config.n,
        eps: plan.eps,
        alpha0,
        scaling: report,
        scaling_overridden: config.override_scaling && !scaling_check(&plan, config.c0).passed(),
        events: ensemble.events,
        rows,
    })
}

fn defect_csv(rows: &[DefectRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_defect_csv(path: &Path) -> Result<Vec<DefectRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Plain-text table of defect rows with a band verdict per row.
pub fn format_report(rows: &[DefectRow], bands: f64) -> String {
    let mut s = format!(
        "{:>8} {:>8} {:>18} {:>12} {:>10} {:>12} {:>8}  verdict\n",
        "t", "H", "centering", "mean", "std_error", "reference", "z"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>8} {:>8} {:>18} {:>12.5e} {:>10.3e} {:>12.5e} {:>8.2}  {}\n",
            r.t,
            r.test_function,
            r.centering.to_string(),
            r.mean,
            r.std_error,
            r.reference,
            r.z_score,
            if r.within(bands) { "within" } else { "outside" }
        ));
    }
    s
}

/// One named numerical check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.3e} (tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance
        )
    }
}

/// Largest pointwise gap between the formula and matrix forms of `L^* 1`.
pub fn oracle_gap(spec: &RateSpec, profile: &DensityProfile, scaling: &ScalingPlan, parts: Parts) -> Result<f64> {
    let torus = profile.torus();
    let matrix = build_generator(spec, &torus, scaling, parts, None)?;
    let oracle = adjoint_apply_one(&matrix, profile)?;
    let coeffs = crate::adjoint::compute_coefficients(spec, profile, scaling)?;
    let (s1, s2) = match parts {
        Parts::Symmetric => (1.0, 0.0),
        Parts::Asymmetric => (0.0, 1.0),
        Parts::Both => (1.0, 1.0),
    };
    let n2 = scaling.symmetric_scale() * s1;
    let an = scaling.asymmetric_scale() * s2;
    let rho = profile.values();
    let omega: Vec<Vec<f64>> = (0..matrix.len())
        .map(|i| {
            let c = matrix.configuration(i);
            rho.iter().zip(c.occupancy()).map(|(&r, &b)| (b as f64 - r) / crate::measures::chi(r)).collect()
        })
        .collect();
    let mut gap: f64 = 0.0;
    for (i, w) in omega.iter().enumerate() {
        let mut value = 0.0;
        for dir in &coeffs.directions {
            for ((sites, h1), h2) in dir.window.iter().zip(&dir.h1).zip(&dir.h2) {
                for (mask, (a, b)) in h1.iter().zip(h2).enumerate() {
                    let coef = n2 * a + an * b;
                    if coef == 0.0 {
                        continue;
                    }
                    let mut prod = coef;
                    let mut bits = mask;
                    while bits != 0 {
                        prod *= w[sites[bits.trailing_zeros() as usize]];
                        bits &= bits - 1;
                    }
                    value += prod;
                }
            }
        }
        gap = gap.max((value - oracle[i]).abs());
    }
    Ok(gap)
}

/// Oracle battery on a small ring: formula versus matrix adjoint, constant-profile invariance,
/// detailed balance, stationarity and particle conservation.
pub fn exact_checks(spec: &RateSpec, n: usize, scaling: &ScalingPlan) -> Result<Vec<Check>> {
    use std::f64::consts::TAU;
    let torus = Torus::new(spec.dim(), n)?;
    let cosine = DensityProfile::from_fn(torus, |t| 0.5 + 0.1 * (TAU * t[0]).cos())?;
    let constant = DensityProfile::constant(torus, 0.37)?;
    let mut checks = Vec::new();
    for parts in [Parts::Symmetric, Parts::Asymmetric, Parts::Both] {
        checks.push(Check::at_most(
            format!("adjoint formula vs matrix ({parts:?}, cosine profile)"),
            oracle_gap(spec, &cosine, scaling, parts)?,
            1e-10,
        ));
    }
    let full = build_generator(spec, &torus, scaling, Parts::Both, None)?;
    let sym = build_generator(spec, &torus, scaling, Parts::Symmetric, None)?;
    let lstar = adjoint_apply_one(&full, &constant)?;
    checks.push(Check::at_most(
        "L*1 vanishes for a constant profile",
        lstar.iter().fold(0.0, |m, v| m.max(v.abs())),
        1e-12,
    ));
    let formula = adjoint_one(spec, &constant, scaling)?;
    checks.push(Check::at_most(
        "formula L*1 vanishes for a constant profile",
        formula.degree_one.iter().fold(formula.max_higher(), |m, v| m.max(v.abs())),
        1e-12,
    ));
    checks.push(Check::at_most("detailed balance of the symmetric part", sym.detailed_balance_defect(&constant), 1e-12));
    let nu = full.product_distribution(&constant);
    let mut flow = vec![0.0; nu.len()];
    full.apply_forward(&nu, &mut flow);
    checks.push(Check::at_most(
        "Bernoulli measure is stationary",
        flow.iter().fold(0.0, |m, v| m.max(v.abs())),
        1e-12,
    ));
    checks.push(Check::at_most("row sums vanish", full.max_row_sum(), 1e-9));
    checks.push(Check::at_most(
        "particle number is conserved",
        if full.preserves_particle_number() { 0.0 } else { 1.0 },
        0.0,
    ));
    Ok(checks)
}

/// Residual `L^n` of the Burgers solution at lattice points, for each `n` and time.
pub fn residual_study(
    spec: &RateSpec,
    rule: ScalingRule,
    initial: &InitialProfile,
    ns: &[usize],
    times: &[f64],
    mesh_side: usize,
) -> Result<Vec<ResidualReport>> {
    let alpha0 = find_alpha0(spec)?;
    let coeffs = BurgersCoefficients::from_transport(&TransportCoefficients::at(spec, alpha0));
    let d = spec.dim();
    let mesh = Torus::new(d, mesh_side)?;
    let fields = burgers_solve(&ContinuumField::from_initial(mesh, initial), &coeffs, times, None)?;
    let mut out = Vec::new();
    for &n in ns {
        let torus = Torus::new(d, n)?;
        let plan = ScalingPlan::from_rule(d, n, rule)?;
        let op = DegreeOneOperator::new(spec, &torus)?;
        for (f, &t) in fields.iter().zip(times) {
            let v = f.restrict(&torus)?;
            let dvdt = burgers_time_derivative(f, &coeffs).restrict(&torus)?;
            out.push(residual(&op, alpha0, &v, &dvdt, &plan, t));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub n: usize,
    pub eps: f64,
    /// `eps_n + 1/n`.
    pub rate: f64,
    pub gap: f64,
}

/// Sup-norm distance between the semi-discrete solution and the Burgers solution at time `t`.
pub fn semidiscrete_gap_study(
    spec: &RateSpec,
    rule: ScalingRule,
    initial: &InitialProfile,
    ns: &[usize],
    t: f64,
    mesh_side: usize,
) -> Result<(Vec<GapRow>, f64)> {
    let alpha0 = find_alpha0(spec)?;
    let coeffs = BurgersCoefficients::from_transport(&TransportCoefficients::at(spec, alpha0));
    let d = spec.dim();
    let mesh = Torus::new(d, mesh_side)?;
    let reference = burgers_solve(&ContinuumField::from_initial(mesh, initial), &coeffs, &[t], None)?.remove(0);
    let mut rows = Vec::new();
    for &n in ns {
        let torus = Torus::new(d, n)?;
        let plan = ScalingPlan::from_rule(d, n, rule)?;
        let flow = SemidiscreteFlow::new(spec, &torus, alpha0, &plan)?;
        let v = flow.solve(&initial.sample(&torus), &[t], None)?.remove(0);
        rows.push(GapRow { n, eps: plan.eps, rate: plan.eps + 1.0 / n as f64, gap: sup_distance(&v.values, &reference.restrict(&torus)?) });
    }
    let slope = loglog_slope(&rows.iter().map(|r| r.rate).collect::<Vec<_>>(), &rows.iter().map(|r| r.gap).collect::<Vec<_>>());
    Ok((rows, slope))
}

/// Max norm of the degree-one field of `L^* 1 - d/dt log psi_t` along the semi-discrete flow.
pub fn degree_one_cancellation(
    spec: &RateSpec,
    n: usize,
    rule: ScalingRule,
    initial: &InitialProfile,
    times: &[f64],
) -> Result<f64> {
    let alpha0 = find_alpha0(spec)?;
    let torus = Torus::new(spec.dim(), n)?;
    let plan = ScalingPlan::from_rule(spec.dim(), n, rule)?;
    let flow = SemidiscreteFlow::new(spec, &torus, alpha0, &plan)?;
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let path = SemidiscretePath::new(flow, &initial.sample(&torus), horizon, None)?;
    let mut worst: f64 = 0.0;
    for &t in times {
        let profile = DensityProfile::new(torus, crate::adjoint::ProfilePath::profile(&path, t))?;
        let expansion = adjoint_one(spec, &profile, &plan)?;
        let dpsi = psi_time_derivative(&path, t);
        for (k, d) in expansion.degree_one.iter().zip(&dpsi) {
            worst = worst.max((k - d).abs());
        }
    }
    Ok(worst)
}
