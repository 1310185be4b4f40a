//! Discrete calculus, the viscous Burgers solver on a uniform mesh of the continuous torus,
//! and the semi-discrete lattice flow `dv/dt = a_n sum_j K^n_j`.
//!
//! Both solvers use classical RK4 with a fixed step. The Burgers equation is
//! `dv/dt = sum_j D_jj d_j^2 v - (1/2) sum_j sigma''_j m_j d_j (v^2)`.

use std::io::Write;

use rayon::prelude::*;

use crate::adjoint::{semidiscrete_rhs, DegreeOneOperator, ProfilePath};
use crate::error::{Error, Result};
use crate::kmc::ScalingPlan;
use crate::lattice::Torus;
use crate::measures::InitialProfile;
use crate::rates::{RateSpec, TransportCoefficients};

/// Step fraction of the stability bound used when no step is given.
pub const DEFAULT_CFL: f64 = 0.2;
/// Largest accepted fraction of `h^2 / (d max D)`.
pub const MAX_CFL: f64 = 0.5;

/// Sites beyond which the right-hand sides are evaluated in parallel.
const PAR_THRESHOLD: usize = 4096;

/// `(grad^n_j f)(x) = n [f(x+e_j) - f(x)]`.
pub fn grad_n(torus: &Torus, f: &[f64], j: usize) -> Vec<f64> {
    let n = torus.side() as f64;
    diff(torus, f, j).into_iter().map(|d| n * d).collect()
}

/// `(D_j f)(x) = f(x+e_j) - f(x)`.
pub fn diff(torus: &Torus, f: &[f64], j: usize) -> Vec<f64> {
    torus.sites().map(|x| f[torus.neighbor(x, j)] - f[x]).collect()
}

/// `Delta_n f = n^2 sum_j [f(x+e_j) + f(x-e_j) - 2 f(x)]`.
pub fn laplacian_n(torus: &Torus, f: &[f64]) -> Vec<f64> {
    let n2 = (torus.side() * torus.side()) as f64;
    torus
        .sites()
        .map(|x| {
            (0..torus.dim())
                .map(|j| f[torus.neighbor(x, j)] + f[torus.back_neighbor(x, j)] - 2.0 * f[x])
                .sum::<f64>()
                * n2
        })
        .collect()
}

/// Values of `v^n(t, x)` on the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    pub torus: Torus,
    pub t: f64,
    pub values: Vec<f64>,
}

/// Values of `v(t, theta)` on the mesh `theta = i / N`, stored on a torus of side `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuumField {
    pub mesh: Torus,
    pub t: f64,
    pub values: Vec<f64>,
}

impl ContinuumField {
    pub fn sample(mesh: Torus, f: impl Fn(&[f64]) -> f64) -> Self {
        ContinuumField { mesh, t: 0.0, values: mesh.sites().map(|i| f(&mesh.position(i))).collect() }
    }

    pub fn from_initial(mesh: Torus, initial: &InitialProfile) -> Self {
        ContinuumField { mesh, t: 0.0, values: initial.sample(&mesh) }
    }

    /// `int v dtheta` by the rectangle rule, exact for trigonometric polynomials of low degree.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// Values at the lattice points `x / n`; the mesh side must be a multiple of `n`.
    pub fn restrict(&self, lattice: &Torus) -> Result<Vec<f64>> {
        let (m, n) = (self.mesh.side(), lattice.side());
        if lattice.dim() != self.mesh.dim() || m % n != 0 {
            return Err(Error::Config(format!("mesh of side {m} cannot be restricted to a lattice of side {n}")));
        }
        let k = (m / n) as i64;
        Ok(lattice
            .sites()
            .map(|x| {
                let c: Vec<i64> = lattice.coords(x).iter().map(|&c| c as i64 * k).collect();
                self.values[self.mesh.site(&c)]
            })
            .collect())
    }
}

/// Coefficients of the Burgers equation: diagonal `D`, diagonal `sigma''` and drift `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct BurgersCoefficients {
    pub diffusivity: Vec<f64>,
    pub mobility_second: Vec<f64>,
    pub drift: Vec<f64>,
}

impl BurgersCoefficients {
    pub fn from_transport(tc: &TransportCoefficients) -> Self {
        BurgersCoefficients {
            diffusivity: tc.diffusivity.clone(),
            mobility_second: tc.mobility_second.clone(),
            drift: tc.drift.clone(),
        }
    }

    pub fn heat(d: usize, diffusivity: f64) -> Self {
        BurgersCoefficients { diffusivity: vec![diffusivity; d], mobility_second: vec![0.0; d], drift: vec![0.0; d] }
    }

    fn max_diffusivity(&self) -> f64 {
        self.diffusivity.iter().cloned().fold(0.0, f64::max)
    }

    /// Right-hand side on the mesh: centered second differences and a conservative centered flux.
    pub fn rhs(&self, mesh: &Torus, v: &[f64], out: &mut [f64]) {
        self.rhs_with(&Stencil::new(mesh), v, out)
    }

    fn rhs_with(&self, st: &Stencil, v: &[f64], out: &mut [f64]) {
        let inv_h = st.side as f64;
        let inv_h2 = inv_h * inv_h;
        let point = |x: usize| {
            let mut acc = 0.0;
            for j in 0..st.fwd.len() {
                let f = v[st.fwd[j][x]];
                let b = v[st.back[j][x]];
                acc += self.diffusivity[j] * (f - 2.0 * v[x] + b) * inv_h2;
                let k = 0.5 * self.mobility_second[j] * self.drift[j];
                if k != 0.0 {
                    // F_{x+1/2} - F_{x-1/2} with F_{x+1/2} = k (v_x^2 + v_{x+1}^2) / 2.
                    acc -= k * 0.5 * (f * f - b * b) * inv_h;
                }
            }
            acc
        };
        if v.len() >= PAR_THRESHOLD {
            out.par_iter_mut().enumerate().for_each(|(x, o)| *o = point(x));
        } else {
            out.iter_mut().enumerate().for_each(|(x, o)| *o = point(x));
        }
    }

    /// Largest stable step on a mesh of width `h` is taken as `MAX_CFL h^2 / (d max D)`.
    pub fn step_bound(&self, mesh: &Torus) -> f64 {
        let h = 1.0 / mesh.side() as f64;
        h * h / (mesh.dim() as f64 * self.max_diffusivity())
    }
}

/// Neighbor tables of a mesh, built once per solve.
struct Stencil {
    side: usize,
    fwd: Vec<Vec<usize>>,
    back: Vec<Vec<usize>>,
}

impl Stencil {
    fn new(mesh: &Torus) -> Self {
        Stencil {
            side: mesh.side(),
            fwd: (0..mesh.dim()).map(|j| mesh.sites().map(|x| mesh.neighbor(x, j)).collect()).collect(),
            back: (0..mesh.dim()).map(|j| mesh.sites().map(|x| mesh.back_neighbor(x, j)).collect()).collect(),
        }
    }
}

/// Classical RK4 with fixed step. Each output interval is split into equal steps no larger than `dt`.
fn rk4<F>(rhs: F, y0: &[f64], times: &[f64], dt: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64], &mut [f64]),
{
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("output times must be finite, nonnegative and nondecreasing".into()));
    }
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        let steps = (span / dt).ceil() as usize;
        let h = if steps > 0 { span / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            rhs(&y, &mut k1);
            tmp.iter_mut().zip(&y).zip(&k1).for_each(|((s, y), k)| *s = y + 0.5 * h * k);
            rhs(&tmp, &mut k2);
            tmp.iter_mut().zip(&y).zip(&k2).for_each(|((s, y), k)| *s = y + 0.5 * h * k);
            rhs(&tmp, &mut k3);
            tmp.iter_mut().zip(&y).zip(&k3).for_each(|((s, y), k)| *s = y + h * k);
            rhs(&tmp, &mut k4);
            for i in 0..dim {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        t = target;
        out.push(y.clone());
    }
    Ok(out)
}

fn resolve_dt(dt: Option<f64>, bound: f64) -> Result<f64> {
    match dt {
        None => Ok(DEFAULT_CFL * bound),
        Some(dt) if dt > 0.0 && dt <= MAX_CFL * bound => Ok(dt),
        Some(dt) => Err(Error::Cfl { dt, suggested: DEFAULT_CFL * bound }),
    }
}

/// Solves the Burgers equation from `v0` and returns the field at each of `times`.
pub fn burgers_solve(
    v0: &ContinuumField,
    coeffs: &BurgersCoefficients,
    times: &[f64],
    dt: Option<f64>,
) -> Result<Vec<ContinuumField>> {
    let mesh = v0.mesh;
    if coeffs.diffusivity.len() != mesh.dim() {
        return Err(Error::Dimension { expected: mesh.dim(), got: coeffs.diffusivity.len() });
    }
    if coeffs.diffusivity.iter().any(|d| *d <= 0.0) {
        return Err(Error::Config("diffusivity must be positive".into()));
    }
    let dt = resolve_dt(dt, coeffs.step_bound(&mesh))?;
    let stencil = Stencil::new(&mesh);
    let values = rk4(|y, out| coeffs.rhs_with(&stencil, y, out), &v0.values, times, dt)?;
    Ok(times.iter().zip(values).map(|(&t, values)| ContinuumField { mesh, t, values }).collect())
}

/// Time derivative of the Burgers solution at the given field.
pub fn burgers_time_derivative(field: &ContinuumField, coeffs: &BurgersCoefficients) -> ContinuumField {
    let mut out = vec![0.0; field.values.len()];
    coeffs.rhs(&field.mesh, &field.values, &mut out);
    ContinuumField { mesh: field.mesh, t: field.t, values: out }
}

/// Stability bound of the semi-discrete flow, from the largest effective hopping rate.
pub fn semidiscrete_step_bound(spec: &RateSpec, scaling: &ScalingPlan) -> f64 {
    let n = scaling.n as f64;
    let rate = spec
        .directions()
        .iter()
        .map(|dir| {
            let cmax = dir.rate.table().iter().cloned().fold(0.0, f64::max);
            cmax * (1.0 + scaling.asymmetry_ratio() * dir.drift.abs())
        })
        .fold(0.0, f64::max);
    1.0 / (n * n * spec.dim() as f64 * rate)
}

/// Right-hand side of the semi-discrete flow, reusable across calls.
pub struct SemidiscreteFlow {
    op: DegreeOneOperator,
    pub alpha0: f64,
    pub scaling: ScalingPlan,
    bound: f64,
}

impl SemidiscreteFlow {
    pub fn new(spec: &RateSpec, torus: &Torus, alpha0: f64, scaling: &ScalingPlan) -> Result<Self> {
        if torus.side() != scaling.n || torus.dim() != scaling.d {
            return Err(Error::Config(format!(
                "scaling plan (d = {}, n = {}) does not match the torus (d = {}, n = {})",
                scaling.d,
                scaling.n,
                torus.dim(),
                torus.side()
            )));
        }
        crate::kmc::check_rates_nonnegative(spec, scaling)?;
        Ok(SemidiscreteFlow {
            op: DegreeOneOperator::new(spec, torus)?,
            alpha0,
            scaling: *scaling,
            bound: semidiscrete_step_bound(spec, scaling),
        })
    }

    pub fn torus(&self) -> Torus {
        self.op.torus()
    }

    pub fn rhs(&self, v: &[f64]) -> Vec<f64> {
        semidiscrete_rhs(&self.op, self.alpha0, v, &self.scaling)
    }

    pub fn step_bound(&self) -> f64 {
        self.bound
    }

    pub fn default_dt(&self) -> f64 {
        DEFAULT_CFL * self.bound
    }

    fn check_interior(&self, v: &[f64], t: f64) -> Result<()> {
        let eps = self.scaling.eps;
        if v.iter().any(|x| {
            let w = self.alpha0 + eps * x;
            !(w > 0.0 && w < 1.0)
        }) {
            return Err(Error::ProfileEscaped { t });
        }
        Ok(())
    }

    pub fn solve(&self, v0: &[f64], times: &[f64], dt: Option<f64>) -> Result<Vec<LatticeField>> {
        let dt = resolve_dt(dt, self.bound)?;
        self.check_interior(v0, 0.0)?;
        let values = rk4(|y, out| out.copy_from_slice(&self.rhs(y)), v0, times, dt)?;
        let torus = self.torus();
        let mut fields = Vec::with_capacity(times.len());
        for (&t, values) in times.iter().zip(values) {
            self.check_interior(&values, t)?;
            fields.push(LatticeField { torus, t, values });
        }
        Ok(fields)
    }
}

/// Integrates `dv^n/dt = a_n sum_j K^n_j` from `v0`.
pub fn semidiscrete_solve(
    spec: &RateSpec,
    torus: &Torus,
    alpha0: f64,
    v0: &[f64],
    scaling: &ScalingPlan,
    times: &[f64],
    dt: Option<f64>,
) -> Result<Vec<LatticeField>> {
    SemidiscreteFlow::new(spec, torus, alpha0, scaling)?.solve(v0, times, dt)
}

/// `w(t) = alpha0 + eps v^n(t)` along the semi-discrete flow, stored at every step of size `dt`.
/// Intermediate times take one partial RK4 step from the preceding stored state,
/// and the time derivative is the flow's right-hand side.
pub struct SemidiscretePath {
    flow: SemidiscreteFlow,
    dt: f64,
    states: Vec<Vec<f64>>,
}

impl SemidiscretePath {
    pub fn new(flow: SemidiscreteFlow, v0: &[f64], horizon: f64, dt: Option<f64>) -> Result<Self> {
        let dt = resolve_dt(dt, flow.step_bound())?;
        let steps = (horizon / dt).ceil() as usize;
        let times: Vec<f64> = (1..=steps).map(|k| k as f64 * dt).collect();
        let mut states = vec![v0.to_vec()];
        states.extend(rk4(|y, out| out.copy_from_slice(&flow.rhs(y)), v0, &times, dt)?);
        Ok(SemidiscretePath { flow, dt, states })
    }

    pub fn horizon(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.dt
    }

    /// `v^n(t)`.
    pub fn perturbation(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(0.0, self.horizon());
        let k = ((t / self.dt).floor() as usize).min(self.states.len() - 1);
        let rest = t - k as f64 * self.dt;
        if rest <= 0.0 {
            return self.states[k].clone();
        }
        rk4(|y, out| out.copy_from_slice(&self.flow.rhs(y)), &self.states[k], &[rest], rest)
            .expect("valid step")
            .remove(0)
    }

    pub fn flow(&self) -> &SemidiscreteFlow {
        &self.flow
    }
}

impl ProfilePath for SemidiscretePath {
    fn profile(&self, t: f64) -> Vec<f64> {
        let eps = self.flow.scaling.eps;
        self.perturbation(t).iter().map(|v| self.flow.alpha0 + eps * v).collect()
    }

    fn time_derivative(&self, t: f64) -> Vec<f64> {
        let eps = self.flow.scaling.eps;
        self.flow.rhs(&self.perturbation(t)).iter().map(|d| eps * d).collect()
    }
}

/// CSV `t,site,value`.
pub fn write_trajectory_csv<'a, W: Write>(w: W, rows: impl IntoIterator<Item = (f64, &'a [f64])>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "site", "value"])?;
    for (t, values) in rows {
        for (x, v) in values.iter().enumerate() {
            out.write_record([t.to_string(), x.to_string(), v.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Largest absolute difference between two equally long fields.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}
