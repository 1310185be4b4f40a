//! Explicit expansion of `L^* 1` in `L^2(nu_rho)` for `L = n^2 L^S + a_n n L^T`,
//! the time derivative of `log psi_t`, the semi-discrete right-hand side and its residual.
//!
//! Per direction `j` and site `x` the expansion uses
//!
//! * `A(x) = (chi(x) + chi(x+e)) / (chi(x) chi(x+e))`,
//! * `C(x) = m rho(x) (1 - rho(x+e))` and `I(x) = E[tau_x c] C(x)`,
//! * `B1_p(x) = 1/2 sum_y m_p(y) A(x-y) D rho(x-y)`, `B2_p(x) = -1/2 sum_y m_p(y) A(x-y) C(x-y)`,
//! * `E1 = A (D rho)^2 / 2`, `E2 = -A D rho C / 2`,
//! * `F1 = D(chi o rho) D rho / (2 chi(x+e))`, `G1 = D(chi o rho) D rho / (2 chi(x))`,
//!   with `F2`, `G2` obtained by replacing the outer `D rho` with `-C`,
//!
//! where `D` is the forward difference along `e_j`. With `c(x, A)` and `g_p(x, A)` the Fourier
//! coefficients of `tau_x c_j` and `tau_x g_{j,p}`,
//!
//! ```text
//! H1(x,A) = E1 c(x,A) + sum_p B1_p(x) g_p(x,A) + J1(x,A)
//! J1(x,A) = -[x, x+e in A] (D rho)^2 c(x, A - {x,x+e})
//!           + [x in A] F1 c(x, A - {x}) + [x+e in A] G1 c(x, A - {x+e})
//! ```
//!
//! and likewise for `H2`, `J2` (whose first term is `+ D rho C c(x, A - {x,x+e})`). The symmetric
//! part contributes `n^2 sum_{x,A} H1(x,A) omega(A)` and the asymmetric part `a_n n sum H2 omega(A)`.
//! Collecting the parts of degree one gives
//! `K(x) = n^2 (E[j_{x-e,x}] - E[j_{x,x+e}]) - a_n n (I(x) - I(x-e))`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::{forward, site_coefficients};
use crate::kmc::ScalingPlan;
use crate::lattice::{Configuration, LocalFunction, Offset, Site, SiteFunction, Torus};
use crate::measures::{chi, DensityProfile};
use crate::rates::{RateSpec, TransportCoefficients};

/// A time-dependent density profile on the lattice.
pub trait ProfilePath: Sync {
    fn profile(&self, t: f64) -> Vec<f64>;
    fn time_derivative(&self, t: f64) -> Vec<f64>;
}

/// A profile that does not move.
pub struct StaticPath(pub Vec<f64>);

impl ProfilePath for StaticPath {
    fn profile(&self, _t: f64) -> Vec<f64> {
        self.0.clone()
    }

    fn time_derivative(&self, _t: f64) -> Vec<f64> {
        vec![0.0; self.0.len()]
    }
}

/// Analytic path with an analytic time derivative.
pub struct AnalyticPath<F, G> {
    pub value: F,
    pub derivative: G,
}

impl<F, G> ProfilePath for AnalyticPath<F, G>
where
    F: Fn(f64) -> Vec<f64> + Sync,
    G: Fn(f64) -> Vec<f64> + Sync,
{
    fn profile(&self, t: f64) -> Vec<f64> {
        (self.value)(t)
    }

    fn time_derivative(&self, t: f64) -> Vec<f64> {
        (self.derivative)(t)
    }
}

/// Path given only by values; the derivative is a centered difference with step `h`.
pub struct DifferencedPath<F> {
    pub value: F,
    pub h: f64,
}

impl<F: Fn(f64) -> Vec<f64> + Sync> ProfilePath for DifferencedPath<F> {
    fn profile(&self, t: f64) -> Vec<f64> {
        (self.value)(t)
    }

    fn time_derivative(&self, t: f64) -> Vec<f64> {
        let a = (self.value)(t + self.h);
        let b = (self.value)(t - self.h);
        a.iter().zip(&b).map(|(p, q)| (p - q) / (2.0 * self.h)).collect()
    }
}

/// Degree-one field of `d/dt log psi_t`, i.e. the coefficients of `omega_x`.
pub fn psi_time_derivative(path: &dyn ProfilePath, t: f64) -> Vec<f64> {
    path.time_derivative(t)
}

/// Coefficient families of one direction.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionCoefficients {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub i: Vec<f64>,
    /// `E[tau_x c_j]`.
    pub mean_rate: Vec<f64>,
    /// `B1[p][x]`.
    pub b1: Vec<Vec<f64>>,
    pub b2: Vec<Vec<f64>>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    /// Sites of `W_j(x)`, the union of the supports of `tau_x c_j`, `tau_x g_{j,p}` and `{x, x+e_j}`.
    pub window: Vec<Vec<Site>>,
    /// `H1(x, A)` indexed by bitmasks over `window[x]`, every degree included.
    pub h1: Vec<Vec<f64>>,
    pub h2: Vec<Vec<f64>>,
    /// `K_j(x)` with the generator scalings applied.
    pub k: Vec<f64>,
    /// `H_j(x, A) = n^2 H1 + a_n n H2` for `|A| >= 2`, as `(mask, value)` pairs over `window[x]`.
    pub h: Vec<Vec<(usize, f64)>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdjointCoefficients {
    pub torus: Torus,
    pub scaling: ScalingPlan,
    pub rho: Vec<f64>,
    pub directions: Vec<DirectionCoefficients>,
}

/// `L^* 1 = sum_x K(x) omega_x + sum_{x, |A| >= 2} H(x, A) omega(A)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointExpansion {
    pub rho: Vec<f64>,
    /// `sum_j K_j(x)`.
    pub degree_one: Vec<f64>,
    /// Per direction and site: window sites and higher-degree coefficients.
    pub higher: Vec<Vec<(Vec<Site>, Vec<(usize, f64)>)>>,
}

impl AdjointExpansion {
    fn omegas(&self, config: &Configuration) -> Vec<f64> {
        self.rho
            .iter()
            .zip(config.occupancy())
            .map(|(&r, &b)| (b as f64 - r) / chi(r))
            .collect()
    }

    pub fn evaluate(&self, config: &Configuration) -> f64 {
        let w = self.omegas(config);
        self.degree_one.iter().zip(&w).map(|(k, o)| k * o).sum::<f64>() + self.higher_part_with(&w)
    }

    /// Contribution of the terms of degree at least two.
    pub fn higher_part(&self, config: &Configuration) -> f64 {
        self.higher_part_with(&self.omegas(config))
    }

    fn higher_part_with(&self, w: &[f64]) -> f64 {
        let mut total = 0.0;
        for dir in &self.higher {
            for (sites, terms) in dir {
                for &(mask, h) in terms {
                    let mut prod = h;
                    let mut bits = mask;
                    while bits != 0 {
                        prod *= w[sites[bits.trailing_zeros() as usize]];
                        bits &= bits - 1;
                    }
                    total += prod;
                }
            }
        }
        total
    }

    /// Largest `|H(x, A)|` over the stored higher-degree coefficients.
    pub fn max_higher(&self) -> f64 {
        self.higher.iter().flatten().flat_map(|(_, t)| t.iter().map(|(_, h)| h.abs())).fold(0.0, f64::max)
    }
}

/// Translates the bitmask of an anchored function into a bitmask over `window`.
fn remap(sites: &[Site], window: &[Site]) -> Vec<usize> {
    sites.iter().map(|s| 1usize << window.iter().position(|w| w == s).expect("window covers support")).collect()
}

fn widen(mask: usize, bits: &[usize]) -> usize {
    bits.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).fold(0, |acc, (_, b)| acc | b)
}

/// Expected rates `E_{nu_rho}[tau_x c_j]` and anchored rate functions.
struct RatePlan {
    anchored: Vec<Vec<SiteFunction>>,
}

impl RatePlan {
    fn new(spec: &RateSpec, torus: &Torus) -> Self {
        RatePlan { anchored: crate::exact::anchored_rates(spec, torus) }
    }

    fn mean(&self, j: usize, x: Site, rho: &[f64]) -> f64 {
        self.anchored[j][x].expectation(rho)
    }
}

fn validate(spec: &RateSpec, profile: &DensityProfile) -> Result<Torus> {
    let torus = profile.torus();
    if spec.dim() != torus.dim() {
        return Err(Error::Dimension { expected: torus.dim(), got: spec.dim() });
    }
    profile.require_interior()?;
    Ok(torus)
}

/// All coefficient families for the profile `rho`.
pub fn compute_coefficients(spec: &RateSpec, profile: &DensityProfile, scaling: &ScalingPlan) -> Result<AdjointCoefficients> {
    let torus = validate(spec, profile)?;
    let rho = profile.values();
    let n2 = scaling.symmetric_scale();
    let an = scaling.asymmetric_scale();
    let plan = RatePlan::new(spec, &torus);
    let mut directions = Vec::with_capacity(spec.dim());
    for j in 0..spec.dim() {
        let dir = spec.direction(j);
        let e = Offset::unit(spec.dim(), j);
        let fwd = |x: Site| torus.neighbor(x, j);
        let sites: Vec<Site> = torus.sites().collect();
        let chi_of = |x: Site| chi(rho[x]);
        let drho: Vec<f64> = sites.iter().map(|&x| rho[fwd(x)] - rho[x]).collect();
        let dchi: Vec<f64> = sites.iter().map(|&x| chi_of(fwd(x)) - chi_of(x)).collect();
        let a: Vec<f64> = sites.iter().map(|&x| (chi_of(x) + chi_of(fwd(x))) / (chi_of(x) * chi_of(fwd(x)))).collect();
        let c: Vec<f64> = sites.iter().map(|&x| dir.drift * rho[x] * (1.0 - rho[fwd(x)])).collect();
        let mean_rate: Vec<f64> = sites.iter().map(|&x| plan.mean(j, x, rho)).collect();
        let i: Vec<f64> = mean_rate.iter().zip(&c).map(|(m, c)| m * c).collect();
        let b = |outer: &dyn Fn(Site) -> f64, p: usize| -> Vec<f64> {
            sites
                .iter()
                .map(|&x| {
                    dir.decomposition[p]
                        .measure
                        .iter()
                        .map(|(y, w)| {
                            let z = torus.shift(x, &y.neg());
                            0.5 * w * a[z] * outer(z)
                        })
                        .sum()
                })
                .collect()
        };
        let np = dir.decomposition.len();
        let b1: Vec<Vec<f64>> = (0..np).map(|p| b(&|z| drho[z], p)).collect();
        let b2: Vec<Vec<f64>> = (0..np).map(|p| b(&|z| -c[z], p)).collect();
        let e1: Vec<f64> = sites.iter().map(|&x| 0.5 * a[x] * drho[x] * drho[x]).collect();
        let e2: Vec<f64> = sites.iter().map(|&x| -0.5 * a[x] * drho[x] * c[x]).collect();
        let f1: Vec<f64> = sites.iter().map(|&x| dchi[x] * drho[x] / (2.0 * chi_of(fwd(x)))).collect();
        let g1: Vec<f64> = sites.iter().map(|&x| dchi[x] * drho[x] / (2.0 * chi_of(x))).collect();
        let f2: Vec<f64> = sites.iter().map(|&x| -dchi[x] * c[x] / (2.0 * chi_of(fwd(x)))).collect();
        let g2: Vec<f64> = sites.iter().map(|&x| -dchi[x] * c[x] / (2.0 * chi_of(x))).collect();

        let mut offsets: Vec<Offset> = vec![Offset::zero(spec.dim()), e.clone()];
        for o in dir.rate.support().iter().chain(dir.decomposition.iter().flat_map(|t| t.g.support())) {
            if !offsets.contains(o) {
                offsets.push(o.clone());
            }
        }
        let footprint = LocalFunction::new(spec.dim(), offsets.clone(), vec![0.0; 1 << offsets.len()])?;

        let per_site: Vec<Result<(Vec<Site>, Vec<f64>, Vec<f64>)>> = sites
            .par_iter()
            .map(|&x| {
                let window = footprint.anchor(&torus, x).sites;
                let width = 1usize << window.len();
                let bx = 1usize << window.iter().position(|&s| s == x).expect("x in window");
                let bxe = 1usize << window.iter().position(|&s| s == fwd(x)).expect("x+e in window");
                let rate = &plan.anchored[j][x];
                let cbits = remap(&rate.sites, &window);
                let ccoef = site_coefficients(rate, rho);
                let mut h1 = vec![0.0; width];
                let mut h2 = vec![0.0; width];
                for (m, &cc) in ccoef.iter().enumerate() {
                    if cc == 0.0 {
                        continue;
                    }
                    let wm = widen(m, &cbits);
                    if wm & (bx | bxe) != 0 {
                        return Err(Error::Sizing { axis: j, width: window.len(), side: torus.side() });
                    }
                    h1[wm] += e1[x] * cc;
                    h1[wm | bx] += f1[x] * cc;
                    h1[wm | bxe] += g1[x] * cc;
                    h1[wm | bx | bxe] -= drho[x] * drho[x] * cc;
                    h2[wm] += e2[x] * cc;
                    h2[wm | bx] += f2[x] * cc;
                    h2[wm | bxe] += g2[x] * cc;
                    h2[wm | bx | bxe] += drho[x] * c[x] * cc;
                }
                for (p, term) in dir.decomposition.iter().enumerate() {
                    let g = term.g.anchor(&torus, x);
                    let gbits = remap(&g.sites, &window);
                    for (m, &gc) in site_coefficients(&g, rho).iter().enumerate() {
                        let wm = widen(m, &gbits);
                        h1[wm] += b1[p][x] * gc;
                        h2[wm] += b2[p][x] * gc;
                    }
                }
                Ok((window, h1, h2))
            })
            .collect();
        let mut window = Vec::with_capacity(sites.len());
        let mut h1 = Vec::with_capacity(sites.len());
        let mut h2 = Vec::with_capacity(sites.len());
        for r in per_site {
            let (w, a1, a2) = r?;
            window.push(w);
            h1.push(a1);
            h2.push(a2);
        }
        let k: Vec<f64> = sites
            .iter()
            .map(|&x| {
                let back = torus.back_neighbor(x, j);
                // E[j_{x,x+e}] = E[c_x] (rho(x) - rho(x+e)) = -E[c_x] D rho(x).
                n2 * (mean_rate[x] * drho[x] - mean_rate[back] * drho[back]) - an * (i[x] - i[back])
            })
            .collect();
        let h: Vec<Vec<(usize, f64)>> = h1
            .iter()
            .zip(&h2)
            .map(|(a1, a2)| {
                a1.iter()
                    .zip(a2)
                    .enumerate()
                    .filter(|(m, _)| m.count_ones() >= 2)
                    .map(|(m, (u, v))| (m, n2 * u + an * v))
                    .filter(|(_, v)| *v != 0.0)
                    .collect()
            })
            .collect();
        directions.push(DirectionCoefficients { a, c, i, mean_rate, b1, b2, e1, e2, f1, f2, g1, g2, window, h1, h2, k, h });
    }
    Ok(AdjointCoefficients { torus, scaling: *scaling, rho: rho.to_vec(), directions })
}

impl AdjointCoefficients {
    pub fn expansion(&self) -> AdjointExpansion {
        let mut degree_one = vec![0.0; self.torus.size()];
        for dir in &self.directions {
            for (acc, k) in degree_one.iter_mut().zip(&dir.k) {
                *acc += k;
            }
        }
        AdjointExpansion {
            rho: self.rho.clone(),
            degree_one,
            higher: self
                .directions
                .iter()
                .map(|d| d.window.iter().cloned().zip(d.h.iter().cloned()).collect())
                .collect(),
        }
    }

    /// Degree-zero and degree-one totals recovered from the `H1`, `H2` tables:
    /// `(sum of degree-zero parts, per-site degree-one parts)`. These must equal `0` and `K`.
    pub fn low_degree_from_tables(&self) -> (f64, Vec<f64>) {
        let n2 = self.scaling.symmetric_scale();
        let an = self.scaling.asymmetric_scale();
        let mut zero = 0.0;
        let mut one = vec![0.0; self.torus.size()];
        for dir in &self.directions {
            for ((w, a1), a2) in dir.window.iter().zip(&dir.h1).zip(&dir.h2) {
                zero += n2 * a1[0] + an * a2[0];
                for (i, &s) in w.iter().enumerate() {
                    one[s] += n2 * a1[1 << i] + an * a2[1 << i];
                }
            }
        }
        (zero, one)
    }
}

/// `L^*_{nu_rho} 1` as a degree-indexed expansion.
pub fn adjoint_one(spec: &RateSpec, profile: &DensityProfile, scaling: &ScalingPlan) -> Result<AdjointExpansion> {
    Ok(compute_coefficients(spec, profile, scaling)?.expansion())
}

/// `sum_j K_j(x)` for the profile `w`, without building the higher-degree tables.
pub struct DegreeOneOperator {
    torus: Torus,
    plan: RatePlan,
    drift: Vec<f64>,
    fwd: Vec<Vec<Site>>,
    back: Vec<Vec<Site>>,
}

impl DegreeOneOperator {
    pub fn new(spec: &RateSpec, torus: &Torus) -> Result<Self> {
        if spec.dim() != torus.dim() {
            return Err(Error::Dimension { expected: torus.dim(), got: spec.dim() });
        }
        Ok(DegreeOneOperator {
            torus: *torus,
            plan: RatePlan::new(spec, torus),
            drift: spec.drift(),
            fwd: (0..spec.dim()).map(|j| torus.shift_table(&Offset::unit(spec.dim(), j))).collect(),
            back: (0..spec.dim()).map(|j| torus.shift_table(&Offset::along(spec.dim(), j, -1))).collect(),
        })
    }

    pub fn torus(&self) -> Torus {
        self.torus
    }

    /// Writes `sum_j K_j` for densities `w` into `out`.
    pub fn apply(&self, w: &[f64], scaling: &ScalingPlan, out: &mut [f64]) {
        let n2 = scaling.symmetric_scale();
        let an = scaling.asymmetric_scale();
        out.iter_mut().for_each(|o| *o = 0.0);
        let size = self.torus.size();
        let mut flux = vec![0.0; size];
        for (j, m) in self.drift.iter().enumerate() {
            let fwd = &self.fwd[j];
            for x in 0..size {
                let mean = self.plan.mean(j, x, w);
                let y = fwd[x];
                // Symmetric current minus the scaled asymmetric current on the bond (x, x+e).
                flux[x] = n2 * mean * (w[x] - w[y]) + an * mean * m * w[x] * (1.0 - w[y]);
            }
            let back = &self.back[j];
            for x in 0..size {
                out[x] += flux[back[x]] - flux[x];
            }
        }
    }
}

/// Right-hand side `a_n sum_j K^n_j` of the semi-discrete equation for `v`, with `w = alpha0 + eps v`.
pub fn semidiscrete_rhs(op: &DegreeOneOperator, alpha0: f64, v: &[f64], scaling: &ScalingPlan) -> Vec<f64> {
    let w: Vec<f64> = v.iter().map(|x| alpha0 + scaling.eps * x).collect();
    let mut out = vec![0.0; v.len()];
    op.apply(&w, scaling, &mut out);
    out.iter_mut().for_each(|o| *o *= scaling.a_n);
    out
}

/// Simple exclusion in closed form:
/// `(1 + a_n / (2n)) Delta_n v + n sum_j [v(x) v(x+e_j) - v(x-e_j) v(x)]` around `alpha0 = 1/2`.
pub fn ssep_closed_form_rhs(torus: &Torus, v: &[f64], scaling: &ScalingPlan) -> Vec<f64> {
    let n = torus.side() as f64;
    let lap = 1.0 + scaling.a_n / (2.0 * n);
    (0..torus.size())
        .map(|x| {
            (0..torus.dim())
                .map(|j| {
                    let f = v[torus.neighbor(x, j)];
                    let b = v[torus.back_neighbor(x, j)];
                    lap * n * n * (f - 2.0 * v[x] + b) + n * (v[x] * f - b * v[x])
                })
                .sum()
        })
        .collect()
}

/// Coefficients `F^(1)`, `F^(2)` in perturbation form `w = alpha0 + eps v`:
/// `V_i [(1 - 2 alpha0) - eps (v(x) + v(x+e))] / (2 chi(w(x+e)))` with `V_1 = (D w)^2`, `V_2 = -D w C`.
pub fn perturbation_f(alpha0: f64, eps: f64, v: &[f64], torus: &Torus, drift: f64, j: usize, x: Site) -> (f64, f64) {
    let y = torus.neighbor(x, j);
    let (w0, w1) = (alpha0 + eps * v[x], alpha0 + eps * v[y]);
    let u1 = w1 - w0;
    let u2 = -drift * w0 * (1.0 - w1);
    let common = ((1.0 - 2.0 * alpha0) - eps * (v[x] + v[y])) / (2.0 * chi(w1));
    (u1 * u1 * common, u1 * u2 * common)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub n: usize,
    pub t: f64,
    pub max_residual: f64,
    /// `eps_n^2 + 1/n`.
    pub bound: f64,
    pub ratio: f64,
    pub field: Vec<f64>,
}

/// `L^n = sum_j K^n_j - eps_n dv/dt` with `v` and `dv/dt` sampled from the continuum solution.
pub fn residual(
    op: &DegreeOneOperator,
    alpha0: f64,
    v: &[f64],
    dvdt: &[f64],
    scaling: &ScalingPlan,
    t: f64,
) -> ResidualReport {
    let rhs = semidiscrete_rhs(op, alpha0, v, scaling);
    let field: Vec<f64> = rhs.iter().zip(dvdt).map(|(r, d)| scaling.eps * (r - d)).collect();
    let max_residual = field.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let bound = scaling.eps * scaling.eps + 1.0 / scaling.n as f64;
    ResidualReport { n: scaling.n, t, max_residual, bound, ratio: max_residual / bound, field }
}

/// Whether `a_n / n` decreases along the plans (sorted by `n`).
pub fn asymmetry_decreasing(plans: &[ScalingPlan]) -> bool {
    plans.windows(2).all(|w| w[1].n <= w[0].n || w[1].asymmetry_ratio() < w[0].asymmetry_ratio())
}

/// Diffusive part of `sum_j K^n_j` divided by `eps`, i.e. with the asymmetric scaling switched off.
pub fn diffusive_part(op: &DegreeOneOperator, alpha0: f64, v: &[f64], scaling: &ScalingPlan) -> Vec<f64> {
    let w: Vec<f64> = v.iter().map(|x| alpha0 + scaling.eps * x).collect();
    let mut no_drift = *scaling;
    no_drift.a_n = 0.0;
    let mut out = vec![0.0; v.len()];
    op.apply(&w, &no_drift, &mut out);
    out
}

/// Transport-side check that `alpha0` is critical for the rate spec.
pub fn ensure_critical(spec: &RateSpec, alpha0: f64) -> Result<()> {
    let tc = TransportCoefficients::at(spec, alpha0);
    let slope: Vec<f64> = (0..spec.dim())
        .map(|j| crate::rates::mobility_poly(spec, j).derivative().eval(alpha0))
        .collect();
    if slope.iter().any(|s| s.abs() > 1e-9) {
        return Err(Error::Config(format!(
            "alpha0 = {} is not critical: sigma' = {slope:?} (chi = {})",
            tc.alpha0, tc.chi
        )));
    }
    Ok(())
}

/// Fourier coefficients of an anchored function against `rho`, exposed for inspection.
pub fn anchored_coefficients(f: &SiteFunction, rho: &[f64]) -> Vec<f64> {
    let local: Vec<f64> = f.sites.iter().map(|&s| rho[s]).collect();
    let mut c = f.table.clone();
    forward(&mut c, &local);
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{adjoint_apply_one, build_generator, Parts};

    fn ring(n: usize) -> Torus {
        Torus::new(1, n).unwrap()
    }

    fn plan(n: usize) -> ScalingPlan {
        ScalingPlan::from_epsilon(1, n, (n as f64).powf(-0.5)).unwrap()
    }

    fn cosine_profile(n: usize, amp: f64) -> DensityProfile {
        DensityProfile::from_fn(ring(n), |t| 0.5 + amp * (std::f64::consts::TAU * t[0]).cos()).unwrap()
    }

    fn max_gap(spec: &RateSpec, profile: &DensityProfile, p: &ScalingPlan, parts: Parts) -> f64 {
        let t = profile.torus();
        let m = build_generator(spec, &t, p, parts, None).unwrap();
        let oracle = adjoint_apply_one(&m, profile).unwrap();
        let coeffs = compute_coefficients(spec, profile, p).unwrap();
        let mut exp = coeffs.expansion();
        if parts != Parts::Both {
            exp = part_expansion(&coeffs, parts);
        }
        (0..m.len()).map(|i| (exp.evaluate(&m.configuration(i)) - oracle[i]).abs()).fold(0.0, f64::max)
    }

    fn part_expansion(c: &AdjointCoefficients, parts: Parts) -> AdjointExpansion {
        let mut c = c.clone();
        let n2 = c.scaling.symmetric_scale();
        let an = c.scaling.asymmetric_scale();
        let (s1, s2) = if parts == Parts::Symmetric { (n2, 0.0) } else { (0.0, an) };
        for dir in &mut c.directions {
            let t = &c.torus;
            dir.k = t
                .sites()
                .map(|x| {
                    let b = t.back_neighbor(x, 0);
                    let dr = |z: Site| c.rho[t.neighbor(z, 0)] - c.rho[z];
                    s1 * (dir.mean_rate[x] * dr(x) - dir.mean_rate[b] * dr(b)) - s2 * (dir.i[x] - dir.i[b])
                })
                .collect();
            dir.h = dir
                .h1
                .iter()
                .zip(&dir.h2)
                .map(|(a1, a2)| {
                    a1.iter()
                        .zip(a2)
                        .enumerate()
                        .filter(|(m, _)| m.count_ones() >= 2)
                        .map(|(m, (u, v))| (m, s1 * u + s2 * v))
                        .collect()
                })
                .collect();
        }
        c.expansion()
    }

    #[test]
    fn constant_half_profile_values() {
        let t = ring(6);
        let p = DensityProfile::constant(t, 0.5).unwrap();
        let c = compute_coefficients(&RateSpec::ssep(1), &p, &plan(6)).unwrap();
        let d = &c.directions[0];
        for x in t.sites() {
            assert_eq!(d.a[x], 8.0);
            assert_eq!(d.c[x], 0.25);
            assert_eq!(d.b1[0][x], 0.0);
            assert_eq!(d.e1[x], 0.0);
            assert_eq!(d.f1[x], 0.0);
            assert_eq!(d.g1[x], 0.0);
        }
    }

    #[test]
    fn matches_matrix_oracle_on_five_sites() {
        let p = DensityProfile::from_fn(ring(5), |t| 0.5 + 0.1 * (std::f64::consts::TAU * t[0]).cos()).unwrap();
        for spec in [RateSpec::ssep(1), RateSpec::beta_environment(0.2)] {
            for parts in [Parts::Symmetric, Parts::Asymmetric, Parts::Both] {
                let gap = max_gap(&spec, &p, &plan(5), parts);
                assert!(gap < 1e-10, "{} {parts:?}: {gap}", spec.name);
            }
        }
    }

    #[test]
    fn matches_matrix_oracle_with_negative_drift_and_rough_profile() {
        let t = ring(6);
        let p = DensityProfile::new(t, vec![0.15, 0.7, 0.4, 0.9, 0.33, 0.5]).unwrap();
        let spec = RateSpec::beta_environment(0.6).with_drift(&[-0.4]);
        let gap = max_gap(&spec, &p, &ScalingPlan::new(1, 6, 1.3).unwrap(), Parts::Both);
        assert!(gap < 1e-10, "{gap}");
    }

    #[test]
    fn two_dimensional_oracle() {
        let t = Torus::new(2, 3).unwrap();
        let p = DensityProfile::from_fn(t, |th| 0.45 + 0.1 * (std::f64::consts::TAU * th[0]).sin() + 0.05 * th[1]).unwrap();
        let spec = RateSpec::ssep(2).with_drift(&[1.0, 0.5]);
        let scaling = ScalingPlan::new(2, 3, 2.0).unwrap();
        let gap = max_gap(&spec, &p, &scaling, Parts::Both);
        assert!(gap < 1e-10, "{gap}");
    }

    #[test]
    fn low_degree_tables_reproduce_k() {
        let p = cosine_profile(7, 0.2);
        let c = compute_coefficients(&RateSpec::beta_environment(0.2), &p, &plan(7)).unwrap();
        let (zero, one) = c.low_degree_from_tables();
        assert!(zero.abs() < 1e-10);
        for (a, b) in one.iter().zip(&c.expansion().degree_one) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_profile_gives_zero() {
        let t = ring(7);
        for spec in [RateSpec::ssep(1), RateSpec::beta_environment(0.2)] {
            for alpha in [0.2, 0.5, 0.77] {
                let p = DensityProfile::constant(t, alpha).unwrap();
                let e = adjoint_one(&spec, &p, &plan(7)).unwrap();
                assert!(e.degree_one.iter().all(|k| k.abs() < 1e-12));
                assert!(e.max_higher() < 1e-12);
            }
        }
    }

    #[test]
    fn higher_coefficients_live_in_the_window() {
        let p = cosine_profile(9, 0.2);
        let c = compute_coefficients(&RateSpec::beta_environment(0.2), &p, &plan(9)).unwrap();
        let d = &c.directions[0];
        for x in 0..9 {
            // Window of {-1, 0, 1, 2} around x.
            let expected: Vec<Site> = [0i64, 1, -1, 2].iter().map(|k| ring(9).site(&[x as i64 + k])).collect();
            let mut got = d.window[x].clone();
            got.sort();
            let mut want = expected.clone();
            want.sort();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn perturbation_form_matches_general_f() {
        let t = ring(16);
        let (alpha0, eps) = (0.5408, 0.07);
        let v: Vec<f64> = (0..16).map(|x| (std::f64::consts::TAU * x as f64 / 16.0).sin()).collect();
        let w: Vec<f64> = v.iter().map(|a| alpha0 + eps * a).collect();
        let p = DensityProfile::new(t, w).unwrap();
        let spec = RateSpec::beta_environment(0.2);
        let c = compute_coefficients(&spec, &p, &plan(16)).unwrap();
        for x in 0..16 {
            let (f1, f2) = perturbation_f(alpha0, eps, &v, &t, 1.0, 0, x);
            assert!((f1 - c.directions[0].f1[x]).abs() < 1e-14);
            assert!((f2 - c.directions[0].f2[x]).abs() < 1e-14);
        }
    }

    #[test]
    fn degree_one_operator_matches_k() {
        let p = cosine_profile(11, 0.25);
        let spec = RateSpec::beta_environment(0.2);
        let s = plan(11);
        let e = adjoint_one(&spec, &p, &s).unwrap();
        let op = DegreeOneOperator::new(&spec, &ring(11)).unwrap();
        let mut out = vec![0.0; 11];
        op.apply(p.values(), &s, &mut out);
        for (a, b) in out.iter().zip(&e.degree_one) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn ssep_rhs_matches_closed_form() {
        let t = ring(32);
        let s = plan(32);
        let op = DegreeOneOperator::new(&RateSpec::ssep(1), &t).unwrap();
        let v: Vec<f64> = (0..32).map(|x| (std::f64::consts::TAU * x as f64 / 32.0).cos() + 0.3).collect();
        let a = semidiscrete_rhs(&op, 0.5, &v, &s);
        let b = ssep_closed_form_rhs(&t, &v, &s);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()), "{x} vs {y}");
        }
        let zero = semidiscrete_rhs(&op, 0.5, &[0.4; 32], &s);
        assert!(zero.iter().all(|z| z.abs() < 1e-9));
    }

    #[test]
    fn general_spec_with_zero_perturbation_is_still() {
        let spec = RateSpec::beta_environment(0.2);
        let op = DegreeOneOperator::new(&spec, &ring(20)).unwrap();
        let r = semidiscrete_rhs(&op, 0.5408, &[0.0; 20], &plan(20));
        assert!(r.iter().all(|z| z.abs() < 1e-9));
    }

    #[test]
    fn psi_derivative_matches_log_density_difference() {
        let t = ring(4);
        let path = AnalyticPath {
            value: |s: f64| (0..4).map(|x| 0.5 + 0.2 * (s + x as f64).sin()).collect::<Vec<f64>>(),
            derivative: |s: f64| (0..4).map(|x| 0.2 * (s + x as f64).cos()).collect::<Vec<f64>>(),
        };
        let s0 = 0.3;
        let h = 1e-5;
        let field = psi_time_derivative(&path, s0);
        let w = path.profile(s0);
        for mask in 0..16u64 {
            let eta = Configuration::from_mask(t, mask);
            let ld = |s: f64| DensityProfile::new(t, path.profile(s)).unwrap().log_density(&eta);
            let fd = (ld(s0 + h) - ld(s0 - h)) / (2.0 * h);
            let ours: f64 = (0..4).map(|x| field[x] * (eta.get(x) as f64 - w[x]) / chi(w[x])).sum();
            assert!((fd - ours).abs() < 1e-8);
        }
        assert!(psi_time_derivative(&StaticPath(vec![0.5; 4]), 1.0).iter().all(|d| *d == 0.0));
    }

    #[test]
    fn diffusive_part_tracks_second_derivative() {
        // beta model around its critical density: n^2 (E[j_{x-e,x}] - E[j_{x,x+e}]) ~ eps D(alpha0) v''.
        let spec = RateSpec::beta_environment(0.2);
        let alpha0 = crate::rates::find_alpha0(&spec).unwrap();
        let d0 = crate::rates::diffusivity(&spec, alpha0)[0][0];
        let mut ratios = Vec::new();
        for n in [64, 128, 256, 512] {
            let t = ring(n);
            let s = plan(n);
            let op = DegreeOneOperator::new(&spec, &t).unwrap();
            let v: Vec<f64> = (0..n).map(|x| (std::f64::consts::TAU * x as f64 / n as f64).cos()).collect();
            let k = diffusive_part(&op, alpha0, &v, &s);
            let err = (0..n)
                .map(|x| (k[x] - s.eps * d0 * (-4.0 * std::f64::consts::PI.powi(2)) * v[x]).abs())
                .fold(0.0, f64::max);
            ratios.push(err / (s.eps * s.eps + s.eps / n as f64));
        }
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
        assert!(hi / lo < 2.0, "{ratios:?}");
    }
}
