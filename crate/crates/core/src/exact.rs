//! Brute-force oracle on tiny tori: explicit generator matrices, adjoints in
//! `L^2(nu_rho)`, forward evolution, relative entropy and Dirichlet forms.

use std::collections::HashMap;

use crate::adjoint::ProfilePath;
use crate::error::{Error, Result};
use crate::kmc::ScalingPlan;
use crate::lattice::{Configuration, Site, SiteFunction, Torus};
use crate::measures::{chi, DensityProfile};
use crate::rates::RateSpec;

/// Largest number of states an oracle matrix may index.
pub const SIZE_GATE: u128 = 1 << 20;

/// Which part of `n^2 L^S + a_n n L^T` to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parts {
    Symmetric,
    Asymmetric,
    Both,
}

impl Parts {
    pub fn symmetric(self) -> bool {
        matches!(self, Parts::Symmetric | Parts::Both)
    }

    pub fn asymmetric(self) -> bool {
        matches!(self, Parts::Asymmetric | Parts::Both)
    }
}

/// Sparse generator on the full configuration space or on one particle-number sector.
///
/// States are configuration bitmasks (bit `x` is the occupation of site `x`).
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    torus: Torus,
    states: Vec<u64>,
    index: HashMap<u64, usize>,
    off: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

fn binomial(n: u32, k: u32) -> u128 {
    (0..k as u128).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}

/// State list for the full space (`sector = None`) or for `sector` particles.
pub fn enumerate_states(torus: &Torus, sector: Option<usize>) -> Result<Vec<u64>> {
    let sites = torus.size();
    let count = match sector {
        None => 1u128.checked_shl(sites as u32).unwrap_or(u128::MAX),
        Some(k) if k <= sites => binomial(sites as u32, k as u32),
        Some(k) => return Err(Error::Config(format!("{k} particles on {sites} sites"))),
    };
    if count > SIZE_GATE || sites > 63 {
        return Err(Error::SizeGate { states: count, limit: SIZE_GATE });
    }
    let all = 0..(1u64 << sites);
    Ok(match sector {
        None => all.collect(),
        Some(k) => all.filter(|m| m.count_ones() as usize == k).collect(),
    })
}

/// Anchored rates `tau_x c_j` for every bond.
pub(crate) fn anchored_rates(spec: &RateSpec, torus: &Torus) -> Vec<Vec<SiteFunction>> {
    (0..spec.dim())
        .map(|j| torus.sites().map(|x| spec.direction(j).rate.anchor(torus, x)).collect())
        .collect()
}

fn mask_eval(f: &SiteFunction, mask: u64) -> f64 {
    let p = f.sites.iter().enumerate().fold(0usize, |acc, (i, &s)| acc | ((((mask >> s) & 1) as usize) << i));
    f.table[p]
}

pub fn build_generator(
    spec: &RateSpec,
    torus: &Torus,
    scaling: &ScalingPlan,
    parts: Parts,
    sector: Option<usize>,
) -> Result<GeneratorMatrix> {
    if spec.dim() != torus.dim() {
        return Err(Error::Dimension { expected: torus.dim(), got: spec.dim() });
    }
    let states = enumerate_states(torus, sector)?;
    let index: HashMap<u64, usize> = states.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let rates = anchored_rates(spec, torus);
    let sym = if parts.symmetric() { scaling.symmetric_scale() } else { 0.0 };
    let asym = if parts.asymmetric() { scaling.asymmetric_scale() } else { 0.0 };
    let mut off = Vec::with_capacity(states.len());
    let mut diag = Vec::with_capacity(states.len());
    for &m in &states {
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut out = 0.0;
        for j in 0..spec.dim() {
            let drift = spec.direction(j).drift;
            for x in torus.sites() {
                let y = torus.neighbor(x, j);
                let (a, b) = ((m >> x) & 1, (m >> y) & 1);
                if a == b {
                    continue;
                }
                let c = mask_eval(&rates[j][x], m);
                let r = if a == 1 { sym * c + asym * drift * c } else { sym * c };
                if r == 0.0 {
                    continue;
                }
                if r < 0.0 && parts == Parts::Both {
                    return Err(Error::NegativeRate { direction: j, rate: r, n: scaling.n, a_n: scaling.a_n });
                }
                let target = index[&(m ^ (1 << x) ^ (1 << y))];
                match row.iter_mut().find(|(k, _)| *k == target) {
                    Some(e) => e.1 += r,
                    None => row.push((target, r)),
                }
                out += r;
            }
        }
        off.push(row);
        diag.push(-out);
    }
    Ok(GeneratorMatrix { torus: *torus, states, index, off, diag })
}

impl GeneratorMatrix {
    pub fn torus(&self) -> Torus {
        self.torus
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, mask: u64) -> Option<usize> {
        self.index.get(&mask).copied()
    }

    pub fn configuration(&self, i: usize) -> Configuration {
        Configuration::from_mask(self.torus, self.states[i])
    }

    /// `L(i, k)` including the diagonal.
    pub fn entry(&self, i: usize, k: usize) -> f64 {
        if i == k {
            return self.diag[i];
        }
        self.off[i].iter().filter(|(t, _)| *t == k).map(|(_, r)| r).sum()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.off[i]
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Largest `|sum_k L(i,k)|`.
    pub fn max_row_sum(&self) -> f64 {
        self.off
            .iter()
            .zip(&self.diag)
            .map(|(row, d)| (row.iter().map(|(_, r)| r).sum::<f64>() + d).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_off_diagonal(&self) -> f64 {
        self.off.iter().flatten().map(|(_, r)| *r).fold(f64::INFINITY, f64::min)
    }

    /// Whether every transition keeps the particle number.
    pub fn preserves_particle_number(&self) -> bool {
        self.off.iter().enumerate().all(|(i, row)| {
            row.iter().all(|(k, _)| self.states[*k].count_ones() == self.states[i].count_ones())
        })
    }

    fn log_weights(&self, profile: &DensityProfile) -> Vec<f64> {
        (0..self.len()).map(|i| profile.log_density(&self.configuration(i))).collect()
    }

    /// `(mu L)(k) = sum_i mu(i) L(i,k)`.
    pub fn apply_forward(&self, mu: &[f64], out: &mut [f64]) {
        for (o, (m, d)) in out.iter_mut().zip(mu.iter().zip(&self.diag)) {
            *o = m * d;
        }
        for (i, row) in self.off.iter().enumerate() {
            let m = mu[i];
            if m != 0.0 {
                for &(k, r) in row {
                    out[k] += m * r;
                }
            }
        }
    }

    /// `(L f)(i) = sum_k L(i,k) f(k)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.diag[i] * f[i] + self.off[i].iter().map(|&(k, r)| r * f[k]).sum::<f64>())
            .collect()
    }

    /// Distribution of the product measure restricted (and renormalised) to the state list.
    pub fn product_distribution(&self, profile: &DensityProfile) -> Vec<f64> {
        let lw = self.log_weights(profile);
        let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lw.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    /// Largest `|nu(i) L(i,k) - nu(k) L(k,i)|` over pairs.
    pub fn detailed_balance_defect(&self, profile: &DensityProfile) -> f64 {
        let nu: Vec<f64> = self.log_weights(profile).into_iter().map(f64::exp).collect();
        let mut worst = 0.0f64;
        for (i, row) in self.off.iter().enumerate() {
            for &(k, r) in row {
                worst = worst.max((nu[i] * r - nu[k] * self.entry(k, i)).abs());
            }
        }
        worst
    }

    /// Symmetrised swap target of state `i` across the bond `(x, y)`.
    fn swap_index(&self, i: usize, x: Site, y: Site) -> usize {
        let m = self.states[i];
        let target = if ((m >> x) & 1) == ((m >> y) & 1) { m } else { m ^ (1 << x) ^ (1 << y) };
        self.index[&target]
    }
}

/// `(L^* 1)(eta) = sum_{eta'} nu(eta') L(eta', eta) / nu(eta)`, diagonal included.
pub fn adjoint_apply_one(matrix: &GeneratorMatrix, profile: &DensityProfile) -> Result<Vec<f64>> {
    profile.require_interior()?;
    let lw = matrix.log_weights(profile);
    let mut out = matrix.diag.clone();
    for (i, row) in matrix.off.iter().enumerate() {
        for &(k, r) in row {
            out[k] += r * (lw[i] - lw[k]).exp();
        }
    }
    Ok(out)
}

/// Adaptive Dormand-Prince 5(4) integration of `dy/dt = f(y)`, reporting `y` at each requested time.
pub fn dopri5(
    f: impl Fn(&[f64], &mut [f64]),
    y0: &[f64],
    times: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<Vec<f64>>> {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t: f64 = 0.0;
    let mut h: f64 = 1e-4;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut out = Vec::with_capacity(times.len());
    f(&y, &mut k[0]);
    for &target in times {
        if target < t {
            return Err(Error::Config("output times must be nondecreasing and nonnegative".into()));
        }
        let mut steps = 0usize;
        while target - t > 1e-15 * target.max(1.0) {
            steps += 1;
            if steps > 50_000_000 {
                return Err(Error::Config("integration did not finish".into()));
            }
            let step = h.min(target - t);
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (r, a) in A[s].iter().enumerate().take(s) {
                        acc += a * k[r][i];
                    }
                    tmp[i] = y[i] + step * acc;
                }
                f(&tmp, &mut k[s]);
            }
            // tmp now holds the fifth-order solution (FSAL stage).
            let mut err = 0.0f64;
            for i in 0..dim {
                let e: f64 = step * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>();
                let sc = atol + rtol * y[i].abs().max(tmp[i].abs());
                err = err.max((e / sc).abs());
            }
            if err <= 1.0 {
                t += step;
                y.copy_from_slice(&tmp);
                k.swap(0, 6);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = step * factor;
        }
        t = target;
        out.push(y.clone());
    }
    Ok(out)
}

/// Forward Kolmogorov evolution `mu_t = mu_0 e^{tL}` at the requested (sorted) times.
pub fn evolve(matrix: &GeneratorMatrix, mu0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    if mu0.len() != matrix.len() {
        return Err(Error::Config("initial law does not match the state list".into()));
    }
    let mut out = dopri5(|y, dy| matrix.apply_forward(y, dy), mu0, times, 1e-12, 1e-15)?;
    for mu in &mut out {
        for p in mu.iter_mut() {
            if *p < 0.0 && *p >= -1e-14 {
                *p = 0.0;
            }
        }
    }
    Ok(out)
}

/// `(H(mu | nu), I(mu / nu; nu))` restricted to the matrix state list.
///
/// `nu` is the full-space product measure; states missing from the list carry no mass, so the
/// values equal the full-space ones when `mu` lives on a sector.
pub fn entropy_and_dirichlet(matrix: &GeneratorMatrix, mu: &[f64], profile: &DensityProfile) -> Result<(f64, f64)> {
    profile.require_interior()?;
    let torus = matrix.torus;
    let lw = matrix.log_weights(profile);
    let mut h = 0.0;
    for (p, l) in mu.iter().zip(&lw) {
        if *p > 0.0 {
            h += p * (p.ln() - l);
        }
    }
    let root_f: Vec<f64> = mu.iter().zip(&lw).map(|(p, l)| (p.max(0.0) * (-l).exp()).sqrt()).collect();
    let mut dir = 0.0;
    for i in 0..matrix.len() {
        let nu = lw[i].exp();
        for j in 0..torus.dim() {
            for x in torus.sites() {
                let k = matrix.swap_index(i, x, torus.neighbor(x, j));
                dir += nu * (root_f[k] - root_f[i]).powi(2);
            }
        }
    }
    Ok((h, dir))
}

/// Log-density derivative `sum_x dw(x)/dt omega_x(eta)`.
pub fn log_psi_rate(config: &Configuration, w: &[f64], dw: &[f64]) -> f64 {
    w.iter()
        .zip(dw)
        .zip(config.occupancy())
        .map(|((&r, &dr), &b)| dr * (b as f64 - r) / chi(r))
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyProductionRow {
    pub t: f64,
    pub entropy: f64,
    pub dirichlet: f64,
    /// Fourth-order centered difference of `t -> H(mu_t | nu_{w(t)})`.
    pub lhs_fd: f64,
    /// `sum mu L log g - int d/dt log psi dmu`.
    pub lhs_exact: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyProductionReport {
    pub rows: Vec<EntropyProductionRow>,
    pub slack: f64,
    pub max_entropy: f64,
}

impl EntropyProductionReport {
    pub fn inequality_holds(&self) -> bool {
        self.rows.iter().all(|r| r.lhs_fd <= r.rhs + self.slack)
    }

    /// Largest `lhs - rhs`; negative when the inequality holds with room.
    pub fn worst_gap(&self) -> f64 {
        self.rows.iter().map(|r| r.lhs_fd - r.rhs).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `H(t) <= H(0) + int_0^t max(rhs, 0)` along the grid (trapezoid rule), up to `tol`.
    pub fn entropy_bounded(&self, tol: f64) -> bool {
        let Some(first) = self.rows.first() else { return true };
        let mut budget = first.entropy;
        for w in self.rows.windows(2) {
            budget += 0.5 * (w[1].t - w[0].t) * (w[0].rhs.max(0.0) + w[1].rhs.max(0.0));
            if !(w[1].entropy.is_finite() && w[1].entropy <= budget + tol) {
                return false;
            }
        }
        true
    }
}

/// Step of the centered differences used on the entropy curve.
const FD_STEP: f64 = 1e-4;

/// Checks `d/dt H(mu_t | nu_{w(t)}) <= -n^2 I + int (L^* 1 - d/dt log psi) dmu_t` on a grid.
pub fn entropy_production_check(
    spec: &RateSpec,
    scaling: &ScalingPlan,
    torus: &Torus,
    path: &dyn ProfilePath,
    mu0: &[f64],
    sector: Option<usize>,
    grid: &[f64],
) -> Result<EntropyProductionReport> {
    let matrix = build_generator(spec, torus, scaling, Parts::Both, sector)?;
    let h = FD_STEP;
    let stencil = |t: f64| if t >= 2.0 * h { [-2.0, -1.0, 0.0, 1.0, 2.0] } else { [0.0, 1.0, 2.0, 3.0, 4.0] };
    let mut sorted: Vec<f64> = grid.iter().flat_map(|&t| stencil(t).map(|k| t + k * h)).collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let laws = evolve(&matrix, mu0, &sorted)?;
    let law_at = |t: f64| -> &Vec<f64> {
        let i = sorted.iter().position(|&s| s == t).expect("time was requested");
        &laws[i]
    };
    let entropy_at = |t: f64| -> Result<f64> {
        let p = DensityProfile::new(*torus, path.profile(t))?;
        Ok(entropy_and_dirichlet(&matrix, law_at(t), &p)?.0)
    };
    let n2 = scaling.symmetric_scale();
    let mut rows = Vec::with_capacity(grid.len());
    let mut max_entropy: f64 = 0.0;
    for &t in grid {
        let w = path.profile(t);
        let dw = path.time_derivative(t);
        let profile = DensityProfile::new(*torus, w.clone())?;
        let mu = law_at(t);
        let (entropy, dirichlet) = entropy_and_dirichlet(&matrix, mu, &profile)?;
        max_entropy = max_entropy.max(entropy);
        let lstar = adjoint_apply_one(&matrix, &profile)?;
        let lw = matrix.log_weights(&profile);
        let dpsi: Vec<f64> = (0..matrix.len()).map(|i| log_psi_rate(&matrix.configuration(i), &w, &dw)).collect();
        let rhs = -n2 * dirichlet + (0..matrix.len()).map(|i| mu[i] * (lstar[i] - dpsi[i])).sum::<f64>();
        let log_g: Vec<f64> = mu.iter().zip(&lw).map(|(p, l)| if *p > 0.0 { p.ln() - l } else { 0.0 }).collect();
        let mut flow = vec![0.0; matrix.len()];
        matrix.apply_forward(mu, &mut flow);
        let lhs_exact = flow.iter().zip(&log_g).map(|(a, b)| a * b).sum::<f64>()
            - (0..matrix.len()).map(|i| mu[i] * dpsi[i]).sum::<f64>();
        let lhs_fd = if t >= 2.0 * h {
            (-entropy_at(t + 2.0 * h)? + 8.0 * entropy_at(t + h)? - 8.0 * entropy_at(t - h)? + entropy_at(t - 2.0 * h)?)
                / (12.0 * h)
        } else {
            // One-sided fourth-order stencil at the left end.
            let e = |k: f64| entropy_at(t + k * h);
            (-25.0 * e(0.0)? + 48.0 * e(1.0)? - 36.0 * e(2.0)? + 16.0 * e(3.0)? - 3.0 * e(4.0)?) / (12.0 * h)
        };
        rows.push(EntropyProductionRow { t, entropy, dirichlet, lhs_fd, lhs_exact, rhs });
    }
    Ok(EntropyProductionReport { rows, slack: 1e-6, max_entropy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::product_relative_entropy;

    fn ring(n: usize) -> Torus {
        Torus::new(1, n).unwrap()
    }

    fn plan(n: usize) -> ScalingPlan {
        ScalingPlan::from_epsilon(1, n, (n as f64).powf(-0.5)).unwrap()
    }

    #[test]
    fn rows_sum_to_zero() {
        for spec in [RateSpec::ssep(1), RateSpec::beta_environment(0.2)] {
            for parts in [Parts::Symmetric, Parts::Both] {
                let m = build_generator(&spec, &ring(5), &plan(5), parts, None).unwrap();
                assert_eq!(m.max_row_sum(), 0.0);
                assert!(m.min_off_diagonal() >= 0.0);
                assert!(m.preserves_particle_number());
            }
        }
    }

    #[test]
    fn one_particle_on_three_sites() {
        let m = build_generator(&RateSpec::ssep(1), &ring(3), &plan(3), Parts::Symmetric, Some(1)).unwrap();
        assert_eq!(m.len(), 3);
        for i in 0..3 {
            assert_eq!(m.diagonal()[i], -2.0 * 9.0);
        }
    }

    #[test]
    fn bernoulli_measures_are_stationary() {
        let t = ring(5);
        for spec in [RateSpec::ssep(1), RateSpec::beta_environment(0.2)] {
            for alpha in [0.3, 0.5, 0.8] {
                let p = DensityProfile::constant(t, alpha).unwrap();
                for parts in [Parts::Symmetric, Parts::Asymmetric, Parts::Both] {
                    let m = build_generator(&spec, &t, &plan(5), parts, None).unwrap();
                    let a = adjoint_apply_one(&m, &p).unwrap();
                    assert!(a.iter().all(|v| v.abs() < 1e-12), "{parts:?}");
                }
                let sym = build_generator(&spec, &t, &plan(5), Parts::Symmetric, None).unwrap();
                assert!(sym.detailed_balance_defect(&p) < 1e-12);
            }
        }
    }

    #[test]
    fn evolution_preserves_stationary_law_and_mass() {
        let t = ring(5);
        let spec = RateSpec::beta_environment(0.2);
        let m = build_generator(&spec, &t, &plan(5), Parts::Both, None).unwrap();
        let nu = m.product_distribution(&DensityProfile::constant(t, 0.4).unwrap());
        let out = evolve(&m, &nu, &[0.1, 0.5]).unwrap();
        for mu in &out {
            assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in mu.iter().zip(&nu) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let mut delta = vec![0.0; m.len()];
        delta[m.index_of(0b00011).unwrap()] = 1.0;
        let out = evolve(&m, &delta, &[0.05, 0.3]).unwrap();
        for mu in &out {
            assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(mu.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn evolution_matches_two_state_chain() {
        // One particle on two sites hops both ways at rate 2 n^2 (two bonds join the sites).
        let t = ring(2);
        let p = ScalingPlan::new(1, 2, 1.0).unwrap();
        let m = build_generator(&RateSpec::ssep(1), &t, &p, Parts::Symmetric, Some(1)).unwrap();
        let lambda: f64 = 8.0;
        let mut mu = vec![0.0; 2];
        mu[m.index_of(0b01).unwrap()] = 1.0;
        let out = evolve(&m, &mu, &[0.01, 0.1]).unwrap();
        for (k, time) in [0.01, 0.1].iter().enumerate() {
            let stay = 0.5 + 0.5 * (-2.0 * lambda * time).exp();
            assert!((out[k][m.index_of(0b01).unwrap()] - stay).abs() < 1e-11);
        }
    }

    #[test]
    fn entropy_examples() {
        let t = ring(4);
        let m = build_generator(&RateSpec::ssep(1), &t, &plan(4), Parts::Both, None).unwrap();
        let nu = DensityProfile::new(t, vec![0.2, 0.5, 0.7, 0.4]).unwrap();
        let mu_prof = DensityProfile::new(t, vec![0.3, 0.45, 0.6, 0.5]).unwrap();
        let nu_vec = m.product_distribution(&nu);
        let (h, i) = entropy_and_dirichlet(&m, &nu_vec, &nu).unwrap();
        assert!(h.abs() < 1e-14);
        assert!(i.abs() < 1e-14);
        let mu = m.product_distribution(&mu_prof);
        let (h, _) = entropy_and_dirichlet(&m, &mu, &nu).unwrap();
        assert!((h - product_relative_entropy(&mu_prof, &nu).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn entropy_decreases_towards_equilibrium() {
        let t = ring(6);
        let m = build_generator(&RateSpec::ssep(1), &t, &plan(6), Parts::Both, None).unwrap();
        let reference = DensityProfile::constant(t, 0.5).unwrap();
        let start = m.product_distribution(&DensityProfile::new(t, vec![0.9, 0.8, 0.5, 0.2, 0.1, 0.5]).unwrap());
        let times: Vec<f64> = (1..=40).map(|k| k as f64 * 0.005).collect();
        let laws = evolve(&m, &start, &times).unwrap();
        let mut last = entropy_and_dirichlet(&m, &start, &reference).unwrap().0;
        for mu in &laws {
            let h = entropy_and_dirichlet(&m, mu, &reference).unwrap().0;
            assert!(h <= last + 1e-12);
            last = h;
        }
    }

    #[test]
    fn size_gate() {
        let big = Torus::new(1, 21).unwrap();
        assert!(matches!(enumerate_states(&big, None), Err(Error::SizeGate { .. })));
        assert_eq!(enumerate_states(&big, Some(3)).unwrap().len(), 1330);
    }

    #[test]
    fn negative_rates_are_rejected() {
        let spec = RateSpec::ssep(1).with_drift(&[-2.0]);
        let p = ScalingPlan::new(1, 4, 4.0).unwrap();
        assert!(matches!(
            build_generator(&spec, &ring(4), &p, Parts::Both, None),
            Err(Error::NegativeRate { .. })
        ));
    }
}
