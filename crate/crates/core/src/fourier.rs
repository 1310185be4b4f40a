//! Orthogonal decomposition of local functions in the basis
//! `omega_rho(B) = prod_{y in B} (eta_y - rho(y)) / chi(rho(y))`.
//!
//! A local function is expanded as `f = sum_B f(B) omega(B)` with coefficients
//! `f(B) = E[f xi(B)]`, `xi(B) = prod_{y in B} (eta_y - rho(y))`. Subsets of a
//! support are bitmasks over its (anchored) site list.

use std::io::Write;

use crate::error::{Error, Result};
use crate::lattice::{Configuration, LocalFunction, Offset, Site, SiteFunction, Torus};
use crate::measures::{chi, DensityProfile};

pub fn xi(profile: &DensityProfile, config: &Configuration, sites: &[Site]) -> f64 {
    sites.iter().map(|&y| config.get(y) as f64 - profile.get(y)).product()
}

pub fn omega(profile: &DensityProfile, config: &Configuration, sites: &[Site]) -> f64 {
    sites
        .iter()
        .map(|&y| {
            let r = profile.get(y);
            (config.get(y) as f64 - r) / chi(r)
        })
        .product()
}

/// In-place map from a truth table to its coefficients `E[f xi(B)]`.
///
/// One site at a time, `(f0, f1)` becomes `((1 - rho) f0 + rho f1, chi (f1 - f0))`.
pub(crate) fn forward(table: &mut [f64], rho: &[f64]) {
    for (i, &r) in rho.iter().enumerate() {
        let bit = 1 << i;
        for p in 0..table.len() {
            if p & bit == 0 {
                let f0 = table[p];
                let f1 = table[p | bit];
                table[p] = (1.0 - r) * f0 + r * f1;
                table[p | bit] = chi(r) * (f1 - f0);
            }
        }
    }
}

/// Inverse of [`forward`].
pub(crate) fn inverse(coeffs: &mut [f64], rho: &[f64]) {
    for (i, &r) in rho.iter().enumerate() {
        let bit = 1 << i;
        for p in 0..coeffs.len() {
            if p & bit == 0 {
                let a = coeffs[p];
                let b = coeffs[p | bit];
                coeffs[p] = a - b / (1.0 - r);
                coeffs[p | bit] = a + b / r;
            }
        }
    }
}

/// Coefficients of `tau_x f` with respect to the profile.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTable {
    pub base: Site,
    /// Anchored sites, in the order used by the bitmasks.
    pub sites: Vec<Site>,
    /// One representative offset per anchored site.
    pub offsets: Vec<Offset>,
    /// Local densities at `sites`.
    pub rho: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl FourierTable {
    pub fn coefficient(&self, mask: usize) -> f64 {
        self.coeffs[mask]
    }

    /// `f(x, B)` for a set of offsets; zero whenever `B` is not inside the support.
    pub fn coefficient_of(&self, set: &[Offset]) -> f64 {
        let mut mask = 0usize;
        for o in set {
            match self.offsets.iter().position(|s| s == o) {
                Some(i) => mask |= 1 << i,
                None => return 0.0,
            }
        }
        self.coeffs[mask]
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }

    /// `(mask, coefficient)` pairs of subsets of size `k`.
    pub fn degree(&self, k: u32) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(move |(m, _)| m.count_ones() == k)
            .map(|(m, &c)| (m, c))
    }

    /// `sum_B f(x,B) omega(B + x)` evaluated at `config`.
    pub fn reconstruct(&self, config: &Configuration) -> f64 {
        let w: Vec<f64> = self
            .sites
            .iter()
            .zip(&self.rho)
            .map(|(&s, &r)| (config.get(s) as f64 - r) / chi(r))
            .collect();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(m, &c)| {
                if c == 0.0 {
                    return 0.0;
                }
                let mut prod = c;
                let mut bits = m;
                while bits != 0 {
                    let i = bits.trailing_zeros() as usize;
                    prod *= w[i];
                    bits &= bits - 1;
                }
                prod
            })
            .sum()
    }

    /// Writes `subset_bitmask,coefficient` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["subset_bitmask", "coefficient"])?;
        for (m, c) in self.coeffs.iter().enumerate() {
            out.write_record([m.to_string(), format!("{c:e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Coefficients of an anchored function against arbitrary site densities.
pub fn site_coefficients(f: &SiteFunction, density: &[f64]) -> Vec<f64> {
    let rho: Vec<f64> = f.sites.iter().map(|&s| density[s]).collect();
    let mut c = f.table.clone();
    forward(&mut c, &rho);
    c
}

fn check(f: &LocalFunction, profile: &DensityProfile) -> Result<Torus> {
    let torus = profile.torus();
    if f.dim() != torus.dim() {
        return Err(Error::Dimension { expected: torus.dim(), got: f.dim() });
    }
    torus.check_embeds(f.support())?;
    profile.require_interior()?;
    Ok(torus)
}

pub fn fourier_coefficients(f: &LocalFunction, profile: &DensityProfile, x: Site) -> Result<FourierTable> {
    let torus = check(f, profile)?;
    let anchored = f.anchor(&torus, x);
    let rho: Vec<f64> = anchored.sites.iter().map(|&s| profile.get(s)).collect();
    let mut coeffs = anchored.table.clone();
    forward(&mut coeffs, &rho);
    Ok(FourierTable { base: x, sites: anchored.sites, offsets: f.support().to_vec(), rho, coeffs })
}

fn project_by(f: &LocalFunction, profile: &DensityProfile, x: Site, keep: impl Fn(u32) -> bool) -> Result<LocalFunction> {
    let mut t = fourier_coefficients(f, profile, x)?;
    for (m, c) in t.coeffs.iter_mut().enumerate() {
        if !keep(m.count_ones()) {
            *c = 0.0;
        }
    }
    inverse(&mut t.coeffs, &t.rho);
    LocalFunction::new(f.dim(), f.support().to_vec(), t.coeffs)
}

/// Degree-`q` part of `tau_x f`, as a function on the support of `f` (read at `x + offset`).
pub fn project(f: &LocalFunction, profile: &DensityProfile, x: Site, q: u32) -> Result<LocalFunction> {
    project_by(f, profile, x, |k| k == q)
}

/// Sum of the parts of degree at least `q`.
pub fn project_plus(f: &LocalFunction, profile: &DensityProfile, x: Site, q: u32) -> Result<LocalFunction> {
    project_by(f, profile, x, |k| k >= q)
}

/// `sum_z E_{nu_theta}[g omega_z]`, which equals `g~'(theta)`.
pub fn tilde_derivative_via_fourier(g: &LocalFunction, theta: f64) -> f64 {
    let rho = vec![theta; g.support().len()];
    let mut c = g.table().to_vec();
    forward(&mut c, &rho);
    (0..rho.len()).map(|i| c[1 << i]).sum::<f64>() / chi(theta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionMode {
    /// Expansion of `E[tau_x g]`.
    Plain,
    /// Expansion of `E[tau_{x - e_j} g - tau_x g]`.
    Gradient(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub terms: Vec<f64>,
    pub exact: f64,
    pub remainder: f64,
}

/// Expansion of expectations under `w = alpha + eps v` around the constant density `w(x)`.
///
/// Plain mode returns the zeroth, first and second order terms; gradient mode returns
/// the first and second order terms written with discrete derivatives of `v`.
pub fn inhomogeneous_expansion(
    g: &LocalFunction,
    torus: &Torus,
    alpha: f64,
    eps: f64,
    v: &[f64],
    x: Site,
    mode: ExpansionMode,
) -> Result<Expansion> {
    let d = torus.dim();
    if g.dim() != d {
        return Err(Error::Dimension { expected: d, got: g.dim() });
    }
    torus.check_embeds(g.support())?;
    let n = torus.side() as f64;
    let w: Vec<f64> = v.iter().map(|vx| alpha + eps * vx).collect();
    let profile = DensityProfile::new(*torus, w.clone())?;
    let w0 = w[x];
    let homogeneous = DensityProfile::constant(*torus, w0)?;
    let table = fourier_coefficients(g, &homogeneous, x)?;
    let s = table.sites.len();
    let c1 = |i: usize| table.coefficients_single(i);
    let c2 = |i: usize, k: usize| table.coeffs[(1 << i) | (1 << k)] / (chi(w0) * chi(w0));
    let vx = v[x];
    match mode {
        ExpansionMode::Plain => {
            let exact = crate::measures::expect_local(g, &profile, x)?;
            let dv: Vec<f64> = table.sites.iter().map(|&z| v[z] - vx).collect();
            let zeroth = table.mean();
            let first = eps * (0..s).map(|i| dv[i] * c1(i)).sum::<f64>();
            let mut second = 0.0;
            for i in 0..s {
                for k in 0..s {
                    if i != k {
                        second += dv[i] * dv[k] * c2(i, k);
                    }
                }
            }
            second *= 0.5 * eps * eps;
            Ok(Expansion { remainder: exact - zeroth - first - second, terms: vec![zeroth, first, second], exact })
        }
        ExpansionMode::Gradient(j) => {
            let back = torus.back_neighbor(x, j);
            let exact = crate::measures::expect_local(g, &profile, back)? - crate::measures::expect_local(g, &profile, x)?;
            // grad_n v at z - e_j for each anchored site z.
            let grad: Vec<f64> = table.sites.iter().map(|&z| n * (v[z] - v[torus.back_neighbor(z, j)])).collect();
            let dv: Vec<f64> = table.sites.iter().map(|&z| v[z] - vx).collect();
            let first = -(eps / n) * (0..s).map(|i| grad[i] * c1(i)).sum::<f64>();
            let mut second = 0.0;
            for i in 0..s {
                for k in 0..s {
                    if i != k {
                        let czz = grad[i] * grad[k] / n - grad[i] * dv[k] - grad[k] * dv[i];
                        second += czz * c2(i, k);
                    }
                }
            }
            second *= eps * eps / (2.0 * n);
            Ok(Expansion { remainder: exact - first - second, terms: vec![first, second], exact })
        }
    }
}

impl FourierTable {
    /// `E[f omega_{z_i}]` for the `i`-th anchored site.
    fn coefficients_single(&self, i: usize) -> f64 {
        self.coeffs[1 << i] / chi(self.rho[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::eval_local;
    use crate::measures::{expect_local, tilde_eval, tilde_poly};
    use proptest::prelude::*;

    fn ring(n: usize) -> Torus {
        Torus::new(1, n).unwrap()
    }

    fn o(k: i32) -> Offset {
        Offset(vec![k])
    }

    fn wavy(n: usize) -> DensityProfile {
        DensityProfile::from_fn(ring(n), |t| 0.5 + 0.3 * (std::f64::consts::TAU * t[0]).cos()).unwrap()
    }

    #[test]
    fn omega_moments_exhaustive() {
        // All configurations of a 3-site torus, weighted exactly.
        let t = ring(3);
        let p = DensityProfile::new(t, vec![0.2, 0.55, 0.7]).unwrap();
        let subsets: Vec<Vec<Site>> = (0..8usize).map(|m| (0..3).filter(|i| m >> i & 1 == 1).collect()).collect();
        for a in &subsets {
            for b in &subsets {
                let mut e = 0.0;
                for mask in 0..8u64 {
                    let eta = Configuration::from_mask(t, mask);
                    let w = p.log_density(&eta).exp();
                    e += w * omega(&p, &eta, a) * omega(&p, &eta, b);
                }
                let expected = if a == b { a.iter().map(|&y| 1.0 / chi(p.get(y))).product() } else { 0.0 };
                assert!((e - expected).abs() < 1e-12, "{a:?} {b:?}: {e} vs {expected}");
            }
        }
    }

    #[test]
    fn single_and_pair_coefficients() {
        let t = ring(5);
        let rho = 0.3;
        let p = DensityProfile::constant(t, rho).unwrap();
        let eta0 = LocalFunction::occupation(o(0));
        let c = fourier_coefficients(&eta0, &p, 2).unwrap();
        assert!((c.coefficient_of(&[]) - rho).abs() < 1e-15);
        assert!((c.coefficient_of(&[o(0)]) - chi(rho)).abs() < 1e-15);
        assert_eq!(c.coefficient_of(&[o(1)]), 0.0);

        let pair = LocalFunction::product(1, &[o(0), o(1)]).unwrap();
        let c = fourier_coefficients(&pair, &p, 0).unwrap();
        assert!((c.coefficient_of(&[]) - rho * rho).abs() < 1e-15);
        assert!((c.coefficient_of(&[o(0)]) - rho * chi(rho)).abs() < 1e-15);
        assert!((c.coefficient_of(&[o(1)]) - rho * chi(rho)).abs() < 1e-15);
        assert!((c.coefficient_of(&[o(0), o(1)]) - chi(rho).powi(2)).abs() < 1e-15);
        assert_eq!(c.coefficient_of(&[o(0), o(2)]), 0.0);
    }

    #[test]
    fn coefficients_match_direct_expectations() {
        let t = ring(7);
        let p = wavy(7);
        let f = LocalFunction::from_fn(1, vec![o(-1), o(0), o(2)], |q| {
            (1 + q[0] + 2 * q[1] * q[2]) as f64 - 0.5 * q[2] as f64
        })
        .unwrap();
        let table = fourier_coefficients(&f, &p, 3).unwrap();
        for m in 0..8usize {
            let sites: Vec<Site> = (0..3).filter(|i| m >> i & 1 == 1).map(|i| table.sites[i]).collect();
            let mut e = 0.0;
            for mask in 0..(1u64 << 7) {
                let eta = Configuration::from_mask(t, mask);
                e += p.log_density(&eta).exp() * eval_local(&f, &eta, 3).unwrap() * xi(&p, &eta, &sites);
            }
            assert!((e - table.coefficient(m)).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_and_projections() {
        let t = ring(6);
        let p = wavy(6);
        let f = LocalFunction::from_fn(1, vec![o(0), o(1), o(3)], |q| {
            (q[0] as f64 - 0.3) * (2.0 - q[1] as f64) + q[2] as f64
        })
        .unwrap();
        let x = 4;
        let table = fourier_coefficients(&f, &p, x).unwrap();
        let parts: Vec<LocalFunction> = (0..=3).map(|q| project(&f, &p, x, q).unwrap()).collect();
        let plus1 = project_plus(&f, &p, x, 1).unwrap();
        let mean = expect_local(&f, &p, x).unwrap();
        for mask in 0..(1u64 << 6) {
            let eta = Configuration::from_mask(t, mask);
            let direct = eval_local(&f, &eta, x).unwrap();
            assert!((table.reconstruct(&eta) - direct).abs() < 1e-12);
            let sum: f64 = parts.iter().map(|g| eval_local(g, &eta, x).unwrap()).sum();
            assert!((sum - direct).abs() < 1e-12);
            assert!((eval_local(&parts[0], &eta, x).unwrap() - mean).abs() < 1e-12);
            assert!((eval_local(&plus1, &eta, x).unwrap() - (direct - mean)).abs() < 1e-12);
        }
    }

    #[test]
    fn tilde_derivative_examples() {
        let eta0 = LocalFunction::occupation(o(0));
        let pair = LocalFunction::product(1, &[o(0), o(1)]).unwrap();
        for theta in [0.1, 0.37, 0.5, 0.9] {
            assert!((tilde_derivative_via_fourier(&eta0, theta) - 1.0).abs() < 1e-14);
            assert!((tilde_derivative_via_fourier(&pair, theta) - 2.0 * theta).abs() < 1e-14);
        }
    }

    #[test]
    fn csv_dump_lists_every_subset() {
        let p = DensityProfile::constant(ring(4), 0.5).unwrap();
        let table = fourier_coefficients(&LocalFunction::occupation(o(0)), &p, 0).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("subset_bitmask,coefficient"));
    }

    fn cosine(n: usize) -> Vec<f64> {
        (0..n).map(|x| (std::f64::consts::TAU * x as f64 / n as f64).cos()).collect()
    }

    #[test]
    fn expansion_constant_perturbation() {
        let t = ring(20);
        let g = LocalFunction::product(1, &[o(0), o(1), o(2)]).unwrap();
        let e = inhomogeneous_expansion(&g, &t, 0.5, 0.1, &vec![0.7; 20], 3, ExpansionMode::Plain).unwrap();
        assert!(e.terms[1].abs() < 1e-15 && e.terms[2].abs() < 1e-15);
        assert!(e.remainder.abs() < 1e-15);
    }

    #[test]
    fn expansion_of_pair_is_exact() {
        let t = ring(100);
        let g = LocalFunction::product(1, &[o(0), o(1)]).unwrap();
        let v = cosine(100);
        for x in [0, 13, 50] {
            let e = inhomogeneous_expansion(&g, &t, 0.5, 0.01, &v, x, ExpansionMode::Plain).unwrap();
            assert!(e.remainder.abs() <= (0.01f64 / 100.0).powi(3));
        }
    }

    #[test]
    fn expansion_remainder_is_cubic() {
        let t = ring(50);
        // Cubic monomials avoiding the base site, so the third-order term survives.
        let g = LocalFunction::from_fn(1, vec![o(-1), o(1), o(2), o(3)], |q| {
            (q[0] * q[1] * q[2]) as f64 + 0.7 * (q[1] * q[2] * q[3]) as f64 - 0.2 * q[0] as f64
        })
        .unwrap();
        let v = cosine(50);
        for mode in [ExpansionMode::Plain, ExpansionMode::Gradient(0)] {
            let r1 = inhomogeneous_expansion(&g, &t, 0.5, 0.2, &v, 7, mode).unwrap().remainder;
            let r2 = inhomogeneous_expansion(&g, &t, 0.5, 0.1, &v, 7, mode).unwrap().remainder;
            assert!(r1.abs() > 0.0);
            assert!(r1 / r2 >= 7.0, "{mode:?}: ratio {}", r1 / r2);
        }
    }

    #[test]
    fn gradient_mode_matches_plain_difference() {
        let t = ring(30);
        let v = cosine(30);
        let g = LocalFunction::occupation(o(0));
        let x = 11;
        let grad = inhomogeneous_expansion(&g, &t, 0.5, 0.05, &v, x, ExpansionMode::Gradient(0)).unwrap();
        let back = inhomogeneous_expansion(&g.translate(&o(-1)), &t, 0.5, 0.05, &v, x, ExpansionMode::Plain).unwrap();
        let here = inhomogeneous_expansion(&g, &t, 0.5, 0.05, &v, x, ExpansionMode::Plain).unwrap();
        let plain: f64 = back.terms.iter().sum::<f64>() - here.terms.iter().sum::<f64>();
        let ours: f64 = grad.terms.iter().sum();
        assert!((plain - ours).abs() < 1e-12);
        assert!(grad.remainder.abs() < 1e-12);
    }

    fn random_function() -> impl Strategy<Value = LocalFunction> {
        prop::collection::vec(-1.0f64..1.0, 16)
            .prop_map(|table| LocalFunction::new(1, vec![o(-2), o(0), o(1), o(4)], table).unwrap())
    }

    proptest! {
        #[test]
        fn fourier_derivative_identity(g in random_function(), theta in 0.05f64..0.95) {
            let exact = tilde_poly(&g).derivative().eval(theta);
            prop_assert!((tilde_derivative_via_fourier(&g, theta) - exact).abs() < 1e-10);
            let h = 1e-6;
            let fd = (tilde_eval(&g, theta + h) - tilde_eval(&g, theta - h)) / (2.0 * h);
            prop_assert!((tilde_derivative_via_fourier(&g, theta) - fd).abs() < 1e-8);
        }
    }
}
