//! Product Bernoulli measures with site-dependent densities.
//!
//! Entropies use the natural logarithm.

use std::io::{Read, Write};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Configuration, LocalFunction, Site, Torus};

/// Clamp margin used on the simulation path.
pub const CLAMP: f64 = 1e-9;

/// Static compressibility `rho (1 - rho)`.
pub fn chi(rho: f64) -> f64 {
    rho * (1.0 - rho)
}

/// Seeded generator for replica `stream`; distinct streams never overlap.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `rho = alpha + kappa * v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub alpha: f64,
    pub kappa: f64,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityProfile {
    torus: Torus,
    values: Vec<f64>,
    decomposition: Option<Decomposition>,
}

impl DensityProfile {
    /// Strictly interior profile.
    pub fn new(torus: Torus, values: Vec<f64>) -> Result<Self> {
        Self::check_len(&torus, values.len())?;
        if let Some((x, r)) = values.iter().enumerate().find(|(_, r)| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::Profile(format!("density {r} at site {x} is not in (0,1)")));
        }
        Ok(DensityProfile { torus, values, decomposition: None })
    }

    /// Allows densities on the closed interval; meant for tests of degenerate limits.
    pub fn degenerate(torus: Torus, values: Vec<f64>) -> Result<Self> {
        Self::check_len(&torus, values.len())?;
        if let Some((x, r)) = values.iter().enumerate().find(|(_, r)| !(**r >= 0.0 && **r <= 1.0)) {
            return Err(Error::Profile(format!("density {r} at site {x} is not in [0,1]")));
        }
        Ok(DensityProfile { torus, values, decomposition: None })
    }

    /// Clamps into `[CLAMP, 1 - CLAMP]`, warning when anything moved.
    pub fn clamped(torus: Torus, values: Vec<f64>) -> Result<Self> {
        Self::check_len(&torus, values.len())?;
        let mut moved = 0usize;
        let values = values
            .into_iter()
            .map(|r| {
                let c = r.clamp(CLAMP, 1.0 - CLAMP);
                if c != r {
                    moved += 1;
                }
                c
            })
            .collect();
        if moved > 0 {
            warn!("clamped {moved} densities into [{CLAMP}, {}]", 1.0 - CLAMP);
        }
        Ok(DensityProfile { torus, values, decomposition: None })
    }

    pub fn constant(torus: Torus, alpha: f64) -> Result<Self> {
        DensityProfile::new(torus, vec![alpha; torus.size()])
    }

    /// `rho(x) = alpha + kappa v(x)`, kept alongside its decomposition.
    pub fn perturbed(torus: Torus, alpha: f64, kappa: f64, v: Vec<f64>) -> Result<Self> {
        let values = v.iter().map(|vx| alpha + kappa * vx).collect();
        let mut p = DensityProfile::new(torus, values)?;
        p.decomposition = Some(Decomposition { alpha, kappa, v });
        Ok(p)
    }

    /// Samples a macroscopic profile at the positions `x / n`.
    pub fn from_fn(torus: Torus, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = torus.sites().map(|x| f(&torus.position(x))).collect();
        DensityProfile::new(torus, values)
    }

    fn check_len(torus: &Torus, len: usize) -> Result<()> {
        if len != torus.size() {
            return Err(Error::Profile(format!("{len} values for a torus of {} sites", torus.size())));
        }
        Ok(())
    }

    pub fn torus(&self) -> Torus {
        self.torus
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: Site) -> f64 {
        self.values[x]
    }

    pub fn decomposition(&self) -> Option<&Decomposition> {
        self.decomposition.as_ref()
    }

    pub fn is_interior(&self) -> bool {
        self.values.iter().all(|&r| r > 0.0 && r < 1.0)
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&r| r == self.values[0])
    }

    pub fn require_interior(&self) -> Result<()> {
        match self.values.iter().position(|&r| !(r > 0.0 && r < 1.0)) {
            None => Ok(()),
            Some(x) => Err(Error::Profile(format!("density {} at site {x} touches the boundary", self.values[x]))),
        }
    }

    /// Log-density `log nu_rho(eta)`.
    pub fn log_density(&self, config: &Configuration) -> f64 {
        self.values
            .iter()
            .zip(config.occupancy())
            .map(|(&r, &b)| if b == 1 { r.ln() } else { (1.0 - r).ln() })
            .sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["site_index", "density"])?;
        for (x, r) in self.values.iter().enumerate() {
            out.write_record([x.to_string(), format!("{r:e}")])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(torus: Torus, r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            site_index: usize,
            density: f64,
        }
        let mut values = vec![f64::NAN; torus.size()];
        for row in csv::Reader::from_reader(r).deserialize::<Row>() {
            let row = row?;
            let slot = values
                .get_mut(row.site_index)
                .ok_or_else(|| Error::Profile(format!("site index {} out of range", row.site_index)))?;
            *slot = row.density;
        }
        if let Some(x) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Profile(format!("missing density for site {x}")));
        }
        DensityProfile::new(torus, values)
    }
}

/// Named macroscopic initial profiles `v0(theta)` on the unit torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    Const { value: f64 },
    /// `cos(2 pi k theta_1)`.
    CosK { k: u32 },
    /// `sin(2 pi k theta_1)`.
    SinK { k: u32 },
    /// Periodic bump `exp(-(1 - cos 2 pi (theta_1 - center)) / (4 pi^2 width^2))`.
    Bump { center: f64, width: f64 },
}

impl InitialProfile {
    pub fn eval(&self, theta: &[f64]) -> f64 {
        use std::f64::consts::TAU;
        match *self {
            InitialProfile::Const { value } => value,
            InitialProfile::CosK { k } => (TAU * k as f64 * theta[0]).cos(),
            InitialProfile::SinK { k } => (TAU * k as f64 * theta[0]).sin(),
            InitialProfile::Bump { center, width } => {
                let s = 1.0 - (TAU * (theta[0] - center)).cos();
                (-s / (TAU * TAU * width * width)).exp()
            }
        }
    }

    /// Samples `v0(x / n)` on the lattice.
    pub fn sample(&self, torus: &Torus) -> Vec<f64> {
        torus.sites().map(|x| self.eval(&torus.position(x))).collect()
    }
}

/// Perturbation form `alpha + epsilon v0`, as stored in profile files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub alpha: f64,
    pub epsilon: f64,
    pub initial: InitialProfile,
}

impl PerturbationSpec {
    pub fn profile(&self, torus: Torus) -> Result<DensityProfile> {
        DensityProfile::perturbed(torus, self.alpha, self.epsilon, self.initial.sample(&torus))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Independent Bernoulli occupations; `stream` separates replicas sharing a seed.
pub fn sample_product(profile: &DensityProfile, seed: u64, stream: u64) -> Configuration {
    let mut rng = rng_for(seed, stream);
    sample_product_with(profile, &mut rng)
}

pub fn sample_product_with<R: Rng>(profile: &DensityProfile, rng: &mut R) -> Configuration {
    let occ = profile
        .values()
        .iter()
        .map(|&r| u8::from(rng.random::<f64>() < r))
        .collect();
    Configuration::from_occupancy(profile.torus(), occ).expect("profile matches torus")
}

/// Exact `E_{nu_rho}[tau_x f]` by summing the truth table.
pub fn expect_local(f: &LocalFunction, profile: &DensityProfile, x: Site) -> Result<f64> {
    let torus = profile.torus();
    if f.dim() != torus.dim() {
        return Err(Error::Dimension { expected: torus.dim(), got: f.dim() });
    }
    torus.check_embeds(f.support())?;
    Ok(f.anchor(&torus, x).expectation(profile.values()))
}

/// `g~(alpha) = E_{nu_alpha}[g]`.
pub fn tilde_eval(g: &LocalFunction, alpha: f64) -> f64 {
    let rho = vec![alpha; g.support().len()];
    crate::lattice::pattern_weights(&rho).zip(g.table()).map(|(w, v)| w * v).sum()
}

/// Exact polynomial `g~`: each monomial `prod_{i in S} eta_i` contributes `alpha^{|S|}`.
pub fn tilde_poly(g: &LocalFunction) -> Polynomial {
    let mut coeffs = vec![0.0; g.support().len() + 1];
    for (mask, a) in g.multilinear() {
        coeffs[mask.count_ones() as usize] += a;
    }
    Polynomial::new(coeffs)
}

/// Dense real polynomial, lowest degree first.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(self.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Polynomial, i: usize| p.coeffs.get(i).copied().unwrap_or(0.0);
        Polynomial::new((0..len).map(|i| get(self, i) + get(other, i)).collect())
    }

    pub fn scale(&self, a: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| a * c).collect())
    }

    /// Sign-change roots in the open interval, found on a uniform grid and refined by bisection.
    pub fn roots_in(&self, lo: f64, hi: f64, grid: usize) -> Vec<f64> {
        let mut roots: Vec<f64> = Vec::new();
        let h = (hi - lo) / grid as f64;
        let mut a = lo;
        let mut fa = self.eval(a);
        for k in 1..=grid {
            let b = if k == grid { hi } else { lo + k as f64 * h };
            let fb = self.eval(b);
            if fa == 0.0 && a > lo {
                roots.push(a);
            } else if fa * fb < 0.0 {
                roots.push(self.bisect(a, b));
            }
            a = b;
            fa = fb;
        }
        roots.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        roots
    }

    fn bisect(&self, mut a: f64, mut b: f64) -> f64 {
        let mut fa = self.eval(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = self.eval(m);
            if fm == 0.0 {
                return m;
            }
            if fa * fm < 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        0.5 * (a + b)
    }
}

fn bernoulli_kl(u2: f64, u1: f64) -> f64 {
    let term = |p: f64, q: f64| {
        if p == 0.0 {
            0.0
        } else if q == 0.0 {
            f64::INFINITY
        } else {
            p * (p / q).ln()
        }
    };
    term(u2, u1) + term(1.0 - u2, 1.0 - u1)
}

/// `H(nu_target | nu_reference)` in closed form; `INFINITY` when the target is
/// not absolutely continuous with respect to a degenerate reference.
pub fn product_relative_entropy(target: &DensityProfile, reference: &DensityProfile) -> Result<f64> {
    if target.values().len() != reference.values().len() {
        return Err(Error::Profile("profiles live on different tori".into()));
    }
    Ok(target
        .values()
        .iter()
        .zip(reference.values())
        .map(|(&u2, &u1)| bernoulli_kl(u2, u1))
        .sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticReport {
    pub kappa: f64,
    pub quadratic: f64,
    pub exact: f64,
    pub remainder: f64,
    pub quadratic_half: f64,
    pub exact_half: f64,
    pub remainder_half: f64,
    /// `remainder(kappa) / remainder(kappa / 2)`; about 8 for a cubic remainder.
    pub ratio: f64,
    /// `|remainder| / (kappa^3 * sites)`.
    pub c0: f64,
}

/// Quadratic approximation of `H(nu_{u + kappa u2} | nu_{u + kappa u1})`, checked at `kappa` and `kappa / 2`.
pub fn entropy_quadratic_approx(
    base: &DensityProfile,
    u1: &[f64],
    u2: &[f64],
    kappa: f64,
) -> Result<QuadraticReport> {
    base.require_interior()?;
    let torus = base.torus();
    if u1.len() != torus.size() || u2.len() != torus.size() {
        return Err(Error::Profile("perturbations must have one value per site".into()));
    }
    let eval = |k: f64| -> Result<(f64, f64)> {
        let shift = |u: &[f64]| base.values().iter().zip(u).map(|(b, w)| b + k * w).collect::<Vec<_>>();
        let target = DensityProfile::new(torus, shift(u2))?;
        let reference = DensityProfile::new(torus, shift(u1))?;
        let quad = 0.5
            * k
            * k
            * base
                .values()
                .iter()
                .zip(u1.iter().zip(u2))
                .map(|(&b, (a, c))| (c - a).powi(2) / chi(b))
                .sum::<f64>();
        Ok((quad, product_relative_entropy(&target, &reference)?))
    };
    let (quadratic, exact) = eval(kappa)?;
    let (quadratic_half, exact_half) = eval(0.5 * kappa)?;
    let remainder = exact - quadratic;
    let remainder_half = exact_half - quadratic_half;
    Ok(QuadraticReport {
        kappa,
        quadratic,
        exact,
        remainder,
        quadratic_half,
        exact_half,
        remainder_half,
        ratio: remainder / remainder_half,
        c0: remainder.abs() / (kappa.powi(3) * torus.size() as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Offset;
    use proptest::prelude::*;

    fn ring(n: usize) -> Torus {
        Torus::new(1, n).unwrap()
    }

    #[test]
    fn degenerate_profiles_sample_deterministically() {
        let t = ring(16);
        let zero = DensityProfile::degenerate(t, vec![0.0; 16]).unwrap();
        let one = DensityProfile::degenerate(t, vec![1.0; 16]).unwrap();
        assert_eq!(sample_product(&zero, 3, 0).particles(), 0);
        assert_eq!(sample_product(&one, 3, 0).particles(), 16);
        assert!(DensityProfile::new(t, vec![0.0; 16]).is_err());
    }

    #[test]
    fn clamping_keeps_values_interior() {
        let p = DensityProfile::clamped(ring(3), vec![0.0, 0.5, 1.0]).unwrap();
        assert!(p.is_interior());
        assert_eq!(p.get(0), CLAMP);
    }

    #[test]
    fn half_density_sample_mean() {
        let n = 10_000;
        let p = DensityProfile::constant(ring(n), 0.5).unwrap();
        let eta = sample_product(&p, 11, 0);
        let mean = eta.particles() as f64 / n as f64;
        assert!((mean - 0.5).abs() <= 3.0 * 0.5 / (n as f64).sqrt());
        assert_eq!(sample_product(&p, 11, 0), eta);
        assert_ne!(sample_product(&p, 11, 1), eta);
    }

    #[test]
    fn expectation_examples() {
        let t = ring(8);
        let p = DensityProfile::from_fn(t, |th| 0.3 + 0.2 * th[0]).unwrap();
        let eta0 = LocalFunction::occupation(Offset(vec![0]));
        for x in t.sites() {
            assert!((expect_local(&eta0, &p, x).unwrap() - p.get(x)).abs() < 1e-15);
        }
        let c = DensityProfile::constant(t, 0.3).unwrap();
        let pair = LocalFunction::product(1, &[Offset(vec![0]), Offset(vec![1])]).unwrap();
        assert!((expect_local(&pair, &c, 2).unwrap() - 0.09).abs() < 1e-15);
        let half = DensityProfile::constant(t, 0.5).unwrap();
        let f = LocalFunction::from_fn(1, vec![Offset(vec![-1]), Offset(vec![2])], |q| {
            1.0 + (q[0] + q[1]) as f64
        })
        .unwrap();
        assert!((expect_local(&f, &half, 0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn expectation_agrees_with_sampling() {
        let t = ring(4000);
        let p = DensityProfile::from_fn(t, |th| 0.5 + 0.3 * (std::f64::consts::TAU * th[0]).sin()).unwrap();
        let f = LocalFunction::from_fn(1, vec![Offset(vec![0]), Offset(vec![1])], |q| {
            (q[0] as f64) * (1.0 - q[1] as f64) + 0.5 * q[1] as f64
        })
        .unwrap();
        let eta = sample_product(&p, 5, 0);
        let n = t.size() as f64;
        let exact: f64 = t.sites().map(|x| expect_local(&f, &p, x).unwrap()).sum::<f64>() / n;
        let vals: Vec<f64> = t.sites().map(|x| crate::lattice::eval_local(&f, &eta, x).unwrap()).collect();
        let mean = vals.iter().sum::<f64>() / n;
        // Neighbouring terms share one site, so the variance at most triples.
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((mean - exact).abs() < 4.0 * (3.0 * var / n).sqrt());
    }

    #[test]
    fn tilde_examples() {
        let eta0 = LocalFunction::occupation(Offset(vec![0]));
        let pair = LocalFunction::product(1, &[Offset(vec![0]), Offset(vec![1])]).unwrap();
        let d = LocalFunction::from_fn(1, vec![Offset(vec![0]), Offset(vec![1])], |q| {
            q[0] as f64 * (1.0 - q[1] as f64)
        })
        .unwrap();
        assert_eq!(tilde_poly(&eta0).coeffs(), &[0.0, 1.0]);
        assert_eq!(tilde_poly(&pair).coeffs(), &[0.0, 0.0, 1.0]);
        assert_eq!(tilde_poly(&d).coeffs(), &[0.0, 1.0, -1.0]);
        assert!((tilde_eval(&d, 0.3) - 0.21).abs() < 1e-15);
    }

    #[test]
    fn relative_entropy_examples() {
        let one = ring(1);
        let a = DensityProfile::constant(one, 0.6).unwrap();
        let b = DensityProfile::constant(one, 0.5).unwrap();
        let h = product_relative_entropy(&a, &b).unwrap();
        assert!((h - 0.020135513550688863).abs() < 1e-15);
        assert!((h - (0.6 * 1.2f64.ln() + 0.4 * 0.8f64.ln())).abs() < 1e-15);
        assert_eq!(product_relative_entropy(&a, &a).unwrap(), 0.0);
        let big = ring(37);
        let a37 = DensityProfile::constant(big, 0.6).unwrap();
        let b37 = DensityProfile::constant(big, 0.5).unwrap();
        assert!((product_relative_entropy(&a37, &b37).unwrap() - 37.0 * h).abs() < 1e-13);
        let degenerate = DensityProfile::degenerate(one, vec![0.0]).unwrap();
        assert_eq!(product_relative_entropy(&a, &degenerate).unwrap(), f64::INFINITY);
    }

    #[test]
    fn quadratic_approximation_example() {
        let t = ring(10);
        let base = DensityProfile::constant(t, 0.5).unwrap();
        let r = entropy_quadratic_approx(&base, &[0.0; 10], &[1.0; 10], 0.1).unwrap();
        assert!((r.quadratic - 0.2).abs() < 1e-14);
        assert!((r.exact / 10.0 - 0.0201355).abs() < 1e-7);
        // Symmetric base: the cubic term cancels, leaving a quartic remainder.
        assert!((r.remainder / 10.0 - 1.355e-4).abs() < 1e-6);
        assert!((r.ratio - 16.0).abs() < 0.2);
        let same = entropy_quadratic_approx(&base, &[0.3; 10], &[0.3; 10], 0.1).unwrap();
        assert_eq!(same.quadratic, 0.0);
        assert_eq!(same.exact, 0.0);
    }

    #[test]
    fn perturbation_spec_round_trip() {
        let spec = PerturbationSpec { alpha: 0.5, epsilon: 0.1, initial: InitialProfile::CosK { k: 2 } };
        let text = spec.to_toml().unwrap();
        assert_eq!(PerturbationSpec::from_toml(&text).unwrap(), spec);
        let p = spec.profile(ring(8)).unwrap();
        assert!((p.get(0) - 0.6).abs() < 1e-15);
        assert!((p.get(2) - 0.4).abs() < 1e-15);
        let d = p.decomposition().unwrap();
        for x in 0..8 {
            assert_eq!(d.alpha + d.kappa * d.v[x], p.get(x));
        }
    }

    #[test]
    fn profile_csv_round_trip() {
        let t = ring(6);
        let p = DensityProfile::from_fn(t, |th| 0.2 + 0.5 * th[0]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = DensityProfile::read_csv(t, buf.as_slice()).unwrap();
        assert_eq!(p.values(), q.values());
    }

    fn random_function() -> impl Strategy<Value = LocalFunction> {
        prop::collection::vec(-2.0f64..2.0, 8).prop_map(|table| {
            LocalFunction::new(1, vec![Offset(vec![-1]), Offset(vec![0]), Offset(vec![3])], table).unwrap()
        })
    }

    proptest! {
        #[test]
        fn tilde_poly_matches_tilde_eval(g in random_function(), alpha in 0.0f64..1.0) {
            let p = tilde_poly(&g);
            prop_assert!((p.eval(alpha) - tilde_eval(&g, alpha)).abs() <= 1e-12);
        }

        #[test]
        fn expectation_is_linear(f in random_function(), g in random_function(), a in -3.0f64..3.0) {
            let t = ring(9);
            let p = DensityProfile::from_fn(t, |th| 0.4 + 0.3 * th[0]).unwrap();
            let h = f.scale(a).add(&g);
            for x in t.sites() {
                let lhs = expect_local(&h, &p, x).unwrap();
                let rhs = a * expect_local(&f, &p, x).unwrap() + expect_local(&g, &p, x).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }

        #[test]
        fn relative_entropy_is_nonnegative(a in prop::collection::vec(0.01f64..0.99, 5), b in prop::collection::vec(0.01f64..0.99, 5)) {
            let t = ring(5);
            let pa = DensityProfile::new(t, a.clone()).unwrap();
            let pb = DensityProfile::new(t, b.clone()).unwrap();
            let h = product_relative_entropy(&pa, &pb).unwrap();
            prop_assert!(h >= 0.0);
            if a != b {
                prop_assert!(h > 0.0);
            }
        }
    }
}
