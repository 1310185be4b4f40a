//! Discrete torus geometry, configurations and local (cylinder) functions.
//!
//! Sites are linearised row-major: the coordinate `(x_1, ..., x_d)` maps to
//! `x_1 n^{d-1} + ... + x_d`. Serialised configurations follow the same order.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear index of a torus site.
pub type Site = usize;

/// A displacement in `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Offset(pub Vec<i32>);

impl Offset {
    pub fn zero(d: usize) -> Self {
        Offset(vec![0; d])
    }

    /// The canonical basis vector `e_j` (0-based `j`).
    pub fn unit(d: usize, j: usize) -> Self {
        let mut v = vec![0; d];
        v[j] = 1;
        Offset(v)
    }

    /// `k * e_j`.
    pub fn along(d: usize, j: usize, k: i32) -> Self {
        let mut v = vec![0; d];
        v[j] = k;
        Offset(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn add(&self, other: &Offset) -> Offset {
        Offset(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Offset) -> Offset {
        Offset(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> Offset {
        Offset(self.0.iter().map(|a| -a).collect())
    }

    pub fn linf(&self) -> u32 {
        self.0.iter().map(|a| a.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// The discrete torus `(Z / nZ)^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Torus {
    d: usize,
    n: usize,
}

impl Torus {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::Config(format!("torus needs d >= 1 and n >= 1 (got d={d}, n={n})")));
        }
        let size = (n as u128).checked_pow(d as u32);
        if size.map_or(true, |s| s > usize::MAX as u128) {
            return Err(Error::Config(format!("torus {n}^{d} is too large to index")));
        }
        Ok(Torus { d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn sites(&self) -> std::ops::Range<Site> {
        0..self.size()
    }

    pub fn coords(&self, site: Site) -> Vec<usize> {
        let mut c = vec![0; self.d];
        let mut s = site;
        for k in (0..self.d).rev() {
            c[k] = s % self.n;
            s /= self.n;
        }
        c
    }

    /// Site for arbitrary integer coordinates, reduced modulo `n`.
    pub fn site(&self, coords: &[i64]) -> Site {
        let n = self.n as i64;
        coords.iter().fold(0usize, |acc, &c| acc * self.n + c.rem_euclid(n) as usize)
    }

    pub fn shift(&self, site: Site, offset: &Offset) -> Site {
        debug_assert_eq!(offset.dim(), self.d);
        let n = self.n as i64;
        let mut s = site;
        let mut stride = 1usize;
        let mut out = 0usize;
        for k in (0..self.d).rev() {
            let c = (s % self.n) as i64;
            s /= self.n;
            let shifted = (c + offset.0[k] as i64).rem_euclid(n) as usize;
            out += shifted * stride;
            stride *= self.n;
        }
        out
    }

    /// `x + e_j`.
    pub fn neighbor(&self, site: Site, j: usize) -> Site {
        let stride = self.n.pow((self.d - 1 - j) as u32);
        if (site / stride) % self.n == self.n - 1 {
            site + stride - self.n * stride
        } else {
            site + stride
        }
    }

    /// `x - e_j`.
    pub fn back_neighbor(&self, site: Site, j: usize) -> Site {
        let stride = self.n.pow((self.d - 1 - j) as u32);
        if (site / stride) % self.n == 0 {
            site + self.n * stride - stride
        } else {
            site - stride
        }
    }

    /// Table `x -> x + offset` over all sites.
    pub fn shift_table(&self, offset: &Offset) -> Vec<Site> {
        self.sites().map(|x| self.shift(x, offset)).collect()
    }

    /// Macroscopic position `x / n` in `[0,1)^d`.
    pub fn position(&self, site: Site) -> Vec<f64> {
        self.coords(site).into_iter().map(|c| c as f64 / self.n as f64).collect()
    }

    /// Checks that the offsets are pairwise distinct modulo `n`.
    pub fn check_embeds(&self, support: &[Offset]) -> Result<()> {
        for k in 0..self.d {
            let lo = support.iter().map(|o| o.0[k]).min().unwrap_or(0);
            let hi = support.iter().map(|o| o.0[k]).max().unwrap_or(0);
            let width = (hi - lo + 1) as usize;
            if width > self.n {
                let distinct: BTreeSet<Vec<i64>> = support
                    .iter()
                    .map(|o| o.0.iter().map(|&c| (c as i64).rem_euclid(self.n as i64)).collect())
                    .collect();
                if distinct.len() < support.len() {
                    return Err(Error::Sizing { axis: k, width, side: self.n });
                }
            }
        }
        Ok(())
    }
}

/// Occupation variables `eta in {0,1}^{T^d_n}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    torus: Torus,
    occ: Vec<u8>,
}

impl Configuration {
    pub fn empty(torus: Torus) -> Self {
        Configuration { torus, occ: vec![0; torus.size()] }
    }

    pub fn full(torus: Torus) -> Self {
        Configuration { torus, occ: vec![1; torus.size()] }
    }

    pub fn from_occupancy(torus: Torus, occ: Vec<u8>) -> Result<Self> {
        if occ.len() != torus.size() {
            return Err(Error::Config(format!(
                "configuration has {} sites, torus has {}",
                occ.len(),
                torus.size()
            )));
        }
        if let Some(bad) = occ.iter().find(|&&b| b > 1) {
            return Err(Error::Config(format!("occupation value {bad} is not 0 or 1")));
        }
        Ok(Configuration { torus, occ })
    }

    /// Bit `i` of `mask` is the occupation of site `i`.
    pub fn from_mask(torus: Torus, mask: u64) -> Self {
        let occ = (0..torus.size()).map(|i| ((mask >> i) & 1) as u8).collect();
        Configuration { torus, occ }
    }

    pub fn to_mask(&self) -> u64 {
        assert!(self.occ.len() <= 64, "mask encoding needs at most 64 sites");
        self.occ.iter().enumerate().fold(0u64, |m, (i, &b)| m | ((b as u64) << i))
    }

    pub fn parse(torus: Torus, text: &str) -> Result<Self> {
        let occ = text
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse(format!("unexpected character {other:?} in configuration"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Configuration::from_occupancy(torus, occ)
    }

    pub fn torus(&self) -> Torus {
        self.torus
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occ
    }

    pub fn get(&self, site: Site) -> u8 {
        self.occ[site]
    }

    pub fn set(&mut self, site: Site, value: u8) {
        debug_assert!(value <= 1);
        self.occ[site] = value;
    }

    pub fn particles(&self) -> usize {
        self.occ.iter().map(|&b| b as usize).sum()
    }

    /// `sigma^{x,y} eta`.
    pub fn swapped(&self, x: Site, y: Site) -> Configuration {
        let mut out = self.clone();
        out.swap_in_place(x, y);
        out
    }

    pub fn swap_in_place(&mut self, x: Site, y: Site) {
        self.occ.swap(x, y);
    }

    /// `tau_x eta`, i.e. `(tau_x eta)_z = eta_{x+z}`.
    pub fn translated(&self, x: Site) -> Configuration {
        let shift = Offset(self.torus.coords(x).into_iter().map(|c| c as i32).collect());
        let occ = self.torus.sites().map(|z| self.occ[self.torus.shift(z, &shift)]).collect();
        Configuration { torus: self.torus, occ }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.occ {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// A cylinder function stored as a dense truth table over its support.
///
/// Bit `i` of a pattern index is the occupation at `support[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFunction {
    d: usize,
    support: Vec<Offset>,
    table: Vec<f64>,
}

/// Largest support handled by dense truth tables.
pub const MAX_SUPPORT: usize = 20;

impl LocalFunction {
    pub fn new(d: usize, support: Vec<Offset>, table: Vec<f64>) -> Result<Self> {
        if support.len() > MAX_SUPPORT {
            return Err(Error::Config(format!("support of {} sites is too large", support.len())));
        }
        if support.iter().any(|o| o.dim() != d) {
            return Err(Error::Dimension { expected: d, got: support[0].dim() });
        }
        let distinct: BTreeSet<&Offset> = support.iter().collect();
        if distinct.len() != support.len() {
            return Err(Error::Config("support offsets must be distinct".into()));
        }
        if table.len() != 1 << support.len() {
            return Err(Error::Config(format!(
                "truth table has {} entries, expected {}",
                table.len(),
                1usize << support.len()
            )));
        }
        Ok(LocalFunction { d, support, table })
    }

    /// Builds the table by evaluating `f` on every occupancy pattern of `support`.
    pub fn from_fn(d: usize, support: Vec<Offset>, f: impl Fn(&[u8]) -> f64) -> Result<Self> {
        let s = support.len();
        let mut pattern = vec![0u8; s];
        let table = (0..1usize << s)
            .map(|p| {
                for (i, b) in pattern.iter_mut().enumerate() {
                    *b = ((p >> i) & 1) as u8;
                }
                f(&pattern)
            })
            .collect();
        LocalFunction::new(d, support, table)
    }

    pub fn constant(d: usize, c: f64) -> Self {
        LocalFunction { d, support: Vec::new(), table: vec![c] }
    }

    /// `eta_y`.
    pub fn occupation(offset: Offset) -> Self {
        LocalFunction { d: offset.dim(), support: vec![offset], table: vec![0.0, 1.0] }
    }

    /// `prod_{y in offsets} eta_y`.
    pub fn product(d: usize, offsets: &[Offset]) -> Result<Self> {
        LocalFunction::from_fn(d, offsets.to_vec(), |p| p.iter().map(|&b| b as f64).product())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn support(&self) -> &[Offset] {
        &self.support
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Smallest `l` with `support ⊂ {-l..l}^d`.
    pub fn radius(&self) -> u32 {
        self.support.iter().map(Offset::linf).max().unwrap_or(0)
    }

    pub fn value(&self, pattern: usize) -> f64 {
        self.table[pattern]
    }

    pub fn sup_norm(&self) -> f64 {
        self.table.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.table.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Evaluates with occupations supplied by `read`.
    pub fn eval_with(&self, mut read: impl FnMut(&Offset) -> u8) -> f64 {
        let p = self
            .support
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, o)| acc | ((read(o) as usize) << i));
        self.table[p]
    }

    /// Re-expresses the function on a larger support (which must contain the current one).
    pub fn extend_to(&self, support: &[Offset]) -> Result<LocalFunction> {
        let index: Vec<usize> = self
            .support
            .iter()
            .map(|o| {
                support
                    .iter()
                    .position(|s| s == o)
                    .ok_or_else(|| Error::Config(format!("offset {o} missing from extended support")))
            })
            .collect::<Result<_>>()?;
        LocalFunction::from_fn(self.d, support.to_vec(), |p| {
            let q = index.iter().enumerate().fold(0usize, |acc, (i, &k)| acc | ((p[k] as usize) << i));
            self.table[q]
        })
    }

    fn union_support(&self, other: &LocalFunction) -> Vec<Offset> {
        let mut s = self.support.clone();
        for o in &other.support {
            if !s.contains(o) {
                s.push(o.clone());
            }
        }
        s
    }

    fn zip_with(&self, other: &LocalFunction, op: impl Fn(f64, f64) -> f64) -> LocalFunction {
        assert_eq!(self.d, other.d, "dimension mismatch");
        let support = self.union_support(other);
        let a = self.extend_to(&support).expect("union contains support");
        let b = other.extend_to(&support).expect("union contains support");
        let table = a.table.iter().zip(&b.table).map(|(&x, &y)| op(x, y)).collect();
        LocalFunction { d: self.d, support, table }
    }

    pub fn add(&self, other: &LocalFunction) -> LocalFunction {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &LocalFunction) -> LocalFunction {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &LocalFunction) -> LocalFunction {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, a: f64) -> LocalFunction {
        LocalFunction { d: self.d, support: self.support.clone(), table: self.table.iter().map(|v| a * v).collect() }
    }

    /// `tau_y f`, which reads `eta_{y+z}` wherever `f` reads `eta_z`.
    pub fn translate(&self, y: &Offset) -> LocalFunction {
        LocalFunction {
            d: self.d,
            support: self.support.iter().map(|o| o.add(y)).collect(),
            table: self.table.clone(),
        }
    }

    /// Whether flipping the occupation at `offset` can change the value.
    pub fn depends_on(&self, offset: &Offset) -> bool {
        match self.support.iter().position(|o| o == offset) {
            None => false,
            Some(i) => (0..self.table.len())
                .filter(|p| p >> i & 1 == 0)
                .any(|p| self.table[p] != self.table[p | (1 << i)]),
        }
    }

    /// Coefficients `a_S` of the multilinear form `f = sum_S a_S prod_{i in S} eta_i`,
    /// keyed by bitmask over the support. Zero coefficients are dropped.
    pub fn multilinear(&self) -> Vec<(usize, f64)> {
        let mut a = self.table.clone();
        let s = self.support.len();
        for i in 0..s {
            for p in 0..a.len() {
                if p >> i & 1 == 1 {
                    a[p] -= a[p ^ (1 << i)];
                }
            }
        }
        a.into_iter().enumerate().filter(|(_, c)| *c != 0.0).collect()
    }

    /// Anchors `tau_x f` on the torus, merging support offsets that coincide modulo `n`.
    pub fn anchor(&self, torus: &Torus, x: Site) -> SiteFunction {
        let mut sites: Vec<Site> = Vec::new();
        let map: Vec<usize> = self
            .support
            .iter()
            .map(|o| {
                let s = torus.shift(x, o);
                match sites.iter().position(|&t| t == s) {
                    Some(k) => k,
                    None => {
                        sites.push(s);
                        sites.len() - 1
                    }
                }
            })
            .collect();
        let table = (0..1usize << sites.len())
            .map(|q| {
                let p = map.iter().enumerate().fold(0usize, |acc, (i, &k)| acc | (((q >> k) & 1) << i));
                self.table[p]
            })
            .collect();
        SiteFunction { sites, table }
    }
}

/// A function of the occupations at a fixed list of distinct torus sites.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteFunction {
    pub sites: Vec<Site>,
    pub table: Vec<f64>,
}

impl SiteFunction {
    pub fn pattern_of(&self, config: &Configuration) -> usize {
        self.sites
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &s)| acc | ((config.get(s) as usize) << i))
    }

    pub fn eval(&self, config: &Configuration) -> f64 {
        self.table[self.pattern_of(config)]
    }

    /// Exact expectation under the product measure with marginals `density`.
    pub fn expectation(&self, density: &[f64]) -> f64 {
        let mut total = 0.0;
        for (p, v) in self.table.iter().enumerate() {
            let w: f64 = self
                .sites
                .iter()
                .enumerate()
                .map(|(i, &s)| if p >> i & 1 == 1 { density[s] } else { 1.0 - density[s] })
                .product();
            total += w * v;
        }
        total
    }
}

/// Product-measure weight of every pattern over sites with the given densities.
pub(crate) fn pattern_weights(rho: &[f64]) -> impl Iterator<Item = f64> + '_ {
    (0..1usize << rho.len()).map(move |p| {
        rho.iter()
            .enumerate()
            .map(|(i, &r)| if p >> i & 1 == 1 { r } else { 1.0 - r })
            .product()
    })
}

/// `(tau_x f)(eta) = f(tau_x eta)`.
pub fn eval_local(f: &LocalFunction, config: &Configuration, x: Site) -> Result<f64> {
    let torus = config.torus();
    if f.dim() != torus.dim() {
        return Err(Error::Dimension { expected: torus.dim(), got: f.dim() });
    }
    torus.check_embeds(f.support())?;
    Ok(f.eval_with(|o| config.get(torus.shift(x, o))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring(n: usize) -> Torus {
        Torus::new(1, n).unwrap()
    }

    #[test]
    fn neighbors_agree_with_shifts() {
        for (d, n) in [(1, 1), (1, 5), (2, 3), (3, 4)] {
            let t = Torus::new(d, n).unwrap();
            for j in 0..d {
                for x in t.sites() {
                    assert_eq!(t.neighbor(x, j), t.shift(x, &Offset::unit(d, j)));
                    assert_eq!(t.back_neighbor(x, j), t.shift(x, &Offset::along(d, j, -1)));
                }
            }
        }
    }

    #[test]
    fn swap_examples() {
        let t = ring(2);
        let eta = Configuration::parse(t, "10").unwrap();
        assert_eq!(eta.swapped(0, 1).to_string(), "01");
        assert_eq!(eta.swapped(1, 1), eta);
    }

    #[test]
    fn eval_local_examples() {
        let t = ring(4);
        let eta = Configuration::parse(t, "0010").unwrap();
        let f = LocalFunction::occupation(Offset(vec![0]));
        assert_eq!(eval_local(&f, &eta, 2).unwrap(), 1.0);

        let t2 = ring(2);
        let eta = Configuration::parse(t2, "10").unwrap();
        let g = LocalFunction::from_fn(1, vec![Offset(vec![0]), Offset(vec![1])], |p| {
            p[0] as f64 * (1.0 - p[1] as f64)
        })
        .unwrap();
        assert_eq!(eval_local(&g, &eta, 0).unwrap(), 1.0);
    }

    #[test]
    fn eval_local_rejects_wide_support() {
        let t = ring(3);
        let f = LocalFunction::product(1, &[Offset(vec![-1]), Offset(vec![2])]).unwrap();
        let eta = Configuration::empty(t);
        assert!(matches!(eval_local(&f, &eta, 0), Err(Error::Sizing { .. })));
        // Same support fits on n = 4.
        let eta4 = Configuration::empty(ring(4));
        assert!(eval_local(&f, &eta4, 0).is_ok());
    }

    #[test]
    fn row_major_indexing() {
        let t = Torus::new(2, 3).unwrap();
        assert_eq!(t.site(&[1, 2]), 5);
        assert_eq!(t.coords(5), vec![1, 2]);
        assert_eq!(t.shift(5, &Offset(vec![2, 1])), t.site(&[0, 0]));
        assert_eq!(t.neighbor(t.site(&[0, 2]), 1), t.site(&[0, 0]));
    }

    #[test]
    fn translations_compose_exhaustively() {
        let t = Torus::new(2, 3).unwrap();
        for mask in 0..(1u64 << 9) {
            let eta = Configuration::from_mask(t, mask);
            for x in t.sites() {
                for y in t.sites() {
                    let xc = t.coords(x);
                    let yc = t.coords(y);
                    let sum: Vec<i64> = xc.iter().zip(&yc).map(|(a, b)| (a + b) as i64).collect();
                    let xy = t.site(&sum);
                    assert_eq!(eta.translated(y).translated(x), eta.translated(xy));
                }
            }
        }
    }

    #[test]
    fn eval_matches_table_on_every_pattern() {
        let support = vec![Offset(vec![-1]), Offset(vec![0]), Offset(vec![2])];
        let f = LocalFunction::from_fn(1, support.clone(), |p| {
            1.0 + 2.0 * p[0] as f64 - 3.0 * (p[1] * p[2]) as f64
        })
        .unwrap();
        let t = ring(7);
        for pattern in 0..8usize {
            let mut eta = Configuration::empty(t);
            for (i, o) in support.iter().enumerate() {
                eta.set(t.shift(3, o), ((pattern >> i) & 1) as u8);
            }
            assert_eq!(eval_local(&f, &eta, 3).unwrap(), f.value(pattern));
        }
    }

    #[test]
    fn multilinear_reconstructs_table() {
        let f = LocalFunction::from_fn(1, vec![Offset(vec![0]), Offset(vec![1]), Offset(vec![3])], |p| {
            (p[0] + 2 * p[1]) as f64 * (1.5 - p[2] as f64)
        })
        .unwrap();
        let coeffs = f.multilinear();
        for p in 0..8usize {
            let v: f64 = coeffs.iter().filter(|(m, _)| m & !p == 0).map(|(_, c)| c).sum();
            assert!((v - f.value(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn anchoring_merges_aliased_offsets() {
        // c = 1 + beta (eta_{-1} + eta_2) on a ring of 3: both offsets read site x+2.
        let c = LocalFunction::from_fn(1, vec![Offset(vec![-1]), Offset(vec![2])], |p| {
            1.0 + 0.2 * (p[0] + p[1]) as f64
        })
        .unwrap();
        let a = c.anchor(&ring(3), 0);
        assert_eq!(a.sites, vec![2]);
        assert!((a.table[0] - 1.0).abs() < 1e-15);
        assert!((a.table[1] - 1.4).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn swap_is_an_involution_preserving_mass(mask in 0u64..(1 << 12), x in 0usize..12, y in 0usize..12) {
            let t = ring(12);
            let eta = Configuration::from_mask(t, mask);
            let once = eta.swapped(x, y);
            prop_assert_eq!(once.particles(), eta.particles());
            prop_assert_eq!(once.swapped(x, y), eta);
        }

        #[test]
        fn translation_is_a_group_action_on_local_functions(mask in 0u64..(1 << 10), x in 0usize..10, y in 0usize..10) {
            let t = ring(10);
            let eta = Configuration::from_mask(t, mask);
            let f = LocalFunction::from_fn(1, vec![Offset(vec![0]), Offset(vec![1]), Offset(vec![-2])], |p| {
                p[0] as f64 - 0.5 * (p[1] * p[2]) as f64
            }).unwrap();
            let shifted = f.translate(&Offset(vec![y as i32]));
            let xm = (x + 10 - y) % 10;
            prop_assert_eq!(eval_local(&f, &eta, x).unwrap(), eval_local(&shifted, &eta, xm).unwrap());
        }
    }
}
