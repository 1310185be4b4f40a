//! Scaling plans and event-driven simulation of `n^2 L^S + a_n n L^T`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Offset, Site, SiteFunction, Torus};
use crate::measures::rng_for;
use crate::rates::RateSpec;

/// `g_d(n)`: `n` in one dimension, `log n` in two, `1` above.
pub fn g_d(d: usize, n: usize) -> f64 {
    match d {
        1 => n as f64,
        2 => (n as f64).ln(),
        _ => 1.0,
    }
}

/// How `eps_n` depends on `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalingRule {
    /// `eps_n = n^p`.
    NPow(f64),
    /// `eps_n = c`.
    Const(f64),
}

impl ScalingRule {
    pub fn epsilon(&self, n: usize) -> f64 {
        match *self {
            ScalingRule::NPow(p) => (n as f64).powf(p),
            ScalingRule::Const(c) => c,
        }
    }
}

impl FromStr for ScalingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("scaling rule {s:?} is not `n_pow:<p>` or `const:<c>`"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        match kind.trim() {
            "n_pow" => Ok(ScalingRule::NPow(value)),
            "const" if value > 0.0 => Ok(ScalingRule::Const(value)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ScalingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalingRule::NPow(p) => write!(f, "n_pow:{p}"),
            ScalingRule::Const(c) => write!(f, "const:{c}"),
        }
    }
}

impl Serialize for ScalingRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScalingRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `(d, n, a_n, eps_n = 1 / a_n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPlan {
    pub d: usize,
    pub n: usize,
    pub a_n: f64,
    pub eps: f64,
}

impl ScalingPlan {
    pub fn new(d: usize, n: usize, a_n: f64) -> Result<Self> {
        if !(a_n > 0.0 && a_n.is_finite()) {
            return Err(Error::Config(format!("a_n must be positive and finite, got {a_n}")));
        }
        Ok(ScalingPlan { d, n, a_n, eps: 1.0 / a_n })
    }

    pub fn from_epsilon(d: usize, n: usize, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!("eps_n must be positive and finite, got {eps}")));
        }
        Ok(ScalingPlan { d, n, a_n: 1.0 / eps, eps })
    }

    pub fn from_rule(d: usize, n: usize, rule: ScalingRule) -> Result<Self> {
        ScalingPlan::from_epsilon(d, n, rule.epsilon(n))
    }

    pub fn g_d(&self) -> f64 {
        g_d(self.d, self.n)
    }

    /// `a_n / n`, the relative strength of the asymmetric part.
    pub fn asymmetry_ratio(&self) -> f64 {
        self.a_n / self.n as f64
    }

    /// Prefactor of the symmetric part, `n^2`.
    pub fn symmetric_scale(&self) -> f64 {
        (self.n * self.n) as f64
    }

    /// Prefactor of the asymmetric part, `a_n n`.
    pub fn asymmetric_scale(&self) -> f64 {
        self.a_n * self.n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    /// `a`, `b` or `c` for `d = 1`, `2`, `>= 3`.
    pub clause: char,
    /// `g_d(n) / (n^2 eps^2)`; the lower condition asks for this to be small.
    pub lower_margin: f64,
    /// `n^2 eps^4 / (C0 g_d(n))`; the upper condition asks for at most one.
    pub upper_margin: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// `a_n / n`, which must vanish as `n` grows.
    pub asymmetry_ratio: f64,
}

impl ScalingReport {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Largest finite-n value of `g_d(n) / (n^2 eps^2)` read as "much smaller than one".
pub const LOWER_MARGIN_MAX: f64 = 0.5;

/// Evaluates both regime conditions at finite `n` with constant `c0`.
pub fn scaling_check(plan: &ScalingPlan, c0: f64) -> ScalingReport {
    let n = plan.n as f64;
    let g = plan.g_d();
    let lower_margin = g / (n * n * plan.eps * plan.eps);
    let upper_margin = n * n * plan.eps.powi(4) / (c0 * g);
    ScalingReport {
        clause: match plan.d {
            1 => 'a',
            2 => 'b',
            _ => 'c',
        },
        lower_margin,
        upper_margin,
        lower_ok: lower_margin < LOWER_MARGIN_MAX,
        upper_ok: upper_margin <= 1.0,
        asymmetry_ratio: plan.asymmetry_ratio(),
    }
}

/// Effective jump rate of the bond `(x, x+e_j)` for a rate already evaluated to `c`.
fn effective_rate(c: f64, from: u8, to: u8, drift: f64, scaling: &ScalingPlan) -> f64 {
    match (from, to) {
        (1, 0) => scaling.symmetric_scale() * c + scaling.asymmetric_scale() * drift * c,
        (0, 1) => scaling.symmetric_scale() * c,
        _ => 0.0,
    }
}

/// Rates of the exchanges across `(x, x+e_j)`: `(x -> x+e_j, x+e_j -> x)`.
/// At most one of them is nonzero.
pub fn bond_rates(spec: &RateSpec, config: &Configuration, scaling: &ScalingPlan, x: Site, j: usize) -> Result<(f64, f64)> {
    let torus = config.torus();
    if spec.dim() != torus.dim() {
        return Err(Error::Dimension { expected: torus.dim(), got: spec.dim() });
    }
    let y = torus.neighbor(x, j);
    let (a, b) = (config.get(x), config.get(y));
    if a == b {
        return Ok((0.0, 0.0));
    }
    let c = spec.direction(j).rate.anchor(&torus, x).eval(config);
    let r = effective_rate(c, a, b, spec.direction(j).drift, scaling);
    if r < 0.0 {
        return Err(Error::NegativeRate { direction: j, rate: r, n: scaling.n, a_n: scaling.a_n });
    }
    Ok(if a == 1 { (r, 0.0) } else { (0.0, r) })
}

/// Rejects `(spec, n, a_n)` when some local pattern of `c_j` gives a negative forward rate.
pub fn check_rates_nonnegative(spec: &RateSpec, scaling: &ScalingPlan) -> Result<()> {
    for (j, dir) in spec.directions().iter().enumerate() {
        for &c in dir.rate.table() {
            let r = effective_rate(c, 1, 0, dir.drift, scaling).min(effective_rate(c, 0, 1, dir.drift, scaling));
            if r < 0.0 {
                return Err(Error::NegativeRate { direction: j, rate: r, n: scaling.n, a_n: scaling.a_n });
            }
        }
    }
    Ok(())
}

/// Complete binary sum tree over bond rates; parents are recomputed from their children
/// so the total never accumulates update roundoff.
#[derive(Clone, Debug)]
struct RateTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl RateTree {
    fn new(rates: &[f64]) -> Self {
        let leaves = rates.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * leaves];
        nodes[leaves..leaves + rates.len()].copy_from_slice(rates);
        for i in (1..leaves).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        RateTree { leaves, nodes }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    fn set(&mut self, i: usize, rate: f64) {
        let mut k = self.leaves + i;
        if self.nodes[k] == rate {
            return;
        }
        self.nodes[k] = rate;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf whose cumulative interval contains `u in [0, total)`.
    fn find(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if u < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        k - self.leaves
    }
}

/// One exchange `from -> to` at time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub from: Site,
    pub to: Site,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub record_events: bool,
    /// Full cache recomputation every this many events (0 disables).
    pub coherence_stride: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { record_events: false, coherence_stride: if cfg!(debug_assertions) { 4096 } else { 0 } }
    }
}

/// State of one replica: configuration, cached bond rates, clock and random stream.
pub struct SimState {
    torus: Torus,
    scaling: ScalingPlan,
    rates: Vec<SiteFunction>,
    drift: Vec<f64>,
    ends: Vec<(Site, Site)>,
    deps: Vec<Vec<usize>>,
    tree: RateTree,
    config: Configuration,
    time: f64,
    events: u64,
    rng: ChaCha8Rng,
    options: SimOptions,
    log: Vec<Event>,
}

impl SimState {
    pub fn new(spec: &RateSpec, initial: Configuration, scaling: &ScalingPlan, rng: ChaCha8Rng, options: SimOptions) -> Result<Self> {
        let torus = initial.torus();
        if spec.dim() != torus.dim() {
            return Err(Error::Dimension { expected: torus.dim(), got: spec.dim() });
        }
        check_rates_nonnegative(spec, scaling)?;
        let size = torus.size();
        let mut rates = Vec::with_capacity(size * spec.dim());
        let mut drift = Vec::with_capacity(size * spec.dim());
        let mut ends = Vec::with_capacity(size * spec.dim());
        let mut deps = vec![Vec::new(); size];
        for (j, dir) in spec.directions().iter().enumerate() {
            for x in torus.sites() {
                let bond = rates.len();
                let f = dir.rate.anchor(&torus, x);
                let y = torus.neighbor(x, j);
                for &s in f.sites.iter().chain([x, y].iter()) {
                    if !deps[s].contains(&bond) {
                        deps[s].push(bond);
                    }
                }
                rates.push(f);
                drift.push(dir.drift);
                ends.push((x, y));
            }
        }
        let mut state = SimState {
            torus,
            scaling: *scaling,
            rates,
            drift,
            ends,
            deps,
            tree: RateTree::new(&[]),
            config: initial,
            time: 0.0,
            events: 0,
            rng,
            options,
            log: Vec::new(),
        };
        let fresh = state.fresh_rates()?;
        state.tree = RateTree::new(&fresh);
        Ok(state)
    }

    fn bond_rate(&self, b: usize) -> Result<f64> {
        let (x, y) = self.ends[b];
        let (a, c) = (self.config.get(x), self.config.get(y));
        if a == c {
            return Ok(0.0);
        }
        let r = effective_rate(self.rates[b].eval(&self.config), a, c, self.drift[b], &self.scaling);
        if r < 0.0 {
            return Err(Error::NegativeRate { direction: b / self.torus.size(), rate: r, n: self.scaling.n, a_n: self.scaling.a_n });
        }
        Ok(r)
    }

    fn fresh_rates(&self) -> Result<Vec<f64>> {
        (0..self.ends.len()).map(|b| self.bond_rate(b)).collect()
    }

    /// Largest gap between cached and recomputed bond rates.
    pub fn coherence_defect(&self) -> Result<f64> {
        let fresh = self.fresh_rates()?;
        let sum: f64 = fresh.iter().sum();
        let per_bond = fresh.iter().enumerate().map(|(b, r)| (r - self.tree.get(b)).abs()).fold(0.0, f64::max);
        Ok(per_bond.max((sum - self.tree.total()).abs() / sum.max(1.0)))
    }

    pub fn configuration(&self) -> &Configuration {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    pub fn event_log(&self) -> &[Event] {
        &self.log
    }

    /// Advances to time `t`, performing every event with time `<= t`.
    pub fn run_until(&mut self, t: f64) -> Result<()> {
        loop {
            let total = self.tree.total();
            if total <= 0.0 {
                self.time = self.time.max(t);
                return Ok(());
            }
            let wait = self.rng.sample::<f64, _>(Exp1) / total;
            if self.time + wait > t {
                // Memorylessness lets us discard the overshooting clock.
                self.time = t;
                return Ok(());
            }
            self.time += wait;
            let pick = self.rng.random::<f64>() * total;
            let b = self.tree.find(pick);
            self.fire(b)?;
        }
    }

    fn fire(&mut self, b: usize) -> Result<()> {
        let (x, y) = self.ends[b];
        let (from, to) = if self.config.get(x) == 1 { (x, y) } else { (y, x) };
        self.config.swap_in_place(x, y);
        self.events += 1;
        if self.options.record_events {
            self.log.push(Event { t: self.time, from, to });
        }
        for s in [x, y] {
            for k in 0..self.deps[s].len() {
                let bond = self.deps[s][k];
                let r = self.bond_rate(bond)?;
                self.tree.set(bond, r);
            }
        }
        if self.options.coherence_stride > 0 && self.events % self.options.coherence_stride == 0 {
            let defect = self.coherence_defect()?;
            assert!(defect <= 1e-9 * self.tree.total().max(1.0), "rate cache drifted by {defect}");
        }
        Ok(())
    }
}

/// Configurations of one replica at the requested times.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Configuration>,
    pub events: u64,
    pub log: Vec<Event>,
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("snapshot times must be finite, nonnegative and nondecreasing".into()));
    }
    Ok(())
}

pub fn simulate_with(
    spec: &RateSpec,
    initial: Configuration,
    scaling: &ScalingPlan,
    times: &[f64],
    rng: ChaCha8Rng,
    options: SimOptions,
) -> Result<Trajectory> {
    check_times(times)?;
    let mut state = SimState::new(spec, initial, scaling, rng, options)?;
    let mut snapshots = Vec::with_capacity(times.len());
    for &t in times {
        state.run_until(t)?;
        snapshots.push(state.configuration().clone());
    }
    Ok(Trajectory { times: times.to_vec(), snapshots, events: state.events, log: state.log })
}

/// Runs one replica on stream `(seed, 0)`.
pub fn simulate(spec: &RateSpec, initial: Configuration, scaling: &ScalingPlan, times: &[f64], seed: u64) -> Result<Trajectory> {
    simulate_with(spec, initial, scaling, times, rng_for(seed, 0), SimOptions::default())
}

/// Independent replicas; replica `r` draws its initial state and its dynamics from stream `(seed, r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub times: Vec<f64>,
    /// `snapshots[r][k]` is replica `r` at `times[k]`.
    pub snapshots: Vec<Vec<Configuration>>,
    pub events: u64,
}

pub fn run_ensemble<F>(
    spec: &RateSpec,
    scaling: &ScalingPlan,
    times: &[f64],
    replicas: usize,
    seed: u64,
    initial: F,
) -> Result<Ensemble>
where
    F: Fn(&mut ChaCha8Rng) -> Configuration + Sync,
{
    check_times(times)?;
    check_rates_nonnegative(spec, scaling)?;
    let runs: Vec<Result<Trajectory>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(seed, r as u64);
            let start = initial(&mut rng);
            simulate_with(spec, start, scaling, times, rng, SimOptions::default())
        })
        .collect();
    let mut snapshots = Vec::with_capacity(replicas);
    let mut events = 0;
    for run in runs {
        let run = run?;
        events += run.events;
        snapshots.push(run.snapshots);
    }
    Ok(Ensemble { times: times.to_vec(), snapshots, events })
}

impl Ensemble {
    pub fn replicas(&self) -> usize {
        self.snapshots.len()
    }

    /// `mean[k][x]`: average occupancy of site `x` at `times[k]`, summed in replica order.
    pub fn mean_occupancy(&self) -> Vec<Vec<f64>> {
        let m = self.replicas().max(1) as f64;
        (0..self.times.len())
            .map(|k| {
                let size = self.snapshots.first().map_or(0, |s| s[k].torus().size());
                let mut acc = vec![0.0; size];
                for rep in &self.snapshots {
                    for (a, &o) in acc.iter_mut().zip(rep[k].occupancy()) {
                        *a += o as f64;
                    }
                }
                acc.iter().map(|a| a / m).collect()
            })
            .collect()
    }

    /// CSV `replica,t,site,occupancy`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["replica", "t", "site", "occupancy"])?;
        for (r, rep) in self.snapshots.iter().enumerate() {
            for (t, c) in self.times.iter().zip(rep) {
                for (x, o) in c.occupancy().iter().enumerate() {
                    out.write_record([r.to_string(), t.to_string(), x.to_string(), o.to_string()])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    /// CSV `t,site,mean_occupancy`.
    pub fn write_mean_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "site", "mean_occupancy"])?;
        for (t, row) in self.times.iter().zip(self.mean_occupancy()) {
            for (x, v) in row.iter().enumerate() {
                out.write_record([t.to_string(), x.to_string(), v.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Offsets a bond's rate can read, used to size dependency updates.
pub fn dependency_radius(spec: &RateSpec) -> u32 {
    spec.directions().iter().flat_map(|d| d.rate.support().iter().map(Offset::linf)).max().unwrap_or(0) + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{build_generator, evolve, Parts};
    use crate::measures::{sample_product_with, DensityProfile};

    fn ring(n: usize) -> Torus {
        Torus::new(1, n).unwrap()
    }

    #[test]
    fn bond_rate_examples() {
        let t = ring(8);
        let p = ScalingPlan::new(1, 8, 3.0).unwrap();
        let eta = Configuration::parse(t, "10011000").unwrap();
        let spec = RateSpec::ssep(1);
        assert_eq!(bond_rates(&spec, &eta, &p, 0, 0).unwrap(), (64.0 + 24.0, 0.0));
        assert_eq!(bond_rates(&spec, &eta, &p, 2, 0).unwrap(), (0.0, 64.0));
        assert_eq!(bond_rates(&spec, &eta, &p, 3, 0).unwrap(), (0.0, 0.0));
        assert_eq!(bond_rates(&spec, &eta, &p, 5, 0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn negative_rates_are_rejected() {
        let spec = RateSpec::ssep(1).with_drift(&[-2.0]);
        let p = ScalingPlan::new(1, 8, 8.0).unwrap();
        let eta = Configuration::parse(ring(8), "10000000").unwrap();
        assert!(matches!(bond_rates(&spec, &eta, &p, 0, 0), Err(Error::NegativeRate { .. })));
        assert!(check_rates_nonnegative(&spec, &p).is_err());
        assert!(simulate(&spec, eta, &p, &[0.1], 1).is_err());
        assert!(check_rates_nonnegative(&spec, &ScalingPlan::new(1, 8, 2.0).unwrap()).is_ok());
    }

    #[test]
    fn tree_sampling_and_updates() {
        let mut tree = RateTree::new(&[1.0, 0.0, 2.0, 3.0, 0.5]);
        assert_eq!(tree.total(), 6.5);
        assert_eq!(tree.find(0.5), 0);
        assert_eq!(tree.find(1.0), 2);
        assert_eq!(tree.find(2.99), 2);
        assert_eq!(tree.find(3.0), 3);
        assert_eq!(tree.find(6.4), 4);
        tree.set(2, 0.0);
        assert_eq!(tree.total(), 4.5);
        assert_eq!(tree.find(1.5), 3);
    }

    #[test]
    fn conserves_particles_and_keeps_cache_coherent() {
        let t = ring(12);
        let spec = RateSpec::beta_environment(0.2);
        let p = ScalingPlan::new(1, 12, 2.0).unwrap();
        let start = Configuration::parse(t, "110100111000").unwrap();
        let options = SimOptions { record_events: true, coherence_stride: 1 };
        let run = simulate_with(&spec, start.clone(), &p, &[0.01, 0.05, 0.2], rng_for(3, 0), options).unwrap();
        assert!(run.events > 100);
        assert_eq!(run.log.len() as u64, run.events);
        assert!(run.log.windows(2).all(|w| w[0].t <= w[1].t));
        for c in &run.snapshots {
            assert_eq!(c.particles(), start.particles());
        }
    }

    #[test]
    fn two_dimensional_runs_conserve_particles() {
        let t = Torus::new(2, 4).unwrap();
        let spec = RateSpec::ssep(2).with_drift(&[1.0, 0.0]);
        let p = ScalingPlan::new(2, 4, 2.0).unwrap();
        let start = Configuration::parse(t, "1100101000110001").unwrap();
        let options = SimOptions { record_events: false, coherence_stride: 1 };
        let run = simulate_with(&spec, start.clone(), &p, &[0.3], rng_for(9, 0), options).unwrap();
        assert_eq!(run.snapshots[0].particles(), start.particles());
    }

    #[test]
    fn same_seed_same_trajectory() {
        let t = ring(16);
        let spec = RateSpec::ssep(1);
        let p = ScalingPlan::new(1, 16, 4.0).unwrap();
        let start = Configuration::parse(t, "1111000011110000").unwrap();
        let a = simulate(&spec, start.clone(), &p, &[0.05, 0.1], 42).unwrap();
        let b = simulate(&spec, start.clone(), &p, &[0.05, 0.1], 42).unwrap();
        let c = simulate(&spec, start, &p, &[0.05, 0.1], 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.snapshots, c.snapshots);
    }

    #[test]
    fn equilibrium_density_is_one_half() {
        let t = ring(32);
        let spec = RateSpec::ssep(1);
        let p = ScalingPlan::from_rule(1, 32, ScalingRule::NPow(-0.5)).unwrap();
        let half = DensityProfile::constant(t, 0.5).unwrap();
        let times: Vec<f64> = (1..=20).map(|k| 0.01 * k as f64).collect();
        let ens = run_ensemble(&spec, &p, &times, 200, 7, |rng| sample_product_with(&half, rng)).unwrap();
        let mean = ens.mean_occupancy();
        let samples = (200 * times.len()) as f64;
        for x in 0..32 {
            let avg: f64 = mean.iter().map(|row| row[x]).sum::<f64>() / times.len() as f64;
            // Snapshots are correlated in time, so the band uses the replica count only.
            let se = 0.5 / (200.0f64).sqrt();
            assert!((avg - 0.5).abs() < 4.0 * se, "site {x}: {avg} ({samples} samples)");
        }
    }

    #[test]
    fn law_matches_exact_evolution_on_small_sector() {
        let t = ring(4);
        let spec = RateSpec::beta_environment(0.2);
        let p = ScalingPlan::new(1, 4, 2.0).unwrap();
        let m = build_generator(&spec, &t, &p, Parts::Both, Some(2)).unwrap();
        let start = Configuration::parse(t, "1100").unwrap();
        let mut mu0 = vec![0.0; m.len()];
        mu0[m.index_of(start.to_mask()).unwrap()] = 1.0;
        let exact = evolve(&m, &mu0, &[0.02]).unwrap().remove(0);
        let reps = 20_000;
        let ens = run_ensemble(&spec, &p, &[0.02], reps, 11, |_| start.clone()).unwrap();
        let mut counts = vec![0.0; m.len()];
        for rep in &ens.snapshots {
            counts[m.index_of(rep[0].to_mask()).unwrap()] += 1.0 / reps as f64;
        }
        let tv: f64 = 0.5 * counts.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!(tv < 0.02, "{tv}");
    }

    #[test]
    fn ensemble_csv_layout() {
        let t = ring(4);
        let p = ScalingPlan::new(1, 4, 1.0).unwrap();
        let start = Configuration::parse(t, "1010").unwrap();
        let ens = run_ensemble(&RateSpec::ssep(1), &p, &[0.0, 0.1], 2, 1, |_| start.clone()).unwrap();
        let mut buf = Vec::new();
        ens.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("replica,t,site,occupancy\n0,0,0,1\n0,0,1,0\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 2 * 4);
        let mut buf = Vec::new();
        ens.write_mean_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,site,mean_occupancy\n0,0,1\n"));
    }

    #[test]
    fn dependency_radius_of_presets() {
        assert_eq!(dependency_radius(&RateSpec::ssep(1)), 1);
        assert_eq!(dependency_radius(&RateSpec::beta_environment(0.2)), 3);
    }

    #[test]
    fn g_d_values() {
        assert_eq!(g_d(1, 10), 10.0);
        assert!((g_d(2, 10) - 10f64.ln()).abs() < 1e-15);
        assert_eq!(g_d(3, 10), 1.0);
    }

    #[test]
    fn regime_examples() {
        let ok = ScalingPlan::from_rule(1, 1000, ScalingRule::NPow(-1.0 / 3.0)).unwrap();
        assert!(scaling_check(&ok, 1.0).passed());
        let too_large = ScalingPlan::from_rule(1, 1000, ScalingRule::NPow(-0.2)).unwrap();
        let r = scaling_check(&too_large, 1.0);
        assert!(r.lower_ok && !r.upper_ok);
        let boundary = ScalingPlan::from_rule(1, 128, ScalingRule::NPow(-0.5)).unwrap();
        assert!(!scaling_check(&boundary, 1.0).lower_ok);
    }

    #[test]
    fn rule_strings() {
        let r: ScalingRule = "n_pow:-0.5".parse().unwrap();
        assert_eq!(r, ScalingRule::NPow(-0.5));
        assert_eq!(r.to_string().parse::<ScalingRule>().unwrap(), r);
        assert!("n_pow".parse::<ScalingRule>().is_err());
        assert!("const:-1".parse::<ScalingRule>().is_err());
        let p = ScalingPlan::from_rule(1, 64, r).unwrap();
        assert!((p.eps * p.a_n - 1.0).abs() <= f64::EPSILON);
        assert_eq!(p.a_n, 8.0);
    }
}
