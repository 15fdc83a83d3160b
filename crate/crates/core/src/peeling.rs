//! Exact graph-level simulation of 2-core peeling on `G(n, m, v_n)`.
//!
//! A graph lists, for every v-node socket, the c-node it connects to. Attaching
//! each socket to a uniform c-node independently is the same law as drawing
//! conditioned-Poisson c-node degrees and a uniform socket permutation, so it
//! is the primary sampler; the two-stage route is kept for comparison.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleParams;
use crate::error::{Error, Result};
use crate::exact::binomial;
use crate::rng::{stream, Purpose};
use crate::stats::wilson;

/// Rejections before the Poisson route falls back to a multinomial allocation.
pub const MAX_REJECTIONS: usize = 1000;
/// Largest `n` for the exact stopping-set expectation.
pub const MAX_CENSUS_N: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Every socket picks a uniform c-node.
    Multinomial,
    /// Poisson c-node degrees conditioned on the socket total by rejection, then a uniform permutation.
    PoissonRejection,
}

/// Configuration-model bipartite graph; multi-edges allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    /// Degree of each v-node; v-nodes are grouped by ascending degree.
    pub degrees: Vec<u32>,
    /// First socket of each v-node, with a final sentinel.
    pub offsets: Vec<u32>,
    /// C-node attached to each socket.
    pub targets: Vec<u32>,
    pub m: usize,
    /// Largest v-node degree of the ensemble (`L`).
    pub max_degree: usize,
    /// Whether the Poisson route had to fall back to the multinomial allocation.
    pub fallback_used: bool,
}

impl BipartiteGraph {
    /// Builds a graph from explicit v-node degrees and socket targets.
    pub fn from_parts(degrees: Vec<u32>, targets: Vec<u32>, m: usize, max_degree: usize) -> Result<Self> {
        let mut offsets = Vec::with_capacity(degrees.len() + 1);
        let mut acc = 0u32;
        offsets.push(0);
        for &d in &degrees {
            if d < 3 || d as usize > max_degree {
                return Err(Error::Domain(format!("v-node degree {d} outside [3, {max_degree}]")));
            }
            acc += d;
            offsets.push(acc);
        }
        if acc as usize != targets.len() {
            return Err(Error::Domain(format!("{} sockets but {} targets", acc, targets.len())));
        }
        if let Some(&t) = targets.iter().find(|&&t| t as usize >= m) {
            return Err(Error::Domain(format!("target {t} outside [0, {m})")));
        }
        Ok(BipartiteGraph { degrees, offsets, targets, m, max_degree, fallback_used: false })
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn sockets(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    /// Degree of every c-node.
    pub fn c_degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.m];
        for &t in &self.targets {
            deg[t as usize] += 1;
        }
        deg
    }

    /// `z = (omega_1, omega_2, tau_3..tau_L)` of the whole graph.
    pub fn state(&self) -> Vec<u64> {
        let mut z = vec![0u64; self.max_degree];
        for d in self.c_degrees() {
            match d {
                0 => {}
                1 => z[0] += 1,
                _ => z[1] += 1,
            }
        }
        for &d in &self.degrees {
            z[d as usize - 1] += 1;
        }
        z
    }
}

fn vnode_degrees(params: &EnsembleParams) -> Vec<u32> {
    let mut deg = Vec::with_capacity(params.n as usize);
    for (j, &c) in params.counts.iter().enumerate() {
        deg.extend(std::iter::repeat_n(j as u32, c as usize));
    }
    deg
}

fn check_params(params: &EnsembleParams) -> Result<()> {
    if params.m > u32::MAX as u64 || params.sockets() > u32::MAX as u64 {
        return Err(Error::Domain(format!("ensemble too large: n = {}, m = {}", params.n, params.m)));
    }
    Ok(())
}

/// Uniform c-node for each of the `h_n` sockets.
fn uniform_targets<R: Rng + ?Sized>(h: usize, m: usize, rng: &mut R) -> Vec<u32> {
    (0..h).map(|_| rng.random_range(0..m as u32)).collect()
}

/// Draws from `G(n, m, v_n)` with the primary sampler.
pub fn sample_graph<R: Rng + ?Sized>(params: &EnsembleParams, rng: &mut R) -> Result<BipartiteGraph> {
    sample_graph_with(params, SamplerKind::Multinomial, rng)
}

pub fn sample_graph_with<R: Rng + ?Sized>(
    params: &EnsembleParams,
    kind: SamplerKind,
    rng: &mut R,
) -> Result<BipartiteGraph> {
    check_params(params)?;
    let degrees = vnode_degrees(params);
    let h = params.sockets() as usize;
    let m = params.m as usize;
    let (targets, fallback_used) = match kind {
        SamplerKind::Multinomial => (uniform_targets(h, m, rng), false),
        SamplerKind::PoissonRejection => poisson_targets(params, rng)?,
    };
    let mut g = BipartiteGraph::from_parts(degrees, targets, m, params.spec.max_degree())?;
    g.fallback_used = fallback_used;
    Ok(g)
}

fn poisson_targets<R: Rng + ?Sized>(params: &EnsembleParams, rng: &mut R) -> Result<(Vec<u32>, bool)> {
    let h = params.sockets() as usize;
    let m = params.m as usize;
    let poisson = Poisson::new(params.gamma()).map_err(|e| Error::Domain(format!("Poisson mean: {e}")))?;
    let mut k = vec![0u32; m];
    let mut accepted = false;
    for _ in 0..MAX_REJECTIONS {
        let mut total = 0usize;
        for slot in k.iter_mut() {
            *slot = poisson.sample(rng) as u32;
            total += *slot as usize;
        }
        if total == h {
            accepted = true;
            break;
        }
    }
    if !accepted {
        // multinomial allocation of h sockets: the conditioned law exactly
        k.iter_mut().for_each(|x| *x = 0);
        for t in uniform_targets(h, m, rng) {
            k[t as usize] += 1;
        }
    }
    let mut targets: Vec<u32> = Vec::with_capacity(h);
    for (a, &ka) in k.iter().enumerate() {
        targets.extend(std::iter::repeat_n(a as u32, ka as usize));
    }
    targets.shuffle(rng);
    Ok((targets, !accepted))
}

/// `(omega_1, omega_2)` at the start of peeling. Consumes the stream exactly as
/// [`sample_graph`] does, so both see the same graph.
pub fn sample_initial_omega<R: Rng + ?Sized>(params: &EnsembleParams, rng: &mut R) -> Result<[u64; 2]> {
    check_params(params)?;
    let m = params.m as usize;
    let mut deg = vec![0u32; m];
    for _ in 0..params.sockets() {
        deg[rng.random_range(0..m as u32) as usize] += 1;
    }
    let mut omega = [0u64; 2];
    for d in deg {
        match d {
            0 => {}
            1 => omega[0] += 1,
            _ => omega[1] += 1,
        }
    }
    Ok(omega)
}

/// One peeling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeelTrace {
    /// Length of `z`: `2 + (L - 2)`.
    pub dim: usize,
    /// `z(0), z(1), ..., z(halted_at)` flattened; empty unless recorded.
    pub states: Vec<u64>,
    /// Number of peeling steps performed.
    pub halted_at: u64,
    /// Live v-nodes at halt.
    pub core_edges: u64,
    pub core_empty: bool,
    /// `z` at halt, always kept.
    pub final_state: Vec<u64>,
}

impl PeelTrace {
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, sigma: usize) -> &[u64] {
        &self.states[sigma * self.dim..(sigma + 1) * self.dim]
    }

    /// Writes `sigma, omega1, omega2, tau_3..tau_L`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        let mut header = vec!["sigma".to_string(), "omega1".into(), "omega2".into()];
        header.extend((3..self.dim + 1).map(|j| format!("tau_{j}")));
        writeln!(out, "{}", header.join(","))?;
        for s in 0..self.len() {
            let row: Vec<String> = self.state(s).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{s},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Peels `graph`, picking a uniform degree-1 c-node at every step.
pub fn peel<R: Rng + ?Sized>(graph: &BipartiteGraph, rng: &mut R, record: bool) -> PeelTrace {
    peel_with_core(graph, rng, record).0
}

/// As [`peel`], also returning the live v-nodes at halt (the 2-core).
pub fn peel_with_core<R: Rng + ?Sized>(graph: &BipartiteGraph, rng: &mut R, record: bool) -> (PeelTrace, Vec<u32>) {
    let mut p = Peeler::new(graph);
    let dim = p.z.len();
    let mut states = Vec::new();
    if record {
        states.reserve(dim * (graph.n() + 1));
        states.extend_from_slice(&p.z);
    }
    let mut steps = 0u64;
    while !p.ones.is_empty() {
        let a = p.ones[rng.random_range(0..p.ones.len())];
        p.step(a);
        steps += 1;
        if record {
            states.extend_from_slice(&p.z);
        }
    }
    let core: Vec<u32> = (0..graph.n() as u32).filter(|&v| p.alive[v as usize]).collect();
    let core_edges = core.len() as u64;
    let trace = PeelTrace { dim, states, halted_at: steps, core_edges, core_empty: core_edges == 0, final_state: p.z };
    (trace, core)
}

/// Peeling state with an O(1) uniform-pick set of degree-1 c-nodes.
struct Peeler<'a> {
    g: &'a BipartiteGraph,
    /// Sockets of each c-node, CSR by c-node.
    c_offsets: Vec<u32>,
    c_sockets: Vec<u32>,
    /// V-node owning each socket.
    owner: Vec<u32>,
    cdeg: Vec<u32>,
    alive: Vec<bool>,
    ones: Vec<u32>,
    pos: Vec<u32>,
    z: Vec<u64>,
}

const ABSENT: u32 = u32::MAX;

impl<'a> Peeler<'a> {
    fn new(g: &'a BipartiteGraph) -> Self {
        let cdeg = g.c_degrees();
        let mut c_offsets = vec![0u32; g.m + 1];
        for a in 0..g.m {
            c_offsets[a + 1] = c_offsets[a] + cdeg[a];
        }
        let mut fill = c_offsets.clone();
        let mut c_sockets = vec![0u32; g.targets.len()];
        for (s, &t) in g.targets.iter().enumerate() {
            c_sockets[fill[t as usize] as usize] = s as u32;
            fill[t as usize] += 1;
        }
        let mut owner = vec![0u32; g.targets.len()];
        for v in 0..g.n() {
            for s in g.offsets[v]..g.offsets[v + 1] {
                owner[s as usize] = v as u32;
            }
        }
        let mut ones = Vec::new();
        let mut pos = vec![ABSENT; g.m];
        for (a, &d) in cdeg.iter().enumerate() {
            if d == 1 {
                pos[a] = ones.len() as u32;
                ones.push(a as u32);
            }
        }
        let z = g.state();
        Peeler { g, c_offsets, c_sockets, owner, cdeg, alive: vec![true; g.n()], ones, pos, z }
    }

    fn remove_one(&mut self, a: u32) {
        let i = self.pos[a as usize];
        let last = *self.ones.last().expect("set is nonempty");
        self.ones.swap_remove(i as usize);
        if last != a {
            self.pos[last as usize] = i;
        }
        self.pos[a as usize] = ABSENT;
    }

    /// Removes the v-node hanging off degree-1 c-node `a` with all its edges.
    fn step(&mut self, a: u32) {
        let range = self.c_offsets[a as usize] as usize..self.c_offsets[a as usize + 1] as usize;
        let v = self.c_sockets[range]
            .iter()
            .map(|&s| self.owner[s as usize])
            .find(|&v| self.alive[v as usize])
            .expect("a degree-1 c-node has one live edge");
        self.alive[v as usize] = false;
        self.z[self.g.degrees[v as usize] as usize - 1] -= 1;
        for &c in self.g.sockets(v as usize) {
            let old = self.cdeg[c as usize];
            self.cdeg[c as usize] = old - 1;
            match old {
                1 => {
                    self.z[0] -= 1;
                    self.remove_one(c);
                }
                2 => {
                    self.z[1] -= 1;
                    self.z[0] += 1;
                    self.pos[c as usize] = self.ones.len() as u32;
                    self.ones.push(c);
                }
                _ => {}
            }
        }
    }
}

/// Outcome of repeated `sample_graph -> peel` trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub trials: u64,
    /// Trials ending with a nonempty core.
    pub failures: u64,
    pub p_nocore_hat: f64,
    /// Half-width of the Wilson 95% interval.
    pub ci95: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Trial `i` uses stream `i` of this seed under [`Purpose::Graph`].
    pub seed: u64,
}

/// Stream of trial `index`; replaying it reproduces that trial exactly.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    stream(seed, Purpose::Graph, index)
}

/// Re-runs one trial of [`estimate_pnocore`].
pub fn replay_trial(params: &EnsembleParams, seed: u64, index: u64, record: bool) -> Result<PeelTrace> {
    let mut rng = trial_rng(seed, index);
    let g = sample_graph(params, &mut rng)?;
    Ok(peel(&g, &mut rng, record))
}

/// Runs `f` on the unrecorded trace of every trial, in parallel, in trial order.
pub fn map_trials<T: Send>(
    params: &EnsembleParams,
    trials: u64,
    seed: u64,
    f: impl Fn(u64, &PeelTrace) -> T + Sync,
) -> Result<Vec<T>> {
    (0..trials)
        .into_par_iter()
        .map(|i| replay_trial(params, seed, i, false).map(|t| f(i, &t)))
        .collect()
}

/// Estimates `P(no 2-core)` with a Wilson interval.
pub fn estimate_pnocore(params: &EnsembleParams, trials: u64, seed: u64) -> Result<McResult> {
    if trials < 100 {
        return Err(Error::Domain(format!("at least 100 trials needed, got {trials}")));
    }
    let failures: u64 = map_trials(params, trials, seed, |_, t| u64::from(!t.core_empty))?.into_iter().sum();
    let (lo, hi) = wilson(trials - failures, trials);
    Ok(McResult {
        trials,
        failures,
        p_nocore_hat: (trials - failures) as f64 / trials as f64,
        ci95: 0.5 * (hi - lo),
        ci_low: lo,
        ci_high: hi,
        seed,
    })
}

/// Constants of the small stopping-set bound for margin `epsilon = rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallCoreConstants {
    /// Smallest v-node degree `l`.
    pub l: usize,
    pub c1: f64,
    pub kappa: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

/// `c_1 = e L^{l/2} / epsilon` makes `(e n / v)(Lv/m)^{l/2} <= c_1 (v/m)^{l/2-1}` for
/// `m >= epsilon n`; `kappa` is the largest value with
/// `max(c_1 kappa^{l/2-1}, sqrt(L kappa)) <= 1/2`.
pub fn small_core_constants(params: &EnsembleParams) -> Result<SmallCoreConstants> {
    let l = params.spec.min_degree();
    let big_l = params.spec.max_degree() as f64;
    if l < 3 {
        return Err(Error::Domain(format!("smallest degree {l} < 3")));
    }
    let eps = params.rho;
    let half = l as f64 / 2.0;
    let c1 = std::f64::consts::E * big_l.powf(half) / eps;
    let kappa = (0.5 / c1).powf(1.0 / (half - 1.0)).min(0.25 / big_l);
    // sum_v v^{l/2} 2^{1-v}; terms beyond 200 are below 1e-50
    let series: f64 = (1..=200).map(|v| (v as f64).powf(half) * 2f64.powi(1 - v)).sum();
    Ok(SmallCoreConstants { l, c1, kappa, kappa1: kappa * eps, kappa2: c1 * eps.powf(1.0 - half) * series })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingSetCount {
    /// Largest core size counted as small.
    pub v_max: u64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// `kappa_2 n^{1 - l/2}`.
    pub expected_bound: f64,
    /// Exact expected number of stopping sets of size at most `v_max`, for `n <= 30`.
    pub exact_expectation: Option<f64>,
    pub trials: u64,
    pub small_cores: u64,
    pub empirical_small_core_freq: f64,
}

/// Frequency of nonempty cores smaller than `kappa1 n`, with the analytic bound.
pub fn small_core_census(params: &EnsembleParams, trials: u64, kappa1: f64, seed: u64) -> Result<StoppingSetCount> {
    let c = small_core_constants(params)?;
    let limit = kappa1 * params.n as f64;
    let v_max = (limit.ceil() as u64).saturating_sub(1);
    let small: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Purpose::Census, i);
            let g = sample_graph(params, &mut rng)?;
            let t = peel(&g, &mut rng, false);
            Ok(u64::from(!t.core_empty && t.core_edges <= v_max))
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    let exact_expectation = if params.n <= MAX_CENSUS_N && v_max > 0 {
        Some(crate::kernel::exact::to_f64(&exact_stopping_set_expectation(params, v_max)?))
    } else {
        None
    };
    Ok(StoppingSetCount {
        v_max,
        kappa1,
        kappa2: c.kappa2,
        expected_bound: c.kappa2 * (params.n as f64).powf(1.0 - c.l as f64 / 2.0),
        exact_expectation,
        trials,
        small_cores: small,
        empirical_small_core_freq: small as f64 / trials as f64,
    })
}

/// `S(d, r)`: maps of `d` labelled sockets onto `r` labelled c-nodes hitting each at least twice.
pub fn surjections_at_least_two(d_max: usize) -> Vec<Vec<BigUint>> {
    let r_max = d_max / 2;
    let mut s = vec![vec![BigUint::zero(); r_max + 1]; d_max + 1];
    s[0][0] = BigUint::one();
    for d in 1..=d_max {
        for r in 1..=r_max.min(d / 2) {
            // the last socket joins a box that already had two, or pairs with one partner
            let mut v = &s[d - 1][r] * BigUint::from(r);
            if d >= 2 {
                v += &s[d - 2][r - 1] * BigUint::from(r * (d - 1));
            }
            s[d][r] = v;
        }
    }
    s
}

/// `coeff[prod_j (1 + y z^j)^{v_n(j)}, y^v z^d]` for all `v, d`.
fn subset_degree_counts(counts: &[u64], n: usize, d_max: usize) -> Vec<Vec<BigUint>> {
    let mut poly = vec![vec![BigUint::zero(); d_max + 1]; n + 1];
    poly[0][0] = BigUint::one();
    let mut used = 0usize;
    for (j, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            used += 1;
            for v in (1..=used).rev() {
                for d in (j..=d_max).rev() {
                    if !poly[v - 1][d - j].is_zero() {
                        let add = poly[v - 1][d - j].clone();
                        poly[v][d] += add;
                    }
                }
            }
        }
    }
    poly
}

/// Exact `E S = sum_{v <= v_max} sum_d sum_{r <= d/2} P_{v,d,r}` with
/// `P_{v,d,r} = coeff[...] binom(m, r) S(d, r) / m^d`.
pub fn exact_stopping_set_expectation(params: &EnsembleParams, v_max: u64) -> Result<BigRational> {
    if params.n > MAX_CENSUS_N {
        return Err(Error::TooLarge(format!("exact census needs n <= {MAX_CENSUS_N}, got {}", params.n)));
    }
    let n = params.n as usize;
    let l = params.spec.min_degree();
    let big_l = params.spec.max_degree();
    let d_max = params.sockets() as usize;
    let poly = subset_degree_counts(&params.counts, n, d_max);
    let surj = surjections_at_least_two(d_max);
    let m = params.m;
    let mut total = BigRational::zero();
    for v in 1..=(v_max as usize).min(n) {
        for d in (l * v)..=(big_l * v).min(d_max) {
            let choose = &poly[v][d];
            if choose.is_zero() {
                continue;
            }
            let mut ways = BigUint::zero();
            for r in 1..=(d / 2).min(m as usize) {
                ways += binomial(m, r as u64) * &surj[d][r];
            }
            if ways.is_zero() {
                continue;
            }
            let num = num_bigint::BigInt::from(choose * ways);
            let den = num_bigint::BigInt::from(BigUint::from(m).pow(d as u32));
            total += BigRational::new(num, den);
        }
    }
    Ok(total)
}

/// A single term `P_{v,d,r}`.
pub fn stopping_set_term(params: &EnsembleParams, v: usize, d: usize, r: usize) -> Result<BigRational> {
    if params.n > MAX_CENSUS_N {
        return Err(Error::TooLarge(format!("exact census needs n <= {MAX_CENSUS_N}, got {}", params.n)));
    }
    let d_max = params.sockets() as usize;
    if v > params.n as usize || d > d_max || r == 0 {
        return Ok(BigRational::zero());
    }
    let poly = subset_degree_counts(&params.counts, params.n as usize, d_max);
    let surj = surjections_at_least_two(d_max);
    if r >= surj[d].len() {
        return Ok(BigRational::zero());
    }
    let num = num_bigint::BigInt::from(&poly[v][d] * binomial(params.m, r as u64) * &surj[d][r]);
    let den = num_bigint::BigInt::from(BigUint::from(params.m).pow(d as u32));
    Ok(BigRational::new(num, den))
}

/// Stopping sets of `graph` (nonempty v-node sets with no c-node of degree
/// exactly one in the restriction) of size at most `v_max`, by brute force.
pub fn count_stopping_sets(graph: &BipartiteGraph, v_max: usize) -> Result<u64> {
    let n = graph.n();
    if n > 20 {
        return Err(Error::TooLarge(format!("brute-force stopping sets need n <= 20, got {n}")));
    }
    let mut deg = vec![0u32; graph.m];
    let mut count = 0u64;
    for mask in 1u32..(1u32 << n) {
        if mask.count_ones() as usize > v_max {
            continue;
        }
        deg.iter_mut().for_each(|d| *d = 0);
        for v in 0..n {
            if mask >> v & 1 == 1 {
                for &c in graph.sockets(v) {
                    deg[c as usize] += 1;
                }
            }
        }
        if deg.iter().all(|&d| d != 1) {
            count += 1;
        }
    }
    Ok(count)
}
