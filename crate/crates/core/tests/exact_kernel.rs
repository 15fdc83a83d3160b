//! The rational finite-n kernel against exhaustive enumeration of tiny ensembles.

use std::collections::HashMap;

use corescale::kernel::exact::{exact_kernel, exact_kernel_distribution, exact_total_mass, graph_count, IntState};
use corescale::kernel::Increment;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

struct Tally {
    /// Mass of visiting each state, scaled by a common integer.
    state: HashMap<IntState, u128>,
    /// Mass of each observed transition.
    step: HashMap<(IntState, Vec<i64>), u128>,
    /// Mass of each residual graph, keyed by state.
    residual: HashMap<IntState, HashMap<Vec<u8>, u128>>,
}

fn state_of(degrees: &[usize], assign: &[u8], live: &[bool], m: usize, max_degree: usize) -> IntState {
    let mut cdeg = vec![0u64; m];
    let mut tau = vec![0u64; max_degree - 2];
    let mut pos = 0;
    for (v, &d) in degrees.iter().enumerate() {
        if live[v] {
            tau[d - 3] += 1;
            for s in &assign[pos..pos + d] {
                cdeg[*s as usize] += 1;
            }
        }
        pos += d;
    }
    let omega1 = cdeg.iter().filter(|&&d| d == 1).count() as u64;
    let omega2 = cdeg.iter().filter(|&&d| d >= 2).count() as u64;
    IntState { omega: [omega1, omega2], tau }
}

fn residual_key(degrees: &[usize], assign: &[u8], live: &[bool]) -> Vec<u8> {
    let mut key = Vec::new();
    let mut pos = 0;
    for (v, &d) in degrees.iter().enumerate() {
        if live[v] {
            key.extend_from_slice(&assign[pos..pos + d]);
        } else {
            key.extend(std::iter::repeat(u8::MAX).take(d));
        }
        pos += d;
    }
    key
}

#[allow(clippy::too_many_arguments)]
fn walk(
    degrees: &[usize],
    offsets: &[usize],
    assign: &[u8],
    live: &mut Vec<bool>,
    m: usize,
    max_degree: usize,
    weight: u128,
    tally: &mut Tally,
) {
    let z = state_of(degrees, assign, live, m, max_degree);
    *tally.state.entry(z.clone()).or_default() += weight;
    *tally
        .residual
        .entry(z.clone())
        .or_default()
        .entry(residual_key(degrees, assign, live))
        .or_default() += weight;
    if z.omega[0] == 0 {
        return;
    }
    // degree-1 c-nodes and their unique live v-node
    let mut cdeg = vec![0u32; m];
    let mut owner = vec![usize::MAX; m];
    for (v, &d) in degrees.iter().enumerate() {
        if live[v] {
            for s in &assign[offsets[v]..offsets[v] + d] {
                cdeg[*s as usize] += 1;
                owner[*s as usize] = v;
            }
        }
    }
    let w = weight / z.omega[0] as u128;
    assert_eq!(w * z.omega[0] as u128, weight);
    for a in 0..m {
        if cdeg[a] != 1 {
            continue;
        }
        let alpha = owner[a];
        live[alpha] = false;
        let next = state_of(degrees, assign, live, m, max_degree);
        let dz: Vec<i64> = next.to_vec().iter().zip(z.to_vec()).map(|(&b, a)| b as i64 - a as i64).collect();
        *tally.step.entry((z.clone(), dz)).or_default() += w;
        walk(degrees, offsets, assign, live, m, max_degree, w, tally);
        live[alpha] = true;
    }
}

fn enumerate(degrees: &[usize], m: usize) -> Tally {
    let max_degree = *degrees.iter().max().unwrap();
    let sockets: usize = degrees.iter().sum();
    let mut offsets = vec![0];
    for d in degrees {
        offsets.push(offsets.last().unwrap() + d);
    }
    let lcm: u128 = (1..=m as u128).fold(1, |acc, k| acc * k / gcd(acc, k));
    let scale = lcm.pow(degrees.len() as u32);
    let mut tally = Tally { state: HashMap::new(), step: HashMap::new(), residual: HashMap::new() };
    let mut assign = vec![0u8; sockets];
    let total = (m as u64).pow(sockets as u32);
    for code in 0..total {
        let mut c = code;
        for s in assign.iter_mut() {
            *s = (c % m as u64) as u8;
            c /= m as u64;
        }
        let mut live = vec![true; degrees.len()];
        walk(degrees, &offsets, &assign, &mut live, m, max_degree, scale, &mut tally);
    }
    tally
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn check_ensemble(degrees: &[usize], m: usize) -> usize {
    let n = degrees.len() as u64;
    let tally = enumerate(degrees, m);
    let mut checked = 0;
    for ((z, dz), &mass) in &tally.step {
        let freq = BigRational::new(BigInt::from(mass), BigInt::from(tally.state[z]));
        let inc = Increment { dz: dz.clone(), ell: 0, q: Vec::new() };
        let exact = exact_kernel(z, &inc, n, m as u64).unwrap();
        assert_eq!(exact, freq, "state {:?} step {:?}", z.to_vec(), dz);
        checked += 1;
    }
    // every visited state with a degree-1 node: no exact mass outside the observed steps
    for z in tally.state.keys().filter(|z| z.omega[0] > 0) {
        assert!(exact_total_mass(z, n, m as u64).unwrap().is_one(), "{:?}", z.to_vec());
        for (dz, w) in exact_kernel_distribution(z, n, m as u64).unwrap() {
            assert!(tally.step.contains_key(&(z.clone(), dz.clone())) || w.is_zero());
        }
    }
    checked
}

#[test]
fn exact_kernel_matches_enumeration_three_regular() {
    let checked = check_ensemble(&[3, 3, 3], 4);
    assert!(checked > 10);
}

#[test]
fn exact_kernel_matches_enumeration_mixed_degrees() {
    check_ensemble(&[3, 4], 4);
    check_ensemble(&[3, 3, 4], 3);
}

#[test]
fn exact_kernel_matches_enumeration_four_edges() {
    check_ensemble(&[3, 3, 3, 3], 3);
}

#[test]
fn residual_graphs_are_uniform_given_state() {
    let tally = enumerate(&[3, 3, 4], 3);
    for (z, graphs) in &tally.residual {
        let masses: Vec<u128> = graphs.values().copied().collect();
        assert!(masses.iter().all(|&w| w == masses[0]), "state {:?} not uniform", z.to_vec());
    }
}

#[test]
fn graph_counts_match_enumeration_at_start() {
    // all graphs of the ensemble appear at step 0; h(z) counts them with v-node
    // degree labels permuted, which for equal degrees is a factor of 1
    let degrees = [3usize, 3, 3];
    let m = 4;
    let tally = enumerate(&degrees, m);
    let scale: u128 = 12u128.pow(3);
    let mut at_start: HashMap<IntState, u128> = HashMap::new();
    for (z, graphs) in &tally.residual {
        if z.tau[0] == 3 {
            at_start.insert(z.clone(), graphs.len() as u128);
            let mass: u128 = graphs.values().sum();
            assert_eq!(mass, graphs.len() as u128 * scale);
        }
    }
    for (z, count) in at_start {
        assert_eq!(graph_count(&z, 3, m as u64).unwrap().to_u128().unwrap(), count);
    }
}

#[test]
fn exact_kernel_normalises_on_random_tiny_states() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut tested = 0;
    while tested < 20 {
        let n = rng.random_range(1..=8u64);
        let m = rng.random_range(2..=8u64);
        let t3 = rng.random_range(0..=n);
        let t4 = rng.random_range(0..=n - t3);
        let w1 = rng.random_range(1..=m);
        let w2 = rng.random_range(0..=m - w1);
        let z = IntState { omega: [w1, w2], tau: vec![t3, t4] };
        if graph_count(&z, n, m).unwrap().is_zero() {
            continue;
        }
        let total = exact_total_mass(&z, n, m).unwrap();
        assert!(total.is_one(), "state {:?} n {n} m {m} mass {}", z.to_vec(), total);
        tested += 1;
    }
    assert!(!BigRational::zero().is_one());
}
