//! Exhaustive reference computations for small instances.
//!
//! Two independent routes to the same numbers: summing Boltzmann weights of
//! a spin model over all configurations, and summing error probabilities
//! over all elements of a gauge coset. Both enumerate in Gray-code order so
//! each step changes one spin or one generator.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::bits::{Bits, Eliminator};
use crate::pauli::{Pauli, SpacetimePauli};
use crate::spacetime::GaugeBasis;
use crate::spinmodel::{ln_add_exp, NoiseChannel, SpinModel};

/// Largest spin or generator count enumerated exhaustively.
pub const MAX_EXACT: usize = 24;

/// Largest number of nonzero-probability errors `exact_ml_success` visits.
pub const MAX_ERRORS: u64 = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{what} = {size} exceeds the exhaustive limit {limit}")]
    TooLarge { what: &'static str, size: u64, limit: u64 },
    #[error("expected {expected} signs, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("error operator is on the wrong grid")]
    GridMismatch,
}

/// Streaming `ln Σ e^{x_i}`.
#[derive(Clone, Copy, Debug)]
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Sum of weights, tracking `−∞` terms as a count so the finite part can be
/// updated incrementally.
#[derive(Clone, Copy, Debug, Default)]
struct Tally {
    finite: f64,
    zeros: usize,
}

impl Tally {
    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            self.zeros += 1;
        } else {
            self.finite += x;
        }
    }

    fn sub(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            self.zeros -= 1;
        } else {
            self.finite -= x;
        }
    }

    fn value(&self) -> f64 {
        if self.zeros > 0 {
            f64::NEG_INFINITY
        } else {
            self.finite
        }
    }
}

const RESYNC: u64 = 1 << 12;

/// `ln Z = constant + ln Σ_σ Π_c w_c(η_c Π σ)` over all `2^m` configurations.
pub fn exact_partition(model: &SpinModel, eta: &[i8]) -> Result<f64, OracleError> {
    let m = model.num_spins();
    if m > MAX_EXACT {
        return Err(OracleError::TooLarge {
            what: "spins",
            size: m as u64,
            limit: MAX_EXACT as u64,
        });
    }
    let its = model.interactions();
    if eta.len() != its.len() {
        return Err(OracleError::SizeMismatch {
            expected: its.len(),
            got: eta.len(),
        });
    }
    let adj = model.adjacency();
    let mut aligned: Vec<bool> = eta.iter().map(|&e| e > 0).collect();
    let full = |aligned: &[bool]| {
        let mut t = Tally::default();
        for (c, it) in its.iter().enumerate() {
            t.add(it.log_weight(aligned[c]));
        }
        t
    };
    let mut tally = full(&aligned);
    let mut acc = LogSum::new();
    acc.add(tally.value());
    for i in 1..(1u64 << m) {
        let spin = i.trailing_zeros() as usize;
        for &c in &adj[spin] {
            tally.sub(its[c].log_weight(aligned[c]));
            aligned[c] = !aligned[c];
            tally.add(its[c].log_weight(aligned[c]));
        }
        if i % RESYNC == 0 {
            tally = full(&aligned);
        }
        acc.add(tally.value());
    }
    Ok(model.constant() + acc.value())
}

/// `ln Σ_{g∈𝒢} ℙ(E·g)`, enumerating the group through an independent
/// subset of generators.
pub fn ln_coset_probability(error: &SpacetimePauli, basis: &GaugeBasis, channel: &NoiseChannel) -> Result<f64, OracleError> {
    if error.grid() != basis.grid() {
        return Err(OracleError::GridMismatch);
    }
    let ind = basis.independent_indices();
    if ind.len() > MAX_EXACT {
        return Err(OracleError::TooLarge {
            what: "generators",
            size: ind.len() as u64,
            limit: MAX_EXACT as u64,
        });
    }
    let gens: Vec<&SpacetimePauli> = ind.iter().map(|&k| &basis.generators()[k]).collect();
    let supports: Vec<Vec<_>> = gens.iter().map(|g| g.support()).collect();
    let ln_p = |p: Pauli| channel.ln_prob(p);
    let mut cur = error.clone();
    let full = |cur: &SpacetimePauli| {
        let mut t = Tally::default();
        for site in 0..cur.grid().sites() {
            t.add(ln_p(cur.get(cur.grid().coord(site))));
        }
        t
    };
    let mut tally = full(&cur);
    let mut acc = LogSum::new();
    acc.add(tally.value());
    for i in 1..(1u64 << gens.len()) {
        let k = i.trailing_zeros() as usize;
        for &c in &supports[k] {
            tally.sub(ln_p(cur.get(c)));
            cur.mul_site(c, gens[k].get(c));
            tally.add(ln_p(cur.get(c)));
        }
        if i % RESYNC == 0 {
            tally = full(&cur);
        }
        acc.add(tally.value());
    }
    Ok(acc.value())
}

pub fn coset_probability(error: &SpacetimePauli, basis: &GaugeBasis, channel: &NoiseChannel) -> Result<f64, OracleError> {
    ln_coset_probability(error, basis, channel).map(f64::exp)
}

/// Exact class probabilities of every syndrome orbit.
#[derive(Clone, Debug, Serialize)]
pub struct ExactResult {
    /// Probability that the most likely class in the sampled error's orbit
    /// is the sampled class.
    pub success: f64,
    /// Number of gauge cosets with nonzero probability.
    pub cosets: usize,
    /// Number of orbits under multiplication by observables.
    pub orbits: usize,
    /// Number of errors enumerated.
    pub errors: u64,
    /// Total probability visited; 1 up to rounding.
    pub total: f64,
}

/// Maximum-likelihood success probability `Σ_orbit max_L ℙ(E·L·𝒢)`.
///
/// Every error with nonzero probability is reduced to a canonical coset
/// representative; cosets related by products of observables form one
/// orbit, and the decoder picks the heaviest coset in each.
pub fn exact_ml_success(basis: &GaugeBasis, observables: &[SpacetimePauli], channel: &NoiseChannel) -> Result<ExactResult, OracleError> {
    let grid = basis.grid();
    let n = grid.sites();
    let probs = channel.probabilities();
    let allowed: Vec<Pauli> = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z]
        .into_iter()
        .filter(|&p| probs[pauli_index(p)] > 0.0)
        .collect();
    let count = (allowed.len() as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    if count > MAX_ERRORS {
        return Err(OracleError::TooLarge {
            what: "errors",
            size: count,
            limit: MAX_ERRORS,
        });
    }
    let mut elim = Eliminator::new(2 * n, basis.len());
    for g in basis.generators() {
        elim.insert(&g.symplectic());
    }
    let ln: Vec<f64> = allowed.iter().map(|&p| channel.ln_prob(p)).collect();
    let mut cosets: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut digits = vec![0usize; n];
    let mut total = 0.0;
    for _ in 0..count {
        let mut x = Bits::zeros(n);
        let mut z = Bits::zeros(n);
        let mut lp = 0.0;
        for (s, &d) in digits.iter().enumerate() {
            let p = allowed[d];
            x.set(s, p.has_x());
            z.set(s, p.has_z());
            lp += ln[d];
        }
        let pr = lp.exp();
        total += pr;
        let key: Vec<usize> = elim.residual(&x.concat(&z)).iter_ones().collect();
        *cosets.entry(key).or_insert(0.0) += pr;
        for d in digits.iter_mut() {
            *d += 1;
            if *d < allowed.len() {
                break;
            }
            *d = 0;
        }
    }
    let obs_syms: Vec<Bits> = observables.iter().map(|o| o.symplectic()).collect();
    let mut shifts = Vec::new();
    for mask in 0u64..(1 << obs_syms.len()) {
        let mut v = Bits::zeros(2 * n);
        for (j, o) in obs_syms.iter().enumerate() {
            if mask >> j & 1 == 1 {
                v.xor_assign(o);
            }
        }
        shifts.push(v);
    }
    let mut keys: Vec<&Vec<usize>> = cosets.keys().collect();
    keys.sort();
    let mut seen: HashMap<&Vec<usize>, ()> = HashMap::new();
    let mut success = 0.0;
    let mut orbits = 0;
    for key in keys {
        if seen.contains_key(key) {
            continue;
        }
        orbits += 1;
        let base = Bits::from_indices(2 * n, key.iter().copied());
        let mut best: f64 = 0.0;
        for s in &shifts {
            let mut v = base.clone();
            v.xor_assign(s);
            let k: Vec<usize> = elim.residual(&v).iter_ones().collect();
            if let Some((kk, &p)) = cosets.get_key_value(&k) {
                best = best.max(p);
                seen.insert(kk, ());
            }
        }
        success += best;
    }
    Ok(ExactResult {
        success,
        cosets: cosets.len(),
        orbits,
        errors: count,
        total,
    })
}

fn pauli_index(p: Pauli) -> usize {
    match p {
        Pauli::I => 0,
        Pauli::X => 1,
        Pauli::Y => 2,
        Pauli::Z => 3,
    }
}

/// `ln` of `Σ_L e^{ln Z_L}` for reporting class probabilities.
pub fn ln_sum(values: &[f64]) -> f64 {
    values.iter().fold(f64::NEG_INFINITY, |a, &b| ln_add_exp(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{builtin, parse, BuiltinParams};
    use crate::disorder::signs_from_error;
    use crate::pauli::SpacetimeCoord;
    use crate::spinmodel::build_hamiltonian;
    use approx::assert_relative_eq;

    #[test]
    fn single_bond_closed_form() {
        // One idle qubit over two layers: two spins share the middle bond.
        let c = parse("QUBITS 1\nTICK\nTICK\n").unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let ch = NoiseChannel::independent(0.1, 0.2);
        let m = build_hamiltonian(&b, &ch).unwrap();
        let eta = vec![1i8; m.interactions().len()];
        let lz = exact_partition(&m, &eta).unwrap();
        let lc = ln_coset_probability(&SpacetimePauli::identity(c.grid()), &b, &ch).unwrap();
        assert_relative_eq!(lz, lc, epsilon = 1e-12);
    }

    #[test]
    fn trivial_circuit_hand_enumeration() {
        // One idle at t=1 on one layer... with T=1 the grid has one layer and
        // the idle truncates to [X] and [Z] on it: the group is all four
        // single-qubit Paulis.
        let c = parse("QUBITS 1\nTICK\n").unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let ch = NoiseChannel::independent(0.1, 0.1);
        let p = coset_probability(&SpacetimePauli::identity(c.grid()), &b, &ch).unwrap();
        assert_eq!(b.rank(), 2);
        assert_relative_eq!(p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coset_invariance() {
        let c = builtin("rep_memory", &BuiltinParams::new(2)).unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let ch = NoiseChannel::independent(0.1, 0.05);
        let e = SpacetimePauli::single(c.grid(), SpacetimeCoord::new(1, 1), Pauli::Y).unwrap();
        let eg = e.multiply(&b.generators()[3]).unwrap();
        assert_relative_eq!(
            ln_coset_probability(&e, &b, &ch).unwrap(),
            ln_coset_probability(&eg, &b, &ch).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn partition_matches_coset_on_memory() {
        let c = builtin("rep_memory", &BuiltinParams::new(3).with_duration(3)).unwrap();
        for over in [false, true] {
            let b = GaugeBasis::from_circuit(&c, over);
            let ch = NoiseChannel::independent(0.1, 0.03);
            let m = build_hamiltonian(&b, &ch).unwrap();
            let e = SpacetimePauli::parse_tokens(c.grid(), "X 0@0.5 Z 2@1.5 Y 1@2.5").unwrap();
            let r = signs_from_error(&m, &e).unwrap();
            assert_relative_eq!(
                exact_partition(&m, &r.eta).unwrap(),
                ln_coset_probability(&e, &b, &ch).unwrap(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn ml_success_limits() {
        let c = builtin("rep_memory", &BuiltinParams::new(3).with_duration(3)).unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let obs = vec![c.observables()[0].representative.clone()];
        let r = exact_ml_success(&b, &obs, &NoiseChannel::independent(0.0, 0.0)).unwrap();
        assert_relative_eq!(r.success, 1.0, epsilon = 1e-12);
        // Reset then measure: X flips the readout, two equally likely classes.
        let q = parse("QUBITS 1\nR Z 0\nTICK\nM Z 0\n").unwrap();
        let qb = GaugeBasis::from_circuit(&q, false);
        let x = SpacetimePauli::parse_tokens(q.grid(), "X 0@0.5").unwrap();
        let half = exact_ml_success(&qb, &[x], &NoiseChannel::independent(0.5, 0.0)).unwrap();
        assert_relative_eq!(half.total, 1.0, epsilon = 1e-12);
        assert_relative_eq!(half.success, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn too_large_rejected() {
        let c = builtin("rep_memory", &BuiltinParams::new(7)).unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let m = build_hamiltonian(&b, &NoiseChannel::independent(0.1, 0.0)).unwrap();
        let eta = vec![1; m.interactions().len()];
        assert!(matches!(exact_partition(&m, &eta), Err(OracleError::TooLarge { .. })));
    }
}
