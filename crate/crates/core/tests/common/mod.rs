//! Fixtures shared by the integration tests.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stspin::circuit::{parse, Circuit};
use stspin::spacetime::GaugeBasis;

/// A random small circuit: at every timestep each qubit receives a random
/// reset, measurement, gate or idle.
pub fn random_circuit(rng: &mut ChaCha8Rng, max_qubits: usize, max_sites: usize) -> Circuit {
    let n = rng.gen_range(1..=max_qubits);
    let t_end = rng.gen_range(1..=(max_sites / n).max(1));
    let mut text = format!("QUBITS {n}\n");
    for t in 0..=t_end {
        if t > 0 {
            text.push_str("TICK\n");
        }
        let mut free: Vec<usize> = (0..n).collect();
        free.shuffle(rng);
        while let Some(q) = free.pop() {
            let two = !free.is_empty() && rng.gen_bool(0.35);
            if two {
                let r = free.pop().unwrap();
                let op = ["CX", "CZ", "SWAP", "M ZZ", "M XX"].choose(rng).unwrap();
                text.push_str(&format!("{op} {q} {r}\n"));
            } else {
                let op = ["I", "H", "S", "R Z", "R X", "M Z", "M X", "I"].choose(rng).unwrap();
                if *op != "I" {
                    text.push_str(&format!("{op} {q}\n"));
                }
            }
        }
    }
    parse(&text).expect("generated circuit parses")
}

/// Random circuits whose basis has at most `max_gens` generators.
pub fn random_fixtures(seed: u64, count: usize, max_gens: usize, max_sites: usize, overcomplete: bool) -> Vec<(Circuit, GaugeBasis)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let c = random_circuit(&mut rng, 3, max_sites);
        let b = GaugeBasis::from_circuit(&c, overcomplete);
        if b.len() <= max_gens && !b.is_empty() {
            out.push((c, b));
        }
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
