//! Quenched disorder: sampled errors and the interaction signs they induce.
//!
//! Sign convention: `η_c = −1` exactly when component `c` holds an odd
//! number of errors, so `ℙ(η_c = −1) = p_eff(c)`. Random numbers come from a
//! ChaCha stream keyed by `(seed, realization)` and addressed by position,
//! so each site or interaction draws the same number regardless of how work
//! is split.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::pauli::{Grid, Pauli, SpacetimePauli};
use crate::spinmodel::{effective_probability, NoiseChannel, SpinModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisorderError {
    #[error("direct sign sampling needs an independent X/Z channel")]
    NotIndependent,
    #[error("error lives on grid {0:?}, model on {1:?}")]
    GridMismatch(Grid, Grid),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DisorderSource {
    SampledError(SpacetimePauli),
    DirectComponent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisorderRealization {
    pub eta: Vec<i8>,
    pub source: DisorderSource,
}

#[derive(Serialize)]
struct SignRecord<'a> {
    eta: &'a [i8],
    error: Option<String>,
}

impl DisorderRealization {
    /// `{"eta": [...], "error": "X 0@0.5 ..."}`.
    pub fn to_json(&self) -> String {
        let error = match &self.source {
            DisorderSource::SampledError(e) => Some(e.to_string()),
            DisorderSource::DirectComponent => None,
        };
        serde_json::to_string(&SignRecord { eta: &self.eta, error }).expect("plain data serializes")
    }

    pub fn error(&self) -> Option<&SpacetimePauli> {
        match &self.source {
            DisorderSource::SampledError(e) => Some(e),
            DisorderSource::DirectComponent => None,
        }
    }
}

/// Position-addressable uniform draws for one realization.
pub struct Stream(ChaCha8Rng);

impl Stream {
    pub fn new(seed: u64, realization: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(realization);
        Stream(rng)
    }

    /// Uniform in `[0, 1)` at position `index`.
    pub fn uniform(&mut self, index: u64) -> f64 {
        self.0.set_word_pos(u128::from(index) * 2);
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// I.i.d. single-site Paulis drawn from `channel` at every spacetime qubit.
pub fn sample_error(grid: Grid, channel: &NoiseChannel, seed: u64, realization: u64) -> SpacetimePauli {
    let probs = channel.probabilities();
    let mut stream = Stream::new(seed, realization);
    let mut e = SpacetimePauli::identity(grid);
    for site in 0..grid.sites() {
        let u = stream.uniform(site as u64);
        let p = if u < probs[0] {
            Pauli::I
        } else if u < probs[0] + probs[1] {
            Pauli::X
        } else if u < probs[0] + probs[1] + probs[2] {
            Pauli::Y
        } else if probs[3] > 0.0 {
            Pauli::Z
        } else {
            Pauli::I
        };
        e.mul_site(grid.coord(site), p);
    }
    e
}

/// `η_c = Π_{members} ⟦check, E⟧`.
pub fn signs_from_error(model: &SpinModel, error: &SpacetimePauli) -> Result<DisorderRealization, DisorderError> {
    if error.grid() != model.grid() {
        return Err(DisorderError::GridMismatch(error.grid(), model.grid()));
    }
    let eta = model
        .interactions()
        .iter()
        .map(|it| {
            let flips = it
                .members
                .iter()
                .filter(|m| error.get(m.coord).anticommutes(m.check_pauli()))
                .count();
            if flips % 2 == 0 {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok(DisorderRealization {
        eta,
        source: DisorderSource::SampledError(error.clone()),
    })
}

/// Independent signs with `ℙ(η_c = −1) = p_eff(w_X, w_Z)`.
pub fn sample_signs_direct(model: &SpinModel, seed: u64, realization: u64) -> Result<DisorderRealization, DisorderError> {
    let (px, pz) = model.channel().flavor_probabilities().ok_or(DisorderError::NotIndependent)?;
    let mut stream = Stream::new(seed, realization);
    let eta = model
        .interactions()
        .iter()
        .enumerate()
        .map(|(c, it)| {
            let p = effective_probability(it.weights.0, it.weights.1, px, pz);
            if stream.uniform(c as u64) < p {
                -1
            } else {
                1
            }
        })
        .collect();
    Ok(DisorderRealization {
        eta,
        source: DisorderSource::DirectComponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{builtin, BuiltinParams};
    use crate::spacetime::GaugeBasis;
    use crate::spinmodel::{build_hamiltonian, simplify};

    fn memory_model(p: f64) -> SpinModel {
        let c = builtin("rep_memory", &BuiltinParams::new(3)).unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        simplify(&build_hamiltonian(&b, &NoiseChannel::independent(p, 0.0)).unwrap())
    }

    #[test]
    fn trivial_channels() {
        let g = Grid::new(3, 4);
        assert!(sample_error(g, &NoiseChannel::independent(0.0, 0.0), 1, 0).is_identity());
        let all = sample_error(g, &NoiseChannel::independent(1.0, 0.0), 1, 0);
        assert!(all.is_pure_x() && all.weight() == g.sites());
    }

    #[test]
    fn error_frequency() {
        let g = Grid::new(10, 10);
        let ch = NoiseChannel::independent(0.1, 0.0);
        let n = 1000;
        let hits: usize = (0..n).map(|r| sample_error(g, &ch, 7, r).weight()).sum();
        let trials = (n as usize * g.sites()) as f64;
        let sigma = (trials * 0.1 * 0.9).sqrt();
        assert!((hits as f64 - 0.1 * trials).abs() < 3.0 * sigma);
    }

    #[test]
    fn seeded_streams_repeat() {
        let g = Grid::new(4, 4);
        let ch = NoiseChannel::independent(0.2, 0.1);
        assert_eq!(sample_error(g, &ch, 3, 5), sample_error(g, &ch, 3, 5));
        assert_ne!(sample_error(g, &ch, 3, 5), sample_error(g, &ch, 3, 6));
    }

    #[test]
    fn identity_error_gives_plus_signs() {
        let m = memory_model(0.1);
        let r = signs_from_error(&m, &SpacetimePauli::identity(m.grid())).unwrap();
        assert!(r.eta.iter().all(|&e| e == 1));
    }

    #[test]
    fn single_error_flips_its_component() {
        let m = memory_model(0.1);
        let it = m.interactions().iter().position(|i| i.weight() >= 2).unwrap();
        let loc = m.interactions()[it].members[0];
        let e = SpacetimePauli::single(m.grid(), loc.coord, Pauli::X).unwrap();
        let r = signs_from_error(&m, &e).unwrap();
        for (c, &s) in r.eta.iter().enumerate() {
            let expect_flip = m.interactions()[c].members.contains(&loc);
            assert_eq!(s == -1, expect_flip);
        }
    }

    #[test]
    fn direct_signs_zero_probability() {
        let m = memory_model(0.0);
        let r = sample_signs_direct(&m, 1, 0).unwrap();
        assert!(r.eta.iter().all(|&e| e == 1));
        assert!(r.to_json().contains("\"error\":null"));
    }
}
