//! Statistical-mechanics models for stabilizer circuits.
//!
//! A circuit compiles to gauge generators of its spacetime code
//! ([`spacetime`]), then to a disordered Ising-type Hamiltonian
//! ([`spinmodel`]) whose partition function at fixed disorder equals the
//! probability of an error coset. Free energies of these models decide
//! maximum-likelihood decoding ([`montecarlo`], [`experiment`]); small
//! instances are checked exhaustively ([`oracle`]).

pub mod bits;
pub mod circuit;
pub mod disorder;
pub mod elimination;
pub mod experiment;
pub mod montecarlo;
pub mod oracle;
pub mod pauli;
pub mod spacetime;
pub mod spinmodel;
