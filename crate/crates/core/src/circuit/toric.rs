//! Toric-code syndrome extraction on a `d × d` torus (`d` even).
//!
//! Data qubits sit on lattice points `(i, j)`, checks on plaquettes with
//! corners `(i, j), (i+1, j), (i, j+1), (i+1, j+1)`; plaquette `(i, j)` is
//! an X check when `i + j` is even. Each unit cell holds four qubits in
//! the order `Z, A, X, B`: X plaquette `(i, j)`, its right neighbour Z
//! plaquette `(i+1, j)`, and data `A = (i+1, j)`, `B = (i+1, j+1)`.
//!
//! A round takes six steps: ancilla reset at `6k`, CNOT layers at
//! `6k+1..6k+4`, measurement at `6k+5`. X ancillas control CNOTs onto
//! their corners, Z ancillas are targets. The corner order is fixed by
//! [`X_ORDER`] and [`Z_ORDER`].
//!
//! In the wiggling circuit the last CNOT of every plaquette is reversed,
//! folding the check onto that corner's data qubit, which is measured
//! instead of the ancilla; the ancilla takes over as data. Odd rounds run
//! the time reverse, so the data returns to its original qubits every
//! twelve steps.

use super::builtins::{bad, x_string, BuiltinParams, Builder};
use super::{Basis, Circuit, CircuitError};
use crate::pauli::Grid;

/// Plaquette corners as `(di, dj)` offsets, in CNOT order.
pub(super) const X_ORDER: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];
pub(super) const Z_ORDER: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

pub(super) const PERIOD: usize = 6;

struct Lattice {
    d: usize,
}

impl Lattice {
    fn cell_of_x_plaquette(&self, i: usize, j: usize) -> usize {
        debug_assert!((i + j) % 2 == 0);
        (j * self.d + i) / 2
    }

    /// Qubit index of plaquette `(i, j)`'s ancilla.
    fn plaquette(&self, i: usize, j: usize) -> usize {
        let (i, j) = (i % self.d, j % self.d);
        if (i + j) % 2 == 0 {
            4 * self.cell_of_x_plaquette(i, j) + 2
        } else {
            let i0 = (i + self.d - 1) % self.d;
            4 * self.cell_of_x_plaquette(i0, j)
        }
    }

    /// Qubit index of data `(i, j)`.
    fn data(&self, i: usize, j: usize) -> usize {
        let (i, j) = (i % self.d, j % self.d);
        let i0 = (i + self.d - 1) % self.d;
        if (i0 + j) % 2 == 0 {
            4 * self.cell_of_x_plaquette(i0, j) + 1
        } else {
            let j0 = (j + self.d - 1) % self.d;
            4 * self.cell_of_x_plaquette(i0, j0) + 3
        }
    }

    fn plaquettes(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        let d = self.d;
        (0..d).flat_map(move |j| (0..d).map(move |i| (i, j, (i + j) % 2 == 0)))
    }
}

/// One CNOT between a plaquette ancilla and a corner, oriented by check
/// type; `fold` reverses it so the corner ends up holding the parity.
fn check_cnot(b: &mut Builder, t: usize, is_x: bool, anc: usize, data: usize, fold: bool) {
    if is_x != fold {
        b.cx(t, anc, data);
    } else {
        b.cx(t, data, anc);
    }
}

pub(super) fn toric(p: &BuiltinParams, wiggle: bool) -> Result<Circuit, CircuitError> {
    toric_with_order(p, wiggle, X_ORDER, Z_ORDER)
}

pub(super) fn toric_with_order(
    p: &BuiltinParams,
    wiggle: bool,
    x_order: [(usize, usize); 4],
    z_order: [(usize, usize); 4],
) -> Result<Circuit, CircuitError> {
    let name = if wiggle { "toric_wiggling" } else { "toric_standard" };
    let d = p.d;
    if d < 2 || d % 2 != 0 {
        return Err(bad(name, "d must be even and at least 2"));
    }
    let cycle = if wiggle { 2 * PERIOD } else { PERIOD };
    let t_end = p.duration.unwrap_or(2 * d * PERIOD);
    if t_end == 0 || t_end % cycle != 0 {
        return Err(bad(name, format!("duration must be a positive multiple of {cycle}")));
    }
    let lat = Lattice { d };
    let n = 2 * d * d;
    let rounds = t_end / PERIOD;
    let mut b = Builder::default();
    let plaquettes: Vec<(usize, usize, bool)> = lat.plaquettes().collect();
    let basis = |is_x: bool| if is_x { Basis::X } else { Basis::Z };
    let order = |is_x: bool| if is_x { x_order } else { z_order };
    // Qubit that is measured for each plaquette in even rounds.
    let readout = |i: usize, j: usize, is_x: bool| {
        if wiggle {
            let (di, dj) = order(is_x)[3];
            lat.data(i + di, j + dj)
        } else {
            lat.plaquette(i, j)
        }
    };
    for q in 0..n {
        if q % 4 == 1 || q % 4 == 3 {
            b.reset(0, Basis::Z, q);
        }
    }
    for k in 0..rounds {
        let t0 = PERIOD * k;
        let reversed = wiggle && k % 2 == 1;
        for &(i, j, is_x) in &plaquettes {
            let anc = lat.plaquette(i, j);
            let (reset_q, measure_q) = if reversed {
                (readout(i, j, is_x), anc)
            } else {
                (anc, readout(i, j, is_x))
            };
            b.reset(t0, basis(is_x), reset_q);
            for (s, &(di, dj)) in order(is_x).iter().enumerate() {
                let step = if reversed { 3 - s } else { s };
                let fold = wiggle && s == 3;
                check_cnot(&mut b, t0 + 1 + step, is_x, anc, lat.data(i + di, j + dj), fold);
            }
            b.measure(t0 + 5, basis(is_x), &[measure_q]);
        }
    }
    // Whatever holds data after the last round is read out.
    let measured_last: std::collections::BTreeSet<usize> = if rounds > 0 {
        let reversed = wiggle && (rounds - 1) % 2 == 1;
        plaquettes
            .iter()
            .map(|&(i, j, is_x)| {
                if reversed {
                    lat.plaquette(i, j)
                } else {
                    readout(i, j, is_x)
                }
            })
            .collect()
    } else {
        Default::default()
    };
    for q in 0..n {
        if !measured_last.contains(&q) {
            b.measure(t_end, Basis::Z, &[q]);
        }
    }
    // Logical X strings on the original data qubits, after an ancilla
    // measurement round that leaves data in place.
    let grid = Grid::new(n, t_end);
    let k = if wiggle { (rounds / 2 - 1) / 2 * 2 + 1 } else { (rounds - 1) / 2 };
    let layer = PERIOD * k + 5;
    let row = x_string(grid, "X_row", (0..d).map(|i| (lat.data(i, 0), layer)));
    let column = x_string(grid, "X_col", (0..d).map(|j| (lat.data(0, j), layer)));
    b.finish(n, t_end, vec![row, column])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::builtin;

    #[test]
    fn lattice_is_a_bijection() {
        for d in [2, 4, 6] {
            let lat = Lattice { d };
            let mut seen = vec![false; 2 * d * d];
            for j in 0..d {
                for i in 0..d {
                    for q in [lat.plaquette(i, j), lat.data(i, j)] {
                        assert!(!seen[q], "d={d} ({i},{j}) -> {q}");
                        seen[q] = true;
                    }
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn cell_labels() {
        let lat = Lattice { d: 4 };
        assert_eq!(lat.plaquette(0, 0), 2);
        assert_eq!(lat.plaquette(1, 0), 0);
        assert_eq!(lat.data(1, 0), 1);
        assert_eq!(lat.data(1, 1), 3);
    }

    #[test]
    fn sizes_and_params() {
        let c = builtin("toric_standard", &BuiltinParams::new(4)).unwrap();
        assert_eq!(c.num_qubits(), 32);
        assert_eq!(c.duration(), 48);
        let w = builtin("toric_wiggling", &BuiltinParams::new(2).with_duration(24)).unwrap();
        assert_eq!(w.num_qubits(), 8);
        assert!(builtin("toric_standard", &BuiltinParams::new(3)).is_err());
        assert!(builtin("toric_wiggling", &BuiltinParams::new(2).with_duration(18)).is_err());
    }

    #[test]
    fn observables_are_valid_logicals() {
        use crate::spacetime::{validate, GaugeBasis};
        for name in ["toric_standard", "toric_wiggling"] {
            let c = builtin(name, &BuiltinParams::new(2).with_duration(24)).unwrap();
            assert!(validate(&c).is_empty(), "{name}: {:?}", validate(&c));
            let b = GaugeBasis::from_circuit(&c, false);
            assert!(b.is_css());
        }
    }
}
