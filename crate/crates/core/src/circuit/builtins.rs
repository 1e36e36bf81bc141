//! Built-in circuit families.
//!
//! Conventions shared by the ancilla-based families: period-4 rounds with
//! `R` at `4k`, two CNOT layers at `4k+1`, `4k+2` and `M` at `4k+3`; data
//! qubits are reset at `t = 0` and measured at `t = T`.

use serde::{Deserialize, Serialize};

use super::{Basis, Circuit, CircuitError, Gate, ObservableDecl, OpKind, Operation};
use crate::pauli::{Grid, Pauli, SpacetimeCoord, SpacetimePauli};

pub const BUILTIN_NAMES: &[&str] = &[
    "rep_memory",
    "rep_stability",
    "rep_standard",
    "rep_wiggling",
    "rep_cnot",
    "toric_standard",
    "toric_wiggling",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnotSchedule {
    #[default]
    Midpoint,
    EveryCell,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuiltinParams {
    pub d: usize,
    /// Duration `T`; each family has its own default.
    #[serde(default)]
    pub duration: Option<usize>,
    #[serde(default)]
    pub cnot_schedule: Option<CnotSchedule>,
}

impl BuiltinParams {
    pub fn new(d: usize) -> Self {
        BuiltinParams {
            d,
            ..Default::default()
        }
    }

    pub fn with_duration(mut self, t: usize) -> Self {
        self.duration = Some(t);
        self
    }

    pub fn with_schedule(mut self, s: CnotSchedule) -> Self {
        self.cnot_schedule = Some(s);
        self
    }
}

pub(super) fn bad(name: &str, msg: impl Into<String>) -> CircuitError {
    CircuitError::BadParams {
        name: name.to_string(),
        msg: msg.into(),
    }
}

pub fn builtin(name: &str, params: &BuiltinParams) -> Result<Circuit, CircuitError> {
    match name {
        "rep_memory" => rep_memory(params),
        "rep_stability" => rep_stability(params),
        "rep_standard" => rep_ancilla(params, false),
        "rep_wiggling" => rep_ancilla(params, true),
        "rep_cnot" => rep_cnot(params),
        "toric_standard" => super::toric::toric(params, false),
        "toric_wiggling" => super::toric::toric(params, true),
        _ => Err(CircuitError::UnknownBuiltin(name.to_string())),
    }
}

#[derive(Default)]
pub(super) struct Builder {
    ops: Vec<Operation>,
}

impl Builder {
    pub(super) fn push(&mut self, t: usize, kind: OpKind, qubits: &[usize]) {
        self.ops.push(Operation::new(kind, qubits.to_vec(), t));
    }

    pub(super) fn reset(&mut self, t: usize, b: Basis, q: usize) {
        self.push(t, OpKind::Reset(b), &[q]);
    }

    pub(super) fn measure(&mut self, t: usize, b: Basis, qs: &[usize]) {
        self.push(t, OpKind::Measure(b), qs);
    }

    pub(super) fn cx(&mut self, t: usize, c: usize, tgt: usize) {
        self.push(t, OpKind::Unitary(Gate::CX), &[c, tgt]);
    }

    pub(super) fn finish(
        self,
        n: usize,
        duration: usize,
        observables: Vec<ObservableDecl>,
    ) -> Result<Circuit, CircuitError> {
        Circuit::new(n, duration, self.ops, observables)
    }
}

pub(super) fn x_string(
    grid: Grid,
    name: &str,
    sites: impl IntoIterator<Item = (usize, usize)>,
) -> ObservableDecl {
    let rep = SpacetimePauli::from_sites(
        grid,
        sites
            .into_iter()
            .map(|(q, l)| (SpacetimeCoord::new(q, l), Pauli::X)),
    )
    .expect("builtin observable inside grid");
    ObservableDecl {
        name: name.to_string(),
        representative: rep,
    }
}

/// Brickwork of two-qubit `M_ZZ`: pairs `(0,1),(2,3),…` at odd `t` and
/// `(1,2),(3,4),…` at even `t`. With `boundary`, an unpaired end qubit is
/// measured with a single-qubit `M_Z`.
fn brickwork(b: &mut Builder, n: usize, t: usize, boundary: bool) {
    let first = if t % 2 == 1 { 0 } else { 1 };
    if boundary && first == 1 {
        b.measure(t, Basis::Z, &[0]);
    }
    let mut q = first;
    while q + 1 < n {
        b.measure(t, Basis::Z, &[q, q + 1]);
        q += 2;
    }
    if boundary && q == n - 1 {
        b.measure(t, Basis::Z, &[n - 1]);
    }
}

fn rep_memory(p: &BuiltinParams) -> Result<Circuit, CircuitError> {
    let name = "rep_memory";
    let d = p.d;
    if d < 2 {
        return Err(bad(name, "d must be at least 2"));
    }
    let t_end = p.duration.unwrap_or(2 * d + 1);
    if t_end < 2 {
        return Err(bad(name, "duration must be at least 2"));
    }
    let mut b = Builder::default();
    for q in 0..d {
        b.reset(0, Basis::Z, q);
        b.measure(t_end, Basis::Z, &[q]);
    }
    for t in 1..t_end {
        brickwork(&mut b, d, t, false);
    }
    let grid = Grid::new(d, t_end);
    let layer = t_end / 2;
    let obs = x_string(grid, "X", (0..d).map(|q| (q, layer)));
    b.finish(d, t_end, vec![obs])
}

fn rep_stability(p: &BuiltinParams) -> Result<Circuit, CircuitError> {
    let name = "rep_stability";
    let d = p.d;
    if d < 2 {
        return Err(bad(name, "d must be at least 2"));
    }
    let t_end = p.duration.unwrap_or(2 * d + 1);
    if t_end < 3 {
        return Err(bad(name, "duration must be at least 3"));
    }
    let mut b = Builder::default();
    for q in 0..d {
        b.reset(0, Basis::X, q);
        b.measure(t_end, Basis::X, &[q]);
    }
    for t in 1..t_end {
        brickwork(&mut b, d, t, true);
    }
    // A timelike X string on qubit 0 flips every measurement of qubit 0 at
    // odd t, hence the parity of each two-step round, without firing any
    // detector.
    let grid = Grid::new(d, t_end);
    let obs = x_string(grid, "T", (0..t_end).map(|l| (0, l)));
    b.finish(d, t_end, vec![obs])
}

/// Syndrome rounds for one repetition-code patch on qubits `offset..offset+2d-1`.
fn ancilla_rounds(b: &mut Builder, d: usize, offset: usize, rounds: usize, wiggle: bool) {
    let n = 2 * d - 1;
    let q = |i: usize| offset + i;
    for k in 0..rounds {
        let t0 = 4 * k;
        let flipped = wiggle && k % 2 == 1;
        // Ancillas of this round: odd sites normally, even sites 2.. on wiggled rounds.
        let ancillas: Vec<usize> = if flipped {
            (1..d).map(|j| 2 * j).collect()
        } else {
            (0..d - 1).map(|j| 2 * j + 1).collect()
        };
        if k == 0 {
            for i in 0..n {
                b.reset(0, Basis::Z, q(i));
            }
        } else {
            for &a in &ancillas {
                b.reset(t0, Basis::Z, q(a));
            }
        }
        if !wiggle {
            for j in 0..d - 1 {
                b.cx(t0 + 1, q(2 * j), q(2 * j + 1));
                b.cx(t0 + 2, q(2 * j + 2), q(2 * j + 1));
            }
            for &a in &ancillas {
                b.measure(t0 + 3, Basis::Z, &[q(a)]);
            }
        } else if !flipped {
            // Copy each data qubit right, then fold it into the next data
            // qubit, which now holds the parity and is measured.
            for j in 0..d - 1 {
                b.cx(t0 + 1, q(2 * j), q(2 * j + 1));
                b.cx(t0 + 2, q(2 * j + 1), q(2 * j + 2));
            }
            for j in 1..d {
                b.measure(t0 + 3, Basis::Z, &[q(2 * j)]);
            }
        } else {
            // Time reverse of the round above.
            for j in 0..d - 1 {
                b.cx(t0 + 1, q(2 * j + 1), q(2 * j + 2));
                b.cx(t0 + 2, q(2 * j), q(2 * j + 1));
            }
            for j in 0..d - 1 {
                b.measure(t0 + 3, Basis::Z, &[q(2 * j + 1)]);
            }
        }
    }
}

/// Qubits (relative to the patch) that hold data right after round `k`'s measurement.
fn data_after_round(d: usize, k: usize, wiggle: bool) -> Vec<usize> {
    if wiggle && k % 2 == 0 {
        std::iter::once(0).chain((0..d - 1).map(|j| 2 * j + 1)).collect()
    } else {
        (0..d).map(|j| 2 * j).collect()
    }
}

fn final_readout(b: &mut Builder, d: usize, offset: usize, t_end: usize, wiggle: bool) {
    let k_last = (t_end - 3) / 4;
    for i in data_after_round(d, k_last, wiggle) {
        b.measure(t_end, Basis::Z, &[offset + i]);
    }
}

fn ancilla_duration(name: &str, p: &BuiltinParams) -> Result<usize, CircuitError> {
    if p.d < 2 {
        return Err(bad(name, "d must be at least 2"));
    }
    let t_end = p.duration.unwrap_or(4 * p.d - 1);
    if t_end < 3 || t_end % 4 != 3 {
        return Err(bad(name, "duration must be 3 mod 4"));
    }
    Ok(t_end)
}

fn rep_ancilla(p: &BuiltinParams, wiggle: bool) -> Result<Circuit, CircuitError> {
    let name = if wiggle { "rep_wiggling" } else { "rep_standard" };
    let t_end = ancilla_duration(name, p)?;
    let d = p.d;
    let n = 2 * d - 1;
    let rounds = (t_end + 1) / 4;
    let mut b = Builder::default();
    ancilla_rounds(&mut b, d, 0, rounds, wiggle);
    final_readout(&mut b, d, 0, t_end, wiggle);
    let k = (rounds - 1) / 2;
    let layer = 4 * k + 3;
    let grid = Grid::new(n, t_end);
    let obs = x_string(grid, "X", data_after_round(d, k, wiggle).into_iter().map(|q| (q, layer)));
    b.finish(n, t_end, vec![obs])
}

fn rep_cnot(p: &BuiltinParams) -> Result<Circuit, CircuitError> {
    let name = "rep_cnot";
    let t_end = ancilla_duration(name, p)?;
    let d = p.d;
    let patch = 2 * d - 1;
    let n = 2 * patch;
    let rounds = (t_end + 1) / 4;
    if rounds < 2 {
        return Err(bad(name, "need at least two rounds"));
    }
    let mut b = Builder::default();
    for offset in [0, patch] {
        ancilla_rounds(&mut b, d, offset, rounds, false);
        final_readout(&mut b, d, offset, t_end, false);
    }
    // Transversal CNOTs sit on the ancilla-reset steps, where data qubits idle.
    let mid = rounds / 2;
    let cnot_rounds: Vec<usize> = match p.cnot_schedule.unwrap_or_default() {
        CnotSchedule::Midpoint => vec![mid],
        CnotSchedule::EveryCell => (1..rounds).collect(),
    };
    for &k in &cnot_rounds {
        for j in 0..d {
            b.cx(4 * k, 2 * j, patch + 2 * j);
        }
    }
    let layer = 4 * mid - 1;
    let grid = Grid::new(n, t_end);
    let xc = x_string(grid, "Xc", (0..d).map(|j| (2 * j, layer)));
    let xt = x_string(grid, "Xt", (0..d).map(|j| (patch + 2 * j, layer)));
    b.finish(n, t_end, vec![xc, xt])
}
