//! Circuit intermediate representation.
//!
//! Operations live at integer timesteps `t ∈ [0, T]`; errors live on the
//! `T` layers in between. Every qubit carries exactly one operation per
//! timestep, with idles materialized as `Unitary(I)`.

mod builtins;
mod parse;
mod toric;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pauli::{Grid, Pauli, PauliError, SpacetimePauli};

pub use builtins::{builtin, BuiltinParams, CnotSchedule, BUILTIN_NAMES};
pub use parse::parse;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("line {line}: qubit {qubit} used twice at timestep {t}")]
    OverlappingSupport { line: usize, t: usize, qubit: usize },
    #[error("line {line}: unknown gate `{name}`")]
    UnknownGate { line: usize, name: String },
    #[error("line {line}: bad coordinate")]
    BadCoordinate { line: usize, source: PauliError },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("bad parameters for `{name}`: {msg}")]
    BadParams { name: String, msg: String },
    #[error("invalid circuit: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    pub fn pauli(self) -> Pauli {
        match self {
            Basis::X => Pauli::X,
            Basis::Z => Pauli::Z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    I,
    H,
    S,
    CX,
    CZ,
    SWAP,
}

impl Gate {
    pub fn arity(self) -> usize {
        match self {
            Gate::I | Gate::H | Gate::S => 1,
            Gate::CX | Gate::CZ | Gate::SWAP => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gate::I => "I",
            Gate::H => "H",
            Gate::S => "S",
            Gate::CX => "CX",
            Gate::CZ => "CZ",
            Gate::SWAP => "SWAP",
        }
    }

    pub fn from_name(s: &str) -> Option<Gate> {
        Some(match s {
            "I" => Gate::I,
            "H" => Gate::H,
            "S" => Gate::S,
            "CX" | "CNOT" => Gate::CX,
            "CZ" => Gate::CZ,
            "SWAP" => Gate::SWAP,
            _ => return None,
        })
    }

    /// Phase-free conjugation `U P U†` of a Pauli on the gate's qubits.
    pub fn conjugate(self, p: &[Pauli]) -> Vec<Pauli> {
        assert_eq!(p.len(), self.arity());
        match self {
            Gate::I => p.to_vec(),
            Gate::H => vec![p[0].opposite()],
            // S: X -> Y, Z -> Z
            Gate::S => vec![Pauli::from_bits(p[0].has_x(), p[0].has_z() ^ p[0].has_x())],
            Gate::CX => {
                let (xc, zc, xt, zt) = (p[0].has_x(), p[0].has_z(), p[1].has_x(), p[1].has_z());
                vec![Pauli::from_bits(xc, zc ^ zt), Pauli::from_bits(xt ^ xc, zt)]
            }
            Gate::CZ => {
                let (xa, za, xb, zb) = (p[0].has_x(), p[0].has_z(), p[1].has_x(), p[1].has_z());
                vec![Pauli::from_bits(xa, za ^ xb), Pauli::from_bits(xb, zb ^ xa)]
            }
            Gate::SWAP => vec![p[1], p[0]],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Reset(Basis),
    /// Single-qubit `M_B` or two-qubit `M_BB`.
    Measure(Basis),
    Unitary(Gate),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operation {
    pub kind: OpKind,
    pub qubits: Vec<usize>,
    pub t: usize,
}

impl Operation {
    pub fn new(kind: OpKind, qubits: Vec<usize>, t: usize) -> Self {
        Operation { kind, qubits, t }
    }

    pub fn is_idle(&self) -> bool {
        self.kind == OpKind::Unitary(Gate::I)
    }

    fn arity_ok(&self) -> bool {
        match self.kind {
            OpKind::Reset(_) => self.qubits.len() == 1,
            OpKind::Measure(_) => matches!(self.qubits.len(), 1 | 2),
            OpKind::Unitary(g) => self.qubits.len() == g.arity(),
        }
    }

    /// The measured Pauli on the operation's qubits, for measurements and resets.
    pub fn measured_pauli(&self) -> Option<Vec<Pauli>> {
        match self.kind {
            OpKind::Measure(b) | OpKind::Reset(b) => Some(vec![b.pauli(); self.qubits.len()]),
            OpKind::Unitary(_) => None,
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let qs: Vec<String> = self.qubits.iter().map(|q| q.to_string()).collect();
        match self.kind {
            OpKind::Reset(b) => write!(f, "R {:?} {}", b, qs.join(" ")),
            OpKind::Measure(b) => {
                let basis: String = std::iter::repeat(format!("{b:?}")).take(self.qubits.len()).collect();
                write!(f, "M {} {}", basis, qs.join(" "))
            }
            OpKind::Unitary(g) => write!(f, "{} {}", g.name(), qs.join(" ")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservableDecl {
    pub name: String,
    pub representative: SpacetimePauli,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    num_qubits: usize,
    duration: usize,
    ops: Vec<Operation>,
    observables: Vec<ObservableDecl>,
}

impl Circuit {
    /// Builds a circuit, sorting operations and materializing idles.
    ///
    /// Fails on any structural violation reported by [`Circuit::structural_violations`].
    pub fn new(
        num_qubits: usize,
        duration: usize,
        ops: Vec<Operation>,
        observables: Vec<ObservableDecl>,
    ) -> Result<Self, CircuitError> {
        let mut c = Circuit {
            num_qubits,
            duration,
            ops: ops.into_iter().filter(|o| !o.is_idle()).collect(),
            observables,
        };
        let v = c.structural_violations();
        if !v.is_empty() {
            return Err(CircuitError::Invalid(v.join("; ")));
        }
        c.materialize_idles();
        Ok(c)
    }

    fn materialize_idles(&mut self) {
        let mut busy = vec![vec![false; self.num_qubits]; self.duration + 1];
        for op in &self.ops {
            for &q in &op.qubits {
                busy[op.t][q] = true;
            }
        }
        for (t, row) in busy.iter().enumerate() {
            for (q, &b) in row.iter().enumerate() {
                if !b {
                    self.ops.push(Operation::new(OpKind::Unitary(Gate::I), vec![q], t));
                }
            }
        }
        self.ops.sort_by_key(|o| (o.t, o.qubits[0]));
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Number of timesteps `T`; operations occupy `t ∈ [0, T]`.
    pub fn duration(&self) -> usize {
        self.duration
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.num_qubits, self.duration)
    }

    pub fn ops(&self) -> &[Operation] {
        &self.ops
    }

    pub fn observables(&self) -> &[ObservableDecl] {
        &self.observables
    }

    pub fn observable(&self, name: &str) -> Option<&ObservableDecl> {
        self.observables.iter().find(|o| o.name == name)
    }

    pub fn with_observables(mut self, observables: Vec<ObservableDecl>) -> Self {
        self.observables = observables;
        self
    }

    pub fn ops_at(&self, t: usize) -> impl Iterator<Item = &Operation> {
        self.ops.iter().filter(move |o| o.t == t)
    }

    /// Operation acting on `qubit` at timestep `t`.
    pub fn op_on(&self, qubit: usize, t: usize) -> Option<&Operation> {
        self.ops_at(t).find(|o| o.qubits.contains(&qubit))
    }

    /// Structural problems that do not need the gauge group.
    pub fn structural_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for op in &self.ops {
            if op.t > self.duration {
                out.push(format!("`{op}` at t={} beyond duration {}", op.t, self.duration));
            }
            if !op.arity_ok() {
                out.push(format!("`{op}` at t={} has wrong arity", op.t));
            }
            for (k, &q) in op.qubits.iter().enumerate() {
                if q >= self.num_qubits {
                    out.push(format!("`{op}` at t={} uses qubit {q} >= {}", op.t, self.num_qubits));
                }
                if op.qubits[..k].contains(&q) {
                    out.push(format!("`{op}` at t={} repeats qubit {q}", op.t));
                }
                *seen.entry((op.t, q)).or_default() += 1;
            }
        }
        for ((t, q), n) in seen {
            if n > 1 {
                out.push(format!("qubit {q} has {n} operations at t={t}"));
            }
        }
        for o in &self.observables {
            if o.representative.grid() != self.grid() {
                out.push(format!("observable `{}` is on the wrong grid", o.name));
            }
        }
        out
    }

    /// Canonical text rendering; idles are omitted.
    pub fn render(&self) -> String {
        let mut s = format!("QUBITS {}\n", self.num_qubits);
        for t in 0..=self.duration {
            if t > 0 {
                s.push_str("TICK\n");
            }
            for op in self.ops_at(t).filter(|o| !o.is_idle()) {
                s.push_str(&format!("{op}\n"));
            }
        }
        for o in &self.observables {
            s.push_str(&format!("OBS {} {}\n", o.name, o.representative));
        }
        s
    }
}
