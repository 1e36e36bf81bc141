use std::collections::HashSet;

use super::{Basis, Circuit, CircuitError, Gate, ObservableDecl, OpKind, Operation};
use crate::pauli::{Grid, SpacetimePauli};

fn syntax(line: usize, msg: impl Into<String>) -> CircuitError {
    CircuitError::Syntax { line, msg: msg.into() }
}

fn qubit_args(line: usize, args: &[&str], n: usize) -> Result<Vec<usize>, CircuitError> {
    args.iter()
        .map(|a| {
            let q: usize = a.parse().map_err(|_| syntax(line, format!("bad qubit `{a}`")))?;
            if q >= n {
                return Err(syntax(line, format!("qubit {q} out of range (QUBITS {n})")));
            }
            Ok(q)
        })
        .collect()
}

fn basis_of(line: usize, s: &str) -> Result<Basis, CircuitError> {
    match s {
        "X" => Ok(Basis::X),
        "Z" => Ok(Basis::Z),
        _ => Err(syntax(line, format!("unsupported basis `{s}`"))),
    }
}

/// Parses the line-oriented circuit format.
///
/// ```text
/// QUBITS 2
/// R Z 0
/// R Z 1
/// TICK
/// M ZZ 0 1
/// TICK
/// M Z 0
/// M Z 1
/// OBS flip X 0@0.5 X 1@0.5
/// ```
pub fn parse(text: &str) -> Result<Circuit, CircuitError> {
    let mut n: Option<usize> = None;
    let mut t = 0usize;
    let mut ops = Vec::new();
    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut obs_lines: Vec<(usize, String, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let head = toks[0];
        if head == "QUBITS" {
            if n.is_some() {
                return Err(syntax(line, "duplicate QUBITS header"));
            }
            let v = toks
                .get(1)
                .and_then(|s| s.parse().ok())
                .filter(|&v: &usize| v > 0 && toks.len() == 2)
                .ok_or_else(|| syntax(line, "expected `QUBITS <n>`"))?;
            n = Some(v);
            continue;
        }
        let n = n.ok_or_else(|| syntax(line, "missing QUBITS header"))?;
        let (kind, qubits) = match head {
            "TICK" => {
                if toks.len() != 1 {
                    return Err(syntax(line, "TICK takes no arguments"));
                }
                t += 1;
                continue;
            }
            "OBS" => {
                let name = toks.get(1).ok_or_else(|| syntax(line, "OBS needs a name"))?;
                obs_lines.push((line, name.to_string(), toks[2..].join(" ")));
                continue;
            }
            "R" => {
                if toks.len() != 3 {
                    return Err(syntax(line, "expected `R <basis> <qubit>`"));
                }
                (OpKind::Reset(basis_of(line, toks[1])?), qubit_args(line, &toks[2..], n)?)
            }
            "M" => {
                let b = toks.get(1).ok_or_else(|| syntax(line, "expected `M <basis> <qubits>`"))?;
                let basis = match *b {
                    "X" | "Z" => basis_of(line, b)?,
                    "XX" => Basis::X,
                    "ZZ" => Basis::Z,
                    _ => return Err(syntax(line, format!("unsupported measurement `{b}`"))),
                };
                let qs = qubit_args(line, &toks[2..], n)?;
                if qs.len() != b.len() {
                    return Err(syntax(line, format!("`M {b}` needs {} qubits", b.len())));
                }
                (OpKind::Measure(basis), qs)
            }
            name => {
                let g = Gate::from_name(name).ok_or_else(|| CircuitError::UnknownGate {
                    line,
                    name: name.to_string(),
                })?;
                let qs = qubit_args(line, &toks[1..], n)?;
                if qs.len() != g.arity() {
                    return Err(syntax(line, format!("{name} takes {} qubits", g.arity())));
                }
                (OpKind::Unitary(g), qs)
            }
        };
        for &q in &qubits {
            if !used.insert((t, q)) {
                return Err(CircuitError::OverlappingSupport { line, t, qubit: q });
            }
        }
        ops.push(Operation::new(kind, qubits, t));
    }

    let n = n.ok_or_else(|| syntax(0, "missing QUBITS header"))?;
    let grid = Grid::new(n, t);
    let mut observables = Vec::new();
    for (line, name, body) in obs_lines {
        if observables.iter().any(|o: &ObservableDecl| o.name == name) {
            return Err(syntax(line, format!("duplicate observable `{name}`")));
        }
        let representative = SpacetimePauli::parse_tokens(grid, &body)
            .map_err(|source| CircuitError::BadCoordinate { line, source })?;
        observables.push(ObservableDecl { name, representative });
    }
    Circuit::new(n, t, ops, observables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{Pauli, SpacetimeCoord};

    #[test]
    fn minimal_program() {
        let c = parse("QUBITS 1\nTICK\nM Z 0\n").unwrap();
        assert_eq!(c.num_qubits(), 1);
        assert_eq!(c.duration(), 1);
        let m: Vec<_> = c.ops().iter().filter(|o| !o.is_idle()).collect();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].kind, OpKind::Measure(Basis::Z));
        assert_eq!(m[0].t, 1);
    }

    #[test]
    fn overlapping_support_rejected() {
        let e = parse("QUBITS 2\nTICK\nCX 0 1\nCX 1 0\n").unwrap_err();
        assert!(matches!(e, CircuitError::OverlappingSupport { t: 1, .. }));
    }

    #[test]
    fn unknown_gate_rejected() {
        let e = parse("QUBITS 1\nT 0\n").unwrap_err();
        assert!(matches!(e, CircuitError::UnknownGate { line: 2, .. }));
    }

    #[test]
    fn bad_observable_coordinate() {
        let e = parse("QUBITS 1\nTICK\nOBS a X 0@3.5\n").unwrap_err();
        assert!(matches!(e, CircuitError::BadCoordinate { line: 3, .. }));
    }

    #[test]
    fn comments_and_observables() {
        let c = parse("# demo\nQUBITS 2 # two\nR Z 0\nTICK\nM ZZ 0 1\nOBS x X 0@0.5 X 1@0.5\n").unwrap();
        let o = c.observable("x").unwrap();
        assert_eq!(o.representative.get(SpacetimeCoord::new(1, 0)), Pauli::X);
        assert_eq!(parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn malformed_lines() {
        assert!(parse("TICK\n").is_err());
        assert!(parse("QUBITS 1\nM ZZ 0\n").is_err());
        assert!(parse("QUBITS 1\nM Y 0\n").is_err());
        assert!(parse("QUBITS 2\nCX 0\n").is_err());
        assert!(parse("QUBITS 2\nH 5\n").is_err());
    }
}
