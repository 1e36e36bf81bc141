//! Gauge generators of the spacetime subsystem code.
//!
//! Every measurement, reset and gate contributes generators that relate
//! errors with identical effect on all outcomes. Pieces that would sit
//! before the first or after the last error layer are truncated.

use serde::Serialize;
use thiserror::Error;

use crate::bits::{left_null_space, Bits, Eliminator, Reduction};
use crate::circuit::{Circuit, ObservableDecl, OpKind};
use crate::pauli::{Grid, Pauli, SpacetimeCoord, SpacetimePauli};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpacetimeError {
    #[error("operator is not supported on a single layer")]
    NotSingleLayer,
    #[error("target layer {to} precedes source layer {from}")]
    Backwards { from: usize, to: usize },
    #[error("blocked by `{op}` at t={t}")]
    Blocked { t: usize, op: String },
}

/// A candidate gauge generator with a human-readable origin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub pauli: SpacetimePauli,
    pub origin: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FlavorTag {
    PureX,
    PureZ,
    Mixed,
}

impl FlavorTag {
    pub fn of(p: &SpacetimePauli) -> FlavorTag {
        if p.is_pure_x() {
            FlavorTag::PureX
        } else if p.is_pure_z() {
            FlavorTag::PureZ
        } else {
            FlavorTag::Mixed
        }
    }
}

fn local_op(grid: Grid, qubits: &[usize], layer: Option<usize>, p: &[Pauli]) -> SpacetimePauli {
    let mut out = SpacetimePauli::identity(grid);
    if let Some(l) = layer {
        for (&q, &pq) in qubits.iter().zip(p) {
            out.mul_site(SpacetimeCoord::new(q, l), pq);
        }
    }
    out
}

fn single_pauli(len: usize, k: usize, p: Pauli) -> Vec<Pauli> {
    let mut v = vec![Pauli::I; len];
    v[k] = p;
    v
}

/// All candidate generators in emission order: timestep by timestep,
/// measurement and reset generators before propagators.
pub fn build_gauge_generators(circuit: &Circuit) -> Vec<Generator> {
    let grid = circuit.grid();
    let t_end = circuit.duration();
    let mut out = Vec::new();
    let mut emit = |pauli: SpacetimePauli, origin: String| {
        if !pauli.is_identity() {
            out.push(Generator { pauli, origin });
        }
    };
    for t in 0..=t_end {
        let before = t.checked_sub(1);
        let after = (t < t_end).then_some(t);
        for op in circuit.ops_at(t) {
            match op.kind {
                OpKind::Measure(_) => {
                    let m = op.measured_pauli().unwrap();
                    emit(local_op(grid, &op.qubits, before, &m), format!("{op} @t={t} before"));
                    emit(local_op(grid, &op.qubits, after, &m), format!("{op} @t={t} after"));
                }
                OpKind::Reset(_) => {
                    let m = op.measured_pauli().unwrap();
                    emit(local_op(grid, &op.qubits, after, &m), format!("{op} @t={t} after"));
                }
                OpKind::Unitary(_) => {}
            }
        }
        for op in circuit.ops_at(t) {
            match op.kind {
                OpKind::Measure(b) if op.qubits.len() == 2 => {
                    // Paulis commuting with M_BB on its support: the opposite
                    // single-qubit Paulis and the doubled basis Pauli.
                    let m = b.pauli();
                    let mut props = vec![single_pauli(2, 0, m), single_pauli(2, 1, m)];
                    props.push(vec![m.opposite(); 2]);
                    for p in props {
                        let mut g = local_op(grid, &op.qubits, before, &p);
                        g.mul_assign(&local_op(grid, &op.qubits, after, &p)).unwrap();
                        let label: String = p.iter().map(|x| x.symbol()).collect();
                        emit(g, format!("{op} @t={t} prop {label}"));
                    }
                }
                OpKind::Unitary(gate) => {
                    let n = op.qubits.len();
                    for k in 0..n {
                        for p in [Pauli::X, Pauli::Z] {
                            let input = single_pauli(n, k, p);
                            let image = gate.conjugate(&input);
                            let mut g = local_op(grid, &op.qubits, before, &input);
                            g.mul_assign(&local_op(grid, &op.qubits, after, &image)).unwrap();
                            emit(g, format!("{op} @t={t} prop {p}{}", op.qubits[k]));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Gauge generators after GF(2) reduction, with recorded redundancies.
#[derive(Clone, Debug)]
pub struct GaugeBasis {
    grid: Grid,
    generators: Vec<SpacetimePauli>,
    origins: Vec<String>,
    flavors: Vec<FlavorTag>,
    /// Subsets of generator indices whose product is the identity. Only
    /// populated for overcomplete bases.
    redundancies: Vec<Vec<usize>>,
    /// Candidate-index subsets with identity product, recorded in both modes.
    candidate_redundancies: Vec<Vec<usize>>,
    /// Indices of generators forming an independent subset.
    independent: Vec<usize>,
    overcomplete: bool,
}

/// Reduces candidates by symplectic Gaussian elimination, keeping the
/// earliest independent ones. With `keep_overcomplete` every candidate is
/// retained as a generator and each redundancy becomes a gauge symmetry.
///
/// The overcomplete mode drops exact duplicates first (a truncated idle
/// after the last measurement repeats the measurement generator) and then
/// reports each redundancy in local form, see [`local_redundancies`].
pub fn reduce_to_basis(grid: Grid, candidates: &[Generator], keep_overcomplete: bool) -> GaugeBasis {
    let deduped: Vec<Generator>;
    let candidates = if keep_overcomplete {
        let mut seen = std::collections::HashSet::new();
        deduped = candidates.iter().filter(|c| seen.insert(c.pauli.clone())).cloned().collect();
        &deduped[..]
    } else {
        candidates
    };
    let mut elim = Eliminator::new(2 * grid.sites(), candidates.len());
    let mut independent_candidates = Vec::new();
    let mut candidate_redundancies = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        match elim.insert(&c.pauli.symplectic()) {
            Reduction::Independent => independent_candidates.push(i),
            Reduction::Dependent(mut subset) => {
                subset.push(i);
                candidate_redundancies.push(subset);
            }
        }
    }
    let kept: Vec<usize> = if keep_overcomplete {
        (0..candidates.len()).collect()
    } else {
        independent_candidates.clone()
    };
    let generators: Vec<SpacetimePauli> = kept.iter().map(|&i| candidates[i].pauli.clone()).collect();
    let independent = if keep_overcomplete {
        independent_candidates
    } else {
        (0..kept.len()).collect()
    };
    GaugeBasis {
        grid,
        flavors: generators.iter().map(FlavorTag::of).collect(),
        origins: kept.iter().map(|&i| candidates[i].origin.clone()).collect(),
        generators,
        redundancies: if keep_overcomplete {
            let paulis: Vec<&SpacetimePauli> = candidates.iter().map(|c| &c.pauli).collect();
            local_redundancies(grid, &paulis, &candidate_redundancies)
        } else {
            Vec::new()
        },
        candidate_redundancies,
        independent,
        overcomplete: keep_overcomplete,
    }
}

/// Neighbourhood radius (in shared-site hops) tried before falling back to
/// the time-ordered relation.
const LOCAL_DEPTH: usize = 8;

/// Rewrites redundancy relations into local form.
///
/// `global[k]` ends with the dependent candidate `i` and expresses it
/// through all earlier independent candidates, which can drag in relations
/// from far back in time. For each `i` the search instead grows a ball of
/// earlier candidates sharing sites with `i` until `i` becomes dependent on
/// it. Each relation keeps `i` as its largest index, so the result still
/// spans the redundancy space. A final pass shrinks relations by adding
/// earlier ones while that lowers their size.
pub fn local_redundancies(grid: Grid, paulis: &[&SpacetimePauli], global: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut at_site: Vec<Vec<usize>> = vec![Vec::new(); grid.sites()];
    let supports: Vec<Vec<usize>> = paulis
        .iter()
        .map(|p| p.support().into_iter().map(|c| grid.index(c)).collect())
        .collect();
    for (k, sup) in supports.iter().enumerate() {
        for &s in sup {
            at_site[s].push(k);
        }
    }
    let mut out: Vec<Bits> = Vec::with_capacity(global.len());
    for rel in global {
        let i = *rel.last().expect("relation names its dependent candidate");
        let mut ball: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
        let mut frontier = vec![i];
        let mut found = None;
        for _ in 0..LOCAL_DEPTH {
            let mut next = Vec::new();
            for &k in &frontier {
                for &s in &supports[k] {
                    for &j in &at_site[s] {
                        if j < i && ball.insert(j) {
                            next.push(j);
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
            let members: Vec<usize> = ball.iter().copied().collect();
            let mut elim = Eliminator::new(2 * grid.sites(), members.len() + 1);
            for &j in &members {
                elim.insert(&paulis[j].symplectic());
            }
            if let Reduction::Dependent(sub) = elim.insert(&paulis[i].symplectic()) {
                found = Some(sub.into_iter().map(|k| members[k]).chain([i]).collect::<Vec<_>>());
                break;
            }
        }
        let rel = found.unwrap_or_else(|| rel.clone());
        out.push(Bits::from_indices(paulis.len(), rel));
    }
    // Adding a relation with a smaller top index keeps the top index.
    let tops: Vec<usize> = global.iter().map(|r| *r.last().unwrap()).collect();
    loop {
        let mut changed = false;
        for a in 0..out.len() {
            for b in 0..out.len() {
                if tops[b] >= tops[a] || !out[a].intersects(&out[b]) {
                    continue;
                }
                let mut x = out[a].clone();
                x.xor_assign(&out[b]);
                if x.count_ones() < out[a].count_ones() {
                    out[a] = x;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    out.iter().map(|r| r.iter_ones().collect()).collect()
}

impl GaugeBasis {
    /// Builds and reduces the generators of a circuit.
    pub fn from_circuit(circuit: &Circuit, keep_overcomplete: bool) -> GaugeBasis {
        reduce_to_basis(circuit.grid(), &build_gauge_generators(circuit), keep_overcomplete)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[SpacetimePauli] {
        &self.generators
    }

    pub fn origins(&self) -> &[String] {
        &self.origins
    }

    pub fn flavors(&self) -> &[FlavorTag] {
        &self.flavors
    }

    pub fn redundancies(&self) -> &[Vec<usize>] {
        &self.redundancies
    }

    pub fn candidate_redundancies(&self) -> &[Vec<usize>] {
        &self.candidate_redundancies
    }

    pub fn is_overcomplete(&self) -> bool {
        self.overcomplete
    }

    /// Dimension of the gauge group over GF(2).
    pub fn rank(&self) -> usize {
        self.independent.len()
    }

    /// `len() - rank()`: each group element is hit `2^redundancy` times
    /// when summing over all generator subsets.
    pub fn redundancy(&self) -> usize {
        self.len() - self.rank()
    }

    pub fn independent_indices(&self) -> &[usize] {
        &self.independent
    }

    /// Every generator is pure X or pure Z.
    pub fn is_css(&self) -> bool {
        self.flavors.iter().all(|f| *f != FlavorTag::Mixed)
    }

    fn eliminator(&self, extra: usize) -> Eliminator {
        let mut e = Eliminator::new(2 * self.grid.sites(), self.independent.len() + extra);
        for &i in &self.independent {
            e.insert(&self.generators[i].symplectic());
        }
        e
    }

    /// Generator indices whose product is `p`, if `p` is in the gauge group.
    pub fn express(&self, p: &SpacetimePauli) -> Option<Vec<usize>> {
        let e = self.eliminator(0);
        e.express(&p.symplectic())
            .map(|sub| sub.into_iter().map(|k| self.independent[k]).collect())
    }

    pub fn contains(&self, p: &SpacetimePauli) -> bool {
        self.express(p).is_some()
    }

    /// Product of the listed generators.
    pub fn product(&self, indices: &[usize]) -> SpacetimePauli {
        let mut out = SpacetimePauli::identity(self.grid);
        for &k in indices {
            out.mul_assign(&self.generators[k]).unwrap();
        }
        out
    }

    /// Basis of the center of the gauge group (the spacetime stabilizers),
    /// each given with the generator indices that multiply to it.
    pub fn stabilizers(&self) -> Vec<(SpacetimePauli, Vec<usize>)> {
        let ind: Vec<&SpacetimePauli> = self.independent.iter().map(|&i| &self.generators[i]).collect();
        let rows: Vec<Bits> = ind
            .iter()
            .map(|a| Bits::from_indices(ind.len(), (0..ind.len()).filter(|&j| a.anticommutes(ind[j]))))
            .collect();
        left_null_space(&rows)
            .into_iter()
            .map(|c| {
                let idx: Vec<usize> = c.iter_ones().map(|k| self.independent[k]).collect();
                (self.product(&idx), idx)
            })
            .collect()
    }

    /// Stabilizers that act as detectors for observable validation.
    ///
    /// A stabilizer touching both the first and last layer, or both the
    /// first and last qubit, can be the readout of a logical (reset to final
    /// measurement in a memory, a full row of checks in a stability
    /// experiment), so only the subgroup generated by stabilizers avoiding
    /// one temporal end and one spatial end is returned.
    pub fn local_stabilizers(&self) -> Vec<(SpacetimePauli, Vec<usize>)> {
        let stabs = self.stabilizers();
        let g = self.grid;
        if g.layers == 0 || g.qubits == 0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for layer in [0, g.layers - 1] {
            for qubit in [0, g.qubits - 1] {
                let cols: Vec<SpacetimeCoord> = (0..g.sites())
                    .map(|i| g.coord(i))
                    .filter(|c| c.layer == layer || c.qubit == qubit)
                    .collect();
                let rows: Vec<Bits> = stabs
                    .iter()
                    .map(|(s, _)| {
                        let x = Bits::from_indices(cols.len(), (0..cols.len()).filter(|&k| s.get(cols[k]).has_x()));
                        let z = Bits::from_indices(cols.len(), (0..cols.len()).filter(|&k| s.get(cols[k]).has_z()));
                        x.concat(&z)
                    })
                    .collect();
                for combo in left_null_space(&rows) {
                    let mut p = SpacetimePauli::identity(g);
                    let mut gens = Bits::zeros(self.len());
                    for k in combo.iter_ones() {
                        p.mul_assign(&stabs[k].0).unwrap();
                        for &i in &stabs[k].1 {
                            gens.flip(i);
                        }
                    }
                    out.push((p, gens.iter_ones().collect()));
                }
            }
        }
        out
    }

    /// Checks that each observable fires no detector, lies outside the
    /// gauge group and is independent of the others modulo gauge.
    pub fn check_observables(&self, observables: &[ObservableDecl]) -> Vec<ObservableIssue> {
        let stabs = self.local_stabilizers();
        let mut issues = Vec::new();
        let mut elim = self.eliminator(observables.len());
        let base = self.rank();
        for (oi, o) in observables.iter().enumerate() {
            if o.representative.grid() != self.grid {
                issues.push(ObservableIssue::WrongGrid { name: o.name.clone() });
                continue;
            }
            for (s, gens) in &stabs {
                if s.anticommutes(&o.representative) {
                    issues.push(ObservableIssue::Detectable {
                        name: o.name.clone(),
                        stabilizer: s.to_string(),
                        generators: gens.iter().map(|&k| self.origins[k].clone()).collect(),
                    });
                    break;
                }
            }
            match elim.insert(&o.representative.symplectic()) {
                Reduction::Independent => {}
                Reduction::Dependent(sub) => {
                    let others: Vec<String> = sub
                        .iter()
                        .filter(|&&k| k >= base)
                        .map(|&k| observables[k - base].name.clone())
                        .collect();
                    if others.is_empty() {
                        let gens = sub.iter().map(|&k| self.origins[self.independent[k]].clone()).collect();
                        issues.push(ObservableIssue::InGaugeGroup {
                            name: o.name.clone(),
                            generators: gens,
                        });
                    } else {
                        issues.push(ObservableIssue::Dependent {
                            name: o.name.clone(),
                            others,
                        });
                    }
                }
            }
            let _ = oi;
        }
        issues
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ObservableIssue {
    WrongGrid { name: String },
    /// Anticommutes with a spacetime stabilizer, i.e. fires a detector.
    Detectable { name: String, stabilizer: String, generators: Vec<String> },
    /// Equals a product of gauge generators.
    InGaugeGroup { name: String, generators: Vec<String> },
    /// Equals another declared observable up to gauge.
    Dependent { name: String, others: Vec<String> },
}

impl std::fmt::Display for ObservableIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObservableIssue::WrongGrid { name } => write!(f, "observable `{name}` is on the wrong grid"),
            ObservableIssue::Detectable { name, stabilizer, generators } => write!(
                f,
                "observable `{name}` anticommutes with stabilizer {stabilizer} (product of {})",
                generators.join(", ")
            ),
            ObservableIssue::InGaugeGroup { name, generators } => {
                write!(f, "observable `{name}` is the gauge element {}", generators.join(" * "))
            }
            ObservableIssue::Dependent { name, others } => {
                write!(f, "observable `{name}` is gauge-equivalent to a product of {}", others.join(", "))
            }
        }
    }
}

/// Validates structure and observable declarations of a circuit.
pub fn validate(circuit: &Circuit) -> Vec<String> {
    let mut out = circuit.structural_violations();
    if out.is_empty() && !circuit.observables().is_empty() {
        let basis = GaugeBasis::from_circuit(circuit, false);
        out.extend(basis.check_observables(circuit.observables()).iter().map(|i| i.to_string()));
    }
    out
}

/// Spin-index subsets whose joint flip leaves every interaction invariant.
/// Empty for a fully reduced basis.
pub fn find_gauge_symmetries(basis: &GaugeBasis) -> Vec<Vec<usize>> {
    basis.redundancies.clone()
}

/// Pushes a single-layer Pauli forward through the circuit to `to_layer`.
///
/// Unitaries conjugate it; measurements let commuting parts through and
/// block anticommuting ones; any support on a reset qubit blocks.
pub fn propagate(p: &SpacetimePauli, circuit: &Circuit, to_layer: usize) -> Result<SpacetimePauli, SpacetimeError> {
    let grid = circuit.grid();
    let mut layers: Vec<usize> = p.support().iter().map(|c| c.layer).collect();
    layers.dedup();
    let from = match layers.as_slice() {
        [] => return Ok(SpacetimePauli::identity(grid)),
        [l] => *l,
        _ => return Err(SpacetimeError::NotSingleLayer),
    };
    if to_layer < from {
        return Err(SpacetimeError::Backwards { from, to: to_layer });
    }
    let mut cur: Vec<Pauli> = (0..grid.qubits).map(|q| p.get(SpacetimeCoord::new(q, from))).collect();
    for t in from + 1..=to_layer {
        for op in circuit.ops_at(t) {
            let local: Vec<Pauli> = op.qubits.iter().map(|&q| cur[q]).collect();
            if local.iter().all(|&x| x == Pauli::I) {
                continue;
            }
            let image = match op.kind {
                OpKind::Unitary(g) => g.conjugate(&local),
                OpKind::Measure(_) => {
                    let m = op.measured_pauli().unwrap();
                    let anti = local.iter().zip(&m).filter(|(a, b)| a.anticommutes(**b)).count() % 2 == 1;
                    if anti {
                        return Err(SpacetimeError::Blocked { t, op: op.to_string() });
                    }
                    local
                }
                OpKind::Reset(_) => return Err(SpacetimeError::Blocked { t, op: op.to_string() }),
            };
            for (&q, im) in op.qubits.iter().zip(image) {
                cur[q] = im;
            }
        }
    }
    Ok(SpacetimePauli::from_sites(
        grid,
        cur.into_iter()
            .enumerate()
            .map(|(q, x)| (SpacetimeCoord::new(q, to_layer), x)),
    )
    .expect("layer inside grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{builtin, parse, BuiltinParams};

    fn st(c: &Circuit, s: &str) -> SpacetimePauli {
        SpacetimePauli::parse_tokens(c.grid(), s).unwrap()
    }

    #[test]
    fn idle_emits_two_propagators() {
        let c = parse("QUBITS 1\nTICK\nTICK\n").unwrap();
        let g = build_gauge_generators(&c);
        let ps: Vec<String> = g.iter().map(|g| g.pauli.to_string()).collect();
        assert!(ps.contains(&"X 0@0.5 X 0@1.5".to_string()));
        assert!(ps.contains(&"Z 0@0.5 Z 0@1.5".to_string()));
    }

    #[test]
    fn cx_propagator() {
        let c = parse("QUBITS 2\nTICK\nCX 0 1\nTICK\n").unwrap();
        let g = build_gauge_generators(&c);
        let want = st(&c, "X 0@0.5 X 0@1.5 X 1@1.5");
        assert!(g.iter().any(|g| g.pauli == want));
    }

    #[test]
    fn mzz_reduces_to_four() {
        let c = parse("QUBITS 2\nTICK\nM ZZ 0 1\nTICK\n").unwrap();
        let cands: Vec<Generator> = build_gauge_generators(&c)
            .into_iter()
            .filter(|g| g.origin.contains("M ZZ"))
            .collect();
        assert_eq!(cands.len(), 5);
        let basis = reduce_to_basis(c.grid(), &cands, false);
        assert_eq!(basis.len(), 4);
        let xx = basis.generators().iter().filter(|g| g.is_pure_x()).count();
        assert_eq!(xx, 1);
        assert_eq!(basis.generators().iter().find(|g| g.is_pure_x()).unwrap().weight(), 4);
        assert!(basis.generators().iter().filter(|g| g.is_pure_z()).all(|g| g.weight() == 2));
        assert_eq!(basis.candidate_redundancies(), &[vec![0, 1, 2, 3]]);
        assert!(find_gauge_symmetries(&basis).is_empty());
        let over = reduce_to_basis(c.grid(), &cands, true);
        assert_eq!(over.len(), 5);
        assert_eq!(find_gauge_symmetries(&over), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn independent_set_unchanged() {
        let c = parse("QUBITS 1\nTICK\nTICK\n").unwrap();
        let cands: Vec<Generator> = build_gauge_generators(&c)
            .into_iter()
            .filter(|g| g.origin.contains("@t=1"))
            .collect();
        assert_eq!(cands.len(), 2);
        let b = reduce_to_basis(c.grid(), &cands, false);
        assert_eq!(b.len(), cands.len());
        assert!(b.candidate_redundancies().is_empty());
    }

    #[test]
    fn propagate_examples() {
        let c = parse("QUBITS 2\nTICK\nCX 0 1\nTICK\nM Z 0\nTICK\n").unwrap();
        let x = st(&c, "X 0@0.5");
        assert_eq!(propagate(&x, &c, 1).unwrap(), st(&c, "X 0@1.5 X 1@1.5"));
        assert!(matches!(propagate(&x, &c, 2), Err(SpacetimeError::Blocked { t: 2, .. })));
        let z = st(&c, "Z 0@1.5");
        assert_eq!(propagate(&z, &c, 2).unwrap(), st(&c, "Z 0@2.5"));
    }

    #[test]
    fn observable_checks() {
        let c = builtin("rep_memory", &BuiltinParams::new(3)).unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let good = c.observable("X").unwrap().clone();
        assert!(b.check_observables(std::slice::from_ref(&good)).is_empty());
        let gauge = ObservableDecl {
            name: "z".into(),
            representative: st(&c, "Z 0@0.5"),
        };
        assert!(matches!(b.check_observables(&[gauge])[0], ObservableIssue::InGaugeGroup { .. }));
        let dup = ObservableDecl {
            name: "x2".into(),
            representative: st(&c, "X 0@1.5 X 1@1.5 X 2@1.5"),
        };
        assert!(matches!(b.check_observables(&[good, dup])[0], ObservableIssue::Dependent { .. }));
    }

    #[test]
    fn detectable_observable_named() {
        let c = builtin("rep_memory", &BuiltinParams::new(3)).unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let o = ObservableDecl {
            name: "bad".into(),
            representative: st(&c, "X 1@3.5"),
        };
        let issues = b.check_observables(&[o]);
        assert!(matches!(&issues[0], ObservableIssue::Detectable { name, .. } if name == "bad"));
        assert!(issues[0].to_string().contains("M ZZ"));
    }

    #[test]
    fn builtin_observables_validate() {
        for name in ["rep_memory", "rep_stability", "rep_standard", "rep_wiggling", "rep_cnot"] {
            for d in [2, 3] {
                let c = builtin(name, &BuiltinParams::new(d)).unwrap();
                assert_eq!(validate(&c), Vec::<String>::new(), "{name} d={d}");
            }
        }
    }
}
