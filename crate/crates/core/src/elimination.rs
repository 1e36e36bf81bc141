//! Exact partition functions by variable elimination.
//!
//! Spins are summed out one at a time in a greedy min-fill order. The plan
//! (order and factor scopes) depends only on the model's structure, so it
//! is built once and reused for every disorder realization. Tables are kept
//! in log space; cost is `O(spins · 2^width)`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::spinmodel::{ln_add_exp, SpinModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EliminationError {
    #[error("elimination width {width} exceeds the limit {limit}")]
    TooWide { width: usize, limit: usize },
    #[error("expected {expected} signs, got {got}")]
    SizeMismatch { expected: usize, got: usize },
}

/// Default largest factor scope.
pub const MAX_WIDTH: usize = 22;

#[derive(Clone, Debug)]
struct Step {
    inputs: Vec<usize>,
    /// Positions of each input's variables inside `scope`.
    positions: Vec<Vec<u8>>,
    /// Union scope; the eliminated spin sits at `pivot`.
    scope_len: usize,
    pivot: usize,
    /// Per input, its table index for every union assignment; empty above
    /// [`INDEX_WIDTH`], where indices are gathered on the fly.
    index: Vec<Vec<u32>>,
}

/// Widest step whose index maps are precomputed.
const INDEX_WIDTH: usize = 18;

/// Reusable elimination schedule for one model structure.
#[derive(Clone, Debug)]
pub struct EliminationPlan {
    num_interactions: usize,
    /// Factor scopes: one per interaction, then one per step output.
    initial_scopes: Vec<Vec<usize>>,
    steps: Vec<Step>,
    /// Factors never consumed; their scopes are empty at the end.
    leftovers: Vec<usize>,
    free_spins: usize,
    width: usize,
    constant: f64,
}

fn gather(a: usize, pos: &[u8]) -> usize {
    pos.iter().enumerate().fold(0, |idx, (j, &p)| idx | ((a >> p) & 1) << j)
}

impl EliminationPlan {
    pub fn new(model: &SpinModel, max_width: usize) -> Result<Self, EliminationError> {
        let m = model.num_spins();
        let mut scopes: Vec<Vec<usize>> = model.interactions().iter().map(|it| it.spins.clone()).collect();
        let initial_scopes = scopes.clone();
        let mut alive: Vec<bool> = vec![true; scopes.len()];
        let mut touching: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
        for (f, s) in scopes.iter().enumerate() {
            for &v in s {
                touching[v].insert(f);
            }
        }
        let free_spins = touching.iter().filter(|t| t.is_empty()).count();
        let mut remaining: BTreeSet<usize> = (0..m).filter(|&v| !touching[v].is_empty()).collect();
        let mut neighbours: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
        for s in &scopes {
            for &a in s {
                for &b in s {
                    if a != b {
                        neighbours[a].insert(b);
                    }
                }
            }
        }
        let mut steps = Vec::new();
        let mut width = 0;
        while !remaining.is_empty() {
            // Min-fill, ties by degree then index.
            let v = *remaining
                .iter()
                .min_by_key(|&&v| {
                    let nb: Vec<usize> = neighbours[v].iter().copied().collect();
                    let mut fill = 0usize;
                    for i in 0..nb.len() {
                        for j in i + 1..nb.len() {
                            if !neighbours[nb[i]].contains(&nb[j]) {
                                fill += 1;
                            }
                        }
                    }
                    (fill, nb.len(), v)
                })
                .unwrap();
            let inputs: Vec<usize> = touching[v].iter().copied().collect();
            let mut union: BTreeSet<usize> = BTreeSet::new();
            for &f in &inputs {
                union.extend(scopes[f].iter().copied());
            }
            let scope: Vec<usize> = union.into_iter().collect();
            width = width.max(scope.len());
            if scope.len() > max_width {
                return Err(EliminationError::TooWide {
                    width: scope.len(),
                    limit: max_width,
                });
            }
            let positions: Vec<Vec<u8>> = inputs
                .iter()
                .map(|&f| scopes[f].iter().map(|x| scope.binary_search(x).unwrap() as u8).collect())
                .collect();
            let index = if scope.len() <= INDEX_WIDTH {
                positions
                    .iter()
                    .map(|pos| (0..1usize << scope.len()).map(|a| gather(a, pos) as u32).collect())
                    .collect()
            } else {
                Vec::new()
            };
            let pivot = scope.binary_search(&v).unwrap();
            let out_scope: Vec<usize> = scope.iter().copied().filter(|&x| x != v).collect();
            let out = scopes.len();
            for &f in &inputs {
                alive[f] = false;
                for &x in &scopes[f] {
                    touching[x].remove(&f);
                }
            }
            for &x in &out_scope {
                touching[x].insert(out);
            }
            for &a in &out_scope {
                neighbours[a].remove(&v);
                for &b in &out_scope {
                    if a != b {
                        neighbours[a].insert(b);
                    }
                }
            }
            scopes.push(out_scope);
            alive.push(true);
            steps.push(Step {
                inputs,
                positions,
                scope_len: scope.len(),
                pivot,
                index,
            });
            remaining.remove(&v);
        }
        let leftovers = (0..scopes.len()).filter(|&f| alive[f]).collect();
        Ok(EliminationPlan {
            num_interactions: model.interactions().len(),
            initial_scopes,
            steps,
            leftovers,
            free_spins,
            width,
            constant: model.constant(),
        })
    }

    /// Largest factor scope encountered.
    pub fn width(&self) -> usize {
        self.width
    }

    /// `ln Z` at signs `eta`, identical to the exhaustive sum.
    pub fn log_partition(&self, model: &SpinModel, eta: &[i8]) -> Result<f64, EliminationError> {
        if eta.len() != self.num_interactions {
            return Err(EliminationError::SizeMismatch {
                expected: self.num_interactions,
                got: eta.len(),
            });
        }
        // Linear tables with a log scale each are several times faster;
        // fall back to log space if a table underflows entirely.
        Ok(self.linear(model, eta).unwrap_or_else(|| self.logarithmic(model, eta)))
    }

    fn initial_table(&self, model: &SpinModel, eta: &[i8], c: usize) -> Vec<f64> {
        let lw = model.interactions()[c].log_weights;
        let flip = eta[c] < 0;
        (0..1usize << self.initial_scopes[c].len())
            .map(|a| {
                // Bit set = spin −1.
                let odd = (a.count_ones() % 2 == 1) != flip;
                lw[usize::from(odd)]
            })
            .collect()
    }

    fn linear(&self, model: &SpinModel, eta: &[i8]) -> Option<f64> {
        let mut tables: Vec<Option<(f64, Vec<f64>)>> = (0..self.num_interactions)
            .map(|c| {
                let logs = self.initial_table(model, eta, c);
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Some((top, logs.iter().map(|&l| (l - top).exp()).collect()))
            })
            .collect();
        if tables.iter().any(|t| !t.as_ref().unwrap().0.is_finite()) {
            return None;
        }
        for step in &self.steps {
            let inputs: Vec<(f64, Vec<f64>)> =
                step.inputs.iter().map(|&f| tables[f].take().expect("factor consumed once")).collect();
            let low = (1usize << step.pivot) - 1;
            let out_len = 1usize << (step.scope_len - 1);
            let mut out = Vec::with_capacity(out_len);
            let mut top: f64 = 0.0;
            for b in 0..out_len {
                let a0 = (b & low) | ((b & !low) << 1);
                let a1 = a0 | (1 << step.pivot);
                let (mut p0, mut p1) = (1.0, 1.0);
                if step.index.is_empty() {
                    for ((_, t), pos) in inputs.iter().zip(&step.positions) {
                        p0 *= t[gather(a0, pos)];
                        p1 *= t[gather(a1, pos)];
                    }
                } else {
                    for ((_, t), idx) in inputs.iter().zip(&step.index) {
                        p0 *= t[idx[a0] as usize];
                        p1 *= t[idx[a1] as usize];
                    }
                }
                let v = p0 + p1;
                top = top.max(v);
                out.push(v);
            }
            if !(top > f64::MIN_POSITIVE) {
                return None;
            }
            for v in &mut out {
                *v /= top;
            }
            let scale = inputs.iter().map(|t| t.0).sum::<f64>() + top.ln();
            tables.push(Some((scale, out)));
        }
        let mut total = self.constant + self.free_spins as f64 * std::f64::consts::LN_2;
        for &f in &self.leftovers {
            let (scale, t) = tables[f].as_ref().expect("leftover factor present");
            total += scale + t[0].ln();
        }
        Some(total)
    }

    fn logarithmic(&self, model: &SpinModel, eta: &[i8]) -> f64 {
        let mut tables: Vec<Option<Vec<f64>>> =
            (0..self.num_interactions).map(|c| Some(self.initial_table(model, eta, c))).collect();
        for step in &self.steps {
            let inputs: Vec<Vec<f64>> = step.inputs.iter().map(|&f| tables[f].take().expect("factor consumed once")).collect();
            let low = (1usize << step.pivot) - 1;
            let out_len = 1usize << (step.scope_len - 1);
            let mut out = Vec::with_capacity(out_len);
            for b in 0..out_len {
                let a0 = (b & low) | ((b & !low) << 1);
                let a1 = a0 | (1 << step.pivot);
                let mut s0 = 0.0;
                let mut s1 = 0.0;
                for (t, pos) in inputs.iter().zip(&step.positions) {
                    s0 += t[gather(a0, pos)];
                    s1 += t[gather(a1, pos)];
                }
                out.push(ln_add_exp(s0, s1));
            }
            tables.push(Some(out));
        }
        let mut total = self.constant + self.free_spins as f64 * std::f64::consts::LN_2;
        for &f in &self.leftovers {
            let t = tables[f].as_ref().expect("leftover factor present");
            debug_assert_eq!(t.len(), 1);
            total += t[0];
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{builtin, BuiltinParams};
    use crate::disorder::{sample_error, signs_from_error};
    use crate::oracle::exact_partition;
    use crate::spacetime::GaugeBasis;
    use crate::spinmodel::{build_hamiltonian, simplify, NoiseChannel};

    #[test]
    fn matches_exhaustive_sum() {
        for (name, d) in [("rep_memory", 3), ("rep_standard", 2), ("rep_stability", 3)] {
            let c = builtin(name, &BuiltinParams::new(d)).unwrap();
            let b = GaugeBasis::from_circuit(&c, false);
            let ch = NoiseChannel::independent(0.12, 0.0);
            for model in [simplify(&build_hamiltonian(&b, &ch).unwrap()).x_part().unwrap()] {
                if model.num_spins() > 22 {
                    continue;
                }
                let plan = EliminationPlan::new(&model, MAX_WIDTH).unwrap();
                for r in 0..5 {
                    let e = sample_error(c.grid(), &ch, 9, r);
                    let eta = signs_from_error(&model, &e).unwrap().eta;
                    let a = plan.log_partition(&model, &eta).unwrap();
                    let x = exact_partition(&model, &eta).unwrap();
                    assert!((a - x).abs() < 1e-10, "{name}: {a} vs {x}");
                }
            }
        }
    }

    #[test]
    fn hard_constraints_and_free_spins() {
        let c = builtin("rep_memory", &BuiltinParams::new(2).with_duration(3)).unwrap();
        let b = GaugeBasis::from_circuit(&c, true);
        let ch = NoiseChannel::independent(0.1, 0.0);
        let model = build_hamiltonian(&b, &ch).unwrap();
        let plan = EliminationPlan::new(&model, MAX_WIDTH).unwrap();
        let e = sample_error(c.grid(), &ch, 1, 3);
        let eta = signs_from_error(&model, &e).unwrap().eta;
        let a = plan.log_partition(&model, &eta).unwrap();
        let x = exact_partition(&model, &eta).unwrap();
        assert!((a - x).abs() < 1e-10);
    }

    #[test]
    fn linear_and_log_paths_agree() {
        let c = builtin("rep_cnot", &BuiltinParams::new(3)).unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        for p in [0.3, 0.03, 1e-4] {
            let ch = NoiseChannel::independent(p, 0.0);
            let model = simplify(&build_hamiltonian(&b, &ch).unwrap()).x_part().unwrap();
            let plan = EliminationPlan::new(&model, MAX_WIDTH).unwrap();
            for r in 0..5 {
                let e = sample_error(c.grid(), &NoiseChannel::independent(0.2, 0.0), 4, r);
                let eta = signs_from_error(&model, &e).unwrap().eta;
                let fast = plan.linear(&model, &eta).unwrap();
                let slow = plan.logarithmic(&model, &eta);
                assert!((fast - slow).abs() < 1e-9 * slow.abs().max(1.0), "p={p}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn width_limit() {
        let c = builtin("rep_memory", &BuiltinParams::new(5)).unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let model = build_hamiltonian(&b, &NoiseChannel::independent(0.1, 0.0)).unwrap();
        assert!(matches!(EliminationPlan::new(&model, 1), Err(EliminationError::TooWide { .. })));
    }
}
