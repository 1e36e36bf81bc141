//! Disordered spin Hamiltonians compiled from a gauge basis.
//!
//! Every gauge generator gets one Ising spin. Every error location (error
//! flavor at a spacetime qubit) gets one interaction over the spins whose
//! generators flip that flavor there. At fixed signs `η` the Boltzmann sum
//! over spins is the probability of the error coset that produced `η`.
//!
//! Interactions store their two Boltzmann weights in log form,
//! `[ln w(+1), ln w(−1)]` indexed by whether `η·Πσ` is aligned. The coupling
//! is `K = ½(ln w(+1) − ln w(−1))`; a zero weight gives an infinite coupling,
//! i.e. a hard constraint.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::pauli::{Grid, Pauli, SpacetimeCoord};
use crate::spacetime::GaugeBasis;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinModelError {
    #[error("invalid noise channel: {0}")]
    InvalidChannel(String),
    #[error("channel assigns zero probability to {0}")]
    DegenerateChannel(Pauli),
    #[error("cannot integrate out a spin in {0} interactions")]
    UnsupportedDegree(usize),
    #[error("expected {expected} entries, got {got}")]
    SizeMismatch { expected: usize, got: usize },
}

/// Single-qubit Pauli channel applied independently at every spacetime qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseChannel {
    General { i: f64, x: f64, y: f64, z: f64 },
    IndependentXZ { px: f64, pz: f64 },
}

impl NoiseChannel {
    pub fn independent(px: f64, pz: f64) -> Self {
        NoiseChannel::IndependentXZ { px, pz }
    }

    pub fn validate(&self) -> Result<(), SpinModelError> {
        match *self {
            NoiseChannel::General { i, x, y, z } => {
                let ps = [i, x, y, z];
                if ps.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(SpinModelError::InvalidChannel(format!("negative probability in {ps:?}")));
                }
                let s: f64 = ps.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(SpinModelError::InvalidChannel(format!("probabilities sum to {s}")));
                }
            }
            NoiseChannel::IndependentXZ { px, pz } => {
                if !(0.0..=1.0).contains(&px) || !(0.0..=1.0).contains(&pz) {
                    return Err(SpinModelError::InvalidChannel(format!("pX={px}, pZ={pz} outside [0,1]")));
                }
            }
        }
        Ok(())
    }

    /// `[ℙ(I), ℙ(X), ℙ(Y), ℙ(Z)]`.
    pub fn probabilities(&self) -> [f64; 4] {
        match *self {
            NoiseChannel::General { i, x, y, z } => [i, x, y, z],
            NoiseChannel::IndependentXZ { px, pz } => {
                [(1.0 - px) * (1.0 - pz), px * (1.0 - pz), px * pz, (1.0 - px) * pz]
            }
        }
    }

    pub fn prob(&self, p: Pauli) -> f64 {
        self.probabilities()[pauli_slot(p)]
    }

    /// `ln ℙ(p)`, computed factor by factor for the independent channel.
    pub fn ln_prob(&self, p: Pauli) -> f64 {
        match *self {
            NoiseChannel::General { .. } => self.prob(p).ln(),
            NoiseChannel::IndependentXZ { px, pz } => {
                let fx = if p.has_x() { px.ln() } else { (-px).ln_1p() };
                let fz = if p.has_z() { pz.ln() } else { (-pz).ln_1p() };
                fx + fz
            }
        }
    }

    /// `(pX, pZ)` for the independent channel.
    pub fn flavor_probabilities(&self) -> Option<(f64, f64)> {
        match *self {
            NoiseChannel::IndependentXZ { px, pz } => Some((px, pz)),
            NoiseChannel::General { .. } => None,
        }
    }
}

fn pauli_slot(p: Pauli) -> usize {
    match p {
        Pauli::I => 0,
        Pauli::X => 1,
        Pauli::Y => 2,
        Pauli::Z => 3,
    }
}

/// Nishimori couplings `K(α) = ¼ Σ_Q ln ℙ(Q)·⟦α,Q⟧`, indexed I, X, Y, Z.
///
/// `K(I)` is the per-site constant offset.
pub fn nishimori_couplings(channel: &NoiseChannel) -> Result<[f64; 4], SpinModelError> {
    channel.validate()?;
    let all = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let mut ln = [0.0; 4];
    for q in all {
        if channel.prob(q) <= 0.0 {
            return Err(SpinModelError::DegenerateChannel(q));
        }
        ln[pauli_slot(q)] = channel.ln_prob(q);
    }
    let mut k = [0.0; 4];
    for a in all {
        k[pauli_slot(a)] = 0.25
            * all
                .iter()
                .map(|&q| if a.anticommutes(q) { -ln[pauli_slot(q)] } else { ln[pauli_slot(q)] })
                .sum::<f64>();
    }
    Ok(k)
}

/// `½[1 − (1−2pX)^x (1−2pZ)^z]`: probability of an odd number of errors
/// among `x` X-locations and `z` Z-locations.
pub fn effective_probability(x: usize, z: usize, px: f64, pz: f64) -> f64 {
    0.5 * (1.0 - parity_bias(x, z, px, pz))
}

fn parity_bias(x: usize, z: usize, px: f64, pz: f64) -> f64 {
    (1.0 - 2.0 * px).powi(x as i32) * (1.0 - 2.0 * pz).powi(z as i32)
}

/// `½ ln((1−p_eff)/p_eff)`; `±∞` when `p_eff` is 0 or 1.
pub fn effective_coupling(x: usize, z: usize, px: f64, pz: f64) -> f64 {
    atanh(parity_bias(x, z, px, pz))
}

/// `atanh` with exact infinities at `±1`.
fn atanh(r: f64) -> f64 {
    if r >= 1.0 {
        f64::INFINITY
    } else if r <= -1.0 {
        f64::NEG_INFINITY
    } else {
        r.atanh()
    }
}

/// `ln cosh x` without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// `ln(e^a + e^b)`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Integrates out one spin that appears in the interactions with couplings
/// `ks`. One interaction disappears; two merge into one with coupling
/// `½ ln[cosh(K1+K2)/cosh(K1−K2)]`.
pub fn walsh_integrate(ks: &[f64]) -> Result<Option<f64>, SpinModelError> {
    match *ks {
        [_] => Ok(None),
        [k1, k2] => {
            if k1.is_infinite() {
                return Ok(Some(k1.signum() * k2));
            }
            if k2.is_infinite() {
                return Ok(Some(k2.signum() * k1));
            }
            Ok(Some(0.5 * (ln_cosh(k1 + k2) - ln_cosh(k1 - k2))))
        }
        _ => Err(SpinModelError::UnsupportedDegree(ks.len())),
    }
}

/// An error flavor at a spacetime qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub flavor: Pauli,
    pub coord: SpacetimeCoord,
}

impl Location {
    /// Pauli whose commutation with an operator detects this flavor.
    pub fn check_pauli(&self) -> Pauli {
        match self.flavor {
            Pauli::Y => Pauli::Y,
            f => f.opposite(),
        }
    }
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.flavor, self.coord)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Interaction {
    /// Sorted spin indices.
    pub spins: Vec<usize>,
    pub members: Vec<Location>,
    /// `(w_X, w_Z)`: X- and Z-flavored member counts.
    pub weights: (usize, usize),
    /// `[ln w(aligned), ln w(anti-aligned)]`.
    pub log_weights: [f64; 2],
    pub sign_slot: usize,
}

impl Interaction {
    pub fn coupling(&self) -> f64 {
        let [a, b] = self.log_weights;
        match (a == f64::NEG_INFINITY, b == f64::NEG_INFINITY) {
            (false, true) => f64::INFINITY,
            (true, false) => f64::NEG_INFINITY,
            _ => 0.5 * (a - b),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn is_hard(&self) -> bool {
        self.coupling().is_infinite()
    }

    /// `ln w` for `η·Πσ = +1` (`aligned`) or `−1`.
    pub fn log_weight(&self, aligned: bool) -> f64 {
        self.log_weights[usize::from(!aligned)]
    }

    pub fn weight(&self) -> usize {
        self.members.len()
    }
}

/// Interaction and spin lists of the two halves of a CSS model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CssSplit {
    pub x_interactions: Vec<usize>,
    pub z_interactions: Vec<usize>,
    pub x_spins: Vec<usize>,
    pub z_spins: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SpinModel {
    grid: Grid,
    num_spins: usize,
    interactions: Vec<Interaction>,
    /// Additive constant of `ln Z` independent of `η`.
    constant: f64,
    channel: NoiseChannel,
    css_split: Option<CssSplit>,
    location_index: HashMap<Location, usize>,
    /// Generator index behind each spin.
    spin_generators: Vec<usize>,
    /// Spin subsets whose joint flip leaves every interaction invariant.
    symmetries: Vec<Vec<usize>>,
    simplified: bool,
}

impl SpinModel {
    fn assemble(
        grid: Grid,
        num_spins: usize,
        mut interactions: Vec<Interaction>,
        constant: f64,
        channel: NoiseChannel,
        spin_generators: Vec<usize>,
        symmetries: Vec<Vec<usize>>,
        simplified: bool,
    ) -> SpinModel {
        let mut location_index = HashMap::new();
        for (i, it) in interactions.iter_mut().enumerate() {
            it.sign_slot = i;
            for m in &it.members {
                location_index.insert(*m, i);
            }
        }
        let css_split = css_split(&interactions, num_spins);
        SpinModel {
            grid,
            num_spins,
            interactions,
            constant,
            channel,
            css_split,
            location_index,
            spin_generators,
            symmetries,
            simplified,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn channel(&self) -> &NoiseChannel {
        &self.channel
    }

    pub fn css_split(&self) -> Option<&CssSplit> {
        self.css_split.as_ref()
    }

    pub fn is_simplified(&self) -> bool {
        self.simplified
    }

    pub fn spin_generators(&self) -> &[usize] {
        &self.spin_generators
    }

    pub fn symmetries(&self) -> &[Vec<usize>] {
        &self.symmetries
    }

    /// Interaction owning a location, if it was not integrated away.
    pub fn interaction_at(&self, loc: Location) -> Option<usize> {
        self.location_index.get(&loc).copied()
    }

    /// Interactions with an empty spin set. Their weight depends only on
    /// `η`, so Monte Carlo leaves them out and adds them back exactly.
    pub fn constant_interactions(&self) -> Vec<usize> {
        (0..self.interactions.len()).filter(|&i| self.interactions[i].is_constant()).collect()
    }

    /// Spin → indices of the interactions containing it.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_spins];
        for (i, it) in self.interactions.iter().enumerate() {
            for &s in &it.spins {
                adj[s].push(i);
            }
        }
        adj
    }

    fn check_sizes(&self, eta: &[i8], sigma: &[i8]) -> Result<(), SpinModelError> {
        if eta.len() != self.interactions.len() {
            return Err(SpinModelError::SizeMismatch {
                expected: self.interactions.len(),
                got: eta.len(),
            });
        }
        if sigma.len() != self.num_spins {
            return Err(SpinModelError::SizeMismatch {
                expected: self.num_spins,
                got: sigma.len(),
            });
        }
        Ok(())
    }

    /// `−Σ_c K_c η_c Π_{k∈Ξ_c} σ_k`. A hard constraint contributes 0 when
    /// satisfied and `+∞` when violated.
    pub fn energy(&self, eta: &[i8], sigma: &[i8]) -> Result<f64, SpinModelError> {
        self.check_sizes(eta, sigma)?;
        let mut e = 0.0;
        for (c, it) in self.interactions.iter().enumerate() {
            let prod = eta[c] * it.spins.iter().map(|&k| sigma[k]).product::<i8>();
            let k = it.coupling();
            if k.is_infinite() {
                if (prod > 0) != (k > 0.0) {
                    return Ok(f64::INFINITY);
                }
            } else {
                e -= k * f64::from(prod);
            }
        }
        Ok(e)
    }

    /// `ln` of the full Boltzmann weight of one configuration, including
    /// per-interaction offsets but not the model constant.
    pub fn log_weight(&self, eta: &[i8], sigma: &[i8]) -> Result<f64, SpinModelError> {
        self.check_sizes(eta, sigma)?;
        Ok(self
            .interactions
            .iter()
            .enumerate()
            .map(|(c, it)| {
                let prod = eta[c] * it.spins.iter().map(|&k| sigma[k]).product::<i8>();
                it.log_weight(prod > 0)
            })
            .sum())
    }

    /// Sub-model on a subset of interactions, spins renumbered in order of
    /// first use. The constant is dropped, so partition functions agree up
    /// to an `η`-independent factor.
    pub fn restrict(&self, keep: &[usize]) -> SpinModel {
        let mut map: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in keep {
            for &s in &self.interactions[c].spins {
                map.insert(s, 0);
            }
        }
        for (n, v) in map.values_mut().enumerate() {
            *v = n;
        }
        let interactions = keep
            .iter()
            .map(|&c| {
                let mut it = self.interactions[c].clone();
                it.spins = it.spins.iter().map(|s| map[s]).collect();
                it
            })
            .collect();
        let spin_generators = map.keys().map(|&s| self.spin_generators[s]).collect();
        let symmetries = self
            .symmetries
            .iter()
            .filter_map(|sym| {
                let inside: Vec<usize> = sym.iter().filter_map(|s| map.get(s).copied()).collect();
                (!inside.is_empty() && inside.len() == sym.len()).then_some(inside)
            })
            .collect();
        SpinModel::assemble(
            self.grid,
            map.len(),
            interactions,
            0.0,
            self.channel,
            spin_generators,
            symmetries,
            self.simplified,
        )
    }

    /// The X-flavored half of a CSS model, which alone decides free-energy
    /// differences between classes that differ by X-type observables.
    pub fn x_part(&self) -> Option<SpinModel> {
        self.css_split.as_ref().map(|s| self.restrict(&s.x_interactions))
    }

    pub fn z_part(&self) -> Option<SpinModel> {
        self.css_split.as_ref().map(|s| self.restrict(&s.z_interactions))
    }

    /// Line-oriented model file: a JSON header, then one JSON record per
    /// interaction.
    pub fn to_model_file(&self) -> String {
        let mut out = json!({
            "spins": self.num_spins,
            "interactions": self.interactions.len(),
            "css": self.css_split.is_some(),
            "simplified": self.simplified,
            "constant": self.constant,
            "channel": self.channel,
        })
        .to_string();
        out.push('\n');
        for it in &self.interactions {
            let members: Vec<String> = it.members.iter().map(|m| m.to_string()).collect();
            let rec = json!({
                "spins": it.spins,
                "K": finite_or_string(it.coupling()),
                "weights": [it.weights.0, it.weights.1],
                "members": members,
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out
    }

    /// Hypergraph export: spins as vertices, interactions as weighted
    /// hyperedges.
    pub fn graph_json(&self) -> serde_json::Value {
        let edges: Vec<_> = self
            .interactions
            .iter()
            .filter(|it| !it.is_constant())
            .map(|it| {
                json!({
                    "spins": it.spins,
                    "weight": it.weight(),
                    "K": finite_or_string(it.coupling()),
                })
            })
            .collect();
        json!({
            "vertices": (0..self.num_spins).map(|s| json!({"id": s, "generator": self.spin_generators[s]})).collect::<Vec<_>>(),
            "hyperedges": edges,
        })
    }
}

fn finite_or_string(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn css_split(interactions: &[Interaction], num_spins: usize) -> Option<CssSplit> {
    let mut side = vec![None; num_spins];
    let mut split = CssSplit {
        x_interactions: Vec::new(),
        z_interactions: Vec::new(),
        x_spins: Vec::new(),
        z_spins: Vec::new(),
    };
    for (c, it) in interactions.iter().enumerate() {
        let f = it.members.first().map(|m| m.flavor)?;
        if f == Pauli::Y || it.members.iter().any(|m| m.flavor != f) {
            return None;
        }
        for &s in &it.spins {
            match side[s] {
                None => side[s] = Some(f),
                Some(g) if g != f => return None,
                _ => {}
            }
        }
        if f == Pauli::X {
            split.x_interactions.push(c);
        } else {
            split.z_interactions.push(c);
        }
    }
    for (s, f) in side.iter().enumerate() {
        match f {
            Some(Pauli::X) => split.x_spins.push(s),
            Some(_) => split.z_spins.push(s),
            None => {}
        }
    }
    Some(split)
}

fn flavor_counts(members: &[Location]) -> (usize, usize) {
    let x = members.iter().filter(|m| m.flavor == Pauli::X).count();
    (x, members.len() - x)
}

/// One spin per generator and one interaction per error location.
///
/// Under the independent channel each spacetime qubit carries an X- and a
/// Z-flavored location with weights `(1−p, p)`. A general channel carries
/// three locations with Nishimori couplings and a per-site offset `K(I)`.
/// An overcomplete basis visits each group element `2^redundancy` times,
/// which the constant compensates.
pub fn build_hamiltonian(basis: &GaugeBasis, channel: &NoiseChannel) -> Result<SpinModel, SpinModelError> {
    channel.validate()?;
    let grid = basis.grid();
    let gens = basis.generators();
    let mut constant = -(basis.redundancy() as f64) * LN_2;
    let mut interactions = Vec::new();
    let mut flavors: Vec<(Pauli, [f64; 2])> = Vec::new();
    match channel.flavor_probabilities() {
        Some((px, pz)) => {
            flavors.push((Pauli::X, [(-px).ln_1p(), px.ln()]));
            flavors.push((Pauli::Z, [(-pz).ln_1p(), pz.ln()]));
        }
        None => {
            let k = nishimori_couplings(channel)?;
            constant += k[0] * grid.sites() as f64;
            for f in [Pauli::X, Pauli::Y, Pauli::Z] {
                let check = Location {
                    flavor: f,
                    coord: SpacetimeCoord::new(0, 0),
                }
                .check_pauli();
                let kc = k[pauli_slot(check)];
                flavors.push((f, [kc, -kc]));
            }
        }
    }
    for site in 0..grid.sites() {
        let coord = grid.coord(site);
        for &(flavor, lw) in &flavors {
            let loc = Location { flavor, coord };
            let check = loc.check_pauli();
            let spins = (0..gens.len()).filter(|&k| gens[k].get(coord).anticommutes(check)).collect();
            let members = vec![loc];
            interactions.push(Interaction {
                spins,
                weights: flavor_counts(&members),
                members,
                log_weights: lw,
                sign_slot: 0,
            });
        }
    }
    Ok(SpinModel::assemble(
        grid,
        gens.len(),
        interactions,
        constant,
        *channel,
        (0..gens.len()).collect(),
        basis.redundancies().to_vec(),
        false,
    ))
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Integrates out every spin in at most two interactions.
///
/// Interactions are the vertices of a graph; a spin in two interactions is
/// an edge, a spin in one marks its vertex deleted. Each connected component
/// without a deleted vertex becomes one interaction over the remaining spins
/// that occur an odd number of times in it, with parity-combined weights. A
/// component with a deleted vertex sums to a constant. Cycles leave free
/// spins, each worth a factor 2 in the constant.
///
/// Merging can cancel a spin that occurs twice in one component, lowering
/// its degree, so passes repeat until every spin sits in three or more
/// interactions.
pub fn simplify(model: &SpinModel) -> SpinModel {
    let mut m = simplify_pass(model);
    while m.adjacency().iter().any(|a| a.len() < 3) {
        m = simplify_pass(&m);
    }
    m
}

fn simplify_pass(model: &SpinModel) -> SpinModel {
    let adj = model.adjacency();
    let n = model.interactions.len();
    let mut uf = UnionFind((0..n).collect());
    let mut constant = model.constant;
    for a in adj.iter() {
        match a.len() {
            0 => constant += LN_2,
            2 => uf.union(a[0], a[1]),
            _ => {}
        }
    }
    let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for c in 0..n {
        let r = uf.find(c);
        comps.entry(r).or_default().push(c);
    }
    let mut removed_in = vec![0usize; n];
    let mut deleted = vec![false; n];
    for a in adj.iter() {
        match a.len() {
            1 => {
                let r = uf.find(a[0]);
                removed_in[r] += 1;
                deleted[r] = true;
            }
            2 => removed_in[uf.find(a[0])] += 1,
            _ => {}
        }
    }
    let kept: Vec<usize> = (0..model.num_spins).filter(|&s| adj[s].len() >= 3).collect();
    let mut renumber = vec![usize::MAX; model.num_spins];
    for (new, &s) in kept.iter().enumerate() {
        renumber[s] = new;
    }
    let mut interactions = Vec::new();
    for (root, verts) in &comps {
        let v = verts.len();
        let extra = removed_in[*root] as isize - (v as isize - 1 + isize::from(deleted[*root]));
        debug_assert!(extra >= 0);
        constant += extra as f64 * LN_2;
        // ln Σ_v (w+ + w−) and Π_v (w+ − w−)/(w+ + w−).
        let mut ln_total = 0.0;
        let mut bias = 1.0;
        for &c in verts {
            let it = &model.interactions[c];
            ln_total += ln_add_exp(it.log_weights[0], it.log_weights[1]);
            bias *= it.coupling().tanh();
        }
        if deleted[*root] {
            constant += ln_total;
            continue;
        }
        let mut odd: BTreeMap<usize, bool> = BTreeMap::new();
        let mut members = Vec::new();
        for &c in verts {
            let it = &model.interactions[c];
            members.extend_from_slice(&it.members);
            for &s in &it.spins {
                if renumber[s] != usize::MAX {
                    *odd.entry(renumber[s]).or_insert(false) ^= true;
                }
            }
        }
        let spins = odd.into_iter().filter(|&(_, o)| o).map(|(s, _)| s).collect();
        interactions.push(Interaction {
            spins,
            weights: flavor_counts(&members),
            members,
            log_weights: [ln_total + bias.ln_1p() - LN_2, ln_total + (-bias).ln_1p() - LN_2],
            sign_slot: 0,
        });
    }
    let symmetries = model
        .symmetries
        .iter()
        .map(|sym| {
            let mut s: Vec<usize> = sym.iter().filter(|&&k| renumber[k] != usize::MAX).map(|&k| renumber[k]).collect();
            s.sort_unstable();
            s
        })
        .filter(|s| !s.is_empty())
        .collect();
    SpinModel::assemble(
        model.grid,
        kept.len(),
        interactions,
        constant,
        model.channel,
        kept.iter().map(|&s| model.spin_generators[s]).collect(),
        symmetries,
        true,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{builtin, parse, BuiltinParams};
    use approx::assert_relative_eq;

    #[test]
    fn nishimori_examples() {
        let k = nishimori_couplings(&NoiseChannel::independent(0.1, 0.1)).unwrap();
        assert_relative_eq!(k[3], 0.5 * 9f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(k[2], 0.0, epsilon = 1e-12);
        let k = nishimori_couplings(&NoiseChannel::independent(0.5, 0.5)).unwrap();
        assert_relative_eq!(k[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(k[3], 0.0, epsilon = 1e-12);
        let u = NoiseChannel::General {
            i: 0.25,
            x: 0.25,
            y: 0.25,
            z: 0.25,
        };
        let k = nishimori_couplings(&u).unwrap();
        assert!(k[1..].iter().all(|v| v.abs() < 1e-12));
        let pure = NoiseChannel::independent(0.1, 0.0);
        assert_eq!(nishimori_couplings(&pure), Err(SpinModelError::DegenerateChannel(Pauli::Y)));
    }

    #[test]
    fn independent_channel_expansion() {
        let c = NoiseChannel::independent(0.1, 0.2);
        let p = c.probabilities();
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(p[2], 0.02, epsilon = 1e-15);
        assert_relative_eq!(c.ln_prob(Pauli::Z), (0.9f64 * 0.2).ln(), epsilon = 1e-14);
    }

    #[test]
    fn effective_formulas() {
        assert_relative_eq!(effective_probability(1, 0, 0.1, 0.0), 0.1, epsilon = 1e-15);
        assert_relative_eq!(effective_probability(2, 0, 0.1, 0.0), 0.18, epsilon = 1e-15);
        assert_relative_eq!(effective_probability(1, 1, 0.5, 0.5), 0.5, epsilon = 1e-15);
        assert_relative_eq!(effective_coupling(1, 0, 0.1, 0.0), 0.5 * 9f64.ln(), epsilon = 1e-12);
        assert_eq!(effective_coupling(1, 1, 0.5, 0.5), 0.0);
        assert_eq!(effective_coupling(3, 0, 0.0, 0.0), f64::INFINITY);
        let d = effective_coupling(1, 0, 1e-6, 0.0) - effective_coupling(3, 0, 1e-6, 0.0);
        assert!((d - 0.5 * 3f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn coupling_decreases_with_size() {
        let mut prev = f64::INFINITY;
        for x in 1..40 {
            let k = effective_coupling(x, 0, 0.07, 0.0);
            assert!(k < prev);
            prev = k;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn walsh_cases() {
        assert_eq!(walsh_integrate(&[0.7]).unwrap(), None);
        let k = 0.4;
        assert_relative_eq!(walsh_integrate(&[k, k]).unwrap().unwrap(), 0.5 * (2.0 * k).cosh().ln(), epsilon = 1e-14);
        assert_eq!(walsh_integrate(&[1.0, 1.0, 1.0]), Err(SpinModelError::UnsupportedDegree(3)));
        assert_eq!(walsh_integrate(&[f64::INFINITY, 0.3]).unwrap(), Some(0.3));
        // Merging K(1) and K(2) components gives the weight-3 coupling.
        let (k1, k2) = (effective_coupling(1, 0, 0.1, 0.0), effective_coupling(2, 0, 0.1, 0.0));
        assert_relative_eq!(
            walsh_integrate(&[k1, k2]).unwrap().unwrap(),
            effective_coupling(3, 0, 0.1, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn idle_qubit_couples_both_sides() {
        let c = parse("QUBITS 1\nTICK\nTICK\nTICK\n").unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let m = build_hamiltonian(&b, &NoiseChannel::independent(0.1, 0.2)).unwrap();
        assert_eq!(m.interactions().len(), 2 * c.grid().sites());
        let kx = 0.5 * 9f64.ln();
        let xloc = |layer| Location {
            flavor: Pauli::X,
            coord: SpacetimeCoord::new(0, layer),
        };
        let i0 = &m.interactions()[m.interaction_at(xloc(0)).unwrap()];
        let i1 = &m.interactions()[m.interaction_at(xloc(1)).unwrap()];
        let shared: Vec<_> = i0.spins.iter().filter(|s| i1.spins.contains(s)).collect();
        assert_eq!(shared.len(), 1);
        assert_relative_eq!(i0.coupling(), kx, epsilon = 1e-12);
        assert!(m.css_split().is_some());
    }

    #[test]
    fn measurement_gives_fields() {
        let c = parse("QUBITS 1\nTICK\nM Z 0\nTICK\n").unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let m = build_hamiltonian(&b, &NoiseChannel::independent(0.1, 0.1)).unwrap();
        for layer in 0..2 {
            let loc = Location {
                flavor: Pauli::X,
                coord: SpacetimeCoord::new(0, layer),
            };
            assert_eq!(m.interactions()[m.interaction_at(loc).unwrap()].spins.len(), 1);
        }
    }

    #[test]
    fn energy_examples() {
        let c = parse("QUBITS 1\nTICK\nTICK\nTICK\n").unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let m = build_hamiltonian(&b, &NoiseChannel::independent(0.1, 0.2)).unwrap();
        let eta = vec![1i8; m.interactions().len()];
        let up = vec![1i8; m.num_spins()];
        let total: f64 = m.interactions().iter().map(|i| i.coupling()).sum();
        assert_relative_eq!(m.energy(&eta, &up).unwrap(), -total, epsilon = 1e-12);
        assert!(m.energy(&eta[1..], &up).is_err());
    }

    #[test]
    fn rep_standard_bulk_weights() {
        let c = builtin("rep_standard", &BuiltinParams::new(5)).unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let m = simplify(&build_hamiltonian(&b, &NoiseChannel::independent(0.05, 0.0)).unwrap());
        let x = m.x_part().unwrap();
        let mut ws: Vec<usize> = x.interactions().iter().filter(|i| !i.is_constant()).map(|i| i.weight()).collect();
        ws.sort_unstable();
        ws.dedup();
        assert!(ws.contains(&1) && ws.contains(&3));
    }

    #[test]
    fn model_file_header() {
        let c = builtin("rep_memory", &BuiltinParams::new(3)).unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let m = build_hamiltonian(&b, &NoiseChannel::independent(0.1, 0.0)).unwrap();
        let text = m.to_model_file();
        let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(header["spins"], m.num_spins());
        assert_eq!(text.lines().count(), 1 + m.interactions().len());
        assert!(text.contains("\"inf\""));
        let g = m.graph_json();
        assert_eq!(g["vertices"].as_array().unwrap().len(), m.num_spins());
    }
}
