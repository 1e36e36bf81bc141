//! Free-energy estimation by Monte Carlo.
//!
//! Only interactions with spins and finite couplings are simulated. The
//! rest of `ln Z` (model constant, per-interaction offsets, constant
//! interactions) depends on `η` alone and is added back exactly, so every
//! estimate here is of the full free energy `F = −ln Z`.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pauli::{SpacetimeCoord, SpacetimePauli};
use crate::spinmodel::SpinModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("interaction {0} has an infinite coupling; Monte Carlo needs finite couplings")]
    InfiniteCoupling(usize),
    #[error("chain step {step} flips {flips} signs, above the bound {bound}")]
    NonAdjacentChain { step: usize, flips: usize, bound: usize },
    #[error("effective population {ess:.1} below {min:.1} at annealing step {step}")]
    PopulationCollapse { step: usize, ess: f64, min: f64 },
    #[error("bad temperature schedule: {0}")]
    BadSchedule(String),
    #[error("expected {expected} signs, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Ascending inverse temperatures ending at exactly 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    betas: Vec<f64>,
}

impl TemperatureSchedule {
    pub fn new(betas: Vec<f64>) -> Result<Self, McError> {
        if betas.is_empty() || *betas.last().unwrap() != 1.0 {
            return Err(McError::BadSchedule("last inverse temperature must be 1".into()));
        }
        if betas.windows(2).any(|w| w[0] >= w[1]) || betas[0] < 0.0 {
            return Err(McError::BadSchedule("inverse temperatures must ascend from >= 0".into()));
        }
        Ok(TemperatureSchedule { betas })
    }

    /// `n` temperatures with `1−β` geometric from `1−beta_min` down to
    /// `1−β_{n−2}`, followed by `β = 1`.
    pub fn geometric(n: usize, beta_min: f64) -> Result<Self, McError> {
        if n == 1 {
            return Self::new(vec![1.0]);
        }
        if !(0.0..1.0).contains(&beta_min) {
            return Err(McError::BadSchedule(format!("beta_min {beta_min} outside [0,1)")));
        }
        let top = 1.0 - beta_min;
        let floor = (top / (n as f64)).min(0.05 * top);
        let ratio = if n > 2 { (floor / top).powf(1.0 / (n - 2) as f64) } else { 1.0 };
        let mut betas: Vec<f64> = (0..n - 1).map(|i| 1.0 - top * ratio.powi(i as i32)).collect();
        betas.push(1.0);
        Self::new(betas)
    }

    /// Evenly spaced from `beta_min` to 1.
    pub fn linear(n: usize, beta_min: f64) -> Result<Self, McError> {
        if n < 2 {
            return Self::new(vec![1.0]);
        }
        Self::new((0..n).map(|i| beta_min + (1.0 - beta_min) * i as f64 / (n - 1) as f64).collect())
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

/// The simulated part of a model.
#[derive(Clone, Debug)]
pub struct DynamicModel {
    num_spins: usize,
    spins: Vec<Vec<u32>>,
    couplings: Vec<f64>,
    adjacency: Vec<Vec<u32>>,
    /// Model interaction index of each simulated interaction.
    source: Vec<usize>,
    /// Model interactions left out of the simulation.
    frozen: Vec<usize>,
    constant: f64,
}

impl DynamicModel {
    pub fn new(model: &SpinModel) -> Result<Self, McError> {
        let mut spins = Vec::new();
        let mut couplings = Vec::new();
        let mut source = Vec::new();
        let mut frozen = Vec::new();
        for (c, it) in model.interactions().iter().enumerate() {
            if it.is_constant() {
                frozen.push(c);
                continue;
            }
            let k = it.coupling();
            if !k.is_finite() {
                return Err(McError::InfiniteCoupling(c));
            }
            spins.push(it.spins.iter().map(|&s| s as u32).collect());
            couplings.push(k);
            source.push(c);
        }
        let mut adjacency = vec![Vec::new(); model.num_spins()];
        for (c, ss) in spins.iter().enumerate() {
            for &s in ss {
                adjacency[s as usize].push(c as u32);
            }
        }
        Ok(DynamicModel {
            num_spins: model.num_spins(),
            spins,
            couplings,
            adjacency,
            source,
            frozen,
            constant: model.constant(),
        })
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn num_interactions(&self) -> usize {
        self.spins.len()
    }

    /// Signs of the simulated interactions.
    pub fn signs(&self, eta: &[i8]) -> Vec<i8> {
        self.source.iter().map(|&c| eta[c]).collect()
    }

    /// `ln Z − ln Σ_σ e^{−ℰ(σ)}`: everything the simulation leaves out.
    pub fn log_shift(&self, model: &SpinModel, eta: &[i8]) -> f64 {
        let its = model.interactions();
        let mut s = self.constant;
        for &c in &self.frozen {
            s += its[c].log_weight(eta[c] > 0);
        }
        for &c in &self.source {
            s += 0.5 * (its[c].log_weights[0] + its[c].log_weights[1]);
        }
        s
    }

    fn aligned(&self, signs: &[i8], sigma: &[i8]) -> Vec<i8> {
        self.spins
            .iter()
            .zip(signs)
            .map(|(ss, &e)| e * ss.iter().map(|&k| sigma[k as usize]).product::<i8>())
            .collect()
    }

    /// `ℰ = −Σ_c K_c η_c Π σ` with compensated summation.
    pub fn energy(&self, signs: &[i8], sigma: &[i8]) -> f64 {
        let mut sum = KahanSum::default();
        for (c, a) in self.aligned(signs, sigma).into_iter().enumerate() {
            sum.add(-self.couplings[c] * f64::from(a));
        }
        sum.value()
    }

    /// `ℰ(σ; η') − ℰ(σ; η)` for interactions `flipped` whose signs differ.
    fn cross_delta(&self, flipped: &[u32], signs: &[i8], sigma: &[i8]) -> f64 {
        flipped
            .iter()
            .map(|&c| {
                let c = c as usize;
                let prod: i8 = self.spins[c].iter().map(|&k| sigma[k as usize]).product();
                2.0 * self.couplings[c] * f64::from(signs[c] * prod)
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// One spin configuration with cached interaction alignments and energy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Replica {
    pub sigma: Vec<i8>,
    aligned: Vec<i8>,
    energy: KahanSum,
}

impl Replica {
    pub fn new(model: &DynamicModel, signs: &[i8], sigma: Vec<i8>) -> Self {
        let aligned = model.aligned(signs, &sigma);
        let mut energy = KahanSum::default();
        energy.add(model.energy(signs, &sigma));
        Replica { sigma, aligned, energy }
    }

    pub fn random(model: &DynamicModel, signs: &[i8], rng: &mut impl Rng) -> Self {
        let sigma = (0..model.num_spins).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        Self::new(model, signs, sigma)
    }

    pub fn energy(&self) -> f64 {
        self.energy.value()
    }
}

/// `m` single-spin Metropolis proposals in spin order, each accepted with
/// `min{1, e^{−βΔℰ}}`. Returns the number accepted.
pub fn metropolis_sweep(model: &DynamicModel, replica: &mut Replica, beta: f64, rng: &mut impl Rng) -> usize {
    let mut accepted = 0;
    for k in 0..model.num_spins {
        let adj = &model.adjacency[k];
        let delta: f64 = adj
            .iter()
            .map(|&c| 2.0 * model.couplings[c as usize] * f64::from(replica.aligned[c as usize]))
            .sum();
        if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
            replica.sigma[k] = -replica.sigma[k];
            for &c in adj {
                replica.aligned[c as usize] = -replica.aligned[c as usize];
            }
            replica.energy.add(delta);
            accepted += 1;
        }
    }
    accepted
}

/// Replicas at every temperature of a schedule, sharing one disorder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LadderState {
    pub betas: Vec<f64>,
    /// `replicas[i]` sits at `betas[i]`.
    pub replicas: Vec<Replica>,
    pub signs: Vec<i8>,
    pub swaps_attempted: u64,
    pub swaps_accepted: u64,
}

impl LadderState {
    pub fn new(model: &DynamicModel, signs: Vec<i8>, schedule: &TemperatureSchedule, rng: &mut impl Rng) -> Self {
        let replicas = schedule.betas().iter().map(|_| Replica::random(model, &signs, rng)).collect();
        LadderState {
            betas: schedule.betas().to_vec(),
            replicas,
            signs,
            swaps_attempted: 0,
            swaps_accepted: 0,
        }
    }

    pub fn sweep(&mut self, model: &DynamicModel, rng: &mut impl Rng) {
        for (r, &b) in self.replicas.iter_mut().zip(&self.betas) {
            metropolis_sweep(model, r, b, rng);
        }
    }

    /// The replica at `β = 1`.
    pub fn physical(&self) -> &Replica {
        self.replicas.last().expect("nonempty ladder")
    }

    /// Recomputes every stored energy from scratch; the largest drift.
    pub fn resync(&mut self, model: &DynamicModel) -> f64 {
        let mut drift: f64 = 0.0;
        for r in &mut self.replicas {
            let e = model.energy(&self.signs, &r.sigma);
            drift = drift.max((e - r.energy()).abs());
            r.energy = KahanSum::default();
            r.energy.add(e);
        }
        drift
    }
}

/// Swaps adjacent replicas with `min{1, e^{(β_{i+1}−β_i)(ℰ_{i+1}−ℰ_i)}}`.
pub fn replica_exchange(ladder: &mut LadderState, rng: &mut impl Rng) {
    for i in 0..ladder.replicas.len().saturating_sub(1) {
        let x = (ladder.betas[i + 1] - ladder.betas[i]) * (ladder.replicas[i + 1].energy() - ladder.replicas[i].energy());
        ladder.swaps_attempted += 1;
        if x >= 0.0 || rng.gen::<f64>() < x.exp() {
            ladder.replicas.swap(i, i + 1);
            ladder.swaps_accepted += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    pub value: f64,
    /// Jackknife variance.
    pub variance: f64,
    pub method: String,
    pub sweeps: usize,
    pub population: usize,
    pub seed: u64,
}

impl FreeEnergyEstimate {
    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Jackknife variance `((n−1)/n) Σ (θ_{−i} − θ̄)²` from leave-one-out
/// estimates `θ_{−i}`.
pub fn jackknife_from_leave_one_out(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (n - 1.0) / n * values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
}

/// The chain `Q_1, …, Q_M` of single-site factors of `L`, in `(layer, qubit)`
/// order.
pub fn decompose_logical(l: &SpacetimePauli) -> Vec<SpacetimePauli> {
    l.sites()
        .map(|(c, p)| SpacetimePauli::single(l.grid(), c, p).expect("site of the same grid"))
        .collect()
}

/// Partial products `L_0 = I, L_1, …, L_M = L`.
pub fn partial_products(chain: &[SpacetimePauli], grid: crate::pauli::Grid) -> Vec<SpacetimePauli> {
    let mut out = vec![SpacetimePauli::identity(grid)];
    for q in chain {
        let next = out.last().unwrap().multiply(q).expect("same grid");
        out.push(next);
    }
    out
}

/// Coordinates touched by a chain, for diagnostics.
pub fn chain_sites(chain: &[SpacetimePauli]) -> Vec<SpacetimeCoord> {
    chain.iter().flat_map(|q| q.support()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BennettConfig {
    pub schedule: TemperatureSchedule,
    pub thermalize: usize,
    pub sweeps: usize,
    /// Jackknife blocks over the measurement sweeps.
    pub blocks: usize,
    /// Largest number of simulated signs one chain step may flip.
    pub max_flips: usize,
    pub seed: u64,
}

impl Default for BennettConfig {
    fn default() -> Self {
        BennettConfig {
            schedule: TemperatureSchedule::geometric(12, 0.1).expect("valid default"),
            thermalize: 1000,
            sweeps: 4000,
            blocks: 20,
            max_flips: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BennettLadder {
    state: LadderState,
    rng: ChaCha8Rng,
    /// Simulated interactions whose sign differs towards the previous and
    /// next realization.
    flips_prev: Vec<u32>,
    flips_next: Vec<u32>,
    /// Per block: Σ f(ℰ_next − ℰ), Σ f(ℰ_prev − ℰ).
    sum_next: Vec<f64>,
    sum_prev: Vec<f64>,
    samples: Vec<u64>,
    done: usize,
}

/// A multi-step Bennett acceptance-ratio run that can be advanced in parts
/// and checkpointed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BennettRun {
    config: BennettConfig,
    ladders: Vec<BennettLadder>,
    /// Exact `ln Z` shift of the last realization minus the first.
    shift_delta: f64,
    /// Number of chain steps before removing repeats.
    steps: usize,
}

fn differing(a: &[i8], b: &[i8]) -> Vec<u32> {
    (0..a.len()).filter(|&i| a[i] != b[i]).map(|i| i as u32).collect()
}

impl BennettRun {
    /// `chain[μ]` are the full sign vectors of `L_0 … L_M`.
    pub fn new(model: &SpinModel, chain: &[Vec<i8>], config: BennettConfig) -> Result<Self, McError> {
        let dynm = DynamicModel::new(model)?;
        let n = model.interactions().len();
        for eta in chain {
            if eta.len() != n {
                return Err(McError::SizeMismatch {
                    expected: n,
                    got: eta.len(),
                });
            }
        }
        let mut signs: Vec<Vec<i8>> = Vec::new();
        for (step, eta) in chain.iter().enumerate() {
            let s = dynm.signs(eta);
            if let Some(prev) = signs.last() {
                let flips = differing(prev, &s).len();
                if flips > config.max_flips {
                    return Err(McError::NonAdjacentChain {
                        step,
                        flips,
                        bound: config.max_flips,
                    });
                }
                if flips == 0 {
                    continue;
                }
            }
            signs.push(s);
        }
        let shift_delta = match (chain.first(), chain.last()) {
            (Some(a), Some(b)) => dynm.log_shift(model, b) - dynm.log_shift(model, a),
            _ => 0.0,
        };
        let blocks = config.blocks.max(2);
        let ladders = (0..signs.len())
            .map(|m| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(m as u64);
                let state = LadderState::new(&dynm, signs[m].clone(), &config.schedule, &mut rng);
                let prev = if m > 0 { signs[m - 1].clone() } else { Vec::new() };
                let next = signs.get(m + 1).cloned().unwrap_or_default();
                BennettLadder {
                    flips_prev: if m > 0 { differing(&signs[m], &prev) } else { Vec::new() },
                    flips_next: if next.is_empty() { Vec::new() } else { differing(&signs[m], &next) },
                    state,
                    rng,
                    sum_next: vec![0.0; blocks],
                    sum_prev: vec![0.0; blocks],
                    samples: vec![0; blocks],
                    done: 0,
                }
            })
            .collect();
        Ok(BennettRun {
            config,
            ladders,
            shift_delta,
            steps: chain.len().saturating_sub(1),
        })
    }

    pub fn total_sweeps(&self) -> usize {
        self.config.thermalize + self.config.sweeps
    }

    pub fn completed_sweeps(&self) -> usize {
        self.ladders.first().map_or(self.total_sweeps(), |l| l.done)
    }

    pub fn is_finished(&self) -> bool {
        self.completed_sweeps() >= self.total_sweeps()
    }

    /// Advances every ladder by up to `sweeps` sweeps, ladders in parallel.
    pub fn advance(&mut self, model: &SpinModel, sweeps: usize) -> Result<(), McError> {
        let dynm = DynamicModel::new(model)?;
        let cfg = &self.config;
        let total = cfg.thermalize + cfg.sweeps;
        let blocks = cfg.blocks.max(2);
        let per_block = cfg.sweeps.div_ceil(blocks).max(1);
        self.ladders.par_iter_mut().for_each(|l| {
            let end = (l.done + sweeps).min(total);
            while l.done < end {
                l.state.sweep(&dynm, &mut l.rng);
                replica_exchange(&mut l.state, &mut l.rng);
                if l.done >= cfg.thermalize {
                    let b = ((l.done - cfg.thermalize) / per_block).min(blocks - 1);
                    let sigma = &l.state.physical().sigma;
                    let s = &l.state.signs;
                    if !l.flips_next.is_empty() {
                        let d = dynm.cross_delta(&l.flips_next, s, sigma);
                        l.sum_next[b] += (-d).exp().min(1.0);
                    }
                    if !l.flips_prev.is_empty() {
                        let d = dynm.cross_delta(&l.flips_prev, s, sigma);
                        l.sum_prev[b] += (-d).exp().min(1.0);
                    }
                    l.samples[b] += 1;
                }
                l.done += 1;
                if l.done % 1024 == 0 {
                    let drift = l.state.resync(&dynm);
                    debug_assert!(drift < 1e-6, "energy drift {drift}");
                }
            }
        });
        Ok(())
    }

    fn delta_f_excluding(&self, skip: Option<usize>) -> f64 {
        let mut df = -self.shift_delta;
        for m in 1..self.ladders.len() {
            let a = &self.ladders[m - 1];
            let b = &self.ladders[m];
            let mean = |sums: &[f64], counts: &[u64]| {
                let (mut s, mut n) = (0.0, 0u64);
                for i in 0..sums.len() {
                    if Some(i) != skip {
                        s += sums[i];
                        n += counts[i];
                    }
                }
                s / n as f64
            };
            let forward = mean(&a.sum_next, &a.samples);
            let backward = mean(&b.sum_prev, &b.samples);
            df -= (forward / backward).ln();
        }
        df
    }

    /// `F(L_M) − F(L_0)` with a block jackknife variance.
    pub fn estimate(&self) -> FreeEnergyEstimate {
        let value = self.delta_f_excluding(None);
        let blocks = self.config.blocks.max(2);
        let loo: Vec<f64> = (0..blocks).map(|b| self.delta_f_excluding(Some(b))).collect();
        let variance = if self.ladders.len() > 1 { jackknife_from_leave_one_out(&loo) } else { 0.0 };
        FreeEnergyEstimate {
            value,
            variance,
            method: "bennett".into(),
            sweeps: self.config.sweeps,
            population: self.config.schedule.len(),
            seed: self.config.seed,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), McError> {
        let text = serde_json::to_string(self).map_err(|e| McError::Checkpoint(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| McError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, McError> {
        let text = std::fs::read_to_string(path).map_err(|e| McError::Checkpoint(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| McError::Checkpoint(e.to_string()))
    }

    /// Steps in the chain before repeated realizations were merged.
    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// `F(L_M) − F(L_0)` over a chain of realizations by the multi-step
/// Bennett acceptance ratio, cross-scoring the `β = 1` replica of each
/// ladder under its neighbours' disorder.
pub fn bennett_delta_f(model: &SpinModel, chain: &[Vec<i8>], config: &BennettConfig) -> Result<FreeEnergyEstimate, McError> {
    let mut run = BennettRun::new(model, chain, config.clone())?;
    let total = run.total_sweeps();
    run.advance(model, total)?;
    Ok(run.estimate())
}

/// Like [`bennett_delta_f`], saving progress to `checkpoint` every
/// `every` sweeps and resuming from it when present.
pub fn bennett_delta_f_checkpointed(
    model: &SpinModel,
    chain: &[Vec<i8>],
    config: &BennettConfig,
    checkpoint: &Path,
    every: usize,
) -> Result<FreeEnergyEstimate, McError> {
    let mut run = match BennettRun::load(checkpoint) {
        Ok(r) if r.config == *config => r,
        _ => BennettRun::new(model, chain, config.clone())?,
    };
    while !run.is_finished() {
        run.advance(model, every.max(1))?;
        run.save(checkpoint)?;
    }
    Ok(run.estimate())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealingConfig {
    /// Must start at `β = 0`.
    pub schedule: TemperatureSchedule,
    pub population: usize,
    pub sweeps_per_step: usize,
    /// Independent populations; the jackknife runs over them.
    pub runs: usize,
    /// Smallest effective population, as a fraction of the population.
    pub min_ess_fraction: f64,
    pub seed: u64,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        AnnealingConfig {
            schedule: TemperatureSchedule::linear(101, 0.0).expect("valid default"),
            population: 1000,
            sweeps_per_step: 2,
            runs: 8,
            min_ess_fraction: 0.05,
            seed: 0,
        }
    }
}

fn anneal_once(dynm: &DynamicModel, signs: &[i8], cfg: &AnnealingConfig, run: u64) -> Result<f64, McError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(run);
    let r = cfg.population;
    let mut pop: Vec<Replica> = (0..r).map(|_| Replica::random(dynm, signs, &mut rng)).collect();
    let mut ln_z = dynm.num_spins as f64 * std::f64::consts::LN_2;
    let betas = cfg.schedule.betas();
    for k in 0..betas.len() - 1 {
        let db = betas[k + 1] - betas[k];
        let logw: Vec<f64> = pop.iter().map(|p| -db * p.energy()).collect();
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|x| (x - top).exp()).collect();
        let mut s = KahanSum::default();
        let mut s2 = KahanSum::default();
        for x in &w {
            s.add(*x);
            s2.add(x * x);
        }
        ln_z += top + (s.value() / r as f64).ln();
        let ess = s.value() * s.value() / s2.value();
        let min = cfg.min_ess_fraction * r as f64;
        if ess < min {
            return Err(McError::PopulationCollapse { step: k, ess, min });
        }
        let dist = WeightedIndex::new(&w).expect("positive weights");
        let picks: Vec<usize> = (0..r).map(|_| dist.sample(&mut rng)).collect();
        pop = picks.into_iter().map(|i| pop[i].clone()).collect();
        for p in &mut pop {
            for _ in 0..cfg.sweeps_per_step {
                metropolis_sweep(dynm, p, betas[k + 1], &mut rng);
            }
        }
    }
    Ok(ln_z)
}

/// Free energy `F = −ln Z` by population annealing from `β = 0`, where the
/// simulated part equals `m ln 2` exactly.
pub fn population_annealing_f(model: &SpinModel, eta: &[i8], config: &AnnealingConfig) -> Result<FreeEnergyEstimate, McError> {
    if config.schedule.betas()[0] != 0.0 {
        return Err(McError::BadSchedule("annealing starts at beta = 0".into()));
    }
    if eta.len() != model.interactions().len() {
        return Err(McError::SizeMismatch {
            expected: model.interactions().len(),
            got: eta.len(),
        });
    }
    let dynm = DynamicModel::new(model)?;
    let signs = dynm.signs(eta);
    let runs = config.runs.max(2);
    let ln_zs: Vec<f64> = (0..runs as u64)
        .into_par_iter()
        .map(|i| anneal_once(&dynm, &signs, config, i))
        .collect::<Result<_, _>>()?;
    let shift = dynm.log_shift(model, eta);
    let combine = |skip: Option<usize>| {
        let vals: Vec<f64> = (0..runs).filter(|&i| Some(i) != skip).map(|i| ln_zs[i]).collect();
        let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = vals.iter().map(|v| (v - top).exp()).sum::<f64>() / vals.len() as f64;
        -(shift + top + mean.ln())
    };
    let loo: Vec<f64> = (0..runs).map(|i| combine(Some(i))).collect();
    Ok(FreeEnergyEstimate {
        value: combine(None),
        variance: jackknife_from_leave_one_out(&loo),
        method: "population_annealing".into(),
        sweeps: config.sweeps_per_step * config.schedule.len(),
        population: config.population * runs,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse;
    use crate::oracle::exact_partition;
    use crate::spacetime::GaugeBasis;
    use crate::spinmodel::{build_hamiltonian, NoiseChannel};

    fn idle_model() -> SpinModel {
        // One idle qubit over two layers, X noise only: one bond between the
        // two X-type spins plus a field on each.
        let c = parse("QUBITS 1\nTICK\nTICK\n").unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        build_hamiltonian(&b, &NoiseChannel::independent(0.2, 0.0)).unwrap().x_part().unwrap()
    }

    #[test]
    fn schedules() {
        let g = TemperatureSchedule::geometric(10, 0.1).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(*g.betas().last().unwrap(), 1.0);
        assert!(g.betas().windows(2).all(|w| w[0] < w[1]));
        assert!(TemperatureSchedule::new(vec![0.5, 0.9]).is_err());
        assert!(TemperatureSchedule::new(vec![0.5, 0.4, 1.0]).is_err());
    }

    #[test]
    fn beta_zero_accepts_everything() {
        let m = idle_model();
        let d = DynamicModel::new(&m).unwrap();
        let signs = vec![1; d.num_interactions()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut r = Replica::random(&d, &signs, &mut rng);
        for _ in 0..10 {
            assert_eq!(metropolis_sweep(&d, &mut r, 0.0, &mut rng), d.num_spins());
        }
        assert!((r.energy() - d.energy(&signs, &r.sigma)).abs() < 1e-12);
    }

    #[test]
    fn cold_sweeps_reach_ground_state() {
        let m = idle_model();
        let d = DynamicModel::new(&m).unwrap();
        let signs = vec![1; d.num_interactions()];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut r = Replica::random(&d, &signs, &mut rng);
        let mut last = r.energy();
        for _ in 0..20 {
            metropolis_sweep(&d, &mut r, 1e6, &mut rng);
            assert!(r.energy() <= last + 1e-12);
            last = r.energy();
        }
        let ground: f64 = -(0..d.num_interactions()).map(|c| d.couplings[c]).sum::<f64>();
        assert!((r.energy() - ground).abs() < 1e-9);
    }

    #[test]
    fn equal_energies_always_swap() {
        let m = idle_model();
        let d = DynamicModel::new(&m).unwrap();
        let signs = vec![1; d.num_interactions()];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sched = TemperatureSchedule::new(vec![0.3, 0.6, 1.0]).unwrap();
        let mut l = LadderState::new(&d, signs.clone(), &sched, &mut rng);
        for r in &mut l.replicas {
            *r = Replica::new(&d, &signs, vec![1; d.num_spins()]);
        }
        replica_exchange(&mut l, &mut rng);
        assert_eq!(l.swaps_accepted, l.swaps_attempted);
    }

    #[test]
    fn decompose_multiplies_back() {
        let g = crate::pauli::Grid::new(3, 3);
        let l = SpacetimePauli::parse_tokens(g, "X 2@0.5 Y 0@1.5 Z 1@0.5").unwrap();
        let chain = decompose_logical(&l);
        assert_eq!(chain.len(), 3);
        let sites = chain_sites(&chain);
        assert_eq!(sites[0], SpacetimeCoord::new(1, 0));
        assert_eq!(sites[1], SpacetimeCoord::new(2, 0));
        assert_eq!(partial_products(&chain, g).last().unwrap(), &l);
        assert!(decompose_logical(&SpacetimePauli::identity(g)).is_empty());
    }

    #[test]
    fn identity_chain_is_zero() {
        let m = idle_model();
        let eta = vec![1; m.interactions().len()];
        let est = bennett_delta_f(&m, &[eta], &BennettConfig::default()).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.variance, 0.0);
    }

    #[test]
    fn annealing_free_spins() {
        let m = idle_model();
        let d = DynamicModel::new(&m).unwrap();
        assert!(d.num_spins() > 0);
        let c = parse("QUBITS 1\nTICK\nTICK\n").unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let free = build_hamiltonian(&b, &NoiseChannel::independent(0.5, 0.0)).unwrap().x_part().unwrap();
        let eta = vec![1; free.interactions().len()];
        let cfg = AnnealingConfig {
            population: 50,
            runs: 2,
            ..AnnealingConfig::default()
        };
        let est = population_annealing_f(&free, &eta, &cfg).unwrap();
        let exact = -exact_partition(&free, &eta).unwrap();
        assert!((est.value - exact).abs() < 1e-9);
    }

    #[test]
    fn checkpoint_resume_matches() {
        let m = idle_model();
        let n = m.interactions().len();
        let mut flipped = vec![1i8; n];
        flipped[0] = -1;
        let chain = vec![vec![1i8; n], flipped];
        let cfg = BennettConfig {
            thermalize: 100,
            sweeps: 400,
            ..BennettConfig::default()
        };
        let whole = bennett_delta_f(&m, &chain, &cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("stspin-ckpt-{}", std::process::id()));
        let _ = std::fs::remove_file(&dir);
        let resumed = bennett_delta_f_checkpointed(&m, &chain, &cfg, &dir, 123).unwrap();
        let _ = std::fs::remove_file(&dir);
        assert_eq!(whole, resumed);
    }
}
