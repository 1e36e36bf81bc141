//! Disorder-averaged maximum-likelihood decoding experiments.
//!
//! For each sampled error `E` the decoder needs `ΔF_L = F(E·L) − F(E)` for
//! every nontrivial logical class `L`. The success probability of that
//! realization is `max_L e^{−ΔF_L} / Σ_L e^{−ΔF_L}` (identity included with
//! `ΔF = 0`), and its average over realizations is the ML success rate.
//!
//! On CSS models the X and Z halves are handled separately: a class flips
//! signs only in the halves its representative anticommutes with, and the
//! free energy is additive over halves.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{Eliminator, Reduction};
use crate::circuit::{builtin, parse, BuiltinParams, Circuit, CircuitError, CnotSchedule};
use crate::disorder::{sample_error, signs_from_error};
use crate::elimination::{EliminationError, EliminationPlan, MAX_WIDTH};
use crate::montecarlo::{
    bennett_delta_f, decompose_logical, partial_products, population_annealing_f, AnnealingConfig, BennettConfig,
    McError, TemperatureSchedule,
};
use crate::pauli::{Grid, SpacetimePauli};
use crate::spacetime::GaugeBasis;
use crate::spinmodel::{build_hamiltonian, effective_coupling, simplify, NoiseChannel, SpinModel, SpinModelError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Model(#[from] SpinModelError),
    #[error(transparent)]
    Elimination(#[from] EliminationError),
    #[error("Monte Carlo failed at d={d}, p={p}, realization {realization}")]
    MonteCarlo {
        d: usize,
        p: f64,
        realization: u64,
        source: McError,
    },
    #[error("no crossing: {0}")]
    NoCrossing(String),
    #[error("too few points: {0}")]
    TooFewPoints(String),
    #[error("{0}")]
    Io(String),
}

impl ExperimentError {
    /// Failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ExperimentError::MonteCarlo { .. } | ExperimentError::NoCrossing(_) | ExperimentError::Elimination(_)
        )
    }
}

/// Success probability of one realization from the free-energy differences
/// of the nontrivial classes.
pub fn ml_success(delta_f: &[f64]) -> f64 {
    // Shift by the smallest ΔF (the identity counts as 0) so the largest
    // term is exactly 1.
    let lo = delta_f.iter().copied().fold(0.0, f64::min);
    let denom = lo.exp() + delta_f.iter().map(|&x| (lo - x).exp()).sum::<f64>();
    1.0 / denom
}

/// 1 when the identity class is the most likely, split evenly on ties.
pub fn ml_argmax_success(delta_f: &[f64]) -> f64 {
    if delta_f.iter().any(|&x| x < 0.0) {
        return 0.0;
    }
    let ties = delta_f.iter().filter(|&&x| x == 0.0).count();
    1.0 / (1 + ties) as f64
}

/// Jackknife variance `((n−1)/n) Σ (θ_{−i} − θ̄)²` of `estimator`.
pub fn jackknife<F: Fn(&[f64]) -> f64>(samples: &[f64], estimator: F) -> Result<f64, ExperimentError> {
    let n = samples.len();
    if n < 2 {
        return Err(ExperimentError::TooFewPoints("jackknife needs at least two samples".into()));
    }
    let mut buf = Vec::with_capacity(n - 1);
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            buf.clear();
            buf.extend_from_slice(&samples[..i]);
            buf.extend_from_slice(&samples[i + 1..]);
            estimator(&buf)
        })
        .collect();
    Ok(crate::montecarlo::jackknife_from_leave_one_out(&loo))
}

/// Jackknife variance of the sample mean in `O(n)`; equals `s²/n`.
pub fn jackknife_mean(samples: &[f64]) -> Result<f64, ExperimentError> {
    let n = samples.len();
    if n < 2 {
        return Err(ExperimentError::TooFewPoints("jackknife needs at least two samples".into()));
    }
    let total: f64 = samples.iter().sum();
    let loo: Vec<f64> = samples.iter().map(|x| (total - x) / (n - 1) as f64).collect();
    Ok(crate::montecarlo::jackknife_from_leave_one_out(&loo))
}

/// Bootstrap variance of `estimator` over `draws` resamples with replacement.
pub fn bootstrap_variance<F: Fn(&[f64]) -> f64>(samples: &[f64], estimator: F, draws: usize, seed: u64) -> f64 {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut buf = vec![0.0; n];
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..draws {
        for b in buf.iter_mut() {
            *b = samples[rng.gen_range(0..n)];
        }
        let v = estimator(&buf);
        sum += v;
        sum2 += v * v;
    }
    let m = sum / draws as f64;
    (sum2 / draws as f64 - m * m) * draws as f64 / (draws as f64 - 1.0)
}

/// How physical errors are drawn at rate `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    /// X errors only.
    X,
    /// Z errors only.
    Z,
    /// Independent X and Z errors, both at `p`.
    Xz,
    /// `X`, `Y`, `Z` each with `p/3`.
    Depolarizing,
}

impl NoiseFamily {
    pub fn channel(self, p: f64) -> NoiseChannel {
        match self {
            NoiseFamily::X => NoiseChannel::independent(p, 0.0),
            NoiseFamily::Z => NoiseChannel::independent(0.0, p),
            NoiseFamily::Xz => NoiseChannel::independent(p, p),
            NoiseFamily::Depolarizing => NoiseChannel::General {
                i: 1.0 - p,
                x: p / 3.0,
                y: p / 3.0,
                z: p / 3.0,
            },
        }
    }
}

/// Free-energy engine.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Exact elimination when its width allows, otherwise Bennett.
    #[default]
    Auto,
    Exact {
        #[serde(default = "default_width")]
        max_width: usize,
    },
    Bennett(BennettConfig),
    Annealing(AnnealingConfig),
}

fn default_width() -> usize {
    MAX_WIDTH
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CircuitSpec {
    Builtin {
        builtin: String,
        distances: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cnot_schedule: Option<CnotSchedule>,
    },
    File {
        file: PathBuf,
        /// Distance label written to the output.
        #[serde(default)]
        d: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub circuit: CircuitSpec,
    pub noise: NoiseFamily,
    pub p_values: Vec<f64>,
    /// Observable names spanning the class set; all declared ones if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observables: Option<Vec<String>>,
    pub realizations: usize,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Use the fully reduced generator set. Defaults to true except for the
    /// toric builtins, which keep their redundancies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge_fix: Option<bool>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.p_values.is_empty() {
            return bad("p_values is empty");
        }
        if self.p_values.iter().any(|p| !(0.0..=0.5).contains(p)) {
            return bad("every p must lie in [0, 0.5]");
        }
        if self.realizations < 2 {
            return bad("need at least two realizations");
        }
        if let CircuitSpec::Builtin { distances, .. } = &self.circuit {
            if distances.is_empty() {
                return bad("distances is empty");
            }
        }
        match &self.method {
            Method::Bennett(c) => {
                TemperatureSchedule::new(c.schedule.betas().to_vec()).map_err(|e| ExperimentError::Config(e.to_string()))?;
                if c.blocks < 2 || c.sweeps < c.blocks {
                    return bad("bennett needs at least two blocks and one sweep per block");
                }
            }
            Method::Annealing(c) => {
                TemperatureSchedule::new(c.schedule.betas().to_vec()).map_err(|e| ExperimentError::Config(e.to_string()))?;
                if c.population < 2 {
                    return bad("annealing population must be at least 2");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `(d, circuit)` pairs.
    pub fn circuits(&self) -> Result<Vec<(usize, Circuit)>, ExperimentError> {
        match &self.circuit {
            CircuitSpec::Builtin {
                builtin: name,
                distances,
                duration,
                cnot_schedule,
            } => distances
                .iter()
                .map(|&d| {
                    let params = BuiltinParams {
                        d,
                        duration: *duration,
                        cnot_schedule: *cnot_schedule,
                    };
                    Ok((d, builtin(name, &params)?))
                })
                .collect(),
            CircuitSpec::File { file, d } => {
                let text = std::fs::read_to_string(file)
                    .map_err(|e| ExperimentError::Config(format!("{}: {e}", file.display())))?;
                Ok(vec![(*d, parse(&text)?)])
            }
        }
    }

    fn keeps_redundancies(&self) -> bool {
        match self.gauge_fix {
            Some(fix) => !fix,
            None => matches!(&self.circuit, CircuitSpec::Builtin { builtin, .. } if builtin.starts_with("toric")),
        }
    }
}

/// Observable representatives by name; all declared ones for `None`.
pub fn select_observables(circuit: &Circuit, names: Option<&[String]>) -> Result<Vec<SpacetimePauli>, ExperimentError> {
    match names {
        None => Ok(circuit.observables().iter().map(|o| o.representative.clone()).collect()),
        Some(names) => names
            .iter()
            .map(|n| {
                circuit
                    .observable(n)
                    .map(|o| o.representative.clone())
                    .ok_or_else(|| ExperimentError::Config(format!("unknown observable `{n}`")))
            })
            .collect(),
    }
}

/// Representatives of the nontrivial classes generated by `observables`
/// modulo the gauge group. Observables in the gauge group or in the span of
/// earlier ones add no classes.
pub fn logical_classes(basis: &GaugeBasis, observables: &[SpacetimePauli]) -> Vec<SpacetimePauli> {
    let grid = basis.grid();
    let ind = basis.independent_indices();
    let mut elim = Eliminator::new(2 * grid.sites(), ind.len() + observables.len());
    for &i in ind {
        elim.insert(&basis.generators()[i].symplectic());
    }
    let gens: Vec<&SpacetimePauli> = observables
        .iter()
        .filter(|o| elim.insert(&o.symplectic()) == Reduction::Independent)
        .collect();
    (1usize..1 << gens.len())
        .map(|mask| {
            let mut l = SpacetimePauli::identity(grid);
            for (k, g) in gens.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    l.mul_assign(g).expect("same grid");
                }
            }
            l
        })
        .collect()
}

enum Engine {
    Exact(EliminationPlan),
    Bennett(BennettConfig),
    Annealing(AnnealingConfig),
}

struct Part {
    model: SpinModel,
    /// Per class, its sign flips on this part.
    class_signs: Vec<Vec<i8>>,
    /// Per class, sign flips of the partial products `L_0 … L_M`.
    chains: Vec<Vec<Vec<i8>>>,
    engine: Engine,
}

/// Free-energy differences of one realization.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub delta_f: Vec<f64>,
    /// Statistical variance of each `ΔF`; zero for exact evaluation.
    pub variance: Vec<f64>,
}

/// Everything needed to evaluate realizations for one circuit and channel.
pub struct Decoder {
    grid: Grid,
    channel: NoiseChannel,
    classes: Vec<SpacetimePauli>,
    parts: Vec<Part>,
}

fn product(a: &[i8], b: &[i8]) -> Vec<i8> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

impl Decoder {
    pub fn new(
        basis: &GaugeBasis,
        channel: &NoiseChannel,
        observables: &[SpacetimePauli],
        method: &Method,
    ) -> Result<Self, ExperimentError> {
        let classes = logical_classes(basis, observables);
        let full = simplify(&build_hamiltonian(basis, channel)?);
        let halves: Vec<SpinModel> = match (full.x_part(), full.z_part()) {
            (Some(x), Some(z)) => vec![x, z],
            _ => vec![full],
        };
        let mut parts = Vec::new();
        for model in halves {
            let class_signs: Vec<Vec<i8>> = classes
                .iter()
                .map(|l| signs_from_error(&model, l).map(|r| r.eta))
                .collect::<Result<_, _>>()
                .expect("classes live on the model grid");
            if class_signs.iter().all(|s| s.iter().all(|&x| x == 1)) {
                continue;
            }
            let chains = classes
                .iter()
                .map(|l| {
                    partial_products(&decompose_logical(l), basis.grid())
                        .iter()
                        .map(|q| signs_from_error(&model, q).expect("same grid").eta)
                        .collect()
                })
                .collect();
            let engine = match method {
                Method::Exact { max_width } => Engine::Exact(EliminationPlan::new(&model, *max_width)?),
                Method::Auto => match EliminationPlan::new(&model, MAX_WIDTH) {
                    Ok(plan) => Engine::Exact(plan),
                    Err(_) => Engine::Bennett(BennettConfig::default()),
                },
                Method::Bennett(c) => Engine::Bennett(c.clone()),
                Method::Annealing(c) => Engine::Annealing(c.clone()),
            };
            parts.push(Part {
                model,
                class_signs,
                chains,
                engine,
            });
        }
        Ok(Decoder {
            grid: basis.grid(),
            channel: *channel,
            classes,
            parts,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Number of spins simulated or summed per half.
    pub fn part_sizes(&self) -> Vec<usize> {
        self.parts.iter().map(|p| p.model.num_spins()).collect()
    }

    /// Largest exact elimination width, if all parts are exact.
    pub fn exact_width(&self) -> Option<usize> {
        self.parts
            .iter()
            .map(|p| match &p.engine {
                Engine::Exact(plan) => Some(plan.width()),
                _ => None,
            })
            .try_fold(0, |acc, w| w.map(|w| acc.max(w)))
    }

    pub fn sample(&self, seed: u64, realization: u64) -> SpacetimePauli {
        sample_error(self.grid, &self.channel, seed, realization)
    }

    /// `ΔF_L` for every class at error `error`; `seed` drives Monte Carlo.
    pub fn evaluate(&self, error: &SpacetimePauli, seed: u64) -> Result<Realization, McError> {
        let k = self.classes.len();
        let mut delta_f = vec![0.0; k];
        let mut variance = vec![0.0; k];
        for part in &self.parts {
            let eta = signs_from_error(&part.model, error).expect("error on the model grid").eta;
            match &part.engine {
                Engine::Exact(plan) => {
                    let base = plan.log_partition(&part.model, &eta).expect("sizes match");
                    for c in 0..k {
                        let lz = plan
                            .log_partition(&part.model, &product(&eta, &part.class_signs[c]))
                            .expect("sizes match");
                        delta_f[c] += base - lz;
                    }
                }
                Engine::Bennett(cfg) => {
                    for c in 0..k {
                        let chain: Vec<Vec<i8>> = part.chains[c].iter().map(|s| product(&eta, s)).collect();
                        let mut cfg = cfg.clone();
                        cfg.seed = mix(&[seed, c as u64]);
                        let est = bennett_delta_f(&part.model, &chain, &cfg)?;
                        delta_f[c] += est.value;
                        variance[c] += est.variance;
                    }
                }
                Engine::Annealing(cfg) => {
                    let mut cfg = cfg.clone();
                    cfg.seed = mix(&[seed, u64::MAX]);
                    let base = population_annealing_f(&part.model, &eta, &cfg)?;
                    for c in 0..k {
                        cfg.seed = mix(&[seed, c as u64]);
                        let est = population_annealing_f(&part.model, &product(&eta, &part.class_signs[c]), &cfg)?;
                        delta_f[c] += est.value - base.value;
                        variance[c] += est.variance + base.variance;
                    }
                }
            }
        }
        Ok(Realization { delta_f, variance })
    }
}

/// SplitMix64 over a list of words; stable job and realization seeds.
pub fn mix(words: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &w in words {
        h ^= w;
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Seed of the `(d, p)` job. Independent of the circuit, so runs of
/// different compilations on the same grid see the same errors.
pub fn job_seed(seed: u64, d: usize, p: f64) -> u64 {
    mix(&[seed, d as u64, p.to_bits()])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub d: usize,
    pub p: f64,
    /// `1 −` mean softmax success.
    pub rate: f64,
    /// 95% half-width, `2σ` jackknife.
    pub ci: f64,
    pub n: usize,
    pub seed: u64,
    /// Failure rate of the hard decision (identity class most likely).
    pub argmax_rate: f64,
    pub argmax_ci: f64,
}

impl CurvePoint {
    pub fn sigma(&self) -> f64 {
        self.ci / 2.0
    }
}

pub const CSV_HEADER: &str = "d,p,rate,ci,n,seed,argmax_rate,argmax_ci";

pub fn curves_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.d, c.p, c.rate, c.ci, c.n, c.seed, c.argmax_rate, c.argmax_ci
        )
        .unwrap();
    }
    out
}

pub fn curves_from_csv(text: &str) -> Result<Vec<CurvePoint>, ExperimentError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| ExperimentError::Config("empty curve file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| ExperimentError::Config(format!("curve file lacks column `{name}`")))
    };
    let (id, ip, ir, ic) = (col("d")?, col("p")?, col("rate")?, col("ci")?);
    let opt = |name: &str| cols.iter().position(|c| *c == name);
    let (inn, is, iar, iac) = (opt("n"), opt("seed"), opt("argmax_rate"), opt("argmax_ci"));
    lines
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let err = |what: &str| ExperimentError::Config(format!("curve row {}: bad {what}", k + 1));
            let num = |i: usize, what: &str| f.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| err(what));
            let int = |i: Option<usize>| i.and_then(|i| f.get(i)).and_then(|s| s.parse::<u64>().ok()).unwrap_or(0);
            let rate = num(ir, "rate")?;
            let ci = num(ic, "ci")?;
            Ok(CurvePoint {
                d: f.get(id).and_then(|s| s.parse().ok()).ok_or_else(|| err("d"))?,
                p: num(ip, "p")?,
                rate,
                ci,
                n: int(inn) as usize,
                seed: int(is),
                argmax_rate: iar.and_then(|i| f.get(i)).and_then(|s| s.parse().ok()).unwrap_or(rate),
                argmax_ci: iac.and_then(|i| f.get(i)).and_then(|s| s.parse().ok()).unwrap_or(ci),
            })
        })
        .collect()
}

/// Per-realization success values of one `(d, p)` point.
pub struct PointSamples {
    pub soft: Vec<f64>,
    pub hard: Vec<f64>,
}

/// Samples `realizations` errors and evaluates each in parallel. Results are
/// collected in realization order, so output does not depend on threads.
pub fn sample_point(decoder: &Decoder, seed: u64, realizations: usize) -> Result<PointSamples, (u64, McError)> {
    let results: Vec<Result<Realization, (u64, McError)>> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let e = decoder.sample(seed, r);
            decoder.evaluate(&e, mix(&[seed, r])).map_err(|err| (r, err))
        })
        .collect();
    let mut soft = Vec::with_capacity(realizations);
    let mut hard = Vec::with_capacity(realizations);
    for res in results {
        let r = res?;
        soft.push(ml_success(&r.delta_f));
        hard.push(ml_argmax_success(&r.delta_f));
    }
    Ok(PointSamples { soft, hard })
}

impl PointSamples {
    pub fn to_point(&self, d: usize, p: f64, seed: u64) -> CurvePoint {
        let n = self.soft.len();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let ci = |v: &[f64]| 2.0 * jackknife_mean(v).map(f64::sqrt).unwrap_or(0.0);
        CurvePoint {
            d,
            p,
            rate: 1.0 - mean(&self.soft),
            ci: ci(&self.soft),
            n,
            seed,
            argmax_rate: 1.0 - mean(&self.hard),
            argmax_ci: ci(&self.hard),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointTiming {
    pub d: usize,
    pub p: f64,
    pub seconds: f64,
}

/// Run record written next to the curve file. Everything except `timings`
/// is a pure function of the config.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub config: ExperimentConfig,
    /// Per distance: spins per simulated half and the largest exact width.
    pub models: Vec<ModelSummary>,
    pub timings: Vec<PointTiming>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSummary {
    pub d: usize,
    pub qubits: usize,
    pub layers: usize,
    pub classes: usize,
    pub spins: Vec<usize>,
    pub exact_width: Option<usize>,
}

pub struct ExperimentOutput {
    pub points: Vec<CurvePoint>,
    pub manifest: Manifest,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let mut points = Vec::new();
    let mut timings = Vec::new();
    let mut models = Vec::new();
    for (d, circuit) in config.circuits()? {
        let basis = GaugeBasis::from_circuit(&circuit, config.keeps_redundancies());
        let observables = select_observables(&circuit, config.observables.as_deref())?;
        if logical_classes(&basis, &observables).is_empty() {
            return Err(ExperimentError::Config("the observables span no logical class".into()));
        }
        let mut summary = None;
        for &p in &config.p_values {
            let start = Instant::now();
            let seed = job_seed(config.seed, d, p);
            let point = if p == 0.0 {
                // Error-free: every realization decodes.
                CurvePoint {
                    d,
                    p,
                    rate: 0.0,
                    ci: 0.0,
                    n: config.realizations,
                    seed,
                    argmax_rate: 0.0,
                    argmax_ci: 0.0,
                }
            } else {
                let channel = config.noise.channel(p);
                let decoder = Decoder::new(&basis, &channel, &observables, &config.method)?;
                summary.get_or_insert_with(|| ModelSummary {
                    d,
                    qubits: circuit.num_qubits(),
                    layers: circuit.duration(),
                    classes: decoder.num_classes(),
                    spins: decoder.part_sizes(),
                    exact_width: decoder.exact_width(),
                });
                let samples = sample_point(&decoder, seed, config.realizations).map_err(|(realization, source)| {
                    ExperimentError::MonteCarlo {
                        d,
                        p,
                        realization,
                        source,
                    }
                })?;
                samples.to_point(d, p, seed)
            };
            timings.push(PointTiming {
                d,
                p,
                seconds: start.elapsed().as_secs_f64(),
            });
            points.push(point);
        }
        models.extend(summary);
    }
    Ok(ExperimentOutput {
        points,
        manifest: Manifest {
            program: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            models,
            timings,
        },
    })
}

/// Manifest path for a curve file: `out.csv` → `out.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

pub fn write_outputs(out: &ExperimentOutput, csv: &Path) -> Result<(), ExperimentError> {
    let io = |e: std::io::Error| ExperimentError::Io(format!("{}: {e}", csv.display()));
    std::fs::write(csv, curves_to_csv(&out.points)).map_err(io)?;
    let manifest = serde_json::to_string_pretty(&out.manifest).expect("manifest serializes");
    std::fs::write(manifest_path(csv), manifest + "\n").map_err(io)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub d: usize,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub x_c: f64,
    pub y_c: f64,
    /// 95% bootstrap intervals.
    pub x_ci: (f64, f64),
    pub y_ci: (f64, f64),
    pub window: (f64, f64),
    pub fits: Vec<LineFit>,
    pub bootstrap: usize,
}

/// Window around the first `p` where the largest distance stops beating the
/// smallest, widened by one point on each side.
pub fn default_window(points: &[CurvePoint]) -> Option<(f64, f64)> {
    let ds: Vec<usize> = {
        let mut v: Vec<usize> = points.iter().map(|c| c.d).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let (lo_d, hi_d) = (*ds.first()?, *ds.last()?);
    let rate = |d: usize| -> BTreeMap<u64, f64> {
        points.iter().filter(|c| c.d == d).map(|c| (c.p.to_bits(), c.rate)).collect()
    };
    let (small, large) = (rate(lo_d), rate(hi_d));
    let mut ps: Vec<f64> = small.keys().filter(|k| large.contains_key(k)).map(|&k| f64::from_bits(k)).collect();
    ps.sort_by(f64::total_cmp);
    if ps.len() < 2 {
        return None;
    }
    let above = |p: f64| large[&p.to_bits()] > small[&p.to_bits()];
    let flip = (0..ps.len() - 1).find(|&i| !above(ps[i]) && above(ps[i + 1]));
    match flip {
        Some(i) => Some((ps[i.saturating_sub(1)], ps[(i + 2).min(ps.len() - 1)])),
        None => Some((ps[0], ps[ps.len() - 1])),
    }
}

/// Weighted least squares `y = m x + b` with weights `1/σ²`.
fn wls(points: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, s) in points {
        let w = 1.0 / (s * s);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() <= 1e-12 * sw * sxx.max(f64::MIN_POSITIVE) {
        return None;
    }
    let m = (sw * sxy - sx * sy) / det;
    Some((m, (sy - m * sx) / sw))
}

/// Least-squares solution of `m_i x − y + b_i = 0` over all lines.
fn intersect(fits: &[(f64, f64)]) -> Option<(f64, f64)> {
    let k = fits.len() as f64;
    let sm: f64 = fits.iter().map(|f| f.0).sum();
    let smm: f64 = fits.iter().map(|f| f.0 * f.0).sum();
    let smb: f64 = fits.iter().map(|f| f.0 * f.1).sum();
    let sb: f64 = fits.iter().map(|f| f.1).sum();
    // Normal equations [[smm, −sm], [−sm, k]] (x, y) = (−smb, sb).
    let det = smm * k - sm * sm;
    if det <= 1e-12 * smm.max(f64::MIN_POSITIVE) * k {
        return None;
    }
    let x = (-smb * k + sm * sb) / det;
    let y = (smm * sb - sm * smb) / det;
    Some((x, y))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// Crossing of the per-distance linear fits inside `window`, with a
/// bootstrap interval from redrawing every point within its error bar.
pub fn estimate_threshold(
    points: &[CurvePoint],
    window: Option<(f64, f64)>,
    bootstrap: usize,
    seed: u64,
) -> Result<ThresholdEstimate, ExperimentError> {
    let window = match window {
        Some(w) => w,
        None => default_window(points).ok_or_else(|| ExperimentError::TooFewPoints("no shared p values".into()))?,
    };
    let mut groups: BTreeMap<usize, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for c in points {
        if c.p >= window.0 && c.p <= window.1 {
            // A zero error bar would pin the line; floor it at half a count.
            let floor = 0.5 / c.n.max(1) as f64;
            groups.entry(c.d).or_default().push((c.p, c.rate, c.sigma().max(floor)));
        }
    }
    groups.retain(|_, v| v.len() >= 2);
    if groups.len() < 2 {
        return Err(ExperimentError::TooFewPoints(
            "need two distances with two points each inside the window".into(),
        ));
    }
    let fit_all = |groups: &BTreeMap<usize, Vec<(f64, f64, f64)>>| -> Option<Vec<(f64, f64)>> {
        groups.values().map(|g| wls(g)).collect()
    };
    let fits = fit_all(&groups).ok_or_else(|| ExperimentError::NoCrossing("degenerate fit".into()))?;
    let (x_c, y_c) =
        intersect(&fits).ok_or_else(|| ExperimentError::NoCrossing("fitted lines are parallel".into()))?;
    if !(window.0..=window.1).contains(&x_c) {
        return Err(ExperimentError::NoCrossing(format!(
            "lines meet at {x_c}, outside the window [{}, {}]",
            window.0, window.1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(bootstrap);
    let mut ys = Vec::with_capacity(bootstrap);
    for _ in 0..bootstrap {
        let redrawn: BTreeMap<usize, Vec<(f64, f64, f64)>> = groups
            .iter()
            .map(|(&d, g)| {
                let g = g
                    .iter()
                    .map(|&(x, y, s)| (x, y + s * Normal::new(0.0, 1.0).unwrap().sample(&mut rng), s))
                    .collect();
                (d, g)
            })
            .collect();
        if let Some((x, y)) = fit_all(&redrawn).and_then(|f| intersect(&f)) {
            xs.push(x);
            ys.push(y);
        }
    }
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let ci = |v: &[f64], c: f64| {
        if v.is_empty() {
            (c, c)
        } else {
            (percentile(v, 0.025), percentile(v, 0.975))
        }
    };
    Ok(ThresholdEstimate {
        x_c,
        y_c,
        x_ci: ci(&xs, x_c),
        y_ci: ci(&ys, y_c),
        window,
        fits: groups
            .iter()
            .zip(&fits)
            .map(|((&d, g), &(slope, intercept))| LineFit {
                d,
                slope,
                intercept,
                points: g.len(),
            })
            .collect(),
        bootstrap,
    })
}

/// Energy cost difference of the cheapest deformation of the spatial
/// logical between a standard and a wiggling compilation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub family: String,
    pub p: f64,
    pub standard: f64,
    pub wiggling: f64,
    /// `standard − wiggling` at `p`.
    pub difference: f64,
    /// `p → 0` limit of `difference`.
    pub limit: f64,
}

/// Terms `(c, w)` of `Σ c K^{(w)}` for the standard and wiggling costs.
fn barrier_terms(family: &str) -> Option<(Vec<(f64, usize)>, Vec<(f64, usize)>, &'static str)> {
    match family {
        "rep_standard" | "rep_wiggling" | "repetition" => {
            Some((vec![(2.0, 1)], vec![(4.0, 2), (-2.0, 3)], "repetition"))
        }
        "toric_standard" | "toric_wiggling" | "toric" => Some((vec![(2.0, 5)], vec![(4.0, 4), (-2.0, 3)], "toric")),
        _ => None,
    }
}

pub fn barrier_analysis(family: &str, p: f64) -> Result<Barrier, ExperimentError> {
    let (std_terms, wig_terms, name) =
        barrier_terms(family).ok_or_else(|| ExperimentError::Config(format!("no barrier model for `{family}`")))?;
    if !(p > 0.0 && p <= 0.5) {
        return Err(ExperimentError::Config("p must lie in (0, 0.5]".into()));
    }
    let cost = |terms: &[(f64, usize)]| terms.iter().map(|&(c, w)| c * effective_coupling(w, 0, p, 0.0)).sum::<f64>();
    // K^{(w)} = −½ ln(w p) + O(p); the ln p parts cancel since both costs
    // carry the same total coefficient.
    let limit_cost = |terms: &[(f64, usize)]| terms.iter().map(|&(c, w)| -0.5 * c * (w as f64).ln()).sum::<f64>();
    let (standard, wiggling) = (cost(&std_terms), cost(&wig_terms));
    Ok(Barrier {
        family: name.to_string(),
        p,
        standard,
        wiggling,
        difference: standard - wiggling,
        limit: limit_cost(&std_terms) - limit_cost(&wig_terms),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ml_success_limits() {
        assert_eq!(ml_success(&[f64::INFINITY]), 1.0);
        assert_relative_eq!(ml_success(&[0.0]), 0.5);
        assert_relative_eq!(ml_success(&[0.0, 0.0, 0.0]), 0.25);
        // Wrong class favoured: success is still its share.
        assert_relative_eq!(ml_success(&[-2f64.ln()]), 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(ml_argmax_success(&[1.0, 2.0]), 1.0);
        assert_eq!(ml_argmax_success(&[-1.0]), 0.0);
        assert_eq!(ml_argmax_success(&[0.0]), 0.5);
    }

    #[test]
    fn jackknife_identities() {
        assert_eq!(jackknife(&[3.0; 5], |v| v.iter().sum::<f64>() / v.len() as f64).unwrap(), 0.0);
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0];
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let s2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        let jk = jackknife(&xs, |v| v.iter().sum::<f64>() / v.len() as f64).unwrap();
        assert_relative_eq!(jk, s2 / n, epsilon = 1e-12);
        assert_relative_eq!(jackknife_mean(&xs).unwrap(), s2 / n, epsilon = 1e-12);
        assert!(jackknife(&[1.0], |v| v[0]).is_err());
    }

    #[test]
    fn exact_line_intersection() {
        let pts: Vec<CurvePoint> = [(3, 1.0, 2.0), (5, 2.0, 2.0)]
            .iter()
            .flat_map(|&(d, m, _)| {
                [0.05, 0.1, 0.15].map(|p| CurvePoint {
                    d,
                    p,
                    rate: m * p - 0.1 * m,
                    ci: 0.01,
                    n: 100,
                    seed: 0,
                    argmax_rate: 0.0,
                    argmax_ci: 0.0,
                })
            })
            .collect();
        let t = estimate_threshold(&pts, Some((0.0, 0.2)), 50, 1).unwrap();
        assert_relative_eq!(t.x_c, 0.1, epsilon = 1e-12);
        assert_relative_eq!(t.y_c, 0.0, epsilon = 1e-12);
        assert_eq!(t.fits.len(), 2);
    }

    #[test]
    fn parallel_lines_have_no_crossing() {
        let pts: Vec<CurvePoint> = [3, 5]
            .iter()
            .flat_map(|&d| {
                [0.05, 0.1].map(|p| CurvePoint {
                    d,
                    p,
                    rate: p + d as f64,
                    ci: 0.01,
                    n: 100,
                    seed: 0,
                    argmax_rate: 0.0,
                    argmax_ci: 0.0,
                })
            })
            .collect();
        assert!(matches!(
            estimate_threshold(&pts, Some((0.0, 0.2)), 10, 1),
            Err(ExperimentError::NoCrossing(_))
        ));
    }

    #[test]
    fn barrier_limits() {
        let r = barrier_analysis("rep_standard", 1e-3).unwrap();
        assert_relative_eq!(r.limit, (4.0f64 / 3.0).ln(), epsilon = 1e-14);
        let t = barrier_analysis("toric_wiggling", 1e-3).unwrap();
        assert_relative_eq!(t.limit, (16.0f64 / 15.0).ln(), epsilon = 1e-14);
        let small = barrier_analysis("repetition", 1e-9).unwrap();
        assert!((small.difference - small.limit).abs() < 1e-6);
        assert!(barrier_analysis("toric", 0.5).unwrap().difference.abs() < 1e-12);
        assert!(barrier_analysis("surface", 0.1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let pts = vec![CurvePoint {
            d: 3,
            p: 0.1,
            rate: 0.123456789,
            ci: 0.01,
            n: 10,
            seed: 42,
            argmax_rate: 0.2,
            argmax_ci: 0.03,
        }];
        assert_eq!(curves_from_csv(&curves_to_csv(&pts)).unwrap(), pts);
    }

    #[test]
    fn config_parsing() {
        let text = r#"{"circuit": {"builtin": "rep_memory", "distances": [3]},
            "noise": "x", "p_values": [0.0, 0.1], "realizations": 20, "seed": 5}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.method, Method::Auto);
        assert!(ExperimentConfig::from_json(r#"{"circuit": {"builtin": "x", "distances": []}}"#).is_err());
        let bad = text.replace("0.1]", "0.7]");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn zero_noise_never_fails() {
        let cfg = ExperimentConfig::from_json(
            r#"{"circuit": {"builtin": "rep_memory", "distances": [3, 5]},
                "noise": "x", "p_values": [0.0], "realizations": 10}"#,
        )
        .unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert!(out.points.iter().all(|c| c.rate == 0.0 && c.ci == 0.0));
    }

    #[test]
    fn duplicate_and_gauge_observables_add_no_classes() {
        let c = builtin("rep_memory", &BuiltinParams::new(3)).unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let x = c.observables()[0].representative.clone();
        let g = b.generators()[0].clone();
        assert_eq!(logical_classes(&b, &[x.clone()]).len(), 1);
        assert_eq!(logical_classes(&b, &[x.clone(), x.clone(), g]).len(), 1);
    }

    #[test]
    fn sampled_success_matches_oracle() {
        use crate::oracle::exact_ml_success;
        let c = builtin("rep_memory", &BuiltinParams::new(3).with_duration(3)).unwrap();
        let b = GaugeBasis::from_circuit(&c, false);
        let ch = NoiseChannel::independent(0.1, 0.0);
        let obs = select_observables(&c, None).unwrap();
        let exact = exact_ml_success(&b, &obs, &ch).unwrap().success;
        let dec = Decoder::new(&b, &ch, &obs, &Method::Auto).unwrap();
        let s = sample_point(&dec, 11, 10_000).unwrap();
        let pt = s.to_point(3, 0.1, 11);
        assert!(((1.0 - pt.rate) - exact).abs() < 1.5 * pt.ci, "{} vs {exact} ± {}", 1.0 - pt.rate, pt.ci);
    }
}
