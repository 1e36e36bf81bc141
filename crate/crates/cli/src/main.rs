//! Command-line front end: compile circuits to spin models, check them
//! exhaustively, run decoding experiments and fit thresholds.
//!
//! Exit codes: 0 on success, 1 for bad input or configuration, 2 when the
//! numerics fail (Monte Carlo breakdown, no crossing, elimination too wide).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stspin::circuit::{builtin, parse, BuiltinParams, Circuit, CnotSchedule};
use stspin::experiment::{
    curves_from_csv, curves_to_csv, estimate_threshold, manifest_path, run_experiment, write_outputs,
    ExperimentConfig, ExperimentError, NoiseFamily,
};
use stspin::oracle::{exact_ml_success, ln_coset_probability};
use stspin::pauli::SpacetimePauli;
use stspin::spacetime::{find_gauge_symmetries, validate, GaugeBasis};
use stspin::spinmodel::{build_hamiltonian, simplify, NoiseChannel};

#[derive(Parser)]
#[command(name = "stspin", version, about = "Spin models and maximum-likelihood decoding for stabilizer circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print gauge generators, redundancies and observable checks.
    Inspect {
        #[command(flatten)]
        circuit: CircuitArgs,
    },
    /// Write the Hamiltonian as a model file.
    BuildModel {
        #[command(flatten)]
        circuit: CircuitArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Integrate out low-degree spins first.
        #[arg(long)]
        simplify: bool,
        /// Model file path; stdout if absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the interaction hypergraph as JSON.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Exact maximum-likelihood success by enumerating every error.
    Oracle {
        #[command(flatten)]
        circuit: CircuitArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Only report the coset probability of this error ("X 0@0.5 ...").
        #[arg(long)]
        coset: Option<String>,
    },
    /// Run a decoding experiment from a JSON config.
    RunExperiment {
        config: PathBuf,
        /// Curve CSV path; overrides the config. Stdout if neither is set.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Use the fully reduced generator set.
        #[arg(long)]
        gauge_fix: bool,
    },
    /// Fit the crossing of the curves in a CSV file.
    EstimateThreshold {
        input: PathBuf,
        /// Fit window `LO HI`; picked from the data if absent.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        window: Option<Vec<f64>>,
        #[arg(long, default_value_t = 2000)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct CircuitArgs {
    /// Builtin family, e.g. rep_memory or toric_standard.
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    builtin: Option<String>,
    /// Circuit file in the text format.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(short, long, default_value_t = 3)]
    d: usize,
    /// Duration T; each builtin has its own default.
    #[arg(long)]
    duration: Option<usize>,
    /// Transversal CNOT placement for rep_cnot: midpoint or every_cell.
    #[arg(long)]
    schedule: Option<String>,
    /// Use the fully reduced generator set even for toric circuits.
    #[arg(long)]
    gauge_fix: bool,
}

impl CircuitArgs {
    fn load(&self) -> Result<Circuit> {
        if let Some(path) = &self.file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(parse(&text)?);
        }
        let name = self.builtin.as_deref().expect("clap requires a circuit source");
        let schedule = self
            .schedule
            .as_deref()
            .map(|s| serde_json::from_value::<CnotSchedule>(json!(s)).map_err(|_| anyhow!("unknown schedule `{s}`")))
            .transpose()?;
        let params = BuiltinParams {
            d: self.d,
            duration: self.duration,
            cnot_schedule: schedule,
        };
        Ok(builtin(name, &params)?)
    }

    fn basis(&self, circuit: &Circuit) -> GaugeBasis {
        let toric = self.builtin.as_deref().is_some_and(|b| b.starts_with("toric"));
        GaugeBasis::from_circuit(circuit, toric && !self.gauge_fix)
    }
}

#[derive(Args)]
struct NoiseArgs {
    /// Noise family: x, z, xz or depolarizing.
    #[arg(long, default_value = "x")]
    noise: String,
    #[arg(short, long)]
    p: f64,
}

impl NoiseArgs {
    fn channel(&self) -> Result<NoiseChannel> {
        let family: NoiseFamily = serde_json::from_value(json!(self.noise.as_str()))
            .map_err(|_| anyhow!("unknown noise family `{}`", self.noise))?;
        let channel = family.channel(self.p);
        channel.validate()?;
        Ok(channel)
    }
}

/// Errors that should exit with status 2.
#[derive(Debug)]
struct Numerical(anyhow::Error);

impl std::fmt::Display for Numerical {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Numerical {}

fn experiment_error(e: ExperimentError) -> anyhow::Error {
    if e.is_numerical() {
        Numerical(e.into()).into()
    } else {
        e.into()
    }
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => emit(text),
    }
}

fn inspect(args: &CircuitArgs) -> Result<()> {
    let circuit = args.load()?;
    let basis = args.basis(&circuit);
    let mut out = format!(
        "# qubits {} layers {} generators {} rank {} css {}\n",
        circuit.num_qubits(),
        circuit.duration(),
        basis.len(),
        basis.rank(),
        basis.is_css()
    );
    for (i, (g, origin)) in basis.generators().iter().zip(basis.origins()).enumerate() {
        writeln!(out, "g{i} [{origin}] {g}")?;
    }
    for r in find_gauge_symmetries(&basis) {
        let ids: Vec<String> = r.iter().map(|i| format!("g{i}")).collect();
        writeln!(out, "redundancy {}", ids.join(" "))?;
    }
    for o in circuit.observables() {
        writeln!(out, "observable {} {}", o.name, o.representative)?;
    }
    for issue in validate(&circuit) {
        writeln!(out, "issue {issue}")?;
    }
    emit(&out)
}

fn build_model(
    args: &CircuitArgs,
    noise: &NoiseArgs,
    reduce: bool,
    output: Option<&Path>,
    graph: Option<&Path>,
) -> Result<()> {
    let circuit = args.load()?;
    let basis = args.basis(&circuit);
    let mut model = build_hamiltonian(&basis, &noise.channel()?)?;
    if reduce {
        model = simplify(&model);
    }
    write_or_print(output, &model.to_model_file())?;
    if let Some(g) = graph {
        let text = serde_json::to_string_pretty(&model.graph_json())? + "\n";
        std::fs::write(g, text).with_context(|| format!("writing {}", g.display()))?;
    }
    Ok(())
}

fn oracle(args: &CircuitArgs, noise: &NoiseArgs, coset: Option<&str>) -> Result<()> {
    let circuit = args.load()?;
    let basis = args.basis(&circuit);
    let channel = noise.channel()?;
    let numerical = |e: stspin::oracle::OracleError| anyhow::Error::from(Numerical(e.into()));
    let out = match coset {
        Some(text) => {
            let error = SpacetimePauli::parse_tokens(circuit.grid(), text)?;
            let ln_p = ln_coset_probability(&error, &basis, &channel).map_err(numerical)?;
            json!({ "error": error.to_string(), "ln_probability": ln_p, "probability": ln_p.exp() })
        }
        None => {
            let observables: Vec<SpacetimePauli> =
                circuit.observables().iter().map(|o| o.representative.clone()).collect();
            serde_json::to_value(exact_ml_success(&basis, &observables, &channel).map_err(numerical)?)?
        }
    };
    emit(&(serde_json::to_string_pretty(&out)? + "\n"))
}

fn run(config: &Path, output: Option<PathBuf>, gauge_fix: bool) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if gauge_fix {
        cfg.gauge_fix = Some(true);
    }
    if output.is_some() {
        cfg.output = output;
    }
    let out = run_experiment(&cfg).map_err(experiment_error)?;
    match &cfg.output {
        Some(csv) => {
            write_outputs(&out, csv)?;
            eprintln!("wrote {} and {}", csv.display(), manifest_path(csv).display());
        }
        None => emit(&curves_to_csv(&out.points))?,
    }
    Ok(())
}

fn threshold(input: &Path, window: Option<Vec<f64>>, bootstrap: usize, seed: u64) -> Result<()> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let points = curves_from_csv(&text)?;
    let window = window.map(|w| (w[0], w[1]));
    let est = estimate_threshold(&points, window, bootstrap, seed).map_err(experiment_error)?;
    emit(&(serde_json::to_string_pretty(&est)? + "\n"))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Inspect { circuit } => inspect(&circuit),
        Command::BuildModel {
            circuit,
            noise,
            simplify,
            output,
            graph,
        } => build_model(&circuit, &noise, simplify, output.as_deref(), graph.as_deref()),
        Command::Oracle { circuit, noise, coset } => oracle(&circuit, &noise, coset.as_deref()),
        Command::RunExperiment {
            config,
            output,
            gauge_fix,
        } => run(&config, output, gauge_fix),
        Command::EstimateThreshold {
            input,
            window,
            bootstrap,
            seed,
        } => threshold(&input, window, bootstrap, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Numerical>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
