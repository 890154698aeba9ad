//! Command-line front end: lattice construction, circuit compilation,
//! noisy simulation, decoding, mitigation arithmetic, full experiments,
//! closed-form analytics, and parameter sweeps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 capacity error,
//! 4 mitigation refusal, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use z2higgs::analytics::{
    bending_frequency, effective_plaquette, glassy_amplitude, m0_ansatz_angle, m0_gap,
    period, trotter_error_bound, yoyo_frequency,
};
use z2higgs::compiler::{trotter_circuit, CompileOptions};
use z2higgs::experiments::{run_quench, sweep, ExperimentConfig, SweepOverride};
use z2higgs::io::{
    aggregate_sweep, decoder_report, emit_decoder_report, emit_manifest, emit_shot_table,
    emit_time_series_csv, emit_time_series_jsonl, load_config, load_shot_table, RunManifest,
};
use z2higgs::lattice::{Lattice, LatticeKind};
use z2higgs::mitigation::{odr_mitigate, CalibrationRecord, REFUSAL_THRESHOLD};
use z2higgs::model::prepare_string_state;
use z2higgs::sim::run_trajectories;
use z2higgs::{Error, Result};

#[derive(Parser)]
#[command(name = "z2sim", version, about = "Z2-Higgs quench simulation workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lattice inspection.
    Lattice {
        #[command(subcommand)]
        command: LatticeCommand,
    },
    /// Compile the Trotter circuit for one time point and print it as JSON.
    Compile {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Evolution time; defaults to the last configured time.
        #[arg(long)]
        time: Option<f64>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run noisy trajectories for one time point and write the shot table.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        time: Option<f64>,
        /// Output shot table (JSON lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a stored shot table and write the decoder report.
    Decode {
        #[arg(long)]
        config: PathBuf,
        /// Shot table produced by `simulate`.
        #[arg(long)]
        shots: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scalar decoherence-renormalization arithmetic.
    Mitigate {
        /// Noisy expectation value.
        #[arg(long)]
        noisy: f64,
        /// Ideal calibration value.
        #[arg(long)]
        ideal: f64,
        /// Measured calibration value.
        #[arg(long)]
        measured: f64,
        /// Refusal threshold on the calibration factor.
        #[arg(long, default_value_t = REFUSAL_THRESHOLD)]
        threshold: f64,
    },
    /// Full pipeline experiments.
    Experiment {
        #[command(subcommand)]
        command: ExperimentCommand,
    },
    /// Closed-form analytics.
    Analytics {
        #[command(subcommand)]
        command: AnalyticsCommand,
    },
    /// Run a grid of overrides on a base config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// TOML file with [[points]] override tables.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = ".")]
        outdir: PathBuf,
    },
}

#[derive(Subcommand)]
enum LatticeCommand {
    /// Build a lattice and print its layout and counts.
    Build {
        /// flake | brick | chain | cycle
        #[arg(long)]
        kind: String,
        /// Flake radius.
        #[arg(long)]
        radius: Option<usize>,
        /// Brick rows.
        #[arg(long)]
        rows: Option<usize>,
        /// Brick columns.
        #[arg(long)]
        cols: Option<usize>,
        /// Chain/cycle node count.
        #[arg(long)]
        nodes: Option<usize>,
        /// Output file for the JSON summary (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Run the configured quench end to end and write series + manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        outdir: PathBuf,
    },
}

#[derive(Subcommand)]
enum AnalyticsCommand {
    /// Evaluate a closed-form quantity from a config's parameters.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// gap | angle | yoyo_period | bending_period | plaquette |
        /// glassy_amplitude | trotter_bound
        #[arg(long)]
        quantity: String,
        /// Time argument; defaults to the last configured time.
        #[arg(long)]
        time: Option<f64>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::RegisterOverCap { .. } | Error::RegisterMismatch { .. } => 3,
        Error::MitigationRefused { .. } => 4,
        Error::Config(_)
        | Error::Json(_)
        | Error::UnknownNode(_)
        | Error::UnknownEdge(_)
        | Error::InvalidPath(_)
        | Error::BitstringLength { .. }
        | Error::PostselectThreshold { .. }
        | Error::EmptySamples
        | Error::TooFewResamples(_)
        | Error::NonDiagonalObservable(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// The only supported environment overrides: seed and output directory.
fn env_seed() -> Result<Option<u64>> {
    match std::env::var("Z2SIM_SEED") {
        Ok(s) => Ok(Some(s.parse().map_err(|_| {
            Error::Config(format!("Z2SIM_SEED is not an integer: {s:?}"))
        })?)),
        Err(_) => Ok(None),
    }
}

fn env_outdir(cli_choice: PathBuf) -> PathBuf {
    std::env::var_os("Z2SIM_OUTDIR").map(PathBuf::from).unwrap_or(cli_choice)
}

fn load_config_with_env(path: &PathBuf) -> Result<ExperimentConfig> {
    let mut config = load_config(path)?;
    if let Some(seed) = env_seed()? {
        config.master_seed = seed;
    }
    Ok(config)
}

fn pick_time(config: &ExperimentConfig, time: Option<f64>) -> f64 {
    time.unwrap_or_else(|| *config.times.last().expect("validated non-empty"))
}

fn compile_options(config: &ExperimentConfig) -> CompileOptions {
    CompileOptions {
        gdd_phase_seed: config.toggles.gdd.then_some(config.master_seed ^ 0x6764),
        twirl_seed: config.toggles.twirl.then_some(config.master_seed ^ 0x7477),
    }
}

fn write_or_print(out: Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lattice { command: LatticeCommand::Build { kind, radius, rows, cols, nodes, out } } => {
            let need = |opt: Option<usize>, name: &str| {
                opt.ok_or_else(|| Error::Config(format!("--{name} is required for kind {kind:?}")))
            };
            let kind = match kind.as_str() {
                "flake" => LatticeKind::Flake { radius: need(radius, "radius")? },
                "brick" => LatticeKind::Brick {
                    rows: need(rows, "rows")?,
                    cols: need(cols, "cols")?,
                },
                "chain" => LatticeKind::Chain { nodes: need(nodes, "nodes")? },
                "cycle" => LatticeKind::Cycle { nodes: need(nodes, "nodes")? },
                other => return Err(Error::Config(format!("unknown lattice kind {other:?}"))),
            };
            let lattice = Lattice::from_kind(kind);
            eprintln!("{}", lattice.to_text());
            let summary = serde_json::json!({
                "kind": kind,
                "nodes": lattice.num_nodes(),
                "edges": lattice.num_edges(),
                "qubits": lattice.num_qubits(),
                "degree_2_nodes": lattice.num_degree2(),
                "degree_3_nodes": lattice.num_degree3(),
                "edge_list": lattice.edges(),
            });
            write_or_print(out, &serde_json::to_string_pretty(&summary)?)
        }
        Command::Compile { config, time, out } => {
            let config = load_config_with_env(&config)?;
            let t = pick_time(&config, time);
            let lattice = Lattice::from_kind(config.lattice);
            let circuit =
                trotter_circuit(&lattice, &config.quench_params(t), &compile_options(&config))?;
            write_or_print(out, &circuit.to_json()?)
        }
        Command::Simulate { config, time, out } => {
            let config = load_config_with_env(&config)?;
            let t = pick_time(&config, time);
            let lattice = Lattice::from_kind(config.lattice);
            let circuit =
                trotter_circuit(&lattice, &config.quench_params(t), &compile_options(&config))?;
            let initial = prepare_string_state(&lattice, &config.initial_strings)?;
            let table = run_trajectories(
                &circuit,
                &initial,
                &config.noise,
                config.shots,
                config.master_seed,
            )?;
            emit_shot_table(&table, &z2higgs::experiments::config_hash(&config), out)
        }
        Command::Decode { config, shots, out } => {
            let config = load_config_with_env(&config)?;
            let lattice = Lattice::from_kind(config.lattice);
            let (table, hash) = load_shot_table(shots)?;
            let report = decoder_report(&table, &lattice, &hash)?;
            emit_decoder_report(&report, out)?;
            println!(
                "{}",
                serde_json::json!({
                    "shots": report.shots.len(),
                    "mean_flips": report.mean_flips,
                    "histogram": report.histogram,
                })
            );
            Ok(())
        }
        Command::Mitigate { noisy, ideal, measured, threshold } => {
            let record = CalibrationRecord::new("cli", ideal, measured);
            let mitigated = odr_mitigate(noisy, &record, threshold)?;
            println!(
                "{}",
                serde_json::json!({
                    "noisy": noisy,
                    "factor": record.factor,
                    "clamped": record.clamped,
                    "mitigated": mitigated,
                })
            );
            Ok(())
        }
        Command::Experiment { command: ExperimentCommand::Run { config, outdir } } => {
            let outdir = env_outdir(outdir);
            let config = load_config_with_env(&config)?;
            let series = run_quench(&config)?;
            let manifest = RunManifest::from_series(&config, &series)?;
            std::fs::create_dir_all(&outdir)?;
            emit_time_series_jsonl(&series, outdir.join("series.jsonl"))?;
            emit_time_series_csv(&series, outdir.join("series.csv"))?;
            emit_manifest(&manifest, outdir.join("manifest.json"))?;
            println!(
                "{}",
                serde_json::json!({
                    "outdir": outdir,
                    "config_hash": series.config_hash,
                    "times": series.times.len(),
                    "observables": series.observables,
                })
            );
            Ok(())
        }
        Command::Analytics { command: AnalyticsCommand::Eval { config, quantity, time } } => {
            let config = load_config_with_env(&config)?;
            let (m, g, lambda) = (config.m, config.g, config.lambda);
            let t = pick_time(&config, time);
            let value = match quantity.as_str() {
                "gap" => m0_gap(g, lambda),
                "angle" => m0_ansatz_angle(g, lambda)?,
                "yoyo_period" => period(yoyo_frequency(g)),
                "bending_period" => period(bending_frequency(m, g, lambda)?),
                "plaquette" => effective_plaquette(m, lambda, 0.25)?,
                "glassy_amplitude" => glassy_amplitude(g, lambda, t),
                "trotter_bound" => {
                    let lattice = Lattice::from_kind(config.lattice);
                    let p = config.quench_params(t);
                    trotter_error_bound(&lattice, p.m, p.g, p.lambda, p.t, p.dt)
                }
                other => {
                    return Err(Error::Config(format!("unknown quantity {other:?}")))
                }
            };
            println!("{}", serde_json::json!({ "quantity": quantity, "value": value }));
            Ok(())
        }
        Command::Sweep { config, grid, outdir } => {
            let outdir = env_outdir(outdir);
            let base = load_config_with_env(&config)?;
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct GridFile {
                #[serde(default)]
                points: Vec<SweepOverride>,
            }
            let grid_text = std::fs::read_to_string(grid)?;
            let grid: GridFile =
                toml::from_str(&grid_text).map_err(|e| Error::Config(e.to_string()))?;
            let runs = sweep(&base, &grid.points)?;
            std::fs::create_dir_all(&outdir)?;
            let mut entries = Vec::new();
            for (i, (label, series)) in runs.into_iter().enumerate() {
                // sweep() preserves grid order; an empty grid is one base run.
                let point_config = match grid.points.get(i) {
                    Some(point) => point.apply(&base),
                    None => base.clone(),
                };
                emit_time_series_jsonl(&series, outdir.join(format!("{label}.jsonl")))?;
                emit_time_series_csv(&series, outdir.join(format!("{label}.csv")))?;
                let manifest = RunManifest::from_series(&point_config, &series)?;
                entries.push((label, series, manifest));
            }
            aggregate_sweep(&entries, outdir.join("sweep.jsonl"))?;
            println!(
                "{}",
                serde_json::json!({ "outdir": outdir, "points": entries.len() })
            );
            Ok(())
        }
    }
}
