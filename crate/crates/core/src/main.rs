use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qamech::cli::{
    self, analyze_ensemble, emit_outputs, parse_config, resolve_out_dir, with_threads, CliError, RunManifest,
    RunResults, ScenarioKind, EXIT_CONFIG, EXIT_GATE, EXIT_IO, EXIT_OK, MANIFEST_FILE,
};
use qamech::kinematics::load_ensemble;

#[derive(Parser)]
#[command(name = "qamech", version, about = "Quantum systems as forward/backward Nelson diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run any scenario (typically coherent_oscillator).
    Simulate(RunArgs),
    /// Run a stationary_ground or custom_potential scenario.
    Stationary(RunArgs),
    /// Run a barrier_tunneling scenario.
    Tunnel(RunArgs),
    /// Re-run ensemble-only analyses on a stored trajectory table.
    Analyze(AnalyzeArgs),
    /// Re-run a recorded manifest and compare output hashes.
    Replay(ReplayArgs),
    /// List the bundled scenarios.
    Scenarios,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    config: Option<PathBuf>,
    /// Name of a bundled scenario.
    #[arg(long)]
    scenario: Option<String>,
    /// Overrides sde.seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; affects speed only.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Scenario file whose `analyses` and [analysis] settings apply.
    #[arg(long)]
    config: PathBuf,
    /// Binary trajectory table.
    #[arg(long)]
    trajectories: PathBuf,
    /// Sidecar JSON of the table.
    #[arg(long)]
    ensemble: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Run manifest, or a directory containing one.
    #[arg(long)]
    manifest: PathBuf,
    /// Where to write the replayed outputs (nothing is written if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Run(qamech::Error::Io {
        path: path.display().to_string(),
        source: e,
    }))
}

fn scenario_text(args: &RunArgs) -> Result<String, CliError> {
    match (&args.config, &args.scenario) {
        (Some(p), _) => read_text(p),
        (None, Some(name)) => cli::bundled(name).map(str::to_string).ok_or_else(|| {
            let known: Vec<&str> = cli::BUNDLED.iter().map(|(n, _)| *n).collect();
            CliError::Config(vec![format!("unknown bundled scenario \"{name}\" (known: {})", known.join(", "))])
        }),
        (None, None) => Err(CliError::Config(vec!["pass --config or --scenario".into()])),
    }
}

fn report_gates(results: &RunResults) {
    for g in &results.gates {
        let value = g.value.map_or("non-finite".to_string(), |v| format!("{v:.6}"));
        let mark = if g.passed { "pass" } else { "FAIL" };
        eprintln!("  [{mark}] {:<28} value {value}  threshold {}", g.name, g.threshold);
    }
}

fn run(args: RunArgs, allowed: &[ScenarioKind], verb: &str) -> Result<i32, CliError> {
    let text = scenario_text(&args)?;
    let config = parse_config(&text).map_err(CliError::Config)?;
    if !allowed.is_empty() && !allowed.contains(&config.kind) {
        return Err(CliError::Config(vec![format!(
            "`{verb}` does not run {:?} scenarios",
            config.kind
        )]));
    }
    let dir = resolve_out_dir(args.out.as_deref(), config.output_dir.as_deref(), &config.id);
    let (manifest, results) = with_threads(args.threads, || cli::execute(&text, args.seed))??;
    emit_outputs(&results, &manifest, &dir)?;
    eprintln!("{}: {} file(s) + {MANIFEST_FILE} in {}", manifest.id, results.outputs.len(), dir.display());
    report_gates(&results);
    Ok(if results.passed() { EXIT_OK } else { EXIT_GATE })
}

fn analyze(args: AnalyzeArgs) -> Result<i32, CliError> {
    let text = read_text(&args.config)?;
    let config = parse_config(&text).map_err(CliError::Config)?;
    let ens = load_ensemble(&args.trajectories, &args.ensemble)?;
    let skipped: Vec<&str> = config
        .analyses
        .iter()
        .filter(|a| !cli::run::ENSEMBLE_ANALYSES.contains(a))
        .map(|a| cli::run::analysis_name(*a))
        .collect();
    if !skipped.is_empty() {
        eprintln!("skipping analyses that need fields: {}", skipped.join(", "));
    }
    let results = with_threads(args.threads, || analyze_ensemble(&config, &ens))??;
    let dir = resolve_out_dir(args.out.as_deref(), config.output_dir.as_deref(), &format!("{}_analysis", config.id));
    std::fs::create_dir_all(&dir).map_err(|e| qamech::Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    for o in &results.outputs {
        let path = dir.join(&o.name);
        std::fs::write(&path, &o.bytes).map_err(|e| qamech::Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    eprintln!("{} file(s) in {}", results.outputs.len(), dir.display());
    for (k, v) in &results.metrics {
        eprintln!("  {k} = {v}");
    }
    report_gates(&results);
    Ok(if results.passed() { EXIT_OK } else { EXIT_GATE })
}

fn replay(args: ReplayArgs) -> Result<i32, CliError> {
    let path = if args.manifest.is_dir() { args.manifest.join(MANIFEST_FILE) } else { args.manifest.clone() };
    let recorded = RunManifest::read(&path)?;
    let (report, results) = with_threads(args.threads, || cli::replay(&recorded))??;
    if let Some(dir) = &args.out {
        emit_outputs(&results, &report.manifest, dir)?;
    }
    for (file, a, b) in &report.files {
        let status = match (a, b) {
            (Some(a), Some(b)) if a == b => "identical",
            (Some(_), Some(_)) => "DIFFERS",
            (Some(_), None) => "MISSING",
            (None, _) => "EXTRA",
        };
        eprintln!("  {status:<9} {file}");
    }
    if report.identical() {
        eprintln!("replay of {} is byte-identical", recorded.id);
        Ok(EXIT_OK)
    } else {
        eprintln!("replay of {} differs from the manifest", recorded.id);
        Ok(EXIT_GATE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => run(a, &[], "simulate"),
        Command::Stationary(a) => run(
            a,
            &[ScenarioKind::StationaryGround, ScenarioKind::CustomPotential],
            "stationary",
        ),
        Command::Tunnel(a) => run(a, &[ScenarioKind::BarrierTunneling], "tunnel"),
        Command::Analyze(a) => analyze(a),
        Command::Replay(a) => replay(a),
        Command::Scenarios => {
            for (name, text) in cli::BUNDLED {
                let first = text.lines().next().unwrap_or("").trim_start_matches('#').trim();
                println!("{name:<18} {first}");
            }
            Ok(EXIT_OK)
        }
    };
    let code = match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    debug_assert!([EXIT_OK, EXIT_CONFIG, EXIT_GATE, EXIT_IO].contains(&code));
    ExitCode::from(code as u8)
}
