//! Batch front end: scenario files in, CSV/JSON/SVG artifacts and a run
//! manifest out.

pub mod config;
pub mod run;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use config::{parse_config, AnalysisKind, ScenarioConfig, ScenarioKind};
pub use run::{analyze_ensemble, run_scenario, Gate, OutputFile, RunResults};

use crate::error::{Error, Result};
use crate::kinematics::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.json";
/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QAMECH_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GATE: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Scenarios shipped with the binary, by name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("oscillator_paths", include_str!("../../scenarios/oscillator_paths.toml")),
    ("ho_ground_truth", include_str!("../../scenarios/ho_ground_truth.toml")),
    ("coherent_duality", include_str!("../../scenarios/coherent_duality.toml")),
    ("barrier", include_str!("../../scenarios/barrier.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Exit status for an error raised while running a scenario.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::InvalidArgument(_)
        | Error::InvertedBounds { .. }
        | Error::StabilityGuard { .. }
        | Error::FieldCoverage { .. }
        | Error::HorizonMismatch(_)
        | Error::DegenerateSegmentation(_)
        | Error::Format(_) => EXIT_CONFIG,
        _ => EXIT_GATE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub analysis: String,
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Reproducibility record, written last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub id: String,
    pub scenario: String,
    pub seed: u64,
    /// Scenario text as given; replay re-parses it and applies `seed`.
    pub config_text: String,
    /// Parsed configuration with defaults filled in.
    pub config: serde_json::Value,
    pub field_checksum: String,
    pub outputs: Vec<ManifestEntry>,
    pub gates: Vec<Gate>,
    pub metrics: BTreeMap<String, f64>,
    pub passed: bool,
    pub started_unix: u64,
    pub wall_clock_s: f64,
    pub threads: usize,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("run manifest: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn build_manifest(config: &ScenarioConfig, text: &str, results: &RunResults, started: SystemTime, wall: f64) -> RunManifest {
    RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        id: config.id.clone(),
        scenario: serde_json::to_value(config.kind)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
        seed: config.sde.seed,
        config_text: text.to_string(),
        config: serde_json::to_value(config).expect("config serializes"),
        field_checksum: results.field_checksum.clone(),
        outputs: results
            .outputs
            .iter()
            .map(|o| ManifestEntry {
                analysis: o.analysis.clone(),
                file: o.name.clone(),
                sha256: sha256_hex(&o.bytes),
                bytes: o.bytes.len(),
            })
            .collect(),
        gates: results.gates.clone(),
        metrics: results.metrics.clone(),
        passed: results.passed(),
        started_unix: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        wall_clock_s: wall,
        threads: rayon::current_num_threads(),
    }
}

/// Writes every output and then the manifest. On any failure the files
/// written so far are removed.
pub fn emit_outputs(results: &RunResults, manifest: &RunManifest, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let outcome = (|| {
        for o in &results.outputs {
            let path = dir.join(&o.name);
            fs::write(&path, &o.bytes).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    })();
    match outcome {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            Err(e)
        }
    }
}

/// Parses and runs a scenario text, returning the manifest and in-memory results.
pub fn execute(text: &str, seed: Option<u64>) -> std::result::Result<(RunManifest, RunResults), CliError> {
    let mut config = parse_config(text).map_err(CliError::Config)?;
    if let Some(seed) = seed {
        config.sde.seed = seed;
    }
    let started = SystemTime::now();
    let clock = Instant::now();
    let results = run_scenario(&config).map_err(CliError::Run)?;
    let manifest = build_manifest(&config, text, &results, started, clock.elapsed().as_secs_f64());
    Ok((manifest, results))
}

/// Failure of a CLI action, carrying enough to pick the exit code.
#[derive(Debug)]
pub enum CliError {
    Config(Vec<String>),
    Run(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(e) => exit_code(e),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(errs) => {
                writeln!(f, "configuration has {} error(s):", errs.len())?;
                for e in errs {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

/// Per-file comparison of a replay against the recorded manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub manifest: RunManifest,
    /// `(file, recorded sha256, replayed sha256)`; either side may be missing.
    pub files: Vec<(String, Option<String>, Option<String>)>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.files.iter().all(|(_, a, b)| a.is_some() && a == b)
    }
}

/// Re-runs the manifest's configuration with its seed and compares output hashes.
pub fn replay(recorded: &RunManifest) -> std::result::Result<(ReplayReport, RunResults), CliError> {
    let (manifest, results) = execute(&recorded.config_text, Some(recorded.seed))?;
    let mut files: BTreeMap<String, (Option<String>, Option<String>)> = BTreeMap::new();
    for e in &recorded.outputs {
        files.entry(e.file.clone()).or_default().0 = Some(e.sha256.clone());
    }
    for e in &manifest.outputs {
        files.entry(e.file.clone()).or_default().1 = Some(e.sha256.clone());
    }
    let files = files.into_iter().map(|(f, (a, b))| (f, a, b)).collect();
    Ok((ReplayReport { manifest, files }, results))
}

/// Runs `f` on a dedicated pool of `threads` workers (`None` keeps the global pool).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Output directory precedence: explicit flag, then environment, then the
/// config's `output_dir`, then `out/<id>`.
pub fn resolve_out_dir(flag: Option<&Path>, config_dir: Option<&Path>, id: &str) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    config_dir.map_or_else(|| Path::new("out").join(id), Path::to_path_buf)
}
