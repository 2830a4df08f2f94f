use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use subharm_core::obstacle::ObstacleError;
use subharm_core::synth::SynthError;
use subharm_core::verifier::VerifyError;

#[derive(Debug)]
pub enum RunError {
    /// A precondition failed before or during the run.
    Validation(String),
    Budget(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Budget(_) => 3,
            RunError::Io(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            RunError::Validation(m) | RunError::Budget(m) | RunError::Io(m) => m,
        }
    }
}

impl From<SynthError> for RunError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Budget { .. }
            | SynthError::CellLimit { .. }
            | SynthError::DeltaTooSmall { .. } => RunError::Budget(e.to_string()),
            other => RunError::Validation(other.to_string()),
        }
    }
}

impl From<VerifyError> for RunError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Synth(s) => s.into(),
            other => RunError::Validation(other.to_string()),
        }
    }
}

impl From<subharm_core::constructions::ConstructionError> for RunError {
    fn from(e: subharm_core::constructions::ConstructionError) -> Self {
        RunError::Validation(e.to_string())
    }
}

impl From<ObstacleError> for RunError {
    fn from(e: ObstacleError) -> Self {
        RunError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

/// Verdicts collected by a run; any `false` makes the process exit with 4.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Outcome {
    pub checks: Vec<(String, bool)>,
}

impl Outcome {
    pub fn check(&mut self, name: &str, ok: bool) {
        self.checks.push((name.to_string(), ok));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }
}

pub trait Experiment {
    fn name(&self) -> &'static str;
    /// Canonical parameters; hashed into the manifest.
    fn config(&self) -> Value;
    fn validate(&self) -> Result<(), RunError>;
    fn run(&self, ctx: &mut Context) -> Result<Outcome, RunError>;
}

#[derive(Clone, Debug, Serialize)]
struct Artifact {
    file: String,
    sha256: String,
    bytes: usize,
}

/// Output directory, artifact log and phase timings of one run.
pub struct Context {
    out: PathBuf,
    artifacts: Vec<Artifact>,
    runtimes: Vec<(String, f64)>,
}

impl Context {
    pub fn new(out: &Path) -> Result<Context, RunError> {
        fs::create_dir_all(out)?;
        Ok(Context {
            out: out.to_path_buf(),
            artifacts: Vec::new(),
            runtimes: Vec::new(),
        })
    }

    pub fn write(&mut self, file: &str, content: &str) -> Result<(), RunError> {
        fs::write(self.out.join(file), content)?;
        self.artifacts.push(Artifact {
            file: file.to_string(),
            sha256: sha256_hex(content.as_bytes()),
            bytes: content.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<(), RunError> {
        let s = serde_json::to_string_pretty(value).map_err(|e| RunError::Io(e.to_string()))?;
        self.write(file, &(s + "\n"))
    }

    pub fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let v = f();
        self.runtimes
            .push((phase.to_string(), t.elapsed().as_secs_f64()));
        v
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a Value,
    config_sha256: String,
    versions: Value,
    status: &'a str,
    exit_code: i32,
    message: Option<&'a str>,
    checks: &'a [(String, bool)],
    artifacts: &'a [Artifact],
    runtimes_s: &'a [(String, f64)],
    total_runtime_s: f64,
    started_unix_s: u64,
}

/// Validates, runs and writes `manifest.json` (also on failure). Returns
/// the exit code.
pub fn execute(exp: &dyn Experiment, out: &Path) -> i32 {
    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let t0 = Instant::now();
    let config = exp.config();
    let mut ctx = match Context::new(out) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return e.exit_code();
        }
    };
    let result = exp.validate().and_then(|_| exp.run(&mut ctx));
    let (status, code, message, outcome) = match &result {
        Ok(o) if o.passed() => ("pass", 0, None, o.clone()),
        Ok(o) => ("verdict-failure", 4, None, o.clone()),
        Err(e) => {
            let s = match e {
                RunError::Validation(_) => "validation-error",
                RunError::Budget(_) => "budget-exhausted",
                RunError::Io(_) => "io-error",
            };
            (s, e.exit_code(), Some(e.message()), Outcome::default())
        }
    };
    let manifest = Manifest {
        command: exp.name(),
        config: &config,
        config_sha256: sha256_hex(config.to_string().as_bytes()),
        versions: serde_json::json!({
            "subharm": env!("CARGO_PKG_VERSION"),
            "subharm-core": subharm_core::VERSION,
        }),
        status,
        exit_code: code,
        message,
        checks: &outcome.checks,
        artifacts: &ctx.artifacts,
        runtimes_s: &ctx.runtimes,
        total_runtime_s: t0.elapsed().as_secs_f64(),
        started_unix_s: started,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    if let Err(e) = fs::write(out.join("manifest.json"), text) {
        eprintln!("error: cannot write manifest: {e}");
        return 1;
    }
    for (name, ok) in &outcome.checks {
        println!("{:<40} {}", name, if *ok { "pass" } else { "FAIL" });
    }
    if let Some(m) = message {
        eprintln!("error: {m}");
    }
    println!("status: {status}");
    code
}
