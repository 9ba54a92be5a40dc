//! Command-line bindings over the `riskscale` library.
//!
//! Each subcommand parses its inputs, calls one library operation and writes
//! the result. Exit codes: 0 success, 1 usage or validation error, 2 internal
//! failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use riskscale::audit::{self, CohortOrigin};
use riskscale::cohort::{self, Cohort, PopulationSpec, SyntheticCohortConfig};
use riskscale::feedback::{self, FeedbackSpec};
use riskscale::metrics::{self, ScoreDistribution};
use riskscale::psychometrics;
use riskscale::scale::{self, Assessment, ScaleDefinition};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "riskscale", version, about = "Score, sweep and audit a 20-item risk scale")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score one assessment (JSON) and print the result with its disclosure block.
    Score {
        #[command(flatten)]
        scale: ScaleArgs,
        /// Assessment JSON file.
        assessment: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the cutoff sweep of a cohort as CSV.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        scale: ScaleArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an audit report at an explicit FN:FP cost ratio.
    Audit {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        scale: ScaleArgs,
        /// Cost of one false negative relative to one false positive.
        #[arg(long)]
        cost_ratio: f64,
        /// Assessment JSON files to disclose in the report.
        #[arg(long = "case")]
        cases: Vec<PathBuf>,
        /// Writes audit.md, audit.json, cutoff_curve.csv and roc.csv here;
        /// without it the Markdown report goes to stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write the reference distribution rebuilt from published operating points.
    Reconstruct {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic item-level cohort.
    Generate {
        #[command(flatten)]
        scale: ScaleArgs,
        #[arg(long)]
        seed: u64,
        /// Population TOML; the illustrative population when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cronbach's alpha, total-score t test and item chi-squared on an item cohort.
    Psych {
        #[command(flatten)]
        scale: ScaleArgs,
        /// Item-form cohort CSV.
        matrix: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the feedback-loop simulation.
    Simulate {
        #[command(flatten)]
        scale: ScaleArgs,
        /// Simulation TOML.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Writes trace.csv and summary.json here; without it the summary
        /// goes to stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    /// Built-in scale: epv or epv-r.
    #[arg(long, default_value = "epv", conflicts_with = "scale_file")]
    pub scale: String,
    /// Custom scale TOML.
    #[arg(long)]
    pub scale_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Use the reference distribution.
    #[arg(long)]
    pub anchors: bool,
    /// Cohort CSV (score or item form).
    #[arg(long)]
    pub cohort: Option<PathBuf>,
}

/// A user-facing failure: machine-readable code plus context.
#[derive(Debug)]
pub struct Failure {
    pub code: &'static str,
    pub message: String,
}

impl Failure {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

macro_rules! impl_from_module_error {
    ($($ty:ty),*) => {$(
        impl From<$ty> for Failure {
            fn from(e: $ty) -> Self {
                Failure::new(e.code(), e.to_string())
            }
        }
    )*};
}

impl_from_module_error!(
    scale::ScaleError,
    scale::ScoreError,
    cohort::CohortError,
    metrics::MetricsError,
    psychometrics::PsychError,
    feedback::FeedbackError,
    audit::AuditError
);

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, target: Option<&Path>, body: &str) -> Result<(), Failure> {
    match target {
        Some(path) => fs::write(path, body).map_err(|e| Failure::new("io", format!("{}: {e}", path.display()))),
        None => out.write_all(body.as_bytes()).map_err(|e| Failure::new("io", format!("stdout: {e}"))),
    }
}

fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::new("io", format!("{}: {e}", dir.display())))?;
    for (name, body) in files {
        emit(&mut std::io::sink(), Some(&dir.join(name)), body)?;
    }
    Ok(())
}

fn load_scale(args: &ScaleArgs) -> Result<ScaleDefinition, Failure> {
    match &args.scale_file {
        Some(path) => Ok(scale::load_scale(&read(path)?)?),
        None => Ok(ScaleDefinition::builtin(&args.scale)?),
    }
}

fn load_assessment(path: &Path) -> Result<Assessment, Failure> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::new("bad-assessment", format!("{}: {e}", path.display())))
}

fn json(value: serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(&value).expect("outputs are always serializable");
    s.push('\n');
    s
}

fn load_source(
    source: &SourceArgs,
    scale: &ScaleArgs,
) -> Result<(ScaleDefinition, ScoreDistribution, CohortOrigin), Failure> {
    let scale = load_scale(scale)?;
    if source.anchors {
        let dist = cohort::reconstruct_anchor_cohort();
        if scale.max_total() != dist.max_total() {
            return Err(Failure::new("scale-mismatch", "the reference distribution is defined on the 0/1 scale (epv)"));
        }
        return Ok((scale, dist, CohortOrigin::Anchors));
    }
    let path = source.cohort.as_deref().expect("clap enforces one source");
    let file = fs::File::open(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))?;
    let loaded = cohort::load_cohort(file, &scale)
        .map_err(|e| Failure::new(e.code(), format!("{}: {e}", path.display())))?;
    let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    Ok((scale.clone(), loaded.distribution(&scale), CohortOrigin::Upload { name }))
}

/// Score output: the result and its disclosure block.
pub fn score_document(scale: &ScaleDefinition, assessment: &Assessment) -> Result<String, Failure> {
    let result = scale::score(scale, assessment)?;
    let disclosure = audit::case_disclosure(&result, scale);
    Ok(json(serde_json::json!({
        "schema_version": audit::SCHEMA_VERSION,
        "case_id": assessment.case_id,
        "scale_id": scale.scale_id(),
        "result": result,
        "disclosure": disclosure,
    })))
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Score { scale, assessment, out: target } => {
            let scale = load_scale(&scale)?;
            let body = score_document(&scale, &load_assessment(&assessment)?)?;
            emit(out, target.as_deref(), &body)
        }
        Command::Sweep { source, scale, out: target } => {
            let (_, dist, _) = load_source(&source, &scale)?;
            emit(out, target.as_deref(), &metrics::sweep_csv(&dist)?)
        }
        Command::Audit { source, scale, cost_ratio, cases, out_dir } => {
            let (scale, dist, origin) = load_source(&source, &scale)?;
            let mut report = audit::build_audit(&dist, &scale, origin, cost_ratio)?;
            for path in &cases {
                let assessment = load_assessment(path)?;
                let result = scale::score(&scale, &assessment)?;
                let id = if assessment.case_id.is_empty() { path.display().to_string() } else { assessment.case_id };
                report.add_case(id, &result, &scale);
            }
            match out_dir {
                Some(dir) => write_files(
                    &dir,
                    &[
                        ("audit.md", report.to_markdown()),
                        ("audit.json", report.to_json() + "\n"),
                        ("cutoff_curve.csv", audit::cutoff_curve_csv(&dist)?),
                        ("roc.csv", audit::roc_csv(&dist)?),
                    ],
                ),
                None => emit(out, None, &report.to_markdown()),
            }
        }
        Command::Reconstruct { out: target } => {
            emit(out, target.as_deref(), &cohort::distribution_csv(&cohort::reconstruct_anchor_cohort()))
        }
        Command::Generate { scale, seed, config, out: target } => {
            let scale = load_scale(&scale)?;
            let population = match config {
                Some(path) => PopulationSpec::parse(&read(&path)?)?,
                None => PopulationSpec::illustrative(),
            };
            let matrix = cohort::generate_synthetic(&SyntheticCohortConfig { population, seed }, &scale)?;
            emit(out, target.as_deref(), &cohort::matrix_csv(&matrix))
        }
        Command::Psych { scale, matrix, out: target } => {
            let scale = load_scale(&scale)?;
            let file = fs::File::open(&matrix).map_err(|e| Failure::new("io", format!("{}: {e}", matrix.display())))?;
            let Cohort::Items(m) = cohort::load_cohort(file, &scale)
                .map_err(|e| Failure::new(e.code(), format!("{}: {e}", matrix.display())))?
            else {
                return Err(Failure::new("cohort-header", "psych needs an item-form cohort (item_1..item_N,label)"));
            };
            let summary = psychometrics::summarize::<f64>(&m)?;
            emit(out, target.as_deref(), &json(serde_json::json!(summary)))
        }
        Command::Simulate { scale, config, seed, out_dir } => {
            let scale = load_scale(&scale)?;
            let spec = FeedbackSpec::parse(&read(&config)?)?;
            let trace = feedback::run_feedback(&spec.with_seed(seed), &scale)?;
            let summary = json(serde_json::json!({
                "schema_version": audit::SCHEMA_VERSION,
                "config": trace.config,
                "point_budget": trace.point_budget,
                "cutoff": trace.cutoff,
                "drift": feedback::drift_report(&trace),
            }));
            match out_dir {
                Some(dir) => write_files(&dir, &[("trace.csv", feedback::trace_csv(&trace)), ("summary.json", summary)]),
                None => emit(out, None, &summary),
            }
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error[{}]: {}", f.code, f.message);
            EXIT_INVALID
        }
    }
}
