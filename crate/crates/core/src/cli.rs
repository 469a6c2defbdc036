//! The `copula-proc` command line.
//!
//! Every subcommand resolves a [`RunConfig`] from an optional JSON file
//! (`--config`) overlaid with command-line flags (flags win), then runs
//! sequentially; parallelism lives inside the library calls. The rayon pool
//! size comes from `COPULA_PROC_THREADS` (unset or 0 means one thread per
//! core).
//!
//! Exit status: 0 on success, 1 on runtime failure (I/O, sampling), 2 on
//! usage errors, 3 when a computation finished but failed its own check
//! (identity violated, refinement not converged, non-finite output).

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bv::{from_fn, hk_variation, random_step_function, vitali_variation, GridStepFunction, HalfOpenBox, PointFn, Variation, VariationMode};
use crate::copula::{CopulaModel, SampleMatrix};
use crate::empirical::{equivalence_diagnostic, evaluate_class, pseudo_observations, Centering, CenteringMethod, DEFAULT_PANELS};
use crate::error::Error;
use crate::index::{build_class, ClassSpec, IndexClass};
use crate::resampling::{gof_test, mc_study, McStudyConfig, DEFAULT_LEVELS};
use crate::seeding::{task_rng, DOMAIN_FRESH_SAMPLES};
use crate::stieltjes::{ibp_check, IbpMode};

pub const THREADS_ENV: &str = "COPULA_PROC_THREADS";

const DOMAIN_IBP: u64 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Fully resolved settings of one run; embedded in every artifact.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "B")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub res: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centering: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixing_rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),*) => {
        RunConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl RunConfig {
    /// `top` wins wherever it is set.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        overlay!(
            base, top, command, model, sample_model, class, n, b, reps, trials, seed, tol, max_depth, dim, res,
            mode, function, centering, mc_samples, panels, levels, n_values, reference, mixing_rho, input,
            output, format
        )
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
    Check(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::InvalidParameter(_) | Error::DimensionMismatch { .. } | Error::InvalidPoint(_) => {
                CliError::Usage(e.to_string())
            }
            Error::NonFinite(_) => CliError::Check(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "copula-proc", version, about = "Empirical copula processes, bounded variation and bootstrap tests")]
pub struct Cli {
    /// JSON file supplying any flag; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a seeded sample from a copula model (CSV).
    Simulate(SimulateArgs),
    /// Evaluate the process over an index class (JSON).
    Process(ProcessArgs),
    /// Bootstrap goodness-of-fit test (JSON).
    Gof(GofArgs),
    /// Bootstrap vs Monte-Carlo quantiles of the sup statistic (CSV or JSON).
    McStudy(McStudyArgs),
    /// Integration by parts on seeded random step-function pairs (JSON).
    IbpCheck(IbpArgs),
    /// Vitali and Hardy-Krause variation (JSON).
    Variation(VariationArgs),
    /// Distance between the rank process and its linearisation (JSON).
    Diagnostic(DiagnosticArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Model spec, e.g. `mo:alpha=0.5,beta=0.5`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Draw a stationary latent AR(1) sequence with this coefficient
    /// (Gaussian models only).
    #[arg(long)]
    mixing_rho: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Sample CSV with header `x1,…,xd`.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Simulate the data from this model instead of reading it.
    #[arg(long)]
    sample_model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Debug)]
struct CenteringArgs {
    /// auto | closed_form | quadrature | mc
    #[arg(long)]
    centering: Option<String>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    panels: Option<usize>,
}

#[derive(Args, Debug)]
struct ProcessArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Copula used for centering (default: independence).
    #[arg(long)]
    model: Option<String>,
    /// Class spec, e.g. `mgf:grid=3`.
    #[arg(long)]
    class: Option<String>,
    #[command(flatten)]
    centering: CenteringArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GofArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Null copula.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    class: Option<String>,
    #[arg(long = "B", short = 'B')]
    b: Option<usize>,
    #[command(flatten)]
    centering: CenteringArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct McStudyArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    class: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Fresh samples for the Monte-Carlo quantiles.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long = "B", short = 'B')]
    b: Option<usize>,
    /// Samples whose bootstrap quantiles are median-aggregated.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[command(flatten)]
    centering: CenteringArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IbpArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Grid resolution of the random step functions.
    #[arg(long)]
    res: Option<usize>,
    /// general | vanishing_faces
    #[arg(long)]
    mode: Option<String>,
    /// Passing threshold on |lhs - rhs| / (1 + |lhs|).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VariationArgs {
    /// prod | sum | exp | min | max
    #[arg(long)]
    function: Option<String>,
    /// GridStepFunction JSON.
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// exact | refine
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_depth: Option<u32>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiagnosticArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    class: Option<String>,
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    /// Reference draws for the T_k transforms.
    #[arg(long)]
    reference: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Process(_) => "process",
            Command::Gof(_) => "gof",
            Command::McStudy(_) => "mc-study",
            Command::IbpCheck(_) => "ibp-check",
            Command::Variation(_) => "variation",
            Command::Diagnostic(_) => "diagnostic",
        }
    }

    fn flags(self) -> RunConfig {
        let name = Some(self.name().to_string());
        let centering = |c: CenteringArgs, cfg: RunConfig| RunConfig {
            centering: c.centering,
            mc_samples: c.mc_samples,
            panels: c.panels,
            ..cfg
        };
        let data = |d: DataArgs, cfg: RunConfig| RunConfig {
            input: d.input,
            sample_model: d.sample_model,
            n: d.n,
            ..cfg
        };
        match self {
            Command::Simulate(a) => RunConfig {
                command: name,
                model: a.model,
                n: a.n,
                seed: a.seed,
                mixing_rho: a.mixing_rho,
                output: a.output,
                ..Default::default()
            },
            Command::Process(a) => {
                let cfg = RunConfig {
                    command: name,
                    model: a.model,
                    class: a.class,
                    seed: a.seed,
                    output: a.output,
                    ..Default::default()
                };
                data(a.data, centering(a.centering, cfg))
            }
            Command::Gof(a) => {
                let cfg = RunConfig {
                    command: name,
                    model: a.model,
                    class: a.class,
                    b: a.b,
                    seed: a.seed,
                    output: a.output,
                    ..Default::default()
                };
                data(a.data, centering(a.centering, cfg))
            }
            Command::McStudy(a) => centering(
                a.centering,
                RunConfig {
                    command: name,
                    model: a.model,
                    class: a.class,
                    n: a.n,
                    reps: a.reps,
                    b: a.b,
                    trials: a.trials,
                    levels: a.levels,
                    seed: a.seed,
                    format: a.format,
                    output: a.output,
                    ..Default::default()
                },
            ),
            Command::IbpCheck(a) => RunConfig {
                command: name,
                dim: a.dim,
                trials: a.trials,
                res: a.res,
                mode: a.mode,
                tol: a.tol,
                seed: a.seed,
                output: a.output,
                ..Default::default()
            },
            Command::Variation(a) => RunConfig {
                command: name,
                function: a.function,
                input: a.input,
                dim: a.dim,
                mode: a.mode,
                tol: a.tol,
                max_depth: a.max_depth,
                output: a.output,
                ..Default::default()
            },
            Command::Diagnostic(a) => RunConfig {
                command: name,
                model: a.model,
                class: a.class,
                n_values: a.n_values,
                reps: a.reps,
                reference: a.reference,
                seed: a.seed,
                output: a.output,
                ..Default::default()
            },
        }
    }
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match configure_threads().and_then(|_| execute(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(3)
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV}=`{v}` is not a thread count")))?,
        Err(_) => 0,
    };
    // a pool may already exist when run() is called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn execute(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let name = cli.command.name();
    if let Some(c) = &file.command {
        if c != name {
            return Err(CliError::Usage(format!("config file is for `{c}`, not `{name}`")));
        }
    }
    let cfg = file.overlay(cli.command.flags());
    match name {
        "simulate" => simulate(cfg),
        "process" => process(cfg),
        "gof" => gof(cfg),
        "mc-study" => study(cfg),
        "ibp-check" => ibp(cfg),
        "variation" => variation(cfg),
        "diagnostic" => diagnostic(cfg),
        _ => unreachable!("every subcommand is dispatched"),
    }
}

fn need<T: Clone>(v: &Option<T>, flag: &str) -> CliResult<T> {
    v.clone().ok_or_else(|| CliError::Usage(format!("missing --{flag}")))
}

fn need_seed(cfg: &RunConfig) -> CliResult<u64> {
    cfg.seed
        .ok_or_else(|| CliError::Usage("this command is stochastic: pass --seed (or `seed` in the config file)".into()))
}

fn parse_model(spec: &str) -> CliResult<CopulaModel> {
    Ok(spec.parse()?)
}

fn parse_class(spec: &str, dim: usize) -> CliResult<IndexClass> {
    let parsed: ClassSpec = spec.parse()?;
    // an explicit d= must agree with the data; otherwise adopt the data dimension
    let explicit = spec.split([':', ',']).any(|kv| kv.trim().starts_with("d="));
    if explicit && parsed.dim() != dim {
        return Err(CliError::Usage(format!("class `{spec}` has d={} but the data has d={dim}", parsed.dim())));
    }
    Ok(build_class(&parsed.with_dim(dim))?)
}

fn centering(cfg: &mut RunConfig, model: CopulaModel) -> CliResult<Centering> {
    let panels = *cfg.panels.get_or_insert(DEFAULT_PANELS);
    let samples = *cfg.mc_samples.get_or_insert(1_000_000);
    let method = match cfg.centering.get_or_insert_with(|| "auto".into()).as_str() {
        "closed_form" => CenteringMethod::ClosedForm,
        "quadrature" => CenteringMethod::Quadrature { panels },
        "mc" => CenteringMethod::MonteCarlo {
            samples,
            seed: need_seed(cfg)?,
        },
        "auto" => CenteringMethod::Auto {
            panels,
            samples,
            seed: need_seed(cfg)?,
        },
        other => return Err(CliError::Usage(format!("unknown centering `{other}`"))),
    };
    Ok(Centering { model, method })
}

/// Data from `--input`, or simulated from `--sample-model` on a stream
/// separate from the bootstrap.
fn load_data(cfg: &RunConfig) -> CliResult<SampleMatrix> {
    match (&cfg.input, &cfg.sample_model) {
        (Some(path), None) => {
            let f = File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            Ok(SampleMatrix::read_csv(BufReader::new(f))?)
        }
        (None, Some(spec)) => {
            let model = parse_model(spec)?;
            let n = need(&cfg.n, "n")?;
            Ok(model.sample_with(n, &mut task_rng(need_seed(cfg)?, DOMAIN_FRESH_SAMPLES, 0))?)
        }
        (Some(_), Some(_)) => Err(CliError::Usage("give either --input or --sample-model, not both".into())),
        (None, None) => Err(CliError::Usage("missing --input (or --sample-model with --n)".into())),
    }
}

fn open_output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    config: &'a RunConfig,
    #[serde(flatten)]
    body: &'a T,
}

fn emit_json<T: Serialize>(cfg: &RunConfig, body: &T) -> CliResult<()> {
    let mut out = open_output(&cfg.output)?;
    serde_json::to_writer_pretty(&mut out, &Artifact { config: cfg, body })?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// CSV cannot carry the config inline, so a file output gets a
/// `<output>.meta.json` sidecar.
fn emit_csv<F: FnOnce(&mut dyn Write) -> crate::Result<()>>(cfg: &RunConfig, write: F) -> CliResult<()> {
    let mut out = open_output(&cfg.output)?;
    write(&mut out)?;
    out.flush()?;
    if let Some(p) = &cfg.output {
        let mut meta = p.clone().into_os_string();
        meta.push(".meta.json");
        let f = File::create(&meta)?;
        serde_json::to_writer_pretty(BufWriter::new(f), &serde_json::json!({ "config": cfg }))?;
    }
    Ok(())
}

fn simulate(cfg: RunConfig) -> CliResult<()> {
    let model = parse_model(&need(&cfg.model, "model")?)?;
    let n = need(&cfg.n, "n")?;
    let seed = need_seed(&cfg)?;
    let sample = match cfg.mixing_rho {
        Some(rho) => model.sample_stationary(rho, n, seed)?,
        None => model.sample(n, seed)?,
    };
    emit_csv(&cfg, |w| sample.write_csv(w))
}

fn process(mut cfg: RunConfig) -> CliResult<()> {
    let data = load_data(&cfg)?;
    let model = match &cfg.model {
        Some(spec) => parse_model(spec)?,
        None => CopulaModel::independence(data.dim())?,
    };
    cfg.model = Some(model.to_string());
    let class = parse_class(&need(&cfg.class, "class")?, data.dim())?;
    let centering = centering(&mut cfg, model)?;
    let eval = evaluate_class(&pseudo_observations(&data)?, &class, &centering)?;
    emit_json(&cfg, &eval)
}

fn gof(mut cfg: RunConfig) -> CliResult<()> {
    let data = load_data(&cfg)?;
    let null = parse_model(&need(&cfg.model, "model")?)?;
    let class = parse_class(&need(&cfg.class, "class")?, data.dim())?;
    let seed = need_seed(&cfg)?;
    let b = need(&cfg.b, "B")?;
    let report = gof_test(&data, &centering(&mut cfg, null)?, &class, b, seed)?;
    emit_json(&cfg, &report)
}

fn study(mut cfg: RunConfig) -> CliResult<()> {
    let model = parse_model(&need(&cfg.model, "model")?)?;
    let class = parse_class(&need(&cfg.class, "class")?, model.dim())?;
    let scfg = McStudyConfig {
        n: need(&cfg.n, "n")?,
        reps: need(&cfg.reps, "reps")?,
        b: need(&cfg.b, "B")?,
        boot_trials: *cfg.trials.get_or_insert(25),
        seed: need_seed(&cfg)?,
        levels: cfg.levels.get_or_insert_with(|| DEFAULT_LEVELS.to_vec()).clone(),
    };
    let result = mc_study(&model, &class, &centering(&mut cfg, model.clone())?, &scfg)?;
    if result.rows.iter().any(|r| !r.mc_quantile.is_finite() || !r.boot_quantile.is_finite()) {
        return Err(CliError::Check("non-finite quantile".into()));
    }
    match *cfg.format.get_or_insert(OutputFormat::Csv) {
        OutputFormat::Csv => emit_csv(&cfg, |w| result.write_csv(w)),
        OutputFormat::Json => emit_json(&cfg, &result),
    }
}

#[derive(Serialize)]
struct IbpSummary {
    dim: usize,
    trials: usize,
    mode: &'static str,
    term_count: usize,
    max_abs_diff: f64,
    max_scaled_diff: f64,
    max_term_magnitude: f64,
    passed: bool,
}

fn ibp(mut cfg: RunConfig) -> CliResult<()> {
    let dim = *cfg.dim.get_or_insert(2);
    if dim == 0 || dim > 6 {
        return Err(CliError::Usage("--dim must lie in 1..=6".into()));
    }
    let trials = *cfg.trials.get_or_insert(100);
    let res = *cfg.res.get_or_insert(6);
    if res == 0 {
        return Err(CliError::Usage("--res must be positive".into()));
    }
    let tol = *cfg.tol.get_or_insert(1e-9);
    let (mode, mode_name) = match cfg.mode.get_or_insert_with(|| "general".into()).as_str() {
        "general" => (IbpMode::General, "general"),
        "vanishing_faces" => (IbpMode::VanishingFaces, "vanishing_faces"),
        other => return Err(CliError::Usage(format!("unknown ibp mode `{other}`"))),
    };
    let seed = need_seed(&cfg)?;
    let bx = HalfOpenBox::unit(dim);
    let reports = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = task_rng(seed, DOMAIN_IBP, t as u64);
            let keep = rng.random_range(0.2..0.8);
            let f = random_step_function(&mut rng, dim, res, keep);
            let mut g = random_step_function(&mut rng, dim, res, keep);
            if mode == IbpMode::VanishingFaces {
                let breaks = g.axis_breaks().to_vec();
                g = GridStepFunction::from_cells(breaks, |idx| {
                    if idx.contains(&0) {
                        0.0
                    } else {
                        g.value_at_cell(idx)
                    }
                })?;
            }
            ibp_check(&f, &g, &bx, mode)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let mut s = IbpSummary {
        dim,
        trials,
        mode: mode_name,
        term_count: reports.first().map_or(0, |r| r.term_count),
        max_abs_diff: 0.0,
        max_scaled_diff: 0.0,
        max_term_magnitude: 0.0,
        passed: true,
    };
    for r in &reports {
        s.max_abs_diff = s.max_abs_diff.max(r.abs_diff);
        s.max_scaled_diff = s.max_scaled_diff.max(r.abs_diff / (1.0 + r.lhs.abs()));
        s.max_term_magnitude = s.max_term_magnitude.max(r.max_term_magnitude);
    }
    s.passed = s.max_scaled_diff <= tol && s.max_abs_diff.is_finite();
    emit_json(&cfg, &s)?;
    if s.passed {
        Ok(())
    } else {
        Err(CliError::Check(format!("max |lhs - rhs|/(1+|lhs|) = {:e} exceeds {tol:e}", s.max_scaled_diff)))
    }
}

#[derive(Serialize)]
struct VariationReport {
    vitali: f64,
    hk: f64,
    vitali_detail: Variation,
    hk_detail: Variation,
}

fn named_function(name: &str, dim: usize) -> CliResult<Box<dyn PointFn>> {
    Ok(match name {
        "prod" => Box::new(from_fn(dim, |x: &[f64]| x.iter().product())),
        "sum" => Box::new(from_fn(dim, |x: &[f64]| x.iter().sum())),
        "exp" => Box::new(from_fn(dim, |x: &[f64]| x.iter().sum::<f64>().exp())),
        "min" => Box::new(from_fn(dim, |x: &[f64]| x.iter().copied().fold(1.0, f64::min))),
        "max" => Box::new(from_fn(dim, |x: &[f64]| x.iter().copied().fold(0.0, f64::max))),
        other => return Err(CliError::Usage(format!("unknown function `{other}` (prod, sum, exp, min, max)"))),
    })
}

fn variation(mut cfg: RunConfig) -> CliResult<()> {
    let mode = match cfg.mode.get_or_insert_with(|| "refine".into()).as_str() {
        "exact" => VariationMode::Exact,
        "refine" => VariationMode::Refine {
            tol: *cfg.tol.get_or_insert(1e-3),
            max_depth: *cfg.max_depth.get_or_insert(10),
        },
        other => return Err(CliError::Usage(format!("unknown variation mode `{other}`"))),
    };
    let f: Box<dyn PointFn> = match (&cfg.input, &cfg.function) {
        (Some(path), None) => {
            let file = File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            let step: GridStepFunction = serde_json::from_reader(BufReader::new(file))
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            Box::new(step)
        }
        (None, Some(name)) => {
            let dim = *cfg.dim.get_or_insert(2);
            if dim == 0 || dim > crate::bv::MAX_DIM {
                return Err(CliError::Usage("--dim out of range".into()));
            }
            named_function(name, dim)?
        }
        _ => return Err(CliError::Usage("give exactly one of --function or --input".into())),
    };
    let vitali = vitali_variation(f.as_ref(), mode)?;
    let hk = hk_variation(f.as_ref(), mode)?;
    if !vitali.value.is_finite() || !hk.value.is_finite() {
        return Err(CliError::Check("non-finite variation".into()));
    }
    emit_json(
        &cfg,
        &VariationReport {
            vitali: vitali.value,
            hk: hk.value,
            vitali_detail: vitali,
            hk_detail: hk,
        },
    )?;
    if vitali.converged && hk.converged {
        Ok(())
    } else {
        Err(CliError::Check("ladder refinement did not reach the tolerance".into()))
    }
}

#[derive(Serialize)]
struct DiagnosticReport {
    rows: Vec<crate::empirical::DiagnosticRow>,
}

fn diagnostic(mut cfg: RunConfig) -> CliResult<()> {
    let model = parse_model(&need(&cfg.model, "model")?)?;
    let class = parse_class(&need(&cfg.class, "class")?, model.dim())?;
    let n_values = cfg.n_values.get_or_insert_with(|| vec![100, 400, 1600]).clone();
    let reps = *cfg.reps.get_or_insert(50);
    let reference = *cfg.reference.get_or_insert(200_000);
    let rows = equivalence_diagnostic(&model, &class, &n_values, reps, need_seed(&cfg)?, reference)?;
    emit_json(&cfg, &DiagnosticReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = RunConfig {
            n: Some(10),
            seed: Some(1),
            model: Some("w".into()),
            ..Default::default()
        };
        let flags = RunConfig {
            seed: Some(2),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.seed, Some(2));
        assert_eq!(merged.n, Some(10));
        assert_eq!(merged.model.as_deref(), Some("w"));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 3}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"seed": 3, "B": 10}"#).unwrap();
        assert_eq!((c.seed, c.b), (Some(3), Some(10)));
    }

    #[test]
    fn class_dimension_follows_data() {
        assert_eq!(parse_class("mgf:grid=2", 3).unwrap().dim(), 3);
        assert!(matches!(parse_class("mgf:grid=2,d=2", 3), Err(CliError::Usage(_))));
    }
}
