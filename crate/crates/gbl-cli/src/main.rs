//! `gbl`: validate belief files, run adjustments, generalised adjustments,
//! metric projections, the simulation study and the synthetic spatial-count
//! workflow.
//!
//! Exit codes: 0 success, 1 validation/usage failure (report on stderr),
//! 2 infeasible constraint set, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gbl_core::{
    adjust, fit_spatial_nonneg, generalise, kkt_residual, project, run_study,
    synth_spatial_counts, spatial_csv, BeliefStructure, ConstraintSet, ConstraintSpec, DVector,
    Error as CoreError, KernelSpec, ProjectOpts, ShrinkRegistry, SpatialCounts, StudyConfig,
    Tolerances,
};

mod output;

use output::{to_json, write_out};

#[derive(Parser)]
#[command(name = "gbl", version, about = "Bayes linear and generalised Bayes linear updates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Rank tolerance for pseudo-inverses and factorisations.
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    /// Feasibility tolerance on A q - b.
    #[arg(long = "feas-tol", default_value_t = 1e-9)]
    feas_tol: f64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the coherence of a belief file.
    Validate {
        #[arg(long)]
        belief: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Adjust beliefs by an observed datum.
    Adjust {
        #[arg(long)]
        belief: PathBuf,
        /// Inline JSON vector, e.g. "[3,6.5]".
        #[arg(long)]
        d: Option<String>,
        /// Datum file: JSON vector or single-column CSV.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Adjust and project onto a constraint set, with the generalised
    /// variance.
    Generalise {
        #[arg(long)]
        belief: PathBuf,
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Constraint spec: inline JSON shorthand, a path to one, or a
        /// full {a, b, labels} system.
        #[arg(long)]
        constraint: String,
        /// Shrink function name (cantelli, gauss).
        #[arg(long, default_value = "cantelli")]
        shrink: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Project a point onto a constraint set under a metric.
    Project {
        /// Inline JSON vector to project.
        #[arg(long)]
        e: String,
        /// Metric matrix as JSON rows; identity when omitted.
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        constraint: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run the simulation study and write a CSV report.
    Study {
        /// StudyConfig JSON path; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Kernel spec JSON overriding the config's base kernel.
        #[arg(long)]
        kernel: Option<String>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Fit spatial counts under the non-negative cone; synthesises data
    /// unless --data is given.
    Spatial {
        /// CSV with header lat,lon,count.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 80)]
        regions: usize,
        #[arg(long, default_value_t = 85.0)]
        length_scale_km: f64,
        #[arg(long, default_value_t = 0.25)]
        nugget: f64,
        /// Kernel spec JSON for the fit, overriding --length-scale-km,
        /// --nugget and the unit amplitude, e.g.
        /// {"family":"sqexp","amplitude":1.0,"length_scales":[85.0],"nugget":0.25}.
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "cantelli")]
        shrink: String,
        #[command(flatten)]
        common: CommonOpts,
    },
}

/// Failure modes mapped to exit codes.
enum CliError {
    Validation(String),
    Infeasible(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Infeasible(m) | CliError::Io(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Infeasible { .. } | CoreError::PinnedInfeasible { .. } => {
                CliError::Infeasible(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))
}

fn load_belief(path: &Path) -> Result<BeliefStructure, CliError> {
    let text = read_file(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("belief file {}: {e}", path.display())))
}

fn parse_vector(text: &str, what: &str) -> Result<DVector<f64>, CliError> {
    let values: Vec<f64> = serde_json::from_str(text)
        .map_err(|e| CliError::Validation(format!("{what}: {e}")))?;
    Ok(DVector::from_vec(values))
}

/// Datum from --d inline JSON or --data file (JSON vector or one-column CSV).
fn load_datum(d: &Option<String>, data: &Option<PathBuf>) -> Result<DVector<f64>, CliError> {
    match (d, data) {
        (Some(inline), None) => parse_vector(inline, "--d"),
        (None, Some(path)) => {
            let text = read_file(path)?;
            let trimmed = text.trim_start();
            if trimmed.starts_with('[') {
                parse_vector(&text, "--data")
            } else {
                let mut values = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || (lineno == 0 && line.parse::<f64>().is_err()) {
                        continue; // header or blank
                    }
                    values.push(line.parse::<f64>().map_err(|e| {
                        CliError::Validation(format!("--data line {}: {e}", lineno + 1))
                    })?);
                }
                if values.is_empty() {
                    return Err(CliError::Validation("--data contained no numbers".into()));
                }
                Ok(DVector::from_vec(values))
            }
        }
        (Some(_), Some(_)) => Err(CliError::Validation(
            "supply --d or --data, not both".into(),
        )),
        (None, None) => Err(CliError::Validation("a datum is required: --d or --data".into())),
    }
}

/// A constraint argument: inline shorthand, inline full system, or a path
/// to either.
fn load_constraint(arg: &str, n: usize) -> Result<ConstraintSet, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        read_file(Path::new(arg))?
    };
    if let Ok(spec) = serde_json::from_str::<ConstraintSpec>(&text) {
        return spec.build(n).map_err(CliError::from);
    }
    serde_json::from_str::<ConstraintSet>(&text)
        .map_err(|e| CliError::Validation(format!("--constraint: {e}")))
}

/// Kernel spec: inline JSON or a path to a JSON file.
fn parse_kernel(arg: &str) -> Result<KernelSpec, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        read_file(Path::new(arg))?
    };
    let spec: KernelSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("--kernel: {e}")))?;
    spec.validate().map_err(CliError::from)?;
    Ok(spec)
}

fn parse_metric(text: &str) -> Result<gbl_core::DMatrix<f64>, CliError> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text)
        .map_err(|e| CliError::Validation(format!("--metric: {e}")))?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Validation("--metric must be square".into()));
    }
    Ok(gbl_core::DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn load_spatial_csv(path: &Path) -> Result<SpatialCounts, CliError> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Validation("empty spatial CSV".into()))?;
    if header.trim() != "lat,lon,count" {
        return Err(CliError::Validation(format!(
            "spatial CSV header must be lat,lon,count; got {header:?}"
        )));
    }
    let mut lat = Vec::new();
    let mut lon = Vec::new();
    let mut counts = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 3 {
            return Err(CliError::Validation(format!(
                "spatial CSV line {}: expected 3 fields",
                lineno + 2
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64, CliError> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Validation(format!("spatial CSV line {}: {what}: {e}", lineno + 2)))
        };
        lat.push(parse(cells[0], "lat")?);
        lon.push(parse(cells[1], "lon")?);
        let c = cells[2].trim().parse::<u64>().map_err(|e| {
            CliError::Validation(format!("spatial CSV line {}: count: {e}", lineno + 2))
        })?;
        counts.push(c);
    }
    let intensity = vec![f64::NAN; lat.len()];
    Ok(SpatialCounts {
        lat,
        lon,
        counts,
        intensity,
    })
}

fn project_opts(common: &CommonOpts) -> ProjectOpts {
    ProjectOpts {
        feas_tol: common.feas_tol,
        rank_rtol: common.rtol,
        ..ProjectOpts::default()
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { belief, common } => {
            let bs = load_belief(&belief)?;
            let report = bs.validate(&Tolerances::default().with_rank_rtol(common.rtol));
            if report.passed() {
                write_out(&common.out, &to_json(&report)?)?;
                Ok(())
            } else {
                eprintln!("{report}");
                Err(CliError::Validation("belief structure is incoherent".into()))
            }
        }
        Command::Adjust {
            belief,
            d,
            data,
            common,
        } => {
            let bs = load_belief(&belief)?;
            let datum = load_datum(&d, &data)?;
            let adj = adjust(&bs, &datum, common.rtol)?;
            write_out(&common.out, &output::adjusted_json(&adj)?)
        }
        Command::Generalise {
            belief,
            d,
            data,
            constraint,
            shrink,
            common,
        } => {
            let bs = load_belief(&belief)?;
            let datum = load_datum(&d, &data)?;
            let adj = adjust(&bs, &datum, common.rtol)?;
            let c = load_constraint(&constraint, bs.dim_x())?;
            let registry = ShrinkRegistry::with_builtins();
            let f = registry.get(&shrink)?;
            let gen = generalise(&adj, &c, f, &project_opts(&common))?;
            write_out(&common.out, &output::generalised_json(&adj, &gen)?)
        }
        Command::Project {
            e,
            metric,
            constraint,
            common,
        } => {
            let point = parse_vector(&e, "--e")?;
            let v = match metric {
                Some(text) => parse_metric(&text)?,
                None => gbl_core::DMatrix::identity(point.len(), point.len()),
            };
            let c = load_constraint(&constraint, point.len())?;
            let opts = project_opts(&common);
            let res = project(&point, &v, &c, &opts)?;
            let residual = kkt_residual(
                &point,
                &v,
                &c,
                &res.q_star_vector(),
                &res.multiplier_vector(),
                common.rtol,
            )?;
            write_out(&common.out, &output::projection_json(&res, residual)?)
        }
        Command::Study {
            config,
            seed,
            kernel,
            common,
        } => {
            let mut cfg: StudyConfig = match config {
                Some(path) => {
                    let text = read_file(&path)?;
                    serde_json::from_str(&text)
                        .map_err(|e| CliError::Validation(format!("--config: {e}")))?
                }
                None => StudyConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(text) = kernel {
                cfg.kernel = parse_kernel(&text)?;
            }
            let report = run_study(&cfg)?;
            println!("{}", report.to_table());
            write_out(&common.out, &report.to_csv())
        }
        Command::Spatial {
            data,
            regions,
            length_scale_km,
            nugget,
            kernel,
            seed,
            shrink,
            common,
        } => {
            let counts = match data {
                Some(path) => load_spatial_csv(&path)?,
                None => synth_spatial_counts(regions, length_scale_km, seed)?,
            };
            let spec = match kernel {
                Some(text) => parse_kernel(&text)?,
                None => KernelSpec::sqexp(1.0, length_scale_km, nugget),
            };
            let registry = ShrinkRegistry::with_builtins();
            let f = registry.get(&shrink)?;
            let fit = fit_spatial_nonneg(&counts, &spec, f, &project_opts(&common))?;
            write_out(&common.out, &spatial_csv(&counts, &fit))
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("GBL_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
