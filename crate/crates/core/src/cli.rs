//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input format error, 3 usage or precondition
//! error, 4 numerical degeneracy.

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::baselines::MeasureId;
use crate::coefficient::{self, RdcParams, RdcResult, Scale};
use crate::error::RdcError;
use crate::harness::{self, Absent, BenchConfig, PowerConfig};
use crate::io::{self, Format, InputError, Table};
use crate::projection::BiasMode;
use crate::sample::Sample;
use crate::seed;
use crate::synth::{self, GridSpacing, PatternId};

const PERMUTATION_STREAM: u64 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{0}")]
    UnknownTag(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Rdc(#[from] RdcError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::UnknownTag(_) => 2,
            CliError::Usage(_) => 3,
            CliError::Output { .. } => 1,
            CliError::Rdc(e) => match e {
                RdcError::NonFinite { .. } => 2,
                RdcError::InvalidInput(_)
                | RdcError::SizeMismatch { .. }
                | RdcError::DimensionMismatch { .. }
                | RdcError::Capacity { .. }
                | RdcError::Capability(_) => 3,
                RdcError::Degenerate(_)
                | RdcError::DegenerateScale(_)
                | RdcError::Singular(_)
                | RdcError::CorrelationOutOfRange { .. } => 4,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rdc", version, about = "Randomized Dependence Coefficient and baseline dependence measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coefficient and canonical correlations between two samples.
    Compute(ComputeArgs),
    /// Independence test based on the coefficient.
    Test(TestArgs),
    /// Power of dependence measures on synthetic patterns.
    Power(PowerArgs),
    /// Running times on independent uniform pairs.
    Bench(BenchArgs),
    /// Measure values on a fixed set of bivariate associations.
    Panel(PanelArgs),
    /// Greedy forward feature selection.
    Select(SelectArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// X sample file, or X column selector when --data is given.
    #[arg(long)]
    pub x: String,
    /// Y sample file, or Y column selector when --data is given.
    #[arg(long)]
    pub y: String,
    /// Single file holding both samples; --x and --y then select columns
    /// by 0-based index or header name.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Input files start with a header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct RdcArgs {
    /// Random directions per side.
    #[arg(long, default_value_t = coefficient::DEFAULT_K)]
    pub k: usize,
    /// X weight variance, or `auto`.
    #[arg(long, default_value = "auto")]
    pub s_x: String,
    /// Y weight variance, or `auto`.
    #[arg(long, default_value = "auto")]
    pub s_y: String,
    /// Relative ridge added to the feature covariances.
    #[arg(long, default_value_t = crate::cca::DEFAULT_RIDGE)]
    pub ridge: f64,
    /// Offset mode: uniform or appended-normal.
    #[arg(long)]
    pub bias_mode: Option<String>,
    /// Same as --bias-mode appended-normal.
    #[arg(long)]
    pub r_compat: bool,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, env = "RDC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// csv, tsv or pretty.
    #[arg(long, default_value = "csv")]
    pub format: Format,
    /// Output file, written atomically; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub rdc: RdcArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub rdc: RdcArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// bartlett or permutation.
    #[arg(long, default_value = "bartlett")]
    pub method: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 500)]
    pub n_perm: usize,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Comma-separated pattern tags, or `all`.
    #[arg(long, default_value = "all")]
    pub patterns: String,
    /// `default`, a comma-separated list of noise variances, or
    /// `LEVELS:MIN:MAX`.
    #[arg(long, default_value = "default")]
    pub noise_grid: String,
    /// linear or geometric, for `LEVELS:MIN:MAX` grids.
    #[arg(long, default_value = "linear")]
    pub spacing: String,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    /// Comma-separated measure tags, or `all`.
    #[arg(long, default_value = "all")]
    pub measures: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = coefficient::DEFAULT_K)]
    pub k: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "1000,10000,100000,1000000")]
    pub sizes: String,
    #[arg(long, default_value = "all")]
    pub measures: String,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Per-evaluation limit in seconds.
    #[arg(long, default_value_t = 600.0)]
    pub timeout: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value = "all")]
    pub measures: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub header: bool,
    /// Target column selector.
    #[arg(long)]
    pub target: String,
    /// Candidate feature columns; all non-target columns when absent.
    #[arg(long)]
    pub features: Option<String>,
    /// rdc or dcor.
    #[arg(long, default_value = "rdc")]
    pub measure: String,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, default_value_t = coefficient::DEFAULT_K)]
    pub k: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli.command).and_then(|(text, common_out)| emit(&text, common_out, stdout)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit(text: &str, out: Option<&PathBuf>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => io::write_atomic(path, text).map_err(|source| CliError::Output { path: path.clone(), source }),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Output { path: "<stdout>".into(), source }),
    }
}

fn execute(cmd: &Command) -> Result<(String, Option<&PathBuf>), CliError> {
    let (table, comments, common) = match cmd {
        Command::Compute(a) => {
            let (t, c) = compute(a)?;
            (t, c, &a.common)
        }
        Command::Test(a) => {
            let (t, c) = test(a)?;
            (t, c, &a.common)
        }
        Command::Power(a) => {
            let (t, c) = power(a)?;
            (t, c, &a.common)
        }
        Command::Bench(a) => {
            let (t, c) = bench(a)?;
            (t, c, &a.common)
        }
        Command::Panel(a) => {
            let (t, c) = panel(a)?;
            (t, c, &a.common)
        }
        Command::Select(a) => {
            let (t, c) = select(a)?;
            (t, c, &a.common)
        }
    };
    Ok((io::render(&table, &comments, common.format), common.out.as_ref()))
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> Table {
    Table { header: Some(header.iter().map(|s| s.to_string()).collect()), rows }
}

fn parse_list<T: std::str::FromStr<Err = RdcError> + Copy>(spec: &str, all: &[T]) -> Result<Vec<T>, CliError> {
    if spec.trim() == "all" {
        return Ok(all.to_vec());
    }
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(tag_error))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| if v.is_empty() { Err(CliError::Usage(format!("empty list `{spec}`"))) } else { Ok(v) })
}

fn tag_error(e: RdcError) -> CliError {
    match e {
        RdcError::InvalidInput(msg) => CliError::UnknownTag(msg),
        other => other.into(),
    }
}

fn parse_numbers<T: std::str::FromStr>(spec: &str, what: &str) -> Result<Vec<T>, CliError> {
    spec.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| CliError::Usage(format!("bad {what} `{s}`"))))
        .collect()
}

fn rdc_params(a: &RdcArgs, seed: u64) -> Result<RdcParams, CliError> {
    let s_x: Scale = a.s_x.parse()?;
    let s_y: Scale = a.s_y.parse()?;
    let bias_mode = match (&a.bias_mode, a.r_compat) {
        (None, false) => BiasMode::Uniform,
        (None, true) => BiasMode::AppendedNormal,
        (Some(m), compat) => {
            let m: BiasMode = m.parse()?;
            if compat && m != BiasMode::AppendedNormal {
                return Err(CliError::Usage("--r-compat conflicts with --bias-mode uniform".into()));
            }
            m
        }
    };
    let p = RdcParams { k: a.k, s_x, s_y, seed, ridge: a.ridge, bias_mode, ..RdcParams::default() };
    p.validate()?;
    Ok(p)
}

fn load_pair(a: &InputArgs) -> Result<(Sample, Sample, Vec<String>), CliError> {
    let (x, y, comments) = match &a.data {
        Some(path) => {
            let t = io::read_numeric(path, a.header)?;
            let xc = t.resolve(&a.x)?;
            let yc = t.resolve(&a.y)?;
            let names = |c: &[usize]| c.iter().map(|&i| t.name(i)).collect::<Vec<_>>().join(";");
            let comments = vec![
                format!("data={}", path.display()),
                format!("x_columns={}", names(&xc)),
                format!("y_columns={}", names(&yc)),
            ];
            (t.select(&xc), t.select(&yc), comments)
        }
        None => {
            let tx = io::read_numeric(a.x.as_ref(), a.header)?;
            let ty = io::read_numeric(a.y.as_ref(), a.header)?;
            (tx.columns, ty.columns, vec![format!("x={}", a.x), format!("y={}", a.y)])
        }
    };
    if x[0].len() != y[0].len() {
        return Err(RdcError::SizeMismatch { x: x[0].len(), y: y[0].len() }.into());
    }
    Ok((Sample::from_columns(&x)?, Sample::from_columns(&y)?, comments))
}

fn params_comments(res: &RdcResult, requested: &RdcParams) -> Vec<String> {
    let p = &res.params_used;
    let how = |s: Scale| if s == Scale::Auto { "auto" } else { "fixed" };
    let (sx, sy) = p.projection_seeds();
    vec![
        format!("n={}", res.n),
        format!("k={}", p.k),
        format!("s_x={} ({})", p.s_x, how(requested.s_x)),
        format!("s_y={} ({})", p.s_y, how(requested.s_y)),
        format!("ridge={}", p.ridge),
        format!("bias_mode={}", p.bias_mode.as_str()),
        format!("seed={}", p.seed),
        format!("seed_x={sx}"),
        format!("seed_y={sy}"),
        format!("effective_rank_x={}", res.effective_ranks.0),
        format!("effective_rank_y={}", res.effective_ranks.1),
    ]
}

fn compute(a: &ComputeArgs) -> Result<(Table, Vec<String>), CliError> {
    let p = rdc_params(&a.rdc, a.common.seed)?;
    let (x, y, mut comments) = load_pair(&a.input)?;
    let res = coefficient::rdc(&x, &y, &p)?;
    comments.insert(0, "command=compute".into());
    comments.extend(params_comments(&res, &p));
    let mut rows = vec![vec!["coefficient".into(), res.coefficient.to_string()]];
    rows.extend(res.correlations.iter().enumerate().map(|(i, c)| vec![format!("correlation_{}", i + 1), c.to_string()]));
    Ok((table(&["quantity", "value"], rows), comments))
}

fn test(a: &TestArgs) -> Result<(Table, Vec<String>), CliError> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let p = rdc_params(&a.rdc, a.common.seed)?;
    let (res, t, extra) = match a.method.as_str() {
        "bartlett" => {
            let (x, y, c) = load_pair(&a.input)?;
            let (r, t) = coefficient::rdc_bartlett(&x, &y, &p)?;
            (r, t, c)
        }
        "permutation" => {
            if a.n_perm == 0 {
                return Err(CliError::Usage("--n-perm must be >= 1 for the permutation test".into()));
            }
            let (x, y, mut c) = load_pair(&a.input)?;
            let perm_seed = seed::derive(a.common.seed, PERMUTATION_STREAM);
            let (r, t) = coefficient::permutation_test(&x, &y, &p, a.n_perm, perm_seed)?;
            c.push(format!("n_perm={}", a.n_perm));
            c.push(format!("permutation_seed={perm_seed}"));
            (r, t, c)
        }
        other => return Err(CliError::Usage(format!("unknown --method `{other}` (expected bartlett or permutation)"))),
    };
    let mut comments = vec!["command=test".to_string(), format!("method={}", t.method.as_str()), format!("alpha={}", a.alpha)];
    comments.extend(extra);
    comments.extend(params_comments(&res, &p));
    let rows = vec![
        vec!["coefficient".into(), res.coefficient.to_string()],
        vec!["statistic".into(), t.statistic.to_string()],
        vec!["dof".into(), t.dof.to_string()],
        vec!["p_value".into(), t.p_value.to_string()],
        vec!["decision".into(), if t.rejects(a.alpha) { "reject" } else { "accept" }.into()],
        vec!["correlations_used".into(), t.correlations_used.to_string()],
    ];
    Ok((table(&["quantity", "value"], rows), comments))
}

fn noise_grid(spec: &str, spacing: &str) -> Result<Vec<f64>, CliError> {
    let spacing = match spacing {
        "linear" => GridSpacing::Linear,
        "geometric" => GridSpacing::Geometric,
        other => return Err(CliError::Usage(format!("unknown --spacing `{other}` (expected linear or geometric)"))),
    };
    if spec == "default" {
        return Ok(synth::noise_variances(30, 1.0 / 30.0, 3.0, spacing)?);
    }
    if let [levels, min, max] = spec.split(':').collect::<Vec<_>>()[..] {
        let levels: usize = levels.parse().map_err(|_| CliError::Usage(format!("bad grid levels `{levels}`")))?;
        let min: f64 = min.parse().map_err(|_| CliError::Usage(format!("bad grid minimum `{min}`")))?;
        let max: f64 = max.parse().map_err(|_| CliError::Usage(format!("bad grid maximum `{max}`")))?;
        return Ok(synth::noise_variances(levels, min, max, spacing)?);
    }
    parse_numbers(spec, "noise variance")
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| v.to_string())
}

fn power(a: &PowerArgs) -> Result<(Table, Vec<String>), CliError> {
    let cfg = PowerConfig {
        patterns: parse_list(&a.patterns, &PatternId::ALL)?,
        noise_variances: noise_grid(&a.noise_grid, &a.spacing)?,
        n: a.n,
        repetitions: a.reps,
        alpha: a.alpha,
        measures: parse_list(&a.measures, &MeasureId::ALL)?,
        seed: a.common.seed,
        rdc_params: RdcParams::default().with_k(a.k),
        ..PowerConfig::default()
    };
    let report = harness::estimate_power(&cfg)?;
    let join = |v: Vec<String>| v.join(";");
    let mut comments = vec![
        "command=power".to_string(),
        format!("patterns={}", join(cfg.patterns.iter().map(|p| p.to_string()).collect())),
        format!("measures={}", join(cfg.measures.iter().map(|m| m.to_string()).collect())),
        format!("noise_variances={}", join(cfg.noise_variances.iter().map(|v| v.to_string()).collect())),
        format!("n={}", cfg.n),
        format!("reps={}", cfg.repetitions),
        format!("alpha={}", cfg.alpha),
        format!("k={}", cfg.rdc_params.k),
        "s_x=auto".into(),
        "s_y=auto".into(),
        format!("seed={}", cfg.seed),
    ];
    for c in report.cells.iter().filter(|c| c.error.is_some()) {
        comments.push(format!(
            "failed {} {} {}: {}",
            c.measure,
            c.pattern,
            c.noise_variance,
            c.error.as_deref().unwrap_or_default()
        ));
    }
    let rows = report
        .cells
        .iter()
        .map(|c| vec![c.measure.to_string(), c.pattern.to_string(), c.noise_variance.to_string(), na(c.power)])
        .collect();
    Ok((table(&["measure", "pattern", "noise_variance", "power"], rows), comments))
}

fn bench(a: &BenchArgs) -> Result<(Table, Vec<String>), CliError> {
    if !(a.timeout.is_finite() && a.timeout > 0.0) {
        return Err(CliError::Usage(format!("--timeout must be positive, got {}", a.timeout)));
    }
    let cfg = BenchConfig {
        measures: parse_list(&a.measures, &MeasureId::ALL)?,
        sizes: parse_numbers(&a.sizes, "size")?,
        repetitions: a.reps,
        timeout: Duration::from_secs_f64(a.timeout),
        seed: a.common.seed,
        ..BenchConfig::default()
    };
    let cells = harness::benchmark_runtimes(&cfg)?;
    let mut comments = vec![
        "command=bench".to_string(),
        format!("reps={}", cfg.repetitions),
        format!("timeout_seconds={}", a.timeout),
        format!("seed={}", cfg.seed),
    ];
    let mut header = vec!["n".to_string()];
    header.extend(cfg.measures.iter().map(|m| m.to_string()));
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let mut row = vec![n.to_string()];
        for &m in &cfg.measures {
            let cell = cells.iter().find(|c| c.measure == m && c.n == n).expect("every cell timed");
            row.push(match &cell.seconds {
                Ok(s) => s.to_string(),
                Err(why) => {
                    comments.push(match why {
                        Absent::TimedOut => format!("absent {m} n={n}: timed out"),
                        Absent::Skipped => format!("absent {m} n={n}: skipped after timeout"),
                        Absent::Failed(e) => format!("absent {m} n={n}: {e}"),
                    });
                    "NA".into()
                }
            });
        }
        rows.push(row);
    }
    Ok((Table { header: Some(header), rows }, comments))
}

fn panel(a: &PanelArgs) -> Result<(Table, Vec<String>), CliError> {
    let measures = parse_list(&a.measures, &MeasureId::ALL)?;
    let params = RdcParams::default();
    let rows = harness::value_panel(&harness::default_associations(), &measures, a.n, a.common.seed, &params)?;
    let comments = vec![
        "command=panel".to_string(),
        format!("n={}", a.n),
        format!("k={}", params.k),
        "s_x=auto".into(),
        "s_y=auto".into(),
        format!("seed={}", a.common.seed),
    ];
    let mut header = vec!["association".to_string()];
    header.extend(measures.iter().map(|m| m.to_string()));
    let body = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.association.label()];
            row.extend(r.values.iter().map(|v| na(*v)));
            row
        })
        .collect();
    Ok((Table { header: Some(header), rows: body }, comments))
}

fn select(a: &SelectArgs) -> Result<(Table, Vec<String>), CliError> {
    let measure: MeasureId = a.measure.parse().map_err(tag_error)?;
    let t = io::read_numeric(&a.data, a.header)?;
    let target = t.resolve(&a.target)?;
    let features = match &a.features {
        Some(sel) => t.resolve(sel)?,
        None => (0..t.ncols()).filter(|c| !target.contains(c)).collect(),
    };
    if features.is_empty() {
        return Err(CliError::Usage("no candidate feature columns".into()));
    }
    let fs = Sample::from_columns(&t.select(&features))?;
    let ts = Sample::from_columns(&t.select(&target))?;
    let params = RdcParams::default().with_k(a.k);
    let trace = harness::greedy_select(&fs, &ts, measure, a.steps, a.common.seed, &params)?;
    let comments = vec![
        "command=select".to_string(),
        format!("data={}", a.data.display()),
        format!("target={}", target.iter().map(|&c| t.name(c)).collect::<Vec<_>>().join(";")),
        format!("measure={measure}"),
        format!("steps={}", a.steps),
        format!("k={}", params.k),
        format!("seed={}", a.common.seed),
        format!("train_rows={}", trace.train_rows.len()),
        format!("test_rows={}", trace.test_rows.len()),
    ];
    let rows = trace
        .steps
        .iter()
        .map(|s| {
            vec![s.step.to_string(), t.name(features[s.feature]), s.dependence.to_string(), s.nmse.to_string()]
        })
        .collect();
    Ok((table(&["step", "feature", "dependence", "nmse"], rows), comments))
}
