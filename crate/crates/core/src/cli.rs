//! Command-line front end. `run` returns the process exit code:
//! 0 on success, 1 on usage or input errors (message on stderr),
//! 2 on numerical failure (JSON error object on stdout).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use log::LevelFilter;
use nalgebra::DVector;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::io::{format_f64, read_problem, read_truth_json};
use crate::norms::sorted::linear_sequence;
use crate::norms::{ConeSpec, NormSpec};
use crate::simbench::{run_study, Profile, Scenario, SimulationConfig};
use crate::solver::{check_kkt, fit_with_norm, FitResult, SolverConfig};
use crate::theory::{
    best_oracle_point, theoretical_lambda, CertificateOptions, OraclePoint, SparsityOptions, StructuredInputs,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "sqrtreg", version, about = "Square-root regularized regression with structured norm penalties")]
pub struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the estimator at a given penalty level.
    Fit(FitArgs),
    /// KKT residual of a coefficient vector.
    KktCheck(KktArgs),
    /// Theoretical penalty level.
    Lambda(LambdaArgs),
    /// Oracle inequality certificate against a known truth.
    Oracle(OracleArgs),
    /// Simulation study.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct NormArg {
    /// `l1`, `sorted-l1[:hi:lo]`, `group:<size>`, `sparse-group:<size>:<l1>:<group>`,
    /// `wedge`, `box:<lower>:<upper>` (same bounds on every coordinate), inline JSON, or `@file.json`.
    #[arg(long)]
    pub norm: String,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// `problem.json`, or `x.csv,y.csv`.
    #[arg(long)]
    pub problem: String,
    #[command(flatten)]
    pub norm: NormArg,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 20_000)]
    pub max_inner: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_outer: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_inner: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub kkt_tol: f64,
}

#[derive(Debug, Args)]
pub struct KktArgs {
    #[arg(long)]
    pub problem: String,
    #[command(flatten)]
    pub norm: NormArg,
    #[arg(long)]
    pub lambda: f64,
    /// JSON array of coefficients, or a `fit` output.
    #[arg(long)]
    pub beta: PathBuf,
}

#[derive(Debug, Args)]
pub struct LambdaArgs {
    #[command(flatten)]
    pub norm: NormArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Structured norms: bound on the cone constant.
    #[arg(long, requires = "extreme_points")]
    pub a_tilde: Option<f64>,
    /// Structured norms: number of extreme points.
    #[arg(long, requires = "a_tilde")]
    pub extreme_points: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub problem: String,
    #[arg(long)]
    pub truth: PathBuf,
    #[command(flatten)]
    pub norm: NormArg,
    /// Comma-separated 0-based indices; repeat to compare several sets.
    #[arg(long, required = true)]
    pub set: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Defaults to the theoretical level.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 25)]
    pub restarts: usize,
    #[arg(long)]
    pub dense_samples: Option<usize>,
    /// Also report the bound with `||eps||_n^2` replaced by `sigma^2 C`.
    #[arg(long)]
    pub noise_c: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `decreasing`, `decreasing-random`, `grouped` or `grouped-random`.
    #[arg(long, default_value = "decreasing")]
    pub scenario: Scenario,
    /// `desk` (n = 50, p = 100, 20 repetitions) or `full` (n = 100, p = 500, 100 repetitions).
    #[arg(long, default_value = "desk")]
    pub profile: Profile,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
}

impl NormArg {
    /// Resolves the shorthand for a problem with `p` coefficients.
    pub fn resolve(&self, p: usize) -> Result<NormSpec> {
        parse_norm(&self.norm, p)
    }
}

fn num(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::InvalidConfig(format!("cannot parse {what} {s:?}: {e}")))
}

fn contiguous_groups(p: usize, size: &str) -> Result<Vec<Vec<usize>>> {
    let size: usize = size
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("cannot parse group size {size:?}: {e}")))?;
    if size == 0 {
        return Err(Error::InvalidConfig("group size must be positive".into()));
    }
    Ok((0..p).collect::<Vec<_>>().chunks(size).map(<[usize]>::to_vec).collect())
}

pub fn parse_norm(s: &str, p: usize) -> Result<NormSpec> {
    let s = s.trim();
    if let Some(path) = s.strip_prefix('@') {
        return Ok(serde_json::from_str(&fs::read_to_string(path)?)?);
    }
    if s.starts_with('{') {
        return Ok(serde_json::from_str(s)?);
    }
    let parts: Vec<&str> = s.split(':').collect();
    let spec = match parts.as_slice() {
        ["l1"] => NormSpec::L1,
        ["sorted-l1"] | ["slope"] => NormSpec::SortedL1 {
            lambda_seq: linear_sequence(1.0, 0.1, p),
        },
        ["sorted-l1" | "slope", hi, lo] => NormSpec::SortedL1 {
            lambda_seq: linear_sequence(num(hi, "weight")?, num(lo, "weight")?, p),
        },
        ["group", size] => NormSpec::Group {
            groups: contiguous_groups(p, size)?,
        },
        ["sparse-group", size, l1, g] => NormSpec::SparseGroup {
            l1_weight: num(l1, "l1 weight")?,
            group_weight: num(g, "group weight")?,
            groups: contiguous_groups(p, size)?,
        },
        ["wedge"] => NormSpec::Structured { cone: ConeSpec::Wedge },
        ["box", lo, hi] => NormSpec::Structured {
            cone: ConeSpec::Box {
                lower: vec![num(lo, "box bound")?; p],
                upper: vec![num(hi, "box bound")?; p],
            },
        },
        _ => return Err(Error::InvalidSpec(format!("unrecognized norm {s:?}"))),
    };
    Ok(spec)
}

pub fn parse_indices(s: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidConfig(format!("cannot parse index {t:?}: {e}")))
        })
        .collect()
}

fn read_beta(path: &Path) -> Result<Vec<f64>> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let arr = match &v {
        serde_json::Value::Array(_) => v,
        _ => v
            .pointer("/result/beta_hat")
            .or_else(|| v.get("beta_hat"))
            .cloned()
            .ok_or_else(|| Error::InvalidConfig(format!("{}: no coefficient array found", path.display())))?,
    };
    Ok(serde_json::from_value(arr)?)
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    config: C,
    result: R,
}

fn envelope<C: Serialize, R: Serialize>(command: &str, config: C, result: R) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { command, config, result })?;
    s.push('\n');
    Ok(s)
}

fn csv_kv(rows: &[(&str, String)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"])?;
    for (k, v) in rows {
        w.write_record([*k, v.as_str()])?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn text_kv(rows: &[(&str, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::new();
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<width$}  {v}");
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_else(|| "undefined".into())
}

fn project(format: Format, command: &str, config: impl Serialize, result: impl Serialize, rows: Vec<(&str, String)>) -> Result<String> {
    match format {
        Format::Json => envelope(command, config, result),
        Format::Csv => csv_kv(&rows),
        Format::Text => Ok(text_kv(&rows)),
    }
}

fn cmd_fit(a: &FitArgs, format: Format) -> Result<String> {
    let problem = read_problem(&a.problem)?;
    let spec = a.norm.resolve(problem.p())?;
    let norm = spec.build(problem.p())?;
    let config = SolverConfig {
        lambda: a.lambda,
        max_outer: a.max_outer,
        max_inner: a.max_inner,
        tol_outer: a.tol_outer,
        tol_inner: a.tol_inner,
        kkt_tol: a.kkt_tol,
        beta_init: None,
    };
    let fit = fit_with_norm(&problem, &norm, &config)?;
    if !fit.converged {
        return Err(Error::NotConverged {
            kkt_residual: fit.kkt_residual,
        });
    }
    let cfg = json!({"problem": a.problem, "norm": spec, "solver": config});
    if format == Format::Csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "beta_hat"])?;
        for (j, b) in fit.beta_hat.iter().enumerate() {
            w.write_record([j.to_string(), format_f64(*b)])?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        return Ok(String::from_utf8(bytes).expect("csv output is UTF-8"));
    }
    let rows = fit_rows(&fit);
    project(format, "fit", cfg, &fit, rows)
}

fn fit_rows(fit: &FitResult) -> Vec<(&'static str, String)> {
    let support: Vec<String> = crate::model::support(&fit.beta_hat).iter().map(|j| j.to_string()).collect();
    vec![
        ("lambda", format_f64(fit.lambda)),
        ("objective", format_f64(fit.objective)),
        ("residual_norm_n", format_f64(fit.residual_norm_n)),
        ("kkt_residual", format_f64(fit.kkt_residual)),
        ("outer_iters", fit.outer_iters.to_string()),
        ("inner_iters", fit.inner_iters.to_string()),
        ("support", support.join(" ")),
    ]
}

fn cmd_kkt(a: &KktArgs, format: Format) -> Result<String> {
    let problem = read_problem(&a.problem)?;
    let spec = a.norm.resolve(problem.p())?;
    let norm = spec.build(problem.p())?;
    let beta = read_beta(&a.beta)?;
    let residual = check_kkt(&problem, &norm, &DVector::from_column_slice(&beta), a.lambda)?;
    let cfg = json!({"problem": a.problem, "norm": spec, "lambda": a.lambda, "beta": a.beta});
    let rows = vec![("kkt_residual", format_f64(residual))];
    project(format, "kkt-check", cfg, json!({ "kkt_residual": residual }), rows)
}

fn cmd_lambda(a: &LambdaArgs, format: Format) -> Result<String> {
    let spec = a.norm.resolve(a.p)?;
    let structured = a.a_tilde.zip(a.extreme_points).map(|(a_tilde, extreme_points)| StructuredInputs {
        a_tilde,
        extreme_points,
    });
    let out = theoretical_lambda(&spec, a.n, a.p, a.alpha, structured)?;
    let cfg = json!({"norm": spec, "n": a.n, "p": a.p, "alpha": a.alpha,
        "a_tilde": a.a_tilde, "extreme_points": a.extreme_points});
    let mut rows = vec![("lambda", format_f64(out.lambda))];
    if let Some(eta) = out.eta {
        rows.push(("eta", format_f64(eta)));
    }
    rows.extend([
        ("t", format_f64(out.t)),
        ("delta_cap", format_f64(out.delta_cap)),
        ("d_const", format_f64(out.d_const)),
        ("ev_bound", format_f64(out.ev_bound)),
    ]);
    project(format, "lambda", cfg, &out, rows)
}

fn cmd_oracle(a: &OracleArgs, seed: u64, format: Format) -> Result<String> {
    let problem = read_problem(&a.problem)?;
    let truth = read_truth_json(&a.truth)?;
    let spec = a.norm.resolve(problem.p())?;
    let norm = spec.build(problem.p())?;
    let sets = a.set.iter().map(|s| parse_indices(s)).collect::<Result<Vec<_>>>()?;
    let lambda = match a.lambda {
        Some(l) => l,
        None => theoretical_lambda(&spec, problem.n(), problem.p(), a.alpha, None)?.lambda,
    };
    let opts = CertificateOptions {
        delta: a.delta,
        sparsity: SparsityOptions {
            restarts: a.restarts,
            dense_samples: a.dense_samples,
            seed,
            ..SparsityOptions::default()
        },
        noise_substitution: a.noise_c.map(|c| (truth.sigma, c)),
    };
    let fit = fit_with_norm(&problem, &norm, &SolverConfig::new(lambda))?;
    if !fit.converged {
        return Err(Error::NotConverged {
            kkt_residual: fit.kkt_residual,
        });
    }
    let point: OraclePoint = best_oracle_point(
        &problem,
        &norm,
        &sets,
        &truth.beta0_vec(),
        &truth.noise_vec(),
        &fit,
        &opts,
    )?;
    let c = &point.certificate;
    let cfg = json!({"problem": a.problem, "truth": a.truth, "norm": spec, "sets": sets,
        "lambda": lambda, "alpha": a.alpha, "options": opts});
    let set: Vec<String> = point.set.iter().map(|j| j.to_string()).collect();
    let rows = vec![
        ("set", set.join(" ")),
        ("lambda", format_f64(c.lambda)),
        ("f", format_f64(c.levels.f)),
        ("lambda0", format_f64(c.levels.lambda0)),
        ("lambda_m", format_f64(c.levels.lambda_m)),
        ("lambda_star", format_f64(c.lambda_star)),
        ("lambda_tilde", format_f64(c.lambda_tilde)),
        ("l_s", opt(c.l_s)),
        ("gamma_sq", opt(c.gamma_sq)),
        ("lhs", format_f64(c.lhs)),
        ("rhs", opt(c.rhs)),
        ("assumptions_ok", c.assumptions_ok.to_string()),
        ("rank_deficient", point.rank_deficient.to_string()),
    ];
    project(format, "oracle", cfg, &point, rows)
}

fn cmd_simulate(a: &SimulateArgs, seed: Option<u64>, format: Format) -> Result<String> {
    let base = SimulationConfig::profile(a.profile, a.scenario, seed.unwrap_or(0));
    let config = SimulationConfig {
        repetitions: a.repetitions.unwrap_or(base.repetitions),
        n: a.n.unwrap_or(base.n),
        p: a.p.unwrap_or(base.p),
        sigma: a.sigma.unwrap_or(base.sigma),
        rho: a.rho.unwrap_or(base.rho),
        ..base
    };
    let report = run_study(&config)?;
    match format {
        Format::Json => envelope("simulate", &config, &report),
        Format::Csv => report.to_csv(),
        Format::Text => Ok(report.to_text()),
    }
}

fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, cli.format),
        Command::KktCheck(a) => cmd_kkt(a, cli.format),
        Command::Lambda(a) => cmd_lambda(a, cli.format),
        Command::Oracle(a) => cmd_oracle(a, cli.seed.unwrap_or(0), cli.format),
        Command::Simulate(a) => cmd_simulate(a, cli.seed, cli.format),
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if argv.len() <= 1 {
        eprintln!("{}", Cli::command().render_help());
        return 1;
    }
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .try_init();

    match execute(&cli).and_then(|text| emit(&cli, &text)) {
        Ok(()) => 0,
        Err(e) if e.is_numerical() => {
            let body = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            println!("{}", serde_json::to_string_pretty(&body).expect("error object serializes"));
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}
