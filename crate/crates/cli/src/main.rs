//! `coded-cache`: closed-form analysis, Monte Carlo sweeps and end-to-end
//! decode verification from the command line.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 usage error, 3 infeasible
//! parameters.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use coded_caching::analysis::{
    asymptotic_estimate, best_parallel_latency, best_successive_latency, connection_prob,
    expected_latency_corollary1, expected_latency_theorem1, lower_bound_z0, min_storage_latencies,
    successive_latency_closed_form, worst_parallel_latency, worst_successive_latency,
};
use coded_caching::delivery::{
    schedule_parallel, schedule_successive_redundant, schedule_successive_z0,
};
use coded_caching::model::parse_rational;
use coded_caching::simulate::{
    self, ExperimentSpec, Fault, PlannerKind, SweepAxis, SweepParam, TrialVerdict,
};
use coded_caching::{validate_params, Error, Rational, RawParams, Scalar, SystemParams, Topology};

const SEED_ENV: &str = "CODED_CACHE_SEED";

#[derive(Parser)]
#[command(
    name = "coded-cache",
    version,
    about = "Multi-server coded caching simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print closed-form latencies for one parameter point.
    Analyze(AnalyzeArgs),
    /// Run the experiment in a config file and write CSV.
    Simulate(RunArgs),
    /// Like simulate, with the sweep axis optionally given on the command line.
    Sweep(SweepArgs),
    /// Place, plan and decode over a grid of parameters; exit 1 on any failure.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct PointArgs {
    #[arg(long = "K")]
    users: usize,
    /// Defaults to K.
    #[arg(long = "N")]
    files: Option<usize>,
    #[arg(long = "P")]
    servers: usize,
    #[arg(long)]
    rho: usize,
    #[arg(long, default_value_t = 0)]
    z: usize,
    /// Integer or fractional caching parameter t = K M_U / N.
    #[arg(long, conflicts_with = "mu", required_unless_present = "mu", value_parser = parse_rational_arg)]
    t: Option<Rational>,
    /// User cache M_U in files, e.g. 1.25 or 5/4.
    #[arg(long, value_parser = parse_rational_arg)]
    mu: Option<Rational>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    point: PointArgs,
    /// JSON file {"server_sets": [[...], ...]} with 0-based server indices.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Emit JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    /// RunConfig JSON file.
    config: PathBuf,
    /// Overrides the config's output path; "-" writes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides both CODED_CACHE_SEED and the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, requires = "values")]
    param: Option<AxisArg>,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', value_parser = parse_rational_arg, requires = "param")]
    values: Option<Vec<Rational>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    #[value(name = "M_U")]
    UserCache,
    #[value(name = "M_S")]
    ServerStorage,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long = "P", value_delimiter = ',', default_values_t = [3, 5, 7])]
    servers: Vec<usize>,
    #[arg(long = "K", value_delimiter = ',', default_values_t = [3, 4, 5])]
    users: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0, 1, 2])]
    z: Vec<usize>,
    /// Values of rho; defaults to 2..=P for each P.
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<usize>>,
    /// Values of t, or "K" for t = K; defaults to 1..K-1.
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<String>>,
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Flip the first payload byte of the first message of every plan.
    #[arg(long)]
    corrupt_one_message: bool,
    /// Where to write the JSON report; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

/// `ExperimentSpec` plus where and how to write the result.
#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    params: RawParams,
    planner: PlannerKind,
    trials: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    sweep: Option<SweepAxis>,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default)]
    format: OutputFormat,
}

#[derive(Debug, Default, Clone, Copy, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InfeasibleStorage { .. } | Error::BadRange(_) => 3,
            Error::Trial { source, .. } if matches!(**source, Error::InfeasibleStorage { .. }) => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Simulate(r) => cmd_simulate(r, None),
        Command::Sweep(s) => {
            let axis = match (s.param, s.values) {
                (Some(p), Some(values)) => Some(SweepAxis {
                    param: match p {
                        AxisArg::UserCache => SweepParam::UserCache,
                        AxisArg::ServerStorage => SweepParam::ServerStorage,
                    },
                    values,
                }),
                _ => None,
            };
            cmd_simulate(s.run, Some(axis))
        }
        Command::Verify(v) => cmd_verify(v),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn point_params(p: &PointArgs) -> Result<SystemParams, Failure> {
    let files = p.files.unwrap_or(p.users);
    let user_cache = match (p.t, p.mu) {
        (Some(t), _) => {
            t * Rational::from_integer(files as i128)
                / Rational::from_integer(p.users.max(1) as i128)
        }
        (None, Some(mu)) => mu,
        (None, None) => return Err(Failure::usage("one of --t or --mu is required")),
    };
    Ok(validate_params(RawParams::new(
        p.users, files, p.servers, p.rho, p.z, user_cache,
    ))?)
}

#[derive(Serialize)]
struct AnalyzeReport {
    users: usize,
    files: usize,
    servers: usize,
    rho: usize,
    z: usize,
    t: String,
    user_cache: String,
    server_storage: String,
    alpha: String,
    alpha_hat: String,
    values: Vec<(String, String, f64)>,
}

type Values = Vec<(String, Option<Rational>, f64)>;

fn push(values: &mut Values, name: &str, v: Rational) {
    values.push((name.to_string(), Some(v), v.to_f64()));
}

fn cmd_analyze(a: AnalyzeArgs) -> CmdResult {
    let prm = point_params(&a.point)?;
    let (k, p, rho, z) = (prm.users(), prm.servers(), prm.rho(), prm.z());
    let alpha = prm.alpha();
    // (name, exact value if any, value)
    let mut values: Values = Vec::new();

    if let Some(t) = prm.integer_t() {
        if z == 0 {
            push(
                &mut values,
                "corollary1",
                expected_latency_corollary1(k, t, &alpha),
            );
            let w: Vec<Rational> = (0..=k).map(|i| connection_prob(i, k, &alpha)).collect();
            push(
                &mut values,
                "theorem1",
                expected_latency_theorem1(&w, k, t, &alpha)?,
            );
            push(
                &mut values,
                "best_successive",
                best_successive_latency(k, t),
            );
            push(
                &mut values,
                "worst_successive",
                worst_successive_latency(k, t, p, rho),
            );
            push(
                &mut values,
                "best_parallel",
                best_parallel_latency(k, t, p, rho),
            );
            push(
                &mut values,
                "worst_parallel",
                worst_parallel_latency(k, t, rho),
            );
        }
        let (est, _) = asymptotic_estimate(k, t, alpha.to_f64(), prm.alpha_hat().to_f64(), p)?;
        values.push(("asymptotic".to_string(), None, est));
    }
    let (ms_sd, ms_pd) = min_storage_latencies(k, rho, &prm.user_cache(), prm.files());
    push(&mut values, "min_storage_t_sd", ms_sd);
    push(&mut values, "min_storage_t_pd", ms_pd);

    if let Some(path) = &a.topology {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let topo = Topology::from_json(&text, p).map_err(|e| Failure::usage(e.to_string()))?;
        topo.check(&prm)
            .map_err(|e| Failure::usage(e.to_string()))?;
        let t = prm
            .integer_t()
            .ok_or_else(|| Failure::usage("per-topology values need an integer t"))?;
        if z == 0 {
            push(
                &mut values,
                "topology_closed_form",
                successive_latency_closed_form(&topo.type_vector(), k, t, p, rho)?,
            );
            push(
                &mut values,
                "topology_lower_bound",
                lower_bound_z0(&topo.loads(), k, t, rho),
            );
            let s = schedule_successive_z0(&topo, t)?.latency();
            push(&mut values, "topology_t_sd", s.t_sd);
        } else {
            let s = schedule_successive_redundant(&topo, t, prm.code_dim())?.latency();
            push(&mut values, "topology_t_sd", s.t_sd);
        }
        push(
            &mut values,
            "topology_t_pd",
            schedule_parallel(&topo, t, prm.code_dim())?.latency().t_pd,
        );
    }

    let mut out = io::stdout().lock();
    if a.json {
        let report = AnalyzeReport {
            users: k,
            files: prm.files(),
            servers: p,
            rho,
            z,
            t: prm.t().to_string(),
            user_cache: prm.user_cache().to_string(),
            server_storage: prm.server_storage().to_string(),
            alpha: alpha.to_string(),
            alpha_hat: prm.alpha_hat().to_string(),
            values: values
                .into_iter()
                .map(|(n, e, v)| (n, e.map(|e| e.to_string()).unwrap_or_default(), v))
                .collect(),
        };
        let text = serde_json::to_string_pretty(&report).expect("plain data serializes");
        writeln!(out, "{text}").map_err(|e| Failure::usage(e.to_string()))?;
    } else {
        writeln!(
            out,
            "K={k} N={} P={p} rho={rho} z={z} t={} M_U={} M_S={} alpha={alpha} alpha_hat={}",
            prm.files(),
            prm.t(),
            prm.user_cache(),
            prm.server_storage(),
            prm.alpha_hat()
        )
        .map_err(|e| Failure::usage(e.to_string()))?;
        for (name, exact, v) in values {
            let exact = exact.map(|e| format!(" ({e})")).unwrap_or_default();
            writeln!(out, "{name} = {v}{exact}").map_err(|e| Failure::usage(e.to_string()))?;
        }
    }
    Ok(0)
}

/// Flag, then environment, then config.
fn resolve_seed(flag: Option<u64>, config: u64) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Failure::usage(format!(
                "{SEED_ENV}={v:?} is not an unsigned 64-bit integer"
            ))
        }),
        Err(_) => Ok(config),
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Writes through a temporary sibling and renames, so a failed run leaves
/// no partial file behind.
fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let tmp = path.with_extension("partial");
    let result = (|| -> io::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Failure::usage(format!("{}: {e}", path.display()))
    })
}

fn cmd_simulate(r: RunArgs, axis_override: Option<Option<SweepAxis>>) -> CmdResult {
    let cfg = load_config(&r.config)?;
    let seed = resolve_seed(r.seed, cfg.seed)?;
    let mut sweep = cfg.sweep;
    if let Some(Some(axis)) = axis_override.clone() {
        sweep = Some(axis);
    }
    if axis_override.is_some() && sweep.is_none() {
        return Err(Failure::usage(
            "sweep needs an axis in the config or via --param/--values",
        ));
    }
    let spec = ExperimentSpec {
        params: cfg.params,
        planner: cfg.planner,
        trials: r.trials.unwrap_or(cfg.trials),
        seed,
        sweep,
    };
    let rows = simulate::sweep(&spec)?;
    let mut bytes = Vec::new();
    match cfg.format {
        OutputFormat::Csv => simulate::write_csv(&rows, &mut bytes)?,
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut bytes, &rows)
                .map_err(|e| Failure::usage(e.to_string()))?;
            bytes.push(b'\n');
        }
    }
    match r.output.or(cfg.output) {
        Some(path) if path.as_os_str() != "-" => write_atomically(&path, &bytes)?,
        _ => io::stdout()
            .write_all(&bytes)
            .map_err(|e| Failure::usage(e.to_string()))?,
    }
    Ok(0)
}

#[derive(Serialize)]
struct GridFailure {
    servers: usize,
    users: usize,
    rho: usize,
    z: usize,
    t: usize,
    seed: u64,
    #[serde(flatten)]
    verdict: TrialVerdict,
    failed_users: Vec<usize>,
}

#[derive(Serialize)]
struct VerifyOutput {
    cases: usize,
    runs: usize,
    failures: usize,
    corrupted: bool,
    failed: Vec<GridFailure>,
}

fn planners_for(z: usize) -> Vec<PlannerKind> {
    let mut v = Vec::new();
    if z == 0 {
        v.push(PlannerKind::SuccessiveZ0);
    }
    v.extend([PlannerKind::SuccessiveRedundant, PlannerKind::Parallel]);
    v
}

fn cmd_verify(v: VerifyArgs) -> CmdResult {
    let seed = resolve_seed(v.seed, 0)?;
    let fault = v.corrupt_one_message.then_some(Fault::CorruptFirstMessage);
    let mut out = VerifyOutput {
        cases: 0,
        runs: 0,
        failures: 0,
        corrupted: v.corrupt_one_message,
        failed: Vec::new(),
    };
    for &p in &v.servers {
        for &k in &v.users {
            let rhos: Vec<usize> = v.rho.clone().unwrap_or_else(|| (2..=p).collect());
            let ts: Vec<usize> = match &v.t {
                None => (1..k).collect(),
                Some(list) => list
                    .iter()
                    .map(|s| {
                        if s == "K" {
                            Ok(k)
                        } else {
                            s.parse().map_err(|_| Failure::usage(format!("bad t: {s}")))
                        }
                    })
                    .collect::<Result<_, _>>()?,
            };
            for &rho in rhos.iter().filter(|&&r| r <= p) {
                for &z in v.z.iter().filter(|&&z| z < rho) {
                    for &t in ts.iter().filter(|&&t| t <= k) {
                        let prm = validate_params(RawParams::with_t(k, k, p, rho, z, t))?;
                        out.cases += 1;
                        for planner in planners_for(z) {
                            for trial in 0..v.seeds {
                                let verdict =
                                    simulate::verify_trial(&prm, planner, seed, trial, fault)?;
                                out.runs += 1;
                                if !verdict.passed() {
                                    out.failures += 1;
                                    out.failed.push(GridFailure {
                                        servers: p,
                                        users: k,
                                        rho,
                                        z,
                                        t,
                                        seed,
                                        failed_users: verdict.report.failed_users(),
                                        verdict,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if out.cases == 0 {
        return Err(Failure::usage("the grid is empty"));
    }
    let text = serde_json::to_string_pretty(&out).expect("plain data serializes") + "\n";
    match &v.report {
        Some(path) => write_atomically(path, text.as_bytes())?,
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::usage(e.to_string()))?,
    }
    eprintln!(
        "{} runs over {} cases, {} failures",
        out.runs, out.cases, out.failures
    );
    Ok(if out.failures == 0 { 0 } else { 1 })
}
