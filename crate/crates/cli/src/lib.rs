//! `netprice` command-line front end.
//!
//! Exit status: 0 on success, 2 when inputs fail validation (the reason and
//! any assumption report go to stderr), 1 on internal errors.

pub mod families;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use netprice::network::{check_assumption2, check_assumption3, compute_measures, taylor_revenue};
use netprice::optimizer::{
    self, example1_enumerate, example1_network, example1_thresholds, hessian_check,
    kkt_check_all_sales, two_buyer_all_sales_oracle, ObjectiveSpec,
};
use netprice::output::{fmt_g12, CsvTable};
use netprice::pricing::{self, PolicyReport, DEFAULT_GRID};
use netprice::simulator::{convergence_study, monte_carlo};
use netprice::{BlockNetwork, NetPriceError, PricePath, UniformNetwork, ValuationDistribution};

use families::Family;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Validation {
        message: String,
        report: Option<Value>,
    },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError::Validation {
            message: message.into(),
            report: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<NetPriceError> for CliError {
    fn from(e: NetPriceError) -> Self {
        match e {
            NetPriceError::Io(_) | NetPriceError::NonConvergence { .. } => {
                CliError::Internal(e.to_string())
            }
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "netprice", version, about = "Optimal committed pricing with network externalities")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form optimal price path for one policy.
    PricePath(PricePathArgs),
    /// Validate a network (and optionally a distribution) against the model assumptions.
    Check(CheckArgs),
    /// Monte Carlo simulation of threshold play in a finite market.
    Simulate(SimulateArgs),
    /// Revenue or price paths over grids of externality and horizon.
    Sweep(SweepArgs),
    /// Revenue of star, chain and ring perturbations of the identity network.
    CompareNetworks(CompareArgs),
    /// Numerical oracles and optimality diagnostics.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyMode {
    Uniform,
    Block,
    Nonuniform,
    Discriminate,
    Static,
    Nocommit,
    Allsales,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct NetworkArgs {
    /// Uniform scalar externality g.
    #[arg(long, conflicts_with = "network")]
    pub gamma: Option<f64>,
    /// JSON file {"alpha": [...], "E": [[...]]}.
    #[arg(long)]
    pub network: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Omit the leading `# generated` line of CSV output.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PricePathArgs {
    #[arg(long, value_enum)]
    pub mode: PolicyMode,
    #[command(flatten)]
    pub net: NetworkArgs,
    #[arg(long, short = 'T')]
    pub rounds: Option<usize>,
    /// uniform, power:k or table:<file>.
    #[arg(long, default_value = "uniform")]
    pub dist: String,
    /// Also report the infinite-horizon all-sales revenue.
    #[arg(long)]
    pub limit: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub net: NetworkArgs,
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub net: NetworkArgs,
    #[arg(long, short = 'T')]
    pub rounds: usize,
    #[arg(long, default_value = "uniform")]
    pub dist: String,
    /// Market size for a single Monte Carlo run.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Comma-separated ascending market sizes for a convergence study.
    #[arg(long)]
    pub n_list: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "uniform")]
    pub mode: PolicyMode,
    /// Comma-separated externality values.
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long, conflicts_with = "gamma")]
    pub network: Option<PathBuf>,
    /// Horizon range `a..b` (inclusive) or comma list.
    #[arg(long, short = 'T')]
    pub rounds: String,
    #[arg(long, default_value = "uniform")]
    pub dist: String,
    /// Emit one row per round with the price path instead of one row per horizon.
    #[arg(long)]
    pub paths: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long, default_value = "star,chain,ring")]
    pub family: String,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 0.29)]
    pub delta: f64,
    #[arg(long, default_value_t = 30.0)]
    pub weight_sum: f64,
    #[arg(long, short = 'T', default_value = "1..12")]
    pub rounds: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Uniform,
    Block,
    Nonuniform,
    Discrimination,
    TwoBuyer,
    Kkt,
    Hessian,
    Example1,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub kind: OracleKind,
    #[command(flatten)]
    pub net: NetworkArgs,
    #[arg(long, short = 'T', default_value_t = 2)]
    pub rounds: usize,
    #[arg(long, default_value = "uniform")]
    pub dist: String,
    /// Grid points per axis for the two-buyer search.
    #[arg(long, default_value_t = 1001)]
    pub grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub starts: usize,
    /// Objective for the Hessian check.
    #[arg(long, value_enum, default_value = "block")]
    pub objective: HessianObjective,
    /// Example-1 weights and prices.
    #[arg(long, default_value_t = 0.8)]
    pub a: f64,
    #[arg(long, default_value_t = 0.6)]
    pub b: f64,
    #[arg(long, default_value_t = 0.6)]
    pub p1: f64,
    #[arg(long, default_value_t = 0.48)]
    pub p2: f64,
    #[arg(long)]
    pub asymmetric: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HessianObjective {
    Uniform,
    Block,
    Nonuniform,
    Discrimination,
}

/// Parses arguments, runs, reports errors and returns the exit status.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    match run(&config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Validation {
                report: Some(report),
                ..
            } = &e
            {
                eprintln!("{}", serde_json::to_string_pretty(report).unwrap_or_default());
            }
            e.exit_code()
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("NETPRICE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn run(config: &RunConfig) -> CliResult<()> {
    match &config.command {
        Command::PricePath(a) => price_path(a),
        Command::Check(a) => check(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::CompareNetworks(a) => compare_networks(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn load_network(args: &NetworkArgs) -> CliResult<BlockNetwork> {
    match (&args.gamma, &args.network) {
        (Some(g), None) => Ok(BlockNetwork::uniform(*g)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
            Ok(BlockNetwork::from_json_str(&text)?)
        }
        _ => Err(CliError::validation("give exactly one of --gamma or --network")),
    }
}

fn require_gamma(args: &NetworkArgs) -> CliResult<f64> {
    let g = args
        .gamma
        .ok_or_else(|| CliError::validation("this mode needs --gamma"))?;
    Ok(UniformNetwork::new(g)?.g())
}

fn require_rounds(r: Option<usize>) -> CliResult<usize> {
    match r {
        Some(t) if t >= 1 => Ok(t),
        Some(_) => Err(CliError::validation("--rounds must be at least 1")),
        None => Err(CliError::validation("this mode needs --rounds")),
    }
}

fn assumption2_gate(net: &BlockNetwork) -> CliResult<()> {
    let report = check_assumption2(net);
    if report.passed() {
        return Ok(());
    }
    Err(CliError::Validation {
        message: format!("assumption check failed: {}", report.failures().join("; ")),
        report: serde_json::to_value(&report).ok(),
    })
}

fn assumption3_gate(net: &BlockNetwork, dist: &ValuationDistribution) -> CliResult<()> {
    let report = check_assumption3(net, dist, DEFAULT_GRID)?;
    if report.passed() {
        return Ok(());
    }
    Err(CliError::Validation {
        message: format!("assumption check failed: {}", report.failures().join("; ")),
        report: serde_json::to_value(&report).ok(),
    })
}

/// Parses `a..b`, `a..=b` (both inclusive) or a comma list.
pub fn parse_rounds(s: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::validation(format!("bad rounds specification `{s}`"));
    let s = s.trim();
    let out: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let b = b.trim_start_matches('=');
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect::<CliResult<_>>()?
    };
    if out.is_empty() || out.contains(&0) {
        return Err(bad());
    }
    Ok(out)
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::validation(format!("bad {what} value `{x}`")))
        })
        .collect()
}

fn timestamp_line() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# generated unix={secs}\n")
}

/// Writes to `path` through a temporary file in the same directory, or to
/// standard output.
pub fn write_output(path: Option<&Path>, contents: &str) -> CliResult<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())?;
            out.flush()?;
            Ok(())
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => PathBuf::from("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
            tmp.write_all(contents.as_bytes())?;
            tmp.as_file().sync_all()?;
            tmp.persist(path).map_err(|e| CliError::Internal(e.to_string()))?;
            Ok(())
        }
    }
}

fn emit_csv(output: &OutputArgs, table: &CsvTable) -> CliResult<()> {
    let mut text = String::new();
    if !output.no_header {
        text.push_str(&timestamp_line());
    }
    text.push_str(&table.to_csv_string());
    write_output(output.out.as_deref(), &text)
}

fn emit_json(out: Option<&Path>, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_output(out, &text)
}

fn emit(output: &OutputArgs, table: CsvTable, value: Value) -> CliResult<()> {
    match output.format {
        Format::Csv => emit_csv(output, &table),
        Format::Json => emit_json(output.out.as_deref(), &value),
    }
}

/// Flattens a JSON object into `field,value` rows.
fn key_value_table(value: &Value) -> CsvTable {
    fn walk(prefix: &str, v: &Value, t: &mut CsvTable) {
        match v {
            Value::Object(map) => {
                for (k, x) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, t);
                }
            }
            Value::Array(items) => {
                for (i, x) in items.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), x, t);
                }
            }
            Value::Number(n) => {
                let s = n.as_f64().map(fmt_g12).unwrap_or_else(|| n.to_string());
                t.push(vec![prefix.to_string(), s]);
            }
            Value::Null => t.push(vec![prefix.to_string(), String::new()]),
            Value::String(s) => t.push(vec![prefix.to_string(), s.clone()]),
            Value::Bool(b) => t.push(vec![prefix.to_string(), b.to_string()]),
        }
    }
    let mut t = CsvTable::new(["field", "value"]);
    walk("", value, &mut t);
    t
}

fn to_json<T: serde::Serialize>(x: &T) -> CliResult<Value> {
    serde_json::to_value(x).map_err(|e| CliError::Internal(e.to_string()))
}

fn compute_policy(
    mode: PolicyMode,
    net_args: &NetworkArgs,
    rounds: Option<usize>,
    dist: &str,
) -> CliResult<PolicyReport> {
    match mode {
        PolicyMode::Uniform => {
            let g = require_gamma(net_args)?;
            Ok(pricing::uniform_policy(g, require_rounds(rounds)?)?)
        }
        PolicyMode::Block => {
            let net = load_network(net_args)?;
            assumption2_gate(&net)?;
            Ok(pricing::block_policy(&net, require_rounds(rounds)?)?)
        }
        PolicyMode::Nonuniform => {
            let net = load_network(net_args)?;
            let dist = ValuationDistribution::parse(dist)?;
            assumption2_gate(&net)?;
            assumption3_gate(&net, &dist)?;
            Ok(pricing::nonuniform_policy(&net, &dist, require_rounds(rounds)?)?)
        }
        PolicyMode::Discriminate => {
            let net = load_network(net_args)?;
            assumption2_gate(&net)?;
            Ok(pricing::discrimination_policy(&net, require_rounds(rounds)?)?)
        }
        PolicyMode::Static => Ok(pricing::static_policy(&load_network(net_args)?)?),
        PolicyMode::Allsales => {
            let net = load_network(net_args)?;
            Ok(pricing::all_sales_policy(&net, require_rounds(rounds)?)?)
        }
        PolicyMode::Nocommit => Err(CliError::validation(
            "the no-commitment policy has no committed path; use price-path --mode nocommit",
        )),
    }
}

fn price_path(a: &PricePathArgs) -> CliResult<()> {
    if a.mode == PolicyMode::Nocommit {
        let g = a
            .net
            .gamma
            .ok_or_else(|| CliError::validation("nocommit needs --gamma"))?;
        let report = pricing::no_commitment_two_period(g)?;
        return emit(&a.output, report.to_csv_table(), to_json(&report)?);
    }
    let report = compute_policy(a.mode, &a.net, a.rounds, &a.dist)?;
    let mut value = to_json(&report)?;
    if a.limit {
        if a.mode != PolicyMode::Allsales {
            return Err(CliError::validation("--limit applies to --mode allsales"));
        }
        let limit = pricing::all_sales_limit(&load_network(&a.net)?)?;
        value["infinite_horizon_revenue"] = json!(limit);
    }
    emit(&a.output, report.to_csv_table(), value)
}

fn check(a: &CheckArgs) -> CliResult<()> {
    let net = load_network(&a.net)?;
    let a2 = check_assumption2(&net);
    let mut passed = a2.passed();
    let mut value = json!({ "assumption2": a2 });
    if let Ok(measures) = compute_measures(&net) {
        value["measures"] = to_json(&measures)?;
    }
    if let Some(spec) = &a.dist {
        let dist = ValuationDistribution::parse(spec)?;
        let a3 = check_assumption3(&net, &dist, a.grid)?;
        passed &= a3.passed();
        value["assumption3"] = to_json(&a3)?;
    }
    value["passed"] = json!(passed);
    if passed {
        emit_json(a.out.as_deref(), &value)
    } else {
        Err(CliError::Validation {
            message: "network fails the model assumptions".into(),
            report: Some(value),
        })
    }
}

fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let net = load_network(&a.net)?;
    let dist = ValuationDistribution::parse(&a.dist)?;
    assumption2_gate(&net)?;
    if let Some(list) = &a.n_list {
        let n_list: Vec<usize> = parse_list(list, "n")?;
        let table = convergence_study(&net, &dist, a.rounds, &n_list, a.reps, a.seed)?;
        let mut value = to_json(&table)?;
        value["log_log_slope"] = json!(table.log_log_slope());
        return emit(&a.output, table.to_csv_table(), value);
    }
    let policy = if dist.is_uniform() {
        pricing::block_policy(&net, a.rounds)?
    } else {
        assumption3_gate(&net, &dist)?;
        pricing::nonuniform_policy(&net, &dist, a.rounds)?
    };
    let report = monte_carlo(&net, &dist, &policy.path, a.n, a.reps, a.seed)?;
    let mut table = CsvTable::new([
        "n",
        "reps",
        "seed",
        "mean_revenue",
        "stderr_revenue",
        "closed_form_revenue",
        "mean_welfare",
        "stderr_welfare",
        "closed_form_welfare",
    ]);
    table.push(vec![
        a.n.to_string(),
        a.reps.to_string(),
        a.seed.to_string(),
        fmt_g12(report.mean_revenue),
        fmt_g12(report.stderr_revenue),
        fmt_g12(policy.normalized_revenue),
        fmt_g12(report.mean_welfare),
        fmt_g12(report.stderr_welfare),
        policy.welfare.map(fmt_g12).unwrap_or_default(),
    ]);
    let mut value = to_json(&report)?;
    value["closed_form_revenue"] = json!(policy.normalized_revenue);
    value["closed_form_welfare"] = json!(policy.welfare);
    emit(&a.output, table, value)
}

fn sweep(a: &SweepArgs) -> CliResult<()> {
    let rounds = parse_rounds(&a.rounds)?;
    let cases: Vec<(String, NetworkArgs)> = match (&a.gamma, &a.network) {
        (Some(list), None) => parse_list::<f64>(list, "gamma")?
            .into_iter()
            .map(|g| {
                (
                    fmt_g12(g),
                    NetworkArgs {
                        gamma: Some(g),
                        network: None,
                    },
                )
            })
            .collect(),
        (None, Some(path)) => vec![(
            path.display().to_string(),
            NetworkArgs {
                gamma: None,
                network: Some(path.clone()),
            },
        )],
        _ => return Err(CliError::validation("give exactly one of --gamma or --network")),
    };
    let mut rows = Vec::new();
    let mut table = if a.paths {
        CsvTable::new(["gamma", "T", "round", "t_remaining", "price", "step"])
    } else {
        CsvTable::new(["gamma", "T", "revenue", "welfare", "first_price", "last_price", "slope"])
    };
    for (label, net_args) in &cases {
        for &t in &rounds {
            let report = compute_policy(a.mode, net_args, Some(t), &a.dist)?;
            let prices: Vec<f64> = (0..t).map(|r| report.path.price(r, 0)).collect();
            if a.paths {
                for r in 0..t {
                    let step = if r == 0 { 0.0 } else { prices[r] - prices[r - 1] };
                    table.push(vec![
                        label.clone(),
                        t.to_string(),
                        (r + 1).to_string(),
                        (t - r).to_string(),
                        fmt_g12(prices[r]),
                        if r == 0 { String::new() } else { fmt_g12(step) },
                    ]);
                }
            } else {
                let slope = if t > 1 { prices[1] - prices[0] } else { 0.0 };
                table.push(vec![
                    label.clone(),
                    t.to_string(),
                    fmt_g12(report.normalized_revenue),
                    report.welfare.map(fmt_g12).unwrap_or_default(),
                    fmt_g12(prices[0]),
                    fmt_g12(prices[t - 1]),
                    fmt_g12(slope),
                ]);
            }
            rows.push(json!({ "case": label, "T": t, "report": to_json(&report)? }));
        }
    }
    emit(&a.output, table, Value::Array(rows))
}

fn compare_networks(a: &CompareArgs) -> CliResult<()> {
    let rounds = parse_rounds(&a.rounds)?;
    let families: Vec<Family> = a
        .family
        .split(',')
        .map(|s| s.parse().map_err(CliError::validation))
        .collect::<CliResult<_>>()?;
    if a.m < 2 {
        return Err(CliError::validation("--m must be at least 2"));
    }
    let mut table = CsvTable::new([
        "family",
        "T",
        "revenue",
        "taylor_revenue",
        "network_effect",
        "asymmetry",
    ]);
    let mut rows = Vec::new();
    for fam in families {
        let c = fam.weights(a.m, a.weight_sum);
        let net = fam.network(a.m, a.weight_sum, a.delta)?;
        assumption2_gate(&net)?;
        let measures = compute_measures(&net)?;
        let asym = netprice::network::asymmetry(&c);
        for &t in &rounds {
            let report = pricing::block_policy(&net, t)?;
            let taylor = taylor_revenue(&c, t, a.delta);
            table.push(vec![
                fam.to_string(),
                t.to_string(),
                fmt_g12(report.normalized_revenue),
                fmt_g12(taylor),
                fmt_g12(measures.network_effect),
                fmt_g12(asym),
            ]);
            rows.push(json!({
                "family": fam.to_string(),
                "T": t,
                "revenue": report.normalized_revenue,
                "taylor_revenue": taylor,
                "network_effect": measures.network_effect,
                "asymmetry": asym,
            }));
        }
    }
    emit(&a.output, table, Value::Array(rows))
}

fn comparison_table(closed: &PricePath, closed_rev: f64, oracle: &PricePath, oracle_rev: f64) -> CsvTable {
    let mut t = CsvTable::new(["quantity", "closed_form", "oracle", "abs_diff"]);
    let width = closed.groups().unwrap_or(1);
    for r in 0..closed.rounds() {
        for i in 0..width {
            let name = if closed.groups().is_some() {
                format!("price_r{}_g{}", r + 1, i + 1)
            } else {
                format!("price_r{}", r + 1)
            };
            let (x, y) = (closed.price(r, i), oracle.price(r, i));
            t.push(vec![name, fmt_g12(x), fmt_g12(y), fmt_g12((x - y).abs())]);
        }
    }
    t.push(vec![
        "revenue".into(),
        fmt_g12(closed_rev),
        fmt_g12(oracle_rev),
        fmt_g12((closed_rev - oracle_rev).abs()),
    ]);
    t
}

fn objective_for(kind: HessianObjective, a: &OracleArgs) -> CliResult<ObjectiveSpec> {
    let rounds = a.rounds;
    Ok(match kind {
        HessianObjective::Uniform => ObjectiveSpec::Uniform {
            g: a.net.gamma.ok_or_else(|| CliError::validation("needs --gamma"))?,
            rounds,
        },
        HessianObjective::Block => ObjectiveSpec::Block {
            net: load_network(&a.net)?,
            rounds,
        },
        HessianObjective::Nonuniform => ObjectiveSpec::Nonuniform {
            net: load_network(&a.net)?,
            dist: ValuationDistribution::parse(&a.dist)?,
            rounds,
        },
        HessianObjective::Discrimination => ObjectiveSpec::Discrimination {
            net: load_network(&a.net)?,
            rounds,
        },
    })
}

fn oracle(a: &OracleArgs) -> CliResult<()> {
    let opts = optimizer::MaximizeOptions {
        starts: a.starts,
        seed: a.seed,
        ..Default::default()
    };
    let compare = |spec: ObjectiveSpec, closed: PolicyReport| -> CliResult<()> {
        let r = optimizer::maximize_with(&spec, &opts)?;
        let table = comparison_table(&closed.path, closed.normalized_revenue, &r.argmax, r.value);
        let value = json!({ "closed_form": to_json(&closed)?, "oracle": to_json(&r)? });
        emit(&a.output, table, value)
    };
    match a.kind {
        OracleKind::Uniform => {
            let g = require_gamma(&a.net)?;
            let closed = pricing::uniform_policy(g, a.rounds)?;
            compare(ObjectiveSpec::Uniform { g, rounds: a.rounds }, closed)
        }
        OracleKind::Block => {
            let net = load_network(&a.net)?;
            assumption2_gate(&net)?;
            let closed = pricing::block_policy(&net, a.rounds)?;
            compare(ObjectiveSpec::Block { net, rounds: a.rounds }, closed)
        }
        OracleKind::Nonuniform => {
            let net = load_network(&a.net)?;
            let dist = ValuationDistribution::parse(&a.dist)?;
            assumption2_gate(&net)?;
            assumption3_gate(&net, &dist)?;
            let closed = pricing::nonuniform_policy(&net, &dist, a.rounds)?;
            compare(ObjectiveSpec::Nonuniform { net, dist, rounds: a.rounds }, closed)
        }
        OracleKind::Discrimination => {
            let net = load_network(&a.net)?;
            assumption2_gate(&net)?;
            let closed = pricing::discrimination_policy(&net, a.rounds)?;
            compare(ObjectiveSpec::Discrimination { net, rounds: a.rounds }, closed)
        }
        OracleKind::TwoBuyer => {
            let g = require_gamma(&a.net)?;
            let value = to_json(&two_buyer_all_sales_oracle(g, a.grid))?;
            emit(&a.output, key_value_table(&value), value)
        }
        OracleKind::Kkt => {
            let net = load_network(&a.net)?;
            let value = to_json(&kkt_check_all_sales(&net, a.rounds)?)?;
            emit(&a.output, key_value_table(&value), value)
        }
        OracleKind::Hessian => {
            let spec = objective_for(a.objective, a)?;
            let report = hessian_check(&spec);
            let value = to_json(&report)?;
            emit(&a.output, key_value_table(&value), value)?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::validation(format!(
                    "Hessian has positive eigenvalue {}",
                    report.max_eigenvalue
                )))
            }
        }
        OracleKind::Example1 => {
            let net = example1_network(a.a, a.b)?;
            let v2 = example1_thresholds(a.a, a.b, a.p2, a.p1, !a.asymmetric);
            let prices = PricePath::Scalar(vec![a.p2, a.p1]);
            let revenue = example1_enumerate(&net, &prices, &v2)?;
            let value = json!({
                "a": a.a, "b": a.b, "p2": a.p2, "p1": a.p1,
                "branch": if a.asymmetric { "asymmetric" } else { "symmetric" },
                "first_round_thresholds": v2,
                "expected_revenue": revenue,
            });
            emit(&a.output, key_value_table(&value), value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_parsing() {
        assert_eq!(parse_rounds("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_rounds("2..=4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_rounds("5, 7").unwrap(), vec![5, 7]);
        assert!(parse_rounds("0..2").is_err());
        assert!(parse_rounds("4..2").is_err());
        assert!(parse_rounds("x").is_err());
    }

    #[test]
    fn error_codes() {
        let v: CliError = NetPriceError::AssumptionViolated("x".into()).into();
        assert_eq!(v.exit_code(), 2);
        let i: CliError = NetPriceError::Io("disk".into()).into();
        assert_eq!(i.exit_code(), 1);
    }

    #[test]
    fn flatten_json() {
        let t = key_value_table(&json!({"a": 1.5, "b": {"c": [true, null]}}));
        assert_eq!(
            t.to_csv_string(),
            "field,value\na,1.5\nb.c.0,true\nb.c.1,\n"
        );
    }
}
