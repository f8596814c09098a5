//! Argument parsing, dispatch and output for the `sphere-ramsey` binary.
//!
//! [`run`] is the whole program minus process setup, so tests drive it
//! in-process with captured streams.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sphere_ramsey::baseline::{beta_c, erdos_bound_at, improvement_ratio, DEFAULT_THRESHOLD};
use sphere_ramsey::certificate::{Certificate, MAX_DOCUMENT_BYTES};
use sphere_ramsey::constants::{alpha_c, select_p_star, solve_p_c, threshold_constants};
use sphere_ramsey::estimators::{
    coefficient_mean_for_sequence, estimate_clique_prob, estimate_kappa, estimate_projection_inner, estimate_q,
    exact_triangle_prob, perfect_fraction, Setting,
};
use sphere_ramsey::geometry::{cap_probability, sample_unit_vector, shifted_cap_check, solve_cap_threshold};
use sphere_ramsey::graph::{build_graph, certify_lower_bound, find_mono_clique, CertifyOutcome, Color};
use sphere_ramsey::mc::{purpose, substream, PredictionComparison};
use sphere_ramsey::perfect::{is_perfect, PerfectnessRule};
use sphere_ramsey::special::normal_quantile;
use sphere_ramsey::verify::{run_suite, Level, SuiteConfig};
use sphere_ramsey::Error;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const WORKERS_ENV: &str = "SPHERE_RAMSEY_WORKERS";

pub mod exit {
    pub const SUCCESS: u8 = 0;
    /// Infeasible request, exhausted search or failed verification.
    pub const NOT_FOUND: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const INTERNAL: u8 = 3;
}

#[derive(Debug, Parser)]
#[command(name = "sphere-ramsey", version, about = "Random sphere graphs and Ramsey lower bounds")]
pub struct Cli {
    /// Master seed; drawn from system entropy and recorded when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker count; results are reproducible for a fixed count.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Directory receiving the output and its manifest. Without it the
    /// output goes to stdout and the manifest to stderr.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// An explicit edge probability or `auto`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PChoice {
    Auto,
    Value(f64),
}

fn parse_p(s: &str) -> Result<PChoice, String> {
    if s == "auto" {
        return Ok(PChoice::Auto);
    }
    s.parse::<f64>().map(PChoice::Value).map_err(|e| format!("expected a number or `auto`: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorArg {
    Red,
    Blue,
}

impl From<ColorArg> for Color {
    fn from(c: ColorArg) -> Self {
        match c {
            ColorArg::Red => Color::Red,
            ColorArg::Blue => Color::Blue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    RedClique,
    BlueClique,
    Kappa,
    QRatio,
    CoefficientMean,
    ProjectionInner,
    PerfectFraction,
    ShiftedCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelArg {
    Quick,
    Full,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Threshold constants p_C, M_C, alpha_C, f(p_C), eps0, D, eps.
    Constants(ConstantsArgs),
    /// Cap threshold c_{k,p}, or the cap measure at a given height.
    Cap(CapArgs),
    /// Sample one sphere graph and search it for monochromatic cliques.
    Graph(GraphArgs),
    /// Search for, or re-verify, a Ramsey lower-bound certificate.
    Certify(CertifyArgs),
    /// Monte Carlo estimate of one quantity beside its prediction.
    Estimate(EstimateArgs),
    /// Run the acceptance battery.
    Verify(VerifyArgs),
    /// Erdos first-moment baseline and the sphere-graph improvement.
    Baseline(BaselineArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Constants(_) => "constants",
            Command::Cap(_) => "cap",
            Command::Graph(_) => "graph",
            Command::Certify(_) => "certify",
            Command::Estimate(_) => "estimate",
            Command::Verify(_) => "verify",
            Command::Baseline(_) => "baseline",
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[allow(non_snake_case)]
pub struct ConstantsArgs {
    #[arg(long = "C")]
    pub C: f64,
    /// With --k, also select p* for this D.
    #[arg(long = "D", requires = "k")]
    pub D: Option<f64>,
    #[arg(long, requires = "D")]
    pub k: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct CapArgs {
    #[arg(long)]
    pub k: usize,
    /// Solve for c with cap measure p.
    #[arg(long, required_unless_present = "a", conflicts_with = "a")]
    pub p: Option<f64>,
    /// Cap measure P(<y, e> <= a).
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
#[allow(non_snake_case)]
pub struct GraphArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_parser = parse_p, default_value = "auto")]
    pub p: PChoice,
    #[arg(long = "C", default_value_t = 2.0)]
    pub C: f64,
    #[arg(long = "D")]
    pub D: Option<f64>,
    #[arg(long)]
    pub red_size: Option<usize>,
    #[arg(long)]
    pub blue_size: Option<usize>,
    /// Include the sampled points in the JSON output.
    #[arg(long)]
    pub points: bool,
}

#[derive(Debug, Args, Serialize)]
#[allow(non_snake_case)]
pub struct CertifyArgs {
    #[arg(long = "C", required_unless_present = "check")]
    pub C: Option<f64>,
    #[arg(long, required_unless_present = "check")]
    pub ell: Option<usize>,
    #[arg(long, required_unless_present = "check")]
    pub n: Option<usize>,
    #[arg(long, required_unless_present = "check")]
    pub k: Option<usize>,
    #[arg(long, value_parser = parse_p, default_value = "auto")]
    pub p: PChoice,
    #[arg(long = "D")]
    pub D: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub max_attempts: u64,
    /// Re-verify a certificate file instead of searching.
    #[arg(long, conflicts_with_all = ["C", "ell", "n", "k"])]
    pub check: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[allow(non_snake_case)]
pub struct EstimateArgs {
    #[arg(long, value_enum)]
    pub quantity: Quantity,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    /// Coefficient index or projection order; defaults to 1 and r respectively.
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, value_parser = parse_p, default_value = "auto")]
    pub p: PChoice,
    #[arg(long = "C", default_value_t = 2.0)]
    pub C: f64,
    #[arg(long = "D")]
    pub D: Option<f64>,
    /// Red clique size l entering the perfectness bound alpha_C sqrt(l/k).
    #[arg(long, default_value_t = 3)]
    pub ell: usize,
    #[arg(long, value_enum, default_value_t = ColorArg::Red)]
    pub color: ColorArg,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Points per tuple for kappa.
    #[arg(long, default_value_t = 1_000)]
    pub inner_samples: u64,
    /// Shift A for the shifted-cap quantity (uses --D as the scale).
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub shift: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
    pub level: LevelArg,
}

#[derive(Debug, Args, Serialize)]
#[allow(non_snake_case)]
pub struct BaselineArgs {
    #[arg(long = "C", default_value_t = 2.0)]
    pub C: f64,
    /// Comma-separated list of l values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ell: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

/// Written beside every output. Re-running `argv` reproduces the output
/// bytes; only the timestamps differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub artifact_version: String,
    pub subcommand: String,
    pub params: Value,
    /// Effective arguments, with the seed and worker count made explicit.
    pub argv: Vec<String>,
    pub seed: u64,
    pub seed_from_entropy: bool,
    pub workers: usize,
    pub format: Format,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub outputs: Vec<String>,
    pub exit_code: u8,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest fields always serialize")
    }

    pub fn decode(text: &str) -> Result<Self, String> {
        if text.len() > MAX_DOCUMENT_BYTES {
            return Err(format!("manifest exceeds {MAX_DOCUMENT_BYTES} bytes"));
        }
        let m: RunManifest = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(format!("unsupported manifest schema {}", m.schema_version));
        }
        if m.workers == 0 || m.argv.is_empty() {
            return Err("manifest needs a positive worker count and a non-empty argv".into());
        }
        Ok(m)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: exit::USAGE, message: message.into() }
    }

    fn internal(message: impl Into<String>) -> Self {
        CliError { code: exit::INTERNAL, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::Decode(_) => exit::USAGE,
            Error::Infeasible(_) | Error::RejectionExhausted { .. } | Error::Resource(_) => exit::NOT_FOUND,
            Error::Singular { .. } => exit::INTERNAL,
        };
        CliError { code, message: e.to_string() }
    }
}

/// Rows for the CSV projection of an output.
#[derive(Debug, Default)]
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    fn row(mut self, cells: Vec<String>) -> Self {
        self.rows.push(cells);
        self
    }
}

struct Output {
    json: Value,
    table: Table,
    status: u8,
    /// Diagnostic line for non-zero statuses.
    note: Option<String>,
}

impl Output {
    fn ok(json: Value, table: Table) -> Self {
        Output { json, table, status: exit::SUCCESS, note: None }
    }
}

struct Ctx {
    seed: u64,
    workers: usize,
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("library types always serialize")
}

fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn has_flag(argv: &[String], flag: &str) -> bool {
    argv.iter().any(|a| a == flag || a.starts_with(&format!("{flag}=")))
}

/// Parses `argv` (including the program name) without executing anything.
pub fn parse_args<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(argv)
}

/// Parses `argv` (including the program name), executes it and writes the
/// result. Returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse_args(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let rendered = e.render().to_string();
            let _ = if code == exit::SUCCESS {
                stdout.write_all(rendered.as_bytes())
            } else {
                stderr.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let started = unix_ms();
    let seed_from_entropy = cli.seed.is_none();
    let seed = cli.seed.unwrap_or_else(rand::random);
    let workers = cli.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        let _ = writeln!(stderr, "error: --workers must be positive");
        return exit::USAGE;
    }
    // The pool can only be configured once per process; later calls keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    let ctx = Ctx { seed, workers };

    let output = match execute(&cli.command, &ctx) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            return e.code;
        }
    };
    let rendered = match render(&output, cli.format) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            return e.code;
        }
    };
    if let Some(note) = &output.note {
        let _ = writeln!(stderr, "{note}");
    }

    let mut effective: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    if !has_flag(&effective, "--seed") {
        effective.extend(["--seed".to_string(), seed.to_string()]);
    }
    if !has_flag(&effective, "--workers") {
        effective.extend(["--workers".to_string(), workers.to_string()]);
    }
    let name = cli.command.name();
    let mut manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: name.to_string(),
        params: to_value(&cli.command),
        argv: effective,
        seed,
        seed_from_entropy,
        workers,
        format: cli.format,
        started_unix_ms: started,
        finished_unix_ms: 0,
        outputs: Vec::new(),
        exit_code: output.status,
    };
    let written = match &cli.out {
        Some(dir) => write_files(dir, name, cli.format, &rendered, &mut manifest),
        None => {
            manifest.finished_unix_ms = unix_ms();
            stdout
                .write_all(rendered.as_bytes())
                .and_then(|_| writeln!(stderr, "{}", manifest.to_json()))
                .map_err(|e| CliError::internal(format!("cannot write output: {e}")))
        }
    };
    match written {
        Ok(()) => output.status,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

fn write_files(dir: &Path, name: &str, format: Format, rendered: &str, manifest: &mut RunManifest) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::internal(format!("cannot write under {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let out_path = dir.join(format!("{name}.{}", format.extension()));
    std::fs::write(&out_path, rendered).map_err(io)?;
    let manifest_path = dir.join(format!("{name}.manifest.json"));
    manifest.outputs = vec![out_path.display().to_string(), manifest_path.display().to_string()];
    manifest.finished_unix_ms = unix_ms();
    std::fs::write(&manifest_path, manifest.to_json() + "\n").map_err(io)
}

fn render(output: &Output, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(&output.json).expect("values always serialize") + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let fail = |e: csv::Error| CliError::internal(format!("csv encoding failed: {e}"));
            w.write_record(&output.table.header).map_err(fail)?;
            for row in &output.table.rows {
                w.write_record(row).map_err(fail)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::internal(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::internal(e.to_string()))
        }
    }
}

fn execute(cmd: &Command, ctx: &Ctx) -> Result<Output, CliError> {
    match cmd {
        Command::Constants(a) => constants(a),
        Command::Cap(a) => cap(a),
        Command::Graph(a) => graph(a, ctx),
        Command::Certify(a) => certify(a, ctx),
        Command::Estimate(a) => estimate(a, ctx),
        Command::Verify(a) => verify(a, ctx),
        Command::Baseline(a) => baseline(a),
    }
}

/// Resolves `--p auto`: p* when D is given, else p_C.
fn resolve_p(p: PChoice, c_ratio: f64, d_scale: Option<f64>, k: usize) -> Result<f64, CliError> {
    match (p, d_scale) {
        (PChoice::Value(v), _) => Ok(v),
        (PChoice::Auto, Some(d)) => Ok(select_p_star(c_ratio, d, k)?.p),
        (PChoice::Auto, None) => Ok(solve_p_c(c_ratio)?),
    }
}

fn constants(a: &ConstantsArgs) -> Result<Output, CliError> {
    let t = threshold_constants(a.C)?;
    let p_star = match (a.D, a.k) {
        (Some(d), Some(k)) => Some(select_p_star(a.C, d, k)?),
        _ => None,
    };
    let table = Table::new(&["C", "p_C", "M_C", "alpha_C", "f_pC", "eps0", "D", "eps", "p_star"]).row(vec![
        num(t.C),
        num(t.p_C),
        num(t.M_C),
        num(t.alpha_C),
        num(t.f_pC),
        num(t.eps0),
        num(t.D),
        num(t.eps),
        p_star.map_or(String::new(), |s| num(s.p)),
    ]);
    let mut json = to_value(&t);
    if let Some(s) = p_star {
        json["p_star"] = to_value(&s);
    }
    Ok(Output::ok(json, table))
}

fn cap(a: &CapArgs) -> Result<Output, CliError> {
    if let Some(p) = a.p {
        let th = solve_cap_threshold(a.k, p)?;
        let gaussian = if p == 0.5 { 0.0 } else { -normal_quantile(p)? };
        let json = json!({
            "k": th.k, "p": th.p, "c": th.c, "boundary": th.boundary(),
            "residual": th.residual, "gaussian_limit": gaussian,
        });
        let table = Table::new(&["k", "p", "c", "boundary", "residual", "gaussian_limit"]).row(vec![
            th.k.to_string(),
            num(th.p),
            num(th.c),
            num(th.boundary()),
            num(th.residual),
            num(gaussian),
        ]);
        return Ok(Output::ok(json, table));
    }
    let height = a.a.ok_or_else(|| CliError::usage("cap needs --p or --a"))?;
    let prob = cap_probability(a.k, height)?;
    let table = Table::new(&["k", "a", "probability"]).row(vec![a.k.to_string(), num(height), num(prob)]);
    Ok(Output::ok(json!({"k": a.k, "a": height, "probability": prob}), table))
}

fn graph(a: &GraphArgs, ctx: &Ctx) -> Result<Output, CliError> {
    let p = resolve_p(a.p, a.C, a.D, a.k)?;
    let mut rng = substream(ctx.seed, purpose::GRAPH, 0);
    let g = build_graph(a.k, p, a.n, &mut rng)?;
    let pairs = a.n * (a.n - 1) / 2;
    let red_edges = g.red_edges();
    let search = |color: Color, size: Option<usize>| -> Result<Option<Value>, CliError> {
        match size {
            None => Ok(None),
            Some(r) if r < 2 || r > a.n => Err(CliError::usage(format!("clique size {r} outside 2..={}", a.n))),
            Some(r) if r > sphere_ramsey::graph::MAX_CLIQUE_SEARCH => {
                Err(Error::Infeasible(format!("clique size {r} beyond exact search range")).into())
            }
            Some(r) => Ok(Some(to_value(&find_mono_clique(&g, color, r)))),
        }
    };
    let red = search(Color::Red, a.red_size)?;
    let blue = search(Color::Blue, a.blue_size)?;
    let found = |v: &Option<Value>| v.as_ref().map_or(String::new(), |w| (!w.is_null()).to_string());
    let table = Table::new(&["k", "p", "c", "n", "red_edges", "blue_edges", "red_clique_found", "blue_clique_found"])
        .row(vec![
            a.k.to_string(),
            num(p),
            num(g.c),
            a.n.to_string(),
            red_edges.to_string(),
            (pairs - red_edges).to_string(),
            found(&red),
            found(&blue),
        ]);
    let mut json = json!({
        "k": a.k, "p": p, "c": g.c, "n": a.n, "seed": ctx.seed,
        "red_edges": red_edges, "blue_edges": pairs - red_edges,
        "red_clique": red, "blue_clique": blue,
    });
    if a.points {
        json["points"] = to_value(&g.points);
    }
    Ok(Output::ok(json, table))
}

fn certify(a: &CertifyArgs, ctx: &Ctx) -> Result<Output, CliError> {
    if let Some(path) = &a.check {
        let meta = std::fs::metadata(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        if meta.len() > MAX_DOCUMENT_BYTES as u64 {
            return Err(Error::Decode(format!("{} exceeds {MAX_DOCUMENT_BYTES} bytes", path.display())).into());
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let check = Certificate::decode(&text)?.verify()?;
        let table = Table::new(&["passed", "threshold_matches", "blue_size_matches", "red_clique", "blue_clique"]).row(
            vec![
                check.passed.to_string(),
                check.threshold_matches.to_string(),
                check.blue_size_matches.to_string(),
                check.red_clique.is_some().to_string(),
                check.blue_clique.is_some().to_string(),
            ],
        );
        let status = if check.passed { exit::SUCCESS } else { exit::NOT_FOUND };
        let note = (!check.passed).then(|| "certificate failed re-verification".to_string());
        return Ok(Output { json: to_value(&check), table, status, note });
    }
    let missing = || CliError::usage("certify needs --C, --ell, --n and --k");
    let (c_ratio, ell, n, k) = (
        a.C.ok_or_else(missing)?,
        a.ell.ok_or_else(missing)?,
        a.n.ok_or_else(missing)?,
        a.k.ok_or_else(missing)?,
    );
    let p = resolve_p(a.p, c_ratio, a.D, k)?;
    let header = ["found", "k", "p", "n", "ell", "blue_size", "attempt", "attempts_used"];
    match certify_lower_bound(c_ratio, ell, k, p, n, a.max_attempts, ctx.seed, ctx.workers)? {
        CertifyOutcome::Found(cert) => {
            let doc = Certificate::from_certified(c_ratio, ctx.seed, &cert);
            let table = Table::new(&header).row(vec![
                "true".into(),
                k.to_string(),
                num(p),
                n.to_string(),
                ell.to_string(),
                cert.blue_size.to_string(),
                cert.attempt.to_string(),
                cert.attempts_used.to_string(),
            ]);
            Ok(Output::ok(to_value(&doc), table))
        }
        CertifyOutcome::NotFound { attempts } => {
            let table = Table::new(&header).row(vec![
                "false".into(),
                k.to_string(),
                num(p),
                n.to_string(),
                ell.to_string(),
                sphere_ramsey::constants::blue_clique_size(c_ratio, ell).to_string(),
                String::new(),
                attempts.to_string(),
            ]);
            Ok(Output {
                json: json!({"found": false, "attempts": attempts, "k": k, "p": p, "n": n, "ell": ell, "C": c_ratio, "seed": ctx.seed}),
                table,
                status: exit::NOT_FOUND,
                note: Some(format!("no certificate after {attempts} attempts")),
            })
        }
    }
}

/// The estimate record: one row with the same columns in JSON and CSV.
#[derive(Debug, Serialize)]
struct EstimateRecord {
    quantity: Quantity,
    params: Value,
    estimate: f64,
    stderr: f64,
    prediction: f64,
    prediction_source: String,
    z_score: f64,
    seed: u64,
    workers: usize,
}

fn estimate(a: &EstimateArgs, ctx: &Ctx) -> Result<Output, CliError> {
    let p = resolve_p(a.p, a.C, a.D, a.k)?;
    let base = Setting::new(a.k, p)?;
    let alpha = alpha_c(a.C, solve_p_c(a.C)?);
    let perfect = base.perfect(alpha, a.ell);
    let color: Color = a.color.into();
    let n = a.samples;
    let (seed, workers) = (ctx.seed, ctx.workers);
    let cmp: PredictionComparison = match a.quantity {
        Quantity::RedClique | Quantity::BlueClique => {
            let color = if a.quantity == Quantity::RedClique { Color::Red } else { Color::Blue };
            let est = estimate_clique_prob(&base, a.r, color, n, seed, workers)?;
            let (prediction, source) = if a.r == 3 && a.k >= 3 {
                (exact_triangle_prob(a.k, base.c, color)?, "triangle probability by quadrature over the pair inner product")
            } else {
                let q = base.color_probability(color);
                (q.powi((a.r * (a.r - 1) / 2) as i32), "independent edges q^{r(r-1)/2}")
            };
            PredictionComparison::new(est, prediction, source)
        }
        Quantity::Kappa => {
            let mut k = estimate_kappa(&perfect, a.r, color, n, a.inner_samples, seed, workers)?;
            k.estimate.std_error = k.estimate.std_error.max(k.bootstrap_std_error);
            PredictionComparison::new(
                k.estimate,
                perfect.color_probability(color),
                "independent-edge value q (p for red, 1 - p for blue)",
            )
        }
        Quantity::QRatio => {
            let (seq, y) = perfect_pair(&perfect, a.r, a.ell, a.C, seed)?;
            estimate_q(&seq, &y, color, &perfect, n, seed, workers)?
        }
        Quantity::CoefficientMean => {
            let s = a.s.unwrap_or(1);
            let (seq, _) = perfect_pair(&perfect, a.r, a.ell, a.C, seed)?;
            coefficient_mean_for_sequence(&seq, s, color, &perfect, n, seed, workers)?
        }
        Quantity::ProjectionInner => {
            let s = a.s.unwrap_or(a.r);
            estimate_projection_inner(&perfect, a.r, s, color, n, seed, workers)?
        }
        Quantity::PerfectFraction => {
            let f = perfect_fraction(&perfect, a.r, n, seed, workers)?;
            PredictionComparison::new(f.estimate, f.exact, "product of exact beta tails of the prefix projection norms")
        }
        Quantity::ShiftedCap => {
            let d = a.D.ok_or_else(|| CliError::usage("shifted-cap needs --D"))?;
            let rep = shifted_cap_check(a.k, a.r, p, a.shift, d, n, seed, workers)?;
            PredictionComparison::new(rep.estimate, rep.prediction, "p - A e^{-c^2/2}/(sqrt(2 pi) D)")
        }
    };
    let record = EstimateRecord {
        quantity: a.quantity,
        params: json!({
            "k": a.k, "r": a.r, "s": a.s, "p": p, "c": base.c, "C": a.C, "D": a.D, "ell": a.ell,
            "color": a.color, "samples": n, "n_samples": cmp.estimate.n_samples,
            "n_accepted": cmp.estimate.n_accepted,
        }),
        estimate: cmp.estimate.value,
        stderr: cmp.estimate.std_error,
        prediction: cmp.prediction,
        prediction_source: cmp.prediction_source.clone(),
        z_score: cmp.z_score,
        seed,
        workers,
    };
    let quantity = to_value(&record.quantity).as_str().unwrap_or_default().to_string();
    let table = Table::new(&[
        "quantity",
        "params",
        "estimate",
        "stderr",
        "prediction",
        "prediction_source",
        "z_score",
        "seed",
        "workers",
    ])
    .row(vec![
        quantity,
        record.params.to_string(),
        num(record.estimate),
        num(record.stderr),
        num(record.prediction),
        record.prediction_source.clone(),
        num(record.z_score),
        seed.to_string(),
        workers.to_string(),
    ]);
    Ok(Output::ok(to_value(&record), table))
}

/// A uniform perfect sequence of length r and a point y such that the
/// extended sequence is still perfect, from the seed's sequence stream.
fn perfect_pair(
    setting: &Setting,
    r: usize,
    ell: usize,
    c_ratio: f64,
    seed: u64,
) -> Result<(Vec<sphere_ramsey::geometry::UnitVector>, sphere_ramsey::geometry::UnitVector), CliError> {
    const MAX_DRAWS: usize = 10_000;
    let rule = PerfectnessRule::for_ratio(c_ratio, ell, setting.k)?;
    let mut rng = substream(seed, purpose::SEQUENCE, 0);
    for _ in 0..MAX_DRAWS {
        let pts = (0..=r)
            .map(|_| sample_unit_vector(setting.k, &mut rng))
            .collect::<sphere_ramsey::Result<Vec<_>>>()?;
        let coords: Vec<&[f64]> = pts.iter().map(|x| x.coords()).collect();
        if is_perfect(&coords, &rule)?.is_perfect {
            let mut seq = pts;
            let y = seq.pop().expect("r + 1 points drawn");
            return Ok((seq, y));
        }
    }
    Err(Error::RejectionExhausted { tries: MAX_DRAWS as u64, accepted: 0 }.into())
}

fn verify(a: &VerifyArgs, ctx: &Ctx) -> Result<Output, CliError> {
    let level = match a.level {
        LevelArg::Quick => Level::Quick,
        LevelArg::Full => Level::Full,
    };
    let report = run_suite(&SuiteConfig::new(level, ctx.seed, ctx.workers));
    let mut table = Table::new(&["id", "name", "passed", "seconds", "detail"]);
    for c in &report.checks {
        table = table.row(vec![c.id.to_string(), c.name.clone(), c.passed.to_string(), num(c.seconds), c.detail.clone()]);
    }
    let failing = report.failing();
    let (status, note) = if failing.is_empty() {
        (exit::SUCCESS, None)
    } else {
        (exit::NOT_FOUND, Some(format!("failing checks: {}", failing.join(", "))))
    };
    Ok(Output { json: to_value(&report), table, status, note })
}

fn baseline(a: &BaselineArgs) -> Result<Output, CliError> {
    let beta = if a.C > 1.0 { Some(beta_c(a.C)?) } else { None };
    let mut rows = Vec::new();
    let mut table = Table::new(&["C", "ell", "p_opt", "log_n", "beta_C", "improvement_log_ratio"]);
    for &ell in &a.ell {
        let res = erdos_bound_at(a.C, ell, a.threshold)?;
        let ratio = if a.C > 1.0 { Some(improvement_ratio(a.C, ell)?) } else { None };
        table = table.row(vec![
            num(a.C),
            ell.to_string(),
            num(res.p_opt),
            num(res.log_n),
            beta.map_or(String::new(), |b| num(b.value)),
            ratio.as_ref().map_or(String::new(), |r| num(r.log_ratio)),
        ]);
        rows.push(json!({
            "baseline": res,
            "beta_C": beta,
            "improvement": ratio,
        }));
    }
    Ok(Output::ok(Value::Array(rows), table))
}
