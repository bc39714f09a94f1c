use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use schflow::flows::build_three_stage_flows;
use schflow::io::{
    flows_to_json, plan_to_json, protocol_to_json, spectrum_from_json, to_json, BoundReport, DecompositionReport, F17,
};
use schflow::protocols::{conversion_budget, conversion_protocol, protocol_cost, reverse_protocol};
use schflow::simulator::{fidelity, make_canonical_state, run_protocol};
use schflow::transport::{emd_linf, smoothed_emd};
use schflow::universality::{block_decompose, build_grouped_state, evaluate_lower_bound};
use schflow::verify::{run_suite, SuiteReport, VerifyConfig, SUITES};
use schflow::{Error, SchmidtSpectrum, VERSION};

const EMD_FORMULA: &str = "emd = min over couplings of max |log2(1/a_i) - log2(1/b_j)| on the support";
const SMOOTH_FORMULA: &str =
    "emd_eps = sup_q min_{|r - q| <= eps} |F_a^-1(q) - F_b^-1(r)|, F^-1 the quantile of log2(1/coefficient)";
const BUDGET_FORMULA: &str = "budget = 4 * ceil(d) + 8";

#[derive(Parser, Debug)]
#[command(name = "schflow", version, about = "Transport distances and conversion protocols for Schmidt spectra")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value = "text", env = "SCHFLOW_FORMAT")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, env = "SCHFLOW_OUT")]
    out: Option<PathBuf>,
    /// Master seed, decimal or 0x-prefixed hex.
    #[arg(long, global = true, value_parser = parse_seed, default_value = "0x5EED", env = "SCHFLOW_SEED")]
    seed: u64,
    /// Worker threads for verification suites.
    #[arg(long, global = true, default_value_t = 1, env = "SCHFLOW_JOBS")]
    jobs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transport distance between two spectrum files.
    Distance {
        a: PathBuf,
        b: PathBuf,
        /// Also report the smoothed distance at this ε.
        #[arg(long, env = "SCHFLOW_SMOOTH")]
        smooth: Option<f64>,
        /// Write the witness coupling here.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Compile a conversion protocol and replay it.
    Convert {
        a: PathBuf,
        b: PathBuf,
        /// Write the protocol here.
        #[arg(long)]
        protocol: Option<PathBuf>,
    },
    /// Write the three intermediate flows between two spectra.
    Flows { a: PathBuf, b: PathBuf },
    /// Group a spectrum and decompose it into blocks.
    Decompose {
        spectrum: PathBuf,
        #[arg(long, default_value_t = 2, env = "SCHFLOW_GROUPING")]
        grouping: u32,
        #[arg(long, default_value_t = 0.5, env = "SCHFLOW_EPS")]
        eps: f64,
        #[arg(long, env = "SCHFLOW_BLOCK_WIDTH")]
        block_width: Option<u64>,
    },
    /// Evaluate the fidelity bound at ε, Q and d.
    Bound {
        #[arg(long, env = "SCHFLOW_EPS")]
        eps: f64,
        #[arg(long, env = "SCHFLOW_Q")]
        q: f64,
        #[arg(long, env = "SCHFLOW_D")]
        d: f64,
    },
    /// Run the property suites.
    Verify {
        /// Suites to run (all when omitted).
        #[arg(long = "suite", value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suites: Vec<String>,
        #[arg(long, env = "SCHFLOW_CASES")]
        cases: Option<usize>,
        #[arg(long, env = "SCHFLOW_EPS")]
        eps: Option<f64>,
    },
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {s:?}: {e}"))
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Json(_) | Error::Format(_) => 2,
            Error::TooLarge { .. } => 4,
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

fn input_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: 3, message: format!("{}: {e}", path.display()) }
}

fn read_spectrum(path: &Path) -> Result<SchmidtSpectrum, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| input_failure(path, e))?;
    spectrum_from_json(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure { code: 3, message: format!("{}: {e}", path.display()) })
}

/// A rendered report and whether it counts as success.
struct Output {
    text: String,
    json: String,
    ok: bool,
}

fn json<T: Serialize>(v: &T) -> Result<String, Failure> {
    Ok(to_json(v)?)
}

#[derive(Serialize)]
struct Smoothed {
    epsilon: F17,
    emd: F17,
}

#[derive(Serialize)]
struct DistanceReport {
    version: &'static str,
    command: &'static str,
    emd: F17,
    smoothed: Option<Smoothed>,
    formulas: Vec<&'static str>,
}

fn cmd_distance(a: &Path, b: &Path, smooth: Option<f64>, witness: Option<&Path>) -> Result<Output, Failure> {
    let (a, b) = (read_spectrum(a)?, read_spectrum(b)?);
    let r = emd_linf(&a, &b);
    let smoothed = smooth.map(|eps| smoothed_emd(&a, &b, eps).map(|d| (eps, d))).transpose()?;
    if let Some(path) = witness {
        write_file(path, &plan_to_json(&r)?)?;
    }
    let mut text = format!("emd: {}\n", r.distance);
    if let Some((eps, d)) = smoothed {
        text.push_str(&format!("smoothed emd (eps = {eps}): {d}\n"));
    }
    let mut formulas = vec![EMD_FORMULA];
    if smoothed.is_some() {
        formulas.push(SMOOTH_FORMULA);
    }
    let report = DistanceReport {
        version: VERSION,
        command: "distance",
        emd: F17(r.distance),
        smoothed: smoothed.map(|(eps, d)| Smoothed { epsilon: F17(eps), emd: F17(d) }),
        formulas,
    };
    Ok(Output { text, json: json(&report)?, ok: true })
}

#[derive(Serialize)]
struct ConvertReport {
    version: &'static str,
    command: &'static str,
    distance: F17,
    cost: u32,
    declared_cost: u32,
    replay_comm_cost: u64,
    budget: u32,
    within_budget: bool,
    steps: usize,
    fidelity: F17,
    reverse_fidelity: F17,
    formulas: Vec<&'static str>,
}

fn cmd_convert(a: &Path, b: &Path, protocol: Option<&Path>) -> Result<Output, Failure> {
    let (a, b) = (read_spectrum(a)?, read_spectrum(b)?);
    let start = make_canonical_state(&a)?;
    let target = make_canonical_state(&b)?;
    let d = emd_linf(&a, &b).distance;
    let p = conversion_protocol(&a, &b)?;
    if let Some(path) = protocol {
        write_file(path, &protocol_to_json(&p)?)?;
    }
    let out = run_protocol(&start, &p)?;
    let f = fidelity(&out, &target)?;
    let back = run_protocol(&out, &reverse_protocol(&p))?;
    let rf = fidelity(&back, &start)?;
    let cost = protocol_cost(&p);
    let budget = conversion_budget(d);
    let ok = cost <= budget && f >= 1.0 - 1e-9;
    let text = format!(
        "emd: {d}\ncost: {cost} qubits\nbudget: {budget} qubits ({BUDGET_FORMULA})\nsteps: {}\nfidelity: {f}\nreverse fidelity: {rf}\n",
        p.steps.len()
    );
    let report = ConvertReport {
        version: VERSION,
        command: "convert",
        distance: F17(d),
        cost,
        declared_cost: p.declared_cost,
        replay_comm_cost: out.comm_cost(),
        budget,
        within_budget: cost <= budget,
        steps: p.steps.len(),
        fidelity: F17(f),
        reverse_fidelity: F17(rf),
        formulas: vec![EMD_FORMULA, BUDGET_FORMULA],
    };
    Ok(Output { text, json: json(&report)?, ok })
}

fn cmd_flows(a: &Path, b: &Path) -> Result<Output, Failure> {
    let (a, b) = (read_spectrum(a)?, read_spectrum(b)?);
    let f = build_three_stage_flows(&a, &b)?;
    let text = format!(
        "emd: {}\nslots: {}\ngamma atoms: {}\nrho atoms: {}\n",
        f.distance,
        f.slots,
        f.gamma.len(),
        f.rho.len()
    );
    Ok(Output { text, json: flows_to_json(&f)?, ok: true })
}

#[derive(Serialize)]
struct Versioned<T: Serialize> {
    version: &'static str,
    command: &'static str,
    #[serde(flatten)]
    report: T,
}

fn cmd_decompose(path: &Path, n: u32, eps: f64, b: Option<u64>) -> Result<Output, Failure> {
    let s = read_spectrum(path)?;
    let g = build_grouped_state(&s, n)?;
    let d = block_decompose(&g, eps, b)?;
    let c = d.checks();
    let mut text = format!(
        "bins: {}\nB: {}\nclasses: {}\nk': {}\ntrace gap: {} (limit {})\n",
        d.bins.len(),
        d.b,
        d.classes,
        d.k_star,
        d.trace_gap,
        2.0 * eps
    );
    for q in &d.blocks {
        text.push_str(&format!("block {}: {} bins, spread {}\n", q.index, q.members.len(), q.spread));
    }
    text.push_str(&format!("checks: {}\n", if c.all() { "pass" } else { "fail" }));
    let report = Versioned { version: VERSION, command: "decompose", report: DecompositionReport::new(&d) };
    Ok(Output { text, json: json(&report)?, ok: c.all() })
}

fn cmd_bound(eps: f64, q: f64, d: f64) -> Result<Output, Failure> {
    let r = evaluate_lower_bound(eps, q, d)?;
    let text = format!(
        "h: {}\nbound: {} ({})\nbound with eps^2/8: {}\n",
        r.h,
        r.bound,
        schflow::universality::BOUND_FORMULA,
        r.bound_eighth
    );
    let report = Versioned { version: VERSION, command: "bound", report: BoundReport::new(&r) };
    Ok(Output { text, json: json(&report)?, ok: true })
}

#[derive(Serialize)]
struct VerifyReport {
    version: &'static str,
    command: &'static str,
    seed: u64,
    passed: bool,
    suites: Vec<SuiteReport>,
}

fn cmd_verify(suites: &[String], cfg: &VerifyConfig) -> Result<Output, Failure> {
    let names: Vec<&str> =
        if suites.is_empty() { SUITES.to_vec() } else { suites.iter().map(String::as_str).collect() };
    let reports = names.iter().map(|s| run_suite(s, cfg)).collect::<Result<Vec<_>, _>>()?;
    let passed = reports.iter().all(|r| r.passed);
    let mut text = String::new();
    for r in &reports {
        text.push_str(&format!("{}: {} ({} cases)\n", r.suite, if r.passed { "pass" } else { "FAIL" }, r.cases));
        for f in &r.families {
            text.push_str(&format!("  {}: {}/{} ok\n", f.family, f.checked - f.failed, f.checked));
            if let Some(msg) = &f.first_failure {
                text.push_str(&format!("    first failure: {msg}\n"));
            }
        }
    }
    let report = VerifyReport { version: VERSION, command: "verify", seed: cfg.seed, passed, suites: reports };
    Ok(Output { text, json: json(&report)?, ok: passed })
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    match &cli.command {
        Command::Distance { a, b, smooth, witness } => cmd_distance(a, b, *smooth, witness.as_deref()),
        Command::Convert { a, b, protocol } => cmd_convert(a, b, protocol.as_deref()),
        Command::Flows { a, b } => cmd_flows(a, b),
        Command::Decompose { spectrum, grouping, eps, block_width } => {
            cmd_decompose(spectrum, *grouping, *eps, *block_width)
        }
        Command::Bound { eps, q, d } => cmd_bound(*eps, *q, *d),
        Command::Verify { suites, cases, eps } => {
            let cfg = VerifyConfig { seed: cli.global.seed, cases: *cases, eps: *eps, jobs: cli.global.jobs.max(1) };
            cmd_verify(suites, &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let body = match cli.global.format {
                Format::Text => out.text,
                Format::Json => out.json,
            };
            match &cli.global.out {
                Some(path) => {
                    if let Err(f) = write_file(path, &body) {
                        eprintln!("error: {}", f.message);
                        return ExitCode::from(f.code);
                    }
                }
                None => print!("{body}"),
            }
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
