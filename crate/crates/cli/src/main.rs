//! `rdot`: batch front end for rdot-core.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rdot_core::eot::{self, EotOptions};
use rdot_core::integrals::{self, BoundsOptions, ParameterKind};
use rdot_core::measure::{product_measure, quantize_gaussian};
use rdot_core::oracles;
use rdot_core::rate_distortion::{self, RdOptions};
use rdot_core::types::{self, JointTypeSpec, TypeSpec, DEFAULT_L_CAP};
use rdot_core::{DiscreteMeasure, Exec, MonotoneCurve};
use serde_json::{json, Value};

use output::{CliError, CliResult, Header, Sink, BOUNDS_COLUMNS, CURVE_COLUMNS};

const MEASURE_HELP: &str = "Measure JSON file {\"dim\", \"points\", \"weights\"}, or gaussian:<dim>:<bins> for a quantized standard Gaussian";

pub const EOT_BETA_KEYS: &[&str] = &[
    "header",
    "beta",
    "f_value",
    "inner_product",
    "mutual_info",
    "diagnostics",
    "plan",
];
pub const EOT_RATE_KEYS: &[&str] = &[
    "header",
    "rate",
    "w_value",
    "primal_lower",
    "beta",
    "mutual_info",
    "bisections",
];
pub const LIFT_KEYS: &[&str] = &[
    "header",
    "n",
    "rate",
    "l",
    "l_cap",
    "trials",
    "mean",
    "std_error",
];
pub const TENSOR_KEYS: &[&str] = &["header", "k", "rows", "max_defect"];
pub const EQUI_KEYS: &[&str] = &["header", "source", "lhs", "mid", "ratio", "within_bracket"];

fn keys_help(keys: &[&str]) -> String {
    format!("JSON keys: {}", keys.join(","))
}

#[derive(Debug, Parser)]
#[command(
    name = "rdot",
    version,
    about = "Entropic and information-constrained transport, rate-distortion curves and method-of-types tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for every random draw
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for grid and Monte Carlo fan-out
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output path (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Solver tolerance (Sinkhorn residual for eot/tensor-check, curve certificate otherwise)
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rate-distortion curve r(sigma) or i(sigma) of one measure
    #[command(after_help = format!("CSV columns: {CURVE_COLUMNS}\n\
        kind r: abscissa = sigma, grid = sigma values (default 32 evenly spaced up to sqrt(E d^2)).\n\
        kind i: abscissa = sigma, grid = Lagrange multipliers (default 40 log-spaced).\n\
        gap is the certified gap of the point in nats."))]
    RdCurve {
        #[arg(long, help = MEASURE_HELP)]
        measure: String,
        #[arg(long, value_enum)]
        kind: CurveKind,
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Regularized value f(beta) or constrained value w(R)
    #[command(
        group(ArgGroup::new("param").required(true).args(["beta", "rate"])),
        after_help = format!("{} (plan only with --plan)\nwith --rate: {}", keys_help(EOT_BETA_KEYS), keys_help(EOT_RATE_KEYS)),
    )]
    Eot {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        rate: Option<f64>,
        /// Include the coupling table (row-major) in the output; needs --beta
        #[arg(long)]
        plan: bool,
    },
    /// Transport values against their rate-distortion integrals on a grid
    #[command(
        group(ArgGroup::new("grid").required(true).args(["rate_grid", "beta_grid"])),
        after_help = format!("CSV columns: {BOUNDS_COLUMNS}\n\
            ratio is empty when either side vanishes; gaps is <transport gap>;<curve gap>."),
    )]
    Bounds {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, value_delimiter = ',')]
        rate_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        beta_grid: Option<Vec<f64>>,
    },
    /// Monte Carlo estimate of the lifted codebook correlation at blocklength n
    #[command(after_help = format!("{}\nn and l are decimal strings. RDOT_LCAP overrides the codebook cap (default {DEFAULT_L_CAP}).", keys_help(LIFT_KEYS)))]
    SimulateLift {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        rate: f64,
        /// Blocklength; n times every weight must be an integer
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Exact method-of-types counts
    Types {
        #[command(subcommand)]
        op: TypesOp,
    },
    /// Closed-form Gaussian references
    Oracle {
        #[command(subcommand)]
        op: OracleOp,
    },
    /// f on k-fold products against k times f
    #[command(after_help = keys_help(TENSOR_KEYS))]
    TensorCheck {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, value_delimiter = ',', required = true)]
        beta_grid: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// Integral of a decreasing profile against the integral of its quadratic infimal convolution
    #[command(
        group(ArgGroup::new("source").required(true).args(["measure", "profile"])),
        after_help = format!("{}\nWith --measure the profile is i(sigma) of that measure.", keys_help(EQUI_KEYS)),
    )]
    EquiCheck {
        #[arg(long, help = MEASURE_HELP)]
        measure: Option<String>,
        #[arg(long, value_enum)]
        profile: Option<Profile>,
    },
}

#[derive(Debug, Args)]
struct Pair {
    #[arg(long, help = MEASURE_HELP)]
    gamma: String,
    #[arg(long, help = MEASURE_HELP)]
    mu: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CurveKind {
    R,
    I,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Profile {
    /// y = exp(-x)
    Exp,
    /// y = (1 - x)_+
    Hinge,
}

#[derive(Debug, Subcommand)]
enum TypesOp {
    /// Size of the type class with the given counts
    #[command(after_help = "JSON keys: header,size (decimal string)")]
    Size {
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<u64>,
    },
    /// Round a coupling to a joint type with the same marginal counts
    #[command(
        after_help = "JSON keys: header,rows,cols,n,counts (n and counts as decimal strings, row-major)"
    )]
    Round {
        /// Row-major probabilities
        #[arg(long, value_delimiter = ',', required = true)]
        probs: Vec<f64>,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        n: u64,
    },
    /// Number of y-sequences with a given joint type against a fixed x-sequence
    #[command(
        after_help = "JSON keys: header,count,class_size,mutual_info,log_ratio,log_lower,log_upper,lower_holds,upper_holds (count and class_size as decimal strings)"
    )]
    Count {
        /// Row-major joint counts
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<u64>,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        /// Row index sequence; defaults to the sorted sequence of row counts
        #[arg(long, value_delimiter = ',')]
        x: Option<Vec<usize>>,
    },
}

#[derive(Debug, Subcommand)]
enum OracleOp {
    /// Gaussian f(beta)
    #[command(after_help = "JSON keys: header,beta,rho,f")]
    F {
        #[arg(long)]
        beta: f64,
    },
    /// Gaussian w(R)
    #[command(after_help = "JSON keys: header,rate,w")]
    W {
        #[arg(long)]
        rate: f64,
    },
    /// Gaussian rate-distortion function
    #[command(after_help = "JSON keys: header,variance,distortion,rate")]
    Rd {
        #[arg(long, default_value_t = 1.0)]
        variance: f64,
        #[arg(long)]
        distortion: f64,
    },
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let err = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    return ExitCode::SUCCESS;
                }
                ErrorKind::InvalidSubcommand
                | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    CliError::UnknownCommand(first_line(&e.to_string()))
                }
                _ => CliError::BadFlag(first_line(&e.to_string())),
            };
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    let header = Header {
        args: argv.into_iter().skip(1).collect(),
        seed: cli.seed,
    };
    match run(cli, &header) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}

fn first_line(s: &str) -> String {
    s.lines()
        .next()
        .unwrap_or_default()
        .trim_start_matches("error: ")
        .to_string()
}

fn run(cli: Cli, header: &Header) -> CliResult<()> {
    let exec = configure_jobs(cli.jobs)?;
    if let Some(t) = cli.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::BadFlag(format!("--tol {t} must be positive")));
        }
    }
    let sink = Sink::new(cli.out);
    let ctx = Ctx {
        exec,
        tol: cli.tol,
        seed: cli.seed,
    };
    match cli.command {
        Command::RdCurve {
            measure,
            kind,
            grid,
        } => rd_curve(&ctx, header, &sink, &measure, kind, grid),
        Command::Eot {
            pair,
            beta,
            rate,
            plan,
        } => eot_cmd(&ctx, header, &sink, &pair, beta, rate, plan),
        Command::Bounds {
            pair,
            rate_grid,
            beta_grid,
        } => bounds(&ctx, header, &sink, &pair, rate_grid, beta_grid),
        Command::SimulateLift {
            pair,
            rate,
            n,
            trials,
        } => simulate_lift(&ctx, header, &sink, &pair, rate, n, trials),
        Command::Types { op } => types_cmd(header, &sink, op),
        Command::Oracle { op } => oracle(header, &sink, op),
        Command::TensorCheck { pair, beta_grid, k } => {
            tensor_check(&ctx, header, &sink, &pair, &beta_grid, k)
        }
        Command::EquiCheck { measure, profile } => equi(&ctx, header, &sink, measure, profile),
    }
}

struct Ctx {
    exec: Exec,
    tol: Option<f64>,
    seed: u64,
}

impl Ctx {
    fn eot_options(&self) -> EotOptions {
        let mut o = EotOptions {
            exec: self.exec,
            ..EotOptions::default()
        };
        if let Some(t) = self.tol {
            o.sinkhorn.tol = t;
        }
        o
    }

    fn rd_options(&self) -> CliResult<RdOptions> {
        let mut o = RdOptions {
            exec: self.exec,
            ..RdOptions::default()
        };
        if let Some(t) = self.tol {
            if t > 1e-2 {
                return Err(CliError::BadFlag(format!(
                    "--tol {t} must be <= 1e-2 for curve solves"
                )));
            }
            o.tol = t;
        }
        Ok(o)
    }
}

fn configure_jobs(jobs: Option<usize>) -> CliResult<Exec> {
    match jobs {
        Some(0) => Err(CliError::BadFlag("--jobs must be at least 1".into())),
        Some(1) => Ok(Exec::Sequential),
        #[cfg(feature = "parallel")]
        Some(j) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build_global()
                .map_err(|e| CliError::BadFlag(format!("--jobs {j}: {e}")))?;
            Ok(Exec::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Exec::Sequential),
        None => Ok(Exec::default()),
    }
}

fn load_measure(spec: &str) -> CliResult<DiscreteMeasure> {
    if let Some(rest) = spec.strip_prefix("gaussian:") {
        let parsed: Option<(usize, usize)> = rest
            .split_once(':')
            .and_then(|(d, b)| Some((d.parse().ok()?, b.parse().ok()?)));
        let (dim, bins) = parsed.ok_or_else(|| CliError::BadMeasure {
            path: spec.into(),
            message: "expected gaussian:<dim>:<bins>".into(),
        })?;
        return Ok(quantize_gaussian(dim, bins)?);
    }
    let text = output::read_to_string(spec.as_ref())?;
    serde_json::from_str(&text).map_err(|e| CliError::BadMeasure {
        path: spec.into(),
        message: e.to_string(),
    })
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::BadFlag(format!("{name} {v} must be positive")))
    }
}

fn nonnegative(name: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(CliError::BadFlag(format!("{name} {v} must be >= 0")))
    }
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn rd_curve(
    ctx: &Ctx,
    header: &Header,
    sink: &Sink,
    measure: &str,
    kind: CurveKind,
    grid: Option<Vec<f64>>,
) -> CliResult<()> {
    let mu = load_measure(measure)?;
    let opts = ctx.rd_options()?;
    let rows: Vec<Vec<String>> = match kind {
        CurveKind::R => {
            let sigmas = match grid {
                Some(g) => g,
                None => {
                    let top = mu.independent_distortion().sqrt();
                    (1..=32).map(|k| top * k as f64 / 32.0).collect()
                }
            };
            for &s in &sigmas {
                nonnegative("sigma", s)?;
            }
            let rep = rate_distortion::default_reproduction(&mu);
            let res = rate_distortion::r_curve(&mu, &sigmas, &rep, &opts)?;
            sigmas
                .iter()
                .zip(&res)
                .map(|(s, r)| {
                    vec![
                        num(*s),
                        num(r.rate),
                        num(r.diagnostics.lagrange_multiplier),
                        num(r.diagnostics.final_gap),
                    ]
                })
                .collect()
        }
        CurveKind::I => {
            let grid = grid.unwrap_or_else(|| rate_distortion::default_multiplier_grid(&mu));
            let c = rate_distortion::i_mu_curve(&mu, &grid, &opts)?;
            let mut samples = c.samples.clone();
            samples.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
            samples
                .iter()
                .map(|s| vec![num(s.sigma), num(s.value), num(s.multiplier), num(s.gap)])
                .collect()
        }
    };
    sink.csv(header, CURVE_COLUMNS, &rows)
}

fn eot_cmd(
    ctx: &Ctx,
    header: &Header,
    sink: &Sink,
    pair: &Pair,
    beta: Option<f64>,
    rate: Option<f64>,
    plan: bool,
) -> CliResult<()> {
    if plan && beta.is_none() {
        return Err(CliError::BadFlag("--plan needs --beta".into()));
    }
    let gamma = load_measure(&pair.gamma)?;
    let mu = load_measure(&pair.mu)?;
    let opts = ctx.eot_options();
    let payload = match (beta, rate) {
        (Some(b), _) => {
            let s = eot::sinkhorn_f(&gamma, &mu, positive("--beta", b)?, &opts)?;
            let mut v = json!({
                "beta": s.beta,
                "f_value": s.f_value,
                "inner_product": s.inner_product,
                "mutual_info": s.mutual_info,
                "diagnostics": s.diagnostics,
            });
            if plan {
                v["plan"] = json!({
                    "rows": gamma.len(),
                    "cols": mu.len(),
                    "table": s.plan.table(),
                });
            }
            v
        }
        (None, Some(r)) => {
            let w = eot::w_constrained(&gamma, &mu, nonnegative("--rate", r)?, &opts)?;
            json!({
                "rate": r,
                "w_value": w.value,
                "primal_lower": w.primal_lower,
                "beta": w.beta,
                "mutual_info": finite_or_null(w.mutual_info),
                "bisections": w.bisections,
            })
        }
        (None, None) => unreachable!("clap enforces one of --beta/--rate"),
    };
    sink.json(header, payload)
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn bounds(
    ctx: &Ctx,
    header: &Header,
    sink: &Sink,
    pair: &Pair,
    rate_grid: Option<Vec<f64>>,
    beta_grid: Option<Vec<f64>>,
) -> CliResult<()> {
    let gamma = load_measure(&pair.gamma)?;
    let mu = load_measure(&pair.mu)?;
    let (kind, params) = match (rate_grid, beta_grid) {
        (Some(g), _) => {
            for &r in &g {
                nonnegative("rate", r)?;
            }
            (ParameterKind::Rate, g)
        }
        (None, Some(g)) => {
            for &b in &g {
                positive("beta", b)?;
            }
            (ParameterKind::Beta, g)
        }
        (None, None) => unreachable!("clap enforces one grid"),
    };
    let opts = BoundsOptions {
        eot: ctx.eot_options(),
        rd: ctx.rd_options()?,
    };
    let reports = integrals::bounds_reports(&gamma, &mu, kind, &params, &opts)?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.parameter_kind.as_str().to_string(),
                num(r.parameter),
                num(r.transport_value),
                num(r.integral_value),
                r.ratio.map(num).unwrap_or_default(),
                format!("{};{}", num(r.gaps.transport), num(r.gaps.curve)),
            ]
        })
        .collect();
    sink.csv(header, BOUNDS_COLUMNS, &rows)
}

fn l_cap() -> CliResult<u64> {
    match std::env::var("RDOT_LCAP") {
        Err(_) => Ok(DEFAULT_L_CAP),
        Ok(s) => {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| CliError::BadFlag(format!("RDOT_LCAP={s} is not a number")))?;
            if !(v.is_finite() && v >= 1.0) {
                return Err(CliError::BadFlag(format!("RDOT_LCAP={s} must be >= 1")));
            }
            Ok(v as u64)
        }
    }
}

fn type_of(m: &DiscreteMeasure, n: u64, name: &str) -> CliResult<TypeSpec> {
    types::is_rational(m, n).ok_or_else(|| {
        CliError::Core(rdot_core::Error::TypeMismatch(format!(
            "{name}: n = {n} does not make every n * weight an integer"
        )))
    })
}

fn simulate_lift(
    ctx: &Ctx,
    header: &Header,
    sink: &Sink,
    pair: &Pair,
    rate: f64,
    n: u64,
    trials: usize,
) -> CliResult<()> {
    nonnegative("--rate", rate)?;
    if trials == 0 {
        return Err(CliError::BadFlag("--trials must be at least 1".into()));
    }
    let cap = l_cap()?;
    let g = type_of(&load_measure(&pair.gamma)?, n, "gamma")?;
    let m = type_of(&load_measure(&pair.mu)?, n, "mu")?;
    let e = types::simulate_lifting(&g, &m, rate, trials, ctx.seed, cap, ctx.exec)?;
    sink.json(
        header,
        json!({
            "n": e.n.to_string(),
            "rate": e.rate,
            "l": e.l.to_string(),
            "l_cap": cap.to_string(),
            "trials": e.trials,
            "mean": e.mean,
            "std_error": e.std_error,
        }),
    )
}

fn types_cmd(header: &Header, sink: &Sink, op: TypesOp) -> CliResult<()> {
    let payload = match op {
        TypesOp::Size { counts } => {
            let size = types::multinomial(&counts)?;
            json!({ "size": size.to_str_radix(10) })
        }
        TypesOp::Round {
            probs,
            rows,
            cols,
            n,
        } => {
            let q = types::cycle_round(&probs, rows, cols, n)?;
            json!({
                "rows": rows,
                "cols": cols,
                "n": n.to_string(),
                "counts": q.counts().iter().map(u64::to_string).collect::<Vec<_>>(),
            })
        }
        TypesOp::Count {
            counts,
            rows,
            cols,
            x,
        } => {
            let j = JointTypeSpec::new(rows, cols, counts)?;
            let x = x.unwrap_or_else(|| {
                j.row_counts()
                    .iter()
                    .enumerate()
                    .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
                    .collect()
            });
            if let Some(&bad) = x.iter().find(|&&i| i >= rows) {
                return Err(CliError::BadFlag(format!(
                    "--x entry {bad} is not a row index"
                )));
            }
            let c = types::conditional_type_count(&j, &x)?;
            serde_json::to_value(c).expect("count serializes")
        }
    };
    sink.json(header, payload)
}

fn oracle(header: &Header, sink: &Sink, op: OracleOp) -> CliResult<()> {
    let payload = match op {
        OracleOp::F { beta } => {
            let f = oracles::gaussian_f(positive("--beta", beta)?);
            json!({ "beta": beta, "rho": f.rho, "f": f.f })
        }
        OracleOp::W { rate } => {
            json!({ "rate": rate, "w": oracles::gaussian_w(nonnegative("--rate", rate)?) })
        }
        OracleOp::Rd {
            variance,
            distortion,
        } => {
            positive("--variance", variance)?;
            positive("--distortion", distortion)?;
            json!({
                "variance": variance,
                "distortion": distortion,
                "rate": oracles::gaussian_rate_distortion(variance, distortion),
            })
        }
    };
    sink.json(header, payload)
}

fn power(m: &DiscreteMeasure, k: usize) -> CliResult<DiscreteMeasure> {
    let mut out = m.clone();
    for _ in 1..k {
        out = product_measure(&out, m)?;
    }
    Ok(out)
}

fn tensor_check(
    ctx: &Ctx,
    header: &Header,
    sink: &Sink,
    pair: &Pair,
    betas: &[f64],
    k: usize,
) -> CliResult<()> {
    if k == 0 {
        return Err(CliError::BadFlag("--k must be at least 1".into()));
    }
    for &b in betas {
        positive("beta", b)?;
    }
    let gamma = load_measure(&pair.gamma)?;
    let mu = load_measure(&pair.mu)?;
    let opts = ctx.eot_options();
    let single = eot::f_curve(&gamma, &mu, betas, &opts)?;
    let product = eot::f_curve(&power(&gamma, k)?, &power(&mu, k)?, betas, &opts)?;
    let mut max_defect: f64 = 0.0;
    let rows: Vec<Value> = single
        .iter()
        .zip(&product)
        .map(|(s, p)| {
            let defect = p.f_value - k as f64 * s.f_value;
            max_defect = max_defect.max(defect.abs());
            json!({ "beta": s.beta, "single": s.f_value, "product": p.f_value, "defect": defect })
        })
        .collect();
    sink.json(
        header,
        json!({ "k": k, "rows": rows, "max_defect": max_defect }),
    )
}

fn equi(
    ctx: &Ctx,
    header: &Header,
    sink: &Sink,
    measure: Option<String>,
    profile: Option<Profile>,
) -> CliResult<()> {
    let (source, curve) = match (measure, profile) {
        (Some(m), _) => {
            let mu = load_measure(&m)?;
            let grid = rate_distortion::default_multiplier_grid(&mu);
            let c = rate_distortion::i_mu_curve(&mu, &grid, &ctx.rd_options()?)?;
            (m, c.curve)
        }
        (None, Some(Profile::Exp)) => {
            let xs: Vec<f64> = (1..=8000).map(|k| k as f64 * 0.005).collect();
            let c = MonotoneCurve::from_fn(
                xs,
                |x| if x >= 40.0 { 0.0 } else { (-x).exp() },
                1.0,
                40.0,
            )?;
            ("exp".to_string(), c)
        }
        (None, Some(Profile::Hinge)) => {
            let c = MonotoneCurve::new(vec![1e-12, 0.5], vec![1.0 - 1e-12, 0.5], 1.0, 1.0)?;
            ("hinge".to_string(), c)
        }
        (None, None) => unreachable!("clap enforces one source"),
    };
    let r = integrals::equi_check(&curve)?;
    sink.json(
        header,
        json!({
            "source": source,
            "lhs": r.lhs,
            "mid": r.mid,
            "ratio": r.ratio,
            "within_bracket": r.within_bracket,
        }),
    )
}
