//! `trial-return`: solve, inspect, simulate, sweep and verify trial-and-return
//! pricing from the command line.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 bad input, 3 I/O error.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use trial_return::model::{validate_products, Thresholds};
use trial_return::pricing::optimize_under;
use trial_return::render::{fmt_num, render_as};
use trial_return::sweep::default_curve_range;
use trial_return::{
    compare_coverage, profit_curve, simulate, sweep_alpha_r, sweep_alpha_valueratio, verify,
    Format, GridSpec, MarketParams, OptimalRegime, RegionMap, Render, ReturnPolicy, SimConfig,
    VerifyConfig,
};

use config::FileConfig;

const THREADS_ENV: &str = "TRIAL_RETURN_THREADS";

#[derive(Parser)]
#[command(name = "trial-return", version, about = "Trial-and-return pricing engine")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    market: MarketArgs,

    #[command(subcommand)]
    command: Command,
}

/// Market primitives. Unset values fall back to the config file, then to
/// v1=2, v2=1, p2=0, alpha=0.25, r=0.125.
#[derive(Args)]
struct MarketArgs {
    #[arg(long, global = true, allow_hyphen_values = true)]
    v1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    v2: Option<f64>,
    /// Online price of Product 2.
    #[arg(long = "p2", global = true, allow_hyphen_values = true)]
    p2_bar: Option<f64>,
    /// Fit probability.
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Return cost as a fraction of v1.
    #[arg(long, global = true, allow_hyphen_values = true)]
    r: Option<f64>,
}

#[derive(Args, Default)]
struct SimArgs {
    /// Number of simulated customers.
    #[arg(long = "n")]
    n_customers: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Price grid spacing for the brute-force optimum.
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long)]
    quadrature_points: Option<usize>,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file. Written once, after all computation.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// csv or svg; defaults to the output extension, then csv.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Plane {
    AlphaR,
    AlphaRatio,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal price, regime and profit.
    Solve {
        /// Print the full solution as JSON.
        #[arg(long)]
        json: bool,
        /// Retailer pays the return cost.
        #[arg(long)]
        coverage: Option<bool>,
    },
    /// Landmark prices, and customer behavior at a price.
    Inspect {
        #[arg(long, allow_hyphen_values = true)]
        p1: Option<f64>,
    },
    /// Profit and its components at one price.
    Profit {
        #[arg(long, allow_hyphen_values = true)]
        p1: Option<f64>,
        #[arg(long)]
        coverage: Option<bool>,
    },
    /// Monte Carlo replay of the customer game at one price.
    Simulate {
        #[arg(long, allow_hyphen_values = true)]
        p1: Option<f64>,
        #[arg(long)]
        coverage: Option<bool>,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Optimal-regime map over a parameter plane.
    Sweep {
        #[arg(long, value_enum)]
        plane: Option<Plane>,
        /// Cells per axis (x axis if --steps-y is given).
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        steps_y: Option<usize>,
        /// v1/v2 range for the alpha-ratio plane.
        #[arg(long)]
        ratio_lo: Option<f64>,
        #[arg(long)]
        ratio_hi: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Profit against price with landmark annotations.
    Curve {
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Optimal outcome with and without retailer-paid returns.
    Coverage {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Cross-check closed forms against simulation and brute force.
    Verify {
        #[command(flatten)]
        sim: SimArgs,
        /// Monte Carlo band width in standard errors.
        #[arg(long)]
        sigma: Option<f64>,
        /// Sampled checks with a wider band are inconclusive.
        #[arg(long)]
        ci_halfwidth_limit: Option<f64>,
        /// Shift β̄ in the closed form (fault drill).
        #[arg(long, hide = true, allow_hyphen_values = true)]
        inject_beta_fault: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Verification(String),
    Input(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Input(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::Input(m) | Failure::Io(m) => m,
        }
    }
}

impl From<trial_return::Error> for Failure {
    fn from(e: trial_return::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn init_threads() -> Outcome {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Input(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Input(e.to_string()))
}

struct Ctx {
    file: FileConfig,
    market: MarketArgs,
}

impl Ctx {
    fn v1(&self) -> f64 {
        self.market.v1.or(self.file.market.v1).unwrap_or(2.0)
    }
    fn v2(&self) -> f64 {
        self.market.v2.or(self.file.market.v2).unwrap_or(1.0)
    }
    fn p2_bar(&self) -> f64 {
        self.market.p2_bar.or(self.file.market.p2_bar).unwrap_or(0.0)
    }
    fn alpha(&self) -> f64 {
        self.market.alpha.or(self.file.market.alpha).unwrap_or(0.25)
    }
    fn r(&self) -> f64 {
        self.market.r.or(self.file.market.r).unwrap_or(0.125)
    }

    fn params(&self) -> Result<MarketParams, Failure> {
        Ok(MarketParams::new(self.v1(), self.v2(), self.p2_bar(), self.alpha(), self.r())?)
    }

    fn policy(&self, flag: Option<bool>) -> ReturnPolicy {
        ReturnPolicy::from_coverage(flag.or(self.file.coverage).unwrap_or(false))
    }

    fn sim(&self, a: &SimArgs) -> SimConfig {
        let base = self.file.sim.unwrap_or_default();
        SimConfig {
            n_customers: a.n_customers.unwrap_or(base.n_customers),
            seed: a.seed.unwrap_or(base.seed),
            price_grid_step: a.grid_step.unwrap_or(base.price_grid_step),
            quadrature_points: a.quadrature_points.unwrap_or(base.quadrature_points),
        }
    }

    fn price(&self, flag: Option<f64>) -> Option<f64> {
        flag.or(self.file.p1)
    }

    fn output(&self, flag: Option<PathBuf>) -> Option<PathBuf> {
        flag.or_else(|| self.file.output.clone())
    }
}

fn run(cli: Cli) -> Outcome {
    init_threads()?;
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(Failure::Input)?,
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        file,
        market: cli.market,
    };
    match cli.command {
        Command::Solve { json, coverage } => cmd_solve(&ctx, json, coverage),
        Command::Inspect { p1 } => cmd_inspect(&ctx, p1),
        Command::Profit { p1, coverage } => cmd_profit(&ctx, p1, coverage),
        Command::Simulate {
            p1,
            coverage,
            sim,
            output,
        } => cmd_simulate(&ctx, p1, coverage, &sim, output),
        Command::Sweep {
            plane,
            steps,
            steps_y,
            ratio_lo,
            ratio_hi,
            out,
        } => cmd_sweep(&ctx, plane, steps, steps_y, ratio_lo, ratio_hi, out),
        Command::Curve {
            lo,
            hi,
            samples,
            out,
        } => cmd_curve(&ctx, lo, hi, samples, out),
        Command::Coverage { output } => cmd_coverage(&ctx, output),
        Command::Verify {
            sim,
            sigma,
            ci_halfwidth_limit,
            inject_beta_fault,
            output,
        } => cmd_verify(&ctx, &sim, sigma, ci_halfwidth_limit, inject_beta_fault, output),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

/// Writes `text` to `path` and prints `summary`, or prints `text` alone.
fn emit(path: Option<&Path>, text: &str, summary: &str) -> Outcome {
    match path {
        Some(p) => {
            write_file(p, text)?;
            println!("{summary} -> {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn required_price(ctx: &Ctx, flag: Option<f64>) -> Result<f64, Failure> {
    let p = ctx
        .price(flag)
        .ok_or_else(|| Failure::Input("a price is required (--p1)".into()))?;
    if p.is_finite() {
        Ok(p)
    } else {
        Err(Failure::Input(format!("p1 must be finite, got {p}")))
    }
}

fn cmd_solve(ctx: &Ctx, json: bool, coverage: Option<bool>) -> Outcome {
    let params = ctx.params()?;
    let sol = optimize_under(&params, ctx.policy(coverage));
    if json {
        print!("{}", to_json(&sol));
        return Ok(());
    }
    let mut out = String::new();
    let _ = writeln!(out, "case        {}", sol.case);
    let _ = writeln!(out, "optimal p1  {}", fmt_num(sol.optimal_p1));
    let _ = writeln!(out, "regime      {}", sol.regime);
    let _ = writeln!(out, "profit      {}", fmt_num(sol.optimal_profit));
    let _ = writeln!(out, "candidates");
    let _ = writeln!(out, "  {:<16} {:<16} regime", "p1", "profit");
    for c in &sol.candidates {
        let _ = writeln!(out, "  {:<16} {:<16} {}", fmt_num(c.p1), fmt_num(c.profit), c.regime);
    }
    print!("{out}");
    Ok(())
}

#[derive(Serialize)]
struct Inspection {
    market: MarketParams,
    case: trial_return::CaseLabel,
    landmarks: Vec<(String, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    behavior: Option<trial_return::BehaviorProfile>,
}

fn cmd_inspect(ctx: &Ctx, p1: Option<f64>) -> Outcome {
    let params = ctx.params()?;
    let t = Thresholds::new(&params);
    let p1 = ctx.price(p1);
    let report = Inspection {
        market: params,
        case: t.case(),
        landmarks: t.landmarks().iter().map(|&(n, p)| (n.to_string(), p)).collect(),
        p1,
        behavior: p1.map(|p| trial_return::solve_behavior(&params, p)),
    };
    print!("{}", to_json(&report));
    Ok(())
}

fn cmd_profit(ctx: &Ctx, p1: Option<f64>, coverage: Option<bool>) -> Outcome {
    let params = ctx.params()?;
    let p1 = required_price(ctx, p1)?;
    print!("{}", to_json(&trial_return::profit_at(&params, p1, ctx.policy(coverage))));
    Ok(())
}

fn cmd_simulate(
    ctx: &Ctx,
    p1: Option<f64>,
    coverage: Option<bool>,
    sim: &SimArgs,
    output: Option<PathBuf>,
) -> Outcome {
    let params = ctx.params()?;
    let p1 = required_price(ctx, p1)?;
    let result = simulate(&params, p1, &ctx.sim(sim), ctx.policy(coverage))?;
    let summary = format!(
        "simulated {} customers at p1 = {}: profit {} (se {})",
        result.n,
        fmt_num(p1),
        fmt_num(result.est_profit.mean),
        fmt_num(result.est_profit.std_error)
    );
    emit(ctx.output(output).as_deref(), &to_json(&result), &summary)
}

fn output_format(ctx: &Ctx, out: &OutputArgs, path: Option<&Path>) -> Result<Format, Failure> {
    if let Some(f) = out.format.as_deref().or(ctx.file.format.as_deref()) {
        return Ok(f.parse()?);
    }
    match path {
        Some(p) if p.extension().is_some() => Ok(Format::from_path(p)?),
        _ => Ok(Format::Csv),
    }
}

fn write_document<R: Render>(ctx: &Ctx, doc: &R, out: OutputArgs, summary: &str) -> Outcome {
    let path = ctx.output(out.output.clone());
    let format = output_format(ctx, &out, path.as_deref())?;
    emit(path.as_deref(), &render_as(doc, format), summary)
}

fn parse_plane(s: &str) -> Result<Plane, Failure> {
    Plane::from_str(s, true).map_err(|_| Failure::Input(format!("unknown plane `{s}`")))
}

fn map_summary(map: &RegionMap) -> String {
    let counts: Vec<String> = OptimalRegime::ALL
        .iter()
        .map(|&r| format!("{r} {}", map.count(r)))
        .collect();
    format!("{} cells ({})", map.cells.len(), counts.join(", "))
}

fn cmd_sweep(
    ctx: &Ctx,
    plane: Option<Plane>,
    steps: Option<usize>,
    steps_y: Option<usize>,
    ratio_lo: Option<f64>,
    ratio_hi: Option<f64>,
    out: OutputArgs,
) -> Outcome {
    let f = &ctx.file;
    let plane = match (plane, f.plane.as_deref()) {
        (Some(p), _) => p,
        (None, Some(s)) => parse_plane(s)?,
        (None, None) => Plane::AlphaR,
    };
    let nx = steps.or(f.steps).unwrap_or(100);
    let ny = steps_y.or(f.steps_y).unwrap_or(nx);
    let map = match plane {
        Plane::AlphaR => {
            validate_products(ctx.v1(), ctx.v2(), ctx.p2_bar())?;
            sweep_alpha_r(ctx.v1(), ctx.v2(), ctx.p2_bar(), GridSpec::unit(nx), GridSpec::unit(ny))?
        }
        Plane::AlphaRatio => {
            let lo = ratio_lo.or(f.ratio_lo).unwrap_or(1.001);
            let hi = ratio_hi.or(f.ratio_hi).unwrap_or(10.0);
            let r = ctx.market.r.or(f.market.r).unwrap_or(0.6);
            sweep_alpha_valueratio(ctx.p2_bar(), ctx.v2(), r, GridSpec::unit(nx), GridSpec::new(lo, hi, ny))?
        }
    };
    let summary = map_summary(&map);
    write_document(ctx, &map, out, &summary)
}

fn cmd_curve(
    ctx: &Ctx,
    lo: Option<f64>,
    hi: Option<f64>,
    samples: Option<usize>,
    out: OutputArgs,
) -> Outcome {
    let params = ctx.params()?;
    let (dlo, dhi) = default_curve_range(&params);
    let f = &ctx.file;
    let curve = profit_curve(
        &params,
        lo.or(f.lo).unwrap_or(dlo),
        hi.or(f.hi).unwrap_or(dhi),
        samples.or(f.samples).unwrap_or(400),
    )?;
    let summary = format!("{} samples, {} landmarks", curve.samples.len(), curve.landmarks.len());
    write_document(ctx, &curve, out, &summary)
}

fn cmd_coverage(ctx: &Ctx, output: Option<PathBuf>) -> Outcome {
    let params = ctx.params()?;
    let cmp = compare_coverage(&params);
    let summary = format!(
        "recommend_coverage = {} (profit {} without, {} with)",
        cmp.recommend_coverage,
        fmt_num(cmp.profit_no_coverage),
        fmt_num(cmp.profit_with_coverage)
    );
    emit(ctx.output(output).as_deref(), &to_json(&cmp), &summary)
}

fn cmd_verify(
    ctx: &Ctx,
    sim: &SimArgs,
    sigma: Option<f64>,
    ci_halfwidth_limit: Option<f64>,
    fault: Option<f64>,
    output: Option<PathBuf>,
) -> Outcome {
    let params = ctx.params()?;
    let defaults = VerifyConfig::default();
    let config = VerifyConfig {
        sim: ctx.sim(sim),
        sigma: sigma.or(ctx.file.sigma).unwrap_or(defaults.sigma),
        ci_halfwidth_limit: ci_halfwidth_limit
            .or(ctx.file.ci_halfwidth_limit)
            .unwrap_or(defaults.ci_halfwidth_limit),
        beta_bar_fault: fault.unwrap_or(0.0),
    };
    let report = verify(&params, &config)?;
    let summary = format!(
        "{} checks: {} passed, {} failed, {} inconclusive",
        report.checks.len(),
        report.passed,
        report.failed,
        report.inconclusive
    );
    emit(ctx.output(output).as_deref(), &to_json(&report), &summary)?;
    if report.all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| c.status == trial_return::CheckStatus::Fail)
            .map(|c| c.name.as_str())
            .collect();
        Err(Failure::Verification(format!("verification failed: {}", failed.join(", "))))
    }
}
