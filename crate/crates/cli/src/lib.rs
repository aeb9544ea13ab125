//! The `kmr` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kmr_core::certificate::certify_recovery;
use kmr_core::experiments::{
    appendix_a_order_mismatch, appendix_b_counterexample, delta_scan, order_counts, recovery_rate, records_csv,
    scan_csv, wilson_interval, CounterexampleConfig, ExperimentConfig, Layout, Method, RateSummary, SeedRange,
};
use kmr_core::gfunction::{appendix_constants, t_scan, TfnParams};
use kmr_core::instance::{brute_force_ip, generate, ground_truth, Instance};
use kmr_core::io::{from_json, read_instance, read_json, to_json, write_json, SolutionRecord};
use kmr_core::lp::{decide_recovery_with, solve, solve_with, DecideOptions, LpModel, SolveOptions, SIZE_GUARD};
use kmr_core::measures::RadialLaw;
use kmr_core::numerics::QuadratureSpec;
use kmr_core::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "kmr", version, about = "Exact recovery experiments for the k-median LP relaxation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw an instance from a ball layout and write it as JSON.
    Generate(GenerateArgs),
    /// Solve the LP relaxation of an instance and decide exact recovery.
    Solve(SolveArgs),
    /// Build and verify the dual certificate for an instance's ground truth.
    Certify(CertifyArgs),
    /// Tabulate the single-ball gap function on a uniform grid.
    TfnScan(TfnArgs),
    /// Recovery rate over a grid of center spacings.
    ScanDelta(ScanArgs),
    /// Impossibility witness campaign on the seven-ball hexagon.
    CounterexampleB(CounterArgs),
    /// Compare the ground truth with a two-centers-in-one-ball clustering
    /// when the balls have very different sizes.
    OrderMismatchA(OrderArgs),
    /// Recovery rate of one configuration over a seed range.
    RecoveryRate(RateArgs),
    /// Run a quick suite of invariant checks.
    Selftest,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum LayoutKind {
    Pair,
    Line,
    Simplex,
    Hexagon7,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum LawKind {
    UniformBall,
    UniformSphere,
    PointMass,
    Annulus,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum MethodArg {
    Certificate,
    Lp,
    Witness,
    Auto,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Certificate => Method::Certificate,
            MethodArg::Lp => Method::Lp,
            MethodArg::Witness => Method::Witness,
            MethodArg::Auto => Method::Auto,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Default)]
struct GeometryArgs {
    /// Placement of the ball centers.
    #[arg(long, value_enum)]
    layout: Option<LayoutKind>,
    /// Number of balls for the line and simplex layouts.
    #[arg(long)]
    k: Option<usize>,
    /// Distance between neighboring centers.
    #[arg(long)]
    delta: Option<f64>,
    /// Ambient dimension.
    #[arg(long)]
    m: Option<u32>,
    /// Points per ball (scaled by the ball weight).
    #[arg(long)]
    n: Option<usize>,
    /// Ball radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Radial law of the points inside each ball.
    #[arg(long, value_enum)]
    law: Option<LawKind>,
    /// Sphere radius for the uniform-sphere law.
    #[arg(long)]
    shell: Option<f64>,
    /// Boundary layer width for the annulus law.
    #[arg(long)]
    annulus_eps: Option<f64>,
    /// Interior mass for the annulus law.
    #[arg(long)]
    interior_mass: Option<f64>,
    /// Comma-separated per-ball count multipliers.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
}

impl GeometryArgs {
    fn any(&self) -> bool {
        self.layout.is_some()
            || self.k.is_some()
            || self.delta.is_some()
            || self.m.is_some()
            || self.n.is_some()
            || self.radius.is_some()
            || self.law.is_some()
            || self.shell.is_some()
            || self.annulus_eps.is_some()
            || self.interior_mass.is_some()
            || self.weights.is_some()
    }

    fn law(&self) -> Result<RadialLaw> {
        let law = self.law.unwrap_or(LawKind::UniformBall);
        if law != LawKind::UniformSphere && self.shell.is_some() {
            return Err(usage("--shell applies to the uniform-sphere law only"));
        }
        if law != LawKind::Annulus && (self.annulus_eps.is_some() || self.interior_mass.is_some()) {
            return Err(usage("--annulus-eps and --interior-mass apply to the annulus law only"));
        }
        Ok(match law {
            LawKind::UniformBall => RadialLaw::UniformBall,
            LawKind::PointMass => RadialLaw::PointMass,
            LawKind::UniformSphere => RadialLaw::UniformSphere {
                s: self.shell.ok_or_else(|| usage("the uniform-sphere law needs --shell"))?,
            },
            LawKind::Annulus => RadialLaw::Annulus {
                eps: self.annulus_eps.ok_or_else(|| usage("the annulus law needs --annulus-eps"))?,
                interior_mass: self.interior_mass.unwrap_or(0.001),
            },
        })
    }

    /// Layout with `delta`, falling back to `default_delta` when the flag is
    /// absent.
    fn layout(&self, default_delta: Option<f64>) -> Result<Layout> {
        let kind = self.layout.ok_or_else(|| usage("--layout is required"))?;
        let delta = self
            .delta
            .or(default_delta)
            .ok_or_else(|| usage("--delta is required"))?;
        let k = || self.k.ok_or_else(|| usage("--k is required for this layout"));
        if matches!(kind, LayoutKind::Pair | LayoutKind::Hexagon7) && self.k.is_some() {
            return Err(usage("--k applies to the line and simplex layouts only"));
        }
        Ok(match kind {
            LayoutKind::Pair => Layout::Pair { delta },
            LayoutKind::Hexagon7 => Layout::Hexagon7 { delta },
            LayoutKind::Line => Layout::Line { k: k()?, delta },
            LayoutKind::Simplex => Layout::Simplex { k: k()?, delta },
        })
    }

    fn config(&self, default_delta: Option<f64>, seeds: SeedRange, method: Method) -> Result<ExperimentConfig> {
        let m = self.m.ok_or_else(|| usage("--m is required"))?;
        let n = self.n.ok_or_else(|| usage("--n is required"))?;
        let mut cfg = ExperimentConfig::new(self.layout(default_delta)?, m, n, seeds, method);
        cfg.radius = self.radius.unwrap_or(1.0);
        cfg.law = self.law()?;
        cfg.weights = self.weights.clone();
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent or `-`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Instance file written by `generate`.
    #[arg(long)]
    instance: PathBuf,
    /// Largest point count handed to the LP solver.
    #[arg(long, default_value_t = SIZE_GUARD)]
    size_guard: usize,
    /// Decide recovery from the LP alone, skipping the certificate.
    #[arg(long)]
    lp_only: bool,
    /// Output file; standard output when absent or `-`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// Instance file written by `generate`.
    #[arg(long)]
    instance: PathBuf,
    /// Common slack parameter of the recipe; the midpoint of the admissible
    /// interval when absent.
    #[arg(long)]
    gamma: Option<f64>,
    /// Output file; standard output when absent or `-`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TfnArgs {
    /// Dual level; must exceed the radius.
    #[arg(long)]
    alpha: f64,
    /// Dimension.
    #[arg(long)]
    m: u32,
    /// Ball radius.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Number of grid points on (0, r].
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    /// Table format; inferred from the output extension when absent.
    #[arg(long, value_enum)]
    format: Option<TableFormat>,
    /// Output file; standard output when absent or `-`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CampaignArgs {
    /// Experiment configuration file; replaces the geometry flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    geometry: GeometryArgs,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<u64>,
    /// Decision method.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Expected rate, reported next to the result.
    #[arg(long)]
    threshold: Option<f64>,
    /// Probe offset of the impossibility witness.
    #[arg(long)]
    witness_eps: Option<f64>,
    /// Largest point count handed to the LP solver.
    #[arg(long)]
    size_guard: Option<usize>,
    /// Record wall-clock times per trial (output is then not reproducible).
    #[arg(long)]
    timing: bool,
    /// Per-trial CSV; standard output when absent or `-`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CampaignArgs {
    fn config(&self, default_delta: Option<f64>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                if self.geometry.any() {
                    return Err(usage("--config cannot be combined with geometry flags"));
                }
                read_json::<ExperimentConfig>(path)?
            }
            None => self.geometry.config(
                default_delta,
                SeedRange { start: 0, count: 20 },
                Method::Auto,
            )?,
        };
        if let Some(s) = self.seed {
            cfg.seeds.start = s;
        }
        if let Some(c) = self.seeds {
            cfg.seeds.count = c;
        }
        if let Some(m) = self.method {
            cfg.method = m.into();
        }
        if self.threshold.is_some() {
            cfg.threshold = self.threshold;
        }
        if let Some(e) = self.witness_eps {
            cfg.witness_eps = e;
        }
        if let Some(g) = self.size_guard {
            cfg.size_guard = g;
        }
        cfg.timing |= self.timing;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct RateArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    /// Summary JSON file.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    /// Comma-separated center spacings, sorted ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    /// Per-spacing summary CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CounterArgs {
    /// Points per ball for the witness campaign.
    #[arg(long, default_value_t = 3000)]
    n: usize,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of seeds.
    #[arg(long, default_value_t = 30)]
    seeds: u64,
    /// Boundary layer width of the annulus and probe offset.
    #[arg(long, default_value_t = 0.0005)]
    eps: f64,
    /// Mass of the annulus interior.
    #[arg(long, default_value_t = 0.001)]
    interior_mass: f64,
    /// Distance between the middle center and the outer ones.
    #[arg(long, default_value_t = 2.2)]
    delta: f64,
    /// Points per ball for an additional LP campaign.
    #[arg(long)]
    lp_n: Option<usize>,
    /// Number of seeds of the LP campaign.
    #[arg(long)]
    lp_seeds: Option<u64>,
    /// Per-trial CSV of the witness campaign; standard output when absent or `-`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial CSV of the LP campaign.
    #[arg(long)]
    lp_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OrderArgs {
    /// Comma-separated sizes of the large ball.
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    n: Vec<usize>,
    /// Size of the small ball; the ceiling of the square root of n when absent.
    #[arg(long)]
    n2: Option<usize>,
    /// Give both balls n points.
    #[arg(long, conflicts_with = "n2")]
    control: bool,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of seeds.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Center spacing.
    #[arg(long, default_value_t = 4.0)]
    delta: f64,
    /// Dimension.
    #[arg(long, default_value_t = 2)]
    m: u32,
    /// Per-trial CSV; standard output when absent or `-`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn usage(msg: &str) -> Error {
    Error::Config(msg.into())
}

/// Exit code for a library error: 2 for bad input, 1 for a failed computation.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("kmr: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Certify(a) => cmd_certify(a),
        Command::TfnScan(a) => cmd_tfn(a),
        Command::ScanDelta(a) => cmd_scan(a),
        Command::CounterexampleB(a) => cmd_counter(a),
        Command::OrderMismatchA(a) => cmd_order(a),
        Command::RecoveryRate(a) => cmd_rate(a),
        Command::Selftest => cmd_selftest(),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) if p != Path::new("-") => {
            std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
        }
        _ => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())
                .and_then(|_| so.flush())
                .map_err(|e| Error::Io(e.to_string()))
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, body: &T) -> Result<()> {
    match out {
        Some(p) if p != Path::new("-") => write_json(p, body),
        _ => emit(None, &to_json(body)?),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<i32> {
    let cfg = a.geometry.config(None, SeedRange { start: a.seed, count: 1 }, Method::Auto)?;
    cfg.validate()?;
    let inst = generate(&cfg.balls()?, cfg.n, a.seed)?;
    emit_json(a.out.as_deref(), &inst)?;
    Ok(EXIT_OK)
}

fn cmd_solve(a: SolveArgs) -> Result<i32> {
    let inst = read_instance(&a.instance)?;
    let model = LpModel::build(&inst)?;
    let start = ground_truth(&inst).ok().map(|g| g.clustering);
    let (sol, dual) = solve_with(
        &model,
        &SolveOptions {
            size_guard: a.size_guard,
            cost: None,
            start,
        },
    )?;
    let verdict = decide_recovery_with(
        &inst,
        &DecideOptions {
            use_certificate: !a.lp_only,
            size_guard: a.size_guard,
            ..DecideOptions::default()
        },
    )?;
    eprintln!(
        "objective {:.9} ({:?}, {} iterations), verdict {}",
        sol.objective,
        sol.status,
        sol.iterations,
        verdict.status.as_str()
    );
    let rec = SolutionRecord::new(inst.k, &sol, &dual, Some(verdict));
    emit_json(a.out.as_deref(), &rec)?;
    Ok(EXIT_OK)
}

fn cmd_certify(a: CertifyArgs) -> Result<i32> {
    let inst = read_instance(&a.instance)?;
    let out = certify_recovery(&inst, a.gamma)?;
    let v = &out.verdict;
    for (name, c) in [("a", v.cond_a), ("b", v.cond_b), ("c", v.cond_c), ("d", v.cond_d)] {
        eprintln!("condition {name}: {:?} margin {:e}", c.status, c.margin);
    }
    eprintln!("implies {:?}", v.implies);
    emit_json(a.out.as_deref(), &out)?;
    Ok(EXIT_OK)
}

fn table_format(explicit: Option<TableFormat>, out: Option<&Path>) -> TableFormat {
    explicit.unwrap_or_else(|| match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => TableFormat::Json,
        _ => TableFormat::Csv,
    })
}

fn cmd_tfn(a: TfnArgs) -> Result<i32> {
    if a.grid == 0 {
        return Err(usage("--grid must be at least 1"));
    }
    let params = TfnParams::new(a.r, a.alpha, a.m)?;
    let rows = t_scan(&params, a.grid)?;
    let text = match table_format(a.format, a.out.as_deref()) {
        TableFormat::Csv => {
            let mut s = String::from("t,T\n");
            for (t, v) in &rows {
                s.push_str(&format!("{t},{v}\n"));
            }
            s
        }
        TableFormat::Json => {
            #[derive(Serialize)]
            struct Scan<'a> {
                params: TfnParams,
                rows: &'a [(f64, f64)],
            }
            to_json(&Scan { params, rows: &rows })?
        }
    };
    let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    eprintln!("{} points, smallest value {min:e}", rows.len());
    emit(a.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

fn describe_rate(s: &RateSummary) -> String {
    let mut line = format!(
        "{} rate {:.4} ({}/{}), 95% Wilson [{:.4}, {:.4}]",
        s.success_label, s.rate, s.successes, s.trials, s.wilson.0, s.wilson.1
    );
    if let (Some(t), Some(met)) = (s.threshold, s.meets_threshold) {
        line.push_str(&format!(
            "; threshold {t} (calibration, not a theoretical constant) {}",
            if met { "met" } else { "not met" }
        ));
    }
    line
}

#[derive(Serialize)]
struct RateReport<'a> {
    config: &'a ExperimentConfig,
    success_label: &'a str,
    trials: usize,
    successes: usize,
    rate: f64,
    wilson: (f64, f64),
    threshold: Option<f64>,
    meets_threshold: Option<bool>,
}

fn cmd_rate(a: RateArgs) -> Result<i32> {
    let cfg = a.campaign.config(None)?;
    let s = recovery_rate(&cfg)?;
    eprintln!("{}", describe_rate(&s));
    if let Some(p) = &a.summary {
        write_json(
            p,
            &RateReport {
                config: &cfg,
                success_label: &s.success_label,
                trials: s.trials,
                successes: s.successes,
                rate: s.rate,
                wilson: s.wilson,
                threshold: s.threshold,
                meets_threshold: s.meets_threshold,
            },
        )?;
    }
    emit(a.campaign.out.as_deref(), &records_csv(&s.records)?)?;
    Ok(EXIT_OK)
}

fn cmd_scan(a: ScanArgs) -> Result<i32> {
    let cfg = a.campaign.config(a.grid.first().copied())?;
    let scan = delta_scan(&cfg, &a.grid)?;
    for r in &scan.rows {
        eprintln!(
            "delta {:<8} {} rate {:.4} ({}/{}) [{:.4}, {:.4}]",
            r.delta, scan.success_label, r.rate, r.successes, r.trials, r.wilson.0, r.wilson.1
        );
    }
    if let Some(p) = &a.summary {
        emit(Some(p), &scan_csv(&scan.rows)?)?;
    }
    emit(a.campaign.out.as_deref(), &records_csv(&scan.records)?)?;
    Ok(EXIT_OK)
}

fn cmd_counter(a: CounterArgs) -> Result<i32> {
    if a.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let cfg = CounterexampleConfig {
        delta: a.delta,
        n: a.n,
        seeds: SeedRange { start: a.seed, count: a.seeds },
        eps: a.eps,
        interior_mass: a.interior_mass,
        lp_n: a.lp_n,
        lp_seeds: a.lp_seeds.map(|count| SeedRange { start: a.seed, count }),
    };
    let s = appendix_b_counterexample(&cfg)?;
    eprintln!(
        "mass condition: lhs {:.6} > rhs {:.6} (margin {:.6})",
        s.assumption.lhs, s.assumption.rhs, s.assumption.margin
    );
    eprintln!(
        "constants: A = {:.9} (bound 0.279), B = {:.9} (bound 0.292)",
        s.constants.0, s.constants.1
    );
    eprintln!("witness: {}", describe_rate(&s.witness));
    if let Some(lp) = &s.lp {
        eprintln!(
            "lp: not achieved in {}/{} seeds",
            lp.trials - lp.successes,
            lp.trials
        );
        if let Some(p) = &a.lp_out {
            emit(Some(p), &records_csv(&lp.records)?)?;
        }
    }
    emit(a.out.as_deref(), &records_csv(&s.witness.records)?)?;
    Ok(EXIT_OK)
}

fn cmd_order(a: OrderArgs) -> Result<i32> {
    if a.n.is_empty() {
        return Err(usage("--n needs at least one size"));
    }
    let mut csv = String::from("n1,n2,seed,ground_truth,alternative,alternative_better\n");
    for &n in &a.n {
        let (n1, n2) = match a.n2 {
            Some(n2) => (n, n2),
            None => order_counts(n, a.control),
        };
        let s = appendix_a_order_mismatch(n1, n2, SeedRange { start: a.seed, count: a.seeds }, a.delta, a.m)?;
        eprintln!(
            "n1 {n1} n2 {n2}: alternative strictly better in {:.4} of seeds [{:.4}, {:.4}]",
            s.rate, s.wilson.0, s.wilson.1
        );
        for r in &s.records {
            csv.push_str(&format!(
                "{n1},{n2},{},{},{},{}\n",
                r.seed, r.ground_truth, r.alternative, r.alternative_better
            ));
        }
    }
    emit(a.out.as_deref(), &csv)?;
    Ok(EXIT_OK)
}

struct Check {
    name: &'static str,
    ok: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((ok, detail)) => Check { name, ok, detail },
        Err(e) => Check {
            name,
            ok: false,
            detail: e.to_string(),
        },
    }
}

/// Fast invariant checks; each runs in well under a second.
fn selftest_checks() -> Vec<Check> {
    vec![
        check("collinear lp equals ip", || {
            let pts: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 10.0, 11.0, 12.0].iter().map(|&x| vec![x]).collect();
            let ip = brute_force_ip(&pts, 2)?.objective;
            let (sol, _) = solve(&LpModel::from_points(&pts, 2)?)?;
            Ok(((sol.objective - ip).abs() < 1e-7 && (ip - 4.0).abs() < 1e-12, format!("lp {} ip {ip}", sol.objective)))
        }),
        check("lp never exceeds ip", || {
            let cfg = ExperimentConfig::new(Layout::Pair { delta: 2.5 }, 2, 4, SeedRange { start: 0, count: 1 }, Method::Lp);
            let balls = cfg.balls()?;
            let mut worst = f64::NEG_INFINITY;
            for seed in 0..10 {
                let inst = generate(&balls, 4, seed)?;
                let ip = brute_force_ip(&inst.points, 2)?.objective;
                let (sol, _) = solve(&LpModel::build(&inst)?)?;
                worst = worst.max(sol.objective - ip);
            }
            Ok((worst <= 1e-7, format!("largest lp - ip {worst:e}")))
        }),
        check("gap function positive", || {
            let rows = t_scan(&TfnParams::new(1.0, 1.29, 2)?, 50)?;
            let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
            Ok((min > 0.0, format!("smallest value {min:e}")))
        }),
        check("counterexample constants", || {
            let (a, b) = appendix_constants(&QuadratureSpec::default())?;
            Ok((a < 0.279 && b > 0.292, format!("A {a:.9} B {b:.9}")))
        }),
        check("wilson interval contains rate", || {
            let ok = (0..=20).all(|s| {
                let (lo, hi) = wilson_interval(s, 20);
                let p = s as f64 / 20.0;
                lo <= p && p <= hi
            });
            Ok((ok, String::new()))
        }),
        check("instance json round trip", || {
            let cfg = ExperimentConfig::new(Layout::Pair { delta: 3.5 }, 3, 25, SeedRange { start: 0, count: 1 }, Method::Auto);
            let inst = generate(&cfg.balls()?, 25, 11)?;
            let back: Instance = from_json(&to_json(&inst)?)?;
            Ok((back == inst, String::new()))
        }),
        check("separated pair is certified", || {
            let cfg = ExperimentConfig::new(Layout::Pair { delta: 3.5 }, 2, 50, SeedRange { start: 0, count: 1 }, Method::Auto);
            let inst = generate(&cfg.balls()?, 50, 1)?;
            let v = certify_recovery(&inst, None)?.verdict;
            Ok((v.implies == kmr_core::certificate::Implication::UniqueOptimum, format!("{:?}", v.implies)))
        }),
    ]
}

fn cmd_selftest() -> Result<i32> {
    let checks = selftest_checks();
    let mut failed = 0;
    for c in &checks {
        println!("{} {}{}", if c.ok { "ok  " } else { "FAIL" }, c.name, if c.detail.is_empty() { String::new() } else { format!(": {}", c.detail) });
        failed += usize::from(!c.ok);
    }
    println!("{}/{} checks passed", checks.len() - failed, checks.len());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}
