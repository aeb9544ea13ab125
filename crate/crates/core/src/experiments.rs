//! Seeded Monte Carlo campaigns over ball layouts.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{certify_with, default_probe, witness_with, Implication, WitnessOutcome};
use crate::error::{Error, Result};
use crate::gfunction::appendix_constants;
use crate::instance::{generate, generate_with_counts, ground_truth, nearest_to, Clustering, Instance};
use crate::lp::{decide_recovery_with, DecideOptions, RecoveryStatus, SIZE_GUARD};
use crate::measures::{check_counterexample_assumption, AssumptionCheck, BallConfig, MeasureSpec, RadialLaw};
use crate::numerics::QuadratureSpec;

/// Placement of the ball centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    /// Two centers at distance `delta` along the first axis.
    Pair { delta: f64 },
    /// `k` centers spaced `delta` apart along the first axis.
    Line { k: usize, delta: f64 },
    /// Vertices of a regular simplex with edge `delta`; needs `m ≥ k − 1`.
    Simplex { k: usize, delta: f64 },
    /// The origin and six centers at polar `(delta, −(i − 2)π/3)`,
    /// `i = 2..7`, in the first two coordinates.
    Hexagon7 { delta: f64 },
    Custom { centers: Vec<Vec<f64>> },
}

impl Layout {
    pub fn k(&self) -> usize {
        match self {
            Layout::Pair { .. } => 2,
            Layout::Line { k, .. } | Layout::Simplex { k, .. } => *k,
            Layout::Hexagon7 { .. } => 7,
            Layout::Custom { centers } => centers.len(),
        }
    }

    /// Smallest distance between two centers.
    pub fn delta(&self) -> f64 {
        match self {
            Layout::Pair { delta }
            | Layout::Line { delta, .. }
            | Layout::Simplex { delta, .. }
            | Layout::Hexagon7 { delta } => *delta,
            Layout::Custom { centers } => {
                let mut best = f64::INFINITY;
                for i in 0..centers.len() {
                    for j in i + 1..centers.len() {
                        best = best.min(crate::measures::distance(&centers[i], &centers[j]));
                    }
                }
                best
            }
        }
    }

    /// Same layout with the spacing replaced; custom layouts are scaled.
    pub fn with_delta(&self, delta: f64) -> Layout {
        match self {
            Layout::Pair { .. } => Layout::Pair { delta },
            Layout::Line { k, .. } => Layout::Line { k: *k, delta },
            Layout::Simplex { k, .. } => Layout::Simplex { k: *k, delta },
            Layout::Hexagon7 { .. } => Layout::Hexagon7 { delta },
            Layout::Custom { centers } => {
                let f = delta / self.delta();
                Layout::Custom {
                    centers: centers.iter().map(|c| c.iter().map(|x| x * f).collect()).collect(),
                }
            }
        }
    }

    pub fn centers(&self, m: u32) -> Result<Vec<Vec<f64>>> {
        let m = m as usize;
        let axis = |x: f64, y: f64| {
            let mut c = vec![0.0; m];
            c[0] = x;
            if m > 1 {
                c[1] = y;
            }
            c
        };
        let k = self.k();
        if k == 0 {
            return Err(Error::Config("a layout needs at least one center".into()));
        }
        if !(self.delta() > 0.0) && k > 1 {
            return Err(Error::Config("center spacing must be positive".into()));
        }
        match self {
            Layout::Pair { delta } => Ok(vec![axis(0.0, 0.0), axis(*delta, 0.0)]),
            Layout::Line { k, delta } => Ok((0..*k).map(|i| axis(i as f64 * delta, 0.0)).collect()),
            Layout::Hexagon7 { delta } => {
                if m < 2 {
                    return Err(Error::Config("hexagon7 needs m >= 2".into()));
                }
                let mut out = vec![axis(0.0, 0.0)];
                for i in 2..=7 {
                    let th = -((i - 2) as f64) * std::f64::consts::PI / 3.0;
                    out.push(axis(delta * th.cos(), delta * th.sin()));
                }
                Ok(out)
            }
            Layout::Simplex { k, delta } => simplex_vertices(*k, *delta, m),
            Layout::Custom { centers } => {
                if centers.iter().any(|c| c.len() != m) {
                    return Err(Error::Config("custom centers must have dimension m".into()));
                }
                Ok(centers.clone())
            }
        }
    }
}

/// Regular simplex with edge `delta` in the first `k − 1` coordinates.
fn simplex_vertices(k: usize, delta: f64, m: usize) -> Result<Vec<Vec<f64>>> {
    if k == 1 {
        return Ok(vec![vec![0.0; m]]);
    }
    if m + 1 < k {
        return Err(Error::Config(format!("a simplex with {k} vertices needs m >= {}", k - 1)));
    }
    // Scaled unit vectors in R^k, centered, then written in an orthonormal
    // basis of their span.
    let s = delta / 2f64.sqrt();
    let kf = k as f64;
    let raw: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { s - s / kf } else { -s / kf }).collect())
        .collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in &raw {
        let mut w = v.clone();
        for b in &basis {
            let dot: f64 = w.iter().zip(b).map(|(a, b)| a * b).sum();
            for (x, y) in w.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let nrm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 1e-9 * s && basis.len() < k - 1 {
            basis.push(w.iter().map(|x| x / nrm).collect());
        }
    }
    Ok(raw
        .iter()
        .map(|v| {
            let mut c = vec![0.0; m];
            for (j, b) in basis.iter().enumerate() {
                c[j] = v.iter().zip(b).map(|(a, b)| a * b).sum();
            }
            c
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Certificate,
    Lp,
    Witness,
    /// Certificate, then the LP under the size guard; the witness for the
    /// hexagon layout.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

impl SeedRange {
    pub fn iter(&self) -> impl Iterator<Item = u64> {
        self.start..self.start + self.count
    }
}

fn default_radius() -> f64 {
    1.0
}

fn default_law() -> RadialLaw {
    RadialLaw::UniformBall
}

fn default_eps() -> f64 {
    0.01
}

fn default_guard() -> usize {
    SIZE_GUARD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub layout: Layout,
    pub m: u32,
    /// Base count per ball.
    pub n: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_law")]
    pub law: RadialLaw,
    /// Per-ball weights; all ones when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub seeds: SeedRange,
    pub method: Method,
    /// Rate the campaign is expected to reach; reported, never enforced.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Distance of the witness probe target inside the first ball's boundary.
    #[serde(default = "default_eps")]
    pub witness_eps: f64,
    #[serde(default = "default_guard")]
    pub size_guard: usize,
    /// Record wall-clock times; off keeps the output byte-identical.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(layout: Layout, m: u32, n: usize, seeds: SeedRange, method: Method) -> Self {
        ExperimentConfig {
            layout,
            m,
            n,
            radius: 1.0,
            law: RadialLaw::UniformBall,
            weights: None,
            seeds,
            method,
            threshold: None,
            witness_eps: 0.01,
            size_guard: SIZE_GUARD,
            timing: false,
        }
    }

    pub fn measure(&self) -> MeasureSpec {
        MeasureSpec {
            m: self.m,
            radius: self.radius,
            law: self.law.clone(),
        }
    }

    pub fn balls(&self) -> Result<Vec<BallConfig>> {
        let centers = self.layout.centers(self.m)?;
        let weights = match &self.weights {
            Some(w) if w.len() != centers.len() => {
                return Err(Error::Config("one weight per ball is required".into()));
            }
            Some(w) => w.clone(),
            None => vec![1.0; centers.len()],
        };
        let measure = self.measure();
        centers
            .into_iter()
            .zip(weights)
            .map(|(c, w)| BallConfig::new(c, measure.clone(), w))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.seeds.count == 0 {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.witness_eps > 0.0 && self.witness_eps < 1.0) {
            return Err(Error::Config("witness_eps must lie in (0, 1)".into()));
        }
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config("threshold must lie in [0, 1]".into()));
            }
        }
        if self.method == Method::Witness && self.layout.k() < 2 {
            return Err(Error::Config("the witness needs at least two balls".into()));
        }
        self.balls().map(|_| ())
    }

    fn effective_method(&self) -> Method {
        match (self.method, &self.layout) {
            (Method::Auto, Layout::Hexagon7 { .. }) => Method::Witness,
            (m, _) => m,
        }
    }

    /// Label of the verdict counted as a success.
    pub fn success_label(&self) -> &'static str {
        if self.effective_method() == Method::Witness {
            "proves_failure"
        } else {
            "achieved"
        }
    }
}

/// One row of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub delta: f64,
    pub m: u32,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub verdict: String,
    /// Slack of the deciding test when there is one: smallest certificate
    /// margin, or witness lower minus upper bound.
    pub margin: Option<f64>,
    pub wall_ms: u64,
    pub note: String,
}

/// Runs one trial; failures are recorded in the verdict, never raised.
pub fn run_trial(config: &ExperimentConfig, seed: u64) -> TrialRecord {
    let start = Instant::now();
    let mut rec = TrialRecord {
        delta: config.layout.delta(),
        m: config.m,
        k: config.layout.k(),
        n: config.n,
        seed,
        verdict: String::new(),
        margin: None,
        wall_ms: 0,
        note: String::new(),
    };
    match trial_verdict(config, seed) {
        Ok((v, margin, note)) => {
            rec.verdict = v;
            rec.margin = margin;
            rec.note = note;
        }
        Err(e) => {
            rec.verdict = "error".into();
            rec.note = e.to_string();
        }
    }
    if config.timing {
        rec.wall_ms = start.elapsed().as_millis() as u64;
    }
    rec
}

fn trial_verdict(config: &ExperimentConfig, seed: u64) -> Result<(String, Option<f64>, String)> {
    let balls = config.balls()?;
    let inst = generate(&balls, config.n, seed)?;
    match config.effective_method() {
        Method::Certificate => {
            let gt = ground_truth(&inst)?;
            match certify_with(&inst, &gt, None) {
                Ok(out) => {
                    let v = &out.verdict;
                    let margin = v.cond_b.margin.min(v.cond_c.margin).min(v.cond_d.margin);
                    let verdict = if v.implies == Implication::UniqueOptimum {
                        RecoveryStatus::Achieved
                    } else {
                        RecoveryStatus::Undecided
                    };
                    Ok((verdict.as_str().into(), Some(margin), String::new()))
                }
                Err(e) => Ok((RecoveryStatus::Undecided.as_str().into(), None, e.to_string())),
            }
        }
        Method::Witness => {
            let gt = ground_truth(&inst)?;
            let probe = default_probe(&balls, config.witness_eps);
            let r = witness_with(&inst, &gt, &probe, config.witness_eps)?;
            let verdict = match r.outcome {
                WitnessOutcome::ProvesFailure => "proves_failure",
                WitnessOutcome::Inconclusive => "inconclusive",
            };
            let margin = if r.margin.is_finite() { Some(r.margin) } else { None };
            Ok((verdict.into(), margin, r.reason))
        }
        Method::Lp | Method::Auto => {
            let opts = DecideOptions {
                use_certificate: config.effective_method() == Method::Auto,
                size_guard: config.size_guard,
                ..DecideOptions::default()
            };
            let v = decide_recovery_with(&inst, &opts)?;
            let margin = v.evidence.certificate.as_ref().and_then(|c| {
                (v.evidence.path == crate::lp::DecisionPath::Certificate)
                    .then(|| c.cond_b.margin.min(c.cond_c.margin).min(c.cond_d.margin))
            });
            Ok((v.status.as_str().into(), margin, v.evidence.note))
        }
    }
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub method: Method,
    pub success_label: String,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub wilson: (f64, f64),
    pub threshold: Option<f64>,
    pub meets_threshold: Option<bool>,
    pub records: Vec<TrialRecord>,
}

/// Number of campaign workers: `KMR_THREADS` when set, else all cores.
pub fn worker_count() -> usize {
    std::env::var("KMR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run_parallel<T, F>(seeds: Vec<u64>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Config(format!("cannot start workers: {e}")))?;
    Ok(pool.install(|| seeds.into_par_iter().map(&f).collect()))
}

pub fn summarize(config: &ExperimentConfig, mut records: Vec<TrialRecord>) -> RateSummary {
    records.sort_by_key(|r| r.seed);
    let label = config.success_label();
    let successes = records.iter().filter(|r| r.verdict == label).count();
    let trials = records.len();
    let rate = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
    RateSummary {
        method: config.effective_method(),
        success_label: label.into(),
        trials,
        successes,
        rate,
        wilson: wilson_interval(successes, trials),
        threshold: config.threshold,
        meets_threshold: config.threshold.map(|t| rate >= t),
        records,
    }
}

/// Fraction of seeds with the success verdict of the configured method.
pub fn recovery_rate(config: &ExperimentConfig) -> Result<RateSummary> {
    config.validate()?;
    let records = run_parallel(config.seeds.iter().collect(), |s| run_trial(config, s))?;
    Ok(summarize(config, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub delta: f64,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub wilson: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub success_label: String,
    pub rows: Vec<ScanRow>,
    pub records: Vec<TrialRecord>,
}

/// Recovery rate for each spacing in `grid`, which must be sorted.
pub fn delta_scan(template: &ExperimentConfig, grid: &[f64]) -> Result<ScanResult> {
    if grid.is_empty() {
        return Err(Error::Config("the delta grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Config("the delta grid must be sorted".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut records = Vec::new();
    for &delta in grid {
        let mut config = template.clone();
        config.layout = template.layout.with_delta(delta);
        let s = recovery_rate(&config)?;
        rows.push(ScanRow {
            delta,
            trials: s.trials,
            successes: s.successes,
            rate: s.rate,
            wilson: s.wilson,
        });
        records.extend(s.records);
    }
    Ok(ScanResult {
        success_label: template.success_label().into(),
        rows,
        records,
    })
}

/// Per-trial CSV with columns `delta,m,k,n,seed,verdict,margin,wall_ms`.
pub fn records_csv(records: &[TrialRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["delta", "m", "k", "n", "seed", "verdict", "margin", "wall_ms"])
        .map_err(io)?;
    for r in records {
        w.write_record([
            r.delta.to_string(),
            r.m.to_string(),
            r.k.to_string(),
            r.n.to_string(),
            r.seed.to_string(),
            r.verdict.clone(),
            r.margin.map_or(String::new(), |m| format!("{m:e}")),
            r.wall_ms.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Summary CSV with columns `delta,trials,successes,rate,wilson_lo,wilson_hi`.
pub fn scan_csv(rows: &[ScanRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["delta", "trials", "successes", "rate", "wilson_lo", "wilson_hi"])
        .map_err(io)?;
    for r in rows {
        w.write_record([
            r.delta.to_string(),
            r.trials.to_string(),
            r.successes.to_string(),
            r.rate.to_string(),
            r.wilson.0.to_string(),
            r.wilson.1.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Settings of the hexagonal counterexample campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    pub delta: f64,
    pub n: usize,
    pub seeds: SeedRange,
    /// Boundary layer width of the annulus and the probe offset.
    pub eps: f64,
    pub interior_mass: f64,
    /// Optional LP campaign at a small per-ball count.
    pub lp_n: Option<usize>,
    pub lp_seeds: Option<SeedRange>,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig {
            delta: 2.2,
            n: 3000,
            seeds: SeedRange { start: 0, count: 30 },
            eps: 0.0005,
            interior_mass: 0.001,
            lp_n: None,
            lp_seeds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSummary {
    pub assumption: AssumptionCheck,
    /// The two integral constants of the construction.
    pub constants: (f64, f64),
    pub witness: RateSummary,
    /// LP campaign; its success label is `achieved`, so the failure rate is
    /// `1 − rate`.
    pub lp: Option<RateSummary>,
}

/// Witness campaign on the hexagonal layout with the annulus measure,
/// refused when the mass condition fails for `eps`.
pub fn appendix_b_counterexample(cfg: &CounterexampleConfig) -> Result<CounterexampleSummary> {
    let measure = MeasureSpec::annulus(2, 1.0, cfg.eps, cfg.interior_mass);
    measure.validate()?;
    let assumption = check_counterexample_assumption(&measure, cfg.eps)?;
    if !assumption.satisfied {
        return Err(Error::Config(format!(
            "annulus(eps={}, interior={}) fails the mass condition: lhs {:.6} <= rhs {:.6} (margin {:.6})",
            cfg.eps, cfg.interior_mass, assumption.lhs, assumption.rhs, assumption.margin
        )));
    }
    let constants = appendix_constants(&QuadratureSpec::new(1e-13, 1e-13, 60)?)?;
    let mut base = ExperimentConfig::new(
        Layout::Hexagon7 { delta: cfg.delta },
        2,
        cfg.n,
        cfg.seeds,
        Method::Witness,
    );
    base.law = measure.law.clone();
    base.witness_eps = cfg.eps;
    let witness = recovery_rate(&base)?;
    let lp = match cfg.lp_n {
        Some(n) => {
            let mut c = base.clone();
            c.n = n;
            c.method = Method::Lp;
            c.seeds = cfg.lp_seeds.unwrap_or(cfg.seeds);
            Some(recovery_rate(&c)?)
        }
        None => None,
    };
    Ok(CounterexampleSummary {
        assumption,
        constants,
        witness,
        lp,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub seed: u64,
    pub ground_truth: f64,
    pub alternative: f64,
    pub alternative_better: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSummary {
    pub n1: usize,
    pub n2: usize,
    pub delta: f64,
    pub m: u32,
    pub rate: f64,
    pub wilson: (f64, f64),
    pub records: Vec<OrderRecord>,
}

/// Counts per ball for the unequal-size experiment: `n` and `⌈√n⌉`, or `n`
/// twice for the control.
pub fn order_counts(n: usize, control: bool) -> (usize, usize) {
    if control {
        (n, n)
    } else {
        (n, (n as f64).sqrt().ceil() as usize)
    }
}

/// Compares the ground truth with the clustering whose centers are the
/// first-ball samples nearest to `−e₁/2` and to the first center, every point
/// going to the closer one. Ball sizes are `n1` and `n2`; see [`order_counts`].
pub fn appendix_a_order_mismatch(n1: usize, n2: usize, seeds: SeedRange, delta: f64, m: u32) -> Result<OrderSummary> {
    if n2 == 0 || n1 == 0 {
        return Err(Error::Config("both balls need at least one point".into()));
    }
    if seeds.count == 0 {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let layout = Layout::Pair { delta };
    let measure = MeasureSpec::uniform_ball(m, 1.0);
    let balls: Vec<BallConfig> = layout
        .centers(m)?
        .into_iter()
        .map(|c| BallConfig::new(c, measure.clone(), 1.0))
        .collect::<Result<_>>()?;
    let records = run_parallel(seeds.iter().collect(), |seed| -> Result<OrderRecord> {
        let inst = generate_with_counts(&balls, n1, &[n1, n2], seed)?;
        let gt = ground_truth(&inst)?;
        let alt = alternative_clustering(&inst);
        let alternative = alt.objective(&inst.points);
        Ok(OrderRecord {
            seed,
            ground_truth: gt.objective,
            alternative,
            alternative_better: alternative < gt.objective,
        })
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let better = records.iter().filter(|r| r.alternative_better).count();
    Ok(OrderSummary {
        n1,
        n2,
        delta,
        m,
        rate: better as f64 / records.len() as f64,
        wilson: wilson_interval(better, records.len()),
        records,
    })
}

fn alternative_clustering(inst: &Instance) -> Clustering {
    let first = inst.members(0);
    let pts: Vec<Vec<f64>> = first.iter().map(|&p| inst.points[p].clone()).collect();
    let c = &inst.balls[0].center;
    let mut s = c.clone();
    s[0] -= 0.5 * inst.balls[0].radius;
    let near_s = first[nearest_to(&pts, &s, 1)[0]];
    let near_c = nearest_to(&pts, c, 2)
        .into_iter()
        .map(|i| first[i])
        .find(|&p| p != near_s)
        .unwrap_or(near_s);
    Clustering::nearest(&inst.points, vec![near_s, near_c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::distance;

    #[test]
    fn layouts() {
        let h = Layout::Hexagon7 { delta: 2.2 }.centers(2).unwrap();
        assert_eq!(h.len(), 7);
        assert_eq!(h[0], vec![0.0, 0.0]);
        assert!((h[1][0] - 2.2).abs() < 1e-15 && h[1][1].abs() < 1e-15);
        for c in &h[1..] {
            assert!((distance(c, &h[0]) - 2.2).abs() < 1e-12);
        }
        assert!(h[2][1] < 0.0);
        let s = Layout::Simplex { k: 4, delta: 3.0 }.centers(3).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                assert!((distance(&s[i], &s[j]) - 3.0).abs() < 1e-12);
            }
        }
        assert!(Layout::Simplex { k: 4, delta: 3.0 }.centers(2).is_err());
        assert!(Layout::Hexagon7 { delta: 2.2 }.centers(1).is_err());
    }

    #[test]
    fn wilson_contains_rate() {
        for (s, t) in [(0, 10), (5, 10), (10, 10), (27, 30)] {
            let (lo, hi) = wilson_interval(s, t);
            let p = s as f64 / t as f64;
            assert!(lo <= p && p <= hi);
        }
        let (lo, hi) = wilson_interval(9, 10);
        assert!((lo - 0.5958).abs() < 1e-3 && (hi - 0.9821).abs() < 1e-3);
    }

    #[test]
    fn campaign_is_deterministic() {
        let mut cfg = ExperimentConfig::new(
            Layout::Pair { delta: 3.5 },
            2,
            20,
            SeedRange { start: 0, count: 4 },
            Method::Auto,
        );
        cfg.threshold = Some(0.5);
        let a = recovery_rate(&cfg).unwrap();
        let b = recovery_rate(&cfg).unwrap();
        assert_eq!(records_csv(&a.records).unwrap(), records_csv(&b.records).unwrap());
        assert_eq!(a.records.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert!(records_csv(&a.records).unwrap().starts_with("delta,m,k,n,seed,verdict,margin,wall_ms\n"));
    }

    #[test]
    fn overlapping_balls_never_recover() {
        let cfg = ExperimentConfig::new(
            Layout::Pair { delta: 1.5 },
            2,
            10,
            SeedRange { start: 0, count: 3 },
            Method::Auto,
        );
        let s = recovery_rate(&cfg).unwrap();
        assert_eq!(s.successes, 0);
    }

    #[test]
    fn scan_rejects_unsorted_grid() {
        let cfg = ExperimentConfig::new(
            Layout::Pair { delta: 3.0 },
            2,
            10,
            SeedRange { start: 0, count: 1 },
            Method::Certificate,
        );
        assert!(delta_scan(&cfg, &[3.0, 2.5]).is_err());
        let one = delta_scan(&cfg, &[3.0]).unwrap();
        assert_eq!(one.rows.len(), 1);
    }

    #[test]
    fn counterexample_refuses_failed_assumption() {
        let cfg = CounterexampleConfig {
            eps: 0.01,
            interior_mass: 0.001,
            ..CounterexampleConfig::default()
        };
        match appendix_b_counterexample(&cfg) {
            Err(Error::Config(msg)) => assert!(msg.contains("margin")),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn order_mismatch_rejects_empty_ball() {
        let seeds = SeedRange { start: 0, count: 1 };
        assert!(matches!(appendix_a_order_mismatch(100, 0, seeds, 4.0, 2), Err(Error::Config(_))));
        let s = appendix_a_order_mismatch(50, 50, seeds, 4.0, 2).unwrap();
        assert_eq!(s.records.len(), 1);
    }

    #[test]
    fn order_counts_rule() {
        assert_eq!(order_counts(10_000, false), (10_000, 100));
        assert_eq!(order_counts(10, false), (10, 4));
        assert_eq!(order_counts(50, true), (50, 50));
    }
}
