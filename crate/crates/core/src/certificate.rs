//! Dual certificates for integral k-median solutions, the recipe that builds
//! them for ball instances, and the empirical impossibility witness.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{ground_truth, nearest_to, Clustering, GroundTruthSolution, Instance};
use crate::lp::{LpModel, LpSolution};
use crate::measures::{distance, geometry, stream_rng, BallConfig};
use crate::numerics::QuadratureSpec;

/// Per-point dual values together with the strictness tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub alpha: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    HoldsStrict,
    HoldsWeak,
    Fails,
}

impl Status {
    fn classify(margin: f64, tol: f64) -> Self {
        if margin > tol {
            Status::HoldsStrict
        } else if margin >= -tol {
            Status::HoldsWeak
        } else {
            Status::Fails
        }
    }

    pub fn holds(self) -> bool {
        self != Status::Fails
    }
}

/// One condition: its status and the minimal slack over all instances of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub status: Status,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Implication {
    UniqueOptimum,
    Optimum,
    Nothing,
}

/// Ledger of the four optimality conditions for a clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateVerdict {
    /// Contributions agree at all centers. Strictness is not meaningful; a
    /// holding condition is reported as `holds_weak` when the spread is
    /// within tolerance.
    pub cond_a: ConditionReport,
    /// No non-center beats the first center.
    pub cond_b: ConditionReport,
    /// Every point is covered by its own center.
    pub cond_c: ConditionReport,
    /// No point is covered by a foreign center.
    pub cond_d: ConditionReport,
    pub implies: Implication,
    pub tolerance: f64,
    pub center_contributions: Vec<f64>,
    /// Largest contribution at a non-center and where it is attained.
    pub best_non_center: Option<(usize, f64)>,
}

/// Feasible point of the dual LP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Row-major `beta[p * n + q]`.
    pub beta: Vec<f64>,
    pub omega: f64,
}

impl DualSolution {
    pub fn objective(&self, k: usize) -> f64 {
        self.alpha.iter().sum::<f64>() - k as f64 * self.omega
    }

    /// Replaces `beta` with `(alpha_q − d(p, q))_+`, which keeps the objective
    /// and stays feasible.
    pub fn canonicalized(&self, dist: &[f64]) -> DualSolution {
        let n = self.alpha.len();
        let beta = (0..n * n)
            .map(|i| (self.alpha[i % n] - dist[i]).max(0.0))
            .collect();
        DualSolution {
            alpha: self.alpha.clone(),
            beta,
            omega: self.omega,
        }
    }
}

/// Default strictness tolerance for point sets with the given diameter.
pub fn strict_tolerance(scale: f64) -> f64 {
    1e-9 * (1.0 + scale)
}

/// Evaluates the four conditions for `clustering` under `cert`.
pub fn verify_certificate(
    points: &[Vec<f64>],
    clustering: &Clustering,
    cert: &Certificate,
) -> Result<CertificateVerdict> {
    let n = points.len();
    clustering.validate(n)?;
    if cert.alpha.len() != n {
        return Err(Error::Domain("one alpha per point is required".into()));
    }
    if cert.alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Domain("alpha must be finite".into()));
    }
    let k = clustering.k();
    let alpha = &cert.alpha;
    let mut contrib = vec![0.0; n];
    let mut c_margin = f64::INFINITY;
    let mut d_margin = f64::INFINITY;
    for q in 0..n {
        let mut sum = 0.0;
        for p in 0..n {
            let d = distance(&points[p], &points[q]);
            sum += (alpha[p] - d).max(0.0);
        }
        contrib[q] = sum;
        for (i, &a) in clustering.centers.iter().enumerate() {
            let d = distance(&points[a], &points[q]);
            if clustering.assignment[q] == i {
                c_margin = c_margin.min(alpha[q] - d);
            } else {
                d_margin = d_margin.min(d - alpha[q]);
            }
        }
    }
    let tol = cert.tolerance;
    let centers: Vec<f64> = clustering.centers.iter().map(|&a| contrib[a]).collect();
    let first = centers[0];
    let spread = centers.iter().fold(0.0f64, |m, c| m.max((c - first).abs()));
    let cond_a = ConditionReport {
        status: if spread <= tol { Status::HoldsWeak } else { Status::Fails },
        margin: -spread,
    };
    let mut is_center = vec![false; n];
    for &a in &clustering.centers {
        is_center[a] = true;
    }
    let best_non_center = (0..n)
        .filter(|&q| !is_center[q])
        .map(|q| (q, contrib[q]))
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
    let b_margin = best_non_center.map_or(f64::INFINITY, |(_, c)| first - c);
    let cond_b = ConditionReport {
        status: Status::classify(b_margin, tol),
        margin: b_margin,
    };
    let cond_c = ConditionReport {
        status: Status::classify(c_margin, tol),
        margin: c_margin,
    };
    let cond_d = ConditionReport {
        status: if k == 1 {
            Status::HoldsStrict
        } else {
            Status::classify(d_margin, tol)
        },
        margin: d_margin,
    };
    let all_hold = [cond_a, cond_b, cond_c, cond_d].iter().all(|c| c.status.holds());
    let implies = if all_hold
        && cond_b.status == Status::HoldsStrict
        && cond_d.status == Status::HoldsStrict
    {
        Implication::UniqueOptimum
    } else if all_hold {
        Implication::Optimum
    } else {
        Implication::Nothing
    };
    Ok(CertificateVerdict {
        cond_a,
        cond_b,
        cond_c,
        cond_d,
        implies,
        tolerance: tol,
        center_contributions: centers,
        best_non_center,
    })
}

/// Dual point built from a certificate: `beta = (alpha − d)_+` and `omega`
/// the largest contribution, which equals the center contribution when the
/// certificate holds.
pub fn dual_from_certificate(points: &[Vec<f64>], cert: &Certificate) -> DualSolution {
    let n = points.len();
    let mut beta = vec![0.0; n * n];
    let mut omega = f64::NEG_INFINITY;
    for p in 0..n {
        let mut sum = 0.0;
        for q in 0..n {
            let b = (cert.alpha[q] - distance(&points[p], &points[q])).max(0.0);
            beta[p * n + q] = b;
            sum += b;
        }
        omega = omega.max(sum);
    }
    DualSolution {
        alpha: cert.alpha.clone(),
        beta,
        omega,
    }
}

/// Residuals of primal and dual feasibility and of the three slackness
/// conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlacknessReport {
    pub primal_feasible: bool,
    pub dual_feasible: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `max |beta_pq (y_p − z_pq)|`.
    pub linking: f64,
    /// `max |y_p (Σ_q beta_pq − omega)|`.
    pub cardinality: f64,
    /// `max |z_pq (alpha_q − beta_pq − d(p, q))|`.
    pub assignment: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl SlacknessReport {
    pub fn max_violation(&self) -> f64 {
        self.linking.max(self.cardinality).max(self.assignment)
    }

    /// Both points feasible and every slackness product within `tol`.
    pub fn optimal(&self, tol: f64) -> bool {
        self.primal_feasible && self.dual_feasible && self.max_violation() <= tol
    }
}

pub const FEASIBILITY_TOL: f64 = 1e-8;

pub fn complementary_slackness(
    model: &LpModel,
    primal: &LpSolution,
    dual: &DualSolution,
) -> Result<SlacknessReport> {
    let n = model.n;
    if primal.y.len() != n || primal.z.len() != n * n || dual.alpha.len() != n || dual.beta.len() != n * n
    {
        return Err(Error::Domain("dimension mismatch between model and solutions".into()));
    }
    let d = &model.dist;
    let (y, z) = (&primal.y, &primal.z);
    let mut pres: f64 = (y.iter().sum::<f64>() - model.k as f64).abs();
    for q in 0..n {
        let col: f64 = (0..n).map(|p| z[p * n + q]).sum();
        pres = pres.max((col - 1.0).abs());
    }
    for p in 0..n {
        pres = pres.max(-y[p]);
        for q in 0..n {
            pres = pres.max(z[p * n + q] - y[p]).max(-z[p * n + q]);
        }
    }
    let mut dres: f64 = 0.0;
    for p in 0..n {
        let mut row = 0.0;
        for q in 0..n {
            let b = dual.beta[p * n + q];
            dres = dres.max(-b).max(dual.alpha[q] - b - d[p * n + q]);
            row += b;
        }
        dres = dres.max(row - dual.omega);
    }
    let mut linking: f64 = 0.0;
    let mut cardinality: f64 = 0.0;
    let mut assignment: f64 = 0.0;
    for p in 0..n {
        let row: f64 = (0..n).map(|q| dual.beta[p * n + q]).sum();
        cardinality = cardinality.max((y[p] * (row - dual.omega)).abs());
        for q in 0..n {
            let i = p * n + q;
            linking = linking.max((dual.beta[i] * (y[p] - z[i])).abs());
            assignment = assignment.max((z[i] * (dual.alpha[q] - dual.beta[i] - d[i])).abs());
        }
    }
    let primal_objective = (0..n * n).map(|i| d[i] * z[i]).sum();
    Ok(SlacknessReport {
        primal_feasible: pres <= FEASIBILITY_TOL,
        dual_feasible: dres <= FEASIBILITY_TOL,
        primal_residual: pres,
        dual_residual: dres,
        linking,
        cardinality,
        assignment,
        primal_objective,
        dual_objective: dual.objective(model.k),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipeRule {
    /// Midpoint of the admissible interval.
    Midpoint,
    /// Equal radii, weights and mean distances: `alpha = min(1.29 r, midpoint)`.
    Symmetric,
    /// One-dimensional balls: `gamma = max_i beta_i (2 r_i − E_i)`.
    Line,
    /// Caller-supplied `gamma`.
    Given,
}

/// Per-cluster dual values derived from the ball geometry and the realized
/// medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub gamma: f64,
    /// Open interval of admissible `gamma`.
    pub interval: (f64, f64),
    pub rule: RecipeRule,
    /// Mean distance to the center per ball.
    pub expected: Vec<f64>,
    /// `alpha_i = E_i + gamma / beta_i`.
    pub base_alpha: Vec<f64>,
    /// Empirical correction `OPT_i / n_i − E_i`.
    pub corrections: Vec<f64>,
    /// Values actually used: `(gamma n + OPT_i) / n_i`, which equals
    /// `base_alpha + corrections` when `n_i = beta_i n` exactly.
    pub alpha: Vec<f64>,
}

/// Factor applied to the radius in the symmetric default.
pub const SYMMETRIC_ALPHA: f64 = 1.29;

/// Admissible interval for `gamma` and the mean center distances.
pub fn gamma_interval(balls: &[BallConfig]) -> Result<((f64, f64), Vec<f64>)> {
    let spec = QuadratureSpec::new(1e-12, 1e-12, 60)?;
    let expected = balls
        .iter()
        .map(|b| b.measure.resolve()?.expected_distance(&spec))
        .collect::<Result<Vec<_>>>()?;
    if balls.len() < 2 {
        let lo = balls[0].weight * (balls[0].radius - expected[0]);
        return Ok(((lo, f64::INFINITY), expected));
    }
    let g = geometry(balls);
    let lo = balls
        .iter()
        .zip(&expected)
        .map(|(b, e)| b.weight * (b.radius - e))
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = balls
        .iter()
        .zip(&expected)
        .zip(&g.clearance)
        .map(|((b, e), d)| b.weight * (d - e))
        .fold(f64::INFINITY, f64::min);
    Ok(((lo, hi), expected))
}

/// Chooses `gamma` and the resulting per-cluster values.
pub fn build_recipe(inst: &Instance, gt: &GroundTruthSolution, gamma: Option<f64>) -> Result<Recipe> {
    let balls = &inst.balls;
    let ((lo, hi), expected) = gamma_interval(balls)?;
    if !(lo < hi) {
        return Err(Error::Inapplicable(format!(
            "admissible interval ({lo}, {hi}) is empty"
        )));
    }
    let admissible = |g: f64| lo < g && g < hi;
    let (gamma, rule) = if let Some(g) = gamma {
        if !admissible(g) {
            return Err(Error::Inapplicable(format!(
                "gamma {g} outside the admissible interval ({lo}, {hi})"
            )));
        }
        (g, RecipeRule::Given)
    } else if inst.m == 1
        && admissible(
            balls
                .iter()
                .zip(&expected)
                .map(|(b, e)| b.weight * (2.0 * b.radius - e))
                .fold(f64::NEG_INFINITY, f64::max),
        )
    {
        let g = balls
            .iter()
            .zip(&expected)
            .map(|(b, e)| b.weight * (2.0 * b.radius - e))
            .fold(f64::NEG_INFINITY, f64::max);
        (g, RecipeRule::Line)
    } else if hi.is_finite() && is_symmetric(balls, &expected) {
        let (r, beta, e) = (balls[0].radius, balls[0].weight, expected[0]);
        let (alo, ahi) = (e + lo / beta, e + hi / beta);
        let mid = 0.5 * (alo + ahi);
        let target = SYMMETRIC_ALPHA * r;
        let a = if alo < target && target < ahi {
            target.min(mid)
        } else {
            mid
        };
        (beta * (a - e), RecipeRule::Symmetric)
    } else if hi.is_finite() {
        (0.5 * (lo + hi), RecipeRule::Midpoint)
    } else {
        // A single ball: any gamma above the bound works; take r_1 beyond it.
        (lo + balls[0].weight * balls[0].radius, RecipeRule::Midpoint)
    };
    let n = inst.n as f64;
    let mut base_alpha = Vec::with_capacity(inst.k);
    let mut corrections = Vec::with_capacity(inst.k);
    let mut alpha = Vec::with_capacity(inst.k);
    for (i, b) in balls.iter().enumerate() {
        let c = &gt.clusters[i];
        let ni = c.count as f64;
        base_alpha.push(expected[i] + gamma / b.weight);
        corrections.push(c.opt / ni - expected[i]);
        alpha.push((gamma * n + c.opt) / ni);
    }
    Ok(Recipe {
        gamma,
        interval: (lo, hi),
        rule,
        expected,
        base_alpha,
        corrections,
        alpha,
    })
}

fn is_symmetric(balls: &[BallConfig], expected: &[f64]) -> bool {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    balls.iter().zip(expected).all(|(b, e)| {
        close(b.radius, balls[0].radius) && close(b.weight, balls[0].weight) && close(*e, expected[0])
    })
}

/// Spreads per-cluster values over the points.
pub fn per_point(alpha: &[f64], assignment: &[usize]) -> Vec<f64> {
    assignment.iter().map(|&a| alpha[a]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOutcome {
    pub recipe: Recipe,
    pub certificate: Certificate,
    pub verdict: CertificateVerdict,
}

/// Builds the recipe certificate for the ground truth and verifies it.
pub fn certify_recovery(inst: &Instance, gamma: Option<f64>) -> Result<CertifyOutcome> {
    let gt = ground_truth(inst)?;
    certify_with(inst, &gt, gamma)
}

pub fn certify_with(inst: &Instance, gt: &GroundTruthSolution, gamma: Option<f64>) -> Result<CertifyOutcome> {
    if let Some(c) = gt.clusters.iter().find(|c| c.count < 3) {
        return Err(Error::Inapplicable(format!(
            "cluster with {} points; the median is not almost surely unique below 3",
            c.count
        )));
    }
    let recipe = build_recipe(inst, gt, gamma)?;
    let certificate = Certificate {
        alpha: per_point(&recipe.alpha, &inst.labels),
        tolerance: strict_tolerance(inst.diameter()),
    };
    let verdict = verify_certificate(&inst.points, &gt.clustering, &certificate)?;
    Ok(CertifyOutcome {
        recipe,
        certificate,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessOutcome {
    ProvesFailure,
    Inconclusive,
}

/// Empirical bounds showing that no dual certificate exists for the
/// ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub outcome: WitnessOutcome,
    pub reason: String,
    /// Upper bound on the common center contribution, valid for every
    /// admissible alpha.
    pub upper_bound: f64,
    /// Lower bound on the contribution at the best probe point.
    pub lower_bound: f64,
    /// `lower_bound − upper_bound`.
    pub margin: f64,
    pub probe: Option<usize>,
    /// Largest distance from a median to its ball center.
    pub max_median_offset: f64,
    /// Distance from the probe target to the nearest sample.
    pub probe_distance: f64,
    /// Both of the above are within `eps`.
    pub eps_preconditions: bool,
}

/// Number of data points near the probe target tried as alternative centers.
pub const WITNESS_CANDIDATES: usize = 20;

/// Tries to show that the ground truth is not an LP optimum.
///
/// Any alpha meeting the covering conditions satisfies
/// `d(a_i, q) ≤ alpha_q ≤ min_{j≠i} d(a_j, q)` for `q` in cluster `i`, so the
/// common center contribution is at most
/// `min_i Σ_{q ∈ A_i} (min_{j≠i} d(a_j, q) − d(a_i, q))` while the
/// contribution at a non-center `x` is at least
/// `Σ_q (d(a_{i(q)}, q) − d(x, q))_+`. When the second exceeds the first, no
/// certificate exists and the ground truth is not optimal.
pub fn impossibility_witness(inst: &Instance, target: &[f64], eps: f64) -> Result<WitnessReport> {
    let gt = ground_truth(inst)?;
    witness_with(inst, &gt, target, eps)
}

pub fn witness_with(
    inst: &Instance,
    gt: &GroundTruthSolution,
    target: &[f64],
    eps: f64,
) -> Result<WitnessReport> {
    if inst.k < 2 {
        return Err(Error::Domain("the witness needs at least two clusters".into()));
    }
    let n = inst.len();
    let centers = &gt.clustering.centers;
    let max_median_offset = (0..inst.k)
        .map(|i| distance(&inst.points[centers[i]], &inst.balls[i].center))
        .fold(0.0, f64::max);
    let probe_distance = inst
        .points
        .iter()
        .map(|p| distance(p, target))
        .fold(f64::INFINITY, f64::min);
    let eps_preconditions = max_median_offset <= eps && probe_distance <= eps;
    let mut report = WitnessReport {
        outcome: WitnessOutcome::Inconclusive,
        reason: String::new(),
        upper_bound: f64::NAN,
        lower_bound: f64::NAN,
        margin: f64::NAN,
        probe: None,
        max_median_offset,
        probe_distance,
        eps_preconditions,
    };
    let scale = 1.0 + inst.balls.iter().map(|b| b.radius).fold(0.0, f64::max);
    let tol = 1e-9 * scale * n as f64;
    for c in &gt.clusters {
        if c.count < 3 {
            report.reason = format!("cluster with {} points", c.count);
            return Ok(report);
        }
        if c.median_gap.is_none_or(|g| g <= 1e-9 * scale) {
            report.reason = "median is not unique".into();
            return Ok(report);
        }
    }
    let own: Vec<f64> = (0..n)
        .map(|q| distance(&inst.points[centers[inst.labels[q]]], &inst.points[q]))
        .collect();
    let mut ub = vec![0.0; inst.k];
    for q in 0..n {
        let i = inst.labels[q];
        let foreign = (0..inst.k)
            .filter(|&j| j != i)
            .map(|j| distance(&inst.points[centers[j]], &inst.points[q]))
            .fold(f64::INFINITY, f64::min);
        if foreign < own[q] {
            report.outcome = WitnessOutcome::ProvesFailure;
            report.reason = format!("point {q} is closer to a foreign median than to its own");
            return Ok(report);
        }
        ub[i] += foreign - own[q];
    }
    let upper = ub.iter().copied().fold(f64::INFINITY, f64::min);
    let mut is_center = vec![false; n];
    for &c in centers {
        is_center[c] = true;
    }
    let candidates: Vec<usize> = nearest_to(&inst.points, target, WITNESS_CANDIDATES + inst.k)
        .into_iter()
        .filter(|&c| !is_center[c])
        .take(WITNESS_CANDIDATES)
        .collect();
    let mut lower = f64::NEG_INFINITY;
    let mut probe = None;
    for &c in &candidates {
        let x = &inst.points[c];
        let lb: f64 = (0..n)
            .map(|q| (own[q] - distance(x, &inst.points[q])).max(0.0))
            .sum();
        if lb > lower {
            lower = lb;
            probe = Some(c);
        }
    }
    report.upper_bound = upper;
    report.lower_bound = lower;
    report.margin = lower - upper;
    report.probe = probe;
    if report.margin > tol {
        report.outcome = WitnessOutcome::ProvesFailure;
        report.reason = "probe contribution exceeds every admissible center contribution".into();
    } else {
        report.reason = "lower bound does not exceed the upper bound".into();
    }
    Ok(report)
}

/// Default probe target: just inside the first ball, toward the nearest other
/// center.
pub fn default_probe(balls: &[BallConfig], eps: f64) -> Vec<f64> {
    let c = &balls[0].center;
    let other = balls[1..]
        .iter()
        .min_by(|a, b| distance(&a.center, c).total_cmp(&distance(&b.center, c)))
        .expect("at least two balls");
    let d = distance(&other.center, c);
    c.iter()
        .zip(&other.center)
        .map(|(a, b)| a + (1.0 - eps) * balls[0].radius * (b - a) / d)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryCheck {
    /// Per ball, radius of the neighborhood in which any admissible center
    /// covers exactly its own ball.
    pub tau: Vec<f64>,
    pub samples: usize,
    pub violations: usize,
}

/// For per-ball ranges `[a_i, b_i] ⊂ (r_i, D_i)`, computes the worst-case
/// radius `tau_i = min(a_i − r_i, min_j (D_j − b_j))` and checks on random
/// samples that every point within `tau_i` of `c_i` covers ball `i` entirely
/// and misses all others, for every alpha in the box.
pub fn lemma_geometry_check(
    balls: &[BallConfig],
    boxes: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<GeometryCheck> {
    if boxes.len() != balls.len() {
        return Err(Error::Domain("one range per ball is required".into()));
    }
    let g = geometry(balls);
    for (i, (b, &(lo, hi))) in balls.iter().zip(boxes).enumerate() {
        if !(b.radius < lo && lo <= hi && hi < g.clearance[i]) {
            return Err(Error::Domain(format!("range for ball {i} not inside (r_i, D_i)")));
        }
    }
    let slack = boxes
        .iter()
        .zip(&g.clearance)
        .map(|(&(_, hi), d)| d - hi)
        .fold(f64::INFINITY, f64::min);
    let tau: Vec<f64> = balls
        .iter()
        .zip(boxes)
        .map(|(b, &(lo, _))| (lo - b.radius).min(slack))
        .collect();
    let mut rng = stream_rng(seed, 0);
    let m = balls[0].center.len();
    let mut violations = 0;
    for _ in 0..samples {
        let i = rng.random_range(0..balls.len());
        let dir = crate::measures::random_direction(m, &mut rng);
        let t = tau[i] * rng.random::<f64>();
        let z: Vec<f64> = balls[i].center.iter().zip(&dir).map(|(c, u)| c + t * u).collect();
        for (j, b) in balls.iter().enumerate() {
            let (lo, hi) = boxes[j];
            let a = lo + (hi - lo) * rng.random::<f64>();
            let dz = distance(&z, &b.center);
            let ok = if j == i { dz + b.radius <= a } else { dz > a + b.radius };
            if !ok {
                violations += 1;
            }
        }
    }
    Ok(GeometryCheck {
        tau,
        samples,
        violations,
    })
}
