//! The k-median LP relaxation, its solver and the exact-recovery decision.

mod simplex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::certificate::{
    certify_with, strict_tolerance, verify_certificate, Certificate, CertificateVerdict, DualSolution,
    Implication,
};
use crate::error::{Error, Result};
use crate::instance::{distance_matrix, ground_truth, Clustering, Instance};
use crate::measures::stream_rng;

/// Default largest point count accepted by the solver.
pub const SIZE_GUARD: usize = 250;
/// Largest distance of an entry from an integer for a solution to count as
/// integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Number of perturbed re-solves used to probe uniqueness.
pub const PERTURBATION_PROBES: usize = 5;

/// The relaxation `min Σ d(p,q) z_pq` subject to `Σ_p z_pq = 1`,
/// `z_pq ≤ y_p`, `Σ_p y_p = k` and nonnegativity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpModel {
    pub n: usize,
    pub k: usize,
    /// Row-major distances `dist[p * n + q]`.
    pub dist: Vec<f64>,
}

impl LpModel {
    pub fn build(inst: &Instance) -> Result<Self> {
        Self::from_points(&inst.points, inst.k)
    }

    pub fn from_points(points: &[Vec<f64>], k: usize) -> Result<Self> {
        Self::from_distances(points.len(), k, distance_matrix(points))
    }

    pub fn from_distances(n: usize, k: usize, dist: Vec<f64>) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::Domain(format!("need 1 <= k <= N, got k={k}, N={n}")));
        }
        if dist.len() != n * n {
            return Err(Error::Domain("distance matrix must be N x N".into()));
        }
        for p in 0..n {
            if dist[p * n + p] != 0.0 {
                return Err(Error::Domain("distance matrix must have a zero diagonal".into()));
            }
            for q in 0..p {
                let (a, b) = (dist[p * n + q], dist[q * n + p]);
                if !(a.is_finite() && a >= 0.0) || a != b {
                    return Err(Error::Domain("distances must be finite, nonnegative and symmetric".into()));
                }
            }
        }
        Ok(LpModel { n, k, dist })
    }

    /// `y` and `z` variables.
    pub fn num_variables(&self) -> usize {
        self.n * self.n + self.n
    }

    /// Assignment, linking and cardinality rows.
    pub fn num_constraints(&self) -> usize {
        self.n + self.n * self.n + 1
    }

    pub fn max_distance(&self) -> f64 {
        self.dist.iter().fold(0.0, |m: f64, &d| m.max(d))
    }

    /// Objective of `z`.
    pub fn objective(&self, z: &[f64]) -> f64 {
        self.dist.iter().zip(z).map(|(d, z)| d * z).sum()
    }

    /// Incidence vector `(y, z)` of an integral clustering.
    pub fn incidence(&self, clustering: &Clustering) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; n * n];
        for &c in &clustering.centers {
            y[c] = 1.0;
        }
        for (q, &a) in clustering.assignment.iter().enumerate() {
            z[clustering.centers[a] * n + q] = 1.0;
        }
        (y, z)
    }

    /// Largest violation of the primal constraints.
    pub fn primal_residual(&self, y: &[f64], z: &[f64]) -> f64 {
        let n = self.n;
        let mut r: f64 = (y.iter().sum::<f64>() - self.k as f64).abs();
        for q in 0..n {
            let col: f64 = (0..n).map(|p| z[p * n + q]).sum();
            r = r.max((col - 1.0).abs());
        }
        for p in 0..n {
            r = r.max(-y[p]);
            for q in 0..n {
                r = r.max(z[p * n + q] - y[p]).max(-z[p * n + q]);
            }
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    InfeasibleInternalError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub n: usize,
    pub y: Vec<f64>,
    /// Row-major `z[p * n + q]`.
    pub z: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl LpSolution {
    /// Largest distance of an entry from the nearest integer.
    pub fn fractionality(&self) -> f64 {
        self.y
            .iter()
            .chain(&self.z)
            .fold(0.0, |m: f64, v| m.max((v - v.round()).abs()))
    }

    pub fn is_integral(&self) -> bool {
        self.fractionality() <= INTEGRALITY_TOL
    }

    /// Centers `y_p > 1/2` and the per-column argmax assignment. `None` when
    /// some column has a tie for its largest entry or its argmax is not a
    /// center.
    pub fn partition(&self) -> Option<Clustering> {
        let n = self.n;
        let centers: Vec<usize> = (0..n).filter(|&p| self.y[p] > 0.5).collect();
        let mut pos = vec![usize::MAX; n];
        for (i, &c) in centers.iter().enumerate() {
            pos[c] = i;
        }
        let mut assignment = Vec::with_capacity(n);
        for q in 0..n {
            let mut best = 0;
            for p in 1..n {
                if self.z[p * n + q] > self.z[best * n + q] {
                    best = p;
                }
            }
            let top = self.z[best * n + q];
            if (0..n).any(|p| p != best && top - self.z[p * n + q] <= INTEGRALITY_TOL) {
                return None;
            }
            if pos[best] == usize::MAX {
                return None;
            }
            assignment.push(pos[best]);
        }
        Some(Clustering {
            centers,
            assignment,
        })
    }

    fn same_vertex(&self, other: &LpSolution) -> bool {
        self.y
            .iter()
            .chain(&self.z)
            .zip(other.y.iter().chain(&other.z))
            .all(|(a, b)| (a - b).abs() <= INTEGRALITY_TOL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub size_guard: usize,
    /// Cost of `z_pq` in place of the distances.
    pub cost: Option<Vec<f64>>,
    /// Integral solution to start from; a greedy clustering otherwise.
    pub start: Option<Clustering>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            size_guard: SIZE_GUARD,
            cost: None,
            start: None,
        }
    }
}

/// Solves the relaxation with default options.
pub fn solve(model: &LpModel) -> Result<(LpSolution, DualSolution)> {
    solve_with(model, &SolveOptions::default())
}

pub fn solve_with(model: &LpModel, opts: &SolveOptions) -> Result<(LpSolution, DualSolution)> {
    let n = model.n;
    if n > opts.size_guard {
        return Err(Error::SizeGuard(format!(
            "{n} points exceed the LP size guard of {}",
            opts.size_guard
        )));
    }
    let cost = match &opts.cost {
        Some(c) if c.len() != n * n => return Err(Error::Domain("cost vector must have N² entries".into())),
        Some(c) => c.as_slice(),
        None => model.dist.as_slice(),
    };
    let start = match &opts.start {
        Some(c) => {
            c.validate(n)?;
            if c.k() != model.k {
                return Err(Error::Domain("starting clustering has the wrong k".into()));
            }
            c.clone()
        }
        None => greedy_clustering(n, model.k, &model.dist),
    };
    let basis = simplex::Basis::from_clustering(n, &start.centers, &start.assignment, cost)?;
    let out = simplex::run(n, model.k, cost, basis, &simplex::Settings::default())?;
    let clean = |v: f64| if v.abs() < 1e-13 { 0.0 } else { v };
    let y: Vec<f64> = out.x.y.iter().map(|&v| clean(v)).collect();
    let z: Vec<f64> = out.x.z.iter().map(|&v| clean(v)).collect();
    let status = if model.primal_residual(&y, &z) <= 1e-8 {
        SolveStatus::Optimal
    } else {
        SolveStatus::InfeasibleInternalError
    };
    let objective = model.objective(&z);
    let dual = DualSolution {
        alpha: out.duals.a,
        beta: out.duals.l.iter().map(|&b| b.max(0.0)).collect(),
        omega: -out.duals.k,
    };
    Ok((
        LpSolution {
            n,
            y,
            z,
            objective,
            status,
            iterations: out.iterations,
        },
        dual,
    ))
}

/// Greedy center addition followed by alternating reassignment and median
/// updates.
fn greedy_clustering(n: usize, k: usize, d: &[f64]) -> Clustering {
    let mut centers: Vec<usize> = Vec::with_capacity(k);
    let mut near = vec![f64::INFINITY; n];
    for _ in 0..k {
        let mut best = (usize::MAX, f64::INFINITY);
        for c in 0..n {
            if centers.contains(&c) {
                continue;
            }
            let total: f64 = (0..n).map(|q| near[q].min(d[c * n + q])).sum();
            if total < best.1 {
                best = (c, total);
            }
        }
        centers.push(best.0);
        for q in 0..n {
            near[q] = near[q].min(d[best.0 * n + q]);
        }
    }
    let assign = |centers: &[usize]| -> Vec<usize> {
        (0..n)
            .map(|q| {
                if let Some(i) = centers.iter().position(|&c| c == q) {
                    return i;
                }
                let mut best = 0;
                for (i, &c) in centers.iter().enumerate() {
                    if d[c * n + q] < d[centers[best] * n + q] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    };
    let cost = |centers: &[usize], a: &[usize]| -> f64 { (0..n).map(|q| d[centers[a[q]] * n + q]).sum() };
    let mut assignment = assign(&centers);
    let mut current = cost(&centers, &assignment);
    for _ in 0..20 {
        let mut next = centers.clone();
        for (i, c) in next.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&q| assignment[q] == i).collect();
            let mut best = (*c, members.iter().map(|&q| d[*c * n + q]).sum::<f64>());
            for &p in &members {
                let t: f64 = members.iter().map(|&q| d[p * n + q]).sum();
                if t < best.1 {
                    best = (p, t);
                }
            }
            *c = best.0;
        }
        let a = assign(&next);
        let c = cost(&next, &a);
        if c < current - 1e-12 {
            centers = next;
            assignment = a;
            current = c;
        } else {
            break;
        }
    }
    Clustering {
        centers,
        assignment,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryStatus {
    Achieved,
    FailedFractional,
    FailedWrongPartition,
    FailedNonunique,
    Undecided,
}

impl RecoveryStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecoveryStatus::Achieved => "achieved",
            RecoveryStatus::FailedFractional => "failed_fractional",
            RecoveryStatus::FailedWrongPartition => "failed_wrong_partition",
            RecoveryStatus::FailedNonunique => "failed_nonunique",
            RecoveryStatus::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionPath {
    Certificate,
    Lp,
    None,
}

/// How uniqueness of an integral optimum was settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Uniqueness {
    /// A strict certificate exists.
    Proven,
    /// Every perturbed re-solve returned the same vertex.
    Accepted,
    /// A perturbed re-solve found another optimal vertex.
    Rejected,
    /// A perturbed re-solve moved to a vertex that is not optimal for the
    /// unperturbed costs.
    Unclear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryEvidence {
    pub path: DecisionPath,
    pub certificate: Option<CertificateVerdict>,
    pub lp_objective: Option<f64>,
    pub ground_truth_objective: Option<f64>,
    pub fractionality: Option<f64>,
    pub uniqueness: Option<Uniqueness>,
    pub probes: usize,
    pub iterations: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryVerdict {
    pub status: RecoveryStatus,
    pub evidence: RecoveryEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecideOptions {
    /// Try the recipe certificate before solving.
    pub use_certificate: bool,
    /// Solve the LP when the certificate is inconclusive.
    pub use_lp: bool,
    pub size_guard: usize,
    pub probes: usize,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions {
            use_certificate: true,
            use_lp: true,
            size_guard: SIZE_GUARD,
            probes: PERTURBATION_PROBES,
        }
    }
}

/// Decides exact recovery of the generating partition with default options.
pub fn decide_recovery(inst: &Instance) -> Result<RecoveryVerdict> {
    decide_recovery_with(inst, &DecideOptions::default())
}

/// Certificate first, then the LP with integrality, partition and
/// uniqueness checks. Unavailable paths give `undecided`.
pub fn decide_recovery_with(inst: &Instance, opts: &DecideOptions) -> Result<RecoveryVerdict> {
    inst.validate()?;
    let gt = ground_truth(inst)?;
    let mut evidence = RecoveryEvidence {
        path: DecisionPath::None,
        certificate: None,
        lp_objective: None,
        ground_truth_objective: Some(gt.objective),
        fractionality: None,
        uniqueness: None,
        probes: 0,
        iterations: 0,
        note: String::new(),
    };
    let mut notes = Vec::new();
    if opts.use_certificate {
        match certify_with(inst, &gt, None) {
            Ok(out) => {
                let proven = out.verdict.implies == Implication::UniqueOptimum;
                evidence.certificate = Some(out.verdict);
                if proven {
                    evidence.path = DecisionPath::Certificate;
                    evidence.uniqueness = Some(Uniqueness::Proven);
                    return Ok(RecoveryVerdict {
                        status: RecoveryStatus::Achieved,
                        evidence,
                    });
                }
                notes.push("recipe certificate inconclusive".to_string());
            }
            Err(e) => notes.push(format!("certificate unavailable: {e}")),
        }
    }
    let undecided = |mut evidence: RecoveryEvidence, notes: Vec<String>| {
        evidence.note = notes.join("; ");
        Ok(RecoveryVerdict {
            status: RecoveryStatus::Undecided,
            evidence,
        })
    };
    if !opts.use_lp {
        return undecided(evidence, notes);
    }
    if inst.len() > opts.size_guard {
        notes.push(format!("{} points exceed the LP size guard of {}", inst.len(), opts.size_guard));
        return undecided(evidence, notes);
    }
    let model = LpModel::build(inst)?;
    let solve_opts = SolveOptions {
        size_guard: opts.size_guard,
        cost: None,
        start: Some(gt.clustering.clone()),
    };
    let (sol, dual) = match solve_with(&model, &solve_opts) {
        Ok(r) => r,
        Err(e) => {
            notes.push(format!("LP solve failed: {e}"));
            return undecided(evidence, notes);
        }
    };
    evidence.path = DecisionPath::Lp;
    evidence.lp_objective = Some(sol.objective);
    evidence.iterations = sol.iterations;
    evidence.fractionality = Some(sol.fractionality());
    let finish = |status, mut evidence: RecoveryEvidence, notes: Vec<String>| {
        evidence.note = notes.join("; ");
        Ok(RecoveryVerdict { status, evidence })
    };
    if sol.status != SolveStatus::Optimal {
        notes.push("solver returned an infeasible point".into());
        return undecided(evidence, notes);
    }
    if !sol.is_integral() {
        return finish(RecoveryStatus::FailedFractional, evidence, notes);
    }
    let Some(found) = sol.partition() else {
        notes.push("tie in the assignment of some point".into());
        return finish(RecoveryStatus::FailedNonunique, evidence, notes);
    };
    if !found.same_partition(&inst.labels) {
        return finish(RecoveryStatus::FailedWrongPartition, evidence, notes);
    }
    let cert = Certificate {
        alpha: dual.alpha.clone(),
        tolerance: strict_tolerance(inst.diameter()),
    };
    if let Ok(v) = verify_certificate(&inst.points, &found, &cert) {
        if v.implies == Implication::UniqueOptimum {
            evidence.uniqueness = Some(Uniqueness::Proven);
            return finish(RecoveryStatus::Achieved, evidence, notes);
        }
    }
    let uniqueness = probe_uniqueness(&model, &sol, &found, inst.seed, opts.probes);
    evidence.probes = opts.probes;
    match uniqueness {
        Ok(u) => {
            evidence.uniqueness = Some(u);
            let status = match u {
                Uniqueness::Proven | Uniqueness::Accepted => RecoveryStatus::Achieved,
                Uniqueness::Rejected => RecoveryStatus::FailedNonunique,
                Uniqueness::Unclear => RecoveryStatus::Undecided,
            };
            finish(status, evidence, notes)
        }
        Err(e) => {
            notes.push(format!("perturbation probe failed: {e}"));
            undecided(evidence, notes)
        }
    }
}

/// Re-solves with costs `d + scale · U(0, 1)` at `scale = 1e-9 · max d`.
pub fn probe_uniqueness(
    model: &LpModel,
    sol: &LpSolution,
    start: &Clustering,
    seed: u64,
    probes: usize,
) -> Result<Uniqueness> {
    let scale = 1e-9 * model.max_distance();
    let mut rng = stream_rng(seed, 0x5eed_0001);
    let gap_tol = 1e-7 * (1.0 + sol.objective.abs());
    for _ in 0..probes {
        let cost: Vec<f64> = model.dist.iter().map(|&d| d + scale * rng.random::<f64>()).collect();
        let opts = SolveOptions {
            size_guard: usize::MAX,
            cost: Some(cost),
            start: Some(start.clone()),
        };
        let (other, _) = solve_with(model, &opts)?;
        if !other.same_vertex(sol) {
            return Ok(if (other.objective - sol.objective).abs() <= gap_tol {
                Uniqueness::Rejected
            } else {
                Uniqueness::Unclear
            });
        }
    }
    Ok(Uniqueness::Accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::complementary_slackness;
    use crate::instance::brute_force_ip;

    fn line(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn counts_variables_and_constraints() {
        let m = LpModel::from_points(&line(&[0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(m.num_variables(), 12);
        assert_eq!(m.num_constraints(), 13);
        assert!(LpModel::from_points(&line(&[0.0]), 2).is_err());
    }

    #[test]
    fn collinear_optimum() {
        let m = LpModel::from_points(&line(&[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]), 2).unwrap();
        let (sol, dual) = solve(&m).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 4.0).abs() < 1e-9, "{}", sol.objective);
        assert!(sol.is_integral());
        let report = complementary_slackness(&m, &sol, &dual).unwrap();
        assert!(report.optimal(1e-8), "{report:?}");
        assert!((dual.objective(2) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn all_centers_and_pair() {
        let m = LpModel::from_points(&line(&[0.0, 5.0]), 2).unwrap();
        let (sol, _) = solve(&m).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.y, vec![1.0, 1.0]);
        assert_eq!(sol.z, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn cycle_metric() {
        // Five points on a cycle with k = 2: both the integral optimum and the
        // uniform fractional point cost 3.
        let n = 5;
        let mut dist = vec![0.0; n * n];
        for p in 0..n {
            for q in 0..n {
                let k = (p as i64 - q as i64).rem_euclid(n as i64);
                dist[p * n + q] = k.min(n as i64 - k) as f64;
            }
        }
        let m = LpModel::from_distances(n, 2, dist).unwrap();
        let (sol, dual) = solve(&m).unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!((sol.objective - dual.objective(2)).abs() < 1e-9);
    }

    #[test]
    fn matches_brute_force_on_random_sets() {
        let mut rng = stream_rng(7, 0);
        for trial in 0..20 {
            let n = 4 + trial % 6;
            let k = 1 + trial % 3;
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random::<f64>() * 4.0, rng.random::<f64>() * 4.0])
                .collect();
            let m = LpModel::from_points(&pts, k).unwrap();
            let (sol, dual) = solve(&m).unwrap();
            let ip = brute_force_ip(&pts, k).unwrap();
            assert!(sol.objective <= ip.objective + 1e-9);
            assert!((sol.objective - dual.objective(k)).abs() <= 1e-7 * (1.0 + sol.objective));
            if sol.is_integral() {
                assert!((sol.objective - ip.objective).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn deterministic() {
        let pts = line(&[0.0, 0.4, 1.7, 3.0, 3.3, 8.0, 8.1]);
        let m = LpModel::from_points(&pts, 3).unwrap();
        let a = solve(&m).unwrap();
        let b = solve(&m).unwrap();
        assert_eq!(a, b);
    }
}
