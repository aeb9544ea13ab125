//! Instances drawn from balls, medians, ground-truth clusterings and an
//! exhaustive integer-program oracle for tiny point sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{distance, norm, stream_rng, BallConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub m: u32,
    pub k: usize,
    /// Base count; ball `i` holds `round(weight_i * n)` points.
    pub n: usize,
    pub seed: u64,
    pub balls: Vec<BallConfig>,
    /// Realized per-ball counts.
    pub counts: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

/// `k` centers (point indices) and, for every point, the position of its
/// center in `centers`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub centers: Vec<usize>,
    pub assignment: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Median {
    /// Index into the slice passed to [`median_of`].
    pub index: usize,
    /// Minimal sum of distances.
    pub total: f64,
    /// Second smallest sum, `None` for a single point.
    pub runner_up: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub median: usize,
    pub opt: f64,
    pub count: usize,
    /// Gap between the two smallest distance sums.
    pub median_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSolution {
    pub clustering: Clustering,
    pub objective: f64,
    pub clusters: Vec<ClusterSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub clustering: Clustering,
    pub objective: f64,
    /// Best objective over all other center sets, if there is one.
    pub second_best: Option<f64>,
    pub unique: bool,
}

/// Default upper bound on `C(n, k) · n · k` for [`brute_force_ip`].
pub const BRUTE_FORCE_GUARD: f64 = 1e7;

/// `round(weight * n)` with halves rounded up.
pub fn realized_count(weight: f64, n: usize) -> usize {
    (weight * n as f64 + 0.5).floor() as usize
}

/// Draws an instance with `round(weight_i * n)` points per ball.
pub fn generate(balls: &[BallConfig], n: usize, seed: u64) -> Result<Instance> {
    if n < 1 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let counts: Vec<usize> = balls.iter().map(|b| realized_count(b.weight, n)).collect();
    generate_with_counts(balls, n, &counts, seed)
}

/// Draws an instance with explicit per-ball counts. Ball `i` uses stream `i`
/// of `seed`.
pub fn generate_with_counts(
    balls: &[BallConfig],
    n: usize,
    counts: &[usize],
    seed: u64,
) -> Result<Instance> {
    if balls.is_empty() {
        return Err(Error::Config("at least one ball is required".into()));
    }
    if counts.len() != balls.len() {
        return Err(Error::Config("one count per ball is required".into()));
    }
    let m = balls[0].measure.m;
    for b in balls {
        b.validate()?;
        if b.measure.m != m {
            return Err(Error::Config("balls have different dimensions".into()));
        }
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::Config("every ball needs at least one point".into()));
    }
    let mut points = Vec::with_capacity(counts.iter().sum());
    let mut labels = Vec::with_capacity(points.capacity());
    for (i, (b, &c)) in balls.iter().zip(counts).enumerate() {
        let dist = b.measure.resolve()?;
        let mut rng = stream_rng(seed, i as u64);
        for _ in 0..c {
            let x = dist.sample(&mut rng);
            let p: Vec<f64> = x.iter().zip(&b.center).map(|(x, c)| x + c).collect();
            points.push(p);
            labels.push(i);
        }
    }
    let inst = Instance {
        m,
        k: balls.len(),
        n,
        seed,
        balls: balls.to_vec(),
        counts: counts.to_vec(),
        points,
        labels,
    };
    inst.validate()?;
    Ok(inst)
}

impl Instance {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k != self.balls.len() || self.counts.len() != self.k {
            return Err(Error::Config("k must equal the number of balls".into()));
        }
        if self.points.len() != self.labels.len() {
            return Err(Error::Config("one label per point is required".into()));
        }
        if self.counts.iter().sum::<usize>() != self.points.len() {
            return Err(Error::Config("counts do not add up to the point count".into()));
        }
        for (i, c) in self.counts.iter().enumerate() {
            if self.labels.iter().filter(|&&l| l == i).count() != *c {
                return Err(Error::Config(format!("label count mismatch for ball {i}")));
            }
        }
        for (p, &l) in self.points.iter().zip(&self.labels) {
            let b = self
                .balls
                .get(l)
                .ok_or_else(|| Error::Config(format!("label {l} out of range")))?;
            if p.len() != self.m as usize {
                return Err(Error::Config("point has wrong dimension".into()));
            }
            if distance(p, &b.center) > b.radius + 1e-12 {
                return Err(Error::Config(format!("point outside ball {l}")));
            }
        }
        Ok(())
    }

    /// Indices of the points drawn from ball `i`.
    pub fn members(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.labels[p] == i).collect()
    }

    /// Largest pairwise distance between points.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                d = d.max(distance(&self.points[i], &self.points[j]));
            }
        }
        d
    }
}

/// Row-major matrix of pairwise distances.
pub fn distance_matrix(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = distance(&points[i], &points[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Member of `points` minimizing the sum of distances to all points, lowest
/// index on ties.
pub fn median_of(points: &[&[f64]]) -> Result<Median> {
    if points.is_empty() {
        return Err(Error::Domain("median of an empty set".into()));
    }
    let n = points.len();
    let mut sums = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(points[i], points[j]);
            sums[i] += d;
            sums[j] += d;
        }
    }
    let mut best = 0;
    for i in 1..n {
        if sums[i] < sums[best] {
            best = i;
        }
    }
    let runner_up = (0..n)
        .filter(|&i| i != best)
        .map(|i| sums[i])
        .min_by(f64::total_cmp);
    Ok(Median {
        index: best,
        total: sums[best],
        runner_up,
    })
}

/// Ground-truth clustering with per-ball medians as centers.
pub fn ground_truth(inst: &Instance) -> Result<GroundTruthSolution> {
    let mut centers = Vec::with_capacity(inst.k);
    let mut clusters = Vec::with_capacity(inst.k);
    for i in 0..inst.k {
        let members = inst.members(i);
        let pts: Vec<&[f64]> = members.iter().map(|&p| inst.points[p].as_slice()).collect();
        let med = median_of(&pts)?;
        centers.push(members[med.index]);
        clusters.push(ClusterSummary {
            median: members[med.index],
            opt: med.total,
            count: members.len(),
            median_gap: med.runner_up.map(|r| r - med.total),
        });
    }
    let objective = clusters.iter().map(|c| c.opt).sum();
    Ok(GroundTruthSolution {
        clustering: Clustering {
            centers,
            assignment: inst.labels.clone(),
        },
        objective,
        clusters,
    })
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Checks that this is a feasible integral solution on `n` points.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.assignment.len() != n {
            return Err(Error::Infeasible("assignment must cover every point".into()));
        }
        let mut seen = vec![false; n];
        for (i, &c) in self.centers.iter().enumerate() {
            if c >= n || seen[c] {
                return Err(Error::Infeasible("centers must be distinct points".into()));
            }
            seen[c] = true;
            if self.assignment[c] != i {
                return Err(Error::Infeasible(format!("center {c} not assigned to itself")));
            }
        }
        if self.assignment.iter().any(|&a| a >= self.centers.len()) {
            return Err(Error::Infeasible("assignment to unknown cluster".into()));
        }
        Ok(())
    }

    pub fn objective(&self, points: &[Vec<f64>]) -> f64 {
        self.assignment
            .iter()
            .enumerate()
            .map(|(q, &a)| distance(&points[self.centers[a]], &points[q]))
            .sum()
    }

    /// Same partition of the points, regardless of cluster order and centers.
    pub fn same_partition(&self, labels: &[usize]) -> bool {
        if labels.len() != self.assignment.len() {
            return false;
        }
        let mut map = std::collections::HashMap::new();
        let mut back = std::collections::HashMap::new();
        for (&a, &l) in self.assignment.iter().zip(labels) {
            if *map.entry(a).or_insert(l) != l || *back.entry(l).or_insert(a) != a {
                return false;
            }
        }
        true
    }

    /// Nearest-center assignment with lowest-index tie-break.
    pub fn nearest(points: &[Vec<f64>], centers: Vec<usize>) -> Self {
        let assignment = (0..points.len())
            .map(|q| {
                if let Some(i) = centers.iter().position(|&c| c == q) {
                    return i;
                }
                let mut best = 0;
                let mut bd = f64::INFINITY;
                for (i, &c) in centers.iter().enumerate() {
                    let d = distance(&points[c], &points[q]);
                    if d < bd {
                        bd = d;
                        best = i;
                    }
                }
                best
            })
            .collect();
        Clustering {
            centers,
            assignment,
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Optimal k-median clustering by enumerating every center set.
pub fn brute_force_ip(points: &[Vec<f64>], k: usize) -> Result<BruteForceResult> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    let work = binomial(n, k) * n as f64 * k as f64;
    if work > BRUTE_FORCE_GUARD {
        return Err(Error::SizeGuard(format!(
            "C({n},{k})·n·k = {work:.3e} exceeds {BRUTE_FORCE_GUARD:e}"
        )));
    }
    let d = distance_matrix(points);
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut second: Option<f64> = None;
    loop {
        let obj: f64 = (0..n)
            .map(|q| {
                combo
                    .iter()
                    .map(|&c| d[c * n + q])
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        match &best {
            Some((b, _)) if obj >= *b => {
                if second.is_none_or(|s| obj < s) {
                    second = Some(obj);
                }
            }
            _ => {
                if let Some((b, _)) = &best {
                    second = Some(*b);
                }
                best = Some((obj, combo.clone()));
            }
        }
        // Next combination in lexicographic order.
        let mut i = k;
        while i > 0 && combo[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        combo[i - 1] += 1;
        for j in i..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
    let (objective, centers) = best.expect("at least one center set");
    let scale = 1.0 + objective.abs();
    Ok(BruteForceResult {
        clustering: Clustering::nearest(points, centers),
        objective,
        second_best: second,
        unique: second.is_none_or(|s| s - objective > 1e-9 * scale),
    })
}

/// Indices of `points` sorted by distance to `target`, closest first.
pub fn nearest_to(points: &[Vec<f64>], target: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        distance(&points[a], target)
            .total_cmp(&distance(&points[b], target))
            .then(a.cmp(&b))
    });
    idx.truncate(count);
    idx
}

/// Distance from the median of ball `i` to the ball center.
pub fn median_offset(inst: &Instance, gt: &GroundTruthSolution, i: usize) -> f64 {
    let c = &inst.balls[i].center;
    let p = &inst.points[gt.clustering.centers[i]];
    norm(&p.iter().zip(c).map(|(a, b)| a - b).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MeasureSpec;

    fn line(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn median_examples() {
        let a = [0.0, 0.0];
        let m = median_of(&[&a]).unwrap();
        assert_eq!((m.index, m.total), (0, 0.0));
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let m = median_of(&refs).unwrap();
        assert_eq!(m.index, 0);
        assert!((m.total - 2.0).abs() < 1e-15);
        assert!((m.runner_up.unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-15);
        assert!(median_of(&[]).is_err());
    }

    #[test]
    fn median_ties_pick_lowest_index() {
        let pts = line(&[0.0, 1.0]);
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        assert_eq!(median_of(&refs).unwrap().index, 0);
    }

    #[test]
    fn brute_force_collinear() {
        let pts = line(&[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        let r = brute_force_ip(&pts, 2).unwrap();
        assert_eq!(r.clustering.centers, vec![1, 4]);
        assert_eq!(r.objective, 4.0);
        assert!(r.unique);
        let r = brute_force_ip(&pts, 6).unwrap();
        assert_eq!(r.objective, 0.0);
        assert!(brute_force_ip(&pts, 7).is_err());
    }

    #[test]
    fn brute_force_guard() {
        let pts: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64]).collect();
        assert!(matches!(brute_force_ip(&pts, 5), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn generate_counts_and_determinism() {
        let m = MeasureSpec::uniform_ball(2, 1.0);
        let balls = vec![
            BallConfig::new(vec![0.0, 0.0], m.clone(), 1.0).unwrap(),
            BallConfig::new(vec![3.5, 0.0], m, 2.0).unwrap(),
        ];
        let a = generate(&balls, 10, 7).unwrap();
        assert_eq!(a.counts, vec![10, 20]);
        assert_eq!(a.len(), 30);
        let b = generate(&balls, 10, 7).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = generate(&balls, 10, 8).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn point_mass_instance() {
        let m = MeasureSpec::point_mass(2, 1.0);
        let balls = vec![BallConfig::new(vec![1.0, 2.0], m, 1.0).unwrap()];
        let inst = generate(&balls, 5, 0).unwrap();
        assert!(inst.points.iter().all(|p| p == &vec![1.0, 2.0]));
        let gt = ground_truth(&inst).unwrap();
        assert_eq!(gt.objective, 0.0);
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(realized_count(1.5, 1), 2);
        assert_eq!(realized_count(1.25, 2), 3);
        assert_eq!(realized_count(1.0, 7), 7);
    }

    #[test]
    fn clustering_validation() {
        let c = Clustering {
            centers: vec![0, 2],
            assignment: vec![0, 0, 1],
        };
        assert!(c.validate(3).is_ok());
        let bad = Clustering {
            centers: vec![0, 2],
            assignment: vec![0, 0, 0],
        };
        assert!(bad.validate(3).is_err());
        assert!(c.same_partition(&[5, 5, 3]));
        assert!(!c.same_partition(&[5, 3, 3]));
    }
}
