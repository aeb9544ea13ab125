//! Contribution functions and their expectations over rotation-invariant
//! balls.
//!
//! Every ball integral is reduced to an integral over the radius `s` of the
//! sphere a point lies on and the angle `θ` between that point and the
//! direction of the query point, both one-dimensional.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::instance::Instance;
use crate::measures::{distance, norm, random_direction, BallConfig, MeasureSpec, RadialDistribution};
use crate::numerics::{integrate, AngleDensity, QuadratureSpec};

/// Per-cluster dual values.
pub type AlphaVector = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfnParams {
    pub r: f64,
    pub alpha: f64,
    pub m: u32,
}

impl TfnParams {
    pub fn new(r: f64, alpha: f64, m: u32) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return domain(format!("radius {r} must be positive"));
        }
        if !(alpha > r && alpha.is_finite()) {
            return domain(format!("alpha {alpha} must exceed the radius {r}"));
        }
        if m < 1 {
            return domain("dimension must be at least 1");
        }
        Ok(TfnParams { r, alpha, m })
    }
}

/// Law of the angle between a uniform point of a sphere and a fixed axis.
#[derive(Debug, Clone, Copy)]
enum Angles {
    /// `m = 1`: the angle is 0 or π with probability one half each.
    Line,
    Density(AngleDensity),
}

impl Angles {
    fn new(m: u32) -> Result<Self> {
        if m == 1 {
            Ok(Angles::Line)
        } else {
            Ok(Angles::Density(AngleDensity::new(m)?))
        }
    }
}

/// Distance between points at radii `s` and `rho` separated by angle `theta`.
#[inline]
fn chord(s: f64, rho: f64, theta: f64) -> f64 {
    let h = (0.5 * theta).sin();
    ((s - rho) * (s - rho) + 4.0 * s * rho * h * h).sqrt()
}

/// Angle at which the chord between radii `s` and `rho` reaches `alpha`.
fn cut_angle(s: f64, rho: f64, alpha: f64) -> f64 {
    let c = (s * s + rho * rho - alpha * alpha) / (2.0 * s * rho);
    c.clamp(-1.0, 1.0).acos()
}

/// `∫ (alpha − d(z, x))_+ dμ^s(x)` for the uniform law on the sphere of
/// radius `s` around a center at distance `rho` from `z`.
fn sphere_contribution(angles: Angles, alpha: f64, s: f64, rho: f64, spec: &QuadratureSpec) -> Result<f64> {
    if s == 0.0 || rho == 0.0 {
        return Ok((alpha - s - rho).max(0.0));
    }
    if alpha <= (s - rho).abs() {
        return Ok(0.0);
    }
    match angles {
        Angles::Line => Ok(0.5 * ((alpha - (s - rho).abs()).max(0.0) + (alpha - s - rho).max(0.0))),
        Angles::Density(p) => {
            let upper = if alpha >= s + rho {
                std::f64::consts::PI
            } else {
                cut_angle(s, rho, alpha)
            };
            let q = integrate(|t| (alpha - chord(s, rho, t)).max(0.0) * p.at(t), 0.0, upper, spec)?;
            Ok(q.value)
        }
    }
}

/// Mean distance from a point at distance `t` of the center to the uniform
/// law on the sphere of radius `s`.
fn sphere_mean_distance(angles: Angles, s: f64, t: f64, spec: &QuadratureSpec) -> Result<f64> {
    if s == 0.0 || t == 0.0 {
        return Ok(s + t);
    }
    match angles {
        Angles::Line => Ok(0.5 * ((s - t).abs() + s + t)),
        Angles::Density(p) => {
            Ok(integrate(|th| chord(s, t, th) * p.at(th), 0.0, std::f64::consts::PI, spec)?.value)
        }
    }
}

/// Gap between the contribution of the center and of a point at distance `t`
/// from it, for the uniform law on the sphere of radius `s < alpha`.
fn sphere_gap(angles: Angles, alpha: f64, s: f64, t: f64, spec: &QuadratureSpec) -> Result<f64> {
    if s == 0.0 {
        return Ok(t.min(alpha));
    }
    if s <= alpha - t {
        return Ok(sphere_mean_distance(angles, s, t, spec)? - s);
    }
    Ok(alpha - s - sphere_contribution(angles, alpha, s, t, spec)?)
}

/// `∫ (alpha − d(z, x))_+ dμ(x)` for a ball centered at distance `rho` from
/// `z`, split as outer radial and inner angular quadrature.
pub fn ball_contribution(
    dist: &RadialDistribution,
    alpha: f64,
    rho: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if alpha <= 0.0 || rho >= alpha + dist.radius {
        return Ok(0.0);
    }
    let angles = Angles::new(dist.m)?;
    let inner = spec.halved();
    if let Some(s) = dist.atom() {
        return sphere_contribution(angles, alpha, s, rho, spec);
    }
    let err = std::cell::RefCell::new(None);
    let v = dist.expectation(
        |s| match sphere_contribution(angles, alpha, s, rho, &inner) {
            Ok(v) => v,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        &[rho - alpha, alpha - rho, rho + alpha],
        &spec.halved(),
    );
    match err.into_inner() {
        Some(e) => Err(e),
        None => v,
    }
}

/// `C^α(z) = Σ_i Σ_ℓ (α_i − d(z, x_ℓ^{(i)}))_+` with one value per cluster.
pub fn contribution(inst: &Instance, alpha: &[f64], z: &[f64]) -> f64 {
    inst.points
        .iter()
        .zip(&inst.labels)
        .map(|(x, &l)| (alpha[l] - distance(z, x)).max(0.0))
        .sum()
}

/// `C^α(z)` with one value per point.
pub fn contribution_per_point(points: &[Vec<f64>], alpha: &[f64], z: &[f64]) -> f64 {
    points
        .iter()
        .zip(alpha)
        .map(|(x, a)| (a - distance(z, x)).max(0.0))
        .sum()
}

/// Expected contribution per unit count,
/// `G^α(z) = Σ_i β_i ∫ (α_i − d(z, x))_+ dμ_i(x)`.
pub fn g_value(balls: &[BallConfig], alpha: &[f64], z: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    let dists = balls
        .iter()
        .map(|b| b.measure.resolve())
        .collect::<Result<Vec<_>>>()?;
    g_value_resolved(balls, &dists, alpha, z, spec)
}

fn g_value_resolved(
    balls: &[BallConfig],
    dists: &[RadialDistribution],
    alpha: &[f64],
    z: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    if alpha.len() != balls.len() {
        return domain("one alpha per ball is required");
    }
    let sub = QuadratureSpec {
        abs_tol: spec.abs_tol / balls.len() as f64,
        ..*spec
    };
    let mut total = 0.0;
    for ((b, d), &a) in balls.iter().zip(dists).zip(alpha) {
        let rho = distance(z, &b.center);
        total += b.weight * ball_contribution(d, a, rho, &sub)?;
    }
    Ok(total)
}

/// Gap between the contribution at the center and at distance `t` for the
/// uniform law on the sphere of radius `r`.
pub fn t_fn(params: &TfnParams, t: f64) -> Result<f64> {
    t_fn_with(params, t, &QuadratureSpec::with_abs_tol(1e-11))
}

pub fn t_fn_with(params: &TfnParams, t: f64, spec: &QuadratureSpec) -> Result<f64> {
    let p = TfnParams::new(params.r, params.alpha, params.m)?;
    if !(0.0..=p.r).contains(&t) {
        return domain(format!("t = {t} outside [0, {}]", p.r));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    sphere_gap(Angles::new(p.m)?, p.alpha, p.r, t, spec)
}

/// Gap `∫(α − ‖x‖)_+ dμ − ∫(α − d(z, x))_+ dμ` for a measure on a ball
/// centered at the origin.
pub fn h_fn(measure: &MeasureSpec, alpha: f64, z: &[f64]) -> Result<f64> {
    h_fn_with(measure, alpha, z, &QuadratureSpec::with_abs_tol(1e-9))
}

pub fn h_fn_with(measure: &MeasureSpec, alpha: f64, z: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    let dist = measure.resolve()?;
    if !(alpha > measure.radius) {
        return domain(format!("alpha {alpha} must exceed the radius {}", measure.radius));
    }
    if z.len() != measure.m as usize {
        return domain("point has wrong dimension");
    }
    let t = norm(z);
    if t > measure.radius * (1.0 + 1e-12) {
        return domain("point outside the ball");
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let angles = Angles::new(measure.m)?;
    if let Some(s) = dist.atom() {
        return sphere_gap(angles, alpha, s, t, spec);
    }
    let inner = spec.halved();
    let err = std::cell::RefCell::new(None);
    let v = dist.expectation(
        |s| match sphere_gap(angles, alpha, s, t, &inner) {
            Ok(v) => v,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        &[alpha - t],
        &spec.halved(),
    );
    match err.into_inner() {
        Some(e) => Err(e),
        None => v,
    }
}

/// Contribution `∫_{B_α(z) ∩ B_r(0)} (α − d(z, x)) dμ(x)` of a ball to a
/// point `z` outside it.
pub fn r_fn(measure: &MeasureSpec, alpha: f64, z: &[f64]) -> Result<f64> {
    r_fn_with(measure, alpha, z, &QuadratureSpec::with_abs_tol(1e-10))
}

pub fn r_fn_with(measure: &MeasureSpec, alpha: f64, z: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    let dist = measure.resolve()?;
    if !(alpha > measure.radius) {
        return domain(format!("alpha {alpha} must exceed the radius {}", measure.radius));
    }
    if z.len() != measure.m as usize {
        return domain("point has wrong dimension");
    }
    let t = norm(z);
    if !(t > measure.radius) {
        return domain("point must lie outside the ball");
    }
    ball_contribution(&dist, alpha, t, spec)
}

/// Closed-form lower bound on `T` for `alpha = r(1 + eps)` at points with
/// `‖z‖ ≥ eps·r`.
pub fn t_lower_bound(r: f64, eps: f64, m: u32) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("eps {eps} outside (0, 1)"));
    }
    if m < 2 || !(r > 0.0) {
        return domain("needs m >= 2 and r > 0");
    }
    let mf = f64::from(m);
    Ok(r * eps * eps / 8.0
        - r * (std::f64::consts::PI * mf / 2.0).sqrt()
            * (1.0 - eps * eps / 16.0).powf((mf - 2.0) / 2.0))
}

/// Closed-form upper bound on `R` at a point with `‖z‖ ∈ (alpha, alpha + r]`.
pub fn r_upper_bound(alpha: f64, r: f64, m: u32, z_norm: f64) -> Result<f64> {
    if m < 2 || !(r > 0.0) || !(alpha > r) {
        return domain("needs m >= 2 and alpha > r > 0");
    }
    if !(z_norm > alpha && z_norm <= alpha + r) {
        return domain(format!("‖z‖ = {z_norm} outside (alpha, alpha + r]"));
    }
    let mf = f64::from(m);
    Ok((alpha + r - z_norm)
        * std::f64::consts::PI.sqrt()
        / 2.0
        * (mf / 2.0).sqrt()
        * (alpha / z_norm).powi(m as i32 - 2))
}

/// Bound on the probability that the angle lies in `[phi1, phi2]`, an
/// interval avoiding `π/2`.
pub fn angle_tail_bound(m: u32, phi1: f64, phi2: f64) -> Result<f64> {
    let half = std::f64::consts::FRAC_PI_2;
    if m < 2 || !(0.0 <= phi1 && phi1 <= phi2 && phi2 <= std::f64::consts::PI) {
        return domain("needs m >= 2 and 0 <= phi1 <= phi2 <= pi");
    }
    if phi1 <= half && half <= phi2 {
        return domain("interval contains pi/2");
    }
    let s = phi1.sin().max(phi2.sin());
    Ok(std::f64::consts::PI.sqrt() / 2.0 * (f64::from(m) / 2.0).sqrt() * s.powi(m as i32 - 2))
}

/// Probability that the angle lies in `[phi1, phi2]`.
pub fn angle_probability(m: u32, phi1: f64, phi2: f64, spec: &QuadratureSpec) -> Result<f64> {
    let p = AngleDensity::new(m)?;
    Ok(integrate(|t| p.at(t), phi1, phi2, spec)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    TLower,
    RUpper,
    AngleTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub quantity: BoundKind,
    pub bound_value: f64,
    pub actual_value: f64,
    /// Nonnegative when the bound holds.
    pub slack: f64,
}

/// Compares `T` at distance `t` with its lower bound, `alpha = r(1 + eps)`.
pub fn check_t_lower(r: f64, eps: f64, m: u32, t: f64) -> Result<BoundReport> {
    if t < eps * r {
        return domain("the lower bound needs ‖z‖ >= eps·r");
    }
    let bound = t_lower_bound(r, eps, m)?;
    let actual = t_fn(&TfnParams::new(r, r * (1.0 + eps), m)?, t)?;
    Ok(BoundReport {
        quantity: BoundKind::TLower,
        bound_value: bound,
        actual_value: actual,
        slack: actual - bound,
    })
}

/// Compares `R` at distance `z_norm` with its upper bound.
pub fn check_r_upper(measure: &MeasureSpec, alpha: f64, z_norm: f64) -> Result<BoundReport> {
    let bound = r_upper_bound(alpha, measure.radius, measure.m, z_norm)?;
    let mut z = vec![0.0; measure.m as usize];
    z[0] = z_norm;
    let actual = r_fn(measure, alpha, &z)?;
    Ok(BoundReport {
        quantity: BoundKind::RUpper,
        bound_value: bound,
        actual_value: actual,
        slack: bound - actual,
    })
}

pub fn check_angle_tail(m: u32, phi1: f64, phi2: f64) -> Result<BoundReport> {
    let bound = angle_tail_bound(m, phi1, phi2)?;
    let actual = angle_probability(m, phi1, phi2, &QuadratureSpec::with_abs_tol(1e-12))?;
    Ok(BoundReport {
        quantity: BoundKind::AngleTail,
        bound_value: bound,
        actual_value: actual,
        slack: bound - actual,
    })
}

/// Search settings for [`g_maximizer_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximizerSettings {
    /// Grid points per direction, excluding the center.
    pub grid: usize,
    pub random_directions: usize,
    /// Width at which golden-section refinement stops.
    pub refine_tol: f64,
    pub seed: u64,
    pub quadrature: QuadratureSpec,
}

impl Default for MaximizerSettings {
    fn default() -> Self {
        MaximizerSettings {
            grid: 64,
            random_directions: 8,
            refine_tol: 1e-6,
            seed: 0,
            quadrature: QuadratureSpec::with_abs_tol(1e-9),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MaximizerVerdict {
    CenterIsUniqueMax,
    CounterexamplePoint { point: Vec<f64> },
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximizerReport {
    pub verdict: MaximizerVerdict,
    /// `G(c_i)` minus the largest value found elsewhere in the ball.
    pub margin: f64,
    pub center_value: f64,
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
}

/// Searches ball `i` for points whose expected contribution reaches that of
/// the center. Directions are toward every other center plus random ones;
/// the best grid cell is refined by golden-section search. The gap vanishes
/// continuously at the center, so the search covers distances from
/// `r / grid` to `r`.
pub fn g_maximizer_check(
    balls: &[BallConfig],
    alpha: &[f64],
    i: usize,
    settings: &MaximizerSettings,
) -> Result<MaximizerReport> {
    if i >= balls.len() {
        return domain(format!("ball {i} out of range"));
    }
    if settings.grid < 2 {
        return domain("grid needs at least two points");
    }
    let dists = balls
        .iter()
        .map(|b| b.measure.resolve())
        .collect::<Result<Vec<_>>>()?;
    let c = &balls[i].center;
    let r = balls[i].radius;
    let m = c.len();
    let spec = &settings.quadrature;
    let g = |z: &[f64]| g_value_resolved(balls, &dists, alpha, z, spec);
    let center_value = g(c)?;
    let mut evaluations = 1;

    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for (j, b) in balls.iter().enumerate() {
        if j != i {
            let d = distance(&b.center, c);
            if d > 0.0 {
                dirs.push(b.center.iter().zip(c).map(|(a, b)| (a - b) / d).collect());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for _ in 0..settings.random_directions {
        dirs.push(random_direction(m, &mut rng));
    }
    if dirs.is_empty() {
        let mut e = vec![0.0; m];
        e[0] = 1.0;
        dirs.push(e);
    }

    let at = |u: &[f64], t: f64| -> Vec<f64> { c.iter().zip(u).map(|(c, u)| c + t * u).collect() };
    let mut best_value = f64::NEG_INFINITY;
    let mut best_point = c.clone();
    for u in &dirs {
        let ts: Vec<f64> = (1..=settings.grid).map(|j| r * j as f64 / settings.grid as f64).collect();
        let mut vals = Vec::with_capacity(ts.len());
        for &t in &ts {
            vals.push(g(&at(u, t))?);
            evaluations += 1;
        }
        let jbest = (0..vals.len())
            .max_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(b.cmp(&a)))
            .expect("nonempty grid");
        let (mut lo, mut hi) = (
            if jbest == 0 { ts[0] } else { ts[jbest - 1] },
            if jbest + 1 < ts.len() { ts[jbest + 1] } else { r },
        );
        let (mut bt, mut bv) = (ts[jbest], vals[jbest]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = g(&at(u, x1))?;
        let mut f2 = g(&at(u, x2))?;
        evaluations += 2;
        while hi - lo > settings.refine_tol {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = g(&at(u, x1))?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = g(&at(u, x2))?;
            }
            evaluations += 1;
            for (t, v) in [(x1, f1), (x2, f2)] {
                if v > bv && t > 0.0 {
                    bt = t;
                    bv = v;
                }
            }
        }
        if bv > best_value {
            best_value = bv;
            best_point = at(u, bt);
        }
    }
    let margin = center_value - best_value;
    let resolution = 10.0 * spec.abs_tol.max(spec.rel_tol * center_value.abs());
    let verdict = if margin > resolution {
        MaximizerVerdict::CenterIsUniqueMax
    } else if margin < -resolution {
        MaximizerVerdict::CounterexamplePoint {
            point: best_point.clone(),
        }
    } else {
        MaximizerVerdict::Inconclusive
    };
    Ok(MaximizerReport {
        verdict,
        margin,
        center_value,
        best_point,
        best_value,
        evaluations,
    })
}

/// The two angular integrals bounding contributions in the hexagonal
/// counterexample: the first must stay below 0.279, the second above 0.292.
pub fn appendix_constants(spec: &QuadratureSpec) -> Result<(f64, f64)> {
    use std::f64::consts::PI;
    let a = integrate(|t| (5.84 - 4.4 * t.cos()).sqrt() - 1.0, 0.0, PI / 6.0, spec)?.value * 6.0 / PI;
    let b1 = integrate(|t| 1.0 - (2.0 - 2.0 * t.cos()).sqrt(), 0.0, PI / 3.0, spec)?.value;
    let b2 = integrate(|t| 1.0 - (2.44 - 2.4 * t.cos()).sqrt(), 0.0, 0.6f64.acos(), spec)?.value;
    Ok((a, (b1 + b2) / PI))
}

/// Grid of `T` values on `(0, r]`.
pub fn t_scan(params: &TfnParams, grid: usize) -> Result<Vec<(f64, f64)>> {
    (1..=grid)
        .map(|j| {
            let t = params.r * j as f64 / grid as f64;
            Ok((t, t_fn(params, t)?))
        })
        .collect()
}
