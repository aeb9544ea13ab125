//! Rotation-invariant probability measures on balls, described by their
//! radial law.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{integrate_pieces, QuadratureSpec};

/// Distribution of `‖x − c‖` for a rotation-invariant measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialLaw {
    /// Uniform on the ball.
    UniformBall,
    /// Uniform on the sphere of radius `s`; `s = 0` is the point mass.
    UniformSphere { s: f64 },
    /// All mass at the center.
    PointMass,
    /// Lebesgue density `f(‖x‖)`, piecewise linear through `knots` given as
    /// `[radius, value]` pairs from 0 to the ball radius. Need not be
    /// normalized.
    RadialDensity { knots: Vec<[f64; 2]> },
    /// Continuous density with `interior_mass` on `[0, radius(1 − eps))` and
    /// the rest on a flat plateau out to the boundary.
    Annulus { eps: f64, interior_mass: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub m: u32,
    pub radius: f64,
    pub law: RadialLaw,
}

/// One ball of an instance: center, radius, measure and count multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallConfig {
    pub center: Vec<f64>,
    pub radius: f64,
    pub measure: MeasureSpec,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    /// Per ball, distance from its center to the nearest other center minus
    /// its own radius.
    pub clearance: Vec<f64>,
    /// Minimum pairwise center distance.
    pub delta: f64,
    pub pairwise_distances: Vec<Vec<f64>>,
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Independent generator for stream `stream` of seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform direction on the unit sphere of `R^m`.
pub fn random_direction<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-300 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

impl MeasureSpec {
    pub fn uniform_ball(m: u32, radius: f64) -> Self {
        MeasureSpec {
            m,
            radius,
            law: RadialLaw::UniformBall,
        }
    }

    pub fn uniform_sphere(m: u32, radius: f64, s: f64) -> Self {
        MeasureSpec {
            m,
            radius,
            law: RadialLaw::UniformSphere { s },
        }
    }

    pub fn point_mass(m: u32, radius: f64) -> Self {
        MeasureSpec {
            m,
            radius,
            law: RadialLaw::PointMass,
        }
    }

    pub fn annulus(m: u32, radius: f64, eps: f64, interior_mass: f64) -> Self {
        MeasureSpec {
            m,
            radius,
            law: RadialLaw::Annulus { eps, interior_mass },
        }
    }

    /// Radial density measure whose Lebesgue density strictly decreases in
    /// the distance to the center. Rejects profiles that are not strictly
    /// decreasing on a fine grid.
    pub fn decreasing_density(m: u32, radius: f64, knots: Vec<[f64; 2]>) -> Result<Self> {
        let spec = MeasureSpec {
            m,
            radius,
            law: RadialLaw::RadialDensity { knots },
        };
        let dist = spec.resolve()?;
        let grid = 1000;
        let mut prev = f64::INFINITY;
        for i in 0..=grid {
            let v = dist.profile_at(radius * i as f64 / grid as f64);
            if !(v < prev) {
                return Err(Error::Config(
                    "density profile is not strictly decreasing".into(),
                ));
            }
            prev = v;
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }

    /// Precomputes the radial distribution.
    pub fn resolve(&self) -> Result<RadialDistribution> {
        RadialDistribution::new(self)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.resolve()?.sample(rng))
    }

    pub fn expected_center_distance(&self) -> Result<f64> {
        self.resolve()?.expected_distance(&QuadratureSpec::new(1e-12, 1e-12, 60)?)
    }

    pub fn radial_cdf(&self, t: f64) -> Result<f64> {
        self.resolve()?.cdf(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Atom(f64),
    Uniform,
    Profile {
        /// Knots in units of the radius.
        knots: Vec<(f64, f64)>,
        /// Normalized mass below each knot.
        cum: Vec<f64>,
        /// `m ∫ f(u) u^{m-1} du` over `[0, 1]`.
        total: f64,
    },
}

/// A resolved radial law with closed-form cdf, sampling and breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDistribution {
    pub m: u32,
    pub radius: f64,
    shape: Shape,
}

/// `m ∫_{u0}^{u1} (c0 + c1 u) u^{m-1} du`.
fn segment_mass(m: u32, u0: f64, u1: f64, c0: f64, c1: f64) -> f64 {
    let mf = f64::from(m);
    let p = |u: f64| u.powi(m as i32);
    let q = |u: f64| u.powi(m as i32 + 1);
    c0 * (p(u1) - p(u0)) + c1 * mf / (mf + 1.0) * (q(u1) - q(u0))
}

fn line(k0: (f64, f64), k1: (f64, f64)) -> (f64, f64) {
    let slope = (k1.1 - k0.1) / (k1.0 - k0.0);
    (k0.1 - slope * k0.0, slope)
}

/// Knots (in units of the radius) of the continuous three-piece annulus
/// profile: flat level, linear ramp, plateau on `[1 − eps, 1]`.
fn annulus_knots(m: u32, eps: f64, q: f64) -> Vec<(f64, f64)> {
    let b = 1.0 - eps;
    let bm = b.powi(m as i32);
    let h = (1.0 - q) / (1.0 - bm);
    let ramp = |w: f64| {
        let a = b - w;
        if w <= 0.0 {
            return 0.0;
        }
        let mf = f64::from(m);
        (mf * (b.powi(m as i32 + 1) - a.powi(m as i32 + 1)) / (mf + 1.0)
            - a * (bm - a.powi(m as i32)))
            / w
    };
    let target = q / 2.0;
    let w = if h * ramp(b) <= target {
        b
    } else {
        let (mut lo, mut hi) = (0.0, b);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h * ramp(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let j = ramp(w);
    let level = (q - h * j) / (bm - j);
    let a = b - w;
    let mut knots = Vec::with_capacity(4);
    if a > 0.0 {
        knots.push((0.0, level));
    }
    knots.push((a.max(0.0), level));
    knots.push((b, h));
    knots.push((1.0, h));
    knots
}

impl RadialDistribution {
    pub fn new(spec: &MeasureSpec) -> Result<Self> {
        if spec.m < 1 {
            return domain("dimension must be at least 1");
        }
        if !(spec.radius > 0.0 && spec.radius.is_finite()) {
            return domain(format!("radius must be positive, got {}", spec.radius));
        }
        let shape = match &spec.law {
            RadialLaw::UniformBall => Shape::Uniform,
            RadialLaw::PointMass => Shape::Atom(0.0),
            RadialLaw::UniformSphere { s } => {
                if !(*s >= 0.0 && *s <= spec.radius) {
                    return domain(format!("sphere radius {s} outside [0, {}]", spec.radius));
                }
                Shape::Atom(*s)
            }
            RadialLaw::Annulus { eps, interior_mass } => {
                if !(*eps > 0.0 && *eps < 1.0) {
                    return domain(format!("annulus eps {eps} outside (0, 1)"));
                }
                if !(*interior_mass > 0.0 && *interior_mass < 1.0) {
                    return domain(format!("interior mass {interior_mass} outside (0, 1)"));
                }
                Self::profile_shape(spec.m, annulus_knots(spec.m, *eps, *interior_mass))?
            }
            RadialLaw::RadialDensity { knots } => {
                if knots.len() < 2 {
                    return domain("radial density needs at least two knots");
                }
                let first = knots[0][0];
                let last = knots[knots.len() - 1][0];
                if first != 0.0 || (last - spec.radius).abs() > 1e-12 * spec.radius {
                    return domain("radial density knots must span [0, radius]");
                }
                let scaled = knots
                    .iter()
                    .map(|k| (k[0] / spec.radius, k[1]))
                    .collect();
                Self::profile_shape(spec.m, scaled)?
            }
        };
        Ok(RadialDistribution {
            m: spec.m,
            radius: spec.radius,
            shape,
        })
    }

    fn profile_shape(m: u32, knots: Vec<(f64, f64)>) -> Result<Shape> {
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return domain("knot radii must be strictly increasing");
            }
        }
        if knots.iter().any(|k| !(k.1 >= 0.0 && k.1.is_finite())) {
            return domain("density profile must be finite and nonnegative");
        }
        let mut cum = vec![0.0];
        let mut acc = 0.0;
        for w in knots.windows(2) {
            let (c0, c1) = line(w[0], w[1]);
            acc += segment_mass(m, w[0].0, w[1].0, c0, c1);
            cum.push(acc);
        }
        if !(acc > 0.0) {
            return domain("density profile has zero mass");
        }
        for c in cum.iter_mut() {
            *c /= acc;
        }
        Ok(Shape::Profile {
            knots,
            cum,
            total: acc,
        })
    }

    /// Radius carrying all the mass, if the law is a sphere or point mass.
    pub fn atom(&self) -> Option<f64> {
        match self.shape {
            Shape::Atom(s) => Some(s),
            _ => None,
        }
    }

    /// Lebesgue density profile (unnormalized for `RadialDensity`).
    fn profile_at(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Atom(_) => 0.0,
            Shape::Uniform => 1.0,
            Shape::Profile { knots, .. } => {
                let u = t / self.radius;
                let i = knots.partition_point(|k| k.0 <= u).clamp(1, knots.len() - 1);
                let (c0, c1) = line(knots[i - 1], knots[i]);
                c0 + c1 * u
            }
        }
    }

    /// Density of `‖x − c‖` at `t`. Zero for atomic laws.
    pub fn pdf(&self, t: f64) -> f64 {
        if !(0.0..=self.radius).contains(&t) {
            return 0.0;
        }
        let m = self.m as i32;
        let u = t / self.radius;
        match &self.shape {
            Shape::Atom(_) => 0.0,
            Shape::Uniform => f64::from(self.m) * u.powi(m - 1) / self.radius,
            Shape::Profile { total, .. } => {
                f64::from(self.m) * self.profile_at(t) * u.powi(m - 1) / (total * self.radius)
            }
        }
    }

    /// Radii where the density of `‖x − c‖` has kinks, including both ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Atom(s) => vec![*s],
            Shape::Uniform => vec![0.0, self.radius],
            Shape::Profile { knots, .. } => knots.iter().map(|k| k.0 * self.radius).collect(),
        }
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.radius) {
            return domain(format!("radius {t} outside [0, {}]", self.radius));
        }
        Ok(self.cdf_unchecked(t))
    }

    fn cdf_unchecked(&self, t: f64) -> f64 {
        let u = (t / self.radius).clamp(0.0, 1.0);
        match &self.shape {
            Shape::Atom(s) => {
                if t >= *s {
                    1.0
                } else {
                    0.0
                }
            }
            Shape::Uniform => u.powi(self.m as i32),
            Shape::Profile { knots, cum, total } => {
                if u >= 1.0 {
                    return 1.0;
                }
                let i = knots.partition_point(|k| k.0 <= u).clamp(1, knots.len() - 1);
                let (c0, c1) = line(knots[i - 1], knots[i]);
                (cum[i - 1] + segment_mass(self.m, knots[i - 1].0, u, c0, c1) / total)
                    .clamp(0.0, 1.0)
            }
        }
    }

    /// Draws `‖x − c‖`.
    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.shape {
            Shape::Atom(s) => *s,
            Shape::Uniform => {
                let u: f64 = rng.random();
                self.radius * u.powf(1.0 / f64::from(self.m))
            }
            Shape::Profile { knots, cum, .. } => {
                let target: f64 = rng.random();
                let i = cum.partition_point(|c| *c <= target).clamp(1, knots.len() - 1);
                let (mut lo, mut hi) = (knots[i - 1].0, knots[i].0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf_unchecked(mid * self.radius) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi) * self.radius
            }
        }
    }

    /// Draws a point of the ball centered at the origin.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let dir = random_direction(self.m as usize, rng);
        let t = self.sample_radius(rng);
        dir.into_iter().map(|x| x * t).collect()
    }

    /// Integrates `g(t)` against the radial law, splitting at `extra` kinks
    /// of `g` as well as the law's own breakpoints.
    pub fn expectation<F>(&self, g: F, extra: &[f64], spec: &QuadratureSpec) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        if let Some(s) = self.atom() {
            return Ok(g(s));
        }
        let breaks = crate::numerics::breakpoints(
            0.0,
            self.radius,
            self.breakpoints().into_iter().chain(extra.iter().copied()),
        );
        Ok(integrate_pieces(|t| g(t) * self.pdf(t), &breaks, spec)?.value)
    }

    pub fn expected_distance(&self, spec: &QuadratureSpec) -> Result<f64> {
        self.expectation(|t| t, &[], spec)
    }
}

impl BallConfig {
    pub fn new(center: Vec<f64>, measure: MeasureSpec, weight: f64) -> Result<Self> {
        let b = BallConfig {
            center,
            radius: measure.radius,
            measure,
            weight,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.center.len() != self.measure.m as usize {
            return Err(Error::Config(format!(
                "center has dimension {} but measure has {}",
                self.center.len(),
                self.measure.m
            )));
        }
        if self.center.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("center must be finite".into()));
        }
        if self.radius != self.measure.radius {
            return Err(Error::Config("ball radius differs from measure radius".into()));
        }
        if !(self.weight >= 1.0 && self.weight.is_finite()) {
            return Err(Error::Config(format!("weight {} below 1", self.weight)));
        }
        self.measure.validate()
    }
}

/// Pairwise center distances and clearances of a ball layout.
pub fn geometry(balls: &[BallConfig]) -> GeometrySummary {
    let k = balls.len();
    let mut pairwise = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let d = distance(&balls[i].center, &balls[j].center);
            pairwise[i][j] = d;
            pairwise[j][i] = d;
        }
    }
    let clearance = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| pairwise[i][j])
                .fold(f64::INFINITY, f64::min)
                - balls[i].radius
        })
        .collect();
    let delta = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .map(|(i, j)| pairwise[i][j])
        .fold(f64::INFINITY, f64::min);
    GeometrySummary {
        clearance,
        delta,
        pairwise_distances: pairwise,
    }
}

/// Outcome of the mass condition needed by the hexagonal counterexample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// Checks `(0.292 − 8ε) P(‖x‖ ≥ 1 − ε) > 0.279 + 6ε + (3 + 2ε) P(‖x‖ < 1 − ε)`
/// for a measure on the unit ball.
pub fn check_counterexample_assumption(measure: &MeasureSpec, eps: f64) -> Result<AssumptionCheck> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("eps {eps} outside (0, 1)"));
    }
    let dist = measure.resolve()?;
    let t = (1.0 - eps) * measure.radius;
    let inner = match dist.atom() {
        // The cdf is right-continuous; the strict inequality needs the left limit.
        Some(s) => {
            if s < t {
                1.0
            } else {
                0.0
            }
        }
        None => dist.cdf(t)?,
    };
    let outer = 1.0 - inner;
    let lhs = (0.292 - 8.0 * eps) * outer;
    let rhs = 0.279 + 6.0 * eps + (3.0 + 2.0 * eps) * inner;
    Ok(AssumptionCheck {
        satisfied: lhs > rhs,
        lhs,
        rhs,
        margin: lhs - rhs,
    })
}
