//! Special functions, the sphere-angle density and adaptive quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum bisection depth below the initial panels.
    pub max_subdivisions: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 60,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: u32) -> Result<Self> {
        let spec = QuadratureSpec {
            abs_tol,
            rel_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_abs_tol(abs_tol: f64) -> Self {
        QuadratureSpec {
            abs_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol >= 0.0) || self.max_subdivisions < 1 {
            return domain(format!("invalid quadrature spec {self:?}"));
        }
        Ok(())
    }

    /// Splits the budget in two halves, for nested integrals.
    pub fn halved(&self) -> Self {
        QuadratureSpec {
            abs_tol: self.abs_tol / 2.0,
            rel_tol: self.rel_tol / 2.0,
            ..*self
        }
    }
}

/// Result of a converged quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const INITIAL_PANELS: usize = 8;

struct Simpson<'a, F> {
    f: &'a F,
    max_depth: u32,
    evaluations: usize,
    error: f64,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    fn eval(&mut self, x: f64) -> Result<f64> {
        self.evaluations += 1;
        let y = (self.f)(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Numerical(format!("integrand is {y} at {x}")))
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &mut self,
        a: f64,
        fa: f64,
        m: f64,
        fm: f64,
        b: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> Result<f64> {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.eval(lm)?;
        let frm = self.eval(rm)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        let rounding = 64.0 * f64::EPSILON * (left.abs() + right.abs());
        if delta.abs() <= 15.0 * eps || delta.abs() <= rounding {
            self.error += delta.abs() / 15.0;
            return Ok(left + right + delta / 15.0);
        }
        if lm <= a || rm >= b {
            // No representable midpoint left; the caller checks the total.
            self.error += delta.abs() / 15.0;
            return Ok(left + right + delta / 15.0);
        }
        if depth >= self.max_depth {
            return Err(Error::Quadrature {
                a,
                b,
                estimate: delta.abs() / 15.0,
            });
        }
        let l = self.refine(a, fa, lm, flm, m, fm, left, eps / 2.0, depth + 1)?;
        let r = self.refine(m, fm, rm, frm, b, fb, right, eps / 2.0, depth + 1)?;
        Ok(l + r)
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
///
/// Returns the estimate together with the accumulated error estimate, or an
/// explicit failure when some subinterval does not converge within
/// `max_subdivisions` bisections.
pub fn integrate<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return domain(format!("bad interval [{a}, {b}]"));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut s = Simpson {
        f: &f,
        max_depth: spec.max_subdivisions,
        evaluations: 0,
        error: 0.0,
    };
    let h = (b - a) / INITIAL_PANELS as f64;
    let mut nodes = Vec::with_capacity(2 * INITIAL_PANELS + 1);
    for i in 0..=2 * INITIAL_PANELS {
        let x = if i == 2 * INITIAL_PANELS {
            b
        } else {
            a + 0.5 * h * i as f64
        };
        nodes.push((x, s.eval(x)?));
    }
    let mut panels = Vec::with_capacity(INITIAL_PANELS);
    let mut rough = 0.0;
    for p in 0..INITIAL_PANELS {
        let (x0, f0) = nodes[2 * p];
        let (x1, f1) = nodes[2 * p + 1];
        let (x2, f2) = nodes[2 * p + 2];
        let whole = (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2);
        rough += whole;
        panels.push((x0, f0, x1, f1, x2, f2, whole));
    }
    let tol = spec.abs_tol.max(spec.rel_tol * rough.abs());
    let eps = tol / INITIAL_PANELS as f64;
    let mut value = 0.0;
    for (x0, f0, x1, f1, x2, f2, whole) in panels {
        value += s.refine(x0, f0, x1, f1, x2, f2, whole, eps, 0)?;
    }
    if s.error > tol.max(spec.rel_tol * value.abs()) {
        return Err(Error::Quadrature {
            a,
            b,
            estimate: s.error,
        });
    }
    Ok(Quadrature {
        value,
        error: s.error,
        evaluations: s.evaluations,
    })
}

/// Integrates over consecutive breakpoints, skipping empty pieces.
///
/// The budget is shared evenly between the pieces.
pub fn integrate_pieces<F>(f: F, breaks: &[f64], spec: &QuadratureSpec) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    let pieces = breaks.windows(2).filter(|w| w[1] > w[0]).count().max(1);
    let sub = QuadratureSpec {
        abs_tol: spec.abs_tol / pieces as f64,
        ..*spec
    };
    let mut total = Quadrature {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let q = integrate(&f, w[0], w[1], &sub)?;
            total.value += q.value;
            total.error += q.error;
            total.evaluations += q.evaluations;
        }
    }
    Ok(total)
}

/// Sorts, clips to `[lo, hi]` and deduplicates a list of breakpoints, keeping
/// both ends.
pub fn breakpoints(lo: f64, hi: f64, interior: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![lo, hi];
    out.extend(interior.into_iter().filter(|x| x.is_finite() && *x > lo && *x < hi));
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `Γ(m/2) / Γ((m-1)/2)`, evaluated through log-gamma.
pub fn gamma_ratio(m: u32) -> Result<f64> {
    if m < 2 {
        return domain(format!("gamma_ratio needs m >= 2, got {m}"));
    }
    let m = f64::from(m);
    Ok((ln_gamma(m / 2.0) - ln_gamma((m - 1.0) / 2.0)).exp())
}

/// `Γ(m/2)² / (Γ((m-1)/2) Γ((m+1)/2))`, the value of `sin θ` at which the
/// angle densities in dimensions `m` and `m + 1` cross.
pub fn crossing_threshold(m: u32) -> Result<f64> {
    if m < 2 {
        return domain(format!("crossing_threshold needs m >= 2, got {m}"));
    }
    let m = f64::from(m);
    Ok(
        (2.0 * ln_gamma(m / 2.0) - ln_gamma((m - 1.0) / 2.0) - ln_gamma((m + 1.0) / 2.0))
            .exp(),
    )
}

/// Density of the angle between a uniform point of the unit sphere in `R^m`
/// and a fixed direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleDensity {
    pub m: u32,
    pub normalizer: f64,
}

impl AngleDensity {
    pub fn new(m: u32) -> Result<Self> {
        Ok(AngleDensity {
            m,
            normalizer: gamma_ratio(m)? / std::f64::consts::PI.sqrt(),
        })
    }

    /// Evaluates the density without a domain check.
    #[inline]
    pub fn at(&self, theta: f64) -> f64 {
        if self.m == 2 {
            self.normalizer
        } else {
            self.normalizer * theta.sin().abs().powi(self.m as i32 - 2)
        }
    }

    pub fn density(&self, theta: f64) -> Result<f64> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return domain(format!("angle {theta} outside [0, pi]"));
        }
        Ok(self.at(theta))
    }
}

pub fn angle_density(m: u32, theta: f64) -> Result<f64> {
    AngleDensity::new(m)?.density(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gamma_ratio_small_dimensions() {
        assert!((gamma_ratio(2).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-13);
        assert!((gamma_ratio(3).unwrap() - PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((gamma_ratio(4).unwrap() - 2.0 / PI.sqrt()).abs() < 1e-13);
        assert!((gamma_ratio(10).unwrap() - 2.0633219055).abs() < 1e-9);
        assert!((gamma_ratio(50).unwrap() - 4.9245597115).abs() < 1e-9);
        assert!(gamma_ratio(1).is_err());
    }

    #[test]
    fn gamma_ratio_large_m_is_finite() {
        let g = gamma_ratio(100_000).unwrap();
        assert!(g.is_finite() && g < (50_000f64).sqrt());
    }

    #[test]
    fn crossing_threshold_values() {
        assert!((crossing_threshold(2).unwrap() - 2.0 / PI).abs() < 1e-13);
        assert!((crossing_threshold(3).unwrap() - PI / 4.0).abs() < 1e-13);
        assert!((crossing_threshold(5).unwrap() - 0.8835729338).abs() < 1e-9);
        for m in 2..300 {
            let s = crossing_threshold(m).unwrap();
            assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn angle_density_examples() {
        for th in [0.0, 0.3, PI / 2.0, PI] {
            assert!((angle_density(2, th).unwrap() - 1.0 / PI).abs() < 1e-14);
        }
        assert!((angle_density(3, PI / 2.0).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(angle_density(4, 0.0).unwrap(), 0.0);
        assert!(angle_density(3, -0.1).is_err());
        assert!(angle_density(3, 3.2).is_err());
    }

    #[test]
    fn integrate_basic() {
        let spec = QuadratureSpec::default();
        let q = integrate(f64::sin, 0.0, PI, &spec).unwrap();
        assert!((q.value - 2.0).abs() < 1e-10);
        assert!(q.error <= 1e-10);
        let p5 = AngleDensity::new(5).unwrap();
        let q = integrate(|t| p5.at(t), 0.0, PI, &spec).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
        assert_eq!(integrate(f64::sin, 1.0, 1.0, &spec).unwrap().value, 0.0);
        assert!(integrate(f64::sin, 1.0, 0.0, &spec).is_err());
    }

    #[test]
    fn integrate_reports_failure() {
        let spec = QuadratureSpec::new(1e-14, 0.0, 3).unwrap();
        let r = integrate(|x: f64| (x - 0.3).abs().sqrt(), 0.0, 1.0, &spec);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, &QuadratureSpec::default());
        assert!(r.is_err());
    }

    #[test]
    fn integrate_kink_with_split() {
        let spec = QuadratureSpec::default();
        let f = |x: f64| (x - 0.3).abs();
        let q = integrate_pieces(f, &breakpoints(0.0, 1.0, [0.3]), &spec).unwrap();
        assert!((q.value - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::new(0.0, 0.0, 10).is_err());
        assert!(QuadratureSpec::new(1e-8, -1.0, 10).is_err());
        assert!(QuadratureSpec::new(1e-8, 0.0, 0).is_err());
    }
}
