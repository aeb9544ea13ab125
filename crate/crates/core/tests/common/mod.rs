//! Randomized lemma suites shared by the acceptance target and the property
//! tests. Every suite uses a fixed-seed runner so failures reproduce.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use kmr_core::gfunction::{check_angle_tail, check_r_upper, check_t_lower, h_fn, t_fn, TfnParams};
use kmr_core::instance::{generate, ground_truth, median_of};
use kmr_core::measures::{BallConfig, MeasureSpec, RadialLaw};
use kmr_core::numerics::{angle_density, crossing_threshold, integrate, QuadratureSpec};

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

pub type SuiteResult = Result<String, String>;

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

/// A rotation-invariant law on a ball of radius `r`; indices 0..4 are
/// absolutely continuous, 4 is a sphere.
pub fn law_strategy(continuous_only: bool) -> impl Strategy<Value = RadialLaw> {
    let upper = if continuous_only { 3usize } else { 4 };
    (0..=upper, 0.02f64..0.5, 0.01f64..0.5, 0.05f64..1.0, 0.1f64..3.0).prop_map(|(kind, eps, q, s, slope)| match kind {
        0 => RadialLaw::UniformBall,
        1 => RadialLaw::Annulus { eps, interior_mass: q },
        2 => RadialLaw::RadialDensity {
            knots: vec![[0.0, 1.0 + slope], [1.0, 1.0]],
        },
        3 => RadialLaw::RadialDensity {
            knots: vec![[0.0, 2.0], [s, 1.0], [1.0, 0.5]],
        },
        _ => RadialLaw::UniformSphere { s },
    })
}

fn scaled(law: RadialLaw, r: f64) -> RadialLaw {
    match law {
        RadialLaw::UniformSphere { s } => RadialLaw::UniformSphere { s: s * r },
        RadialLaw::RadialDensity { knots } => RadialLaw::RadialDensity {
            knots: knots.into_iter().map(|[x, y]| [x * r, y]).collect(),
        },
        other => other,
    }
}

/// `H ≥ T` for rotation-invariant measures.
pub fn h_dominates_t(cases: u32) -> SuiteResult {
    let worst = std::cell::Cell::new(f64::INFINITY);
    run(
        cases,
        (2u32..=6, 0.5f64..2.0, 0.01f64..1.0, 0.0f64..1.0, law_strategy(false)),
        |(m, r, a, frac, law)| {
            let alpha = r * (1.0 + a);
            let measure = MeasureSpec {
                m,
                radius: r,
                law: scaled(law, r),
            };
            let mut z = vec![0.0; m as usize];
            z[0] = frac * r;
            let h = h_fn(&measure, alpha, &z).map_err(|e| fail(e.to_string()))?;
            let t = t_fn(&TfnParams::new(r, alpha, m).unwrap(), frac * r).map_err(|e| fail(e.to_string()))?;
            worst.set(worst.get().min(h - t));
            if h < t - 1e-7 {
                return Err(fail(format!("H {h} < T {t} for {measure:?}, alpha {alpha}, t {}", frac * r)));
            }
            Ok(())
        },
    )?;
    Ok(format!("{cases} cases, min H - T {:.3e}", worst.get()))
}

/// `T` strictly increases in `alpha` on `(r, r + t)` and is constant beyond.
pub fn t_monotone_in_alpha(cases: u32) -> SuiteResult {
    run(cases, (2u32..=6, 0.5f64..2.0, 0.1f64..1.0), |(m, r, frac)| {
        let t = frac * r;
        let at = |alpha: f64| t_fn(&TfnParams::new(r, alpha, m).unwrap(), t).unwrap();
        let grid = 8;
        let rising: Vec<f64> = (1..=grid).map(|j| at(r + t * j as f64 / (grid + 1) as f64)).collect();
        for w in rising.windows(2) {
            if !(w[1] > w[0]) {
                return Err(fail(format!("not increasing: {} then {} (m {m}, r {r}, t {t})", w[0], w[1])));
            }
        }
        let flat: Vec<f64> = (0..5).map(|j| at(r + t + 0.25 * j as f64)).collect();
        for w in flat.windows(2) {
            if (w[1] - w[0]).abs() > 1e-9 {
                return Err(fail(format!("not constant beyond r + t: {} vs {}", w[0], w[1])));
            }
        }
        Ok(())
    })?;
    Ok(format!("{cases} cases"))
}

/// `T` does not decrease when the dimension grows.
pub fn t_monotone_in_dimension(cases: u32) -> SuiteResult {
    run(cases, (2u32..=20, 0.5f64..2.0, 0.01f64..1.5, 0.0f64..1.0), |(m, r, a, frac)| {
        let alpha = r * (1.0 + a);
        let lo = t_fn(&TfnParams::new(r, alpha, m).unwrap(), frac * r).unwrap();
        let hi = t_fn(&TfnParams::new(r, alpha, m + 1).unwrap(), frac * r).unwrap();
        if hi < lo - 1e-8 {
            return Err(fail(format!("T(m + 1) {hi} < T(m) {lo} at m {m}, r {r}, alpha {alpha}")));
        }
        Ok(())
    })?;
    Ok(format!("{cases} cases"))
}

/// Closed-form lower bound on `T` for `alpha = r(1 + eps)`, `‖z‖ ≥ eps r`.
pub fn t_lower_bound_holds(cases: u32) -> SuiteResult {
    run(cases, (2u32..=60, 0.2f64..3.0, 0.01f64..0.99, 0.0f64..1.0), |(m, r, eps, frac)| {
        let t = r * (eps + (1.0 - eps) * frac);
        let rep = check_t_lower(r, eps, m, t).map_err(|e| fail(e.to_string()))?;
        if rep.slack < -1e-8 {
            return Err(fail(format!("bound {} above T {}", rep.bound_value, rep.actual_value)));
        }
        Ok(())
    })?;
    Ok(format!("{cases} cases"))
}

/// Closed-form upper bound on the outside-ball contribution.
pub fn residual_bound_holds(cases: u32) -> SuiteResult {
    run(
        cases,
        (2u32..=12, 0.5f64..2.0, 0.01f64..1.0, 0.001f64..1.0, law_strategy(true)),
        |(m, r, a, frac, law)| {
            let alpha = r * (1.0 + a);
            let z_norm = alpha + r * frac;
            let measure = MeasureSpec {
                m,
                radius: r,
                law: scaled(law, r),
            };
            let rep = check_r_upper(&measure, alpha, z_norm).map_err(|e| fail(e.to_string()))?;
            if rep.slack < -1e-8 {
                return Err(fail(format!("R {} above bound {}", rep.actual_value, rep.bound_value)));
            }
            Ok(())
        },
    )?;
    Ok(format!("{cases} cases"))
}

/// Tail bound on the angle probability over intervals avoiding `π/2`.
pub fn angle_tail_bound_holds(cases: u32) -> SuiteResult {
    run(cases, (2u32..=80, 0.0f64..1.0, 0.0f64..1.0, any::<bool>()), |(m, u, v, upper)| {
        let (a, b) = (u.min(v) * (FRAC_PI_2 - 1e-6), u.max(v) * (FRAC_PI_2 - 1e-6));
        let (phi1, phi2) = if upper { (PI - b, PI - a) } else { (a, b) };
        let rep = check_angle_tail(m, phi1, phi2).map_err(|e| fail(e.to_string()))?;
        if rep.slack < -1e-12 {
            return Err(fail(format!("probability {} above bound {}", rep.actual_value, rep.bound_value)));
        }
        Ok(())
    })?;
    Ok(format!("{cases} cases"))
}

/// The angle density integrates to one and is symmetric about `π/2`.
pub fn angle_density_normalized(cases: u32) -> SuiteResult {
    let spec = QuadratureSpec::with_abs_tol(1e-12);
    run(cases, (2u32..=40, 0.0f64..PI), |(m, theta)| {
        let total = integrate(|t| angle_density(m, t).unwrap(), 0.0, PI, &spec).unwrap().value;
        if (total - 1.0).abs() > 1e-8 {
            return Err(fail(format!("m {m}: total mass {total}")));
        }
        let (l, r) = (angle_density(m, theta).unwrap(), angle_density(m, PI - theta).unwrap());
        if (l - r).abs() > 1e-12 * (1.0 + l) {
            return Err(fail(format!("m {m}: asymmetric at {theta}")));
        }
        Ok(())
    })?;
    Ok(format!("{cases} cases"))
}

/// `p^(m) > p^(m+1)` exactly when `sin θ < s_m`.
pub fn crossing_sign_rule(cases: u32) -> SuiteResult {
    run(cases, (2u32..=60, 0.0f64..PI), |(m, theta)| {
        let s = crossing_threshold(m).unwrap();
        let diff = angle_density(m, theta).unwrap() - angle_density(m + 1, theta).unwrap();
        let side = theta.sin() - s;
        if side.abs() <= 1e-12 {
            return Ok(());
        }
        let expected = if side < 0.0 { diff > 0.0 } else { diff < 0.0 };
        if !expected {
            return Err(fail(format!("m {m}, theta {theta}: difference {diff}, sin - s_m {side}")));
        }
        Ok(())
    })?;
    Ok(format!("{cases} cases"))
}

fn unit_ball(m: u32) -> BallConfig {
    BallConfig::new(vec![0.0; m as usize], MeasureSpec::uniform_ball(m, 1.0), 1.0).unwrap()
}

/// The sample median of 2001 uniform points in the unit 3-ball lies within
/// 0.1 of the center in at least 95 of 100 seeds.
pub fn median_concentration(seeds: u64) -> SuiteResult {
    let ball = unit_ball(3);
    let mut hits = 0;
    for seed in 0..seeds {
        let inst = generate(std::slice::from_ref(&ball), 2001, seed).map_err(|e| e.to_string())?;
        let refs: Vec<&[f64]> = inst.points.iter().map(|p| p.as_slice()).collect();
        let med = median_of(&refs).map_err(|e| e.to_string())?;
        let off = inst.points[med.index].iter().map(|x| x * x).sum::<f64>().sqrt();
        hits += usize::from(off < 0.1);
    }
    let needed = (0.95 * seeds as f64).ceil() as usize;
    let line = format!("{hits}/{seeds} seeds with median offset < 0.1");
    if hits >= needed {
        Ok(line)
    } else {
        Err(line)
    }
}

/// `OPT_i / n_i` is within 0.05 of the mean center distance (2/3 for the
/// uniform disk) in at least 90 of 100 seeds at `n = 2000`.
pub fn opt_per_point_concentration(seeds: u64) -> SuiteResult {
    let ball = unit_ball(2);
    let expected = 2.0 / 3.0;
    let mut hits = 0;
    for seed in 0..seeds {
        let inst = generate(std::slice::from_ref(&ball), 2000, seed).map_err(|e| e.to_string())?;
        let gt = ground_truth(&inst).map_err(|e| e.to_string())?;
        let per = gt.clusters[0].opt / inst.counts[0] as f64;
        hits += usize::from((per - expected).abs() < 0.05);
    }
    let needed = (0.9 * seeds as f64).ceil() as usize;
    let line = format!("{hits}/{seeds} seeds with |OPT/n - E| < 0.05");
    if hits >= needed {
        Ok(line)
    } else {
        Err(line)
    }
}

/// Every lemma suite with its case count, in report order.
pub fn lemma_suites() -> Vec<(&'static str, Box<dyn Fn() -> SuiteResult>)> {
    vec![
        ("H >= T", Box::new(|| h_dominates_t(100))),
        ("T monotone in alpha", Box::new(|| t_monotone_in_alpha(100))),
        ("T monotone in dimension", Box::new(|| t_monotone_in_dimension(100))),
        ("T lower bound", Box::new(|| t_lower_bound_holds(200))),
        ("residual upper bound", Box::new(|| residual_bound_holds(200))),
        ("angle tail bound", Box::new(|| angle_tail_bound_holds(200))),
        ("angle density normalization", Box::new(|| angle_density_normalized(100))),
        ("crossing sign rule", Box::new(|| crossing_sign_rule(500))),
        ("median concentration", Box::new(|| median_concentration(100))),
        ("OPT/n concentration", Box::new(|| opt_per_point_concentration(100))),
    ]
}
