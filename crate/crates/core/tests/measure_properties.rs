use std::f64::consts::PI;

use kmr_core::measures::{distance, norm, stream_rng, MeasureSpec};
use kmr_core::numerics::{angle_density, integrate, QuadratureSpec};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

const DRAWS: usize = 100_000;

/// Critical value of the one-sample Kolmogorov-Smirnov statistic at
/// significance 0.001, asymptotic form.
fn ks_critical(n: usize) -> f64 {
    1.9495 / (n as f64).sqrt()
}

fn angles(measure: &MeasureSpec, seed: u64) -> Vec<f64> {
    let dist = measure.resolve().unwrap();
    let mut rng = stream_rng(seed, 3);
    let mut out: Vec<f64> = (0..DRAWS)
        .map(|_| {
            let x = dist.sample(&mut rng);
            (x[0] / norm(&x)).clamp(-1.0, 1.0).acos()
        })
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Largest gap between the empirical angle cdf and the exact one, evaluated
/// on a fine grid.
fn ks_against_density(sorted: &[f64], m: u32) -> f64 {
    let spec = QuadratureSpec::with_abs_tol(1e-12);
    let grid = 2000;
    let mut cdf = 0.0;
    let mut worst: f64 = 0.0;
    for j in 1..=grid {
        let (a, b) = (PI * (j - 1) as f64 / grid as f64, PI * j as f64 / grid as f64);
        cdf += integrate(|t| angle_density(m, t).unwrap(), a, b, &spec).unwrap().value;
        let emp = sorted.partition_point(|&t| t <= b) as f64 / sorted.len() as f64;
        worst = worst.max((emp - cdf).abs());
    }
    worst
}

#[test]
fn sampled_angles_follow_the_angle_density() {
    for m in [2u32, 3, 5, 10] {
        for measure in [MeasureSpec::uniform_ball(m, 1.0), MeasureSpec::annulus(m, 1.0, 0.01, 0.001)] {
            let d = ks_against_density(&angles(&measure, u64::from(m)), m);
            assert!(d < ks_critical(DRAWS), "m {m} {:?}: KS {d}", measure.law);
        }
    }
}

#[test]
fn angle_law_is_independent_of_the_radial_law() {
    let m = 4;
    let a = angles(&MeasureSpec::uniform_ball(m, 1.0), 11);
    let b = angles(&MeasureSpec::uniform_sphere(m, 1.0, 0.3), 12);
    let mut worst: f64 = 0.0;
    for &t in a.iter().chain(&b).step_by(37) {
        let fa = a.partition_point(|&x| x <= t) as f64 / a.len() as f64;
        let fb = b.partition_point(|&x| x <= t) as f64 / b.len() as f64;
        worst = worst.max((fa - fb).abs());
    }
    let critical = 1.9495 * (2.0 / DRAWS as f64).sqrt();
    assert!(worst < critical, "two-sample KS {worst}");
}

#[test]
fn center_minimizes_mean_distance() {
    let laws = [
        MeasureSpec::uniform_ball(2, 1.0),
        MeasureSpec::uniform_ball(5, 1.0),
        MeasureSpec::annulus(3, 1.0, 0.05, 0.1),
        MeasureSpec::decreasing_density(2, 1.0, vec![[0.0, 3.0], [1.0, 1.0]]).unwrap(),
        MeasureSpec::uniform_ball(1, 1.0),
    ];
    for (k, measure) in laws.iter().enumerate() {
        let dist = measure.resolve().unwrap();
        let mut rng = stream_rng(k as u64, 5);
        let xs: Vec<Vec<f64>> = (0..DRAWS).map(|_| dist.sample(&mut rng)).collect();
        for &r in &[0.25, 0.5, 0.75, 1.0] {
            let mut z = vec![0.0; measure.m as usize];
            z[0] = r;
            let diffs: Vec<f64> = xs.iter().map(|x| distance(&z, x) - norm(x)).collect();
            let mean = diffs.iter().sum::<f64>() / DRAWS as f64;
            let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (DRAWS - 1) as f64;
            let se = (var / DRAWS as f64).sqrt();
            assert!(mean > 3.09 * se, "{:?} at {r}: mean gap {mean}, se {se}", measure.law);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 200,
        failure_persistence: None,
        rng_seed: RngSeed::Fixed(3),
        ..ProptestConfig::default()
    })]

    #[test]
    fn radial_cdf_is_the_antiderivative(
        m in 1u32..=8,
        kind in 0usize..3,
        u in 0.0f64..1.0,
        v in 0.0f64..1.0,
        eps in 0.01f64..0.5,
        q in 0.01f64..0.9,
        slope in 0.1f64..4.0,
    ) {
        let measure = match kind {
            0 => MeasureSpec::uniform_ball(m, 1.5),
            1 => MeasureSpec::annulus(m, 1.5, eps, q),
            _ => MeasureSpec::decreasing_density(m, 1.5, vec![[0.0, 1.0 + slope], [0.75, 1.0], [1.5, 0.5]]).unwrap(),
        };
        let dist = measure.resolve().unwrap();
        let (a, b) = (1.5 * u.min(v), 1.5 * u.max(v));
        let mass = dist.cdf(b).unwrap() - dist.cdf(a).unwrap();
        let mut breaks = vec![a];
        breaks.extend(dist.breakpoints().into_iter().filter(|&t| t > a && t < b));
        breaks.push(b);
        let spec = QuadratureSpec::with_abs_tol(1e-12);
        let integral = kmr_core::numerics::integrate_pieces(|t| dist.pdf(t), &breaks, &spec).unwrap().value;
        prop_assert!((mass - integral).abs() <= 1e-8, "cdf mass {mass}, integral {integral}");
    }
}
