use kmr_core::certificate::{
    certify_recovery, complementary_slackness, lemma_geometry_check, Implication,
};
use kmr_core::experiments::{ExperimentConfig, Layout, Method, SeedRange};
use kmr_core::instance::{brute_force_ip, generate, ground_truth, Instance};
use kmr_core::lp::{solve, LpModel};
use kmr_core::measures::{distance, BallConfig, MeasureSpec};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        rng_seed: RngSeed::Fixed(23),
        ..ProptestConfig::default()
    }
}

fn pair(m: u32, delta: f64, kind: usize, n: usize, seed: u64) -> Instance {
    let cfg = ExperimentConfig::new(Layout::Pair { delta }, m, n, SeedRange { start: seed, count: 1 }, Method::Auto);
    let mut balls = cfg.balls().unwrap();
    if kind == 1 {
        for b in &mut balls {
            *b = BallConfig::new(b.center.clone(), MeasureSpec::annulus(m, 1.0, 0.2, 0.3), 1.0).unwrap();
        }
    }
    generate(&balls, n, seed).unwrap()
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn unique_certificate_matches_lp_and_brute_force(
        m in 1u32..=3, delta in 2.0f64..4.5, kind in 0usize..2, n in 2usize..6, seed in any::<u64>(),
    ) {
        let inst = pair(m, delta, kind, n, seed);
        let Ok(out) = certify_recovery(&inst, None) else { return Ok(()) };
        let gt = ground_truth(&inst).unwrap();
        let bf = brute_force_ip(&inst.points, inst.k).unwrap();
        let (sol, _) = solve(&LpModel::build(&inst).unwrap()).unwrap();
        match out.verdict.implies {
            Implication::UniqueOptimum => {
                prop_assert!(bf.unique);
                prop_assert!((bf.objective - gt.objective).abs() <= 1e-9 * (1.0 + gt.objective));
                prop_assert!((sol.objective - gt.objective).abs() <= 1e-7 * (1.0 + gt.objective));
                prop_assert!(sol.is_integral());
                prop_assert_eq!(sol.partition().unwrap().assignment, gt.clustering.assignment);
            }
            Implication::Optimum => {
                prop_assert!((sol.objective - gt.objective).abs() <= 1e-7 * (1.0 + gt.objective));
            }
            Implication::Nothing => {}
        }
    }

    #[test]
    fn never_certifies_a_beaten_partition(
        m in 1u32..=2, delta in 2.0f64..2.6, n in 2usize..6, seed in any::<u64>(),
    ) {
        let inst = pair(m, delta, 0, n, seed);
        let gt = ground_truth(&inst).unwrap();
        let bf = brute_force_ip(&inst.points, inst.k).unwrap();
        if bf.objective < gt.objective - 1e-9 * (1.0 + gt.objective) {
            if let Ok(out) = certify_recovery(&inst, None) {
                prop_assert_eq!(out.verdict.implies, Implication::Nothing);
            }
        }
    }

    #[test]
    fn canonical_dual_proves_integral_optima(
        pts in prop::collection::vec(prop::collection::vec(-4.0f64..4.0, 2), 2..9), k in 1usize..4,
    ) {
        let k = k.min(pts.len());
        let model = LpModel::from_points(&pts, k).unwrap();
        let (sol, dual) = solve(&model).unwrap();
        prop_assume!(sol.is_integral());
        let canon = dual.canonicalized(&model.dist);
        let report = complementary_slackness(&model, &sol, &canon).unwrap();
        prop_assert!(report.optimal(1e-7), "{report:?}");
        prop_assert!((report.primal_objective - report.dual_objective).abs() <= 1e-7 * (1.0 + report.primal_objective));
    }
}

#[test]
fn geometry_neighborhoods_cover_their_own_ball() {
    let cfg = ExperimentConfig::new(Layout::Simplex { k: 3, delta: 3.0 }, 2, 1, SeedRange { start: 0, count: 1 }, Method::Auto);
    let balls = cfg.balls().unwrap();
    let boxes = vec![(1.2, 1.6); 3];
    let check = lemma_geometry_check(&balls, &boxes, 20_000, 5).unwrap();
    assert_eq!(check.violations, 0);
    assert!(check.tau.iter().all(|&t| (t - 0.2).abs() < 1e-12), "{:?}", check.tau);
    assert!(lemma_geometry_check(&balls, &[(0.9, 1.5); 3], 10, 0).is_err());
    assert!(lemma_geometry_check(&balls, &[(1.2, 2.5); 3], 10, 0).is_err());
}

fn contribution(points: &[Vec<f64>], labels: &[usize], alpha: &[f64], z: &[f64]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| (alpha[l] - distance(p, z)).max(0.0))
        .sum()
}

#[test]
fn contribution_peaks_near_each_center() {
    let xi = 0.01;
    let mut good = 0;
    for seed in 0..30u64 {
        let inst = pair(2, 3.5, 0, 2000, seed);
        let out = certify_recovery(&inst, None).unwrap();
        let alpha = &out.recipe.alpha;
        let corners: Vec<Vec<f64>> = (0..4)
            .map(|mask| (0..2).map(|i| alpha[i] + if mask >> i & 1 == 1 { xi } else { -xi }).collect())
            .chain(std::iter::once(alpha.clone()))
            .collect();
        let ok = corners.iter().all(|a| {
            (0..inst.k).all(|i| {
                let best = (0..inst.points.len())
                    .filter(|&p| inst.labels[p] == i)
                    .map(|p| (p, contribution(&inst.points, &inst.labels, a, &inst.points[p])))
                    .max_by(|x, y| x.1.total_cmp(&y.1))
                    .unwrap();
                distance(&inst.points[best.0], &inst.balls[i].center) <= 0.2
            })
        });
        good += usize::from(ok);
    }
    assert!(good >= 27, "argmax within 0.2 of the center in {good}/30 seeds");
}
