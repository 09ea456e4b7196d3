use flockmf::metrics::{
    calibrate_envelope, fit_power_law, japanese, lipschitz_catalog, sliced_wasserstein2, solve_transport, w2_squared_1d,
    wasserstein1, wasserstein2, PointCloud,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_permutations(n - 1) {
        for slot in 0..n {
            let mut q = p.clone();
            q.insert(slot, n - 1);
            out.push(q);
        }
    }
    out
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn brute_force(a: &PointCloud, b: &PointCloud, power: i32) -> f64 {
    let n = a.n();
    all_permutations(n)
        .iter()
        .map(|p| (0..n).map(|i| dist(a.point(i), b.point(p[i])).powi(power)).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
}

fn random_cloud(r: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud {
    PointCloud::uniform(d, (0..n * d).map(|_| r.random_range(-3.0..3.0)).collect()).unwrap()
}

#[test]
fn exact_distances_match_permutation_search() {
    let mut r = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let n = r.random_range(1..=7);
        let d = r.random_range(1..=3);
        let (a, b) = (random_cloud(&mut r, n, d), random_cloud(&mut r, n, d));
        let w1 = wasserstein1(&a, &b).unwrap();
        let w2 = wasserstein2(&a, &b).unwrap();
        assert!((w1 - brute_force(&a, &b, 1)).abs() < 1e-10);
        assert!((w2 * w2 - brute_force(&a, &b, 2)).abs() < 1e-10);
    }
}

#[test]
fn metric_axioms_on_random_triples() {
    let mut r = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let n = r.random_range(1..=6);
        let d = r.random_range(1..=3);
        let (a, b, c) = (random_cloud(&mut r, n, d), random_cloud(&mut r, n, d), random_cloud(&mut r, n, d));
        for w in [wasserstein1, wasserstein2] {
            assert!(w(&a, &a).unwrap().abs() < 1e-12);
            let (ab, ba) = (w(&a, &b).unwrap(), w(&b, &a).unwrap());
            assert!(ab >= 0.0 && (ab - ba).abs() < 1e-10);
            assert!(ab <= w(&a, &c).unwrap() + w(&c, &b).unwrap() + 1e-10);
        }
        assert!(wasserstein1(&a, &b).unwrap() <= wasserstein2(&a, &b).unwrap() + 1e-10);
    }
}

#[test]
fn transport_agrees_with_assignment_on_split_masses() {
    // duplicating every point of one cloud halves its weights but keeps the measure
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = r.random_range(2..=6);
        let (a, b) = (random_cloud(&mut r, n, 2), random_cloud(&mut r, n, 2));
        let doubled = PointCloud::new(2, a.points.iter().chain(&a.points).copied().collect(), vec![0.5 / n as f64; 2 * n])
            .unwrap();
        assert!((wasserstein2(&doubled, &b).unwrap() - wasserstein2(&a, &b).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn transport_small_example() {
    // mass 1/2 at 0 and 1/2 at 2 onto mass 1 at 1: every unit moves distance 1
    let a = PointCloud::new(1, vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
    let b = PointCloud::new(1, vec![1.0], vec![1.0]).unwrap();
    assert!((wasserstein1(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    assert!((wasserstein2(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    let cost = vec![0.0, 4.0, 4.0, 0.0];
    assert!((solve_transport(&cost, &[0.3, 0.7], &[0.5, 0.5]) - 0.8).abs() < 1e-12);
}

#[test]
fn one_dimensional_w2_matches_exact_solver() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let (n, m) = (r.random_range(1..=6), r.random_range(1..=6));
        let xa: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let xb: Vec<f64> = (0..m).map(|_| r.random_range(-2.0..2.0)).collect();
        let raw_a: Vec<f64> = (0..n).map(|_| r.random_range(0.1..1.0)).collect();
        let raw_b: Vec<f64> = (0..m).map(|_| r.random_range(0.1..1.0)).collect();
        let (sa, sb) = (raw_a.iter().sum::<f64>(), raw_b.iter().sum::<f64>());
        let wa: Vec<f64> = raw_a.iter().map(|w| w / sa).collect();
        let wb: Vec<f64> = raw_b.iter().map(|w| w / sb).collect();
        let exact = wasserstein2(&PointCloud::new(1, xa.clone(), wa.clone()).unwrap(), &PointCloud::new(1, xb.clone(), wb.clone()).unwrap())
            .unwrap();
        assert!((w2_squared_1d(&xa, &wa, &xb, &wb) - exact * exact).abs() < 1e-9);
    }
}

#[test]
fn sliced_surrogate_is_below_exact_and_deterministic() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let (a, b) = (random_cloud(&mut r, 30, 3), random_cloud(&mut r, 30, 3));
    let s1 = sliced_wasserstein2(&a, &b, 256, 4).unwrap();
    assert_eq!(s1, sliced_wasserstein2(&a, &b, 256, 4).unwrap());
    // a projection is 1-Lipschitz, so each sliced distance is below W2
    assert!(s1 <= wasserstein2(&a, &b).unwrap() + 1e-12);
    assert!(sliced_wasserstein2(&a, &b, 0, 4).is_err());
}

#[test]
fn shape_errors() {
    assert!(PointCloud::uniform(2, vec![1.0, 2.0, 3.0]).is_err());
    assert!(PointCloud::new(1, vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
    let a = PointCloud::uniform(1, vec![0.0]).unwrap();
    let b = PointCloud::uniform(2, vec![0.0, 0.0]).unwrap();
    assert!(wasserstein1(&a, &b).is_err());
}

#[test]
fn dual_side_is_bounded_by_w1() {
    let mut r = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let (a, b) = (random_cloud(&mut r, 12, 2), random_cloud(&mut r, 9, 2));
        let w1 = wasserstein1(&a, &b).unwrap();
        for f in lipschitz_catalog(2, 25, 3.0, r.random()) {
            assert!((f.integrate(&a) - f.integrate(&b)).abs() <= w1 + 1e-10);
        }
    }
}

#[test]
fn power_law_and_envelope_fits() {
    let t: Vec<f64> = (0..=200).map(|k| k as f64 * 5.0).collect();
    let y: Vec<f64> = t.iter().map(|s| 3.0 * japanese(*s).powf(-0.75)).collect();
    let f = fit_power_law(&t, &y, None).unwrap();
    assert!((f.exponent + 0.75).abs() < 1e-9);
    assert!((f.intercept - 3f64.ln()).abs() < 1e-9);
    let ratio: Vec<f64> = t.iter().map(|s| 2.0 + (s / 100.0).sin() * 0.1).collect();
    let check = calibrate_envelope(&t, &ratio, 500.0, 1.2).unwrap();
    assert!(check.passed && check.constant <= 2.1 && check.worst_ratio < 1.001);
    let growing: Vec<f64> = t.iter().map(|s| 1.0 + s).collect();
    assert!(!calibrate_envelope(&t, &growing, 500.0, 1.2).unwrap().passed);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn translation_moves_w2_by_the_shift(seed in any::<u64>(), n in 1usize..8, shift in -5.0f64..5.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let a = random_cloud(&mut r, n, 2);
        let b = PointCloud::uniform(2, a.points.iter().enumerate().map(|(q, x)| if q % 2 == 0 { x + shift } else { *x }).collect()).unwrap();
        prop_assert!((wasserstein2(&a, &b).unwrap() - shift.abs()).abs() < 1e-9);
        prop_assert!((wasserstein1(&a, &b).unwrap() - shift.abs()).abs() < 1e-9);
    }

    #[test]
    fn w1_never_exceeds_w2(seed in any::<u64>(), n in 1usize..7, m in 1usize..7) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let a = random_cloud(&mut r, n, 2);
        let b = random_cloud(&mut r, m, 2);
        prop_assert!(wasserstein1(&a, &b).unwrap() <= wasserstein2(&a, &b).unwrap() + 1e-10);
    }
}
