use flockmf::kernels::{alignment_eval, monotonicity_gap, noise_eval, pair_monotonicity_gap, phi_eval};
use flockmf::{AlignmentSpec, KernelSpec, NoiseSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, d)
}

#[test]
fn phi_examples() {
    assert_eq!(phi_eval(&KernelSpec::power_law(0.5), 0.0).unwrap(), 1.0);
    assert_eq!(phi_eval(&KernelSpec::power_law(0.0), 7.3).unwrap(), 1.0);
    assert!((phi_eval(&KernelSpec::power_law(0.5), 3.0).unwrap() - 0.5).abs() < 1e-15);
    assert!(phi_eval(&KernelSpec::power_law(0.5), -1.0).is_err());
}

#[test]
fn alignment_examples() {
    let a = |p: f64, v: &[f64]| alignment_eval(&AlignmentSpec { p }, v).unwrap();
    assert_eq!(a(2.0, &[3.0, 4.0]), vec![3.0, 4.0]);
    let v = a(3.0, &[3.0, 4.0]);
    assert!((v[0] - 15.0).abs() < 1e-12 && (v[1] - 20.0).abs() < 1e-12);
    assert_eq!(a(4.0, &[0.0, 0.0]), vec![0.0, 0.0]);
    assert_eq!(a(2.5, &[0.0]), vec![0.0]);
    assert!(alignment_eval(&AlignmentSpec { p: 1.5 }, &[1.0]).is_err());
}

#[test]
fn monotonicity_examples() {
    // a−c = (1,−1), b−c = (−1,−1), both of norm √2; with p = 3,
    // (a−b)·(A(a−c) − A(b−c)) = (2,0)·√2(2,0) = 4√2 and 2^{-1}|a−b|³ = 4
    let g = monotonicity_gap(&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], 3.0).unwrap();
    assert!((g - (4.0 * 2f64.sqrt() - 4.0)).abs() < 1e-12);
    assert_eq!(pair_monotonicity_gap(&[1.0, 0.0], &[-1.0, 0.0], 2.0).unwrap(), 0.0);
    assert_eq!(pair_monotonicity_gap(&[0.3, -2.0], &[0.3, -2.0], 4.5).unwrap(), 0.0);
    assert!(monotonicity_gap(&[1.0], &[1.0, 2.0], &[0.0], 3.0).is_err());
}

#[test]
fn noise_examples() {
    assert_eq!(noise_eval(&NoiseSpec::linear(2.0), 0.0).unwrap(), 0.0);
    assert_eq!(noise_eval(&NoiseSpec::linear(2.0), 0.5).unwrap(), 1.0);
    assert_eq!(noise_eval(&NoiseSpec::linear(0.0), 1.0).unwrap(), 0.0);
    assert!(noise_eval(&NoiseSpec::linear(2.0), -0.1).is_err());
}

#[test]
fn gaps_on_many_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = f64::INFINITY;
    for _ in 0..100_000 {
        let d = rng.random_range(1..=3);
        let p = rng.random_range(2.0..6.0);
        let mut draw = || (0..d).map(|_| rng.random_range(-5.0..5.0)).collect::<Vec<f64>>();
        let (a, b, c) = (draw(), draw(), draw());
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let scale = 1.0 + norm(&ab).powf(p);
        worst = worst.min(monotonicity_gap(&a, &b, &c, p).unwrap() / scale);
        worst = worst.min(pair_monotonicity_gap(&a, &b, p).unwrap() / scale);
    }
    assert!(worst >= -1e-9, "worst scaled gap {worst}");
}

#[test]
fn sandwich_holds_for_the_canonical_kernel() {
    for alpha in [0.0, 0.25, 0.5, 0.9] {
        let k = KernelSpec::power_law(alpha);
        assert!(k.is_fat_tailed());
        for i in 1..2000 {
            let r = 1.0 + i as f64 * 0.37;
            let (lo, hi) = k.sandwich_gaps(r);
            assert!(lo >= -1e-15 && hi >= -1e-15, "alpha {alpha} r {r}");
        }
    }
}

#[test]
fn table_kernel_validation() {
    assert!(KernelSpec::table(0.5, vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.6]).validate().is_err());
    assert!(KernelSpec::table(0.5, vec![1.0, 2.0], vec![1.0, 0.5]).validate().is_err());
    let k = KernelSpec::table(0.0, vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 0.0]);
    k.validate().unwrap();
    assert!((k.eval(1.5) - 0.5).abs() < 1e-15);
    assert_eq!(k.eval(10.0), 0.0);
    assert!(!k.is_fat_tailed());
}

proptest! {
    #[test]
    fn phi_is_non_increasing(alpha in 0.0f64..1.0, r1 in 0.0f64..1e3, dr in 0.0f64..1e3) {
        let k = KernelSpec::power_law(alpha);
        prop_assert!(k.eval(r1) >= k.eval(r1 + dr));
        prop_assert!(k.eval(r1) <= 1.0);
    }

    #[test]
    fn alignment_is_odd(p in 2.0f64..6.0, v in vector(3)) {
        let s = AlignmentSpec { p };
        let a = alignment_eval(&s, &v).unwrap();
        let m: Vec<f64> = v.iter().map(|x| -x).collect();
        let b = alignment_eval(&s, &m).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x + y == 0.0));
    }

    #[test]
    fn alignment_magnitude(p in 2.0f64..6.0, v in vector(2)) {
        prop_assume!(norm(&v) > 1e-6);
        let a = alignment_eval(&AlignmentSpec { p }, &v).unwrap();
        let want = norm(&v).powf(p - 1.0);
        prop_assert!((norm(&a) - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn monotonicity_gap_is_nonnegative(p in 2.0f64..6.0, d in 1usize..=3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || (0..d).map(|_| rng.random_range(-10.0..10.0)).collect::<Vec<f64>>();
        let (a, b, c) = (draw(), draw(), draw());
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let tol = 1e-9 * (1.0 + norm(&ab).powf(p));
        prop_assert!(monotonicity_gap(&a, &b, &c, p).unwrap() >= -tol);
        prop_assert!(pair_monotonicity_gap(&a, &b, p).unwrap() >= -tol);
    }

    #[test]
    fn equality_at_the_midpoint(p in 2.0f64..6.0, a in vector(3), b in vector(3)) {
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let g = monotonicity_gap(&a, &b, &c, p).unwrap();
        prop_assert!(g.abs() < 1e-10 * (1.0 + norm(&ab).powf(p)), "gap {}", g);
        prop_assert_eq!(monotonicity_gap(&a, &a, &c, p).unwrap(), 0.0);
    }

    #[test]
    fn linear_noise_is_copositive(sigma2 in 1e-6f64..10.0, s in 1e-9f64..1.0) {
        let n = NoiseSpec::linear(sigma2);
        prop_assert!(noise_eval(&n, s).unwrap() > 0.0);
        prop_assert_eq!(noise_eval(&n, 0.0).unwrap(), 0.0);
    }
}
