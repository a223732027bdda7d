use lipcert_core::linalg::Matrix;
use lipcert_core::net::{LipNet, NetSpec};
use lipcert_core::transport::*;
use lipcert_core::{seeded_rng, Model};
use lipcert_oracles::{brute_force_assignment, w1_sorted_1d, SplitMix};

fn cloud(rng: &mut SplitMix, n: usize, dim: usize, shift: f64) -> DiscreteDist {
    let m = Matrix::from_fn(n, dim, |_, _| rng.normal() + shift);
    DiscreteDist::uniform(m).unwrap()
}

fn column(d: &DiscreteDist) -> Vec<f64> {
    d.atoms().data().to_vec()
}

#[test]
fn one_d_agrees_with_assignment_on_fifty_pairs() {
    let mut rng = SplitMix(11);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let n = 1 + k % 20;
        let p = cloud(&mut rng, n, 1, 0.0);
        let q = cloud(&mut rng, n, 1, 0.5);
        let a = w1_exact_1d(&p, &q).unwrap();
        let b = w1_exact_assignment(&p, &q).unwrap();
        worst = worst.max((a - b).abs());
        assert!((a - w1_sorted_1d(&column(&p), &column(&q))).abs() < 1e-12);
    }
    assert!(worst <= 1e-9, "{worst}");
}

#[test]
fn hungarian_matches_brute_force() {
    let mut rng = SplitMix(12);
    for n in 1..=7 {
        for _ in 0..10 {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.uniform() * 10.0).collect()).collect();
            let m = Matrix::from_rows(&rows).unwrap();
            let assignment = hungarian(&m).unwrap();
            let mut seen = vec![false; n];
            for &j in &assignment {
                assert!(!seen[j]);
                seen[j] = true;
            }
            let cost: f64 = assignment.iter().enumerate().map(|(i, &j)| rows[i][j]).sum();
            assert!((cost - brute_force_assignment(&rows)).abs() < 1e-9);
        }
    }
}

#[test]
fn w1_is_a_metric_on_samples() {
    let mut rng = SplitMix(13);
    for _ in 0..20 {
        let p = cloud(&mut rng, 8, 2, 0.0);
        let q = cloud(&mut rng, 8, 2, 1.0);
        let r = cloud(&mut rng, 8, 2, -0.5);
        let pq = w1_exact_assignment(&p, &q).unwrap();
        let qp = w1_exact_assignment(&q, &p).unwrap();
        let pr = w1_exact_assignment(&p, &r).unwrap();
        let rq = w1_exact_assignment(&r, &q).unwrap();
        assert!(w1_exact_assignment(&p, &p).unwrap().abs() < 1e-15);
        assert!((pq - qp).abs() < 1e-12);
        assert!(pq <= pr + rq + 1e-12);
        assert!(pq >= 0.0);
    }
}

#[test]
fn w1_scales_and_ignores_translation() {
    let mut rng = SplitMix(14);
    for _ in 0..10 {
        let p = cloud(&mut rng, 10, 3, 0.0);
        let q = cloud(&mut rng, 10, 3, 0.3);
        let base = w1_exact_assignment(&p, &q).unwrap();
        let map = |d: &DiscreteDist, s: f64, t: f64| {
            let m = Matrix::from_fn(d.len(), d.dim(), |i, j| s * d.atom(i)[j] + t);
            DiscreteDist::uniform(m).unwrap()
        };
        let scaled = w1_exact_assignment(&map(&p, 2.5, 0.0), &map(&q, 2.5, 0.0)).unwrap();
        let moved = w1_exact_assignment(&map(&p, 1.0, 7.0), &map(&q, 1.0, 7.0)).unwrap();
        assert!((scaled - 2.5 * base).abs() < 1e-9 * base.max(1.0));
        assert!((moved - base).abs() < 1e-9 * base.max(1.0));
    }
}

#[test]
fn pathological_diracs_have_w1_three() {
    for n in [1, 2, 5, 20, 40] {
        let (p, q) = pathological_diracs(n).unwrap();
        assert!((w1_exact_1d(&p, &q).unwrap() - 3.0).abs() < 1e-12);
        assert!((w1_sorted_1d(&column(&p), &column(&q)) - 3.0).abs() < 1e-12);
        assert!((w1_exact_assignment(&p, &q).unwrap() - 3.0).abs() < 1e-9);
    }
    assert!(pathological_diracs(0).is_err());
}

#[test]
fn random_constrained_potentials_respect_weak_duality() {
    let mut rng = seeded_rng(15);
    for k in 0..20 {
        let (p, q) = gaussian_pair(16, 2, 0.5 + 0.2 * k as f64, k).unwrap();
        let exact = w1_exact_assignment(&p, &q).unwrap();
        let mut net = LipNet::init(&NetSpec::constrained(2, &[16, 16], 1), &mut rng).unwrap();
        net.project();
        for sign in [1.0, -1.0] {
            let scaled = |x: &[f64]| sign * net.evaluate(x)[0];
            let dual = p.expectation(scaled) - q.expectation(scaled);
            assert!(dual <= exact + 1e-6, "{dual} > {exact}");
        }
    }
}

#[test]
fn dual_rejects_unconstrained_nets() {
    let mut rng = seeded_rng(16);
    let net = LipNet::init(
        &NetSpec::unconstrained(1, &[4], 1, lipcert_core::net::Activation::Relu),
        &mut rng,
    )
    .unwrap();
    let (p, q) = pathological_diracs(3).unwrap();
    assert!(kr_dual_estimate(&net, &p, &q).is_err());
}

#[test]
fn threshold_accuracy_is_invariant_under_monotone_maps() {
    let mut rng = SplitMix(17);
    for _ in 0..30 {
        let fp: Vec<f64> = (0..25).map(|_| rng.normal() + 0.4).collect();
        let fq: Vec<f64> = (0..25).map(|_| rng.normal()).collect();
        let (_, a) = best_threshold_accuracy(&fp, &fq).unwrap();
        let g = |v: &f64| (0.7 * v).exp() * 3.0 - 1.0;
        let (_, b) = best_threshold_accuracy(&fp.iter().map(g).collect::<Vec<_>>(), &fq.iter().map(g).collect::<Vec<_>>()).unwrap();
        assert_eq!(a, b);
        // brute force over every candidate threshold
        let mut all: Vec<f64> = fp.iter().chain(&fq).cloned().collect();
        all.push(f64::NEG_INFINITY);
        let brute = all
            .iter()
            .map(|&t| fp.iter().filter(|&&v| v > t).count() + fq.iter().filter(|&&v| v <= t).count())
            .max()
            .unwrap() as f64
            / 50.0;
        assert_eq!(a, brute);
    }
}

#[test]
fn threshold_accuracy_on_the_optimal_potential() {
    // f(x) = -x attains W1 = 3 on these diracs
    let (p, q) = pathological_diracs(20).unwrap();
    let neg = |d: &DiscreteDist| column(d).iter().map(|v| -v).collect::<Vec<_>>();
    let (_, acc) = best_threshold_accuracy(&neg(&p), &neg(&q)).unwrap();
    assert!((acc - 0.525).abs() < 1e-12);
}

#[test]
fn packing_bounds_hand_values() {
    let cases = [
        (1.0, 2, std::f64::consts::PI, std::f64::consts::PI, 1.0, 9.0),
        (0.5, 1, 2.0, 2.0, 2.0, 6.0),
        (0.1, 2, 1.0, std::f64::consts::PI, 100.0 / std::f64::consts::PI, 900.0 / std::f64::consts::PI),
        (2.0, 3, 8.0, 1.0, 1.0, 27.0),
        (0.25, 2, 4.0, 2.0, 32.0, 288.0),
    ];
    for (m, n, vx, vb, lo, hi) in cases {
        let (l, h) = packing_bounds(m, n, vx, vb).unwrap();
        assert!(((l - lo) / lo).abs() <= 1e-12, "{m} {n}: {l} vs {lo}");
        assert!(((h - hi) / hi).abs() <= 1e-12, "{m} {n}: {h} vs {hi}");
    }
    assert!(packing_bounds(0.0, 2, 1.0, 1.0).is_err());
}
