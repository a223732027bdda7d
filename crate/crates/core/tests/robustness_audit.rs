use lipcert_core::data::{two_moons, LabeledDataset, Labels};
use lipcert_core::geometry::{koch_snowflake, sdf_grid_dataset, snowflake_ring, RegionLabeler, SdfModel};
use lipcert_core::net::{LipNet, NetSpec};
use lipcert_core::robustness::*;
use lipcert_core::{seeded_rng, Matrix, Model};
use lipcert_oracles::SplitMix;

fn random_net(seed: u64, out: usize) -> LipNet {
    LipNet::init(&NetSpec::constrained(2, &[16, 16], out), &mut seeded_rng(seed)).unwrap()
}

#[test]
fn pgd_never_beats_the_certificate() {
    let mut rng = SplitMix(3);
    for seed in 0..4 {
        let net = random_net(seed, 1);
        for _ in 0..25 {
            let x = [rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)];
            let cert = binary_certificate(&net, &x).unwrap();
            let below = pgd_l2_with(&net, &x, cert.predicted, 0.999 * cert.radius, &PgdConfig::for_eps(0.999 * cert.radius));
            assert!(!below.found);
            let above = pgd_l2_with(&net, &x, cert.predicted, 3.0 * cert.radius + 0.5, &PgdConfig::for_eps(3.0 * cert.radius + 0.5));
            if above.found {
                assert!(above.norm >= cert.radius);
            }
        }
    }
}

#[test]
fn multiclass_pgd_respects_certificates() {
    let mut rng = SplitMix(4);
    let net = random_net(10, 3);
    for _ in 0..30 {
        let x = [rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)];
        let cert = certificate(&net, &x).unwrap();
        let eps = 0.999 * cert.radius;
        if eps > 0.0 {
            assert!(!pgd_l2_with(&net, &x, cert.predicted, eps, &PgdConfig::for_eps(eps)).found);
        }
    }
}

#[test]
fn exact_sdf_certificates_are_tight() {
    let (b, lab) = snowflake_ring(3).unwrap();
    let model = SdfModel { boundary: b, labeler: lab };
    let mut rng = SplitMix(5);
    let mut found = 0;
    let trials = 40;
    for _ in 0..trials {
        let x = [rng.range(-1.1, 1.1), rng.range(-1.1, 1.1)];
        let cert = binary_certificate(&model, &x).unwrap();
        if cert.radius < 1e-6 {
            continue;
        }
        let eps = cert.radius * 0.999;
        assert!(!pgd_l2_with(&model, &x, cert.predicted, eps, &PgdConfig::for_eps(eps)).found);
        let eps = cert.radius * (1.0 + 1e-3);
        if pgd_l2_with(&model, &x, cert.predicted, eps, &PgdConfig::for_eps(eps)).found {
            found += 1;
        }
    }
    assert!(found as f64 >= 0.95 * trials as f64, "{found}/{trials}");
}

#[test]
fn certified_accuracy_is_below_empirical_and_monotone() {
    let data = two_moons(60, 0.1, 1);
    let net = random_net(2, 1);
    let mut last = f64::INFINITY;
    for eps in [0.0, 0.02, 0.05, 0.1, 0.3] {
        let c = robust_accuracy(&net, &data, eps, RobustnessMode::Certified).unwrap();
        let e = robust_accuracy(&net, &data, eps, RobustnessMode::Empirical).unwrap();
        assert!(c <= e);
        assert!(c <= last);
        last = c;
    }
}

#[test]
fn exact_sdf_on_a_grid() {
    let outer = koch_snowflake(2).unwrap();
    let lab = RegionLabeler::even_odd();
    let grid = sdf_grid_dataset(&outer, &lab, 30, ([-1.2, -1.2], [1.2, 1.2])).unwrap();
    let model = SdfModel {
        boundary: outer,
        labeler: lab,
    };
    let t = grid.targets.clone().unwrap();
    let far = t.iter().filter(|v| v.abs() >= 0.1).count() as f64 / t.len() as f64;
    let ra = robust_accuracy(&model, &grid, 0.1, RobustnessMode::Certified).unwrap();
    assert!((ra - far).abs() < 1e-12, "{ra} vs {far}");
    let mean_abs = t.iter().map(|v| v.abs()).sum::<f64>() / t.len() as f64;
    assert!((mcr(&model, &grid).unwrap() - mean_abs).abs() < 1e-12);
}

#[test]
fn mcr_two_term_form() {
    let data = two_moons(100, 0.2, 3);
    let net = random_net(5, 1);
    let (good, bad) = mcr_terms(&net, &data).unwrap();
    assert!((good - bad - mcr(&net, &data).unwrap()).abs() < 1e-12);
}

#[test]
fn mmcr_matches_brute_force_and_binary_reduction() {
    let data = two_moons(50, 0.2, 4).to_two_class().unwrap();
    let net = random_net(6, 2);
    let Labels::Classes { classes, .. } = &data.labels else { unreachable!() };
    let mut brute = 0.0;
    for (i, &k) in classes.iter().enumerate() {
        let l = net.evaluate(data.point(i));
        brute += l[k] - l[1 - k];
    }
    brute /= data.len() as f64;
    assert!((mmcr(&net, &data).unwrap() - brute).abs() < 1e-12);
    // class 0 ↔ +1: the same number is the mcr of f₀ − f₁
    let diff: Vec<f64> = (0..data.len())
        .map(|i| {
            let l = net.evaluate(data.point(i));
            l[0] - l[1]
        })
        .collect();
    let ys: Vec<f64> = classes.iter().map(|&k| if k == 0 { 1.0 } else { -1.0 }).collect();
    let m: f64 = diff.iter().zip(&ys).map(|(d, y)| d * y).sum::<f64>() / ys.len() as f64;
    assert!((mmcr(&net, &data).unwrap() - m).abs() < 1e-12);
    for d in diff {
        let l = [d, 0.0];
        let k = argmax(&l);
        assert!((multiclass_certificate(&l, k).unwrap() - d.abs() / 2.0).abs() < 1e-15);
    }
}

#[test]
fn mmcr_is_zero_for_equal_logits() {
    let d = LabeledDataset::new(
        Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0]]).unwrap(),
        Labels::Classes {
            classes: vec![0, 1],
            num_classes: 2,
        },
        None,
    )
    .unwrap();
    let flat = LipNet::new(
        vec![lipcert_core::net::Layer::Dense(
            lipcert_core::net::DenseLayer::new(Matrix::zeros(2, 2), vec![0.5, 0.5], lipcert_core::net::Constraint::SpectralNormOnly).unwrap(),
        )],
        lipcert_core::net::Mode::Constrained,
    )
    .unwrap();
    assert_eq!(mmcr(&flat, &d).unwrap(), 0.0);
}

#[test]
fn balance_bias_solves_the_balance_equation() {
    let net = random_net(8, 1);
    let data = two_moons(200, 0.2, 8);
    let (p, q) = data.split_by_label().unwrap();
    let t = balance_bias(&net, &p, &q, 1e-12).unwrap();
    let fp: Vec<f64> = p.iter().map(|x| net.evaluate(x)[0]).collect();
    let fq: Vec<f64> = q.iter().map(|x| net.evaluate(x)[0]).collect();
    // direct evaluation of both error masses
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let zp = fp.iter().map(|f| sig(t - f)).sum::<f64>() / fp.len() as f64;
    let zq = fq.iter().map(|f| sig(f - t)).sum::<f64>() / fq.len() as f64;
    assert!((zp - zq).abs() <= 1e-8);
    let mut prev = f64::NEG_INFINITY;
    for i in 0..200 {
        let g = balance_gap_values(&fp, &fq, -5.0 + i as f64 * 0.05);
        assert!(g > prev);
        prev = g;
    }
}

#[test]
fn pgd_is_reproducible() {
    let net = random_net(1, 1);
    let x = [0.2, -0.4];
    let cert = binary_certificate(&net, &x).unwrap();
    let cfg = PgdConfig { seed: 9, ..PgdConfig::for_eps(2.0) };
    assert_eq!(pgd_l2_with(&net, &x, cert.predicted, 2.0, &cfg), pgd_l2_with(&net, &x, cert.predicted, 2.0, &cfg));
}
