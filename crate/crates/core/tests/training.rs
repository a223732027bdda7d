use lipcert_core::data::{random_label_task, separable_blobs, LabeledDataset, Labels};
use lipcert_core::experiments::{
    consistency_experiment, constrained_net_for, random_label_experiment, ConsistencyConfig, RandomLabelConfig, Sequential,
};
use lipcert_core::linalg::Matrix;
use lipcert_core::losses::{bce_tau, LossSpec};
use lipcert_core::net::{Activation, LipNet, NetSpec};
use lipcert_core::optim::{OptimizerCfg, OptimizerKind};
use lipcert_core::train::{evaluate, train, train_objective, Objective};
use lipcert_core::{seeded_rng, Model};
use lipcert_oracles::{nearest_neighbor_margin, SplitMix};

fn blobs_cfg(epochs: usize) -> OptimizerCfg {
    OptimizerCfg {
        kind: OptimizerKind::adam(3e-3),
        epochs,
        batch_size: 32,
        seed: 7,
    }
}

#[test]
fn identical_seeds_give_identical_histories() {
    let data = separable_blobs(120, 3);
    let run = || {
        let mut net = constrained_net_for(&data, &[16, 16], 3).unwrap();
        let h = train(&mut net, &data, &LossSpec::Hkr { alpha: 10.0, m: 0.1 }, &blobs_cfg(5), &data).unwrap();
        (h, net)
    };
    let (h1, n1) = run();
    let (h2, n2) = run();
    assert_eq!(h1.len(), 5);
    for (a, b) in h1.records.iter().zip(&h2.records) {
        assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
        assert_eq!(a.mcr.to_bits(), b.mcr.to_bits());
    }
    for (a, b) in n1.dense_layers().zip(n2.dense_layers()) {
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
    }
}

#[test]
fn hinge_separates_blobs() {
    let data = separable_blobs(200, 1);
    let mut net = constrained_net_for(&data, &[32, 32], 1).unwrap();
    let h = train(&mut net, &data, &LossSpec::HingeM { m: 0.1 }, &blobs_cfg(200), &data).unwrap();
    assert_eq!(h.last().unwrap().train_accuracy, 1.0);
}

#[test]
fn every_epoch_keeps_the_constraints() {
    let data = separable_blobs(100, 2);
    let mut net = constrained_net_for(&data, &[16, 16, 16], 2).unwrap();
    let mut epochs = 0;
    train_objective(&mut net, &data, &Objective::Loss(LossSpec::BceTau { tau: 4.0 }), &blobs_cfg(10), &data, |rec, net| {
        assert!(rec.lipschitz_upper_bound <= 1.0 + 1e-5, "{}", rec.lipschitz_upper_bound);
        assert!(net.max_orthogonality_residual() <= 1e-6, "{}", net.max_orthogonality_residual());
        epochs += 1;
        true
    })
    .unwrap();
    assert_eq!(epochs, 10);
}

#[test]
fn bce_gradient_does_not_vanish_on_separable_data() {
    let data = separable_blobs(100, 4);
    let mut net = constrained_net_for(&data, &[32, 32], 4).unwrap();
    let h = train(&mut net, &data, &LossSpec::BceTau { tau: 1.0 }, &blobs_cfg(100), &data).unwrap();
    assert_eq!(h.last().unwrap().train_accuracy, 1.0);
    let k = 2.0 * data.diameter();
    let floor = 1.0 / (1.0 + k.exp());
    let Labels::Binary(y) = &data.labels else { unreachable!() };
    for (i, &yi) in y.iter().enumerate() {
        let f = net.evaluate(data.point(i))[0];
        let (_, g) = bce_tau(f, yi, 1.0);
        assert!(g.abs() >= floor, "{} < {floor}", g.abs());
    }
}

#[test]
fn small_lr_sgd_descends_on_a_linear_model() {
    let mut rng = seeded_rng(5);
    let data = separable_blobs(60, 5);
    for loss in [LossSpec::BceTau { tau: 1.0 }, LossSpec::Hkr { alpha: 5.0, m: 0.5 }, LossSpec::HingeM { m: 1.0 }] {
        let mut net = LipNet::init(&NetSpec::unconstrained(2, &[], 1, Activation::Relu), &mut rng).unwrap();
        let cfg = OptimizerCfg {
            kind: OptimizerKind::sgd(1e-3),
            epochs: 1,
            batch_size: data.len(),
            seed: 0,
        };
        let mut last = evaluate(&net, &data, &Objective::Loss(loss)).unwrap().loss;
        for _ in 0..10 {
            train(&mut net, &data, &loss, &cfg, &data).unwrap();
            let now = evaluate(&net, &data, &Objective::Loss(loss)).unwrap().loss;
            assert!(now <= last + 1e-15, "{loss:?}: {now} > {last}");
            last = now;
        }
    }
}

#[test]
fn nearest_neighbor_rule_certifies_half_the_separation() {
    for seed in 0..5 {
        let min_sep = 0.1;
        let data = random_label_task(50, min_sep, seed).unwrap();
        let pts: Vec<[f64; 2]> = (0..data.len()).map(|i| [data.point(i)[0], data.point(i)[1]]).collect();
        let Labels::Binary(y) = &data.labels else { unreachable!() };
        for i in 0..pts.len() {
            assert!(nearest_neighbor_margin(&pts, y, i) >= min_sep / 2.0 - 1e-12);
        }
    }
}

#[test]
fn random_labels_are_fitted_with_certified_margins() {
    let cfg = RandomLabelConfig {
        n: 40,
        min_sep: 0.1,
        margin: 0.025,
        hidden: vec![64, 64, 64],
        optimizer: OptimizerCfg {
            kind: OptimizerKind::adam(3e-3),
            epochs: 3000,
            batch_size: 40,
            seed: 0,
        },
    };
    let r = random_label_experiment(&cfg, 1).unwrap();
    assert!(r.train_accuracy >= 0.99, "{}", r.train_accuracy);
    assert!(r.certified_fraction >= 0.9, "{}", r.certified_fraction);
}

#[test]
fn consistency_rows_are_reproducible() {
    let mut rng = SplitMix(6);
    let make = |rng: &mut SplitMix, n: usize| {
        let mut pts = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            pts.push(rng.normal() + s);
            pts.push(rng.normal());
            y.push(s);
        }
        LabeledDataset::binary(Matrix::new(n, 2, pts).unwrap(), y).unwrap()
    };
    let base = make(&mut rng, 80);
    let test = make(&mut rng, 80);
    let cfg = ConsistencyConfig {
        fractions: vec![1.0, 1.0],
        taus: vec![0.5],
        seeds: vec![3],
        hidden: vec![8, 8],
        optimizer: blobs_cfg(3),
        baseline: false,
    };
    let rows = consistency_experiment(&base, &test, &cfg, &Sequential).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].loss_gap().to_bits(), rows[1].loss_gap().to_bits());
    assert_eq!(rows[0].accuracy_gap().to_bits(), rows[1].accuracy_gap().to_bits());
}
