//! End-to-end checks of the library's claims, each with a fixed seed and a
//! pass threshold. The `acceptance` test target prints one line per check.

use std::time::{Duration, Instant};

use lipcert_core::data::{noisy_gaussians, two_moons};
use lipcert_core::experiments::{
    consistency_experiment, constrained_net_for, divergence_experiment, median, pareto_sweep, random_label_experiment,
    sdf_fit_experiment, summarize_pareto, tau_fit_experiment, train_kr_potential, ConsistencyConfig, DivergenceConfig,
    KrConfig, RandomLabelConfig, SdfFitConfig, Sequential, SweepConfig, TauFitConfig,
};
use lipcert_core::geometry::{crossing_direction, signed_distance, snowflake_ring};
use lipcert_core::linalg::{bjorck_orthogonalize, power_iteration, Matrix, DEFAULT_BJORCK_ITERS};
use lipcert_core::losses::{small_tau_limit_check, LossSpec};
use lipcert_core::net::{LipNet, NetSpec};
use lipcert_core::optim::{OptimizerCfg, OptimizerKind};
use lipcert_core::robustness::{binary_certificate, pgd_l2_with, PgdConfig};
use lipcert_core::train::train;
use lipcert_core::transport::{
    best_threshold_accuracy, gaussian_pair, packing_bounds, pathological_diracs, w1_exact_1d, w1_exact_assignment,
    DiscreteDist,
};
use lipcert_core::{seeded_rng, Error, Model};
use lipcert_oracles::{brute_force_assignment, fd_gradient, singular_values, w1_sorted_1d, SplitMix};

/// Outcome of one check: pass flag and the measured values.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }
}

pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    /// Wall-clock limit; exceeding it fails the check.
    pub budget: Option<Duration>,
    pub run: fn() -> Result<Verdict, Error>,
}

pub const CRITERIA: [Criterion; 12] = [
    Criterion {
        id: 1,
        name: "weak_classifier_bound",
        budget: Some(Duration::from_secs(60)),
        run: weak_classifier_bound,
    },
    Criterion {
        id: 2,
        name: "kr_dual_tightness",
        budget: Some(Duration::from_secs(300)),
        run: kr_dual_tightness,
    },
    Criterion {
        id: 3,
        name: "certificate_soundness",
        budget: None,
        run: certificate_soundness,
    },
    Criterion {
        id: 4,
        name: "sdf_tightness",
        budget: None,
        run: sdf_tightness,
    },
    Criterion {
        id: 5,
        name: "sdf_expressiveness",
        budget: Some(Duration::from_secs(600)),
        run: sdf_expressiveness,
    },
    Criterion {
        id: 6,
        name: "temperature_controls_fitting",
        budget: None,
        run: temperature_controls_fitting,
    },
    Criterion {
        id: 7,
        name: "pareto_direction",
        budget: None,
        run: pareto_direction,
    },
    Criterion {
        id: 8,
        name: "bce_divergence",
        budget: None,
        run: bce_divergence,
    },
    Criterion {
        id: 9,
        name: "consistency",
        budget: None,
        run: consistency,
    },
    Criterion {
        id: 10,
        name: "random_label_fitting",
        budget: None,
        run: random_label_fitting,
    },
    Criterion {
        id: 11,
        name: "numerical_kernels",
        budget: None,
        run: numerical_kernels,
    },
    Criterion {
        id: 12,
        name: "packing_arithmetic",
        budget: None,
        run: packing_arithmetic,
    },
];

/// Runs one check, failing it on error or when it overruns its budget.
pub fn evaluate(c: &Criterion) -> (Verdict, Duration) {
    let start = Instant::now();
    let mut v = (c.run)().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
    let elapsed = start.elapsed();
    if let Some(b) = c.budget {
        if elapsed > b {
            v.passed = false;
            v.detail.push_str(&format!("; over budget ({:.0} s > {} s)", elapsed.as_secs_f64(), b.as_secs()));
        }
    }
    (v, elapsed)
}

fn adam(lr: f64, epochs: usize, batch_size: usize) -> OptimizerCfg {
    OptimizerCfg {
        kind: OptimizerKind::adam(lr),
        epochs,
        batch_size,
        seed: 0,
    }
}

fn scalar_outputs(net: &LipNet, d: &DiscreteDist) -> Vec<f64> {
    (0..d.len()).map(|i| net.evaluate(d.atom(i))[0]).collect()
}

pub fn weak_classifier_bound() -> Result<Verdict, Error> {
    let (p, q) = pathological_diracs(20)?;
    let exact = w1_exact_1d(&p, &q)?;
    let oracle = w1_sorted_1d(p.atoms().data(), q.atoms().data());
    let cfg = KrConfig {
        hidden: vec![32, 32],
        optimizer: OptimizerKind::adam(0.01),
        max_steps: 20_000,
        target: Some(0.99 * oracle),
        seed: 0,
    };
    let r = train_kr_potential(&p, &q, &cfg)?;
    let (_, acc) = best_threshold_accuracy(&scalar_outputs(&r.net, &p), &scalar_outputs(&r.net, &q))?;
    let passed = (exact - oracle).abs() <= 1e-12 && r.dual >= 2.97 && acc <= 0.55;
    Ok(Verdict::new(
        passed,
        format!("W1 {exact} (oracle {oracle}), dual {:.4} after {} steps, threshold accuracy {acc:.3}", r.dual, r.steps),
    ))
}

pub fn kr_dual_tightness() -> Result<Verdict, Error> {
    let mut passed = true;
    let mut parts = Vec::new();
    for seed in 0..5u64 {
        let (p, q) = gaussian_pair(32, 2, 2.0 + 0.25 * seed as f64, seed)?;
        let exact = w1_exact_assignment(&p, &q)?;
        let cfg = KrConfig {
            hidden: vec![32, 32],
            optimizer: OptimizerKind::adam(0.01),
            max_steps: 5000,
            target: Some(0.99 * exact),
            seed,
        };
        let r = train_kr_potential(&p, &q, &cfg)?;
        let peak = r.trace.iter().copied().fold(r.dual, f64::max);
        let ratio = r.dual / exact;
        passed &= ratio >= 0.95 && peak <= exact + 1e-6;
        parts.push(format!("{:.4}/{exact:.4}", r.dual));
    }
    Ok(Verdict::new(passed, format!("dual/exact per seed: {}", parts.join(", "))))
}

pub fn certificate_soundness() -> Result<Verdict, Error> {
    let mut points = 0;
    let mut violations = 0;
    for seed in 0..3u64 {
        let train_data = two_moons(300, 0.1, 10 + seed);
        let test_data = two_moons(400, 0.1, 20 + seed);
        let mut net = constrained_net_for(&train_data, &[32, 32], seed)?;
        let opt = OptimizerCfg {
            seed,
            ..adam(3e-3, 30, 32)
        };
        train(&mut net, &train_data, &LossSpec::Hkr { alpha: 10.0, m: 0.1 }, &opt, &test_data)?;
        for i in 0..test_data.len() {
            let x = test_data.point(i);
            let cert = binary_certificate(&net, x)?;
            let eps = 0.999 * cert.radius;
            let cfg = PgdConfig {
                seed: i as u64,
                ..PgdConfig::for_eps(eps)
            };
            if pgd_l2_with(&net, x, cert.predicted, eps, &cfg).found {
                violations += 1;
            }
            points += 1;
        }
    }
    Ok(Verdict::new(
        points >= 1000 && violations == 0,
        format!("{violations} flips in {points} points (3 nets, 200 steps, 3 restarts)"),
    ))
}

pub fn sdf_tightness() -> Result<Verdict, Error> {
    let (b, lab) = snowflake_ring(4)?;
    let mut rng = SplitMix(2024);
    let n = 10_000;
    let mut crossed = 0;
    for _ in 0..n {
        let x = [rng.range(-1.2, 1.2), rng.range(-1.2, 1.2)];
        let f = signed_distance(&b, &lab, x);
        let d = crossing_direction(&b, &lab, x, 1e-6);
        let len = f.abs() * (1.0 + 1e-6);
        let z = [x[0] + len * d[0], x[1] + len * d[1]];
        if lab.is_positive(&b, z) != lab.is_positive(&b, x) {
            crossed += 1;
        }
    }
    let rate = crossed as f64 / n as f64;
    Ok(Verdict::new(rate >= 0.99, format!("{crossed}/{n} steps cross ({:.2}%)", 100.0 * rate)))
}

pub fn sdf_expressiveness() -> Result<Verdict, Error> {
    let cfg = SdfFitConfig {
        optimizer: adam(3e-3, 200, 64),
        ..SdfFitConfig::default()
    };
    let pixel = cfg.pixel();
    let mut reached = 0;
    let mut parts = Vec::new();
    for seed in 0..3 {
        let r = sdf_fit_experiment(&SdfFitConfig { stop_mae: pixel, ..cfg.clone() }, seed)?;
        reached += usize::from(r.reached);
        parts.push(format!("{:.4} in {} epochs", r.final_mae, r.epochs));
    }
    Ok(Verdict::new(
        reached >= 2,
        format!("{reached}/3 seeds below MAE {pixel}: {}", parts.join(", ")),
    ))
}

pub fn temperature_controls_fitting() -> Result<Verdict, Error> {
    let mut fits = 0;
    let mut smooths = 0;
    for seed in 0..3 {
        let cfg = |tau| TauFitConfig {
            tau,
            samples: 1000,
            hidden: vec![64, 64, 64],
            optimizer: adam(3e-3, 100, 64),
        };
        fits += usize::from(tau_fit_experiment(&cfg(8.0), seed)?.fits_minority());
        smooths += usize::from(tau_fit_experiment(&cfg(0.25), seed)?.smooths_minority());
    }
    Ok(Verdict::new(
        fits == 3 && smooths == 3,
        format!("tau 8 fits minority centers on {fits}/3 seeds, tau 0.25 smooths them on {smooths}/3"),
    ))
}

fn is_monotone(v: &[f64], increasing: bool) -> bool {
    v.windows(2).all(|w| if increasing { w[1] >= w[0] } else { w[1] <= w[0] })
}

pub fn pareto_direction() -> Result<Verdict, Error> {
    let train_data = two_moons(500, 0.15, 100);
    let test_data = two_moons(1000, 0.15, 200);
    let cfg = SweepConfig {
        hidden: vec![64, 64],
        optimizer: adam(3e-3, 100, 64),
        seeds: vec![0, 1, 2],
        eps_list: vec![0.1],
    };
    let mut passed = true;
    let mut parts = Vec::new();
    let families: [(&str, Vec<LossSpec>); 2] = [
        ("hkr alpha 1/10/100", [1.0, 10.0, 100.0].map(|alpha| LossSpec::Hkr { alpha, m: 0.1 }).to_vec()),
        ("cce tau 0.25/1/4/16", [0.25, 1.0, 4.0, 16.0].map(|tau| LossSpec::CceTau { tau }).to_vec()),
    ];
    for (name, grid) in families {
        let summary = summarize_pareto(&pareto_sweep(&train_data, &test_data, &grid, &cfg, &Sequential)?);
        let acc: Vec<f64> = summary.iter().map(|s| s.clean_accuracy).collect();
        let mcr: Vec<f64> = summary.iter().map(|s| s.mcr).collect();
        passed &= is_monotone(&acc, true) && is_monotone(&mcr, false);
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/");
        parts.push(format!("{name}: accuracy {}, robustness {}", fmt(&acc), fmt(&mcr)));
    }
    Ok(Verdict::new(passed, parts.join("; ")))
}

pub fn bce_divergence() -> Result<Verdict, Error> {
    let r = divergence_experiment(&DivergenceConfig::default())?;
    let w: Vec<f64> = r.linear.weight.iter().map(|w| w.abs()).collect();
    let loss = *r.linear.loss.last().unwrap_or(&f64::NAN);
    let last = *w.last().unwrap_or(&f64::NAN);
    let growing = w.len() > 100 && w[w.len() - 101..].windows(2).all(|p| p[1] > p[0]);
    let bound = r.constrained.records.iter().map(|e| e.lipschitz_upper_bound).fold(0.0, f64::max);
    Ok(Verdict::new(
        loss < 1e-3 && last > 10.0 && growing && bound <= 1.0 + 1e-5 && !r.constrained.is_empty(),
        format!(
            "loss {loss:.2e}, |W| {last:.3}, increasing over final 100 steps: {growing}; constrained bound max {bound:.12}"
        ),
    ))
}

pub fn consistency() -> Result<Verdict, Error> {
    let base = noisy_gaussians(2000, 7);
    let test = noisy_gaussians(5000, 8);
    let cfg = ConsistencyConfig {
        fractions: vec![0.05, 1.0],
        taus: vec![0.5],
        seeds: (0..5).collect(),
        hidden: vec![64, 64],
        optimizer: adam(3e-3, 100, 64),
        baseline: true,
    };
    let rows = consistency_experiment(&base, &test, &cfg, &Sequential)?;
    let gap = |n: usize, constrained: bool| {
        let g: Vec<f64> = rows
            .iter()
            .filter(|r| r.train_size == n && r.constrained == constrained)
            .map(|r| r.loss_gap())
            .collect();
        median(&g)
    };
    let (small, large, baseline) = (gap(100, true), gap(2000, true), gap(100, false));
    Ok(Verdict::new(
        large <= 0.5 * small && baseline >= 2.0 * small,
        format!("median loss gap n=100 {small:.4}, n=2000 {large:.4}; unconstrained n=100 {baseline:.4}"),
    ))
}

pub fn random_label_fitting() -> Result<Verdict, Error> {
    let (n, min_sep, margin) = (200, 0.2, 0.05);
    let cfg = RandomLabelConfig {
        n,
        min_sep,
        margin,
        hidden: vec![64, 64, 64],
        optimizer: adam(3e-3, 3000, 64),
    };
    match random_label_experiment(&cfg, 0) {
        Ok(r) => Ok(Verdict::new(
            r.train_accuracy >= 0.99 && r.certified_fraction >= 0.9,
            format!("accuracy {:.3}, certified at {margin}: {:.3}", r.train_accuracy, r.certified_fraction),
        )),
        Err(Error::Unsatisfiable { placed, requested }) => {
            // disks of radius min_sep/2 around the points must fit in the padded square
            let disks = n as f64 * std::f64::consts::PI * (min_sep / 2.0).powi(2);
            let room = (1.0 + min_sep).powi(2);
            Ok(Verdict::new(
                false,
                format!(
                    "task infeasible: placed {placed}/{requested} points; {requested} disjoint disks need area {disks:.2} > {room:.2}"
                ),
            ))
        }
        Err(e) => Err(e),
    }
}

fn gram_residual(q: &Matrix) -> f64 {
    let n = q.cols();
    let mut res = 0.0;
    for i in 0..n {
        for j in 0..n {
            let g: f64 = (0..q.rows()).map(|r| q.get(r, i) * q.get(r, j)).sum();
            let e = g - if i == j { 1.0 } else { 0.0 };
            res += e * e;
        }
    }
    res.sqrt()
}

/// Relative error between the analytic and finite-difference gradients of
/// `Σ ⟨u, f(x)⟩` with respect to every weight, bias and input.
fn backward_error(net: &LipNet, x: &Matrix, u: &Matrix) -> Result<f64, Error> {
    let objective = |m: &LipNet, x: &Matrix| -> f64 {
        let out = m.forward(x).expect("shapes fixed");
        out.data().iter().zip(u.data()).map(|(a, b)| a * b).sum()
    };
    let grads = net.backward(x, u)?;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (li, (d, g)) in net.dense_layers().zip(&grads.dense).enumerate() {
        let n_w = d.weights.data().len();
        for p in 0..n_w + d.bias.len() {
            let f = |v: &[f64]| {
                let mut m = net.clone();
                let d = m.dense_layers_mut().nth(li).expect("layer exists");
                if p < n_w {
                    d.weights.data_mut()[p] = v[0];
                } else {
                    d.bias[p - n_w] = v[0];
                }
                objective(&m, x)
            };
            let (at, exact) = if p < n_w {
                (d.weights.data()[p], g.d_weights.data()[p])
            } else {
                (d.bias[p - n_w], g.d_bias[p - n_w])
            };
            numeric.push(fd_gradient(f, &[at], 1e-6)[0]);
            analytic.push(exact);
        }
    }
    for r in 0..x.rows() {
        let f = |v: &[f64]| {
            let mut xm = x.clone();
            xm.row_mut(r).copy_from_slice(v);
            objective(net, &xm)
        };
        numeric.extend(fd_gradient(f, x.row(r), 1e-6));
        analytic.extend_from_slice(grads.input_grad.row(r));
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
    Ok(diff / scale)
}

pub fn numerical_kernels() -> Result<Verdict, Error> {
    let mut rng = SplitMix(31);

    let mut power = 0.0f64;
    for case in 0..100 {
        let (rows, cols) = (2 + case % 9, 2 + (case / 9) % 7);
        let w = Matrix::from_fn(rows, cols, |_, _| rng.normal());
        let exact = singular_values(rows, cols, w.data())[0];
        let est = power_iteration(&w, 100_000, 1e-15)?.sigma;
        power = power.max((est - exact).abs() / exact);
    }

    let mut gram = 0.0f64;
    for n in [4, 8, 16, 32] {
        for _ in 0..5 {
            let w = Matrix::from_fn(n, n, |_, _| rng.normal());
            let sigma = singular_values(n, n, w.data())[0];
            let q = bjorck_orthogonalize(&w.scaled(1.0 / sigma), DEFAULT_BJORCK_ITERS, 1e-9)?.matrix;
            gram = gram.max(gram_residual(&q));
        }
    }

    let mut backward = 0.0f64;
    for seed in 0..20 {
        let net = LipNet::init(&NetSpec::constrained(2, &[8, 8], 1), &mut seeded_rng(seed))?;
        let x = Matrix::from_fn(3, 2, |_, _| rng.normal());
        let u = Matrix::from_fn(3, 1, |_, _| rng.normal());
        backward = backward.max(backward_error(&net, &x, &u)?);
    }

    let mut w1 = 0.0f64;
    for case in 0..50 {
        let n = 1 + case % 12;
        let a: Vec<f64> = (0..n).map(|_| rng.range(-3.0, 3.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.normal() * 2.0).collect();
        let (p, q) = (DiscreteDist::uniform_1d(&a)?, DiscreteDist::uniform_1d(&b)?);
        let one_d = w1_exact_1d(&p, &q)?;
        let assignment = w1_exact_assignment(&p, &q)?;
        let cost: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| (x - y).abs() / n as f64).collect()).collect();
        let brute = if n <= 7 { brute_force_assignment(&cost) } else { w1_sorted_1d(&a, &b) };
        w1 = w1.max((one_d - assignment).abs()).max((one_d - brute).abs());
    }

    let mut tau = 0.0f64;
    for seed in 0..10 {
        let (p, q) = gaussian_pair(50, 2, 1.5, 100 + seed)?;
        let net = LipNet::init(&NetSpec::constrained(2, &[16, 16], 1), &mut seeded_rng(seed))?;
        tau = tau.max(small_tau_limit_check(&scalar_outputs(&net, &p), &scalar_outputs(&net, &q), 1e-4).abs());
    }

    let passed = power <= 1e-8 && gram <= 1e-7 && backward <= 1e-5 && w1 <= 1e-9 && tau <= 1e-3;
    Ok(Verdict::new(
        passed,
        format!(
            "power iteration {power:.1e}, Gram residual {gram:.1e}, backward {backward:.1e}, 1D vs assignment {w1:.1e}, small tau {tau:.1e}"
        ),
    ))
}

pub fn packing_arithmetic() -> Result<Verdict, Error> {
    use std::f64::consts::PI;
    // (m, n, vol X, vol B, lower, upper) worked by hand
    let cases = [
        (1.0, 2, PI, PI, 1.0, 9.0),
        (0.5, 1, 2.0, 2.0, 2.0, 6.0),
        (0.1, 2, 1.0, PI, 100.0 / PI, 900.0 / PI),
        (2.0, 3, 8.0, 1.0, 1.0, 27.0),
        (0.25, 2, 4.0, 2.0, 32.0, 288.0),
    ];
    let mut worst = 0.0f64;
    for (m, n, vx, vb, lo, hi) in cases {
        let (l, h) = packing_bounds(m, n, vx, vb)?;
        worst = worst.max(((l - lo) / lo).abs()).max(((h - hi) / hi).abs());
    }
    Ok(Verdict::new(worst <= 1e-12, format!("5 cases, worst relative error {worst:.1e}")))
}

