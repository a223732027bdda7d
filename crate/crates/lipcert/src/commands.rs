//! One function per subcommand. Each validates everything it needs, then
//! computes, then writes its outputs (atomically) under `--out`.

use std::path::{Path, PathBuf};

use lipcert_core::data::LabeledDataset;
use lipcert_core::experiments::{
    consistency_experiment, constrained_net_for, divergence_experiment, median, pareto_sweep, sdf_fit_experiment,
    summarize_pareto, ConsistencyConfig, DivergenceConfig, Executor, SdfFitConfig, SweepConfig,
};
use lipcert_core::geometry::{koch_snowflake, sdf_grid_dataset, snowflake_ring, SNOWFLAKE_BBOX};
use lipcert_core::losses::LossSpec;
use lipcert_core::net::{LipNet, Mode};
use lipcert_core::optim::OptimizerKind;
use lipcert_core::robustness::{
    average_certificate, certificate, evaluation_report, mcr, mmcr, predict, robust_accuracy, robust_accuracy_with, Label, PgdConfig,
    PointReport, RobustnessMode,
};
use lipcert_core::train::train;
use lipcert_core::transport::{packing_bounds, w1_exact_1d, w1_exact_assignment};
use lipcert_core::{Error, Model};
use serde_json::json;

use crate::config::{ConsistencySection, ExperimentConfig, TaskConfig};
use crate::error::CliError;
use crate::exec::Rayon;
use crate::formats::{
    boundary_file, evaluation_csv, grid_csv, header, history_csv, num, read_json, write_atomic, write_csv,
    write_json, NetFile, PairFile,
};

/// What a command produced: files written and an optional JSON line for stdout.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: Option<String>,
    pub written: Vec<PathBuf>,
}

fn require_out(out: Option<&Path>) -> Result<&Path, CliError> {
    out.ok_or_else(|| CliError::invalid("--out", "this command writes files and needs an output directory"))
}

fn output_dim(data: &LabeledDataset) -> usize {
    match &data.labels {
        lipcert_core::data::Labels::Binary(_) => 1,
        lipcert_core::data::Labels::Classes { num_classes, .. } => *num_classes,
    }
}

fn eps_columns(eps: &[f64]) -> Vec<String> {
    eps.iter().map(|e| format!("robust_{}", num(*e))).collect()
}

/// `(kind, tau, alpha, m)` with empty cells for unused parameters.
fn loss_columns(l: &LossSpec) -> [String; 4] {
    let e = String::new;
    match *l {
        LossSpec::BceTau { tau } => ["bce".into(), num(tau), e(), e()],
        LossSpec::CceTau { tau } => ["cce".into(), num(tau), e(), e()],
        LossSpec::HingeM { m } => ["hinge".into(), e(), e(), num(m)],
        LossSpec::Wass => ["wasserstein".into(), e(), e(), e()],
        LossSpec::Hkr { alpha, m } => ["hkr".into(), e(), num(alpha), num(m)],
        LossSpec::MulticlassHkr { alpha, m } => ["multiclass_hkr".into(), e(), num(alpha), num(m)],
    }
}

struct Files {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Files {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        }
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.dir.join(name);
        write_atomic(&p, bytes)?;
        self.written.push(p);
        Ok(())
    }

    fn csv(&mut self, name: &str, head: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let p = self.dir.join(name);
        write_csv(&p, head, rows)?;
        self.written.push(p);
        Ok(())
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, v: &T) -> Result<(), CliError> {
        let p = self.dir.join(name);
        write_json(&p, v)?;
        self.written.push(p);
        Ok(())
    }

    fn done(self) -> Outcome {
        Outcome {
            stdout: None,
            written: self.written,
        }
    }
}

// --------------------------------------------------------------------- train

pub fn train_cmd(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Outcome, CliError> {
    let out = require_out(out)?;
    let loss = cfg.require_loss()?;
    let (tr, te) = cfg.task.datasets()?;
    let (tr, te) = if loss.is_multiclass() {
        (tr.to_two_class()?, te.to_two_class()?)
    } else {
        (tr, te)
    };
    let runs = Rayon.map(cfg.seeds.clone(), |seed| -> Result<_, Error> {
        let mut net = constrained_net_for(&tr, &cfg.net.widths, seed)?;
        let history = train(&mut net, &tr, &loss, &cfg.optimizer.cfg(seed), &te)?;
        let robust = cfg
            .eps_list
            .iter()
            .map(|&e| robust_accuracy(&net, &te, e, RobustnessMode::Certified))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((seed, net, history, robust))
    });
    let mut files = Files::new(out);
    let mut rows = Vec::new();
    for run in runs {
        let (seed, net, history, robust) = run?;
        files.bytes(&format!("seed_{seed}/history.csv"), &history_csv(&history)?)?;
        files.json(&format!("seed_{seed}/net.json"), &NetFile::from(&net))?;
        let last = history.last();
        let mut row = vec![
            seed.to_string(),
            last.map_or(String::new(), |r| num(r.train_accuracy)),
            last.map_or(String::new(), |r| num(r.eval_accuracy)),
            last.map_or(String::new(), |r| num(r.mcr)),
            num(average_certificate(&net, &te)),
        ];
        row.extend(robust.iter().map(|&v| num(v)));
        rows.push(row);
    }
    let mut head = header(&["seed", "train_accuracy", "eval_accuracy", "mcr", "average_certificate"]);
    head.extend(eps_columns(&cfg.eps_list));
    files.csv("summary.csv", &head, &rows)?;
    Ok(files.done())
}

// -------------------------------------------------------------------- pareto

pub fn pareto_cmd(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Outcome, CliError> {
    let out = require_out(out)?;
    let grid: Vec<LossSpec> = if cfg.grid.is_empty() {
        vec![cfg.loss.ok_or_else(|| CliError::invalid("grid", "pareto needs a loss grid (or a single loss)"))?.spec()]
    } else {
        cfg.grid.iter().map(|l| l.spec()).collect()
    };
    let (tr, te) = cfg.task.datasets()?;
    let sweep = SweepConfig {
        hidden: cfg.net.widths.clone(),
        optimizer: cfg.optimizer.cfg(0),
        seeds: cfg.seeds.clone(),
        eps_list: cfg.eps_list.clone(),
    };
    let rows = pareto_sweep(&tr, &te, &grid, &sweep, &Rayon)?;
    let mut files = Files::new(out);
    let mut head = header(&["loss", "tau", "alpha", "m", "seed", "clean_accuracy", "mcr", "average_certificate"]);
    head.extend(eps_columns(&cfg.eps_list));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row: Vec<String> = loss_columns(&r.loss).to_vec();
            row.extend([r.seed.to_string(), num(r.clean_accuracy), num(r.mcr), num(r.average_certificate)]);
            row.extend(r.robust_accuracy.iter().map(|&v| num(v)));
            row
        })
        .collect();
    files.csv("runs.csv", &head, &body)?;
    let mut head = header(&["loss", "tau", "alpha", "m", "clean_accuracy", "mcr", "average_certificate"]);
    head.extend(eps_columns(&cfg.eps_list));
    let body: Vec<Vec<String>> = summarize_pareto(&rows)
        .iter()
        .map(|s| {
            let mut row: Vec<String> = loss_columns(&s.loss).to_vec();
            row.extend([num(s.clean_accuracy), num(s.mcr), num(s.average_certificate)]);
            row.extend(s.robust_accuracy.iter().map(|&v| num(v)));
            row
        })
        .collect();
    files.csv("summary.csv", &head, &body)?;
    Ok(files.done())
}

// --------------------------------------------------------------- consistency

pub fn consistency_cmd(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Outcome, CliError> {
    let out = require_out(out)?;
    let ConsistencySection { fractions, taus, baseline } = cfg
        .consistency
        .clone()
        .ok_or_else(|| CliError::invalid("consistency", "section required by this command"))?;
    let (base, test) = cfg.task.datasets()?;
    let run = ConsistencyConfig {
        fractions,
        taus,
        seeds: cfg.seeds.clone(),
        hidden: cfg.net.widths.clone(),
        optimizer: cfg.optimizer.cfg(0),
        baseline,
    };
    let rows = consistency_experiment(&base, &test, &run, &Rayon)?;
    let mut files = Files::new(out);
    let head = header(&[
        "fraction",
        "train_size",
        "tau",
        "seed",
        "constrained",
        "train_loss",
        "test_loss",
        "train_accuracy",
        "test_accuracy",
        "loss_gap",
        "accuracy_gap",
    ]);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.fraction),
                r.train_size.to_string(),
                num(r.tau),
                r.seed.to_string(),
                r.constrained.to_string(),
                num(r.train_loss),
                num(r.test_loss),
                num(r.train_accuracy),
                num(r.test_accuracy),
                num(r.loss_gap()),
                num(r.accuracy_gap()),
            ]
        })
        .collect();
    files.csv("runs.csv", &head, &body)?;
    let mut groups: Vec<(f64, usize, f64, bool)> = Vec::new();
    for r in &rows {
        let key = (r.fraction, r.train_size, r.tau, r.constrained);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    let body: Vec<Vec<String>> = groups
        .iter()
        .map(|&(f, n, tau, c)| {
            let g: Vec<_> = rows.iter().filter(|r| (r.fraction, r.train_size, r.tau, r.constrained) == (f, n, tau, c)).collect();
            vec![
                num(f),
                n.to_string(),
                num(tau),
                c.to_string(),
                num(median(&g.iter().map(|r| r.loss_gap()).collect::<Vec<_>>())),
                num(median(&g.iter().map(|r| r.accuracy_gap()).collect::<Vec<_>>())),
            ]
        })
        .collect();
    let head = header(&["fraction", "train_size", "tau", "constrained", "median_loss_gap", "median_accuracy_gap"]);
    files.csv("summary.csv", &head, &body)?;
    Ok(files.done())
}

// ------------------------------------------------------------------- diverge

pub fn diverge_cmd(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Outcome, CliError> {
    let out = require_out(out)?;
    let section = cfg.divergence.clone().unwrap_or_default();
    let reports = Rayon.map(cfg.seeds.clone(), |seed| {
        let dc = DivergenceConfig {
            linear_steps: section.linear_steps,
            linear_optimizer: OptimizerKind::adam(section.linear_lr),
            net_epochs: cfg.optimizer.epochs,
            hidden: cfg.net.widths.clone(),
            net_optimizer: cfg.optimizer.kind(),
            seed,
        };
        divergence_experiment(&dc).map(|r| (seed, r))
    });
    let mut files = Files::new(out);
    let mut summary = Vec::new();
    for r in reports {
        let (seed, rep) = r?;
        let lin: Vec<Vec<String>> = (0..rep.linear.weight.len())
            .map(|i| vec![(i + 1).to_string(), num(rep.linear.weight[i]), num(rep.linear.bias[i]), num(rep.linear.loss[i])])
            .collect();
        files.csv(&format!("seed_{seed}/linear.csv"), &header(&["step", "weight", "bias", "loss"]), &lin)?;
        files.bytes(&format!("seed_{seed}/unconstrained.csv"), &history_csv(&rep.unconstrained)?)?;
        files.bytes(&format!("seed_{seed}/constrained.csv"), &history_csv(&rep.constrained)?)?;
        let worst_bound = rep.constrained.records.iter().map(|r| r.lipschitz_upper_bound).fold(0.0, f64::max);
        summary.push(vec![
            seed.to_string(),
            rep.linear.weight.last().map_or(String::new(), |&w| num(w)),
            rep.linear.loss.last().map_or(String::new(), |&l| num(l)),
            rep.unconstrained.last().map_or(String::new(), |r| num(r.max_spectral_norm)),
            num(worst_bound),
        ]);
    }
    let head = header(&[
        "seed",
        "linear_final_weight",
        "linear_final_loss",
        "unconstrained_final_max_spectral_norm",
        "constrained_max_lipschitz_bound",
    ]);
    files.csv("summary.csv", &head, &summary)?;
    Ok(files.done())
}

// ------------------------------------------------------------------- sdf-fit

pub fn sdf_fit_cmd(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Outcome, CliError> {
    let out = require_out(out)?;
    let TaskConfig::Snowflake { iterations, resolution } = cfg.task else {
        return Err(CliError::invalid("task.kind", "sdf-fit needs the snowflake task"));
    };
    let mut fit = SdfFitConfig {
        iterations,
        resolution,
        bbox: SNOWFLAKE_BBOX,
        hidden: cfg.net.widths.clone(),
        stop_mae: 0.0,
        optimizer: cfg.optimizer.cfg(0),
    };
    fit.stop_mae = cfg.sdf.as_ref().and_then(|s| s.stop_mae).unwrap_or_else(|| fit.pixel());
    let results = Rayon.map(cfg.seeds.clone(), |seed| sdf_fit_experiment(&fit, seed).map(|r| (seed, r)));
    let mut files = Files::new(out);
    let (grid, _) = cfg.task.datasets()?;
    files.bytes("grid.csv", &grid_csv(&grid)?)?;
    let mut summary = Vec::new();
    for r in results {
        let (seed, res) = r?;
        files.bytes(&format!("seed_{seed}/history.csv"), &history_csv(&res.history)?)?;
        let mae: Vec<Vec<String>> = res.mae_trace.iter().enumerate().map(|(i, &m)| vec![i.to_string(), num(m)]).collect();
        files.csv(&format!("seed_{seed}/mae.csv"), &header(&["epoch", "grid_mae"]), &mae)?;
        files.json(&format!("seed_{seed}/net.json"), &NetFile::from(&res.net))?;
        summary.push(vec![
            seed.to_string(),
            res.epochs.to_string(),
            num(res.final_mae),
            num(res.best_mae),
            res.reached.to_string(),
        ]);
    }
    files.csv("summary.csv", &header(&["seed", "epochs", "final_mae", "best_mae", "reached"]), &summary)?;
    Ok(files.done())
}

// ------------------------------------------------------- certify and attack

fn load_checkpoint(path: Option<&Path>, data: &LabeledDataset) -> Result<LipNet, CliError> {
    let path = path.ok_or_else(|| CliError::invalid("--checkpoint", "required by this command"))?;
    let net = read_json::<NetFile>(path)?.to_net()?;
    if net.input_dim() != data.dim() {
        return Err(CliError::invalid(
            "--checkpoint",
            format!("network reads {} inputs, the task has {}", net.input_dim(), data.dim()),
        ));
    }
    let k = output_dim(data);
    if net.output_dim() != k && !(k == 1 && net.output_dim() == 2) {
        return Err(CliError::invalid(
            "--checkpoint",
            format!("network has {} outputs, the task has {k}", net.output_dim()),
        ));
    }
    Ok(net)
}

/// Binary data seen by a two-logit network is read as classes.
fn matched_data(net: &LipNet, data: LabeledDataset) -> Result<LabeledDataset, CliError> {
    if net.output_dim() == 2 && output_dim(&data) == 1 {
        Ok(data.to_two_class()?)
    } else {
        Ok(data)
    }
}

fn correct(r: &PointReport) -> bool {
    match (&r.label, &r.prediction) {
        (Label::Sign(a), Label::Sign(b)) => a == b,
        (Label::Class(a), Label::Class(b)) => a == b,
        _ => false,
    }
}

pub fn certify_cmd(cfg: &ExperimentConfig, checkpoint: Option<&Path>, out: Option<&Path>) -> Result<Outcome, CliError> {
    let out = require_out(out)?;
    let (_, test) = cfg.task.datasets()?;
    let net = load_checkpoint(checkpoint, &test)?;
    if net.mode() != Mode::Constrained {
        return Err(CliError::invalid("--checkpoint", "certificates need a constrained network"));
    }
    let test = matched_data(&net, test)?;
    let reports: Vec<PointReport> = (0..test.len())
        .map(|i| {
            let x = test.point(i);
            let logits = net.evaluate(x);
            let c = certificate(&net, x)?;
            Ok(PointReport {
                point_id: i,
                label: Label::from_dataset(&test.labels, i),
                prediction: predict(&logits),
                logits,
                certificate: c.radius,
                pgd_found: false,
                pgd_norm: 0.0,
            })
        })
        .collect::<Result<_, Error>>()?;
    let mut files = Files::new(out);
    files.bytes("evaluation.csv", &evaluation_csv(&reports, false)?)?;
    let accuracy = reports.iter().filter(|r| correct(r)).count() as f64 / reports.len() as f64;
    let margin = if net.output_dim() == 1 { mcr(&net, &test)? } else { mmcr(&net, &test)? };
    let certified = cfg
        .eps_list
        .iter()
        .map(|&eps| Ok(json!({"eps": eps, "robust_accuracy": robust_accuracy(&net, &test, eps, RobustnessMode::Certified)?})))
        .collect::<Result<Vec<_>, Error>>()?;
    files.json(
        "summary.json",
        &json!({
            "points": reports.len(),
            "accuracy": accuracy,
            "mcr": margin,
            "average_certificate": average_certificate(&net, &test),
            "certified": certified,
        }),
    )?;
    Ok(files.done())
}

pub fn attack_cmd(cfg: &ExperimentConfig, checkpoint: Option<&Path>, out: Option<&Path>) -> Result<Outcome, CliError> {
    let out = require_out(out)?;
    if cfg.eps_list.is_empty() {
        return Err(CliError::invalid("eps_list", "attack needs at least one budget"));
    }
    let (_, test) = cfg.task.datasets()?;
    let net = load_checkpoint(checkpoint, &test)?;
    let test = matched_data(&net, test)?;
    let section = cfg.pgd.clone().unwrap_or_default();
    let mut files = Files::new(out);
    let mut summary = Vec::new();
    for (i, &eps) in cfg.eps_list.iter().enumerate() {
        let pgd = PgdConfig {
            steps: section.steps,
            step_size: section.step_factor * eps / section.steps as f64,
            restarts: section.restarts,
            seed: cfg.seeds[0],
        };
        let reports = evaluation_report(&net, &test, eps, &pgd);
        files.bytes(&format!("attack_{i}.csv"), &evaluation_csv(&reports, true)?)?;
        let violations = reports.iter().filter(|r| r.pgd_found && r.pgd_norm < r.certificate).count();
        let empirical = robust_accuracy_with(&net, &test, eps, RobustnessMode::Empirical, &pgd)?;
        let certified = if net.mode() == Mode::Constrained {
            num(robust_accuracy(&net, &test, eps, RobustnessMode::Certified)?)
        } else {
            String::new()
        };
        summary.push(vec![i.to_string(), num(eps), certified, num(empirical), violations.to_string()]);
    }
    let head = header(&["index", "eps", "certified_robust_accuracy", "empirical_robust_accuracy", "certificate_violations"]);
    files.csv("summary.csv", &head, &summary)?;
    Ok(files.done())
}

// ------------------------------------------------------- standalone oracles

pub fn wass_cmd(input: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let pair: PairFile = read_json(input)?;
    let p = pair.p.to_dist("p")?;
    let q = pair.q.to_dist("q")?;
    if p.dim() != q.dim() {
        return Err(CliError::invalid("q.atoms", "p and q have different dimensions"));
    }
    let w1 = if p.dim() == 1 {
        w1_exact_1d(&p, &q)?
    } else {
        w1_exact_assignment(&p, &q).map_err(|e| CliError::invalid("--input", e))?
    };
    let value = json!({ "w1": w1 });
    let mut outcome = Outcome::default();
    if let Some(dir) = out {
        let mut files = Files::new(dir);
        files.json("wass.json", &value)?;
        outcome = files.done();
    }
    outcome.stdout = Some(value.to_string());
    Ok(outcome)
}

pub fn snowflake_cmd(iterations: usize, ring: bool, resolution: Option<usize>, out: Option<&Path>) -> Result<Outcome, CliError> {
    if iterations > 8 {
        return Err(CliError::invalid("--iterations", "at most 8"));
    }
    if resolution.is_some() && out.is_none() {
        return Err(CliError::invalid("--out", "--resolution writes grid.csv and needs an output directory"));
    }
    if resolution.is_some_and(|r| r < 2) {
        return Err(CliError::invalid("--resolution", "must be at least 2"));
    }
    let (boundary, labeler) = if ring {
        snowflake_ring(iterations)?
    } else {
        (koch_snowflake(iterations)?, lipcert_core::geometry::RegionLabeler::even_odd())
    };
    let loops = boundary_file(&boundary);
    let mut outcome = Outcome::default();
    match out {
        Some(dir) => {
            let mut files = Files::new(dir);
            files.json("boundary.json", &loops)?;
            if let Some(res) = resolution {
                let grid = sdf_grid_dataset(&boundary, &labeler, res, SNOWFLAKE_BBOX)?;
                files.bytes("grid.csv", &grid_csv(&grid)?)?;
            }
            outcome = files.done();
            outcome.stdout = Some(json!({"segments": boundary.segments().len(), "loops": loops.len()}).to_string());
        }
        None => outcome.stdout = Some(serde_json::to_string(&loops).map_err(|e| CliError::Runtime(e.into()))?),
    }
    Ok(outcome)
}

pub fn pack_bounds_cmd(m: f64, n: u32, vol_x: f64, vol_ball: f64) -> Result<Outcome, CliError> {
    let (lower, upper) = packing_bounds(m, n, vol_x, vol_ball).map_err(|e| CliError::invalid("--m/--n/--vol-x/--vol-ball", e))?;
    Ok(Outcome {
        stdout: Some(json!({"lower": lower, "upper": upper}).to_string()),
        written: Vec::new(),
    })
}
