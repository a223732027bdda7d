//! On-disk formats: JSON for structures and scalars, CSV (header row, fixed
//! column order) for tables. Every writer goes through [`write_atomic`].

use std::fs;
use std::io::Write;
use std::path::Path;

use lipcert_core::data::LabeledDataset;
use lipcert_core::geometry::PolylineBoundary;
use lipcert_core::linalg::Matrix;
use lipcert_core::net::{Constraint, DenseLayer, Layer, LipNet, Mode};
use lipcert_core::robustness::{Label, PointReport};
use lipcert_core::train::TrainHistory;
use lipcert_core::transport::DiscreteDist;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let unwritable = |e: std::io::Error| CliError::OutputUnwritable {
        path: path.display().to_string(),
        source: e,
    };
    fs::create_dir_all(dir).map_err(unwritable)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(unwritable)?;
    tmp.write_all(bytes).map_err(unwritable)?;
    tmp.as_file().sync_all().map_err(unwritable)?;
    tmp.persist(path).map_err(|e| unwritable(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(e.into()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::invalid(path.display(), format!("cannot read: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::invalid(path.display(), format!("malformed JSON: {e}")))
}

/// Builds a CSV document in memory from a header and rows.
pub fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Runtime(e.into());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(anyhow::anyhow!("{e}")))
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

/// Shortest decimal text that round-trips to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

// ---------------------------------------------------------------- checkpoint

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Constrained,
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Groupsort2,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintName {
    Orthogonal,
    SpectralNormOnly,
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ConstraintName>,
    /// Row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
}

/// Network checkpoint: `{mode, layers: [{kind, rows, cols, constraint, weights, bias}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetFile {
    pub mode: ModeName,
    pub layers: Vec<LayerFile>,
}

impl From<&LipNet> for NetFile {
    fn from(net: &LipNet) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => LayerFile {
                    kind: LayerKind::Dense,
                    rows: Some(d.weights.rows()),
                    cols: Some(d.weights.cols()),
                    constraint: Some(match d.constraint {
                        Constraint::Orthogonal => ConstraintName::Orthogonal,
                        Constraint::SpectralNormOnly => ConstraintName::SpectralNormOnly,
                        Constraint::Unconstrained => ConstraintName::Unconstrained,
                    }),
                    weights: Some(d.weights.data().to_vec()),
                    bias: Some(d.bias.clone()),
                },
                Layer::GroupSort2 => bare(LayerKind::Groupsort2),
                Layer::Relu => bare(LayerKind::Relu),
            })
            .collect();
        NetFile {
            mode: match net.mode() {
                Mode::Constrained => ModeName::Constrained,
                Mode::Unconstrained => ModeName::Unconstrained,
            },
            layers,
        }
    }
}

fn bare(kind: LayerKind) -> LayerFile {
    LayerFile {
        kind,
        rows: None,
        cols: None,
        constraint: None,
        weights: None,
        bias: None,
    }
}

impl NetFile {
    /// Rebuilds the network; field paths in errors are relative to the file root.
    pub fn to_net(&self) -> Result<LipNet, CliError> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let at = |f: &str| format!("layers[{i}].{f}");
            layers.push(match l.kind {
                LayerKind::Groupsort2 => Layer::GroupSort2,
                LayerKind::Relu => Layer::Relu,
                LayerKind::Dense => {
                    let rows = l.rows.ok_or_else(|| CliError::invalid(at("rows"), "missing"))?;
                    let cols = l.cols.ok_or_else(|| CliError::invalid(at("cols"), "missing"))?;
                    let w = l.weights.clone().ok_or_else(|| CliError::invalid(at("weights"), "missing"))?;
                    let b = l.bias.clone().ok_or_else(|| CliError::invalid(at("bias"), "missing"))?;
                    let c = match l.constraint.ok_or_else(|| CliError::invalid(at("constraint"), "missing"))? {
                        ConstraintName::Orthogonal => Constraint::Orthogonal,
                        ConstraintName::SpectralNormOnly => Constraint::SpectralNormOnly,
                        ConstraintName::Unconstrained => Constraint::Unconstrained,
                    };
                    let m = Matrix::new(rows, cols, w).map_err(|e| CliError::invalid(at("weights"), e))?;
                    Layer::Dense(DenseLayer::new(m, b, c).map_err(|e| CliError::invalid(at("bias"), e))?)
                }
            });
        }
        let mode = match self.mode {
            ModeName::Constrained => Mode::Constrained,
            ModeName::Unconstrained => Mode::Unconstrained,
        };
        LipNet::new(layers, mode).map_err(|e| CliError::invalid("layers", e))
    }
}

// ------------------------------------------------------------------ geometry

/// Boundary interchange: a list of loops, each a list of `[x, y]` vertices.
pub type BoundaryFile = Vec<Vec<[f64; 2]>>;

pub fn boundary_file(b: &PolylineBoundary) -> BoundaryFile {
    b.loops().to_vec()
}

pub fn boundary_from_file(f: BoundaryFile) -> Result<PolylineBoundary, CliError> {
    PolylineBoundary::from_loops(f).map_err(|e| CliError::invalid("loops", e))
}

/// Grid dataset as CSV `x,y,sdf,label`, label `+1` inside the positive region.
pub fn grid_csv(data: &LabeledDataset) -> Result<Vec<u8>, CliError> {
    let targets = data
        .targets
        .as_ref()
        .ok_or_else(|| CliError::Runtime(anyhow::anyhow!("grid dataset carries no distances")))?;
    let rows: Vec<Vec<String>> = (0..data.len())
        .map(|i| {
            let p = data.point(i);
            let label = if targets[i] > 0.0 { 1 } else { -1 };
            vec![num(p[0]), num(p[1]), num(targets[i]), label.to_string()]
        })
        .collect();
    csv_bytes(&header(&["x", "y", "sdf", "label"]), &rows)
}

// ------------------------------------------------------------- distributions

/// `{atoms: [[..]], weights: [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistFile {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// A pair of distributions `{p, q}` for the transport commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub p: DistFile,
    pub q: DistFile,
}

impl From<&DiscreteDist> for DistFile {
    fn from(d: &DiscreteDist) -> Self {
        DistFile {
            atoms: (0..d.len()).map(|i| d.atom(i).to_vec()).collect(),
            weights: d.weights().to_vec(),
        }
    }
}

impl DistFile {
    pub fn to_dist(&self, field: &str) -> Result<DiscreteDist, CliError> {
        let dim = self.atoms.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(CliError::invalid(format!("{field}.atoms"), "needs at least one non-empty atom"));
        }
        if let Some(i) = self.atoms.iter().position(|a| a.len() != dim) {
            return Err(CliError::invalid(format!("{field}.atoms[{i}]"), format!("expected {dim} coordinates")));
        }
        let m = Matrix::new(self.atoms.len(), dim, self.atoms.concat())
            .map_err(|e| CliError::invalid(format!("{field}.atoms"), e))?;
        DiscreteDist::new(m, self.weights.clone()).map_err(|e| CliError::invalid(format!("{field}.weights"), e))
    }
}

// ------------------------------------------------------------------- reports

fn label_text(l: &Label) -> String {
    match l {
        Label::Sign(s) => num(*s),
        Label::Class(c) => c.to_string(),
    }
}

/// Columns `point_id,label,prediction,logit_0..logit_{K-1},certificate,pgd_found,pgd_norm`.
/// `pgd_found`/`pgd_norm` are left empty when no attack was run.
pub fn evaluation_csv(reports: &[PointReport], attacked: bool) -> Result<Vec<u8>, CliError> {
    let k = reports.first().map_or(1, |r| r.logits.len());
    let mut cols = header(&["point_id", "label", "prediction"]);
    if k == 1 {
        cols.push("logit".into());
    } else {
        cols.extend((0..k).map(|i| format!("logit_{i}")));
    }
    cols.extend(header(&["certificate", "pgd_found", "pgd_norm"]));
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.point_id.to_string(), label_text(&r.label), label_text(&r.prediction)];
            row.extend(r.logits.iter().map(|&v| num(v)));
            row.push(num(r.certificate));
            if attacked {
                row.push(r.pgd_found.to_string());
                row.push(if r.pgd_found { num(r.pgd_norm) } else { String::new() });
            } else {
                row.extend([String::new(), String::new()]);
            }
            row
        })
        .collect();
    csv_bytes(&cols, &rows)
}

pub const HISTORY_COLUMNS: [&str; 8] = [
    "epoch",
    "train_loss",
    "train_accuracy",
    "eval_loss",
    "eval_accuracy",
    "mcr",
    "max_spectral_norm",
    "lipschitz_upper_bound",
];

pub fn history_csv(h: &TrainHistory) -> Result<Vec<u8>, CliError> {
    let rows: Vec<Vec<String>> = h
        .records
        .iter()
        .map(|r| {
            vec![
                r.epoch.to_string(),
                num(r.train_loss),
                num(r.train_accuracy),
                num(r.eval_loss),
                num(r.eval_accuracy),
                num(r.mcr),
                num(r.max_spectral_norm),
                num(r.lipschitz_upper_bound),
            ]
        })
        .collect();
    csv_bytes(&header(&HISTORY_COLUMNS), &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lipcert_core::net::NetSpec;
    use lipcert_core::seeded_rng;
    use lipcert_core::Model;

    #[test]
    fn checkpoint_round_trips_bit_for_bit() {
        let net = LipNet::init(&NetSpec::constrained(2, &[8, 8], 3), &mut seeded_rng(1)).unwrap();
        let text = serde_json::to_string(&NetFile::from(&net)).unwrap();
        let back: NetFile = serde_json::from_str(&text).unwrap();
        let net2 = back.to_net().unwrap();
        assert_eq!(net, net2);
        assert_eq!(net.evaluate(&[0.3, -0.2]), net2.evaluate(&[0.3, -0.2]));
    }

    #[test]
    fn checkpoint_errors_name_the_field() {
        let mut f = NetFile::from(&LipNet::init(&NetSpec::constrained(2, &[4], 1), &mut seeded_rng(0)).unwrap());
        f.layers[0].bias = None;
        match f.to_net() {
            Err(CliError::Invalid { field, .. }) => assert_eq!(field, "layers[0].bias"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn distribution_files_validate_weights() {
        let f = DistFile {
            atoms: vec![vec![0.0], vec![1.0]],
            weights: vec![0.5, 0.6],
        };
        assert!(f.to_dist("p").is_err());
        let ok = DistFile {
            atoms: vec![vec![0.0], vec![1.0]],
            weights: vec![0.25, 0.75],
        };
        let d = ok.to_dist("p").unwrap();
        assert_eq!(DistFile::from(&d), ok);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 3.0, -2.5e-300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
