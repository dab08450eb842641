//! Task-specific sigmoid heads joined by a trainable cross-stitch matrix.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::logistic::{resolve_columns, sigmoid};
use crate::corpus::{FeatureColumn, FeatureMatrix};
use crate::dims::{Dimension, N_DIMS};
use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` inside logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// Binary negative log-likelihood per dimension.
    #[default]
    Nll,
    /// Negated agreement score `y*p + (1-y)*(1-p)`.
    Literal,
}

impl std::str::FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nll" => Ok(LossMode::Nll),
            "literal" => Ok(LossMode::Literal),
            other => Err(Error::invalid(format!("unknown loss mode `{other}` (expected nll or literal)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackHyperparams {
    /// Slope of the beta schedule.
    pub m: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty on head weights. Biases and the stitch matrix are free.
    pub l2_lambda: f64,
    pub seed: u64,
    /// Mini-batch size; `None` trains full-batch.
    pub batch_size: Option<usize>,
    /// Standard deviation of the initial head parameters.
    pub init_std: f64,
}

impl Default for StackHyperparams {
    fn default() -> Self {
        StackHyperparams {
            m: 1e-3,
            learning_rate: 0.05,
            epochs: 5000,
            l2_lambda: 100.0,
            seed: 0,
            batch_size: None,
            init_std: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct StackConfig {
    #[serde(flatten)]
    pub hyperparams: StackHyperparams,
    pub loss_mode: LossMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskHead {
    pub dim: Dimension,
    pub features: Vec<FeatureColumn>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub b: f64,
}

/// Rows are output dimensions, columns input dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CrossStitch {
    pub z: [[f64; N_DIMS]; N_DIMS],
}

impl CrossStitch {
    pub fn identity() -> Self {
        let mut z = [[0.0; N_DIMS]; N_DIMS];
        for (i, row) in z.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        CrossStitch { z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionVector {
    /// Head outputs, one per dimension.
    pub specific: [f64; N_DIMS],
    /// Outputs after the cross-stitch layer.
    pub shared: [f64; N_DIMS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackModel {
    pub heads: Vec<TaskHead>,
    #[serde(rename = "Z")]
    pub stitch: CrossStitch,
    pub hyperparams: StackHyperparams,
    pub loss_mode: LossMode,
}

pub fn beta_schedule(epoch: usize, m: f64) -> f64 {
    (-m * epoch as f64).exp()
}

pub fn predict_task_specific(head: &TaskHead, x: &[f64]) -> Result<f64> {
    if x.len() != head.a.len() {
        return Err(Error::DimensionMismatch {
            expected: head.a.len(),
            actual: x.len(),
        });
    }
    Ok(sigmoid(head.a.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + head.b))
}

pub fn predict_task_shared(stitch: &CrossStitch, y_tilde: &[f64; N_DIMS]) -> [f64; N_DIMS] {
    let mut out = [0.0; N_DIMS];
    for (k, o) in out.iter_mut().enumerate() {
        *o = sigmoid((0..N_DIMS).map(|d| stitch.z[k][d] * y_tilde[d]).sum());
    }
    out
}

/// Loss of one prediction `p` for label `y`.
pub fn pointwise_loss(mode: LossMode, y: bool, p: f64) -> f64 {
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    match mode {
        LossMode::Nll => -if y { p.ln() } else { (1.0 - p).ln() },
        LossMode::Literal => -if y { p } else { 1.0 - p },
    }
}

/// Derivative of [`pointwise_loss`] with respect to the logit of `p`.
fn pointwise_logit_grad(mode: LossMode, y: bool, p: f64) -> f64 {
    if !(PROB_FLOOR..=1.0 - PROB_FLOOR).contains(&p) {
        return 0.0;
    }
    let yv = if y { 1.0 } else { 0.0 };
    match mode {
        LossMode::Nll => p - yv,
        LossMode::Literal => -(2.0 * yv - 1.0) * p * (1.0 - p),
    }
}

/// Per-user loss: task-specific terms plus `(1 - beta)` times the
/// task-shared terms. `None` labels are masked out.
pub fn user_loss(
    y: &[Option<bool>; N_DIMS],
    y_tilde: &[f64; N_DIMS],
    y_hat: &[f64; N_DIMS],
    beta: f64,
    mode: LossMode,
) -> f64 {
    let mut specific = 0.0;
    let mut shared = 0.0;
    for d in 0..N_DIMS {
        if let Some(l) = y[d] {
            specific += pointwise_loss(mode, l, y_tilde[d]);
            shared += pointwise_loss(mode, l, y_hat[d]);
        }
    }
    specific + (1.0 - beta) * shared
}

/// Gradient of the training objective, laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct StackGradient {
    pub a: Vec<Vec<f64>>,
    pub b: [f64; N_DIMS],
    pub z: [[f64; N_DIMS]; N_DIMS],
}

impl StackGradient {
    /// Same order as [`StackModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for d in 0..N_DIMS {
            out.extend_from_slice(&self.a[d]);
            out.push(self.b[d]);
        }
        for row in &self.z {
            out.extend_from_slice(row);
        }
        out
    }
}

/// Per-dimension design matrices and masked labels for stack training.
#[derive(Debug, Clone)]
pub struct StackData {
    pub x: Vec<Array2<f64>>,
    pub labels: Vec<[Option<bool>; N_DIMS]>,
}

impl StackData {
    pub fn new(x: Vec<Array2<f64>>, labels: Vec<[Option<bool>; N_DIMS]>) -> Result<Self> {
        if x.len() != N_DIMS {
            return Err(Error::DimensionMismatch {
                expected: N_DIMS,
                actual: x.len(),
            });
        }
        for xd in &x {
            if xd.nrows() != labels.len() {
                return Err(Error::DimensionMismatch {
                    expected: labels.len(),
                    actual: xd.nrows(),
                });
            }
        }
        Ok(StackData { x, labels })
    }

    /// Gathers `selected[d]` columns of `m` for each dimension.
    pub fn from_matrix(m: &FeatureMatrix, selected: &[Vec<usize>], labels: Vec<[Option<bool>; N_DIMS]>) -> Result<Self> {
        if selected.len() != N_DIMS {
            return Err(Error::DimensionMismatch {
                expected: N_DIMS,
                actual: selected.len(),
            });
        }
        Self::new(selected.iter().map(|cols| m.values.select(Axis(1), cols)).collect(), labels)
    }

    pub fn n_users(&self) -> usize {
        self.labels.len()
    }

    fn subset(&self, rows: &[usize]) -> StackData {
        StackData {
            x: self.x.iter().map(|xd| xd.select(Axis(0), rows)).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }
}

impl StackModel {
    /// Heads drawn from `N(0, init_std)` with the configured seed; `Z = I`.
    pub fn initialize(features: Vec<Vec<FeatureColumn>>, cfg: &StackConfig) -> Result<Self> {
        if features.len() != N_DIMS {
            return Err(Error::DimensionMismatch {
                expected: N_DIMS,
                actual: features.len(),
            });
        }
        let hp = &cfg.hyperparams;
        if !(hp.m > 0.0 && hp.m.is_finite()) {
            return Err(Error::invalid("beta slope m must be positive"));
        }
        if !(hp.learning_rate > 0.0 && hp.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(hp.init_std >= 0.0 && hp.init_std.is_finite()) {
            return Err(Error::invalid("init_std must be non-negative"));
        }
        if hp.batch_size == Some(0) {
            return Err(Error::invalid("batch size must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let normal = Normal::new(0.0, hp.init_std).map_err(|e| Error::invalid(e.to_string()))?;
        let heads = features
            .into_iter()
            .enumerate()
            .map(|(d, feats)| {
                let a = (0..feats.len()).map(|_| normal.sample(&mut rng)).collect();
                TaskHead {
                    dim: Dimension::ALL[d],
                    features: feats,
                    a,
                    b: normal.sample(&mut rng),
                }
            })
            .collect();
        Ok(StackModel {
            heads,
            stitch: CrossStitch::identity(),
            hyperparams: *hp,
            loss_mode: cfg.loss_mode,
        })
    }

    pub fn head(&self, d: Dimension) -> &TaskHead {
        &self.heads[d.index()]
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<PredictionVector> {
        if x.len() != N_DIMS {
            return Err(Error::DimensionMismatch {
                expected: N_DIMS,
                actual: x.len(),
            });
        }
        let mut specific = [0.0; N_DIMS];
        for d in 0..N_DIMS {
            specific[d] = predict_task_specific(&self.heads[d], &x[d])?;
        }
        Ok(PredictionVector {
            specific,
            shared: predict_task_shared(&self.stitch, &specific),
        })
    }

    pub fn predict_data(&self, data: &StackData) -> Result<Vec<PredictionVector>> {
        self.check_shapes(data)?;
        let yt = self.forward_specific(data);
        Ok(yt
            .rows()
            .into_iter()
            .map(|r| {
                let specific: [f64; N_DIMS] = std::array::from_fn(|d| r[d]);
                PredictionVector {
                    specific,
                    shared: predict_task_shared(&self.stitch, &specific),
                }
            })
            .collect())
    }

    /// Predictions for every row of a feature matrix standardized the same
    /// way as the training data.
    pub fn predict_matrix(&self, m: &FeatureMatrix) -> Result<Vec<PredictionVector>> {
        let selected = self
            .heads
            .iter()
            .map(|h| resolve_columns(m, &h.features))
            .collect::<Result<Vec<_>>>()?;
        let data = StackData::from_matrix(m, &selected, vec![[None; N_DIMS]; m.n_rows()])?;
        self.predict_data(&data)
    }

    fn check_shapes(&self, data: &StackData) -> Result<()> {
        for (h, xd) in self.heads.iter().zip(&data.x) {
            if xd.ncols() != h.a.len() {
                return Err(Error::DimensionMismatch {
                    expected: h.a.len(),
                    actual: xd.ncols(),
                });
            }
        }
        Ok(())
    }

    fn forward_specific(&self, data: &StackData) -> Array2<f64> {
        let n = data.n_users();
        let mut yt = Array2::<f64>::zeros((n, N_DIMS));
        for (d, h) in self.heads.iter().enumerate() {
            let s = data.x[d].dot(&Array1::from(h.a.clone())) + h.b;
            yt.column_mut(d).assign(&s.mapv(sigmoid));
        }
        yt
    }

    /// All trainable parameters: each head's `A` then `b`, then `Z` row-major.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for h in &self.heads {
            out.extend_from_slice(&h.a);
            out.push(h.b);
        }
        for row in &self.stitch.z {
            out.extend_from_slice(row);
        }
        out
    }

    pub fn set_parameters(&mut self, p: &[f64]) -> Result<()> {
        let expected = self.heads.iter().map(|h| h.a.len() + 1).sum::<usize>() + N_DIMS * N_DIMS;
        if p.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: p.len(),
            });
        }
        let mut it = p.iter().copied();
        for h in &mut self.heads {
            for a in &mut h.a {
                *a = it.next().unwrap();
            }
            h.b = it.next().unwrap();
        }
        for row in &mut self.stitch.z {
            for z in row.iter_mut() {
                *z = it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Mean per-user loss plus `(l2 / 2N) * sum |A_d|^2`, and its gradient.
    pub fn objective(&self, data: &StackData, beta: f64) -> Result<(f64, StackGradient)> {
        self.check_shapes(data)?;
        let n = data.n_users();
        if n == 0 {
            return Err(Error::invalid("no users to train on"));
        }
        let nf = n as f64;
        let mode = self.loss_mode;
        let z = &self.stitch.z;
        let yt = self.forward_specific(data);
        let mut ds = Array2::<f64>::zeros((n, N_DIMS));
        let mut gz = [[0.0; N_DIMS]; N_DIMS];
        let mut total = 0.0;
        for (u, labels) in data.labels.iter().enumerate() {
            let y_tilde: [f64; N_DIMS] = std::array::from_fn(|d| yt[[u, d]]);
            let y_hat = predict_task_shared(&self.stitch, &y_tilde);
            total += user_loss(labels, &y_tilde, &y_hat, beta, mode);
            let mut dt = [0.0; N_DIMS];
            for k in 0..N_DIMS {
                if let Some(l) = labels[k] {
                    dt[k] = (1.0 - beta) * pointwise_logit_grad(mode, l, y_hat[k]);
                }
            }
            for d in 0..N_DIMS {
                let through_shared: f64 = (0..N_DIMS).map(|k| dt[k] * z[k][d]).sum();
                let own = labels[d].map_or(0.0, |l| pointwise_logit_grad(mode, l, y_tilde[d]));
                ds[[u, d]] = (own + through_shared * y_tilde[d] * (1.0 - y_tilde[d])) / nf;
                for k in 0..N_DIMS {
                    gz[k][d] += dt[k] * y_tilde[d] / nf;
                }
            }
        }
        let l2 = self.hyperparams.l2_lambda;
        let mut reg = 0.0;
        let mut ga = Vec::with_capacity(N_DIMS);
        let mut gb = [0.0; N_DIMS];
        for (d, h) in self.heads.iter().enumerate() {
            let col = ds.column(d);
            let mut g = data.x[d].t().dot(&col);
            for (gi, ai) in g.iter_mut().zip(&h.a) {
                *gi += l2 * ai / nf;
                reg += ai * ai;
            }
            ga.push(g.to_vec());
            gb[d] = col.sum();
        }
        let value = total / nf + 0.5 * l2 * reg / nf;
        Ok((value, StackGradient { a: ga, b: gb, z: gz }))
    }

    fn apply_step(&mut self, g: &StackGradient, lr: f64) {
        for (d, h) in self.heads.iter_mut().enumerate() {
            for (a, ga) in h.a.iter_mut().zip(&g.a[d]) {
                *a -= lr * ga;
            }
            h.b -= lr * g.b[d];
        }
        for k in 0..N_DIMS {
            for d in 0..N_DIMS {
                self.stitch.z[k][d] -= lr * g.z[k][d];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackTraining {
    pub model: StackModel,
    /// Full-data objective at the start of each epoch, then after the last.
    pub loss_trace: Vec<f64>,
}

/// Gradient descent on the joint objective with `beta` following
/// [`beta_schedule`] per epoch. Full-batch unless a batch size is set.
pub fn train_stack(data: &StackData, features: Vec<Vec<FeatureColumn>>, cfg: &StackConfig) -> Result<StackTraining> {
    let mut model = StackModel::initialize(features, cfg)?;
    model.check_shapes(data)?;
    let hp = cfg.hyperparams;
    let n = data.n_users();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(hp.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut trace = Vec::with_capacity(hp.epochs + 1);
    for epoch in 0..hp.epochs {
        let beta = beta_schedule(epoch, hp.m);
        let (value, grad) = model.objective(data, beta)?;
        if !value.is_finite() {
            return Err(Error::Diverged(format!(
                "loss is {value} at epoch {epoch}; lower the learning rate (currently {})",
                hp.learning_rate
            )));
        }
        trace.push(value);
        match hp.batch_size {
            Some(bs) if bs < n => {
                order.shuffle(&mut shuffle_rng);
                for chunk in order.chunks(bs) {
                    let (_, g) = model.objective(&data.subset(chunk), beta)?;
                    model.apply_step(&g, hp.learning_rate);
                }
            }
            _ => model.apply_step(&grad, hp.learning_rate),
        }
    }
    let (last, _) = model.objective(data, beta_schedule(hp.epochs, hp.m))?;
    if !last.is_finite() || model.parameters().iter().any(|p| !p.is_finite()) {
        return Err(Error::Diverged(format!(
            "non-finite parameters after training; lower the learning rate (currently {})",
            hp.learning_rate
        )));
    }
    trace.push(last);
    Ok(StackTraining { model, loss_trace: trace })
}

/// Absolute weights of a row divided by the row's absolute sum. `None`
/// when the row is all zero.
pub fn weight_shares(row: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = row.iter().map(|w| w.abs()).sum();
    if total == 0.0 || !total.is_finite() {
        return None;
    }
    Some(row.iter().map(|w| w.abs() / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchRow {
    pub output: Dimension,
    /// Signed weights indexed by input dimension.
    pub weights: [f64; N_DIMS],
    pub shares: Option<[f64; N_DIMS]>,
}

pub fn stitch_weight_report(model: &StackModel) -> Vec<StitchRow> {
    stitch_rows(&model.stitch)
}

pub fn stitch_rows(stitch: &CrossStitch) -> Vec<StitchRow> {
    Dimension::ALL
        .iter()
        .map(|&d| {
            let weights = stitch.z[d.index()];
            StitchRow {
                output: d,
                weights,
                shares: weight_shares(&weights).map(|s| std::array::from_fn(|i| s[i])),
            }
        })
        .collect()
}

pub fn stitch_report_text(rows: &[StitchRow]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("output ");
    for d in Dimension::ALL {
        let _ = write!(out, "{:>16}", d.code());
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{:<7}", r.output.code());
        for i in 0..N_DIMS {
            match &r.shares {
                Some(s) => {
                    let _ = write!(out, "{:>8.3} ({:>4.1}%)", r.weights[i], 100.0 * s[i]);
                }
                None => {
                    let _ = write!(out, "{:>8.3} (  - )", r.weights[i]);
                }
            }
        }
        out.push('\n');
    }
    out
}
