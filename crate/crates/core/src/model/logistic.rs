//! L2-regularized logistic regression.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::corpus::{FeatureColumn, FeatureMatrix};
use crate::dims::Dimension;
use crate::error::{Error, Result};

/// Logistic function with an overflow-safe branch. Results are clamped to
/// `[f64::MIN_POSITIVE, 1 - EPSILON / 2]` so they never reach 0 or 1.
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSolver {
    /// Damped Newton steps with backtracking.
    Newton,
    /// Plain gradient descent with Armijo backtracking.
    GradientDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrConfig {
    pub l2_lambda: f64,
    /// Stop when the gradient norm of the mean objective falls below this.
    pub tolerance: f64,
    pub max_iter: usize,
    pub solver: LrSolver,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            l2_lambda: 1.0,
            tolerance: 1e-6,
            max_iter: 10_000,
            solver: LrSolver::Newton,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LrFit {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

/// `(1/N) [ sum_i NLL_i + (lambda/2) |w|^2 ]`; the intercept is not penalized.
pub fn lr_objective(x: ArrayView2<f64>, y: &[bool], weights: &[f64], intercept: f64, l2_lambda: f64) -> f64 {
    let w = Array1::from(weights.to_vec());
    let s = x.dot(&w) + intercept;
    objective_from_scores(&s, y, &w, l2_lambda)
}

fn objective_from_scores(s: &Array1<f64>, y: &[bool], w: &Array1<f64>, l2_lambda: f64) -> f64 {
    let nll: f64 = s
        .iter()
        .zip(y)
        .map(|(&si, &yi)| softplus(si) - if yi { si } else { 0.0 })
        .sum();
    (nll + 0.5 * l2_lambda * w.dot(w)) / y.len() as f64
}

fn check_inputs(x: ArrayView2<f64>, y: &[bool]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::degenerate("labels contain a single class"));
    }
    Ok(())
}

/// Fits weights and intercept from zero initialization. Training is
/// deterministic; there is no random state.
pub fn fit_logistic(x: ArrayView2<f64>, y: &[bool], cfg: &LrConfig) -> Result<LrFit> {
    check_inputs(x, y)?;
    if cfg.l2_lambda < 0.0 || !cfg.l2_lambda.is_finite() {
        return Err(Error::invalid("l2_lambda must be finite and non-negative"));
    }
    let n = y.len() as f64;
    let d = x.ncols();
    let yv: Array1<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

    let mut w = Array1::<f64>::zeros(d);
    let mut b = 0.0;
    let mut step_gd = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    let eval = |w: &Array1<f64>, b: f64| -> (Array1<f64>, f64) {
        let s = x.dot(w) + b;
        let f = objective_from_scores(&s, y, w, cfg.l2_lambda);
        (s, f)
    };
    let (mut s, mut f) = eval(&w, b);
    let mut gnorm;
    loop {
        let p = s.mapv(sigmoid);
        let r = &p - &yv;
        let gw = (x.t().dot(&r) + cfg.l2_lambda * &w) / n;
        let gb = r.sum() / n;
        gnorm = (gw.dot(&gw) + gb * gb).sqrt();
        if gnorm < cfg.tolerance {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        iterations += 1;

        // search direction (descent direction is -dir)
        let (dir_w, dir_b) = match cfg.solver {
            LrSolver::Newton => newton_direction(x, &p, &gw, gb, cfg.l2_lambda, n),
            LrSolver::GradientDescent => (gw.clone(), gb),
        };
        let slope = gw.dot(&dir_w) + gb * dir_b;
        let mut t = match cfg.solver {
            LrSolver::Newton => 1.0,
            LrSolver::GradientDescent => (step_gd * 2.0f64).min(1e6),
        };
        let mut accepted = false;
        for _ in 0..60 {
            let w_new = &w - &(t * &dir_w);
            let b_new = b - t * dir_b;
            let (s_new, f_new) = eval(&w_new, b_new);
            if f_new <= f - 1e-4 * t * slope {
                w = w_new;
                b = b_new;
                s = s_new;
                f = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if cfg.solver == LrSolver::GradientDescent {
            step_gd = t;
        }
        if !accepted {
            // no representable decrease left; the point is optimal to
            // floating-point precision
            break;
        }
    }
    if !converged {
        log::warn!(
            "logistic regression stopped after {iterations} iterations with gradient norm {gnorm:.3e} (tolerance {:.1e})",
            cfg.tolerance
        );
    }
    Ok(LrFit {
        weights: w.to_vec(),
        intercept: b,
        loss: f,
        grad_norm: gnorm,
        iterations,
        converged,
    })
}

fn newton_direction(
    x: ArrayView2<f64>,
    p: &Array1<f64>,
    gw: &Array1<f64>,
    gb: f64,
    l2_lambda: f64,
    n: f64,
) -> (Array1<f64>, f64) {
    let d = x.ncols();
    let wts = p.mapv(|v| v * (1.0 - v));
    let xw = &x * &wts.view().insert_axis(Axis(1));
    let hww = x.t().dot(&xw);
    let hwb = xw.sum_axis(Axis(0));
    let hbb = wts.sum();
    let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
    for i in 0..d {
        for j in 0..d {
            h[(i, j)] = hww[[i, j]] / n;
        }
        h[(i, i)] += l2_lambda / n;
        h[(i, d)] = hwb[i] / n;
        h[(d, i)] = hwb[i] / n;
    }
    h[(d, d)] = hbb / n;
    let mut g = DVector::<f64>::zeros(d + 1);
    for i in 0..d {
        g[i] = gw[i];
    }
    g[d] = gb;
    let mut ridge = 0.0;
    let scale = (0..=d).map(|i| h[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
    for _ in 0..12 {
        let mut hr = h.clone();
        for i in 0..=d {
            hr[(i, i)] += ridge;
        }
        if let Some(ch) = hr.cholesky() {
            let sol = ch.solve(&g);
            if sol.iter().all(|v| v.is_finite()) {
                let dir_w = Array1::from_iter(sol.iter().take(d).copied());
                return (dir_w, sol[d]);
            }
        }
        ridge = if ridge == 0.0 { 1e-10 * scale } else { ridge * 100.0 };
    }
    (gw.clone(), gb)
}

/// Logistic-regression classifier for one value dimension over a fixed
/// list of (standardized) feature columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseModel {
    pub dimension: Dimension,
    pub features: Vec<FeatureColumn>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2_lambda: f64,
}

impl BaseModel {
    /// Column positions of this model's features in `m`.
    pub fn column_indices(&self, m: &FeatureMatrix) -> Result<Vec<usize>> {
        resolve_columns(m, &self.features)
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: x.len(),
            });
        }
        Ok(self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.decision(x).map(sigmoid)
    }

    /// Probabilities for every row of `m`.
    pub fn predict_matrix(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        let cols = self.column_indices(m)?;
        let xs = m.values.select(Axis(1), &cols);
        Ok(xs.rows().into_iter().map(|r| sigmoid(self.intercept + r.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())).collect())
    }
}

pub(crate) fn resolve_columns(m: &FeatureMatrix, features: &[FeatureColumn]) -> Result<Vec<usize>> {
    features
        .iter()
        .map(|f| {
            m.column_index(f.key)
                .ok_or_else(|| Error::invalid(format!("feature `{}` missing from the feature matrix", f.header())))
        })
        .collect()
}

/// Rows with a defined label, and those labels.
pub(crate) fn labelled_rows(labels: &[Option<bool>]) -> (Vec<usize>, Vec<bool>) {
    labels.iter().enumerate().filter_map(|(i, l)| l.map(|v| (i, v))).unzip()
}

/// Trains a base model on the `selected` columns of a standardized matrix.
/// Users whose label is `None` are skipped.
pub fn train_base(
    features: &FeatureMatrix,
    labels: &[Option<bool>],
    dimension: Dimension,
    selected: &[usize],
    cfg: &LrConfig,
) -> Result<(BaseModel, LrFit)> {
    if labels.len() != features.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: features.n_rows(),
            actual: labels.len(),
        });
    }
    let (rows, y) = labelled_rows(labels);
    let x: Array2<f64> = features.values.select(Axis(0), &rows).select(Axis(1), selected);
    let fit = fit_logistic(x.view(), &y, cfg)?;
    let model = BaseModel {
        dimension,
        features: selected.iter().map(|&j| features.columns[j].clone()).collect(),
        weights: fit.weights.clone(),
        intercept: fit.intercept,
        l2_lambda: cfg.l2_lambda,
    };
    Ok((model, fit))
}
