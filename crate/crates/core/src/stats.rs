//! Small descriptive-statistics helpers shared across modules.
//!
//! Variances use the population form (denominator `n`) throughout.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn population_std(xs: &[f64]) -> f64 {
    population_variance(xs).sqrt()
}

/// Pearson correlation, `None` when either side has (numerically) zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len(), "pearson: length mismatch");
    if xs.len() < 2 {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let scale = (mx.abs().max(my.abs()).max(1.0)).powi(2) * 1e-24 * xs.len() as f64;
    if sxx <= scale || syy <= scale {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided p-value of a Pearson correlation `r` over `n` observations,
/// from `t = r * sqrt((n - 2) / (1 - r^2))` with `n - 2` degrees of freedom.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = r * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Symmetric matrix of pairwise Pearson correlations with significance flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub n: usize,
    /// `None` where a column has zero variance.
    pub r: Vec<Vec<Option<f64>>>,
    pub p_value: Vec<Vec<Option<f64>>>,
    pub significant: Vec<Vec<bool>>,
}

impl CorrelationMatrix {
    /// Correlates the columns of `columns` (each a full column of observations).
    pub fn from_columns(labels: Vec<String>, columns: &[Vec<f64>], alpha: f64) -> Self {
        let k = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        let mut r = vec![vec![None; k]; k];
        let mut p = vec![vec![None; k]; k];
        let mut sig = vec![vec![false; k]; k];
        for i in 0..k {
            for j in i..k {
                let rij = if i == j {
                    pearson(&columns[i], &columns[j]).map(|_| 1.0)
                } else {
                    pearson(&columns[i], &columns[j])
                };
                let pij = rij.map(|v| if i == j { 0.0 } else { correlation_p_value(v, n) });
                let s = pij.is_some_and(|pv| pv < alpha);
                r[i][j] = rij;
                r[j][i] = rij;
                p[i][j] = pij;
                p[j][i] = pij;
                sig[i][j] = s;
                sig[j][i] = s;
            }
        }
        CorrelationMatrix {
            labels,
            n,
            r,
            p_value: p,
            significant: sig,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.r[i][j]
    }
}
