//! Top-n feature selection per value dimension.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::corpus::{FeatureColumn, FeatureKey, FeatureMatrix, FeatureSources, Source};
use crate::dims::Dimension;
use crate::error::{Error, Result};
use crate::model::logistic::{fit_logistic, labelled_rows, LrConfig};
use crate::stats::pearson;

/// Default number of categories kept per source.
pub const DEFAULT_N: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionMethod {
    #[serde(rename = "RFE")]
    Rfe,
    #[serde(rename = "univariate")]
    Univariate,
}

impl std::str::FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rfe" => Ok(SelectionMethod::Rfe),
            "univariate" => Ok(SelectionMethod::Univariate),
            other => Err(Error::invalid(format!("unknown selection method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub dimension: Dimension,
    pub method: SelectionMethod,
    pub n: usize,
    /// Kept features, in candidate order.
    pub selected: Vec<FeatureColumn>,
    /// Dropped features, in drop order.
    pub trace: Vec<FeatureColumn>,
}

impl SelectionResult {
    pub fn selected_keys(&self) -> Vec<FeatureKey> {
        self.selected.iter().map(|c| c.key).collect()
    }

    /// Column positions of the selected features in `m`.
    pub fn column_indices(&self, m: &FeatureMatrix) -> Result<Vec<usize>> {
        crate::model::logistic::resolve_columns(m, &self.selected)
    }
}

fn validate(m: &FeatureMatrix, candidates: &[usize], labels: &[Option<bool>], n: usize) -> Result<(Vec<usize>, Vec<bool>)> {
    if labels.len() != m.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: m.n_rows(),
            actual: labels.len(),
        });
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if n > candidates.len() {
        return Err(Error::invalid(format!("n = {n} exceeds the {} candidate features", candidates.len())));
    }
    if let Some(&j) = candidates.iter().find(|&&j| j >= m.n_cols()) {
        return Err(Error::invalid(format!("candidate column {j} out of range")));
    }
    let (rows, y) = labelled_rows(labels);
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::degenerate("labels contain a single class"));
    }
    Ok((rows, y))
}

/// Recursive feature elimination: fit logistic regression on the remaining
/// candidates and drop the one with the smallest absolute coefficient until
/// `n` remain. Ties drop the larger `(source, category_id)`. Every round is
/// fitted from scratch. Users labelled `None` are ignored.
pub fn rfe_select(
    m: &FeatureMatrix,
    candidates: &[usize],
    labels: &[Option<bool>],
    n: usize,
    dimension: Dimension,
    cfg: &LrConfig,
) -> Result<SelectionResult> {
    let (rows, y) = validate(m, candidates, labels, n)?;
    let x_all = m.values.select(Axis(0), &rows);
    let mut remaining: Vec<usize> = candidates.to_vec();
    let mut trace = Vec::new();
    while remaining.len() > n {
        let x = x_all.select(Axis(1), &remaining);
        let fit = fit_logistic(x.view(), &y, cfg)?;
        let mut worst = 0;
        for i in 1..remaining.len() {
            let (a, b) = (fit.weights[i].abs(), fit.weights[worst].abs());
            if a < b || (a == b && m.columns[remaining[i]].key > m.columns[remaining[worst]].key) {
                worst = i;
            }
        }
        trace.push(m.columns[remaining.remove(worst)].clone());
    }
    Ok(SelectionResult {
        dimension,
        method: SelectionMethod::Rfe,
        n,
        selected: remaining.iter().map(|&j| m.columns[j].clone()).collect(),
        trace,
    })
}

/// Point-biserial correlation of every column with a binary label; `None`
/// where the column is constant over the labelled users.
pub fn label_correlations(m: &FeatureMatrix, labels: &[Option<bool>]) -> Vec<Option<f64>> {
    let (rows, y) = labelled_rows(labels);
    let yv: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    (0..m.n_cols())
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|&r| m.values[[r, j]]).collect();
            pearson(&col, &yv)
        })
        .collect()
}

/// Ranks candidates by absolute point-biserial correlation and keeps the
/// top `n`. Constant columns count as zero correlation.
pub fn univariate_select(
    m: &FeatureMatrix,
    candidates: &[usize],
    labels: &[Option<bool>],
    n: usize,
    dimension: Dimension,
) -> Result<SelectionResult> {
    validate(m, candidates, labels, n)?;
    let corr = label_correlations(m, labels);
    let mut ranked: Vec<usize> = candidates.to_vec();
    let strength = |j: usize| corr[j].map_or(0.0, f64::abs);
    ranked.sort_by(|&a, &b| {
        strength(b)
            .total_cmp(&strength(a))
            .then_with(|| m.columns[a].key.cmp(&m.columns[b].key))
    });
    let kept: std::collections::HashSet<usize> = ranked[..n].iter().copied().collect();
    Ok(SelectionResult {
        dimension,
        method: SelectionMethod::Univariate,
        n,
        selected: candidates.iter().filter(|j| kept.contains(j)).map(|&j| m.columns[j].clone()).collect(),
        trace: ranked[n..].iter().rev().map(|&j| m.columns[j].clone()).collect(),
    })
}

/// Runs the chosen method separately for every source of the feature
/// setting (top `n` post categories plus top `n` profile categories) and
/// concatenates the results.
pub fn select_per_source(
    m: &FeatureMatrix,
    sources: FeatureSources,
    labels: &[Option<bool>],
    n: usize,
    method: SelectionMethod,
    dimension: Dimension,
    cfg: &LrConfig,
) -> Result<SelectionResult> {
    let mut out = SelectionResult {
        dimension,
        method,
        n: 0,
        selected: Vec::new(),
        trace: Vec::new(),
    };
    for &source in sources.sources() {
        let candidates: Vec<usize> = (0..m.n_cols()).filter(|&j| m.columns[j].key.source == source).collect();
        let r = match method {
            SelectionMethod::Rfe => rfe_select(m, &candidates, labels, n, dimension, cfg)?,
            SelectionMethod::Univariate => univariate_select(m, &candidates, labels, n, dimension)?,
        };
        out.n += r.n;
        out.selected.extend(r.selected);
        out.trace.extend(r.trace);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopFeature {
    pub category_id: u32,
    pub name: String,
    pub correlation: Option<f64>,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopFeatureGroup {
    pub dimension: Dimension,
    pub source: Source,
    /// Sorted by absolute correlation, strongest first.
    pub features: Vec<TopFeature>,
}

/// Selected categories per dimension and source with the sign of their
/// label correlation. `correlations[dim][key]` holds the correlations.
pub fn top_feature_report(
    selections: &[SelectionResult],
    correlations: &BTreeMap<Dimension, BTreeMap<FeatureKey, Option<f64>>>,
) -> Vec<TopFeatureGroup> {
    let mut groups = Vec::new();
    for sel in selections {
        for source in [Source::Post, Source::Profile] {
            let mut features: Vec<TopFeature> = sel
                .selected
                .iter()
                .filter(|c| c.key.source == source)
                .map(|c| {
                    let r = correlations.get(&sel.dimension).and_then(|m| m.get(&c.key)).copied().flatten();
                    TopFeature {
                        category_id: c.key.category_id,
                        name: c.name.clone(),
                        correlation: r,
                        positive: r.is_some_and(|v| v > 0.0),
                    }
                })
                .collect();
            if features.is_empty() {
                continue;
            }
            features.sort_by(|a, b| {
                let s = |f: &TopFeature| f.correlation.map_or(0.0, f64::abs);
                s(b).total_cmp(&s(a)).then_with(|| a.category_id.cmp(&b.category_id))
            });
            groups.push(TopFeatureGroup {
                dimension: sel.dimension,
                source,
                features,
            });
        }
    }
    groups
}

/// Plain-text table; positively correlated categories are marked `+`.
pub fn top_feature_text(groups: &[TopFeatureGroup]) -> String {
    let mut out = String::new();
    for g in groups {
        let _ = write!(out, "{} {}:", g.dimension.code(), g.source);
        for f in &g.features {
            let sign = if f.positive { "+" } else { "-" };
            let _ = write!(out, " {sign}{}", f.name);
        }
        out.push('\n');
    }
    out
}
