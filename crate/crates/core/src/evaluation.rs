//! AUC-ROC, k-fold cross-validation and report assembly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FeatureMatrix, FeatureSources, Standardizer};
use crate::dims::{Dimension, N_DIMS};
use crate::error::{Error, Result};
use crate::labels::BinaryLabelSet;
use crate::model::logistic::{train_base, LrConfig};
use crate::model::stack::{stitch_rows, train_stack, CrossStitch, StackConfig, StackData, StitchRow};
use crate::selection::{select_per_source, SelectionMethod, SelectionResult, DEFAULT_N};
use crate::stats::CorrelationMatrix;

/// Rank-based (Mann-Whitney) AUC with half credit for ties. Computed from
/// integer pair counts, so the result is exact.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::degenerate("AUC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the Mann-Whitney U statistic
    let mut u2: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        u2 += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok(u2 as f64 / (2 * n_pos * n_neg) as f64)
}

/// AUC over the users whose label is defined.
pub fn masked_auc(scores: &[f64], labels: &[Option<bool>]) -> Result<f64> {
    let (s, l): (Vec<f64>, Vec<bool>) = scores.iter().zip(labels).filter_map(|(&s, l)| l.map(|v| (s, v))).unzip();
    auc_roc(&s, &l)
}

/// Random (seeded) assignment of users to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub user_ids: Vec<String>,
    /// Fold index per user, aligned with `user_ids`.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn new(user_ids: &[String], k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("fold count must be at least 2"));
        }
        if user_ids.len() < k {
            return Err(Error::degenerate(format!("{} users cannot fill {k} folds", user_ids.len())));
        }
        let mut perm: Vec<usize> = (0..user_ids.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut assignment = vec![0; user_ids.len()];
        for (pos, &u) in perm.iter().enumerate() {
            assignment[u] = pos % k;
        }
        Ok(FoldPlan {
            k,
            seed,
            user_ids: user_ids.to_vec(),
            assignment,
        })
    }

    pub fn fold_of(&self, user_id: &str) -> Option<usize> {
        self.user_ids.iter().position(|u| u == user_id).map(|i| self.assignment[i])
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Labels of `m`'s users in row order.
pub fn align_labels(m: &FeatureMatrix, labels: &[BinaryLabelSet]) -> Result<Vec<[Option<bool>; N_DIMS]>> {
    let by_id: BTreeMap<&str, &BinaryLabelSet> = labels.iter().map(|l| (l.user_id.as_str(), l)).collect();
    m.user_ids
        .iter()
        .map(|u| {
            by_id
                .get(u.as_str())
                .map(|l| l.labels.map(|x| x.as_bool()))
                .ok_or_else(|| Error::invalid(format!("no labels for user `{u}`")))
        })
        .collect()
}

/// Data handed to a model for one fold. Both matrices are standardized
/// with statistics of the training users.
pub struct FoldContext<'a> {
    pub fold: usize,
    pub train: &'a FeatureMatrix,
    pub test: &'a FeatureMatrix,
    pub train_labels: &'a [[Option<bool>; N_DIMS]],
    /// Exposed for oracle models in tests; real models must not read it.
    pub test_labels: &'a [[Option<bool>; N_DIMS]],
    /// Selected column indices per dimension.
    pub selected: &'a [Vec<usize>],
}

impl FoldContext<'_> {
    fn train_labels_of(&self, d: usize) -> Vec<Option<bool>> {
        self.train_labels.iter().map(|l| l[d]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct FoldOutput {
    /// Scores of the test users, per dimension.
    pub scores: [Vec<f64>; N_DIMS],
    pub stitch: Option<CrossStitch>,
}

pub trait FoldModel: Sync {
    fn name(&self) -> String;
    fn fit_score(&self, ctx: &FoldContext) -> Result<FoldOutput>;
}

/// Per-dimension logistic regression.
pub struct BaseLr(pub LrConfig);

impl FoldModel for BaseLr {
    fn name(&self) -> String {
        "base".into()
    }

    fn fit_score(&self, ctx: &FoldContext) -> Result<FoldOutput> {
        let mut scores: [Vec<f64>; N_DIMS] = Default::default();
        for d in 0..N_DIMS {
            if !two_classes(ctx.train_labels.iter().map(|l| &l[d])) {
                scores[d] = vec![0.5; ctx.test.n_rows()];
                continue;
            }
            let (model, _) = train_base(ctx.train, &ctx.train_labels_of(d), Dimension::ALL[d], &ctx.selected[d], &self.0)?;
            scores[d] = model.predict_matrix(ctx.test)?;
        }
        Ok(FoldOutput { scores, stitch: None })
    }
}

/// Cross-stitch stack model scored on its task-shared outputs.
pub struct Stack(pub StackConfig);

impl FoldModel for Stack {
    fn name(&self) -> String {
        "stack".into()
    }

    fn fit_score(&self, ctx: &FoldContext) -> Result<FoldOutput> {
        let data = StackData::from_matrix(ctx.train, ctx.selected, ctx.train_labels.to_vec())?;
        let features = ctx
            .selected
            .iter()
            .map(|cols| cols.iter().map(|&j| ctx.train.columns[j].clone()).collect())
            .collect();
        let trained = train_stack(&data, features, &self.0)?;
        let preds = trained.model.predict_matrix(ctx.test)?;
        let scores = std::array::from_fn(|d| preds.iter().map(|p| p.shared[d]).collect());
        Ok(FoldOutput {
            scores,
            stitch: Some(trained.model.stitch),
        })
    }
}

/// Hooks that see which users feed each fitting step.
pub trait CvObserver: Sync {
    fn on_standardize(&self, _fold: usize, _fit_users: &[String]) {}
    fn on_select(&self, _fold: usize, _dim: Dimension, _users: &[String]) {}
    fn on_fit(&self, _fold: usize, _model: &str, _users: &[String]) {}
    fn on_score(&self, _fold: usize, _dim: Dimension, _users: &[String]) {}
}

struct NoObserver;
impl CvObserver for NoObserver {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    /// Features kept per source and dimension.
    pub n: usize,
    pub method: SelectionMethod,
    pub lr: LrConfig,
    /// Select once on all users instead of inside each fold.
    pub global_selection: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            seed: 0,
            n: DEFAULT_N,
            method: SelectionMethod::Rfe,
            lr: LrConfig::default(),
            global_selection: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dimension: Dimension,
    /// `None` where the test fold held a single class.
    pub fold_aucs: Vec<Option<f64>>,
    pub mean_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingResult {
    /// e.g. `stack post+profile LIWC`.
    pub setting: String,
    pub model: String,
    pub sources: FeatureSources,
    pub lexicon: String,
    pub cells: Vec<CellResult>,
    /// Out-of-fold scores per user, aligned with the report's `user_ids`.
    pub oof_scores: Vec<[f64; N_DIMS]>,
    /// Mean stitch matrix over folds, for stack models.
    pub stitch: Option<Vec<StitchRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRun {
    pub plan: FoldPlan,
    pub config: CvConfig,
    pub sources: FeatureSources,
    pub lexicon: String,
    /// `selections[fold][dim]`.
    pub selections: Vec<Vec<SelectionResult>>,
    pub settings: Vec<SettingResult>,
}

fn mean_defined(v: &[Option<f64>]) -> Option<f64> {
    let xs: Vec<f64> = v.iter().flatten().copied().collect();
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn ids(m: &FeatureMatrix, rows: &[usize]) -> Vec<String> {
    rows.iter().map(|&r| m.user_ids[r].clone()).collect()
}

fn two_classes<'a>(labels: impl IntoIterator<Item = &'a Option<bool>>) -> bool {
    let (mut pos, mut neg) = (false, false);
    for l in labels.into_iter().flatten() {
        pos |= *l;
        neg |= !*l;
    }
    pos && neg
}

fn select_all(
    m: &FeatureMatrix,
    labels: &[[Option<bool>; N_DIMS]],
    sources: FeatureSources,
    cfg: &CvConfig,
) -> Result<Vec<SelectionResult>> {
    Dimension::ALL
        .iter()
        .map(|&d| {
            let l: Vec<Option<bool>> = labels.iter().map(|x| x[d.index()]).collect();
            if two_classes(&l) {
                return select_per_source(m, sources, &l, cfg.n, cfg.method, d, &cfg.lr);
            }
            // Nothing to rank on; keep the first n columns of each source.
            let mut selected = Vec::new();
            for &source in sources.sources() {
                let cols = (0..m.n_cols()).filter(|&j| m.columns[j].key.source == source);
                selected.extend(cols.take(cfg.n).map(|j| m.columns[j].clone()));
            }
            Ok(SelectionResult {
                dimension: d,
                method: cfg.method,
                n: selected.len(),
                selected,
                trace: Vec::new(),
            })
        })
        .collect()
}

/// Cross-validates every model in `models` on the same folds. Within each
/// fold the standardizer and the feature selection see training users
/// only (unless `global_selection` is set). `features` is unstandardized.
pub fn run_cv(
    features: &FeatureMatrix,
    labels: &[[Option<bool>; N_DIMS]],
    sources: FeatureSources,
    lexicon: &str,
    models: &[&dyn FoldModel],
    cfg: &CvConfig,
    observer: Option<&dyn CvObserver>,
) -> Result<CvRun> {
    let observer = observer.unwrap_or(&NoObserver);
    if labels.len() != features.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: features.n_rows(),
            actual: labels.len(),
        });
    }
    for d in Dimension::ALL {
        let pos = labels.iter().filter(|l| l[d.index()] == Some(true)).count();
        let neg = labels.iter().filter(|l| l[d.index()] == Some(false)).count();
        if pos < cfg.k || neg < cfg.k {
            return Err(Error::degenerate(format!(
                "dimension {d} has {pos} positive and {neg} negative users; need at least {} of each",
                cfg.k
            )));
        }
    }
    let plan = FoldPlan::new(&features.user_ids, cfg.k, cfg.seed)?;
    let source_cols = features.columns_for(sources);
    let base = features.select_columns(&source_cols);

    let global = if cfg.global_selection {
        let all: Vec<usize> = (0..base.n_rows()).collect();
        let std = Standardizer::fit(&base, &all)?.transform(&base)?;
        Some(select_all(&std, labels, sources, cfg)?)
    } else {
        None
    };

    let folds: Vec<(Vec<SelectionResult>, Vec<FoldOutput>)> = (0..cfg.k)
        .into_par_iter()
        .map(|fold| -> Result<_> {
            let train_rows = plan.train_rows(fold);
            let test_rows = plan.test_rows(fold);
            let train_ids = ids(&base, &train_rows);
            observer.on_standardize(fold, &train_ids);
            let scaler = Standardizer::fit(&base, &train_rows)?;
            let train = scaler.transform(&base.select_rows(&train_rows))?;
            let test = scaler.transform(&base.select_rows(&test_rows))?;
            let train_labels: Vec<_> = train_rows.iter().map(|&r| labels[r]).collect();
            let test_labels: Vec<_> = test_rows.iter().map(|&r| labels[r]).collect();
            let selections = match &global {
                Some(g) => g.clone(),
                None => {
                    for d in Dimension::ALL {
                        let users: Vec<String> = train_rows
                            .iter()
                            .filter(|&&r| labels[r][d.index()].is_some())
                            .map(|&r| base.user_ids[r].clone())
                            .collect();
                        observer.on_select(fold, d, &users);
                    }
                    select_all(&train, &train_labels, sources, cfg)?
                }
            };
            let selected = selections
                .iter()
                .map(|s| s.column_indices(&train))
                .collect::<Result<Vec<_>>>()?;
            let ctx = FoldContext {
                fold,
                train: &train,
                test: &test,
                train_labels: &train_labels,
                test_labels: &test_labels,
                selected: &selected,
            };
            let mut outputs = Vec::with_capacity(models.len());
            for model in models {
                observer.on_fit(fold, &model.name(), &train_ids);
                outputs.push(model.fit_score(&ctx)?);
            }
            for d in Dimension::ALL {
                let users: Vec<String> = test_rows
                    .iter()
                    .filter(|&&r| labels[r][d.index()].is_some())
                    .map(|&r| base.user_ids[r].clone())
                    .collect();
                observer.on_score(fold, d, &users);
            }
            Ok((selections, outputs))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = base.n_rows();
    let mut settings = Vec::with_capacity(models.len());
    for (mi, model) in models.iter().enumerate() {
        let mut fold_aucs = vec![Vec::with_capacity(cfg.k); N_DIMS];
        let mut oof = vec![[f64::NAN; N_DIMS]; n];
        let mut z_sum = [[0.0; N_DIMS]; N_DIMS];
        let mut has_stitch = false;
        for (fold, (_, outputs)) in folds.iter().enumerate() {
            let out = &outputs[mi];
            let test_rows = plan.test_rows(fold);
            for d in 0..N_DIMS {
                if out.scores[d].len() != test_rows.len() {
                    return Err(Error::DimensionMismatch {
                        expected: test_rows.len(),
                        actual: out.scores[d].len(),
                    });
                }
                let test_labels: Vec<Option<bool>> = test_rows.iter().map(|&r| labels[r][d]).collect();
                let trainable = two_classes(plan.train_rows(fold).iter().map(|&r| &labels[r][d]));
                let auc = match masked_auc(&out.scores[d], &test_labels) {
                    _ if !trainable => {
                        log::warn!("fold {fold}: single-class training labels for {}; AUC missing", Dimension::ALL[d]);
                        None
                    }
                    Ok(a) => Some(a),
                    Err(Error::Degenerate(_)) => {
                        log::warn!("fold {fold}: single-class test labels for {}; AUC missing", Dimension::ALL[d]);
                        None
                    }
                    Err(e) => return Err(e),
                };
                fold_aucs[d].push(auc);
                for (i, &r) in test_rows.iter().enumerate() {
                    oof[r][d] = out.scores[d][i];
                }
            }
            if let Some(s) = &out.stitch {
                has_stitch = true;
                for k in 0..N_DIMS {
                    for d in 0..N_DIMS {
                        z_sum[k][d] += s.z[k][d] / cfg.k as f64;
                    }
                }
            }
        }
        let cells = Dimension::ALL
            .iter()
            .zip(fold_aucs)
            .map(|(&dimension, fold_aucs)| CellResult {
                dimension,
                mean_auc: mean_defined(&fold_aucs),
                fold_aucs,
            })
            .collect();
        let name = model.name();
        settings.push(SettingResult {
            setting: format!("{name} {} {lexicon}", sources.label()),
            model: name,
            sources,
            lexicon: lexicon.to_string(),
            cells,
            oof_scores: oof,
            stitch: has_stitch.then(|| stitch_rows(&CrossStitch { z: z_sum })),
        });
    }
    Ok(CvRun {
        plan,
        config: cfg.clone(),
        sources,
        lexicon: lexicon.to_string(),
        selections: folds.into_iter().map(|(s, _)| s).collect(),
        settings,
    })
}

/// `user_id,CO,ST,OC,HE,SE` with one probability per dimension.
pub fn predictions_to_csv(predictions: &[(String, [f64; N_DIMS])]) -> String {
    let mut out = String::from("user_id,CO,ST,OC,HE,SE\n");
    for (u, p) in predictions {
        out.push_str(u);
        for v in p {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn read_predictions_csv<R: Read>(reader: R) -> Result<Vec<(String, [f64; N_DIMS])>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(["user_id", "CO", "ST", "OC", "HE", "SE"]) {
        return Err(Error::parse(1, "expected header `user_id,CO,ST,OC,HE,SE`"));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        let mut p = [0.0; N_DIMS];
        for (d, v) in p.iter_mut().enumerate() {
            *v = rec[d + 1]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(line, format!("invalid score `{}`", &rec[d + 1])))?;
        }
        out.push((rec[0].to_string(), p));
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<Vec<(String, [f64; N_DIMS])>> {
    read_predictions_csv(std::fs::File::open(path)?)
}

/// Pearson correlations among predicted dimension scores.
pub fn predicted_correlations(predictions: &[[f64; N_DIMS]]) -> Result<CorrelationMatrix> {
    if predictions.len() < 3 {
        return Err(Error::invalid("correlations need at least three users"));
    }
    let columns: Vec<Vec<f64>> = (0..N_DIMS).map(|d| predictions.iter().map(|p| p[d]).collect()).collect();
    Ok(CorrelationMatrix::from_columns(
        Dimension::ALL.iter().map(|d| d.code().to_string()).collect(),
        &columns,
        0.05,
    ))
}

/// The `x` highest-scored users (descending) and the `x` lowest
/// (ascending). Equal scores order by user id.
pub fn top_bottom_users(scores: &[(String, f64)], x: usize) -> Result<(Vec<String>, Vec<String>)> {
    if x == 0 {
        return Err(Error::invalid("x must be positive"));
    }
    if 2 * x > scores.len() {
        return Err(Error::degenerate(format!(
            "x = {x} exceeds half of the {} users",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].1.total_cmp(&scores[a].1).then_with(|| scores[a].0.cmp(&scores[b].0)));
    let top = order[..x].iter().map(|&i| scores[i].0.clone()).collect();
    let mut asc = order.clone();
    asc.sort_by(|&a, &b| scores[a].1.total_cmp(&scores[b].1).then_with(|| scores[a].0.cmp(&scores[b].0)));
    let bottom = asc[..x].iter().map(|&i| scores[i].0.clone()).collect();
    Ok((top, bottom))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub k: usize,
    pub seed: u64,
    pub k_percent: u32,
    pub user_ids: Vec<String>,
    pub runs: Vec<CvRun>,
    /// Correlations of out-of-fold predictions, keyed by setting name.
    pub predicted_correlations: BTreeMap<String, CorrelationMatrix>,
}

impl EvaluationReport {
    pub fn new(k_percent: u32, user_ids: Vec<String>, runs: Vec<CvRun>) -> Self {
        let (k, seed) = runs.first().map_or((0, 0), |r| (r.plan.k, r.plan.seed));
        let mut correlations = BTreeMap::new();
        for run in &runs {
            for s in &run.settings {
                if let Ok(c) = predicted_correlations(&s.oof_scores) {
                    correlations.insert(s.setting.clone(), c);
                }
            }
        }
        EvaluationReport {
            k,
            seed,
            k_percent,
            user_ids,
            runs,
            predicted_correlations: correlations,
        }
    }

    pub fn settings(&self) -> impl Iterator<Item = &SettingResult> {
        self.runs.iter().flat_map(|r| &r.settings)
    }

    pub fn setting(&self, name: &str) -> Option<&SettingResult> {
        self.settings().find(|s| s.setting == name)
    }

    /// Dimensions as rows, settings as columns, cells are mean AUCs.
    pub fn to_table(&self) -> String {
        let settings: Vec<&SettingResult> = self.settings().collect();
        let width = settings.iter().map(|s| s.setting.len()).max().unwrap_or(0).max(6) + 2;
        let mut out = format!("AUC ROC, top {}% task, {}-fold cross validation\n", self.k_percent, self.k);
        let _ = write!(out, "{:<4}", "dim");
        for s in &settings {
            let _ = write!(out, "{:>width$}", s.setting);
        }
        out.push('\n');
        for d in Dimension::ALL {
            let _ = write!(out, "{:<4}", d.code());
            for s in &settings {
                match s.cells[d.index()].mean_auc {
                    Some(a) => {
                        let _ = write!(out, "{:>width$.3}", a);
                    }
                    None => {
                        let _ = write!(out, "{:>width$}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
