use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use valstack_core::behavior::{group_stats, load_edges, load_tweets, BehaviorData, FriendDenominator, Window};
use valstack_core::corpus::{coverage_report, extract_user_features, load_corpus, tokenize, ExtractOptions, FeatureColumn, Standardizer};
use valstack_core::evaluation::{
    align_labels, load_predictions, predicted_correlations, predictions_to_csv, run_cv, BaseLr, EvaluationReport, FoldModel, Stack,
};
use valstack_core::labels::{labels_to_csv, load_labels, load_svs, make_labels, profiles_from_responses, BinaryLabelSet, DimensionMap};
use valstack_core::lexicon::merge_lexicons;
use valstack_core::model::logistic::{train_base, BaseModel, LrConfig};
use valstack_core::model::stack::{stitch_report_text, stitch_weight_report, train_stack, LossMode, StackConfig, StackData, StackHyperparams, StackModel};
use valstack_core::selection::{label_correlations, select_per_source, top_feature_report, top_feature_text, SelectionMethod, SelectionResult, DEFAULT_N};
use valstack_core::sliwc::{build_extension, load_pairs, train_embeddings, train_pair_classifier, EmbeddingTable, PairClassifier, PairTrainingStats};
use valstack_core::synth::SynthDataset;
use valstack_core::{Dimension, FeatureMatrix, FeatureSources, Lexicon, UserRecord, N_DIMS};

use crate::config::{input, Config, LexiconKind, ModelKind};
use crate::error::{CliError, Result, WithPath};
use crate::output::OutDir;

const DEFAULT_Q: usize = 10;
const DEFAULT_THRESHOLD: f64 = 0.5;
const DEFAULT_K_PERCENT: u32 = 50;
const DEFAULT_FOLDS: usize = 5;
/// Share of users in each behavior group when `x` is not given.
const DEFAULT_GROUP_SHARE: f64 = 0.2;

pub fn run(name: &str, mut cfg: Config, out: &Path) -> Result<()> {
    resolve_defaults(name, &mut cfg);
    let text = serde_json::to_string(&cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    log::debug!("{name}: resolved config {text}");
    let mut dir = OutDir::create(out)?;
    dir.write_json("config.json", &cfg)?;
    match name {
        "synth" => synth(&cfg, &mut dir)?,
        "embed" => embed(&cfg, &mut dir)?,
        "build-lexicon" => build_lexicon(&cfg, &mut dir)?,
        "train" => train(&cfg, &mut dir)?,
        "evaluate" => evaluate(&cfg, &mut dir)?,
        "predict" => predict(&cfg, &mut dir)?,
        "analyze-behavior" => analyze_behavior(&cfg, &mut dir)?,
        other => return Err(CliError::Internal(format!("unknown command {other}"))),
    }
    let manifest = dir.finish(name)?;
    log::info!("wrote {}", manifest.display());
    Ok(())
}

/// Fills every setting the command reads, so the written config is complete.
fn resolve_defaults(name: &str, c: &mut Config) {
    let lr = LrConfig::default();
    let stack = StackHyperparams::default();
    match name {
        "synth" => {
            c.synth.get_or_insert_with(Default::default);
        }
        "embed" => {
            c.embedding.get_or_insert_with(Default::default);
        }
        "build-lexicon" => {
            c.q.get_or_insert(DEFAULT_Q);
            c.threshold.get_or_insert(DEFAULT_THRESHOLD);
            c.lr_lambda.get_or_insert(lr.l2_lambda);
        }
        "train" | "evaluate" => {
            c.k_percent.get_or_insert(DEFAULT_K_PERCENT);
            c.n.get_or_insert(DEFAULT_N);
            c.selection.get_or_insert(SelectionMethod::Rfe);
            c.model_kind.get_or_insert(ModelKind::Both);
            c.loss.get_or_insert(LossMode::Nll);
            c.epochs.get_or_insert(stack.epochs);
            c.learning_rate.get_or_insert(stack.learning_rate);
            c.stack_l2.get_or_insert(stack.l2_lambda);
            c.beta_m.get_or_insert(stack.m);
            c.init_std.get_or_insert(stack.init_std);
            c.lr_lambda.get_or_insert(lr.l2_lambda);
            c.literal_features.get_or_insert(false);
            c.seed.get_or_insert(0);
            if name == "train" {
                c.lexicon_kind.get_or_insert(LexiconKind::Liwc);
                c.features.get_or_insert(FeatureSources::PostProfile);
            } else {
                c.folds.get_or_insert(DEFAULT_FOLDS);
                c.global_selection.get_or_insert(false);
                let lexicons = if c.extension.is_some() {
                    vec![LexiconKind::Liwc, LexiconKind::SLiwc]
                } else {
                    vec![LexiconKind::Liwc]
                };
                c.lexicons.get_or_insert(lexicons);
                c.feature_sets
                    .get_or_insert_with(|| vec![FeatureSources::Post, FeatureSources::Profile, FeatureSources::PostProfile]);
            }
        }
        "analyze-behavior" => {
            let w = Window::january_2017();
            c.window_start.get_or_insert(w.start);
            c.window_end.get_or_insert(w.end);
            c.denominator.get_or_insert(FriendDenominator::Followers);
        }
        _ => {}
    }
}

fn lr_config(c: &Config) -> LrConfig {
    LrConfig {
        l2_lambda: c.lr_lambda.unwrap_or(LrConfig::default().l2_lambda),
        ..LrConfig::default()
    }
}

fn stack_config(c: &Config) -> StackConfig {
    let d = StackHyperparams::default();
    StackConfig {
        hyperparams: StackHyperparams {
            m: c.beta_m.unwrap_or(d.m),
            learning_rate: c.learning_rate.unwrap_or(d.learning_rate),
            epochs: c.epochs.unwrap_or(d.epochs),
            l2_lambda: c.stack_l2.unwrap_or(d.l2_lambda),
            seed: c.seed.unwrap_or(d.seed),
            batch_size: c.batch_size,
            init_std: c.init_std.unwrap_or(d.init_std),
        },
        loss_mode: c.loss.unwrap_or_default(),
    }
}

fn extract_options(c: &Config) -> ExtractOptions {
    if c.literal_features == Some(true) {
        ExtractOptions::literal()
    } else {
        ExtractOptions::default()
    }
}

fn synth(c: &Config, dir: &mut OutDir) -> Result<()> {
    let gen = c.synth.clone().unwrap_or_default();
    log::info!("synth: seed {} for {} users", gen.seed, gen.n_users);
    let ds = SynthDataset::generate(&gen)?;
    for path in ds.write_dir(dir.root())? {
        dir.record(path);
    }
    println!("wrote {} users to {}", ds.users.len(), dir.root().display());
    Ok(())
}

fn corpus(c: &Config) -> Result<Vec<UserRecord>> {
    let path = input(&c.corpus, "corpus")?;
    load_corpus(path).at(path)
}

fn embed(c: &Config, dir: &mut OutDir) -> Result<()> {
    let users = corpus(c)?;
    let sgns = c.embedding.unwrap_or_default();
    log::info!("embed: seed {}", sgns.seed);
    let docs: Vec<Vec<String>> = users
        .iter()
        .flat_map(|u| u.posts.iter().chain(&u.profile_texts))
        .map(|d| tokenize(d))
        .filter(|t| !t.is_empty())
        .collect();
    let emb = train_embeddings(&docs, &sgns)?;
    let mut buf = Vec::new();
    emb.write_text(&mut buf)?;
    dir.write("embeddings.txt", buf)?;
    println!("trained {} word vectors of dimension {}", emb.len(), emb.dim());
    Ok(())
}

fn build_lexicon(c: &Config, dir: &mut OutDir) -> Result<()> {
    let lex_path = input(&c.lexicon, "lexicon")?;
    let emb_path = input(&c.embeddings, "embeddings")?;
    let pairs_path = input(&c.pairs, "pairs")?;
    let q = c.q.unwrap_or(DEFAULT_Q);
    let threshold = c.threshold.unwrap_or(DEFAULT_THRESHOLD);
    if q == 0 {
        return Err(CliError::Config("--q must be positive".into()));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Config(format!("--threshold must lie in [0, 1], got {threshold}")));
    }
    let base = Lexicon::load(lex_path).at(lex_path)?;
    let emb = EmbeddingTable::load(emb_path).at(emb_path)?;
    let pairs = load_pairs(pairs_path).at(pairs_path)?;

    let (clf, stats) = train_pair_classifier(&pairs.synonyms, &pairs.antonyms, &emb, &lr_config(c))?;
    log::info!(
        "pair classifier: {} synonyms, {} antonyms, {} dropped, train accuracy {:.3}",
        stats.synonyms_used,
        stats.antonyms_used,
        stats.dropped_oov,
        stats.train_accuracy
    );
    let build = build_extension(&base, &emb, &clf, q, threshold)?;
    dir.write("extension.dic", build.extension.to_dic())?;
    let mut audit = Vec::new();
    build.write_audit_jsonl(&mut audit)?;
    dir.write("audit.jsonl", audit)?;

    #[derive(Serialize)]
    struct ClassifierFile<'a> {
        classifier: &'a PairClassifier,
        training: &'a PairTrainingStats,
        skipped_seeds: &'a [String],
    }
    dir.write_json(
        "pair_classifier.json",
        &ClassifierFile {
            classifier: &clf,
            training: &stats,
            skipped_seeds: &build.skipped_seeds,
        },
    )?;
    if c.corpus.is_some() {
        let users = corpus(c)?;
        dir.write_json("coverage.json", &coverage_report(&base, &build.extension, &users)?)?;
    }
    println!("added {} words", build.added_words());
    Ok(())
}

fn load_lexicon(c: &Config, kind: LexiconKind) -> Result<Lexicon> {
    let path = input(&c.lexicon, "lexicon")?;
    let base = Lexicon::load(path).at(path)?;
    match kind {
        LexiconKind::Liwc => Ok(base),
        LexiconKind::SLiwc => {
            let ext_path = input(&c.extension, "extension")?;
            let ext = Lexicon::load(ext_path).at(ext_path)?;
            merge_lexicons(&base, &ext).at(ext_path)
        }
    }
}

/// Labels from a labels file, or from survey answers through the
/// dimension map.
fn load_label_sets(c: &Config) -> Result<Vec<BinaryLabelSet>> {
    if c.labels.is_some() {
        let path = input(&c.labels, "labels")?;
        return load_labels(path).at(path);
    }
    if c.svs.is_none() {
        return Err(CliError::Config("labels are required: pass --labels or --svs with --dimension-map".into()));
    }
    let svs_path = input(&c.svs, "svs")?;
    let map_path = input(&c.dimension_map, "dimension-map")?;
    let responses = load_svs(svs_path).at(svs_path)?;
    let n_items = responses
        .first()
        .map(|r| r.ratings.len())
        .ok_or_else(|| CliError::Config(format!("{}: no survey responses", svs_path.display())))?;
    let map = DimensionMap::load(map_path, n_items).at(map_path)?;
    let profiles = profiles_from_responses(&responses, &map)?;
    Ok(make_labels(&profiles, c.k_percent.unwrap_or(DEFAULT_K_PERCENT))?)
}

fn check_k(c: &Config) -> Result<()> {
    match c.k_percent {
        Some(k) if !(1..=50).contains(&k) => Err(CliError::Config(format!("--k-percent must be in 1..=50, got {k}"))),
        Some(k) if k != 50 && k != 40 => {
            log::warn!("K = {k}%; the reference settings are 50 and 40");
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Everything `predict` needs to score new users.
#[derive(Debug, Serialize, Deserialize)]
struct ModelBundle {
    lexicon_kind: LexiconKind,
    features: FeatureSources,
    extract: ExtractOptions,
    /// Columns the standardizer was fitted on, in order.
    columns: Vec<FeatureColumn>,
    standardizer: Standardizer,
    k_percent: u32,
    selections: Vec<SelectionResult>,
    base: Vec<BaseModel>,
    stack: Option<StackModel>,
}

fn train(c: &Config, dir: &mut OutDir) -> Result<()> {
    check_k(c)?;
    let kind = c.lexicon_kind.unwrap_or(LexiconKind::Liwc);
    let sources = c.features.unwrap_or(FeatureSources::PostProfile);
    let model_kind = c.model_kind.unwrap_or(ModelKind::Both);
    let users = corpus(c)?;
    let lex = load_lexicon(c, kind)?;
    let label_sets = load_label_sets(c)?;
    let extract = extract_options(c);
    let raw = extract_user_features(&lex, &users, extract)?;
    let labels = align_labels(&raw, &label_sets)?;

    let sub = raw.select_columns(&raw.columns_for(sources));
    let all: Vec<usize> = (0..sub.n_rows()).collect();
    let standardizer = Standardizer::fit(&sub, &all)?;
    let m = standardizer.transform(&sub)?;

    let lr = lr_config(c);
    let n = c.n.unwrap_or(DEFAULT_N);
    let method = c.selection.unwrap_or(SelectionMethod::Rfe);
    let mut selections = Vec::with_capacity(N_DIMS);
    let mut correlations = BTreeMap::new();
    for d in Dimension::ALL {
        let y: Vec<Option<bool>> = labels.iter().map(|l| l[d.index()]).collect();
        selections.push(select_per_source(&m, sources, &y, n, method, d, &lr)?);
        let r = label_correlations(&m, &y);
        correlations.insert(d, m.columns.iter().map(|col| col.key).zip(r).collect());
    }
    let selected = selections.iter().map(|s| s.column_indices(&m)).collect::<valstack_core::Result<Vec<_>>>()?;

    let mut base = Vec::new();
    if model_kind.base() {
        for d in Dimension::ALL {
            let y: Vec<Option<bool>> = labels.iter().map(|l| l[d.index()]).collect();
            base.push(train_base(&m, &y, d, &selected[d.index()], &lr)?.0);
        }
    }
    let stack = if model_kind.stack() {
        let cfg = stack_config(c);
        log::info!("stack: seed {}, {} epochs, loss {:?}", cfg.hyperparams.seed, cfg.hyperparams.epochs, cfg.loss_mode);
        let data = StackData::from_matrix(&m, &selected, labels.clone())?;
        let features = selections.iter().map(|s| s.selected.clone()).collect();
        let trained = train_stack(&data, features, &cfg)?;
        let trace = &trained.loss_trace;
        let step = (trace.len() / 10).max(1);
        for (e, v) in trace.iter().enumerate().step_by(step) {
            log::info!("stack loss at epoch {e}: {v:.6}");
        }
        log::info!("stack loss after training: {:.6}", trace.last().copied().unwrap_or(f64::NAN));
        let mut csv = String::from("epoch,loss\n");
        for (e, v) in trace.iter().enumerate() {
            csv.push_str(&format!("{e},{v}\n"));
        }
        dir.write("loss_trace.csv", csv)?;
        dir.write("stitch.txt", stitch_report_text(&stitch_weight_report(&trained.model)))?;
        Some(trained.model)
    } else {
        None
    };

    dir.write("labels.csv", labels_to_csv(&label_sets))?;
    dir.write_json("selection.json", &selections)?;
    dir.write("top_features.txt", top_feature_text(&top_feature_report(&selections, &correlations)))?;
    let bundle = ModelBundle {
        lexicon_kind: kind,
        features: sources,
        extract,
        columns: m.columns.clone(),
        standardizer,
        k_percent: c.k_percent.unwrap_or(DEFAULT_K_PERCENT),
        selections,
        base,
        stack,
    };
    let path = dir.write_json("model.json", &bundle)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn evaluate(c: &Config, dir: &mut OutDir) -> Result<()> {
    check_k(c)?;
    let users = corpus(c)?;
    let label_sets = load_label_sets(c)?;
    let model_kind = c.model_kind.unwrap_or(ModelKind::Both);
    let cv = valstack_core::evaluation::CvConfig {
        k: c.folds.unwrap_or(DEFAULT_FOLDS),
        seed: c.seed.unwrap_or(0),
        n: c.n.unwrap_or(DEFAULT_N),
        method: c.selection.unwrap_or(SelectionMethod::Rfe),
        lr: lr_config(c),
        global_selection: c.global_selection.unwrap_or(false),
    };
    if users.len() < cv.k {
        return Err(CliError::Core(valstack_core::Error::Degenerate(format!(
            "{} users cannot fill {} folds",
            users.len(),
            cv.k
        ))));
    }
    log::info!("evaluate: fold seed {}, stack seed {}", cv.seed, stack_config(c).hyperparams.seed);
    let base = BaseLr(cv.lr);
    let stack = Stack(stack_config(c));
    let mut models: Vec<&dyn FoldModel> = Vec::new();
    if model_kind.base() {
        models.push(&base);
    }
    if model_kind.stack() {
        models.push(&stack);
    }
    let mut runs = Vec::new();
    let mut user_ids = Vec::new();
    for &kind in c.lexicons.as_deref().unwrap_or(&[LexiconKind::Liwc]) {
        let lex = load_lexicon(c, kind)?;
        let raw = extract_user_features(&lex, &users, extract_options(c))?;
        let labels = align_labels(&raw, &label_sets)?;
        for &sources in c.feature_sets.as_deref().unwrap_or(&[FeatureSources::PostProfile]) {
            log::info!("cross-validating {} {}", sources.label(), kind.label());
            runs.push(run_cv(&raw, &labels, sources, kind.label(), &models, &cv, None)?);
        }
        user_ids = raw.user_ids.clone();
    }
    let report = EvaluationReport::new(c.k_percent.unwrap_or(DEFAULT_K_PERCENT), user_ids, runs);
    let mut text = report.to_table();
    for s in report.settings() {
        if let Some(rows) = &s.stitch {
            text.push_str(&format!("\nmean cross-stitch weights, {}\n", s.setting));
            text.push_str(&stitch_report_text(rows));
        }
    }
    dir.write_json("report.json", &report)?;
    dir.write("report.txt", &text)?;
    print!("{text}");
    Ok(())
}

fn predict(c: &Config, dir: &mut OutDir) -> Result<()> {
    let model_path = input(&c.model, "model")?;
    let text = std::fs::read_to_string(model_path).map_err(|e| CliError::File {
        path: model_path.to_path_buf(),
        source: e.into(),
    })?;
    let bundle: ModelBundle = serde_json::from_str(&text).map_err(|e| CliError::File {
        path: model_path.to_path_buf(),
        source: e.into(),
    })?;
    let users = corpus(c)?;
    let lex = load_lexicon(c, bundle.lexicon_kind)?;
    let raw = extract_user_features(&lex, &users, bundle.extract)?;
    let sub = raw.select_columns(&raw.columns_for(bundle.features));
    if sub.columns != bundle.columns {
        return Err(CliError::Config(format!(
            "the lexicon's categories do not match the {} columns the model was trained on",
            bundle.columns.len()
        )));
    }
    let m: FeatureMatrix = bundle.standardizer.transform(&sub)?;
    let scores: Vec<[f64; N_DIMS]> = match &bundle.stack {
        Some(stack) => stack.predict_matrix(&m)?.into_iter().map(|p| p.shared).collect(),
        None => {
            let per_dim = bundle.base.iter().map(|b| b.predict_matrix(&m)).collect::<valstack_core::Result<Vec<_>>>()?;
            if per_dim.len() != N_DIMS {
                return Err(CliError::Config(format!("{}: the model file holds no models", model_path.display())));
            }
            (0..m.n_rows()).map(|i| std::array::from_fn(|d| per_dim[d][i])).collect()
        }
    };
    let rows: Vec<(String, [f64; N_DIMS])> = m.user_ids.iter().cloned().zip(scores.iter().copied()).collect();
    dir.write("predictions.csv", predictions_to_csv(&rows))?;
    match predicted_correlations(&scores) {
        Ok(corr) => {
            dir.write_json("predicted_correlations.json", &corr)?;
        }
        Err(e) => log::warn!("no prediction correlations: {e}"),
    }
    println!("scored {} users", rows.len());
    Ok(())
}

fn analyze_behavior(c: &Config, dir: &mut OutDir) -> Result<()> {
    let pred_path = input(&c.predictions, "predictions")?;
    let tweets_path = input(&c.tweets, "tweets")?;
    let edges_path = input(&c.edges, "edges")?;
    let predictions = load_predictions(pred_path).at(pred_path)?;
    let tweets = load_tweets(tweets_path).at(tweets_path)?;
    let edges = load_edges(edges_path).at(edges_path)?;
    let window = Window::new(
        c.window_start.unwrap_or(Window::january_2017().start),
        c.window_end.unwrap_or(Window::january_2017().end),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let x = match c.x {
        Some(x) => x,
        None => ((predictions.len() as f64 * DEFAULT_GROUP_SHARE).floor() as usize).max(1),
    };
    log::info!("behavior: x = {x} of {} users", predictions.len());
    let data = BehaviorData::new(&tweets, &edges);
    let report = group_stats(&predictions, &data, x, window, c.denominator.unwrap_or_default())?;
    dir.write("behavior.csv", report.to_csv())?;
    dir.write_json("hypotheses.json", &report.hypotheses)?;
    dir.write_json("behavior.json", &report)?;
    for h in &report.hypotheses {
        let diff = h.difference.map_or("-".to_string(), |v| format!("{v:+.4}"));
        println!("{} {:?}: high - low = {diff}", h.dimension.code(), h.metric);
    }
    Ok(())
}
