use std::collections::BTreeSet;
use std::sync::Mutex;

use ndarray::Array2;
use proptest::prelude::*;

use valstack_core::behavior::{friend_follower_ratio, retweet_ratio, BehaviorData, FollowEdge, FollowGraph, FriendDenominator, TweetRecord, Window};
use valstack_core::corpus::{coverage_report, extract_user_features, fit_standardizer, ExtractOptions, FeatureColumn, FeatureKey};
use valstack_core::evaluation::{auc_roc, run_cv, top_bottom_users, BaseLr, CvConfig, CvObserver, FoldPlan};
use valstack_core::labels::{center_response, cronbach_alpha, dimension_correlations, make_labels};
use valstack_core::lexicon::{demo_extension, demo_lexicon, merge_lexicons, Category, Entry};
use valstack_core::model::logistic::LrConfig;
use valstack_core::model::stack::{predict_task_specific, train_stack, StackConfig, StackData, StackHyperparams, StackModel, TaskHead};
use valstack_core::selection::{label_correlations, rfe_select, SelectionMethod};
use valstack_core::sliwc::{build_extension, Decision, EmbeddingTable, PairClassifier, PairRecipe};
use valstack_core::synth::{planted_blocks, GeneratorConfig, SynthDataset, DETECTION_EFFECT};
use valstack_core::{Dimension, FeatureMatrix, FeatureSources, Lexicon, Source, UserRecord, ValueProfile, N_DIMS};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

fn word() -> impl Strategy<Value = String> {
    "[abc]{1,4}"
}

fn lexicon_strategy() -> impl Strategy<Value = Lexicon> {
    (1u32..5).prop_flat_map(|k| {
        let entry = (word(), any::<bool>(), proptest::collection::btree_set(1..=k, 1..=k as usize));
        proptest::collection::vec(entry, 0..12).prop_map(move |raw| {
            let cats = (1..=k).map(|id| Category { id, name: format!("cat{id}") }).collect();
            let entries = raw
                .into_iter()
                .map(|(w, stem, c)| if stem { Entry::stem(&w, c) } else { Entry::literal(&w, c) })
                .collect();
            Lexicon::new(cats, entries).unwrap()
        })
    })
}

fn tokens() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec("[abcd]{1,5}", 0..30)
}

fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> FeatureMatrix {
    let columns = (0..cols)
        .map(|j| FeatureColumn {
            key: FeatureKey {
                source: Source::Post,
                category_id: j as u32 + 1,
            },
            name: format!("c{j}"),
        })
        .collect();
    let ids = (0..rows).map(|i| format!("u{i:03}")).collect();
    FeatureMatrix::new(ids, columns, Array2::from_shape_vec((rows, cols), values).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn scoring_is_deterministic(lex in lexicon_strategy(), t in tokens()) {
        prop_assert_eq!(lex.score_tokens(&t), lex.score_tokens(&t));
    }

    #[test]
    fn scoring_is_additive(lex in lexicon_strategy(), a in tokens(), b in tokens()) {
        let ab: Vec<String> = a.iter().chain(&b).cloned().collect();
        let (sa, sb, sab) = (lex.score_tokens(&a), lex.score_tokens(&b), lex.score_tokens(&ab));
        for i in 0..sab.raw_counts.len() {
            prop_assert_eq!(sab.raw_counts[i], sa.raw_counts[i] + sb.raw_counts[i]);
        }
        prop_assert_eq!(sab.total_tokens, sa.total_tokens + sb.total_tokens);
    }

    #[test]
    fn merge_never_lowers_counts(base in lexicon_strategy(), extra in proptest::collection::vec((word(), any::<bool>()), 0..8), t in tokens()) {
        let ids: Vec<u32> = base.categories().iter().map(|c| c.id).collect();
        let entries = extra
            .iter()
            .enumerate()
            .map(|(i, (w, stem))| {
                let c = [ids[i % ids.len()]];
                if *stem { Entry::stem(w, c) } else { Entry::literal(w, c) }
            })
            .collect();
        let ext = Lexicon::new(base.categories().to_vec(), entries).unwrap();
        let merged = merge_lexicons(&base, &ext).unwrap();
        let (b, m) = (base.score_tokens(&t), merged.score_tokens(&t));
        for i in 0..b.raw_counts.len() {
            prop_assert!(m.raw_counts[i] >= b.raw_counts[i]);
        }
    }

    #[test]
    fn dictionary_round_trip(lex in lexicon_strategy()) {
        prop_assert_eq!(Lexicon::parse_dic(&lex.to_dic()).unwrap(), lex);
    }

    #[test]
    fn post_order_does_not_change_features(posts in proptest::collection::vec("[a-z ]{0,40}", 1..6), rot in 0usize..6) {
        let lex = demo_lexicon();
        let mut words: Vec<String> = lex.entries().iter().map(|e| e.pattern.clone()).collect();
        words.truncate(8);
        let posts: Vec<String> = posts.iter().enumerate().map(|(i, p)| format!("{p} {}", words[i % words.len()])).collect();
        let mut shuffled = posts.clone();
        shuffled.rotate_left(rot % posts.len());
        shuffled.reverse();
        let user = |posts: Vec<String>| UserRecord { user_id: "u".into(), posts, profile_texts: vec!["x".into()] };
        let a = extract_user_features(&lex, &[user(posts)], ExtractOptions::default()).unwrap();
        let b = extract_user_features(&lex, &[user(shuffled)], ExtractOptions::default()).unwrap();
        prop_assert_eq!(a.values, b.values);
    }

    #[test]
    fn standardized_fit_rows_have_unit_moments(rows in 2usize..12, cols in 1usize..5, seed in proptest::collection::vec(-100.0f64..100.0, 60)) {
        let values: Vec<f64> = (0..rows * cols).map(|i| seed[i % seed.len()] * (1.0 + i as f64 / 7.0)).collect();
        let m = matrix(rows, cols, values);
        let fit: Vec<usize> = (0..rows).collect();
        let s = fit_standardizer(&m, &fit).unwrap();
        let std = s.scaling.as_ref().unwrap();
        for j in 0..cols {
            let col = s.values.column(j);
            let mean = col.sum() / rows as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
            prop_assert!(mean.abs() <= 1e-9);
            if std.stds[j] == 0.0 {
                prop_assert!(col.iter().all(|&v| v == 0.0));
            } else {
                prop_assert!((var.sqrt() - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn coverage_merged_at_least_base(texts in proptest::collection::vec(proptest::collection::vec(0usize..40, 0..10), 1..5)) {
        let (base, ext) = (demo_lexicon(), demo_extension());
        let mut pool: Vec<String> = base.entries().iter().chain(ext.entries()).map(|e| e.pattern.clone()).collect();
        pool.extend(["zzq", "blorp", "qux"].map(String::from));
        let users: Vec<UserRecord> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let text: Vec<&str> = t.iter().map(|&k| pool[k % pool.len()].as_str()).collect();
                UserRecord { user_id: format!("u{i}"), posts: vec![text.join(" ")], profile_texts: vec![text.join(" ")] }
            })
            .collect();
        let r = coverage_report(&base, &ext, &users).unwrap();
        prop_assert!(r.post.merged_matched >= r.post.base_matched);
        prop_assert!(r.profile.merged_matched >= r.profile.base_matched);
    }

    #[test]
    fn centered_response_sums_to_zero(r in proptest::collection::vec(-1.0f64..7.0, 56)) {
        let c = center_response(&r);
        prop_assert!(c.iter().sum::<f64>().abs() <= 1e-12 * 56.0);
    }

    #[test]
    fn label_classes_balanced(scores in proptest::collection::vec(proptest::array::uniform5(-3.0f64..3.0), 2..60), k in 1u32..=50) {
        let profiles: Vec<ValueProfile> = scores
            .iter()
            .enumerate()
            .map(|(i, s)| ValueProfile { user_id: format!("u{i:03}"), scores: *s })
            .collect();
        let labels = make_labels(&profiles, k).unwrap();
        for d in Dimension::ALL {
            let pos = labels.iter().filter(|l| l.get(d).as_bool() == Some(true)).count();
            let neg = labels.iter().filter(|l| l.get(d).as_bool() == Some(false)).count();
            prop_assert!(pos == neg || pos == neg + 1, "pos {} neg {}", pos, neg);
        }
    }

    #[test]
    fn alpha_is_scale_invariant(items in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 4), 3..20), c in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0]) {
        if let Ok(a) = cronbach_alpha(&items) {
            let scaled: Vec<Vec<f64>> = items.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
            let b = cronbach_alpha(&scaled).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn dimension_correlations_symmetric(scores in proptest::collection::vec(proptest::array::uniform5(-3.0f64..3.0), 4..40)) {
        let profiles: Vec<ValueProfile> = scores
            .iter()
            .enumerate()
            .map(|(i, s)| ValueProfile { user_id: format!("u{i}"), scores: *s })
            .collect();
        let c = dimension_correlations(&profiles).unwrap();
        for i in 0..N_DIMS {
            if let Some(v) = c.r[i][i] {
                prop_assert!((v - 1.0).abs() <= 1e-12);
            }
            for j in 0..N_DIMS {
                prop_assert_eq!(c.r[i][j], c.r[j][i]);
            }
        }
    }

    #[test]
    fn auc_flip_complements(pairs in proptest::collection::vec((-50i32..50, any::<bool>()), 2..60)) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let sum = auc_roc(&scores, &labels).unwrap() + auc_roc(&scores, &flipped).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_transform(pairs in proptest::collection::vec((-50i32..50, any::<bool>()), 2..60)) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let moved: Vec<f64> = scores.iter().map(|x| x.powi(3) + 2.0 * x - 7.0).collect();
        prop_assert_eq!(auc_roc(&scores, &labels).unwrap(), auc_roc(&moved, &labels).unwrap());
    }

    #[test]
    fn fold_plan_reproducible(n in 2usize..80, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let ids: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
        let a = FoldPlan::new(&ids, k, seed).unwrap();
        prop_assert_eq!(&a, &FoldPlan::new(&ids, k, seed).unwrap());
        let sizes = a.fold_sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn cosine_self_and_symmetry(vs in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 2..8)) {
        let words: Vec<String> = (0..vs.len()).map(|i| format!("w{i}")).collect();
        let emb = EmbeddingTable::new(words.clone(), vs.clone()).unwrap();
        for (i, a) in words.iter().enumerate() {
            if vs[i].iter().any(|&x| x != 0.0) {
                prop_assert!((emb.similarity(a, a).unwrap() - 1.0).abs() <= 1e-9);
            }
            for b in &words {
                prop_assert_eq!(emb.similarity(a, b), emb.similarity(b, a));
            }
        }
    }

    #[test]
    fn extension_audit_complete(vs in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), 6..14), w in proptest::collection::vec(-2.0f64..2.0, 8), threshold in 0.0f64..1.0) {
        let words: Vec<String> = (0..vs.len()).map(|i| format!("w{i}")).collect();
        let emb = EmbeddingTable::new(words, vs).unwrap();
        let cats = vec![Category { id: 1, name: "a".into() }, Category { id: 2, name: "b".into() }];
        let base = Lexicon::new(cats, vec![Entry::literal("w0", [1]), Entry::literal("w1", [2]), Entry::stem("w2", [1, 2])]).unwrap();
        let clf = PairClassifier { recipe: PairRecipe::ConcatDiffProduct, dim: 2, weights: w, intercept: 0.0, l2_lambda: 1.0 };
        let build = build_extension(&base, &emb, &clf, 4, threshold).unwrap();
        for e in build.extension.entries() {
            let recs: Vec<_> = build.audit.iter().filter(|r| r.candidate == e.pattern && r.decision == Decision::Accepted).collect();
            prop_assert!(!recs.is_empty());
            for r in recs {
                prop_assert!(r.similarity.is_finite());
                prop_assert!(r.score.is_some_and(|s| s >= threshold));
                prop_assert!(e.categories.is_superset(&r.seed_categories.iter().copied().collect()));
            }
        }
        let merged = merge_lexicons(&base, &build.extension).unwrap();
        prop_assert_eq!(Lexicon::parse_dic(&merged.to_dic()).unwrap(), merged);
    }

    #[test]
    fn behavior_ignores_duplicates(flags in proptest::collection::vec((any::<bool>(), 0u8..4), 1..30), dup in proptest::collection::vec(0usize..30, 0..10)) {
        let w = Window::january_2017();
        let tweets: Vec<TweetRecord> = flags
            .iter()
            .enumerate()
            .map(|(i, &(rt, u))| TweetRecord { user_id: format!("u{u}"), tweet_id: format!("t{i}"), is_retweet: rt, timestamp: w.start + i as i64 })
            .collect();
        let edges: Vec<FollowEdge> = flags
            .iter()
            .map(|&(rt, u)| FollowEdge { follower_id: format!("u{u}"), followee_id: format!("u{}", (u + 1 + rt as u8) % 4) })
            .collect();
        let mut tweets_dup = tweets.clone();
        let mut edges_dup = edges.clone();
        for &i in &dup {
            tweets_dup.push(tweets[i % tweets.len()].clone());
            edges_dup.push(edges[i % edges.len()].clone());
        }
        let (a, b) = (BehaviorData::new(&tweets, &edges), BehaviorData::new(&tweets_dup, &edges_dup));
        let (ga, gb) = (FollowGraph::new(&edges), FollowGraph::new(&edges_dup));
        for u in 0..4 {
            let u = format!("u{u}");
            prop_assert_eq!(a.user(&u, w, FriendDenominator::Followers), b.user(&u, w, FriendDenominator::Followers));
            prop_assert_eq!(friend_follower_ratio(&ga, &u, FriendDenominator::Followers), friend_follower_ratio(&gb, &u, FriendDenominator::Followers));
            let own: Vec<&TweetRecord> = tweets.iter().filter(|t| t.user_id == u).collect();
            prop_assert_eq!(a.user(&u, w, FriendDenominator::Followers).retweet_ratio, retweet_ratio(own, w));
        }
    }

    #[test]
    fn top_sets_nest(scores in proptest::collection::vec(-5i32..5, 4..40), x in 1usize..20) {
        let s: Vec<(String, f64)> = scores.iter().enumerate().map(|(i, &v)| (format!("u{i:02}"), v as f64)).collect();
        prop_assume!(2 * (x + 1) <= s.len());
        let (top, bottom) = top_bottom_users(&s, x).unwrap();
        let (top1, bottom1) = top_bottom_users(&s, x + 1).unwrap();
        let (top1, bottom1): (BTreeSet<_>, BTreeSet<_>) = (top1.into_iter().collect(), bottom1.into_iter().collect());
        prop_assert!(top.iter().all(|u| top1.contains(u)));
        prop_assert!(bottom.iter().all(|u| bottom1.contains(u)));
    }
}

fn random_labels(n: usize, bits: &[bool]) -> Vec<Option<bool>> {
    let mut y: Vec<Option<bool>> = (0..n).map(|i| Some(bits[i % bits.len()])).collect();
    y[0] = Some(true);
    y[1] = Some(false);
    y
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn rfe_full_size_is_identity(vals in proptest::collection::vec(-2.0f64..2.0, 30 * 6), bits in proptest::collection::vec(any::<bool>(), 30)) {
        let m = matrix(30, 6, vals);
        let y = random_labels(30, &bits);
        let cands: Vec<usize> = (0..6).collect();
        let r = rfe_select(&m, &cands, &y, 6, Dimension::OpennessToChange, &LrConfig::default()).unwrap();
        prop_assert_eq!(r.column_indices(&m).unwrap(), cands);
        prop_assert!(r.trace.is_empty());
    }

    #[test]
    fn rfe_is_deterministic(vals in proptest::collection::vec(-2.0f64..2.0, 30 * 6), bits in proptest::collection::vec(any::<bool>(), 30), n in 1usize..6) {
        let m = matrix(30, 6, vals);
        let y = random_labels(30, &bits);
        let cands: Vec<usize> = (0..6).collect();
        let a = rfe_select(&m, &cands, &y, n, Dimension::OpennessToChange, &LrConfig::default()).unwrap();
        let b = rfe_select(&m, &cands, &y, n, Dimension::OpennessToChange, &LrConfig::default()).unwrap();
        prop_assert_eq!(a.trace.len(), 6 - n);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn head_link_is_monotone(a in -3.0f64..3.0, b in -3.0f64..3.0, x1 in -5.0f64..5.0, x2 in -5.0f64..5.0) {
        let head = TaskHead { dim: Dimension::Hedonism, features: Vec::new(), a: vec![a], b };
        let (s1, s2) = (a * x1 + b, a * x2 + b);
        let (p1, p2) = (predict_task_specific(&head, &[x1]).unwrap(), predict_task_specific(&head, &[x2]).unwrap());
        prop_assert_eq!(s1.partial_cmp(&s2), p1.partial_cmp(&p2));
    }

    #[test]
    fn stack_behaviour(vals in proptest::collection::vec(-2.0f64..2.0, 16 * 2), bits in proptest::collection::vec(any::<bool>(), 16 * N_DIMS), seed in any::<u64>()) {
        let x: Vec<Array2<f64>> = (0..N_DIMS).map(|d| Array2::from_shape_fn((16, 2), |(i, j)| vals[(i * 2 + j + d) % vals.len()])).collect();
        let labels: Vec<[Option<bool>; N_DIMS]> = (0..16).map(|i| std::array::from_fn(|d| if (i + d) % 7 == 3 { None } else { Some(bits[i * N_DIMS + d]) })).collect();
        let data = StackData::new(x.clone(), labels).unwrap();
        let features: Vec<Vec<FeatureColumn>> = (0..N_DIMS)
            .map(|d| (0..2).map(|j| FeatureColumn { key: FeatureKey { source: Source::Post, category_id: (d * 2 + j + 1) as u32 }, name: format!("f{d}{j}") }).collect())
            .collect();
        let cfg = StackConfig {
            hyperparams: StackHyperparams { epochs: 40, seed, learning_rate: 0.5, l2_lambda: 0.01, init_std: 0.5, ..StackHyperparams::default() },
            ..StackConfig::default()
        };

        let init = StackModel::initialize(features.clone(), &cfg).unwrap();
        for p in init.predict_data(&data).unwrap() {
            for d in 0..N_DIMS {
                let expect = 1.0 / (1.0 + (-p.specific[d]).exp());
                prop_assert!((p.shared[d] - expect).abs() <= 1e-12);
            }
        }

        let a = train_stack(&data, features.clone(), &cfg).unwrap();
        let b = train_stack(&data, features, &cfg).unwrap();
        let bits_a: Vec<u64> = a.loss_trace.iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u64> = b.loss_trace.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(bits_a, bits_b);

        let json = serde_json::to_string(&a.model).unwrap();
        let back: StackModel = serde_json::from_str(&json).unwrap();
        let (p, q) = (a.model.predict_data(&data).unwrap(), back.predict_data(&data).unwrap());
        for (p, q) in p.iter().zip(&q) {
            for d in 0..N_DIMS {
                for v in [p.specific[d], p.shared[d]] {
                    prop_assert!(v > 0.0 && v < 1.0);
                }
                prop_assert!((p.shared[d] - q.shared[d]).abs() <= 1e-12);
                prop_assert!((p.specific[d] - q.specific[d]).abs() <= 1e-12);
            }
        }
    }
}

#[derive(Default)]
struct LeakWatch {
    seen: Mutex<Vec<(usize, Vec<String>)>>,
    scored: Mutex<Vec<(usize, Vec<String>)>>,
}

impl LeakWatch {
    fn record(&self, fold: usize, users: &[String]) {
        self.seen.lock().unwrap().push((fold, users.to_vec()));
    }
}

impl CvObserver for LeakWatch {
    fn on_standardize(&self, fold: usize, users: &[String]) {
        self.record(fold, users);
    }
    fn on_select(&self, fold: usize, _dim: Dimension, users: &[String]) {
        self.record(fold, users);
    }
    fn on_fit(&self, fold: usize, _model: &str, users: &[String]) {
        self.record(fold, users);
    }
    fn on_score(&self, fold: usize, _dim: Dimension, users: &[String]) {
        self.scored.lock().unwrap().push((fold, users.to_vec()));
    }
}

#[test]
fn cv_keeps_test_users_out_of_fitting() {
    let ds = SynthDataset::generate(&GeneratorConfig {
        n_users: 80,
        seed: 3,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let m = extract_user_features(&ds.base_lexicon, &ds.users, ExtractOptions::default()).unwrap();
    let labels = valstack_core::evaluation::align_labels(&m, &make_labels(&ds.profiles, 50).unwrap()).unwrap();
    let watch = LeakWatch::default();
    for method in [SelectionMethod::Univariate, SelectionMethod::Rfe] {
        let cfg = CvConfig {
            k: 4,
            seed: 11,
            n: 3,
            method,
            ..CvConfig::default()
        };
        let run = run_cv(&m, &labels, FeatureSources::PostProfile, "base", &[&BaseLr(LrConfig::default())], &cfg, Some(&watch)).unwrap();
        let test_of = |f: usize| -> BTreeSet<String> { run.plan.test_rows(f).into_iter().map(|r| run.plan.user_ids[r].clone()).collect() };
        let seen = std::mem::take(&mut *watch.seen.lock().unwrap());
        assert!(seen.len() >= cfg.k * (1 + N_DIMS + 1));
        for (fold, users) in seen {
            let test = test_of(fold);
            assert!(users.iter().all(|u| !test.contains(u)), "fold {fold} fitted on a test user");
        }
        let scored = std::mem::take(&mut *watch.scored.lock().unwrap());
        assert!(!scored.is_empty());
        for (fold, users) in scored {
            let test = test_of(fold);
            assert!(users.iter().all(|u| test.contains(u)));
        }
    }
}

/// Each planted category's label correlation has the planted sign in at
/// least 19 of 20 seeds at the detection effect size.
#[test]
fn planted_signs_recoverable() {
    let seeds = 20;
    let effects = planted_blocks(16, [DETECTION_EFFECT; N_DIMS], [DETECTION_EFFECT; N_DIMS]);
    let mut correct = vec![[0usize; 2]; effects.len()];
    for seed in 0..seeds {
        let cfg = GeneratorConfig {
            n_users: 500,
            seed: 2000 + seed,
            effects: effects.clone(),
            ..GeneratorConfig::default()
        };
        let ds = SynthDataset::generate(&cfg).unwrap();
        let m = extract_user_features(&ds.base_lexicon, &ds.users, ExtractOptions::default()).unwrap();
        let labels = valstack_core::evaluation::align_labels(&m, &make_labels(&ds.profiles, 50).unwrap()).unwrap();
        for d in Dimension::ALL {
            let y: Vec<Option<bool>> = labels.iter().map(|l| l[d.index()]).collect();
            let r = label_correlations(&m, &y);
            for (i, e) in effects.iter().enumerate().filter(|(_, e)| e.dimension == d) {
                for (s, (source, planted)) in [(Source::Post, e.post), (Source::Profile, e.profile)].into_iter().enumerate() {
                    let col = m.column_index(FeatureKey { source, category_id: e.category_id }).unwrap();
                    if r[col].is_some_and(|v| v.signum() == planted.signum()) {
                        correct[i][s] += 1;
                    }
                }
            }
        }
    }
    let worst = correct.iter().flatten().min().copied().unwrap();
    assert!(worst as f64 >= 0.95 * seeds as f64, "worst planted category had the right sign in {worst}/{seeds} seeds");
}
