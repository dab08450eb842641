use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn valstack(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_valstack"))
        .arg("--log")
        .arg("warn")
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("VALSTACK_CONFIG")
        .output()
        .expect("run valstack")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stdout:\n{}\nstderr:\n{}", stdout(o), stderr(o));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Data {
    tmp: TempDir,
}

impl Data {
    fn synth(users: usize) -> Data {
        let tmp = tempfile::tempdir().unwrap();
        let o = valstack(&tmp.path().join("data"), &["synth", "--users", &users.to_string(), "--seed", "11"]);
        assert_ok(&o);
        Data { tmp }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.tmp.path().join("data").join(name)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.tmp.path().join(name)
    }

    fn labelled(&self) -> Vec<String> {
        [
            "--corpus",
            s(&self.file("corpus.jsonl")),
            "--lexicon",
            s(&self.file("base.dic")),
            "--svs",
            s(&self.file("svs.csv")),
            "--dimension-map",
            s(&self.file("dimension_map.csv")),
        ]
        .map(String::from)
        .to_vec()
    }

    fn run(&self, out: &str, cmd: &str, extra: &[&str]) -> Output {
        let mut args = vec![cmd.to_string()];
        args.extend(self.labelled());
        args.extend(extra.iter().map(|a| a.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        valstack(&self.out(out), &refs)
    }
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

/// Two categories, four seeds, and two unseen words placed next to one
/// seed of each category.
fn toy_lexicon(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let dic = dir.join("toy.dic");
    fs::write(&dic, "%\n1\tposemo\n2\tnegemo\n%\nhappy\t1\nglad\t1\nsad\t2\nbad\t2\n").unwrap();
    let pairs = dir.join("pairs.tsv");
    fs::write(&pairs, "happy\tglad\tsyn\nsad\tbad\tsyn\nhappy\tsad\tant\nglad\tbad\tant\n").unwrap();
    let emb = dir.join("emb.txt");
    fs::write(
        &emb,
        "6 3\n\
         happy 1.0 0.1 0.0\n\
         glad 0.9 0.2 0.1\n\
         hepi 0.95 0.15 0.05\n\
         sad -1.0 0.1 0.0\n\
         bad -0.9 0.2 -0.1\n\
         sian -0.95 0.12 -0.05\n",
    )
    .unwrap();
    (dic, pairs, emb)
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_ok(&valstack(&a, &["synth", "--users", "30", "--seed", "5"]));
    assert_ok(&valstack(&b, &["synth", "--users", "30", "--seed", "5"]));
    let (da, db) = (dir_contents(&a), dir_contents(&b));
    assert!(da.iter().any(|(n, _)| n == "manifest.json"));
    assert_eq!(da, db);
}

#[test]
fn manifest_hashes_every_artifact() {
    let d = Data::synth(20);
    let m = read_json(&d.file("manifest.json"));
    assert_eq!(m["command"], "synth");
    let arts = m["artifacts"].as_array().unwrap();
    assert!(arts.len() >= 5);
    for a in arts {
        let bytes = fs::read(d.file(a["path"].as_str().unwrap())).unwrap();
        assert_eq!(a["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(a["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn config_file_replays_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    assert_ok(&valstack(&first, &["synth", "--users", "12", "--seed", "9"]));
    let second = tmp.path().join("second");
    let o = Command::new(env!("CARGO_BIN_EXE_valstack"))
        .args(["--log", "warn", "--config", s(&first.join("config.json")), "--out", s(&second), "synth"])
        .output()
        .unwrap();
    assert_ok(&o);
    assert_eq!(fs::read(first.join("corpus.jsonl")).unwrap(), fs::read(second.join("corpus.jsonl")).unwrap());
}

#[test]
fn environment_sets_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_valstack"))
        .args(["--log", "warn", "--out", s(&out), "synth", "--seed", "2"])
        .env("VALSTACK_USERS", "7")
        .output()
        .unwrap();
    assert_ok(&o);
    let users = fs::read_to_string(out.join("corpus.jsonl")).unwrap().lines().count();
    assert_eq!(users, 7);
}

#[test]
fn build_lexicon_adds_neighbors() {
    let tmp = tempfile::tempdir().unwrap();
    let (dic, pairs, emb) = toy_lexicon(tmp.path());
    let out = tmp.path().join("lex");
    let o = valstack(
        &out,
        &["build-lexicon", "--lexicon", s(&dic), "--embeddings", s(&emb), "--pairs", s(&pairs), "--q", "5"],
    );
    assert_ok(&o);
    let ext = fs::read_to_string(out.join("extension.dic")).unwrap();
    assert!(ext.contains("hepi\t1"), "{ext}");
    assert!(ext.contains("sian\t2"), "{ext}");
    assert!(stdout(&o).contains("added 2 words"), "{}", stdout(&o));
    let audit = fs::read_to_string(out.join("audit.jsonl")).unwrap();
    assert!(audit.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
}

#[test]
fn build_lexicon_threshold_one_adds_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let (dic, pairs, emb) = toy_lexicon(tmp.path());
    let out = tmp.path().join("lex");
    let o = valstack(
        &out,
        &["build-lexicon", "--lexicon", s(&dic), "--embeddings", s(&emb), "--pairs", s(&pairs), "--threshold", "1.0"],
    );
    assert_ok(&o);
    assert!(stdout(&o).contains("added 0 words"));
    let ext = fs::read_to_string(out.join("extension.dic")).unwrap();
    assert!(!ext.contains("hepi") && !ext.contains("sian"));
}

#[test]
fn build_lexicon_missing_embeddings_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (dic, pairs, _) = toy_lexicon(tmp.path());
    let missing = tmp.path().join("nowhere.txt");
    let o = valstack(
        &tmp.path().join("lex"),
        &["build-lexicon", "--lexicon", s(&dic), "--embeddings", s(&missing), "--pairs", s(&pairs)],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(s(&missing)), "{}", stderr(&o));
}

#[test]
fn malformed_dictionary_names_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, pairs, emb) = toy_lexicon(tmp.path());
    let dic = tmp.path().join("broken.dic");
    fs::write(&dic, "no header here\n").unwrap();
    let o = valstack(
        &tmp.path().join("lex"),
        &["build-lexicon", "--lexicon", s(&dic), "--embeddings", s(&emb), "--pairs", s(&pairs)],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(s(&dic)), "{}", stderr(&o));
}

#[test]
fn embed_then_build_lexicon() {
    let d = Data::synth(30);
    let o = valstack(
        &d.out("emb"),
        &["embed", "--corpus", s(&d.file("corpus.jsonl")), "--dim", "8", "--epochs", "1", "--min-count", "2"],
    );
    assert_ok(&o);
    let emb = d.out("emb").join("embeddings.txt");
    let header = fs::read_to_string(&emb).unwrap().lines().next().unwrap().to_string();
    assert!(header.ends_with(" 8"), "{header}");
    let o = valstack(
        &d.out("lex"),
        &[
            "build-lexicon",
            "--lexicon",
            s(&d.file("base.dic")),
            "--embeddings",
            s(&emb),
            "--pairs",
            s(&d.file("pairs.tsv")),
            "--corpus",
            s(&d.file("corpus.jsonl")),
        ],
    );
    assert_ok(&o);
    assert!(d.out("lex").join("extension.dic").is_file());
    assert!(d.out("lex").join("coverage.json").is_file());
}

#[test]
fn train_writes_a_model() {
    let d = Data::synth(40);
    let o = d.run("train", "train", &["--epochs", "30"]);
    assert_ok(&o);
    let model = read_json(&d.out("train").join("model.json"));
    assert!(model.get("stack").is_some());
    let trace = fs::read_to_string(d.out("train").join("loss_trace.csv")).unwrap();
    // Header, the starting loss, then one row per epoch.
    assert_eq!(trace.lines().count(), 1 + 1 + 30);
}

#[test]
fn literal_loss_is_recorded() {
    let d = Data::synth(40);
    let o = d.run("train", "train", &["--epochs", "10", "--model-kind", "stack", "--loss", "literal"]);
    assert_ok(&o);
    let text = fs::read_to_string(d.out("train").join("model.json")).unwrap();
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    assert!(compact.contains(r#""loss_mode":"literal""#));
}

#[test]
fn survey_without_dimension_map_is_a_config_error() {
    let d = Data::synth(20);
    let o = valstack(
        &d.out("train"),
        &[
            "train",
            "--corpus",
            s(&d.file("corpus.jsonl")),
            "--lexicon",
            s(&d.file("base.dic")),
            "--svs",
            s(&d.file("svs.csv")),
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dimension-map"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"not_a_field": 3}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_valstack"))
        .args(["--log", "warn", "--config", s(&cfg), "--out", s(&tmp.path().join("o")), "synth"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_reports_five_folds_per_cell() {
    let d = Data::synth(50);
    let o = d.run("eval", "evaluate", &["--epochs", "20", "--feature-sets", "post,post+profile"]);
    assert_ok(&o);
    assert!(stdout(&o).contains("AUC"));
    let report = read_json(&d.out("eval").join("report.json"));
    let runs = report["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    let mut cells = 0;
    for run in runs {
        for setting in run["settings"].as_array().unwrap() {
            for cell in setting["cells"].as_array().unwrap() {
                let folds = cell["fold_aucs"].as_array().unwrap();
                assert_eq!(folds.len(), 5);
                for auc in folds {
                    let a = auc.as_f64().unwrap();
                    assert!((0.0..=1.0).contains(&a));
                }
                cells += 1;
            }
        }
    }
    // Two feature settings, base and stack, five dimensions.
    assert_eq!(cells, 2 * 2 * 5);
    assert!(d.out("eval").join("report.txt").is_file());
}

#[test]
fn forty_percent_leaves_the_middle_unlabelled() {
    let d = Data::synth(50);
    let o = d.run("train", "train", &["--epochs", "5", "--k-percent", "40"]);
    assert_ok(&o);
    let labels = fs::read_to_string(d.out("train").join("labels.csv")).unwrap();
    let rows: Vec<Vec<&str>> = labels.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 50);
    for dim in 1..=5 {
        let count = |v: &str| rows.iter().filter(|r| r[dim] == v).count();
        assert_eq!(count("1"), 20);
        assert_eq!(count("0"), 20);
        assert_eq!(count("-"), 10);
    }
}

#[test]
fn two_folds_on_four_users() {
    let d = Data::synth(4);
    let o = d.run("eval", "evaluate", &["--epochs", "5", "--folds", "2", "--feature-sets", "post"]);
    assert_ok(&o);
}

#[test]
fn fewer_users_than_folds_is_degenerate() {
    let d = Data::synth(4);
    let o = d.run("eval", "evaluate", &["--epochs", "5", "--folds", "5"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

fn trained(d: &Data) -> PathBuf {
    assert_ok(&d.run("train", "train", &["--epochs", "30"]));
    d.out("train").join("model.json")
}

fn predicted(d: &Data) -> PathBuf {
    let model = trained(d);
    let o = valstack(
        &d.out("pred"),
        &["predict", "--model", s(&model), "--corpus", s(&d.file("corpus.jsonl")), "--lexicon", s(&d.file("base.dic"))],
    );
    assert_ok(&o);
    d.out("pred").join("predictions.csv")
}

#[test]
fn predict_scores_every_user() {
    let d = Data::synth(40);
    let preds = fs::read_to_string(predicted(&d)).unwrap();
    let mut lines = preds.lines();
    assert_eq!(lines.next().unwrap(), "user_id,CO,ST,OC,HE,SE");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 40);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), 6);
        for v in &f[1..] {
            let p: f64 = v.parse().unwrap();
            assert!(p > 0.0 && p < 1.0, "{row}");
        }
    }
}

#[test]
fn predict_rejects_a_different_lexicon() {
    let d = Data::synth(30);
    let model = trained(&d);
    let (dic, _, _) = toy_lexicon(d.tmp.path());
    let o = valstack(
        &d.out("pred"),
        &["predict", "--model", s(&model), "--corpus", s(&d.file("corpus.jsonl")), "--lexicon", s(&dic)],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn behavior_analysis_runs() {
    let d = Data::synth(40);
    let preds = predicted(&d);
    let o = valstack(
        &d.out("beh"),
        &[
            "analyze-behavior",
            "--predictions",
            s(&preds),
            "--tweets",
            s(&d.file("tweets.jsonl")),
            "--edges",
            s(&d.file("edges.tsv")),
        ],
    );
    assert_ok(&o);
    let csv = fs::read_to_string(d.out("beh").join("behavior.csv")).unwrap();
    // Header plus a high and a low group per dimension.
    assert_eq!(csv.lines().count(), 1 + 10);
    assert!(csv.lines().skip(1).all(|l| l.contains(",8,")), "{csv}");
}

#[test]
fn behavior_group_over_half_is_degenerate() {
    let d = Data::synth(40);
    let preds = predicted(&d);
    let o = valstack(
        &d.out("beh"),
        &[
            "analyze-behavior",
            "--predictions",
            s(&preds),
            "--tweets",
            s(&d.file("tweets.jsonl")),
            "--edges",
            s(&d.file("edges.tsv")),
            "--x",
            "21",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
}
