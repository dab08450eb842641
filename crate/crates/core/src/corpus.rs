//! Tokenization, per-user lexicon features and column standardization.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{merge_lexicons, CategoryId, Lexicon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerOptions {
    /// Drop URLs and `@handle` mentions before splitting.
    pub strip_links: bool,
}

impl Default for TokenizerOptions {
    fn default() -> Self {
        TokenizerOptions { strip_links: true }
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, TokenizerOptions::default())
}

/// Lower-cases and splits on whitespace and punctuation. Apostrophes inside
/// a word are kept (`don't`), leading/trailing ones are not.
pub fn tokenize_with(text: &str, opts: TokenizerOptions) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if opts.strip_links && is_link_or_mention(chunk) {
            continue;
        }
        let mut cur = String::new();
        for ch in chunk.chars() {
            let ch = if ch == '\u{2019}' { '\'' } else { ch };
            if ch.is_alphanumeric() || ch == '\'' {
                cur.extend(ch.to_lowercase());
            } else {
                push_token(&mut out, &mut cur);
            }
        }
        push_token(&mut out, &mut cur);
    }
    out
}

fn push_token(out: &mut Vec<String>, cur: &mut String) {
    let t = cur.trim_matches('\'');
    if !t.is_empty() {
        out.push(t.to_string());
    }
    cur.clear();
}

fn is_link_or_mention(chunk: &str) -> bool {
    let c = chunk.trim_start_matches(|ch: char| !ch.is_alphanumeric() && ch != '@');
    let lower = c.to_ascii_lowercase();
    lower.starts_with("http://")
        || lower.starts_with("https://")
        || lower.starts_with("www.")
        || (c.starts_with('@') && c.len() > 1)
}

/// One user's text. Profile texts are the interests, groups and activities
/// flattened into documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub posts: Vec<String>,
    pub profile_texts: Vec<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct ProfileJson {
    #[serde(default)]
    interests: Vec<String>,
    #[serde(default)]
    groups: Vec<String>,
    #[serde(default)]
    activities: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusLine {
    user_id: String,
    #[serde(default)]
    posts: Vec<String>,
    #[serde(default)]
    profile: ProfileJson,
}

/// Reads the JSON-lines corpus format. Blank lines are skipped.
pub fn read_corpus_jsonl<R: BufRead>(reader: R) -> Result<Vec<UserRecord>> {
    let mut users = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusLine =
            serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if rec.user_id.is_empty() {
            return Err(Error::parse(i + 1, "empty user_id"));
        }
        if !seen.insert(rec.user_id.clone()) {
            return Err(Error::parse(i + 1, format!("duplicate user_id `{}`", rec.user_id)));
        }
        let ProfileJson {
            interests,
            groups,
            activities,
        } = rec.profile;
        users.push(UserRecord {
            user_id: rec.user_id,
            posts: rec.posts,
            profile_texts: interests.into_iter().chain(groups).chain(activities).collect(),
        });
    }
    Ok(users)
}

pub fn load_corpus(path: &Path) -> Result<Vec<UserRecord>> {
    let f = std::fs::File::open(path)?;
    read_corpus_jsonl(std::io::BufReader::new(f))
}

/// Writes users as JSON lines; profile texts go under `interests`.
pub fn write_corpus_jsonl<W: Write>(mut w: W, users: &[UserRecord]) -> Result<()> {
    for u in users {
        let line = CorpusLine {
            user_id: u.user_id.clone(),
            posts: u.posts.clone(),
            profile: ProfileJson {
                interests: u.profile_texts.clone(),
                ..Default::default()
            },
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Post,
    Profile,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Post => "post",
            Source::Profile => "profile",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which text sources feed a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSources {
    Post,
    Profile,
    PostProfile,
}

impl FeatureSources {
    pub fn sources(self) -> &'static [Source] {
        match self {
            FeatureSources::Post => &[Source::Post],
            FeatureSources::Profile => &[Source::Profile],
            FeatureSources::PostProfile => &[Source::Post, Source::Profile],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureSources::Post => "Post",
            FeatureSources::Profile => "Profile",
            FeatureSources::PostProfile => "Post|Profile",
        }
    }
}

impl FromStr for FeatureSources {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "post" => Ok(FeatureSources::Post),
            "profile" => Ok(FeatureSources::Profile),
            "post+profile" | "post-profile" | "both" => Ok(FeatureSources::PostProfile),
            other => Err(Error::invalid(format!("unknown feature sources `{other}`"))),
        }
    }
}

/// Column identity: `(source, category_id)`. Ordering is the tie-break order
/// used by feature selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureKey {
    pub source: Source,
    pub category_id: CategoryId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub key: FeatureKey,
    pub name: String,
}

impl FeatureColumn {
    /// `post:negemo` style header.
    pub fn header(&self) -> String {
        format!("{}:{}", self.key.source, self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureValue {
    #[default]
    RelativeFrequency,
    RawCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub value: FeatureValue,
    pub tokenizer: TokenizerOptions,
}

impl ExtractOptions {
    /// Raw counts and no URL/mention stripping.
    pub fn literal() -> Self {
        ExtractOptions {
            value: FeatureValue::RawCount,
            tokenizer: TokenizerOptions { strip_links: false },
        }
    }
}

/// Per-column centering and scaling fitted on a subset of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; zero marks a constant column.
    pub stds: Vec<f64>,
}

const ZERO_VARIANCE: f64 = 1e-12;

impl Standardizer {
    pub fn fit(m: &FeatureMatrix, fit_rows: &[usize]) -> Result<Self> {
        if fit_rows.is_empty() {
            return Err(Error::invalid("standardizer needs at least one fit row"));
        }
        let n = fit_rows.len() as f64;
        let mut means = vec![0.0; m.n_cols()];
        let mut stds = vec![0.0; m.n_cols()];
        for (j, (mean, std)) in means.iter_mut().zip(stds.iter_mut()).enumerate() {
            let col = m.values.column(j);
            let mu = fit_rows.iter().map(|&r| col[r]).sum::<f64>() / n;
            let var = fit_rows.iter().map(|&r| (col[r] - mu).powi(2)).sum::<f64>() / n;
            *mean = mu;
            *std = if var.sqrt() > ZERO_VARIANCE * mu.abs().max(1.0) {
                var.sqrt()
            } else {
                0.0
            };
        }
        Ok(Standardizer { means, stds })
    }

    pub fn transform_value(&self, col: usize, x: f64) -> f64 {
        if self.stds[col] == 0.0 {
            0.0
        } else {
            (x - self.means[col]) / self.stds[col]
        }
    }

    /// Applies the fitted scaling to every row of `m`.
    pub fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.n_cols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                actual: m.n_cols(),
            });
        }
        let mut values = m.values.clone();
        for (j, mut col) in values.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|x| self.transform_value(j, x));
        }
        Ok(FeatureMatrix {
            user_ids: m.user_ids.clone(),
            columns: m.columns.clone(),
            values,
            scaling: Some(self.clone()),
        })
    }
}

/// Users × (source, category) feature values. Every cell is filled.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub user_ids: Vec<String>,
    pub columns: Vec<FeatureColumn>,
    pub values: Array2<f64>,
    /// Set once the matrix has been standardized.
    pub scaling: Option<Standardizer>,
}

impl FeatureMatrix {
    pub fn new(user_ids: Vec<String>, columns: Vec<FeatureColumn>, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != user_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: user_ids.len(),
                actual: values.nrows(),
            });
        }
        if values.ncols() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                actual: values.ncols(),
            });
        }
        Ok(FeatureMatrix {
            user_ids,
            columns,
            values,
            scaling: None,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, key: FeatureKey) -> Option<usize> {
        self.columns.iter().position(|c| c.key == key)
    }

    pub fn row_index(&self, user_id: &str) -> Option<usize> {
        self.user_ids.iter().position(|u| u == user_id)
    }

    /// Column indices belonging to the given sources, in matrix order.
    pub fn columns_for(&self, sources: FeatureSources) -> Vec<usize> {
        let wanted = sources.sources();
        (0..self.n_cols())
            .filter(|&j| wanted.contains(&self.columns[j].key.source))
            .collect()
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            user_ids: self.user_ids.clone(),
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
            values: self.values.select(Axis(1), cols),
            scaling: self.scaling.as_ref().map(|s| Standardizer {
                means: cols.iter().map(|&j| s.means[j]).collect(),
                stds: cols.iter().map(|&j| s.stds[j]).collect(),
            }),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            user_ids: rows.iter().map(|&i| self.user_ids[i].clone()).collect(),
            columns: self.columns.clone(),
            values: self.values.select(Axis(0), rows),
            scaling: self.scaling.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("user_id");
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.header());
        }
        out.push('\n');
        for (i, uid) in self.user_ids.iter().enumerate() {
            out.push_str(uid);
            for v in self.values.row(i) {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Pools each user's posts into one document and profile texts into
/// another, and scores both against `lex`. The result is unstandardized.
pub fn extract_user_features(lex: &Lexicon, users: &[UserRecord], opts: ExtractOptions) -> Result<FeatureMatrix> {
    let mut seen = HashSet::with_capacity(users.len());
    for u in users {
        if u.user_id.is_empty() {
            return Err(Error::invalid("empty user_id"));
        }
        if !seen.insert(u.user_id.as_str()) {
            return Err(Error::invalid(format!("duplicate user_id `{}`", u.user_id)));
        }
    }
    let mut columns = Vec::with_capacity(2 * lex.n_categories());
    for source in [Source::Post, Source::Profile] {
        for c in lex.categories() {
            columns.push(FeatureColumn {
                key: FeatureKey {
                    source,
                    category_id: c.id,
                },
                name: c.name.clone(),
            });
        }
    }
    let k = lex.n_categories();
    let rows: Vec<Vec<f64>> = users
        .par_iter()
        .map(|u| {
            let mut row = Vec::with_capacity(2 * k);
            for docs in [&u.posts, &u.profile_texts] {
                let tokens: Vec<String> = docs.iter().flat_map(|d| tokenize_with(d, opts.tokenizer)).collect();
                let scores = lex.score_tokens(&tokens);
                match opts.value {
                    FeatureValue::RelativeFrequency => row.extend(scores.relative_frequencies()),
                    FeatureValue::RawCount => row.extend(scores.raw_counts.iter().map(|&c| c as f64)),
                }
            }
            row
        })
        .collect();
    let mut values = Array2::zeros((users.len(), 2 * k));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    FeatureMatrix::new(users.iter().map(|u| u.user_id.clone()).collect(), columns, values)
}

/// Fits a standardizer on `fit_rows` and applies it to all rows.
pub fn fit_standardizer(m: &FeatureMatrix, fit_rows: &[usize]) -> Result<FeatureMatrix> {
    Standardizer::fit(m, fit_rows)?.transform(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub unique_tokens: usize,
    pub base_matched: usize,
    pub merged_matched: usize,
    pub base_percent: f64,
    pub merged_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub post: CoverageStats,
    pub profile: CoverageStats,
}

/// Vocabulary coverage of the base lexicon and of base ∪ extension.
pub fn coverage_report(base: &Lexicon, extension: &Lexicon, users: &[UserRecord]) -> Result<CoverageReport> {
    let merged = merge_lexicons(base, extension)?;
    let stats = |docs: &mut dyn Iterator<Item = &String>| {
        let vocab: BTreeSet<String> = docs.flat_map(|d| tokenize(d)).collect();
        let b = vocab.iter().filter(|t| base.matches(t)).count();
        let m = vocab.iter().filter(|t| merged.matches(t)).count();
        let pct = |x: usize| {
            if vocab.is_empty() {
                0.0
            } else {
                100.0 * x as f64 / vocab.len() as f64
            }
        };
        CoverageStats {
            unique_tokens: vocab.len(),
            base_matched: b,
            merged_matched: m,
            base_percent: pct(b),
            merged_percent: pct(m),
        }
    };
    Ok(CoverageReport {
        post: stats(&mut users.iter().flat_map(|u| u.posts.iter())),
        profile: stats(&mut users.iter().flat_map(|u| u.profile_texts.iter())),
    })
}
