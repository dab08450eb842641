//! Community lexicon expansion from word-embedding neighbors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{CategoryId, Entry, Lexicon};
use crate::model::logistic::{fit_logistic, sigmoid, LrConfig};

/// Default number of neighbors gathered per seed word.
pub const DEFAULT_Q: usize = 10;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    /// Words are case-folded; a later duplicate is an error.
    pub fn new(words: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::invalid("embedding vocabulary is empty"));
        }
        if words.len() != vectors.len() {
            return Err(Error::DimensionMismatch {
                expected: words.len(),
                actual: vectors.len(),
            });
        }
        let dim = vectors[0].len();
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let mut index = HashMap::with_capacity(words.len());
        let mut folded = Vec::with_capacity(words.len());
        for (i, (w, v)) in words.into_iter().zip(&vectors).enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            let w = w.to_lowercase();
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate embedding word `{w}`")));
            }
            folded.push(w);
        }
        let norms = vectors.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        Ok(EmbeddingTable {
            dim,
            words: folded,
            vectors,
            norms,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(&word.to_lowercase()).map(|&i| self.vectors[i].as_slice())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(&word.to_lowercase())
    }

    /// Cosine similarity; 0 when either vector is zero.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        let i = *self.index.get(&a.to_lowercase())?;
        let j = *self.index.get(&b.to_lowercase())?;
        Some(self.cosine_idx(i, j))
    }

    fn cosine_idx(&self, i: usize, j: usize) -> f64 {
        let den = self.norms[i] * self.norms[j];
        if den == 0.0 {
            return 0.0;
        }
        let dot: f64 = self.vectors[i].iter().zip(&self.vectors[j]).map(|(a, b)| a * b).sum();
        (dot / den).clamp(-1.0, 1.0)
    }

    /// `word v1 ... vd` per line; an optional `count dim` header is skipped.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut words = Vec::new();
        let mut vectors = Vec::new();
        let mut dim: Option<usize> = None;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.is_empty() {
                continue;
            }
            if words.is_empty() && dim.is_none() && parts.len() == 2 && parts.iter().all(|p| p.parse::<usize>().is_ok()) {
                dim = Some(parts[1].parse().unwrap());
                continue;
            }
            let v = parts[1..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| Error::parse(line_no, format!("invalid number `{s}`"))))
                .collect::<Result<Vec<f64>>>()?;
            match dim {
                Some(d) if d != v.len() => {
                    return Err(Error::parse(line_no, format!("expected {d} values, found {}", v.len())));
                }
                None if v.is_empty() => return Err(Error::parse(line_no, "word without a vector")),
                None => dim = Some(v.len()),
                _ => {}
            }
            words.push(parts[0].to_string());
            vectors.push(v);
        }
        if words.is_empty() {
            return Err(Error::invalid("embedding file has no vectors"));
        }
        EmbeddingTable::new(words, vectors)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_text(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.words.len(), self.dim)?;
        for (word, v) in self.words.iter().zip(&self.vectors) {
            write!(w, "{word}")?;
            for x in v {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub seed: u64,
    pub min_count: usize,
    pub learning_rate: f64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 50,
            window: 5,
            negatives: 5,
            epochs: 5,
            seed: 0,
            min_count: 5,
            learning_rate: 0.025,
        }
    }
}

/// Skip-gram with negative sampling, single-threaded and seeded.
pub fn train_embeddings(corpus: &[Vec<String>], cfg: &SgnsConfig) -> Result<EmbeddingTable> {
    if corpus.is_empty() {
        return Err(Error::invalid("embedding corpus is empty"));
    }
    if cfg.dim < 2 {
        return Err(Error::invalid("embedding dimension must be at least 2"));
    }
    if cfg.window == 0 {
        return Err(Error::invalid("window must be positive"));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in corpus {
        for w in s {
            *counts.entry(w.as_str()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= cfg.min_count).collect();
    if vocab.is_empty() {
        return Err(Error::degenerate(format!("no word occurs at least {} times", cfg.min_count)));
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let ids: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, &(w, _))| (w, i)).collect();
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|w| ids.get(w.as_str()).copied()).collect())
        .collect();

    let mut cumulative = Vec::with_capacity(vocab.len());
    let mut acc = 0.0;
    for &(_, c) in &vocab {
        acc += (c as f64).powf(0.75);
        cumulative.push(acc);
    }
    let v = vocab.len();
    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input = Array2::<f64>::from_shape_fn((v, d), |_| (rng.random::<f64>() - 0.5) / d as f64);
    let mut output = Array2::<f64>::zeros((v, d));
    let total_tokens: usize = sentences.iter().map(Vec::len).sum();
    let total_steps = (cfg.epochs * total_tokens).max(1) as f64;
    let mut step = 0usize;
    let mut grad = vec![0.0; d];
    for _ in 0..cfg.epochs {
        for s in &sentences {
            for (i, &center) in s.iter().enumerate() {
                let lr = cfg.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4);
                step += 1;
                let b = rng.random_range(1..=cfg.window);
                let lo = i.saturating_sub(b);
                let hi = (i + b).min(s.len() - 1);
                for (j, &ctx) in s.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for n in 0..=cfg.negatives {
                        let (target, label) = if n == 0 {
                            (center, 1.0)
                        } else {
                            let r = rng.random::<f64>() * acc;
                            let t = cumulative.partition_point(|&c| c <= r).min(v - 1);
                            if t == center {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let dot: f64 = (0..d).map(|k| input[[ctx, k]] * output[[target, k]]).sum();
                        let g = (label - sigmoid(dot)) * lr;
                        for k in 0..d {
                            grad[k] += g * output[[target, k]];
                            output[[target, k]] += g * input[[ctx, k]];
                        }
                    }
                    for k in 0..d {
                        input[[ctx, k]] += grad[k];
                    }
                }
            }
        }
    }
    let words = vocab.iter().map(|(w, _)| w.to_string()).collect();
    let vectors = input.rows().into_iter().map(|r| r.to_vec()).collect();
    EmbeddingTable::new(words, vectors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub word: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub seed_word: String,
    /// Most similar first; equal similarities in word order.
    pub candidates: Vec<Candidate>,
    pub categories: BTreeSet<CategoryId>,
}

/// Top `q` words by cosine similarity to `seed`, excluding the seed.
/// `None` when the seed is out of vocabulary.
pub fn nearest_neighbors(emb: &EmbeddingTable, seed: &str, q: usize) -> Option<Vec<Candidate>> {
    let s = *emb.index.get(&seed.to_lowercase())?;
    let mut all: Vec<(usize, f64)> = (0..emb.len()).filter(|&i| i != s).map(|i| (i, emb.cosine_idx(s, i))).collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| emb.words[a.0].cmp(&emb.words[b.0])));
    all.truncate(q);
    Some(
        all.into_iter()
            .map(|(i, similarity)| Candidate {
                word: emb.words[i].clone(),
                similarity,
            })
            .collect(),
    )
}

/// Neighbors of a lexicon entry, keyed by its pattern (the stem string for
/// stem entries).
pub fn seed_candidates(emb: &EmbeddingTable, entry: &Entry, q: usize) -> Option<CandidateSet> {
    Some(CandidateSet {
        seed_word: entry.pattern.clone(),
        candidates: nearest_neighbors(emb, &entry.pattern, q)?,
        categories: entry.categories.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRecipe {
    /// `[a, b, a - b, a * b]`.
    ConcatDiffProduct,
}

pub fn pair_features(recipe: PairRecipe, a: &[f64], b: &[f64]) -> Vec<f64> {
    match recipe {
        PairRecipe::ConcatDiffProduct => {
            let mut f = Vec::with_capacity(4 * a.len());
            f.extend_from_slice(a);
            f.extend_from_slice(b);
            f.extend(a.iter().zip(b).map(|(x, y)| x - y));
            f.extend(a.iter().zip(b).map(|(x, y)| x * y));
            f
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairClassifier {
    pub recipe: PairRecipe,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2_lambda: f64,
}

impl PairClassifier {
    /// Probability that `(a, b)` are synonyms.
    pub fn score_vectors(&self, a: &[f64], b: &[f64]) -> f64 {
        let f = pair_features(self.recipe, a, b);
        sigmoid(self.intercept + self.weights.iter().zip(&f).map(|(w, x)| w * x).sum::<f64>())
    }

    pub fn score(&self, emb: &EmbeddingTable, a: &str, b: &str) -> Option<f64> {
        Some(self.score_vectors(emb.get(a)?, emb.get(b)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTrainingStats {
    pub synonyms_used: usize,
    pub antonyms_used: usize,
    /// Pairs dropped because a word is not in the embedding vocabulary.
    pub dropped_oov: usize,
    pub train_accuracy: f64,
}

/// Logistic regression over pair features; synonyms are the positive class.
pub fn train_pair_classifier(
    synonyms: &[(String, String)],
    antonyms: &[(String, String)],
    emb: &EmbeddingTable,
    cfg: &LrConfig,
) -> Result<(PairClassifier, PairTrainingStats)> {
    let recipe = PairRecipe::ConcatDiffProduct;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut dropped = 0;
    let (mut n_syn, mut n_ant) = (0, 0);
    for (pairs, label) in [(synonyms, true), (antonyms, false)] {
        for (a, b) in pairs {
            match (emb.get(a), emb.get(b)) {
                (Some(va), Some(vb)) => {
                    rows.push(pair_features(recipe, va, vb));
                    y.push(label);
                    if label {
                        n_syn += 1;
                    } else {
                        n_ant += 1;
                    }
                }
                _ => dropped += 1,
            }
        }
    }
    if n_syn == 0 || n_ant == 0 {
        return Err(Error::degenerate(format!(
            "pair classifier needs both classes after dropping {dropped} out-of-vocabulary pairs ({n_syn} synonyms, {n_ant} antonyms left)"
        )));
    }
    let width = 4 * emb.dim();
    let x = Array2::from_shape_fn((rows.len(), width), |(i, j)| rows[i][j]);
    let fit = fit_logistic(x.view(), &y, cfg)?;
    let clf = PairClassifier {
        recipe,
        dim: emb.dim(),
        weights: fit.weights,
        intercept: fit.intercept,
        l2_lambda: cfg.l2_lambda,
    };
    let correct = rows
        .iter()
        .zip(&y)
        .filter(|(r, &l)| {
            let (a, b) = r.split_at(emb.dim());
            (clf.score_vectors(a, &b[..emb.dim()]) >= 0.5) == l
        })
        .count();
    let stats = PairTrainingStats {
        synonyms_used: n_syn,
        antonyms_used: n_ant,
        dropped_oov: dropped,
        train_accuracy: correct as f64 / y.len() as f64,
    };
    Ok((clf, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    /// Already matched by the base lexicon.
    InBase,
    /// Classifier score below the threshold.
    BelowThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seed: String,
    pub seed_categories: Vec<CategoryId>,
    pub candidate: String,
    pub rank: usize,
    pub similarity: f64,
    pub score: Option<f64>,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionBuild {
    /// Same category table as the base; only new words.
    pub extension: Lexicon,
    pub audit: Vec<AuditRecord>,
    /// Seeds skipped for lack of an embedding.
    pub skipped_seeds: Vec<String>,
}

impl ExtensionBuild {
    pub fn added_words(&self) -> usize {
        self.extension.entries().len()
    }

    pub fn write_audit_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.audit {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Expands `base`: each seed's top-`q` neighbors not already in `base`
/// are classified against the seed and those scoring at least `threshold`
/// join all of the seed's categories.
pub fn build_extension(
    base: &Lexicon,
    emb: &EmbeddingTable,
    classifier: &PairClassifier,
    q: usize,
    threshold: f64,
) -> Result<ExtensionBuild> {
    if classifier.dim != emb.dim() {
        return Err(Error::DimensionMismatch {
            expected: classifier.dim,
            actual: emb.dim(),
        });
    }
    let per_seed: Vec<(String, Option<Vec<AuditRecord>>)> = base
        .entries()
        .par_iter()
        .map(|entry| {
            let Some(set) = seed_candidates(emb, entry, q) else {
                return (entry.display_pattern(), None);
            };
            let seed = set.seed_word;
            let seed_vec = emb.get(&seed).expect("seed is in vocabulary");
            let cats: Vec<CategoryId> = set.categories.iter().copied().collect();
            let records = set
                .candidates
                .into_iter()
                .enumerate()
                .map(|(rank, c)| {
                    let (score, decision) = if base.matches(&c.word) {
                        (None, Decision::InBase)
                    } else {
                        let s = classifier.score_vectors(seed_vec, emb.get(&c.word).expect("neighbor is in vocabulary"));
                        (Some(s), if s >= threshold { Decision::Accepted } else { Decision::BelowThreshold })
                    };
                    AuditRecord {
                        seed: seed.clone(),
                        seed_categories: cats.clone(),
                        candidate: c.word,
                        rank: rank + 1,
                        similarity: c.similarity,
                        score,
                        decision,
                    }
                })
                .collect();
            (entry.display_pattern(), Some(records))
        })
        .collect();

    let mut audit = Vec::new();
    let mut skipped = Vec::new();
    let mut added: BTreeMap<String, BTreeSet<CategoryId>> = BTreeMap::new();
    let mut order = Vec::new();
    for (seed, recs) in per_seed {
        match recs {
            None => {
                log::debug!("seed `{seed}` has no embedding; skipped");
                skipped.push(seed);
            }
            Some(recs) => {
                for r in &recs {
                    if r.decision == Decision::Accepted {
                        let cats = added.entry(r.candidate.clone()).or_insert_with(|| {
                            order.push(r.candidate.clone());
                            BTreeSet::new()
                        });
                        cats.extend(r.seed_categories.iter().copied());
                    }
                }
                audit.extend(recs);
            }
        }
    }
    if !skipped.is_empty() {
        log::warn!(
            "{} of {} seeds have no embedding and were skipped (first: `{}`)",
            skipped.len(),
            base.entries().len(),
            skipped[0]
        );
    }
    let entries = order
        .iter()
        .map(|w| Entry::literal(w, added[w].iter().copied()))
        .collect();
    let extension = Lexicon::new(base.categories().to_vec(), entries)?;
    Ok(ExtensionBuild {
        extension,
        audit,
        skipped_seeds: skipped,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairLists {
    pub synonyms: Vec<(String, String)>,
    pub antonyms: Vec<(String, String)>,
}

/// `word_a<TAB>word_b<TAB>{syn|ant}` lines.
pub fn read_pairs_tsv<R: BufRead>(reader: R) -> Result<PairLists> {
    let mut out = PairLists::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(Error::parse(line_no, "expected `word_a<TAB>word_b<TAB>syn|ant`"));
        }
        let pair = (parts[0].to_lowercase(), parts[1].to_lowercase());
        match parts[2] {
            "syn" => out.synonyms.push(pair),
            "ant" => out.antonyms.push(pair),
            other => return Err(Error::parse(line_no, format!("relation must be syn or ant, got `{other}`"))),
        }
    }
    Ok(out)
}

pub fn load_pairs(path: &Path) -> Result<PairLists> {
    read_pairs_tsv(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write_pairs_tsv<W: Write>(mut w: W, pairs: &PairLists) -> Result<()> {
    for (a, b) in &pairs.synonyms {
        writeln!(w, "{a}\t{b}\tsyn")?;
    }
    for (a, b) in &pairs.antonyms {
        writeln!(w, "{a}\t{b}\tant")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Category;

    fn table(rows: &[(&str, &[f64])]) -> EmbeddingTable {
        EmbeddingTable::new(rows.iter().map(|r| r.0.to_string()).collect(), rows.iter().map(|r| r.1.to_vec()).collect()).unwrap()
    }

    #[test]
    fn text_format_round_trip() {
        let t = table(&[("Alpha", &[1.0, 0.5]), ("beta", &[-0.25, 2.0])]);
        assert!(t.contains("ALPHA"));
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        assert_eq!(EmbeddingTable::read_text(&buf[..]).unwrap(), t);
        let no_header = EmbeddingTable::read_text("a 1 2\nb 3 4\n".as_bytes()).unwrap();
        assert_eq!(no_header.dim(), 2);
        let err = EmbeddingTable::read_text("a 1 2\nb 3\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn neighbor_rules() {
        let t = table(&[("w1", &[1.0, 0.0]), ("w2", &[1.0, 0.0]), ("w3", &[0.0, 1.0]), ("w0", &[0.0, 1.0])]);
        let n = nearest_neighbors(&t, "w1", 10).unwrap();
        assert_eq!(n.len(), 3);
        assert_eq!(n[0].word, "w2");
        assert_eq!(n[0].similarity, 1.0);
        assert_eq!(n[1].word, "w0");
        assert!(nearest_neighbors(&t, "zzz", 3).is_none());
        assert!((t.similarity("w1", "w1").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(t.similarity("w1", "w3"), t.similarity("w3", "w1"));
    }

    #[test]
    fn sgns_separates_topics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<String> = (0..8).map(|i| format!("a{i}")).collect();
        let b: Vec<String> = (0..8).map(|i| format!("b{i}")).collect();
        let corpus: Vec<Vec<String>> = (0..400)
            .map(|s| {
                let topic = if s % 2 == 0 { &a } else { &b };
                (0..10).map(|_| topic[rng.random_range(0..8)].clone()).collect()
            })
            .collect();
        let cfg = SgnsConfig {
            dim: 10,
            epochs: 3,
            ..SgnsConfig::default()
        };
        let emb = train_embeddings(&corpus, &cfg).unwrap();
        let (mut intra, mut inter) = (Vec::new(), Vec::new());
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    intra.push(emb.similarity(&a[i], &a[j]).unwrap());
                }
                inter.push(emb.similarity(&a[i], &b[j]).unwrap());
            }
        }
        let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(m(&intra) > m(&inter) + 0.2, "intra {} inter {}", m(&intra), m(&inter));
        assert_eq!(train_embeddings(&corpus, &cfg).unwrap(), emb);
        assert!(train_embeddings(&[vec!["one".into(), "two".into()]], &cfg).is_err());
    }

    #[test]
    fn extension_from_geometry() {
        let t = table(&[
            ("difficult", &[1.0, 0.0, 0.1]),
            ("chim", &[0.95, 0.05, 0.1]),
            ("easy", &[0.9, 0.0, -0.5]),
            ("sad", &[0.8, 0.3, 0.1]),
            ("happy", &[0.0, 1.0, 0.0]),
        ]);
        let base = Lexicon::new(
            vec![Category { id: 5, name: "negemo".into() }, Category { id: 4, name: "posemo".into() }],
            vec![Entry::literal("difficult", [5]), Entry::literal("sad", [5]), Entry::literal("happy", [4])],
        )
        .unwrap();
        let pairs = PairLists {
            synonyms: vec![("difficult".into(), "chim".into()), ("sad".into(), "difficult".into())],
            antonyms: vec![("difficult".into(), "easy".into()), ("happy".into(), "sad".into())],
        };
        let (clf, stats) = train_pair_classifier(&pairs.synonyms, &pairs.antonyms, &t, &LrConfig { l2_lambda: 0.01, ..LrConfig::default() }).unwrap();
        assert_eq!(stats.train_accuracy, 1.0);
        let build = build_extension(&base, &t, &clf, 2, 0.5).unwrap();
        assert!(build.extension.lookup("chim").contains(&5));
        assert!(build.extension.lookup("easy").is_empty());
        assert!(build.audit.iter().any(|r| r.candidate == "sad" && r.decision == Decision::InBase));
        let none = build_extension(&base, &t, &clf, 2, 1.0).unwrap();
        assert_eq!(none.added_words(), 0);
    }

    #[test]
    fn pair_file_format() {
        let p = read_pairs_tsv("a\tb\tsyn\nc\td\tant\n".as_bytes()).unwrap();
        assert_eq!(p.synonyms.len(), 1);
        let mut buf = Vec::new();
        write_pairs_tsv(&mut buf, &p).unwrap();
        assert_eq!(read_pairs_tsv(&buf[..]).unwrap(), p);
        assert!(read_pairs_tsv("a\tb\tfoo\n".as_bytes()).is_err());
    }
}
