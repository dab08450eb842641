//! Synthetic cohorts with planted value-language and value-behavior links.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix5, SymmetricEigen, Vector5};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::behavior::{write_edges_tsv, write_tweets_jsonl, FollowEdge, TweetRecord, Window};
use crate::corpus::{write_corpus_jsonl, UserRecord};
use crate::dims::{Dimension, N_DIMS};
use crate::error::{Error, Result};
use crate::labels::{profiles_to_csv, svs_to_csv, DimensionMap, SvsResponse, ValueProfile, N_ITEMS, RATING_MAX, RATING_MIN};
use crate::lexicon::{Category, CategoryId, Entry, Lexicon};
use crate::model::logistic::sigmoid;
use crate::sliwc::{write_pairs_tsv, PairLists};

/// Dimension means in `Dimension` order (CO, ST, OC, HE, SE).
pub const TABLE1_MEANS: [f64; N_DIMS] = [-0.31, 0.30, 0.04, 0.01, -0.63];
pub const TABLE1_STDS: [f64; N_DIMS] = [0.58, 0.50, 0.80, 1.18, 0.77];
pub const TABLE1_CORRELATIONS: [[f64; N_DIMS]; N_DIMS] = [
    [1.00, 0.10, -0.65, -0.40, -0.32],
    [0.10, 1.00, -0.28, -0.54, -0.63],
    [-0.65, -0.28, 1.00, 0.27, 0.09],
    [-0.40, -0.54, 0.27, 1.00, 0.33],
    [-0.32, -0.63, 0.09, 0.33, 1.00],
];

/// Per-dimension log-odds effects used by default, in `Dimension` order.
pub const DEFAULT_EFFECTS: [f64; N_DIMS] = [0.24, 0.24, 0.22, 0.21, 0.22];

/// Effect size at which RFE recovers a dimension's planted categories
/// (16 per source among 90) with recall of at least 0.8 at 500 users.
pub const DETECTION_EFFECT: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub category_id: CategoryId,
    pub dimension: Dimension,
    /// Log-odds change of emitting the category per standard deviation of
    /// the dimension, in posts.
    pub post: f64,
    /// Same, in profile text.
    pub profile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LexiconShape {
    pub n_categories: usize,
    /// Literal words per category (at most 16).
    pub words_per_category: usize,
    /// Community words per category that only the extension knows.
    pub slang_per_category: usize,
    pub filler_words: usize,
}

impl Default for LexiconShape {
    fn default() -> Self {
        LexiconShape {
            n_categories: 90,
            words_per_category: 6,
            slang_per_category: 2,
            filler_words: 1500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextShape {
    /// Mean pooled post tokens per user.
    pub post_tokens: f64,
    pub profile_tokens: f64,
    /// Emission probability of an unplanted category per token.
    pub base_rate: f64,
    /// Share of a category's emissions that use community words.
    pub slang_share: f64,
    pub tokens_per_post: usize,
}

impl Default for TextShape {
    fn default() -> Self {
        TextShape {
            post_tokens: 600.0,
            profile_tokens: 300.0,
            base_rate: 0.006,
            slang_share: 0.25,
            tokens_per_post: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvsShape {
    pub scale_mean: f64,
    pub scale_sd: f64,
    pub item_noise: f64,
}

impl Default for SvsShape {
    fn default() -> Self {
        SvsShape {
            scale_mean: 3.5,
            scale_sd: 0.5,
            item_noise: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorShape {
    /// Mean tweets per user inside the window.
    pub tweet_rate: f64,
    /// High-OC over low-OC tweet-rate ratio (1 = no effect).
    pub oc_tweet_multiplier: f64,
    pub retweet_prob: f64,
    /// Low-SE over high-SE retweet-probability ratio.
    pub se_retweet_multiplier: f64,
    pub mean_followers: f64,
    pub follow_back_prob: f64,
    /// Low-CO over high-CO follow-back ratio.
    pub co_follow_back_multiplier: f64,
    pub window: Window,
    /// Extra tweets after the window, relative to the in-window rate.
    pub outside_fraction: f64,
}

impl Default for BehaviorShape {
    fn default() -> Self {
        BehaviorShape {
            tweet_rate: 40.0,
            oc_tweet_multiplier: 10.0,
            retweet_prob: 0.25,
            se_retweet_multiplier: 3.0,
            mean_followers: 30.0,
            follow_back_prob: 0.4,
            co_follow_back_multiplier: 1.5,
            window: Window::january_2017(),
            outside_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_users: usize,
    pub seed: u64,
    pub means: [f64; N_DIMS],
    pub stds: [f64; N_DIMS],
    pub correlations: [[f64; N_DIMS]; N_DIMS],
    pub lexicon: LexiconShape,
    pub text: TextShape,
    pub effects: Vec<PlantedEffect>,
    pub svs: SvsShape,
    pub behavior: BehaviorShape,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_users: 500,
            seed: 0,
            means: TABLE1_MEANS,
            stds: TABLE1_STDS,
            correlations: TABLE1_CORRELATIONS,
            lexicon: LexiconShape::default(),
            text: TextShape::default(),
            effects: planted_blocks(16, DEFAULT_EFFECTS, DEFAULT_EFFECTS),
            svs: SvsShape::default(),
            behavior: BehaviorShape::default(),
        }
    }
}

/// Consecutive blocks of `per_dimension` categories, one block per
/// dimension starting at category 1. Signs alternate within a block.
pub fn planted_blocks(per_dimension: usize, post: [f64; N_DIMS], profile: [f64; N_DIMS]) -> Vec<PlantedEffect> {
    let mut out = Vec::new();
    for d in Dimension::ALL {
        for j in 0..per_dimension {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            out.push(PlantedEffect {
                category_id: (d.index() * per_dimension + j + 1) as CategoryId,
                dimension: d,
                post: sign * post[d.index()],
                profile: sign * profile[d.index()],
            });
        }
    }
    out
}

impl GeneratorConfig {
    pub fn covariance(&self) -> Matrix5<f64> {
        Matrix5::from_fn(|i, j| self.correlations[i][j] * self.stds[i] * self.stds[j])
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64| x.is_finite();
        if !self.means.iter().chain(&self.stds).copied().all(finite) || self.stds.iter().any(|&s| s < 0.0) {
            return Err(Error::invalid("means and stds must be finite, stds non-negative"));
        }
        for i in 0..N_DIMS {
            for j in 0..N_DIMS {
                if !finite(self.correlations[i][j]) || self.correlations[i][j] != self.correlations[j][i] {
                    return Err(Error::invalid("correlation matrix must be finite and symmetric"));
                }
            }
        }
        let eig = SymmetricEigen::new(self.covariance());
        let scale = eig.eigenvalues.amax().max(1.0);
        if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
            return Err(Error::invalid(format!(
                "covariance matrix is not positive semidefinite (eigenvalues {:?})",
                eig.eigenvalues.as_slice()
            )));
        }
        if self.lexicon.words_per_category == 0 || self.lexicon.words_per_category > 16 || self.lexicon.slang_per_category > 16 {
            return Err(Error::invalid("words per category must be in 1..=16, slang per category at most 16"));
        }
        if self.lexicon.n_categories == 0 || self.lexicon.n_categories > 255 {
            return Err(Error::invalid("category count must be in 1..=255"));
        }
        if self.lexicon.filler_words == 0 || self.lexicon.filler_words > 4096 {
            return Err(Error::invalid("filler vocabulary must be in 1..=4096"));
        }
        let t = &self.text;
        if !(t.base_rate > 0.0 && t.base_rate < 1.0) || !(0.0..=1.0).contains(&t.slang_share) {
            return Err(Error::invalid("base_rate must be in (0,1) and slang_share in [0,1]"));
        }
        if t.post_tokens < 0.0 || t.profile_tokens < 0.0 || t.tokens_per_post == 0 {
            return Err(Error::invalid("token budgets must be non-negative and tokens_per_post positive"));
        }
        for e in &self.effects {
            if e.category_id == 0 || e.category_id as usize > self.lexicon.n_categories {
                return Err(Error::invalid(format!("planted category {} is not in the lexicon", e.category_id)));
            }
            if !finite(e.post) || !finite(e.profile) {
                return Err(Error::invalid("effect sizes must be finite"));
            }
        }
        let b = &self.behavior;
        for (name, v) in [
            ("tweet_rate", b.tweet_rate),
            ("oc_tweet_multiplier", b.oc_tweet_multiplier),
            ("se_retweet_multiplier", b.se_retweet_multiplier),
            ("co_follow_back_multiplier", b.co_follow_back_multiplier),
            ("mean_followers", b.mean_followers),
            ("outside_fraction", b.outside_fraction),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and non-negative")));
            }
        }
        if b.oc_tweet_multiplier == 0.0 || b.se_retweet_multiplier == 0.0 || b.co_follow_back_multiplier == 0.0 {
            return Err(Error::invalid("behavior multipliers must be positive"));
        }
        if !(0.0..=1.0).contains(&b.retweet_prob) || !(0.0..=1.0).contains(&b.follow_back_prob) {
            return Err(Error::invalid("probabilities must be in [0,1]"));
        }
        Ok(())
    }

    fn stream(&self, salt: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(salt);
        rng
    }
}

fn user_id(i: usize) -> String {
    format!("u{i:05}")
}

/// Multivariate normal draws with the configured moments.
pub fn generate_profiles(cfg: &GeneratorConfig) -> Result<Vec<ValueProfile>> {
    cfg.validate()?;
    let eig = SymmetricEigen::new(cfg.covariance());
    let sqrt_l = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let factor = eig.eigenvectors * Matrix5::from_diagonal(&sqrt_l);
    let mut rng = cfg.stream(1);
    Ok((0..cfg.n_users)
        .map(|i| {
            let z = Vector5::from_fn(|_, _| StandardNormal.sample(&mut rng));
            let v = factor * z;
            ValueProfile {
                user_id: user_id(i),
                scores: std::array::from_fn(|d| cfg.means[d] + v[d]),
            }
        })
        .collect())
}

const SYLLABLES: [&str; 16] = ["ba", "ko", "mi", "tu", "le", "sa", "ri", "no", "pe", "du", "ga", "fi", "zo", "he", "ja", "vu"];

fn category_prefix(c: usize) -> String {
    format!("{}{}", SYLLABLES[c / 16], SYLLABLES[c % 16])
}

fn base_word(c: usize, j: usize) -> String {
    format!("{}{}n", category_prefix(c), SYLLABLES[j])
}

fn stem_pattern(c: usize) -> String {
    format!("{}x", category_prefix(c))
}

fn slang_word(c: usize, j: usize) -> String {
    format!("{}{}lah", category_prefix(c), SYLLABLES[j])
}

fn filler_word(k: usize) -> String {
    format!("{}{}{}", SYLLABLES[k / 256 % 16], SYLLABLES[k / 16 % 16], SYLLABLES[k % 16])
}

/// Surface forms a category can emit: literal words plus two stem forms.
fn base_forms(c: usize, shape: &LexiconShape) -> Vec<String> {
    let mut v: Vec<String> = (0..shape.words_per_category).map(|j| base_word(c, j)).collect();
    v.push(format!("{}a", stem_pattern(c)));
    v.push(format!("{}o", stem_pattern(c)));
    v
}

/// Base lexicon (literals plus one stem per category) and the extension
/// holding the community words.
pub fn synthetic_lexicons(shape: &LexiconShape) -> Result<(Lexicon, Lexicon)> {
    let categories: Vec<Category> = (1..=shape.n_categories)
        .map(|id| Category {
            id: id as CategoryId,
            name: format!("cat{id:02}"),
        })
        .collect();
    let mut base = Vec::new();
    let mut ext = Vec::new();
    for c in 0..shape.n_categories {
        let id = (c + 1) as CategoryId;
        for j in 0..shape.words_per_category {
            base.push(Entry::literal(&base_word(c, j), [id]));
        }
        base.push(Entry::stem(&stem_pattern(c), [id]));
        for j in 0..shape.slang_per_category {
            ext.push(Entry::literal(&slang_word(c, j), [id]));
        }
    }
    Ok((Lexicon::new(categories.clone(), base)?, Lexicon::new(categories, ext)?))
}

/// Synonym pairs within a category and antonym pairs across paired
/// categories.
pub fn synthetic_pairs(shape: &LexiconShape) -> PairLists {
    let mut out = PairLists::default();
    let n = shape.n_categories;
    for c in 0..n {
        for j in 0..shape.words_per_category.saturating_sub(1) {
            out.synonyms.push((base_word(c, j), base_word(c, j + 1)));
        }
        let other = (c + n / 2) % n;
        if other != c {
            for j in 0..shape.words_per_category {
                out.antonyms.push((base_word(c, j), base_word(other, j)));
            }
        }
    }
    out
}

fn standardized(cfg: &GeneratorConfig, p: &ValueProfile) -> [f64; N_DIMS] {
    std::array::from_fn(|d| {
        if cfg.stds[d] > 0.0 {
            (p.scores[d] - cfg.means[d]) / cfg.stds[d]
        } else {
            0.0
        }
    })
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).map(|b| b.sample(rng)).unwrap_or(0)
}

/// Category token counts for one document with the logistic link, then
/// filler for the remainder.
fn category_counts(rng: &mut ChaCha8Rng, logits: &[f64], total: u64) -> Vec<u64> {
    let mut probs: Vec<f64> = logits.iter().map(|&l| sigmoid(l)).collect();
    let mass: f64 = probs.iter().sum();
    // keep at least a fifth of the tokens for filler
    if mass > 0.8 {
        probs.iter_mut().for_each(|p| *p *= 0.8 / mass);
    }
    let mut remaining = total;
    let mut remaining_mass = 1.0;
    let mut counts = Vec::with_capacity(probs.len());
    for p in probs {
        let k = binomial(rng, remaining, (p / remaining_mass).min(1.0));
        counts.push(k);
        remaining -= k;
        remaining_mass = (remaining_mass - p).max(1e-12);
    }
    counts
}

fn render_document(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig, counts: &[u64], total: u64) -> Vec<String> {
    let shape = &cfg.lexicon;
    let mut lex_tokens: Vec<Vec<String>> = Vec::new();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.shuffle(rng);
    for c in order {
        let forms = base_forms(c, shape);
        let mut run = Vec::new();
        for _ in 0..counts[c] {
            let word = if shape.slang_per_category > 0 && rng.random_bool(cfg.text.slang_share) {
                slang_word(c, rng.random_range(0..shape.slang_per_category))
            } else {
                forms[rng.random_range(0..forms.len())].clone()
            };
            run.push(word);
        }
        if !run.is_empty() {
            lex_tokens.push(run);
        }
    }
    let lexical: Vec<String> = lex_tokens.into_iter().flatten().collect();
    let n_lex = lexical.len() as u64;
    let n_filler = total.saturating_sub(n_lex);
    let n_docs = ((total as usize).div_ceil(cfg.text.tokens_per_post)).max(1);
    let mut docs: Vec<Vec<String>> = vec![Vec::new(); n_docs];
    let per_doc = lexical.len().div_ceil(n_docs).max(1);
    for (i, w) in lexical.into_iter().enumerate() {
        docs[(i / per_doc).min(n_docs - 1)].push(w);
    }
    for k in 0..n_filler as usize {
        docs[k % n_docs].push(filler_word(rng.random_range(0..shape.filler_words)));
    }
    docs.into_iter()
        .filter(|d| !d.is_empty())
        .map(|mut d| {
            d.shuffle(rng);
            let mut text = d.join(" ");
            match rng.random_range(0..20) {
                0 => text.push_str(" https://t.co/x1y2"),
                1 => text.insert_str(0, "@friend "),
                2 => text.push('!'),
                _ => text.push('.'),
            }
            if let Some(first) = text.get(0..1) {
                let upper = first.to_uppercase();
                text.replace_range(0..1, &upper);
            }
            text
        })
        .collect()
}

/// Posts and profile texts whose planted category frequencies follow the
/// users' dimension scores through a logistic link.
pub fn generate_corpus(profiles: &[ValueProfile], cfg: &GeneratorConfig) -> Result<Vec<UserRecord>> {
    cfg.validate()?;
    let n_cat = cfg.lexicon.n_categories;
    let base_logit = (cfg.text.base_rate / (1.0 - cfg.text.base_rate)).ln();
    let mut rng = cfg.stream(2);
    let mut users = Vec::with_capacity(profiles.len());
    for p in profiles {
        let z = standardized(cfg, p);
        let mut post_logits = vec![base_logit; n_cat];
        let mut profile_logits = vec![base_logit; n_cat];
        for e in &cfg.effects {
            let c = e.category_id as usize - 1;
            post_logits[c] += e.post * z[e.dimension.index()];
            profile_logits[c] += e.profile * z[e.dimension.index()];
        }
        let n_post = poisson(&mut rng, cfg.text.post_tokens);
        let n_profile = poisson(&mut rng, cfg.text.profile_tokens);
        let post_counts = category_counts(&mut rng, &post_logits, n_post);
        let profile_counts = category_counts(&mut rng, &profile_logits, n_profile);
        let posts = render_document(&mut rng, cfg, &post_counts, n_post);
        let profile_texts = render_document(&mut rng, cfg, &profile_counts, n_profile);
        users.push(UserRecord {
            user_id: p.user_id.clone(),
            posts,
            profile_texts,
        });
    }
    Ok(users)
}

/// Questionnaire answers: a personal scale offset plus the dimension score
/// of each item and item noise, clipped to the rating range.
pub fn generate_svs(profiles: &[ValueProfile], map: &DimensionMap, cfg: &GeneratorConfig) -> Result<Vec<SvsResponse>> {
    if map.n_items() != N_ITEMS {
        return Err(Error::invalid(format!("dimension map must cover {N_ITEMS} items")));
    }
    let offset = Normal::new(cfg.svs.scale_mean, cfg.svs.scale_sd.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.svs.item_noise.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = cfg.stream(3);
    profiles
        .iter()
        .map(|p| {
            let c = offset.sample(&mut rng);
            let ratings = (0..N_ITEMS)
                .map(|i| (c + p.scores[map.dimension_of(i).index()] + noise.sample(&mut rng)).clamp(RATING_MIN, RATING_MAX))
                .collect();
            SvsResponse::new(p.user_id.clone(), ratings)
        })
        .collect()
}

/// `m^(sigmoid(2z) - 1/2)`: ranges over `(m^-1/2, m^1/2)`; `m = 1` gives 1.
fn behavior_factor(multiplier: f64, z: f64) -> f64 {
    multiplier.powf(sigmoid(2.0 * z) - 0.5)
}

/// Tweets and follow edges with rates tied to OC (tweeting), SE
/// (retweeting) and CO (following back).
pub fn generate_behavior(profiles: &[ValueProfile], cfg: &GeneratorConfig) -> Result<(Vec<TweetRecord>, Vec<FollowEdge>)> {
    cfg.validate()?;
    let b = &cfg.behavior;
    let mut rng = cfg.stream(4);
    let oc = Dimension::OpennessToChange.index();
    let se = Dimension::SelfEnhancement.index();
    let co = Dimension::Conservative.index();
    let span = (b.window.end - b.window.start).max(1);
    let mut tweets = Vec::new();
    for p in profiles {
        let z = standardized(cfg, p);
        let rate = b.tweet_rate * behavior_factor(b.oc_tweet_multiplier, z[oc]);
        let p_rt = (b.retweet_prob * behavior_factor(1.0 / b.se_retweet_multiplier, z[se])).clamp(0.0, 1.0);
        let inside = poisson(&mut rng, rate);
        let outside = poisson(&mut rng, rate * b.outside_fraction);
        for k in 0..inside + outside {
            let offset = rng.random_range(0..span);
            let timestamp = if k < inside { b.window.start + offset } else { b.window.end + offset };
            tweets.push(TweetRecord {
                user_id: p.user_id.clone(),
                tweet_id: format!("{}-{k}", p.user_id),
                is_retweet: rng.random_bool(p_rt),
                timestamp,
            });
        }
    }
    let n = profiles.len();
    let mut edges = std::collections::BTreeSet::new();
    if n > 1 {
        for (u, p) in profiles.iter().enumerate() {
            let z = standardized(cfg, p);
            let p_back = (b.follow_back_prob * behavior_factor(1.0 / b.co_follow_back_multiplier, z[co])).clamp(0.0, 1.0);
            let k = (poisson(&mut rng, b.mean_followers) as usize).min(n - 1);
            let mut others: Vec<usize> = (0..n).filter(|&v| v != u).collect();
            let (chosen, _) = others.partial_shuffle(&mut rng, k);
            let mut chosen = chosen.to_vec();
            chosen.sort_unstable();
            for v in chosen {
                edges.insert((profiles[v].user_id.clone(), p.user_id.clone()));
                if rng.random_bool(p_back) {
                    edges.insert((p.user_id.clone(), profiles[v].user_id.clone()));
                }
            }
        }
    }
    let edges = edges
        .into_iter()
        .map(|(follower_id, followee_id)| FollowEdge { follower_id, followee_id })
        .collect();
    Ok((tweets, edges))
}

/// Everything the pipelines consume, generated from one config.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub config: GeneratorConfig,
    pub profiles: Vec<ValueProfile>,
    pub users: Vec<UserRecord>,
    pub dimension_map: DimensionMap,
    pub svs: Vec<SvsResponse>,
    pub tweets: Vec<TweetRecord>,
    pub edges: Vec<FollowEdge>,
    pub base_lexicon: Lexicon,
    /// The community words the generator used, as a lexicon extension.
    pub true_extension: Lexicon,
    pub pairs: PairLists,
}

impl SynthDataset {
    pub fn generate(cfg: &GeneratorConfig) -> Result<Self> {
        let profiles = generate_profiles(cfg)?;
        let users = generate_corpus(&profiles, cfg)?;
        let dimension_map = DimensionMap::synthetic_default();
        let svs = generate_svs(&profiles, &dimension_map, cfg)?;
        let (tweets, edges) = generate_behavior(&profiles, cfg)?;
        let (base_lexicon, true_extension) = synthetic_lexicons(&cfg.lexicon)?;
        Ok(SynthDataset {
            config: cfg.clone(),
            profiles,
            users,
            dimension_map,
            svs,
            tweets,
            edges,
            base_lexicon,
            true_extension,
            pairs: synthetic_pairs(&cfg.lexicon),
        })
    }

    /// Writes every artifact under `dir` and returns the written paths.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, bytes)?;
            written.push(path);
            Ok(())
        };
        put("generator.json", serde_json::to_vec_pretty(&self.config)?)?;
        put("profiles.csv", profiles_to_csv(&self.profiles).into_bytes())?;
        let mut corpus = Vec::new();
        write_corpus_jsonl(&mut corpus, &self.users)?;
        put("corpus.jsonl", corpus)?;
        put("dimension_map.csv", self.dimension_map.to_csv().into_bytes())?;
        put("svs.csv", svs_to_csv(&self.svs).into_bytes())?;
        let mut tweets = Vec::new();
        write_tweets_jsonl(&mut tweets, &self.tweets)?;
        put("tweets.jsonl", tweets)?;
        let mut edges = Vec::new();
        write_edges_tsv(&mut edges, &self.edges)?;
        put("edges.tsv", edges)?;
        put("base.dic", self.base_lexicon.to_dic().into_bytes())?;
        put("true_extension.dic", self.true_extension.to_dic().into_bytes())?;
        let mut pairs = Vec::new();
        write_pairs_tsv(&mut pairs, &self.pairs)?;
        put("pairs.tsv", pairs)?;
        Ok(written)
    }
}
