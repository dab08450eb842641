//! Tweeting and follow-graph metrics for high/low predicted-value groups.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dims::{Dimension, N_DIMS};
use crate::error::{Error, Result};
use crate::evaluation::top_bottom_users;
use crate::stats::{mean, population_std};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub user_id: String,
    pub tweet_id: String,
    pub is_retweet: bool,
    /// UTC seconds.
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FollowEdge {
    pub follower_id: String,
    pub followee_id: String,
}

/// Half-open time window `[start, end)` in UTC seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

impl Window {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if end <= start {
            return Err(Error::invalid(format!("window end {end} is not after start {start}")));
        }
        Ok(Window { start, end })
    }

    /// 2017-01-01T00:00:00Z to 2017-02-01T00:00:00Z.
    pub fn january_2017() -> Self {
        Window {
            start: 1_483_228_800,
            end: 1_485_907_200,
        }
    }

    pub fn contains(&self, ts: i64) -> bool {
        self.start <= ts && ts < self.end
    }
}

impl Default for Window {
    fn default() -> Self {
        Window::january_2017()
    }
}

/// Reads tweets, dropping exact duplicates. Two different records with the
/// same `tweet_id` are an error.
pub fn read_tweets_jsonl<R: BufRead>(reader: R) -> Result<Vec<TweetRecord>> {
    let mut out = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TweetRecord = serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        match seen.get(&t.tweet_id) {
            Some(&j) if out[j] == t => continue,
            Some(_) => return Err(Error::parse(line_no, format!("conflicting records for tweet `{}`", t.tweet_id))),
            None => {
                seen.insert(t.tweet_id.clone(), out.len());
                out.push(t);
            }
        }
    }
    Ok(out)
}

pub fn load_tweets(path: &Path) -> Result<Vec<TweetRecord>> {
    read_tweets_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write_tweets_jsonl<W: Write>(mut w: W, tweets: &[TweetRecord]) -> Result<()> {
    for t in tweets {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads `follower<TAB>followee` lines. Duplicates are dropped; self-edges
/// are rejected.
pub fn read_edges_tsv<R: BufRead>(reader: R) -> Result<Vec<FollowEdge>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(line_no, "expected `follower_id<TAB>followee_id`"));
        };
        if a.is_empty() || b.is_empty() {
            return Err(Error::parse(line_no, "empty user id"));
        }
        if a == b {
            return Err(Error::parse(line_no, format!("self-edge for `{a}`")));
        }
        let e = FollowEdge {
            follower_id: a.to_string(),
            followee_id: b.to_string(),
        };
        if seen.insert(e.clone()) {
            out.push(e);
        }
    }
    Ok(out)
}

pub fn load_edges(path: &Path) -> Result<Vec<FollowEdge>> {
    read_edges_tsv(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write_edges_tsv<W: Write>(mut w: W, edges: &[FollowEdge]) -> Result<()> {
    for e in edges {
        writeln!(w, "{}\t{}", e.follower_id, e.followee_id)?;
    }
    Ok(())
}

pub fn original_tweet_count<'a>(tweets: impl IntoIterator<Item = &'a TweetRecord>, window: Window) -> u64 {
    tweets.into_iter().filter(|t| !t.is_retweet && window.contains(t.timestamp)).count() as u64
}

/// Retweets over all tweets in the window; `None` without tweets.
pub fn retweet_ratio<'a>(tweets: impl IntoIterator<Item = &'a TweetRecord>, window: Window) -> Option<f64> {
    let (mut total, mut rts) = (0u64, 0u64);
    for t in tweets.into_iter().filter(|t| window.contains(t.timestamp)) {
        total += 1;
        rts += t.is_retweet as u64;
    }
    (total > 0).then(|| rts as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FriendDenominator {
    /// Reciprocal edges over followers.
    #[default]
    Followers,
    /// Reciprocal edges over followees.
    Followees,
}

/// Deduplicated follow graph.
#[derive(Debug, Clone, Default)]
pub struct FollowGraph {
    followers: HashMap<String, BTreeSet<String>>,
    followees: HashMap<String, BTreeSet<String>>,
}

impl FollowGraph {
    pub fn new(edges: &[FollowEdge]) -> Self {
        let mut g = FollowGraph::default();
        for e in edges.iter().filter(|e| e.follower_id != e.followee_id) {
            g.followers
                .entry(e.followee_id.clone())
                .or_default()
                .insert(e.follower_id.clone());
            g.followees
                .entry(e.follower_id.clone())
                .or_default()
                .insert(e.followee_id.clone());
        }
        g
    }

    pub fn followers(&self, user: &str) -> usize {
        self.followers.get(user).map_or(0, BTreeSet::len)
    }

    pub fn followees(&self, user: &str) -> usize {
        self.followees.get(user).map_or(0, BTreeSet::len)
    }

    /// Users linked to `user` in both directions.
    pub fn friends(&self, user: &str) -> usize {
        match (self.followers.get(user), self.followees.get(user)) {
            (Some(a), Some(b)) => a.intersection(b).count(),
            _ => 0,
        }
    }
}

pub fn friend_follower_ratio(graph: &FollowGraph, user: &str, denominator: FriendDenominator) -> Option<f64> {
    let denom = match denominator {
        FriendDenominator::Followers => graph.followers(user),
        FriendDenominator::Followees => graph.followees(user),
    };
    (denom > 0).then(|| graph.friends(user) as f64 / denom as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserBehavior {
    pub original_tweets: u64,
    pub retweet_ratio: Option<f64>,
    pub friend_ratio: Option<f64>,
}

/// Tweets grouped by user plus the follow graph.
pub struct BehaviorData<'a> {
    by_user: HashMap<&'a str, Vec<&'a TweetRecord>>,
    graph: FollowGraph,
}

impl<'a> BehaviorData<'a> {
    pub fn new(tweets: &'a [TweetRecord], edges: &[FollowEdge]) -> Self {
        let mut by_user: HashMap<&str, Vec<&TweetRecord>> = HashMap::new();
        let mut seen = HashSet::new();
        for t in tweets {
            if seen.insert(t.tweet_id.as_str()) {
                by_user.entry(t.user_id.as_str()).or_default().push(t);
            }
        }
        BehaviorData {
            by_user,
            graph: FollowGraph::new(edges),
        }
    }

    pub fn graph(&self) -> &FollowGraph {
        &self.graph
    }

    pub fn user(&self, user: &str, window: Window, denominator: FriendDenominator) -> UserBehavior {
        let tweets = self.by_user.get(user).map(Vec::as_slice).unwrap_or(&[]);
        UserBehavior {
            original_tweets: original_tweet_count(tweets.iter().copied(), window),
            retweet_ratio: retweet_ratio(tweets.iter().copied(), window),
            friend_ratio: friend_follower_ratio(&self.graph, user, denominator),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    High,
    Low,
}

/// Mean and population standard deviation over users where the metric is
/// defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Users contributing a value.
    pub count: usize,
}

impl MetricStats {
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return MetricStats {
                mean: None,
                std: None,
                count: 0,
            };
        }
        MetricStats {
            mean: Some(mean(values)),
            std: Some(population_std(values)),
            count: values.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBehaviorStats {
    pub dimension: Dimension,
    pub group: Group,
    pub size: usize,
    pub original_tweets: MetricStats,
    pub retweet_ratio: MetricStats,
    pub friend_follower_ratio: MetricStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    OriginalTweets,
    RetweetRatio,
    FriendFollowerRatio,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::OriginalTweets, Metric::RetweetRatio, Metric::FriendFollowerRatio];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRow {
    pub dimension: Dimension,
    pub metric: Metric,
    /// High-group mean minus low-group mean.
    pub difference: Option<f64>,
    /// Sign of the difference: 1, -1, or 0 (equal or undefined).
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub x: usize,
    pub window: Window,
    pub denominator: FriendDenominator,
    pub stats: Vec<GroupBehaviorStats>,
    pub hypotheses: Vec<HypothesisRow>,
}

impl BehaviorReport {
    pub fn get(&self, dim: Dimension, group: Group) -> &GroupBehaviorStats {
        self.stats.iter().find(|s| s.dimension == dim && s.group == group).expect("every dimension has both groups")
    }

    pub fn hypothesis(&self, dim: Dimension, metric: Metric) -> &HypothesisRow {
        self.hypotheses
            .iter()
            .find(|h| h.dimension == dim && h.metric == metric)
            .expect("every dimension has every metric")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "dimension,group,size,original_tweets_mean,original_tweets_std,retweet_ratio_mean,retweet_ratio_std,retweet_ratio_n,friend_follower_ratio_mean,friend_follower_ratio_std,friend_follower_ratio_n\n",
        );
        let f = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for s in &self.stats {
            let group = match s.group {
                Group::High => "high",
                Group::Low => "low",
            };
            let _ = writeln!(
                out,
                "{},{group},{},{},{},{},{},{},{},{},{}",
                s.dimension.code(),
                s.size,
                f(s.original_tweets.mean),
                f(s.original_tweets.std),
                f(s.retweet_ratio.mean),
                f(s.retweet_ratio.std),
                s.retweet_ratio.count,
                f(s.friend_follower_ratio.mean),
                f(s.friend_follower_ratio.std),
                s.friend_follower_ratio.count,
            );
        }
        out
    }
}

fn group_metrics(users: &[String], metrics: &BTreeMap<&str, UserBehavior>) -> [MetricStats; 3] {
    let rows: Vec<&UserBehavior> = users.iter().map(|u| &metrics[u.as_str()]).collect();
    let tweets: Vec<f64> = rows.iter().map(|b| b.original_tweets as f64).collect();
    let rt: Vec<f64> = rows.iter().filter_map(|b| b.retweet_ratio).collect();
    let fr: Vec<f64> = rows.iter().filter_map(|b| b.friend_ratio).collect();
    [MetricStats::from_values(&tweets), MetricStats::from_values(&rt), MetricStats::from_values(&fr)]
}

/// For each dimension, compares the top-`x` and bottom-`x` users by
/// predicted score on the three behavior metrics.
pub fn group_stats(
    predictions: &[(String, [f64; N_DIMS])],
    data: &BehaviorData,
    x: usize,
    window: Window,
    denominator: FriendDenominator,
) -> Result<BehaviorReport> {
    let mut seen = HashSet::new();
    for (u, _) in predictions {
        if !seen.insert(u.as_str()) {
            return Err(Error::invalid(format!("duplicate prediction for user `{u}`")));
        }
    }
    let per_user: Vec<UserBehavior> = predictions
        .par_iter()
        .map(|(u, _)| data.user(u, window, denominator))
        .collect();
    let metrics: BTreeMap<&str, UserBehavior> = predictions.iter().map(|(u, _)| u.as_str()).zip(per_user).collect();

    let mut stats = Vec::with_capacity(2 * N_DIMS);
    let mut hypotheses = Vec::with_capacity(3 * N_DIMS);
    for d in Dimension::ALL {
        let scores: Vec<(String, f64)> = predictions.iter().map(|(u, s)| (u.clone(), s[d.index()])).collect();
        let (top, bottom) = top_bottom_users(&scores, x)?;
        let high = group_metrics(&top, &metrics);
        let low = group_metrics(&bottom, &metrics);
        for (group, m) in [(Group::High, high), (Group::Low, low)] {
            stats.push(GroupBehaviorStats {
                dimension: d,
                group,
                size: x,
                original_tweets: m[0],
                retweet_ratio: m[1],
                friend_follower_ratio: m[2],
            });
        }
        for (i, metric) in Metric::ALL.into_iter().enumerate() {
            let difference = match (high[i].mean, low[i].mean) {
                (Some(h), Some(l)) => Some(h - l),
                _ => None,
            };
            let sign = match difference {
                Some(v) if v > 0.0 => 1,
                Some(v) if v < 0.0 => -1,
                _ => 0,
            };
            hypotheses.push(HypothesisRow {
                dimension: d,
                metric,
                difference,
                sign,
            });
        }
    }
    Ok(BehaviorReport {
        x,
        window,
        denominator,
        stats,
        hypotheses,
    })
}
