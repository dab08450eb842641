//! Questionnaire responses to centered value scores and top-K% labels.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dims::{Dimension, N_DIMS};
use crate::error::{Error, Result};
use crate::stats::{population_variance, CorrelationMatrix};

pub const N_ITEMS: usize = 56;
pub const RATING_MIN: f64 = -1.0;
pub const RATING_MAX: f64 = 7.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvsResponse {
    pub user_id: String,
    pub ratings: Vec<f64>,
}

impl SvsResponse {
    pub fn new(user_id: impl Into<String>, ratings: Vec<f64>) -> Result<Self> {
        let user_id = user_id.into();
        if ratings.len() != N_ITEMS {
            return Err(Error::invalid(format!(
                "user `{user_id}`: expected {N_ITEMS} ratings, got {}",
                ratings.len()
            )));
        }
        if let Some((i, r)) = ratings
            .iter()
            .enumerate()
            .find(|(_, r)| !(RATING_MIN..=RATING_MAX).contains(*r))
        {
            return Err(Error::invalid(format!(
                "user `{user_id}`: item {} rating {r} outside [{RATING_MIN}, {RATING_MAX}]",
                i + 1
            )));
        }
        Ok(SvsResponse { user_id, ratings })
    }
}

/// Subtracts the user's mean rating from every rating.
pub fn center_response(ratings: &[f64]) -> Vec<f64> {
    if ratings.is_empty() {
        return Vec::new();
    }
    let m = ratings.iter().sum::<f64>() / ratings.len() as f64;
    let mut out: Vec<f64> = ratings.iter().map(|r| r - m).collect();
    // one correction pass absorbs the rounding left in the first subtraction
    let residual = out.iter().sum::<f64>() / out.len() as f64;
    out.iter_mut().for_each(|x| *x -= residual);
    out
}

/// Item index (0-based) → dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionMap {
    items: Vec<Dimension>,
}

impl DimensionMap {
    pub fn new(items: Vec<Dimension>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::invalid("dimension map has no items"));
        }
        for d in Dimension::ALL {
            if !items.contains(&d) {
                return Err(Error::invalid(format!("dimension {d} has no items")));
            }
        }
        Ok(DimensionMap { items })
    }

    /// Default mapping for the synthetic instrument: item `i` (1-based) goes to
    /// dimension `(i - 1) mod 5` in CO, ST, OC, HE, SE order.
    pub fn synthetic_default() -> Self {
        DimensionMap {
            items: (0..N_ITEMS).map(|i| Dimension::ALL[i % N_DIMS]).collect(),
        }
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn dimension_of(&self, item: usize) -> Dimension {
        self.items[item]
    }

    pub fn items_of(&self, dim: Dimension) -> Vec<usize> {
        (0..self.items.len()).filter(|&i| self.items[i] == dim).collect()
    }

    /// Parses `item_index,dimension` CSV (1-based item indices, header row).
    pub fn from_csv<R: Read>(reader: R, n_items: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut items: Vec<Option<Dimension>> = vec![None; n_items];
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::parse(line, "expected `item_index,dimension`"));
            }
            let idx: usize = rec[0]
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid item index `{}`", &rec[0])))?;
            if idx == 0 || idx > n_items {
                return Err(Error::parse(line, format!("item index {idx} out of range 1..={n_items}")));
            }
            let dim: Dimension = rec[1].parse().map_err(|e: Error| Error::parse(line, e.to_string()))?;
            if items[idx - 1].replace(dim).is_some() {
                return Err(Error::parse(line, format!("item {idx} mapped twice")));
            }
        }
        let items = items
            .into_iter()
            .enumerate()
            .map(|(i, d)| d.ok_or_else(|| Error::invalid(format!("dimension map is missing item {}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        DimensionMap::new(items)
    }

    pub fn load(path: &Path, n_items: usize) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?, n_items)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("item_index,dimension\n");
        for (i, d) in self.items.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, d.code());
        }
        out
    }
}

/// Centered higher-order value scores of one user, indexed by [`Dimension`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueProfile {
    pub user_id: String,
    pub scores: [f64; N_DIMS],
}

impl ValueProfile {
    pub fn score(&self, d: Dimension) -> f64 {
        self.scores[d.index()]
    }
}

/// Mean of the centered ratings of each dimension's items.
pub fn dimension_scores(user_id: &str, centered: &[f64], map: &DimensionMap) -> Result<ValueProfile> {
    if centered.len() != map.n_items() {
        return Err(Error::invalid(format!(
            "dimension map covers {} items but the response has {}",
            map.n_items(),
            centered.len()
        )));
    }
    let mut sums = [0.0; N_DIMS];
    let mut counts = [0usize; N_DIMS];
    for (i, r) in centered.iter().enumerate() {
        let d = map.dimension_of(i).index();
        sums[d] += r;
        counts[d] += 1;
    }
    let mut scores = [0.0; N_DIMS];
    for d in 0..N_DIMS {
        scores[d] = sums[d] / counts[d] as f64;
    }
    Ok(ValueProfile {
        user_id: user_id.to_string(),
        scores,
    })
}

pub fn profiles_from_responses(responses: &[SvsResponse], map: &DimensionMap) -> Result<Vec<ValueProfile>> {
    responses
        .iter()
        .map(|r| dimension_scores(&r.user_id, &center_response(&r.ratings), map))
        .collect()
}

/// Cronbach's alpha over a users × items matrix (rows are users), with
/// population variances.
pub fn cronbach_alpha(items: &[Vec<f64>]) -> Result<f64> {
    let n_users = items.len();
    if n_users < 2 {
        return Err(Error::invalid("cronbach's alpha needs at least two users"));
    }
    let k = items[0].len();
    if k < 2 {
        return Err(Error::invalid("cronbach's alpha needs at least two items"));
    }
    if let Some(row) = items.iter().find(|r| r.len() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: row.len(),
        });
    }
    let item_var_sum: f64 = (0..k)
        .map(|j| population_variance(&items.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .sum();
    let totals: Vec<f64> = items.iter().map(|r| r.iter().sum()).collect();
    let total_var = population_variance(&totals);
    if total_var <= 0.0 {
        return Err(Error::degenerate("item sums have zero variance; alpha undefined"));
    }
    let k = k as f64;
    Ok(k / (k - 1.0) * (1.0 - item_var_sum / total_var))
}

/// Alpha for each dimension from raw (or centered) responses.
pub fn cronbach_by_dimension(responses: &[SvsResponse], map: &DimensionMap, centered: bool) -> [Result<f64>; N_DIMS] {
    Dimension::ALL.map(|d| {
        let idx = map.items_of(d);
        let rows: Vec<Vec<f64>> = responses
            .iter()
            .map(|r| {
                let ratings = if centered {
                    center_response(&r.ratings)
                } else {
                    r.ratings.clone()
                };
                idx.iter().map(|&i| ratings[i]).collect()
            })
            .collect();
        cronbach_alpha(&rows)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
    Excluded,
}

impl Label {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Label::Positive => Some(true),
            Label::Negative => Some(false),
            Label::Excluded => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Label::Positive => "1",
            Label::Negative => "0",
            Label::Excluded => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLabelSet {
    pub user_id: String,
    pub labels: [Label; N_DIMS],
}

impl BinaryLabelSet {
    pub fn get(&self, d: Dimension) -> Label {
        self.labels[d.index()]
    }
}

/// Group sizes for `n` users at `k_percent`: `(positive, negative, excluded)`.
///
/// `floor(n * (100 - 2K) / 100)` users in the middle are excluded and the
/// remainder split as evenly as possible, the extra user going positive.
pub fn label_counts(n: usize, k_percent: u32) -> (usize, usize, usize) {
    let excluded = n * (100 - 2 * k_percent as usize) / 100;
    let rest = n - excluded;
    (rest - rest / 2, rest / 2, excluded)
}

/// Top-K% / bottom-K% labels per dimension. Users are ranked by score
/// descending with ascending `user_id` breaking ties.
pub fn make_labels(profiles: &[ValueProfile], k_percent: u32) -> Result<Vec<BinaryLabelSet>> {
    if !(1..=50).contains(&k_percent) {
        return Err(Error::invalid(format!("K must be in 1..=50, got {k_percent}")));
    }
    if profiles.len() < 2 {
        return Err(Error::invalid("labelling needs at least two users"));
    }
    let mut ids = HashSet::new();
    for p in profiles {
        if !ids.insert(p.user_id.as_str()) {
            return Err(Error::invalid(format!("duplicate user_id `{}`", p.user_id)));
        }
    }
    let n = profiles.len();
    let (n_pos, _, n_excl) = label_counts(n, k_percent);
    let mut out: Vec<BinaryLabelSet> = profiles
        .iter()
        .map(|p| BinaryLabelSet {
            user_id: p.user_id.clone(),
            labels: [Label::Negative; N_DIMS],
        })
        .collect();
    for d in 0..N_DIMS {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            profiles[b].scores[d]
                .total_cmp(&profiles[a].scores[d])
                .then_with(|| profiles[a].user_id.cmp(&profiles[b].user_id))
        });
        for (rank, &u) in order.iter().enumerate() {
            out[u].labels[d] = if rank < n_pos {
                Label::Positive
            } else if rank < n_pos + n_excl {
                Label::Excluded
            } else {
                Label::Negative
            };
        }
    }
    Ok(out)
}

/// Pearson correlations among the five dimensions, significance at p < 0.05.
pub fn dimension_correlations(profiles: &[ValueProfile]) -> Result<CorrelationMatrix> {
    if profiles.len() < 3 {
        return Err(Error::invalid("correlations need at least three users"));
    }
    let columns: Vec<Vec<f64>> = (0..N_DIMS).map(|d| profiles.iter().map(|p| p.scores[d]).collect()).collect();
    Ok(CorrelationMatrix::from_columns(
        Dimension::ALL.iter().map(|d| d.code().to_string()).collect(),
        &columns,
        0.05,
    ))
}

/// Parses `user_id,item_1,...,item_N`.
pub fn read_svs_csv<R: Read>(reader: R) -> Result<Vec<SvsResponse>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let n_cols = rdr.headers()?.len();
    if n_cols != N_ITEMS + 1 {
        return Err(Error::parse(1, format!("expected {} columns, found {n_cols}", N_ITEMS + 1)));
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        let uid = rec[0].to_string();
        if uid.is_empty() || !seen.insert(uid.clone()) {
            return Err(Error::parse(line, format!("empty or duplicate user_id `{uid}`")));
        }
        let ratings = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|_| Error::parse(line, format!("invalid rating `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(SvsResponse::new(uid, ratings).map_err(|e| Error::parse(line, e.to_string()))?);
    }
    Ok(out)
}

pub fn load_svs(path: &Path) -> Result<Vec<SvsResponse>> {
    read_svs_csv(std::fs::File::open(path)?)
}

pub fn svs_to_csv(responses: &[SvsResponse]) -> String {
    let mut out = String::from("user_id");
    for i in 1..=N_ITEMS {
        let _ = write!(out, ",item_{i}");
    }
    out.push('\n');
    for r in responses {
        out.push_str(&r.user_id);
        for x in &r.ratings {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

/// `user_id,CO,ST,OC,HE,SE` with `1`, `0` or `-` (excluded).
pub fn labels_to_csv(labels: &[BinaryLabelSet]) -> String {
    let mut out = String::from("user_id,CO,ST,OC,HE,SE\n");
    for l in labels {
        out.push_str(&l.user_id);
        for x in &l.labels {
            out.push(',');
            out.push_str(x.symbol());
        }
        out.push('\n');
    }
    out
}

pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<BinaryLabelSet>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["user_id", "CO", "ST", "OC", "HE", "SE"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::parse(1, "expected header `user_id,CO,ST,OC,HE,SE`"));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        let mut labels = [Label::Excluded; N_DIMS];
        for d in 0..N_DIMS {
            labels[d] = match &rec[d + 1] {
                "1" => Label::Positive,
                "0" => Label::Negative,
                "-" => Label::Excluded,
                other => return Err(Error::parse(line, format!("invalid label `{other}`"))),
            };
        }
        out.push(BinaryLabelSet {
            user_id: rec[0].to_string(),
            labels,
        });
    }
    Ok(out)
}

pub fn load_labels(path: &Path) -> Result<Vec<BinaryLabelSet>> {
    read_labels_csv(std::fs::File::open(path)?)
}

pub fn profiles_to_csv(profiles: &[ValueProfile]) -> String {
    let mut out = String::from("user_id,CO,ST,OC,HE,SE\n");
    for p in profiles {
        out.push_str(&p.user_id);
        for s in &p.scores {
            let _ = write!(out, ",{s}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(id: &str, s: [f64; N_DIMS]) -> ValueProfile {
        ValueProfile {
            user_id: id.into(),
            scores: s,
        }
    }

    #[test]
    fn centering_examples() {
        assert_eq!(center_response(&[5.0; N_ITEMS]), vec![0.0; N_ITEMS]);
        assert_eq!(center_response(&[7.0, 3.0]), vec![2.0, -2.0]);
        assert_eq!(center_response(&[2.0, -2.0]), vec![2.0, -2.0]);
    }

    #[test]
    fn response_validation() {
        assert!(SvsResponse::new("u", vec![0.0; 55]).is_err());
        let mut r = vec![0.0; N_ITEMS];
        r[3] = 7.5;
        assert!(SvsResponse::new("u", r).is_err());
        assert!(SvsResponse::new("u", vec![-1.0; N_ITEMS]).is_ok());
    }

    #[test]
    fn dimension_score_is_member_mean() {
        let map = DimensionMap::synthetic_default();
        let zero = dimension_scores("u", &[0.0; N_ITEMS], &map).unwrap();
        assert_eq!(zero.scores, [0.0; N_DIMS]);

        // toy instrument: CO = {2, -2}, ST = {1.5}, one item each for the rest
        let toy = DimensionMap::new(vec![
            Dimension::Conservative,
            Dimension::Conservative,
            Dimension::SelfTranscendence,
            Dimension::OpennessToChange,
            Dimension::Hedonism,
            Dimension::SelfEnhancement,
        ])
        .unwrap();
        let p = dimension_scores("u", &[2.0, -2.0, 1.5, 0.0, 0.0, 0.0], &toy).unwrap();
        assert_eq!(p.score(Dimension::Conservative), 0.0);
        assert_eq!(p.score(Dimension::SelfTranscendence), 1.5);
        assert!(dimension_scores("u", &[0.0; 3], &toy).is_err());
    }

    #[test]
    fn dimension_map_csv_round_trip_and_missing_item() {
        let map = DimensionMap::synthetic_default();
        let back = DimensionMap::from_csv(map.to_csv().as_bytes(), N_ITEMS).unwrap();
        assert_eq!(back, map);
        let partial = "item_index,dimension\n1,CO\n";
        assert!(DimensionMap::from_csv(partial.as_bytes(), N_ITEMS).is_err());
    }

    #[test]
    fn alpha_identical_columns_is_one() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        assert!((cronbach_alpha(&rows).unwrap() - 1.0).abs() < 1e-12);
        let flat = vec![vec![1.0, 1.0]; 4];
        assert!(matches!(cronbach_alpha(&flat), Err(Error::Degenerate(_))));
    }

    #[test]
    fn labels_k50_and_k40() {
        let ps: Vec<ValueProfile> = (0..10).map(|i| profile(&format!("u{i}"), [i as f64; N_DIMS])).collect();
        let l50 = make_labels(&ps, 50).unwrap();
        let count = |ls: &[BinaryLabelSet], x: Label| ls.iter().filter(|l| l.labels[0] == x).count();
        assert_eq!((count(&l50, Label::Positive), count(&l50, Label::Negative)), (5, 5));
        let l40 = make_labels(&ps, 40).unwrap();
        assert_eq!(count(&l40, Label::Positive), 4);
        assert_eq!(count(&l40, Label::Negative), 4);
        assert_eq!(count(&l40, Label::Excluded), 2);
        assert_eq!(l40[9].labels[0], Label::Positive);
        assert_eq!(l40[0].labels[0], Label::Negative);
    }

    #[test]
    fn ties_break_by_user_id() {
        let ps: Vec<ValueProfile> = ["d", "b", "a", "c"].iter().map(|id| profile(id, [1.0; N_DIMS])).collect();
        let l = make_labels(&ps, 50).unwrap();
        let pos: Vec<&str> = l
            .iter()
            .filter(|x| x.labels[2] == Label::Positive)
            .map(|x| x.user_id.as_str())
            .collect();
        assert_eq!(pos, ["b", "a"]);
    }

    #[test]
    fn odd_population_at_k50_has_no_exclusions() {
        assert_eq!(label_counts(7, 50), (4, 3, 0));
        assert_eq!(label_counts(10, 40), (4, 4, 2));
        assert_eq!(label_counts(11, 40), (5, 4, 2));
    }

    #[test]
    fn correlations_of_mirrored_dimensions() {
        let ps: Vec<ValueProfile> = (0..6)
            .map(|i| {
                let x = (i * i) as f64;
                profile(&i.to_string(), [x, -x, (i as f64).sin(), (i as f64).cos(), i as f64])
            })
            .collect();
        let m = dimension_correlations(&ps).unwrap();
        assert!((m.get(0, 1).unwrap() + 1.0).abs() < 1e-12);
        for d in 0..N_DIMS {
            assert_eq!(m.get(d, d), Some(1.0));
        }
        assert!(m.significant[0][1]);
    }

    #[test]
    fn zero_variance_dimension_is_missing() {
        let ps: Vec<ValueProfile> = (0..5).map(|i| profile(&i.to_string(), [i as f64, 1.0, 0.0, 2.0, 3.0])).collect();
        let m = dimension_correlations(&ps).unwrap();
        assert_eq!(m.get(0, 1), None);
        assert_eq!(m.get(1, 1), None);
    }

    #[test]
    fn csv_formats() {
        let ps = vec![profile("a", [1.0; N_DIMS]), profile("b", [0.0; N_DIMS]), profile("c", [0.5; N_DIMS])];
        let l = make_labels(&ps, 40).unwrap();
        let csv = labels_to_csv(&l);
        assert!(csv.starts_with("user_id,CO,ST,OC,HE,SE\n"));
        assert_eq!(read_labels_csv(csv.as_bytes()).unwrap(), l);

        let r = vec![SvsResponse::new("x", vec![3.0; N_ITEMS]).unwrap()];
        assert_eq!(read_svs_csv(svs_to_csv(&r).as_bytes()).unwrap(), r);
    }
}
