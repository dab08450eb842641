//! LIWC-style word-category dictionaries.
//!
//! A dictionary maps literal words and trailing-`*` stems to one or more
//! categories. Scoring a token list counts, per category, how many tokens
//! hit that category; a token contributes at most once to any category even
//! when several entries (a literal and one or more stems) match it.
//!
//! The on-disk `.dic` layout is
//!
//! ```text
//! %
//! 1	posemo
//! 2	negemo
//! %
//! happ*	1
//! sad	2
//! ```

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CategoryId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: CategoryId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    /// Word or stem prefix, without the trailing `*`.
    pub pattern: String,
    pub is_stem: bool,
    pub categories: BTreeSet<CategoryId>,
}

impl Entry {
    pub fn literal(word: &str, categories: impl IntoIterator<Item = CategoryId>) -> Self {
        Entry {
            pattern: word.to_lowercase(),
            is_stem: false,
            categories: categories.into_iter().collect(),
        }
    }

    pub fn stem(prefix: &str, categories: impl IntoIterator<Item = CategoryId>) -> Self {
        Entry {
            pattern: prefix.to_lowercase(),
            is_stem: true,
            categories: categories.into_iter().collect(),
        }
    }

    /// `.dic` spelling of the pattern.
    pub fn display_pattern(&self) -> String {
        if self.is_stem {
            format!("{}*", self.pattern)
        } else {
            self.pattern.clone()
        }
    }
}

/// Immutable word-category dictionary.
#[derive(Debug, Clone)]
pub struct Lexicon {
    categories: Vec<Category>,
    entries: Vec<Entry>,
    category_pos: HashMap<CategoryId, usize>,
    literal_index: HashMap<String, usize>,
    stem_index: HashMap<String, usize>,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.categories == other.categories && self.entries == other.entries
    }
}

impl Lexicon {
    /// Builds a lexicon, checking the category/entry invariants. Entries with
    /// the same `(pattern, is_stem)` key are folded together.
    pub fn new(categories: Vec<Category>, entries: Vec<Entry>) -> Result<Self> {
        let mut category_pos = HashMap::with_capacity(categories.len());
        let mut names = HashSet::with_capacity(categories.len());
        for (i, c) in categories.iter().enumerate() {
            if category_pos.insert(c.id, i).is_some() {
                return Err(Error::invalid(format!("duplicate category id {}", c.id)));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::invalid(format!("duplicate category name `{}`", c.name)));
            }
        }
        let mut lex = Lexicon {
            categories,
            entries: Vec::with_capacity(entries.len()),
            category_pos,
            literal_index: HashMap::new(),
            stem_index: HashMap::new(),
        };
        for e in entries {
            lex.insert_entry(e)?;
        }
        Ok(lex)
    }

    pub fn empty_like(other: &Lexicon) -> Self {
        Lexicon::new(other.categories.clone(), Vec::new()).expect("categories already validated")
    }

    fn insert_entry(&mut self, entry: Entry) -> Result<()> {
        if entry.pattern.is_empty() {
            return Err(Error::invalid("empty dictionary pattern"));
        }
        if entry.pattern.contains('*') {
            return Err(Error::invalid(format!(
                "pattern `{}` has an internal wildcard",
                entry.pattern
            )));
        }
        if entry.categories.is_empty() {
            return Err(Error::invalid(format!("entry `{}` has no categories", entry.display_pattern())));
        }
        if let Some(bad) = entry.categories.iter().find(|c| !self.category_pos.contains_key(c)) {
            return Err(Error::invalid(format!(
                "entry `{}` references undeclared category {bad}",
                entry.display_pattern()
            )));
        }
        let index = if entry.is_stem {
            &mut self.stem_index
        } else {
            &mut self.literal_index
        };
        match index.get(&entry.pattern) {
            Some(&pos) => self.entries[pos].categories.extend(entry.categories),
            None => {
                index.insert(entry.pattern.clone(), self.entries.len());
                self.entries.push(entry);
            }
        }
        Ok(())
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    /// Position of a category id in [`Lexicon::categories`].
    pub fn category_position(&self, id: CategoryId) -> Option<usize> {
        self.category_pos.get(&id).copied()
    }

    pub fn category_by_name(&self, name: &str) -> Option<&Category> {
        self.categories.iter().find(|c| c.name == name)
    }

    pub fn category_name(&self, id: CategoryId) -> Option<&str> {
        self.category_position(id).map(|p| self.categories[p].name.as_str())
    }

    pub fn literal_entry(&self, word: &str) -> Option<&Entry> {
        self.literal_index.get(word).map(|&p| &self.entries[p])
    }

    /// Union of the categories of every entry matching `token`.
    pub fn lookup(&self, token: &str) -> BTreeSet<CategoryId> {
        let mut out = BTreeSet::new();
        self.for_each_match(token, |e| out.extend(e.categories.iter().copied()));
        out
    }

    pub fn matches(&self, token: &str) -> bool {
        let mut hit = false;
        self.for_each_match(token, |_| hit = true);
        hit
    }

    fn for_each_match(&self, token: &str, mut f: impl FnMut(&Entry)) {
        if let Some(&p) = self.literal_index.get(token) {
            f(&self.entries[p]);
        }
        if self.stem_index.is_empty() {
            return;
        }
        // every non-empty prefix (on char boundaries), including the whole token
        for (end, ch) in token.char_indices() {
            let prefix = &token[..end + ch.len_utf8()];
            if let Some(&p) = self.stem_index.get(prefix) {
                f(&self.entries[p]);
            }
        }
    }

    /// Per-category counts over a token list.
    pub fn score_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> CategoryScoreVector {
        let mut raw = vec![0u64; self.categories.len()];
        let mut hit = vec![false; self.categories.len()];
        for tok in tokens {
            hit.iter_mut().for_each(|h| *h = false);
            self.for_each_match(tok.as_ref(), |e| {
                for c in &e.categories {
                    hit[self.category_pos[c]] = true;
                }
            });
            for (r, h) in raw.iter_mut().zip(&hit) {
                *r += u64::from(*h);
            }
        }
        CategoryScoreVector {
            category_ids: self.categories.iter().map(|c| c.id).collect(),
            raw_counts: raw,
            total_tokens: tokens.len() as u64,
        }
    }

    /// Parses `.dic` content. LF and CRLF line endings are accepted.
    pub fn parse_dic(text: &str) -> Result<Self> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

        let mut first = None;
        for (no, line) in lines.by_ref() {
            if !line.trim().is_empty() {
                first = Some((no, line));
                break;
            }
        }
        match first {
            Some((_, l)) if l.trim() == "%" => {}
            Some((no, _)) => return Err(Error::parse(no, "expected `%` to open the category header")),
            None => return Err(Error::parse(1, "empty dictionary")),
        }

        let mut categories: Vec<Category> = Vec::new();
        let mut seen_ids = HashMap::new();
        let mut seen_names = HashMap::new();
        let mut closed = false;
        let mut last_line = 1;
        for (no, line) in lines.by_ref() {
            last_line = no;
            let trimmed = line.trim();
            if trimmed == "%" {
                closed = true;
                break;
            }
            if trimmed.is_empty() {
                continue;
            }
            let mut parts = trimmed.splitn(2, |c: char| c == '\t' || c.is_whitespace());
            let id_str = parts.next().unwrap_or_default();
            let name = parts.next().map(str::trim).unwrap_or_default();
            let id: CategoryId = id_str
                .parse()
                .map_err(|_| Error::parse(no, format!("invalid category id `{id_str}`")))?;
            if name.is_empty() {
                return Err(Error::parse(no, format!("category {id} has no name")));
            }
            if let Some(prev) = seen_ids.insert(id, no) {
                return Err(Error::parse(no, format!("duplicate category id {id} (first on line {prev})")));
            }
            if let Some(prev) = seen_names.insert(name.to_string(), no) {
                return Err(Error::parse(no, format!("duplicate category name `{name}` (first on line {prev})")));
            }
            categories.push(Category {
                id,
                name: name.to_string(),
            });
        }
        if !closed {
            return Err(Error::parse(last_line, "category header is not closed by `%`"));
        }

        let mut lex = Lexicon::new(categories, Vec::new())?;
        for (no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = if line.contains('\t') {
                line.split('\t').map(str::trim).filter(|f| !f.is_empty()).collect()
            } else {
                line.split_whitespace().collect()
            };
            let (word, ids) = match fields.split_first() {
                Some((w, ids)) if !ids.is_empty() => (*w, ids),
                _ => return Err(Error::parse(no, "entry has no category ids")),
            };
            let (pattern, is_stem) = match word.strip_suffix('*') {
                Some(p) => (p, true),
                None => (word, false),
            };
            if pattern.is_empty() || pattern.contains('*') {
                return Err(Error::parse(no, format!("invalid pattern `{word}`")));
            }
            let mut cats = BTreeSet::new();
            for s in ids {
                let id: CategoryId = s
                    .parse()
                    .map_err(|_| Error::parse(no, format!("invalid category id `{s}`")))?;
                if !lex.category_pos.contains_key(&id) {
                    return Err(Error::parse(no, format!("entry `{word}` references undeclared category {id}")));
                }
                cats.insert(id);
            }
            lex.insert_entry(Entry {
                pattern: pattern.to_lowercase(),
                is_stem,
                categories: cats,
            })
            .map_err(|e| Error::parse(no, e.to_string()))?;
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_dic(&text)
    }

    /// Canonical `.dic` text: LF endings, tab separators, ids ascending.
    pub fn to_dic(&self) -> String {
        let mut out = String::from("%\n");
        for c in &self.categories {
            let _ = writeln!(out, "{}\t{}", c.id, c.name);
        }
        out.push_str("%\n");
        for e in &self.entries {
            out.push_str(&e.display_pattern());
            for id in &e.categories {
                let _ = write!(out, "\t{id}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_dic())?;
        Ok(())
    }
}

/// Union of `base` and `extension`. The category table of `base` is kept; the
/// extension may only reference categories that `base` declares.
pub fn merge_lexicons(base: &Lexicon, extension: &Lexicon) -> Result<Lexicon> {
    for c in extension.categories() {
        if base.category_position(c.id).is_none() {
            return Err(Error::Merge(format!(
                "extension category {} (`{}`) is not declared in the base lexicon",
                c.id, c.name
            )));
        }
    }
    let mut merged = base.clone();
    for e in extension.entries() {
        merged.insert_entry(e.clone()).map_err(|err| Error::Merge(err.to_string()))?;
    }
    Ok(merged)
}

/// Category counts for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryScoreVector {
    /// Same order as the lexicon's category table.
    pub category_ids: Vec<CategoryId>,
    pub raw_counts: Vec<u64>,
    pub total_tokens: u64,
}

impl CategoryScoreVector {
    pub fn relative_frequency(&self, pos: usize) -> f64 {
        self.raw_counts[pos] as f64 / self.total_tokens.max(1) as f64
    }

    pub fn relative_frequencies(&self) -> Vec<f64> {
        (0..self.raw_counts.len()).map(|i| self.relative_frequency(i)).collect()
    }

    pub fn raw_count_of(&self, id: CategoryId) -> Option<u64> {
        self.category_ids.iter().position(|&c| c == id).map(|p| self.raw_counts[p])
    }
}

/// The small dictionary shipped with the crate for demos and tests.
pub const DEMO_DIC: &str = include_str!("../data/demo.dic");
/// Community-specific additions to [`DEMO_DIC`].
pub const DEMO_EXTENSION_DIC: &str = include_str!("../data/demo_extension.dic");

pub fn demo_lexicon() -> Lexicon {
    Lexicon::parse_dic(DEMO_DIC).expect("bundled demo dictionary parses")
}

pub fn demo_extension() -> Lexicon {
    Lexicon::parse_dic(DEMO_EXTENSION_DIC).expect("bundled demo extension parses")
}
