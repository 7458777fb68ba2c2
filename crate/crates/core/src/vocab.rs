//! Ngram vocabulary with smoothed idf and sublinear, unnormalized tf-idf.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::Document;

pub const DEFAULT_MAX_DF_RATIO: f64 = 0.98;
pub const MAX_NGRAM: usize = 4;

/// Occurrence statistics of one ngram inside a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramStat {
    pub token: String,
    /// Index of the first word of the first occurrence.
    pub first: usize,
    pub count: usize,
}

/// Sliding-window ngram statistics, ordered by first occurrence.
pub fn ngram_stats(words: &[String], n: usize) -> Vec<NgramStat> {
    assert!(n >= 1, "ngram order must be at least 1");
    if words.len() < n {
        return Vec::new();
    }
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut stats: Vec<NgramStat> = Vec::new();
    for (start, window) in words.windows(n).enumerate() {
        let token = window.join(" ");
        match index.get(&token) {
            Some(&i) => stats[i].count += 1,
            None => {
                index.insert(token.clone(), stats.len());
                stats.push(NgramStat {
                    token,
                    first: start,
                    count: 1,
                });
            }
        }
    }
    stats
}

/// `(ngram, count)` pairs of a document in first-occurrence order.
pub fn extract_ngrams(doc: &Document, n: usize) -> Vec<(String, usize)> {
    ngram_stats(&doc.words, n)
        .into_iter()
        .map(|s| (s.token, s.count))
        .collect()
}

pub fn smoothed_idf(corpus_size: usize, df: usize) -> f64 {
    ((1.0 + corpus_size as f64) / (1.0 + df as f64)).ln() + 1.0
}

pub fn sublinear_tf(count: usize) -> f64 {
    debug_assert!(count >= 1);
    1.0 + (count as f64).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub n: usize,
    pub df: usize,
    pub idf: f64,
}

/// Frozen ngram table fitted on a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub corpus_size: usize,
    pub max_df_ratio: f64,
    pub min_n: usize,
    pub max_n: usize,
    pub entries: BTreeMap<String, VocabEntry>,
}

/// Sparse tf-idf weights keyed by ngram token.
pub type TfIdfVector = BTreeMap<String, f64>;

impl Vocabulary {
    /// Counts document frequencies over `corpus` and keeps every ngram whose
    /// document ratio does not exceed `max_df_ratio`.
    pub fn fit(
        corpus: &[Document],
        max_df_ratio: f64,
        n_range: RangeInclusive<usize>,
    ) -> Result<Vocabulary> {
        if corpus.is_empty() {
            return Err(Error::Fit("corpus is empty".into()));
        }
        if !(max_df_ratio > 0.0 && max_df_ratio <= 1.0) {
            return Err(Error::Fit(format!(
                "max_df_ratio must lie in (0, 1], got {max_df_ratio}"
            )));
        }
        let (min_n, max_n) = (*n_range.start(), *n_range.end());
        if min_n == 0 || max_n > MAX_NGRAM || min_n > max_n {
            return Err(Error::Fit(format!(
                "ngram range {min_n}..={max_n} is outside 1..={MAX_NGRAM}"
            )));
        }

        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in corpus {
            let mut seen = BTreeSet::new();
            for n in min_n..=max_n {
                if doc.words.len() < n {
                    continue;
                }
                for window in doc.words.windows(n) {
                    seen.insert(window.join(" "));
                }
            }
            for token in seen {
                *df.entry(token).or_default() += 1;
            }
        }

        let corpus_size = corpus.len();
        let max_docs = max_df_ratio * corpus_size as f64;
        let entries = df
            .into_iter()
            .filter(|&(_, d)| d as f64 <= max_docs)
            .map(|(token, d)| {
                let n = crate::channel::ngram_order(&token);
                let entry = VocabEntry {
                    n,
                    df: d,
                    idf: smoothed_idf(corpus_size, d),
                };
                (token, entry)
            })
            .collect();

        Ok(Vocabulary {
            corpus_size,
            max_df_ratio,
            min_n,
            max_n,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&VocabEntry> {
        self.entries.get(token)
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.entries.get(token).map(|e| e.idf)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    /// Ngrams of the given order, in lexicographic order.
    pub fn tokens_of_order(&self, n: usize) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(move |(_, e)| e.n == n)
            .map(|(t, _)| t.as_str())
    }

    /// Sublinear tf-idf of every vocabulary ngram present in `doc`.
    pub fn tfidf(&self, doc: &Document) -> TfIdfVector {
        let mut out = TfIdfVector::new();
        for n in self.min_n..=self.max_n {
            for stat in ngram_stats(&doc.words, n) {
                if let Some(entry) = self.entries.get(&stat.token) {
                    out.insert(stat.token, sublinear_tf(stat.count) * entry.idf);
                }
            }
        }
        out
    }

    /// Checks the stored idf column against the smoothing formula.
    pub fn validate(&self) -> Result<()> {
        if self.corpus_size == 0 {
            return Err(Error::Manifest("vocabulary corpus size is zero".into()));
        }
        for (token, e) in &self.entries {
            if e.df == 0 || e.df > self.corpus_size {
                return Err(Error::Manifest(format!("ngram `{token}` has df {}", e.df)));
            }
            if e.n != crate::channel::ngram_order(token) || e.n < self.min_n || e.n > self.max_n {
                return Err(Error::Manifest(format!(
                    "ngram `{token}` has order {}",
                    e.n
                )));
            }
            let expected = smoothed_idf(self.corpus_size, e.df);
            if (expected - e.idf).abs() > 1e-12 {
                return Err(Error::Manifest(format!(
                    "ngram `{token}` idf {} does not match df {}",
                    e.idf, e.df
                )));
            }
        }
        Ok(())
    }
}
