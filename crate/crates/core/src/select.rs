//! Holdout-based ngram ranking and frequency-plane placement.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::channel::{ngram_order, Channel};
use crate::codec::CodecMode;
use crate::error::{Error, Result};
use crate::vocab::{TfIdfVector, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Clean,
    Malicious,
}

impl Label {
    pub fn from_digit(d: u8) -> Option<Label> {
        match d {
            0 => Some(Label::Clean),
            1 => Some(Label::Malicious),
            _ => None,
        }
    }

    pub fn digit(self) -> u8 {
        match self {
            Label::Clean => 0,
            Label::Malicious => 1,
        }
    }
}

/// Class-separation score: `|mu1 - mu0| / (sigma1 + sigma0)`.
///
/// With zero spread the score is infinite for distinct means and zero
/// otherwise.
pub fn significance(mu1: f64, mu0: f64, sigma1: f64, sigma0: f64) -> f64 {
    let gap = (mu1 - mu0).abs();
    let spread = sigma1 + sigma0;
    if spread > 0.0 {
        gap / spread
    } else if gap > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceRow {
    pub ngram: String,
    pub mean_malicious: f64,
    pub mean_clean: f64,
    pub std_malicious: f64,
    pub std_clean: f64,
    pub significance: f64,
}

#[derive(Default)]
struct Moments {
    sum: f64,
    values: Vec<f64>,
}

impl Moments {
    /// Population mean and deviation over `total` samples, zeros implied.
    fn finish(&self, total: usize) -> (f64, f64) {
        if total == 0 {
            return (0.0, 0.0);
        }
        let mean = self.sum / total as f64;
        let absent = (total - self.values.len()) as f64;
        let sq: f64 = self
            .values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            + absent * mean * mean;
        (mean, (sq / total as f64).sqrt())
    }
}

/// Significance rounded to 12 significant digits. Ngrams whose scores are
/// equal in exact arithmetic can differ in the last ulp depending on how the
/// moments were summed; ranking on the rounded key keeps them tied so the
/// lexicographic tie-break applies.
pub fn rank_key(significance: f64) -> f64 {
    if !significance.is_finite() || significance == 0.0 {
        return significance;
    }
    format!("{significance:.11e}")
        .parse()
        .unwrap_or(significance)
}

/// Orders by significance descending, infinities first, then ngram ascending.
pub fn compare_rows(a: &SignificanceRow, b: &SignificanceRow) -> Ordering {
    rank_key(b.significance)
        .total_cmp(&rank_key(a.significance))
        .then_with(|| a.ngram.cmp(&b.ngram))
}

/// Computes the significance of every `candidate` ngram over a labeled holdout.
pub fn significance_table<'a>(
    holdout: &[(TfIdfVector, Label)],
    candidates: impl IntoIterator<Item = &'a str>,
) -> Result<Vec<SignificanceRow>> {
    let malicious = holdout
        .iter()
        .filter(|(_, l)| *l == Label::Malicious)
        .count();
    let clean = holdout.len() - malicious;
    if malicious == 0 || clean == 0 {
        return Err(Error::SingleClassHoldout { clean, malicious });
    }

    let candidates: Vec<&str> = candidates.into_iter().collect();
    let wanted: HashSet<&str> = candidates.iter().copied().collect();
    let mut acc: HashMap<&str, [Moments; 2]> = HashMap::new();
    for (vector, label) in holdout {
        for (token, &value) in vector {
            if let Some(&key) = wanted.get(token.as_str()) {
                let slot = &mut acc.entry(key).or_default()[label.digit() as usize];
                slot.sum += value;
                slot.values.push(value);
            }
        }
    }

    let empty: [Moments; 2] = Default::default();
    let rows = candidates
        .into_iter()
        .map(|token| {
            let m = acc.get(token).unwrap_or(&empty);
            let (mu0, s0) = m[0].finish(clean);
            let (mu1, s1) = m[1].finish(malicious);
            SignificanceRow {
                ngram: token.to_owned(),
                mean_malicious: mu1,
                mean_clean: mu0,
                std_malicious: s1,
                std_clean: s0,
                significance: significance(mu1, mu0, s1, s0),
            }
        })
        .collect();
    Ok(rows)
}

/// Ranks the vocabulary ngrams pooled into `channel` by holdout significance.
pub fn rank_channel_ngrams(
    holdout: &[(TfIdfVector, Label)],
    vocab: &Vocabulary,
    channel: Channel,
) -> Result<Vec<SignificanceRow>> {
    let candidates = channel
        .orders()
        .iter()
        .flat_map(|&n| vocab.tokens_of_order(n));
    let rows = significance_table(holdout, candidates)?;
    let mut keyed: Vec<(f64, SignificanceRow)> = rows
        .into_iter()
        .map(|r| (rank_key(r.significance), r))
        .collect();
    keyed.sort_by(|(ka, a), (kb, b)| kb.total_cmp(ka).then_with(|| a.ngram.cmp(&b.ngram)));
    let rows = keyed.into_iter().map(|(_, r)| r).collect();
    Ok(rows)
}

/// Frequency-plane coordinate, row `h` and column `w` from the top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Coord {
    pub h: usize,
    pub w: usize,
}

impl Coord {
    pub const DC: Coord = Coord { h: 0, w: 0 };

    pub fn new(h: usize, w: usize) -> Self {
        Coord { h, w }
    }

    /// Coordinate holding the complex conjugate in a real image's spectrum.
    pub fn mirror(self, n: usize) -> Coord {
        Coord {
            h: (n - self.h) % n,
            w: (n - self.w) % n,
        }
    }
}

/// Outer-to-inner L-shaped traversal of the `n`x`n` grid, DC excluded.
///
/// Shell `s` runs along row `s` left to right, then up column `s`.
pub fn shell_order(n: usize) -> Vec<Coord> {
    let mut out = Vec::with_capacity((n * n).saturating_sub(1));
    for s in (1..n).rev() {
        out.extend((0..=s).map(|w| Coord::new(s, w)));
        out.extend((0..s).rev().map(|h| Coord::new(h, s)));
    }
    out
}

/// Assignable coordinates for a codec mode, in assignment order.
///
/// `strict` images are real, so their spectra are conjugate-symmetric: only
/// the first coordinate of each mirror pair (in shell order) is usable and
/// self-mirrored coordinates cannot hold an arbitrary phase.
pub fn slot_order(n: usize, mode: CodecMode) -> Vec<Coord> {
    let shells = shell_order(n);
    match mode {
        CodecMode::Paper => shells,
        CodecMode::Strict => {
            let mut taken = HashSet::new();
            shells
                .into_iter()
                .filter(|&c| {
                    let m = c.mirror(n);
                    if m == c || taken.contains(&m) {
                        return false;
                    }
                    taken.insert(c);
                    true
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub ngram: String,
    pub h: usize,
    pub w: usize,
}

impl Assignment {
    pub fn coord(&self) -> Coord {
        Coord::new(self.h, self.w)
    }
}

/// Per-channel placement of ranked ngrams onto frequency coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMap {
    pub side: usize,
    pub channels: BTreeMap<Channel, Vec<Assignment>>,
}

impl ChannelMap {
    /// Places the i-th ranked ngram of each channel on the i-th slot.
    /// Ngrams beyond the slot capacity are dropped.
    pub fn build(
        ranked: &BTreeMap<Channel, Vec<String>>,
        side: usize,
        mode: CodecMode,
    ) -> Result<ChannelMap> {
        let slots = slot_order(side, mode);
        let mut channels = BTreeMap::new();
        for channel in Channel::ALL {
            let list = ranked.get(&channel).map(Vec::as_slice).unwrap_or(&[]);
            let mut seen = HashSet::new();
            let mut assignments = Vec::with_capacity(list.len().min(slots.len()));
            for (ngram, coord) in list.iter().zip(&slots) {
                if !seen.insert(ngram.as_str()) {
                    return Err(Error::ChannelMap(format!(
                        "ngram `{ngram}` ranked twice in the {channel} channel"
                    )));
                }
                if !channel.orders().contains(&ngram_order(ngram)) {
                    return Err(Error::ChannelMap(format!(
                        "ngram `{ngram}` does not belong to the {channel} channel"
                    )));
                }
                assignments.push(Assignment {
                    ngram: ngram.clone(),
                    h: coord.h,
                    w: coord.w,
                });
            }
            channels.insert(channel, assignments);
        }
        Ok(ChannelMap { side, channels })
    }

    pub fn assignments(&self, channel: Channel) -> &[Assignment] {
        self.channels
            .get(&channel)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn total_assignments(&self) -> usize {
        self.channels.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_assignments() == 0
    }

    /// Structural checks: unique ngrams and coordinates, DC never used,
    /// coordinates inside the grid, ngram orders matching their channel.
    pub fn validate(&self) -> Result<()> {
        if self.side == 0 {
            return Err(Error::ChannelMap("image side is zero".into()));
        }
        for (channel, list) in &self.channels {
            let mut ngrams = HashSet::new();
            let mut coords = HashSet::new();
            for a in list {
                let c = a.coord();
                if c == Coord::DC {
                    return Err(Error::ChannelMap(format!(
                        "{channel}: DC coordinate assigned"
                    )));
                }
                if c.h >= self.side || c.w >= self.side {
                    return Err(Error::ChannelMap(format!(
                        "{channel}: coordinate ({}, {}) outside {}x{}",
                        c.h, c.w, self.side, self.side
                    )));
                }
                if !coords.insert(c) {
                    return Err(Error::ChannelMap(format!(
                        "{channel}: coordinate ({}, {}) assigned twice",
                        c.h, c.w
                    )));
                }
                if !ngrams.insert(a.ngram.as_str()) {
                    return Err(Error::ChannelMap(format!(
                        "{channel}: ngram `{}` assigned twice",
                        a.ngram
                    )));
                }
                if !channel.orders().contains(&ngram_order(&a.ngram)) {
                    return Err(Error::ChannelMap(format!(
                        "{channel}: ngram `{}` has the wrong order",
                        a.ngram
                    )));
                }
            }
        }
        Ok(())
    }
}
