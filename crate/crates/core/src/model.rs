//! Codec model: everything needed to encode and decode, persisted as a
//! versioned JSON manifest with sorted keys.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::codec::{CodecMode, DcPolicy, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::phash::HashConfig;
use crate::select::{rank_channel_ngrams, slot_order, ChannelMap, Label, SignificanceRow};
use crate::trace::Document;
use crate::vocab::{Vocabulary, DEFAULT_MAX_DF_RATIO, MAX_NGRAM};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_SIDE: usize = 64;
pub const HOLDOUT_CAP_PER_CLASS: usize = 250;
pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecModel {
    pub format_version: u32,
    pub side: usize,
    pub mode: CodecMode,
    pub epsilon: f64,
    pub dc_policy: DcPolicy,
    pub vocabulary: Vocabulary,
    pub channel_map: ChannelMap,
    /// Source ids used for significance ranking, sorted.
    pub holdout_ids: Vec<String>,
    pub hash: HashConfig,
}

impl CodecModel {
    pub fn to_manifest(&self) -> Result<String> {
        // Going through `Value` sorts every object's keys.
        let value = serde_json::to_value(self)?;
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_manifest(text: &str) -> Result<CodecModel> {
        let model: CodecModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_manifest()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CodecModel> {
        Self::from_manifest(&std::fs::read_to_string(path)?)
    }

    pub fn is_holdout(&self, source_id: &str) -> bool {
        self.holdout_ids
            .binary_search_by(|id| id.as_str().cmp(source_id))
            .is_ok()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.side < 2 {
            return Err(Error::Manifest(format!(
                "image side {} is below 2",
                self.side
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(Error::Manifest(format!(
                "epsilon {} outside [0, 1)",
                self.epsilon
            )));
        }
        if let DcPolicy::Fixed(v) = self.dc_policy {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Manifest(format!("fixed DC amplitude {v}")));
            }
        }
        if self.channel_map.side != self.side {
            return Err(Error::Manifest(format!(
                "channel map side {} differs from image side {}",
                self.channel_map.side, self.side
            )));
        }
        self.vocabulary.validate()?;
        self.channel_map.validate()?;

        let slots = slot_order(self.side, self.mode);
        for channel in Channel::ALL {
            for (i, a) in self.channel_map.assignments(channel).iter().enumerate() {
                if !self.vocabulary.contains(&a.ngram) {
                    return Err(Error::Manifest(format!(
                        "{channel} ngram `{}` is not in the vocabulary",
                        a.ngram
                    )));
                }
                if slots.get(i) != Some(&a.coord()) {
                    return Err(Error::Manifest(format!(
                        "{channel} assignment {i} is not at slot {i} of the {} layout",
                        self.mode
                    )));
                }
            }
        }
        if self.holdout_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Manifest(
                "holdout ids must be sorted and unique".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub side: usize,
    pub mode: CodecMode,
    pub epsilon: f64,
    pub dc_policy: DcPolicy,
    pub max_df_ratio: f64,
    /// Share of the smaller labeled class drawn into the holdout, per class.
    pub holdout_fraction: f64,
    pub holdout_cap: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            side: DEFAULT_SIDE,
            mode: CodecMode::default(),
            epsilon: DEFAULT_EPSILON,
            dc_policy: DcPolicy::default(),
            max_df_ratio: DEFAULT_MAX_DF_RATIO,
            holdout_fraction: DEFAULT_HOLDOUT_FRACTION,
            holdout_cap: HOLDOUT_CAP_PER_CLASS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: CodecModel,
    /// Significance rows of the mapped ngrams, in rank order.
    pub ranking: BTreeMap<Channel, Vec<SignificanceRow>>,
}

/// Draws a balanced holdout of labeled ids.
///
/// Each class contributes `min(cap, max(1, round(fraction * smaller_class)))`
/// ids, chosen by a seeded shuffle of the sorted ids.
pub fn draw_holdout(
    labels: &BTreeMap<String, Label>,
    fraction: f64,
    cap: usize,
    seed: u64,
) -> Result<BTreeSet<String>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Fit(format!(
            "holdout fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let class_ids = |label: Label| -> Vec<&String> {
        labels
            .iter()
            .filter(|(_, l)| **l == label)
            .map(|(id, _)| id)
            .collect()
    };
    let clean = class_ids(Label::Clean);
    let malicious = class_ids(Label::Malicious);
    if clean.is_empty() || malicious.is_empty() {
        return Err(Error::SingleClassHoldout {
            clean: clean.len(),
            malicious: malicious.len(),
        });
    }
    let smaller = clean.len().min(malicious.len());
    let per_class = ((fraction * smaller as f64).round() as usize).clamp(1, cap.max(1));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeSet::new();
    for mut ids in [clean, malicious] {
        ids.shuffle(&mut rng);
        out.extend(ids.into_iter().take(per_class).cloned());
    }
    Ok(out)
}

/// Fits the vocabulary on the whole corpus, ranks ngrams on a labeled
/// holdout and lays the ranking out on the frequency plane.
pub fn fit(
    corpus: &[Document],
    labels: &BTreeMap<String, Label>,
    options: &FitOptions,
) -> Result<FitReport> {
    if corpus.is_empty() {
        return Err(Error::Fit("corpus is empty".into()));
    }
    if options.side < 2 {
        return Err(Error::Fit(format!(
            "image side {} is below 2",
            options.side
        )));
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = corpus.iter().find(|d| !seen.insert(d.source_id.as_str())) {
        return Err(Error::Fit(format!(
            "duplicate source id `{}`",
            dup.source_id
        )));
    }
    let labeled: BTreeMap<String, Label> = labels
        .iter()
        .filter(|(id, _)| seen.contains(id.as_str()))
        .map(|(id, l)| (id.clone(), *l))
        .collect();

    let vocabulary = Vocabulary::fit(corpus, options.max_df_ratio, 1..=MAX_NGRAM)?;
    let holdout_ids = draw_holdout(
        &labeled,
        options.holdout_fraction,
        options.holdout_cap,
        options.seed,
    )?;
    let holdout: Vec<_> = corpus
        .iter()
        .filter(|d| holdout_ids.contains(&d.source_id))
        .map(|d| (vocabulary.tfidf(d), labeled[&d.source_id]))
        .collect();

    let capacity = slot_order(options.side, options.mode).len();
    let mut ranked = BTreeMap::new();
    let mut ranking = BTreeMap::new();
    for channel in Channel::ALL {
        let mut rows = rank_channel_ngrams(&holdout, &vocabulary, channel)?;
        rows.truncate(capacity);
        ranked.insert(
            channel,
            rows.iter().map(|r| r.ngram.clone()).collect::<Vec<_>>(),
        );
        ranking.insert(channel, rows);
    }
    let channel_map = ChannelMap::build(&ranked, options.side, options.mode)?;

    let model = CodecModel {
        format_version: FORMAT_VERSION,
        side: options.side,
        mode: options.mode,
        epsilon: options.epsilon,
        dc_policy: options.dc_policy,
        vocabulary,
        channel_map,
        holdout_ids: holdout_ids.into_iter().collect(),
        hash: HashConfig::default(),
    };
    model.validate()?;
    Ok(FitReport { model, ranking })
}
