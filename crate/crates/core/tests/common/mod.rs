#![allow(dead_code)]

use std::collections::BTreeMap;

use bimg_core::channel::Channel;
use bimg_core::synth::{ClassProfile, SyntheticSpec};
use bimg_core::{CodecModel, Document, Label};

/// Ranks with ties replaced by their average rank (1-based).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 && vy == 0.0 {
        return 1.0;
    }
    cov / (vx * vy).sqrt()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Mapped ngrams of `channel` present in `doc`, in first-occurrence order,
/// found by scanning windows directly. Pooled orders merge by per-order
/// rank with the lower order first.
pub fn true_order(model: &CodecModel, doc: &Document, channel: Channel) -> Vec<String> {
    let mapped: Vec<&str> = model
        .channel_map
        .assignments(channel)
        .iter()
        .map(|a| a.ngram.as_str())
        .collect();
    let mut merged = Vec::new();
    for (prec, &n) in channel.orders().iter().enumerate() {
        let mut seen: Vec<String> = Vec::new();
        if doc.words.len() >= n {
            for start in 0..=doc.words.len() - n {
                let g = doc.words[start..start + n].join(" ");
                if mapped.contains(&g.as_str()) && !seen.contains(&g) {
                    seen.push(g);
                }
            }
        }
        merged.extend(seen.into_iter().enumerate().map(|(i, g)| (i, prec, g)));
    }
    merged.sort();
    merged.into_iter().map(|(_, _, g)| g).collect()
}

/// tf-idf from the definitions: count windows, `(1 + ln c) * idf`.
pub fn true_tfidf(model: &CodecModel, doc: &Document, ngram: &str) -> f64 {
    let n = ngram.split(' ').count();
    let count = doc
        .words
        .windows(n)
        .filter(|w| w.join(" ") == ngram)
        .count();
    let df = model.vocabulary.entries[ngram].df as f64;
    let idf = ((1.0 + model.vocabulary.corpus_size as f64) / (1.0 + df)).ln() + 1.0;
    (1.0 + (count as f64).ln()) * idf
}

pub fn two_class_spec(seed: u64, docs_per_class: usize) -> SyntheticSpec {
    let mut clean = ClassProfile::new("clean", Some(Label::Clean), docs_per_class);
    clean.cycle_len = 30;
    clean.cycle_seed = 1;
    clean.mutation_rate = 0.3;
    clean.branching = 5;
    let mut mal = ClassProfile::new("mal", Some(Label::Malicious), docs_per_class);
    mal.cycle_len = 30;
    mal.cycle_seed = 2;
    mal.mutation_rate = 0.3;
    mal.branching = 5;
    mal.motifs = 2;
    mal.motif_len = 4;
    mal.motif_repeats = (1, 4);
    SyntheticSpec {
        seed,
        alphabet_size: 50,
        min_length: 100,
        max_length: 240,
        classes: vec![clean, mal],
    }
}

pub fn labels_of(docs: &[(Document, Option<Label>)]) -> BTreeMap<String, Label> {
    docs.iter()
        .filter_map(|(d, l)| l.map(|l| (d.source_id.clone(), l)))
        .collect()
}

/// Model that maps every vocabulary ngram, lexicographically, up to capacity.
pub fn map_all_model(corpus: &[Document], side: usize, mode: bimg_core::CodecMode) -> CodecModel {
    use bimg_core::codec::{DcPolicy, DEFAULT_EPSILON};
    use bimg_core::model::FORMAT_VERSION;
    use bimg_core::phash::HashConfig;
    use bimg_core::select::ChannelMap;
    use bimg_core::Vocabulary;

    let vocabulary = Vocabulary::fit(corpus, 1.0, 1..=4).unwrap();
    let ranked: BTreeMap<Channel, Vec<String>> = Channel::ALL
        .into_iter()
        .map(|ch| {
            let list = ch
                .orders()
                .iter()
                .flat_map(|&n| vocabulary.tokens_of_order(n))
                .map(str::to_owned)
                .collect();
            (ch, list)
        })
        .collect();
    let channel_map = ChannelMap::build(&ranked, side, mode).unwrap();
    let model = CodecModel {
        format_version: FORMAT_VERSION,
        side,
        mode,
        epsilon: DEFAULT_EPSILON,
        dc_policy: DcPolicy::MaxAssigned,
        vocabulary,
        channel_map,
        holdout_ids: Vec::new(),
        hash: HashConfig::default(),
    };
    model.validate().unwrap();
    model
}

pub struct RoundTrip {
    pub exact_docs: usize,
    pub docs: usize,
    pub rhos: Vec<f64>,
    pub max_k: usize,
    pub max_dynamic_range: f64,
}

impl RoundTrip {
    pub fn mean_rho(&self) -> f64 {
        self.rhos.iter().sum::<f64>() / self.rhos.len().max(1) as f64
    }
}

/// Encodes and decodes every document, comparing against the ground truth
/// derived straight from the word sequence.
pub fn measure_round_trip(model: &CodecModel, docs: &[Document]) -> RoundTrip {
    let mut out = RoundTrip {
        exact_docs: 0,
        docs: docs.len(),
        rhos: Vec::new(),
        max_k: 0,
        max_dynamic_range: 1.0,
    };
    for doc in docs {
        let image = bimg_core::encode(doc, model).unwrap();
        let decoded = bimg_core::decode(&image, model).unwrap();
        let mut exact = true;
        for (channel, dc) in Channel::ALL.iter().zip(&decoded) {
            let truth = true_order(model, doc, *channel);
            out.max_k = out.max_k.max(truth.len());
            let got: Vec<&str> = dc.order();
            if got != truth {
                exact = false;
                continue;
            }
            if truth.len() < 2 {
                continue;
            }
            let values: Vec<f64> = truth.iter().map(|g| true_tfidf(model, doc, g)).collect();
            let max = values.iter().cloned().fold(0.0, f64::max);
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            out.max_dynamic_range = out.max_dynamic_range.max(max / min);
            let truth_rel: Vec<f64> = values.iter().map(|v| v / max).collect();
            let decoded_rel: Vec<f64> = dc.ngrams.iter().map(|n| n.relative_tfidf).collect();
            out.rhos.push(spearman(&decoded_rel, &truth_rel));
        }
        if exact {
            out.exact_docs += 1;
        }
    }
    out
}
