#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use bimg_core::channel::Channel;
use bimg_core::{CodecModel, Document};

pub fn bimg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bimg"))
        .args(args)
        .env_remove("BIMG_MANIFEST")
        .env_remove("BIMG_JOBS")
        .output()
        .expect("spawn bimg")
}

/// Runs `bimg` and returns stdout, panicking with stderr on failure.
pub fn bimg_ok(args: &[&str]) -> String {
    let out = bimg(args);
    assert!(
        out.status.success(),
        "bimg {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Ranks with ties replaced by their average rank.
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
        for &k in &idx[i..=j] {
            ranks[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 && vy == 0.0 {
        return 1.0;
    }
    cov / (vx * vy).sqrt()
}

/// Mapped ngrams of `channel` present in `doc`, in first-occurrence order;
/// within a pooled channel the lower order wins ties on start position.
pub fn true_order(model: &CodecModel, doc: &Document, channel: Channel) -> Vec<String> {
    let mapped: std::collections::HashSet<&str> = model
        .channel_map
        .assignments(channel)
        .iter()
        .map(|a| a.ngram.as_str())
        .collect();
    let mut firsts: Vec<(usize, usize, String)> = Vec::new();
    for (prec, &n) in channel.orders().iter().enumerate() {
        let mut seen = std::collections::HashSet::new();
        let mut k = 0;
        for w in doc.words.windows(n) {
            let g = w.join(" ");
            if mapped.contains(g.as_str()) && seen.insert(g.clone()) {
                firsts.push((k, prec, g));
                k += 1;
            }
        }
    }
    firsts.sort();
    firsts.into_iter().map(|(_, _, g)| g).collect()
}

/// tf-idf of one ngram from the definitions.
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
