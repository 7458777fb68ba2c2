mod common;

use std::collections::{BTreeMap, BTreeSet};

use bimg_core::channel::Channel;
use bimg_core::model::{fit, FitOptions};
use bimg_core::select::{significance_table, SignificanceRow};
use bimg_core::synth::{generate, render_trace};
use bimg_core::vocab::TfIdfVector;
use bimg_core::{parse_trace, CodecMode, Document, Label, Vocabulary};
use common::*;

fn doc(id: &str, text: &str) -> Document {
    Document::new(id, text.split_whitespace().map(str::to_owned).collect())
}

fn windows(doc: &Document, n: usize) -> Vec<String> {
    if doc.words.len() < n {
        return Vec::new();
    }
    (0..=doc.words.len() - n)
        .map(|i| doc.words[i..i + n].join(" "))
        .collect()
}

#[test]
fn tfidf_matches_definitions_on_toy_corpus() {
    let corpus = [
        doc("a", "Open Read Read Close"),
        doc("b", "Open Write Close Open Write"),
        doc("c", "Read Read Read Sleep"),
    ];
    let vocab = Vocabulary::fit(&corpus, 1.0, 1..=4).unwrap();
    let n_docs = corpus.len() as f64;
    let mut expected_terms = BTreeSet::new();
    for d in &corpus {
        for n in 1..=4 {
            expected_terms.extend(windows(d, n));
        }
    }
    assert_eq!(
        vocab.entries.keys().cloned().collect::<BTreeSet<_>>(),
        expected_terms
    );

    for d in &corpus {
        let got = vocab.tfidf(d);
        let mut present = BTreeSet::new();
        for term in &expected_terms {
            let n = term.split(' ').count();
            let count = windows(d, n).iter().filter(|w| *w == term).count();
            if count == 0 {
                assert!(!got.contains_key(term));
                continue;
            }
            present.insert(term.clone());
            let df = corpus
                .iter()
                .filter(|o| windows(o, n).contains(term))
                .count() as f64;
            let idf = ((1.0 + n_docs) / (1.0 + df)).ln() + 1.0;
            let want = (1.0 + (count as f64).ln()) * idf;
            assert!(
                (got[term] - want).abs() <= 1e-12,
                "{term}: {} vs {want}",
                got[term]
            );
        }
        assert_eq!(got.keys().cloned().collect::<BTreeSet<_>>(), present);
    }
    // "Read" sits in two of three documents, three times in "c".
    let c = vocab.tfidf(&corpus[2]);
    let want = (1.0 + 3f64.ln()) * ((4.0f64 / 3.0).ln() + 1.0);
    assert!((c["Read"] - want).abs() <= 1e-12);
}

#[test]
fn max_df_drops_ubiquitous_terms() {
    let corpus = [doc("a", "X Y"), doc("b", "X Z"), doc("c", "X W")];
    let vocab = Vocabulary::fit(&corpus, 0.98, 1..=4).unwrap();
    assert!(!vocab.contains("X"));
    assert!(vocab.contains("Y"));
}

/// Significance straight from the definition, absent terms counted as 0.
fn brute_rows(holdout: &[(TfIdfVector, Label)], candidates: &[String]) -> Vec<SignificanceRow> {
    let mut rows: Vec<SignificanceRow> = candidates
        .iter()
        .map(|g| {
            let stats = |label: Label| {
                let xs: Vec<f64> = holdout
                    .iter()
                    .filter(|(_, l)| *l == label)
                    .map(|(v, _)| v.get(g).copied().unwrap_or(0.0))
                    .collect();
                let mu = xs.iter().sum::<f64>() / xs.len() as f64;
                let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64;
                (mu, var.sqrt())
            };
            let (mu1, s1) = stats(Label::Malicious);
            let (mu0, s0) = stats(Label::Clean);
            let diff = (mu1 - mu0).abs();
            let sig = if s1 + s0 == 0.0 {
                if diff > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                diff / (s1 + s0)
            };
            SignificanceRow {
                ngram: g.clone(),
                mean_malicious: mu1,
                mean_clean: mu0,
                std_malicious: s1,
                std_clean: s0,
                significance: sig,
            }
        })
        .collect();
    // Descending score with +inf first; scores agreeing to 12 significant
    // digits count as tied and fall back to the ngram.
    let key = |r: &SignificanceRow| {
        let s = r.significance;
        if s.is_infinite() {
            (2, 0i64, 0i32)
        } else if s == 0.0 {
            (0, 0, 0)
        } else {
            let e = s.log10().floor() as i32;
            let m = (s / 10f64.powi(e) * 1e11).round() as i64;
            (1, m, e)
        }
    };
    rows.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        (kb.0, kb.2, kb.1)
            .cmp(&(ka.0, ka.2, ka.1))
            .then_with(|| a.ngram.cmp(&b.ngram))
    });
    rows
}

fn assert_rows_match(got: &[SignificanceRow], want: &[SignificanceRow]) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert_eq!(g.ngram, w.ngram);
        if w.significance.is_infinite() {
            assert_eq!(g.significance, f64::INFINITY);
        } else {
            assert!((g.significance - w.significance).abs() <= 1e-9 * w.significance.max(1.0));
        }
    }
}

#[test]
fn significance_handles_infinity_and_ties() {
    let v = |pairs: &[(&str, f64)]| -> TfIdfVector {
        pairs.iter().map(|(k, x)| (k.to_string(), *x)).collect()
    };
    let holdout = vec![
        (
            v(&[
                ("inf_b", 1.0),
                ("inf_a", 2.0),
                ("tie_x", 1.0),
                ("tie_w", 1.0),
                ("zero", 1.0),
            ]),
            Label::Malicious,
        ),
        (
            v(&[
                ("inf_b", 1.0),
                ("inf_a", 2.0),
                ("tie_x", 3.0),
                ("tie_w", 3.0),
                ("zero", 1.0),
            ]),
            Label::Malicious,
        ),
        (
            v(&[("tie_x", 1.0), ("tie_w", 1.0), ("zero", 1.0)]),
            Label::Clean,
        ),
        (v(&[("zero", 1.0)]), Label::Clean),
    ];
    let candidates: Vec<String> = ["zero", "tie_x", "inf_b", "tie_w", "inf_a", "never"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut got = significance_table(&holdout, candidates.iter().map(String::as_str)).unwrap();
    got.sort_by(bimg_core::select::compare_rows);
    let want = brute_rows(&holdout, &candidates);
    assert_rows_match(&got, &want);
    let order: Vec<&str> = got.iter().map(|r| r.ngram.as_str()).collect();
    assert_eq!(order, ["inf_a", "inf_b", "tie_w", "tie_x", "never", "zero"]);
}

#[test]
fn fitted_ranking_matches_brute_force_and_finds_planted_motifs() {
    // One shared cycle, so only the planted motifs separate the classes.
    let mut spec = two_class_spec(11, 60);
    spec.classes[1].cycle_seed = spec.classes[0].cycle_seed;
    let corpus = generate(&spec).unwrap();
    let docs = corpus.documents();
    let options = FitOptions {
        side: 64,
        mode: CodecMode::Strict,
        holdout_fraction: 0.5,
        ..Default::default()
    };
    let report = fit(&docs, &corpus.labels(), &options).unwrap();
    let model = &report.model;
    let labels = corpus.labels();
    let holdout: Vec<(TfIdfVector, Label)> = docs
        .iter()
        .filter(|d| model.is_holdout(&d.source_id))
        .map(|d| (model.vocabulary.tfidf(d), labels[&d.source_id]))
        .collect();
    assert_eq!(holdout.len(), model.holdout_ids.len());

    let planted = &corpus.planted["mal"];
    for channel in Channel::ALL {
        let candidates: Vec<String> = channel
            .orders()
            .iter()
            .flat_map(|&n| model.vocabulary.tokens_of_order(n))
            .map(str::to_owned)
            .collect();
        let want = brute_rows(&holdout, &candidates);
        let got = &report.ranking[&channel];
        assert_rows_match(got, &want[..got.len()]);
        assert!(
            planted.contains(&got[0].ngram),
            "{channel}: top {}",
            got[0].ngram
        );
    }
}

#[test]
fn long_trace_parses_in_file_order() {
    let words: Vec<String> = (0..40_000)
        .map(|i| format!("Api{:03}", (i * 7919) % 613))
        .collect();
    let doc = Document::new("long", words.clone());
    let text = render_trace(&doc, 9);
    let parsed = parse_trace(&text, "long").unwrap();
    assert_eq!(parsed.document.words, words);
    assert_eq!(parsed.skipped, 2);
}

#[test]
fn labels_round_trip_through_tsv() {
    let corpus = generate(&two_class_spec(1, 3)).unwrap();
    let parsed: BTreeMap<String, Label> = corpus
        .labels_tsv()
        .lines()
        .filter_map(|l| {
            let (id, lab) = l.split_once('\t')?;
            Label::from_digit(lab.parse().ok()?).map(|lab| (id.to_owned(), lab))
        })
        .collect();
    assert_eq!(
        parsed,
        labels_of(
            &corpus
                .docs
                .iter()
                .map(|d| (d.document.clone(), d.label))
                .collect::<Vec<_>>()
        )
    );
}

#[test]
fn ranking_order_is_scale_invariant() {
    let corpus = generate(&bimg_core::synth::SyntheticSpec::planted(2, 30)).unwrap();
    let docs = corpus.documents();
    let labels = corpus.labels();
    let vocab = Vocabulary::fit(&docs, 0.98, 1..=4).unwrap();
    let holdout: Vec<(TfIdfVector, Label)> = docs
        .iter()
        .map(|d| (vocab.tfidf(d), labels[&d.source_id]))
        .collect();
    let base = bimg_core::select::rank_channel_ngrams(&holdout, &vocab, Channel::Blue).unwrap();
    // Power-of-two factors scale every float exactly.
    for k in [0.25, 2.0, 1024.0] {
        let scaled: Vec<(TfIdfVector, Label)> = holdout
            .iter()
            .map(|(v, l)| (v.iter().map(|(g, x)| (g.clone(), x * k)).collect(), *l))
            .collect();
        let rows = bimg_core::select::rank_channel_ngrams(&scaled, &vocab, Channel::Blue).unwrap();
        let a: Vec<&str> = base.iter().map(|r| r.ngram.as_str()).collect();
        let b: Vec<&str> = rows.iter().map(|r| r.ngram.as_str()).collect();
        assert_eq!(a, b, "k = {k}");
    }
}
