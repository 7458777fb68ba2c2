//! Seeded synthetic trace corpora with known ground truth.
//!
//! Each class walks its own Markov chain over a shared API alphabet. The
//! chain has a main cycle (the class's usual call loop) that is followed
//! with probability `1 - mutation_rate`; otherwise the walk jumps to one of
//! a few weighted alternative successors. Classes may also emit planted
//! motifs built from API names no other class uses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::select::Label;
use crate::trace::Document;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub alphabet_size: usize,
    /// Inclusive bounds of the number of cycle-walk events per trace.
    pub min_length: usize,
    pub max_length: usize,
    pub classes: Vec<ClassProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub name: String,
    /// `None` for unlabeled (grayware-like) documents.
    pub label: Option<Label>,
    pub docs: usize,
    pub cycle_len: usize,
    /// Classes with equal seed and length share the same main cycle.
    pub cycle_seed: u64,
    /// Where walks enter the cycle, as a fraction of its length.
    #[serde(default)]
    pub entry: f64,
    pub mutation_rate: f64,
    /// Alternative successors per API.
    pub branching: usize,
    #[serde(default)]
    pub motifs: usize,
    #[serde(default)]
    pub motif_len: usize,
    #[serde(default)]
    pub motif_repeats: (usize, usize),
}

impl ClassProfile {
    pub fn new(name: &str, label: Option<Label>, docs: usize) -> Self {
        ClassProfile {
            name: name.to_owned(),
            label,
            docs,
            cycle_len: 16,
            cycle_seed: 0,
            entry: 0.0,
            mutation_rate: 0.1,
            branching: 4,
            motifs: 0,
            motif_len: 4,
            motif_repeats: (1, 3),
        }
    }
}

impl SyntheticSpec {
    /// Clean and malicious classes on distinct call loops, the malicious one
    /// also carrying two planted motifs.
    pub fn two_class(seed: u64, docs_per_class: usize) -> Self {
        let mut clean = ClassProfile::new("clean", Some(Label::Clean), docs_per_class);
        clean.cycle_len = 30;
        clean.cycle_seed = 1;
        clean.mutation_rate = 0.005;
        clean.branching = 5;
        let mut mal = clean.clone();
        mal.name = "mal".into();
        mal.label = Some(Label::Malicious);
        mal.cycle_seed = 2;
        mal.motifs = 2;
        mal.motif_repeats = (1, 4);
        SyntheticSpec {
            seed,
            alphabet_size: 50,
            min_length: 100,
            max_length: 240,
            classes: vec![clean, mal],
        }
    }

    /// Like [`SyntheticSpec::two_class`] but both classes share one loop,
    /// so the planted motifs are the only discriminative ngrams.
    pub fn planted(seed: u64, docs_per_class: usize) -> Self {
        let mut spec = SyntheticSpec::two_class(seed, docs_per_class);
        spec.classes[1].cycle_seed = spec.classes[0].cycle_seed;
        spec
    }

    /// Two labeled families walking one shared loop from opposite entry
    /// points, plus unlabeled filler on another loop.
    pub fn two_family(seed: u64, docs_per_family: usize) -> Self {
        let mut a = ClassProfile::new("family_a", Some(Label::Clean), docs_per_family);
        a.cycle_len = 24;
        a.cycle_seed = 7;
        a.mutation_rate = 0.0;
        let mut b = a.clone();
        b.name = "family_b".into();
        b.label = Some(Label::Malicious);
        b.entry = 0.5;
        let mut filler = ClassProfile::new("filler", None, docs_per_family.div_ceil(2));
        filler.cycle_seed = 99;
        SyntheticSpec {
            seed,
            alphabet_size: 50,
            min_length: 120,
            max_length: 200,
            classes: vec![a, b, filler],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SyntheticSpec = serde_json::from_str(text)?;
        validate(&spec)?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDoc {
    pub document: Document,
    pub class: String,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub docs: Vec<SyntheticDoc>,
    /// Every ngram (orders 1 to 4) lying inside a planted motif, per class.
    pub planted: BTreeMap<String, BTreeSet<String>>,
}

impl SyntheticCorpus {
    pub fn documents(&self) -> Vec<Document> {
        self.docs.iter().map(|d| d.document.clone()).collect()
    }

    pub fn labels(&self) -> BTreeMap<String, Label> {
        self.docs
            .iter()
            .filter_map(|d| d.label.map(|l| (d.document.source_id.clone(), l)))
            .collect()
    }

    /// Ground truth: every document's class, label and word sequence, plus
    /// the planted ngrams per class.
    pub fn truth_json(&self) -> Result<String> {
        let docs: Vec<serde_json::Value> = self
            .docs
            .iter()
            .map(|d| {
                serde_json::json!({
                    "source_id": d.document.source_id,
                    "class": d.class,
                    "label": d.label.map(Label::digit),
                    "words": d.document.words,
                })
            })
            .collect();
        let value = serde_json::json!({ "docs": docs, "planted": self.planted });
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    /// Category file body: `source_id<TAB>class`.
    pub fn categories_tsv(&self) -> String {
        let mut out = String::new();
        for d in &self.docs {
            let _ = writeln!(out, "{}\t{}", d.document.source_id, d.class);
        }
        out
    }

    /// Labels file body: `source_id<TAB>label` with `?` for unlabeled.
    pub fn labels_tsv(&self) -> String {
        let mut out = String::new();
        for d in &self.docs {
            let label = d.label.map_or("?".to_owned(), |l| l.digit().to_string());
            let _ = writeln!(out, "{}\t{label}", d.document.source_id);
        }
        out
    }
}

pub fn api_name(index: usize) -> String {
    format!("Api{index:03}")
}

fn motif_word(class: usize, motif: usize, pos: usize) -> String {
    format!("Planted{class}M{motif}W{pos}")
}

struct Chain {
    cycle: Vec<usize>,
    /// Next API on the main cycle, for every API.
    primary: Vec<usize>,
    alternatives: Vec<(Vec<usize>, WeightedIndex<f64>)>,
}

impl Chain {
    fn build(alphabet: usize, profile: &ClassProfile, class_stream: u64, seed: u64) -> Chain {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe);
        rng.set_stream(profile.cycle_seed.wrapping_mul(1_000_003) ^ profile.cycle_len as u64);
        let mut apis: Vec<usize> = (0..alphabet).collect();
        apis.shuffle(&mut rng);
        let cycle = apis[..profile.cycle_len].to_vec();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class_stream + 1);
        let mut primary = vec![0; alphabet];
        for (i, &api) in cycle.iter().enumerate() {
            primary[api] = cycle[(i + 1) % cycle.len()];
        }
        for &api in &apis[profile.cycle_len..] {
            primary[api] = cycle[rng.gen_range(0..cycle.len())];
        }
        let alternatives = (0..alphabet)
            .map(|_| {
                let succ: Vec<usize> = (0..profile.branching.max(1))
                    .map(|_| rng.gen_range(0..alphabet))
                    .collect();
                let weights: Vec<f64> = succ.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
                (succ, WeightedIndex::new(weights).expect("positive weights"))
            })
            .collect();
        Chain {
            cycle,
            primary,
            alternatives,
        }
    }

    fn walk(&self, len: usize, entry: f64, mutation_rate: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let start = ((entry.rem_euclid(1.0)) * self.cycle.len() as f64).round() as usize;
        let mut state = self.cycle[start % self.cycle.len()];
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(state);
            state = if rng.gen_bool(mutation_rate) {
                let (succ, dist) = &self.alternatives[state];
                succ[dist.sample(rng)]
            } else {
                self.primary[state]
            };
        }
        out
    }
}

fn validate(spec: &SyntheticSpec) -> Result<()> {
    let fail = |msg: String| Err(Error::Synth(msg));
    if spec.alphabet_size == 0 {
        return fail("alphabet is empty".into());
    }
    if spec.min_length == 0 || spec.min_length > spec.max_length {
        return fail(format!(
            "bad length range {}..={}",
            spec.min_length, spec.max_length
        ));
    }
    let mut names = BTreeSet::new();
    for p in &spec.classes {
        if !names.insert(p.name.as_str()) {
            return fail(format!("class `{}` defined twice", p.name));
        }
        if p.cycle_len == 0 || p.cycle_len > spec.alphabet_size {
            return fail(format!(
                "class `{}`: cycle length {} outside 1..={}",
                p.name, p.cycle_len, spec.alphabet_size
            ));
        }
        if !(0.0..=1.0).contains(&p.mutation_rate) {
            return fail(format!(
                "class `{}`: mutation rate {}",
                p.name, p.mutation_rate
            ));
        }
        if p.motifs > 0 && (p.motif_len == 0 || p.motif_repeats.0 > p.motif_repeats.1) {
            return fail(format!("class `{}`: bad motif settings", p.name));
        }
    }
    Ok(())
}

/// Generates the corpus described by `spec`; identical specs give identical
/// corpora.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    validate(spec)?;
    let mut docs = Vec::new();
    let mut planted = BTreeMap::new();

    for (ci, profile) in spec.classes.iter().enumerate() {
        let chain = Chain::build(spec.alphabet_size, profile, 2 * ci as u64, spec.seed);
        let motifs: Vec<Vec<String>> = (0..profile.motifs)
            .map(|m| {
                (0..profile.motif_len)
                    .map(|p| motif_word(ci, m, p))
                    .collect()
            })
            .collect();
        let mut grams = BTreeSet::new();
        for motif in &motifs {
            for n in 1..=4.min(motif.len()) {
                grams.extend(motif.windows(n).map(|w| w.join(" ")));
            }
        }
        planted.insert(profile.name.clone(), grams);

        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(2 * ci as u64 + 2);
        for di in 0..profile.docs {
            let len = rng.gen_range(spec.min_length..=spec.max_length);
            let mut words: Vec<String> = chain
                .walk(len, profile.entry, profile.mutation_rate, &mut rng)
                .into_iter()
                .map(api_name)
                .collect();
            for motif in &motifs {
                let repeats = rng.gen_range(profile.motif_repeats.0..=profile.motif_repeats.1);
                for _ in 0..repeats {
                    let at = rng.gen_range(0..=words.len());
                    words.splice(at..at, motif.iter().cloned());
                }
            }
            let id = format!("{}-{di:04}", profile.name);
            docs.push(SyntheticDoc {
                document: Document::new(id, words),
                class: profile.name.clone(),
                label: profile.label,
            });
        }
    }
    Ok(SyntheticCorpus { docs, planted })
}

/// Renders a document as a sandbox event log with random arguments and a
/// few non-event lines.
pub fn render_trace(doc: &Document, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    let _ = writeln!(out, "# synthetic trace {}", doc.source_id);
    let pid: u32 = rng.gen_range(1000..9999);
    let threads: Vec<u32> = (0..3).map(|_| rng.gen_range(1000..9999)).collect();
    let mut ts: u64 = 1_501_696_951;
    for word in &doc.words {
        ts += u64::from(rng.gen_bool(0.05));
        let tid = threads[rng.gen_range(0..threads.len())];
        let args = match rng.gen_range(0..3) {
            0 => "_".to_owned(),
            1 => format!("{},{}", rng.gen_range(0..100_000), rng.gen_range(0..16)),
            _ => format!("'v{}.0',{},_", rng.gen_range(0..9), rng.gen_range(0..1000)),
        };
        let _ = writeln!(out, "event({ts},{pid},{tid},api_{word}({args}))");
    }
    let _ = writeln!(out, "# end of trace");
    out
}
