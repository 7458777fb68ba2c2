use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use bimg_core::codec::decode_with_epsilon;
use bimg_core::model::{fit as fit_model, FitOptions};
use bimg_core::phash::{distance_histogram, distance_matrix};
use bimg_core::synth::{generate, render_trace, SyntheticSpec};
use bimg_core::{
    cluster as cluster_hashes, encode as encode_doc, hamming, parse_trace, BehaviorImage,
    CodecModel, Document, Label, PerceptualHash,
};
use rayon::prelude::*;

use crate::{ClusterArgs, CompareArgs, DecodeArgs, EncodeArgs, FitArgs, HashArgs, SynthArgs};

/// Files directly inside `dir`, sorted by name.
fn list_files(dir: &Path, extension: Option<&str>) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        if let Some(ext) = extension {
            if path.extension().and_then(|e| e.to_str()) != Some(ext) {
                continue;
            }
        }
        files.push(path);
    }
    files.sort();
    Ok(files)
}

/// Expands directories in `inputs` to their files, keeping argument order.
fn expand(inputs: &[PathBuf], extension: Option<&str>) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            out.extend(list_files(input, extension)?);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

fn source_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn read_trace(path: &Path) -> Result<Document> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = parse_trace(&text, &source_id(path))
        .with_context(|| format!("parsing {}", path.display()))?;
    // File order stays authoritative; out-of-order timestamps are only flagged.
    if parsed.non_monotonic > 0 {
        eprintln!(
            "warning\t{}\t{} events with decreasing timestamps",
            path.display(),
            parsed.non_monotonic
        );
    }
    Ok(parsed.document)
}

fn read_labels(path: &Path) -> Result<BTreeMap<String, Label>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut labels = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, label)) = line.split_once('\t') else {
            bail!(
                "{}:{}: expected `source_id<TAB>label`",
                path.display(),
                i + 1
            );
        };
        match label.trim() {
            "?" => {}
            "0" => {
                labels.insert(id.to_owned(), Label::Clean);
            }
            "1" => {
                labels.insert(id.to_owned(), Label::Malicious);
            }
            other => bail!("{}:{}: unknown label `{other}`", path.display(), i + 1),
        }
    }
    Ok(labels)
}

fn read_categories(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let (id, cat) = l.split_once('\t').with_context(|| {
                format!(
                    "{}:{}: expected `source_id<TAB>category`",
                    path.display(),
                    i + 1
                )
            })?;
            Ok((id.to_owned(), cat.trim().to_owned()))
        })
        .collect()
}

fn load_model(path: &Path) -> Result<CodecModel> {
    CodecModel::load(path).with_context(|| format!("loading manifest {}", path.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_owned()
    } else {
        format!("{x:.6}")
    }
}

pub fn fit(args: FitArgs) -> Result<ExitCode> {
    let labels = read_labels(&args.labels)?;
    let files = list_files(&args.corpus, None)?;
    ensure!(
        !files.is_empty(),
        "corpus directory {} is empty",
        args.corpus.display()
    );

    let parsed: Vec<(PathBuf, Result<Document>)> = files
        .into_par_iter()
        .map(|p| {
            let d = read_trace(&p);
            (p, d)
        })
        .collect();
    let mut corpus = Vec::new();
    let mut skipped = 0;
    for (path, doc) in parsed {
        match doc {
            Ok(doc) => corpus.push(doc),
            Err(e) => {
                skipped += 1;
                eprintln!("skip\t{}\t{e:#}", path.display());
            }
        }
    }
    ensure!(
        !corpus.is_empty(),
        "no trace in {} could be parsed",
        args.corpus.display()
    );
    let known: BTreeSet<&str> = corpus.iter().map(|d| d.source_id.as_str()).collect();
    let labeled = labels
        .keys()
        .filter(|id| known.contains(id.as_str()))
        .count();
    ensure!(
        labeled > 0,
        "no corpus document has a label in {}",
        args.labels.display()
    );

    let options = FitOptions {
        side: args.size,
        mode: args.mode,
        epsilon: args.epsilon,
        holdout_fraction: args.holdout,
        seed: args.seed,
        ..Default::default()
    };
    let report = fit_model(&corpus, &labels, &options)?;
    let model = &report.model;
    if let Some(parent) = args.manifest.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    model
        .save(&args.manifest)
        .with_context(|| format!("writing manifest {}", args.manifest.display()))?;

    let mut out = String::new();
    let _ = writeln!(out, "documents\t{}", corpus.len());
    let _ = writeln!(out, "skipped\t{skipped}");
    let _ = writeln!(out, "labeled\t{labeled}");
    let _ = writeln!(out, "holdout\t{}", model.holdout_ids.len());
    let _ = writeln!(out, "vocabulary\t{}", model.vocabulary.len());
    for (channel, rows) in &report.ranking {
        let _ = writeln!(
            out,
            "mapped\t{channel}\t{}",
            model.channel_map.assignments(*channel).len()
        );
        for (i, row) in rows.iter().take(5).enumerate() {
            let _ = writeln!(
                out,
                "top\t{channel}\t{}\t{}\t{}",
                i + 1,
                row.ngram,
                fmt_f64(row.significance)
            );
        }
    }
    print!("{out}");

    if let Some(path) = &args.ranking {
        let mut tsv = String::from(
            "channel\trank\tngram\tsignificance\tmean_malicious\tmean_clean\tstd_malicious\tstd_clean\n",
        );
        for (channel, rows) in &report.ranking {
            for (i, r) in rows.iter().enumerate() {
                let _ = writeln!(
                    tsv,
                    "{channel}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    i + 1,
                    r.ngram,
                    fmt_f64(r.significance),
                    fmt_f64(r.mean_malicious),
                    fmt_f64(r.mean_clean),
                    fmt_f64(r.std_malicious),
                    fmt_f64(r.std_clean),
                );
            }
        }
        write_file(path, tsv.as_bytes())?;
    }
    Ok(ExitCode::SUCCESS)
}

enum EncodeOutcome {
    Written(PathBuf),
    Holdout,
    Failed(String),
}

pub fn encode(args: EncodeArgs) -> Result<ExitCode> {
    let model = load_model(&args.manifest)?;
    let inputs = expand(&args.traces, None)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    // Two inputs with one source id would race for the same output file.
    let mut seen = BTreeSet::new();
    let duplicate: Vec<bool> = inputs.iter().map(|p| !seen.insert(source_id(p))).collect();

    let outcomes: Vec<EncodeOutcome> = inputs
        .par_iter()
        .zip(duplicate.par_iter())
        .map(|(path, &dup)| {
            let id = source_id(path);
            if model.is_holdout(&id) {
                return EncodeOutcome::Holdout;
            }
            if dup {
                return EncodeOutcome::Failed(format!("duplicate source id `{id}`"));
            }
            let run = || -> Result<PathBuf> {
                let doc = read_trace(path)?;
                let image = encode_doc(&doc, &model)?;
                let target = args.out.join(format!("{id}.png"));
                write_file(&target, &image.to_png_bytes()?)?;
                Ok(target)
            };
            match run() {
                Ok(target) => EncodeOutcome::Written(target),
                Err(e) => EncodeOutcome::Failed(format!("{e:#}")),
            }
        })
        .collect();

    let (mut written, mut holdout, mut failed) = (0, 0, 0);
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for (path, outcome) in inputs.iter().zip(&outcomes) {
        match outcome {
            EncodeOutcome::Written(target) => {
                written += 1;
                writeln!(lock, "ok\t{}\t{}", source_id(path), target.display())?;
            }
            EncodeOutcome::Holdout => {
                holdout += 1;
                writeln!(lock, "holdout\t{}", source_id(path))?;
            }
            EncodeOutcome::Failed(msg) => {
                failed += 1;
                writeln!(lock, "failed\t{}\t{msg}", path.display())?;
            }
        }
    }
    writeln!(
        lock,
        "summary\tencoded={written}\tholdout={holdout}\tfailed={failed}"
    )?;
    if failed > 0 && written == 0 {
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

pub fn decode(args: DecodeArgs) -> Result<ExitCode> {
    let model = load_model(&args.manifest)?;
    let image = BehaviorImage::read_png(&args.image)
        .with_context(|| format!("reading image {}", args.image.display()))?;
    let epsilon = args.epsilon.unwrap_or(model.epsilon);
    ensure!(
        (0.0..1.0).contains(&epsilon),
        "epsilon must lie in [0, 1), got {epsilon}"
    );
    let channels = decode_with_epsilon(&image, &model, epsilon)?;

    let mut out = String::new();
    for dc in &channels {
        let _ = writeln!(out, "channel\t{}\tpresent={}", dc.channel, dc.ngrams.len());
        for g in &dc.ngrams {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.3}\t{:.6}\t{:.6}",
                dc.channel, g.rank, g.ngram, g.phase, g.relative_tfidf, g.relative_tf
            );
        }
    }
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

fn hash_file(path: &Path) -> Result<PerceptualHash> {
    let image = BehaviorImage::read_png(path)
        .with_context(|| format!("reading image {}", path.display()))?;
    Ok(PerceptualHash::of_image(&image, source_id(path)))
}

fn hash_all(paths: &[PathBuf]) -> Result<Vec<PerceptualHash>> {
    paths.par_iter().map(|p| hash_file(p)).collect()
}

pub fn hash(args: HashArgs) -> Result<ExitCode> {
    let paths = expand(&args.images, Some("png"))?;
    let hashes = hash_all(&paths)?;
    let mut out = String::new();
    for h in &hashes {
        let _ = writeln!(out, "{}\t{}", h.to_hex(), h.source_id);
    }
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

pub fn compare(args: CompareArgs) -> Result<ExitCode> {
    let a = hash_file(&args.a)?;
    let b = hash_file(&args.b)?;
    println!("{}", hamming(&a, &b));
    Ok(ExitCode::SUCCESS)
}

pub fn cluster(args: ClusterArgs) -> Result<ExitCode> {
    let holdout: BTreeSet<String> = match &args.manifest {
        Some(path) => load_model(path)?.holdout_ids.into_iter().collect(),
        None => BTreeSet::new(),
    };
    let paths: Vec<PathBuf> = list_files(&args.dir, Some("png"))?
        .into_iter()
        .filter(|p| !holdout.contains(&source_id(p)))
        .collect();
    let hashes = hash_all(&paths)?;
    let partition = cluster_hashes(&hashes, args.cutoff);

    let mut out = String::new();
    let _ = writeln!(out, "images\t{}", hashes.len());
    let _ = writeln!(out, "cutoff\t{}", args.cutoff);
    let _ = writeln!(out, "groups\t{}", partition.len());
    for (k, members) in partition.named(&hashes).iter().enumerate() {
        let _ = writeln!(out, "group\t{k}\t{}\t{}", members.len(), members.join(" "));
    }
    print!("{out}");

    if let Some(path) = &args.matrix {
        let matrix = distance_matrix(&hashes);
        let mut tsv = String::from("source_id");
        for h in &hashes {
            let _ = write!(tsv, "\t{}", h.source_id);
        }
        tsv.push('\n');
        for (h, row) in hashes.iter().zip(&matrix) {
            tsv.push_str(&h.source_id);
            for d in row {
                let _ = write!(tsv, "\t{d}");
            }
            tsv.push('\n');
        }
        write_file(path, tsv.as_bytes())?;
    }
    if let Some(path) = &args.histogram {
        let categories = match &args.categories {
            Some(p) => read_categories(p)?,
            None => BTreeMap::new(),
        };
        let hist = distance_histogram(&hashes, &categories);
        let mut tsv = String::from("distance\tall\tsame\tdifferent\n");
        for d in 0..hist.all.len() {
            let _ = writeln!(
                tsv,
                "{d}\t{}\t{}\t{}",
                hist.all[d], hist.same[d], hist.different[d]
            );
        }
        write_file(path, tsv.as_bytes())?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn synth(args: SynthArgs) -> Result<ExitCode> {
    let spec = match &args.spec {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SyntheticSpec::from_json(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None if args.preset == "two-family" => SyntheticSpec::two_family(args.seed, args.docs),
        None if args.preset == "planted" => SyntheticSpec::planted(args.seed, args.docs),
        None => SyntheticSpec::two_class(args.seed, args.docs),
    };
    let corpus = generate(&spec)?;
    let traces = args.out.join("traces");
    fs::create_dir_all(&traces).with_context(|| format!("creating {}", traces.display()))?;
    corpus.docs.par_iter().enumerate().try_for_each(|(i, d)| {
        let text = render_trace(&d.document, spec.seed.wrapping_add(i as u64));
        write_file(
            &traces.join(format!("{}.log", d.document.source_id)),
            text.as_bytes(),
        )
    })?;
    write_file(&args.out.join("labels.tsv"), corpus.labels_tsv().as_bytes())?;
    write_file(
        &args.out.join("categories.tsv"),
        corpus.categories_tsv().as_bytes(),
    )?;
    write_file(
        &args.out.join("truth.json"),
        corpus.truth_json()?.as_bytes(),
    )?;
    write_file(&args.out.join("spec.json"), spec.to_json()?.as_bytes())?;

    let mut per_class: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &corpus.docs {
        *per_class.entry(d.class.as_str()).or_default() += 1;
    }
    for (class, n) in per_class {
        println!("class\t{class}\t{n}");
    }
    println!("documents\t{}", corpus.docs.len());
    Ok(ExitCode::SUCCESS)
}
