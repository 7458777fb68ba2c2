//! Spectral encoding of documents into RGB behavior images and back.
//!
//! Every mapped ngram owns one frequency coordinate per channel. Its tf-idf
//! becomes the amplitude there and its first-occurrence rank becomes the
//! phase. An inverse DFT turns the spectrum into a plane, and contrast
//! normalization maps the plane to 8 bits.

pub mod dft;
mod image;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::model::CodecModel;
use crate::select::{Assignment, Coord};
use crate::trace::Document;
use crate::vocab::{ngram_stats, TfIdfVector, Vocabulary};

use self::dft::Dft2;
pub use self::image::BehaviorImage;

pub const DEFAULT_EPSILON: f64 = 0.02;

/// How the spectrum is turned into a real plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecMode {
    /// Magnitude of the complex inverse DFT. Not invertible.
    Paper,
    /// Conjugate-symmetric spectrum, real inverse DFT. Decodable.
    #[default]
    Strict,
}

impl fmt::Display for CodecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodecMode::Paper => "paper",
            CodecMode::Strict => "strict",
        })
    }
}

impl FromStr for CodecMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(CodecMode::Paper),
            "strict" => Ok(CodecMode::Strict),
            other => Err(format!(
                "unknown codec mode `{other}` (expected paper or strict)"
            )),
        }
    }
}

/// Amplitude of the zero-frequency coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "snake_case")]
pub enum DcPolicy {
    /// Largest assigned amplitude of the channel, or 1 when nothing is present.
    #[default]
    MaxAssigned,
    Fixed(f64),
}

impl DcPolicy {
    pub fn amplitude(self, max_assigned: f64) -> f64 {
        match self {
            DcPolicy::MaxAssigned if max_assigned > 0.0 => max_assigned,
            DcPolicy::MaxAssigned => 1.0,
            DcPolicy::Fixed(v) => v,
        }
    }
}

/// Ranks the channel's ngrams that are present in `doc` and accepted by
/// `mapped` by first occurrence, returning `(ngram, rank)` with ranks `1..=K`.
///
/// Pooled orders are ranked separately and merged rank by rank; on equal
/// per-order rank the lower order comes first.
pub fn first_occurrence_ranks<F>(
    doc: &Document,
    channel: Channel,
    mapped: F,
) -> Vec<(String, usize)>
where
    F: Fn(&str) -> bool,
{
    let mut merged: Vec<(usize, usize, String)> = Vec::new();
    for (precedence, &n) in channel.orders().iter().enumerate() {
        let present = ngram_stats(&doc.words, n)
            .into_iter()
            .filter(|s| mapped(&s.token));
        for (i, stat) in present.enumerate() {
            merged.push((i, precedence, stat.token));
        }
    }
    merged.sort_unstable_by_key(|a| (a.0, a.1));
    merged
        .into_iter()
        .enumerate()
        .map(|(i, (_, _, token))| (token, i + 1))
        .collect()
}

/// Rank `r` of `k` mapped onto `(0, 360]` in equal steps.
pub fn rank_phase(rank: usize, k: usize) -> f64 {
    rank as f64 * 360.0 / k as f64
}

pub fn ranks_to_phases(ranks: &[(String, usize)]) -> BTreeMap<String, f64> {
    let k = ranks.len();
    ranks
        .iter()
        .map(|(token, r)| (token.clone(), rank_phase(*r, k)))
        .collect()
}

/// Polar spectrum of one channel; phases in degrees within `[0, 360)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub side: usize,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
}

impl Spectrum {
    pub fn zeros(side: usize) -> Self {
        Spectrum {
            side,
            amplitude: vec![0.0; side * side],
            phase: vec![0.0; side * side],
        }
    }

    pub fn at(&self, c: Coord) -> (f64, f64) {
        let i = c.h * self.side + c.w;
        (self.amplitude[i], self.phase[i])
    }

    pub fn set(&mut self, c: Coord, amplitude: f64, phase_deg: f64) {
        let i = c.h * self.side + c.w;
        self.amplitude[i] = amplitude;
        self.phase[i] = phase_deg.rem_euclid(360.0);
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.amplitude
            .iter()
            .zip(&self.phase)
            .map(|(&a, &p)| Complex64::from_polar(a, p.to_radians()))
            .collect()
    }

    pub fn from_complex(side: usize, values: &[Complex64]) -> Self {
        let amplitude = values.iter().map(|v| v.norm()).collect();
        let phase = values.iter().map(|v| phase_degrees(*v)).collect();
        Spectrum {
            side,
            amplitude,
            phase,
        }
    }
}

/// Argument of `v` in degrees, within `[0, 360)`.
pub fn phase_degrees(v: Complex64) -> f64 {
    let deg = v.im.atan2(v.re).to_degrees();
    let deg = if deg < 0.0 { deg + 360.0 } else { deg };
    if deg >= 360.0 {
        0.0
    } else {
        deg
    }
}

/// Places tf-idf amplitudes and rank phases of the present mapped ngrams.
pub fn build_spectrum(
    tfidf: &TfIdfVector,
    phases: &BTreeMap<String, f64>,
    assignments: &[Assignment],
    side: usize,
    dc: DcPolicy,
) -> Result<Spectrum> {
    if let Some(token) = phases.keys().find(|t| !tfidf.contains_key(*t)) {
        return Err(Error::Spectrum(format!(
            "ngram `{token}` has a phase but no tf-idf"
        )));
    }
    let mut spec = Spectrum::zeros(side);
    let mut max_assigned: f64 = 0.0;
    for a in assignments {
        let Some(&value) = tfidf.get(&a.ngram) else {
            continue;
        };
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Spectrum(format!(
                "ngram `{}` has amplitude {value}",
                a.ngram
            )));
        }
        let Some(&phase) = phases.get(&a.ngram) else {
            return Err(Error::Spectrum(format!(
                "ngram `{}` has tf-idf but no phase",
                a.ngram
            )));
        };
        spec.set(a.coord(), value, phase);
        max_assigned = max_assigned.max(value);
    }
    let dc_amplitude = dc.amplitude(max_assigned);
    if !(dc_amplitude.is_finite() && dc_amplitude >= 0.0) {
        return Err(Error::Spectrum(format!("DC amplitude {dc_amplitude}")));
    }
    spec.set(Coord::DC, dc_amplitude, 0.0);
    Ok(spec)
}

/// Unscaled complex inverse DFT of the spectrum as given.
pub fn complex_idft(spec: &Spectrum) -> Vec<Complex64> {
    let mut buf = spec.to_complex();
    Dft2::new(spec.side).inverse(&mut buf);
    buf
}

/// Makes `values` conjugate-symmetric. A coefficient whose mirror is zero is
/// copied across; two nonzero mirrors are averaged.
pub fn hermitian_symmetrize(side: usize, values: &[Complex64]) -> Vec<Complex64> {
    let zero = Complex64::default();
    let mut out = vec![zero; values.len()];
    for h in 0..side {
        for w in 0..side {
            let c = Coord::new(h, w);
            let m = c.mirror(side);
            let x = values[h * side + w];
            let y = values[m.h * side + m.w];
            out[h * side + w] = if m == c {
                Complex64::new(x.re, 0.0)
            } else if y == zero {
                x
            } else if x == zero {
                y.conj()
            } else {
                (x + y.conj()) * 0.5
            };
        }
    }
    out
}

/// Turns a spectrum into a nonnegative real plane.
pub fn inverse_transform(spec: &Spectrum, mode: CodecMode) -> Vec<f64> {
    match mode {
        CodecMode::Paper => complex_idft(spec).iter().map(|v| v.norm()).collect(),
        CodecMode::Strict => {
            let mut buf = hermitian_symmetrize(spec.side, &spec.to_complex());
            Dft2::new(spec.side).inverse(&mut buf);
            let real: Vec<f64> = buf.iter().map(|v| v.re).collect();
            let floor = real.iter().copied().fold(f64::INFINITY, f64::min);
            let offset = if floor < 0.0 { -floor } else { 0.0 };
            real.into_iter().map(|v| v + offset).collect()
        }
    }
}

/// Linear rescale to `[0, 255]`, rounding half away from zero. Planes whose
/// spread is within float noise of their magnitude map to zeros.
pub fn contrast_normalize(values: &[f64]) -> Vec<u8> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let spread = hi - lo;
    let magnitude = lo.abs().max(hi.abs());
    // Also catches a NaN spread.
    if values.is_empty() || spread.is_nan() || spread <= 1e-12 * magnitude {
        return vec![0; values.len()];
    }
    values
        .iter()
        .map(|&v| (255.0 * (v - lo) / spread).round().clamp(0.0, 255.0) as u8)
        .collect()
}

fn mapped_set(assignments: &[Assignment]) -> HashSet<&str> {
    assignments.iter().map(|a| a.ngram.as_str()).collect()
}

/// Spectrum of one channel of `doc` under `model`.
pub fn channel_spectrum(
    doc: &Document,
    tfidf: &TfIdfVector,
    model: &CodecModel,
    channel: Channel,
) -> Result<Spectrum> {
    let assignments = model.channel_map.assignments(channel);
    let mapped = mapped_set(assignments);
    let ranks = first_occurrence_ranks(doc, channel, |t| mapped.contains(t));
    let phases = ranks_to_phases(&ranks);
    build_spectrum(tfidf, &phases, assignments, model.side, model.dc_policy)
}

/// Encodes `doc` into an RGB behavior image.
pub fn encode(doc: &Document, model: &CodecModel) -> Result<BehaviorImage> {
    if doc.is_empty() {
        return Err(Error::EmptyDocument(doc.source_id.clone()));
    }
    if model.channel_map.is_empty() {
        return Err(Error::ChannelMap("model has no mapped ngrams".into()));
    }
    let tfidf = model.vocabulary.tfidf(doc);
    let mut planes = Vec::with_capacity(3);
    for channel in Channel::ALL {
        let spec = channel_spectrum(doc, &tfidf, model, channel)?;
        planes.push(contrast_normalize(&inverse_transform(&spec, model.mode)));
    }
    BehaviorImage::from_planes(
        model.side,
        [&planes[0], &planes[1], &planes[2]],
        Some(model.mode),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedNgram {
    pub rank: usize,
    pub ngram: String,
    /// Degrees within `(0, 360]`.
    pub phase: f64,
    pub amplitude: f64,
    pub relative_tfidf: f64,
    pub relative_tf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedChannel {
    pub channel: Channel,
    /// Present ngrams in recovered first-occurrence order.
    pub ngrams: Vec<DecodedNgram>,
}

impl DecodedChannel {
    pub fn is_empty(&self) -> bool {
        self.ngrams.is_empty()
    }

    pub fn order(&self) -> Vec<&str> {
        self.ngrams.iter().map(|d| d.ngram.as_str()).collect()
    }
}

/// Recovers present ngrams, their order and relative weights from one plane.
pub fn decode_channel(
    plane: &[u8],
    side: usize,
    channel: Channel,
    assignments: &[Assignment],
    vocab: &Vocabulary,
    epsilon: f64,
) -> Result<DecodedChannel> {
    if plane.len() != side * side {
        return Err(Error::SizeMismatch {
            expected: side,
            actual: (plane.len() as f64).sqrt() as usize,
        });
    }
    let values: Vec<f64> = plane.iter().map(|&v| f64::from(v)).collect();
    let spectrum = Spectrum::from_complex(side, &dft::forward_real(side, &values));

    let observed: Vec<(&Assignment, f64, f64)> = assignments
        .iter()
        .map(|a| {
            let (amp, phase) = spectrum.at(a.coord());
            (a, amp, phase)
        })
        .collect();
    let peak = observed.iter().map(|o| o.1).fold(0.0, f64::max);
    let mut present: Vec<(&Assignment, f64, f64)> = if peak > 0.0 {
        observed
            .into_iter()
            .filter(|o| o.1 > epsilon * peak)
            .collect()
    } else {
        Vec::new()
    };
    if present.is_empty() {
        return Ok(DecodedChannel {
            channel,
            ngrams: Vec::new(),
        });
    }

    // The last rank sits at 360 degrees, which reads back near 0.
    let half_step = 180.0 / present.len() as f64;
    for o in &mut present {
        if o.2 < half_step {
            o.2 += 360.0;
        }
    }
    present.sort_by(|a, b| a.2.total_cmp(&b.2).then_with(|| a.0.ngram.cmp(&b.0.ngram)));

    let mut tf = Vec::with_capacity(present.len());
    for (a, amp, _) in &present {
        let idf = vocab.idf(&a.ngram).ok_or_else(|| {
            Error::Manifest(format!(
                "mapped ngram `{}` missing from vocabulary",
                a.ngram
            ))
        })?;
        tf.push(amp / idf);
    }
    let max_amp = present.iter().map(|o| o.1).fold(0.0, f64::max);
    let max_tf = tf.iter().copied().fold(0.0, f64::max);

    let ngrams = present
        .iter()
        .zip(tf)
        .enumerate()
        .map(|(i, ((a, amp, phase), t))| DecodedNgram {
            rank: i + 1,
            ngram: a.ngram.clone(),
            phase: *phase,
            amplitude: *amp,
            relative_tfidf: amp / max_amp,
            relative_tf: t / max_tf,
        })
        .collect();
    Ok(DecodedChannel { channel, ngrams })
}

/// Decodes all three planes of `image`.
pub fn decode(image: &BehaviorImage, model: &CodecModel) -> Result<[DecodedChannel; 3]> {
    decode_with_epsilon(image, model, model.epsilon)
}

pub fn decode_with_epsilon(
    image: &BehaviorImage,
    model: &CodecModel,
    epsilon: f64,
) -> Result<[DecodedChannel; 3]> {
    if image.side() != model.side {
        return Err(Error::SizeMismatch {
            expected: model.side,
            actual: image.side(),
        });
    }
    let decode_one = |channel: Channel| {
        decode_channel(
            &image.plane(channel),
            model.side,
            channel,
            model.channel_map.assignments(channel),
            &model.vocabulary,
            epsilon,
        )
    };
    Ok([
        decode_one(Channel::Red)?,
        decode_one(Channel::Green)?,
        decode_one(Channel::Blue)?,
    ])
}
