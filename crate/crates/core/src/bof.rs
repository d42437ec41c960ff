//! Visual vocabularies from a random sample of descriptors, and
//! bag-of-features histograms over them.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::descriptor::{FeatureKind, FeatureVector, Reader};
use crate::{Error, Result};

pub const VOCABULARY_MAGIC: &[u8; 4] = b"STVV";
pub const VOCABULARY_VERSION: u32 = 1;
pub const DEFAULT_VOCABULARY_SIZE: usize = 4000;

/// K descriptors of one kind; a word's id is its position.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    kind: FeatureKind,
    seed: u64,
    words: Vec<FeatureVector>,
}

impl Vocabulary {
    pub fn new(kind: FeatureKind, seed: u64, words: Vec<FeatureVector>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::InvalidParameter(
                "vocabulary needs at least one word".into(),
            ));
        }
        if let Some(w) = words.iter().find(|w| w.kind() != kind) {
            return Err(Error::KindMismatch {
                expected: kind.to_string(),
                got: w.kind().to_string(),
            });
        }
        Ok(Vocabulary { kind, seed, words })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.kind.len()
    }

    pub fn words(&self) -> &[FeatureVector] {
        &self.words
    }

    /// Header `STVV` + u32 version, u8 kind code, u32 K, u64 seed,
    /// u32 dimension, then K × dimension f64 row-major.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(VOCABULARY_MAGIC)?;
        w.write_all(&VOCABULARY_VERSION.to_le_bytes())?;
        w.write_all(&[self.kind.code()])?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.dimension() as u32).to_le_bytes())?;
        for word in &self.words {
            for v in word.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "vocabulary file");
        r.header(VOCABULARY_MAGIC, VOCABULARY_VERSION)?;
        let kind = FeatureKind::from_code(r.u8()?)?;
        let k = r.u32()? as usize;
        let seed = r.u64()?;
        let dim = r.u32()? as usize;
        if dim != kind.len() {
            return Err(Error::malformed(
                "vocabulary file",
                format!("dimension {dim} does not match kind {kind}"),
            ));
        }
        let words = (0..k)
            .map(|_| {
                let values = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                FeatureVector::new(kind, values)
            })
            .collect::<Result<Vec<_>>>()?;
        if !r.at_end() {
            return Err(Error::malformed("vocabulary file", "trailing bytes"));
        }
        Vocabulary::new(kind, seed, words)
    }
}

/// Uniform sample of `k` descriptors from a stream (reservoir sampling,
/// algorithm R) with a seeded ChaCha8 generator.
pub fn build_vocabulary(
    descriptors: impl IntoIterator<Item = FeatureVector>,
    k: usize,
    seed: u64,
) -> Result<Vocabulary> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "vocabulary size must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reservoir: Vec<FeatureVector> = Vec::with_capacity(k);
    let mut kind = None;
    let mut seen = 0usize;
    for d in descriptors {
        match kind {
            None => kind = Some(d.kind()),
            Some(kd) if kd != d.kind() => {
                return Err(Error::KindMismatch {
                    expected: kd.to_string(),
                    got: d.kind().to_string(),
                })
            }
            _ => {}
        }
        if seen < k {
            reservoir.push(d);
        } else {
            let j = rng.random_range(0..=seen);
            if j < k {
                reservoir[j] = d;
            }
        }
        seen += 1;
    }
    if seen < k {
        return Err(Error::NotEnoughDescriptors {
            needed: k,
            got: seen,
        });
    }
    Vocabulary::new(kind.expect("stream was non-empty"), seed, reservoir)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Id of the nearest word by Euclidean distance, lowest id on ties.
pub fn assign(d: &FeatureVector, vocab: &Vocabulary) -> Result<usize> {
    if d.kind() != vocab.kind {
        return Err(Error::KindMismatch {
            expected: vocab.kind.to_string(),
            got: d.kind().to_string(),
        });
    }
    let mut best = (0, f64::INFINITY);
    for (i, w) in vocab.words.iter().enumerate() {
        let dist = squared_distance(d.values(), w.values());
        if dist < best.1 {
            best = (i, dist);
        }
    }
    Ok(best.0)
}

/// Word counts of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct BofHistogram {
    pub clip_id: String,
    pub label: Option<String>,
    pub counts: Vec<u64>,
    pub n_features: u64,
}

impl BofHistogram {
    /// True when the clip produced no features.
    pub fn is_empty(&self) -> bool {
        self.n_features == 0
    }

    /// Counts divided by the number of features; zero for empty clips.
    pub fn normalized(&self) -> Vec<f64> {
        let n = self.n_features as f64;
        self.counts
            .iter()
            .map(|&c| {
                if self.n_features == 0 {
                    0.0
                } else {
                    c as f64 / n
                }
            })
            .collect()
    }

    /// Raw counts as floats, or frequencies when `normalize` is set.
    pub fn values(&self, normalize: bool) -> Vec<f64> {
        if normalize {
            self.normalized()
        } else {
            self.counts.iter().map(|&c| c as f64).collect()
        }
    }
}

pub fn encode(
    clip_id: impl Into<String>,
    label: Option<String>,
    descriptors: &[FeatureVector],
    vocab: &Vocabulary,
) -> Result<BofHistogram> {
    let clip_id = clip_id.into();
    let ids = descriptors
        .par_iter()
        .map(|d| assign(d, vocab))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0u64; vocab.len()];
    for id in ids {
        counts[id] += 1;
    }
    if descriptors.is_empty() {
        log::warn!("clip {clip_id} has no features; its histogram is all zero");
    }
    Ok(BofHistogram {
        clip_id,
        label,
        counts,
        n_features: descriptors.len() as u64,
    })
}

/// Placeholder written in the label column of unlabeled clips.
pub const NO_LABEL: &str = "-";

/// One line per clip: id, label, feature count, K counts.
pub fn format_bof_tsv(hists: &[BofHistogram]) -> String {
    let mut out = String::new();
    for h in hists {
        out.push_str(&h.clip_id);
        out.push('\t');
        out.push_str(h.label.as_deref().unwrap_or(NO_LABEL));
        out.push('\t');
        out.push_str(&h.n_features.to_string());
        for c in &h.counts {
            out.push('\t');
            out.push_str(&c.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn parse_bof_tsv(text: &str) -> Result<Vec<BofHistogram>> {
    let mut hists = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::malformed("bof tsv", format!("line {}: {msg}", i + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 {
            return Err(bad(format!(
                "expected at least 4 fields, got {}",
                fields.len()
            )));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let counts = fields[3..]
            .iter()
            .map(|s| num(s))
            .collect::<Result<Vec<_>>>()?;
        let n_features = num(fields[2])?;
        if counts.iter().sum::<u64>() != n_features {
            return Err(bad("counts do not sum to the feature count".into()));
        }
        hists.push(BofHistogram {
            clip_id: fields[0].to_string(),
            label: (fields[1] != NO_LABEL).then(|| fields[1].to_string()),
            counts,
            n_features,
        });
    }
    Ok(hists)
}
