//! The five-step protocol over a manifest: extract features, build a
//! vocabulary from the training split, encode every clip, train one-vs-one
//! models and evaluate on the test split.
//!
//! Every artifact lives under `<output>/cache/<stage>/` with a file name
//! derived from a SHA-256 over the stage name, its parameters and the
//! hashes of its inputs, so reruns reuse whatever is still valid.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bof::{self, BofHistogram, Vocabulary};
use crate::classifier::{self, EvalReport, OvoModel, SvmOptions};
use crate::descriptor::{
    read_descriptors_binary, write_descriptors_binary, DescriptorParams, DescriptorRecord,
    Extractor, FeatureKind, FeatureVector, Norm,
};
use crate::detector::{self, cartesian_scales, DetectorParams, InterestPoint, NmsRadius};
use crate::scalespace::ScalePair;
use crate::video_io::{frame_files, Manifest, ManifestEntry, Split};
use crate::{Error, Result};

/// Bumped whenever an artifact layout or algorithm changes.
const CACHE_VERSION: &str = "stvision-cache-1";

pub const STAGES: [&str; 5] = ["extract", "vocab", "encode", "train", "evaluate"];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub output: PathBuf,
    pub detector: DetectorParams,
    /// Detector for HueSTIP when detection is not shared between kinds.
    pub hue_detector: DetectorParams,
    pub shared_detection: bool,
    pub descriptor: DescriptorParams,
    pub kinds: Vec<FeatureKind>,
    pub vocab_size: usize,
    pub seed: u64,
    pub c: f64,
    /// Cross-validation folds for choosing C; 0 disables it.
    pub cv_folds: usize,
    pub cv_grid: Vec<f64>,
    pub normalize: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: PathBuf::from("manifest.tsv"),
            output: PathBuf::from("out"),
            detector: DetectorParams::default(),
            hue_detector: DetectorParams::default(),
            shared_detection: true,
            descriptor: DescriptorParams::default(),
            kinds: vec![FeatureKind::HogHof, FeatureKind::HueStip],
            vocab_size: bof::DEFAULT_VOCABULARY_SIZE,
            seed: 0,
            c: classifier::DEFAULT_C,
            cv_folds: 0,
            cv_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            normalize: true,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {s:?}")))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidParameter(format!(
            "{key}: expected a boolean, got {value:?}"
        ))),
    }
}

/// `stip`, `huestip` or `both`.
pub fn parse_kinds(value: &str) -> Result<Vec<FeatureKind>> {
    match value.trim().to_ascii_lowercase().as_str() {
        "both" => Ok(vec![FeatureKind::HogHof, FeatureKind::HueStip]),
        other => match other.parse()? {
            k @ (FeatureKind::HogHof | FeatureKind::HueStip) => Ok(vec![k]),
            k => Err(Error::InvalidParameter(format!(
                "kind must be stip, huestip or both, got {k}"
            ))),
        },
    }
}

fn unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn set_detector(d: &mut DetectorParams, key: &str, value: &str) -> Result<bool> {
    match key {
        "harris_k" => d.k = parse_one(key, value)?,
        "sigma2" => {
            let taus = unique(d.scales.iter().map(|s| s.tau2));
            d.scales = cartesian_scales(&parse_list::<f64>(key, value)?, &taus);
        }
        "tau2" => {
            let sigmas = unique(d.scales.iter().map(|s| s.sigma2));
            d.scales = cartesian_scales(&sigmas, &parse_list::<f64>(key, value)?);
        }
        "integration_factor" => d.integration_factor = parse_one(key, value)?,
        "threshold" => d.threshold = parse_one(key, value)?,
        "top_n" => {
            d.top_n = match value.trim() {
                "" | "none" | "0" => None,
                v => Some(parse_one(key, v)?),
            }
        }
        "nms_radius" => {
            d.nms_radius = match value.trim() {
                "scale" => NmsRadius::ScaleProportional,
                v => match parse_list::<usize>(key, v)?[..] {
                    [rx, ry, rt] => NmsRadius::Fixed { rx, ry, rt },
                    _ => {
                        return Err(Error::InvalidParameter(format!(
                            "{key}: expected `scale` or rx,ry,rt"
                        )))
                    }
                },
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

impl PipelineConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        if let Some(sub) = key.strip_prefix("huestip.") {
            return if set_detector(&mut self.hue_detector, sub, value)? {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "unknown config key {key:?}"
                )))
            };
        }
        if set_detector(&mut self.detector, key, value)? {
            if self.shared_detection {
                self.hue_detector = self.detector.clone();
            }
            return Ok(());
        }
        match key {
            "manifest" => self.manifest = PathBuf::from(value.trim()),
            "output" => self.output = PathBuf::from(value.trim()),
            "kind" => self.kinds = parse_kinds(value)?,
            "vocab_size" => self.vocab_size = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "c" => self.c = parse_one(key, value)?,
            "cv_folds" => self.cv_folds = parse_one(key, value)?,
            "cv_grid" => self.cv_grid = parse_list(key, value)?,
            "normalize" => self.normalize = parse_bool(key, value)?,
            "shared_detection" => self.shared_detection = parse_bool(key, value)?,
            "norm" => self.descriptor.norm = parse_one::<Norm>(key, value)?,
            "extent_factor" => self.descriptor.extent_factor = parse_one(key, value)?,
            "no_motion_threshold" => self.descriptor.no_motion_threshold = parse_one(key, value)?,
            "hue_scale" => {
                self.descriptor.hue_scale = match value.trim() {
                    "" | "detector" => None,
                    v => match parse_list::<f64>(key, v)?[..] {
                        [s, t] => Some(ScalePair::new(s, t)?),
                        _ => {
                            return Err(Error::InvalidParameter(format!(
                                "{key}: expected `detector` or sigma2,tau2"
                            )))
                        }
                    },
                }
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown config key {key:?}"
                )))
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::malformed("config", format!("line {}: expected key=value", i + 1))
            })?;
            self.set(key, value)
                .map_err(|e| Error::malformed("config", format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingPath(path.to_owned()),
            _ => e.into(),
        })?;
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.hue_detector.validate()?;
        self.descriptor.validate()?;
        if self.kinds.is_empty() {
            return Err(Error::InvalidParameter(
                "no descriptor kind selected".into(),
            ));
        }
        if self.vocab_size == 0 {
            return Err(Error::InvalidParameter(
                "vocab_size must be at least 1".into(),
            ));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if self.cv_folds == 1 || (self.cv_folds > 1 && self.cv_grid.is_empty()) {
            return Err(Error::InvalidParameter(
                "cross-validation needs ≥ 2 folds and a non-empty grid".into(),
            ));
        }
        Ok(())
    }

    fn detector_for(&self, kind: FeatureKind) -> &DetectorParams {
        if !self.shared_detection && kind == FeatureKind::HueStip {
            &self.hue_detector
        } else {
            &self.detector
        }
    }
}

/// Cache hits and misses of one stage.
#[derive(Debug, Default)]
pub struct StageCounter {
    hits: AtomicUsize,
    misses: AtomicUsize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageStats {
    pub hits: usize,
    pub misses: usize,
}

impl StageCounter {
    fn record(&self, hit: bool) {
        if hit {
            self.hits.fetch_add(1, Ordering::Relaxed);
        } else {
            self.misses.fetch_add(1, Ordering::Relaxed);
        }
    }

    fn snapshot(&self) -> StageStats {
        StageStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }
}

fn sha_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// SHA-256 of a clip's source bytes: the file itself, or every frame file
/// (name and contents) of an image-sequence directory.
pub fn clip_fingerprint(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_owned()));
    }
    let mut h = Sha256::new();
    if path.is_dir() {
        for f in frame_files(path)? {
            let name = f
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            let bytes = fs::read(&f)?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
    } else {
        h.update(fs::read(path)?);
    }
    Ok(hex::encode(h.finalize()))
}

/// Descriptors of one clip as stored by the extract stage.
#[derive(Debug, Clone)]
pub struct ClipFeatures {
    pub entry: ManifestEntry,
    pub key: String,
    pub records: Vec<DescriptorRecord>,
}

impl ClipFeatures {
    /// Descriptors of `kind`; HoGHoF is read as the prefix of HueSTIP.
    pub fn features(&self, kind: FeatureKind) -> Result<Vec<FeatureVector>> {
        self.records
            .iter()
            .map(|r| match (kind, r.feature.kind()) {
                (FeatureKind::HogHof, _) => r.feature.hoghof_prefix(),
                (k, got) if k == got => Ok(r.feature.clone()),
                (k, got) => Err(Error::KindMismatch {
                    expected: k.to_string(),
                    got: got.to_string(),
                }),
            })
            .collect()
    }
}

/// Outputs of a full run for one descriptor kind.
#[derive(Debug, Clone)]
pub struct KindResult {
    pub kind: FeatureKind,
    pub report: EvalReport,
    pub report_path: PathBuf,
    pub c: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub results: Vec<KindResult>,
    pub comparison: String,
    pub stats: BTreeMap<&'static str, StageStats>,
}

pub struct Pipeline {
    config: PipelineConfig,
    manifest: Manifest,
    counters: BTreeMap<&'static str, StageCounter>,
}

fn stage<T>(name: &'static str, clip: Option<&str>, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name, clip))
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let manifest = Manifest::load(&config.manifest)?;
        Ok(Pipeline {
            config,
            manifest,
            counters: STAGES
                .iter()
                .map(|s| (*s, StageCounter::default()))
                .collect(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn stats(&self) -> BTreeMap<&'static str, StageStats> {
        self.counters
            .iter()
            .map(|(k, v)| (*k, v.snapshot()))
            .collect()
    }

    fn cache_path(&self, stage: &str, key: &str, ext: &str) -> PathBuf {
        self.config
            .output
            .join("cache")
            .join(stage)
            .join(format!("{key}.{ext}"))
    }

    fn extract_key(&self, entry: &ManifestEntry, detector: &DetectorParams) -> Result<String> {
        let fp = clip_fingerprint(&self.manifest.resolve(entry))?;
        Ok(sha_hex(&[
            CACHE_VERSION.as_bytes(),
            b"extract",
            entry.path.as_bytes(),
            fp.as_bytes(),
            format!("{detector:?}").as_bytes(),
            format!("{:?}", self.config.descriptor).as_bytes(),
        ]))
    }

    fn extract_one(
        &self,
        entry: &ManifestEntry,
        detector: &DetectorParams,
    ) -> Result<ClipFeatures> {
        let key = self.extract_key(entry, detector)?;
        let path = self.cache_path("extract", &key, "stvd");
        let points_path = self.cache_path("extract", &key, "points.tsv");
        let counter = &self.counters["extract"];
        if path.exists() && points_path.exists() {
            if let Ok(records) = read_descriptors_binary(&fs::read(&path)?) {
                counter.record(true);
                return Ok(ClipFeatures {
                    entry: entry.clone(),
                    key,
                    records,
                });
            }
            log::warn!("discarding unreadable cache file {}", path.display());
        }
        counter.record(false);
        let clip = self.manifest.load_clip(entry)?;
        let gray = crate::video_io::to_grayscale(&clip);
        let points: Vec<InterestPoint> = detector::detect(&gray, detector)?;
        let extractor = Extractor::new(&clip, self.config.descriptor.clone())?;
        let features = extractor.describe_all(&points, FeatureKind::HueStip)?;
        let records: Vec<DescriptorRecord> = points
            .iter()
            .zip(features)
            .map(|(p, feature)| DescriptorRecord {
                clip_id: entry.path.clone(),
                x: p.x,
                y: p.y,
                t: p.t,
                sigma2: p.sigma2,
                tau2: p.tau2,
                feature,
            })
            .collect();
        let mut buf = Vec::new();
        write_descriptors_binary(&mut buf, &records)?;
        write_atomic(
            &points_path,
            detector::format_points_tsv(&entry.path, &points).as_bytes(),
        )?;
        write_atomic(&path, &buf)?;
        log::info!("extracted {} points from {}", records.len(), entry.path);
        Ok(ClipFeatures {
            entry: entry.clone(),
            key,
            records,
        })
    }

    /// Step 1 for every clip of the manifest, in manifest order.
    pub fn extract(&self, kind: FeatureKind) -> Result<Vec<ClipFeatures>> {
        let detector = self.config.detector_for(kind).clone();
        self.manifest
            .entries
            .par_iter()
            .map(|e| stage("extract", Some(&e.path), self.extract_one(e, &detector)))
            .collect()
    }

    /// Step 2: vocabulary sampled from training-split descriptors only.
    pub fn vocabulary(
        &self,
        kind: FeatureKind,
        clips: &[ClipFeatures],
    ) -> Result<(String, Vocabulary)> {
        let train: Vec<&ClipFeatures> = clips
            .iter()
            .filter(|c| c.entry.split == Split::Train)
            .collect();
        if train.is_empty() {
            return Err(
                Error::InvalidParameter("training split is empty".into()).in_stage("vocab", None)
            );
        }
        let mut parts: Vec<Vec<u8>> = vec![
            CACHE_VERSION.into(),
            b"vocab".to_vec(),
            kind.name().into(),
            self.config.vocab_size.to_le_bytes().to_vec(),
            self.config.seed.to_le_bytes().to_vec(),
        ];
        parts.extend(train.iter().map(|c| c.key.clone().into_bytes()));
        let key = sha_hex(&parts.iter().map(|p| p.as_slice()).collect::<Vec<_>>());
        let path = self.cache_path("vocab", &key, "stvv");
        let counter = &self.counters["vocab"];
        if path.exists() {
            if let Ok(v) = Vocabulary::read_binary(&fs::read(&path)?) {
                counter.record(true);
                return Ok((key, v));
            }
        }
        counter.record(false);
        let mut stream = Vec::new();
        for c in &train {
            stream.extend(stage("vocab", Some(&c.entry.path), c.features(kind))?);
        }
        let vocab = stage(
            "vocab",
            None,
            bof::build_vocabulary(stream, self.config.vocab_size, self.config.seed),
        )?;
        let mut buf = Vec::new();
        vocab.write_binary(&mut buf)?;
        stage("vocab", None, write_atomic(&path, &buf))?;
        Ok((key, vocab))
    }

    /// Step 3: histograms of every clip.
    pub fn encode(
        &self,
        kind: FeatureKind,
        clips: &[ClipFeatures],
        vocab_key: &str,
        vocab: &Vocabulary,
    ) -> Result<(String, Vec<BofHistogram>)> {
        let mut parts: Vec<Vec<u8>> = vec![
            CACHE_VERSION.into(),
            b"encode".to_vec(),
            kind.name().into(),
            vocab_key.as_bytes().to_vec(),
        ];
        for c in clips {
            parts.push(c.key.clone().into_bytes());
            parts.push(c.entry.label.clone().into_bytes());
        }
        let key = sha_hex(&parts.iter().map(|p| p.as_slice()).collect::<Vec<_>>());
        let path = self.cache_path("encode", &key, "bof.tsv");
        let counter = &self.counters["encode"];
        if path.exists() {
            if let Ok(h) = bof::parse_bof_tsv(&fs::read_to_string(&path)?) {
                if h.len() == clips.len() {
                    counter.record(true);
                    return Ok((key, h));
                }
            }
        }
        counter.record(false);
        let hists = clips
            .iter()
            .map(|c| {
                let feats = stage("encode", Some(&c.entry.path), c.features(kind))?;
                stage(
                    "encode",
                    Some(&c.entry.path),
                    bof::encode(
                        c.entry.path.clone(),
                        Some(c.entry.label.clone()),
                        &feats,
                        vocab,
                    ),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        stage(
            "encode",
            None,
            write_atomic(&path, bof::format_bof_tsv(&hists).as_bytes()),
        )?;
        Ok((key, hists))
    }

    fn inputs(
        &self,
        clips: &[ClipFeatures],
        hists: &[BofHistogram],
        split: Split,
    ) -> (Vec<Vec<f64>>, Vec<String>) {
        clips
            .iter()
            .zip(hists)
            .filter(|(c, _)| c.entry.split == split)
            .map(|(c, h)| (h.values(self.config.normalize), c.entry.label.clone()))
            .unzip()
    }

    /// Step 4: one-vs-one models on the training split.
    pub fn train(
        &self,
        clips: &[ClipFeatures],
        encode_key: &str,
        hists: &[BofHistogram],
    ) -> Result<(String, OvoModel)> {
        let cfg = &self.config;
        let key = sha_hex(&[
            CACHE_VERSION.as_bytes(),
            b"train",
            encode_key.as_bytes(),
            &cfg.c.to_le_bytes(),
            &cfg.cv_folds.to_le_bytes(),
            format!("{:?}", cfg.cv_grid).as_bytes(),
            &cfg.seed.to_le_bytes(),
            &[cfg.normalize as u8],
        ]);
        let path = self.cache_path("train", &key, "stvm");
        let counter = &self.counters["train"];
        if path.exists() {
            if let Ok(m) = OvoModel::read_binary(&fs::read(&path)?) {
                counter.record(true);
                return Ok((key, m));
            }
        }
        counter.record(false);
        let (x, y) = self.inputs(clips, hists, Split::Train);
        let c = if cfg.cv_folds >= 2 {
            let (c, scores) = stage(
                "train",
                None,
                classifier::select_c(&x, &y, &cfg.cv_grid, cfg.cv_folds, cfg.seed),
            )?;
            log::info!("cross-validation accuracies {scores:?}, chose C = {c}");
            c
        } else {
            cfg.c
        };
        let model = stage(
            "train",
            None,
            classifier::train_ovo(&x, &y, &SvmOptions::with_c(c)),
        )?;
        let mut buf = Vec::new();
        model.write_binary(&mut buf)?;
        stage("train", None, write_atomic(&path, &buf))?;
        Ok((key, model))
    }

    /// Step 5: report on the test split, written as text and TSV.
    pub fn evaluate(
        &self,
        kind: FeatureKind,
        model_key: &str,
        model: &OvoModel,
        clips: &[ClipFeatures],
        hists: &[BofHistogram],
    ) -> Result<(EvalReport, PathBuf)> {
        let (x, y) = self.inputs(clips, hists, Split::Test);
        if x.is_empty() {
            return Err(
                Error::InvalidParameter("test split is empty".into()).in_stage("evaluate", None)
            );
        }
        let mut parts: Vec<Vec<u8>> = vec![
            CACHE_VERSION.into(),
            b"evaluate".to_vec(),
            model_key.as_bytes().to_vec(),
            [self.config.normalize as u8].to_vec(),
        ];
        for (c, h) in clips.iter().zip(hists) {
            if c.entry.split == Split::Test {
                parts.push(c.entry.label.clone().into_bytes());
                parts.push(bof::format_bof_tsv(std::slice::from_ref(h)).into_bytes());
            }
        }
        let key = sha_hex(&parts.iter().map(|p| p.as_slice()).collect::<Vec<_>>());
        let path = self.cache_path("evaluate", &key, "report.tsv");
        let counter = &self.counters["evaluate"];
        let cached = path
            .exists()
            .then(|| fs::read_to_string(&path).ok())
            .flatten()
            .and_then(|t| EvalReport::parse_tsv(&t).ok());
        counter.record(cached.is_some());
        let report = match cached {
            Some(r) => r,
            None => {
                let r = stage("evaluate", None, classifier::evaluate(model, &x, &y))?;
                stage("evaluate", None, write_atomic(&path, r.to_tsv().as_bytes()))?;
                r
            }
        };
        let base = self.config.output.join(format!("report_{}", kind.name()));
        let txt = base.with_extension("txt");
        stage(
            "evaluate",
            None,
            write_atomic(&txt, report.to_text().as_bytes()),
        )?;
        stage(
            "evaluate",
            None,
            write_atomic(&base.with_extension("tsv"), report.to_tsv().as_bytes()),
        )?;
        Ok((report, txt))
    }

    /// Steps 1–5 for one kind.
    pub fn run_kind(&self, kind: FeatureKind) -> Result<KindResult> {
        let clips = self.extract(kind)?;
        let (vkey, vocab) = self.vocabulary(kind, &clips)?;
        let (ekey, hists) = self.encode(kind, &clips, &vkey, &vocab)?;
        let (mkey, model) = self.train(&clips, &ekey, &hists)?;
        let (report, report_path) = self.evaluate(kind, &mkey, &model, &clips, &hists)?;
        Ok(KindResult {
            kind,
            report,
            report_path,
            c: model.c,
        })
    }

    pub fn run(&self) -> Result<RunOutput> {
        if self.manifest.split(Split::Test).next().is_none() {
            return Err(
                Error::InvalidParameter("test split is empty".into()).in_stage("evaluate", None)
            );
        }
        let results = self
            .config
            .kinds
            .iter()
            .map(|&k| self.run_kind(k))
            .collect::<Result<Vec<_>>>()?;
        let runs: Vec<(&str, &EvalReport)> =
            results.iter().map(|r| (r.kind.name(), &r.report)).collect();
        let comparison = classifier::comparison_table(&runs);
        stage(
            "evaluate",
            None,
            write_atomic(
                &self.config.output.join("comparison.txt"),
                comparison.as_bytes(),
            ),
        )?;
        Ok(RunOutput {
            results,
            comparison,
            stats: self.stats(),
        })
    }
}

/// Convenience wrapper: load the manifest and run every configured kind.
pub fn run(config: PipelineConfig) -> Result<RunOutput> {
    Pipeline::new(config)?.run()
}
