//! Clip decoding and the on-disk dataset layout.
//!
//! Two clip formats are read: uncompressed YUV4MPEG2 files (4:2:0 and 4:4:4,
//! 8-bit) and directories of 8-bit raster frames sorted by file name. Every
//! channel is normalized to `[0, 1]`. A dataset is a `manifest.tsv` with one
//! `clip-path<TAB>label<TAB>split` line per clip, paths relative to the
//! manifest's directory.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{ColorType, ImageBuffer, Rgb};

use crate::{Dims, Error, Result, ScalarVolume};

/// BT.601 luma weights used by [`to_grayscale`].
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Frame file extensions accepted in an image-sequence directory.
pub const FRAME_EXTENSIONS: [&str; 7] = ["png", "jpg", "jpeg", "bmp", "ppm", "pgm", "pnm"];

/// An RGB image sequence with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    id: String,
    dims: Dims,
    rgb: Vec<[f64; 3]>,
    label: Option<String>,
}

impl Clip {
    /// Builds a clip from frame-major, row-major RGB samples.
    pub fn from_rgb(id: impl Into<String>, dims: Dims, rgb: Vec<[f64; 3]>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidClip(format!(
                "dimensions must be positive, got {dims:?}"
            )));
        }
        if rgb.len() != dims.len() {
            return Err(Error::InvalidClip(format!(
                "{dims:?} needs {} pixels, got {}",
                dims.len(),
                rgb.len()
            )));
        }
        if let Some(i) = rgb
            .iter()
            .position(|p| p.iter().any(|c| !(0.0..=1.0).contains(c)))
        {
            return Err(Error::InvalidClip(format!(
                "pixel {i} has a channel outside [0, 1]: {:?}",
                rgb[i]
            )));
        }
        Ok(Clip {
            id: id.into(),
            dims,
            rgb,
            label: None,
        })
    }

    /// Reassembles a clip from three channel planes of equal size.
    pub fn from_planes(
        id: impl Into<String>,
        r: &ScalarVolume,
        g: &ScalarVolume,
        b: &ScalarVolume,
    ) -> Result<Self> {
        if r.dims() != g.dims() || r.dims() != b.dims() {
            return Err(Error::InvalidClip("channel planes differ in size".into()));
        }
        let rgb = r
            .data()
            .iter()
            .zip(g.data())
            .zip(b.data())
            .map(|((&r, &g), &b)| [r, g, b])
            .collect();
        Clip::from_rgb(id, r.dims(), rgb)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.rgb
    }

    pub fn pixel(&self, x: usize, y: usize, t: usize) -> [f64; 3] {
        self.rgb[self.dims.index(x, y, t)]
    }
}

/// Input container format of a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipFormat {
    Y4m,
    ImageSequence,
}

impl ClipFormat {
    /// Directories are image sequences, `.y4m` files are YUV4MPEG2.
    pub fn detect(path: &Path) -> Result<Self> {
        if path.is_dir() {
            Ok(ClipFormat::ImageSequence)
        } else if path.is_file() {
            match path.extension().and_then(|e| e.to_str()) {
                Some(e) if e.eq_ignore_ascii_case("y4m") => Ok(ClipFormat::Y4m),
                _ => Err(Error::malformed(
                    "clip path",
                    format!("{} is neither a directory nor a .y4m file", path.display()),
                )),
            }
        } else {
            Err(Error::MissingPath(path.to_owned()))
        }
    }
}

/// Decodes a clip; its id is the path as given.
pub fn load_clip(path: &Path, format: ClipFormat) -> Result<Clip> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_owned()));
    }
    let id = path.display().to_string();
    match format {
        ClipFormat::Y4m => {
            let mut bytes = Vec::new();
            fs::File::open(path)?.read_to_end(&mut bytes)?;
            decode_y4m(&bytes, id)
        }
        ClipFormat::ImageSequence => load_image_sequence(path, id),
    }
}

/// Files of an image-sequence directory in decoding order.
pub fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingPath(dir.to_owned()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| FRAME_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
                    .unwrap_or(false)
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn load_image_sequence(dir: &Path, id: String) -> Result<Clip> {
    let files = frame_files(dir)?;
    if files.is_empty() {
        return Err(Error::malformed(
            "image sequence",
            format!("{} contains no frames", dir.display()),
        ));
    }
    let mut size: Option<(usize, usize)> = None;
    let mut rgb = Vec::new();
    for (i, file) in files.iter().enumerate() {
        let frame = i + 1;
        let img = image::open(file).map_err(|e| Error::Decode {
            frame,
            message: format!("{}: {e}", file.display()),
        })?;
        match img.color() {
            ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => {}
            other => {
                return Err(Error::UnsupportedPixelFormat {
                    frame,
                    format: format!("{other:?}"),
                })
            }
        }
        let w = img.width() as usize;
        let h = img.height() as usize;
        match size {
            None => size = Some((w, h)),
            Some((width, height)) if (width, height) != (w, h) => {
                return Err(Error::FrameDimensionMismatch {
                    frame,
                    width,
                    height,
                    got_width: w,
                    got_height: h,
                })
            }
            _ => {}
        }
        let img = img.to_rgb8();
        rgb.extend(img.pixels().map(|p| {
            [
                f64::from(p[0]) / 255.0,
                f64::from(p[1]) / 255.0,
                f64::from(p[2]) / 255.0,
            ]
        }));
    }
    let (w, h) = size.expect("at least one frame");
    Clip::from_rgb(id, Dims::new(w, h, files.len()), rgb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chroma {
    C420,
    C444,
}

/// Decodes an in-memory YUV4MPEG2 stream.
///
/// Limited-range BT.601 is assumed unless the header carries
/// `XCOLORRANGE=FULL`. 4:2:0 chroma is upsampled by pixel replication.
pub fn decode_y4m(bytes: &[u8], id: impl Into<String>) -> Result<Clip> {
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::malformed("y4m header", "missing newline"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::malformed("y4m header", "not ASCII"))?;
    let mut tokens = header.split(' ');
    if tokens.next() != Some("YUV4MPEG2") {
        return Err(Error::malformed(
            "y4m header",
            "missing YUV4MPEG2 signature",
        ));
    }
    let mut width = None;
    let mut height = None;
    let mut chroma = Chroma::C420;
    let mut full_range = false;
    for tok in tokens.filter(|t| !t.is_empty()) {
        let (tag, val) = tok.split_at(1);
        match tag {
            "W" => width = val.parse::<usize>().ok(),
            "H" => height = val.parse::<usize>().ok(),
            "C" => {
                chroma = match val {
                    "420" | "420jpeg" | "420paldv" | "420mpeg2" => Chroma::C420,
                    "444" => Chroma::C444,
                    other => {
                        return Err(Error::UnsupportedPixelFormat {
                            frame: 1,
                            format: format!("C{other}"),
                        })
                    }
                }
            }
            "X" if val == "COLORRANGE=FULL" => full_range = true,
            _ => {}
        }
    }
    let (w, h) = match (width, height) {
        (Some(w), Some(h)) if w > 0 && h > 0 => (w, h),
        _ => return Err(Error::malformed("y4m header", "missing or zero W/H")),
    };
    let (cw, ch) = match chroma {
        Chroma::C420 => (w.div_ceil(2), h.div_ceil(2)),
        Chroma::C444 => (w, h),
    };
    let frame_bytes = w * h + 2 * cw * ch;

    let mut pos = header_end + 1;
    let mut rgb = Vec::new();
    let mut frames = 0;
    while pos < bytes.len() {
        let frame = frames + 1;
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| pos + p)
            .ok_or_else(|| Error::Decode {
                frame,
                message: "missing FRAME header".into(),
            })?;
        if !bytes[pos..line_end].starts_with(b"FRAME") {
            return Err(Error::Decode {
                frame,
                message: "expected FRAME marker".into(),
            });
        }
        pos = line_end + 1;
        if bytes.len() < pos + frame_bytes {
            return Err(Error::Decode {
                frame,
                message: format!(
                    "truncated: need {frame_bytes} bytes, have {}",
                    bytes.len() - pos
                ),
            });
        }
        let luma = &bytes[pos..pos + w * h];
        let cb = &bytes[pos + w * h..pos + w * h + cw * ch];
        let cr = &bytes[pos + w * h + cw * ch..pos + frame_bytes];
        for y in 0..h {
            for x in 0..w {
                let ci = match chroma {
                    Chroma::C420 => (y / 2) * cw + x / 2,
                    Chroma::C444 => y * cw + x,
                };
                rgb.push(ycbcr_to_rgb(luma[y * w + x], cb[ci], cr[ci], full_range));
            }
        }
        pos += frame_bytes;
        frames += 1;
    }
    if frames == 0 {
        return Err(Error::malformed("y4m stream", "no frames"));
    }
    Clip::from_rgb(id, Dims::new(w, h, frames), rgb)
}

fn ycbcr_to_rgb(y: u8, cb: u8, cr: u8, full_range: bool) -> [f64; 3] {
    let (y, cb, cr) = if full_range {
        (
            f64::from(y) / 255.0,
            (f64::from(cb) - 128.0) / 255.0,
            (f64::from(cr) - 128.0) / 255.0,
        )
    } else {
        (
            (f64::from(y) - 16.0) / 219.0,
            (f64::from(cb) - 128.0) / 224.0,
            (f64::from(cr) - 128.0) / 224.0,
        )
    };
    let [kr, kg, kb] = LUMA_WEIGHTS;
    let r = y + 2.0 * (1.0 - kr) * cr;
    let b = y + 2.0 * (1.0 - kb) * cb;
    let g = (y - kr * r - kb * b) / kg;
    [r.clamp(0.0, 1.0), g.clamp(0.0, 1.0), b.clamp(0.0, 1.0)]
}

/// Per-pixel BT.601 luminance.
pub fn to_grayscale(clip: &Clip) -> ScalarVolume {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let data = clip
        .pixels()
        .iter()
        .map(|&[r, g, b]| wr * r + wg * g + wb * b)
        .collect();
    ScalarVolume::from_vec(clip.dims(), data).expect("clip dims are valid")
}

/// Splits a clip into its R, G and B planes.
pub fn rgb_planes(clip: &Clip) -> [ScalarVolume; 3] {
    let plane = |c: usize| {
        ScalarVolume::from_vec(clip.dims(), clip.pixels().iter().map(|p| p[c]).collect())
            .expect("clip dims are valid")
    };
    [plane(0), plane(1), plane(2)]
}

/// Writes a clip as `frame_00000.png`, `frame_00001.png`, … (8-bit RGB).
pub fn write_image_sequence(dir: &Path, clip: &Clip) -> Result<()> {
    fs::create_dir_all(dir)?;
    let Dims {
        width,
        height,
        frames,
    } = clip.dims();
    for t in 0..frames {
        let img: ImageBuffer<Rgb<u8>, Vec<u8>> =
            ImageBuffer::from_fn(width as u32, height as u32, |x, y| {
                let p = clip.pixel(x as usize, y as usize, t);
                Rgb(p.map(|c| (c * 255.0).round() as u8))
            });
        img.save(dir.join(format!("frame_{t:05}.png")))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::malformed(
                "manifest",
                format!("unknown split {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Clip path as written in the manifest (relative to its directory).
    pub path: String,
    pub label: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingPath(path.to_owned()));
        }
        let text = fs::read_to_string(path)?;
        let root = path
            .parent()
            .map(Path::to_owned)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Manifest {
            root,
            entries: parse_manifest(&text)?,
        })
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Loads the clip of an entry, labelled and identified by its manifest path.
    pub fn load_clip(&self, entry: &ManifestEntry) -> Result<Clip> {
        let path = self.resolve(entry);
        let format = ClipFormat::detect(&path)?;
        Ok(load_clip(&path, format)?
            .with_id(entry.path.clone())
            .with_label(entry.label.clone()))
    }
}

/// Parses manifest text; blank lines and `#` comments are skipped.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::malformed(
                "manifest",
                format!("line {}: expected 3 tab-separated fields", n + 1),
            ));
        }
        entries.push(ManifestEntry {
            path: fields[0].to_owned(),
            label: fields[1].to_owned(),
            split: fields[2].parse()?,
        });
    }
    Ok(entries)
}

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    entries
        .iter()
        .map(|e| format!("{}\t{}\t{}\n", e.path, e.label, e.split))
        .collect()
}
