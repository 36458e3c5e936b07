//! On-disk formats.
//!
//! A dataset root holds `manifest.json` and one `seq_{index:06}` directory per
//! sequence with `frame_{t:03}.png` (8-bit RGB), `mask_{t:03}.png` (8-bit
//! grayscale label map) and `meta.json`. A prediction root mirrors it with
//! `pred_{t:03}.png`, optional `recon_{t:03}.png` and `pred_meta.json` per
//! sequence. All JSON is written with a fixed key order.
//!
//! Decoders take raw bytes, enforce size limits, and return errors rather
//! than panicking on malformed input.

use std::fmt::Write as _;
use std::io::Cursor;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::DatasetConfig;
use crate::metrics::{Metrics, MetricsReport};
use crate::raster::{visibility_table, Frame, LabelMap, VideoSample};
use crate::scene::SceneSpec;
use crate::trajectory::CrossingRecord;
use crate::{Error, Result, GENERATOR_NAME, GENERATOR_VERSION};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const META_FILE: &str = "meta.json";
pub const PRED_META_FILE: &str = "pred_meta.json";

/// Largest accepted image side.
pub const MAX_IMAGE_SIDE: u32 = 4096;
/// Largest accepted sequence length.
pub const MAX_SEQUENCE_LENGTH: usize = 100_000;
const PNG_MEMORY_LIMIT: usize = 64 << 20;

pub fn sequence_dir(index: usize) -> String {
    format!("seq_{index:06}")
}

pub fn frame_file(t: usize) -> String {
    format!("frame_{t:03}.png")
}

pub fn mask_file(t: usize) -> String {
    format!("mask_{t:03}.png")
}

pub fn pred_file(t: usize) -> String {
    format!("pred_{t:03}.png")
}

pub fn recon_file(t: usize) -> String {
    format!("recon_{t:03}.png")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub name: String,
    pub version: String,
}

impl GeneratorInfo {
    pub fn current() -> Self {
        GeneratorInfo {
            name: GENERATOR_NAME.into(),
            version: GENERATOR_VERSION.into(),
        }
    }
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub format_version: u32,
    pub generator: GeneratorInfo,
    pub index: usize,
    pub seed: u64,
    pub config_hash: String,
    pub length: usize,
    pub height: usize,
    pub width: usize,
    /// Labels that may appear in the masks besides 0.
    pub object_ids: Vec<u8>,
    #[serde(default)]
    pub crossings: Vec<CrossingRecord>,
    /// `visibility[k][t]`: object `k` has a nonempty mask in frame `t`.
    pub visibility: Vec<Vec<bool>>,
    pub scene: SceneSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub dir: String,
    pub length: usize,
    pub height: usize,
    pub width: usize,
    pub num_objects: usize,
    /// Hex SHA-256 over dimensions, frame pixels and mask pixels.
    pub digest: String,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub generator: GeneratorInfo,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<DatasetConfig>,
    pub num_sequences: usize,
    pub sequences: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(config: Option<&DatasetConfig>, mut sequences: Vec<ManifestEntry>) -> Self {
        sequences.sort_by_key(|e| e.index);
        Manifest {
            format_version: FORMAT_VERSION,
            generator: GeneratorInfo::current(),
            config_hash: config.map(DatasetConfig::hash).unwrap_or_default(),
            config: config.cloned(),
            num_sequences: sequences.len(),
            sequences,
        }
    }

    /// Digest over all per-sequence digests.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.sequences {
            h.update(e.digest.as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::validation(MANIFEST_FILE, m));
        if self.format_version != FORMAT_VERSION {
            return fail(format!("unsupported format version {}", self.format_version));
        }
        if self.num_sequences != self.sequences.len() {
            return fail(format!(
                "num_sequences is {} but {} entries are listed",
                self.num_sequences,
                self.sequences.len()
            ));
        }
        for (pos, e) in self.sequences.iter().enumerate() {
            if pos > 0 && self.sequences[pos - 1].index >= e.index {
                return fail("sequence entries are not in increasing index order".into());
            }
            if e.dir != sequence_dir(e.index) {
                return fail(format!("entry {} names directory {:?}", e.index, e.dir));
            }
            if e.length == 0 || e.length > MAX_SEQUENCE_LENGTH {
                return fail(format!("{}: length {} out of range", e.dir, e.length));
            }
            if e.height == 0 || e.width == 0 || e.height > MAX_IMAGE_SIDE as usize || e.width > MAX_IMAGE_SIDE as usize
            {
                return fail(format!("{}: size {}x{} out of range", e.dir, e.width, e.height));
            }
            if e.num_objects > 255 {
                return fail(format!("{}: {} objects exceed the 8-bit label range", e.dir, e.num_objects));
            }
        }
        Ok(())
    }
}

/// Contents of `pred_meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMeta {
    pub producer: String,
    /// Labels of masks the producer assigned to the background.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub background_ids: Vec<u8>,
    /// Free-form producer parameters.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl PredictionMeta {
    pub fn new(producer: impl Into<String>) -> Self {
        PredictionMeta {
            producer: producer.into(),
            background_ids: Vec::new(),
            params: serde_json::Map::new(),
        }
    }
}

/// Predictions for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub index: usize,
    pub labels: Vec<LabelMap>,
    pub reconstructions: Option<Vec<Frame>>,
    pub meta: PredictionMeta,
}

// ---------------------------------------------------------------- PNG

fn png_error(what: &'static str) -> impl Fn(png::DecodingError) -> Error {
    move |e| Error::Format {
        what,
        message: e.to_string(),
    }
}

fn decode_png(bytes: &[u8], what: &'static str, color: png::ColorType) -> Result<(usize, usize, Vec<u8>)> {
    let mut decoder = png::Decoder::new_with_limits(
        Cursor::new(bytes),
        png::Limits {
            bytes: PNG_MEMORY_LIMIT,
        },
    );
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_error(what))?;
    let info = reader.info();
    let (w, h) = (info.width, info.height);
    let fmt_err = |message: String| Error::Format { what, message };
    if w == 0 || h == 0 || w > MAX_IMAGE_SIDE || h > MAX_IMAGE_SIDE {
        return Err(fmt_err(format!("image size {w}x{h} out of range")));
    }
    if info.bit_depth != png::BitDepth::Eight || info.color_type != color {
        return Err(fmt_err(format!(
            "expected 8-bit {:?}, found {:?}-bit {:?}",
            color, info.bit_depth as u8, info.color_type
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| fmt_err("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let out = reader.next_frame(&mut buf).map_err(png_error(what))?;
    // Reads through IEND so truncated files are rejected.
    reader.finish().map_err(png_error(what))?;
    let (w, h) = (w as usize, h as usize);
    let row = w * color.samples();
    if out.line_size != row {
        return Err(fmt_err("unexpected row layout".into()));
    }
    buf.truncate(row * h);
    if buf.len() != row * h {
        return Err(fmt_err("truncated image data".into()));
    }
    Ok((h, w, buf))
}

fn encode_png(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Balanced);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(data).expect("in-memory PNG data");
        w.finish().expect("in-memory PNG finish");
    }
    out
}

pub fn encode_label_png(map: &LabelMap) -> Vec<u8> {
    encode_png(map.width(), map.height(), png::ColorType::Grayscale, map.as_raw())
}

pub fn encode_frame_png(frame: &Frame) -> Vec<u8> {
    encode_png(frame.width(), frame.height(), png::ColorType::Rgb, frame.as_raw())
}

/// Decodes an 8-bit grayscale PNG into a label map. Any other pixel format
/// (palette, 16-bit, color, alpha) is rejected: label maps must be hard
/// assignments with one id per pixel.
pub fn decode_label_png(bytes: &[u8]) -> Result<LabelMap> {
    let (h, w, data) = decode_png(bytes, "label map PNG", png::ColorType::Grayscale)?;
    LabelMap::from_raw(h, w, data)
}

/// Decodes an 8-bit RGB PNG.
pub fn decode_frame_png(bytes: &[u8]) -> Result<Frame> {
    let (h, w, data) = decode_png(bytes, "frame PNG", png::ColorType::Rgb)?;
    Frame::from_raw(h, w, data)
}

// ---------------------------------------------------------------- JSON

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("value serializes");
    v.push(b'\n');
    v
}

fn parse_json<'a, T: Deserialize<'a>>(bytes: &'a [u8], what: &'static str) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::Format {
        what,
        message: e.to_string(),
    })
}

pub fn parse_manifest(bytes: &[u8]) -> Result<Manifest> {
    let m: Manifest = parse_json(bytes, "manifest")?;
    m.validate()?;
    Ok(m)
}

pub fn parse_meta(bytes: &[u8]) -> Result<SequenceMeta> {
    parse_json(bytes, "sequence metadata")
}

pub fn parse_pred_meta(bytes: &[u8]) -> Result<PredictionMeta> {
    parse_json(bytes, "prediction metadata")
}

pub fn parse_report(bytes: &[u8]) -> Result<MetricsReport> {
    parse_json(bytes, "report")
}

// ---------------------------------------------------------------- files

fn read_file(root: &Path, rel: &str) -> Result<Vec<u8>> {
    let path = root.join(rel);
    std::fs::read(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::validation(rel, "file is missing")
        } else {
            Error::io(path, e)
        }
    })
}

fn write_file(root: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
    let path = root.join(rel);
    std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Attaches the file's relative path to decoding errors.
fn in_file<T>(rel: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Validation { .. } | Error::Io { .. } => e,
        other => Error::validation(rel, other.to_string()),
    })
}

/// SHA-256 over the dimensions and all pixels of a sequence.
pub fn sample_digest(frames: &[Frame], masks: &[LabelMap]) -> String {
    let mut h = Sha256::new();
    h.update(b"objmot-sequence\0");
    let (height, width) = frames.first().map_or((0, 0), |f| (f.height(), f.width()));
    for v in [height, width, frames.len(), masks.len()] {
        h.update((v as u64).to_le_bytes());
    }
    for f in frames {
        h.update(f.as_raw());
    }
    for m in masks {
        h.update(m.as_raw());
    }
    hex::encode(h.finalize())
}

/// Writes one sequence directory. Distinct indices can be written
/// concurrently.
pub fn write_sequence(root: &Path, index: usize, sample: &VideoSample, config_hash: &str) -> Result<ManifestEntry> {
    if sample.is_empty() || sample.frames.len() != sample.gt.len() {
        return Err(Error::invalid(format!(
            "sequence {index} has {} frames and {} masks",
            sample.frames.len(),
            sample.gt.len()
        )));
    }
    let dir = sequence_dir(index);
    create_dir(&root.join(&dir))?;
    for (t, (f, m)) in sample.frames.iter().zip(&sample.gt).enumerate() {
        write_file(root, &format!("{dir}/{}", frame_file(t)), &encode_frame_png(f))?;
        write_file(root, &format!("{dir}/{}", mask_file(t)), &encode_label_png(m))?;
    }
    let n = sample.scene.objects.len();
    let meta = SequenceMeta {
        format_version: FORMAT_VERSION,
        generator: GeneratorInfo::current(),
        index,
        seed: sample.seed,
        config_hash: config_hash.to_string(),
        length: sample.len(),
        height: sample.height(),
        width: sample.width(),
        object_ids: (0..n).map(SceneSpec::object_id).collect(),
        crossings: sample.scene.crossing.iter().cloned().collect(),
        visibility: sample.visibility.clone(),
        scene: sample.scene.clone(),
    };
    write_file(root, &format!("{dir}/{META_FILE}"), &to_json(&meta))?;
    Ok(ManifestEntry {
        index,
        dir,
        length: sample.len(),
        height: sample.height(),
        width: sample.width(),
        num_objects: n,
        digest: sample_digest(&sample.frames, &sample.gt),
    })
}

pub fn write_manifest(root: &Path, manifest: &Manifest) -> Result<()> {
    create_dir(root)?;
    write_file(root, MANIFEST_FILE, &to_json(manifest))
}

/// Writes every sample in order, then the manifest.
pub fn write_dataset(
    root: &Path,
    config: Option<&DatasetConfig>,
    samples: impl IntoIterator<Item = Result<VideoSample>>,
) -> Result<Manifest> {
    create_dir(root)?;
    let hash = config.map(DatasetConfig::hash).unwrap_or_default();
    let mut entries = Vec::new();
    for (i, s) in samples.into_iter().enumerate() {
        entries.push(write_sequence(root, i, &s?, &hash)?);
    }
    let manifest = Manifest::new(config, entries);
    write_manifest(root, &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(root: &Path) -> Result<Manifest> {
    let bytes = read_file(root, MANIFEST_FILE)?;
    in_file(MANIFEST_FILE, parse_manifest(&bytes))
}

/// Reads and validates one sequence against its manifest entry.
pub fn read_sequence(root: &Path, entry: &ManifestEntry) -> Result<VideoSample> {
    let dir = &entry.dir;
    let meta_rel = format!("{dir}/{META_FILE}");
    let meta = in_file(&meta_rel, parse_meta(&read_file(root, &meta_rel)?))?;
    let fail = |m: String| Err(Error::validation(meta_rel.clone(), m));
    if meta.format_version != FORMAT_VERSION {
        return fail(format!("unsupported format version {}", meta.format_version));
    }
    if (meta.index, meta.length, meta.height, meta.width) != (entry.index, entry.length, entry.height, entry.width) {
        return fail("index, length or size disagrees with the manifest".into());
    }
    let n = meta.scene.objects.len();
    if n != entry.num_objects || meta.object_ids != (0..n).map(SceneSpec::object_id).collect::<Vec<_>>() {
        return fail("object ids disagree with the scene".into());
    }
    if meta.crossings != meta.scene.crossing.iter().cloned().collect::<Vec<_>>() {
        return fail("crossing records disagree with the scene".into());
    }

    let mut frames = Vec::with_capacity(entry.length);
    let mut gt = Vec::with_capacity(entry.length);
    for t in 0..entry.length {
        let rel = format!("{dir}/{}", frame_file(t));
        let f = in_file(&rel, decode_frame_png(&read_file(root, &rel)?))?;
        check_dims(&rel, f.height(), f.width(), entry)?;
        frames.push(f);

        let rel = format!("{dir}/{}", mask_file(t));
        let m = in_file(&rel, decode_label_png(&read_file(root, &rel)?))?;
        check_dims(&rel, m.height(), m.width(), entry)?;
        if let Some(&bad) = m.present_labels().iter().find(|l| !meta.object_ids.contains(l)) {
            return Err(Error::validation(rel, format!("label {bad} is not an object id")));
        }
        gt.push(m);
    }
    let extra = format!("{dir}/{}", frame_file(entry.length));
    if root.join(&extra).exists() {
        return Err(Error::validation(extra, "frame beyond the recorded length"));
    }
    if visibility_table(n, &gt) != meta.visibility {
        return fail("visibility table disagrees with the masks".into());
    }
    if sample_digest(&frames, &gt) != entry.digest {
        return Err(Error::validation(dir.clone(), "content digest mismatch"));
    }
    Ok(VideoSample {
        frames,
        gt,
        visibility: meta.visibility,
        scene: meta.scene,
        seed: meta.seed,
    })
}

fn check_dims(rel: &str, h: usize, w: usize, entry: &ManifestEntry) -> Result<()> {
    if (h, w) != (entry.height, entry.width) {
        return Err(Error::validation(
            rel,
            format!("size {w}x{h} differs from the dataset's {}x{}", entry.width, entry.height),
        ));
    }
    Ok(())
}

/// Manifest plus a lazy iterator over sequences in index order.
pub fn read_dataset(root: &Path) -> Result<(Manifest, impl Iterator<Item = Result<VideoSample>> + '_)> {
    let manifest = read_manifest(root)?;
    let entries = manifest.sequences.clone();
    Ok((manifest, entries.into_iter().map(move |e| read_sequence(root, &e))))
}

/// Writes one sequence of predictions under `root`.
pub fn write_predictions(root: &Path, set: &PredictionSet) -> Result<()> {
    if let Some(r) = &set.reconstructions {
        if r.len() != set.labels.len() {
            return Err(Error::invalid(format!(
                "{} reconstructions for {} label maps",
                r.len(),
                set.labels.len()
            )));
        }
    }
    let dir = sequence_dir(set.index);
    create_dir(&root.join(&dir))?;
    for (t, m) in set.labels.iter().enumerate() {
        write_file(root, &format!("{dir}/{}", pred_file(t)), &encode_label_png(m))?;
    }
    for (t, f) in set.reconstructions.iter().flatten().enumerate() {
        write_file(root, &format!("{dir}/{}", recon_file(t)), &encode_frame_png(f))?;
    }
    write_file(root, &format!("{dir}/{PRED_META_FILE}"), &to_json(&set.meta))
}

/// Reads and validates the predictions for one dataset sequence. Any label
/// value is allowed; labels are hypothesis ids.
pub fn read_prediction_sequence(root: &Path, entry: &ManifestEntry) -> Result<PredictionSet> {
    let dir = &entry.dir;
    let meta_rel = format!("{dir}/{PRED_META_FILE}");
    let meta = in_file(&meta_rel, parse_pred_meta(&read_file(root, &meta_rel)?))?;
    let mut labels = Vec::with_capacity(entry.length);
    for t in 0..entry.length {
        let rel = format!("{dir}/{}", pred_file(t));
        let m = in_file(&rel, decode_label_png(&read_file(root, &rel)?))?;
        check_dims(&rel, m.height(), m.width(), entry)?;
        labels.push(m);
    }
    let extra = format!("{dir}/{}", pred_file(entry.length));
    if root.join(&extra).exists() {
        return Err(Error::validation(extra, "prediction beyond the sequence length"));
    }
    let reconstructions = if root.join(dir).join(recon_file(0)).exists() {
        let mut out = Vec::with_capacity(entry.length);
        for t in 0..entry.length {
            let rel = format!("{dir}/{}", recon_file(t));
            let f = in_file(&rel, decode_frame_png(&read_file(root, &rel)?))?;
            check_dims(&rel, f.height(), f.width(), entry)?;
            out.push(f);
        }
        Some(out)
    } else {
        let stray = (1..entry.length).find(|&t| root.join(dir).join(recon_file(t)).exists());
        if let Some(t) = stray {
            return Err(Error::validation(
                format!("{dir}/{}", recon_file(0)),
                format!("file is missing but {} exists", recon_file(t)),
            ));
        }
        None
    };
    Ok(PredictionSet {
        index: entry.index,
        labels,
        reconstructions,
        meta,
    })
}

/// Lazy iterator over the predictions for every sequence in `manifest`.
pub fn read_predictions<'a>(
    root: &'a Path,
    manifest: &'a Manifest,
) -> impl Iterator<Item = Result<PredictionSet>> + 'a {
    manifest
        .sequences
        .iter()
        .map(move |e| read_prediction_sequence(root, e))
}

// ---------------------------------------------------------------- reports

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::invalid(format!("unknown report format {other:?}"))),
        }
    }
}

/// Marker for an undefined metric in CSV.
pub const CSV_UNAVAILABLE: &str = "NA";
/// Marker for an undefined metric in markdown.
pub const MARKDOWN_UNAVAILABLE: &str = "n/a";

const CSV_HEADER: &str = "group,mota,motp,md,mt,match,miss,id_switches,fps,mse,\
sequences,objects,occurrences,matches,misses,id_switch_count,false_positives";

fn csv_value(v: Option<f64>) -> String {
    // `{:?}` prints the shortest string that parses back to the same f64.
    v.map_or_else(|| CSV_UNAVAILABLE.to_string(), |x| format!("{x:?}"))
}

fn csv_row(out: &mut String, group: &str, m: &Metrics) {
    let c = &m.counts;
    let values = [
        m.mota, m.motp, m.md, m.mt, m.match_frac, m.miss_frac, m.idsw_frac, m.fp_frac, m.mse,
    ]
    .map(csv_value)
    .join(",");
    let _ = writeln!(
        out,
        "{group},{values},{},{},{},{},{},{},{}",
        c.sequences, c.objects, c.occurrences, c.matches, c.misses, c.id_switches, c.false_positives
    );
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| MARKDOWN_UNAVAILABLE.to_string(), |x| format!("{:.1}", 100.0 * x))
}

fn markdown_row(out: &mut String, group: &str, m: &Metrics) {
    let mse = m
        .mse
        .map_or_else(|| MARKDOWN_UNAVAILABLE.to_string(), |x| format!("{x:.4}"));
    let _ = writeln!(
        out,
        "| {group} | {} | {} | {} | {} | {} | {} | {} | {} | {mse} |",
        pct(m.mota),
        pct(m.motp),
        pct(m.md),
        pct(m.mt),
        pct(m.match_frac),
        pct(m.miss_frac),
        pct(m.idsw_frac),
        pct(m.fp_frac),
    );
}

/// Renders a report. JSON and CSV keep full precision; markdown shows
/// percentages with one decimal.
pub fn write_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => String::from_utf8(to_json(report)).expect("JSON is UTF-8"),
        ReportFormat::Csv => {
            let mut out = format!("{CSV_HEADER}\n");
            csv_row(&mut out, "all", &report.overall);
            for (k, m) in &report.breakdown {
                csv_row(&mut out, &format!("objects={k}"), m);
            }
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::from(
                "| Objects | MOTA ↑ | MOTP ↑ | MD ↑ | MT ↑ | Match ↑ | Miss ↓ | ID S. ↓ | FPs ↓ | MSE ↓ |\n\
                 |---|---|---|---|---|---|---|---|---|---|\n",
            );
            markdown_row(&mut out, "all", &report.overall);
            for (k, m) in &report.breakdown {
                markdown_row(&mut out, &k.to_string(), m);
            }
            out
        }
    }
}
