//! Rendering of scenes into RGB frames and instance label maps.
//!
//! Pixels are sampled at their centers: pixel `(x, y)` covers the continuous
//! point `(x + 0.5, y + 0.5)`. There is no anti-aliasing, so every pixel of a
//! label map belongs to exactly one object or to the background, and frame
//! colors agree with the label map pixel for pixel.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::scene::{sprite_extent, SceneSpec, Shape};
use crate::trajectory::Point;
use crate::{Error, Result};

/// Binary mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(height: usize, width: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::invalid(format!(
                "mask has {} bits, expected {height}x{width}",
                bits.len()
            )));
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_shape(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Per-pixel instance labels; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        LabelMap {
            width,
            height,
            labels: vec![0; width * height],
        }
    }

    pub fn from_raw(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::invalid(format!(
                "label map has {} values, expected {height}x{width}",
                labels.len()
            )));
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        self.labels[y * self.width + x] = label;
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.labels
    }

    pub fn as_raw_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    /// Nonzero labels present in the map.
    pub fn present_labels(&self) -> BTreeSet<u8> {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[usize::from(l)] = true;
        }
        (1..=255u8).filter(|&l| seen[usize::from(l)]).collect()
    }

    pub fn contains(&self, label: u8) -> bool {
        self.labels.contains(&label)
    }

    pub fn mask(&self, label: u8) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == label).collect(),
        }
    }

    /// One mask per nonzero label.
    pub fn masks(&self) -> BTreeMap<u8, Mask> {
        self.present_labels()
            .into_iter()
            .map(|l| (l, self.mask(l)))
            .collect()
    }
}

/// 8-bit RGB image, row-major interleaved. Channel value `v` stands for
/// intensity `v / 255` in [0, 1].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn uniform(height: usize, width: usize, color: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&color);
        }
        Frame {
            width,
            height,
            data,
        }
    }

    pub fn from_raw(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "frame has {} bytes, expected {height}x{width}x3",
                data.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&c);
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    /// Channel values scaled to [0, 1].
    pub fn to_unit(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v) / 255.0).collect()
    }
}

/// A rendered video with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSample {
    pub frames: Vec<Frame>,
    pub gt: Vec<LabelMap>,
    /// `visibility[k][t]`: object `k` has a nonempty mask in frame `t`.
    pub visibility: Vec<Vec<bool>>,
    pub scene: SceneSpec,
    pub seed: u64,
}

impl VideoSample {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn height(&self) -> usize {
        self.frames.first().map_or(self.scene.height(), Frame::height)
    }

    pub fn width(&self) -> usize {
        self.frames.first().map_or(self.scene.width(), Frame::width)
    }

    /// Downsamples frames and labels by `factor`, recomputing visibility.
    pub fn downsample(&self, factor: usize) -> Result<VideoSample> {
        let frames = self
            .frames
            .iter()
            .map(|f| downsample_frame(f, factor))
            .collect::<Result<Vec<_>>>()?;
        let gt = self
            .gt
            .iter()
            .map(|m| downsample_labels(m, factor, |l| self.scene.depth_of_label(l)))
            .collect::<Result<Vec<_>>>()?;
        let visibility = visibility_table(self.scene.objects.len(), &gt);
        Ok(VideoSample {
            frames,
            gt,
            visibility,
            scene: self.scene.clone(),
            seed: self.seed,
        })
    }
}

pub(crate) fn visibility_table(n_objects: usize, gt: &[LabelMap]) -> Vec<Vec<bool>> {
    let present: Vec<BTreeSet<u8>> = gt.iter().map(LabelMap::present_labels).collect();
    (0..n_objects)
        .map(|k| {
            let id = SceneSpec::object_id(k);
            present.iter().map(|p| p.contains(&id)).collect()
        })
        .collect()
}

/// Orientation reduced by the shape's rotational symmetry period.
fn canonical_orientation(shape: Shape, orientation: f64) -> f64 {
    match shape {
        Shape::Circle => 0.0,
        Shape::Square => orientation.rem_euclid(FRAC_PI_2),
        Shape::Ellipse => orientation.rem_euclid(PI),
        Shape::Heart | Shape::Triangle => orientation.rem_euclid(2.0 * PI),
    }
}

/// Horizontal and vertical extent of the implicit heart curve.
const HEART_WIDTH: f64 = 2.28;
const HEART_Y_CENTER: f64 = 0.125;

/// Point-in-shape test in sprite-local coordinates (x right, y down),
/// centered on the sprite's centroid.
fn inside(shape: Shape, u: f64, v: f64, extent: f64) -> bool {
    let h = extent / 2.0;
    match shape {
        Shape::Square => (-h..h).contains(&u) && (-h..h).contains(&v),
        Shape::Circle => u * u + v * v <= h * h,
        Shape::Ellipse => {
            let (a, b) = (h, h / 2.0);
            (u / a).powi(2) + (v / b).powi(2) <= 1.0
        }
        Shape::Triangle => (-h..h).contains(&v) && u.abs() <= (v + h) / 2.0,
        Shape::Heart => {
            let s = HEART_WIDTH / extent;
            let x = u * s;
            let y = -v * s + HEART_Y_CENTER;
            let r = x * x + y * y - 1.0;
            r * r * r - x * x * y * y * y <= 0.0
        }
    }
}

/// Binary mask of one sprite on a `(height, width)` canvas. The sprite's
/// extent is taken from `scale_index` relative to the canvas width.
pub fn rasterize_sprite(
    shape: Shape,
    scale_index: u8,
    orientation: f64,
    centroid: Point,
    canvas: (usize, usize),
) -> Mask {
    let (height, width) = canvas;
    let mut mask = Mask::empty(height, width);
    for_each_covered(shape, scale_index, orientation, centroid, canvas, |x, y| {
        mask.set(x, y, true)
    });
    mask
}

fn for_each_covered(
    shape: Shape,
    scale_index: u8,
    orientation: f64,
    centroid: Point,
    canvas: (usize, usize),
    f: impl FnMut(usize, usize),
) {
    let extent = sprite_extent(scale_index, canvas.1);
    cover(shape, extent, orientation, centroid, canvas, f);
}

fn cover(
    shape: Shape,
    extent: f64,
    orientation: f64,
    centroid: Point,
    (height, width): (usize, usize),
    mut f: impl FnMut(usize, usize),
) {
    let theta = canonical_orientation(shape, orientation);
    let (sin, cos) = theta.sin_cos();
    let reach = 0.75 * extent + 1.0;
    let span = |c: f64, n: usize| {
        let lo = (c - reach).floor().max(0.0);
        let hi = (c + reach).ceil().min(n as f64);
        if !(lo < hi) {
            return 0..0;
        }
        lo as usize..hi as usize
    };
    for y in span(centroid.y, height) {
        let dy = y as f64 + 0.5 - centroid.y;
        for x in span(centroid.x, width) {
            let dx = x as f64 + 0.5 - centroid.x;
            let u = cos * dx + sin * dy;
            let v = -sin * dx + cos * dy;
            if inside(shape, u, v, extent) {
                f(x, y);
            }
        }
    }
}

/// Pixel count of a sprite rendered unclipped, centered on a pixel corner.
/// The extent is the one used on a canvas `canvas_width` wide.
pub fn sprite_area(shape: Shape, scale_index: u8, orientation: f64, canvas_width: usize) -> usize {
    let extent = sprite_extent(scale_index, canvas_width);
    let side = (2.0 * extent).ceil() as usize + 4;
    let c = (side / 2) as f64;
    let mut n = 0;
    cover(shape, extent, orientation, Point::new(c, c), (side, side), |_, _| n += 1);
    n
}

/// Frame `t` of a scene: objects painted back to front by depth rank.
pub fn compose_frame(scene: &SceneSpec, t: usize) -> (Frame, LabelMap) {
    let (height, width) = scene.canvas;
    let mut frame = Frame::uniform(height, width, scene.background_color.to_u8());
    let mut labels = LabelMap::zeros(height, width);
    let mut order: Vec<usize> = (0..scene.objects.len()).collect();
    order.sort_by_key(|&k| (scene.objects[k].depth_rank, k));
    for k in order {
        let obj = &scene.objects[k];
        let Some(&centroid) = obj.trajectory.points.get(t) else {
            continue;
        };
        let color = obj.color_at(t).to_u8();
        let id = SceneSpec::object_id(k);
        for_each_covered(
            obj.sprite.shape,
            obj.scale_at(t),
            obj.orientation_at(t),
            centroid,
            (height, width),
            |x, y| {
                frame.set_pixel(x, y, color);
                labels.set(x, y, id);
            },
        );
    }
    (frame, labels)
}

pub fn render_video(scene: &SceneSpec) -> VideoSample {
    let (frames, gt): (Vec<_>, Vec<_>) = (0..scene.length).map(|t| compose_frame(scene, t)).unzip();
    let visibility = visibility_table(scene.objects.len(), &gt);
    VideoSample {
        frames,
        gt,
        visibility,
        scene: scene.clone(),
        seed: 0,
    }
}

fn check_factor(h: usize, w: usize, factor: usize) -> Result<()> {
    if factor == 0 || !h.is_multiple_of(factor) || !w.is_multiple_of(factor) {
        return Err(Error::invalid(format!(
            "{h}x{w} is not divisible by factor {factor}"
        )));
    }
    Ok(())
}

/// Box average over `factor`×`factor` blocks, rounded to nearest.
pub fn downsample_frame(frame: &Frame, factor: usize) -> Result<Frame> {
    check_factor(frame.height, frame.width, factor)?;
    if factor == 1 {
        return Ok(frame.clone());
    }
    let (h, w) = (frame.height / factor, frame.width / factor);
    let n = (factor * factor) as u32;
    let mut out = Frame::uniform(h, w, [0; 3]);
    for by in 0..h {
        for bx in 0..w {
            let mut sum = [0u32; 3];
            for y in by * factor..(by + 1) * factor {
                for x in bx * factor..(bx + 1) * factor {
                    let p = frame.pixel(x, y);
                    for c in 0..3 {
                        sum[c] += u32::from(p[c]);
                    }
                }
            }
            let avg = sum.map(|s| ((s + n / 2) / n) as u8);
            out.set_pixel(bx, by, avg);
        }
    }
    Ok(out)
}

/// Majority vote over `factor`×`factor` blocks. Ties go to the label with the
/// higher `depth` (front-most); background loses every tie against an
/// object; labels without a depth rank below ranked ones, then by value.
pub fn downsample_labels(
    map: &LabelMap,
    factor: usize,
    depth: impl Fn(u8) -> Option<u32>,
) -> Result<LabelMap> {
    check_factor(map.height, map.width, factor)?;
    if factor == 1 {
        return Ok(map.clone());
    }
    let (h, w) = (map.height / factor, map.width / factor);
    let mut out = LabelMap::zeros(h, w);
    let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
    for by in 0..h {
        for bx in 0..w {
            counts.clear();
            for y in by * factor..(by + 1) * factor {
                for x in bx * factor..(bx + 1) * factor {
                    *counts.entry(map.get(x, y)).or_default() += 1;
                }
            }
            let winner = counts
                .iter()
                .max_by_key(|&(&label, &count)| {
                    let is_object = label != 0;
                    (count, is_object, depth(label).map(|d| d + 1).unwrap_or(0), label)
                })
                .map(|(&l, _)| l)
                .unwrap_or(0);
            out.set(bx, by, winner);
        }
    }
    Ok(out)
}
