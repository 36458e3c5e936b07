//! Symbolic scene descriptions.
//!
//! A [`SceneSpec`] fully determines a video: every object's frame-0 sprite,
//! its centroid path, its per-frame rotation / hue / scale schedules, and its
//! depth rank. Rendering is a pure function of the scene description.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::raster;
use crate::trajectory::{
    sample_crossing_trajectories, sample_linear_trajectory, CrossingRecord, GpParams, GpSampler,
    Trajectory, SPMOT_SPEED_RANGE,
};
use crate::{Error, Result};

/// Number of discrete sprite scales.
pub const NUM_SCALES: u8 = 6;
pub const MAX_SCALE_INDEX: u8 = NUM_SCALES - 1;
/// Number of discrete frame-0 orientations.
pub const NUM_ORIENTATIONS: u32 = 40;
pub const MAX_OBJECTS: usize = 4;

const VMDS_CANVAS: (usize, usize) = (64, 64);
const SPMOT_CANVAS: (usize, usize) = (128, 128);
const SPMOT_SCALE_INDEX: u8 = 0;

/// Per-frame rotation magnitude range for the rotation OOD set, degrees.
pub const ROTATION_RANGE_DEG: (f64, f64) = (5.0, 40.0);
/// Per-frame hue drift magnitude range for the color-change OOD set, degrees.
pub const HUE_DRIFT_RANGE_DEG: (f64, f64) = (1.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Square,
    Ellipse,
    Heart,
    Circle,
    Triangle,
}

pub const VMDS_SHAPES: [Shape; 3] = [Shape::Square, Shape::Ellipse, Shape::Heart];
pub const SPMOT_SHAPES: [Shape; 3] = [Shape::Circle, Shape::Triangle, Shape::Square];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Rgb {
    pub const BLACK: Rgb = Rgb::new(0.0, 0.0, 0.0);

    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Rgb { r, g, b }
    }

    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Rgb::new(rng.random(), rng.random(), rng.random())
    }

    /// 8-bit channel values, rounded to nearest.
    pub fn to_u8(&self) -> [u8; 3] {
        let q = |c: f64| (c.clamp(0.0, 1.0) * 255.0).round() as u8;
        [q(self.r), q(self.g), q(self.b)]
    }

    /// Hue in [0, 1), saturation, value.
    pub fn to_hsv(&self) -> (f64, f64, f64) {
        let (r, g, b) = (self.r, self.g, self.b);
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let delta = max - min;
        let v = max;
        let s = if max > 0.0 { delta / max } else { 0.0 };
        if delta == 0.0 {
            return (0.0, s, v);
        }
        let h = if max == r {
            ((g - b) / delta).rem_euclid(6.0)
        } else if max == g {
            (b - r) / delta + 2.0
        } else {
            (r - g) / delta + 4.0
        };
        ((h / 6.0).rem_euclid(1.0), s, v)
    }

    pub fn from_hsv(h: f64, s: f64, v: f64) -> Self {
        let h6 = h.rem_euclid(1.0) * 6.0;
        let sector = h6.floor();
        let f = h6 - sector;
        let p = v * (1.0 - s);
        let q = v * (1.0 - s * f);
        let t = v * (1.0 - s * (1.0 - f));
        match sector as u8 % 6 {
            0 => Rgb::new(v, t, p),
            1 => Rgb::new(q, v, p),
            2 => Rgb::new(p, v, t),
            3 => Rgb::new(p, q, v),
            4 => Rgb::new(t, p, v),
            _ => Rgb::new(v, p, q),
        }
    }
}

/// SpMOT's six fully saturated colors.
pub const SPMOT_PALETTE: [Rgb; 6] = [
    Rgb::new(1.0, 0.0, 0.0),
    Rgb::new(0.0, 1.0, 0.0),
    Rgb::new(0.0, 0.0, 1.0),
    Rgb::new(1.0, 1.0, 0.0),
    Rgb::new(1.0, 0.0, 1.0),
    Rgb::new(0.0, 1.0, 1.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpriteSpec {
    pub shape: Shape,
    pub scale_index: u8,
    /// Radians.
    pub orientation: f64,
    pub color: Rgb,
}

/// Bounding extent in pixels of scale `index` on a canvas `canvas_width`
/// wide. Six scales spaced linearly from 10 px to 26 px at width 64.
pub fn sprite_extent(scale_index: u8, canvas_width: usize) -> f64 {
    let base = 10.0 + 16.0 * f64::from(scale_index.min(MAX_SCALE_INDEX)) / 5.0;
    base * canvas_width as f64 / 64.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledObject {
    pub sprite: SpriteSpec,
    pub trajectory: Trajectory,
    /// Radians per frame, signed.
    pub rotation_rate: f64,
    /// Hue turns per frame, signed; 1.0 is a full revolution.
    pub hue_rate: f64,
    pub size_schedule: Vec<u8>,
    /// Higher ranks are painted in front.
    pub depth_rank: u32,
}

impl ScheduledObject {
    fn new_static(sprite: SpriteSpec, trajectory: Trajectory) -> Self {
        let n = trajectory.len();
        ScheduledObject {
            sprite,
            trajectory,
            rotation_rate: 0.0,
            hue_rate: 0.0,
            size_schedule: vec![sprite.scale_index; n],
            depth_rank: 0,
        }
    }

    pub fn orientation_at(&self, t: usize) -> f64 {
        self.sprite.orientation + self.rotation_rate * t as f64
    }

    pub fn color_at(&self, t: usize) -> Rgb {
        if self.hue_rate == 0.0 {
            return self.sprite.color;
        }
        let (h, s, v) = self.sprite.color.to_hsv();
        Rgb::from_hsv(h + self.hue_rate * t as f64, s, v)
    }

    pub fn scale_at(&self, t: usize) -> u8 {
        self.size_schedule
            .get(t)
            .copied()
            .unwrap_or(self.sprite.scale_index)
    }

    fn is_static(&self) -> bool {
        self.rotation_rate == 0.0
            && self.hue_rate == 0.0
            && self.size_schedule.iter().all(|&s| s == self.sprite.scale_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub objects: Vec<ScheduledObject>,
    pub background_color: Rgb,
    /// (height, width) in pixels.
    pub canvas: (usize, usize),
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossing: Option<CrossingRecord>,
}

impl SceneSpec {
    pub fn height(&self) -> usize {
        self.canvas.0
    }

    pub fn width(&self) -> usize {
        self.canvas.1
    }

    /// Label of object `index` in rendered label maps.
    pub fn object_id(index: usize) -> u8 {
        (index + 1) as u8
    }

    /// Depth rank of the object carrying `label`, if any.
    pub fn depth_of_label(&self, label: u8) -> Option<u32> {
        let idx = usize::from(label).checked_sub(1)?;
        self.objects.get(idx).map(|o| o.depth_rank)
    }

    /// Reassigns depth ranks: larger frame-0 sprites go in front, ties put
    /// the lower object index in front.
    pub fn assign_depth_by_area(&mut self) {
        let width = self.width();
        let areas: Vec<usize> = self
            .objects
            .iter()
            .map(|o| {
                raster::sprite_area(o.sprite.shape, o.scale_at(0), o.orientation_at(0), width)
            })
            .collect();
        let mut order: Vec<usize> = (0..self.objects.len()).collect();
        order.sort_by(|&a, &b| areas[b].cmp(&areas[a]).then(a.cmp(&b)));
        let n = order.len() as u32;
        for (pos, &idx) in order.iter().enumerate() {
            self.objects[idx].depth_rank = n - 1 - pos as u32;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VmdsVariant {
    Standard,
    Occlusion,
    Small,
    Large,
    SameColor,
}

impl VmdsVariant {
    pub fn object_range(self) -> (usize, usize) {
        match self {
            VmdsVariant::Occlusion | VmdsVariant::SameColor => (2, MAX_OBJECTS),
            _ => (1, MAX_OBJECTS),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OodKind {
    Rotation,
    ColorChange,
    SizeChange,
}

impl std::str::FromStr for OodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotation" => Ok(OodKind::Rotation),
            "color_change" => Ok(OodKind::ColorChange),
            "size_change" => Ok(OodKind::SizeChange),
            other => Err(Error::invalid(format!("unknown OOD kind {other:?}"))),
        }
    }
}

fn random_orientation<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let k = rng.random_range(0..NUM_ORIENTATIONS);
    2.0 * PI * f64::from(k) / f64::from(NUM_ORIENTATIONS)
}

pub fn build_vmds_scene<R: Rng + ?Sized>(
    rng: &mut R,
    length: usize,
    variant: VmdsVariant,
) -> Result<SceneSpec> {
    if length == 0 {
        return Err(Error::invalid("scene length must be at least 1"));
    }
    let (lo, hi) = variant.object_range();
    let n = rng.random_range(lo..=hi);
    let params = GpParams::new(length);

    let (trajectories, crossing) = if variant == VmdsVariant::Occlusion {
        let (t, c) = sample_crossing_trajectories(rng, &params, n)?;
        (t, Some(c))
    } else {
        let sampler = GpSampler::new(params)?;
        let t = (0..n)
            .map(|_| sampler.sample(rng))
            .collect::<Result<Vec<_>>>()?;
        (t, None)
    };

    let shared_color = (variant == VmdsVariant::SameColor).then(|| Rgb::random(rng));
    let objects = trajectories
        .into_iter()
        .map(|trajectory| {
            let shape = VMDS_SHAPES[rng.random_range(0..VMDS_SHAPES.len())];
            let drawn_scale = rng.random_range(0..NUM_SCALES);
            let scale_index = match variant {
                VmdsVariant::Small => 0,
                VmdsVariant::Large => MAX_SCALE_INDEX,
                _ => drawn_scale,
            };
            let orientation = random_orientation(rng);
            let own_color = Rgb::random(rng);
            let sprite = SpriteSpec {
                shape,
                scale_index,
                orientation,
                color: shared_color.unwrap_or(own_color),
            };
            ScheduledObject::new_static(sprite, trajectory)
        })
        .collect();

    let mut scene = SceneSpec {
        objects,
        background_color: Rgb::random(rng),
        canvas: VMDS_CANVAS,
        length,
        crossing,
    };
    scene.assign_depth_by_area();
    Ok(scene)
}

/// Adds one out-of-distribution transformation schedule to a static scene.
/// Trajectories are left untouched.
pub fn apply_ood_schedule<R: Rng + ?Sized>(
    mut scene: SceneSpec,
    kind: OodKind,
    rng: &mut R,
) -> Result<SceneSpec> {
    if !scene.objects.iter().all(ScheduledObject::is_static) {
        return Err(Error::invalid("scene already carries transformation schedules"));
    }
    let length = scene.length;
    for obj in &mut scene.objects {
        match kind {
            OodKind::Rotation => {
                let deg = rng.random_range(ROTATION_RANGE_DEG.0..=ROTATION_RANGE_DEG.1);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                obj.rotation_rate = sign * deg.to_radians();
            }
            OodKind::ColorChange => {
                let (_, s, v) = obj.sprite.color.to_hsv();
                let hue: f64 = rng.random();
                obj.sprite.color = Rgb::from_hsv(hue, s, v);
                let deg = rng.random_range(HUE_DRIFT_RANGE_DEG.0..=HUE_DRIFT_RANGE_DEG.1);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                obj.hue_rate = sign * deg / 360.0;
            }
            OodKind::SizeChange => {
                let grow = rng.random::<bool>();
                let start = if grow { 0 } else { MAX_SCALE_INDEX };
                // First frame that differs from frame 0; `length` means the
                // change never begins inside the video.
                let onset = if length > 1 {
                    rng.random_range(1..length)
                } else {
                    length
                };
                obj.sprite.scale_index = start;
                obj.size_schedule = size_ramp(start, grow, onset, length);
            }
        }
    }
    if kind == OodKind::SizeChange {
        scene.assign_depth_by_area();
    }
    Ok(scene)
}

/// `start` until `onset`, then one step per frame toward the opposite
/// extreme, clamped there.
pub fn size_ramp(start: u8, grow: bool, onset: usize, length: usize) -> Vec<u8> {
    (0..length)
        .map(|t| {
            if t < onset {
                return start;
            }
            let steps = (t - onset + 1).min(usize::from(MAX_SCALE_INDEX)) as u8;
            if grow {
                (start + steps).min(MAX_SCALE_INDEX)
            } else {
                start.saturating_sub(steps)
            }
        })
        .collect()
}

pub fn build_spmot_scene<R: Rng + ?Sized>(rng: &mut R, length: usize) -> Result<SceneSpec> {
    if length == 0 {
        return Err(Error::invalid("scene length must be at least 1"));
    }
    let n = rng.random_range(1..=MAX_OBJECTS);
    let bounds = (0.0, SPMOT_CANVAS.1 as f64);
    let objects = (0..n)
        .map(|_| {
            let trajectory = sample_linear_trajectory(rng, length, bounds, SPMOT_SPEED_RANGE)?;
            let shape = SPMOT_SHAPES[rng.random_range(0..SPMOT_SHAPES.len())];
            let color = SPMOT_PALETTE[rng.random_range(0..SPMOT_PALETTE.len())];
            let sprite = SpriteSpec {
                shape,
                scale_index: SPMOT_SCALE_INDEX,
                orientation: 0.0,
                color,
            };
            Ok(ScheduledObject::new_static(sprite, trajectory))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut scene = SceneSpec {
        objects,
        background_color: Rgb::BLACK,
        canvas: SPMOT_CANVAS,
        length,
        crossing: None,
    };
    scene.assign_depth_by_area();
    Ok(scene)
}
