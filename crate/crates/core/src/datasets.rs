//! Dataset splits: VMDS (standard, challenge and out-of-distribution sets)
//! and SpMOT, with their default sizes, lengths and canvases.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::raster::{render_video, VideoSample};
use crate::rng::{self, Purpose};
use crate::scene::{apply_ood_schedule, build_spmot_scene, build_vmds_scene, OodKind, Rgb, VmdsVariant};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Vmds,
    Spmot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Standard,
    Occlusion,
    Small,
    Large,
    SameColor,
    Rotation,
    ColorChange,
    SizeChange,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Standard,
        Variant::Occlusion,
        Variant::Small,
        Variant::Large,
        Variant::SameColor,
        Variant::Rotation,
        Variant::ColorChange,
        Variant::SizeChange,
    ];

    fn scene_variant(self) -> (VmdsVariant, Option<OodKind>) {
        match self {
            Variant::Standard => (VmdsVariant::Standard, None),
            Variant::Occlusion => (VmdsVariant::Occlusion, None),
            Variant::Small => (VmdsVariant::Small, None),
            Variant::Large => (VmdsVariant::Large, None),
            Variant::SameColor => (VmdsVariant::SameColor, None),
            Variant::Rotation => (VmdsVariant::Standard, Some(OodKind::Rotation)),
            Variant::ColorChange => (VmdsVariant::Standard, Some(OodKind::ColorChange)),
            Variant::SizeChange => (VmdsVariant::Standard, Some(OodKind::SizeChange)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

macro_rules! parse_enum {
    ($ty:ty, $what:literal, { $($name:literal => $val:path),+ $(,)? }) => {
        impl std::str::FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($val),)+
                    other => Err(Error::invalid(format!(concat!("unknown ", $what, " {:?}"), other))),
                }
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                let name = match self {
                    $($val => $name,)+
                };
                f.write_str(name)
            }
        }
    };
}

parse_enum!(Family, "family", { "vmds" => Family::Vmds, "spmot" => Family::Spmot });
parse_enum!(Split, "split", { "train" => Split::Train, "val" => Split::Val, "test" => Split::Test });
parse_enum!(Variant, "variant", {
    "standard" => Variant::Standard,
    "occlusion" => Variant::Occlusion,
    "small" => Variant::Small,
    "large" => Variant::Large,
    "same_color" => Variant::SameColor,
    "rotation" => Variant::Rotation,
    "color_change" => Variant::ColorChange,
    "size_change" => Variant::SizeChange,
});

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub family: Family,
    pub variant: Variant,
    pub split: Split,
    pub num_sequences: usize,
    pub length: usize,
    /// Output (height, width).
    pub canvas: (usize, usize),
    pub seed: u64,
    #[serde(default)]
    pub black_background: bool,
}

const VMDS_CANVAS: (usize, usize) = (64, 64);
const SPMOT_RENDER_CANVAS: (usize, usize) = (128, 128);

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.family == Family::Spmot && self.variant != Variant::Standard {
            return Err(Error::invalid(format!(
                "variant {} exists only for the vmds family",
                self.variant
            )));
        }
        if self.length == 0 {
            return Err(Error::invalid("sequence length must be at least 1"));
        }
        match self.family {
            Family::Vmds if self.canvas != VMDS_CANVAS => Err(Error::invalid(format!(
                "vmds is rendered at 64x64, got {:?}",
                self.canvas
            ))),
            Family::Spmot
                if self.canvas.0 == 0
                    || self.canvas.1 == 0
                    || !SPMOT_RENDER_CANVAS.0.is_multiple_of(self.canvas.0)
                    || !SPMOT_RENDER_CANVAS.1.is_multiple_of(self.canvas.1)
                    || SPMOT_RENDER_CANVAS.0 / self.canvas.0 != SPMOT_RENDER_CANVAS.1 / self.canvas.1 =>
            {
                Err(Error::invalid(format!(
                    "spmot output canvas {:?} must evenly divide 128x128",
                    self.canvas
                )))
            }
            _ => Ok(()),
        }
    }

    /// Stable hex digest of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Root of the per-sequence seed tree; distinct per family, variant and
    /// split so one seed yields disjoint splits.
    fn stream_root(&self) -> u64 {
        rng::split_seed(
            self.seed,
            &[self.family as u64, self.variant as u64, self.split as u64],
        )
    }

    /// Seed recorded for sequence `index`.
    pub fn sequence_seed(&self, index: usize) -> u64 {
        rng::split_seed(self.stream_root(), &[index as u64])
    }
}

/// Paper-default sizes for a family / variant / split.
pub fn default_config(family: Family, variant: Variant, split: Split) -> Result<DatasetConfig> {
    let (num_sequences, length, canvas) = match (family, variant) {
        (Family::Spmot, Variant::Standard) => {
            let n = match split {
                Split::Train => 9600,
                Split::Val => 384,
                Split::Test => 1000,
            };
            (n, 10, (64, 64))
        }
        (Family::Spmot, v) => {
            return Err(Error::invalid(format!(
                "variant {v} exists only for the vmds family"
            )))
        }
        (Family::Vmds, Variant::Standard) => match split {
            Split::Train => (10_000, 10, VMDS_CANVAS),
            Split::Val => (1000, 10, VMDS_CANVAS),
            Split::Test => (1000, 20, VMDS_CANVAS),
        },
        (Family::Vmds, _) => (1000, 10, VMDS_CANVAS),
    };
    Ok(DatasetConfig {
        family,
        variant,
        split,
        num_sequences,
        length,
        canvas,
        seed: 0,
        black_background: false,
    })
}

/// Sequence `index` of a dataset, independent of every other sequence.
pub fn generate_sequence(config: &DatasetConfig, index: usize) -> Result<VideoSample> {
    config.validate()?;
    build_sequence(config, index).map_err(|e| Error::Sequence {
        index,
        source: Box::new(e),
    })
}

fn build_sequence(config: &DatasetConfig, index: usize) -> Result<VideoSample> {
    let seed = config.sequence_seed(index);
    let mut scene_rng = rng::stream(seed, 0, Purpose::Scene);
    let mut scene = match config.family {
        Family::Vmds => {
            let (base, ood) = config.variant.scene_variant();
            let scene = build_vmds_scene(&mut scene_rng, config.length, base)?;
            match ood {
                Some(kind) => {
                    let mut ood_rng = rng::stream(seed, 0, Purpose::Ood);
                    apply_ood_schedule(scene, kind, &mut ood_rng)?
                }
                None => scene,
            }
        }
        Family::Spmot => build_spmot_scene(&mut scene_rng, config.length)?,
    };
    if config.black_background {
        scene.background_color = Rgb::BLACK;
    }
    let mut sample = render_video(&scene);
    let factor = scene.height() / config.canvas.0;
    if factor > 1 {
        sample = sample.downsample(factor)?;
    }
    sample.seed = seed;
    Ok(sample)
}

/// All sequences in index order.
pub fn generate_dataset(config: &DatasetConfig) -> impl Iterator<Item = Result<VideoSample>> + '_ {
    (0..config.num_sequences).map(move |i| generate_sequence(config, i))
}
