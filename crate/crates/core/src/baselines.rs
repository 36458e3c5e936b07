//! Non-learned reference trackers.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde_json::json;

use crate::raster::{Frame, LabelMap, VideoSample};
use crate::storage::{PredictionMeta, PredictionSet};
use crate::{Error, Result};

/// Emits the ground truth verbatim, with the input frames as
/// reconstructions.
pub fn oracle_tracker(index: usize, sample: &VideoSample) -> PredictionSet {
    PredictionSet {
        index,
        labels: sample.gt.clone(),
        reconstructions: Some(sample.frames.clone()),
        meta: PredictionMeta::new("oracle"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackgroundModel {
    /// Most frequent color over the whole sequence.
    Mode,
    /// Per-pixel temporal median. Static objects become background.
    Median,
    Constant([u8; 3]),
}

impl FromStr for BackgroundModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mode" => Ok(BackgroundModel::Mode),
            "median" => Ok(BackgroundModel::Median),
            "black" => Ok(BackgroundModel::Constant([0; 3])),
            other => Err(Error::invalid(format!("unknown background model {other:?}"))),
        }
    }
}

impl BackgroundModel {
    fn name(&self) -> String {
        match self {
            BackgroundModel::Mode => "mode".into(),
            BackgroundModel::Median => "median".into(),
            BackgroundModel::Constant(c) => format!("constant({},{},{})", c[0], c[1], c[2]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorTrackerConfig {
    /// Euclidean RGB distance in [0, 1] units above which a pixel is
    /// foreground.
    pub color_threshold: f64,
    /// Minimum IoU with a previous hypothesis to inherit its id.
    pub link_iou: f64,
    pub background: BackgroundModel,
}

impl Default for ColorTrackerConfig {
    fn default() -> Self {
        ColorTrackerConfig {
            color_threshold: 0.15,
            link_iou: 0.3,
            background: BackgroundModel::Mode,
        }
    }
}

/// Per-pixel background estimate of a sequence.
pub fn estimate_background(frames: &[Frame], model: BackgroundModel) -> Option<Frame> {
    let first = frames.first()?;
    let (h, w) = (first.height(), first.width());
    Some(match model {
        BackgroundModel::Constant(c) => Frame::uniform(h, w, c),
        BackgroundModel::Mode => {
            let mut counts: BTreeMap<[u8; 3], usize> = BTreeMap::new();
            for f in frames {
                for p in f.as_raw().chunks_exact(3) {
                    *counts.entry([p[0], p[1], p[2]]).or_default() += 1;
                }
            }
            // Ties go to the smallest color.
            let best = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(c, _)| *c)
                .unwrap_or([0; 3]);
            Frame::uniform(h, w, best)
        }
        BackgroundModel::Median => {
            let mut data = vec![0u8; h * w * 3];
            let mut column = Vec::with_capacity(frames.len());
            for (i, out) in data.iter_mut().enumerate() {
                column.clear();
                column.extend(frames.iter().map(|f| f.as_raw()[i]));
                column.sort_unstable();
                // Lower median for even lengths.
                *out = column[(column.len() - 1) / 2];
            }
            Frame::from_raw(h, w, data).expect("same size as the input")
        }
    })
}

fn foreground(frame: &Frame, background: &Frame, threshold: f64) -> Vec<bool> {
    let limit = threshold * 255.0;
    frame
        .as_raw()
        .chunks_exact(3)
        .zip(background.as_raw().chunks_exact(3))
        .map(|(p, b)| {
            let d2: f64 = p
                .iter()
                .zip(b)
                .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
                .sum();
            d2 > limit * limit
        })
        .collect()
}

/// 4-connected components of `mask` in raster-scan order of their first
/// pixel. Returns per-pixel component numbers (0 = none) and the count.
pub fn connected_components(mask: &[bool], height: usize, width: usize) -> (Vec<u32>, u32) {
    let mut comp = vec![0u32; height * width];
    let mut n = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || comp[start] != 0 {
            continue;
        }
        n += 1;
        comp[start] = n;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (y, x) = (i / width, i % width);
            let mut visit = |j: usize| {
                if mask[j] && comp[j] == 0 {
                    comp[j] = n;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
    }
    (comp, n)
}

/// Hands out ids in 1..=255, wrapping around and skipping ids in use.
struct IdPool {
    next: u8,
}

impl IdPool {
    fn take(&mut self, in_use: &[bool; 256]) -> Option<u8> {
        for _ in 0..255 {
            let id = self.next;
            self.next = if id == 255 { 1 } else { id + 1 };
            if !in_use[usize::from(id)] {
                return Some(id);
            }
        }
        None
    }
}

/// Background subtraction, connected components, and greedy IoU linking to
/// the previous frame.
pub fn color_tracker(index: usize, frames: &[Frame], config: &ColorTrackerConfig) -> PredictionSet {
    let mut meta = PredictionMeta::new("color");
    meta.params.insert("color_threshold".into(), json!(config.color_threshold));
    meta.params.insert("link_iou".into(), json!(config.link_iou));
    meta.params.insert("background".into(), json!(config.background.name()));
    let mut labels = Vec::with_capacity(frames.len());
    let Some(background) = estimate_background(frames, config.background) else {
        return PredictionSet {
            index,
            labels,
            reconstructions: None,
            meta,
        };
    };
    let (h, w) = (background.height(), background.width());
    let mut pool = IdPool { next: 1 };
    let mut prev = LabelMap::zeros(h, w);
    for frame in frames {
        let fg = foreground(frame, &background, config.color_threshold);
        let (comp, n) = connected_components(&fg, h, w);
        let n = n as usize;

        let mut comp_area = vec![0usize; n + 1];
        let mut prev_area = [0usize; 256];
        let mut inter: BTreeMap<(usize, u8), usize> = BTreeMap::new();
        for (&c, &p) in comp.iter().zip(prev.as_raw()) {
            comp_area[c as usize] += 1;
            prev_area[usize::from(p)] += 1;
            if c != 0 && p != 0 {
                *inter.entry((c as usize, p)).or_default() += 1;
            }
        }
        let mut candidates: Vec<(f64, usize, u8)> = inter
            .iter()
            .map(|(&(c, p), &i)| {
                let union = comp_area[c] + prev_area[usize::from(p)] - i;
                (i as f64 / union as f64, c, p)
            })
            .filter(|&(iou, _, _)| iou >= config.link_iou)
            .collect();
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut assigned = vec![0u8; n + 1];
        let mut in_use = [false; 256];
        for (_, c, p) in candidates {
            if assigned[c] == 0 && !in_use[usize::from(p)] {
                assigned[c] = p;
                in_use[usize::from(p)] = true;
            }
        }
        // New components in descending area so that, if ids run out, the
        // largest ones are kept.
        let mut fresh: Vec<usize> = (1..=n).filter(|&c| assigned[c] == 0).collect();
        fresh.sort_by(|&a, &b| comp_area[b].cmp(&comp_area[a]).then(a.cmp(&b)));
        for c in fresh {
            match pool.take(&in_use) {
                Some(id) => {
                    assigned[c] = id;
                    in_use[usize::from(id)] = true;
                }
                None => break,
            }
        }
        let raw: Vec<u8> = comp.iter().map(|&c| assigned[c as usize]).collect();
        let map = LabelMap::from_raw(h, w, raw).expect("same size as the frame");
        labels.push(map.clone());
        prev = map;
    }
    PredictionSet {
        index,
        labels,
        reconstructions: None,
        meta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paint(f: &mut Frame, x0: usize, y0: usize, side: usize, c: [u8; 3]) {
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                f.set_pixel(x, y, c);
            }
        }
    }

    #[test]
    fn static_object_keeps_one_id() {
        let mut f = Frame::uniform(32, 32, [40, 40, 200]);
        paint(&mut f, 10, 12, 6, [250, 250, 0]);
        let frames = vec![f; 6];
        let p = color_tracker(0, &frames, &ColorTrackerConfig::default());
        for m in &p.labels {
            assert_eq!(m.present_labels().into_iter().collect::<Vec<_>>(), vec![1]);
            assert_eq!(m.mask(1).area(), 36);
        }
        // The median model swallows a static object.
        let median = ColorTrackerConfig {
            background: BackgroundModel::Median,
            ..Default::default()
        };
        assert!(color_tracker(0, &frames, &median).labels.iter().all(|m| m.present_labels().is_empty()));
    }

    #[test]
    fn moving_object_is_linked() {
        let frames: Vec<Frame> = (0..5)
            .map(|t| {
                let mut f = Frame::uniform(32, 32, [0; 3]);
                paint(&mut f, 4 + 2 * t, 8, 8, [255, 0, 0]);
                f
            })
            .collect();
        let p = color_tracker(3, &frames, &ColorTrackerConfig::default());
        assert_eq!(p.index, 3);
        assert!(p.labels.iter().all(|m| m.present_labels().len() == 1 && m.contains(1)));
    }

    #[test]
    fn jump_breaks_the_link() {
        let mut a = Frame::uniform(32, 32, [0; 3]);
        paint(&mut a, 0, 0, 5, [255, 255, 255]);
        let mut b = Frame::uniform(32, 32, [0; 3]);
        paint(&mut b, 20, 20, 5, [255, 255, 255]);
        let p = color_tracker(0, &[a.clone(), a.clone(), a, b], &ColorTrackerConfig::default());
        assert!(p.labels[0].contains(1));
        assert!(p.labels[3].contains(2) && !p.labels[3].contains(1));
    }

    #[test]
    fn touching_same_color_objects_merge() {
        let mut f = Frame::uniform(32, 32, [0; 3]);
        paint(&mut f, 4, 4, 5, [0, 255, 0]);
        paint(&mut f, 9, 4, 5, [0, 255, 0]);
        let p = color_tracker(0, &[f.clone(), f], &ColorTrackerConfig::default());
        assert_eq!(p.labels[0].present_labels().len(), 1);
        assert_eq!(p.labels[0].mask(1).area(), 50);
    }

    #[test]
    fn empty_scene_has_no_hypotheses() {
        let frames = vec![Frame::uniform(16, 16, [10, 20, 30]); 4];
        let p = color_tracker(0, &frames, &ColorTrackerConfig::default());
        assert_eq!(p.labels.len(), 4);
        assert!(p.labels.iter().all(|m| m.present_labels().is_empty()));
        assert!(color_tracker(0, &[], &ColorTrackerConfig::default()).labels.is_empty());
    }

    #[test]
    fn threshold_splits_at_half() {
        let mut f = Frame::uniform(4, 4, [0; 3]);
        let c = ColorTrackerConfig {
            color_threshold: 0.5,
            background: BackgroundModel::Constant([0; 3]),
            ..Default::default()
        };
        f.set_pixel(1, 1, [127, 0, 0]);
        f.set_pixel(3, 3, [128, 0, 0]);
        let p = color_tracker(0, &[f], &c);
        assert_eq!(p.labels[0].get(1, 1), 0);
        assert_ne!(p.labels[0].get(3, 3), 0);
    }

    #[test]
    fn components_are_four_connected() {
        #[rustfmt::skip]
        let mask = [
            true, false, true,
            false, true, false,
            true, true, false,
        ];
        let (comp, n) = connected_components(&mask, 3, 3);
        assert_eq!(n, 3);
        assert_eq!(comp, vec![1, 0, 2, 0, 3, 0, 3, 3, 0]);
    }

    #[test]
    fn ids_wrap_without_collision() {
        let mut pool = IdPool { next: 254 };
        let mut in_use = [false; 256];
        in_use[255] = true;
        in_use[1] = true;
        assert_eq!(pool.take(&in_use), Some(254));
        assert_eq!(pool.take(&in_use), Some(2));
        let full = [true; 256];
        assert_eq!(pool.take(&full), None);
    }

    #[test]
    fn oracle_copies_ground_truth() {
        let mut m = LabelMap::zeros(4, 4);
        m.set(1, 2, 3);
        let s = VideoSample {
            frames: vec![Frame::uniform(4, 4, [1, 2, 3])],
            gt: vec![m],
            visibility: vec![],
            scene: crate::scene::SceneSpec {
                objects: vec![],
                background_color: crate::scene::Rgb::BLACK,
                canvas: (4, 4),
                length: 1,
                crossing: None,
            },
            seed: 0,
        };
        let p = oracle_tracker(7, &s);
        assert_eq!(p.labels, s.gt);
        assert_eq!(p.reconstructions.as_ref().unwrap(), &s.frames);
        assert_eq!(p.meta.producer, "oracle");
    }
}
