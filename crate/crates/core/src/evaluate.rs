//! Sequence-level evaluation: matching every frame of a prediction set
//! against ground truth and accumulating the events.

use std::path::Path;

use crate::matcher::{exclude_background, match_frame, CorrespondenceState, InstanceSet, MatchConfig};
use crate::metrics::{EvalWindow, MetricsReport, ReportSettings, SequenceStats, DEFAULT_LIFESPAN_THRESHOLD};
use crate::raster::{Frame, LabelMap};
use crate::storage::{self, PredictionSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub matching: MatchConfig,
    /// First frame whose events are counted. Matching always starts at
    /// frame 0.
    pub eval_start: usize,
    pub lifespan_threshold: f64,
    /// Forget correspondences on entering the window, so that identities
    /// established during the warm start do not carry over.
    pub reset_state_at_window_start: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            matching: MatchConfig::default(),
            eval_start: 0,
            lifespan_threshold: DEFAULT_LIFESPAN_THRESHOLD,
            reset_state_at_window_start: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.matching.validate()?;
        if !(self.lifespan_threshold > 0.0 && self.lifespan_threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "lifespan threshold {} must lie in (0, 1]",
                self.lifespan_threshold
            )));
        }
        Ok(())
    }

    pub fn settings(&self) -> ReportSettings {
        ReportSettings {
            iou_threshold: self.matching.iou_threshold,
            background_iou_threshold: self.matching.background_iou_threshold,
            eval_start: self.eval_start,
            lifespan_threshold: self.lifespan_threshold,
        }
    }
}

/// Ground truth of one sequence as the evaluator needs it.
#[derive(Debug, Clone, Copy)]
pub struct GroundTruth<'a> {
    pub index: usize,
    /// Objects in the scene, visible or not.
    pub num_objects: usize,
    pub labels: &'a [LabelMap],
    pub frames: Option<&'a [Frame]>,
}

/// Matches every frame and counts the events inside the window. Predicted
/// masks listed as background by the producer are dropped, and any other
/// predicted mask overlapping the ground-truth background region by more
/// than the background threshold is removed before matching.
pub fn evaluate_sequence(gt: GroundTruth<'_>, pred: &PredictionSet, config: &EvalConfig) -> Result<SequenceStats> {
    config.validate()?;
    if pred.labels.len() != gt.labels.len() {
        return Err(Error::InvalidInput(format!(
            "sequence {}: {} predicted frames for {} ground-truth frames",
            gt.index,
            pred.labels.len(),
            gt.labels.len()
        )));
    }
    let window = EvalWindow::from_start(config.eval_start);
    let mut stats = SequenceStats::new(gt.index as u64, gt.num_objects);
    let mut state = CorrespondenceState::default();
    for (t, (g, p)) in gt.labels.iter().zip(&pred.labels).enumerate() {
        if config.reset_state_at_window_start && t == config.eval_start {
            state = CorrespondenceState::default();
        }
        let gt_set = InstanceSet::from_label_map(g);
        let mut pred_set = InstanceSet::from_label_map(p);
        if !pred.meta.background_ids.is_empty() {
            pred_set.retain(|id| !pred.meta.background_ids.iter().any(|&b| u32::from(b) == id));
        }
        let background = g.mask(0);
        if !background.is_empty() {
            exclude_background(
                &mut pred_set,
                std::slice::from_ref(&background),
                config.matching.background_iou_threshold,
            )?;
        }
        let result = match_frame(&mut state, &gt_set, &pred_set, &config.matching)
            .map_err(|e| Error::InvalidInput(format!("sequence {} frame {t}: {e}", gt.index)))?;
        stats.accumulate(&result, t, window);
    }
    if let (Some(recon), Some(frames)) = (&pred.reconstructions, gt.frames) {
        if recon.len() != frames.len() {
            return Err(Error::InvalidInput(format!(
                "sequence {}: {} reconstructions for {} frames",
                gt.index,
                recon.len(),
                frames.len()
            )));
        }
        for (t, (r, f)) in recon.iter().zip(frames).enumerate() {
            stats.accumulate_reconstruction(r, f, t, window)?;
        }
    }
    Ok(stats)
}

/// Overall report from per-sequence stats, optionally broken down by
/// object count.
pub fn build_report(per_sequence: &[SequenceStats], config: &EvalConfig, breakdown: bool) -> MetricsReport {
    let total = SequenceStats::merge_all(per_sequence);
    let report = MetricsReport::from_stats(&total, config.settings());
    if breakdown {
        report.with_breakdown(per_sequence)
    } else {
        report
    }
}

/// Evaluates one stored sequence against stored predictions.
pub fn evaluate_stored_sequence(
    gt_root: &Path,
    pred_root: &Path,
    entry: &storage::ManifestEntry,
    config: &EvalConfig,
) -> Result<SequenceStats> {
    let sample = storage::read_sequence(gt_root, entry)?;
    let pred = storage::read_prediction_sequence(pred_root, entry)?;
    let gt = GroundTruth {
        index: entry.index,
        num_objects: sample.scene.objects.len(),
        labels: &sample.gt,
        frames: Some(&sample.frames),
    };
    evaluate_sequence(gt, &pred, config)
}

/// Serial evaluation of a stored dataset.
pub fn evaluate_dirs(gt_root: &Path, pred_root: &Path, config: &EvalConfig, breakdown: bool) -> Result<MetricsReport> {
    config.validate()?;
    let manifest = storage::read_manifest(gt_root)?;
    let per_sequence = manifest
        .sequences
        .iter()
        .map(|e| evaluate_stored_sequence(gt_root, pred_root, e, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(build_report(&per_sequence, config, breakdown))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::PredictionMeta;

    fn map(rows: &[&[u8]]) -> LabelMap {
        let h = rows.len();
        let w = rows[0].len();
        LabelMap::from_raw(h, w, rows.concat()).unwrap()
    }

    fn pred(labels: Vec<LabelMap>) -> PredictionSet {
        PredictionSet {
            index: 0,
            labels,
            reconstructions: None,
            meta: PredictionMeta::new("test"),
        }
    }

    fn gt(labels: &[LabelMap]) -> GroundTruth<'_> {
        GroundTruth {
            index: 0,
            num_objects: 2,
            labels,
            frames: None,
        }
    }

    #[test]
    fn perfect_predictions() {
        let g = vec![map(&[&[1, 1, 0, 2], &[1, 0, 0, 2]]); 5];
        let s = evaluate_sequence(gt(&g), &pred(g.clone()), &EvalConfig::default()).unwrap();
        let r = build_report(&[s], &EvalConfig::default(), true);
        assert_eq!(r.overall.mota, Some(1.0));
        assert_eq!(r.overall.motp, Some(1.0));
        assert_eq!((r.overall.md, r.overall.mt), (Some(1.0), Some(1.0)));
        assert_eq!(r.overall.counts.occurrences, 10);
        assert_eq!(r.breakdown.len(), 1);
    }

    #[test]
    fn relabeled_predictions_are_perfect() {
        let g = vec![map(&[&[1, 1, 0, 2]]); 3];
        let p = vec![map(&[&[200, 200, 0, 7]]); 3];
        let s = evaluate_sequence(gt(&g), &pred(p), &EvalConfig::default()).unwrap();
        assert_eq!(s.misses_total + s.fps_total + s.switches_total, 0);
    }

    #[test]
    fn background_prediction_is_excluded() {
        let g = vec![map(&[&[1, 1, 0, 0], &[0, 0, 0, 0]])];
        // Label 9 covers the whole background region.
        let p = vec![map(&[&[1, 1, 9, 9], &[9, 9, 9, 9]])];
        let s = evaluate_sequence(gt(&g), &pred(p.clone()), &EvalConfig::default()).unwrap();
        assert_eq!(s.fps_total, 0);
        let off = EvalConfig {
            matching: MatchConfig {
                background_iou_threshold: 1.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let s = evaluate_sequence(gt(&g), &pred(p), &off).unwrap();
        assert_eq!(s.fps_total, 1);
    }

    #[test]
    fn declared_background_ids_are_dropped() {
        // A one-pixel mask against a six-pixel background stays below 0.2.
        let g = vec![map(&[&[1, 1, 0, 0, 0, 0, 0, 0]])];
        let p = vec![map(&[&[1, 1, 0, 4, 0, 0, 0, 0]])];
        let mut set = pred(p);
        assert_eq!(evaluate_sequence(gt(&g), &set, &EvalConfig::default()).unwrap().fps_total, 1);
        set.meta.background_ids = vec![4];
        assert_eq!(evaluate_sequence(gt(&g), &set, &EvalConfig::default()).unwrap().fps_total, 0);
    }

    #[test]
    fn warm_start_window() {
        let g: Vec<_> = (0..20).map(|_| map(&[&[1, 1, 0, 0, 0, 0, 0, 0]])).collect();
        let p: Vec<_> = (0..20)
            .map(|t| {
                if t < 10 {
                    map(&[&[0, 0, 5, 0, 0, 0, 0, 0]])
                } else {
                    map(&[&[3, 3, 0, 0, 0, 0, 0, 0]])
                }
            })
            .collect();
        let all = evaluate_sequence(gt(&g), &pred(p.clone()), &EvalConfig::default()).unwrap();
        assert!(all.misses_total == 10 && all.fps_total == 10);
        let cfg = EvalConfig {
            eval_start: 10,
            ..Default::default()
        };
        let late = evaluate_sequence(gt(&g), &pred(p), &cfg).unwrap();
        let r = build_report(&[late], &cfg, false);
        assert_eq!(r.overall.mota, Some(1.0));
        assert_eq!(r.overall.counts.occurrences, 10);
        assert_eq!(r.settings.eval_start, 10);
    }

    #[test]
    fn switch_before_window_is_not_counted() {
        let g: Vec<_> = (0..4).map(|_| map(&[&[1, 1]])).collect();
        let p = vec![map(&[&[3, 3]]), map(&[&[3, 3]]), map(&[&[4, 4]]), map(&[&[4, 4]])];
        let cfg = |eval_start| EvalConfig {
            eval_start,
            ..Default::default()
        };
        assert_eq!(evaluate_sequence(gt(&g), &pred(p.clone()), &cfg(0)).unwrap().switches_total, 1);
        assert_eq!(evaluate_sequence(gt(&g), &pred(p.clone()), &cfg(2)).unwrap().switches_total, 1);
        assert_eq!(evaluate_sequence(gt(&g), &pred(p.clone()), &cfg(3)).unwrap().switches_total, 0);
        // Without a reset the id seen in the warm start is remembered.
        let g2: Vec<_> = (0..3).map(|_| map(&[&[1, 1]])).collect();
        let p2 = vec![map(&[&[3, 3]]), map(&[&[4, 4]]), map(&[&[4, 4]])];
        let reset = EvalConfig {
            reset_state_at_window_start: true,
            ..cfg(1)
        };
        assert_eq!(evaluate_sequence(gt(&g2), &pred(p2.clone()), &cfg(1)).unwrap().switches_total, 1);
        assert_eq!(evaluate_sequence(gt(&g2), &pred(p2), &reset).unwrap().switches_total, 0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let g = vec![map(&[&[1]]); 3];
        assert!(evaluate_sequence(gt(&g), &pred(vec![map(&[&[1]]); 2]), &EvalConfig::default()).is_err());
        let wrong_size = vec![map(&[&[1, 1]]); 3];
        assert!(evaluate_sequence(gt(&g), &pred(wrong_size), &EvalConfig::default()).is_err());
    }

    #[test]
    fn reconstruction_error() {
        let g = vec![map(&[&[1, 0]]); 2];
        let frames = vec![Frame::uniform(1, 2, [255; 3]); 2];
        let mut p = pred(g.clone());
        p.reconstructions = Some(vec![Frame::uniform(1, 2, [255; 3]), Frame::uniform(1, 2, [0; 3])]);
        let truth = GroundTruth {
            frames: Some(&frames),
            ..gt(&g)
        };
        let s = evaluate_sequence(truth, &p, &EvalConfig::default()).unwrap();
        assert_eq!(s.mse(), Some(0.5));
        let late = EvalConfig {
            eval_start: 1,
            ..Default::default()
        };
        assert_eq!(evaluate_sequence(truth, &p, &late).unwrap().mse(), Some(1.0));
    }

    #[test]
    fn window_past_the_end_is_undefined() {
        let g = vec![map(&[&[1]]); 3];
        let cfg = EvalConfig {
            eval_start: 3,
            ..Default::default()
        };
        let s = evaluate_sequence(gt(&g), &pred(g.clone()), &cfg).unwrap();
        let r = build_report(&[s], &cfg, true);
        assert_eq!((r.overall.mota, r.overall.motp, r.overall.md), (None, None, None));
    }
}
