//! CLEAR-MOT style metrics over mask matches.
//!
//! [`SequenceStats`] accumulates per-frame match events. All of its sums are
//! integers (IoUs are stored as exact fixed-point values), so merging is
//! associative and commutative bit for bit and parallel evaluation equals
//! serial evaluation exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::matcher::FrameMatchResult;
use crate::raster::Frame;
use crate::{Error, Result};

/// Fraction of visible frames an object must be matched in to count as
/// mostly detected.
pub const DEFAULT_LIFESPAN_THRESHOLD: f64 = 0.8;

/// IoUs are kept as multiples of 2^-60. Any f64 in [2^-7, 1] is a multiple of
/// 2^-60, so every IoU at or above a matching threshold converts exactly.
const IOU_SCALE: f64 = (1u128 << 60) as f64;

/// Half-open frame range in which events are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalWindow {
    pub start: usize,
    pub end: Option<usize>,
}

impl EvalWindow {
    pub const ALL: EvalWindow = EvalWindow {
        start: 0,
        end: None,
    };

    pub fn from_start(start: usize) -> Self {
        EvalWindow { start, end: None }
    }

    pub fn contains(&self, t: usize) -> bool {
        t >= self.start && self.end.is_none_or(|e| t < e)
    }
}

impl Default for EvalWindow {
    fn default() -> Self {
        EvalWindow::ALL
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub visible: u64,
    pub matched: u64,
    pub switches: u64,
}

impl ObjectRecord {
    fn add(&mut self, o: &ObjectRecord) {
        self.visible += o.visible;
        self.matched += o.matched;
        self.switches += o.switches;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceStats {
    pub misses_total: u64,
    pub fps_total: u64,
    pub switches_total: u64,
    pub objects_total: u64,
    pub matches_total: u64,
    iou_sum_fixed: u128,
    /// Keyed by (sequence index, ground-truth id).
    pub objects: BTreeMap<(u64, u32), ObjectRecord>,
    pub sq_err_sum: u64,
    pub sq_err_count: u64,
    /// Sequence index → number of ground-truth objects in its scene.
    pub sequences: BTreeMap<u64, usize>,
    /// Sequence new per-object records are filed under.
    sequence: u64,
}

impl Default for SequenceStats {
    fn default() -> Self {
        SequenceStats {
            misses_total: 0,
            fps_total: 0,
            switches_total: 0,
            objects_total: 0,
            matches_total: 0,
            iou_sum_fixed: 0,
            objects: BTreeMap::new(),
            sq_err_sum: 0,
            sq_err_count: 0,
            sequences: BTreeMap::new(),
            sequence: u64::MAX,
        }
    }
}

impl SequenceStats {
    /// Empty stats for sequence `index` whose scene has `object_count`
    /// objects.
    pub fn new(index: u64, object_count: usize) -> Self {
        SequenceStats {
            sequences: BTreeMap::from([(index, object_count)]),
            sequence: index,
            ..Default::default()
        }
    }

    /// Σ IoU over all matches.
    pub fn iou_sum(&self) -> f64 {
        self.iou_sum_fixed as f64 / IOU_SCALE
    }

    /// Scene object count when all merged sequences agree on it.
    pub fn object_count(&self) -> Option<usize> {
        let mut it = self.sequences.values();
        let first = *it.next()?;
        it.all(|&c| c == first).then_some(first)
    }

    /// Counts the events of frame `t` if it lies inside `window`.
    pub fn accumulate(&mut self, result: &FrameMatchResult, t: usize, window: EvalWindow) {
        if !window.contains(t) {
            return;
        }
        self.misses_total += result.misses.len() as u64;
        self.fps_total += result.false_positives.len() as u64;
        self.switches_total += result.id_switches.len() as u64;
        self.objects_total += result.num_visible() as u64;
        self.matches_total += result.pairs.len() as u64;
        for p in &result.pairs {
            self.iou_sum_fixed += (p.iou * IOU_SCALE).round() as u128;
        }
        let seq = self.sequence;
        for gt in result.visible() {
            self.objects.entry((seq, gt)).or_default().visible += 1;
        }
        for p in &result.pairs {
            self.objects.entry((seq, p.gt)).or_default().matched += 1;
        }
        for &gt in &result.id_switches {
            self.objects.entry((seq, gt)).or_default().switches += 1;
        }
    }

    /// Adds the squared reconstruction error of frame `t` if it lies inside
    /// `window`. Errors are summed in 8-bit units.
    pub fn accumulate_reconstruction(
        &mut self,
        reconstruction: &Frame,
        frame: &Frame,
        t: usize,
        window: EvalWindow,
    ) -> Result<()> {
        if (reconstruction.height(), reconstruction.width()) != (frame.height(), frame.width()) {
            return Err(Error::invalid("reconstruction shape differs from frame"));
        }
        if !window.contains(t) {
            return Ok(());
        }
        for (&a, &b) in reconstruction.as_raw().iter().zip(frame.as_raw()) {
            let d = u64::from(a.abs_diff(b));
            self.sq_err_sum += d * d;
        }
        self.sq_err_count += frame.as_raw().len() as u64;
        Ok(())
    }

    /// Componentwise sum. Meant for stats of disjoint sequences.
    pub fn merge(&self, other: &SequenceStats) -> SequenceStats {
        let mut objects = self.objects.clone();
        for (k, r) in &other.objects {
            objects.entry(*k).or_default().add(r);
        }
        let mut sequences = self.sequences.clone();
        sequences.extend(other.sequences.iter().map(|(&k, &v)| (k, v)));
        SequenceStats {
            misses_total: self.misses_total + other.misses_total,
            fps_total: self.fps_total + other.fps_total,
            switches_total: self.switches_total + other.switches_total,
            objects_total: self.objects_total + other.objects_total,
            matches_total: self.matches_total + other.matches_total,
            iou_sum_fixed: self.iou_sum_fixed + other.iou_sum_fixed,
            objects,
            sq_err_sum: self.sq_err_sum + other.sq_err_sum,
            sq_err_count: self.sq_err_count + other.sq_err_count,
            sequences,
            sequence: self.sequence.min(other.sequence),
        }
    }

    pub fn merge_all<'a>(stats: impl IntoIterator<Item = &'a SequenceStats>) -> SequenceStats {
        stats
            .into_iter()
            .fold(SequenceStats::default(), |acc, s| acc.merge(s))
    }
}

/// 1 − (misses + false positives + ID switches) / object occurrences.
pub fn mota(stats: &SequenceStats) -> Result<f64> {
    if stats.objects_total == 0 {
        return Err(Error::UndefinedMetric("MOTA needs at least one object occurrence"));
    }
    let failures = stats.misses_total + stats.fps_total + stats.switches_total;
    Ok(1.0 - failures as f64 / stats.objects_total as f64)
}

/// Mean IoU over all matches.
pub fn motp(stats: &SequenceStats) -> Result<f64> {
    if stats.matches_total == 0 {
        return Err(Error::UndefinedMetric("MOTP needs at least one match"));
    }
    Ok(stats.iou_sum() / stats.matches_total as f64)
}

/// Mostly detected and mostly tracked fractions. An object is detected if it
/// is matched in at least `lifespan` of the frames it is visible in, and
/// tracked if in addition it never switched identity. Objects never visible
/// are not counted.
pub fn md_mt(stats: &SequenceStats, lifespan: f64) -> Result<(f64, f64)> {
    let (mut eligible, mut detected, mut tracked) = (0u64, 0u64, 0u64);
    for r in stats.objects.values().filter(|r| r.visible > 0) {
        eligible += 1;
        // Slack absorbs rounding in lifespan × visible (e.g. 0.8 × 10).
        if r.matched as f64 >= lifespan * r.visible as f64 - 1e-9 {
            detected += 1;
            if r.switches == 0 {
                tracked += 1;
            }
        }
    }
    if eligible == 0 {
        return Err(Error::UndefinedMetric("MD/MT need at least one visible object"));
    }
    Ok((detected as f64 / eligible as f64, tracked as f64 / eligible as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureFractions {
    pub match_frac: f64,
    pub miss_frac: f64,
    pub idsw_frac: f64,
    pub fp_frac: f64,
}

/// Each event count over the number of object occurrences.
pub fn failure_fractions(stats: &SequenceStats) -> Result<FailureFractions> {
    if stats.objects_total == 0 {
        return Err(Error::UndefinedMetric("failure fractions need at least one object occurrence"));
    }
    let o = stats.objects_total as f64;
    Ok(FailureFractions {
        match_frac: stats.matches_total as f64 / o,
        miss_frac: stats.misses_total as f64 / o,
        idsw_frac: stats.switches_total as f64 / o,
        fp_frac: stats.fps_total as f64 / o,
    })
}

/// Mean squared error over all values of all frames. Each element of the
/// slices is one flattened image.
pub fn mse(reconstructions: &[Vec<f64>], frames: &[Vec<f64>]) -> Result<f64> {
    if reconstructions.len() != frames.len() {
        return Err(Error::invalid(format!(
            "{} reconstructions for {} frames",
            reconstructions.len(),
            frames.len()
        )));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (r, f) in reconstructions.iter().zip(frames) {
        if r.len() != f.len() {
            return Err(Error::invalid("reconstruction shape differs from frame"));
        }
        sum += r.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        n += f.len();
    }
    if n == 0 {
        return Err(Error::UndefinedMetric("MSE of empty images"));
    }
    Ok(sum / n as f64)
}

impl SequenceStats {
    /// MSE in [0, 1] intensity units, if any reconstructions were counted.
    pub fn mse(&self) -> Option<f64> {
        (self.sq_err_count > 0)
            .then(|| self.sq_err_sum as f64 / (self.sq_err_count as f64 * 255.0 * 255.0))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub sequences: u64,
    pub objects: u64,
    pub occurrences: u64,
    pub matches: u64,
    pub misses: u64,
    pub id_switches: u64,
    pub false_positives: u64,
}

impl From<&SequenceStats> for EventCounts {
    fn from(s: &SequenceStats) -> Self {
        EventCounts {
            sequences: s.sequences.len() as u64,
            objects: s.objects.values().filter(|r| r.visible > 0).count() as u64,
            occurrences: s.objects_total,
            matches: s.matches_total,
            misses: s.misses_total,
            id_switches: s.switches_total,
            false_positives: s.fps_total,
        }
    }
}

/// The metric suite for one set of sequences; `None` marks an undefined
/// metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mota: Option<f64>,
    pub motp: Option<f64>,
    pub md: Option<f64>,
    pub mt: Option<f64>,
    pub match_frac: Option<f64>,
    pub miss_frac: Option<f64>,
    pub idsw_frac: Option<f64>,
    pub fp_frac: Option<f64>,
    pub mse: Option<f64>,
    pub counts: EventCounts,
}

impl Metrics {
    pub fn from_stats(stats: &SequenceStats, lifespan: f64) -> Self {
        let f = failure_fractions(stats).ok();
        let mdmt = md_mt(stats, lifespan).ok();
        Metrics {
            mota: mota(stats).ok(),
            motp: motp(stats).ok(),
            md: mdmt.map(|x| x.0),
            mt: mdmt.map(|x| x.1),
            match_frac: f.map(|f| f.match_frac),
            miss_frac: f.map(|f| f.miss_frac),
            idsw_frac: f.map(|f| f.idsw_frac),
            fp_frac: f.map(|f| f.fp_frac),
            mse: stats.mse(),
            counts: stats.into(),
        }
    }
}

/// Per-sequence stats merged by their scene's object count.
pub fn group_by_object_count(per_sequence: &[SequenceStats]) -> BTreeMap<usize, SequenceStats> {
    let mut groups: BTreeMap<usize, SequenceStats> = BTreeMap::new();
    for s in per_sequence {
        if let Some(count) = s.object_count() {
            let g = groups.entry(count).or_default();
            *g = g.merge(s);
        }
    }
    groups
}

/// Metrics for each object-count group.
pub fn breakdown_by_object_count(per_sequence: &[SequenceStats], lifespan: f64) -> BTreeMap<usize, Metrics> {
    group_by_object_count(per_sequence)
        .iter()
        .map(|(&k, s)| (k, Metrics::from_stats(s, lifespan)))
        .collect()
}

/// Parameters a report was computed with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub iou_threshold: f64,
    pub background_iou_threshold: f64,
    pub eval_start: usize,
    pub lifespan_threshold: f64,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            iou_threshold: 0.5,
            background_iou_threshold: 0.2,
            eval_start: 0,
            lifespan_threshold: DEFAULT_LIFESPAN_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub settings: ReportSettings,
    pub overall: Metrics,
    /// Keyed by number of objects in the scene.
    #[serde(default)]
    pub breakdown: BTreeMap<usize, Metrics>,
}

impl MetricsReport {
    pub fn from_stats(total: &SequenceStats, settings: ReportSettings) -> Self {
        MetricsReport {
            settings,
            overall: Metrics::from_stats(total, settings.lifespan_threshold),
            breakdown: BTreeMap::new(),
        }
    }

    pub fn with_breakdown(mut self, per_sequence: &[SequenceStats]) -> Self {
        self.breakdown = breakdown_by_object_count(per_sequence, self.settings.lifespan_threshold);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::MatchPair;
    use std::collections::BTreeSet;

    fn stats(objects: u64, misses: u64, fps: u64, switches: u64) -> SequenceStats {
        SequenceStats {
            objects_total: objects,
            matches_total: objects - misses,
            misses_total: misses,
            fps_total: fps,
            switches_total: switches,
            ..SequenceStats::new(0, 1)
        }
    }

    fn frame(pairs: &[(u32, u32, f64)], misses: &[u32], fps: &[u32], sw: &[u32]) -> FrameMatchResult {
        FrameMatchResult {
            pairs: pairs
                .iter()
                .map(|&(gt, hyp, iou)| MatchPair { gt, hyp, iou })
                .collect(),
            misses: misses.iter().copied().collect(),
            false_positives: fps.iter().copied().collect(),
            id_switches: sw.iter().copied().collect::<BTreeSet<_>>(),
        }
    }

    #[test]
    fn mota_examples() {
        assert_eq!(mota(&stats(10, 0, 0, 0)).unwrap(), 1.0);
        assert!((mota(&stats(10, 1, 1, 0)).unwrap() - 0.8).abs() < 1e-15);
        assert!((mota(&stats(10, 0, 12, 0)).unwrap() + 0.2).abs() < 1e-15);
        assert!(matches!(mota(&SequenceStats::default()), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn motp_examples() {
        let mut s = SequenceStats::new(0, 2);
        s.accumulate(&frame(&[(1, 1, 0.6), (2, 2, 0.8)], &[], &[], &[]), 0, EvalWindow::ALL);
        assert!((motp(&s).unwrap() - 0.7).abs() < 1e-15);
        let mut s = SequenceStats::new(0, 1);
        for t in 0..5 {
            s.accumulate(&frame(&[(1, 1, 1.0)], &[], &[], &[]), t, EvalWindow::ALL);
        }
        assert_eq!(motp(&s).unwrap(), 1.0);
        assert!(motp(&SequenceStats::new(0, 1)).is_err());
    }

    fn track(visible: u64, matched: u64, switches: u64) -> SequenceStats {
        let mut s = SequenceStats::new(0, 1);
        for t in 0..visible as usize {
            let sw: &[u32] = if (t as u64) < switches { &[1] } else { &[] };
            if (t as u64) < matched {
                s.accumulate(&frame(&[(1, 1, 1.0)], &[], &[], sw), t, EvalWindow::ALL);
            } else {
                s.accumulate(&frame(&[], &[1], &[], &[]), t, EvalWindow::ALL);
            }
        }
        s
    }

    #[test]
    fn md_mt_lifespan_rule() {
        assert_eq!(md_mt(&track(10, 8, 0), 0.8).unwrap(), (1.0, 1.0));
        assert_eq!(md_mt(&track(10, 10, 1), 0.8).unwrap(), (1.0, 0.0));
        assert_eq!(md_mt(&track(10, 7, 0), 0.8).unwrap(), (0.0, 0.0));
        assert!(md_mt(&SequenceStats::new(0, 0), 0.8).is_err());
    }

    #[test]
    fn window_excludes_warm_start() {
        let w = EvalWindow::from_start(10);
        let mut s = SequenceStats::new(0, 1);
        for t in 0..20 {
            if t < 10 {
                s.accumulate(&frame(&[], &[1], &[7, 8], &[]), t, w);
            } else {
                s.accumulate(&frame(&[(1, 3, 1.0)], &[], &[], &[]), t, w);
            }
        }
        assert_eq!(mota(&s).unwrap(), 1.0);
        assert_eq!(s.objects_total, 10);
        assert_eq!(md_mt(&s, 0.8).unwrap(), (1.0, 1.0));

        let mut full = SequenceStats::new(0, 1);
        let mut windowed = SequenceStats::new(0, 1);
        let f = frame(&[(1, 3, 0.75)], &[2], &[9], &[1]);
        for t in 0..4 {
            full.accumulate(&f, t, EvalWindow::ALL);
            windowed.accumulate(&f, t, EvalWindow { start: 0, end: Some(4) });
        }
        assert_eq!(full, windowed);
    }

    #[test]
    fn empty_frame_changes_nothing() {
        let mut s = SequenceStats::new(3, 2);
        let before = s.clone();
        s.accumulate(&FrameMatchResult::default(), 0, EvalWindow::ALL);
        assert_eq!(s, before);
    }

    #[test]
    fn fractions() {
        let f = failure_fractions(&stats(10, 0, 0, 0)).unwrap();
        assert_eq!((f.match_frac, f.miss_frac, f.idsw_frac, f.fp_frac), (1.0, 0.0, 0.0, 0.0));
        let f = failure_fractions(&stats(4, 1, 9, 1)).unwrap();
        assert_eq!(f.match_frac + f.miss_frac, 1.0);
        assert!(f.fp_frac > 1.0);
    }

    #[test]
    fn mse_examples() {
        let a = vec![vec![0.25, 0.5, 0.75, 1.0]];
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&[vec![0.0; 12]], &[vec![1.0; 12]]).unwrap(), 1.0);
        // Half the values off by 0.5: (0.25 * 2) / 4.
        let r = vec![vec![0.5, 0.5, 0.0, 1.0]];
        let f = vec![vec![0.0, 1.0, 0.0, 1.0]];
        assert_eq!(mse(&r, &f).unwrap(), 0.125);
        assert!(mse(&r, &[vec![0.0; 3]]).is_err());
        assert!(mse(&r, &[]).is_err());
    }

    #[test]
    fn stats_mse_in_unit_range() {
        let mut s = SequenceStats::new(0, 0);
        let black = Frame::uniform(2, 2, [0; 3]);
        let white = Frame::uniform(2, 2, [255; 3]);
        s.accumulate_reconstruction(&black, &white, 0, EvalWindow::ALL).unwrap();
        assert_eq!(s.mse(), Some(1.0));
        s.accumulate_reconstruction(&white, &white, 1, EvalWindow::ALL).unwrap();
        assert_eq!(s.mse(), Some(0.5));
    }

    #[test]
    fn breakdown_groups() {
        let mut a = SequenceStats::new(0, 2);
        a.accumulate(&frame(&[(1, 1, 1.0)], &[2], &[], &[]), 0, EvalWindow::ALL);
        let mut b = SequenceStats::new(1, 2);
        b.accumulate(&frame(&[(1, 1, 1.0), (2, 2, 1.0)], &[], &[5], &[]), 0, EvalWindow::ALL);
        let mut c = SequenceStats::new(2, 3);
        c.accumulate(&frame(&[(1, 1, 1.0)], &[], &[], &[]), 0, EvalWindow::ALL);

        let only_two = breakdown_by_object_count(&[a.clone(), b.clone()], 0.8);
        assert_eq!(only_two.len(), 1);
        assert_eq!(only_two[&2], Metrics::from_stats(&a.merge(&b), 0.8));
        assert_eq!(only_two[&2].fp_frac, Some(0.25));
        assert_eq!(breakdown_by_object_count(&[a, b, c], 0.8).len(), 2);
        assert!(breakdown_by_object_count(&[], 0.8).is_empty());
    }

    #[test]
    fn merge_identity() {
        let mut a = SequenceStats::new(4, 2);
        a.accumulate(&frame(&[(1, 1, 0.62)], &[2], &[3], &[1]), 0, EvalWindow::ALL);
        assert_eq!(a.merge(&SequenceStats::default()), a);
        assert_eq!(SequenceStats::default().merge(&a), a);
    }
}
