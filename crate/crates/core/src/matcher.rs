//! Per-frame correspondence between ground-truth and predicted masks.
//!
//! Each frame is matched in three stages: correspondences remembered from
//! earlier frames are kept while their IoU still clears the threshold, the
//! remaining objects and hypotheses are paired by a maximum-IoU assignment,
//! and any object now paired with a different hypothesis than last time is
//! an ID switch.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::raster::{LabelMap, Mask};
use crate::{Error, Result};

/// Assignments whose totals differ by less than this are treated as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub iou_threshold: f64,
    pub background_iou_threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            iou_threshold: 0.5,
            background_iou_threshold: 0.2,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("iou threshold", self.iou_threshold),
            ("background iou threshold", self.background_iou_threshold),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub gt: u32,
    pub hyp: u32,
    pub iou: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameMatchResult {
    /// Sorted by ground-truth id.
    pub pairs: Vec<MatchPair>,
    pub misses: BTreeSet<u32>,
    pub false_positives: BTreeSet<u32>,
    pub id_switches: BTreeSet<u32>,
}

impl FrameMatchResult {
    /// Ground-truth objects with a nonempty mask in this frame.
    pub fn visible(&self) -> impl Iterator<Item = u32> + '_ {
        self.pairs.iter().map(|p| p.gt).chain(self.misses.iter().copied())
    }

    pub fn num_visible(&self) -> usize {
        self.pairs.len() + self.misses.len()
    }
}

/// Most recent hypothesis matched to each ground-truth object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrespondenceState {
    pub last_hypothesis: BTreeMap<u32, u32>,
}

/// |a ∧ b| / |a ∨ b|, 0 when both are empty.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::invalid(format!(
            "mask shapes differ: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(ratio(inter, union))
}

fn ratio(inter: usize, union: usize) -> f64 {
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

const NO_OWNER: u16 = 0;

/// Pairwise-disjoint, nonempty instance masks of one frame, keyed by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSet {
    height: usize,
    width: usize,
    ids: Vec<u32>,
    areas: Vec<usize>,
    /// Per pixel: 1 + index into `ids`, or 0.
    owner: Vec<u16>,
}

impl InstanceSet {
    pub fn empty(height: usize, width: usize) -> Self {
        InstanceSet {
            height,
            width,
            ids: Vec::new(),
            areas: Vec::new(),
            owner: vec![NO_OWNER; height * width],
        }
    }

    /// Every nonzero label becomes one instance.
    pub fn from_label_map(map: &LabelMap) -> Self {
        let present: Vec<u8> = map.present_labels().into_iter().collect();
        let mut slot = [NO_OWNER; 256];
        for (i, &l) in present.iter().enumerate() {
            slot[usize::from(l)] = i as u16 + 1;
        }
        let owner: Vec<u16> = map.as_raw().iter().map(|&l| slot[usize::from(l)]).collect();
        let mut set = InstanceSet {
            height: map.height(),
            width: map.width(),
            ids: present.iter().map(|&l| u32::from(l)).collect(),
            areas: Vec::new(),
            owner,
        };
        set.recount();
        set
    }

    /// Builds a set from explicit masks; overlapping masks are rejected and
    /// empty masks dropped.
    pub fn from_masks(height: usize, width: usize, masks: &[(u32, Mask)]) -> Result<Self> {
        if masks.len() >= usize::from(u16::MAX) {
            return Err(Error::InvalidInput("too many instances in one frame".into()));
        }
        let mut sorted: Vec<&(u32, Mask)> = masks.iter().collect();
        sorted.sort_by_key(|(id, _)| *id);
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("duplicate instance id".into()));
        }
        let mut set = InstanceSet::empty(height, width);
        for (id, mask) in sorted {
            if mask.height() != height || mask.width() != width {
                return Err(Error::invalid(format!(
                    "mask {id} is {}x{}, frame is {height}x{width}",
                    mask.height(),
                    mask.width()
                )));
            }
            if mask.is_empty() {
                continue;
            }
            set.ids.push(*id);
            let tag = set.ids.len() as u16;
            for (o, &bit) in set.owner.iter_mut().zip(mask.bits()) {
                if bit {
                    if *o != NO_OWNER {
                        return Err(Error::InvalidInput(format!(
                            "instance {id} overlaps instance {}",
                            set.ids[usize::from(*o) - 1]
                        )));
                    }
                    *o = tag;
                }
            }
        }
        set.recount();
        Ok(set)
    }

    fn recount(&mut self) {
        let mut areas = vec![0usize; self.ids.len()];
        for &o in &self.owner {
            if o != NO_OWNER {
                areas[usize::from(o) - 1] += 1;
            }
        }
        self.areas = areas;
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn mask(&self, id: u32) -> Option<Mask> {
        let idx = self.ids.iter().position(|&x| x == id)? as u16 + 1;
        let bits = self.owner.iter().map(|&o| o == idx).collect();
        Mask::from_bits(self.height, self.width, bits).ok()
    }

    /// Keeps only instances for which `keep` holds.
    pub fn retain(&mut self, mut keep: impl FnMut(u32) -> bool) {
        let mut remap = vec![NO_OWNER; self.ids.len() + 1];
        let mut ids = Vec::new();
        for (i, &id) in self.ids.iter().enumerate() {
            if keep(id) {
                ids.push(id);
                remap[i + 1] = ids.len() as u16;
            }
        }
        for o in &mut self.owner {
            *o = remap[usize::from(*o)];
        }
        self.ids = ids;
        self.recount();
    }

    /// IoU of every instance in `self` (rows) against every instance in
    /// `other` (columns).
    pub fn iou_matrix(&self, other: &InstanceSet) -> Result<Vec<Vec<f64>>> {
        if self.dims() != other.dims() {
            return Err(Error::invalid(format!(
                "frame shapes differ: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        let cols = other.ids.len();
        let mut inter = vec![0usize; self.ids.len() * cols];
        for (&a, &b) in self.owner.iter().zip(&other.owner) {
            if a != NO_OWNER && b != NO_OWNER {
                inter[(usize::from(a) - 1) * cols + usize::from(b) - 1] += 1;
            }
        }
        Ok((0..self.ids.len())
            .map(|r| {
                (0..cols)
                    .map(|c| {
                        let i = inter[r * cols + c];
                        ratio(i, self.areas[r] + other.areas[c] - i)
                    })
                    .collect()
            })
            .collect())
    }

    fn iou_with_mask(&self, index: usize, mask: &Mask) -> f64 {
        let tag = index as u16 + 1;
        let (mut inter, mut union) = (0usize, 0usize);
        for (&o, &bit) in self.owner.iter().zip(mask.bits()) {
            let mine = o == tag;
            inter += usize::from(mine && bit);
            union += usize::from(mine || bit);
        }
        ratio(inter, union)
    }
}

/// Drops every prediction whose IoU with some background mask is strictly
/// above `threshold`.
pub fn exclude_background(preds: &mut InstanceSet, background: &[Mask], threshold: f64) -> Result<()> {
    if background.is_empty() {
        return Ok(());
    }
    for m in background {
        if (m.height(), m.width()) != preds.dims() {
            return Err(Error::invalid("background mask shape differs from frame"));
        }
    }
    let drop: BTreeSet<u32> = (0..preds.len())
        .filter(|&i| background.iter().any(|m| preds.iou_with_mask(i, m) > threshold))
        .map(|i| preds.ids[i])
        .collect();
    preds.retain(|id| !drop.contains(&id));
    Ok(())
}

/// Maximum-weight square assignment (Kuhn–Munkres with potentials).
/// `w` is rows × cols with rows ≤ cols; returns the column of every row.
fn max_weight_assignment(w: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let n = w.len();
    let m = cols;
    debug_assert!(n <= m);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = -w[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

struct Scores<'a> {
    s: &'a [Vec<f64>],
    min_score: f64,
}

impl Scores<'_> {
    fn allowed(&self, r: usize, c: usize) -> bool {
        let v = self.s[r][c];
        v.is_finite() && v >= self.min_score
    }

    fn weight(&self, r: usize, c: usize) -> f64 {
        if self.allowed(r, c) {
            self.s[r][c]
        } else {
            0.0
        }
    }

    /// Best total over `rows` × `cols` using only allowed entries.
    fn best(&self, rows: &[usize], cols: &[usize]) -> f64 {
        if rows.is_empty() || cols.is_empty() {
            return 0.0;
        }
        let (a, b, transposed) = if rows.len() <= cols.len() {
            (rows, cols, false)
        } else {
            (cols, rows, true)
        };
        let w: Vec<Vec<f64>> = a
            .iter()
            .map(|&x| {
                b.iter()
                    .map(|&y| if transposed { self.weight(y, x) } else { self.weight(x, y) })
                    .collect()
            })
            .collect();
        let asg = max_weight_assignment(&w, b.len());
        asg.iter().enumerate().map(|(i, &j)| w[i][j]).sum()
    }
}

/// Optimal one-to-one partial assignment over entries `≥ min_score`,
/// maximizing the summed score. Among optimal assignments the one chosen
/// gives each row, in order, the lowest column still compatible with an
/// optimal total, leaving a row unassigned only when no column is.
pub fn hungarian(scores: &[Vec<f64>], min_score: f64) -> Vec<(usize, usize)> {
    let rows = scores.len();
    let cols = scores.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    debug_assert!(scores.iter().all(|r| r.len() == cols));
    let sc = Scores {
        s: scores,
        min_score,
    };
    let all_rows: Vec<usize> = (0..rows).collect();
    let mut free: Vec<usize> = (0..cols).collect();
    let target = sc.best(&all_rows, &free);
    if target == 0.0 {
        return Vec::new();
    }
    let mut prefix = 0.0;
    let mut out = Vec::new();
    for r in 0..rows {
        let rest_rows = &all_rows[r + 1..];
        let mut chosen = None;
        for (pos, &c) in free.iter().enumerate() {
            if !sc.allowed(r, c) {
                continue;
            }
            let mut others = free.clone();
            others.remove(pos);
            let total = prefix + scores[r][c] + sc.best(rest_rows, &others);
            if total >= target - TIE_TOLERANCE {
                chosen = Some(pos);
                break;
            }
        }
        if let Some(pos) = chosen {
            let c = free.remove(pos);
            prefix += scores[r][c];
            out.push((r, c));
        }
    }
    out
}

/// Matches one frame and advances `state`.
pub fn match_frame(
    state: &mut CorrespondenceState,
    gt: &InstanceSet,
    pred: &InstanceSet,
    config: &MatchConfig,
) -> Result<FrameMatchResult> {
    let ious = gt.iou_matrix(pred)?;
    let thr = config.iou_threshold;
    let hyp_index: BTreeMap<u32, usize> = pred.ids().iter().enumerate().map(|(i, &h)| (h, i)).collect();
    let mut gt_taken = vec![false; gt.len()];
    let mut hyp_taken = vec![false; pred.len()];
    let mut pairs = Vec::new();

    for (gi, &g) in gt.ids().iter().enumerate() {
        let Some(&h) = state.last_hypothesis.get(&g) else {
            continue;
        };
        let Some(&hi) = hyp_index.get(&h) else {
            continue;
        };
        if !hyp_taken[hi] && ious[gi][hi] >= thr {
            gt_taken[gi] = true;
            hyp_taken[hi] = true;
            pairs.push(MatchPair {
                gt: g,
                hyp: h,
                iou: ious[gi][hi],
            });
        }
    }

    let open_gt: Vec<usize> = (0..gt.len()).filter(|&i| !gt_taken[i]).collect();
    let open_hyp: Vec<usize> = (0..pred.len()).filter(|&i| !hyp_taken[i]).collect();
    let sub: Vec<Vec<f64>> = open_gt
        .iter()
        .map(|&gi| open_hyp.iter().map(|&hi| ious[gi][hi]).collect())
        .collect();
    for (r, c) in hungarian(&sub, thr) {
        let (gi, hi) = (open_gt[r], open_hyp[c]);
        gt_taken[gi] = true;
        hyp_taken[hi] = true;
        pairs.push(MatchPair {
            gt: gt.ids()[gi],
            hyp: pred.ids()[hi],
            iou: ious[gi][hi],
        });
    }
    pairs.sort_by_key(|p| p.gt);

    let mut id_switches = BTreeSet::new();
    for p in &pairs {
        if let Some(prev) = state.last_hypothesis.insert(p.gt, p.hyp) {
            if prev != p.hyp {
                id_switches.insert(p.gt);
            }
        }
    }
    Ok(FrameMatchResult {
        pairs,
        misses: (0..gt.len()).filter(|&i| !gt_taken[i]).map(|i| gt.ids()[i]).collect(),
        false_positives: (0..pred.len())
            .filter(|&i| !hyp_taken[i])
            .map(|i| pred.ids()[i])
            .collect(),
        id_switches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(h: usize, w: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Mask {
        let mut m = Mask::empty(h, w);
        for y in y0..y1 {
            for x in x0..x1 {
                m.set(x, y, true);
            }
        }
        m
    }

    fn labels(h: usize, w: usize, rects: &[(u8, usize, usize, usize, usize)]) -> InstanceSet {
        let mut map = LabelMap::zeros(h, w);
        for &(l, x0, y0, x1, y1) in rects {
            for y in y0..y1 {
                for x in x0..x1 {
                    map.set(x, y, l);
                }
            }
        }
        InstanceSet::from_label_map(&map)
    }

    #[test]
    fn iou_basics() {
        let a = rect(8, 8, 0, 0, 4, 2);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &rect(8, 8, 4, 4, 8, 6)).unwrap(), 0.0);
        // 4x2 shifted by 2 columns: inter 4, union 12.
        assert_eq!(iou(&a, &rect(8, 8, 2, 0, 6, 2)).unwrap(), 1.0 / 3.0);
        let e = Mask::empty(8, 8);
        assert_eq!(iou(&e, &e).unwrap(), 0.0);
        assert!(iou(&a, &Mask::empty(4, 8)).is_err());
    }

    #[test]
    fn iou_matrix_agrees_with_masks() {
        let g = labels(10, 10, &[(1, 0, 0, 5, 5), (2, 5, 5, 10, 10)]);
        let p = labels(10, 10, &[(7, 1, 1, 6, 6), (9, 5, 0, 10, 4)]);
        let m = g.iou_matrix(&p).unwrap();
        for (r, &gi) in g.ids().iter().enumerate() {
            for (c, &pi) in p.ids().iter().enumerate() {
                let want = iou(&g.mask(gi).unwrap(), &p.mask(pi).unwrap()).unwrap();
                assert_eq!(m[r][c], want);
            }
        }
    }

    #[test]
    fn overlapping_masks_rejected() {
        let a = rect(6, 6, 0, 0, 3, 3);
        let b = rect(6, 6, 2, 2, 5, 5);
        let err = InstanceSet::from_masks(6, 6, &[(1, a.clone()), (2, b)]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        let ok = InstanceSet::from_masks(6, 6, &[(4, a), (2, Mask::empty(6, 6))]).unwrap();
        assert_eq!(ok.ids(), &[4]);
    }

    #[test]
    fn background_exclusion() {
        let bg = rect(10, 10, 0, 0, 10, 5);
        let mut p = labels(10, 10, &[(1, 0, 0, 10, 5), (2, 0, 6, 3, 9)]);
        exclude_background(&mut p, &[bg], 0.2).unwrap();
        assert_eq!(p.ids(), &[2]);

        // IoU exactly 0.2: 10 pixels inside a 50-pixel background.
        let bg = rect(10, 10, 0, 0, 10, 5);
        let mut p = labels(10, 10, &[(3, 0, 0, 10, 1)]);
        exclude_background(&mut p, std::slice::from_ref(&bg), 0.2).unwrap();
        assert_eq!(p.ids(), &[3]);
        let mut q = labels(10, 10, &[(3, 0, 0, 10, 2)]);
        exclude_background(&mut q, &[], 0.2).unwrap();
        assert_eq!(q.ids(), &[3]);
    }

    #[test]
    fn hungarian_examples() {
        assert_eq!(hungarian(&[vec![0.9]], 0.5), vec![(0, 0)]);
        let m = vec![vec![0.6, 0.55], vec![0.55, 0.0]];
        assert_eq!(hungarian(&m, 0.5), vec![(0, 1), (1, 0)]);
        assert!(hungarian(&[vec![0.1, 0.4], vec![0.3, 0.2]], 0.5).is_empty());
        assert!(hungarian(&[], 0.5).is_empty());
        // Ties resolve to the lowest column per row.
        let t = vec![vec![0.7, 0.7], vec![0.7, 0.7]];
        assert_eq!(hungarian(&t, 0.5), vec![(0, 0), (1, 1)]);
        // Wide and tall shapes.
        assert_eq!(hungarian(&[vec![0.1, 0.8, 0.6]], 0.5), vec![(0, 1)]);
        assert_eq!(hungarian(&[vec![0.6], vec![0.9], vec![0.7]], 0.5), vec![(1, 0)]);
    }

    #[test]
    fn identical_frames_match_fully() {
        let g = labels(12, 12, &[(1, 0, 0, 4, 4), (2, 6, 6, 10, 10)]);
        let mut st = CorrespondenceState::default();
        let r = match_frame(&mut st, &g, &g, &MatchConfig::default()).unwrap();
        assert_eq!(r.pairs.len(), 2);
        assert!(r.misses.is_empty() && r.false_positives.is_empty() && r.id_switches.is_empty());
    }

    #[test]
    fn switch_detected_next_frame() {
        let g = labels(12, 12, &[(1, 0, 0, 4, 4)]);
        let cfg = MatchConfig::default();
        let mut st = CorrespondenceState::default();
        match_frame(&mut st, &g, &labels(12, 12, &[(1, 0, 0, 4, 4)]), &cfg).unwrap();
        let r = match_frame(&mut st, &g, &labels(12, 12, &[(2, 0, 0, 4, 4)]), &cfg).unwrap();
        assert_eq!(r.id_switches, BTreeSet::from([1]));
        assert_eq!(st.last_hypothesis[&1], 2);
    }

    #[test]
    fn occluded_object_is_neither_match_nor_miss() {
        let g = labels(12, 12, &[(2, 0, 0, 4, 4)]);
        let mut st = CorrespondenceState::default();
        let r = match_frame(&mut st, &g, &g, &MatchConfig::default()).unwrap();
        assert_eq!(r.num_visible(), 1);
        assert!(r.visible().all(|id| id == 2));
    }

    #[test]
    fn carry_over_beats_fresh_assignment() {
        // Disjoint hypotheses can both reach 0.5 against one object only at
        // an exact tie. Without memory the tie goes to the lower column
        // (hyp 5); remembering hyp 6 keeps hyp 6.
        let cfg = MatchConfig::default();
        let g = labels(10, 10, &[(1, 0, 0, 10, 2)]);
        let p = labels(10, 10, &[(5, 0, 0, 5, 2), (6, 5, 0, 10, 2)]);

        let mut fresh = CorrespondenceState::default();
        let r = match_frame(&mut fresh, &g, &p, &cfg).unwrap();
        assert_eq!(r.pairs[0].hyp, 5);

        let mut st = CorrespondenceState::default();
        st.last_hypothesis.insert(1, 6);
        let r = match_frame(&mut st, &g, &p, &cfg).unwrap();
        assert_eq!(r.pairs[0].hyp, 6);
        assert_eq!(r.pairs[0].iou, 0.5);
        assert!(r.id_switches.is_empty());
        assert_eq!(r.false_positives, BTreeSet::from([5]));
    }

    #[test]
    fn dimension_mismatch() {
        let mut st = CorrespondenceState::default();
        let a = InstanceSet::empty(4, 4);
        let b = InstanceSet::empty(4, 5);
        assert!(match_frame(&mut st, &a, &b, &MatchConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(MatchConfig::default().validate().is_ok());
        let bad = MatchConfig {
            iou_threshold: 1.01,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = MatchConfig {
            background_iou_threshold: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
