//! Centroid trajectories.
//!
//! VMDS objects follow Gaussian-process paths with a squared-exponential
//! kernel, shifted by a uniformly drawn starting centroid and rejected
//! wholesale when any frame leaves the centroid box. SpMOT objects move on
//! straight lines. The occlusion challenge set pins two paths to a shared
//! pixel at a sampled frame.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default time constant of the squared-exponential kernel, in frames.
pub const DEFAULT_TAU: f64 = 10.0;
/// Default centroid box, in pixels, on the 64×64 canvas.
pub const DEFAULT_BOUNDS: (f64, f64) = (10.0, 54.0);
pub const DEFAULT_MAX_REJECTS: usize = 1000;

/// Default per-axis SpMOT velocity range, px/frame at 128×128.
pub const SPMOT_SPEED_RANGE: (f64, f64) = (-3.0, 3.0);

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Linear-path coordinates are snapped to this grid so that positions and
/// their finite differences are exact in binary floating point.
const LINEAR_QUANTUM: f64 = 1.0 / 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Nearest integer pixel, rounding half away from zero.
    pub fn rounded(&self) -> (i64, i64) {
        (self.x.round() as i64, self.y.round() as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub tau: f64,
    pub bounds_lo: f64,
    pub bounds_hi: f64,
    pub length: usize,
    pub max_rejects: usize,
}

impl GpParams {
    pub fn new(length: usize) -> Self {
        GpParams {
            tau: DEFAULT_TAU,
            bounds_lo: DEFAULT_BOUNDS.0,
            bounds_hi: DEFAULT_BOUNDS.1,
            length,
            max_rejects: DEFAULT_MAX_REJECTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.bounds_lo < self.bounds_hi) || !self.bounds_hi.is_finite() {
            return Err(Error::invalid(format!(
                "bounds must satisfy lo < hi, got [{}, {}]",
                self.bounds_lo, self.bounds_hi
            )));
        }
        if self.length == 0 {
            return Err(Error::invalid("trajectory length must be at least 1"));
        }
        if self.max_rejects == 0 {
            return Err(Error::invalid("max_rejects must be at least 1"));
        }
        Ok(())
    }

    fn contains(&self, p: Point) -> bool {
        (self.bounds_lo..=self.bounds_hi).contains(&p.x)
            && (self.bounds_lo..=self.bounds_hi).contains(&p.y)
    }
}

/// One centroid per frame, plus the shift that was added to the zero-mean
/// process (for linear paths, the starting point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Point>,
    pub origin: Point,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points with the origin subtracted.
    pub fn deshifted(&self) -> Vec<Point> {
        self.points
            .iter()
            .map(|p| Point::new(p.x - self.origin.x, p.y - self.origin.y))
            .collect()
    }
}

/// Frame and pixel at which two trajectories share a rounded centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossingRecord {
    pub frame: usize,
    pub position: (i64, i64),
    pub objects: (usize, usize),
}

impl CrossingRecord {
    /// Checks the record against the trajectories it describes.
    pub fn verify(&self, trajectories: &[Trajectory]) -> bool {
        let (i, j) = self.objects;
        if i == j || i >= trajectories.len() || j >= trajectories.len() {
            return false;
        }
        let (Some(a), Some(b)) = (
            trajectories[i].points.get(self.frame),
            trajectories[j].points.get(self.frame),
        ) else {
            return false;
        };
        a.rounded() == self.position && b.rounded() == self.position
    }
}

/// exp(−(s−t)² / (2τ²))
pub fn se_kernel(s: f64, t: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    let d = s - t;
    Ok((-(d * d) / (2.0 * tau * tau)).exp())
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Kernel matrix over frames `0..length`.
pub fn gram_matrix(length: usize, tau: f64) -> Result<SquareMatrix> {
    if length == 0 {
        return Err(Error::invalid("gram matrix length must be at least 1"));
    }
    let mut m = SquareMatrix::zeros(length);
    for s in 0..length {
        for t in 0..=s {
            let k = se_kernel(s as f64, t as f64, tau)?;
            m.set(s, t, k);
            m.set(t, s, k);
        }
    }
    Ok(m)
}

/// Lower-triangular Cholesky factor of `m + jitter·I`.
///
/// Jitter starts at 1e-10 and grows tenfold up to 1e-6.
pub fn cholesky_with_jitter(m: &SquareMatrix) -> Result<(SquareMatrix, f64)> {
    let mut jitter = JITTER_START;
    loop {
        if let Some(l) = cholesky(m, jitter) {
            return Ok((l, jitter));
        }
        jitter *= 10.0;
        if jitter > JITTER_MAX * (1.0 + 1e-9) {
            return Err(Error::Numerical(format!(
                "cholesky failed for {}x{} matrix with jitter up to {JITTER_MAX:e}",
                m.n, m.n
            )));
        }
    }
}

fn cholesky(m: &SquareMatrix, jitter: f64) -> Option<SquareMatrix> {
    let n = m.n;
    let mut l = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m.get(i, j);
            if i == j {
                sum += jitter;
            }
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l.set(i, i, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// Draws zero-mean paths from a fixed Gram factor.
#[derive(Debug, Clone)]
pub struct GpSampler {
    params: GpParams,
    factor: SquareMatrix,
}

impl GpSampler {
    pub fn new(params: GpParams) -> Result<Self> {
        params.validate()?;
        let gram = gram_matrix(params.length, params.tau)?;
        let (factor, _) = cholesky_with_jitter(&gram)?;
        Ok(GpSampler { params, factor })
    }

    pub fn params(&self) -> &GpParams {
        &self.params
    }

    /// One zero-mean scalar path of `length` values.
    pub fn draw_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.params.length;
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        (0..n)
            .map(|i| (0..=i).map(|k| self.factor.get(i, k) * z[k]).sum())
            .collect()
    }

    fn draw_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Point> {
        let xs = self.draw_path(rng);
        let ys = self.draw_path(rng);
        xs.into_iter().zip(ys).map(|(x, y)| Point::new(x, y)).collect()
    }

    /// Shifted path with whole-trajectory rejection on the centroid box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Trajectory> {
        let p = &self.params;
        for _ in 0..p.max_rejects {
            let origin = Point::new(
                rng.random_range(p.bounds_lo..=p.bounds_hi),
                rng.random_range(p.bounds_lo..=p.bounds_hi),
            );
            let points: Vec<Point> = self
                .draw_pair(rng)
                .into_iter()
                .map(|d| Point::new(origin.x + d.x, origin.y + d.y))
                .collect();
            if points.iter().all(|&q| p.contains(q)) {
                return Ok(Trajectory { points, origin });
            }
        }
        Err(Error::GenerationExhausted {
            rejects: p.max_rejects,
        })
    }

    /// Path rigidly shifted so that frame `frame` sits exactly on `anchor`,
    /// or None if the shifted path leaves the centroid box.
    fn draw_through<R: Rng + ?Sized>(&self, rng: &mut R, frame: usize, anchor: Point) -> Option<Trajectory> {
        let dev = self.draw_pair(rng);
        let at = dev[frame];
        let points: Vec<Point> = dev
            .iter()
            .map(|d| Point::new((d.x - at.x) + anchor.x, (d.y - at.y) + anchor.y))
            .collect();
        if !points.iter().all(|&q| self.params.contains(q)) {
            return None;
        }
        let origin = Point::new(anchor.x - at.x, anchor.y - at.y);
        Some(Trajectory { points, origin })
    }
}

pub fn sample_trajectory<R: Rng + ?Sized>(rng: &mut R, params: &GpParams) -> Result<Trajectory> {
    GpSampler::new(*params)?.sample(rng)
}

/// Samples `n_objects` GP trajectories of which one randomly chosen pair
/// shares a rounded centroid at a randomly chosen frame.
pub fn sample_crossing_trajectories<R: Rng + ?Sized>(
    rng: &mut R,
    params: &GpParams,
    n_objects: usize,
) -> Result<(Vec<Trajectory>, CrossingRecord)> {
    if n_objects < 2 {
        return Err(Error::invalid(format!(
            "crossing needs at least 2 objects, got {n_objects}"
        )));
    }
    let sampler = GpSampler::new(*params)?;
    let lo = params.bounds_lo.ceil() as i64;
    let hi = params.bounds_hi.floor() as i64;
    if lo > hi {
        return Err(Error::invalid("centroid box contains no integer pixel"));
    }
    let first = rng.random_range(0..n_objects);
    let mut second = rng.random_range(0..n_objects - 1);
    if second >= first {
        second += 1;
    }
    let objects = (first.min(second), first.max(second));

    // Crossing frame, pixel and both paths are drawn jointly and rejected
    // together; a fixed anchor near the box edge can be infeasible.
    let mut crossing = None;
    for _ in 0..params.max_rejects {
        let frame = rng.random_range(0..params.length);
        let position = (rng.random_range(lo..=hi), rng.random_range(lo..=hi));
        let anchor = Point::new(position.0 as f64, position.1 as f64);
        let a = sampler.draw_through(rng, frame, anchor);
        let b = sampler.draw_through(rng, frame, anchor);
        if let (Some(a), Some(b)) = (a, b) {
            crossing = Some((frame, position, a, b));
            break;
        }
    }
    let Some((frame, position, a, b)) = crossing else {
        return Err(Error::GenerationExhausted {
            rejects: params.max_rejects,
        });
    };
    let mut pair = [Some(a), Some(b)].into_iter();

    let mut out = Vec::with_capacity(n_objects);
    for k in 0..n_objects {
        let tr = if k == objects.0 || k == objects.1 {
            pair.next().flatten().expect("two crossing paths")
        } else {
            sampler.sample(rng)?
        };
        out.push(tr);
    }
    Ok((
        out,
        CrossingRecord {
            frame,
            position,
            objects,
        },
    ))
}

fn quantize(v: f64) -> f64 {
    (v / LINEAR_QUANTUM).round() * LINEAR_QUANTUM
}

/// Straight-line path `p(t) = p(0) + t·v`; no rejection, the path may leave
/// the canvas.
pub fn sample_linear_trajectory<R: Rng + ?Sized>(
    rng: &mut R,
    length: usize,
    bounds: (f64, f64),
    speed: (f64, f64),
) -> Result<Trajectory> {
    if length == 0 {
        return Err(Error::invalid("trajectory length must be at least 1"));
    }
    if !(bounds.0 <= bounds.1) || !(speed.0 <= speed.1) {
        return Err(Error::invalid("empty bounds or speed range"));
    }
    let origin = Point::new(
        quantize(rng.random_range(bounds.0..=bounds.1)),
        quantize(rng.random_range(bounds.0..=bounds.1)),
    );
    let v = Point::new(
        quantize(rng.random_range(speed.0..=speed.1)),
        quantize(rng.random_range(speed.0..=speed.1)),
    );
    Ok(linear_path(origin, v, length))
}

pub fn linear_path(origin: Point, velocity: Point, length: usize) -> Trajectory {
    let points = (0..length)
        .map(|t| {
            let t = t as f64;
            Point::new(origin.x + t * velocity.x, origin.y + t * velocity.y)
        })
        .collect();
    Trajectory { points, origin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn kernel_values() {
        assert_eq!(se_kernel(5.0, 5.0, 10.0).unwrap(), 1.0);
        // exp(-1/2) and exp(-2), 20 digits from an mpmath evaluation
        let e_half = 0.606_530_659_712_633_423_6;
        let e_two = 0.135_335_283_236_612_691_89;
        assert!((se_kernel(0.0, 10.0, 10.0).unwrap() - e_half).abs() < 1e-15);
        assert!((se_kernel(0.0, 20.0, 10.0).unwrap() - e_two).abs() < 1e-15);
    }

    #[test]
    fn kernel_rejects_bad_tau() {
        assert!(matches!(se_kernel(0.0, 1.0, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(se_kernel(0.0, 1.0, -3.0), Err(Error::InvalidParameter(_))));
        assert!(se_kernel(0.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn kernel_symmetric_exhaustive() {
        for s in 0..32 {
            for t in 0..32 {
                let a = se_kernel(s as f64, t as f64, 10.0).unwrap();
                let b = se_kernel(t as f64, s as f64, 10.0).unwrap();
                assert_eq!(a, b);
                assert!(a > 0.0 && a <= 1.0);
            }
        }
    }

    #[test]
    fn small_gram_matrices() {
        let g = gram_matrix(1, 10.0).unwrap();
        assert_eq!(g.as_slice(), &[1.0]);
        let g = gram_matrix(2, 10.0).unwrap();
        let off = (-0.005f64).exp();
        assert_eq!(g.as_slice(), &[1.0, off, off, 1.0]);
        assert!(gram_matrix(0, 10.0).is_err());
    }

    #[test]
    fn cholesky_reconstructs() {
        let g = gram_matrix(20, 10.0).unwrap();
        let (l, jitter) = cholesky_with_jitter(&g).unwrap();
        assert!(jitter <= 1e-6);
        for i in 0..20 {
            for j in 0..20 {
                let v: f64 = (0..20).map(|k| l.get(i, k) * l.get(j, k)).sum();
                let want = g.get(i, j) + if i == j { jitter } else { 0.0 };
                assert!((v - want).abs() < 1e-9, "({i},{j}) {v} vs {want}");
            }
        }
    }

    #[test]
    fn cholesky_gives_up_on_indefinite() {
        let mut m = SquareMatrix::zeros(2);
        m.set(0, 0, 1.0);
        m.set(1, 1, -1.0);
        assert!(matches!(cholesky_with_jitter(&m), Err(Error::Numerical(_))));
    }

    #[test]
    fn single_frame_trajectory_in_box() {
        let mut rng = from_seed(1);
        for _ in 0..200 {
            let tr = sample_trajectory(&mut rng, &GpParams::new(1)).unwrap();
            assert_eq!(tr.len(), 1);
            let p = tr.points[0];
            assert!((10.0..=54.0).contains(&p.x) && (10.0..=54.0).contains(&p.y));
        }
    }

    #[test]
    fn trajectory_deterministic() {
        let p = GpParams::new(10);
        let a = sample_trajectory(&mut from_seed(9), &p).unwrap();
        let b = sample_trajectory(&mut from_seed(9), &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejection_exhaustion_reports_count() {
        // A box narrower than the process' spread almost never accepts.
        let p = GpParams {
            tau: 10.0,
            bounds_lo: 0.0,
            bounds_hi: 1e-3,
            length: 10,
            max_rejects: 5,
        };
        let err = sample_trajectory(&mut from_seed(0), &p).unwrap_err();
        assert!(matches!(err, Error::GenerationExhausted { rejects: 5 }));
    }

    #[test]
    fn crossing_self_consistent() {
        let p = GpParams::new(10);
        let mut rng = from_seed(3);
        for n in 2..=4 {
            for _ in 0..50 {
                let (trs, rec) = sample_crossing_trajectories(&mut rng, &p, n).unwrap();
                assert_eq!(trs.len(), n);
                assert!(rec.verify(&trs));
                for tr in &trs {
                    assert!(tr.points.iter().all(|q| p.contains(*q)));
                }
            }
        }
        assert!(sample_crossing_trajectories(&mut rng, &p, 1).is_err());
    }

    #[test]
    fn linear_paths() {
        let still = linear_path(Point::new(3.0, 4.0), Point::new(0.0, 0.0), 5);
        assert!(still.points.iter().all(|q| *q == Point::new(3.0, 4.0)));

        let mut rng = from_seed(5);
        for _ in 0..100 {
            let tr = sample_linear_trajectory(&mut rng, 10, (0.0, 128.0), SPMOT_SPEED_RANGE).unwrap();
            for w in tr.points.windows(3) {
                assert_eq!(w[2].x - 2.0 * w[1].x + w[0].x, 0.0);
                assert_eq!(w[2].y - 2.0 * w[1].y + w[0].y, 0.0);
            }
        }
        let a = sample_linear_trajectory(&mut from_seed(2), 10, (0.0, 128.0), (-3.0, 3.0)).unwrap();
        let b = sample_linear_trajectory(&mut from_seed(2), 10, (0.0, 128.0), (-3.0, 3.0)).unwrap();
        assert_eq!(a, b);
        assert!(sample_linear_trajectory(&mut rng, 0, (0.0, 1.0), (0.0, 0.0)).is_err());
    }
}
