use rand::Rng;

use objmot::baselines::{color_tracker, oracle_tracker, ColorTrackerConfig};
use objmot::evaluate::{build_report, evaluate_sequence, EvalConfig, GroundTruth};
use objmot::metrics::SequenceStats;
use objmot::raster::{render_video, VideoSample};
use objmot::rng::from_seed;
use objmot::scene::{Rgb, SceneSpec, ScheduledObject, Shape, SpriteSpec, SPMOT_PALETTE};
use objmot::trajectory::{linear_path, Point};

/// Measured 1.0 on these 100 scenes; frozen with a little headroom.
const EASY_SCENE_MOTA_FLOOR: f64 = 0.95;

/// One or two well-separated objects with distinct colors, each moving
/// slowly inside its own half of the canvas.
fn easy_scene(seed: u64) -> VideoSample {
    let mut rng = from_seed(seed);
    let n = rng.random_range(1..=2usize);
    let first = rng.random_range(0..SPMOT_PALETTE.len());
    let second = (first + rng.random_range(1..SPMOT_PALETTE.len())) % SPMOT_PALETTE.len();
    let objects = (0..n)
        .map(|k| {
            let shape = [Shape::Square, Shape::Circle, Shape::Triangle][rng.random_range(0..3)];
            let x0 = if k == 0 { 16.0 } else { 48.0 };
            let origin = Point::new(x0 + rng.random_range(-3.0..3.0), rng.random_range(16.0..48.0));
            let velocity = Point::new(rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0));
            let scale_index = rng.random_range(0..=2);
            ScheduledObject {
                sprite: SpriteSpec {
                    shape,
                    scale_index,
                    orientation: 0.0,
                    color: SPMOT_PALETTE[if k == 0 { first } else { second }],
                },
                trajectory: linear_path(origin, velocity, 10),
                rotation_rate: 0.0,
                hue_rate: 0.0,
                size_schedule: vec![scale_index; 10],
                depth_rank: k as u32,
            }
        })
        .collect();
    render_video(&SceneSpec {
        objects,
        background_color: Rgb::BLACK,
        canvas: (64, 64),
        length: 10,
        crossing: None,
    })
}

fn score(sample: &VideoSample, index: usize, set: &objmot::storage::PredictionSet) -> SequenceStats {
    let gt = GroundTruth {
        index,
        num_objects: sample.scene.objects.len(),
        labels: &sample.gt,
        frames: Some(&sample.frames),
    };
    evaluate_sequence(gt, set, &EvalConfig::default()).unwrap()
}

#[test]
fn color_tracker_on_easy_scenes() {
    let config = ColorTrackerConfig::default();
    let per_seq: Vec<SequenceStats> = (0..100)
        .map(|i| {
            let s = easy_scene(1000 + i as u64);
            score(&s, i, &color_tracker(i, &s.frames, &config))
        })
        .collect();
    let report = build_report(&per_seq, &EvalConfig::default(), true);
    let mota = report.overall.mota.unwrap();
    assert!(mota >= EASY_SCENE_MOTA_FLOOR, "MOTA {mota}: {:?}", report.overall);
}

#[test]
fn oracle_is_perfect_on_easy_scenes() {
    for i in 0..20 {
        let s = easy_scene(2000 + i as u64);
        let stats = score(&s, i, &oracle_tracker(i, &s));
        assert_eq!(stats.misses_total + stats.fps_total + stats.switches_total, 0);
        assert_eq!(stats.mse(), Some(0.0));
    }
}
