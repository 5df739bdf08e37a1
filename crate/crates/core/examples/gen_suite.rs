//! Regenerates the bundled scene suite.
//!
//!     cargo run -p lightattack --example gen_suite -- crates/core/assets/suite
//!
//! Every emitted scene is checked to be solved by the goal seeker under
//! nominal lighting with the `bump` profile.

use std::f64::consts::TAU;
use std::path::PathBuf;

use lightattack::agent::GoalSeekerFactory;
use lightattack::episode::{run_episode, EpisodeSpec, World};
use lightattack::render::DegradationProfile;
use lightattack::scene::{save_scene, GoalRegion, IntensityBounds, Pose, Rect, Scene};
use lightattack::schedule::LightingSchedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COUNT: usize = 50;
const SEED: u64 = 20240601;
const MAX_STEPS: u32 = 150;
const CORRIDOR: f64 = 0.7;

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dz) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dz * dz;
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dz) / len2).clamp(0.0, 1.0);
    ((p[0] - a[0] - t * dx).powi(2) + (p[1] - a[1] - t * dz).powi(2)).sqrt()
}

fn rect_clear_of_segment(r: &Rect, a: [f64; 2], b: [f64; 2]) -> bool {
    if r.intersects_segment(a, b) {
        return false;
    }
    let corners = [r.min, r.max, [r.min[0], r.max[1]], [r.max[0], r.min[1]]];
    let near_corner = corners.iter().any(|&c| segment_distance(c, a, b) < CORRIDOR);
    let near_end = [a, b].iter().any(|p| {
        let cx = p[0].clamp(r.min[0], r.max[0]);
        let cz = p[1].clamp(r.min[1], r.max[1]);
        ((p[0] - cx).powi(2) + (p[1] - cz).powi(2)).sqrt() < CORRIDOR
    });
    // the segment may pass between two corners close to a long edge
    let samples = (0..=20).map(|i| {
        let t = f64::from(i) / 20.0;
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    });
    let near_edge = samples.into_iter().any(|p| {
        let cx = p[0].clamp(r.min[0], r.max[0]);
        let cz = p[1].clamp(r.min[1], r.max[1]);
        ((p[0] - cx).powi(2) + (p[1] - cz).powi(2)).sqrt() < CORRIDOR
    });
    !(near_corner || near_end || near_edge)
}

/// Snaps to a multiple of `q`, then to two decimals so the files stay readable.
fn round(v: f64, q: f64) -> f64 {
    ((v / q).round() * q * 100.0).round() / 100.0
}

fn candidate(rng: &mut ChaCha8Rng, index: usize) -> Scene {
    let width = round(rng.gen_range(6.0..10.0), 0.5);
    let depth = round(rng.gen_range(8.0..14.0), 0.5);
    let start_xy = [
        round(rng.gen_range(1.0..width - 1.0), 0.25),
        round(rng.gen_range(0.75..2.0), 0.25),
    ];
    let goal_xy = [
        round(rng.gen_range(1.0..width - 1.0), 0.25),
        round(rng.gen_range(depth - 3.5..depth - 1.0), 0.25),
    ];
    let heading = f64::from(rng.gen_range(0..12u32)) * TAU / 12.0;
    let mut walls = Vec::new();
    let wanted = rng.gen_range(3..8);
    for _ in 0..200 {
        if walls.len() >= wanted {
            break;
        }
        let w = round(rng.gen_range(0.3..2.5), 0.1);
        let d = round(rng.gen_range(0.3..2.5), 0.1);
        let x = round(rng.gen_range(0.0..width - w), 0.1);
        let z = round(rng.gen_range(0.0..depth - d), 0.1);
        let r = Rect::new([x, z], [round(x + w, 0.1), round(z + d, 0.1)]);
        if rect_clear_of_segment(&r, start_xy, goal_xy) {
            walls.push(r);
        }
    }
    Scene {
        id: format!("room{index:02}"),
        extent: Rect::new([0.0, 0.0], [width, depth]),
        walls,
        goal: GoalRegion {
            center: goal_xy,
            radius: round(rng.gen_range(0.3..0.5), 0.05),
        },
        start: Pose::new(start_xy[0], start_xy[1], heading),
        nominal_intensity: round(rng.gen_range(0.8..1.1), 0.05),
        intensity_bounds: IntensityBounds::default(),
    }
}

fn solved_clean(scene: &Scene) -> bool {
    let world = World::new(scene.clone(), DegradationProfile::bump());
    let schedule =
        LightingSchedule::constant(scene.nominal_intensity, scene.intensity_bounds).expect("nominal in bounds");
    let spec = EpisodeSpec::new(scene.id.clone(), MAX_STEPS, 0);
    run_episode(&GoalSeekerFactory, &world, &schedule, &spec)
        .map(|t| t.succeeded(scene))
        .unwrap_or(false)
}

fn main() {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "crates/core/assets/suite".into()),
    );
    std::fs::create_dir_all(&dir).expect("create suite dir");
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut written = 0;
    while written < COUNT {
        let scene = candidate(&mut rng, written);
        if scene.validate().is_err() || !solved_clean(&scene) {
            continue;
        }
        save_scene(&scene, dir.join(format!("{}.toml", scene.id))).expect("write scene");
        written += 1;
    }
    println!("wrote {written} scenes to {}", dir.display());
}
