//! Floor plans, poses, discrete actions and the deterministic state transition.
//!
//! Everything lives in the horizontal x–z plane. Heading `rot_y` is measured
//! about the vertical axis; the facing vector for heading `r` is
//! `(sin r, cos r)`, so `r = 0` faces +z and `r = π/2` faces +x.
//! `RotateRight` increases `rot_y`, `RotateLeft` decreases it.

mod file;

pub use file::{load_scene, load_suite, parse_scene, save_scene, scene_to_toml};

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::Trajectory;

/// Default forward step in meters.
pub const DEFAULT_STEP: f64 = 0.25;
/// Default turn increment in radians.
pub const DEFAULT_TURN: f64 = PI / 6.0;

/// Angles within this distance of 2π normalize to 0.
const ANGLE_SNAP: f64 = 1e-12;

/// Intensities are compared and keyed at this resolution.
pub const INTENSITY_QUANTUM: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene {id}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("invalid intensity bounds [{min}, {max}]")]
    Bounds { min: f64, max: f64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

/// Normalizes an angle into `[0, 2π)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if TAU - r < ANGLE_SNAP {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_signed(angle: f64) -> f64 {
    let r = normalize_angle(angle);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Rounds an intensity to [`INTENSITY_QUANTUM`].
pub fn quantize_intensity(level: f64) -> f64 {
    (level / INTENSITY_QUANTUM).round() * INTENSITY_QUANTUM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub z: f64,
    pub rot_y: f64,
}

impl Pose {
    pub fn new(x: f64, z: f64, rot_y: f64) -> Self {
        Self {
            x,
            z,
            rot_y: normalize_angle(rot_y),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.z]
    }

    pub fn facing(&self) -> [f64; 2] {
        [self.rot_y.sin(), self.rot_y.cos()]
    }

    pub fn distance_to(&self, point: [f64; 2]) -> f64 {
        (point[0] - self.x).hypot(point[1] - self.z)
    }
}

/// Axis-aligned rectangle in the x–z plane, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn is_valid(&self) -> bool {
        self.min.iter().chain(&self.max).all(|v| v.is_finite())
            && self.min[0] < self.max[0]
            && self.min[1] < self.max[1]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.min[0]..=self.max[0]).contains(&p[0]) && (self.min[1]..=self.max[1]).contains(&p[1])
    }

    /// Whether the closed segment `a → b` touches the rectangle.
    pub fn intersects_segment(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        let mut t_enter = 0.0_f64;
        let mut t_exit = 1.0_f64;
        for axis in 0..2 {
            let d = b[axis] - a[axis];
            if d == 0.0 {
                if a[axis] < self.min[axis] || a[axis] > self.max[axis] {
                    return false;
                }
                continue;
            }
            let mut t0 = (self.min[axis] - a[axis]) / d;
            let mut t1 = (self.max[axis] - a[axis]) / d;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
            if t_enter > t_exit {
                return false;
            }
        }
        true
    }

    /// Distance along a unit ray from an exterior origin to the first contact, if any.
    fn ray_entry(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
        let mut t_enter = 0.0_f64;
        let mut t_exit = f64::INFINITY;
        for axis in 0..2 {
            if dir[axis] == 0.0 {
                if origin[axis] < self.min[axis] || origin[axis] > self.max[axis] {
                    return None;
                }
                continue;
            }
            let mut t0 = (self.min[axis] - origin[axis]) / dir[axis];
            let mut t1 = (self.max[axis] - origin[axis]) / dir[axis];
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
            if t_enter > t_exit {
                return None;
            }
        }
        Some(t_enter)
    }

    /// Distance along a unit ray from an interior origin to the boundary.
    fn ray_exit(&self, origin: [f64; 2], dir: [f64; 2]) -> f64 {
        let mut t_exit = f64::INFINITY;
        for axis in 0..2 {
            if dir[axis] > 0.0 {
                t_exit = t_exit.min((self.max[axis] - origin[axis]) / dir[axis]);
            } else if dir[axis] < 0.0 {
                t_exit = t_exit.min((self.min[axis] - origin[axis]) / dir[axis]);
            }
        }
        t_exit.max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub center: [f64; 2],
    pub radius: f64,
}

impl GoalRegion {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1]) <= self.radius
    }
}

/// Closed intensity interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct IntensityBounds {
    pub min: f64,
    pub max: f64,
}

impl IntensityBounds {
    /// Accepts any finite `0 ≤ min ≤ max`; degenerate intervals are allowed here
    /// and rejected by [`Scene::validate`].
    pub fn new(min: f64, max: f64) -> Result<Self, SceneError> {
        if !(min.is_finite() && max.is_finite()) || min < 0.0 || min > max {
            return Err(SceneError::Bounds { min, max });
        }
        Ok(Self { min, max })
    }

    pub fn clip(&self, level: f64) -> f64 {
        level.max(self.min).min(self.max)
    }

    pub fn contains(&self, level: f64) -> bool {
        let q = quantize_intensity(level);
        q >= quantize_intensity(self.min) && q <= quantize_intensity(self.max)
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

impl Default for IntensityBounds {
    fn default() -> Self {
        Self { min: 0.0, max: 1.5 }
    }
}

impl TryFrom<[f64; 2]> for IntensityBounds {
    type Error = SceneError;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Self::new(v[0], v[1])
    }
}

impl From<IntensityBounds> for [f64; 2] {
    fn from(b: IntensityBounds) -> Self {
        [b.min, b.max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    MoveAhead { step: f64 },
    RotateLeft { angle: f64 },
    RotateRight { angle: f64 },
    Stop,
}

impl Action {
    pub fn move_ahead() -> Self {
        Action::MoveAhead { step: DEFAULT_STEP }
    }

    pub fn rotate_left() -> Self {
        Action::RotateLeft { angle: DEFAULT_TURN }
    }

    pub fn rotate_right() -> Self {
        Action::RotateRight { angle: DEFAULT_TURN }
    }

    pub fn is_stop(&self) -> bool {
        matches!(self, Action::Stop)
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            Action::MoveAhead { step } => step.is_finite() && step > 0.0,
            Action::RotateLeft { angle } | Action::RotateRight { angle } => {
                angle.is_finite() && angle > 0.0 && angle <= PI
            }
            Action::Stop => true,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::MoveAhead { step } => write!(f, "move_ahead {step}"),
            Action::RotateLeft { angle } => write!(f, "rotate_left {angle}"),
            Action::RotateRight { angle } => write!(f, "rotate_right {angle}"),
            Action::Stop => f.write_str("stop"),
        }
    }
}

impl std::str::FromStr for Action {
    type Err = String;

    /// Parses `move_ahead [step]`, `rotate_left [rad]`, `rotate_right [rad]` or `stop`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let name = parts.next().ok_or_else(|| "empty action".to_string())?;
        let arg = parts
            .next()
            .map(|v| v.parse::<f64>().map_err(|e| format!("bad argument {v:?}: {e}")))
            .transpose()?;
        if parts.next().is_some() {
            return Err(format!("trailing tokens in {s:?}"));
        }
        let action = match (name, arg) {
            ("move_ahead", a) => Action::MoveAhead {
                step: a.unwrap_or(DEFAULT_STEP),
            },
            ("rotate_left", a) => Action::RotateLeft {
                angle: a.unwrap_or(DEFAULT_TURN),
            },
            ("rotate_right", a) => Action::RotateRight {
                angle: a.unwrap_or(DEFAULT_TURN),
            },
            ("stop", None) => Action::Stop,
            _ => return Err(format!("unknown action {s:?}")),
        };
        if !action.is_valid() {
            return Err(format!("action out of range: {s:?}"));
        }
        Ok(action)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub extent: Rect,
    #[serde(default)]
    pub walls: Vec<Rect>,
    pub goal: GoalRegion,
    pub start: Pose,
    pub nominal_intensity: f64,
    pub intensity_bounds: IntensityBounds,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        let fail = |reason: &str| {
            Err(SceneError::Invalid {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        let b = self.intensity_bounds;
        if !(b.min >= 0.0 && b.min < b.max) {
            return fail("intensity bounds must satisfy 0 <= min < max");
        }
        if !self.extent.is_valid() {
            return fail("extent must be a non-degenerate finite rectangle");
        }
        if let Some(i) = self.walls.iter().position(|w| !w.is_valid()) {
            return fail(&format!("wall {i} is degenerate"));
        }
        if !(self.start.x.is_finite() && self.start.z.is_finite() && self.start.rot_y.is_finite()) {
            return fail("start pose must be finite");
        }
        if !self.extent.contains(self.start.position()) {
            return fail("start lies outside the extent");
        }
        if self.walls.iter().any(|w| w.contains(self.start.position())) {
            return fail("start lies inside a wall");
        }
        if !(self.goal.radius.is_finite() && self.goal.radius > 0.0) {
            return fail("goal radius must be positive");
        }
        if !self.extent.contains(self.goal.center) {
            return fail("goal center lies outside the extent");
        }
        if !(self.nominal_intensity.is_finite() && b.contains(self.nominal_intensity)) {
            return fail("nominal intensity must lie within the intensity bounds");
        }
        Ok(())
    }

    pub fn is_free(&self, p: [f64; 2]) -> bool {
        self.extent.contains(p) && !self.walls.iter().any(|w| w.contains(p))
    }

    /// Free-space distance along heading `angle` from `origin`, capped at `max_range`.
    pub fn cast_ray(&self, origin: [f64; 2], angle: f64, max_range: f64) -> f64 {
        let dir = [angle.sin(), angle.cos()];
        let mut best = self.extent.ray_exit(origin, dir).min(max_range);
        for wall in &self.walls {
            if let Some(t) = wall.ray_entry(origin, dir) {
                best = best.min(t);
            }
        }
        best
    }
}

/// Applies one action. Blocked or out-of-extent moves leave the pose unchanged.
pub fn transition(pose: &Pose, action: &Action, scene: &Scene) -> Pose {
    match *action {
        Action::MoveAhead { step } => {
            let [fx, fz] = pose.facing();
            let from = pose.position();
            let to = [pose.x + step * fx, pose.z + step * fz];
            let blocked = !scene.extent.contains(to) || scene.walls.iter().any(|w| w.intersects_segment(from, to));
            if blocked {
                *pose
            } else {
                Pose {
                    x: to[0],
                    z: to[1],
                    rot_y: pose.rot_y,
                }
            }
        }
        Action::RotateLeft { angle } => Pose::new(pose.x, pose.z, pose.rot_y - angle),
        Action::RotateRight { angle } => Pose::new(pose.x, pose.z, pose.rot_y + angle),
        Action::Stop => *pose,
    }
}

/// Success holds iff some step issued `Stop` while positioned inside the goal region.
pub fn check_success(trajectory: &Trajectory, scene: &Scene) -> bool {
    trajectory
        .poses
        .iter()
        .zip(&trajectory.actions)
        .any(|(pose, action)| action.is_stop() && scene.goal.contains(pose.position()))
}
