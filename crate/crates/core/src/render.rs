//! Lighting-dependent observation model.
//!
//! Rendering first measures ground truth (egocentric goal bearing, goal
//! distance, obstacle rays) and then passes it through a
//! [`DegradationProfile`]. All corruption is drawn from a counter-based
//! generator keyed on `(seed, t, quantized intensity, channel, index)`, so an
//! observation is a pure function of its inputs.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{normalize_angle, quantize_intensity, wrap_signed, Pose, Scene};

pub const RAY_COUNT: usize = 8;
pub const RAY_RANGE: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("intensity {level} outside renderable domain [0, {max}]")]
    IntensityOutOfDomain { level: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub luminance: f64,
    /// Signed angle from the current heading to the goal, in `(-π, π]`; positive is clockwise (to the right).
    pub perceived_goal_bearing: Option<f64>,
    pub perceived_goal_distance: Option<f64>,
    pub obstacle_rays: Vec<f64>,
    pub timestep: u32,
}

impl Observation {
    pub fn goal_visible(&self) -> bool {
        self.perceived_goal_bearing.is_some() && self.perceived_goal_distance.is_some()
    }
}

/// Intensity-dependent magnitude used by the noise effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Curve {
    Constant {
        value: f64,
    },
    /// `slope · |l − pivot|`
    Linear {
        pivot: f64,
        slope: f64,
    },
    /// Compact biweight bump `peak · (1 − ((l − center)/half_width)²)²`, zero outside `center ± half_width`.
    Bump {
        center: f64,
        half_width: f64,
        peak: f64,
    },
    Sum {
        terms: Vec<Curve>,
    },
}

impl Curve {
    pub fn eval(&self, level: f64) -> f64 {
        match self {
            Curve::Constant { value } => *value,
            Curve::Linear { pivot, slope } => slope * (level - pivot).abs(),
            Curve::Bump {
                center,
                half_width,
                peak,
            } => {
                let u = (level - center) / half_width;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    let k = 1.0 - u * u;
                    peak * k * k
                }
            }
            Curve::Sum { terms } => terms.iter().map(|c| c.eval(level)).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    /// Additive Gaussian noise on the goal bearing.
    BearingNoise { sigma: Curve },
    /// Additive Gaussian noise on the goal distance, floored at zero.
    DistanceNoise { sigma: Curve },
    /// Goal fields become absent when `l < below` or `l > above`.
    Blackout {
        #[serde(default)]
        below: Option<f64>,
        #[serde(default)]
        above: Option<f64>,
    },
    /// Additive Gaussian noise on every obstacle ray, floored at zero.
    RayCorruption { sigma: Curve },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DegradationProfile {
    #[serde(default)]
    pub effects: Vec<Effect>,
}

impl DegradationProfile {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Bearing noise growing linearly away from `nominal`; zero at `nominal`.
    pub fn linear_bearing_noise(nominal: f64, slope: f64) -> Self {
        Self {
            effects: vec![Effect::BearingNoise {
                sigma: Curve::Linear { pivot: nominal, slope },
            }],
        }
    }

    pub fn blackout_below(threshold: f64) -> Self {
        Self {
            effects: vec![Effect::Blackout {
                below: Some(threshold),
                above: None,
            }],
        }
    }

    /// Reference profile for the bundled benchmark: blind in the dark, exact
    /// around nominal lighting, and increasingly confused as the scene washes
    /// out towards the top of the admissible range.
    pub fn bump() -> Self {
        Self {
            effects: vec![
                Effect::Blackout {
                    below: Some(0.05),
                    above: None,
                },
                Effect::BearingNoise {
                    sigma: Curve::Bump {
                        center: 1.5,
                        half_width: 0.3,
                        peak: 0.8,
                    },
                },
                Effect::DistanceNoise {
                    sigma: Curve::Bump {
                        center: 1.5,
                        half_width: 0.3,
                        peak: 0.1,
                    },
                },
            ],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "identity" | "none" => Some(Self::identity()),
            "bump" => Some(Self::bump()),
            _ => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.effects.is_empty()
    }
}

const CH_BEARING: u64 = 1;
const CH_DISTANCE: u64 = 2;
const CH_RAYS: u64 = 3;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Counter-based noise source for one `(seed, t, intensity)` cell.
#[derive(Debug, Clone, Copy)]
struct NoiseKey(u64);

impl NoiseKey {
    fn new(seed: u64, t: u32, level: f64) -> Self {
        let q = (quantize_intensity(level) / crate::scene::INTENSITY_QUANTUM).round() as i64;
        let mut h = splitmix64(seed);
        h = splitmix64(h ^ u64::from(t));
        h = splitmix64(h ^ q as u64);
        Self(h)
    }

    /// Uniform in the open interval (0, 1).
    fn uniform(self, channel: u64, index: u64) -> f64 {
        let h = splitmix64(splitmix64(self.0 ^ channel.wrapping_mul(0xA24B_AED4_963E_E407)) ^ index);
        ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    fn gaussian(self, channel: u64, index: u64) -> f64 {
        let u1 = self.uniform(channel, 2 * index);
        let u2 = self.uniform(channel, 2 * index + 1);
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }
}

/// Ground-truth egocentric observation with no degradation applied.
pub fn ground_truth(scene: &Scene, pose: &Pose, level: f64, t: u32) -> Observation {
    let dx = scene.goal.center[0] - pose.x;
    let dz = scene.goal.center[1] - pose.z;
    let bearing = wrap_signed(dx.atan2(dz) - pose.rot_y);
    let rays = (0..RAY_COUNT)
        .map(|k| {
            let angle = normalize_angle(pose.rot_y + TAU * k as f64 / RAY_COUNT as f64);
            scene.cast_ray(pose.position(), angle, RAY_RANGE)
        })
        .collect();
    Observation {
        luminance: level,
        perceived_goal_bearing: Some(bearing),
        perceived_goal_distance: Some(dx.hypot(dz)),
        obstacle_rays: rays,
        timestep: t,
    }
}

/// Renders the observation at `pose` under global intensity `level`.
///
/// `level` may be anywhere in `[0, l_max]`; zero is the switched-off level and
/// is admitted even when the scene's lower bound is positive.
pub fn render(
    scene: &Scene,
    pose: &Pose,
    level: f64,
    profile: &DegradationProfile,
    seed: u64,
    t: u32,
) -> Result<Observation, RenderError> {
    let max = scene.intensity_bounds.max;
    if !level.is_finite() || level < 0.0 || quantize_intensity(level) > quantize_intensity(max) {
        return Err(RenderError::IntensityOutOfDomain { level, max });
    }
    let mut obs = ground_truth(scene, pose, level, t);
    let key = NoiseKey::new(seed, t, level);
    for effect in &profile.effects {
        match effect {
            Effect::BearingNoise { sigma } => {
                let s = sigma.eval(level);
                if s != 0.0 {
                    if let Some(b) = obs.perceived_goal_bearing.as_mut() {
                        *b = wrap_signed(*b + s * key.gaussian(CH_BEARING, 0));
                    }
                }
            }
            Effect::DistanceNoise { sigma } => {
                let s = sigma.eval(level);
                if s != 0.0 {
                    if let Some(d) = obs.perceived_goal_distance.as_mut() {
                        *d = (*d + s * key.gaussian(CH_DISTANCE, 0)).max(0.0);
                    }
                }
            }
            Effect::Blackout { below, above } => {
                let dark = below.is_some_and(|b| level < b);
                let washed = above.is_some_and(|a| level > a);
                if dark || washed {
                    obs.perceived_goal_bearing = None;
                    obs.perceived_goal_distance = None;
                }
            }
            Effect::RayCorruption { sigma } => {
                let s = sigma.eval(level);
                if s != 0.0 {
                    for (i, r) in obs.obstacle_rays.iter_mut().enumerate() {
                        *r = (*r + s * key.gaussian(CH_RAYS, i as u64)).max(0.0);
                    }
                }
            }
        }
    }
    Ok(obs)
}
