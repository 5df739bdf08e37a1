//! Trajectory losses measuring how far an episode strays from the goal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::Trajectory;
use crate::scene::GoalRegion;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LossError {
    #[error("loss is undefined for an empty trajectory")]
    EmptyTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `Σ_t (t/T̂)·d_t`
    #[default]
    TimestepWeighted,
    /// `Σ_t d_t`
    Unweighted,
    /// `d_T̂`
    FinalStep,
}

impl LossKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LossKind::TimestepWeighted => "timestep_weighted",
            LossKind::Unweighted => "unweighted",
            LossKind::FinalStep => "final_step",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "timestep_weighted" | "weighted" => Ok(LossKind::TimestepWeighted),
            "unweighted" => Ok(LossKind::Unweighted),
            "final_step" => Ok(LossKind::FinalStep),
            _ => Err(format!("unknown loss kind {s:?}")),
        }
    }
}

/// What `d_t` measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalDistance {
    /// Euclidean distance to the goal center.
    #[default]
    Center,
    /// Distance to the goal disc, zero inside it.
    Boundary,
}

/// Per-step distances `d_1..d_T̂`.
pub fn step_distances(traj: &Trajectory, goal: &GoalRegion, mode: GoalDistance) -> Vec<f64> {
    traj.poses
        .iter()
        .map(|p| {
            let d = p.distance_to(goal.center);
            match mode {
                GoalDistance::Center => d,
                GoalDistance::Boundary => (d - goal.radius).max(0.0),
            }
        })
        .collect()
}

fn nonempty(traj: &Trajectory) -> Result<(), LossError> {
    if traj.is_empty() {
        Err(LossError::EmptyTrajectory)
    } else {
        Ok(())
    }
}

pub fn loss_timestep_weighted(traj: &Trajectory, goal: &GoalRegion) -> Result<f64, LossError> {
    trajectory_loss(LossKind::TimestepWeighted, traj, goal, GoalDistance::Center)
}

pub fn loss_unweighted(traj: &Trajectory, goal: &GoalRegion) -> Result<f64, LossError> {
    trajectory_loss(LossKind::Unweighted, traj, goal, GoalDistance::Center)
}

pub fn loss_final_step(traj: &Trajectory, goal: &GoalRegion) -> Result<f64, LossError> {
    trajectory_loss(LossKind::FinalStep, traj, goal, GoalDistance::Center)
}

pub fn trajectory_loss(
    kind: LossKind,
    traj: &Trajectory,
    goal: &GoalRegion,
    mode: GoalDistance,
) -> Result<f64, LossError> {
    nonempty(traj)?;
    let d = step_distances(traj, goal, mode);
    let n = d.len() as f64;
    Ok(match kind {
        LossKind::TimestepWeighted => d.iter().enumerate().map(|(i, di)| (i + 1) as f64 / n * di).sum(),
        LossKind::Unweighted => d.iter().sum(),
        LossKind::FinalStep => d[d.len() - 1],
    })
}

/// Projects `level` into `[min, max]`.
pub fn clip_intensity(level: f64, bounds: &crate::scene::IntensityBounds) -> f64 {
    bounds.clip(level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Action, IntensityBounds, Pose};

    fn traj_at(dists: &[f64]) -> Trajectory {
        let mut t = Trajectory::with_capacity(dists.len());
        for d in dists {
            t.push(Pose::new(0.0, -d, 0.0), Action::move_ahead(), 1.0);
        }
        t
    }

    fn goal() -> GoalRegion {
        GoalRegion {
            center: [0.0, 0.0],
            radius: 0.5,
        }
    }

    #[test]
    fn hand_values() {
        let g = goal();
        assert_eq!(loss_timestep_weighted(&traj_at(&[0.0, 0.0, 0.0]), &g).unwrap(), 0.0);
        assert_eq!(loss_timestep_weighted(&traj_at(&[3.0]), &g).unwrap(), 3.0);
        assert_eq!(loss_timestep_weighted(&traj_at(&[2.0, 1.0]), &g).unwrap(), 2.0);
        assert_eq!(loss_unweighted(&traj_at(&[2.0, 1.0]), &g).unwrap(), 3.0);
        assert_eq!(loss_unweighted(&traj_at(&[0.0, 0.0]), &g).unwrap(), 0.0);
        assert_eq!(loss_final_step(&traj_at(&[5.0, 1.0]), &g).unwrap(), 1.0);
        assert_eq!(loss_final_step(&traj_at(&[9.0, 0.0]), &g).unwrap(), 0.0);
        assert_eq!(
            loss_unweighted(&traj_at(&[2.5]), &g).unwrap(),
            loss_timestep_weighted(&traj_at(&[2.5]), &g).unwrap()
        );
    }

    #[test]
    fn empty_is_an_error() {
        let empty = Trajectory::with_capacity(0);
        assert_eq!(loss_final_step(&empty, &goal()), Err(LossError::EmptyTrajectory));
        assert_eq!(loss_unweighted(&empty, &goal()), Err(LossError::EmptyTrajectory));
        assert_eq!(loss_timestep_weighted(&empty, &goal()), Err(LossError::EmptyTrajectory));
    }

    #[test]
    fn boundary_distance() {
        let t = traj_at(&[0.2, 1.5]);
        let d = step_distances(&t, &goal(), GoalDistance::Boundary);
        assert_eq!(d, vec![0.0, 1.0]);
    }

    #[test]
    fn clip_examples() {
        let b = IntensityBounds::default();
        assert_eq!(clip_intensity(1.7, &b), 1.5);
        assert_eq!(clip_intensity(0.8, &b), 0.8);
        assert_eq!(clip_intensity(-0.2, &b), 0.0);
    }
}
