//! Krauss car-following.
//!
//! With reaction time `tau` and deceleration `b`, the safe speed behind a
//! leader driving at `v_l` with effective gap `g` is
//!
//! ```text
//! v_safe = v_l + (g - v_l * tau) / ((v_l + v_f) / (2 b) + tau)
//! ```
//!
//! The desired speed is `min(cap, v_f + a dt, v_safe)` and driver imperfection
//! subtracts `sigma * a * dt * r` with `r ~ U[0, 1)`.

use rand::Rng;
use thiserror::Error;

use super::class::VehicleClass;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KraussError {
    #[error("negative gap {0} m to leader: vehicles already overlap")]
    NegativeGap(f64),
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
}

/// What a follower sees ahead of it: the leader's speed and the bumper-to-
/// bumper distance (leader rear minus follower front), in m/s and m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    pub speed: f64,
    pub gap: f64,
}

/// Safe speed behind `leader`, clamped at 0. `min_gap` is subtracted from the
/// raw gap before evaluation.
pub fn safe_speed(follower_speed: f64, leader: Leader, class: &VehicleClass, tau: f64) -> f64 {
    let gap_eff = (leader.gap - class.min_gap).max(0.0);
    let v_l = leader.speed;
    let denom = (v_l + follower_speed) / (2.0 * class.max_decel) + tau;
    (v_l + (gap_eff - v_l * tau) / denom).max(0.0)
}

/// Deterministic part of the update: next speed for a given noise sample `r`.
pub fn krauss_speed(
    follower_speed: f64,
    class: &VehicleClass,
    cap: f64,
    leader: Option<Leader>,
    dt: f64,
    r: f64,
) -> Result<f64, KraussError> {
    if !(dt > 0.0) {
        return Err(KraussError::NonPositiveStep(dt));
    }
    let mut desired = cap.min(follower_speed + class.max_accel * dt);
    if let Some(leader) = leader {
        if leader.gap < 0.0 {
            return Err(KraussError::NegativeGap(leader.gap));
        }
        desired = desired.min(safe_speed(follower_speed, leader, class, dt));
    }
    // imperfection never brakes harder than max_decel on its own
    let floor = desired.min(follower_speed - class.max_decel * dt);
    let dawdled = desired - class.sigma * class.max_accel * dt * r;
    Ok(dawdled.max(floor).max(0.0))
}

/// Krauss step drawing the imperfection sample from `rng`. Reaction time
/// equals the step length.
pub fn krauss_step<R: Rng + ?Sized>(
    follower_speed: f64,
    class: &VehicleClass,
    cap: f64,
    leader: Option<Leader>,
    dt: f64,
    rng: &mut R,
) -> Result<f64, KraussError> {
    let r: f64 = rng.random();
    krauss_speed(follower_speed, class, cap, leader, dt, r)
}
