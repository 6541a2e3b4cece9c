//! Ring-road world: point-mass kinematics, scripted traffic, spawning and
//! collision detection.

mod action;
mod collision;
mod spawn;
mod traffic;
mod trajectory;
mod vehicle;
mod world;

pub use action::{Action, Lateral, Longitudinal};
pub use collision::{detect_collision, footprints_overlap};
pub use spawn::{spawn_traffic, stopping_distance};
pub use traffic::{braking_safe, traffic_policy};
pub use trajectory::TrajectoryWriter;
pub use vehicle::{
    rel_distance, signed_offset, step_lateral, step_longitudinal, wrap_position, LaneChange, LateralStep,
    VehicleState,
};
pub use world::{apply_lateral_command, LateralOutcome, Simulation, StepOutcome, WorldState, EGO};

use serde::{Deserialize, Serialize};

/// Number of lanes on the ring; lane 0 is the rightmost.
pub const LANES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub circumference: f64,
    pub lane_width: f64,
    /// Sampling time (s).
    pub dt: f64,
    /// Lane change duration (s).
    pub lane_change_duration: f64,
    /// Nominal acceleration / braking magnitude (m/s²).
    pub accel: f64,
    /// Emergency braking magnitude (m/s²).
    pub hard_brake: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Traffic is placed within this arc distance of the ego car (m).
    pub spawn_range: f64,
    pub max_traffic: usize,
    pub spawn_attempts: usize,
    /// Minimum bumper-to-bumper gap between same-lane cars at spawn (m).
    pub spawn_min_gap: f64,
    pub traffic_v_max_low: f64,
    pub traffic_v_max_high: f64,
    /// Initial traffic speed is `v_max` times a factor drawn from `[this, 1]`.
    pub traffic_initial_speed_factor: f64,
    pub traffic_lane_change_prob: f64,
    /// Margin kept by traffic when checking it can still stop behind its leader (m).
    pub follow_min_gap: f64,
    pub ego_v_max: f64,
    pub ego_initial_speed_low: f64,
    pub ego_initial_speed_high: f64,
    pub ego_initial_lane: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            circumference: 2000.0,
            lane_width: 3.8,
            dt: 1.0,
            lane_change_duration: 5.0,
            accel: 2.0,
            hard_brake: 4.0,
            vehicle_length: 5.0,
            vehicle_width: 2.0,
            spawn_range: 250.0,
            max_traffic: 30,
            spawn_attempts: 1000,
            spawn_min_gap: 10.0,
            traffic_v_max_low: 20.0,
            traffic_v_max_high: 32.0,
            traffic_initial_speed_factor: 0.8,
            traffic_lane_change_prob: 0.02,
            follow_min_gap: 2.0,
            ego_v_max: 35.0,
            ego_initial_speed_low: 20.0,
            ego_initial_speed_high: 30.0,
            ego_initial_lane: 1,
        }
    }
}

impl SimConfig {
    pub fn road_width(&self) -> f64 {
        self.lane_width * LANES as f64
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        (lane as f64 + 0.5) * self.lane_width
    }

    /// Lane whose center is closest to `y`.
    pub fn lane_at(&self, y: f64) -> usize {
        let l = (y / self.lane_width).floor();
        l.clamp(0.0, (LANES - 1) as f64) as usize
    }

    /// Steps needed for a full lane change, `ceil(T_LC / dt)`.
    pub fn lane_change_steps(&self) -> u32 {
        (self.lane_change_duration / self.dt - 1e-9).ceil().max(1.0) as u32
    }

    /// Constant lateral speed of a lane change (m/s).
    pub fn lateral_speed(&self) -> f64 {
        self.lane_width / (self.lane_change_steps() as f64 * self.dt)
    }

    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::Config(m.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.circumference > 4.0 * self.spawn_range) {
            return bad("circumference must exceed four times the spawn range");
        }
        if !(self.lane_width > self.vehicle_width) {
            return bad("lane_width must exceed vehicle_width");
        }
        if !(self.traffic_v_max_low > 0.0 && self.traffic_v_max_low <= self.traffic_v_max_high) {
            return bad("traffic v_max range must be positive and ordered");
        }
        if !(0.0..=1.0).contains(&self.traffic_initial_speed_factor) {
            return bad("traffic_initial_speed_factor must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.traffic_lane_change_prob) {
            return bad("traffic_lane_change_prob must be in [0, 1]");
        }
        if self.ego_initial_lane >= LANES {
            return bad("ego_initial_lane out of range");
        }
        if !(self.ego_initial_speed_low <= self.ego_initial_speed_high && self.ego_initial_speed_high <= self.ego_v_max) {
            return bad("ego initial speed range must be ordered and below ego_v_max");
        }
        if !(self.accel > 0.0 && self.hard_brake >= self.accel) {
            return bad("hard_brake must be at least accel, both positive");
        }
        Ok(())
    }
}
