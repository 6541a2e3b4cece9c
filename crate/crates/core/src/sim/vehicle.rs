use super::{SimConfig, LANES};

/// An in-progress lane change. `target` is always the lane currently steered
/// toward; a reversal swaps `origin` and `target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneChange {
    pub origin: usize,
    pub target: usize,
    pub steps_remaining: u32,
    /// Set while returning to the lane the maneuver started from.
    pub returning: bool,
}

impl LaneChange {
    /// Lateral velocity sign: +1 toward the left, -1 toward the right.
    pub fn direction(&self) -> f64 {
        if self.target > self.origin {
            1.0
        } else {
            -1.0
        }
    }

    /// Turns the maneuver around toward its origin lane.
    pub fn reversed(&self, total_steps: u32) -> LaneChange {
        LaneChange {
            origin: self.target,
            target: self.origin,
            steps_remaining: total_steps - self.steps_remaining,
            returning: !self.returning,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: usize,
    /// Arc position in `[0, circumference)`.
    pub x: f64,
    /// Lateral position measured from the right road edge.
    pub y: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub lane: usize,
    pub v_max: f64,
    pub length: f64,
    pub width: f64,
    pub lane_change: Option<LaneChange>,
}

impl VehicleState {
    /// A car centered in `lane`, not changing lanes.
    pub fn in_lane(id: usize, x: f64, lane: usize, v_x: f64, v_max: f64, cfg: &SimConfig) -> Self {
        Self {
            id,
            x,
            y: cfg.lane_center(lane),
            v_x,
            v_y: 0.0,
            lane,
            v_max,
            length: cfg.vehicle_length,
            width: cfg.vehicle_width,
            lane_change: None,
        }
    }

    /// True if any part of the maneuver envelope covers `lane`. A car mid
    /// lane-change occupies both its origin and target lanes.
    pub fn occupies(&self, lane: usize) -> bool {
        self.lane == lane || self.lane_change.is_some_and(|lc| lc.origin == lane || lc.target == lane)
    }
}

/// Maps any real position onto `[0, circumference)`.
pub fn wrap_position(x: f64, circumference: f64) -> f64 {
    let r = x.rem_euclid(circumference);
    if r >= circumference {
        0.0
    } else {
        r
    }
}

/// Center-to-center arc offset from `from` to `to`, in `(-C/2, C/2]`.
pub fn signed_offset(from: f64, to: f64, circumference: f64) -> f64 {
    let d = (to - from).rem_euclid(circumference);
    if d > circumference / 2.0 {
        d - circumference
    } else {
        d
    }
}

/// Bumper-to-bumper signed arc distance; positive when `to` is ahead,
/// zero while the two footprints overlap longitudinally.
pub fn rel_distance(from: &VehicleState, to: &VehicleState, circumference: f64) -> f64 {
    let dc = signed_offset(from.x, to.x, circumference);
    let half = 0.5 * (from.length + to.length);
    if dc > half {
        dc - half
    } else if dc < -half {
        dc + half
    } else {
        0.0
    }
}

/// Discrete-time double integrator: position advances with the current speed,
/// then speed integrates the acceleration and is clamped to `[0, v_max]`.
pub fn step_longitudinal(s: &VehicleState, a_x: f64, dt: f64, circumference: f64) -> VehicleState {
    debug_assert!(dt > 0.0);
    VehicleState {
        x: wrap_position(s.x + s.v_x * dt, circumference),
        v_x: (s.v_x + a_x * dt).clamp(0.0, s.v_max),
        ..s.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LateralStep {
    pub state: VehicleState,
    /// The commanded motion would have left the road and was clamped.
    pub clamped: bool,
    /// A lane change finished on this step.
    pub completed: bool,
}

/// Lateral kinematics `y' = y + v_y dt`, with lane bookkeeping for an
/// in-progress lane change. The lane index switches once the car is within
/// half a lane width of the target center; the maneuver ends (and snaps to the
/// lane center) when its step budget runs out.
pub fn step_lateral(s: &VehicleState, v_y: f64, dt: f64, cfg: &SimConfig) -> LateralStep {
    debug_assert!(dt > 0.0);
    let mut next = s.clone();
    let raw = s.y + v_y * dt;
    let y = raw.clamp(0.0, cfg.road_width());
    let clamped = y != raw;
    next.y = y;
    next.v_y = v_y;
    let mut completed = false;

    match s.lane_change {
        Some(lc) => {
            let remaining = lc.steps_remaining.saturating_sub(1);
            if remaining == 0 {
                next.y = cfg.lane_center(lc.target);
                next.lane = lc.target;
                next.v_y = 0.0;
                next.lane_change = None;
                completed = true;
            } else {
                next.lane = if (y - cfg.lane_center(lc.target)).abs() < cfg.lane_width / 2.0 {
                    lc.target
                } else {
                    lc.origin
                };
                next.lane_change = Some(LaneChange { steps_remaining: remaining, ..lc });
            }
        }
        None => {
            next.lane = cfg.lane_at(y).min(LANES - 1);
        }
    }

    LateralStep { state: next, clamped, completed }
}
