//! Ego-centric affordance indicators: the 27-entry network input.
//!
//! Layout (frozen; checkpoints record a hash of it):
//! `[cl_f, cl_r, rl_f, rl_r, ll_f, ll_r]`, each slot `[d_x, v_x, d_y, v_y]`,
//! followed by `[v_e_x, d_e_y, v_e_y]`. Lanes are ego-relative: `cl` is the
//! ego lane, `rl`/`ll` the adjacent lanes to the right/left.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::sim::{SimConfig, WorldState, EGO, LANES};

pub const AFFORDANCE_LEN: usize = 27;
const SLOT_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneRole {
    /// Right-adjacent lane.
    Right,
    /// Ego lane.
    Center,
    /// Left-adjacent lane.
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Front,
    Rear,
}

impl LaneRole {
    pub const ALL: [LaneRole; 3] = [LaneRole::Center, LaneRole::Right, LaneRole::Left];

    fn prefix(self) -> &'static str {
        match self {
            LaneRole::Right => "rl",
            LaneRole::Center => "cl",
            LaneRole::Left => "ll",
        }
    }

    /// Absolute lane for an ego in `ego_lane`, if it exists.
    pub fn resolve(self, ego_lane: usize) -> Option<usize> {
        let lane = match self {
            LaneRole::Right => ego_lane.checked_sub(1)?,
            LaneRole::Center => ego_lane,
            LaneRole::Left => ego_lane + 1,
        };
        (lane < LANES).then_some(lane)
    }

    /// Role of absolute `lane` seen from `ego_lane`.
    pub fn of(lane: usize, ego_lane: usize) -> Option<LaneRole> {
        match lane as isize - ego_lane as isize {
            -1 => Some(LaneRole::Right),
            0 => Some(LaneRole::Center),
            1 => Some(LaneRole::Left),
            _ => None,
        }
    }
}

/// Relative kinematics to one surrounding car, traffic minus ego.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotReading {
    pub d_x: f64,
    pub v_x: f64,
    pub d_y: f64,
    pub v_y: f64,
}

impl SlotReading {
    /// Slot of a lane that does not exist: the network sees a wall.
    pub const BLOCKED: SlotReading = SlotReading { d_x: 0.0, v_x: 0.0, d_y: 0.0, v_y: 0.0 };

    /// Nothing visible within `range`.
    pub fn empty(side: Side, range: f64) -> Self {
        let d_x = match side {
            Side::Front => range,
            Side::Rear => -range,
        };
        SlotReading { d_x, v_x: 0.0, d_y: 0.0, v_y: 0.0 }
    }

    /// Longitudinal gap magnitude and closing speed (positive when the gap shrinks).
    pub fn gap_and_closing(&self, side: Side) -> (f64, f64) {
        match side {
            Side::Front => (self.d_x, -self.v_x),
            Side::Rear => (-self.d_x, self.v_x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffordanceVector(pub [f64; AFFORDANCE_LEN]);

fn slot_offset(lane: LaneRole, side: Side) -> usize {
    let lane_idx = match lane {
        LaneRole::Center => 0,
        LaneRole::Right => 1,
        LaneRole::Left => 2,
    };
    let side_idx = match side {
        Side::Front => 0,
        Side::Rear => 1,
    };
    (2 * lane_idx + side_idx) * SLOT_LEN
}

pub const EGO_SPEED: usize = 24;
pub const EGO_LATERAL: usize = 25;
pub const EGO_LATERAL_SPEED: usize = 26;

impl AffordanceVector {
    pub fn slot(&self, lane: LaneRole, side: Side) -> SlotReading {
        let o = slot_offset(lane, side);
        let v = &self.0[o..o + SLOT_LEN];
        SlotReading { d_x: v[0], v_x: v[1], d_y: v[2], v_y: v[3] }
    }

    pub fn set_slot(&mut self, lane: LaneRole, side: Side, r: SlotReading) {
        let o = slot_offset(lane, side);
        self.0[o..o + SLOT_LEN].copy_from_slice(&[r.d_x, r.v_x, r.d_y, r.v_y]);
    }

    pub fn ego_speed(&self) -> f64 {
        self.0[EGO_SPEED]
    }

    /// Lateral ego position measured from the right-lane centerline.
    pub fn ego_lateral(&self) -> f64 {
        self.0[EGO_LATERAL]
    }

    pub fn ego_lateral_speed(&self) -> f64 {
        self.0[EGO_LATERAL_SPEED]
    }

    /// Distance to the preceding car in the ego lane (sensor range if none).
    pub fn lead_distance(&self) -> f64 {
        self.slot(LaneRole::Center, Side::Front).d_x
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Canonical entry names in vector order.
pub fn field_names() -> Vec<String> {
    let mut names = Vec::with_capacity(AFFORDANCE_LEN);
    for lane in LaneRole::ALL {
        for s in ['f', 'r'] {
            for (q, dir) in [("d", 'x'), ("v", 'x'), ("d", 'y'), ("v", 'y')] {
                names.push(format!("{q}_{}_{s}{dir}", lane.prefix()));
            }
        }
    }
    names.extend(["v_e_x", "d_e_y", "v_e_y"].map(String::from));
    names
}

/// First eight bytes of SHA-256 over the comma-joined field names.
pub fn ordering_hash() -> [u8; 8] {
    let digest = Sha256::digest(field_names().join(",").as_bytes());
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffordanceConfig {
    /// Cars farther than this (bumper to bumper) are invisible (m).
    pub sensor_range: f64,
    /// Velocity normalization (m/s).
    pub velocity_scale: f64,
}

impl Default for AffordanceConfig {
    fn default() -> Self {
        Self { sensor_range: 200.0, velocity_scale: 40.0 }
    }
}

/// Builds the affordance vector of the ego car.
pub fn extract(world: &WorldState, sim: &SimConfig, cfg: &AffordanceConfig) -> AffordanceVector {
    let ego = world.ego();
    let mut out = AffordanceVector([0.0; AFFORDANCE_LEN]);
    for role in LaneRole::ALL {
        for side in [Side::Front, Side::Rear] {
            let reading = match role.resolve(ego.lane) {
                None => SlotReading::BLOCKED,
                Some(lane) => match world.nearest_in_lane(EGO, lane, side == Side::Front, cfg.sensor_range) {
                    None => SlotReading::empty(side, cfg.sensor_range),
                    Some((j, d)) => {
                        let tv = &world.vehicles[j];
                        SlotReading { d_x: d, v_x: tv.v_x - ego.v_x, d_y: tv.y - ego.y, v_y: tv.v_y - ego.v_y }
                    }
                },
            };
            out.set_slot(role, side, reading);
        }
    }
    out.0[EGO_SPEED] = ego.v_x;
    out.0[EGO_LATERAL] = ego.y - sim.lane_width / 2.0;
    out.0[EGO_LATERAL_SPEED] = ego.v_y;
    out
}

/// Unitless network input: longitudinal distances over the sensor range,
/// lateral distances over the road width, velocities over the velocity scale.
pub fn normalize(v: &AffordanceVector, sim: &SimConfig, cfg: &AffordanceConfig) -> AffordanceVector {
    let road = sim.road_width();
    let mut out = *v;
    for (i, x) in out.0.iter_mut().enumerate() {
        let scale = if i < 24 {
            match i % SLOT_LEN {
                0 => cfg.sensor_range,
                2 => road,
                _ => cfg.velocity_scale,
            }
        } else {
            match i {
                EGO_LATERAL => road,
                _ => cfg.velocity_scale,
            }
        };
        *x /= scale;
    }
    out
}
