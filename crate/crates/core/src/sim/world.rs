use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    detect_collision, rel_distance, signed_offset, spawn_traffic, step_lateral, step_longitudinal, traffic_policy,
    Action, LaneChange, Lateral, SimConfig, VehicleState, LANES,
};
use crate::shield::SafetyParams;

/// Index of the ego vehicle in [`WorldState::vehicles`].
pub const EGO: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    /// Index 0 is the ego car.
    pub vehicles: Vec<VehicleState>,
    pub circumference: f64,
    pub lane_width: f64,
    pub time_index: u64,
}

impl WorldState {
    /// A world holding only the ego car.
    pub fn with_ego(ego: VehicleState, cfg: &SimConfig) -> Self {
        Self { vehicles: vec![ego], circumference: cfg.circumference, lane_width: cfg.lane_width, time_index: 0 }
    }

    pub fn ego(&self) -> &VehicleState {
        &self.vehicles[EGO]
    }

    /// Closest vehicle occupying `lane` ahead of (`front`) or behind vehicle
    /// `from`, ranked by bumper-to-bumper distance, ties to the lower index.
    /// Cars overlapping longitudinally count as ahead when their center is
    /// not behind. Only cars within `range` are visible.
    pub fn nearest_in_lane(&self, from: usize, lane: usize, front: bool, range: f64) -> Option<(usize, f64)> {
        let me = &self.vehicles[from];
        let mut best: Option<(usize, f64)> = None;
        for (j, other) in self.vehicles.iter().enumerate() {
            if j == from || !other.occupies(lane) {
                continue;
            }
            let ahead = signed_offset(me.x, other.x, self.circumference) >= 0.0;
            if ahead != front {
                continue;
            }
            let d = rel_distance(me, other, self.circumference);
            if d.abs() > range {
                continue;
            }
            if best.map_or(true, |(_, b)| d.abs() < b.abs()) {
                best = Some((j, d));
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LateralOutcome {
    /// No lateral motion commanded or in progress.
    Idle,
    Started,
    Continued,
    Reversed,
    /// A lane change toward a lane that does not exist; ignored.
    OffRoad,
}

/// Interprets a lateral command for `v`: `Keep` or the current direction
/// continues a maneuver, the opposite direction turns it around.
pub fn apply_lateral_command(v: &mut VehicleState, lateral: Lateral, cfg: &SimConfig) -> LateralOutcome {
    match v.lane_change {
        Some(lc) => {
            if lateral != Lateral::Keep && lateral == Lateral::toward(lc.target, lc.origin) {
                v.lane_change = Some(lc.reversed(cfg.lane_change_steps()));
                LateralOutcome::Reversed
            } else {
                LateralOutcome::Continued
            }
        }
        None => {
            if lateral == Lateral::Keep {
                return LateralOutcome::Idle;
            }
            let target = v.lane as isize + lateral.lane_delta();
            if target < 0 || target >= LANES as isize {
                return LateralOutcome::OffRoad;
            }
            v.lane_change = Some(LaneChange {
                origin: v.lane,
                target: target as usize,
                steps_remaining: cfg.lane_change_steps(),
                returning: false,
            });
            LateralOutcome::Started
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub collision: Option<(usize, usize)>,
    pub ego_collided: bool,
    pub ego_lateral: LateralOutcome,
}

/// One episode's world plus the RNG driving traffic behavior.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub cfg: SimConfig,
    pub safety: SafetyParams,
    pub world: WorldState,
    rng: ChaCha8Rng,
}

impl Simulation {
    /// Places the ego car, spawns `n_cars` of traffic from `spawn_rng`, and
    /// keeps `behavior_rng` for traffic decisions.
    pub fn new_episode<R: Rng + ?Sized>(
        cfg: &SimConfig,
        safety: &SafetyParams,
        n_cars: usize,
        spawn_rng: &mut R,
        behavior_rng: ChaCha8Rng,
    ) -> crate::Result<Self> {
        let v0 = spawn_rng.gen_range(cfg.ego_initial_speed_low..=cfg.ego_initial_speed_high);
        let ego = VehicleState::in_lane(EGO, 0.0, cfg.ego_initial_lane, v0, cfg.ego_v_max, cfg);
        let world = spawn_traffic(spawn_rng, n_cars, WorldState::with_ego(ego, cfg), cfg)?;
        Ok(Self::from_world(cfg, safety, world, behavior_rng))
    }

    pub fn from_world(cfg: &SimConfig, safety: &SafetyParams, world: WorldState, rng: ChaCha8Rng) -> Self {
        Self { cfg: cfg.clone(), safety: safety.clone(), world, rng }
    }

    /// Advances the world by one sampling period. Lateral commands are
    /// resolved in index order (ego first) so each car sees maneuvers already
    /// committed this step; kinematics then update all cars simultaneously.
    pub fn step(&mut self, ego_action: Action) -> StepOutcome {
        let cfg = &self.cfg;
        let n = self.world.vehicles.len();
        let mut longitudinal = Vec::with_capacity(n);

        let ego_lateral = apply_lateral_command(&mut self.world.vehicles[EGO], ego_action.lateral, cfg);
        longitudinal.push(ego_action.longitudinal);

        for i in 1..n {
            let a = traffic_policy(i, &self.world, cfg, &self.safety, &mut self.rng);
            apply_lateral_command(&mut self.world.vehicles[i], a.lateral, cfg);
            longitudinal.push(a.longitudinal);
        }

        let v_lat = cfg.lateral_speed();
        for (v, lon) in self.world.vehicles.iter_mut().zip(longitudinal) {
            let a_x = lon.acceleration(cfg.accel, cfg.hard_brake);
            let v_y = v.lane_change.map_or(0.0, |lc| lc.direction() * v_lat);
            let moved = step_longitudinal(v, a_x, cfg.dt, cfg.circumference);
            *v = step_lateral(&moved, v_y, cfg.dt, cfg).state;
        }
        self.world.time_index += 1;

        let collision = detect_collision(&self.world);
        StepOutcome { collision, ego_collided: collision.is_some_and(|(a, b)| a == EGO || b == EGO), ego_lateral }
    }
}
