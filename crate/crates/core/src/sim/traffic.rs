//! Scripted traffic: time-to-collision thresholding with a stopping-distance
//! guard, plus random gap-checked lane changes.

use rand::Rng;

use super::{stopping_distance, Action, Lateral, Longitudinal, SimConfig, VehicleState, WorldState, LANES};
use crate::shield::{gap_ok, safe_longitudinal, time_to_collision, SafetyParams};

/// True if, after taking `lon` this step, `follower` could still stop behind a
/// leader that brakes as hard as possible from now on.
pub fn braking_safe(gap: f64, follower: &VehicleState, leader_speed: f64, lon: Longitudinal, cfg: &SimConfig) -> bool {
    let a = lon.acceleration(cfg.accel, cfg.hard_brake);
    let next_gap = gap + (leader_speed - follower.v_x) * cfg.dt;
    let v_follow = (follower.v_x + a * cfg.dt).clamp(0.0, follower.v_max);
    let v_lead = (leader_speed - cfg.hard_brake * cfg.dt).max(0.0);
    next_gap + stopping_distance(v_lead, cfg.hard_brake, cfg.dt) - stopping_distance(v_follow, cfg.hard_brake, cfg.dt)
        >= cfg.follow_min_gap
}

fn follow_action(me: &VehicleState, leader: Option<(&VehicleState, f64)>, cfg: &SimConfig, p: &SafetyParams) -> Longitudinal {
    let cruise = if me.v_x < me.v_max { Longitudinal::Accelerate } else { Longitudinal::Maintain };
    let Some((lead, gap)) = leader else {
        return cruise;
    };
    let ttc = time_to_collision(gap, me.v_x - lead.v_x);
    let mut lon = if ttc > p.accel_ttc {
        cruise
    } else if ttc > p.brake_ttc {
        Longitudinal::Maintain
    } else {
        safe_longitudinal(ttc, p)
    };
    while lon != Longitudinal::HardBrake && !braking_safe(gap, me, lead.v_x, lon, cfg) {
        lon = lon.softer();
    }
    lon
}

fn occupied_lanes(v: &VehicleState) -> impl Iterator<Item = usize> + '_ {
    (0..LANES).filter(move |&l| v.occupies(l))
}

fn lane_change_clear(world: &WorldState, i: usize, target: usize, cfg: &SimConfig, p: &SafetyParams) -> bool {
    let me = &world.vehicles[i];
    let own_front = world.nearest_in_lane(i, me.lane, true, f64::INFINITY);
    if let Some((j, d)) = own_front {
        if !gap_ok(d, me.v_x - world.vehicles[j].v_x, p) {
            return false;
        }
    }
    if let Some((j, d)) = world.nearest_in_lane(i, target, true, f64::INFINITY) {
        let front = &world.vehicles[j];
        if !gap_ok(d, me.v_x - front.v_x, p) || !braking_safe(d, me, front.v_x, Longitudinal::Maintain, cfg) {
            return false;
        }
    }
    if let Some((j, d)) = world.nearest_in_lane(i, target, false, f64::INFINITY) {
        let rear = &world.vehicles[j];
        if !gap_ok(-d, rear.v_x - me.v_x, p) || !braking_safe(-d, rear, me.v_x, Longitudinal::HardBrake, cfg) {
            return false;
        }
    }
    true
}

/// Decision of traffic vehicle `i` for the coming step.
///
/// Longitudinal: accelerate while the time to collision exceeds the
/// acceleration threshold, hold between the brake and acceleration thresholds,
/// brake below; then soften until the car could still stop behind a leader
/// braking at full strength. Every lane the car occupies contributes a leader.
/// Lateral: with the configured probability per step, pick an adjacent lane
/// and change only when the gap constraint holds toward the own preceding car
/// and both neighbors in the target lane.
pub fn traffic_policy<R: Rng + ?Sized>(i: usize, world: &WorldState, cfg: &SimConfig, p: &SafetyParams, rng: &mut R) -> Action {
    let me = &world.vehicles[i];
    let mut lon = follow_action(me, None, cfg, p);
    for lane in occupied_lanes(me) {
        let leader = world.nearest_in_lane(i, lane, true, f64::INFINITY).map(|(j, d)| (&world.vehicles[j], d));
        lon = lon.min_aggressive(follow_action(me, leader, cfg, p));
    }

    let mut lat = Lateral::Keep;
    if me.lane_change.is_none() && rng.gen::<f64>() < cfg.traffic_lane_change_prob {
        let options: Vec<usize> = [me.lane.checked_sub(1), Some(me.lane + 1)]
            .into_iter()
            .flatten()
            .filter(|&l| l < LANES)
            .collect();
        let target = options[rng.gen_range(0..options.len())];
        if lane_change_clear(world, i, target, cfg, p) {
            lat = Lateral::toward(me.lane, target);
        }
    }
    Action::new(lon, lat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(cars: &[(f64, usize, f64)]) -> (WorldState, SimConfig) {
        let cfg = SimConfig { traffic_lane_change_prob: 0.0, ..SimConfig::default() };
        let mut w = WorldState::with_ego(VehicleState::in_lane(0, 1000.0, 2, 20.0, 35.0, &cfg), &cfg);
        for (k, &(x, lane, v)) in cars.iter().enumerate() {
            w.vehicles.push(VehicleState::in_lane(k + 1, x, lane, v, 30.0, &cfg));
        }
        (w, cfg)
    }

    #[test]
    fn open_road_accelerates() {
        let (w, cfg) = setup(&[(100.0, 0, 20.0)]);
        let a = traffic_policy(1, &w, &cfg, &SafetyParams::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(a, Action::new(Longitudinal::Accelerate, Lateral::Keep));
    }

    #[test]
    fn imminent_collision_hard_brakes() {
        // gap 20 m closing at 20 m/s: T_C = 1 s.
        let (w, cfg) = setup(&[(100.0, 0, 30.0), (125.0, 0, 10.0)]);
        let a = traffic_policy(1, &w, &cfg, &SafetyParams::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(a.longitudinal, Longitudinal::HardBrake);
    }

    #[test]
    fn unsafe_target_lane_blocks_change() {
        let cfg = SimConfig { traffic_lane_change_prob: 1.0, ..SimConfig::default() };
        let mut w = WorldState::with_ego(VehicleState::in_lane(0, 1000.0, 2, 20.0, 35.0, &cfg), &cfg);
        w.vehicles.push(VehicleState::in_lane(1, 100.0, 0, 20.0, 30.0, &cfg));
        // Rear car in lane 1, 10 m behind and faster: gap constraint fails.
        w.vehicles.push(VehicleState::in_lane(2, 85.0, 1, 26.0, 30.0, &cfg));
        let p = SafetyParams::default();
        for seed in 0..20 {
            let a = traffic_policy(1, &w, &cfg, &p, &mut ChaCha8Rng::seed_from_u64(seed));
            assert_eq!(a.lateral, Lateral::Keep);
        }
        w.vehicles.pop();
        let a = traffic_policy(1, &w, &cfg, &p, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(a.lateral, Lateral::ChangeLeft);
    }

    #[test]
    fn braking_guard_softens_acceleration() {
        let cfg = SimConfig::default();
        let me = VehicleState::in_lane(1, 0.0, 0, 30.0, 32.0, &cfg);
        assert!(!braking_safe(20.0, &me, 20.0, Longitudinal::Accelerate, &cfg));
        assert!(braking_safe(200.0, &me, 20.0, Longitudinal::Accelerate, &cfg));
    }
}
