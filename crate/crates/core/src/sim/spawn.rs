use rand::Rng;

use super::{signed_offset, wrap_position, SimConfig, VehicleState, WorldState, EGO, LANES};
use crate::{Error, Result};

/// Distance covered while braking at `decel` from `v` to standstill under
/// the discrete-time integrator (position uses the pre-update speed).
pub fn stopping_distance(v: f64, decel: f64, dt: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let dv = decel * dt;
    let n = (v / dv).floor();
    dt * ((n + 1.0) * v - dv * n * (n + 1.0) / 2.0)
}

/// Adds `n_cars` traffic vehicles around the ego car of `world`.
///
/// Cars are drawn one at a time (lane, arc offset within `spawn_range`,
/// `v_max`, initial speed factor) and rejected while they overlap an existing
/// car; the first `k` placements therefore do not depend on `n_cars`. Initial
/// speeds are then lowered where needed so every follower can stop behind its
/// leader.
pub fn spawn_traffic<R: Rng + ?Sized>(rng: &mut R, n_cars: usize, mut world: WorldState, cfg: &SimConfig) -> Result<WorldState> {
    if n_cars == 0 || n_cars > cfg.max_traffic {
        return Err(Error::TrafficCount { requested: n_cars, max: cfg.max_traffic });
    }
    let ego_x = world.ego().x;
    let min_center_gap = cfg.vehicle_length + cfg.spawn_min_gap;

    for k in 0..n_cars {
        let id = world.vehicles.len();
        let mut placed = None;
        for _ in 0..cfg.spawn_attempts {
            let lane = rng.gen_range(0..LANES);
            let offset = rng.gen_range(-cfg.spawn_range..=cfg.spawn_range);
            let v_max = rng.gen_range(cfg.traffic_v_max_low..=cfg.traffic_v_max_high);
            let factor = rng.gen_range(cfg.traffic_initial_speed_factor..=1.0);
            let x = wrap_position(ego_x + offset, cfg.circumference);
            let clear = world.vehicles.iter().all(|v| {
                v.lane != lane || signed_offset(v.x, x, cfg.circumference).abs() >= min_center_gap
            });
            if clear {
                placed = Some(VehicleState::in_lane(id, x, lane, v_max * factor, v_max, cfg));
                break;
            }
        }
        match placed {
            Some(v) => world.vehicles.push(v),
            None => return Err(Error::SpawnFailed { vehicle: k, attempts: cfg.spawn_attempts }),
        }
    }

    cap_initial_speeds(&mut world, cfg);
    Ok(world)
}

fn cap_initial_speeds(world: &mut WorldState, cfg: &SimConfig) {
    let ego_x = world.vehicles[EGO].x;
    for lane in 0..LANES {
        let mut order: Vec<usize> = (0..world.vehicles.len()).filter(|&i| world.vehicles[i].lane == lane).collect();
        // front-most first
        order.sort_by(|&a, &b| {
            let oa = signed_offset(ego_x, world.vehicles[a].x, cfg.circumference);
            let ob = signed_offset(ego_x, world.vehicles[b].x, cfg.circumference);
            ob.total_cmp(&oa)
        });
        for pair in order.windows(2) {
            let (lead, follow) = (&world.vehicles[pair[0]], &world.vehicles[pair[1]]);
            let gap = super::rel_distance(follow, lead, cfg.circumference);
            let v_lead = lead.v_x;
            let mut v = follow.v_x;
            let d_lead = stopping_distance(v_lead, cfg.hard_brake, cfg.dt);
            while v > 0.0 && gap + d_lead - stopping_distance(v, cfg.hard_brake, cfg.dt) < cfg.follow_min_gap {
                v = (v - 0.5).max(0.0);
            }
            world.vehicles[pair[1]].v_x = v;
        }
    }
}
