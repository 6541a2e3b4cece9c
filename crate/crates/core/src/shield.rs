//! Short-horizon safety check: gap constraint, IDM-style fallback action and
//! the three lane rules, applied to every proposed action before execution.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::affordance::{AffordanceVector, LaneRole, Side};
use crate::scalar::Scalar;
use crate::sim::{Action, LaneChange, Lateral, Longitudinal, LANES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyParams {
    /// Minimum time to collision in the gap constraint (s).
    pub min_ttc: f64,
    /// Minimum gap in the gap constraint (m).
    pub min_gap: f64,
    pub hard_brake_ttc: f64,
    pub brake_ttc: f64,
    pub accel_ttc: f64,
}

impl Default for SafetyParams {
    fn default() -> Self {
        Self { min_ttc: 3.0, min_gap: 15.0, hard_brake_ttc: 2.0, brake_ttc: 3.0, accel_ttc: 8.0 }
    }
}

impl SafetyParams {
    pub fn validate(&self) -> crate::Result<()> {
        if !(0.0 < self.hard_brake_ttc && self.hard_brake_ttc < self.brake_ttc && self.brake_ttc < self.accel_ttc) {
            return Err(crate::Error::Config("need 0 < hard_brake_ttc < brake_ttc < accel_ttc".into()));
        }
        if !(self.min_ttc >= 0.0 && self.min_gap >= 0.0) {
            return Err(crate::Error::Config("min_ttc and min_gap must be non-negative".into()));
        }
        Ok(())
    }
}

/// Gap constraint `d − T_min·v > d_min` (strict), with `v` the closing speed.
pub fn gap_ok<T: Scalar>(d: T, v_closing: T, p: &SafetyParams) -> bool {
    d - T::lit(p.min_ttc) * v_closing > T::lit(p.min_gap)
}

/// `d / v_closing` while closing, `+∞` otherwise.
pub fn time_to_collision<T: Scalar>(d: T, v_closing: T) -> T {
    if v_closing > T::zero() {
        d / v_closing
    } else {
        T::infinity()
    }
}

/// Fallback longitudinal action for a given time to collision.
pub fn safe_longitudinal<T: Scalar>(ttc: T, p: &SafetyParams) -> Longitudinal {
    if ttc <= T::lit(p.hard_brake_ttc) {
        Longitudinal::HardBrake
    } else if ttc <= T::lit(p.brake_ttc) {
        Longitudinal::Brake
    } else {
        Longitudinal::Maintain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShieldRule {
    /// Gap constraint violated behind a slower preceding car.
    GapRule,
    /// Lane change off the road.
    EdgeLaneRule,
    /// Lane change refused or aborted by the per-step gap monitor.
    LaneChangeMonitorRule,
    None,
}

impl ShieldRule {
    pub fn name(self) -> &'static str {
        match self {
            ShieldRule::GapRule => "gap",
            ShieldRule::EdgeLaneRule => "edge_lane",
            ShieldRule::LaneChangeMonitorRule => "lane_change_monitor",
            ShieldRule::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShieldVerdict {
    pub proposed: Action,
    pub executed: Action,
    pub overridden: bool,
    /// First rule that changed the action, in evaluation order.
    pub rule: ShieldRule,
}

/// Ego lane and maneuver state the shield needs beside the affordances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneContext {
    pub lane: usize,
    pub maneuver: Option<LaneChange>,
}

impl LaneContext {
    pub fn of(v: &crate::sim::VehicleState) -> Self {
        Self { lane: v.lane, maneuver: v.lane_change }
    }
}

/// Gap constraint against the preceding car and the front and rear cars of
/// `target`.
pub fn lane_move_safe(aff: &AffordanceVector, ego_lane: usize, target: usize, p: &SafetyParams) -> bool {
    let Some(role) = LaneRole::of(target, ego_lane) else {
        return false;
    };
    if target >= LANES {
        return false;
    }
    let checks = [
        (LaneRole::Center, Side::Front),
        (role, Side::Front),
        (role, Side::Rear),
    ];
    checks.iter().all(|&(lane, side)| {
        let (d, closing) = aff.slot(lane, side).gap_and_closing(side);
        gap_ok(d, closing, p)
    })
}

/// Validates `proposed` and substitutes a safe action where a rule fails.
///
/// Evaluation order: off-road lane changes (edge lanes), then the lane-change
/// gap monitor, then the in-lane gap rule on the longitudinal component.
/// The in-lane rule only engages while the ego car is closing on its
/// preceding car, and only ever makes the longitudinal action gentler.
pub fn check_and_override(aff: &AffordanceVector, proposed: Action, ctx: &LaneContext, p: &SafetyParams) -> ShieldVerdict {
    let mut lat = proposed.lateral;
    let mut lon = proposed.longitudinal;
    let mut rule = ShieldRule::None;
    let fire = |r: ShieldRule, rule: &mut ShieldRule| {
        if *rule == ShieldRule::None {
            *rule = r;
        }
    };

    match ctx.maneuver {
        None => {
            if lat != Lateral::Keep {
                let target = ctx.lane as isize + lat.lane_delta();
                if target < 0 || target >= LANES as isize {
                    lat = Lateral::Keep;
                    fire(ShieldRule::EdgeLaneRule, &mut rule);
                } else if !lane_move_safe(aff, ctx.lane, target as usize, p) {
                    lat = Lateral::Keep;
                    fire(ShieldRule::LaneChangeMonitorRule, &mut rule);
                }
            }
        }
        Some(lc) => {
            let back = Lateral::toward(lc.target, lc.origin);
            let reversing = lat != Lateral::Keep && lat == back;
            if reversing {
                // Turning a return around re-attempts the original lane change.
                if lc.returning && !lane_move_safe(aff, ctx.lane, lc.origin, p) {
                    lat = Lateral::Keep;
                    fire(ShieldRule::LaneChangeMonitorRule, &mut rule);
                }
            } else if !lc.returning && !lane_move_safe(aff, ctx.lane, lc.target, p) {
                lat = back;
                fire(ShieldRule::LaneChangeMonitorRule, &mut rule);
            }
        }
    }

    let (d, closing) = aff.slot(LaneRole::Center, Side::Front).gap_and_closing(Side::Front);
    if closing > 0.0 && !gap_ok(d, closing, p) {
        let safe = safe_longitudinal(time_to_collision(d, closing), p);
        if lon.aggressiveness() > safe.aggressiveness() {
            lon = safe;
            fire(ShieldRule::GapRule, &mut rule);
        }
    }

    let executed = Action::new(lon, lat);
    ShieldVerdict { proposed, executed, overridden: executed != proposed, rule }
}

/// CSV log of shield overrides: `episode,step,rule,proposed,executed`.
pub struct ShieldAuditLog<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> ShieldAuditLog<W> {
    pub fn new(inner: W) -> crate::Result<Self> {
        let mut out = csv::Writer::from_writer(inner);
        out.write_record(["episode", "step", "rule", "proposed", "executed"])?;
        Ok(Self { out })
    }

    pub fn record(&mut self, episode: usize, step: usize, v: &ShieldVerdict) -> crate::Result<()> {
        if v.overridden {
            self.out.write_record([
                episode.to_string(),
                step.to_string(),
                v.rule.name().to_string(),
                v.proposed.index().to_string(),
                v.executed.index().to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> crate::Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
