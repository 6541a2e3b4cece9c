//! Per-decision reward: equally weighted speed, lane and headway terms, each
//! in `(-1, 0]`, replaced by a fixed penalty on collision.

use serde::{Deserialize, Serialize};

use crate::affordance::AffordanceVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub v_des: f64,
    /// Desired lateral position, measured from the right-lane centerline.
    pub y_des: f64,
    /// Minimum time headway folded into the safe distance (s).
    pub headway_min: f64,
    /// Lower bound of the safe distance (m).
    pub d_safe_floor: f64,
    pub r_col: f64,
    /// Weights of the speed, lane and headway terms.
    pub weights: [f64; 3],
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            v_des: 30.0,
            y_des: 3.8,
            headway_min: 1.3,
            d_safe_floor: 20.0,
            r_col: -10.0,
            weights: [1.0 / 3.0; 3],
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.weights.iter().any(|w| *w < 0.0) {
            return Err(crate::Error::Config("reward weights must be non-negative and sum to 1".into()));
        }
        if !(self.headway_min > 0.0 && self.d_safe_floor > 0.0) {
            return Err(crate::Error::Config("headway_min and d_safe_floor must be positive".into()));
        }
        if !(self.r_col < -1.0) {
            return Err(crate::Error::Config("r_col must be below the shaped reward range".into()));
        }
        Ok(())
    }

    pub fn safe_distance(&self, v: f64) -> f64 {
        self.d_safe_floor.max(self.headway_min * v)
    }
}

pub fn speed_reward<T: Scalar>(v: T, v_des: T) -> T {
    let e = v - v_des;
    (-(e * e) / T::lit(10.0)).exp() - T::one()
}

pub fn lane_reward<T: Scalar>(d_y: T, y_des: T) -> T {
    let e = d_y - y_des;
    (-(e * e) / T::lit(10.0)).exp() - T::one()
}

/// Zero once the lead car is at least `d_safe` away.
pub fn headway_reward<T: Scalar>(d_lead: T, d_safe: T) -> T {
    if d_lead < d_safe {
        let e = d_lead - d_safe;
        (-(e * e) / (T::lit(10.0) * d_safe)).exp() - T::one()
    } else {
        T::zero()
    }
}

/// Reward of the transition into `next`. `state` and `action` are accepted
/// for interface symmetry; the shaped terms depend on the post-action state.
pub fn total_reward(_state: &AffordanceVector, next: &AffordanceVector, _action: usize, collided: bool, cfg: &RewardConfig) -> f64 {
    if collided {
        return cfg.r_col;
    }
    let v = next.ego_speed();
    let [wv, wy, wx] = cfg.weights;
    wv * speed_reward(v, cfg.v_des)
        + wy * lane_reward(next.ego_lateral(), cfg.y_des)
        + wx * headway_reward(next.lead_distance().max(0.0), cfg.safe_distance(v))
}
