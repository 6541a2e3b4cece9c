//! From-scratch Q-network: 27→100→100→12 leaky-ReLU MLP, squared-error
//! gradient and Adam.

mod adam;
mod checkpoint;
mod mlp;

pub use adam::AdamState;
pub use checkpoint::{read_checkpoint_header, Checkpoint, CheckpointHeader, RngState, FORMAT_VERSION, MAGIC};
pub use mlp::{argmax, LossOutput, Mlp, Sample};

use serde::{Deserialize, Serialize};

use crate::affordance::AFFORDANCE_LEN;
use crate::sim::Action;

/// Layer widths of the decision network.
pub const ARCHITECTURE: [usize; 4] = [AFFORDANCE_LEN, 100, 100, Action::COUNT];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetConfig {
    pub hidden: Vec<usize>,
    pub leak: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for QNetConfig {
    fn default() -> Self {
        Self { hidden: vec![100, 100], leak: 0.01, learning_rate: 1e-4, adam_beta1: 0.9, adam_beta2: 0.999, adam_eps: 1e-8 }
    }
}

impl QNetConfig {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![AFFORDANCE_LEN];
        s.extend(&self.hidden);
        s.push(Action::COUNT);
        s
    }
}

/// Deep copy used as the target network.
pub fn copy_to_target<T: Clone>(online: &Mlp<T>) -> Mlp<T> {
    online.clone()
}
