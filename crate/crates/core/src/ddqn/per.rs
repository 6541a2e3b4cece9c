use rand::Rng;

use super::replay::{Fifo, Transition};

/// Proportional prioritized replay over a single buffer.
///
/// Stored priorities are `(|δ| + ε_p)^α`; new transitions enter with the
/// largest priority seen so far. Sampling scans a prefix-sum table rebuilt
/// lazily after pushes and updates.
#[derive(Debug, Clone)]
pub struct PrioritizedBuffer {
    items: Fifo<(Transition, f64)>,
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    max_priority: f64,
    prefix: Vec<f64>,
    dirty: bool,
}

/// Indices into the buffer and their normalized importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PrioritizedBatch {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl PrioritizedBuffer {
    pub fn new(capacity: usize, alpha: f64, beta: f64, eps: f64) -> Self {
        Self { items: Fifo::new(capacity), alpha, beta, eps, max_priority: 1.0, prefix: Vec::new(), dirty: true }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        self.items.push((t, self.max_priority));
        self.dirty = true;
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items.get(i).expect("index from sample").0
    }

    pub fn priority(&self, i: usize) -> f64 {
        self.items.get(i).map_or(0.0, |e| e.1)
    }

    fn rebuild(&mut self) {
        if !self.dirty {
            return;
        }
        self.prefix.clear();
        let mut acc = 0.0;
        for (_, p) in self.items.iter() {
            acc += p;
            self.prefix.push(acc);
        }
        self.dirty = false;
    }

    /// Draws `n` indices with `P(i) ∝ p_i`. Weights are `(N·P(i))^(−β)`
    /// divided by the largest weight any stored transition could receive.
    pub fn sample<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Option<PrioritizedBatch> {
        if n == 0 || self.items.len() < n {
            return None;
        }
        self.rebuild();
        let total = *self.prefix.last()?;
        let len = self.items.len() as f64;
        let p_min = self.items.iter().map(|e| e.1).fold(f64::INFINITY, f64::min) / total;
        let w_max = (len * p_min).powf(-self.beta);

        let mut indices = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            let u = rng.gen::<f64>() * total;
            let i = self.prefix.partition_point(|&c| c <= u).min(self.items.len() - 1);
            let p = self.items.get(i).map_or(0.0, |e| e.1) / total;
            indices.push(i);
            weights.push((len * p).powf(-self.beta) / w_max);
        }
        Some(PrioritizedBatch { indices, weights })
    }

    /// Refreshes priorities from new TD errors.
    pub fn update(&mut self, indices: &[usize], td_errors: &[f64]) {
        for (&i, &d) in indices.iter().zip(td_errors) {
            let p = (d.abs() + self.eps).powf(self.alpha);
            if let Some(e) = self.items.get_mut(i) {
                e.1 = p;
            }
            self.max_priority = self.max_priority.max(p);
        }
        self.dirty = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affordance::{AffordanceVector, AFFORDANCE_LEN};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn buffer(n: usize, alpha: f64) -> PrioritizedBuffer {
        let mut b = PrioritizedBuffer::new(1000, alpha, 0.4, 1e-3);
        for i in 0..n {
            let s = AffordanceVector([i as f64; AFFORDANCE_LEN]);
            b.push(Transition::safe(s, 0, s, 0.0));
        }
        b
    }

    fn counts(b: &mut PrioritizedBuffer, draws: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut c = vec![0; b.len()];
        for _ in 0..draws / 10 {
            for i in b.sample(10, &mut rng).unwrap().indices {
                c[i] += 1;
            }
        }
        c
    }

    #[test]
    fn equal_priorities_sample_uniformly_with_unit_weights() {
        let mut b = buffer(10, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = b.sample(10, &mut rng).unwrap();
        assert!(batch.weights.iter().all(|&w| (w - 1.0).abs() < 1e-12));
        let c = counts(&mut b, 10_000);
        assert!(c.iter().all(|&k| (800..1200).contains(&k)), "{c:?}");
    }

    #[test]
    fn alpha_zero_ignores_errors() {
        let mut b = buffer(10, 0.0);
        b.update(&[3], &[100.0]);
        let c = counts(&mut b, 10_000);
        assert!(c.iter().all(|&k| (800..1200).contains(&k)), "{c:?}");
    }

    #[test]
    fn dominant_priority_dominates_draws() {
        let mut b = buffer(10, 1.0);
        let others: Vec<usize> = (0..10).collect();
        b.update(&others, &[0.0; 10]);
        b.update(&[4], &[10.0]);
        // p_4 = 10.001, others 0.001 each: P(4) ≈ 0.9991
        let c = counts(&mut b, 10_000);
        assert!(c[4] > 9_950, "{c:?}");
    }

    #[test]
    fn rare_samples_get_larger_weights() {
        let mut b = buffer(4, 1.0);
        b.update(&[0, 1, 2, 3], &[1.0, 1.0, 1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = b.sample(4, &mut rng).unwrap();
        for (&i, &w) in batch.indices.iter().zip(&batch.weights) {
            if i == 3 {
                assert!((w - 1.0).abs() < 1e-12);
            } else {
                assert!(w < 1.0);
            }
        }
    }
}
