use std::collections::VecDeque;

use rand::Rng;

use crate::affordance::AffordanceVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Safe,
    Collision,
}

/// One stored experience. Collision records (real collisions and shield
/// interceptions) carry no successor and are never bootstrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Normalized state.
    pub s: AffordanceVector,
    pub a: usize,
    pub s_next: Option<AffordanceVector>,
    pub r: f64,
}

impl Transition {
    pub fn safe(s: AffordanceVector, a: usize, s_next: AffordanceVector, r: f64) -> Self {
        Self { s, a, s_next: Some(s_next), r }
    }

    pub fn collision(s: AffordanceVector, a: usize, r_col: f64) -> Self {
        Self { s, a, s_next: None, r: r_col }
    }

    pub fn source(&self) -> Source {
        if self.s_next.is_some() {
            Source::Safe
        } else {
            Source::Collision
        }
    }
}

/// Bounded queue that drops its oldest entry when full.
#[derive(Debug, Clone)]
pub struct Fifo<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T> Fifo<T> {
    pub fn new(capacity: usize) -> Self {
        Self { items: VecDeque::with_capacity(capacity.min(1 << 16)), capacity }
    }

    /// Appends `x`, returning the evicted element if the queue was full.
    pub fn push(&mut self, x: T) -> Option<T> {
        if self.capacity == 0 {
            return Some(x);
        }
        let evicted = if self.items.len() == self.capacity { self.items.pop_front() } else { None };
        self.items.push_back(x);
        evicted
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.items.get(i)
    }

    pub fn get_mut(&mut self, i: usize) -> Option<&mut T> {
        self.items.get_mut(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}

/// Segregated safe and collision experience stores.
#[derive(Debug, Clone)]
pub struct ReplayBuffers {
    pub safe: Fifo<Transition>,
    pub collision: Fifo<Transition>,
}

impl ReplayBuffers {
    pub fn new(safe_capacity: usize, collision_capacity: usize) -> Self {
        Self { safe: Fifo::new(safe_capacity), collision: Fifo::new(collision_capacity) }
    }

    pub fn push(&mut self, t: Transition) {
        match t.source() {
            Source::Safe => self.safe.push(t),
            Source::Collision => self.collision.push(t),
        };
    }

    pub fn len(&self) -> usize {
        self.safe.len() + self.collision.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Number of collision-buffer draws in a minibatch of `n`.
pub fn collision_share(n: usize, frac_c: f64, available: usize) -> usize {
    ((n as f64 * frac_c).round() as usize).min(available).min(n)
}

/// Uniform draws with replacement: `collision_share` from the collision
/// buffer, the rest from the safe buffer. `None` until the safe buffer holds
/// at least `n` transitions.
pub fn sample_minibatch<'a, R: Rng + ?Sized>(
    bufs: &'a ReplayBuffers,
    n: usize,
    frac_c: f64,
    rng: &mut R,
) -> Option<Vec<&'a Transition>> {
    if n == 0 || bufs.safe.len() < n {
        return None;
    }
    let k = collision_share(n, frac_c, bufs.collision.len());
    let mut out = Vec::with_capacity(n);
    for _ in 0..k {
        out.push(&bufs.collision.items[rng.gen_range(0..bufs.collision.len())]);
    }
    for _ in k..n {
        out.push(&bufs.safe.items[rng.gen_range(0..bufs.safe.len())]);
    }
    Some(out)
}
