use std::sync::Arc;

use rand::Rng;

/// Observations are stored once as `f32` and shared between consecutive
/// transitions, which keeps a full buffer of image observations affordable.
pub type SharedObs = Arc<[f32]>;

pub fn share(obs: &[f64]) -> SharedObs {
    obs.iter().map(|&v| v as f32).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: SharedObs,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: SharedObs,
    pub done: bool,
    /// Number of environment steps folded into `reward`; the bootstrap
    /// term is discounted by `γ^n_steps`.
    pub n_steps: u32,
}

/// Fixed-capacity ring buffer; the oldest entry is evicted first.
#[derive(Clone, Debug)]
pub struct Ring<T> {
    capacity: usize,
    items: Vec<T>,
    next: usize,
}

impl<T> Ring<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "ring capacity must be positive");
        Ring {
            capacity,
            items: Vec::new(),
            next: 0,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
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

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// `n` indices drawn uniformly with replacement; empty when the ring is.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Vec<&'a T> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect()
    }
}

pub type ReplayBuffer = Ring<Transition>;

#[derive(Clone, Debug, PartialEq)]
pub struct TamerEntry {
    pub obs: SharedObs,
    pub action: Vec<f64>,
    pub feedback: f64,
    pub weight: f64,
}

pub type TamerBuffer = Ring<TamerEntry>;
