use ndarray::Array2;
use rand::Rng as _;

use crate::env::Transition;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fixed-capacity ring of transitions with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

/// Mini-batch in array form. Actions are normalized to `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub costs: Vec<f64>,
    pub next_obs: Array2<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Builds a batch from transitions, mapping actions through
    /// `(a - offset) / scale`.
    pub fn from_transitions(items: &[&Transition], scale: f64, offset: f64) -> Self {
        let n = items.len();
        let d = items.first().map_or(0, |t| t.state.len());
        let mut obs = Array2::zeros((n, d));
        let mut next_obs = Array2::zeros((n, d));
        for (i, t) in items.iter().enumerate() {
            obs.row_mut(i).iter_mut().zip(&t.state).for_each(|(a, b)| *a = *b);
            next_obs
                .row_mut(i)
                .iter_mut()
                .zip(&t.next_state)
                .for_each(|(a, b)| *a = *b);
        }
        Self {
            obs,
            actions: items.iter().map(|t| (t.action - offset) / scale).collect(),
            rewards: items.iter().map(|t| t.reward).collect(),
            costs: items.iter().map(|t| t.cost).collect(),
            next_obs,
            dones: items.iter().map(|t| t.done).collect(),
        }
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform draw with replacement.
    pub fn sample(&self, batch: usize, rng: &mut Rng) -> Result<Vec<&Transition>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..batch)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}
