use rand::Rng;

use crate::error::{Error, Result};
use crate::markowitz::WeightVector;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: WeightVector,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
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

    pub fn push(&mut self, transition: Transition) -> Result<()> {
        let finite = transition.reward.is_finite()
            && transition.state.iter().chain(&transition.next_state).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numeric("transition holds non-finite values".into()));
        }
        if transition.state.len() != transition.next_state.len() {
            return Err(Error::Shape("state and next state lengths differ".into()));
        }
        if let Some(first) = self.items.first() {
            if first.state.len() != transition.state.len() || first.action.len() != transition.action.len() {
                return Err(Error::Shape(format!(
                    "transition dims ({}, {}) differ from buffer ({}, {})",
                    transition.state.len(),
                    transition.action.len(),
                    first.state.len(),
                    first.action.len()
                )));
            }
        }
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// `n` independent uniform draws with replacement. Drawing more than `len()` is allowed,
    /// duplicates are the point; only an empty buffer is underfull.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.items.is_empty() && n > 0 {
            return Err(Error::Underfull {
                len: self.items.len(),
                requested: n,
            });
        }
        Ok((0..n).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect())
    }

    /// Current contents, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(&self.items[..split])
    }
}
