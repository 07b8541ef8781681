use std::collections::VecDeque;
use std::sync::{Arc, Mutex, MutexGuard};

use rand::Rng;

use super::MarkovState;

/// One step of experience with the recurrent summaries it was collected with.
///
/// Actions are inverter Var outputs in p.u. on the system power base.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Arc<MarkovState>,
    pub prev_action: Vec<f64>,
    /// Hidden state fed to the recurrent cell at this step (H_{t−1}).
    pub prev_hidden: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Arc<MarkovState>,
    /// Hidden state produced at this step (H_t).
    pub hidden: Vec<f64>,
    pub episode: usize,
    pub step: usize,
    pub done: bool,
}

/// Bounded FIFO experience store. Pushes and samples take one lock each, so
/// rollout workers may push concurrently while the trainer samples.
#[derive(Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Mutex<VecDeque<Arc<Transition>>>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            capacity,
            items: Mutex::new(VecDeque::with_capacity(capacity.min(1 << 16))),
        }
    }

    fn lock(&self) -> MutexGuard<'_, VecDeque<Arc<Transition>>> {
        self.items.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&self, transition: Transition) {
        let mut items = self.lock();
        if items.len() == self.capacity {
            items.pop_front();
        }
        items.push_back(Arc::new(transition));
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<Arc<Transition>> {
        let items = self.lock();
        if items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| Arc::clone(&items[rng.random_range(0..items.len())]))
            .collect()
    }

    /// Contents, oldest first.
    pub fn snapshot(&self) -> Vec<Arc<Transition>> {
        self.lock().iter().cloned().collect()
    }
}
