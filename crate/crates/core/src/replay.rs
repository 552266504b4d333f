//! Capacity-bounded replay buffer.
//!
//! Minibatches mix draws from the highest-priority slice of the buffer (the
//! dream queue) with uniform draws from the whole buffer. Low-impact items
//! are removed by [`ReplayBuffer::prune`]. When the buffer is full, the item
//! with the lowest effective priority is evicted, and the incoming item is a
//! candidate for eviction like any resident.
//!
//! Effective priority is the stored priority plus an optional novelty bonus:
//! `novelty_mu * d / L`, where `d` is the Hamming distance from the item to
//! its nearest neighbour among up to [`NOVELTY_SAMPLE`] other items drawn
//! uniformly from the buffer. The neighbour draws come from a stream owned by
//! the buffer, and are skipped entirely when `novelty_mu == 0`.

use std::cmp::Ordering;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affect::{self, AffectConfig, AffectTag};
use crate::env::ActionSequence;
use crate::error::{Error, Result};
use crate::util::ceil_fraction;

/// Number of neighbours examined when estimating novelty.
pub const NOVELTY_SAMPLE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferItem {
    pub id: u64,
    pub trajectory: ActionSequence,
    pub reward: f64,
    pub td: f64,
    pub tag: AffectTag,
    pub priority: f64,
    pub fitness: f64,
    pub birth_step: u64,
    /// 0 for collected trajectories, k for the k-th mutation generation.
    pub generation: u32,
}

impl BufferItem {
    /// An item with its id still unassigned; [`ReplayBuffer::insert`] gives it one.
    pub fn new(
        trajectory: ActionSequence,
        reward: f64,
        td: f64,
        affect_cfg: &AffectConfig,
        birth_step: u64,
    ) -> Self {
        let tag = affect::tag(reward, td, affect_cfg);
        BufferItem {
            id: 0,
            trajectory,
            reward,
            td,
            tag,
            priority: affect::priority(td, tag, affect_cfg.lambda),
            fitness: reward,
            birth_step,
            generation: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub batch_size: usize,
    pub high_fraction: f64,
    pub top_fraction: f64,
    pub novelty_mu: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            batch_size: 32,
            high_fraction: 0.8,
            top_fraction: 0.2,
            novelty_mu: 0.0,
        }
    }
}

impl SampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("sample.batch_size", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.high_fraction) {
            return Err(Error::config("sample.high_fraction", "must lie in [0, 1]"));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(Error::config("sample.top_fraction", "must lie in (0, 1]"));
        }
        if !(self.novelty_mu >= 0.0 && self.novelty_mu.is_finite()) {
            return Err(Error::config(
                "sample.novelty_mu",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// Number of draws taken from the top set.
    pub fn high_draws(&self) -> usize {
        ceil_fraction(self.high_fraction, self.batch_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Stored under `id`, displacing `evicted` if the buffer was full.
    Stored { id: u64, evicted: Option<u64> },
    /// The incoming item had the lowest effective priority and was discarded.
    Dropped { id: u64 },
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<BufferItem>,
    capacity: usize,
    next_id: u64,
    novelty_mu: f64,
    novelty_rng: ChaCha8Rng,
}

/// Serializable view of a buffer, used for debugging dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferSnapshot {
    pub capacity: usize,
    pub next_id: u64,
    pub novelty_mu: f64,
    pub items: Vec<BufferItem>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self::with_novelty(capacity, 0.0, 0)
    }

    /// Buffer whose eviction and capacity checks include the novelty bonus.
    /// `seed` drives the neighbour draws.
    pub fn with_novelty(capacity: usize, novelty_mu: f64, seed: u64) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        ReplayBuffer {
            items: Vec::with_capacity(capacity.min(4096)),
            capacity,
            next_id: 0,
            novelty_mu,
            novelty_rng: ChaCha8Rng::seed_from_u64(seed),
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

    pub fn novelty_mu(&self) -> f64 {
        self.novelty_mu
    }

    pub fn items(&self) -> &[BufferItem] {
        &self.items
    }

    pub fn get(&self, id: u64) -> Option<&BufferItem> {
        self.items.iter().find(|it| it.id == id)
    }

    pub fn mean_priority(&self) -> f64 {
        if self.items.is_empty() {
            0.0
        } else {
            self.items.iter().map(|it| it.priority).sum::<f64>() / self.items.len() as f64
        }
    }

    pub fn snapshot(&self) -> BufferSnapshot {
        BufferSnapshot {
            capacity: self.capacity,
            next_id: self.next_id,
            novelty_mu: self.novelty_mu,
            items: self.items.clone(),
        }
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Stores `item` under a fresh id, evicting the lowest effective priority
    /// item (possibly the incoming one) when the buffer is full.
    pub fn insert(&mut self, mut item: BufferItem) -> InsertOutcome {
        item.id = self.fresh_id();
        let id = item.id;
        self.items.push(item);
        if self.items.len() <= self.capacity {
            return InsertOutcome::Stored { id, evicted: None };
        }
        let evicted = self.evict_lowest(None);
        if evicted == id {
            InsertOutcome::Dropped { id }
        } else {
            InsertOutcome::Stored {
                id,
                evicted: Some(evicted),
            }
        }
    }

    /// Replaces the contents with `kept` (ids preserved) followed by `new`
    /// (fresh ids). Capacity is not enforced here.
    pub(crate) fn replace_contents(&mut self, kept: Vec<BufferItem>, new: Vec<BufferItem>) {
        self.items = kept;
        for mut item in new {
            item.id = self.fresh_id();
            self.items.push(item);
        }
    }

    /// Evicts until the capacity invariant holds. `protect` is never evicted.
    pub fn enforce_capacity(&mut self, protect: Option<u64>) -> usize {
        let mut n = 0;
        while self.items.len() > self.capacity {
            self.evict_lowest(protect);
            n += 1;
        }
        n
    }

    fn evict_lowest(&mut self, protect: Option<u64>) -> u64 {
        let eff = self.effective_priorities(self.novelty_mu);
        let (pos, _) = self
            .items
            .iter()
            .zip(&eff)
            .enumerate()
            .filter(|(_, (it, _))| Some(it.id) != protect)
            .min_by(|(_, (a, pa)), (_, (b, pb))| pa.total_cmp(pb).then_with(|| a.id.cmp(&b.id)))
            .expect("eviction from a buffer with no evictable item");
        self.items.remove(pos).id
    }

    /// Removes every prunable item except the single highest-priority one.
    pub fn prune(&mut self, cfg: &AffectConfig) -> usize {
        self.prune_protecting(cfg, None)
    }

    /// As [`prune`](Self::prune), additionally keeping the item `protect`.
    pub fn prune_protecting(&mut self, cfg: &AffectConfig, protect: Option<u64>) -> usize {
        let Some(top) = self.top_priority_id() else {
            return 0;
        };
        let before = self.items.len();
        self.items.retain(|it| {
            it.id == top || Some(it.id) == protect || !affect::is_prunable(it.tag, cfg)
        });
        before - self.items.len()
    }

    fn top_priority_id(&self) -> Option<u64> {
        self.items
            .iter()
            .max_by(|a, b| {
                a.priority
                    .total_cmp(&b.priority)
                    .then_with(|| b.id.cmp(&a.id))
            })
            .map(|it| it.id)
    }

    /// Effective priority of the item `id`, or `None` if it is not stored.
    pub fn effective_priority(&mut self, id: u64, novelty_mu: f64) -> Option<f64> {
        let pos = self.items.iter().position(|it| it.id == id)?;
        let p = self.items[pos].priority;
        if novelty_mu == 0.0 {
            return Some(p);
        }
        Some(p + novelty_mu * self.novelty_of(pos))
    }

    /// Effective priorities of every item, in storage order.
    pub fn effective_priorities(&mut self, novelty_mu: f64) -> Vec<f64> {
        if novelty_mu == 0.0 {
            return self.items.iter().map(|it| it.priority).collect();
        }
        (0..self.items.len())
            .map(|i| self.items[i].priority + novelty_mu * self.novelty_of(i))
            .collect()
    }

    fn novelty_of(&mut self, pos: usize) -> f64 {
        let n = self.items.len();
        if n <= 1 {
            return 1.0;
        }
        let me = &self.items[pos].trajectory;
        let others = n - 1;
        let nearest = if others <= NOVELTY_SAMPLE {
            (0..n)
                .filter(|&j| j != pos)
                .map(|j| me.hamming(&self.items[j].trajectory))
                .min()
        } else {
            index::sample(&mut self.novelty_rng, others, NOVELTY_SAMPLE)
                .into_iter()
                .map(|j| if j >= pos { j + 1 } else { j })
                .map(|j| me.hamming(&self.items[j].trajectory))
                .min()
        };
        nearest.unwrap_or(0) as f64 / me.len().max(1) as f64
    }

    /// Positions of the buffer ordered by effective priority, highest first,
    /// ties to the older (smaller id) item.
    fn ranked_positions(&mut self, novelty_mu: f64) -> Vec<usize> {
        let eff = self.effective_priorities(novelty_mu);
        let mut order: Vec<usize> = (0..self.items.len()).collect();
        order.sort_by(|&a, &b| match eff[b].total_cmp(&eff[a]) {
            Ordering::Equal => self.items[a].id.cmp(&self.items[b].id),
            o => o,
        });
        order
    }

    /// Draws a minibatch: `ceil(high_fraction * batch)` items uniformly with
    /// replacement from the top `ceil(top_fraction * len)` items by effective
    /// priority, then the rest uniformly with replacement from the whole
    /// buffer. Items are returned in draw order.
    pub fn sample_minibatch<R: Rng + ?Sized>(
        &mut self,
        spec: &SampleSpec,
        rng: &mut R,
    ) -> Result<Vec<BufferItem>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let n = self.items.len();
        let high = spec.high_draws().min(spec.batch_size);
        let mut batch = Vec::with_capacity(spec.batch_size);
        if high > 0 {
            let ranked = self.ranked_positions(spec.novelty_mu);
            let top = ceil_fraction(spec.top_fraction, n).clamp(1, n);
            for _ in 0..high {
                let pos = ranked[rng.gen_range(0..top)];
                batch.push(self.items[pos].clone());
            }
        }
        for _ in high..spec.batch_size {
            batch.push(self.items[rng.gen_range(0..n)].clone());
        }
        Ok(batch)
    }

    /// Ids of the top set used by [`sample_minibatch`](Self::sample_minibatch).
    pub fn top_set_ids(&mut self, spec: &SampleSpec) -> Vec<u64> {
        let n = self.items.len();
        if n == 0 {
            return Vec::new();
        }
        let top = ceil_fraction(spec.top_fraction, n).clamp(1, n);
        let ranked = self.ranked_positions(spec.novelty_mu);
        ranked[..top].iter().map(|&p| self.items[p].id).collect()
    }

    pub(crate) fn items_mut(&mut self) -> &mut [BufferItem] {
        &mut self.items
    }
}
