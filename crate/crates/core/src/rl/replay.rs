//! Reward-stratified replay storage.
//!
//! Episodes are filed into ten buckets by their terminal reward, so that
//! rare high-scoring episodes are not crowded out of the training pool by
//! the mass of early zero-reward ones.  Each training pass draws evenly
//! from every non-empty bucket.

use rand::seq::SliceRandom;
use rand::Rng;

/// One decision step, re-encoded after the episode finished.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Flattened state the decision was made in.
    pub state: Vec<f64>,
    /// Chosen operating-point index.
    pub action_idx: usize,
    /// 0 everywhere except the final step, which carries the episode score.
    pub reward: f64,
    /// `None` marks the terminal step.
    pub next_state: Option<Vec<f64>>,
}

/// An episode's transitions plus the score that placed it.
#[derive(Debug, Clone)]
pub struct StoredEpisode {
    pub transitions: Vec<Transition>,
    pub reward: f64,
}

pub const N_BUCKETS: usize = 10;
pub const DEFAULT_BUCKET_CAPACITY: usize = 128;
pub const DEFAULT_DRAW_PER_BUCKET: usize = 64;

/// Ten reward-stratified episode queues, oldest evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuckets {
    buckets: Vec<Vec<StoredEpisode>>,
    capacity: usize,
}

impl Default for ReplayBuckets {
    fn default() -> Self {
        Self::new(DEFAULT_BUCKET_CAPACITY)
    }
}

impl ReplayBuckets {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            buckets: (0..N_BUCKETS).map(|_| Vec::new()).collect(),
            capacity,
        }
    }

    /// Bucket index for a reward in `[0, 1]`: tenths, with 1.0 sharing the
    /// top bucket.
    pub fn bucket_index(reward: f64) -> usize {
        debug_assert!((0.0..=1.0).contains(&reward), "reward {reward} out of range");
        ((reward * N_BUCKETS as f64) as usize).min(N_BUCKETS - 1)
    }

    pub fn push(&mut self, episode: StoredEpisode) {
        let idx = Self::bucket_index(episode.reward);
        let bucket = &mut self.buckets[idx];
        if bucket.len() == self.capacity {
            bucket.remove(0);
        }
        bucket.push(episode);
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.iter().all(Vec::is_empty)
    }

    pub fn bucket_sizes(&self) -> [usize; N_BUCKETS] {
        let mut out = [0; N_BUCKETS];
        for (i, b) in self.buckets.iter().enumerate() {
            out[i] = b.len();
        }
        out
    }

    /// Assemble one training pool: from every non-empty bucket draw up to
    /// `draw_per_bucket` distinct episodes, flatten their transitions, and
    /// shuffle the result.
    pub fn build_training_pool<R: Rng>(
        &self,
        draw_per_bucket: usize,
        rng: &mut R,
    ) -> Vec<Transition> {
        let mut pool = Vec::new();
        for bucket in &self.buckets {
            if bucket.is_empty() {
                continue;
            }
            let take = draw_per_bucket.min(bucket.len());
            let picks = rand::seq::index::sample(rng, bucket.len(), take);
            for i in picks {
                pool.extend(bucket[i].transitions.iter().cloned());
            }
        }
        pool.shuffle(rng);
        pool
    }
}

/// Split a shuffled pool into optimizer batches, keeping the final partial
/// batch.
pub fn batches(pool: &[Transition], batch_size: usize) -> Vec<&[Transition]> {
    assert!(batch_size > 0);
    pool.chunks(batch_size).collect()
}
