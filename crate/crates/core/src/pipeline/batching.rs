use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchingConfig {
    pub batch_size: usize,
    pub shuffle_buffer: usize,
    pub seed: u64,
    /// Keep decoded images in memory between epochs.
    pub cache: bool,
}

impl Default for BatchingConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            shuffle_buffer: 10_000,
            seed: rng::DEFAULT_SEED,
            cache: true,
        }
    }
}

impl BatchingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.shuffle_buffer == 0 {
            return Err(Error::config("shuffle_buffer must be at least 1"));
        }
        Ok(())
    }
}

/// `ceil(n / batch_size)`.
pub fn steps_per_epoch(n: usize, batch_size: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::EmptyDataset("no records to batch".to_string()));
    }
    if batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    Ok(n.div_ceil(batch_size))
}

/// Produces per-epoch batches of record indices.
#[derive(Clone, Debug)]
pub struct BatchStream {
    len: usize,
    config: BatchingConfig,
    shuffle: bool,
}

impl BatchStream {
    pub fn new(len: usize, config: &BatchingConfig, shuffle: bool) -> Result<Self> {
        config.validate()?;
        steps_per_epoch(len, config.batch_size)?;
        Ok(Self {
            len,
            config: config.clone(),
            shuffle,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn steps(&self) -> usize {
        self.len.div_ceil(self.config.batch_size)
    }

    /// Record order for `epoch`: a bounded-buffer shuffle (fill the buffer,
    /// emit a random slot, refill it from the input) reseeded every epoch.
    pub fn order(&self, epoch: usize) -> Vec<usize> {
        if !self.shuffle {
            return (0..self.len).collect();
        }
        let mut r = rng::keyed(self.config.seed, &[epoch as u64]);
        let cap = self.config.shuffle_buffer.min(self.len);
        let mut buffer: Vec<usize> = (0..cap).collect();
        let mut next = cap;
        let mut out = Vec::with_capacity(self.len);
        while !buffer.is_empty() {
            let j = r.random_range(0..buffer.len());
            out.push(buffer[j]);
            if next < self.len {
                buffer[j] = next;
                next += 1;
            } else {
                buffer.swap_remove(j);
            }
        }
        out
    }

    pub fn epoch(&self, epoch: usize) -> Vec<Vec<usize>> {
        self.order(epoch)
            .chunks(self.config.batch_size)
            .map(<[usize]>::to_vec)
            .collect()
    }

    pub fn stats(&self) -> BatchStats {
        let b = self.config.batch_size;
        BatchStats {
            records: self.len,
            batch_size: b,
            steps: self.steps(),
            last_batch: self.len - (self.steps() - 1) * b,
            shuffle_buffer: if self.shuffle {
                Some(self.config.shuffle_buffer)
            } else {
                None
            },
        }
    }
}

/// Batch-stream summary printed as `key=value` text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BatchStats {
    pub records: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub last_batch: usize,
    pub shuffle_buffer: Option<usize>,
}

impl fmt::Display for BatchStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "records={} batch_size={} steps={} last_batch={} shuffle_buffer={}",
            self.records,
            self.batch_size,
            self.steps,
            self.last_batch,
            self.shuffle_buffer.map_or("off".to_string(), |b| b.to_string())
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn steps_examples() {
        assert_eq!(steps_per_epoch(19_527, 128).unwrap(), 153);
        assert_eq!(steps_per_epoch(19_527, 32).unwrap(), 611);
        assert_eq!(steps_per_epoch(19_527, 64).unwrap(), 306);
        assert_eq!(steps_per_epoch(1, 1024).unwrap(), 1);
        assert!(matches!(steps_per_epoch(0, 8), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn batch_sizes_with_remainder() {
        let s = BatchStream::new(300, &BatchingConfig::default(), true).unwrap();
        let sizes: Vec<usize> = s.epoch(0).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![128, 128, 44]);
        assert_eq!(
            s.stats().to_string(),
            "records=300 batch_size=128 steps=3 last_batch=44 shuffle_buffer=10000"
        );
    }

    #[test]
    fn unshuffled_keeps_order() {
        let s = BatchStream::new(
            10,
            &BatchingConfig {
                batch_size: 4,
                ..Default::default()
            },
            false,
        )
        .unwrap();
        assert_eq!(s.epoch(3).concat(), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_and_reshuffled() {
        let cfg = BatchingConfig {
            batch_size: 16,
            ..Default::default()
        };
        let a = BatchStream::new(200, &cfg, true).unwrap();
        let b = BatchStream::new(200, &cfg, true).unwrap();
        assert_eq!(a.epoch(0), b.epoch(0));
        assert_ne!(a.epoch(0), a.epoch(1));
        assert_ne!(a.order(0), (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn small_buffer_limits_displacement() {
        let cfg = BatchingConfig {
            shuffle_buffer: 1,
            ..Default::default()
        };
        let s = BatchStream::new(50, &cfg, true).unwrap();
        assert_eq!(s.order(0), (0..50).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn epoch_visits_each_record_once(n in 1usize..600, batch in 1usize..200, buffer in 1usize..700, seed: u64, epoch in 0usize..5) {
            let cfg = BatchingConfig { batch_size: batch, shuffle_buffer: buffer, seed, cache: false };
            let s = BatchStream::new(n, &cfg, true).unwrap();
            let batches = s.epoch(epoch);
            prop_assert_eq!(batches.len(), steps_per_epoch(n, batch).unwrap());
            let mut all = batches.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn steps_bound(n in 1usize..1_000_000, b in 1usize..5000) {
            let s = steps_per_epoch(n, b).unwrap();
            prop_assert!(s * b >= n && n > (s - 1) * b);
        }
    }
}
