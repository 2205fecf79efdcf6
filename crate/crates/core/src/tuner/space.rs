use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modelzoo::{OptimizerFamily, OptimizerSpec};

/// A real-valued hyperparameter: a discrete grid or a log-uniform range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealDomain {
    Grid(Vec<f64>),
    LogUniform { low: f64, high: f64 },
}

impl RealDomain {
    fn validate(&self, name: &str) -> Result<()> {
        match self {
            RealDomain::Grid(v) if v.is_empty() => Err(Error::config(format!("{name} grid is empty"))),
            RealDomain::Grid(v) if v.iter().any(|x| !(*x > 0.0)) => {
                Err(Error::config(format!("{name} grid values must be positive")))
            }
            RealDomain::LogUniform { low, high } if !(*low > 0.0 && low <= high) => {
                Err(Error::config(format!("{name} range needs 0 < low <= high")))
            }
            _ => Ok(()),
        }
    }

    fn sample(&self, r: &mut ChaCha8Rng) -> f64 {
        match self {
            RealDomain::Grid(v) => *v.choose(r).expect("validated nonempty"),
            RealDomain::LogUniform { low, high } => {
                if low == high {
                    *low
                } else {
                    (r.random_range(low.ln()..=high.ln())).exp().clamp(*low, *high)
                }
            }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            RealDomain::Grid(v) => v.contains(&x),
            RealDomain::LogUniform { low, high } => *low <= x && x <= *high,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub dropout_rate: Vec<f64>,
    pub dense_units: Vec<usize>,
    pub learning_rate: RealDomain,
    pub weight_decay: RealDomain,
    pub freeze_rate: Vec<f64>,
    pub optimizer: Vec<OptimizerFamily>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            dropout_rate: vec![0.2, 0.3, 0.4, 0.5],
            dense_units: vec![32, 64, 128, 256, 512],
            learning_rate: RealDomain::LogUniform { low: 1e-5, high: 1e-3 },
            weight_decay: RealDomain::LogUniform { low: 1e-5, high: 1e-4 },
            freeze_rate: vec![0.01, 0.05, 0.10, 0.20, 0.50, 0.75],
            optimizer: OptimizerFamily::ALL.to_vec(),
        }
    }
}

impl SearchSpace {
    /// The discrete grid for every dimension.
    pub fn grid() -> Self {
        Self {
            learning_rate: RealDomain::Grid(vec![1e-5, 5e-5, 1e-4]),
            weight_decay: RealDomain::Grid(vec![1e-5, 1e-4]),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dropout_rate.is_empty()
            || self.dense_units.is_empty()
            || self.freeze_rate.is_empty()
            || self.optimizer.is_empty()
        {
            return Err(Error::config("every search dimension needs at least one value"));
        }
        self.learning_rate.validate("learning_rate")?;
        self.weight_decay.validate("weight_decay")?;
        Ok(())
    }

    pub fn sample(&self, r: &mut ChaCha8Rng) -> TrialConfig {
        TrialConfig {
            dropout_rate: *self.dropout_rate.choose(r).expect("validated"),
            dense_units: *self.dense_units.choose(r).expect("validated"),
            learning_rate: self.learning_rate.sample(r),
            weight_decay: self.weight_decay.sample(r),
            freeze_rate: *self.freeze_rate.choose(r).expect("validated"),
            optimizer: *self.optimizer.choose(r).expect("validated"),
        }
    }

    pub fn contains(&self, c: &TrialConfig) -> bool {
        self.dropout_rate.contains(&c.dropout_rate)
            && self.dense_units.contains(&c.dense_units)
            && self.learning_rate.contains(c.learning_rate)
            && self.weight_decay.contains(c.weight_decay)
            && self.freeze_rate.contains(&c.freeze_rate)
            && self.optimizer.contains(&c.optimizer)
    }
}

/// One point of the search space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub dropout_rate: f64,
    pub dense_units: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub freeze_rate: f64,
    pub optimizer: OptimizerFamily,
}

impl TrialConfig {
    /// Weight decay only applies to the decoupled-decay family; other
    /// families train with none.
    pub fn optimizer_spec(&self) -> OptimizerSpec {
        OptimizerSpec {
            family: self.optimizer,
            learning_rate: self.learning_rate,
            weight_decay: if self.optimizer == OptimizerFamily::AdamDecoupledWd {
                self.weight_decay
            } else {
                0.0
            },
        }
    }
}
