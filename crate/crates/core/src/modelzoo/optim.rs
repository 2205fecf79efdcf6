use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Network;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerFamily {
    Sgd,
    Rmsprop,
    Adam,
    Nadam,
    AdamDecoupledWd,
}

impl OptimizerFamily {
    pub const ALL: [OptimizerFamily; 5] = [
        OptimizerFamily::Sgd,
        OptimizerFamily::Rmsprop,
        OptimizerFamily::Adam,
        OptimizerFamily::Nadam,
        OptimizerFamily::AdamDecoupledWd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerFamily::Sgd => "sgd",
            OptimizerFamily::Rmsprop => "rmsprop",
            OptimizerFamily::Adam => "adam",
            OptimizerFamily::Nadam => "nadam",
            OptimizerFamily::AdamDecoupledWd => "adam_decoupled_wd",
        }
    }
}

impl fmt::Display for OptimizerFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let alias = match s.as_str() {
            "adamw" => "adam_decoupled_wd",
            other => other,
        };
        OptimizerFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == alias)
            .ok_or(Error::Registry {
                kind: "optimizer",
                name: s,
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub family: OptimizerFamily,
    pub learning_rate: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self::manual_best()
    }
}

impl OptimizerSpec {
    /// Hand-tuned setting: AdamW, lr 5e-5, weight decay 1e-5.
    pub fn manual_best() -> Self {
        Self {
            family: OptimizerFamily::AdamDecoupledWd,
            learning_rate: 5e-5,
            weight_decay: 1e-5,
        }
    }

    /// Hyperband optimum: AdamW, lr 3.7758e-4, weight decay 7.4855e-5.
    pub fn hyperband_best() -> Self {
        Self {
            family: OptimizerFamily::AdamDecoupledWd,
            learning_rate: 3.7758e-4,
            weight_decay: 7.4855e-5,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "manual_best" => Ok(Self::manual_best()),
            "hyperband_best" => Ok(Self::hyperband_best()),
            other => Err(Error::Registry {
                kind: "optimizer preset",
                name: other.to_string(),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::range("learning_rate", self.learning_rate, "(0, inf)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::range("weight_decay", self.weight_decay, "[0, inf)"));
        }
        if self.weight_decay > 0.0 && self.family != OptimizerFamily::AdamDecoupledWd {
            return Err(Error::config(format!(
                "weight_decay is only supported by adam_decoupled_wd, not {}",
                self.family
            )));
        }
        Ok(())
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-7;
const RHO: f64 = 0.9;

#[derive(Clone, Debug, Default)]
struct Slot {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Stateful optimizer with Keras default hyperparameters.
#[derive(Clone, Debug)]
pub struct Optimizer {
    spec: OptimizerSpec,
    learning_rate: f64,
    iterations: u64,
    momentum_product: f64,
    slots: HashMap<usize, Slot>,
}

pub fn build_optimizer(spec: &OptimizerSpec) -> Result<Optimizer> {
    spec.validate()?;
    Ok(Optimizer {
        spec: spec.clone(),
        learning_rate: spec.learning_rate,
        iterations: 0,
        momentum_product: 1.0,
        slots: HashMap::new(),
    })
}

impl Optimizer {
    pub fn spec(&self) -> &OptimizerSpec {
        &self.spec
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.learning_rate = lr;
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// Adds L2 penalty gradients, then updates every trainable parameter of
    /// `net` from its accumulated gradient.
    pub fn step(&mut self, net: &mut Network) {
        self.iterations += 1;
        let t = self.iterations as f64;
        let lr = self.learning_rate;
        let family = self.spec.family;
        let wd = self.spec.weight_decay;
        let (u_t, u_next, prod_t, prod_next) = if family == OptimizerFamily::Nadam {
            let u_t = BETA1 * (1.0 - 0.5 * 0.96f64.powf(t * 0.004));
            let u_next = BETA1 * (1.0 - 0.5 * 0.96f64.powf((t + 1.0) * 0.004));
            let prod_t = self.momentum_product * u_t;
            self.momentum_product = prod_t;
            (u_t, u_next, prod_t, prod_t * u_next)
        } else {
            (0.0, 0.0, 0.0, 0.0)
        };
        let bias1 = 1.0 - BETA1.powf(t);
        let bias2 = 1.0 - BETA2.powf(t);
        for (id, p) in net.trainable_params_mut() {
            p.add_penalty_grad();
            let slot = self.slots.entry(id).or_insert_with(|| Slot {
                m: vec![0.0; p.len()],
                v: vec![0.0; p.len()],
            });
            match family {
                OptimizerFamily::Sgd => {
                    for (w, g) in p.value.iter_mut().zip(&p.grad) {
                        *w -= lr * g;
                    }
                }
                OptimizerFamily::Rmsprop => {
                    for ((w, g), v) in p.value.iter_mut().zip(&p.grad).zip(&mut slot.v) {
                        *v = RHO * *v + (1.0 - RHO) * g * g;
                        *w -= lr * g / (v.sqrt() + EPSILON);
                    }
                }
                OptimizerFamily::Adam | OptimizerFamily::AdamDecoupledWd => {
                    let decay = if family == OptimizerFamily::AdamDecoupledWd {
                        wd
                    } else {
                        0.0
                    };
                    let alpha = lr * bias2.sqrt() / bias1;
                    for (((w, g), m), v) in p.value.iter_mut().zip(&p.grad).zip(&mut slot.m).zip(&mut slot.v) {
                        if decay > 0.0 {
                            *w -= *w * decay * lr;
                        }
                        *m += (g - *m) * (1.0 - BETA1);
                        *v += (g * g - *v) * (1.0 - BETA2);
                        *w -= alpha * *m / (v.sqrt() + EPSILON);
                    }
                }
                OptimizerFamily::Nadam => {
                    for (((w, g), m), v) in p.value.iter_mut().zip(&p.grad).zip(&mut slot.m).zip(&mut slot.v) {
                        *m += (g - *m) * (1.0 - BETA1);
                        *v += (g * g - *v) * (1.0 - BETA2);
                        let m_hat = u_next * *m / (1.0 - prod_next) + (1.0 - u_t) * g / (1.0 - prod_t);
                        let v_hat = *v / bias2;
                        *w -= lr * m_hat / (v_hat.sqrt() + EPSILON);
                    }
                }
            }
        }
    }
}
