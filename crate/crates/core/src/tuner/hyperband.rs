use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rung {
    pub configs: usize,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bracket {
    pub s: usize,
    pub rungs: Vec<Rung>,
}

impl Bracket {
    pub fn budget(&self) -> usize {
        self.rungs.iter().map(|r| r.configs * r.epochs).sum()
    }
}

/// `floor(log_eta(max_epochs))` by integer arithmetic.
pub fn s_max(max_epochs: usize, eta: usize) -> usize {
    let mut s = 0;
    let mut p = eta;
    while p <= max_epochs {
        s += 1;
        p = p.saturating_mul(eta);
    }
    s
}

/// Hyperband brackets for `s = s_max, ..., 0`.
///
/// Bracket `s` starts `n = ceil((s_max+1) * eta^s / (s+1))` configurations;
/// rung `i` trains for `max(1, round(R * eta^(i-s)))` epochs and keeps the
/// top `ceil(n_i / eta)` for the next rung.
pub fn hyperband_schedule(max_epochs: usize, eta: usize) -> Result<Vec<Bracket>> {
    if max_epochs == 0 {
        return Err(Error::config("max_epochs must be at least 1"));
    }
    if eta < 2 {
        return Err(Error::config(format!("reduction factor must be at least 2, got {eta}")));
    }
    let smax = s_max(max_epochs, eta);
    let r = max_epochs as f64;
    let e = eta as f64;
    Ok((0..=smax)
        .rev()
        .map(|s| {
            let n0 = ((smax + 1) * eta.pow(s as u32)).div_ceil(s + 1);
            let mut n = n0;
            let rungs = (0..=s)
                .map(|i| {
                    let epochs = ((r * e.powi(i as i32 - s as i32)).round() as usize).clamp(1, max_epochs);
                    let rung = Rung { configs: n, epochs };
                    n = n.div_ceil(eta);
                    rung
                })
                .collect();
            Bracket { s, rungs }
        })
        .collect())
}
