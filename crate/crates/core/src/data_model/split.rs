use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{CurationAction, CurationLog, DatasetManifest, PatientRecord};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumKey {
    Label,
    AgeGroup,
    Country,
}

/// Train/validation/test fractions plus the keys defining strata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    #[serde(default = "default_strata")]
    pub strata_keys: Vec<StratumKey>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_strata() -> Vec<StratumKey> {
    vec![StratumKey::Label, StratumKey::AgeGroup]
}

fn default_seed() -> u64 {
    rng::DEFAULT_SEED
}

impl SplitSpec {
    pub fn new(fractions: [f64; 3], strata_keys: Vec<StratumKey>, seed: u64) -> Result<Self> {
        let spec = Self {
            fractions,
            strata_keys,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::config(format!(
                "split fractions must be nonnegative, got {:?}",
                self.fractions
            )));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitOutcome {
    pub train: DatasetManifest,
    pub val: DatasetManifest,
    pub test: DatasetManifest,
    /// Strata smaller than the number of nonzero splits; assigned to train.
    pub warnings: Vec<String>,
}

impl SplitOutcome {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.val.len(), self.test.len()]
    }
}

fn stratum_key(r: &PatientRecord, keys: &[StratumKey]) -> Result<String> {
    let parts = keys
        .iter()
        .map(|k| {
            Ok(match k {
                StratumKey::Label => r.label.to_string(),
                StratumKey::Country => r.country.clone(),
                StratumKey::AgeGroup => r
                    .resolved_age_group()
                    .ok_or_else(|| {
                        Error::config(format!(
                            "record `{}` has no age group; assign age groups before stratifying on them",
                            r.image_ref
                        ))
                    })?
                    .to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.join("|"))
}

/// Largest-remainder apportionment of `n` by `fractions` (ties to the lower
/// index).
fn apportion(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let quotas = fractions.map(|f| n as f64 * f);
    let mut out = quotas.map(|q| (q + 1e-9).floor() as usize);
    let mut rest = n.saturating_sub(out.iter().sum());
    let mut order: Vec<usize> = (0..3).filter(|&k| fractions[k] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - out[a] as f64;
        let fb = quotas[b] - out[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        out[k] += 1;
        rest -= 1;
    }
    out
}

/// Per-stratum split counts whose row sums equal the stratum sizes, whose
/// column sums equal the global apportionment, and whose entries are each
/// within one record of `size * fraction`.
fn allocate(sizes: &[usize], fractions: &[f64; 3]) -> Vec<[usize; 3]> {
    let total: usize = sizes.iter().sum();
    let targets = apportion(total, fractions);
    let mut table: Vec<[usize; 3]> = sizes
        .iter()
        .map(|&n| fractions.map(|f| (n as f64 * f + 1e-9).floor() as usize))
        .collect();
    let mut demand: [i64; 3] = [0; 3];
    for k in 0..3 {
        demand[k] = targets[k] as i64 - table.iter().map(|row| row[k] as i64).sum::<i64>();
    }
    for (s, &n) in sizes.iter().enumerate() {
        let residual = n - table[s].iter().sum::<usize>();
        let frac = |k: usize| n as f64 * fractions[k] - table[s][k] as f64;
        let mut cols: Vec<usize> = (0..3).filter(|&k| fractions[k] > 0.0).collect();
        // columns with the largest outstanding demand first, then the largest
        // fractional remainder
        cols.sort_by(|&a, &b| {
            demand[b]
                .cmp(&demand[a])
                .then(frac(b).total_cmp(&frac(a)))
                .then(a.cmp(&b))
        });
        for &k in cols.iter().take(residual) {
            table[s][k] += 1;
            demand[k] -= 1;
        }
    }
    table
}

/// Splits the manifest so every stratum keeps the requested proportions.
pub fn stratified_split(manifest: &DatasetManifest, spec: &SplitSpec, log: &mut CurationLog) -> Result<SplitOutcome> {
    spec.validate()?;
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in manifest.records().iter().enumerate() {
        strata.entry(stratum_key(r, &spec.strata_keys)?).or_default().push(i);
    }
    let nonzero = spec.fractions.iter().filter(|&&f| f > 0.0).count();
    let mut warnings = Vec::new();
    let mut assignment = vec![0u8; manifest.len()];
    let (small, regular): (Vec<_>, Vec<_>) = strata.iter().partition(|(_, idx)| idx.len() < nonzero);
    for (key, idx) in &small {
        warnings.push(format!(
            "stratum `{key}` has {} record(s), fewer than the {nonzero} nonzero splits; assigned to train",
            idx.len()
        ));
    }
    let sizes: Vec<usize> = regular.iter().map(|(_, idx)| idx.len()).collect();
    let table = allocate(&sizes, &spec.fractions);
    for ((key, idx), counts) in regular.iter().zip(&table) {
        let mut shuffled = (*idx).clone();
        shuffled.shuffle(&mut rng::keyed(rng::derive(spec.seed, key), &[]));
        let mut offset = 0;
        for (split, &count) in counts.iter().enumerate() {
            for &i in &shuffled[offset..offset + count] {
                assignment[i] = split as u8;
            }
            offset += count;
        }
    }
    let mut parts: [Vec<PatientRecord>; 3] = Default::default();
    for (r, &a) in manifest.records().iter().zip(&assignment) {
        parts[a as usize].push(r.clone());
    }
    let [train, val, test] = parts;
    let outcome = SplitOutcome {
        train: DatasetManifest::new(train)?,
        val: DatasetManifest::new(val)?,
        test: DatasetManifest::new(test)?,
        warnings,
    };
    let keys: Vec<String> = spec
        .strata_keys
        .iter()
        .map(|k| {
            serde_json::to_value(k)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default()
        })
        .collect();
    log.push(
        CurationAction::new("stratified_split", manifest.len())
            .param(
                "fractions",
                format!("{}/{}/{}", spec.fractions[0], spec.fractions[1], spec.fractions[2]),
            )
            .param(
                "strata",
                if keys.is_empty() {
                    "none".to_string()
                } else {
                    keys.join("+")
                },
            )
            .param("seed", spec.seed)
            .param("sizes", {
                let [a, b, c] = outcome.sizes();
                format!("{a}/{b}/{c}")
            })
            .param("small_strata", outcome.warnings.len()),
    );
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::fixtures::record;
    use crate::data_model::{Label, Sex};
    use proptest::prelude::*;

    fn labelled(n_covid: usize, n_normal: usize) -> DatasetManifest {
        let mut records = Vec::new();
        for i in 0..n_covid {
            records.push(record(
                &format!("c{i}"),
                Label::Covid,
                "ES",
                Some(40.0),
                Some(Sex::Male),
            ));
        }
        for i in 0..n_normal {
            records.push(record(
                &format!("n{i}"),
                Label::Normal,
                "ES",
                Some(70.0),
                Some(Sex::Female),
            ));
        }
        DatasetManifest::new(records).unwrap()
    }

    #[test]
    fn fractions_must_sum_to_one() {
        assert!(SplitSpec::new([0.8, 0.3, 0.0], vec![], 1).is_err());
        assert!(SplitSpec::new([1.2, -0.2, 0.0], vec![], 1).is_err());
        assert!(SplitSpec::new([0.7, 0.15, 0.15], vec![], 1).is_ok());
    }

    #[test]
    fn identity_split() {
        let m = labelled(30, 20);
        let spec = SplitSpec::new([1.0, 0.0, 0.0], vec![StratumKey::Label], 3).unwrap();
        let out = stratified_split(&m, &spec, &mut CurationLog::new()).unwrap();
        assert_eq!(out.train, m);
        assert!(out.val.is_empty() && out.test.is_empty());
    }

    #[test]
    fn two_strata_halved() {
        let m = labelled(60, 40);
        let spec = SplitSpec::new([0.5, 0.5, 0.0], vec![StratumKey::Label], 3).unwrap();
        let out = stratified_split(&m, &spec, &mut CurationLog::new()).unwrap();
        for part in [&out.train, &out.val] {
            assert_eq!(part.counts().by_label[&Label::Covid], 30);
            assert_eq!(part.counts().by_label[&Label::Normal], 20);
        }
    }

    #[test]
    fn tiny_stratum_goes_to_train_with_warning() {
        let m = labelled(1, 20);
        let spec = SplitSpec::new([0.7, 0.15, 0.15], vec![StratumKey::Label], 3).unwrap();
        let out = stratified_split(&m, &spec, &mut CurationLog::new()).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.train.counts().by_label[&Label::Covid], 1);
    }

    #[test]
    fn deterministic_per_seed() {
        let m = labelled(60, 40);
        let spec = SplitSpec::new([0.6, 0.2, 0.2], vec![StratumKey::Label], 3).unwrap();
        let a = stratified_split(&m, &spec, &mut CurationLog::new()).unwrap();
        let b = stratified_split(&m, &spec, &mut CurationLog::new()).unwrap();
        assert_eq!(a, b);
        let other = SplitSpec { seed: 4, ..spec };
        let c = stratified_split(&m, &other, &mut CurationLog::new()).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn allocation_hits_global_targets() {
        let table = allocate(&[7219, 2234, 1553, 54], &[0.8, 0.2, 0.0]);
        let col: usize = table.iter().map(|r| r[0]).sum();
        assert_eq!(col, apportion(11060, &[0.8, 0.2, 0.0])[0]);
    }

    proptest! {
        #[test]
        fn allocation_respects_rows_columns_and_quotas(
            sizes in prop::collection::vec(3usize..400, 1..12),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let (f0, f1) = (a, (1.0 - a) * b);
            let fractions = [f0, f1, 1.0 - f0 - f1];
            let table = allocate(&sizes, &fractions);
            let targets = apportion(sizes.iter().sum(), &fractions);
            for (row, &n) in table.iter().zip(&sizes) {
                prop_assert_eq!(row.iter().sum::<usize>(), n);
                for k in 0..3 {
                    prop_assert!((row[k] as f64 - n as f64 * fractions[k]).abs() <= 1.0 + 1e-9);
                }
            }
            for k in 0..3 {
                prop_assert_eq!(table.iter().map(|r| r[k]).sum::<usize>(), targets[k]);
            }
        }
    }
}
