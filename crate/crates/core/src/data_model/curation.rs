use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AgeGroup, DatasetManifest, Sex};
use crate::error::{Error, Result};
use crate::rng;

/// One curation effect: the operation, its parameters and how many rows it
/// touched. Renders as a single `key=value` line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurationAction {
    pub operation: String,
    pub params: Vec<(String, String)>,
    pub rows_affected: usize,
}

impl CurationAction {
    pub fn new(operation: &str, rows_affected: usize) -> Self {
        Self {
            operation: operation.to_string(),
            params: Vec::new(),
            rows_affected,
        }
    }

    pub fn param(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }
}

impl fmt::Display for CurationAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "operation={}", self.operation)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        write!(f, " rows_affected={}", self.rows_affected)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CurationLog {
    actions: Vec<CurationAction>,
}

impl CurationLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, action: CurationAction) {
        self.actions.push(action);
    }

    pub fn actions(&self) -> &[CurationAction] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

impl fmt::Display for CurationLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.actions {
            writeln!(f, "{a}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeImputation {
    CountryMean,
    #[default]
    CountryMedian,
}

impl AgeImputation {
    fn central(self, values: &mut [f64]) -> f64 {
        match self {
            AgeImputation::CountryMean => values.iter().sum::<f64>() / values.len() as f64,
            AgeImputation::CountryMedian => {
                values.sort_by(f64::total_cmp);
                let n = values.len();
                if n % 2 == 1 {
                    values[n / 2]
                } else {
                    (values[n / 2 - 1] + values[n / 2]) / 2.0
                }
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            AgeImputation::CountryMean => "country_mean",
            AgeImputation::CountryMedian => "country_median",
        }
    }
}

/// Fills missing ages with the per-country mean or median; countries with no
/// observed age fall back to the global value of the same statistic.
pub fn impute_age(
    manifest: &DatasetManifest,
    strategy: AgeImputation,
    log: &mut CurationLog,
) -> Result<DatasetManifest> {
    let missing = manifest.counts().missing_age;
    if missing == 0 {
        return Ok(manifest.clone());
    }
    let mut by_country: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut global = Vec::new();
    for r in manifest.records() {
        if let Some(a) = r.age {
            by_country.entry(r.country.as_str()).or_default().push(a);
            global.push(a);
        }
    }
    if global.is_empty() {
        return Err(Error::ImputationImpossible(
            "every record is missing its age".to_string(),
        ));
    }
    let global_value = strategy.central(&mut global);
    let country_value: HashMap<&str, f64> = by_country
        .into_iter()
        .map(|(c, mut v)| (c, strategy.central(&mut v)))
        .collect();
    let mut fallback = 0;
    let records = manifest
        .records()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if r.age.is_none() {
                r.age = Some(match country_value.get(r.country.as_str()) {
                    Some(&v) => v,
                    None => {
                        fallback += 1;
                        global_value
                    }
                });
            }
            r
        })
        .collect();
    log.push(
        CurationAction::new("impute_age", missing)
            .param("strategy", strategy.name())
            .param("global_fallback_rows", fallback),
    );
    DatasetManifest::new(records)
}

fn mode(counts: &BTreeMap<Sex, usize>) -> Option<Sex> {
    // BTreeMap iterates in lexicographic order, so keeping the first maximum
    // breaks ties toward the lexicographically smallest value.
    counts
        .iter()
        .fold(None, |best: Option<(Sex, usize)>, (&s, &n)| match best {
            Some((_, bn)) if bn >= n => best,
            _ => Some((s, n)),
        })
        .map(|(s, _)| s)
}

/// Fills missing sex with the per-country mode (global mode as fallback).
/// Ties resolve to the lexicographically smallest value (`female`).
pub fn impute_sex(manifest: &DatasetManifest, log: &mut CurationLog) -> Result<DatasetManifest> {
    let missing = manifest.counts().missing_sex;
    if missing == 0 {
        return Ok(manifest.clone());
    }
    let mut by_country: HashMap<&str, BTreeMap<Sex, usize>> = HashMap::new();
    let mut global: BTreeMap<Sex, usize> = BTreeMap::new();
    for r in manifest.records() {
        if let Some(s) = r.sex {
            *by_country.entry(r.country.as_str()).or_default().entry(s).or_default() += 1;
            *global.entry(s).or_default() += 1;
        }
    }
    let global_mode =
        mode(&global).ok_or_else(|| Error::ImputationImpossible("every record is missing its sex".to_string()))?;
    let records = manifest
        .records()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if r.sex.is_none() {
                r.sex = Some(by_country.get(r.country.as_str()).and_then(mode).unwrap_or(global_mode));
            }
            r
        })
        .collect();
    log.push(CurationAction::new("impute_sex", missing).param("strategy", "country_mode"));
    DatasetManifest::new(records)
}

/// Attaches an [`AgeGroup`] to every record. Ages must already be imputed.
pub fn assign_age_groups(manifest: &DatasetManifest, log: &mut CurationLog) -> Result<DatasetManifest> {
    let mut changed = 0;
    let records = manifest
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let age = r.age.ok_or_else(|| Error::Row {
                row: i + 1,
                message: format!("`{}` has no age; impute ages first", r.image_ref),
            })?;
            let group = AgeGroup::from_age(age).map_err(|e| e.context(format!("record `{}`", r.image_ref)))?;
            let mut r = r.clone();
            changed += usize::from(r.age_group != Some(group));
            r.age_group = Some(group);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    log.push(CurationAction::new("assign_age_groups", changed));
    DatasetManifest::new(records)
}

/// Removes every country with fewer than `min_count` records, logging one
/// action per removed country.
pub fn drop_low_sample_countries(
    manifest: &DatasetManifest,
    min_count: usize,
    log: &mut CurationLog,
) -> Result<DatasetManifest> {
    let counts = &manifest.counts().by_country;
    let dropped: Vec<(&String, &usize)> = counts.iter().filter(|(_, &n)| n < min_count).collect();
    if dropped.is_empty() {
        return Ok(manifest.clone());
    }
    for (country, &n) in &dropped {
        log.push(
            CurationAction::new("drop_country", n)
                .param("country", country)
                .param("min_count", min_count),
        );
    }
    let records: Vec<_> = manifest
        .records()
        .iter()
        .filter(|r| counts[&r.country] >= min_count)
        .cloned()
        .collect();
    if records.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no country has at least {min_count} records"
        )));
    }
    DatasetManifest::new(records)
}

/// Caps the number of records per country, choosing survivors uniformly at
/// random. The draw for each country depends only on `(seed, country)`;
/// survivors keep their original order.
pub fn undersample(
    manifest: &DatasetManifest,
    caps: &BTreeMap<String, usize>,
    seed: u64,
    log: &mut CurationLog,
) -> Result<DatasetManifest> {
    let mut keep = vec![true; manifest.len()];
    for (country, &cap) in caps {
        let idx: Vec<usize> = manifest
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| &r.country == country)
            .map(|(i, _)| i)
            .collect();
        if idx.len() <= cap {
            continue;
        }
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut rng::keyed(rng::derive(seed, country), &[]));
        for &i in &shuffled[cap..] {
            keep[i] = false;
        }
        log.push(
            CurationAction::new("undersample", idx.len() - cap)
                .param("country", country)
                .param("cap", cap)
                .param("seed", seed),
        );
    }
    let records = manifest
        .records()
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r.clone())
        .collect();
    DatasetManifest::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::fixtures::record;
    use crate::data_model::{Label, PatientRecord};

    fn manifest(records: Vec<PatientRecord>) -> DatasetManifest {
        DatasetManifest::new(records).unwrap()
    }

    fn country(name: &str, n: usize) -> Vec<PatientRecord> {
        (0..n)
            .map(|i| {
                record(
                    &format!("{name}_{i}.png"),
                    Label::Covid,
                    name,
                    Some(40.0),
                    Some(Sex::Male),
                )
            })
            .collect()
    }

    #[test]
    fn impute_age_identity_without_missing() {
        let m = manifest(vec![record("a", Label::Covid, "A", Some(3.0), None)]);
        let mut log = CurationLog::new();
        assert_eq!(impute_age(&m, AgeImputation::CountryMean, &mut log).unwrap(), m);
        assert!(log.is_empty());
    }

    #[test]
    fn impute_age_country_mean() {
        let m = manifest(vec![
            record("a", Label::Covid, "A", Some(20.0), None),
            record("b", Label::Covid, "A", Some(40.0), None),
            record("c", Label::Covid, "A", None, None),
        ]);
        let out = impute_age(&m, AgeImputation::CountryMean, &mut CurationLog::new()).unwrap();
        assert_eq!(out.records()[2].age, Some(30.0));
        assert_eq!(out.counts().missing_age, 0);
    }

    #[test]
    fn impute_age_global_fallback() {
        let m = manifest(vec![
            record("a", Label::Covid, "A", Some(10.0), None),
            record("b", Label::Covid, "A", Some(50.0), None),
            record("c", Label::Covid, "B", None, None),
            record("d", Label::Normal, "B", None, None),
        ]);
        let mut log = CurationLog::new();
        let out = impute_age(&m, AgeImputation::CountryMean, &mut log).unwrap();
        assert_eq!(out.records()[2].age, Some(30.0));
        assert_eq!(out.records()[3].age, Some(30.0));
        assert_eq!(
            log.to_string(),
            "operation=impute_age strategy=country_mean global_fallback_rows=2 rows_affected=2\n"
        );
    }

    #[test]
    fn impute_age_median_differs_from_mean() {
        let m = manifest(vec![
            record("a", Label::Covid, "A", Some(10.0), None),
            record("b", Label::Covid, "A", Some(20.0), None),
            record("c", Label::Covid, "A", Some(90.0), None),
            record("d", Label::Covid, "A", None, None),
        ]);
        let median = impute_age(&m, AgeImputation::CountryMedian, &mut CurationLog::new()).unwrap();
        let mean = impute_age(&m, AgeImputation::CountryMean, &mut CurationLog::new()).unwrap();
        assert_eq!(median.records()[3].age, Some(20.0));
        assert_eq!(mean.records()[3].age, Some(40.0));
    }

    #[test]
    fn impute_age_all_missing_fails() {
        let m = manifest(vec![record("a", Label::Covid, "A", None, None)]);
        assert!(matches!(
            impute_age(&m, AgeImputation::CountryMedian, &mut CurationLog::new()),
            Err(Error::ImputationImpossible(_))
        ));
    }

    #[test]
    fn impute_sex_mode_and_tie_break() {
        let m = manifest(vec![
            record("a", Label::Covid, "A", None, Some(Sex::Male)),
            record("b", Label::Covid, "A", None, Some(Sex::Male)),
            record("c", Label::Covid, "A", None, None),
            record("d", Label::Covid, "T", None, Some(Sex::Male)),
            record("e", Label::Covid, "T", None, Some(Sex::Female)),
            record("f", Label::Covid, "T", None, None),
        ]);
        let out = impute_sex(&m, &mut CurationLog::new()).unwrap();
        assert_eq!(out.records()[2].sex, Some(Sex::Male));
        assert_eq!(out.records()[5].sex, Some(Sex::Female));
    }

    #[test]
    fn impute_sex_global_fallback_and_failure() {
        let m = manifest(vec![
            record("a", Label::Covid, "A", None, Some(Sex::Male)),
            record("b", Label::Covid, "B", None, None),
        ]);
        let out = impute_sex(&m, &mut CurationLog::new()).unwrap();
        assert_eq!(out.records()[1].sex, Some(Sex::Male));

        let none = manifest(vec![record("a", Label::Covid, "A", None, None)]);
        assert!(matches!(
            impute_sex(&none, &mut CurationLog::new()),
            Err(Error::ImputationImpossible(_))
        ));
        let full = manifest(vec![record("a", Label::Covid, "A", None, Some(Sex::Female))]);
        assert_eq!(impute_sex(&full, &mut CurationLog::new()).unwrap(), full);
    }

    #[test]
    fn age_groups_require_valid_ages() {
        let m = manifest(vec![
            record("a", Label::Covid, "A", Some(5.0), None),
            record("b", Label::Covid, "A", Some(25.0), None),
            record("c", Label::Covid, "A", Some(40.0), None),
            record("d", Label::Covid, "A", Some(70.0), None),
        ]);
        let out = assign_age_groups(&m, &mut CurationLog::new()).unwrap();
        let groups: Vec<_> = out.records().iter().map(|r| r.age_group.unwrap()).collect();
        assert_eq!(
            groups,
            [
                AgeGroup::Child,
                AgeGroup::YoungAdult,
                AgeGroup::Adult,
                AgeGroup::Elderly
            ]
        );
        assert_eq!(out.counts().by_age_group.len(), 4);

        let bad = manifest(vec![record("x", Label::Covid, "A", Some(130.0), None)]);
        let err = assign_age_groups(&bad, &mut CurationLog::new()).unwrap_err();
        assert!(matches!(err.root(), Error::Range { .. }));
        let missing = manifest(vec![record("x", Label::Covid, "A", None, None)]);
        assert!(assign_age_groups(&missing, &mut CurationLog::new()).is_err());
    }

    #[test]
    fn drop_countries_below_threshold() {
        let mut records = country("A", 150);
        records.extend(country("B", 99));
        let m = manifest(records);
        let mut log = CurationLog::new();
        let out = drop_low_sample_countries(&m, 100, &mut log).unwrap();
        assert_eq!(out.counts().by_country.keys().collect::<Vec<_>>(), ["A"]);
        assert_eq!(log.len(), 1);
        assert_eq!(log.actions()[0].rows_affected, 99);

        assert_eq!(drop_low_sample_countries(&m, 1, &mut CurationLog::new()).unwrap(), m);
        assert!(matches!(
            drop_low_sample_countries(&m, 1000, &mut CurationLog::new()),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn undersample_caps_and_is_deterministic() {
        let mut records = country("ES", 500);
        records.extend(country("CN", 40));
        let m = manifest(records);
        let caps: BTreeMap<_, _> = [("ES".to_string(), 120), ("CN".to_string(), 100)].into();
        let a = undersample(&m, &caps, 7, &mut CurationLog::new()).unwrap();
        let b = undersample(&m, &caps, 7, &mut CurationLog::new()).unwrap();
        let c = undersample(&m, &caps, 8, &mut CurationLog::new()).unwrap();
        assert_eq!(a.counts().by_country["ES"], 120);
        assert_eq!(a.counts().by_country["CN"], 40);
        assert_eq!(a, b);
        assert_ne!(a, c);

        let loose: BTreeMap<_, _> = [("ES".to_string(), 500)].into();
        assert_eq!(undersample(&m, &loose, 7, &mut CurationLog::new()).unwrap(), m);
    }
}
