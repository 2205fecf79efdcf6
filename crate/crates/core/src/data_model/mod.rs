//! Tabular patient metadata: manifest ingestion, imputation, age grouping,
//! filtering, undersampling and stratified splitting.
//!
//! Every operation is a pure transformation from one [`DatasetManifest`] to
//! another; curation steps append one [`CurationAction`] per effect to a
//! [`CurationLog`].

mod curation;
mod io;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use curation::{
    assign_age_groups, drop_low_sample_countries, impute_age, impute_sex, undersample, AgeImputation, CurationAction,
    CurationLog,
};
pub use io::{load_manifest, read_manifest, write_manifest, REQUIRED_COLUMNS};
pub use split::{stratified_split, SplitOutcome, SplitSpec, StratumKey};

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "`{other}` is not a valid {} (expected one of: {})",
                        stringify!($name).to_ascii_lowercase(),
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

string_enum!(
    /// Diagnostic label of an image.
    Label {
        Covid => "covid",
        Normal => "normal",
        OtherPneumonia => "other_pneumonia",
    }
);

string_enum!(
    Sex {
        Female => "female",
        Male => "male",
    }
);

string_enum!(
    Modality {
        Ct => "ct",
        Xray => "xray",
    }
);

string_enum!(
    /// Demographic age bins; each bin is closed at its upper edge.
    AgeGroup {
        Child => "child",
        YoungAdult => "young_adult",
        Adult => "adult",
        Elderly => "elderly",
    }
);

impl Label {
    /// Class index used by models. Binary tasks encode covid as the positive
    /// class (1) and every other label as 0; multi-class tasks use
    /// normal = 0, covid = 1, other_pneumonia = 2.
    pub fn class_index(self, num_classes: usize) -> usize {
        match (num_classes, self) {
            (2, Label::Covid) => 1,
            (2, _) => 0,
            (_, Label::Normal) => 0,
            (_, Label::Covid) => 1,
            (_, Label::OtherPneumonia) => 2,
        }
    }
}

pub const MIN_AGE: f64 = 0.0;
pub const MAX_AGE: f64 = 100.0;

impl AgeGroup {
    /// Bins: child `[0, 18]`, young adult `(18, 35]`, adult `(35, 60]`,
    /// elderly `(60, 100]`.
    pub fn from_age(age: f64) -> Result<AgeGroup> {
        if !(MIN_AGE..=MAX_AGE).contains(&age) {
            return Err(Error::range("age", age, "[0, 100]"));
        }
        Ok(if age <= 18.0 {
            AgeGroup::Child
        } else if age <= 35.0 {
            AgeGroup::YoungAdult
        } else if age <= 60.0 {
            AgeGroup::Adult
        } else {
            AgeGroup::Elderly
        })
    }
}

/// Metadata for one image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub image_ref: String,
    pub label: Label,
    pub country: String,
    pub age: Option<f64>,
    pub sex: Option<Sex>,
    pub modality: Modality,
    pub source: String,
    /// Filled in by [`assign_age_groups`]; not part of the CSV schema.
    #[serde(default)]
    pub age_group: Option<AgeGroup>,
}

impl PatientRecord {
    /// The record's age group, derived from `age` when not yet assigned.
    pub fn resolved_age_group(&self) -> Option<AgeGroup> {
        self.age_group
            .or_else(|| self.age.and_then(|a| AgeGroup::from_age(a).ok()))
    }
}

/// Tallies that are always recomputed from the records.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ManifestCounts {
    pub total: usize,
    pub by_label: BTreeMap<Label, usize>,
    pub by_country: BTreeMap<String, usize>,
    pub by_age_group: BTreeMap<AgeGroup, usize>,
    pub by_country_label: BTreeMap<(String, Label), usize>,
    pub missing_age: usize,
    pub missing_sex: usize,
}

impl ManifestCounts {
    pub fn from_records(records: &[PatientRecord]) -> Self {
        let mut c = ManifestCounts {
            total: records.len(),
            ..Default::default()
        };
        for r in records {
            *c.by_label.entry(r.label).or_default() += 1;
            *c.by_country.entry(r.country.clone()).or_default() += 1;
            *c.by_country_label.entry((r.country.clone(), r.label)).or_default() += 1;
            if let Some(g) = r.age_group {
                *c.by_age_group.entry(g).or_default() += 1;
            }
            c.missing_age += usize::from(r.age.is_none());
            c.missing_sex += usize::from(r.sex.is_none());
        }
        c
    }
}

/// A validated, ordered collection of records with derived tallies.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    records: Vec<PatientRecord>,
    counts: ManifestCounts,
}

impl DatasetManifest {
    /// Fails on duplicate `image_ref`s.
    pub fn new(records: Vec<PatientRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.image_ref.as_str()) {
                return Err(Error::DuplicateImageRef(r.image_ref.clone()));
            }
        }
        let counts = ManifestCounts::from_records(&records);
        Ok(Self { records, counts })
    }

    pub fn empty() -> Self {
        Self {
            records: Vec::new(),
            counts: ManifestCounts::default(),
        }
    }

    pub fn records(&self) -> &[PatientRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<PatientRecord> {
        self.records
    }

    pub fn counts(&self) -> &ManifestCounts {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Positive (covid) versus everything else.
    pub fn imbalance(&self) -> ImbalanceSummary {
        let covid = self.counts.by_label.get(&Label::Covid).copied().unwrap_or(0);
        ImbalanceSummary {
            covid,
            non_covid: self.counts.total - covid,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImbalanceSummary {
    pub covid: usize,
    pub non_covid: usize,
}

impl ImbalanceSummary {
    pub fn total(&self) -> usize {
        self.covid + self.non_covid
    }

    /// covid : non-covid; `None` when there are no negatives.
    pub fn ratio(&self) -> Option<f64> {
        (self.non_covid > 0).then(|| self.covid as f64 / self.non_covid as f64)
    }
}

impl fmt::Display for ImbalanceSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "total {} | covid {} | non-covid {}",
            self.total(),
            self.covid,
            self.non_covid
        )?;
        match self.ratio() {
            Some(r) => write!(f, " | ratio {r:.2}:1"),
            None => write!(f, " | ratio n/a"),
        }
    }
}
