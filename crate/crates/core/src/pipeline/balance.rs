use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;

use super::augment::{apply_augmentation, AugmentationPolicy};
use super::image::{ImageStore, ImageTensor};
use crate::data_model::{DatasetManifest, Label, PatientRecord};
use crate::error::{Error, Result};
use crate::rng;

/// Target and current size of one (country, label) cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BalancingCell {
    pub country: String,
    pub label: Label,
    pub existing: usize,
    pub target: usize,
}

impl BalancingCell {
    pub fn synth_needed(&self) -> usize {
        self.target.saturating_sub(self.existing)
    }

    pub fn surplus(&self) -> usize {
        self.existing.saturating_sub(self.target)
    }

    fn name(&self) -> String {
        format!("{}/{}", self.country, self.label)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BalancingPlan {
    pub cells: Vec<BalancingCell>,
    pub allow_downsampling: bool,
}

impl BalancingPlan {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_synth(&self) -> usize {
        self.cells.iter().map(BalancingCell::synth_needed).sum()
    }

    pub fn total_removed(&self) -> usize {
        self.cells.iter().map(BalancingCell::surplus).sum()
    }

    pub fn target_by_label(&self) -> BTreeMap<Label, usize> {
        let mut out = BTreeMap::new();
        for c in &self.cells {
            *out.entry(c.label).or_default() += c.target;
        }
        out
    }
}

impl fmt::Display for BalancingPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.cells {
            writeln!(
                f,
                "cell {} existing={} target={} synth_needed={} removed={}",
                c.name(),
                c.existing,
                c.target,
                c.synth_needed(),
                c.surplus()
            )?;
        }
        let totals: Vec<String> = self.target_by_label().iter().map(|(l, n)| format!("{l}={n}")).collect();
        write!(
            f,
            "totals {} synth={} removed={}",
            totals.join(" "),
            self.total_synth(),
            self.total_removed()
        )
    }
}

/// Builds one cell per (country present in `counts`, label in `targets`).
/// Labels without a target are left alone.
pub fn plan_balancing(
    counts: &BTreeMap<(String, Label), usize>,
    targets: &BTreeMap<Label, usize>,
    allow_downsampling: bool,
) -> Result<BalancingPlan> {
    let countries: Vec<&String> = {
        let mut v: Vec<&String> = counts.keys().map(|(c, _)| c).collect();
        v.dedup();
        v
    };
    let mut cells = Vec::new();
    for country in countries {
        for (&label, &target) in targets {
            let existing = counts.get(&(country.clone(), label)).copied().unwrap_or(0);
            let cell = BalancingCell {
                country: country.clone(),
                label,
                existing,
                target,
            };
            if existing > target && !allow_downsampling {
                return Err(Error::Plan(format!(
                    "cell {} has {existing} records, above target {target}; enable downsampling",
                    cell.name()
                )));
            }
            if existing == 0 && target > 0 {
                return Err(Error::Plan(format!(
                    "cell {} has no source records to augment",
                    cell.name()
                )));
            }
            cells.push(cell);
        }
    }
    Ok(BalancingPlan {
        cells,
        allow_downsampling,
    })
}

/// Executes `plan`: downsamples surplus cells and writes augmented copies of
/// the cell's source images to `staging/augmented/<country>/<label>/`.
///
/// Original records keep their order; synthetic records follow, cell by cell.
pub fn execute_plan(
    manifest: &DatasetManifest,
    plan: &BalancingPlan,
    policy: &AugmentationPolicy,
    store: &ImageStore,
    staging: &Path,
) -> Result<DatasetManifest> {
    policy.validate()?;
    if plan.is_empty() {
        return Ok(manifest.clone());
    }
    let mut keep = vec![true; manifest.len()];
    let mut synthetic = Vec::new();
    let mut completed = Vec::new();
    for cell in &plan.cells {
        let members: Vec<usize> = manifest
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.country == cell.country && r.label == cell.label)
            .map(|(i, _)| i)
            .collect();
        if members.len() != cell.existing {
            return Err(Error::Plan(format!(
                "cell {} planned for {} records but the manifest has {}",
                cell.name(),
                cell.existing,
                members.len()
            )));
        }
        if cell.surplus() > 0 {
            if !plan.allow_downsampling {
                return Err(Error::Plan(format!("cell {} needs downsampling", cell.name())));
            }
            let mut shuffled = members.clone();
            let key = rng::derive(policy.seed, &cell.name());
            shuffled.shuffle(&mut rng::keyed(key, &[]));
            for &i in &shuffled[cell.target..] {
                keep[i] = false;
            }
        }
        let dir = staging.join("augmented").join(&cell.country).join(cell.label.as_str());
        let mut cache: HashMap<usize, ImageTensor> = HashMap::new();
        for k in 0..cell.synth_needed() {
            let src_idx = members[k % members.len()];
            let src = &manifest.records()[src_idx];
            let written = (|| -> Result<PatientRecord> {
                let base = match cache.entry(src_idx) {
                    std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::hash_map::Entry::Vacant(e) => e.insert(store.load(&src.image_ref, None)?),
                };
                let img = apply_augmentation(base, policy, src_idx as u64, k as u64);
                let stem = Path::new(&src.image_ref)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "image".to_string());
                let path = dir.join(format!("{stem}_{k}.png"));
                img.save_png(&path)?;
                Ok(PatientRecord {
                    image_ref: store.reference_for(&path),
                    ..src.clone()
                })
            })();
            match written {
                Ok(rec) => synthetic.push(rec),
                Err(e) => {
                    return Err(Error::PartialPlan {
                        completed,
                        message: format!("cell {}: {e}", cell.name()),
                    })
                }
            }
        }
        completed.push(cell.name());
    }
    let mut records: Vec<PatientRecord> = manifest
        .records()
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r.clone())
        .collect();
    records.extend(synthetic);
    DatasetManifest::new(records)
}
