//! Curate a patient manifest and split it 70/15/15 by label and age group.

use std::collections::BTreeMap;

use tlbench::data_model::{
    assign_age_groups, drop_low_sample_countries, impute_age, impute_sex, stratified_split, undersample, AgeImputation,
    CurationLog, DatasetManifest, Label, Modality, PatientRecord, Sex, SplitSpec, StratumKey,
};

fn manifest() -> tlbench::Result<DatasetManifest> {
    let countries = [("Spain", 900), ("China", 700), ("USA", 400), ("Peru", 12)];
    let mut records = Vec::new();
    for (country, n) in countries {
        for i in 0..n {
            records.push(PatientRecord {
                image_ref: format!("{country}/{i:04}.png"),
                label: if i % 3 == 0 { Label::Normal } else { Label::Covid },
                country: country.to_string(),
                // every 11th age and every 13th sex is missing
                age: (i % 11 != 0).then_some((i * 29 % 95) as f64),
                sex: (i % 13 != 0).then_some(if i % 2 == 0 { Sex::Female } else { Sex::Male }),
                modality: Modality::Xray,
                source: "example".to_string(),
                age_group: None,
            });
        }
    }
    DatasetManifest::new(records)
}

fn main() -> tlbench::Result<()> {
    let raw = manifest()?;
    println!(
        "raw: {} records, {} missing age, {} missing sex",
        raw.len(),
        raw.counts().missing_age,
        raw.counts().missing_sex
    );

    let mut log = CurationLog::new();
    let m = impute_age(&raw, AgeImputation::CountryMedian, &mut log)?;
    let m = impute_sex(&m, &mut log)?;
    let m = assign_age_groups(&m, &mut log)?;
    let m = drop_low_sample_countries(&m, 50, &mut log)?;
    let caps = BTreeMap::from([("Spain".to_string(), 600)]);
    let m = undersample(&m, &caps, 42, &mut log)?;

    let spec = SplitSpec::new([0.7, 0.15, 0.15], vec![StratumKey::Label, StratumKey::AgeGroup], 42)?;
    let split = stratified_split(&m, &spec, &mut log)?;
    println!("{log}");
    println!("curated: {} records by country {:?}", m.len(), m.counts().by_country);
    println!("split sizes: {:?}", split.sizes());
    for (name, part) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        println!("  {name:<5} {:?}", part.counts().by_age_group);
    }
    for w in &split.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
