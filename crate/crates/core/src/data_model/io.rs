use std::io::{Read, Write};
use std::path::Path;

use super::{DatasetManifest, PatientRecord};
use crate::error::{Error, Result, ResultExt};

/// Column names every manifest header must contain. Extra columns are ignored.
pub const REQUIRED_COLUMNS: [&str; 7] = ["image_ref", "label", "country", "age", "sex", "modality", "source"];

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).context(format!("opening manifest {}", path.display()))?;
    read_manifest(file)
}

/// Parses manifest CSV. Empty cells in `age`/`sex` are treated as missing.
/// Row numbers in errors count data rows from 1.
pub fn read_manifest(reader: impl Read) -> Result<DatasetManifest> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 7];
    for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let field = |k: usize| row.get(idx[k]).unwrap_or("");
        let bad = |message: String| Error::Row { row: row_no, message };
        let age = match field(3) {
            "" => None,
            s => Some(
                s.parse::<f64>()
                    .ok()
                    .filter(|a| a.is_finite())
                    .ok_or_else(|| bad(format!("unparseable age `{s}`")))?,
            ),
        };
        let sex = match field(4) {
            "" => None,
            s => Some(s.parse().map_err(bad)?),
        };
        let image_ref = field(0).to_string();
        if image_ref.is_empty() {
            return Err(bad("empty image_ref".to_string()));
        }
        records.push(PatientRecord {
            image_ref,
            label: field(1).parse().map_err(bad)?,
            country: field(2).to_string(),
            age,
            sex,
            modality: field(5).parse().map_err(bad)?,
            source: field(6).to_string(),
            age_group: None,
        });
    }
    DatasetManifest::new(records)
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::fs::File::create(path).context(format!("creating {}", path.display()))?;
    write_manifest_to(file, manifest)
}

pub(crate) fn write_manifest_to(writer: impl Write, manifest: &DatasetManifest) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REQUIRED_COLUMNS)?;
    for r in manifest.records() {
        let age = r.age.map(|a| a.to_string()).unwrap_or_default();
        let sex = r.sex.map(|s| s.as_str()).unwrap_or_default();
        w.write_record([
            r.image_ref.as_str(),
            r.label.as_str(),
            r.country.as_str(),
            age.as_str(),
            sex,
            r.modality.as_str(),
            r.source.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{Label, Sex};

    const HEADER: &str = "image_ref,label,country,age,sex,modality,source\n";

    #[test]
    fn empty_manifest_with_header() {
        let m = read_manifest(HEADER.as_bytes()).unwrap();
        assert!(m.is_empty());
        assert_eq!(m.counts().total, 0);
    }

    #[test]
    fn missing_column_is_named() {
        let err = read_manifest("image_ref,label,country,age,modality,source\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "sex"), "{err}");
    }

    #[test]
    fn ten_row_fixture_counts_missing_ages() {
        // ages missing on rows 3 and 8 (counted by hand)
        let csv = format!(
            "{HEADER}\
             a1.png,covid,ES,34,female,xray,bimcv\n\
             a2.png,normal,ES,51,male,xray,bimcv\n\
             a3.png,covid,ES,,female,ct,bimcv\n\
             a4.png,covid,CN,62,,ct,ictcf\n\
             a5.png,normal,CN,8,male,ct,cncb\n\
             a6.png,covid,US,45,female,ct,ricord\n\
             a7.png,other_pneumonia,US,29,male,xray,tcia\n\
             a8.png,covid,FR,,male,ct,stoic\n\
             a9.png,normal,FR,70,female,ct,stoic\n\
             a10.png,covid,RU,55,female,ct,mosmed\n"
        );
        let m = read_manifest(csv.as_bytes()).unwrap();
        assert_eq!(m.len(), 10);
        assert_eq!(m.counts().missing_age, 2);
        assert_eq!(m.counts().missing_sex, 1);
        assert_eq!(m.counts().by_label[&Label::Covid], 6);
        assert_eq!(m.records()[0].sex, Some(Sex::Female));
        assert_eq!(m.records()[2].age, None);
    }

    #[test]
    fn unparseable_age_reports_row() {
        let csv = format!("{HEADER}a.png,covid,ES,30,male,ct,x\nb.png,covid,ES,thirty,male,ct,x\n");
        match read_manifest(csv.as_bytes()).unwrap_err() {
            Error::Row { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("thirty"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn write_then_read_preserves_records() {
        let csv = format!("{HEADER}a.png,covid,ES,30.5,male,ct,x\nb.png,normal,CN,,,xray,y\n");
        let m = read_manifest(csv.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_manifest_to(&mut buf, &m).unwrap();
        assert_eq!(read_manifest(buf.as_slice()).unwrap(), m);
    }
}
