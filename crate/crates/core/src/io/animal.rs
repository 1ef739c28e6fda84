use std::path::Path;

use serde::Deserialize;

use super::{check_schema_version, read_text, write_text, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::model::{AnimalStudy, DoseGrid};

const HEADER: [&str; 5] = ["study_id", "species", "dose", "n", "r"];
const VERSION_TAG: &str = "# schema_version:";

#[derive(Debug, Deserialize)]
struct Row {
    study_id: String,
    species: String,
    dose: f64,
    n: u32,
    r: u32,
}

fn data_error(path: &str, line: u64, msg: impl std::fmt::Display) -> Error {
    Error::InvalidData(format!("{path}: row {line}: {msg}"))
}

/// Parses animal study rows (`study_id,species,dose,n,r`, one dose per row).
/// Rows of a study may appear in any order and are gathered by `study_id` in
/// order of first appearance. An optional first line
/// `# schema_version: MAJOR.MINOR` is checked. Row numbers in errors count
/// file lines from 1.
pub fn read_animal_data(text: &str, path: &str, reference_dose: f64) -> Result<Vec<AnimalStudy>> {
    if let Some(first) = text.lines().next() {
        if let Some(v) = first.trim().strip_prefix(VERSION_TAG) {
            check_schema_version(v.trim(), path)?;
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })?;
    if header.iter().ne(HEADER) {
        return Err(Error::InvalidData(format!(
            "{path}: header must be {}, found {}",
            HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut studies: Vec<(String, String, Vec<(f64, u32, u32, u64)>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record
            .deserialize(Some(&csv::StringRecord::from(HEADER.to_vec())))
            .map_err(|e| data_error(path, line, e))?;
        if row.r > row.n {
            return Err(data_error(
                path,
                line,
                format!("r = {} exceeds n = {} in study {}", row.r, row.n, row.study_id),
            ));
        }
        if !(row.dose > 0.0 && row.dose.is_finite()) {
            return Err(data_error(path, line, format!("dose {} is not positive", row.dose)));
        }
        match studies.iter_mut().find(|s| s.0 == row.study_id) {
            Some(s) if s.1 != row.species => {
                return Err(data_error(
                    path,
                    line,
                    format!(
                        "study {} is listed as both {} and {}",
                        row.study_id, s.1, row.species
                    ),
                ));
            }
            Some(s) => s.2.push((row.dose, row.n, row.r, line)),
            None => studies.push((row.study_id, row.species, vec![(row.dose, row.n, row.r, line)])),
        }
    }

    studies
        .into_iter()
        .map(|(id, species, mut rows)| {
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(data_error(
                    path,
                    w[1].3,
                    format!("study {id} lists dose {} twice", w[1].0),
                ));
            }
            let grid = DoseGrid::new(rows.iter().map(|r| r.0).collect(), reference_dose)?;
            AnimalStudy::new(
                id,
                species,
                grid,
                rows.iter().map(|r| r.1).collect(),
                rows.iter().map(|r| r.2).collect(),
            )
        })
        .collect()
}

pub fn load_animal_data(path: &Path, reference_dose: f64) -> Result<Vec<AnimalStudy>> {
    let text = read_text(path)?;
    read_animal_data(&text, &path.display().to_string(), reference_dose)
}

/// CSV text of `studies`, headed by the schema version line.
pub fn animal_csv_string(studies: &[AnimalStudy]) -> String {
    let mut out = format!("{VERSION_TAG} {SCHEMA_VERSION}\n{}\n", HEADER.join(","));
    for s in studies {
        for (j, d) in s.grid().doses().iter().enumerate() {
            out.push_str(&format!("{},{},{},{},{}\n", s.study_id, s.species, d, s.n()[j], s.r()[j]));
        }
    }
    out
}

pub fn write_animal_data(path: &Path, studies: &[AnimalStudy]) -> Result<()> {
    write_text(path, &animal_csv_string(studies))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_above_n_is_rejected_with_its_row() {
        let text = "study_id,species,dose,n,r\nm1,Monkey,1,6,0\nm1, Monkey, 10, 6, 7\n";
        let err = read_animal_data(text, "a.csv", 5.0).unwrap_err().to_string();
        assert!(err.contains("row 3") && err.contains("r = 7 exceeds n = 6"), "{err}");
    }

    #[test]
    fn version_line_counts_toward_rows() {
        let text = "# schema_version: 1.0\nstudy_id,species,dose,n,r\nm1,Monkey,10,6,7\n";
        let err = read_animal_data(text, "a.csv", 5.0).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
        let text = "# schema_version: 3.0\nstudy_id,species,dose,n,r\n";
        assert!(read_animal_data(text, "a.csv", 5.0).is_err());
    }

    #[test]
    fn rows_are_grouped_and_sorted() {
        let text = "study_id,species,dose,n,r\nr1,Rat,10,5,2\nm1,Monkey,1,4,0\nr1,Rat,1,5,0\n";
        let s = read_animal_data(text, "a.csv", 5.0).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].study_id, "r1");
        assert_eq!(s[0].grid().doses(), &[1.0, 10.0]);
        assert_eq!(s[0].r(), &[0, 2]);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_animal_data("id,species,dose,n,r\n", "a.csv", 5.0).is_err());
    }
}
