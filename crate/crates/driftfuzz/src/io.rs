//! CSV ingestion and emission.
//!
//! Format: UTF-8, first line is a header, decimal point `.`. Missing cells
//! are encoded as an empty field or the literal `nan` (case-insensitive).
//! Rows with every cell missing are rejected at load with their row index.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::ObservationSet;
use crate::error::{Error, Result};

/// Read an observation set from CSV text.
pub fn read_observations<R: Read>(reader: R) -> Result<ObservationSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<String> = headers.iter().map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::Csv {
            row: 0,
            message: "empty header".into(),
        });
    }

    let cols = names.len();
    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut rows = 0usize;
    for (idx, record) in rdr.records().enumerate() {
        let row_no = idx + 1;
        let record = record.map_err(|e| Error::Csv {
            row: row_no,
            message: e.to_string(),
        })?;
        if record.len() != cols {
            return Err(Error::Csv {
                row: row_no,
                message: format!("expected {cols} fields, got {}", record.len()),
            });
        }
        let mut all_missing = true;
        for field in record.iter() {
            if field.is_empty() || field.eq_ignore_ascii_case("nan") {
                values.push(f64::NAN);
                mask.push(true);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Csv {
                    row: row_no,
                    message: format!("cannot parse `{field}` as a number"),
                })?;
                if v.is_nan() {
                    values.push(f64::NAN);
                    mask.push(true);
                } else {
                    values.push(v);
                    mask.push(false);
                    all_missing = false;
                }
            }
        }
        if all_missing {
            return Err(Error::DegenerateRow(row_no));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Csv {
            row: 0,
            message: "no data rows".into(),
        });
    }
    ObservationSet::from_parts(values, mask, rows, cols, names)
}

/// Read an observation set from a CSV file.
pub fn read_observations_path<P: AsRef<Path>>(path: P) -> Result<ObservationSet> {
    let file = std::fs::File::open(path)?;
    read_observations(std::io::BufReader::new(file))
}

/// Write an observation set as CSV. Missing cells become empty fields.
pub fn write_observations<W: Write>(data: &ObservationSet, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(data.column_names()).map_err(csv_io)?;
    let mut field = String::new();
    for i in 0..data.n_rows() {
        let record: Vec<String> = (0..data.n_cols())
            .map(|j| match data.get(i, j) {
                Some(v) => {
                    field.clear();
                    format_value(&mut field, v);
                    field.clone()
                }
                None => String::new(),
            })
            .collect();
        wtr.write_record(&record).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Write an observation set to a CSV file.
pub fn write_observations_path<P: AsRef<Path>>(data: &ObservationSet, path: P) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_observations(data, std::io::BufWriter::new(file))
}

fn format_value(out: &mut String, v: f64) {
    use std::fmt::Write;
    // Shortest representation that round-trips through f64.
    let _ = write!(out, "{v}");
}

fn csv_io(e: csv::Error) -> Error {
    Error::Csv {
        row: 0,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_values_and_mask() {
        let csv_text = "a,b,c\n1.5,,3\n4,NaN,6.25\n-0.5,8,nan\n";
        let d = read_observations(csv_text.as_bytes()).unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.column_names(), &["a", "b", "c"]);
        assert!(d.is_missing(0, 1));
        assert!(d.is_missing(1, 1));
        assert!(d.is_missing(2, 2));
        assert_eq!(d.get(2, 0), Some(-0.5));

        let mut buf = Vec::new();
        write_observations(&d, &mut buf).unwrap();
        let back = read_observations(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn all_missing_row_rejected_with_index() {
        let csv_text = "a,b\n1,2\n,\n3,4\n";
        match read_observations(csv_text.as_bytes()) {
            Err(Error::DegenerateRow(row)) => assert_eq!(row, 2),
            other => panic!("expected DegenerateRow, got {other:?}"),
        }
    }

    #[test]
    fn garbage_field_reports_row() {
        let csv_text = "a\n1\nxyz\n";
        match read_observations(csv_text.as_bytes()) {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected Csv error, got {other:?}"),
        }
    }
}
