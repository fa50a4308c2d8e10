//! Calibration CSV: header `px,py,pz,i1,...,i8,bx,by,bz` (m, A, T).

use std::io::{Read, Write};

use super::FieldSample;
use crate::{CurrentVector, Error, Result, Vec3};

fn column_names() -> Vec<String> {
    let mut names: Vec<String> = ["px", "py", "pz"].iter().map(|s| s.to_string()).collect();
    names.extend((1..=8).map(|i| format!("i{i}")));
    names.extend(["bx", "by", "bz"].iter().map(|s| s.to_string()));
    names
}

pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<FieldSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: Vec<usize> = column_names()
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::param(format!("calibration CSV is missing column `{name}`")))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let mut values = [0.0; 14];
        for (slot, (&col, name)) in values.iter_mut().zip(index.iter().zip(column_names())) {
            let raw = record.get(col).unwrap_or("");
            *slot = raw.parse().map_err(|_| {
                Error::param(format!("calibration CSV row {}: column `{name}` is not a number: {raw:?}", row + 2))
            })?;
        }
        let sample = FieldSample {
            position: Vec3::new(values[0], values[1], values[2]),
            coil_currents: CurrentVector::from_column_slice(&values[3..11]),
            measured_field: Vec3::new(values[11], values[12], values[13]),
        };
        if !sample.is_finite() {
            return Err(Error::param(format!("calibration CSV row {} has non-finite values", row + 2)));
        }
        out.push(sample);
    }
    Ok(out)
}

pub fn write_samples_csv<W: Write>(writer: W, samples: &[FieldSample]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(column_names())?;
    for s in samples {
        let row: Vec<String> = s
            .position
            .iter()
            .chain(s.coil_currents.iter())
            .chain(s.measured_field.iter())
            .map(|x| x.to_string())
            .collect();
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
