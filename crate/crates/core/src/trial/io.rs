//! CSV exchange format for patient-level data: a header
//! `subtrial,y,z1,...,zq,T` followed by one row per patient.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{BasketTrialData, SubtrialData};
use crate::error::{Error, Result};

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_trial_csv<R: Read>(reader: R) -> Result<BasketTrialData> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_ascii_lowercase).collect();
    let width = header.len();
    if width < 3 || header[0] != "subtrial" || header[1] != "y" || header[width - 1] != "t" {
        return Err(parse_err(
            1,
            "header must be `subtrial,y,z1,...,zq,T`",
        ));
    }
    for (j, name) in header[2..width - 1].iter().enumerate() {
        if *name != format!("z{}", j + 1) {
            return Err(parse_err(1, format!("expected column z{}, found `{name}`", j + 1)));
        }
    }

    let mut groups: BTreeMap<usize, SubtrialData> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let field = |j: usize| -> Result<f64> {
            record[j]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("`{}` is not a finite number", &record[j])))
        };
        let k: usize = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad subtrial label `{}`", &record[0])))?;
        let t = match &record[width - 1] {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(parse_err(
                    line,
                    format!("treatment indicator must be 0 or 1, found `{other}`"),
                ))
            }
        };
        let y = field(1)?;
        let z = (2..width - 1).map(field).collect::<Result<Vec<_>>>()?;
        let entry = groups.entry(k).or_insert_with(|| SubtrialData {
            k,
            y: Vec::new(),
            covariates: Vec::new(),
            treatment: Vec::new(),
        });
        entry.y.push(y);
        entry.covariates.push(z);
        entry.treatment.push(t);
    }
    BasketTrialData::new(groups.into_values().collect())
}

pub fn write_trial_csv<W: Write>(trial: &BasketTrialData, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let q = trial.num_covariates();
    let mut header = vec!["subtrial".to_string(), "y".to_string()];
    header.extend((1..=q).map(|j| format!("z{j}")));
    header.push("T".to_string());
    wtr.write_record(&header)?;
    for s in &trial.subtrials {
        for i in 0..s.len() {
            let mut row = vec![s.k.to_string(), s.y[i].to_string()];
            row.extend(s.covariates[i].iter().map(f64::to_string));
            row.push(s.treatment[i].to_string());
            wtr.write_record(&row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}
