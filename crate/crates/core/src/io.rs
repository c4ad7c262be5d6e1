//! CSV ingestion and export of censored observations.
//!
//! Layout: `duration_s,event,<covariates...>[,label]`. Durations and
//! covariates are plain decimals (no exponent, no `inf`/`nan`); `event` is
//! `1` for an observed event and `0` for right censoring. The markers `L` /
//! `left` and `T` / `truncated` in the event column are recognized and
//! rejected, since only right censoring can be estimated.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{CensoringKind, Dataset, Observation, CAMPAIGN_COVARIATES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const DURATION: &str = "duration_s";
const EVENT: &str = "event";
const LABEL: &str = "label";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    /// Values restricted to 0 and 1.
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Expected covariate columns, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub covariates: Vec<ColumnSpec>,
}

impl Schema {
    /// `rain, fog` continuous; `night, experts, universal` boolean.
    pub fn campaign() -> Self {
        Schema::from_names(CAMPAIGN_COVARIATES.iter().copied())
    }

    /// Builds a schema from column names; the campaign indicator names are boolean.
    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        let covariates = names
            .into_iter()
            .map(|name| ColumnSpec {
                name: name.to_string(),
                kind: if matches!(name, "night" | "experts" | "universal") {
                    ColumnKind::Boolean
                } else {
                    ColumnKind::Continuous
                },
            })
            .collect();
        Schema { covariates }
    }

    pub fn names(&self) -> Vec<&str> {
        self.covariates.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn kind_of(&self, name: &str) -> Option<ColumnKind> {
        self.covariates
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.kind)
    }

    fn expected_header(&self) -> String {
        let mut cols = vec![DURATION, EVENT];
        cols.extend(self.names());
        format!("{}[,{LABEL}]", cols.join(","))
    }
}

fn parse_decimal(field: &str) -> Option<f64> {
    let digits = field.strip_prefix(['-', '+']).unwrap_or(field);
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if int.len() + frac.len() == 0 || !all_digits(int) || !all_digits(frac) {
        return None;
    }
    field.parse().ok()
}

fn parse_event(field: &str, row: usize) -> Result<bool> {
    match field {
        "1" => Ok(true),
        "0" => Ok(false),
        "L" | "left" => Err(Error::UnsupportedCensoring {
            row,
            kind: CensoringKind::LeftCensored,
        }),
        "T" | "truncated" => Err(Error::UnsupportedCensoring {
            row,
            kind: CensoringKind::Truncated,
        }),
        other => Err(Error::Row {
            row,
            message: format!("event value `{other}` is not 0 or 1"),
        }),
    }
}

/// Reads a dataset whose covariate columns must match `schema` exactly.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset<f64>> {
    read_csv(File::open(path)?, Some(schema)).map(|(d, _)| d)
}

/// Reads a dataset taking the covariate columns from the header.
pub fn load_csv_inferred(path: impl AsRef<Path>) -> Result<(Dataset<f64>, Schema)> {
    read_csv(File::open(path)?, None)
}

/// Parses CSV text from any reader; with `schema = None` the header defines the covariates.
pub fn read_csv<R: Read>(reader: R, schema: Option<&Schema>) -> Result<(Dataset<f64>, Schema)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

    let has_label = header.last().is_some_and(|h| h == LABEL);
    let cov_end = header.len() - usize::from(has_label);
    let header_ok_prefix = header.len() >= 2 && header[0] == DURATION && header[1] == EVENT;
    let found_covs: Vec<&str> = if header_ok_prefix {
        header[2..cov_end].iter().map(String::as_str).collect()
    } else {
        Vec::new()
    };
    let schema = match schema {
        Some(s) => {
            if !header_ok_prefix || found_covs != s.names() {
                return Err(Error::Schema {
                    expected: s.expected_header(),
                    found: header.join(","),
                });
            }
            s.clone()
        }
        None => {
            let inferred = Schema::from_names(found_covs.iter().copied());
            let reserved = found_covs
                .iter()
                .any(|c| [DURATION, EVENT, LABEL].contains(c));
            let mut seen = std::collections::HashSet::new();
            let duplicate = !found_covs.iter().all(|c| seen.insert(*c));
            if !header_ok_prefix || reserved || duplicate || found_covs.iter().any(|c| c.is_empty())
            {
                return Err(Error::Schema {
                    expected: format!("{DURATION},{EVENT},<covariates...>[,{LABEL}]"),
                    found: header.join(","),
                });
            }
            inferred
        }
    };

    let mut observations = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Row {
            row,
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Row {
                row,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let duration = parse_decimal(&record[0]).ok_or_else(|| Error::Row {
            row,
            message: format!("duration `{}` is not a decimal number", &record[0]),
        })?;
        if duration < 0.0 {
            return Err(Error::Row {
                row,
                message: format!("duration {duration} is negative"),
            });
        }
        let event = parse_event(&record[1], row)?;
        let mut covariates = Vec::with_capacity(schema.covariates.len());
        for (k, spec) in schema.covariates.iter().enumerate() {
            let field = &record[2 + k];
            let v = parse_decimal(field).ok_or_else(|| Error::Row {
                row,
                message: format!("{} value `{field}` is not a decimal number", spec.name),
            })?;
            if spec.kind == ColumnKind::Boolean && v != 0.0 && v != 1.0 {
                return Err(Error::Row {
                    row,
                    message: format!("{} value `{field}` is not 0 or 1", spec.name),
                });
            }
            covariates.push(v);
        }
        let mut obs = Observation::new(duration, event, covariates);
        if has_label && !record[cov_end].is_empty() {
            obs.label = Some(record[cov_end].to_string());
        }
        observations.push(obs);
    }
    let names = schema.names().into_iter().map(String::from).collect();
    let dataset = Dataset::new(observations, names)?;
    Ok((dataset, schema))
}

/// Writes `dataset` in the layout read by [`load_csv`]; values round-trip exactly.
pub fn write_csv<T: Scalar, W: Write>(dataset: &Dataset<T>, writer: W) -> Result<()> {
    let has_label = dataset.observations().iter().any(|o| o.label.is_some());
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let mut header = vec![DURATION.to_string(), EVENT.to_string()];
    header.extend(dataset.covariate_names().iter().cloned());
    if has_label {
        header.push(LABEL.to_string());
    }
    w.write_record(&header)?;
    for obs in dataset.observations() {
        let mut rec = vec![
            obs.duration.to_string(),
            if obs.event { "1" } else { "0" }.to_string(),
        ];
        rec.extend(obs.covariates.iter().map(T::to_string));
        if has_label {
            rec.push(obs.label.clone().unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// [`write_csv`] to a file path.
pub fn save_csv<T: Scalar>(dataset: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    write_csv(dataset, File::create(path)?)
}
