//! Observed-data model: ingestion and validation of A/B test logs.
//!
//! The only measured inputs to the whole pipeline are user-level rows
//! `(treatment, mediator, outcome)`. This module turns a CSV stream into
//! a validated, immutable [`ObservationTable`] and computes the per-arm
//! descriptive statistics that reports are built on.

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{chunk_reduce, Kahan};

/// Experiment arm of a unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    /// The arm as the 0/1 regressor used throughout estimation.
    pub fn indicator(self) -> f64 {
        match self {
            Arm::Control => 0.0,
            Arm::Treatment => 1.0,
        }
    }
}

/// One user-level observation.
///
/// `mediator` is the measured intermediate metric (for example organic
/// search clicks) and `outcome` the business metric; a binary outcome is
/// carried as 0.0/1.0. `unit_id` is kept for traceability but plays no
/// role in estimation.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationRecord {
    pub unit_id: Option<String>,
    pub treatment: Arm,
    pub mediator: f64,
    pub outcome: f64,
}

/// Errors raised while building or ingesting an [`ObservationTable`].
#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("column {column:?} not found in header")]
    MissingColumn { column: String },
    #[error("row {row}: treatment value {value:?} is not \"0\" or \"1\"")]
    BadTreatmentValue { row: usize, value: String },
    #[error("row {row}: {column} value {value:?} is not a finite number")]
    BadNumericValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: {column} is not finite")]
    NonFiniteValue { row: usize, column: String },
    #[error("{arm:?} arm has {count} rows, need at least 2")]
    DegenerateArm { arm: Arm, count: usize },
}

impl DataError {
    /// Stable machine-readable error name.
    pub fn name(&self) -> &'static str {
        match self {
            DataError::Io(_) => "Io",
            DataError::Csv(_) => "Csv",
            DataError::MissingColumn { .. } => "MissingColumn",
            DataError::BadTreatmentValue { .. } => "BadTreatmentValue",
            DataError::BadNumericValue { .. } => "BadNumericValue",
            DataError::NonFiniteValue { .. } => "NonFiniteValue",
            DataError::DegenerateArm { .. } => "DegenerateArm",
        }
    }
}

/// Validated, immutable collection of observations.
///
/// Construction guarantees that every mediator and outcome is finite and
/// that each arm holds at least two rows (the saturated outcome
/// regression needs within-arm variation). Row order is preserved.
#[derive(Clone, Debug)]
pub struct ObservationTable {
    records: Vec<ObservationRecord>,
    n_treated: usize,
    n_control: usize,
}

impl ObservationTable {
    pub fn new(records: Vec<ObservationRecord>) -> Result<Self, DataError> {
        let mut n_treated = 0usize;
        for (i, r) in records.iter().enumerate() {
            let row = i + 1;
            if !r.mediator.is_finite() {
                return Err(DataError::NonFiniteValue {
                    row,
                    column: "mediator".into(),
                });
            }
            if !r.outcome.is_finite() {
                return Err(DataError::NonFiniteValue {
                    row,
                    column: "outcome".into(),
                });
            }
            if r.treatment == Arm::Treatment {
                n_treated += 1;
            }
        }
        let n_control = records.len() - n_treated;
        if n_control < 2 {
            return Err(DataError::DegenerateArm {
                arm: Arm::Control,
                count: n_control,
            });
        }
        if n_treated < 2 {
            return Err(DataError::DegenerateArm {
                arm: Arm::Treatment,
                count: n_treated,
            });
        }
        Ok(ObservationTable {
            records,
            n_treated,
            n_control,
        })
    }

    pub fn records(&self) -> &[ObservationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_treated(&self) -> usize {
        self.n_treated
    }

    pub fn n_control(&self) -> usize {
        self.n_control
    }
}

/// Maps the required variables onto CSV column names.
#[derive(Clone, Debug)]
pub struct ColumnBindings {
    pub treatment: String,
    pub mediator: String,
    pub outcome: String,
    /// Optional identifier column, carried through but never used in
    /// estimation.
    pub unit_id: Option<String>,
}

impl ColumnBindings {
    pub fn new(
        treatment: impl Into<String>,
        mediator: impl Into<String>,
        outcome: impl Into<String>,
    ) -> Self {
        ColumnBindings {
            treatment: treatment.into(),
            mediator: mediator.into(),
            outcome: outcome.into(),
            unit_id: None,
        }
    }
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| DataError::MissingColumn {
            column: name.to_string(),
        })
}

fn parse_value(field: &str, column: &str, row: usize) -> Result<f64, DataError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| DataError::BadNumericValue {
            row,
            column: column.to_string(),
            value: field.to_string(),
        })?;
    if !v.is_finite() {
        return Err(DataError::NonFiniteValue {
            row,
            column: column.to_string(),
        });
    }
    Ok(v)
}

/// Reads observations from a CSV stream with a header row.
///
/// Treatment must be literally `0` or `1`; mediator and outcome must
/// parse as finite numbers with `.` as the decimal point. Row order is
/// preserved. Rows with missing values are rejected, never imputed.
pub fn ingest_csv_reader<R: Read>(
    reader: R,
    bindings: &ColumnBindings,
) -> Result<ObservationTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let t_idx = find_column(&headers, &bindings.treatment)?;
    let m_idx = find_column(&headers, &bindings.mediator)?;
    let y_idx = find_column(&headers, &bindings.outcome)?;
    let id_idx = match &bindings.unit_id {
        Some(name) => Some(find_column(&headers, name)?),
        None => None,
    };

    let mut records = Vec::new();
    let mut raw = csv::StringRecord::new();
    let mut row = 0usize;
    while rdr.read_record(&mut raw)? {
        row += 1;
        let t_field = raw.get(t_idx).unwrap_or("");
        let treatment = match t_field.trim() {
            "0" => Arm::Control,
            "1" => Arm::Treatment,
            other => {
                return Err(DataError::BadTreatmentValue {
                    row,
                    value: other.to_string(),
                })
            }
        };
        let mediator = parse_value(raw.get(m_idx).unwrap_or(""), "mediator", row)?;
        let outcome = parse_value(raw.get(y_idx).unwrap_or(""), "outcome", row)?;
        let unit_id = id_idx.and_then(|i| raw.get(i)).map(str::to_string);
        records.push(ObservationRecord {
            unit_id,
            treatment,
            mediator,
            outcome,
        });
    }
    ObservationTable::new(records)
}

/// Reads observations from a CSV file; `.gz` paths are decompressed on
/// the fly.
pub fn ingest_csv_path(
    path: impl AsRef<Path>,
    bindings: &ColumnBindings,
) -> Result<ObservationTable, DataError> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let gz = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("gz"))
        .unwrap_or(false);
    if gz {
        ingest_csv_reader(flate2::read::GzDecoder::new(file), bindings)
    } else {
        ingest_csv_reader(file, bindings)
    }
}

/// Per-arm descriptive statistics.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub mean_outcome: f64,
    pub mean_mediator: f64,
    pub count: usize,
}

/// The pair of arm summaries for a table.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ArmSummaries {
    pub control: ArmSummary,
    pub treatment: ArmSummary,
}

#[derive(Clone, Copy, Default)]
struct SummaryAcc {
    m_control: Kahan,
    y_control: Kahan,
    m_treated: Kahan,
    y_treated: Kahan,
    n_treated: usize,
    n_total: usize,
}

/// Computes per-arm means and counts in one compensated pass.
pub fn summarize(table: &ObservationTable) -> ArmSummaries {
    let acc = chunk_reduce(
        table.records(),
        SummaryAcc::default,
        |acc, r| {
            acc.n_total += 1;
            match r.treatment {
                Arm::Control => {
                    acc.m_control.add(r.mediator);
                    acc.y_control.add(r.outcome);
                }
                Arm::Treatment => {
                    acc.n_treated += 1;
                    acc.m_treated.add(r.mediator);
                    acc.y_treated.add(r.outcome);
                }
            }
        },
        |acc, o| {
            acc.m_control.merge(o.m_control);
            acc.y_control.merge(o.y_control);
            acc.m_treated.merge(o.m_treated);
            acc.y_treated.merge(o.y_treated);
            acc.n_treated += o.n_treated;
            acc.n_total += o.n_total;
        },
    );
    let n_treated = acc.n_treated;
    let n_control = acc.n_total - acc.n_treated;
    ArmSummaries {
        control: ArmSummary {
            arm: Arm::Control,
            mean_outcome: acc.y_control.value() / n_control as f64,
            mean_mediator: acc.m_control.value() / n_control as f64,
            count: n_control,
        },
        treatment: ArmSummary {
            arm: Arm::Treatment,
            mean_outcome: acc.y_treated.value() / n_treated as f64,
            mean_mediator: acc.m_treated.value() / n_treated as f64,
            count: n_treated,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_csv(body: &str) -> Result<ObservationTable, DataError> {
        let bindings = ColumnBindings::new("t", "m", "y");
        ingest_csv_reader(body.as_bytes(), &bindings)
    }

    #[test]
    fn ingest_counts_arms() {
        let t = table_csv("t,m,y\n0,1,0\n0,3,1\n1,4,0\n1,6,1\n").unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.n_control(), 2);
        assert_eq!(t.n_treated(), 2);
        assert_eq!(t.records()[2].mediator, 4.0);
    }

    #[test]
    fn ingest_rejects_bad_treatment() {
        let err = table_csv("t,m,y\n0,1,0\n2,3,1\n1,4,0\n1,6,1\n").unwrap_err();
        assert_eq!(err.name(), "BadTreatmentValue");
        // "true", "1.0" and the like are not accepted either
        let err = table_csv("t,m,y\n0,1,0\ntrue,3,1\n1,4,0\n1,6,1\n").unwrap_err();
        assert_eq!(err.name(), "BadTreatmentValue");
    }

    #[test]
    fn ingest_rejects_missing_column() {
        let bindings = ColumnBindings::new("treat", "m", "y");
        let err = ingest_csv_reader("t,m,y\n0,1,0\n".as_bytes(), &bindings).unwrap_err();
        assert_eq!(err.name(), "MissingColumn");
        match err {
            DataError::MissingColumn { column } => assert_eq!(column, "treat"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ingest_rejects_non_finite_and_missing_values() {
        let err = table_csv("t,m,y\n0,NaN,0\n0,3,1\n1,4,0\n1,6,1\n").unwrap_err();
        assert_eq!(err.name(), "NonFiniteValue");
        let err = table_csv("t,m,y\n0,1,inf\n0,3,1\n1,4,0\n1,6,1\n").unwrap_err();
        assert_eq!(err.name(), "NonFiniteValue");
        let err = table_csv("t,m,y\n0,,0\n0,3,1\n1,4,0\n1,6,1\n").unwrap_err();
        assert_eq!(err.name(), "BadNumericValue");
    }

    #[test]
    fn ingest_rejects_degenerate_arm() {
        let err = table_csv("t,m,y\n0,1,0\n0,3,1\n0,4,0\n1,6,1\n").unwrap_err();
        assert_eq!(err.name(), "DegenerateArm");
        let err = table_csv("t,m,y\n0,1,0\n0,3,1\n0,4,0\n0,6,1\n").unwrap_err();
        match err {
            DataError::DegenerateArm {
                arm: Arm::Treatment,
                count: 0,
            } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ingest_gzip_roundtrip() {
        use flate2::write::GzEncoder;
        use std::io::Write;

        let body = "t,m,y\n0,1,0\n0,3,1\n1,4,0\n1,6,1\n";
        let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(body.as_bytes()).unwrap();
        let gz = enc.finish().unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv.gz");
        std::fs::write(&path, gz).unwrap();

        let t = ingest_csv_path(&path, &ColumnBindings::new("t", "m", "y")).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.records()[1].mediator, 3.0);
    }

    #[test]
    fn unit_id_is_carried() {
        let mut bindings = ColumnBindings::new("t", "m", "y");
        bindings.unit_id = Some("uid".into());
        let t = ingest_csv_reader(
            "uid,t,m,y\nu1,0,1,0\nu2,0,3,1\nu3,1,4,0\nu4,1,6,1\n".as_bytes(),
            &bindings,
        )
        .unwrap();
        assert_eq!(t.records()[0].unit_id.as_deref(), Some("u1"));
    }

    #[test]
    fn summarize_means() {
        let t = table_csv("t,m,y\n0,1,0\n0,3,1\n1,4,0\n1,6,1\n").unwrap();
        let s = summarize(&t);
        assert_eq!(s.control.count, 2);
        assert_eq!(s.treatment.count, 2);
        assert_eq!(s.control.mean_outcome, 0.5);
        assert_eq!(s.treatment.mean_outcome, 0.5);
        assert_eq!(s.control.mean_mediator, 2.0);
        assert_eq!(s.treatment.mean_mediator, 5.0);
    }

    #[test]
    fn summarize_is_order_independent() {
        let t = table_csv("t,m,y\n0,1,0\n0,3,1\n1,4,0\n1,6,1\n").unwrap();
        let mut rev = t.records().to_vec();
        rev.reverse();
        let t_rev = ObservationTable::new(rev).unwrap();
        let a = summarize(&t);
        let b = summarize(&t_rev);
        assert_eq!(a.control.mean_mediator, b.control.mean_mediator);
        assert_eq!(a.treatment.mean_outcome, b.treatment.mean_outcome);
        assert_eq!(a.control.count, b.control.count);
    }
}
