//! Monitoring-data domain types, CSV ingestion and conversion of charging
//! sessions into regression training points.
//!
//! A monitoring CSV carries one row per battery reading:
//!
//! ```text
//! session_id,timestamp_s,distance_cm,consumer_mah,consumer_pct,provider_mah,provider_pct
//! ```
//!
//! Rows of one session must appear with strictly increasing timestamps, the
//! first at `t = 0` (the baseline), and consecutive readings exactly one
//! monitoring interval apart. Rows of different sessions may interleave.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact header of the monitoring CSV.
pub const MONITORING_HEADER: [&str; 7] = [
    "session_id",
    "timestamp_s",
    "distance_cm",
    "consumer_mah",
    "consumer_pct",
    "provider_mah",
    "provider_pct",
];

/// Exact header of the training-point CSV.
pub const POINTS_HEADER: [&str; 3] = ["distance_cm", "duration_min", "received_ah"];

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: unexpected header {found:?}")]
    BadHeader { line: u64, found: String },
    #[error("session {session_id:?}, line {line}: malformed row: {reason}")]
    MalformedRow {
        session_id: String,
        line: u64,
        reason: String,
    },
    #[error("session {session_id:?}, line {line}: timestamp {timestamp_s} s does not increase")]
    NonMonotoneTimestamp {
        session_id: String,
        line: u64,
        timestamp_s: u64,
    },
    #[error("session {session_id:?}, line {line}: gap of {gap_s} s differs from monitoring interval {expected_s} s")]
    IrregularInterval {
        session_id: String,
        line: u64,
        gap_s: u64,
        expected_s: u64,
    },
    #[error("session {session_id:?}, line {line}: first reading at {timestamp_s} s, expected a baseline at 0 s")]
    MissingBaseline {
        session_id: String,
        line: u64,
        timestamp_s: u64,
    },
    #[error("session {session_id:?}, line {line}: {reason}")]
    InvalidValue {
        session_id: String,
        line: u64,
        reason: String,
    },
    #[error("session {0:?} has no records")]
    EmptySession(String),
    #[error("value is not finite: {0}")]
    NonFinite(f64),
    #[error("dataset has no points")]
    EmptyDataset,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One timestamped reading of both batteries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringRecord {
    pub session_id: String,
    pub timestamp_s: u64,
    pub consumer_level_mah: f64,
    pub consumer_level_pct: f64,
    pub provider_level_mah: f64,
    pub provider_level_pct: f64,
}

impl MonitoringRecord {
    fn validate(&self, line: u64) -> Result<(), DatasetError> {
        let invalid = |reason: String| DatasetError::InvalidValue {
            session_id: self.session_id.clone(),
            line,
            reason,
        };
        for (name, v) in [
            ("consumer_mah", self.consumer_level_mah),
            ("provider_mah", self.provider_level_mah),
        ] {
            if v < 0.0 {
                return Err(invalid(format!("{name} is negative ({v})")));
            }
        }
        for (name, v) in [
            ("consumer_pct", self.consumer_level_pct),
            ("provider_pct", self.provider_level_pct),
        ] {
            if !(0.0..=100.0).contains(&v) {
                return Err(invalid(format!("{name} outside [0, 100] ({v})")));
            }
        }
        Ok(())
    }
}

/// An ordered series of readings taken at a fixed coil distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub coil_distance_cm: f64,
    pub mt_min: f64,
    pub records: Vec<MonitoringRecord>,
    pub baseline_consumer_mah: f64,
}

impl Session {
    /// Builds a session from readings already in timestamp order, checking
    /// the baseline, monotonicity and interval invariants. `lines` gives the
    /// source line of each record for diagnostics.
    fn from_records(
        session_id: String,
        coil_distance_cm: f64,
        records: Vec<MonitoringRecord>,
        lines: &[u64],
    ) -> Result<Self, DatasetError> {
        let first = records
            .first()
            .ok_or_else(|| DatasetError::EmptySession(session_id.clone()))?;
        if first.timestamp_s != 0 {
            return Err(DatasetError::MissingBaseline {
                session_id,
                line: lines[0],
                timestamp_s: first.timestamp_s,
            });
        }
        if !(coil_distance_cm > 0.0) {
            return Err(DatasetError::InvalidValue {
                session_id,
                line: lines[0],
                reason: format!("coil distance must be positive ({coil_distance_cm})"),
            });
        }
        let mut interval_s = None;
        for (i, pair) in records.windows(2).enumerate() {
            let line = lines[i + 1];
            if pair[1].timestamp_s <= pair[0].timestamp_s {
                return Err(DatasetError::NonMonotoneTimestamp {
                    session_id,
                    line,
                    timestamp_s: pair[1].timestamp_s,
                });
            }
            let gap = pair[1].timestamp_s - pair[0].timestamp_s;
            match interval_s {
                None => interval_s = Some(gap),
                Some(expected) if expected != gap => {
                    return Err(DatasetError::IrregularInterval {
                        session_id,
                        line,
                        gap_s: gap,
                        expected_s: expected,
                    })
                }
                Some(_) => {}
            }
        }
        // A lone baseline reading carries no interval; nominally one minute.
        let mt_min = interval_s.map_or(1.0, |s| s as f64 / 60.0);
        let baseline_consumer_mah = first.consumer_level_mah;
        Ok(Session {
            session_id,
            coil_distance_cm,
            mt_min,
            records,
            baseline_consumer_mah,
        })
    }

    /// Consumer increase over the whole session, mAh.
    pub fn total_increase_mah(&self) -> Result<f64, DatasetError> {
        let last = self
            .records
            .last()
            .ok_or_else(|| DatasetError::EmptySession(self.session_id.clone()))?;
        Ok(last.consumer_level_mah - self.baseline_consumer_mah)
    }
}

/// One regression example: features (distance, duration) and the received
/// energy label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingPoint {
    pub distance_cm: f64,
    pub duration_min: f64,
    pub received_ah: f64,
}

impl TrainingPoint {
    pub fn features(&self) -> [f64; 2] {
        [self.distance_cm, self.duration_min]
    }
}

/// Where a training point came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub session_id: String,
    /// Set when the consumer level fell below its baseline.
    pub negative_increase: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema_version: u32,
    pub points: Vec<TrainingPoint>,
    /// Parallel to `points`.
    pub provenance: Vec<Provenance>,
}

impl Dataset {
    pub fn new(points: Vec<TrainingPoint>, provenance: Vec<Provenance>) -> Self {
        assert_eq!(points.len(), provenance.len(), "provenance must cover every point");
        Dataset {
            schema_version: SCHEMA_VERSION,
            points,
            provenance,
        }
    }

    /// Training points of every session, in session order.
    pub fn from_sessions(sessions: &[Session]) -> Result<Self, DatasetError> {
        let mut points = Vec::new();
        let mut provenance = Vec::new();
        for s in sessions {
            for p in extract_training_points(s)? {
                provenance.push(Provenance {
                    session_id: s.session_id.clone(),
                    negative_increase: p.received_ah < 0.0,
                });
                points.push(p);
            }
        }
        Ok(Dataset::new(points, provenance))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sub-dataset made of the given point indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset::new(
            indices.iter().map(|&i| self.points[i]).collect(),
            indices.iter().map(|&i| self.provenance[i].clone()).collect(),
        )
    }

    pub fn flagged_count(&self) -> usize {
        self.provenance.iter().filter(|p| p.negative_increase).count()
    }
}

/// Arithmetic mean by running update; a constant sequence yields its value
/// exactly. `NaN` for an empty slice.
pub fn running_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut mean = f64::NAN;
    for (i, v) in values.into_iter().enumerate() {
        mean = if i == 0 { v } else { mean + (v - mean) / (i + 1) as f64 };
    }
    mean
}

/// Converts a mAh reading to Ah.
pub fn mah_to_ah(value_mah: f64) -> Result<f64, DatasetError> {
    if !value_mah.is_finite() {
        return Err(DatasetError::NonFinite(value_mah));
    }
    Ok(value_mah / 1000.0)
}

/// One point per non-baseline record, labelled with the consumer increase
/// since `t = 0` in Ah.
pub fn extract_training_points(session: &Session) -> Result<Vec<TrainingPoint>, DatasetError> {
    if session.records.is_empty() {
        return Err(DatasetError::EmptySession(session.session_id.clone()));
    }
    session
        .records
        .iter()
        .filter(|r| r.timestamp_s > 0)
        .map(|r| {
            Ok(TrainingPoint {
                distance_cm: session.coil_distance_cm,
                duration_min: r.timestamp_s as f64 / 60.0,
                received_ah: mah_to_ah(r.consumer_level_mah - session.baseline_consumer_mah)?,
            })
        })
        .collect()
}

fn check_header(
    rdr: &mut csv::Reader<impl Read>,
    expected: &[&str],
) -> Result<(), DatasetError> {
    let headers = rdr.headers()?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(DatasetError::BadHeader {
            line: 1,
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(
    row: &csv::StringRecord,
    idx: usize,
    session_id: &str,
    line: u64,
) -> Result<T, DatasetError> {
    let raw = &row[idx];
    raw.parse::<T>().map_err(|_| DatasetError::MalformedRow {
        session_id: session_id.to_string(),
        line,
        reason: format!("cannot parse {} from {raw:?}", MONITORING_HEADER[idx]),
    })
}

fn parse_finite(
    row: &csv::StringRecord,
    idx: usize,
    session_id: &str,
    line: u64,
) -> Result<f64, DatasetError> {
    let v: f64 = parse_field(row, idx, session_id, line)?;
    if !v.is_finite() {
        return Err(DatasetError::MalformedRow {
            session_id: session_id.to_string(),
            line,
            reason: format!("{} is not finite", MONITORING_HEADER[idx]),
        });
    }
    Ok(v)
}

struct PendingSession {
    distance_cm: f64,
    records: Vec<MonitoringRecord>,
    lines: Vec<u64>,
}

/// Parses a monitoring CSV into sessions, ordered by first appearance.
pub fn parse_monitoring_csv(input: impl Read) -> Result<Vec<Session>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    check_header(&mut rdr, &MONITORING_HEADER)?;

    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, PendingSession> = HashMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let session_id = row.get(0).unwrap_or_default().to_string();
        if row.len() != MONITORING_HEADER.len() {
            return Err(DatasetError::MalformedRow {
                session_id,
                line,
                reason: format!(
                    "expected {} fields, found {}",
                    MONITORING_HEADER.len(),
                    row.len()
                ),
            });
        }
        let timestamp_s: u64 = parse_field(&row, 1, &session_id, line)?;
        let distance_cm = parse_finite(&row, 2, &session_id, line)?;
        let record = MonitoringRecord {
            session_id: session_id.clone(),
            timestamp_s,
            consumer_level_mah: parse_finite(&row, 3, &session_id, line)?,
            consumer_level_pct: parse_finite(&row, 4, &session_id, line)?,
            provider_level_mah: parse_finite(&row, 5, &session_id, line)?,
            provider_level_pct: parse_finite(&row, 6, &session_id, line)?,
        };
        record.validate(line)?;

        let entry = pending.entry(session_id.clone()).or_insert_with(|| {
            order.push(session_id.clone());
            PendingSession {
                distance_cm,
                records: Vec::new(),
                lines: Vec::new(),
            }
        });
        if entry.distance_cm.to_bits() != distance_cm.to_bits() {
            return Err(DatasetError::InvalidValue {
                session_id,
                line,
                reason: format!(
                    "distance {distance_cm} differs from session distance {}",
                    entry.distance_cm
                ),
            });
        }
        entry.records.push(record);
        entry.lines.push(line);
    }

    order
        .into_iter()
        .map(|id| {
            let p = pending.remove(&id).expect("every ordered id is pending");
            Session::from_records(id, p.distance_cm, p.records, &p.lines)
        })
        .collect()
}

/// Writes sessions in the monitoring CSV format. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_monitoring_csv(sessions: &[Session], out: impl Write) -> Result<(), DatasetError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(MONITORING_HEADER)?;
    for s in sessions {
        for r in &s.records {
            w.write_record([
                r.session_id.clone(),
                r.timestamp_s.to_string(),
                s.coil_distance_cm.to_string(),
                r.consumer_level_mah.to_string(),
                r.consumer_level_pct.to_string(),
                r.provider_level_mah.to_string(),
                r.provider_level_pct.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes training points as `distance_cm,duration_min,received_ah`, floats
/// formatted by `fmt`.
pub fn write_points_csv(
    points: &[TrainingPoint],
    out: impl Write,
    fmt: impl Fn(f64) -> String,
) -> Result<(), DatasetError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(POINTS_HEADER)?;
    for p in points {
        w.write_record([fmt(p.distance_cm), fmt(p.duration_min), fmt(p.received_ah)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a training-point CSV. Provenance records the source line since the
/// format carries no session ids.
pub fn parse_points_csv(input: impl Read) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    check_header(&mut rdr, &POINTS_HEADER)?;
    let mut points = Vec::new();
    let mut provenance = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let source = format!("line:{line}");
        let malformed = |reason: String| DatasetError::MalformedRow {
            session_id: source.clone(),
            line,
            reason,
        };
        if row.len() != POINTS_HEADER.len() {
            return Err(malformed(format!("expected 3 fields, found {}", row.len())));
        }
        let mut vals = [0.0; 3];
        for (i, v) in vals.iter_mut().enumerate() {
            *v = row[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(format!("bad {} {:?}", POINTS_HEADER[i], &row[i])))?;
        }
        points.push(TrainingPoint {
            distance_cm: vals[0],
            duration_min: vals[1],
            received_ah: vals[2],
        });
        provenance.push(Provenance {
            session_id: source,
            negative_increase: vals[2] < 0.0,
        });
    }
    Ok(Dataset::new(points, provenance))
}
