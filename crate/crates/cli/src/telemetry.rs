//! CSV telemetry.
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same bits, so a log read back in reproduces the run exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use debak_core::sim::LogRecord;
use debak_core::{CompensatorState, EstimateState, PlantState, Vec2};
use thiserror::Error;

pub const HEADER: [&str; 22] = [
    "t",
    "r1",
    "r2",
    "theta",
    "v1",
    "v2",
    "omega",
    "F",
    "Fdot",
    "u1",
    "u2",
    "f1",
    "f2",
    "e1",
    "e2",
    "e3",
    "e4",
    "theta1_hat",
    "vartheta1_hat",
    "varphi1_hat",
    "theta2_hat",
    "V4",
];

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("no records to write")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: header does not match the telemetry schema (column {column}: expected `{expected}`, got `{found}`)")]
    Schema {
        path: PathBuf,
        column: usize,
        expected: &'static str,
        found: String,
    },
    #[error("{path}: row {row}, column `{column}`: cannot parse `{value}`")]
    Value {
        path: PathBuf,
        row: usize,
        column: &'static str,
        value: String,
    },
}

fn row(r: &LogRecord) -> [f64; 22] {
    let p = &r.plant;
    let [e1, e2, e3, e4] = r.error_norms;
    [
        r.t,
        p.r1,
        p.r2,
        p.theta,
        p.v1,
        p.v2,
        p.omega,
        r.comp.thrust,
        r.comp.thrust_rate,
        r.u[0],
        r.u[1],
        r.rotor.0,
        r.rotor.1,
        e1,
        e2,
        e3,
        e4,
        r.est.theta1,
        r.est.vartheta1,
        r.est.varphi1,
        r.est.theta2,
        r.v4,
    ]
}

fn from_row(v: &[f64; 22]) -> LogRecord {
    LogRecord {
        t: v[0],
        plant: PlantState {
            r1: v[1],
            r2: v[2],
            theta: v[3],
            v1: v[4],
            v2: v[5],
            omega: v[6],
        },
        comp: CompensatorState {
            thrust: v[7],
            thrust_rate: v[8],
        },
        u: Vec2::new(v[9], v[10]),
        rotor: (v[11], v[12]),
        error_norms: [v[13], v[14], v[15], v[16]],
        est: EstimateState {
            theta1: v[17],
            vartheta1: v[18],
            varphi1: v[19],
            theta2: v[20],
        },
        v4: v[21],
    }
}

/// Writes the header and one line per record.
pub fn write_records<W: Write>(records: &[LogRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    let mut buf = ryu::Buffer::new();
    for r in records {
        w.write_record(row(r).iter().map(|x| buf.format(*x).to_owned()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(records: &[LogRecord], path: &Path) -> Result<(), TelemetryError> {
    if records.is_empty() {
        return Err(TelemetryError::Empty);
    }
    let io = |source| TelemetryError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let file = File::create(path).map_err(io)?;
    write_records(records, BufWriter::new(file)).map_err(|source| TelemetryError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a log written by [`write_records`]. `path` only labels errors.
pub fn read_records<R: Read>(input: R, path: &Path) -> Result<Vec<LogRecord>, TelemetryError> {
    let csv_err = |source| TelemetryError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    for (column, expected) in HEADER.iter().enumerate() {
        let found = header.get(column).unwrap_or("");
        if found != *expected {
            return Err(TelemetryError::Schema {
                path: path.to_path_buf(),
                column: column + 1,
                expected,
                found: found.to_string(),
            });
        }
    }
    if header.len() != HEADER.len() {
        return Err(TelemetryError::Schema {
            path: path.to_path_buf(),
            column: HEADER.len() + 1,
            expected: "end of header",
            found: header.get(HEADER.len()).unwrap_or("").to_string(),
        });
    }
    let mut records = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let mut values = [0.0; 22];
        for (i, slot) in values.iter_mut().enumerate() {
            let text = rec.get(i).unwrap_or("");
            *slot = text.parse().map_err(|_| TelemetryError::Value {
                path: path.to_path_buf(),
                row: idx + 1,
                column: HEADER[i],
                value: text.to_string(),
            })?;
        }
        records.push(from_row(&values));
    }
    Ok(records)
}

pub fn read_csv(path: &Path) -> Result<Vec<LogRecord>, TelemetryError> {
    let file = File::open(path).map_err(|source| TelemetryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_records(std::io::BufReader::new(file), path)
}
