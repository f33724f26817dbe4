//! CSV and JSON dataset files.
//!
//! CSV: header `id,label,pci,eh,dm,aci,sm,v0,...,v{L-1}`, label one of
//! `AMI|CAD|AF|CON|NA`, flags `0|1`.
//! JSON: array of `{"id", "label", "history": [5 ints], "values": [L floats]}`.
//! Row numbers in errors are 1-based and do not count the CSV header.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    Dataset, DatasetMeta, HistoryVector, RamanSpectrum, SubtypeLabel, DEFAULT_SEQUENCE_LEN,
    NUM_FLAGS,
};
use crate::error::{M3sError, Result};

const FIXED_COLUMNS: [&str; 7] = ["id", "label", "pci", "eh", "dm", "aci", "sm"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Json,
}

impl DataFormat {
    /// Guess the format from a file extension (`.json` or anything else = CSV).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => DataFormat::Json,
            _ => DataFormat::Csv,
        }
    }
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "json" => Ok(DataFormat::Json),
            other => Err(format!("unknown data format `{other}`")),
        }
    }
}

/// Loads a dataset of [`DEFAULT_SEQUENCE_LEN`]-point spectra.
pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    load_dataset_with_len(path, format, DEFAULT_SEQUENCE_LEN)
}

/// Loads a dataset whose spectra must have exactly `len` points.
pub fn load_dataset_with_len(path: &Path, format: DataFormat, len: usize) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| M3sError::io(path, e))?;
    let reader = BufReader::new(file);
    let samples = match format {
        DataFormat::Csv => read_csv(reader, len)?,
        DataFormat::Json => read_json(reader, len)?,
    };
    Dataset::new(
        samples,
        DatasetMeta {
            source: path.display().to_string(),
            split_seed: None,
        },
    )
}

fn parse_label(raw: &str, row: usize) -> Result<Option<SubtypeLabel>> {
    let raw = raw.trim();
    if raw.is_empty() || raw.eq_ignore_ascii_case("NA") {
        return Ok(None);
    }
    raw.parse::<SubtypeLabel>()
        .map(Some)
        .map_err(|message| M3sError::Parse { row, message })
}

fn parse_flag(raw: &str, row: usize, column: &str) -> Result<bool> {
    match raw.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(M3sError::Parse {
            row,
            message: format!("column `{column}`: expected 0 or 1, found `{other}`"),
        }),
    }
}

fn read_csv<R: std::io::Read>(reader: R, len: usize) -> Result<Vec<RamanSpectrum>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| M3sError::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let expected = FIXED_COLUMNS.len() + len;
    if header.len() != expected {
        return Err(M3sError::Schema {
            row: 0,
            message: format!("header has {} columns, expected {expected}", header.len()),
        });
    }
    for (i, name) in FIXED_COLUMNS.iter().enumerate() {
        if !header[i].trim().eq_ignore_ascii_case(name) {
            return Err(M3sError::Schema {
                row: 0,
                message: format!("column {i} should be `{name}`, found `{}`", &header[i]),
            });
        }
    }

    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| M3sError::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != expected {
            return Err(M3sError::Schema {
                row,
                message: format!(
                    "{} columns ({} intensities), expected {expected} ({len} intensities)",
                    record.len(),
                    record.len().saturating_sub(FIXED_COLUMNS.len())
                ),
            });
        }
        let label = parse_label(&record[1], row)?;
        let mut flags = [false; NUM_FLAGS];
        for (k, flag) in flags.iter_mut().enumerate() {
            *flag = parse_flag(&record[2 + k], row, FIXED_COLUMNS[2 + k])?;
        }
        let values = record
            .iter()
            .skip(FIXED_COLUMNS.len())
            .enumerate()
            .map(|(k, raw)| {
                raw.trim().parse::<f64>().map_err(|e| M3sError::Parse {
                    row,
                    message: format!("v{k}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let spectrum = RamanSpectrum::new(&record[0], values, label, HistoryVector(flags))
            .map_err(|e| M3sError::Parse {
                row,
                message: e.to_string(),
            })?;
        samples.push(spectrum);
    }
    Ok(samples)
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    id: String,
    label: Option<String>,
    history: Vec<i64>,
    values: Vec<f64>,
}

fn read_json<R: std::io::Read>(reader: R, len: usize) -> Result<Vec<RamanSpectrum>> {
    let records: Vec<serde_json::Value> =
        serde_json::from_reader(reader).map_err(|e| M3sError::Parse {
            row: 0,
            message: e.to_string(),
        })?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, value)| {
            let row = i + 1;
            let rec: JsonRecord = serde_json::from_value(value).map_err(|e| M3sError::Parse {
                row,
                message: e.to_string(),
            })?;
            let label = match rec.label.as_deref() {
                None => None,
                Some(raw) => parse_label(raw, row)?,
            };
            if rec.history.len() != NUM_FLAGS {
                return Err(M3sError::Schema {
                    row,
                    message: format!(
                        "history has {} flags, expected {NUM_FLAGS}",
                        rec.history.len()
                    ),
                });
            }
            let mut flags = [false; NUM_FLAGS];
            for (k, &v) in rec.history.iter().enumerate() {
                flags[k] = match v {
                    0 => false,
                    1 => true,
                    other => {
                        return Err(M3sError::Parse {
                            row,
                            message: format!("history[{k}] must be 0 or 1, found {other}"),
                        })
                    }
                };
            }
            if rec.values.len() != len {
                return Err(M3sError::Schema {
                    row,
                    message: format!("{} values, expected {len}", rec.values.len()),
                });
            }
            RamanSpectrum::new(rec.id, rec.values, label, HistoryVector(flags)).map_err(|e| {
                M3sError::Parse {
                    row,
                    message: e.to_string(),
                }
            })
        })
        .collect()
}

/// Writes a dataset in the given format. Floats use the shortest
/// representation that parses back to the same value, so CSV and JSON both
/// round-trip losslessly.
pub fn write_dataset(dataset: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| M3sError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| M3sError::io(path, e);
    match format {
        DataFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(&mut out);
            let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
            header.extend((0..dataset.sequence_len()).map(|k| format!("v{k}")));
            let csv_err = |e: csv::Error| M3sError::io(path, e.into());
            wtr.write_record(&header).map_err(csv_err)?;
            for s in dataset.samples() {
                let mut rec: Vec<String> = Vec::with_capacity(header.len());
                rec.push(s.id.clone());
                rec.push(s.label.map_or("NA", |l| l.as_str()).to_string());
                rec.extend(s.history.iter().map(|b| u8::from(b).to_string()));
                rec.extend(s.values.iter().map(|v| v.to_string()));
                wtr.write_record(&rec).map_err(csv_err)?;
            }
            wtr.flush().map_err(io_err)?;
        }
        DataFormat::Json => {
            let records: Vec<JsonRecord> = dataset
                .samples()
                .iter()
                .map(|s| JsonRecord {
                    id: s.id.clone(),
                    label: Some(s.label.map_or("NA", |l| l.as_str()).to_string()),
                    history: s.history.iter().map(i64::from).collect(),
                    values: s.values.clone(),
                })
                .collect();
            serde_json::to_writer(&mut out, &records).map_err(|e| io_err(e.into()))?;
        }
    }
    out.flush().map_err(io_err)
}
