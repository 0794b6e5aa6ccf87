use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::run::{DivcheckSummary, SeriesRow};
use crate::error::{Error, Result};
use crate::numeric::regression::least_squares;
use crate::trunc_gauss::CurvePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: u64,
    pub mean_risk: f64,
    pub stderr: f64,
    pub replications: usize,
}

/// Mean risk per sample size, sorted by `n`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn new(mut rows: Vec<RateRow>) -> Result<Self> {
        if rows.iter().any(|r| !(r.stderr >= 0.0) || !r.mean_risk.is_finite()) {
            return Err(Error::numeric("rate table entries must be finite with non-negative stderr"));
        }
        rows.sort_by_key(|r| r.n);
        Ok(Self { rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Coefficient on `log log n` when the log-corrected fit is requested.
    pub loglog_coefficient: Option<f64>,
}

/// Least squares of `log(mean_risk)` on `log n`, optionally with a `log log n` column.
pub fn fit_rate_exponent(table: &RateTable, with_loglog: bool) -> Result<RateFit> {
    if table.rows.len() < 3 {
        return Err(Error::input(format!("need at least 3 rows for a fit, got {}", table.rows.len())));
    }
    if let Some(r) = table.rows.iter().find(|r| !(r.mean_risk > 0.0)) {
        return Err(Error::input(format!("non-positive mean risk {} at n = {}", r.mean_risk, r.n)));
    }
    if with_loglog && table.rows.iter().any(|r| r.n < 3) {
        return Err(Error::input("log log n needs n >= 3"));
    }
    let log_n: Vec<f64> = table.rows.iter().map(|r| (r.n as f64).ln()).collect();
    let log_risk: Vec<f64> = table.rows.iter().map(|r| r.mean_risk.ln()).collect();
    if with_loglog {
        let loglog: Vec<f64> = log_n.iter().map(|l| l.ln()).collect();
        let f = least_squares(&[&log_n, &loglog], &log_risk)?;
        Ok(RateFit {
            slope: f.coefficients[1],
            intercept: f.coefficients[0],
            r_squared: f.r_squared.clamp(0.0, 1.0),
            loglog_coefficient: Some(f.coefficients[2]),
        })
    } else {
        let f = least_squares(&[&log_n], &log_risk)?;
        Ok(RateFit {
            slope: f.coefficients[1],
            intercept: f.coefficients[0],
            r_squared: f.r_squared.clamp(0.0, 1.0),
            loglog_coefficient: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Writes CSV rows (header from the field names) to any writer.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], header: &[&str], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header).map_err(|e| Error::numeric(format!("csv: {e}")))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::numeric(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::numeric(format!("csv: {e}")))?;
    Ok(())
}

pub const TABLE_HEADER: [&str; 4] = ["n", "mean_risk", "stderr", "replications"];
pub const FIT_HEADER: [&str; 4] = ["slope", "intercept", "r_squared", "loglog_coefficient"];

/// Something that [`emit`] can write.
pub trait Emit: Serialize {
    fn write_csv_to(&self, out: &mut dyn Write) -> Result<()>;
}

impl Emit for RateTable {
    fn write_csv_to(&self, out: &mut dyn Write) -> Result<()> {
        write_csv(&self.rows, &TABLE_HEADER, out)
    }
}

impl Emit for RateFit {
    fn write_csv_to(&self, out: &mut dyn Write) -> Result<()> {
        write_csv(std::slice::from_ref(self), &FIT_HEADER, out)
    }
}

impl Emit for Vec<CurvePoint> {
    fn write_csv_to(&self, out: &mut dyn Write) -> Result<()> {
        write_csv(self, &["t", "fitted_exponent", "theory_exponent"], out)
    }
}

impl Emit for DivcheckSummary {
    fn write_csv_to(&self, out: &mut dyn Write) -> Result<()> {
        let header = ["pairs", "chain_violations", "monotonicity_violations", "max_violation"];
        write_csv(std::slice::from_ref(self), &header, out)
    }
}

impl Emit for Vec<SeriesRow> {
    fn write_csv_to(&self, out: &mut dyn Write) -> Result<()> {
        write_csv(self, &["series", "n", "mean_risk", "stderr", "replications"], out)
    }
}

/// Serializes `item` to a writer in the requested format.
pub fn emit_to<T: Emit + ?Sized>(item: &T, format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Csv => item.write_csv_to(out),
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, item).map_err(|e| Error::numeric(format!("json: {e}")))?;
            writeln!(out).map_err(|e| Error::numeric(format!("json: {e}")))
        }
    }
}

/// Writes `item` to `path`; I/O failures carry the path.
pub fn emit<T: Emit + ?Sized>(item: &T, format: Format, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    emit_to(item, format, &mut w)?;
    w.flush().map_err(io_err(path))
}

fn read_csv_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    r.deserialize().map(|row| row.map_err(|e| Error::input(format!("{}: {e}", path.display())))).collect()
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

pub fn read_table(path: &Path, format: Format) -> Result<RateTable> {
    match format {
        Format::Csv => Ok(RateTable { rows: read_csv_rows(path)? }),
        Format::Json => read_json(path),
    }
}

pub fn read_fit(path: &Path, format: Format) -> Result<RateFit> {
    match format {
        Format::Csv => read_csv_rows(path)?
            .into_iter()
            .next()
            .ok_or_else(|| Error::input(format!("{}: no fit row", path.display()))),
        Format::Json => read_json(path),
    }
}
