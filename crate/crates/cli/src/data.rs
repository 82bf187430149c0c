//! CSV inputs and the interval table written by the one-shot commands.

use isoci::ci::ConfidenceInterval;
use isoci::models::{CurrentStatusData, PanelCountData};
use isoci::{DesignGrid, DesignMode, Error, Result, Sample};
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Output file, or standard output when no path is given.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn parse_cell(text: &str, line: u64, column: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("line {line}, column {column}: '{text}' is not a number")))
}

/// A header row followed by numeric rows.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut rd = csv::Reader::from_reader(open(path)?);
    let header: Vec<String> = rd.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec.iter().zip(&header).map(|(v, h)| parse_cell(v, line, h)).collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: no data rows", path.display())));
    }
    Ok(Table { header, rows })
}

impl Table {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("missing column '{name}' (have {})", self.header.join(", "))))
    }

    /// Covariate rows (every column except `response`) and responses.
    pub fn split(&self, response: &str) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let r = self.column(response)?;
        if self.header.len() < 2 {
            return Err(Error::Config("need at least one covariate column".into()));
        }
        let x = self
            .rows
            .iter()
            .map(|row| row.iter().enumerate().filter(|&(k, _)| k != r).map(|(_, &v)| v).collect())
            .collect();
        let y = self.rows.iter().map(|row| row[r]).collect();
        Ok((x, y))
    }
}

/// Regression sample in design storage order.
pub fn read_sample(path: &Path, response: &str, mode: DesignMode) -> Result<Sample> {
    let (x, y) = read_table(path)?.split(response)?;
    let (grid, order) = DesignGrid::from_points(&x, mode)?;
    let y = order.iter().map(|&i| y[i]).collect();
    Sample::new(grid, y)
}

/// One-dimensional covariates sorted ascending with their responses.
pub fn read_sorted_pairs(path: &Path, response: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, y) = read_table(path)?.split(response)?;
    if x[0].len() != 1 {
        return Err(Error::Config(format!("expected one covariate column, got {}", x[0].len())));
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().map(|r| r[0]).zip(y).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

pub fn read_column(path: &Path, name: Option<&str>) -> Result<Vec<f64>> {
    let t = read_table(path)?;
    let k = match name {
        Some(n) => t.column(n)?,
        None => 0,
    };
    Ok(t.rows.iter().map(|r| r[k]).collect())
}

pub fn read_current_status(path: &Path) -> Result<CurrentStatusData> {
    let t = read_table(path)?;
    let (ti, di) = (t.column("time")?, t.column("indicator")?);
    let mut times = Vec::with_capacity(t.rows.len());
    let mut ind = Vec::with_capacity(t.rows.len());
    for (line, r) in t.rows.iter().enumerate() {
        if r[di] != 0.0 && r[di] != 1.0 {
            return Err(Error::Config(format!("data row {}: indicator must be 0 or 1", line + 1)));
        }
        times.push(r[ti]);
        ind.push(r[di] == 1.0);
    }
    CurrentStatusData::new(times, ind)
}

pub fn read_panel(path: &Path) -> Result<PanelCountData> {
    PanelCountData::from_long_csv(open(path)?)
}

/// One row of the interval table.
pub struct IntervalRow<'a> {
    pub point: &'a [f64],
    pub ci: &'a ConfidenceInterval,
    pub critical_value: f64,
    pub sigma_hat: Option<f64>,
    pub block_count: Option<f64>,
}

pub fn write_intervals<W: Write>(w: W, dim: usize, rows: &[IntervalRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = if dim == 1 { vec!["x".into()] } else { (1..=dim).map(|k| format!("x{k}")).collect() };
    header.extend(
        ["estimate", "lower", "upper", "half_width", "critical_value", "sigma_hat", "block_count", "method", "warning"]
            .map(String::from),
    );
    wtr.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let mut rec: Vec<String> = r.point.iter().map(f64::to_string).collect();
        rec.extend([
            r.ci.center.to_string(),
            r.ci.lower.to_string(),
            r.ci.upper.to_string(),
            r.ci.half_width.to_string(),
            r.critical_value.to_string(),
            opt(r.sigma_hat),
            opt(r.block_count),
            r.ci.method.as_str().to_string(),
            r.ci.warning.clone().unwrap_or_default(),
        ]);
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
