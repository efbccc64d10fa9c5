//! Curve ingestion and CSV serialization of pipeline artifacts.
//!
//! The only ingestion format is a long CSV with header `curve_id,x,y`.
//! Curves keep the order in which their id first appears; rows of one curve
//! are sorted by `x` on load.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Minimum number of observations per curve.
pub const MIN_POINTS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub id: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Curve {
    /// Builds a curve, checking length, finiteness and strict monotonicity of `x`.
    pub fn new(id: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "curve `{id}`: x has {} values, y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < MIN_POINTS {
            return Err(Error::TooShort {
                curve: id,
                len: x.len(),
                min: MIN_POINTS,
            });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("curve `{id}` has non-finite values")));
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "curve `{id}`: x must be strictly increasing"
            )));
        }
        Ok(Self { id, x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_first(&self) -> f64 {
        self.x[0]
    }

    pub fn x_last(&self) -> f64 {
        self.x[self.x.len() - 1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub curves: Vec<Curve>,
    pub common_grid: bool,
}

impl Dataset {
    pub fn new(curves: Vec<Curve>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(curves.len());
        for (i, c) in curves.iter().enumerate() {
            if seen.insert(c.id.as_str(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate curve id `{}`", c.id)));
            }
        }
        let common_grid = match curves.first() {
            Some(first) => curves.iter().all(|c| c.x == first.x),
            None => true,
        };
        Ok(Self {
            curves,
            common_grid,
        })
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.curves.iter().map(|c| c.id.clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InputFormat {
    #[default]
    LongCsv,
}

pub fn load_dataset(path: impl AsRef<Path>, format: InputFormat) -> Result<Dataset> {
    let path = path.as_ref();
    match format {
        InputFormat::LongCsv => {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            read_long_csv(file)
        }
    }
}

/// Parses long-format CSV (`curve_id,x,y`) from any reader.
pub fn read_long_csv<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != ["curve_id", "x", "y"] {
        return Err(Error::Parse {
            row: 1,
            message: format!("expected header `curve_id,x,y`, found `{}`", names.join(",")),
        });
    }

    // (x, y, row) per curve, in order of first appearance.
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(f64, f64, u64)>> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line());
            csv_error(e, row)
        })?;
        let row = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(Error::Parse {
                row,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                row,
                message: "empty curve_id".into(),
            });
        }
        let x = parse_finite(&record[1], "x", row)?;
        let y = parse_finite(&record[2], "y", row)?;
        match rows.get_mut(&id) {
            Some(v) => v.push((x, y, row)),
            None => {
                order.push(id.clone());
                rows.insert(id, vec![(x, y, row)]);
            }
        }
    }

    let mut curves = Vec::with_capacity(order.len());
    for id in order {
        let mut pts = rows.remove(&id).expect("id recorded on first sight");
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        if let Some(w) = pts.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicatePoint {
                curve: id,
                x: w[1].0,
                row: w[0].2.max(w[1].2),
            });
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().map(|(x, y, _)| (x, y)).unzip();
        curves.push(Curve::new(id, x, y)?);
    }
    Dataset::new(curves)
}

fn parse_finite(field: &str, name: &str, row: u64) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        row,
        message: format!("cannot parse {name}=`{field}` as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            message: format!("non-finite {name}=`{field}`"),
        });
    }
    Ok(v)
}

fn csv_error(e: csv::Error, row: u64) -> Error {
    Error::Parse {
        row,
        message: e.to_string(),
    }
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut table = Table::new(["curve_id", "x", "y"]);
    for c in &dataset.curves {
        for (x, y) in c.x.iter().zip(&c.y) {
            table.push(vec![Cell::from(c.id.as_str()), Cell::Real(*x), Cell::Real(*y)])?;
        }
    }
    write_table(&table, path)
}

/// One CSV field.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Str(String),
    Real(f64),
    Int(i64),
    Empty,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Str(s) => f.write_str(s),
            // Shortest representation that parses back to the same f64.
            Cell::Real(v) => write!(f, "{v}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Empty => Ok(()),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

/// Rectangular table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<I, S>(header: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::InvalidInput(format!(
                "row {} has {} cells, header has {}",
                self.rows.len() + 1,
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    fn check_rectangular(&self) -> Result<()> {
        match self.rows.iter().position(|r| r.len() != self.header.len()) {
            Some(i) => Err(Error::InvalidInput(format!(
                "row {} has {} cells, header has {}",
                i + 1,
                self.rows[i].len(),
                self.header.len()
            ))),
            None => Ok(()),
        }
    }
}

pub fn write_table(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_table_to(table, file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn write_table_to<W: std::io::Write>(table: &Table, writer: W) -> Result<()> {
    table.check_rectangular()?;
    let mut wtr = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<writer>", io),
        other => Error::InvalidInput(format!("{other:?}")),
    };
    wtr.write_record(&table.header).map_err(io_err)?;
    for row in &table.rows {
        wtr.write_record(row.iter().map(|c| c.to_string()))
            .map_err(io_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Raw string view of a CSV file: header plus records, with file line numbers.
#[derive(Clone, Debug)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<(u64, Vec<String>)>,
}

impl RawTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column(name).ok_or_else(|| Error::Parse {
            row: 1,
            message: format!("missing column `{name}`"),
        })
    }
}

pub fn read_raw_table(path: impl AsRef<Path>) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = rdr
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line());
            csv_error(e, row)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(RawTable { header, rows })
}

/// Parses a real number from a raw field, reporting the file row on failure.
pub fn parse_real(field: &str, row: u64) -> Result<f64> {
    parse_finite(field, "value", row)
}
