//! Matrix files: labeled dense CSV and long-format (row, column, value)
//! tables in the style of the Human Mortality Database.
//!
//! Labels that read as strictly increasing numbers become the grids of the
//! returned matrix; otherwise the grid is the label index. A trailing `+`
//! is ignored when reading a label as a number, so the open age group
//! `110+` sits at 110.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use robrsvd_core::{Matrix, ObservedMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::csv_number;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// Header row of column labels; first column holds row labels.
    DenseCsv,
    /// One `(row label, column label, value...)` record per line, comma or
    /// whitespace separated, optionally after a free-text preamble.
    HmdTriplet,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense_csv" | "csv" => Ok(Format::DenseCsv),
            "hmd_triplet" | "hmd" | "triplet" => Ok(Format::HmdTriplet),
            other => Err(Error::Config(format!("unknown format '{other}' (expected dense_csv or hmd_triplet)"))),
        }
    }
}

/// A matrix file and how to read it.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub path: PathBuf,
    pub format: Format,
    pub missing_token: String,
    pub row_label_name: String,
    pub col_label_name: String,
    /// Triplet files with several value columns: the header name of the one
    /// to read. `None` reads the last column.
    pub value_column: Option<String>,
}

impl MatrixFile {
    pub fn new(path: impl Into<PathBuf>, format: Format) -> Self {
        Self {
            path: path.into(),
            format,
            missing_token: ".".to_string(),
            row_label_name: "Year".to_string(),
            col_label_name: "Age".to_string(),
            value_column: None,
        }
    }
}

/// An observed matrix together with the labels it was read with.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub data: ObservedMatrix,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub row_label_name: String,
    pub col_label_name: String,
}

impl LabeledMatrix {
    /// Labels `0..m` and `0..n`, grids from `data`.
    pub fn unlabeled(data: ObservedMatrix) -> Self {
        let row_labels = (0..data.rows()).map(|i| i.to_string()).collect();
        let col_labels = (0..data.cols()).map(|j| j.to_string()).collect();
        Self {
            data,
            row_labels,
            col_labels,
            row_label_name: "row".to_string(),
            col_label_name: "col".to_string(),
        }
    }

    /// Same labels, new contents.
    pub fn with_data(&self, data: ObservedMatrix) -> Self {
        Self {
            data,
            ..self.clone()
        }
    }
}

/// Numeric reading of a label, ignoring a trailing `+`.
pub fn label_value(label: &str) -> Option<f64> {
    let t = label.trim();
    let t = t.strip_suffix('+').unwrap_or(t);
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Label values when all are numeric and strictly increasing, else indices.
pub fn label_grid(labels: &[String]) -> Vec<f64> {
    let vals: Option<Vec<f64>> = labels.iter().map(|l| label_value(l)).collect();
    match vals {
        Some(v) if v.windows(2).all(|w| w[1] > w[0]) => v,
        _ => (0..labels.len()).map(|i| i as f64).collect(),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load(file: &MatrixFile) -> Result<LabeledMatrix> {
    let text = read(&file.path)?;
    let name = file.path.display().to_string();
    match file.format {
        Format::DenseCsv => parse_dense_csv(&text, &name, &file.missing_token).map(|mut m| {
            m.col_label_name = file.col_label_name.clone();
            m
        }),
        Format::HmdTriplet => parse_triplet(&text, &name, file),
    }
}

pub fn save(m: &LabeledMatrix, file: &MatrixFile) -> Result<()> {
    let text = match file.format {
        Format::DenseCsv => to_dense_csv(m, &file.missing_token),
        Format::HmdTriplet => to_triplet(m, &file.missing_token),
    };
    std::fs::write(&file.path, text).map_err(|e| Error::io(&file.path, e))
}

fn check_unique_columns(labels: &[String], path: &str) -> Result<()> {
    let mut seen = BTreeMap::new();
    for (k, l) in labels.iter().enumerate() {
        if let Some(first) = seen.insert(l.as_str(), k) {
            return Err(Error::parse(
                path,
                1,
                format!("duplicate column label '{l}' (fields {} and {})", first + 2, k + 2),
            ));
        }
    }
    Ok(())
}

fn parse_value(tok: &str, missing: &str, path: &str, line: usize, col: &str) -> Result<Option<f64>> {
    if tok == missing {
        return Ok(None);
    }
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Err(Error::parse(path, line, format!("non-finite value '{tok}' in column '{col}'"))),
        Err(_) => Err(Error::parse(path, line, format!("cannot parse '{tok}' in column '{col}' as a number"))),
    }
}

fn assemble(
    cells: Vec<Option<f64>>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    row_label_name: String,
    col_label_name: String,
    path: &str,
) -> Result<LabeledMatrix> {
    let (m, n) = (row_labels.len(), col_labels.len());
    let mask: Vec<bool> = cells.iter().map(Option::is_some).collect();
    let values = Matrix::from_row_major(m, n, cells.iter().map(|c| c.unwrap_or(0.0)).collect())?;
    let data = ObservedMatrix::new(values, mask, label_grid(&row_labels), label_grid(&col_labels))
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok(LabeledMatrix {
        data,
        row_labels,
        col_labels,
        row_label_name,
        col_label_name,
    })
}

pub fn parse_dense_csv(text: &str, path: &str, missing: &str) -> Result<LabeledMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::parse(path, csv_line(&e), e.to_string()))?,
        None => return Err(Error::parse(path, 1, "empty file")),
    };
    if header.len() < 2 {
        return Err(Error::parse(path, 1, "header needs a corner cell and at least one column label"));
    }
    let row_label_name = header[0].to_string();
    let col_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    check_unique_columns(&col_labels, path)?;
    let n = col_labels.len();

    let mut row_labels = Vec::new();
    let mut cells = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for rec in records {
        let rec = rec.map_err(|e| Error::parse(path, csv_line(&e), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != n + 1 {
            return Err(Error::parse(
                path,
                line,
                format!("ragged row: expected {} fields, found {}", n + 1, rec.len()),
            ));
        }
        if let Some(first) = seen.insert(rec[0].to_string(), line) {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate row label '{}', first seen on line {first}", &rec[0]),
            ));
        }
        row_labels.push(rec[0].to_string());
        for (tok, col) in rec.iter().skip(1).zip(&col_labels) {
            cells.push(parse_value(tok, missing, path, line, col)?);
        }
    }
    assemble(cells, row_labels, col_labels, row_label_name, "col".to_string(), path)
}

fn csv_line(e: &csv::Error) -> usize {
    e.position().map_or(0, |p| p.line() as usize)
}

fn tokens(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn parse_triplet(text: &str, path: &str, file: &MatrixFile) -> Result<LabeledMatrix> {
    let mut header: Option<Vec<String>> = None;
    let mut value_col: Option<usize> = None;
    let mut started = false;
    // (row key, col key) -> (line, value)
    let mut cells: BTreeMap<(usize, usize), (usize, Option<f64>)> = BTreeMap::new();
    let mut rows: Vec<(f64, String)> = Vec::new();
    let mut cols: Vec<(f64, String)> = Vec::new();
    let key = |list: &mut Vec<(f64, String)>, v: f64, label: &str| -> usize {
        match list.iter().position(|(x, _)| *x == v) {
            Some(k) => k,
            None => {
                list.push((v, label.to_string()));
                list.len() - 1
            }
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = tokens(raw);
        if toks.is_empty() || toks.iter().all(|t| t.is_empty()) {
            continue;
        }
        let numeric = toks.len() >= 2 && label_value(toks[0]).is_some() && label_value(toks[1]).is_some();
        if !numeric {
            if started {
                return Err(Error::parse(path, line, format!("expected numeric labels, found '{}'", raw.trim())));
            }
            let names: Vec<String> = toks.iter().map(|t| t.to_string()).collect();
            let has = |n: &str| names.iter().any(|t| t.eq_ignore_ascii_case(n));
            if has(&file.row_label_name) && has(&file.col_label_name) {
                if let Some(want) = &file.value_column {
                    let k = names.iter().position(|t| t.eq_ignore_ascii_case(want)).ok_or_else(|| {
                        Error::parse(path, line, format!("value column '{want}' not in header {names:?}"))
                    })?;
                    value_col = Some(k);
                }
                header = Some(names);
            }
            continue;
        }
        if !started {
            started = true;
            if file.value_column.is_some() && value_col.is_none() {
                return Err(Error::parse(path, line, "value column requested but no header line found"));
            }
        }
        let width = header.as_ref().map_or(toks.len(), Vec::len);
        if toks.len() < 3 || toks.len() != width {
            return Err(Error::parse(
                path,
                line,
                format!("ragged record: expected {} fields, found {}", width.max(3), toks.len()),
            ));
        }
        let vc = value_col.unwrap_or(toks.len() - 1);
        let col_name = header.as_ref().map_or("value".to_string(), |h| h[vc].clone());
        let value = parse_value(toks[vc], &file.missing_token, path, line, &col_name)?;
        let r = key(&mut rows, label_value(toks[0]).unwrap(), toks[0]);
        let c = key(&mut cols, label_value(toks[1]).unwrap(), toks[1]);
        if let Some((first, _)) = cells.insert((r, c), (line, value)) {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate key ({}, {}), first seen on line {first}", toks[0], toks[1]),
            ));
        }
    }
    if rows.is_empty() {
        return Err(Error::parse(path, text.lines().count().max(1), "no data records"));
    }

    let order = |list: &[(f64, String)]| {
        let mut idx: Vec<usize> = (0..list.len()).collect();
        idx.sort_by(|&a, &b| list[a].0.total_cmp(&list[b].0));
        idx
    };
    let (ro, co) = (order(&rows), order(&cols));
    let mut rank_r = vec![0; rows.len()];
    let mut rank_c = vec![0; cols.len()];
    ro.iter().enumerate().for_each(|(k, &r)| rank_r[r] = k);
    co.iter().enumerate().for_each(|(k, &c)| rank_c[c] = k);
    let (m, n) = (rows.len(), cols.len());
    // absent combinations are missing cells
    let mut grid = vec![None; m * n];
    for ((r, c), (_, v)) in cells {
        grid[rank_r[r] * n + rank_c[c]] = v;
    }
    let (row_name, col_name) = match &header {
        Some(h) => (h[0].clone(), h[1].clone()),
        None => (file.row_label_name.clone(), file.col_label_name.clone()),
    };
    assemble(
        grid,
        ro.iter().map(|&r| rows[r].1.clone()).collect(),
        co.iter().map(|&c| cols[c].1.clone()).collect(),
        row_name,
        col_name,
        path,
    )
}

fn cell_text(m: &LabeledMatrix, i: usize, j: usize, missing: &str) -> String {
    if m.data.is_observed(i, j) {
        csv_number(m.data.values()[(i, j)])
    } else {
        missing.to_string()
    }
}

pub fn to_dense_csv(m: &LabeledMatrix, missing: &str) -> String {
    let mut out = String::new();
    out.push_str(&m.row_label_name);
    for l in &m.col_labels {
        let _ = write!(out, ",{l}");
    }
    out.push('\n');
    for (i, rl) in m.row_labels.iter().enumerate() {
        out.push_str(rl);
        for j in 0..m.data.cols() {
            let _ = write!(out, ",{}", cell_text(m, i, j, missing));
        }
        out.push('\n');
    }
    out
}

pub fn to_triplet(m: &LabeledMatrix, missing: &str) -> String {
    let mut out = format!("{},{},Value\n", m.row_label_name, m.col_label_name);
    for (i, rl) in m.row_labels.iter().enumerate() {
        for (j, cl) in m.col_labels.iter().enumerate() {
            let _ = writeln!(out, "{rl},{cl},{}", cell_text(m, i, j, missing));
        }
    }
    out
}

/// Serialized form of a labeled matrix. Missing cells are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub row_label_name: String,
    pub col_label_name: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub row_grid: Vec<f64>,
    pub col_grid: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl From<&LabeledMatrix> for MatrixJson {
    fn from(m: &LabeledMatrix) -> Self {
        let values = (0..m.data.rows())
            .map(|i| {
                (0..m.data.cols())
                    .map(|j| m.data.is_observed(i, j).then(|| m.data.values()[(i, j)]))
                    .collect()
            })
            .collect();
        Self {
            row_label_name: m.row_label_name.clone(),
            col_label_name: m.col_label_name.clone(),
            row_labels: m.row_labels.clone(),
            col_labels: m.col_labels.clone(),
            row_grid: m.data.row_grid().to_vec(),
            col_grid: m.data.col_grid().to_vec(),
            values,
        }
    }
}

impl TryFrom<MatrixJson> for LabeledMatrix {
    type Error = Error;

    fn try_from(j: MatrixJson) -> Result<Self> {
        let (m, n) = (j.values.len(), j.values.first().map_or(0, Vec::len));
        if j.values.iter().any(|r| r.len() != n) {
            return Err(Error::Config("ragged values in matrix JSON".to_string()));
        }
        let cells: Vec<Option<f64>> = j.values.into_iter().flatten().collect();
        let mask = cells.iter().map(Option::is_some).collect();
        let values = Matrix::from_row_major(m, n, cells.iter().map(|c| c.unwrap_or(0.0)).collect())?;
        Ok(Self {
            data: ObservedMatrix::new(values, mask, j.row_grid, j.col_grid)?,
            row_labels: j.row_labels,
            col_labels: j.col_labels,
            row_label_name: j.row_label_name,
            col_label_name: j.col_label_name,
        })
    }
}

pub fn to_json(m: &LabeledMatrix) -> Result<String> {
    Ok(serde_json::to_string_pretty(&MatrixJson::from(m))?)
}

pub fn from_json(text: &str) -> Result<LabeledMatrix> {
    serde_json::from_str::<MatrixJson>(text)?.try_into()
}
