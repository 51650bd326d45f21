//! CSV and JSON-lines tables of sweep records.

use std::io::Read;

use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};
use crate::experiments::SweepRecord;
use crate::types::{Fraction, Metric};

pub const COLUMNS: [&str; 22] = [
    "n_total",
    "prevalence",
    "model_se",
    "model_sp",
    "ref_se",
    "ref_sp",
    "point_sens",
    "point_spec",
    "best_sens",
    "worst_sens",
    "range_sens",
    "best_spec",
    "worst_spec",
    "range_spec",
    "mc_min_sens",
    "mc_max_sens",
    "mc_mean_sens",
    "mc_min_spec",
    "mc_max_spec",
    "mc_mean_spec",
    "mc_trials",
    "seed",
];

pub const NA: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    JsonLines,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::JsonLines => "jsonl",
        }
    }
}

/// One table row: every column as a number, with `None` for `NA`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub n_total: u64,
    pub values: [Option<f64>; 19],
    pub mc_trials: Option<u64>,
    pub seed: Option<u64>,
}

impl TableRow {
    /// Value of a rate/metric column by name.
    pub fn get(&self, column: &str) -> Option<f64> {
        let idx = COLUMNS[1..21].iter().position(|c| *c == column)?;
        self.values[idx]
    }

    pub fn from_record(r: &SweepRecord) -> Self {
        let f = |x: Fraction| Some(x.value());
        let bound = |m: Metric| {
            r.bounds(m).map_or([None; 3], |b| {
                [Some(b.best().value()), Some(b.worst().value()), Some(b.range().value())]
            })
        };
        let mc = |m: Metric| {
            r.mc.as_ref()
                .and_then(|s| s.get(m))
                .map_or([None; 3], |s| [Some(s.min), Some(s.max), Some(s.mean)])
        };
        let [bs, ws, rs] = bound(Metric::Sensitivity);
        let [bp, wp, rp] = bound(Metric::Specificity);
        let [mins, maxs, means] = mc(Metric::Sensitivity);
        let [minp, maxp, meanp] = mc(Metric::Specificity);
        TableRow {
            n_total: r.n_total,
            values: [
                f(r.prevalence),
                f(r.model.sensitivity),
                f(r.model.specificity),
                f(r.reference.sensitivity),
                f(r.reference.specificity),
                r.point.sensitivity.map(|x| x.value()),
                r.point.specificity.map(|x| x.value()),
                bs,
                ws,
                rs,
                bp,
                wp,
                rp,
                mins,
                maxs,
                means,
                minp,
                maxp,
                meanp,
            ],
            mc_trials: r.mc.as_ref().map(|s| s.n_trials),
            seed: r.mc.as_ref().map(|s| s.seed),
        }
    }

    fn cells(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(COLUMNS.len());
        out.push(self.n_total.to_string());
        out.extend(self.values.iter().map(|v| fmt_num(*v)));
        out.push(self.mc_trials.map_or_else(|| NA.to_string(), |t| t.to_string()));
        out.push(self.seed.map_or_else(|| NA.to_string(), |s| s.to_string()));
        out
    }
}

/// Six decimal digits, or `NA`.
pub fn fmt_num(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => NA.to_string(),
    }
}

/// Serializes `records` as CSV (with header) or JSON lines.
pub fn emit_table(records: &[SweepRecord], format: TableFormat) -> Result<Vec<u8>> {
    if records.is_empty() {
        return Err(Error::Empty);
    }
    let rows: Vec<TableRow> = records.iter().map(TableRow::from_record).collect();
    match format {
        TableFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record(COLUMNS)?;
            for row in &rows {
                w.write_record(row.cells())?;
            }
            w.into_inner()
                .map_err(|e| Error::Io(e.into_error()))
        }
        TableFormat::JsonLines => {
            let mut out = Vec::new();
            for row in &rows {
                let mut obj = Map::new();
                for (name, cell) in COLUMNS.iter().zip(row.cells()) {
                    let v = if cell == NA {
                        Value::Null
                    } else {
                        let n: Number = cell
                            .parse()
                            .map_err(|e| Error::Parse(format!("{name}={cell}: {e}")))?;
                        Value::Number(n)
                    };
                    obj.insert((*name).to_string(), v);
                }
                serde_json::to_writer(&mut out, &Value::Object(obj))
                    .map_err(|e| Error::Parse(e.to_string()))?;
                out.push(b'\n');
            }
            Ok(out)
        }
    }
}

fn parse_opt<T: std::str::FromStr>(cell: &str, column: &str, line: usize) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if cell == NA {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|e| Error::Parse(format!("line {line}, column {column}: {e}")))
}

/// Reads a CSV emitted by [`emit_table`].
pub fn parse_csv<R: Read>(input: R) -> Result<Vec<TableRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(Error::Parse(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let n_total = parse_opt::<u64>(&rec[0], COLUMNS[0], line)?
            .ok_or_else(|| Error::Parse(format!("line {line}: n_total is NA")))?;
        let mut values = [None; 19];
        for (k, v) in values.iter_mut().enumerate() {
            *v = parse_opt::<f64>(&rec[k + 1], COLUMNS[k + 1], line)?;
        }
        rows.push(TableRow {
            n_total,
            values,
            mc_trials: parse_opt(&rec[20], COLUMNS[20], line)?,
            seed: parse_opt(&rec[21], COLUMNS[21], line)?,
        });
    }
    Ok(rows)
}

/// Reads JSON lines emitted by [`emit_table`].
pub fn parse_jsonl(input: &str) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line)
            .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        let field = |name: &str| -> Result<&Value> {
            v.get(name)
                .ok_or_else(|| Error::Parse(format!("line {}: missing {name}", i + 1)))
        };
        let num = |name: &str| -> Result<Option<f64>> {
            let f = field(name)?;
            if f.is_null() {
                Ok(None)
            } else {
                f.as_f64()
                    .map(Some)
                    .ok_or_else(|| Error::Parse(format!("line {}: {name} not a number", i + 1)))
            }
        };
        let int = |name: &str| -> Result<Option<u64>> {
            let f = field(name)?;
            if f.is_null() {
                Ok(None)
            } else {
                f.as_u64()
                    .map(Some)
                    .ok_or_else(|| Error::Parse(format!("line {}: {name} not an integer", i + 1)))
            }
        };
        let mut values = [None; 19];
        for (k, slot) in values.iter_mut().enumerate() {
            *slot = num(COLUMNS[k + 1])?;
        }
        rows.push(TableRow {
            n_total: int("n_total")?
                .ok_or_else(|| Error::Parse(format!("line {}: n_total is null", i + 1)))?,
            values,
            mc_trials: int("mc_trials")?,
            seed: int("seed")?,
        });
    }
    Ok(rows)
}
