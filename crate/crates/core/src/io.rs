//! CSV and JSON artifacts.
//!
//! * curve CSV: header `t,c1,…,c{2n}`, rows sorted by `t ∈ [0,1]`;
//! * vertical-curve CSV: header `t,x1,y1,…,xn,yn,z`;
//! * per-level CSV for area reports: `level,value`;
//! * per-`w` CSV for coarea runs: `w1,…,w{2n},fibers,measure,verdict`.
//!
//! Numbers are written with 17 significant digits.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::coarea::{RowStatus, WRow};
use crate::curve::estimate::ConvergenceReport;
use crate::curve::SampledCurve;
use crate::error::{Error, Result};
use crate::heis::HeisPoint;
use crate::vertical::VerticalSamples;

/// `x` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_field(s: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse(format!("row {row}, column {col}: not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("row {row}, column {col}: non-finite value")));
    }
    Ok(v)
}

fn read_table(input: impl Read, expect: impl Fn(usize) -> Option<Vec<String>>) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let want = expect(header.len()).ok_or_else(|| Error::Parse(format!("unexpected header {header:?}")))?;
    if header != want {
        return Err(Error::Parse(format!("header {header:?} should be {want:?}")));
    }
    let mut ts = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != header.len() {
            return Err(Error::Parse(format!("row {row}: expected {} fields, got {}", header.len(), rec.len())));
        }
        let t = parse_field(&rec[0], row, 1)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Parse(format!("row {row}: t = {t} outside [0, 1]")));
        }
        if let Some(&prev) = ts.last() {
            if !(t > prev) {
                return Err(Error::Parse(format!("row {row}: t not increasing")));
            }
        }
        ts.push(t);
        rows.push((1..rec.len()).map(|c| parse_field(&rec[c], row, c + 1)).collect::<Result<Vec<f64>>>()?);
    }
    Ok((ts, rows))
}

fn curve_header(len: usize) -> Option<Vec<String>> {
    (len >= 3 && len % 2 == 1)
        .then(|| std::iter::once("t".to_string()).chain((1..len).map(|k| format!("c{k}"))).collect())
}

fn vertical_header(len: usize) -> Option<Vec<String>> {
    (len >= 4 && len % 2 == 0).then(|| {
        let mut h = vec!["t".to_string()];
        for i in 1..=(len - 2) / 2 {
            h.push(format!("x{i}"));
            h.push(format!("y{i}"));
        }
        h.push("z".into());
        h
    })
}

/// Reads a curve CSV. The first row must have `t = 0` and the last `t = 1`.
pub fn read_curve_csv(input: impl Read) -> Result<SampledCurve> {
    let (ts, rows) = read_table(input, curve_header)?;
    SampledCurve::new(ts, rows)
}

pub fn write_curve_csv(out: impl Write, ts: &[f64], values: &[Vec<f64>]) -> Result<()> {
    let dim = values.first().map_or(0, Vec::len);
    if ts.len() != values.len() || dim == 0 {
        return Err(Error::invalid("curve CSV needs matching nonempty rows"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(curve_header(dim + 1).ok_or_else(|| Error::invalid("curve dimension must be even"))?)?;
    for (t, v) in ts.iter().zip(values) {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        w.write_record(std::iter::once(fmt17(*t)).chain(v.iter().map(|x| fmt17(*x))))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads vertical-curve samples; verticality is not checked here.
pub fn read_vertical_csv(input: impl Read, lambda: f64) -> Result<VerticalSamples> {
    let (ts, rows) = read_table(input, vertical_header)?;
    let pts = rows
        .into_iter()
        .map(|mut r| {
            let z = r.pop().expect("row has z");
            HeisPoint::new(r, z)
        })
        .collect::<Result<Vec<_>>>()?;
    VerticalSamples::new(ts, pts, lambda)
}

pub fn write_vertical_csv(out: impl Write, samples: &VerticalSamples) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(vertical_header(2 * samples.n() + 2).expect("valid dimension"))?;
    for (t, p) in samples.ts().iter().zip(samples.points()) {
        w.write_record(std::iter::once(fmt17(*t)).chain(p.coords().iter().map(|x| fmt17(*x))))?;
    }
    w.flush()?;
    Ok(())
}

/// `level,value` rows of an area report.
pub fn write_terms_csv(out: impl Write, report: &ConvergenceReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "value"])?;
    for t in &report.terms {
        w.write_record([t.level.to_string(), fmt17(t.value)])?;
    }
    w.flush()?;
    Ok(())
}

fn status_name(s: &RowStatus) -> &'static str {
    match s {
        RowStatus::Converged => "converged",
        RowStatus::Empty => "empty",
        RowStatus::Undefined => "undefined",
        RowStatus::Untraceable => "untraceable",
    }
}

pub fn write_coarea_rows_csv(out: impl Write, rows: &[WRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = rows.first().map_or(2, |r| r.w.len());
    let mut header: Vec<String> = (1..=d).map(|k| format!("w{k}")).collect();
    header.extend(["fibers", "measure", "verdict"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.w.iter().map(|x| fmt17(*x)).collect();
        rec.push(r.fibers.to_string());
        rec.push(fmt17(r.measure));
        rec.push(status_name(&r.status).into());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)? + "\n")?;
    Ok(())
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}
