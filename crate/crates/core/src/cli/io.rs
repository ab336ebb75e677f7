//! CSV input and output.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use crate::bias::FittedComponents;
use crate::bootstrap::RiskMap;
use crate::error::{Error, Result};
use crate::spatial::{Location, SpatialSample};

/// Smallest sample accepted without `--allow-small`.
pub const MIN_INPUT_SIZE: usize = 10;

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line, msg: format!("{other:?}") },
    }
}

fn parse_field(raw: &str, name: &str, line: usize) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("{name} `{raw}` is not a number") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, msg: format!("{name} is not finite ({raw})") });
    }
    Ok(v)
}

fn check_header(headers: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got.len() < want.len() || got[..want.len()] != *want {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{}`, found `{}`", want.join(","), got.join(",")),
        });
    }
    Ok(())
}

/// Reads a sample with header `x1,x2,y`.
///
/// Rejects non-numeric or non-finite fields, repeated locations and, unless
/// `allow_small`, fewer than [`MIN_INPUT_SIZE`] rows. Errors name the file line.
pub fn ingest_csv(path: &Path, allow_small: bool) -> Result<SpatialSample> {
    let file = File::open(path)?;
    ingest_reader(file, allow_small)
}

pub fn ingest_reader<R: io::Read>(reader: R, allow_small: bool) -> Result<SpatialSample> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(rdr.headers().map_err(csv_error)?, &["x1", "x2", "y"])?;
    let mut locs = Vec::new();
    let mut values = Vec::new();
    let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 3 {
            return Err(Error::Parse { line, msg: format!("expected 3 fields, found {}", rec.len()) });
        }
        let x1 = parse_field(&rec[0], "x1", line)?;
        let x2 = parse_field(&rec[1], "x2", line)?;
        let y = parse_field(&rec[2], "y", line)?;
        // +0.0 and -0.0 are the same location.
        let key = ((x1 + 0.0).to_bits(), (x2 + 0.0).to_bits());
        if let Some(first) = seen.insert(key, line) {
            log::error!("location ({x1}, {x2}) on line {line} repeats line {first}");
            return Err(Error::DuplicateLocation { x1, x2, line: Some(line) });
        }
        locs.push(Location::new(x1, x2));
        values.push(y);
    }
    if !allow_small && locs.len() < MIN_INPUT_SIZE {
        return Err(Error::TooFewPoints { got: locs.len(), need: MIN_INPUT_SIZE });
    }
    SpatialSample::new(locs, values)
}

/// Reads target locations with header `x1,x2` (further columns ignored).
pub fn read_targets(path: &Path) -> Result<Vec<Location>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_path(path).map_err(csv_error)?;
    check_header(rdr.headers().map_err(csv_error)?, &["x1", "x2"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() < 2 {
            return Err(Error::Parse { line, msg: "expected x1,x2".into() });
        }
        out.push(Location::new(parse_field(&rec[0], "x1", line)?, parse_field(&rec[1], "x2", line)?));
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("target file has no rows".into()));
    }
    Ok(out)
}

/// Opens `path`, or standard output when absent.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout())),
    })
}

/// Writes `x1,x2,y` with shortest round-trip formatting.
pub fn write_sample_csv<W: Write>(mut out: W, sample: &SpatialSample) -> Result<()> {
    writeln!(out, "x1,x2,y")?;
    for (l, y) in sample.locations().iter().zip(sample.values()) {
        writeln!(out, "{},{},{}", l.x1, l.x2, y)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `x1,x2,c,prob` rows, map by map, with 6-decimal probabilities.
pub fn write_riskmap_csv<W: Write>(mut out: W, maps: &[RiskMap]) -> Result<()> {
    writeln!(out, "x1,x2,c,prob")?;
    for m in maps {
        for (l, p) in m.locations.iter().zip(&m.probabilities) {
            writeln!(out, "{},{},{},{:.6}", l.x1, l.x2, m.threshold, p)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One indicator kriging surface: clamped and raw predictions.
pub struct IkMap {
    pub locations: Vec<Location>,
    pub threshold: f64,
    pub clamped: Vec<f64>,
    pub raw: Vec<f64>,
}

/// Writes `x1,x2,c,prob,prob_raw`.
pub fn write_ik_csv<W: Write>(mut out: W, maps: &[IkMap]) -> Result<()> {
    writeln!(out, "x1,x2,c,prob,prob_raw")?;
    for m in maps {
        for k in 0..m.locations.len() {
            let l = m.locations[k];
            writeln!(out, "{},{},{},{:.6},{:.6}", l.x1, l.x2, m.threshold, m.clamped[k], m.raw[k])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes the fitted components at the sample locations:
/// `x1,x2,y,trend,variance,residual`.
pub fn write_fit_csv<W: Write>(mut out: W, fit: &FittedComponents) -> Result<()> {
    writeln!(out, "x1,x2,y,trend,variance,residual")?;
    for i in 0..fit.n() {
        let l = fit.locations[i];
        writeln!(
            out,
            "{},{},{},{},{},{}",
            l.x1, l.x2, fit.values[i], fit.trend[i], fit.variance[i], fit.residuals[i]
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> String {
        let mut s = String::from("x1,x2,y\n");
        for i in 0..n {
            s.push_str(&format!("{},{},{}\n", i as f64 * 0.1, (i % 3) as f64, 1.5 * i as f64));
        }
        s
    }

    #[test]
    fn small_file_needs_flag() {
        let text = rows(3);
        assert!(matches!(
            ingest_reader(text.as_bytes(), false),
            Err(Error::TooFewPoints { got: 3, need: 10 })
        ));
        assert_eq!(ingest_reader(text.as_bytes(), true).unwrap().len(), 3);
    }

    #[test]
    fn nan_names_line() {
        let mut text = rows(12);
        text.push_str("5,5,NaN\n");
        match ingest_reader(text.as_bytes(), false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_names_line() {
        let mut text = rows(12);
        text.push_str("0.2,2,9\n");
        match ingest_reader(text.as_bytes(), false) {
            Err(Error::DuplicateLocation { line, .. }) => assert_eq!(line, Some(14)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_header() {
        assert!(matches!(ingest_reader("a,b,c\n1,2,3\n".as_bytes(), true), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn round_trip_is_exact() {
        let locs: Vec<Location> = (0..11).map(|i| Location::new(0.1 * i as f64 + 1e-17, (i as f64).sqrt())).collect();
        let y: Vec<f64> = (0..11).map(|i| (i as f64).exp() / 3.0).collect();
        let s = SpatialSample::new(locs, y).unwrap();
        let mut buf = Vec::new();
        write_sample_csv(&mut buf, &s).unwrap();
        let back = ingest_reader(buf.as_slice(), false).unwrap();
        assert_eq!(back.locations(), s.locations());
        assert_eq!(back.values(), s.values());
    }

    #[test]
    fn riskmap_layout() {
        let m = RiskMap { locations: vec![Location::new(0.5, 1.0)], threshold: 2.5, probabilities: vec![0.25] };
        let mut buf = Vec::new();
        write_riskmap_csv(&mut buf, &[m]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x1,x2,c,prob\n0.5,1,2.5,0.250000\n");
    }
}
