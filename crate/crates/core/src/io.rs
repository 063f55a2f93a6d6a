//! CSV and JSON input/output.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{DeconvError, Result};
use crate::estimator::{EstimateGrid, SampleSet};
use crate::sup_stat::BandResult;

/// One value per line; blank lines and `#` comments are skipped, and a
/// non-numeric first record is taken as a header.
pub fn read_samples<R: Read>(reader: R) -> Result<SampleSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut seen_header = false;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let Some(field) = record.get(0) else { continue };
        if field.is_empty() {
            continue;
        }
        if values.is_empty() && !seen_header && field.parse::<f64>().is_err() {
            seen_header = true;
            continue;
        }
        let v: f64 = field.parse().map_err(|_| {
            DeconvError::InvalidInput(format!("record {}: not a number: {field:?}", line + 1))
        })?;
        values.push(v);
    }
    SampleSet::new(values)
}

pub fn read_samples_file(path: &Path) -> Result<SampleSet> {
    read_samples(File::open(path)?)
}

pub fn write_samples<W: Write>(writer: W, samples: &SampleSet) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for v in samples.values() {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(writer)
}

/// Header `x,value,kind`.
pub fn write_estimate_csv<W: Write>(writer: W, grid: &EstimateGrid) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["x", "value", "kind"])?;
    for (x, v) in grid.x.iter().zip(&grid.values) {
        w.write_record([x.to_string(), v.to_string(), grid.kind.as_str().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Header `x,center,lower,upper`.
pub fn write_band_csv<W: Write>(writer: W, band: &BandResult) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["x", "center", "lower", "upper"])?;
    for ((x, c), (lo, hi)) in band
        .center
        .x
        .iter()
        .zip(&band.center.values)
        .zip(band.lower().into_iter().zip(band.upper()))
    {
        w.write_record([x.to_string(), c.to_string(), lo.to_string(), hi.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Header `replicate,statistic`.
pub fn write_replicates_csv<W: Write>(writer: W, statistics: &[f64]) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["replicate", "statistic"])?;
    for (i, s) in statistics.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Arbitrary header and numeric rows.
pub fn write_table_csv<W: Write>(writer: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::GridKind;

    #[test]
    fn reads_comments_and_blanks() {
        let text = "# header comment\n1.5\n\n  -2\n# more\n3e-1\n";
        let s = read_samples(text.as_bytes()).unwrap();
        assert_eq!(s.values(), &[1.5, -2.0, 0.3]);
    }

    #[test]
    fn header_is_skipped_once() {
        let s = read_samples("x\n1\n2\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0]);
        assert!(read_samples("x\n1\ny\n".as_bytes()).is_err());
        assert!(read_samples("1\nx\n".as_bytes()).is_err());
    }

    #[test]
    fn empty_input_is_error() {
        assert!(matches!(
            read_samples("".as_bytes()),
            Err(DeconvError::InvalidInput(_))
        ));
        assert!(matches!(
            read_samples("# only\n".as_bytes()),
            Err(DeconvError::InvalidInput(_))
        ));
        assert!(read_samples("abc\n".as_bytes()).is_err());
    }

    #[test]
    fn estimate_csv_layout() {
        let g = EstimateGrid::new(vec![0.0, 0.5], vec![1.25, -0.5], GridKind::Estimate).unwrap();
        let mut out = Vec::new();
        write_estimate_csv(&mut out, &g).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "x,value,kind\n0,1.25,estimate\n0.5,-0.5,estimate\n"
        );
    }

    #[test]
    fn samples_round_trip() {
        let s = SampleSet::new(vec![0.1, -7.25, 1e-300]).unwrap();
        let mut out = Vec::new();
        write_samples(&mut out, &s).unwrap();
        assert_eq!(read_samples(out.as_slice()).unwrap(), s);
    }
}
