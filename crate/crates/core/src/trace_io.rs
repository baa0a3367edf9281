//! CSV interchange for energy traces.
//!
//! Values are written in shortest round-trip scientific notation, so equal
//! traces produce identical bytes and reading a file back recovers every bit.

use std::io::{Read, Write};

use crate::energy::EnergySample;
use crate::error::{Error, Result};

pub fn write_trace_csv<W: Write>(mut out: W, samples: &[EnergySample]) -> Result<()> {
    writeln!(out, "{}", EnergySample::CSV_COLUMNS.join(","))?;
    let mut line = String::new();
    for s in samples {
        line.clear();
        for (i, v) in s.csv_values().iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:e}"));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn trace_csv_string(samples: &[EnergySample]) -> String {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, samples).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Reads a trace; every column of the contract must be present.
pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<EnergySample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::Trace(format!("header: {e}")))?
        .clone();
    for col in EnergySample::CSV_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Trace(format!("missing column `{col}`")));
        }
    }
    let mut samples = Vec::new();
    for (i, record) in reader.deserialize::<EnergySample>().enumerate() {
        // row 1 is the header
        let row = i + 2;
        let mut s = record.map_err(|e| Error::Trace(format!("row {row}: {e}")))?;
        s.extra.step = i;
        samples.push(s);
    }
    if samples.is_empty() {
        return Err(Error::Trace("trace has no data rows".into()));
    }
    Ok(samples)
}
