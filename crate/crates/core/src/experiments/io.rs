//! CSV and JSON artifacts. Floats are written in shortest round-trip form, so
//! reading a CSV back reproduces every value bit for bit.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of an identity run: a path at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub path_index: u64,
    pub eps: f64,
    pub lhs: f64,
    pub rhs_total: f64,
    pub rhs_drift: f64,
}

pub const IDENTITY_HEADER: [&str; 5] = ["path_index", "eps", "lhs", "rhs_total", "rhs_drift"];

pub fn write_identity_csv<W: Write>(rows: &[IdentityRow], out: W) -> Result<()> {
    // header written by hand so an empty run still has one
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    wtr.write_record(IDENTITY_HEADER)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads identity rows, checking the header.
pub fn read_identity_csv<R: Read>(input: R) -> Result<Vec<IdentityRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(IDENTITY_HEADER.iter().copied()) {
        return Err(Error::Config(format!(
            "unexpected identity CSV header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

pub fn read_identity_file(path: &Path) -> Result<Vec<IdentityRow>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_identity_csv(f)
}

/// Creates the output directory and returns `dir/name`.
pub fn output_path(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.join(name))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Writes any serializable rows with a header taken from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(create(path)?);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_csv_round_trip() {
        let rows = vec![
            IdentityRow {
                path_index: 0,
                eps: 0.0078125,
                lhs: 0.1 + 0.2,
                rhs_total: -1.0 / 3.0,
                rhs_drift: 0.5,
            },
            IdentityRow {
                path_index: 1,
                eps: 0.125,
                lhs: 1e-300,
                rhs_total: 12345.678901234567,
                rhs_drift: 0.5,
            },
        ];
        let mut buf = Vec::new();
        write_identity_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("path_index,eps,lhs,rhs_total,rhs_drift\n"));
        assert_eq!(read_identity_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(read_identity_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_identity_csv("path_index,eps,lhs,rhs_total,rhs_drift\nx,1,2,3,4\n".as_bytes()).is_err());
    }
}
