//! CSV result tables.
//!
//! Floats are written with 17 significant digits (`{:.16e}`) so that a
//! value read back is bit-identical to the one written. Rows are appended
//! one complete line per `write` call, so an interrupted sweep leaves only
//! whole rows; a trailing partial line is dropped when a table is resumed.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

pub const RESULT_HEADER: [&str; 16] = [
    "L", "t1", "t2", "t12", "tau_u", "p1", "p2", "lA", "n_traj", "master_seed", "E_mean", "E_sem", "N_st", "m",
    "wall_time_s", "error",
];

/// One completed (or failed) ensemble.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ResultRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub t1: f64,
    pub t2: f64,
    pub t12: f64,
    pub tau_u: f64,
    pub p1: f64,
    pub p2: f64,
    #[serde(rename = "lA")]
    pub l_a: usize,
    pub n_traj: usize,
    pub master_seed: u64,
    #[serde(rename = "E_mean")]
    pub e_mean: f64,
    #[serde(rename = "E_sem")]
    pub e_sem: f64,
    #[serde(rename = "N_st")]
    pub n_st: usize,
    pub m: usize,
    pub wall_time_s: f64,
    /// Empty for a successful cell.
    #[serde(default)]
    pub error: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_empty()
    }

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.l.to_string(),
            float(self.t1),
            float(self.t2),
            float(self.t12),
            float(self.tau_u),
            float(self.p1),
            float(self.p2),
            self.l_a.to_string(),
            self.n_traj.to_string(),
            self.master_seed.to_string(),
            float(self.e_mean),
            float(self.e_sem),
            self.n_st.to_string(),
            self.m.to_string(),
            float(self.wall_time_s),
            self.error.clone(),
        ]
    }

    /// Everything except the wall time.
    pub fn same_result(&self, other: &ResultRow) -> bool {
        self.fields()[..14] == other.fields()[..14] && self.error == other.error
    }
}

/// `{:.16e}`: 17 significant digits.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV line for `fields`, including the newline.
pub fn csv_line<S: AsRef<str>>(fields: &[S]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(fields.iter().map(|s| s.as_ref())).expect("in-memory write");
    w.into_inner().expect("in-memory flush")
}

/// Append-only table with a fixed header.
pub struct TableWriter {
    file: File,
}

impl TableWriter {
    /// Starts a fresh table at `path`, replacing any existing file.
    pub fn create<S: AsRef<str>>(path: &Path, header: &[S]) -> Result<Self> {
        let mut file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        file.write_all(&csv_line(header))?;
        file.sync_data()?;
        Ok(TableWriter { file })
    }

    /// Opens an existing table for appending after checking its header and
    /// cutting off an incomplete last line. Creates it when missing.
    pub fn resume<S: AsRef<str>>(path: &Path, header: &[S]) -> Result<Self> {
        if !path.exists() {
            return Self::create(path, header);
        }
        let mut file = OpenOptions::new().read(true).write(true).open(path).with_context(|| format!("opening {}", path.display()))?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        let expected = String::from_utf8(csv_line(header)).expect("ascii header");
        if !text.starts_with(&expected) {
            bail!("{}: header differs from the expected `{}`", path.display(), expected.trim_end());
        }
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        if keep < text.len() {
            file.set_len(keep as u64)?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(TableWriter { file })
    }

    pub fn append<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        self.file.write_all(&csv_line(fields))?;
        self.file.sync_data()?;
        Ok(())
    }
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    read_rows(path, &RESULT_HEADER)
}

/// Reads every complete row; checks that the header starts with `header`.
pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let found: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if found.len() < header.len() || found.iter().zip(header).any(|(a, b)| a != b) {
        bail!("{}: expected columns {:?}, found {:?}", path.display(), header, found);
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("{}: row {}", path.display(), i + 1)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(e: f64) -> ResultRow {
        ResultRow {
            l: 8,
            t1: 1.0,
            t2: 5.0,
            t12: std::f64::consts::FRAC_PI_2,
            tau_u: 1.0,
            p1: 0.2,
            p2: 0.1 + 0.2,
            l_a: 4,
            n_traj: 3,
            master_seed: 9,
            e_mean: e,
            e_sem: 1.0 / 3.0,
            n_st: 150,
            m: 5,
            wall_time_s: 0.25,
            error: String::new(),
        }
    }

    #[test]
    fn floats_survive_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut w = TableWriter::create(&path, &RESULT_HEADER).unwrap();
        let rows = [row(std::f64::consts::LN_2), ResultRow { error: "boom, \"quoted\"".into(), e_mean: f64::NAN, ..row(0.0) }];
        for r in &rows {
            w.append(&r.fields()).unwrap();
        }
        let back = read_results(&path).unwrap();
        assert_eq!(back[0], rows[0]);
        assert_eq!(back[0].p2.to_bits(), (0.1f64 + 0.2).to_bits());
        assert!(back[1].e_mean.is_nan() && back[1].error == rows[1].error);
    }

    #[test]
    fn resume_drops_a_partial_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut w = TableWriter::create(&path, &RESULT_HEADER).unwrap();
        w.append(&row(1.0).fields()).unwrap();
        drop(w);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"8,1.0,5.0").unwrap();
        drop(f);
        let mut w = TableWriter::resume(&path, &RESULT_HEADER).unwrap();
        w.append(&row(2.0).fields()).unwrap();
        let back = read_results(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].e_mean, 2.0);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "L,t1\n").unwrap();
        assert!(TableWriter::resume(&path, &RESULT_HEADER).is_err());
        assert!(read_results(&path).is_err());
    }
}
