//! TFRS record files.
//!
//! Layout (little-endian): magic `TFRS`, `u32` version, `u32` N, `u32` Λ,
//! `u32` M, then one record per sample: Λ `f64` intensities, M `f64`
//! monitor temperatures, N² `f64` field values in row-major order. The sample
//! count follows from the file length.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, TfrError};

pub const RECORD_MAGIC: [u8; 4] = *b"TFRS";
pub const RECORD_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordHeader {
    pub grid_n: u32,
    pub sources: u32,
    pub monitors: u32,
}

impl RecordHeader {
    pub fn record_len(&self) -> usize {
        let n = self.grid_n as usize;
        self.sources as usize + self.monitors as usize + n * n
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(&RECORD_MAGIC);
        out[4..8].copy_from_slice(&RECORD_VERSION.to_le_bytes());
        out[8..12].copy_from_slice(&self.grid_n.to_le_bytes());
        out[12..16].copy_from_slice(&self.sources.to_le_bytes());
        out[16..20].copy_from_slice(&self.monitors.to_le_bytes());
        out
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(TfrError::Format("truncated TFRS header".into()));
        }
        if bytes[..4] != RECORD_MAGIC {
            return Err(TfrError::Format("bad magic, expected TFRS".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != RECORD_VERSION {
            return Err(TfrError::Format(format!(
                "unsupported TFRS version {version}"
            )));
        }
        Ok(Self {
            grid_n: word(8),
            sources: word(12),
            monitors: word(16),
        })
    }
}

/// One stored sample. Prediction files leave the first two parts empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub intensities: Vec<f64>,
    pub monitor_temps: Vec<f64>,
    pub field: Vec<f64>,
}

pub struct RecordWriter<W: Write> {
    out: W,
    header: RecordHeader,
    written: usize,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut out: W, header: RecordHeader) -> Result<Self> {
        out.write_all(&header.encode())?;
        Ok(Self {
            out,
            header,
            written: 0,
        })
    }

    pub fn push(&mut self, record: &Record) -> Result<()> {
        let n = self.header.grid_n as usize;
        if record.intensities.len() != self.header.sources as usize
            || record.monitor_temps.len() != self.header.monitors as usize
            || record.field.len() != n * n
        {
            return Err(TfrError::Dimension(format!(
                "record shape ({}, {}, {}) does not match header ({}, {}, {})",
                record.intensities.len(),
                record.monitor_temps.len(),
                record.field.len(),
                self.header.sources,
                self.header.monitors,
                n * n
            )));
        }
        let mut buf = Vec::with_capacity(8 * self.header.record_len());
        for v in record
            .intensities
            .iter()
            .chain(&record.monitor_temps)
            .chain(&record.field)
        {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn create_record_file(path: &Path, header: RecordHeader) -> Result<RecordWriter<BufWriter<File>>> {
    RecordWriter::new(BufWriter::new(File::create(path)?), header)
}

/// Decodes a whole TFRS byte buffer.
pub fn decode_records(bytes: &[u8]) -> Result<(RecordHeader, Vec<Record>)> {
    let header = RecordHeader::decode(bytes)?;
    let body = &bytes[HEADER_LEN..];
    let rec_bytes = 8 * header.record_len();
    if rec_bytes == 0 || body.len() % rec_bytes != 0 {
        return Err(TfrError::Format(format!(
            "body of {} bytes is not a whole number of {rec_bytes}-byte records",
            body.len()
        )));
    }
    let (s, m) = (header.sources as usize, header.monitors as usize);
    let records = body
        .chunks_exact(rec_bytes)
        .map(|chunk| {
            let vals: Vec<f64> = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            Record {
                intensities: vals[..s].to_vec(),
                monitor_temps: vals[s..s + m].to_vec(),
                field: vals[s + m..].to_vec(),
            }
        })
        .collect();
    Ok((header, records))
}

pub fn read_record_file(path: &Path) -> Result<(RecordHeader, Vec<Record>)> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_records(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record() -> Record {
        Record {
            intensities: vec![1.0, 2.0],
            monitor_temps: vec![298.5],
            field: vec![298.0, 299.0, 300.0, 301.0],
        }
    }

    #[test]
    fn header_bytes_are_fixed() {
        let header = RecordHeader {
            grid_n: 2,
            sources: 2,
            monitors: 1,
        };
        let mut w = RecordWriter::new(Vec::new(), header).unwrap();
        w.push(&sample_record()).unwrap();
        let bytes = w.finish().unwrap();
        assert_eq!(&bytes[..4], b"TFRS");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(bytes.len(), 20 + 8 * 7);
        assert_eq!(&bytes[20..28], &1.0f64.to_le_bytes());
        let (h, recs) = decode_records(&bytes).unwrap();
        assert_eq!(h, header);
        assert_eq!(recs, vec![sample_record()]);
    }

    #[test]
    fn rejects_unknown_version_and_truncation() {
        let header = RecordHeader {
            grid_n: 2,
            sources: 2,
            monitors: 1,
        };
        let mut w = RecordWriter::new(Vec::new(), header).unwrap();
        w.push(&sample_record()).unwrap();
        let mut bytes = w.finish().unwrap();
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(decode_records(&bad), Err(TfrError::Format(_))));
        bytes.pop();
        assert!(matches!(decode_records(&bytes), Err(TfrError::Format(_))));
        assert!(decode_records(b"TFRX0000000000000000").is_err());
    }

    #[test]
    fn writer_checks_shapes() {
        let header = RecordHeader {
            grid_n: 3,
            sources: 2,
            monitors: 1,
        };
        let mut w = RecordWriter::new(Vec::new(), header).unwrap();
        assert!(w.push(&sample_record()).is_err());
    }
}
