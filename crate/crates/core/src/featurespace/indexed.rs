//! Offline indexing and online mapping of raw files.
//!
//! Indexed layout, per record, little-endian, no header:
//! `label: u8`, then `m × (global_id: u32, value: f32)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use super::raw::RawReader;
use super::{FeatureSchema, SparseInstance};
use crate::error::{Error, Result};

pub fn record_stride(num_fields: usize) -> usize {
    1 + 8 * num_fields
}

pub fn write_instance<W: Write>(out: &mut W, inst: &SparseInstance) -> std::io::Result<()> {
    out.write_all(&[inst.label])?;
    for (&id, &v) in inst.ids.iter().zip(&inst.values) {
        out.write_all(&id.to_le_bytes())?;
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Writes instances to an indexed file. Returns the record count.
pub fn write_indexed<'a, I>(path: impl AsRef<Path>, instances: I) -> Result<u64>
where
    I: IntoIterator<Item = &'a SparseInstance>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut n = 0;
    for inst in instances {
        write_instance(&mut w, inst).map_err(|e| Error::io(path, e))?;
        n += 1;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(n)
}

/// Encodes `raw_path` once and stores the ID data at `out_path`. Record order is preserved.
pub fn index_offline(
    raw_path: impl AsRef<Path>,
    schema: &FeatureSchema,
    delimiter: char,
    out_path: impl AsRef<Path>,
) -> Result<u64> {
    let out_path = out_path.as_ref();
    let file = File::create(out_path).map_err(|e| Error::io(out_path, e))?;
    let mut w = BufWriter::new(file);
    let mut n = 0;
    for inst in online_map(raw_path, schema, delimiter)? {
        write_instance(&mut w, &inst?).map_err(|e| Error::io(out_path, e))?;
        n += 1;
    }
    w.flush().map_err(|e| Error::io(out_path, e))?;
    Ok(n)
}

/// Re-encodes the raw file on every read.
pub fn online_map(raw_path: impl AsRef<Path>, schema: &FeatureSchema, delimiter: char) -> Result<OnlineMap<'_>> {
    Ok(OnlineMap { reader: RawReader::open(raw_path, delimiter)?, schema })
}

pub struct OnlineMap<'a> {
    reader: RawReader,
    schema: &'a FeatureSchema,
}

impl Iterator for OnlineMap<'_> {
    type Item = Result<SparseInstance>;

    fn next(&mut self) -> Option<Self::Item> {
        let rec = self.reader.next()?;
        Some(rec.and_then(|r| self.schema.encode_record(&r)))
    }
}

/// Streams instances from an indexed file.
pub struct IndexedReader {
    path: PathBuf,
    reader: BufReader<File>,
    ranges: Vec<std::ops::Range<u32>>,
    buf: Vec<u8>,
    record: u64,
    done: bool,
}

impl IndexedReader {
    pub fn open(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let m = schema.num_fields();
        Ok(Self {
            path,
            reader: BufReader::with_capacity(1 << 16, file),
            ranges: (0..m).map(|i| schema.field_range(i)).collect(),
            buf: vec![0; record_stride(m)],
            record: 0,
            done: false,
        })
    }

    fn read_record(&mut self) -> Result<Option<SparseInstance>> {
        let mut filled = 0;
        while filled < self.buf.len() {
            match self.reader.read(&mut self.buf[filled..]) {
                Ok(0) => break,
                Ok(k) => filled += k,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::io(&self.path, e)),
            }
        }
        if filled == 0 {
            return Ok(None);
        }
        if filled < self.buf.len() {
            return Err(Error::Format(format!(
                "{}: truncated record {} ({filled} of {} bytes)",
                self.path.display(),
                self.record,
                self.buf.len()
            )));
        }
        let label = self.buf[0];
        if label > 1 {
            return Err(Error::Format(format!(
                "{}: record {} has label byte {label}",
                self.path.display(),
                self.record
            )));
        }
        let m = self.ranges.len();
        let mut ids = Vec::with_capacity(m);
        let mut values = Vec::with_capacity(m);
        for (i, chunk) in self.buf[1..].chunks_exact(8).enumerate() {
            let id = u32::from_le_bytes(chunk[..4].try_into().unwrap());
            let v = f32::from_le_bytes(chunk[4..].try_into().unwrap());
            if !self.ranges[i].contains(&id) {
                return Err(Error::Format(format!(
                    "{}: record {} field {i} has id {id} outside {:?}",
                    self.path.display(),
                    self.record,
                    self.ranges[i]
                )));
            }
            ids.push(id);
            values.push(v);
        }
        self.record += 1;
        Ok(Some(SparseInstance { ids, values, label }))
    }
}

impl Iterator for IndexedReader {
    type Item = Result<SparseInstance>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_record() {
            Ok(Some(inst)) => Some(Ok(inst)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Reads a whole indexed file into memory.
pub fn read_indexed(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Vec<SparseInstance>> {
    IndexedReader::open(path, schema)?.collect()
}
