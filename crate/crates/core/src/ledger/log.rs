//! Append-only block log: a sequence of `u32 BE length || canonical block`
//! records.

use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Read, Write as _};
use std::path::{Path, PathBuf};

use super::block::{verify_records, Block, VerifyReport};

pub struct BlockLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl BlockLog {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path,
            out: BufWriter::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, block: &Block) -> io::Result<()> {
        let bytes = block.encode();
        self.out.write_all(&(bytes.len() as u32).to_be_bytes())?;
        self.out.write_all(&bytes)?;
        self.out.flush()
    }
}

/// Splits a log file into raw records. A record cut short at the end of the
/// file is returned in `partial` rather than as an error.
pub struct RawLog {
    pub records: Vec<Vec<u8>>,
    pub partial: bool,
}

pub fn read_records(path: impl AsRef<Path>) -> io::Result<RawLog> {
    let mut data = Vec::new();
    File::open(path)?.read_to_end(&mut data)?;
    let mut records = Vec::new();
    let mut pos = 0usize;
    while pos < data.len() {
        if data.len() - pos < 4 {
            return Ok(RawLog {
                records,
                partial: true,
            });
        }
        let len = u32::from_be_bytes(data[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        if data.len() - pos < len {
            return Ok(RawLog {
                records,
                partial: true,
            });
        }
        records.push(data[pos..pos + len].to_vec());
        pos += len;
    }
    Ok(RawLog {
        records,
        partial: false,
    })
}

/// Verifies a log file on disk. A dangling partial record counts as a bad
/// block at the height it would have had.
pub fn verify_log_file(path: impl AsRef<Path>) -> io::Result<VerifyReport> {
    let raw = read_records(path)?;
    let mut report = verify_records(&raw.records);
    if report.valid && raw.partial {
        let h = raw.records.len() as u64;
        report = VerifyReport {
            valid: false,
            block_count: h,
            first_bad_height: Some(h),
            reason: Some("partial trailing record".into()),
        };
    }
    Ok(report)
}

/// Removes a log file if present.
pub fn purge(path: impl AsRef<Path>) -> io::Result<()> {
    match std::fs::remove_file(path) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
        _ => Ok(()),
    }
}
