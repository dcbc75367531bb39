//! The WMD on-disk format, bit-exact:
//!
//! ```text
//! magic "WMD1" (4 bytes)
//! u8  domain (0 = source, 1 = target)
//! u8  class count C
//! u16 height (little-endian)
//! u16 width  (little-endian)
//! u32 sample count N (little-endian)
//! N records of: u8 label, then H*W cell codes row-major
//! ```
//!
//! Class names live in a sibling UTF-8 text file (`foo.wmd` -> `foo.names`),
//! one name per line, C lines. Saving quantizes continuous images back to
//! cell codes by per-pixel argmax, so autoencoder output round-trips as
//! clean one-hot data.

use std::fs;
use std::path::{Path, PathBuf};

use super::{DataError, Dataset, Domain, DomainSample, WaferMap};

const MAGIC: &[u8; 4] = b"WMD1";

/// Sibling class-name table path for a `.wmd` file.
pub fn names_path(wmd: &Path) -> PathBuf {
    wmd.with_extension("names")
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, offset: usize, message: impl Into<String>) -> DataError {
        DataError::Format {
            path: self.path.display().to_string(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DataError> {
        if self.offset + n > self.bytes.len() {
            return Err(self.fail(
                self.bytes.len(),
                format!("truncated while reading {what}"),
            ));
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8, DataError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, DataError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32, DataError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn load_wmd(path: &Path) -> Result<Dataset, DataError> {
    let bytes = fs::read(path)?;
    let mut r = Reader {
        path,
        bytes: &bytes,
        offset: 0,
    };

    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(r.fail(0, format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let domain_byte = r.u8("domain")?;
    let domain = Domain::from_u8(domain_byte)
        .ok_or_else(|| r.fail(4, format!("bad domain byte {domain_byte}")))?;
    let classes = r.u8("class count")? as usize;
    if classes == 0 {
        return Err(r.fail(5, "class count must be positive"));
    }
    let height = r.u16("height")? as usize;
    let width = r.u16("width")? as usize;
    if height == 0 || width == 0 {
        return Err(r.fail(6, format!("degenerate image size {height}x{width}")));
    }
    let n = r.u32("sample count")? as usize;

    let names_file = names_path(path);
    let names_text = fs::read_to_string(&names_file)?;
    let class_names: Vec<String> = names_text.lines().map(str::to_owned).collect();
    if class_names.len() != classes {
        return Err(DataError::NameCount {
            path: names_file.display().to_string(),
            expected: classes,
            actual: class_names.len(),
        });
    }

    let mut ds = Dataset::new(domain, height, width, class_names);
    for _ in 0..n {
        let label_offset = r.offset;
        let label = r.u8("sample label")? as usize;
        if label >= classes {
            return Err(r.fail(
                label_offset,
                format!("label {label} out of range for {classes} classes"),
            ));
        }
        let cells_offset = r.offset;
        let cells = r.take(height * width, "cell grid")?;
        if let Some(bad) = cells.iter().position(|&c| c as usize >= super::CELL_STATES) {
            return Err(r.fail(
                cells_offset + bad,
                format!("cell code {} outside 0..{}", cells[bad], super::CELL_STATES),
            ));
        }
        let map = WaferMap::new(height, width, cells.to_vec()).expect("codes pre-validated");
        ds.push(DomainSample {
            image: map.encode(),
            label,
            synthetic: false,
        })
        .expect("shape/label pre-validated");
    }
    if r.offset != bytes.len() {
        return Err(r.fail(r.offset, "trailing bytes after last sample"));
    }
    Ok(ds)
}

pub fn save_wmd(dataset: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut bytes = Vec::with_capacity(14 + dataset.len() * (1 + dataset.height * dataset.width));
    bytes.extend_from_slice(MAGIC);
    bytes.push(dataset.domain.as_u8());
    assert!(
        dataset.num_classes() <= u8::MAX as usize,
        "WMD carries at most 255 classes"
    );
    bytes.push(dataset.num_classes() as u8);
    bytes.extend_from_slice(&(dataset.height as u16).to_le_bytes());
    bytes.extend_from_slice(&(dataset.width as u16).to_le_bytes());
    bytes.extend_from_slice(&(dataset.len() as u32).to_le_bytes());
    for sample in &dataset.samples {
        bytes.push(sample.label as u8);
        bytes.extend_from_slice(&WaferMap::from_image(&sample.image).cells);
    }
    fs::write(path, bytes)?;
    fs::write(names_path(path), dataset.class_names.join("\n") + "\n")?;
    Ok(())
}
