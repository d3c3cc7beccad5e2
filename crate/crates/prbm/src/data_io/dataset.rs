use std::fmt::Write as _;
use std::path::Path;

use prbm_core::rng::{stream, Domain};
use prbm_core::trainer::binarize_rows;
use prbm_core::PixelMapping;

use super::bytes::{read_file, write_file};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    /// `Test` when the file name mentions `test` or MNIST's `t10k`.
    pub fn guess(path: &Path) -> Self {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().to_lowercase())
            .unwrap_or_default();
        if name.contains("test") || name.contains("t10k") {
            Split::Test
        } else {
            Split::Train
        }
    }
}

/// Rows of grey values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    dim: usize,
    name: String,
    split: Split,
    labels: Option<Vec<u8>>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, name: impl Into<String>, split: Split) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::value(
                    "dataset",
                    format!("row {r}"),
                    format!("has {} entries, expected {dim}", row.len()),
                ));
            }
            if let Some((c, x)) = row.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
                return Err(Error::value("dataset", x.to_string(), format!("row {r} column {c} is outside [0, 1]")));
            }
        }
        Ok(Self {
            rows,
            dim,
            name: name.into(),
            split,
            labels: None,
        })
    }

    /// Builds a dataset of exact 0/1 rows.
    pub fn from_bits(bits: &[Vec<bool>], name: impl Into<String>, split: Split) -> Result<Self> {
        let rows = bits
            .iter()
            .map(|r| r.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(rows, name, split)
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.rows.len() {
            return Err(Error::value(
                "labels",
                format!("{} labels", labels.len()),
                format!("dataset has {} rows", self.rows.len()),
            ));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// One fixed Bernoulli draw per entry, spread onto visible units by `layout`.
    pub fn binarized(&self, layout: Option<&PixelMapping>, seed: u64) -> Result<Vec<Vec<bool>>> {
        Ok(binarize_rows(&self.rows, layout, &mut stream(seed, Domain::Binarize, u64::MAX))?)
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads a matrix of values in [0, 1], one row per line, entries separated by
/// commas and/or whitespace. Blank lines and lines starting with `#` are skipped.
pub fn load_binary_csv(path: &Path) -> Result<Dataset> {
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::parse(path, line, 1, "file is not valid UTF-8")
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for (column, token) in tokens(line) {
            let x: f64 = token
                .parse()
                .map_err(|_| Error::parse(path, line_no, column, format!("`{token}` is not a number")))?;
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::parse(path, line_no, column, format!("{token} is outside [0, 1]")));
            }
            row.push(x);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::parse(
                    path,
                    line_no,
                    1,
                    format!("ragged row: {} entries, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    Dataset::new(rows, file_stem(path), Split::guess(path))
}

/// Non-empty fields with their 1-based starting column.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut start = 0;
    line.split(|c: char| c == ',' || c.is_whitespace())
        .map(move |t| {
            let col = start + 1;
            start += t.len() + 1;
            (col, t)
        })
        .filter(|(_, t)| !t.is_empty())
}

/// Writes comma-separated rows using the shortest exact decimal for each value.
pub fn save_binary_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::new();
    for row in data.rows() {
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{x}").unwrap();
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

/// Reads an IDX image file (and optionally its label file), scaling bytes by 1/255.
pub fn load_idx(images: &Path, labels: Option<&Path>) -> Result<Dataset> {
    let bytes = read_file(images)?;
    let (count, rows, cols, pixels) = parse_idx_images(images, &bytes)?;
    let dim = rows * cols;
    let data = if dim == 0 {
        vec![Vec::new(); count]
    } else {
        pixels
            .chunks_exact(dim)
            .map(|img| img.iter().map(|&b| f64::from(b) / 255.0).collect())
            .collect()
    };
    let mut set = Dataset::new(data, file_stem(images), Split::guess(images))?;
    set.dim = dim;
    if let Some(path) = labels {
        let bytes = read_file(path)?;
        let labels = parse_idx_labels(path, &bytes)?;
        if labels.len() != count {
            return Err(Error::format(
                path,
                4,
                format!("label count {} does not match image count {count}", labels.len()),
            ));
        }
        set = set.with_labels(labels)?;
    }
    Ok(set)
}

fn parse_idx_images<'a>(path: &Path, bytes: &'a [u8]) -> Result<(usize, usize, usize, &'a [u8])> {
    let mut r = super::bytes::ByteReader::new(path, bytes);
    let magic = r.u32_be("magic")?;
    if magic != IDX_IMAGES {
        return Err(r.error(0, format!("bad magic: expected 0x{IDX_IMAGES:08x}, found 0x{magic:08x}")));
    }
    let count = r.u32_be("image count")? as usize;
    let rows = r.u32_be("row count")? as usize;
    let cols = r.u32_be("column count")? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .ok_or_else(|| r.error(4, format!("dimensions {count}x{rows}x{cols} overflow")))?;
    let pixels = r.take(len, &format!("pixel data for {count} images of {rows}x{cols}"))?;
    r.finish()?;
    Ok((count, rows, cols, pixels))
}

fn parse_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = super::bytes::ByteReader::new(path, bytes);
    let magic = r.u32_be("magic")?;
    if magic != IDX_LABELS {
        return Err(r.error(0, format!("bad magic: expected 0x{IDX_LABELS:08x}, found 0x{magic:08x}")));
    }
    let count = r.u32_be("label count")? as usize;
    let labels = r.take(count, "labels")?.to_vec();
    r.finish()?;
    Ok(labels)
}

/// Dispatches on content: IDX when the file starts with the image magic, CSV otherwise.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let head = read_file(path)?;
    if head.len() >= 4 && u32::from_be_bytes(head[..4].try_into().unwrap()) == IDX_IMAGES {
        load_idx(path, None)
    } else {
        load_binary_csv(path)
    }
}
