use std::fmt::Write as _;
use std::path::Path;

use prbm_core::topology::MappingKind;
use prbm_core::PixelMapping;

use super::bytes::{read_file, write_file};
use crate::error::{Error, Result};

/// One line per unit, `unit_index pixel_row pixel_col`, after a comment
/// header recording the image size and mapping kind.
pub fn encode_mapping(mapping: &PixelMapping) -> String {
    let mut s = format!(
        "# width {} height {} kind {}\n",
        mapping.width(),
        mapping.height(),
        mapping.kind().as_str()
    );
    for unit in 0..mapping.num_units() {
        let (r, c) = mapping.pixel_coord(unit);
        writeln!(s, "{unit} {r} {c}").unwrap();
    }
    s
}

/// Parses the mapping text format. Without a header the image size is the
/// bounding box of the listed pixels and the kind is `custom`.
pub fn decode_mapping(path: &Path, text: &str) -> Result<PixelMapping> {
    let mut header: Option<(usize, usize, MappingKind)> = None;
    let mut entries: Vec<Option<(usize, usize)>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let words: Vec<&str> = comment.split_whitespace().collect();
            if let ["width", w, "height", h, "kind", k] = words[..] {
                let bad = |m: String| Error::parse(path, line_no, 1, m);
                let w = w.parse().map_err(|_| bad(format!("bad width `{w}`")))?;
                let h = h.parse().map_err(|_| bad(format!("bad height `{h}`")))?;
                let k = k.parse().map_err(|e: prbm_core::Error| bad(e.to_string()))?;
                header = Some((w, h, k));
            }
            continue;
        }
        let mut fields = [0usize; 3];
        let mut parts = trimmed.split_whitespace();
        for (i, name) in ["unit_index", "pixel_row", "pixel_col"].iter().enumerate() {
            let token = parts
                .next()
                .ok_or_else(|| Error::parse(path, line_no, trimmed.len() + 1, format!("missing {name}")))?;
            let column = token.as_ptr() as usize - line.as_ptr() as usize + 1;
            fields[i] = token
                .parse()
                .map_err(|_| Error::parse(path, line_no, column, format!("{name} `{token}` is not a non-negative integer")))?;
        }
        if parts.next().is_some() {
            return Err(Error::parse(path, line_no, 1, "expected exactly three fields"));
        }
        let [unit, r, c] = fields;
        if unit >= entries.len() {
            entries.resize(unit + 1, None);
        }
        if entries[unit].replace((r, c)).is_some() {
            return Err(Error::parse(path, line_no, 1, format!("unit {unit} listed twice")));
        }
    }
    if let Some(missing) = entries.iter().position(Option::is_none) {
        return Err(Error::parse(path, text.lines().count(), 1, format!("unit {missing} is missing")));
    }
    let coords: Vec<(usize, usize)> = entries.into_iter().flatten().collect();
    let (width, height, kind) = header.unwrap_or_else(|| {
        let h = coords.iter().map(|p| p.0 + 1).max().unwrap_or(0);
        let w = coords.iter().map(|p| p.1 + 1).max().unwrap_or(0);
        (w, h, MappingKind::Custom)
    });
    if let Some((unit, &(r, c))) = coords.iter().enumerate().find(|(_, &(r, c))| r >= height || c >= width) {
        return Err(Error::value(
            "mapping",
            format!("unit {unit} -> ({r}, {c})"),
            format!("outside the {width}x{height} image"),
        ));
    }
    let pixels = coords.iter().map(|&(r, c)| r * width + c).collect();
    Ok(PixelMapping::new(width, height, kind, pixels)?)
}

pub fn save_mapping(path: &Path, mapping: &PixelMapping) -> Result<()> {
    write_file(path, encode_mapping(mapping).as_bytes())
}

pub fn load_mapping(path: &Path) -> Result<PixelMapping> {
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::parse(path, 1, 1, "file is not valid UTF-8"))?;
    decode_mapping(path, text)
}
