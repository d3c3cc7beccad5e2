use std::path::Path;

use prbm_core::eval::GrayImage;

use super::bytes::write_file;
use crate::error::{Error, Result};

/// Grey value to byte, rounding half up: 0.5 becomes 128.
pub fn intensity_byte(value: f64) -> u8 {
    (255.0 * value + 0.5).floor() as u8
}

/// Binary P5 encoding with maxval 255.
pub fn encode_pgm(image: &GrayImage) -> Result<Vec<u8>> {
    if image.pixels.len() != image.width * image.height {
        return Err(Error::value(
            "image",
            format!("{} pixels", image.pixels.len()),
            format!("expected {}x{}", image.width, image.height),
        ));
    }
    if let Some((i, v)) = image.pixels.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::value("image", v.to_string(), format!("pixel {i} is outside [0, 1]")));
    }
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.pixels.iter().map(|&v| intensity_byte(v)));
    Ok(out)
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    write_file(path, &encode_pgm(image)?)
}
