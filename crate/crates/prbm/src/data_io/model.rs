use std::fmt::Write as _;
use std::path::Path;

use prbm_core::{ConnectivityMask, ConstraintSpec, MaskProvenance, RbmParams};

use super::bytes::{pack_bits, read_file, unpack_bits, write_file, ByteReader};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 9] = b"PRBM-MODL";
pub const MODEL_VERSION: u32 = 1;
pub const MASK_MAGIC: &[u8; 9] = b"PRBM-MASK";
pub const MASK_VERSION: u32 = 1;

fn dim_u32(what: &str, n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::value(what, n.to_string(), "does not fit in a u32 header field"))
}

/// Serialises parameters and the constraint they were trained under.
pub fn encode_model(params: &RbmParams, constraint: &ConstraintSpec) -> Result<Vec<u8>> {
    let (d, n) = (params.num_visible(), params.num_hidden());
    let meta = encode_constraint(constraint);
    let mut out = Vec::with_capacity(9 + 16 + 8 * (d + n + d * n) + meta.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&dim_u32("num_visible", d)?.to_le_bytes());
    out.extend_from_slice(&dim_u32("num_hidden", n)?.to_le_bytes());
    for x in params
        .visible_bias()
        .iter()
        .chain(params.hidden_bias())
        .chain(params.weights())
    {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&dim_u32("metadata length", meta.len())?.to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    Ok(out)
}

pub fn decode_model(path: &Path, bytes: &[u8]) -> Result<(RbmParams, ConstraintSpec)> {
    let mut r = ByteReader::new(path, bytes);
    r.magic(MODEL_MAGIC)?;
    let version = r.u32_le("version")?;
    if version != MODEL_VERSION {
        return Err(r.error(9, format!("unsupported version {version}, expected {MODEL_VERSION}")));
    }
    let d = r.u32_le("num_visible")? as usize;
    let n = r.u32_le("num_hidden")? as usize;
    let b = r.f64_le_vec(d, "visible biases")?;
    let c = r.f64_le_vec(n, "hidden biases")?;
    let w = r.f64_le_vec(d * n, "weights")?;
    let meta_offset = r.offset();
    let len = r.u32_le("metadata length")? as usize;
    let meta = r.take(len, "metadata")?;
    r.finish()?;
    let meta = std::str::from_utf8(meta).map_err(|e| {
        r.error(meta_offset + 4 + e.valid_up_to() as u64, "metadata is not valid UTF-8")
    })?;
    let constraint = decode_constraint(meta, d, n).map_err(|m| r.error(meta_offset, m))?;
    let params = RbmParams::from_parts(d, n, w, b, c)?;
    Ok((params, constraint))
}

pub fn save_model(path: &Path, params: &RbmParams, constraint: &ConstraintSpec) -> Result<()> {
    write_file(path, &encode_model(params, constraint)?)
}

pub fn load_model(path: &Path) -> Result<(RbmParams, ConstraintSpec)> {
    decode_model(path, &read_file(path)?)
}

/// `key = value` lines; the mask, if any, is hex of the packed bits.
fn encode_constraint(spec: &ConstraintSpec) -> String {
    let mut s = String::new();
    writeln!(s, "sigma_w = {}", spec.sigma_w).unwrap();
    writeln!(s, "sigma_b = {}", spec.sigma_b).unwrap();
    writeln!(s, "magnitude_cap = {}", spec.magnitude_cap).unwrap();
    match &spec.mask {
        None => writeln!(s, "mask = none").unwrap(),
        Some(mask) => {
            match mask.provenance() {
                MaskProvenance::Dense => writeln!(s, "mask_provenance = dense").unwrap(),
                MaskProvenance::RandomDrop { p, seed } => {
                    writeln!(s, "mask_provenance = random_drop\nmask_p = {p}\nmask_seed = {seed}").unwrap()
                }
                MaskProvenance::Chimera { mapping } => {
                    writeln!(s, "mask_provenance = chimera\nmask_mapping = {mapping}").unwrap()
                }
                MaskProvenance::Loaded => writeln!(s, "mask_provenance = loaded").unwrap(),
            }
            writeln!(s, "mask = {}", hex::encode(pack_bits(mask.allowed()))).unwrap();
        }
    }
    s
}

fn decode_constraint(text: &str, d: usize, n: usize) -> std::result::Result<ConstraintSpec, String> {
    let mut fields = std::collections::BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("metadata line {} is not `key = value`", i + 1))?;
        fields.insert(k.trim(), v.trim());
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| format!("metadata lacks `{k}`"));
    let num = |k: &str| -> std::result::Result<f64, String> {
        get(k)?.parse().map_err(|_| format!("metadata `{k}` is not a number"))
    };
    let mut spec = ConstraintSpec::unconstrained()
        .with_noise(num("sigma_w")?, num("sigma_b")?)
        .with_cap(num("magnitude_cap")?);
    let mask = get("mask")?;
    if mask != "none" {
        let packed = hex::decode(mask).map_err(|e| format!("metadata mask: {e}"))?;
        if packed.len() != (d * n).div_ceil(8) {
            return Err(format!("metadata mask has {} bytes, expected {}", packed.len(), (d * n).div_ceil(8)));
        }
        let bits = unpack_bits(&packed, d * n).map_err(|i| format!("metadata mask padding bit {i} is set"))?;
        let provenance = match get("mask_provenance")? {
            "dense" => MaskProvenance::Dense,
            "random_drop" => MaskProvenance::RandomDrop {
                p: num("mask_p")?,
                seed: get("mask_seed")?.parse().map_err(|_| "metadata `mask_seed` is not an integer")?,
            },
            "chimera" => MaskProvenance::Chimera {
                mapping: get("mask_mapping")?.to_string(),
            },
            "loaded" => MaskProvenance::Loaded,
            other => return Err(format!("unknown mask provenance `{other}`")),
        };
        spec = spec.with_mask(ConnectivityMask::from_allowed(d, n, bits, provenance).map_err(|e| e.to_string())?);
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

pub fn encode_mask(mask: &ConnectivityMask) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MASK_MAGIC);
    out.extend_from_slice(&MASK_VERSION.to_le_bytes());
    out.extend_from_slice(&dim_u32("num_visible", mask.num_visible())?.to_le_bytes());
    out.extend_from_slice(&dim_u32("num_hidden", mask.num_hidden())?.to_le_bytes());
    out.extend_from_slice(&pack_bits(mask.allowed()));
    Ok(out)
}

pub fn decode_mask(path: &Path, bytes: &[u8]) -> Result<ConnectivityMask> {
    let mut r = ByteReader::new(path, bytes);
    r.magic(MASK_MAGIC)?;
    let version = r.u32_le("version")?;
    if version != MASK_VERSION {
        return Err(r.error(9, format!("unsupported version {version}, expected {MASK_VERSION}")));
    }
    let d = r.u32_le("num_visible")? as usize;
    let n = r.u32_le("num_hidden")? as usize;
    let start = r.offset();
    let packed = r.take((d * n).div_ceil(8), "mask bits")?;
    r.finish()?;
    let bits = unpack_bits(packed, d * n)
        .map_err(|i| r.error(start + (i / 8) as u64, format!("padding bit {i} is set")))?;
    Ok(ConnectivityMask::from_allowed(d, n, bits, MaskProvenance::Loaded)?)
}

pub fn save_mask(path: &Path, mask: &ConnectivityMask) -> Result<()> {
    write_file(path, &encode_mask(mask)?)
}

pub fn load_mask(path: &Path) -> Result<ConnectivityMask> {
    decode_mask(path, &read_file(path)?)
}
