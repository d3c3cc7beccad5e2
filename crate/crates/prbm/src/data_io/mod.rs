//! Datasets, model and mask files, pixel mappings and PGM images.

mod bytes;
mod dataset;
mod mapping;
mod model;
mod pgm;

pub use dataset::{load_binary_csv, load_dataset, load_idx, save_binary_csv, Dataset, Split};
pub use mapping::{decode_mapping, encode_mapping, load_mapping, save_mapping};
pub use model::{
    decode_mask, decode_model, encode_mask, encode_model, load_mask, load_model, save_mask, save_model,
    MASK_MAGIC, MASK_VERSION, MODEL_MAGIC, MODEL_VERSION,
};
pub use pgm::{encode_pgm, intensity_byte, write_pgm};
