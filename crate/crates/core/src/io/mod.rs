//! File formats. Every file starts with `MAGIC VERSION\n`, a block of
//! `key value\n` header lines and `end\n`, followed by a little-endian
//! binary payload; readers reject any other version. Files are written
//! through a temporary sibling and renamed into place.

mod afv;
mod checkpoint;
mod dataset;
mod header;

pub use afv::{
    decode_afv_file, decode_stats, encode_afv_file, encode_stats, load_afv_file, load_stats, save_afv_file, save_stats,
    AfvFile, AFV_MAGIC, AFV_VERSION, STATS_MAGIC, STATS_VERSION,
};
pub use checkpoint::{
    checkpoint_id, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use dataset::{
    dataset_to_csv, decode_dataset, encode_dataset, import_csv, load_dataset, save_dataset, DATASET_MAGIC,
    DATASET_VERSION,
};
pub use header::write_atomic;
