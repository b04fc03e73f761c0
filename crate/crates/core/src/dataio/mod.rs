//! Data ingestion, RUL labeling, synthetic run-to-failure bearings and
//! model persistence.

mod archive;
mod manifest;
mod phm;
mod run;
mod synthetic;

pub use archive::{
    decode_archive, encode_archive, load_gpr, load_model, save_gpr, save_model, ArchiveSection, ARCHIVE_MAGIC,
    ARCHIVE_VERSION,
};
pub use manifest::{BearingRole, Channel, DatasetManifest, DEFAULT_CADENCE, DEFAULT_SAMPLE_RATE};
pub use phm::{bearing_dir, load_bearing, parse_record, write_bearing, Phm12Columns, RawRow, RowAdapter};
pub use run::{label_rul, BearingRun, RunEnd};
pub use synthetic::{generate_synthetic, SyntheticSpec, Tone};
