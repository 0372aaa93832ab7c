//! File formats: IDX tensors, CSV traces and matrices, `key=value` text and
//! instance directories.

pub mod csv;
pub mod idx;
pub mod instance;
pub mod kv;

pub use self::csv::{
    format_real, matrix_from_csv, matrix_to_csv, read_trace_csv, trace_from_csv, trace_to_csv, vector_from_csv,
    vector_to_csv, write_trace_csv,
};
pub use idx::{encode_idx, load_idx, parse_idx, to_features, IdxTensor};
pub use instance::{read_instance_dir, write_instance_dir, Instance};
pub use kv::KvMap;
