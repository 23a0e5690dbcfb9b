//! Raw records to field-grouped sparse instances.
//!
//! Every field contributes exactly one active feature, identified by a global
//! ID in `[0, total_features)`. Categorical fields are one-hot (value 1);
//! numerical fields either keep their value under one shared ID or are
//! discretized into buckets.

mod async_reader;
mod batch;
mod indexed;
mod raw;
mod schema;

pub use async_reader::{async_reader, throttle, AsyncReader, Throttle};
pub use batch::{batches, epoch_order, Batch, Batches, Order};
pub use indexed::{
    index_offline, online_map, read_indexed, record_stride, write_indexed, write_instance, IndexedReader, OnlineMap,
};
pub use raw::{parse_label, parse_line, RawReader, RawRecord};
pub use schema::{
    bucket_of, Decoded, FeatureSchema, FieldDecl, FieldKind, FieldSpec, NumericPolicy, NumericStats, SchemaOptions,
};

/// One labeled record: a global feature ID and value per field.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseInstance {
    pub ids: Vec<u32>,
    pub values: Vec<f32>,
    pub label: u8,
}

impl SparseInstance {
    pub fn num_fields(&self) -> usize {
        self.ids.len()
    }
}
