//! Candidates, jobs, staged interaction histories, pair sampling and dataset I/O.

mod dataset;
mod report;
mod sampling;
mod vocab;

pub use dataset::{
    check_temporal, load_dataset, read_pairs, temporal_split, write_pairs, DataDir, Dataset, EntityKind, EntityRecord,
    Pair, Stage, DEFAULT_EMBEDDING_DIM, DEFAULT_SEQ_LEN,
};
pub(crate) use dataset::write_jsonl;
pub use report::{validate_records, DatasetReport};
pub use sampling::{positives_by_job, sample_training_pairs, PairBatch, PairEntry, SampledEpoch};
pub use vocab::{CategoryVocab, DEFAULT_CATEGORIES};
