//! Essay data model: TSV ingestion under a configurable column mapping,
//! deterministic splitting, demographic and personality feature scaling,
//! and synthetic corpus generation for experiments.

pub mod record;
pub mod scaler;
pub mod schema;
pub mod split;
pub mod synth;
pub mod tsv;

pub use record::{Dataset, Demographics, EssayRecord, SCORE_RANGE};
pub use scaler::{fit_scaler, CategoricalColumn, FeatureScaler, NumericColumn, ScalerConfig};
pub use schema::ColumnSchema;
pub use split::{split_dataset, SplitResult};
pub use synth::{
    synth_schema, synthesize_corpus, synthesize_labeled, SynthTask, BIG_FIVE, DEV_FIXTURE_COUNTS,
    DEV_FIXTURE_SEED,
};
pub use tsv::{escape_cell, load_tsv, unescape_cell, write_tsv, LoadReport};
