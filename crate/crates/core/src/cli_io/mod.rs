//! Configuration, initial data and file formats.

pub mod config;
pub mod csv;
pub mod initial;
pub mod snapshot;

pub use config::{load_config, parse_config, InitialParams, RunConfig};
pub use csv::{format_report_row, write_reports, CSV_HEADER};
pub use initial::initial_condition;
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC};
