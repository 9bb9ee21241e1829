//! Dataset ingestion, normalization, synthetic processes with known causal
//! structure, and prior-graph files.

mod dataset;
mod prior_io;
mod synth;
mod tep;
mod text;

pub use dataset::{default_tags, Dataset, Normalizer, Role};
pub use prior_io::{format_prior, load_prior, parse_prior, save_prior};
pub use synth::{spectral_radius, SynthData, SynthEdge, SynthFault, SynthRegime, SynthSpec};
pub use tep::{load_tep, orient, tep_file, tep_tags, TEP_FAULTS, TEP_ONSET, TEP_VARIABLES};
pub use text::{format_csv, format_matrix, parse_matrix, read_matrix, write_matrix};
