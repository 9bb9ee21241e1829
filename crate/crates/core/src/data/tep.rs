use std::path::{Path, PathBuf};

use super::dataset::{Dataset, Role};
use super::text::read_matrix;
use crate::error::{CgstaeError, Result};
use crate::numerics::Matrix;

pub const TEP_VARIABLES: usize = 52;
/// Faults start at the 161st sample of each test file.
pub const TEP_ONSET: usize = 160;
pub const TEP_FAULTS: usize = 21;

/// XMEAS(1)..XMEAS(41), XMV(1)..XMV(11).
pub fn tep_tags() -> Vec<String> {
    (1..=41)
        .map(|i| format!("XMEAS({i})"))
        .chain((1..=11).map(|i| format!("XMV({i})")))
        .collect()
}

/// Puts variables in columns, transposing 52-row files.
pub fn orient(m: Matrix) -> Result<Matrix> {
    if m.cols() == TEP_VARIABLES {
        Ok(m)
    } else if m.rows() == TEP_VARIABLES {
        Ok(m.transpose())
    } else {
        Err(CgstaeError::Layout(format!(
            "expected {TEP_VARIABLES} variables in rows or columns, got {}×{}",
            m.rows(),
            m.cols()
        )))
    }
}

/// Loads a TEP data file. Test-role datasets carry the fault onset.
pub fn load_tep(path: &Path, role: Role) -> Result<Dataset> {
    let series = orient(read_matrix(path)?)?;
    let onset = match role {
        Role::Train => None,
        Role::Test => Some(TEP_ONSET.min(series.rows())),
    };
    Dataset::new(series, tep_tags(), role, onset)
}

/// `d00_te.dat` is the normal-operation training file; `dXX_te.dat` the test
/// file for fault XX.
pub fn tep_file(dir: &Path, fault: usize) -> PathBuf {
    dir.join(format!("d{fault:02}_te.dat"))
}
