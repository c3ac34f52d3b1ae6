//! Grid readers and writers.

mod matpower;
mod native;

use std::path::Path;

pub use matpower::{parse_matpower_case, parse_matpower_case_with};
pub use native::{load_native, load_native_with, save_native, NativeBranch, NativeGrid};

use crate::error::Result;
use crate::grid::{Grid, GridOptions};

/// Loads a grid from disk, choosing the format by extension: `.json` is the
/// native format, anything else is read as a MATPOWER case file.
pub fn load_case(path: impl AsRef<Path>, options: GridOptions) -> Result<Grid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => load_native_with(&text, options),
        _ => parse_matpower_case_with(&text, options),
    }
}
