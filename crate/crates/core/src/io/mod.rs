//! On-disk formats.

mod export;
mod field_file;

pub use export::{format_sig9, lifetime_csv, profile_csv, write_lifetime_outputs, LifetimeOutputs};
pub use field_file::{decode_field, encode_field, read_field, write_field, FieldData, ScalarField, HEADER_LEN, MAGIC};

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
