use std::collections::BTreeMap;

use super::profile::{CanonicalField, RawFileProfile};
use super::IngestError;

/// Minimum number of canonical fields a row must name to count as the header.
pub const MIN_HEADER_FIELDS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderMatch {
    /// Zero-based index of the header row within the file.
    pub row: usize,
    pub columns: BTreeMap<CanonicalField, usize>,
    /// Column holding a separate income/expenditure flag, if the profile defines one.
    pub direction_column: Option<usize>,
}

/// Finds the first row within the profile's scan window that names at least
/// four canonical fields. Logo rows, titles and blank lines above it are skipped.
pub fn detect_header<S: AsRef<str>>(
    rows: &[Vec<S>],
    profile: &RawFileProfile,
) -> Result<HeaderMatch, IngestError> {
    for (idx, row) in rows.iter().take(profile.max_header_scan_rows).enumerate() {
        let mut columns = BTreeMap::new();
        for (col, cell) in row.iter().enumerate() {
            if let Some(field) = profile.field_for_header(cell.as_ref()) {
                columns.entry(field).or_insert(col);
            }
        }
        if columns.len() >= MIN_HEADER_FIELDS {
            let direction_column = profile.direction_column.as_ref().and_then(|dc| {
                row.iter().position(|cell| {
                    let key = super::profile::normalize_header(cell.as_ref());
                    dc.synonyms
                        .iter()
                        .any(|s| super::profile::normalize_header(s) == key)
                })
            });
            return Ok(HeaderMatch {
                row: idx,
                columns,
                direction_column,
            });
        }
    }
    Err(IngestError::NoHeaderFound {
        scanned: rows.len().min(profile.max_header_scan_rows),
    })
}
