//! Normalization of heterogeneous spend publications into canonical transactions.
//!
//! Publishers differ in header placement (logos and titles above the header
//! row), column names, date notation and amount notation. A
//! [`RawFileProfile`] lists the accepted spellings; each file is parsed
//! independently and the results are merged into a canonically sorted
//! [`Ledger`].

mod amount;
mod date;
mod header;
mod profile;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::Ledger;

pub(crate) use amount::parse_amount_strict;
pub use amount::{format_amount, parse_amount};
pub use date::parse_date;
pub use header::{detect_header, HeaderMatch, MIN_HEADER_FIELDS};
pub use profile::{normalize_header, CanonicalField, DateOrder, DirectionColumn, RawFileProfile};

/// File extensions picked up by [`ingest_directory`].
pub const DELIMITED_EXTENSIONS: [&str; 3] = ["csv", "tsv", "txt"];

/// One normalized ledger row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transaction {
    pub entity: String,
    pub date: NaiveDate,
    /// Supplier name as published (trimmed).
    pub supplier: String,
    /// Uppercased supplier name used for grouping.
    pub supplier_key: String,
    pub expense_type: String,
    pub expense_area: String,
    /// Signed amount in pence; positive is money going out.
    pub amount_minor: i64,
    pub source_file: String,
    pub row_number: u64,
}

impl Transaction {
    /// Ordering used for every ledger: entity, date, source file, row.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.entity
            .cmp(&other.entity)
            .then(self.date.cmp(&other.date))
            .then(self.source_file.cmp(&other.source_file))
            .then(self.row_number.cmp(&other.row_number))
    }
}

/// Why a data row was not kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DropReason {
    BlankRow,
    MalformedDate,
    MalformedAmount,
    ZeroAmount,
    MissingSupplier,
    MissingEntity,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Per-file outcome of ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub file: String,
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    pub drop_reasons: BTreeMap<DropReason, usize>,
    pub detected_header_row: Option<usize>,
    /// Set when the whole file was rejected.
    pub error: Option<String>,
}

impl IngestReport {
    fn failed(file: String, err: &IngestError) -> Self {
        IngestReport {
            file,
            rows_read: 0,
            rows_kept: 0,
            rows_dropped: 0,
            drop_reasons: BTreeMap::new(),
            detected_header_row: None,
            error: Some(err.to_string()),
        }
    }
}

/// Problems with a single cell.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("malformed amount `{0}`")]
    MalformedAmount(String),
    #[error("malformed date `{0}`")]
    MalformedDate(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no header row found in the first {scanned} rows")]
    NoHeaderFound { scanned: usize },
    #[error("{path}: {reason}")]
    File { path: String, reason: String },
    #[error("header has no `{0}` column")]
    MissingColumn(CanonicalField),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("no readable files in {0}")]
    NoReadableFiles(String),
}

/// Parses one delimited file (comma or tab) into transactions.
///
/// The source file is recorded by its file name.
pub fn normalize_file(
    path: &Path,
    profile: &RawFileProfile,
) -> Result<(Vec<Transaction>, IngestReport), IngestError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let bytes = std::fs::read(path).map_err(|e| IngestError::File {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.clone());
    normalize_bytes(&bytes, &name, &stem, profile)
}

/// Same as [`normalize_file`] for in-memory content.
pub fn normalize_bytes(
    bytes: &[u8],
    source_file: &str,
    fallback_entity: &str,
    profile: &RawFileProfile,
) -> Result<(Vec<Transaction>, IngestReport), IngestError> {
    let text = decode(bytes);
    if text.trim().is_empty() {
        return Err(IngestError::File {
            path: source_file.to_string(),
            reason: "file is empty".into(),
        });
    }

    let (delimiter, header) = choose_delimiter(&text, profile)?;
    let col = |f: CanonicalField| header.columns.get(&f).copied();
    let date_col =
        col(CanonicalField::Date).ok_or(IngestError::MissingColumn(CanonicalField::Date))?;
    let amount_col =
        col(CanonicalField::Amount).ok_or(IngestError::MissingColumn(CanonicalField::Amount))?;
    let supplier_col = col(CanonicalField::Supplier)
        .ok_or(IngestError::MissingColumn(CanonicalField::Supplier))?;
    let entity_col = col(CanonicalField::Entity);
    let type_col = col(CanonicalField::ExpenseType);
    let area_col = col(CanonicalField::ExpenseArea);
    let income_values: Vec<String> = profile
        .direction_column
        .as_ref()
        .map(|d| {
            d.income_values
                .iter()
                .map(|v| normalize_header(v))
                .collect()
        })
        .unwrap_or_default();

    let mut reader = csv_reader(&text, delimiter);
    let mut record = csv::StringRecord::new();
    let mut report = IngestReport {
        file: source_file.to_string(),
        rows_read: 0,
        rows_kept: 0,
        rows_dropped: 0,
        drop_reasons: BTreeMap::new(),
        detected_header_row: Some(header.row),
        error: None,
    };
    let mut out = Vec::new();
    let mut index = 0usize;
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                return Err(IngestError::File {
                    path: source_file.to_string(),
                    reason: e.to_string(),
                })
            }
        }
        let this = index;
        index += 1;
        if this <= header.row {
            continue;
        }
        report.rows_read += 1;
        let line = record.position().map_or(this as u64 + 1, |p| p.line());
        let cell = |c: Option<usize>| c.and_then(|i| record.get(i)).map(str::trim).unwrap_or("");

        let outcome = (|| {
            if record.iter().all(|c| c.trim().is_empty()) {
                return Err(DropReason::BlankRow);
            }
            let date =
                parse_date(cell(Some(date_col)), profile).map_err(|_| DropReason::MalformedDate)?;
            let mut amount = parse_amount(cell(Some(amount_col)), profile)
                .map_err(|_| DropReason::MalformedAmount)?;
            if amount == 0 {
                return Err(DropReason::ZeroAmount);
            }
            if let Some(dc) = header.direction_column {
                let flag = normalize_header(cell(Some(dc)));
                amount = if income_values.contains(&flag) {
                    -amount.abs()
                } else {
                    amount.abs()
                };
            }
            let supplier = cell(Some(supplier_col));
            if supplier.is_empty() {
                return Err(DropReason::MissingSupplier);
            }
            let entity = match (&profile.entity_override, entity_col) {
                (Some(e), _) => e.trim().to_string(),
                (None, Some(_)) => cell(entity_col).to_string(),
                (None, None) => fallback_entity.trim().to_string(),
            };
            if entity.is_empty() {
                return Err(DropReason::MissingEntity);
            }
            Ok(Transaction {
                entity,
                date,
                supplier: supplier.to_string(),
                supplier_key: supplier.to_uppercase(),
                expense_type: cell(type_col).to_uppercase(),
                expense_area: cell(area_col).to_uppercase(),
                amount_minor: amount,
                source_file: source_file.to_string(),
                row_number: line,
            })
        })();

        match outcome {
            Ok(t) => {
                report.rows_kept += 1;
                out.push(t);
            }
            Err(reason) => {
                report.rows_dropped += 1;
                *report.drop_reasons.entry(reason).or_insert(0) += 1;
            }
        }
    }
    Ok((out, report))
}

type FileResult = Result<(Vec<Transaction>, IngestReport), IngestError>;

/// Parses every delimited file directly inside `dir` using up to `threads`
/// workers (0 picks the machine default).
///
/// Files that fail are reported, not fatal; the call only fails when no file
/// could be read. The ledger is sorted canonically, so its content does not
/// depend on file order or worker count.
pub fn ingest_directory(
    dir: &Path,
    profile: &RawFileProfile,
    threads: usize,
) -> Result<(Ledger, Vec<IngestReport>), IngestError> {
    profile.validate()?;
    let entries = std::fs::read_dir(dir).map_err(|e| IngestError::File {
        path: dir.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();

    let (delimited, other): (Vec<PathBuf>, Vec<PathBuf>) = files.into_iter().partition(|p| {
        p.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| DELIMITED_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
    });

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| IngestError::File {
            path: dir.display().to_string(),
            reason: format!("thread pool: {e}"),
        })?;
    let results: Vec<(String, FileResult)> = pool.install(|| {
        delimited
            .par_iter()
            .map(|p| (display_name(p), normalize_file(p, profile)))
            .collect()
    });

    let mut reports = Vec::with_capacity(results.len() + other.len());
    let mut rows = Vec::new();
    let mut readable = 0usize;
    for (name, res) in results {
        match res {
            Ok((mut txs, report)) => {
                readable += 1;
                rows.append(&mut txs);
                reports.push(report);
            }
            Err(e) => reports.push(IngestReport::failed(name, &e)),
        }
    }
    for p in &other {
        let err = IngestError::File {
            path: display_name(p),
            reason: "unsupported format (convert workbooks to CSV first)".into(),
        };
        reports.push(IngestReport::failed(display_name(p), &err));
    }
    reports.sort_by(|a, b| a.file.cmp(&b.file));

    if readable == 0 {
        return Err(IngestError::NoReadableFiles(dir.display().to_string()));
    }
    let provenance = reports
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| r.file.clone())
        .collect();
    Ok((Ledger::from_rows(rows, provenance), reports))
}

fn display_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

/// UTF-8 (BOM tolerated), falling back to Latin-1 for legacy exports.
fn decode(bytes: &[u8]) -> String {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_string(),
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

fn csv_reader(text: &str, delimiter: u8) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter)
        .from_reader(text.as_bytes())
}

/// Picks comma or tab, whichever yields a header with more columns.
fn choose_delimiter(
    text: &str,
    profile: &RawFileProfile,
) -> Result<(u8, HeaderMatch), IngestError> {
    let mut best: Option<(usize, u8, HeaderMatch)> = None;
    let mut last_err = None;
    for delim in *b",\t" {
        let mut rows = Vec::new();
        for rec in csv_reader(text, delim)
            .records()
            .take(profile.max_header_scan_rows)
        {
            match rec {
                Ok(r) => rows.push(r.iter().map(str::to_string).collect::<Vec<_>>()),
                Err(_) => break,
            }
        }
        match detect_header(&rows, profile) {
            Ok(h) => {
                let width = rows[h.row].len();
                if best.as_ref().is_none_or(|(w, _, _)| width > *w) {
                    best = Some((width, delim, h));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, d, h)) => Ok((d, h)),
        None => Err(last_err.unwrap_or(IngestError::NoHeaderFound { scanned: 0 })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Result<(Vec<Transaction>, IngestReport), IngestError> {
        normalize_bytes(
            text.as_bytes(),
            "fixture.csv",
            "fixture",
            &RawFileProfile::default(),
        )
    }

    #[test]
    fn malformed_date_row_dropped() {
        let text = "Date,Supplier,Expense Type,Expense Area,Amount\n\
                    01/04/2023,Acme Ltd,Drugs,Acute,100.00\n\
                    32/04/2023,Acme Ltd,Drugs,Acute,50.00\n\
                    02/04/2023,Beta plc,Rent,Estates,£140.00\n";
        let (txs, report) = run(text).unwrap();
        assert_eq!(txs.len(), 2);
        assert_eq!(report.rows_read, 3);
        assert_eq!(report.rows_kept, 2);
        assert_eq!(report.rows_dropped, 1);
        assert_eq!(
            report.drop_reasons.get(&DropReason::MalformedDate),
            Some(&1)
        );
        assert_eq!(txs[1].amount_minor, 14000);
        assert_eq!(txs[1].entity, "fixture");
        assert_eq!(txs[1].expense_type, "RENT");
        assert_eq!(txs[1].supplier, "Beta plc");
        assert_eq!(txs[1].supplier_key, "BETA PLC");
        assert_eq!(txs[1].row_number, 4);
    }

    #[test]
    fn empty_file_is_file_error() {
        assert!(matches!(run(""), Err(IngestError::File { .. })));
        assert!(matches!(
            run("\u{feff}\n  \n"),
            Err(IngestError::File { .. })
        ));
    }

    #[test]
    fn tab_delimited_and_bom() {
        let text = "\u{feff}Entity\tDate\tSupplier\tExpense Type\tAmount\n\
                    NHS X ICB\t2023-05-01\tGP Surgery\tGMS\t1,234.56\n";
        let (txs, report) = run(text).unwrap();
        assert_eq!(report.detected_header_row, Some(0));
        assert_eq!(txs[0].entity, "NHS X ICB");
        assert_eq!(txs[0].amount_minor, 123456);
        assert_eq!(txs[0].expense_area, "");
    }

    #[test]
    fn zero_and_blank_rows_counted() {
        let text = "Date,Supplier,Expense Type,Expense Area,Amount\n\
                    01/04/2023,Acme,T,A,0.00\n\
                    ,,,,\n\
                    01/04/2023,,T,A,5\n\
                    01/04/2023,Acme,T,A,five\n";
        let (txs, report) = run(text).unwrap();
        assert!(txs.is_empty());
        assert_eq!(report.rows_read, 4);
        assert_eq!(report.rows_read, report.rows_kept + report.rows_dropped);
        assert_eq!(report.drop_reasons[&DropReason::ZeroAmount], 1);
        assert_eq!(report.drop_reasons[&DropReason::BlankRow], 1);
        assert_eq!(report.drop_reasons[&DropReason::MissingSupplier], 1);
        assert_eq!(report.drop_reasons[&DropReason::MalformedAmount], 1);
    }

    #[test]
    fn direction_column_signs_amounts() {
        let profile = RawFileProfile {
            direction_column: Some(DirectionColumn {
                synonyms: vec!["Flow".into()],
                income_values: vec!["Income".into(), "receipt".into()],
            }),
            ..RawFileProfile::default()
        };
        let text = "Date,Supplier,Expense Type,Amount,Flow\n\
                    01/04/2023,A,T,100,Expenditure\n\
                    01/04/2023,B,T,100,RECEIPT\n";
        let (txs, _) = normalize_bytes(text.as_bytes(), "f.csv", "f", &profile).unwrap();
        assert_eq!(txs[0].amount_minor, 10000);
        assert_eq!(txs[1].amount_minor, -10000);
    }

    #[test]
    fn latin1_pound_sign() {
        let mut bytes = b"Date,Supplier,Expense Type,Amount\n01/04/2023,A,T,".to_vec();
        bytes.push(0xA3);
        bytes.extend_from_slice(b"25.00\n");
        let (txs, _) = normalize_bytes(&bytes, "f.csv", "f", &RawFileProfile::default()).unwrap();
        assert_eq!(txs[0].amount_minor, 2500);
    }

    #[test]
    fn missing_amount_column() {
        let text = "Entity,Date,Supplier,Expense Type\nX,01/04/2023,A,T\n";
        assert!(matches!(
            run(text),
            Err(IngestError::MissingColumn(CanonicalField::Amount))
        ));
    }
}
