//! Canonical transaction store, filtering and grouped aggregation.
//!
//! Amounts stay in integer pence end to end; sums are accumulated in `i128`.
//! The on-disk form is newline-delimited JSON: a header object
//! `{"format_version":1,"created":...,"row_count":N}` followed by one object
//! per transaction with the amount written as an exact two-decimal string.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{format_amount, Transaction};

pub const LEDGER_FORMAT_VERSION: u32 = 1;

/// Ledger rows in canonical order (entity, date, source file, row number).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ledger {
    transactions: Vec<Transaction>,
    provenance: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Expenditure,
    Income,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Expenditure, Direction::Income];
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Expenditure => "expenditure",
            Direction::Income => "income",
        })
    }
}

/// Outgoing money is positive, incoming negative. Zero rows never reach a ledger.
pub fn direction_of(t: &Transaction) -> Direction {
    if t.amount_minor < 0 {
        Direction::Income
    } else {
        Direction::Expenditure
    }
}

/// How an amount is compared with a disclosure threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `|amount| >= threshold`
    #[default]
    AtLeast,
    /// `|amount| > threshold`
    Strict,
}

impl ThresholdRule {
    pub fn is_above(self, amount_minor: i64, threshold_minor: i64) -> bool {
        let a = amount_minor.unsigned_abs();
        let t = threshold_minor.unsigned_abs();
        match self {
            ThresholdRule::AtLeast => a >= t,
            ThresholdRule::Strict => a > t,
        }
    }
}

/// Anything that can hand out transactions in canonical order.
pub trait TransactionSource {
    fn transactions(&self) -> impl Iterator<Item = &Transaction> + '_;
}

impl Ledger {
    /// Builds a ledger, dropping zero-amount rows and sorting canonically.
    pub fn from_rows(mut rows: Vec<Transaction>, mut provenance: Vec<String>) -> Self {
        rows.retain(|t| t.amount_minor != 0);
        rows.sort_by(Transaction::canonical_cmp);
        provenance.sort();
        provenance.dedup();
        Ledger {
            transactions: rows,
            provenance,
        }
    }

    pub fn rows(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn view(&self) -> LedgerView<'_> {
        LedgerView {
            rows: self.transactions.iter().collect(),
        }
    }

    pub fn filter(&self, spec: &FilterSpec) -> LedgerView<'_> {
        LedgerView {
            rows: self
                .transactions
                .iter()
                .filter(|t| spec.matches(t))
                .collect(),
        }
    }

    /// Rows whose content (everything except file and row number) repeats an
    /// earlier row. Duplicates are kept in the ledger; this is diagnostics only.
    pub fn duplicate_count(&self) -> usize {
        let mut seen = HashSet::with_capacity(self.transactions.len());
        self.transactions
            .iter()
            .filter(|t| {
                !seen.insert((
                    &t.entity,
                    t.date,
                    &t.supplier,
                    &t.expense_type,
                    &t.expense_area,
                    t.amount_minor,
                ))
            })
            .count()
    }
}

impl TransactionSource for Ledger {
    fn transactions(&self) -> impl Iterator<Item = &Transaction> + '_ {
        self.transactions.iter()
    }
}

/// A filtered, order-preserving window onto a ledger.
#[derive(Debug, Clone)]
pub struct LedgerView<'a> {
    rows: Vec<&'a Transaction>,
}

impl<'a> LedgerView<'a> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a Transaction> + '_ {
        self.rows.iter().copied()
    }

    pub fn filter(&self, spec: &FilterSpec) -> LedgerView<'a> {
        LedgerView {
            rows: self
                .rows
                .iter()
                .copied()
                .filter(|t| spec.matches(t))
                .collect(),
        }
    }

    pub fn to_ledger(&self, provenance: Vec<String>) -> Ledger {
        Ledger::from_rows(self.rows.iter().map(|t| (*t).clone()).collect(), provenance)
    }
}

impl TransactionSource for LedgerView<'_> {
    fn transactions(&self) -> impl Iterator<Item = &Transaction> + '_ {
        self.rows.iter().copied()
    }
}

/// Row filter; every `None` field matches everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterSpec {
    pub entities: Option<Vec<String>>,
    pub directions: Option<Vec<Direction>>,
    /// Inclusive date range.
    pub date_from: Option<NaiveDate>,
    pub date_to: Option<NaiveDate>,
    pub min_abs_amount: Option<i64>,
}

impl FilterSpec {
    pub fn directions(dirs: &[Direction]) -> Self {
        FilterSpec {
            directions: Some(dirs.to_vec()),
            ..FilterSpec::default()
        }
    }

    pub fn matches(&self, t: &Transaction) -> bool {
        self.entities.as_ref().is_none_or(|e| e.contains(&t.entity))
            && self
                .directions
                .as_ref()
                .is_none_or(|d| d.contains(&direction_of(t)))
            && self.date_from.is_none_or(|d| t.date >= d)
            && self.date_to.is_none_or(|d| t.date <= d)
            && self
                .min_abs_amount
                .is_none_or(|m| t.amount_minor.unsigned_abs() >= m.unsigned_abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyKind {
    Supplier,
    ExpenseType,
    ExpenseArea,
    Entity,
}

impl KeyKind {
    pub fn key_of(self, t: &Transaction) -> &str {
        match self {
            KeyKind::Supplier => &t.supplier_key,
            KeyKind::ExpenseType => &t.expense_type,
            KeyKind::ExpenseArea => &t.expense_area,
            KeyKind::Entity => &t.entity,
        }
    }
}

impl fmt::Display for KeyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KeyKind::Supplier => "supplier",
            KeyKind::ExpenseType => "expense_type",
            KeyKind::ExpenseArea => "expense_area",
            KeyKind::Entity => "entity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub key: String,
    pub count: u64,
    pub amount_minor_sum: i128,
    pub amount_minor_abs_sum: u128,
}

/// Grouped totals, ordered by absolute amount descending then key ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub key_kind: KeyKind,
    pub rows: Vec<AggregateRow>,
}

impl AggregateTable {
    pub fn total_count(&self) -> u64 {
        self.rows.iter().map(|r| r.count).sum()
    }
}

/// Groups the matching transactions by `key_kind`.
///
/// `directions = None` includes both directions.
pub fn aggregate<S: TransactionSource + ?Sized>(
    source: &S,
    key_kind: KeyKind,
    directions: Option<&[Direction]>,
) -> AggregateTable {
    let mut groups: BTreeMap<&str, (u64, i128, u128)> = BTreeMap::new();
    for t in source.transactions() {
        if directions.is_some_and(|d| !d.contains(&direction_of(t))) {
            continue;
        }
        let g = groups.entry(key_kind.key_of(t)).or_insert((0, 0, 0));
        g.0 += 1;
        g.1 += t.amount_minor as i128;
        g.2 += t.amount_minor.unsigned_abs() as u128;
    }
    let mut rows: Vec<AggregateRow> = groups
        .into_iter()
        .map(|(k, (count, sum, abs))| AggregateRow {
            key: k.to_string(),
            count,
            amount_minor_sum: sum,
            amount_minor_abs_sum: abs,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.amount_minor_abs_sum
            .cmp(&a.amount_minor_abs_sum)
            .then_with(|| a.key.cmp(&b.key))
    });
    AggregateTable { key_kind, rows }
}

/// Count and sums for one slice of transactions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub count: u64,
    pub signed_sum: i128,
    pub abs_sum: u128,
}

impl Bucket {
    pub(crate) fn add(&mut self, amount: i64) {
        self.count += 1;
        self.signed_sum += amount as i128;
        self.abs_sum += amount.unsigned_abs() as u128;
    }

    pub fn merged(self, other: Bucket) -> Bucket {
        Bucket {
            count: self.count + other.count,
            signed_sum: self.signed_sum + other.signed_sum,
            abs_sum: self.abs_sum + other.abs_sum,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionTotals {
    pub all: Bucket,
    pub above: Bucket,
    pub below: Bucket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub threshold_minor: i64,
    pub rule: ThresholdRule,
    pub expenditure: DirectionTotals,
    pub income: DirectionTotals,
}

impl Totals {
    pub fn direction(&self, d: Direction) -> &DirectionTotals {
        match d {
            Direction::Expenditure => &self.expenditure,
            Direction::Income => &self.income,
        }
    }

    /// Both directions combined.
    pub fn combined(&self) -> DirectionTotals {
        DirectionTotals {
            all: self.expenditure.all.merged(self.income.all),
            above: self.expenditure.above.merged(self.income.above),
            below: self.expenditure.below.merged(self.income.below),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(i64),
    #[error("unsupported ledger format version {found} (expected {LEDGER_FORMAT_VERSION})")]
    Version { found: String },
    #[error("malformed ledger row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("ledger header promises {expected} rows, found {found}")]
    RowCount { expected: u64, found: u64 },
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for LedgerError {
    fn from(e: std::io::Error) -> Self {
        LedgerError::Io(e.to_string())
    }
}

/// Per-direction counts and sums split at `threshold_minor`.
pub fn totals<S: TransactionSource + ?Sized>(
    source: &S,
    threshold_minor: i64,
    rule: ThresholdRule,
) -> Result<Totals, LedgerError> {
    if threshold_minor <= 0 {
        return Err(LedgerError::InvalidThreshold(threshold_minor));
    }
    let mut out = Totals {
        threshold_minor,
        rule,
        expenditure: DirectionTotals::default(),
        income: DirectionTotals::default(),
    };
    for t in source.transactions() {
        let d = match direction_of(t) {
            Direction::Expenditure => &mut out.expenditure,
            Direction::Income => &mut out.income,
        };
        d.all.add(t.amount_minor);
        if rule.is_above(t.amount_minor, threshold_minor) {
            d.above.add(t.amount_minor);
        } else {
            d.below.add(t.amount_minor);
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LedgerHeader {
    format_version: serde_json::Value,
    created: Option<String>,
    row_count: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LedgerRecord {
    entity: String,
    date: NaiveDate,
    supplier: String,
    supplier_key: String,
    expense_type: String,
    expense_area: String,
    amount: String,
    source_file: String,
    row_number: u64,
}

/// Column order shared by the JSON records and the CSV export.
pub const LEDGER_COLUMNS: [&str; 9] = [
    "entity",
    "date",
    "supplier",
    "supplier_key",
    "expense_type",
    "expense_area",
    "amount",
    "source_file",
    "row_number",
];

impl From<&Transaction> for LedgerRecord {
    fn from(t: &Transaction) -> Self {
        LedgerRecord {
            entity: t.entity.clone(),
            date: t.date,
            supplier: t.supplier.clone(),
            supplier_key: t.supplier_key.clone(),
            expense_type: t.expense_type.clone(),
            expense_area: t.expense_area.clone(),
            amount: format_amount(t.amount_minor),
            source_file: t.source_file.clone(),
            row_number: t.row_number,
        }
    }
}

/// Writes the canonical NDJSON form. `created` is an optional caller-supplied
/// stamp; leaving it `None` keeps the output byte-deterministic.
pub fn write_ledger<W: Write>(
    ledger: &Ledger,
    created: Option<&str>,
    out: W,
) -> Result<(), LedgerError> {
    let mut w = BufWriter::new(out);
    let header = LedgerHeader {
        format_version: LEDGER_FORMAT_VERSION.into(),
        created: created.map(str::to_string),
        row_count: ledger.len() as u64,
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| LedgerError::Io(e.to_string()))?;
    w.write_all(b"\n")?;
    for t in ledger.rows() {
        serde_json::to_writer(&mut w, &LedgerRecord::from(t))
            .map_err(|e| LedgerError::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ledger_file(
    ledger: &Ledger,
    created: Option<&str>,
    path: &Path,
) -> Result<(), LedgerError> {
    write_ledger(ledger, created, std::fs::File::create(path)?)
}

/// Reads the NDJSON form back. Rows are re-sorted canonically.
pub fn read_ledger<R: std::io::Read>(input: R) -> Result<Ledger, LedgerError> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| LedgerError::MalformedRow {
        line: 1,
        reason: "missing header".into(),
    })?;
    let header: LedgerHeader =
        serde_json::from_str(&first?).map_err(|e| LedgerError::MalformedRow {
            line: 1,
            reason: format!("header: {e}"),
        })?;
    if header.format_version != LEDGER_FORMAT_VERSION {
        return Err(LedgerError::Version {
            found: header.format_version.to_string(),
        });
    }
    let mut rows = Vec::with_capacity(header.row_count.min(1 << 24) as usize);
    let mut provenance = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let bad = |reason: String| LedgerError::MalformedRow {
            line: lineno,
            reason,
        };
        let rec: LedgerRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let amount_minor = crate::ingest::parse_amount_strict(&rec.amount).ok_or_else(|| {
            bad(format!(
                "amount `{}` is not a two-decimal value",
                rec.amount
            ))
        })?;
        if amount_minor == 0 {
            return Err(bad("zero amount".into()));
        }
        if rec.row_number == 0 {
            return Err(bad("row_number must be at least 1".into()));
        }
        provenance.push(rec.source_file.clone());
        rows.push(Transaction {
            entity: rec.entity,
            date: rec.date,
            supplier: rec.supplier,
            supplier_key: rec.supplier_key,
            expense_type: rec.expense_type,
            expense_area: rec.expense_area,
            amount_minor,
            source_file: rec.source_file,
            row_number: rec.row_number,
        });
    }
    if rows.len() as u64 != header.row_count {
        return Err(LedgerError::RowCount {
            expected: header.row_count,
            found: rows.len() as u64,
        });
    }
    Ok(Ledger::from_rows(rows, provenance))
}

pub fn read_ledger_file(path: &Path) -> Result<Ledger, LedgerError> {
    let f = std::fs::File::open(path)
        .map_err(|e| LedgerError::Io(format!("{}: {e}", path.display())))?;
    read_ledger(f)
}

/// CSV export with the same columns as the JSON records.
pub fn write_ledger_csv<W: Write>(ledger: &Ledger, out: W) -> Result<(), LedgerError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| LedgerError::Io(e.to_string());
    w.write_record(LEDGER_COLUMNS).map_err(io)?;
    for t in ledger.rows() {
        let date = t.date.to_string();
        let amount = format_amount(t.amount_minor);
        let row = t.row_number.to_string();
        w.write_record([
            t.entity.as_str(),
            &date,
            &t.supplier,
            &t.supplier_key,
            &t.expense_type,
            &t.expense_area,
            &amount,
            &t.source_file,
            &row,
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
