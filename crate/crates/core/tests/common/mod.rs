#![allow(dead_code)]

use chrono::NaiveDate;
use spendlens::{Ledger, Transaction};

pub fn tx(entity: &str, supplier: &str, amount_minor: i64, row: u64) -> Transaction {
    Transaction {
        entity: entity.into(),
        date: NaiveDate::from_ymd_opt(2023, 1, 1 + (row % 28) as u32).unwrap(),
        supplier: supplier.into(),
        supplier_key: supplier.to_uppercase(),
        expense_type: "GOODS".into(),
        expense_area: "AREA".into(),
        amount_minor,
        source_file: "fixture.csv".into(),
        row_number: row,
    }
}

/// One entity, one supplier per row.
pub fn ledger_of(entity: &str, amounts: &[i64]) -> Ledger {
    let rows = amounts
        .iter()
        .enumerate()
        .map(|(i, a)| tx(entity, &format!("s{i}"), *a, i as u64 + 1))
        .collect();
    Ledger::from_rows(rows, vec!["fixture.csv".into()])
}

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}
