use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// The six columns every publisher layout is mapped onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalField {
    Entity,
    Date,
    Supplier,
    ExpenseType,
    ExpenseArea,
    Amount,
}

impl CanonicalField {
    pub const ALL: [CanonicalField; 6] = [
        CanonicalField::Entity,
        CanonicalField::Date,
        CanonicalField::Supplier,
        CanonicalField::ExpenseType,
        CanonicalField::ExpenseArea,
        CanonicalField::Amount,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CanonicalField::Entity => "entity",
            CanonicalField::Date => "date",
            CanonicalField::Supplier => "supplier",
            CanonicalField::ExpenseType => "expense_type",
            CanonicalField::ExpenseArea => "expense_area",
            CanonicalField::Amount => "amount",
        }
    }
}

impl fmt::Display for CanonicalField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateOrder {
    DayFirst,
    YearFirst,
}

/// Optional separate direction column (for publishers that do not sign amounts).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionColumn {
    pub synonyms: Vec<String>,
    /// Cell values (case-insensitive) that mark a row as incoming money.
    pub income_values: Vec<String>,
}

/// Describes how to read one family of publisher files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFileProfile {
    pub column_synonyms: BTreeMap<CanonicalField, Vec<String>>,
    pub date_order: DateOrder,
    #[serde(default = "default_decimal")]
    pub decimal_separator: char,
    #[serde(default = "default_scan_rows")]
    pub max_header_scan_rows: usize,
    /// Reporting body used for every row; overrides any entity column.
    #[serde(default)]
    pub entity_override: Option<String>,
    #[serde(default)]
    pub direction_column: Option<DirectionColumn>,
}

fn default_decimal() -> char {
    '.'
}

fn default_scan_rows() -> usize {
    20
}

impl Default for RawFileProfile {
    /// Column names used by the standard UK over-£25k spend publications.
    fn default() -> Self {
        let mut column_synonyms = BTreeMap::new();
        let mut put = |f: CanonicalField, names: &[&str]| {
            column_synonyms.insert(f, names.iter().map(|s| s.to_string()).collect());
        };
        put(
            CanonicalField::Entity,
            &[
                "entity",
                "department family",
                "department",
                "organisation",
                "organisation name",
                "body name",
                "icb",
                "icb name",
                "commissioner",
            ],
        );
        put(
            CanonicalField::Date,
            &[
                "date",
                "payment date",
                "transaction date",
                "date of payment",
                "invoice date",
                "posted date",
                "paid date",
            ],
        );
        put(
            CanonicalField::Supplier,
            &[
                "supplier",
                "supplier name",
                "merchant name",
                "vendor",
                "vendor name",
                "payee",
                "beneficiary",
            ],
        );
        put(
            CanonicalField::ExpenseType,
            &[
                "expense type",
                "expenditure type",
                "account description",
                "cost type",
            ],
        );
        put(
            CanonicalField::ExpenseArea,
            &[
                "expense area",
                "expenditure area",
                "cost centre",
                "cost center",
                "service area",
            ],
        );
        put(
            CanonicalField::Amount,
            &[
                "amount",
                "amount (£)",
                "amount £",
                "amount gbp",
                "value",
                "value (£)",
                "net amount",
                "total",
                "transaction amount",
                "ap amount",
            ],
        );
        RawFileProfile {
            column_synonyms,
            date_order: DateOrder::DayFirst,
            decimal_separator: '.',
            max_header_scan_rows: default_scan_rows(),
            entity_override: None,
            direction_column: None,
        }
    }
}

impl RawFileProfile {
    /// Loads a profile from JSON and checks its invariants.
    ///
    /// Synonym lists given in the file are merged into the defaults, so a profile
    /// only needs to list the extra header spellings it cares about.
    pub fn from_json_str(text: &str) -> Result<Self, IngestError> {
        let overlay: ProfileFile =
            serde_json::from_str(text).map_err(|e| IngestError::InvalidProfile(e.to_string()))?;
        let mut profile = RawFileProfile::default();
        for (field, names) in overlay.column_synonyms {
            let entry = profile.column_synonyms.entry(field).or_default();
            for n in names {
                if !entry
                    .iter()
                    .any(|e| normalize_header(e) == normalize_header(&n))
                {
                    entry.push(n);
                }
            }
        }
        if let Some(o) = overlay.date_order {
            profile.date_order = o;
        }
        if let Some(d) = overlay.decimal_separator {
            profile.decimal_separator = d;
        }
        if let Some(m) = overlay.max_header_scan_rows {
            profile.max_header_scan_rows = m;
        }
        profile.entity_override = overlay.entity_override;
        profile.direction_column = overlay.direction_column;
        profile.validate()?;
        Ok(profile)
    }

    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::File {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        for f in CanonicalField::ALL {
            if self.column_synonyms.get(&f).is_none_or(|v| v.is_empty()) {
                return Err(IngestError::InvalidProfile(format!(
                    "no synonyms for field `{f}`"
                )));
            }
        }
        if self.max_header_scan_rows == 0 {
            return Err(IngestError::InvalidProfile(
                "max_header_scan_rows must be at least 1".into(),
            ));
        }
        if !matches!(self.decimal_separator, '.' | ',') {
            return Err(IngestError::InvalidProfile(format!(
                "unsupported decimal separator `{}`",
                self.decimal_separator
            )));
        }
        Ok(())
    }

    /// Matches a header cell against the synonym table.
    pub fn field_for_header(&self, cell: &str) -> Option<CanonicalField> {
        let key = normalize_header(cell);
        if key.is_empty() {
            return None;
        }
        CanonicalField::ALL.into_iter().find(|f| {
            self.column_synonyms
                .get(f)
                .is_some_and(|names| names.iter().any(|n| normalize_header(n) == key))
        })
    }
}

/// On-disk form: every key optional so files can be partial overlays.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    #[serde(default)]
    column_synonyms: BTreeMap<CanonicalField, Vec<String>>,
    date_order: Option<DateOrder>,
    decimal_separator: Option<char>,
    max_header_scan_rows: Option<usize>,
    #[serde(default)]
    entity_override: Option<String>,
    #[serde(default)]
    direction_column: Option<DirectionColumn>,
}

/// Lowercases, strips a BOM and collapses internal whitespace.
pub fn normalize_header(s: &str) -> String {
    s.trim_start_matches('\u{feff}')
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}
