//! Excess-transparency indices and threshold statistics.
//!
//! For a reporting entity and a disclosure threshold, the count index is the
//! number of published records divided by the number at or above the
//! threshold, and the amount index is the published total divided by the
//! total at or above the threshold. A value of 1 means the entity published
//! exactly what the threshold requires.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{
    direction_of, totals, AggregateRow, AggregateTable, Bucket, Direction, LedgerError,
    ThresholdRule, TransactionSource,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransparencyError {
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(i64),
    #[error("aggregate table is empty")]
    EmptyTable,
    #[error("metric total is zero; share undefined")]
    ZeroTotal,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("bins_per_decade must be at least 1")]
    InvalidBins,
    #[error("no transactions to histogram")]
    NoData,
}

impl From<LedgerError> for TransparencyError {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::InvalidThreshold(t) => TransparencyError::InvalidThreshold(t),
            other => unreachable!("totals only fails on the threshold: {other}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexDirection {
    Income,
    Expenditure,
    All,
}

impl IndexDirection {
    pub const ORDER: [IndexDirection; 3] = [
        IndexDirection::Income,
        IndexDirection::Expenditure,
        IndexDirection::All,
    ];
}

impl fmt::Display for IndexDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexDirection::Income => "income",
            IndexDirection::Expenditure => "expenditure",
            IndexDirection::All => "all",
        })
    }
}

/// One entity's indices in one direction. `None` marks an undefined index
/// (nothing at or above the threshold); such rows are still emitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransparencyIndex {
    pub entity: String,
    pub direction: IndexDirection,
    pub n_all: u64,
    pub n_above: u64,
    pub count_index: Option<f64>,
    pub amount_index: Option<f64>,
}

impl TransparencyIndex {
    pub fn defined(&self) -> bool {
        self.count_index.is_some() && self.amount_index.is_some()
    }
}

/// Exact ratio of two integers as `f64`; reducing by the gcd first makes the
/// result independent of any common scale factor.
fn ratio(num: i128, den: i128) -> Option<f64> {
    if den == 0 {
        return None;
    }
    let g = num.gcd(&den);
    let (n, d) = if g == 0 {
        (num, den)
    } else {
        (num / g, den / g)
    };
    Some(n as f64 / d as f64)
}

fn single_direction(
    entity: &str,
    direction: IndexDirection,
    b_all: Bucket,
    b_above: Bucket,
) -> TransparencyIndex {
    let defined = b_above.count > 0;
    TransparencyIndex {
        entity: entity.to_string(),
        direction,
        n_all: b_all.count,
        n_above: b_above.count,
        count_index: defined
            .then(|| ratio(b_all.count as i128, b_above.count as i128))
            .flatten(),
        amount_index: defined
            .then(|| ratio(b_all.abs_sum as i128, b_above.abs_sum as i128))
            .flatten(),
    }
}

/// Computes income, expenditure and all-direction indices for every entity.
///
/// Single-direction amount indices use absolute sums. The all-direction amount
/// index uses signed sums (expenditure positive, income negative), so it falls
/// below 1 only when an entity publishes income below the threshold.
pub fn excess_indices<S: TransactionSource + ?Sized>(
    source: &S,
    threshold_minor: i64,
    rule: ThresholdRule,
) -> Result<Vec<TransparencyIndex>, TransparencyError> {
    if threshold_minor <= 0 {
        return Err(TransparencyError::InvalidThreshold(threshold_minor));
    }
    // entity -> [expenditure all, expenditure above, income all, income above]
    let mut per_entity: BTreeMap<&str, [Bucket; 4]> = BTreeMap::new();
    for t in source.transactions() {
        let b = per_entity.entry(t.entity.as_str()).or_default();
        let base = match direction_of(t) {
            Direction::Expenditure => 0,
            Direction::Income => 2,
        };
        b[base].add(t.amount_minor);
        if rule.is_above(t.amount_minor, threshold_minor) {
            b[base + 1].add(t.amount_minor);
        }
    }

    let mut out = Vec::with_capacity(per_entity.len() * 3);
    for (entity, [exp_all, exp_above, inc_all, inc_above]) in per_entity {
        out.push(single_direction(
            entity,
            IndexDirection::Income,
            inc_all,
            inc_above,
        ));
        out.push(single_direction(
            entity,
            IndexDirection::Expenditure,
            exp_all,
            exp_above,
        ));

        let all = exp_all.merged(inc_all);
        let above = exp_above.merged(inc_above);
        let count_index = if above.count > 0 {
            ratio(all.count as i128, above.count as i128)
        } else {
            None
        };
        let amount_index = if above.count > 0 {
            ratio(all.signed_sum, above.signed_sum)
        } else {
            None
        };
        out.push(TransparencyIndex {
            entity: entity.to_string(),
            direction: IndexDirection::All,
            n_all: all.count,
            n_above: above.count,
            count_index,
            amount_index,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSide {
    pub count: u64,
    pub abs_sum: u128,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdSplit {
    pub above: SplitSide,
    pub below: SplitSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdSplits {
    pub expenditure: ThresholdSplit,
    pub income: ThresholdSplit,
}

/// Partitions each direction into at/above and below the threshold.
pub fn threshold_split<S: TransactionSource + ?Sized>(
    source: &S,
    threshold_minor: i64,
    rule: ThresholdRule,
) -> Result<ThresholdSplits, TransparencyError> {
    let t = totals(source, threshold_minor, rule)?;
    let side = |b: Bucket| SplitSide {
        count: b.count,
        abs_sum: b.abs_sum,
    };
    let split = |d: Direction| ThresholdSplit {
        above: side(t.direction(d).above),
        below: side(t.direction(d).below),
    };
    Ok(ThresholdSplits {
        expenditure: split(Direction::Expenditure),
        income: split(Direction::Income),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareMetric {
    Count,
    SignedAmount,
}

impl ShareMetric {
    fn value(self, row: &AggregateRow) -> i128 {
        match self {
            ShareMetric::Count => row.count as i128,
            ShareMetric::SignedAmount => row.amount_minor_sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopShare {
    pub share: f64,
    pub rows: Vec<AggregateRow>,
}

/// Share of the metric held by the top `k` keys.
pub fn top_share(
    table: &AggregateTable,
    k: usize,
    metric: ShareMetric,
) -> Result<TopShare, TransparencyError> {
    if k == 0 {
        return Err(TransparencyError::InvalidK);
    }
    if table.rows.is_empty() {
        return Err(TransparencyError::EmptyTable);
    }
    let mut rows = table.rows.clone();
    rows.sort_by(|a, b| {
        metric
            .value(b)
            .cmp(&metric.value(a))
            .then_with(|| a.key.cmp(&b.key))
    });
    let total: i128 = rows.iter().map(|r| metric.value(r)).sum();
    if total == 0 {
        return Err(TransparencyError::ZeroTotal);
    }
    rows.truncate(k);
    let top: i128 = rows.iter().map(|r| metric.value(r)).sum();
    Ok(TopShare {
        share: ratio(top, total).expect("nonzero total"),
        rows,
    })
}

/// Counts of `log10(|amount| in pounds)` in equal-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub threshold_marker: f64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Log-binned histogram of absolute amounts, from the decade containing the
/// smallest amount through the decade containing the largest.
pub fn amount_histogram<S: TransactionSource + ?Sized>(
    source: &S,
    directions: Option<&[Direction]>,
    bins_per_decade: usize,
) -> Result<Histogram, TransparencyError> {
    if bins_per_decade == 0 {
        return Err(TransparencyError::InvalidBins);
    }
    let amounts: Vec<u64> = source
        .transactions()
        .filter(|t| directions.is_none_or(|d| d.contains(&direction_of(t))))
        .map(|t| t.amount_minor.unsigned_abs())
        .filter(|a| *a > 0)
        .collect();
    let (min, max) = match (amounts.iter().min(), amounts.iter().max()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(TransparencyError::NoData),
    };
    let lo = decade_floor(min);
    let hi = decade_floor(max) + 1;
    let nbins = ((hi - lo) as usize) * bins_per_decade;
    let bpd = bins_per_decade as f64;
    let bin_edges: Vec<f64> = (0..=nbins).map(|i| lo as f64 + i as f64 / bpd).collect();
    let mut counts = vec![0u64; nbins];
    for a in amounts {
        let x = pounds_log10(a);
        let mut i = (((x - lo as f64) * bpd).floor().max(0.0) as usize).min(nbins - 1);
        // Guard the edges against log rounding.
        if i + 1 < nbins && x >= bin_edges[i + 1] {
            i += 1;
        } else if i > 0 && x < bin_edges[i] {
            i -= 1;
        }
        counts[i] += 1;
    }
    Ok(Histogram {
        bin_edges,
        counts,
        threshold_marker: pounds_log10(crate::DEFAULT_THRESHOLD_MINOR as u64),
    })
}

fn pounds_log10(minor: u64) -> f64 {
    (minor as f64 / 100.0).log10()
}

/// Largest integer `e` with `10^e <= minor / 100`, computed exactly.
fn decade_floor(minor: u64) -> i32 {
    // minor >= 1 pence, i.e. >= 10^-2 pounds.
    let mut e = -2;
    let mut p: u128 = 1;
    while p * 10 <= minor as u128 {
        p *= 10;
        e += 1;
    }
    e
}
