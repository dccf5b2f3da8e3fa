use serde::{Deserialize, Serialize};

use super::{RankFitError, RankedData};
use crate::ledger::AggregateTable;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Number of transactions per key.
    Count,
    /// Signed sum per key, in pounds.
    Amount,
}

/// Positive values sorted descending; rank `r` is position `r - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSeries<T> {
    pub labels: Vec<String>,
    pub values: Vec<T>,
    pub metric: Metric,
    pub dropped_nonpositive: usize,
}

impl<T: Real> RankSeries<T> {
    /// Sorts by value descending, ties by label ascending, dropping values
    /// that are not positive and finite.
    pub fn from_pairs<I>(pairs: I, metric: Metric) -> Result<Self, RankFitError>
    where
        I: IntoIterator<Item = (String, T)>,
    {
        let mut dropped = 0;
        let mut kept: Vec<(String, T)> = Vec::new();
        for (label, v) in pairs {
            if v > T::zero() && v.is_finite() {
                kept.push((label, v));
            } else {
                dropped += 1;
            }
        }
        if kept.is_empty() {
            return Err(RankFitError::AllNonPositive { dropped });
        }
        kept.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("finite")
                .then_with(|| a.0.cmp(&b.0))
        });
        let (labels, values) = kept.into_iter().unzip();
        Ok(RankSeries {
            labels,
            values,
            metric,
            dropped_nonpositive: dropped,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Every value multiplied by `s`.
    pub fn scaled(&self, s: T) -> Self {
        RankSeries {
            values: self.values.iter().map(|v| *v * s).collect(),
            ..self.clone()
        }
    }
}

impl<T: Real> RankedData<T> for RankSeries<T> {
    fn rank_values(&self) -> &[T] {
        &self.values
    }
}

/// Rank-orders an aggregate table by transaction count or signed amount.
pub fn rank_series<T: Real>(
    table: &AggregateTable,
    metric: Metric,
) -> Result<RankSeries<T>, RankFitError> {
    RankSeries::from_pairs(
        table.rows.iter().map(|r| {
            let v = match metric {
                Metric::Count => T::from_u64(r.count).unwrap_or(T::infinity()),
                Metric::Amount => {
                    T::from_f64(r.amount_minor_sum as f64 / 100.0).unwrap_or(T::nan())
                }
            };
            (r.key.clone(), v)
        }),
        metric,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{AggregateRow, KeyKind};

    fn table(rows: &[(&str, u64, i128)]) -> AggregateTable {
        AggregateTable {
            key_kind: KeyKind::Supplier,
            rows: rows
                .iter()
                .map(|(k, c, s)| AggregateRow {
                    key: k.to_string(),
                    count: *c,
                    amount_minor_sum: *s,
                    amount_minor_abs_sum: s.unsigned_abs(),
                })
                .collect(),
        }
    }

    #[test]
    fn ties_broken_by_key() {
        let s: RankSeries<f64> = rank_series(
            &table(&[("A", 5, 1), ("B", 9, 1), ("C", 5, 1)]),
            Metric::Count,
        )
        .unwrap();
        assert_eq!(s.labels, ["B", "A", "C"]);
        assert_eq!(s.values, [9.0, 5.0, 5.0]);
    }

    #[test]
    fn single_row() {
        let s: RankSeries<f32> = rank_series(&table(&[("A", 1, 1)]), Metric::Count).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn signed_amounts_drop_nonpositive() {
        let s: RankSeries<f64> = rank_series(
            &table(&[("A", 1, 100_00), ("B", 1, -50_00)]),
            Metric::Amount,
        )
        .unwrap();
        assert_eq!(s.labels, ["A"]);
        assert_eq!(s.values, [100.0]);
        assert_eq!(s.dropped_nonpositive, 1);

        let err = rank_series::<f64>(&table(&[("B", 1, -50_00)]), Metric::Amount).unwrap_err();
        assert_eq!(err, RankFitError::AllNonPositive { dropped: 1 });
        assert!(rank_series::<f64>(&table(&[]), Metric::Count).is_err());
    }
}
