//! Public-spend ledger analysis.
//!
//! * [`ingest`] normalizes heterogeneous delimited spend files into [`Transaction`]s.
//! * [`ledger`] stores them canonically and aggregates by supplier, expense type,
//!   expense area or reporting entity.
//! * [`transparency`] computes excess-transparency indices, threshold splits,
//!   top-k shares and log-binned amount histograms.
//! * [`rankfit`] builds rank-order series and fits power-law and segmented
//!   (broken-line) models in log-log space, with a Davies-type breakpoint test
//!   and AIC selection.
//! * [`genmodels`] fits the three-parameter rank law `A (N+1-r)^b / r^a` and its
//!   five-parameter extension `A (N+1-r+d)^b / (r+c)^a`.
//! * [`synth`] provides seeded generators for every model family.
//!
//! The fitting code is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases below name the `f64` instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod genmodels;
pub mod ingest;
pub mod ledger;
pub mod linalg;
pub mod rankfit;
pub mod scalar;
pub mod synth;
pub mod transparency;

pub use ingest::{IngestError, IngestReport, RawFileProfile, Transaction};
pub use ledger::{AggregateTable, Direction, KeyKind, Ledger, LedgerError, ThresholdRule};
pub use scalar::Real;

/// Default disclosure threshold: £25,000 in pence.
pub const DEFAULT_THRESHOLD_MINOR: i64 = 2_500_000;

pub type RankSeries = rankfit::RankSeries<f64>;
pub type PowerFit = rankfit::PowerFit<f64>;
pub type SegmentedFit = rankfit::SegmentedFit<f64>;
pub type DaviesResult = rankfit::DaviesResult<f64>;
pub type GenFit = genmodels::GenFit<f64>;
pub type ModelTable = genmodels::ModelTable<f64>;

pub type RankSeriesF32 = rankfit::RankSeries<f32>;
pub type PowerFitF32 = rankfit::PowerFit<f32>;
pub type SegmentedFitF32 = rankfit::SegmentedFit<f32>;
pub type GenFitF32 = genmodels::GenFit<f32>;
