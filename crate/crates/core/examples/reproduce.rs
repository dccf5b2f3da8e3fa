//! Checks reference figures against a ledger built from the NHS England and
//! Integrated Care Board over-£25k spend files (spreadsheets converted to CSV).
//!
//! ```text
//! spendlens ingest --input nhs_csv/ --out nhs.ndjson
//! cargo run --release -p spendlens-core --example reproduce -- nhs.ndjson
//! ```
//!
//! Publishers revise and withdraw files, so small differences are expected;
//! every check prints the observed value next to the reference.

use std::path::Path;
use std::process::ExitCode;

use spendlens::ledger::{aggregate, read_ledger_file, totals};
use spendlens::rankfit::{fit_segmented, rank_series, Metric, SegmentOptions};
use spendlens::transparency::{top_share, ShareMetric};
use spendlens::{KeyKind, RankSeries, ThresholdRule, DEFAULT_THRESHOLD_MINOR};

fn report(name: &str, observed: f64, reference: f64, ok: bool) -> bool {
    println!(
        "{:<34} observed {observed:>14.4}  reference {reference:>14.4}  {}",
        name,
        if ok { "ok" } else { "DIFFERS" }
    );
    ok
}

fn main() -> ExitCode {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: reproduce <ledger.ndjson>");
        return ExitCode::from(4);
    };
    let ledger = match read_ledger_file(Path::new(&path)) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("{path}: {e}");
            return ExitCode::from(2);
        }
    };
    let t = totals(&ledger, DEFAULT_THRESHOLD_MINOR, ThresholdRule::AtLeast)
        .expect("positive threshold")
        .combined();
    let mut ok = true;
    ok &= report(
        "entries",
        t.all.count as f64,
        1_956_196.0,
        t.all.count == 1_956_196,
    );
    ok &= report(
        "entries at or above threshold",
        t.above.count as f64,
        665_231.0,
        t.above.count == 665_231,
    );
    ok &= report(
        "entries below threshold",
        t.below.count as f64,
        1_290_965.0,
        t.below.count == 1_290_965,
    );

    let types = aggregate(&ledger, KeyKind::ExpenseType, None);
    if let Ok(top) = top_share(&types, 5, ShareMetric::SignedAmount) {
        let pct = top.share * 100.0;
        ok &= report(
            "top-5 expense type amount share %",
            pct,
            70.77,
            (pct - 70.77).abs() <= 0.01,
        );
    }

    let suppliers = aggregate(&ledger, KeyKind::Supplier, None);
    for (metric, reference, name) in [
        (Metric::Count, 5900.0, "supplier count breakpoint rank"),
        (Metric::Amount, 221.0, "supplier amount breakpoint rank"),
    ] {
        let series: RankSeries = match rank_series(&suppliers, metric) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("{name}: {e}");
                ok = false;
                continue;
            }
        };
        match fit_segmented(&series, 1, SegmentOptions::default()) {
            Ok(fit) => {
                let rank = fit.breakpoint_ranks()[0];
                ok &= report(
                    name,
                    rank,
                    reference,
                    (rank / reference - 1.0).abs() <= 0.15,
                );
            }
            Err(e) => {
                eprintln!("{name}: {e}");
                ok = false;
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
