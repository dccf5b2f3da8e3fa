use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/ingest")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spendlens"))
        .args(args)
        .env_remove("SPENDLENS_THREADS")
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Ingests the three-file fixture into `dir/ledger.ndjson`.
fn fixture_ledger(dir: &Path) -> PathBuf {
    let ledger = dir.join("ledger.ndjson");
    assert_eq!(
        code(&["ingest", "--input", s(&fixture_dir()), "--out", s(&ledger)]),
        0
    );
    ledger
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn assert_svg(p: &Path) {
    let text = fs::read_to_string(p).unwrap();
    let doc = roxmltree::Document::parse(&text).expect("well-formed SVG");
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert!(root.attribute("width").unwrap().parse::<u32>().unwrap() > 0);
    assert!(root.attribute("height").unwrap().parse::<u32>().unwrap() > 0);
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn ingest_fixture_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let ledger = fixture_ledger(tmp.path());
    let expected = fs::read(fixture_dir().join("../ingest_expected.ndjson")).unwrap();
    assert_eq!(fs::read(&ledger).unwrap(), expected);
    let report = fs::read_to_string(tmp.path().join("ledger.ndjson.report.csv")).unwrap();
    assert!(report.starts_with("file,rows_read,rows_kept,rows_dropped"));
    assert_eq!(report.lines().count(), 4);
}

#[test]
fn ingest_empty_directory_is_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(
        code(&[
            "ingest",
            "--input",
            s(&empty),
            "--out",
            s(&tmp.path().join("l"))
        ]),
        2
    );
    assert_eq!(
        code(&[
            "ingest",
            "--input",
            s(&tmp.path().join("missing")),
            "--out",
            s(&tmp.path().join("l"))
        ]),
        2
    );
}

#[test]
fn ingest_flags_corrupt_file() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    fs::create_dir(&input).unwrap();
    fs::copy(
        fixture_dir().join("north_trust.csv"),
        input.join("good.csv"),
    )
    .unwrap();
    fs::write(
        input.join("corrupt.csv"),
        "\u{0}\u{1}garbage\nmore,garbage\n",
    )
    .unwrap();
    let ledger = tmp.path().join("l.ndjson");
    let report = tmp.path().join("report.csv");
    assert_eq!(
        code(&[
            "ingest",
            "--input",
            s(&input),
            "--out",
            s(&ledger),
            "--report",
            s(&report),
            "--entity",
            "Trust"
        ]),
        0
    );
    let rows = csv_rows(&report);
    let corrupt = rows.iter().find(|r| r[0] == "corrupt.csv").unwrap();
    assert!(
        !corrupt.last().unwrap().is_empty(),
        "error column set: {corrupt:?}"
    );
    let good = rows.iter().find(|r| r[0] == "good.csv").unwrap();
    assert_eq!(good[2], "4");
    assert!(fs::read_to_string(&ledger)
        .unwrap()
        .contains(r#""entity":"Trust""#));
}

#[test]
fn indices_match_hand_computation() {
    let tmp = tempfile::tempdir().unwrap();
    let ledger = fixture_ledger(tmp.path());
    let out = tmp.path().join("indices.csv");
    assert_eq!(
        code(&["indices", "--ledger", s(&ledger), "--out", s(&out)]),
        0
    );
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 9);
    let get = |entity: &str, dir: &str| {
        rows.iter()
            .find(|r| r[0] == entity && r[1] == dir)
            .unwrap()
            .clone()
    };
    let num = |v: &str| v.parse::<f64>().unwrap();

    // North Trust: 30,000.00 above; 1,234.56 and 140.00 below; income 500.00 below.
    let r = get("North Trust", "expenditure");
    assert_eq!((r[2].as_str(), r[3].as_str()), ("3", "1"));
    assert_eq!(num(&r[4]), 3.0);
    assert!((num(&r[5]) - 3_137_456.0 / 3_000_000.0).abs() < 1e-12);
    let r = get("North Trust", "all");
    assert_eq!(num(&r[4]), 4.0);
    assert!((num(&r[5]) - 3_087_456.0 / 3_000_000.0).abs() < 1e-12);
    let r = get("North Trust", "income");
    assert_eq!(
        (r[4].as_str(), r[5].as_str(), r[6].as_str()),
        ("", "", "false")
    );

    // south_board: 25,000.00 sits exactly on the threshold; income 2,500.00 below.
    let r = get("south_board", "expenditure");
    assert_eq!((num(&r[4]), num(&r[5])), (1.0, 1.0));
    assert!((num(&get("south_board", "all")[5]) - 0.9).abs() < 1e-12);
    assert!((num(&get("East Council", "all")[5]) - 2_570_050.0 / 2_600_050.0).abs() < 1e-12);
}

#[test]
fn threshold_of_one_penny_gives_unit_indices() {
    let tmp = tempfile::tempdir().unwrap();
    let ledger = tmp.path().join("synth.ndjson");
    let series = tmp.path().join("synth.csv");
    assert_eq!(
        code(&[
            "synth",
            "--family",
            "power",
            "--n",
            "40",
            "--out",
            s(&series),
            "--ledger-out",
            s(&ledger),
        ]),
        0
    );
    let out = tmp.path().join("i.csv");
    assert_eq!(
        code(&[
            "indices",
            "--ledger",
            s(&ledger),
            "--threshold",
            "1",
            "--out",
            s(&out)
        ]),
        0
    );
    for r in csv_rows(&out).iter().filter(|r| r[1] != "income") {
        assert_eq!((r[4].as_str(), r[5].as_str()), ("1", "1"), "{r:?}");
    }
}

#[test]
fn indices_missing_ledger_is_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&[
            "indices",
            "--ledger",
            s(&tmp.path().join("nope")),
            "--out",
            s(&tmp.path().join("o.csv"))
        ]),
        2
    );
}

#[test]
fn rankfit_two_regime_ledger() {
    let tmp = tempfile::tempdir().unwrap();
    let ledger = tmp.path().join("two.ndjson");
    let series = tmp.path().join("two.csv");
    assert_eq!(
        code(&[
            "synth",
            "--family",
            "segmented",
            "--n",
            "1000",
            "--out",
            s(&series),
            "--ledger-out",
            s(&ledger),
        ]),
        0
    );
    let out = tmp.path().join("fit.json");
    let plot = tmp.path().join("fit.svg");
    let args = [
        "rankfit",
        "--ledger",
        s(&ledger),
        "--group",
        "supplier",
        "--metric",
        "count",
        "--model",
        "segmented",
        "--max-breakpoints",
        "1",
        "--out",
        s(&out),
        "--plot",
        s(&plot),
    ];
    assert_eq!(code(&args), 0);
    let v = read_json(&out);
    assert_eq!(v["fit"]["k"], 1);
    assert_eq!(v["n"], 1000);
    let bp = v["fit"]["breakpoints_rank"][0].as_f64().unwrap();
    assert!((bp / 100.0 - 1.0).abs() < 0.15, "breakpoint at rank {bp}");
    assert!(v["fit"]["davies"]["p_bound"].as_f64().unwrap() < 1e-6);
    assert_svg(&plot);

    let first = (fs::read(&out).unwrap(), fs::read(&plot).unwrap());
    assert_eq!(code(&args), 0);
    assert_eq!(first, (fs::read(&out).unwrap(), fs::read(&plot).unwrap()));
}

#[test]
fn rankfit_dgbd_series_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let series = tmp.path().join("dgbd.csv");
    assert_eq!(
        code(&[
            "synth",
            "--family",
            "dgbd",
            "--n",
            "300",
            "--out",
            s(&series)
        ]),
        0
    );
    let out = tmp.path().join("fit.json");
    assert_eq!(
        code(&[
            "rankfit",
            "--series",
            s(&series),
            "--model",
            "dgbd",
            "--out",
            s(&out)
        ]),
        0
    );
    let fit = &read_json(&out)["fit"];
    assert!((fit["A"].as_f64().unwrap() / 1000.0 - 1.0).abs() < 1e-9);
    assert!((fit["a"].as_f64().unwrap() - 0.8).abs() < 1e-9);
    assert!((fit["b"].as_f64().unwrap() - 0.3).abs() < 1e-9);
}

#[test]
fn rankfit_reports_dropped_net_negative_supplier() {
    let tmp = tempfile::tempdir().unwrap();
    let ledger = fixture_ledger(tmp.path());
    let out = tmp.path().join("fit.json");
    let plot = tmp.path().join("fit.svg");
    assert_eq!(
        code(&[
            "rankfit",
            "--ledger",
            s(&ledger),
            "--group",
            "supplier",
            "--metric",
            "amount",
            "--direction",
            "all",
            "--out",
            s(&out),
            "--plot",
            s(&plot),
            "--axes",
            "log-linear",
        ]),
        0
    );
    let v = read_json(&out);
    assert_eq!(v["dropped_nonpositive"], 1);
    assert_eq!(v["n"], 3);
    assert_svg(&plot);
}

#[test]
fn rankfit_analysis_failures_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let ledger = fixture_ledger(tmp.path());
    let l = s(&ledger);
    assert_eq!(
        code(&[
            "rankfit",
            "--ledger",
            l,
            "--group",
            "supplier",
            "--metric",
            "amount",
            "--direction",
            "income"
        ]),
        3
    );
    assert_eq!(
        code(&[
            "rankfit", "--ledger", l, "--group", "entity", "--metric", "count", "--model", "dgbd"
        ]),
        3
    );
}

#[test]
fn hist_bins_sum_to_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let ledger = fixture_ledger(tmp.path());
    let out = tmp.path().join("h.csv");
    let plot = tmp.path().join("h.svg");
    assert_eq!(
        code(&[
            "hist",
            "--ledger",
            s(&ledger),
            "--out",
            s(&out),
            "--plot",
            s(&plot)
        ]),
        0
    );
    let rows = csv_rows(&out);
    let total: u64 = rows.iter().map(|r| r[2].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 8);
    assert!(rows
        .iter()
        .all(|r| r[0].parse::<f64>().unwrap() < r[1].parse::<f64>().unwrap()));
    assert_svg(&plot);
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    for p in [&a, &b] {
        assert_eq!(
            code(&[
                "synth",
                "--family",
                "power",
                "--seed",
                "1",
                "--sigma",
                "0.2",
                "--out",
                s(p)
            ]),
            0
        );
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let spec = tmp.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"family": "yule", "alpha": 0.2, "n": 5000, "seed": 3}"#,
    )
    .unwrap();
    let c = tmp.path().join("c.csv");
    assert_eq!(code(&["synth", "--spec", s(&spec), "--out", s(&c)]), 0);
    let mass: f64 = csv_rows(&c)
        .iter()
        .map(|r| r[2].parse::<f64>().unwrap())
        .sum();
    assert_eq!(mass, 5000.0);
}

#[test]
fn report_writes_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let ledger = fixture_ledger(tmp.path());
    let dir = tmp.path().join("report");
    assert_eq!(
        code(&["report", "--ledger", s(&ledger), "--out", s(&dir)]),
        0
    );
    for f in [
        "indices.csv",
        "hist.csv",
        "hist.svg",
        "rankfit_supplier_count.json",
        "rankfit_supplier_amount.json",
    ] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    assert_svg(&dir.join("hist.svg"));
    let count = read_json(&dir.join("rankfit_supplier_count.json"));
    assert_eq!(count["fit"]["model"], "power");
    assert_eq!(count["n"], 3);

    let again = tmp.path().join("again");
    assert_eq!(
        code(&["report", "--ledger", s(&ledger), "--out", s(&again)]),
        0
    );
    for f in fs::read_dir(&dir).unwrap() {
        let name = f.unwrap().file_name();
        assert_eq!(
            fs::read(dir.join(&name)).unwrap(),
            fs::read(again.join(&name)).unwrap()
        );
    }
}

#[test]
fn bad_flags_exit_4() {
    assert_eq!(code(&["rankfit", "--group", "nope", "--ledger", "x"]), 4);
    assert_eq!(code(&["frobnicate"]), 4);
    assert_eq!(code(&["synth", "--out", "x.csv"]), 4);
    let out = Command::new(env!("CARGO_BIN_EXE_spendlens"))
        .args(["indices", "--ledger", "x", "--out", "y"])
        .env("SPENDLENS_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn thread_cap_does_not_change_ledger() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["0", "1", "3"] {
        let ledger = tmp.path().join(format!("l{threads}.ndjson"));
        let out = Command::new(env!("CARGO_BIN_EXE_spendlens"))
            .args(["ingest", "--input", s(&fixture_dir()), "--out", s(&ledger)])
            .env("SPENDLENS_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        outputs.push(fs::read(&ledger).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}
