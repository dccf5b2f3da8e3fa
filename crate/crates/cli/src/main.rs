mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use spendlens::genmodels::{compare_models, eval_gen, fit_ac, fit_dgbd, CandidateFit, GenError};
use spendlens::ingest::{ingest_directory, IngestError, IngestReport, RawFileProfile, Transaction};
use spendlens::ledger::{
    aggregate, read_ledger_file, write_ledger_file, Direction, KeyKind, Ledger, ThresholdRule,
};
use spendlens::rankfit::{
    aic, davies_test, fit_power, rank_series, select_segments, DaviesRecord, FitRecord, Metric,
    RankFitError, SegmentOptions, SegmentRecord, DEFAULT_DAVIES_CANDIDATES,
};
use spendlens::synth::{self, Family, SynthSpec};
use spendlens::transparency::{amount_histogram, excess_indices, Histogram};
use spendlens::{
    DaviesResult, GenFit, PowerFit, RankSeries, SegmentedFit, DEFAULT_THRESHOLD_MINOR,
};

use plot::{Overlay, PlotKind, PlotSpec};

#[derive(Debug)]
enum Failure {
    Input(String),
    Analysis(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Analysis(_) => 3,
            Failure::Usage(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Analysis(m) | Failure::Usage(m) => m,
        }
    }
}

impl From<RankFitError> for Failure {
    fn from(e: RankFitError) -> Self {
        Failure::Analysis(e.to_string())
    }
}

impl From<GenError> for Failure {
    fn from(e: GenError) -> Self {
        Failure::Analysis(e.to_string())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Input(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "spendlens", version, about = "Public-spend ledger analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize a directory of spend files into a ledger.
    Ingest(IngestArgs),
    /// Excess-transparency indices per entity.
    Indices(IndicesArgs),
    /// Rank-order fits for one grouping.
    Rankfit(RankfitArgs),
    /// Log-binned histogram of transaction amounts.
    Hist(HistArgs),
    /// Generate a synthetic rank series.
    Synth(SynthArgs),
    /// Write indices, histogram and supplier fits for a ledger into a directory.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON column profile; the built-in UK profile when omitted.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Entity name for every row, overriding any entity column.
    #[arg(long)]
    entity: Option<String>,
    /// Per-file report CSV; defaults to `<out>.report.csv`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Rule {
    AtLeast,
    Strict,
}

impl From<Rule> for ThresholdRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::AtLeast => ThresholdRule::AtLeast,
            Rule::Strict => ThresholdRule::Strict,
        }
    }
}

#[derive(Args, Debug)]
struct IndicesArgs {
    #[arg(long)]
    ledger: PathBuf,
    /// Disclosure threshold in pence.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_MINOR)]
    threshold: i64,
    #[arg(long, value_enum, default_value_t = Rule::AtLeast)]
    rule: Rule,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Group {
    Supplier,
    ExpenseType,
    ExpenseArea,
    Entity,
}

impl From<Group> for KeyKind {
    fn from(g: Group) -> Self {
        match g {
            Group::Supplier => KeyKind::Supplier,
            Group::ExpenseType => KeyKind::ExpenseType,
            Group::ExpenseArea => KeyKind::ExpenseArea,
            Group::Entity => KeyKind::Entity,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    Count,
    Amount,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Count => Metric::Count,
            MetricArg::Amount => Metric::Amount,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    Expenditure,
    Income,
    All,
}

impl DirectionArg {
    fn filter(self) -> Option<&'static [Direction]> {
        match self {
            DirectionArg::Expenditure => Some(&[Direction::Expenditure]),
            DirectionArg::Income => Some(&[Direction::Income]),
            DirectionArg::All => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            DirectionArg::Expenditure => "expenditure",
            DirectionArg::Income => "income",
            DirectionArg::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Auto,
    Power,
    Segmented,
    Dgbd,
    Ac4,
    Ac5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Axes {
    LogLog,
    LogLinear,
}

#[derive(Args, Debug)]
struct RankfitArgs {
    #[arg(long, required_unless_present = "series")]
    ledger: Option<PathBuf>,
    /// Rank series CSV (rank, label, value) instead of a ledger.
    #[arg(long, conflicts_with_all = ["ledger", "group", "direction"])]
    series: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "series")]
    group: Option<Group>,
    #[arg(long, value_enum, default_value_t = MetricArg::Count)]
    metric: MetricArg,
    /// Ledger rows to rank; expenditure by default.
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    /// Upper bound on breakpoints; lowered when the series is too short.
    #[arg(long, default_value_t = 3)]
    max_breakpoints: usize,
    #[arg(long, value_enum, default_value_t = ModelArg::Auto)]
    model: ModelArg,
    /// Allow jumps between segments.
    #[arg(long)]
    discontinuous: bool,
    #[arg(long, default_value_t = 5)]
    min_segment_size: usize,
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Axes::LogLog)]
    axes: Axes,
    /// JSON output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HistArgs {
    #[arg(long)]
    ledger: PathBuf,
    #[arg(long, value_enum, default_value_t = DirectionArg::All)]
    direction: DirectionArg,
    #[arg(long, default_value_t = 10)]
    bins_per_decade: usize,
    /// Threshold marker position, in pence.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_MINOR)]
    threshold: i64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Power,
    Segmented,
    Dgbd,
    Ac5,
    Yule,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// JSON generator spec; overrides the family flags.
    #[arg(long, conflicts_with = "family")]
    spec: Option<PathBuf>,
    /// Family with built-in example parameters.
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Ranks, or steps for `yule`.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Series CSV (rank, label, value).
    #[arg(long)]
    out: PathBuf,
    /// Also write a ledger whose supplier transaction counts follow the series.
    #[arg(long)]
    ledger_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    ledger: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_MINOR)]
    threshold: i64,
    #[arg(long, default_value_t = 3)]
    max_breakpoints: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = configure_threads().and_then(|threads| match cli.command {
        Command::Ingest(a) => cmd_ingest(&a, threads),
        Command::Indices(a) => cmd_indices(&a),
        Command::Rankfit(a) => cmd_rankfit(&a),
        Command::Hist(a) => cmd_hist(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Report(a) => cmd_report(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("spendlens: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

/// Reads `SPENDLENS_THREADS` (0 or unset = machine default).
fn configure_threads() -> Outcome<usize> {
    let threads = match std::env::var("SPENDLENS_THREADS") {
        Ok(v) if !v.trim().is_empty() => v.trim().parse::<usize>().map_err(|_| {
            Failure::Usage(format!(
                "SPENDLENS_THREADS must be a non-negative integer, got `{v}`"
            ))
        })?,
        _ => 0,
    };
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(threads)
}

fn load_ledger(path: &Path) -> Outcome<Ledger> {
    read_ledger_file(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Outcome<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Failure::Input(e.to_string());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Input(e.to_string()))
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cmd_ingest(a: &IngestArgs, threads: usize) -> Outcome {
    if !a.input.is_dir() {
        return Err(Failure::Input(format!(
            "{} is not a directory",
            a.input.display()
        )));
    }
    let mut profile = match &a.profile {
        Some(p) => RawFileProfile::from_path(p).map_err(|e| Failure::Input(e.to_string()))?,
        None => RawFileProfile::default(),
    };
    if let Some(e) = &a.entity {
        profile.entity_override = Some(e.clone());
    }
    let (ledger, reports) = ingest_directory(&a.input, &profile, threads).map_err(|e| match e {
        IngestError::InvalidProfile(_) => Failure::Usage(e.to_string()),
        _ => Failure::Input(e.to_string()),
    })?;
    write_ledger_file(&ledger, None, &a.out)
        .map_err(|e| Failure::Input(format!("{}: {e}", a.out.display())))?;
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".report.csv");
        PathBuf::from(s)
    });
    write_text(&report_path, &report_csv(&reports)?)?;
    let failed = reports.iter().filter(|r| r.error.is_some()).count();
    eprintln!(
        "ingested {} rows from {} of {} files",
        ledger.len(),
        reports.len() - failed,
        reports.len()
    );
    Ok(())
}

fn report_csv(reports: &[IngestReport]) -> Outcome<String> {
    csv_text(
        &[
            "file",
            "rows_read",
            "rows_kept",
            "rows_dropped",
            "detected_header_row",
            "drop_reasons",
            "error",
        ],
        reports.iter().map(|r| {
            vec![
                r.file.clone(),
                r.rows_read.to_string(),
                r.rows_kept.to_string(),
                r.rows_dropped.to_string(),
                r.detected_header_row
                    .map(|h| h.to_string())
                    .unwrap_or_default(),
                r.drop_reasons
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join(";"),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

fn indices_csv(ledger: &Ledger, threshold: i64, rule: ThresholdRule) -> Outcome<String> {
    let rows =
        excess_indices(ledger, threshold, rule).map_err(|e| Failure::Analysis(e.to_string()))?;
    csv_text(
        &[
            "entity",
            "direction",
            "n_all",
            "n_above",
            "count_index",
            "amount_index",
            "defined",
        ],
        rows.iter().map(|r| {
            vec![
                r.entity.clone(),
                r.direction.to_string(),
                r.n_all.to_string(),
                r.n_above.to_string(),
                opt_num(r.count_index),
                opt_num(r.amount_index),
                r.defined().to_string(),
            ]
        }),
    )
}

fn cmd_indices(a: &IndicesArgs) -> Outcome {
    if a.threshold <= 0 {
        return Err(Failure::Usage(format!(
            "--threshold must be positive, got {}",
            a.threshold
        )));
    }
    let ledger = load_ledger(&a.ledger)?;
    write_text(&a.out, &indices_csv(&ledger, a.threshold, a.rule.into())?)
}

fn histogram(
    ledger: &Ledger,
    direction: DirectionArg,
    bins: usize,
    threshold: i64,
) -> Outcome<Histogram> {
    let mut h = amount_histogram(ledger, direction.filter(), bins)
        .map_err(|e| Failure::Analysis(e.to_string()))?;
    h.threshold_marker = (threshold as f64 / 100.0).log10();
    Ok(h)
}

fn hist_csv(h: &Histogram) -> Outcome<String> {
    csv_text(
        &["bin_low", "bin_high", "count"],
        h.counts.iter().enumerate().map(|(i, c)| {
            vec![
                h.bin_edges[i].to_string(),
                h.bin_edges[i + 1].to_string(),
                c.to_string(),
            ]
        }),
    )
}

fn hist_svg(h: &Histogram, title: &str) -> Outcome<String> {
    let mut spec = PlotSpec::new(
        PlotKind::Histogram,
        title,
        "log10 amount (GBP)",
        "transactions",
    );
    spec.overlays.push(Overlay::Marker {
        label: format!(
            "threshold GBP {}",
            plot::num(10f64.powf(h.threshold_marker))
        ),
        x: h.threshold_marker,
    });
    let bars: Vec<(f64, f64, u64)> = h
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| (h.bin_edges[i], h.bin_edges[i + 1], *c))
        .collect();
    plot::render(&spec, &[], &bars).map_err(|e| Failure::Usage(e.to_string()))
}

fn cmd_hist(a: &HistArgs) -> Outcome {
    if a.threshold <= 0 {
        return Err(Failure::Usage(format!(
            "--threshold must be positive, got {}",
            a.threshold
        )));
    }
    let ledger = load_ledger(&a.ledger)?;
    let h = histogram(&ledger, a.direction, a.bins_per_decade, a.threshold)?;
    write_text(&a.out, &hist_csv(&h)?)?;
    if let Some(p) = &a.plot {
        write_text(
            p,
            &hist_svg(&h, &format!("Transaction amounts ({})", a.direction.name()))?,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ModelSummary<'a> {
    model: &'a str,
    params: usize,
    sse: f64,
    aic: f64,
    delta_aic: f64,
    akaike_weight: f64,
}

#[derive(Serialize)]
struct RankfitOutput<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    group: Option<String>,
    metric: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    direction: Option<&'a str>,
    model: &'a str,
    n: usize,
    dropped_nonpositive: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    models: Option<Vec<ModelSummary<'a>>>,
    fit: Value,
}

/// Fitted curve in `(log10 rank, log10 value)` coordinates.
enum Curve {
    Power { log_y0: f64, beta: f64 },
    Segmented(SegmentedFit),
    Generalized(GenFit),
}

struct RankfitResult {
    json: String,
    series: RankSeries,
    curve: Option<Curve>,
}

struct RankfitJob {
    /// `None` when the series was read directly.
    grouping: Option<(KeyKind, DirectionArg)>,
    model: ModelArg,
    max_breakpoints: usize,
    opts: SegmentOptions,
}

fn feasible_k(n: usize, max_k: usize, min_seg: usize) -> usize {
    let mut k = max_k;
    while k > 0 && n < (k + 1) * min_seg {
        k -= 1;
    }
    k
}

fn davies_record(series: &RankSeries) -> Option<DaviesResult> {
    (series.len() >= 10)
        .then(|| davies_test(series, DEFAULT_DAVIES_CANDIDATES).ok())
        .flatten()
}

fn segmented_json(fit: &SegmentedFit, series: &RankSeries) -> Value {
    json!(FitRecord::new(fit, davies_record(series).as_ref()))
}

fn power_json(fit: &PowerFit, series: &RankSeries) -> Value {
    let record = FitRecord {
        model: "power".into(),
        k: 0,
        continuous: true,
        n: fit.n,
        breakpoints_log10: vec![],
        breakpoints_rank: vec![],
        segments: vec![SegmentRecord {
            intercept: fit.log_y0,
            slope: fit.beta,
        }],
        sse: fit.sse,
        aic: aic(fit.n, fit.sse, 2).ok(),
        davies: davies_record(series).map(|d| DaviesRecord {
            statistic: d.statistic,
            p_bound: d.p_bound,
            candidates: d.candidates,
        }),
    };
    let mut v = json!(record);
    v["r2"] = json!(fit.r2);
    v
}

fn power_curve(fit: &PowerFit) -> Curve {
    Curve::Power {
        log_y0: fit.log_y0,
        beta: fit.beta,
    }
}

fn ledger_series(
    ledger: &Ledger,
    group: KeyKind,
    direction: DirectionArg,
    metric: Metric,
) -> Outcome<RankSeries> {
    let table = aggregate(ledger, group, direction.filter());
    Ok(rank_series(&table, metric)?)
}

fn read_series(path: &Path, metric: Metric) -> Outcome<RankSeries> {
    let bad = |m: String| Failure::Input(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("missing `{name}` column")))
    };
    let (label_col, value_col) = (col("label")?, col("value")?);
    let mut pairs = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let value: f64 = rec[value_col]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad value `{}`", &rec[value_col])))?;
        pairs.push((rec[label_col].to_string(), value));
    }
    Ok(RankSeries::from_pairs(pairs, metric)?)
}

fn run_rankfit(series: RankSeries, job: &RankfitJob) -> Outcome<RankfitResult> {
    let n = series.len();
    let mut models = None;
    let (fit, curve) = match job.model {
        ModelArg::Power => {
            let f = fit_power(&series)?;
            (power_json(&f, &series), power_curve(&f))
        }
        ModelArg::Segmented => {
            let k = feasible_k(n, job.max_breakpoints, job.opts.min_segment_size);
            let f = select_segments(&series, k, job.opts)?;
            (segmented_json(&f, &series), Curve::Segmented(f))
        }
        ModelArg::Dgbd | ModelArg::Ac4 | ModelArg::Ac5 => {
            let f = match job.model {
                ModelArg::Dgbd => fit_dgbd(&series)?,
                ModelArg::Ac4 => fit_ac(&series, true)?,
                _ => fit_ac(&series, false)?,
            };
            (json!(f), Curve::Generalized(f))
        }
        ModelArg::Auto => {
            let table = compare_models(&series, job.max_breakpoints);
            let best = table.best().ok_or_else(|| {
                Failure::Analysis(format!("no model could be fitted to {n} ranked values"))
            })?;
            let (fit, curve) = match &best.fit {
                CandidateFit::Power(p) => (power_json(p, &series), power_curve(p)),
                CandidateFit::Segmented(f) => {
                    (segmented_json(f, &series), Curve::Segmented(f.clone()))
                }
                CandidateFit::Generalized(g) => (json!(g), Curve::Generalized(*g)),
            };
            models = Some(table);
            (fit, curve)
        }
    };
    let summaries = models.as_ref().map(|t| {
        t.rows
            .iter()
            .map(|r| ModelSummary {
                model: &r.model,
                params: r.params,
                sse: r.sse,
                aic: r.aic,
                delta_aic: r.delta_aic,
                akaike_weight: r.akaike_weight,
            })
            .collect()
    });
    let out = RankfitOutput {
        group: job.grouping.map(|g| g.0.to_string()),
        metric: match series.metric {
            Metric::Count => "count",
            Metric::Amount => "amount",
        },
        direction: job.grouping.map(|g| g.1.name()),
        model: match job.model {
            ModelArg::Auto => "auto",
            ModelArg::Power => "power",
            ModelArg::Segmented => "segmented",
            ModelArg::Dgbd => "dgbd",
            ModelArg::Ac4 => "ac4",
            ModelArg::Ac5 => "ac5",
        },
        n,
        dropped_nonpositive: series.dropped_nonpositive,
        models: summaries,
        fit,
    };
    let mut json = serde_json::to_string_pretty(&out).map_err(|e| Failure::Input(e.to_string()))?;
    json.push('\n');
    Ok(RankfitResult {
        json,
        series,
        curve: Some(curve),
    })
}

fn rankfit_svg(r: &RankfitResult, axes: Axes, title: &str, y_label: &str) -> Outcome<String> {
    let kind = match axes {
        Axes::LogLog => PlotKind::RankLogLog,
        Axes::LogLinear => PlotKind::RankLogLinear,
    };
    let y_of = |log_y: f64| match axes {
        Axes::LogLog => log_y,
        Axes::LogLinear => 10f64.powf(log_y),
    };
    let n = r.series.len();
    let points: Vec<(f64, f64)> = r
        .series
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (((i + 1) as f64).log10(), y_of(v.log10())))
        .collect();
    let mut spec = PlotSpec::new(kind, title, "rank", y_label);
    // Curves are sampled at up to 400 log-spaced ranks.
    let steps = 400.min(n.max(1));
    let ranks: Vec<usize> = {
        let mut rs: Vec<usize> = (0..steps)
            .map(|i| {
                let t = if steps > 1 {
                    i as f64 / (steps - 1) as f64
                } else {
                    0.0
                };
                (10f64.powf(t * (n as f64).log10())).round() as usize
            })
            .map(|r| r.clamp(1, n.max(1)))
            .collect();
        rs.dedup();
        rs
    };
    match &r.curve {
        Some(Curve::Power { log_y0, beta }) => {
            let pts = ranks
                .iter()
                .map(|&rk| {
                    let x = (rk as f64).log10();
                    (x, y_of(log_y0 + beta * x))
                })
                .collect();
            spec.overlays.push(Overlay::Curve {
                label: "power law".into(),
                points: pts,
            });
        }
        Some(Curve::Segmented(f)) => {
            let label = if f.k == 0 {
                "power law".to_string()
            } else {
                format!("segmented, k = {}", f.k)
            };
            let pts = ranks
                .iter()
                .map(|&rk| {
                    let x = (rk as f64).log10();
                    (x, y_of(f.predict_log(x)))
                })
                .collect();
            spec.overlays.push(Overlay::Curve { label, points: pts });
            for (i, b) in f
                .breakpoints
                .iter()
                .enumerate()
                .take(plot::MAX_OVERLAYS - 1)
            {
                spec.overlays.push(Overlay::Marker {
                    label: format!("break {} at rank {}", i + 1, plot::num(10f64.powf(*b))),
                    x: *b,
                });
            }
        }
        Some(Curve::Generalized(g)) => {
            let pts = ranks
                .iter()
                .filter_map(|&rk| {
                    eval_gen(g, rk)
                        .ok()
                        .map(|v| ((rk as f64).log10(), y_of(v.log10())))
                })
                .collect();
            spec.overlays.push(Overlay::Curve {
                label: g.model.name().to_string(),
                points: pts,
            });
        }
        None => {}
    }
    plot::render(&spec, &points, &[]).map_err(|e| Failure::Usage(e.to_string()))
}

fn cmd_rankfit(a: &RankfitArgs) -> Outcome {
    if a.min_segment_size < 2 {
        return Err(Failure::Usage(
            "--min-segment-size must be at least 2".into(),
        ));
    }
    let metric: Metric = a.metric.into();
    let (series, grouping) = match (&a.series, &a.ledger, a.group) {
        (Some(p), _, _) => (read_series(p, metric)?, None),
        (None, Some(l), Some(g)) => {
            let direction = a.direction.unwrap_or(DirectionArg::Expenditure);
            let ledger = load_ledger(l)?;
            (
                ledger_series(&ledger, g.into(), direction, metric)?,
                Some((g.into(), direction)),
            )
        }
        _ => {
            return Err(Failure::Usage(
                "--ledger and --group, or --series, are required".into(),
            ))
        }
    };
    let job = RankfitJob {
        grouping,
        model: a.model,
        max_breakpoints: a.max_breakpoints,
        opts: SegmentOptions {
            continuous: !a.discontinuous,
            min_segment_size: a.min_segment_size,
        },
    };
    let r = run_rankfit(series, &job)?;
    match &a.out {
        Some(p) => write_text(p, &r.json)?,
        None => print!("{}", r.json),
    }
    if let Some(p) = &a.plot {
        let y_label = match a.metric {
            MetricArg::Count => "transactions",
            MetricArg::Amount => "amount (GBP)",
        };
        let title = match job.grouping {
            Some((g, _)) => format!("{y_label} by {g}"),
            None => format!("{y_label} by rank"),
        };
        write_text(p, &rankfit_svg(&r, a.axes, &title, y_label)?)?;
    }
    Ok(())
}

fn builtin_family(f: FamilyArg) -> Family {
    match f {
        FamilyArg::Power => Family::Power {
            y0: 1000.0,
            beta: -1.0,
        },
        FamilyArg::Segmented => Family::Segmented {
            y0: 1000.0,
            slopes: vec![-0.3, -1.5],
            breakpoints: vec![100.0],
        },
        FamilyArg::Dgbd => Family::Dgbd {
            amplitude: 1000.0,
            a: 0.8,
            b: 0.3,
        },
        FamilyArg::Ac5 => Family::Ac5 {
            amplitude: 1000.0,
            a: 0.8,
            b: 0.3,
            c: 2.0,
            d: 5.0,
        },
        FamilyArg::Yule => Family::Yule { alpha: 0.1 },
    }
}

/// One transaction per unit of (rounded) value, each supplier a series label.
fn series_ledger(series: &RankSeries) -> Ledger {
    let date = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
    let mut rows = Vec::new();
    let mut row_number = 0u64;
    for (label, v) in series.labels.iter().zip(&series.values) {
        for _ in 0..(v.round().max(1.0) as u64) {
            row_number += 1;
            rows.push(Transaction {
                entity: "synthetic".into(),
                date,
                supplier: label.clone(),
                supplier_key: label.to_uppercase(),
                expense_type: "synthetic".into(),
                expense_area: "synthetic".into(),
                amount_minor: 100_000,
                source_file: "synth".into(),
                row_number,
            });
        }
    }
    Ledger::from_rows(rows, vec!["synth".into()])
}

fn cmd_synth(a: &SynthArgs) -> Outcome {
    let spec = match (&a.spec, a.family) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            SynthSpec::from_json(&text).map_err(|e| Failure::Usage(e.to_string()))?
        }
        (None, Some(f)) => SynthSpec {
            family: builtin_family(f),
            n: a.n,
            noise_sigma: a.sigma,
            seed: a.seed,
        },
        (None, None) => {
            return Err(Failure::Usage(
                "one of --spec or --family is required".into(),
            ))
        }
    };
    let series: RankSeries = synth::generate(&spec).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut buf = Vec::new();
    synth::write_series_csv(&series, &mut buf).map_err(|e| Failure::Input(e.to_string()))?;
    write_text(&a.out, &String::from_utf8_lossy(&buf))?;
    if let Some(p) = &a.ledger_out {
        let ledger = series_ledger(&series);
        write_ledger_file(&ledger, None, p)
            .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Outcome {
    if a.threshold <= 0 {
        return Err(Failure::Usage(format!(
            "--threshold must be positive, got {}",
            a.threshold
        )));
    }
    let ledger = load_ledger(&a.ledger)?;
    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let dir = &a.out;

    write_text(
        &dir.join("indices.csv"),
        &indices_csv(&ledger, a.threshold, ThresholdRule::AtLeast)?,
    )?;

    match histogram(&ledger, DirectionArg::All, 10, a.threshold) {
        Ok(h) => {
            write_text(&dir.join("hist.csv"), &hist_csv(&h)?)?;
            write_text(&dir.join("hist.svg"), &hist_svg(&h, "Transaction amounts")?)?;
        }
        Err(e) => eprintln!("spendlens: histogram skipped: {}", e.message()),
    }

    for (metric, name, y_label) in [
        (Metric::Count, "count", "transactions"),
        (Metric::Amount, "amount", "amount (GBP)"),
    ] {
        let stem = format!("rankfit_supplier_{name}");
        let opts = SegmentOptions::default();
        let fitted = ledger_series(
            &ledger,
            KeyKind::Supplier,
            DirectionArg::Expenditure,
            metric,
        )
        .and_then(|series| {
            let job = RankfitJob {
                grouping: Some((KeyKind::Supplier, DirectionArg::Expenditure)),
                model: if series.len() >= opts.min_segment_size {
                    ModelArg::Segmented
                } else {
                    ModelArg::Power
                },
                max_breakpoints: a.max_breakpoints,
                opts,
            };
            run_rankfit(series, &job)
        });
        match fitted {
            Ok(r) => {
                write_text(&dir.join(format!("{stem}.json")), &r.json)?;
                let svg = rankfit_svg(
                    &r,
                    Axes::LogLog,
                    &format!("Suppliers by {y_label}"),
                    y_label,
                )?;
                write_text(&dir.join(format!("{stem}.svg")), &svg)?;
            }
            Err(Failure::Analysis(msg)) => {
                let body = serde_json::to_string_pretty(&json!({
                    "group": "supplier",
                    "metric": name,
                    "direction": "expenditure",
                    "error": msg,
                }))
                .map_err(|e| Failure::Input(e.to_string()))?;
                write_text(&dir.join(format!("{stem}.json")), &(body + "\n"))?;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
