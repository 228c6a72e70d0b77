mod config;
mod output;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cindex_core::harness::{
    evaluate_external, evaluate_model, run_simulation_study, run_subsampling_study, StudyCell,
    StudyConfig, SubsamplingConfig,
};
use cindex_core::simulation::{calibrate_censoring, generate_with_censoring_mean};
use cindex_core::{
    censoring_km, fit, load_dataset, rank_markers, select_top, BoostConfig, ColumnSpec, Error,
    ErrorKind, LinearMarkerModel, SimulationConfig, SurvivalDataset,
};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use output::{create_dir, sibling, write_atomic, write_text};

type Result<T> = std::result::Result<T, Error>;

/// Boosted concordance markers for right-censored survival data.
#[derive(Debug, Parser)]
#[command(name = "cindex-boost", version)]
struct Cli {
    /// Run configuration file of `key=value` lines keyed by long flag names.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for study runs; defaults to every available core.
    #[arg(long, global = true, env = "CINDEX_BOOST_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a dataset from the log-logistic marker model.
    Simulate(SimulateArgs),
    /// Rank covariates by univariate Uno's C.
    Select(SelectArgs),
    /// Boost a linear marker by maximizing the smoothed concordance.
    Fit(FitArgs),
    /// Score a model or external predictions on a test sample.
    Evaluate(EvaluateArgs),
    /// Run the simulation study or repeated subsampling of a dataset.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
struct Columns {
    /// Observed time column.
    #[arg(long, default_value = "time")]
    time_col: String,
    /// Event indicator column (1 = event, 0 = censored).
    #[arg(long, default_value = "event")]
    event_col: String,
    /// Comma-separated covariate columns; every other column by default.
    #[arg(long, value_delimiter = ',')]
    covariate_cols: Option<Vec<String>>,
}

impl Columns {
    fn spec(&self) -> ColumnSpec {
        ColumnSpec {
            time: self.time_col.clone(),
            event: self.event_col.clone(),
            covariates: self.covariate_cols.clone(),
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Number of markers; the first four drive survival.
    #[arg(long, default_value_t = 1000)]
    p: usize,
    /// Pairwise marker correlation.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Target censoring rate.
    #[arg(long, default_value_t = 0.5)]
    censoring: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset CSV; latent values go to `<output>.latent`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    columns: Columns,
    /// Rank by the raw C instead of max(C, 1 - C).
    #[arg(long)]
    raw: bool,
    /// Keep only the best K features.
    #[arg(long, value_name = "K")]
    top: Option<usize>,
    /// Ranked CSV: feature, concordance, score, rank.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct BoostArgs {
    /// Sigmoid smoothing parameter.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Step length.
    #[arg(long, default_value_t = BoostConfig::DEFAULT_STEP_LENGTH)]
    sl: f64,
    /// Number of boosting iterations.
    #[arg(long, default_value_t = BoostConfig::DEFAULT_M_STOP)]
    mstop: usize,
}

impl BoostArgs {
    fn config(&self) -> Result<BoostConfig> {
        BoostConfig::new(self.mstop, self.sl, self.sigma)
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    columns: Columns,
    #[command(flatten)]
    boost: BoostArgs,
    /// Pre-select the best K features by folded Uno's C before boosting.
    #[arg(long, value_name = "K")]
    top: Option<usize>,
    /// Model file; the trace goes to `<output>.trace.csv`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Learning sample; only its censoring distribution is used.
    #[arg(long)]
    learn: PathBuf,
    /// Test sample.
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    columns: Columns,
    /// Fitted model file.
    #[arg(
        long,
        conflicts_with = "predictions",
        required_unless_present = "predictions"
    )]
    model: Option<PathBuf>,
    /// CSV with a `risk_score` column, one row per test observation; larger
    /// means shorter survival.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Also write the result to this file.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Grid {
    /// n=100, p*=5, 50% censoring, sigma=0.1.
    Anchor,
    /// The full (n, p*, censoring) grid at sigma=0.1.
    PaperTable1,
    /// The full (n, p*, censoring) grid crossed with the sigma grid.
    PaperTable2,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long, value_enum, default_value_t = Grid::Anchor)]
    grid: Grid,
    /// Replicates per cell.
    #[arg(long = "B", default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = BoostConfig::DEFAULT_M_STOP)]
    mstop: usize,
    #[arg(long, default_value_t = BoostConfig::DEFAULT_STEP_LENGTH)]
    sl: f64,
    /// Markers in the simulated data.
    #[arg(long, default_value_t = 1000)]
    p: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 1000)]
    n_selection: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    /// Rank by the raw C instead of max(C, 1 - C).
    #[arg(long)]
    raw: bool,
    /// Subsample this dataset instead of simulating.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    columns: Columns,
    /// Learning fraction for subsampling, as a decimal or a ratio like 2/3.
    #[arg(long, default_value = "2/3", value_parser = parse_fraction)]
    fraction: f64,
    /// Pre-selected features per learning sample when subsampling.
    #[arg(long, value_name = "K")]
    top: Option<usize>,
    /// Smoothing parameter for subsampling.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
}

fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let value = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in '{s}'"))?;
            let b: f64 = b
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in '{s}'"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("'{s}' is not a number"))?,
    };
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(format!("fraction must lie in (0, 1), got {s}"))
    }
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let config = SimulationConfig {
        n: args.n,
        p: args.p,
        rho: args.rho,
        target_censoring: args.censoring,
        seed: args.seed,
        ..SimulationConfig::default()
    };
    config.validate()?;
    let theta = calibrate_censoring(&config)?;
    let data = generate_with_censoring_mean(&config, theta)?;
    write_atomic(&args.output, |out| write_dataset(out, &data.dataset))?;

    let mut latent = String::new();
    writeln!(latent, "realized_censoring={}", data.realized_censoring).unwrap();
    writeln!(latent, "censoring_mean={}", data.censoring_mean).unwrap();
    writeln!(latent, "eta_mu").unwrap();
    for e in &data.eta_mu {
        writeln!(latent, "{e}").unwrap();
    }
    write_text(&sibling(&args.output, ".latent"), &latent)?;
    println!(
        "wrote {} rows x {} markers, censoring {:.3}",
        args.n, args.p, data.realized_censoring
    );
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidData(format!("csv output: {e}"))
}

fn write_dataset(out: &mut dyn Write, data: &SurvivalDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string(), "event".to_string()];
    header.extend(data.feature_names().iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    for (i, o) in data.outcomes().iter().enumerate() {
        let mut row = vec![o.time.to_string(), u8::from(o.event).to_string()];
        row.extend(data.columns().iter().map(|c| c[i].to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidData(format!("csv output: {e}")))
}

fn select(args: &SelectArgs) -> Result<()> {
    let data = load_dataset(&args.input, &args.columns.spec())?;
    let g = censoring_km(data.outcomes())?;
    let ranking = rank_markers(&data, &g, !args.raw)?;
    let keep = match args.top {
        Some(k) => select_top(&ranking, k)?.len(),
        None => ranking.len(),
    };
    write_atomic(&args.output, |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "concordance", "score", "rank"])
            .map_err(csv_error)?;
        for (rank, e) in ranking.entries[..keep].iter().enumerate() {
            w.write_record([
                data.feature_names()[e.index].clone(),
                e.concordance.to_string(),
                e.score.to_string(),
                (rank + 1).to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidData(format!("csv output: {e}")))
    })?;
    println!("ranked {} features", data.p());
    Ok(())
}

fn fit_command(args: &FitArgs) -> Result<()> {
    let config = args.boost.config()?;
    let mut data = load_dataset(&args.input, &args.columns.spec())?;
    if let Some(k) = args.top {
        let g = censoring_km(data.outcomes())?;
        let chosen = select_top(&rank_markers(&data, &g, true)?, k)?;
        data = data.select_features(&chosen);
    }
    let (model, trace) = fit(&data, config)?;
    write_atomic(&args.output, |out| model.write_to(out, Some(&config)))?;
    write_atomic(&sibling(&args.output, ".trace.csv"), |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "risk", "selected"])
            .map_err(csv_error)?;
        for (m, risk) in trace.risk_path.iter().enumerate() {
            let feature = match m {
                0 => String::new(),
                _ => data.feature_names()[trace.selected[m - 1]].clone(),
            };
            w.write_record([m.to_string(), risk.to_string(), feature])
                .map_err(csv_error)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidData(format!("csv output: {e}")))
    })?;
    let risk = model.risk_score(&data)?;
    let g = censoring_km(data.outcomes())?;
    println!(
        "fitted {} iterations on {} features, training Uno's C {:.4}",
        config.m_stop,
        data.p(),
        cindex_core::uno_c(data.outcomes(), &risk, &g)?
    );
    Ok(())
}

fn read_predictions(path: &Path) -> Result<Vec<f64>> {
    let io = |e: csv::Error| Error::InvalidData(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(io)?;
    let column = rdr
        .headers()
        .map_err(io)?
        .iter()
        .position(|h| h == "risk_score")
        .ok_or_else(|| Error::InvalidData(format!("{}: no 'risk_score' column", path.display())))?;
    let mut values = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(io)?;
        let raw = record.get(column).unwrap_or("");
        let value: f64 = raw.parse().map_err(|_| Error::Parse {
            row: idx + 1,
            column: "risk_score".into(),
            message: format!("'{raw}' is not a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                row: idx + 1,
                column: "risk_score".into(),
                message: "value must be finite".into(),
            });
        }
        values.push(value);
    }
    Ok(values)
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let spec = args.columns.spec();
    let learn = load_dataset(&args.learn, &spec)?;
    let test = load_dataset(&args.test, &spec)?;
    let result = match (&args.model, &args.predictions) {
        (Some(path), _) => {
            let file = std::fs::File::open(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            let (model, _) = LinearMarkerModel::read_from(std::io::BufReader::new(file))?;
            evaluate_model(&model, &learn, &test)?
        }
        (None, Some(path)) => {
            let risk = read_predictions(path)?;
            if risk.len() != test.n() {
                return Err(Error::DimensionMismatch {
                    expected: test.n(),
                    found: risk.len(),
                });
            }
            evaluate_external(&risk, learn.outcomes(), test.outcomes())?
        }
        (None, None) => unreachable!("clap requires a model or predictions"),
    };
    let text = format!("uno={}\nharrell={}\n", result.uno, result.harrell);
    print!("{text}");
    if let Some(path) = &args.output {
        write_text(path, &text)?;
    }
    Ok(())
}

fn benchmark(args: &BenchmarkArgs, workers: Option<usize>, echo: &str) -> Result<()> {
    create_dir(&args.output)?;
    let dir = &args.output;
    if let Some(input) = &args.input {
        let data = load_dataset(input, &args.columns.spec())?;
        let config = SubsamplingConfig {
            replicates: args.replicates,
            fraction: args.fraction,
            p_star: args.top,
            fold: !args.raw,
            boost: BoostConfig::new(args.mstop, args.sl, args.sigma)?,
            seed: args.seed,
            workers,
        };
        let results = run_subsampling_study(&data, &config)?;
        write_atomic(&dir.join("replicates.csv"), |out| {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "replicate",
                "test_uno",
                "test_harrell",
                "train_uno",
                "coefficients",
            ])
            .map_err(csv_error)?;
            for r in &results {
                let coefs: Vec<String> = r
                    .selected
                    .iter()
                    .zip(&r.coefficients)
                    .map(|(&l, b)| format!("{}:{b}", data.feature_names()[l]))
                    .collect();
                w.write_record([
                    r.replicate.to_string(),
                    r.test.uno.to_string(),
                    r.test.harrell.to_string(),
                    r.train_uno.to_string(),
                    coefs.join(";"),
                ])
                .map_err(csv_error)?;
            }
            w.flush()
                .map_err(|e| Error::InvalidData(format!("csv output: {e}")))
        })?;
        let summarize = |f: fn(&cindex_core::harness::SubsampleResult) -> f64| {
            let v: Vec<f64> = results.iter().map(f).collect();
            cindex_core::stats::Summary::of(&v).expect("at least one replicate")
        };
        let test = summarize(|r| r.test.uno);
        let harrell = summarize(|r| r.test.harrell);
        let train = summarize(|r| r.train_uno);
        let mut csv_text = String::from("estimate,median,q1,q3\n");
        let mut table = String::from("estimate        median   (IQR)\n");
        for (name, s) in [
            ("test_uno", test),
            ("test_harrell", harrell),
            ("train_uno", train),
        ] {
            writeln!(csv_text, "{name},{},{},{}", s.median, s.q1, s.q3).unwrap();
            writeln!(table, "{name:<14} {:>7.3}  ({:.3})", s.median, s.iqr()).unwrap();
        }
        write_text(&dir.join("summary.csv"), &csv_text)?;
        write_text(&dir.join("summary.txt"), &table)?;
        print!("{table}");
    } else {
        let cells = match args.grid {
            Grid::Anchor => vec![StudyCell::new(100, 5, 0.5, 0.1)],
            Grid::PaperTable1 => StudyConfig::table1_grid(),
            Grid::PaperTable2 => StudyConfig::table2_grid(),
        };
        let config = StudyConfig {
            cells,
            replicates: args.replicates,
            m_stop: args.mstop,
            step_length: args.sl,
            p: args.p,
            rho: args.rho,
            n_selection: args.n_selection,
            n_test: args.n_test,
            fold: !args.raw,
            seed: args.seed,
            workers,
        };
        let result = run_simulation_study(&config)?;
        write_atomic(&dir.join("replicates.csv"), |out| {
            result.write_replicates_csv(out)
        })?;
        write_atomic(&dir.join("summary.csv"), |out| {
            result.write_summary_csv(out)
        })?;
        let table = result.summary_table();
        write_text(&dir.join("summary.txt"), &table)?;
        print!("{table}");
    }
    write_text(&dir.join("config.txt"), echo)
}

/// Effective settings as `key=value` lines, in the config file format.
fn echo_config(matches: &clap::ArgMatches, command: &clap::Command) -> String {
    let mut text = String::new();
    let Some((name, sub_matches)) = matches.subcommand() else {
        return text;
    };
    let sub = command
        .find_subcommand(name)
        .expect("matched subcommand exists");
    for arg in sub.get_arguments() {
        let (Some(long), id) = (arg.get_long(), arg.get_id().as_str()) else {
            continue;
        };
        if matches!(long, "help" | "version" | "config" | "output") {
            continue;
        }
        if let Ok(Some(values)) = sub_matches.try_get_raw(id) {
            let joined: Vec<String> = values.map(|v| v.to_string_lossy().into_owned()).collect();
            writeln!(text, "{long}={}", joined.join(",")).unwrap();
        }
    }
    if let Ok(Some(w)) = matches.try_get_one::<usize>("workers") {
        writeln!(text, "workers={w}").unwrap();
    }
    text
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

/// Parses argv, folding in the config file when one is named.
fn parse_args(argv: Vec<OsString>) -> std::result::Result<(Cli, String), ExitCode> {
    let command = Cli::command();
    let matches = command.clone().try_get_matches_from(&argv).map_err(|e| {
        let _ = e.print();
        ExitCode::from(e.exit_code() as u8)
    })?;
    let matches = match matches.get_one::<PathBuf>("config") {
        None => matches,
        Some(path) => {
            let merged = config::load(path)
                .and_then(|entries| config::merge_args(&command, &matches, &entries));
            let (global, local) = merged.map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(e.kind()))
            })?;
            let mut full = vec![argv[0].clone()];
            full.extend(global);
            full.extend(argv[1..].iter().cloned());
            full.extend(local);
            command.clone().try_get_matches_from(full).map_err(|e| {
                let _ = e.print();
                ExitCode::from(e.exit_code() as u8)
            })?
        }
    };
    let echo = echo_config(&matches, &command);
    let cli = Cli::from_arg_matches(&matches).map_err(|e| {
        let _ = e.print();
        ExitCode::from(2)
    })?;
    Ok((cli, echo))
}

fn run(cli: &Cli, echo: &str) -> Result<()> {
    if cli.workers == Some(0) {
        return Err(Error::InvalidParameter(
            "worker count must be positive".into(),
        ));
    }
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Select(a) => select(a),
        Command::Fit(a) => fit_command(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => benchmark(a, cli.workers, echo),
    }
}

fn main() -> ExitCode {
    let (cli, echo) = match parse_args(std::env::args_os().collect()) {
        Ok(parsed) => parsed,
        Err(code) => return code,
    };
    match run(&cli, &echo) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
