use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gpscale::grid::MaskedGrid;
use gpscale::harness::count_fit::{
    compare_with_filters, holdout_cells, quantile, simulate_count_grid, HoldoutComparison, MoveAcceptance,
};
use gpscale::harness::hmc::HmcSettings;
use gpscale::harness::mcmc::run_mcmc_with_prior;
use gpscale::harness::scaling::powers_of_two;
use gpscale::harness::threads::{configured_threads, parallel_map};
use gpscale::harness::{
    gaussian_filter_estimate, masked_count_fit, scaling_benchmark, simulate_benchmark, smse, Backend,
    BenchmarkConfig, CountFitSettings, CountModelParams, LatentPrior, Parameterization, ScalingSettings,
    ScalingTable,
};
use gpscale::kernels::{matern_cov, matern_spectrum_1d, periodic_kernel_row, se_cov, se_spectrum_1d};
use gpscale::GpError;
use nalgebra::DMatrix;
use serde::Serialize;

const EXIT_VALIDATION: u8 = 2;
const EXIT_TRUNCATED: u8 = 3;

/// Gaussian-process benchmark harness with dense, graph and Fourier backends.
#[derive(Parser)]
#[command(name = "gpscale", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed of every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a latent field and noisy observations, or a count grid with `--grid`.
    Simulate(SimulateArgs),
    /// Time one log-density-plus-gradient evaluation per backend and size.
    BenchScaling(BenchArgs),
    /// Sample the latent field of the regression benchmark with HMC.
    Mcmc(McmcArgs),
    /// Fit the negative-binomial Fourier GP to a masked count grid.
    FitGrid(FitGridArgs),
    /// Scaled mean-squared error of latent log-mean predictions.
    Smse(SmseArgs),
    /// Gaussian-filter estimate of a masked grid.
    Filter(FilterArgs),
    /// Kernel spectrum, periodic kernel row and real-domain kernel for plotting.
    Spectra(SpectraArgs),
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Observation noise scale.
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    ell: f64,
    #[arg(long, default_value = "fourier")]
    backend: Backend,
    #[arg(long, default_value = "centered")]
    parameterization: Parameterization,
    /// Nearest predecessors per node for the graph backend.
    #[arg(long, default_value_t = 5)]
    q: usize,
}

impl ModelArgs {
    fn config(&self, seed: u64) -> BenchmarkConfig {
        BenchmarkConfig {
            n: self.n,
            kappa: self.kappa,
            sigma: self.sigma,
            ell: self.ell,
            backend: self.backend,
            parameterization: self.parameterization,
            q: self.q,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Simulate a negative-binomial count grid of ROWS,COLS instead. `--ell` is the
    /// length scale in cells and `--kappa` the overdispersion.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// Padding of the periodic domain the count field is drawn on.
    #[arg(long, value_delimiter = ',', default_value = "10,10")]
    pad: Vec<usize>,
    /// Log mean of the count field.
    #[arg(long, default_value_t = 1.5)]
    loc: f64,
    #[arg(long, default_value_t = 1.5)]
    nu: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "dense,graph,fourier")]
    backends: Vec<Backend>,
    /// Smallest size as a power of two.
    #[arg(long, default_value_t = 9)]
    min_exp: u32,
    /// Largest size as a power of two.
    #[arg(long, default_value_t = 13)]
    max_exp: u32,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    /// Wall-clock cap per backend in seconds.
    #[arg(long, default_value_t = 60.0)]
    budget: f64,
    #[arg(long, default_value_t = 5)]
    q: usize,
    #[arg(long, default_value = "centered")]
    parameterization: Parameterization,
}

#[derive(Args)]
struct McmcArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// CSV with a `y` column, as written by `simulate`. Simulated from the model when
    /// omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    warmup: usize,
    #[arg(long, default_value_t = 500)]
    draws: usize,
    /// Independent chains; chain `c` uses random stream `c`.
    #[arg(long, default_value_t = 1)]
    chains: u64,
}

#[derive(Args)]
struct FitGridArgs {
    /// Count grid CSV with its `.json` sidecar.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "10,10")]
    pad: Vec<usize>,
    /// Bounds of the log-uniform length-scale prior, in cells.
    #[arg(long, value_delimiter = ',', default_value = "2,28")]
    ell_bounds: Vec<f64>,
    #[arg(long, default_value_t = 1.5)]
    nu: f64,
    #[arg(long, default_value_t = 500)]
    warmup: usize,
    #[arg(long, default_value_t = 500)]
    draws: usize,
    /// Pin sigma instead of sampling it.
    #[arg(long)]
    fixed_sigma: Option<f64>,
    /// Hide this fraction of observed cells and score the fit on them.
    #[arg(long)]
    holdout: Option<f64>,
    /// Filter scales compared against on the held-out cells.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2,2.5,3,3.5,4,4.5,5")]
    lambdas: Vec<f64>,
}

#[derive(Args)]
struct SmseArgs {
    /// CSV with columns `y` and `f_hat`.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    /// Grid CSV with its `.json` sidecar.
    #[arg(long)]
    grid: PathBuf,
    /// Smoothing scale in cells.
    #[arg(long)]
    lambda: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelName {
    Se,
    Matern,
}

#[derive(Args)]
struct SpectraArgs {
    #[arg(long, value_enum, default_value = "se")]
    kernel: KernelName,
    #[arg(long, default_value_t = 1.5)]
    nu: f64,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.2)]
    ell: f64,
    /// Period of the domain.
    #[arg(long, default_value_t = 1.0)]
    period: f64,
}

enum Outcome {
    Complete,
    Truncated,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Truncated) => {
            eprintln!("warning: budget exhausted; larger sizes are marked truncated");
            ExitCode::from(EXIT_TRUNCATED)
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            if is_validation(&e) {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

/// Joins the error chain, skipping causes already quoted by the message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !text.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn is_validation(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<GpError>(),
            Some(GpError::InvalidArgument(_) | GpError::UnsupportedParameter(_) | GpError::Graph(_))
        )
    })
}

fn validation(msg: impl Into<String>) -> anyhow::Error {
    GpError::InvalidArgument(msg.into()).into()
}

fn run(cli: &Cli) -> Result<Outcome> {
    configured_threads()?;
    match &cli.command {
        Command::Simulate(args) => simulate(cli, args),
        Command::BenchScaling(args) => bench(cli, args),
        Command::Mcmc(args) => mcmc(cli, args),
        Command::FitGrid(args) => fit_grid(cli, args),
        Command::Smse(args) => smse_cmd(cli, args),
        Command::Filter(args) => filter(cli, args),
        Command::Spectra(args) => spectra(cli, args),
    }
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_csv_rows<T: Serialize>(out: &Option<PathBuf>, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(output(out)?);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the grid with `-1` for missing cells, plus the sidecar when writing a file.
fn write_grid(cli: &Cli, grid: &MaskedGrid) -> Result<()> {
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => match &cli.out {
            Some(path) => grid.save(path)?,
            None => grid.write_csv(BufWriter::new(io::stdout().lock()))?,
        },
        Format::Json => {
            let (rows, cols) = grid.shape();
            let values: Vec<Vec<Option<f64>>> =
                (0..rows).map(|i| (0..cols).map(|j| grid.get(i, j)).collect()).collect();
            write_json(
                &cli.out,
                &serde_json::json!({ "meta": grid.meta(), "values": values }),
            )?;
        }
    }
    Ok(())
}

fn pair<T: Copy>(v: &[T], what: &str) -> Result<[T; 2]> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(validation(format!("{what} takes two comma-separated values, got {}", v.len()))),
    }
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<Outcome> {
    if let Some(shape) = &args.grid {
        let params = CountModelParams {
            sigma: args.model.sigma,
            length_scale: args.model.ell,
            kappa: args.model.kappa,
            loc: args.loc,
        };
        let [rows, cols] = pair(shape, "--grid")?;
        let (grid, _) = simulate_count_grid((rows, cols), pair(&args.pad, "--pad")?, &params, args.nu, cli.seed)?;
        write_grid(cli, &grid)?;
        return Ok(Outcome::Complete);
    }
    let sim = simulate_benchmark(&args.model.config(cli.seed))?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => sim.write_csv(output(&cli.out)?)?,
        Format::Json => write_json(&cli.out, &sim)?,
    }
    Ok(Outcome::Complete)
}

fn bench(cli: &Cli, args: &BenchArgs) -> Result<Outcome> {
    if args.min_exp > args.max_exp || args.max_exp > 30 {
        return Err(validation("need min-exp <= max-exp <= 30"));
    }
    if !(args.budget > 0.0 && args.budget.is_finite()) {
        return Err(validation("budget must be positive"));
    }
    let settings = ScalingSettings {
        repetitions: args.repetitions,
        budget: Duration::from_secs_f64(args.budget),
        q: args.q,
        parameterization: args.parameterization,
        seed: cli.seed,
        ..Default::default()
    };
    let sizes = powers_of_two(args.min_exp, args.max_exp);
    let mut table = ScalingTable::default();
    for &backend in &args.backends {
        table.rows.extend(scaling_benchmark(backend, &sizes, &settings)?);
    }
    for &backend in &args.backends {
        match table.slope(backend) {
            Some(s) => eprintln!("{backend}: log-log slope {s:.3}"),
            None => eprintln!("{backend}: fewer than two completed sizes"),
        }
    }
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => table.write_csv(output(&cli.out)?)?,
        Format::Json => {
            let slopes: Vec<_> = args
                .backends
                .iter()
                .map(|&b| serde_json::json!({ "backend": b, "slope": table.slope(b) }))
                .collect();
            write_json(&cli.out, &serde_json::json!({ "rows": table.rows, "slopes": slopes }))?;
        }
    }
    Ok(if table.is_truncated() { Outcome::Truncated } else { Outcome::Complete })
}

fn read_column(path: &Path, name: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| validation(format!("{} has no column {name:?}", path.display())))?;
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let field = record?.get(idx).unwrap_or("").trim().to_owned();
        out.push(
            field
                .parse()
                .map_err(|_| validation(format!("{}: row {}: cannot parse {field:?}", path.display(), row + 1)))?,
        );
    }
    Ok(out)
}

#[derive(Serialize)]
struct ChainSummary {
    chain: u64,
    acceptance_rate: f64,
    step_size: f64,
    divergences: usize,
    divergence_flagged: bool,
    wall_seconds: f64,
    min_ess: f64,
    posterior_mean: Vec<f64>,
    posterior_sd: Vec<f64>,
    mcse: Vec<f64>,
    ess: Vec<f64>,
}

#[derive(Serialize)]
struct McmcRow {
    chain: u64,
    index: usize,
    mean: f64,
    sd: f64,
    mcse: f64,
    ess: f64,
}

fn mcmc(cli: &Cli, args: &McmcArgs) -> Result<Outcome> {
    if args.chains == 0 {
        return Err(validation("at least one chain is required"));
    }
    let mut config = args.model.config(cli.seed);
    config.warmup = args.warmup;
    config.draws = args.draws;
    config.validate()?;
    let y = match &args.data {
        Some(path) => read_column(path, "y")?,
        None => simulate_benchmark(&config)?.y,
    };
    let prior = LatentPrior::new(&config)?;
    let settings = HmcSettings {
        warmup: args.warmup,
        draws: args.draws,
        ..Default::default()
    };
    let results = parallel_map((0..args.chains).collect(), |c| {
        run_mcmc_with_prior(&y, &prior, &config, &settings, c).map(|r| (c, r))
    })?;
    let mut summaries = Vec::with_capacity(results.len());
    for result in results {
        let (chain, r) = result?;
        if r.divergence_flagged {
            eprintln!("warning: chain {chain} has {} divergent transitions", r.divergences);
        }
        summaries.push(ChainSummary {
            chain,
            acceptance_rate: r.acceptance_rate,
            step_size: r.step_size,
            divergences: r.divergences,
            divergence_flagged: r.divergence_flagged,
            wall_seconds: r.wall_seconds,
            min_ess: r.min_ess(),
            posterior_mean: r.posterior_mean(),
            posterior_sd: r.posterior_sd(),
            mcse: r.mcse(),
            ess: r.ess(),
        });
    }
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => write_json(&cli.out, &serde_json::json!({ "config": config, "chains": summaries }))?,
        Format::Csv => {
            let rows: Vec<McmcRow> = summaries
                .iter()
                .flat_map(|s| {
                    (0..s.ess.len()).map(move |i| McmcRow {
                        chain: s.chain,
                        index: i,
                        mean: s.posterior_mean[i],
                        sd: s.posterior_sd[i],
                        mcse: s.mcse[i],
                        ess: s.ess[i],
                    })
                })
                .collect();
            write_csv_rows(&cli.out, &rows)?;
        }
    }
    Ok(Outcome::Complete)
}

#[derive(Serialize)]
struct Interval {
    q05: f64,
    median: f64,
    q95: f64,
}

impl Interval {
    fn of(samples: &[f64]) -> Self {
        Self {
            q05: quantile(samples, 0.05),
            median: quantile(samples, 0.5),
            q95: quantile(samples, 0.95),
        }
    }
}

#[derive(Serialize)]
struct FitSummary {
    rows: usize,
    cols: usize,
    sigma: Interval,
    length_scale: Interval,
    kappa: Interval,
    loc: Interval,
    acceptance_rate: f64,
    step_size: f64,
    divergences: usize,
    move_acceptance: Vec<MoveAcceptance>,
    holdout: Option<HoldoutComparison>,
    median_f: Vec<Vec<f64>>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn fit_grid(cli: &Cli, args: &FitGridArgs) -> Result<Outcome> {
    let grid = MaskedGrid::load(&args.grid).with_context(|| format!("cannot load {}", args.grid.display()))?;
    let settings = CountFitSettings {
        pad: pair(&args.pad, "--pad")?,
        length_scale_bounds: pair(&args.ell_bounds, "--ell-bounds")?,
        nu: args.nu,
        warmup: args.warmup,
        draws: args.draws,
        fixed_sigma: args.fixed_sigma,
        seed: cli.seed,
        ..Default::default()
    };
    let (fit, holdout) = match args.holdout {
        Some(fraction) => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(validation("holdout fraction must lie in (0, 1)"));
            }
            let cells = holdout_cells(&grid, fraction, cli.seed);
            if cells.is_empty() {
                return Err(validation("holdout selects no cells"));
            }
            let train = grid.hide(&cells);
            let fit = masked_count_fit(&train, &settings)?;
            let comparison = compare_with_filters(&grid, &train, &cells, &fit, &args.lambdas)?;
            (fit, Some(comparison))
        }
        None => (masked_count_fit(&grid, &settings)?, None),
    };
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => {
            let (rows, cols) = grid.shape();
            write_json(
                &cli.out,
                &FitSummary {
                    rows,
                    cols,
                    sigma: Interval::of(&fit.sigma),
                    length_scale: Interval::of(&fit.length_scale),
                    kappa: Interval::of(&fit.kappa),
                    loc: Interval::of(&fit.loc),
                    acceptance_rate: fit.acceptance_rate,
                    step_size: fit.step_size,
                    divergences: fit.divergences,
                    move_acceptance: fit.move_acceptance.clone(),
                    holdout,
                    median_f: matrix_rows(&fit.median_f),
                },
            )?;
        }
        Format::Csv => {
            let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(output(&cli.out)?);
            for row in fit.median_f.row_iter() {
                wtr.write_record(row.iter().map(|v| v.to_string()))?;
            }
            wtr.flush()?;
        }
    }
    Ok(Outcome::Complete)
}

fn smse_cmd(cli: &Cli, args: &SmseArgs) -> Result<Outcome> {
    let y = read_column(&args.data, "y")?;
    let f_hat = read_column(&args.data, "f_hat")?;
    let value = smse(&y, &f_hat)?;
    #[derive(Serialize)]
    struct Row {
        m: usize,
        smse: f64,
    }
    let row = Row { m: y.len(), smse: value };
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => write_json(&cli.out, &row)?,
        Format::Csv => write_csv_rows(&cli.out, &[row])?,
    }
    Ok(Outcome::Complete)
}

fn filter(cli: &Cli, args: &FilterArgs) -> Result<Outcome> {
    let grid = MaskedGrid::load(&args.grid).with_context(|| format!("cannot load {}", args.grid.display()))?;
    let estimate = gaussian_filter_estimate(&grid, args.lambda)?;
    write_grid(cli, &estimate)?;
    Ok(Outcome::Complete)
}

#[derive(Serialize)]
struct SpectrumRow {
    index: usize,
    frequency: f64,
    spectrum: f64,
    lag: f64,
    periodic_kernel: f64,
    kernel: f64,
}

fn spectra(cli: &Cli, args: &SpectraArgs) -> Result<Outcome> {
    let spectrum = match args.kernel {
        KernelName::Se => se_spectrum_1d(args.n, args.sigma, args.ell, args.period)?,
        KernelName::Matern => matern_spectrum_1d(args.n, args.nu, args.sigma, args.ell, args.period)?,
    };
    let row = periodic_kernel_row(&spectrum);
    let rows = spectrum
        .values()
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let lag = k as f64 * args.period / args.n as f64;
            let kernel = match args.kernel {
                KernelName::Se => se_cov(lag, args.sigma, args.ell)?,
                KernelName::Matern => matern_cov(lag, args.sigma, args.ell, args.nu)?,
            };
            Ok(SpectrumRow {
                index: k,
                frequency: k as f64 / args.period,
                spectrum: s,
                lag,
                periodic_kernel: row[k],
                kernel,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => write_csv_rows(&cli.out, &rows)?,
        Format::Json => write_json(&cli.out, &rows)?,
    }
    Ok(Outcome::Complete)
}
