//! Command line: `fit`, `toy-study` and `bench`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use templatefit_core::{draw, fit, rng_stream, CostFunction, Method, ToyConfig};

use crate::csv_out::{write_records, write_summary};
use crate::io::{FitInput, FitOutput};
use crate::study::{bench, ratios, run_study, summarize, StudyConfig};
use crate::InputError;

#[derive(Debug, Parser)]
#[command(
    name = "templatefit",
    version,
    about = "Binned template fits with finite-sample templates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one JSON input and write the result as JSON.
    Fit(FitArgs),
    /// Run a toy ensemble and write per-fit and summary CSV files.
    ToyStudy(StudyArgs),
    /// Time full fits of one toy for each method.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output file; standard output if omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "approx")]
    pub method: Method,
    /// Use the weighted likelihood (sumw2 of data and templates).
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long)]
    pub seed: u64,
    /// Toy configuration as JSON; built-in defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the number of bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Comma-separated methods.
    #[arg(
        long = "method",
        visible_alias = "methods",
        value_delimiter = ',',
        default_value = "approx,conway,exact"
    )]
    pub methods: Vec<Method>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub toy: ToyArgs,
    #[arg(long, default_value_t = 1000)]
    pub n_toys: u64,
    /// Comma-separated template sizes.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "50,100,200,500,1000,10000"
    )]
    pub n_mc: Vec<u64>,
    /// Worker threads; all cores if omitted.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory receiving records.csv and summary.csv.
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub toy: ToyArgs,
    /// Template size of the timed toy; taken from the configuration if omitted.
    #[arg(long)]
    pub n_mc: Option<u64>,
    #[arg(long, default_value_t = 11)]
    pub repetitions: usize,
}

/// Parses `args` and runs the command. Exit code 0 on success, 1 on input
/// errors, 2 if a fit did not converge.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // clap spreads its message over several lines plus usage
            let text = e.render().to_string();
            let message: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("{}", message.join(" "));
            return ExitCode::from(1);
        }
    };
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::ToyStudy(a) => cmd_toy_study(&a).map(|()| ExitCode::SUCCESS),
        Command::Bench(a) => cmd_bench(&a).map(|()| ExitCode::SUCCESS),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}

fn cmd_fit(a: &FitArgs) -> anyhow::Result<ExitCode> {
    let input = FitInput::read(&a.input)?;
    let model = input.model()?;
    if a.method == Method::Exact && (a.weighted || input.is_weighted()) {
        return Err(InputError::Config(
            "method exact requires unweighted input (sumw2 must equal sumw)".into(),
        )
        .into());
    }
    if input.is_weighted() && !a.weighted {
        eprintln!("warning: input has sumw2 != sumw; fitting sumw as counts (pass --weighted to use sumw2)");
    }
    let cost =
        CostFunction::new(&model, a.method, a.weighted).map_err(|source| InputError::Model {
            context: a.method.to_string(),
            source,
        })?;
    let result = fit(&cost).map_err(|source| InputError::Model {
        context: "fit".into(),
        source,
    })?;
    let json = serde_json::to_string_pretty(&FitOutput::from(&result))?;
    match &a.output {
        Some(path) => std::fs::write(path, json + "\n").map_err(|source| InputError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => println!("{json}"),
    }
    if !result.converged {
        eprintln!("warning: fit did not converge");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn toy_config(a: &ToyArgs) -> anyhow::Result<ToyConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
                path: path.display().to_string(),
                source,
            })?;
            serde_json::from_str(&text).map_err(InputError::Json)?
        }
        None => ToyConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(nbins) = a.bins {
        cfg.nbins = nbins;
    }
    cfg.validate().map_err(|source| InputError::Model {
        context: "toy configuration".into(),
        source,
    })?;
    Ok(cfg)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).map_err(|source| InputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(BufWriter::new(file))
}

fn cmd_toy_study(a: &StudyArgs) -> anyhow::Result<()> {
    let cfg = StudyConfig {
        toy: toy_config(&a.toy)?,
        n_mc: a.n_mc.clone(),
        n_toys: a.n_toys,
        methods: a.toy.methods.clone(),
        jobs: a.jobs.unwrap_or(0),
    };
    let records = run_study(&cfg)?;
    let stats = summarize(&records);
    std::fs::create_dir_all(&a.output).map_err(|source| InputError::Io {
        path: a.output.display().to_string(),
        source,
    })?;
    write_records(create(&a.output.join("records.csv"))?, &records)?;
    write_summary(create(&a.output.join("summary.csv"))?, &stats)?;

    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "{:<8} {:>7} {:>11} {:>10} {:>10} {:>10} {:>10}",
        "method", "n_mc", "converged", "mean_z", "sem_mean", "std_z", "sem_std"
    )?;
    for s in &stats {
        let m = s.moments;
        let col = |f: fn(&crate::study::Moments) -> f64| m.as_ref().map_or(f64::NAN, f);
        writeln!(
            out,
            "{:<8} {:>7} {:>11} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            s.method.name(),
            s.n_mc,
            format!("{}/{}", s.n_converged, s.n_records),
            col(|m| m.mean_z),
            col(|m| m.sem_mean),
            col(|m| m.std_z),
            col(|m| m.sem_std),
        )?;
        if m.is_none() {
            eprintln!(
                "warning: {} at n_mc = {} has fewer than 2 converged fits",
                s.method, s.n_mc
            );
        }
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> anyhow::Result<()> {
    let mut cfg = toy_config(&a.toy)?;
    if let Some(n_mc) = a.n_mc {
        cfg.n_mc = n_mc;
    }
    let toy = draw(&cfg, &mut rng_stream(cfg.seed, 0))
        .and_then(|t| t.model())
        .map_err(|source| InputError::Model {
            context: "toy".into(),
            source,
        })?;
    let rows = bench(&toy, &a.toy.methods, a.repetitions)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<8} {:>14} {:>8}", "method", "median_us", "ratio")?;
    for (row, ratio) in rows.iter().zip(ratios(&rows)) {
        let us = row.median.as_secs_f64() * 1e6;
        writeln!(out, "{:<8} {:>14.1} {:>8.2}", row.method.name(), us, ratio)?;
    }
    Ok(())
}
