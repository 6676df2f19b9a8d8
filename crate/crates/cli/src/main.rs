use std::path::PathBuf;
use std::process::ExitCode;

use bohmian_hhg::config::{parse_config, RunConfig, Variant};
use bohmian_hhg::pipeline::{run_pipeline, Pipeline};
use bohmian_hhg::Error;
use clap::Parser;

const THREADS_ENV: &str = "BHHG_THREADS";

/// Run a named pipeline of the 1D HHG model and write CSV products.
#[derive(Debug, Parser)]
#[command(name = "bohmian-hhg", version)]
struct Cli {
    /// eigen, propagate, bohmian, classical, spectrum, gabor, fig1 or fig3
    pipeline: String,
    /// Plain-text `section.key = value` file; absent keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// softcore or truncated (overrides potential.variant).
    #[arg(long)]
    potential: Option<String>,
    /// Worker threads; BHHG_THREADS takes precedence.
    #[arg(long)]
    threads: Option<usize>,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, Error> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer (got `{v}`)"))),
        },
        Err(_) => match flag {
            Some(0) => Err(Error::Config("--threads must be positive".into())),
            other => Ok(other),
        },
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let pipeline: Pipeline = cli.pipeline.parse()?;
    let mut config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        config.output = out;
    }
    if let Some(p) = &cli.potential {
        config.potential.variant =
            Variant::parse(p).ok_or_else(|| Error::Config(format!("unknown potential `{p}`")))?;
    }
    if let Some(n) = threads(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let manifest = run_pipeline(&config, pipeline)?;
    println!(
        "{}: wrote {} files to {}",
        pipeline,
        manifest.outputs.len() + 1,
        config.output.display()
    );
    for (k, v) in &manifest.results {
        println!("  {k} = {v}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
