use std::path::PathBuf;
use std::process::ExitCode;

use adder_inverse::commands::{run_command, Command};
use adder_inverse::io::{parse_config, Manifest, RunConfig};
use adder_inverse::{Error, ErrorFamily};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "adder", version, about = "Division-rate reconstruction for the adder growth-fragmentation model")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Solve the direct eigenproblem and write U and its derived curves
    Simulate,
    /// Draw a size sample (and optionally dividing cells) from the solved model
    Sample,
    /// Run one protocol on the solved model and tabulate its errors
    Reconstruct,
    /// Monte Carlo study over sample sizes
    Mc,
    /// Convergence slopes from the study files of an `mc` run
    Slopes,
    /// Protocol 4 on observed sizes plus the direct estimator on dividing cells
    Experimental,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Sample => Command::Sample,
            Sub::Reconstruct => Command::Reconstruct,
            Sub::Mc => Command::Mc,
            Sub::Slopes => Command::Slopes,
            Sub::Experimental => Command::Experimental,
        }
    }
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; defaults reproduce the benchmark
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=4))]
    protocol: Option<u8>,

    /// Sample size (for `mc`, a single study size)
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Monte Carlo repeats
    #[arg(long = "M", global = true)]
    m: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Fixed spectral bandwidth
    #[arg(long, global = true, conflicts_with = "oracle")]
    h3: Option<f64>,

    /// Pick h3 against the true density
    #[arg(long, global = true)]
    oracle: bool,

    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// CSV with header `size`
    #[arg(long, global = true)]
    sizes: Option<PathBuf>,

    /// CSV with header `increment,size`
    #[arg(long, global = true)]
    dividing: Option<PathBuf>,

    /// Exponential growth rate, g(x) = tau x
    #[arg(long, global = true)]
    tau: Option<f64>,

    /// Directory with `study_*.csv` files (for `slopes`)
    #[arg(long, global = true)]
    study: Option<PathBuf>,
}

fn configure(cmd: Command, c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => parse_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = c.protocol {
        cfg.run.protocol = p;
    }
    if let Some(n) = c.n {
        cfg.run.n = n;
        if cmd == Command::Mc {
            cfg.run.n_grid = vec![n];
        }
    }
    if let Some(m) = c.m {
        cfg.run.m = m;
    }
    if let Some(s) = c.seed {
        cfg.run.seed = s;
    }
    if let Some(h) = c.h3 {
        cfg.regularization.h3 = Some(h);
    }
    if c.oracle {
        cfg.regularization.h3 = None;
    }
    if let Some(o) = &c.out {
        cfg.run.out = o.clone();
    }
    if let Some(p) = &c.sizes {
        cfg.data.sizes = Some(p.clone());
    }
    if let Some(p) = &c.dividing {
        cfg.data.dividing = Some(p.clone());
    }
    if let Some(t) = c.tau {
        cfg.model.tau = Some(t);
        cfg.model.growth_table = None;
    }
    if let Some(p) = &c.study {
        cfg.data.study = Some(p.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Manifest, Error> {
    let cmd = Command::from(cli.command);
    let cfg = configure(cmd, &cli.common)?;
    run_command(cmd, &cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e.family() {
        ErrorFamily::Config => 2,
        ErrorFamily::Ingest => 3,
        ErrorFamily::Numerical => 4,
        ErrorFamily::Other => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(m) => {
            for (k, v) in &m.results {
                println!("{k} = {v}");
            }
            println!("wrote {}", m.config.run.out.join("manifest.toml").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
