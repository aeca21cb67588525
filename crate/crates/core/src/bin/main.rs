use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bdris_est::config::SystemConfig;
use bdris_est::error::{Error, Result};
use bdris_est::harness::{parse_estimators, run_campaign, CampaignSpec, Estimator, SweepAxis};
use bdris_est::selftest::run_selftest;

#[derive(Parser)]
#[command(name = "bdris-est", version, about = "Monte Carlo cascaded channel estimation for group-connected BD-RIS uplinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; defaults to the built-in full-size scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per sweep value.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of proposed, direct_omp, sbl.
    #[arg(long)]
    estimators: Option<String>,
    /// Snap every angle to its dictionary grid.
    #[arg(long)]
    on_grid: bool,
    /// Worker threads; every core by default.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Copy, Clone, ValueEnum)]
enum PathSet {
    /// Paths per user.
    User,
    /// Paths between BS and RIS.
    BsRis,
}

#[derive(Copy, Clone, ValueEnum)]
enum Array {
    Bs,
    Ris,
}

#[derive(Subcommand)]
enum Command {
    /// NMSE versus SNR in dB.
    SweepSnr {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-10,-5,0,5,10")]
        values: Vec<f64>,
    },
    /// NMSE versus a factor applied to both pilot lengths.
    SweepPilot {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.75,1,1.5,2")]
        values: Vec<f64>,
    },
    /// NMSE versus the number of paths.
    SweepPaths {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "user")]
        which: PathSet,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        values: Vec<usize>,
    },
    /// NMSE versus the side of a square array.
    SweepAntennas {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "bs")]
        array: Array,
        #[arg(long, value_delimiter = ',', default_value = "4,6,8")]
        values: Vec<usize>,
    },
    /// NMSE versus the number of RIS groups.
    SweepGroups {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "4,9")]
        values: Vec<usize>,
    },
    /// Wall time versus the RIS side; records timing columns.
    BenchRuntime {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "4,6")]
        values: Vec<usize>,
    },
    /// Oracle and identity checks; exits nonzero if any fails.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn base_config(common: &Common) -> Result<SystemConfig> {
    let mut c = match &common.config {
        Some(p) => SystemConfig::load(p)?,
        None => SystemConfig::full_scale(),
    };
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if common.on_grid {
        c.channel.on_grid = true;
    }
    c.validate()?;
    Ok(c)
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn campaign(common: &Common, axis: SweepAxis, default_estimators: &[Estimator], timing: bool) -> Result<()> {
    let estimators = match &common.estimators {
        Some(list) => parse_estimators(list)?,
        None => default_estimators.to_vec(),
    };
    let mut spec = CampaignSpec::new(base_config(common)?, axis, common.trials, estimators);
    spec.timing = timing;
    spec.threads = common.threads;
    let result = run_campaign(&spec)?;
    emit(&result.to_csv()?, &common.out)
}

fn run(cli: Cli) -> Result<bool> {
    let proposed = [Estimator::Proposed];
    match cli.command {
        Command::SweepSnr { common, values } => campaign(&common, SweepAxis::SnrDb(values), &proposed, false)?,
        Command::SweepPilot { common, values } => campaign(&common, SweepAxis::PilotScale(values), &proposed, false)?,
        Command::SweepPaths { common, which, values } => {
            let axis = match which {
                PathSet::User => SweepAxis::UserPaths(values),
                PathSet::BsRis => SweepAxis::BsRisPaths(values),
            };
            campaign(&common, axis, &proposed, false)?
        }
        Command::SweepAntennas { common, array, values } => {
            let axis = match array {
                Array::Bs => SweepAxis::BsSide(values),
                Array::Ris => SweepAxis::RisSide(values),
            };
            campaign(&common, axis, &proposed, false)?
        }
        Command::SweepGroups { common, values } => campaign(&common, SweepAxis::Groups(values), &proposed, false)?,
        Command::BenchRuntime { common, values } => {
            campaign(&common, SweepAxis::RisSide(values), &[Estimator::Proposed, Estimator::DirectOmp], true)?
        }
        Command::Selftest { seed, out } => {
            let report = run_selftest(seed)?;
            emit(&report.to_csv(), &out)?;
            return Ok(report.all_passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error kind=selftest code=1 message=\"one or more checks failed\"");
            ExitCode::from(1)
        }
        Err(e) => {
            let message = e.to_string().replace('"', "'");
            eprintln!("error kind={} code={} message=\"{}\"", e.kind(), e.code(), message);
            ExitCode::from(e.code() as u8)
        }
    }
}
