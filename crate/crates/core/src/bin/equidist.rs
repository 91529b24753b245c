use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use equidist::harness::{self, ExperimentConfig, ExperimentRecord};

#[derive(Parser)]
#[command(
    name = "equidist",
    version,
    about = "Zero equidistribution experiments for random CR and Bergman functions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Szegő kernel profiles, bounds and the combining-multiples certificate.
    SzegoReport(Common),
    /// Zero currents of random CR functions against the Levi-form limit.
    EquidistCr {
        #[command(flatten)]
        common: Common,
        /// Compare the root-based and weak evaluators instead.
        #[arg(long)]
        selfcheck: bool,
    },
    /// Zero currents of random Bergman functions near the boundary.
    EquidistBoundary {
        #[command(flatten)]
        common: Common,
        /// Estimate the second moment of the log-kernel correction.
        #[arg(long)]
        variance: bool,
    },
    /// Bergman partial sums against the closed form, and the β_k search.
    BergmanCertify(Common),
    /// Closed-form kernel, Gram and reproducing checks.
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "EQUIDIST_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated m values (k values for the ball subcommands).
    #[arg(long, value_delimiter = ',')]
    m_grid: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<u64>>,
    #[arg(long)]
    test_function: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn config(&self, ball: bool) -> Result<ExperimentConfig, equidist::Error> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if self.trials.is_some() {
            c.trials = self.trials;
        }
        if let Some(g) = &self.m_grid {
            if ball {
                c.k_grid = g.clone();
            } else {
                c.m_grid = g.clone();
            }
        }
        if let Some(w) = &self.weights {
            c.weights = w.clone();
        }
        if self.test_function.is_some() {
            c.test_function = self.test_function.clone();
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        c.out = Some(self.out.clone());
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<ExperimentRecord, equidist::Error> {
    let (common, rec) = match &cli.cmd {
        Cmd::SzegoReport(c) => (c, harness::run_szego_report as fn(&ExperimentConfig) -> _),
        Cmd::EquidistCr { common, .. } => (
            common,
            harness::run_equidist_cr as fn(&ExperimentConfig) -> _,
        ),
        Cmd::EquidistBoundary { common, .. } => (
            common,
            harness::run_equidist_boundary as fn(&ExperimentConfig) -> _,
        ),
        Cmd::BergmanCertify(c) => (
            c,
            harness::run_bergman_certify as fn(&ExperimentConfig) -> _,
        ),
        Cmd::Selftest(c) => (c, harness::run_selftest as fn(&ExperimentConfig) -> _),
    };
    let ball = matches!(
        cli.cmd,
        Cmd::EquidistBoundary { .. } | Cmd::BergmanCertify(_)
    );
    let mut cfg = common.config(ball)?;
    match &cli.cmd {
        Cmd::EquidistCr { selfcheck, .. } => cfg.selfcheck |= *selfcheck,
        Cmd::EquidistBoundary { variance, .. } => cfg.variance |= *variance,
        _ => {}
    }
    #[cfg(feature = "parallel")]
    if let Some(w) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| equidist::Error::Resource(e.to_string()))?;
    }
    let out = common.out.clone();
    let record = rec(&cfg)?;
    harness::write_record(&record, &out)?;
    Ok(record)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(rec) => {
            for c in &rec.checks {
                println!(
                    "{} {}: {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            println!(
                "{} ({:.1} s)",
                if rec.pass { "PASS" } else { "FAIL" },
                rec.wall_clock_s
            );
            if rec.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
