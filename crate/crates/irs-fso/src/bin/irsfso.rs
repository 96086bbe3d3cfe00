//! Command-line front end for scenario sweeps and validation.
//!
//! Exit codes: 0 success, 1 validation or evaluation failure, 2 bad
//! configuration or arguments.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use irs_fso::channel::OracleMode;
use irs_fso::irs::ProfileKind;
use irs_fso::protocol::ProtocolKind;
use irs_fso::scenario::{self, ScenarioConfig, Suite, Template};
use irs_fso::Error;

#[derive(Parser)]
#[command(name = "irsfso", version, about = "IRS-assisted free-space optical link simulator")]
struct Cli {
    /// Scenario file (TOML); omitted keys take the reference values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo trials per row.
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = OracleArg::None)]
    oracle: OracleArg,
    /// Restrict to one sharing protocol.
    #[arg(long, global = true, value_enum)]
    protocol: Option<ProtocolArg>,
    /// Restrict to one phase profile.
    #[arg(long, global = true, value_enum)]
    profile: Option<ProfileArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Footprint widths and regime distances of every pair.
    Regimes,
    /// Field of source 1 across the lens of receiver 1.
    FieldMap {
        #[arg(long, default_value_t = 21)]
        points: usize,
    },
    /// GML of pair 1 against receiver distance, single tile.
    GmlSweep,
    /// Signal and interference power against theta_p1.
    Interference,
    /// Average BER against SNR.
    Ber,
    /// Outage bound against theta_p1.
    Outage,
    /// Run the validation suites and write a JSON report.
    Validate {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    None,
    Separable1d,
    Exact2d,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Td,
    Irsd,
    Irsh,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Lp,
    Qp,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Regimes,
    Fields,
    Gml,
    Perf,
    All,
}

fn config(cli: &Cli) -> irs_fso::Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(p) => scenario::load_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(t) = cli.trials {
        cfg.performance.trials = t;
    }
    if let Some(s) = cli.seed {
        cfg.performance.seed = s;
    }
    if let Some(p) = cli.protocol {
        cfg.protocol.kinds = vec![match p {
            ProtocolArg::Td => ProtocolKind::Td,
            ProtocolArg::Irsd => ProtocolKind::Irsd,
            ProtocolArg::Irsh => ProtocolKind::Irsh,
        }];
    }
    if let Some(p) = cli.profile {
        cfg.protocol.profiles = vec![match p {
            ProfileArg::Lp => ProfileKind::Linear,
            ProfileArg::Qp => ProfileKind::Quadratic,
        }];
    }
    Ok(cfg)
}

fn output(cli: &Cli) -> irs_fso::Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn oracle(cli: &Cli) -> Option<OracleMode> {
    match cli.oracle {
        OracleArg::None => None,
        OracleArg::Separable1d => Some(OracleMode::Separable1d),
        OracleArg::Exact2d => Some(OracleMode::Exact2d),
    }
}

fn run(cli: &Cli) -> irs_fso::Result<bool> {
    let mut cfg = config(cli)?;
    match &cli.command {
        Command::Regimes => scenario::write_csv(output(cli)?, "regimes", &scenario::regimes_table(&cfg)?)?,
        Command::FieldMap { points } => {
            let rows = scenario::field_map(&cfg, cfg.protocol.kinds[0], cfg.protocol.profiles[0], *points, oracle(cli))?;
            scenario::write_csv(output(cli)?, "field-map", &rows)?;
        }
        Command::GmlSweep => scenario::write_csv(output(cli)?, "gml-sweep", &scenario::gml_sweep(&cfg, oracle(cli))?)?,
        Command::Interference | Command::Ber | Command::Outage => {
            let (template, table) = match cli.command {
                Command::Interference => (Template::Interference, "interference"),
                Command::Ber => (Template::Ber, "ber"),
                _ => (Template::Outage, "outage"),
            };
            if matches!(template, Template::Ber) && cli.profile.is_none() && cfg.protocol.profiles.len() == 1 {
                cfg.protocol.profiles = vec![ProfileKind::Linear, ProfileKind::Quadratic];
            }
            let rows = scenario::run_sweep_cases(&template.cases(&cfg))?;
            scenario::write_csv(output(cli)?, table, &rows)?;
        }
        Command::Validate { suite } => {
            let suite = match suite {
                SuiteArg::Regimes => Suite::Regimes,
                SuiteArg::Fields => Suite::Fields,
                SuiteArg::Gml => Suite::Gml,
                SuiteArg::Perf => Suite::Perf,
                SuiteArg::All => Suite::All,
            };
            let report = scenario::validate(&cfg, suite);
            for c in &report.checks {
                eprintln!("{} [{}] {}: {} (expected {}, tolerance {})", if c.pass { "PASS" } else { "FAIL" }, c.suite, c.name, c.actual, c.expected, c.tolerance);
            }
            let mut out = output(cli)?;
            serde_json::to_writer_pretty(&mut out, &report).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out)?;
            out.flush()?;
            return Ok(report.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
