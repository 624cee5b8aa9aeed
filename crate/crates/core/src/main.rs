use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chemoflow::harness::{barenblatt_validate, eps_study, mms_validate, run, ConvergenceTable, RunConfig};
use chemoflow::model::validate_assumptions;
use chemoflow::{Error, Result};

#[derive(Parser)]
#[command(name = "chemoflow", version, about = "Chemotaxis-fluid simulator with porous-medium diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write diagnostics and snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat a run over a decreasing list of regularization parameters.
    EpsStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3,1e-4")]
        eps: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        bound_ratio: f64,
    },
    /// Print the structural assumption report of a configuration.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Heat sub-case convergence against the cosine series.
    Mms {
        #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
        sizes: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Porous-medium sub-case convergence against the Barenblatt profile.
    Barenblatt {
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        sizes: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text)
}

fn print_table(t: &ConvergenceTable) {
    println!("{}:", t.label);
    for r in &t.rows {
        let order = r.order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into());
        println!("  {:>5} cells  steps {:>7}  error {:.6e}  order {order}", r.cells, r.steps, r.error);
    }
    println!("  {}", if t.passed() { "PASS" } else { "FAIL" });
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let res = run(&cfg, Some(&out))?;
            let last = res.records.last().expect("final record");
            println!(
                "t = {}  steps = {}  mass = {:.16e}  c_max = {:.6e}  max |div u| = {:.3e}",
                last.t, res.steps, last.mass, last.c_max, res.extremes.max_divergence
            );
            Ok(true)
        }
        Command::EpsStudy { config, eps, out, bound_ratio } => {
            let cfg = load(&config)?;
            let s = eps_study(&cfg, &eps, bound_ratio, Some(&out))?;
            for (e, r) in s.eps.iter().zip(&s.finals) {
                println!("eps {e:.1e}  A1 {:.6e}  A2 {:.6e}  A3 {:.6e}", r.accumulators[0], r.accumulators[1], r.accumulators[2]);
            }
            println!("distances n {:?}", s.dist_n);
            println!("distances c {:?}", s.dist_c);
            println!("distances u {:?}", s.dist_u);
            println!("bounded: {}  cauchy trend: {}", s.bounded, s.cauchy_trend);
            Ok(s.passed())
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let report = validate_assumptions(&cfg.model, cfg.init.c0.max(1.0), 64)?;
            println!("{report}");
            if report.passed() {
                Ok(true)
            } else {
                Err(Error::Config(format!("failed assumptions: {}", report.failed_ids().join(", "))))
            }
        }
        Command::Mms { sizes, out } => {
            let tables = mms_validate(&sizes, Some(&out))?;
            tables.iter().for_each(print_table);
            Ok(tables.iter().all(ConvergenceTable::passed))
        }
        Command::Barenblatt { m, sizes, out } => {
            let table = barenblatt_validate(&sizes, m, Some(&out))?;
            print_table(&table);
            Ok(table.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
