use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use curveflow::config::parse_config;
use curveflow::presets::{StepDefault, PRESETS};
use curveflow::runner::{self, EXIT_CONFIG};
use curveflow::study::{self, StudyError};

#[derive(Parser)]
#[command(name = "curveflow", version, about = "Gradient flows of closed planar B-spline curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one flow described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sweep uniform time increments T / (100 * 2^i) for i = 0..=imax.
    LambdaStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        imax: u32,
    },
    /// List the built-in presets and their defaults.
    Presets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => run(&config),
        Command::LambdaStudy { config, imax } => lambda_study(&config, imax),
        Command::Presets => {
            list_presets();
            0
        }
    };
    ExitCode::from(code as u8)
}

fn run(path: &Path) -> i32 {
    let cfg = match parse_config(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    match runner::run(&cfg) {
        Ok(report) => {
            let s = &report.summary;
            println!(
                "{}: {} after {} steps, t = {}",
                s.scheme, s.termination, s.steps, s.t_final
            );
            if let Some(msg) = &s.message {
                println!("  {msg}");
            }
            println!("  output in {}", cfg.output_dir.display());
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn lambda_study(path: &Path, imax: u32) -> i32 {
    let cfg = match parse_config(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    match study::lambda_study(&cfg, imax) {
        Ok(rows) => {
            println!("{}", study::TABLE_HEADER);
            for r in rows {
                println!("{},{},{:e},{},{}", r.i, r.dt, r.max_abs_lambda0, r.steps, r.termination);
            }
            println!("table written to {}", study::table_path(&cfg).display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                StudyError::WrongScheme(_) | StudyError::NotUniform => EXIT_CONFIG,
                StudyError::Incomplete { .. } => runner::EXIT_BREAKDOWN,
                StudyError::Run { source, .. } => source.exit_code(),
                StudyError::Io(_) => 1,
            }
        }
    }
}

fn list_presets() {
    for p in &PRESETS {
        let step = match p.stepping {
            StepDefault::AdaptiveCap(tau) => format!("tau_cap = {tau}"),
            StepDefault::AdaptiveFraction(d) => format!("tau_cap = T/{d}"),
            StepDefault::UniformFraction(d) => format!("uniform_dt = T/{d}"),
        };
        println!("{:<17} {}", p.name, p.summary);
        println!(
            "{:<17} scheme = {}, n = {}, degree = {}, k0 = {}, alpha0 = {}, t_end = {}, {step}",
            "", p.scheme, p.n_basis, p.degree, p.k0, p.alpha0, p.t_end
        );
    }
}
