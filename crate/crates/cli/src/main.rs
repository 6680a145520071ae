use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use coherent_cli::{
    report_csv, run_evaluate, run_reproduce_tables, run_synthesize_ga, run_synthesize_lmi, Failure, RunConfig, Subcommand,
};
use coherent_core::exec::Execution;
use coherent_core::ga::{Index, SearchMode};
use coherent_core::io::fmt_sig;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Evaluate,
    SynthesizeGa,
    SynthesizeLmi,
    ReproduceTables,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Passive,
    NonPassive,
    PassivePlusCoupling,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Objective {
    Lqg,
    Hinf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Exec {
    Sequential,
    Parallel,
}

/// Evaluate and synthesize coherent quantum feedback controllers.
#[derive(Debug, Parser)]
#[command(name = "coherent", version)]
struct Cli {
    /// Subcommand; may instead come from the config file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// JSON run config; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `cavity`, `dpa`, or a plant JSON file.
    #[arg(long)]
    plant: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    gamma_l: Option<f64>,
    #[arg(long)]
    gamma_inf: Option<f64>,
    /// Index minimized when no threshold is given.
    #[arg(long, value_enum)]
    objective: Option<Objective>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    gens: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Stored controller for `evaluate`.
    #[arg(long)]
    controller: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    execution: Option<Exec>,
}

impl Cli {
    fn into_config(self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(c) = self.command {
            cfg.subcommand = Some(match c {
                Command::Evaluate => Subcommand::Evaluate,
                Command::SynthesizeGa => Subcommand::SynthesizeGa,
                Command::SynthesizeLmi => Subcommand::SynthesizeLmi,
                Command::ReproduceTables => Subcommand::ReproduceTables,
            });
        }
        if let Some(m) = self.mode {
            cfg.mode = match m {
                Mode::Passive => SearchMode::PassiveOnly,
                Mode::NonPassive => SearchMode::NonPassive,
                Mode::PassivePlusCoupling => SearchMode::PassivePlusDirectCoupling,
            };
        }
        if let Some(o) = self.objective {
            cfg.objective = match o {
                Objective::Lqg => Index::Lqg,
                Objective::Hinf => Index::Hinf,
            };
        }
        if let Some(e) = self.execution {
            cfg.execution = match e {
                Exec::Sequential => Execution::Sequential,
                Exec::Parallel => Execution::Parallel,
            };
        }
        cfg.plant = self.plant.unwrap_or(cfg.plant);
        cfg.gamma_l = self.gamma_l.or(cfg.gamma_l);
        cfg.gamma_inf = self.gamma_inf.or(cfg.gamma_inf);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.pop = self.pop.unwrap_or(cfg.pop);
        cfg.gens = self.gens.unwrap_or(cfg.gens);
        cfg.restarts = self.restarts.unwrap_or(cfg.restarts);
        cfg.max_iterations = self.max_iter.unwrap_or(cfg.max_iterations);
        cfg.controller = self.controller.or(cfg.controller);
        cfg.out = self.out.unwrap_or(cfg.out);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fmt_sig)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = cli.into_config()?;
    match cfg.subcommand {
        None => Err(Failure::Config("no subcommand given".into())),
        Some(Subcommand::Evaluate) => {
            print!("{}", report_csv(&run_evaluate(&cfg)?));
            Ok(())
        }
        Some(Subcommand::SynthesizeGa) => {
            let r = run_synthesize_ga(&cfg)?;
            println!("j_lqg={} hinf={} out={}", opt(r.report.j_lqg), opt(r.report.hinf), cfg.out.display());
            Ok(())
        }
        Some(Subcommand::SynthesizeLmi) => {
            let r = run_synthesize_lmi(&cfg)?;
            println!(
                "verified j_lqg={} hinf={} iterations={} out={}",
                opt(r.verification.j_lqg),
                opt(r.verification.hinf),
                r.candidate.iterations,
                cfg.out.display()
            );
            Ok(())
        }
        Some(Subcommand::ReproduceTables) => {
            let set = run_reproduce_tables(&cfg)?;
            for (name, _) in set.files() {
                println!("{}", cfg.out.join(name).display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(3);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
