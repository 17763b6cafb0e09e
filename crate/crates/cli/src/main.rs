use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stc::config::ExperimentConfig;
use stc::experiment::{hardness_record, run_experiment};
use stc::oracle_check::run_oracle_check;
use stc::report::{emit_report, fmt_value, median};

#[derive(Parser)]
#[command(name = "stc", version, about = "Sparse tensor completion with side information")]
struct Cli {
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Add the USVT baseline column.
    #[arg(long, global = true)]
    usvt: bool,
    /// Record wall time in metrics.csv (makes it non-reproducible).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the estimators with the exact oracles on one instance.
    OracleCheck {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Planted parity instances: signal left after uniform collapsing.
    Hardness {
        #[arg(long)]
        bias: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
}

const CONFIG_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { ref config } => {
            let cfg = match ExperimentConfig::load(config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            };
            let out = cli
                .out
                .clone()
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let records = match run_experiment(&cfg, cli.jobs, cli.usvt) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(RUNTIME_ERROR);
                }
            };
            if let Err(e) = emit_report(&records, &out, cli.timings) {
                eprintln!("error: cannot write report to {}: {e}", out.display());
                return ExitCode::from(RUNTIME_ERROR);
            }
            for a in stc::report::aggregate(&records) {
                println!(
                    "{} n={} runs={} median max_err={} median mse={}",
                    a.regime.name(),
                    a.n,
                    a.runs,
                    fmt_value(a.max_err[0]),
                    fmt_value(a.mse[0])
                );
            }
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Command::OracleCheck { n, seed } => match run_oracle_check(n, seed) {
            Ok(checks) => {
                let mut ok = true;
                for c in &checks {
                    ok &= c.passed();
                    let tag = if c.passed() { "ok  " } else { "FAIL" };
                    println!("{tag} {:<42} {:.3e} (tol {:.0e})", c.name, c.value, c.tolerance);
                }
                if ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(RUNTIME_ERROR)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(RUNTIME_ERROR)
            }
        },
        Command::Hardness { bias, n, seeds } => {
            if !(0.0..=0.5).contains(&bias) || n < 2 || seeds == 0 {
                eprintln!("error: need 0 <= bias <= 0.5, n >= 2 and seeds >= 1");
                return ExitCode::from(CONFIG_ERROR);
            }
            let mut rows = String::from("n,seed,bias,mean_theta,collapsed_norm,cond\n");
            let mut means = Vec::new();
            let mut norms = Vec::new();
            let mut conds = Vec::new();
            for seed in 0..seeds {
                match hardness_record(n, bias, seed) {
                    Ok(h) => {
                        rows.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            h.n,
                            h.seed,
                            fmt_value(h.bias),
                            fmt_value(h.mean_theta),
                            fmt_value(h.collapsed_norm),
                            fmt_value(h.condition_number)
                        ));
                        means.push(h.mean_theta.abs());
                        norms.push(h.collapsed_norm);
                        conds.push(h.condition_number);
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(RUNTIME_ERROR);
                    }
                }
            }
            if let Some(out) = &cli.out {
                if let Err(e) = std::fs::create_dir_all(out).and_then(|_| std::fs::write(out.join("hardness.csv"), &rows)) {
                    eprintln!("error: cannot write {}: {e}", out.display());
                    return ExitCode::from(RUNTIME_ERROR);
                }
            }
            println!(
                "n={n} bias={bias} median |mean theta|={:.4e} (n^-1/2 = {:.4e}) median collapsed norm={:.4e} median cond={:.3}",
                median(&means),
                (n as f64).powf(-0.5),
                median(&norms),
                median(&conds)
            );
            ExitCode::SUCCESS
        }
    }
}
