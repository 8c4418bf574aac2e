use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use glucoshield::patients::DiabetesType;
use glucoshield_bench::benchmark::{run_benchmark, BenchmarkConfig};
use glucoshield_bench::cli::{analyze_coeffs, simulate, table_from_env, verify_theorem, SimulateOptions};
use glucoshield_bench::policy::{PolicyKind, PolicySpec};
use glucoshield_bench::runner::ShieldKind;

#[derive(Parser)]
#[command(name = "glucoshield", version, about = "Shielded glucose control simulator and benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode.
    Simulate {
        #[arg(long, default_value = "adult#002")]
        patient: String,
        /// Calibration patient; defaults to #001 of the same cohort.
        #[arg(long)]
        train: Option<String>,
        #[arg(long = "type", default_value = "t1d")]
        diabetes_type: DiabetesType,
        #[arg(long, default_value = "heuristic")]
        policy: PolicyKind,
        #[arg(long, default_value = "predictive")]
        shield: ShieldKind,
        #[arg(long, default_value_t = 1)]
        days: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for episode.csv, shield.jsonl and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the ID-vs-OOD benchmark described by a TOML config.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo check of the shield's violation-rate bound.
    VerifyTheorem {
        #[arg(long, default_value_t = 5.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Within- vs between-patient similarity of exported coefficients.
    AnalyzeCoeffs {
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            patient,
            train,
            diabetes_type,
            policy,
            shield,
            days,
            seed,
            out,
        } => {
            let opts = SimulateOptions {
                patient,
                train,
                diabetes_type,
                policy: PolicySpec {
                    kind: policy,
                    ..PolicySpec::default()
                },
                shield,
                days,
                seed,
                out,
                table: table_from_env(),
            };
            let r = simulate(&opts)?;
            let s = &r.summary;
            println!(
                "{} {} {} seed {}: {} steps, TIR {:.2}%, CV {:.2}%, risk {:.3}, hypo {:.2}%, hyper {:.2}%, reward {:.3}, cost {:.3}",
                opts.patient,
                opts.diabetes_type.as_str(),
                opts.shield.as_str(),
                opts.seed,
                r.record.steps.len(),
                s.tir_pct,
                s.cv_pct,
                s.mean_risk_index,
                s.hypo_event_pct,
                s.hyper_event_pct,
                s.reward_sum,
                s.cost_sum
            );
        }
        Command::Benchmark { config, out } => {
            let mut cfg = BenchmarkConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if cfg.patient_table.is_none() {
                cfg.patient_table = table_from_env();
            }
            let report = run_benchmark(&cfg)?;
            print!("{}", report.text_summary());
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::VerifyTheorem {
            epsilon,
            alpha,
            trials,
            seed,
        } => {
            let mut ok = true;
            for (name, r) in verify_theorem(epsilon, alpha, trials, seed)? {
                let bound = r.alpha + 2.0 * r.se;
                // the adversarial control is informational
                if name != "adversarial" {
                    ok &= r.within_bound();
                }
                println!(
                    "{name:<12} rate {:.5} bound {:.5} permitted {} violations {} -> {}",
                    r.rate,
                    bound,
                    r.permitted,
                    r.violations,
                    if r.within_bound() { "within bound" } else { "exceeds bound" }
                );
            }
            if !ok {
                bail!("violation rate exceeded the bound");
            }
        }
        Command::AnalyzeCoeffs { input } => {
            let stats = analyze_coeffs(&input)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
    }
    Ok(())
}
