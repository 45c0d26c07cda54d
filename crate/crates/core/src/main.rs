use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use noma_octr::harness::suite::{run_suite, SuiteConfig};
use noma_octr::harness::{
    comparison_csv, demand_sweep, export_results, run_experiment, sweep_csv, ExperimentConfig, ExportFormat,
    RunSpec, SchemeKind, SWEEP_MEANS_GBPS,
};
use noma_octr::precoder::{slot_precoders, PrecoderDump};
use noma_octr::scheduler::{group_terminals, GroupingKind, GroupingStrategy, JopdtOptions};
use noma_octr::solver::InitialPower;
use noma_octr::{jopd, jopdt, oma_baseline, Result, Scenario, ScenarioConfig, SolverOptions};

#[derive(Parser)]
#[command(name = "octr", version, about = "Max-min OCTR resource allocation for NOMA multi-beam satellites")]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = "OCTR_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// TOML scenario configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// A materialized scenario written by `generate`; overrides --config.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn template(&self) -> Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(p) => ScenarioConfig::from_path(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            c.rng_seed = s;
        }
        Ok(c)
    }

    fn load(&self) -> Result<Scenario> {
        match &self.scenario {
            Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
            None => Scenario::generate(&self.template()?),
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize a scenario, channels included, as JSON.
    Generate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "scenario.json")]
        output: String,
    },
    /// Group terminals and solve one instance.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "maxcc")]
        strategy: GroupingKind,
        #[arg(long, default_value = "noma-jopd")]
        scheme: SchemeKind,
        #[arg(long, default_value_t = 1)]
        colors: usize,
        /// Relative spread of the per-beam OCTRs at which iteration stops.
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
        #[arg(long, default_value_t = 200)]
        max_iterations: usize,
        /// Comma-separated starting beam powers in watts.
        #[arg(long, value_delimiter = ',')]
        initial_power: Option<Vec<f64>>,
        #[arg(long, default_value_t = 5)]
        outer_iterations: usize,
        /// Seed for the grouping RNG.
        #[arg(long, default_value_t = 0)]
        grouping_seed: u64,
        #[arg(long)]
        dump_precoders: bool,
    },
    /// Mean min-OCTR against mean demand for every comparison arm.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        colors: usize,
    },
    /// Run the oracle and property checks; exits nonzero on any failure.
    Verify {
        #[arg(long)]
        quick: bool,
    },
    /// Scheme and grouping comparison over several instances.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        colors: Vec<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let out = &cli.out_dir;
    match cli.command {
        Command::Generate { scenario, output } => {
            let s = scenario.load()?;
            write(out, &output, &serde_json::to_string_pretty(&s)?)?;
        }
        Command::Solve {
            scenario,
            strategy,
            scheme,
            colors,
            tolerance,
            max_iterations,
            initial_power,
            outer_iterations,
            grouping_seed,
            dump_precoders,
        } => {
            let s = scenario.load()?.with_colors(colors)?;
            let mut rng = ChaCha8Rng::seed_from_u64(grouping_seed);
            let assignment = group_terminals(&s, &GroupingStrategy::new(strategy), &mut rng)?;
            let options = SolverOptions {
                convergence_tolerance: tolerance,
                max_iterations,
                initial_power: initial_power.map_or(InitialPower::Uniform, InitialPower::Custom),
                ..Default::default()
            };
            let result = match scheme {
                SchemeKind::NomaJopd => jopd(&s, &assignment, &slot_precoders(&s, &assignment)?, &options)?,
                SchemeKind::NomaJopdt => jopdt(
                    &s,
                    &assignment,
                    &JopdtOptions {
                        solver: options,
                        outer_iterations,
                        ..Default::default()
                    },
                )?,
                SchemeKind::Oma => oma_baseline(&s, &assignment, &options)?,
            };
            println!(
                "min OCTR {:.6}, mean OCTR {:.6}, {} iterations, converged {}, certificate {}",
                result.min_octr,
                result.mean_octr(),
                result.iterations,
                result.converged,
                if result.kkt.pass { "pass" } else { "fail" }
            );
            write(out, "result.json", &serde_json::to_string_pretty(&result)?)?;
            write(out, "trace.csv", &result.trace_csv()?)?;
            write(out, "assignment.json", &serde_json::to_string_pretty(&result.assignment)?)?;
            if dump_precoders {
                let dumps: Vec<PrecoderDump> = slot_precoders(&s, &result.assignment)?
                    .iter()
                    .enumerate()
                    .map(|(c, p)| PrecoderDump::new(c, p))
                    .collect();
                write(out, "precoders.json", &serde_json::to_string_pretty(&dumps)?)?;
            }
        }
        Command::Sweep {
            scenario,
            instances,
            colors,
        } => {
            let config = ExperimentConfig::new(scenario.template()?, instances, ExperimentConfig::comparison_runs(colors));
            let sweep = demand_sweep(&config, &SWEEP_MEANS_GBPS)?;
            write(out, "sweep.csv", &sweep_csv(&sweep)?)?;
        }
        Command::Verify { quick } => {
            let cfg = if quick { SuiteConfig::quick() } else { SuiteConfig::full() };
            let results = run_suite(&cfg, |c| println!("{c}"));
            let failed = results.iter().filter(|c| !c.pass).count();
            println!("{} passed, {failed} failed", results.len() - failed);
            return Ok(failed == 0);
        }
        Command::Compare {
            scenario,
            instances,
            colors,
            format,
        } => {
            let runs: Vec<RunSpec> = colors.iter().flat_map(|&c| ExperimentConfig::comparison_runs(c)).collect();
            let config = ExperimentConfig::new(scenario.template()?, instances, runs);
            let report = run_experiment(&config)?;
            for a in &report.aggregates {
                println!("{:<28} mean min-OCTR {:.4} (sd {:.4})", a.label, a.mean_min_octr, a.std_min_octr);
            }
            write(out, "compare.csv", &comparison_csv(&report)?)?;
            let (fmt, name) = match format {
                Format::Csv => (ExportFormat::Csv, "records.csv"),
                Format::Json => (ExportFormat::Json, "records.json"),
            };
            fs::create_dir_all(out)?;
            export_results(&report, fmt, &out.join(name))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
