use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pde_evolve::experiment::{
    run_analyze, run_generate, run_predict, run_train, ExperimentConfig, RunDir, Scale,
    PRESET_NAMES,
};
use pde_evolve::verify::run_suite;
use pde_evolve::EvoError;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "pde-evolve",
    version,
    about = "Learn PDE evolution operators in modal space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the modal box and write training pairs
    Generate(Common),
    /// Train the network on the generated pairs
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from the newest checkpoint in the run directory
        #[arg(long)]
        resume: bool,
    },
    /// Roll the trained model out from the configured initial condition
    Predict(Common),
    /// Error series, coefficient tables and the error-bound report
    Analyze(Common),
    /// generate, train, predict and analyze in sequence
    Run(Common),
    /// Run the invariant suite
    Verify,
    /// List the shipped presets
    Presets,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON)
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset name
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "desk")]
    scale: String,
    /// Derive all seeds from this value
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory (defaults to runs/<name>-<scale>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. --set training.epochs=200
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, RunDir), EvoError> {
        let mut cfg = if let Some(path) = &self.config {
            ExperimentConfig::load(path, &self.set)?
        } else if let Some(name) = &self.preset {
            ExperimentConfig::preset(name, self.scale.parse::<Scale>()?, &self.set)?
        } else {
            let out = self.out.as_ref().ok_or_else(|| {
                EvoError::Config(
                    "give --config, --preset or the --out directory of an earlier stage".into(),
                )
            })?;
            let path = out.join(pde_evolve::experiment::CONFIG_FILE);
            if !path.exists() {
                return Err(EvoError::Config(format!("{} not found", path.display())));
            }
            ExperimentConfig::load(&path, &self.set)?
        };
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        let out = self.out.clone().unwrap_or_else(|| {
            let scale = cfg.scale.map_or("custom", Scale::as_str);
            PathBuf::from("runs").join(format!("{}-{scale}", cfg.name))
        });
        let dir = RunDir::open(&out)?;
        Ok((cfg, dir))
    }
}

fn progress(epoch: usize, loss: f64) {
    if epoch % 10 == 0 || epoch == 1 {
        eprintln!("epoch {epoch:>5}  loss {loss:.3e}");
    }
}

fn generate(cfg: &ExperimentConfig, dir: &RunDir) -> Result<(), EvoError> {
    let s = run_generate(cfg, dir)?;
    println!(
        "generated {} pairs in {:.1} s -> {} (sha256 {})",
        s.samples,
        s.seconds,
        dir.path(pde_evolve::experiment::DATA_FILE).display(),
        s.sha256
    );
    Ok(())
}

fn train(cfg: &ExperimentConfig, dir: &RunDir, resume: bool) -> Result<(), EvoError> {
    let s = run_train(cfg, dir, resume, Some(progress))?;
    println!(
        "trained {} epochs in {:.1} s, final loss {:.3e}",
        s.epochs, s.seconds, s.final_loss
    );
    Ok(())
}

fn predict(cfg: &ExperimentConfig, dir: &RunDir) -> Result<(), EvoError> {
    let s = run_predict(cfg, dir)?;
    match s.final_rel_error {
        Some(e) => println!(
            "predicted {} steps in {:.1} s, relative error at t = {} is {:.3e}",
            s.steps, s.seconds, cfg.prediction.horizon, e
        ),
        None => println!("predicted {} steps in {:.1} s", s.steps, s.seconds),
    }
    Ok(())
}

fn analyze(cfg: &ExperimentConfig, dir: &RunDir) -> Result<(), EvoError> {
    let a = run_analyze(cfg, dir)?;
    let r = &a.report;
    println!("t          rel_err_field   coeff_err    bound_rhs");
    let stride = (r.times.len() / 10).max(1);
    for k in (0..r.times.len())
        .step_by(stride)
        .chain(std::iter::once(r.times.len() - 1))
    {
        let rel = r.rel_err_field[k].map_or("n/a".to_string(), |x| format!("{x:.3e}"));
        println!(
            "{:<10.4} {rel:<15} {:<12.3e} {:.3e}",
            r.times[k], r.coeff_err[k], r.bound_rhs[k]
        );
    }
    println!(
        "eps_dnn {:.3e}  |N| {:.4}  |P_n E| {:.4}  coefficient bound holds to step {}: {}",
        r.eps_dnn, r.norm_n, r.norm_pe, r.horizon, r.holds
    );
    println!("exact-modal solution bound holds: {}", a.prop31.holds);
    Ok(())
}

fn run(command: Command) -> Result<u8, EvoError> {
    match command {
        Command::Generate(c) => {
            let (cfg, dir) = c.resolve()?;
            generate(&cfg, &dir)?;
        }
        Command::Train { common, resume } => {
            let (cfg, dir) = common.resolve()?;
            train(&cfg, &dir, resume)?;
        }
        Command::Predict(c) => {
            let (cfg, dir) = c.resolve()?;
            predict(&cfg, &dir)?;
        }
        Command::Analyze(c) => {
            let (cfg, dir) = c.resolve()?;
            analyze(&cfg, &dir)?;
        }
        Command::Run(c) => {
            let (cfg, dir) = c.resolve()?;
            generate(&cfg, &dir)?;
            train(&cfg, &dir, false)?;
            predict(&cfg, &dir)?;
            analyze(&cfg, &dir)?;
        }
        Command::Verify => {
            let checks = run_suite()?;
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} {:<55} {:.3e} (tol {:.1e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance
                );
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                println!("{failed} of {} checks failed", checks.len());
                return Ok(EXIT_ACCEPTANCE);
            }
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_CONFIG
            })
        }
    }
}
