use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use recursivemix::cli::{self, PreviewOptions, EXIT_CONFIG, EXIT_OK, EXIT_VERIFY};
use recursivemix::gradcheck::DEFAULT_THRESHOLD;

#[derive(Parser)]
#[command(name = "rmix", version, about = "Recursive mixed-sample training experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON config with flat keys; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field (repeatable), e.g. --set alpha=0.3
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Verb {
    /// Train and write metrics.csv, model.rmck and config.json to output_dir.
    Train(ConfigArgs),
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Defaults to <output_dir>/model.rmck.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Dump mixed training batches of successive iterations as PPM files.
    Preview {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        samples: usize,
        /// Use a centred box of this area ratio instead of sampling.
        #[arg(long)]
        lambda: Option<f64>,
        /// Defaults to <output_dir>/preview.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every analytic gradient.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true)]
        sabotage: bool,
    },
    /// One training run per value of each --set; ranges as a..b[:step] or lists a,b,c.
    Sweep {
        /// Base JSON config shared by every run.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Multi-valued keys name one subdirectory per value; single values apply to all runs.
        #[arg(long = "set", value_name = "KEY=VALUES")]
        overrides: Vec<String>,
        /// Runs in flight at once.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn run(verb: Verb) -> recursivemix::Result<i32> {
    match verb {
        Verb::Train(a) => {
            let config = cli::resolve_config(a.config.as_deref(), &a.overrides)?;
            let metrics = cli::run_train(&config)?;
            if let (Some(best), Some(last)) = (metrics.best_top1(), metrics.final_top1()) {
                println!("top-1 error: best {best:.2}%, final {last:.2}%");
            }
            println!("artifacts in {}", config.output_dir.display());
        }
        Verb::Eval { cfg, checkpoint } => {
            let config = cli::resolve_config(cfg.config.as_deref(), &cfg.overrides)?;
            let path = checkpoint.unwrap_or_else(|| config.output_dir.join(cli::CHECKPOINT_FILE));
            let (top1, top5) = cli::run_eval(&config, &path)?;
            println!("top1_err {top1:.2}\ntop5_err {top5:.2}");
        }
        Verb::Preview { cfg, count, samples, lambda, out } => {
            let config = cli::resolve_config(cfg.config.as_deref(), &cfg.overrides)?;
            let opts = PreviewOptions {
                count,
                samples,
                forced_lambda: lambda,
                out_dir: out.unwrap_or_else(|| config.output_dir.join("preview")),
            };
            let paths = cli::run_preview(&config, &opts)?;
            println!("wrote {} images to {}", paths.len(), opts.out_dir.display());
        }
        Verb::Gradcheck { seed, sabotage } => {
            let (double, single) = cli::run_gradcheck(seed, sabotage)?;
            print!("{}", double.render(Some(DEFAULT_THRESHOLD)));
            print!("{}", single.render(None));
            println!("max rel err: f64 {:.3e}, f32 {:.3e}", double.max_error(), single.max_error());
            if !double.passed(DEFAULT_THRESHOLD) {
                eprintln!("gradient check failed");
                return Ok(EXIT_VERIFY);
            }
        }
        Verb::Sweep { config, overrides, jobs } => {
            let base = cli::resolve_config(config.as_deref(), &[])?;
            let runs = cli::run_sweep(&base, &overrides, jobs)?;
            let mut code = EXIT_OK;
            for run in runs {
                match run.result {
                    Ok(m) => println!(
                        "{}: best top-1 {:.2}%",
                        run.dir.display(),
                        m.best_top1().unwrap_or(f64::NAN)
                    ),
                    Err(e) => {
                        eprintln!("{}: {e}", run.dir.display());
                        code = code.max(cli::exit_code(&e));
                    }
                }
            }
            return Ok(code);
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = run(cli.verb).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        cli::exit_code(&e)
    });
    ExitCode::from(code as u8)
}
