use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cmamae::experiment::{
    bench_complexity, heatmap_from_archive_csv, run_experiment, sweep_alpha, write_complexity_csv,
    ConfigError, ExperimentConfig, ExperimentError,
};
use cmamae::EsKind;

#[derive(Parser)]
#[command(name = "cmamae", version, about = "CMA-MAE quality-diversity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Repeat a configuration for several archive learning rates.
    SweepAlpha {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        alphas: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Time ask+tell per solution for each strategy and dimension.
    BenchComplexity {
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [128usize, 256, 512, 1024])]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values = ["openai", "sep-cma", "lm-ma", "full-cma"])]
        variants: Vec<String>,
        /// Minimum number of timed solutions per cell.
        #[arg(long, default_value_t = 4000)]
        samples: usize,
        #[arg(long, short, default_value = "complexity.csv")]
        out: PathBuf,
    },
    /// Convert an archive CSV into a dense 2-D heatmap CSV.
    Heatmap {
        archive: PathBuf,
        /// Grid shape as `rows,cols`.
        #[arg(long, value_delimiter = ',', default_values_t = [100usize, 100])]
        dims: Vec<usize>,
        /// Output file; standard output when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

/// Command-line values that take precedence over the configuration file.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    psi: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    sigma0: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    min_f: Option<String>,
    #[arg(long)]
    grid_dims: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    l2_coeff: Option<String>,
    #[arg(long)]
    checkpoint_every: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> [(&'static str, &Option<String>); 15] {
        [
            ("domain", &self.domain),
            ("algorithm", &self.algorithm),
            ("psi", &self.psi),
            ("lambda", &self.lambda),
            ("iterations", &self.iterations),
            ("sigma0", &self.sigma0),
            ("alpha", &self.alpha),
            ("min_f", &self.min_f),
            ("grid_dims", &self.grid_dims),
            ("seeds", &self.seeds),
            ("output_dir", &self.output_dir),
            ("k", &self.k),
            ("learning_rate", &self.learning_rate),
            ("l2_coeff", &self.l2_coeff),
            ("checkpoint_every", &self.checkpoint_every),
        ]
    }
}

fn load_config(path: &PathBuf, overrides: &Overrides) -> Result<ExperimentConfig, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    let mut config = ExperimentConfig::parse_unvalidated(&text)?;
    for (key, value) in overrides.pairs() {
        if let Some(v) = value {
            config.set(key, v)?;
        }
    }
    config.validate()?;
    Ok(config)
}

fn io_error(path: &PathBuf) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.clone(),
        source,
    }
}

fn execute(command: Command) -> Result<(), ExperimentError> {
    let mut stdout = io::stdout();
    match command {
        Command::Run { config, overrides } => {
            let config = load_config(&config, &overrides)?;
            run_experiment(&config, &mut stdout)?;
        }
        Command::SweepAlpha {
            config,
            alphas,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            sweep_alpha(&config, &alphas, &mut stdout)?;
        }
        Command::BenchComplexity {
            dims,
            variants,
            samples,
            out,
        } => {
            let kinds = variants
                .iter()
                .map(|v| {
                    v.parse::<EsKind>()
                        .map_err(|e| ConfigError::new("variants", e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if dims.iter().any(|&n| n < 2) {
                return Err(ConfigError::new("dims", "dimensions must be at least 2").into());
            }
            let rows = bench_complexity(&dims, &kinds, samples);
            for r in &rows {
                let _ = writeln!(stdout, "{:>10} n={:<6} {:.3} us/solution", r.variant.variant_name(), r.n, r.us_per_solution);
            }
            let file = File::create(&out).map_err(io_error(&out))?;
            write_complexity_csv(BufWriter::new(file), &rows).map_err(io_error(&out))?;
        }
        Command::Heatmap { archive, dims, out } => {
            if dims.len() != 2 {
                return Err(ConfigError::new("dims", "expected `rows,cols`").into());
            }
            let input = File::open(&archive).map_err(io_error(&archive))?;
            let input = BufReader::new(input);
            match out {
                Some(path) => {
                    let file = File::create(&path).map_err(io_error(&path))?;
                    heatmap_from_archive_csv(input, dims[0], dims[1], BufWriter::new(file))?;
                }
                None => heatmap_from_archive_csv(input, dims[0], dims[1], stdout.lock())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
