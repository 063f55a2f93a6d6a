use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use supdeconv::decomposition::{decompose, DecompositionConfig, DEFAULT_EPSILON};
use supdeconv::estimator::uniform_grid;
use supdeconv::harness::{
    run_band_coverage, run_cosine_process, run_remainder_diagnostics, run_sup_convergence,
    ExperimentConfig, RunOptions, DEFAULT_BAND_LEVEL,
};
use supdeconv::io::{
    read_samples_file, to_json_string, write_band_csv, write_estimate_csv, write_table_csv,
};
use supdeconv::limit_law::{
    exact_sup_draws, ks_one_sample, periodic_grid, rayleigh_cdf, rayleigh_pdf, sample_w_process,
    sup_w_cdf, KsSummary,
};
use supdeconv::rng::rng_from_seed;
use supdeconv::sup_stat::{confidence_band, sup_statistic};
use supdeconv::{
    centered_estimate, deconv_estimate, validate_conditions, DeconvError, ErrorModel,
    EstimatorConfig, KernelModel, QuadratureSpec, Result, Rule, SignalModel,
};

#[derive(Parser)]
#[command(
    name = "supdeconv",
    version,
    about = "Supersmooth deconvolution density estimation and sup-norm inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deconvolution estimate on a grid (CSV out: x,value,kind).
    Estimate(EstimateArgs),
    /// Uniform confidence band (CSV out: x,center,lower,upper).
    Band {
        #[command(flatten)]
        est: EstimateArgs,
        #[arg(long, default_value_t = DEFAULT_BAND_LEVEL)]
        level: f64,
    },
    /// Sup distance to the expected estimate under a known signal (JSON out).
    Supstat {
        #[command(flatten)]
        est: EstimateArgs,
        #[command(flatten)]
        signal: SignalArg,
    },
    /// Monte Carlo convergence ladder for the scaled sup statistic.
    McSup(McArgs),
    /// Monte Carlo band coverage.
    McBands {
        #[command(flatten)]
        mc: McArgs,
        #[arg(long, default_value_t = DEFAULT_BAND_LEVEL)]
        level: f64,
        /// Use an infinite half-width (coverage must be 1).
        #[arg(long)]
        unbounded: bool,
    },
    /// Main term and remainders for a data set, or remainder ladder for a config.
    DiagDecomp(DiagArgs),
    /// Limit-law tables, process samples and simulations.
    LimitLaw {
        #[command(subcommand)]
        command: LimitCommand,
    },
    /// Check the model conditions (JSON out).
    Validate {
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ErrorArg {
    Gaussian,
    GaussianLaplaceMix,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    SincFlat,
    Polynomial,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Simpson,
    Trapezoid,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    error: ErrorArg,
    #[arg(long, value_enum, default_value = "sinc-flat")]
    kernel: KernelArg,
    /// Exponent m of the polynomial kernel (1 - s^2)^m.
    #[arg(long, default_value_t = 3)]
    m: u32,
}

impl ModelArgs {
    fn error(&self) -> ErrorModel {
        match self.error {
            ErrorArg::Gaussian => ErrorModel::gaussian(),
            ErrorArg::GaussianLaplaceMix => ErrorModel::gaussian_laplace_mix(),
        }
    }

    fn kernel(&self) -> KernelModel {
        match self.kernel {
            KernelArg::SincFlat => KernelModel::SincFlat,
            KernelArg::Polynomial => KernelModel::polynomial(self.m),
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// CSV file with one observation per row.
    #[arg(long, short)]
    input: PathBuf,
    #[command(flatten)]
    models: ModelArgs,
    /// Bandwidth.
    #[arg(long)]
    h: f64,
    #[arg(long, default_value_t = 256)]
    grid_points: usize,
    #[arg(long, num_args = 2, value_names = ["A", "B"], default_values_t = [0.0, 1.0], allow_negative_numbers = true)]
    interval: Vec<f64>,
    #[arg(long, default_value_t = QuadratureSpec::default().nodes_per_unit)]
    nodes_per_unit: usize,
    #[arg(long, value_enum, default_value = "simpson")]
    rule: RuleArg,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl EstimateArgs {
    fn config(&self) -> Result<EstimatorConfig> {
        let rule = match self.rule {
            RuleArg::Simpson => Rule::Simpson,
            RuleArg::Trapezoid => Rule::Trapezoid,
        };
        let cfg = EstimatorConfig::new(self.h)
            .with_quadrature(QuadratureSpec::new(self.nodes_per_unit, rule)?);
        cfg.validate_for(&self.models.error())?;
        Ok(cfg)
    }

    fn grid(&self) -> Result<Vec<f64>> {
        uniform_grid(self.interval[0], self.interval[1], self.grid_points)
    }
}

#[derive(Args)]
struct SignalArg {
    /// Signal model as JSON, e.g. {"name":"gaussian","params":{"mean":0,"sd":1}}.
    #[arg(long)]
    signal: Option<String>,
}

impl SignalArg {
    fn model(&self) -> Result<SignalModel> {
        let s = match &self.signal {
            None => SignalModel::default(),
            Some(text) => serde_json::from_str(text)
                .map_err(|e| DeconvError::InvalidInput(format!("signal: {e}")))?,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Args)]
struct McArgs {
    /// Experiment configuration (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides output_dir from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl McArgs {
    fn load(&self) -> Result<(ExperimentConfig, RunOptions)> {
        let mut cfg = ExperimentConfig::from_file(&self.config)?;
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = Some(dir.clone());
        }
        if let Some(dir) = &cfg.output_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok((
            cfg,
            RunOptions {
                threads: self.threads,
            },
        ))
    }
}

#[derive(Args)]
struct DiagArgs {
    /// Ladder diagnostics from an experiment config instead of a data file.
    #[arg(long, conflicts_with = "input")]
    config: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[command(flatten)]
    models: ModelArgs,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 256)]
    grid_points: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum LimitCommand {
    /// CSV of x, pdf, cdf of the standard Rayleigh law.
    RayleighTable {
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, default_value_t = 4.0)]
        max: f64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// One path of the Gaussian process W on a periodic grid (CSV y,w).
    WPath {
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// KS summary of exact draws of sup|W| against its closed-form law.
    ExactSup {
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.005)]
        threshold: f64,
    },
    /// Replicates of the periodized cosine supremum for every rung of a config.
    CosineSup(McArgs),
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: serde::Serialize>(path: &Option<PathBuf>, value: &T) -> Result<()> {
    sink(path)?.write_all(to_json_string(value)?.as_bytes())?;
    Ok(())
}

fn read_input(path: &Path) -> Result<supdeconv::SampleSet> {
    read_samples_file(path)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(a) => {
            let cfg = a.config()?;
            let data = read_input(&a.input)?;
            let est = deconv_estimate(
                &data,
                &a.models.error(),
                &a.models.kernel(),
                &cfg,
                &a.grid()?,
            )?;
            write_estimate_csv(sink(&a.output)?, &est)
        }
        Command::Band { est: a, level } => {
            let cfg = a.config()?;
            let data = read_input(&a.input)?;
            let band = confidence_band(
                &data,
                &a.models.error(),
                &a.models.kernel(),
                &cfg,
                &a.grid()?,
                level,
            )?;
            write_band_csv(sink(&a.output)?, &band)
        }
        Command::Supstat { est: a, signal } => {
            let cfg = a.config()?;
            let signal = signal.model()?;
            let data = read_input(&a.input)?;
            let (error, kernel) = (a.models.error(), a.models.kernel());
            let centered = centered_estimate(&data, &signal, &error, &kernel, &cfg, &a.grid()?)?;
            let result = sup_statistic(&centered, data.len(), &error, &kernel, a.h)?;
            emit_json(&a.output, &result)
        }
        Command::McSup(mc) => {
            let (cfg, opts) = mc.load()?;
            emit_json(&None, &run_sup_convergence(&cfg, &opts)?)
        }
        Command::McBands {
            mc,
            level,
            unbounded,
        } => {
            let (cfg, opts) = mc.load()?;
            emit_json(&None, &run_band_coverage(&cfg, level, unbounded, &opts)?)
        }
        Command::DiagDecomp(d) => diag(d),
        Command::LimitLaw { command } => limit_law(command),
        Command::Validate { models, output } => {
            let report = validate_conditions(&models.error(), &models.kernel());
            emit_json(&output, &report)?;
            if report.all_passed {
                Ok(())
            } else {
                Err(DeconvError::InvalidInput(
                    "model conditions not satisfied".into(),
                ))
            }
        }
    }
}

fn diag(d: DiagArgs) -> Result<()> {
    if let Some(path) = &d.config {
        let cfg = ExperimentConfig::from_file(path)?;
        if let Some(dir) = &cfg.output_dir {
            std::fs::create_dir_all(dir)?;
        }
        let report = run_remainder_diagnostics(&cfg, &RunOptions { threads: d.threads })?;
        return emit_json(&d.output, &report);
    }
    let input = d
        .input
        .as_ref()
        .ok_or_else(|| DeconvError::InvalidInput("diag-decomp needs --input or --config".into()))?;
    let h =
        d.h.ok_or_else(|| DeconvError::InvalidInput("diag-decomp --input needs --h".into()))?;
    let (error, kernel) = (d.models.error(), d.models.kernel());
    let cfg = EstimatorConfig::new(h);
    cfg.validate_for(&error)?;
    let dcfg = DecompositionConfig::new(d.epsilon)?;
    let grid = uniform_grid(0.0, 1.0, d.grid_points)?;
    let data = read_input(input)?;
    let parts = decompose(&data, &error, &kernel, &cfg, &dcfg, &grid)?;
    let direct = deconv_estimate(&data, &error, &kernel, &cfg, &grid)?;
    let recon = parts.reconstruction();
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| {
            vec![
                grid[i],
                parts.main_term.values[i],
                parts.r1.values[i],
                parts.r2.values[i],
                parts.r3.values[i],
                direct.values[i],
                recon[i] - direct.values[i],
            ]
        })
        .collect();
    write_table_csv(
        sink(&d.output)?,
        &["x", "main", "r1", "r2", "r3", "fnh", "residual"],
        &rows,
    )
}

fn limit_law(cmd: LimitCommand) -> Result<()> {
    match cmd {
        LimitCommand::RayleighTable {
            points,
            max,
            output,
        } => {
            if points < 2 || max.is_nan() || max <= 0.0 {
                return Err(DeconvError::InvalidInput(
                    "need points >= 2 and max > 0".into(),
                ));
            }
            let rows: Vec<Vec<f64>> = uniform_grid(0.0, max, points)?
                .into_iter()
                .map(|x| vec![x, rayleigh_pdf(x), rayleigh_cdf(x)])
                .collect();
            write_table_csv(sink(&output)?, &["x", "pdf", "cdf"], &rows)
        }
        LimitCommand::WPath { grid, seed, output } => {
            let y = periodic_grid(grid);
            let path = sample_w_process(&y, seed)?;
            let rows: Vec<Vec<f64>> = path
                .grid
                .iter()
                .zip(&path.path)
                .map(|(&a, &b)| vec![a, b])
                .collect();
            write_table_csv(sink(&output)?, &["y", "w"], &rows)
        }
        LimitCommand::ExactSup {
            draws,
            seed,
            threshold,
        } => {
            let mut rng = rng_from_seed(seed);
            let v = exact_sup_draws(&mut rng, draws);
            let ks = ks_one_sample(&v, sup_w_cdf)?;
            emit_json(&None, &KsSummary::new(draws, ks, threshold))
        }
        LimitCommand::CosineSup(mc) => {
            let (cfg, opts) = mc.load()?;
            emit_json(&None, &run_cosine_process(&cfg, &opts)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
