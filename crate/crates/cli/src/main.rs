use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edrvfl_iol::experiment::{
    ablation_sweep, export_report, preset, preset_names, run_experiment, AblationAxis, ExperimentConfig,
    ExperimentReport, ExportFormat,
};
use edrvfl_iol::{Error, Style};
use log::info;

/// Incremental online learning experiments for edRVFL networks.
#[derive(Parser)]
#[command(name = "edrvfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthetic regret simulation.
    Simulate(RunArgs),
    /// Run any experiment, typically a dataset baseline.
    Bench(RunArgs),
    /// Sweep one parameter, holding everything else and the seeds fixed.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// N, L, lambda, b or normalization.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; `1/T` is accepted for lambda on synthetic tasks.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Re-export a JSON report.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv-long")]
        format: FormatArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the shipped presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Ridge,
    Forward,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    CsvLong,
    Json,
    Both,
}

impl FormatArg {
    fn formats(self) -> Vec<ExportFormat> {
        match self {
            FormatArg::CsvLong => vec![ExportFormat::CsvLong],
            FormatArg::Json => vec![ExportFormat::Json],
            FormatArg::Both => vec![ExportFormat::CsvLong, ExportFormat::Json],
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Name of a shipped preset.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    style: Option<StyleArg>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Directory holding fetched datasets, for presets.
    #[arg(long, env = "EDRVFL_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    format: FormatArg,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match (&self.config, &self.preset) {
            // An unreadable config file is a config problem, not a run failure.
            (Some(path), _) => ExperimentConfig::load(path).map_err(|e| match e {
                Error::Io { .. } => Error::Config(e.to_string()),
                e => e,
            })?,
            (None, Some(name)) => preset(name, &self.data_dir)?,
            (None, None) => {
                return Err(Error::Config(format!(
                    "pass --config <file> or --preset <{}>",
                    preset_names().join("|")
                )))
            }
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(reps) = self.reps {
            cfg.repetitions = reps;
        }
        if let Some(style) = self.style {
            cfg.styles = match style {
                StyleArg::Ridge => vec![Style::Ridge],
                StyleArg::Forward => vec![Style::Forward],
                StyleArg::Both => vec![Style::Ridge, Style::Forward],
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write(report: &ExperimentReport, out: &Path, formats: &[ExportFormat]) -> Result<(), Error> {
    for path in export_report(report, out, formats)? {
        println!("{}", path.display());
    }
    for s in &report.summaries {
        if s.series.starts_with("test_ensemble") || s.series == "oracle_distance" || s.series == "cr_offline" {
            info!("{} {} t={}: mean {:.6} std {:.6} (n={})", s.style, s.series, s.t, s.mean, s.std, s.n);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.config()?;
            if !cfg.task.is_synthetic() {
                return Err(Error::Config(format!(
                    "simulate runs synthetic tasks; {:?} belongs to `bench`",
                    cfg.task
                )));
            }
            write(&run_experiment(&cfg)?, &args.out, &args.format.formats())
        }
        Command::Bench(args) => {
            let cfg = args.config()?;
            write(&run_experiment(&cfg)?, &args.out, &args.format.formats())
        }
        Command::Ablate { run, axis, values } => {
            let cfg = run.config()?;
            let axis: AblationAxis = axis.parse()?;
            for report in ablation_sweep(&cfg, axis, &values)? {
                write(&report, &run.out, &run.format.formats())?;
            }
            Ok(())
        }
        Command::Export { input, format, out } => {
            let report = ExperimentReport::load(&input)?;
            write(&report, &out, &format.formats())
        }
        Command::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() {
                2
            } else if e.is_numerical() {
                3
            } else {
                1
            })
        }
    }
}
