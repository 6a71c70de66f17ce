use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spikecheck::dtmc::{self, build_dtmc, Dtmc};
use spikecheck::network::NetworkSpec;
use spikecheck::snnrf::{self, LoadError, ParseOptions, ValidationReport};
use spikecheck::{engine, pctl, prismgen};

#[derive(Parser)]
#[command(name = "spikecheck", version, about = "Simulate and model-check probabilistic spiking networks")]
struct Cli {
    /// Accept unknown keys in SNN-RF files with a warning.
    #[arg(long, global = true)]
    lax: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a network file.
    Validate { file: PathBuf },
    /// Run the stochastic simulator.
    Simulate {
        file: PathBuf,
        /// Defaults to the file's `simulate.steps`.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// With more than one run, writes per-step spike frequencies.
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the DTMC and check properties, printing one JSON record per line.
    Check {
        file: PathBuf,
        /// Inline property; may be repeated.
        #[arg(long = "property", short = 'p')]
        properties: Vec<String>,
        /// Check every property listed in the file.
        #[arg(long)]
        all: bool,
        #[arg(long, env = "SPIKECHECK_MAX_STATES", default_value_t = dtmc::DEFAULT_MAX_STATES)]
        max_states: usize,
    },
    /// Write `<name>.pm` and `<name>.props` for PRISM.
    ExportPrism {
        file: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Spike raster of one simulated run as SVG.
    Plot {
        file: PathBuf,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the explicit state space and transition list.
    DumpDtmc {
        file: PathBuf,
        #[arg(long, env = "SPIKECHECK_MAX_STATES", default_value_t = dtmc::DEFAULT_MAX_STATES)]
        max_states: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

enum Failure {
    /// Invalid model, failed verdict, unsupported property: exit 1.
    Domain(String),
    /// Unreadable input, unwritable output, bad flags: exit 2.
    Usage(String),
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let options = ParseOptions { strict: !cli.lax };
    let result = match cli.command {
        Command::Validate { file } => validate(&file, options),
        Command::Simulate {
            file,
            steps,
            seed,
            runs,
            format,
            out,
        } => simulate(&file, options, steps, seed, runs, format, out.as_deref()),
        Command::Check {
            file,
            properties,
            all,
            max_states,
        } => check(&file, options, &properties, all, max_states),
        Command::ExportPrism { file, out } => export_prism(&file, options, &out),
        Command::Plot { file, steps, seed, out } => {
            simulate(&file, options, steps, seed, 1, Format::Svg, out.as_deref())
        }
        Command::DumpDtmc { file, max_states } => {
            load(&file, options).and_then(|spec| emit(None, &chain(&spec, max_states)?.dump()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(message)) => {
            if !message.is_empty() {
                eprintln!("error: {message}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn warn(path: &Path, report: &ValidationReport) {
    for w in &report.warnings {
        eprintln!("{}: warning: {w}", path.display());
    }
}

fn load(path: &Path, options: ParseOptions) -> Result<NetworkSpec, Failure> {
    match snnrf::load(&read(path)?, options) {
        Ok((spec, report)) => {
            warn(path, &report);
            Ok(spec)
        }
        Err(LoadError::Parse(e)) => Err(Failure::Domain(format!("{}: {e}", path.display()))),
        Err(LoadError::Invalid(report)) => {
            warn(path, &report);
            for e in &report.errors {
                eprintln!("{}: error: {e}", path.display());
            }
            Err(Failure::Domain(String::new()))
        }
    }
}

fn chain(spec: &NetworkSpec, max_states: usize) -> Result<Dtmc, Failure> {
    build_dtmc(spec, max_states).map_err(|e| Failure::Domain(e.to_string()))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Usage(format!("stdout: {e}"))),
    }
}

fn validate(path: &Path, options: ParseOptions) -> Outcome {
    let spec = load(path, options)?;
    eprintln!(
        "{}: ok ({} neurons, {} inputs, {} edges, {} properties)",
        path.display(),
        spec.neurons.len(),
        spec.inputs.len(),
        spec.edges.len(),
        spec.properties.len()
    );
    Ok(())
}

fn simulate(
    path: &Path,
    options: ParseOptions,
    steps: Option<u64>,
    seed: u64,
    runs: u64,
    format: Format,
    out: Option<&Path>,
) -> Outcome {
    if runs == 0 {
        return Err(Failure::Usage("--runs must be at least 1".into()));
    }
    if runs > 1 && format == Format::Svg {
        return Err(Failure::Usage("--format svg plots a single run; drop --runs".into()));
    }
    let spec = load(path, options)?;
    let steps = steps.unwrap_or(spec.steps);
    let text = if runs > 1 {
        engine::ensemble(&spec, steps, runs, seed)
            .map_err(|e| Failure::Domain(e.to_string()))?
            .to_csv()
    } else {
        let trace = engine::simulate(&spec, steps, seed);
        match format {
            Format::Csv => engine::export_trace_csv(&trace),
            Format::Svg => engine::raster_svg(&trace),
        }
    };
    emit(out, &text)
}

fn check(path: &Path, options: ParseOptions, inline: &[String], all: bool, max_states: usize) -> Outcome {
    if inline.is_empty() && !all {
        return Err(Failure::Usage("give --property or --all".into()));
    }
    let spec = load(path, options)?;
    let mut properties: Vec<String> = inline.to_vec();
    if all {
        for p in &spec.properties {
            if !properties.contains(p) {
                properties.push(p.clone());
            }
        }
    }
    let formulas = properties
        .iter()
        .map(|p| pctl::parse_formula(p).map_err(|e| Failure::Domain(format!("{p}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let dtmc = chain(&spec, max_states)?;
    let mut failed = false;
    let mut stdout = io::stdout().lock();
    for (text, formula) in properties.iter().zip(&formulas) {
        let result = pctl::check(&dtmc, formula).map_err(|e| Failure::Domain(format!("{text}: {e}")))?;
        failed |= result.verdict() == Some(false);
        writeln!(stdout, "{}", result.to_json(text)).map_err(|e| Failure::Usage(format!("stdout: {e}")))?;
    }
    if failed {
        Err(Failure::Domain("at least one property is false".into()))
    } else {
        Ok(())
    }
}

fn export_prism(path: &Path, options: ParseOptions, dir: &Path) -> Outcome {
    let spec = load(path, options)?;
    let model = prismgen::emit_model(&spec).map_err(|e| Failure::Domain(e.to_string()))?;
    let props = prismgen::emit_properties(&spec, &spec.properties).map_err(|e| Failure::Domain(e.to_string()))?;
    let stem = prismgen::sanitize_name(&spec.name);
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    for (ext, text) in [("pm", &model), ("props", &props)] {
        let file = dir.join(format!("{stem}.{ext}"));
        emit(Some(&file), text)?;
        eprintln!("wrote {}", file.display());
    }
    Ok(())
}
