use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oseen::config::{FileConfig, Settings};
use oseen::dump::{write_coordinate, write_mesh, write_vector};
use oseen::output::{
    study_rows, write_grid_csv, write_json, write_study_csv, write_sweep_csv, OutputFormat, StudyJson, SweepJson,
};
use oseen::solver::use_sequential_factorization;
use oseen::study::{run_alpha_sweep, run_convergence_study, run_eta_alpha_grid, ConvergenceStudy, SweepCell};
use oseen::{StudyError, StudyResult};
use oseen_core::forms::assemble_global;
use oseen_core::mesh::build_uniform_mesh;
use oseen_core::spaces::build_layout;

/// Equal-order HDG, E-HDG and EDG solvers for the 2D Oseen problem with convergence studies.
#[derive(Debug, Parser)]
#[command(name = "oseen-hdg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    options: Options,
}

/// Overrides for the configuration file; all apply to every subcommand.
#[derive(Debug, Args)]
struct Options {
    /// Flat TOML file with any of the keys below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// hdg, ehdg or edg.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Polynomial degree k.
    #[arg(long, global = true)]
    degree: Option<usize>,
    #[arg(long, global = true)]
    nu: Option<f64>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Constant convective field such as "(1,0)".
    #[arg(long, global = true, allow_hyphen_values = true)]
    convection: Option<String>,
    /// Velocity penalty; defaults to 6k² (HDG) or 4k² (EDG, E-HDG).
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Pressure penalty.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Weight of the pressure L² part of the energy norm.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    nmin: Option<usize>,
    #[arg(long, global = true)]
    nmax: Option<usize>,
    /// direct or condensed.
    #[arg(long, global = true)]
    solver: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// diameter or sqrt-two-area.
    #[arg(long, global = true)]
    element_size: Option<String>,
    /// Allow meshes up to n = 256.
    #[arg(long, global = true)]
    large: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Errors and observed rates on n = nmin, 2 nmin, …, nmax.
    Study,
    /// Errors for each pressure penalty on every mesh.
    AlphaSweep {
        /// Comma-separated list.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// The α sweep repeated for each velocity penalty.
    Grid {
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Vertices, elements and facets of the uniform n×n mesh.
    DumpMesh {
        #[arg(long)]
        n: usize,
    },
    /// Assembled global matrix in coordinate format.
    DumpMatrix {
        #[arg(long)]
        n: usize,
        /// Also write the right-hand side here.
        #[arg(long)]
        rhs: Option<PathBuf>,
    },
}

impl Options {
    fn overrides(&self) -> FileConfig {
        FileConfig {
            method: self.method.clone(),
            degree: self.degree,
            nu: self.nu,
            sigma: self.sigma,
            convection: self.convection.clone(),
            eta: self.eta,
            alpha: self.alpha,
            gamma: self.gamma,
            nmin: self.nmin,
            nmax: self.nmax,
            solver: self.solver.clone(),
            out: self.out.clone(),
            format: self.format.clone(),
            element_size: self.element_size.clone(),
            large: self.large.then_some(true),
            ..FileConfig::default()
        }
    }
}

fn open_output(path: Option<&Path>) -> StudyResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn report_study(study: &ConvergenceStudy) {
    for case in &study.cases {
        let d = &case.diagnostics;
        eprintln!(
            "n={:<4} unknowns={:<8} solved={:<8} residual={:.1e} time={:.2}s",
            case.n,
            d.dimension,
            d.solved_dimension,
            d.relative_residual,
            d.factorization_seconds.unwrap_or(f64::NAN)
        );
    }
}

/// Prints failures and returns how many cells failed.
fn report_cells(cells: &[SweepCell]) -> usize {
    let failed: Vec<_> = cells.iter().filter_map(|c| c.outcome.as_ref().err().map(|e| (c, e))).collect();
    for (c, e) in &failed {
        eprintln!("failed: eta={} alpha={} n={}: {e}", c.eta, c.alpha, c.n);
    }
    failed.len()
}

fn run(cli: Cli) -> StudyResult<bool> {
    let base = match &cli.options.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut overrides = cli.options.overrides();
    match &cli.command {
        Command::AlphaSweep { alphas } => overrides.alphas = alphas.clone(),
        Command::Grid { etas, alphas } => {
            overrides.etas = etas.clone();
            overrides.alphas = alphas.clone();
        }
        _ => {}
    }
    let Settings { study: config, format, out, alphas, etas } = base.overlay(overrides).resolve()?;
    let mut sink = open_output(out.as_deref())?;

    let success = match cli.command {
        Command::Study => {
            let study = run_convergence_study(&config)?;
            report_study(&study);
            match format {
                OutputFormat::Csv => write_study_csv(&study_rows(&study), &mut sink)?,
                OutputFormat::Json => write_json(&StudyJson::from(&study), &mut sink)?,
            }
            true
        }
        Command::AlphaSweep { .. } => {
            let cells = run_alpha_sweep(&config, &alphas)?;
            match format {
                OutputFormat::Csv => write_sweep_csv(&cells, &mut sink)?,
                OutputFormat::Json => write_json(&SweepJson::new(&config, &cells), &mut sink)?,
            }
            report_cells(&cells) == 0
        }
        Command::Grid { .. } => {
            let cells = run_eta_alpha_grid(&config, &etas, &alphas)?;
            match format {
                OutputFormat::Csv => write_grid_csv(&cells, &mut sink)?,
                OutputFormat::Json => write_json(&SweepJson::new(&config, &cells), &mut sink)?,
            }
            report_cells(&cells) == 0
        }
        Command::DumpMesh { n } => {
            write_mesh(&build_uniform_mesh(n)?, &mut sink)?;
            true
        }
        Command::DumpMatrix { n, rhs } => {
            let mesh = build_uniform_mesh(n)?;
            let layout = build_layout(&mesh, config.k, config.variant)?;
            let exact = config.manufactured();
            let system = assemble_global(&mesh, &layout, &config.oseen_config()?, &|x| exact.source(x))?;
            write_coordinate(&system.matrix, &mut sink)?;
            if let Some(path) = rhs {
                write_vector(&system.rhs, BufWriter::new(File::create(path)?))?;
            }
            true
        }
    };
    sink.flush().map_err(StudyError::from)?;
    Ok(success)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    use_sequential_factorization();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
