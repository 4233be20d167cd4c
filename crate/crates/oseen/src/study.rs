//! Convergence studies, α sweeps and η–α grids for the manufactured case.

use rayon::prelude::*;

use oseen_core::analysis::{compute_rates, l2_error, pressure_mean, ConvergenceRecord, ErrorReport};
use oseen_core::forms::{assemble_global, Convection, ElementSize, OseenConfig, QuadratureOptions};
use oseen_core::linsys::{SolveDiagnostics, SolveStrategy};
use oseen_core::mesh::build_uniform_mesh;
use oseen_core::spaces::{build_layout, ElementField, MethodVariant};

use crate::error::{StudyError, StudyResult};
use crate::manufactured::ManufacturedCase;
use crate::solver::solve_timed;

/// Velocity penalty used when none is given: 6k² for HDG, 4k² otherwise.
pub fn default_eta(variant: MethodVariant, k: usize) -> f64 {
    let c = if variant == MethodVariant::Hdg { 6.0 } else { 4.0 };
    c * (k * k) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub variant: MethodVariant,
    pub k: usize,
    pub nu: f64,
    pub sigma: f64,
    pub convection: [f64; 2],
    /// `None` selects [`default_eta`].
    pub eta: Option<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub strategy: SolveStrategy,
    pub quadrature: QuadratureOptions,
    pub element_size: ElementSize,
}

impl StudyConfig {
    /// Defaults of the reference experiments: σ = 1, b = (1, 0), α = 1e-2, γ = 1,
    /// meshes n = 2..64 for k = 1 and 2..32 otherwise.
    pub fn new(variant: MethodVariant, k: usize, nu: f64) -> Self {
        Self {
            variant,
            k,
            nu,
            sigma: 1.0,
            convection: [1.0, 0.0],
            eta: None,
            alpha: 1e-2,
            gamma: 1.0,
            n_min: 2,
            n_max: if k == 1 { 64 } else { 32 },
            strategy: SolveStrategy::Direct,
            quadrature: QuadratureOptions::default(),
            element_size: ElementSize::Diameter,
        }
    }

    pub fn with_meshes(mut self, n_min: usize, n_max: usize) -> Self {
        self.n_min = n_min;
        self.n_max = n_max;
        self
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or_else(|| default_eta(self.variant, self.k))
    }

    /// `n_min, 2 n_min, …, n_max`; both ends must be powers of two.
    pub fn mesh_sizes(&self) -> StudyResult<Vec<usize>> {
        if !self.n_min.is_power_of_two() || !self.n_max.is_power_of_two() || self.n_min > self.n_max {
            return Err(StudyError::Config(format!(
                "mesh range {}..{} must be powers of two in increasing order",
                self.n_min, self.n_max
            )));
        }
        Ok(std::iter::successors(Some(self.n_min), |&n| (n < self.n_max).then_some(2 * n)).collect())
    }

    pub fn oseen_config(&self) -> StudyResult<OseenConfig> {
        Ok(OseenConfig::new(self.nu, self.sigma, Convection::Constant(self.convection), self.eta(), self.alpha, self.gamma)?
            .with_quadrature(self.quadrature)
            .with_element_size(self.element_size))
    }

    pub fn manufactured(&self) -> ManufacturedCase {
        ManufacturedCase::new(self.nu, self.sigma, self.convection)
    }
}

/// Errors and solver diagnostics of one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub n: usize,
    pub report: ErrorReport,
    pub diagnostics: SolveDiagnostics,
    /// ∫_Ω p_h
    pub pressure_mean: f64,
    /// ‖p_h‖_{L²}
    pub pressure_norm: f64,
}

pub fn run_case(config: &StudyConfig, n: usize) -> StudyResult<CaseResult> {
    let wrap = |source| StudyError::Case { n, source };
    let mesh = build_uniform_mesh(n).map_err(wrap)?;
    let layout = build_layout(&mesh, config.k, config.variant).map_err(wrap)?;
    let oseen = config.oseen_config()?;
    let exact = config.manufactured();
    let system = assemble_global(&mesh, &layout, &oseen, &|x| exact.source(x)).map_err(wrap)?;
    let solution = solve_timed(&system, config.strategy).map_err(wrap)?;
    let x = &solution.coefficients;
    let report = ErrorReport::compute(&mesh, &layout, &oseen, x, &exact).map_err(wrap)?;
    let mean = pressure_mean(&mesh, &layout, x).map_err(wrap)?;
    let norm = l2_error(&mesh, &layout, x, ElementField::Pressure, &|_| [0.0; 2], 2 * config.k).map_err(wrap)?;
    Ok(CaseResult { n, report, diagnostics: solution.diagnostics, pressure_mean: mean, pressure_norm: norm })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub config: StudyConfig,
    pub cases: Vec<CaseResult>,
    pub record: ConvergenceRecord,
}

/// Runs every mesh of the configured range (in parallel) and computes rates.
pub fn run_convergence_study(config: &StudyConfig) -> StudyResult<ConvergenceStudy> {
    config.oseen_config()?;
    let sizes = config.mesh_sizes()?;
    let cases: Vec<CaseResult> = sizes.par_iter().map(|&n| run_case(config, n)).collect::<StudyResult<_>>()?;
    let record = compute_rates(cases.iter().map(|c| c.report).collect())?;
    Ok(ConvergenceStudy { config: config.clone(), cases, record })
}

/// One (η, α, n) cell of a sweep; failures are kept as messages.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub eta: f64,
    pub alpha: f64,
    pub n: usize,
    pub h: f64,
    pub outcome: Result<ErrorReport, String>,
}

fn sorted_unique(values: &[f64], what: &str) -> StudyResult<Vec<f64>> {
    if values.is_empty() {
        return Err(StudyError::Config(format!("{what} list is empty")));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(StudyError::Config(format!("{what} must be positive, got {v}")));
    }
    let mut out = values.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

fn run_cells(config: &StudyConfig, etas: &[f64], alphas: &[f64]) -> StudyResult<Vec<SweepCell>> {
    let sizes = config.mesh_sizes()?;
    let mut cells = Vec::with_capacity(etas.len() * alphas.len() * sizes.len());
    for &eta in etas {
        for &alpha in alphas {
            cells.extend(sizes.iter().map(|&n| (eta, alpha, n)));
        }
    }
    Ok(cells
        .into_par_iter()
        .map(|(eta, alpha, n)| {
            let cfg = StudyConfig { eta: Some(eta), alpha, ..config.clone() };
            let outcome = run_case(&cfg, n).map(|c| c.report).map_err(|e| e.to_string());
            SweepCell { eta, alpha, n, h: 1.0 / n as f64, outcome }
        })
        .collect())
}

/// Errors for each α (sorted, deduplicated) on every mesh of the range, at the configured η.
pub fn run_alpha_sweep(config: &StudyConfig, alphas: &[f64]) -> StudyResult<Vec<SweepCell>> {
    let alphas = sorted_unique(alphas, "alpha")?;
    run_cells(config, &[config.eta()], &alphas)
}

/// The α sweep repeated for each η; failing cells are reported, not fatal.
pub fn run_eta_alpha_grid(config: &StudyConfig, etas: &[f64], alphas: &[f64]) -> StudyResult<Vec<SweepCell>> {
    let etas = sorted_unique(etas, "eta")?;
    let alphas = sorted_unique(alphas, "alpha")?;
    run_cells(config, &etas, &alphas)
}
