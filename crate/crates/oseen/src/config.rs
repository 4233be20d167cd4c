//! Flat TOML configuration merged with command-line overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use oseen_core::forms::{ElementSize, QuadratureOptions};
use oseen_core::linsys::SolveStrategy;
use oseen_core::spaces::MethodVariant;

use crate::error::{StudyError, StudyResult};
use crate::output::OutputFormat;
use crate::study::StudyConfig;

/// Largest mesh accepted without `large = true`.
pub const DEFAULT_MESH_LIMIT: usize = 64;
pub const LARGE_MESH_LIMIT: usize = 256;
pub const DEFAULT_ALPHAS: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
/// Multiples of k² used for the η axis of a grid when none is given.
pub const DEFAULT_ETA_FACTORS: [f64; 4] = [2.0, 4.0, 6.0, 8.0];

/// Every key is optional; absent keys take the study defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub method: Option<String>,
    pub degree: Option<usize>,
    pub nu: Option<f64>,
    pub sigma: Option<f64>,
    /// Constant convective field, e.g. `"(1,0)"`.
    pub convection: Option<String>,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub nmin: Option<usize>,
    pub nmax: Option<usize>,
    pub solver: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub element_size: Option<String>,
    pub source_quadrature: Option<usize>,
    pub alphas: Option<Vec<f64>>,
    pub etas: Option<Vec<f64>>,
    pub large: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub study: StudyConfig,
    pub format: OutputFormat,
    /// `None` writes to stdout.
    pub out: Option<PathBuf>,
    pub alphas: Vec<f64>,
    pub etas: Vec<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        FileConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl FileConfig {
    pub fn load(path: &Path) -> StudyResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> StudyResult<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Fields set in `top` win.
    pub fn overlay(self, top: FileConfig) -> FileConfig {
        let base = self;
        overlay!(base, top; method, degree, nu, sigma, convection, eta, alpha, gamma, nmin, nmax, solver, out,
            format, element_size, source_quadrature, alphas, etas, large)
    }

    pub fn resolve(&self) -> StudyResult<Settings> {
        let variant = match &self.method {
            Some(m) => parse_method(m)?,
            None => MethodVariant::Hdg,
        };
        let k = self.degree.unwrap_or(1);
        oseen_core::refspace::check_degree(k)?;
        let mut study = StudyConfig::new(variant, k, self.nu.unwrap_or(1.0));
        if let Some(s) = self.sigma {
            study.sigma = s;
        }
        if let Some(b) = &self.convection {
            study.convection = parse_vector(b)?;
        }
        study.eta = self.eta;
        if let Some(a) = self.alpha {
            study.alpha = a;
        }
        if let Some(g) = self.gamma {
            study.gamma = g;
        }
        study.n_min = self.nmin.unwrap_or(study.n_min);
        study.n_max = self.nmax.unwrap_or(study.n_max);
        if let Some(s) = &self.solver {
            study.strategy = parse_solver(s)?;
        }
        if let Some(e) = &self.element_size {
            study.element_size = parse_element_size(e)?;
        }
        if let Some(q) = self.source_quadrature {
            study.quadrature = QuadratureOptions { source: q, ..study.quadrature };
        }
        study.mesh_sizes()?;
        let limit = if self.large.unwrap_or(false) { LARGE_MESH_LIMIT } else { DEFAULT_MESH_LIMIT };
        if study.n_max > limit {
            return Err(StudyError::Config(format!(
                "nmax = {} exceeds {limit}; meshes up to {LARGE_MESH_LIMIT} need --large",
                study.n_max
            )));
        }
        study.oseen_config()?;

        let format = match &self.format {
            Some(f) => parse_format(f)?,
            None => OutputFormat::Csv,
        };
        let kk = (k * k) as f64;
        Ok(Settings {
            study,
            format,
            out: self.out.clone(),
            alphas: self.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHAS.to_vec()),
            etas: self.etas.clone().unwrap_or_else(|| DEFAULT_ETA_FACTORS.iter().map(|f| f * kk).collect()),
        })
    }
}

pub fn parse_method(s: &str) -> StudyResult<MethodVariant> {
    match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
        "hdg" => Ok(MethodVariant::Hdg),
        "ehdg" => Ok(MethodVariant::Ehdg),
        "edg" => Ok(MethodVariant::Edg),
        _ => Err(StudyError::Config(format!("unknown method {s:?} (expected hdg, ehdg or edg)"))),
    }
}

pub fn parse_solver(s: &str) -> StudyResult<SolveStrategy> {
    match s.to_ascii_lowercase().as_str() {
        "direct" => Ok(SolveStrategy::Direct),
        "condensed" => Ok(SolveStrategy::Condensed),
        _ => Err(StudyError::Config(format!("unknown solver {s:?} (expected direct or condensed)"))),
    }
}

pub fn parse_format(s: &str) -> StudyResult<OutputFormat> {
    match s.to_ascii_lowercase().as_str() {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        _ => Err(StudyError::Config(format!("unknown format {s:?} (expected csv or json)"))),
    }
}

pub fn parse_element_size(s: &str) -> StudyResult<ElementSize> {
    match s.to_ascii_lowercase().as_str() {
        "diameter" => Ok(ElementSize::Diameter),
        "sqrt-two-area" => Ok(ElementSize::SqrtTwiceArea),
        _ => Err(StudyError::Config(format!("unknown element size {s:?} (expected diameter or sqrt-two-area)"))),
    }
}

/// `"(1,0)"`, `"1,0"` or `"1 0"`.
pub fn parse_vector(s: &str) -> StudyResult<[f64; 2]> {
    let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
    let parts: Vec<&str> = inner.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
    let bad = || StudyError::Config(format!("convection must look like (bx,by), got {s:?}"));
    match parts.as_slice() {
        [x, y] => Ok([x.parse().map_err(|_| bad())?, y.parse().map_err(|_| bad())?]),
        _ => Err(bad()),
    }
}
