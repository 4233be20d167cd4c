//! CSV and JSON writers for studies and sweeps, and a CSV reader for study tables.
//!
//! Floats are written in e-notation with the shortest representation that
//! parses back to the same value, padded to at least four significant digits.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use oseen_core::analysis::{EnergyBreakdown, ErrorReport, Rates};
use oseen_core::forms::ElementSize;
use oseen_core::linsys::{SolveDiagnostics, SolveStrategy};

use crate::error::{StudyError, StudyResult};
use crate::study::{ConvergenceStudy, StudyConfig, SweepCell};

pub const STUDY_HEADER: [&str; 7] = ["h", "e_u", "r_u", "e_p", "r_p", "e_DG", "r_DG"];
pub const SWEEP_HEADER: [&str; 5] = ["alpha", "h", "e_u", "e_p", "e_DG"];
pub const GRID_HEADER: [&str; 7] = ["eta", "alpha", "h", "e_u", "e_p", "e_DG", "status"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

pub fn format_float(x: f64) -> String {
    let shortest = format!("{x:e}");
    let mantissa = shortest.split('e').next().unwrap_or("");
    let digits = mantissa.chars().filter(char::is_ascii_digit).count();
    if x.is_finite() && digits < 4 {
        format!("{x:.3e}")
    } else {
        shortest
    }
}

fn parse_float(field: &str) -> StudyResult<f64> {
    field.trim().parse().map_err(|_| StudyError::Config(format!("cannot parse number {field:?}")))
}

fn parse_optional(field: &str) -> StudyResult<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_float(field).map(Some)
    }
}

fn optional(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// One line of a study table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub h: f64,
    pub e_u: f64,
    pub r_u: Option<f64>,
    pub e_p: f64,
    pub r_p: Option<f64>,
    pub e_dg: f64,
    pub r_dg: Option<f64>,
}

impl StudyRow {
    pub fn new(report: &ErrorReport, rates: Option<Rates>) -> Self {
        Self {
            h: report.h,
            e_u: report.e_u,
            r_u: rates.map(|r| r.r_u),
            e_p: report.e_p,
            r_p: rates.map(|r| r.r_p),
            e_dg: report.e_energy,
            r_dg: rates.map(|r| r.r_dg),
        }
    }
}

pub fn study_rows(study: &ConvergenceStudy) -> Vec<StudyRow> {
    study.record.reports.iter().zip(&study.record.rates).map(|(r, rates)| StudyRow::new(r, *rates)).collect()
}

pub fn write_study_csv<W: Write>(rows: &[StudyRow], out: W) -> StudyResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STUDY_HEADER)?;
    for r in rows {
        w.write_record([
            format_float(r.h),
            format_float(r.e_u),
            optional(r.r_u),
            format_float(r.e_p),
            optional(r.r_p),
            format_float(r.e_dg),
            optional(r.r_dg),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_study_csv<R: Read>(input: R) -> StudyResult<Vec<StudyRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != STUDY_HEADER {
        return Err(StudyError::Config(format!("unexpected study header {header:?}")));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            Ok(StudyRow {
                h: parse_float(f(0))?,
                e_u: parse_float(f(1))?,
                r_u: parse_optional(f(2))?,
                e_p: parse_float(f(3))?,
                r_p: parse_optional(f(4))?,
                e_dg: parse_float(f(5))?,
                r_dg: parse_optional(f(6))?,
            })
        })
        .collect()
}

/// α-sweep rows; failed cells keep their α and h with empty error fields.
pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], out: W) -> StudyResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for c in cells {
        let errors = error_fields(c);
        w.write_record([format_float(c.alpha), format_float(c.h), errors[0].clone(), errors[1].clone(), errors[2].clone()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_grid_csv<W: Write>(cells: &[SweepCell], out: W) -> StudyResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GRID_HEADER)?;
    for c in cells {
        let [e_u, e_p, e_dg] = error_fields(c);
        let status = match &c.outcome {
            Ok(_) => "ok".to_owned(),
            Err(msg) => format!("failed: {msg}"),
        };
        w.write_record([format_float(c.eta), format_float(c.alpha), format_float(c.h), e_u, e_p, e_dg, status])?;
    }
    w.flush()?;
    Ok(())
}

fn error_fields(c: &SweepCell) -> [String; 3] {
    match &c.outcome {
        Ok(r) => [format_float(r.e_u), format_float(r.e_p), format_float(r.e_energy)],
        Err(_) => Default::default(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigJson {
    pub method: String,
    pub degree: usize,
    pub nu: f64,
    pub sigma: f64,
    pub convection: [f64; 2],
    pub eta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub solver: String,
    pub element_size: String,
}

impl From<&StudyConfig> for ConfigJson {
    fn from(c: &StudyConfig) -> Self {
        Self {
            method: c.variant.name().to_owned(),
            degree: c.k,
            nu: c.nu,
            sigma: c.sigma,
            convection: c.convection,
            eta: c.eta(),
            alpha: c.alpha,
            gamma: c.gamma,
            n_min: c.n_min,
            n_max: c.n_max,
            solver: strategy_name(c.strategy).to_owned(),
            element_size: match c.element_size {
                ElementSize::Diameter => "diameter",
                ElementSize::SqrtTwiceArea => "sqrt-two-area",
            }
            .to_owned(),
        }
    }
}

pub fn strategy_name(s: SolveStrategy) -> &'static str {
    match s {
        SolveStrategy::Direct => "direct",
        SolveStrategy::Condensed => "condensed",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakdownJson {
    pub viscous: f64,
    pub reaction: f64,
    pub upwind: f64,
    pub pressure_jump: f64,
    pub pressure_l2: f64,
}

impl From<EnergyBreakdown> for BreakdownJson {
    fn from(b: EnergyBreakdown) -> Self {
        Self {
            viscous: b.viscous,
            reaction: b.reaction,
            upwind: b.upwind,
            pressure_jump: b.pressure_jump,
            pressure_l2: b.pressure_l2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatesJson {
    pub r_u: f64,
    pub r_p: f64,
    pub r_dg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveJson {
    pub strategy: String,
    pub solver: String,
    pub dimension: usize,
    pub solved_dimension: usize,
    pub relative_residual: f64,
}

impl From<&SolveDiagnostics> for SolveJson {
    fn from(d: &SolveDiagnostics) -> Self {
        Self {
            strategy: strategy_name(d.strategy).to_owned(),
            solver: d.solver.to_owned(),
            dimension: d.dimension,
            solved_dimension: d.solved_dimension,
            relative_residual: d.relative_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseJson {
    pub n: usize,
    pub h: f64,
    pub e_u: f64,
    pub e_p: f64,
    pub e_dg: f64,
    pub rates: Option<RatesJson>,
    pub breakdown: BreakdownJson,
    pub pressure_mean: f64,
    pub pressure_norm: f64,
    pub solve: SolveJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyJson {
    pub config: ConfigJson,
    pub cases: Vec<CaseJson>,
}

impl From<&ConvergenceStudy> for StudyJson {
    fn from(s: &ConvergenceStudy) -> Self {
        let cases = s
            .cases
            .iter()
            .zip(&s.record.rates)
            .map(|(c, rates)| CaseJson {
                n: c.n,
                h: c.report.h,
                e_u: c.report.e_u,
                e_p: c.report.e_p,
                e_dg: c.report.e_energy,
                rates: rates.map(|r| RatesJson { r_u: r.r_u, r_p: r.r_p, r_dg: r.r_dg }),
                breakdown: c.report.breakdown.into(),
                pressure_mean: c.pressure_mean,
                pressure_norm: c.pressure_norm,
                solve: (&c.diagnostics).into(),
            })
            .collect();
        Self { config: (&s.config).into(), cases }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellJson {
    pub eta: f64,
    pub alpha: f64,
    pub n: usize,
    pub h: f64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
    pub e_u: Option<f64>,
    pub e_p: Option<f64>,
    pub e_dg: Option<f64>,
    pub breakdown: Option<BreakdownJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepJson {
    pub config: ConfigJson,
    pub cells: Vec<CellJson>,
}

impl SweepJson {
    pub fn new(config: &StudyConfig, cells: &[SweepCell]) -> Self {
        let cells = cells
            .iter()
            .map(|c| {
                let report = c.outcome.as_ref().ok();
                CellJson {
                    eta: c.eta,
                    alpha: c.alpha,
                    n: c.n,
                    h: c.h,
                    status: if report.is_some() { "ok" } else { "failed" }.to_owned(),
                    message: c.outcome.as_ref().err().cloned(),
                    e_u: report.map(|r| r.e_u),
                    e_p: report.map(|r| r.e_p),
                    e_dg: report.map(|r| r.e_energy),
                    breakdown: report.map(|r| r.breakdown.into()),
                }
            })
            .collect();
        Self { config: config.into(), cells }
    }
}

pub fn write_json<W: Write, T: Serialize>(value: &T, mut out: W) -> StudyResult<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}
