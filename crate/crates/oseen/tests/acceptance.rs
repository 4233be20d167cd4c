//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Criteria run on parallel threads; every solve they accept is also recorded
//! for the final zero-mean and residual check.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use oseen::manufactured::ManufacturedCase;
use oseen::solver::{use_sequential_factorization, SparseLu};
use oseen::study::{run_convergence_study, ConvergenceStudy, StudyConfig};
use oseen_core::analysis::{l2_error, observed_rate, pressure_mean, upwind_seminorm_squared, Rates};
use oseen_core::forms::{
    assemble_forms, assemble_global, assemble_matrix, consistency_residual, global_form, Convection, FormSelection,
    OseenConfig,
};
use oseen_core::linsys::{solve, DiscreteSolution, SolveStrategy};
use oseen_core::mesh::{build_uniform_mesh, Point};
use oseen_core::projection::{
    broken_l2_error, element_orthogonality_residual, facet_l2_error, facet_orthogonality_residual, lagrange_interpolate,
    project_element, project_facet,
};
use oseen_core::spaces::{build_layout, trace_prolongation, ElementField, MethodVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Solves accepted by any criterion: (label, ∫p_h, ‖p_h‖, relative residual).
#[derive(Default)]
struct SolveLog(Mutex<Vec<(String, f64, f64, f64)>>);

impl SolveLog {
    fn record_study(&self, label: &str, study: &ConvergenceStudy) {
        let mut log = self.0.lock().unwrap();
        for c in &study.cases {
            log.push((format!("{label} n={}", c.n), c.pressure_mean, c.pressure_norm, c.diagnostics.relative_residual));
        }
    }

    fn record(&self, label: String, mean: f64, norm: f64, residual: f64) {
        self.0.lock().unwrap().push((label, mean, norm, residual));
    }
}

fn within(rates: Rates, target: [f64; 3], tol: f64) -> bool {
    [rates.r_u, rates.r_p, rates.r_dg].iter().zip(target).all(|(r, t)| (r - t).abs() <= tol)
}

fn show(r: Rates) -> String {
    format!("({:.3}, {:.3}, {:.3})", r.r_u, r.r_p, r.r_dg)
}

fn study(log: &SolveLog, variant: MethodVariant, k: usize, nu: f64, n_max: usize) -> Result<ConvergenceStudy, String> {
    let config = StudyConfig::new(variant, k, nu).with_meshes(2, n_max);
    let s = run_convergence_study(&config).map_err(|e| e.to_string())?;
    log.record_study(&format!("{} k={k} nu={nu}", variant.name()), &s);
    Ok(s)
}

/// Rates between the last two meshes, the finest error report, and whether e_u is within 2x of `e_u_ref`.
fn rate_criterion(
    log: &SolveLog,
    variant: MethodVariant,
    k: usize,
    nu: f64,
    n_max: usize,
    target: [f64; 3],
    tol: f64,
    e_u_ref: Option<f64>,
) -> Verdict {
    let s = match study(log, variant, k, nu, n_max) {
        Ok(s) => s,
        Err(e) => return verdict(false, e),
    };
    let rates = s.record.rates.last().copied().flatten().expect("at least two meshes");
    let mut pass = within(rates, target, tol);
    let mut detail = format!(
        "rates n={}->{}: {} vs ({:.2}, {:.2}, {:.2}) +-{tol}",
        n_max / 2,
        n_max,
        show(rates),
        target[0],
        target[1],
        target[2]
    );
    if let Some(e_ref) = e_u_ref {
        let e_u = s.record.reports.last().unwrap().e_u;
        let ratio = e_u / e_ref;
        pass &= (0.5..=2.0).contains(&ratio);
        detail += &format!("; e_u(1/{n_max}) = {e_u:.4e} vs {e_ref:.3e} (ratio {ratio:.2}, allowed 0.5..2)");
    }
    verdict(pass, detail)
}

fn decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

fn criterion_5(log: &SolveLog) -> Verdict {
    let s = match study(log, MethodVariant::Edg, 1, 0.1, 64) {
        Ok(s) => s,
        Err(e) => return verdict(false, e),
    };
    let r_u = s.record.rates.last().copied().flatten().unwrap().r_u;
    let e_p: Vec<f64> = s.record.reports.iter().map(|r| r.e_p).collect();
    let pass = (r_u - 1.99).abs() <= 0.10 && decreasing(&e_p);
    verdict(pass, format!("r_u n=32->64 = {r_u:.3} vs 1.99 +-0.10; e_p monotone decreasing: {}", decreasing(&e_p)))
}

fn criterion_6(log: &SolveLog) -> Verdict {
    let s = match study(log, MethodVariant::Ehdg, 1, 0.1, 64) {
        Ok(s) => s,
        Err(e) => return verdict(false, e),
    };
    let col = |f: fn(&oseen_core::analysis::ErrorReport) -> f64| s.record.reports.iter().map(f).collect::<Vec<_>>();
    let (u, p, dg) = (col(|r| r.e_u), col(|r| r.e_p), col(|r| r.e_energy));
    let pass = decreasing(&u) && decreasing(&p) && decreasing(&dg);
    verdict(
        pass,
        format!(
            "E-HDG nu=0.1 k=1 n=2..64 monotone decay: e_u {}, e_p {}, e_DG {} (energy magnitudes not compared)",
            decreasing(&u),
            decreasing(&p),
            decreasing(&dg)
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut worst: f64 = 0.0;
    for nu in [1.0, 0.1] {
        let case = ManufacturedCase::new(nu, 1.0, [1.0, 0.0]);
        let mesh = build_uniform_mesh(4).unwrap();
        for variant in MethodVariant::ALL {
            let layout = build_layout(&mesh, 2, variant).unwrap();
            let cfg = StudyConfig::new(variant, 2, nu).oseen_config().unwrap();
            let r = consistency_residual(&mesh, &layout, &cfg, &case, &|x| case.source(x)).unwrap();
            worst = r.iter().fold(worst, |m, v| m.max(v.abs()));
        }
    }
    verdict(worst <= 1e-8, format!("max residual over test dofs {worst:.2e} (limit 1e-8), n=4 k=2, all variants, nu in {{1, 0.1}}"))
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mesh = build_uniform_mesh(4).unwrap();
    let cfg = OseenConfig::new(1.0, 1.0, Convection::Constant([1.0, 0.0]), 4.0, 1e-2, 1.0).unwrap();
    for variant in MethodVariant::ALL {
        for k in 1..=2 {
            let layout = build_layout(&mesh, k, variant).unwrap();
            let o = assemble_forms(&mesh, &layout, &cfg, FormSelection::CONVECTION).unwrap();
            for _ in 0..100 {
                let v: Vec<f64> = (0..layout.total()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let up = upwind_seminorm_squared(&mesh, &layout, &cfg, &v).unwrap();
                worst = worst.max((global_form(&o, &layout, &v, &v) - up).abs() / (1.0 + up));
            }
        }
    }
    verdict(worst <= 1e-11, format!("max |o_h(v,v) - |v|_up^2| / (1 + |v|_up^2) = {worst:.2e} over 600 vectors (limit 1e-11)"))
}

fn criterion_9() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in [2, 4] {
        for k in 1..=2 {
            let mesh = build_uniform_mesh(n).unwrap();
            let cfg = StudyConfig::new(MethodVariant::Hdg, k, 1.0).oseen_config().unwrap();
            let hdg = build_layout(&mesh, k, MethodVariant::Hdg).unwrap();
            let a_hdg = assemble_matrix(&mesh, &hdg, &cfg).unwrap();
            for variant in [MethodVariant::Ehdg, MethodVariant::Edg] {
                let layout = build_layout(&mesh, k, variant).unwrap();
                let a = assemble_matrix(&mesh, &layout, &cfg).unwrap();
                let c = trace_prolongation(&layout, &hdg).unwrap();
                let reduced = c.transpose().mul(&a_hdg).mul(&c).to_dense();
                let diff = (reduced - a.to_dense()).abs().max();
                worst = worst.max(diff / a.max_abs());
            }
        }
    }
    verdict(worst <= 1e-12, format!("max |C^T A_HDG C - A| / max|A| = {worst:.2e} (limit 1e-12), n in {{2,4}}, k in {{1,2}}"))
}

fn record_solution(log: &SolveLog, label: String, mesh: &oseen_core::mesh::MeshTopology, sol: &DiscreteSolution) {
    let mean = pressure_mean(mesh, &sol.layout, &sol.coefficients).unwrap();
    let norm = l2_error(mesh, &sol.layout, &sol.coefficients, ElementField::Pressure, &|_| [0.0; 2], 2 * sol.layout.k).unwrap();
    log.record(label, mean, norm, sol.diagnostics.relative_residual);
}

fn criterion_10(log: &SolveLog) -> Verdict {
    let mut worst: f64 = 0.0;
    for variant in MethodVariant::ALL {
        for k in 1..=2 {
            let config = StudyConfig::new(variant, k, 1.0);
            let case = config.manufactured();
            let cfg = config.oseen_config().unwrap();
            for n in [2, 4, 8, 16] {
                let mesh = build_uniform_mesh(n).unwrap();
                let layout = build_layout(&mesh, k, variant).unwrap();
                let sys = assemble_global(&mesh, &layout, &cfg, &|x| case.source(x)).unwrap();
                let (direct, condensed) = match (
                    solve(&sys, &SparseLu, SolveStrategy::Direct),
                    solve(&sys, &SparseLu, SolveStrategy::Condensed),
                ) {
                    (Ok(d), Ok(c)) => (d, c),
                    (Err(e), _) | (_, Err(e)) => return verdict(false, format!("{variant:?} k={k} n={n}: {e}")),
                };
                let diff: f64 = direct.coefficients.iter().zip(&condensed.coefficients).map(|(a, b)| (a - b) * (a - b)).sum();
                let norm: f64 = direct.coefficients.iter().map(|a| a * a).sum();
                worst = worst.max((diff / norm).sqrt());
                let label = |s: &str| format!("{} k={k} n={n} {s}", variant.name());
                record_solution(log, label("direct"), &mesh, &direct);
                record_solution(log, label("condensed"), &mesh, &condensed);
            }
        }
    }
    verdict(worst <= 1e-8, format!("max relative difference {worst:.2e} (limit 1e-8), n <= 16, all variants, k in {{1,2}}"))
}

fn criterion_11() -> Verdict {
    let f = |x: Point| [(2.0 * PI * x[0]).sin() * (PI * x[1]).cos() + (PI * x[1]).sin()];
    let mut worst_orth: f64 = 0.0;
    let mut notes = Vec::new();
    let mut pass = true;
    for k in 1..=2 {
        let target = (k + 1) as f64;
        let mut elem = Vec::new();
        let mut facet = Vec::new();
        let mut interp = Vec::new();
        for n in [4, 8, 16, 32] {
            let mesh = build_uniform_mesh(n).unwrap();
            let pk = project_element(&mesh, k, 16, f).unwrap();
            let pf = project_facet(&mesh, k, 16, f).unwrap();
            worst_orth = worst_orth.max(element_orthogonality_residual(&mesh, &pk, 16, f).unwrap());
            worst_orth = worst_orth.max(facet_orthogonality_residual(&mesh, &pf, 16, f).unwrap());
            elem.push(broken_l2_error(&mesh, &pk, 16, f).unwrap());
            // the skeleton grows like n, so facet errors are compared per unit length
            facet.push(facet_l2_error(&mesh, &pf, 16, f).unwrap() / (n as f64).sqrt());
            interp.push(broken_l2_error(&mesh, &lagrange_interpolate(&mesh, k, f).unwrap().0, 16, f).unwrap());
        }
        for (name, errs) in [("Pi_K", &elem), ("Pi_F", &facet), ("I_K", &interp)] {
            let r = observed_rate(errs[errs.len() - 2], errs[errs.len() - 1]);
            pass &= (r - target).abs() <= 0.1 * target;
            notes.push(format!("{name} k={k}: {r:.3}"));
        }
    }
    pass &= worst_orth <= 1e-11;
    verdict(pass, format!("orthogonality {worst_orth:.2e} (limit 1e-11); rates n=16->32 {} (k+1 +-10%)", notes.join(", ")))
}

fn criterion_12(log: &SolveLog) -> Verdict {
    let log = log.0.lock().unwrap();
    let bad: Vec<&String> = log
        .iter()
        .filter(|(_, mean, norm, res)| !(mean.abs() <= 1e-10 * norm && *res <= 1e-9))
        .map(|(label, ..)| label)
        .collect();
    let worst_mean = log.iter().map(|(_, m, n, _)| m.abs() / n).fold(0.0, f64::max);
    let worst_res = log.iter().map(|(.., r)| *r).fold(0.0, f64::max);
    let mut detail = format!(
        "{} solves; max |mean|/||p|| = {worst_mean:.2e} (limit 1e-10), max residual {worst_res:.2e} (limit 1e-9)",
        log.len()
    );
    if !bad.is_empty() {
        detail += &format!("; failing: {bad:?}");
    }
    verdict(bad.is_empty() && !log.is_empty(), detail)
}

fn main() -> ExitCode {
    use_sequential_factorization();
    let log = SolveLog::default();
    let log = &log;
    type Job<'a> = (u8, &'a str, Box<dyn Fn() -> Verdict + Send + Sync + 'a>);
    let jobs: Vec<Job> = vec![
        (1, "EDG nu=1 k=1", Box::new(|| rate_criterion(log, MethodVariant::Edg, 1, 1.0, 64, [1.99, 1.00, 1.00], 0.10, Some(7.962e-4)))),
        (2, "HDG nu=1 k=1", Box::new(|| rate_criterion(log, MethodVariant::Hdg, 1, 1.0, 64, [1.99, 0.98, 0.99], 0.10, Some(7.922e-4)))),
        (3, "HDG nu=1 k=2", Box::new(|| rate_criterion(log, MethodVariant::Hdg, 2, 1.0, 32, [3.09, 1.99, 1.99], 0.15, None))),
        (4, "HDG nu=0.1 k=1", Box::new(|| rate_criterion(log, MethodVariant::Hdg, 1, 0.1, 64, [2.00, 1.00, 1.00], 0.10, None))),
        (5, "EDG nu=0.1 k=1", Box::new(|| criterion_5(log))),
        (6, "energy magnitudes / pre-asymptotic decay", Box::new(|| criterion_6(log))),
        (7, "consistency residual", Box::new(criterion_7)),
        (8, "upwind coercivity identity", Box::new(criterion_8)),
        (9, "variant congruence", Box::new(criterion_9)),
        (10, "condensation equivalence", Box::new(|| criterion_10(log))),
        (11, "projection suite", Box::new(criterion_11)),
    ];

    let start = Instant::now();
    let mut results: Vec<(u8, &str, Verdict, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(id, name, job)| {
                scope.spawn(move || {
                    let t = Instant::now();
                    let v = std::panic::catch_unwind(std::panic::AssertUnwindSafe(job))
                        .unwrap_or_else(|_| verdict(false, "panicked"));
                    (*id, *name, v, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread")).collect()
    });
    let t = Instant::now();
    results.push((12, "zero-mean pressure and residual", criterion_12(log), t.elapsed().as_secs_f64()));

    let mut failures = 0;
    for (id, name, v, secs) in &results {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        failures += usize::from(!v.pass);
        println!("{tag} {id:>2} {name}: {} [{secs:.1}s]", v.detail);
    }
    println!("{} of {} criteria passed in {:.1}s", results.len() - failures, results.len(), start.elapsed().as_secs_f64());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
