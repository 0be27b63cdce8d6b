use patchflow::field::{Part, PartConstant};
use patchflow::majorant::verify_recursion_inequality;
use patchflow::oracle::exact_ball_flow;
use patchflow::singular::{default_lambdas, jump_average, QuadConfig};
use patchflow::{CoefficientLevel, Patch, SeriesEngine, SeriesSolution};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::pipeline::{compute, RunData};
use crate::scenario::Scenario;

pub const TRACE_TOL: f64 = 1e-3;
pub const CURL_TOL: f64 = 1e-3;
pub const JUMP_TOL: f64 = 5e-3;
pub const LAW_TOL: f64 = 5e-3;
pub const GAP_TOL: f64 = 1e-3;
pub const ORACLE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
    pub note: String,
}

impl Check {
    fn le(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self { name: name.into(), value, tol, pass: value <= tol, note: String::new() }
    }
    fn failed(name: impl Into<String>, note: String) -> Self {
        Self { name: name.into(), value: f64::NAN, tol: f64::NAN, pass: false, note }
    }
    fn note(mut self, s: impl Into<String>) -> Self {
        self.note = s.into();
        self
    }
}

/// Divergence and curl of the first coefficient on the node sets: `div ξ^(1) = −ρ0`, `curl ξ^(1) = 0`.
fn level_one_checks(lvl: &CoefficientLevel, n: usize, c: f64) -> Vec<Check> {
    let mut trace = 0.0f64;
    let mut curl = 0.0f64;
    for (part, rho0) in [(Part::Interior, c), (Part::Exterior, 0.0)] {
        let count = lvl.dxi.m(0, 0).part(part).len();
        for k in 0..count {
            let d = |j: usize, i: usize| lvl.dxi.m(j, i).part(part)[k];
            let div: f64 = (0..n).map(|j| d(j, j)).sum();
            trace = trace.max((div + rho0).abs() / c);
            for j in 0..n {
                for i in 0..j {
                    curl = curl.max((d(j, i) - d(i, j)).abs() / c);
                }
            }
        }
    }
    vec![
        Check::le("trace: div ξ^(1) = −ρ0 on nodes", trace, TRACE_TOL),
        Check::le("curl: ∂_iξ_j^(1) symmetric", curl, CURL_TOL),
    ]
}

fn jump_check(patch: &Patch) -> CliResult<Check> {
    let n = patch.n();
    let chi = PartConstant::indicator(1.0);
    let lambdas = default_lambdas(0.025 * patch.diameter());
    let points: Vec<Vec<f64>> = match patch.ball() {
        Some((cen, r)) => {
            let dirs: &[[f64; 3]] = &[[1.0, 0.0, 0.0], [0.6, 0.8, 0.0], [0.0, 0.6, 0.8], [-0.48, 0.6, 0.64]];
            dirs.iter().take(if n == 2 { 2 } else { 4 }).map(|d| (0..n).map(|i| cen[i] + r * d[i]).collect()).collect()
        }
        None => (0..8).map(|k| patch.boundary_at_angle(0.3 + k as f64 * std::f64::consts::FRAC_PI_4)[..2].to_vec()).collect(),
    };
    let mut worst = 0.0f64;
    for x in &points {
        for j in 0..n {
            for i in 0..n {
                let rep = jump_average(patch, &chi, j, i, x, &lambdas, QuadConfig::default())?;
                worst = worst.max((rep.average - rep.pv_value).abs());
            }
        }
    }
    Ok(Check::le("jump: ½(inner+outer) = pv", worst, JUMP_TOL).note(format!("{} boundary points", points.len())))
}

fn law_rows(sc: &Scenario, data: &RunData) -> Vec<Check> {
    let mut rows = Vec::new();
    if data.laws.is_empty() {
        rows.push(Check::le("laws", 0.0, LAW_TOL).note("vacuous: empty t_list"));
    }
    for l in &data.laws {
        for (engine, rep) in [("series", &l.series), ("ode", &l.ode)] {
            if let Some(r) = rep {
                rows.push(Check::le(format!("laws {engine} t={}: det J = 1 − tρ0", l.t), r.det_law, LAW_TOL));
                rows.push(Check::le(format!("laws {engine} t={}: ρ det J = ρ0", l.t), r.mass_law, LAW_TOL));
            }
        }
        if let Some(g) = l.gap {
            rows.push(Check::le(format!("engines t={}: sup |ψ_series − ψ_ode|", l.t), g, GAP_TOL));
        }
    }
    let patch_ball = match &sc.patch.boundary {
        patchflow::BoundaryCurve::Sphere { radius, .. } => Some(*radius),
        _ => None,
    };
    if let Some(r) = patch_ball {
        let centre = match &sc.patch.boundary {
            patchflow::BoundaryCurve::Sphere { center, .. } => center.clone(),
            _ => unreachable!(),
        };
        for (engine, sets) in [("series", &data.series), ("ode", &data.ode)] {
            let mut worst = 0.0f64;
            let mut err = None;
            for (t, samples) in sets.iter() {
                for s in samples {
                    let rel: Vec<f64> = s.x0.iter().zip(&centre).map(|(a, b)| a - b).collect();
                    match exact_ball_flow(sc.patch.n, r, sc.patch.c, &rel, *t) {
                        Ok(ex) => {
                            let psi: Vec<f64> = s.psi.iter().zip(&centre).map(|(a, b)| a - b).collect();
                            let d = psi.iter().zip(&ex.psi).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                            let m = ex.psi.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                            worst = worst.max(d / m);
                        }
                        Err(e) => err = Some(e.to_string()),
                    }
                }
            }
            if !sets.is_empty() {
                rows.push(match err {
                    Some(e) => Check::failed(format!("oracle {engine}: exact ball flow"), e),
                    None => Check::le(format!("oracle {engine}: exact ball flow (relative)"), worst, ORACLE_TOL),
                });
            }
        }
    }
    rows
}

fn majorant_rows(sol: &SeriesSolution) -> Vec<Check> {
    let Some(ledger) = &sol.ledger else {
        return vec![Check::le("majorant", 0.0, 0.0).note("skipped: certify = false")];
    };
    let rep = verify_recursion_inequality(ledger);
    let mut rows = vec![Check {
        name: "majorant: recursion margins ≥ 0".into(),
        value: rep.min_margin,
        tol: 0.0,
        pass: rep.ok(),
        note: format!("{} levels", rep.levels.len()),
    }];
    match sol.tau_empirical {
        Some(emp) => rows.push(Check {
            name: "majorant: tau_certified ≤ tau_empirical".into(),
            value: ledger.tau0,
            tol: emp,
            pass: ledger.tau0 <= emp,
            note: String::new(),
        }),
        None => rows.push(Check::failed("majorant: tau_certified ≤ tau_empirical", "no empirical radius".into())),
    }
    rows
}

pub fn run_checks(sc: &Scenario, seed: u64) -> Vec<Check> {
    let mut rows = Vec::new();
    let patch = match Patch::new(sc.patch.clone()) {
        Ok(p) => p,
        Err(e) => return vec![Check::failed("patch", e.to_string())],
    };
    let level_one = SeriesEngine::new(sc.patch.clone(), sc.series_config(seed)).and_then(|e| e.level_one());
    match level_one {
        Ok(l) => rows.extend(level_one_checks(&l, patch.n(), sc.patch.c)),
        Err(e) => rows.push(Check::failed("trace: div ξ^(1) = −ρ0 on nodes", e.to_string())),
    }
    match jump_check(&patch) {
        Ok(c) => rows.push(c),
        Err(e) => rows.push(Check::failed("jump: ½(inner+outer) = pv", e.to_string())),
    }
    let mut sc = sc.clone();
    if sc.engine == crate::scenario::Engine::Ode {
        // structural checks need the expansion even when only trajectories were requested
        sc.engine = crate::scenario::Engine::Both;
    }
    match compute(&sc, seed) {
        Ok(data) => {
            let first = &data.stages[0].solution;
            rows.extend(law_rows(&sc, &data));
            rows.extend(majorant_rows(first));
        }
        Err(e) => rows.push(Check::failed("pipeline", e.to_string())),
    }
    rows
}

pub fn render(rows: &[Check]) -> String {
    let w = rows.iter().map(|r| r.name.chars().count()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<w$}  {:>11}  {:>11}  result\n", "check", "value", "tol");
    for r in rows {
        s += &format!(
            "{:<w$}  {:>11.3e}  {:>11.3e}  {}{}\n",
            r.name,
            r.value,
            r.tol,
            if r.pass { "PASS" } else { "FAIL" },
            if r.note.is_empty() { String::new() } else { format!("  ({})", r.note) }
        );
    }
    s
}

pub fn verify(sc: &Scenario, seed: u64) -> CliResult<Vec<Check>> {
    let rows = run_checks(sc, seed);
    print!("{}", render(&rows));
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(rows)
}
