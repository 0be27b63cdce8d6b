use std::fs;
use std::path::Path;

use patchflow::evolution::{law_checks, ode_flow_stops, polygon_contains, restart, LawReport};
use patchflow::majorant::{verify_recursion_inequality, RadiusEstimate};
use patchflow::series::SeriesExport;
use patchflow::{FlowSample, Patch, ScenarioState, SeriesEngine, SeriesSolution};
use serde::Serialize;

use crate::error::CliResult;
use crate::plots;
use crate::scenario::Scenario;

/// One series expansion, valid on `[t_base, t_base + span)`.
pub struct Stage {
    pub state: ScenarioState,
    pub solution: SeriesSolution,
    /// Length of the stage; `None` for the last one.
    pub span: Option<f64>,
}

pub fn series_stages(sc: &Scenario, seed: u64) -> CliResult<Vec<Stage>> {
    let mut state = ScenarioState::new(sc.patch.clone());
    let mut stages = Vec::new();
    let mut schedule = sc.restart_schedule.iter().copied().map(Some).collect::<Vec<_>>();
    schedule.push(None);
    for span in schedule {
        let solution = SeriesEngine::new(state.patch.clone(), sc.series_config(seed))?.solve()?;
        let next = match span {
            Some(t1) => Some(restart(&state, &solution, t1)?),
            None => None,
        };
        stages.push(Stage { state: state.clone(), solution, span });
        if let Some(nx) = next {
            state = nx;
        }
    }
    Ok(stages)
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn inside_image(sol: &SeriesSolution, t: f64, p: &[f64]) -> bool {
    let image = sol.boundary_image(t);
    let patch = sol.mesh().patch();
    match patch.ball() {
        Some((cen, _)) => {
            let d = |q: &[f64]| q.iter().zip(&cen).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            d(p) < d(&image[0][..p.len()])
        }
        None => {
            let poly: Vec<[f64; 2]> = image.iter().map(|q| [q[0], q[1]]).collect();
            polygon_contains(&poly, [p[0], p[1]])
        }
    }
}

/// Flow samples at absolute time `t`, composing the stage maps across restarts.
pub fn staged_samples(stages: &[Stage], x0s: &[Vec<f64>], t: f64) -> CliResult<Vec<FlowSample>> {
    x0s.iter()
        .map(|x0| {
            let n = x0.len();
            let mut x = x0.clone();
            let mut jac: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| f64::from(u8::from(a == b))).collect()).collect();
            let mut local = t;
            for st in stages {
                let step = match st.span {
                    Some(span) if local >= span => span,
                    _ => local,
                };
                let (psi, j) = st.solution.assemble_flow(&x, step)?;
                jac = mat_mul(&j, &jac);
                x = psi;
                if step == local {
                    let c = st.state.density();
                    let rho = if inside_image(&st.solution, step, &x) { c / (1.0 - c * step) } else { 0.0 };
                    return Ok(FlowSample { x0: x0.clone(), t, psi: x, jac, rho });
                }
                local -= step;
            }
            unreachable!("the last stage is unbounded")
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct StageReport {
    pub generation: usize,
    pub t_base: f64,
    pub density: f64,
    pub span: Option<f64>,
    pub tau_empirical: Option<f64>,
    pub empirical: Option<RadiusEstimate>,
    pub tau_certified: Option<f64>,
    pub majorant_m: Option<f64>,
    pub majorant_c: Option<f64>,
    pub recursion_min_margin: Option<f64>,
    pub sup_norms: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct RadiusReport {
    pub horizon: f64,
    pub stages: Vec<StageReport>,
}

#[derive(Debug, Serialize)]
pub struct TimeLaws {
    pub t: f64,
    pub series: Option<LawReport>,
    pub ode: Option<LawReport>,
    /// `max ‖ψ_series − ψ_ode‖` when both engines ran.
    pub gap: Option<f64>,
}

pub fn radius_report(sc: &Scenario, stages: &[Stage]) -> RadiusReport {
    let stages = stages
        .iter()
        .map(|st| {
            let sol = &st.solution;
            StageReport {
                generation: st.state.generation,
                t_base: st.state.t_base,
                density: st.state.density(),
                span: st.span,
                tau_empirical: sol.tau_empirical,
                empirical: sol.empirical.clone(),
                tau_certified: sol.tau_certified,
                majorant_m: sol.ledger.as_ref().map(|l| l.m),
                majorant_c: sol.ledger.as_ref().map(|l| l.c_small),
                recursion_min_margin: sol.ledger.as_ref().map(|l| verify_recursion_inequality(l).min_margin),
                sup_norms: (1..=sol.levels.len()).map(|s| sol.sup_norm(s)).collect(),
            }
        })
        .collect();
    RadiusReport { horizon: 1.0 / sc.patch.c, stages }
}

/// Everything `run` computes, kept in memory so `verify` can reuse it.
pub struct RunData {
    pub probes: Vec<Vec<f64>>,
    pub stages: Vec<Stage>,
    pub series: Vec<(f64, Vec<FlowSample>)>,
    pub ode: Vec<(f64, Vec<FlowSample>)>,
    pub ode_boundary: Option<Vec<[f64; 2]>>,
    pub laws: Vec<TimeLaws>,
}

pub fn compute(sc: &Scenario, seed: u64) -> CliResult<RunData> {
    let patch = Patch::new(sc.patch.clone())?;
    let probes = sc.probe_points(&patch, seed);
    let mut times = sc.t_list.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let stages = if sc.engine.series() { series_stages(sc, seed)? } else { Vec::new() };
    let mut series = Vec::new();
    if sc.engine.series() {
        for &t in &times {
            series.push((t, staged_samples(&stages, &probes, t)?));
        }
    }
    let mut ode = Vec::new();
    let mut ode_boundary = None;
    if sc.engine.ode() && !times.is_empty() {
        let run = ode_flow_stops(&patch, &probes, &times, &sc.ode)?;
        for &t in &times {
            ode.push((t, run.at(t).to_vec()));
        }
        if patch.n() == 2 {
            ode_boundary = Some(run.state.boundary_polyline(256));
        }
    }
    let mut laws = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let s = series.get(k).map(|(_, v)| v.as_slice());
        let o = ode.get(k).map(|(_, v)| v.as_slice());
        laws.push(TimeLaws {
            t,
            series: s.map(|v| law_checks(&patch, v, None)).transpose()?,
            ode: o.map(|v| law_checks(&patch, v, None)).transpose()?,
            gap: match (s, o) {
                (Some(a), Some(b)) => law_checks(&patch, a, Some(b))?.gap,
                _ => None,
            },
        });
    }
    Ok(RunData { probes, stages, series, ode, ode_boundary, laws })
}

#[derive(Serialize)]
struct SeriesFile<'a> {
    stages: Vec<SeriesStageFile<'a>>,
}

#[derive(Serialize)]
struct SeriesStageFile<'a> {
    t_base: f64,
    patch: &'a patchflow::PatchSpec,
    series: SeriesExport,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_trajectories(path: &Path, data: &RunData) -> CliResult<()> {
    let n = data.probes.first().map_or(2, Vec::len);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["engine".to_string(), "probe".into(), "t".into()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..n).map(|i| format!("psi{i}")));
    header.extend(["det_j".into(), "rho".into()]);
    w.write_record(&header)?;
    for (engine, sets) in [("series", &data.series), ("ode", &data.ode)] {
        for (_, samples) in sets {
            for (k, s) in samples.iter().enumerate() {
                let mut row = vec![engine.to_string(), k.to_string(), format!("{:.6}", s.t)];
                row.extend(s.x0.iter().chain(&s.psi).map(|v| format!("{v:.12e}")));
                row.push(format!("{:.12e}", s.det_j()));
                row.push(format!("{:.12e}", s.rho));
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs the scenario and writes all artifacts into `out`; returns the written file names.
pub fn run(sc: &Scenario, out: &Path, seed: u64, plots_on: bool) -> CliResult<Vec<String>> {
    let data = compute(sc, seed)?;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut put = |name: &str| written.push(name.to_string());

    if sc.engine.series() {
        let file = SeriesFile {
            stages: data
                .stages
                .iter()
                .map(|st| SeriesStageFile { t_base: st.state.t_base, patch: &st.state.patch, series: st.solution.export() })
                .collect(),
        };
        write_json(&out.join("series.json"), &file)?;
        put("series.json");
        write_json(&out.join("radius_report.json"), &radius_report(sc, &data.stages))?;
        put("radius_report.json");
    }
    write_trajectories(&out.join("trajectories.csv"), &data)?;
    put("trajectories.csv");
    write_json(&out.join("law_checks.json"), &data.laws)?;
    put("law_checks.json");
    if plots_on {
        for name in plots::write_all(sc, &data, out)? {
            put(&name);
        }
    }
    Ok(written)
}
