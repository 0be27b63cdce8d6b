use std::path::Path;

use patchflow::Patch;
use plotters::prelude::*;

use crate::error::{CliError, CliResult};
use crate::pipeline::RunData;
use crate::scenario::Scenario;

const SIZE: (u32, u32) = (640, 480);

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Plot(e.to_string())
}

fn bounds(curves: &[Vec<(f64, f64)>]) -> ((f64, f64), (f64, f64)) {
    let pts = curves.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    let pad = |a: f64, b: f64| {
        let m = 0.05 * (b - a).max(1e-12);
        (a - m, b + m)
    };
    (pad(x0, x1), pad(y0, y1))
}

fn line_chart(path: &Path, title: &str, xl: &str, yl: &str, curves: &[(String, Vec<(f64, f64)>)]) -> CliResult<()> {
    let data: Vec<_> = curves.iter().map(|c| c.1.clone()).collect();
    let ((x0, x1), (y0, y1)) = bounds(&data);
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc(xl).y_desc(yl).draw().map_err(plot_err)?;
    for (k, (label, pts)) in curves.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn closed(pts: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut v: Vec<_> = pts.collect();
    if let Some(&p) = v.first() {
        v.push(p);
    }
    v
}

/// Boundary snapshots, coefficient-norm decay and (with both engines) the series/ODE gap.
pub fn write_all(sc: &Scenario, data: &RunData, out: &Path) -> CliResult<Vec<String>> {
    let mut names = Vec::new();
    let patch = Patch::new(sc.patch.clone())?;
    if patch.n() == 2 {
        let mut curves = vec![("t = 0".to_string(), closed(patch.boundary_polyline(256).into_iter().map(|p| (p[0], p[1]))))];
        if !data.stages.is_empty() {
            for &t in &sc.t_list {
                let Some(st) = data.stages.iter().rev().find(|s| s.state.t_base <= t) else { continue };
                let local = t - st.state.t_base;
                if st.solution.tau_empirical.is_some_and(|r| local >= r) {
                    continue;
                }
                let img = st.solution.boundary_image(local);
                curves.push((format!("series t = {t}"), closed(img.iter().map(|p| (p[0], p[1])))));
            }
        }
        if let (Some(poly), Some(t)) = (&data.ode_boundary, sc.t_list.iter().copied().reduce(f64::max)) {
            curves.push((format!("ode t = {t}"), closed(poly.iter().map(|p| (p[0], p[1])))));
        }
        line_chart(&out.join("boundary.svg"), "patch boundary", "x", "y", &curves)?;
        names.push("boundary.svg".into());
    }
    if !data.stages.is_empty() {
        let curves: Vec<_> = data
            .stages
            .iter()
            .map(|st| {
                let pts = (1..=st.solution.levels.len())
                    .map(|s| (s as f64, st.solution.sup_norm(s).max(1e-300).log10()))
                    .collect();
                (format!("stage {} (c = {:.4})", st.state.generation, st.state.density()), pts)
            })
            .collect();
        line_chart(&out.join("coefficients.svg"), "coefficient norms", "s", "log10 sup |∇ξ^(s)|", &curves)?;
        names.push("coefficients.svg".into());
    }
    let gap: Vec<(f64, f64)> = data.laws.iter().filter_map(|l| l.gap.map(|g| (l.t, g.max(1e-300).log10()))).collect();
    if !gap.is_empty() {
        line_chart(&out.join("gap.svg"), "series vs ODE", "t", "log10 sup gap", &[("gap".into(), gap)])?;
        names.push("gap.svg".into());
    }
    Ok(names)
}
