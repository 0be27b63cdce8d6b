//! Direct Lagrangian reference solver, physical-law checks and the restart procedure.
//!
//! The density stays a patch: `ρ(·,t) = c/(1−ct)` on `ψ(Ω,t)`. Plane patches are evolved by contour
//! dynamics (`v = (ρ/2π)∮ log|x−y| (y₂', −y₁') ds`) with Kress quadrature for the log singularity at the
//! markers; balls use the closed-form field. Trajectory Jacobians follow the variational equation.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geometry::{FourierCurve, Patch, PatchSpec};
use crate::series::SeriesSolution;
use crate::{BoundaryCurve, Error, Result};

/// One sampled trajectory point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub x0: Vec<f64>,
    pub t: f64,
    pub psi: Vec<f64>,
    /// Row `j` holds `∇ψ_j`.
    pub jac: Vec<Vec<f64>>,
    pub rho: f64,
}

impl FlowSample {
    pub fn det_j(&self) -> f64 {
        det(&self.jac)
    }
}

fn det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

/// Where a multi-generation run currently stands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioState {
    pub patch: PatchSpec,
    /// Absolute time already elapsed.
    pub t_base: f64,
    pub generation: usize,
    /// Density of generation zero.
    pub c_original: f64,
}

impl ScenarioState {
    pub fn new(patch: PatchSpec) -> Self {
        let c = patch.c;
        Self { patch, t_base: 0.0, generation: 0, c_original: c }
    }

    /// `c/(1 − c t_base)`, which equals the current patch density.
    pub fn density(&self) -> f64 {
        self.c_original / (1.0 - self.c_original * self.t_base)
    }

    /// Remaining time to collapse.
    pub fn horizon(&self) -> f64 {
        1.0 / self.patch.c
    }
}

/// `s(t) = ln(1/(1−ct))`.
pub fn transport_rescale(t: f64, c: f64) -> Result<f64> {
    if !(c * t < 1.0) || !t.is_finite() {
        return Err(Error::BlowUpHorizon { t, horizon: 1.0 / c });
    }
    Ok(-(-c * t).ln_1p())
}

/// Inverse of [`transport_rescale`]: `t = (1 − e^{−s})/c`.
pub fn transport_rescale_inverse(s: f64, c: f64) -> f64 {
    -(-s).exp_m1() / c
}

/// Fixed-step settings for the reference solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub dt: f64,
    /// Boundary markers for plane patches (even).
    pub markers: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { dt: 1e-3, markers: 256 }
    }
}

/// Moving boundary representation.
#[derive(Debug, Clone)]
enum Model {
    Ball { n: usize, center: Vec<f64>, r0: f64 },
    Contour { markers: Vec<[f64; 2]>, kress: Vec<f64> },
}

/// State of the evolving patch for velocity queries.
#[derive(Debug, Clone)]
pub struct FlowState {
    model: Model,
    c: f64,
    n: usize,
    t: f64,
}

fn kress_weights(m: usize) -> Vec<f64> {
    // ∫ log(4 sin²((t−s)/2)) f(s) ds ≈ Σ_j R_{k−j} f(s_j) on 2N = m equispaced nodes
    let nn = m / 2;
    (0..m)
        .map(|d| {
            let tau = PI * d as f64 / nn as f64;
            let mut s = 0.0;
            for k in 1..nn {
                s += (k as f64 * tau).cos() / k as f64;
            }
            -2.0 * PI / nn as f64 * s - PI / (nn * nn) as f64 * (nn as f64 * tau).cos()
        })
        .collect()
}

fn spectral_derivative(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let m = pts.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mut out = vec![[0.0; 2]; m];
    for d in 0..2 {
        let mut buf: Vec<Complex<f64>> = pts.iter().map(|p| Complex::new(p[d], 0.0)).collect();
        fwd.process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            let kk = if k < m / 2 {
                k as f64
            } else if k == m / 2 {
                0.0
            } else {
                k as f64 - m as f64
            };
            *v *= Complex::new(0.0, kk / m as f64);
        }
        inv.process(&mut buf);
        for k in 0..m {
            out[k][d] = buf[k].re;
        }
    }
    out
}

impl FlowState {
    /// Patch at relative time zero.
    pub fn new(patch: &Patch, cfg: &OdeConfig) -> Result<Self> {
        let n = patch.n();
        let model = if let Some((center, r0)) = patch.ball() {
            Model::Ball { n, center: center[..n].to_vec(), r0 }
        } else {
            let m = cfg.markers.max(16) & !1;
            let curve = patch.curve().ok_or_else(|| Error::InvalidInput("plane curve expected".into()))?;
            let markers = (0..m).map(|k| curve.point(2.0 * PI * k as f64 / m as f64)).collect();
            Model::Contour { markers, kress: kress_weights(m) }
        };
        Ok(Self { model, c: patch.c(), n, t: 0.0 })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Current density amplitude `c/(1−ct)`.
    pub fn density(&self) -> f64 {
        self.c / (1.0 - self.c * self.t)
    }

    /// Current boundary markers (plane patches) or `None` for balls.
    pub fn markers(&self) -> Option<&[[f64; 2]]> {
        match &self.model {
            Model::Contour { markers, .. } => Some(markers),
            Model::Ball { .. } => None,
        }
    }

    /// Current boundary as a closed polyline of `m` points (balls: a great circle in the first two coordinates).
    pub fn boundary_polyline(&self, m: usize) -> Vec<[f64; 2]> {
        match &self.model {
            Model::Contour { markers, .. } => markers.clone(),
            Model::Ball { center, r0, n } => {
                let r = r0 * (1.0 - self.c * self.t).powf(1.0 / *n as f64);
                (0..m).map(|k| {
                    let a = 2.0 * PI * k as f64 / m as f64;
                    [center[0] + r * a.cos(), center[1] + r * a.sin()]
                }).collect()
            }
        }
    }

    /// Current patch volume (area in the plane).
    pub fn area(&self) -> f64 {
        match &self.model {
            Model::Contour { markers, .. } => {
                let d = spectral_derivative(markers);
                let h = 2.0 * PI / markers.len() as f64;
                0.5 * h * markers.iter().zip(&d).map(|(p, q)| p[0] * q[1] - p[1] * q[0]).sum::<f64>()
            }
            Model::Ball { n, r0, .. } => crate::kernels::ball_volume(*n) * r0.powi(*n as i32) * (1.0 - self.c * self.t),
        }
    }

    /// Whether `x` lies inside the current patch.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.model {
            Model::Ball { center, r0, n } => {
                let r = r0 * (1.0 - self.c * self.t).powf(1.0 / *n as f64);
                x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>() < r * r
            }
            Model::Contour { markers, .. } => polygon_contains(markers, [x[0], x[1]]),
        }
    }

    /// Velocity and its gradient (`grad[j][i] = ∂_i v_j`) at `x` (away from the boundary for curves).
    pub fn velocity_grad(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let rho = self.density();
        match &self.model {
            Model::Ball { center, r0, .. } => {
                let nf = n as f64;
                let r = r0 * (1.0 - self.c * self.t).powf(1.0 / nf);
                let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                if dn <= r {
                    let v = d.iter().map(|v| -rho / nf * v).collect();
                    let g = (0..n).map(|j| (0..n).map(|i| if i == j { -rho / nf } else { 0.0 }).collect()).collect();
                    (v, g)
                } else {
                    let m = rho * r.powf(nf) / nf;
                    let v = d.iter().map(|v| -m * v / dn.powf(nf)).collect();
                    let g = (0..n)
                        .map(|j| {
                            (0..n)
                                .map(|i| -m * ((if i == j { 1.0 } else { 0.0 }) - nf * d[i] * d[j] / (dn * dn)) / dn.powf(nf))
                                .collect()
                        })
                        .collect();
                    (v, g)
                }
            }
            Model::Contour { markers, .. } => {
                let dy = spectral_derivative(markers);
                let h = 2.0 * PI / markers.len() as f64;
                let mut v = [0.0; 2];
                let mut g = [[0.0; 2]; 2];
                for (y, d) in markers.iter().zip(&dy) {
                    let z = [x[0] - y[0], x[1] - y[1]];
                    let r2 = z[0] * z[0] + z[1] * z[1];
                    let gv = [d[1], -d[0]];
                    let l = 0.5 * r2.ln();
                    for j in 0..2 {
                        v[j] += l * gv[j];
                        for i in 0..2 {
                            g[j][i] += z[i] / r2 * gv[j];
                        }
                    }
                }
                let s = rho * h / (2.0 * PI);
                (vec![s * v[0], s * v[1]], vec![vec![s * g[0][0], s * g[0][1]], vec![s * g[1][0], s * g[1][1]]])
            }
        }
    }

    /// Marker velocities with log-singular quadrature.
    fn marker_velocity(markers: &[[f64; 2]], kress: &[f64], rho: f64) -> Vec<[f64; 2]> {
        let m = markers.len();
        let dy = spectral_derivative(markers);
        let h = 2.0 * PI / m as f64;
        (0..m)
            .into_par_iter()
            .map(|k| {
                let x = markers[k];
                let mut v = [0.0; 2];
                for j in 0..m {
                    let gv = [dy[j][1], -dy[j][0]];
                    let smooth = if j == k {
                        (dy[k][0] * dy[k][0] + dy[k][1] * dy[k][1]).ln()
                    } else {
                        let z = [x[0] - markers[j][0], x[1] - markers[j][1]];
                        let s = (0.5 * h * (k as f64 - j as f64)).sin();
                        ((z[0] * z[0] + z[1] * z[1]) / (4.0 * s * s)).ln()
                    };
                    let w = 0.5 * kress[(k + m - j) % m] + 0.5 * h * smooth;
                    v[0] += w * gv[0];
                    v[1] += w * gv[1];
                }
                [rho / (2.0 * PI) * v[0], rho / (2.0 * PI) * v[1]]
            })
            .collect()
    }

    /// One RK4 step for the boundary and the given trajectories `(ψ, J)`.
    fn step(&mut self, dt: f64, traj: &mut [(Vec<f64>, Vec<Vec<f64>>)]) {
        let n = self.n;
        let t0 = self.t;
        let base = self.clone();
        let mut stage = base.clone();
        // per stage: marker velocities and trajectory derivatives
        type Deriv = (Option<Vec<[f64; 2]>>, Vec<(Vec<f64>, Vec<Vec<f64>>)>);
        let eval = |st: &FlowState, tr: &[(Vec<f64>, Vec<Vec<f64>>)]| -> Deriv {
            let mv = match &st.model {
                Model::Contour { markers, kress } => Some(Self::marker_velocity(markers, kress, st.density())),
                Model::Ball { .. } => None,
            };
            let d = tr
                .par_iter()
                .map(|(p, j)| {
                    let (v, g) = st.velocity_grad(p);
                    let dj: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| (0..n).map(|k| g[a][k] * j[k][b]).sum()).collect()).collect();
                    (v, dj)
                })
                .collect();
            (mv, d)
        };
        let advance = |st: &mut FlowState, tr: &mut Vec<(Vec<f64>, Vec<Vec<f64>>)>, k: &Deriv, h: f64, from: &FlowState, from_tr: &[(Vec<f64>, Vec<Vec<f64>>)]| {
            st.t = from.t + h;
            if let (Model::Contour { markers, .. }, Model::Contour { markers: m0, .. }, Some(mv)) = (&mut st.model, &from.model, &k.0) {
                for ((p, q), v) in markers.iter_mut().zip(m0).zip(mv) {
                    p[0] = q[0] + h * v[0];
                    p[1] = q[1] + h * v[1];
                }
            }
            for ((dst, src), (v, dj)) in tr.iter_mut().zip(from_tr).zip(&k.1) {
                for a in 0..n {
                    dst.0[a] = src.0[a] + h * v[a];
                    for b in 0..n {
                        dst.1[a][b] = src.1[a][b] + h * dj[a][b];
                    }
                }
            }
        };
        let tr0: Vec<_> = traj.to_vec();
        let mut tr = tr0.clone();
        let k1 = eval(&base, &tr0);
        advance(&mut stage, &mut tr, &k1, 0.5 * dt, &base, &tr0);
        let k2 = eval(&stage, &tr);
        advance(&mut stage, &mut tr, &k2, 0.5 * dt, &base, &tr0);
        let k3 = eval(&stage, &tr);
        advance(&mut stage, &mut tr, &k3, dt, &base, &tr0);
        let k4 = eval(&stage, &tr);
        // combine
        if let Model::Contour { markers, .. } = &mut self.model {
            let (a, b, c, d) = (k1.0.unwrap(), k2.0.unwrap(), k3.0.unwrap(), k4.0.unwrap());
            for (k, p) in markers.iter_mut().enumerate() {
                for e in 0..2 {
                    p[e] += dt / 6.0 * (a[k][e] + 2.0 * b[k][e] + 2.0 * c[k][e] + d[k][e]);
                }
            }
        }
        for (idx, (p, j)) in traj.iter_mut().enumerate() {
            for a in 0..n {
                p[a] += dt / 6.0 * (k1.1[idx].0[a] + 2.0 * k2.1[idx].0[a] + 2.0 * k3.1[idx].0[a] + k4.1[idx].0[a]);
                for b in 0..n {
                    j[a][b] += dt / 6.0 * (k1.1[idx].1[a][b] + 2.0 * k2.1[idx].1[a][b] + 2.0 * k3.1[idx].1[a][b] + k4.1[idx].1[a][b]);
                }
            }
        }
        self.t = t0 + dt;
    }
}

/// Velocity at `x` after the patch has evolved for `t_rel` (evolved with the default step).
pub fn velocity(patch: &Patch, x: &[f64], t_rel: f64) -> Result<Vec<f64>> {
    if x.len() != patch.n() {
        return Err(Error::InvalidInput("velocity: dimension mismatch".into()));
    }
    let horizon = 1.0 / patch.c();
    if !(t_rel < horizon) || t_rel < 0.0 {
        return Err(Error::BlowUpHorizon { t: t_rel, horizon });
    }
    let cfg = OdeConfig::default();
    let mut st = FlowState::new(patch, &cfg)?;
    let steps = (t_rel / cfg.dt).ceil() as usize;
    let mut none: Vec<(Vec<f64>, Vec<Vec<f64>>)> = Vec::new();
    for _ in 0..steps {
        st.step(t_rel / steps as f64, &mut none);
    }
    Ok(st.velocity_grad(x).0)
}

/// Result of [`ode_flow`].
#[derive(Debug, Clone)]
pub struct OdeRun {
    pub times: Vec<f64>,
    /// `samples[step][k]` for trajectory `k`.
    pub samples: Vec<Vec<FlowSample>>,
    /// Final state (for boundary snapshots and further queries).
    pub state: FlowState,
}

impl OdeRun {
    /// Samples at the recorded time closest to `t`.
    pub fn at(&self, t: f64) -> &[FlowSample] {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        &self.samples[k]
    }
}

fn sample(st: &FlowState, x0: &[Vec<f64>], traj: &[(Vec<f64>, Vec<Vec<f64>>)]) -> Vec<FlowSample> {
    x0.iter()
        .zip(traj)
        .map(|(x, (p, j))| FlowSample {
            x0: x.clone(),
            t: st.t,
            psi: p.clone(),
            jac: j.clone(),
            rho: if st.contains(p) { st.density() } else { 0.0 },
        })
        .collect()
}

/// Classical RK4 for the patch and the trajectories from `x0s`; steps are shortened so that
/// every time in `stops` is hit exactly. Samples are recorded at every step.
pub fn ode_flow(patch: &Patch, x0s: &[Vec<f64>], t_end: f64, cfg: &OdeConfig) -> Result<OdeRun> {
    ode_flow_stops(patch, x0s, &[t_end], cfg)
}

pub fn ode_flow_stops(patch: &Patch, x0s: &[Vec<f64>], stops: &[f64], cfg: &OdeConfig) -> Result<OdeRun> {
    let n = patch.n();
    if !(cfg.dt > 0.0) {
        return Err(Error::InvalidInput("time step must be positive".into()));
    }
    if x0s.iter().any(|x| x.len() != n || x.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput("trajectory start points must be finite and of the patch dimension".into()));
    }
    let mut stops: Vec<f64> = stops.to_vec();
    stops.sort_by(|a, b| a.total_cmp(b));
    let t_end = stops.last().copied().unwrap_or(0.0);
    let horizon = 1.0 / patch.c();
    if !(t_end < horizon) {
        return Err(Error::BlowUpHorizon { t: t_end, horizon });
    }
    if stops.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidInput("negative time".into()));
    }
    let mut st = FlowState::new(patch, cfg)?;
    let ident: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect();
    let mut traj: Vec<(Vec<f64>, Vec<Vec<f64>>)> = x0s.iter().map(|x| (x.clone(), ident.clone())).collect();
    let mut times = vec![0.0];
    let mut samples = vec![sample(&st, x0s, &traj)];
    let mut t = 0.0;
    for &stop in &stops {
        let span = stop - t;
        if span <= 0.0 {
            continue;
        }
        let steps = (span / cfg.dt - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for k in 0..steps {
            st.step(h, &mut traj);
            st.t = t + h * (k + 1) as f64;
            times.push(st.t);
            samples.push(sample(&st, x0s, &traj));
        }
        t = stop;
    }
    Ok(OdeRun { times, samples, state: st })
}

/// Even-odd test against a closed polygon.
pub fn polygon_contains(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let m = poly.len();
    for k in 0..m {
        let a = poly[k];
        let b = poly[(k + 1) % m];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Whether a closed polygon has no self-intersections (non-adjacent edges only).
pub fn polygon_is_simple(poly: &[[f64; 2]]) -> bool {
    let m = poly.len();
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    for i in 0..m {
        let (a, b) = (poly[i], poly[(i + 1) % m]);
        for j in (i + 2)..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % m]);
            if orient(a, b, c) * orient(a, b, d) < 0.0 && orient(c, d, a) * orient(c, d, b) < 0.0 {
                return false;
            }
        }
    }
    true
}

/// Samples of the truncated series at time `t`; densities come from the image of the boundary.
pub fn series_samples(sol: &SeriesSolution, x0s: &[Vec<f64>], t: f64) -> Result<Vec<FlowSample>> {
    let patch = sol.mesh().patch();
    let c = patch.c();
    let image: Vec<[f64; 2]> = sol.boundary_image(t).iter().map(|p| [p[0], p[1]]).collect();
    let ball = patch.ball();
    x0s.iter()
        .map(|x| {
            let (psi, jac) = sol.assemble_flow(x, t)?;
            let inside = match ball {
                Some((cen, _)) => {
                    let r_img = crate::dist(&sol.boundary_image(t)[0], &cen);
                    psi.iter().zip(&cen).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() < r_img
                }
                None => polygon_contains(&image, [psi[0], psi[1]]),
            };
            Ok(FlowSample { x0: x.clone(), t, psi, jac, rho: if inside { c / (1.0 - c * t) } else { 0.0 } })
        })
        .collect()
}

/// Deviations of the flow laws over a sample set, optionally against a second engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub samples: usize,
    /// `max |det J − (1 − t ρ0(x0))|`.
    pub det_law: f64,
    /// `max |ρ(ψ) det J − ρ0(x0)|`.
    pub mass_law: f64,
    /// `max ‖ψ_a − ψ_b‖` when a comparison set is given.
    pub gap: Option<f64>,
    pub min_det: f64,
}

/// Check the determinant and mass laws for `samples` of `patch`; `other` must list the same `(x0, t)` pairs.
pub fn law_checks(patch: &Patch, samples: &[FlowSample], other: Option<&[FlowSample]>) -> Result<LawReport> {
    let c = patch.c();
    let mut det_law = 0.0f64;
    let mut mass_law = 0.0f64;
    let mut min_det = f64::INFINITY;
    for s in samples {
        let (tag, _) = patch.classify(&s.x0)?;
        let rho0 = if tag == crate::RegionTag::Interior { c } else { 0.0 };
        let dj = s.det_j();
        min_det = min_det.min(dj);
        det_law = det_law.max((dj - (1.0 - s.t * rho0)).abs());
        mass_law = mass_law.max((s.rho * dj - rho0).abs());
    }
    let gap = match other {
        Some(o) => {
            if o.len() != samples.len() {
                return Err(Error::InvalidInput("comparison sample sets differ in size".into()));
            }
            Some(
                samples
                    .iter()
                    .zip(o)
                    .map(|(a, b)| a.psi.iter().zip(&b.psi).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
                    .fold(0.0, f64::max),
            )
        }
        None => None,
    };
    Ok(LawReport { samples: samples.len(), det_law, mass_law, gap, min_det: if samples.is_empty() { 1.0 } else { min_det } })
}

/// Restart from the series state at `t1`: refit the image boundary and raise the density to `c/(1−c t1)`.
pub fn restart(state: &ScenarioState, series: &SeriesSolution, t1: f64) -> Result<ScenarioState> {
    let spec = &state.patch;
    let c = spec.c;
    if !(t1 >= 0.0) || !(c * t1 < 1.0) {
        return Err(Error::BlowUpHorizon { t: state.t_base + t1, horizon: state.t_base + 1.0 / c });
    }
    if let Some(r) = series.tau_empirical {
        if t1 >= r {
            return Err(Error::OutsideRadius { t: t1, radius: r });
        }
    }
    let mut next = state.clone();
    next.generation += 1;
    next.t_base += t1;
    if t1 == 0.0 {
        return Ok(next);
    }
    let image = series.boundary_image(t1);
    let boundary = match &spec.boundary {
        BoundaryCurve::Sphere { center, .. } => {
            let cen = crate::to_vec3(center);
            let r = image.iter().map(|p| crate::dist(p, &cen)).sum::<f64>() / image.len() as f64;
            BoundaryCurve::Sphere { center: center.clone(), radius: r }
        }
        BoundaryCurve::Fourier2d { cos_x, .. } => {
            let ts = series.mesh().boundary_params().ok_or_else(|| Error::InvalidInput("missing boundary parameters".into()))?;
            let pts: Vec<[f64; 2]> = image.iter().map(|p| [p[0], p[1]]).collect();
            if !polygon_is_simple(&pts) {
                return Err(Error::Topology("image boundary self-intersects".into()));
            }
            let (curve, resid) = FourierCurve::fit(ts, &pts, cos_x.len())?;
            let scale = pts.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max).max(1e-300);
            let threshold = 1e-6;
            if resid / scale > threshold {
                return Err(Error::Resolution { residual: resid / scale, threshold });
            }
            curve.to_boundary()
        }
    };
    next.patch = PatchSpec { boundary, c: c / (1.0 - c * t1), ..spec.clone() };
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_roundtrip() {
        assert_eq!(transport_rescale(0.0, 1.0).unwrap(), 0.0);
        assert!((transport_rescale(0.5, 1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        let s = transport_rescale(0.9, 1.0).unwrap();
        assert!((transport_rescale_inverse(s, 1.0) - 0.9).abs() < 1e-12);
        assert!(transport_rescale(1.0, 1.0).is_err());
    }

    #[test]
    fn disk_velocity_both_representations() {
        for spec in [PatchSpec::ball(2, 1.0, 1.0), PatchSpec::fourier_disk(1.0, 1.0)] {
            let p = Patch::new(spec).unwrap();
            let st = FlowState::new(&p, &OdeConfig::default()).unwrap();
            let (v, g) = st.velocity_grad(&[0.3, -0.2]);
            assert!((v[0] + 0.15).abs() < 1e-10 && (v[1] - 0.1).abs() < 1e-10, "{v:?}");
            assert!((g[0][0] + 0.5).abs() < 1e-9 && g[0][1].abs() < 1e-9);
            let (v, _) = st.velocity_grad(&[2.0, 0.0]);
            // −(ρ|B|/2π) x/|x|² = (−1/4, 0)
            assert!((v[0] + 0.25).abs() < 1e-10 && v[1].abs() < 1e-10, "{v:?}");
            let far = st.velocity_grad(&[40.0, 0.0]).0[0].abs();
            let farther = st.velocity_grad(&[80.0, 0.0]).0[0].abs();
            assert!(farther < 0.6 * far);
        }
        // marker velocities with the log-singular rule
        let p = Patch::new(PatchSpec::fourier_disk(1.0, 1.0)).unwrap();
        let st = FlowState::new(&p, &OdeConfig::default()).unwrap();
        if let Model::Contour { markers, kress } = &st.model {
            let v = FlowState::marker_velocity(markers, kress, 1.0);
            for (x, u) in markers.iter().zip(&v) {
                assert!((u[0] + 0.5 * x[0]).abs() < 1e-10 && (u[1] + 0.5 * x[1]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ball_trajectories() {
        let p = Patch::new(PatchSpec::ball(2, 1.0, 1.0)).unwrap();
        let run = ode_flow(&p, &[vec![0.5, 0.0], vec![0.0, 0.0], vec![1.5, 0.5]], 0.3, &OdeConfig::default()).unwrap();
        let last = run.samples.last().unwrap();
        assert!((last[0].psi[0] - 0.5 * 0.7f64.sqrt()).abs() < 1e-6);
        assert!((last[0].det_j() - 0.7).abs() < 1e-4);
        assert_eq!(last[1].psi, vec![0.0, 0.0]);
        let ex = crate::oracle::exact_ball_flow(2, 1.0, 1.0, &[1.5, 0.5], 0.3).unwrap();
        assert!((last[2].psi[0] - ex.psi[0]).abs() < 1e-8);
        let rep = law_checks(&p, last, None).unwrap();
        assert!(rep.det_law < 1e-6 && rep.mass_law < 1e-6, "{rep:?}");
        assert!(ode_flow(&p, &[vec![0.1, 0.1]], 1.0, &OdeConfig::default()).is_err());
    }

    #[test]
    fn ellipse_contour_keeps_laws() {
        let p = Patch::new(PatchSpec::ellipse(2.0, 1.0, 1.0)).unwrap();
        let cfg = OdeConfig { dt: 1e-2, markers: 128 };
        let run = ode_flow(&p, &[vec![0.5, 0.3], vec![-1.0, 0.1], vec![3.0, 0.0]], 0.3, &cfg).unwrap();
        let rep = law_checks(&p, run.samples.last().unwrap(), None).unwrap();
        assert!(rep.det_law < 1e-6, "{rep:?}");
        assert!(rep.mass_law < 1e-6);
        // ellipses stay ellipses with area (1−ct)·2π
        let area = run.state.area();
        assert!((area - 0.7 * 2.0 * PI).abs() < 1e-6, "{area}");
    }

    #[test]
    fn polygon_helpers() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(polygon_contains(&sq, [0.5, 0.5]));
        assert!(!polygon_contains(&sq, [1.5, 0.5]));
        assert!(polygon_is_simple(&sq));
        assert!(!polygon_is_simple(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]));
    }
}
