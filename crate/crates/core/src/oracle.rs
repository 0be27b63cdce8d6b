//! Brute-force references: ε-ring quadrature for principal values, exact ball flows and coefficients,
//! and CSV fixtures. Deliberately shares no quadrature code with the production path.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use crate::kernels::{ball_closed_form, eval_kernel, BallQuantity, KernelConvention, KernelId};
use crate::{Error, Result};

/// Brute-force settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Largest cutoff; the ring sequence is `eps_ring · 2^{-k}`.
    pub eps_ring: f64,
    pub richardson_levels: usize,
    /// Angular cells (2D) or polar cells (3D; azimuth uses twice as many).
    pub angular: usize,
    /// Radial cells per unit of `ln(r_max/ε)`.
    pub radial_per_log: usize,
    /// Outer radius of the integration ball around the target.
    pub r_max: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { eps_ring: 0.04, richardson_levels: 3, angular: 720, radial_per_log: 400, r_max: 4.0 }
    }
}

/// Value with error bar from the last two extrapolants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    pub error: f64,
    /// False when successive extrapolants disagree by more than the raw ring differences.
    pub converged: bool,
}

fn ring_integral(n: usize, f: &dyn Fn(&[f64]) -> f64, j: usize, i: usize, x: &[f64], eps: f64, cfg: &OracleConfig) -> f64 {
    let conv = KernelConvention::new(n);
    let nr = ((cfg.r_max / eps).ln() * cfg.radial_per_log as f64).ceil() as usize;
    let h = (cfg.r_max / eps).ln() / nr as f64;
    let mut p = vec![0.0; n];
    let mut sum = 0.0;
    let mut dirs: Vec<(Vec<f64>, f64)> = Vec::new();
    if n == 2 {
        let m = cfg.angular;
        for a in 0..m {
            let th = 2.0 * PI * (a as f64 + 0.5) / m as f64;
            dirs.push((vec![th.cos(), th.sin()], 2.0 * PI / m as f64));
        }
    } else {
        let m = cfg.angular;
        for a in 0..m {
            let th = PI * (a as f64 + 0.5) / m as f64;
            let dth = PI / m as f64;
            for b in 0..2 * m {
                let ph = PI * (b as f64 + 0.5) / m as f64;
                let w = th.sin() * dth * (PI / m as f64);
                dirs.push((vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()], w));
            }
        }
    }
    for (w_dir, dw) in &dirs {
        // ρ^{n} K(ρω) = K(ω): the kernel is homogeneous of degree −n, so in log-radius the weight is K(ω)
        let k = eval_kernel(&conv, KernelId::Riesz(j, i), w_dir).unwrap_or(0.0);
        let mut line = 0.0;
        for r in 0..nr {
            let rho = eps * ((r as f64 + 0.5) * h).exp();
            for d in 0..n {
                p[d] = x[d] + rho * w_dir[d];
            }
            line += f(&p);
        }
        sum += dw * k * line * h;
    }
    sum
}

/// `lim_{ε→0} ∫_{|ζ−x|>ε} f(ζ) ∂_i ∂_j N(x−ζ) dζ` plus the identity part, i.e. the full second derivative
/// of the Newton potential of `f` at a point where `f` is smooth. `f` must vanish outside `|ζ−x| < r_max`.
pub fn brute_pv_riesz(n: usize, f: &dyn Fn(&[f64]) -> f64, j: usize, i: usize, x: &[f64], cfg: &OracleConfig) -> Result<OracleValue> {
    if !(n == 2 || n == 3) || x.len() != n || j >= n || i >= n {
        return Err(Error::InvalidInput("oracle supports n = 2, 3".into()));
    }
    let levels = cfg.richardson_levels.max(2);
    let mut vals = Vec::with_capacity(levels);
    for k in 0..levels {
        let eps = cfg.eps_ring / 2f64.powi(k as i32);
        vals.push(ring_integral(n, f, j, i, x, eps, cfg));
    }
    // the ring error of a smooth integrand is O(ε²) (odd moments of the kernel vanish)
    let extrap: Vec<f64> = vals.windows(2).map(|w| (4.0 * w[1] - w[0]) / 3.0).collect();
    let value = *extrap.last().unwrap();
    let raw = (vals[levels - 1] - vals[levels - 2]).abs();
    let error = if extrap.len() >= 2 { (extrap[extrap.len() - 1] - extrap[extrap.len() - 2]).abs() } else { raw };
    // identity part: f(x)·δ_ij/n
    let fx = f(x);
    let conv = KernelConvention::new(n);
    let id = if i == j { fx * conv.identity_coefficient() } else { 0.0 };
    Ok(OracleValue { value: value + id, error, converged: error <= raw.max(1e-14) })
}

/// Exact ball state at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallFlow {
    pub psi: Vec<f64>,
    /// Row `j` holds `∇ψ_j`.
    pub jac: Vec<Vec<f64>>,
    pub det_j: f64,
    pub rho: f64,
}

/// Flow of the ball `|x| ≤ R` with density `c`. Inside `ψ = x (1−ct)^{1/n}`; outside the flux through spheres
/// is conserved so `|ψ|^n = |x|^n − c R^n t`.
pub fn exact_ball_flow(n: usize, r: f64, c: f64, x0: &[f64], t: f64) -> Result<BallFlow> {
    if x0.len() != n || !(n == 2 || n == 3) {
        return Err(Error::InvalidInput("exact_ball_flow: dimension mismatch".into()));
    }
    if c * t >= 1.0 {
        return Err(Error::BlowUpHorizon { t, horizon: 1.0 / c });
    }
    let r0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nf = n as f64;
    if r0 <= r {
        let g = (1.0 - c * t).powf(1.0 / nf);
        let jac = (0..n).map(|a| (0..n).map(|b| if a == b { g } else { 0.0 }).collect()).collect();
        return Ok(BallFlow { psi: x0.iter().map(|v| v * g).collect(), jac, det_j: 1.0 - c * t, rho: c / (1.0 - c * t) });
    }
    let a = c * r.powf(nf) * t / r0.powf(nf);
    let u = 1.0 - a;
    let g = u.powf(1.0 / nf);
    let gp = c * r.powf(nf) * t * r0.powf(-nf - 1.0) * u.powf(1.0 / nf - 1.0);
    let jac: Vec<Vec<f64>> = (0..n)
        .map(|jj| (0..n).map(|ii| if ii == jj { g } else { 0.0 } + x0[jj] * gp * x0[ii] / r0).collect())
        .collect();
    let det_j = g.powf(nf - 1.0) * (g + r0 * gp);
    Ok(BallFlow { psi: x0.iter().map(|v| v * g).collect(), jac, det_j, rho: 0.0 })
}

/// Taylor coefficient `κ_s = binom(1/n, s)(−c)^s` of the interior ball flow `ξ^(s)(x) = κ_s x`.
pub fn exact_ball_coeff(n: usize, c: f64, s: usize) -> f64 {
    let a = 1.0 / n as f64;
    let mut b = 1.0;
    for k in 0..s {
        b *= (a - k as f64) / (k + 1) as f64;
    }
    b * (-c).powi(s as i32)
}

/// Write reference CSV files into `dir`; returns the written paths.
pub fn write_fixtures(dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let p = dir.join("ball_coefficients.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["n", "c", "s", "kappa"])?;
    for n in [2usize, 3] {
        for c in [0.5, 1.0, 2.0] {
            for s in 1..=12 {
                w.write_record([n.to_string(), c.to_string(), s.to_string(), format!("{:.17e}", exact_ball_coeff(n, c, s))])?;
            }
        }
    }
    w.flush()?;
    written.push(p);

    let p = dir.join("ball_flow.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["n", "R", "c", "t", "x0", "x1", "x2", "psi0", "psi1", "psi2", "det_j", "rho"])?;
    for n in [2usize, 3] {
        for t in [0.0, 0.1, 0.3, 0.5, 0.8] {
            for x in [[0.5, 0.0, 0.0], [0.3, -0.4, 0.2], [1.5, 0.5, 0.0], [0.0, 2.0, -1.0]] {
                let f = exact_ball_flow(n, 1.0, 1.0, &x[..n], t)?;
                let mut rec = vec![n.to_string(), "1".into(), "1".into(), t.to_string()];
                for d in 0..3 {
                    rec.push(if d < n { x[d].to_string() } else { String::new() });
                }
                for d in 0..3 {
                    rec.push(if d < n { format!("{:.17e}", f.psi[d]) } else { String::new() });
                }
                rec.push(format!("{:.17e}", f.det_j));
                rec.push(format!("{:.17e}", f.rho));
                w.write_record(rec)?;
            }
        }
    }
    w.flush()?;
    written.push(p);

    let p = dir.join("ball_riesz.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["n", "j", "i", "x0", "x1", "x2", "value"])?;
    for n in [2usize, 3] {
        for x in [[0.0, 0.0, 0.0], [0.3, 0.2, 0.1], [2.0, 0.0, 0.0], [1.2, -0.7, 0.4]] {
            for j in 0..n {
                for i in 0..n {
                    let v = ball_closed_form(n, 1.0, BallQuantity::RieszOfChi(j, i), &x[..n])?;
                    let mut rec = vec![n.to_string(), j.to_string(), i.to_string()];
                    rec.extend((0..3).map(|d| if d < n { x[d].to_string() } else { String::new() }));
                    rec.push(format!("{:.17e}", v));
                    w.write_record(rec)?;
                }
            }
        }
    }
    w.flush()?;
    written.push(p);

    let p = dir.join("disk_pv_bruteforce.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["x0", "x1", "j", "i", "value", "error"])?;
    let disk = |z: &[f64]| if z[0] * z[0] + z[1] * z[1] < 1.0 { 1.0 } else { 0.0 };
    let cfg = OracleConfig { angular: 360, radial_per_log: 200, ..Default::default() };
    for x in [[0.0, 0.0], [0.3, 0.2], [2.0, 0.0]] {
        for (j, i) in [(0, 0), (0, 1), (1, 1)] {
            let v = brute_pv_riesz(2, &disk, j, i, &x, &cfg)?;
            w.write_record([x[0].to_string(), x[1].to_string(), j.to_string(), i.to_string(), format!("{:.12e}", v.value), format!("{:.3e}", v.error)])?;
        }
    }
    w.flush()?;
    written.push(p);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_examples() {
        assert!((exact_ball_coeff(2, 1.0, 1) + 0.5).abs() < 1e-15);
        assert!((exact_ball_coeff(2, 1.0, 2) + 0.125).abs() < 1e-15);
        assert!((exact_ball_coeff(2, 1.0, 3) + 0.0625).abs() < 1e-15);
        assert!((exact_ball_coeff(3, 1.0, 1) + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(exact_ball_coeff(2, 0.0, 3), 0.0);
    }

    #[test]
    fn ball_flow_examples() {
        let f = exact_ball_flow(2, 1.0, 1.0, &[0.5, 0.0], 0.3).unwrap();
        assert!((f.psi[0] - 0.41833).abs() < 1e-5);
        assert!((f.det_j - 0.7).abs() < 1e-14 && (f.rho - 1.0 / 0.7).abs() < 1e-14);
        let f = exact_ball_flow(3, 1.0, 2.0, &[0.1, 0.2, 0.0], 0.25).unwrap();
        assert!((f.det_j - 0.5).abs() < 1e-14);
        let f = exact_ball_flow(2, 1.0, 1.0, &[0.2, 0.1], 0.0).unwrap();
        assert_eq!(f.psi, vec![0.2, 0.1]);
        assert!(exact_ball_flow(2, 1.0, 1.0, &[0.2, 0.1], 1.0).is_err());
        // exterior: volume preserving, matches radial ODE ṙ = −c R^n /(n r^{n-1})
        let f = exact_ball_flow(2, 1.0, 1.0, &[1.5, 0.0], 0.5).unwrap();
        assert!((f.det_j - 1.0).abs() < 1e-12);
        let mut r: f64 = 1.5;
        let h = 1e-4;
        for _ in 0..5000 {
            let k = |r: f64| -1.0 / (2.0 * r);
            let (k1, k2) = (k(r), k(r + 0.5 * h * k(r)));
            let k3 = k(r + 0.5 * h * k2);
            let k4 = k(r + h * k3);
            r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            let _ = k1;
        }
        assert!((r - f.psi[0]).abs() < 1e-9);
    }

    #[test]
    fn brute_force_disk() {
        let disk = |z: &[f64]| if z[0] * z[0] + z[1] * z[1] < 1.0 { 1.0 } else { 0.0 };
        let cfg = OracleConfig::default();
        let v = brute_pv_riesz(2, &disk, 0, 0, &[0.0, 0.0], &cfg).unwrap();
        assert!((v.value - 0.5).abs() < 1e-4, "{v:?}");
        let v = brute_pv_riesz(2, &disk, 0, 0, &[2.0, 0.0], &cfg).unwrap();
        assert!((v.value + 0.125).abs() < 1e-4, "{v:?}");
        let zero = |_: &[f64]| 0.0;
        assert_eq!(brute_pv_riesz(2, &zero, 0, 1, &[0.1, 0.1], &cfg).unwrap().value, 0.0);
    }
}
