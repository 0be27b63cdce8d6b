//! Newtonian kernel family `N`, `K_j = ∂_j N`, `R_{j,i} = ∂_i ∂_j N` and the uniform-ball closed forms.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Surface area of the unit sphere `S^{n-1}`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

/// Volume of the unit ball in `R^n`.
pub fn ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

/// Normalization of the kernel family together with the velocity sign.
///
/// With `c_n = 1/|S^{n-1}|`, `N` is the fundamental solution of the Laplacian, so
/// `Δ(N * f) = f`. The velocity is `v = sign_v · ∇N * ρ` with `sign_v = -1`
/// (so `div v = -ρ` and patches contract).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConvention {
    pub n: usize,
    pub c_n: f64,
    pub sign_v: f64,
}

impl KernelConvention {
    pub fn new(n: usize) -> Self {
        Self { n, c_n: 1.0 / sphere_area(n), sign_v: -1.0 }
    }

    /// Coefficient of the identity term in `∂_i (K_j * f) = pv R_{j,i} * f + δ_{ij} (c_n |S^{n-1}| / n) f`.
    ///
    /// Equals `1/n` exactly when `c_n` is the Laplacian normalization; any other
    /// choice breaks the trace identity, which is what the trace checks detect.
    pub fn identity_coefficient(&self) -> f64 {
        self.c_n * sphere_area(self.n) / self.n as f64
    }
}

/// Which kernel to evaluate; indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelId {
    Newton,
    GradNewton(usize),
    Riesz(usize, usize),
}

/// Point evaluation of `N`, `K_j` or `R_{j,i}` at `x ≠ 0`.
pub fn eval_kernel(conv: &KernelConvention, id: KernelId, x: &[f64]) -> Result<f64> {
    let n = conv.n;
    if x.len() != n || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("expected {n} finite coordinates")));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 == 0.0 {
        return Err(Error::Singularity);
    }
    let r = r2.sqrt();
    let check = |k: usize| {
        if k < n {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("kernel index {k} out of range for n = {n}")))
        }
    };
    Ok(match id {
        KernelId::Newton => {
            if n == 2 {
                r.ln() * conv.c_n
            } else {
                -conv.c_n / ((n as f64 - 2.0) * r.powi(n as i32 - 2))
            }
        }
        KernelId::GradNewton(j) => {
            check(j)?;
            conv.c_n * x[j] / r.powi(n as i32)
        }
        KernelId::Riesz(j, i) => {
            check(j)?;
            check(i)?;
            let d = if i == j { r2 } else { 0.0 };
            conv.c_n * (d - n as f64 * x[j] * x[i]) / r.powi(n as i32 + 2)
        }
    })
}

/// Quantities available in closed form for the uniform ball `χ_{B_R(0)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BallQuantity {
    NewtonPotOfChi,
    GradNewtonPotOfChi(usize),
    RieszOfChi(usize, usize),
}

/// Exact `N*χ_B`, its gradient, and its Hessian (the full distributional
/// derivative, i.e. pv plus identity term) for a ball of radius `R` centred at 0.
pub fn ball_closed_form(n: usize, radius: f64, kind: BallQuantity, x: &[f64]) -> Result<f64> {
    if n < 2 || x.len() != n || x.iter().any(|v| !v.is_finite()) || radius <= 0.0 {
        return Err(Error::InvalidInput("ball_closed_form: bad arguments".into()));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let r = r2.sqrt();
    let rr = radius;
    if (r - rr).abs() <= 1e-14 * rr {
        return Err(Error::InvalidInput(
            "point on the sphere; use one-sided limits instead".into(),
        ));
    }
    let nf = n as f64;
    let inside = r < rr;
    let idx = |k: usize| {
        if k < n {
            Ok(k)
        } else {
            Err(Error::InvalidInput(format!("index {k} out of range")))
        }
    };
    Ok(match kind {
        BallQuantity::NewtonPotOfChi => {
            if inside {
                let c = if n == 2 {
                    0.5 * rr * rr * rr.ln() - 0.25 * rr * rr
                } else {
                    -rr * rr / (2.0 * (nf - 2.0))
                };
                r2 / (2.0 * nf) + c
            } else if n == 2 {
                0.5 * rr * rr * r.ln()
            } else {
                -rr.powi(n as i32) / (nf * (nf - 2.0) * r.powi(n as i32 - 2))
            }
        }
        BallQuantity::GradNewtonPotOfChi(j) => {
            let j = idx(j)?;
            if inside {
                x[j] / nf
            } else {
                rr.powi(n as i32) / nf * x[j] / r.powi(n as i32)
            }
        }
        BallQuantity::RieszOfChi(j, i) => {
            let (j, i) = (idx(j)?, idx(i)?);
            let d = if i == j { 1.0 } else { 0.0 };
            if inside {
                d / nf
            } else {
                rr.powi(n as i32) / nf * (d * r2 - nf * x[i] * x[j]) / r.powi(n as i32 + 2)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn riesz_examples() {
        let c = KernelConvention::new(2);
        let v = eval_kernel(&c, KernelId::Riesz(0, 1), &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(v, -c.c_n / 2.0, epsilon = 1e-15);
        let v = eval_kernel(&c, KernelId::Riesz(0, 0), &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(v, c.c_n, epsilon = 1e-15);
        assert!(matches!(eval_kernel(&c, KernelId::Newton, &[0.0, 0.0]), Err(Error::Singularity)));
    }

    #[test]
    fn normalization() {
        assert_abs_diff_eq!(KernelConvention::new(2).c_n, 1.0 / (2.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(KernelConvention::new(3).c_n, 1.0 / (4.0 * PI), epsilon = 1e-15);
        for n in 2..=3 {
            assert_abs_diff_eq!(KernelConvention::new(n).identity_coefficient(), 1.0 / n as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn ball_examples() {
        let q = |n, x: &[f64], j, i| ball_closed_form(n, 1.0, BallQuantity::RieszOfChi(j, i), x).unwrap();
        assert_abs_diff_eq!(q(2, &[0.0, 0.0], 0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q(2, &[2.0, 0.0], 0, 0), -0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(q(3, &[0.0, 0.0, 0.0], 0, 0), 1.0 / 3.0, epsilon = 1e-15);
        let g = ball_closed_form(2, 1.0, BallQuantity::GradNewtonPotOfChi(0), &[2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g, 0.25, epsilon = 1e-15);
        assert!(ball_closed_form(2, 1.0, BallQuantity::NewtonPotOfChi, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn ball_potential_is_continuous_and_matches_gradient() {
        for n in 2..=3usize {
            let pot = |x: &[f64]| ball_closed_form(n, 1.3, BallQuantity::NewtonPotOfChi, x).unwrap();
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            a[0] = 1.3 - 1e-9;
            b[0] = 1.3 + 1e-9;
            assert_abs_diff_eq!(pot(&a), pot(&b), epsilon = 1e-8);
            let mut x = vec![0.0; n];
            x[0] = 0.4;
            x[1] = 1.7;
            for j in 0..n {
                let h = 1e-5;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (pot(&xp) - pot(&xm)) / (2.0 * h);
                let g = ball_closed_form(n, 1.3, BallQuantity::GradNewtonPotOfChi(j), &x).unwrap();
                assert_abs_diff_eq!(fd, g, epsilon = 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn kernel_trace_vanishes(x in prop::array::uniform3(-5.0f64..5.0), n in 2usize..=3) {
            let p = &x[..n];
            prop_assume!(p.iter().map(|v| v * v).sum::<f64>() > 1e-4);
            let c = KernelConvention::new(n);
            let tr: f64 = (0..n).map(|j| eval_kernel(&c, KernelId::Riesz(j, j), p).unwrap()).sum();
            prop_assert!(tr.abs() < 1e-9 * (1.0 + c.c_n / p.iter().map(|v| v * v).sum::<f64>()));
        }

        #[test]
        fn riesz_homogeneity(x in prop::array::uniform3(-3.0f64..3.0), lam in 0.1f64..10.0, j in 0usize..2, i in 0usize..2) {
            let p = &x[..2];
            prop_assume!(p.iter().map(|v| v * v).sum::<f64>() > 1e-3);
            let c = KernelConvention::new(2);
            let a = eval_kernel(&c, KernelId::Riesz(j, i), p).unwrap();
            let q: Vec<f64> = p.iter().map(|v| v * lam).collect();
            let b = eval_kernel(&c, KernelId::Riesz(j, i), &q).unwrap();
            prop_assert!((b - a / (lam * lam)).abs() <= 1e-10 * a.abs().max(1.0));
            let s = eval_kernel(&c, KernelId::Riesz(i, j), p).unwrap();
            prop_assert!((a - s).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }
}
