use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use patchflow::evolution::OdeConfig;
use patchflow::mesh::MeshOptions;
use patchflow::{Patch, PatchSpec, SeriesConfig};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Largest truncation order accepted from a scenario file.
pub const MAX_ORDER: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Series,
    Ode,
    #[default]
    Both,
}

impl Engine {
    pub fn series(self) -> bool {
        self != Engine::Ode
    }
    pub fn ode(self) -> bool {
        self != Engine::Series
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeResolution {
    #[serde(default = "NodeResolution::default_radial")]
    pub radial: usize,
    #[serde(default = "NodeResolution::default_angular")]
    pub angular: usize,
}

impl NodeResolution {
    fn default_radial() -> usize {
        MeshOptions::default().radial
    }
    fn default_angular() -> usize {
        MeshOptions::default().angular
    }
}

impl Default for NodeResolution {
    fn default() -> Self {
        Self { radial: Self::default_radial(), angular: Self::default_angular() }
    }
}

fn default_order() -> usize {
    12
}
fn default_probes() -> usize {
    24
}
fn default_sign() -> f64 {
    -1.0
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub patch: PatchSpec,
    #[serde(default)]
    pub engine: Engine,
    #[serde(rename = "S", default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub t_list: Vec<f64>,
    #[serde(default)]
    pub node_resolution: NodeResolution,
    #[serde(default)]
    pub restart_schedule: Vec<f64>,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Number of sample trajectories; two thirds start inside the patch.
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub ode: OdeConfig,
    #[serde(default = "yes")]
    pub certify: bool,
    /// Sign of the velocity assembly. Only `-1` is physical; `+1` exists to exercise `verify`.
    #[serde(default = "default_sign")]
    pub kernel_sign: f64,
}

impl Scenario {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let sc: Scenario = serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Invalid(m));
        if self.order == 0 || self.order > MAX_ORDER {
            return bad(format!("S must lie in 1..={MAX_ORDER}, got {}", self.order));
        }
        if self.kernel_sign.abs() != 1.0 {
            return bad("kernel_sign must be +1 or -1".into());
        }
        if self.node_resolution.radial < 4 || self.node_resolution.angular < 8 {
            return bad("node_resolution too coarse (radial ≥ 4, angular ≥ 8)".into());
        }
        if !(self.ode.dt > 0.0) || self.ode.markers < 16 || self.ode.markers % 2 == 1 {
            return bad("ode.dt must be positive and ode.markers even and ≥ 16".into());
        }
        if self.t_list.iter().chain(&self.restart_schedule).any(|t| !t.is_finite() || *t < 0.0) {
            return bad("times must be finite and non-negative".into());
        }
        if self.restart_schedule.iter().any(|t| *t == 0.0) {
            return bad("restart times must be positive".into());
        }
        if !(self.patch.c > 0.0) {
            return bad("patch density c must be positive".into());
        }
        let horizon = 1.0 / self.patch.c;
        let restart_total: f64 = self.restart_schedule.iter().sum();
        let latest = self.t_list.iter().copied().fold(restart_total, f64::max);
        if latest >= horizon {
            return Err(CliError::Horizon { t: latest, horizon });
        }
        Patch::new(self.patch.clone()).map_err(|e| CliError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn series_config(&self, seed: u64) -> SeriesConfig {
        let mut cfg = SeriesConfig { order: self.order, certify: self.certify, kernel_sign: self.kernel_sign, ..SeriesConfig::default() };
        cfg.mesh.radial = self.node_resolution.radial;
        cfg.mesh.angular = self.node_resolution.angular;
        cfg.norms.seed = seed;
        cfg
    }

    /// Seeded start points: interior ones at relative depth ≤ 0.85, exterior ones in the shell `[1.15, 1.5]`.
    pub fn probe_points(&self, patch: &Patch, seed: u64) -> Vec<Vec<f64>> {
        let n = patch.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = (2 * self.probes).div_ceil(3);
        (0..self.probes)
            .map(|k| {
                let q = if k < inner {
                    rng.random_range(0.01f64..0.85f64.powi(n as i32)).powf(1.0 / n as f64)
                } else {
                    rng.random_range(1.15..1.5)
                };
                match patch.ball() {
                    Some((cen, r)) => {
                        let dir = random_direction(&mut rng, n);
                        (0..n).map(|i| cen[i] + q * r * dir[i]).collect()
                    }
                    None => {
                        let th = rng.random_range(0.0..2.0 * PI);
                        let b = patch.boundary_at_angle(th);
                        let c0 = patch.star_center();
                        (0..2).map(|i| c0[i] + q * (b[i] - c0[i])).collect()
                    }
                }
            })
            .collect()
    }
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if m > 1e-3 && m <= 1.0 {
            return v.iter().map(|x| x / m).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball() -> Scenario {
        serde_json::from_str(r#"{"patch": {"n": 2, "c": 1.0, "boundary": {"mode": "sphere", "center": [0, 0], "radius": 1}}}"#)
            .unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let sc = ball();
        assert_eq!(sc.engine, Engine::Both);
        assert_eq!(sc.order, 12);
        assert_eq!(sc.kernel_sign, -1.0);
        sc.validate().unwrap();
    }

    #[test]
    fn horizon_is_cumulative() {
        let mut sc = ball();
        sc.restart_schedule = vec![0.5, 0.5];
        assert!(matches!(sc.validate(), Err(CliError::Horizon { .. })));
        sc.restart_schedule = vec![0.5];
        sc.t_list = vec![0.99];
        sc.validate().unwrap();
    }

    #[test]
    fn probes_are_seeded_and_split() {
        let sc = ball();
        let patch = Patch::new(sc.patch.clone()).unwrap();
        let a = sc.probe_points(&patch, 7);
        assert_eq!(a, sc.probe_points(&patch, 7));
        let inside = a.iter().filter(|p| p[0].hypot(p[1]) < 1.0).count();
        assert_eq!(inside, 16);
    }
}
