//! Piecewise fields: three-part storage on mesh nodes and the point-evaluation trait used by quadratures.

use serde::{Deserialize, Serialize};

use crate::Vec3;

/// Which one-sided extension or node set a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    Interior,
    Exterior,
    Boundary,
}

/// A scalar field stored as interior, exterior and boundary node values.
///
/// The boundary part holds the value assigned on `∂Ω` itself; for the
/// transforms computed here it is the average of the two one-sided limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreePartField {
    pub interior: Vec<f64>,
    pub exterior: Vec<f64>,
    pub boundary: Vec<f64>,
    pub gamma: f64,
}

impl ThreePartField {
    pub fn zeros(sizes: [usize; 3], gamma: f64) -> Self {
        Self { interior: vec![0.0; sizes[0]], exterior: vec![0.0; sizes[1]], boundary: vec![0.0; sizes[2]], gamma }
    }

    pub fn part(&self, p: Part) -> &[f64] {
        match p {
            Part::Interior => &self.interior,
            Part::Exterior => &self.exterior,
            Part::Boundary => &self.boundary,
        }
    }

    pub fn part_mut(&mut self, p: Part) -> &mut Vec<f64> {
        match p {
            Part::Interior => &mut self.interior,
            Part::Exterior => &mut self.exterior,
            Part::Boundary => &mut self.boundary,
        }
    }

    pub fn sup(&self) -> f64 {
        self.interior.iter().chain(&self.exterior).chain(&self.boundary).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Tensor rank of a bundle of components; fixes how values transform under rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BundleKind {
    Scalar,
    Vector,
    Matrix,
    /// Strictly upper entries `(l, j), l < j` of an antisymmetric matrix, row-major.
    Antisym,
}

impl BundleKind {
    pub fn len(&self, n: usize) -> usize {
        match self {
            BundleKind::Scalar => 1,
            BundleKind::Vector => n,
            BundleKind::Matrix => n * n,
            BundleKind::Antisym => n * (n - 1) / 2,
        }
    }
}

/// Index of the antisymmetric pair `(l, j)`, `l < j`.
pub fn antisym_index(n: usize, l: usize, j: usize) -> usize {
    debug_assert!(l < j && j < n);
    let mut k = 0;
    for a in 0..n {
        for b in (a + 1)..n {
            if a == l && b == j {
                return k;
            }
            k += 1;
        }
    }
    unreachable!()
}

/// Components of one tensor-valued field, each stored as a [`ThreePartField`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldBundle {
    pub kind: BundleKind,
    pub n: usize,
    pub comps: Vec<ThreePartField>,
}

impl FieldBundle {
    pub fn zeros(kind: BundleKind, n: usize, sizes: [usize; 3], gamma: f64) -> Self {
        Self { kind, n, comps: (0..kind.len(n)).map(|_| ThreePartField::zeros(sizes, gamma)).collect() }
    }

    /// Matrix component `(j, i)`.
    pub fn m(&self, j: usize, i: usize) -> &ThreePartField {
        &self.comps[j * self.n + i]
    }

    /// Rotate raw component values given in a reference frame by `q` (column-major `q[row][col]`).
    pub(crate) fn rotate(kind: BundleKind, n: usize, q: &[[f64; 3]; 3], vals: &mut [f64]) {
        match kind {
            BundleKind::Scalar => {}
            BundleKind::Vector => {
                let mut v = [0.0; 3];
                for r in 0..n {
                    v[r] = (0..n).map(|c| q[r][c] * vals[c]).sum();
                }
                vals[..n].copy_from_slice(&v[..n]);
            }
            BundleKind::Matrix | BundleKind::Antisym => {
                let mut m = [[0.0; 3]; 3];
                if kind == BundleKind::Matrix {
                    for a in 0..n {
                        for b in 0..n {
                            m[a][b] = vals[a * n + b];
                        }
                    }
                } else {
                    let mut k = 0;
                    for a in 0..n {
                        for b in (a + 1)..n {
                            m[a][b] = vals[k];
                            m[b][a] = -vals[k];
                            k += 1;
                        }
                    }
                }
                let mut qm = [[0.0; 3]; 3];
                for a in 0..n {
                    for b in 0..n {
                        qm[a][b] = (0..n).map(|c| q[a][c] * m[c][b]).sum();
                    }
                }
                let mut r = [[0.0; 3]; 3];
                for a in 0..n {
                    for b in 0..n {
                        r[a][b] = (0..n).map(|c| qm[a][c] * q[b][c]).sum();
                    }
                }
                if kind == BundleKind::Matrix {
                    for a in 0..n {
                        for b in 0..n {
                            vals[a * n + b] = r[a][b];
                        }
                    }
                } else {
                    let mut k = 0;
                    for a in 0..n {
                        for b in (a + 1)..n {
                            vals[k] = r[a][b];
                            k += 1;
                        }
                    }
                }
            }
        }
    }
}

/// A field given by its interior and exterior extensions, evaluable anywhere.
pub trait PiecewiseField: Sync {
    fn n_comp(&self) -> usize;
    /// Values of the `part` extension at `p`; `part` is `Interior` or `Exterior`.
    fn eval(&self, part: Part, p: &Vec3, out: &mut [f64]);
}

/// Constant on each side, e.g. `c χ_Ω`.
#[derive(Debug, Clone)]
pub struct PartConstant {
    pub interior: Vec<f64>,
    pub exterior: Vec<f64>,
}

impl PartConstant {
    pub fn indicator(scale: f64) -> Self {
        Self { interior: vec![scale], exterior: vec![0.0] }
    }
}

impl PiecewiseField for PartConstant {
    fn n_comp(&self) -> usize {
        self.interior.len()
    }
    fn eval(&self, part: Part, _p: &Vec3, out: &mut [f64]) {
        let src = if part == Part::Exterior { &self.exterior } else { &self.interior };
        out.copy_from_slice(src);
    }
}

/// Closure-backed field.
pub struct FnField<F> {
    pub n_comp: usize,
    pub f: F,
}

impl<F: Fn(Part, &Vec3, &mut [f64]) + Sync> PiecewiseField for FnField<F> {
    fn n_comp(&self) -> usize {
        self.n_comp
    }
    fn eval(&self, part: Part, p: &Vec3, out: &mut [f64]) {
        (self.f)(part, p, out)
    }
}
