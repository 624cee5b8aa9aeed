//! Staggered (MAC) rectangular mesh, cell/face fields and discrete operators.
//!
//! Scalars live at cell centers, vector components on the faces normal to
//! their axis. Storage is x-fastest. In box mode each face array includes
//! both wall faces (`n + 1` faces along the normal axis); in periodic mode
//! face `i` is the left face of cell `i` and there are `n` of them.
//!
//! Two-dimensional grids use the same three-axis layout with a single cell
//! along z.

mod cg;
mod ops;
pub mod snapshot;
mod solve;
mod spectral;

pub use cg::{conjugate_gradient, CgStats};
pub use solve::SolveReport;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcMode {
    /// No-slip walls for velocity, homogeneous Neumann for scalars.
    Box,
    /// Fully periodic; used only for fluid validation.
    Periodic,
}

impl FromStr for BcMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(BcMode::Box),
            "periodic" => Ok(BcMode::Periodic),
            other => Err(Error::Config(format!("unknown boundary mode '{other}'"))),
        }
    }
}

impl fmt::Display for BcMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BcMode::Box => "box",
            BcMode::Periodic => "periodic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    n: [usize; 3],
    len: [f64; 3],
    h: [f64; 3],
    bc: BcMode,
}

/// Cell-centered values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub data: Vec<f64>,
}

/// Face-centered components, one array per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub comps: Vec<Vec<f64>>,
}

#[inline]
pub(crate) fn lin(shape: &[usize; 3], i: usize, j: usize, k: usize) -> usize {
    i + shape[0] * (j + shape[1] * k)
}

impl Grid {
    pub fn new(dim: usize, n: [usize; 3], len: [f64; 3], bc: BcMode) -> Result<Grid> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}")));
        }
        let mut n = n;
        let mut len = len;
        if dim == 2 {
            n[2] = 1;
            len[2] = 1.0;
        }
        for a in 0..dim {
            if n[a] < 4 {
                return Err(Error::InvalidParameter(format!("need at least 4 cells per axis, got {}", n[a])));
            }
            if !(len[a] > 0.0) || !len[a].is_finite() {
                return Err(Error::InvalidParameter(format!("domain length must be positive, got {}", len[a])));
            }
        }
        let h = [len[0] / n[0] as f64, len[1] / n[1] as f64, len[2] / n[2] as f64];
        Ok(Grid { dim, n, len, h, bc })
    }

    pub fn new_2d(nx: usize, ny: usize, lx: f64, ly: f64, bc: BcMode) -> Result<Grid> {
        Grid::new(2, [nx, ny, 1], [lx, ly, 1.0], bc)
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize, bc: BcMode) -> Result<Grid> {
        Grid::new_2d(n, n, 1.0, 1.0, bc)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> [usize; 3] {
        self.n
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.len
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.h
    }

    pub fn bc(&self) -> BcMode {
        self.bc
    }

    pub fn cell_count(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Cell volume (area in 2D).
    pub fn cell_volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    pub fn domain_volume(&self) -> f64 {
        self.len[..self.dim].iter().product()
    }

    pub fn face_shape(&self, axis: usize) -> [usize; 3] {
        let mut s = self.n;
        if self.bc == BcMode::Box {
            s[axis] += 1;
        }
        s
    }

    pub fn face_count(&self, axis: usize) -> usize {
        self.face_shape(axis).iter().product()
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let mut x = [
            (i as f64 + 0.5) * self.h[0],
            (j as f64 + 0.5) * self.h[1],
            (k as f64 + 0.5) * self.h[2],
        ];
        if self.dim == 2 {
            x[2] = 0.0;
        }
        x
    }

    /// Center of face `(i, j, k)` of the `axis` face array.
    pub fn face_center(&self, axis: usize, i: usize, j: usize, k: usize) -> [f64; 3] {
        let mut x = self.cell_center(i, j, k);
        let idx = [i, j, k][axis];
        x[axis] = idx as f64 * self.h[axis];
        x
    }

    pub fn zeros(&self) -> ScalarField {
        ScalarField { data: vec![0.0; self.cell_count()] }
    }

    pub fn constant(&self, v: f64) -> ScalarField {
        ScalarField { data: vec![v; self.cell_count()] }
    }

    pub fn zeros_vector(&self) -> VectorField {
        VectorField { comps: (0..self.dim).map(|a| vec![0.0; self.face_count(a)]).collect() }
    }

    /// Samples `f` at cell centers.
    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> ScalarField {
        let mut data = Vec::with_capacity(self.cell_count());
        for k in 0..self.n[2] {
            for j in 0..self.n[1] {
                for i in 0..self.n[0] {
                    data.push(f(self.cell_center(i, j, k)));
                }
            }
        }
        ScalarField { data }
    }

    /// Samples component `a` of `f` at the centers of the `a`-faces. Box-mode
    /// wall faces are set to zero.
    pub fn sample_vector<F: Fn([f64; 3]) -> [f64; 3]>(&self, f: F) -> VectorField {
        let mut comps = Vec::with_capacity(self.dim);
        for a in 0..self.dim {
            let s = self.face_shape(a);
            let mut v = Vec::with_capacity(self.face_count(a));
            for k in 0..s[2] {
                for j in 0..s[1] {
                    for i in 0..s[0] {
                        let idx = [i, j, k][a];
                        if self.bc == BcMode::Box && (idx == 0 || idx == self.n[a]) {
                            v.push(0.0);
                        } else {
                            v.push(f(self.face_center(a, i, j, k))[a]);
                        }
                    }
                }
            }
            comps.push(v);
        }
        VectorField { comps }
    }

    pub fn check_scalar(&self, s: &ScalarField) -> Result<()> {
        if s.data.len() != self.cell_count() {
            return Err(Error::SizeMismatch { expected: self.cell_count(), got: s.data.len() });
        }
        Ok(())
    }

    pub fn check_vector(&self, v: &VectorField) -> Result<()> {
        if v.comps.len() != self.dim {
            return Err(Error::SizeMismatch { expected: self.dim, got: v.comps.len() });
        }
        for (a, c) in v.comps.iter().enumerate() {
            if c.len() != self.face_count(a) {
                return Err(Error::SizeMismatch { expected: self.face_count(a), got: c.len() });
            }
        }
        Ok(())
    }

    /// `(left, right)` cell indices along `axis` for face index `f`, `None`
    /// for box-mode wall faces.
    #[inline]
    pub(crate) fn face_cells(&self, axis: usize, f: usize) -> Option<(usize, usize)> {
        let n = self.n[axis];
        match self.bc {
            BcMode::Box => {
                if f == 0 || f == n {
                    None
                } else {
                    Some((f - 1, f))
                }
            }
            BcMode::Periodic => Some(((f + n - 1) % n, f)),
        }
    }

    /// `(left, right)` face indices along `axis` bounding cell `c`.
    #[inline]
    pub(crate) fn cell_faces(&self, axis: usize, c: usize) -> (usize, usize) {
        match self.bc {
            BcMode::Box => (c, c + 1),
            BcMode::Periodic => (c, (c + 1) % self.n[axis]),
        }
    }

    /// ∫ a b over the domain, midpoint rule.
    pub fn inner_cells(&self, a: &ScalarField, b: &ScalarField) -> f64 {
        self.cell_volume() * a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum::<f64>()
    }

    /// Discrete L2 inner product of face fields.
    pub fn inner_faces(&self, u: &VectorField, v: &VectorField) -> f64 {
        let vol = self.cell_volume();
        u.comps
            .iter()
            .zip(&v.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum::<f64>()
            * vol
    }

    pub fn l2_norm_faces(&self, u: &VectorField) -> f64 {
        self.inner_faces(u, u).sqrt()
    }

    pub fn integrate(&self, s: &ScalarField) -> f64 {
        self.cell_volume() * s.data.iter().sum::<f64>()
    }

    pub fn mean(&self, s: &ScalarField) -> f64 {
        s.data.iter().sum::<f64>() / s.data.len() as f64
    }
}

impl ScalarField {
    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &ScalarField) -> ScalarField {
        ScalarField { data: self.data.iter().zip(&other.data).map(|(x, y)| x + alpha * y).collect() }
    }

    pub fn scale(&self, alpha: f64) -> ScalarField {
        ScalarField { data: self.data.iter().map(|x| alpha * x).collect() }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> ScalarField {
        ScalarField { data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

impl VectorField {
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn component_max_abs(&self, axis: usize) -> f64 {
        self.comps[axis].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
    }

    pub fn axpy(&self, alpha: f64, other: &VectorField) -> VectorField {
        VectorField {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + alpha * y).collect())
                .collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> VectorField {
        VectorField { comps: self.comps.iter().map(|a| a.iter().map(|x| alpha * x).collect()).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_limits() {
        assert!(Grid::new_2d(3, 8, 1.0, 1.0, BcMode::Box).is_err());
        assert!(Grid::new_2d(8, 8, 0.0, 1.0, BcMode::Box).is_err());
        assert!(Grid::new(4, [8, 8, 8], [1.0; 3], BcMode::Box).is_err());
        let g = Grid::new_2d(8, 16, 2.0, 1.0, BcMode::Box).unwrap();
        assert_eq!(g.spacing(), [0.25, 1.0 / 16.0, 1.0]);
        assert_eq!(g.face_shape(0), [9, 16, 1]);
        assert_eq!(g.face_shape(1), [8, 17, 1]);
        assert!((g.cell_volume() - 0.25 / 16.0).abs() < 1e-16);
        let p = Grid::new_2d(8, 16, 2.0, 1.0, BcMode::Periodic).unwrap();
        assert_eq!(p.face_shape(0), [8, 16, 1]);
    }

    #[test]
    fn size_checks() {
        let g = Grid::unit_square(8, BcMode::Box).unwrap();
        assert!(g.check_scalar(&ScalarField { data: vec![0.0; 63] }).is_err());
        let mut v = g.zeros_vector();
        v.comps[1].pop();
        assert!(g.check_vector(&v).is_err());
    }

    #[test]
    fn sample_vector_zeroes_walls() {
        let g = Grid::unit_square(6, BcMode::Box).unwrap();
        let v = g.sample_vector(|_| [1.0, 2.0, 0.0]);
        let s = g.face_shape(0);
        for j in 0..s[1] {
            assert_eq!(v.comps[0][lin(&s, 0, j, 0)], 0.0);
            assert_eq!(v.comps[0][lin(&s, 6, j, 0)], 0.0);
            assert_eq!(v.comps[0][lin(&s, 3, j, 0)], 1.0);
        }
    }
}
