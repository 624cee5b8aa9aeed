//! Elliptic solves. Box mode uses the separable fast solvers, periodic mode
//! conjugate gradients. Either way the result is checked against the
//! residual contract before it is returned.

use super::cg::conjugate_gradient;
use super::spectral::{solve_separable, Basis};
use super::{lin, BcMode, Grid, ScalarField, VectorField};
use crate::error::{Error, Result};

const CG_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// Residual infinity norm relative to the right-hand side.
    pub relative_residual: f64,
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

impl Grid {
    /// Solves the Neumann (or periodic) Poisson problem `Δφ = rhs` with
    /// mean-free `φ`. The right-hand side must be compatible (zero mean up to
    /// `1e-10 * max|rhs|`); the residual is measured against its mean-free
    /// part.
    pub fn poisson_neumann_solve(&self, rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
        self.poisson_neumann_solve_with_report(rhs, tol).map(|(x, _)| x)
    }

    pub fn poisson_neumann_solve_with_report(
        &self,
        rhs: &ScalarField,
        tol: f64,
    ) -> Result<(ScalarField, SolveReport)> {
        self.check_scalar(rhs)?;
        check_tol(tol)?;
        let scale = rhs.max_abs();
        if scale == 0.0 {
            return Ok((self.zeros(), SolveReport::default()));
        }
        let mean = self.mean(rhs);
        if mean.abs() > 1e-10 * scale {
            return Err(Error::Compatibility { mean, scale });
        }
        let b: Vec<f64> = rhs.data.iter().map(|v| v - mean).collect();
        let mut x = b.clone();
        let mut iterations = 0;
        match self.bc() {
            BcMode::Box => {
                solve_separable(&mut x, self.cells(), self.dim(), [Basis::Cosine; 3], self.spacing(), 0.0, -1.0);
            }
            BcMode::Periodic => {
                x.iter_mut().for_each(|v| *v = 0.0);
                let neg: Vec<f64> = b.iter().map(|v| -v).collect();
                let stats = conjugate_gradient(
                    |p, out| {
                        self.laplacian_into(p, out);
                        out.iter_mut().for_each(|v| *v = -*v);
                    },
                    &neg,
                    &mut x,
                    0.5 * tol * scale,
                    CG_MAX_ITER,
                    true,
                )?;
                iterations = stats.iterations;
            }
        }
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter_mut().for_each(|v| *v -= m);
        let mut lap = vec![0.0; x.len()];
        self.laplacian_into(&x, &mut lap);
        let res = lap.iter().zip(&b).fold(0.0f64, |r, (l, b)| r.max((l - b).abs())) / scale;
        if res > tol {
            return Err(Error::Solver { residual: res, iterations });
        }
        Ok((ScalarField { data: x }, SolveReport { iterations, relative_residual: res }))
    }

    /// Solves `(I - sigma Δ) x = rhs` for a cell-centered scalar with
    /// homogeneous Neumann (or periodic) boundaries.
    pub fn neumann_helmholtz_solve(&self, rhs: &ScalarField, sigma: f64, tol: f64) -> Result<(ScalarField, SolveReport)> {
        self.check_scalar(rhs)?;
        check_tol(tol)?;
        if !(sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("shift must be nonnegative, got {sigma}")));
        }
        let scale = rhs.max_abs();
        if sigma == 0.0 || scale == 0.0 {
            return Ok((rhs.clone(), SolveReport::default()));
        }
        let mut x = rhs.data.clone();
        let mut iterations = 0;
        let apply = |p: &[f64], out: &mut [f64]| {
            self.laplacian_into(p, out);
            for (o, v) in out.iter_mut().zip(p) {
                *o = v - sigma * *o;
            }
        };
        match self.bc() {
            BcMode::Box => {
                solve_separable(&mut x, self.cells(), self.dim(), [Basis::Cosine; 3], self.spacing(), 1.0, sigma);
            }
            BcMode::Periodic => {
                let stats = conjugate_gradient(apply, &rhs.data, &mut x, 0.5 * tol * scale, CG_MAX_ITER, false)?;
                iterations = stats.iterations;
            }
        }
        let mut ax = vec![0.0; x.len()];
        apply(&x, &mut ax);
        let res = ax.iter().zip(&rhs.data).fold(0.0f64, |r, (a, b)| r.max((a - b).abs())) / scale;
        if res > tol {
            return Err(Error::Solver { residual: res, iterations });
        }
        Ok((ScalarField { data: x }, SolveReport { iterations, relative_residual: res }))
    }

    /// Componentwise `(I - sigma Δ) w = rhs` with no-slip walls. Box-mode
    /// wall faces of the result are zero.
    pub fn helmholtz_dirichlet_solve(&self, rhs: &VectorField, sigma: f64, tol: f64) -> Result<VectorField> {
        self.helmholtz_dirichlet_solve_with_report(rhs, sigma, tol).map(|(w, _)| w)
    }

    pub fn helmholtz_dirichlet_solve_with_report(
        &self,
        rhs: &VectorField,
        sigma: f64,
        tol: f64,
    ) -> Result<(VectorField, SolveReport)> {
        self.check_vector(rhs)?;
        check_tol(tol)?;
        if !(sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("shift must be nonnegative, got {sigma}")));
        }
        if sigma == 0.0 {
            return Ok((rhs.clone(), SolveReport::default()));
        }
        let mut out = self.zeros_vector();
        let mut report = SolveReport::default();
        for a in 0..self.dim() {
            let b = &rhs.comps[a];
            let scale = max_abs(b);
            if scale == 0.0 {
                continue;
            }
            let apply = |p: &[f64], o: &mut [f64]| {
                self.face_laplacian_into(a, p, o);
                for (o, v) in o.iter_mut().zip(p) {
                    *o = v - sigma * *o;
                }
            };
            let x = &mut out.comps[a];
            match self.bc() {
                BcMode::Box => self.dirichlet_fast_solve(a, b, sigma, x),
                BcMode::Periodic => {
                    x.copy_from_slice(b);
                    let stats = conjugate_gradient(apply, b, x, 0.5 * tol * scale, CG_MAX_ITER, false)?;
                    report.iterations += stats.iterations;
                }
            }
            let mut ax = vec![0.0; x.len()];
            apply(x, &mut ax);
            let s = self.face_shape(a);
            let mut res: f64 = 0.0;
            for k in 0..s[2] {
                for j in 0..s[1] {
                    for i in 0..s[0] {
                        let idx = [i, j, k][a];
                        if self.bc() == BcMode::Box && (idx == 0 || idx == s[a] - 1) {
                            continue;
                        }
                        let f = lin(&s, i, j, k);
                        res = res.max((ax[f] - b[f]).abs());
                    }
                }
            }
            let rel = res / scale;
            if rel > tol {
                return Err(Error::Solver { residual: rel, iterations: report.iterations });
            }
            report.relative_residual = report.relative_residual.max(rel);
        }
        Ok((out, report))
    }

    fn dirichlet_fast_solve(&self, axis: usize, rhs: &[f64], sigma: f64, out: &mut [f64]) {
        let s = self.face_shape(axis);
        let mut inner = s;
        inner[axis] -= 2;
        let mut buf = vec![0.0; inner.iter().product()];
        let offset = |i: usize, j: usize, k: usize| {
            let mut p = [i, j, k];
            p[axis] += 1;
            lin(&s, p[0], p[1], p[2])
        };
        for k in 0..inner[2] {
            for j in 0..inner[1] {
                for i in 0..inner[0] {
                    buf[lin(&inner, i, j, k)] = rhs[offset(i, j, k)];
                }
            }
        }
        let mut bases = [Basis::SineCell; 3];
        bases[axis] = Basis::SineNode;
        solve_separable(&mut buf, inner, self.dim(), bases, self.spacing(), 1.0, sigma);
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..inner[2] {
            for j in 0..inner[1] {
                for i in 0..inner[0] {
                    out[offset(i, j, k)] = buf[lin(&inner, i, j, k)];
                }
            }
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grids() -> Vec<Grid> {
        vec![
            Grid::new_2d(16, 16, 1.0, 1.0, BcMode::Box).unwrap(),
            Grid::new_2d(12, 10, 1.5, 1.0, BcMode::Periodic).unwrap(),
            Grid::new(3, [6, 5, 7], [1.0, 0.8, 1.2], BcMode::Box).unwrap(),
            Grid::new(3, [6, 5, 4], [1.0, 0.8, 1.2], BcMode::Periodic).unwrap(),
        ]
    }

    fn random_mean_free(g: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
        let mut s = ScalarField { data: (0..g.cell_count()).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let m = g.mean(&s);
        s.data.iter_mut().for_each(|v| *v -= m);
        s
    }

    #[test]
    fn poisson_zero_rhs() {
        for g in grids() {
            assert_eq!(g.poisson_neumann_solve(&g.zeros(), 1e-10).unwrap(), g.zeros());
        }
    }

    #[test]
    fn poisson_rejects_incompatible_rhs() {
        let g = Grid::unit_square(8, BcMode::Box).unwrap();
        let err = g.poisson_neumann_solve(&g.constant(1.0), 1e-10).unwrap_err();
        assert!(matches!(err, Error::Compatibility { .. }));
    }

    #[test]
    fn poisson_cosine_eigenmode() {
        let n = 16;
        let g = Grid::unit_square(n, BcMode::Box).unwrap();
        let rhs = g.sample(|x| (PI * x[0]).cos());
        let h = 1.0 / n as f64;
        let lam = (2.0 - 2.0 * (PI * h).cos()) / (h * h);
        let phi = g.poisson_neumann_solve(&rhs, 1e-12).unwrap();
        let expected = rhs.scale(-1.0 / lam);
        assert!(phi.axpy(-1.0, &expected).max_abs() < 1e-13);
    }

    #[test]
    fn poisson_random_residual_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in grids() {
            let rhs = random_mean_free(&g, &mut rng);
            let tol = 1e-10;
            let phi = g.poisson_neumann_solve(&rhs, tol).unwrap();
            assert!(g.mean(&phi).abs() < 1e-12);
            let r = g.laplacian(&phi).unwrap().axpy(-1.0, &rhs).max_abs();
            assert!(r <= tol * rhs.max_abs(), "{r}");
        }
    }

    #[test]
    fn neumann_helmholtz_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for g in grids() {
            let rhs = random_mean_free(&g, &mut rng).map(|v| v + 2.0);
            let (x, rep) = g.neumann_helmholtz_solve(&rhs, 0.01, 1e-12).unwrap();
            assert!(rep.relative_residual <= 1e-12);
            // maximum principle of the resolvent
            assert!(x.max() <= rhs.max() + 1e-13 && x.min() >= rhs.min() - 1e-13);
        }
    }

    #[test]
    fn helmholtz_identity_at_zero_shift() {
        let g = Grid::unit_square(8, BcMode::Box).unwrap();
        let v = g.sample_vector(|x| [x[0], x[1] * x[1], 0.0]);
        assert_eq!(g.helmholtz_dirichlet_solve(&v, 0.0, 1e-10).unwrap(), v);
    }

    #[test]
    fn helmholtz_dirichlet_eigenmode() {
        let n = 16;
        let g = Grid::unit_square(n, BcMode::Box).unwrap();
        let rhs = g.sample_vector(|x| [(PI * x[0]).sin() * (PI * x[1]).sin(), 0.0, 0.0]);
        let h = 1.0 / n as f64;
        let lam = 2.0 * (2.0 - 2.0 * (PI * h).cos()) / (h * h);
        let sigma = 0.05;
        let w = g.helmholtz_dirichlet_solve(&rhs, sigma, 1e-12).unwrap();
        let expected = rhs.scale(1.0 / (1.0 + sigma * lam));
        assert!(w.axpy(-1.0, &expected).max_abs() < 1e-13);
    }

    #[test]
    fn helmholtz_is_contractive() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for g in grids() {
            let mut v = g.zeros_vector();
            for a in 0..g.dim() {
                g.for_each_face(a, |f, _, nb| {
                    if nb.is_some() {
                        v.comps[a][f] = rng.random_range(-1.0..1.0);
                    }
                });
            }
            for sigma in [1e-3, 0.1, 1.0] {
                let (w, rep) = g.helmholtz_dirichlet_solve_with_report(&v, sigma, 1e-11).unwrap();
                assert!(rep.relative_residual <= 1e-11);
                assert!(g.l2_norm_faces(&w) <= g.l2_norm_faces(&v));
                let r = w.axpy(-sigma, &g.vector_laplacian(&w).unwrap()).axpy(-1.0, &v).max_abs();
                assert!(r <= 1e-10, "{r}");
            }
        }
    }
}
