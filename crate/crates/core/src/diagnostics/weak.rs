//! Defects of the three integral identities of the weak formulation along a
//! computed trajectory.
//!
//! With a test function `φ` vanishing at late times, each identity reads
//! `-∫∫ q φ_t - ∫ q(0) φ(0) = ∫∫ R(q)·φ` in weak form. The time derivative is
//! moved onto the data by forward differences of `φ`, space integrals use
//! cell or face quadrature with exact derivatives of `φ`. Coefficients are the
//! regularized ones, and the convecting velocity of the momentum identity is
//! the smoothed one actually used by the scheme.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fluid::yosida_smooth;
use crate::grid::{Grid, VectorField};
use crate::model::{saturated_mobility, saturation_unchecked, ModelParams};
use crate::transport::State;

const UNIFORM_TOL: f64 = 1e-9;
const PROJECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    Density,
    Oxygen,
    Momentum,
}

/// Space-time test functions. All carry the cutoff `θ(t) = (1 - t/T)^4` for
/// `t < T` and 0 afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    Zero,
    /// `θ(t) Π cos(k_a π x_a / L_a)` for the scalar identities.
    Cosine { modes: [usize; 3], cutoff: f64 },
    /// Curl of the stream function
    /// `θ(t) Π sin⁴(π x_a / L_a) cos(k_a π x_a / L_a)`: solenoidal and
    /// vanishing on the walls, for the momentum identity. On faces it is
    /// taken as the discrete curl of nodal stream values, which is discretely
    /// divergence-free so the pressure drops out.
    Solenoidal { modes: [usize; 3], cutoff: f64 },
}

impl TestFunction {
    fn cutoff(&self) -> Option<f64> {
        match *self {
            TestFunction::Zero => None,
            TestFunction::Cosine { cutoff, .. } | TestFunction::Solenoidal { cutoff, .. } => Some(cutoff),
        }
    }

    fn theta(&self, t: f64) -> f64 {
        match self.cutoff() {
            None => 0.0,
            Some(tc) if t < tc => (1.0 - t / tc).powi(4),
            Some(_) => 0.0,
        }
    }
}

fn scalar_value(modes: [usize; 3], grid: &Grid, x: [f64; 3]) -> f64 {
    let l = grid.lengths();
    (0..grid.dim()).map(|a| (modes[a] as f64 * PI / l[a] * x[a]).cos()).product()
}

fn scalar_derivative(modes: [usize; 3], grid: &Grid, x: [f64; 3], axis: usize) -> f64 {
    let l = grid.lengths();
    (0..grid.dim())
        .map(|a| {
            let w = modes[a] as f64 * PI / l[a];
            if a == axis {
                -w * (w * x[a]).sin()
            } else {
                (w * x[a]).cos()
            }
        })
        .product()
}

/// sin⁴(wx) cos(kwx) and its first two derivatives.
fn quartic(w: f64, k: usize, x: f64) -> [f64; 3] {
    let (s, c) = (w * x).sin_cos();
    let q = [s.powi(4), 4.0 * w * s.powi(3) * c, 4.0 * w * w * (3.0 * s * s * c * c - s.powi(4))];
    let kw = k as f64 * w;
    let (sk, ck) = (kw * x).sin_cos();
    let m = [ck, -kw * sk, -kw * kw * ck];
    [q[0] * m[0], q[1] * m[0] + q[0] * m[1], q[2] * m[0] + 2.0 * q[1] * m[1] + q[0] * m[2]]
}

/// Spatial stream function: value, gradient, Hessian.
fn stream(grid: &Grid, modes: [usize; 3], x: [f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    let l = grid.lengths();
    let dim = grid.dim();
    let q: Vec<[f64; 3]> = (0..dim).map(|a| quartic(PI / l[a], modes[a], x[a])).collect();
    let prod = |orders: [usize; 3]| (0..dim).map(|a| q[a][orders[a]]).product::<f64>();
    let value = prod([0; 3]);
    let mut grad = [0.0; 3];
    let mut hess = [[0.0; 3]; 3];
    for a in 0..dim {
        let mut o = [0; 3];
        o[a] = 1;
        grad[a] = prod(o);
        for b in 0..dim {
            let mut o = [0; 3];
            o[a] += 1;
            o[b] += 1;
            hess[a][b] = prod(o);
        }
    }
    (value, grad, hess)
}

/// Discrete curl `(D_y S, -D_x S, 0)` of the spatial stream function on faces.
fn solenoidal_faces(grid: &Grid, modes: [usize; 3]) -> VectorField {
    let h = grid.spacing();
    let mut out = grid.zeros_vector();
    for (a, b, sign) in [(0usize, 1usize, 1.0), (1, 0, -1.0)] {
        let s = grid.face_shape(a);
        for k in 0..s[2] {
            for j in 0..s[1] {
                for i in 0..s[0] {
                    let x = grid.face_center(a, i, j, k);
                    let mut hi = x;
                    let mut lo = x;
                    hi[b] += 0.5 * h[b];
                    lo[b] -= 0.5 * h[b];
                    let d = (stream(grid, modes, hi).0 - stream(grid, modes, lo).0) / h[b];
                    out.comps[a][i + s[0] * (j + s[1] * k)] = sign * d;
                }
            }
        }
    }
    out
}

/// Streaming accumulator of one weak-form defect. States are pushed in time
/// order at the uniform spacing `dt`.
pub struct WeakResidual<'a> {
    grid: &'a Grid,
    params: ModelParams,
    test: TestFunction,
    eq: Equation,
    dt: f64,
    sum: f64,
    last_t: Option<f64>,
    psi_faces: Option<VectorField>,
}

impl<'a> WeakResidual<'a> {
    pub fn new(grid: &'a Grid, params: &ModelParams, test: TestFunction, eq: Equation, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Sampling(format!("time step must be positive, got {dt}")));
        }
        match (test, eq) {
            (TestFunction::Cosine { .. }, Equation::Momentum) => {
                return Err(Error::TestSupport("momentum identity needs a solenoidal test function".into()));
            }
            (TestFunction::Solenoidal { .. }, Equation::Density | Equation::Oxygen) => {
                return Err(Error::TestSupport("scalar identities need a scalar test function".into()));
            }
            (TestFunction::Cosine { modes, .. }, _) if modes[grid.dim()..].iter().any(|&k| k != 0) => {
                return Err(Error::TestSupport("test modes along absent axes".into()));
            }
            _ => {}
        }
        if let Some(tc) = test.cutoff() {
            if !(tc > 0.0) {
                return Err(Error::TestSupport(format!("cutoff time must be positive, got {tc}")));
            }
        }
        let psi_faces = match test {
            TestFunction::Solenoidal { modes, .. } => Some(solenoidal_faces(grid, modes)),
            _ => None,
        };
        Ok(WeakResidual { grid, params: params.clone(), test, eq, dt, sum: 0.0, last_t: None, psi_faces })
    }

    pub fn push(&mut self, state: &State) -> Result<()> {
        let first = match self.last_t {
            None => true,
            Some(t) => {
                if ((state.t - t) - self.dt).abs() > UNIFORM_TOL * self.dt.max(state.t.abs()) {
                    return Err(Error::Sampling(format!("state at t = {} does not follow t = {t} by dt = {}", state.t, self.dt)));
                }
                false
            }
        };
        self.last_t = Some(state.t);
        if self.test == TestFunction::Zero {
            return Ok(());
        }
        let th0 = self.test.theta(state.t);
        let th1 = self.test.theta(state.t + self.dt);
        if th0 == 0.0 && th1 == 0.0 {
            return Ok(());
        }
        // -<q^k, φ^{k+1} - φ^k> (- <q^0, φ^0> at the start) - dt ∫ R(q^k)·φ^k
        let pairing = self.pairing(state)?;
        let mut term = -(th1 - th0) * pairing;
        if first {
            term -= th0 * pairing;
        }
        if th0 != 0.0 {
            term -= self.dt * th0 * self.weak_rhs(state)?;
        }
        self.sum += term;
        Ok(())
    }

    /// Absolute defect. Fails if the test function has not vanished by the
    /// last pushed state.
    pub fn finish(self) -> Result<f64> {
        let last = self.last_t.ok_or_else(|| Error::Sampling("empty trajectory".into()))?;
        if let Some(tc) = self.test.cutoff() {
            if tc > last {
                return Err(Error::TestSupport(format!("test function cutoff {tc} beyond the final time {last}")));
            }
        }
        Ok(self.sum.abs())
    }

    /// `∫ q φ(·)` at θ = 1.
    fn pairing(&self, state: &State) -> Result<f64> {
        let g = self.grid;
        match (self.test, self.eq) {
            (TestFunction::Cosine { modes, .. }, eq) => {
                let q = if eq == Equation::Density { &state.n } else { &state.c };
                g.check_scalar(q)?;
                let cs = g.cells();
                let mut s = 0.0;
                for k in 0..cs[2] {
                    for j in 0..cs[1] {
                        for i in 0..cs[0] {
                            let idx = i + cs[0] * (j + cs[1] * k);
                            s += q.data[idx] * scalar_value(modes, g, g.cell_center(i, j, k));
                        }
                    }
                }
                Ok(s * g.cell_volume())
            }
            (TestFunction::Solenoidal { .. }, _) => {
                g.check_vector(&state.u)?;
                Ok(g.inner_faces(&state.u, self.psi_faces.as_ref().expect("faces built with the test")))
            }
            (TestFunction::Zero, _) => Ok(0.0),
        }
    }

    /// `∫ R(q)·φ` in weak form at θ = 1.
    fn weak_rhs(&self, state: &State) -> Result<f64> {
        match self.test {
            TestFunction::Cosine { modes, .. } => self.scalar_rhs(state, modes),
            TestFunction::Solenoidal { modes, .. } => self.momentum_rhs(state, modes),
            TestFunction::Zero => Ok(0.0),
        }
    }

    fn scalar_rhs(&self, state: &State, modes: [usize; 3]) -> Result<f64> {
        let g = self.grid;
        let p = &self.params;
        let (n, c) = (&state.n, &state.c);
        g.check_scalar(n)?;
        g.check_scalar(c)?;
        g.check_vector(&state.u)?;
        let h = g.spacing();
        let mut faces = 0.0;
        for a in 0..g.dim() {
            let inv_h = 1.0 / h[a];
            let ua = &state.u.comps[a];
            g.for_each_face(a, |f, ijk, nb| {
                if let Some((l, r)) = nb {
                    let dphi = scalar_derivative(modes, g, g.face_center(a, ijk[0], ijk[1], ijk[2]), a);
                    let nf = 0.5 * (n.data[l] + n.data[r]);
                    let cf = 0.5 * (c.data[l] + c.data[r]);
                    let dn = (n.data[r] - n.data[l]) * inv_h;
                    let dc = (c.data[r] - c.data[l]) * inv_h;
                    let flux = match self.eq {
                        Equation::Density => {
                            nf * ua[f] + saturated_mobility(p.eps, nf.max(0.0)) * p.kinetics.chi(cf) * dc
                                - p.diffusivity(nf.max(0.0)) * dn
                        }
                        _ => cf * ua[f] - dc,
                    };
                    faces += flux * dphi;
                }
            });
        }
        let mut cells = 0.0;
        if self.eq == Equation::Oxygen {
            let cs = g.cells();
            for k in 0..cs[2] {
                for j in 0..cs[1] {
                    for i in 0..cs[0] {
                        let idx = i + cs[0] * (j + cs[1] * k);
                        let uptake = saturation_unchecked(p.eps, n.data[idx].max(0.0)) * p.kinetics.f(c.data[idx]);
                        cells -= uptake * scalar_value(modes, g, g.cell_center(i, j, k));
                    }
                }
            }
        }
        Ok((faces + cells) * g.cell_volume())
    }

    fn momentum_rhs(&self, state: &State, modes: [usize; 3]) -> Result<f64> {
        let g = self.grid;
        let p = &self.params;
        let psi = self.psi_faces.as_ref().expect("faces built with the test");
        let viscous = g.inner_faces(&state.u, &g.vector_laplacian(psi)?);
        let mut buoyancy = 0.0;
        for a in 0..g.dim() {
            if p.phi_grad[a] == 0.0 {
                continue;
            }
            g.for_each_face(a, |f, _, nb| {
                if let Some((l, r)) = nb {
                    buoyancy += p.phi_grad[a] * 0.5 * (state.n.data[l] + state.n.data[r]) * psi.comps[a][f];
                }
            });
        }
        buoyancy *= g.cell_volume();
        let mut convection = 0.0;
        if p.kappa != 0.0 && state.u.max_abs() > 0.0 {
            let v = yosida_smooth(g, &state.u, p.eps, PROJECTION_TOL)?;
            let uc = g.cell_average(&state.u)?;
            let vc = g.cell_average(&v)?;
            let cs = g.cells();
            for k in 0..cs[2] {
                for j in 0..cs[1] {
                    for i in 0..cs[0] {
                        let idx = i + cs[0] * (j + cs[1] * k);
                        let (_, _, hess) = stream(g, modes, g.cell_center(i, j, k));
                        // ψ = (∂_1 S, -∂_0 S, 0)
                        for b in 0..g.dim() {
                            let dpsi = [hess[b][1], -hess[b][0]];
                            convection += vc[b].data[idx] * (uc[0].data[idx] * dpsi[0] + uc[1].data[idx] * dpsi[1]);
                        }
                    }
                }
            }
            convection *= p.kappa * g.cell_volume();
        }
        Ok(viscous + buoyancy + convection)
    }
}

/// Weak-form defect of a whole trajectory sampled at a uniform step.
pub fn weak_residual(
    grid: &Grid,
    trajectory: &[State],
    params: &ModelParams,
    test: TestFunction,
    eq: Equation,
) -> Result<f64> {
    if trajectory.len() < 2 {
        return Err(Error::Sampling("trajectory needs at least two states".into()));
    }
    let dt = trajectory[1].t - trajectory[0].t;
    let mut acc = WeakResidual::new(grid, params, test, eq, dt)?;
    for s in trajectory {
        acc.push(s)?;
    }
    acc.finish()
}
