//! Cell density and oxygen updates: explicit conservative fluxes for `n`,
//! upwind advection plus implicit diffusion and consumption for `c`.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::model::{saturated_mobility, saturation_unchecked, ModelParams};

/// Default safety factor of [`cfl_dt`].
pub const CFL_SAFETY: f64 = 0.4;
/// Most negative density tolerated after an update before it is reported.
pub const NEGATIVITY_TOL: f64 = 1e-13;

/// Relative tolerance of the implicit diffusion solve for `c`.
const DIFFUSION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    /// Cell density at cell centers.
    pub n: ScalarField,
    /// Oxygen concentration at cell centers.
    pub c: ScalarField,
    /// Face-normal velocity.
    pub u: VectorField,
    pub p: ScalarField,
    pub t: f64,
}

impl State {
    pub fn new(grid: &Grid, n: ScalarField, c: ScalarField, u: VectorField) -> Result<State> {
        grid.check_scalar(&n)?;
        grid.check_scalar(&c)?;
        grid.check_vector(&u)?;
        Ok(State { n, c, u, p: grid.zeros(), t: 0.0 })
    }
}

/// Chemotactic drift `χ(c_face) ∂c` on every interior face.
fn drift(grid: &Grid, c: &ScalarField, params: &ModelParams) -> VectorField {
    let mut out = grid.zeros_vector();
    let h = grid.spacing();
    for a in 0..grid.dim() {
        let comp = &mut out.comps[a];
        grid.for_each_face(a, |f, _, nb| {
            if let Some((l, r)) = nb {
                let cf = 0.5 * (c.data[l] + c.data[r]);
                comp[f] = params.kinetics.chi(cf) * (c.data[r] - c.data[l]) / h[a];
            }
        });
    }
    out
}

/// Saturated chemotactic flux. The donor cell, picked by the sign of the
/// drift, supplies `n F'_ε(n) = n / (1 + ε n)`; box walls carry no flux.
pub fn chemotaxis_flux(grid: &Grid, n: &ScalarField, c: &ScalarField, params: &ModelParams) -> Result<VectorField> {
    grid.check_scalar(n)?;
    grid.check_scalar(c)?;
    let mut out = drift(grid, c, params);
    for a in 0..grid.dim() {
        let comp = &mut out.comps[a];
        grid.for_each_face(a, |f, _, nb| {
            if let Some((l, r)) = nb {
                let w = comp[f];
                let donor = if w > 0.0 { n.data[l] } else { n.data[r] };
                comp[f] = w * saturated_mobility(params.eps, donor);
            }
        });
    }
    Ok(out)
}

/// Degenerate diffusion flux `D_ε(n_face) ∂n` with `n_face` the mean of the
/// two neighbors; zero on box walls.
pub fn diffusive_flux_n(grid: &Grid, n: &ScalarField, params: &ModelParams) -> Result<VectorField> {
    grid.check_scalar(n)?;
    let mut out = grid.zeros_vector();
    let h = grid.spacing();
    for a in 0..grid.dim() {
        let comp = &mut out.comps[a];
        grid.for_each_face(a, |f, _, nb| {
            if let Some((l, r)) = nb {
                let nf = 0.5 * (n.data[l] + n.data[r]);
                comp[f] = params.diffusivity(nf) * ((n.data[r] - n.data[l]) * (1.0 / h[a]));
            }
        });
    }
    Ok(out)
}

fn apply_flux(grid: &Grid, n: &ScalarField, total: &VectorField, dt: f64) -> Result<ScalarField> {
    let div = grid.divergence(total)?;
    let out = n.axpy(-dt, &div);
    if let Some((cell, &value)) = out.data.iter().enumerate().find(|(_, v)| !(**v >= -NEGATIVITY_TOL)) {
        return Err(Error::Negativity { cell, value });
    }
    Ok(out)
}

/// Explicit conservative density update with advective, chemotactic and
/// diffusive fluxes. `dt` must not exceed the unscaled stability bound
/// (`cfl_dt` with safety 1).
pub fn update_n(grid: &Grid, state: &State, params: &ModelParams, dt: f64) -> Result<ScalarField> {
    let bound = cfl_dt_with_safety(grid, state, params, 1.0)?;
    if !(dt > 0.0) || dt > bound {
        return Err(Error::Cfl { dt, bound });
    }
    let adv = grid.upwind_flux(&state.n, &state.u)?;
    let chemo = chemotaxis_flux(grid, &state.n, &state.c, params)?;
    let diff = diffusive_flux_n(grid, &state.n, params)?;
    let mut total = adv;
    for a in 0..grid.dim() {
        for ((t, ch), d) in total.comps[a].iter_mut().zip(&chemo.comps[a]).zip(&diff.comps[a]) {
            *t = *t + *ch - *d;
        }
    }
    apply_flux(grid, &state.n, &total, dt)
}

/// Classical linear-diffusion update `n_t + u·∇n = a Δn - ∇·(n χ ∇c)` with
/// an upwinded unsaturated chemotactic flux. Reference path for checking
/// [`update_n`] in the `m = 1`, `ε = 0` limit.
pub fn update_n_linear(grid: &Grid, state: &State, params: &ModelParams, dt: f64) -> Result<ScalarField> {
    grid.check_scalar(&state.n)?;
    let h = grid.spacing();
    let n = &state.n;
    let c = &state.c;
    let mut total = grid.zeros_vector();
    for a in 0..grid.dim() {
        let ua = &state.u.comps[a];
        let comp = &mut total.comps[a];
        grid.for_each_face(a, |f, _, nb| {
            if let Some((l, r)) = nb {
                let v = ua[f];
                let adv = if v > 0.0 { v * n.data[l] } else { v * n.data[r] };
                let cf = 0.5 * (c.data[l] + c.data[r]);
                let w = params.kinetics.chi(cf) * (c.data[r] - c.data[l]) / h[a];
                let chemo = w * if w > 0.0 { n.data[l] } else { n.data[r] };
                let diff = params.diff_coeff * ((n.data[r] - n.data[l]) * (1.0 / h[a]));
                comp[f] = adv + chemo - diff;
            }
        });
    }
    apply_flux(grid, n, &total, dt)
}

/// Oxygen update: upwind advection, implicit Neumann diffusion, then the
/// implicit consumption factor `1 / (1 + dt F_ε(n) λ(c))`.
pub fn update_c(grid: &Grid, state: &State, params: &ModelParams, dt: f64) -> Result<ScalarField> {
    grid.check_scalar(&state.n)?;
    let c_max = state.c.max();
    let advected = grid.upwind_advect(&state.c, &state.u, dt)?;
    let (mut diffused, _) = grid.neumann_helmholtz_solve(&advected, dt, DIFFUSION_TOL)?;
    // both stages are monotone; only round-off can leave [0, c_max]
    let slack = 1e-10 * c_max.abs().max(f64::MIN_POSITIVE);
    for (cell, v) in diffused.data.iter_mut().enumerate() {
        if *v < -slack || *v > c_max + slack {
            return Err(Error::Invariant(format!("oxygen left [0, {c_max}] in cell {cell}: {v}")));
        }
        *v = v.clamp(0.0, c_max);
    }
    for (v, &nv) in diffused.data.iter_mut().zip(&state.n.data) {
        let rate = saturation_unchecked(params.eps, nv.max(0.0)) * params.kinetics.lambda(*v);
        *v /= 1.0 + dt * rate;
    }
    Ok(diffused)
}

/// Stable time step `safety * min(advective, diffusive, chemotactic)` with
/// `safety = 0.4`.
pub fn cfl_dt(grid: &Grid, state: &State, params: &ModelParams) -> Result<f64> {
    cfl_dt_with_safety(grid, state, params, CFL_SAFETY)
}

pub fn cfl_dt_with_safety(grid: &Grid, state: &State, params: &ModelParams, safety: f64) -> Result<f64> {
    grid.check_scalar(&state.n)?;
    grid.check_scalar(&state.c)?;
    grid.check_vector(&state.u)?;
    let h = grid.spacing();
    let advective = grid.advective_dt_bound(&state.u);
    let d_max = state.n.data.iter().map(|&v| params.diffusivity(v.max(0.0))).fold(0.0, f64::max);
    let inv_h2: f64 = (0..grid.dim()).map(|a| 1.0 / (h[a] * h[a])).sum();
    let diffusive = 1.0 / (2.0 * d_max * inv_h2);
    let w = drift(grid, &state.c, params);
    let mut chemotactic = f64::INFINITY;
    for a in 0..grid.dim() {
        let mut speed = 0.0f64;
        grid.for_each_face(a, |f, _, nb| {
            if let Some((l, r)) = nb {
                let wf = w.comps[a][f];
                let donor = if wf > 0.0 { state.n.data[l] } else { state.n.data[r] };
                speed = speed.max(wf.abs() / (1.0 + params.eps * donor.max(0.0)));
            }
        });
        chemotactic = chemotactic.min(h[a] / speed);
    }
    let dt = safety * advective.min(diffusive).min(chemotactic);
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("no positive stable time step ({dt})")));
    }
    Ok(dt)
}
