//! Energy components, dissipation terms, space-time accumulators, the energy
//! budget audit and weak-form residuals.

mod budget;
mod weak;

use std::io::Write;

pub use budget::{energy_budget_check, BudgetReport};
pub use weak::{weak_residual, Equation, TestFunction, WeakResidual};

use crate::error::Result;
use crate::fluid::enstrophy;
use crate::grid::{BcMode, Grid, ScalarField};
use crate::model::ModelParams;
use crate::transport::State;

pub const ACCUMULATORS: usize = 7;

pub const CSV_HEADER: &str = "t,mass,c_max,c_min,n_max,entropy,psi_energy,kinetic,combined_energy,\
d1,d2,d3,d4,A1,A2,A3,A4,A5,A6,A7,floored_cells";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagnosticsOptions {
    /// Exponent of the `∫(n+ε)^p` accumulator; `(3m+2)/3` when `None`.
    pub a2_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub c_max: f64,
    pub c_min: f64,
    pub n_max: f64,
    pub n_min: f64,
    /// ∫ n ln n
    pub entropy: f64,
    /// ½ ∫ |∇Ψ(c)|²
    pub psi_energy: f64,
    /// K ∫ |u|²
    pub kinetic: f64,
    pub combined_energy: f64,
    /// ∫ (n+ε)^(m-2) |∇n|²
    pub d1: f64,
    /// ∫ |D²c|² / c
    pub d2: f64,
    /// ∫ |∇c|⁴ / c³
    pub d3: f64,
    /// ∫ |∇u|²
    pub d4: f64,
    /// Space-time integrals A1..A7.
    pub accumulators: [f64; ACCUMULATORS],
    /// Instantaneous integrands of the accumulators at `t`.
    pub rates: [f64; ACCUMULATORS],
    /// `(a d1 + d2 + d3 + d4) / (2K)`, the dissipation of the energy budget.
    pub budget_dissipation: f64,
    pub floored_cells: usize,
}

impl DiagnosticsRecord {
    pub fn dissipation(&self) -> [f64; 4] {
        [self.d1, self.d2, self.d3, self.d4]
    }

    pub fn csv_row(&self) -> String {
        let mut fields: Vec<f64> = vec![
            self.t,
            self.mass,
            self.c_max,
            self.c_min,
            self.n_max,
            self.entropy,
            self.psi_energy,
            self.kinetic,
            self.combined_energy,
            self.d1,
            self.d2,
            self.d3,
            self.d4,
        ];
        fields.extend_from_slice(&self.accumulators);
        let mut row: Vec<String> = fields.iter().map(|v| format!("{v:.16e}")).collect();
        row.push(self.floored_cells.to_string());
        row.join(",")
    }
}

pub fn write_csv<W: Write>(w: &mut W, records: &[DiagnosticsRecord]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn evaluate(
    grid: &Grid,
    state: &State,
    params: &ModelParams,
    prev: Option<&DiagnosticsRecord>,
) -> Result<DiagnosticsRecord> {
    evaluate_with(grid, state, params, prev, &DiagnosticsOptions::default())
}

/// Midpoint quadrature of every monitored functional. Singular denominators
/// use `max(c, c_floor)`; the number of cells where that mattered is
/// reported.
pub fn evaluate_with(
    grid: &Grid,
    state: &State,
    params: &ModelParams,
    prev: Option<&DiagnosticsRecord>,
    opts: &DiagnosticsOptions,
) -> Result<DiagnosticsRecord> {
    grid.check_scalar(&state.n)?;
    grid.check_scalar(&state.c)?;
    grid.check_vector(&state.u)?;
    let vol = grid.cell_volume();
    let n = &state.n;
    let c = &state.c;
    let floor = params.c_floor;
    let eps = params.eps;
    let m = params.m;

    let mass = grid.integrate(n);
    let entropy = vol * n.data.iter().map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 }).sum::<f64>();
    let floored_cells = c.data.iter().filter(|&&v| v < floor).count();

    let mut psi2 = 0.0;
    let mut d1 = 0.0;
    let mut a1_rate = 0.0;
    let h = grid.spacing();
    let half_m = 0.5 * m;
    for a in 0..grid.dim() {
        let inv_h = 1.0 / h[a];
        grid.for_each_face(a, |_, _, nb| {
            if let Some((l, r)) = nb {
                let cf = (0.5 * (c.data[l] + c.data[r])).max(floor);
                let dpsi = params.kinetics.potential_prime(cf) * (c.data[r] - c.data[l]) * inv_h;
                psi2 += dpsi * dpsi;
                let nf = 0.5 * (n.data[l] + n.data[r]);
                let dn = (n.data[r] - n.data[l]) * inv_h;
                d1 += (nf.max(0.0) + eps).powf(m - 2.0) * dn * dn;
                let dp = (n.data[r].max(0.0).powf(half_m) - n.data[l].max(0.0).powf(half_m)) * inv_h;
                a1_rate += dp * dp;
            }
        });
    }
    let psi_energy = 0.5 * vol * psi2;
    d1 *= vol;
    a1_rate *= vol;

    let (d2, d3) = hessian_terms(grid, c, floor);
    let d4 = enstrophy(grid, &state.u)?;

    let p = opts.a2_exponent.unwrap_or((3.0 * m + 2.0) / 3.0);
    let a2_rate = vol * n.data.iter().map(|&v| (v.max(0.0) + eps).powf(p)).sum::<f64>();
    let [ux, uy, uz] = grid.cell_average(&state.u)?;
    let a3_rate = vol
        * (0..grid.cell_count())
            .map(|i| {
                let s = ux.data[i] * ux.data[i] + uy.data[i] * uy.data[i] + uz.data[i] * uz.data[i];
                s.powf(5.0 / 3.0)
            })
            .sum::<f64>();
    let rates = [a1_rate, a2_rate, a3_rate, d1, d2, d3, d4];
    let mut accumulators = [0.0; ACCUMULATORS];
    if let Some(prev) = prev {
        let dt = state.t - prev.t;
        for i in 0..ACCUMULATORS {
            accumulators[i] = prev.accumulators[i] + 0.5 * dt * (prev.rates[i] + rates[i]);
        }
    }

    let kinetic = params.energy_weight * grid.inner_faces(&state.u, &state.u);
    let k2 = 2.0 * params.energy_weight;
    Ok(DiagnosticsRecord {
        t: state.t,
        mass,
        c_max: c.max(),
        c_min: c.min(),
        n_max: n.max(),
        n_min: n.min(),
        entropy,
        psi_energy,
        kinetic,
        combined_energy: entropy + psi_energy + kinetic,
        d1,
        d2,
        d3,
        d4,
        accumulators,
        rates,
        budget_dissipation: (params.diff_coeff * d1 + d2 + d3 + d4) / k2,
        floored_cells,
    })
}

/// `(∫|D²c|²/c, ∫|∇c|⁴/c³)` from centered differences with mirrored
/// (Neumann) or wrapped (periodic) neighbors.
fn hessian_terms(grid: &Grid, c: &ScalarField, floor: f64) -> (f64, f64) {
    let cs = grid.cells();
    let h = grid.spacing();
    let dim = grid.dim();
    let periodic = grid.bc() == BcMode::Periodic;
    let shift = |p: usize, d: isize, n: usize| -> usize {
        let q = p as isize + d;
        if periodic {
            q.rem_euclid(n as isize) as usize
        } else {
            q.clamp(0, n as isize - 1) as usize
        }
    };
    let at = |p: [usize; 3]| p[0] + cs[0] * (p[1] + cs[1] * p[2]);
    let value = |p: [usize; 3], da: usize, sa: isize, db: usize, sb: isize| {
        let mut q = p;
        q[da] = shift(q[da], sa, cs[da]);
        q[db] = shift(q[db], sb, cs[db]);
        c.data[at(q)]
    };
    let mut d2 = 0.0;
    let mut d3 = 0.0;
    for k in 0..cs[2] {
        for j in 0..cs[1] {
            for i in 0..cs[0] {
                let p = [i, j, k];
                let v = c.data[at(p)];
                let cc = v.max(floor);
                let mut hess = 0.0;
                let mut grad2 = 0.0;
                for a in 0..dim {
                    let plus = value(p, a, 1, a, 0);
                    let minus = value(p, a, -1, a, 0);
                    let caa = (plus - 2.0 * v + minus) / (h[a] * h[a]);
                    hess += caa * caa;
                    let ca = (plus - minus) / (2.0 * h[a]);
                    grad2 += ca * ca;
                    for b in a + 1..dim {
                        let cab = (value(p, a, 1, b, 1) - value(p, a, 1, b, -1) - value(p, a, -1, b, 1)
                            + value(p, a, -1, b, -1))
                            / (4.0 * h[a] * h[b]);
                        hess += 2.0 * cab * cab;
                    }
                }
                d2 += hess / cc;
                d3 += grad2 * grad2 / (cc * cc * cc);
            }
        }
    }
    let vol = grid.cell_volume();
    (d2 * vol, d3 * vol)
}
