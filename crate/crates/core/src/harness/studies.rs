//! The ε-continuation study and the two sub-case convergence suites.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use super::config::RunConfig;
use super::run::{run, RunOutput};
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::grid::{BcMode, Grid, ScalarField};
use crate::model::{KineticsPreset, ModelParams};
use crate::reference::{Barenblatt, CosineMode, SeriesSolution};
use crate::transport::{cfl_dt, update_c, update_n, State};

/// Accumulators checked for ε-uniform bounds (A1, A2, A3).
pub const BOUNDED_ACCUMULATORS: [usize; 3] = [0, 1, 2];

#[derive(Debug, Clone, PartialEq)]
pub struct EpsStudy {
    pub eps: Vec<f64>,
    pub finals: Vec<DiagnosticsRecord>,
    /// `‖n_j − n_{j+1}‖_L1` for consecutive ε.
    pub dist_n: Vec<f64>,
    /// `‖c_j − c_{j+1}‖_L2`.
    pub dist_c: Vec<f64>,
    /// `‖u_j − u_{j+1}‖_L2`.
    pub dist_u: Vec<f64>,
    /// Largest value of each accumulator over the runs.
    pub sup_accumulators: Vec<f64>,
    /// Largest growth of max c between records of any member run.
    pub c_max_increase: f64,
    pub max_divergence: f64,
    pub bound_ratio: f64,
    pub bounded: bool,
    pub cauchy_trend: bool,
}

impl EpsStudy {
    pub fn passed(&self) -> bool {
        self.bounded && self.cauchy_trend
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "eps,mass,c_max,combined_energy,A1,A2,A3,A4,A5,A6,A7,dist_n_l1,dist_c_l2,dist_u_l2")?;
        for (j, (eps, r)) in self.eps.iter().zip(&self.finals).enumerate() {
            let mut row = vec![*eps, r.mass, r.c_max, r.combined_energy];
            row.extend_from_slice(&r.accumulators);
            let fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let dist = |d: &[f64]| d.get(j).map(|v| format!("{v:.16e}")).unwrap_or_default();
            writeln!(w, "{},{},{},{}", fields.join(","), dist(&self.dist_n), dist(&self.dist_c), dist(&self.dist_u))?;
        }
        Ok(())
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn non_increasing(d: &[f64]) -> bool {
    d.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300)
}

/// Runs `config` once per ε (in parallel) and compares the final fields of
/// consecutive members. The list must hold at least three values and be
/// non-increasing.
pub fn eps_study(config: &RunConfig, eps_list: &[f64], bound_ratio: f64, out: Option<&Path>) -> Result<EpsStudy> {
    if eps_list.len() < 3 {
        return Err(Error::Config(format!("eps study needs at least 3 values, got {}", eps_list.len())));
    }
    if eps_list.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Config("eps list must be non-increasing".into()));
    }
    if !(bound_ratio >= 1.0) {
        return Err(Error::Config(format!("bound ratio must be >= 1, got {bound_ratio}")));
    }
    config.validate()?;
    let runs: Vec<RunOutput> = eps_list
        .par_iter()
        .enumerate()
        .map(|(j, &eps)| {
            let mut c = config.clone();
            c.model.eps = eps;
            c.output.dir = None;
            c.output.snapshot_times.clear();
            let dir = out.map(|d| d.join(format!("eps_{j}")));
            run(&c, dir.as_deref())
        })
        .collect::<Result<_>>()?;

    let grid = &runs[0].grid;
    let mut dist_n = Vec::new();
    let mut dist_c = Vec::new();
    let mut dist_u = Vec::new();
    for w in runs.windows(2) {
        let (a, b) = (&w[0].state, &w[1].state);
        let dn = a.n.axpy(-1.0, &b.n);
        dist_n.push(grid.integrate(&dn.map(f64::abs)));
        let dc = a.c.axpy(-1.0, &b.c);
        dist_c.push(grid.inner_cells(&dc, &dc).sqrt());
        dist_u.push(grid.l2_norm_faces(&a.u.axpy(-1.0, &b.u)));
    }
    let finals: Vec<DiagnosticsRecord> = runs.iter().map(|r| r.records.last().expect("final record").clone()).collect();
    let sup_accumulators = (0..finals[0].accumulators.len())
        .map(|i| finals.iter().map(|r| r.accumulators[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let bounded = BOUNDED_ACCUMULATORS.iter().all(|&i| {
        let vals: Vec<f64> = finals.iter().map(|r| r.accumulators[i]).collect();
        let med = median(&vals);
        vals.iter().all(|&v| v <= bound_ratio * med && v * bound_ratio >= med)
    });
    let c_max_increase = runs
        .iter()
        .flat_map(|r| r.records.windows(2).map(|w| w[1].c_max - w[0].c_max))
        .fold(f64::NEG_INFINITY, f64::max);
    let max_divergence = runs.iter().map(|r| r.extremes.max_divergence).fold(0.0, f64::max);
    let cauchy_trend = non_increasing(&dist_n) && non_increasing(&dist_c) && non_increasing(&dist_u);
    let study = EpsStudy {
        eps: eps_list.to_vec(),
        finals,
        dist_n,
        dist_c,
        dist_u,
        sup_accumulators,
        c_max_increase,
        max_divergence,
        bound_ratio,
        bounded,
        cauchy_trend,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join("eps_study.csv"))?);
        study.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(study)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub h: f64,
    pub steps: usize,
    pub error: f64,
    /// Observed order against the previous row; `None` on the first row or
    /// when both errors vanish.
    pub order: Option<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub label: String,
    pub rows: Vec<ConvergenceRow>,
    pub min_order: f64,
}

impl ConvergenceTable {
    fn new(label: &str, min_order: f64, results: Vec<(usize, f64, usize, f64, f64)>) -> Self {
        let mut rows: Vec<ConvergenceRow> = Vec::new();
        for (cells, h, steps, error, mass) in results {
            let order = rows.last().and_then(|p| {
                if p.error == 0.0 && error == 0.0 {
                    None
                } else {
                    Some((p.error / error).ln() / (p.h / h).ln())
                }
            });
            rows.push(ConvergenceRow { cells, h, steps, error, order, mass });
        }
        ConvergenceTable { label: label.into(), rows, min_order }
    }

    /// Orders of every refinement, `None` entries being exact results.
    pub fn orders(&self) -> Vec<Option<f64>> {
        self.rows.iter().skip(1).map(|r| r.order).collect()
    }

    /// Errors that are zero to round-off count as converged.
    pub fn passed(&self) -> bool {
        let tiny = |e: f64| e <= 1e-13;
        self.rows.windows(2).all(|w| {
            let (p, r) = (&w[0], &w[1]);
            (tiny(p.error) && tiny(r.error)) || (r.error < p.error && r.order.is_some_and(|o| o >= self.min_order))
        })
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "case,cells,h,steps,error,order,mass")?;
        for r in &self.rows {
            let order = r.order.map(|o| format!("{o:.6}")).unwrap_or_default();
            writeln!(w, "{},{},{:.16e},{},{:.16e},{},{:.16e}", self.label, r.cells, r.h, r.steps, r.error, order, r.mass)?;
        }
        Ok(())
    }

    pub fn write_to_dir(&self, dir: &Path, file: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join(file))?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 3 {
        return Err(Error::Config(format!("need at least 3 grid sizes, got {}", sizes.len())));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("grid sizes must increase".into()));
    }
    Ok(())
}

/// Which sub-case of the heat suite to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatCase {
    /// Oxygen equation with no cells.
    Oxygen,
    /// Density equation with m = 1, a = 1 and no chemotaxis.
    Density,
}

/// Final time of the heat suite.
pub const MMS_FINAL_TIME: f64 = 0.05;
pub const MMS_MIN_ORDER: f64 = 1.8;

pub fn default_mms_modes() -> Vec<CosineMode> {
    vec![
        CosineMode { k: [0, 0, 0], amplitude: 1.0 },
        CosineMode { k: [1, 1, 0], amplitude: 0.5 },
    ]
}

fn heat_params() -> ModelParams {
    ModelParams {
        m: 1.0,
        diff_coeff: 1.0,
        kinetics: KineticsPreset::linear().with_chi_scale(0.0),
        phi_grad: [0.0; 3],
        ..ModelParams::default()
    }
}

/// Runs one heat sub-case on the unit square at each size with
/// `dt = 0.2 h²` and returns the L∞ error table at [`MMS_FINAL_TIME`].
pub fn mms_case(case: HeatCase, sizes: &[usize], modes: &[CosineMode]) -> Result<ConvergenceTable> {
    check_sizes(sizes)?;
    let params = heat_params();
    let series = SeriesSolution::new(2, [1.0, 1.0, 1.0], modes.to_vec());
    let results = sizes
        .par_iter()
        .map(|&cells| {
            let grid = Grid::unit_square(cells, BcMode::Box)?;
            let h = grid.spacing()[0];
            let steps = (MMS_FINAL_TIME / (0.2 * h * h)).ceil() as usize;
            let dt = MMS_FINAL_TIME / steps as f64;
            let init = grid.sample(|x| series.value(x, 0.0));
            let (n, c) = match case {
                HeatCase::Oxygen => (grid.zeros(), init),
                HeatCase::Density => (init, grid.zeros()),
            };
            let mut state = State::new(&grid, n, c, grid.zeros_vector())?;
            for _ in 0..steps {
                match case {
                    HeatCase::Oxygen => state.c = update_c(&grid, &state, &params, dt)?,
                    HeatCase::Density => state.n = update_n(&grid, &state, &params, dt)?,
                }
            }
            let field = match case {
                HeatCase::Oxygen => &state.c,
                HeatCase::Density => &state.n,
            };
            let exact = grid.sample(|x| series.value(x, MMS_FINAL_TIME));
            let error = field.axpy(-1.0, &exact).max_abs();
            Ok((cells, h, steps, error, grid.integrate(field)))
        })
        .collect::<Result<Vec<_>>>()?;
    let label = match case {
        HeatCase::Oxygen => "oxygen",
        HeatCase::Density => "density",
    };
    Ok(ConvergenceTable::new(label, MMS_MIN_ORDER, results))
}

/// Both heat sub-cases with the default two-mode data.
pub fn mms_validate(sizes: &[usize], out: Option<&Path>) -> Result<Vec<ConvergenceTable>> {
    let modes = default_mms_modes();
    let tables = vec![mms_case(HeatCase::Oxygen, sizes, &modes)?, mms_case(HeatCase::Density, sizes, &modes)?];
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join("mms.csv"))?);
        for (i, t) in tables.iter().enumerate() {
            let mut buf = Vec::new();
            t.write_csv(&mut buf)?;
            let text = String::from_utf8(buf).expect("ascii csv");
            let body = if i == 0 { text.as_str() } else { text.split_once('\n').map_or("", |(_, b)| b) };
            w.write_all(body.as_bytes())?;
        }
        w.flush()?;
    }
    Ok(tables)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarenblattSetup {
    pub m: f64,
    pub diff_coeff: f64,
    pub mass: f64,
    /// Support radius of the initial profile.
    pub r_start: f64,
    /// Support radius at the comparison time.
    pub r_end: f64,
}

impl BarenblattSetup {
    pub fn new(m: f64) -> Self {
        BarenblattSetup { m, diff_coeff: 2.0, mass: 1.0, r_start: 0.25, r_end: 0.4 }
    }

    fn time_at_radius(&self, profile: &Barenblatt, r: f64) -> f64 {
        // support radius is proportional to t^beta
        let r1 = profile.support_radius(1.0);
        (r / r1).powf(1.0 / profile.beta())
    }

    /// Start and end times matching the configured radii.
    pub fn times(&self) -> Result<(f64, f64)> {
        let b = self.profile()?;
        Ok((self.time_at_radius(&b, self.r_start), self.time_at_radius(&b, self.r_end)))
    }

    pub fn profile(&self) -> Result<Barenblatt> {
        Barenblatt::new(self.m, self.diff_coeff, self.mass, 2, [0.5, 0.5, 0.0])
    }
}

pub const BARENBLATT_MIN_ORDER: f64 = 0.8;

/// Evolves the density alone from the Barenblatt profile at `t0` to `t1`
/// on each grid and reports the L1 error against the profile at `t1`.
pub fn barenblatt_case(setup: &BarenblattSetup, sizes: &[usize], t0: f64, t1: f64) -> Result<ConvergenceTable> {
    check_sizes(sizes)?;
    if !(t1 >= t0) || !(t0 > 0.0) {
        return Err(Error::Config(format!("need 0 < t0 <= t1, got t0 = {t0}, t1 = {t1}")));
    }
    let profile = setup.profile()?;
    let params = ModelParams {
        m: setup.m,
        diff_coeff: setup.diff_coeff,
        eps: 1e-8,
        kinetics: KineticsPreset::linear().with_chi_scale(0.0),
        phi_grad: [0.0; 3],
        ..ModelParams::default()
    };
    params.validate()?;
    let results = sizes
        .par_iter()
        .map(|&cells| {
            let grid = Grid::unit_square(cells, BcMode::Box)?;
            let h = grid.spacing()[0];
            let n0 = grid.sample(|x| profile.value(x, t0));
            let n0 = n0.scale(setup.mass / grid.integrate(&n0));
            let mut state = State::new(&grid, n0, grid.zeros(), grid.zeros_vector())?;
            state.t = t0;
            let mut steps = 0;
            while state.t < t1 {
                let mut dt = cfl_dt(&grid, &state, &params)?;
                let last = state.t + dt * (1.0 + 1e-9) >= t1;
                if last {
                    dt = t1 - state.t;
                }
                state.n = update_n(&grid, &state, &params, dt)?;
                state.t = if last { t1 } else { state.t + dt };
                steps += 1;
            }
            let exact = grid.sample(|x| profile.value(x, t1));
            let error = l1_distance(&grid, &state.n, &exact);
            Ok((cells, h, steps, error, grid.integrate(&state.n)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable::new("barenblatt", BARENBLATT_MIN_ORDER, results))
}

fn l1_distance(grid: &Grid, a: &ScalarField, b: &ScalarField) -> f64 {
    grid.integrate(&a.axpy(-1.0, b).map(f64::abs))
}

pub fn barenblatt_validate(sizes: &[usize], m: f64, out: Option<&Path>) -> Result<ConvergenceTable> {
    let setup = BarenblattSetup::new(m);
    let (t0, t1) = setup.times()?;
    let table = barenblatt_case(&setup, sizes, t0, t1)?;
    if let Some(dir) = out {
        table.write_to_dir(dir, "barenblatt.csv")?;
    }
    Ok(table)
}
