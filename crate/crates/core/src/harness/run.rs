//! Run orchestration: time loop, diagnostics cadence, invariant checks,
//! snapshots and output files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{DtPolicy, RunConfig};
use super::sim::Simulation;
use crate::diagnostics::{evaluate_with, write_csv, DiagnosticsOptions, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::snapshot::Snapshot;
use crate::grid::{Grid, ScalarField};
use crate::model::validate_assumptions;
use crate::transport::State;

/// Allowed growth of max c between records.
pub const C_MAX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepExtremes {
    /// Largest post-projection max |div u| over all steps.
    pub max_divergence: f64,
    pub min_n: f64,
    pub min_c: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub grid: Grid,
    pub state: State,
    pub records: Vec<DiagnosticsRecord>,
    pub steps: usize,
    pub extremes: StepExtremes,
    pub snapshots: Vec<PathBuf>,
}

/// Runs a configuration to `t_final`. With `out` set (or `output.dir` in
/// the config) the diagnostics CSV, the effective config and the snapshots
/// are written there; a failing run still leaves the CSV of the records
/// gathered so far.
pub fn run(config: &RunConfig, out: Option<&Path>) -> Result<RunOutput> {
    run_observed(config, out, |_| Ok(()))
}

/// [`run`] with a callback invoked on the initial state and after every
/// step.
pub fn run_observed<F: FnMut(&State) -> Result<()>>(config: &RunConfig, out: Option<&Path>, mut observe: F) -> Result<RunOutput> {
    config.validate()?;
    let out = out.map(Path::to_path_buf).or_else(|| config.output.dir.clone());
    if let Some(dir) = &out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.cfg"), config.serialize())?;
    }
    let mut sim = Simulation::new(config)?;
    let report = validate_assumptions(&sim.params, sim.state.c.max().max(1.0), 64)?;
    if !report.passed() {
        return Err(Error::Config(format!("model assumptions fail: {}", report.failed_ids().join(", "))));
    }
    let opts = DiagnosticsOptions { a2_exponent: config.a2_exponent };
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let result = time_loop(config, &mut sim, &opts, out.as_deref(), &mut records, &mut snapshots, &mut observe);
    if let Some(dir) = &out {
        let mut w = BufWriter::new(File::create(dir.join("diagnostics.csv"))?);
        write_csv(&mut w, &records)?;
        w.flush()?;
    }
    let extremes = result.map_err(|e| Error::AtStep { step: sim.steps, source: Box::new(e) })?;
    Ok(RunOutput { grid: sim.grid, state: sim.state, records, steps: sim.steps, extremes, snapshots })
}

fn time_loop<F: FnMut(&State) -> Result<()>>(
    config: &RunConfig,
    sim: &mut Simulation,
    opts: &DiagnosticsOptions,
    out: Option<&Path>,
    records: &mut Vec<DiagnosticsRecord>,
    snapshots: &mut Vec<PathBuf>,
    observe: &mut F,
) -> Result<StepExtremes> {
    let t_final = config.time.t_final;
    let mut snap_times = config.output.snapshot_times.clone();
    snap_times.sort_by(f64::total_cmp);
    snap_times.dedup();
    let mut next_snap = 0;
    let mut ext = StepExtremes { max_divergence: 0.0, min_n: sim.state.n.min(), min_c: sim.state.c.min() };

    let first = evaluate_with(&sim.grid, &sim.state, &sim.params, None, opts)?;
    let mass0 = first.mass;
    records.push(first);
    observe(&sim.state)?;
    while next_snap < snap_times.len() && snap_times[next_snap] <= 0.0 {
        write_snapshots(sim, out, snapshots)?;
        next_snap += 1;
    }

    let mut sample = 1usize;
    while sim.state.t < t_final {
        if sim.steps >= config.time.max_steps {
            return Err(Error::Invariant(format!("step limit {} reached at t = {}", config.time.max_steps, sim.state.t)));
        }
        let mut dt = match config.time.dt {
            DtPolicy::Auto => sim.stable_dt()?,
            DtPolicy::Fixed(dt) => dt,
        };
        let mut target = t_final;
        if let Some(si) = config.output.sample_interval {
            target = target.min(sample as f64 * si);
        }
        if next_snap < snap_times.len() {
            target = target.min(snap_times[next_snap]);
        }
        let lands = sim.state.t + dt * (1.0 + 1e-9) >= target;
        if lands {
            dt = target - sim.state.t;
        }
        let report = sim.advance(dt)?;
        if lands {
            sim.state.t = target;
        }
        ext.max_divergence = ext.max_divergence.max(report.divergence);
        ext.min_n = ext.min_n.min(sim.state.n.min());
        ext.min_c = ext.min_c.min(sim.state.c.min());
        observe(&sim.state)?;

        let t = sim.state.t;
        let done = t >= t_final;
        let due = match config.output.sample_interval {
            Some(si) => {
                let hit = lands && t == sample as f64 * si;
                if hit {
                    sample += 1;
                }
                hit
            }
            None => sim.steps.is_multiple_of(config.output.cadence),
        };
        if due || done {
            let rec = evaluate_with(&sim.grid, &sim.state, &sim.params, records.last(), opts)?;
            check_record(&rec, records.last().expect("initial record"), mass0, config.solver.mass_tol)?;
            records.push(rec);
        }
        while next_snap < snap_times.len() && snap_times[next_snap] <= t {
            write_snapshots(sim, out, snapshots)?;
            next_snap += 1;
        }
    }
    Ok(ext)
}

fn check_record(rec: &DiagnosticsRecord, prev: &DiagnosticsRecord, mass0: f64, mass_tol: f64) -> Result<()> {
    let fields = [rec.mass, rec.c_max, rec.c_min, rec.n_max, rec.combined_energy, rec.budget_dissipation];
    if fields.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invariant(format!("non-finite diagnostics at t = {}", rec.t)));
    }
    let drift = (rec.mass - mass0).abs() / mass0.abs().max(f64::MIN_POSITIVE);
    if drift > mass_tol {
        return Err(Error::Invariant(format!("mass drift {drift:e} at t = {}", rec.t)));
    }
    if rec.c_max > prev.c_max + C_MAX_TOL {
        return Err(Error::Invariant(format!("max c grew from {} to {} at t = {}", prev.c_max, rec.c_max, rec.t)));
    }
    if rec.n_min < 0.0 || rec.c_min < 0.0 {
        return Err(Error::Invariant(format!("negative field (min n {}, min c {}) at t = {}", rec.n_min, rec.c_min, rec.t)));
    }
    Ok(())
}

fn write_snapshots(sim: &Simulation, out: Option<&Path>, written: &mut Vec<PathBuf>) -> Result<()> {
    let Some(dir) = out else {
        return Ok(());
    };
    let dir = dir.join("snapshots");
    fs::create_dir_all(&dir)?;
    let g = &sim.grid;
    let idx = written.len() / (3 + g.dim());
    let cell = |name: &str, f: &ScalarField| Snapshot {
        dim: g.dim() as u32,
        sizes: g.cells().map(|n| n as u64),
        spacings: g.spacing(),
        time: sim.state.t,
        name: name.into(),
        role: "cell".into(),
        values: f.data.clone(),
    };
    let mut snaps = vec![cell("n", &sim.state.n), cell("c", &sim.state.c), cell("p", &sim.state.p)];
    for a in 0..g.dim() {
        snaps.push(Snapshot {
            dim: g.dim() as u32,
            sizes: g.face_shape(a).map(|n| n as u64),
            spacings: g.spacing(),
            time: sim.state.t,
            name: format!("u{a}"),
            role: format!("face{a}"),
            values: sim.state.u.comps[a].clone(),
        });
    }
    for s in snaps {
        let path = dir.join(format!("{:04}_{}.cfx", idx, s.name));
        let mut w = BufWriter::new(File::create(&path)?);
        s.write_to(&mut w)?;
        w.flush()?;
        written.push(path);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::InitPreset;

    fn small() -> RunConfig {
        let mut c = RunConfig::default();
        c.grid.cells = [16, 16, 1];
        c.time.t_final = 0.01;
        c
    }

    #[test]
    fn uniform_state_is_stationary() {
        let mut c = small();
        c.init.preset = InitPreset::RandomPerturbation;
        c.init.amplitude = 0.0;
        // consumption makes any c > 0 decay, so only c = 0 is a fixed point
        c.init.c0 = 0.0;
        c.model.phi_grad = [0.0; 3];
        c.time.dt = DtPolicy::Fixed(1e-4);
        c.time.t_final = 1e-2;
        let sim0 = Simulation::new(&c).unwrap();
        let out = run(&c, None).unwrap();
        assert_eq!(out.steps, 100);
        let diff = |a: &ScalarField, b: &ScalarField| a.axpy(-1.0, b).max_abs();
        assert!(diff(&out.state.n, &sim0.state.n) <= 1e-12);
        assert!(diff(&out.state.c, &sim0.state.c) <= 1e-12);
        assert!(out.state.u.max_abs() <= 1e-12);
        for r in &out.records {
            assert_eq!(r.dissipation(), [0.0; 4]);
        }
    }

    #[test]
    fn sampling_interval_gives_uniform_records() {
        let mut c = small();
        c.output.sample_interval = Some(2.5e-3);
        let out = run(&c, None).unwrap();
        let ts: Vec<f64> = out.records.iter().map(|r| r.t).collect();
        assert_eq!(ts.len(), 5);
        for (k, t) in ts.iter().enumerate() {
            assert_eq!(*t, k as f64 * 2.5e-3);
        }
    }

    #[test]
    fn outputs_are_written_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small();
        c.output.snapshot_times = vec![0.0, 0.005];
        let a = run(&c, Some(&dir.path().join("a"))).unwrap();
        run(&c, Some(&dir.path().join("b"))).unwrap();
        let read = |p: &str| fs::read(dir.path().join(p).join("diagnostics.csv")).unwrap();
        assert_eq!(read("a"), read("b"));
        assert_eq!(a.snapshots.len(), 10);
        let snap = Snapshot::read_from(&mut File::open(&a.snapshots[5]).unwrap()).unwrap();
        assert_eq!(snap.name, "n");
        assert!((snap.time - 0.005).abs() < 1e-15);
        let cfg = fs::read_to_string(dir.path().join("a/config.cfg")).unwrap();
        assert_eq!(RunConfig::parse(&cfg).unwrap(), c);
    }

    #[test]
    fn failing_assumptions_refuse_to_run() {
        let mut c = small();
        c.model.kinetics = crate::model::KineticsPreset::quadratic();
        let err = run(&c, None).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn oversized_fixed_step_aborts_with_partial_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small();
        c.time.dt = DtPolicy::Fixed(1e-2);
        let err = run(&c, Some(dir.path())).unwrap_err();
        assert!(matches!(err, Error::AtStep { step: 0, .. }), "{err}");
        assert_eq!(err.exit_code(), 2);
        let csv = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
    }
}
