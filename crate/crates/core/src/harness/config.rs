//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! ```text
//! # comment
//! grid.cells = 64, 64
//! model.m = 2.0
//! time.dt = auto
//! ```
//!
//! Floats are written with the shortest representation that reads back to
//! the same bits, so `parse(serialize(c)) == c`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{BcMode, Grid};
use crate::model::{KineticsKind, KineticsPreset, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub cells: [usize; 3],
    pub lengths: [f64; 3],
    pub bc: BcMode,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.dim, self.cells, self.lengths, self.bc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPreset {
    /// Gaussian cell blob over a positive floor, uniform oxygen, fluid at rest.
    GaussianBlob,
    /// Gaussian blob with oxygen increasing linearly along the last axis.
    Stratified,
    /// Uniform fields with seeded random perturbations.
    RandomPerturbation,
}

impl InitPreset {
    pub fn name(self) -> &'static str {
        match self {
            InitPreset::GaussianBlob => "gaussian-blob",
            InitPreset::Stratified => "stratified",
            InitPreset::RandomPerturbation => "random-perturbation",
        }
    }
}

impl FromStr for InitPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-blob" => Ok(InitPreset::GaussianBlob),
            "stratified" => Ok(InitPreset::Stratified),
            "random-perturbation" => Ok(InitPreset::RandomPerturbation),
            other => Err(Error::Config(format!("unknown init preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub preset: InitPreset,
    /// Mass carried by the blob (or the mean density times |Ω| for the
    /// random preset).
    pub mass: f64,
    /// Standard deviation of the blob.
    pub width: f64,
    pub center: [f64; 3],
    /// Positive density floor added everywhere.
    pub floor: f64,
    /// Oxygen level (maximum for the stratified preset).
    pub c0: f64,
    /// Stratified preset: relative oxygen drop from top to bottom, in [0, 1].
    pub stratification: f64,
    /// Random preset: relative amplitude of the perturbations, in [0, 1).
    pub amplitude: f64,
    /// Random preset: amplitude of the solenoidal initial velocity.
    pub velocity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub t_final: f64,
    pub dt: DtPolicy,
    /// Hard cap on the number of steps.
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Record diagnostics every this many steps.
    pub cadence: usize,
    /// Record diagnostics at multiples of this time instead; time steps are
    /// shortened to land on them.
    pub sample_interval: Option<f64>,
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Bound on max |div u| after every projection.
    pub projection_tol: f64,
    pub cfl_safety: f64,
    /// Relative drift of ∫n that aborts a run.
    pub mass_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub model: ModelParams,
    pub init: InitConfig,
    pub time: TimeConfig,
    pub output: OutputConfig,
    pub solver: SolverConfig,
    /// Exponent of the A2 accumulator; `(3m+2)/3` when absent.
    pub a2_exponent: Option<f64>,
    pub seed: u64,
}

impl Default for RunConfig {
    /// 2D 64x64 unit box, Gaussian blob of mass 1, uniform oxygen, fluid at
    /// rest, gravity (0, -0.1), m = 2, ε = 1e-2, κ = 1, T = 1.
    fn default() -> Self {
        RunConfig {
            grid: GridSpec { dim: 2, cells: [64, 64, 1], lengths: [1.0, 1.0, 1.0], bc: BcMode::Box },
            model: ModelParams::default(),
            init: InitConfig {
                preset: InitPreset::GaussianBlob,
                mass: 1.0,
                width: 0.1,
                center: [0.5, 0.5, 0.5],
                floor: 1e-3,
                c0: 1.0,
                stratification: 0.5,
                amplitude: 0.1,
                velocity: 0.0,
            },
            time: TimeConfig { t_final: 1.0, dt: DtPolicy::Auto, max_steps: 10_000_000 },
            output: OutputConfig { dir: None, cadence: 10, sample_interval: None, snapshot_times: Vec::new() },
            solver: SolverConfig { projection_tol: 1e-8, cfl_safety: 0.4, mass_tol: 1e-10 },
            a2_exponent: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        let g = &self.grid;
        if !(1..=3).contains(&g.dim) {
            return cfg(format!("grid.dim must be 1, 2 or 3, got {}", g.dim));
        }
        g.build().map_err(|e| Error::Config(e.to_string()))?;
        self.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        let i = &self.init;
        if !(i.mass > 0.0) || !(i.width > 0.0) || !(i.floor > 0.0) || !(i.c0 >= 0.0) {
            return cfg("init.mass, init.width, init.floor must be positive and init.c0 nonnegative".into());
        }
        if !(0.0..=1.0).contains(&i.stratification) || !(0.0..1.0).contains(&i.amplitude) || !(i.velocity >= 0.0) {
            return cfg("init.stratification in [0,1], init.amplitude in [0,1), init.velocity >= 0".into());
        }
        if !(self.time.t_final > 0.0) || !self.time.t_final.is_finite() {
            return cfg(format!("time.t_final must be positive, got {}", self.time.t_final));
        }
        if let DtPolicy::Fixed(dt) = self.time.dt {
            if !(dt > 0.0) {
                return cfg(format!("time.dt must be positive, got {dt}"));
            }
        }
        if self.time.max_steps == 0 || self.output.cadence == 0 {
            return cfg("time.max_steps and output.cadence must be positive".into());
        }
        if let Some(s) = self.output.sample_interval {
            if !(s > 0.0) {
                return cfg(format!("output.sample_interval must be positive, got {s}"));
            }
        }
        if self.output.snapshot_times.iter().any(|t| !(*t >= 0.0)) {
            return cfg("snapshot times must be nonnegative".into());
        }
        let s = &self.solver;
        if !(s.projection_tol > 0.0) || !(s.cfl_safety > 0.0 && s.cfl_safety <= 1.0) || !(s.mass_tol > 0.0) {
            return cfg("solver tolerances must be positive and cfl_safety in (0, 1]".into());
        }
        if let Some(p) = self.a2_exponent {
            if !(p >= 1.0) {
                return cfg(format!("diagnostics.a2_exponent must be >= 1, got {p}"));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            c.set(key, value).map_err(|e| Error::Config(format!("line {}: {key}: {e}", lineno + 1)))?;
        }
        if c.init.preset == InitPreset::RandomPerturbation && !seen.contains("seed") {
            return Err(Error::Config("the random-perturbation preset needs an explicit seed".into()));
        }
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "grid.dim" => self.grid.dim = num(v)?,
            "grid.cells" => self.grid.cells = triple(v, 1)?,
            "grid.lengths" => self.grid.lengths = triple(v, 1.0)?,
            "grid.bc" => self.grid.bc = v.parse().map_err(|e: Error| e.to_string())?,
            "model.m" => self.model.m = num(v)?,
            "model.a" => self.model.diff_coeff = num(v)?,
            "model.eps" => self.model.eps = num(v)?,
            "model.kappa" => self.model.kappa = num(v)?,
            "model.kinetics" => {
                let kind: KineticsKind = v.parse().map_err(|e: Error| e.to_string())?;
                self.model.kinetics = KineticsPreset::new(kind).with_chi_scale(self.model.kinetics.chi_scale);
            }
            "model.chi_scale" => self.model.kinetics.chi_scale = num(v)?,
            "model.phi_grad" => self.model.phi_grad = triple(v, 0.0)?,
            "model.energy_weight" => self.model.energy_weight = num(v)?,
            "model.c_floor" => self.model.c_floor = num(v)?,
            "init.preset" => self.init.preset = v.parse().map_err(|e: Error| e.to_string())?,
            "init.mass" => self.init.mass = num(v)?,
            "init.width" => self.init.width = num(v)?,
            "init.center" => self.init.center = triple(v, 0.5)?,
            "init.floor" => self.init.floor = num(v)?,
            "init.c0" => self.init.c0 = num(v)?,
            "init.stratification" => self.init.stratification = num(v)?,
            "init.amplitude" => self.init.amplitude = num(v)?,
            "init.velocity" => self.init.velocity = num(v)?,
            "time.t_final" => self.time.t_final = num(v)?,
            "time.dt" => self.time.dt = if v == "auto" { DtPolicy::Auto } else { DtPolicy::Fixed(num(v)?) },
            "time.max_steps" => self.time.max_steps = num(v)?,
            "output.dir" => self.output.dir = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "output.cadence" => self.output.cadence = num(v)?,
            "output.sample_interval" => {
                self.output.sample_interval = if v == "none" { None } else { Some(num(v)?) }
            }
            "output.snapshot_times" => self.output.snapshot_times = list(v)?,
            "solver.projection_tol" => self.solver.projection_tol = num(v)?,
            "solver.cfl_safety" => self.solver.cfl_safety = num(v)?,
            "solver.mass_tol" => self.solver.mass_tol = num(v)?,
            "diagnostics.a2_exponent" => self.a2_exponent = if v == "default" { None } else { Some(num(v)?) },
            "seed" => self.seed = num(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let f = |x: f64| format!("{x:?}");
        let fl = |xs: &[f64]| xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let g = &self.grid;
        let m = &self.model;
        let i = &self.init;
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("grid.dim", g.dim.to_string());
        put("grid.cells", g.cells.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", "));
        put("grid.lengths", fl(&g.lengths));
        put("grid.bc", g.bc.to_string());
        put("model.m", f(m.m));
        put("model.a", f(m.diff_coeff));
        put("model.eps", f(m.eps));
        put("model.kappa", f(m.kappa));
        put("model.kinetics", m.kinetics.name().to_string());
        put("model.chi_scale", f(m.kinetics.chi_scale));
        put("model.phi_grad", fl(&m.phi_grad));
        put("model.energy_weight", f(m.energy_weight));
        put("model.c_floor", f(m.c_floor));
        put("init.preset", i.preset.name().to_string());
        put("init.mass", f(i.mass));
        put("init.width", f(i.width));
        put("init.center", fl(&i.center));
        put("init.floor", f(i.floor));
        put("init.c0", f(i.c0));
        put("init.stratification", f(i.stratification));
        put("init.amplitude", f(i.amplitude));
        put("init.velocity", f(i.velocity));
        put("time.t_final", f(self.time.t_final));
        put(
            "time.dt",
            match self.time.dt {
                DtPolicy::Auto => "auto".into(),
                DtPolicy::Fixed(dt) => f(dt),
            },
        );
        put("time.max_steps", self.time.max_steps.to_string());
        put("output.dir", self.output.dir.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        put("output.cadence", self.output.cadence.to_string());
        put("output.sample_interval", self.output.sample_interval.map_or("none".into(), f));
        put("output.snapshot_times", fl(&self.output.snapshot_times));
        put("solver.projection_tol", f(self.solver.projection_tol));
        put("solver.cfl_safety", f(self.solver.cfl_safety));
        put("solver.mass_tol", f(self.solver.mass_tol));
        put("diagnostics.a2_exponent", self.a2_exponent.map_or("default".into(), f));
        put("seed", self.seed.to_string());
        s
    }
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse '{v}'"))
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(x.trim())).collect()
}

/// Up to three comma-separated values; missing trailing entries take `fill`.
fn triple<T: FromStr + Copy>(v: &str, fill: T) -> std::result::Result<[T; 3], String> {
    let xs: Vec<T> = list(v)?;
    if xs.is_empty() || xs.len() > 3 {
        return Err(format!("expected 1 to 3 values, got '{v}'"));
    }
    let mut out = [fill; 3];
    out[..xs.len()].copy_from_slice(&xs);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.serialize()).unwrap(), c);
    }

    #[test]
    fn parses_comments_and_partial_vectors() {
        let text = "# scenario\n\ngrid.cells = 32, 16   # coarse\nmodel.phi_grad = 0.0, -1.0\ntime.dt = 1e-4\nseed = 7\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.grid.cells, [32, 16, 1]);
        assert_eq!(c.model.phi_grad, [0.0, -1.0, 0.0]);
        assert_eq!(c.time.dt, DtPolicy::Fixed(1e-4));
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "grid.cells 32",
            "nonsense.key = 1",
            "model.m = two",
            "model.m = 0.5",
            "time.t_final = 0",
            "init.preset = unknown",
            "model.eps = 1e-2\nmodel.eps = 1e-3",
            "init.preset = random-perturbation",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    proptest! {
        #[test]
        fn arbitrary_configs_round_trip(
            m in 0.7f64..4.0,
            eps in 1e-6f64..0.9,
            kappa in -5.0f64..5.0,
            g in proptest::array::uniform3(-3.0f64..3.0),
            cells in proptest::array::uniform2(4usize..200),
            t in 1e-3f64..10.0,
            dt in proptest::option::of(1e-7f64..1e-2),
            snaps in proptest::collection::vec(0.0f64..5.0, 0..4),
            kind in 0usize..3,
            seed in any::<u64>(),
        ) {
            let mut c = RunConfig::default();
            c.model.m = m;
            c.model.eps = eps;
            c.model.kappa = kappa;
            c.model.phi_grad = g;
            c.model.kinetics = KineticsPreset::new([KineticsKind::Linear, KineticsKind::Saturating, KineticsKind::Quadratic][kind]);
            c.grid.cells = [cells[0], cells[1], 1];
            c.time.t_final = t;
            c.time.dt = dt.map_or(DtPolicy::Auto, DtPolicy::Fixed);
            c.output.snapshot_times = snaps;
            c.output.sample_interval = dt;
            c.a2_exponent = dt.map(|x| 1.0 + x);
            c.seed = seed;
            prop_assert_eq!(RunConfig::parse(&c.serialize()).unwrap(), c);
        }
    }
}
