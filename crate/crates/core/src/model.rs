//! Model parameters, kinetics presets, regularization functions and the
//! structural assumption validator.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Lowest diffusion exponent for which the existence theory applies.
pub const MIN_EXPONENT: f64 = 2.0 / 3.0;

/// Logarithmic saturation `ln(1 + eps*s) / eps` applied to the density in the
/// consumption term.
pub fn saturation(eps: f64, s: f64) -> Result<f64> {
    check_nonneg(s)?;
    Ok((eps * s).ln_1p() / eps)
}

/// Derivative of [`saturation`], `1 / (1 + eps*s)`.
pub fn saturation_prime(eps: f64, s: f64) -> Result<f64> {
    check_nonneg(s)?;
    Ok(1.0 / (1.0 + eps * s))
}

/// `s / (1 + eps*s)`, the saturated chemotactic mobility. Bounded by `1/eps`.
///
/// Callers on hot paths have already checked `s >= 0`.
#[inline]
pub(crate) fn saturated_mobility(eps: f64, s: f64) -> f64 {
    s / (1.0 + eps * s)
}

#[inline]
pub(crate) fn saturation_unchecked(eps: f64, s: f64) -> f64 {
    (eps * s).ln_1p() / eps
}

fn check_nonneg(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("argument must be finite and nonnegative, got {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KineticsKind {
    /// chi = 1, f(c) = c
    Linear,
    /// chi = 1, f(c) = c / (1 + c)
    Saturating,
    /// chi = 1, f(c) = c^2. Violates concavity of f/chi; kept for the validator.
    Quadratic,
}

impl KineticsKind {
    pub fn name(self) -> &'static str {
        match self {
            KineticsKind::Linear => "linear",
            KineticsKind::Saturating => "saturating",
            KineticsKind::Quadratic => "quadratic",
        }
    }
}

impl FromStr for KineticsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KineticsKind::Linear),
            "saturating" => Ok(KineticsKind::Saturating),
            "quadratic" => Ok(KineticsKind::Quadratic),
            other => Err(Error::Config(format!("unknown kinetics preset '{other}'"))),
        }
    }
}

impl fmt::Display for KineticsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A named chemotactic sensitivity / consumption pair. The sensitivity is the
/// constant `chi_scale` for all shipped presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticsPreset {
    pub kind: KineticsKind,
    pub chi_scale: f64,
}

impl KineticsPreset {
    pub fn new(kind: KineticsKind) -> Self {
        KineticsPreset { kind, chi_scale: 1.0 }
    }

    pub fn linear() -> Self {
        Self::new(KineticsKind::Linear)
    }

    pub fn saturating() -> Self {
        Self::new(KineticsKind::Saturating)
    }

    pub fn quadratic() -> Self {
        Self::new(KineticsKind::Quadratic)
    }

    pub fn with_chi_scale(mut self, chi_scale: f64) -> Self {
        self.chi_scale = chi_scale;
        self
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn chi(&self, _c: f64) -> f64 {
        self.chi_scale
    }

    /// Consumption rate f(c).
    pub fn f(&self, c: f64) -> f64 {
        match self.kind {
            KineticsKind::Linear => c,
            KineticsKind::Saturating => c / (1.0 + c),
            KineticsKind::Quadratic => c * c,
        }
    }

    fn f_prime(&self, c: f64) -> f64 {
        match self.kind {
            KineticsKind::Linear => 1.0,
            KineticsKind::Saturating => 1.0 / ((1.0 + c) * (1.0 + c)),
            KineticsKind::Quadratic => 2.0 * c,
        }
    }

    fn f_second(&self, c: f64) -> f64 {
        match self.kind {
            KineticsKind::Linear => 0.0,
            KineticsKind::Saturating => -2.0 / (1.0 + c).powi(3),
            KineticsKind::Quadratic => 2.0,
        }
    }

    /// g = f / chi
    pub fn g(&self, c: f64) -> f64 {
        self.f(c) / self.chi(c)
    }

    pub fn g_prime(&self, c: f64) -> f64 {
        self.f_prime(c) / self.chi_scale
    }

    pub fn g_second(&self, c: f64) -> f64 {
        self.f_second(c) / self.chi_scale
    }

    /// (chi f)'
    pub fn chi_f_prime(&self, c: f64) -> f64 {
        self.chi_scale * self.f_prime(c)
    }

    /// f(c)/c, continuously extended by f'(0) at c = 0.
    pub fn lambda(&self, c: f64) -> f64 {
        match self.kind {
            KineticsKind::Linear => 1.0,
            KineticsKind::Saturating => 1.0 / (1.0 + c),
            KineticsKind::Quadratic => c,
        }
    }

    fn potential_closed_form(&self, s: f64) -> Option<f64> {
        match self.kind {
            KineticsKind::Linear => Some(2.0 * self.chi_scale.sqrt() * (s.sqrt() - 1.0)),
            _ => None,
        }
    }

    /// Psi(s) = \int_1^s dσ / sqrt(g(σ)).
    ///
    /// Closed form where the preset has one, adaptive Simpson quadrature
    /// otherwise. The quadrature runs in the variable w = sqrt(σ), which
    /// removes the endpoint singularity of 1/sqrt(g) at zero.
    pub fn potential(&self, s: f64, c_floor: f64) -> Result<f64> {
        if !(s >= c_floor) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "potential argument {s} below floor {c_floor}"
            )));
        }
        if let Some(v) = self.potential_closed_form(s) {
            return Ok(v);
        }
        Ok(self.potential_quadrature(s))
    }

    pub(crate) fn potential_quadrature(&self, s: f64) -> f64 {
        let integrand = |w: f64| 2.0 * w / self.g(w * w).sqrt();
        let (lo, hi, sign) = if s >= 1.0 { (1.0, s.sqrt(), 1.0) } else { (s.sqrt(), 1.0, -1.0) };
        sign * adaptive_simpson(&integrand, lo, hi, 1e-10)
    }

    /// Psi'(s) = 1/sqrt(g(s)).
    pub fn potential_prime(&self, s: f64) -> f64 {
        1.0 / self.g(s).sqrt()
    }
}

/// Adaptive Simpson quadrature to relative tolerance `rel_tol`.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // coarse pass fixes the absolute target
    let panels = 16;
    let h = (b - a) / panels as f64;
    let mut coarse = 0.0;
    let mut pieces = Vec::with_capacity(panels);
    for k in 0..panels {
        let x0 = a + k as f64 * h;
        let x1 = if k + 1 == panels { b } else { x0 + h };
        let xm = 0.5 * (x0 + x1);
        let (f0, fm, f1) = (f(x0), f(xm), f(x1));
        let s = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        coarse += s;
        pieces.push((x0, x1, f0, fm, f1, s));
    }
    let abs_tol = rel_tol * coarse.abs().max(f64::MIN_POSITIVE) / panels as f64;
    pieces
        .into_iter()
        .map(|(x0, x1, f0, fm, f1, s)| simpson_recurse(f, x0, x1, f0, fm, f1, s, abs_tol, 48))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Physical and regularization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Diffusion exponent: D(s) = a s^(m-1).
    pub m: f64,
    pub diff_coeff: f64,
    pub eps: f64,
    /// Convection strength.
    pub kappa: f64,
    pub kinetics: KineticsPreset,
    /// Constant potential gradient (gravity); unused components are zero.
    pub phi_grad: [f64; 3],
    pub energy_weight: f64,
    pub c_floor: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            m: 2.0,
            diff_coeff: 2.0,
            eps: 1e-2,
            kappa: 1.0,
            kinetics: KineticsPreset::linear(),
            phi_grad: [0.0, -0.1, 0.0],
            energy_weight: 1.0,
            c_floor: 1e-12,
        }
    }
}

impl ModelParams {
    /// Regularized diffusivity a (s + eps)^(m-1); positive for s >= 0.
    #[inline]
    pub fn diffusivity(&self, s: f64) -> f64 {
        let e = self.m - 1.0;
        if e == 0.0 {
            self.diff_coeff
        } else if e == 1.0 {
            self.diff_coeff * (s + self.eps)
        } else {
            self.diff_coeff * (s + self.eps).powf(e)
        }
    }

    pub fn phi_is_constant(&self) -> bool {
        self.phi_grad.iter().all(|&g| g == 0.0)
    }

    /// Hard parameter errors. Kinetics conditions are the validator's job.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.m >= MIN_EXPONENT) {
            return bad(format!("m = {} is below the threshold 2/3", self.m));
        }
        if !(self.diff_coeff > 0.0) {
            return bad(format!("diffusion coefficient must be positive, got {}", self.diff_coeff));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps must lie in (0,1), got {}", self.eps));
        }
        if !(self.energy_weight >= 1.0) {
            return bad(format!("energy weight K must be >= 1, got {}", self.energy_weight));
        }
        if !(self.c_floor > 0.0) {
            return bad(format!("c_floor must be positive, got {}", self.c_floor));
        }
        if !self.kappa.is_finite() || self.phi_grad.iter().any(|g| !g.is_finite()) {
            return bad("kappa and phi_grad must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMethod {
    /// Direct comparison of a parameter value.
    Parameter,
    /// Closed-form derivatives evaluated on the probe grid. A pass means
    /// numerically verified on the probe range, not proved on [0, inf).
    SymbolicOnProbe,
    /// Finite differences on the probe grid.
    NumericOnProbe,
}

#[derive(Debug, Clone)]
pub struct AssumptionCheck {
    pub id: &'static str,
    pub description: &'static str,
    pub method: CheckMethod,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_ids(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.id).collect()
    }

    pub fn get(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let how = match c.method {
                CheckMethod::Parameter => "parameter",
                CheckMethod::SymbolicOnProbe => "symbolic, numerically verified on probe grid",
                CheckMethod::NumericOnProbe => "finite differences on probe grid",
            };
            writeln!(f, "[{tag}] {:<24} {} ({how}) {}", c.id, c.description, c.detail)?;
        }
        write!(f, "overall: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Checks every structural assumption on the parameters and kinetics.
///
/// Strict inequalities (f > 0, (f/chi)' > 0) are probed on (0, c_max]; the
/// remaining conditions include c = 0.
pub fn validate_assumptions(
    params: &ModelParams,
    c_max_probe: f64,
    n_probe_points: usize,
) -> Result<ValidationReport> {
    if !(c_max_probe > 0.0) || !c_max_probe.is_finite() {
        return Err(Error::InvalidParameter(format!("c_max_probe must be positive, got {c_max_probe}")));
    }
    if n_probe_points < 16 {
        return Err(Error::InvalidParameter(format!("need at least 16 probe points, got {n_probe_points}")));
    }
    let k = &params.kinetics;
    let probe: Vec<f64> = (0..n_probe_points)
        .map(|i| c_max_probe * i as f64 / (n_probe_points - 1) as f64)
        .collect();
    let interior = &probe[1..];

    let mut checks = Vec::new();
    let param = |id, description, passed: bool, detail: String| AssumptionCheck {
        id,
        description,
        method: CheckMethod::Parameter,
        passed,
        detail,
    };
    checks.push(param(
        "exponent_threshold",
        "m >= 2/3",
        params.m >= MIN_EXPONENT,
        format!("m = {}", params.m),
    ));
    checks.push(param(
        "diffusion_positive",
        "D(s) = a s^(m-1) with a > 0",
        params.diff_coeff > 0.0,
        format!("a = {}", params.diff_coeff),
    ));
    checks.push(param(
        "eps_range",
        "0 < eps < 1",
        params.eps > 0.0 && params.eps < 1.0,
        format!("eps = {}", params.eps),
    ));
    checks.push(param(
        "energy_weight",
        "K >= 1",
        params.energy_weight >= 1.0,
        format!("K = {}", params.energy_weight),
    ));
    checks.push(param(
        "c_floor_positive",
        "c_floor > 0",
        params.c_floor > 0.0,
        format!("c_floor = {:e}", params.c_floor),
    ));

    let probe_check = |id, description, pts: &[f64], pred: &dyn Fn(f64) -> bool| {
        let bad = pts.iter().copied().find(|&c| !pred(c));
        AssumptionCheck {
            id,
            description,
            method: CheckMethod::SymbolicOnProbe,
            passed: bad.is_none(),
            detail: match bad {
                Some(c) => format!("first violation at c = {c}"),
                None => format!("{} probe points on [0, {c_max_probe}]", pts.len()),
            },
        }
    };
    checks.push(probe_check("chi_positive", "chi > 0", &probe, &|c| k.chi(c) > 0.0));
    let f0 = k.f(0.0);
    let mut fcheck = probe_check("consumption_sign", "f(0) = 0, f > 0 on (0, inf)", interior, &|c| {
        k.f(c) > 0.0
    });
    if f0 != 0.0 {
        fcheck.passed = false;
        fcheck.detail = format!("f(0) = {f0}");
    }
    checks.push(fcheck);
    checks.push(probe_check("ratio_increasing", "(f/chi)' > 0", interior, &|c| k.g_prime(c) > 0.0));
    checks.push(probe_check("ratio_concave", "(f/chi)'' <= 0", &probe, &|c| k.g_second(c) <= 0.0));
    checks.push(probe_check("product_nondecreasing", "(chi f)' >= 0", &probe, &|c| {
        k.chi_f_prime(c) >= 0.0
    }));

    // the closed-form derivatives must agree with finite differences of g
    let step = c_max_probe * 1e-4;
    let mut worst: f64 = 0.0;
    for &c in interior {
        let (gm, g0, gp) = (k.g(c - step), k.g(c), k.g(c + step));
        let d1 = (gp - gm) / (2.0 * step);
        let d2 = (gp - 2.0 * g0 + gm) / (step * step);
        let e1 = (d1 - k.g_prime(c)).abs() / (1.0 + k.g_prime(c).abs());
        let e2 = (d2 - k.g_second(c)).abs() / (1.0 + k.g_second(c).abs());
        worst = worst.max(e1).max(e2);
    }
    checks.push(AssumptionCheck {
        id: "derivative_consistency",
        description: "supplied derivatives match finite differences",
        method: CheckMethod::NumericOnProbe,
        passed: worst < 1e-4,
        detail: format!("max relative mismatch {worst:.2e}"),
    });

    Ok(ValidationReport { checks })
}
