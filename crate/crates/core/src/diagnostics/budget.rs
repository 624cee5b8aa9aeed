use super::DiagnosticsRecord;
use crate::error::{Error, Result};

/// Relative deviation of a sampling interval tolerated as "uniform".
const SAMPLING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    /// Per interval: `ΔE/Δt + mean(dissipation)`.
    pub rates: Vec<f64>,
    /// `max(rates)`, the constant implied by the run.
    pub implied_constant: f64,
    /// Largest increase of the combined energy between consecutive records.
    pub max_increase: f64,
    pub first_quartile_max: f64,
    pub last_quartile_max: f64,
    pub phi_is_constant: bool,
    pub passed: bool,
}

/// Audits the energy inequality over a run sampled at a uniform interval.
///
/// Without a potential the combined energy must not increase by more than
/// `slack` between records. With a potential the implied constant must be
/// finite and must not trend upward: the largest rate in the last quarter of
/// the run may exceed twice the largest rate of the first quarter by at most
/// `slack`.
pub fn energy_budget_check(records: &[DiagnosticsRecord], phi_is_constant: bool, slack: f64) -> Result<BudgetReport> {
    if records.len() < 2 {
        return Err(Error::Sampling(format!("need at least 2 records, got {}", records.len())));
    }
    let dt0 = records[1].t - records[0].t;
    if !(dt0 > 0.0) {
        return Err(Error::Sampling(format!("non-increasing time {} -> {}", records[0].t, records[1].t)));
    }
    let mut rates = Vec::with_capacity(records.len() - 1);
    let mut max_increase = f64::NEG_INFINITY;
    for (i, w) in records.windows(2).enumerate() {
        let dt = w[1].t - w[0].t;
        if (dt - dt0).abs() > SAMPLING_TOL * dt0 {
            return Err(Error::Sampling(format!("interval {i} has length {dt:e}, expected {dt0:e}")));
        }
        let de = w[1].combined_energy - w[0].combined_energy;
        max_increase = max_increase.max(de);
        rates.push(de / dt + 0.5 * (w[0].budget_dissipation + w[1].budget_dissipation));
    }
    let implied_constant = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let q = (rates.len() / 4).max(1);
    let max_of = |s: &[f64]| s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first_quartile_max = max_of(&rates[..q]);
    let last_quartile_max = max_of(&rates[rates.len() - q..]);
    let finite = rates.iter().all(|r| r.is_finite());
    let passed = if phi_is_constant {
        finite && max_increase <= slack
    } else {
        finite && last_quartile_max <= 2.0 * first_quartile_max.max(0.0) + slack
    };
    Ok(BudgetReport {
        rates,
        implied_constant,
        max_increase,
        first_quartile_max,
        last_quartile_max,
        phi_is_constant,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::evaluate;
    use crate::grid::{BcMode, Grid};
    use crate::model::ModelParams;
    use crate::transport::State;

    fn records(energies: &[f64], dt: f64) -> Vec<DiagnosticsRecord> {
        let g = Grid::unit_square(4, BcMode::Box).unwrap();
        let s = State::new(&g, g.constant(1.0), g.constant(1.0), g.zeros_vector()).unwrap();
        let base = evaluate(&g, &s, &ModelParams::default(), None).unwrap();
        energies
            .iter()
            .enumerate()
            .map(|(i, &e)| DiagnosticsRecord { t: i as f64 * dt, combined_energy: e, ..base.clone() })
            .collect()
    }

    #[test]
    fn stationary_state_passes_with_zero_constant() {
        let r = energy_budget_check(&records(&[0.0; 10], 0.1), true, 0.0).unwrap();
        assert!(r.passed);
        assert_eq!(r.implied_constant, 0.0);
        let r = energy_budget_check(&records(&[0.0; 10], 0.1), false, 0.0).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn increase_beyond_slack_fails() {
        let r = energy_budget_check(&records(&[1.0, 0.9, 0.95, 0.8], 0.1), true, 1e-8).unwrap();
        assert!(!r.passed);
        assert!((r.max_increase - 0.05).abs() < 1e-12);
    }

    #[test]
    fn growing_rates_fail_the_trend_check() {
        let e: Vec<f64> = (0..20).map(|i| (i as f64).powi(3)).collect();
        let r = energy_budget_check(&records(&e, 1.0), false, 1e-6).unwrap();
        assert!(!r.passed);
        let e: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(energy_budget_check(&records(&e, 1.0), false, 1e-6).unwrap().passed);
    }

    #[test]
    fn non_uniform_sampling_is_rejected() {
        let mut r = records(&[1.0, 1.0, 1.0], 0.1);
        r[2].t = 0.25;
        assert!(matches!(energy_budget_check(&r, true, 0.0), Err(Error::Sampling(_))));
        assert!(energy_budget_check(&r[..1], true, 0.0).is_err());
    }
}
