//! Agreement checks between the closed forms and the brute-force oracles.
//!
//! The closed forms are supplied through [`Formulas`] so that a harness can
//! substitute a deliberately wrong variant and confirm the checks catch it.

use serde::Serialize;

use crate::design::{p0_all_stigmatizing, p0_nonstigmatizing};
use crate::error::Result;
use crate::estimation::{
    avg_variance_proportions_theoretical, estimate_mean, estimate_proportions,
    variance_mean_theoretical,
};
use crate::model::{Device, PopulationModel, ResponseSample, SupportSpec};
use crate::oracle::{
    alpha_adversary, alpha_bruteforce, bayes_posterior_oracle, beta_adversary, beta_bruteforce,
    enumerate_multinomial, multinomial_variance_oracle, simplex_grid, simplex_grid_search,
    Direction, MassConstraint,
};
use crate::privacy::{
    alpha_diagonal, alpha_measure, beta_measure, guaranteed_alpha_bound, guaranteed_beta_bound,
    revealing_probabilities, Posterior,
};

pub type VarianceMeanFn = fn(&Device, &SupportSpec, &PopulationModel, u64) -> Result<f64>;
pub type AvgVarianceFn = fn(&Device, &PopulationModel, u64) -> Result<f64>;
pub type PosteriorFn = fn(&Device, &PopulationModel) -> Result<Posterior>;

/// Closed forms under test.
#[derive(Clone, Copy)]
pub struct Formulas {
    pub variance_mean: VarianceMeanFn,
    pub avg_variance_proportions: AvgVarianceFn,
    pub posterior: PosteriorFn,
}

impl Default for Formulas {
    fn default() -> Self {
        Self {
            variance_mean: variance_mean_theoretical,
            avg_variance_proportions: avg_variance_proportions_theoretical,
            posterior: revealing_probabilities,
        }
    }
}

/// Variance expressions exactly as typeset in the source derivation, with
/// the two sign errors the oracles reject. Kept for mutation checks.
pub mod printed {
    use super::*;

    /// Last term `p(p-1)(mu - xbar)^2` instead of `p(1-p)(mu - xbar)^2`.
    pub fn variance_mean(
        device: &Device,
        support: &SupportSpec,
        population: &PopulationModel,
        n: u64,
    ) -> Result<f64> {
        let p = device.p();
        let m = support.len() as f64;
        let mu = population.mean(support)?;
        let s2 = population.variance(support)?;
        let xbar = support.value_mean();
        let spread = support
            .values()
            .iter()
            .map(|x| (x - xbar).powi(2))
            .sum::<f64>()
            / m;
        Ok(
            (p * s2 + (1.0 - p) * spread + p * (p - 1.0) * (mu - xbar).powi(2))
                / (n as f64 * p * p),
        )
    }

    /// `+ (1/m)(1/p^2 - 1)` instead of `- (1/m)(1/p^2 - 1)`.
    pub fn avg_variance_proportions(
        device: &Device,
        population: &PopulationModel,
        n: u64,
    ) -> Result<f64> {
        let p = device.p();
        let inv_p2 = 1.0 / (p * p);
        let sum_sq: f64 = population.probs().iter().map(|q| q * q).sum();
        Ok((inv_p2 - sum_sq + (inv_p2 - 1.0) / device.m() as f64) / n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Absolute,
    Relative,
    /// Largest violation of a bound or ordering; 0 when it holds.
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub kind: ErrorKind,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub grid_step: f64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One line per check.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{:<28} {:<4} max={:.3e} tol={:.0e} cases={:<6} {}\n",
                c.name,
                match c.kind {
                    ErrorKind::Absolute => "abs",
                    ErrorKind::Relative => "rel",
                    ErrorKind::Violation => "viol",
                },
                c.max_discrepancy,
                c.tolerance,
                c.cases,
                if c.passed { "PASS" } else { "FAIL" }
            ));
        }
        out.push_str(if self.passed {
            "all checks passed\n"
        } else {
            "verification FAILED\n"
        });
        out
    }
}

struct Tracker {
    name: &'static str,
    kind: ErrorKind,
    tolerance: f64,
    worst: f64,
    cases: usize,
}

impl Tracker {
    fn new(name: &'static str, kind: ErrorKind, tolerance: f64) -> Self {
        Self {
            name,
            kind,
            tolerance,
            worst: 0.0,
            cases: 0,
        }
    }

    fn compare(&mut self, got: f64, want: f64) {
        let d = match self.kind {
            ErrorKind::Relative => (got - want).abs() / want.abs().max(f64::MIN_POSITIVE),
            _ => (got - want).abs(),
        };
        self.record(d);
    }

    fn record(&mut self, discrepancy: f64) {
        self.cases += 1;
        // NaN counts as the worst possible discrepancy.
        if discrepancy.is_nan() || discrepancy > self.worst {
            self.worst = if discrepancy.is_nan() {
                f64::INFINITY
            } else {
                discrepancy
            };
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            kind: self.kind,
            max_discrepancy: self.worst,
            tolerance: self.tolerance,
            cases: self.cases,
            passed: self.worst <= self.tolerance,
        }
    }
}

fn p_grid() -> impl Iterator<Item = f64> {
    (1..=9).map(|k| k as f64 / 10.0)
}

/// Grid of `(m, p, pi)` configurations used by the agreement checks.
fn configurations(step: f64) -> Result<Vec<(Device, PopulationModel)>> {
    let mut out = Vec::new();
    for m in 2..=4 {
        for pi in simplex_grid(m, step)? {
            let pi = PopulationModel::new(pi)?;
            for p in p_grid() {
                out.push((Device::new(p, m)?, pi.clone()));
            }
        }
    }
    Ok(out)
}

pub const DEFAULT_GRID_STEP: f64 = 0.05;

/// Runs every agreement check on a simplex grid of resolution `grid_step`.
pub fn run_verification(formulas: &Formulas, grid_step: f64) -> Result<VerifyReport> {
    let configs = configurations(grid_step)?;
    let mut checks = vec![
        posterior_check(formulas, &configs)?,
        alpha_reduction_check(&configs)?,
        variance_mean_check(formulas, &configs)?,
        variance_enumeration_check(formulas)?,
        avg_variance_check(formulas, &configs)?,
        unbiasedness_check()?,
        variance_monotonicity_check(formulas)?,
    ];
    checks.extend(theorem_checks(grid_step)?);
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        grid_step,
        checks,
        passed,
    })
}

fn posterior_check(
    formulas: &Formulas,
    configs: &[(Device, PopulationModel)],
) -> Result<CheckResult> {
    let mut t = Tracker::new("posterior_vs_bayes", ErrorKind::Absolute, 1e-12);
    for (d, pi) in configs {
        let closed = (formulas.posterior)(d, pi)?;
        let oracle = bayes_posterior_oracle(d, pi)?;
        let worst = (0..d.m())
            .flat_map(|i| (0..d.m()).map(move |j| (i, j)))
            .map(|(i, j)| (closed.get(i, j) - oracle.posterior[i][j]).abs())
            .fold(0.0, f64::max);
        t.record(worst);
    }
    Ok(t.finish())
}

fn alpha_reduction_check(configs: &[(Device, PopulationModel)]) -> Result<CheckResult> {
    let mut t = Tracker::new("alpha_diagonal_reduction", ErrorKind::Absolute, 1e-12);
    for (d, pi) in configs {
        let full = alpha_measure(d, pi)?.alpha;
        t.compare(full, alpha_diagonal(d, pi)?);
        t.compare(full, alpha_bruteforce(d, pi)?);
    }
    Ok(t.finish())
}

fn variance_mean_check(
    formulas: &Formulas,
    configs: &[(Device, PopulationModel)],
) -> Result<CheckResult> {
    let mut t = Tracker::new("variance_mean_vs_multinomial", ErrorKind::Relative, 1e-12);
    for (d, pi) in configs {
        let x = SupportSpec::integers(d.m())?;
        let closed = (formulas.variance_mean)(d, &x, pi, 100)?;
        let oracle = multinomial_variance_oracle(d, &x, pi, 100)?;
        t.compare(closed, oracle.covariance_identity);
    }
    Ok(t.finish())
}

/// Small `(m, n)` where the full outcome enumeration is cheap.
fn variance_enumeration_check(formulas: &Formulas) -> Result<CheckResult> {
    let mut t = Tracker::new("variance_mean_vs_enumeration", ErrorKind::Relative, 1e-12);
    for (m, pi) in small_grid()? {
        let x = SupportSpec::integers(m)?;
        for p in [0.3, 0.5, 0.8] {
            let d = Device::new(p, m)?;
            for n in 1..=4 {
                let closed = (formulas.variance_mean)(&d, &x, &pi, n)?;
                if let Some(e) = multinomial_variance_oracle(&d, &x, &pi, n)?.enumerated {
                    t.compare(closed, e);
                }
            }
        }
    }
    Ok(t.finish())
}

fn avg_variance_check(
    formulas: &Formulas,
    configs: &[(Device, PopulationModel)],
) -> Result<CheckResult> {
    let mut t = Tracker::new("avg_variance_pi_vs_lambda", ErrorKind::Relative, 1e-12);
    for (d, pi) in configs {
        let lambda = bayes_posterior_oracle(d, pi)?.response_marginal;
        let p = d.p();
        let want = lambda.iter().map(|l| l * (1.0 - l)).sum::<f64>() / (100.0 * p * p);
        t.compare((formulas.avg_variance_proportions)(d, pi, 100)?, want);
    }
    Ok(t.finish())
}

/// `m <= 3` populations on the 0.1-simplex grid.
fn small_grid() -> Result<Vec<(usize, PopulationModel)>> {
    let mut out = Vec::new();
    for m in 2..=3 {
        for pi in simplex_grid(m, 0.1)? {
            out.push((m, PopulationModel::new(pi)?));
        }
    }
    Ok(out)
}

fn unbiasedness_check() -> Result<CheckResult> {
    let mut t = Tracker::new("unbiasedness_enumeration", ErrorKind::Absolute, 1e-10);
    for (m, pi) in small_grid()? {
        let x = SupportSpec::integers(m)?;
        for p in [0.3, 0.5, 0.8] {
            let d = Device::new(p, m)?;
            let lambda = bayes_posterior_oracle(&d, &pi)?.response_marginal;
            for n in 1..=4 {
                let outcomes = enumerate_multinomial(&lambda, n).expect("small n");
                let mut mean = 0.0;
                let mut props = vec![0.0; m];
                for o in &outcomes {
                    let sample = ResponseSample::new(o.counts.clone())?;
                    mean += o.probability * estimate_mean(&sample, &d, &x)?;
                    let raw = estimate_proportions(&sample, &d)?.raw;
                    for (acc, r) in props.iter_mut().zip(raw) {
                        *acc += o.probability * r;
                    }
                }
                t.compare(mean, pi.mean(&x)?);
                for (got, want) in props.iter().zip(pi.probs()) {
                    t.compare(*got, *want);
                }
            }
        }
    }
    Ok(t.finish())
}

fn variance_monotonicity_check(formulas: &Formulas) -> Result<CheckResult> {
    // Violation = largest increase between consecutive p values.
    let mut t = Tracker::new("variance_decreasing_in_p", ErrorKind::Violation, 0.0);
    for (m, pi) in small_grid()? {
        let x = SupportSpec::integers(m)?;
        let mut prev: Option<(f64, f64)> = None;
        for k in 1..=19 {
            let d = Device::new(k as f64 / 20.0, m)?;
            let vm = (formulas.variance_mean)(&d, &x, &pi, 100)?;
            let vp = (formulas.avg_variance_proportions)(&d, &pi, 100)?;
            if let Some((pm, pp)) = prev {
                // Strict decrease: equality counts as a violation too.
                t.record(if vm < pm {
                    0.0
                } else {
                    vm - pm + f64::MIN_POSITIVE
                });
                t.record(if vp < pp {
                    0.0
                } else {
                    vp - pp + f64::MIN_POSITIVE
                });
            }
            prev = Some((vm, vp));
        }
    }
    Ok(t.finish())
}

fn theorem_checks(step: f64) -> Result<Vec<CheckResult>> {
    let mut guarantee_a = Tracker::new("alpha_guarantee_at_p0", ErrorKind::Violation, 1e-9);
    let mut tight_a = Tracker::new("alpha_tight_above_p0", ErrorKind::Violation, 0.0);
    let mut guarantee_b = Tracker::new("beta_guarantee_at_p0", ErrorKind::Violation, 1e-9);
    let mut tight_b = Tracker::new("beta_tight_above_p0", ErrorKind::Violation, 0.0);
    let mut round_trip = Tracker::new("guaranteed_bound_round_trip", ErrorKind::Absolute, 1e-10);

    for m in 2..=4 {
        for xi in [0.1, 0.2, 0.3, 0.4] {
            let p0 = p0_all_stigmatizing(m, xi)?;
            let d = Device::new(p0, m)?;
            round_trip.compare(guaranteed_alpha_bound(&d), xi);
            let adversary = alpha_adversary(m, xi);
            let best = simplex_grid_search(
                |pi| alpha_bruteforce(&d, pi).unwrap_or(f64::INFINITY),
                Direction::Maximize,
                m,
                step,
                None,
                std::slice::from_ref(&adversary),
            )?;
            guarantee_a.record((best.value - xi).max(0.0));

            let above = Device::new(p0 + 1e-6, m)?;
            let alpha = alpha_measure(&above, &PopulationModel::new(adversary)?)?.alpha;
            tight_a.record(if alpha > xi {
                0.0
            } else {
                xi - alpha + f64::MIN_POSITIVE
            });
        }
        for (xi, c) in [(0.1, 0.15), (0.05, 0.2), (0.2, 0.5)] {
            let p0 = p0_nonstigmatizing(m, xi, c)?;
            let d = Device::new(p0, m)?;
            round_trip.compare(guaranteed_beta_bound(&d, c)?, xi);
            let free = [0usize];
            let constraint = MassConstraint {
                indices: free.to_vec(),
                at_least: c,
            };
            let adversary = beta_adversary(m, c, 0, 1);
            let best = simplex_grid_search(
                |pi| beta_bruteforce(&d, pi, &free).unwrap_or(f64::NEG_INFINITY),
                Direction::Minimize,
                m,
                step,
                Some(&constraint),
                std::slice::from_ref(&adversary),
            )?;
            guarantee_b.record((xi - best.value).max(0.0));

            let above = Device::new(p0 + 1e-6, m)?;
            let beta = beta_measure(&above, &PopulationModel::new(adversary)?, &free)?.beta;
            tight_b.record(if beta < xi {
                0.0
            } else {
                beta - xi + f64::MIN_POSITIVE
            });
        }
    }
    Ok(vec![
        guarantee_a.finish(),
        tight_a.finish(),
        guarantee_b.finish(),
        tight_b.finish(),
        round_trip.finish(),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_formulas_pass_coarse_grid() {
        let report = run_verification(&Formulas::default(), 0.2).unwrap();
        assert!(report.passed, "{}", report.to_text());
    }

    #[test]
    fn printed_variance_sign_is_caught() {
        let formulas = Formulas {
            variance_mean: printed::variance_mean,
            ..Formulas::default()
        };
        let report = run_verification(&formulas, 0.25).unwrap();
        assert!(!report.passed);
        assert!(!report.check("variance_mean_vs_multinomial").unwrap().passed);
        assert!(report.check("posterior_vs_bayes").unwrap().passed);
    }

    #[test]
    fn printed_proportion_variance_sign_is_caught() {
        let formulas = Formulas {
            avg_variance_proportions: printed::avg_variance_proportions,
            ..Formulas::default()
        };
        let report = run_verification(&formulas, 0.25).unwrap();
        assert!(!report.check("avg_variance_pi_vs_lambda").unwrap().passed);
    }

    #[test]
    fn printed_forms_canonical_values() {
        let d = Device::new(0.5, 2).unwrap();
        let x = SupportSpec::integers(2).unwrap();
        let pi = PopulationModel::new(vec![0.3, 0.7]).unwrap();
        assert!((printed::variance_mean(&d, &x, &pi, 100).unwrap() - 0.0088).abs() < 1e-15);
        assert!((printed::avg_variance_proportions(&d, &pi, 100).unwrap() - 0.0492).abs() < 1e-15);
    }
}
