//! Brute-force reference computations.
//!
//! Nothing in this module calls the closed forms in `privacy`,
//! `estimation` or `design`; it only shares their input types. Callers pass
//! evaluators in as closures where a search needs one.

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::model::{Device, PopulationModel, SupportSpec};

/// Largest number of multinomial outcomes the enumeration oracle visits.
pub const ENUMERATION_CAP: u64 = 100_000;

/// Joint law of (true value, response) and the posterior obtained by
/// normalizing each response column.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesTable {
    /// `joint[i][j] = Prob(X = x_i, R = x_j)`.
    pub joint: Vec<Vec<f64>>,
    /// `posterior[i][j] = Prob(X = x_i | R = x_j)`.
    pub posterior: Vec<Vec<f64>>,
    /// Marginal response probabilities (column sums of `joint`).
    pub response_marginal: Vec<f64>,
}

pub fn bayes_posterior_oracle(device: &Device, population: &PopulationModel) -> Result<BayesTable> {
    check_dim(device.m(), population.len())?;
    let m = device.m();
    let p = device.p();
    let pi = population.probs();
    let kernel = |truth: usize, response: usize| {
        let delta = if truth == response { 1.0 } else { 0.0 };
        p * delta + (1.0 - p) / m as f64
    };
    let joint: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| pi[i] * kernel(i, j)).collect())
        .collect();
    let response_marginal: Vec<f64> = (0..m).map(|j| (0..m).map(|i| joint[i][j]).sum()).collect();
    let posterior = (0..m)
        .map(|i| (0..m).map(|j| joint[i][j] / response_marginal[j]).collect())
        .collect();
    Ok(BayesTable {
        joint,
        posterior,
        response_marginal,
    })
}

/// `max_{i,j} |Prob(X = x_i | R = x_j) - pi_i|` from the Bayes table.
pub fn alpha_bruteforce(device: &Device, population: &PopulationModel) -> Result<f64> {
    let table = bayes_posterior_oracle(device, population)?;
    let pi = population.probs();
    Ok(table
        .posterior
        .iter()
        .zip(pi)
        .flat_map(|(row, &prior)| row.iter().map(move |q| (q - prior).abs()))
        .fold(0.0, f64::max))
}

/// `min_j Prob(X in nonstigmatizing | R = x_j)` from the Bayes table.
pub fn beta_bruteforce(
    device: &Device,
    population: &PopulationModel,
    nonstigmatizing: &[usize],
) -> Result<f64> {
    let table = bayes_posterior_oracle(device, population)?;
    Ok((0..device.m())
        .map(|j| {
            nonstigmatizing
                .iter()
                .map(|&i| table.posterior[i][j])
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min))
}

/// One outcome of a multinomial experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub counts: Vec<u64>,
    pub probability: f64,
}

/// Every count vector of `n` draws over `probs.len()` cells with its
/// multinomial probability. `None` when the outcome count exceeds
/// [`ENUMERATION_CAP`].
pub fn enumerate_multinomial(probs: &[f64], n: u64) -> Option<Vec<Outcome>> {
    let m = probs.len();
    if m == 0 {
        return Some(Vec::new());
    }
    let size = (n + 1).checked_pow(m as u32 - 1)?;
    if size > ENUMERATION_CAP {
        return None;
    }
    let log_fact: Vec<f64> = (0..=n)
        .scan(0.0, |acc, k| {
            if k > 0 {
                *acc += (k as f64).ln();
            }
            Some(*acc)
        })
        .collect();
    let mut out = Vec::new();
    let mut counts = vec![0u64; m];
    compositions(n, 0, &mut counts, &mut |c| {
        let mut log_p = log_fact[n as usize];
        let mut zero = false;
        for (&k, &q) in c.iter().zip(probs) {
            log_p -= log_fact[k as usize];
            if k > 0 {
                if q == 0.0 {
                    zero = true;
                } else {
                    log_p += k as f64 * q.ln();
                }
            }
        }
        out.push(Outcome {
            counts: c.to_vec(),
            probability: if zero { 0.0 } else { log_p.exp() },
        });
    });
    Some(out)
}

fn compositions(remaining: u64, pos: usize, counts: &mut [u64], visit: &mut impl FnMut(&[u64])) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        visit(counts);
        return;
    }
    for k in 0..=remaining {
        counts[pos] = k;
        compositions(remaining - k, pos + 1, counts, visit);
    }
}

/// Exact `Var(mu_hat)` computed two ways from the response marginal of the
/// Bayes table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultinomialVariance {
    /// `(1/(n p^2)) (sum x_i^2 l_i - (sum x_i l_i)^2)`.
    pub covariance_identity: f64,
    /// `Var(sum x_i w_i) / p^2` summed over every outcome, when within the cap.
    pub enumerated: Option<f64>,
}

pub fn multinomial_variance_oracle(
    device: &Device,
    support: &SupportSpec,
    population: &PopulationModel,
    n: u64,
) -> Result<MultinomialVariance> {
    check_dim(device.m(), support.len())?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let lambda = bayes_posterior_oracle(device, population)?.response_marginal;
    let x = support.values();
    let p = device.p();
    let first: f64 = x.iter().zip(&lambda).map(|(xi, l)| xi * l).sum();
    let second: f64 = x.iter().zip(&lambda).map(|(xi, l)| xi * xi * l).sum();
    let covariance_identity = (second - first * first) / (n as f64 * p * p);

    let enumerated = enumerate_multinomial(&lambda, n).map(|outcomes| {
        let linear = |o: &Outcome| {
            o.counts
                .iter()
                .zip(x)
                .map(|(&k, xi)| xi * k as f64 / n as f64)
                .sum::<f64>()
        };
        let mean: f64 = outcomes.iter().map(|o| o.probability * linear(o)).sum();
        let var: f64 = outcomes
            .iter()
            .map(|o| o.probability * (linear(o) - mean).powi(2))
            .sum();
        var / (p * p)
    });
    Ok(MultinomialVariance {
        covariance_identity,
        enumerated,
    })
}

/// Whether a grid search maximizes or minimizes its objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Lower bound on the population mass held by `indices`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassConstraint {
    pub indices: Vec<usize>,
    pub at_least: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridExtremum {
    pub value: f64,
    pub witness: Vec<f64>,
    pub points: usize,
}

/// All points `k / K` of the `m`-simplex with `K = round(1 / step)`.
pub fn simplex_grid(m: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::InvalidGridStep(step));
    }
    let k = (1.0 / step).round() as u64;
    let mut points = Vec::new();
    let mut counts = vec![0u64; m];
    compositions(k, 0, &mut counts, &mut |c| {
        points.push(c.iter().map(|&v| v as f64 / k as f64).collect());
    });
    Ok(points)
}

/// Exhaustive search of `objective` over the simplex grid plus the supplied
/// `adversarial` points, restricted to those satisfying `constraint`.
///
/// Grid points are evaluated in parallel and reduced in grid order, so the
/// reported witness is the first extremal point regardless of scheduling.
pub fn simplex_grid_search<F>(
    objective: F,
    direction: Direction,
    m: usize,
    step: f64,
    constraint: Option<&MassConstraint>,
    adversarial: &[Vec<f64>],
) -> Result<GridExtremum>
where
    F: Fn(&PopulationModel) -> f64 + Sync,
{
    if let Some(c) = constraint {
        if c.at_least > 1.0 {
            return Err(Error::InfeasibleConstraint(c.at_least));
        }
        if let Some(&index) = c.indices.iter().find(|&&i| i >= m) {
            return Err(Error::IndexOutOfRange { index, m });
        }
    }
    let mut candidates = simplex_grid(m, step)?;
    for point in adversarial {
        check_dim(m, point.len())?;
        candidates.push(point.clone());
    }
    let feasible = |pi: &[f64]| match constraint {
        None => true,
        Some(c) => c.indices.iter().map(|&i| pi[i]).sum::<f64>() >= c.at_least - 1e-12,
    };
    let values: Vec<Option<(f64, Vec<f64>)>> = candidates
        .into_par_iter()
        .map(|pi| {
            if !feasible(&pi) {
                return None;
            }
            let model = PopulationModel::new(pi).ok()?;
            let value = objective(&model);
            Some((value, model.probs().to_vec()))
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut points = 0;
    for (value, pi) in values.into_iter().flatten() {
        points += 1;
        let better = match (&best, direction) {
            (None, _) => true,
            (Some((b, _)), Direction::Maximize) => value > *b,
            (Some((b, _)), Direction::Minimize) => value < *b,
        };
        if better {
            best = Some((value, pi));
        }
    }
    let (value, witness) = best.ok_or(Error::InfeasibleConstraint(
        constraint.map_or(0.0, |c| c.at_least),
    ))?;
    Ok(GridExtremum {
        value,
        witness,
        points,
    })
}

/// Population `((1-xi)/2, (1+xi)/2, 0, ..)` that makes the all-stigmatizing
/// guarantee tight.
pub fn alpha_adversary(m: usize, xi: f64) -> Vec<f64> {
    let mut pi = vec![0.0; m];
    pi[0] = (1.0 - xi) / 2.0;
    pi[1] = (1.0 + xi) / 2.0;
    pi
}

/// Population with mass exactly `c` on the first non-stigmatizing value and
/// `1 - c` on `stigmatizing`.
pub fn beta_adversary(m: usize, c: f64, nonstigmatizing: usize, stigmatizing: usize) -> Vec<f64> {
    let mut pi = vec![0.0; m];
    pi[nonstigmatizing] = c;
    pi[stigmatizing] = 1.0 - c;
    pi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_binary_posterior() {
        let d = Device::new(0.5, 2).unwrap();
        let t = bayes_posterior_oracle(&d, &PopulationModel::uniform(2).unwrap()).unwrap();
        assert!((t.posterior[0][0] - 0.75).abs() < 1e-15);
        assert!((t.posterior[1][1] - 0.75).abs() < 1e-15);
        let total: f64 = t.joint.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_variance_values() {
        let d = Device::new(0.5, 2).unwrap();
        let x = SupportSpec::integers(2).unwrap();
        let pi = PopulationModel::new(vec![0.3, 0.7]).unwrap();
        let v = multinomial_variance_oracle(&d, &x, &pi, 100).unwrap();
        assert!((v.covariance_identity - 0.0096).abs() < 1e-15);
        assert_eq!(v.enumerated.map(|e| (e - 0.0096).abs() < 1e-15), Some(true));

        let d = Device::new(0.5, 3).unwrap();
        let x = SupportSpec::integers(3).unwrap();
        let pi = PopulationModel::new(vec![0.5, 0.3, 0.2]).unwrap();
        let v = multinomial_variance_oracle(&d, &x, &pi, 100).unwrap();
        assert!((v.covariance_identity - 0.0264333).abs() < 1e-7);
    }

    #[test]
    fn enumeration_agrees_with_identity_small_n() {
        let d = Device::new(0.5, 2).unwrap();
        let x = SupportSpec::integers(2).unwrap();
        let pi = PopulationModel::new(vec![0.3, 0.7]).unwrap();
        let v = multinomial_variance_oracle(&d, &x, &pi, 3).unwrap();
        assert!((v.enumerated.unwrap() - v.covariance_identity).abs() < 1e-15);
    }

    #[test]
    fn enumeration_probabilities_sum_to_one() {
        let outcomes = enumerate_multinomial(&[0.2, 0.5, 0.3], 4).unwrap();
        assert_eq!(outcomes.len(), 15);
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(outcomes.iter().all(|o| o.counts.iter().sum::<u64>() == 4));
    }

    #[test]
    fn enumeration_respects_cap() {
        assert!(enumerate_multinomial(&[0.5, 0.5], 99_999).is_some());
        assert!(enumerate_multinomial(&[0.2, 0.3, 0.5], 1000).is_none());
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(simplex_grid(3, 0.01).unwrap().len(), 5151);
        assert_eq!(simplex_grid(2, 0.5).unwrap().len(), 3);
        assert!(simplex_grid(3, 0.0).is_err());
        assert!(simplex_grid(3, 0.6).is_err());
    }

    #[test]
    fn grid_search_finds_known_extremum() {
        // Maximize pi_0 * pi_1 on the 3-simplex: 0.25 at (0.5, 0.5, 0).
        let best = simplex_grid_search(
            |pi| pi.probs()[0] * pi.probs()[1],
            Direction::Maximize,
            3,
            0.05,
            None,
            &[],
        )
        .unwrap();
        assert!((best.value - 0.25).abs() < 1e-15);
        assert_eq!(best.witness, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn grid_search_constraint() {
        let constraint = MassConstraint {
            indices: vec![0],
            at_least: 0.3,
        };
        let best = simplex_grid_search(
            |pi| pi.probs()[0],
            Direction::Minimize,
            3,
            0.1,
            Some(&constraint),
            &[],
        )
        .unwrap();
        assert!((best.value - 0.3).abs() < 1e-12);

        let infeasible = MassConstraint {
            indices: vec![0],
            at_least: 1.2,
        };
        assert_eq!(
            simplex_grid_search(|_| 0.0, Direction::Minimize, 3, 0.1, Some(&infeasible), &[]),
            Err(Error::InfeasibleConstraint(1.2))
        );
    }

    #[test]
    fn adversaries() {
        assert_eq!(alpha_adversary(3, 0.1), vec![0.45, 0.55, 0.0]);
        assert_eq!(beta_adversary(3, 0.15, 0, 1), vec![0.15, 0.85, 0.0]);
    }
}
