//! Revealing probabilities and the two jeopardy measures.
//!
//! `alpha` is the largest gap between a prior probability `pi_i` and the
//! posterior `Prob(X = x_i | R = x_j)` over all pairs; it applies when every
//! value is stigmatizing. `beta` is the smallest posterior mass on the
//! non-stigmatizing values over all responses; it applies when some values
//! carry no stigma.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::model::{CheckedPolicy, Device, PolicyMode, PopulationModel, PrivacyPolicy};

/// Values within this distance of the extremum are reported as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Posterior matrix; `get(i, j)` is `Prob(X = x_i | R = x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    m: usize,
    entries: Vec<f64>,
}

impl Posterior {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, truth: usize, response: usize) -> f64 {
        self.entries[truth * self.m + response]
    }

    /// Row-major `m x m` copy, rows indexed by the true value.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.m).map(<[f64]>::to_vec).collect()
    }

    /// Posterior mass on `indices` given response `response`.
    pub fn mass(&self, indices: &[usize], response: usize) -> f64 {
        indices.iter().map(|&i| self.get(i, response)).sum()
    }
}

/// Closed-form Bayes posterior
/// `(p d_ij + (1-p)/m) pi_i / (p pi_j + (1-p)/m)`.
pub fn revealing_probabilities(device: &Device, population: &PopulationModel) -> Result<Posterior> {
    check_dim(device.m(), population.len())?;
    let m = device.m();
    let p = device.p();
    let off = device.forced_mass();
    let pi = population.probs();
    let mut entries = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let kernel = if i == j { p + off } else { off };
            entries.push(kernel * pi[i] / (p * pi[j] + off));
        }
    }
    Ok(Posterior { m, entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMeasure {
    pub alpha: f64,
    /// All `(i, j)` pairs attaining `alpha`, in row-major order.
    pub argmax: Vec<(usize, usize)>,
    /// `alpha_ij = |posterior(i, j) - pi_i|`, row-major.
    pub gaps: Vec<Vec<f64>>,
}

pub fn alpha_measure(device: &Device, population: &PopulationModel) -> Result<AlphaMeasure> {
    let posterior = revealing_probabilities(device, population)?;
    let pi = population.probs();
    let m = device.m();
    let gaps: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| (posterior.get(i, j) - pi[i]).abs())
                .collect()
        })
        .collect();
    let alpha = gaps.iter().flatten().copied().fold(0.0, f64::max);
    let argmax = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .filter(|&(i, j)| alpha - gaps[i][j] <= TIE_TOLERANCE)
        .collect();
    debug_assert!((alpha - alpha_diagonal(device, population)?).abs() <= 1e-12);
    Ok(AlphaMeasure {
        alpha,
        argmax,
        gaps,
    })
}

/// `alpha` through the diagonal reduction
/// `max_j pi_j (1 - pi_j) / (pi_j + (1-p)/(m p))`.
pub fn alpha_diagonal(device: &Device, population: &PopulationModel) -> Result<f64> {
    check_dim(device.m(), population.len())?;
    let shift = device.forced_mass() / device.p();
    Ok(population
        .probs()
        .iter()
        .map(|&q| q * (1.0 - q) / (q + shift))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaMeasure {
    pub beta: f64,
    /// Responses attaining `beta`, ascending.
    pub argmin: Vec<usize>,
    /// Posterior non-stigmatizing mass for each response.
    pub masses: Vec<f64>,
}

/// Smallest posterior probability, over responses, that the respondent
/// holds one of the `nonstigmatizing` values.
pub fn beta_measure(
    device: &Device,
    population: &PopulationModel,
    nonstigmatizing: &[usize],
) -> Result<BetaMeasure> {
    let m = device.m();
    let t = nonstigmatizing.len();
    if t == 0 || t >= m {
        return Err(Error::InvalidSubsetSize { t, m });
    }
    if let Some(&index) = nonstigmatizing.iter().find(|&&i| i >= m) {
        return Err(Error::IndexOutOfRange { index, m });
    }
    let posterior = revealing_probabilities(device, population)?;
    let masses: Vec<f64> = (0..m).map(|j| posterior.mass(nonstigmatizing, j)).collect();
    let beta = masses.iter().copied().fold(f64::INFINITY, f64::min);
    let argmin = (0..m)
        .filter(|&j| masses[j] - beta <= TIE_TOLERANCE)
        .collect();
    Ok(BetaMeasure {
        beta,
        argmin,
        masses,
    })
}

/// Smallest `xi` whose all-stigmatizing guarantee admits this device:
/// every population has `alpha <= guaranteed_alpha_bound(device)`.
///
/// Solves `(1 - xi)^2 = k xi` with `k = 4(1-p)/(m p)` for the root in
/// `(0, 1)`.
pub fn guaranteed_alpha_bound(device: &Device) -> f64 {
    let k = 4.0 * (1.0 - device.p()) / (device.m() as f64 * device.p());
    let b = 2.0 + k;
    // Roots multiply to 1; take the small one without cancellation.
    2.0 / (b + (b * b - 4.0).sqrt())
}

/// Largest `xi` guaranteed by this device when the non-stigmatizing mass is
/// known to be at least `c`: every such population has `beta >= bound`.
pub fn guaranteed_beta_bound(device: &Device, c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::COutOfRange(c));
    }
    let p = device.p();
    let m = device.m() as f64;
    Ok(c / (1.0 + m * p * (1.0 - c) / (1.0 - p)))
}

/// Everything the CLI reports about a device/population pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyReport {
    pub mode: PolicyMode,
    pub p: f64,
    pub alpha: Option<f64>,
    pub alpha_argmax: Option<Vec<[usize; 2]>>,
    pub beta: Option<f64>,
    pub beta_argmin: Option<Vec<usize>>,
    pub posterior: Vec<Vec<f64>>,
    pub guaranteed_bound: f64,
}

/// Computes the measure that matches `policy` and the corresponding
/// population-free guarantee.
pub fn privacy_report(
    device: &Device,
    population: &PopulationModel,
    policy: &CheckedPolicy,
) -> Result<PrivacyReport> {
    check_dim(policy.m(), device.m())?;
    let posterior = revealing_probabilities(device, population)?.to_rows();
    let mut report = PrivacyReport {
        mode: policy.policy().mode(),
        p: device.p(),
        alpha: None,
        alpha_argmax: None,
        beta: None,
        beta_argmin: None,
        posterior,
        guaranteed_bound: 0.0,
    };
    match policy.policy() {
        PrivacyPolicy::AllStigmatizing { .. } => {
            let a = alpha_measure(device, population)?;
            report.alpha = Some(a.alpha);
            report.alpha_argmax = Some(a.argmax.iter().map(|&(i, j)| [i, j]).collect());
            report.guaranteed_bound = guaranteed_alpha_bound(device);
        }
        PrivacyPolicy::NonstigmatizingSubset {
            c, nonstigmatizing, ..
        } => {
            let b = beta_measure(device, population, nonstigmatizing)?;
            report.beta = Some(b.beta);
            report.beta_argmin = Some(b.argmin);
            report.guaranteed_bound = guaranteed_beta_bound(device, *c)?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn pop(pi: &[f64]) -> PopulationModel {
        PopulationModel::new(pi.to_vec()).unwrap()
    }

    #[test]
    fn posterior_binary_example() {
        let d = Device::new(0.5, 2).unwrap();
        let post = revealing_probabilities(&d, &pop(&[0.3, 0.7])).unwrap();
        assert!(close(post.get(0, 0), 0.5625, 1e-15));
        for j in 0..2 {
            assert!(close(post.get(0, j) + post.get(1, j), 1.0, 1e-12));
        }
    }

    #[test]
    fn posterior_degenerate_and_uniform() {
        let d = Device::new(0.35, 4).unwrap();
        let post =
            revealing_probabilities(&d, &PopulationModel::degenerate(4, 2).unwrap()).unwrap();
        assert!((0..4).all(|j| close(post.get(2, j), 1.0, 1e-15)));

        let post = revealing_probabilities(&d, &PopulationModel::uniform(4).unwrap()).unwrap();
        let diag = post.get(0, 0);
        assert!((1..4).all(|j| close(post.get(j, j), diag, 1e-15)));
    }

    #[test]
    fn alpha_binary_example() {
        let d = Device::new(0.5, 2).unwrap();
        let a = alpha_measure(&d, &pop(&[0.3, 0.7])).unwrap();
        assert!(close(a.alpha, 0.2625, 1e-15));
        // With m = 2 the off-diagonal gap in column 0 ties with the diagonal.
        assert_eq!(a.argmax, vec![(0, 0), (1, 0)]);
        assert!(close(a.gaps[1][1], 0.175, 1e-15));
        assert!(close(a.gaps[0][1], 0.175, 1e-15));
    }

    #[test]
    fn alpha_limits() {
        let d = Device::new(0.6, 3).unwrap();
        let a = alpha_measure(&d, &PopulationModel::degenerate(3, 1).unwrap()).unwrap();
        assert_eq!(a.alpha, 0.0);

        let d = Device::new(1e-12, 3).unwrap();
        let a = alpha_measure(&d, &pop(&[0.2, 0.5, 0.3])).unwrap();
        assert!(a.alpha < 1e-10);
    }

    #[test]
    fn beta_example() {
        let d = Device::new(0.2, 3).unwrap();
        let b = beta_measure(&d, &pop(&[0.5, 0.3, 0.2]), &[0]).unwrap();
        assert!(close(b.beta, 0.408163, 1e-6), "{}", b.beta);
        assert_eq!(b.argmin, vec![1]);
    }

    #[test]
    fn beta_limits() {
        let d = Device::new(0.4, 3).unwrap();
        let b = beta_measure(&d, &PopulationModel::degenerate(3, 0).unwrap(), &[0]).unwrap();
        assert!(close(b.beta, 1.0, 1e-15));

        let d = Device::new(1e-12, 3).unwrap();
        let b = beta_measure(&d, &pop(&[0.5, 0.3, 0.2]), &[0]).unwrap();
        assert!(close(b.beta, 0.5, 1e-10));
    }

    #[test]
    fn beta_rejects_bad_subsets() {
        let d = Device::new(0.4, 3).unwrap();
        let pi = pop(&[0.5, 0.3, 0.2]);
        assert!(beta_measure(&d, &pi, &[]).is_err());
        assert!(beta_measure(&d, &pi, &[0, 1, 2]).is_err());
        assert!(beta_measure(&d, &pi, &[5]).is_err());
    }

    #[test]
    fn alpha_bound_round_trips_table_values() {
        let d = Device::new(0.1099, 4).unwrap();
        assert!(close(guaranteed_alpha_bound(&d), 0.1, 5e-4));
        let d = Device::new(0.1413, 3).unwrap();
        assert!(close(guaranteed_alpha_bound(&d), 0.1, 5e-4));
    }

    #[test]
    fn beta_bound_round_trip_and_limit() {
        let d = Device::new(0.1639, 3).unwrap();
        assert!(close(guaranteed_beta_bound(&d, 0.15).unwrap(), 0.1, 5e-4));
        let d = Device::new(1e-12, 3).unwrap();
        assert!(close(guaranteed_beta_bound(&d, 0.15).unwrap(), 0.15, 1e-10));
        assert!(guaranteed_beta_bound(&d, 1.0).is_err());
    }
}
