//! Domain types shared by every other module.
//!
//! All types validate their invariants at construction and are immutable
//! afterwards.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};

/// Half-width of the band around 1 inside which a probability vector is
/// silently renormalized instead of rejected.
pub const NORMALIZATION_BAND: f64 = 1e-9;

/// The known values `x_1..x_m` of the sensitive variable, each flagged as
/// stigmatizing or not.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSpec {
    values: Vec<f64>,
    stigmatizing: Vec<bool>,
}

impl SupportSpec {
    pub fn new(values: Vec<f64>, stigmatizing: Vec<bool>) -> Result<Self> {
        let m = values.len();
        if m < 2 {
            return Err(Error::SupportTooSmall(m));
        }
        if stigmatizing.len() != m {
            return Err(Error::StigmaLength {
                values: m,
                flags: stigmatizing.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        for i in 0..m {
            for j in (i + 1)..m {
                if values[i] == values[j] {
                    return Err(Error::DuplicateValue(i, j));
                }
            }
        }
        if !stigmatizing.iter().any(|&s| s) {
            return Err(Error::NoStigmatizingValue);
        }
        Ok(Self {
            values,
            stigmatizing,
        })
    }

    /// Support where every value is stigmatizing.
    pub fn all_stigmatizing(values: Vec<f64>) -> Result<Self> {
        let flags = vec![true; values.len()];
        Self::new(values, flags)
    }

    /// The integer support `0, 1, .., m-1`, all stigmatizing.
    pub fn integers(m: usize) -> Result<Self> {
        Self::all_stigmatizing((0..m).map(|i| i as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stigmatizing(&self) -> &[bool] {
        &self.stigmatizing
    }

    /// Indices of the non-stigmatizing values, in ascending order.
    pub fn nonstigmatizing_indices(&self) -> Vec<usize> {
        self.stigmatizing
            .iter()
            .enumerate()
            .filter(|(_, &s)| !s)
            .map(|(i, _)| i)
            .collect()
    }

    /// Unweighted mean of the support values.
    pub fn value_mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Population distribution `pi` over the support.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationModel {
    pi: Vec<f64>,
}

impl PopulationModel {
    /// Accepts a probability vector whose sum lies within
    /// [`NORMALIZATION_BAND`] of 1 and renormalizes it exactly.
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        let sum = checked_sum(&pi)?;
        if (sum - 1.0).abs() > NORMALIZATION_BAND {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Self::normalized(pi, sum))
    }

    /// Builds a distribution from arbitrary non-negative weights with a
    /// positive total.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let sum = checked_sum(&weights)?;
        if sum <= 0.0 {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Self::normalized(weights, sum))
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Self::from_weights(vec![1.0; m])
    }

    /// Point mass on index `k`.
    pub fn degenerate(m: usize, k: usize) -> Result<Self> {
        if k >= m {
            return Err(Error::IndexOutOfRange { index: k, m });
        }
        let mut pi = vec![0.0; m];
        pi[k] = 1.0;
        Self::new(pi)
    }

    fn normalized(mut pi: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            pi.iter_mut().for_each(|p| *p /= sum);
        }
        Self { pi }
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.pi
    }

    /// Population mean of X over `support`.
    pub fn mean(&self, support: &SupportSpec) -> Result<f64> {
        check_dim(self.len(), support.len())?;
        Ok(dot(support.values(), &self.pi))
    }

    /// Population variance of X over `support`.
    pub fn variance(&self, support: &SupportSpec) -> Result<f64> {
        let mu = self.mean(support)?;
        Ok(support
            .values()
            .iter()
            .zip(&self.pi)
            .map(|(x, p)| (x - mu) * (x - mu) * p)
            .sum())
    }

    /// Total mass on a set of indices.
    pub fn mass(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.pi[i]).sum()
    }
}

fn checked_sum(pi: &[f64]) -> Result<f64> {
    if let Some(i) = pi.iter().position(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidProbability(i));
    }
    Ok(pi.iter().sum())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The randomization device: with probability `p` the respondent reports
/// the truth, otherwise one of the `m` values chosen uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Device {
    p: f64,
    m: usize,
}

impl Device {
    pub fn new(p: f64, m: usize) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidDeviceParameter(p));
        }
        if m < 2 {
            return Err(Error::SupportTooSmall(m));
        }
        Ok(Self { p, m })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Probability of each forced-report outcome, `(1-p)/m`.
    pub fn forced_mass(&self) -> f64 {
        (1.0 - self.p) / self.m as f64
    }
}

/// Which privacy measure a survey is designed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    AllStigmatizing,
    NonstigmatizingSubset,
}

impl PolicyMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyMode::AllStigmatizing => "all_stigmatizing",
            PolicyMode::NonstigmatizingSubset => "nonstigmatizing_subset",
        }
    }
}

/// Privacy requirement stipulated by the survey designer.
#[derive(Debug, Clone, PartialEq)]
pub enum PrivacyPolicy {
    /// Require `alpha <= xi` for every population.
    AllStigmatizing { xi: f64 },
    /// Require `beta >= xi` for every population whose non-stigmatizing
    /// mass is at least `c`.
    NonstigmatizingSubset {
        xi: f64,
        c: f64,
        nonstigmatizing: Vec<usize>,
    },
}

impl PrivacyPolicy {
    pub fn all_stigmatizing(xi: f64) -> Result<Self> {
        check_xi(xi)?;
        Ok(Self::AllStigmatizing { xi })
    }

    pub fn nonstigmatizing_subset(
        xi: f64,
        c: f64,
        mut nonstigmatizing: Vec<usize>,
    ) -> Result<Self> {
        check_xi(xi)?;
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::COutOfRange(c));
        }
        if xi >= c {
            return Err(Error::XiNotBelowC { xi, c });
        }
        nonstigmatizing.sort_unstable();
        nonstigmatizing.dedup();
        if nonstigmatizing.is_empty() {
            return Err(Error::InvalidSubsetSize { t: 0, m: 0 });
        }
        Ok(Self::NonstigmatizingSubset {
            xi,
            c,
            nonstigmatizing,
        })
    }

    pub fn mode(&self) -> PolicyMode {
        match self {
            Self::AllStigmatizing { .. } => PolicyMode::AllStigmatizing,
            Self::NonstigmatizingSubset { .. } => PolicyMode::NonstigmatizingSubset,
        }
    }

    pub fn xi(&self) -> f64 {
        match self {
            Self::AllStigmatizing { xi } | Self::NonstigmatizingSubset { xi, .. } => *xi,
        }
    }

    pub fn c(&self) -> Option<f64> {
        match self {
            Self::AllStigmatizing { .. } => None,
            Self::NonstigmatizingSubset { c, .. } => Some(*c),
        }
    }

    pub fn nonstigmatizing(&self) -> &[usize] {
        match self {
            Self::AllStigmatizing { .. } => &[],
            Self::NonstigmatizingSubset {
                nonstigmatizing, ..
            } => nonstigmatizing,
        }
    }
}

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi < 1.0 {
        Ok(())
    } else {
        Err(Error::XiOutOfRange(xi))
    }
}

/// A policy that has been checked against a specific support.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedPolicy {
    policy: PrivacyPolicy,
    m: usize,
}

impl CheckedPolicy {
    pub fn policy(&self) -> &PrivacyPolicy {
        &self.policy
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of non-stigmatizing values (0 in all-stigmatizing mode).
    pub fn t(&self) -> usize {
        self.policy.nonstigmatizing().len()
    }
}

/// Checks that `policy` is consistent with the stigma flags of `support`.
pub fn validate_policy(policy: &PrivacyPolicy, support: &SupportSpec) -> Result<CheckedPolicy> {
    let m = support.len();
    let free = support.nonstigmatizing_indices();
    match policy {
        PrivacyPolicy::AllStigmatizing { xi } => {
            check_xi(*xi)?;
            if !free.is_empty() {
                return Err(Error::PolicyMismatch(format!(
                    "all-stigmatizing policy but values {free:?} are non-stigmatizing"
                )));
            }
        }
        PrivacyPolicy::NonstigmatizingSubset {
            xi,
            c,
            nonstigmatizing,
        } => {
            check_xi(*xi)?;
            if xi >= c {
                return Err(Error::XiNotBelowC { xi: *xi, c: *c });
            }
            if let Some(&index) = nonstigmatizing.iter().find(|&&i| i >= m) {
                return Err(Error::IndexOutOfRange { index, m });
            }
            let t = nonstigmatizing.len();
            if t == 0 || t >= m {
                return Err(Error::InvalidSubsetSize { t, m });
            }
            if *nonstigmatizing != free {
                return Err(Error::PolicyMismatch(format!(
                    "policy lists {nonstigmatizing:?} as non-stigmatizing, support flags {free:?}"
                )));
            }
        }
    }
    Ok(CheckedPolicy {
        policy: policy.clone(),
        m,
    })
}

/// Observed response counts from one survey.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseSample {
    counts: Vec<u64>,
    n: u64,
}

impl ResponseSample {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        Ok(Self { counts, n })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Sample proportions `w_i = counts_i / n`.
    pub fn proportions(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Diagnostic attached to an [`EstimateReport`].
pub const FLAG_RAW_OUT_OF_RANGE: &str = "RAW_OUT_OF_RANGE";

/// Point estimates computed from one [`ResponseSample`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub mu_hat: f64,
    pub pi_hat_raw: Vec<f64>,
    pub pi_hat_truncated: Vec<f64>,
    pub var_mu_plugin: f64,
    pub flags: Vec<String>,
}
