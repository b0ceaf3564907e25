//! Unbiased estimation of the population mean and class proportions from
//! randomized responses, and the exact variances of those estimators.
//!
//! The closed forms used here are the algebraically verified ones:
//!
//! ```text
//! Var(mu_hat)      = (1/(n p^2)) { p s2 + (1-p)(1/m) sum (x_i - xbar)^2 + p(1-p)(mu - xbar)^2 }
//! sum Var(pi_hat)  = (1/n) { 1/p^2 - sum pi_i^2 - (1/m)(1/p^2 - 1) }
//! ```
//!
//! Both are pinned against the multinomial covariance identity in the test
//! suite and by `rrkit verify`.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::model::{
    dot, Device, EstimateReport, PopulationModel, ResponseSample, SupportSpec,
    FLAG_RAW_OUT_OF_RANGE,
};

/// Raw (unbiased) and truncated proportion estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionEstimates {
    pub raw: Vec<f64>,
    pub truncated: Vec<f64>,
}

impl ProportionEstimates {
    pub fn raw_out_of_range(&self) -> bool {
        self.raw.iter().any(|p| !(0.0..=1.0).contains(p))
    }
}

/// Theoretical variances for a design at sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceReport {
    pub var_mu: f64,
    pub avg_var_pi: f64,
    pub n: u64,
}

/// `pi_hat_i = (w_i - (1-p)/m) / p`, plus a copy clamped to `[0, 1]` and
/// renormalized onto the simplex.
pub fn estimate_proportions(
    sample: &ResponseSample,
    device: &Device,
) -> Result<ProportionEstimates> {
    check_dim(device.m(), sample.len())?;
    let raw = raw_proportions(&sample.proportions(), device);
    let truncated = truncate(&raw);
    Ok(ProportionEstimates { raw, truncated })
}

fn raw_proportions(w: &[f64], device: &Device) -> Vec<f64> {
    let p = device.p();
    let off = device.forced_mass();
    w.iter().map(|wi| (wi - off) / p).collect()
}

fn truncate(raw: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = raw.iter().map(|p| p.clamp(0.0, 1.0)).collect();
    let total: f64 = clamped.iter().sum();
    // Raw estimates sum to 1, so at least one clamped entry is positive.
    clamped.into_iter().map(|p| p / total).collect()
}

/// `mu_hat = sum x_i pi_hat_i` using the raw proportion estimates.
pub fn estimate_mean(
    sample: &ResponseSample,
    device: &Device,
    support: &SupportSpec,
) -> Result<f64> {
    check_dim(device.m(), sample.len())?;
    check_dim(device.m(), support.len())?;
    Ok(mean_from_proportions(
        &sample.proportions(),
        device,
        support,
    ))
}

pub(crate) fn mean_from_proportions(w: &[f64], device: &Device, support: &SupportSpec) -> f64 {
    dot(support.values(), &raw_proportions(w, device))
}

/// Exact variance of `mu_hat` under SRSWR of size `n`.
pub fn variance_mean_theoretical(
    device: &Device,
    support: &SupportSpec,
    population: &PopulationModel,
    n: u64,
) -> Result<f64> {
    check_dim(device.m(), support.len())?;
    check_dim(device.m(), population.len())?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
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
    let shift = (mu - xbar).powi(2);
    Ok((p * s2 + (1.0 - p) * spread + p * (1.0 - p) * shift) / (n as f64 * p * p))
}

/// Sum over classes of `Var(pi_hat_i)` under SRSWR of size `n`.
pub fn avg_variance_proportions_theoretical(
    device: &Device,
    population: &PopulationModel,
    n: u64,
) -> Result<f64> {
    check_dim(device.m(), population.len())?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let p = device.p();
    let inv_p2 = 1.0 / (p * p);
    let sum_sq: f64 = population.probs().iter().map(|q| q * q).sum();
    let m = device.m() as f64;
    Ok((inv_p2 - sum_sq - (inv_p2 - 1.0) / m) / n as f64)
}

/// Both theoretical variances at once.
pub fn variance_report(
    device: &Device,
    support: &SupportSpec,
    population: &PopulationModel,
    n: u64,
) -> Result<VarianceReport> {
    Ok(VarianceReport {
        var_mu: variance_mean_theoretical(device, support, population, n)?,
        avg_var_pi: avg_variance_proportions_theoretical(device, population, n)?,
        n,
    })
}

/// Plug-in estimate of `Var(mu_hat)`: the multinomial form with observed
/// proportions in place of the response probabilities. No bias correction.
pub fn variance_mean_plugin(
    sample: &ResponseSample,
    device: &Device,
    support: &SupportSpec,
) -> Result<f64> {
    check_dim(device.m(), sample.len())?;
    check_dim(device.m(), support.len())?;
    let w = sample.proportions();
    let x = support.values();
    let mut acc = 0.0;
    for i in 0..w.len() {
        acc += x[i] * x[i] * w[i] * (1.0 - w[i]);
        for j in 0..w.len() {
            if i != j {
                acc -= x[i] * x[j] * w[i] * w[j];
            }
        }
    }
    let p = device.p();
    Ok(acc / (sample.n() as f64 * p * p))
}

/// Full point-estimate report for one sample.
pub fn estimate(
    sample: &ResponseSample,
    device: &Device,
    support: &SupportSpec,
) -> Result<EstimateReport> {
    let props = estimate_proportions(sample, device)?;
    check_dim(device.m(), support.len())?;
    let mu_hat = dot(support.values(), &props.raw);
    let var_mu_plugin = variance_mean_plugin(sample, device, support)?;
    let mut flags = Vec::new();
    if props.raw_out_of_range() {
        flags.push(FLAG_RAW_OUT_OF_RANGE.to_string());
    }
    Ok(EstimateReport {
        mu_hat,
        pi_hat_raw: props.raw,
        pi_hat_truncated: props.truncated,
        var_mu_plugin,
        flags,
    })
}
