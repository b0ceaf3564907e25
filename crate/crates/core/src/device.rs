//! Response kernel of the randomization device and single-respondent draws.

use crate::error::{check_dim, Error, Result};
use crate::model::{Device, PopulationModel};
use crate::stream::Stream;

/// Conditional response probabilities; `prob(j, i)` is
/// `Prob(R = x_i | X = x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseKernel {
    m: usize,
    entries: Vec<f64>,
}

impl ResponseKernel {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn prob(&self, truth: usize, response: usize) -> f64 {
        self.entries[truth * self.m + response]
    }

    pub fn row(&self, truth: usize) -> &[f64] {
        &self.entries[truth * self.m..(truth + 1) * self.m]
    }
}

pub fn response_kernel(device: &Device) -> ResponseKernel {
    let m = device.m();
    let off = device.forced_mass();
    let diag = device.p() + off;
    let entries = (0..m * m)
        .map(|k| if k / m == k % m { diag } else { off })
        .collect();
    ResponseKernel { m, entries }
}

/// Maps one uniform variate `u` in `[0, 1)` to a response index.
///
/// `u < p` selects the truth card. Otherwise `u` is rescaled onto `[0, 1)`
/// and picks one of the `m` forced cards uniformly.
pub fn response_from_uniform(device: &Device, true_index: usize, u: f64) -> Result<usize> {
    let m = device.m();
    if true_index >= m {
        return Err(Error::IndexOutOfRange {
            index: true_index,
            m,
        });
    }
    let p = device.p();
    if u < p {
        return Ok(true_index);
    }
    let scaled = (u - p) / (1.0 - p);
    Ok(((scaled * m as f64) as usize).min(m - 1))
}

/// Draws one randomized response for a respondent whose true value is
/// `true_index`, consuming exactly one uniform from `stream`.
pub fn draw_response(device: &Device, true_index: usize, stream: &mut Stream) -> Result<usize> {
    let u = stream.uniform();
    response_from_uniform(device, true_index, u)
}

/// Marginal distribution of the response, `lambda_i = p*pi_i + (1-p)/m`.
pub fn response_distribution(device: &Device, population: &PopulationModel) -> Result<Vec<f64>> {
    check_dim(device.m(), population.len())?;
    let p = device.p();
    let off = device.forced_mass();
    Ok(population.probs().iter().map(|&pi| p * pi + off).collect())
}
