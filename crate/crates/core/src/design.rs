//! Choosing the device parameter.
//!
//! Both estimator variances decrease in `p`, and each privacy guarantee holds
//! for every admissible population exactly when `p <= p0`. The efficient
//! design is therefore `p = p0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CheckedPolicy, Device, PolicyMode, PrivacyPolicy};

/// Largest `p` with `alpha <= xi` for every population on `m` values:
/// `1 / (1 + (m/xi) ((1-xi)/2)^2)`.
pub fn p0_all_stigmatizing(m: usize, xi: f64) -> Result<f64> {
    check_m(m)?;
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::XiOutOfRange(xi));
    }
    let half_gap = (1.0 - xi) / 2.0;
    Ok(1.0 / (1.0 + (m as f64 / xi) * half_gap * half_gap))
}

/// Largest `p` with `beta >= xi` for every population whose
/// non-stigmatizing mass is at least `c`:
/// `((c-xi)/m) / ((c-xi)/m + xi(1-c))`.
pub fn p0_nonstigmatizing(m: usize, xi: f64, c: f64) -> Result<f64> {
    check_m(m)?;
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::XiOutOfRange(xi));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::COutOfRange(c));
    }
    if xi >= c {
        return Err(Error::XiNotBelowC { xi, c });
    }
    let a = (c - xi) / m as f64;
    Ok(a / (a + xi * (1.0 - c)))
}

fn check_m(m: usize) -> Result<()> {
    if m < 2 {
        Err(Error::SupportTooSmall(m))
    } else {
        Ok(())
    }
}

/// Statement of the guarantee a designed device carries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignCertificate {
    pub p0: f64,
    pub mode: PolicyMode,
    pub xi: f64,
    pub c: Option<f64>,
    pub m: usize,
    pub t: usize,
    pub guarantee_statement: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub device: Device,
    pub certificate: DesignCertificate,
}

/// Device at the privacy boundary `p = p0` for a checked policy.
pub fn design_device(policy: &CheckedPolicy) -> Result<Design> {
    let m = policy.m();
    let t = policy.t();
    let (p0, statement) = match policy.policy() {
        PrivacyPolicy::AllStigmatizing { xi } => (
            p0_all_stigmatizing(m, *xi)?,
            format!("alpha <= {xi} for every population distribution over the {m} values"),
        ),
        PrivacyPolicy::NonstigmatizingSubset { xi, c, .. } => (
            p0_nonstigmatizing(m, *xi, *c)?,
            format!(
                "beta >= {xi} for every population distribution over the {m} values \
                 whose mass on the {t} non-stigmatizing value(s) is at least {c}"
            ),
        ),
    };
    let device = Device::new(p0, m)?;
    Ok(Design {
        device,
        certificate: DesignCertificate {
            p0,
            mode: policy.policy().mode(),
            xi: policy.policy().xi(),
            c: policy.policy().c(),
            m,
            t,
            guarantee_statement: statement,
        },
    })
}

/// Rounds to `decimals` places, ties to even.
pub fn round_half_even(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round_ties_even() / scale
}

/// Grid of all-stigmatizing `p0` values, rounded to 4 decimals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P0Table {
    pub m: Vec<usize>,
    pub xi: Vec<f64>,
    /// `p0[r][k]` is the entry for `m[r]` and `xi[k]`.
    pub p0: Vec<Vec<f64>>,
}

pub fn p0_table(m_values: &[usize], xi_values: &[f64]) -> Result<P0Table> {
    let p0 = m_values
        .iter()
        .map(|&m| {
            xi_values
                .iter()
                .map(|&xi| p0_all_stigmatizing(m, xi).map(|p| round_half_even(p, 4)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(P0Table {
        m: m_values.to_vec(),
        xi: xi_values.to_vec(),
        p0,
    })
}

impl P0Table {
    /// CSV with a header row of `xi` values and `m` in the first column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m");
        for xi in &self.xi {
            out.push(',');
            out.push_str(&xi.to_string());
        }
        out.push('\n');
        for (m, row) in self.m.iter().zip(&self.p0) {
            out.push_str(&m.to_string());
            for p in row {
                out.push_str(&format!(",{p:.4}"));
            }
            out.push('\n');
        }
        out
    }
}
