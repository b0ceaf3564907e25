//! The survey definition document shared by every CLI subcommand.
//!
//! ```json
//! {
//!   "values": [0, 1, 2],
//!   "stigmatizing": [false, true, true],
//!   "pi": [0.5, 0.3, 0.2],
//!   "p": 0.2,
//!   "privacy": { "mode": "nonstigmatizing_subset", "xi": 0.1, "c": 0.15, "nonstigmatizing": [0] }
//! }
//! ```
//!
//! `pi`, `p` and `privacy` are optional; commands that need them report a
//! validation error when they are missing. `stigmatizing` defaults to all
//! values stigmatizing.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{
    validate_policy, CheckedPolicy, Device, PopulationModel, PrivacyPolicy, SupportSpec,
};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyDocument {
    pub values: Vec<f64>,
    #[serde(default)]
    pub stigmatizing: Option<Vec<bool>>,
    #[serde(default)]
    pub pi: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub privacy: Option<PrivacyDocument>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeDocument {
    #[serde(alias = "AllStigmatizing")]
    AllStigmatizing,
    #[serde(alias = "NonStigmatizingSubset", alias = "NonstigmatizingSubset")]
    NonstigmatizingSubset,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyDocument {
    pub mode: ModeDocument,
    pub xi: f64,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub nonstigmatizing: Option<Vec<usize>>,
}

/// A document whose pieces have been turned into validated domain types.
#[derive(Debug, Clone, PartialEq)]
pub struct Survey {
    pub support: SupportSpec,
    pub population: Option<PopulationModel>,
    pub p: Option<f64>,
    pub policy: Option<CheckedPolicy>,
}

impl SurveyDocument {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn into_survey(self) -> Result<Survey> {
        let m = self.values.len();
        let flags = self.stigmatizing.unwrap_or_else(|| vec![true; m]);
        let support = SupportSpec::new(self.values, flags)?;
        let population = self
            .pi
            .map(|pi| {
                if pi.len() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        actual: pi.len(),
                    });
                }
                PopulationModel::new(pi)
            })
            .transpose()?;
        if let Some(p) = self.p {
            Device::new(p, m)?;
        }
        let policy = self
            .privacy
            .map(|doc| {
                let policy = doc.into_policy()?;
                validate_policy(&policy, &support)
            })
            .transpose()?;
        Ok(Survey {
            support,
            population,
            p: self.p,
            policy,
        })
    }
}

impl PrivacyDocument {
    fn into_policy(self) -> Result<PrivacyPolicy> {
        match self.mode {
            ModeDocument::AllStigmatizing => PrivacyPolicy::all_stigmatizing(self.xi),
            ModeDocument::NonstigmatizingSubset => {
                let c = self.c.ok_or(Error::COutOfRange(f64::NAN))?;
                PrivacyPolicy::nonstigmatizing_subset(
                    self.xi,
                    c,
                    self.nonstigmatizing.unwrap_or_default(),
                )
            }
        }
    }
}
