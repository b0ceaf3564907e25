//! Design, estimation and privacy analysis for randomized-response surveys
//! on a sensitive variable with finitely many known values.
//!
//! Each respondent draws from a device that, with probability `p`, tells
//! them to report their true value and otherwise names one of the `m`
//! possible values uniformly at random. From the response counts we get
//! unbiased estimates of the class proportions and of the population mean.
//! Larger `p` means smaller variance and weaker privacy; [`design`] picks the
//! largest `p` compatible with a stipulated privacy level.
//!
//! ```
//! use rrkit_core::design::p0_all_stigmatizing;
//!
//! let p0 = p0_all_stigmatizing(4, 0.1).unwrap();
//! assert!((p0 - 0.1099).abs() < 5e-5);
//! ```

pub mod design;
pub mod device;
pub mod error;
pub mod estimation;
pub mod json;
pub mod model;
pub mod oracle;
pub mod privacy;
pub mod simulation;
pub mod stream;
pub mod survey;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    validate_policy, CheckedPolicy, Device, EstimateReport, PolicyMode, PopulationModel,
    PrivacyPolicy, ResponseSample, SupportSpec,
};
