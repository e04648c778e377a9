//! Classical closed-form population size estimators.
//!
//! Every estimator returns [`Error::UndefinedEstimator`] instead of a NaN,
//! an infinity or a negative size when the table does not support it.

use serde::{Deserialize, Serialize};

use crate::data::DrsData;
use crate::error::{Error, Result};

/// Independence (model M_t) estimator `x.1·x1./x11`, also `x0 + x10·x01/x11`.
pub fn estimate_mt(data: &DrsData) -> Result<f64> {
    if data.x11 == 0 {
        return Err(Error::UndefinedEstimator {
            estimator: "M_t",
            reason: "no individual was captured in both lists (x11 = 0)".into(),
        });
    }
    Ok(data.xdot1() as f64 * data.x1dot() as f64 / data.x11 as f64)
}

/// Behavioural-response (model M_b) estimator `x0 / (1 − (x01/x1.)²)`.
pub fn estimate_mb(data: &DrsData) -> Result<f64> {
    if data.x01 >= data.x1dot() {
        return Err(Error::UndefinedEstimator {
            estimator: "M_b",
            reason: format!(
                "List 2 only count x01 = {} is not below the List 1 total x1. = {}",
                data.x01,
                data.x1dot()
            ),
        });
    }
    let ratio = data.x01 as f64 / data.x1dot() as f64;
    Ok(data.x0() as f64 / (1.0 - ratio * ratio))
}

/// Nour's recapture-prone estimator `x0 + 2·x11·x10·x01 / (x11² + x10·x01)`.
pub fn estimate_nour(data: &DrsData) -> Result<f64> {
    let (x11, x10, x01) = (data.x11 as f64, data.x10 as f64, data.x01 as f64);
    let denom = x11 * x11 + x10 * x01;
    if denom <= 0.0 {
        return Err(Error::UndefinedEstimator {
            estimator: "Nour",
            reason: "x11² + x10·x01 = 0".into(),
        });
    }
    Ok(data.x0() as f64 + 2.0 * x11 * x10 * x01 / denom)
}

/// Selector over the closed-form estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosedForm {
    Mt,
    Mb,
    Nour,
}

impl ClosedForm {
    pub const ALL: [ClosedForm; 3] = [ClosedForm::Mt, ClosedForm::Mb, ClosedForm::Nour];

    pub fn estimate(self, data: &DrsData) -> Result<f64> {
        match self {
            ClosedForm::Mt => estimate_mt(data),
            ClosedForm::Mb => estimate_mb(data),
            ClosedForm::Nour => estimate_nour(data),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClosedForm::Mt => "mt",
            ClosedForm::Mb => "mb",
            ClosedForm::Nour => "nour",
        }
    }
}
