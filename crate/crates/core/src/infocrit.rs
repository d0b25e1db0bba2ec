//! AIC and BIC against a high reference order, and minimum-criterion selection.
//!
//! Both criteria compare each order `k` with a reference order `m` through
//! the likelihood ratio ₖη_m, penalized by the extra free parameters
//! (|S|^m − |S|^k)(|S| − 1); BIC scales the penalty by ln n.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{degrees_of_freedom, likelihood_ratio};

/// AIC(k) = ₖη_m − 2 (|S|^m − |S|^k)(|S| − 1).
pub fn aic(eta: f64, n_states: usize, k: usize, m: usize) -> f64 {
    if k == m {
        return eta;
    }
    eta - 2.0 * degrees_of_freedom(n_states, k, m)
}

/// BIC(k) = ₖη_m − (|S|^m − |S|^k)(|S| − 1) ln n.
pub fn bic(eta: f64, n_states: usize, k: usize, m: usize, n: u64) -> f64 {
    if k == m {
        return eta;
    }
    eta - degrees_of_freedom(n_states, k, m) * (n.max(1) as f64).ln()
}

/// Index of the smallest score; ties go to the smaller order.
pub fn select_order(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::Contract("cannot select from an empty score list".into()));
    }
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Which observation count BIC uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BicObservations {
    /// Every prepared transition, including path-terminating RESET targets.
    #[default]
    AllTransitions,
    /// Clicks only (terminating transitions excluded).
    ClicksOnly,
}

/// AIC and BIC for orders 0..=m against reference order m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionTable {
    pub reference_order: usize,
    #[serde(with = "crate::serde_float::vec")]
    pub aic: Vec<f64>,
    #[serde(with = "crate::serde_float::vec")]
    pub bic: Vec<f64>,
    /// Observation count used by BIC.
    pub n: u64,
    pub selected_aic: usize,
    pub selected_bic: usize,
}

/// Builds both criteria from per-order MLE log-likelihoods `lls[0..=m]`.
pub fn criterion_table(lls: &[f64], n_states: usize, n: u64) -> Result<CriterionTable> {
    let Some(m) = lls.len().checked_sub(1) else {
        return Err(Error::Contract("need at least one order".into()));
    };
    let mut aics = Vec::with_capacity(lls.len());
    let mut bics = Vec::with_capacity(lls.len());
    for k in 0..=m {
        let eta = if k == m { 0.0 } else { likelihood_ratio(lls[k], lls[m])? };
        aics.push(aic(eta, n_states, k, m));
        bics.push(bic(eta, n_states, k, m, n));
    }
    Ok(CriterionTable {
        reference_order: m,
        selected_aic: select_order(&aics)?,
        selected_bic: select_order(&bics)?,
        aic: aics,
        bic: bics,
        n,
    })
}
