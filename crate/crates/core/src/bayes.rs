//! Dirichlet-multinomial evidence, posterior-mean rows and Bayesian model
//! selection over chain orders.
//!
//! Each row of the transition matrix gets an independent symmetric
//! Dirichlet(α) prior, so the evidence factorizes over contexts:
//!
//! ```text
//! ln P(D|M_k) = Σ_i [ lnΓ(|S|α) − lnΓ(n_i + |S|α) + Σ_j (lnΓ(n_ij + α) − lnΓ(α)) ]
//! ```
//!
//! Unobserved cells and contexts contribute exactly zero, so only the sparse
//! observed counts are visited.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::counts::{ContextCounts, TransitionRow};
use crate::error::{Error, Result};
use crate::likelihood::{MarkovModel, ModelRow};
use crate::numerics::{ln_gamma, log_sum_exp, KahanSum, LogReal};

/// Laplace smoothing: one fake count per cell.
pub const DEFAULT_ALPHA: f64 = 1.0;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("Dirichlet hyperparameter must be positive, got {alpha}")))
    }
}

/// Log marginal likelihood of one row.
pub fn row_log_evidence(row: &TransitionRow, alpha: f64, n_states: usize) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(row_log_evidence_unchecked(row, alpha, n_states, ln_gamma(alpha)))
}

fn row_log_evidence_unchecked(row: &TransitionRow, alpha: f64, n_states: usize, ln_gamma_alpha: f64) -> f64 {
    let prior_mass = n_states as f64 * alpha;
    let mut sum = KahanSum::default();
    sum.add(ln_gamma(prior_mass) - ln_gamma(row.total() as f64 + prior_mass));
    for &(_, c) in row.entries() {
        sum.add(ln_gamma(c as f64 + alpha) - ln_gamma_alpha);
    }
    sum.total()
}

/// ln P(D | M_k) for the order of `counts` under a symmetric Dirichlet(α).
pub fn log_evidence(counts: &ContextCounts, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let lga = ln_gamma(alpha);
    let n_states = counts.n_states();
    let total: KahanSum = counts
        .rows()
        .map(|(_, row)| row_log_evidence_unchecked(row, alpha, n_states, lga))
        .collect();
    Ok(total.total())
}

/// E[p_ij | D] = (n_ij + α) / (n_i + |S|α) as a dense vector.
pub fn posterior_mean(row: &TransitionRow, alpha: f64, n_states: usize) -> Vec<f64> {
    posterior_row(row, alpha, n_states).to_dense(n_states)
}

fn posterior_row(row: &TransitionRow, alpha: f64, n_states: usize) -> ModelRow {
    let denom = row.total() as f64 + n_states as f64 * alpha;
    let entries = row
        .entries()
        .iter()
        .map(|&(s, c)| (s, (c as f64 + alpha) / denom))
        .collect();
    ModelRow::new(entries, alpha / denom)
}

/// Posterior-mean model; unseen contexts fall back to the uniform row.
pub fn fit_posterior_mean(counts: &ContextCounts, alpha: f64) -> Result<MarkovModel> {
    check_alpha(alpha)?;
    let n = counts.n_states();
    let rows: BTreeMap<_, _> = counts
        .rows()
        .map(|(ctx, row)| (ctx.clone(), posterior_row(row, alpha, n)))
        .collect();
    Ok(MarkovModel::from_parts(counts.order(), n, alpha, rows, Some(ModelRow::uniform(n))))
}

/// Prior over the candidate orders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// P(M_k) = 1/|M|.
    Uniform,
    /// P(M_k) ∝ exp(−|S|^k (|S| − 1)).
    ExponentialPenalty,
}

/// |S_k| = |S|^k (|S| − 1), the free parameter count of an order-k chain.
pub fn free_parameters(n_states: usize, k: usize) -> f64 {
    let s = n_states as f64;
    s.powf(k as f64) * (s - 1.0)
}

/// Unnormalized log prior of each order. Overflowing penalties saturate to −∞.
pub fn log_prior_weights(kind: PriorKind, n_orders: usize, n_states: usize) -> Vec<f64> {
    match kind {
        PriorKind::Uniform => vec![0.0; n_orders],
        PriorKind::ExponentialPenalty => (0..n_orders).map(|k| -free_parameters(n_states, k)).collect(),
    }
}

/// Posterior over orders 0..K given per-order log-evidences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPosterior {
    pub prior_kind: PriorKind,
    pub log_evidence: Vec<f64>,
    /// Normalized prior masses P(M_k).
    pub prior: Vec<f64>,
    /// P(M_k | D).
    pub posterior: Vec<f64>,
    pub selected: usize,
}

/// Normalizes evidence × prior in the log domain; ties go to the smaller order.
pub fn model_posterior(log_evidences: &[f64], prior_kind: PriorKind, n_states: usize) -> Result<ModelPosterior> {
    if log_evidences.len() < 2 {
        return Err(Error::Contract(format!(
            "model posterior needs at least 2 orders, got {}",
            log_evidences.len()
        )));
    }
    if log_evidences.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Domain("log-evidence must be finite or -inf".into()));
    }
    let log_prior_raw = log_prior_weights(prior_kind, log_evidences.len(), n_states);
    let prior_norm = log_sum_exp(&log_prior_raw)?;
    let joint: Vec<LogReal> = log_evidences
        .iter()
        .zip(&log_prior_raw)
        .map(|(&e, &p)| LogReal(e) * LogReal(p - prior_norm))
        .collect();
    let normalizer = LogReal::sum(joint.iter().copied());
    let posterior: Vec<f64> = joint.iter().map(|j| j.div(normalizer).value()).collect();
    let log_post: Vec<f64> = joint.iter().map(|j| j.div(normalizer).ln()).collect();
    let selected = argmax_first(&log_post);
    Ok(ModelPosterior {
        prior_kind,
        log_evidence: log_evidences.to_vec(),
        prior: log_prior_raw.iter().map(|p| (p - prior_norm).exp()).collect(),
        posterior,
        selected,
    })
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
