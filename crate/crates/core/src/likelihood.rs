//! Maximum-likelihood fitting, log-likelihoods and likelihood-ratio tests.
//!
//! Under RESET padding every path starts in the all-RESET context, so the
//! initial-state factor p(x₁) is identically 1 and contributes nothing to the
//! log-likelihood.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{PathCorpus, StateId};
use crate::counts::{count_transitions, Context, ContextCounts};
use crate::error::{Error, Result};
use crate::numerics::{chi2_sf, KahanSum};

/// Significance levels marked with one and two stars in LRT tables.
pub const SIGNIFICANCE_ONE_STAR: f64 = 0.01;
pub const SIGNIFICANCE_TWO_STARS: f64 = 0.001;

/// Tolerance below zero before a likelihood ratio is treated as non-nested.
const ETA_TOLERANCE: f64 = 1e-9;

/// A next-state distribution stored sparsely: listed entries plus one shared
/// `fill` probability for every unlisted state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    entries: Vec<(StateId, f64)>,
    fill: f64,
}

impl ModelRow {
    pub(crate) fn new(entries: Vec<(StateId, f64)>, fill: f64) -> Self {
        ModelRow { entries, fill }
    }

    /// The uniform distribution (every state unlisted).
    pub fn uniform(n_states: usize) -> Self {
        ModelRow { entries: Vec::new(), fill: 1.0 / n_states as f64 }
    }

    pub fn prob(&self, next: StateId) -> f64 {
        match self.entries.binary_search_by_key(&next, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => self.fill,
        }
    }

    /// Listed (state, probability) pairs in increasing state order.
    pub fn entries(&self) -> &[(StateId, f64)] {
        &self.entries
    }

    /// Probability of each unlisted state.
    pub fn fill(&self) -> f64 {
        self.fill
    }

    pub fn to_dense(&self, n_states: usize) -> Vec<f64> {
        let mut dense = vec![self.fill; n_states];
        for &(s, p) in &self.entries {
            dense[s as usize] = p;
        }
        dense
    }

    pub fn sum(&self, n_states: usize) -> f64 {
        let unlisted = n_states - self.entries.len();
        self.entries.iter().map(|e| e.1).sum::<f64>() + unlisted as f64 * self.fill
    }

    /// Modified competition rank ("1224" → "1334") of `target` among all
    /// `n_states` states: every member of a tie class gets the class's
    /// largest rank.
    pub fn rank_of(&self, target: StateId, n_states: usize) -> Result<usize> {
        if target as usize >= n_states {
            return Err(Error::Contract(format!("target {target} out of range for {n_states} states")));
        }
        let pt = self.prob(target);
        let listed_at_least = self.entries.iter().filter(|e| e.1 >= pt).count();
        let unlisted = n_states - self.entries.len();
        let fill_at_least = if self.fill >= pt { unlisted } else { 0 };
        Ok(listed_at_least + fill_at_least)
    }
}

/// An order-k Markov chain: one row per observed context.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovModel {
    order: usize,
    n_states: usize,
    smoothing: f64,
    rows: BTreeMap<Context, ModelRow>,
    default_row: Option<ModelRow>,
}

impl MarkovModel {
    pub(crate) fn from_parts(
        order: usize,
        n_states: usize,
        smoothing: f64,
        rows: BTreeMap<Context, ModelRow>,
        default_row: Option<ModelRow>,
    ) -> Self {
        MarkovModel { order, n_states, smoothing, rows, default_row }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// The Dirichlet hyperparameter the rows were built with (0 = MLE).
    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Row used for contexts never seen in training, if any.
    pub fn default_row(&self) -> Option<&ModelRow> {
        self.default_row.as_ref()
    }

    /// Observed row, falling back to the default row.
    pub fn row(&self, context: &[StateId]) -> Option<&ModelRow> {
        self.rows.get(context).or(self.default_row.as_ref())
    }

    pub fn observed_row(&self, context: &[StateId]) -> Option<&ModelRow> {
        self.rows.get(context)
    }

    /// P(next | context); 0 when the context has no row at all.
    pub fn prob(&self, context: &[StateId], next: StateId) -> f64 {
        self.row(context).map_or(0.0, |r| r.prob(next))
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = (&Context, &ModelRow)> {
        self.rows.iter()
    }
}

/// p_ij = n_ij / Σ_j n_ij for every observed context.
pub fn fit_mle(counts: &ContextCounts) -> Result<MarkovModel> {
    if counts.is_empty() {
        return Err(Error::Contract("cannot fit a model to empty counts".into()));
    }
    let rows = counts
        .rows()
        .map(|(ctx, row)| {
            let total = row.total() as f64;
            let entries = row.entries().iter().map(|&(s, c)| (s, c as f64 / total)).collect();
            (ctx.clone(), ModelRow::new(entries, 0.0))
        })
        .collect();
    Ok(MarkovModel::from_parts(counts.order(), counts.n_states(), 0.0, rows, None))
}

/// Σ n_ij ln p_ij over the observed cells of `counts`; −∞ if the model gives
/// an observed transition zero probability.
pub fn log_likelihood(counts: &ContextCounts, model: &MarkovModel) -> Result<f64> {
    if model.order() != counts.order() || model.n_states() != counts.n_states() {
        return Err(Error::Contract(format!(
            "model (order {}, {} states) does not match counts (order {}, {} states)",
            model.order(),
            model.n_states(),
            counts.order(),
            counts.n_states()
        )));
    }
    let mut sum = KahanSum::default();
    for (ctx, next, n) in counts.cells() {
        let p = model.prob(ctx, next);
        if p <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        sum.add(n as f64 * p.ln());
    }
    Ok(sum.total())
}

/// Log-likelihood of `counts` under its own MLE fit, without building rows.
pub fn mle_log_likelihood(counts: &ContextCounts) -> f64 {
    let mut sum = KahanSum::default();
    for (_, row) in counts.rows() {
        let total = row.total() as f64;
        for &(_, c) in row.entries() {
            if c != row.total() {
                sum.add(c as f64 * (c as f64 / total).ln());
            }
        }
    }
    sum.total()
}

/// ₖη_m = −2 (ℒ_k − ℒ_m).
pub fn likelihood_ratio(ll_null: f64, ll_alt: f64) -> Result<f64> {
    let eta = -2.0 * (ll_null - ll_alt);
    // Both log-likelihoods are sums of up to ~10^7 terms; allow for their rounding.
    let tolerance = ETA_TOLERANCE.max(1e-12 * ll_null.abs().max(ll_alt.abs()));
    if eta.is_nan() || eta < -tolerance {
        return Err(Error::Contract(format!(
            "likelihood ratio {eta} is negative: null ({ll_null}) is not nested in alternative ({ll_alt})"
        )));
    }
    Ok(eta.max(0.0))
}

/// Which states count toward |S| in the χ² degrees of freedom.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DfStates {
    /// |S| includes RESET.
    #[default]
    WithReset,
    /// |S| counts only input states.
    WithoutReset,
}

impl DfStates {
    pub fn effective(self, n_states: usize) -> usize {
        match self {
            DfStates::WithReset => n_states,
            DfStates::WithoutReset => n_states.saturating_sub(1),
        }
    }
}

/// (|S|^m − |S|^k)(|S| − 1) in floating point; overflows to +∞.
pub fn degrees_of_freedom(n_states: usize, k: usize, m: usize) -> f64 {
    let s = n_states as f64;
    let pow = |e: usize| s.powf(e as f64);
    (pow(m) - pow(k)) * (s - 1.0)
}

/// One row of a likelihood-ratio table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub k_null: usize,
    pub m_alt: usize,
    pub eta: f64,
    #[serde(with = "crate::serde_float")]
    pub df: f64,
    pub p_value: f64,
}

impl LrtResult {
    /// "**" below 0.1%, "*" below 1%, otherwise empty.
    pub fn stars(&self) -> &'static str {
        if self.p_value < SIGNIFICANCE_TWO_STARS {
            "**"
        } else if self.p_value < SIGNIFICANCE_ONE_STAR {
            "*"
        } else {
            ""
        }
    }

    pub fn is_significant(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Builds an LRT result from two MLE log-likelihoods.
pub fn lrt_from_log_likelihoods(
    k: usize,
    m: usize,
    ll_k: f64,
    ll_m: f64,
    df_states: usize,
) -> Result<LrtResult> {
    if k >= m {
        return Err(Error::Contract(format!("null order {k} must be below alternative order {m}")));
    }
    let eta = likelihood_ratio(ll_k, ll_m)?;
    let df = degrees_of_freedom(df_states, k, m);
    let p_value = if df >= 1.0 { chi2_sf(eta, df)? } else { 1.0 };
    Ok(LrtResult { k_null: k, m_alt: m, eta, df, p_value })
}

/// Fits orders `k` and `m` by MLE and tests the null order `k`.
pub fn lrt_test(corpus: &PathCorpus, k: usize, m: usize, df_states: DfStates) -> Result<LrtResult> {
    if k >= m {
        return Err(Error::Contract(format!("null order {k} must be below alternative order {m}")));
    }
    let ll_k = mle_log_likelihood(&count_transitions(corpus, k));
    let ll_m = mle_log_likelihood(&count_transitions(corpus, m));
    lrt_from_log_likelihoods(k, m, ll_k, ll_m, df_states.effective(corpus.n_states()))
}

/// All pairs k < m over per-order log-likelihoods `lls[0..=K]`.
pub fn lrt_table(lls: &[f64], n_states: usize, df_states: DfStates) -> Result<Vec<LrtResult>> {
    let s = df_states.effective(n_states);
    let mut table = Vec::new();
    for m in 1..lls.len() {
        for k in 0..m {
            table.push(lrt_from_log_likelihoods(k, m, lls[k], lls[m], s)?);
        }
    }
    Ok(table)
}

/// Sequential adjacent testing: the first order k whose test against k+1 is
/// not significant at `level` (or the largest order if all are).
pub fn sequential_lrt_order(table: &[LrtResult], max_order: usize, level: f64) -> usize {
    (0..max_order)
        .find(|&k| {
            table
                .iter()
                .find(|r| r.k_null == k && r.m_alt == k + 1)
                .is_none_or(|r| !r.is_significant(level))
        })
        .unwrap_or(max_order)
}
