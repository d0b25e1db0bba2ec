//! Stratified k-fold cross-validation scored by the average rank of the true
//! next state, plus a TopK hit-rate variant.
//!
//! Folds hold whole paths, balanced by click count. Each fold is scored by a
//! posterior-mean model trained on the remaining folds; ties in a row all
//! receive the largest rank of their class, so sparse high-order rows are
//! penalized for uninformative predictions.

use rand::Rng;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::fit_posterior_mean;
use crate::corpus::{PathCorpus, StateId, RESET};
use crate::counts::{count_paths, ContextCounts};
use crate::error::{Error, Result};
use crate::likelihood::{MarkovModel, ModelRow};
use crate::seeds;

pub const DEFAULT_FOLDS: usize = 10;
/// Size of the candidate list in the TopK variant.
pub const DEFAULT_TOPK: usize = 5;

/// Assignment of every path to exactly one fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n_folds: usize,
    pub fold_of_path: Vec<usize>,
    pub fold_clicks: Vec<usize>,
}

impl FoldAssignment {
    /// Paths held out in fold `f`, in corpus order.
    pub fn test_paths(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of_path.len()).filter(|&i| self.fold_of_path[i] == f).collect()
    }

    /// Paths used to train the model that scores fold `f`.
    pub fn training_paths(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of_path.len()).filter(|&i| self.fold_of_path[i] != f).collect()
    }
}

/// Shuffles paths with `seed`, then gives each to the fold with the fewest
/// clicks so far (lowest fold id on ties).
pub fn stratified_folds(corpus: &PathCorpus, n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::Input(format!("need at least 2 folds, got {n_folds}")));
    }
    if corpus.n_paths() < n_folds {
        return Err(Error::Input(format!(
            "{} paths cannot fill {n_folds} folds",
            corpus.n_paths()
        )));
    }
    let mut order: Vec<usize> = (0..corpus.n_paths()).collect();
    order.shuffle(&mut seeds::rng_for(seed, seeds::FOLD_SHUFFLE));
    let mut fold_of_path = vec![0; corpus.n_paths()];
    let mut fold_clicks = vec![0usize; n_folds];
    for i in order {
        let (lightest, _) = fold_clicks
            .iter()
            .enumerate()
            .min_by_key(|&(f, &c)| (c, f))
            .expect("n_folds >= 2");
        fold_of_path[i] = lightest;
        fold_clicks[lightest] += corpus.paths()[i].len();
    }
    Ok(FoldAssignment { n_folds, fold_of_path, fold_clicks })
}

/// Modified competition rank of `target` in a dense distribution: the number
/// of entries with probability ≥ the target's.
pub fn rank_in_row(row: &[f64], target: usize) -> Result<usize> {
    let Some(&pt) = row.get(target) else {
        return Err(Error::Contract(format!("target {target} out of range for a row of {}", row.len())));
    };
    Ok(row.iter().filter(|&&p| p >= pt).count())
}

/// Whether transitions into RESET are scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankTargets {
    #[default]
    IncludeReset,
    ExcludeReset,
}

impl RankTargets {
    fn keeps(self, next: StateId) -> bool {
        self == RankTargets::IncludeReset || next != RESET
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub n_folds: usize,
    pub alpha: f64,
    pub seed: u64,
    pub targets: RankTargets,
    /// Also compute the TopK hit rate with this K.
    pub topk: Option<usize>,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            n_folds: DEFAULT_FOLDS,
            alpha: crate::bayes::DEFAULT_ALPHA,
            seed: 0,
            targets: RankTargets::default(),
            topk: None,
        }
    }
}

/// Cross-validation outcome for one order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub order: usize,
    /// Average rank r̄(D_f) of each fold.
    pub fold_ranks: Vec<f64>,
    pub mean_rank: f64,
    /// Sample standard deviation of the fold ranks.
    pub std_rank: f64,
    pub topk: Option<usize>,
    pub fold_topk_hit_rates: Option<Vec<f64>>,
    pub topk_hit_rate: Option<f64>,
}

fn fallback_row(model: &MarkovModel, context: &[StateId]) -> ModelRow {
    model.row(context).cloned().unwrap_or_else(|| ModelRow::uniform(model.n_states()))
}

/// (Σ n_ij r_ij, Σ n_ij) of `test` under `model`. Contexts without a row in
/// the model rank every target at |S|.
pub fn rank_sums(model: &MarkovModel, test: &ContextCounts, targets: RankTargets) -> Result<(u128, u64)> {
    let n_states = model.n_states();
    let mut weighted = 0u128;
    let mut n = 0u64;
    for (ctx, row) in test.rows() {
        let model_row = model.row(ctx.ids());
        for &(next, count) in row.entries() {
            if !targets.keeps(next) {
                continue;
            }
            let rank = match model_row {
                Some(r) => r.rank_of(next, n_states)?,
                None => n_states,
            };
            weighted += u128::from(count) * rank as u128;
            n += count;
        }
    }
    Ok((weighted, n))
}

/// Fraction of held-out transitions whose true next state is among the `k`
/// most probable states of its row. Where the cut falls inside a tie class,
/// the remaining slots are drawn uniformly without replacement from the tie
/// class using `seed`.
pub fn topk_hit_rate(model: &MarkovModel, test: &ContextCounts, k: usize, seed: u64) -> Result<f64> {
    topk_hit_rate_filtered(model, test, k, seed, RankTargets::IncludeReset)
}

fn topk_hit_rate_filtered(
    model: &MarkovModel,
    test: &ContextCounts,
    k: usize,
    seed: u64,
    targets: RankTargets,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::Contract("TopK needs K >= 1".into()));
    }
    let n_states = model.n_states();
    let mut rng = seeds::rng_for(seed, seeds::TOPK_TIES);
    let mut hits = 0u64;
    let mut total = 0u64;
    for (ctx, row) in test.rows() {
        let model_row = fallback_row(model, ctx.ids());
        for &(next, count) in row.entries() {
            if !targets.keeps(next) {
                continue;
            }
            if next as usize >= n_states {
                return Err(Error::Contract(format!("target {next} out of range")));
            }
            let pt = model_row.prob(next);
            let unlisted = n_states - model_row.entries().len();
            let greater = model_row.entries().iter().filter(|e| e.1 > pt).count()
                + if model_row.fill() > pt { unlisted } else { 0 };
            let tied = model_row.entries().iter().filter(|e| e.1 == pt).count()
                + if model_row.fill() == pt { unlisted } else { 0 };
            total += count;
            if greater >= k {
                continue;
            }
            if greater + tied <= k {
                hits += count;
                continue;
            }
            let slots = k - greater;
            for _ in 0..count {
                if rng.random_range(0..tied) < slots {
                    hits += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::Contract("no test transitions to score".into()));
    }
    Ok(hits as f64 / total as f64)
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct FoldScore {
    avg_rank: f64,
    topk: Option<f64>,
}

fn score_fold(
    corpus: &PathCorpus,
    folds: &FoldAssignment,
    k: usize,
    f: usize,
    options: &CvOptions,
) -> Result<FoldScore> {
    let train = count_paths(corpus, k, folds.training_paths(f));
    let test = count_paths(corpus, k, folds.test_paths(f));
    let model = fit_posterior_mean(&train, options.alpha)?;
    let (weighted, n) = rank_sums(&model, &test, options.targets)?;
    if n == 0 {
        return Err(Error::Input(format!("fold {f} has no scorable transitions")));
    }
    let topk = match options.topk {
        Some(top) => {
            let seed = seeds::sub_seed(options.seed, &format!("order-{k}-fold-{f}"));
            Some(topk_hit_rate_filtered(&model, &test, top, seed, options.targets)?)
        }
        None => None,
    };
    Ok(FoldScore { avg_rank: weighted as f64 / n as f64, topk })
}

fn summarize(k: usize, scores: Vec<FoldScore>, topk: Option<usize>) -> CvResult {
    let fold_ranks: Vec<f64> = scores.iter().map(|s| s.avg_rank).collect();
    let (mean_rank, std_rank) = mean_and_std(&fold_ranks);
    let fold_topk: Option<Vec<f64>> = scores.iter().map(|s| s.topk).collect();
    let topk_hit_rate = fold_topk.as_ref().map(|v| mean_and_std(v).0);
    CvResult {
        order: k,
        fold_ranks,
        mean_rank,
        std_rank,
        topk,
        fold_topk_hit_rates: fold_topk,
        topk_hit_rate,
    }
}

fn check_options(options: &CvOptions) -> Result<()> {
    if !(options.alpha > 0.0) || !options.alpha.is_finite() {
        return Err(Error::Domain(format!(
            "cross-validation needs a positive Dirichlet hyperparameter, got {}",
            options.alpha
        )));
    }
    if options.topk == Some(0) {
        return Err(Error::Input("TopK needs K >= 1".into()));
    }
    Ok(())
}

/// Cross-validates an order-`k` chain.
pub fn cross_validate(corpus: &PathCorpus, k: usize, options: &CvOptions) -> Result<CvResult> {
    check_options(options)?;
    let folds = stratified_folds(corpus, options.n_folds, options.seed)?;
    cross_validate_with_folds(corpus, k, &folds, options)
}

/// Cross-validates with a precomputed fold assignment; folds run concurrently.
pub fn cross_validate_with_folds(
    corpus: &PathCorpus,
    k: usize,
    folds: &FoldAssignment,
    options: &CvOptions,
) -> Result<CvResult> {
    check_options(options)?;
    let scores = (0..folds.n_folds)
        .into_par_iter()
        .map(|f| score_fold(corpus, folds, k, f, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(k, scores, options.topk))
}

/// Cross-validates orders `0..=max_order` on one shared fold assignment.
pub fn cross_validate_orders(corpus: &PathCorpus, max_order: usize, options: &CvOptions) -> Result<Vec<CvResult>> {
    check_options(options)?;
    let folds = stratified_folds(corpus, options.n_folds, options.seed)?;
    (0..=max_order)
        .map(|k| cross_validate_with_folds(corpus, k, &folds, options))
        .collect()
}

/// Order with the lowest mean rank; ties go to the smaller order.
pub fn select_cv_order(results: &[CvResult]) -> Option<usize> {
    let best = results
        .iter()
        .min_by(|a, b| a.mean_rank.total_cmp(&b.mean_rank).then(a.order.cmp(&b.order)))?;
    Some(best.order)
}
