//! Synthetic corpora with known ground truth.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Geometric};
use serde::{Deserialize, Serialize};

use super::{PathCorpus, StateId, StateVocabulary, RESET};
use crate::error::{Error, Result};
use crate::seeds;

/// Shortest path the generators emit; matches the loader's default filter.
const MIN_GENERATED_LENGTH: usize = 2;
const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Labels "A".."Z" for up to 26 states, "s1".."sN" beyond that.
fn default_labels(n_states: usize) -> Vec<String> {
    if n_states <= 26 {
        (0..n_states).map(|i| char::from(b'A' + i as u8).to_string()).collect()
    } else {
        (1..=n_states).map(|i| format!("s{i}")).collect()
    }
}

fn empty_corpus_error() -> Error {
    Error::Input("generated corpus is empty".into())
}

/// Random-walk corpus where every click is uniform over `n_states` symbols
/// plus one terminal symbol that closes the current path.
///
/// Generation stops once the kept paths reach `total_clicks`; the path in
/// progress at that point is closed. Paths shorter than two clicks are
/// discarded, the same way the loader filters real data.
pub fn generate_uniform_corpus(n_states: usize, total_clicks: usize, seed: u64) -> Result<PathCorpus> {
    if n_states < 2 {
        return Err(Error::Input(format!("need at least 2 states, got {n_states}")));
    }
    let vocabulary = StateVocabulary::from_labels(default_labels(n_states))?;
    let mut rng = seeds::rng_for(seed, seeds::GENERATOR);
    let terminal = n_states;
    let mut paths = Vec::new();
    let mut kept = 0usize;
    let mut current: Vec<StateId> = Vec::new();
    while kept + current.len() < total_clicks {
        let symbol = rng.random_range(0..=n_states);
        if symbol == terminal {
            if current.len() >= MIN_GENERATED_LENGTH {
                kept += current.len();
                paths.push(std::mem::take(&mut current));
            } else {
                current.clear();
            }
        } else {
            current.push(symbol as StateId + 1);
        }
    }
    if current.len() >= MIN_GENERATED_LENGTH {
        paths.push(current);
    }
    if paths.is_empty() {
        return Err(empty_corpus_error());
    }
    PathCorpus::from_paths(vocabulary, paths)
}

/// Where the rows of a generating chain come from.
#[derive(Clone, Debug, PartialEq)]
pub enum RowSource {
    /// Each row drawn once from a symmetric Dirichlet with this concentration.
    Concentration(f64),
    /// Explicit rows, one per context in [`GeneratingChain`] order.
    Explicit(Vec<Vec<f64>>),
}

/// When a generator stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Paths(usize),
    /// Stop after the path that reaches this many clicks.
    Clicks(usize),
}

/// A true order-`k` chain over `n_states` input states.
///
/// Contexts range over the input states plus RESET (id 0), so the first `k`
/// clicks of a path condition on RESET padding. Row `i` belongs to the context
/// whose ids, read as base-(n_states+1) digits oldest first, spell `i`. Rows
/// are distributions over input ids `1..=n_states`; path termination is
/// handled by the length distribution, not the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratingChain {
    pub order: usize,
    pub n_states: usize,
    pub rows: Vec<Vec<f64>>,
}

impl GeneratingChain {
    fn n_contexts(order: usize, n_states: usize) -> Result<usize> {
        u32::try_from(order)
            .ok()
            .and_then(|k| (n_states + 1).checked_pow(k))
            .filter(|&n| n <= 1 << 24)
            .ok_or_else(|| Error::Input(format!("dense order-{order} tensor over {n_states} states is too large")))
    }

    /// Validates explicit rows.
    pub fn from_rows(order: usize, n_states: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if n_states < 1 {
            return Err(Error::Input("a chain needs at least one state".into()));
        }
        let expected = Self::n_contexts(order, n_states)?;
        if rows.len() != expected {
            return Err(Error::Input(format!(
                "order-{order} chain over {n_states} states needs {expected} rows, got {}",
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_states {
                return Err(Error::Input(format!("row {i} has {} entries, expected {n_states}", row.len())));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Input(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Input(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(GeneratingChain { order, n_states, rows })
    }

    /// Rows drawn from a symmetric Dirichlet(`concentration`).
    pub fn dirichlet(order: usize, n_states: usize, concentration: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        if !(concentration > 0.0) || !concentration.is_finite() {
            return Err(Error::Input(format!("concentration must be positive, got {concentration}")));
        }
        if n_states < 1 {
            return Err(Error::Input("a chain needs at least one state".into()));
        }
        let n_rows = Self::n_contexts(order, n_states)?;
        // Gamma(a) = Gamma(a+1) * U^(1/a); sampling the log keeps tiny
        // concentrations from underflowing every component to zero.
        let gamma = Gamma::new(concentration + 1.0, 1.0)
            .map_err(|e| Error::Input(format!("bad concentration: {e}")))?;
        let rows = (0..n_rows)
            .map(|_| {
                let logs: Vec<f64> = (0..n_states)
                    .map(|_| {
                        let g: f64 = gamma.sample(rng);
                        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                        g.ln() + u.ln() / concentration
                    })
                    .collect();
                let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = weights.iter().sum();
                weights.into_iter().map(|w| w / total).collect()
            })
            .collect();
        Ok(GeneratingChain { order, n_states, rows })
    }

    /// Order-1 chain stepping 1 → 2 → … → n → 1; the RESET row starts at 1.
    pub fn cycle(n_states: usize) -> Result<Self> {
        let mut rows = vec![vec![0.0; n_states]; n_states + 1];
        rows[0][0] = 1.0;
        for s in 1..=n_states {
            rows[s][s % n_states] = 1.0;
        }
        Self::from_rows(1, n_states, rows)
    }

    /// Order-1 chain that repeats the current state with probability `stay`
    /// and otherwise moves uniformly to another state; starts uniformly.
    pub fn sticky(n_states: usize, stay: f64) -> Result<Self> {
        if n_states < 2 || !(0.0..=1.0).contains(&stay) {
            return Err(Error::Input("sticky chain needs >= 2 states and stay in [0, 1]".into()));
        }
        let other = (1.0 - stay) / (n_states - 1) as f64;
        let mut rows = vec![vec![1.0 / n_states as f64; n_states]];
        for s in 0..n_states {
            let mut row = vec![other; n_states];
            row[s] = stay;
            rows.push(row);
        }
        Self::from_rows(1, n_states, rows)
    }

    /// Row index of a context given as state ids (RESET = 0).
    pub fn context_index(&self, context: &[StateId]) -> usize {
        let base = self.n_states + 1;
        context.iter().fold(0, |acc, &s| acc * base + s as usize)
    }

    /// Inverse of [`context_index`](Self::context_index).
    pub fn context_of(&self, mut index: usize) -> Vec<StateId> {
        let base = self.n_states + 1;
        let mut ctx = vec![RESET; self.order];
        for slot in ctx.iter_mut().rev() {
            *slot = (index % base) as StateId;
            index /= base;
        }
        ctx
    }

    /// P(next | context) for an input state `next` (id ≥ 1).
    pub fn prob(&self, context: &[StateId], next: StateId) -> f64 {
        self.rows[self.context_index(context)][next as usize - 1]
    }
}

/// Parameters for [`generate_markov_corpus`].
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovGeneratorConfig {
    pub order: usize,
    pub rows: RowSource,
    pub n_states: usize,
    pub budget: Budget,
    /// Mean path length; lengths are 2 + Geometric, so this must be ≥ 2.
    pub mean_path_length: f64,
    pub seed: u64,
}

/// Samples paths from a true order-`k` chain.
///
/// Returns the corpus together with the generating chain so tests can compare
/// fitted rows against ground truth. The Dirichlet rows and the paths use
/// separate sub-seeds.
pub fn generate_markov_corpus(config: &MarkovGeneratorConfig) -> Result<(PathCorpus, GeneratingChain)> {
    let chain = match &config.rows {
        RowSource::Concentration(c) => {
            let mut rng = seeds::rng_for(config.seed, seeds::TENSOR);
            GeneratingChain::dirichlet(config.order, config.n_states, *c, &mut rng)?
        }
        RowSource::Explicit(rows) => {
            GeneratingChain::from_rows(config.order, config.n_states, rows.clone())?
        }
    };
    let corpus = sample_paths(&chain, config.budget, config.mean_path_length, config.seed)?;
    Ok((corpus, chain))
}

fn sample_paths(chain: &GeneratingChain, budget: Budget, mean_path_length: f64, seed: u64) -> Result<PathCorpus> {
    if !(mean_path_length >= MIN_GENERATED_LENGTH as f64) || !mean_path_length.is_finite() {
        return Err(Error::Input(format!(
            "mean path length must be at least {MIN_GENERATED_LENGTH}, got {mean_path_length}"
        )));
    }
    let extra = Geometric::new(1.0 / (mean_path_length - 1.0))
        .map_err(|e| Error::Input(format!("bad mean path length: {e}")))?;
    let cumulative: Vec<Vec<f64>> = chain
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .scan(0.0, |acc, p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let vocabulary = StateVocabulary::from_labels(default_labels(chain.n_states))?;
    let mut rng = seeds::rng_for(seed, seeds::GENERATOR);
    let k = chain.order;
    let base = chain.n_states + 1;
    let modulus = base.pow(k as u32);

    let mut paths = Vec::new();
    let mut clicks = 0usize;
    let done = |paths: &Vec<Vec<StateId>>, clicks: usize| match budget {
        Budget::Paths(n) => paths.len() >= n,
        Budget::Clicks(n) => clicks >= n,
    };
    while !done(&paths, clicks) {
        let len = MIN_GENERATED_LENGTH + extra.sample(&mut rng) as usize;
        let mut path = Vec::with_capacity(len);
        let mut ctx = 0usize;
        for _ in 0..len {
            let cum = &cumulative[ctx];
            let u: f64 = rng.random::<f64>() * cum[cum.len() - 1];
            let j = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
            let next = j as StateId + 1;
            path.push(next);
            if k > 0 {
                ctx = (ctx * base + next as usize) % modulus;
            }
        }
        clicks += path.len();
        paths.push(path);
    }
    if paths.is_empty() {
        return Err(empty_corpus_error());
    }
    PathCorpus::from_paths(vocabulary, paths)
}
