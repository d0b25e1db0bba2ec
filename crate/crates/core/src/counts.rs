//! Sparse order-k transition counts keyed by compound states.
//!
//! Only contexts that occur in the data are materialized; the |S|^k context
//! space is never allocated. A context is stored as the tuple of its state ids,
//! which is a collision-free key at any vocabulary size.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::corpus::{pad_path_into, PathCorpus, StateId, StateVocabulary};
use crate::error::{Error, Result};

/// A compound state: the `k` most recent state ids, oldest first.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Context(Box<[StateId]>);

impl Context {
    pub fn new(ids: &[StateId]) -> Self {
        Context(ids.into())
    }

    pub fn ids(&self) -> &[StateId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Borrow<[StateId]> for Context {
    fn borrow(&self) -> &[StateId] {
        &self.0
    }
}

impl From<Vec<StateId>> for Context {
    fn from(v: Vec<StateId>) -> Self {
        Context(v.into_boxed_slice())
    }
}

impl fmt::Debug for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// Next-state counts of one context, sorted by state id.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TransitionRow {
    entries: Vec<(StateId, u64)>,
    total: u64,
}

impl TransitionRow {
    /// Builds a row from (state, count) pairs; zero counts are dropped and
    /// repeated states summed.
    pub fn from_counts<I: IntoIterator<Item = (StateId, u64)>>(pairs: I) -> Self {
        let mut map: BTreeMap<StateId, u64> = BTreeMap::new();
        for (s, c) in pairs {
            if c > 0 {
                *map.entry(s).or_default() += c;
            }
        }
        let entries: Vec<_> = map.into_iter().collect();
        let total = entries.iter().map(|e| e.1).sum();
        TransitionRow { entries, total }
    }

    /// Observed (next, count) pairs in increasing state order.
    pub fn entries(&self) -> &[(StateId, u64)] {
        &self.entries
    }

    pub fn count(&self, next: StateId) -> u64 {
        match self.entries.binary_search_by_key(&next, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0,
        }
    }

    /// Σ_j n_ij for this context.
    pub fn total(&self) -> u64 {
        self.total
    }

    fn add(&mut self, next: StateId, count: u64) {
        match self.entries.binary_search_by_key(&next, |e| e.0) {
            Ok(i) => self.entries[i].1 += count,
            Err(i) => self.entries.insert(i, (next, count)),
        }
        self.total += count;
    }

    fn merge(&mut self, other: &TransitionRow) {
        for &(s, c) in &other.entries {
            self.add(s, c);
        }
    }
}

/// Order-k sufficient statistics n_ij.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextCounts {
    order: usize,
    n_states: usize,
    rows: BTreeMap<Context, TransitionRow>,
    n_total: u64,
}

impl ContextCounts {
    /// Counts with no observations.
    pub fn empty(order: usize, n_states: usize) -> Self {
        ContextCounts { order, n_states, rows: BTreeMap::new(), n_total: 0 }
    }

    /// Assembles counts from explicit rows (mainly for tests and tools).
    pub fn from_rows<I>(order: usize, n_states: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<StateId>, TransitionRow)>,
    {
        let mut out = ContextCounts::empty(order, n_states);
        for (ctx, row) in rows {
            if ctx.len() != order {
                return Err(Error::Contract(format!(
                    "context {ctx:?} has length {}, expected {order}",
                    ctx.len()
                )));
            }
            if ctx.iter().chain(row.entries.iter().map(|e| &e.0)).any(|&s| s as usize >= n_states) {
                return Err(Error::Contract(format!("state id out of range in context {ctx:?}")));
            }
            if row.total == 0 {
                continue;
            }
            out.n_total += row.total;
            out.rows.entry(ctx.into()).or_default().merge(&row);
        }
        Ok(out)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// |S| including RESET.
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Σ_ij n_ij.
    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn n_contexts(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_total == 0
    }

    pub fn row(&self, context: &[StateId]) -> Option<&TransitionRow> {
        self.rows.get(context)
    }

    pub fn count(&self, context: &[StateId], next: StateId) -> u64 {
        self.row(context).map_or(0, |r| r.count(next))
    }

    /// Observed contexts in lexicographic id order.
    pub fn rows(&self) -> impl ExactSizeIterator<Item = (&Context, &TransitionRow)> {
        self.rows.iter()
    }

    /// Every observed (context, next, count) cell.
    pub fn cells(&self) -> impl Iterator<Item = (&[StateId], StateId, u64)> {
        self.rows
            .iter()
            .flat_map(|(ctx, row)| row.entries.iter().map(move |&(s, c)| (ctx.ids(), s, c)))
    }

    /// Cellwise sum. Both sides must share order and state count.
    pub fn merge(&self, other: &ContextCounts) -> Result<ContextCounts> {
        if self.order != other.order || self.n_states != other.n_states {
            return Err(Error::Contract(format!(
                "cannot merge order-{}/{}-state counts with order-{}/{}-state counts",
                self.order, self.n_states, other.order, other.n_states
            )));
        }
        let mut out = self.clone();
        for (ctx, row) in &other.rows {
            match out.rows.get_mut(ctx.ids()) {
                Some(existing) => existing.merge(row),
                None => {
                    out.rows.insert(ctx.clone(), row.clone());
                }
            }
        }
        out.n_total += other.n_total;
        Ok(out)
    }

    /// Sums out the oldest `order - target_order` context positions.
    pub fn marginalize(&self, target_order: usize) -> Result<ContextCounts> {
        if target_order > self.order {
            return Err(Error::Contract(format!(
                "cannot marginalize order {} up to order {target_order}",
                self.order
            )));
        }
        let drop = self.order - target_order;
        let mut rows: BTreeMap<Context, TransitionRow> = BTreeMap::new();
        for (ctx, row) in &self.rows {
            let key = &ctx.ids()[drop..];
            match rows.get_mut(key) {
                Some(r) => r.merge(row),
                None => {
                    rows.insert(Context::new(key), row.clone());
                }
            }
        }
        Ok(ContextCounts { order: target_order, n_states: self.n_states, rows, n_total: self.n_total })
    }

    /// Writes "context labels…, next label, count" rows; contexts are
    /// space-joined into one column so the file has a fixed width.
    pub fn write_csv<W: Write>(&self, mut out: W, vocabulary: &StateVocabulary) -> Result<()> {
        writeln!(out, "context,next,count")?;
        for (ctx, next, count) in self.cells() {
            let ctx_labels: Vec<&str> = ctx.iter().map(|&s| vocabulary.label(s)).collect();
            writeln!(
                out,
                "{},{},{}",
                csv_field(&ctx_labels.join(" ")),
                csv_field(vocabulary.label(next)),
                count
            )?;
        }
        Ok(())
    }
}

/// Quotes a CSV field when it contains a separator, quote or newline.
pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Accumulates windows of length k+1 (context ++ next).
struct WindowCounter {
    order: usize,
    cells: FxHashMap<Box<[StateId]>, u64>,
    total: u64,
}

impl WindowCounter {
    fn new(order: usize) -> Self {
        WindowCounter { order, cells: FxHashMap::default(), total: 0 }
    }

    fn add_path(&mut self, path: &[StateId], buf: &mut Vec<StateId>) {
        pad_path_into(path, self.order, buf);
        for w in buf.windows(self.order + 1) {
            if let Some(c) = self.cells.get_mut(w) {
                *c += 1;
            } else {
                self.cells.insert(w.into(), 1);
            }
            self.total += 1;
        }
    }

    fn finish(self, n_states: usize) -> ContextCounts {
        let k = self.order;
        let mut cells: Vec<_> = self.cells.into_iter().collect();
        cells.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let mut rows: Vec<(Context, TransitionRow)> = Vec::new();
        for (window, count) in cells {
            let (ctx, next) = (&window[..k], window[k]);
            match rows.last_mut() {
                Some((last, row)) if last.ids() == ctx => {
                    row.entries.push((next, count));
                    row.total += count;
                }
                _ => rows.push((
                    Context::new(ctx),
                    TransitionRow { entries: vec![(next, count)], total: count },
                )),
            }
        }
        ContextCounts { order: k, n_states, rows: rows.into_iter().collect(), n_total: self.total }
    }
}

/// Aggregates `prepare_sequences(corpus, k)` into sparse counts.
pub fn count_transitions(corpus: &PathCorpus, k: usize) -> ContextCounts {
    count_paths(corpus, k, 0..corpus.n_paths())
}

/// Counts only the paths at the given indices (e.g. a set of CV folds).
pub fn count_paths<I>(corpus: &PathCorpus, k: usize, indices: I) -> ContextCounts
where
    I: IntoIterator<Item = usize>,
{
    let mut counter = WindowCounter::new(k);
    let mut buf = Vec::new();
    let paths = corpus.paths();
    for i in indices {
        counter.add_path(&paths[i], &mut buf);
    }
    counter.finish(corpus.n_states())
}

/// Counts path shards in parallel and merges them; identical to
/// [`count_transitions`].
pub fn count_transitions_sharded(corpus: &PathCorpus, k: usize, n_shards: usize) -> ContextCounts {
    let n = corpus.n_paths();
    let n_shards = n_shards.clamp(1, n.max(1));
    let chunk = n.div_ceil(n_shards).max(1);
    let shards: Vec<ContextCounts> = (0..n_shards)
        .into_par_iter()
        .map(|s| {
            let start = (s * chunk).min(n);
            let end = ((s + 1) * chunk).min(n);
            count_paths(corpus, k, start..end)
        })
        .collect();
    shards
        .iter()
        .try_fold(ContextCounts::empty(k, corpus.n_states()), |acc, s| acc.merge(s))
        .expect("shards share order and state count")
}

/// Counts for every order `0..=max_order`, computed concurrently.
pub fn count_all_orders(corpus: &PathCorpus, max_order: usize) -> Vec<ContextCounts> {
    (0..=max_order)
        .into_par_iter()
        .map(|k| count_transitions(corpus, k))
        .collect()
}
