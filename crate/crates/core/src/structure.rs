//! Plot-ready structural summaries of a corpus: globally normalized heatmaps,
//! local transition graphs, self-transition profiles and endpoint splits.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{PathCorpus, StateId, StateVocabulary, RESET};
use crate::counts::{csv_field, ContextCounts};
use crate::error::{Error, Result};
use crate::likelihood::{fit_mle, MarkovModel};

/// Order-1 transition mass n_ij / n_total, RESET row and column included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub n_total: u64,
    /// `cells[i][j]` for source id `i` and target id `j`.
    pub cells: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn n_states(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, from: StateId, to: StateId) -> f64 {
        self.cells[from as usize][to as usize]
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().flatten().sum()
    }

    /// Largest absolute cell difference between two heatmaps of equal size.
    pub fn max_deviation(&self, other: &Heatmap) -> Result<f64> {
        if self.n_states() != other.n_states() {
            return Err(Error::Contract("heatmaps cover different state spaces".into()));
        }
        Ok(self
            .cells
            .iter()
            .flatten()
            .zip(other.cells.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// CSV with a header row and a leading column of state labels.
    pub fn write_csv<W: Write>(&self, mut out: W, vocabulary: &StateVocabulary) -> Result<()> {
        if vocabulary.len() != self.n_states() {
            return Err(Error::Contract("vocabulary does not match heatmap size".into()));
        }
        write!(out, "from")?;
        for label in vocabulary.labels() {
            write!(out, ",{}", csv_field(label))?;
        }
        writeln!(out)?;
        for (label, row) in vocabulary.labels().iter().zip(&self.cells) {
            write!(out, "{}", csv_field(label))?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Normalizes order-1 counts by the total number of transitions.
pub fn global_heatmap(counts: &ContextCounts) -> Result<Heatmap> {
    if counts.order() != 1 {
        return Err(Error::Contract(format!("heatmap needs order-1 counts, got order {}", counts.order())));
    }
    if counts.n_total() == 0 {
        return Err(Error::Contract("heatmap of empty counts".into()));
    }
    let n = counts.n_states();
    let total = counts.n_total() as f64;
    let mut cells = vec![vec![0.0; n]; n];
    for (ctx, next, c) in counts.cells() {
        cells[ctx[0] as usize][next as usize] = c as f64 / total;
    }
    Ok(Heatmap { n_total: counts.n_total(), cells })
}

/// How nodes of a local graph are ranked and sized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centrality {
    /// Σ over other states j of p(node | …, j).
    #[default]
    Incoming,
    /// Σ over other states j of p(j | …, node).
    Outgoing,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalGraphOptions {
    pub top_nodes: usize,
    pub top_edges: usize,
    pub centrality: Centrality,
    /// The first k−1 states of every context shown; `None` picks the prefix
    /// with the most transitions (empty at order 1).
    pub anchor: Option<Vec<StateId>>,
}

impl Default for LocalGraphOptions {
    fn default() -> Self {
        LocalGraphOptions { top_nodes: 4, top_edges: 4, centrality: Centrality::Incoming, anchor: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub label: String,
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: String,
    pub dst: String,
    pub weight: f64,
}

/// Top nodes and their heaviest outgoing MLE transitions, given an anchor
/// prefix. Edge `src → dst` carries p(dst | anchor ++ src).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalGraph {
    pub order: usize,
    pub centrality: Centrality,
    pub anchor: Vec<String>,
    /// False when no context starts with the anchor; the graph is then empty.
    pub anchor_observed: bool,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl LocalGraph {
    /// `{nodes: [{label, size}], edges: [{src, dst, weight}]}` plus metadata.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn busiest_prefix(counts: &ContextCounts) -> Vec<StateId> {
    let k = counts.order();
    let mut best: Option<(&[StateId], u64)> = None;
    let mut current: Option<(&[StateId], u64)> = None;
    // Rows are sorted by context, so equal prefixes are adjacent.
    for (ctx, row) in counts.rows() {
        let prefix = &ctx.ids()[..k - 1];
        current = match current {
            Some((p, n)) if p == prefix => Some((p, n + row.total())),
            other => {
                if let Some(done) = other {
                    if best.is_none_or(|b| done.1 > b.1) {
                        best = Some(done);
                    }
                }
                Some((prefix, row.total()))
            }
        };
    }
    if let Some(done) = current {
        if best.is_none_or(|b| done.1 > b.1) {
            best = Some(done);
        }
    }
    best.map(|(p, _)| p.to_vec()).unwrap_or_default()
}

/// Builds a local transition graph from order-k counts (k ≥ 1).
///
/// Nodes are input states (RESET excluded). Edges stay among the listed
/// nodes, self-loops included, and carry exact MLE probabilities.
pub fn local_graph(counts: &ContextCounts, vocabulary: &StateVocabulary, options: &LocalGraphOptions) -> Result<LocalGraph> {
    let k = counts.order();
    if k == 0 {
        return Err(Error::Contract("local graphs need order >= 1".into()));
    }
    if vocabulary.len() != counts.n_states() {
        return Err(Error::Contract("vocabulary does not match counts".into()));
    }
    let anchor = match &options.anchor {
        Some(a) if a.len() != k - 1 => {
            return Err(Error::Input(format!("order-{k} graph needs an anchor of {} states, got {}", k - 1, a.len())))
        }
        Some(a) => a.clone(),
        None => busiest_prefix(counts),
    };
    let labels = |ids: &[StateId]| ids.iter().map(|&s| vocabulary.label(s).to_string()).collect::<Vec<_>>();
    let mut graph = LocalGraph {
        order: k,
        centrality: options.centrality,
        anchor: labels(&anchor),
        anchor_observed: false,
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    if counts.is_empty() {
        return Ok(graph);
    }
    let model: MarkovModel = fit_mle(counts)?;
    let n = counts.n_states();
    let mut context = anchor.clone();
    context.push(RESET);
    let row_of = |ctx: &mut Vec<StateId>, last: StateId| {
        ctx[k - 1] = last;
        model.observed_row(ctx).cloned()
    };
    let rows: Vec<_> = (0..n as StateId).map(|s| if s == RESET { None } else { row_of(&mut context, s) }).collect();
    graph.anchor_observed = rows.iter().any(Option::is_some);
    if !graph.anchor_observed {
        return Ok(graph);
    }
    let mut centrality = vec![0.0; n];
    for (src, row) in rows.iter().enumerate() {
        let Some(row) = row else { continue };
        for &(dst, p) in row.entries() {
            if dst == RESET || dst as usize == src {
                continue;
            }
            match options.centrality {
                Centrality::Incoming => centrality[dst as usize] += p,
                Centrality::Outgoing => centrality[src] += p,
            }
        }
    }
    let mut candidates: Vec<StateId> = (1..n as StateId)
        .filter(|&s| match options.centrality {
            Centrality::Incoming => centrality[s as usize] > 0.0 || rows[s as usize].is_some(),
            Centrality::Outgoing => rows[s as usize].is_some(),
        })
        .collect();
    candidates.sort_by(|&a, &b| centrality[b as usize].total_cmp(&centrality[a as usize]).then(a.cmp(&b)));
    candidates.truncate(options.top_nodes);
    for &s in &candidates {
        graph.nodes.push(GraphNode { label: vocabulary.label(s).to_string(), size: centrality[s as usize] });
    }
    for &src in &candidates {
        let Some(row) = &rows[src as usize] else { continue };
        let mut out: Vec<(StateId, f64)> = row
            .entries()
            .iter()
            .copied()
            .filter(|(dst, p)| *p > 0.0 && candidates.contains(dst))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out.truncate(options.top_edges);
        for (dst, weight) in out {
            graph.edges.push(GraphEdge {
                src: vocabulary.label(src).to_string(),
                dst: vocabulary.label(dst).to_string(),
                weight,
            });
        }
    }
    Ok(graph)
}

/// One point of a self-transition profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub state: String,
    pub k: usize,
    /// P(next = t | last k states all t), MLE.
    pub stay: f64,
    /// 1 − stay.
    pub switch: f64,
    /// Transitions observed from context t^k.
    pub n_context: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingPoint {
    pub state: String,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfTransitionProfile {
    pub max_k: usize,
    pub points: Vec<ProfilePoint>,
    /// (state, k) pairs whose context t^k never occurs.
    pub missing: Vec<MissingPoint>,
}

impl SelfTransitionProfile {
    pub fn point(&self, state: &str, k: usize) -> Option<&ProfilePoint> {
        self.points.iter().find(|p| p.state == state && p.k == k)
    }

    /// CSV `state,k,stay,switch`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "state,k,stay,switch")?;
        for p in &self.points {
            writeln!(out, "{},{},{},{}", csv_field(&p.state), p.k, p.stay, p.switch)?;
        }
        Ok(())
    }
}

/// Per-state stay-versus-switch probabilities after k consecutive visits.
///
/// The context t^k is the last k states, so a run of length r contributes to
/// every k ≤ r. The path-ending transition to RESET counts as a switch. The
/// `top_states` states with the most outgoing transitions are reported.
pub fn self_transition_profile(corpus: &PathCorpus, max_k: usize, top_states: usize) -> Result<SelfTransitionProfile> {
    if max_k < 1 {
        return Err(Error::Input("self-transition profile needs max_k >= 1".into()));
    }
    let n = corpus.n_states();
    // stay[t][k-1], seen[t][k-1]
    let mut stay = vec![vec![0u64; max_k]; n];
    let mut seen = vec![vec![0u64; max_k]; n];
    let mut mass = vec![0u64; n];
    for path in corpus.paths() {
        let mut run = 0usize;
        for (i, &t) in path.iter().enumerate() {
            run = if i > 0 && path[i - 1] == t { run + 1 } else { 1 };
            let next = path.get(i + 1).copied().unwrap_or(RESET);
            let t = t as usize;
            mass[t] += 1;
            for k in 1..=run.min(max_k) {
                seen[t][k - 1] += 1;
                if next as usize == t {
                    stay[t][k - 1] += 1;
                }
            }
        }
    }
    let mut states: Vec<usize> = (1..n).filter(|&t| mass[t] > 0).collect();
    states.sort_by(|&a, &b| mass[b].cmp(&mass[a]).then(a.cmp(&b)));
    states.truncate(top_states);
    let vocabulary = corpus.vocabulary();
    let mut profile = SelfTransitionProfile { max_k, points: Vec::new(), missing: Vec::new() };
    for t in states {
        let label = vocabulary.label(t as StateId).to_string();
        for k in 1..=max_k {
            let n_context = seen[t][k - 1];
            if n_context == 0 {
                profile.missing.push(MissingPoint { state: label.clone(), k });
                continue;
            }
            let p = stay[t][k - 1] as f64 / n_context as f64;
            profile.points.push(ProfilePoint { state: label.clone(), k, stay: p, switch: 1.0 - p, n_context });
        }
    }
    Ok(profile)
}

/// Splits paths into (same first and last state, different endpoints).
pub fn split_by_endpoints(corpus: &PathCorpus) -> (PathCorpus, PathCorpus) {
    let (same, different): (Vec<usize>, Vec<usize>) =
        (0..corpus.n_paths()).partition(|&i| corpus.paths()[i].first() == corpus.paths()[i].last());
    (corpus.subset(&same), corpus.subset(&different))
}
