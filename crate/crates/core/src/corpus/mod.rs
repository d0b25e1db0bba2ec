//! Path corpora: loading, validation, RESET padding and synthetic generation.
//!
//! A corpus is a set of independent navigation paths over a shared state
//! vocabulary. Id 0 is reserved for the synthetic RESET state, which pads the
//! start of every path with `k` copies and terminates it once, so an order-`k`
//! history never crosses a path boundary.

mod generate;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{
    generate_markov_corpus, generate_uniform_corpus, Budget, GeneratingChain,
    MarkovGeneratorConfig, RowSource,
};

/// Integer id of a state; 0 is RESET.
pub type StateId = u32;

/// The reserved id of the RESET state.
pub const RESET: StateId = 0;

/// Label of the RESET state. Input data may not use it.
pub const RESET_LABEL: &str = "RESET";

/// Bijection between state labels and ids, with RESET fixed at id 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct StateVocabulary {
    labels: Vec<String>,
    index: HashMap<String, StateId>,
}

impl PartialEq for StateVocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

impl Eq for StateVocabulary {}

impl TryFrom<Vec<String>> for StateVocabulary {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        match labels.split_first() {
            Some((first, rest)) if first == RESET_LABEL => Self::from_labels(rest),
            _ => Err(Error::Input(format!("vocabulary must start with {RESET_LABEL:?}"))),
        }
    }
}

impl From<StateVocabulary> for Vec<String> {
    fn from(v: StateVocabulary) -> Self {
        v.labels
    }
}

impl Default for StateVocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl StateVocabulary {
    /// A vocabulary holding only RESET.
    pub fn new() -> Self {
        let mut index = HashMap::new();
        index.insert(RESET_LABEL.to_string(), RESET);
        StateVocabulary { labels: vec![RESET_LABEL.to_string()], index }
    }

    /// Builds a vocabulary from input labels in the given order (ids 1..).
    pub fn from_labels<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = StateVocabulary::new();
        for label in labels {
            let label = label.as_ref();
            if vocab.id(label).is_some() {
                return Err(Error::Input(format!("duplicate state label {label:?}")));
            }
            vocab.intern(label)?;
        }
        Ok(vocab)
    }

    /// Returns the id of `label`, adding it if new.
    pub fn intern(&mut self, label: &str) -> Result<StateId> {
        if label == RESET_LABEL {
            return Err(Error::Input(format!(
                "the label {RESET_LABEL:?} is reserved for the path boundary state"
            )));
        }
        if let Some(&id) = self.index.get(label) {
            return Ok(id);
        }
        let id = StateId::try_from(self.labels.len())
            .map_err(|_| Error::Input("more than 2^32 distinct states".into()))?;
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        Ok(id)
    }

    pub fn id(&self, label: &str) -> Option<StateId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: StateId) -> &str {
        &self.labels[id as usize]
    }

    /// All labels indexed by id, RESET first.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// |S| including RESET.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of states that occur in input data (RESET excluded).
    pub fn n_input_states(&self) -> usize {
        self.labels.len() - 1
    }
}

/// An immutable collection of paths over a vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct PathCorpus {
    vocabulary: StateVocabulary,
    paths: Vec<Vec<StateId>>,
    n_clicks: usize,
    dropped_paths: usize,
}

impl PathCorpus {
    /// Validates and wraps already-encoded paths.
    pub fn from_paths(vocabulary: StateVocabulary, paths: Vec<Vec<StateId>>) -> Result<Self> {
        let n_states = vocabulary.len();
        for (i, path) in paths.iter().enumerate() {
            if path.is_empty() {
                return Err(Error::Input(format!("path {i} is empty")));
            }
            if let Some(&bad) = path.iter().find(|&&s| s == RESET || s as usize >= n_states) {
                return Err(Error::Input(format!("path {i} contains invalid state id {bad}")));
            }
        }
        let n_clicks = paths.iter().map(Vec::len).sum();
        Ok(PathCorpus { vocabulary, paths, n_clicks, dropped_paths: 0 })
    }

    /// Builds a corpus from label sequences, interning labels in order of appearance.
    pub fn from_label_paths<P, S>(paths: &[P]) -> Result<Self>
    where
        P: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut vocabulary = StateVocabulary::new();
        let mut encoded = Vec::with_capacity(paths.len());
        for path in paths {
            let ids = path
                .as_ref()
                .iter()
                .map(|l| vocabulary.intern(l.as_ref()))
                .collect::<Result<Vec<_>>>()?;
            encoded.push(ids);
        }
        Self::from_paths(vocabulary, encoded)
    }

    pub fn vocabulary(&self) -> &StateVocabulary {
        &self.vocabulary
    }

    pub fn paths(&self) -> &[Vec<StateId>] {
        &self.paths
    }

    /// |S| including RESET.
    pub fn n_states(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Total visited nodes over all paths.
    pub fn n_clicks(&self) -> usize {
        self.n_clicks
    }

    /// Paths discarded by the minimum-length filter while loading.
    pub fn dropped_paths(&self) -> usize {
        self.dropped_paths
    }

    /// Number of prepared (context, next) pairs at any order: clicks plus one
    /// terminating RESET per path.
    pub fn n_transitions(&self) -> usize {
        self.n_clicks + self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// The paths at `indices`, in that order, over the same vocabulary.
    pub fn subset(&self, indices: &[usize]) -> PathCorpus {
        let paths: Vec<_> = indices.iter().map(|&i| self.paths[i].clone()).collect();
        let n_clicks = paths.iter().map(Vec::len).sum();
        PathCorpus { vocabulary: self.vocabulary.clone(), paths, n_clicks, dropped_paths: 0 }
    }

    /// Writes one path per line, labels joined by `delimiter`.
    pub fn write<W: Write>(&self, mut out: W, delimiter: char) -> Result<()> {
        let mut sep = [0u8; 4];
        let sep = delimiter.encode_utf8(&mut sep).as_bytes();
        for path in &self.paths {
            for (i, &s) in path.iter().enumerate() {
                if i > 0 {
                    out.write_all(sep)?;
                }
                out.write_all(self.vocabulary.label(s).as_bytes())?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: impl AsRef<Path>, delimiter: char) -> Result<()> {
        let mut file = std::io::BufWriter::new(File::create(path)?);
        self.write(&mut file, delimiter)?;
        file.flush()?;
        Ok(())
    }
}

/// How a corpus file is parsed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadOptions {
    pub delimiter: char,
    /// Paths with fewer clicks are dropped (and counted).
    pub min_path_length: usize,
    /// Lines starting with this prefix are ignored.
    pub comment_prefix: String,
    /// Number of leading lines to skip unconditionally (file headers).
    pub skip_lines: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: '\t',
            min_path_length: 2,
            comment_prefix: "#".to_string(),
            skip_lines: 0,
        }
    }
}

/// Parses a line-oriented corpus: one path per non-empty, non-comment line.
///
/// Empty tokens (repeated or trailing delimiters) are ignored. The vocabulary
/// only contains labels of paths that survive the length filter.
pub fn load_corpus<R: BufRead>(source: R, options: &LoadOptions) -> Result<PathCorpus> {
    if options.min_path_length < 2 {
        return Err(Error::Input(format!(
            "min_path_length must be at least 2, got {}",
            options.min_path_length
        )));
    }
    if options.delimiter.is_control() && options.delimiter != '\t' {
        return Err(Error::Input(format!("unusable delimiter {:?}", options.delimiter)));
    }
    let mut vocabulary = StateVocabulary::new();
    let mut paths = Vec::new();
    let mut dropped = 0usize;
    let mut n_clicks = 0usize;
    for (line_no, line) in source.lines().enumerate() {
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => {
                Error::Input(format!("line {} is not valid UTF-8", line_no + 1))
            }
            _ => Error::Io(e),
        })?;
        if line_no < options.skip_lines {
            continue;
        }
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty()
            || (!options.comment_prefix.is_empty() && line.starts_with(&options.comment_prefix))
        {
            continue;
        }
        let tokens: Vec<&str> = line.split(options.delimiter).filter(|t| !t.is_empty()).collect();
        if let Some(t) = tokens.iter().find(|&&t| t == RESET_LABEL) {
            return Err(Error::Input(format!(
                "line {}: token {t:?} is reserved for the path boundary state",
                line_no + 1
            )));
        }
        if tokens.len() < options.min_path_length {
            dropped += 1;
            continue;
        }
        let ids = tokens
            .iter()
            .map(|t| vocabulary.intern(t))
            .collect::<Result<Vec<_>>>()?;
        n_clicks += ids.len();
        paths.push(ids);
    }
    if paths.is_empty() {
        return Err(Error::Input(format!(
            "corpus is empty after filtering ({dropped} paths shorter than {} dropped)",
            options.min_path_length
        )));
    }
    Ok(PathCorpus { vocabulary, paths, n_clicks, dropped_paths: dropped })
}

pub fn load_corpus_str(text: &str, options: &LoadOptions) -> Result<PathCorpus> {
    load_corpus(text.as_bytes(), options)
}

pub fn load_corpus_file(path: impl AsRef<Path>, options: &LoadOptions) -> Result<PathCorpus> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    load_corpus(BufReader::new(file), options)
}

/// Writes `path` padded for order `k` into `buf`: k RESETs, the path, one RESET.
pub fn pad_path_into(path: &[StateId], k: usize, buf: &mut Vec<StateId>) {
    buf.clear();
    buf.reserve(path.len() + k + 1);
    buf.extend(std::iter::repeat_n(RESET, k));
    buf.extend_from_slice(path);
    buf.push(RESET);
}

/// The (context, next) stream of a corpus prepared for an order-`k` chain.
#[derive(Clone, Copy, Debug)]
pub struct PreparedSequence<'a> {
    corpus: &'a PathCorpus,
    order: usize,
}

/// One RESET-padded path; its windows of length k+1 are the prepared pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreparedPath {
    padded: Vec<StateId>,
    order: usize,
}

impl PreparedPath {
    /// Pairs in path order; the context of an order-0 pair is empty.
    pub fn pairs(&self) -> impl Iterator<Item = (&[StateId], StateId)> + '_ {
        let k = self.order;
        self.padded.windows(k + 1).map(move |w| (&w[..k], w[k]))
    }

    pub fn padded(&self) -> &[StateId] {
        &self.padded
    }
}

/// Prepares `corpus` for an order-`k` chain.
pub fn prepare_sequences(corpus: &PathCorpus, k: usize) -> PreparedSequence<'_> {
    PreparedSequence { corpus, order: k }
}

impl<'a> PreparedSequence<'a> {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Always `n_clicks + n_paths`.
    pub fn pair_count(&self) -> usize {
        self.corpus.n_transitions()
    }

    pub fn paths(&self) -> impl Iterator<Item = PreparedPath> + 'a {
        let k = self.order;
        self.corpus.paths.iter().map(move |p| {
            let mut padded = Vec::new();
            pad_path_into(p, k, &mut padded);
            PreparedPath { padded, order: k }
        })
    }

    /// Calls `f` for every pair, path by path, reusing one buffer.
    pub fn for_each_pair<F: FnMut(&[StateId], StateId)>(&self, mut f: F) {
        let k = self.order;
        let mut buf = Vec::new();
        for path in &self.corpus.paths {
            pad_path_into(path, k, &mut buf);
            for w in buf.windows(k + 1) {
                f(&w[..k], w[k]);
            }
        }
    }
}
