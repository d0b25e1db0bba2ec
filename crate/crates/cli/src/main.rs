//! `markov-order`: select the order of a Markov chain for a path corpus,
//! generate synthetic corpora, and export structure summaries.
//!
//! Exit codes: 0 success, 2 bad input or arguments, 1 internal failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use markov_order::corpus::{
    generate_markov_corpus, generate_uniform_corpus, load_corpus_file, Budget, GeneratingChain, LoadOptions,
    MarkovGeneratorConfig, RowSource,
};
use markov_order::counts::count_transitions;
use markov_order::crossval::RankTargets;
use markov_order::infocrit::BicObservations;
use markov_order::likelihood::DfStates;
use markov_order::report::{run_selection, SelectionConfig};
use markov_order::structure::{
    global_heatmap, local_graph, self_transition_profile, split_by_endpoints, Centrality, LocalGraphOptions,
};
use markov_order::{Error, PathCorpus, Result};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "markov-order", version, about = "Markov chain order selection for navigation paths")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare orders 0..=K with every selection method and write a report.
    Select(SelectArgs),
    /// Write a synthetic corpus plus a `<out>.truth.json` sidecar.
    #[command(subcommand)]
    Generate(GenerateCommand),
    /// Export heatmaps, local graphs and self-transition profiles.
    Structure(StructureArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Corpus file, one path per line.
    #[arg(long)]
    input: PathBuf,
    /// Token separator: a single character, `tab`, `space` or `comma`.
    #[arg(long, default_value = "tab", value_parser = parse_delimiter)]
    delimiter: char,
    /// Paths with fewer clicks are dropped.
    #[arg(long, default_value_t = 2)]
    min_path_length: usize,
    /// Lines starting with this prefix are skipped.
    #[arg(long, default_value = "#")]
    comment_prefix: String,
    /// Leading lines to skip (file headers).
    #[arg(long, default_value_t = 0)]
    skip_lines: usize,
}

impl InputArgs {
    fn load(&self) -> Result<PathCorpus> {
        let options = LoadOptions {
            delimiter: self.delimiter,
            min_path_length: self.min_path_length,
            comment_prefix: self.comment_prefix.clone(),
            skip_lines: self.skip_lines,
        };
        load_corpus_file(&self.input, &options).map_err(|e| match e {
            Error::Io(io) => Error::Input(format!("{}: {io}", self.input.display())),
            other => other,
        })
    }
}

fn parse_delimiter(s: &str) -> std::result::Result<char, String> {
    match s {
        "tab" | "\\t" => Ok('\t'),
        "space" => Ok(' '),
        "comma" => Ok(','),
        _ => {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(format!("delimiter must be one character, got {s:?}")),
            }
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 5)]
    max_order: usize,
    /// Dirichlet hyperparameter for evidence and cross-validation.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report file (json) or directory (csv); json goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Single-line JSON.
    #[arg(long)]
    compact: bool,
    /// Also report the TopK hit rate.
    #[arg(long)]
    topk: Option<usize>,
    /// Leave RESET out of |S| in the χ² degrees of freedom.
    #[arg(long)]
    df_without_reset: bool,
    /// Use the click count instead of all transitions as the BIC sample size.
    #[arg(long)]
    bic_clicks_only: bool,
    /// Do not score transitions into RESET during cross-validation.
    #[arg(long)]
    cv_exclude_reset: bool,
}

#[derive(Subcommand, Debug)]
enum GenerateCommand {
    /// Uniformly random clicks, one extra symbol ending a path.
    Uniform {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        clicks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: GenerateOutput,
    },
    /// Paths from a random order-k chain with Dirichlet rows.
    Markov {
        #[arg(long)]
        order: usize,
        #[arg(long)]
        states: usize,
        #[arg(long, default_value_t = 1.0)]
        concentration: f64,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, default_value_t = 5.0)]
        mean_length: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: GenerateOutput,
    },
    /// Order-1 paths that repeat the current state with probability `stay`.
    Sticky {
        #[arg(long)]
        states: usize,
        #[arg(long, default_value_t = 0.9)]
        stay: f64,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, default_value_t = 5.0)]
        mean_length: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: GenerateOutput,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct BudgetArgs {
    #[arg(long)]
    clicks: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
}

impl BudgetArgs {
    fn budget(&self) -> Budget {
        match (self.clicks, self.paths) {
            (Some(c), _) => Budget::Clicks(c),
            (None, Some(p)) => Budget::Paths(p),
            (None, None) => unreachable!("clap requires one budget"),
        }
    }
}

#[derive(Args, Debug)]
struct GenerateOutput {
    /// Corpus file; the ground truth goes to `<out>.truth.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "tab", value_parser = parse_delimiter)]
    delimiter: char,
}

#[derive(Args, Debug)]
struct StructureArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Order-1 heatmap CSV (stdout without a path).
    #[arg(long, num_args = 0..=1, default_missing_value = "-")]
    heatmap: Option<String>,
    /// Local graph JSON (stdout without a path).
    #[arg(long, num_args = 0..=1, default_missing_value = "-")]
    graph: Option<String>,
    /// Order of the local graph.
    #[arg(long, default_value_t = 1)]
    graph_order: usize,
    #[arg(long, default_value_t = 4)]
    top_nodes: usize,
    #[arg(long, default_value_t = 4)]
    top_edges: usize,
    #[arg(long, value_enum, default_value_t = CentralityArg::Incoming)]
    centrality: CentralityArg,
    /// Comma-separated labels of the first order−1 states of the graph contexts.
    #[arg(long)]
    anchor: Option<String>,
    /// Self-transition profile CSV (stdout without a path).
    #[arg(long, num_args = 0..=1, default_missing_value = "-")]
    self_profile: Option<String>,
    /// Largest k of the self-transition profile.
    #[arg(long, default_value_t = 5)]
    max_order: usize,
    /// Number of states in the self-transition profile.
    #[arg(long, default_value_t = 3)]
    top: usize,
    /// Heatmaps of the same-endpoint and different-endpoint paths, written
    /// to `<prefix>_same.csv` and `<prefix>_different.csv`.
    #[arg(long, num_args = 0..=1, default_missing_value = "endpoints")]
    split_endpoints: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CentralityArg {
    Incoming,
    Outgoing,
}

fn open_output(target: &str) -> Result<Box<dyn Write>> {
    if target == "-" {
        Ok(Box::new(io::stdout().lock()))
    } else {
        Ok(Box::new(BufWriter::new(File::create(target)?)))
    }
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let config = SelectionConfig {
        max_order: args.max_order,
        alpha: args.alpha,
        n_folds: args.folds,
        seed: args.seed,
        df_states: if args.df_without_reset { DfStates::WithoutReset } else { DfStates::WithReset },
        bic_observations: if args.bic_clicks_only {
            BicObservations::ClicksOnly
        } else {
            BicObservations::AllTransitions
        },
        cv_targets: if args.cv_exclude_reset { RankTargets::ExcludeReset } else { RankTargets::IncludeReset },
        topk: args.topk,
        ..SelectionConfig::default()
    };
    config.validate()?;
    let corpus = args.input.load()?;
    let report = run_selection(&corpus, &config)?;
    match (args.format, &args.out) {
        (Format::Json, Some(path)) => {
            let mut body = report.to_json(!args.compact)?;
            body.push('\n');
            std::fs::write(path, body)?;
        }
        (Format::Json, None) => {
            let mut out = io::stdout().lock();
            writeln!(out, "{}", report.to_json(!args.compact)?)?;
        }
        (Format::Csv, Some(dir)) => report.write_csv_dir(dir)?,
        (Format::Csv, None) => {
            let mut out = io::stdout().lock();
            for (name, body) in report.panel_csvs() {
                writeln!(out, "# {name}\n{body}")?;
            }
        }
    }
    Ok(())
}

fn write_generated(corpus: &PathCorpus, output: &GenerateOutput, truth: serde_json::Value) -> Result<()> {
    corpus.write_file(&output.out, output.delimiter)?;
    let mut sidecar = output.out.clone().into_os_string();
    sidecar.push(".truth.json");
    let mut body = serde_json::to_string_pretty(&truth)?;
    body.push('\n');
    std::fs::write(Path::new(&sidecar), body)?;
    Ok(())
}

fn chain_truth(kind: &str, chain: &GeneratingChain, corpus: &PathCorpus, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "generator": kind,
        "parameters": extra,
        "n_paths": corpus.n_paths(),
        "n_clicks": corpus.n_clicks(),
        "labels": corpus.vocabulary().labels(),
        "chain": chain,
    })
}

fn budget_json(budget: Budget) -> serde_json::Value {
    match budget {
        Budget::Clicks(c) => json!({ "clicks": c }),
        Budget::Paths(p) => json!({ "paths": p }),
    }
}

fn cmd_generate(command: &GenerateCommand) -> Result<()> {
    match command {
        GenerateCommand::Uniform { states, clicks, seed, output } => {
            let corpus = generate_uniform_corpus(*states, *clicks, *seed)?;
            let truth = json!({
                "generator": "uniform",
                "parameters": { "states": states, "clicks": clicks, "seed": seed },
                "n_paths": corpus.n_paths(),
                "n_clicks": corpus.n_clicks(),
                "labels": corpus.vocabulary().labels(),
                "true_order": 0,
            });
            write_generated(&corpus, output, truth)
        }
        GenerateCommand::Markov { order, states, concentration, budget, mean_length, seed, output } => {
            let config = MarkovGeneratorConfig {
                order: *order,
                rows: RowSource::Concentration(*concentration),
                n_states: *states,
                budget: budget.budget(),
                mean_path_length: *mean_length,
                seed: *seed,
            };
            let (corpus, chain) = generate_markov_corpus(&config)?;
            let params = json!({
                "order": order, "states": states, "concentration": concentration,
                "budget": budget_json(config.budget), "mean_length": mean_length, "seed": seed,
            });
            write_generated(&corpus, output, chain_truth("markov", &chain, &corpus, params))
        }
        GenerateCommand::Sticky { states, stay, budget, mean_length, seed, output } => {
            let chain = GeneratingChain::sticky(*states, *stay)?;
            let config = MarkovGeneratorConfig {
                order: 1,
                rows: RowSource::Explicit(chain.rows.clone()),
                n_states: *states,
                budget: budget.budget(),
                mean_path_length: *mean_length,
                seed: *seed,
            };
            let (corpus, chain) = generate_markov_corpus(&config)?;
            let params = json!({
                "states": states, "stay": stay,
                "budget": budget_json(config.budget), "mean_length": mean_length, "seed": seed,
            });
            write_generated(&corpus, output, chain_truth("sticky", &chain, &corpus, params))
        }
    }
}

fn write_heatmap(corpus: &PathCorpus, target: &str) -> Result<()> {
    let heatmap = global_heatmap(&count_transitions(corpus, 1))?;
    let mut out = open_output(target)?;
    heatmap.write_csv(&mut out, corpus.vocabulary())?;
    out.flush()?;
    Ok(())
}

fn cmd_structure(args: &StructureArgs) -> Result<()> {
    if args.heatmap.is_none() && args.graph.is_none() && args.self_profile.is_none() && args.split_endpoints.is_none() {
        return Err(Error::Input(
            "nothing to do: pass --heatmap, --graph, --self-profile or --split-endpoints".into(),
        ));
    }
    if args.graph.is_some() && args.graph_order < 1 {
        return Err(Error::Input("--graph-order must be at least 1".into()));
    }
    if args.self_profile.is_some() && args.max_order < 1 {
        return Err(Error::Input("--max-order must be at least 1".into()));
    }
    let corpus = args.input.load()?;
    if let Some(target) = &args.heatmap {
        write_heatmap(&corpus, target)?;
    }
    if let Some(target) = &args.graph {
        let anchor = match &args.anchor {
            None => None,
            Some(text) => Some(
                text.split(',')
                    .filter(|s| !s.is_empty())
                    .map(|label| {
                        corpus
                            .vocabulary()
                            .id(label)
                            .ok_or_else(|| Error::Input(format!("unknown anchor label {label:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let options = LocalGraphOptions {
            top_nodes: args.top_nodes,
            top_edges: args.top_edges,
            centrality: match args.centrality {
                CentralityArg::Incoming => Centrality::Incoming,
                CentralityArg::Outgoing => Centrality::Outgoing,
            },
            anchor,
        };
        let graph = local_graph(&count_transitions(&corpus, args.graph_order), corpus.vocabulary(), &options)?;
        if !graph.anchor_observed {
            eprintln!("warning: anchor {:?} never occurs; graph is empty", graph.anchor);
        }
        let mut out = open_output(target)?;
        writeln!(out, "{}", graph.to_json()?)?;
        out.flush()?;
    }
    if let Some(target) = &args.self_profile {
        let profile = self_transition_profile(&corpus, args.max_order, args.top)?;
        for m in &profile.missing {
            eprintln!("note: context {}^{} never occurs; point omitted", m.state, m.k);
        }
        let mut out = open_output(target)?;
        profile.write_csv(&mut out)?;
        out.flush()?;
    }
    if let Some(prefix) = &args.split_endpoints {
        let (same, different) = split_by_endpoints(&corpus);
        for (part, name) in [(&same, "same"), (&different, "different")] {
            let target = format!("{prefix}_{name}.csv");
            if part.is_empty() {
                eprintln!("warning: no {name}-endpoint paths; {target} not written");
                continue;
            }
            write_heatmap(part, &target)?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Select(args) => cmd_select(args),
        Command::Generate(command) => cmd_generate(command),
        Command::Structure(args) => cmd_structure(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
