mod common;

use common::{brute_force_log_likelihood, chi2_sf_quadrature, mc_evidence};
use markov_order::bayes::{fit_posterior_mean, log_evidence};
use markov_order::corpus::{
    generate_markov_corpus, generate_uniform_corpus, Budget, GeneratingChain, MarkovGeneratorConfig, PathCorpus,
    RowSource,
};
use markov_order::counts::{count_transitions, ContextCounts, TransitionRow};
use markov_order::crossval::{cross_validate_orders, stratified_folds, CvOptions};
use markov_order::infocrit::criterion_table;
use markov_order::likelihood::{lrt_test, mle_log_likelihood, DfStates};
use markov_order::numerics::chi2_sf;
use markov_order::structure::{global_heatmap, local_graph, split_by_endpoints, LocalGraphOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn chain_corpus(chain: &GeneratingChain, budget: Budget, mean_len: f64, seed: u64) -> PathCorpus {
    let config = MarkovGeneratorConfig {
        order: chain.order,
        rows: RowSource::Explicit(chain.rows.clone()),
        n_states: chain.n_states,
        budget,
        mean_path_length: mean_len,
        seed,
    };
    generate_markov_corpus(&config).unwrap().0
}

fn ac2_corpus(seed: u64) -> PathCorpus {
    let config = MarkovGeneratorConfig {
        order: 2,
        rows: RowSource::Concentration(0.1),
        n_states: 5,
        budget: Budget::Clicks(200_000),
        mean_path_length: 5.0,
        seed,
    };
    generate_markov_corpus(&config).unwrap().0
}

#[test]
fn chi2_df12_matches_quadrature() {
    let oracle = chi2_sf_quadrature(20.0, 12);
    assert!((chi2_sf(20.0, 12.0).unwrap() - oracle).abs() < 1e-8, "{oracle}");
}

#[test]
fn evidence_examples_match_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    // One transition A → B over two states.
    let single = ContextCounts::from_rows(1, 2, [(vec![0], TransitionRow::from_counts([(1, 1)]))]).unwrap();
    let (mc, se) = mc_evidence(&[vec![(1, 1)]], 2, 1.0, 1_000_000, &mut rng);
    let exact = log_evidence(&single, 1.0).unwrap();
    assert!((exact - 0.5f64.ln()).abs() < 1e-13);
    assert!((exact.exp() - mc).abs() < 3.0 * se, "{mc} ± {se}");
    // Path (A, B) padded with RESET: three rows with one count each.
    let corpus = PathCorpus::from_label_paths(&[["A", "B"]]).unwrap();
    let counts = count_transitions(&corpus, 1);
    let rows: Vec<Vec<(usize, i32)>> = counts
        .rows()
        .map(|(_, r)| r.entries().iter().map(|&(s, c)| (s as usize, c as i32)).collect())
        .collect();
    let (mc, se) = mc_evidence(&rows, 3, 1.0, 1_000_000, &mut rng);
    let exact = log_evidence(&counts, 1.0).unwrap();
    assert!((exact - (1.0f64 / 27.0).ln()).abs() < 1e-13);
    assert!((exact.exp() - mc).abs() < 3.0 * se, "{mc} ± {se}");
}

#[test]
fn lrt_statistic_matches_recomputed_log_likelihoods() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let n = rng.random_range(2..6u32);
        let paths: Vec<Vec<String>> = (0..rng.random_range(1..30))
            .map(|_| (0..rng.random_range(2..10)).map(|_| format!("v{}", rng.random_range(0..n))).collect())
            .collect();
        let corpus = PathCorpus::from_label_paths(&paths).unwrap();
        let ll0 = brute_force_log_likelihood(corpus.paths(), 0);
        let ll1 = brute_force_log_likelihood(corpus.paths(), 1);
        assert!((mle_log_likelihood(&count_transitions(&corpus, 0)) - ll0).abs() < 1e-9);
        let r = lrt_test(&corpus, 0, 1, DfStates::WithReset).unwrap();
        let expect = (2.0 * (ll1 - ll0)).max(0.0);
        assert!((r.eta - expect).abs() < 1e-9 * expect.max(1.0), "{} vs {expect}", r.eta);
    }
}

#[test]
fn lrt_keeps_order_zero_when_path_boundaries_are_negligible() {
    // Uniform clicks over 26 states in very long paths: the only non-uniform
    // rows are the rare path starts and ends, so order 0 should stand.
    let chain = GeneratingChain::from_rows(0, 26, vec![vec![1.0 / 26.0; 26]]).unwrap();
    let mut p_sum = 0.0;
    for seed in 1..=3 {
        let corpus = chain_corpus(&chain, Budget::Clicks(200_000), 5_000.0, seed);
        p_sum += lrt_test(&corpus, 0, 1, DfStates::WithReset).unwrap().p_value;
    }
    assert!(p_sum / 3.0 > 0.01, "mean p = {}", p_sum / 3.0);
}

#[test]
fn lrt_on_short_uniform_paths_detects_boundary_structure() {
    // With short paths the RESET row (a path never ends right after it
    // starts) is a genuine first-order effect, and the test sees it.
    let corpus = generate_uniform_corpus(26, 200_000, 1).unwrap();
    let r = lrt_test(&corpus, 0, 1, DfStates::WithReset).unwrap();
    assert!(r.p_value < 0.01);
}

#[test]
fn aic_on_uniform_corpus_selects_at_most_one() {
    for seed in 1..=2 {
        let corpus = generate_uniform_corpus(26, 200_000, seed).unwrap();
        let lls: Vec<f64> = (0..=3).map(|k| mle_log_likelihood(&count_transitions(&corpus, k))).collect();
        let t = criterion_table(&lls, corpus.n_states(), corpus.n_transitions() as u64).unwrap();
        assert!(t.selected_aic <= 1, "seed {seed}: {:?}", t.aic);
        assert!(t.selected_bic <= 1);
    }
}

#[test]
fn criterion_table_recovers_order_two() {
    let corpus = ac2_corpus(1);
    let lls: Vec<f64> = (0..=5).map(|k| mle_log_likelihood(&count_transitions(&corpus, k))).collect();
    let t = criterion_table(&lls, corpus.n_states(), corpus.n_transitions() as u64).unwrap();
    assert_eq!(t.selected_bic, 2);
    assert!(t.selected_aic == 2 || t.selected_aic == 3);
    // Independent recomputation of both criteria.
    let s = corpus.n_states() as f64;
    let n = (corpus.n_transitions() as f64).ln();
    for k in 0..5 {
        let eta = 2.0 * (lls[5] - lls[k]);
        let df = (s.powi(5) - s.powi(k as i32)) * (s - 1.0);
        assert!((t.aic[k] - (eta - 2.0 * df)).abs() < 1e-9 * eta.abs().max(df));
        assert!((t.bic[k] - (eta - df * n)).abs() < 1e-9 * eta.abs().max(df * n));
    }
}

#[test]
fn folds_balance_ten_thousand_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let paths: Vec<Vec<String>> = (0..10_000)
        .map(|_| (0..rng.random_range(2..40)).map(|_| format!("p{}", rng.random_range(0..8))).collect())
        .collect();
    let corpus = PathCorpus::from_label_paths(&paths).unwrap();
    let folds = stratified_folds(&corpus, 10, 5).unwrap();
    let max = *folds.fold_clicks.iter().max().unwrap() as f64;
    let min = *folds.fold_clicks.iter().min().unwrap() as f64;
    assert!(max <= 1.10 * min, "{:?}", folds.fold_clicks);
}

#[test]
fn cycle_corpus_ranks_better_at_order_one() {
    let corpus = chain_corpus(&GeneratingChain::cycle(3).unwrap(), Budget::Clicks(30_000), 100.0, 2);
    let cv = cross_validate_orders(&corpus, 1, &CvOptions { seed: 2, ..Default::default() }).unwrap();
    assert!(cv[1].mean_rank < cv[0].mean_rank);
    // Oracle: at order 1 every click is predicted at rank 1 (paths always
    // start at the first state); only the path-ending RESET ranks lower.
    assert!(cv[1].mean_rank < 1.1, "{}", cv[1].mean_rank);
}

#[test]
fn untrained_model_ranks_everything_last() {
    let model = fit_posterior_mean(&ContextCounts::empty(1, 4), 1.0).unwrap();
    let test = ContextCounts::from_rows(1, 4, [(vec![1], TransitionRow::from_counts([(2, 3), (3, 1)]))]).unwrap();
    let (weighted, n) = markov_order::crossval::rank_sums(&model, &test, Default::default()).unwrap();
    assert_eq!(weighted, 4 * 4);
    assert_eq!(n, 4);
}

#[test]
fn cv_recovers_order_two_and_topk_agrees() {
    let corpus = ac2_corpus(1);
    let options = CvOptions { seed: 1, topk: Some(2), ..Default::default() };
    let cv = cross_validate_orders(&corpus, 3, &options).unwrap();
    let best_rank = markov_order::crossval::select_cv_order(&cv).unwrap();
    assert_eq!(best_rank, 2);
    // TopK orders the low orders the same way mean rank does.
    let hits: Vec<f64> = cv.iter().map(|r| r.topk_hit_rate.unwrap()).collect();
    assert!(hits[0] < hits[1] && hits[1] < hits[2], "{hits:?}");
    let ranks: Vec<f64> = cv.iter().map(|r| r.mean_rank).collect();
    assert!(ranks[0] > ranks[1] && ranks[1] > ranks[2], "{ranks:?}");
}

fn sticky_corpus(seed: u64) -> PathCorpus {
    chain_corpus(&GeneratingChain::sticky(5, 0.9).unwrap(), Budget::Clicks(100_000), 200.0, seed)
}

#[test]
fn sticky_heatmap_is_diagonal_heavy() {
    let corpus = sticky_corpus(3);
    let h = global_heatmap(&count_transitions(&corpus, 1)).unwrap();
    let diagonal: f64 = (1..h.n_states()).map(|i| h.cells[i][i]).sum();
    assert!(diagonal > 0.85, "{diagonal}");
    for i in 1..h.n_states() {
        let off = (0..h.n_states()).filter(|&j| j != i).map(|j| h.cells[i][j]).fold(0.0, f64::max);
        assert!(h.cells[i][i] > off);
    }
}

#[test]
fn sticky_anchored_graphs_stay() {
    let corpus = sticky_corpus(4);
    let vocab = corpus.vocabulary();
    let t = 1;
    for k in [2usize, 3] {
        let options = LocalGraphOptions { anchor: Some(vec![t; k - 1]), top_nodes: 5, top_edges: 5, ..Default::default() };
        let g = local_graph(&count_transitions(&corpus, k), vocab, &options).unwrap();
        assert!(g.anchor_observed);
        let label = vocab.label(t);
        let heaviest = g
            .edges
            .iter()
            .filter(|e| e.src == label)
            .max_by(|a, b| a.weight.total_cmp(&b.weight))
            .unwrap();
        assert_eq!(heaviest.dst, label, "k = {k}");
    }
}

#[test]
fn endpoint_splits_of_homogeneous_corpus_look_alike() {
    let chain = GeneratingChain::sticky(5, 0.5).unwrap();
    let corpus = chain_corpus(&chain, Budget::Clicks(400_000), 20.0, 6);
    let (same, different) = split_by_endpoints(&corpus);
    let a = global_heatmap(&count_transitions(&same, 1)).unwrap();
    let b = global_heatmap(&count_transitions(&different, 1)).unwrap();
    let dev = a.max_deviation(&b).unwrap();
    assert!(dev < 0.02, "{dev}");
}
