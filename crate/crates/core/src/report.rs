//! One-call order selection with every method, assembled into a report with
//! one panel per method (A: log-likelihoods … G: cross-validation).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bayes::{log_evidence, model_posterior, ModelPosterior, PriorKind, DEFAULT_ALPHA};
use crate::corpus::PathCorpus;
use crate::counts::count_all_orders;
use crate::crossval::{cross_validate_orders, select_cv_order, CvOptions, CvResult, RankTargets, DEFAULT_FOLDS};
use crate::error::{Error, Result};
use crate::infocrit::{criterion_table, BicObservations};
use crate::likelihood::{lrt_table, mle_log_likelihood, sequential_lrt_order, DfStates, SIGNIFICANCE_ONE_STAR};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MAX_ORDER: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub max_order: usize,
    pub alpha: f64,
    pub n_folds: usize,
    pub seed: u64,
    pub df_states: DfStates,
    pub bic_observations: BicObservations,
    pub cv_targets: RankTargets,
    /// Also report the TopK hit rate with this K.
    pub topk: Option<usize>,
    /// Level of the sequential adjacent-order LRT used to pick an order.
    pub lrt_level: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            max_order: DEFAULT_MAX_ORDER,
            alpha: DEFAULT_ALPHA,
            n_folds: DEFAULT_FOLDS,
            seed: 0,
            df_states: DfStates::default(),
            bic_observations: BicObservations::default(),
            cv_targets: RankTargets::default(),
            topk: None,
            lrt_level: SIGNIFICANCE_ONE_STAR,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_order < 1 {
            return Err(Error::Input("max order must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Input(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.n_folds < 2 {
            return Err(Error::Input(format!("need at least 2 folds, got {}", self.n_folds)));
        }
        if self.topk == Some(0) {
            return Err(Error::Input("TopK needs K >= 1".into()));
        }
        if !(self.lrt_level > 0.0 && self.lrt_level < 1.0) {
            return Err(Error::Input(format!("LRT level must lie in (0, 1), got {}", self.lrt_level)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Including RESET.
    pub n_states: usize,
    pub n_input_states: usize,
    pub n_paths: usize,
    pub n_clicks: usize,
    pub n_transitions: usize,
    pub dropped_paths: usize,
}

impl CorpusStats {
    pub fn of(corpus: &PathCorpus) -> Self {
        CorpusStats {
            n_states: corpus.n_states(),
            n_input_states: corpus.vocabulary().n_input_states(),
            n_paths: corpus.n_paths(),
            n_clicks: corpus.n_clicks(),
            n_transitions: corpus.n_transitions(),
            dropped_paths: corpus.dropped_paths(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtRow {
    pub k_null: usize,
    pub m_alt: usize,
    pub eta: f64,
    #[serde(with = "crate::serde_float")]
    pub df: f64,
    pub p_value: f64,
    pub stars: String,
    /// m = k + 1.
    pub adjacent: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedOrders {
    pub lrt: usize,
    pub aic: usize,
    pub bic: usize,
    pub bayes_uniform: usize,
    pub bayes_penalty: usize,
    pub cv: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub schema_version: u32,
    pub corpus: CorpusStats,
    pub config: SelectionConfig,
    /// Panel A.
    pub log_likelihood: Vec<f64>,
    /// Panel B.
    pub lrt: Vec<LrtRow>,
    /// Panel C.
    #[serde(with = "crate::serde_float::vec")]
    pub aic: Vec<f64>,
    /// Panel D.
    #[serde(with = "crate::serde_float::vec")]
    pub bic: Vec<f64>,
    pub bic_n: u64,
    /// Panel E.
    pub log_evidence: Vec<f64>,
    /// Panel F.
    pub posterior_uniform: ModelPosterior,
    pub posterior_penalty: ModelPosterior,
    /// Panel G.
    pub cv: Vec<CvResult>,
    pub selected: SelectedOrders,
    pub priors_agree: bool,
    /// The Bayesian order under the uniform prior.
    pub recommendation: usize,
}

/// Runs every method on `corpus` for orders 0..=max_order.
///
/// Counts are built once per order and shared by the likelihood, information
/// criterion and Bayesian panels; cross-validation recounts each training
/// fold and runs alongside them.
pub fn run_selection(corpus: &PathCorpus, config: &SelectionConfig) -> Result<SelectionReport> {
    config.validate()?;
    let cv_options = CvOptions {
        n_folds: config.n_folds,
        alpha: config.alpha,
        seed: config.seed,
        targets: config.cv_targets,
        topk: config.topk,
    };
    let (fitted, cv) = rayon::join(
        || fit_panels(corpus, config),
        || cross_validate_orders(corpus, config.max_order, &cv_options),
    );
    let (log_likelihood, lrt, criteria, log_evidence, posterior_uniform, posterior_penalty) = fitted?;
    let cv = cv?;
    let selected = SelectedOrders {
        lrt: sequential_lrt_order(&lrt, config.max_order, config.lrt_level),
        aic: criteria.selected_aic,
        bic: criteria.selected_bic,
        bayes_uniform: posterior_uniform.selected,
        bayes_penalty: posterior_penalty.selected,
        cv: select_cv_order(&cv).expect("at least two orders"),
    };
    let lrt = lrt
        .into_iter()
        .map(|r| LrtRow {
            stars: r.stars().to_string(),
            adjacent: r.m_alt == r.k_null + 1,
            k_null: r.k_null,
            m_alt: r.m_alt,
            eta: r.eta,
            df: r.df,
            p_value: r.p_value,
        })
        .collect();
    Ok(SelectionReport {
        schema_version: SCHEMA_VERSION,
        corpus: CorpusStats::of(corpus),
        config: config.clone(),
        log_likelihood,
        lrt,
        aic: criteria.aic,
        bic: criteria.bic,
        bic_n: criteria.n,
        log_evidence,
        priors_agree: posterior_uniform.selected == posterior_penalty.selected,
        recommendation: posterior_uniform.selected,
        posterior_uniform,
        posterior_penalty,
        cv,
        selected,
    })
}

type FittedPanels = (
    Vec<f64>,
    Vec<crate::likelihood::LrtResult>,
    crate::infocrit::CriterionTable,
    Vec<f64>,
    ModelPosterior,
    ModelPosterior,
);

fn fit_panels(corpus: &PathCorpus, config: &SelectionConfig) -> Result<FittedPanels> {
    let counts = count_all_orders(corpus, config.max_order);
    let lls: Vec<f64> = counts.iter().map(mle_log_likelihood).collect();
    let df_states = config.df_states.effective(corpus.n_states());
    let lrt = lrt_table(&lls, corpus.n_states(), config.df_states)?;
    let n = match config.bic_observations {
        BicObservations::AllTransitions => corpus.n_transitions(),
        BicObservations::ClicksOnly => corpus.n_clicks(),
    } as u64;
    let criteria = criterion_table(&lls, df_states, n)?;
    let evidence = counts
        .iter()
        .map(|c| log_evidence(c, config.alpha))
        .collect::<Result<Vec<_>>>()?;
    let uniform = model_posterior(&evidence, PriorKind::Uniform, corpus.n_states())?;
    let penalty = model_posterior(&evidence, PriorKind::ExponentialPenalty, corpus.n_states())?;
    Ok((lls, lrt, criteria, evidence, uniform, penalty))
}

impl SelectionReport {
    pub fn to_json(&self, pretty: bool) -> Result<String> {
        Ok(if pretty { serde_json::to_string_pretty(self)? } else { serde_json::to_string(self)? })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One CSV document per panel, keyed by file name.
    pub fn panel_csvs(&self) -> Vec<(&'static str, String)> {
        let mut a = String::from("k,log_likelihood\n");
        for (k, v) in self.log_likelihood.iter().enumerate() {
            let _ = writeln!(a, "{k},{v}");
        }
        let mut b = String::from("k,m,eta,df,p_value,stars,adjacent\n");
        for r in &self.lrt {
            let _ = writeln!(b, "{},{},{},{},{},{},{}", r.k_null, r.m_alt, r.eta, r.df, r.p_value, r.stars, r.adjacent);
        }
        let mut c = String::from("k,aic\n");
        for (k, v) in self.aic.iter().enumerate() {
            let _ = writeln!(c, "{k},{v}");
        }
        let mut d = String::from("k,bic\n");
        for (k, v) in self.bic.iter().enumerate() {
            let _ = writeln!(d, "{k},{v}");
        }
        let mut e = String::from("k,log_evidence\n");
        for (k, v) in self.log_evidence.iter().enumerate() {
            let _ = writeln!(e, "{k},{v}");
        }
        let mut f = String::from("k,prior_uniform,posterior_uniform,prior_penalty,posterior_penalty\n");
        let (u, p) = (&self.posterior_uniform, &self.posterior_penalty);
        for k in 0..u.posterior.len() {
            let _ = writeln!(f, "{k},{},{},{},{}", u.prior[k], u.posterior[k], p.prior[k], p.posterior[k]);
        }
        let mut g = String::from("k,mean_rank,std_rank,topk_hit_rate\n");
        for r in &self.cv {
            let hit = r.topk_hit_rate.map(|h| h.to_string()).unwrap_or_default();
            let _ = writeln!(g, "{},{},{},{hit}", r.order, r.mean_rank, r.std_rank);
        }
        vec![
            ("panel_a_log_likelihood.csv", a),
            ("panel_b_lrt.csv", b),
            ("panel_c_aic.csv", c),
            ("panel_d_bic.csv", d),
            ("panel_e_log_evidence.csv", e),
            ("panel_f_posterior.csv", f),
            ("panel_g_cv.csv", g),
        ]
    }

    /// Writes every panel CSV into `dir`, creating it if needed.
    pub fn write_csv_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, body) in self.panel_csvs() {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_uniform_corpus;

    fn small_report() -> SelectionReport {
        let corpus = generate_uniform_corpus(4, 3_000, 5).unwrap();
        let config = SelectionConfig { max_order: 3, seed: 11, topk: Some(2), ..Default::default() };
        run_selection(&corpus, &config).unwrap()
    }

    #[test]
    fn arrays_have_one_entry_per_order() {
        let r = small_report();
        let n = r.config.max_order + 1;
        assert_eq!(r.log_likelihood.len(), n);
        assert_eq!(r.aic.len(), n);
        assert_eq!(r.bic.len(), n);
        assert_eq!(r.log_evidence.len(), n);
        assert_eq!(r.posterior_uniform.posterior.len(), n);
        assert_eq!(r.posterior_penalty.posterior.len(), n);
        assert_eq!(r.cv.len(), n);
        assert_eq!(r.lrt.len(), n * (n - 1) / 2);
        let s = &r.selected;
        for k in [s.lrt, s.aic, s.bic, s.bayes_uniform, s.bayes_penalty, s.cv, r.recommendation] {
            assert!(k < n);
        }
        assert!(r.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn json_round_trips() {
        let r = small_report();
        for pretty in [true, false] {
            let back = SelectionReport::from_json(&r.to_json(pretty).unwrap()).unwrap();
            assert_eq!(back, r);
        }
        assert!(r.to_json(false).unwrap().contains("\"schema_version\":1"));
    }

    #[test]
    fn csv_panels() {
        let r = small_report();
        let panels = r.panel_csvs();
        assert_eq!(panels.len(), 7);
        for (_, body) in &panels {
            assert!(body.lines().count() > 1);
        }
        let dir = tempfile::tempdir().unwrap();
        r.write_csv_dir(dir.path()).unwrap();
        assert!(dir.path().join("panel_g_cv.csv").exists());
    }

    #[test]
    fn config_validation() {
        let corpus = generate_uniform_corpus(3, 500, 1).unwrap();
        let bad = SelectionConfig { max_order: 0, ..Default::default() };
        assert!(matches!(run_selection(&corpus, &bad), Err(Error::Input(_))));
        let bad = SelectionConfig { alpha: -1.0, ..Default::default() };
        assert!(run_selection(&corpus, &bad).is_err());
    }
}
