//! Acquisition functions and the batched screening loop: fit on the
//! measured set, score the unmeasured pool, reveal a batch, repeat.
//!
//! One campaign is strictly sequential; campaigns across seeds share
//! nothing and can run in parallel. Every reveal appends to a trace that
//! serializes to JSON with stable keys.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{normal_cdf, normal_pdf, AnalyticsError};
use crate::data::{self, DataError, Dataset};
use crate::neural::PredDist;
use crate::surrogate::{
    evaluate_surrogate, fit_surrogate, predict_surrogate, Mode, Surrogate, SurrogateConfig,
    SurrogateError,
};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("empty score sequence")]
    EmptyScores,
    #[error("pool exhausted: need {needed} candidates, pool has {available}")]
    PoolExhausted { needed: usize, available: usize },
    #[error("campaign aborted: {message}")]
    Aborted {
        message: String,
        /// Everything recorded before the failure, status flagged invalid.
        trace: Box<CampaignTrace>,
    },
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Acquisition {
    Ucb,
    Ei,
    Greedy,
}

impl fmt::Display for Acquisition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Acquisition::Ucb => "ucb",
            Acquisition::Ei => "ei",
            Acquisition::Greedy => "greedy",
        };
        write!(f, "{name}")
    }
}

impl FromStr for Acquisition {
    type Err = CampaignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ucb" => Ok(Acquisition::Ucb),
            "ei" => Ok(Acquisition::Ei),
            "greedy" => Ok(Acquisition::Greedy),
            other => Err(CampaignError::BadConfig(format!(
                "unknown acquisition {other:?} (expected ucb, ei, or greedy)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub surrogate: SurrogateConfig,
    pub acquisition: Acquisition,
    pub beta: f64,
    pub n_init: usize,
    pub budget: usize,
    pub batch_size: usize,
    pub test_fraction: f64,
    pub top_k: usize,
    pub seed: u64,
}

impl CampaignConfig {
    pub fn new(surrogate: SurrogateConfig, acquisition: Acquisition) -> Self {
        Self {
            surrogate,
            acquisition,
            beta: 0.3,
            n_init: 10,
            budget: 100,
            batch_size: 5,
            test_fraction: 0.15,
            top_k: 100,
            seed: 0,
        }
    }

    /// Pool-independent invariants; pool-size checks happen after the split.
    pub fn validate(&self) -> Result<(), CampaignError> {
        self.surrogate.validate()?;
        let bad = |msg: String| Err(CampaignError::BadConfig(msg));
        if self.n_init < 2 {
            return bad(format!("n_init must be at least 2, got {}", self.n_init));
        }
        if self.budget == 0 || self.batch_size == 0 {
            return bad("budget and batch_size must be positive".into());
        }
        if self.budget % self.batch_size != 0 {
            return bad(format!(
                "budget {} is not divisible by batch_size {}",
                self.budget, self.batch_size
            ));
        }
        if self.top_k == 0 {
            return bad("top_k must be positive".into());
        }
        if !self.beta.is_finite() {
            return bad(format!("beta must be finite, got {}", self.beta));
        }
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.budget / self.batch_size
    }

    /// The rng a caller is expected to hand to `run_campaign`.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// mean + beta * std.
pub fn ucb(mean: f64, std: f64, beta: f64) -> f64 {
    debug_assert!(std >= 0.0, "negative predictive std {std}");
    mean + beta * std
}

/// Expected improvement over `best`; the degenerate std = 0 case returns
/// the plain improvement clamped at 0.
pub fn ei(mean: f64, std: f64, best: f64) -> f64 {
    debug_assert!(std >= 0.0, "negative predictive std {std}");
    if std == 0.0 {
        return (mean - best).max(0.0);
    }
    let z = (mean - best) / std;
    (mean - best) * normal_cdf(z) + std * normal_pdf(z)
}

/// Identity on the predicted mean; std is deliberately not consulted.
pub fn greedy(mean: f64) -> f64 {
    mean
}

/// Indices of the `q` largest scores, score-descending, ties broken by
/// ascending index. Asking for more than there are returns everything.
pub fn select_batch(scores: &[f64], q: usize) -> Result<Vec<usize>, CampaignError> {
    assert!(q >= 1, "select_batch needs q >= 1");
    if scores.is_empty() {
        return Err(CampaignError::EmptyScores);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(q.min(scores.len()));
    Ok(order)
}

pub const STATUS_OK: &str = "ok";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalRecord {
    /// 1-based position in the reveal order, initialization included.
    pub eval_index: usize,
    pub id: usize,
    pub raw_target: f64,
    /// Fraction of the true top-k measured after this evaluation.
    pub frac_top_k: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based fit round; metrics reflect the model fitted at round start.
    pub round: usize,
    pub test_tau: f64,
    pub test_r2: f64,
    pub diagnostics: serde_json::Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignTrace {
    pub config: CampaignConfig,
    pub seed: u64,
    pub dataset: String,
    pub evaluations: Vec<EvalRecord>,
    pub rounds: Vec<RoundRecord>,
    pub status: String,
}

impl CampaignTrace {
    pub fn completed(&self) -> bool {
        self.status == STATUS_OK
    }

    /// Budget-normalized discovery area: the mean top-k fraction over the
    /// post-initialization evaluations only.
    pub fn bo_auc(&self) -> Result<f64, AnalyticsError> {
        if !self.completed() {
            return Err(AnalyticsError::InvalidTrace(format!("status {:?}", self.status)));
        }
        let expected = self.config.n_init + self.config.budget;
        if self.evaluations.len() != expected {
            return Err(AnalyticsError::InvalidTrace(format!(
                "{} evaluations, expected {expected}",
                self.evaluations.len()
            )));
        }
        for pair in self.evaluations.windows(2) {
            if pair[1].frac_top_k < pair[0].frac_top_k {
                return Err(AnalyticsError::InvalidTrace(format!(
                    "frac_top_k decreases at evaluation {}",
                    pair[1].eval_index
                )));
            }
        }
        let fracs: Vec<f64> =
            self.evaluations[self.config.n_init..].iter().map(|e| e.frac_top_k).collect();
        crate::analytics::bo_auc(&fracs)
    }

    pub fn final_frac_top_k(&self) -> Option<f64> {
        self.evaluations.last().map(|e| e.frac_top_k)
    }

    pub fn final_test_tau(&self) -> Option<f64> {
        self.rounds.last().map(|r| r.test_tau)
    }
}

/// Seam between the loop and the models, keyed by dataset ids so tests and
/// oracles can bypass feature-based fitting.
pub trait CampaignBackend {
    fn fit(
        &mut self,
        dataset: &Dataset,
        measured: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<(), SurrogateError>;

    fn predict(&self, dataset: &Dataset, ids: &[usize]) -> Result<PredDist, SurrogateError>;

    /// (tau, R^2) on held-out ids.
    fn evaluate(&self, dataset: &Dataset, test_ids: &[usize]) -> Result<(f64, f64), SurrogateError>;

    /// EI incumbent in the same units as `predict` means.
    fn incumbent(&self, dataset: &Dataset, measured: &[usize]) -> Result<f64, SurrogateError>;

    fn diagnostics(&self) -> serde_json::Value;
}

/// The standard backend: refits the configured surrogate from scratch on
/// the measured set each round.
pub struct SurrogateBackend {
    config: SurrogateConfig,
    fitted: Option<Surrogate>,
}

impl SurrogateBackend {
    pub fn new(config: SurrogateConfig) -> Self {
        Self { config, fitted: None }
    }

    fn fitted(&self) -> Result<&Surrogate, SurrogateError> {
        self.fitted.as_ref().ok_or_else(|| SurrogateError::BadConfig("fit before use".into()))
    }

    fn features(dataset: &Dataset, ids: &[usize]) -> Vec<crate::chem::Fingerprint> {
        ids.iter().map(|&i| dataset.record(i).features.clone()).collect()
    }

    fn raw_targets(dataset: &Dataset, ids: &[usize]) -> Vec<f64> {
        ids.iter().map(|&i| dataset.record(i).raw_target).collect()
    }
}

impl CampaignBackend for SurrogateBackend {
    fn fit(
        &mut self,
        dataset: &Dataset,
        measured: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<(), SurrogateError> {
        let features = Self::features(dataset, measured);
        let raws = Self::raw_targets(dataset, measured);
        self.fitted = Some(fit_surrogate(&self.config, &features, &raws, dataset.direction(), rng)?);
        Ok(())
    }

    fn predict(&self, dataset: &Dataset, ids: &[usize]) -> Result<PredDist, SurrogateError> {
        predict_surrogate(self.fitted()?, &Self::features(dataset, ids))
    }

    fn evaluate(&self, dataset: &Dataset, test_ids: &[usize]) -> Result<(f64, f64), SurrogateError> {
        let features = Self::features(dataset, test_ids);
        let raws = Self::raw_targets(dataset, test_ids);
        evaluate_surrogate(self.fitted()?, &features, &raws)
    }

    fn incumbent(&self, dataset: &Dataset, measured: &[usize]) -> Result<f64, SurrogateError> {
        let surrogate = self.fitted()?;
        let best = match surrogate.config().mode {
            // Regression predicts scaled targets, so the incumbent is the
            // best measured target in those units.
            Mode::Regression => {
                let scaled = surrogate.scale_raw(&Self::raw_targets(dataset, measured));
                scaled.into_iter().fold(f64::NEG_INFINITY, f64::max)
            }
            // Ranking scores live on their own scale; compare predictions
            // with predictions.
            Mode::Ranking => {
                let dist = self.predict(dataset, measured)?;
                dist.mean.into_iter().fold(f64::NEG_INFINITY, f64::max)
            }
        };
        Ok(best)
    }

    fn diagnostics(&self) -> serde_json::Value {
        match &self.fitted {
            Some(surrogate) => surrogate.diagnostics(),
            None => serde_json::Value::Null,
        }
    }
}

/// Reveals the true objective with zero uncertainty; an upper reference
/// point for what any surrogate could achieve.
pub struct OracleBackend;

impl CampaignBackend for OracleBackend {
    fn fit(
        &mut self,
        _dataset: &Dataset,
        _measured: &[usize],
        _rng: &mut ChaCha8Rng,
    ) -> Result<(), SurrogateError> {
        Ok(())
    }

    fn predict(&self, dataset: &Dataset, ids: &[usize]) -> Result<PredDist, SurrogateError> {
        Ok(PredDist {
            mean: ids.iter().map(|&i| dataset.objective(i)).collect(),
            std: vec![0.0; ids.len()],
        })
    }

    fn evaluate(&self, _dataset: &Dataset, test_ids: &[usize]) -> Result<(f64, f64), SurrogateError> {
        if test_ids.is_empty() {
            return Err(SurrogateError::EmptyTestSet);
        }
        Ok((1.0, 1.0))
    }

    fn incumbent(&self, dataset: &Dataset, measured: &[usize]) -> Result<f64, SurrogateError> {
        Ok(measured.iter().map(|&i| dataset.objective(i)).fold(f64::NEG_INFINITY, f64::max))
    }

    fn diagnostics(&self) -> serde_json::Value {
        serde_json::json!({ "backend": "oracle" })
    }
}

struct Progress {
    truth: HashSet<usize>,
    trace: CampaignTrace,
    measured: Vec<usize>,
    measured_set: HashSet<usize>,
    hits: usize,
}

impl Progress {
    fn reveal(&mut self, dataset: &Dataset, id: usize) {
        let fresh = self.measured_set.insert(id);
        debug_assert!(fresh, "candidate {id} selected twice");
        self.measured.push(id);
        if self.truth.contains(&id) {
            self.hits += 1;
        }
        self.trace.evaluations.push(EvalRecord {
            eval_index: self.trace.evaluations.len() + 1,
            id,
            raw_target: dataset.record(id).raw_target,
            frac_top_k: self.hits as f64 / self.trace.config.top_k as f64,
        });
    }

    fn abort(mut self, message: String) -> CampaignError {
        self.trace.status = format!("invalid: {message}");
        CampaignError::Aborted { message, trace: Box::new(self.trace) }
    }
}

/// Runs the loop with the surrogate named in the config.
pub fn run_campaign(
    dataset: &Dataset,
    config: &CampaignConfig,
    rng: &mut ChaCha8Rng,
) -> Result<CampaignTrace, CampaignError> {
    let mut backend = SurrogateBackend::new(config.surrogate.clone());
    run_campaign_with(dataset, config, &mut backend, rng)
}

/// Runs the loop against any backend. Backend failures mid-campaign abort
/// with the partial trace attached and its status flagged invalid.
pub fn run_campaign_with(
    dataset: &Dataset,
    config: &CampaignConfig,
    backend: &mut dyn CampaignBackend,
    rng: &mut ChaCha8Rng,
) -> Result<CampaignTrace, CampaignError> {
    config.validate()?;
    let (pool, test) = data::split(dataset, config.test_fraction, rng.gen())?;
    if test.len() < 2 {
        return Err(CampaignError::BadConfig(format!(
            "test split has {} rows; held-out evaluation needs at least 2",
            test.len()
        )));
    }
    let needed = config.n_init + config.budget;
    if pool.len() < needed {
        return Err(CampaignError::PoolExhausted { needed, available: pool.len() });
    }
    if config.top_k > pool.len() {
        return Err(CampaignError::BadConfig(format!(
            "top_k {} exceeds the {}-candidate pool",
            config.top_k,
            pool.len()
        )));
    }

    // Ground truth over the pool only: the held-out set can never be found,
    // so it must not be counted as findable.
    let pool_objectives: Vec<f64> = pool.iter().map(|&i| dataset.objective(i)).collect();
    let truth: HashSet<usize> = select_batch(&pool_objectives, config.top_k)?
        .into_iter()
        .map(|position| pool[position])
        .collect();

    // Partial Fisher-Yates: first n_init slots become the initial sample.
    let mut shuffled = pool.clone();
    for i in 0..config.n_init {
        let j = rng.gen_range(i..shuffled.len());
        shuffled.swap(i, j);
    }

    let mut progress = Progress {
        truth,
        trace: CampaignTrace {
            config: config.clone(),
            seed: config.seed,
            dataset: dataset.name().to_string(),
            evaluations: Vec::with_capacity(needed),
            rounds: Vec::with_capacity(config.rounds()),
            status: STATUS_OK.to_string(),
        },
        measured: Vec::with_capacity(needed),
        measured_set: HashSet::with_capacity(needed),
        hits: 0,
    };
    for i in 0..config.n_init {
        progress.reveal(dataset, shuffled[i]);
    }

    for round in 1..=config.rounds() {
        if let Err(e) = backend.fit(dataset, &progress.measured, rng) {
            return Err(progress.abort(format!("fit failed in round {round}: {e}")));
        }
        let (test_tau, test_r2) = match backend.evaluate(dataset, &test) {
            Ok(pair) => pair,
            Err(e) => {
                return Err(progress.abort(format!("evaluation failed in round {round}: {e}")))
            }
        };

        let unmeasured: Vec<usize> =
            pool.iter().copied().filter(|i| !progress.measured_set.contains(i)).collect();
        let dist = match backend.predict(dataset, &unmeasured) {
            Ok(d) => d,
            Err(e) => {
                return Err(progress.abort(format!("prediction failed in round {round}: {e}")))
            }
        };
        let scores: Vec<f64> = match config.acquisition {
            Acquisition::Ucb => dist
                .mean
                .iter()
                .zip(&dist.std)
                .map(|(&m, &s)| ucb(m, s, config.beta))
                .collect(),
            Acquisition::Greedy => dist.mean.iter().copied().map(greedy).collect(),
            Acquisition::Ei => {
                let best = match backend.incumbent(dataset, &progress.measured) {
                    Ok(b) => b,
                    Err(e) => {
                        return Err(
                            progress.abort(format!("incumbent failed in round {round}: {e}"))
                        )
                    }
                };
                dist.mean.iter().zip(&dist.std).map(|(&m, &s)| ei(m, s, best)).collect()
            }
        };
        if let Some(bad) = scores.iter().position(|s| !s.is_finite()) {
            return Err(progress.abort(format!(
                "non-finite acquisition score for candidate {} in round {round}",
                unmeasured[bad]
            )));
        }

        let batch = select_batch(&scores, config.batch_size)?;
        for &position in &batch {
            progress.reveal(dataset, unmeasured[position]);
        }
        progress.trace.rounds.push(RoundRecord {
            round,
            test_tau,
            test_r2,
            diagnostics: backend.diagnostics(),
        });
    }

    Ok(progress.trace)
}
