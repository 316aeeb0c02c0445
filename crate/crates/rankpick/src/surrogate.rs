//! One interface over {MLP, BNN, GP} x {regression, ranking} surrogates.
//!
//! All backends work in an internal maximize-and-scaled convention: targets
//! are negated for minimize-direction problems, then robust-scaled with
//! measured-set statistics. Predictions stay in that convention; conversion
//! back to raw units happens only at reporting.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{kendall_tau, r_squared, AnalyticsError};
use crate::chem::Fingerprint;
use crate::data::{robust_scale, DataError, Direction, ScalingParams};
use crate::gp::{fit_gp, GpError, GpFitConfig, GpModel};
use crate::neural::{
    self, LayerKind, Loss, Network, NetworkSpec, NeuralError, PredDist, TrainConfig, TrainReport,
};

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("need at least {needed} measured rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("empty test set")]
    EmptyTestSet,
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Mlp,
    Bnn,
    Gp,
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SurrogateKind::Mlp => "mlp",
            SurrogateKind::Bnn => "bnn",
            SurrogateKind::Gp => "gp",
        };
        write!(f, "{name}")
    }
}

impl FromStr for SurrogateKind {
    type Err = SurrogateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlp" => Ok(SurrogateKind::Mlp),
            "bnn" => Ok(SurrogateKind::Bnn),
            "gp" => Ok(SurrogateKind::Gp),
            other => Err(SurrogateError::BadConfig(format!(
                "unknown surrogate kind {other:?} (expected mlp, bnn, or gp)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Regression,
    Ranking,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mode::Regression => "regression",
            Mode::Ranking => "ranking",
        };
        write!(f, "{name}")
    }
}

impl FromStr for Mode {
    type Err = SurrogateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "regression" => Ok(Mode::Regression),
            "ranking" => Ok(Mode::Ranking),
            other => Err(SurrogateError::BadConfig(format!(
                "unknown mode {other:?} (expected regression or ranking)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub kind: SurrogateKind,
    pub mode: Mode,
    /// Backend settings for mlp/bnn; `train.loss` is overridden by `mode`.
    pub train: TrainConfig,
    /// Backend settings for gp.
    pub gp: GpFitConfig,
    pub seed: u64,
}

impl SurrogateConfig {
    pub fn new(kind: SurrogateKind, mode: Mode) -> Self {
        let loss = match mode {
            Mode::Regression => Loss::Mse,
            Mode::Ranking => Loss::Ranking,
        };
        Self { kind, mode, train: TrainConfig::new(loss), gp: GpFitConfig::default(), seed: 0 }
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.kind == SurrogateKind::Gp && self.mode == Mode::Ranking {
            return Err(SurrogateError::BadConfig(
                "gp surrogates are regression-only (no ranking-mode marginal likelihood)".into(),
            ));
        }
        Ok(())
    }

    /// The rng a standalone caller is expected to hand to `fit_surrogate`.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

#[derive(Clone, Debug)]
enum Backend {
    Network(Network, TrainReport),
    Gp(GpModel),
}

#[derive(Clone, Debug)]
pub struct Surrogate {
    config: SurrogateConfig,
    backend: Backend,
    scaling: ScalingParams,
    direction: Direction,
    /// Seeds the per-call prediction rng so a fitted surrogate is a pure
    /// function of (parameters, queries) and stays shareable.
    predict_seed: u64,
}

/// Trains the configured backend on the measured set. Targets arrive raw;
/// direction negation and robust scaling happen here, with the scaling
/// captured for later evaluation calls.
pub fn fit_surrogate(
    config: &SurrogateConfig,
    features: &[Fingerprint],
    raw_targets: &[f64],
    direction: Direction,
    rng: &mut ChaCha8Rng,
) -> Result<Surrogate, SurrogateError> {
    config.validate()?;
    if features.len() != raw_targets.len() {
        return Err(SurrogateError::BadConfig(format!(
            "{} features vs {} targets",
            features.len(),
            raw_targets.len()
        )));
    }
    if features.len() < 2 {
        return Err(SurrogateError::TooFewRows { needed: 2, got: features.len() });
    }
    let adjusted = adjust(raw_targets, direction);
    let (scaled, scaling) = robust_scale(&adjusted)?;
    let predict_seed = rng.gen();
    let backend = match config.kind {
        SurrogateKind::Gp => Backend::Gp(fit_gp(features, &scaled, &config.gp)?),
        SurrogateKind::Mlp | SurrogateKind::Bnn => {
            let layer_kind = match config.kind {
                SurrogateKind::Mlp => LayerKind::Dense,
                _ => LayerKind::Variational,
            };
            let nbits = features[0].nbits();
            let spec = NetworkSpec::standard(nbits, layer_kind)?;
            let net = Network::init(spec, rng);
            let mut train_config = config.train.clone();
            train_config.loss = match config.mode {
                Mode::Regression => Loss::Mse,
                Mode::Ranking => Loss::Ranking,
            };
            let dense = densify(features);
            let (fitted, report) = neural::train(&net, &dense, &scaled, &train_config, rng)?;
            Backend::Network(fitted, report)
        }
    };
    Ok(Surrogate { config: config.clone(), backend, scaling, direction, predict_seed })
}

/// Predictions in the internal maximize-and-scaled convention. Ranking-mode
/// outputs are unitless scores; only their order is meaningful.
pub fn predict_surrogate(
    surrogate: &Surrogate,
    queries: &[Fingerprint],
) -> Result<PredDist, SurrogateError> {
    match &surrogate.backend {
        Backend::Gp(model) => Ok(model.posterior(queries, false)?),
        Backend::Network(net, _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(surrogate.predict_seed);
            let dense = densify(queries);
            Ok(neural::predict(
                net,
                &dense,
                surrogate.config.train.mc_samples_predict,
                &mut rng,
            )?)
        }
    }
}

/// Held-out quality: Kendall tau against direction-adjusted raw targets and
/// R^2 against fit-time-scaled targets. R^2 is computed for ranking mode
/// too, where scores are unitless and the value is expectedly poor.
pub fn evaluate_surrogate(
    surrogate: &Surrogate,
    test_features: &[Fingerprint],
    test_raw_targets: &[f64],
) -> Result<(f64, f64), SurrogateError> {
    if test_features.is_empty() {
        return Err(SurrogateError::EmptyTestSet);
    }
    if test_features.len() != test_raw_targets.len() {
        return Err(SurrogateError::BadConfig(format!(
            "{} features vs {} targets",
            test_features.len(),
            test_raw_targets.len()
        )));
    }
    let dist = predict_surrogate(surrogate, test_features)?;
    let adjusted = adjust(test_raw_targets, surrogate.direction);
    let tau = kendall_tau(&dist.mean, &adjusted)?;
    let scaled: Vec<f64> = adjusted.iter().map(|&v| surrogate.scaling.scale(v)).collect();
    let r2 = r_squared(&scaled, &dist.mean)?;
    Ok((tau, r2))
}

impl Surrogate {
    pub fn config(&self) -> &SurrogateConfig {
        &self.config
    }

    pub fn scaling(&self) -> &ScalingParams {
        &self.scaling
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Converts internal predictions back to raw units: inverse scaling for
    /// regression, then undoing the direction negation. Ranking scores have
    /// no unit, so only the direction flip applies to them.
    pub fn to_raw(&self, internal: &[f64]) -> Vec<f64> {
        internal
            .iter()
            .map(|&v| {
                let unscaled = match self.config.mode {
                    Mode::Regression => self.scaling.unscale(v),
                    Mode::Ranking => v,
                };
                match self.direction {
                    Direction::Maximize => unscaled,
                    Direction::Minimize => -unscaled,
                }
            })
            .collect()
    }

    /// Scaled measured-set values as seen at fit time, for EI incumbents.
    pub fn scale_raw(&self, raw: &[f64]) -> Vec<f64> {
        adjust(raw, self.direction).iter().map(|&v| self.scaling.scale(v)).collect()
    }

    /// Fitted network parameters, for determinism checks and checkpoints.
    pub fn network(&self) -> Option<&Network> {
        match &self.backend {
            Backend::Network(net, _) => Some(net),
            Backend::Gp(_) => None,
        }
    }

    pub fn gp(&self) -> Option<&GpModel> {
        match &self.backend {
            Backend::Gp(model) => Some(model),
            Backend::Network(..) => None,
        }
    }

    /// Small per-fit summary embedded in campaign traces.
    pub fn diagnostics(&self) -> serde_json::Value {
        match &self.backend {
            Backend::Gp(model) => serde_json::json!({
                "log_outputscale": model.log_outputscale(),
                "log_noise": model.log_noise(),
                "jitter": model.jitter(),
            }),
            Backend::Network(_, report) => serde_json::json!({
                "epochs_run": report.epochs_run,
                "best_epoch": report.best_epoch,
                "best_val": report.best_val,
                "stop": report.stop,
            }),
        }
    }
}

fn adjust(raw: &[f64], direction: Direction) -> Vec<f64> {
    raw.iter()
        .map(|&v| match direction {
            Direction::Maximize => v,
            Direction::Minimize => -v,
        })
        .collect()
}

fn densify(features: &[Fingerprint]) -> Vec<Vec<f64>> {
    features.iter().map(Fingerprint::to_dense).collect()
}
