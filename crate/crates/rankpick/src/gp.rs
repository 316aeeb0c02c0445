//! Exact Gaussian-process regression with a scaled Tanimoto kernel, fit by
//! minimizing the negative marginal log-likelihood in hyperparameter
//! log-space.
//!
//! The kernel matrix is K = exp(log_outputscale) * T with T the pairwise
//! Tanimoto matrix, and A = K + exp(log_noise) * I; log_noise parameterizes
//! the observation-noise *variance*. All solves go through one Cholesky
//! factorization of A, so the MLL, its gradients, and the posterior share
//! numerics.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{tanimoto, ChemError, Fingerprint};
use crate::neural::{adam_step, AdamState, NeuralError, PredDist, ADAM_BETAS, ADAM_EPS};

#[derive(Debug, Error)]
pub enum GpError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("need at least {needed} training rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("length mismatch: {left} features vs {right} targets")]
    LengthMismatch { left: usize, right: usize },
    #[error("target at row {0} is not finite")]
    NonFiniteTarget(usize),
    #[error("kernel matrix is not positive definite even with maximum jitter")]
    NotPositiveDefinite,
    #[error("non-finite marginal log-likelihood at step {step}")]
    NonFiniteMll { step: usize },
    #[error(transparent)]
    Chem(#[from] ChemError),
}

impl From<NeuralError> for GpError {
    fn from(e: NeuralError) -> Self {
        GpError::BadConfig(e.to_string())
    }
}

/// Jitter ladder tried on Cholesky failure, smallest first.
const JITTERS: [f64; 6] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GpFitConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for GpFitConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, steps: 100, seed: 0 }
    }
}

impl GpFitConfig {
    fn validate(&self) -> Result<(), GpError> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(GpError::BadConfig("learning rate must be finite and positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GpModel {
    train_features: Vec<Fingerprint>,
    train_targets: DVector<f64>,
    log_outputscale: f64,
    log_noise: f64,
    tanimoto_matrix: DMatrix<f64>,
    cholesky: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    /// Diagonal inflation that was needed to factor A, 0 when none.
    jitter: f64,
}

impl GpModel {
    /// Builds the model at fixed hyperparameters (log of the kernel output
    /// scale and log of the noise variance), factoring K + sigma_n^2 I.
    pub fn new(
        features: &[Fingerprint],
        targets: &[f64],
        log_outputscale: f64,
        log_noise: f64,
    ) -> Result<Self, GpError> {
        if features.len() != targets.len() {
            return Err(GpError::LengthMismatch { left: features.len(), right: targets.len() });
        }
        if features.is_empty() {
            return Err(GpError::TooFewRows { needed: 1, got: 0 });
        }
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(GpError::NonFiniteTarget(i));
        }
        let n = features.len();
        let mut t = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s = tanimoto(&features[i], &features[j])?;
                t[(i, j)] = s;
                t[(j, i)] = s;
            }
        }
        let y = DVector::from_column_slice(targets);
        let (cholesky, jitter) = factor(&t, log_outputscale, log_noise)?;
        let alpha = cholesky.solve(&y);
        Ok(Self {
            train_features: features.to_vec(),
            train_targets: y,
            log_outputscale,
            log_noise,
            tanimoto_matrix: t,
            cholesky,
            alpha,
            jitter,
        })
    }

    /// Re-factors in place for new hyperparameters, reusing the Tanimoto
    /// matrix.
    fn set_hyperparameters(&mut self, log_outputscale: f64, log_noise: f64) -> Result<(), GpError> {
        let (cholesky, jitter) = factor(&self.tanimoto_matrix, log_outputscale, log_noise)?;
        self.log_outputscale = log_outputscale;
        self.log_noise = log_noise;
        self.alpha = cholesky.solve(&self.train_targets);
        self.cholesky = cholesky;
        self.jitter = jitter;
        Ok(())
    }

    pub fn log_outputscale(&self) -> f64 {
        self.log_outputscale
    }

    pub fn log_noise(&self) -> f64 {
        self.log_noise
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn train_len(&self) -> usize {
        self.train_features.len()
    }

    /// Negative marginal log-likelihood and its gradient with respect to
    /// (log_outputscale, log_noise), via dL/dtheta =
    /// (tr(A^-1 dA) - alpha^T dA alpha) / 2.
    pub fn nmll_and_grad(&self) -> (f64, [f64; 2]) {
        let n = self.train_len();
        let value = self.nmll();
        let s = self.log_outputscale.exp();
        let noise = self.log_noise.exp();
        let a_inv = self.cholesky.inverse();
        // dA/dlog_s = K = s*T; dA/dlog_noise = noise*I.
        let mut tr_ainv_k = 0.0;
        for i in 0..n {
            for j in 0..n {
                tr_ainv_k += a_inv[(i, j)] * s * self.tanimoto_matrix[(i, j)];
            }
        }
        let k_alpha = s * (&self.tanimoto_matrix * &self.alpha);
        let quad_s = self.alpha.dot(&k_alpha);
        let g_s = 0.5 * (tr_ainv_k - quad_s);
        let g_noise = 0.5 * noise * (a_inv.trace() - self.alpha.dot(&self.alpha));
        (value, [g_s, g_noise])
    }

    fn nmll(&self) -> f64 {
        let n = self.train_len() as f64;
        let log_det_half: f64 =
            (0..self.train_len()).map(|i| self.cholesky.l_dirty()[(i, i)].ln()).sum();
        0.5 * self.train_targets.dot(&self.alpha)
            + log_det_half
            + 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Posterior mean and std at the queries; `include_noise` adds the
    /// observation-noise variance to the reported std.
    pub fn posterior(
        &self,
        queries: &[Fingerprint],
        include_noise: bool,
    ) -> Result<PredDist, GpError> {
        let n = self.train_len();
        let s = self.log_outputscale.exp();
        let noise = self.log_noise.exp();
        let l = self.cholesky.l_dirty();
        let mut mean = Vec::with_capacity(queries.len());
        let mut std = Vec::with_capacity(queries.len());
        for q in queries {
            let mut k_star = DVector::zeros(n);
            for i in 0..n {
                k_star[i] = s * tanimoto(q, &self.train_features[i])?;
            }
            mean.push(k_star.dot(&self.alpha));
            // v = L^-1 k*, so k*^T A^-1 k* = v^T v.
            let mut v = k_star;
            for i in 0..n {
                let mut acc = v[i];
                for j in 0..i {
                    acc -= l[(i, j)] * v[j];
                }
                v[i] = acc / l[(i, i)];
            }
            let mut var = (s - v.dot(&v)).max(0.0);
            if include_noise {
                var += noise;
            }
            std.push(var.sqrt());
        }
        Ok(PredDist { mean, std })
    }
}

fn factor(
    tanimoto_matrix: &DMatrix<f64>,
    log_outputscale: f64,
    log_noise: f64,
) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    let s = log_outputscale.exp();
    let noise = log_noise.exp();
    let n = tanimoto_matrix.nrows();
    for jitter in JITTERS {
        let mut a = tanimoto_matrix * s;
        for i in 0..n {
            a[(i, i)] += noise + jitter;
        }
        if let Some(ch) = Cholesky::new(a) {
            return Ok((ch, jitter));
        }
    }
    Err(GpError::NotPositiveDefinite)
}

/// Negative marginal log-likelihood of the model's training data:
/// y^T alpha / 2 + sum(log diag L) + n log(2 pi) / 2.
pub fn negative_mll(model: &GpModel) -> f64 {
    model.nmll()
}

/// Minimizes the negative MLL over (log_outputscale, log_noise) with Adam,
/// starting from log_outputscale = 0, log_noise = log 0.1, and returns the
/// model at the best iterate encountered.
pub fn fit_gp(
    features: &[Fingerprint],
    targets: &[f64],
    config: &GpFitConfig,
) -> Result<GpModel, GpError> {
    config.validate()?;
    if features.len() < 2 {
        return Err(GpError::TooFewRows { needed: 2, got: features.len() });
    }
    let mut model = GpModel::new(features, targets, 0.0, 0.1f64.ln())?;
    let mut theta = [model.log_outputscale, model.log_noise];
    let mut best_theta = theta;
    let mut best_value = f64::INFINITY;
    let mut state = AdamState::new(2);
    for step in 0..config.steps {
        let (value, grad) = model.nmll_and_grad();
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(GpError::NonFiniteMll { step });
        }
        if value < best_value {
            best_value = value;
            best_theta = theta;
        }
        adam_step(&mut theta, &grad, &mut state, config.learning_rate, ADAM_BETAS, ADAM_EPS)?;
        model.set_hyperparameters(theta[0], theta[1])?;
    }
    let final_value = model.nmll();
    if !final_value.is_finite() {
        return Err(GpError::NonFiniteMll { step: config.steps });
    }
    if final_value < best_value {
        best_theta = theta;
    }
    model.set_hyperparameters(best_theta[0], best_theta[1])?;
    Ok(model)
}

/// Posterior without observation noise in the reported std (latent-function
/// uncertainty).
pub fn gp_posterior(model: &GpModel, queries: &[Fingerprint]) -> Result<PredDist, GpError> {
    model.posterior(queries, false)
}
