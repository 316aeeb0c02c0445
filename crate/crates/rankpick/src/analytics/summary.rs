//! Campaign-level metrics: discovery fraction, budget-normalized area, and
//! per-seed aggregation.

use serde::Serialize;

use super::stats::ci95;
use super::AnalyticsError;

/// |found ∩ true_top| / |true_top|. Duplicate ids are counted once.
pub fn top_k_fraction(found_ids: &[usize], true_top_ids: &[usize]) -> Result<f64, AnalyticsError> {
    if true_top_ids.is_empty() {
        return Err(AnalyticsError::EmptyTrueTop);
    }
    let true_top: std::collections::HashSet<usize> = true_top_ids.iter().copied().collect();
    let found: std::collections::HashSet<usize> = found_ids.iter().copied().collect();
    let hits = found.intersection(&true_top).count();
    Ok(hits as f64 / true_top.len() as f64)
}

/// Discrete budget-normalized area: the mean of the top-k fraction after
/// each post-initialization evaluation.
///
/// Initialization points contribute to the found set (and so to every term)
/// but are not themselves averaged terms.
pub fn bo_auc(fraction_after_each_evaluation: &[f64]) -> Result<f64, AnalyticsError> {
    if fraction_after_each_evaluation.is_empty() {
        return Err(AnalyticsError::InvalidTrace("no evaluations".into()));
    }
    for &f in fraction_after_each_evaluation {
        if !(0.0..=1.0).contains(&f) {
            return Err(AnalyticsError::InvalidTrace(format!(
                "fraction {f} outside [0, 1]"
            )));
        }
    }
    let n = fraction_after_each_evaluation.len() as f64;
    Ok(fraction_after_each_evaluation.iter().sum::<f64>() / n)
}

/// Per-seed BO-AUC values with their mean and 95% confidence half-width.
#[derive(Debug, Clone, Serialize)]
pub struct AucSummary {
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub ci_half_width: f64,
    pub n_seeds: usize,
}

impl AucSummary {
    /// Aggregates per-seed values. A single seed gets half-width 0.
    pub fn from_values(per_seed: &[f64]) -> Result<Self, AnalyticsError> {
        if per_seed.is_empty() {
            return Err(AnalyticsError::TooFewSamples { needed: 1, got: 0 });
        }
        let (mean, ci_half_width) = if per_seed.len() == 1 {
            (per_seed[0], 0.0)
        } else {
            ci95(per_seed)?
        };
        Ok(AucSummary {
            per_seed: per_seed.to_vec(),
            mean,
            ci_half_width,
            n_seeds: per_seed.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_counts_overlap() {
        let found: Vec<usize> = (0..150).collect();
        let top: Vec<usize> = (100..200).collect();
        assert_eq!(top_k_fraction(&found, &top).unwrap(), 0.5);
        assert_eq!(top_k_fraction(&[1, 2], &[3, 4]).unwrap(), 0.0);
        assert_eq!(top_k_fraction(&found, &(0..100).collect::<Vec<_>>()).unwrap(), 1.0);
        assert!(top_k_fraction(&found, &[]).is_err());
    }

    #[test]
    fn fraction_ignores_duplicates() {
        assert_eq!(top_k_fraction(&[7, 7, 7], &[7, 8]).unwrap(), 0.5);
    }

    #[test]
    fn auc_is_the_mean_fraction() {
        let series: Vec<f64> = (1..=100).map(|e| e as f64 / 100.0).collect();
        assert!((bo_auc(&series).unwrap() - 0.505).abs() < 1e-12);
        assert_eq!(bo_auc(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(bo_auc(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn auc_rejects_bad_traces() {
        assert!(bo_auc(&[]).is_err());
        assert!(bo_auc(&[0.5, 1.5]).is_err());
        assert!(bo_auc(&[-0.1]).is_err());
        assert!(bo_auc(&[f64::NAN]).is_err());
    }

    #[test]
    fn auc_monotone_under_domination() {
        let low = [0.1, 0.2, 0.3, 0.3];
        let high = [0.2, 0.2, 0.5, 0.9];
        assert!(bo_auc(&high).unwrap() >= bo_auc(&low).unwrap());
    }

    #[test]
    fn summary_aggregates_seeds() {
        let summary = AucSummary::from_values(&[0.4, 0.6, 0.5, 0.5]).unwrap();
        assert!((summary.mean - 0.5).abs() < 1e-12);
        assert!(summary.ci_half_width > 0.0);
        assert_eq!(summary.n_seeds, 4);

        let single = AucSummary::from_values(&[0.7]).unwrap();
        assert_eq!(single.mean, 0.7);
        assert_eq!(single.ci_half_width, 0.0);
        assert!(AucSummary::from_values(&[]).is_err());
    }
}
