//! Roughness index: how quickly target dispersion collapses as the pool is
//! clustered at growing Tanimoto distance thresholds.

use crate::chem::{tanimoto, Fingerprint};

use super::AnalyticsError;

/// Dispersion-versus-threshold curve and its summary index.
#[derive(Debug, Clone)]
pub struct RogiReport {
    /// Cut thresholds 0, step, ..., 1.
    pub thresholds: Vec<f64>,
    /// Size-weighted population std of cluster mean targets at each
    /// threshold, on the standardized target scale (so dispersion[0] = 1
    /// unless the targets are constant).
    pub dispersion: Vec<f64>,
    /// Sum of (1 - sigma(t)/sigma(0)) * step over all thresholds.
    pub rogi: f64,
    pub n: usize,
}

/// Computes the roughness index on 1 - Tanimoto distances with
/// complete-linkage clustering.
///
/// Targets are standardized internally, so the index is invariant under
/// affine target transforms. Constant targets yield an index of 0 by
/// definition.
pub fn rogi(
    features: &[Fingerprint],
    targets: &[f64],
    step: f64,
) -> Result<RogiReport, AnalyticsError> {
    let n = features.len();
    if targets.len() != n {
        return Err(AnalyticsError::LengthMismatch { left: n, right: targets.len() });
    }
    if n < 2 {
        return Err(AnalyticsError::TooFewSamples { needed: 2, got: n });
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(AnalyticsError::NonFinite);
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(AnalyticsError::BadParameter(format!(
            "step must be in (0, 1], got {step}"
        )));
    }
    let n_steps = (1.0 / step).round();
    if (n_steps * step - 1.0).abs() > 1e-9 {
        return Err(AnalyticsError::BadParameter(format!(
            "step {step} must divide the unit interval evenly"
        )));
    }
    let n_steps = n_steps as usize;
    let thresholds: Vec<f64> = (0..=n_steps)
        .map(|k| if k == n_steps { 1.0 } else { k as f64 * step })
        .collect();

    let mean = targets.iter().sum::<f64>() / n as f64;
    let variance = targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n as f64;
    if variance == 0.0 {
        return Ok(RogiReport {
            dispersion: vec![0.0; thresholds.len()],
            thresholds,
            rogi: 0.0,
            n,
        });
    }
    let std = variance.sqrt();
    let z: Vec<f64> = targets.iter().map(|t| (t - mean) / std).collect();

    let distances = CondensedMatrix::build(features)?;
    let mut merges = complete_linkage(distances, n);
    merges.sort_by(|x, y| {
        x.height
            .partial_cmp(&y.height)
            .expect("finite heights")
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });

    // Union-find over points, tracking per-root count and target sum so the
    // weighted second moment of cluster means updates incrementally.
    let mut parent: Vec<usize> = (0..n).collect();
    let mut count: Vec<f64> = vec![1.0; n];
    let mut sum: Vec<f64> = z.clone();
    let mut moment: f64 = z.iter().map(|v| v * v).sum();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    let sigma0 = (moment / n as f64).sqrt();
    let mut clusters = n;
    let mut dispersion = Vec::with_capacity(thresholds.len());
    let mut rogi_sum = 0.0;
    let mut next_merge = 0;
    for &t in &thresholds {
        while next_merge < merges.len() && merges[next_merge].height <= t + 1e-9 {
            let merge = &merges[next_merge];
            let ra = find(&mut parent, merge.a);
            let rb = find(&mut parent, merge.b);
            debug_assert_ne!(ra, rb, "merge joins already-united clusters");
            moment -= sum[ra] * sum[ra] / count[ra] + sum[rb] * sum[rb] / count[rb];
            parent[rb] = ra;
            count[ra] += count[rb];
            sum[ra] += sum[rb];
            moment += sum[ra] * sum[ra] / count[ra];
            clusters -= 1;
            next_merge += 1;
        }
        // One cluster means the mean-of-means equals the global mean, so the
        // dispersion is identically zero; snapping avoids float residue.
        let sigma = if clusters == 1 {
            0.0
        } else {
            (moment.max(0.0) / n as f64).sqrt()
        };
        dispersion.push(sigma);
        rogi_sum += (1.0 - sigma / sigma0) * step;
    }

    Ok(RogiReport {
        thresholds,
        dispersion,
        rogi: rogi_sum.max(0.0),
        n,
    })
}

struct Merge {
    height: f64,
    a: usize,
    b: usize,
}

/// Condensed strict upper triangle of the pairwise distance matrix.
struct CondensedMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CondensedMatrix {
    fn build(features: &[Fingerprint]) -> Result<Self, AnalyticsError> {
        let n = features.len();
        let mut values = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                values.push(1.0 - tanimoto(&features[i], &features[j])?);
            }
        }
        Ok(CondensedMatrix { n, values })
    }

    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if i < j {
            self.values[self.index(i, j)]
        } else {
            self.values[self.index(j, i)]
        }
    }

    fn set_max(&mut self, i: usize, j: usize, other: f64) {
        let idx = if i < j { self.index(i, j) } else { self.index(j, i) };
        if other > self.values[idx] {
            self.values[idx] = other;
        }
    }
}

/// Complete-linkage agglomeration by nearest-neighbor chains.
///
/// Complete linkage is reducible (cluster distances only grow under the
/// max update), which makes the chain construction exact. Ties prefer the
/// previous chain element, then the smallest label, so merges are
/// deterministic.
fn complete_linkage(mut distances: CondensedMatrix, n: usize) -> Vec<Merge> {
    let mut active: Vec<bool> = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::new();

    while merges.len() + 1 < n {
        if chain.is_empty() {
            let start = (0..n).find(|&i| active[i]).expect("an active cluster remains");
            chain.push(start);
        }
        loop {
            let tip = *chain.last().expect("nonempty chain");
            let prev = chain.len().checked_sub(2).map(|k| chain[k]);

            let mut best = usize::MAX;
            let mut best_dist = f64::INFINITY;
            for other in 0..n {
                if other == tip || !active[other] {
                    continue;
                }
                let d = distances.get(tip, other);
                if d < best_dist || (d == best_dist && Some(other) == prev) {
                    best = other;
                    best_dist = d;
                }
            }

            if Some(best) == prev {
                // Reciprocal nearest neighbors: merge into the smaller label.
                chain.pop();
                chain.pop();
                let (keep, drop) = (tip.min(best), tip.max(best));
                active[drop] = false;
                for other in 0..n {
                    if other != keep && other != drop && active[other] {
                        let via_drop = distances.get(drop, other);
                        distances.set_max(keep, other, via_drop);
                    }
                }
                merges.push(Merge { height: best_dist, a: keep, b: drop });
                break;
            }
            chain.push(best);
        }
    }
    merges
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(indices: &[usize]) -> Fingerprint {
        Fingerprint::from_bits(256, 0, indices.iter().copied()).unwrap()
    }

    #[test]
    fn constant_targets_give_zero() {
        let features = vec![bits(&[0, 1]), bits(&[2, 3]), bits(&[4, 5])];
        let report = rogi(&features, &[5.0, 5.0, 5.0], 0.01).unwrap();
        assert_eq!(report.rogi, 0.0);
        assert!(report.dispersion.iter().all(|&d| d == 0.0));
        assert_eq!(report.thresholds.len(), 101);
    }

    #[test]
    fn mutually_distant_points_give_one_step() {
        // Disjoint bit sets: every pairwise distance is exactly 1, so all
        // merges happen at height 1 and only the final threshold collapses
        // the dispersion.
        let features: Vec<Fingerprint> = (0..8).map(|i| bits(&[3 * i, 3 * i + 1])).collect();
        let targets: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let report = rogi(&features, &targets, 0.01).unwrap();
        assert!((report.rogi - 0.01).abs() < 1e-12, "rogi = {}", report.rogi);
        assert!((report.dispersion[0] - 1.0).abs() < 1e-12);
        assert_eq!(report.dispersion.last(), Some(&0.0));
        for &sigma in &report.dispersion[..100] {
            assert!((sigma - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_tight_clusters_with_known_gap() {
        // Cluster A: 40 shared bits {0..39} plus one unique bit each.
        // Cluster B: 40 shared bits {33..72} plus one unique bit each.
        // Within-cluster distance 2/42 < 0.1; every cross distance is
        // exactly 1 - 7/75 = 0.90666..., so dispersion survives through
        // t = 0.90 and vanishes from t = 0.91 on: ten step-widths of gap.
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for i in 0..5 {
            let mut a: Vec<usize> = (0..40).collect();
            a.push(100 + i);
            features.push(bits(&a));
            targets.push(1.0);
        }
        for i in 0..5 {
            let mut b: Vec<usize> = (33..73).collect();
            b.push(120 + i);
            features.push(bits(&b));
            targets.push(-1.0);
        }
        let report = rogi(&features, &targets, 0.01).unwrap();
        assert!(
            (report.rogi - 0.10).abs() < 1e-12,
            "rogi = {}",
            report.rogi
        );
    }

    #[test]
    fn affine_target_transform_is_invisible() {
        let features: Vec<Fingerprint> = (0..12)
            .map(|i| bits(&[i, i + 1, 2 * i + 4, 40 + (i * 7) % 20]))
            .collect();
        let targets: Vec<f64> = (0..12).map(|i| ((i * 13) % 7) as f64).collect();
        let base = rogi(&features, &targets, 0.05).unwrap();
        let shifted: Vec<f64> = targets.iter().map(|t| -3.5 * t + 11.0).collect();
        let transformed = rogi(&features, &shifted, 0.05).unwrap();
        // Exact invariance is impossible in floating point; restandardized
        // targets round differently.
        assert!((base.rogi - transformed.rogi).abs() < 1e-9);
        for (a, b) in base.dispersion.iter().zip(&transformed.dispersion) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn dispersion_endpoints() {
        let features: Vec<Fingerprint> = (0..10)
            .map(|i| bits(&[i, (i + 3) % 10, 20 + i / 2]))
            .collect();
        let targets: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let report = rogi(&features, &targets, 0.01).unwrap();
        assert!((report.dispersion[0] - 1.0).abs() < 1e-12);
        assert_eq!(*report.dispersion.last().unwrap(), 0.0);
        assert!(report.rogi >= 0.0 && report.rogi <= 1.0);
        assert_eq!(report.n, 10);
    }

    #[test]
    fn parameter_validation() {
        let features = vec![bits(&[0]), bits(&[1])];
        let targets = [0.0, 1.0];
        assert!(rogi(&features, &targets, 0.0).is_err());
        assert!(rogi(&features, &targets, 0.3).is_err());
        assert!(rogi(&features, &targets, 1.0).is_ok());
        assert!(rogi(&features[..1], &targets[..1], 0.01).is_err());
        assert!(rogi(&features, &[0.0], 0.01).is_err());
        assert!(rogi(&features, &[0.0, f64::NAN], 0.01).is_err());
    }

    #[test]
    fn flipping_a_near_duplicate_increases_roughness() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        // 25 base points; each gets a near-duplicate differing by one bit
        // (distance 1 - 40/41 < 0.05). Smooth targets follow the base index.
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for k in 0..25 {
            let mut base: Vec<usize> = Vec::new();
            while base.len() < 40 {
                let bit = rng.gen_range(0..250);
                if !base.contains(&bit) {
                    base.push(bit);
                }
            }
            let mut twin = base.clone();
            twin.push(250 + (k % 5));
            features.push(bits(&base));
            targets.push(k as f64 / 25.0);
            features.push(bits(&twin));
            targets.push(k as f64 / 25.0);
        }
        let smooth = rogi(&features, &targets, 0.01).unwrap();
        let mut flipped = targets.clone();
        flipped[1] = 1.0 - flipped[1] + 2.0;
        let rough = rogi(&features, &flipped, 0.01).unwrap();
        assert!(
            rough.rogi > smooth.rogi,
            "expected increase: {} vs {}",
            rough.rogi,
            smooth.rogi
        );
    }
}
