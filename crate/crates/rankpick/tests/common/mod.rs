//! Independent oracle implementations shared by the integration tests.
//!
//! Everything here deliberately takes a different route from the library:
//! quadratic pair enumeration instead of merge sorting, numerically
//! integrated densities instead of closed forms, compensated summation
//! instead of plain folds, and a naive O(n^3) clustering loop instead of
//! nearest-neighbor chains. Agreement within tight tolerances is then
//! evidence of correctness rather than of shared bugs.

#![allow(dead_code)]

use rankpick::chem::{tanimoto, Fingerprint};

/// Neumaier-compensated sum.
pub fn csum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Kendall tau-b by full pair enumeration.
pub fn tau_brute(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_a = 0i64;
    let mut ties_b = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da == 0.0 {
                ties_a += 1;
            }
            if db == 0.0 {
                ties_b += 1;
            }
            if da != 0.0 && db != 0.0 {
                if (da > 0.0) == (db > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as i64;
    let den_a = pairs - ties_a;
    let den_b = pairs - ties_b;
    if den_a == 0 || den_b == 0 {
        return 0.0;
    }
    (concordant - discordant) as f64 / ((den_a as f64) * (den_b as f64)).sqrt()
}

/// R^2 with compensated sums.
pub fn r_squared_oracle(y: &[f64], yhat: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = csum(y.iter().copied()) / n;
    let ss_tot = csum(y.iter().map(|v| (v - mean) * (v - mean)));
    let ss_res = csum(y.iter().zip(yhat).map(|(v, w)| (v - w) * (v - w)));
    1.0 - ss_res / ss_tot
}

/// Pearson r and two-sided p with compensated sums and the integrated CDF.
pub fn pearson_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let mean_a = csum(a.iter().copied()) / n;
    let mean_b = csum(b.iter().copied()) / n;
    let ss_a = csum(a.iter().map(|x| (x - mean_a) * (x - mean_a)));
    let ss_b = csum(b.iter().map(|x| (x - mean_b) * (x - mean_b)));
    let ss_ab = csum(a.iter().zip(b).map(|(x, y)| (x - mean_a) * (y - mean_b)));
    let r = (ss_ab / (ss_a * ss_b).sqrt()).clamp(-1.0, 1.0);
    let dof = a.len() - 2;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (dof as f64 / (1.0 - r * r)).sqrt();
        t_two_sided_p_oracle(t, dof)
    };
    (r, p)
}

/// Pooled two-sample t-test with compensated sums and the integrated CDF.
pub fn t_test_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mean_a = csum(a.iter().copied()) / na;
    let mean_b = csum(b.iter().copied()) / nb;
    let ss_a = csum(a.iter().map(|v| (v - mean_a) * (v - mean_a)));
    let ss_b = csum(b.iter().map(|v| (v - mean_b) * (v - mean_b)));
    let dof = a.len() + b.len() - 2;
    let pooled = (ss_a + ss_b) / dof as f64;
    if pooled == 0.0 {
        return if mean_a == mean_b {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean_a - mean_b), 0.0)
        };
    }
    let t = (mean_a - mean_b) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    (t, t_two_sided_p_oracle(t, dof))
}

/// Mean and 95% half-width, quantile found by bisecting the integrated CDF.
pub fn ci95_oracle(sample: &[f64]) -> (f64, f64) {
    let n = sample.len();
    let mean = csum(sample.iter().copied()) / n as f64;
    let var = csum(sample.iter().map(|v| (v - mean) * (v - mean))) / (n as f64 - 1.0);
    let t_crit = t_quantile_oracle(0.975, n - 1);
    (mean, t_crit * (var / n as f64).sqrt())
}

/// Student-t density normalizing constant for integer dof, from the exact
/// factorial forms of the half-integer gamma values.
fn t_pdf_constant(dof: usize) -> f64 {
    use std::f64::consts::PI;
    let factorial = |k: usize| -> f64 { (1..=k).map(|v| v as f64).product() };
    if dof % 2 == 0 {
        // dof = 2m: Gamma(m + 1/2) / (sqrt(2m pi) Gamma(m))
        let m = dof / 2;
        let gamma_half = factorial(2 * m) * PI.sqrt() / (4f64.powi(m as i32) * factorial(m));
        gamma_half / ((dof as f64 * PI).sqrt() * factorial(m - 1))
    } else {
        // dof = 2m + 1: Gamma(m + 1) / (sqrt((2m+1) pi) Gamma(m + 1/2))
        let m = (dof - 1) / 2;
        let gamma_half = factorial(2 * m) * PI.sqrt() / (4f64.powi(m as i32) * factorial(m));
        factorial(m) / ((dof as f64 * PI).sqrt() * gamma_half)
    }
}

fn t_pdf(x: f64, dof: usize, constant: f64) -> f64 {
    constant * (1.0 + x * x / dof as f64).powf(-((dof as f64 + 1.0) / 2.0))
}

/// Adaptive Simpson quadrature.
fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// P(T <= t) by integrating the density outward from zero.
pub fn t_cdf_oracle(t: f64, dof: usize) -> f64 {
    let constant = t_pdf_constant(dof);
    let pdf = move |x: f64| t_pdf(x, dof, constant);
    let tail = simpson(&pdf, 0.0, t.abs(), 1e-15);
    if t >= 0.0 {
        0.5 + tail
    } else {
        0.5 - tail
    }
}

/// Two-sided p-value from the integrated CDF.
pub fn t_two_sided_p_oracle(t: f64, dof: usize) -> f64 {
    let constant = t_pdf_constant(dof);
    let pdf = move |x: f64| t_pdf(x, dof, constant);
    let central = simpson(&pdf, 0.0, t.abs(), 1e-15);
    (1.0 - 2.0 * central).clamp(0.0, 1.0)
}

/// Quantile by bisection on the integrated CDF.
pub fn t_quantile_oracle(q: f64, dof: usize) -> f64 {
    assert!((0.5..1.0).contains(&q));
    let mut hi = 1.0;
    while t_cdf_oracle(hi, dof) < q {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if t_cdf_oracle(mid, dof) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal CDF by integrating the density.
pub fn normal_cdf_oracle(z: f64) -> f64 {
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let tail = simpson(&pdf, 0.0, z.abs(), 1e-15);
    if z >= 0.0 {
        0.5 + tail
    } else {
        0.5 - tail
    }
}

/// Full sigma(t) curve and roughness index by naive complete linkage:
/// repeatedly scan for the closest cluster pair, merging until one remains,
/// then recompute every dispersion from scratch at each threshold.
///
/// Only valid when all pairwise distances are distinct (then the dendrogram
/// is unique and tie-breaking conventions cannot diverge).
pub fn rogi_naive(features: &[Fingerprint], targets: &[f64], step: f64) -> (Vec<f64>, f64) {
    let n = features.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                dist[i][j] = 1.0 - tanimoto(&features[i], &features[j]).unwrap();
            }
        }
    }

    let mean = csum(targets.iter().copied()) / n as f64;
    let sd = (csum(targets.iter().map(|t| (t - mean) * (t - mean))) / n as f64).sqrt();
    let z: Vec<f64> = targets.iter().map(|t| (t - mean) / sd).collect();

    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merge_heights: Vec<(f64, Vec<Vec<usize>>)> = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for p in 0..clusters.len() {
            for q in (p + 1)..clusters.len() {
                let mut complete = 0.0f64;
                for &i in &clusters[p] {
                    for &j in &clusters[q] {
                        complete = complete.max(dist[i][j]);
                    }
                }
                if complete < best.0 {
                    best = (complete, p, q);
                }
            }
        }
        let (height, p, q) = best;
        let merged = clusters.remove(q);
        clusters[p].extend(merged);
        merge_heights.push((height, clusters.clone()));
    }

    let n_steps = (1.0 / step).round() as usize;
    let sigma_of = |partition: &[Vec<usize>]| -> f64 {
        if partition.len() == 1 {
            return 0.0;
        }
        let mut weighted = 0.0;
        for cluster in partition {
            let m = csum(cluster.iter().map(|&i| z[i])) / cluster.len() as f64;
            weighted += cluster.len() as f64 * m * m;
        }
        (weighted / n as f64).sqrt()
    };

    let singletons: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut curve = Vec::with_capacity(n_steps + 1);
    let mut index = 0.0;
    let sigma0 = sigma_of(&singletons);
    for k in 0..=n_steps {
        let t = if k == n_steps { 1.0 } else { k as f64 * step };
        // The partition at t is the state after the last merge with height
        // within the threshold.
        let mut partition = &singletons;
        for (height, state) in &merge_heights {
            if *height <= t + 1e-9 {
                partition = state;
            } else {
                break;
            }
        }
        let sigma = sigma_of(partition);
        curve.push(sigma);
        index += (1.0 - sigma / sigma0) * step;
    }
    (curve, index.max(0.0))
}

/// Fingerprints whose pairwise distances are all distinct, plus random
/// targets, so the clustering oracle comparison is well-posed.
///
/// Point i gets the first p_i bits (p_i = i-th prime) under a shuffled bit
/// labeling shared by all points. Nested supports give Tanimoto(i, j) =
/// p_i / p_j for i < j, and unique factorization makes every pairwise
/// distance 1 - p_i / p_j distinct. Distinct point distances force distinct
/// complete-linkage cluster distances (maxima over disjoint pair sets), so
/// the dendrogram is unique and any correct implementation must match.
pub fn distinct_distance_instance(
    seed: u64,
    n: usize,
    nbits: usize,
) -> (Vec<Fingerprint>, Vec<f64>) {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut primes = Vec::with_capacity(n);
    let mut candidate = 2usize;
    while primes.len() < n {
        if (2..candidate).all(|d| candidate % d != 0) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    assert!(
        *primes.last().unwrap() <= nbits,
        "need at least {} bits for {n} points",
        primes.last().unwrap()
    );
    let mut labels: Vec<usize> = (0..nbits).collect();
    labels.shuffle(&mut rng);
    let features: Vec<Fingerprint> = primes
        .iter()
        .map(|&p| Fingerprint::from_bits(nbits, 0, labels[..p].iter().copied()).unwrap())
        .collect();
    let targets: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    (features, targets)
}
