//! Outlier detectors and ROC construction.
//!
//! Two detectors over the same row-flagging interface: the classical RX
//! detector thresholding Mahalanobis squared distances, and the iterative
//! fourth-cumulant detector that whitens once, then repeatedly projects the
//! remaining rows onto the leading eigendirections of the contracted
//! fourth-cumulant tensor, flags rows far from the projection medians in MAD
//! units, and stops when the root-sum-square kurtosis of the projections no
//! longer drops.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::dist::chi2_quantile;
use crate::error::{data, domain, Result};
use crate::tensor::{
    contract_self, covariance_eigen, fourth_cumulant_centered, inverse_from_eigen,
    leading_directions,
};

/// Mahalanobis squared distances of every row to the sample mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RxScores {
    scores: Vec<f64>,
}

impl RxScores {
    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Score of the 1-based row `j`.
    pub fn get(&self, j: usize) -> f64 {
        self.scores[j - 1]
    }
}

/// Mahalanobis squared distance `md_j = (x_j − μ)·C₂⁻¹·(x_j − μ)ᵀ` per row,
/// with μ and the t-normalized covariance estimated from all of `x`.
pub fn rx_scores(x: &DataMatrix) -> Result<RxScores> {
    let (xc, eig) = covariance_eigen(x)?;
    let c2_inv = inverse_from_eigen(&eig);
    let projected = &xc * &c2_inv;
    let scores = (0..x.t())
        .map(|j| projected.row(j).dot(&xc.row(j)).max(0.0))
        .collect();
    Ok(RxScores { scores })
}

/// Threshold for [`rx_detect`]: either a raw score cut or a χ² percentile
/// with `n` degrees of freedom (the Gaussian-background calibration).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RxThreshold {
    Raw(f64),
    Chi2Percentile(f64),
}

/// Rows whose Mahalanobis squared distance exceeds the threshold
/// (1-based indices, ascending).
pub fn rx_detect(x: &DataMatrix, threshold: RxThreshold) -> Result<Vec<usize>> {
    let cut = match threshold {
        RxThreshold::Raw(v) => v,
        RxThreshold::Chi2Percentile(p) => chi2_quantile(p, x.n() as u64)?,
    };
    let scores = rx_scores(x)?;
    Ok(scores
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cut)
        .map(|(i, _)| i + 1)
        .collect())
}

/// Per-iteration diagnostics of the cumulant detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationDiag {
    /// Root-sum-square excess kurtosis over the projection directions.
    pub k: f64,
    /// Rows flagged and removed by this iteration.
    pub removed: usize,
}

/// Outcome of the iterative fourth-cumulant detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Flagged rows in the original 1-based numbering, ascending.
    pub flagged: Vec<usize>,
    pub beta: f64,
    pub r: usize,
    pub iterations: Vec<IterationDiag>,
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    median_of_sorted(&v)
}

/// Unscaled median absolute deviation from the median.
fn mad(values: &[f64], center: f64) -> f64 {
    let mut dev: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    dev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    median_of_sorted(&dev)
}

/// Excess kurtosis of a sample: fourth central moment over squared variance,
/// minus three (both moments normalized by the sample size).
fn excess_kurtosis(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    m4 / (m2 * m2) - 3.0
}

/// Iterative fourth-order-cumulant outlier detector.
///
/// The data is centered and whitened once. Each iteration computes the
/// fourth cumulant of the remaining rows, contracts it to an n×n matrix,
/// projects the rows onto its `r` leading eigendirections, and flags a row
/// when its distance to a projection median exceeds `beta` MAD units in any
/// direction. Iteration stops when the root-sum-square excess kurtosis `k`
/// of the projections fails to decrease, when an iteration flags nothing,
/// or when cumulative removals exceed half of the rows. Flagged indices are
/// reported in the original 1-based row numbering.
pub fn hosvd_c4_detect(x: &DataMatrix, beta: f64, r: usize) -> Result<DetectionResult> {
    if !(beta > 0.0) {
        return Err(domain(format!("sensitivity β = {beta} must be positive")));
    }
    if r < 1 || r > x.n() {
        return Err(domain(format!(
            "direction count r = {r} outside 1..={}",
            x.n()
        )));
    }
    let t = x.t();
    let whitened = crate::tensor::whiten(x)?;
    let mut remaining: Vec<usize> = (0..t).collect();
    let mut flagged: Vec<usize> = Vec::new();
    let mut iterations: Vec<IterationDiag> = Vec::new();
    let mut k_prev = f64::INFINITY;

    loop {
        if remaining.len() < 2 {
            break;
        }
        let current: DMatrix<f64> = whitened.select_rows(&remaining);
        let means = current.row_mean();
        let mut centered = current.clone();
        for (j, mut col) in centered.column_iter_mut().enumerate() {
            col.add_scalar_mut(-means[j]);
        }
        let c4 = fourth_cumulant_centered(&centered);
        let m4 = contract_self(&c4);
        let dirs = leading_directions(&m4, r)?;

        let projections: Vec<Vec<f64>> = (0..r)
            .map(|i| {
                let w = dirs.direction(i);
                (0..current.nrows())
                    .map(|row| current.row(row).transpose().dot(w))
                    .collect()
            })
            .collect();

        let k = projections
            .iter()
            .map(|z| {
                let kurt = excess_kurtosis(z);
                kurt * kurt
            })
            .sum::<f64>()
            .sqrt();

        if k >= k_prev {
            iterations.push(IterationDiag { k, removed: 0 });
            break;
        }

        let stats: Vec<(f64, f64)> = projections
            .iter()
            .map(|z| {
                let med = median(z);
                (med, mad(z, med))
            })
            .collect();

        let mut flagged_now: Vec<usize> = Vec::new();
        for (local, &original) in remaining.iter().enumerate() {
            let exceeds = projections.iter().zip(&stats).any(|(z, &(med, m))| {
                // a zero-MAD direction offers no scale and is skipped
                m > 0.0 && (z[local] - med).abs() / m > beta
            });
            if exceeds {
                flagged_now.push(original);
            }
        }

        iterations.push(IterationDiag {
            k,
            removed: flagged_now.len(),
        });
        if flagged_now.is_empty() {
            break;
        }
        flagged.extend_from_slice(&flagged_now);
        remaining.retain(|row| !flagged_now.contains(row));
        if 2 * flagged.len() > t {
            break;
        }
        k_prev = k;
    }

    flagged.sort_unstable();
    Ok(DetectionResult {
        flagged: flagged.into_iter().map(|i| i + 1).collect(),
        beta,
        r,
        iterations,
    })
}

/// One swept operating point of a ROC curve. `param` is the sweep parameter
/// (β for the cumulant detector, the score threshold for RX) and serializes
/// under the key `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(rename = "beta")]
    pub param: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points sorted by false positive rate, with the trapezoid AUC over
/// the points augmented by (0,0) and (1,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Build a ROC curve from per-parameter flagged sets (1-based indices) and
/// binary labels (1 = outlier). Labels must contain at least one positive
/// and one negative.
pub fn roc_curve(sweep: &[(f64, Vec<usize>)], labels: &[u8]) -> Result<RocCurve> {
    let t = labels.len();
    if labels.iter().any(|&l| l > 1) {
        return Err(data("labels must be 0 or 1"));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = t - positives;
    if positives == 0 || negatives == 0 {
        return Err(data(format!(
            "degenerate labels: {positives} positives, {negatives} negatives"
        )));
    }
    let mut points = Vec::with_capacity(sweep.len());
    for (param, flagged) in sweep {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for &row in flagged {
            if row < 1 || row > t {
                return Err(data(format!("flagged index {row} outside 1..={t}")));
            }
            if labels[row - 1] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        points.push(RocPoint {
            param: *param,
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        });
    }
    points.sort_by(|a, b| (a.fpr, a.tpr).partial_cmp(&(b.fpr, b.tpr)).unwrap());
    let auc = trapezoid_auc(&points);
    Ok(RocCurve { points, auc })
}

fn trapezoid_auc(sorted: &[RocPoint]) -> f64 {
    let mut xs = Vec::with_capacity(sorted.len() + 2);
    xs.push((0.0, 0.0));
    xs.extend(sorted.iter().map(|p| (p.fpr, p.tpr)));
    xs.push((1.0, 1.0));
    xs.windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataMatrix;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_data(seed: u64, t: usize, n: usize) -> DataMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut m = DMatrix::zeros(t, n);
        for r in 0..t {
            for c in 0..n {
                m[(r, c)] = StandardNormal.sample(&mut rng);
            }
        }
        DataMatrix::new(m).unwrap()
    }

    #[test]
    fn rx_score_of_mean_row_is_zero() {
        // rows symmetric around (1, 1): the middle row equals the mean
        let x = DataMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![0.0, 2.0],
            vec![2.0, 0.0],
        ])
        .unwrap();
        let s = rx_scores(&x).unwrap();
        assert_abs_diff_eq!(s.get(2), 0.0, epsilon = 1e-20);
    }

    #[test]
    fn rx_scores_hand_computed_square() {
        // rows at the corners of a square: μ = (1,1), C2 = I, all scores 2
        let x = DataMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 2.0],
            vec![2.0, 2.0],
        ])
        .unwrap();
        let s = rx_scores(&x).unwrap();
        for j in 1..=4 {
            assert_abs_diff_eq!(s.get(j), 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn rx_scores_sum_to_t_times_n() {
        let x = gaussian_data(5, 500, 4);
        let s = rx_scores(&x).unwrap();
        let total: f64 = s.as_slice().iter().sum();
        assert_abs_diff_eq!(total, 500.0 * 4.0, epsilon = 1e-8);
    }

    #[test]
    fn rx_detect_threshold_edges() {
        let x = gaussian_data(6, 100, 3);
        assert!(rx_detect(&x, RxThreshold::Raw(f64::INFINITY))
            .unwrap()
            .is_empty());
        assert_eq!(
            rx_detect(&x, RxThreshold::Raw(-1.0)).unwrap().len(),
            100
        );
    }

    #[test]
    fn rx_chi2_calibration_on_gaussian_null() {
        let t = 100_000;
        let x = gaussian_data(41, t, 5);
        let flagged = rx_detect(&x, RxThreshold::Chi2Percentile(0.99)).unwrap();
        let fraction = flagged.len() as f64 / t as f64;
        assert!(
            (fraction - 0.01).abs() < 0.003,
            "flagged fraction {fraction} outside 1% ± 0.3%"
        );
    }

    #[test]
    fn detector_rejects_bad_params() {
        let x = gaussian_data(1, 50, 3);
        assert!(hosvd_c4_detect(&x, 0.0, 1).is_err());
        assert!(hosvd_c4_detect(&x, -1.0, 1).is_err());
        assert!(hosvd_c4_detect(&x, 2.0, 0).is_err());
        assert!(hosvd_c4_detect(&x, 2.0, 4).is_err());
    }

    #[test]
    fn detector_flags_planted_outlier() {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..100 {
            rows.push((0..5).map(|_| StandardNormal.sample(&mut rng)).collect());
        }
        rows.push(vec![20.0, 0.0, 0.0, 0.0, 0.0]);
        let x = DataMatrix::from_rows(&rows).unwrap();
        let result = hosvd_c4_detect(&x, 2.5, 3).unwrap();
        assert!(
            result.flagged.contains(&101),
            "planted outlier not flagged: {:?}",
            result.flagged
        );
    }

    #[test]
    fn detector_quiet_on_gaussian_null() {
        // At t = 200 the leading M⁽⁴⁾ directions chase sampling noise, which
        // inflates the projection kurtosis and lets a few null rows past
        // β = 5; the false-alarm rate stays small but not at its asymptotic
        // level.
        let mut fractions: Vec<f64> = Vec::new();
        for seed in 0..50u64 {
            let x = gaussian_data(seed, 200, 5);
            let result = hosvd_c4_detect(&x, 5.0, 3).unwrap();
            fractions.push(result.flagged.len() as f64 / 200.0);
        }
        fractions.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = fractions[fractions.len() / 2];
        assert!(median <= 0.02, "median flagged fraction {median} above 2%");
    }

    #[test]
    fn detector_k_sequence_decreases_until_stop() {
        let ds = crate::datagen::make_experiment(400, 40, 8, 6, 6.0, 3).unwrap();
        let result = hosvd_c4_detect(&ds.data, 2.5, 3).unwrap();
        let ks: Vec<f64> = result.iterations.iter().map(|i| i.k).collect();
        for w in ks[..ks.len().saturating_sub(1)].windows(2) {
            assert!(w[1] < w[0], "k did not decrease: {ks:?}");
        }
        let removed: usize = result.iterations.iter().map(|i| i.removed).sum();
        assert_eq!(removed, result.flagged.len());
    }

    #[test]
    fn beta_monotonicity_within_first_iteration() {
        // a single fixed projection set: flags at larger β are a subset
        let ds = crate::datagen::make_experiment(300, 30, 6, 6, 6.0, 11).unwrap();
        let loose = hosvd_c4_detect(&ds.data, 2.0, 3).unwrap();
        let tight = hosvd_c4_detect(&ds.data, 3.0, 3).unwrap();
        // compare first-iteration flag counts through the diagnostics
        assert!(
            tight.iterations[0].removed <= loose.iterations[0].removed,
            "first-iteration flags not monotone in β"
        );
    }

    #[test]
    fn detector_is_row_permutation_equivariant() {
        let ds = crate::datagen::make_experiment(150, 15, 5, 6, 6.0, 21).unwrap();
        let base = hosvd_c4_detect(&ds.data, 2.5, 2).unwrap();
        // reverse the rows
        let t = ds.data.t();
        let reversed_rows: Vec<Vec<f64>> = (0..t)
            .rev()
            .map(|r| (1..=5).map(|c| ds.data.get(r + 1, c)).collect())
            .collect();
        let reversed = DataMatrix::from_rows(&reversed_rows).unwrap();
        let perm = hosvd_c4_detect(&reversed, 2.5, 2).unwrap();
        let mapped: std::collections::BTreeSet<usize> =
            perm.flagged.iter().map(|&j| t + 1 - j).collect();
        let baseset: std::collections::BTreeSet<usize> = base.flagged.iter().copied().collect();
        assert_eq!(mapped, baseset);
    }

    #[test]
    fn detector_is_affine_scale_invariant() {
        let ds = crate::datagen::make_experiment(150, 15, 5, 6, 6.0, 33).unwrap();
        let base = hosvd_c4_detect(&ds.data, 2.5, 2).unwrap();
        let scaled_rows: Vec<Vec<f64>> = (1..=ds.data.t())
            .map(|r| {
                (1..=5)
                    .map(|c| 3.5 * ds.data.get(r, c) + 10.0 * c as f64)
                    .collect()
            })
            .collect();
        let scaled = DataMatrix::from_rows(&scaled_rows).unwrap();
        let result = hosvd_c4_detect(&scaled, 2.5, 2).unwrap();
        assert_eq!(base.flagged, result.flagged);
    }

    #[test]
    fn roc_perfect_detector_has_unit_auc() {
        let labels = vec![0, 1, 0, 1, 0];
        let positives = vec![2usize, 4];
        let sweep: Vec<(f64, Vec<usize>)> =
            (1..=3).map(|b| (b as f64, positives.clone())).collect();
        let curve = roc_curve(&sweep, &labels).unwrap();
        assert_abs_diff_eq!(curve.auc, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn roc_empty_detector_is_chance() {
        let labels = vec![0, 1, 0, 1];
        let sweep: Vec<(f64, Vec<usize>)> = (1..=3).map(|b| (b as f64, Vec::new())).collect();
        let curve = roc_curve(&sweep, &labels).unwrap();
        assert_abs_diff_eq!(curve.auc, 0.5, epsilon = 1e-15);
        for p in &curve.points {
            assert_eq!((p.fpr, p.tpr), (0.0, 0.0));
        }
    }

    #[test]
    fn roc_random_scorer_is_near_chance() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let t = 2000;
        let labels: Vec<u8> = (0..t).map(|i| (i % 2) as u8).collect();
        let mut aucs = Vec::new();
        for _ in 0..20 {
            let scores: Vec<f64> = (0..t).map(|_| rng.random::<f64>()).collect();
            let sweep: Vec<(f64, Vec<usize>)> = (1..=19)
                .map(|q| {
                    let cut = q as f64 / 20.0;
                    let flagged = scores
                        .iter()
                        .enumerate()
                        .filter(|(_, &s)| s > cut)
                        .map(|(i, _)| i + 1)
                        .collect();
                    (cut, flagged)
                })
                .collect();
            aucs.push(roc_curve(&sweep, &labels).unwrap().auc);
        }
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        assert!((mean - 0.5).abs() < 0.05, "random-scorer mean AUC {mean}");
    }

    #[test]
    fn roc_rejects_degenerate_labels() {
        let sweep = vec![(1.0, vec![1])];
        assert!(roc_curve(&sweep, &[0, 0, 0]).is_err());
        assert!(roc_curve(&sweep, &[1, 1]).is_err());
        assert!(roc_curve(&sweep, &[0, 2]).is_err());
        assert!(roc_curve(&[(1.0, vec![9])], &[0, 1]).is_err());
    }
}
