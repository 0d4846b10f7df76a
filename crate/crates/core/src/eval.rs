//! Multi-seed experiment orchestration: generate labeled datasets, sweep
//! both detectors, and aggregate ROC curves and AUC across seeds.

use serde::{Deserialize, Serialize};

use crate::datagen::make_experiment;
use crate::detect::{hosvd_c4_detect, roc_curve, rx_scores, RocCurve, RocPoint};
use crate::error::{domain, Result};

/// Ascending β sweep `start, start+step, …, ≤ stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for BetaGrid {
    /// 1.0 to 5.0 in steps of 0.25, bracketing the useful operating range
    /// of the cumulant detector.
    fn default() -> Self {
        Self {
            start: 1.0,
            stop: 5.0,
            step: 0.25,
        }
    }
}

impl BetaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.start > 0.0) || !(self.step > 0.0) || self.stop < self.start {
            return Err(domain(format!(
                "invalid β grid {}:{}:{}",
                self.start, self.stop, self.step
            )));
        }
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let v = self.start + f64::from(i) * self.step;
            if v > self.stop + 1e-9 * self.step {
                break;
            }
            out.push(v);
            i += 1;
        }
        Ok(out)
    }
}

/// Seeds as an explicit list or a count (count c means seeds 1..=c).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(usize),
    List(Vec<u64>),
}

impl SeedSpec {
    pub fn resolve(&self) -> Result<Vec<u64>> {
        let mut seeds = match self {
            SeedSpec::Count(c) => (1..=*c as u64).collect::<Vec<_>>(),
            SeedSpec::List(l) => l.clone(),
        };
        if seeds.is_empty() {
            return Err(domain("seed list must not be empty"));
        }
        seeds.sort_unstable();
        Ok(seeds)
    }
}

/// Which detectors an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorChoice {
    C4,
    Rx,
    Both,
}

impl DetectorChoice {
    fn wants_c4(self) -> bool {
        matches!(self, DetectorChoice::C4 | DetectorChoice::Both)
    }

    fn wants_rx(self) -> bool {
        matches!(self, DetectorChoice::Rx | DetectorChoice::Both)
    }
}

/// Full experiment description; serializable as a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_t")]
    pub t: usize,
    #[serde(default = "default_tau")]
    pub tau: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_nu_c")]
    pub nu_c: u64,
    #[serde(default = "default_nu_u")]
    pub nu_u: f64,
    /// Number of projection directions for the cumulant detector.
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default)]
    pub beta_grid: BetaGrid,
    pub seeds: SeedSpec,
    #[serde(default = "default_detectors")]
    pub detectors: DetectorChoice,
}

fn default_t() -> usize {
    1000
}
fn default_tau() -> usize {
    100
}
fn default_n() -> usize {
    30
}
fn default_nu_c() -> u64 {
    6
}
fn default_nu_u() -> f64 {
    6.0
}
fn default_r() -> usize {
    3
}
fn default_detectors() -> DetectorChoice {
    DetectorChoice::Both
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            t: default_t(),
            tau: default_tau(),
            n: default_n(),
            nu_c: default_nu_c(),
            nu_u: default_nu_u(),
            r: default_r(),
            beta_grid: BetaGrid::default(),
            seeds: SeedSpec::Count(20),
            detectors: default_detectors(),
        }
    }
}

/// Results of one seed: ROC curves per detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c4: Option<RocCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx: Option<RocCurve>,
}

/// Seed-aggregated ROC points (position-wise over the sweep) and AUC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocAggregate {
    pub mean_auc: f64,
    pub median_auc: f64,
    /// Mean (param, fpr, tpr) at each sweep position, in sweep order.
    pub mean_points: Vec<RocPoint>,
    /// Component-wise median at each sweep position, in sweep order.
    pub median_points: Vec<RocPoint>,
}

/// Aggregated report over all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub per_seed: Vec<SeedReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c4: Option<RocAggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx: Option<RocAggregate>,
}

/// Sweep-ordered operating points of one seed for one detector.
struct SweepResult {
    points: Vec<RocPoint>,
    curve: RocCurve,
}

/// Run the cumulant detector at each β and return the flagged sets,
/// in grid order.
pub fn c4_beta_sweep(
    data: &crate::DataMatrix,
    betas: &[f64],
    r: usize,
) -> Result<Vec<(f64, Vec<usize>)>> {
    let mut sweep = Vec::with_capacity(betas.len());
    for &beta in betas {
        let result = hosvd_c4_detect(data, beta, r)?;
        sweep.push((beta, result.flagged));
    }
    Ok(sweep)
}

/// Sweep the RX detector by raw thresholds placed at evenly spaced quantiles
/// of its own score distribution. RX has no β; using the same sweep
/// cardinality as the β grid keeps the two detectors' curves comparable.
pub fn rx_quantile_sweep(
    data: &crate::DataMatrix,
    cardinality: usize,
) -> Result<Vec<(f64, Vec<usize>)>> {
    let scores = rx_scores(data)?;
    let mut sorted: Vec<f64> = scores.as_slice().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sweep = Vec::with_capacity(cardinality);
    for i in 0..cardinality {
        let level = (i + 1) as f64 / (cardinality + 1) as f64;
        let cut = quantile_sorted(&sorted, level);
        let flagged: Vec<usize> = scores
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > cut)
            .map(|(j, _)| j + 1)
            .collect();
        sweep.push((cut, flagged));
    }
    Ok(sweep)
}

fn sweep_c4(
    data: &crate::DataMatrix,
    labels: &[u8],
    betas: &[f64],
    r: usize,
) -> Result<SweepResult> {
    build_sweep_result(&c4_beta_sweep(data, betas, r)?, labels)
}

fn sweep_rx(data: &crate::DataMatrix, labels: &[u8], cardinality: usize) -> Result<SweepResult> {
    build_sweep_result(&rx_quantile_sweep(data, cardinality)?, labels)
}

fn build_sweep_result(sweep: &[(f64, Vec<usize>)], labels: &[u8]) -> Result<SweepResult> {
    let curve = roc_curve(sweep, labels)?;
    // recover sweep-ordered points for the position-wise aggregation
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    let points = sweep
        .iter()
        .map(|(param, flagged)| {
            let tp = flagged.iter().filter(|&&j| labels[j - 1] == 1).count();
            let fp = flagged.len() - tp;
            RocPoint {
                param: *param,
                fpr: fp as f64 / negatives as f64,
                tpr: tp as f64 / positives as f64,
            }
        })
        .collect();
    Ok(SweepResult { points, curve })
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let pos = level * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

fn median_mut(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn aggregate(per_seed: &[SweepResult]) -> RocAggregate {
    let seeds = per_seed.len() as f64;
    let mut aucs: Vec<f64> = per_seed.iter().map(|s| s.curve.auc).collect();
    let mean_auc = aucs.iter().sum::<f64>() / seeds;
    let median_auc = median_mut(&mut aucs);
    let positions = per_seed[0].points.len();
    let mut mean_points = Vec::with_capacity(positions);
    let mut median_points = Vec::with_capacity(positions);
    for i in 0..positions {
        let mut params: Vec<f64> = per_seed.iter().map(|s| s.points[i].param).collect();
        let mut fprs: Vec<f64> = per_seed.iter().map(|s| s.points[i].fpr).collect();
        let mut tprs: Vec<f64> = per_seed.iter().map(|s| s.points[i].tpr).collect();
        mean_points.push(RocPoint {
            param: params.iter().sum::<f64>() / seeds,
            fpr: fprs.iter().sum::<f64>() / seeds,
            tpr: tprs.iter().sum::<f64>() / seeds,
        });
        median_points.push(RocPoint {
            param: median_mut(&mut params),
            fpr: median_mut(&mut fprs),
            tpr: median_mut(&mut tprs),
        });
    }
    RocAggregate {
        mean_auc,
        median_auc,
        mean_points,
        median_points,
    }
}

/// Run the configured experiment: per seed, generate a dataset and sweep the
/// selected detectors; then aggregate. Deterministic for a given config;
/// seeds may run in parallel, aggregation is order-independent.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let betas = config.beta_grid.values()?;
    let seeds = config.seeds.resolve()?;
    let cfg = config.clone();

    let run_seed = |&seed: &u64| -> Result<(u64, Option<SweepResult>, Option<SweepResult>)> {
        let ds = make_experiment(cfg.t, cfg.tau, cfg.n, cfg.nu_c, cfg.nu_u, seed)?;
        let c4 = if cfg.detectors.wants_c4() {
            Some(sweep_c4(&ds.data, &ds.labels, &betas, cfg.r)?)
        } else {
            None
        };
        let rx = if cfg.detectors.wants_rx() {
            Some(sweep_rx(&ds.data, &ds.labels, betas.len())?)
        } else {
            None
        };
        Ok((seed, c4, rx))
    };

    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        seeds.par_iter().map(run_seed).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = seeds.iter().map(run_seed).collect::<Result<Vec<_>>>()?;

    let mut per_seed = Vec::with_capacity(results.len());
    let mut c4_sweeps = Vec::new();
    let mut rx_sweeps = Vec::new();
    for (seed, c4, rx) in results {
        per_seed.push(SeedReport {
            seed,
            c4: c4.as_ref().map(|s| s.curve.clone()),
            rx: rx.as_ref().map(|s| s.curve.clone()),
        });
        if let Some(s) = c4 {
            c4_sweeps.push(s);
        }
        if let Some(s) = rx {
            rx_sweeps.push(s);
        }
    }

    Ok(ExperimentReport {
        config: config.clone(),
        per_seed,
        c4: (!c4_sweeps.is_empty()).then(|| aggregate(&c4_sweeps)),
        rx: (!rx_sweeps.is_empty()).then(|| aggregate(&rx_sweeps)),
    })
}
