//! Synthetic crisis-data laboratory.
//!
//! Ordinary rows carry a Gaussian copula; outlier rows get a t-Student
//! copula injected into a random half of the marginals by dividing each
//! realisation by an independent χ² draw. All marginals are transformed to
//! the same t distribution afterwards, so the two row populations differ
//! only in their dependence structure — which is exactly what the
//! fourth-cumulant detector is meant to pick up.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::dist::{chi2_sample, gaussian_marginal_map, t_marginal_map};
use crate::error::{domain, numeric, Error, Result};

/// Symmetric positive semi-definite matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    inner: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Validating constructor: requires symmetry within 1e-12, a diagonal
    /// within 1e-12 of one (snapped to exactly one), off-diagonal entries in
    /// [−1, 1], and minimum eigenvalue ≥ −1e-10.
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(domain("correlation matrix must be square and non-empty"));
        }
        for i in 0..n {
            if (m[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(domain(format!(
                    "diagonal element {} is {}, expected 1",
                    i + 1,
                    m[(i, i)]
                )));
            }
            m[(i, i)] = 1.0;
            for j in (i + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::NotSymmetric((m[(i, j)] - m[(j, i)]).abs()));
                }
                if m[(i, j)].abs() > 1.0 + 1e-12 {
                    return Err(domain(format!(
                        "correlation ({},{}) = {} outside [-1, 1]",
                        i + 1,
                        j + 1,
                        m[(i, j)]
                    )));
                }
                let v = m[(i, j)].clamp(-1.0, 1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let eig = nalgebra::SymmetricEigen::new(m.clone());
        let min_eig = eig.eigenvalues.min();
        if min_eig < -1e-10 {
            return Err(domain(format!(
                "correlation matrix has eigenvalue {min_eig:.3e} below the PSD tolerance"
            )));
        }
        Ok(Self { inner: m })
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    /// Entry at 1-based (i, j).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i - 1, j - 1)]
    }

    /// Row-major nested vectors, for serialization.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.inner[(i, j)]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(domain("correlation matrix rows must form a square"));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(DMatrix::from_row_slice(n, n, &flat))
    }
}

impl Serialize for CorrelationMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CorrelationMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        CorrelationMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Parameters of the t-Student-copula injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    nu_c: u64,
    nu_u: f64,
    subset: Vec<usize>,
}

impl CopulaSpec {
    /// `nu_c ≥ 3` (integer copula dof; χ² mixing below 3 leaves the mixed
    /// marginals without finite variance), `nu_u > 4` (finite fourth moment),
    /// `subset` of 1-based marginal indices.
    pub fn new(nu_c: u64, nu_u: f64, subset: Vec<usize>) -> Result<Self> {
        if nu_c < 3 {
            return Err(domain(format!("copula dof ν_c = {nu_c} must be at least 3")));
        }
        if !(nu_u > 4.0) {
            return Err(domain(format!(
                "marginal dof ν_u = {nu_u} must exceed 4 for a finite fourth moment"
            )));
        }
        let mut subset = subset;
        subset.sort_unstable();
        subset.dedup();
        if subset.first().is_some_and(|&i| i < 1) {
            return Err(domain("subset indices are 1-based"));
        }
        Ok(Self { nu_c, nu_u, subset })
    }

    pub fn nu_c(&self) -> u64 {
        self.nu_c
    }

    pub fn nu_u(&self) -> f64 {
        self.nu_u
    }

    /// Sorted 1-based marginal indices receiving the t-Student copula.
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }
}

/// Generation metadata sufficient to regenerate a dataset bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMeta {
    pub seed: u64,
    pub t: usize,
    pub tau: usize,
    pub n: usize,
    pub nu_c: u64,
    pub nu_u: f64,
    pub sigma: CorrelationMatrix,
    /// 1-based marginals that received the t-Student copula in outlier rows.
    pub subset: Vec<usize>,
}

/// Generated data with binary ground-truth outlier labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDataset {
    pub data: DataMatrix,
    /// One entry per row; 1 marks an outlier row.
    pub labels: Vec<u8>,
    pub meta: ExperimentMeta,
}

/// Random full-rank correlation matrix from a normalized Gram construction:
/// `A` iid standard normal, `B = A·Aᵀ + 0.1·I`, `Σ_{ij} = B_{ij}/√(B_{ii}B_{jj})`.
pub fn random_correlation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CorrelationMatrix> {
    if n == 0 {
        return Err(domain("dimension must be positive"));
    }
    let mut a: DMatrix<f64> = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let mut b: DMatrix<f64> = &a * a.transpose();
    for i in 0..n {
        b[(i, i)] += 0.1;
    }
    let mut sigma = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sigma[(i, j)] = b[(i, j)] / (b[(i, i)] * b[(j, j)]).sqrt();
        }
        sigma[(i, i)] = 1.0;
    }
    // exact symmetry regardless of rounding in the normalization
    for i in 0..n {
        for j in (i + 1)..n {
            sigma[(j, i)] = sigma[(i, j)];
        }
    }
    CorrelationMatrix::new(sigma)
}

/// Rows of iid N(0, Σ) draws via a triangular factorization (with a 1e-10
/// diagonal jitter retry for semi-definite Σ).
fn sample_gaussian_raw<R: Rng + ?Sized>(
    sigma: &CorrelationMatrix,
    t: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let n = sigma.dim();
    let chol = nalgebra::Cholesky::new(sigma.matrix().clone()).or_else(|| {
        let mut jittered = sigma.matrix().clone();
        for i in 0..n {
            jittered[(i, i)] += 1e-10;
        }
        nalgebra::Cholesky::new(jittered)
    });
    let l = chol
        .ok_or_else(|| numeric("correlation matrix factorization failed even with jitter"))?
        .unpack();
    let mut out = DMatrix::zeros(t, n);
    let mut z = nalgebra::DVector::zeros(n);
    for row in 0..t {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        let v = &l * &z;
        for col in 0..n {
            out[(row, col)] = v[col];
        }
    }
    Ok(out)
}

/// Public wrapper over [`sample_gaussian_raw`] producing a validated
/// [`DataMatrix`] (at least two rows).
pub fn sample_gaussian<R: Rng + ?Sized>(
    sigma: &CorrelationMatrix,
    t: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    DataMatrix::new(sample_gaussian_raw(sigma, t, rng)?)
}

fn gcop2tstudent_raw<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    spec: &CopulaSpec,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let n = x.ncols();
    if spec.subset.last().is_some_and(|&i| i > n) {
        return Err(domain(format!(
            "subset index {} exceeds marginal count {n}",
            spec.subset.last().unwrap()
        )));
    }
    let mut in_subset = vec![false; n];
    for &i in &spec.subset {
        in_subset[i - 1] = true;
    }
    let nu_c = spec.nu_c as f64;
    let mut out = DMatrix::zeros(x.nrows(), n);
    for row in 0..x.nrows() {
        // one χ² draw per realisation: the whole subset shares it, which is
        // what makes the subset jointly t-distributed
        let factor = if spec.subset.is_empty() {
            1.0
        } else {
            (nu_c / chi2_sample(spec.nu_c, rng)?).sqrt()
        };
        for col in 0..n {
            let v = x[(row, col)];
            out[(row, col)] = if in_subset[col] {
                t_marginal_map(v * factor, nu_c, spec.nu_u)
            } else {
                gaussian_marginal_map(v, spec.nu_u)
            };
        }
    }
    Ok(out)
}

/// Inject a t-Student copula into the subset marginals of Gaussian draws and
/// transform every marginal to t(ν_u).
///
/// For each row, the subset entries are divided by √(v₀/ν_c) with a single
/// v₀ ~ χ²_{ν_c} per row; the subset marginals (now t(ν_c)-distributed) and
/// the untouched Gaussian marginals are then mapped to t(ν_u) through their
/// respective probability-integral transforms. The output has t(ν_u)
/// marginals everywhere; the subset carries a t-Student copula, the rest the
/// original Gaussian one.
pub fn gcop2tstudent<R: Rng + ?Sized>(
    x: &DataMatrix,
    spec: &CopulaSpec,
    rng: &mut R,
) -> Result<DataMatrix> {
    DataMatrix::new(gcop2tstudent_raw(x.matrix(), spec, rng)?)
}

/// Generate a labeled experiment: `t − τ` ordinary rows (Gaussian copula)
/// and `τ` outlier rows (t-Student copula on a random half of the
/// marginals), all sharing one random Σ and t(ν_u) marginals, with outlier
/// rows at uniformly random positions.
pub fn make_experiment(
    t: usize,
    tau: usize,
    n: usize,
    nu_c: u64,
    nu_u: f64,
    seed: u64,
) -> Result<ExperimentDataset> {
    if n < 2 {
        return Err(domain("experiment needs at least 2 marginals"));
    }
    if tau == 0 || 2 * tau >= t {
        return Err(domain(format!(
            "outlier count τ = {tau} must satisfy 0 < τ < t/2 (t = {t})"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sigma = random_correlation(n, &mut rng)?;

    let ordinary_spec = CopulaSpec::new(nu_c, nu_u, Vec::new())?;
    let gaussian_ordinary = sample_gaussian_raw(&sigma, t - tau, &mut rng)?;
    let ordinary = gcop2tstudent_raw(&gaussian_ordinary, &ordinary_spec, &mut rng)?;

    let mut subset: Vec<usize> = rand::seq::index::sample(&mut rng, n, n / 2)
        .iter()
        .map(|i| i + 1)
        .collect();
    subset.sort_unstable();
    let outlier_spec = CopulaSpec::new(nu_c, nu_u, subset.clone())?;
    let gaussian_outlier = sample_gaussian_raw(&sigma, tau, &mut rng)?;
    let outlier = gcop2tstudent_raw(&gaussian_outlier, &outlier_spec, &mut rng)?;

    let mut positions: Vec<usize> = rand::seq::index::sample(&mut rng, t, tau).iter().collect();
    positions.sort_unstable();

    let mut labels = vec![0u8; t];
    let mut data = DMatrix::zeros(t, n);
    let mut next_outlier = 0;
    let mut next_ordinary = 0;
    for (row, label) in labels.iter_mut().enumerate() {
        if next_outlier < positions.len() && positions[next_outlier] == row {
            data.set_row(row, &outlier.row(next_outlier));
            *label = 1;
            next_outlier += 1;
        } else {
            data.set_row(row, &ordinary.row(next_ordinary));
            next_ordinary += 1;
        }
    }

    Ok(ExperimentDataset {
        data: DataMatrix::new(data)?,
        labels,
        meta: ExperimentMeta {
            seed,
            t,
            tau,
            n,
            nu_c,
            nu_u,
            sigma,
            subset,
        },
    })
}
