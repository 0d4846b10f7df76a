//! Symmetric tensor storage and the cumulant / eigendirection numerics.
//!
//! Central moments and cumulants of orders 2–4 are estimated from data and
//! stored as fully symmetric tensors holding one value per non-decreasing
//! multi-index. The order-d cumulant tensor contracted with itself over d−1
//! modes yields a positive semi-definite matrix whose leading eigenvectors
//! are the projection directions used by the outlier detector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::DataMatrix;
use crate::error::{data, domain, Error, Result};

/// Row-block size for the chunked moment accumulation. Fixed so that the
/// summation order (and therefore the result bits) does not depend on the
/// number of worker threads.
const CHUNK_ROWS: usize = 8192;

/// Binomial coefficient C(a, k) in u64 arithmetic.
fn binom(a: usize, k: usize) -> usize {
    if k > a {
        return 0;
    }
    let mut num: u64 = 1;
    for i in 0..k as u64 {
        num = num * (a as u64 - i) / (i + 1);
    }
    num as usize
}

/// Column index of the ordered pair `(a, b)`, `a ≤ b`, in the list of all
/// ordered pairs over `n` marginals.
#[inline]
fn pair_index(a: usize, b: usize, n: usize) -> usize {
    a * n - (a * a - a) / 2 + (b - a)
}

/// Visit every non-decreasing multi-index of the given order over `0..dim`,
/// in lexicographic order.
fn for_each_nondecreasing<F: FnMut(&[usize])>(dim: usize, order: usize, mut f: F) {
    let mut idx = vec![0usize; order];
    loop {
        f(&idx);
        // advance to the next non-decreasing tuple
        let mut pos = order;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] + 1 < dim {
                let v = idx[pos] + 1;
                for slot in idx.iter_mut().skip(pos) {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// Order-d, dimension-n fully symmetric tensor, storing one value per
/// non-decreasing multi-index (C(n+d−1, d) values instead of n^d).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor {
    order: usize,
    dim: usize,
    values: Vec<f64>,
}

impl SymmetricTensor {
    /// Zero tensor of the given order (2..=4) and dimension.
    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        if !(2..=4).contains(&order) {
            return Err(Error::InvalidOrder(order));
        }
        if dim == 0 {
            return Err(domain("tensor dimension must be positive"));
        }
        Ok(Self {
            order,
            dim,
            values: vec![0.0; Self::unique_count(order, dim)],
        })
    }

    /// Number of stored (unique) entries: C(dim+order−1, order).
    pub fn unique_count(order: usize, dim: usize) -> usize {
        binom(dim + order - 1, order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at a 1-based multi-index given in any order of its entries.
    ///
    /// Panics if the index length does not match the order or any entry is
    /// outside `1..=dim`.
    pub fn get(&self, multi_index: &[usize]) -> f64 {
        assert_eq!(multi_index.len(), self.order, "multi-index length");
        let mut idx = [0usize; 4];
        for (slot, &i) in idx.iter_mut().zip(multi_index) {
            assert!(i >= 1 && i <= self.dim, "multi-index entry out of range");
            *slot = i - 1;
        }
        let idx = &mut idx[..self.order];
        idx.sort_unstable();
        self.values[Self::offset(idx)]
    }

    /// Set the value at a 1-based multi-index given in any entry order.
    ///
    /// Panics under the same conditions as [`SymmetricTensor::get`].
    pub fn set(&mut self, multi_index: &[usize], value: f64) {
        assert_eq!(multi_index.len(), self.order, "multi-index length");
        let mut idx = [0usize; 4];
        for (slot, &i) in idx.iter_mut().zip(multi_index) {
            assert!(i >= 1 && i <= self.dim, "multi-index entry out of range");
            *slot = i - 1;
        }
        let idx = &mut idx[..self.order];
        idx.sort_unstable();
        self.values[Self::offset(idx)] = value;
    }

    /// Value at a sorted 0-based multi-index (fast path).
    #[inline]
    pub(crate) fn get_sorted0(&self, sorted: &[usize]) -> f64 {
        debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
        self.values[Self::offset(sorted)]
    }

    /// Colex rank of a sorted multi-index among all non-decreasing tuples.
    #[inline]
    fn offset(sorted: &[usize]) -> usize {
        let mut r = 0;
        for (k, &i) in sorted.iter().enumerate() {
            r += binom(i + k, k + 1);
        }
        r
    }

    #[inline]
    fn set_sorted0(&mut self, sorted: &[usize], value: f64) {
        self.values[Self::offset(sorted)] = value;
    }

    /// Visit every stored entry as (sorted 0-based multi-index, value).
    pub fn for_each_unique<F: FnMut(&[usize], f64)>(&self, mut f: F) {
        for_each_nondecreasing(self.dim, self.order, |idx| {
            f(idx, self.values[Self::offset(idx)]);
        });
    }

    /// Dense expansion with n^order entries, index varying fastest in the
    /// last position. Intended for small dimensions (oracles, inspection).
    pub fn dense(&self) -> Vec<f64> {
        let d = self.order;
        let n = self.dim;
        let total = n.pow(d as u32);
        let mut out = vec![0.0; total];
        let mut scratch = [0usize; 4];
        for (lin, slot) in out.iter_mut().enumerate() {
            let mut rem = lin;
            for k in (0..d).rev() {
                scratch[k] = rem % n;
                rem /= n;
            }
            let idx = &mut scratch[..d];
            idx.sort_unstable();
            *slot = self.values[Self::offset(idx)];
        }
        out
    }
}

/// Raw (unnormalized) Gram accumulations over mean-centered data.
struct MomentGrams {
    /// XᵀX (n × n)
    g2: DMatrix<f64>,
    /// PᵀX (npairs × n), P the matrix of ordered-pair products
    g3: Option<DMatrix<f64>>,
    /// PᵀP (npairs × npairs)
    g4: Option<DMatrix<f64>>,
}

fn chunk_ranges(t: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(t.div_ceil(CHUNK_ROWS));
    let mut start = 0;
    while start < t {
        let len = CHUNK_ROWS.min(t - start);
        out.push((start, len));
        start += len;
    }
    out
}

/// Map chunks of rows to partial results, preserving chunk order so that the
/// subsequent fold is bit-stable regardless of thread count.
fn map_chunks<T, F>(t: usize, map: F) -> Vec<T>
where
    F: Fn((usize, usize)) -> T + Sync,
    T: Send,
{
    let ranges = chunk_ranges(t);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ranges.par_iter().map(|&r| map(r)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ranges.iter().map(|&r| map(r)).collect()
    }
}

/// Pair-product matrix for a block of rows: column (a ≤ b) holds x_a·x_b.
fn pair_products(xc: &DMatrix<f64>, start: usize, len: usize) -> DMatrix<f64> {
    let n = xc.ncols();
    let npairs = n * (n + 1) / 2;
    let mut p = DMatrix::zeros(len, npairs);
    for a in 0..n {
        for b in a..n {
            let col = pair_index(a, b, n);
            for r in 0..len {
                p[(r, col)] = xc[(start + r, a)] * xc[(start + r, b)];
            }
        }
    }
    p
}

fn moment_grams(xc: &DMatrix<f64>, want3: bool, want4: bool) -> MomentGrams {
    let t = xc.nrows();
    let n = xc.ncols();
    let npairs = n * (n + 1) / 2;
    let parts = map_chunks(t, |(start, len)| {
        let block = xc.rows(start, len);
        let g2 = block.tr_mul(&block);
        let (g3, g4) = if want3 || want4 {
            let p = pair_products(xc, start, len);
            (
                want3.then(|| p.tr_mul(&block)),
                want4.then(|| p.tr_mul(&p)),
            )
        } else {
            (None, None)
        };
        (g2, g3, g4)
    });
    let mut grams = MomentGrams {
        g2: DMatrix::zeros(n, n),
        g3: want3.then(|| DMatrix::zeros(npairs, n)),
        g4: want4.then(|| DMatrix::zeros(npairs, npairs)),
    };
    for (g2, g3, g4) in parts {
        grams.g2 += g2;
        if let (Some(acc), Some(part)) = (grams.g3.as_mut(), g3) {
            *acc += part;
        }
        if let (Some(acc), Some(part)) = (grams.g4.as_mut(), g4) {
            *acc += part;
        }
    }
    grams
}

fn pack_order2(g2: &DMatrix<f64>, t: f64) -> SymmetricTensor {
    let n = g2.nrows();
    let mut out = SymmetricTensor::zeros(2, n).expect("valid order");
    for_each_nondecreasing(n, 2, |idx| {
        out.set_sorted0(idx, g2[(idx[0], idx[1])] / t);
    });
    out
}

fn pack_order3(g3: &DMatrix<f64>, n: usize, t: f64) -> SymmetricTensor {
    let mut out = SymmetricTensor::zeros(3, n).expect("valid order");
    for_each_nondecreasing(n, 3, |idx| {
        out.set_sorted0(idx, g3[(pair_index(idx[0], idx[1], n), idx[2])] / t);
    });
    out
}

fn pack_order4(g4: &DMatrix<f64>, n: usize, t: f64) -> SymmetricTensor {
    let mut out = SymmetricTensor::zeros(4, n).expect("valid order");
    for_each_nondecreasing(n, 4, |idx| {
        let row = pair_index(idx[0], idx[1], n);
        let col = pair_index(idx[2], idx[3], n);
        out.set_sorted0(idx, g4[(row, col)] / t);
    });
    out
}

/// d-th central moment tensor, `m̃_{i₁…i_d} = (1/t) Σ_j Π_k (x_{j,i_k} − mean_{i_k})`.
///
/// The estimator divides by `t` with no bias correction.
pub fn central_moment(x: &DataMatrix, order: usize) -> Result<SymmetricTensor> {
    if !(2..=4).contains(&order) {
        return Err(Error::InvalidOrder(order));
    }
    let xc = x.centered();
    let t = x.t() as f64;
    Ok(match order {
        2 => pack_order2(&moment_grams(&xc, false, false).g2, t),
        3 => pack_order3(
            moment_grams(&xc, true, false).g3.as_ref().expect("g3"),
            x.n(),
            t,
        ),
        _ => pack_order4(
            moment_grams(&xc, false, true).g4.as_ref().expect("g4"),
            x.n(),
            t,
        ),
    })
}

/// Fourth cumulant from the central moments of orders 2 and 4:
/// `c_{i₁…i₄} = m̃_{i₁…i₄} − m̃_{i₁i₂}m̃_{i₃i₄} − m̃_{i₁i₃}m̃_{i₂i₄} − m̃_{i₁i₄}m̃_{i₂i₃}`.
fn fourth_cumulant_from_moments(m2: &SymmetricTensor, m4: &SymmetricTensor) -> SymmetricTensor {
    let n = m4.dim();
    let mut c4 = SymmetricTensor::zeros(4, n).expect("valid order");
    for_each_nondecreasing(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let v = m4.get_sorted0(idx)
            - m2.get_sorted0(&[i, j]) * m2.get_sorted0(&[k, l])
            - m2.get_sorted0(&[i, k]) * m2.get_sorted0(&[j, l])
            - m2.get_sorted0(&[i, l]) * m2.get_sorted0(&[j, k]);
        c4.set_sorted0(idx, v);
    });
    c4
}

/// Cumulant tensors of orders 2, 3 and 4. Orders 2 and 3 equal the central
/// moments; order 4 subtracts the three covariance pairings.
pub fn cumulants_upto_4(
    x: &DataMatrix,
) -> Result<(SymmetricTensor, SymmetricTensor, SymmetricTensor)> {
    let xc = x.centered();
    let t = x.t() as f64;
    let n = x.n();
    let grams = moment_grams(&xc, true, true);
    let m2 = pack_order2(&grams.g2, t);
    let m3 = pack_order3(grams.g3.as_ref().expect("g3"), n, t);
    let m4 = pack_order4(grams.g4.as_ref().expect("g4"), n, t);
    let c4 = fourth_cumulant_from_moments(&m2, &m4);
    Ok((m2, m3, c4))
}

/// Fourth cumulant of an already mean-centered matrix (detector hot path).
pub(crate) fn fourth_cumulant_centered(xc: &DMatrix<f64>) -> SymmetricTensor {
    let t = xc.nrows() as f64;
    let n = xc.ncols();
    let grams = moment_grams(xc, false, true);
    let m2 = pack_order2(&grams.g2, t);
    let m4 = pack_order4(grams.g4.as_ref().expect("g4"), n, t);
    fourth_cumulant_from_moments(&m2, &m4)
}

/// Permutation count of a multiset given as a sorted slice.
fn multiset_permutations(sorted: &[usize]) -> f64 {
    const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];
    let mut total = FACT[sorted.len()];
    let mut run = 1usize;
    for w in 1..=sorted.len() {
        if w < sorted.len() && sorted[w] == sorted[w - 1] {
            run += 1;
        } else {
            total /= FACT[run];
            run = 1;
        }
    }
    total
}

/// Contraction of a symmetric tensor with itself over its last d−1 modes:
/// `m_{j₁j₂} = Σ_{i₂…i_d} c_{j₁,i₂…i_d} · c_{j₂,i₂…i_d}`, the sum ranging
/// over the full dense index set. Stored unique entries are expanded with
/// their permutation multiplicity rather than materializing n^d values.
///
/// The result is symmetric and positive semi-definite.
pub fn contract_self(c: &SymmetricTensor) -> DMatrix<f64> {
    let n = c.dim();
    let d = c.order();
    let mut m = DMatrix::zeros(n, n);
    let mut u = DVector::zeros(n);
    let mut full = [0usize; 4];
    for_each_nondecreasing(n, d - 1, |tail| {
        let weight = multiset_permutations(tail);
        for j in 0..n {
            // merge j into the sorted tail
            let mut pos = 0;
            while pos < tail.len() && tail[pos] < j {
                full[pos] = tail[pos];
                pos += 1;
            }
            full[pos] = j;
            full[pos + 1..=tail.len()].copy_from_slice(&tail[pos..]);
            u[j] = c.get_sorted0(&full[..=tail.len()]);
        }
        for j1 in 0..n {
            let wu = weight * u[j1];
            for j2 in j1..n {
                m[(j1, j2)] += wu * u[j2];
            }
        }
    });
    for j1 in 0..n {
        for j2 in 0..j1 {
            m[(j1, j2)] = m[(j2, j1)];
        }
    }
    m
}

/// Orthonormal eigendirections of a symmetric matrix with eigenvalues in
/// descending order.
#[derive(Debug, Clone)]
pub struct SpectralDirections {
    directions: Vec<DVector<f64>>,
    eigenvalues: Vec<f64>,
}

impl SpectralDirections {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// i-th direction (0-based, descending eigenvalue order).
    pub fn direction(&self, i: usize) -> &DVector<f64> {
        &self.directions[i]
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.eigenvalues[i]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// First `r` eigenvectors of a symmetric matrix by descending eigenvalue.
///
/// Ties keep the eigensolver's original ordering (lowest index first); the
/// sign of each direction is fixed so its first nonzero coordinate is
/// positive. Input asymmetry beyond 1e-8 is rejected.
pub fn leading_directions(m: &DMatrix<f64>, r: usize) -> Result<SpectralDirections> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(data(format!(
            "matrix must be square, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-8 {
        return Err(Error::NotSymmetric(asym));
    }
    if r < 1 || r > n {
        return Err(domain(format!(
            "direction count {r} outside 1..={n}"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort: equal eigenvalues keep their original (lowest-first) index order
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut directions = Vec::with_capacity(r);
    let mut eigenvalues = Vec::with_capacity(r);
    for &src in order.iter().take(r) {
        let mut v: DVector<f64> = eig.eigenvectors.column(src).into();
        let scale = v.amax();
        if let Some(first) = v.iter().find(|&&c| c.abs() > 1e-12 * scale) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        directions.push(v);
        eigenvalues.push(eig.eigenvalues[src]);
    }
    Ok(SpectralDirections {
        directions,
        eigenvalues,
    })
}

/// Symmetric eigendecomposition of the sample covariance with a relative
/// eigenvalue floor; shared by whitening and the Mahalanobis scores.
pub(crate) fn covariance_eigen(x: &DataMatrix) -> Result<(DMatrix<f64>, SymmetricEigen<f64, nalgebra::Dyn>)> {
    let xc = x.centered();
    let c2 = xc.tr_mul(&xc) / x.t() as f64;
    let eig = SymmetricEigen::new(c2);
    let max_eig = eig.eigenvalues.amax();
    let floor = 1e-10 * max_eig;
    for &ev in eig.eigenvalues.iter() {
        if ev <= floor {
            return Err(Error::SingularCovariance {
                eigenvalue: ev,
                floor,
            });
        }
    }
    Ok((xc, eig))
}

/// Remove the mean and the standard cross-correlations:
/// `(X − μ) · C₂^{−1/2}` with the symmetric principal inverse square root of
/// the t-normalized sample covariance.
///
/// The output has zero column means and sample covariance equal to the
/// identity. Fails if any covariance eigenvalue is at or below 1e-10 of the
/// largest.
pub fn whiten(x: &DataMatrix) -> Result<DataMatrix> {
    let (xc, eig) = covariance_eigen(x)?;
    let w = inverse_sqrt_from_eigen(&eig);
    DataMatrix::new(xc * w)
}

fn inverse_sqrt_from_eigen(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    v * inv_sqrt * v.transpose()
}

pub(crate) fn inverse_from_eigen(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    v * inv * v.transpose()
}
