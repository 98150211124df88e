use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::{CMatrix, CVector, Error, Result, C64};

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues below `RANK_TOL * max_eigenvalue` count as zero.
pub const RANK_TOL: f64 = 1e-7;

/// Smallest eigenvalue accepted as PSD, relative to the trace.
pub const PSD_TOL: f64 = 1e-8;

/// Relative singular value below which a nullspace direction is accepted.
pub const NULLSPACE_TOL: f64 = 1e-9;

/// A complex Hermitian matrix. Construction symmetrizes the input, so the
/// stored entries satisfy `m[(i, j)] == conj(m[(j, i)])` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Validates `m` against [`HERMITIAN_TOL`] and symmetrizes it.
    pub fn new(m: CMatrix) -> Result<Self> {
        check_hermitian(&m)?;
        Ok(Self::symmetrize(m))
    }

    /// Builds `(m + m^H) / 2` without checking how far `m` was from Hermitian.
    pub fn symmetrize(m: CMatrix) -> Self {
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        HermitianMatrix(h)
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix(CMatrix::identity(dim, dim))
    }

    /// `v v^H`.
    pub fn outer(v: &CVector) -> Self {
        Self::symmetrize(v * v.adjoint())
    }

    /// Real diagonal matrix.
    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        HermitianMatrix(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// `tr(self * other)`, real for two Hermitian matrices.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        // tr(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij)
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    /// `v^H self v`.
    pub fn quad_form(&self, v: &CVector) -> f64 {
        v.dotc(&(&self.0 * v)).re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, k: f64) -> Self {
        HermitianMatrix(&self.0 * C64::new(k, 0.0))
    }

    /// `B^H self B` for a possibly rectangular `B`.
    pub fn congruence(&self, b: &CMatrix) -> Self {
        Self::symmetrize(b.adjoint() * &self.0 * b)
    }

    pub fn eigen(&self) -> HermEigen {
        eigen_unchecked(&self.0)
    }
}

fn check_hermitian(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Precondition(format!(
            "matrix is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let asym = (m - m.adjoint()).norm();
    if !asym.is_finite() || asym > HERMITIAN_TOL * scale {
        return Err(Error::Precondition(format!(
            "matrix is not Hermitian (relative asymmetry {:.3e})",
            asym / scale
        )));
    }
    Ok(())
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEigen {
    /// Ascending.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl HermEigen {
    pub fn max_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn min_value(&self) -> f64 {
        self.values[0]
    }

    /// Eigenvector of the largest eigenvalue.
    pub fn max_vector(&self) -> CVector {
        self.vectors.column(self.values.len() - 1).into_owned()
    }
}

/// Hermitian eigen-decomposition with eigenvalues in ascending order.
pub fn herm_eig(h: &CMatrix) -> Result<HermEigen> {
    check_hermitian(h)?;
    let sym = HermitianMatrix::symmetrize(h.clone());
    Ok(eigen_unchecked(sym.as_matrix()))
}

fn eigen_unchecked(h: &CMatrix) -> HermEigen {
    let n = h.nrows();
    if n == 0 {
        return HermEigen {
            values: DVector::zeros(0),
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermEigen { values, vectors }
}

/// Factor a PSD matrix as `V V^H` with `V` of size `dim x r`, where `r`
/// counts eigenvalues above `RANK_TOL` times the largest. Columns are ordered
/// by decreasing eigenvalue.
///
/// Dropped eigenvalues are bounded by `RANK_TOL * max`, so the factorization
/// is exact up to that level.
pub fn psd_factor(w: &HermitianMatrix) -> Result<CMatrix> {
    let eig = w.eigen();
    let n = w.dim();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let trace = w.trace().abs().max(f64::MIN_POSITIVE);
    if eig.min_value() < -PSD_TOL * trace {
        return Err(Error::Precondition(format!(
            "matrix is indefinite (min eigenvalue {:.3e}, trace {:.3e})",
            eig.min_value(),
            trace
        )));
    }
    let max = eig.max_value();
    if max <= 0.0 {
        return Ok(CMatrix::zeros(n, 0));
    }
    let keep: Vec<usize> = (0..n)
        .rev()
        .filter(|&k| eig.values[k] > RANK_TOL * max)
        .collect();
    let mut v = CMatrix::zeros(n, keep.len());
    for (col, &k) in keep.iter().enumerate() {
        let scale = C64::new(eig.values[k].sqrt(), 0.0);
        v.set_column(col, &(eig.vectors.column(k) * scale));
    }
    Ok(v)
}

/// Numerical rank under [`RANK_TOL`].
pub fn numerical_rank(w: &HermitianMatrix) -> usize {
    let eig = w.eigen();
    if w.dim() == 0 {
        return 0;
    }
    let max = eig.max_value();
    if max <= 0.0 {
        return 0;
    }
    eig.values.iter().filter(|&&l| l > RANK_TOL * max).count()
}

/// Orthonormal basis of the real vector space of `r x r` Hermitian matrices
/// (Frobenius inner product): `r` real diagonal units followed by symmetric
/// and antisymmetric off-diagonal pairs scaled by `1/sqrt(2)`.
fn hermitian_basis(r: usize) -> Vec<CMatrix> {
    let mut basis = Vec::with_capacity(r * r);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..r {
        let mut e = CMatrix::zeros(r, r);
        e[(i, i)] = C64::new(1.0, 0.0);
        basis.push(e);
    }
    for i in 0..r {
        for j in (i + 1)..r {
            let mut sym = CMatrix::zeros(r, r);
            sym[(i, j)] = C64::new(h, 0.0);
            sym[(j, i)] = C64::new(h, 0.0);
            basis.push(sym);
            let mut skew = CMatrix::zeros(r, r);
            skew[(i, j)] = C64::new(0.0, h);
            skew[(j, i)] = C64::new(0.0, -h);
            basis.push(skew);
        }
    }
    basis
}

/// Nonzero Hermitian `Z` (unit Frobenius norm) with `tr(M Z) = 0` for every
/// `M` in `ms`, or `None` when the homogeneous system only has the trivial
/// solution numerically.
pub fn herm_nullspace_direction(ms: &[HermitianMatrix], r: usize) -> Option<HermitianMatrix> {
    if r == 0 {
        return None;
    }
    let basis = hermitian_basis(r);
    let dim = basis.len();
    let basis_h: Vec<HermitianMatrix> = basis.into_iter().map(HermitianMatrix).collect();
    // Pad to at least square so the SVD returns a complete right basis.
    let rows = ms.len().max(dim);
    let mut a = DMatrix::<f64>::zeros(rows, dim);
    for (k, m) in ms.iter().enumerate() {
        debug_assert_eq!(m.dim(), r);
        let norm = m.frobenius_norm();
        if norm == 0.0 {
            continue;
        }
        for (p, b) in basis_h.iter().enumerate() {
            a[(k, p)] = m.inner(b) / norm;
        }
    }
    let svd = SVD::new(a, false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sv = &svd.singular_values;
    let (idx_min, &s_min) = sv
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty spectrum");
    let s_max = sv.iter().cloned().fold(0.0, f64::max);
    // All-zero constraint rows leave every direction free.
    if s_max > 0.0 && s_min > NULLSPACE_TOL * s_max {
        return None;
    }
    let coeffs = v_t.row(idx_min);
    let mut z = CMatrix::zeros(r, r);
    for (p, b) in basis_h.iter().enumerate() {
        z += b.as_matrix() * C64::new(coeffs[p], 0.0);
    }
    Some(HermitianMatrix::symmetrize(z))
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`.
pub fn real_embed(h: &HermitianMatrix) -> DMatrix<f64> {
    let n = h.dim();
    let m = h.as_matrix();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        let e = m[(ii, jj)];
        match (bi, bj) {
            (0, 0) | (1, 1) => e.re,
            (0, 1) => -e.im,
            _ => e.im,
        }
    })
}

/// Inverse of [`real_embed`] on embedded matrices; for a general symmetric
/// `x` it returns the Hermitian matrix whose embedding is the orthogonal
/// projection of `x` onto embedded matrices.
pub fn real_compress(x: &DMatrix<f64>) -> HermitianMatrix {
    let n = x.nrows() / 2;
    let m = CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(n + i, n + j)]);
        let im = 0.5 * (x[(n + i, j)] - x[(i, n + j)]);
        C64::new(re, im)
    });
    HermitianMatrix::symmetrize(m)
}
