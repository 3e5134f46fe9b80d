//! Dense complex matrix kernel.
//!
//! Everything downstream (commutants, conditional expectations, steering
//! assemblages, tensor factorizations) is written against the handful of
//! primitives in this module: Hermitian eigendecomposition, PSD square roots,
//! SVD-based nullspaces, Kronecker products, partial traces and the trace
//! pairing `<mu, T> = tr(mu T)`. Numerical thresholds are centralized in
//! [`TolerancePolicy`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

const EIG_MAX_ITER: usize = 10_000;

/// Numerical thresholds shared by every check in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    /// Relative equality threshold.
    pub eps_eq: f64,
    /// Singular-value cutoff factor; multiplied by `sigma_max * max(rows, cols)`.
    pub eps_rank: f64,
    /// Eigenvalue clamp threshold for positive semidefiniteness.
    pub eps_psd: f64,
    /// Hermiticity threshold applied before symmetrization.
    pub eps_herm: f64,
    /// Minimum eigenvalue gap separating spectral clusters.
    pub cluster_gap: f64,
    /// Maximum residual of a block factorization or component extraction.
    pub factor_residual: f64,
    /// Behavior reproduction threshold for tensor-product models.
    pub tensor_residual: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            eps_eq: 1e-9,
            eps_rank: 1e-11,
            eps_psd: 1e-9,
            eps_herm: 1e-9,
            cluster_gap: 1e-6,
            factor_residual: 1e-8,
            tensor_residual: 1e-8,
        }
    }
}

impl TolerancePolicy {
    /// Default policy with every threshold multiplied by `factor`.
    pub fn scaled(factor: f64) -> Result<Self> {
        let d = Self::default();
        let p = Self {
            eps_eq: d.eps_eq * factor,
            eps_rank: d.eps_rank * factor,
            eps_psd: d.eps_psd * factor,
            eps_herm: d.eps_herm * factor,
            cluster_gap: d.cluster_gap * factor,
            factor_residual: d.factor_residual * factor,
            tensor_residual: d.tensor_residual * factor,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        let all = [
            ("eps_eq", self.eps_eq),
            ("eps_rank", self.eps_rank),
            ("eps_psd", self.eps_psd),
            ("eps_herm", self.eps_herm),
            ("cluster_gap", self.cluster_gap),
            ("factor_residual", self.factor_residual),
            ("tensor_residual", self.tensor_residual),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v < 1e-3) {
                return Err(Error::InvalidTolerance(format!(
                    "{name} = {v:e} must lie in (0, 1e-3)"
                )));
            }
        }
        Ok(())
    }
}

/// Dense complex matrix with finite entries.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct CMatrix(DMatrix<C64>);

/// JSON shape `{"rows":n,"cols":m,"data":[[re,im],...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl TryFrom<MatrixRepr> for CMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let data = r.data.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        CMatrix::from_row_major(r.rows, r.cols, data)
    }
}

impl From<CMatrix> for MatrixRepr {
    fn from(m: CMatrix) -> Self {
        MatrixRepr {
            rows: m.rows(),
            cols: m.cols(),
            data: m.row_major().into_iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CMatrix {}x{} ", self.rows(), self.cols())?;
        f.debug_list()
            .entries((0..self.rows()).map(|i| {
                (0..self.cols())
                    .map(|j| {
                        let z = self.0[(i, j)];
                        (z.re, z.im)
                    })
                    .collect::<Vec<_>>()
            }))
            .finish()
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &data))
    }

    /// Real row-major data; convenient for hand-written fixtures.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_row_major(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_fn(diag.len(), diag.len(), |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_dmatrix(m: DMatrix<C64>) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(format!("{}x{} matrix", m.nrows(), m.ncols())));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix computed from finite inputs.
    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        debug_assert!(m.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        Self(m)
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self(&self.0 * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        Self(&self.0 * C64::new(c, 0.0))
    }

    /// Largest entry modulus.
    pub fn norm_max(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Hilbert-Schmidt (Frobenius) norm.
    pub fn norm_hs(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hilbert-Schmidt inner product `tr(self^dagger other)`.
    pub fn hs_inner(&self, other: &CMatrix) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    pub fn try_mul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols() != other.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(Self(&self.0 * &other.0))
    }

    /// Column-major vectorization, `vec(A X B) = (B^T kron A) vec(X)`.
    pub fn vectorize(&self) -> DVector<C64> {
        DVector::from_column_slice(self.0.as_slice())
    }

    pub fn unvectorize(rows: usize, cols: usize, v: &[C64]) -> CMatrix {
        Self::wrap(DMatrix::from_column_slice(rows, cols, v))
    }

    pub fn sub_block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CMatrix {
        Self(self.0.view((r0, c0), (rows, cols)).into_owned())
    }
}

impl<'a> Add<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 - &rhs.0)
    }
}

impl<'a> Mul<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 * &rhs.0)
    }
}

impl Add for CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: CMatrix) -> CMatrix {
        CMatrix(self.0 + rhs.0)
    }
}

impl Sub for CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: CMatrix) -> CMatrix {
        CMatrix(self.0 - rhs.0)
    }
}

impl Mul for CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: CMatrix) -> CMatrix {
        CMatrix(self.0 * rhs.0)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

/// Square matrix equal to its adjoint. The stored form is exactly symmetric.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(into = "CMatrix")]
pub struct HermitianMatrix(CMatrix);

impl From<HermitianMatrix> for CMatrix {
    fn from(h: HermitianMatrix) -> CMatrix {
        h.0
    }
}

impl HermitianMatrix {
    /// Checks `||M - M^dagger||_max <= eps_herm (1 + ||M||_max)` and symmetrizes.
    pub fn new(m: CMatrix, tol: &TolerancePolicy) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let asymmetry = (&m - &m.adjoint()).norm_max();
        let threshold = tol.eps_herm * (1.0 + m.norm_max());
        if asymmetry > threshold {
            return Err(Error::NotHermitian {
                asymmetry,
                threshold,
            });
        }
        Ok(Self::symmetrize(m))
    }

    /// `(M + M^dagger) / 2` without a tolerance check. Panics on non-square input.
    pub fn symmetrize(m: CMatrix) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let n = m.rows();
        let a = m.as_dmatrix();
        let half = C64::new(0.5, 0.0);
        let s = DMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * half);
        Self(CMatrix::wrap(s))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self(CMatrix::from_real_diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace_real(&self) -> f64 {
        self.0.trace().re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eig(self)?.values.first().copied().unwrap_or(0.0))
    }
}

impl std::ops::Deref for HermitianMatrix {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

/// Spectral decomposition `M = V diag(values) V^dagger`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Reassemble `V diag(f(values)) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let v = self.vectors.as_dmatrix();
        let mut scaled = v.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(lam));
        }
        HermitianMatrix::symmetrize(CMatrix::wrap(scaled * v.adjoint()))
    }

    /// Columns of `V` for the index range `[start, end)`.
    pub fn columns(&self, start: usize, end: usize) -> CMatrix {
        self.vectors.sub_block(0, start, self.vectors.rows(), end - start)
    }
}

pub fn hermitian_eig(m: &HermitianMatrix) -> Result<HermitianEigen> {
    let n = m.dim();
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let eig = nalgebra::SymmetricEigen::try_new(m.as_dmatrix().clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::NonConvergence { dim: n })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEigen {
        values,
        vectors: CMatrix::wrap(vectors),
    })
}

/// Principal square root of a PSD matrix. Eigenvalues in
/// `[-eps_psd ||M||, 0)` are clamped to zero.
pub fn psd_sqrt(m: &HermitianMatrix, tol: &TolerancePolicy) -> Result<HermitianMatrix> {
    let eig = hermitian_eig(m)?;
    let scale = eig.values.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
    let threshold = -tol.eps_psd * scale.max(1.0);
    if let Some(&min) = eig.values.first() {
        if min < threshold {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
                threshold,
            });
        }
    }
    Ok(eig.map_spectrum(|l| l.max(0.0).sqrt()))
}

/// Orthonormal basis of `{v : L v = 0}`, returned as column vectors.
pub fn nullspace_basis(l: &CMatrix, tol: &TolerancePolicy) -> Result<Vec<CMatrix>> {
    let n = null_space(l.as_dmatrix(), None, tol)?;
    Ok((0..n.ncols())
        .map(|j| CMatrix::wrap(DMatrix::from_column_slice(n.nrows(), 1, n.column(j).as_slice())))
        .collect())
}

/// Orthonormal nullspace as the columns of a matrix.
///
/// Singular values at or below `eps_rank * max(sigma_max, floor) * max(rows, cols)`
/// count as zero. `floor` lets callers supply an a-priori operator scale so
/// that a matrix which is zero up to rounding is treated as zero.
pub(crate) fn null_space(
    l: &DMatrix<C64>,
    floor: Option<f64>,
    tol: &TolerancePolicy,
) -> Result<DMatrix<C64>> {
    let (rows, cols) = l.shape();
    if cols == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if rows == 0 {
        return Ok(DMatrix::identity(cols, cols));
    }
    let (sv, _, v) = svd(l, false)?;
    let sigma_max = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let scale = sigma_max.max(floor.unwrap_or(0.0));
    let cutoff = tol.eps_rank * scale * rows.max(cols) as f64;
    let null: Vec<usize> = (0..cols)
        .filter(|&k| sv.get(k).is_none_or(|&s| s <= cutoff))
        .collect();
    let v = v.expect("requested V");
    let mut out = DMatrix::zeros(cols, null.len());
    for (j, &k) in null.iter().enumerate() {
        out.set_column(j, &v.column(k));
    }
    Ok(out)
}

/// Orthonormal basis (as columns) of the column span of `m`.
pub(crate) fn range_space(m: &DMatrix<C64>, tol: &TolerancePolicy) -> Result<DMatrix<C64>> {
    let (rows, cols) = m.shape();
    if cols == 0 || rows == 0 {
        return Ok(DMatrix::zeros(rows, 0));
    }
    let (sv, u, _) = svd(m, true)?;
    let sigma_max = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let cutoff = tol.eps_rank * sigma_max * rows.max(cols) as f64;
    let keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > cutoff).collect();
    let u = u.expect("requested U");
    let mut out = DMatrix::zeros(rows, keep.len());
    for (j, &k) in keep.iter().enumerate() {
        out.set_column(j, &u.column(k));
    }
    Ok(out)
}

/// Singular values plus either the thin left factor or a full right factor.
fn svd(m: &DMatrix<C64>, want_u: bool) -> Result<(Vec<f64>, Option<DMatrix<C64>>, Option<DMatrix<C64>>)> {
    let (rows, cols) = m.shape();
    let a = faer::Mat::<faer::c64>::from_fn(rows, cols, |i, j| {
        let z = m[(i, j)];
        faer::c64::new(z.re, z.im)
    });
    let fail = |_| Error::NonConvergence { dim: rows.max(cols) };
    let dec = if want_u || rows >= cols { a.thin_svd().map_err(fail)? } else { a.svd().map_err(fail)? };
    let sv: Vec<f64> = (0..rows.min(cols)).map(|k| dec.S()[k].re).collect();
    let conv = |x: faer::MatRef<'_, faer::c64>| {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            let z = x[(i, j)];
            C64::new(z.re, z.im)
        })
    };
    let u = want_u.then(|| conv(dec.U()));
    let v = (!want_u).then(|| conv(dec.V()));
    Ok((sv, u, v))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    CMatrix(a.0.kronecker(&b.0))
}

/// Which tensor factor a partial trace removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TracedFactor {
    First,
    Second,
}

/// Partial trace over one factor of `C^d1 (x) C^d2`.
pub fn partial_trace(m: &CMatrix, dims: (usize, usize), traced: TracedFactor) -> Result<CMatrix> {
    let (d1, d2) = dims;
    if !m.is_square() || m.rows() != d1 * d2 {
        return Err(Error::DimensionMismatch(format!(
            "partial trace over ({d1},{d2}) needs a {0}x{0} matrix, got {1}x{2}",
            d1 * d2,
            m.rows(),
            m.cols()
        )));
    }
    let a = m.as_dmatrix();
    let out = match traced {
        TracedFactor::Second => DMatrix::from_fn(d1, d1, |i, j| {
            (0..d2).map(|k| a[(i * d2 + k, j * d2 + k)]).sum()
        }),
        TracedFactor::First => DMatrix::from_fn(d2, d2, |i, j| {
            (0..d1).map(|k| a[(k * d2 + i, k * d2 + j)]).sum()
        }),
    };
    Ok(CMatrix(out))
}

/// `<mu, T> = tr(mu T)`.
pub fn trace_pairing(mu: &CMatrix, t: &CMatrix) -> Result<C64> {
    if mu.cols() != t.rows() || mu.rows() != t.cols() {
        return Err(Error::DimensionMismatch(format!(
            "trace pairing of {}x{} with {}x{}",
            mu.rows(),
            mu.cols(),
            t.rows(),
            t.cols()
        )));
    }
    let (a, b) = (mu.as_dmatrix(), t.as_dmatrix());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..mu.rows() {
        for j in 0..mu.cols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(acc)
}

/// Eigenvalue clusters of a sorted spectrum: maximal runs whose consecutive
/// gaps do not exceed `gap`. Returns half-open index ranges.
pub(crate) fn spectral_clusters(values: &[f64], gap: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > gap {
            if k > start {
                out.push((start, k));
            }
            start = k;
        }
    }
    out
}

/// Rounds a computed dimension, refusing values farther than 0.1 from an integer.
pub fn integral_dimension(value: f64, what: &str) -> Result<usize> {
    let r = value.round();
    if (value - r).abs() > 0.1 || r < 0.0 {
        return Err(Error::NonIntegralDimension {
            what: what.to_string(),
            value,
        });
    }
    Ok(r as usize)
}
