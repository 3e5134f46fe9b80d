//! Finite-dimensional von Neumann algebras: commutants, bicommutants,
//! centers and Wedderburn block structure.
//!
//! An algebra is stored as an orthonormal basis for the Hilbert-Schmidt inner
//! product `tr(A^dagger B)`, together with the `n^2 x d` frame whose columns
//! are the column-major vectorizations of the basis elements. Membership is
//! tested by projecting onto that frame.
//!
//! Commutants are nullspaces of the stacked maps `X -> GX - XG` and
//! `X -> G^dagger X - X G^dagger`. They are computed by intersecting one
//! generator at a time, starting with a generic linear combination of all
//! generators, which already cuts the space down to (generically) the final
//! answer; the remaining per-generator steps then operate on small matrices.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrixlab::{
    hermitian_eig, integral_dimension, kron, null_space, partial_trace, range_space,
    spectral_clusters, CMatrix, HermitianMatrix, TolerancePolicy, TracedFactor, C64,
};
use crate::sampling::complex_normal;

const SPLIT_ATTEMPTS: usize = 10;
// Seed for the generic combinations used internally by the pure operations
// (commutant pre-reduction, closure probing). Results do not depend on it.
const INTERNAL_SEED: u64 = 0x00A7_0E1C;

/// `*`-closed, unital, multiplicatively closed subspace of `M_n`.
#[derive(Clone, Debug)]
pub struct VNAlgebra {
    dim: usize,
    basis: Vec<CMatrix>,
    frame: DMatrix<C64>,
    contains_identity: bool,
}

/// Worst residual of each structural property of a [`VNAlgebra`].
#[derive(Clone, Debug, Serialize)]
pub struct AlgebraCheck {
    pub orthonormality: f64,
    pub star_closure: f64,
    pub product_closure: f64,
    pub identity: f64,
}

impl AlgebraCheck {
    pub fn passes(&self, tol: &TolerancePolicy) -> bool {
        self.orthonormality <= tol.eps_eq
            && self.star_closure <= tol.eps_eq
            && self.product_closure <= tol.eps_eq
            && self.identity <= tol.eps_eq
    }
}

impl VNAlgebra {
    /// Builds from an orthonormal frame; callers guarantee the algebra properties.
    fn from_frame(dim: usize, frame: DMatrix<C64>) -> Self {
        let basis: Vec<CMatrix> = (0..frame.ncols())
            .map(|j| CMatrix::unvectorize(dim, dim, frame.column(j).as_slice()))
            .collect();
        let mut alg = Self {
            dim,
            basis,
            frame,
            contains_identity: false,
        };
        let id = CMatrix::identity(dim);
        alg.contains_identity = alg.residual(&id) <= 1e-9 * (1.0 + id.norm_hs());
        alg
    }

    /// All of `M_n`, with the matrix units as basis.
    pub fn full(dim: usize) -> Self {
        Self::from_frame(dim, DMatrix::identity(dim * dim, dim * dim))
    }

    /// `C I_n`.
    pub fn scalars(dim: usize) -> Self {
        let id = CMatrix::identity(dim).scale_real(1.0 / (dim as f64).sqrt());
        Self::from_frame(dim, DMatrix::from_column_slice(dim * dim, 1, id.vectorize().as_slice()))
    }

    /// Orthonormalizes the span of `mats` and checks the algebra axioms.
    pub fn from_spanning_set(dim: usize, mats: &[CMatrix], tol: &TolerancePolicy) -> Result<Self> {
        check_square(dim, mats)?;
        let raw = DMatrix::from_fn(dim * dim, mats.len(), |i, j| mats[j].as_dmatrix().as_slice()[i]);
        let alg = Self::from_frame(dim, range_space(&raw, tol)?);
        alg.require_valid(tol)?;
        Ok(alg)
    }

    /// Takes `basis` as given and checks orthonormality and the algebra axioms.
    pub fn from_basis(dim: usize, basis: Vec<CMatrix>, tol: &TolerancePolicy) -> Result<Self> {
        check_square(dim, &basis)?;
        let frame = DMatrix::from_fn(dim * dim, basis.len(), |i, j| basis[j].as_dmatrix().as_slice()[i]);
        let alg = Self::from_frame(dim, frame);
        alg.require_valid(tol)?;
        Ok(alg)
    }

    fn require_valid(&self, tol: &TolerancePolicy) -> Result<()> {
        let c = self.check_invariants();
        if !c.passes(tol) {
            return Err(Error::InvalidAlgebra(format!(
                "orthonormality {:e}, star {:e}, product {:e}, identity {:e}",
                c.orthonormality, c.star_closure, c.product_closure, c.identity
            )));
        }
        Ok(())
    }

    /// Ambient Hilbert dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the algebra as a vector space.
    pub fn algebra_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn contains_identity(&self) -> bool {
        self.contains_identity
    }

    /// Hilbert-Schmidt orthogonal projection onto the algebra.
    pub fn project(&self, x: &CMatrix) -> CMatrix {
        let v = x.vectorize();
        let coeffs = self.frame.ad_mul(&v);
        let p = &self.frame * coeffs;
        CMatrix::unvectorize(self.dim, self.dim, p.as_slice())
    }

    /// `||X - P(X)||_HS`.
    pub fn residual(&self, x: &CMatrix) -> f64 {
        (x - &self.project(x)).norm_hs()
    }

    /// Membership at `eps_eq (1 + ||X||_HS)`.
    pub fn contains(&self, x: &CMatrix, tol: &TolerancePolicy) -> bool {
        self.residual(x) <= tol.eps_eq * (1.0 + x.norm_hs())
    }

    /// Random element `sum_j c_j B_j` with complex Gaussian coefficients.
    pub fn generic_element<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let coeffs = nalgebra::DVector::from_fn(self.basis.len(), |_, _| complex_normal(rng));
        let v = &self.frame * coeffs;
        CMatrix::unvectorize(self.dim, self.dim, v.as_slice())
    }

    /// Random Hermitian element; lies in the algebra because it is `*`-closed.
    pub fn generic_hermitian<R: Rng + ?Sized>(&self, rng: &mut R) -> HermitianMatrix {
        HermitianMatrix::symmetrize(self.generic_element(rng))
    }

    /// Residuals of orthonormality, `*`-closure, product closure and unitality.
    /// Product closure is probed on generic pairs (and on all basis pairs for
    /// small algebras): a bilinear map vanishing on generic pairs vanishes.
    pub fn check_invariants(&self) -> AlgebraCheck {
        let d = self.basis.len();
        let gram = self.frame.ad_mul(&self.frame);
        let orthonormality = (gram - DMatrix::<C64>::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let star_closure = self
            .basis
            .iter()
            .map(|b| self.residual(&b.adjoint()))
            .fold(0.0, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(INTERNAL_SEED);
        let mut product_closure = 0.0_f64;
        if d > 0 {
            for _ in 0..3 {
                let x = self.generic_element(&mut rng);
                let y = self.generic_element(&mut rng);
                let xy = &x * &y;
                product_closure = product_closure.max(self.residual(&xy) / (1.0 + xy.norm_hs()));
            }
            if d <= 16 {
                for a in &self.basis {
                    for b in &self.basis {
                        product_closure = product_closure.max(self.residual(&(a * b)));
                    }
                }
            }
        }
        let id = CMatrix::identity(self.dim);
        let identity = self.residual(&id) / (1.0 + id.norm_hs());
        AlgebraCheck {
            orthonormality,
            star_closure,
            product_closure,
            identity,
        }
    }

    /// Largest principal angle residual between the two subspaces, measured as
    /// the worst projection residual of either basis onto the other algebra.
    pub fn mutual_residual(&self, other: &VNAlgebra) -> f64 {
        let a = self.basis.iter().map(|b| other.residual(b)).fold(0.0, f64::max);
        let b = other.basis.iter().map(|b| self.residual(b)).fold(0.0, f64::max);
        a.max(b)
    }

    /// The compression `W^dagger A W` for an isometry `W` (n x r) whose range
    /// reduces the algebra.
    fn compress(&self, w: &CMatrix, tol: &TolerancePolicy) -> Result<VNAlgebra> {
        let r = w.cols();
        let wd = w.adjoint();
        let mats: Vec<CMatrix> = self.basis.iter().map(|b| &(&wd * b) * w).collect();
        let raw = DMatrix::from_fn(r * r, mats.len(), |i, j| mats[j].as_dmatrix().as_slice()[i]);
        Ok(Self::from_frame(r, range_space(&raw, tol)?))
    }
}

fn check_square(dim: usize, mats: &[CMatrix]) -> Result<()> {
    if let Some(m) = mats.iter().find(|m| m.rows() != dim || m.cols() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "generator of size {}x{} on dimension {dim}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// Orthonormal columns spanning `{X in span(start) : [X,G] = [X,G^dagger] = 0}`.
fn restrict_to_commutant(
    dim: usize,
    start: DMatrix<C64>,
    gens: &[CMatrix],
    tol: &TolerancePolicy,
) -> Result<DMatrix<C64>> {
    let mut n = start;
    let mut rng = ChaCha8Rng::seed_from_u64(INTERNAL_SEED);
    let mut sequence: Vec<CMatrix> = Vec::with_capacity(gens.len() + 1);
    if gens.len() > 1 {
        let mut g = CMatrix::zeros(dim, dim);
        for x in gens {
            g = &g + &x.scale(complex_normal(&mut rng));
        }
        sequence.push(g);
    }
    sequence.extend(gens.iter().cloned());

    for g in &sequence {
        let scale = g.norm_hs();
        if n.ncols() == 0 {
            break;
        }
        if scale == 0.0 {
            continue;
        }
        let gd = g.adjoint();
        let hermitian = (g - &gd).norm_max() == 0.0;
        let blocks = if hermitian { 1 } else { 2 };
        let k = n.ncols();
        let nn = dim * dim;
        let mut m = DMatrix::<C64>::zeros(blocks * nn, k);
        for j in 0..k {
            let x = CMatrix::unvectorize(dim, dim, n.column(j).as_slice());
            let c1 = g.commutator(&x);
            m.view_mut((0, j), (nn, 1)).copy_from_slice(c1.as_dmatrix().as_slice());
            if !hermitian {
                let c2 = gd.commutator(&x);
                m.view_mut((nn, j), (nn, 1)).copy_from_slice(c2.as_dmatrix().as_slice());
            }
        }
        let c = null_space(&m, Some(scale), tol)?;
        n = &n * c;
    }
    Ok(n)
}

/// `{X : XG = GX and XG^dagger = G^dagger X for every generator G}`.
pub fn commutant(dim: usize, generators: &[CMatrix], tol: &TolerancePolicy) -> Result<VNAlgebra> {
    check_square(dim, generators)?;
    let frame = restrict_to_commutant(dim, DMatrix::identity(dim * dim, dim * dim), generators, tol)?;
    Ok(VNAlgebra::from_frame(dim, frame))
}

/// Von Neumann algebra generated by `generators`, as their double commutant.
pub fn generated_algebra(
    dim: usize,
    generators: &[CMatrix],
    tol: &TolerancePolicy,
) -> Result<VNAlgebra> {
    let first = commutant(dim, generators, tol)?;
    let alg = commutant(dim, first.basis(), tol)?;
    if let Some(g) = generators.iter().find(|g| !alg.contains(g, tol)) {
        return Err(Error::Consistency(format!(
            "generated algebra misses a generator (residual {:e})",
            alg.residual(g)
        )));
    }
    Ok(alg)
}

/// `alg` intersected with its commutant.
pub fn center(alg: &VNAlgebra, tol: &TolerancePolicy) -> Result<VNAlgebra> {
    let frame = restrict_to_commutant(alg.dim, alg.frame.clone(), &alg.basis, tol)?;
    Ok(VNAlgebra::from_frame(alg.dim, frame))
}

/// Central projection with an orthonormal basis of its range.
struct CentralPart {
    projection: HermitianMatrix,
    range: CMatrix,
}

fn projector(range: &CMatrix) -> HermitianMatrix {
    HermitianMatrix::symmetrize(range * &range.adjoint())
}

/// Splits `alg` by the spectral clusters of a generic Hermitian element,
/// retrying until the cluster count equals `expected` and every cluster has
/// size `cluster_size` (when given).
fn split_generic<R: Rng + ?Sized>(
    alg: &VNAlgebra,
    expected: usize,
    cluster_size: Option<usize>,
    tol: &TolerancePolicy,
    rng: &mut R,
    context: &str,
) -> Result<Vec<CMatrix>> {
    for _ in 0..SPLIT_ATTEMPTS {
        let h = alg.generic_hermitian(rng);
        let eig = hermitian_eig(&h)?;
        let scale = eig.values.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
        if scale == 0.0 {
            continue;
        }
        let normalized: Vec<f64> = eig.values.iter().map(|l| l / scale).collect();
        let clusters = spectral_clusters(&normalized, tol.cluster_gap);
        if clusters.len() != expected {
            continue;
        }
        if let Some(m) = cluster_size {
            if clusters.iter().any(|(s, e)| e - s != m) {
                continue;
            }
        }
        return Ok(clusters.iter().map(|&(s, e)| eig.columns(s, e)).collect());
    }
    Err(Error::RetriesExhausted {
        attempts: SPLIT_ATTEMPTS,
        context: context.to_string(),
    })
}

fn central_parts<R: Rng + ?Sized>(
    alg: &VNAlgebra,
    tol: &TolerancePolicy,
    rng: &mut R,
) -> Result<(VNAlgebra, Vec<CentralPart>)> {
    let z = center(alg, tol)?;
    let k = z.algebra_dim();
    if k == 0 {
        return Err(Error::InvalidAlgebra("center is trivial; algebra is not unital".into()));
    }
    let ranges = if k == 1 {
        vec![CMatrix::identity(alg.dim)]
    } else {
        split_generic(&z, k, None, tol, rng, "central spectral splitting")?
    };
    let parts: Vec<CentralPart> = ranges
        .into_iter()
        .map(|range| CentralPart {
            projection: projector(&range),
            range,
        })
        .collect();
    for p in &parts {
        if !z.contains(&p.projection, tol) {
            return Err(Error::Consistency(format!(
                "spectral projection left the center (residual {:e})",
                z.residual(&p.projection)
            )));
        }
    }
    Ok((z, parts))
}

/// Minimal projections of the center; they are orthogonal and sum to `I`.
pub fn minimal_central_projections<R: Rng + ?Sized>(
    alg: &VNAlgebra,
    tol: &TolerancePolicy,
    rng: &mut R,
) -> Result<Vec<HermitianMatrix>> {
    Ok(central_parts(alg, tol, rng)?
        .1
        .into_iter()
        .map(|p| p.projection)
        .collect())
}

/// One simple summand: on `range(z_k)` the algebra acts as `M_{n_k} (x) I_{m_k}`.
#[derive(Clone, Debug)]
pub struct WedderburnBlock {
    pub central_projection: HermitianMatrix,
    /// `n_k`.
    pub factor_dim: usize,
    /// `m_k`.
    pub multiplicity: usize,
    /// `(n_k m_k) x n` partial isometry with `U U^dagger = I` and
    /// `U^dagger U = z_k`, carrying the block onto `C^{n_k} (x) C^{m_k}`.
    pub isometry: CMatrix,
    /// `n_k` minimal projections of the algebra, each of rank `m_k`.
    pub minimal_projections: Vec<HermitianMatrix>,
}

impl WedderburnBlock {
    /// `U X U^dagger` on `C^{n_k} (x) C^{m_k}`.
    pub fn conjugate(&self, x: &CMatrix) -> CMatrix {
        &(&self.isometry * x) * &self.isometry.adjoint()
    }

    /// Writes `U X U^dagger ~ M (x) I` and returns `(M, ||U X U^dagger - M (x) I||_max)`.
    pub fn factor_component(&self, x: &CMatrix) -> (CMatrix, f64) {
        let (n, m) = (self.factor_dim, self.multiplicity);
        let y = self.conjugate(x);
        let comp = partial_trace(&y, (n, m), TracedFactor::Second)
            .expect("block shape")
            .scale_real(1.0 / m as f64);
        let res = (&y - &kron(&comp, &CMatrix::identity(m))).norm_max();
        (comp, res)
    }

    /// Writes `U X U^dagger ~ I (x) N` and returns `(N, residual)`.
    pub fn multiplicity_component(&self, x: &CMatrix) -> (CMatrix, f64) {
        let (n, m) = (self.factor_dim, self.multiplicity);
        let y = self.conjugate(x);
        let comp = partial_trace(&y, (n, m), TracedFactor::First)
            .expect("block shape")
            .scale_real(1.0 / n as f64);
        let res = (&y - &kron(&CMatrix::identity(n), &comp)).norm_max();
        (comp, res)
    }
}

/// Block decomposition `A ~ (+)_k M_{n_k} (x) I_{m_k}`.
#[derive(Clone, Debug)]
pub struct WedderburnData {
    pub dim: usize,
    pub blocks: Vec<WedderburnBlock>,
    pub algebra_dim: usize,
    pub commutant_dim: usize,
    pub center_dim: usize,
}

/// `(n_k, m_k)` pair as reported in JSON.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct BlockShape {
    pub n: usize,
    pub m: usize,
}

/// `{"blocks":[{"n":2,"m":3}],"algebra_dim":4,"commutant_dim":9,"center_dim":1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AlgebraSummary {
    pub blocks: Vec<BlockShape>,
    pub algebra_dim: usize,
    pub commutant_dim: usize,
    pub center_dim: usize,
}

impl WedderburnData {
    /// Sorted `(n_k, m_k)` multiset.
    pub fn block_profile(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self.blocks.iter().map(|b| (b.factor_dim, b.multiplicity)).collect();
        v.sort_unstable();
        v
    }

    pub fn summary(&self) -> AlgebraSummary {
        AlgebraSummary {
            blocks: self
                .block_profile()
                .into_iter()
                .map(|(n, m)| BlockShape { n, m })
                .collect(),
            algebra_dim: self.algebra_dim,
            commutant_dim: self.commutant_dim,
            center_dim: self.center_dim,
        }
    }
}

/// Matrix units inside one central summand. `alg_k` is the compression of the
/// algebra to the summand (acting on `C^r`, `r = n_k m_k`). Returns a unitary
/// `T` (r x r) whose columns, ordered `(i, j) -> i m + j`, satisfy
/// `T^dagger a T = M (x) I_m` for `a` in `alg_k`, plus the isometries onto the
/// ranges of the minimal projections.
fn block_frame<R: Rng + ?Sized>(
    alg_k: &VNAlgebra,
    n: usize,
    m: usize,
    tol: &TolerancePolicy,
    rng: &mut R,
) -> Result<(CMatrix, Vec<CMatrix>)> {
    let r = n * m;
    if n == 1 {
        return Ok((CMatrix::identity(r), vec![CMatrix::identity(r)]));
    }
    let ys = split_generic(alg_k, n, Some(m), tol, rng, "minimal projection splitting")?;
    for _ in 0..SPLIT_ATTEMPTS {
        let g = alg_k.generic_element(rng);
        let g_scale = g.norm_hs();
        let mut cols: Vec<CMatrix> = vec![ys[0].clone()];
        let mut ok = true;
        for y in &ys[1..] {
            // p_i G p_1 in the bases of range(p_i), range(p_1): a multiple of a unitary.
            let x = &(&y.adjoint() * &g) * &ys[0];
            let xtx = HermitianMatrix::symmetrize(&x.adjoint() * &x);
            let eig = hermitian_eig(&xtx)?;
            if eig.values[0] <= (1e-6 * g_scale).powi(2) {
                ok = false;
                break;
            }
            let inv_sqrt = eig.map_spectrum(|l| 1.0 / l.sqrt());
            let v = &x * inv_sqrt.as_matrix();
            cols.push(y * &v);
        }
        if !ok {
            continue;
        }
        let mut data = DMatrix::<C64>::zeros(r, r);
        for (i, c) in cols.iter().enumerate() {
            data.view_mut((0, i * m), (r, m)).copy_from(c.as_dmatrix());
        }
        return Ok((CMatrix::wrap(data), ys));
    }
    Err(Error::RetriesExhausted {
        attempts: SPLIT_ATTEMPTS,
        context: "matrix unit construction".into(),
    })
}

/// Wedderburn decomposition of a unital algebra.
pub fn wedderburn<R: Rng + ?Sized>(
    alg: &VNAlgebra,
    tol: &TolerancePolicy,
    rng: &mut R,
) -> Result<WedderburnData> {
    if !alg.contains_identity() {
        return Err(Error::InvalidAlgebra("algebra does not contain the identity".into()));
    }
    let n_total = alg.dim();
    let (z, parts) = central_parts(alg, tol, rng)?;
    let mut blocks = Vec::with_capacity(parts.len());
    for part in parts {
        let r = part.range.cols();
        let alg_k = alg.compress(&part.range, tol)?;
        let dk = alg_k.algebra_dim();
        let n = integral_dimension((dk as f64).sqrt(), "block factor dimension")?;
        if n * n != dk || n == 0 || r % n != 0 {
            return Err(Error::FactorizationResidual {
                residual: f64::INFINITY,
                threshold: tol.factor_residual,
            });
        }
        let m = r / n;
        let (t, ys) = block_frame(&alg_k, n, m, tol, rng)?;
        let isometry = &t.adjoint() * &part.range.adjoint();
        let minimal_projections = ys
            .iter()
            .map(|y| projector(&(&part.range * y)))
            .collect();
        let block = WedderburnBlock {
            central_projection: part.projection,
            factor_dim: n,
            multiplicity: m,
            isometry,
            minimal_projections,
        };
        let residual = alg
            .basis()
            .iter()
            .map(|b| block.factor_component(b).1)
            .fold(0.0, f64::max);
        if residual > tol.factor_residual {
            return Err(Error::FactorizationResidual {
                residual,
                threshold: tol.factor_residual,
            });
        }
        blocks.push(block);
    }
    let commutant_dim = commutant(n_total, alg.basis(), tol)?.algebra_dim();
    let data = WedderburnData {
        dim: n_total,
        blocks,
        algebra_dim: alg.algebra_dim(),
        commutant_dim,
        center_dim: z.algebra_dim(),
    };
    let sum_n2: usize = data.blocks.iter().map(|b| b.factor_dim * b.factor_dim).sum();
    let sum_m2: usize = data.blocks.iter().map(|b| b.multiplicity * b.multiplicity).sum();
    let sum_nm: usize = data.blocks.iter().map(|b| b.factor_dim * b.multiplicity).sum();
    if sum_n2 != data.algebra_dim || sum_m2 != commutant_dim || sum_nm != n_total {
        return Err(Error::Consistency(format!(
            "dimension accounting failed: sum n^2 = {sum_n2} vs {}, sum m^2 = {sum_m2} vs {commutant_dim}, sum nm = {sum_nm} vs {n_total}",
            data.algebra_dim
        )));
    }
    Ok(data)
}

/// Minimal projections of the algebra summing to the identity: `n_k` of rank
/// `m_k` for each block.
pub fn minimal_projection_resolution<R: Rng + ?Sized>(
    alg: &VNAlgebra,
    tol: &TolerancePolicy,
    rng: &mut R,
) -> Result<Vec<HermitianMatrix>> {
    let w = wedderburn(alg, tol, rng)?;
    let projections: Vec<HermitianMatrix> = w
        .blocks
        .into_iter()
        .flat_map(|b| b.minimal_projections)
        .collect();
    let n = alg.dim();
    for p in &projections {
        let mats: Vec<CMatrix> = alg.basis().iter().map(|b| &(p.as_matrix() * b) * p.as_matrix()).collect();
        let raw = DMatrix::from_fn(n * n, mats.len(), |i, j| mats[j].as_dmatrix().as_slice()[i]);
        let rank = range_space(&raw, tol)?.ncols();
        if rank != 1 {
            return Err(Error::Consistency(format!("projection is not minimal: pAp has dimension {rank}")));
        }
    }
    Ok(projections)
}
