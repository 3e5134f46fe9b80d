//! Trace-preserving conditional expectations onto finite-dimensional
//! von Neumann algebras.
//!
//! For a unital `*`-subalgebra `A` of `M_n`, the Hilbert-Schmidt orthogonal
//! projection `Phi(T) = sum_j B_j tr(B_j^dagger T)` onto `A` is the unique
//! trace-preserving conditional expectation. It is positive (indeed completely
//! positive), unital, idempotent, `A`-bimodular, and symmetric for the trace
//! pairing, so its predual `Phi*` is given by the same formula. Weak-star
//! continuity is automatic in finite dimension.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrixlab::{hermitian_eig, trace_pairing, CMatrix, HermitianMatrix, TolerancePolicy, C64};
use crate::sampling;
use crate::scenario::POVMFamily;
use crate::vnalg::VNAlgebra;

#[derive(Clone, Debug)]
pub struct ConditionalExpectation {
    target: VNAlgebra,
}

/// Builds the trace-preserving conditional expectation onto `alg`.
pub fn expectation_onto(alg: &VNAlgebra, tol: &TolerancePolicy) -> Result<ConditionalExpectation> {
    let c = alg.check_invariants();
    if !c.passes(tol) || !alg.contains_identity() {
        return Err(Error::InvalidAlgebra(format!(
            "target fails closure checks (orthonormality {:e}, star {:e}, product {:e}, identity {:e})",
            c.orthonormality, c.star_closure, c.product_closure, c.identity
        )));
    }
    let phi = ConditionalExpectation { target: alg.clone() };
    if cfg!(debug_assertions) {
        let min = phi.choi_min_eigenvalue()?;
        if min < -tol.eps_psd {
            return Err(Error::InvalidAlgebra(format!(
                "Choi matrix has eigenvalue {min:e}"
            )));
        }
    }
    Ok(phi)
}

impl ConditionalExpectation {
    pub fn target(&self) -> &VNAlgebra {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    fn check_dim(&self, t: &CMatrix) -> Result<()> {
        let n = self.dim();
        if t.rows() != n || t.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "conditional expectation on dimension {n} applied to {}x{}",
                t.rows(),
                t.cols()
            )));
        }
        Ok(())
    }

    /// `Phi(T)`.
    pub fn apply(&self, t: &CMatrix) -> Result<CMatrix> {
        self.check_dim(t)?;
        Ok(self.target.project(t))
    }

    /// `Phi*(mu)`, characterized by `tr(Phi*(mu) T) = tr(mu Phi(T))`. The
    /// projection is symmetric for the trace pairing, so this is the same map.
    pub fn predual_apply(&self, mu: &CMatrix) -> Result<CMatrix> {
        self.check_dim(mu)?;
        Ok(self.target.project(mu))
    }

    /// `Phi` on a Hermitian input, symmetrized.
    pub fn apply_hermitian(&self, t: &HermitianMatrix) -> Result<HermitianMatrix> {
        Ok(HermitianMatrix::symmetrize(self.apply(t.as_matrix())?))
    }

    pub fn predual_hermitian(&self, mu: &HermitianMatrix) -> Result<HermitianMatrix> {
        Ok(HermitianMatrix::symmetrize(self.predual_apply(mu.as_matrix())?))
    }

    /// `max_ij |tr(Phi*(mu) E_ij) - tr(mu Phi(E_ij))|` over the matrix units.
    pub fn predual_residual(&self, mu: &CMatrix) -> Result<f64> {
        let n = self.dim();
        let nu = self.predual_apply(mu)?;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let e = matrix_unit(n, i, j);
                let lhs = trace_pairing(&nu, &e)?;
                let rhs = trace_pairing(mu, &self.apply(&e)?)?;
                worst = worst.max((lhs - rhs).norm());
            }
        }
        Ok(worst)
    }

    /// `sum_ij E_ij (x) Phi(E_ij)`.
    pub fn choi_matrix(&self) -> HermitianMatrix {
        let n = self.dim();
        let mut c = nalgebra::DMatrix::<C64>::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                let img = self.target.project(&matrix_unit(n, i, j));
                c.view_mut((i * n, j * n), (n, n)).copy_from(img.as_dmatrix());
            }
        }
        HermitianMatrix::symmetrize(CMatrix::from_dmatrix(c).expect("finite"))
    }

    pub fn choi_min_eigenvalue(&self) -> Result<f64> {
        self.choi_matrix().min_eigenvalue()
    }

    /// Residuals of every defining property on seeded random inputs.
    pub fn check_invariants<R: Rng + ?Sized>(
        &self,
        positivity_samples: usize,
        rng: &mut R,
    ) -> Result<ExpectationReport> {
        let n = self.dim();
        let id = CMatrix::identity(n);
        let unitality = (&self.apply(&id)? - &id).norm_max();

        let mut idempotence = 0.0_f64;
        let mut trace_symmetry = 0.0_f64;
        let mut contraction = f64::NEG_INFINITY;
        let mut bimodule = 0.0_f64;
        for _ in 0..4 {
            let t = sampling::ginibre(n, n, rng);
            let mu = sampling::ginibre(n, n, rng);
            let pt = self.apply(&t)?;
            idempotence = idempotence.max((&self.apply(&pt)? - &pt).norm_max() / (1.0 + t.norm_max()));
            let lhs = trace_pairing(&self.apply(&mu)?, &t)?;
            let rhs = trace_pairing(&mu, &pt)?;
            trace_symmetry = trace_symmetry.max((lhs - rhs).norm() / (1.0 + t.norm_hs() * mu.norm_hs()));
            contraction = contraction.max(pt.norm_hs() - t.norm_hs());
            let a = self.target.generic_element(rng);
            let b = self.target.generic_element(rng);
            let left = self.apply(&(&(&a * &t) * &b))?;
            let right = &(&a * &pt) * &b;
            let scale = 1.0 + a.norm_hs() * t.norm_hs() * b.norm_hs();
            bimodule = bimodule.max((&left - &right).norm_max() / scale);
        }
        for j in 0..n * n {
            let e = matrix_unit(n, j / n, j % n);
            let pe = self.apply(&e)?;
            idempotence = idempotence.max((&self.apply(&pe)? - &pe).norm_max());
        }

        let mut positivity = f64::INFINITY;
        for _ in 0..positivity_samples {
            let rho = sampling::random_density(n, rng);
            let img = self.apply_hermitian(&rho)?;
            positivity = positivity.min(hermitian_eig(&img)?.values[0]);
        }
        Ok(ExpectationReport {
            idempotence,
            unitality,
            positivity_min_eigenvalue: positivity,
            choi_min_eigenvalue: self.choi_min_eigenvalue()?,
            bimodule,
            trace_symmetry,
            contraction: contraction.max(0.0),
        })
    }
}

fn matrix_unit(n: usize, i: usize, j: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |a, b| {
        if a == i && b == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Worst observed violation of each conditional-expectation property.
#[derive(Clone, Debug, Serialize)]
pub struct ExpectationReport {
    pub idempotence: f64,
    pub unitality: f64,
    /// Smallest eigenvalue of `Phi(rho)` over random states; should be `>= 0`.
    pub positivity_min_eigenvalue: f64,
    pub choi_min_eigenvalue: f64,
    pub bimodule: f64,
    pub trace_symmetry: f64,
    /// `max(0, ||Phi(T)||_HS - ||T||_HS)`.
    pub contraction: f64,
}

impl ExpectationReport {
    pub fn passes(&self, tol: &TolerancePolicy) -> bool {
        self.idempotence <= tol.eps_eq
            && self.unitality <= tol.eps_eq
            && self.positivity_min_eigenvalue >= -tol.eps_psd
            && self.choi_min_eigenvalue >= -tol.eps_psd
            && self.bimodule <= tol.eps_eq
            && self.trace_symmetry <= tol.eps_eq
            && self.contraction <= tol.eps_eq
    }
}

/// Outcome of checking `span(bob) <= range(Phi) <= comm(alice)`.
#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    /// `max ||F - Phi(F)||_HS` over Bob's elements.
    pub containment_residual: f64,
    /// `max ||[R, E]||_max` over a basis `R` of `range(Phi)` and Alice's elements.
    pub commutation_residual: f64,
    pub containment_pass: bool,
    pub commutation_pass: bool,
    pub pass: bool,
}

/// Checks that Bob's elements lie in the range of `phi` and that the range
/// commutes with Alice's elements.
pub fn verify_sandwich(
    phi: &ConditionalExpectation,
    alice: &POVMFamily,
    bob: &POVMFamily,
    tol: &TolerancePolicy,
) -> Result<SandwichReport> {
    let n = phi.dim();
    if alice.dim() != n || bob.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "expectation on {n}, alice on {}, bob on {}",
            alice.dim(),
            bob.dim()
        )));
    }
    let mut containment_residual = 0.0_f64;
    let mut containment_pass = true;
    for f in bob.elements() {
        let r = phi.target.residual(f.as_matrix());
        containment_residual = containment_residual.max(r);
        containment_pass &= r <= tol.eps_eq * (1.0 + f.norm_hs());
    }
    let mut commutation_residual = 0.0_f64;
    let mut commutation_pass = true;
    for e in alice.elements() {
        let threshold = tol.eps_eq * (1.0 + e.norm_max());
        for r in phi.target.basis() {
            let c = r.commutator(e.as_matrix()).norm_max();
            commutation_residual = commutation_residual.max(c);
            commutation_pass &= c <= threshold;
        }
    }
    Ok(SandwichReport {
        containment_residual,
        commutation_residual,
        containment_pass,
        commutation_pass,
        pass: containment_pass && commutation_pass,
    })
}
