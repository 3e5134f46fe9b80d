//! Tensor-product realization of a commuting-operator model.
//!
//! With `A = W*(Alice)` decomposed as `(+)_k M_{n_k} (x) I_{m_k}`, every Alice
//! element reads `(+)_k e_k (x) I` and every Bob element `(+)_k I (x) f_k` in
//! the block frames. Setting `H_A = (+)_k C^{n_k}`, `H_B = (+)_k C^{m_k}` and
//! placing block `k` of the state on the `(k, k)` corner of `H_A (x) H_B`
//! gives a model with the same behavior.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixlab::{kron, CMatrix, HermitianMatrix, TolerancePolicy, C64};
use crate::scenario::{
    povms_from_map, povms_to_map, validate_model, Behavior, BipartiteModel, DensityOperator,
    MeasurementScenario, POVMFamily,
};
use crate::vnalg::{generated_algebra, wedderburn, WedderburnBlock};

/// Party whose algebra supplies the block decomposition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Alice,
    Bob,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TensorOptions {
    pub side: Side,
    /// Extend both factors to the original dimension with a null block on
    /// which every setting is completed uniformly.
    pub padding: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorModel {
    pub scenario: MeasurementScenario,
    pub dim_a: usize,
    pub dim_b: usize,
    pub alice: POVMFamily,
    pub bob: POVMFamily,
    pub state: DensityOperator,
    /// `(n_k, m_k)` in block order.
    pub blocks: Vec<(usize, usize)>,
}

/// Residuals of the tensor-model invariants.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TensorCheck {
    pub alice_completeness: f64,
    pub bob_completeness: f64,
    pub alice_negativity: f64,
    pub bob_negativity: f64,
    pub state_trace: f64,
    pub state_negativity: f64,
}

impl TensorCheck {
    pub fn passes(&self, tol: &TolerancePolicy) -> bool {
        self.alice_completeness <= tol.eps_eq
            && self.bob_completeness <= tol.eps_eq
            && self.alice_negativity <= tol.eps_psd
            && self.bob_negativity <= tol.eps_psd
            && self.state_trace <= tol.eps_eq
            && self.state_negativity <= tol.eps_psd
    }
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    #[serde(rename = "dimA")]
    dim_a: usize,
    #[serde(rename = "dimB")]
    dim_b: usize,
    scenario: MeasurementScenario,
    alice_povms: BTreeMap<String, Vec<CMatrix>>,
    bob_povms: BTreeMap<String, Vec<CMatrix>>,
    state: CMatrix,
    #[serde(default)]
    blocks: Vec<(usize, usize)>,
}

impl TensorModel {
    pub fn check_invariants(&self) -> Result<TensorCheck> {
        let (tr, neg) = self.state.residuals()?;
        Ok(TensorCheck {
            alice_completeness: self.alice.completeness_residual(),
            bob_completeness: self.bob.completeness_residual(),
            alice_negativity: (-self.alice.min_eigenvalue()?).max(0.0),
            bob_negativity: (-self.bob.min_eigenvalue()?).max(0.0),
            state_trace: tr,
            state_negativity: neg,
        })
    }

    /// `p(a,b|x,y)` checked as a behavior.
    pub fn behavior(&self, tol: &TolerancePolicy) -> Result<Behavior> {
        Behavior::new(self.scenario.clone(), self.probability_table(), tol)
    }

    /// `table[x][y][a][b] = tr(rho (E^x_a (x) F^y_b))`, contracted one factor
    /// at a time. No normalization checks.
    pub fn probability_table(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        let (da, db) = (self.dim_a, self.dim_b);
        let rho = self.state.matrix().as_dmatrix();
        let mut table = Vec::with_capacity(self.alice.settings());
        for x in 0..self.alice.settings() {
            // tr_A(rho (E (x) I)) for each outcome
            let reduced: Vec<DMatrix<C64>> = self
                .alice
                .setting(x)
                .iter()
                .map(|e| {
                    let e = e.as_dmatrix();
                    DMatrix::from_fn(db, db, |b1, b2| {
                        let mut s = C64::new(0.0, 0.0);
                        for a1 in 0..da {
                            for a2 in 0..da {
                                s += rho[(a1 * db + b1, a2 * db + b2)] * e[(a2, a1)];
                            }
                        }
                        s
                    })
                })
                .collect();
            let mut row = Vec::with_capacity(self.bob.settings());
            for y in 0..self.bob.settings() {
                let block = reduced
                    .iter()
                    .map(|r| {
                        self.bob
                            .setting(y)
                            .iter()
                            .map(|f| r.component_mul(&f.as_dmatrix().transpose()).sum().re)
                            .collect()
                    })
                    .collect();
                row.push(block);
            }
            table.push(row);
        }
        table
    }

    /// `E (x) I`, `I (x) F` and the state on `C^(dimA dimB)`.
    pub fn to_bipartite_model(&self) -> Result<BipartiteModel> {
        let n = self.dim_a * self.dim_b;
        let (ia, ib) = (CMatrix::identity(self.dim_a), CMatrix::identity(self.dim_b));
        let lift = |fam: &POVMFamily, f: &dyn Fn(&CMatrix) -> CMatrix| -> Result<POVMFamily> {
            POVMFamily::new(
                n,
                (0..fam.settings())
                    .map(|x| {
                        fam.setting(x)
                            .iter()
                            .map(|e| HermitianMatrix::symmetrize(f(e.as_matrix())))
                            .collect()
                    })
                    .collect(),
            )
        };
        let alice = lift(&self.alice, &|e| kron(e, &ib))?;
        let bob = lift(&self.bob, &|f| kron(&ia, f))?;
        BipartiteModel::new(self.scenario.clone(), alice, bob, self.state.clone())
    }

    /// Exchanges the parties and the order of the tensor factors.
    pub fn swapped(&self) -> Self {
        let (da, db) = (self.dim_a, self.dim_b);
        let rho = self.state.matrix();
        // new index (b, a) <- old index (a, b)
        let swapped = CMatrix::from_fn(da * db, da * db, |r, c| {
            let (b1, a1) = (r / da, r % da);
            let (b2, a2) = (c / da, c % da);
            rho.get(a1 * db + b1, a2 * db + b2)
        });
        Self {
            scenario: self.scenario.swapped(),
            dim_a: db,
            dim_b: da,
            alice: self.bob.clone(),
            bob: self.alice.clone(),
            state: DensityOperator::new(HermitianMatrix::symmetrize(swapped)),
            blocks: self.blocks.iter().map(|&(n, m)| (m, n)).collect(),
        }
    }

    /// The model schema with `"dimA"`, `"dimB"` and the block profile added.
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(TensorRepr {
            dim_a: self.dim_a,
            dim_b: self.dim_b,
            scenario: self.scenario.clone(),
            alice_povms: povms_to_map(&self.scenario.alice, &self.alice),
            bob_povms: povms_to_map(&self.scenario.bob, &self.bob),
            state: self.state.matrix().as_matrix().clone(),
            blocks: self.blocks.clone(),
        })
        .expect("tensor model serializes")
    }

    pub fn from_json_str(s: &str, tol: &TolerancePolicy) -> Result<Self> {
        let r: TensorRepr = serde_json::from_str(s)?;
        let alice = povms_from_map(r.dim_a, &r.scenario.alice, &r.alice_povms, "alice", tol)?;
        let bob = povms_from_map(r.dim_b, &r.scenario.bob, &r.bob_povms, "bob", tol)?;
        let state = DensityOperator::new(HermitianMatrix::new(r.state, tol)?);
        if state.dim() != r.dim_a * r.dim_b {
            return Err(Error::DimensionMismatch(format!(
                "state has dimension {}, factors {}x{}",
                state.dim(),
                r.dim_a,
                r.dim_b
            )));
        }
        Ok(Self {
            scenario: r.scenario,
            dim_a: r.dim_a,
            dim_b: r.dim_b,
            alice,
            bob,
            state,
            blocks: r.blocks,
        })
    }
}

fn direct_sum(parts: &[CMatrix], dim: usize) -> CMatrix {
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    let mut off = 0;
    for p in parts {
        out.view_mut((off, off), (p.rows(), p.cols())).copy_from(p.as_dmatrix());
        off += p.rows();
    }
    CMatrix::from_dmatrix(out).expect("finite")
}

fn extract(
    family: &POVMFamily,
    blocks: &[WedderburnBlock],
    dim: usize,
    component: fn(&WedderburnBlock, &CMatrix) -> (CMatrix, f64),
    tol: &TolerancePolicy,
) -> Result<POVMFamily> {
    let mut elements = Vec::with_capacity(family.settings());
    for x in 0..family.settings() {
        let mut povm = Vec::with_capacity(family.outcomes(x));
        for e in family.setting(x) {
            let threshold = tol.factor_residual * (1.0 + e.norm_max());
            let mut parts = Vec::with_capacity(blocks.len());
            for b in blocks {
                let (c, res) = component(b, e.as_matrix());
                if res > threshold {
                    return Err(Error::ComponentExtractionResidual { residual: res, threshold });
                }
                parts.push(c);
            }
            povm.push(HermitianMatrix::symmetrize(direct_sum(&parts, dim)));
        }
        elements.push(povm);
    }
    POVMFamily::new(dim, elements)
}

fn pad_family(family: &POVMFamily, dim: usize) -> Result<POVMFamily> {
    let old = family.dim();
    let elements = (0..family.settings())
        .map(|x| {
            let k = family.outcomes(x);
            let fill = CMatrix::identity(dim - old).scale_real(1.0 / k as f64);
            family
                .setting(x)
                .iter()
                .map(|e| HermitianMatrix::symmetrize(direct_sum(&[e.as_matrix().clone(), fill.clone()], dim)))
                .collect()
        })
        .collect();
    POVMFamily::new(dim, elements)
}

/// Re-embeds a state on `C^da (x) C^db` into `C^na (x) C^nb` through the
/// leading corner of each factor.
fn pad_state(rho: &CMatrix, (da, db): (usize, usize), (na, nb): (usize, usize)) -> CMatrix {
    let mut out = DMatrix::<C64>::zeros(na * nb, na * nb);
    for a1 in 0..da {
        for b1 in 0..db {
            for a2 in 0..da {
                for b2 in 0..db {
                    out[(a1 * nb + b1, a2 * nb + b2)] = rho.get(a1 * db + b1, a2 * db + b2);
                }
            }
        }
    }
    CMatrix::from_dmatrix(out).expect("finite")
}

/// Padding to the original dimension `n` on both factors.
pub fn pad_to(t: &TensorModel, n: usize) -> Result<TensorModel> {
    if t.dim_a > n || t.dim_b > n {
        return Err(Error::DimensionMismatch(format!(
            "cannot pad factors {}x{} down to {n}",
            t.dim_a, t.dim_b
        )));
    }
    Ok(TensorModel {
        scenario: t.scenario.clone(),
        dim_a: n,
        dim_b: n,
        alice: pad_family(&t.alice, n)?,
        bob: pad_family(&t.bob, n)?,
        state: DensityOperator::new(HermitianMatrix::symmetrize(pad_state(
            t.state.matrix().as_matrix(),
            (t.dim_a, t.dim_b),
            (n, n),
        ))),
        blocks: t.blocks.clone(),
    })
}

fn tensorize_alice<R: Rng + ?Sized>(
    m: &BipartiteModel,
    tol: &TolerancePolicy,
    rng: &mut R,
) -> Result<TensorModel> {
    let gens: Vec<CMatrix> = m.alice.elements().map(|e| e.as_matrix().clone()).collect();
    let alg = generated_algebra(m.dim, &gens, tol)?;
    let w = wedderburn(&alg, tol, rng)?;
    let blocks: Vec<(usize, usize)> = w.blocks.iter().map(|b| (b.factor_dim, b.multiplicity)).collect();
    let dim_a: usize = blocks.iter().map(|b| b.0).sum();
    let dim_b: usize = blocks.iter().map(|b| b.1).sum();
    let alice = extract(&m.alice, &w.blocks, dim_a, WedderburnBlock::factor_component, tol)?;
    let bob = extract(&m.bob, &w.blocks, dim_b, WedderburnBlock::multiplicity_component, tol)?;

    // V rho V^dagger with V = sum_k J_k U_k, J_k the corner embedding of block k.
    let mut index = Vec::with_capacity(m.dim);
    let (mut oa, mut ob) = (0, 0);
    for &(n, mm) in &blocks {
        for i in 0..n {
            for j in 0..mm {
                index.push((oa + i) * dim_b + ob + j);
            }
        }
        oa += n;
        ob += mm;
    }
    let mut u = DMatrix::<C64>::zeros(m.dim, m.dim);
    let mut row = 0;
    for b in &w.blocks {
        let r = b.isometry.rows();
        u.view_mut((row, 0), (r, m.dim)).copy_from(b.isometry.as_dmatrix());
        row += r;
    }
    let rot = &(&u * m.state.matrix().as_dmatrix()) * u.adjoint();
    let mut state = DMatrix::<C64>::zeros(dim_a * dim_b, dim_a * dim_b);
    for (i, &p) in index.iter().enumerate() {
        for (j, &q) in index.iter().enumerate() {
            state[(p, q)] = rot[(i, j)];
        }
    }
    Ok(TensorModel {
        scenario: m.scenario.clone(),
        dim_a,
        dim_b,
        alice,
        bob,
        state: DensityOperator::new(HermitianMatrix::symmetrize(CMatrix::from_dmatrix(state)?)),
        blocks,
    })
}

/// Builds a tensor-product model with the same behavior as `m`.
pub fn tensorize<R: Rng + ?Sized>(
    m: &BipartiteModel,
    opts: TensorOptions,
    tol: &TolerancePolicy,
    rng: &mut R,
) -> Result<TensorModel> {
    let report = validate_model(m, tol)?;
    if let Some(c) = report.first_failure() {
        return Err(Error::ValidationFailed(format!(
            "{} residual {:e} exceeds {:e}",
            c.condition, c.residual, c.threshold
        )));
    }
    let t = match opts.side {
        Side::Alice => tensorize_alice(m, tol, rng)?,
        Side::Bob => tensorize_alice(&m.swapped(), tol, rng)?.swapped(),
    };
    if opts.padding {
        pad_to(&t, m.dim)
    } else {
        Ok(t)
    }
}

/// `max |tr(rho (E^x_a (x) F^y_b)) - p(a,b|x,y)|`.
pub fn verify_tensor_model(t: &TensorModel, b: &Behavior) -> Result<f64> {
    if t.scenario.alice_outcomes() != b.scenario().alice_outcomes()
        || t.scenario.bob_outcomes() != b.scenario().bob_outcomes()
    {
        return Err(Error::ScenarioMismatch("tensor model and behavior have different shapes".into()));
    }
    let own = t.probability_table();
    Ok(own
        .iter()
        .flatten()
        .flatten()
        .flatten()
        .zip(b.table().iter().flatten().flatten().flatten())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max))
}

/// Results of tensorizing from both sides.
#[derive(Clone, Debug)]
pub struct CrossCheck {
    pub alice_side: TensorModel,
    pub bob_side: TensorModel,
    /// Largest entrywise difference between the two behaviors.
    pub behavior_difference: f64,
}

pub fn cross_check<R: Rng + ?Sized>(
    m: &BipartiteModel,
    padding: bool,
    tol: &TolerancePolicy,
    rng: &mut R,
) -> Result<CrossCheck> {
    let alice_side = tensorize(m, TensorOptions { side: Side::Alice, padding }, tol, rng)?;
    let bob_side = tensorize(m, TensorOptions { side: Side::Bob, padding }, tol, rng)?;
    let behavior_difference = alice_side.behavior(tol)?.max_abs_diff(&bob_side.behavior(tol)?)?;
    Ok(CrossCheck {
        alice_side,
        bob_side,
        behavior_difference,
    })
}
