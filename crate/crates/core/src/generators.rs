//! Seeded factories for commuting-operator models with known block structure.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixlab::{kron, CMatrix, HermitianMatrix, C64};
use crate::sampling;
use crate::scenario::{BipartiteModel, DensityOperator, MeasurementScenario, POVMFamily};

/// Outcome counts per setting for each party.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioShape {
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
}

impl ScenarioShape {
    pub fn uniform(settings: usize, outcomes: usize) -> Self {
        Self {
            alice: vec![outcomes; settings],
            bob: vec![outcomes; settings],
        }
    }

    fn check(&self) -> Result<()> {
        if self.alice.is_empty() || self.bob.is_empty() {
            return Err(Error::InvalidParameters("each party needs at least one setting".into()));
        }
        if self.alice.iter().chain(&self.bob).any(|&k| k == 0) {
            return Err(Error::InvalidParameters("every setting needs at least one outcome".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind {
    /// Random POVMs `e (x) I`, `I (x) f` and a random state on `C^dA (x) C^dB`,
    /// optionally hidden by a random unitary.
    HiddenTensor {
        dim_a: usize,
        dim_b: usize,
        shape: ScenarioShape,
        product_state: bool,
        obfuscate: bool,
    },
    /// Direct sum of hidden-tensor blocks `(dA_k, dB_k)` with a convex
    /// combination of block states.
    DirectSum {
        blocks: Vec<(usize, usize)>,
        shape: ScenarioShape,
        obfuscate: bool,
    },
    /// Tsirelson-optimal two-qubit CHSH strategy.
    Chsh { obfuscate: bool },
    /// Diagonal operators; Alice's response depends only on a hidden variable
    /// taking `hidden_values` values.
    Classical {
        dim: usize,
        hidden_values: usize,
        shape: ScenarioShape,
    },
}

impl ModelKind {
    /// Obfuscated hidden-tensor model with two binary settings per party.
    pub fn hidden_tensor(dim_a: usize, dim_b: usize) -> Self {
        ModelKind::HiddenTensor {
            dim_a,
            dim_b,
            shape: ScenarioShape::uniform(2, 2),
            product_state: false,
            obfuscate: true,
        }
    }
}

/// Local data of an unobfuscated hidden-tensor model.
#[derive(Clone, Debug)]
pub struct LocalFactors {
    pub dim_a: usize,
    pub dim_b: usize,
    pub alice: Vec<Vec<HermitianMatrix>>,
    pub bob: Vec<Vec<HermitianMatrix>>,
    /// `(rho_A, rho_B)` when the state is a product.
    pub product_state: Option<(HermitianMatrix, HermitianMatrix)>,
}

#[derive(Clone, Debug)]
pub struct GeneratedModel {
    pub model: BipartiteModel,
    /// Sorted `(n_k, m_k)` profile of the algebra generated by Alice's elements.
    pub alice_blocks: Vec<(usize, usize)>,
    /// Present for hidden-tensor models without obfuscation.
    pub factors: Option<LocalFactors>,
}

pub fn generate<R: Rng + ?Sized>(kind: &ModelKind, rng: &mut R) -> Result<GeneratedModel> {
    match kind {
        ModelKind::HiddenTensor {
            dim_a,
            dim_b,
            shape,
            product_state,
            obfuscate,
        } => hidden_tensor(*dim_a, *dim_b, shape, *product_state, *obfuscate, rng),
        ModelKind::DirectSum {
            blocks,
            shape,
            obfuscate,
        } => direct_sum(blocks, shape, *obfuscate, rng),
        ModelKind::Chsh { obfuscate } => chsh(*obfuscate, rng),
        ModelKind::Classical {
            dim,
            hidden_values,
            shape,
        } => classical(*dim, *hidden_values, shape, rng),
    }
}

fn family(dim: usize, els: Vec<Vec<CMatrix>>) -> Result<POVMFamily> {
    POVMFamily::new(
        dim,
        els.into_iter()
            .map(|s| s.into_iter().map(HermitianMatrix::symmetrize).collect())
            .collect(),
    )
}

fn obfuscated<R: Rng + ?Sized>(m: BipartiteModel, rng: &mut R) -> BipartiteModel {
    let u = sampling::random_unitary(m.dim, rng);
    m.conjugated(&u)
}

fn hidden_tensor<R: Rng + ?Sized>(
    dim_a: usize,
    dim_b: usize,
    shape: &ScenarioShape,
    product_state: bool,
    obfuscate: bool,
    rng: &mut R,
) -> Result<GeneratedModel> {
    shape.check()?;
    if dim_a == 0 || dim_b == 0 {
        return Err(Error::InvalidParameters("factor dimensions must be positive".into()));
    }
    let n = dim_a * dim_b;
    let e: Vec<Vec<HermitianMatrix>> = shape.alice.iter().map(|&k| sampling::random_povm(dim_a, k, rng)).collect();
    let f: Vec<Vec<HermitianMatrix>> = shape.bob.iter().map(|&k| sampling::random_povm(dim_b, k, rng)).collect();
    let (ia, ib) = (CMatrix::identity(dim_a), CMatrix::identity(dim_b));
    let alice = family(n, e.iter().map(|s| s.iter().map(|x| kron(x, &ib)).collect()).collect())?;
    let bob = family(n, f.iter().map(|s| s.iter().map(|x| kron(&ia, x)).collect()).collect())?;
    let (state, product) = if product_state {
        let ra = sampling::random_density(dim_a, rng);
        let rb = sampling::random_density(dim_b, rng);
        (HermitianMatrix::symmetrize(kron(&ra, &rb)), Some((ra, rb)))
    } else {
        (sampling::random_density(n, rng), None)
    };
    let scenario = MeasurementScenario::labelled(&shape.alice, &shape.bob)?;
    let model = BipartiteModel::new(scenario, alice, bob, DensityOperator::new(state))?;
    let (model, factors) = if obfuscate {
        (obfuscated(model, rng), None)
    } else {
        (
            model,
            Some(LocalFactors {
                dim_a,
                dim_b,
                alice: e,
                bob: f,
                product_state: product,
            }),
        )
    };
    Ok(GeneratedModel {
        model,
        alice_blocks: vec![(dim_a, dim_b)],
        factors,
    })
}

fn block_diagonal(parts: &[CMatrix]) -> CMatrix {
    let n: usize = parts.iter().map(CMatrix::rows).sum();
    let mut out = DMatrix::<C64>::zeros(n, n);
    let mut off = 0;
    for p in parts {
        out.view_mut((off, off), (p.rows(), p.cols())).copy_from(p.as_dmatrix());
        off += p.rows();
    }
    CMatrix::from_dmatrix(out).expect("finite")
}

fn direct_sum<R: Rng + ?Sized>(
    blocks: &[(usize, usize)],
    shape: &ScenarioShape,
    obfuscate: bool,
    rng: &mut R,
) -> Result<GeneratedModel> {
    shape.check()?;
    if blocks.is_empty() || blocks.iter().any(|&(a, b)| a == 0 || b == 0) {
        return Err(Error::InvalidParameters("direct sum needs nonempty blocks of positive size".into()));
    }
    let n: usize = blocks.iter().map(|(a, b)| a * b).sum();
    let weights = sampling::random_simplex(blocks.len(), rng);
    let mut alice_parts: Vec<Vec<Vec<CMatrix>>> = shape.alice.iter().map(|&k| vec![Vec::new(); k]).collect();
    let mut bob_parts: Vec<Vec<Vec<CMatrix>>> = shape.bob.iter().map(|&k| vec![Vec::new(); k]).collect();
    let mut state_parts = Vec::new();
    for (&(da, db), w) in blocks.iter().zip(&weights) {
        let (ia, ib) = (CMatrix::identity(da), CMatrix::identity(db));
        for (x, &k) in shape.alice.iter().enumerate() {
            for (a, e) in sampling::random_povm(da, k, rng).iter().enumerate() {
                alice_parts[x][a].push(kron(e, &ib));
            }
        }
        for (y, &k) in shape.bob.iter().enumerate() {
            for (b, f) in sampling::random_povm(db, k, rng).iter().enumerate() {
                bob_parts[y][b].push(kron(&ia, f));
            }
        }
        state_parts.push(sampling::random_density(da * db, rng).scale_real(*w));
    }
    let join = |parts: Vec<Vec<Vec<CMatrix>>>| -> Vec<Vec<CMatrix>> {
        parts
            .into_iter()
            .map(|s| s.into_iter().map(|p| block_diagonal(&p)).collect())
            .collect()
    };
    let alice = family(n, join(alice_parts))?;
    let bob = family(n, join(bob_parts))?;
    let state = DensityOperator::new(HermitianMatrix::symmetrize(block_diagonal(&state_parts)));
    let scenario = MeasurementScenario::labelled(&shape.alice, &shape.bob)?;
    let mut model = BipartiteModel::new(scenario, alice, bob, state)?;
    if obfuscate {
        model = obfuscated(model, rng);
    }
    let mut alice_blocks = blocks.to_vec();
    alice_blocks.sort_unstable();
    Ok(GeneratedModel {
        model,
        alice_blocks,
        factors: None,
    })
}

fn chsh<R: Rng + ?Sized>(obfuscate: bool, rng: &mut R) -> Result<GeneratedModel> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i2 = CMatrix::identity(2);
    let x = CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])?;
    let z = CMatrix::from_real_diagonal(&[1.0, -1.0]);
    let plus = (&z + &x).scale_real(s);
    let minus = (&z - &x).scale_real(s);
    // POVM {(I + O)/2, (I - O)/2} for a +-1 observable O
    let binarize = |o: &CMatrix| vec![(&i2 + o).scale_real(0.5), (&i2 - o).scale_real(0.5)];
    let alice = family(
        4,
        [&z, &x]
            .iter()
            .map(|o| binarize(o).iter().map(|p| kron(p, &i2)).collect())
            .collect(),
    )?;
    let bob = family(
        4,
        [&plus, &minus]
            .iter()
            .map(|o| binarize(o).iter().map(|p| kron(&i2, p)).collect())
            .collect(),
    )?;
    let h = 0.5;
    let phi_plus = CMatrix::from_real(
        4,
        4,
        &[h, 0., 0., h, 0., 0., 0., 0., 0., 0., 0., 0., h, 0., 0., h],
    )?;
    let scenario = MeasurementScenario::labelled(&[2, 2], &[2, 2])?;
    let mut model = BipartiteModel::new(
        scenario,
        alice,
        bob,
        DensityOperator::new(HermitianMatrix::symmetrize(phi_plus)),
    )?;
    if obfuscate {
        model = obfuscated(model, rng);
    }
    Ok(GeneratedModel {
        model,
        alice_blocks: vec![(2, 2)],
        factors: None,
    })
}

fn classical<R: Rng + ?Sized>(
    dim: usize,
    hidden_values: usize,
    shape: &ScenarioShape,
    rng: &mut R,
) -> Result<GeneratedModel> {
    shape.check()?;
    if dim == 0 || hidden_values == 0 || hidden_values > dim {
        return Err(Error::InvalidParameters(format!(
            "classical model needs 1 <= hidden_values <= dim, got {hidden_values} and {dim}"
        )));
    }
    let lambda = |i: usize| i % hidden_values;
    let diag_family = |responses: Vec<Vec<Vec<f64>>>, index: &dyn Fn(usize) -> usize| -> Vec<Vec<CMatrix>> {
        responses
            .into_iter()
            .map(|table| {
                let k = table[0].len();
                (0..k)
                    .map(|a| CMatrix::from_real_diagonal(&(0..dim).map(|i| table[index(i)][a]).collect::<Vec<_>>()))
                    .collect()
            })
            .collect()
    };
    let alice_resp: Vec<Vec<Vec<f64>>> = shape
        .alice
        .iter()
        .map(|&k| (0..hidden_values).map(|_| sampling::random_simplex(k, rng)).collect())
        .collect();
    let bob_resp: Vec<Vec<Vec<f64>>> = shape
        .bob
        .iter()
        .map(|&k| (0..dim).map(|_| sampling::random_simplex(k, rng)).collect())
        .collect();
    let alice = family(dim, diag_family(alice_resp, &lambda))?;
    let bob = family(dim, diag_family(bob_resp, &|i| i))?;
    let state = DensityOperator::new(sampling::random_density(dim, rng));
    let scenario = MeasurementScenario::labelled(&shape.alice, &shape.bob)?;
    let model = BipartiteModel::new(scenario, alice, bob, state)?;
    let mut alice_blocks: Vec<(usize, usize)> = (0..hidden_values)
        .map(|v| (1, (0..dim).filter(|&i| lambda(i) == v).count()))
        .collect();
    alice_blocks.sort_unstable();
    Ok(GeneratedModel {
        model,
        alice_blocks,
        factors: None,
    })
}

fn random_shape<R: Rng + ?Sized>(rng: &mut R) -> ScenarioShape {
    // Alice keeps at least two settings so her algebra is a full factor per block.
    let xa = rng.random_range(2..=3);
    let xb = rng.random_range(1..=3);
    ScenarioShape {
        alice: (0..xa).map(|_| rng.random_range(2..=3)).collect(),
        bob: (0..xb).map(|_| rng.random_range(2..=3)).collect(),
    }
}

/// Random instance of the test corpus: `0` hidden-tensor, `1` direct-sum,
/// `2` classical. Dimensions stay at or below 12.
pub fn corpus_kind<R: Rng + ?Sized>(which: usize, rng: &mut R) -> ModelKind {
    match which % 3 {
        0 => ModelKind::HiddenTensor {
            dim_a: rng.random_range(2..=3),
            dim_b: rng.random_range(2..=3),
            shape: random_shape(rng),
            product_state: false,
            obfuscate: true,
        },
        1 => {
            let k = rng.random_range(2..=3);
            let blocks = loop {
                let b: Vec<(usize, usize)> = (0..k)
                    .map(|_| (rng.random_range(1..=3), rng.random_range(1..=3)))
                    .collect();
                if b.iter().map(|(x, y)| x * y).sum::<usize>() <= 12 {
                    break b;
                }
            };
            ModelKind::DirectSum {
                blocks,
                shape: random_shape(rng),
                obfuscate: true,
            }
        }
        _ => {
            let dim = rng.random_range(2..=12);
            ModelKind::Classical {
                dim,
                hidden_values: rng.random_range(1..=dim),
                shape: random_shape(rng),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixlab::TolerancePolicy;
    use crate::scenario::validate_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_kind_validates_tightly() {
        let tol = TolerancePolicy::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..30 {
            let kind = corpus_kind(i, &mut rng);
            let g = generate(&kind, &mut rng).unwrap();
            let r = validate_model(&g.model, &tol).unwrap();
            assert!(r.pass, "{kind:?}");
            assert!(r.checks.iter().all(|c| c.residual <= 1e-10), "{kind:?}: {r:?}");
            assert!(g.model.dim <= 12);
        }
        for kind in [ModelKind::Chsh { obfuscate: true }, ModelKind::Chsh { obfuscate: false }] {
            let g = generate(&kind, &mut rng).unwrap();
            assert!(validate_model(&g.model, &tol).unwrap().checks.iter().all(|c| c.residual <= 1e-10));
        }
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = ModelKind::HiddenTensor {
            dim_a: 2,
            dim_b: 2,
            shape: ScenarioShape { alice: vec![2, 0], bob: vec![2] },
            product_state: false,
            obfuscate: false,
        };
        assert!(matches!(generate(&bad, &mut rng), Err(Error::InvalidParameters(_))));
        let bad = ModelKind::Classical { dim: 3, hidden_values: 4, shape: ScenarioShape::uniform(2, 2) };
        assert!(generate(&bad, &mut rng).is_err());
        let bad = ModelKind::DirectSum { blocks: vec![], shape: ScenarioShape::uniform(2, 2), obfuscate: false };
        assert!(generate(&bad, &mut rng).is_err());
    }

    #[test]
    fn kind_json_shape() {
        let k = ModelKind::hidden_tensor(2, 3);
        let v = serde_json::to_value(&k).unwrap();
        assert_eq!(v["kind"], "hidden-tensor");
        let back: ModelKind = serde_json::from_value(v).unwrap();
        assert_eq!(back, k);
    }
}
