//! Bipartite commuting-operator models and their behaviors.
//!
//! A [`BipartiteModel`] bundles two POVM families acting on the same space
//! `C^n` with a density operator. [`validate_model`] checks positivity,
//! per-setting completeness and cross-commutation; [`behavior`] evaluates
//! `p(a,b|x,y) = tr(rho E^x_a F^y_b)` on validated models only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixlab::{trace_pairing, CMatrix, HermitianMatrix, TolerancePolicy};

/// A measurement setting: opaque label plus number of outcomes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(String, usize)", into = "(String, usize)")]
pub struct Setting {
    pub label: String,
    pub outcomes: usize,
}

impl From<(String, usize)> for Setting {
    fn from((label, outcomes): (String, usize)) -> Self {
        Setting { label, outcomes }
    }
}

impl From<Setting> for (String, usize) {
    fn from(s: Setting) -> Self {
        (s.label, s.outcomes)
    }
}

/// Settings and outcome counts for both parties.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioRepr")]
pub struct MeasurementScenario {
    pub alice: Vec<Setting>,
    pub bob: Vec<Setting>,
}

#[derive(Deserialize)]
struct ScenarioRepr {
    alice: Vec<Setting>,
    bob: Vec<Setting>,
}

impl TryFrom<ScenarioRepr> for MeasurementScenario {
    type Error = Error;
    fn try_from(r: ScenarioRepr) -> Result<Self> {
        MeasurementScenario::new(r.alice, r.bob)
    }
}

fn check_party(settings: &[Setting], who: &str) -> Result<()> {
    if settings.is_empty() {
        return Err(Error::InvalidModel(format!("{who} has no settings")));
    }
    for (i, s) in settings.iter().enumerate() {
        if s.outcomes == 0 {
            return Err(Error::InvalidModel(format!(
                "{who} setting {:?} has no outcomes",
                s.label
            )));
        }
        if settings[..i].iter().any(|t| t.label == s.label) {
            return Err(Error::InvalidModel(format!(
                "{who} setting label {:?} repeated",
                s.label
            )));
        }
    }
    Ok(())
}

impl MeasurementScenario {
    pub fn new(alice: Vec<Setting>, bob: Vec<Setting>) -> Result<Self> {
        check_party(&alice, "alice")?;
        check_party(&bob, "bob")?;
        Ok(Self { alice, bob })
    }

    /// Settings labelled `x0, x1, ...` and `y0, y1, ...` with the given outcome counts.
    pub fn labelled(alice_outcomes: &[usize], bob_outcomes: &[usize]) -> Result<Self> {
        let mk = |prefix: &str, counts: &[usize]| {
            counts
                .iter()
                .enumerate()
                .map(|(i, &k)| Setting {
                    label: format!("{prefix}{i}"),
                    outcomes: k,
                })
                .collect()
        };
        Self::new(mk("x", alice_outcomes), mk("y", bob_outcomes))
    }

    pub fn alice_outcomes(&self) -> Vec<usize> {
        self.alice.iter().map(|s| s.outcomes).collect()
    }

    pub fn bob_outcomes(&self) -> Vec<usize> {
        self.bob.iter().map(|s| s.outcomes).collect()
    }

    /// True for two settings with two outcomes on each side.
    pub fn is_chsh_shape(&self) -> bool {
        self.alice_outcomes() == [2, 2] && self.bob_outcomes() == [2, 2]
    }

    /// Exchanges the roles of the two parties.
    pub fn swapped(&self) -> Self {
        Self {
            alice: self.bob.clone(),
            bob: self.alice.clone(),
        }
    }
}

/// One POVM per setting, all on `C^dim`. Numerical properties (positivity,
/// completeness) are checked by [`validate_model`], not here.
#[derive(Clone, Debug, PartialEq)]
pub struct POVMFamily {
    dim: usize,
    elements: Vec<Vec<HermitianMatrix>>,
}

impl POVMFamily {
    pub fn new(dim: usize, elements: Vec<Vec<HermitianMatrix>>) -> Result<Self> {
        if elements.is_empty() || elements.iter().any(Vec::is_empty) {
            return Err(Error::InvalidModel(
                "POVM family needs at least one setting and one outcome per setting".into(),
            ));
        }
        if let Some(bad) = elements.iter().flatten().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "POVM element of size {} in a family on dimension {dim}",
                bad.dim()
            )));
        }
        Ok(Self { dim, elements })
    }

    /// The trivial family `{ {I} }`.
    pub fn trivial(dim: usize) -> Self {
        Self {
            dim,
            elements: vec![vec![HermitianMatrix::identity(dim)]],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> usize {
        self.elements.len()
    }

    pub fn outcomes(&self, setting: usize) -> usize {
        self.elements[setting].len()
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        self.elements.iter().map(Vec::len).collect()
    }

    pub fn element(&self, setting: usize, outcome: usize) -> &HermitianMatrix {
        &self.elements[setting][outcome]
    }

    pub fn setting(&self, setting: usize) -> &[HermitianMatrix] {
        &self.elements[setting]
    }

    pub fn elements(&self) -> impl Iterator<Item = &HermitianMatrix> {
        self.elements.iter().flatten()
    }

    /// Max over settings of `||sum_a E^x_a - I||_max`.
    pub fn completeness_residual(&self) -> f64 {
        let id = CMatrix::identity(self.dim);
        self.elements
            .iter()
            .map(|povm| {
                let mut s = CMatrix::zeros(self.dim, self.dim);
                for e in povm {
                    s = &s + e.as_matrix();
                }
                (&s - &id).norm_max()
            })
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all elements.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut min = f64::INFINITY;
        for e in self.elements() {
            min = min.min(e.min_eigenvalue()?);
        }
        Ok(min)
    }

    /// `U E U^dagger` for every element.
    pub fn conjugated(&self, u: &CMatrix) -> Self {
        let ud = u.adjoint();
        Self {
            dim: u.rows(),
            elements: self
                .elements
                .iter()
                .map(|povm| {
                    povm.iter()
                        .map(|e| HermitianMatrix::symmetrize(&(u * e.as_matrix()) * &ud))
                        .collect()
                })
                .collect(),
        }
    }

    /// Reorders the outcomes of one setting: new outcome `k` is old outcome `perm[k]`.
    pub fn permute_outcomes(&self, setting: usize, perm: &[usize]) -> Self {
        let mut out = self.clone();
        out.elements[setting] = perm.iter().map(|&k| self.elements[setting][k].clone()).collect();
        out
    }
}

/// Density operator. Trace and positivity are checked by [`validate_model`]
/// or [`DensityOperator::check`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(HermitianMatrix);

impl DensityOperator {
    pub fn new(rho: HermitianMatrix) -> Self {
        Self(rho)
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self(HermitianMatrix::symmetrize(CMatrix::identity(n).scale_real(1.0 / n as f64)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.0
    }

    /// Returns `(|tr - 1|, max(0, -lambda_min))`.
    pub fn residuals(&self) -> Result<(f64, f64)> {
        Ok(((self.0.trace_real() - 1.0).abs(), (-self.0.min_eigenvalue()?).max(0.0)))
    }

    pub fn check(&self, tol: &TolerancePolicy) -> Result<()> {
        let (tr, psd) = self.residuals()?;
        if tr > tol.eps_eq || psd > tol.eps_psd {
            return Err(Error::InvalidModel(format!(
                "state has trace residual {tr:e} and negativity {psd:e}"
            )));
        }
        Ok(())
    }
}

/// Alice and Bob POVM families on a common space, plus a state.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteModel {
    pub scenario: MeasurementScenario,
    pub dim: usize,
    pub alice: POVMFamily,
    pub bob: POVMFamily,
    pub state: DensityOperator,
}

impl BipartiteModel {
    /// Structural checks only: shapes, dimensions and scenario agreement.
    pub fn new(
        scenario: MeasurementScenario,
        alice: POVMFamily,
        bob: POVMFamily,
        state: DensityOperator,
    ) -> Result<Self> {
        let dim = state.dim();
        if alice.dim() != dim || bob.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "alice on {}, bob on {}, state on {dim}",
                alice.dim(),
                bob.dim()
            )));
        }
        if alice.outcome_counts() != scenario.alice_outcomes() {
            return Err(Error::InvalidModel(format!(
                "alice POVMs have outcome counts {:?}, scenario says {:?}",
                alice.outcome_counts(),
                scenario.alice_outcomes()
            )));
        }
        if bob.outcome_counts() != scenario.bob_outcomes() {
            return Err(Error::InvalidModel(format!(
                "bob POVMs have outcome counts {:?}, scenario says {:?}",
                bob.outcome_counts(),
                scenario.bob_outcomes()
            )));
        }
        Ok(Self {
            scenario,
            dim,
            alice,
            bob,
            state,
        })
    }

    /// Simultaneous unitary conjugation of every operator.
    pub fn conjugated(&self, u: &CMatrix) -> Self {
        let rho = HermitianMatrix::symmetrize(&(u * self.state.matrix().as_matrix()) * &u.adjoint());
        Self {
            scenario: self.scenario.clone(),
            dim: self.dim,
            alice: self.alice.conjugated(u),
            bob: self.bob.conjugated(u),
            state: DensityOperator::new(rho),
        }
    }

    /// The same model with Alice and Bob exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            scenario: self.scenario.swapped(),
            dim: self.dim,
            alice: self.bob.clone(),
            bob: self.alice.clone(),
            state: self.state.clone(),
        }
    }

    pub fn from_json_str(s: &str, tol: &TolerancePolicy) -> Result<Self> {
        let repr: ModelRepr = serde_json::from_str(s)?;
        repr.into_model(tol)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(ModelRepr::from_model(self)).expect("model serializes")
    }
}

/// JSON layout shared by bipartite and tensor-product models.
#[derive(Serialize, Deserialize)]
pub(crate) struct ModelRepr {
    pub dim: usize,
    pub scenario: MeasurementScenario,
    pub alice_povms: BTreeMap<String, Vec<CMatrix>>,
    pub bob_povms: BTreeMap<String, Vec<CMatrix>>,
    pub state: CMatrix,
}

pub(crate) fn povms_to_map(settings: &[Setting], family: &POVMFamily) -> BTreeMap<String, Vec<CMatrix>> {
    settings
        .iter()
        .enumerate()
        .map(|(x, s)| {
            (
                s.label.clone(),
                family.setting(x).iter().map(|e| e.as_matrix().clone()).collect(),
            )
        })
        .collect()
}

pub(crate) fn povms_from_map(
    dim: usize,
    settings: &[Setting],
    map: &BTreeMap<String, Vec<CMatrix>>,
    who: &str,
    tol: &TolerancePolicy,
) -> Result<POVMFamily> {
    if let Some(extra) = map.keys().find(|k| !settings.iter().any(|s| &s.label == *k)) {
        return Err(Error::InvalidModel(format!("{who} POVM for unknown setting {extra:?}")));
    }
    let mut elements = Vec::with_capacity(settings.len());
    for s in settings {
        let mats = map
            .get(&s.label)
            .ok_or_else(|| Error::InvalidModel(format!("{who} POVM for setting {:?} missing", s.label)))?;
        if mats.len() != s.outcomes {
            return Err(Error::InvalidModel(format!(
                "{who} setting {:?} declares {} outcomes but has {} elements",
                s.label,
                s.outcomes,
                mats.len()
            )));
        }
        elements.push(
            mats.iter()
                .map(|m| HermitianMatrix::new(m.clone(), tol))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    POVMFamily::new(dim, elements)
}

impl ModelRepr {
    fn from_model(m: &BipartiteModel) -> Self {
        Self {
            dim: m.dim,
            scenario: m.scenario.clone(),
            alice_povms: povms_to_map(&m.scenario.alice, &m.alice),
            bob_povms: povms_to_map(&m.scenario.bob, &m.bob),
            state: m.state.matrix().as_matrix().clone(),
        }
    }

    fn into_model(self, tol: &TolerancePolicy) -> Result<BipartiteModel> {
        let alice = povms_from_map(self.dim, &self.scenario.alice, &self.alice_povms, "alice", tol)?;
        let bob = povms_from_map(self.dim, &self.scenario.bob, &self.bob_povms, "bob", tol)?;
        let state = DensityOperator::new(HermitianMatrix::new(self.state, tol)?);
        if state.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "state has dimension {}, model declares {}",
                state.dim(),
                self.dim
            )));
        }
        BipartiteModel::new(self.scenario, alice, bob, state)
    }
}

/// Worst residual for one hypothesis of the model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub condition: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn residual(&self, condition: &str) -> Option<f64> {
        self.checks
            .iter()
            .find(|c| c.condition == condition)
            .map(|c| c.residual)
    }

    pub fn first_failure(&self) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| !c.pass)
    }
}

/// Checks positivity and completeness of both POVM families, the state, and
/// cross-commutation `[E^x_a, F^y_b] = 0`.
pub fn validate_model(m: &BipartiteModel, tol: &TolerancePolicy) -> Result<ValidationReport> {
    if m.alice.dim() != m.dim || m.bob.dim() != m.dim || m.state.dim() != m.dim {
        return Err(Error::DimensionMismatch(format!(
            "alice on {}, bob on {}, state on {}, model on {}",
            m.alice.dim(),
            m.bob.dim(),
            m.state.dim(),
            m.dim
        )));
    }
    let mut checks = Vec::new();
    let mut push = |condition: &str, residual: f64, threshold: f64| {
        checks.push(ConditionCheck {
            condition: condition.to_string(),
            residual,
            threshold,
            pass: residual <= threshold,
        })
    };
    push("alice_positivity", (-m.alice.min_eigenvalue()?).max(0.0), tol.eps_psd);
    push("alice_completeness", m.alice.completeness_residual(), tol.eps_eq);
    push("bob_positivity", (-m.bob.min_eigenvalue()?).max(0.0), tol.eps_psd);
    push("bob_completeness", m.bob.completeness_residual(), tol.eps_eq);
    let mut comm = 0.0_f64;
    for e in m.alice.elements() {
        for f in m.bob.elements() {
            comm = comm.max(e.commutator(f).norm_max());
        }
    }
    push("commutation", comm, tol.eps_eq);
    let (tr, neg) = m.state.residuals()?;
    push("state_trace", tr, tol.eps_eq);
    push("state_positivity", neg, tol.eps_psd);
    let pass = checks.iter().all(|c| c.pass);
    Ok(ValidationReport { checks, pass })
}

/// Joint outcome probabilities `p(a,b|x,y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior {
    scenario: MeasurementScenario,
    // table[x][y][a][b]
    table: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Behavior {
    /// Builds a behavior from `table[x][y][a][b]`, checking range,
    /// normalization and no-signalling at `eps_eq`.
    pub fn new(
        scenario: MeasurementScenario,
        table: Vec<Vec<Vec<Vec<f64>>>>,
        tol: &TolerancePolicy,
    ) -> Result<Self> {
        let b = Self::from_table_unchecked(scenario, table)?;
        b.check(tol)?;
        Ok(b)
    }

    fn from_table_unchecked(
        scenario: MeasurementScenario,
        table: Vec<Vec<Vec<Vec<f64>>>>,
    ) -> Result<Self> {
        let ok = table.len() == scenario.alice.len()
            && table.iter().zip(&scenario.alice).all(|(row, sx)| {
                row.len() == scenario.bob.len()
                    && row.iter().zip(&scenario.bob).all(|(block, sy)| {
                        block.len() == sx.outcomes && block.iter().all(|r| r.len() == sy.outcomes)
                    })
            });
        if !ok {
            return Err(Error::ScenarioMismatch("behavior table does not match scenario".into()));
        }
        Ok(Self { scenario, table })
    }

    fn check(&self, tol: &TolerancePolicy) -> Result<()> {
        let eps = tol.eps_eq;
        for (x, row) in self.table.iter().enumerate() {
            for (y, block) in row.iter().enumerate() {
                let mut total = 0.0;
                for &p in block.iter().flatten() {
                    if !(p >= -eps && p <= 1.0 + eps) {
                        return Err(Error::Consistency(format!(
                            "probability {p} outside [0,1] at setting ({x},{y})"
                        )));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > eps {
                    return Err(Error::Consistency(format!(
                        "probabilities at setting ({x},{y}) sum to {total}"
                    )));
                }
            }
        }
        let ns = self.no_signalling_residual();
        if ns > eps {
            return Err(Error::Consistency(format!("no-signalling violated by {ns:e}")));
        }
        Ok(())
    }

    pub fn scenario(&self) -> &MeasurementScenario {
        &self.scenario
    }

    /// `p(a,b|x,y)`.
    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.table[x][y][a][b]
    }

    /// `table[x][y][a][b]`.
    pub fn table(&self) -> &[Vec<Vec<Vec<f64>>>] {
        &self.table
    }

    /// `sum_b p(a,b|x,y)`.
    pub fn alice_marginal(&self, a: usize, x: usize, y: usize) -> f64 {
        self.table[x][y][a].iter().sum()
    }

    /// `sum_a p(a,b|x,y)`.
    pub fn bob_marginal(&self, b: usize, x: usize, y: usize) -> f64 {
        self.table[x][y].iter().map(|r| r[b]).sum()
    }

    pub fn no_signalling_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (x, sx) in self.scenario.alice.iter().enumerate() {
            for a in 0..sx.outcomes {
                let m0 = self.alice_marginal(a, x, 0);
                for y in 1..self.scenario.bob.len() {
                    worst = worst.max((self.alice_marginal(a, x, y) - m0).abs());
                }
            }
        }
        for (y, sy) in self.scenario.bob.iter().enumerate() {
            for b in 0..sy.outcomes {
                let m0 = self.bob_marginal(b, 0, y);
                for x in 1..self.scenario.alice.len() {
                    worst = worst.max((self.bob_marginal(b, x, y) - m0).abs());
                }
            }
        }
        worst
    }

    /// Largest entrywise difference; errors when the scenarios differ.
    pub fn max_abs_diff(&self, other: &Behavior) -> Result<f64> {
        if self.scenario.alice_outcomes() != other.scenario.alice_outcomes()
            || self.scenario.bob_outcomes() != other.scenario.bob_outcomes()
        {
            return Err(Error::ScenarioMismatch("behaviors have different shapes".into()));
        }
        Ok(self
            .table
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .zip(other.table.iter().flatten().flatten().flatten())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max))
    }

    /// `{"scenario":..., "table":{"x0":{"y0":[[p(0,0),p(0,1)],...]}}}`.
    pub fn to_json_value(&self) -> serde_json::Value {
        let mut table = serde_json::Map::new();
        for (x, sx) in self.scenario.alice.iter().enumerate() {
            let mut row = serde_json::Map::new();
            for (y, sy) in self.scenario.bob.iter().enumerate() {
                row.insert(sy.label.clone(), serde_json::json!(self.table[x][y]));
            }
            table.insert(sx.label.clone(), serde_json::Value::Object(row));
        }
        serde_json::json!({ "scenario": self.scenario, "table": table })
    }
}

/// Evaluates `p(a,b|x,y) = <rho, E^x_a F^y_b>` on a model that passes validation.
pub fn behavior(m: &BipartiteModel, tol: &TolerancePolicy) -> Result<Behavior> {
    let report = validate_model(m, tol)?;
    if let Some(c) = report.first_failure() {
        return Err(Error::ValidationFailed(format!(
            "{} residual {:e} exceeds {:e}",
            c.condition, c.residual, c.threshold
        )));
    }
    let rho = m.state.matrix().as_matrix();
    let mut table = Vec::with_capacity(m.alice.settings());
    for x in 0..m.alice.settings() {
        let rho_e: Vec<CMatrix> = m.alice.setting(x).iter().map(|e| rho * e.as_matrix()).collect();
        let mut row = Vec::with_capacity(m.bob.settings());
        for y in 0..m.bob.settings() {
            let mut block = Vec::with_capacity(rho_e.len());
            for re in &rho_e {
                let mut probs = Vec::with_capacity(m.bob.outcomes(y));
                for f in m.bob.setting(y) {
                    let p = trace_pairing(re, f.as_matrix())?;
                    if p.im.abs() > tol.eps_eq {
                        return Err(Error::Consistency(format!(
                            "probability has imaginary part {:e}",
                            p.im
                        )));
                    }
                    probs.push(p.re);
                }
                block.push(probs);
            }
            row.push(block);
        }
        table.push(row);
    }
    Behavior::new(m.scenario.clone(), table, tol)
}

/// `S = E_00 + E_01 + E_10 - E_11` with `E_xy = sum_ab (-1)^(a+b) p(a,b|x,y)`.
pub fn chsh_value(b: &Behavior) -> Result<f64> {
    if !b.scenario.is_chsh_shape() {
        return Err(Error::ScenarioMismatch(format!(
            "CHSH needs 2 settings with 2 outcomes per party, got alice {:?}, bob {:?}",
            b.scenario.alice_outcomes(),
            b.scenario.bob_outcomes()
        )));
    }
    let corr = |x: usize, y: usize| {
        b.prob(0, 0, x, y) - b.prob(0, 1, x, y) - b.prob(1, 0, x, y) + b.prob(1, 1, x, y)
    };
    Ok(corr(0, 0) + corr(0, 1) + corr(1, 0) - corr(1, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{self, ModelKind};
    use crate::matrixlab::kron;
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn chsh() -> BipartiteModel {
        generators::generate(&ModelKind::Chsh { obfuscate: false }, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap()
            .model
    }

    fn herm(m: CMatrix) -> HermitianMatrix {
        HermitianMatrix::symmetrize(m)
    }

    #[test]
    fn chsh_model_validates() {
        let r = validate_model(&chsh(), &tol()).unwrap();
        assert!(r.pass);
        assert!(r.checks.iter().all(|c| c.residual < 1e-12), "{r:?}");
    }

    #[test]
    fn shifted_diagonal_povm_passes() {
        let d = CMatrix::from_real_diagonal(&[0.1, -0.1]);
        let half = CMatrix::identity(2).scale_real(0.5);
        let e0 = herm(&half + &d);
        let e1 = herm(&half - &d);
        let scen = MeasurementScenario::labelled(&[2], &[2]).unwrap();
        let alice = POVMFamily::new(2, vec![vec![e0.clone(), e1.clone()]]).unwrap();
        let bob = POVMFamily::new(
            2,
            vec![vec![
                HermitianMatrix::from_real_diagonal(&[1.0, 0.0]),
                HermitianMatrix::from_real_diagonal(&[0.0, 1.0]),
            ]],
        )
        .unwrap();
        let m = BipartiteModel::new(scen, alice, bob, DensityOperator::maximally_mixed(2)).unwrap();
        let r = validate_model(&m, &tol()).unwrap();
        assert!(r.pass);
        assert_eq!(r.residual("alice_completeness").unwrap(), 0.0);
        assert_eq!(r.residual("commutation").unwrap(), 0.0);
    }

    #[test]
    fn perturbed_bob_breaks_commutation() {
        let mut m = chsh();
        let kick = CMatrix::from_real(4, 4, &{
            let mut v = [0.0; 16];
            v[1] = 1e-3;
            v[4] = 1e-3;
            v
        })
        .unwrap();
        let f0 = m.bob.element(0, 0).as_matrix() + &kick;
        let f1 = m.bob.element(0, 1).as_matrix() - &kick;
        let mut els: Vec<Vec<HermitianMatrix>> =
            (0..2).map(|y| m.bob.setting(y).to_vec()).collect();
        els[0] = vec![herm(f0), herm(f1)];
        m.bob = POVMFamily::new(4, els).unwrap();
        let r = validate_model(&m, &tol()).unwrap();
        assert!(!r.pass);
        let c = r.residual("commutation").unwrap();
        assert!(c > 1e-4 && c < 1e-2, "commutator {c:e}");
        assert!(r.residual("bob_completeness").unwrap() < 1e-12);
        assert!(matches!(behavior(&m, &tol()), Err(Error::ValidationFailed(_))));
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let scen = MeasurementScenario::labelled(&[1], &[1]).unwrap();
        let r = BipartiteModel::new(
            scen,
            POVMFamily::trivial(2),
            POVMFamily::trivial(3),
            DensityOperator::maximally_mixed(2),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn chsh_behavior_values() {
        let b = behavior(&chsh(), &tol()).unwrap();
        let want = (1.0 + std::f64::consts::FRAC_1_SQRT_2) / 4.0;
        assert!((b.prob(0, 0, 0, 0) - 0.426776695).abs() < 1e-9);
        assert!((b.prob(0, 0, 0, 0) - want).abs() < 1e-14);
        let s = chsh_value(&b).unwrap();
        assert!((s - 2.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn product_model_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ra = sampling::random_density(2, &mut rng);
        let rb = sampling::random_density(2, &mut rng);
        let e = sampling::random_povm(2, 2, &mut rng);
        let f = sampling::random_povm(2, 2, &mut rng);
        let id = CMatrix::identity(2);
        let alice = POVMFamily::new(4, vec![e.iter().map(|x| herm(kron(x, &id))).collect()]).unwrap();
        let bob = POVMFamily::new(4, vec![f.iter().map(|x| herm(kron(&id, x))).collect()]).unwrap();
        let rho = DensityOperator::new(herm(kron(&ra, &rb)));
        let m = BipartiteModel::new(MeasurementScenario::labelled(&[2], &[2]).unwrap(), alice, bob, rho)
            .unwrap();
        let b = behavior(&m, &tol()).unwrap();
        for a in 0..2 {
            for bb in 0..2 {
                let pa = trace_pairing(&ra, &e[a]).unwrap().re;
                let pb = trace_pairing(&rb, &f[bb]).unwrap().re;
                assert!((b.prob(a, bb, 0, 0) - pa * pb).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn maximally_mixed_reduces_to_normalized_trace() {
        let mut m = generators::generate(
            &ModelKind::hidden_tensor(2, 3),
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap()
        .model;
        m.state = DensityOperator::maximally_mixed(6);
        let b = behavior(&m, &tol()).unwrap();
        let p = trace_pairing(m.alice.element(1, 0), m.bob.element(0, 1)).unwrap().re / 6.0;
        assert!((b.prob(0, 1, 1, 0) - p).abs() < 1e-14);
    }

    #[test]
    fn chsh_on_hand_built_behaviors() {
        let scen = MeasurementScenario::labelled(&[2, 2], &[2, 2]).unwrap();
        let det = vec![vec![vec![vec![1.0, 0.0], vec![0.0, 0.0]]; 2]; 2];
        let b = Behavior::new(scen.clone(), det, &tol()).unwrap();
        assert_eq!(chsh_value(&b).unwrap(), 2.0);
        let unif = vec![vec![vec![vec![0.25; 2]; 2]; 2]; 2];
        let b = Behavior::new(scen, unif, &tol()).unwrap();
        assert_eq!(chsh_value(&b).unwrap(), 0.0);
        let wrong = MeasurementScenario::labelled(&[3, 2], &[2, 2]).unwrap();
        let t = vec![vec![vec![vec![1.0 / 6.0; 2]; 3]; 2], vec![vec![vec![0.25; 2]; 2]; 2]];
        let b = Behavior::new(wrong, t, &tol()).unwrap();
        assert!(matches!(chsh_value(&b), Err(Error::ScenarioMismatch(_))));
    }

    #[test]
    fn behavior_rejects_signalling_tables() {
        let scen = MeasurementScenario::labelled(&[2], &[2, 2]).unwrap();
        let t = vec![vec![
            vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            vec![vec![0.0, 0.0], vec![0.5, 0.5]],
        ]];
        assert!(matches!(Behavior::new(scen, t, &tol()), Err(Error::Consistency(_))));
    }

    #[test]
    fn model_json_round_trip() {
        let m = chsh();
        let s = serde_json::to_string(&m.to_json_value()).unwrap();
        let back = BipartiteModel::from_json_str(&s, &tol()).unwrap();
        assert_eq!(back, m);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["scenario"]["alice"][0][0], "x0");
        assert_eq!(v["scenario"]["alice"][0][1], 2);
        assert_eq!(v["alice_povms"]["x1"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn model_json_rejects_bad_shapes() {
        let m = chsh();
        let mut v = m.to_json_value();
        v["alice_povms"]["x0"].as_array_mut().unwrap().pop();
        assert!(BipartiteModel::from_json_str(&v.to_string(), &tol()).is_err());
        let mut v = m.to_json_value();
        v["scenario"]["bob"][0][1] = serde_json::json!(0);
        assert!(BipartiteModel::from_json_str(&v.to_string(), &tol()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn model_for(seed: u64) -> BipartiteModel {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kind = generators::corpus_kind(seed as usize % 3, &mut rng);
            generators::generate(&kind, &mut rng).unwrap().model
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn generated_behaviors_satisfy_invariants(seed in 0u64..10_000) {
                let m = model_for(seed);
                let b = behavior(&m, &tol()).unwrap();
                prop_assert!(b.no_signalling_residual() <= 1e-9);
                for block in b.table().iter().flatten() {
                    let s: f64 = block.iter().flatten().sum();
                    prop_assert!((s - 1.0).abs() <= 1e-9);
                }
            }

            #[test]
            fn behavior_is_unitarily_invariant(seed in 0u64..10_000) {
                let m = model_for(seed);
                let u = sampling::random_unitary(m.dim, &mut ChaCha8Rng::seed_from_u64(seed ^ 0xabc));
                let b0 = behavior(&m, &tol()).unwrap();
                let b1 = behavior(&m.conjugated(&u), &tol()).unwrap();
                prop_assert!(b0.max_abs_diff(&b1).unwrap() <= 1e-10);
            }

            #[test]
            fn relabelling_outcomes_permutes_table(seed in 0u64..10_000) {
                let m = model_for(seed);
                let k = m.alice.outcomes(0);
                let perm: Vec<usize> = (0..k).rev().collect();
                let mut p = m.clone();
                p.alice = m.alice.permute_outcomes(0, &perm);
                let b0 = behavior(&m, &tol()).unwrap();
                let b1 = behavior(&p, &tol()).unwrap();
                for y in 0..m.bob.settings() {
                    for (a_new, &a_old) in perm.iter().enumerate() {
                        for b in 0..m.bob.outcomes(y) {
                            prop_assert_eq!(b1.prob(a_new, b, 0, y), b0.prob(a_old, b, 0, y));
                        }
                    }
                }
            }
        }
    }
}
