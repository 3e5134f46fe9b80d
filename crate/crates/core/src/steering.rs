//! Steering assemblages `sigma^x_a = Phi*(sqrt(E^x_a) rho sqrt(E^x_a))`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::condexp::{verify_sandwich, ConditionalExpectation};
use crate::error::{Error, Result};
use crate::matrixlab::{psd_sqrt, trace_pairing, CMatrix, HermitianMatrix, TolerancePolicy};
use crate::scenario::{validate_model, Behavior, BipartiteModel, Setting};

#[derive(Clone, Debug, PartialEq)]
pub struct SteeringAssemblage {
    settings: Vec<Setting>,
    // members[x][a]
    members: Vec<Vec<HermitianMatrix>>,
    barycenter: HermitianMatrix,
}

/// Residuals of the assemblage invariants.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AssemblageCheck {
    /// `-min eigenvalue` over all members, clamped at zero.
    pub negativity: f64,
    pub x_independence: f64,
    pub barycenter_trace: f64,
}

impl AssemblageCheck {
    pub fn passes(&self, tol: &TolerancePolicy) -> bool {
        self.negativity <= tol.eps_psd && self.x_independence <= tol.eps_eq && self.barycenter_trace <= tol.eps_eq
    }
}

impl SteeringAssemblage {
    /// Structural checks only: member counts follow `settings`, all matrices
    /// share the barycenter's dimension.
    pub fn from_members(
        settings: Vec<Setting>,
        members: Vec<Vec<HermitianMatrix>>,
        barycenter: HermitianMatrix,
    ) -> Result<Self> {
        if settings.len() != members.len()
            || settings.iter().zip(&members).any(|(s, m)| s.outcomes != m.len())
        {
            return Err(Error::ScenarioMismatch("assemblage members do not match settings".into()));
        }
        let n = barycenter.dim();
        if members.iter().flatten().any(|s| s.dim() != n) {
            return Err(Error::DimensionMismatch(format!(
                "assemblage members must all be {n}x{n}"
            )));
        }
        Ok(Self {
            settings,
            members,
            barycenter,
        })
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn dim(&self) -> usize {
        self.barycenter.dim()
    }

    pub fn member(&self, x: usize, a: usize) -> &HermitianMatrix {
        &self.members[x][a]
    }

    pub fn members(&self) -> &[Vec<HermitianMatrix>] {
        &self.members
    }

    pub fn barycenter(&self) -> &HermitianMatrix {
        &self.barycenter
    }

    pub fn check_invariants(&self) -> Result<AssemblageCheck> {
        let mut negativity = 0.0_f64;
        for s in self.members.iter().flatten() {
            negativity = negativity.max(-s.min_eigenvalue()?);
        }
        Ok(AssemblageCheck {
            negativity,
            x_independence: verify_x_independence(self),
            barycenter_trace: (self.barycenter.trace_real() - 1.0).abs(),
        })
    }

    /// `{"barycenter":..., "members":{"x0":{"a0":...}}, "residuals":{"iv":..., "v":...}}`.
    pub fn to_json_value(&self, iv: f64, v: f64) -> serde_json::Value {
        let mut members = serde_json::Map::new();
        for (s, row) in self.settings.iter().zip(&self.members) {
            let outcomes: BTreeMap<String, &CMatrix> = row
                .iter()
                .enumerate()
                .map(|(a, m)| (format!("a{a}"), m.as_matrix()))
                .collect();
            members.insert(s.label.clone(), serde_json::to_value(outcomes).expect("matrices serialize"));
        }
        serde_json::json!({
            "barycenter": self.barycenter.as_matrix(),
            "members": members,
            "residuals": { "iv": iv, "v": v },
        })
    }
}

/// Builds `sigma^x_a = Phi*(sqrt(E^x_a) rho sqrt(E^x_a))` with barycenter `Phi*(rho)`.
///
/// Requires a valid model and Bob's elements inside the range of `phi`, with
/// that range commuting with Alice's elements.
pub fn build_assemblage(
    m: &BipartiteModel,
    phi: &ConditionalExpectation,
    tol: &TolerancePolicy,
) -> Result<SteeringAssemblage> {
    let report = validate_model(m, tol)?;
    if let Some(c) = report.first_failure() {
        return Err(Error::ValidationFailed(format!(
            "{} residual {:e} exceeds {:e}",
            c.condition, c.residual, c.threshold
        )));
    }
    let sandwich = verify_sandwich(phi, &m.alice, &m.bob, tol)?;
    if !sandwich.pass {
        return Err(Error::SandwichViolation {
            containment: sandwich.containment_residual,
            commutation: sandwich.commutation_residual,
        });
    }
    let rho = m.state.matrix().as_matrix();
    let mut members = Vec::with_capacity(m.alice.settings());
    for x in 0..m.alice.settings() {
        let mut row = Vec::with_capacity(m.alice.outcomes(x));
        for e in m.alice.setting(x) {
            let s = psd_sqrt(e, tol)?;
            let mu = HermitianMatrix::symmetrize(&(s.as_matrix() * rho) * s.as_matrix());
            let sigma = phi.predual_hermitian(&mu)?;
            let min = sigma.min_eigenvalue()?;
            let threshold = -tol.eps_psd * sigma.norm_max().max(1.0);
            if min < threshold {
                return Err(Error::NotPositiveSemidefinite {
                    min_eigenvalue: min,
                    threshold,
                });
            }
            row.push(sigma);
        }
        members.push(row);
    }
    let barycenter = phi.predual_hermitian(m.state.matrix())?;
    SteeringAssemblage::from_members(m.scenario.alice.clone(), members, barycenter)
}

/// `max_x ||sum_a sigma^x_a - sigma||_max`.
pub fn verify_x_independence(s: &SteeringAssemblage) -> f64 {
    let n = s.dim();
    s.members
        .iter()
        .map(|row| {
            let sum = row
                .iter()
                .fold(CMatrix::zeros(n, n), |acc, m| &acc + m.as_matrix());
            (&sum - s.barycenter.as_matrix()).norm_max()
        })
        .fold(0.0, f64::max)
}

/// `max |tr(sigma^x_a F^y_b) - p(a,b|x,y)|` with `F` taken from `m.bob`.
pub fn verify_reproduction(s: &SteeringAssemblage, m: &BipartiteModel, b: &Behavior) -> Result<f64> {
    let alice_counts: Vec<usize> = s.settings.iter().map(|t| t.outcomes).collect();
    if alice_counts != b.scenario().alice_outcomes() || m.bob.outcome_counts() != b.scenario().bob_outcomes() {
        return Err(Error::ScenarioMismatch(
            "assemblage, Bob's POVMs and behavior have different shapes".into(),
        ));
    }
    if m.bob.dim() != s.dim() {
        return Err(Error::DimensionMismatch(format!(
            "assemblage on {}, Bob's POVMs on {}",
            s.dim(),
            m.bob.dim()
        )));
    }
    let mut worst = 0.0_f64;
    for (x, row) in s.members.iter().enumerate() {
        for (a, sigma) in row.iter().enumerate() {
            for y in 0..m.bob.settings() {
                for (bo, f) in m.bob.setting(y).iter().enumerate() {
                    let p = trace_pairing(sigma.as_matrix(), f.as_matrix())?;
                    worst = worst.max((p - b.prob(a, bo, x, y)).norm());
                }
            }
        }
    }
    Ok(worst)
}
