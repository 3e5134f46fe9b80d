//! End-to-end verification of a model, stage by stage.

use std::collections::BTreeMap;
use std::time::Instant;

use atomexp::steering::AssemblageCheck;
use atomexp::tensorize::TensorCheck;
use atomexp::vnalg::{AlgebraSummary, BlockShape};
use atomexp::{
    behavior, build_assemblage, chsh_value, expectation_onto, generated_algebra, tensorize,
    validate_model, verify_reproduction, verify_sandwich, verify_tensor_model,
    verify_x_independence, wedderburn, BipartiteModel, CMatrix, SandwichReport, TensorOptions,
    TolerancePolicy, ValidationReport,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const STAGES: [&str; 6] = ["validation", "algebra", "expectation", "sandwich", "assemblage", "tensorize"];

#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions {
    pub tensor: TensorOptions,
    pub tol: TolerancePolicy,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            tensor: TensorOptions::default(),
            tol: TolerancePolicy::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageOutcome {
    pub stage: String,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssemblageResiduals {
    pub iv: f64,
    pub v: f64,
    pub negativity: f64,
    pub barycenter_trace: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TensorSummary {
    #[serde(rename = "dimA")]
    pub dim_a: usize,
    #[serde(rename = "dimB")]
    pub dim_b: usize,
    pub blocks: Vec<BlockShape>,
    pub residual: f64,
    pub invariants: TensorCheck,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChshValues {
    pub before: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub after: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub pass: bool,
    pub failed_stage: Option<String>,
    pub stages: Vec<StageOutcome>,
    pub validation: Option<ValidationReport>,
    /// Structure of the algebra generated by Bob's elements.
    pub algebra: Option<AlgebraSummary>,
    pub sandwich: Option<SandwichReport>,
    pub assemblage: Option<AssemblageResiduals>,
    pub tensor: Option<TensorSummary>,
    pub chsh: Option<ChshValues>,
    pub timing_ms: BTreeMap<String, f64>,
}

impl PipelineReport {
    fn new() -> Self {
        Self {
            pass: false,
            failed_stage: None,
            stages: Vec::new(),
            validation: None,
            algebra: None,
            sandwich: None,
            assemblage: None,
            tensor: None,
            chsh: None,
            timing_ms: BTreeMap::new(),
        }
    }

    fn record(&mut self, stage: &str, started: Instant, result: Result<(), String>) -> bool {
        self.timing_ms
            .insert(stage.to_string(), started.elapsed().as_secs_f64() * 1e3);
        let (status, message) = match result {
            Ok(()) => (StageStatus::Pass, None),
            Err(msg) => (StageStatus::Fail, Some(msg)),
        };
        if status == StageStatus::Fail && self.failed_stage.is_none() {
            self.failed_stage = Some(stage.to_string());
        }
        self.stages.push(StageOutcome {
            stage: stage.to_string(),
            status,
            message,
        });
        status == StageStatus::Pass
    }

    fn skip_remaining(&mut self) {
        for s in STAGES {
            if !self.stages.iter().any(|o| o.stage == s) {
                self.stages.push(StageOutcome {
                    stage: s.to_string(),
                    status: StageStatus::Skipped,
                    message: None,
                });
            }
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    /// The report without wall-clock fields.
    pub fn deterministic_json(&self) -> serde_json::Value {
        let mut v = self.to_json_value();
        v.as_object_mut().expect("object").remove("timing_ms");
        v
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for s in &self.stages {
            let status = match s.status {
                StageStatus::Pass => "pass",
                StageStatus::Fail => "FAIL",
                StageStatus::Skipped => "skipped",
            };
            out.push_str(&format!("{:<12} {status}", s.stage));
            if let Some(ms) = self.timing_ms.get(&s.stage) {
                out.push_str(&format!("  ({ms:.1} ms)"));
            }
            if let Some(m) = &s.message {
                out.push_str(&format!("  {m}"));
            }
            out.push('\n');
        }
        if let Some(v) = &self.validation {
            for c in &v.checks {
                out.push_str(&format!("  {:<18} {:.3e}\n", c.condition, c.residual));
            }
        }
        if let Some(a) = &self.algebra {
            let blocks: Vec<String> = a.blocks.iter().map(|b| format!("({},{})", b.n, b.m)).collect();
            out.push_str(&format!(
                "bob algebra: dim {}, commutant {}, center {}, blocks {}\n",
                a.algebra_dim,
                a.commutant_dim,
                a.center_dim,
                blocks.join(" ")
            ));
        }
        if let Some(s) = &self.sandwich {
            out.push_str(&format!(
                "sandwich: containment {:.3e}, commutation {:.3e}\n",
                s.containment_residual, s.commutation_residual
            ));
        }
        if let Some(a) = &self.assemblage {
            out.push_str(&format!("assemblage: iv {:.3e}, v {:.3e}\n", a.iv, a.v));
        }
        if let Some(t) = &self.tensor {
            let blocks: Vec<String> = t.blocks.iter().map(|b| format!("({},{})", b.n, b.m)).collect();
            out.push_str(&format!(
                "tensor: {}x{}, blocks {}, residual {:.3e}\n",
                t.dim_a,
                t.dim_b,
                blocks.join(" "),
                t.residual
            ));
        }
        if let Some(c) = &self.chsh {
            match c.after {
                Some(after) => out.push_str(&format!("chsh: {:.12} before, {after:.12} after\n", c.before)),
                None => out.push_str(&format!("chsh: {:.12}\n", c.before)),
            }
        }
        out.push_str(if self.pass { "PASS\n" } else { "FAIL\n" });
        out
    }
}

/// Runs every stage in order, stopping at the first failure.
pub fn run_pipeline(m: &BipartiteModel, opts: &PipelineOptions) -> PipelineReport {
    let tol = &opts.tol;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = PipelineReport::new();

    let t0 = Instant::now();
    let validated = validate_model(m, tol).map_err(|e| e.to_string()).and_then(|v| {
        let first = v.first_failure().map(|c| {
            format!("{} residual {:.3e} exceeds {:.3e}", c.condition, c.residual, c.threshold)
        });
        report.validation = Some(v);
        match first {
            Some(msg) => Err(msg),
            None => behavior(m, tol).map_err(|e| e.to_string()),
        }
    });
    let b = match validated {
        Ok(b) => {
            report.record("validation", t0, Ok(()));
            b
        }
        Err(msg) => {
            report.record("validation", t0, Err(msg));
            report.skip_remaining();
            return report;
        }
    };
    let chsh_before = chsh_value(&b).ok();

    let t0 = Instant::now();
    let gens: Vec<CMatrix> = m.bob.elements().map(|f| f.as_matrix().clone()).collect();
    let alg = match generated_algebra(m.dim, &gens, tol)
        .and_then(|alg| wedderburn(&alg, tol, &mut rng).map(|w| (alg, w)))
    {
        Ok((alg, w)) => {
            report.algebra = Some(w.summary());
            report.record("algebra", t0, Ok(()));
            alg
        }
        Err(e) => {
            report.record("algebra", t0, Err(e.to_string()));
            report.skip_remaining();
            return report;
        }
    };

    let t0 = Instant::now();
    let phi = match expectation_onto(&alg, tol) {
        Ok(phi) => {
            report.record("expectation", t0, Ok(()));
            phi
        }
        Err(e) => {
            report.record("expectation", t0, Err(e.to_string()));
            report.skip_remaining();
            return report;
        }
    };

    let t0 = Instant::now();
    let sandwich = verify_sandwich(&phi, &m.alice, &m.bob, tol);
    let ok = match sandwich {
        Ok(s) => {
            let pass = s.pass;
            report.sandwich = Some(s);
            report.record(
                "sandwich",
                t0,
                if pass { Ok(()) } else { Err("sandwich residual above threshold".into()) },
            )
        }
        Err(e) => report.record("sandwich", t0, Err(e.to_string())),
    };
    if !ok {
        report.skip_remaining();
        return report;
    }

    let t0 = Instant::now();
    let assembled = build_assemblage(m, &phi, tol).and_then(|s| {
        let check: AssemblageCheck = s.check_invariants()?;
        let v = verify_reproduction(&s, m, &b)?;
        Ok((verify_x_independence(&s), v, check))
    });
    let ok = match assembled {
        Ok((iv, v, check)) => {
            let pass = iv <= tol.eps_eq && v <= tol.eps_eq && check.passes(tol);
            report.assemblage = Some(AssemblageResiduals {
                iv,
                v,
                negativity: check.negativity,
                barycenter_trace: check.barycenter_trace,
                pass,
            });
            report.record(
                "assemblage",
                t0,
                if pass { Ok(()) } else { Err("assemblage residual above threshold".into()) },
            )
        }
        Err(e) => report.record("assemblage", t0, Err(e.to_string())),
    };
    if !ok {
        report.skip_remaining();
        return report;
    }

    let t0 = Instant::now();
    let tensored = tensorize(m, opts.tensor, tol, &mut rng).and_then(|t| {
        let residual = verify_tensor_model(&t, &b)?;
        let invariants = t.check_invariants()?;
        let after = if chsh_before.is_some() {
            Some(chsh_value(&t.behavior(tol)?)?)
        } else {
            None
        };
        Ok((t, residual, invariants, after))
    });
    match tensored {
        Ok((t, residual, invariants, after)) => {
            let pass = residual <= tol.tensor_residual && invariants.passes(tol);
            let mut blocks: Vec<BlockShape> = t.blocks.iter().map(|&(n, m)| BlockShape { n, m }).collect();
            blocks.sort_unstable();
            report.tensor = Some(TensorSummary {
                dim_a: t.dim_a,
                dim_b: t.dim_b,
                blocks,
                residual,
                invariants,
                pass,
            });
            report.chsh = chsh_before.map(|before| ChshValues { before, after });
            report.record(
                "tensorize",
                t0,
                if pass { Ok(()) } else { Err("tensor residual above threshold".into()) },
            );
        }
        Err(e) => {
            report.chsh = chsh_before.map(|before| ChshValues { before, after: None });
            report.record("tensorize", t0, Err(e.to_string()));
        }
    }
    report.pass = report.failed_stage.is_none();
    report
}
