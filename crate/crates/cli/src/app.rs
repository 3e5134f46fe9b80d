//! Argument parsing and subcommand dispatch for the `atomexp` binary.

use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use atomexp::condexp::ExpectationReport;
use atomexp::generators::{self, ModelKind, ScenarioShape};
use atomexp::tensorize::cross_check;
use atomexp::{
    behavior, build_assemblage, chsh_value, commutant, expectation_onto, generated_algebra,
    tensorize, validate_model, verify_reproduction, verify_sandwich, verify_tensor_model,
    verify_x_independence, wedderburn, BipartiteModel, CMatrix, Error, Side, TensorOptions,
    TolerancePolicy,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::pipeline::{run_pipeline, PipelineOptions};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "atomexp", version, about = "Commuting-operator models: algebras, steering and tensorization")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "ATOMEXP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the output to a file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Multiplies every numerical tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tol_scale: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a model as JSON.
    Gen(GenArgs),
    /// Check positivity, completeness, commutation and the state.
    Validate(InputArgs),
    /// Print p(a,b|x,y).
    Behavior(InputArgs),
    /// Structure of the algebra generated by one party's elements.
    Algebra(AlgebraArgs),
    /// Conditional expectation onto a party's algebra and its invariants.
    Expectation(PartyArgs),
    /// Steering assemblage built from Bob's algebra.
    Steer(InputArgs),
    /// Rewrite the model on a tensor-product space.
    Tensorize(TensorArgs),
    /// Run every stage and report residuals.
    Pipeline(TensorArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    HiddenTensor,
    DirectSum,
    Chsh,
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PartyArg {
    Alice,
    Bob,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 2)]
    pub dim_a: usize,
    #[arg(long, default_value_t = 2)]
    pub dim_b: usize,
    /// Direct-sum blocks as `dAxdB` pairs, e.g. `2x2,1x3`.
    #[arg(long, default_value = "2x2,1x3")]
    pub blocks: String,
    /// Classical model dimension.
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Number of hidden-variable values in a classical model.
    #[arg(long, default_value_t = 2)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub settings: usize,
    #[arg(long, default_value_t = 2)]
    pub outcomes: usize,
    #[arg(long)]
    pub product_state: bool,
    /// Skip the random unitary conjugation.
    #[arg(long)]
    pub plain: bool,
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Model JSON file; `-` or omitted reads stdin.
    pub model: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AlgebraArgs {
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bob")]
    pub party: PartyArg,
    /// Also compute the commutant.
    #[arg(long)]
    pub commutant: bool,
    /// Also compute the block decomposition.
    #[arg(long)]
    pub wedderburn: bool,
}

#[derive(Args, Debug)]
pub struct PartyArgs {
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bob")]
    pub party: PartyArg,
    /// Random inputs for the positivity checks.
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct TensorArgs {
    pub model: Option<PathBuf>,
    /// Extend both factors to the original dimension.
    #[arg(long)]
    pub padding: bool,
    /// Party whose algebra supplies the decomposition.
    #[arg(long, value_enum, default_value = "alice")]
    pub side: PartyArg,
    /// Tensorize from both sides and compare the behaviors.
    #[arg(long)]
    pub cross_check: bool,
}

/// Text to emit plus the process exit code.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub output: String,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

type CmdResult = std::result::Result<Outcome, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: e.to_string(),
    }
}

fn failed(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_FAIL,
        message: e.to_string(),
    }
}

fn outcome(pass: bool, output: String) -> CmdResult {
    Ok(Outcome {
        code: if pass { EXIT_PASS } else { EXIT_FAIL },
        output,
    })
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

fn read_input(path: Option<&Path>) -> std::result::Result<String, Failure> {
    match path {
        Some(p) if p != Path::new("-") => {
            fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))
        }
        _ => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| usage(format!("cannot read stdin: {e}")))?;
            Ok(s)
        }
    }
}

fn load_model(path: Option<&Path>, tol: &TolerancePolicy) -> std::result::Result<BipartiteModel, Failure> {
    let text = read_input(path)?;
    BipartiteModel::from_json_str(&text, tol).map_err(|e| usage(format!("cannot parse model: {e}")))
}

fn parse_blocks(s: &str) -> std::result::Result<Vec<(usize, usize)>, Failure> {
    s.split(',')
        .map(|b| {
            let (x, y) = b
                .trim()
                .split_once('x')
                .ok_or_else(|| usage(format!("block {b:?} is not of the form AxB")))?;
            let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| usage(format!("block {b:?}: {e}")));
            Ok((parse(x)?, parse(y)?))
        })
        .collect()
}

fn kind_from_args(g: &GenArgs) -> std::result::Result<ModelKind, Failure> {
    let shape = ScenarioShape::uniform(g.settings, g.outcomes);
    Ok(match g.kind {
        KindArg::HiddenTensor => ModelKind::HiddenTensor {
            dim_a: g.dim_a,
            dim_b: g.dim_b,
            shape,
            product_state: g.product_state,
            obfuscate: !g.plain,
        },
        KindArg::DirectSum => ModelKind::DirectSum {
            blocks: parse_blocks(&g.blocks)?,
            shape,
            obfuscate: !g.plain,
        },
        KindArg::Chsh => ModelKind::Chsh { obfuscate: !g.plain },
        KindArg::Classical => ModelKind::Classical {
            dim: g.dim,
            hidden_values: g.hidden,
            shape,
        },
    })
}

fn party_generators(m: &BipartiteModel, p: PartyArg) -> Vec<CMatrix> {
    let fam = match p {
        PartyArg::Alice => &m.alice,
        PartyArg::Bob => &m.bob,
    };
    fam.elements().map(|e| e.as_matrix().clone()).collect()
}

fn side(p: PartyArg) -> Side {
    match p {
        PartyArg::Alice => Side::Alice,
        PartyArg::Bob => Side::Bob,
    }
}

fn expectation_text(r: &ExpectationReport) -> String {
    format!(
        "idempotence      {:.3e}\nunitality        {:.3e}\npositivity min   {:.3e}\nchoi min         {:.3e}\nbimodule         {:.3e}\ntrace symmetry   {:.3e}\ncontraction      {:.3e}\n",
        r.idempotence,
        r.unitality,
        r.positivity_min_eigenvalue,
        r.choi_min_eigenvalue,
        r.bimodule,
        r.trace_symmetry,
        r.contraction
    )
}

/// Runs one parsed command line.
pub fn execute(cli: &Cli) -> CmdResult {
    let tol = TolerancePolicy::scaled(cli.tol_scale).map_err(usage)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    match &cli.command {
        Command::Gen(g) => {
            let kind = kind_from_args(g)?;
            let generated = generators::generate(&kind, &mut rng).map_err(usage)?;
            outcome(true, pretty(&generated.model.to_json_value()))
        }
        Command::Validate(a) => {
            let m = load_model(a.model.as_deref(), &tol)?;
            let r = validate_model(&m, &tol).map_err(failed)?;
            let text = if cli.json {
                pretty(&serde_json::to_value(&r).expect("json"))
            } else {
                let mut s: String = r
                    .checks
                    .iter()
                    .map(|c| {
                        format!(
                            "{:<18} {:.3e} (threshold {:.1e}) {}\n",
                            c.condition,
                            c.residual,
                            c.threshold,
                            if c.pass { "ok" } else { "FAIL" }
                        )
                    })
                    .collect();
                s.push_str(if r.pass { "PASS\n" } else { "FAIL\n" });
                s
            };
            outcome(r.pass, text)
        }
        Command::Behavior(a) => {
            let m = load_model(a.model.as_deref(), &tol)?;
            let b = behavior(&m, &tol).map_err(failed)?;
            let chsh = chsh_value(&b).ok();
            let text = if cli.json {
                let mut v = b.to_json_value();
                if let Some(c) = chsh {
                    v["chsh"] = json!(c);
                }
                pretty(&v)
            } else {
                let sc = b.scenario();
                let mut s = String::new();
                for (x, sx) in sc.alice.iter().enumerate() {
                    for (y, sy) in sc.bob.iter().enumerate() {
                        for a in 0..sx.outcomes {
                            for bo in 0..sy.outcomes {
                                s.push_str(&format!(
                                    "p({a},{bo}|{},{}) = {:.12}\n",
                                    sx.label,
                                    sy.label,
                                    b.prob(a, bo, x, y)
                                ));
                            }
                        }
                    }
                }
                if let Some(c) = chsh {
                    s.push_str(&format!("chsh = {c:.12}\n"));
                }
                s
            };
            outcome(true, text)
        }
        Command::Algebra(a) => {
            let m = load_model(a.model.as_deref(), &tol)?;
            let gens = party_generators(&m, a.party);
            let alg = generated_algebra(m.dim, &gens, &tol).map_err(failed)?;
            let mut v = json!({ "dim": m.dim, "algebra_dim": alg.algebra_dim() });
            let mut text = format!("algebra dimension {} on C^{}\n", alg.algebra_dim(), m.dim);
            if a.commutant {
                let c = commutant(m.dim, alg.basis(), &tol).map_err(failed)?;
                v["commutant"] = json!({ "dim": c.algebra_dim(), "basis": c.basis() });
                text.push_str(&format!("commutant dimension {}\n", c.algebra_dim()));
            }
            if a.wedderburn {
                let w = wedderburn(&alg, &tol, &mut rng).map_err(failed)?;
                let s = w.summary();
                text.push_str(&format!("center dimension {}\n", s.center_dim));
                for b in &s.blocks {
                    text.push_str(&format!("block M_{} (x) I_{}\n", b.n, b.m));
                }
                v["wedderburn"] = serde_json::to_value(&s).expect("json");
                v["central_projections"] = json!(w
                    .blocks
                    .iter()
                    .map(|b| b.central_projection.as_matrix().clone())
                    .collect::<Vec<_>>());
            }
            outcome(true, if cli.json { pretty(&v) } else { text })
        }
        Command::Expectation(a) => {
            let m = load_model(a.model.as_deref(), &tol)?;
            let gens = party_generators(&m, a.party);
            let alg = generated_algebra(m.dim, &gens, &tol).map_err(failed)?;
            let phi = expectation_onto(&alg, &tol).map_err(failed)?;
            let r = phi.check_invariants(a.samples, &mut rng).map_err(failed)?;
            let (inner, outer) = match a.party {
                PartyArg::Bob => (&m.alice, &m.bob),
                PartyArg::Alice => (&m.bob, &m.alice),
            };
            let sandwich = verify_sandwich(&phi, inner, outer, &tol).map_err(failed)?;
            let pass = r.passes(&tol) && sandwich.pass;
            let text = if cli.json {
                pretty(&json!({ "invariants": r, "sandwich": sandwich, "pass": pass }))
            } else {
                format!(
                    "{}sandwich containment {:.3e}, commutation {:.3e}\n{}\n",
                    expectation_text(&r),
                    sandwich.containment_residual,
                    sandwich.commutation_residual,
                    if pass { "PASS" } else { "FAIL" }
                )
            };
            outcome(pass, text)
        }
        Command::Steer(a) => {
            let m = load_model(a.model.as_deref(), &tol)?;
            let b = behavior(&m, &tol).map_err(failed)?;
            let alg = generated_algebra(m.dim, &party_generators(&m, PartyArg::Bob), &tol).map_err(failed)?;
            let phi = expectation_onto(&alg, &tol).map_err(failed)?;
            let s = build_assemblage(&m, &phi, &tol).map_err(failed)?;
            let iv = verify_x_independence(&s);
            let v = verify_reproduction(&s, &m, &b).map_err(failed)?;
            let pass = iv <= tol.eps_eq && v <= tol.eps_eq;
            let text = if cli.json {
                pretty(&s.to_json_value(iv, v))
            } else {
                let mut t = String::new();
                for (x, row) in s.members().iter().enumerate() {
                    for (a, sigma) in row.iter().enumerate() {
                        t.push_str(&format!(
                            "tr sigma[{}][a{a}] = {:.12}\n",
                            s.settings()[x].label,
                            sigma.trace_real()
                        ));
                    }
                }
                t.push_str(&format!("iv residual {iv:.3e}\nv residual  {v:.3e}\n"));
                t.push_str(if pass { "PASS\n" } else { "FAIL\n" });
                t
            };
            outcome(pass, text)
        }
        Command::Tensorize(a) => {
            let m = load_model(a.model.as_deref(), &tol)?;
            let b = behavior(&m, &tol).map_err(failed)?;
            let opts = TensorOptions {
                side: side(a.side),
                padding: a.padding,
            };
            let t = tensorize(&m, opts, &tol, &mut rng).map_err(failed)?;
            let residual = verify_tensor_model(&t, &b).map_err(failed)?;
            let cross = if a.cross_check {
                Some(cross_check(&m, a.padding, &tol, &mut rng).map_err(failed)?.behavior_difference)
            } else {
                None
            };
            let pass = residual <= tol.tensor_residual && cross.is_none_or(|d| d <= tol.tensor_residual);
            let text = if cli.json {
                let mut v = t.to_json_value();
                v["residual"] = json!(residual);
                if let Some(d) = cross {
                    v["cross_check"] = json!(d);
                }
                pretty(&v)
            } else {
                let blocks: Vec<String> = t.blocks.iter().map(|(n, m)| format!("({n},{m})")).collect();
                let mut s = format!(
                    "factors {}x{}, blocks {}\nresidual {residual:.3e}\n",
                    t.dim_a,
                    t.dim_b,
                    blocks.join(" ")
                );
                if let Some(d) = cross {
                    s.push_str(&format!("cross-check {d:.3e}\n"));
                }
                s.push_str(if pass { "PASS\n" } else { "FAIL\n" });
                s
            };
            outcome(pass, text)
        }
        Command::Pipeline(a) => {
            let m = load_model(a.model.as_deref(), &tol)?;
            let opts = PipelineOptions {
                tensor: TensorOptions {
                    side: side(a.side),
                    padding: a.padding,
                },
                tol,
                seed: cli.seed,
            };
            let r = run_pipeline(&m, &opts);
            let text = if cli.json { pretty(&r.to_json_value()) } else { r.render_text() };
            outcome(r.pass, text)
        }
    }
}

/// Parses `args`, runs the command and writes its output. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match execute(&cli) {
        Ok(o) => {
            if let Some(path) = &cli.out {
                if let Err(e) = fs::write(path, &o.output) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return EXIT_USAGE;
                }
            } else {
                print!("{}", o.output);
            }
            if o.code == EXIT_FAIL {
                eprintln!("verification failed");
            }
            o.code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        failed(e)
    }
}
