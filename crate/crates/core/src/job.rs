//! Batch jobs: JSON job files in, deterministic reports out.
//!
//! A job names a config, a task and its operands:
//!
//! ```json
//! {"config": {"epsilon": "0", "with_center": true},
//!  "task": "bracket",
//!  "operands": {"x": "L(2)", "y": "L(-2)"}}
//! ```
//!
//! The report document echoes the inputs canonically (map operands are
//! materialized into explicit tables), states the outcome and carries the
//! certificate that [`crate::verify`] re-checks.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::algebra::{bracket, super_jacobi_report, AlgebraConfig, BasisSymbol, Element, Parity};
use crate::automorphisms::{
    apply_table, fit_single, full_probe_set, grading_involution, is_automorphism_table, local_aut_decide,
    two_local_budget, two_local_recover, AutParams, AutViolation, BaseConstraint, FitFamily, FitObstruction,
    LocalVerdict, PairReason, ProbeTable, TermConstraint, TwoLocalVerdict,
};
use crate::derivations::{
    default_ansatz, image_intersection, inner_witness, local_der_at, normalization_pipeline, probe_family,
    DerivationError, MapTable, WitnessReport, WitnessStatus,
};
use crate::linalg::Window;
use crate::parallel::{par_map, Strategy};
use crate::scalar::Scalar;
use crate::text::parse_element;

/// Largest radius a job may request.
pub const MAX_RADIUS: i64 = 40;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JobError {
    #[error("usage: {0}")]
    Usage(String),
}

fn usage<E: std::fmt::Display>(e: E) -> JobError {
    JobError::Usage(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Bracket,
    Jacobi,
    DerWitness,
    DerLocal,
    DerIntersect,
    DerPipeline,
    AutApply,
    AutFit,
    AutCheck,
    AutLocal,
    #[serde(rename = "aut-2local")]
    AutTwoLocal,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Bracket => "bracket",
            TaskKind::Jacobi => "jacobi",
            TaskKind::DerWitness => "der-witness",
            TaskKind::DerLocal => "der-local",
            TaskKind::DerIntersect => "der-intersect",
            TaskKind::DerPipeline => "der-pipeline",
            TaskKind::AutApply => "aut-apply",
            TaskKind::AutFit => "aut-fit",
            TaskKind::AutCheck => "aut-check",
            TaskKind::AutLocal => "aut-local",
            TaskKind::AutTwoLocal => "aut-2local",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobFile {
    pub config: AlgebraConfig,
    pub task: TaskKind,
    #[serde(default)]
    pub operands: Value,
}

impl JobFile {
    pub fn parse(text: &str) -> Result<Self, JobError> {
        serde_json::from_str(text).map_err(usage)
    }
}

/// A linear map given by a table or by a generator over a basis window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSpec {
    Entries {
        entries: Vec<(String, String)>,
        #[serde(default)]
        parity: Option<Parity>,
    },
    Ad {
        u: String,
        radius: i64,
    },
    Aut {
        params: AutParams,
        radius: i64,
    },
    Involution {
        radius: i64,
    },
}

/// A candidate (2-)local automorphism: a family member, or the grading
/// involution, with some values overridden.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    #[serde(default)]
    pub params: Option<AutParams>,
    #[serde(default)]
    pub involution: bool,
    #[serde(default)]
    pub overrides: Vec<(String, String)>,
}

/// Probes `base + x * direction` for each listed `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub base: String,
    pub direction: String,
    pub x_values: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BracketOps {
    x: String,
    y: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JacobiOps {
    radius: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WitnessOps {
    map: MapSpec,
    ansatz_radius: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LocalOps {
    x: String,
    v: String,
    ansatz_radius: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IntersectOps {
    #[serde(default)]
    probes: Vec<String>,
    #[serde(default)]
    family: Option<FamilySpec>,
    target_radius: i64,
    #[serde(default)]
    extra_x_values: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineOps {
    map: MapSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyOps {
    params: AutParams,
    x: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FitOps {
    x: String,
    image: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckOps {
    map: MapSpec,
    check_radius: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PhiOps {
    phi: PhiSpec,
    radius: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub outcome: Outcome,
    pub document: Value,
    pub text: String,
}

impl Report {
    /// `0` on success, `1` for a negative verdict or a violated property.
    pub fn exit_code(&self) -> i32 {
        match self.outcome {
            Outcome::Success => 0,
            Outcome::Negative => 1,
        }
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.document).expect("json values serialize");
        s.push('\n');
        s
    }
}

struct Body {
    outcome: Outcome,
    inputs: Value,
    result: Value,
    certificate: Value,
    text: String,
}

pub fn run_job(job: &JobFile) -> Result<Report, JobError> {
    let cfg = job.config;
    let ops = || job.operands.clone();
    let body = match job.task {
        TaskKind::Bracket => run_bracket(&cfg, decode(ops())?),
        TaskKind::Jacobi => run_jacobi(&cfg, decode(ops())?),
        TaskKind::DerWitness => run_witness(&cfg, decode(ops())?),
        TaskKind::DerLocal => run_local(&cfg, decode(ops())?),
        TaskKind::DerIntersect => run_intersect(&cfg, decode(ops())?),
        TaskKind::DerPipeline => run_pipeline(&cfg, decode(ops())?),
        TaskKind::AutApply => run_apply(&cfg, decode(ops())?),
        TaskKind::AutFit => run_fit(&cfg, decode(ops())?),
        TaskKind::AutCheck => run_check(&cfg, decode(ops())?),
        TaskKind::AutLocal => run_aut_local(&cfg, decode(ops())?),
        TaskKind::AutTwoLocal => run_two_local(&cfg, decode(ops())?),
    }?;
    let document = json!({
        "config": cfg,
        "task": job.task,
        "inputs": body.inputs,
        "outcome": body.outcome,
        "result": body.result,
        "certificate": body.certificate,
    });
    let mut text = format!("{} on {}\n", job.task.name(), cfg);
    text.push_str(&body.text);
    if !text.ends_with('\n') {
        text.push('\n');
    }
    let _ = writeln!(text, "outcome: {}", if body.outcome == Outcome::Success { "success" } else { "negative" });
    Ok(Report { outcome: body.outcome, document, text })
}

fn decode<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, JobError> {
    serde_json::from_value(v).map_err(|e| JobError::Usage(format!("bad operands: {e}")))
}

pub(crate) fn elem(cfg: &AlgebraConfig, t: &str) -> Result<Element, JobError> {
    parse_element(cfg, t).map_err(usage)
}

fn scalar(t: &str) -> Result<Scalar, JobError> {
    t.parse().map_err(usage)
}

fn radius(r: i64) -> Result<i64, JobError> {
    if (0..=MAX_RADIUS).contains(&r) {
        Ok(r)
    } else {
        Err(JobError::Usage(format!("radius must lie in 0..={MAX_RADIUS}, got {r}")))
    }
}

pub(crate) fn t(e: &Element) -> Value {
    Value::String(e.to_string())
}

pub(crate) fn s(x: &Scalar) -> Value {
    Value::String(x.to_string())
}

fn sym(x: &BasisSymbol) -> Value {
    Value::String(x.to_string())
}

fn params_json(p: &AutParams) -> Value {
    serde_json::to_value(p).expect("params serialize")
}

fn pairs_json(entries: &[(Element, Element)]) -> Value {
    Value::Array(entries.iter().map(|(x, y)| json!([t(x), t(y)])).collect())
}

fn build_map(cfg: &AlgebraConfig, spec: &MapSpec) -> Result<MapTable, JobError> {
    match spec {
        MapSpec::Entries { entries, parity } => {
            let parsed = entries
                .iter()
                .map(|(x, y)| Ok((elem(cfg, x)?, elem(cfg, y)?)))
                .collect::<Result<Vec<_>, JobError>>()?;
            MapTable::new(*cfg, parsed, *parity).map_err(usage)
        }
        MapSpec::Ad { u, radius: r } => MapTable::ad(*cfg, &elem(cfg, u)?, radius(*r)?).map_err(usage),
        MapSpec::Aut { params, radius: r } => {
            params.validate(cfg).map_err(usage)?;
            apply_table(cfg, params, radius(*r)?).map_err(usage)
        }
        MapSpec::Involution { radius: r } => Ok(grading_involution(cfg, radius(*r)?)),
    }
}

fn map_json(m: &MapTable) -> Value {
    json!({ "entries": pairs_json(m.entries()), "parity": m.declared_parity() })
}

fn run_bracket(cfg: &AlgebraConfig, ops: BracketOps) -> Result<Body, JobError> {
    let x = elem(cfg, &ops.x)?;
    let y = elem(cfg, &ops.y)?;
    let v = bracket(cfg, &x, &y).map_err(usage)?;
    Ok(Body {
        outcome: Outcome::Success,
        inputs: json!({ "x": t(&x), "y": t(&y) }),
        result: json!({ "value": t(&v) }),
        certificate: Value::Null,
        text: format!("[{x}, {y}] = {v}"),
    })
}

fn run_jacobi(cfg: &AlgebraConfig, ops: JacobiOps) -> Result<Body, JobError> {
    let r = radius(ops.radius)?;
    let violations = super_jacobi_report(cfg, r);
    let listed: Vec<Value> = violations
        .iter()
        .map(|v| json!({ "kind": v.kind, "symbols": v.symbols.iter().map(sym).collect::<Vec<_>>(), "residual": t(&v.residual) }))
        .collect();
    Ok(Body {
        outcome: if violations.is_empty() { Outcome::Success } else { Outcome::Negative },
        inputs: json!({ "radius": r }),
        result: json!({ "violation_count": violations.len(), "violations": listed }),
        certificate: Value::Null,
        text: format!("{} violations", violations.len()),
    })
}

fn witness_body(report: &WitnessReport, inputs: Value) -> Body {
    let (outcome, result, certificate, text) = match &report.status {
        WitnessStatus::Witness(y) => (
            Outcome::Success,
            json!({ "status": "witness", "witness": t(y), "residual": t(&report.residual) }),
            json!({ "witness": t(y) }),
            format!("witness: {y}"),
        ),
        WitnessStatus::NoneInWindow(ob) => (
            Outcome::Negative,
            json!({ "status": "none-in-window", "residual": t(&report.residual) }),
            json!({
                "functional": ob.functional.iter().map(|(j, x, w)| json!({ "equation": j, "symbol": sym(x), "weight": s(w) })).collect::<Vec<_>>(),
                "degree_blocks": ob.degree_blocks.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
                "pairing": s(&ob.pairing),
            }),
            format!(
                "none in window; obstruction reads {} with pairing {}; unreachable part {}",
                ob.functional.iter().map(|(j, x, w)| format!("{w}·[{j}]{x}")).collect::<Vec<_>>().join(" + "),
                ob.pairing,
                report.residual
            ),
        ),
        WitnessStatus::OutOfScope(why) => (
            Outcome::Negative,
            json!({ "status": "out-of-scope", "reason": why, "residual": t(&report.residual) }),
            Value::Null,
            format!("out of scope: {why}"),
        ),
    };
    Body { outcome, inputs, result, certificate, text }
}

fn run_witness(cfg: &AlgebraConfig, ops: WitnessOps) -> Result<Body, JobError> {
    let map = build_map(cfg, &ops.map)?;
    let ar = radius(ops.ansatz_radius)?;
    let report = inner_witness(&map, &Window::radius(*cfg, ar)).map_err(usage)?;
    Ok(witness_body(&report, json!({ "map": map_json(&map), "ansatz_radius": ar })))
}

fn run_local(cfg: &AlgebraConfig, ops: LocalOps) -> Result<Body, JobError> {
    let x = elem(cfg, &ops.x)?;
    let v = elem(cfg, &ops.v)?;
    let ar = radius(ops.ansatz_radius)?;
    let report = local_der_at(cfg, &x, &v, &Window::radius(*cfg, ar)).map_err(usage)?;
    Ok(witness_body(&report, json!({ "x": t(&x), "v": t(&v), "ansatz_radius": ar })))
}

fn run_intersect(cfg: &AlgebraConfig, ops: IntersectOps) -> Result<Body, JobError> {
    let mut probes = ops.probes.iter().map(|p| elem(cfg, p)).collect::<Result<Vec<_>, _>>()?;
    let mut extra = Vec::new();
    if let Some(f) = &ops.family {
        let base = elem(cfg, &f.base)?;
        let dir = elem(cfg, &f.direction)?;
        let xs = f.x_values.iter().map(|x| scalar(x)).collect::<Result<Vec<_>, _>>()?;
        probes.extend(probe_family(&base, &dir, &xs));
        let more = ops.extra_x_values.iter().map(|x| scalar(x)).collect::<Result<Vec<_>, _>>()?;
        extra = probe_family(&base, &dir, &more);
    } else if !ops.extra_x_values.is_empty() {
        return Err(JobError::Usage("extra_x_values needs a probe family".into()));
    }
    if probes.is_empty() {
        return Err(JobError::Usage("der-intersect needs at least one probe".into()));
    }
    let target = Window::radius(*cfg, radius(ops.target_radius)?);
    let all: Vec<Element> = probes.iter().chain(&extra).cloned().collect();
    let ansatz = default_ansatz(cfg, &all, &target);
    let sub = image_intersection(cfg, &probes, &ansatz, &target).map_err(usage)?;
    let stable = if extra.is_empty() {
        None
    } else {
        Some(image_intersection(cfg, &all, &ansatz, &target).map_err(usage)? == sub)
    };
    let basis = sub.basis_elements();
    let jobs: Vec<(usize, usize)> = (0..basis.len()).flat_map(|i| (0..probes.len()).map(move |j| (i, j))).collect();
    let preimages = par_map(Strategy::default(), &jobs, |&(i, j)| {
        let r = local_der_at(cfg, &probes[j], &basis[i], &ansatz).expect("validated");
        let y = r.witness().expect("basis vectors lie in every probe image").clone();
        json!({ "basis": i, "probe": j, "preimage": t(&y) })
    });
    let hi = ansatz.symbols().iter().map(|x| x.d.abs()).max().unwrap_or(0);
    let mut text = format!("dim {}: span{{{}}}", sub.dim(), basis.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(", "));
    if let Some(st) = stable {
        let _ = write!(text, "\nstable under {} more samples: {}", extra.len(), st);
    }
    Ok(Body {
        outcome: if stable == Some(false) { Outcome::Negative } else { Outcome::Success },
        inputs: json!({
            "probes": probes.iter().map(t).collect::<Vec<_>>(),
            "extra_probes": extra.iter().map(t).collect::<Vec<_>>(),
            "target_radius": ops.target_radius,
            "ansatz_doubled_bound": hi,
        }),
        result: json!({ "dim": sub.dim(), "basis": basis.iter().map(t).collect::<Vec<_>>(), "stable": stable }),
        certificate: json!({ "preimages": preimages }),
        text,
    })
}

fn run_pipeline(cfg: &AlgebraConfig, ops: PipelineOps) -> Result<Body, JobError> {
    let map = build_map(cfg, &ops.map)?;
    let inputs = json!({ "map": map_json(&map) });
    let (outcome, result, certificate, text) = match normalization_pipeline(&map) {
        Ok(r) => {
            let status = if r.is_inner() { "inner" } else { "not-inner" };
            let residuals: Vec<Value> = r.residuals.iter().map(|(x, v)| json!([t(x), t(v)])).collect();
            (
                if r.is_inner() { Outcome::Success } else { Outcome::Negative },
                json!({
                    "status": status,
                    "witness": t(&r.witness),
                    "l0_witness": t(&r.l0_witness),
                    "l1_coefficients": [s(&r.l1_coefficients.0), s(&r.l1_coefficients.1)],
                    "residuals": residuals,
                }),
                json!({ "witness": t(&r.witness) }),
                format!("{status}; witness {}; {} nonzero residuals", r.witness, r.residuals.len()),
            )
        }
        Err(DerivationError::NotLocalAtL0(v)) => (
            Outcome::Negative,
            json!({ "status": "not-local-at-l0", "value": t(&v) }),
            Value::Null,
            format!("value at L(0) is not [y, L(0)] for any y: {v}"),
        ),
        Err(DerivationError::ShapeViolation(v)) => (
            Outcome::Negative,
            json!({ "status": "shape-violation", "value": t(&v) }),
            Value::Null,
            format!("value at L(1) after the first step is not in span{{L(1), G(1)}}: {v}"),
        ),
        Err(e) => return Err(usage(e)),
    };
    Ok(Body { outcome, inputs, result, certificate, text })
}

fn run_apply(cfg: &AlgebraConfig, ops: ApplyOps) -> Result<Body, JobError> {
    let x = elem(cfg, &ops.x)?;
    let v = ops.params.apply(cfg, &x).map_err(usage)?;
    Ok(Body {
        outcome: Outcome::Success,
        inputs: json!({ "params": params_json(&ops.params.canonical()), "x": t(&x) }),
        result: json!({ "value": t(&v) }),
        certificate: Value::Null,
        text: format!("{} applied to {x} = {v}", ops.params.canonical()),
    })
}

pub(crate) fn term_json(c: &TermConstraint) -> Value {
    json!({ "entry": c.entry, "symbol": sym(&c.symbol), "exponent": c.exponent, "value": s(&c.value) })
}

pub(crate) fn family_json(f: &FitFamily) -> Value {
    let branches: Vec<Value> = f
        .branches
        .iter()
        .map(|b| {
            let base = match &b.base {
                BaseConstraint::Free => json!({ "kind": "free" }),
                BaseConstraint::Power { exponent, value } => json!({ "kind": "power", "exponent": exponent, "value": s(value) }),
                BaseConstraint::Empty(FitObstruction::SupportMismatch { entry, symbol }) => {
                    json!({ "kind": "support-mismatch", "entry": entry, "symbol": sym(symbol) })
                }
                BaseConstraint::Empty(FitObstruction::FixedViolation(c)) => json!({ "kind": "fixed-violation", "term": term_json(c) }),
                BaseConstraint::Empty(FitObstruction::Conflict(a, b)) => {
                    json!({ "kind": "conflict", "first": term_json(a), "second": term_json(b) })
                }
            };
            json!({ "eps": b.eps.to_string(), "s": s(&b.s), "base": base })
        })
        .collect();
    Value::Array(branches)
}

fn run_fit(cfg: &AlgebraConfig, ops: FitOps) -> Result<Body, JobError> {
    let x = elem(cfg, &ops.x)?;
    let image = elem(cfg, &ops.image)?;
    let family = fit_single(cfg, &x, &image).map_err(usage)?;
    let (solutions, complete) = family.solutions();
    let l1 = BasisSymbol::l(1).elem();
    let note = (x == l1 && image == l1).then_some(
        "the grading involution also fixes L(1): the fixer set is {identity, omega}, not the identity alone",
    );
    let mut text = if family.is_empty() {
        "no family member realizes this value".to_string()
    } else {
        format!(
            "{} solutions{}: {}",
            solutions.len(),
            if complete { "" } else { " (not exhaustive)" },
            solutions.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")
        )
    };
    if let Some(n) = note {
        let _ = write!(text, "\nnote: {n}");
    }
    Ok(Body {
        outcome: if family.is_empty() { Outcome::Negative } else { Outcome::Success },
        inputs: json!({ "x": t(&x), "image": t(&image) }),
        result: json!({
            "realizable": !family.is_empty(),
            "solutions": solutions.iter().map(params_json).collect::<Vec<_>>(),
            "complete": complete,
            "note": note,
        }),
        certificate: json!({ "branches": family_json(&family) }),
        text,
    })
}

fn violation_json(v: &AutViolation) -> Value {
    json!({ "x": sym(&v.x), "y": sym(&v.y), "lhs": t(&v.lhs), "rhs": t(&v.rhs) })
}

fn run_check(cfg: &AlgebraConfig, ops: CheckOps) -> Result<Body, JobError> {
    let map = build_map(cfg, &ops.map)?;
    let r = radius(ops.check_radius)?;
    let check = is_automorphism_table(&map, r).map_err(usage)?;
    let first = check.first_violation().map(violation_json);
    let text = match check.first_violation() {
        None if check.injective => "bracket preserved on every pair; injective on the window".to_string(),
        None => "bracket preserved but not injective on the window".to_string(),
        Some(v) => format!(
            "{} violations; first at ({}, {}): t([x,y]) = {} but [t(x), t(y)] = {}",
            check.violations.len(),
            v.x,
            v.y,
            v.lhs,
            v.rhs
        ),
    };
    Ok(Body {
        outcome: if check.passed() { Outcome::Success } else { Outcome::Negative },
        inputs: json!({ "map": map_json(&map), "check_radius": r }),
        result: json!({
            "passed": check.passed(),
            "injective": check.injective,
            "violation_count": check.violations.len(),
            "first_violation": first,
        }),
        certificate: Value::Null,
        text,
    })
}

/// The base member of a candidate map and its overrides.
fn phi_parts(cfg: &AlgebraConfig, phi: &PhiSpec) -> Result<(AutParams, HashMap<Element, Element>, Vec<(Element, Element)>), JobError> {
    let base = match (&phi.params, phi.involution) {
        (Some(_), true) => return Err(JobError::Usage("phi takes params or involution, not both".into())),
        (Some(p), false) => {
            p.validate(cfg).map_err(usage)?;
            p.canonical()
        }
        (None, true) => AutParams::omega(cfg),
        (None, false) => AutParams::identity(cfg),
    };
    let overrides = phi
        .overrides
        .iter()
        .map(|(x, y)| Ok((elem(cfg, x)?, elem(cfg, y)?)))
        .collect::<Result<Vec<_>, JobError>>()?;
    Ok((base, overrides.iter().cloned().collect(), overrides))
}

fn phi_json(base: &AutParams, overrides: &[(Element, Element)]) -> Value {
    json!({ "base": params_json(base), "overrides": pairs_json(overrides) })
}

fn run_aut_local(cfg: &AlgebraConfig, ops: PhiOps) -> Result<Body, JobError> {
    let r = radius(ops.radius)?;
    let (base, over, over_list) = phi_parts(cfg, &ops.phi)?;
    let mut table = ProbeTable::from_fn(*cfg, full_probe_set(cfg, r), |x| base.apply(cfg, x).expect("validated")).map_err(usage)?;
    for (x, y) in over {
        table.set(x, y);
    }
    let verdict = local_aut_decide(&table, r).map_err(usage)?;
    let (outcome, result, text) = match &verdict {
        LocalVerdict::Automorphism(p) => (
            Outcome::Success,
            json!({ "verdict": "automorphism", "params": params_json(p) }),
            format!("automorphism {p}"),
        ),
        LocalVerdict::PointwiseFailure { probe, image, family } => (
            Outcome::Negative,
            json!({ "verdict": "pointwise-failure", "probes": [t(probe)], "images": [t(image)], "branches": family_json(family) }),
            format!("pointwise failure: no family member sends {probe} to {image}"),
        ),
        LocalVerdict::GlobalInconsistency { probes, family } => (
            Outcome::Negative,
            json!({
                "verdict": "global-inconsistency",
                "probes": probes.iter().map(t).collect::<Vec<_>>(),
                "images": probes.iter().map(|p| t(table.get(p).expect("probe"))).collect::<Vec<_>>(),
                "branches": family_json(family),
            }),
            format!(
                "global inconsistency: no single member agrees on {}",
                probes.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" and ")
            ),
        ),
    };
    Ok(Body {
        outcome,
        inputs: json!({ "phi": phi_json(&base, &over_list), "radius": r, "table": pairs_json(table.entries()) }),
        result,
        certificate: Value::Null,
        text,
    })
}

fn run_two_local(cfg: &AlgebraConfig, ops: PhiOps) -> Result<Body, JobError> {
    let r = radius(ops.radius)?;
    let (base, over, over_list) = phi_parts(cfg, &ops.phi)?;
    let oracle = |x: &Element| over.get(x).cloned().unwrap_or_else(|| base.apply(cfg, x).expect("validated"));
    let budget = two_local_budget(cfg, r);
    let verdict = two_local_recover(cfg, &oracle, &budget).map_err(usage)?;
    let l1 = BasisSymbol::l(1).elem();
    let queries: Vec<(Element, Element)> =
        std::iter::once(&l1).chain(&budget).map(|z| (z.clone(), oracle(z))).collect();
    let (outcome, result, text) = match &verdict {
        TwoLocalVerdict::Automorphism(p) => (
            Outcome::Success,
            json!({ "verdict": "automorphism", "params": params_json(p) }),
            format!("automorphism {p}"),
        ),
        TwoLocalVerdict::PairFailure { pair, reason } => {
            let family = crate::automorphisms::fit_many(cfg, &[(pair.0.clone(), oracle(&pair.0)), (pair.1.clone(), oracle(&pair.1))])
                .map_err(usage)?;
            (
                Outcome::Negative,
                json!({
                    "verdict": "pair-failure",
                    "pair": [t(&pair.0), t(&pair.1)],
                    "images": [t(&oracle(&pair.0)), t(&oracle(&pair.1))],
                    "reason": reason,
                    "branches": family_json(&family),
                }),
                format!(
                    "pair failure at ({}, {}): {}",
                    pair.0,
                    pair.1,
                    match reason {
                        PairReason::NotRealizable => "the value at L(1) is not realizable",
                        PairReason::NoCommonCandidate => "no member fixing the value at L(1) matches the second value",
                        PairReason::Conflict => "no member matches both values",
                    }
                ),
            )
        }
        TwoLocalVerdict::Inconsistent { probes } => (
            Outcome::Negative,
            json!({ "verdict": "inconsistent", "probes": probes.iter().map(t).collect::<Vec<_>>() }),
            "every pair is realizable but no single member fits the budget".to_string(),
        ),
        TwoLocalVerdict::Underdetermined { candidates } => (
            Outcome::Negative,
            json!({ "verdict": "underdetermined", "candidates": candidates.iter().map(params_json).collect::<Vec<_>>() }),
            format!("{} members fit the whole budget", candidates.len()),
        ),
    };
    Ok(Body {
        outcome,
        inputs: json!({ "phi": phi_json(&base, &over_list), "radius": r, "queries": pairs_json(&queries) }),
        result,
        certificate: Value::Null,
        text,
    })
}
