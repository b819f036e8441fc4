//! Independent re-checking of report certificates.
//!
//! Verification reads only the report document. Witnesses are checked by
//! bracketing, parameters by applying them, fit obstructions by recomputing
//! the offending coefficients, and sweeps by a sequential re-run.

use serde_json::Value;
use thiserror::Error;

use crate::algebra::{bracket, super_jacobi_report_with, AlgebraConfig, BasisSymbol, Element, Epsilon, Kind, Parity};
use crate::automorphisms::{is_automorphism_table_with, AutParams};
use crate::derivations::{default_ansatz, image_intersection_with, normalization_pipeline, DerivationError, MapTable};
use crate::job::{elem, s};
use crate::linalg::Window;
use crate::parallel::Strategy;
use crate::scalar::Scalar;
use crate::text::parse_symbol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("certificate check failed: {0}")]
pub struct VerifyError(pub String);

fn fail<T>(msg: impl Into<String>) -> Result<T, VerifyError> {
    Err(VerifyError(msg.into()))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), VerifyError> {
    if cond {
        Ok(())
    } else {
        Err(VerifyError(msg()))
    }
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, VerifyError> {
    v.get(key).ok_or_else(|| VerifyError(format!("missing field `{key}`")))
}

fn string<'a>(v: &'a Value, key: &str) -> Result<&'a str, VerifyError> {
    field(v, key)?.as_str().ok_or_else(|| VerifyError(format!("`{key}` is not a string")))
}

fn int(v: &Value, key: &str) -> Result<i64, VerifyError> {
    field(v, key)?.as_i64().ok_or_else(|| VerifyError(format!("`{key}` is not an integer")))
}

fn array<'a>(v: &'a Value, key: &str) -> Result<&'a Vec<Value>, VerifyError> {
    field(v, key)?.as_array().ok_or_else(|| VerifyError(format!("`{key}` is not an array")))
}

fn e(cfg: &AlgebraConfig, v: &Value) -> Result<Element, VerifyError> {
    let text = v.as_str().ok_or_else(|| VerifyError("element is not a string".into()))?;
    elem(cfg, text).map_err(|err| VerifyError(err.to_string()))
}

fn sc(v: &Value) -> Result<Scalar, VerifyError> {
    let text = v.as_str().ok_or_else(|| VerifyError("scalar is not a string".into()))?;
    text.parse().map_err(|err: crate::scalar::ScalarError| VerifyError(err.to_string()))
}

fn pairs(cfg: &AlgebraConfig, v: &Value) -> Result<Vec<(Element, Element)>, VerifyError> {
    v.as_array()
        .ok_or_else(|| VerifyError("table is not an array".into()))?
        .iter()
        .map(|p| Ok((e(cfg, &p[0])?, e(cfg, &p[1])?)))
        .collect()
}

fn params(cfg: &AlgebraConfig, v: &Value) -> Result<AutParams, VerifyError> {
    let p: AutParams = serde_json::from_value(v.clone()).map_err(|err| VerifyError(err.to_string()))?;
    p.validate(cfg).map_err(|err| VerifyError(err.to_string()))?;
    Ok(p)
}

fn br(cfg: &AlgebraConfig, x: &Element, y: &Element) -> Result<Element, VerifyError> {
    bracket(cfg, x, y).map_err(|err| VerifyError(err.to_string()))
}

/// Re-checks the certificate embedded in a report document and returns the
/// number of individual checks performed.
pub fn verify_report(doc: &Value) -> Result<usize, VerifyError> {
    let cfg: AlgebraConfig =
        serde_json::from_value(field(doc, "config")?.clone()).map_err(|err| VerifyError(err.to_string()))?;
    let inputs = field(doc, "inputs")?;
    let result = field(doc, "result")?;
    match string(doc, "task")? {
        "bracket" => {
            let v = br(&cfg, &e(&cfg, field(inputs, "x")?)?, &e(&cfg, field(inputs, "y")?)?)?;
            ensure(v == e(&cfg, field(result, "value")?)?, || "bracket value differs".into())?;
            Ok(1)
        }
        "jacobi" => {
            let n = super_jacobi_report_with(&cfg, int(inputs, "radius")?, Strategy::Sequential).len();
            ensure(n as i64 == int(result, "violation_count")?, || "sequential sweep disagrees".into())?;
            Ok(1)
        }
        "der-witness" => {
            let entries = pairs(&cfg, field(field(inputs, "map")?, "entries")?)?;
            check_witness(&cfg, &entries, int(inputs, "ansatz_radius")?, result, field(doc, "certificate")?)
        }
        "der-local" => {
            let entries = vec![(e(&cfg, field(inputs, "x")?)?, e(&cfg, field(inputs, "v")?)?)];
            check_witness(&cfg, &entries, int(inputs, "ansatz_radius")?, result, field(doc, "certificate")?)
        }
        "der-intersect" => check_intersect(&cfg, inputs, result, field(doc, "certificate")?),
        "der-pipeline" => check_pipeline(&cfg, inputs, result),
        "aut-apply" => {
            let p = params(&cfg, field(inputs, "params")?)?;
            let v = p.apply(&cfg, &e(&cfg, field(inputs, "x")?)?).map_err(|err| VerifyError(err.to_string()))?;
            ensure(v == e(&cfg, field(result, "value")?)?, || "applied value differs".into())?;
            Ok(1)
        }
        "aut-fit" => {
            let entries = vec![(e(&cfg, field(inputs, "x")?)?, e(&cfg, field(inputs, "image")?)?)];
            let solutions = array(result, "solutions")?;
            let mut n = check_members(&cfg, &entries, solutions)?;
            if field(result, "realizable")? == &Value::Bool(false) {
                ensure(solutions.is_empty(), || "unrealizable fit lists solutions".into())?;
                n += check_branches(&cfg, &entries, array(field(doc, "certificate")?, "branches")?)?;
            }
            Ok(n)
        }
        "aut-check" => check_aut_table(&cfg, inputs, result),
        "aut-local" => {
            let table = pairs(&cfg, field(inputs, "table")?)?;
            check_aut_verdict(&cfg, &table, result)
        }
        "aut-2local" => {
            let queries = pairs(&cfg, field(inputs, "queries")?)?;
            check_aut_verdict(&cfg, &queries, result)
        }
        other => fail(format!("unknown task `{other}`")),
    }
}

fn check_witness(
    cfg: &AlgebraConfig,
    entries: &[(Element, Element)],
    ansatz_radius: i64,
    result: &Value,
    cert: &Value,
) -> Result<usize, VerifyError> {
    match string(result, "status")? {
        "witness" => {
            let y = e(cfg, field(cert, "witness")?)?;
            for (x, v) in entries {
                ensure(&br(cfg, &y, x)? == v, || format!("[{y}, {x}] != {v}"))?;
            }
            Ok(entries.len())
        }
        "none-in-window" => {
            let functional: Vec<(usize, BasisSymbol, Scalar)> = array(cert, "functional")?
                .iter()
                .map(|f| {
                    let j = int(f, "equation")? as usize;
                    let symbol = parse_symbol(string(f, "symbol")?).map_err(|err| VerifyError(err.to_string()))?;
                    ensure(j < entries.len(), || "equation index out of range".into())?;
                    Ok((j, symbol, sc(field(f, "weight")?)?))
                })
                .collect::<Result<_, VerifyError>>()?;
            let ansatz = Window::radius(*cfg, ansatz_radius);
            for a in ansatz.symbols() {
                let mut acc = Scalar::zero();
                for (j, symbol, w) in &functional {
                    acc += &(w * &br(cfg, &a.elem(), &entries[*j].0)?.coeff(symbol));
                }
                ensure(acc.is_zero(), || format!("functional does not annihilate the column of {a}"))?;
            }
            let pairing: Scalar = functional.iter().map(|(j, symbol, w)| w * &entries[*j].1.coeff(symbol)).sum();
            ensure(!pairing.is_zero() && pairing == sc(field(cert, "pairing")?)?, || "pairing mismatch".into())?;
            Ok(ansatz.len() + 1)
        }
        "out-of-scope" => {
            ensure(entries.iter().any(|(x, v)| x.is_zero() && !v.is_zero()), || "no zero input with nonzero value".into())?;
            Ok(1)
        }
        other => fail(format!("unknown witness status `{other}`")),
    }
}

fn check_intersect(cfg: &AlgebraConfig, inputs: &Value, result: &Value, cert: &Value) -> Result<usize, VerifyError> {
    let probes = array(inputs, "probes")?.iter().map(|p| e(cfg, p)).collect::<Result<Vec<_>, _>>()?;
    let extra = array(inputs, "extra_probes")?.iter().map(|p| e(cfg, p)).collect::<Result<Vec<_>, _>>()?;
    let basis = array(result, "basis")?.iter().map(|b| e(cfg, b)).collect::<Result<Vec<_>, _>>()?;
    let mut seen = vec![vec![false; probes.len()]; basis.len()];
    for p in array(cert, "preimages")? {
        let (i, j) = (int(p, "basis")? as usize, int(p, "probe")? as usize);
        ensure(i < basis.len() && j < probes.len(), || "preimage index out of range".into())?;
        let y = e(cfg, field(p, "preimage")?)?;
        ensure(br(cfg, &y, &probes[j])? == basis[i], || format!("preimage of basis {i} under probe {j} is wrong"))?;
        seen[i][j] = true;
    }
    ensure(seen.iter().flatten().all(|&b| b), || "missing preimages".into())?;
    // maximality is re-derived by a sequential recomputation
    let target = Window::radius(*cfg, int(inputs, "target_radius")?);
    let bound = int(inputs, "ansatz_doubled_bound")?;
    let all: Vec<Element> = probes.iter().chain(&extra).cloned().collect();
    let ansatz = Window::doubled_range(*cfg, -bound, bound);
    ensure(ansatz == default_ansatz(cfg, &all, &target), || "ansatz bound is not the padded window".into())?;
    let sub = image_intersection_with(cfg, &probes, &ansatz, &target, Strategy::Sequential)
        .map_err(|err| VerifyError(err.to_string()))?;
    ensure(sub.basis_elements() == basis, || "sequential recomputation gives a different subspace".into())?;
    Ok(basis.len() * probes.len() + 1)
}

fn check_pipeline(cfg: &AlgebraConfig, inputs: &Value, result: &Value) -> Result<usize, VerifyError> {
    let entries = pairs(cfg, field(field(inputs, "map")?, "entries")?)?;
    match string(result, "status")? {
        status @ ("inner" | "not-inner") => {
            let w = e(cfg, field(result, "witness")?)?;
            let mut residuals = Vec::new();
            for (x, v) in &entries {
                let r = v - &br(cfg, &w, x)?;
                if !r.is_zero() {
                    residuals.push((x.clone(), r));
                }
            }
            ensure(residuals == pairs(cfg, field(result, "residuals")?)?, || "residuals differ".into())?;
            ensure((status == "inner") == residuals.is_empty(), || "status contradicts residuals".into())?;
            Ok(entries.len())
        }
        status => {
            let parity = field(field(inputs, "map")?, "parity")?;
            let parity: Option<Parity> = serde_json::from_value(parity.clone()).map_err(|err| VerifyError(err.to_string()))?;
            let map = MapTable::new(*cfg, entries, parity).map_err(|err| VerifyError(err.to_string()))?;
            let value = e(cfg, field(result, "value")?)?;
            let same = match (normalization_pipeline(&map), status) {
                (Err(DerivationError::NotLocalAtL0(v)), "not-local-at-l0") => v == value,
                (Err(DerivationError::ShapeViolation(v)), "shape-violation") => v == value,
                _ => false,
            };
            ensure(same, || "pipeline failure not reproduced".into())?;
            Ok(1)
        }
    }
}

fn check_aut_table(cfg: &AlgebraConfig, inputs: &Value, result: &Value) -> Result<usize, VerifyError> {
    let entries = pairs(cfg, field(field(inputs, "map")?, "entries")?)?;
    let map = MapTable::new(*cfg, entries, None).map_err(|err| VerifyError(err.to_string()))?;
    let check = is_automorphism_table_with(&map, int(inputs, "check_radius")?, Strategy::Sequential)
        .map_err(|err| VerifyError(err.to_string()))?;
    ensure(check.violations.len() as i64 == int(result, "violation_count")?, || "violation count differs".into())?;
    ensure(Value::Bool(check.passed()) == *field(result, "passed")?, || "verdict differs".into())?;
    let first = field(result, "first_violation")?;
    if !first.is_null() {
        let x = parse_symbol(string(first, "x")?).map_err(|err| VerifyError(err.to_string()))?.elem();
        let y = parse_symbol(string(first, "y")?).map_err(|err| VerifyError(err.to_string()))?.elem();
        let ev = |z: &Element| map.eval(z).map_err(|err| VerifyError(err.to_string()));
        let lhs = ev(&br(cfg, &x, &y)?)?;
        let rhs = br(cfg, &ev(&x)?, &ev(&y)?)?;
        ensure(lhs != rhs, || "reported violation holds".into())?;
        ensure(lhs == e(cfg, field(first, "lhs")?)? && rhs == e(cfg, field(first, "rhs")?)?, || "violation values differ".into())?;
    }
    Ok(2)
}

fn check_members(cfg: &AlgebraConfig, entries: &[(Element, Element)], members: &[Value]) -> Result<usize, VerifyError> {
    for m in members {
        let p = params(cfg, m)?;
        for (x, y) in entries {
            let v = p.apply(cfg, x).map_err(|err| VerifyError(err.to_string()))?;
            ensure(&v == y, || format!("{p} sends {x} to {v}, not {y}"))?;
        }
    }
    Ok(members.len() * entries.len())
}

fn check_aut_verdict(cfg: &AlgebraConfig, table: &[(Element, Element)], result: &Value) -> Result<usize, VerifyError> {
    let lookup = |x: &Element| table.iter().find(|(p, _)| p == x).map(|(_, v)| v.clone());
    match string(result, "verdict")? {
        "automorphism" => check_members(cfg, table, std::slice::from_ref(field(result, "params")?)),
        "underdetermined" => {
            let c = array(result, "candidates")?;
            ensure(c.len() > 1, || "fewer than two candidates".into())?;
            check_members(cfg, table, c)
        }
        verdict @ ("pointwise-failure" | "global-inconsistency" | "pair-failure") => {
            let key = if verdict == "pair-failure" { "pair" } else { "probes" };
            let xs = array(result, key)?.iter().map(|x| e(cfg, x)).collect::<Result<Vec<_>, _>>()?;
            let ys = array(result, "images")?.iter().map(|y| e(cfg, y)).collect::<Result<Vec<_>, _>>()?;
            ensure(xs.len() == ys.len(), || "probe/image length mismatch".into())?;
            let entries: Vec<(Element, Element)> = xs.into_iter().zip(ys).collect();
            for (x, y) in &entries {
                ensure(lookup(x).as_ref() == Some(y), || format!("value at {x} does not match the table"))?;
            }
            check_branches(cfg, &entries, array(result, "branches")?)
        }
        "inconsistent" => {
            let xs = array(result, "probes")?.iter().map(|x| e(cfg, x)).collect::<Result<Vec<_>, _>>()?;
            let entries: Vec<(Element, Element)> =
                xs.iter().map(|x| lookup(x).map(|v| (x.clone(), v))).collect::<Option<_>>().ok_or_else(|| VerifyError("probe not queried".into()))?;
            let fam = crate::automorphisms::fit_many(cfg, &entries).map_err(|err| VerifyError(err.to_string()))?;
            ensure(fam.is_empty(), || "probes are jointly realizable".into())?;
            Ok(1)
        }
        other => fail(format!("unknown verdict `{other}`")),
    }
}

fn exponent(cfg: &AlgebraConfig, x: &BasisSymbol) -> i64 {
    match (x.kind, cfg.epsilon) {
        (Kind::C, _) => 0,
        (_, Epsilon::Zero) => x.d / 2,
        (_, Epsilon::Half) => x.d,
    }
}

/// Checks that every `(eps, s)` branch of the family carries a valid
/// obstruction for the given `(x, image)` pairs.
fn check_branches(cfg: &AlgebraConfig, entries: &[(Element, Element)], branches: &[Value]) -> Result<usize, VerifyError> {
    let mut expected = vec![("+1", Scalar::one()), ("-1", Scalar::i())];
    if cfg.epsilon == Epsilon::Zero {
        expected.extend([("+1", -Scalar::one()), ("-1", -Scalar::i())]);
    }
    ensure(branches.len() == expected.len(), || "wrong number of branches".into())?;
    for (eps_text, s_val) in &expected {
        let b = branches
            .iter()
            .find(|b| b["eps"] == *eps_text && b["s"] == s(s_val))
            .ok_or_else(|| VerifyError(format!("branch eps={eps_text}, s={s_val} missing")))?;
        let eps = if *eps_text == "+1" { 1 } else { -1 };
        check_obstruction(cfg, entries, eps, s_val, field(b, "base")?)?;
    }
    Ok(expected.len())
}

fn check_obstruction(cfg: &AlgebraConfig, entries: &[(Element, Element)], eps: i64, s_val: &Scalar, base: &Value) -> Result<(), VerifyError> {
    let flip = |x: &BasisSymbol| BasisSymbol::new(x.kind, x.d * eps);
    let entry = |v: &Value| -> Result<&(Element, Element), VerifyError> {
        entries.get(int(v, "entry")? as usize).ok_or_else(|| VerifyError("entry index out of range".into()))
    };
    // recompute base^exponent = value from the coefficients
    let term = |v: &Value| -> Result<(i64, Scalar), VerifyError> {
        let (x, image) = entry(v)?;
        let symbol = parse_symbol(string(v, "symbol")?).map_err(|err| VerifyError(err.to_string()))?;
        let c = x.coeff(&symbol);
        let w = image.coeff(&flip(&symbol));
        ensure(!c.is_zero() && !w.is_zero(), || format!("term {symbol} is not a matched term"))?;
        let k = if symbol.kind == Kind::G { s_val.clone() } else { Scalar::from_int(eps) };
        let value = w.checked_div(&(&c * &k)).map_err(|err| VerifyError(err.to_string()))?;
        let n = exponent(cfg, &symbol);
        ensure(n == int(v, "exponent")? && value == sc(field(v, "value")?)?, || format!("term {symbol} misreported"))?;
        Ok((n, value))
    };
    match string(base, "kind")? {
        "support-mismatch" => {
            let (x, image) = entry(base)?;
            let symbol = parse_symbol(string(base, "symbol")?).map_err(|err| VerifyError(err.to_string()))?;
            let mapped: Vec<BasisSymbol> = x.symbols().map(flip).collect();
            let stray = !image.coeff(&symbol).is_zero() && !mapped.contains(&symbol);
            let lost = mapped.contains(&symbol) && image.coeff(&symbol).is_zero();
            ensure(stray || lost, || format!("no support mismatch at {symbol}"))
        }
        "fixed-violation" => {
            let (n, value) = term(field(base, "term")?)?;
            ensure(n == 0 && !value.is_one(), || "fixed term is satisfied".into())
        }
        "conflict" => {
            let (n1, v1) = term(field(base, "first")?)?;
            let (n2, v2) = term(field(base, "second")?)?;
            ensure(n1 != 0 && n2 != 0, || "conflict uses a fixed term".into())?;
            let norm = |n: i64, v: Scalar| if n > 0 { (n, v) } else { (-n, v.inv().expect("nonzero")) };
            let ((k1, c1), (k2, c2)) = (norm(n1, v1), norm(n2, v2));
            let g = num_integer::gcd(k1, k2);
            let lhs = c1.int_pow(k2 / g).map_err(|err| VerifyError(err.to_string()))?;
            let rhs = c2.int_pow(k1 / g).map_err(|err| VerifyError(err.to_string()))?;
            ensure(lhs != rhs, || "conflicting terms are compatible".into())
        }
        other => fail(format!("branch is not obstructed (`{other}`)")),
    }
}
