//! The scaling/flip family of automorphisms and the decision procedures for
//! local and 2-local automorphisms over finite probe sets.
//!
//! A member of the family is `σ(L(m)) = eps·a^m·L(eps·m)`,
//! `σ(G(r)) = s·a^r·G(eps·r)`, `σ(C) = eps·C` with `s² = eps`. On the
//! half-integer grid `a^r` is read as `h^{2r}` for a chosen square root `h`
//! of `a`. The grading involution `ω` (identity on even, `-1` on odd) is the
//! member `(1, 1, -1)` on the integer grid and `h = -1` on the half grid.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{bracket_unchecked, AlgebraConfig, AlgebraError, BasisSymbol, Element, Epsilon, Kind};
use crate::derivations::{DerivationError, MapTable};
use crate::linalg::{list_symbols, Matrix, Window};
use crate::parallel::{par_flat_map, par_map, Strategy};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Derivation(#[from] DerivationError),
    #[error("invalid automorphism parameters: {0}")]
    InvalidParams(String),
    #[error("probe table is missing probes: {}", list_elements(.0))]
    MissingProbes(Vec<Element>),
    #[error("map is not defined on: {}", list_symbols(.0))]
    DomainInsufficient(Vec<BasisSymbol>),
    #[error("no root of degree {degree} of {value} could be represented exactly")]
    Unrepresentable { value: Scalar, degree: u32 },
    #[error("cannot fit an automorphism at the zero element")]
    ZeroInput,
}

fn list_elements(v: &[Element]) -> String {
    v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn scalar(self) -> Scalar {
        Scalar::from_int(self.value())
    }

    pub fn times(self, other: Sign) -> Sign {
        if self == other {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

impl FromStr for Sign {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+1" | "1" => Ok(Sign::Plus),
            "-1" => Ok(Sign::Minus),
            other => Err(format!("eps must be +1 or -1, got `{other}`")),
        }
    }
}

/// Parameters of one family member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "RawParams", try_from = "RawParams")]
pub struct AutParams {
    pub eps: Sign,
    pub a: Scalar,
    /// Odd-part factor, `s² = eps`.
    pub s: Scalar,
    /// Square root of `a`, present exactly on the half-integer grid.
    pub h: Option<Scalar>,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    eps: String,
    a: String,
    s: String,
    h: Option<String>,
}

impl From<AutParams> for RawParams {
    fn from(p: AutParams) -> Self {
        RawParams { eps: p.eps.to_string(), a: p.a.to_string(), s: p.s.to_string(), h: p.h.map(|h| h.to_string()) }
    }
}

impl TryFrom<RawParams> for AutParams {
    type Error = String;

    fn try_from(r: RawParams) -> Result<Self, Self::Error> {
        let scalar = |t: &str| t.parse::<Scalar>().map_err(|e| e.to_string());
        Ok(AutParams {
            eps: r.eps.parse()?,
            a: scalar(&r.a)?,
            s: scalar(&r.s)?,
            h: r.h.as_deref().map(scalar).transpose()?,
        })
    }
}

impl fmt::Display for AutParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(eps={}, a={}, s={}", self.eps, self.a, self.s)?;
        if let Some(h) = &self.h {
            write!(f, ", h={h}")?;
        }
        f.write_str(")")
    }
}

fn is_half(cfg: &AlgebraConfig) -> bool {
    cfg.epsilon == Epsilon::Half
}

impl AutParams {
    /// Builds and validates parameters, returning the canonical representative.
    pub fn new(cfg: &AlgebraConfig, eps: Sign, a: Scalar, s: Scalar, h: Option<Scalar>) -> Result<Self, AutError> {
        let p = AutParams { eps, a, s, h };
        p.validate(cfg)?;
        Ok(p.canonical())
    }

    /// Parameters on the half grid from `h`, with `a = h²`.
    pub fn from_root(eps: Sign, h: Scalar, s: Scalar) -> Self {
        AutParams { eps, a: &h * &h, s, h: Some(h) }.canonical()
    }

    pub fn identity(cfg: &AlgebraConfig) -> Self {
        AutParams { eps: Sign::Plus, a: Scalar::one(), s: Scalar::one(), h: is_half(cfg).then(Scalar::one) }
    }

    /// The grading involution.
    pub fn omega(cfg: &AlgebraConfig) -> Self {
        if is_half(cfg) {
            AutParams { eps: Sign::Plus, a: Scalar::one(), s: Scalar::one(), h: Some(-Scalar::one()) }
        } else {
            AutParams { eps: Sign::Plus, a: Scalar::one(), s: -Scalar::one(), h: None }
        }
    }

    pub fn validate(&self, cfg: &AlgebraConfig) -> Result<(), AutError> {
        let bad = |m: String| Err(AutError::InvalidParams(m));
        if self.a.is_zero() {
            return bad("a must be nonzero".into());
        }
        if &self.s * &self.s != self.eps.scalar() {
            return bad(format!("s² must equal eps, got s = {}", self.s));
        }
        match (&self.h, is_half(cfg)) {
            (None, true) => bad("h with h² = a is required on the half-integer grid".into()),
            (Some(_), false) => bad("h is only used on the half-integer grid".into()),
            (Some(h), true) if &(h * h) != &self.a => bad(format!("h² must equal a, got h = {h}")),
            _ => Ok(()),
        }
    }

    /// On the half grid `(s, h)` and `(-s, -h)` give the same map; the
    /// representative has `s ∈ {1, i}`.
    pub fn canonical(&self) -> Self {
        match &self.h {
            Some(h) if !(self.s.is_one() || self.s == Scalar::i()) => {
                AutParams { eps: self.eps, a: self.a.clone(), s: -&self.s, h: Some(-h) }
            }
            _ => self.clone(),
        }
    }

    fn base(&self) -> &Scalar {
        self.h.as_ref().unwrap_or(&self.a)
    }

    fn factor(&self, sym: &BasisSymbol) -> Scalar {
        match sym.kind {
            Kind::G => self.s.clone(),
            _ => self.eps.scalar(),
        }
    }

    pub fn apply(&self, cfg: &AlgebraConfig, x: &Element) -> Result<Element, AutError> {
        self.validate(cfg)?;
        cfg.check_element(x)?;
        Ok(self.apply_unchecked(cfg, x))
    }

    fn apply_unchecked(&self, cfg: &AlgebraConfig, x: &Element) -> Element {
        let mut out = Element::zero();
        for (sym, c) in x.terms() {
            let pow = self.base().int_pow(exponent(cfg, sym)).expect("base is nonzero");
            out.add_term(flip(sym, self.eps), &(&(c * &self.factor(sym)) * &pow));
        }
        out
    }

    /// Parameters of `self ∘ other`.
    pub fn compose(&self, other: &AutParams) -> AutParams {
        let pow = |x: &Scalar| x.int_pow(other.eps.value()).expect("nonzero");
        AutParams {
            eps: self.eps.times(other.eps),
            a: &other.a * &pow(&self.a),
            s: &self.s * &other.s,
            h: match (&self.h, &other.h) {
                (Some(h1), Some(h2)) => Some(h2 * &pow(h1)),
                _ => None,
            },
        }
        .canonical()
    }

    pub fn invert(&self) -> AutParams {
        let pow = |x: &Scalar| x.int_pow(-self.eps.value()).expect("nonzero");
        AutParams {
            eps: self.eps,
            a: pow(&self.a),
            s: &self.s * &self.eps.scalar(),
            h: self.h.as_ref().map(pow),
        }
        .canonical()
    }
}

/// Exponent of the base (`a` on the integer grid, `h` on the half grid).
fn exponent(cfg: &AlgebraConfig, sym: &BasisSymbol) -> i64 {
    match (sym.kind, cfg.epsilon) {
        (Kind::C, _) => 0,
        (_, Epsilon::Zero) => sym.d / 2,
        (_, Epsilon::Half) => sym.d,
    }
}

fn flip(sym: &BasisSymbol, eps: Sign) -> BasisSymbol {
    BasisSymbol::new(sym.kind, sym.d * eps.value())
}

/// `σ_p` tabulated on the basis window of the given radius.
pub fn apply_table(cfg: &AlgebraConfig, p: &AutParams, radius: i64) -> Result<MapTable, AutError> {
    p.validate(cfg)?;
    let inputs = cfg.basis_window(radius).into_iter().map(Element::basis).collect();
    Ok(MapTable::from_fn(*cfg, inputs, None, |x| p.apply_unchecked(cfg, x))?)
}

/// `ω` tabulated on the basis window of the given radius.
pub fn grading_involution(cfg: &AlgebraConfig, radius: i64) -> MapTable {
    apply_table(cfg, &AutParams::omega(cfg), radius).expect("omega is valid")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AutViolation {
    pub x: BasisSymbol,
    pub y: BasisSymbol,
    /// `t([x, y])`
    pub lhs: Element,
    /// `[t(x), t(y)]`
    pub rhs: Element,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AutCheck {
    pub violations: Vec<AutViolation>,
    pub injective: bool,
}

impl AutCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.injective
    }

    pub fn first_violation(&self) -> Option<&AutViolation> {
        self.violations.first()
    }
}

/// Checks `t([x, y]) = [t(x), t(y)]` on every pair of basis symbols with
/// `|degree| <= check_radius`, and injectivity on that window.
pub fn is_automorphism_table(t: &MapTable, check_radius: i64) -> Result<AutCheck, AutError> {
    is_automorphism_table_with(t, check_radius, Strategy::default())
}

pub fn is_automorphism_table_with(t: &MapTable, check_radius: i64, strategy: Strategy) -> Result<AutCheck, AutError> {
    let cfg = *t.cfg();
    let window = cfg.basis_window(check_radius);
    let mut missing = BTreeSet::new();
    for &x in &window {
        if !t.defines_symbol(&x) {
            missing.insert(x);
        }
        for &y in &window {
            missing.extend(bracket_unchecked(&cfg, &x.elem(), &y.elem()).symbols().filter(|s| !t.defines_symbol(s)));
        }
    }
    if !missing.is_empty() {
        return Err(AutError::DomainInsufficient(missing.into_iter().collect()));
    }
    let images: HashMap<BasisSymbol, Element> =
        window.iter().map(|&s| (s, t.eval(&s.elem()).expect("domain checked"))).collect();
    let violations = par_flat_map(strategy, &window, |&x| {
        window
            .iter()
            .filter_map(|&y| {
                let lhs = t.eval(&bracket_unchecked(&cfg, &x.elem(), &y.elem())).expect("domain checked");
                let rhs = bracket_unchecked(&cfg, &images[&x], &images[&y]);
                (lhs != rhs).then_some(AutViolation { x, y, lhs, rhs })
            })
            .collect()
    });
    let support: BTreeSet<BasisSymbol> = images.values().flat_map(|e| e.symbols().copied()).collect();
    let target = Window::new(cfg, support.into_iter().collect()).map_err(DerivationError::from)?;
    let rows = window.iter().map(|s| target.coords(&images[s])).collect::<Result<Vec<_>, _>>().map_err(DerivationError::from)?;
    let injective = rows.is_empty() || Matrix::from_rows(rows).map_err(DerivationError::from)?.rref().rank == window.len();
    Ok(AutCheck { violations, injective })
}

/// One scalar condition `base^exponent = value` read off a single term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermConstraint {
    /// Index of the `(x, image)` pair the term belongs to.
    pub entry: usize,
    pub symbol: BasisSymbol,
    pub exponent: i64,
    pub value: Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitObstruction {
    /// The image has the wrong support for this branch.
    SupportMismatch { entry: usize, symbol: BasisSymbol },
    /// A term whose coefficient does not involve the base needs factor 1.
    FixedViolation(TermConstraint),
    /// Two terms with no common base.
    Conflict(TermConstraint, TermConstraint),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaseConstraint {
    /// Any nonzero base.
    Free,
    /// `base^exponent = value` with `exponent >= 1`.
    Power { exponent: u32, value: Scalar },
    Empty(FitObstruction),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FitBranch {
    pub eps: Sign,
    pub s: Scalar,
    /// Constraint on `a` (integer grid) or `h` (half grid).
    pub base: BaseConstraint,
}

impl FitBranch {
    pub fn is_empty(&self) -> bool {
        matches!(self.base, BaseConstraint::Empty(_))
    }
}

/// All family members sending each `x` to its image, split by `(eps, s)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FitFamily {
    pub cfg: AlgebraConfig,
    pub branches: Vec<FitBranch>,
}

impl FitFamily {
    pub fn is_empty(&self) -> bool {
        self.branches.iter().all(FitBranch::is_empty)
    }

    /// Members with parameters in `Q(i)`. The flag is `false` when a branch
    /// has a free base or a root search could not be completed.
    pub fn solutions(&self) -> (Vec<AutParams>, bool) {
        let mut out = Vec::new();
        let mut complete = true;
        for b in &self.branches {
            match &b.base {
                BaseConstraint::Empty(_) => {}
                BaseConstraint::Free => complete = false,
                BaseConstraint::Power { exponent, value } => {
                    let (roots, ok) = value.roots(*exponent);
                    complete &= ok;
                    for r in roots {
                        let p = if is_half(&self.cfg) {
                            AutParams::from_root(b.eps, r, b.s.clone())
                        } else {
                            AutParams { eps: b.eps, a: r, s: b.s.clone(), h: None }
                        };
                        if !out.contains(&p) {
                            out.push(p);
                        }
                    }
                }
            }
        }
        (out, complete)
    }

    pub fn contains(&self, p: &AutParams) -> bool {
        let p = p.canonical();
        self.branches.iter().any(|b| {
            b.eps == p.eps
                && b.s == p.s
                && match &b.base {
                    BaseConstraint::Empty(_) => false,
                    BaseConstraint::Free => true,
                    BaseConstraint::Power { exponent, value } => {
                        p.base().int_pow(*exponent as i64).map(|v| &v == value).unwrap_or(false)
                    }
                }
        })
    }
}

fn branch_signs(cfg: &AlgebraConfig) -> Vec<(Sign, Scalar)> {
    if is_half(cfg) {
        vec![(Sign::Plus, Scalar::one()), (Sign::Minus, Scalar::i())]
    } else {
        vec![
            (Sign::Plus, Scalar::one()),
            (Sign::Plus, -Scalar::one()),
            (Sign::Minus, Scalar::i()),
            (Sign::Minus, -Scalar::i()),
        ]
    }
}

/// `c1^{k2/g} = c2^{k1/g}`: the two conditions share a base.
fn compatible(k1: u32, c1: &Scalar, k2: u32, c2: &Scalar) -> bool {
    let g = num_integer::gcd(k1, k2);
    c1.int_pow((k2 / g) as i64).ok() == c2.int_pow((k1 / g) as i64).ok()
}

fn normalized(t: &TermConstraint) -> (u32, Scalar) {
    if t.exponent > 0 {
        (t.exponent as u32, t.value.clone())
    } else {
        ((-t.exponent) as u32, t.value.inv().expect("nonzero"))
    }
}

fn fold_constraints(terms: &[TermConstraint]) -> BaseConstraint {
    let mut acc: Option<(u32, Scalar)> = None;
    for (i, t) in terms.iter().enumerate() {
        if t.exponent == 0 {
            if !t.value.is_one() {
                return BaseConstraint::Empty(FitObstruction::FixedViolation(t.clone()));
            }
            continue;
        }
        let (k, c) = normalized(t);
        acc = Some(match acc {
            None => (k, c),
            Some((g0, c0)) => {
                if !compatible(g0, &c0, k, &c) {
                    // pairwise compatibility is sufficient, so some earlier term clashes with t
                    let other = terms[..i]
                        .iter()
                        .filter(|u| u.exponent != 0)
                        .find(|u| {
                            let (k1, c1) = normalized(u);
                            !compatible(k1, &c1, k, &c)
                        })
                        .expect("a pairwise conflict exists");
                    return BaseConstraint::Empty(FitObstruction::Conflict(other.clone(), t.clone()));
                }
                let (g, u, v) = ext_gcd(g0 as i64, k as i64);
                let value = &c0.int_pow(u).expect("nonzero") * &c.int_pow(v).expect("nonzero");
                (g as u32, value)
            }
        });
    }
    match acc {
        None => BaseConstraint::Free,
        Some((exponent, value)) => BaseConstraint::Power { exponent, value },
    }
}

/// `(g, u, v)` with `u·a + v·b = g = gcd(a, b)`.
fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, u, v) = ext_gcd(b, a % b);
        (g, v, u - (a / b) * v)
    }
}

/// Family members `p` with `apply(p, x) = image`.
pub fn fit_single(cfg: &AlgebraConfig, x: &Element, image: &Element) -> Result<FitFamily, AutError> {
    fit_many(cfg, &[(x.clone(), image.clone())])
}

/// Family members agreeing with every `(x, image)` pair at once.
pub fn fit_many(cfg: &AlgebraConfig, entries: &[(Element, Element)]) -> Result<FitFamily, AutError> {
    for (x, y) in entries {
        cfg.check_element(x)?;
        cfg.check_element(y)?;
        if x.is_zero() {
            return Err(AutError::ZeroInput);
        }
    }
    let branches = branch_signs(cfg)
        .into_iter()
        .map(|(eps, s)| FitBranch { base: branch_constraint(cfg, entries, eps, &s), eps, s })
        .collect();
    Ok(FitFamily { cfg: *cfg, branches })
}

fn branch_constraint(cfg: &AlgebraConfig, entries: &[(Element, Element)], eps: Sign, s: &Scalar) -> BaseConstraint {
    let mut terms = Vec::new();
    for (j, (x, image)) in entries.iter().enumerate() {
        let mapped: BTreeSet<BasisSymbol> = x.symbols().map(|sym| flip(sym, eps)).collect();
        if let Some(extra) = image.symbols().find(|t| !mapped.contains(t)) {
            return BaseConstraint::Empty(FitObstruction::SupportMismatch { entry: j, symbol: *extra });
        }
        for (sym, c) in x.terms() {
            let target = flip(sym, eps);
            let w = image.coeff(&target);
            if w.is_zero() {
                return BaseConstraint::Empty(FitObstruction::SupportMismatch { entry: j, symbol: target });
            }
            let k = if sym.kind == Kind::G { s.clone() } else { eps.scalar() };
            let value = w.checked_div(&(c * &k)).expect("nonzero");
            terms.push(TermConstraint { entry: j, symbol: *sym, exponent: exponent(cfg, sym), value });
        }
    }
    fold_constraints(&terms)
}

/// Finite table of values at possibly dependent probe elements.
#[derive(Debug, Clone)]
pub struct ProbeTable {
    cfg: AlgebraConfig,
    entries: Vec<(Element, Element)>,
    index: HashMap<Element, usize>,
}

impl ProbeTable {
    pub fn new(cfg: AlgebraConfig, entries: Vec<(Element, Element)>) -> Result<Self, AutError> {
        for (x, y) in &entries {
            cfg.check_element(x)?;
            cfg.check_element(y)?;
        }
        let index = entries.iter().enumerate().map(|(i, (x, _))| (x.clone(), i)).collect();
        Ok(ProbeTable { cfg, entries, index })
    }

    pub fn from_fn<F: Fn(&Element) -> Element>(cfg: AlgebraConfig, probes: Vec<Element>, f: F) -> Result<Self, AutError> {
        let entries = probes.into_iter().map(|x| {
            let y = f(&x);
            (x, y)
        });
        ProbeTable::new(cfg, entries.collect())
    }

    pub fn cfg(&self) -> &AlgebraConfig {
        &self.cfg
    }

    pub fn entries(&self) -> &[(Element, Element)] {
        &self.entries
    }

    pub fn get(&self, x: &Element) -> Option<&Element> {
        self.index.get(x).map(|&i| &self.entries[i].1)
    }

    /// Replaces the value at `x`, adding the entry if needed.
    pub fn set(&mut self, x: Element, y: Element) {
        match self.index.get(&x) {
            Some(&i) => self.entries[i].1 = y,
            None => {
                self.index.insert(x.clone(), self.entries.len());
                self.entries.push((x, y));
            }
        }
    }
}

fn grid_g(cfg: &AlgebraConfig, radius: i64) -> Vec<BasisSymbol> {
    cfg.basis_window(radius).into_iter().filter(|s| s.kind == Kind::G).collect()
}

fn sum(parts: &[BasisSymbol]) -> Element {
    parts.iter().fold(Element::zero(), |acc, s| &acc + &s.elem())
}

/// Probes required by [`local_aut_decide`]: `L(1)`; `G(r)` and `G(r)+L(1)`;
/// `L(m)` and `L(m)+L(1)`; `C` and `C+L(1)` when centered; and
/// `G(r)+G(r')+L(1)` for consecutive grid points `r < r'`.
pub fn full_probe_set(cfg: &AlgebraConfig, radius: i64) -> Vec<Element> {
    let l1 = BasisSymbol::l(1);
    let mut out = vec![l1.elem()];
    let gs = grid_g(cfg, radius);
    for &g in &gs {
        out.push(g.elem());
        out.push(sum(&[l1, g]));
    }
    if cfg.with_center {
        out.push(BasisSymbol::c().elem());
        out.push(sum(&[l1, BasisSymbol::c()]));
    }
    for m in -radius..=radius {
        if m != 1 {
            out.push(BasisSymbol::l(m).elem());
            out.push(sum(&[BasisSymbol::l(m), l1]));
        }
    }
    for pair in gs.windows(2) {
        out.push(sum(&[l1, pair[0], pair[1]]));
    }
    out
}

/// Default query budget for [`two_local_recover`]: basis symbols, `G(r)+L(1)`
/// and consecutive `G(r)+G(r')`.
pub fn two_local_budget(cfg: &AlgebraConfig, radius: i64) -> Vec<Element> {
    let l1 = BasisSymbol::l(1);
    let gs = grid_g(cfg, radius);
    let mut out: Vec<Element> = cfg.basis_window(radius).into_iter().map(Element::basis).collect();
    out.extend(gs.iter().map(|&g| sum(&[l1, g])));
    out.extend(gs.windows(2).map(sum));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LocalVerdict {
    Automorphism(AutParams),
    /// No family member sends the probe to its tabulated value.
    PointwiseFailure { probe: Element, image: Element, family: FitFamily },
    /// Every probe is realizable on its own but these probes have no common member.
    GlobalInconsistency { probes: Vec<Element>, family: FitFamily },
}

/// Decides whether a probe table of a local automorphism agrees with a
/// single family member, returning that member or a counterexample.
pub fn local_aut_decide(t: &ProbeTable, radius: i64) -> Result<LocalVerdict, AutError> {
    local_aut_decide_with(t, radius, Strategy::default())
}

pub fn local_aut_decide_with(t: &ProbeTable, radius: i64, strategy: Strategy) -> Result<LocalVerdict, AutError> {
    let cfg = *t.cfg();
    let required = full_probe_set(&cfg, radius);
    let missing: Vec<Element> = required.iter().filter(|p| t.get(p).is_none()).cloned().collect();
    if !missing.is_empty() {
        return Err(AutError::MissingProbes(missing));
    }
    let entries = t.entries();
    let pointwise = par_map(strategy, entries, |(x, y)| fit_single(&cfg, x, y));
    for ((x, y), fam) in entries.iter().zip(pointwise) {
        let fam = fam?;
        if fam.is_empty() {
            return Ok(LocalVerdict::PointwiseFailure { probe: x.clone(), image: y.clone(), family: fam });
        }
    }
    let global = fit_many(&cfg, entries)?;
    if global.is_empty() {
        let probes = inconsistent_subset(&cfg, entries, strategy)?;
        let sub: Vec<(Element, Element)> = probes.iter().map(|p| (p.clone(), t.get(p).expect("probe").clone())).collect();
        return Ok(LocalVerdict::GlobalInconsistency { probes, family: fit_many(&cfg, &sub)? });
    }
    let p = unique_solution(&global)?;
    debug_assert!(entries.iter().all(|(x, y)| &p.apply_unchecked(&cfg, x) == y));
    Ok(LocalVerdict::Automorphism(p))
}

fn unique_solution(family: &FitFamily) -> Result<AutParams, AutError> {
    let (sols, _) = family.solutions();
    match sols.into_iter().next() {
        Some(p) => Ok(p),
        None => {
            let (value, degree) = family
                .branches
                .iter()
                .find_map(|b| match &b.base {
                    BaseConstraint::Power { exponent, value } => Some((value.clone(), *exponent)),
                    _ => None,
                })
                .unwrap_or((Scalar::one(), 1));
            Err(AutError::Unrepresentable { value, degree })
        }
    }
}

/// Smallest jointly unrealizable set: a pair if one exists, else all entries.
fn inconsistent_subset(
    cfg: &AlgebraConfig,
    entries: &[(Element, Element)],
    strategy: Strategy,
) -> Result<Vec<Element>, AutError> {
    let indices: Vec<usize> = (0..entries.len()).collect();
    let pairs = par_flat_map(strategy, &indices, |&i| {
        (i + 1..entries.len())
            .filter(|&j| {
                fit_many(cfg, &[entries[i].clone(), entries[j].clone()]).map(|f| f.is_empty()).unwrap_or(false)
            })
            .map(|j| (i, j))
            .collect()
    });
    Ok(match pairs.first() {
        Some(&(i, j)) => vec![entries[i].0.clone(), entries[j].0.clone()],
        None => entries.iter().map(|(x, _)| x.clone()).collect(),
    })
}

/// A map that can be queried at arbitrary elements, possibly concurrently.
pub trait Oracle: Sync {
    fn value(&self, x: &Element) -> Element;
}

impl<F: Fn(&Element) -> Element + Sync> Oracle for F {
    fn value(&self, x: &Element) -> Element {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairReason {
    /// No family member realizes the value at `L(1)`.
    NotRealizable,
    /// No member fixing the value at `L(1)` matches the value at the second element.
    NoCommonCandidate,
    /// No member matches both values.
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TwoLocalVerdict {
    Automorphism(AutParams),
    PairFailure { pair: (Element, Element), reason: PairReason },
    /// Every pair in the budget is realizable but no single member fits all.
    Inconsistent { probes: Vec<Element> },
    /// More than one member fits the whole budget.
    Underdetermined { candidates: Vec<AutParams> },
}

/// Recovers the automorphism behind a 2-local automorphism oracle from the
/// members fitting its value at `L(1)`, or returns a failing pair.
pub fn two_local_recover(cfg: &AlgebraConfig, oracle: &dyn Oracle, budget: &[Element]) -> Result<TwoLocalVerdict, AutError> {
    two_local_recover_with(cfg, oracle, budget, Strategy::default())
}

pub fn two_local_recover_with(
    cfg: &AlgebraConfig,
    oracle: &dyn Oracle,
    budget: &[Element],
    strategy: Strategy,
) -> Result<TwoLocalVerdict, AutError> {
    let l1 = BasisSymbol::l(1).elem();
    let v1 = oracle.value(&l1);
    let family = fit_single(cfg, &l1, &v1)?;
    if family.is_empty() {
        return Ok(TwoLocalVerdict::PairFailure { pair: (l1.clone(), l1), reason: PairReason::NotRealizable });
    }
    let (candidates, complete) = family.solutions();
    if candidates.is_empty() || !complete {
        return Err(unique_solution(&family).err().unwrap_or(AutError::Unrepresentable { value: v1.coeff(&BasisSymbol::l(1)), degree: 2 }));
    }
    let answers = par_map(strategy, budget, |z| {
        let v = oracle.value(z);
        let matching: Vec<bool> = candidates.iter().map(|c| c.apply_unchecked(cfg, z) == v).collect();
        (v, matching)
    });
    for (z, (v, matching)) in budget.iter().zip(&answers) {
        cfg.check_element(v)?;
        if !matching.iter().any(|&m| m) {
            return Ok(TwoLocalVerdict::PairFailure { pair: (l1.clone(), z.clone()), reason: PairReason::NoCommonCandidate });
        }
    }
    let survivors: Vec<usize> =
        (0..candidates.len()).filter(|&c| answers.iter().all(|(_, m)| m[c])).collect();
    match survivors.len() {
        1 => Ok(TwoLocalVerdict::Automorphism(candidates[survivors[0]].clone())),
        0 => {
            // z1 rules out candidate 0 and z2 rules out everything z1 allowed
            let z1 = answers.iter().position(|(_, m)| !m[0]).expect("candidate 0 fails somewhere");
            let allowed: Vec<usize> = (0..candidates.len()).filter(|&c| answers[z1].1[c]).collect();
            let z2 = answers
                .iter()
                .position(|(_, m)| allowed.iter().all(|&c| !m[c]))
                .unwrap_or(z1);
            let pair = [(budget[z1].clone(), answers[z1].0.clone()), (budget[z2].clone(), answers[z2].0.clone())];
            if fit_many(cfg, &pair)?.is_empty() {
                Ok(TwoLocalVerdict::PairFailure { pair: (budget[z1].clone(), budget[z2].clone()), reason: PairReason::Conflict })
            } else {
                Ok(TwoLocalVerdict::Inconsistent { probes: vec![l1, budget[z1].clone(), budget[z2].clone()] })
            }
        }
        _ => Ok(TwoLocalVerdict::Underdetermined { candidates: survivors.into_iter().map(|c| candidates[c].clone()).collect() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const C0: AlgebraConfig = AlgebraConfig::new(Epsilon::Zero, true);
    const CH: AlgebraConfig = AlgebraConfig::new(Epsilon::Half, true);

    fn el(t: &str) -> Element {
        t.parse().unwrap()
    }

    fn p0(eps: Sign, a: Scalar, s: Scalar) -> AutParams {
        AutParams::new(&C0, eps, a, s, None).unwrap()
    }

    #[test]
    fn apply_examples() {
        let p = p0(Sign::Plus, Scalar::from_int(2), Scalar::one());
        assert_eq!(p.apply(&C0, &el("L(3)")).unwrap(), el("8*L(3)"));
        assert_eq!(p.apply(&C0, &el("G(-1)")).unwrap(), el("(1/2)*G(-1)"));
        let q = p0(Sign::Minus, Scalar::one(), -Scalar::i());
        assert_eq!(q.apply(&C0, &el("G(2)")).unwrap(), el("(-1i)*G(-2)"));
        assert_eq!(q.apply(&C0, &el("C")).unwrap(), el("-C"));
        let x = el("3*L(-2) + (1/2)*G(4) - C");
        assert_eq!(AutParams::identity(&C0).apply(&C0, &x).unwrap(), x);
    }

    #[test]
    fn half_grid_powers_use_h() {
        let p = AutParams::new(&CH, Sign::Plus, Scalar::from_int(4), Scalar::one(), Some(Scalar::from_int(2))).unwrap();
        assert_eq!(p.apply(&CH, &el("G(3/2)")).unwrap(), el("8*G(3/2)"));
        assert_eq!(p.apply(&CH, &el("L(-1)")).unwrap(), el("(1/4)*L(-1)"));
        assert!(AutParams::new(&CH, Sign::Plus, Scalar::from_int(4), Scalar::one(), None).is_err());
        assert!(AutParams::new(&CH, Sign::Plus, Scalar::from_int(4), Scalar::one(), Some(Scalar::from_int(3))).is_err());
        // (s, h) and (-s, -h) coincide
        let q = AutParams::new(&CH, Sign::Plus, Scalar::from_int(4), -Scalar::one(), Some(Scalar::from_int(-2))).unwrap();
        assert_eq!(q, p);
    }

    #[test]
    fn compose_and_invert_examples() {
        let two = Scalar::from_int(2);
        let p = p0(Sign::Plus, two.clone(), Scalar::one());
        let q = p0(Sign::Minus, Scalar::from_int(3), Scalar::i());
        let pq = p.compose(&q);
        assert_eq!(pq, p0(Sign::Minus, Scalar::ratio(3, 2), Scalar::i()));
        let l1 = el("L(1)");
        assert_eq!(pq.apply(&C0, &l1).unwrap(), p.apply(&C0, &q.apply(&C0, &l1).unwrap()).unwrap());
        assert_eq!(p.compose(&AutParams::identity(&C0)), p);
        let flip = p0(Sign::Minus, Scalar::one(), Scalar::i());
        assert_eq!(flip.compose(&flip), AutParams::omega(&C0));

        assert_eq!(p0(Sign::Plus, two.clone(), -Scalar::one()).invert(), p0(Sign::Plus, Scalar::ratio(1, 2), -Scalar::one()));
        assert_eq!(p0(Sign::Minus, two, Scalar::i()).invert(), p0(Sign::Minus, Scalar::from_int(2), -Scalar::i()));
        assert_eq!(AutParams::identity(&C0).invert(), AutParams::identity(&C0));
    }

    #[test]
    fn automorphism_table_examples() {
        let p = p0(Sign::Plus, Scalar::from_int(2), Scalar::one());
        assert!(is_automorphism_table(&apply_table(&C0, &p, 8).unwrap(), 4).unwrap().passed());
        assert!(is_automorphism_table(&grading_involution(&C0, 10), 5).unwrap().passed());
        assert!(is_automorphism_table(&grading_involution(&CH, 10), 5).unwrap().passed());

        let omega = grading_involution(&C0, 3);
        assert_eq!(omega.eval(&el("G(1)")).unwrap(), el("-G(1)"));
        let twice: Vec<(Element, Element)> =
            omega.entries().iter().map(|(x, y)| (x.clone(), omega.eval(y).unwrap())).collect();
        assert!(twice.iter().all(|(x, y)| x == y));

        let inputs = C0.basis_window(4).into_iter().map(Element::basis).collect();
        let t = MapTable::from_fn(C0, inputs, None, |x| {
            if *x == el("C") {
                el("2*C")
            } else {
                x.clone()
            }
        })
        .unwrap();
        let check = is_automorphism_table(&t, 2).unwrap();
        assert!(!check.passed());
        assert!(check.violations.iter().any(|v| v.x == BasisSymbol::g(1) && v.y == BasisSymbol::g(-1)));
        assert!(matches!(is_automorphism_table(&t, 3), Err(AutError::DomainInsufficient(_))));
    }

    #[test]
    fn fit_examples() {
        let fam = fit_single(&C0, &el("L(1)"), &el("3*L(-1)")).unwrap();
        let (sols, complete) = fam.solutions();
        assert!(complete);
        assert_eq!(
            sols,
            vec![p0(Sign::Minus, Scalar::from_int(-3), Scalar::i()), p0(Sign::Minus, Scalar::from_int(-3), -Scalar::i())]
        );

        let fam = fit_single(&C0, &el("L(1)"), &el("L(1)")).unwrap();
        let (sols, _) = fam.solutions();
        assert_eq!(sols, vec![AutParams::identity(&C0), AutParams::omega(&C0)]);

        let fam = fit_single(&C0, &el("G(1) + G(2) + L(1)"), &el("-G(1) + G(2) + L(1)")).unwrap();
        assert!(fam.is_empty());
        let reasons: Vec<&BaseConstraint> = fam.branches.iter().map(|b| &b.base).collect();
        assert!(matches!(reasons[0], BaseConstraint::Empty(FitObstruction::Conflict(..))));
        assert!(matches!(reasons[2], BaseConstraint::Empty(FitObstruction::SupportMismatch { .. })));
    }

    #[test]
    fn fit_folds_powers() {
        // a^2 = 9 and a^3 = -27 leave a = -3
        let fam = fit_single(&C0, &el("L(2) + L(3)"), &el("9*L(2) - 27*L(3)")).unwrap();
        assert_eq!(fam.solutions().0, vec![p0(Sign::Plus, Scalar::from_int(-3), Scalar::one()), p0(Sign::Plus, Scalar::from_int(-3), -Scalar::one())]);
        // C alone does not see the base
        let fam = fit_single(&C0, &el("C"), &el("C")).unwrap();
        assert!(matches!(fam.branches[0].base, BaseConstraint::Free));
        assert!(!fam.solutions().1);
        let fam = fit_single(&C0, &el("C"), &el("2*C")).unwrap();
        assert!(fam.is_empty());
    }

    #[test]
    fn local_examples() {
        let p = p0(Sign::Minus, Scalar::from_int(2), Scalar::i());
        let t = ProbeTable::from_fn(C0, full_probe_set(&C0, 3), |x| p.apply(&C0, x).unwrap()).unwrap();
        assert_eq!(local_aut_decide(&t, 3).unwrap(), LocalVerdict::Automorphism(p));

        let w = AutParams::omega(&C0);
        let t = ProbeTable::from_fn(C0, full_probe_set(&C0, 3), |x| w.apply(&C0, x).unwrap()).unwrap();
        assert_eq!(local_aut_decide(&t, 3).unwrap(), LocalVerdict::Automorphism(w));

        let mut t = ProbeTable::from_fn(C0, full_probe_set(&C0, 3), |x| x.clone()).unwrap();
        t.set(el("G(1) + L(1)"), el("-G(1) + L(1)"));
        t.set(el("G(1) + G(2) + L(1)"), el("-G(1) + G(2) + L(1)"));
        match local_aut_decide(&t, 3).unwrap() {
            LocalVerdict::PointwiseFailure { probe, .. } => assert_eq!(probe, el("G(1) + G(2) + L(1)")),
            other => panic!("{other:?}"),
        }

        // each value realizable alone, but G(1) and G(2) disagree on the sign
        let mut t = ProbeTable::from_fn(C0, full_probe_set(&C0, 3), |x| x.clone()).unwrap();
        t.set(el("G(1)"), el("-G(1)"));
        match local_aut_decide(&t, 3).unwrap() {
            LocalVerdict::GlobalInconsistency { probes, family } => {
                assert_eq!(probes.len(), 2);
                assert!(family.is_empty());
            }
            other => panic!("{other:?}"),
        }

        let t = ProbeTable::new(C0, vec![(el("L(1)"), el("L(1)"))]).unwrap();
        assert!(matches!(local_aut_decide(&t, 2), Err(AutError::MissingProbes(_))));
    }

    #[test]
    fn local_on_half_grid() {
        let p = AutParams::from_root(Sign::Minus, Scalar::gaussian(1, 1, 1, 1), Scalar::i());
        let t = ProbeTable::from_fn(CH, full_probe_set(&CH, 3), |x| p.apply(&CH, x).unwrap()).unwrap();
        assert_eq!(local_aut_decide(&t, 3).unwrap(), LocalVerdict::Automorphism(p));
    }

    #[test]
    fn two_local_examples() {
        let budget = two_local_budget(&C0, 3);
        let p = p0(Sign::Plus, Scalar::from_int(2), Scalar::one());
        let oracle = |x: &Element| p.apply(&C0, x).unwrap();
        assert_eq!(two_local_recover(&C0, &oracle, &budget).unwrap(), TwoLocalVerdict::Automorphism(p.clone()));

        let w = AutParams::omega(&C0);
        let oracle = |x: &Element| w.apply(&C0, x).unwrap();
        assert_eq!(two_local_recover(&C0, &oracle, &budget).unwrap(), TwoLocalVerdict::Automorphism(w.clone()));

        let oracle = |x: &Element| if *x == el("G(1) + G(2)") { el("G(1) - G(2)") } else { x.clone() };
        assert_eq!(
            two_local_recover(&C0, &oracle, &budget).unwrap(),
            TwoLocalVerdict::PairFailure { pair: (el("L(1)"), el("G(1) + G(2)")), reason: PairReason::NoCommonCandidate }
        );

        let oracle = |x: &Element| if *x == el("L(1)") { el("L(2)") } else { x.clone() };
        assert!(matches!(
            two_local_recover(&C0, &oracle, &budget).unwrap(),
            TwoLocalVerdict::PairFailure { reason: PairReason::NotRealizable, .. }
        ));

        // only even probes: the sign of s is never seen
        let even: Vec<Element> = budget.iter().filter(|x| x.symbols().all(|s| s.kind != Kind::G)).cloned().collect();
        let oracle = |x: &Element| x.clone();
        assert!(matches!(two_local_recover(&C0, &oracle, &even).unwrap(), TwoLocalVerdict::Underdetermined { .. }));
    }

    #[test]
    fn params_serialize_as_text() {
        let p = AutParams::new(&CH, Sign::Minus, Scalar::from_int(-4), Scalar::i(), Some(Scalar::gaussian(0, 1, 2, 1))).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"eps":"-1","a":"-4","s":"(1i)","h":"(2i)"}"#);
        assert_eq!(serde_json::from_str::<AutParams>(&json).unwrap(), p);
    }
}
