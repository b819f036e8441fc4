//! The super Virasoro algebras `SVir[0]`, `SVir[1/2]` and their centerless
//! quotients: basis symbols, sparse elements and the superbracket.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parallel::{par_flat_map, Strategy};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("symbol {symbol} is not valid for {config}")]
    ConfigMismatch { symbol: BasisSymbol, config: AlgebraConfig },
}

/// Which grid the odd generators `G(r)` live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Epsilon {
    /// `r` integral.
    #[serde(rename = "0")]
    Zero,
    /// `r` in `Z + 1/2`.
    #[serde(rename = "1/2")]
    Half,
}

impl Epsilon {
    /// Residue of the doubled index of `G(r)` modulo 2.
    pub fn odd_residue(self) -> i64 {
        match self {
            Epsilon::Zero => 0,
            Epsilon::Half => 1,
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Epsilon::Zero => f.write_str("0"),
            Epsilon::Half => f.write_str("1/2"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlgebraConfig {
    pub epsilon: Epsilon,
    pub with_center: bool,
}

impl AlgebraConfig {
    pub const fn new(epsilon: Epsilon, with_center: bool) -> Self {
        AlgebraConfig { epsilon, with_center }
    }

    /// The centerless quotient of `SVir[0]`.
    pub const fn centerless() -> Self {
        AlgebraConfig::new(Epsilon::Zero, false)
    }

    pub fn all() -> [AlgebraConfig; 4] {
        [
            AlgebraConfig::new(Epsilon::Zero, true),
            AlgebraConfig::new(Epsilon::Zero, false),
            AlgebraConfig::new(Epsilon::Half, true),
            AlgebraConfig::new(Epsilon::Half, false),
        ]
    }

    pub fn is_valid(&self, sym: &BasisSymbol) -> bool {
        match sym.kind {
            Kind::L => sym.d.rem_euclid(2) == 0,
            Kind::G => sym.d.rem_euclid(2) == self.epsilon.odd_residue(),
            Kind::C => sym.d == 0 && self.with_center,
        }
    }

    pub fn check_symbol(&self, sym: &BasisSymbol) -> Result<(), AlgebraError> {
        if self.is_valid(sym) {
            Ok(())
        } else {
            Err(AlgebraError::ConfigMismatch { symbol: *sym, config: *self })
        }
    }

    pub fn check_element(&self, x: &Element) -> Result<(), AlgebraError> {
        x.symbols().try_for_each(|s| self.check_symbol(s))
    }

    /// Every basis symbol with `|degree| <= radius`, in canonical order.
    pub fn basis_window(&self, radius: i64) -> Vec<BasisSymbol> {
        self.basis_between(-2 * radius, 2 * radius)
    }

    /// Basis symbols with doubled degree in `[lo, hi]`, canonical order.
    pub fn basis_between(&self, lo: i64, hi: i64) -> Vec<BasisSymbol> {
        let mut out: Vec<BasisSymbol> = (lo..=hi)
            .flat_map(|d| [BasisSymbol::new(Kind::L, d), BasisSymbol::new(Kind::G, d)])
            .filter(|s| self.is_valid(s))
            .collect();
        if self.with_center && lo <= 0 && hi >= 0 {
            out.push(BasisSymbol::c());
        }
        out.sort();
        out
    }
}

impl fmt::Display for AlgebraConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SVir[{}]", self.epsilon)?;
        if !self.with_center {
            f.write_str(" (centerless)")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    L,
    G,
    C,
}

/// `Z/2` grading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn bit(self) -> u8 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    pub fn shift(self, by: Parity) -> Parity {
        if self.bit() ^ by.bit() == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// `(-1)^{|a||b|}`
    pub fn sign(a: Parity, b: Parity) -> i64 {
        if a.bit() & b.bit() == 1 {
            -1
        } else {
            1
        }
    }
}

/// Parity classification of an arbitrary element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementParity {
    Even,
    Odd,
    Mixed,
    Zero,
}

/// A degree written as half its doubled value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt(pub i64);

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// `L(d/2)`, `G(d/2)` or `C`, stored with the doubled index `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisSymbol {
    pub kind: Kind,
    pub d: i64,
}

impl BasisSymbol {
    pub const fn new(kind: Kind, d: i64) -> Self {
        BasisSymbol { kind, d }
    }

    /// `L(m)`
    pub const fn l(m: i64) -> Self {
        BasisSymbol::new(Kind::L, 2 * m)
    }

    /// `G(r)` for integral `r`.
    pub const fn g(r: i64) -> Self {
        BasisSymbol::new(Kind::G, 2 * r)
    }

    /// `G(d/2)` from a doubled index.
    pub const fn g2(d: i64) -> Self {
        BasisSymbol::new(Kind::G, d)
    }

    pub const fn c() -> Self {
        BasisSymbol::new(Kind::C, 0)
    }

    pub fn parity(&self) -> Parity {
        match self.kind {
            Kind::G => Parity::Odd,
            _ => Parity::Even,
        }
    }

    pub fn degree(&self) -> HalfInt {
        HalfInt(self.d)
    }

    pub fn elem(self) -> Element {
        Element::basis(self)
    }
}

impl fmt::Display for BasisSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Kind::L => write!(f, "L({})", HalfInt(self.d)),
            Kind::G => write!(f, "G({})", HalfInt(self.d)),
            Kind::C => f.write_str("C"),
        }
    }
}

/// Finitely supported linear combination of basis symbols. Zero
/// coefficients are never stored, so equality is structural.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Element {
    terms: BTreeMap<BasisSymbol, Scalar>,
}

impl Element {
    pub fn zero() -> Self {
        Element::default()
    }

    pub fn basis(sym: BasisSymbol) -> Self {
        Element::term(Scalar::one(), sym)
    }

    pub fn term(coeff: Scalar, sym: BasisSymbol) -> Self {
        let mut e = Element::zero();
        e.add_term(sym, &coeff);
        e
    }

    pub fn from_terms<I: IntoIterator<Item = (BasisSymbol, Scalar)>>(terms: I) -> Self {
        let mut e = Element::zero();
        for (s, c) in terms {
            e.add_term(s, &c);
        }
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, sym: &BasisSymbol) -> Scalar {
        self.terms.get(sym).cloned().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisSymbol, &Scalar)> {
        self.terms.iter()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &BasisSymbol> {
        self.terms.keys()
    }

    pub fn add_term(&mut self, sym: BasisSymbol, coeff: &Scalar) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(sym).or_default();
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&sym);
        }
    }

    pub fn add_scaled(&mut self, other: &Element, factor: &Scalar) {
        if factor.is_zero() {
            return;
        }
        for (s, c) in &other.terms {
            self.add_term(*s, &(c * factor));
        }
    }

    pub fn scale(&self, factor: &Scalar) -> Element {
        if factor.is_zero() {
            return Element::zero();
        }
        Element { terms: self.terms.iter().map(|(s, c)| (*s, c * factor)).collect() }
    }

    pub fn parity(&self) -> ElementParity {
        let mut even = false;
        let mut odd = false;
        for s in self.terms.keys() {
            match s.parity() {
                Parity::Even => even = true,
                Parity::Odd => odd = true,
            }
        }
        match (even, odd) {
            (false, false) => ElementParity::Zero,
            (true, false) => ElementParity::Even,
            (false, true) => ElementParity::Odd,
            (true, true) => ElementParity::Mixed,
        }
    }

    /// The homogeneous component of the given parity.
    pub fn parity_part(&self, p: Parity) -> Element {
        self.filter(|s| s.parity() == p)
    }

    pub fn filter<F: Fn(&BasisSymbol) -> bool>(&self, keep: F) -> Element {
        Element { terms: self.terms.iter().filter(|(s, _)| keep(s)).map(|(s, c)| (*s, c.clone())).collect() }
    }

    /// Splits into degree-homogeneous parts, degrees strictly increasing.
    pub fn degree_decompose(&self) -> Vec<(HalfInt, Element)> {
        let mut blocks: BTreeMap<HalfInt, Element> = BTreeMap::new();
        for (s, c) in &self.terms {
            blocks.entry(s.degree()).or_default().add_term(*s, c);
        }
        blocks.into_iter().collect()
    }

    /// Largest `|degree|` in the support, as a doubled value.
    pub fn max_abs_doubled_degree(&self) -> i64 {
        self.terms.keys().map(|s| s.d.abs()).max().unwrap_or(0)
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<BasisSymbol> for Element {
    fn from(s: BasisSymbol) -> Self {
        Element::basis(s)
    }
}

impl Add<&Element> for &Element {
    type Output = Element;
    fn add(self, rhs: &Element) -> Element {
        let mut out = self.clone();
        out.add_scaled(rhs, &Scalar::one());
        out
    }
}

impl Add for Element {
    type Output = Element;
    fn add(self, rhs: Element) -> Element {
        &self + &rhs
    }
}

impl Sub<&Element> for &Element {
    type Output = Element;
    fn sub(self, rhs: &Element) -> Element {
        let mut out = self.clone();
        out.add_scaled(rhs, &-Scalar::one());
        out
    }
}

impl Sub for Element {
    type Output = Element;
    fn sub(self, rhs: Element) -> Element {
        &self - &rhs
    }
}

impl Neg for &Element {
    type Output = Element;
    fn neg(self) -> Element {
        self.scale(&-Scalar::one())
    }
}

impl Neg for Element {
    type Output = Element;
    fn neg(self) -> Element {
        -&self
    }
}

/// Structure constants on basis symbols. The caller guarantees both symbols
/// are valid for `cfg`.
fn bracket_symbols(cfg: &AlgebraConfig, a: BasisSymbol, b: BasisSymbol) -> Element {
    use Kind::*;
    let mut out = Element::zero();
    match (a.kind, b.kind) {
        (C, _) | (_, C) => {}
        (L, L) => {
            // m - n with m = a.d/2, n = b.d/2
            let coeff = Scalar::ratio(a.d - b.d, 2);
            out.add_term(BasisSymbol::new(L, a.d + b.d), &coeff);
            if cfg.with_center && a.d + b.d == 0 {
                // (m^3 - m)/12 = (d^3 - 4d)/96
                out.add_term(BasisSymbol::c(), &Scalar::ratio(a.d * a.d * a.d - 4 * a.d, 96));
            }
        }
        (L, G) => {
            // m/2 - r = (d_m - 2 d_r)/4
            out.add_term(BasisSymbol::new(G, a.d + b.d), &Scalar::ratio(a.d - 2 * b.d, 4));
        }
        (G, L) => {
            out.add_term(BasisSymbol::new(G, a.d + b.d), &Scalar::ratio(2 * a.d - b.d, 4));
        }
        (G, G) => {
            out.add_term(BasisSymbol::new(L, a.d + b.d), &Scalar::from_int(2));
            if cfg.with_center && a.d + b.d == 0 {
                // (r^2 - 1/4)/3 = (d^2 - 1)/12
                out.add_term(BasisSymbol::c(), &Scalar::ratio(a.d * a.d - 1, 12));
            }
        }
    }
    out
}

/// `[a, b]` for basis symbols.
pub fn bracket_basis(cfg: &AlgebraConfig, a: BasisSymbol, b: BasisSymbol) -> Result<Element, AlgebraError> {
    cfg.check_symbol(&a)?;
    cfg.check_symbol(&b)?;
    Ok(bracket_symbols(cfg, a, b))
}

/// Bilinear superbracket.
pub fn bracket(cfg: &AlgebraConfig, x: &Element, y: &Element) -> Result<Element, AlgebraError> {
    cfg.check_element(x)?;
    cfg.check_element(y)?;
    Ok(bracket_unchecked(cfg, x, y))
}

pub(crate) fn bracket_unchecked(cfg: &AlgebraConfig, x: &Element, y: &Element) -> Element {
    let mut out = Element::zero();
    for (sa, ca) in x.terms() {
        for (sb, cb) in y.terms() {
            out.add_scaled(&bracket_symbols(cfg, *sa, *sb), &(ca * cb));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityKind {
    SuperSkew,
    Jacobi,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityViolation {
    pub kind: IdentityKind,
    pub symbols: Vec<BasisSymbol>,
    pub residual: Element,
}

/// Super-skew symmetry on every pair and the graded Jacobi identity on every
/// triple of basis symbols with `|degree| <= radius`.
pub fn super_jacobi_report(cfg: &AlgebraConfig, radius: i64) -> Vec<IdentityViolation> {
    super_jacobi_report_with(cfg, radius, Strategy::default())
}

pub fn super_jacobi_report_with(cfg: &AlgebraConfig, radius: i64, strategy: Strategy) -> Vec<IdentityViolation> {
    let window = cfg.basis_window(radius);
    let mut out: Vec<IdentityViolation> = par_flat_map(strategy, &window, |&x| {
        let mut v = Vec::new();
        for &y in &window {
            let lhs = bracket_symbols(cfg, x, y);
            let rhs = bracket_symbols(cfg, y, x).scale(&Scalar::from_int(-Parity::sign(x.parity(), y.parity())));
            if lhs != rhs {
                v.push(IdentityViolation { kind: IdentityKind::SuperSkew, symbols: vec![x, y], residual: &lhs - &rhs });
            }
            for &z in &window {
                let residual = jacobi_sum(cfg, x, y, z);
                if !residual.is_zero() {
                    v.push(IdentityViolation { kind: IdentityKind::Jacobi, symbols: vec![x, y, z], residual });
                }
            }
        }
        v
    });
    out.sort_by(|a, b| a.symbols.cmp(&b.symbols).then_with(|| (a.kind as u8).cmp(&(b.kind as u8))));
    out
}

/// `(-1)^{|x||z|}[x,[y,z]] + (-1)^{|y||x|}[y,[z,x]] + (-1)^{|z||y|}[z,[x,y]]`
pub fn jacobi_sum(cfg: &AlgebraConfig, x: BasisSymbol, y: BasisSymbol, z: BasisSymbol) -> Element {
    let (px, py, pz) = (x.parity(), y.parity(), z.parity());
    let term = |a: BasisSymbol, b: BasisSymbol, c: BasisSymbol, sign: i64| {
        bracket_unchecked(cfg, &a.elem(), &bracket_symbols(cfg, b, c)).scale(&Scalar::from_int(sign))
    };
    let mut sum = term(x, y, z, Parity::sign(px, pz));
    sum.add_scaled(&term(y, z, x, Parity::sign(py, px)), &Scalar::one());
    sum.add_scaled(&term(z, x, y, Parity::sign(pz, py)), &Scalar::one());
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    const CENTER0: AlgebraConfig = AlgebraConfig::new(Epsilon::Zero, true);
    const CENTER_HALF: AlgebraConfig = AlgebraConfig::new(Epsilon::Half, true);

    fn e(terms: &[(BasisSymbol, Scalar)]) -> Element {
        Element::from_terms(terms.iter().cloned())
    }

    #[test]
    fn structure_constant_examples() {
        let r = bracket_basis(&CENTER0, BasisSymbol::l(2), BasisSymbol::l(-2)).unwrap();
        assert_eq!(r, e(&[(BasisSymbol::l(0), 4.into()), (BasisSymbol::c(), Scalar::ratio(1, 2))]));

        assert!(bracket_basis(&CENTER0, BasisSymbol::l(3), BasisSymbol::l(3)).unwrap().is_zero());

        let r = bracket_basis(&CENTER0, BasisSymbol::g(0), BasisSymbol::g(0)).unwrap();
        assert_eq!(r, e(&[(BasisSymbol::l(0), 2.into()), (BasisSymbol::c(), Scalar::ratio(-1, 12))]));

        let r = bracket_basis(&CENTER_HALF, BasisSymbol::g2(1), BasisSymbol::g2(-1)).unwrap();
        assert_eq!(r, e(&[(BasisSymbol::l(0), 2.into())]));

        let r = bracket_basis(&CENTER0, BasisSymbol::l(3), BasisSymbol::g(-1)).unwrap();
        assert_eq!(r, e(&[(BasisSymbol::g(2), Scalar::ratio(5, 2))]));
    }

    #[test]
    fn centerless_drops_central_terms() {
        let cfg = AlgebraConfig::centerless();
        let r = bracket_basis(&cfg, BasisSymbol::l(2), BasisSymbol::l(-2)).unwrap();
        assert_eq!(r, BasisSymbol::l(0).elem().scale(&4.into()));
        assert!(bracket_basis(&cfg, BasisSymbol::c(), BasisSymbol::l(0)).is_err());
    }

    #[test]
    fn grid_mismatch_rejected() {
        let err = bracket_basis(&CENTER0, BasisSymbol::g2(1), BasisSymbol::l(0)).unwrap_err();
        assert!(matches!(err, AlgebraError::ConfigMismatch { .. }));
        assert!(bracket_basis(&CENTER_HALF, BasisSymbol::g(0), BasisSymbol::l(0)).is_err());
    }

    #[test]
    fn bilinear_examples() {
        let x = &BasisSymbol::l(1).elem() + &BasisSymbol::g(0).elem();
        assert_eq!(bracket(&CENTER0, &x, &BasisSymbol::l(0).elem()).unwrap(), BasisSymbol::l(1).elem());
        assert!(bracket(&CENTER0, &x, &Element::zero()).unwrap().is_zero());
        let r = bracket(
            &CENTER0,
            &BasisSymbol::l(1).elem().scale(&2.into()),
            &BasisSymbol::l(2).elem().scale(&3.into()),
        )
        .unwrap();
        assert_eq!(r, BasisSymbol::l(3).elem().scale(&(-6).into()));
    }

    #[test]
    fn parity_examples() {
        let lc = &BasisSymbol::l(3).elem() + &BasisSymbol::c().elem();
        assert_eq!(lc.parity(), ElementParity::Even);
        assert_eq!(BasisSymbol::g(-1).elem().parity(), ElementParity::Odd);
        let mixed = &BasisSymbol::l(0).elem() + &BasisSymbol::g(0).elem();
        assert_eq!(mixed.parity(), ElementParity::Mixed);
        assert_eq!(Element::zero().parity(), ElementParity::Zero);
    }

    #[test]
    fn degree_decompose_examples() {
        let x = e(&[(BasisSymbol::l(1), 1.into()), (BasisSymbol::g(1), 2.into()), (BasisSymbol::c(), 1.into())]);
        let parts = x.degree_decompose();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0], (HalfInt(0), BasisSymbol::c().elem()));
        assert_eq!(parts[1].0, HalfInt(2));
        assert_eq!(parts[1].1, e(&[(BasisSymbol::l(1), 1.into()), (BasisSymbol::g(1), 2.into())]));
        assert!(Element::zero().degree_decompose().is_empty());
        let parts = BasisSymbol::g2(-1).elem().degree_decompose();
        assert_eq!(parts[0].0.to_string(), "-1/2");
    }

    #[test]
    fn jacobi_sweeps_are_clean() {
        for cfg in AlgebraConfig::all() {
            assert!(super_jacobi_report(&cfg, 3).is_empty(), "{cfg}");
        }
    }

    #[test]
    fn window_contents() {
        let w = CENTER_HALF.basis_window(1);
        let names: Vec<String> = w.iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["L(-1)", "L(0)", "L(1)", "G(-1/2)", "G(1/2)", "C"]);
    }
}
