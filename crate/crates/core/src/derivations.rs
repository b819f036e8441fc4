//! Derivations as exact linear algebra.
//!
//! Inner derivations are assembled as matrices of `y -> [y, x]`, local
//! derivation questions become image-membership questions for those
//! operators, and the constraint that a local derivation's value at `x`
//! lies in the image of every probe is computed as a literal intersection
//! of subspaces.
//!
//! Every negative answer here is relative to the ansatz window it was asked
//! in: `none_in_window` never claims that no witness exists at all.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::algebra::{bracket_unchecked, AlgebraConfig, AlgebraError, BasisSymbol, Element, ElementParity, HalfInt, Parity};
use crate::linalg::{list_symbols, solve, LinalgError, Matrix, Solution, Subspace, Window};
use crate::parallel::{par_flat_map, par_map, Strategy};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DerivationError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("map table inputs are linearly dependent")]
    DependentInputs,
    #[error("declared parity violated at input {input}")]
    ParityViolation { input: Element },
    #[error("bracket escapes the target window: {}", list_symbols(.0))]
    TargetOverflow(Vec<BasisSymbol>),
    #[error("map is not defined on: {}", list_symbols(.0))]
    DomainInsufficient(Vec<BasisSymbol>),
    #[error("probe list is empty")]
    EmptyProbes,
    #[error("inputs must be homogeneous to split a map by parity: {0}")]
    InhomogeneousInput(Element),
    #[error("value at L(0) is not of the form [y, L(0)] in the ansatz: {0}")]
    NotLocalAtL0(Element),
    #[error("value at L(1) after removing the L(0) witness has the wrong shape: {0}")]
    ShapeViolation(Element),
}

/// A linear map known on finitely many linearly independent inputs.
#[derive(Debug, Clone)]
pub struct MapTable {
    cfg: AlgebraConfig,
    entries: Vec<(Element, Element)>,
    declared_parity: Option<Parity>,
    /// input symbol -> (entry index, coefficient of the symbol in that input)
    by_symbol: HashMap<BasisSymbol, (usize, Scalar)>,
}

impl MapTable {
    pub fn new(
        cfg: AlgebraConfig,
        entries: Vec<(Element, Element)>,
        declared_parity: Option<Parity>,
    ) -> Result<Self, DerivationError> {
        for (x, y) in &entries {
            cfg.check_element(x)?;
            cfg.check_element(y)?;
        }
        let support: BTreeSet<BasisSymbol> = entries.iter().flat_map(|(x, _)| x.symbols().copied()).collect();
        let window = Window::new(cfg, support.into_iter().collect())?;
        let coords = entries.iter().map(|(x, _)| window.coords(x)).collect::<Result<Vec<_>, _>>()?;
        if !coords.is_empty() && Matrix::from_rows(coords)?.rref().rank != entries.len() {
            return Err(DerivationError::DependentInputs);
        }
        if let Some(p) = declared_parity {
            for (x, y) in &entries {
                let expected = match x.parity() {
                    ElementParity::Even => Parity::Even.shift(p),
                    ElementParity::Odd => Parity::Odd.shift(p),
                    _ => continue,
                };
                if !y.is_zero() && y.parity() != parity_class(expected) {
                    return Err(DerivationError::ParityViolation { input: x.clone() });
                }
            }
        }
        let by_symbol = entries
            .iter()
            .enumerate()
            .filter(|(_, (x, _))| x.len() == 1)
            .map(|(i, (x, _))| {
                let (s, c) = x.terms().next().expect("single term");
                (*s, (i, c.clone()))
            })
            .collect();
        Ok(MapTable { cfg, entries, declared_parity, by_symbol })
    }

    pub fn from_fn<F: Fn(&Element) -> Element>(
        cfg: AlgebraConfig,
        inputs: Vec<Element>,
        declared_parity: Option<Parity>,
        f: F,
    ) -> Result<Self, DerivationError> {
        let entries = inputs.into_iter().map(|x| {
            let y = f(&x);
            (x, y)
        });
        MapTable::new(cfg, entries.collect(), declared_parity)
    }

    /// `ad(u) = [u, -]` on every basis symbol with `|degree| <= radius`.
    pub fn ad(cfg: AlgebraConfig, u: &Element, radius: i64) -> Result<Self, DerivationError> {
        cfg.check_element(u)?;
        let parity = match u.parity() {
            ElementParity::Even | ElementParity::Zero => Some(Parity::Even),
            ElementParity::Odd => Some(Parity::Odd),
            ElementParity::Mixed => None,
        };
        let inputs = cfg.basis_window(radius).into_iter().map(Element::basis).collect();
        MapTable::from_fn(cfg, inputs, parity, |x| bracket_unchecked(&cfg, u, x))
    }

    /// The zero map on every basis symbol with `|degree| <= radius`.
    pub fn zero(cfg: AlgebraConfig, radius: i64) -> Self {
        let inputs = cfg.basis_window(radius).into_iter().map(Element::basis).collect();
        MapTable::from_fn(cfg, inputs, Some(Parity::Even), |_| Element::zero()).expect("basis inputs are independent")
    }

    pub fn cfg(&self) -> &AlgebraConfig {
        &self.cfg
    }

    pub fn entries(&self) -> &[(Element, Element)] {
        &self.entries
    }

    pub fn declared_parity(&self) -> Option<Parity> {
        self.declared_parity
    }

    pub fn defines_symbol(&self, s: &BasisSymbol) -> bool {
        self.by_symbol.contains_key(s)
    }

    /// Value at any element of the span of the inputs.
    pub fn eval(&self, x: &Element) -> Result<Element, DerivationError> {
        if x.symbols().all(|s| self.by_symbol.contains_key(s)) {
            let mut out = Element::zero();
            for (s, c) in x.terms() {
                let (i, k) = &self.by_symbol[s];
                let f = c.checked_div(k).expect("stored coefficients are nonzero");
                out.add_scaled(&self.entries[*i].1, &f);
            }
            return Ok(out);
        }
        let support: BTreeSet<BasisSymbol> =
            self.entries.iter().flat_map(|(i, _)| i.symbols().copied()).chain(x.symbols().copied()).collect();
        let window = Window::new(self.cfg, support.into_iter().collect())?;
        let cols = self.entries.iter().map(|(i, _)| window.coords(i)).collect::<Result<Vec<_>, _>>()?;
        let a = Matrix::from_columns(window.len(), &cols)?;
        match solve(&a, &window.coords(x)?)? {
            Solution::Unique(c) => {
                let mut out = Element::zero();
                for (k, (_, y)) in c.iter().zip(&self.entries) {
                    out.add_scaled(y, k);
                }
                Ok(out)
            }
            _ => {
                let missing: Vec<BasisSymbol> = x.symbols().filter(|s| !self.by_symbol.contains_key(s)).copied().collect();
                Err(DerivationError::DomainInsufficient(missing))
            }
        }
    }

    /// Even and odd parts `(D_0, D_1)`, where `D_p` shifts parity by `p`.
    pub fn split_parity(&self) -> Result<(MapTable, MapTable), DerivationError> {
        let mut even = Vec::new();
        let mut odd = Vec::new();
        for (x, y) in &self.entries {
            let px = match x.parity() {
                ElementParity::Even | ElementParity::Zero => Parity::Even,
                ElementParity::Odd => Parity::Odd,
                ElementParity::Mixed => return Err(DerivationError::InhomogeneousInput(x.clone())),
            };
            even.push((x.clone(), y.parity_part(px)));
            odd.push((x.clone(), y.parity_part(px.shift(Parity::Odd))));
        }
        Ok((MapTable::new(self.cfg, even, Some(Parity::Even))?, MapTable::new(self.cfg, odd, Some(Parity::Odd))?))
    }
}

fn parity_class(p: Parity) -> ElementParity {
    match p {
        Parity::Even => ElementParity::Even,
        Parity::Odd => ElementParity::Odd,
    }
}

/// Matrix of `y -> [y, x]` from ansatz coordinates to target coordinates.
pub fn ad_matrix(cfg: &AlgebraConfig, x: &Element, ansatz: &Window, target: &Window) -> Result<Matrix, DerivationError> {
    cfg.check_element(x)?;
    let mut m = Matrix::zeros(target.len(), ansatz.len());
    let mut escaping = BTreeSet::new();
    for (j, s) in ansatz.symbols().iter().enumerate() {
        let col = bracket_unchecked(cfg, &s.elem(), x);
        for (t, c) in col.terms() {
            match target.position(t) {
                Some(i) => m.set(i, j, c.clone()),
                None => {
                    escaping.insert(*t);
                }
            }
        }
    }
    if escaping.is_empty() {
        Ok(m)
    } else {
        Err(DerivationError::TargetOverflow(escaping.into_iter().collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeibnizViolation {
    pub x: BasisSymbol,
    pub y: BasisSymbol,
    /// Parity of the homogeneous part of the map that failed.
    pub part: Parity,
    /// `D[x,y] - [Dx,y] - (-1)^{|D||x|}[x,Dy]`
    pub residual: Element,
}

/// Pairs of basis symbols with `|degree| <= check_radius` where the graded
/// Leibniz rule fails. Maps without a declared parity are split first.
pub fn leibniz_violations(d: &MapTable, check_radius: i64) -> Result<Vec<LeibnizViolation>, DerivationError> {
    leibniz_violations_with(d, check_radius, Strategy::default())
}

pub fn leibniz_violations_with(
    d: &MapTable,
    check_radius: i64,
    strategy: Strategy,
) -> Result<Vec<LeibnizViolation>, DerivationError> {
    let cfg = *d.cfg();
    let window = cfg.basis_window(check_radius);
    let mut missing = BTreeSet::new();
    for &x in &window {
        if !d.defines_symbol(&x) {
            missing.insert(x);
        }
        for &y in &window {
            for s in bracket_unchecked(&cfg, &x.elem(), &y.elem()).symbols() {
                if !d.defines_symbol(s) {
                    missing.insert(*s);
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(DerivationError::DomainInsufficient(missing.into_iter().collect()));
    }
    let parts = match d.declared_parity() {
        Some(p) => vec![(p, d.clone())],
        None => {
            let (even, odd) = d.split_parity()?;
            vec![(Parity::Even, even), (Parity::Odd, odd)]
        }
    };
    let mut out = Vec::new();
    for (p, part) in &parts {
        let found = par_flat_map(strategy, &window, |&x| {
            let dx = part.eval(&x.elem()).expect("domain checked");
            window
                .iter()
                .filter_map(|&y| {
                    let dy = part.eval(&y.elem()).expect("domain checked");
                    let lhs = part.eval(&bracket_unchecked(&cfg, &x.elem(), &y.elem())).expect("domain checked");
                    let mut residual = lhs;
                    residual.add_scaled(&bracket_unchecked(&cfg, &dx, &y.elem()), &-Scalar::one());
                    let sign = Parity::sign(*p, x.parity());
                    residual.add_scaled(&bracket_unchecked(&cfg, &x.elem(), &dy), &Scalar::from_int(-sign));
                    (!residual.is_zero()).then_some(LeibnizViolation { x, y, part: *p, residual })
                })
                .collect()
        });
        out.extend(found);
    }
    Ok(out)
}

/// A linear functional on the stacked equation rows that annihilates every
/// ansatz column but not the required values: proof that no witness exists
/// in the ansatz.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obstruction {
    /// `(equation index, target symbol, weight)`
    pub functional: Vec<(usize, BasisSymbol, Scalar)>,
    /// Degrees of the symbols the functional reads.
    pub degree_blocks: Vec<HalfInt>,
    /// Value of the functional on the required outputs (nonzero).
    pub pairing: Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessStatus {
    Witness(Element),
    NoneInWindow(Obstruction),
    OutOfScope(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessReport {
    pub status: WitnessStatus,
    pub ansatz: Window,
    /// Zero for a witness. Otherwise the part of the required value that the
    /// obstruction reads and no ansatz element can produce.
    pub residual: Element,
}

impl WitnessReport {
    pub fn witness(&self) -> Option<&Element> {
        match &self.status {
            WitnessStatus::Witness(y) => Some(y),
            _ => None,
        }
    }
}

/// Finds `y` in the ansatz with `[y, x_j] = v_j` for every equation.
fn solve_equations(cfg: &AlgebraConfig, equations: &[(Element, Element)], ansatz: &Window) -> WitnessReport {
    if let Some((x, _)) = equations.iter().find(|(x, v)| x.is_zero() && !v.is_zero()) {
        return WitnessReport {
            status: WitnessStatus::OutOfScope(format!("input {x} is zero but its value is not")),
            ansatz: ansatz.clone(),
            residual: Element::zero(),
        };
    }
    // each equation gets the exact reachable support as its target rows
    let mut blocks: Vec<(usize, Window, Vec<Element>)> = Vec::new();
    for (j, (x, v)) in equations.iter().enumerate() {
        let cols: Vec<Element> = ansatz.symbols().iter().map(|s| bracket_unchecked(cfg, &s.elem(), x)).collect();
        let support: BTreeSet<BasisSymbol> =
            cols.iter().flat_map(|c| c.symbols().copied()).chain(v.symbols().copied()).collect();
        let target = Window::new(*cfg, support.into_iter().collect()).expect("bracket output is valid");
        blocks.push((j, target, cols));
    }
    let total_rows: usize = blocks.iter().map(|(_, t, _)| t.len()).sum();
    let mut a = Matrix::zeros(total_rows, ansatz.len());
    let mut b = Vec::with_capacity(total_rows);
    let mut row_labels = Vec::with_capacity(total_rows);
    let mut offset = 0;
    for (j, target, cols) in &blocks {
        for (c, col) in cols.iter().enumerate() {
            for (s, k) in col.terms() {
                a.set(offset + target.position(s).expect("in support"), c, k.clone());
            }
        }
        b.extend(target.coords(&equations[*j].1).expect("in support"));
        row_labels.extend(target.symbols().iter().map(|s| (*j, *s)));
        offset += target.len();
    }
    match solve(&a, &b).expect("dimensions agree") {
        Solution::Unique(x) | Solution::Parametrized { particular: x, .. } => {
            let y = ansatz.element(&x);
            let residual = equations.iter().fold(Element::zero(), |mut acc, (x, v)| {
                acc.add_scaled(&(v - &bracket_unchecked(cfg, &y, x)), &Scalar::one());
                acc
            });
            WitnessReport { status: WitnessStatus::Witness(y), ansatz: ansatz.clone(), residual }
        }
        Solution::Inconsistent => {
            let obstruction = left_obstruction(&a, &b, &row_labels);
            let residual = obstruction
                .functional
                .iter()
                .filter(|(j, _, _)| *j == obstruction.functional[0].0)
                .map(|(j, s, _)| Element::term(equations[*j].1.coeff(s), *s))
                .fold(Element::zero(), |acc, e| &acc + &e);
            WitnessReport { status: WitnessStatus::NoneInWindow(obstruction), ansatz: ansatz.clone(), residual }
        }
    }
}

/// A vector `l` with `l A = 0` and `l b != 0`, preferring the sparsest
/// such vector among the canonical left-kernel basis.
fn left_obstruction(a: &Matrix, b: &[Scalar], labels: &[(usize, BasisSymbol)]) -> Obstruction {
    let pairing = |l: &[Scalar]| -> Scalar { l.iter().zip(b).map(|(x, y)| x * y).sum() };
    let best = a
        .transpose()
        .kernel()
        .into_iter()
        .filter(|l| !pairing(l).is_zero())
        .min_by_key(|l| l.iter().filter(|x| !x.is_zero()).count())
        .expect("an inconsistent system has a separating functional");
    let functional: Vec<(usize, BasisSymbol, Scalar)> = best
        .iter()
        .enumerate()
        .filter(|(_, w)| !w.is_zero())
        .map(|(r, w)| (labels[r].0, labels[r].1, w.clone()))
        .collect();
    let degree_blocks: BTreeSet<HalfInt> = functional.iter().map(|(_, s, _)| s.degree()).collect();
    Obstruction { functional, degree_blocks: degree_blocks.into_iter().collect(), pairing: pairing(&best) }
}

/// Searches the ansatz for `y` with `[y, input] = output` on every entry.
pub fn inner_witness(d: &MapTable, ansatz: &Window) -> Result<WitnessReport, DerivationError> {
    if ansatz.cfg() != d.cfg() {
        return Err(LinalgError::WindowMismatch.into());
    }
    Ok(solve_equations(d.cfg(), d.entries(), ansatz))
}

/// Decides whether `v = [y, x]` for some `y` in the ansatz, i.e. whether
/// `v` lies in the image of `T_x`.
pub fn local_der_at(cfg: &AlgebraConfig, x: &Element, v: &Element, ansatz: &Window) -> Result<WitnessReport, DerivationError> {
    cfg.check_element(x)?;
    cfg.check_element(v)?;
    Ok(solve_equations(cfg, &[(x.clone(), v.clone())], ansatz))
}

/// Ansatz covering doubled degrees `[-(M+N), M+N]` for probes of degree at
/// most `N` and a target of degree at most `M`.
pub fn default_ansatz(cfg: &AlgebraConfig, probes: &[Element], target: &Window) -> Window {
    let n = probes.iter().map(Element::max_abs_doubled_degree).max().unwrap_or(0);
    let m = target.symbols().iter().map(|s| s.d.abs()).max().unwrap_or(0);
    Window::doubled_range(*cfg, -(m + n), m + n)
}

/// `Image(T_p) ∩ span(target)` for `T_p(y) = [y, p]`, `y` in the ansatz.
pub fn probe_image(cfg: &AlgebraConfig, probe: &Element, ansatz: &Window, target: &Window) -> Result<Subspace, DerivationError> {
    cfg.check_element(probe)?;
    let cols: Vec<Element> = ansatz.symbols().iter().map(|s| bracket_unchecked(cfg, &s.elem(), probe)).collect();
    let outside: BTreeSet<BasisSymbol> =
        cols.iter().flat_map(|c| c.symbols().copied()).filter(|s| !target.contains(s)).collect();
    let outside = Window::new(*cfg, outside.into_iter().collect())?;
    // y must not leave the target: restrict to the kernel of the outside rows
    let combos: Vec<Vec<Scalar>> = if outside.is_empty() {
        (0..ansatz.len()).map(|j| unit(ansatz.len(), j)).collect()
    } else {
        let out_cols = cols.iter().map(|c| outside.coords(&c.filter(|s| outside.contains(s)))).collect::<Result<Vec<_>, _>>()?;
        Matrix::from_columns(outside.len(), &out_cols)?.kernel()
    };
    let vectors: Vec<Vec<Scalar>> = combos
        .iter()
        .map(|k| {
            let mut e = Element::zero();
            for (c, col) in k.iter().zip(&cols) {
                e.add_scaled(col, c);
            }
            target.coords(&e)
        })
        .collect::<Result<_, _>>()?;
    Ok(Subspace::span_coords(target.clone(), &vectors)?)
}

fn unit(n: usize, j: usize) -> Vec<Scalar> {
    let mut v = vec![Scalar::zero(); n];
    v[j] = Scalar::one();
    v
}

/// `⋂_j Image(T_{p_j}) ∩ span(target)`.
pub fn image_intersection(
    cfg: &AlgebraConfig,
    probes: &[Element],
    ansatz: &Window,
    target: &Window,
) -> Result<Subspace, DerivationError> {
    image_intersection_with(cfg, probes, ansatz, target, Strategy::default())
}

pub fn image_intersection_with(
    cfg: &AlgebraConfig,
    probes: &[Element],
    ansatz: &Window,
    target: &Window,
    strategy: Strategy,
) -> Result<Subspace, DerivationError> {
    if probes.is_empty() {
        return Err(DerivationError::EmptyProbes);
    }
    let images = par_map(strategy, probes, |p| probe_image(cfg, p, ansatz, target));
    let mut acc: Option<Subspace> = None;
    for img in images {
        let img = img?;
        acc = Some(match acc {
            None => img,
            Some(s) => s.intersect(&img)?,
        });
    }
    Ok(acc.expect("at least one probe"))
}

/// `base + x * direction` for each sample `x`.
pub fn probe_family(base: &Element, direction: &Element, samples: &[Scalar]) -> Vec<Element> {
    samples
        .iter()
        .map(|x| {
            let mut p = base.clone();
            p.add_scaled(direction, x);
            p
        })
        .collect()
}

/// Outcome of the normalization that peels an inner derivation off a map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineReport {
    /// Accumulated `w` with `Δ = ad(w)` on every checked input when inner.
    pub witness: Element,
    /// Witness for the value at `L(0)`.
    pub l0_witness: Element,
    /// Coefficients of `L(1)` and `G(1)` left at `L(1)` after the first step.
    pub l1_coefficients: (Scalar, Scalar),
    /// `(input, Δ(input) - [w, input])` for every input where this is nonzero.
    pub residuals: Vec<(Element, Element)>,
}

impl PipelineReport {
    pub fn is_inner(&self) -> bool {
        self.residuals.is_empty()
    }
}

/// Normalizes `Δ` against inner derivations:
///
/// 1. find `y₀` with `Δ(L0) = [y₀, L0]` and pass to `Δ₁ = Δ - ad(y₀)`;
/// 2. read `Δ₁(L1) = c L1 + d G1` and pass to `Δ₂ = Δ₁ + c ad(L0) + 2d ad(G0)`;
/// 3. report every input where `Δ₂` does not vanish.
///
/// On the centered algebras the witness is determined modulo `C`.
pub fn normalization_pipeline(d: &MapTable) -> Result<PipelineReport, DerivationError> {
    let cfg = *d.cfg();
    let l0 = BasisSymbol::l(0).elem();
    let l1 = BasisSymbol::l(1).elem();
    let g1 = BasisSymbol::g(1);
    let g0 = BasisSymbol::g(0);
    let has_g0 = cfg.is_valid(&g0);

    let v0 = d.eval(&l0)?;
    let radius = ((v0.max_abs_doubled_degree() + 1) / 2).max(1);
    let ansatz = Window::radius(cfg, radius);
    let report = local_der_at(&cfg, &l0, &v0, &ansatz)?;
    let y0 = report.witness().cloned().ok_or_else(|| DerivationError::NotLocalAtL0(v0.clone()))?;

    let v1 = &d.eval(&l1)? - &bracket_unchecked(&cfg, &y0, &l1);
    let c = v1.coeff(&BasisSymbol::l(1));
    let dd = if has_g0 { v1.coeff(&g1) } else { Scalar::zero() };
    let mut shape = v1.clone();
    shape.add_term(BasisSymbol::l(1), &-&c);
    if has_g0 {
        shape.add_term(g1, &-&dd);
    }
    if !shape.is_zero() {
        return Err(DerivationError::ShapeViolation(v1));
    }

    let mut witness = y0.clone();
    witness.add_term(BasisSymbol::l(0), &-&c);
    if has_g0 {
        witness.add_term(g0, &(&dd * &Scalar::from_int(-2)));
    }
    let residuals = d
        .entries()
        .iter()
        .filter_map(|(x, v)| {
            let r = v - &bracket_unchecked(&cfg, &witness, x);
            (!r.is_zero()).then(|| (x.clone(), r))
        })
        .collect();
    Ok(PipelineReport { witness, l0_witness: y0, l1_coefficients: (c, dd), residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Epsilon;

    const CENTER0: AlgebraConfig = AlgebraConfig::new(Epsilon::Zero, true);
    const FREE0: AlgebraConfig = AlgebraConfig::centerless();

    fn el(t: &str) -> Element {
        t.parse().unwrap()
    }

    #[test]
    fn ad_matrix_examples() {
        let cfg = FREE0;
        let w = |v: Vec<BasisSymbol>| Window::new(cfg, v).unwrap();
        let m = ad_matrix(&cfg, &el("L(0)"), &w(vec![BasisSymbol::l(1)]), &w(vec![BasisSymbol::l(1)])).unwrap();
        assert_eq!(m, Matrix::from_ints(&[&[1]]));
        let m = ad_matrix(&cfg, &el("L(0)"), &w(vec![BasisSymbol::l(0)]), &w(vec![BasisSymbol::l(0)])).unwrap();
        assert_eq!(m, Matrix::from_ints(&[&[0]]));
        let m = ad_matrix(
            &cfg,
            &el("L(1) + L(0)"),
            &w(vec![BasisSymbol::l(2)]),
            &w(vec![BasisSymbol::l(2), BasisSymbol::l(3)]),
        )
        .unwrap();
        assert_eq!(m, Matrix::from_ints(&[&[2], &[1]]));
        let err = ad_matrix(&cfg, &el("L(1)"), &w(vec![BasisSymbol::l(2)]), &w(vec![BasisSymbol::l(2)])).unwrap_err();
        assert_eq!(err, DerivationError::TargetOverflow(vec![BasisSymbol::l(3)]));
    }

    #[test]
    fn leibniz_examples() {
        let d = MapTable::ad(CENTER0, &el("L(1)"), 4).unwrap();
        assert!(leibniz_violations(&d, 2).unwrap().is_empty());

        let id = MapTable::from_fn(
            CENTER0,
            CENTER0.basis_window(4).into_iter().map(Element::basis).collect(),
            Some(Parity::Even),
            |x| x.clone(),
        )
        .unwrap();
        let v = leibniz_violations(&id, 2).unwrap();
        assert!(v.iter().any(|v| v.x == BasisSymbol::l(1) && v.y == BasisSymbol::l(-1)));

        assert!(leibniz_violations(&MapTable::zero(CENTER0, 4), 2).unwrap().is_empty());
    }

    #[test]
    fn leibniz_reports_missing_domain() {
        let d = MapTable::ad(CENTER0, &el("L(1)"), 2).unwrap();
        match leibniz_violations(&d, 2) {
            Err(DerivationError::DomainInsufficient(missing)) => {
                assert!(missing.contains(&BasisSymbol::l(4)));
                assert!(!missing.contains(&BasisSymbol::l(2)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mixed_inner_map_is_split_and_passes() {
        let d = MapTable::ad(FREE0, &el("L(2) + 3*G(-1)"), 6).unwrap();
        assert_eq!(d.declared_parity(), None);
        assert!(leibniz_violations(&d, 3).unwrap().is_empty());
    }

    #[test]
    fn table_construction_checks() {
        let dep = vec![(el("L(1)"), el("0")), (el("2*L(1)"), el("0"))];
        assert_eq!(MapTable::new(FREE0, dep, None).unwrap_err(), DerivationError::DependentInputs);
        let wrong_parity = vec![(el("L(1)"), el("G(1)"))];
        assert!(matches!(
            MapTable::new(FREE0, wrong_parity, Some(Parity::Even)),
            Err(DerivationError::ParityViolation { .. })
        ));
        let t = MapTable::new(FREE0, vec![(el("L(1) + L(2)"), el("G(3)")), (el("L(2)"), el("G(2)"))], None).unwrap();
        assert_eq!(t.eval(&el("L(1)")).unwrap(), el("G(3) - G(2)"));
        assert!(matches!(t.eval(&el("L(5)")), Err(DerivationError::DomainInsufficient(_))));
    }

    #[test]
    fn witness_examples() {
        let ansatz = Window::radius(CENTER0, 5);
        let d = MapTable::new(CENTER0, vec![(el("L(0)"), el("2*L(3)"))], None).unwrap();
        let r = inner_witness(&d, &ansatz).unwrap();
        assert_eq!(r.witness(), Some(&el("(2/3)*L(3)")));
        assert!(r.residual.is_zero());

        let d = MapTable::new(CENTER0, vec![(el("L(0)"), el("0"))], None).unwrap();
        assert_eq!(inner_witness(&d, &ansatz).unwrap().witness(), Some(&Element::zero()));

        let d = MapTable::new(CENTER0, vec![(el("L(0)"), el("C"))], None).unwrap();
        let r = inner_witness(&d, &ansatz).unwrap();
        match &r.status {
            WitnessStatus::NoneInWindow(ob) => {
                assert_eq!(ob.functional, vec![(0, BasisSymbol::c(), Scalar::one())]);
                assert_eq!(ob.degree_blocks, vec![HalfInt(0)]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(r.residual, el("C"));
    }

    #[test]
    fn local_examples() {
        let ansatz = Window::radius(CENTER0, 6);
        let r = local_der_at(&CENTER0, &el("L(0)"), &el("3*L(5)"), &ansatz).unwrap();
        assert_eq!(r.witness(), Some(&el("(3/5)*L(5)")));
        let r = local_der_at(&CENTER0, &el("L(0)"), &el("L(0)"), &ansatz).unwrap();
        assert!(matches!(r.status, WitnessStatus::NoneInWindow(_)));
        let r = local_der_at(&CENTER0, &el("G(2) + L(-1)"), &Element::zero(), &ansatz).unwrap();
        assert_eq!(r.witness(), Some(&Element::zero()));
        let r = local_der_at(&CENTER0, &Element::zero(), &el("L(1)"), &ansatz).unwrap();
        assert!(matches!(r.status, WitnessStatus::OutOfScope(_)));
    }

    #[test]
    fn intersection_examples() {
        let target = Window::radius(FREE0, 8);
        let xs: Vec<Scalar> = (1..=20).map(Scalar::from_int).collect();
        let more: Vec<Scalar> = (1..=23).map(Scalar::from_int).collect();
        let run = |base: &str, dir: &str, xs: &[Scalar]| {
            let probes = probe_family(&el(base), &el(dir), xs);
            let ansatz = default_ansatz(&FREE0, &probes, &target);
            image_intersection(&FREE0, &probes, &ansatz, &target).unwrap()
        };

        // G(k), k >= 2, stays reachable for every x: [2G(1) + 4x G(0), L(1) + x L(0)] = G(2)
        let s = run("L(1)", "L(0)", &xs);
        let expected: Vec<Element> = std::iter::once(el("L(1)"))
            .chain((1..=8).map(|k| BasisSymbol::g(k).elem()))
            .collect();
        assert_eq!(s, Subspace::span(target.clone(), &expected).unwrap());
        assert_eq!(run("L(1)", "L(0)", &more), s);

        // [-x L(0) - 2L(1), G(1) + x G(0)] = G(2)
        let s = run("G(1)", "G(0)", &xs);
        assert_eq!(s, Subspace::span(target.clone(), &[el("G(1)"), el("G(2)")]).unwrap());

        let few = run("L(1)", "L(0)", &xs[..5]);
        assert!(few.dim() > s.dim());

        let probes = vec![el("L(0)")];
        let ansatz = default_ansatz(&FREE0, &probes, &target);
        let s = image_intersection(&FREE0, &probes, &ansatz, &target).unwrap();
        let expected: Vec<Element> =
            target.symbols().iter().filter(|s| s.d != 0).map(|s| s.elem()).collect();
        assert_eq!(s, Subspace::span(target.clone(), &expected).unwrap());

        assert_eq!(image_intersection(&FREE0, &[], &ansatz, &target).unwrap_err(), DerivationError::EmptyProbes);
    }

    #[test]
    fn pipeline_examples() {
        let d = MapTable::ad(FREE0, &el("L(2) + G(1)"), 8).unwrap();
        let r = normalization_pipeline(&d).unwrap();
        assert_eq!(r.witness, el("L(2) + G(1)"));
        assert!(r.is_inner());

        let r = normalization_pipeline(&MapTable::zero(FREE0, 8)).unwrap();
        assert!(r.witness.is_zero() && r.is_inner());

        let d = MapTable::ad(FREE0, &el("5*L(-3)"), 8).unwrap();
        let r = normalization_pipeline(&d).unwrap();
        assert_eq!(r.witness, el("5*L(-3)"));
        assert!(r.is_inner());

        // recovers the components killed by ad(.)(L0) through the L1 step
        let d = MapTable::ad(FREE0, &el("3*L(0) - 2*G(0) + L(4)"), 8).unwrap();
        let r = normalization_pipeline(&d).unwrap();
        assert_eq!(r.witness, el("3*L(0) - 2*G(0) + L(4)"));
    }

    #[test]
    fn pipeline_flags_non_inner_maps() {
        // identity on the even part is not inner: the value at L(0) is L(0)
        let inputs: Vec<Element> = FREE0.basis_window(4).into_iter().map(Element::basis).collect();
        let id = MapTable::from_fn(FREE0, inputs.clone(), None, |x| x.clone()).unwrap();
        assert!(matches!(normalization_pipeline(&id), Err(DerivationError::NotLocalAtL0(_))));

        // kills L(0) but scales L(1) to L(2): wrong shape at L(1)
        let t = MapTable::from_fn(FREE0, inputs.clone(), None, |x| {
            if *x == el("L(1)") {
                el("L(2)")
            } else {
                Element::zero()
            }
        })
        .unwrap();
        assert!(matches!(normalization_pipeline(&t), Err(DerivationError::ShapeViolation(_))));

        // a map that agrees with ad(L(0)) at L(0), L(1) but not at L(2)
        let t = MapTable::from_fn(FREE0, inputs, None, |x| {
            if *x == el("L(2)") {
                Element::zero()
            } else {
                bracket_unchecked(&FREE0, &el("L(0)"), x)
            }
        })
        .unwrap();
        let r = normalization_pipeline(&t).unwrap();
        assert_eq!(r.witness, el("L(0)"));
        assert_eq!(r.residuals, vec![(el("L(2)"), el("2*L(2)"))]);
    }
}
