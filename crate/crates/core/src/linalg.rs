//! Exact linear algebra over `Q(i)` on coordinates given by a finite window
//! of basis symbols.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::algebra::{AlgebraConfig, AlgebraError, BasisSymbol, Element};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("support escapes window: {}", list_symbols(.0))]
    OutOfWindow(Vec<BasisSymbol>),
    #[error("subspaces live on different windows")]
    WindowMismatch,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

pub(crate) fn list_symbols(s: &[BasisSymbol]) -> String {
    s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// An ordered set of basis symbols used as coordinates.
#[derive(Clone, PartialEq, Eq)]
pub struct Window {
    cfg: AlgebraConfig,
    symbols: Vec<BasisSymbol>,
    index: HashMap<BasisSymbol, usize>,
}

impl Window {
    /// Sorts and deduplicates `symbols`; each must be valid for `cfg`.
    pub fn new(cfg: AlgebraConfig, mut symbols: Vec<BasisSymbol>) -> Result<Self, LinalgError> {
        for s in &symbols {
            cfg.check_symbol(s)?;
        }
        symbols.sort();
        symbols.dedup();
        let index = symbols.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Ok(Window { cfg, symbols, index })
    }

    /// All symbols with `|degree| <= radius`.
    pub fn radius(cfg: AlgebraConfig, radius: i64) -> Self {
        Window::new(cfg, cfg.basis_window(radius)).expect("basis window symbols are valid")
    }

    /// Symbols with doubled degree in `[lo, hi]`.
    pub fn doubled_range(cfg: AlgebraConfig, lo: i64, hi: i64) -> Self {
        Window::new(cfg, cfg.basis_between(lo, hi)).expect("basis window symbols are valid")
    }

    pub fn cfg(&self) -> &AlgebraConfig {
        &self.cfg
    }

    pub fn symbols(&self) -> &[BasisSymbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn position(&self, s: &BasisSymbol) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn contains(&self, s: &BasisSymbol) -> bool {
        self.index.contains_key(s)
    }

    pub fn coords(&self, v: &Element) -> Result<Vec<Scalar>, LinalgError> {
        let mut out = vec![Scalar::zero(); self.len()];
        let mut escaped = Vec::new();
        for (s, c) in v.terms() {
            match self.position(s) {
                Some(i) => out[i] = c.clone(),
                None => escaped.push(*s),
            }
        }
        if escaped.is_empty() {
            Ok(out)
        } else {
            Err(LinalgError::OutOfWindow(escaped))
        }
    }

    pub fn element(&self, coords: &[Scalar]) -> Element {
        Element::from_terms(self.symbols.iter().copied().zip(coords.iter().cloned()))
    }
}

impl fmt::Debug for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Window[{}]", list_symbols(&self.symbols))
    }
}

/// Dense row-major matrix of exact scalars.
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![Scalar::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Scalar::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::Dimension("ragged rows".into()));
        }
        let n = rows.len();
        Ok(Matrix { rows: n, cols, data: rows.into_iter().flatten().collect() })
    }

    /// Matrix whose columns are the given vectors, each of length `rows`.
    pub fn from_columns(rows: usize, columns: &[Vec<Scalar>]) -> Result<Self, LinalgError> {
        let mut m = Matrix::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(LinalgError::Dimension(format!("column {j} has length {}, expected {rows}", col.len())));
            }
            for (i, v) in col.iter().enumerate() {
                m.set(i, j, v.clone());
            }
        }
        Ok(m)
    }

    pub fn from_ints(rows: &[&[i64]]) -> Self {
        Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| Scalar::from_int(x)).collect()).collect())
            .expect("rectangular literal")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Scalar {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Scalar] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Scalar> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn row_vectors(&self) -> Vec<Vec<Scalar>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[Scalar]) -> Result<Vec<Scalar>, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::Dimension(format!("vector of length {} against {} columns", v.len(), self.cols)));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r).iter().zip(v).filter(|(a, b)| !a.is_zero() && !b.is_zero()).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Scalar::is_zero)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// Canonical reduced row echelon form. Pivots are chosen by smallest bit
    /// size; the result does not depend on that choice.
    pub fn rref(&self) -> Rref {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut lead = 0;
        for c in 0..m.cols {
            if lead == m.rows {
                break;
            }
            let best = (lead..m.rows).filter(|&r| !m.get(r, c).is_zero()).min_by_key(|&r| m.get(r, c).bit_size());
            let Some(p) = best else { continue };
            m.swap_rows(lead, p);
            let inv = m.get(lead, c).inv().expect("pivot is nonzero");
            for cc in c..m.cols {
                let v = m.get(lead, cc) * &inv;
                m.set(lead, cc, v);
            }
            let pivot_row: Vec<Scalar> = m.row(lead).to_vec();
            for r in 0..m.rows {
                if r == lead {
                    continue;
                }
                let f = m.get(r, c).clone();
                if f.is_zero() {
                    continue;
                }
                for (cc, pv) in pivot_row.iter().enumerate().skip(c) {
                    if pv.is_zero() {
                        continue;
                    }
                    let v = m.get(r, cc) - &(&f * pv);
                    m.set(r, cc, v);
                }
            }
            pivots.push(c);
            lead += 1;
        }
        let rank = pivots.len();
        Rref { matrix: m, pivots, rank }
    }

    /// Basis of `{x : A x = 0}`, one vector per free column, canonical.
    pub fn kernel(&self) -> Vec<Vec<Scalar>> {
        kernel_from_rref(&self.rref(), self.cols)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|x| x.to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rref {
    pub matrix: Matrix,
    pub pivots: Vec<usize>,
    pub rank: usize,
}

fn kernel_from_rref(rref: &Rref, cols: usize) -> Vec<Vec<Scalar>> {
    let is_pivot: Vec<bool> = (0..cols).map(|c| rref.pivots.contains(&c)).collect();
    (0..cols)
        .filter(|&c| !is_pivot[c])
        .map(|free| {
            let mut v = vec![Scalar::zero(); cols];
            v[free] = Scalar::one();
            for (i, &p) in rref.pivots.iter().enumerate() {
                v[p] = -rref.matrix.get(i, free);
            }
            v
        })
        .collect()
}

/// Classification of the affine solution set of `A x = b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solution {
    Unique(Vec<Scalar>),
    /// Particular solution (free variables set to zero) plus a kernel basis.
    Parametrized { particular: Vec<Scalar>, kernel: Vec<Vec<Scalar>> },
    Inconsistent,
}

impl Solution {
    pub fn particular(&self) -> Option<&[Scalar]> {
        match self {
            Solution::Unique(x) => Some(x),
            Solution::Parametrized { particular, .. } => Some(particular),
            Solution::Inconsistent => None,
        }
    }
}

pub fn solve(a: &Matrix, b: &[Scalar]) -> Result<Solution, LinalgError> {
    if b.len() != a.rows() {
        return Err(LinalgError::Dimension(format!("right side has length {}, matrix has {} rows", b.len(), a.rows())));
    }
    let n = a.cols();
    let mut aug = Matrix::zeros(a.rows(), n + 1);
    for r in 0..a.rows() {
        for c in 0..n {
            aug.set(r, c, a.get(r, c).clone());
        }
        aug.set(r, n, b[r].clone());
    }
    let rr = aug.rref();
    if rr.pivots.last() == Some(&n) {
        return Ok(Solution::Inconsistent);
    }
    let mut particular = vec![Scalar::zero(); n];
    for (i, &p) in rr.pivots.iter().enumerate() {
        particular[p] = rr.matrix.get(i, n).clone();
    }
    let coeff_rref = Rref { matrix: rr.matrix.clone(), pivots: rr.pivots.clone(), rank: rr.rank };
    let kernel = kernel_from_rref(&coeff_rref, n);
    if kernel.is_empty() {
        Ok(Solution::Unique(particular))
    } else {
        Ok(Solution::Parametrized { particular, kernel })
    }
}

/// A subspace of the span of a window, stored by its canonical RREF basis.
#[derive(Clone, PartialEq, Eq)]
pub struct Subspace {
    window: Window,
    basis: Matrix,
    pivots: Vec<usize>,
}

impl Subspace {
    pub fn zero(window: Window) -> Self {
        let n = window.len();
        Subspace { window, basis: Matrix::zeros(0, n), pivots: Vec::new() }
    }

    pub fn full(window: Window) -> Self {
        let n = window.len();
        Subspace::from_rows(window, Matrix::identity(n))
    }

    /// Span of coordinate vectors.
    pub fn span_coords(window: Window, vectors: &[Vec<Scalar>]) -> Result<Self, LinalgError> {
        if vectors.is_empty() {
            return Ok(Subspace::zero(window));
        }
        let m = Matrix::from_rows(vectors.to_vec())?;
        if m.cols() != window.len() {
            return Err(LinalgError::Dimension("vector length differs from window size".into()));
        }
        Ok(Subspace::from_rows(window, m))
    }

    pub fn span(window: Window, vectors: &[Element]) -> Result<Self, LinalgError> {
        let coords = vectors.iter().map(|v| window.coords(v)).collect::<Result<Vec<_>, _>>()?;
        Subspace::span_coords(window, &coords)
    }

    fn from_rows(window: Window, m: Matrix) -> Self {
        let rr = m.rref();
        let mut basis = Matrix::zeros(rr.rank, m.cols());
        for r in 0..rr.rank {
            for c in 0..m.cols() {
                basis.set(r, c, rr.matrix.get(r, c).clone());
            }
        }
        Subspace { window, basis, pivots: rr.pivots }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis_rows(&self) -> &Matrix {
        &self.basis
    }

    pub fn basis_elements(&self) -> Vec<Element> {
        (0..self.dim()).map(|r| self.window.element(self.basis.row(r))).collect()
    }

    /// Coefficients expressing `v` in the canonical basis, or `None` if `v`
    /// is not a member. Support outside the window is an error.
    pub fn member(&self, v: &Element) -> Result<Option<Vec<Scalar>>, LinalgError> {
        let coords = self.window.coords(v)?;
        let coeffs: Vec<Scalar> = self.pivots.iter().map(|&p| coords[p].clone()).collect();
        let mut recon = vec![Scalar::zero(); self.window.len()];
        for (r, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (k, x) in self.basis.row(r).iter().enumerate() {
                if !x.is_zero() {
                    recon[k] += &(c * x);
                }
            }
        }
        Ok(if recon == coords { Some(coeffs) } else { None })
    }

    pub fn contains(&self, v: &Element) -> Result<bool, LinalgError> {
        Ok(self.member(v)?.is_some())
    }

    pub fn sum(&self, other: &Subspace) -> Result<Subspace, LinalgError> {
        if self.window != other.window {
            return Err(LinalgError::WindowMismatch);
        }
        let mut rows = self.basis.row_vectors();
        rows.extend(other.basis.row_vectors());
        Subspace::span_coords(self.window.clone(), &rows)
    }

    /// Intersection through the kernel of the stacked generator system
    /// `sum a_i u_i - sum b_j v_j = 0`.
    pub fn intersect(&self, other: &Subspace) -> Result<Subspace, LinalgError> {
        if self.window != other.window {
            return Err(LinalgError::WindowMismatch);
        }
        if self.dim() == 0 || other.dim() == 0 {
            return Ok(Subspace::zero(self.window.clone()));
        }
        let n = self.window.len();
        let mut cols: Vec<Vec<Scalar>> = self.basis.row_vectors();
        cols.extend(other.basis.row_vectors().into_iter().map(|v| v.into_iter().map(|x| -x).collect()));
        let stacked = Matrix::from_columns(n, &cols)?;
        let k1 = self.dim();
        let vectors: Vec<Vec<Scalar>> = stacked
            .kernel()
            .into_iter()
            .map(|kv| {
                let mut v = vec![Scalar::zero(); n];
                for (i, a) in kv.iter().take(k1).enumerate() {
                    if a.is_zero() {
                        continue;
                    }
                    for (k, x) in self.basis.row(i).iter().enumerate() {
                        if !x.is_zero() {
                            v[k] += &(a * x);
                        }
                    }
                }
                v
            })
            .collect();
        Subspace::span_coords(self.window.clone(), &vectors)
    }
}

impl fmt::Debug for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b: Vec<String> = self.basis_elements().iter().map(|e| e.to_string()).collect();
        write!(f, "span{{{}}}", b.join(", "))
    }
}

/// Column space of `a` inside the span of `w`.
pub fn column_image(a: &Matrix, w: &Window) -> Result<Subspace, LinalgError> {
    if a.rows() != w.len() {
        return Err(LinalgError::Dimension(format!("{} rows against a window of {}", a.rows(), w.len())));
    }
    Subspace::span_coords(w.clone(), &a.transpose().row_vectors())
}

pub fn intersect(s1: &Subspace, s2: &Subspace) -> Result<Subspace, LinalgError> {
    s1.intersect(s2)
}

pub fn member(s: &Subspace, v: &Element) -> Result<Option<Vec<Scalar>>, LinalgError> {
    s.member(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{BasisSymbol, Epsilon};

    fn ints(v: &[i64]) -> Vec<Scalar> {
        v.iter().map(|&x| Scalar::from_int(x)).collect()
    }

    fn window2() -> Window {
        Window::new(AlgebraConfig::new(Epsilon::Zero, true), vec![BasisSymbol::l(0), BasisSymbol::l(1)]).unwrap()
    }

    #[test]
    fn rref_examples() {
        let r = Matrix::from_ints(&[&[2, 4], &[1, 2]]).rref();
        assert_eq!(r.matrix, Matrix::from_ints(&[&[1, 2], &[0, 0]]));
        assert_eq!(r.rank, 1);

        let id = Matrix::identity(3);
        let r = id.rref();
        assert_eq!(r.matrix, id);
        assert_eq!(r.rank, 3);

        let m = Matrix::from_rows(vec![vec![Scalar::i(), Scalar::one()]]).unwrap();
        let r = m.rref();
        assert_eq!(r.matrix, Matrix::from_rows(vec![vec![Scalar::one(), -Scalar::i()]]).unwrap());
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn solve_examples() {
        let s = solve(&Matrix::identity(2), &ints(&[3, 4])).unwrap();
        assert_eq!(s, Solution::Unique(ints(&[3, 4])));

        let s = solve(&Matrix::from_ints(&[&[1, 1]]), &ints(&[2])).unwrap();
        assert_eq!(s, Solution::Parametrized { particular: ints(&[2, 0]), kernel: vec![ints(&[-1, 1])] });

        let s = solve(&Matrix::from_ints(&[&[1], &[1]]), &ints(&[1, 2])).unwrap();
        assert_eq!(s, Solution::Inconsistent);

        assert!(matches!(solve(&Matrix::identity(2), &ints(&[1])), Err(LinalgError::Dimension(_))));
    }

    #[test]
    fn column_image_examples() {
        let w = window2();
        assert_eq!(column_image(&Matrix::zeros(2, 3), &w).unwrap().dim(), 0);
        assert_eq!(column_image(&Matrix::identity(2), &w).unwrap(), Subspace::full(w.clone()));
        let s = column_image(&Matrix::from_ints(&[&[1], &[2]]), &w).unwrap();
        assert_eq!(s.dim(), 1);
        assert_eq!(s.basis_rows().row(0), ints(&[1, 2]).as_slice());
        assert!(column_image(&Matrix::identity(3), &w).is_err());
    }

    #[test]
    fn intersect_examples() {
        let w = window2();
        let e1 = ints(&[1, 0]);
        let e2 = ints(&[0, 1]);
        let both = Subspace::span_coords(w.clone(), &[e1.clone(), e2.clone()]).unwrap();
        let s1 = Subspace::span_coords(w.clone(), &[e1.clone()]).unwrap();
        let s2 = Subspace::span_coords(w.clone(), &[e2.clone()]).unwrap();
        assert_eq!(both.intersect(&s1).unwrap(), s1);
        assert_eq!(s1.intersect(&s2).unwrap().dim(), 0);
        let diag = Subspace::span_coords(w.clone(), &[ints(&[1, 1])]).unwrap();
        assert_eq!(diag.intersect(&both).unwrap(), diag);
    }

    #[test]
    fn member_examples() {
        let w = window2();
        let e1 = BasisSymbol::l(0).elem();
        let e2 = BasisSymbol::l(1).elem();
        let s2 = Subspace::span(w.clone(), &[e2.clone()]).unwrap();
        assert_eq!(s2.member(&Element::zero()).unwrap(), Some(vec![Scalar::zero()]));
        assert_eq!(s2.member(&e1).unwrap(), None);
        let diag = Subspace::span(w.clone(), &[&e1 + &e2]).unwrap();
        assert_eq!(diag.member(&(&e1 + &e2)).unwrap(), Some(vec![Scalar::one()]));
        let outside = BasisSymbol::l(5).elem();
        assert!(matches!(s2.member(&outside), Err(LinalgError::OutOfWindow(_))));
    }

    #[test]
    fn window_rejects_foreign_symbols() {
        let cfg = AlgebraConfig::centerless();
        assert!(Window::new(cfg, vec![BasisSymbol::c()]).is_err());
        let w = Window::new(cfg, vec![BasisSymbol::l(1), BasisSymbol::l(0), BasisSymbol::l(1)]).unwrap();
        assert_eq!(w.symbols(), &[BasisSymbol::l(0), BasisSymbol::l(1)]);
    }
}
