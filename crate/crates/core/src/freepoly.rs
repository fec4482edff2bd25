//! Words, free polynomials, matrices of free polynomials, and their
//! evaluation on tuples of square matrices.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{CMatrix, ONE, ZERO};

/// Coefficients with magnitude below this are dropped on normalisation.
pub const COEFF_FLOOR: f64 = 1e-15;

/// A word in the letters `1..=d`; the empty word is the constant monomial.
///
/// Words are ordered graded-lexicographically: shorter words first, then
/// lexicographic on the letters.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<usize>) -> Self {
        Word(letters)
    }

    pub fn letter(i: usize) -> Self {
        Word(vec![i])
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn check(&self, d: usize) -> Result<()> {
        match self.0.iter().find(|&&l| l == 0 || l > d) {
            Some(&l) => Err(Error::ShapeMismatch(format!("letter {l} outside 1..={d}"))),
            None => Ok(()),
        }
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|l| format!("x{l}")).collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// A d-tuple of n×n complex matrices, the argument of every graded function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointJson", into = "PointJson")]
pub struct GradedPoint {
    n: usize,
    mats: Vec<CMatrix>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointJson {
    d: usize,
    n: usize,
    mats: Vec<CMatrix>,
}

impl TryFrom<PointJson> for GradedPoint {
    type Error = Error;
    fn try_from(j: PointJson) -> Result<Self> {
        if j.mats.len() != j.d {
            return Err(Error::ShapeMismatch(format!("d = {} but {} matrices", j.d, j.mats.len())));
        }
        let p = GradedPoint::new(j.mats)?;
        if p.n != j.n {
            return Err(Error::ShapeMismatch(format!("declared n = {} but matrices are {}x{}", j.n, p.n, p.n)));
        }
        Ok(p)
    }
}

impl From<GradedPoint> for PointJson {
    fn from(p: GradedPoint) -> Self {
        PointJson { d: p.d(), n: p.n, mats: p.mats }
    }
}

impl GradedPoint {
    pub fn new(mats: Vec<CMatrix>) -> Result<Self> {
        let first = mats.first().ok_or_else(|| Error::ShapeMismatch("a point needs d >= 1".into()))?;
        let n = first.rows();
        if n == 0 {
            return Err(Error::ShapeMismatch("level must be at least 1".into()));
        }
        if mats.iter().any(|m| m.rows() != n || m.cols() != n) {
            return Err(Error::ShapeMismatch("all coordinates must be square of equal size".into()));
        }
        Ok(GradedPoint { n, mats })
    }

    /// Level-1 point from scalars.
    pub fn scalar(values: &[Complex64]) -> Result<Self> {
        GradedPoint::new(values.iter().map(|&z| CMatrix::scalar(z)).collect())
    }

    /// The scalar tuple `(α¹ I_n, …, α^d I_n)`.
    pub fn scalar_at_level(values: &[Complex64], n: usize) -> Result<Self> {
        GradedPoint::new(values.iter().map(|&z| CMatrix::identity(n).scale(z)).collect())
    }

    pub fn d(&self) -> usize {
        self.mats.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coordinate `r` (1-based, matching the variable names `x1..xd`).
    pub fn coord(&self, r: usize) -> &CMatrix {
        &self.mats[r - 1]
    }

    pub fn mats(&self) -> &[CMatrix] {
        &self.mats
    }

    pub fn into_mats(self) -> Vec<CMatrix> {
        self.mats
    }

    pub fn map(&self, mut f: impl FnMut(&CMatrix) -> CMatrix) -> GradedPoint {
        let mats: Vec<CMatrix> = self.mats.iter().map(&mut f).collect();
        let n = mats[0].rows();
        GradedPoint { n, mats }
    }

    pub fn zip_with(
        &self,
        other: &GradedPoint,
        mut f: impl FnMut(&CMatrix, &CMatrix) -> CMatrix,
    ) -> Result<GradedPoint> {
        if self.d() != other.d() {
            return Err(Error::ShapeMismatch(format!("d = {} vs d = {}", self.d(), other.d())));
        }
        GradedPoint::new(self.mats.iter().zip(&other.mats).map(|(a, b)| f(a, b)).collect())
    }

    /// Largest coordinate operator norm.
    pub fn max_norm(&self) -> f64 {
        self.mats.iter().map(CMatrix::op_norm).fold(0.0, f64::max)
    }

    /// Whether every coordinate is a multiple of the identity within `tol`.
    pub fn is_scalar_tuple(&self, tol: f64) -> bool {
        self.mats.iter().all(|m| {
            let alpha = m.trace() / self.n as f64;
            m.max_abs_diff(&CMatrix::identity(self.n).scale(alpha)) <= tol
        })
    }

    fn check_d(&self, d: usize) -> Result<()> {
        if self.d() != d {
            return Err(Error::ShapeMismatch(format!("function has d = {d}, point has d = {}", self.d())));
        }
        Ok(())
    }
}

/// Left-to-right product of the named coordinates; the empty word gives `I_n`.
pub fn eval_word(w: &Word, x: &GradedPoint) -> Result<CMatrix> {
    w.check(x.d())?;
    let mut it = w.letters().iter();
    let Some(&first) = it.next() else {
        return Ok(CMatrix::identity(x.n()));
    };
    Ok(it.fold(x.coord(first).clone(), |acc, &l| &acc * x.coord(l)))
}

/// Evaluates many words, reusing prefix products.
struct WordCache<'a> {
    x: &'a GradedPoint,
    memo: HashMap<Word, CMatrix>,
}

impl<'a> WordCache<'a> {
    fn new(x: &'a GradedPoint) -> Self {
        WordCache { x, memo: HashMap::new() }
    }

    fn get(&mut self, w: &Word) -> CMatrix {
        if let Some(m) = self.memo.get(w) {
            return m.clone();
        }
        let value = match w.letters().split_last() {
            None => CMatrix::identity(self.x.n()),
            Some((&last, prefix)) => {
                let head = self.get(&Word(prefix.to_vec()));
                &head * self.x.coord(last)
            }
        };
        self.memo.insert(w.clone(), value.clone());
        value
    }
}

/// A finite linear combination of words with complex coefficients.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyJson", into = "PolyJson")]
pub struct FreePoly {
    d: usize,
    terms: BTreeMap<Word, Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermJson {
    coeff: [f64; 2],
    word: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyJson {
    d: usize,
    terms: Vec<TermJson>,
}

impl TryFrom<PolyJson> for FreePoly {
    type Error = Error;
    fn try_from(j: PolyJson) -> Result<Self> {
        let mut p = FreePoly::zero(j.d);
        for t in j.terms {
            let [re, im] = t.coeff;
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::ShapeMismatch("non-finite coefficient".into()));
            }
            let w = Word(t.word);
            w.check(j.d)?;
            *p.terms.entry(w).or_insert(ZERO) += Complex64::new(re, im);
        }
        p.normalize();
        Ok(p)
    }
}

impl From<FreePoly> for PolyJson {
    fn from(p: FreePoly) -> Self {
        PolyJson {
            d: p.d,
            terms: p.terms.into_iter().map(|(w, c)| TermJson { coeff: [c.re, c.im], word: w.0 }).collect(),
        }
    }
}

impl FreePoly {
    pub fn zero(d: usize) -> Self {
        FreePoly { d, terms: BTreeMap::new() }
    }

    pub fn constant(d: usize, c: Complex64) -> Self {
        FreePoly::monomial(d, Word::empty(), c)
    }

    pub fn one(d: usize) -> Self {
        FreePoly::constant(d, ONE)
    }

    /// The coordinate function `x_i` (1-based).
    pub fn var(d: usize, i: usize) -> Self {
        assert!(i >= 1 && i <= d, "variable x{i} outside 1..={d}");
        FreePoly::monomial(d, Word::letter(i), ONE)
    }

    pub fn monomial(d: usize, w: Word, c: Complex64) -> Self {
        let mut p = FreePoly::zero(d);
        p.terms.insert(w, c);
        p.normalize();
        p
    }

    /// Builds from (word, coefficient) pairs; repeated words are summed.
    pub fn from_terms(d: usize, terms: impl IntoIterator<Item = (Word, Complex64)>) -> Result<Self> {
        let mut p = FreePoly::zero(d);
        for (w, c) in terms {
            w.check(d)?;
            *p.terms.entry(w).or_insert(ZERO) += c;
        }
        p.normalize();
        Ok(p)
    }

    fn normalize(&mut self) {
        self.terms.retain(|_, c| c.norm() >= COEFF_FLOOR);
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, w: &Word) -> Complex64 {
        self.terms.get(w).copied().unwrap_or(ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Degree of the longest word; 0 for constants and the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().next_back().map_or(0, Word::len)
    }

    fn check_same_d(&self, other: &FreePoly) {
        assert_eq!(self.d, other.d, "polynomials over different variable counts");
    }

    pub fn add(&self, other: &FreePoly) -> FreePoly {
        self.check_same_d(other);
        let mut out = self.clone();
        for (w, c) in &other.terms {
            *out.terms.entry(w.clone()).or_insert(ZERO) += c;
        }
        out.normalize();
        out
    }

    pub fn sub(&self, other: &FreePoly) -> FreePoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> FreePoly {
        self.scale(-ONE)
    }

    pub fn scale(&self, c: Complex64) -> FreePoly {
        let mut out = FreePoly { d: self.d, terms: self.terms.iter().map(|(w, a)| (w.clone(), a * c)).collect() };
        out.normalize();
        out
    }

    /// Noncommutative product: words concatenate, `self` on the left.
    pub fn mul(&self, other: &FreePoly) -> FreePoly {
        self.check_same_d(other);
        let mut out = FreePoly::zero(self.d);
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                *out.terms.entry(w1.concat(w2)).or_insert(ZERO) += c1 * c2;
            }
        }
        out.normalize();
        out
    }

    pub fn pow(&self, k: usize) -> FreePoly {
        (0..k).fold(FreePoly::one(self.d), |acc, _| acc.mul(self))
    }

    /// Substitutes `subs[r-1]` for `x_r`. The substitutes may live over a
    /// different variable count, which becomes the result's `d`.
    pub fn compose(&self, subs: &[FreePoly]) -> FreePoly {
        assert_eq!(subs.len(), self.d, "one substitute per variable");
        let new_d = subs.first().map_or(self.d, FreePoly::d);
        let mut out = FreePoly::zero(new_d);
        for (w, c) in &self.terms {
            let mut term = FreePoly::constant(new_d, *c);
            for &l in w.letters() {
                term = term.mul(&subs[l - 1]);
            }
            out = out.add(&term);
        }
        out
    }

    pub fn eval(&self, x: &GradedPoint) -> Result<CMatrix> {
        x.check_d(self.d)?;
        let mut cache = WordCache::new(x);
        let mut acc = CMatrix::zeros(x.n(), x.n());
        for (w, c) in &self.terms {
            acc = &acc + &cache.get(w).scale(*c);
        }
        Ok(acc)
    }
}

impl fmt::Debug for FreePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FreePoly(d={}; ", self.d)?;
        if self.terms.is_empty() {
            write!(f, "0")?;
        }
        for (i, (w, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}{:+}i)*{:?}", c.re, c.im, w)?;
        }
        write!(f, ")")
    }
}

/// Evaluates a free polynomial on a matrix tuple.
pub fn eval_poly(p: &FreePoly, x: &GradedPoint) -> Result<CMatrix> {
    p.eval(x)
}

/// An I×J matrix of free polynomials sharing one variable count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyMatrixJson", into = "PolyMatrixJson")]
pub struct PolyMatrix {
    d: usize,
    rows: usize,
    cols: usize,
    entries: Vec<FreePoly>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyMatrixJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    rows: usize,
    cols: usize,
    entries: Vec<Vec<FreePoly>>,
}

impl TryFrom<PolyMatrixJson> for PolyMatrix {
    type Error = Error;
    fn try_from(j: PolyMatrixJson) -> Result<Self> {
        if j.entries.len() != j.rows || j.entries.iter().any(|r| r.len() != j.cols) {
            return Err(Error::ShapeMismatch(format!("entries do not form a {}x{} grid", j.rows, j.cols)));
        }
        let d = match (j.d, j.entries.first().and_then(|r| r.first())) {
            (Some(d), _) => d,
            (None, Some(p)) => p.d(),
            (None, None) => return Err(Error::ShapeMismatch("empty PolyMatrix needs an explicit d".into())),
        };
        PolyMatrix::new(d, j.rows, j.cols, j.entries.into_iter().flatten().collect())
    }
}

impl From<PolyMatrix> for PolyMatrixJson {
    fn from(m: PolyMatrix) -> Self {
        let entries = if m.cols == 0 {
            vec![Vec::new(); m.rows]
        } else {
            m.entries.chunks(m.cols).map(<[FreePoly]>::to_vec).collect()
        };
        PolyMatrixJson { d: Some(m.d), rows: m.rows, cols: m.cols, entries }
    }
}

impl PolyMatrix {
    /// Row-major entries.
    pub fn new(d: usize, rows: usize, cols: usize, entries: Vec<FreePoly>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("{} entries for {rows}x{cols}", entries.len())));
        }
        if let Some(p) = entries.iter().find(|p| p.d() != d) {
            return Err(Error::ShapeMismatch(format!("entry has d = {} but matrix has d = {d}", p.d())));
        }
        Ok(PolyMatrix { d, rows, cols, entries })
    }

    pub fn from_poly(p: FreePoly) -> Self {
        PolyMatrix { d: p.d(), rows: 1, cols: 1, entries: vec![p] }
    }

    pub fn empty(d: usize) -> Self {
        PolyMatrix { d, rows: 0, cols: 0, entries: Vec::new() }
    }

    /// Column `((x¹−α¹)/ε, …, (x^d−α^d)/ε)ᵗ`: its G_δ meets level 1 in the
    /// Euclidean ball of radius ε about α.
    pub fn ball(alpha: &[Complex64], eps: f64) -> Self {
        let d = alpha.len();
        let entries = (1..=d)
            .map(|r| {
                FreePoly::var(d, r).sub(&FreePoly::constant(d, alpha[r - 1])).scale(Complex64::new(1.0 / eps, 0.0))
            })
            .collect();
        PolyMatrix { d, rows: d, cols: 1, entries }
    }

    /// Row `(x¹, …, x^d)`: the row contractions.
    pub fn row_ball(d: usize) -> Self {
        PolyMatrix { d, rows: 1, cols: d, entries: (1..=d).map(|r| FreePoly::var(d, r)).collect() }
    }

    /// `diag(x¹, …, x^d)`: the free polydisk.
    pub fn polydisk(d: usize) -> Self {
        let entries =
            (0..d * d).map(|k| if k / d == k % d { FreePoly::var(d, k / d + 1) } else { FreePoly::zero(d) }).collect();
        PolyMatrix { d, rows: d, cols: d, entries }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> &FreePoly {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[FreePoly] {
        &self.entries
    }

    pub fn degree(&self) -> usize {
        self.entries.iter().map(FreePoly::degree).max().unwrap_or(0)
    }

    pub fn scale(&self, c: Complex64) -> PolyMatrix {
        PolyMatrix { entries: self.entries.iter().map(|p| p.scale(c)).collect(), ..self.clone() }
    }

    /// Appends `extra` zero columns; `G_δ` is unchanged.
    pub fn pad_cols(&self, extra: usize) -> PolyMatrix {
        let cols = self.cols + extra;
        let entries = (0..self.rows * cols)
            .map(|k| {
                let (i, j) = (k / cols, k % cols);
                if j < self.cols {
                    self.entry(i, j).clone()
                } else {
                    FreePoly::zero(self.d)
                }
            })
            .collect();
        PolyMatrix { d: self.d, rows: self.rows, cols, entries }
    }

    /// Block diagonal `δ₁ ⊕ δ₂`, so that `G_{δ₁⊕δ₂} = G_{δ₁} ∩ G_{δ₂}`.
    pub fn direct_sum(&self, other: &PolyMatrix) -> Result<PolyMatrix> {
        if self.d != other.d {
            return Err(Error::ShapeMismatch(format!("d = {} vs d = {}", self.d, other.d)));
        }
        let rows = self.rows + other.rows;
        let cols = self.cols + other.cols;
        let entries = (0..rows * cols)
            .map(|k| {
                let (i, j) = (k / cols, k % cols);
                if i < self.rows && j < self.cols {
                    self.entry(i, j).clone()
                } else if i >= self.rows && j >= self.cols {
                    other.entry(i - self.rows, j - self.cols).clone()
                } else {
                    FreePoly::zero(self.d)
                }
            })
            .collect();
        Ok(PolyMatrix { d: self.d, rows, cols, entries })
    }

    /// `δ(x)` as an `(I·n)×(J·n)` block matrix; block `(i, j)` is `δ_ij(x)`.
    pub fn eval(&self, x: &GradedPoint) -> Result<CMatrix> {
        x.check_d(self.d)?;
        let n = x.n();
        let mut cache = WordCache::new(x);
        let grid: Vec<Vec<CMatrix>> = (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| {
                        self.entry(i, j)
                            .terms()
                            .fold(CMatrix::zeros(n, n), |acc, (w, c)| &acc + &cache.get(w).scale(*c))
                    })
                    .collect()
            })
            .collect();
        if self.rows == 0 || self.cols == 0 {
            return Ok(CMatrix::zeros(self.rows * n, self.cols * n));
        }
        CMatrix::from_blocks(&grid)
    }

    /// `‖δ(x)‖`.
    pub fn norm_at(&self, x: &GradedPoint) -> Result<f64> {
        Ok(self.eval(x)?.op_norm())
    }
}

pub fn eval_poly_matrix(delta: &PolyMatrix, x: &GradedPoint) -> Result<CMatrix> {
    delta.eval(x)
}

pub fn delta_direct_sum(d1: &PolyMatrix, d2: &PolyMatrix) -> Result<PolyMatrix> {
    d1.direct_sum(d2)
}

/// A free polynomial with `rows×cols` matrix coefficients, `Σ_w w ⊗ C_w`.
///
/// At level n the value is `Σ_w eval_word(w, x) ⊗ C_w`, an `(n·rows)×(n·cols)`
/// matrix with the level index outermost (the realization layout).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatPolyJson", into = "MatPolyJson")]
pub struct MatPoly {
    d: usize,
    rows: usize,
    cols: usize,
    terms: BTreeMap<Word, CMatrix>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatTermJson {
    word: Vec<usize>,
    coeff: CMatrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatPolyJson {
    d: usize,
    rows: usize,
    cols: usize,
    terms: Vec<MatTermJson>,
}

impl TryFrom<MatPolyJson> for MatPoly {
    type Error = Error;
    fn try_from(j: MatPolyJson) -> Result<Self> {
        let mut p = MatPoly::zero(j.d, j.rows, j.cols);
        for t in j.terms {
            let w = Word(t.word);
            p.add_term(w, &t.coeff)?;
        }
        p.normalize();
        Ok(p)
    }
}

impl From<MatPoly> for MatPolyJson {
    fn from(p: MatPoly) -> Self {
        MatPolyJson {
            d: p.d,
            rows: p.rows,
            cols: p.cols,
            terms: p.terms.into_iter().map(|(w, coeff)| MatTermJson { word: w.0, coeff }).collect(),
        }
    }
}

impl MatPoly {
    pub fn zero(d: usize, rows: usize, cols: usize) -> Self {
        MatPoly { d, rows, cols, terms: BTreeMap::new() }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &CMatrix)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, w: &Word) -> CMatrix {
        self.terms.get(w).cloned().unwrap_or_else(|| CMatrix::zeros(self.rows, self.cols))
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().next_back().map_or(0, Word::len)
    }

    /// Accumulates `c` onto the coefficient of `w` (no purge; call sites normalise).
    pub fn add_term(&mut self, w: Word, c: &CMatrix) -> Result<()> {
        w.check(self.d)?;
        if c.shape() != (self.rows, self.cols) {
            return Err(Error::ShapeMismatch(format!(
                "coefficient {:?} for a {}x{} matrix polynomial",
                c.shape(),
                self.rows,
                self.cols
            )));
        }
        match self.terms.get_mut(&w) {
            Some(acc) => *acc = &*acc + c,
            None => {
                self.terms.insert(w, c.clone());
            }
        }
        Ok(())
    }

    pub fn normalize(&mut self) {
        self.terms.retain(|_, c| c.as_dmatrix().iter().any(|z| z.norm() >= COEFF_FLOOR));
    }

    pub fn sub(&self, other: &MatPoly) -> Result<MatPoly> {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), &-c)?;
        }
        out.normalize();
        Ok(out)
    }

    pub fn eval(&self, x: &GradedPoint) -> Result<CMatrix> {
        x.check_d(self.d)?;
        let mut cache = WordCache::new(x);
        let mut acc = CMatrix::zeros(x.n() * self.rows, x.n() * self.cols);
        for (w, c) in &self.terms {
            acc = &acc + &cache.get(w).kron(c);
        }
        Ok(acc)
    }

    /// Entry `(k, l)` becomes the scalar polynomial `Σ_w C_w[k,l] w`.
    pub fn to_poly_matrix(&self) -> PolyMatrix {
        let entries = (0..self.rows * self.cols)
            .map(|k| {
                let (i, j) = (k / self.cols, k % self.cols);
                let mut p = FreePoly::zero(self.d);
                for (w, c) in &self.terms {
                    p.terms.insert(w.clone(), c.get(i, j));
                }
                p.normalize();
                p
            })
            .collect();
        PolyMatrix { d: self.d, rows: self.rows, cols: self.cols, entries }
    }

    pub fn from_poly_matrix(m: &PolyMatrix) -> MatPoly {
        let mut out = MatPoly::zero(m.d, m.rows, m.cols);
        for i in 0..m.rows {
            for j in 0..m.cols {
                for (w, c) in m.entry(i, j).terms() {
                    let unit = CMatrix::from_fn(m.rows, m.cols, |a, b| if (a, b) == (i, j) { *c } else { ZERO });
                    out.add_term(w.clone(), &unit).expect("shape matches by construction");
                }
            }
        }
        out.normalize();
        out
    }

    /// The scalar polynomial of a 1×1 matrix polynomial.
    pub fn to_scalar(&self) -> Option<FreePoly> {
        ((self.rows, self.cols) == (1, 1)).then(|| self.to_poly_matrix().entries.into_iter().next().expect("1x1"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn sample_poly() -> FreePoly {
        FreePoly::from_terms(
            2,
            [
                (Word::empty(), c(2.0)),
                (Word::new(vec![1]), c(1.0)),
                (Word::new(vec![1, 2, 1]), c(-1.0)),
                (Word::new(vec![1, 1, 2]), c(3.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn word_order_is_graded_lex() {
        let mut v =
            vec![Word::new(vec![2, 1]), Word::new(vec![1]), Word::empty(), Word::new(vec![1, 2]), Word::new(vec![2])];
        v.sort();
        assert_eq!(
            v,
            vec![Word::empty(), Word::new(vec![1]), Word::new(vec![2]), Word::new(vec![1, 2]), Word::new(vec![2, 1])]
        );
    }

    #[test]
    fn eval_word_examples() {
        let x = GradedPoint::scalar(&[c(3.0), c(5.0)]).unwrap();
        assert_eq!(eval_word(&Word::empty(), &x).unwrap(), CMatrix::identity(1));
        assert_eq!(eval_word(&Word::new(vec![1, 2]), &x).unwrap(), CMatrix::scalar(c(15.0)));

        let e12 = CMatrix::from_real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let e21 = CMatrix::from_real(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let y = GradedPoint::new(vec![e12, e21]).unwrap();
        assert_eq!(eval_word(&Word::new(vec![1, 2]), &y).unwrap(), CMatrix::diag(&[c(1.0), c(0.0)]));
        assert_eq!(eval_word(&Word::new(vec![2, 1]), &y).unwrap(), CMatrix::diag(&[c(0.0), c(1.0)]));
        assert_eq!(eval_word(&Word::empty(), &y).unwrap(), CMatrix::identity(2));
        assert!(eval_word(&Word::new(vec![3]), &y).is_err());
    }

    #[test]
    fn eval_poly_examples() {
        let p = sample_poly();
        assert_eq!(p.num_terms(), 4);
        let one = GradedPoint::scalar(&[c(1.0), c(1.0)]).unwrap();
        assert!(p.eval(&one).unwrap().max_abs_diff(&CMatrix::scalar(c(5.0))) < 1e-15);
        let y = GradedPoint::new(vec![CMatrix::identity(3), CMatrix::identity(3)]).unwrap();
        assert_eq!(FreePoly::zero(2).eval(&y).unwrap(), CMatrix::zeros(3, 3));
        assert!(p.eval(&GradedPoint::scalar(&[c(1.0)]).unwrap()).is_err());
    }

    #[test]
    fn ring_examples() {
        let x1 = FreePoly::var(2, 1);
        let x2 = FreePoly::var(2, 2);
        let prod = x1.mul(&x2);
        assert_eq!(prod, FreePoly::monomial(2, Word::new(vec![1, 2]), ONE));
        let p = sample_poly();
        assert_eq!(p.mul(&FreePoly::one(2)), p);
        assert_eq!(FreePoly::one(2).mul(&p), p);
        assert!(p.sub(&p).is_zero());
        assert_eq!(x1.scale(c(0.0)), FreePoly::zero(2));
        // tiny coefficients are purged
        let tiny = FreePoly::constant(2, c(1e-16));
        assert!(tiny.is_zero());
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn compose_substitutes_variables() {
        // p(x1, x2) = x1 x2 with x1 -> x1 + 1, x2 -> 2 x1
        let d = 1;
        let p = FreePoly::var(2, 1).mul(&FreePoly::var(2, 2));
        let s1 = FreePoly::var(d, 1).add(&FreePoly::one(d));
        let s2 = FreePoly::var(d, 1).scale(c(2.0));
        let q = p.compose(&[s1, s2]);
        let expected =
            FreePoly::from_terms(1, [(Word::new(vec![1, 1]), c(2.0)), (Word::new(vec![1]), c(2.0))]).unwrap();
        assert_eq!(q, expected);
    }

    #[test]
    fn ball_at_scalar_point() {
        let alpha = [c(0.5), c(-1.0)];
        let delta = PolyMatrix::ball(&alpha, 2.0);
        let x = GradedPoint::scalar(&[c(1.5), c(0.0)]).unwrap();
        let v = delta.eval(&x).unwrap();
        assert_eq!(v.shape(), (2, 1));
        let dist = (1.0f64 + 1.0).sqrt();
        assert!((v.op_norm() - dist / 2.0).abs() < 1e-14);
    }

    #[test]
    fn poly_matrix_eval_layout() {
        let x1 = CMatrix::from_real(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let delta = PolyMatrix::from_poly(FreePoly::var(1, 1));
        let x = GradedPoint::new(vec![x1.clone()]).unwrap();
        assert_eq!(delta.eval(&x).unwrap(), x1);

        let row = PolyMatrix::row_ball(2);
        let y = GradedPoint::new(vec![x1.clone(), CMatrix::identity(2)]).unwrap();
        assert_eq!(row.eval(&y).unwrap(), CMatrix::hstack(&[&x1, &CMatrix::identity(2)]).unwrap());
    }

    #[test]
    fn delta_direct_sum_is_block_diagonal() {
        let a = PolyMatrix::row_ball(2);
        let b = PolyMatrix::polydisk(2);
        let s = delta_direct_sum(&a, &b).unwrap();
        assert_eq!((s.rows(), s.cols()), (3, 4));
        assert_eq!(delta_direct_sum(&a, &PolyMatrix::empty(2)).unwrap(), a);

        let x = GradedPoint::new(vec![
            CMatrix::from_real(&[&[0.1, 0.2], &[0.0, 0.3]]),
            CMatrix::from_real(&[&[0.0, -0.4], &[0.5, 0.1]]),
        ])
        .unwrap();
        let lhs = s.eval(&x).unwrap();
        let rhs = a.eval(&x).unwrap().direct_sum(&b.eval(&x).unwrap());
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let p = sample_poly();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with(r#"{"d":2,"terms":[{"coeff":[2.0,0.0],"word":[]}"#));
        let back: FreePoly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<FreePoly>(r#"{"d":1,"terms":[{"coeff":[1,0],"word":[2]}]}"#).is_err());

        let m = PolyMatrix::ball(&[c(0.0), c(1.0)], 1.0);
        let back: PolyMatrix = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);

        let pt = GradedPoint::scalar(&[c(1.0), c(2.0)]).unwrap();
        let back: GradedPoint = serde_json::from_str(&serde_json::to_string(&pt).unwrap()).unwrap();
        assert_eq!(back, pt);
        assert!(serde_json::from_str::<GradedPoint>(r#"{"d":1,"n":2,"mats":[{"rows":1,"cols":1,"data":[[0,0]]}]}"#)
            .is_err());
    }

    #[test]
    fn mat_poly_conversion_commutes_with_eval() {
        let m = PolyMatrix::ball(&[c(0.3), c(0.0)], 0.5).direct_sum(&PolyMatrix::row_ball(2)).unwrap();
        let mp = MatPoly::from_poly_matrix(&m);
        assert_eq!(mp.to_poly_matrix(), m);
        let x = GradedPoint::new(vec![
            CMatrix::from_real(&[&[0.1, 0.2], &[0.0, 0.3]]),
            CMatrix::from_real(&[&[0.0, -0.4], &[0.5, 0.1]]),
        ])
        .unwrap();
        let n = x.n();
        let (rows, cols) = (m.rows(), m.cols());
        // block-row-major (i·n+a) vs level-outer (a·rows+i)
        let p_rows = CMatrix::commutation(rows, n);
        let p_cols = CMatrix::commutation(cols, n);
        let permuted = &(&p_rows * &m.eval(&x).unwrap()) * &p_cols.adjoint();
        assert!(permuted.max_abs_diff(&mp.eval(&x).unwrap()) < 1e-15);
    }

    #[test]
    fn scalar_tuple_predicate() {
        let s = GradedPoint::scalar_at_level(&[c(2.0), Complex64::new(0.0, 1.0)], 3).unwrap();
        assert!(s.is_scalar_tuple(1e-12));
        let e12 = CMatrix::from_real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(!GradedPoint::new(vec![e12]).unwrap().is_scalar_tuple(1e-12));
    }
}
