//! Point-level nc structure: direct sums, similarities, membership in
//! `G_δ`, envelope witnesses, derivatives via block points, and a checker
//! for the nc axioms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::freepoly::{GradedPoint, PolyMatrix};
use crate::func::NcFunction;
use crate::mat::CMatrix;

pub const DEFAULT_MARGIN: f64 = 1e-9;

/// Base tolerance for similarity-based identities, multiplied by `cond(S)`.
pub const NC_TOL: f64 = 1e-8;

/// Componentwise `x ⊕ y`.
pub fn point_direct_sum(x: &GradedPoint, y: &GradedPoint) -> Result<GradedPoint> {
    x.zip_with(y, CMatrix::direct_sum)
}

/// Componentwise `s⁻¹ x s`.
pub fn conjugate(x: &GradedPoint, s: &CMatrix) -> Result<GradedPoint> {
    if s.shape() != (x.n(), x.n()) {
        return Err(Error::ShapeMismatch(format!("similarity {:?} at level {}", s.shape(), x.n())));
    }
    let s_inv = s.inv()?.matrix;
    Ok(x.map(|m| &(&s_inv * m) * s))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", content = "dist")]
pub enum Membership {
    Inside(f64),
    Boundary,
    Outside(f64),
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside(_))
    }
}

/// Classifies `x` against `G_δ`: `Inside` iff `‖δ(x)‖ < 1 − margin`,
/// `Boundary` within `margin` of 1, `Outside` otherwise. The distance is
/// `1 − ‖δ(x)‖`.
pub fn in_gdelta(delta: &PolyMatrix, x: &GradedPoint, margin: f64) -> Result<Membership> {
    let norm = delta.norm_at(x)?;
    let dist = 1.0 - norm;
    Ok(if norm < 1.0 - margin {
        Membership::Inside(dist)
    } else if norm <= 1.0 + margin {
        Membership::Boundary
    } else {
        Membership::Outside(dist)
    })
}

/// `x = S⁻¹ (⊕ blocks) S`.
#[derive(Clone, Debug)]
pub struct SimilarityWitness {
    blocks: Vec<GradedPoint>,
    s: CMatrix,
    s_inv: CMatrix,
    cond: f64,
}

impl SimilarityWitness {
    pub fn new(blocks: Vec<GradedPoint>, s: CMatrix) -> Result<Self> {
        let d =
            blocks.first().map(GradedPoint::d).ok_or_else(|| Error::ShapeMismatch("witness needs a block".into()))?;
        if blocks.iter().any(|b| b.d() != d) {
            return Err(Error::ShapeMismatch("blocks disagree on d".into()));
        }
        let total: usize = blocks.iter().map(GradedPoint::n).sum();
        if s.shape() != (total, total) {
            return Err(Error::ShapeMismatch(format!("S is {:?} but blocks sum to {total}", s.shape())));
        }
        let inv = s.inv()?;
        Ok(SimilarityWitness { blocks, s, s_inv: inv.matrix, cond: inv.cond })
    }

    pub fn blocks(&self) -> &[GradedPoint] {
        &self.blocks
    }

    pub fn s(&self) -> &CMatrix {
        &self.s
    }

    pub fn cond(&self) -> f64 {
        self.cond
    }

    /// The point `S⁻¹ (⊕ blocks) S` this witness describes.
    pub fn point(&self) -> GradedPoint {
        let sum = self.blocks[1..]
            .iter()
            .try_fold(self.blocks[0].clone(), |acc, b| point_direct_sum(&acc, b))
            .expect("blocks share d");
        sum.map(|m| &(&self.s_inv * m) * &self.s)
    }
}

/// Whether `x` equals `S⁻¹ (⊕ blocks) S` within `1e-8·cond(S)` (relative to `‖x‖`).
pub fn envelope_member(x: &GradedPoint, w: &SimilarityWitness) -> bool {
    let total: usize = w.blocks.iter().map(GradedPoint::n).sum();
    if x.d() != w.blocks[0].d() || x.n() != total {
        return false;
    }
    let tol = NC_TOL * w.cond * x.max_norm().max(1.0);
    w.point().mats().iter().zip(x.mats()).all(|(a, b)| a.max_abs_diff(b) <= tol)
}

/// `f~(x) = (S⁻¹ ⊗ I_K)(⊕ f(blocks))(S ⊗ I_H)` with `dims = (H, K)`.
pub fn extend_function(f_on_blocks: &[CMatrix], w: &SimilarityWitness, dims: (usize, usize)) -> Result<CMatrix> {
    let (h, k) = dims;
    if f_on_blocks.len() != w.blocks.len() {
        return Err(Error::ShapeMismatch(format!("{} values for {} blocks", f_on_blocks.len(), w.blocks.len())));
    }
    for (v, b) in f_on_blocks.iter().zip(&w.blocks) {
        if v.shape() != (b.n() * k, b.n() * h) {
            return Err(Error::ShapeMismatch(format!("value {:?} for a level-{} block", v.shape(), b.n())));
        }
    }
    let sum = CMatrix::direct_sum_all(f_on_blocks);
    Ok(&(&w.s_inv.kron(&CMatrix::identity(k)) * &sum) * &w.s.kron(&CMatrix::identity(h)))
}

/// The upper-triangular point `[[N, NC − CM], [0, M]]`.
pub fn intertwined_point(n_pt: &GradedPoint, m_pt: &GradedPoint, c: &CMatrix) -> Result<GradedPoint> {
    let n = n_pt.n();
    if m_pt.n() != n || c.shape() != (n, n) {
        return Err(Error::ShapeMismatch("intertwined point needs equal levels".into()));
    }
    n_pt.zip_with(m_pt, |a, b| {
        let corner = &(a * c) - &(c * b);
        CMatrix::from_blocks(&[vec![a.clone(), corner], vec![CMatrix::zeros(n, n), b.clone()]]).expect("square blocks")
    })
}

/// `[[M, E], [0, M]]`.
pub fn derivative_point(m: &GradedPoint, e: &GradedPoint) -> Result<GradedPoint> {
    let n = m.n();
    if e.n() != n {
        return Err(Error::ShapeMismatch("direction must be at the same level".into()));
    }
    m.zip_with(e, |a, b| {
        CMatrix::from_blocks(&[vec![a.clone(), b.clone()], vec![CMatrix::zeros(n, n), a.clone()]])
            .expect("square blocks")
    })
}

/// `(value rows / n, value cols / n) = (K, H)`.
fn value_dims(v: &CMatrix, n: usize) -> Result<(usize, usize)> {
    if !v.rows().is_multiple_of(n) || !v.cols().is_multiple_of(n) {
        return Err(Error::ShapeMismatch(format!("value {:?} is not graded at level {n}", v.shape())));
    }
    Ok((v.rows() / n, v.cols() / n))
}

/// Directional derivative `Df(M)[E]`, read off the (1,2) block of
/// `f([[M, E], [0, M]])`.
pub fn nc_derivative<F: NcFunction + ?Sized>(f: &F, m: &GradedPoint, e: &GradedPoint) -> Result<CMatrix> {
    let value = f.eval(&derivative_point(m, e)?)?;
    let n = m.n();
    let (k, h) = value_dims(&value, 2 * n)?;
    Ok(value.submatrix(0, n * h, n * k, n * h))
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct NcAxiomReport {
    /// Max of `‖f(x⊕y) − f(x)⊕f(y)‖ / max(1, ‖f‖)`.
    pub direct_sum: f64,
    /// Max of `‖f(s⁻¹xs) − s⁻¹f(x)s‖ / (cond(s)·max(1, ‖f(x)‖))`.
    pub similarity: f64,
    /// Max scaled deviation of the upper-triangular block identity.
    pub block: f64,
    pub direct_sum_checks: usize,
    pub similarity_checks: usize,
    pub block_checks: usize,
    /// Cases skipped because a constructed point left the function's domain.
    pub skipped: usize,
    pub threshold: f64,
    pub pass: bool,
}

/// Measures how far `f` is from respecting direct sums, similarities and
/// the block intertwining identity on the given samples.
///
/// Every unordered pair of samples is direct-summed; every sample is
/// conjugated by every similarity of matching size; every same-level pair
/// `(N, M)` is combined with each matching similarity `C` (rescaled to norm
/// 1/4) into `[[N, NC − CM], [0, M]]`. Constructed points on which `f` errors
/// are skipped and counted.
pub fn check_nc_axioms<F: NcFunction + ?Sized>(f: &F, samples: &[GradedPoint], sims: &[CMatrix]) -> NcAxiomReport {
    let mut rep = NcAxiomReport { threshold: NC_TOL, ..Default::default() };
    let values: Vec<Option<CMatrix>> = samples.iter().map(|x| f.eval(x).ok()).collect();
    rep.skipped += values.iter().filter(|v| v.is_none()).count();

    for i in 0..samples.len() {
        for j in i..samples.len() {
            let (Some(fx), Some(fy)) = (&values[i], &values[j]) else { continue };
            let Ok(sum_pt) = point_direct_sum(&samples[i], &samples[j]) else { continue };
            match f.eval(&sum_pt) {
                Ok(v) if v.shape() == (fx.rows() + fy.rows(), fx.cols() + fy.cols()) => {
                    let scale = fx.op_norm().max(fy.op_norm()).max(1.0);
                    rep.direct_sum = rep.direct_sum.max(v.max_abs_diff(&fx.direct_sum(fy)) / scale);
                    rep.direct_sum_checks += 1;
                }
                Ok(_) => rep.direct_sum = f64::INFINITY,
                Err(_) => rep.skipped += 1,
            }
        }
    }

    for (x, fx) in samples.iter().zip(&values) {
        let Some(fx) = fx else { continue };
        let Ok((k, h)) = value_dims(fx, x.n()) else {
            rep.similarity = f64::INFINITY;
            continue;
        };
        for s in sims.iter().filter(|s| s.shape() == (x.n(), x.n())) {
            let Ok(inv) = s.inv() else { continue };
            let Ok(conj) = conjugate(x, s) else { continue };
            match f.eval(&conj) {
                Ok(v) => {
                    let expected = &(&inv.matrix.kron(&CMatrix::identity(k)) * fx) * &s.kron(&CMatrix::identity(h));
                    let dev = v.max_abs_diff(&expected) / (inv.cond * fx.op_norm().max(1.0));
                    rep.similarity = rep.similarity.max(dev);
                    rep.similarity_checks += 1;
                }
                Err(_) => rep.skipped += 1,
            }
        }
    }

    for i in 0..samples.len() {
        for j in 0..samples.len() {
            let (nx, mx) = (&samples[i], &samples[j]);
            if nx.n() != mx.n() {
                continue;
            }
            let (Some(fn_), Some(fm)) = (&values[i], &values[j]) else { continue };
            let Ok((k, h)) = value_dims(fn_, nx.n()) else { continue };
            for s in sims.iter().filter(|s| s.shape() == (nx.n(), nx.n())) {
                let norm = s.op_norm();
                if norm == 0.0 {
                    continue;
                }
                let c = s.scale_re(0.25 / norm);
                let Ok(pt) = intertwined_point(nx, mx, &c) else { continue };
                match f.eval(&pt) {
                    Ok(v) => {
                        let n = nx.n();
                        let corner = &(fn_ * &c.kron(&CMatrix::identity(h))) - &(&c.kron(&CMatrix::identity(k)) * fm);
                        let expected = CMatrix::from_blocks(&[
                            vec![fn_.clone(), corner],
                            vec![CMatrix::zeros(n * k, n * h), fm.clone()],
                        ])
                        .expect("consistent shapes");
                        // s = [[I, C], [0, I]] has cond ≤ (1 + ‖C‖)²
                        let cond = (1.0 + 0.25f64).powi(2);
                        let scale = fn_.op_norm().max(fm.op_norm()).max(1.0);
                        rep.block = rep.block.max(v.max_abs_diff(&expected) / (cond * scale));
                        rep.block_checks += 1;
                    }
                    Err(_) => rep.skipped += 1,
                }
            }
        }
    }

    rep.pass = rep.direct_sum <= NC_TOL && rep.similarity <= NC_TOL && rep.block <= NC_TOL;
    rep
}
