//! Free δ-realizations
//!
//! `Ω(x) = I⊗A + (I⊗B) Δ(x) [I − (I⊗D) Δ(x)]⁻¹ (I⊗C)`
//!
//! where `J1 = [[A, B], [C, D]]` is an isometry from `K1 ⊕ (C^I ⊗ C^M)` to
//! `K2 ⊕ (C^J ⊗ C^M)` and `Δ(x)` is the lifted `δ(x)` described in
//! [`crate::model`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freepoly::{GradedPoint, PolyMatrix};
use crate::func::NcFunction;
use crate::mat::CMatrix;
use crate::model::{lift_delta, model_residual, ModelDims, ModelSampleSet};

/// Isometry tolerance accepted when loading or building a realization.
pub const ISOMETRY_TOL: f64 = 1e-8;

/// Points must satisfy `‖δ(x)‖ < 1 − DOMAIN_MARGIN`.
pub const DOMAIN_MARGIN: f64 = 1e-9;

/// Largest Neumann truncation order `eval_neumann` will run.
pub const NEUMANN_TERM_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RealizationJson", into = "RealizationJson")]
pub struct Realization {
    delta: PolyMatrix,
    k1: usize,
    k2: usize,
    mult: usize,
    j1: CMatrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RealizationJson {
    delta: PolyMatrix,
    #[serde(rename = "dimK1")]
    dim_k1: usize,
    #[serde(rename = "dimK2")]
    dim_k2: usize,
    mult: usize,
    #[serde(rename = "J1")]
    j1: CMatrix,
}

impl TryFrom<RealizationJson> for Realization {
    type Error = Error;

    fn try_from(j: RealizationJson) -> Result<Self> {
        Realization::new(j.delta, j.dim_k1, j.dim_k2, j.mult, j.j1)
    }
}

impl From<Realization> for RealizationJson {
    fn from(r: Realization) -> Self {
        RealizationJson { delta: r.delta, dim_k1: r.k1, dim_k2: r.k2, mult: r.mult, j1: r.j1 }
    }
}

/// Intermediate quantities of one evaluation.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub omega: CMatrix,
    /// `(I − (I⊗D)Δ)⁻¹ (I⊗C)`.
    pub v: CMatrix,
    pub c_lift: CMatrix,
    pub delta_norm: f64,
}

#[derive(Clone, Debug)]
pub struct NeumannEval {
    pub value: CMatrix,
    /// Last series index included.
    pub k: usize,
    /// Certified bound on the distance to the exact value.
    pub bound: f64,
}

impl Realization {
    pub fn new(delta: PolyMatrix, k1: usize, k2: usize, mult: usize, j1: CMatrix) -> Result<Self> {
        let expected = (k2 + mult * delta.cols(), k1 + mult * delta.rows());
        if j1.shape() != expected {
            return Err(Error::ShapeMismatch(format!("J1 is {:?}, expected {expected:?}", j1.shape())));
        }
        let defect = j1.isometry_defect();
        if defect > ISOMETRY_TOL {
            return Err(Error::ShapeMismatch(format!("J1 is not an isometry (defect {defect:.3e})")));
        }
        Ok(Realization { delta, k1, k2, mult, j1 })
    }

    pub fn delta(&self) -> &PolyMatrix {
        &self.delta
    }

    pub fn k1(&self) -> usize {
        self.k1
    }

    pub fn k2(&self) -> usize {
        self.k2
    }

    pub fn mult(&self) -> usize {
        self.mult
    }

    pub fn j1(&self) -> &CMatrix {
        &self.j1
    }

    fn inner_in(&self) -> usize {
        self.mult * self.delta.rows()
    }

    fn inner_out(&self) -> usize {
        self.mult * self.delta.cols()
    }

    pub fn a(&self) -> CMatrix {
        self.j1.submatrix(0, 0, self.k2, self.k1)
    }

    pub fn b(&self) -> CMatrix {
        self.j1.submatrix(0, self.k1, self.k2, self.inner_in())
    }

    pub fn c(&self) -> CMatrix {
        self.j1.submatrix(self.k2, 0, self.inner_out(), self.k1)
    }

    pub fn d_block(&self) -> CMatrix {
        self.j1.submatrix(self.k2, self.k1, self.inner_out(), self.inner_in())
    }

    fn check_inside(&self, x: &GradedPoint) -> Result<f64> {
        let norm = self.delta.norm_at(x)?;
        if norm < 1.0 - DOMAIN_MARGIN {
            Ok(norm)
        } else {
            Err(Error::OutsideDomain { norm })
        }
    }

    /// Evaluates `Ω(x)` and the model map `v(x)` by a direct solve.
    pub fn resolve(&self, x: &GradedPoint) -> Result<Resolved> {
        let delta_norm = self.check_inside(x)?;
        let n = x.n();
        let lifted = lift_delta(&self.delta, x, self.mult)?;
        let d_lift = CMatrix::kron_left_identity(n, &self.d_block());
        let c_lift = CMatrix::kron_left_identity(n, &self.c());
        let resolvent = &CMatrix::identity(d_lift.rows()) - &(&d_lift * &lifted);
        let v = resolvent.solve(&c_lift).map_err(|e| Error::Internal(format!("resolvent inside the domain: {e}")))?;
        let omega = &CMatrix::kron_left_identity(n, &self.a())
            + &(&(&CMatrix::kron_left_identity(n, &self.b()) * &lifted) * &v);
        Ok(Resolved { omega, v, c_lift, delta_norm })
    }

    /// `Ω(x)`, an `(n·K2)×(n·K1)` matrix.
    pub fn eval_direct(&self, x: &GradedPoint) -> Result<CMatrix> {
        Ok(self.resolve(x)?.omega)
    }

    /// Neumann partial sum `I⊗A + Σ_{k≤K} (I⊗B)Δ((I⊗D)Δ)^k(I⊗C)` with `K`
    /// minimal such that `r^{K+2}/(1−r) ≤ tol`, `r = ‖δ(x)‖`. The returned
    /// bound is that tail, or 0 when the series is finite.
    pub fn eval_neumann(&self, x: &GradedPoint, tol: f64) -> Result<NeumannEval> {
        let r0 = self.check_inside(x)?;
        let n = x.n();
        let lifted = lift_delta(&self.delta, x, self.mult)?;
        let d = self.d_block();
        let exact = r0 == 0.0 || d.max_abs_diff(&CMatrix::zeros(d.rows(), d.cols())) == 0.0;
        let (k, bound) = if exact { (0, 0.0) } else { neumann_order(r0, tol)? };

        let step = &CMatrix::kron_left_identity(n, &d) * &lifted;
        let b_delta = &CMatrix::kron_left_identity(n, &self.b()) * &lifted;
        let mut state = CMatrix::kron_left_identity(n, &self.c());
        let mut value = CMatrix::kron_left_identity(n, &self.a());
        for i in 0..=k {
            value = &value + &(&b_delta * &state);
            if i < k {
                state = &step * &state;
            }
        }
        Ok(NeumannEval { value, k, bound })
    }
}

/// Smallest `K` with `r^{K+2}/(1−r) ≤ tol`, together with that tail.
pub fn neumann_order(r: f64, tol: f64) -> Result<(usize, f64)> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::OutsideDomain { norm: r });
    }
    let mut tail = r * r / (1.0 - r);
    let mut k = 0;
    while tail > tol {
        k += 1;
        if k > NEUMANN_TERM_CAP {
            return Err(Error::TermBlowup { cap: NEUMANN_TERM_CAP });
        }
        tail *= r;
    }
    Ok((k, tail))
}

impl NcFunction for Realization {
    fn d(&self) -> usize {
        self.delta.d()
    }

    fn eval(&self, x: &GradedPoint) -> Result<CMatrix> {
        self.eval_direct(x)
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Reserve every fifth point for validation.
    pub holdout: bool,
    /// Largest multiplicity the padding step may reach.
    pub mult_cap: usize,
    /// Relative tolerance on the Gram comparison.
    pub gram_tol: f64,
    /// Relative singular-value cut when orthonormalizing the span.
    pub rank_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { holdout: true, mult_cap: 64, gram_tol: 1e-6, rank_tol: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub realization: Realization,
    /// Dimension of the span of the input vectors.
    pub rank: usize,
    pub mult: usize,
    /// Zero columns appended to δ.
    pub padded_cols: usize,
    pub model_residual: f64,
    pub gram_deviation: f64,
    pub train_points: Vec<usize>,
    pub holdout_points: Vec<usize>,
    /// Max `‖Ω(x)Ψ(x) − Φ(x)‖` on training points.
    pub train_residual: f64,
    /// Same on held-out points; `None` when nothing was held out.
    pub holdout_residual: Option<f64>,
}

fn is_holdout(i: usize, opts: &FitOptions) -> bool {
    opts.holdout && (i + 1).is_multiple_of(5)
}

/// Re-indexes `C^n ⊗ C^J ⊗ C^M` rows into `C^n ⊗ C^J' ⊗ C^M'`, filling with zeros.
fn pad_internal(u: &CMatrix, n: usize, from: (usize, usize), to: (usize, usize)) -> CMatrix {
    let ((j, m), (j2, m2)) = (from, to);
    let mut out = vec![crate::mat::ZERO; n * j2 * m2 * u.cols()];
    for a in 0..n {
        for jj in 0..j {
            for mm in 0..m {
                let src = a * j * m + jj * m + mm;
                let dst = a * j2 * m2 + jj * m2 + mm;
                for c in 0..u.cols() {
                    out[dst * u.cols() + c] = u.get(src, c);
                }
            }
        }
    }
    CMatrix::new(n * j2 * m2, u.cols(), out).expect("copied finite entries")
}

/// Chooses `(J', M')` so that `K2 + J'·M' ≥ K1 + I·M'` with `J' ≥ J`, `M' ≥ M`.
fn padding_plan(i_dim: usize, j_dim: usize, dims: &ModelDims, cap: usize) -> Result<(usize, usize)> {
    let mut j2 = j_dim.max(i_dim);
    if j2 == i_dim && dims.k2 < dims.k1 {
        j2 = i_dim + 1;
    }
    let mut m2 = dims.mult.max(1);
    while dims.k2 + j2 * m2 < dims.k1 + i_dim * m2 {
        m2 += 1;
    }
    if m2 > cap {
        return Err(Error::RankOverflow { needed: m2, cap });
    }
    Ok((j2, m2))
}

/// Builds a realization whose isometry maps every
/// `p = [Ψ(x)e ; Δ(x)u(x)e]` to `q = [Φ(x)e ; u(x)e]`.
///
/// The vectors run over training points, level rows `k`, and basis vectors
/// `e` of `C^n ⊗ H`, in that order. Equal Gram matrices make the map
/// isometric on the span of the `p`'s; it is then extended to the whole
/// space by Gram-Schmidt on standard basis vectors.
pub fn fit_lurking_isometry(s: &ModelSampleSet, opts: &FitOptions) -> Result<FitReport> {
    let dims = s.validate()?;
    let (i_dim, j_dim) = (s.delta.rows(), s.delta.cols());
    let residual = model_residual(s)?;
    let (j2, m2) = padding_plan(i_dim, j_dim, &dims, opts.mult_cap)?;
    let delta = s.delta.pad_cols(j2 - j_dim);
    let dom = dims.k1 + i_dim * m2;
    let codom = dims.k2 + j2 * m2;

    let (train, holdout): (Vec<usize>, Vec<usize>) = (0..s.points.len()).partition(|&i| !is_holdout(i, opts));
    let mut p_cols: Vec<CMatrix> = Vec::new();
    let mut q_cols: Vec<CMatrix> = Vec::new();
    for &idx in &train {
        let x = &s.points[idx];
        let n = x.n();
        let u = pad_internal(&s.u[idx], n, (j_dim, dims.mult), (j2, m2));
        let du = &lift_delta(&delta, x, m2)? * &u;
        for k in 0..n {
            let p = CMatrix::vstack(&[
                &s.psi[idx].row_range(k * dims.k1, dims.k1),
                &du.row_range(k * i_dim * m2, i_dim * m2),
            ])?;
            let q =
                CMatrix::vstack(&[&s.phi[idx].row_range(k * dims.k2, dims.k2), &u.row_range(k * j2 * m2, j2 * m2)])?;
            p_cols.push(p);
            q_cols.push(q);
        }
    }
    let p_mat = CMatrix::hstack(&p_cols.iter().collect::<Vec<_>>())?;
    let q_mat = CMatrix::hstack(&q_cols.iter().collect::<Vec<_>>())?;

    let gp = &p_mat.adjoint() * &p_mat;
    let gq = &q_mat.adjoint() * &q_mat;
    let scale = gp.max_abs_diff(&CMatrix::zeros(gp.rows(), gp.cols()));
    let gram_deviation = gp.max_abs_diff(&gq);
    if gram_deviation > opts.gram_tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::GramMismatch { deviation: gram_deviation });
    }

    let (u_svd, sigma, v_svd) = p_mat.thin_svd();
    let top = sigma.first().copied().unwrap_or(0.0);
    let rank = sigma.iter().take_while(|&&s| top > 0.0 && s >= opts.rank_tol * top).count();
    let u_r = u_svd.columns(0, rank);
    let inv_sigma: Vec<num_complex::Complex64> = sigma[..rank].iter().map(|&s| (1.0 / s).into()).collect();
    let w_r = (&(&q_mat * &v_svd.columns(0, rank)) * &CMatrix::diag(&inv_sigma)).orthonormalize();
    let u_full = CMatrix::complete_to_isometry(&u_r, dom)?;
    let w_ext = CMatrix::complete_to_isometry(&w_r, dom)?;
    if w_ext.rows() != codom {
        return Err(Error::Internal("codomain size drifted during completion".into()));
    }
    let j1 = (&w_ext * &u_full.adjoint()).orthonormalize();
    let realization = Realization::new(delta, dims.k1, dims.k2, m2, j1)?;

    let fit_error = |idx: usize| -> Result<f64> {
        let omega = realization.eval_direct(&s.points[idx])?;
        Ok((&(&omega * &s.psi[idx]) - &s.phi[idx]).op_norm())
    };
    let train_residual = train.iter().map(|&i| fit_error(i)).try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))?;
    let holdout_residual = if holdout.is_empty() {
        None
    } else {
        Some(holdout.iter().map(|&i| fit_error(i)).try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))?)
    };

    Ok(FitReport {
        realization,
        rank,
        mult: m2,
        padded_cols: j2 - j_dim,
        model_residual: residual,
        gram_deviation,
        train_points: train,
        holdout_points: holdout,
        train_residual,
        holdout_residual,
    })
}

/// Where the model for `Ψ*Ψ − ε²` comes from.
#[derive(Clone, Debug)]
pub enum CoronaModel {
    /// Explicit `u(x)` values, one per point.
    Samples(Vec<CMatrix>),
    /// `u(x) = v₀(x)Ψ(x)` from a realization `Ω₀` with `Ω₀Ψ = ε`.
    FromRealization(Realization),
}

#[derive(Clone, Debug, Serialize)]
pub struct CoronaSolution {
    /// `Ω`, a `1×N` row; the solution is `φ = Ω/ε`.
    pub omega: Realization,
    pub eps: f64,
    /// Certified `sup ‖(φ₁,…,φ_N)‖ ≤ 1/ε`.
    pub bound: f64,
    /// Max `‖Σ φ_i(x) ψ_i(x) − I‖` over the input points.
    pub identity_residual: f64,
    /// Max `‖(φ₁(x),…,φ_N(x))‖` over the input points.
    pub max_norm: f64,
    pub fit: FitReport,
}

impl CoronaSolution {
    /// `(φ₁(x), …, φ_N(x))` as an `n×(n·N)` matrix.
    pub fn eval(&self, x: &GradedPoint) -> Result<CMatrix> {
        Ok(self.omega.eval_direct(x)?.scale_re(1.0 / self.eps))
    }
}

/// Stacks `ψ_1(x), …, ψ_N(x)` into the column `Ψ(x)` with rows `a·N + i`.
pub fn stack_column(values: &[CMatrix]) -> Result<CMatrix> {
    let big_n = values.len();
    let n = values.first().map(CMatrix::rows).ok_or_else(|| Error::ShapeMismatch("no functions".into()))?;
    if values.iter().any(|v| v.shape() != (n, n)) {
        return Err(Error::ShapeMismatch("function values must be n×n".into()));
    }
    Ok(CMatrix::from_fn(n * big_n, n, |r, b| values[r % big_n].get(r / big_n, b)))
}

/// Solves `Σ φ_i ψ_i = 1` with `‖(φ_i)‖ ≤ 1/ε` from a model of
/// `Ψ*Ψ − ε²`. Every point is used for fitting.
pub fn corona_solve(
    delta: &PolyMatrix,
    points: &[GradedPoint],
    psis: &[Vec<CMatrix>],
    eps: f64,
    model: &CoronaModel,
) -> Result<CoronaSolution> {
    if points.len() != psis.len() {
        return Err(Error::ShapeMismatch(format!("{} points but {} psi samples", points.len(), psis.len())));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::ShapeMismatch("eps must be positive".into()));
    }
    let psi: Vec<CMatrix> = psis.iter().map(|v| stack_column(v)).collect::<Result<_>>()?;
    for (index, (x, col)) in points.iter().zip(&psi).enumerate() {
        let gram = &(&col.adjoint() * col) - &CMatrix::identity(x.n()).scale_re(eps * eps);
        let min_eig = gram.hermitian_min_eigenvalue();
        if min_eig < -1e-9 {
            return Err(Error::BelowFloor { index, min_eig });
        }
    }
    let u = match model {
        CoronaModel::Samples(u) => u.clone(),
        CoronaModel::FromRealization(r) => crate::model::model_from_realization(r, points, &psi)?.u,
    };
    let delta = match model {
        CoronaModel::FromRealization(r) => r.delta().clone(),
        CoronaModel::Samples(_) => delta.clone(),
    };
    let phi = points.iter().map(|x| CMatrix::identity(x.n()).scale_re(eps)).collect();
    let set = ModelSampleSet { delta, points: points.to_vec(), psi: psi.clone(), phi, u };
    let fit = fit_lurking_isometry(&set, &FitOptions { holdout: false, ..FitOptions::default() })?;
    let omega = fit.realization.clone();

    let mut identity_residual = 0.0f64;
    let mut max_norm = 0.0f64;
    for (x, col) in points.iter().zip(&psi) {
        let sol = omega.eval_direct(x)?.scale_re(1.0 / eps);
        identity_residual = identity_residual.max((&(&sol * col) - &CMatrix::identity(x.n())).op_norm());
        max_norm = max_norm.max(sol.op_norm());
    }
    Ok(CoronaSolution { omega, eps, bound: 1.0 / eps, identity_residual, max_norm, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freepoly::FreePoly;
    use num_complex::Complex64;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn x_delta() -> PolyMatrix {
        PolyMatrix::from_poly(FreePoly::var(1, 1))
    }

    fn mobius(a: f64) -> Realization {
        let s = (1.0 - a * a).sqrt();
        Realization::new(x_delta(), 1, 1, 1, CMatrix::from_real(&[&[a, s], &[s, -a]])).unwrap()
    }

    fn shift() -> Realization {
        Realization::new(x_delta(), 1, 1, 1, CMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap()
    }

    #[test]
    fn shift_is_identity_map() {
        let x = GradedPoint::new(vec![CMatrix::from_real(&[&[0.1, 0.3], &[0.0, 0.2]])]).unwrap();
        assert!(shift().eval_direct(&x).unwrap().max_abs_diff(x.coord(1)) < 1e-15);
    }

    #[test]
    fn mobius_value_and_neumann() {
        let r = mobius(0.5);
        let x = GradedPoint::scalar(&[c(0.3)]).unwrap();
        let v = r.eval_direct(&x).unwrap().get(0, 0);
        assert!((v - c(0.8 / 1.15)).norm() < 1e-14);
        let ne = r.eval_neumann(&x, 1e-8).unwrap();
        assert_eq!(ne.k, 14);
        assert!((ne.value.get(0, 0) - v).norm() <= ne.bound);
        assert!(ne.bound <= 1e-8);
    }

    #[test]
    fn neumann_order_monotone() {
        let mut last = usize::MAX;
        for tol in [1e-12, 1e-10, 1e-8, 1e-4, 1e-1] {
            let (k, _) = neumann_order(0.7, tol).unwrap();
            assert!(k <= last);
            last = k;
        }
        assert_eq!(neumann_order(0.3, 1e-8).unwrap().0, 14);
    }

    #[test]
    fn finite_series_is_exact() {
        let x = GradedPoint::scalar(&[c(0.9)]).unwrap();
        let ne = shift().eval_neumann(&x, 1e-12).unwrap();
        assert_eq!((ne.k, ne.bound), (0, 0.0));
        assert_eq!(ne.value, shift().eval_direct(&x).unwrap());
    }

    #[test]
    fn outside_rejected() {
        let x = GradedPoint::scalar(&[c(1.0)]).unwrap();
        assert!(matches!(shift().eval_direct(&x), Err(Error::OutsideDomain { .. })));
        assert!(matches!(mobius(0.5).eval_neumann(&x, 1e-8), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn shape_and_isometry_validated() {
        assert!(Realization::new(x_delta(), 1, 1, 1, CMatrix::identity(3)).is_err());
        assert!(Realization::new(x_delta(), 1, 1, 1, CMatrix::identity(2).scale_re(2.0)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let r = mobius(0.5);
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"dimK1\"") && text.contains("\"J1\""));
        let back: Realization = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        let broken = text.replace("\"mult\":1", "\"mult\":2");
        assert!(serde_json::from_str::<Realization>(&broken).is_err());
    }

    #[test]
    fn padding_plan_cases() {
        let dims = |k1, k2, mult| ModelDims { h: 1, k1, k2, mult };
        assert_eq!(padding_plan(1, 1, &dims(1, 1, 1), 8).unwrap(), (1, 1));
        assert_eq!(padding_plan(2, 1, &dims(1, 1, 1), 8).unwrap(), (2, 1));
        assert_eq!(padding_plan(1, 1, &dims(3, 1, 1), 8).unwrap(), (2, 2));
        assert_eq!(padding_plan(1, 2, &dims(2, 1, 2), 8).unwrap(), (2, 2));
        assert!(matches!(padding_plan(1, 1, &dims(20, 1, 1), 8), Err(Error::RankOverflow { .. })));
    }

    #[test]
    fn pad_internal_reindexes() {
        let u = CMatrix::from_fn(4, 1, |r, _| c(r as f64 + 1.0));
        // n = 2, J = 1, M = 2 → J' = 2, M' = 3
        let p = pad_internal(&u, 2, (1, 2), (2, 3));
        assert_eq!(p.rows(), 12);
        assert_eq!(p.get(0, 0), c(1.0));
        assert_eq!(p.get(1, 0), c(2.0));
        assert_eq!(p.get(2, 0), c(0.0));
        assert_eq!(p.get(6, 0), c(3.0));
        assert_eq!(p.get(7, 0), c(4.0));
    }
}
