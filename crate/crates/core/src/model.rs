//! δ-models stored as samples: `Ψ(y)*Ψ(x) − Φ(y)*Φ(x) = u(y)*[I − δ(y)*δ(x)]u(x)`.
//!
//! # Internal layout
//!
//! The model space at level n is `C^n ⊗ C^J ⊗ C^M` (point level, δ column,
//! multiplicity), flattened as `a·(J·M) + j·M + m`. The lifted `Δ(x)` maps
//! `C^n ⊗ C^J ⊗ C^M` to `C^n ⊗ C^I ⊗ C^M` with entries
//! `Δ[(a,i,m), (b,j,m')] = δ_ij(x)[a,b]·[m = m']`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freepoly::{GradedPoint, PolyMatrix};
use crate::mat::CMatrix;
use crate::ncpoint::{in_gdelta, Membership, DEFAULT_MARGIN};
use crate::realize::Realization;

/// `δ(x) ⊗ I_M` in the internal layout.
pub fn lift_delta(delta: &PolyMatrix, x: &GradedPoint, mult: usize) -> Result<CMatrix> {
    let blocks = delta.eval(x)?;
    let (n, i_dim, j_dim) = (x.n(), delta.rows(), delta.cols());
    let (row_stride, col_stride) = (i_dim * mult, j_dim * mult);
    Ok(CMatrix::from_fn(n * row_stride, n * col_stride, |r, c| {
        let (a, i, m) = (r / row_stride, (r % row_stride) / mult, r % mult);
        let (b, j, m2) = (c / col_stride, (c % col_stride) / mult, c % mult);
        if m == m2 {
            blocks.get(i * n + a, j * n + b)
        } else {
            crate::mat::ZERO
        }
    }))
}

/// Sizes shared by every sample of a [`ModelSampleSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ModelDims {
    pub h: usize,
    pub k1: usize,
    pub k2: usize,
    pub mult: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSampleSet {
    pub delta: PolyMatrix,
    pub points: Vec<GradedPoint>,
    pub psi: Vec<CMatrix>,
    pub phi: Vec<CMatrix>,
    pub u: Vec<CMatrix>,
}

fn per_level(m: &CMatrix, n: usize, what: &str, idx: usize) -> Result<(usize, usize)> {
    if !m.rows().is_multiple_of(n) || !m.cols().is_multiple_of(n) {
        return Err(Error::ShapeMismatch(format!("{what}[{idx}] is {:?}, not graded at level {n}", m.shape())));
    }
    Ok((m.rows() / n, m.cols() / n))
}

impl ModelSampleSet {
    /// Checks shapes and that every point lies inside `G_δ`.
    pub fn validate(&self) -> Result<ModelDims> {
        let dims = self.dims()?;
        for x in &self.points {
            if !matches!(in_gdelta(&self.delta, x, DEFAULT_MARGIN)?, Membership::Inside(_)) {
                return Err(Error::OutsideDomain { norm: self.delta.norm_at(x)? });
            }
        }
        Ok(dims)
    }

    /// Shape checks only.
    pub fn dims(&self) -> Result<ModelDims> {
        let count = self.points.len();
        if count == 0 {
            return Err(Error::ShapeMismatch("model needs at least one point".into()));
        }
        if self.psi.len() != count || self.phi.len() != count || self.u.len() != count {
            return Err(Error::ShapeMismatch(format!(
                "{count} points but {} psi, {} phi, {} u values",
                self.psi.len(),
                self.phi.len(),
                self.u.len()
            )));
        }
        let j_dim = self.delta.cols();
        let mut dims: Option<ModelDims> = None;
        for idx in 0..count {
            let x = &self.points[idx];
            if x.d() != self.delta.d() {
                return Err(Error::ShapeMismatch(format!(
                    "point {idx} has d = {}, delta has {}",
                    x.d(),
                    self.delta.d()
                )));
            }
            let n = x.n();
            let (k1, h) = per_level(&self.psi[idx], n, "psi", idx)?;
            let (k2, h2) = per_level(&self.phi[idx], n, "phi", idx)?;
            let (ju, h3) = per_level(&self.u[idx], n, "u", idx)?;
            if h2 != h || h3 != h {
                return Err(Error::ShapeMismatch(format!("sample {idx}: psi, phi and u disagree on H")));
            }
            let mult = if j_dim == 0 {
                0
            } else if ju % j_dim == 0 {
                ju / j_dim
            } else {
                return Err(Error::ShapeMismatch(format!("u[{idx}] rows are not a multiple of n·J")));
            };
            if j_dim == 0 && ju != 0 {
                return Err(Error::ShapeMismatch("delta has no columns but u is nonempty".into()));
            }
            let here = ModelDims { h, k1, k2, mult };
            match dims {
                None => dims = Some(here),
                Some(prev) if prev != here => {
                    return Err(Error::ShapeMismatch(format!("sample {idx} has dims {here:?}, expected {prev:?}")))
                }
                _ => {}
            }
        }
        Ok(dims.expect("count > 0"))
    }
}

/// Max over same-level pairs of
/// `‖Ψ(y)*Ψ(x) − Φ(y)*Φ(x) − u(y)*[I − Δ(y)*Δ(x)]u(x)‖`.
pub fn model_residual(s: &ModelSampleSet) -> Result<f64> {
    let dims = s.dims()?;
    let lifted: Vec<CMatrix> = s.points.iter().map(|x| lift_delta(&s.delta, x, dims.mult)).collect::<Result<_>>()?;
    let du: Vec<CMatrix> = lifted.iter().zip(&s.u).map(|(l, u)| l * u).collect();
    let mut worst = 0.0f64;
    for x in 0..s.points.len() {
        for y in 0..=x {
            if s.points[x].n() != s.points[y].n() {
                continue;
            }
            let lhs = &(&s.psi[y].adjoint() * &s.psi[x]) - &(&s.phi[y].adjoint() * &s.phi[x]);
            let rhs = &(&s.u[y].adjoint() * &s.u[x]) - &(&du[y].adjoint() * &du[x]);
            worst = worst.max((&lhs - &rhs).op_norm());
        }
    }
    Ok(worst)
}

/// Model samples of a realization: `u(x) = (I − (I⊗D)Δ(x))⁻¹ (I⊗C) Ψ(x)` and
/// `Φ(x) = Ω(x)Ψ(x)`, using the realization's own δ.
pub fn model_from_realization(r: &Realization, points: &[GradedPoint], psi: &[CMatrix]) -> Result<ModelSampleSet> {
    if points.len() != psi.len() {
        return Err(Error::ShapeMismatch(format!("{} points but {} psi values", points.len(), psi.len())));
    }
    let mut phi = Vec::with_capacity(points.len());
    let mut u = Vec::with_capacity(points.len());
    for (x, p) in points.iter().zip(psi) {
        let parts = r.resolve(x)?;
        if p.rows() != parts.c_lift.cols() {
            return Err(Error::ShapeMismatch(format!(
                "psi has {} rows, realization expects {}",
                p.rows(),
                parts.c_lift.cols()
            )));
        }
        u.push(&parts.v * p);
        phi.push(&parts.omega * p);
    }
    Ok(ModelSampleSet { delta: r.delta().clone(), points: points.to_vec(), psi: psi.to_vec(), phi, u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freepoly::FreePoly;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn x_delta() -> PolyMatrix {
        PolyMatrix::from_poly(FreePoly::var(1, 1))
    }

    fn identity_model(points: Vec<GradedPoint>) -> ModelSampleSet {
        let psi: Vec<CMatrix> = points.iter().map(|x| CMatrix::identity(x.n())).collect();
        let phi: Vec<CMatrix> = points.iter().map(|x| x.coord(1).clone()).collect();
        ModelSampleSet { delta: x_delta(), u: psi.clone(), psi, phi, points }
    }

    fn sample_points() -> Vec<GradedPoint> {
        vec![
            GradedPoint::scalar(&[c(0.2, 0.0)]).unwrap(),
            GradedPoint::scalar(&[c(0.0, 0.5)]).unwrap(),
            GradedPoint::new(vec![CMatrix::from_real(&[&[0.1, 0.3], &[0.0, 0.2]])]).unwrap(),
            GradedPoint::new(vec![CMatrix::from_real(&[&[-0.4, 0.1], &[0.2, 0.3]])]).unwrap(),
        ]
    }

    #[test]
    fn lift_layout() {
        let delta = PolyMatrix::ball(&[c(0.0, 0.0), c(0.0, 0.0)], 1.0);
        let x = GradedPoint::new(vec![
            CMatrix::from_real(&[&[1.0, 2.0], &[3.0, 4.0]]),
            CMatrix::from_real(&[&[5.0, 6.0], &[7.0, 8.0]]),
        ])
        .unwrap();
        let l = lift_delta(&delta, &x, 2).unwrap();
        // rows a·(I·M) + i·M + m with I = 2, M = 2; columns b·M + m with J = 1
        assert_eq!(l.shape(), (8, 4));
        assert_eq!(l.get(0, 0), c(1.0, 0.0));
        assert_eq!(l.get(1, 1), c(1.0, 0.0));
        assert_eq!(l.get(2, 0), c(5.0, 0.0));
        assert_eq!(l.get(2, 2), c(6.0, 0.0));
        assert_eq!(l.get(4, 0), c(3.0, 0.0));
        assert_eq!(l.get(6, 0), c(7.0, 0.0));
        assert_eq!(l.get(6, 2), c(8.0, 0.0));
        assert_eq!(l.get(7, 3), c(8.0, 0.0));
        assert_eq!(l.get(0, 1), c(0.0, 0.0));
        assert!((l.op_norm() - delta.norm_at(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn identity_model_has_zero_residual() {
        let s = identity_model(sample_points());
        assert_eq!(s.validate().unwrap(), ModelDims { h: 1, k1: 1, k2: 1, mult: 1 });
        assert!(model_residual(&s).unwrap() < 1e-15);
    }

    #[test]
    fn perturbation_is_detected() {
        let mut s = identity_model(sample_points());
        s.u[0] = &s.u[0] + &CMatrix::scalar(c(0.1, 0.0));
        assert!(model_residual(&s).unwrap() >= 0.01);
    }

    #[test]
    fn shape_errors() {
        let mut s = identity_model(sample_points());
        s.phi.pop();
        assert!(matches!(s.dims(), Err(Error::ShapeMismatch(_))));
        let mut s = identity_model(sample_points());
        s.points[0] = GradedPoint::scalar(&[c(1.5, 0.0)]).unwrap();
        assert!(matches!(s.validate(), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn json_round_trip() {
        let s = identity_model(sample_points());
        let text = serde_json::to_string(&s).unwrap();
        let back: ModelSampleSet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
