//! Inversion certificates and singularity scans.
//!
//! For `T = φ(M)` invertible, let `p = q/q(0)` with `q` the characteristic
//! polynomial of `T`, so `p(T) = 0` and `p(0) = 1`. Writing
//! `1 − p(z) = c·z·Π(z − β_j)`, every `N` with `‖δ(N)‖ < 1` and
//! `‖2p(φ(N))‖ < 1` has `φ(N)⁻¹ = r(φ(N))(1 − p(φ(N)))⁻¹` with
//! `r(z) = c·Π(z − β_j)`, hence `‖φ(N)⁻¹‖ ≤ 2|c|Π(B + |β_j|)` whenever
//! `‖φ‖ ≤ B` on `G_δ`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{eval_expr, ExprAst};
use crate::freepoly::{GradedPoint, PolyMatrix};
use crate::func::NcFunction;
use crate::mat::{CMatrix, ONE, ZERO};
use crate::sample::Sampler;

/// `φ(M)` counts as singular when `σ_min ≤ INVERTIBLE_RATIO·σ_max`.
pub const INVERTIBLE_RATIO: f64 = 1e-10;

/// How the sup bound `B` of `‖φ‖` on `G_δ` was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundSource {
    /// Supplied by the caller; the certificate is rigorous if the claim is.
    Asserted { value: f64 },
    /// Maximum over random samples; the certificate is heuristic.
    Sampled { value: f64, samples: usize },
}

impl BoundSource {
    pub fn value(&self) -> f64 {
        match *self {
            BoundSource::Asserted { value } | BoundSource::Sampled { value, .. } => value,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, BoundSource::Asserted { .. })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InversionCertificate {
    /// Coefficients of `p`, constant term first.
    pub p_coeffs: Vec<Complex64>,
    /// Roots `β_j` of `(1 − p(z))/z`.
    pub roots: Vec<Complex64>,
    pub c: Complex64,
    pub bound_inv: f64,
    pub b: BoundSource,
    /// `‖p(φ(M))‖`.
    pub p_residual: f64,
    pub certified: bool,
}

/// `δ_p = δ ⊕ 2p(φ)`, evaluated through its norm.
pub struct AugmentedDelta<'a, F: ?Sized> {
    pub delta: &'a PolyMatrix,
    pub phi: &'a F,
    pub p_coeffs: Vec<Complex64>,
}

/// `Σ p_k T^k` by Horner's rule.
pub fn matrix_poly(p: &[Complex64], t: &CMatrix) -> CMatrix {
    let n = t.rows();
    let mut acc = CMatrix::zeros(n, n);
    for &coeff in p.iter().rev() {
        acc = &(&acc * t) + &CMatrix::identity(n).scale(coeff);
    }
    acc
}

impl<F: NcFunction + ?Sized> AugmentedDelta<'_, F> {
    /// `max(‖δ(x)‖, ‖2p(φ(x))‖)`, the norm of `δ_p(x)`.
    pub fn norm_at(&self, x: &GradedPoint) -> Result<f64> {
        let base = self.delta.norm_at(x)?;
        let phi_x = self.phi.eval(x)?;
        if !phi_x.is_square() {
            return Err(Error::ShapeMismatch("phi must be square-valued".into()));
        }
        Ok(base.max(2.0 * matrix_poly(&self.p_coeffs, &phi_x).op_norm()))
    }
}

/// Ascending coefficients of `Π(z − λ_i)`.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![ONE];
    for &lambda in roots {
        let mut next = vec![ZERO; coeffs.len() + 1];
        for (k, &a) in coeffs.iter().enumerate() {
            next[k + 1] += a;
            next[k] -= lambda * a;
        }
        coeffs = next;
    }
    coeffs
}

/// Roots of `Σ a_k z^k` (ascending, nonzero leading coefficient) as
/// eigenvalues of the companion matrix.
pub fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let m = coeffs.len().saturating_sub(1);
    if m == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[m];
    if lead.norm() == 0.0 {
        return Err(Error::RootFindingFailure("leading coefficient vanishes".into()));
    }
    let companion = CMatrix::from_fn(m, m, |i, j| {
        if j == m - 1 {
            -coeffs[i] / lead
        } else if i == j + 1 {
            ONE
        } else {
            ZERO
        }
    });
    if !companion.is_finite() {
        return Err(Error::RootFindingFailure("companion matrix is not finite".into()));
    }
    let roots = companion.eigenvalues()?;
    if roots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::RootFindingFailure("non-finite root".into()));
    }
    Ok(roots)
}

/// Builds the certificate for `φ` around `M`, where `phi_m = φ(M)`.
pub fn inversion_certificate<'a, F: NcFunction + ?Sized>(
    phi: &'a F,
    delta: &'a PolyMatrix,
    phi_m: &CMatrix,
    b: BoundSource,
) -> Result<(AugmentedDelta<'a, F>, InversionCertificate)> {
    if !phi_m.is_square() || phi_m.rows() == 0 {
        return Err(Error::ShapeMismatch(format!("phi(M) is {:?}", phi_m.shape())));
    }
    let ratio = phi_m.inverse_condition();
    if ratio <= INVERTIBLE_RATIO {
        return Err(Error::NotInvertible { ratio });
    }
    let q = poly_from_roots(&phi_m.eigenvalues()?);
    let q0 = q[0];
    let mut p: Vec<Complex64> = q.iter().map(|&a| a / q0).collect();
    p[0] = ONE;
    let r_coeffs: Vec<Complex64> = p[1..].iter().map(|&a| -a).collect();
    let c = -*p.last().expect("degree ≥ 1");
    let roots = poly_roots(&r_coeffs)?;
    let bound_inv = 2.0 * c.norm() * roots.iter().map(|beta| b.value() + beta.norm()).product::<f64>();
    if !bound_inv.is_finite() {
        return Err(Error::RootFindingFailure("bound overflowed".into()));
    }
    let p_residual = matrix_poly(&p, phi_m).op_norm();
    let cert =
        InversionCertificate { p_coeffs: p.clone(), roots, c, bound_inv, b, p_residual, certified: b.is_certified() };
    Ok((AugmentedDelta { delta, phi, p_coeffs: p }, cert))
}

/// `max ‖φ(x)‖` over `count` random points of `G_δ` grown from `centers`.
pub fn estimate_bound<F: NcFunction + ?Sized>(
    phi: &F,
    delta: &PolyMatrix,
    centers: &[GradedPoint],
    count: usize,
    sampler: &mut Sampler,
) -> Result<BoundSource> {
    let mut value = 0.0f64;
    for i in 0..count {
        let x = sampler.point_inside(delta, &centers[i % centers.len()], 1e-9)?;
        value = value.max(phi.eval(&x)?.op_norm());
    }
    Ok(BoundSource::Sampled { value, samples: count })
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateCheck {
    pub samples: usize,
    pub violations: usize,
    /// Largest `‖φ(N)⁻¹‖` seen.
    pub max_inverse_norm: f64,
}

/// Samples points of the `δ_p` domain grown from `centers` (which must lie
/// in it, for instance `M` itself) and counts violations of
/// `‖φ(N)⁻¹‖ ≤ bound_inv + slack`.
pub fn check_certificate<F: NcFunction + ?Sized>(
    aug: &AugmentedDelta<'_, F>,
    bound_inv: f64,
    centers: &[GradedPoint],
    count: usize,
    slack: f64,
    sampler: &mut Sampler,
) -> Result<CertificateCheck> {
    let mut check = CertificateCheck { samples: 0, violations: 0, max_inverse_norm: 0.0 };
    for i in 0..count {
        let x = sampler.point_inside_by(|y| aug.norm_at(y), &centers[i % centers.len()], 1e-9)?;
        let inv_norm = match aug.phi.eval(&x)?.inv() {
            Ok(inv) => inv.matrix.op_norm(),
            Err(_) => f64::INFINITY,
        };
        check.samples += 1;
        check.max_inverse_norm = check.max_inverse_norm.max(inv_norm);
        if inv_norm > bound_inv + slack {
            check.violations += 1;
        }
    }
    Ok(check)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ScanVerdict {
    Value { norm: f64 },
    Singular { path: String },
    Error { message: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub verdicts: Vec<ScanVerdict>,
    pub total: usize,
    pub singular: usize,
    pub errors: usize,
    pub max_norm: f64,
}

impl ScanReport {
    pub fn flagged(&self) -> Vec<usize> {
        self.verdicts
            .iter()
            .enumerate()
            .filter(|(_, v)| matches!(v, ScanVerdict::Singular { .. }))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Evaluates `ast` at every sample, recording the first singular inversion.
/// The flagged set depends on how the expression is written.
pub fn singular_scan(ast: &ExprAst, samples: &[GradedPoint]) -> ScanReport {
    let verdicts: Vec<ScanVerdict> = samples
        .iter()
        .map(|x| match eval_expr(ast, x) {
            Ok(v) => ScanVerdict::Value { norm: v.op_norm() },
            Err(Error::SingularityHit { path }) => ScanVerdict::Singular { path },
            Err(e) => ScanVerdict::Error { message: e.to_string() },
        })
        .collect();
    let singular = verdicts.iter().filter(|v| matches!(v, ScanVerdict::Singular { .. })).count();
    let errors = verdicts.iter().filter(|v| matches!(v, ScanVerdict::Error { .. })).count();
    let max_norm = verdicts
        .iter()
        .filter_map(|v| if let ScanVerdict::Value { norm } = v { Some(*norm) } else { None })
        .fold(0.0, f64::max);
    ScanReport { total: verdicts.len(), verdicts, singular, errors, max_norm }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::freepoly::FreePoly;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn roots_and_coefficients() {
        let roots = [c(1.0), c(-2.0), Complex64::new(0.0, 3.0)];
        let q = poly_from_roots(&roots);
        assert_eq!(q.len(), 4);
        assert_eq!(q[3], ONE);
        let mut found = poly_roots(&q).unwrap();
        found.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let mut expected = roots.to_vec();
        expected.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        for (f, e) in found.iter().zip(&expected) {
            assert!((f - e).norm() < 1e-10);
        }
        assert!(poly_roots(&[c(1.0)]).unwrap().is_empty());
    }

    #[test]
    fn scalar_identity_certificate() {
        let phi = FreePoly::var(1, 1);
        let delta = PolyMatrix::from_poly(phi.scale(c(0.5)));
        let m = GradedPoint::scalar(&[c(1.0)]).unwrap();
        let (aug, cert) =
            inversion_certificate(&phi, &delta, &phi.eval(&m).unwrap(), BoundSource::Asserted { value: 2.0 }).unwrap();
        assert_eq!(cert.p_coeffs, vec![c(1.0), c(-1.0)]);
        assert!(cert.roots.is_empty());
        assert_eq!(cert.c, c(1.0));
        assert_eq!(cert.bound_inv, 2.0);
        assert!(cert.certified);
        assert_eq!(cert.p_residual, 0.0);
        // ‖2(1 − N)‖ < 1 at N = 0.8
        let n = GradedPoint::scalar(&[c(0.8)]).unwrap();
        assert!((aug.norm_at(&n).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn constant_function_degree_matches_level() {
        let phi = FreePoly::constant(1, c(2.0));
        let delta = PolyMatrix::from_poly(FreePoly::var(1, 1).scale(c(0.5)));
        let m = GradedPoint::scalar_at_level(&[c(0.3)], 2).unwrap();
        let (_, cert) =
            inversion_certificate(&phi, &delta, &phi.eval(&m).unwrap(), BoundSource::Asserted { value: 2.0 }).unwrap();
        assert_eq!(cert.p_coeffs.len(), 3);
        assert!((cert.c - c(-0.25)).norm() < 1e-12);
        assert!((cert.bound_inv - 3.0).abs() < 1e-10);
    }

    #[test]
    fn singular_value_rejected() {
        let phi = FreePoly::var(1, 1);
        let delta = PolyMatrix::from_poly(phi.clone());
        let m = GradedPoint::new(vec![CMatrix::from_real(&[&[0.0, 1.0], &[0.0, 0.0]])]).unwrap();
        let res = inversion_certificate(&phi, &delta, &phi.eval(&m).unwrap(), BoundSource::Asserted { value: 1.0 });
        assert!(matches!(res, Err(Error::NotInvertible { .. })));
    }

    #[test]
    fn scan_flags_zero_only() {
        let ast = Expr::parse("inv(x1)", 1).unwrap().ast;
        let samples: Vec<GradedPoint> =
            [0.5, 0.0, -1.0].iter().map(|&v| GradedPoint::scalar(&[c(v)]).unwrap()).collect();
        let rep = singular_scan(&ast, &samples);
        assert_eq!(rep.flagged(), vec![1]);
        assert_eq!((rep.total, rep.singular, rep.errors), (3, 1, 0));
        assert_eq!(rep.max_norm, 2.0);
    }
}
