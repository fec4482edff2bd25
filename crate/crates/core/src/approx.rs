//! Certified polynomial approximation of realized functions.
//!
//! On `K_{tδ} = {x : ‖δ(x)‖ ≤ 1/t}` the k-th Neumann term of a realization
//! has norm at most `t^{-(k+1)}`, so truncating after `K` terms costs at most
//! `(1/t)^{K+2} / (1 − 1/t)`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::freepoly::{GradedPoint, MatPoly, PolyMatrix, Word};
use crate::mat::CMatrix;
use crate::ncpoint::point_direct_sum;
use crate::realize::Realization;

pub const DEFAULT_TERM_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cover {
    /// Zero-based index into the candidate list.
    pub index: usize,
    /// `max_{x∈E} ‖δ_index(x)‖`.
    pub r: f64,
    /// Slack factor, the midpoint of `(1, 1/r)`.
    pub t: f64,
}

/// Picks the first candidate minimizing `max_{x∈E} ‖δ_j(x)‖` and returns it
/// with `t = (1 + 1/r)/2`. Fails with `NoCover` unless that minimum is `< 1`.
pub fn select_covering_delta(sample_e: &[GradedPoint], candidates: &[PolyMatrix]) -> Result<Cover> {
    let mut best: Option<(usize, f64)> = None;
    for (j, delta) in candidates.iter().enumerate() {
        let mut r = 0.0f64;
        for x in sample_e {
            r = r.max(delta.norm_at(x)?);
        }
        if best.is_none_or(|(_, b)| r < b) {
            best = Some((j, r));
        }
    }
    match best {
        Some((index, r)) if r < 1.0 => {
            let t = if r == 0.0 { f64::INFINITY } else { 0.5 * (1.0 + 1.0 / r) };
            Ok(Cover { index, r, t })
        }
        Some((_, r)) => Err(Error::NoCover { best: r }),
        None => Err(Error::NoCover { best: f64::INFINITY }),
    }
}

/// Adds every pairwise direct sum `x ⊕ y` of the samples whose level stays
/// within `level_cap`, repeating until nothing new fits.
///
/// A single `δ` satisfies `‖δ(x ⊕ y)‖ = max(‖δ(x)‖, ‖δ(y)‖)`, so closing `E`
/// never changes the covering radius of a candidate; the closure matters
/// when comparing `E` against a union of domains.
pub fn direct_sum_closure(sample_e: &[GradedPoint], level_cap: usize) -> Result<Vec<GradedPoint>> {
    let mut out: Vec<GradedPoint> = sample_e.to_vec();
    let mut frontier_start = 0;
    loop {
        let len = out.len();
        let mut added = Vec::new();
        for i in 0..len {
            for j in frontier_start.max(i)..len {
                if out[i].n() + out[j].n() <= level_cap {
                    added.push(point_direct_sum(&out[i], &out[j])?);
                }
            }
        }
        if added.is_empty() {
            return Ok(out);
        }
        frontier_start = len;
        out.extend(added);
    }
}

/// Whether `x` lies in the hull of `E` relative to `dict`: `‖δ(x)‖ ≤ 1` for
/// every dictionary element with `E ⊆ K_δ`.
pub fn hull_dict(x: &GradedPoint, sample_e: &[GradedPoint], dict: &[PolyMatrix], tol: f64) -> Result<bool> {
    for delta in dict {
        let mut contains_e = true;
        for y in sample_e {
            if delta.norm_at(y)? > 1.0 + tol {
                contains_e = false;
                break;
            }
        }
        if contains_e && delta.norm_at(x)? > 1.0 + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `(1/t)^{K+2} / (1 − 1/t)`.
pub fn certify_error(k: usize, t: f64) -> f64 {
    assert!(t > 1.0, "certify_error needs t > 1");
    let s = 1.0 / t;
    s.powi(k as i32 + 2) / (1.0 - s)
}

/// Smallest `K` with `certify_error(K, t) ≤ tol`.
pub fn order_for_tolerance(t: f64, tol: f64) -> Result<usize> {
    crate::realize::neumann_order(1.0 / t, tol).map(|(k, _)| k)
}

/// Coefficient matrices of `δ ⊗ I_M` per word: `Δ_w = (δ coefficients at w) ⊗ I_M`
/// in the internal `j·M + m` layout.
fn lifted_coefficients(delta: &PolyMatrix, mult: usize) -> BTreeMap<Word, CMatrix> {
    let mut out: BTreeMap<Word, CMatrix> = BTreeMap::new();
    let (rows, cols) = (delta.rows(), delta.cols());
    for i in 0..rows {
        for j in 0..cols {
            for (w, &coeff) in delta.entry(i, j).terms() {
                let m = out.entry(w.clone()).or_insert_with(|| CMatrix::zeros(rows, cols));
                *m =
                    &*m + &CMatrix::from_fn(rows, cols, |a, b| if (a, b) == (i, j) { coeff } else { crate::mat::ZERO });
            }
        }
    }
    out.into_iter().map(|(w, m)| (w, m.kron(&CMatrix::identity(mult)))).collect()
}

/// The Neumann partial sum `A + Σ_{k≤K} B Δ (D Δ)^k C` as a polynomial with
/// `K2×K1` coefficient matrices.
pub fn expand_polynomial(r: &Realization, k_max: usize, term_cap: usize) -> Result<MatPoly> {
    let d = r.delta().d();
    let coeffs = lifted_coefficients(r.delta(), r.mult());
    let (b, c, dm) = (r.b(), r.c(), r.d_block());
    let mut out = MatPoly::zero(d, r.k2(), r.k1());
    out.add_term(Word::empty(), &r.a())?;

    let mut state: BTreeMap<Word, CMatrix> = coeffs.iter().map(|(w, dw)| (w.clone(), dw * &c)).collect();
    for k in 0..=k_max {
        for (w, s) in &state {
            out.add_term(w.clone(), &(&b * s))?;
        }
        if out.num_terms() > term_cap || state.len() > term_cap {
            return Err(Error::TermBlowup { cap: term_cap });
        }
        if k == k_max {
            break;
        }
        let mut next: BTreeMap<Word, CMatrix> = BTreeMap::new();
        for (w_left, dw) in &coeffs {
            let left = dw * &dm;
            for (w, s) in &state {
                let key = w_left.concat(w);
                let term = &left * s;
                match next.get_mut(&key) {
                    Some(acc) => *acc = &*acc + &term,
                    None => {
                        next.insert(key, term);
                    }
                }
                if next.len() > term_cap {
                    return Err(Error::TermBlowup { cap: term_cap });
                }
            }
        }
        next.retain(|_, m| m.max_abs_diff(&CMatrix::zeros(m.rows(), m.cols())) >= 1e-15);
        state = next;
    }
    out.normalize();
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct Approximation {
    pub polynomial: MatPoly,
    pub k: usize,
    pub t: f64,
    pub bound: f64,
}

/// Expansion order chosen so that the certified error on `K_{tδ}` is at most `tol`.
pub fn approximate(r: &Realization, t: f64, tol: f64, term_cap: usize) -> Result<Approximation> {
    let k = order_for_tolerance(t, tol)?;
    let polynomial = expand_polynomial(r, k, term_cap)?;
    Ok(Approximation { polynomial, k, t, bound: certify_error(k, t) })
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

    #[test]
    fn cover_examples() {
        let ball = PolyMatrix::ball(&[c(0.0)], 1.0);
        let e: Vec<GradedPoint> = [0.5, 0.2].iter().map(|&v| GradedPoint::scalar(&[c(v)]).unwrap()).collect();
        let cover = select_covering_delta(&e, std::slice::from_ref(&ball)).unwrap();
        assert_eq!(cover, Cover { index: 0, r: 0.5, t: 1.5 });

        let small = PolyMatrix::ball(&[c(0.0)], 0.3);
        assert_eq!(select_covering_delta(&e, &[small.clone(), ball.clone()]).unwrap().index, 1);
        assert_eq!(select_covering_delta(&e, &[ball.clone(), ball]).unwrap().index, 0);
        assert!(matches!(select_covering_delta(&e, &[small]), Err(Error::NoCover { .. })));
    }

    #[test]
    fn direct_sum_defeats_each_candidate() {
        let left = PolyMatrix::ball(&[c(-0.8)], 1.0);
        let right = PolyMatrix::ball(&[c(0.8)], 1.0);
        let a = GradedPoint::scalar(&[c(-1.2)]).unwrap();
        let b = GradedPoint::scalar(&[c(1.2)]).unwrap();
        assert!(select_covering_delta(std::slice::from_ref(&a), &[left.clone(), right.clone()]).is_ok());
        assert!(select_covering_delta(std::slice::from_ref(&b), &[left.clone(), right.clone()]).is_ok());
        let e = direct_sum_closure(&[a, b], 2).unwrap();
        assert_eq!(e.len(), 5);
        assert!(matches!(select_covering_delta(&e, &[left, right]), Err(Error::NoCover { .. })));
    }

    #[test]
    fn closure_respects_cap() {
        let a = GradedPoint::scalar(&[c(0.1)]).unwrap();
        let e = direct_sum_closure(&[a], 4).unwrap();
        let mut levels: Vec<usize> = e.iter().map(GradedPoint::n).collect();
        levels.sort();
        assert_eq!(levels, vec![1, 2, 3, 4, 4]);
    }

    #[test]
    fn certify_examples() {
        assert!((certify_error(10, 2.0) - 2f64.powi(-11)).abs() < 1e-18);
        assert!(certify_error(3, 1e6) < certify_error(3, 10.0));
        assert_eq!(order_for_tolerance(2.0, 2f64.powi(-11)).unwrap(), 10);
    }

    #[test]
    fn shift_expands_to_x() {
        let shift = Realization::new(x_delta(), 1, 1, 1, CMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        for k in [0, 3, 7] {
            let p = expand_polynomial(&shift, k, DEFAULT_TERM_CAP).unwrap();
            assert_eq!(p.to_scalar().unwrap(), FreePoly::var(1, 1));
        }
    }

    #[test]
    fn mobius_taylor_coefficients() {
        let a = 0.5f64;
        let s = (1.0 - a * a).sqrt();
        let r = Realization::new(x_delta(), 1, 1, 1, CMatrix::from_real(&[&[a, s], &[s, -a]])).unwrap();
        let p = expand_polynomial(&r, 2, DEFAULT_TERM_CAP).unwrap().to_scalar().unwrap();
        // (a + x)/(1 + a x) = a + (1 − a²)(x − a x² + a² x³ − …)
        let expected = [a, 1.0 - a * a, -(1.0 - a * a) * a, (1.0 - a * a) * a * a];
        for (deg, e) in expected.iter().enumerate() {
            let got = p.coeff(&Word::new(vec![1; deg]));
            assert!((got - c(*e)).norm() < 1e-14, "degree {deg}: {got}");
        }
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn zero_b_gives_constant() {
        let r = Realization::new(x_delta(), 1, 1, 1, CMatrix::identity(2)).unwrap();
        let p = expand_polynomial(&r, 0, DEFAULT_TERM_CAP).unwrap();
        assert_eq!(p.to_scalar().unwrap(), FreePoly::one(1));
    }

    #[test]
    fn blowup_is_reported() {
        let (h, t) = (0.5f64.sqrt(), (1.0f64 / 3.0).sqrt());
        let j1 = CMatrix::from_real(&[&[0.0, 0.0], &[h, t], &[-h, t], &[0.0, t]]);
        let r = Realization::new(PolyMatrix::row_ball(3), 1, 1, 1, j1).unwrap();
        assert!(matches!(expand_polynomial(&r, 6, 10), Err(Error::TermBlowup { cap: 10 })));
        assert!(expand_polynomial(&r, 1, 10).is_ok());
    }
}
