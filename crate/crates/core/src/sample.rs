//! Seeded random generators for matrices, points and polynomials.
//!
//! Every generator draws from one `ChaCha8Rng`, so a seed fixes the whole
//! stream.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::freepoly::{FreePoly, GradedPoint, PolyMatrix, Word};
use crate::mat::CMatrix;

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn range(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        self.rng.random_range(lo..=hi_inclusive)
    }

    /// Standard complex Gaussian: real and imaginary parts are N(0, 1/2).
    pub fn complex_normal(&mut self) -> Complex64 {
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    pub fn gaussian(&mut self, rows: usize, cols: usize) -> CMatrix {
        let data = (0..rows * cols).map(|_| self.complex_normal()).collect();
        CMatrix::new(rows, cols, data).expect("finite samples")
    }

    /// A Gaussian matrix rescaled to operator norm `norm`.
    pub fn matrix_with_norm(&mut self, rows: usize, cols: usize, norm: f64) -> CMatrix {
        let g = self.gaussian(rows, cols);
        let s = g.op_norm();
        if s == 0.0 {
            g
        } else {
            g.scale_re(norm / s)
        }
    }

    /// Haar-distributed unitary: QR of a Gaussian matrix with the phases of
    /// `R`'s diagonal moved into `Q`.
    pub fn haar_unitary(&mut self, n: usize) -> CMatrix {
        let qr = self.gaussian(n, n).into_dmatrix().qr();
        let (mut q, r) = (qr.q(), qr.r());
        for j in 0..n {
            let rjj = r[(j, j)];
            let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { Complex64::new(1.0, 0.0) };
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
        CMatrix::from_dmatrix(q)
    }

    /// The first `cols` columns of a Haar unitary.
    pub fn isometry(&mut self, rows: usize, cols: usize) -> Result<CMatrix> {
        if cols > rows {
            return Err(Error::DimensionTooSmall { rows, cols });
        }
        Ok(self.haar_unitary(rows).columns(0, cols))
    }

    /// Invertible matrix with condition number at most `max_cond`: `U Σ V*`
    /// with Haar `U, V` and singular values log-uniform in `[1, max_cond]`.
    pub fn invertible(&mut self, n: usize, max_cond: f64) -> CMatrix {
        let u = self.haar_unitary(n);
        let v = self.haar_unitary(n);
        let sigmas: Vec<Complex64> =
            (0..n).map(|_| Complex64::new(max_cond.max(1.0).powf(self.uniform()), 0.0)).collect();
        &(&u * &CMatrix::diag(&sigmas)) * &v.adjoint()
    }

    /// A d-tuple of Gaussian `n×n` matrices, each rescaled to norm `radius`.
    pub fn point(&mut self, d: usize, n: usize, radius: f64) -> GradedPoint {
        GradedPoint::new((0..d).map(|_| self.matrix_with_norm(n, n, radius)).collect()).expect("d ≥ 1")
    }

    pub fn scalar_point(&mut self, d: usize, radius: f64) -> GradedPoint {
        self.point(d, 1, radius)
    }

    /// Random point of `G_δ`: walk from `center` (which must be inside) along
    /// a random direction, locate the boundary crossing by bisection, and
    /// return a uniformly scaled point of that segment. Retries up to 64
    /// directions if the segment leaves and re-enters the domain.
    pub fn point_inside(&mut self, delta: &PolyMatrix, center: &GradedPoint, margin: f64) -> Result<GradedPoint> {
        self.point_inside_by(|x| delta.norm_at(x), center, margin)
    }

    /// [`Sampler::point_inside`] for any domain `{x : norm(x) < 1}`.
    pub fn point_inside_by(
        &mut self,
        norm: impl Fn(&GradedPoint) -> Result<f64>,
        center: &GradedPoint,
        margin: f64,
    ) -> Result<GradedPoint> {
        let c_norm = norm(center)?;
        if c_norm >= 1.0 - margin {
            return Err(Error::OutsideDomain { norm: c_norm });
        }
        let (d, n) = (center.d(), center.n());
        for _ in 0..64 {
            let dir = self.point(d, n, 1.0);
            let at = |t: f64| center.zip_with(&dir, |c, e| c + &e.scale_re(t)).expect("same shape");
            let inside = |t: f64| norm(&at(t)).map(|v| v < 1.0 - margin);

            let (mut lo, mut hi) = (0.0, 1.0);
            while inside(hi)? {
                lo = hi;
                hi *= 2.0;
                if hi > 1e6 {
                    break;
                }
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if inside(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let candidate = at(lo * self.uniform());
            if norm(&candidate)? < 1.0 - margin {
                return Ok(candidate);
            }
        }
        Err(Error::Internal("could not sample inside the domain".into()))
    }

    /// Random polynomial in `d` variables with up to `max_terms` words of
    /// degree at most `max_deg` and Gaussian coefficients.
    pub fn poly(&mut self, d: usize, max_deg: usize, max_terms: usize) -> FreePoly {
        let k = self.range(1, max_terms.max(1));
        let terms: Vec<(Word, Complex64)> = (0..k)
            .map(|_| {
                let len = self.range(0, max_deg);
                let w = Word::new((0..len).map(|_| self.range(1, d)).collect());
                (w, self.complex_normal())
            })
            .collect();
        FreePoly::from_terms(d, terms).expect("letters in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_and_isometry() {
        let mut s = Sampler::new(7);
        for n in 1..6 {
            assert!(s.haar_unitary(n).isometry_defect() < 1e-12);
        }
        let v = s.isometry(5, 3).unwrap();
        assert_eq!(v.shape(), (5, 3));
        assert!(v.isometry_defect() < 1e-12);
        assert!(s.isometry(2, 3).is_err());
    }

    #[test]
    fn deterministic_stream() {
        let a = Sampler::new(3).gaussian(3, 3);
        let b = Sampler::new(3).gaussian(3, 3);
        assert_eq!(a, b);
        assert_ne!(a, Sampler::new(4).gaussian(3, 3));
    }

    #[test]
    fn invertible_respects_condition() {
        let mut s = Sampler::new(1);
        for _ in 0..10 {
            let m = s.invertible(4, 100.0);
            let cond = m.inv().unwrap().cond;
            assert!(cond <= 100.0 * (1.0 + 1e-9), "{cond}");
        }
    }

    #[test]
    fn points_inside_ball() {
        let mut s = Sampler::new(11);
        let ball = PolyMatrix::ball(&[Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0)], 1.0);
        for n in 1..4 {
            let center =
                GradedPoint::scalar_at_level(&[Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0)], n).unwrap();
            for _ in 0..5 {
                let x = s.point_inside(&ball, &center, 1e-9).unwrap();
                assert!(ball.norm_at(&x).unwrap() < 1.0);
            }
        }
        let far = GradedPoint::scalar(&[Complex64::new(3.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        assert!(matches!(s.point_inside(&ball, &far, 1e-9), Err(Error::OutsideDomain { .. })));
    }
}
