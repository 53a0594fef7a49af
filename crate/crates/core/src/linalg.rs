//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const J: C64 = C64::new(0.0, 1.0);

/// `Re(x^H A x)`.
pub fn quad_form(a: &CMat, x: &CVec) -> f64 {
    x.dotc(&(a * x)).re
}

pub fn trace_re(a: &CMat) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// `Re tr(A B)` without forming the product.
pub fn trace_product_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

pub fn outer(x: &CVec, y: &CVec) -> CMat {
    x * y.adjoint()
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `||a - b||_F / ||b||_F`, falling back to the absolute error when `b = 0`.
pub fn rel_frobenius(a: &CMat, b: &CMat) -> f64 {
    let diff = frobenius(&(a - b));
    let scale = frobenius(b);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let sym = (a + a.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn inverse_hpd(a: &CMat) -> Option<CMat> {
    a.clone().cholesky().map(|c| c.inverse())
}

/// One draw of CN(0, var): independent real and imaginary parts, each of variance var/2.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, var: f64) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| complex_normal(rng, var)))
}

pub fn unit_phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trace_product_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = CMat::from_fn(5, 5, |_, _| complex_normal(&mut rng, 1.0));
        let b = CMat::from_fn(5, 5, |_, _| complex_normal(&mut rng, 1.0));
        let dense = (&a * &b).trace().re;
        assert!((trace_product_re(&a, &b) - dense).abs() < 1e-12);
    }

    #[test]
    fn complex_normal_has_requested_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let var = 2.5;
        let mut re2 = 0.0;
        let mut im2 = 0.0;
        for _ in 0..n {
            let z = complex_normal(&mut rng, var);
            re2 += z.re * z.re;
            im2 += z.im * z.im;
        }
        let (re2, im2) = (re2 / n as f64, im2 / n as f64);
        assert!((re2 - var / 2.0).abs() < 0.02 * var);
        assert!((im2 - var / 2.0).abs() < 0.02 * var);
    }

    #[test]
    fn hpd_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = CMat::from_fn(4, 4, |_, _| complex_normal(&mut rng, 1.0));
        let a = &x * x.adjoint() + CMat::identity(4, 4);
        let inv = inverse_hpd(&a).unwrap();
        assert!(rel_frobenius(&(&a * &inv), &CMat::identity(4, 4)) < 1e-12);
    }
}
