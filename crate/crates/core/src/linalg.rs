//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex<f64>;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

/// Eigen-decomposition of a Hermitian matrix: real eigenvalues and unitary
/// eigenvectors (columns).
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = m.clone().symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Reassembles `U diag(d) U^H`.
pub fn from_spectrum(u: &CMat, d: impl Fn(usize) -> f64) -> CMat {
    let n = u.nrows();
    let mut scaled = u.clone();
    for (c, mut col) in scaled.column_iter_mut().enumerate() {
        col *= C64::new(d(c), 0.0);
    }
    let out = &scaled * u.adjoint();
    debug_assert_eq!(out.nrows(), n);
    out
}

/// Principal square root of a Hermitian positive semidefinite matrix.
pub fn hermitian_sqrt(m: &CMat) -> CMat {
    let (vals, u) = hermitian_eigen(m);
    from_spectrum(&u, |i| vals[i].max(0.0).sqrt())
}

/// `Σ_i w_i x_i x_i^H`, an `n × n` Hermitian matrix.
pub fn weighted_gram<'a>(n: usize, terms: impl IntoIterator<Item = (f64, &'a CVec)>) -> CMat {
    let mut out = CMat::zeros(n, n);
    for (w, x) in terms {
        if w != 0.0 {
            out.ger(C64::new(w, 0.0), x, &x.conjugate(), C64::new(1.0, 0.0));
        }
    }
    out
}

/// `a^H b`.
pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}

/// Draws a vector of i.i.d. circularly-symmetric `CN(0, 1)` entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(scale * re, scale * im)
    })
}

pub fn is_finite_vec(v: &CVec) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let m = CMat::from_fn(3, 3, |i, j| {
            C64::new(0.6f64.powi((i as i32 - j as i32).abs()), 0.0)
        });
        let s = hermitian_sqrt(&m);
        assert!((&s * &s - &m).norm() < 1e-12);
        assert!((&s - s.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn gram_matches_outer_products() {
        let x = CVec::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.25)]);
        let g = weighted_gram(2, [(2.0, &x)]);
        let expect = (&x * x.adjoint()) * C64::new(2.0, 0.0);
        assert!((g - expect).norm() < 1e-14);
    }
}
