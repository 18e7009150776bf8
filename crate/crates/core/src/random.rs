//! Seeded random instances: Haar unitaries and random states.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::poly::{CreationPolynomial, ModeId, ModeRegistry};

/// Standard complex Gaussian sample, `E|z|² = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed `n x n` unitary: QR of a complex Ginibre matrix with
/// the phases of `R`'s diagonal pushed back into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let z = DMatrix::from_fn(n, n, |_, _| complex_gaussian(rng));
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for c in 0..n {
        let d = r[(c, c)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for row in 0..n {
            q[(row, c)] *= phase;
        }
    }
    q
}

/// All exponent vectors over `modes` (a subset of the registry) with total degree `degree`.
pub fn monomials_of_degree(registry_len: usize, modes: &[ModeId], degree: u32) -> Vec<Vec<u32>> {
    fn rec(
        modes: &[ModeId],
        left: u32,
        current: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        match modes.split_first() {
            None => {
                if left == 0 {
                    out.push(current.clone());
                }
            }
            Some((&m, rest)) => {
                for e in (0..=left).rev() {
                    current[m.index()] = e;
                    rec(rest, left - e, current, out);
                }
                current[m.index()] = 0;
            }
        }
    }
    let mut out = Vec::new();
    let mut current = vec![0; registry_len];
    rec(modes, degree, &mut current, &mut out);
    out
}

/// Homogeneous degree-`degree` polynomial on `modes` with i.i.d. complex
/// Gaussian coefficients on every monomial.
pub fn random_homogeneous<R: Rng + ?Sized>(
    registry: &Arc<ModeRegistry>,
    modes: &[ModeId],
    degree: u32,
    rng: &mut R,
) -> Result<CreationPolynomial> {
    let terms = monomials_of_degree(registry.len(), modes, degree)
        .into_iter()
        .map(|e| (e, complex_gaussian(rng)))
        .collect::<Vec<_>>();
    CreationPolynomial::from_terms(registry, terms)
}

/// Polynomial on `modes` with random coefficients on every monomial of
/// degree `0..=max_degree` (not homogeneous in general).
pub fn random_polynomial<R: Rng + ?Sized>(
    registry: &Arc<ModeRegistry>,
    modes: &[ModeId],
    max_degree: u32,
    rng: &mut R,
) -> Result<CreationPolynomial> {
    let terms = (0..=max_degree)
        .flat_map(|d| monomials_of_degree(registry.len(), modes, d))
        .map(|e| (e, complex_gaussian(rng)))
        .collect::<Vec<_>>();
    CreationPolynomial::from_terms(registry, terms)
}

/// `k` mutually orthogonal, normalized homogeneous states (Gram-Schmidt on
/// Gaussian draws). Fails if `k` exceeds the number of monomials.
pub fn random_orthogonal_states<R: Rng + ?Sized>(
    registry: &Arc<ModeRegistry>,
    modes: &[ModeId],
    degree: u32,
    k: usize,
    rng: &mut R,
) -> Result<Vec<CreationPolynomial>> {
    let available = monomials_of_degree(registry.len(), modes, degree).len();
    if k > available {
        return Err(Error::Degenerate(format!(
            "{k} orthogonal states need at least {k} monomials, have {available}"
        )));
    }
    let mut out: Vec<CreationPolynomial> = Vec::with_capacity(k);
    while out.len() < k {
        let mut v = random_homogeneous(registry, modes, degree, rng)?;
        for u in &out {
            let proj = u.vacuum_inner_product(&v)?;
            v = v.sub(&u.scale(proj))?;
        }
        let norm = v.norm_sqr().sqrt();
        if norm > 1e-6 {
            out.push(v.scale(Complex64::new(1.0 / norm, 0.0)));
        }
    }
    Ok(out)
}
