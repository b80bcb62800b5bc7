//! Random inputs for the identity suites.
//!
//! Every generator draws from a caller-supplied `rand::Rng`; the CLI and the
//! test suites seed `rand_chacha::ChaCha20Rng` with `seed_from_u64`, so a
//! seed fixes every sample across platforms. Draw order is part of the
//! contract: coefficients are drawn in canonical blade order, real part
//! before imaginary part.

use rand::Rng;

use crate::error::{domain, Result};
use crate::field_config::{chi_ell, reduced_axes, GaussianPacketSpec};
use crate::index_algebra::{binomial, Signature};
use crate::multivector::Multivector;
use crate::C64;

/// Complex coefficients with real and imaginary parts uniform in `[−1, 1]`.
pub fn complex_multivector<R: Rng + ?Sized>(rng: &mut R, sig: Signature, grade: usize) -> Multivector {
    let coeffs = (0..binomial(sig.dim(), grade))
        .map(|_| {
            let re = rng.gen_range(-1.0..=1.0);
            let im = rng.gen_range(-1.0..=1.0);
            C64::new(re, im)
        })
        .collect();
    Multivector::new(sig, grade, coeffs).expect("grade checked by caller")
}

/// Real coefficients uniform in `[−1, 1]`.
pub fn real_multivector<R: Rng + ?Sized>(rng: &mut R, sig: Signature, grade: usize) -> Multivector {
    let coeffs: Vec<f64> = (0..binomial(sig.dim(), grade)).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    Multivector::from_real(sig, grade, &coeffs).expect("grade checked by caller")
}

/// A point with coordinates uniform in `[−scale, scale]`.
pub fn point<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-scale..=scale)).collect()
}

/// A small Gaussian packet for field `grade r` with reduced-axis grid of
/// `points` samples per axis.
///
/// The centre is drawn uniformly from `[−2, 2]^{d−1}` until
/// `χ(centre) ≥ 0.5·|centre|` and `|centre| ≥ 0.5`; the spread is uniform in
/// `[0.05, 0.15]`, the grid half-width is twice the spread, the spatial
/// offset is uniform in `[−1, 1]`, and the seed is a complex `r−1`-vector.
pub fn packet_spec<R: Rng + ?Sized>(
    rng: &mut R,
    sig: Signature,
    r: usize,
    ell: usize,
    points: usize,
) -> Result<GaussianPacketSpec> {
    sig.check_index(ell)?;
    let d = sig.dim();
    if r < 2 || r > d {
        return domain(format!("packet grade {r} must lie in 2..={d}"));
    }
    let axes = reduced_axes(d, ell);
    if !axes.iter().any(|&t| sig.delta(t) != sig.delta(ell)) {
        return domain(format!("ell = {ell} has an empty null shell in signature ({}, {})", sig.k(), sig.n()));
    }
    let center = loop {
        let c = point(rng, d - 1, 2.0);
        let mag = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if mag < 0.5 {
            continue;
        }
        if let Ok(chi) = chi_ell(&c, ell, sig) {
            if chi >= 0.5 * mag {
                break c;
            }
        }
    };
    let spread = rng.gen_range(0.05..=0.15);
    let offset = point(rng, d - 1, 1.0);
    let seed = complex_multivector(rng, sig, r - 1);
    Ok(GaussianPacketSpec {
        center,
        spread,
        seed,
        extent: vec![2.0 * spread; d - 1],
        points: vec![points; d - 1],
        offset,
    })
}
