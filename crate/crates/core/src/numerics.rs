//! Gaussian tail function, its inverse, and the seeded random source used
//! by every sampling routine in the crate.

use std::f64::consts::{PI, SQRT_2};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Gaussian tail probability `Q(x) = P(Z > x)` for standard normal `Z`.
pub fn q_function(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("q_function({x}): argument must be finite")));
    }
    Ok(q_unchecked(x))
}

#[inline]
pub(crate) fn q_unchecked(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

#[inline]
fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Inverse of [`q_function`]: returns `x` with `Q(x) = p`.
///
/// A rational approximation to the normal quantile supplies the starting
/// point; Newton steps on `Q(x) - p` polish it to full precision.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("q_inverse({p}): probability must lie in (0, 1)")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Q^-1(p) = -Phi^-1(p); work on the tail closer to zero for accuracy.
    let (tail, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut x = -normal_quantile_guess(tail);
    for _ in 0..8 {
        let pdf = std_normal_pdf(x);
        if pdf == 0.0 {
            break;
        }
        let residual = q_unchecked(x) - tail;
        // Halley correction; Q'' = x * phi(x).
        let newton = residual / pdf;
        let step = newton / (1.0 - 0.5 * x * newton);
        let step = if step.is_finite() { step } else { newton };
        x += step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(sign * x)
}

/// Lower-tail normal quantile, rational approximation (relative error ~1e-9).
#[allow(clippy::excessive_precision)]
fn normal_quantile_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Deterministic, splittable random source (ChaCha20 keyed by the seed).
///
/// Children obtained through [`RandomSource::fork`] depend only on the
/// parent's key and the child index, so parallel workers can be handed
/// reproducible streams regardless of scheduling.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    key: [u8; 32],
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        let rng = ChaCha20Rng::seed_from_u64(seed);
        Self::from_key(seed, rng.get_seed())
    }

    fn from_key(seed: u64, key: [u8; 32]) -> Self {
        Self {
            seed,
            key,
            rng: ChaCha20Rng::from_seed(key),
        }
    }

    /// The seed this source (or its root ancestor) was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream `index`. Does not advance `self`.
    pub fn fork(&self, index: u64) -> RandomSource {
        let mut deriver = ChaCha20Rng::from_seed(self.key);
        deriver.set_stream(index.wrapping_add(1));
        let mut key = [0u8; 32];
        deriver.fill_bytes(&mut key);
        Self::from_key(self.seed, key)
    }

    /// Child stream keyed from this source's output. Advances `self`.
    pub fn split(&mut self) -> RandomSource {
        let mut key = [0u8; 32];
        self.rng.fill_bytes(&mut key);
        Self::from_key(self.seed, key)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::domain(format!("uniform range [{lo}, {hi}] is invalid")));
        }
        if lo == hi {
            return Ok(lo);
        }
        Ok(lo + (hi - lo) * self.unit())
    }

    /// Two independent standard normal draws (Box-Muller).
    pub fn std_normal_pair(&mut self) -> (f64, f64) {
        // 1 - unit() lies in (0, 1], keeping the log finite.
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        (radius * c, radius * s)
    }

    pub fn bernoulli(&mut self, p: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("Bernoulli probability {p} outside [0, 1]")));
        }
        Ok(self.chance(p))
    }

    /// Unchecked Bernoulli draw for hot loops whose probabilities are
    /// already validated.
    #[inline]
    pub(crate) fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// erfc(x) from the Maclaurin series of erf for small x and a backward
    /// evaluated continued fraction for large x; independent of libm.
    fn erfc_oracle(x: f64) -> f64 {
        if x < 2.0 {
            let mut term = x;
            let mut sum = x;
            let mut n = 0.0;
            loop {
                n += 1.0;
                term *= -x * x / n;
                let add = term / (2.0 * n + 1.0);
                sum += add;
                if add.abs() < 1e-17 * sum.abs() {
                    break;
                }
            }
            1.0 - 2.0 / PI.sqrt() * sum
        } else {
            // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + 1/2/(x + 1/(x + 3/2/(x + ...))))
            let mut f = x;
            for k in (1..200).rev() {
                f = x + (k as f64 / 2.0) / f;
            }
            (-x * x).exp() / PI.sqrt() / f
        }
    }

    fn q_oracle(x: f64) -> f64 {
        if x >= 0.0 {
            0.5 * erfc_oracle(x / SQRT_2)
        } else {
            1.0 - 0.5 * erfc_oracle(-x / SQRT_2)
        }
    }

    #[test]
    fn q_matches_series_oracle() {
        let mut x = -8.0;
        while x <= 8.0 {
            let got = q_function(x).unwrap();
            assert!((got - q_oracle(x)).abs() <= 1e-12, "x = {x}");
            x += 0.01;
        }
    }

    #[test]
    fn q_reference_values() {
        assert_eq!(q_function(0.0).unwrap(), 0.5);
        assert!((q_function(1.0).unwrap() - 0.1586553).abs() < 5e-8);
        assert!((q_function(1.5).unwrap() - 0.0668072).abs() < 5e-8);
        assert!((q_oracle(1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
    }

    #[test]
    fn q_rejects_non_finite() {
        assert!(q_function(f64::NAN).is_err());
        assert!(q_function(f64::INFINITY).is_err());
    }

    #[test]
    fn q_inverse_reference_values() {
        assert_eq!(q_inverse(0.5).unwrap(), 0.0);
        assert!((q_inverse(0.1586553).unwrap() - 1.0).abs() < 1e-6);
        assert!((q_inverse(q_oracle(1.0)).unwrap() - 1.0).abs() < 1e-8);
        assert!((q_inverse(q_oracle(1.5)).unwrap() - 1.5).abs() < 1e-8);
        assert!((q_inverse(0.0668072).unwrap() - 1.5).abs() < 1e-6);
    }

    #[test]
    fn q_inverse_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(q_inverse(p).is_err(), "p = {p}");
        }
    }

    #[test]
    fn q_inverse_roundtrip_grid() {
        let mut x: f64 = -6.0;
        while x <= 6.0 {
            let back = q_inverse(q_function(x).unwrap()).unwrap();
            assert!((back - x).abs() < 1e-8, "x = {x}, back = {back}");
            x += 0.005;
        }
        for p in [1e-300, 1e-100, 1e-12, 1e-6, 0.01, 0.3, 0.7, 0.99, 1.0 - 1e-9] {
            let x = q_inverse(p).unwrap();
            assert!((q_function(x).unwrap() - p).abs() <= 1e-10, "p = {p}");
        }
    }

    #[test]
    fn rng_degenerate_uniform_and_errors() {
        let mut rng = RandomSource::new(7);
        assert_eq!(rng.uniform(3.0, 3.0).unwrap(), 3.0);
        assert!(rng.uniform(4.0, 3.0).is_err());
        assert!(rng.bernoulli(1.2).is_err());
        assert!(rng.bernoulli(-0.01).is_err());
    }

    #[test]
    fn bernoulli_mean() {
        let mut rng = RandomSource::new(11);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| rng.bernoulli(0.3).unwrap()).count();
        assert!((hits as f64 / n as f64 - 0.3).abs() < 0.0015);
    }

    #[test]
    fn normal_moments() {
        let mut rng = RandomSource::new(12);
        let n = 500_000;
        let (mut s, mut s2, mut cross) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let (a, b) = rng.std_normal_pair();
            s += a + b;
            s2 += a * a + b * b;
            cross += a * b;
        }
        let m = 2.0 * n as f64;
        let mean = s / m;
        let var = s2 / m - mean * mean;
        assert!((var - 1.0).abs() < 0.005, "var = {var}");
        assert!((cross / n as f64).abs() < 0.005);
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = RandomSource::new(99);
        let mut b = RandomSource::new(99);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = RandomSource::new(100);
        assert_ne!(RandomSource::new(99).next_u64(), c.next_u64());
    }

    #[test]
    fn forks_are_stable_and_distinct() {
        let parent = RandomSource::new(5);
        let mut f0 = parent.fork(0);
        let mut f0b = parent.fork(0);
        let mut f1 = parent.fork(1);
        let a: Vec<u64> = (0..16).map(|_| f0.next_u64()).collect();
        let b: Vec<u64> = (0..16).map(|_| f0b.next_u64()).collect();
        let c: Vec<u64> = (0..16).map(|_| f1.next_u64()).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mut p = RandomSource::new(5);
        assert_ne!(p.next_u64(), a[0]);
    }

    #[test]
    fn sibling_forks_uncorrelated() {
        let parent = RandomSource::new(3);
        let mut x = parent.fork(10);
        let mut y = parent.fork(11);
        let n = 200_000;
        let mut cross = 0.0;
        for _ in 0..n {
            cross += (x.unit() - 0.5) * (y.unit() - 0.5);
        }
        // var of each centred uniform is 1/12; correlation estimate
        let corr = cross / n as f64 * 12.0;
        assert!(corr.abs() < 3.0 / (n as f64).sqrt() * 1.5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn q_symmetry(x in -30.0f64..30.0) {
                let s = q_function(x).unwrap() + q_function(-x).unwrap();
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }

            #[test]
            fn q_monotone(x in -8.0f64..8.0, dx in 1e-6f64..1.0) {
                let (hi, lo) = (q_function(x).unwrap(), q_function(x + dx).unwrap());
                // near x = -8, Q sits within 1e-15 of 1 and steps round away
                if x > -5.0 {
                    prop_assert!(lo < hi);
                } else {
                    prop_assert!(lo <= hi);
                }
            }

            #[test]
            fn q_inverse_monotone(p in 1e-12f64..0.999, dp in 1e-9f64..1e-3) {
                let hi = (p + dp).min(1.0 - 1e-12);
                prop_assume!(hi > p);
                prop_assert!(q_inverse(hi).unwrap() < q_inverse(p).unwrap());
            }
        }
    }
}
