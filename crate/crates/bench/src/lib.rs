//! Shared fixtures for the criterion benchmarks.

use semlink::{Complex64, RandomSource};

/// `n` samples uniformly spread over the square `[-spread, spread]^2`.
pub fn random_samples(n: usize, spread: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = RandomSource::new(seed);
    (0..n)
        .map(|_| {
            let re = rng.uniform(-spread, spread).expect("valid range");
            let im = rng.uniform(-spread, spread).expect("valid range");
            Complex64::new(re, im)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_stay_in_range_and_repeat() {
        let a = random_samples(1000, 1.3, 4);
        assert_eq!(a.len(), 1000);
        assert!(a.iter().all(|z| z.re.abs() <= 1.3 && z.im.abs() <= 1.3));
        assert_eq!(a, random_samples(1000, 1.3, 4));
    }
}
