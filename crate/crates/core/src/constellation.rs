//! Square Gray-labelled QAM constellations with unit average energy.
//!
//! Bit `i` of an `m`-bit label is counted from the most significant end:
//! bits `0..m/2` select the in-phase amplitude and bits `m/2..m` the
//! quadrature amplitude. Each axis carries a reflected Gray code whose
//! all-zeros word sits at the most negative amplitude.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Bits per QAM symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModOrder {
    Qam4,
    Qam16,
    Qam64,
}

impl ModOrder {
    pub const ALL: [ModOrder; 3] = [ModOrder::Qam4, ModOrder::Qam16, ModOrder::Qam64];

    pub fn from_bits(m: u32) -> Result<Self> {
        match m {
            2 => Ok(ModOrder::Qam4),
            4 => Ok(ModOrder::Qam16),
            6 => Ok(ModOrder::Qam64),
            _ => Err(Error::config(format!(
                "unsupported modulation order M = {m} (expected 2, 4 or 6)"
            ))),
        }
    }

    /// `M`, the number of bits per symbol.
    pub fn bits(self) -> usize {
        match self {
            ModOrder::Qam4 => 2,
            ModOrder::Qam16 => 4,
            ModOrder::Qam64 => 6,
        }
    }

    /// Number of constellation points, `2^M`.
    pub fn size(self) -> usize {
        1 << self.bits()
    }

    /// Amplitude levels on each axis, `sqrt(2^M)`.
    pub fn levels_per_axis(self) -> usize {
        1 << (self.bits() / 2)
    }

    /// Minimum distance of the unit-energy constellation, `sqrt(6 / (2^M - 1))`.
    pub fn d_min(self) -> f64 {
        (6.0 / (self.size() as f64 - 1.0)).sqrt()
    }
}

impl fmt::Display for ModOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}QAM", self.size())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    InPhase,
    Quadrature,
}

impl Axis {
    #[inline]
    pub fn coordinate(self, z: Complex64) -> f64 {
        match self {
            Axis::InPhase => z.re,
            Axis::Quadrature => z.im,
        }
    }
}

#[inline]
fn gray(n: u32) -> u32 {
    n ^ (n >> 1)
}

#[derive(Clone, Debug)]
pub struct Constellation {
    order: ModOrder,
    d_min: f64,
    /// Points in grid order: in-phase level major, quadrature level minor.
    points: Vec<Complex64>,
    labels: Vec<u32>,
    index_of_label: Vec<usize>,
    /// Per-axis amplitudes in increasing order.
    levels: Vec<f64>,
}

/// Convenience wrapper for an integer bits-per-symbol value.
pub fn build_constellation(m: u32) -> Result<Constellation> {
    Ok(Constellation::new(ModOrder::from_bits(m)?))
}

impl Constellation {
    pub fn new(order: ModOrder) -> Self {
        let d = order.d_min();
        let per_axis = order.levels_per_axis();
        let half_bits = order.bits() / 2;
        let levels: Vec<f64> = (0..per_axis)
            .map(|l| (2.0 * l as f64 - (per_axis as f64 - 1.0)) * d / 2.0)
            .collect();

        let mut points = Vec::with_capacity(order.size());
        let mut labels = Vec::with_capacity(order.size());
        for (li, &re) in levels.iter().enumerate() {
            for (lq, &im) in levels.iter().enumerate() {
                points.push(Complex64::new(re, im));
                labels.push((gray(li as u32) << half_bits) | gray(lq as u32));
            }
        }
        let mut index_of_label = vec![0; order.size()];
        for (idx, &label) in labels.iter().enumerate() {
            index_of_label[label as usize] = idx;
        }
        Self {
            order,
            d_min: d,
            points,
            labels,
            index_of_label,
            levels,
        }
    }

    pub fn order(&self) -> ModOrder {
        self.order
    }

    pub fn bits(&self) -> usize {
        self.order.bits()
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Label words aligned with [`Constellation::points`].
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Per-axis amplitude levels, increasing.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Value (0 or 1) of bit `i` of a label word.
    #[inline]
    pub fn label_bit(&self, word: u32, i: usize) -> u8 {
        ((word >> (self.bits() - 1 - i)) & 1) as u8
    }

    pub fn axis_of_bit(&self, i: usize) -> Axis {
        if i < self.bits() / 2 {
            Axis::InPhase
        } else {
            Axis::Quadrature
        }
    }

    /// Value of bit `i` at each amplitude level of its axis, in increasing
    /// amplitude order.
    pub fn axis_bit_pattern(&self, i: usize) -> Vec<u8> {
        let half_bits = self.bits() / 2;
        let within = i % half_bits;
        (0..self.levels.len() as u32)
            .map(|l| ((gray(l) >> (half_bits - 1 - within)) & 1) as u8)
            .collect()
    }

    /// Symbol carrying the given label word.
    #[inline]
    pub fn map_word(&self, word: u32) -> Complex64 {
        self.points[self.index_of_label[word as usize]]
    }

    pub fn map_bits(&self, bits: &[u8]) -> Result<Complex64> {
        if bits.len() != self.bits() {
            return Err(Error::domain(format!(
                "{} expects {} bits per symbol, got {}",
                self.order,
                self.bits(),
                bits.len()
            )));
        }
        let mut word = 0u32;
        for &b in bits {
            if b > 1 {
                return Err(Error::domain(format!("bit value {b} is not 0 or 1")));
            }
            word = (word << 1) | b as u32;
        }
        Ok(self.map_word(word))
    }

    /// Label word of the constellation point within 1e-9 of `point`.
    pub fn demap_word(&self, point: Complex64) -> Result<u32> {
        self.points
            .iter()
            .position(|c| (c - point).norm() <= 1e-9)
            .map(|idx| self.labels[idx])
            .ok_or_else(|| Error::domain(format!("{point} is not a point of {}", self.order)))
    }

    pub fn demap_symbol(&self, point: Complex64) -> Result<Vec<u8>> {
        let word = self.demap_word(point)?;
        Ok((0..self.bits()).map(|i| self.label_bit(word, i)).collect())
    }

    /// Index (into [`Constellation::points`]) of the closest point. Ties go
    /// to the smaller real part, then the smaller imaginary part.
    pub fn nearest_index(&self, z: Complex64) -> usize {
        // Grid order is already lexicographic in (re, im), so keeping the
        // first strict minimum implements the tie rule.
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (idx, c) in self.points.iter().enumerate() {
            let dist = (z - c).norm_sqr();
            if dist < best_dist * (1.0 - 1e-12) - 1e-300 {
                best = idx;
                best_dist = dist;
            }
        }
        best
    }

    pub fn nearest_point(&self, z: Complex64) -> Complex64 {
        self.points[self.nearest_index(z)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn unsupported_order() {
        assert!(matches!(ModOrder::from_bits(3), Err(Error::Config(_))));
        assert!(build_constellation(8).is_err());
    }

    #[test]
    fn qpsk_points_and_distance() {
        let c = Constellation::new(ModOrder::Qam4);
        assert!((c.d_min() - 2f64.sqrt()).abs() < 1e-15);
        for p in c.points() {
            assert!((p.re.abs() - FRAC_1_SQRT_2).abs() < 1e-15);
            assert!((p.im.abs() - FRAC_1_SQRT_2).abs() < 1e-15);
        }
        let z = c.map_bits(&[0, 0]).unwrap();
        assert!((z - Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn qam16_distance_and_corner() {
        let c = Constellation::new(ModOrder::Qam16);
        let d = c.d_min();
        assert!((d - 0.632_455_532_033_675_9).abs() < 1e-12);
        let z = c.map_bits(&[0, 0, 0, 0]).unwrap();
        assert!((z - Complex64::new(-1.5 * d, -1.5 * d)).norm() < 1e-12);
    }

    #[test]
    fn qam16_second_bit_pattern() {
        let c = Constellation::new(ModOrder::Qam16);
        assert_eq!(c.axis_bit_pattern(1), vec![0, 1, 1, 0]);
        assert_eq!(c.axis_bit_pattern(0), vec![0, 0, 1, 1]);
        assert_eq!(c.axis_of_bit(1), Axis::InPhase);
        assert_eq!(c.axis_of_bit(3), Axis::Quadrature);
    }

    #[test]
    fn invariants_all_orders() {
        for order in ModOrder::ALL {
            let c = Constellation::new(order);
            assert_eq!(c.points().len(), order.size());
            assert!((c.average_energy() - 1.0).abs() < 1e-12);
            assert!((c.d_min() - (6.0 / (order.size() as f64 - 1.0)).sqrt()).abs() < 1e-15);

            let mut seen = c.labels().to_vec();
            seen.sort_unstable();
            assert_eq!(seen, (0..order.size() as u32).collect::<Vec<_>>());

            // odd multiples of d/2
            for l in c.levels() {
                let k = l / (c.d_min() / 2.0);
                assert!((k - k.round()).abs() < 1e-9 && (k.round() as i64).rem_euclid(2) == 1);
            }

            // Gray adjacency per axis: neighbouring levels differ in one bit
            let half = order.bits() / 2;
            for axis_start in [0, half] {
                for l in 0..c.levels().len() - 1 {
                    let diff: usize = (axis_start..axis_start + half)
                        .map(|i| {
                            let p = c.axis_bit_pattern(i);
                            (p[l] != p[l + 1]) as usize
                        })
                        .sum();
                    assert_eq!(diff, 1);
                }
            }

            for word in 0..order.size() as u32 {
                let z = c.map_word(word);
                assert_eq!(c.demap_word(z).unwrap(), word);
                let bits = c.demap_symbol(z).unwrap();
                assert_eq!(c.map_bits(&bits).unwrap(), z);
            }
            // all-zeros word at the most negative amplitude on both axes
            let zero = c.map_word(0);
            assert_eq!(zero.re, c.levels()[0]);
            assert_eq!(zero.im, c.levels()[0]);
        }
    }

    #[test]
    fn map_and_demap_errors() {
        let c = Constellation::new(ModOrder::Qam16);
        assert!(c.map_bits(&[0, 1]).is_err());
        assert!(c.map_bits(&[0, 1, 2, 0]).is_err());
        assert!(c.demap_symbol(Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn nearest_point_ties() {
        let c = Constellation::new(ModOrder::Qam4);
        let z = c.nearest_point(Complex64::new(0.0, 0.0));
        assert_eq!(z, Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2));

        let c16 = Constellation::new(ModOrder::Qam16);
        let d = c16.d_min();
        let z = c16.nearest_point(Complex64::new(d, d));
        assert!((z - Complex64::new(d / 2.0, d / 2.0)).norm() < 1e-12);

        for p in c16.points() {
            assert_eq!(c16.nearest_point(*p), *p);
        }
    }

    #[test]
    fn nearest_point_matches_brute_force() {
        use crate::numerics::RandomSource;
        let mut rng = RandomSource::new(1);
        for order in ModOrder::ALL {
            let c = Constellation::new(order);
            for _ in 0..2000 {
                let z = Complex64::new(rng.uniform(-2.0, 2.0).unwrap(), rng.uniform(-2.0, 2.0).unwrap());
                let brute = c
                    .points()
                    .iter()
                    .min_by(|a, b| (z - *a).norm().partial_cmp(&(z - *b).norm()).unwrap())
                    .unwrap();
                assert_eq!(c.nearest_point(z), *brute);
            }
        }
    }
}
