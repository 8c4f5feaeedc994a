//! Ternary (erasure-aware) QAM demodulation.
//!
//! Three equivalent views of the same decision rule live here:
//!
//! * thresholding the exact log-likelihood ratio of each bit,
//! * thresholding the per-axis max-log LLR, and
//! * comparing one coordinate of the equalized sample against precomputed
//!   interval tables ([`DecisionRegions`]).
//!
//! The interval form is what the link uses at run time; the LLR forms are
//! kept as cross-checks. An LLR threshold `rho` and a boundary offset `a`
//! are related by `rho = 6 SNR a / (2^M - 1)`.

use std::fmt;

use num_complex::Complex64;

use crate::constellation::{Axis, Constellation, ModOrder};
use crate::error::{Error, Result};

/// Demodulator output for one bit: 0, 1, or the erasure value 0.5.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Trit {
    Zero,
    Half,
    One,
}

pub type TritSequence = Vec<Trit>;

impl Trit {
    pub const ALL: [Trit; 3] = [Trit::Zero, Trit::Half, Trit::One];

    pub fn value(self) -> f64 {
        match self {
            Trit::Zero => 0.0,
            Trit::Half => 0.5,
            Trit::One => 1.0,
        }
    }

    pub fn from_bit(bit: u8) -> Trit {
        if bit == 0 {
            Trit::Zero
        } else {
            Trit::One
        }
    }

    pub fn is_erasure(self) -> bool {
        self == Trit::Half
    }

    /// Position in [`Trit::ALL`].
    pub fn index(self) -> usize {
        match self {
            Trit::Zero => 0,
            Trit::Half => 1,
            Trit::One => 2,
        }
    }
}

impl fmt::Display for Trit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trit::Zero => f.write_str("0"),
            Trit::Half => f.write_str("0.5"),
            Trit::One => f.write_str("1"),
        }
    }
}

/// One interval of a bit's decision table.
///
/// `index` follows the boundary numbering in which erasure band `j` is
/// centred on `(j - 1) d_min` and a binary interval sits between the
/// erasure bands numbered one below and one above it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub output: Trit,
    pub index: i32,
}

/// Decision table for a single bit, covering the real line in order.
#[derive(Clone, Debug, PartialEq)]
pub struct BitRegions {
    pub bit: usize,
    pub axis: Axis,
    pub offset: f64,
    pub intervals: Vec<Interval>,
}

impl BitRegions {
    /// Output for coordinate `x`. Points on an erasure band's edge are
    /// erasures; with no bands the shared boundary goes to the lower cell.
    pub fn classify(&self, x: f64) -> Trit {
        let n = self.intervals.len();
        for (j, iv) in self.intervals.iter().enumerate() {
            if x < iv.upper {
                return iv.output;
            }
            if x == iv.upper {
                let next_is_band = j + 1 < n && self.intervals[j + 1].output.is_erasure();
                return if iv.output.is_erasure() || next_is_band {
                    Trit::Half
                } else {
                    iv.output
                };
            }
        }
        // Only reachable for NaN input.
        Trit::Half
    }

    /// Whether interval `j` claims `x` under the closed-band convention.
    pub fn claims(&self, j: usize, x: f64) -> bool {
        let iv = &self.intervals[j];
        if iv.output.is_erasure() {
            return iv.lower <= x && x <= iv.upper;
        }
        let lower_ok = if j == 0 {
            x > iv.lower || x == f64::NEG_INFINITY
        } else {
            x > iv.lower
        };
        let upper_closed = j + 1 == self.intervals.len() || !self.intervals[j + 1].output.is_erasure();
        let upper_ok = if upper_closed { x <= iv.upper } else { x < iv.upper };
        lower_ok && upper_ok
    }

    /// Boundary indices of the intervals producing output `k`.
    pub fn index_set(&self, k: Trit) -> Vec<i32> {
        self.intervals
            .iter()
            .filter(|iv| iv.output == k)
            .map(|iv| iv.index)
            .collect()
    }
}

/// Interval tables for every bit of one modulation order.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionRegions {
    order: ModOrder,
    d_min: f64,
    bits: Vec<BitRegions>,
}

impl DecisionRegions {
    pub fn order(&self) -> ModOrder {
        self.order
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn bit(&self, i: usize) -> &BitRegions {
        &self.bits[i]
    }

    pub fn bits(&self) -> &[BitRegions] {
        &self.bits
    }

    /// Demodulates one equalized sample into `M` trits.
    #[inline]
    pub fn demod_sample(&self, y: Complex64, out: &mut Vec<Trit>) {
        out.extend(self.bits.iter().map(|b| b.classify(b.axis.coordinate(y))));
    }
}

fn check_offset(a: f64) -> Result<()> {
    if a.is_nan() || a < 0.0 {
        return Err(Error::domain(format!("boundary offset a = {a} must lie in [0, 1]")));
    }
    if a > 1.0 {
        return Err(Error::ThresholdTooLarge { a });
    }
    Ok(())
}

/// Builds the per-bit interval tables for offsets `a[i]`, one per bit.
///
/// Transition points are read off the constellation labels: wherever a
/// bit changes value between adjacent amplitudes, an erasure band of
/// width `a d_min` is centred on the midpoint.
pub fn build_regions(c: &Constellation, offsets: &[f64]) -> Result<DecisionRegions> {
    if offsets.len() != c.bits() {
        return Err(Error::Shape {
            expected: c.bits(),
            actual: offsets.len(),
        });
    }
    for &a in offsets {
        check_offset(a)?;
    }
    let d = c.d_min();
    let levels = c.levels();
    let bits = offsets
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let pattern = c.axis_bit_pattern(i);
            let transitions: Vec<f64> = (0..levels.len() - 1)
                .filter(|&l| pattern[l] != pattern[l + 1])
                .map(|l| 0.5 * (levels[l] + levels[l + 1]))
                .collect();
            let band_index = |t: f64| 1 + (t / d).round() as i32;
            let half = 0.5 * a * d;

            let mut intervals = Vec::with_capacity(2 * transitions.len() + 1);
            let mut lower = f64::NEG_INFINITY;
            let mut value = pattern[0];
            for (k, &t) in transitions.iter().enumerate() {
                let index = if k == 0 {
                    band_index(t) - 1
                } else {
                    1 + (0.5 * (transitions[k - 1] + t) / d).round() as i32
                };
                intervals.push(Interval {
                    lower,
                    upper: t - half,
                    output: Trit::from_bit(value),
                    index,
                });
                if a > 0.0 {
                    intervals.push(Interval {
                        lower: t - half,
                        upper: t + half,
                        output: Trit::Half,
                        index: band_index(t),
                    });
                }
                lower = t + half;
                value ^= 1;
            }
            let last_index = transitions.last().map_or(1, |&t| band_index(t) + 1);
            intervals.push(Interval {
                lower,
                upper: f64::INFINITY,
                output: Trit::from_bit(value),
                index: last_index,
            });
            BitRegions {
                bit: i,
                axis: c.axis_of_bit(i),
                offset: a,
                intervals,
            }
        })
        .collect();
    Ok(DecisionRegions {
        order: c.order(),
        d_min: d,
        bits,
    })
}

/// Interval-table demodulation of a sample sequence, `M` trits per sample.
pub fn demod_robust(samples: &[Complex64], regions: &DecisionRegions) -> TritSequence {
    let mut out = Vec::with_capacity(samples.len() * regions.bits.len());
    for &y in samples {
        regions.demod_sample(y, &mut out);
    }
    out
}

/// Boundary offset `a` equivalent to an LLR threshold `rho`.
pub fn a_from_rho(rho: f64, order: ModOrder, snr: f64) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::domain(format!("SNR {snr} must be positive")));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::domain(format!("threshold rho = {rho} must be >= 0")));
    }
    let a = (rho / snr) * ((order.size() as f64 - 1.0) / 6.0);
    if a > 1.0 {
        return Err(Error::ThresholdTooLarge { a });
    }
    Ok(a)
}

/// LLR threshold `rho` equivalent to a boundary offset `a`.
pub fn rho_from_a(a: f64, order: ModOrder, snr: f64) -> Result<f64> {
    check_offset(a)?;
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::domain(format!("SNR {snr} must be positive")));
    }
    Ok(6.0 * snr / (order.size() as f64 - 1.0) * a)
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Exact per-bit LLRs `ln P(b=0|y) / P(b=1|y)` under uniform priors,
/// accumulated in the log domain.
pub fn llr_exact(y: Complex64, c: &Constellation, snr: f64) -> Vec<f64> {
    let metrics: Vec<(u32, f64)> = c
        .points()
        .iter()
        .zip(c.labels())
        .map(|(p, &label)| (label, -snr * (y - p).norm_sqr()))
        .collect();
    (0..c.bits())
        .map(|i| {
            let class = |bit: u8| {
                metrics
                    .iter()
                    .filter(move |(label, _)| c.label_bit(*label, i) == bit)
                    .map(|(_, m)| *m)
            };
            log_sum_exp(class(0)) - log_sum_exp(class(1))
        })
        .collect()
}

/// Max-log LLR of bit `i`, using only the coordinate on that bit's axis.
pub fn llr_maxlog(y: Complex64, c: &Constellation, snr: f64, i: usize) -> f64 {
    let x = c.axis_of_bit(i).coordinate(y);
    let pattern = c.axis_bit_pattern(i);
    let mut nearest = [f64::INFINITY; 2];
    for (&level, &bit) in c.levels().iter().zip(&pattern) {
        let dist = (x - level) * (x - level);
        if dist < nearest[bit as usize] {
            nearest[bit as usize] = dist;
        }
    }
    snr * (nearest[1] - nearest[0])
}

/// Which LLR a threshold demodulator compares against `rho`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LlrRule {
    MaxLog,
    Exact,
}

fn threshold(llr: f64, rho: f64) -> Trit {
    if rho == 0.0 {
        // no erasures at all; an exact tie falls to 0
        if llr < 0.0 {
            Trit::One
        } else {
            Trit::Zero
        }
    } else if llr > rho {
        Trit::Zero
    } else if llr < -rho {
        Trit::One
    } else {
        Trit::Half
    }
}

/// LLR-threshold demodulation using the per-axis max-log LLR; `rho[i]` is
/// the threshold of bit `i` within a symbol.
pub fn demod_exact_llr(samples: &[Complex64], c: &Constellation, snr: f64, rho: &[f64]) -> Result<TritSequence> {
    demod_llr(samples, c, snr, rho, LlrRule::MaxLog)
}

pub fn demod_llr(
    samples: &[Complex64],
    c: &Constellation,
    snr: f64,
    rho: &[f64],
    rule: LlrRule,
) -> Result<TritSequence> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::domain(format!("SNR {snr} must be positive")));
    }
    if rho.len() != c.bits() {
        return Err(Error::Shape {
            expected: c.bits(),
            actual: rho.len(),
        });
    }
    if let Some(bad) = rho.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::domain(format!("threshold rho = {bad} must be >= 0")));
    }
    let mut out = Vec::with_capacity(samples.len() * c.bits());
    for &y in samples {
        match rule {
            LlrRule::MaxLog => {
                for (i, &r) in rho.iter().enumerate() {
                    out.push(threshold(llr_maxlog(y, c, snr, i), r));
                }
            }
            LlrRule::Exact => {
                for (l, &r) in llr_exact(y, c, snr).into_iter().zip(rho) {
                    out.push(threshold(l, r));
                }
            }
        }
    }
    Ok(out)
}

/// Hard maximum-likelihood demodulation through the nearest point.
pub fn demod_hard(samples: &[Complex64], c: &Constellation) -> TritSequence {
    let mut out = Vec::with_capacity(samples.len() * c.bits());
    for &y in samples {
        let word = c.labels()[c.nearest_index(y)];
        out.extend((0..c.bits()).map(|i| Trit::from_bit(c.label_bit(word, i))));
    }
    out
}
