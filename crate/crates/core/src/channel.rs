//! Quasi-static flat fading with AWGN and zero-forcing equalization.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::RandomSource;

/// One coherence block's channel: coefficient `h` and noise variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelRealization {
    pub h: Complex64,
    pub noise_var: f64,
}

impl ChannelRealization {
    pub fn new(h: Complex64, noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::domain(format!("noise variance {noise_var} must be >= 0")));
        }
        if !(h.re.is_finite() && h.im.is_finite()) {
            return Err(Error::domain("channel coefficient must be finite"));
        }
        Ok(Self { h, noise_var })
    }

    /// Unit-variance noise channel with `|h|^2 = snr` and zero phase.
    pub fn with_snr(snr: f64) -> Result<Self> {
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(Error::domain(format!("SNR {snr} must be positive")));
        }
        Self::new(Complex64::new(snr.sqrt(), 0.0), 1.0)
    }

    /// `|h|^2 / sigma^2`; infinite for a noiseless channel.
    pub fn snr(&self) -> f64 {
        self.h.norm_sqr() / self.noise_var
    }
}

/// Distribution the channel coefficient is drawn from at each block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelDistribution {
    FixedSnr {
        snr: f64,
        noise_var: f64,
    },
    /// `|h| ~ Uniform[g1, g2]`.
    UniformMagnitude {
        g1: f64,
        g2: f64,
        noise_var: f64,
    },
}

impl ChannelDistribution {
    pub fn fixed_snr(snr: f64) -> Self {
        ChannelDistribution::FixedSnr { snr, noise_var: 1.0 }
    }

    pub fn uniform_magnitude(g1: f64, g2: f64) -> Self {
        ChannelDistribution::UniformMagnitude { g1, g2, noise_var: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelDistribution::FixedSnr { snr, noise_var } => {
                if !(snr > 0.0 && snr.is_finite() && noise_var > 0.0) {
                    return Err(Error::config(format!(
                        "fixed-SNR channel needs snr > 0 and noise_var > 0 (got {snr}, {noise_var})"
                    )));
                }
            }
            ChannelDistribution::UniformMagnitude { g1, g2, noise_var } => {
                if !(g1 >= 0.0 && g2 > g1 && g2.is_finite() && noise_var > 0.0) {
                    return Err(Error::config(format!(
                        "uniform-magnitude channel needs 0 <= g1 < g2 and noise_var > 0 (got {g1}, {g2}, {noise_var})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Draws one block's channel; the phase is uniform on `[0, 2pi)`.
pub fn draw_channel(dist: &ChannelDistribution, rng: &mut RandomSource) -> Result<ChannelRealization> {
    dist.validate()?;
    let (magnitude, noise_var) = match *dist {
        ChannelDistribution::FixedSnr { snr, noise_var } => ((snr * noise_var).sqrt(), noise_var),
        ChannelDistribution::UniformMagnitude { g1, g2, noise_var } => {
            (rng.uniform(g1, g2)? * noise_var.sqrt(), noise_var)
        }
    };
    let phase = 2.0 * PI * rng.unit();
    ChannelRealization::new(Complex64::from_polar(magnitude, phase), noise_var)
}

/// `y[n] = h x[n] + v[n]` with circular Gaussian `v` of total variance `sigma^2`.
pub fn transmit(x: &[Complex64], ch: &ChannelRealization, rng: &mut RandomSource) -> Vec<Complex64> {
    let per_part = (ch.noise_var / 2.0).sqrt();
    x.iter()
        .map(|&s| {
            let (nr, ni) = rng.std_normal_pair();
            ch.h * s + Complex64::new(per_part * nr, per_part * ni)
        })
        .collect()
}

/// `y~[n] = (h* / |h|^2) y[n]`.
pub fn equalize(y: &[Complex64], h: Complex64) -> Result<Vec<Complex64>> {
    let gain = h.norm_sqr();
    if gain == 0.0 {
        return Err(Error::SingularChannel);
    }
    let w = h.conj() / gain;
    Ok(y.iter().map(|&v| w * v).collect())
}
