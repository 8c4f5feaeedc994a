//! Binary symmetric erasure channel (BSEC) model of the latent link.
//!
//! A BSEC passes a bit unchanged with probability `r`, erases it (emits
//! 0.5) with probability `d`, and flips it with probability `mu`. The
//! closed forms in [`analytic_params`] tie the three probabilities to a
//! QAM order, an SNR and an erasure-band offset; [`erasure_from_mu`] is the
//! same relation specialised to 4-QAM with `a = 0.5`, which is the
//! reference link assumed while training.

use crate::constellation::ModOrder;
use crate::demod::Trit;
use crate::error::{Error, Result};
use crate::numerics::{q_inverse, q_unchecked, RandomSource};

const SUM_TOL: f64 = 1e-12;

/// Flip / erasure / correct probabilities of one BSEC.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BsecParams {
    pub mu: f64,
    pub d: f64,
    pub r: f64,
}

impl BsecParams {
    /// The noiseless channel.
    pub const CLEAN: BsecParams = BsecParams {
        mu: 0.0,
        d: 0.0,
        r: 1.0,
    };

    pub fn new(mu: f64, d: f64, r: f64) -> Result<Self> {
        let p = BsecParams { mu, d, r };
        p.validate()?;
        Ok(p)
    }

    /// From flip and erasure probabilities; `r` is the remainder.
    pub fn from_flip_erasure(mu: f64, d: f64) -> Result<Self> {
        Self::new(mu, d, 1.0 - mu - d)
    }

    /// Binary symmetric channel with flip probability `mu`.
    pub fn bsc(mu: f64) -> Result<Self> {
        Self::from_flip_erasure(mu, 0.0)
    }

    /// Binary erasure channel with erasure probability `d`.
    pub fn bec(d: f64) -> Result<Self> {
        Self::from_flip_erasure(0.0, d)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu", self.mu), ("d", self.d), ("r", self.r)] {
            if !(-SUM_TOL..=1.0 + SUM_TOL).contains(&v) {
                return Err(Error::domain(format!("BSEC probability {name} = {v} outside [0, 1]")));
            }
        }
        let total = self.mu + self.d + self.r;
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::domain(format!("BSEC probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Output law `[P(0), P(0.5), P(1)]` given input bit `b`.
    pub fn law(&self, b: u8) -> [f64; 3] {
        if b == 0 {
            [self.r, self.d, self.mu]
        } else {
            [self.mu, self.d, self.r]
        }
    }
}

/// One use of the channel.
pub fn bsec_transition(b: u8, p: &BsecParams, rng: &mut RandomSource) -> Trit {
    let u = rng.unit();
    if u < p.r {
        Trit::from_bit(b)
    } else if u < p.r + p.d {
        Trit::Half
    } else {
        Trit::from_bit(b ^ 1)
    }
}

/// Per-bit robustness levels `alpha_i` and erasure-band offsets `a_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessProfile {
    alphas: Vec<f64>,
    a_offsets: Vec<f64>,
}

impl RobustnessProfile {
    pub fn new(alphas: Vec<f64>, a_offsets: Vec<f64>) -> Result<Self> {
        if alphas.len() != a_offsets.len() {
            return Err(Error::config(format!(
                "profile has {} alphas but {} offsets",
                alphas.len(),
                a_offsets.len()
            )));
        }
        if alphas.is_empty() {
            return Err(Error::config("profile must cover at least one bit"));
        }
        if let Some(a) = alphas.iter().find(|a| !(0.0..=0.5).contains(*a)) {
            return Err(Error::config(format!("robustness level {a} outside [0, 0.5]")));
        }
        if let Some(a) = a_offsets.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::config(format!("boundary offset {a} outside [0, 1]")));
        }
        Ok(Self { alphas, a_offsets })
    }

    /// Same `alpha` and `a` for all `n` bits.
    pub fn uniform(n: usize, alpha: f64, a: f64) -> Result<Self> {
        Self::new(vec![alpha; n], vec![a; n])
    }

    /// `alpha_i` rising linearly from `alpha_first` (bit 1) to `alpha_last` (bit N).
    pub fn linear(n: usize, alpha_first: f64, alpha_last: f64, a: f64) -> Result<Self> {
        let alphas = (0..n)
            .map(|i| {
                if n == 1 {
                    alpha_first
                } else {
                    (alpha_last - alpha_first) / (n - 1) as f64 * i as f64 + alpha_first
                }
            })
            .collect();
        Self::new(alphas, vec![a; n])
    }

    /// The heterogeneous setting: `alpha` from 0.29 to 0.45, `a = 0.5`.
    pub fn heterogeneous(n: usize) -> Self {
        Self::linear(n, 0.29, 0.45, 0.5).expect("constant profile is valid")
    }

    /// The homogeneous setting: `alpha = 0.4`, `a = 0.5`.
    pub fn homogeneous(n: usize) -> Self {
        Self::uniform(n, 0.4, 0.5).expect("constant profile is valid")
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn a_offsets(&self) -> &[f64] {
        &self.a_offsets
    }

    /// Parses line-oriented `index,alpha,a` records; blank lines and `#`
    /// comments are skipped, as is a leading header line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<(usize, f64, f64)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::config(format!(
                    "profile line {}: expected `index,alpha,a`, got {line:?}",
                    lineno + 1
                )));
            }
            let parsed = (
                fields[0].parse::<usize>(),
                fields[1].parse::<f64>(),
                fields[2].parse::<f64>(),
            );
            match parsed {
                (Ok(i), Ok(alpha), Ok(a)) => rows.push((i, alpha, a)),
                _ if rows.is_empty() && fields[0].parse::<f64>().is_err() => continue, // header
                _ => {
                    return Err(Error::config(format!(
                        "profile line {}: cannot parse {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        rows.sort_by_key(|r| r.0);
        let base = rows.first().map_or(0, |r| r.0);
        for (k, row) in rows.iter().enumerate() {
            if row.0 != base + k {
                return Err(Error::config(format!(
                    "profile indices must be consecutive; found {} after {}",
                    row.0,
                    base + k - 1
                )));
            }
        }
        Self::new(rows.iter().map(|r| r.1).collect(), rows.iter().map(|r| r.2).collect())
    }

    /// Serializes in the format read by [`RobustnessProfile::parse`], 1-based.
    pub fn to_text(&self) -> String {
        let mut s = String::from("index,alpha,a\n");
        for (i, (alpha, a)) in self.alphas.iter().zip(&self.a_offsets).enumerate() {
            s.push_str(&format!("{},{},{}\n", i + 1, alpha, a));
        }
        s
    }
}

/// `mu ~ Uniform[0, alpha]`.
pub fn sample_mu(alpha: f64, rng: &mut RandomSource) -> Result<f64> {
    if !(0.0..=0.5).contains(&alpha) {
        return Err(Error::domain(format!("robustness level {alpha} outside [0, 0.5]")));
    }
    rng.uniform(0.0, alpha)
}

/// Erasure probability that accompanies flip probability `mu` on the
/// reference 4-QAM link with `a = 0.5`: `Q(Q^-1(mu) / 3) - mu`.
pub fn erasure_from_mu(mu: f64) -> Result<f64> {
    if mu == 0.0 {
        return Ok(0.0);
    }
    if !(mu > 0.0 && mu < 0.5) {
        return Err(Error::domain(format!("flip probability {mu} outside [0, 0.5)")));
    }
    Ok(q_unchecked(q_inverse(mu)? / 3.0) - mu)
}

/// `(4/M)(1 - 1/sqrt(2^M))`: average number of nearest neighbours per bit.
pub(crate) fn neighbour_factor(order: ModOrder) -> f64 {
    let m = order.bits() as f64;
    4.0 / m * (1.0 - 1.0 / (order.size() as f64).sqrt())
}

/// Closed-form BSEC parameters of `order` at `snr` with offset `a`.
pub fn analytic_params(order: ModOrder, snr: f64, a: f64) -> Result<BsecParams> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::domain(format!("SNR {snr} must be positive")));
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::domain(format!("boundary offset {a} outside [0, 1]")));
    }
    let factor = neighbour_factor(order);
    let scale = (3.0 * snr / (order.size() as f64 - 1.0)).sqrt();
    let mu = factor * q_unchecked((1.0 + a) * scale);
    let r = 1.0 - factor * q_unchecked((1.0 - a) * scale);
    let d = if a == 0.0 { 0.0 } else { 1.0 - mu - r };
    if !(mu >= 0.0 && d >= 0.0 && r >= 0.0 && mu + d <= 1.0) {
        return Err(Error::ApproximationBreakdown(format!(
            "{order} at SNR {snr}, a = {a}: mu = {mu}, d = {d}, r = {r}"
        )));
    }
    Ok(BsecParams { mu, d, r })
}

/// Draws one BSEC per bit: `mu_i ~ Uniform[0, alpha_i]`, then `d_i` from
/// [`erasure_from_mu`].
pub fn sample_profile_params(profile: &RobustnessProfile, rng: &mut RandomSource) -> Vec<BsecParams> {
    let mut out = Vec::with_capacity(profile.len());
    sample_profile_params_into(profile, rng, &mut out);
    out
}

pub(crate) fn sample_profile_params_into(
    profile: &RobustnessProfile,
    rng: &mut RandomSource,
    out: &mut Vec<BsecParams>,
) {
    out.clear();
    for &alpha in profile.alphas() {
        let mu = if alpha == 0.0 { 0.0 } else { alpha * rng.unit() };
        let d = erasure_from_mu(mu).expect("profile alphas are validated to [0, 0.5]");
        out.push(BsecParams { mu, d, r: 1.0 - mu - d });
    }
}
