use rayon::prelude::*;

use crate::bsec::{bsec_transition, BsecParams};
use crate::channel::{equalize, transmit, ChannelRealization};
use crate::constellation::{Constellation, ModOrder};
use crate::demod::{build_regions, Trit};
use crate::error::{Error, Result};
use crate::numerics::RandomSource;

/// Symbols simulated per parallel work item; results do not depend on the
/// thread count because each chunk owns a forked random stream.
const CHUNK_SYMBOLS: usize = 1 << 14;

/// Minimum bit count for a link campaign.
pub const MIN_LINK_BITS: usize = 10_000;

/// Outcome counts of a link campaign, relative to the transmitted bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TritCounts {
    pub correct: u64,
    pub erased: u64,
    pub flipped: u64,
}

impl TritCounts {
    pub fn total(&self) -> u64 {
        self.correct + self.erased + self.flipped
    }

    pub fn as_array(&self) -> [u64; 3] {
        [self.correct, self.erased, self.flipped]
    }

    pub fn record(&mut self, sent: u8, got: Trit) {
        match got {
            Trit::Half => self.erased += 1,
            t if t == Trit::from_bit(sent) => self.correct += 1,
            _ => self.flipped += 1,
        }
    }

    fn merge(mut self, other: TritCounts) -> TritCounts {
        self.correct += other.correct;
        self.erased += other.erased;
        self.flipped += other.flipped;
        self
    }

    /// Empirical `(mu, d, r)`.
    pub fn params(&self) -> BsecParams {
        let n = self.total().max(1) as f64;
        BsecParams {
            mu: self.flipped as f64 / n,
            d: self.erased as f64 / n,
            r: self.correct as f64 / n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkStats {
    pub counts: TritCounts,
    /// Flip rate; erasures are not counted as errors.
    pub ber: f64,
    pub params: BsecParams,
}

impl From<TritCounts> for LinkStats {
    fn from(counts: TritCounts) -> Self {
        let params = counts.params();
        LinkStats {
            counts,
            ber: params.mu,
            params,
        }
    }
}

/// Uniform random bits through `order` at `snr_db` with offset `a` on every
/// bit; at least `n_bits` bits, rounded up to whole symbols.
pub fn run_link_montecarlo(
    order: ModOrder,
    snr_db: f64,
    a: f64,
    n_bits: usize,
    rng: &mut RandomSource,
) -> Result<LinkStats> {
    if !snr_db.is_finite() {
        return Err(Error::domain(format!("SNR {snr_db} dB must be finite")));
    }
    let ch = ChannelRealization::with_snr(10f64.powf(snr_db / 10.0))?;
    run_link_with_channel(order, &ch, a, n_bits, rng)
}

/// As [`run_link_montecarlo`] over a given channel realization.
pub fn run_link_with_channel(
    order: ModOrder,
    ch: &ChannelRealization,
    a: f64,
    n_bits: usize,
    rng: &mut RandomSource,
) -> Result<LinkStats> {
    if n_bits < MIN_LINK_BITS {
        return Err(Error::domain(format!(
            "link campaigns need at least {MIN_LINK_BITS} bits, got {n_bits}"
        )));
    }
    let c = Constellation::new(order);
    let m = order.bits();
    let regions = build_regions(&c, &vec![a; m])?;
    if ch.h.norm_sqr() == 0.0 {
        return Err(Error::SingularChannel);
    }
    let n_symbols = n_bits.div_ceil(m);
    let n_chunks = n_symbols.div_ceil(CHUNK_SYMBOLS);
    let base = rng.split();
    let counts = (0..n_chunks)
        .into_par_iter()
        .map(|k| {
            let mut local = base.fork(k as u64);
            let len = CHUNK_SYMBOLS.min(n_symbols - k * CHUNK_SYMBOLS);
            let words: Vec<u32> = (0..len)
                .map(|_| (local.next_u64() >> 40) as u32 % order.size() as u32)
                .collect();
            let x: Vec<_> = words.iter().map(|&w| c.map_word(w)).collect();
            let y = equalize(&transmit(&x, ch, &mut local), ch.h).expect("nonzero channel");
            let mut out = Vec::with_capacity(m);
            let mut counts = TritCounts::default();
            for (&w, &yy) in words.iter().zip(&y) {
                out.clear();
                regions.demod_sample(yy, &mut out);
                for (i, &t) in out.iter().enumerate() {
                    counts.record(c.label_bit(w, i), t);
                }
            }
            counts
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(TritCounts::default(), TritCounts::merge);
    Ok(counts.into())
}

/// `n_bits` uniform bits through the BSEC `p`.
pub fn run_bsec_montecarlo(p: &BsecParams, n_bits: usize, rng: &mut RandomSource) -> Result<LinkStats> {
    p.validate()?;
    let mut counts = TritCounts::default();
    for _ in 0..n_bits {
        let b = u8::from(rng.chance(0.5));
        counts.record(b, bsec_transition(b, p, rng));
    }
    Ok(counts.into())
}

/// Pearson chi-square test that two samples of trit outcomes come from the
/// same law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Homogeneity test on the 2 x 3 table of outcome counts. Empty columns
/// are dropped; with two remaining degrees of freedom the p-value is
/// `exp(-x / 2)`, with one it is `erfc(sqrt(x / 2))`.
pub fn trit_chi_square(a: &TritCounts, b: &TritCounts) -> Result<ChiSquare> {
    let (ra, rb) = (a.total() as f64, b.total() as f64);
    if ra == 0.0 || rb == 0.0 {
        return Err(Error::domain("chi-square test needs two nonempty samples"));
    }
    let n = ra + rb;
    let mut statistic = 0.0;
    let mut columns = 0usize;
    for (&x, &y) in a.as_array().iter().zip(&b.as_array()) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        columns += 1;
        for (obs, row) in [(x as f64, ra), (y as f64, rb)] {
            let expected = row * col / n;
            statistic += (obs - expected) * (obs - expected) / expected;
        }
    }
    let dof = columns.saturating_sub(1);
    let p_value = match dof {
        0 => 1.0,
        1 => libm::erfc((statistic / 2.0).sqrt()),
        _ => (-statistic / 2.0).exp(),
    };
    Ok(ChiSquare {
        statistic,
        dof,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsec::analytic_params;
    use crate::numerics::q_function;
    use num_complex::Complex64;

    #[test]
    fn qpsk_flip_rate_matches_q1() {
        let mut rng = RandomSource::new(1);
        let s = run_link_montecarlo(ModOrder::Qam4, 0.0, 0.0, 1_000_000, &mut rng).unwrap();
        let p = q_function(1.0).unwrap();
        let sigma = (p * (1.0 - p) / s.counts.total() as f64).sqrt();
        assert!((s.ber - p).abs() < 3.0 * sigma, "{}", s.ber);
        assert_eq!(s.counts.erased, 0);
    }

    #[test]
    fn qpsk_erasure_band() {
        let mut rng = RandomSource::new(2);
        let s = run_link_montecarlo(ModOrder::Qam4, 0.0, 0.5, 1_000_000, &mut rng).unwrap();
        let n = s.counts.total() as f64;
        let mu = q_function(1.5).unwrap();
        let d = q_function(0.5).unwrap() - mu;
        assert!((s.params.mu - mu).abs() < 3.0 * (mu * (1.0 - mu) / n).sqrt());
        assert!((s.params.d - d).abs() < 3.0 * (d * (1.0 - d) / n).sqrt());
    }

    #[test]
    fn noiseless_link_is_perfect() {
        let mut rng = RandomSource::new(3);
        for order in ModOrder::ALL {
            let ch = ChannelRealization::new(Complex64::from_polar(0.8, 1.1), 0.0).unwrap();
            let s = run_link_with_channel(order, &ch, 0.5, 20_000, &mut rng).unwrap();
            assert_eq!((s.counts.flipped, s.counts.erased), (0, 0));
        }
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let run = || run_link_montecarlo(ModOrder::Qam16, 3.0, 0.3, 100_000, &mut RandomSource::new(4)).unwrap();
        let a = run();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_small_campaigns() {
        let mut rng = RandomSource::new(5);
        assert!(run_link_montecarlo(ModOrder::Qam4, 0.0, 0.0, 100, &mut rng).is_err());
        assert!(run_link_montecarlo(ModOrder::Qam4, 0.0, 1.5, 20_000, &mut rng).is_err());
    }

    #[test]
    fn chi_square_known_values() {
        let a = TritCounts {
            correct: 50,
            erased: 30,
            flipped: 20,
        };
        let b = TritCounts {
            correct: 30,
            erased: 30,
            flipped: 40,
        };
        // hand computation: column totals 80, 60, 60 over 200
        let c = trit_chi_square(&a, &b).unwrap();
        let expected = 2.0 * (100.0 / 40.0) + 0.0 + 2.0 * (100.0 / 30.0);
        assert!((c.statistic - expected).abs() < 1e-12);
        assert_eq!(c.dof, 2);
        assert!((c.p_value - (-expected / 2.0).exp()).abs() < 1e-15);
        let same = trit_chi_square(&a, &a).unwrap();
        assert_eq!((same.statistic, same.p_value), (0.0, 1.0));
    }

    #[test]
    fn bsec_matches_real_link() {
        let snr = 1.0;
        let mut rng = RandomSource::new(6);
        let link = run_link_montecarlo(ModOrder::Qam4, 0.0, 0.5, 100_000, &mut rng).unwrap();
        let p = analytic_params(ModOrder::Qam4, snr, 0.5).unwrap();
        let sampled = run_bsec_montecarlo(&p, 100_000, &mut rng).unwrap();
        let c = trit_chi_square(&link.counts, &sampled.counts).unwrap();
        assert!(c.p_value > 0.01, "{c:?}");
    }
}
