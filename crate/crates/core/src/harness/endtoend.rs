use crate::adaptmod::{plan_assignment, BetaAdjusters, ModPlan};
use crate::bsec::RobustnessProfile;
use crate::channel::{draw_channel, equalize, transmit, ChannelDistribution};
use crate::constellation::{Constellation, ModOrder};
use crate::demod::{build_regions, DecisionRegions};
use crate::error::{Error, Result};
use crate::jscc::{argmax, sample_latent_bits, JsccModels};
use crate::numerics::RandomSource;

use super::dataset::Dataset;
use super::link::TritCounts;

/// How latent bits are assigned to modulation orders.
#[derive(Clone, Debug, PartialEq)]
pub enum Modulation {
    /// Per-bit order from the thresholds at the current SNR.
    Adaptive(BetaAdjusters),
    Fixed(ModOrder),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EndToEndConfig {
    pub channel: ChannelDistribution,
    pub profile: RobustnessProfile,
    pub modulation: Modulation,
    /// Images sent per channel realization.
    pub block_len: usize,
}

impl EndToEndConfig {
    pub fn new(channel: ChannelDistribution, profile: RobustnessProfile, modulation: Modulation) -> Self {
        Self {
            channel,
            profile,
            modulation,
            block_len: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndToEndMetrics {
    pub accuracy: f64,
    /// Mean squared reconstruction error per feature.
    pub mse: f64,
    /// Latent bits sent per channel symbol, over the whole run.
    pub spectral_efficiency: f64,
    pub flip_rate: f64,
    pub erasure_rate: f64,
    pub examples: usize,
    pub symbols: usize,
    pub channel_draws: usize,
}

/// One symbol of a plan: where its bits come from and how to demodulate it.
struct SymbolSlot {
    constellation_index: usize,
    /// Latent bit index per label position; `None` marks padding.
    bits: Vec<Option<usize>>,
    regions: DecisionRegions,
}

fn layout(plan: &ModPlan, profile: &RobustnessProfile, constellations: &[Constellation]) -> Result<Vec<SymbolSlot>> {
    let mut slots = Vec::with_capacity(plan.symbol_count);
    for g in &plan.groups {
        let m = g.order.bits();
        let ci = ModOrder::ALL.iter().position(|&o| o == g.order).expect("known order");
        for s in 0..g.symbols() {
            let bits: Vec<Option<usize>> = (0..m).map(|k| g.bits.get(s * m + k).copied()).collect();
            let offsets: Vec<f64> = bits.iter().map(|b| b.map_or(0.0, |i| profile.a_offsets()[i])).collect();
            slots.push(SymbolSlot {
                constellation_index: ci,
                regions: build_regions(&constellations[ci], &offsets)?,
                bits,
            });
        }
    }
    Ok(slots)
}

/// Sends every example of `data` over the simulated link and scores the
/// decoder and classifier on what arrives.
///
/// Per example: encode, draw Bernoulli latent bits, pack them into symbols
/// according to the plan (zero padding at the end of each group), transmit,
/// equalize, demodulate with each bit's own offset, decode and classify.
/// Both ends derive the plan from the drawn SNR, which is redrawn every
/// `block_len` examples.
pub fn run_end_to_end(
    models: &JsccModels,
    config: &EndToEndConfig,
    data: &Dataset,
    rng: &mut RandomSource,
) -> Result<EndToEndMetrics> {
    let n = models.latent_bits();
    if config.profile.len() != n {
        return Err(Error::config(format!(
            "profile covers {} bits but the encoder emits {n}",
            config.profile.len()
        )));
    }
    if data.feature_dim() != models.input_dim() {
        return Err(Error::config(format!(
            "data has {} features but the encoder expects {}",
            data.feature_dim(),
            models.input_dim()
        )));
    }
    if config.block_len == 0 {
        return Err(Error::config("block_len must be positive"));
    }
    if data.is_empty() {
        return Err(Error::config("evaluation set is empty"));
    }
    config.channel.validate()?;
    let constellations: Vec<Constellation> = ModOrder::ALL.iter().map(|&o| Constellation::new(o)).collect();

    let mut counts = TritCounts::default();
    let (mut correct, mut se_sum, mut symbols, mut draws) = (0usize, 0.0, 0usize, 0usize);
    let mut latent = vec![0.0; n];
    let mut x = Vec::new();
    let mut trits = Vec::new();
    let mut word_bits = Vec::new();

    for block in (0..data.len()).collect::<Vec<_>>().chunks(config.block_len) {
        let ch = draw_channel(&config.channel, rng)?;
        draws += 1;
        let plan = match &config.modulation {
            Modulation::Adaptive(betas) => plan_assignment(ch.snr(), &config.profile, betas)?,
            Modulation::Fixed(order) => ModPlan::fixed(*order, n),
        };
        let slots = layout(&plan, &config.profile, &constellations)?;

        for &i in block {
            let u = data.feature(i);
            let f = models.encoder.forward(u)?;
            let bits = sample_latent_bits(&f, rng);
            x.clear();
            for slot in &slots {
                word_bits.clear();
                word_bits.extend(slot.bits.iter().map(|b| b.map_or(0, |i| bits[i])));
                x.push(constellations[slot.constellation_index].map_bits(&word_bits)?);
            }
            let y = equalize(&transmit(&x, &ch, rng), ch.h)?;
            for (slot, &yy) in slots.iter().zip(&y) {
                trits.clear();
                slot.regions.demod_sample(yy, &mut trits);
                for (b, &t) in slot.bits.iter().zip(&trits) {
                    if let Some(i) = *b {
                        latent[i] = t.value();
                        counts.record(bits[i], t);
                    }
                }
            }
            symbols += slots.len();
            let (u_hat, logits) = models.decode(&latent)?;
            se_sum += u.iter().zip(&u_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / u.len() as f64;
            correct += usize::from(argmax(&logits) == data.label(i));
        }
    }

    let examples = data.len();
    let rates = counts.params();
    Ok(EndToEndMetrics {
        accuracy: correct as f64 / examples as f64,
        mse: se_sum / examples as f64,
        spectral_efficiency: (examples * n) as f64 / symbols as f64,
        flip_rate: rates.mu,
        erasure_rate: rates.d,
        examples,
        symbols,
        channel_draws: draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsec::BsecParams;
    use crate::harness::synth_dataset;
    use crate::jscc::{evaluate, train, Architecture, TrainingConfig};

    fn trained(latent: usize) -> (JsccModels, Dataset) {
        let mut rng = RandomSource::new(21);
        let data = synth_dataset(4, 10, 40, 0.3, &mut rng).unwrap();
        let arch = Architecture {
            latent_bits: latent,
            encoder_hidden: vec![16],
            decoder_hidden: vec![16],
            classifier_hidden: vec![16],
        };
        let mut cfg = TrainingConfig::new(RobustnessProfile::uniform(latent, 0.0, 0.0).unwrap());
        cfg.epochs = 10;
        cfg.warmup_epochs = 10;
        cfg.batch_size = 8;
        cfg.learning_rate = 3e-3;
        (train(&data, &arch, &cfg).unwrap().models, data)
    }

    #[test]
    fn noiseless_link_matches_clean_inference() {
        let (models, data) = trained(12);
        let profile = RobustnessProfile::uniform(12, 0.3, 0.0).unwrap();
        let cfg = EndToEndConfig::new(
            ChannelDistribution::fixed_snr(1e12),
            profile,
            Modulation::Fixed(ModOrder::Qam16),
        );
        let link = run_end_to_end(&models, &cfg, &data, &mut RandomSource::new(1)).unwrap();
        let clean = evaluate(&models, &data, &[BsecParams::CLEAN; 12], &mut RandomSource::new(1)).unwrap();
        assert_eq!(link.flip_rate, 0.0);
        assert_eq!(link.erasure_rate, 0.0);
        // identical up to the Bernoulli draws of the latent bits
        assert!((link.accuracy - clean.accuracy).abs() < 0.05);
        assert!((link.mse - clean.mse).abs() < 0.1 * clean.mse);
        assert_eq!(link.spectral_efficiency, 4.0);
    }

    #[test]
    fn high_snr_adaptive_saturates() {
        let (models, data) = trained(96);
        let profile = RobustnessProfile::heterogeneous(96);
        let dist = ChannelDistribution::fixed_snr(25.0); // sqrt(snr) = 5 above every tau6
        let adaptive = EndToEndConfig::new(
            dist,
            profile.clone(),
            Modulation::Adaptive(BetaAdjusters::heterogeneous()),
        );
        let fixed = EndToEndConfig::new(dist, profile, Modulation::Fixed(ModOrder::Qam4));
        let a = run_end_to_end(&models, &adaptive, &data, &mut RandomSource::new(2)).unwrap();
        let f = run_end_to_end(&models, &fixed, &data, &mut RandomSource::new(2)).unwrap();
        assert_eq!(a.spectral_efficiency, 6.0);
        assert_eq!(f.spectral_efficiency, 2.0);
        assert!(
            (a.accuracy - f.accuracy).abs() < 0.1,
            "{} vs {}",
            a.accuracy,
            f.accuracy
        );
    }

    #[test]
    fn redraw_cadence_and_padding() {
        let (models, data) = trained(10);
        let profile = RobustnessProfile::uniform(10, 0.3, 0.5).unwrap();
        let mut cfg = EndToEndConfig::new(
            ChannelDistribution::uniform_magnitude(0.37, 2.5),
            profile,
            Modulation::Fixed(ModOrder::Qam64),
        );
        cfg.block_len = 7;
        let m = run_end_to_end(&models, &cfg, &data, &mut RandomSource::new(3)).unwrap();
        assert_eq!(m.channel_draws, data.len().div_ceil(7));
        // 10 bits need two 64-QAM symbols
        assert_eq!(m.symbols, 2 * data.len());
        assert_eq!(m.spectral_efficiency, 5.0);
    }

    #[test]
    fn mismatched_profile() {
        let (models, data) = trained(10);
        let cfg = EndToEndConfig::new(
            ChannelDistribution::fixed_snr(1.0),
            RobustnessProfile::homogeneous(12),
            Modulation::Fixed(ModOrder::Qam4),
        );
        assert!(matches!(
            run_end_to_end(&models, &cfg, &data, &mut RandomSource::new(4)),
            Err(Error::Config(_))
        ));
    }
}
