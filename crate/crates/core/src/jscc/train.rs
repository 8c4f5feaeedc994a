use crate::bsec::{bsec_transition, sample_profile_params_into, BsecParams, RobustnessProfile};
use crate::error::{Error, Result};
use crate::harness::Dataset;
use crate::numerics::RandomSource;

use super::{
    adam_step, argmax, backward_with_bypass, noisy_latent_sample, sample_latent_bits, AdamState, Architecture,
    ForwardPass, JsccModels,
};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    /// Leading epochs trained through a noiseless latent channel.
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight of the reconstruction term in `lambda * mse + ce`.
    pub lambda: f64,
    pub profile: RobustnessProfile,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl TrainingConfig {
    /// 20 epochs with 5 warm-up, batches of 32, learning rate 0.001,
    /// `lambda = 0.2`, standard Adam constants, seed 0.
    pub fn new(profile: RobustnessProfile) -> Self {
        Self {
            epochs: 20,
            warmup_epochs: 5,
            batch_size: 32,
            learning_rate: 1e-3,
            lambda: 0.2,
            profile,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }

    pub fn validate(&self, latent_bits: usize) -> Result<()> {
        if self.warmup_epochs > self.epochs {
            return Err(Error::config(format!(
                "warmup_epochs ({}) exceeds epochs ({})",
                self.warmup_epochs, self.epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda = {} must be >= 0", self.lambda)));
        }
        if self.profile.len() != latent_bits {
            return Err(Error::config(format!(
                "profile covers {} bits but the encoder emits {latent_bits}",
                self.profile.len()
            )));
        }
        Ok(())
    }
}

/// Averages over one epoch of training examples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub warmup: bool,
    pub loss: f64,
    /// Mean squared reconstruction error per feature.
    pub mse: f64,
    pub ce: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModels {
    pub models: JsccModels,
    pub history: Vec<EpochMetrics>,
}

/// Initialises models from `config.seed` and trains them.
pub fn train(data: &Dataset, arch: &Architecture, config: &TrainingConfig) -> Result<TrainedModels> {
    let mut init = RandomSource::new(config.seed).fork(0);
    let models = JsccModels::random(data.feature_dim(), data.n_classes(), arch, &mut init)?;
    train_models(models, data, config)
}

/// Trains existing models. Warm-up epochs use a clean latent channel; later
/// epochs draw fresh BSEC parameters for every example and bit.
pub fn train_models(mut models: JsccModels, data: &Dataset, config: &TrainingConfig) -> Result<TrainedModels> {
    config.validate(models.latent_bits())?;
    if data.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    if data.feature_dim() != models.input_dim() {
        return Err(Error::Shape {
            expected: models.input_dim(),
            actual: data.feature_dim(),
        });
    }
    if data.n_classes() > models.n_classes() {
        return Err(Error::config(format!(
            "dataset has {} classes but the classifier has {} outputs",
            data.n_classes(),
            models.n_classes()
        )));
    }

    let mut rng = RandomSource::new(config.seed).fork(1);
    let new_state = |m| AdamState::new(m, config.adam_beta1, config.adam_beta2, config.adam_eps);
    let mut opt = [
        new_state(&models.encoder)?,
        new_state(&models.decoder)?,
        new_state(&models.classifier)?,
    ];
    let n_bits = models.latent_bits();
    let dim = data.feature_dim() as f64;
    let mut params = vec![BsecParams::CLEAN; n_bits];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let warmup = epoch <= config.warmup_epochs;
        if warmup {
            params.fill(BsecParams::CLEAN);
        }
        shuffle(&mut order, &mut rng);
        let (mut loss_sum, mut mse_sum, mut ce_sum, mut correct) = (0.0, 0.0, 0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            models.zero_grad();
            for &i in batch {
                if !warmup {
                    sample_profile_params_into(&config.profile, &mut rng, &mut params);
                }
                let u = data.feature(i);
                let label = data.label(i);
                let pass = ForwardPass::run(&models, u, |f| {
                    Ok(f.iter()
                        .zip(&params)
                        .map(|(&fi, p)| noisy_latent_sample(fi, p, &mut rng).value())
                        .collect())
                })?;
                let loss = backward_with_bypass(&mut models, &pass, u, label, config.lambda)?;
                if !loss.total.is_finite() {
                    return Err(Error::TrainingDiverged { epoch });
                }
                loss_sum += loss.total;
                mse_sum += loss.mse / dim;
                ce_sum += loss.ce;
                correct += usize::from(argmax(pass.logits()) == label);
            }
            let scale = 1.0 / batch.len() as f64;
            for (model, state) in [&mut models.encoder, &mut models.decoder, &mut models.classifier]
                .into_iter()
                .zip(opt.iter_mut())
            {
                model.scale_grad(scale);
                adam_step(model, state, config.learning_rate)?;
            }
        }
        let n = data.len() as f64;
        history.push(EpochMetrics {
            epoch,
            warmup,
            loss: loss_sum / n,
            mse: mse_sum / n,
            ce: ce_sum / n,
            accuracy: correct as f64 / n,
        });
    }
    Ok(TrainedModels { models, history })
}

fn shuffle(v: &mut [usize], rng: &mut RandomSource) {
    for i in (1..v.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        v.swap(i, j);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalMetrics {
    pub accuracy: f64,
    /// Mean squared reconstruction error per feature.
    pub mse: f64,
    pub examples: usize,
}

/// Test-time inference: Bernoulli latent bits, each passed through its own
/// BSEC from `params`, then decoding and classification.
pub fn evaluate(
    models: &JsccModels,
    data: &Dataset,
    params: &[BsecParams],
    rng: &mut RandomSource,
) -> Result<EvalMetrics> {
    if params.len() != models.latent_bits() {
        return Err(Error::Shape {
            expected: models.latent_bits(),
            actual: params.len(),
        });
    }
    if data.is_empty() {
        return Err(Error::config("evaluation set is empty"));
    }
    let (mut correct, mut se) = (0usize, 0.0);
    let mut latent = Vec::with_capacity(params.len());
    for i in 0..data.len() {
        let u = data.feature(i);
        let f = models.encoder.forward(u)?;
        latent.clear();
        for (b, p) in sample_latent_bits(&f, rng).into_iter().zip(params) {
            latent.push(bsec_transition(b, p, rng).value());
        }
        let (u_hat, logits) = models.decode(&latent)?;
        se += u.iter().zip(&u_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / u.len() as f64;
        correct += usize::from(argmax(&logits) == data.label(i));
    }
    let n = data.len();
    Ok(EvalMetrics {
        accuracy: correct as f64 / n as f64,
        mse: se / n as f64,
        examples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth_dataset;

    fn toy() -> Dataset {
        let mut rng = RandomSource::new(11);
        synth_dataset(4, 12, 30, 0.3, &mut rng).unwrap()
    }

    fn arch() -> Architecture {
        Architecture {
            latent_bits: 8,
            encoder_hidden: vec![16],
            decoder_hidden: vec![16],
            classifier_hidden: vec![16],
        }
    }

    fn config(alpha: f64, epochs: usize, warmup: usize) -> TrainingConfig {
        let mut c = TrainingConfig::new(RobustnessProfile::uniform(8, alpha, 0.5).unwrap());
        c.epochs = epochs;
        c.warmup_epochs = warmup;
        c.batch_size = 8;
        c.learning_rate = 3e-3;
        c.seed = 5;
        c
    }

    #[test]
    fn loss_decreases() {
        let out = train(&toy(), &arch(), &config(0.4, 5, 2)).unwrap();
        assert_eq!(out.history.len(), 5);
        assert!(out.history[4].loss < out.history[0].loss);
        assert!(out.history[0].warmup && out.history[1].warmup && !out.history[2].warmup);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = train(&toy(), &arch(), &config(0.3, 3, 1)).unwrap();
        let b = train(&toy(), &arch(), &config(0.3, 3, 1)).unwrap();
        assert_eq!(a, b);
        let mut other = config(0.3, 3, 1);
        other.seed = 6;
        assert_ne!(train(&toy(), &arch(), &other).unwrap().history, a.history);
    }

    #[test]
    fn zero_alpha_matches_warmup() {
        let a = train(&toy(), &arch(), &config(0.0, 4, 4)).unwrap();
        let b = train(&toy(), &arch(), &config(0.0, 4, 1)).unwrap();
        assert_eq!(a.models, b.models);
        for (x, y) in a.history.iter().zip(&b.history) {
            assert_eq!((x.loss, x.accuracy), (y.loss, y.accuracy));
        }
    }

    #[test]
    fn config_validation() {
        let data = toy();
        assert!(train(&data, &arch(), &config(0.4, 2, 3)).is_err());
        let mut c = config(0.4, 2, 1);
        c.lambda = -0.1;
        assert!(train(&data, &arch(), &c).is_err());
        let mut c = config(0.4, 2, 1);
        c.profile = RobustnessProfile::homogeneous(5);
        assert!(matches!(train(&data, &arch(), &c), Err(Error::Config(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let mut c = config(0.0, 3, 3);
        c.learning_rate = 1e300;
        c.lambda = 1e300;
        match train(&toy(), &arch(), &c) {
            Err(Error::TrainingDiverged { epoch }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn evaluate_clean_and_noisy() {
        let data = toy();
        let out = train(&data, &arch(), &config(0.0, 15, 15)).unwrap();
        let mut rng = RandomSource::new(1);
        let clean = evaluate(&out.models, &data, &[BsecParams::CLEAN; 8], &mut rng).unwrap();
        assert!(clean.accuracy > 0.8, "{clean:?}");
        let erased = evaluate(&out.models, &data, &[BsecParams::bec(1.0).unwrap(); 8], &mut rng).unwrap();
        assert!(erased.accuracy < clean.accuracy);
        assert!(evaluate(&out.models, &data, &[BsecParams::CLEAN; 3], &mut rng).is_err());
    }
}
