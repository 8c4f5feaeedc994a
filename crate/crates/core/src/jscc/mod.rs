//! Dense JSCC encoder, decoder and classifier trained through sampled BSECs.
//!
//! The encoder ends in a sigmoid, so output `i` is the probability that
//! latent bit `i` is 1. At training time the bit draw and the BSEC are
//! marginalised into one three-point law ([`latent_law`]); the decoder sees
//! trits in `{0, 0.5, 1}`. Sampling has no useful derivative, so
//! [`backward_with_bypass`] hands the gradient at the decoder input
//! straight to the encoder output.

mod adam;
mod loss;
mod model;
mod persist;
mod train;

pub use adam::{adam_step, AdamState};
pub use loss::{argmax, ce_loss, combined_loss, mse_loss, CombinedLoss};
pub use model::{Activation, DenseModel, ForwardCache, Layer};
pub use persist::{
    load_bundle, load_model, read_bundle, read_model, save_bundle, save_model, write_bundle, write_model,
};
pub use train::{evaluate, train, train_models, EpochMetrics, EvalMetrics, TrainedModels, TrainingConfig};

use crate::bsec::BsecParams;
use crate::demod::Trit;
use crate::error::{Error, Result};
use crate::numerics::RandomSource;

/// Hidden-layer widths and latent size for [`JsccModels::random`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub latent_bits: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
}

impl Architecture {
    /// `input -> 64 -> 32 -> N`, `N -> 32 -> 64 -> input`, and a classifier
    /// with two hidden layers of 64.
    pub fn dense(latent_bits: usize) -> Self {
        Self {
            latent_bits,
            encoder_hidden: vec![64, 32],
            decoder_hidden: vec![32, 64],
            classifier_hidden: vec![64, 64],
        }
    }
}

/// Encoder `f_theta`, decoder `f_phi` and classifier `f_psi`.
#[derive(Clone, Debug, PartialEq)]
pub struct JsccModels {
    pub encoder: DenseModel,
    pub decoder: DenseModel,
    pub classifier: DenseModel,
}

impl JsccModels {
    pub fn new(encoder: DenseModel, decoder: DenseModel, classifier: DenseModel) -> Result<Self> {
        if encoder.output_activation() != Activation::Sigmoid {
            return Err(Error::config(format!(
                "encoder must end in a sigmoid, not {}",
                encoder.output_activation()
            )));
        }
        if decoder.input_dim() != encoder.output_dim() {
            return Err(Error::config(format!(
                "decoder reads {} bits but the encoder emits {}",
                decoder.input_dim(),
                encoder.output_dim()
            )));
        }
        if decoder.output_dim() != encoder.input_dim() || classifier.input_dim() != encoder.input_dim() {
            return Err(Error::config(format!(
                "decoder output ({}) and classifier input ({}) must match the input dimension {}",
                decoder.output_dim(),
                classifier.input_dim(),
                encoder.input_dim()
            )));
        }
        Ok(Self {
            encoder,
            decoder,
            classifier,
        })
    }

    pub fn random(input_dim: usize, n_classes: usize, arch: &Architecture, rng: &mut RandomSource) -> Result<Self> {
        let chain = |first: usize, hidden: &[usize], last: usize| -> Vec<usize> {
            std::iter::once(first)
                .chain(hidden.iter().copied())
                .chain(std::iter::once(last))
                .collect()
        };
        let n = arch.latent_bits;
        let encoder = DenseModel::random(
            &chain(input_dim, &arch.encoder_hidden, n),
            Activation::Relu,
            Activation::Sigmoid,
            rng,
        )?;
        let decoder = DenseModel::random(
            &chain(n, &arch.decoder_hidden, input_dim),
            Activation::Relu,
            Activation::Identity,
            rng,
        )?;
        let classifier = DenseModel::random(
            &chain(input_dim, &arch.classifier_hidden, n_classes),
            Activation::Relu,
            Activation::Identity,
            rng,
        )?;
        Self::new(encoder, decoder, classifier)
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_bits(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.classifier.output_dim()
    }

    pub fn zero_grad(&mut self) {
        self.encoder.zero_grad();
        self.decoder.zero_grad();
        self.classifier.zero_grad();
    }

    /// Reconstruction and class logits for a received latent.
    pub fn decode(&self, latent: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let u_hat = self.decoder.forward(latent)?;
        let logits = self.classifier.forward(&u_hat)?;
        Ok((u_hat, logits))
    }
}

/// Bit probabilities `f_theta(u)`.
pub fn encoder_forward(u: &[f64], enc: &DenseModel) -> Result<Vec<f64>> {
    enc.forward(u)
}

/// Independent Bernoulli draws, one per probability.
pub fn sample_latent_bits(f: &[f64], rng: &mut RandomSource) -> Vec<u8> {
    f.iter().map(|&p| u8::from(rng.chance(p))).collect()
}

/// `[P(0), P(0.5), P(1)]` of the received trit when the bit is 1 with
/// probability `f` and then crosses the BSEC `p`.
pub fn latent_law(f: f64, p: &BsecParams) -> [f64; 3] {
    [p.mu * f + p.r * (1.0 - f), p.d, p.mu * (1.0 - f) + p.r * f]
}

/// One draw from [`latent_law`].
pub fn noisy_latent_sample(f: f64, p: &BsecParams, rng: &mut RandomSource) -> Trit {
    let [p0, pe, _] = latent_law(f, p);
    let u = rng.unit();
    if u < p0 {
        Trit::Zero
    } else if u < p0 + pe {
        Trit::Half
    } else {
        Trit::One
    }
}

/// Cached activations of one example through all three networks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForwardPass {
    encoder: ForwardCache,
    latent: Vec<f64>,
    decoder: ForwardCache,
    classifier: ForwardCache,
}

impl ForwardPass {
    /// Runs the encoder, maps its probabilities to a decoder input with
    /// `channel`, then runs decoder and classifier.
    pub fn run(models: &JsccModels, u: &[f64], channel: impl FnOnce(&[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let encoder = models.encoder.forward_cached(u)?;
        let latent = channel(encoder.output())?;
        let decoder = models.decoder.forward_cached(&latent)?;
        let classifier = models.classifier.forward_cached(decoder.output())?;
        Ok(Self {
            encoder,
            latent,
            decoder,
            classifier,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        self.encoder.output()
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    pub fn reconstruction(&self) -> &[f64] {
        self.decoder.output()
    }

    pub fn logits(&self) -> &[f64] {
        self.classifier.output()
    }
}

/// Accumulates the gradients of `lambda * mse + ce` for one cached example.
///
/// Decoder and classifier receive exact backpropagation. The encoder
/// receives the gradient w.r.t. the decoder input unchanged as the
/// gradient w.r.t. its own output.
pub fn backward_with_bypass(
    models: &mut JsccModels,
    pass: &ForwardPass,
    u: &[f64],
    label: usize,
    lambda: f64,
) -> Result<CombinedLoss> {
    if pass.encoder.is_empty() || pass.decoder.is_empty() || pass.classifier.is_empty() {
        return Err(Error::State("backward called without a forward pass".into()));
    }
    let loss = combined_loss(u, pass.reconstruction(), pass.logits(), label, lambda)?;
    let mut grad_u_hat = models.classifier.backward(&pass.classifier, &loss.grad_logits)?;
    for (g, r) in grad_u_hat.iter_mut().zip(&loss.grad_reconstruction) {
        *g += r;
    }
    let grad_latent = models.decoder.backward(&pass.decoder, &grad_u_hat)?;
    models.encoder.backward(&pass.encoder, &grad_latent)?;
    Ok(loss)
}
