//! Channel-adaptive digital semantic communication link.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: Gaussian tail function and the seeded random source,
//! * [`constellation`]: Gray-labelled square QAM,
//! * [`channel`]: flat fading + AWGN and equalization,
//! * [`demod`]: ternary demodulation (LLR thresholding and interval tables),
//! * [`bsec`]: the binary symmetric erasure channel model of the link,
//! * [`adaptmod`]: BER closed forms and per-bit modulation-order selection,
//! * [`jscc`]: a small dense encoder/decoder/classifier trained through
//!   sampled BSECs,
//! * [`harness`]: Monte Carlo campaigns, datasets, end-to-end runs.

// Range checks are written `!(x >= lo)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptmod;
pub mod bsec;
pub mod channel;
pub mod constellation;
pub mod demod;
pub mod error;
pub mod harness;
pub mod jscc;
pub mod numerics;

pub use bsec::{BsecParams, RobustnessProfile};
pub use channel::{ChannelDistribution, ChannelRealization};
pub use constellation::{Axis, Constellation, ModOrder};
pub use demod::{DecisionRegions, Trit, TritSequence};
pub use error::{Error, Result};
pub use harness::Dataset;
pub use jscc::{DenseModel, JsccModels, TrainingConfig};
pub use num_complex::Complex64;
pub use numerics::RandomSource;
