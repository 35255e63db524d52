use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use super::{argmax_action, encode_input, EncodedInput, PolicyError, PolicyParams, PolicyShape};
use crate::generator::TrainingSample;
use crate::grid::Action;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Feed each sample under a random rotation or reflection every epoch.
    pub augment: bool,
    /// Lower the learning rate linearly to zero over the epochs.
    pub decay: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.03,
            momentum: 0.9,
            batch_size: 32,
            epochs: 30,
            seed: 0,
            augment: true,
            decay: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("no training samples")]
    Empty,
    #[error("training configuration: {0}")]
    Config(String),
    #[error("loss diverged during epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch.
    pub loss: f64,
    /// Accuracy of the predictions made while training during the epoch.
    pub train_accuracy: f64,
    /// Held-out accuracy after the epoch; `NaN` without a test set.
    pub test_accuracy: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {} loss {:.6} train_acc {:.4} test_acc {:.4}",
            self.epoch, self.loss, self.train_accuracy, self.test_accuracy
        )
    }
}

fn encode_all(samples: &[TrainingSample], shape: &PolicyShape) -> Result<Vec<(EncodedInput, Action)>, PolicyError> {
    samples
        .iter()
        .map(|s| {
            let e = encode_input(&s.matrix);
            if e.height != shape.height || e.width != shape.width {
                return Err(PolicyError::ShapeMismatch {
                    got_h: e.height,
                    got_w: e.width,
                    want_h: shape.height,
                    want_w: shape.width,
                });
            }
            Ok((e, s.label))
        })
        .collect()
}

/// One of the eight symmetries of a square board: an optional transpose,
/// then optional flips of `y` and `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Symmetry {
    pub transpose: bool,
    pub flip_y: bool,
    pub flip_x: bool,
}

impl Symmetry {
    pub const IDENTITY: Symmetry = Symmetry::from_bits(0);

    /// Bit 2 transposes, bit 1 flips `y`, bit 0 flips `x`.
    pub const fn from_bits(bits: u8) -> Symmetry {
        Symmetry {
            transpose: bits & 4 != 0,
            flip_y: bits & 2 != 0,
            flip_x: bits & 1 != 0,
        }
    }

    pub fn action(self, a: Action) -> Action {
        let mut a = a;
        if self.transpose {
            a = match a {
                Action::Up => Action::Right,
                Action::Right => Action::Up,
                Action::Down => Action::Left,
                Action::Left => Action::Down,
            };
        }
        if self.flip_y {
            a = match a {
                Action::Up => Action::Down,
                Action::Down => Action::Up,
                other => other,
            };
        }
        if self.flip_x {
            a = match a {
                Action::Left => Action::Right,
                Action::Right => Action::Left,
                other => other,
            };
        }
        a
    }

    /// Image of `input`; `None` for a transpose of a non-square input.
    pub fn apply(self, input: &EncodedInput) -> Option<EncodedInput> {
        let (h, w) = (input.height, input.width);
        if self.transpose && h != w {
            return None;
        }
        let mut codes = input.codes.clone();
        for y in 0..h {
            for x in 0..w {
                let (mut nx, mut ny) = if self.transpose { (y, x) } else { (x, y) };
                if self.flip_y {
                    ny = h - 1 - ny;
                }
                if self.flip_x {
                    nx = w - 1 - nx;
                }
                codes[ny * w + nx] = input.codes[y * w + x];
            }
        }
        Some(EncodedInput { height: h, width: w, codes })
    }
}

/// Fraction of samples whose arg-max prediction equals the label.
pub fn accuracy(params: &PolicyParams, samples: &[TrainingSample]) -> Result<f64, PolicyError> {
    let encoded = encode_all(samples, &params.shape)?;
    evaluate(params, &encoded)
}

pub fn evaluate(params: &PolicyParams, samples: &[(EncodedInput, Action)]) -> Result<f64, PolicyError> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut hits = 0;
    for (x, label) in samples {
        if argmax_action(&params.forward_encoded(x)?) == *label {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

/// Trains a standard-size network on `samples`.
pub fn train(samples: &[TrainingSample], cfg: &TrainConfig) -> Result<PolicyParams, TrainError> {
    let first = samples.first().ok_or(TrainError::Empty)?;
    let shape = PolicyShape::standard(first.matrix.height, first.matrix.width);
    Ok(train_with_log(samples, &[], shape, cfg, |_| {})?.0)
}

/// Minibatch gradient descent with momentum. Batches, and the symmetry each
/// sample is shown under, follow a seeded stream and gradients are summed in
/// sample order, so runs are reproducible.
/// `on_epoch` sees every log line as it is produced.
pub fn train_with_log(
    samples: &[TrainingSample],
    test: &[TrainingSample],
    shape: PolicyShape,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(PolicyParams, Vec<EpochLog>), TrainError> {
    if samples.is_empty() {
        return Err(TrainError::Empty);
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 || !(cfg.learning_rate > 0.0) || !(0.0..1.0).contains(&cfg.momentum) {
        return Err(TrainError::Config(format!("{cfg:?}")));
    }
    let train_set = encode_all(samples, &shape)?;
    let test_set = encode_all(test, &shape)?;
    let mut params = PolicyParams::init(shape, &mut stream_rng(cfg.seed, Stream::Init));
    let mut velocity = PolicyParams::zeros(shape);
    let mut grads = PolicyParams::zeros(shape);
    let mut shuffle = stream_rng(cfg.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let square = shape.height == shape.width;
    let symmetries: u8 = match (cfg.augment, square) {
        (false, _) => 1,
        (true, true) => 8,
        (true, false) => 4,
    };
    let mut views: Vec<(EncodedInput, Action)> = Vec::new();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let rate = if cfg.decay {
            cfg.learning_rate * (1.0 - (epoch - 1) as f64 / cfg.epochs as f64)
        } else {
            cfg.learning_rate
        };
        if symmetries > 1 {
            views = train_set
                .iter()
                .map(|(x, label)| {
                    let sym = Symmetry::from_bits(shuffle.gen_range(0..symmetries));
                    (sym.apply(x).expect("square or no transpose"), sym.action(*label))
                })
                .collect();
        }
        let shown = if symmetries > 1 { &views } else { &train_set };
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut hits = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            for t in grads.tensors_mut() {
                t.fill(0.0);
            }
            let mut batch_loss = 0.0;
            for &i in batch {
                let (x, label) = &shown[i];
                let (l, predicted) = params.accumulate(x, *label, &mut grads);
                batch_loss += l;
                hits += usize::from(predicted == *label);
            }
            let n = batch.len() as f64;
            batch_loss /= n;
            if !batch_loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            loss_sum += batch_loss;
            batches += 1;
            let scale = rate / n;
            for ((w, v), g) in params.tensors_mut().into_iter().zip(velocity.tensors_mut()).zip(grads.tensors_mut()) {
                for ((w, v), g) in w.iter_mut().zip(v.iter_mut()).zip(g.iter()) {
                    *v = cfg.momentum * *v - scale * g;
                    *w += *v;
                }
            }
        }
        if !params.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        let entry = EpochLog {
            epoch,
            loss: loss_sum / batches as f64,
            train_accuracy: hits as f64 / train_set.len() as f64,
            test_accuracy: evaluate(&params, &test_set)?,
        };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok((params, log))
}
