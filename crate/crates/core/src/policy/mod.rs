//! Convolutional action policy.
//!
//! Architecture: 5x5 convolution with "same" padding, ReLU, 2x2 max-pool with
//! stride 2, a 128-unit ReLU layer, and a 4-way softmax over
//! `[up, down, left, right]`. The state matrix enters as four binary channels
//! (head, blocked, own free pin, foreign pin).
//!
//! This module holds the `f64` reference forward and backward passes used for
//! training. [`incremental`] provides the `f32` evaluator used inside rollouts.

pub mod incremental;
mod persist;
mod train;

use thiserror::Error;

use crate::grid::{Action, Point, RoutingState, StateMatrix};

pub use persist::{load_params, read_params, save_params, write_params, ParamsFileError, FORMAT_VERSION, MAGIC};
pub use train::{accuracy, evaluate, train, train_with_log, EpochLog, Symmetry, TrainConfig, TrainError};

pub const CHANNELS: usize = 4;
pub const KERNEL: usize = 5;
pub const ACTIONS: usize = 4;
const PAD: usize = KERNEL / 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("input is {got_h}x{got_w} but the policy expects {want_h}x{want_w}")]
    ShapeMismatch {
        got_h: usize,
        got_w: usize,
        want_h: usize,
        want_w: usize,
    },
    #[error("a board of {board_h}x{board_w} does not fit a {want_h}x{want_w} policy")]
    BoardTooLarge {
        board_h: usize,
        board_w: usize,
        want_h: usize,
        want_w: usize,
    },
    #[error("normalization needs at least one legal action")]
    NoLegalActions,
}

/// Layer sizes of a policy network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolicyShape {
    pub height: usize,
    pub width: usize,
    pub filters: usize,
    pub hidden: usize,
}

impl PolicyShape {
    /// 32 filters and 128 hidden units on an `height x width` board.
    pub fn standard(height: usize, width: usize) -> Self {
        PolicyShape {
            height,
            width,
            filters: 32,
            hidden: 128,
        }
    }

    pub fn pooled_height(&self) -> usize {
        self.height / 2
    }

    pub fn pooled_width(&self) -> usize {
        self.width / 2
    }

    /// Length of the flattened pooled feature vector.
    pub fn flat(&self) -> usize {
        self.filters * self.pooled_height() * self.pooled_width()
    }

    pub fn conv_weights(&self) -> usize {
        self.filters * CHANNELS * KERNEL * KERNEL
    }
}

/// Channel of each input cell: at most one is hot per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CellCode {
    Free = 0,
    Head = 1,
    Blocked = 2,
    OwnPin = 3,
    ForeignPin = 4,
}

impl CellCode {
    /// Channel index of a non-free code.
    pub fn channel(self) -> Option<usize> {
        match self {
            CellCode::Free => None,
            c => Some(c as usize - 1),
        }
    }

    fn from_matrix_value(value: i32, current_net: usize, is_head: bool) -> CellCode {
        if is_head {
            CellCode::Head
        } else if value < 0 {
            CellCode::Blocked
        } else if value == 0 {
            CellCode::Free
        } else if value as usize == current_net {
            CellCode::OwnPin
        } else {
            CellCode::ForeignPin
        }
    }
}

/// Four-channel binary encoding of a state matrix; cells are row-major by `y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedInput {
    pub height: usize,
    pub width: usize,
    pub codes: Vec<CellCode>,
}

impl EncodedInput {
    /// Dense `height x width x 4` tensor of zeros and ones.
    pub fn to_tensor(&self) -> Vec<[f64; CHANNELS]> {
        self.codes
            .iter()
            .map(|c| {
                let mut v = [0.0; CHANNELS];
                if let Some(ch) = c.channel() {
                    v[ch] = 1.0;
                }
                v
            })
            .collect()
    }

    pub fn channel_sum(&self, channel: usize) -> usize {
        self.codes.iter().filter(|c| c.channel() == Some(channel)).count()
    }
}

/// Encodes a matrix at its own size.
pub fn encode_input(m: &StateMatrix) -> EncodedInput {
    encode_input_padded(m, m.height, m.width).expect("same size fits")
}

/// Encodes a matrix into the top-left corner of a larger input; the margin
/// is marked blocked.
pub fn encode_input_padded(m: &StateMatrix, height: usize, width: usize) -> Result<EncodedInput, PolicyError> {
    if m.height > height || m.width > width {
        return Err(PolicyError::BoardTooLarge {
            board_h: m.height,
            board_w: m.width,
            want_h: height,
            want_w: width,
        });
    }
    let mut codes = vec![CellCode::Blocked; height * width];
    for y in 0..m.height {
        for x in 0..m.width {
            let is_head = m.head == Some(Point::new(x, y));
            codes[y * width + x] = CellCode::from_matrix_value(m.get(x, y), m.current_net, is_head);
        }
    }
    Ok(EncodedInput { height, width, codes })
}

/// Code of one board cell read straight from a routing state.
pub(crate) fn state_cell_code(state: &RoutingState, p: Point) -> CellCode {
    if state.head() == Some(p) {
        return CellCode::Head;
    }
    if state.is_blocked(p) {
        return CellCode::Blocked;
    }
    match (state.problem().pin_owner(p), state.current_net()) {
        (None, _) => CellCode::Free,
        (Some(n), Some(cur)) if n == cur.id => CellCode::OwnPin,
        (Some(_), _) => CellCode::ForeignPin,
    }
}

/// Network weights. Layouts: `conv_w[f][c][ky][kx]`, `dense1_w[p][j]` with
/// `p = f * (ph * pw) + py * pw + px`, `dense2_w[j][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub shape: PolicyShape,
    pub conv_w: Vec<f64>,
    pub conv_b: Vec<f64>,
    pub dense1_w: Vec<f64>,
    pub dense1_b: Vec<f64>,
    pub dense2_w: Vec<f64>,
    pub dense2_b: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(shape: PolicyShape) -> Self {
        PolicyParams {
            shape,
            conv_w: vec![0.0; shape.conv_weights()],
            conv_b: vec![0.0; shape.filters],
            dense1_w: vec![0.0; shape.flat() * shape.hidden],
            dense1_b: vec![0.0; shape.hidden],
            dense2_w: vec![0.0; shape.hidden * ACTIONS],
            dense2_b: vec![0.0; ACTIONS],
        }
    }

    /// Fan-in scaled uniform initialization: weights in `±sqrt(6 / fan_in)`,
    /// zero biases.
    pub fn init(shape: PolicyShape, rng: &mut impl rand::Rng) -> Self {
        let mut p = PolicyParams::zeros(shape);
        let fill = |v: &mut [f64], fan_in: usize, rng: &mut dyn rand::RngCore| {
            let limit = (6.0 / fan_in as f64).sqrt();
            for w in v {
                *w = rand::Rng::gen_range(rng, -limit..limit);
            }
        };
        fill(&mut p.conv_w, CHANNELS * KERNEL * KERNEL, rng);
        fill(&mut p.dense1_w, shape.flat(), rng);
        fill(&mut p.dense2_w, shape.hidden, rng);
        p
    }

    /// Named parameter tensors in storage order.
    pub fn tensors(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("conv_w", &self.conv_w),
            ("conv_b", &self.conv_b),
            ("dense1_w", &self.dense1_w),
            ("dense1_b", &self.dense1_b),
            ("dense2_w", &self.dense2_w),
            ("dense2_b", &self.dense2_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.conv_w,
            &mut self.conv_b,
            &mut self.dense1_w,
            &mut self.dense1_b,
            &mut self.dense2_w,
            &mut self.dense2_b,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|w| w.is_finite()))
    }

    fn check_input(&self, input: &EncodedInput) -> Result<(), PolicyError> {
        if input.height != self.shape.height || input.width != self.shape.width {
            return Err(PolicyError::ShapeMismatch {
                got_h: input.height,
                got_w: input.width,
                want_h: self.shape.height,
                want_w: self.shape.width,
            });
        }
        Ok(())
    }

    /// Action probabilities for a state matrix of exactly the policy's size.
    pub fn forward(&self, m: &StateMatrix) -> Result<[f64; ACTIONS], PolicyError> {
        self.forward_encoded(&encode_input(m))
    }

    pub fn forward_encoded(&self, input: &EncodedInput) -> Result<[f64; ACTIONS], PolicyError> {
        self.check_input(input)?;
        Ok(self.trace(input).probs)
    }

    /// Forward pass keeping every intermediate needed by backpropagation.
    fn trace(&self, input: &EncodedInput) -> Trace {
        let s = self.shape;
        let (h, w, f) = (s.height, s.width, s.filters);
        let (ph, pw) = (s.pooled_height(), s.pooled_width());
        let active: Vec<(usize, usize, usize)> = input
            .codes
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.channel().map(|ch| (ch, i / w, i % w)))
            .collect();

        // conv[(y * w + x) * f + filter], pre-activation.
        let mut conv = vec![0.0; h * w * f];
        for cell in conv.chunks_mut(f) {
            cell.copy_from_slice(&self.conv_b);
        }
        for &(ch, iy, ix) in &active {
            for ky in 0..KERNEL {
                let Some(y) = (iy + PAD).checked_sub(ky).filter(|&y| y < h) else { continue };
                for kx in 0..KERNEL {
                    let Some(x) = (ix + PAD).checked_sub(kx).filter(|&x| x < w) else { continue };
                    let out = &mut conv[(y * w + x) * f..][..f];
                    for (fi, o) in out.iter_mut().enumerate() {
                        *o += self.conv_w[((fi * CHANNELS + ch) * KERNEL + ky) * KERNEL + kx];
                    }
                }
            }
        }

        let mut pooled = vec![0.0; s.flat()];
        let mut argmax = vec![0usize; s.flat()];
        for fi in 0..f {
            for py in 0..ph {
                for px in 0..pw {
                    let mut best = f64::NEG_INFINITY;
                    let mut at = 0;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let idx = ((2 * py + dy) * w + 2 * px + dx) * f + fi;
                            let v = conv[idx].max(0.0);
                            if v > best {
                                best = v;
                                at = idx;
                            }
                        }
                    }
                    let p = fi * ph * pw + py * pw + px;
                    pooled[p] = best;
                    argmax[p] = at;
                }
            }
        }

        let hidden = s.hidden;
        let mut z1 = self.dense1_b.clone();
        for (p, &v) in pooled.iter().enumerate() {
            if v != 0.0 {
                let row = &self.dense1_w[p * hidden..][..hidden];
                for (z, &wt) in z1.iter_mut().zip(row) {
                    *z += v * wt;
                }
            }
        }
        let a1: Vec<f64> = z1.iter().map(|z| z.max(0.0)).collect();
        let mut z2 = [0.0; ACTIONS];
        z2.copy_from_slice(&self.dense2_b);
        for (j, &v) in a1.iter().enumerate() {
            if v != 0.0 {
                for (a, z) in z2.iter_mut().enumerate() {
                    *z += v * self.dense2_w[j * ACTIONS + a];
                }
            }
        }
        let probs = softmax(z2);
        Trace {
            active,
            conv,
            pooled,
            argmax,
            z1,
            a1,
            probs,
        }
    }

    /// Mean cross-entropy of a batch against one-hot labels and its gradient.
    pub fn loss_and_gradients(&self, batch: &[(EncodedInput, Action)]) -> Result<(f64, PolicyParams), PolicyError> {
        let mut grads = PolicyParams::zeros(self.shape);
        let mut loss = 0.0;
        for (input, label) in batch {
            self.check_input(input)?;
            loss += self.accumulate(input, *label, &mut grads).0;
        }
        let n = batch.len().max(1) as f64;
        for t in grads.tensors_mut() {
            for g in t.iter_mut() {
                *g /= n;
            }
        }
        Ok((loss / n, grads))
    }

    /// Adds the gradient of one sample's loss into `grads`; returns the loss
    /// and the predicted action.
    pub(crate) fn accumulate(&self, input: &EncodedInput, label: Action, grads: &mut PolicyParams) -> (f64, Action) {
        let s = self.shape;
        let (w, f, hidden) = (s.width, s.filters, s.hidden);
        let t = self.trace(input);
        let loss = -t.probs[label.index()].max(f64::MIN_POSITIVE).ln();
        let predicted = argmax_action(&t.probs);

        let mut dz2 = t.probs;
        dz2[label.index()] -= 1.0;
        let mut dz1 = vec![0.0; hidden];
        for j in 0..hidden {
            let mut acc = 0.0;
            for a in 0..ACTIONS {
                grads.dense2_w[j * ACTIONS + a] += t.a1[j] * dz2[a];
                acc += self.dense2_w[j * ACTIONS + a] * dz2[a];
            }
            if t.z1[j] > 0.0 {
                dz1[j] = acc;
            }
        }
        for a in 0..ACTIONS {
            grads.dense2_b[a] += dz2[a];
        }
        for (g, d) in grads.dense1_b.iter_mut().zip(&dz1) {
            *g += d;
        }

        let mut dconv = vec![0.0; t.conv.len()];
        let mut touched = false;
        for (p, &v) in t.pooled.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            let row = &self.dense1_w[p * hidden..][..hidden];
            let grow = &mut grads.dense1_w[p * hidden..][..hidden];
            let mut back = 0.0;
            for ((g, &wt), &d) in grow.iter_mut().zip(row).zip(&dz1) {
                *g += v * d;
                back += wt * d;
            }
            dconv[t.argmax[p]] += back;
            touched = true;
        }
        if !touched {
            return (loss, predicted);
        }
        for cell in dconv.chunks(f) {
            for (g, d) in grads.conv_b.iter_mut().zip(cell) {
                *g += d;
            }
        }
        for &(ch, iy, ix) in &t.active {
            for ky in 0..KERNEL {
                let Some(y) = (iy + PAD).checked_sub(ky).filter(|&y| y < s.height) else { continue };
                for kx in 0..KERNEL {
                    let Some(x) = (ix + PAD).checked_sub(kx).filter(|&x| x < w) else { continue };
                    let d = &dconv[(y * w + x) * f..][..f];
                    for (fi, &dv) in d.iter().enumerate() {
                        grads.conv_w[((fi * CHANNELS + ch) * KERNEL + ky) * KERNEL + kx] += dv;
                    }
                }
            }
        }
        (loss, predicted)
    }
}

struct Trace {
    /// `(channel, y, x)` of every hot input cell.
    active: Vec<(usize, usize, usize)>,
    conv: Vec<f64>,
    pooled: Vec<f64>,
    /// Index into `conv` that produced each pooled value.
    argmax: Vec<usize>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    probs: [f64; ACTIONS],
}

pub fn softmax(z: [f64; ACTIONS]) -> [f64; ACTIONS] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut e = z.map(|v| (v - m).exp());
    let sum: f64 = e.iter().sum();
    for v in &mut e {
        *v /= sum;
    }
    e
}

/// Action with the highest probability; ties go to the canonical order.
pub fn argmax_action(probs: &[f64; ACTIONS]) -> Action {
    let mut best = 0;
    for i in 1..ACTIONS {
        if probs[i] > probs[best] {
            best = i;
        }
    }
    Action::ALL[best]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Net, RoutingProblem};
    use rand::SeedableRng;
    use std::sync::Arc;

    fn board(w: usize, h: usize) -> RoutingState {
        let p = RoutingProblem::new(
            w,
            h,
            [Point::new(3, 3)],
            vec![
                Net::new(1, Point::new(0, 0), Point::new(w - 1, h - 1)),
                Net::new(2, Point::new(1, 4), Point::new(4, 1)),
            ],
        )
        .unwrap();
        RoutingState::initial(Arc::new(p))
    }

    #[test]
    fn encoding_channels() {
        let s = board(30, 30);
        let e = encode_input(&s.state_matrix());
        assert_eq!(e.channel_sum(0), 1, "head");
        assert_eq!(e.channel_sum(1), 1, "obstacle");
        assert_eq!(e.channel_sum(2), 1, "own free pin");
        assert_eq!(e.channel_sum(3), 2, "foreign pins");
        assert_eq!(e.codes[3 * 30 + 3], CellCode::Blocked);
        let t = e.to_tensor();
        assert_eq!(t[3 * 30 + 3], [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(t[5 * 30 + 5], [0.0; 4]);
    }

    #[test]
    fn encoding_ignores_foreign_net_labels() {
        let s = board(8, 8);
        let mut m = s.state_matrix();
        let e = encode_input(&m);
        for c in &mut m.cells {
            if *c == 2 {
                *c = 7;
            }
        }
        assert_eq!(encode_input(&m), e);
    }

    #[test]
    fn padding_marks_margin_blocked() {
        let s = board(6, 6);
        let e = encode_input_padded(&s.state_matrix(), 8, 10).unwrap();
        assert_eq!(e.codes[7 * 10 + 9], CellCode::Blocked);
        assert_eq!(e.codes[0], CellCode::Head);
        assert!(encode_input_padded(&s.state_matrix(), 4, 4).is_err());
    }

    #[test]
    fn zero_params_are_uniform() {
        let p = PolicyParams::zeros(PolicyShape::standard(30, 30));
        let probs = p.forward(&board(30, 30).state_matrix()).unwrap();
        assert_eq!(probs, [0.25; 4]);
        assert_eq!(p.parameter_count(), 3200 + 32 + 7200 * 128 + 128 + 512 + 4);
    }

    #[test]
    fn probabilities_sum_to_one_and_bias_shift_is_invisible() {
        let shape = PolicyShape::standard(30, 30);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut p = PolicyParams::init(shape, &mut rng);
        let m = board(30, 30).state_matrix();
        let a = p.forward(&m).unwrap();
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(a.iter().all(|&v| v > 0.0 && v < 1.0));
        for b in &mut p.dense2_b {
            *b += 3.5;
        }
        let b = p.forward(&m).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let p = PolicyParams::zeros(PolicyShape::standard(30, 30));
        assert!(matches!(
            p.forward(&board(8, 8).state_matrix()),
            Err(PolicyError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn uniform_output_has_log4_loss() {
        let p = PolicyParams::zeros(PolicyShape::standard(8, 8));
        let x = encode_input(&board(8, 8).state_matrix());
        for a in Action::ALL {
            let (loss, _) = p.loss_and_gradients(&[(x.clone(), a)]).unwrap();
            assert!((loss - 4f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_sample_keeps_mean_loss() {
        let shape = PolicyShape { height: 8, width: 8, filters: 3, hidden: 6 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let p = PolicyParams::init(shape, &mut rng);
        let x = encode_input(&board(8, 8).state_matrix());
        let (one, g1) = p.loss_and_gradients(&[(x.clone(), Action::Up)]).unwrap();
        let (two, g2) = p.loss_and_gradients(&[(x.clone(), Action::Up), (x, Action::Up)]).unwrap();
        assert!((one - two).abs() < 1e-12);
        for ((_, a), (_, b)) in g1.tensors().iter().zip(g2.tensors().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
