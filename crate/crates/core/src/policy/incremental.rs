//! Incremental `f32` policy evaluation for search.
//!
//! A move changes at most four input cells, so the evaluator keeps the
//! convolution pre-activations, pooled features, and hidden pre-activations
//! of the current state and patches only what a move touches. Every update is
//! a stack frame; popping a frame restores the saved values exactly, so the
//! activations of a state depend only on the moves that reached it.

use super::{state_cell_code, CellCode, PolicyError, PolicyParams, PolicyShape, ACTIONS, CHANNELS, KERNEL, PAD};
use crate::grid::{Point, RoutingState};

/// Weights converted to `f32` and laid out for scatter updates.
#[derive(Debug, Clone)]
pub struct CompiledPolicy {
    shape: PolicyShape,
    /// `[channel][ky][kx][filter]`
    conv_w: Vec<f32>,
    conv_b: Vec<f32>,
    /// Rows ordered `[(py * pw + px) * filters + f]`, each `hidden` wide.
    w1: Vec<f32>,
    b1: Vec<f32>,
    /// `[hidden][action]`
    w2: Vec<f32>,
    b2: [f32; ACTIONS],
}

impl CompiledPolicy {
    pub fn new(params: &PolicyParams) -> Self {
        let s = params.shape;
        let f = s.filters;
        let mut conv_w = vec![0f32; s.conv_weights()];
        for fi in 0..f {
            for c in 0..CHANNELS {
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        conv_w[((c * KERNEL + ky) * KERNEL + kx) * f + fi] =
                            params.conv_w[((fi * CHANNELS + c) * KERNEL + ky) * KERNEL + kx] as f32;
                    }
                }
            }
        }
        let (ph, pw, hidden) = (s.pooled_height(), s.pooled_width(), s.hidden);
        let mut w1 = vec![0f32; s.flat() * hidden];
        for fi in 0..f {
            for cell in 0..ph * pw {
                let src = (fi * ph * pw + cell) * hidden;
                let dst = (cell * f + fi) * hidden;
                for j in 0..hidden {
                    w1[dst + j] = params.dense1_w[src + j] as f32;
                }
            }
        }
        let mut b2 = [0f32; ACTIONS];
        for (b, &v) in b2.iter_mut().zip(&params.dense2_b) {
            *b = v as f32;
        }
        CompiledPolicy {
            shape: s,
            conv_w,
            conv_b: params.conv_b.iter().map(|&v| v as f32).collect(),
            w1,
            b1: params.dense1_b.iter().map(|&v| v as f32).collect(),
            w2: params.dense2_w.iter().map(|&v| v as f32).collect(),
            b2,
        }
    }

    pub fn shape(&self) -> PolicyShape {
        self.shape
    }

    fn kernel(&self, channel: usize, ky: usize, kx: usize) -> &[f32] {
        let f = self.shape.filters;
        &self.conv_w[((channel * KERNEL + ky) * KERNEL + kx) * f..][..f]
    }

    /// Fails when a `width x height` board does not fit the input.
    pub fn check_board(&self, width: usize, height: usize) -> Result<(), PolicyError> {
        if width > self.shape.width || height > self.shape.height {
            return Err(PolicyError::BoardTooLarge {
                board_h: height,
                board_w: width,
                want_h: self.shape.height,
                want_w: self.shape.width,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    codes: usize,
    conv: usize,
    pooled: usize,
}

/// Activations of one evaluated state plus an undo stack.
#[derive(Debug, Clone)]
pub struct PolicyEvaluator<'a> {
    net: &'a CompiledPolicy,
    codes: Vec<CellCode>,
    conv: Vec<f32>,
    pooled: Vec<f32>,
    z1: Vec<f32>,
    code_log: Vec<(u32, CellCode)>,
    conv_log: Vec<u32>,
    conv_saved: Vec<f32>,
    pooled_log: Vec<u32>,
    pooled_saved: Vec<f32>,
    z1_saved: Vec<f32>,
    frames: Vec<Frame>,
    touched: Vec<u32>,
}

impl<'a> PolicyEvaluator<'a> {
    pub fn new(net: &'a CompiledPolicy, state: &RoutingState) -> Result<Self, PolicyError> {
        let s = net.shape;
        net.check_board(state.problem().width(), state.problem().height())?;
        let mut ev = PolicyEvaluator {
            net,
            codes: vec![CellCode::Blocked; s.height * s.width],
            conv: vec![0.0; s.height * s.width * s.filters],
            pooled: vec![0.0; s.flat()],
            z1: vec![0.0; s.hidden],
            code_log: Vec::new(),
            conv_log: Vec::new(),
            conv_saved: Vec::new(),
            pooled_log: Vec::new(),
            pooled_saved: Vec::new(),
            z1_saved: Vec::new(),
            frames: Vec::new(),
            touched: Vec::new(),
        };
        ev.reset(state);
        Ok(ev)
    }

    /// Recomputes every activation for `state` and clears the undo stack.
    pub fn reset(&mut self, state: &RoutingState) {
        let net = self.net;
        let s = net.shape;
        let (h, w, f) = (s.height, s.width, s.filters);
        let problem = state.problem();
        self.codes.fill(CellCode::Blocked);
        for y in 0..problem.height() {
            for x in 0..problem.width() {
                self.codes[y * w + x] = state_cell_code(state, Point::new(x, y));
            }
        }
        for cell in self.conv.chunks_mut(f) {
            cell.copy_from_slice(&net.conv_b);
        }
        for iy in 0..h {
            for ix in 0..w {
                let Some(ch) = self.codes[iy * w + ix].channel() else { continue };
                for ky in 0..KERNEL {
                    let Some(y) = (iy + PAD).checked_sub(ky).filter(|&y| y < h) else { continue };
                    for kx in 0..KERNEL {
                        let Some(x) = (ix + PAD).checked_sub(kx).filter(|&x| x < w) else { continue };
                        let k = net.kernel(ch, ky, kx);
                        for (o, &wt) in self.conv[(y * w + x) * f..][..f].iter_mut().zip(k) {
                            *o += wt;
                        }
                    }
                }
            }
        }
        self.z1.copy_from_slice(&net.b1);
        let pw = s.pooled_width();
        for q in 0..s.pooled_height() * pw {
            let mut vals = vec![0f32; f];
            self.pool_values(q / pw, q % pw, &mut vals);
            for (fi, &v) in vals.iter().enumerate() {
                self.pooled[q * f + fi] = v;
                if v != 0.0 {
                    let row = &net.w1[(q * f + fi) * s.hidden..][..s.hidden];
                    for (z, &wt) in self.z1.iter_mut().zip(row) {
                        *z += v * wt;
                    }
                }
            }
        }
        self.code_log.clear();
        self.conv_log.clear();
        self.conv_saved.clear();
        self.pooled_log.clear();
        self.pooled_saved.clear();
        self.z1_saved.clear();
        self.frames.clear();
    }

    fn pool_values(&self, py: usize, px: usize, out: &mut [f32]) {
        let s = self.net.shape;
        let (w, f) = (s.width, s.filters);
        out.fill(0.0);
        for dy in 0..2 {
            for dx in 0..2 {
                let base = ((2 * py + dy) * w + 2 * px + dx) * f;
                for (o, &c) in out.iter_mut().zip(&self.conv[base..base + f]) {
                    if c > *o {
                        *o = c;
                    }
                }
            }
        }
    }

    /// Number of frames that [`pop`](Self::pop) can undo.
    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    /// Re-reads `cells` from `state` and patches the activations.
    pub fn push(&mut self, state: &RoutingState, cells: impl IntoIterator<Item = Point>) {
        let net = self.net;
        let s = net.shape;
        let (h, w, f, hidden) = (s.height, s.width, s.filters, s.hidden);
        let (ph, pw) = (s.pooled_height(), s.pooled_width());
        self.frames.push(Frame {
            codes: self.code_log.len(),
            conv: self.conv_log.len(),
            pooled: self.pooled_log.len(),
        });
        self.z1_saved.extend_from_slice(&self.z1);
        self.touched.clear();

        for p in cells {
            let i = p.y * w + p.x;
            let new = state_cell_code(state, p);
            let old = self.codes[i];
            if new == old {
                continue;
            }
            self.code_log.push((i as u32, old));
            self.codes[i] = new;
            for ky in 0..KERNEL {
                let Some(y) = (p.y + PAD).checked_sub(ky).filter(|&y| y < h) else { continue };
                for kx in 0..KERNEL {
                    let Some(x) = (p.x + PAD).checked_sub(kx).filter(|&x| x < w) else { continue };
                    let pos = y * w + x;
                    let out = &mut self.conv[pos * f..][..f];
                    self.conv_log.push(pos as u32);
                    self.conv_saved.extend_from_slice(out);
                    if let Some(c) = old.channel() {
                        for (o, &wt) in out.iter_mut().zip(net.kernel(c, ky, kx)) {
                            *o -= wt;
                        }
                    }
                    if let Some(c) = new.channel() {
                        for (o, &wt) in out.iter_mut().zip(net.kernel(c, ky, kx)) {
                            *o += wt;
                        }
                    }
                    let (qy, qx) = (y / 2, x / 2);
                    if qy < ph && qx < pw {
                        let q = (qy * pw + qx) as u32;
                        if !self.touched.contains(&q) {
                            self.touched.push(q);
                        }
                    }
                }
            }
        }

        let mut vals = [0f32; 256];
        let mut vals_vec;
        let vals: &mut [f32] = if f <= vals.len() {
            &mut vals[..f]
        } else {
            vals_vec = vec![0f32; f];
            &mut vals_vec
        };
        for t in 0..self.touched.len() {
            let q = self.touched[t] as usize;
            self.pool_values(q / pw, q % pw, vals);
            let old = &self.pooled[q * f..][..f];
            if old == &vals[..] {
                continue;
            }
            self.pooled_log.push(q as u32);
            self.pooled_saved.extend_from_slice(old);
            for fi in 0..f {
                let d = vals[fi] - self.pooled[q * f + fi];
                if d != 0.0 {
                    let row = &net.w1[(q * f + fi) * hidden..][..hidden];
                    for (z, &wt) in self.z1.iter_mut().zip(row) {
                        *z += d * wt;
                    }
                }
            }
            self.pooled[q * f..][..f].copy_from_slice(vals);
        }
    }

    /// Undoes the most recent [`push`](Self::push).
    pub fn pop(&mut self) {
        let Some(frame) = self.frames.pop() else { return };
        let s = self.net.shape;
        let (f, hidden) = (s.filters, s.hidden);
        for k in (frame.pooled..self.pooled_log.len()).rev() {
            let q = self.pooled_log[k] as usize;
            self.pooled[q * f..][..f].copy_from_slice(&self.pooled_saved[k * f..][..f]);
        }
        for k in (frame.conv..self.conv_log.len()).rev() {
            let pos = self.conv_log[k] as usize;
            self.conv[pos * f..][..f].copy_from_slice(&self.conv_saved[k * f..][..f]);
        }
        for k in (frame.codes..self.code_log.len()).rev() {
            let (i, code) = self.code_log[k];
            self.codes[i as usize] = code;
        }
        let z1_at = self.frames.len() * hidden;
        self.z1.copy_from_slice(&self.z1_saved[z1_at..z1_at + hidden]);
        self.z1_saved.truncate(z1_at);
        self.pooled_log.truncate(frame.pooled);
        self.pooled_saved.truncate(frame.pooled * f);
        self.conv_log.truncate(frame.conv);
        self.conv_saved.truncate(frame.conv * f);
        self.code_log.truncate(frame.codes);
    }

    /// Pops frames until only `depth` remain.
    pub fn truncate(&mut self, depth: usize) {
        while self.frames.len() > depth {
            self.pop();
        }
    }

    /// Softmax action probabilities of the current state.
    pub fn probabilities(&self) -> [f64; ACTIONS] {
        let net = self.net;
        let mut z2 = [0f32; ACTIONS];
        z2.copy_from_slice(&net.b2);
        for (j, &z) in self.z1.iter().enumerate() {
            if z > 0.0 {
                for (a, o) in z2.iter_mut().enumerate() {
                    *o += z * net.w2[j * ACTIONS + a];
                }
            }
        }
        super::softmax(z2.map(f64::from))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Net, RoutingProblem, Status};
    use crate::policy::encode_input_padded;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn problem(w: usize, h: usize) -> Arc<RoutingProblem> {
        Arc::new(
            RoutingProblem::new(
                w,
                h,
                [Point::new(2, 3), Point::new(5, 5)],
                vec![
                    Net::new(1, Point::new(0, 0), Point::new(w - 1, h - 1)),
                    Net::new(2, Point::new(0, h - 1), Point::new(w - 1, 0)),
                    Net::new(3, Point::new(3, 1), Point::new(1, 6)),
                ],
            )
            .unwrap(),
        )
    }

    fn reference(params: &PolicyParams, state: &RoutingState) -> [f64; ACTIONS] {
        let e = encode_input_padded(&state.state_matrix(), params.shape.height, params.shape.width).unwrap();
        params.forward_encoded(&e).unwrap()
    }

    fn close(a: [f64; 4], b: [f64; 4]) {
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-4, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn tracks_reference_through_moves_and_undo() {
        let shape = PolicyShape { height: 12, width: 12, filters: 6, hidden: 16 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let params = PolicyParams::init(shape, &mut rng);
        let compiled = CompiledPolicy::new(&params);
        for (w, h) in [(12, 12), (9, 8)] {
            let mut state = RoutingState::initial(problem(w, h));
            let mut ev = PolicyEvaluator::new(&compiled, &state).unwrap();
            close(ev.probabilities(), reference(&params, &state));
            let mut trail = Vec::new();
            for _ in 0..200 {
                let legal = state.legal_actions();
                let back = rng.gen_bool(0.3) && !trail.is_empty();
                if back || state.status() != Status::Ongoing {
                    if let Some(fx) = trail.pop() {
                        state.undo(&fx);
                        ev.pop();
                    }
                } else {
                    let a = legal.nth(rng.gen_range(0..legal.len())).unwrap();
                    let fx = state.apply_in_place(a).unwrap();
                    ev.push(&state, fx.changed_cells());
                    trail.push(fx);
                }
                close(ev.probabilities(), reference(&params, &state));
                assert_eq!(ev.depth(), trail.len());
            }
        }
    }

    #[test]
    fn pop_restores_bitwise() {
        let shape = PolicyShape { height: 10, width: 10, filters: 4, hidden: 8 };
        let params = PolicyParams::init(shape, &mut rand_chacha::ChaCha8Rng::seed_from_u64(9));
        let compiled = CompiledPolicy::new(&params);
        let mut state = RoutingState::initial(problem(10, 10));
        let mut ev = PolicyEvaluator::new(&compiled, &state).unwrap();
        let before = ev.probabilities();
        let snapshot = (ev.conv.clone(), ev.pooled.clone(), ev.z1.clone());
        let mut fxs = Vec::new();
        for a in [crate::grid::Action::Up, crate::grid::Action::Up, crate::grid::Action::Right] {
            let fx = state.apply_in_place(a).unwrap();
            ev.push(&state, fx.changed_cells());
            fxs.push(fx);
        }
        ev.truncate(0);
        assert_eq!(ev.probabilities(), before);
        assert_eq!((ev.conv.clone(), ev.pooled.clone(), ev.z1.clone()), snapshot);
    }

    #[test]
    fn oversized_board_is_rejected() {
        let params = PolicyParams::zeros(PolicyShape { height: 8, width: 8, filters: 2, hidden: 4 });
        let compiled = CompiledPolicy::new(&params);
        let state = RoutingState::initial(problem(10, 10));
        assert!(PolicyEvaluator::new(&compiled, &state).is_err());
    }
}
