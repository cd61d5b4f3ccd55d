use ndarray::Array2;
use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::params::{ParamId, ParamStore};

/// One LSTM direction. Gate columns are ordered input, forget, cell, output.
#[derive(Clone, Debug)]
pub struct Lstm {
    input_weights: ParamId,
    recurrent_weights: ParamId,
    bias: ParamId,
    hidden: usize,
}

impl Lstm {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Lstm {
            input_weights: store.insert_uniform(format!("{}.w_input", prefix), (input, 4 * hidden), scale, rng)?,
            recurrent_weights: store.insert_uniform(
                format!("{}.w_recurrent", prefix),
                (hidden, 4 * hidden),
                scale,
                rng,
            )?,
            bias: store.insert_zeros(format!("{}.bias", prefix), (1, 4 * hidden))?,
            hidden,
        })
    }

    pub fn from_store(store: &ParamStore, prefix: &str) -> Result<Self> {
        let input_weights = lookup(store, &format!("{}.w_input", prefix))?;
        let hidden = store.get(input_weights).ncols() / 4;
        Ok(Lstm {
            input_weights,
            recurrent_weights: lookup(store, &format!("{}.w_recurrent", prefix))?,
            bias: lookup(store, &format!("{}.bias", prefix))?,
            hidden,
        })
    }

    /// Run over `steps` (each `rows x input`) in the given order.
    ///
    /// `mask[t][r]` marks real positions: at padded positions the state is
    /// carried through unchanged and the output row is zero.
    fn run(&self, tape: &mut Tape, steps: &[Var], mask: &[Vec<bool>], order: &[usize]) -> Vec<Var> {
        let rows = tape.value(steps[0]).nrows();
        let h = self.hidden;
        let wx = tape.param(self.input_weights);
        let wh = tape.param(self.recurrent_weights);
        let b = tape.param(self.bias);

        let mut state_h = tape.constant(Array2::zeros((rows, h)));
        let mut state_c = tape.constant(Array2::zeros((rows, h)));
        let mut outputs = vec![None; steps.len()];

        for &t in order {
            let x = tape.matmul(steps[t], wx);
            let r = tape.matmul(state_h, wh);
            let z = tape.add(x, r);
            let z = tape.add_row(z, b);

            let i = tape.slice_cols(z, 0, h);
            let i = tape.sigmoid(i);
            let f = tape.slice_cols(z, h, 2 * h);
            let f = tape.sigmoid(f);
            let g = tape.slice_cols(z, 2 * h, 3 * h);
            let g = tape.tanh(g);
            let o = tape.slice_cols(z, 3 * h, 4 * h);
            let o = tape.sigmoid(o);

            let kept = tape.mul(f, state_c);
            let written = tape.mul(i, g);
            let c = tape.add(kept, written);
            let squashed = tape.tanh(c);
            let new_h = tape.mul(o, squashed);

            let m = &mask[t];
            if m.iter().all(|&v| v) {
                state_c = c;
                state_h = new_h;
                outputs[t] = Some(new_h);
            } else {
                state_c = tape.mask_blend(c, state_c, m);
                state_h = tape.mask_blend(new_h, state_h, m);
                outputs[t] = Some(tape.mask_rows(new_h, m));
            }
        }

        outputs.into_iter().map(|o| o.expect("every step visited")).collect()
    }
}

/// A bidirectional LSTM whose per-step output is `[forward; backward]`.
#[derive(Clone, Debug)]
pub struct BiLstm {
    forward: Lstm,
    backward: Lstm,
}

impl BiLstm {
    /// `hidden` is the total output width; each direction gets half.
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(BiLstm {
            forward: Lstm::init(store, &format!("{}.fw", prefix), input, hidden / 2, scale, rng)?,
            backward: Lstm::init(store, &format!("{}.bw", prefix), input, hidden / 2, scale, rng)?,
        })
    }

    pub fn from_store(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(BiLstm {
            forward: Lstm::from_store(store, &format!("{}.fw", prefix))?,
            backward: Lstm::from_store(store, &format!("{}.bw", prefix))?,
        })
    }

    /// Encode row-batched sequences; returns one `rows x hidden` output per step.
    pub fn run(&self, tape: &mut Tape, steps: &[Var], mask: &[Vec<bool>]) -> Vec<Var> {
        let order: Vec<usize> = (0..steps.len()).collect();
        let reverse: Vec<usize> = order.iter().rev().copied().collect();
        let fw = self.forward.run(tape, steps, mask, &order);
        let bw = self.backward.run(tape, steps, mask, &reverse);
        fw.into_iter()
            .zip(bw)
            .map(|(f, b)| tape.concat_cols(f, b))
            .collect()
    }
}

pub(crate) fn lookup(store: &ParamStore, name: &str) -> Result<ParamId> {
    store
        .id(name)
        .ok_or_else(|| crate::Error::InvalidInput(format!("missing parameter '{}'", name)))
}
