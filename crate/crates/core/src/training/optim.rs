use crate::params::{Gradients, ParamGrad, ParamStore};

pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// `-log softmax(logits)[label]`, computed stably.
pub fn cross_entropy_loss(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    max + sum.ln() - logits[label]
}

/// `max(0, margin - (pos - neg))`.
pub fn margin_ranking_loss(score_pos: f64, score_neg: f64, margin: f64) -> f64 {
    (margin - (score_pos - score_neg)).max(0.0)
}

/// Scale `grads` so their global L2 norm is at most `ratio`. Returns the norm
/// before clipping.
pub fn clip_global_norm(grads: &mut Gradients, ratio: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > ratio {
        grads.scale(ratio / norm);
    }
    norm
}

/// Adagrad with per-coordinate squared-gradient accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct Adagrad {
    pub learning_rate: f64,
    pub accumulators: ParamStore,
}

impl Adagrad {
    pub fn new(params: &ParamStore, learning_rate: f64) -> Self {
        Adagrad {
            learning_rate,
            accumulators: params.zeros_like(),
        }
    }

    /// Restore from saved accumulators.
    pub fn with_state(accumulators: ParamStore, learning_rate: f64) -> Self {
        Adagrad {
            learning_rate,
            accumulators,
        }
    }

    /// `acc += g^2; p -= lr * g / sqrt(acc + eps)`. Rows absent from a sparse
    /// gradient have zero gradient and are left untouched.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        let lr = self.learning_rate;
        for (id, grad) in grads.iter() {
            let acc = self.accumulators.get_mut(id);
            let param = params.get_mut(id);
            match grad {
                ParamGrad::Dense(g) => {
                    ndarray::Zip::from(param)
                        .and(acc)
                        .and(g)
                        .for_each(|p, a, &g| update(p, a, g, lr));
                }
                ParamGrad::Rows(rows) => {
                    for (&r, g) in rows {
                        ndarray::Zip::from(param.row_mut(r))
                            .and(acc.row_mut(r))
                            .and(g)
                            .for_each(|p, a, &g| update(p, a, g, lr));
                    }
                }
            }
        }
    }
}

#[inline]
fn update(p: &mut f64, acc: &mut f64, g: f64, lr: f64) {
    *acc += g * g;
    *p -= lr * g / (*acc + ADAGRAD_EPSILON).sqrt();
}

/// One Adagrad update; see [`Adagrad::step`].
pub fn adagrad_step(params: &mut ParamStore, grads: &Gradients, state: &mut Adagrad) {
    state.step(params, grads);
}
