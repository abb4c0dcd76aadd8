//! Layers, activations, losses and the critic gradient penalty, built on the tape.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Probabilities entering a log loss are clamped to `[LOG_EPS, 1 - LOG_EPS]`.
pub const LOG_EPS: f64 = 1e-7;
/// Added under the square root of the penalty's gradient norm.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
}

pub fn activate<T: Real>(t: &mut Tape<T>, x: Var, act: Activation) -> Var {
    match act {
        Activation::Identity => x,
        Activation::Relu => t.relu(x),
        Activation::Tanh => t.tanh(x),
        Activation::Sigmoid => t.sigmoid(x),
        Activation::Softmax => t.softmax(x),
    }
}

/// `act(input · weights + bias)` for `input` n×k, `weights` k×m, `bias` 1×m.
pub fn dense<T: Real>(
    t: &mut Tape<T>,
    input: Var,
    weights: Var,
    bias: Var,
    act: Activation,
) -> Result<Var> {
    let (_, k) = t.shape(input);
    let (wk, m) = t.shape(weights);
    if k != wk {
        return Err(Error::Shape(format!(
            "dense input has {k} columns, weights expect {wk}"
        )));
    }
    if t.shape(bias) != (1, m) {
        return Err(Error::Shape(format!(
            "dense bias is {:?}, expected (1, {m})",
            t.shape(bias)
        )));
    }
    let h = t.matmul(input, weights);
    let h = t.add_row(h, bias);
    Ok(activate(t, h, act))
}

/// Standard Gumbel noise `-ln(-ln u)` with `u` uniform on the open unit interval.
pub fn gumbel_noise<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix<T> {
    let data = (0..rows * cols)
        .map(|_| {
            let u: f64 = loop {
                let u: f64 = rng.gen();
                if u > 0.0 {
                    break u;
                }
            };
            T::of(-(-u.ln()).ln())
        })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape")
}

/// Row-wise `softmax((logits + noise) / tau)` with the noise held fixed, so the
/// output is differentiable in the logits.
pub fn gumbel_softmax_with_noise<T: Real>(
    t: &mut Tape<T>,
    logits: Var,
    noise: Matrix<T>,
    tau: T,
) -> Var {
    assert!(tau > T::zero(), "temperature must be positive");
    let g = t.leaf(noise);
    let z = t.add(logits, g);
    let z = t.scale(z, T::one() / tau);
    t.softmax(z)
}

pub fn gumbel_softmax<T: Real, R: Rng + ?Sized>(
    t: &mut Tape<T>,
    logits: Var,
    tau: T,
    rng: &mut R,
) -> Var {
    let (r, c) = t.shape(logits);
    let noise = gumbel_noise(r, c, rng);
    gumbel_softmax_with_noise(t, logits, noise, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    BinaryCrossEntropy,
    MeanSquaredError,
    /// `KL(N(mu, exp(log_var)) || N(0, I))`; called with `prediction = mu`
    /// and `target = log_var`.
    KlStandardNormal,
}

/// Batch-mean loss: per-row terms are summed over columns and averaged over rows.
pub fn loss<T: Real>(t: &mut Tape<T>, kind: LossKind, prediction: Var, target: Var) -> Var {
    assert_eq!(t.shape(prediction), t.shape(target), "loss shape mismatch");
    let n = T::of_usize(t.shape(prediction).0.max(1));
    let eps = T::of(LOG_EPS);
    let per_batch = match kind {
        LossKind::CrossEntropy => {
            let p = t.clamp(prediction, eps, T::one() - eps);
            let lp = t.ln(p);
            let s = t.mul(target, lp);
            let s = t.sum(s);
            t.neg(s)
        }
        LossKind::BinaryCrossEntropy => {
            let p = t.clamp(prediction, eps, T::one() - eps);
            let lp = t.ln(p);
            let q = t.rsub(T::one(), p);
            let lq = t.ln(q);
            let not_target = t.rsub(T::one(), target);
            let a = t.mul(target, lp);
            let b = t.mul(not_target, lq);
            let s = t.add(a, b);
            let s = t.sum(s);
            t.neg(s)
        }
        LossKind::MeanSquaredError => {
            let d = t.sub(prediction, target);
            let d2 = t.square(d);
            t.sum(d2)
        }
        LossKind::KlStandardNormal => {
            let (mu, log_var) = (prediction, target);
            let mu2 = t.square(mu);
            let var = t.exp(log_var);
            let a = t.shift(log_var, T::one());
            let a = t.sub(a, mu2);
            let a = t.sub(a, var);
            let s = t.sum(a);
            t.scale(s, T::of(-0.5))
        }
    };
    t.scale(per_batch, T::one() / n)
}

/// Binary cross-entropy computed from logits, `softplus(-l)` for positive
/// targets and `softplus(l)` for negative ones, summed over columns and
/// averaged over rows. Stable for any logit magnitude.
pub fn logistic_loss<T: Real>(t: &mut Tape<T>, logits: Var, positive: bool) -> Var {
    let n = T::of_usize(t.shape(logits).0.max(1));
    let z = if positive { t.neg(logits) } else { logits };
    // softplus(z) = max(z, 0) + ln(1 + exp(-|z|))
    let pos = t.relu(z);
    let nz = t.neg(z);
    let neg = t.relu(nz);
    let abs = t.add(pos, neg);
    let e = t.neg(abs);
    let e = t.exp(e);
    let e = t.shift(e, T::one());
    let l = t.ln(e);
    let sp = t.add(pos, l);
    let s = t.sum(sp);
    t.scale(s, T::one() / n)
}

/// Mixes real and fake rows with one uniform weight per row:
/// `eps * real + (1 - eps) * fake`.
pub fn interpolate<T: Real, R: Rng + ?Sized>(
    real: &Matrix<T>,
    fake: &Matrix<T>,
    rng: &mut R,
) -> Matrix<T> {
    assert_eq!(real.shape(), fake.shape(), "interpolate shape mismatch");
    let mut out = fake.clone();
    for i in 0..real.rows() {
        let e = T::of(rng.gen::<f64>());
        for (o, (&r, &f)) in out
            .row_mut(i)
            .iter_mut()
            .zip(real.row(i).iter().zip(fake.row(i)))
        {
            *o = e * r + (T::one() - e) * f;
        }
    }
    out
}

/// Mean over rows of `(‖∇ₓ critic(x)‖₂ − 1)²` at `x_hat`, with the norm
/// stabilised as `sqrt(Σg² + 1e-12)`. The result stays on the tape and can be
/// differentiated with respect to the critic parameters.
pub fn gradient_penalty<T, F>(t: &mut Tape<T>, mut critic: F, x_hat: Var) -> Var
where
    T: Real,
    F: FnMut(&mut Tape<T>, Var) -> Var,
{
    let scores = critic(t, x_hat);
    let total = t.sum(scores);
    let g = t.grad(total, &[x_hat])[0];
    let g2 = t.square(g);
    let norm2 = t.sum_rows(g2);
    let norm2 = t.shift(norm2, T::of(NORM_EPS));
    let norm = t.sqrt(norm2);
    let d = t.shift(norm, -T::one());
    let d2 = t.square(d);
    t.mean(d2)
}
