//! Named parameter arrays, Adam, and weight clipping.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

pub const PARAMSET_VERSION: u32 = 1;

/// Named parameter arrays. Names are kept in a `BTreeMap`, so iteration and
/// serialization order are fixed for a given content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ParamSet<T> {
    pub version: u32,
    pub seed: u64,
    params: BTreeMap<String, Matrix<T>>,
}

impl<T: Real> ParamSet<T> {
    pub fn new(seed: u64) -> Self {
        Self {
            version: PARAMSET_VERSION,
            seed,
            params: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix<T>) {
        self.params.insert(name.into(), value);
    }

    /// Glorot-uniform `name.w` (fan_in×fan_out) and zero `name.b` (1×fan_out).
    pub fn add_dense<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        self.insert(
            format!("{name}.w"),
            Matrix::uniform(fan_in, fan_out, limit, rng),
        );
        self.insert(format!("{name}.b"), Matrix::zeros(1, fan_out));
    }

    pub fn get(&self, name: &str) -> Option<&Matrix<T>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix<T>> {
        self.params.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Matrix<T>)> {
        self.params.iter()
    }

    pub fn names_with_prefix<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = &'a String> + 'a {
        self.params.keys().filter(move |k| k.starts_with(prefix))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.params.values().all(Matrix::all_finite)
    }

    /// Places every parameter on the tape as a leaf.
    pub fn bind(&self, tape: &mut Tape<T>) -> Bound {
        Bound {
            vars: self
                .params
                .iter()
                .map(|(k, v)| (k.clone(), tape.leaf(v.clone())))
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::json("serializing parameters", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self =
            serde_json::from_str(text).map_err(|e| Error::json("parsing parameters", e))?;
        if p.version != PARAMSET_VERSION {
            return Err(Error::Schema(format!(
                "parameter file version {} unsupported",
                p.version
            )));
        }
        Ok(p)
    }
}

/// Tape handles for a bound [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("parameter `{name}` not bound"))
    }

    /// Gradients of `loss` for every bound parameter whose name starts with
    /// one of `prefixes`.
    pub fn grads<T: Real>(
        &self,
        tape: &mut Tape<T>,
        loss: Var,
        prefixes: &[&str],
    ) -> BTreeMap<String, Matrix<T>> {
        let chosen: Vec<(&String, Var)> = self
            .vars
            .iter()
            .filter(|(k, _)| prefixes.iter().any(|p| k.starts_with(p)))
            .map(|(k, &v)| (k, v))
            .collect();
        let vars: Vec<Var> = chosen.iter().map(|&(_, v)| v).collect();
        let g = tape.grad(loss, &vars);
        chosen
            .iter()
            .zip(g)
            .map(|(&(k, _), gv)| (k.clone(), tape.value(gv).clone()))
            .collect()
    }
}

/// Adam moments for a parameter subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AdamState<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    m: BTreeMap<String, Matrix<T>>,
    v: BTreeMap<String, Matrix<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(beta1: f64, beta2: f64) -> Self {
        Self {
            beta1: T::of(beta1),
            beta2: T::of(beta2),
            eps: T::of(1e-8),
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn first_moment(&self, name: &str) -> Option<&Matrix<T>> {
        self.m.get(name)
    }
}

impl<T: Real> Default for AdamState<T> {
    fn default() -> Self {
        Self::new(0.9, 0.999)
    }
}

/// One bias-corrected Adam update of the parameters named in `grads`.
/// Rejects the whole step if any gradient entry is non-finite.
pub fn adam_step<T: Real>(
    params: &mut ParamSet<T>,
    grads: &BTreeMap<String, Matrix<T>>,
    state: &mut AdamState<T>,
    lr: T,
) -> Result<()> {
    for (name, g) in grads {
        if !g.all_finite() {
            return Err(Error::NonFiniteGradient {
                param: name.clone(),
                context: format!("adam step {}", state.step + 1),
            });
        }
        let p = params
            .get(name)
            .ok_or_else(|| Error::Config(format!("gradient for unknown parameter `{name}`")))?;
        if p.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "gradient for `{name}` is {:?}, parameter {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    for (name, g) in grads {
        let (rows, cols) = g.shape();
        let m = state
            .m
            .entry(name.clone())
            .or_insert_with(|| Matrix::zeros(rows, cols));
        let v = state
            .v
            .entry(name.clone())
            .or_insert_with(|| Matrix::zeros(rows, cols));
        let p = params.get_mut(name).expect("checked above");
        for (((pi, mi), vi), &gi) in p
            .as_mut_slice()
            .iter_mut()
            .zip(m.as_mut_slice())
            .zip(v.as_mut_slice())
            .zip(g.as_slice())
        {
            *mi = b1 * *mi + (T::one() - b1) * gi;
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
            let mhat = *mi / c1;
            let vhat = *vi / c2;
            *pi -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Clips every parameter whose name starts with `prefix` into `[-c, c]`.
pub fn clamp_params<T: Real>(params: &mut ParamSet<T>, prefix: &str, c: T) {
    assert!(c > T::zero(), "clamp bound must be positive");
    for (name, m) in params.params.iter_mut() {
        if name.starts_with(prefix) {
            m.as_mut_slice()
                .iter_mut()
                .for_each(|x| *x = x.max(-c).min(c));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn single(value: f64) -> ParamSet<f64> {
        let mut p = ParamSet::new(0);
        p.insert("w", Matrix::filled(1, 1, value));
        p
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = single(0.5);
        let mut s = AdamState::default();
        let g1 = BTreeMap::from([("w".to_string(), Matrix::filled(1, 1, 1.0))]);
        adam_step(&mut p, &g1, &mut s, 0.1).unwrap();
        let after_first = p.get("w").unwrap()[(0, 0)];
        let m1 = s.first_moment("w").unwrap()[(0, 0)];
        let g0 = BTreeMap::from([("w".to_string(), Matrix::filled(1, 1, 0.0))]);
        let mut fresh = single(0.5);
        let mut fresh_state = AdamState::default();
        adam_step(&mut fresh, &g0, &mut fresh_state, 0.1).unwrap();
        assert_eq!(fresh.get("w").unwrap()[(0, 0)], 0.5);
        adam_step(&mut p, &g0, &mut s, 0.1).unwrap();
        assert!((s.first_moment("w").unwrap()[(0, 0)] - 0.9 * m1).abs() < 1e-15);
        // the decayed moment still moves the parameter; only a fresh zero step is a no-op
        assert!(p.get("w").unwrap()[(0, 0)] < after_first);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        for g in [3.0, -0.02] {
            let mut p = single(1.0);
            let mut s = AdamState::default();
            let grads = BTreeMap::from([("w".to_string(), Matrix::filled(1, 1, g))]);
            adam_step(&mut p, &grads, &mut s, 1e-3).unwrap();
            // hand computation: mhat = g, vhat = g^2, step = lr * g / (|g| + 1e-8)
            let expected = 1.0 - 1e-3 * g / (g.abs() + 1e-8);
            assert!((p.get("w").unwrap()[(0, 0)] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_update() {
        let mut p = single(1.0);
        let mut s = AdamState::default();
        let grads = BTreeMap::from([("w".to_string(), Matrix::filled(1, 1, f64::NAN))]);
        let err = adam_step(&mut p, &grads, &mut s, 1e-3).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { .. }));
        assert_eq!(p.get("w").unwrap()[(0, 0)], 1.0);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn clamp_behaviour() {
        let mut p = single(0.02);
        p.insert("other", Matrix::filled(1, 1, 5.0));
        clamp_params(&mut p, "w", 0.01);
        assert_eq!(p.get("w").unwrap()[(0, 0)], 0.01);
        assert_eq!(p.get("other").unwrap()[(0, 0)], 5.0);

        let mut rng = seeded(1);
        let mut q = ParamSet::<f64>::new(1);
        q.add_dense("critic.l0", 7, 5, &mut rng);
        q.insert("critic.l0.b", Matrix::uniform(1, 5, 1.0, &mut rng));
        let before = q.clone();
        clamp_params(&mut q, "critic", 0.01);
        let max = q.iter().map(|(_, m)| m.max_abs()).fold(0.0, f64::max);
        assert_eq!(max, 0.01);
        // entries already inside the bound are untouched
        for ((_, a), (_, b)) in before.iter().zip(q.iter()) {
            for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
                if x.abs() <= 0.01 {
                    assert_eq!(x, y);
                }
            }
        }
    }

    #[test]
    fn identical_runs_give_identical_trajectories() {
        let run = || {
            let mut rng = seeded(11);
            let mut p = ParamSet::<f64>::new(11);
            p.add_dense("l", 3, 2, &mut rng);
            let mut s = AdamState::default();
            for _ in 0..5 {
                let mut t = Tape::new();
                let b = p.bind(&mut t);
                let x = t.leaf(Matrix::uniform(4, 3, 1.0, &mut rng));
                let y = crate::diff::nn::dense(
                    &mut t,
                    x,
                    b.var("l.w"),
                    b.var("l.b"),
                    crate::diff::Activation::Tanh,
                )
                .unwrap();
                let l = t.mean(y);
                let g = b.grads(&mut t, l, &["l"]);
                adam_step(&mut p, &g, &mut s, 1e-2).unwrap();
            }
            p.to_json().unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let mut rng = seeded(2);
        let mut p = ParamSet::<f64>::new(2);
        p.add_dense("a", 2, 3, &mut rng);
        let text = p.to_json().unwrap();
        assert_eq!(ParamSet::from_json(&text).unwrap(), p);
        let bumped = text.replacen("\"version\":1", "\"version\":9", 1);
        assert!(ParamSet::<f64>::from_json(&bumped).is_err());
    }
}
