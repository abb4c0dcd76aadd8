use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arch::{condition_matrix, Networks};
use super::spec::ModelSpec;
use super::train::{EpochRecord, TrainStats};
use crate::diff::ParamSet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::seeded;
use crate::tabular::{total_width, VariableMeta};

pub const MODEL_FORMAT: u32 = 1;

/// Rows generated per tape.
const CHUNK: usize = 1024;

/// A fitted generator: spec, metadata, parameters and training record.
/// Immutable after training; `generate` only reads it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedGenerator {
    pub format: u32,
    pub toolkit_version: String,
    pub spec: ModelSpec,
    /// Metadata of the generated space (ends with the label variable for
    /// label-as-variable models).
    pub meta: Vec<VariableMeta>,
    pub seed: u64,
    pub params: ParamSet<f64>,
    pub trained_on: Vec<usize>,
    pub fingerprint: String,
    pub history: Vec<EpochRecord>,
    pub stats: TrainStats,
    #[serde(skip)]
    nets: OnceLock<Networks>,
}

impl TrainedGenerator {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        spec: ModelSpec,
        meta: Vec<VariableMeta>,
        seed: u64,
        params: ParamSet<f64>,
        trained_on: Vec<usize>,
        fingerprint: String,
        history: Vec<EpochRecord>,
        stats: TrainStats,
    ) -> Self {
        Self {
            format: MODEL_FORMAT,
            toolkit_version: crate::VERSION.to_string(),
            spec,
            meta,
            seed,
            params,
            trained_on,
            fingerprint,
            history,
            stats,
            nets: OnceLock::new(),
        }
    }

    pub fn width(&self) -> usize {
        total_width(&self.meta)
    }

    pub fn networks(&self) -> &Networks {
        self.nets.get_or_init(|| {
            Networks::build(&self.spec, &self.meta, 0, &mut seeded(0))
                .expect("spec validated when loaded")
                .0
        })
    }

    /// `n` raw rows (before discretization). `condition` is the class to
    /// generate and must be given exactly when the model is conditional.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
        condition: Option<u8>,
    ) -> Result<Matrix<f64>> {
        if n == 0 {
            return Err(Error::Config(
                "number of rows to generate must be at least 1".into(),
            ));
        }
        match (self.spec.conditional, condition) {
            (true, None) => {
                return Err(Error::StrategyMismatch(
                    "conditional model needs a class condition".into(),
                ))
            }
            (false, Some(_)) => {
                return Err(Error::StrategyMismatch(
                    "condition given to an unconditional model".into(),
                ))
            }
            _ => {}
        }
        let nets = self.networks();
        let mut out = Matrix::zeros(0, self.width());
        let mut left = n;
        while left > 0 {
            let m = left.min(CHUNK);
            let cond = condition.map(|c| condition_matrix(m, c));
            let part = nets.sample(&self.params, m, cond.as_ref(), rng);
            out = Matrix::vconcat(&[&out, &part]);
            left -= m;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::json("serializing model", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(text).map_err(|e| Error::json("parsing model", e))?;
        if g.format != MODEL_FORMAT {
            return Err(Error::Schema(format!(
                "model format {} unsupported",
                g.format
            )));
        }
        g.spec.validate()?;
        for v in &g.meta {
            v.check()?;
        }
        if !g.params.all_finite() {
            return Err(Error::Schema("model parameters are not finite".into()));
        }
        // every expected parameter must be present with the right shape
        let (_, fresh) = Networks::build(&g.spec, &g.meta, 0, &mut seeded(0))?;
        for (name, m) in fresh.iter() {
            match g.params.get(name) {
                Some(p) if p.shape() == m.shape() => {}
                _ => {
                    return Err(Error::Schema(format!(
                        "model parameter `{name}` missing or misshapen"
                    )))
                }
            }
        }
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
