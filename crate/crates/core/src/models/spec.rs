use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diff::Activation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Vae,
    Gan,
    Wgan,
    WganGp,
    Medgan,
    Arae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    MultiVariable,
}

/// How class-targeted samples are obtained from a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    /// Unconditional model fit on minority rows only.
    Minority,
    /// Label fed to generator and discriminator/critic.
    Conditional,
    /// Label modeled as a trailing binary variable; wrong-class draws discarded.
    Rejection,
}

impl SamplingKind {
    pub const ALL: [SamplingKind; 3] = [
        SamplingKind::Minority,
        SamplingKind::Conditional,
        SamplingKind::Rejection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SamplingKind::Minority => "minority",
            SamplingKind::Conditional => "conditional",
            SamplingKind::Rejection => "rejection",
        }
    }

    /// Capitalised form used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            SamplingKind::Minority => "Minority",
            SamplingKind::Conditional => "Conditional",
            SamplingKind::Rejection => "Rejection",
        }
    }
}

impl fmt::Display for SamplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minority" => Ok(Self::Minority),
            "conditional" => Ok(Self::Conditional),
            "rejection" => Ok(Self::Rejection),
            _ => Err(Error::Config(format!("unknown sampling strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Epochs of autoencoder pre-training (MedGAN).
    pub pretrain_epochs: usize,
    pub batch_size: usize,
    /// Early-stopping patience on validation reconstruction; autoencoder models only.
    pub patience: usize,
    pub lr_autoencoder: f64,
    pub lr_adversarial: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta1_adversarial: f64,
    pub beta2_adversarial: f64,
    pub n_critic: usize,
    pub clamp: f64,
    pub gp_weight: f64,
    /// Standard deviation of Gaussian noise added to real and generated rows
    /// before the plain GAN discriminator.
    pub instance_noise: f64,
    /// Decay of the exponential moving average of generator weights used
    /// for sampling; 0 keeps the final iterate.
    pub generator_ema: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            pretrain_epochs: 100,
            batch_size: 64,
            patience: 30,
            lr_autoencoder: 1e-3,
            lr_adversarial: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            beta1_adversarial: 0.5,
            beta2_adversarial: 0.999,
            n_critic: 5,
            clamp: 0.01,
            gp_weight: 10.0,
            instance_noise: 0.0,
            generator_ema: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub variant: Variant,
    pub hidden: Vec<usize>,
    pub latent: usize,
    /// Per-variable embedding width (multi-variable inputs).
    pub embedding: usize,
    /// Gumbel-softmax temperature (multi-variable categorical heads).
    pub tau: f64,
    pub hidden_activation: Activation,
    pub conditional: bool,
    pub label_as_variable: bool,
    pub training: TrainConfig,
}

/// Model identifiers used on the command line and in reports.
pub const MODEL_NAMES: [&str; 9] = [
    "vae",
    "mv-vae",
    "gan",
    "mv-wgan",
    "mv-wgan-gp",
    "medgan",
    "mv-medgan",
    "arae",
    "mv-arae",
];

impl ModelSpec {
    pub fn new(architecture: Architecture, variant: Variant) -> Self {
        Self {
            architecture,
            variant,
            hidden: vec![128, 128],
            latent: 32,
            embedding: 16,
            tau: 0.66,
            hidden_activation: Activation::Relu,
            conditional: false,
            label_as_variable: false,
            training: TrainConfig::default(),
        }
        .with_architecture_defaults()
    }

    /// Plain GAN defaults: annealed instance noise and an averaged generator.
    fn with_architecture_defaults(mut self) -> Self {
        if self.architecture == Architecture::Gan {
            self.training.instance_noise = 0.5;
            self.training.generator_ema = 0.999;
        }
        self
    }

    /// Parses `vae`, `mv-vae`, `gan`, `mv-wgan`, `mv-wgan-gp`, `medgan`,
    /// `mv-medgan`, `arae` or `mv-arae`.
    pub fn from_name(name: &str) -> Result<Self> {
        use Architecture::*;
        use Variant::*;
        let (a, v) = match name {
            "vae" => (Vae, Plain),
            "mv-vae" => (Vae, MultiVariable),
            "gan" => (Gan, Plain),
            "mv-wgan" => (Wgan, MultiVariable),
            "mv-wgan-gp" => (WganGp, MultiVariable),
            "medgan" => (Medgan, Plain),
            "mv-medgan" => (Medgan, MultiVariable),
            "arae" => (Arae, Plain),
            "mv-arae" => (Arae, MultiVariable),
            _ => return Err(Error::Config(format!("unknown model `{name}`"))),
        };
        let s = Self::new(a, v);
        s.validate()?;
        Ok(s)
    }

    pub fn name(&self) -> String {
        let base = match self.architecture {
            Architecture::Vae => "vae",
            Architecture::Gan => "gan",
            Architecture::Wgan => "wgan",
            Architecture::WganGp => "wgan-gp",
            Architecture::Medgan => "medgan",
            Architecture::Arae => "arae",
        };
        match self.variant {
            Variant::Plain => base.to_string(),
            Variant::MultiVariable => format!("mv-{base}"),
        }
    }

    pub fn for_strategy(mut self, kind: SamplingKind) -> Self {
        self.conditional = kind == SamplingKind::Conditional;
        self.label_as_variable = kind == SamplingKind::Rejection;
        self
    }

    pub fn strategy(&self) -> SamplingKind {
        if self.conditional {
            SamplingKind::Conditional
        } else if self.label_as_variable {
            SamplingKind::Rejection
        } else {
            SamplingKind::Minority
        }
    }

    pub fn is_multi_variable(&self) -> bool {
        self.variant == Variant::MultiVariable
    }

    pub fn has_autoencoder(&self) -> bool {
        matches!(
            self.architecture,
            Architecture::Vae | Architecture::Medgan | Architecture::Arae
        )
    }

    pub fn validate(&self) -> Result<()> {
        use Architecture::*;
        match (self.architecture, self.variant) {
            (Wgan | WganGp, Variant::Plain) => {
                return Err(Error::Config(
                    "wgan and wgan-gp exist only as multi-variable models".into(),
                ))
            }
            (Gan, Variant::MultiVariable) => {
                return Err(Error::Config(
                    "the multi-variable GAN is the WGAN (use mv-wgan)".into(),
                ))
            }
            _ => {}
        }
        if self.conditional && self.label_as_variable {
            return Err(Error::Config(
                "conditioning and label-as-variable are mutually exclusive".into(),
            ));
        }
        if self.latent == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.is_multi_variable() && self.embedding == 0 {
            return Err(Error::Config("embedding width must be positive".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.tau
            )));
        }
        let tc = &self.training;
        if tc.batch_size == 0 || tc.n_critic == 0 {
            return Err(Error::Config(
                "batch size and critic steps must be positive".into(),
            ));
        }
        if !(tc.clamp > 0.0) || !(tc.lr_autoencoder > 0.0) || !(tc.lr_adversarial > 0.0) {
            return Err(Error::Config(
                "clamp and learning rates must be positive".into(),
            ));
        }
        if !(tc.instance_noise >= 0.0) || !(0.0..1.0).contains(&tc.generator_ema) {
            return Err(Error::Config(
                "instance noise must be non-negative and EMA decay in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}
