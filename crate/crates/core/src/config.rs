//! TOML run configuration binding code, lift, decoder, channel and campaign.
//!
//! ```toml
//! [code]
//! base = [[3, 3]]
//! components = [[[1, 1]], [[1, 1]], [[1, 1]]]
//! length = 200
//!
//! [doping]
//! kind = "vn"
//! positions = [100]
//!
//! [lift]
//! factor = 500
//!
//! [window]
//! w_init = 9
//! w_max = 17
//!
//! [campaign]
//! snr_db = [1.2, 1.4]
//! frames = 100
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{DecoderError, UpdateRule, WindowConfig};
use crate::lifting::LiftSpec;
use crate::protograph::{build_chain, BaseMatrix, ChainError, CoupledChain, EdgeSpreading};
use crate::simulator::{CampaignConfig, SimError, Simulation};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    pub base: Vec<Vec<u32>>,
    pub components: Vec<Vec<Vec<u32>>>,
    /// Number of coupled blocks `L`.
    pub length: usize,
    #[serde(default = "yes")]
    pub terminated: bool,
}

fn yes() -> bool {
    true
}

impl Default for CodeConfig {
    fn default() -> Self {
        CodeConfig {
            base: vec![vec![3, 3]],
            components: vec![vec![vec![1, 1]]; 3],
            length: 500,
            terminated: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// Overrides the design rate used for `Eb/N0` normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub code: CodeConfig,
    #[serde(default)]
    pub doping: crate::protograph::DopingSpec,
    pub lift: LiftSpec,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub channel: ChannelSection,
    pub campaign: CampaignConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable in TOML")
    }

    pub fn spreading(&self) -> Result<EdgeSpreading, ConfigError> {
        let base = BaseMatrix::new(self.code.base.clone()).map_err(|e| invalid("code.base", e))?;
        let components = self
            .code
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                BaseMatrix::component(c.clone())
                    .map_err(|e| invalid(&format!("code.components[{i}]"), e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        EdgeSpreading::new(base, components).map_err(|e| invalid("code.components", e))
    }

    pub fn chain(&self) -> Result<CoupledChain, ConfigError> {
        let spreading = self.spreading()?;
        build_chain(
            spreading,
            self.code.length,
            self.doping.clone(),
            self.code.terminated,
        )
        .map_err(chain_error)
    }

    /// Cross-field validation. Runs before anything is built.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let chain = self.chain()?;
        let max_mult = chain
            .spreading()
            .components()
            .iter()
            .flat_map(|c| c.to_rows().into_iter().flatten())
            .max()
            .unwrap_or(0) as usize;
        if self.lift.lift == 0 {
            return Err(invalid("lift.factor", "must be at least 1"));
        }
        if self.lift.lift < max_mult {
            return Err(invalid(
                "lift.factor",
                format!("must be at least the largest component entry {max_mult}"),
            ));
        }
        validate_window(&self.window)?;
        if let Some(r) = self.channel.rate {
            if !(r > 0.0 && r < 1.0) {
                return Err(invalid(
                    "channel.rate",
                    format!("must lie in (0, 1), got {r}"),
                ));
            }
        }
        let c = &self.campaign;
        if c.frames == 0 {
            return Err(invalid("campaign.frames", "must be at least 1"));
        }
        if c.snr_points_db.is_empty() {
            return Err(invalid("campaign.snr_db", "needs at least one point"));
        }
        if let Some(x) = c
            .snr_points_db
            .iter()
            .find(|x| x.is_nan() || **x == f64::NEG_INFINITY)
        {
            return Err(invalid("campaign.snr_db", format!("invalid point {x}")));
        }
        if c.ep_run_threshold < 2 {
            return Err(invalid("campaign.ep_run_threshold", "must be at least 2"));
        }
        if let Some(b) = &c.burst {
            if b.length == 0 || b.end() > self.code.length {
                return Err(invalid(
                    "campaign.burst",
                    format!(
                        "blocks {}..{} must be a nonempty range inside the chain of length {}",
                        b.start_block,
                        b.end(),
                        self.code.length
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Builds the chain, lifts it and binds the decoder settings.
    pub fn build(&self) -> Result<Simulation, ConfigError> {
        self.validate()?;
        Simulation::new(self.chain()?, &self.lift, self.window, self.channel.rate).map_err(|e| {
            match e {
                SimError::Lift(e) => invalid("lift", e),
                SimError::Decoder(e) => invalid("window", e),
                e => invalid("channel", e),
            }
        })
    }
}

fn chain_error(e: ChainError) -> ConfigError {
    let path = match e {
        ChainError::EmptyBase | ChainError::RaggedMatrix | ChainError::NoEdges => "code.base",
        ChainError::NoComponents
        | ChainError::ShapeMismatch { .. }
        | ChainError::SumConstraintViolated { .. } => "code.components",
        ChainError::ChainTooShort { .. } => "code.length",
        ChainError::DopingOutOfRange { .. }
        | ChainError::DopingNotIncreasing
        | ChainError::DopingTooDense { .. } => "doping.positions",
    };
    invalid(path, e)
}

fn validate_window(w: &WindowConfig) -> Result<(), ConfigError> {
    if w.tau < 1 || w.tau > w.w_init {
        return Err(invalid(
            "window.tau",
            format!(
                "must satisfy 1 <= tau <= w_init = {}, got {}",
                w.w_init, w.tau
            ),
        ));
    }
    if w.w_init > w.w_max {
        return Err(invalid(
            "window.w_max",
            format!("must be at least w_init = {}, got {}", w.w_init, w.w_max),
        ));
    }
    if !(w.theta >= 0.0 && w.theta.is_finite()) {
        return Err(invalid(
            "window.theta",
            format!("must be finite and >= 0, got {}", w.theta),
        ));
    }
    if w.i_max == 0 {
        return Err(invalid("window.i_max", "must be at least 1"));
    }
    if let UpdateRule::MinSum { scale } = w.update_rule {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(invalid(
                "window.update_rule",
                format!("scale must lie in (0, 1], got {scale}"),
            ));
        }
    }
    w.validate().map_err(|e| match e {
        DecoderError::InvalidConfig(msg) => invalid("window", msg),
        e => invalid("window", e),
    })
}
