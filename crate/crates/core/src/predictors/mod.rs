//! Trajectory predictors: two rule-based built-ins and a bridge to external
//! predictor processes speaking newline-delimited JSON.

mod constant_velocity;
mod external;
mod mpc;

pub use constant_velocity::predict_constant_velocity;
pub use external::{ExternalPredictor, PredictRequest, PredictResponse, DEFAULT_TIMEOUT};
pub use mpc::{predict_centerline_mpc, MpcConfig};

use crate::error::PredictError;
use crate::metrics::PredictionSet;
use crate::scene::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    ConstantVelocity,
    CenterlineMpc,
    External,
}

impl std::str::FromStr for PredictorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cv" | "constant_velocity" | "constant-velocity" => Ok(Self::ConstantVelocity),
            "mpc" | "centerline_mpc" | "centerline-mpc" => Ok(Self::CenterlineMpc),
            "external" => Ok(Self::External),
            other => Err(format!(
                "unknown predictor {other:?} (expected cv|mpc|external)"
            )),
        }
    }
}

/// Declarative predictor selection; realized by [`Predictor::from_handle`].
#[derive(Debug, Clone)]
pub struct PredictorHandle {
    pub kind: PredictorKind,
    pub external_command: Option<String>,
}

impl PredictorHandle {
    pub fn constant_velocity() -> Self {
        Self {
            kind: PredictorKind::ConstantVelocity,
            external_command: None,
        }
    }

    pub fn centerline_mpc() -> Self {
        Self {
            kind: PredictorKind::CenterlineMpc,
            external_command: None,
        }
    }

    pub fn external(command: impl Into<String>) -> Self {
        Self {
            kind: PredictorKind::External,
            external_command: Some(command.into()),
        }
    }
}

/// A ready-to-call predictor. Built-ins are pure; the external variant owns
/// one child process and serializes requests to it.
pub enum Predictor {
    ConstantVelocity,
    CenterlineMpc(MpcConfig),
    External(ExternalPredictor),
}

impl Predictor {
    pub fn from_handle(handle: &PredictorHandle) -> Result<Self, PredictError> {
        Self::from_handle_with(handle, MpcConfig::default())
    }

    pub fn from_handle_with(
        handle: &PredictorHandle,
        mpc: MpcConfig,
    ) -> Result<Self, PredictError> {
        match handle.kind {
            PredictorKind::ConstantVelocity => Ok(Predictor::ConstantVelocity),
            PredictorKind::CenterlineMpc => Ok(Predictor::CenterlineMpc(mpc)),
            PredictorKind::External => {
                let cmd = handle
                    .external_command
                    .as_deref()
                    .ok_or(PredictError::MissingCommand)?;
                Ok(Predictor::External(ExternalPredictor::spawn(cmd)?))
            }
        }
    }

    pub fn predict(&self, scn: &Scenario) -> Result<PredictionSet, PredictError> {
        match self {
            Predictor::ConstantVelocity => Ok(predict_constant_velocity(scn)),
            Predictor::CenterlineMpc(cfg) => predict_centerline_mpc(scn, cfg),
            Predictor::External(ext) => ext.predict(scn),
        }
    }
}
