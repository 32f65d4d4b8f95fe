use clap::{Args, ValueEnum};
use serde::Serialize;

use qubus_core::detectors::DetectorModel;
use qubus_core::gates::{default_alpha, GateParams};
use qubus_core::program::Variant;

pub const VERSION: &str = concat!("qubus-sim ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Simplified,
    Original,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Simplified => Variant::Simplified,
            VariantArg::Original => Variant::Original,
        }
    }
}

/// Flags shared by every subcommand. Unset values take a per-subcommand
/// default, and the resolved values are echoed in the output.
#[derive(Clone, Debug, Args)]
pub struct ConfigArgs {
    /// Cross-Kerr phase per photon [rad]. Default 0.1 for gates, 0.01 for
    /// detector analytics.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Qubus amplitude. Default puts 60 mean photons in each detected beam
    /// (gates) or 1000 (detector analytics).
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Probe amplitude of the photon-number detection module.
    #[arg(long, global = true, default_value_t = 1e3)]
    pub gamma: f64,
    /// Detector efficiency.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub eta: f64,
    /// Probability mass allowed to be left out of outcome enumeration.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub epsilon: f64,
    /// Seed for the demo sampler.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = VariantArg::Simplified)]
    pub variant: VariantArg,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RunConfig {
    pub theta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub variant: Variant,
}

impl RunConfig {
    pub fn for_gates(a: &ConfigArgs) -> Self {
        let theta = a.theta.unwrap_or(0.1);
        Self {
            theta,
            alpha: a.alpha.unwrap_or_else(|| default_alpha(theta)),
            gamma: a.gamma,
            eta: a.eta,
            epsilon: a.epsilon,
            seed: a.seed,
            variant: a.variant.into(),
        }
    }

    pub fn for_analytics(a: &ConfigArgs) -> Self {
        Self {
            theta: a.theta.unwrap_or(0.01),
            alpha: a.alpha.unwrap_or(1e3),
            ..Self::for_gates(a)
        }
    }

    pub fn detector(&self) -> DetectorModel {
        DetectorModel {
            eta: self.eta,
            gamma: self.gamma,
            epsilon: self.epsilon,
            ..DetectorModel::default()
        }
    }

    pub fn gate_params(&self) -> GateParams {
        GateParams {
            alpha: self.alpha,
            theta: self.theta,
            variant: self.variant,
            detector: self.detector(),
        }
    }
}
