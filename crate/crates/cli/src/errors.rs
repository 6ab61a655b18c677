//! Error-to-exit-code mapping for the CLI.

use spawnsim_core::config::ConfigError;
use spawnsim_core::data::DataError;
use spawnsim_core::metrics::MetricsError;
use spawnsim_core::policy::PolicyError;
use spawnsim_core::sim::SimError;
use spawnsim_core::spatial::SpatialError;
use spawnsim_core::tpp::TppError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Invariant(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SpatialError> for CliError {
    fn from(e: SpatialError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TppError> for CliError {
    fn from(e: TppError) -> Self {
        match e {
            TppError::NoTrainingData | TppError::WindowExceedsHorizon { .. } => {
                CliError::Data(e.to_string())
            }
            TppError::InvalidOverlap { .. } | TppError::InvalidConfig(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::NoDemonstrations => CliError::Data(e.to_string()),
            PolicyError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::ConservationViolated { .. } | SimError::IncompleteLog(_) => {
                CliError::Invariant(e.to_string())
            }
            SimError::Policy(p) => p.into(),
            SimError::Tpp(t) => t.into(),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::EmptySample => CliError::Data(e.to_string()),
            MetricsError::Data(d) => d.into(),
            MetricsError::Sim(s) => s.into(),
            MetricsError::Tpp(t) => t.into(),
            MetricsError::Spatial(s) => s.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("json error: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Data("x".into()).exit_code(), 3);
        assert_eq!(CliError::Invariant("x".into()).exit_code(), 4);
        assert_eq!(CliError::Other("x".into()).exit_code(), 1);
    }

    #[test]
    fn core_errors_map_to_the_right_codes() {
        let conservation = SimError::ConservationViolated {
            frame: 3,
            spawned: 2,
            active: 0,
            exited: 1,
            timed_out: 0,
        };
        assert_eq!(CliError::from(conservation).exit_code(), 4);
        assert_eq!(
            CliError::from(DataError::EmptyDataset).exit_code(),
            3,
            "data problems exit 3"
        );
        assert_eq!(
            CliError::from(ConfigError::Invalid("bad".into())).exit_code(),
            2
        );
        assert_eq!(CliError::from(TppError::NoTrainingData).exit_code(), 3);
        assert_eq!(
            CliError::from(TppError::InvalidOverlap {
                window: 10.0,
                overlap: 10.0
            })
            .exit_code(),
            2
        );
    }
}

