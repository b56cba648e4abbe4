use thiserror::Error;

use volrisk::backtest::BacktestError;
use volrisk::bachelier::PricingError;
use volrisk::fhs::FhsError;
use volrisk::kldecomp::KlError;
use volrisk::synth::SynthError;
use volrisk::volgrid::VolGridError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{count} price curve(s) violate static no-arbitrage; see {report}")]
    Arbitrage { count: usize, report: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Arbitrage { .. } => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<VolGridError> for CliError {
    fn from(e: VolGridError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<KlError> for CliError {
    fn from(e: KlError) -> Self {
        match e {
            KlError::TooManyModes { .. } | KlError::BasisMismatch(_) | KlError::GridTooSmall { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FhsError> for CliError {
    fn from(e: FhsError) -> Self {
        match e {
            FhsError::Kl(k) => k.into(),
            FhsError::InvalidParameter(_) | FhsError::SeriesTooShort { .. } | FhsError::InsufficientHistory { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<PricingError> for CliError {
    fn from(e: PricingError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<BacktestError> for CliError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::UnknownAlpha(_) | BacktestError::InvalidAlpha(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
