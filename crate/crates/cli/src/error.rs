//! Process-level error classes mapped to exit codes: configuration errors
//! exit 2, data errors 3, numerical failures 4.

use regretcal_core::binning::BinningError;
use regretcal_core::dataset::DatasetError;
use regretcal_core::decision::DecisionError;
use regretcal_core::grouping::GroupingError;
use regretcal_core::metrics::MetricsError;
use regretcal_core::recalibration::RecalError;
use regretcal_core::regret::RegretError;
use regretcal_core::synthetic::SyntheticError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Data(_) => 3,
            AppError::Numeric(_) => 4,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        AppError::Config(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        AppError::Data(message.into())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<DatasetError> for AppError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::BadFractions => AppError::Config(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<DecisionError> for AppError {
    fn from(e: DecisionError) -> Self {
        match e {
            DecisionError::EmptyDataset => AppError::Data(e.to_string()),
            _ => AppError::Config(e.to_string()),
        }
    }
}

impl From<BinningError> for AppError {
    fn from(e: BinningError) -> Self {
        match e {
            BinningError::NonPositiveBins => AppError::Config(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<RecalError> for AppError {
    fn from(e: RecalError) -> Self {
        match e {
            RecalError::SingularSystem => AppError::Numeric(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<GroupingError> for AppError {
    fn from(e: GroupingError) -> Self {
        match e {
            GroupingError::Recalibration(RecalError::SingularSystem) => {
                AppError::Numeric(e.to_string())
            }
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<RegretError> for AppError {
    fn from(e: RegretError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<MetricsError> for AppError {
    fn from(e: MetricsError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<SyntheticError> for AppError {
    fn from(e: SyntheticError) -> Self {
        match e {
            SyntheticError::InadmissibleSpec { .. }
            | SyntheticError::UnsupportedThreshold { .. }
            | SyntheticError::InvalidSampleCount
            | SyntheticError::TooManyLevels { .. } => AppError::Config(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Data(e.to_string())
    }
}
